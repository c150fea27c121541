//! Two negative results made executable.
//!
//! * For `f(x1, x2) = |x1 - x2|` and `X = (Z, Z)`, where `Z` jumps by `1/l` at
//!   `2 - 1/l`, the first-factor SU sum on a partition that resolves the first
//!   `n` jumps equals the harmonic number `H_n`, which diverges.
//! * The right-point and left-point Riemann sums of `∫B dB` differ by the
//!   realized quadratic variation, so a one-step delay in the update order
//!   moves `[B, B](T) ≈ T` between the two limits.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::Result;
use crate::simulate::simulate_brownian;

/// Jump time of the `l`-th jump, `2 - 1/l`.
pub fn harmonic_jump_time(l: usize) -> f64 {
    2.0 - 1.0 / l as f64
}

/// Non-negative rational `num/den`, kept unreduced.
#[derive(Debug, Clone, PartialEq)]
struct Rational {
    num: BigUint,
    den: BigUint,
}

impl Rational {
    fn zero() -> Self {
        Self {
            num: BigUint::zero(),
            den: BigUint::one(),
        }
    }

    fn unit_fraction(l: usize) -> Self {
        Self {
            num: BigUint::one(),
            den: BigUint::from(l),
        }
    }

    fn add(&self, other: &Rational) -> Rational {
        if self.num.is_zero() {
            return other.clone();
        }
        if other.num.is_zero() {
            return self.clone();
        }
        Rational {
            num: &self.num * &other.den + &other.num * &self.den,
            den: &self.den * &other.den,
        }
    }

    /// Correctly rounded (nearest, ties to even) conversion.
    fn to_f64(&self) -> f64 {
        if self.num.is_zero() {
            return 0.0;
        }
        let k = self.num.bits() as i64 - self.den.bits() as i64;
        // q = floor(num·2^s / den) has 55 or 56 bits
        let s = 55 - k;
        let (n, d) = if s >= 0 {
            (&self.num << s as usize, self.den.clone())
        } else {
            (self.num.clone(), &self.den << (-s) as usize)
        };
        let q = &n / &d;
        let sticky = !(&n % &d).is_zero();
        let extra = q.bits() - 53;
        let mut mant = (&q >> extra as usize).to_u64().expect("53-bit mantissa");
        let low = &q - (BigUint::from(mant) << extra as usize);
        let half = BigUint::one() << (extra - 1) as usize;
        if low > half || (low == half && (sticky || mant & 1 == 1)) {
            mant += 1;
        }
        mant as f64 * 2f64.powi(extra as i32 - s as i32)
    }
}

/// Sum of `terms[a..b]` by balanced splitting, so operand sizes stay matched.
fn split_sum(terms: &[Rational]) -> Rational {
    match terms.len() {
        0 => Rational::zero(),
        1 => terms[0].clone(),
        len => {
            let (lo, hi) = terms.split_at(len / 2);
            split_sum(lo).add(&split_sum(hi))
        }
    }
}

/// The first-factor SU addends `f(X1^{s_{l+1}}(2), X2^{s_l}(2)) - f(X^{s_l}(2))`
/// on the partition `0, 2 - 1/1, …, 2 - 1/n, 3`, as exact rationals.
fn harmonic_terms(n: usize) -> Vec<Rational> {
    // jumps of Z: (index l, size 1/l) at 2 - 1/l; the partition resolves each one
    let jump_index: Vec<usize> = (1..=n).collect();
    let mut partition: Vec<usize> = vec![0];
    partition.extend(&jump_index);
    // the final partition point 3 lies past t = 2 and no jump sits in (2 - 1/n, 2]
    let mut terms = Vec::with_capacity(n);
    for w in partition.windows(2) {
        let (from, to) = (w[0], w[1]);
        // Z(s_{l+1}) - Z(s_l) is the sum of jumps with index in (from, to]
        let delta = split_sum(&(from + 1..=to).map(Rational::unit_fraction).collect::<Vec<_>>());
        // |x1 - x2| - |x2 - x2| with x1 - x2 = delta >= 0
        terms.push(delta);
    }
    terms
}

/// `Σ_{l=1}^n 1/l`, accumulated exactly and rounded once to `f64`.
pub fn harmonic_divergence(n: usize) -> f64 {
    split_sum(&harmonic_terms(n)).to_f64()
}

/// Per-term values `1/l` and their running `f64` sums for reporting.
pub fn harmonic_partial_sums(n: usize) -> Vec<(usize, f64, f64)> {
    let mut acc = 0.0;
    (1..=n)
        .map(|l| {
            let term = 1.0 / l as f64;
            acc += term;
            (l, term, acc)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityGap {
    /// `Σ B(t_l)(B(t_l) - B(t_{l-1}))`
    pub right_sum: f64,
    /// `Σ B(t_{l-1})(B(t_l) - B(t_{l-1}))`
    pub left_sum: f64,
    /// `Σ (B(t_l) - B(t_{l-1}))²`
    pub gap: f64,
    pub terminal: f64,
}

/// Right- and left-point sums of `∫B dB` on one simulated Brownian path.
pub fn stability_gap(n: usize, horizon: f64, seed: u64) -> Result<StabilityGap> {
    let path = simulate_brownian(n, horizon, seed)?;
    let b = path.factor_series(0);
    let (mut right, mut left, mut gap) = (0.0, 0.0, 0.0);
    for w in b.windows(2) {
        let db = w[1] - w[0];
        right += w[1] * db;
        left += w[0] * db;
        gap += db * db;
    }
    Ok(StabilityGap {
        right_sum: right,
        left_sum: left,
        gap,
        terminal: b[n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_harmonic_numbers() {
        assert_eq!(harmonic_divergence(1), 1.0);
        assert_eq!(harmonic_divergence(2), 1.5);
        assert_eq!(harmonic_divergence(4), 25.0 / 12.0);
    }

    #[test]
    fn harmonic_growth() {
        let d = harmonic_divergence(10_000) - harmonic_divergence(100);
        assert!((d - 100f64.ln()).abs() < 0.01);
        for n in [2, 7, 50, 300] {
            assert!(harmonic_divergence(2 * n) - harmonic_divergence(n) > 0.5);
        }
    }

    #[test]
    fn rounding_is_to_nearest() {
        let third = Rational {
            num: BigUint::from(1u32),
            den: BigUint::from(3u32),
        };
        assert_eq!(third.to_f64(), 1.0 / 3.0);
        let big = Rational {
            num: BigUint::from(10u32).pow(30),
            den: BigUint::from(7u32),
        };
        assert_eq!(big.to_f64(), 1e30 / 7.0);
        // 1 + 2^-53 is a tie and rounds to the even mantissa 1
        let tie = Rational {
            num: (BigUint::one() << 53usize) + 1u32,
            den: BigUint::one() << 53usize,
        };
        assert_eq!(tie.to_f64(), 1.0);
    }

    #[test]
    fn stability_sums_telescope() {
        let s = stability_gap(1000, 1.0, 3).unwrap();
        assert!(s.gap >= 0.0);
        assert!((s.right_sum - s.left_sum - s.gap).abs() < 1e-12);
        assert!((s.right_sum + s.left_sum - s.terminal * s.terminal).abs() < 1e-12);
    }
}
