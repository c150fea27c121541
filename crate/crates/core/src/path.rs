//! Discretized multivariate paths with declared jump structure.
//!
//! A [`Path`] stores `d` factor series on a shared grid `0 = t_0 < ... < t_N`
//! together with per-step jump flags. A flag on factor `i` at step `l`
//! declares the increment over `(t_{l-1}, t_l]` to be a pure jump at `t_l`.
//! Left limits are grid left neighbours.

use crate::error::{AttribError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    times: Vec<f64>,
    // state-major: states[l * d + i] = X_i(t_l)
    states: Vec<f64>,
    // step-major: flags[(l - 1) * d + i] = J_{i,l}
    flags: Vec<bool>,
    dim: usize,
}

impl Path {
    /// Builds a path from factor series (`values[i][l]`) and flags (`jump_flags[i][l - 1]`).
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>, jump_flags: Vec<Vec<bool>>) -> Result<Self> {
        let dim = values.len();
        if dim == 0 {
            return Err(AttribError::InvalidPath("at least one factor is required".into()));
        }
        let n_points = times.len();
        if n_points < 2 {
            return Err(AttribError::InvalidPath("at least two grid points are required".into()));
        }
        let steps = n_points - 1;
        if jump_flags.len() != dim {
            return Err(AttribError::InvalidPath(format!(
                "jump flags have {} rows, expected {dim}",
                jump_flags.len()
            )));
        }
        let mut states = vec![0.0; n_points * dim];
        for (i, row) in values.iter().enumerate() {
            if row.len() != n_points {
                return Err(AttribError::InvalidPath(format!(
                    "factor {} has {} values, expected {n_points}",
                    i + 1,
                    row.len()
                )));
            }
            for (l, &v) in row.iter().enumerate() {
                states[l * dim + i] = v;
            }
        }
        let mut flags = vec![false; steps * dim];
        for (i, row) in jump_flags.iter().enumerate() {
            if row.len() != steps {
                return Err(AttribError::InvalidPath(format!(
                    "factor {} has {} jump flags, expected {steps}",
                    i + 1,
                    row.len()
                )));
            }
            for (l, &f) in row.iter().enumerate() {
                flags[l * dim + i] = f;
            }
        }
        Self::from_raw(times, states, flags, dim)
    }

    /// Builds a path from state-major storage: `states[l * d + i]` and `flags[(l - 1) * d + i]`.
    pub fn from_raw(times: Vec<f64>, states: Vec<f64>, flags: Vec<bool>, dim: usize) -> Result<Self> {
        if dim == 0 || times.len() < 2 {
            return Err(AttribError::InvalidPath("empty path".into()));
        }
        if times[0] != 0.0 {
            return Err(AttribError::InvalidPath(format!("t_0 must be 0, got {}", times[0])));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(AttribError::InvalidPath(format!(
                "times not strictly increasing at index {}",
                w + 1
            )));
        }
        if states.len() != times.len() * dim || flags.len() != (times.len() - 1) * dim {
            return Err(AttribError::InvalidPath("storage size does not match grid".into()));
        }
        if let Some(k) = states.iter().position(|v| !v.is_finite()) {
            return Err(AttribError::InvalidPath(format!(
                "non-finite value for factor {} at index {}",
                k % dim + 1,
                k / dim
            )));
        }
        Ok(Self {
            times,
            states,
            flags,
            dim,
        })
    }

    /// A path without jump flags.
    pub fn continuous(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let steps = times.len().saturating_sub(1);
        let flags = vec![vec![false; steps]; values.len()];
        Self::new(times, values, flags)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.steps()]
    }

    /// State vector `X(t_l)`.
    pub fn state(&self, l: usize) -> &[f64] {
        &self.states[l * self.dim..(l + 1) * self.dim]
    }

    pub fn value(&self, factor: usize, l: usize) -> f64 {
        self.states[l * self.dim + factor]
    }

    /// Series of one factor over the whole grid.
    pub fn factor_series(&self, factor: usize) -> Vec<f64> {
        (0..self.times.len()).map(|l| self.value(factor, l)).collect()
    }

    /// Jump flag `J_{i,l}` for `1 <= l <= N`.
    pub fn is_jump(&self, factor: usize, l: usize) -> bool {
        self.flags[(l - 1) * self.dim + factor]
    }

    /// Flags of step `l` (increments over `(t_{l-1}, t_l]`).
    pub fn step_flags(&self, l: usize) -> &[bool] {
        &self.flags[(l - 1) * self.dim..l * self.dim]
    }

    pub fn has_jumps(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }

    /// Increment `X_i(t_l) - X_i(t_{l-1})`.
    pub fn increment(&self, factor: usize, l: usize) -> f64 {
        self.value(factor, l) - self.value(factor, l - 1)
    }

    fn check_factor(&self, factor: usize) -> Result<()> {
        if factor >= self.dim {
            return Err(AttribError::IndexOutOfRange {
                what: "factor",
                index: factor,
                limit: self.dim,
            });
        }
        Ok(())
    }

    fn check_step(&self, l: usize) -> Result<()> {
        if l == 0 || l > self.steps() {
            return Err(AttribError::IndexOutOfRange {
                what: "grid index",
                index: l,
                limit: self.steps(),
            });
        }
        Ok(())
    }

    fn check_upto(&self, m: usize) -> Result<()> {
        if m > self.steps() {
            return Err(AttribError::IndexOutOfRange {
                what: "grid index",
                index: m,
                limit: self.steps(),
            });
        }
        Ok(())
    }

    /// Discretized left limit `X_i(t_l-)`, i.e. `X_i(t_{l-1})`.
    pub fn left_limit(&self, factor: usize, l: usize) -> Result<f64> {
        self.check_factor(factor)?;
        self.check_step(l)?;
        Ok(self.value(factor, l - 1))
    }

    /// `X(t_l ⋆ β)`: component `j` is `X_j(t_l)` when `β_j` is set, else its left limit.
    pub fn star_vector(&self, l: usize, selector: &[bool]) -> Result<Vec<f64>> {
        if selector.len() != self.dim {
            return Err(AttribError::SelectorLength {
                got: selector.len(),
                expected: self.dim,
            });
        }
        self.check_step(l)?;
        Ok(selector
            .iter()
            .enumerate()
            .map(|(j, &b)| if b { self.value(j, l) } else { self.value(j, l - 1) })
            .collect())
    }

    /// Realized covariation `Σ_{l<=m} ΔX_i ΔX_j`.
    pub fn covariation(&self, i: usize, j: usize, upto: usize) -> Result<f64> {
        self.check_factor(i)?;
        self.check_factor(j)?;
        self.check_upto(upto)?;
        Ok((1..=upto)
            .map(|l| self.increment(i, l) * self.increment(j, l))
            .sum())
    }

    /// Realized covariation over steps where neither factor is jump-flagged.
    pub fn covariation_continuous(&self, i: usize, j: usize, upto: usize) -> Result<f64> {
        self.check_factor(i)?;
        self.check_factor(j)?;
        self.check_upto(upto)?;
        Ok((1..=upto)
            .filter(|&l| !self.is_jump(i, l) && !self.is_jump(j, l))
            .map(|l| self.increment(i, l) * self.increment(j, l))
            .sum())
    }

    /// Grid indices where two or more factors are flagged, with the flagged factors (0-based).
    pub fn simultaneous_jumps(&self) -> Vec<(usize, Vec<usize>)> {
        (1..=self.steps())
            .filter_map(|l| {
                let set: Vec<usize> = self
                    .step_flags(l)
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &f)| f.then_some(i))
                    .collect();
                (set.len() >= 2).then_some((l, set))
            })
            .collect()
    }

    /// Restriction to every `factor`-th grid point. Flags of merged steps are OR-ed.
    ///
    /// Used to build coarse grids from a fine simulation so that refinement
    /// studies compare decompositions on the same underlying randomness.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(AttribError::InvalidParameter(format!(
                "coarsening factor {factor} does not divide {} steps",
                self.steps()
            )));
        }
        let coarse_steps = self.steps() / factor;
        let d = self.dim;
        let times = (0..=coarse_steps).map(|k| self.times[k * factor]).collect();
        let mut states = Vec::with_capacity((coarse_steps + 1) * d);
        for k in 0..=coarse_steps {
            states.extend_from_slice(self.state(k * factor));
        }
        let mut flags = vec![false; coarse_steps * d];
        for k in 1..=coarse_steps {
            for l in (k - 1) * factor + 1..=k * factor {
                for i in 0..d {
                    flags[(k - 1) * d + i] |= self.is_jump(i, l);
                }
            }
        }
        Self::from_raw(times, states, flags, d)
    }

    /// Sub-path restricted to the given factors (in the given order).
    pub fn select_factors(&self, factors: &[usize]) -> Result<Self> {
        for &f in factors {
            self.check_factor(f)?;
        }
        let n = self.times.len();
        let k = factors.len();
        let mut states = Vec::with_capacity(n * k);
        for l in 0..n {
            states.extend(factors.iter().map(|&f| self.value(f, l)));
        }
        let mut flags = Vec::with_capacity((n - 1) * k);
        for l in 1..n {
            flags.extend(factors.iter().map(|&f| self.is_jump(f, l)));
        }
        Self::from_raw(self.times.clone(), states, flags, k)
    }

    /// Concatenates the factors of paths sharing one grid.
    pub fn stack(parts: &[&Path]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| AttribError::InvalidPath("nothing to stack".into()))?;
        if parts.iter().any(|p| p.times != first.times) {
            return Err(AttribError::InvalidPath("stacked paths must share a grid".into()));
        }
        let dim: usize = parts.iter().map(|p| p.dim).sum();
        let n = first.times.len();
        let mut states = Vec::with_capacity(n * dim);
        for l in 0..n {
            for p in parts {
                states.extend_from_slice(p.state(l));
            }
        }
        let mut flags = Vec::with_capacity((n - 1) * dim);
        for l in 1..n {
            for p in parts {
                flags.extend_from_slice(p.step_flags(l));
            }
        }
        Self::from_raw(first.times.clone(), states, flags, dim)
    }

    /// Copy with factor rows permuted: new factor `k` is old factor `order[k]`.
    pub fn permute_factors(&self, order: &[usize]) -> Result<Self> {
        self.select_factors(order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> Path {
        Path::continuous(vec![0.0, 1.0], vec![vec![1.0, 3.0], vec![2.0, 5.0]]).unwrap()
    }

    #[test]
    fn left_limit_examples() {
        let c = Path::continuous(vec![0.0, 0.5, 1.0], vec![vec![4.2; 3]]).unwrap();
        assert_eq!(c.left_limit(0, 1).unwrap(), 4.2);
        assert_eq!(c.left_limit(0, 2).unwrap(), 4.2);

        let jump = Path::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 0.0, 0.01]],
            vec![vec![false, true]],
        )
        .unwrap();
        assert_eq!(jump.left_limit(0, 2).unwrap(), 0.0);

        let p = Path::continuous(vec![0.0, 1.0], vec![vec![1.0, 3.0]]).unwrap();
        assert_eq!(p.left_limit(0, 1).unwrap(), 1.0);
        assert!(p.left_limit(0, 0).is_err());
        assert!(p.left_limit(0, 2).is_err());
        assert!(p.left_limit(1, 1).is_err());
    }

    #[test]
    fn star_vector_selects_components() {
        let p = two_point();
        assert_eq!(p.star_vector(1, &[true, true]).unwrap(), vec![3.0, 5.0]);
        assert_eq!(p.star_vector(1, &[false, false]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(p.star_vector(1, &[true, false]).unwrap(), vec![3.0, 2.0]);
        assert!(matches!(
            p.star_vector(1, &[true]),
            Err(AttribError::SelectorLength { got: 1, expected: 2 })
        ));
    }

    #[test]
    fn covariation_hand_values() {
        let p = Path::continuous(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0, 1.0, 3.0], vec![0.0, 3.0, 2.0], vec![7.0, 7.0, 7.0]],
        )
        .unwrap();
        assert_eq!(p.covariation(0, 1, 2).unwrap(), 1.0);
        assert_eq!(p.covariation(1, 0, 2).unwrap(), 1.0);
        assert_eq!(p.covariation(0, 2, 2).unwrap(), 0.0);
        assert_eq!(p.covariation(0, 1, 0).unwrap(), 0.0);
        assert!(p.covariation(0, 1, 3).is_err());
    }

    #[test]
    fn continuous_covariation_drops_flagged_steps() {
        let p = Path::new(
            vec![0.0, 1.0, 2.0],
            vec![vec![0.0, 1.0, 3.0]],
            vec![vec![true, true]],
        )
        .unwrap();
        assert_eq!(p.covariation_continuous(0, 0, 2).unwrap(), 0.0);

        let q = Path::new(
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.0, 0.1, 0.6, 0.4]],
            vec![vec![false, true, false]],
        )
        .unwrap();
        let full = q.covariation(0, 0, 3).unwrap();
        let cont = q.covariation_continuous(0, 0, 3).unwrap();
        assert!((full - cont - 0.25).abs() < 1e-15);
    }

    #[test]
    fn simultaneous_jump_listing() {
        let mut flags = vec![vec![false; 10], vec![false; 10]];
        let p = Path::new(
            (0..=10).map(f64::from).collect(),
            vec![vec![0.0; 11], vec![0.0; 11]],
            flags.clone(),
        )
        .unwrap();
        assert!(p.simultaneous_jumps().is_empty());

        flags[0][6] = true;
        flags[1][6] = true;
        let p = Path::new(
            (0..=10).map(f64::from).collect(),
            vec![vec![0.0; 11], vec![0.0; 11]],
            flags,
        )
        .unwrap();
        assert_eq!(p.simultaneous_jumps(), vec![(7, vec![0, 1])]);

        let mut flags = vec![vec![false; 10], vec![false; 10]];
        flags[0][2] = true;
        flags[1][3] = true;
        let p = Path::new(
            (0..=10).map(f64::from).collect(),
            vec![vec![0.0; 11], vec![0.0; 11]],
            flags,
        )
        .unwrap();
        assert!(p.simultaneous_jumps().is_empty());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Path::continuous(vec![0.1, 1.0], vec![vec![0.0, 0.0]]).is_err());
        assert!(Path::continuous(vec![0.0, 1.0, 1.0], vec![vec![0.0; 3]]).is_err());
        assert!(Path::continuous(vec![0.0, 1.0], vec![vec![0.0, f64::NAN]]).is_err());
        assert!(Path::continuous(vec![0.0, 1.0], vec![vec![0.0]]).is_err());
    }

    #[test]
    fn coarsen_merges_flags() {
        let p = Path::new(
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![vec![0.0, 1.0, 2.0, 3.0, 4.0]],
            vec![vec![false, true, false, false]],
        )
        .unwrap();
        let c = p.coarsen(2).unwrap();
        assert_eq!(c.times(), &[0.0, 2.0, 4.0]);
        assert_eq!(c.factor_series(0), vec![0.0, 2.0, 4.0]);
        assert!(c.is_jump(0, 1));
        assert!(!c.is_jump(0, 2));
        assert!(p.coarsen(3).is_err());
    }
}
