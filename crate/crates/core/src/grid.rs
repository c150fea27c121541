//! Exact decompositions on the path grid: SU for any update order, OAT, ASU
//! (average over all orders) and the identity/reverse two-order average.
//!
//! For state-function payoffs the stopped-path terms of step `l` only involve
//! `X(t_l)` and `X(t_{l+1})`, and terms with `l >= m` vanish at `t_m`, so each
//! decomposition is the running sum of per-step addends.

use rayon::prelude::*;

use crate::decomposition::{cumulative, Decomposition, Method};
use crate::error::Result;
use crate::path::Path;
use crate::payoff::{check_dim, Payoff};
use crate::schedule::{all_permutations_capped, Permutation, UpdateSchedule, DEFAULT_PERMUTATION_CAP};

pub(crate) fn total_series(payoff: &dyn Payoff, path: &Path) -> Vec<f64> {
    let f0 = payoff.value(path.state(0));
    (0..=path.steps()).map(|m| payoff.value(path.state(m)) - f0).collect()
}

fn fill_mixed(path: &Path, l: usize, selector: &[bool], out: &mut [f64]) {
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = path.value(j, if selector[j] { l + 1 } else { l });
    }
}

/// Sequential-updating decomposition for update order `perm`.
///
/// Step `l → l+1` attributes `f(X^{B(i,:)}) - f(X^{C(i,:)})` to factor `i`,
/// where a set selector entry means the factor has already moved to `t_{l+1}`.
pub fn su_decompose(payoff: &dyn Payoff, path: &Path, perm: &Permutation) -> Result<Decomposition> {
    check_dim(payoff, path.dim())?;
    let d = path.dim();
    if perm.dim() != d {
        return Err(crate::AttribError::DimensionMismatch {
            payoff: perm.dim(),
            path: d,
        });
    }
    let schedule = UpdateSchedule::new(perm.clone());
    let n = path.steps();
    let mut steps = vec![Vec::with_capacity(n); d];
    let mut upper = vec![0.0; d];
    let mut lower = vec![0.0; d];
    for l in 0..n {
        for i in 0..d {
            fill_mixed(path, l, schedule.b_row(i), &mut upper);
            fill_mixed(path, l, schedule.c_row(i), &mut lower);
            steps[i].push(payoff.value(&upper) - payoff.value(&lower));
        }
    }
    Ok(Decomposition::assemble(
        Method::Su,
        Some(perm.clone()),
        path.times().to_vec(),
        steps.iter().map(|s| cumulative(s)).collect(),
        total_series(payoff, path),
    ))
}

/// One-at-a-time decomposition: each factor advanced alone from `X(t_l)`.
pub fn oat_decompose(payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    check_dim(payoff, path.dim())?;
    let d = path.dim();
    let n = path.steps();
    let mut steps = vec![Vec::with_capacity(n); d];
    let mut state = vec![0.0; d];
    for l in 0..n {
        let base = path.state(l);
        let f_base = payoff.value(base);
        state.copy_from_slice(base);
        for i in 0..d {
            state[i] = path.value(i, l + 1);
            steps[i].push(payoff.value(&state) - f_base);
            state[i] = base[i];
        }
    }
    Ok(Decomposition::assemble(
        Method::Oat,
        None,
        path.times().to_vec(),
        steps.iter().map(|s| cumulative(s)).collect(),
        total_series(payoff, path),
    ))
}

/// Series-wise arithmetic mean, summed in the given order.
pub(crate) fn average_series(parts: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let count = parts.len() as f64;
    let d = parts[0].len();
    let n = parts[0][0].len();
    (0..d)
        .map(|i| {
            (0..n)
                .map(|m| parts.iter().fold(0.0, |acc, p| acc + p[i][m]) / count)
                .collect()
        })
        .collect()
}

/// Mean of all `d!` SU decompositions (the Shapley-style average).
pub fn asu_decompose(payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    asu_decompose_capped(payoff, path, DEFAULT_PERMUTATION_CAP)
}

pub fn asu_decompose_capped(payoff: &dyn Payoff, path: &Path, cap: usize) -> Result<Decomposition> {
    check_dim(payoff, path.dim())?;
    let perms: Vec<Permutation> = all_permutations_capped(path.dim(), cap)?.collect();
    let parts = perms
        .par_iter()
        .map(|p| su_decompose(payoff, path, p).map(|dec| dec.contributions))
        .collect::<Result<Vec<_>>>()?;
    Ok(Decomposition::assemble(
        Method::Asu,
        None,
        path.times().to_vec(),
        average_series(&parts),
        total_series(payoff, path),
    ))
}

/// `½ (SU_id + SU_rev)`: additive, two SU passes regardless of `d`.
pub fn asu_two_perm(payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    let d = path.dim();
    let id = su_decompose(payoff, path, &Permutation::identity(d))?;
    let rev = su_decompose(payoff, path, &Permutation::reverse_identity(d))?;
    Ok(Decomposition::assemble(
        Method::Asu2,
        None,
        path.times().to_vec(),
        average_series(&[id.contributions, rev.contributions]),
        id.total,
    ))
}
