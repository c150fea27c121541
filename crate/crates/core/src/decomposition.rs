//! Per-factor contribution series shared by grid and closed-form methods.

use std::fmt;

use crate::schedule::Permutation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Su,
    Oat,
    Asu,
    Asu2,
    Isu,
    Ioat,
    Iasu,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Su => "SU",
            Method::Oat => "OAT",
            Method::Asu => "ASU",
            Method::Asu2 => "ASU2",
            Method::Isu => "ISU",
            Method::Ioat => "IOAT",
            Method::Iasu => "IASU",
        }
    }

    /// Closed-form (limit) methods report an `additivity_gap` series.
    pub fn is_closed_form(self) -> bool {
        matches!(self, Method::Isu | Method::Ioat | Method::Iasu)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Contributions `D_i(t_l)` on the path grid.
///
/// `residual` is zero-filled except for the one-at-a-time methods, where it
/// holds the unattributed part `total - Σ_i D_i`. Closed-form methods also carry
/// `additivity_gap = total - Σ_i D_i`, the observed Taylor remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub method: Method,
    pub perm: Option<Permutation>,
    pub times: Vec<f64>,
    pub contributions: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
    pub total: Vec<f64>,
    pub additivity_gap: Option<Vec<f64>>,
    pub labels: Vec<String>,
}

pub fn default_labels(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("X{i}")).collect()
}

impl Decomposition {
    pub(crate) fn assemble(
        method: Method,
        perm: Option<Permutation>,
        times: Vec<f64>,
        contributions: Vec<Vec<f64>>,
        total: Vec<f64>,
    ) -> Self {
        let n = times.len();
        let d = contributions.len();
        let unexplained: Vec<f64> = (0..n)
            .map(|l| total[l] - contributions.iter().map(|c| c[l]).sum::<f64>())
            .collect();
        let residual = if matches!(method, Method::Oat | Method::Ioat) {
            unexplained.clone()
        } else {
            vec![0.0; n]
        };
        let additivity_gap = method.is_closed_form().then_some(unexplained);
        Self {
            method,
            perm,
            times,
            contributions,
            residual,
            total,
            additivity_gap,
            labels: default_labels(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.contributions.len()
    }

    pub fn with_labels(mut self, labels: &[&str]) -> Self {
        self.labels = labels.iter().map(|s| s.to_string()).collect();
        self
    }

    /// `Σ_i D_i(t_m)`.
    pub fn sum_at(&self, m: usize) -> f64 {
        self.contributions.iter().map(|c| c[m]).sum()
    }

    /// `max_m |Σ_i D_i(t_m) - total(t_m)| / (1 + |total(t_m)|)`.
    pub fn max_relative_additivity_error(&self) -> f64 {
        (0..self.times.len())
            .map(|m| (self.sum_at(m) - self.total[m]).abs() / (1.0 + self.total[m].abs()))
            .fold(0.0, f64::max)
    }

    /// Largest absolute contribution difference to another decomposition on the same grid.
    pub fn max_abs_diff(&self, other: &Decomposition) -> f64 {
        self.contributions
            .iter()
            .zip(&other.contributions)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Grid index closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        let pos = self.times.partition_point(|&s| s < t);
        if pos == 0 {
            0
        } else if pos >= self.times.len() {
            self.times.len() - 1
        } else if (self.times[pos] - t).abs() <= (t - self.times[pos - 1]).abs() {
            pos
        } else {
            pos - 1
        }
    }

    /// Contribution of each factor over `[start, end]` (nearest grid points).
    pub fn window(&self, start: f64, end: f64) -> Vec<f64> {
        let (a, b) = (self.index_at(start), self.index_at(end));
        self.contributions.iter().map(|c| c[b] - c[a]).collect()
    }

    /// Multiplies every series by `w`.
    pub fn scaled(&self, w: f64) -> Self {
        let scale = |v: &[f64]| v.iter().map(|x| w * x).collect::<Vec<_>>();
        Self {
            method: self.method,
            perm: self.perm.clone(),
            times: self.times.clone(),
            contributions: self.contributions.iter().map(|c| scale(c)).collect(),
            residual: scale(&self.residual),
            total: scale(&self.total),
            additivity_gap: self.additivity_gap.as_deref().map(scale),
            labels: self.labels.clone(),
        }
    }
}

/// Running sum of step addends, starting at 0 for `t_0`.
pub(crate) fn cumulative(steps: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for s in steps {
        acc += s;
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_and_index_lookup() {
        let d = Decomposition::assemble(
            Method::Su,
            None,
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![vec![0.0, 1.0, 2.0, 3.0, 4.0]],
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
        );
        assert_eq!(d.index_at(0.4), 2);
        assert_eq!(d.index_at(-1.0), 0);
        assert_eq!(d.index_at(5.0), 4);
        assert_eq!(d.window(0.25, 1.0), vec![3.0]);
        assert_eq!(d.max_relative_additivity_error(), 0.0);
        assert!(d.additivity_gap.is_none());
    }

    #[test]
    fn cumulative_starts_at_zero() {
        assert_eq!(cumulative(&[1.0, 2.0, -0.5]), vec![0.0, 1.0, 3.0, 2.5]);
    }
}
