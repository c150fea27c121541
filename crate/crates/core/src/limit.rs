//! Discretized closed forms of the infinitesimal decompositions.
//!
//! Every closed form is assembled from three kinds of per-step addends,
//! evaluated at the left grid point `X(t_{l-1})` (Itô convention):
//!
//! * own terms `f_i ΔX_i + ½ f_ii ΔX_i²` for increments that are not jump-flagged;
//! * interaction terms `f_ij ΔX_i ΔX_j` for pairs where neither factor is flagged,
//!   accumulated into the [`InteractionMatrix`];
//! * jump brackets `f(X(s⋆B(i,:))) - f(X(s⋆C(i,:)))` for flagged factors.
//!
//! The methods differ only in how interactions and simultaneous jumps are
//! assigned: ISU by update order, IOAT not at all (left in the residual),
//! IASU half to each partner.
//!
//! At a jump step the continuous factors are taken at `t_l` in the bracket
//! states, so a jump acts after the continuous moves of the same step. For a
//! factor that is flagged, the linear Itô term is absorbed into its bracket.

use rayon::prelude::*;

use crate::decomposition::{cumulative, Decomposition, Method};
use crate::error::{AttribError, Result};
use crate::grid::{average_series, total_series};
use crate::path::Path;
use crate::payoff::{check_dim, check_support, Payoff, SharedPayoff};
use crate::schedule::{all_permutations_capped, factorial, Permutation, DEFAULT_PERMUTATION_CAP};

/// Running interaction integrals `I_ij(t_m) = Σ_{l<=m} f_ij(X(t_{l-1})) ΔX_i ΔX_j`
/// over steps where neither factor is jump-flagged. Symmetric; the diagonal is
/// the own second-order integral.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub times: Vec<f64>,
    dim: usize,
    // series[i * d + j]
    series: Vec<Vec<f64>>,
}

impl InteractionMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn series(&self, i: usize, j: usize) -> &[f64] {
        &self.series[i * self.dim + j]
    }

    pub fn at(&self, i: usize, j: usize, m: usize) -> f64 {
        self.series[i * self.dim + j][m]
    }

    /// `Σ_{j<i} I_ij(t_m)` with ascending `j`.
    pub fn lower_sum(&self, i: usize, m: usize) -> f64 {
        (0..i).fold(0.0, |acc, j| acc + self.at(i, j, m))
    }

    /// `Σ_{j>i} I_ij(t_m)` with ascending `j`.
    pub fn upper_sum(&self, i: usize, m: usize) -> f64 {
        (i + 1..self.dim).fold(0.0, |acc, j| acc + self.at(i, j, m))
    }

    /// `Σ_{π(j)<π(i)} I_ij(t_m)` with ascending `j`.
    pub fn preceding_sum(&self, perm: &Permutation, i: usize, m: usize) -> f64 {
        (0..self.dim)
            .filter(|&j| perm.precedes(j, i))
            .fold(0.0, |acc, j| acc + self.at(i, j, m))
    }
}

/// A grid step where two or more factors are jump-flagged.
#[derive(Debug, Clone)]
struct SimultaneousStep {
    l: usize,
    flagged: Vec<bool>,
}

/// Shared addends of all closed forms on one path.
struct ClosedFormParts {
    times: Vec<f64>,
    total: Vec<f64>,
    dim: usize,
    // own[i][l-1]: Itô own terms, or the single-factor jump bracket when i is flagged
    own_steps: Vec<Vec<f64>>,
    interaction: InteractionMatrix,
    simultaneous: Vec<SimultaneousStep>,
}

/// State `X(t_l-)` used in jump brackets: flagged factors at `t_{l-1}`, others at `t_l`.
fn jump_left_state(path: &Path, l: usize, flagged: &[bool]) -> Vec<f64> {
    (0..path.dim())
        .map(|j| if flagged[j] { path.value(j, l - 1) } else { path.value(j, l) })
        .collect()
}

impl ClosedFormParts {
    fn build(payoff: &dyn Payoff, path: &Path) -> Result<Self> {
        check_dim(payoff, path.dim())?;
        let d = path.dim();
        let n = path.steps();
        let mut own_steps = vec![Vec::with_capacity(n); d];
        let mut cross_steps = vec![Vec::with_capacity(n); d * d];
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        let mut dx = vec![0.0; d];
        let mut simultaneous = Vec::new();

        for l in 1..=n {
            let x = path.state(l - 1);
            payoff.gradient(x, &mut grad);
            payoff.hessian(x, &mut hess);
            let flags = path.step_flags(l);
            for (i, v) in dx.iter_mut().enumerate() {
                *v = path.increment(i, l);
            }

            // computed once per unordered pair so that I_ij and I_ji agree bitwise
            for i in 0..d {
                for j in 0..d {
                    let (a, b) = (i.min(j), i.max(j));
                    let c = if flags[i] || flags[j] {
                        0.0
                    } else {
                        0.5 * (hess[a * d + b] + hess[b * d + a]) * dx[a] * dx[b]
                    };
                    cross_steps[i * d + j].push(c);
                }
            }

            let flagged_count = flags.iter().filter(|&&f| f).count();
            let left = (flagged_count > 0).then(|| jump_left_state(path, l, flags));
            for i in 0..d {
                let term = if flags[i] {
                    // frozen-others bracket; equals the ISU bracket unless jumps coincide
                    let left = left.as_ref().unwrap();
                    let mut moved = left.clone();
                    moved[i] = path.value(i, l);
                    payoff.value(&moved) - payoff.value(left)
                } else {
                    grad[i] * dx[i] + 0.5 * hess[i * d + i] * dx[i] * dx[i]
                };
                own_steps[i].push(term);
            }
            if flagged_count >= 2 {
                simultaneous.push(SimultaneousStep {
                    l,
                    flagged: flags.to_vec(),
                });
            }
        }

        let interaction = InteractionMatrix {
            times: path.times().to_vec(),
            dim: d,
            series: cross_steps.iter().map(|s| cumulative(s)).collect(),
        };
        Ok(Self {
            times: path.times().to_vec(),
            total: total_series(payoff, path),
            dim: d,
            own_steps,
            interaction,
            simultaneous,
        })
    }

    fn own_series(&self) -> Vec<Vec<f64>> {
        self.own_steps.iter().map(|s| cumulative(s)).collect()
    }

    /// Own series with the order-dependent brackets of simultaneous jumps.
    fn own_series_for(&self, payoff: &dyn Payoff, path: &Path, perm: &Permutation) -> Vec<Vec<f64>> {
        if self.simultaneous.is_empty() {
            return self.own_series();
        }
        let mut steps = self.own_steps.clone();
        for s in &self.simultaneous {
            let left = jump_left_state(path, s.l, &s.flagged);
            for i in (0..self.dim).filter(|&i| s.flagged[i]) {
                // star states over the flagged factors: B row includes i, C row excludes it
                let mut upper = left.clone();
                let mut lower = left.clone();
                for j in (0..self.dim).filter(|&j| s.flagged[j]) {
                    if perm.precedes(j, i) {
                        upper[j] = path.value(j, s.l);
                        lower[j] = path.value(j, s.l);
                    }
                }
                upper[i] = path.value(i, s.l);
                steps[i][s.l - 1] = payoff.value(&upper) - payoff.value(&lower);
            }
        }
        steps.iter().map(|s| cumulative(s)).collect()
    }

    fn isu_contributions(&self, own: &[Vec<f64>], perm: &Permutation) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                (0..self.times.len())
                    .map(|m| own[i][m] + self.interaction.preceding_sum(perm, i, m))
                    .collect()
            })
            .collect()
    }

    fn decomposition(&self, method: Method, perm: Option<Permutation>, contributions: Vec<Vec<f64>>) -> Decomposition {
        Decomposition::assemble(method, perm, self.times.clone(), contributions, self.total.clone())
    }
}

fn ensure_no_simultaneous(path: &Path) -> Result<()> {
    let simul = path.simultaneous_jumps();
    if let Some((first, _)) = simul.first() {
        return Err(AttribError::SimultaneousJumpsPresent {
            count: simul.len(),
            first: *first,
        });
    }
    Ok(())
}

/// ISU closed form for update order `perm` (general jump structure).
pub fn isu_closed_form(payoff: &dyn Payoff, path: &Path, perm: &Permutation) -> Result<Decomposition> {
    let parts = ClosedFormParts::build(payoff, path)?;
    check_perm(perm, parts.dim)?;
    let own = parts.own_series_for(payoff, path, perm);
    let contributions = parts.isu_contributions(&own, perm);
    Ok(parts.decomposition(Method::Isu, Some(perm.clone()), contributions))
}

fn check_perm(perm: &Permutation, d: usize) -> Result<()> {
    if perm.dim() != d {
        return Err(AttribError::DimensionMismatch {
            payoff: perm.dim(),
            path: d,
        });
    }
    Ok(())
}

/// ISU closed form when no two factors jump together; each jump bracket is
/// `f(X(s)) - f(X(s-))` on the jumping factor alone.
pub fn isu_no_simul_jumps(payoff: &dyn Payoff, path: &Path, perm: &Permutation) -> Result<Decomposition> {
    ensure_no_simultaneous(path)?;
    isu_closed_form(payoff, path, perm)
}

/// IOAT closed form: no interaction terms, jump brackets with all other
/// factors frozen at their left limits; `residual = total - Σ_i D_i`.
pub fn ioat_closed_form(payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    let parts = ClosedFormParts::build(payoff, path)?;
    let own = parts.own_series();
    Ok(parts.decomposition(Method::Ioat, None, own))
}

fn iasu_from_parts(parts: &ClosedFormParts) -> Vec<Vec<f64>> {
    let own = parts.own_series();
    let inter = &parts.interaction;
    (0..parts.dim)
        .map(|i| {
            (0..parts.times.len())
                .map(|m| own[i][m] + 0.5 * (inter.lower_sum(i, m) + inter.upper_sum(i, m)))
                .collect()
        })
        .collect()
}

/// IASU closed form.
///
/// Without simultaneous jumps this is the direct formula (own terms plus half
/// of every interaction). Otherwise the ISU closed forms of all `d!` orders are
/// averaged, which is refused above the enumeration cap.
pub fn iasu_closed_form(payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    iasu_closed_form_capped(payoff, path, DEFAULT_PERMUTATION_CAP)
}

pub fn iasu_closed_form_capped(payoff: &dyn Payoff, path: &Path, cap: usize) -> Result<Decomposition> {
    let parts = ClosedFormParts::build(payoff, path)?;
    if parts.simultaneous.is_empty() {
        let contributions = iasu_from_parts(&parts);
        return Ok(parts.decomposition(Method::Iasu, None, contributions));
    }
    let perms: Vec<Permutation> = all_permutations_capped(parts.dim, cap)?.collect();
    let per_perm: Vec<Vec<Vec<f64>>> = perms
        .par_iter()
        .map(|perm| {
            let own = parts.own_series_for(payoff, path, perm);
            parts.isu_contributions(&own, perm)
        })
        .collect();
    Ok(parts.decomposition(Method::Iasu, None, average_series(&per_perm)))
}

/// An ISU closed form split into the order-independent part and the
/// interaction terms assigned by the order.
#[derive(Debug, Clone)]
pub struct IsuParts {
    pub perm: Permutation,
    pub own: Vec<Vec<f64>>,
    pub interaction: Vec<Vec<f64>>,
}

impl IsuParts {
    pub fn contributions(&self) -> Vec<Vec<f64>> {
        self.own
            .iter()
            .zip(&self.interaction)
            .map(|(o, c)| o.iter().zip(c).map(|(a, b)| a + b).collect())
            .collect()
    }

    /// Term-wise mean of two split decompositions.
    pub fn average(&self, other: &IsuParts) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let avg = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| 0.5 * (u + v)).collect())
                .collect()
        };
        (avg(&self.own, &other.own), avg(&self.interaction, &other.interaction))
    }
}

fn isu_parts(parts: &ClosedFormParts, perm: &Permutation) -> IsuParts {
    let own = parts.own_series();
    let interaction = (0..parts.dim)
        .map(|i| {
            (0..parts.times.len())
                .map(|m| parts.interaction.preceding_sum(perm, i, m))
                .collect()
        })
        .collect();
    IsuParts {
        perm: perm.clone(),
        own,
        interaction,
    }
}

/// IASU as the average of the ISU closed forms for the identity and reverse
/// orders. Requires no simultaneous jumps; then it reproduces
/// [`iasu_closed_form`] addend for addend.
pub fn iasu_two_perm(payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    ensure_no_simultaneous(path)?;
    let parts = ClosedFormParts::build(payoff, path)?;
    let id = isu_parts(&parts, &Permutation::identity(parts.dim));
    let rev = isu_parts(&parts, &Permutation::reverse_identity(parts.dim));
    let (own, interaction) = id.average(&rev);
    let contributions = own
        .iter()
        .zip(&interaction)
        .map(|(o, c)| o.iter().zip(c).map(|(a, b)| a + b).collect())
        .collect();
    Ok(parts.decomposition(Method::Iasu, None, contributions))
}

/// ISU, IOAT and IASU on a continuous path, built from one set of addends.
#[derive(Debug, Clone)]
pub struct ContinuousTriple {
    pub ioat: Decomposition,
    pub iasu: Decomposition,
    pub interaction: InteractionMatrix,
    own: Vec<Vec<f64>>,
    times: Vec<f64>,
    total: Vec<f64>,
}

impl ContinuousTriple {
    /// ISU closed form for any order, split into own and interaction parts.
    pub fn isu_parts(&self, perm: &Permutation) -> IsuParts {
        let d = self.own.len();
        let interaction = (0..d)
            .map(|i| {
                (0..self.times.len())
                    .map(|m| self.interaction.preceding_sum(perm, i, m))
                    .collect()
            })
            .collect();
        IsuParts {
            perm: perm.clone(),
            own: self.own.clone(),
            interaction,
        }
    }

    pub fn isu(&self, perm: &Permutation) -> Decomposition {
        Decomposition::assemble(
            Method::Isu,
            Some(perm.clone()),
            self.times.clone(),
            self.isu_parts(perm).contributions(),
            self.total.clone(),
        )
    }
}

pub fn continuous_triple(payoff: &dyn Payoff, path: &Path) -> Result<ContinuousTriple> {
    if path.has_jumps() {
        return Err(AttribError::JumpsPresent);
    }
    let parts = ClosedFormParts::build(payoff, path)?;
    let own = parts.own_series();
    let ioat = parts.decomposition(Method::Ioat, None, own.clone());
    let iasu = parts.decomposition(Method::Iasu, None, iasu_from_parts(&parts));
    Ok(ContinuousTriple {
        ioat,
        iasu,
        interaction: parts.interaction.clone(),
        own,
        times: parts.times.clone(),
        total: parts.total.clone(),
    })
}

/// Interaction integrals of `payoff` along `path`.
pub fn interaction_matrix(payoff: &dyn Payoff, path: &Path) -> Result<InteractionMatrix> {
    Ok(ClosedFormParts::build(payoff, path)?.interaction)
}

/// Evaluates a full-dimension payoff on its support, other factors pinned to `base`.
struct Restricted<'a> {
    payoff: &'a dyn Payoff,
    support: &'a [usize],
    base: Vec<f64>,
}

impl Restricted<'_> {
    fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (a, &s) in self.support.iter().enumerate() {
            full[s] = x[a];
        }
        full
    }
}

impl Payoff for Restricted<'_> {
    fn dim(&self) -> usize {
        self.support.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.payoff.value(&self.lift(x))
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.base.len()];
        self.payoff.gradient(&self.lift(x), &mut g);
        for (a, &s) in self.support.iter().enumerate() {
            out[a] = g[s];
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.base.len();
        let k = self.support.len();
        let mut h = vec![0.0; d * d];
        self.payoff.hessian(&self.lift(x), &mut h);
        for (a, &s) in self.support.iter().enumerate() {
            for (b, &t) in self.support.iter().enumerate() {
                out[a * k + b] = h[s * d + t];
            }
        }
    }
    fn name(&self) -> String {
        format!("{}|{:?}", self.payoff.name(), self.support)
    }
}

/// Number of order-specific decomposition passes the portfolio route needs: `Σ_k d_k!`.
pub fn portfolio_pass_count(support_sizes: &[usize]) -> usize {
    support_sizes.iter().map(|&k| factorial(k)).sum()
}

/// IASU of `f = Σ_k g^k`, computed term by term on each term's support.
///
/// Each term declares its support through [`Payoff::support`] (`None` means
/// all factors). Terms whose restricted path has no simultaneous jumps use the
/// two-order route; the rest average over the `d_k!` orders of their support.
pub fn iasu_portfolio(terms: &[SharedPayoff], path: &Path) -> Result<Decomposition> {
    let d = path.dim();
    if terms.is_empty() {
        return Err(AttribError::InvalidParameter("empty portfolio".into()));
    }
    let n_points = path.times().len();
    let probes: Vec<&[f64]> = [0, path.steps() / 2, path.steps()]
        .iter()
        .map(|&l| path.state(l))
        .collect();

    let mut contributions = vec![vec![0.0; n_points]; d];
    let mut total = vec![0.0; n_points];
    for (k, term) in terms.iter().enumerate() {
        check_dim(term.as_ref(), d)?;
        let support = term.support().unwrap_or_else(|| (0..d).collect());
        if let Some(factor) = check_support(term.as_ref(), &support, &probes) {
            return Err(AttribError::SupportViolation { term: k, factor });
        }
        let restricted = Restricted {
            payoff: term.as_ref(),
            support: &support,
            base: path.state(0).to_vec(),
        };
        let sub_path = path.select_factors(&support)?;
        let dec = if sub_path.simultaneous_jumps().is_empty() {
            iasu_two_perm(&restricted, &sub_path)?
        } else {
            iasu_closed_form(&restricted, &sub_path)?
        };
        for (a, &s) in support.iter().enumerate() {
            contributions[s]
                .iter_mut()
                .zip(&dec.contributions[a])
                .for_each(|(acc, v)| *acc += v);
        }
        total.iter_mut().zip(&dec.total).for_each(|(acc, v)| *acc += v);
    }
    Ok(Decomposition::assemble(
        Method::Iasu,
        None,
        path.times().to_vec(),
        contributions,
        total,
    ))
}
