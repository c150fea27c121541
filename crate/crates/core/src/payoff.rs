//! Twice-differentiable payoffs of the factor state.

use std::sync::Arc;

use crate::error::{AttribError, Result};

/// A `C²` function `f` of the `d`-dimensional factor state with analytic derivatives.
///
/// The Hessian is written row-major into a `d * d` buffer.
pub trait Payoff: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], out: &mut [f64]);

    /// Factors (0-based) the payoff actually depends on; `None` means all.
    fn support(&self) -> Option<Vec<usize>> {
        None
    }

    fn name(&self) -> String;
}

impl<P: Payoff + ?Sized> Payoff for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        (**self).hessian(x, out)
    }
    fn support(&self) -> Option<Vec<usize>> {
        (**self).support()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<P: Payoff + ?Sized> Payoff for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (**self).gradient(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        (**self).hessian(x, out)
    }
    fn support(&self) -> Option<Vec<usize>> {
        (**self).support()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

pub type SharedPayoff = Arc<dyn Payoff>;

pub(crate) fn check_dim(payoff: &dyn Payoff, path_dim: usize) -> Result<()> {
    if payoff.dim() != path_dim {
        return Err(AttribError::DimensionMismatch {
            payoff: payoff.dim(),
            path: path_dim,
        });
    }
    Ok(())
}

/// `f(x) = c + Σ a_i x_i`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl Payoff for Linear {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.coeffs);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn name(&self) -> String {
        "linear".into()
    }
}

/// `f(x) = Π x_i`.
#[derive(Debug, Clone)]
pub struct Product {
    pub dim: usize,
}

impl Product {
    fn product_except(x: &[f64], skip: &[usize]) -> f64 {
        x.iter()
            .enumerate()
            .filter(|(k, _)| !skip.contains(k))
            .map(|(_, v)| v)
            .product()
    }
}

impl Payoff for Product {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        x.iter().product()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (i, g) in out.iter_mut().enumerate() {
            *g = Self::product_except(x, &[i]);
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = if i == j {
                    0.0
                } else {
                    Self::product_except(x, &[i, j])
                };
            }
        }
    }
    fn name(&self) -> String {
        format!("product{}", self.dim)
    }
}

/// `f(x) = ½ xᵀ A x + bᵀ x` with symmetric `A` (row-major).
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    matrix: Vec<f64>,
    linear: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(matrix: Vec<f64>, linear: Vec<f64>) -> Result<Self> {
        let d = linear.len();
        if matrix.len() != d * d {
            return Err(AttribError::InvalidParameter(format!(
                "quadratic form needs a {d}x{d} matrix, got {} entries",
                matrix.len()
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if matrix[i * d + j] != matrix[j * d + i] {
                    return Err(AttribError::InvalidParameter(
                        "quadratic form matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(Self { matrix, linear })
    }
}

impl Payoff for QuadraticForm {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += x[i] * self.matrix[i * d + j] * x[j];
            }
        }
        0.5 * q + self.linear.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            out[i] = self.linear[i] + (0..d).map(|j| self.matrix[i * d + j] * x[j]).sum::<f64>();
        }
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.matrix);
    }
    fn name(&self) -> String {
        "quadratic".into()
    }
}

/// Foreign zero-coupon bond `f(z, r, c, t) = z·exp(-(r + c)(T - t))`.
#[derive(Debug, Clone)]
pub struct ZeroCouponBond {
    pub maturity: f64,
}

impl Payoff for ZeroCouponBond {
    fn dim(&self) -> usize {
        4
    }
    fn value(&self, x: &[f64]) -> f64 {
        x[0] * (-(x[1] + x[2]) * (self.maturity - x[3])).exp()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let tau = self.maturity - x[3];
        let disc = (-(x[1] + x[2]) * tau).exp();
        let p = x[0] * disc;
        out[0] = disc;
        out[1] = -tau * p;
        out[2] = -tau * p;
        out[3] = (x[1] + x[2]) * p;
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let tau = self.maturity - x[3];
        let y = x[1] + x[2];
        let disc = (-y * tau).exp();
        let p = x[0] * disc;
        let h = [
            [0.0, -tau * disc, -tau * disc, y * disc],
            [-tau * disc, tau * tau * p, tau * tau * p, p - y * tau * p],
            [-tau * disc, tau * tau * p, tau * tau * p, p - y * tau * p],
            [y * disc, p - y * tau * p, p - y * tau * p, y * y * p],
        ];
        for i in 0..4 {
            out[i * 4..i * 4 + 4].copy_from_slice(&h[i]);
        }
    }
    fn name(&self) -> String {
        format!("bond(T={})", self.maturity)
    }
}

/// `w · f`.
#[derive(Clone)]
pub struct Scaled<P> {
    pub weight: f64,
    pub inner: P,
}

impl<P: Payoff> Payoff for Scaled<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.weight * self.inner.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.inner.gradient(x, out);
        out.iter_mut().for_each(|g| *g *= self.weight);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        self.inner.hessian(x, out);
        out.iter_mut().for_each(|h| *h *= self.weight);
    }
    fn support(&self) -> Option<Vec<usize>> {
        self.inner.support()
    }
    fn name(&self) -> String {
        format!("{}*{}", self.weight, self.inner.name())
    }
}

/// A payoff of `support.len()` factors lifted to `dim` factors.
#[derive(Clone)]
pub struct Embedded {
    pub inner: SharedPayoff,
    pub support: Vec<usize>,
    pub dim: usize,
}

impl Embedded {
    pub fn new(inner: SharedPayoff, support: Vec<usize>, dim: usize) -> Result<Self> {
        if inner.dim() != support.len() {
            return Err(AttribError::InvalidParameter(format!(
                "support of size {} for a payoff of {} factors",
                support.len(),
                inner.dim()
            )));
        }
        if support.iter().any(|&s| s >= dim) {
            return Err(AttribError::InvalidParameter("support index out of range".into()));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != support.len() {
            return Err(AttribError::InvalidParameter("support has repeated factors".into()));
        }
        Ok(Self { inner, support, dim })
    }

    fn gather(&self, x: &[f64]) -> Vec<f64> {
        self.support.iter().map(|&s| x[s]).collect()
    }
}

impl Payoff for Embedded {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(&self.gather(x))
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let k = self.support.len();
        let mut g = vec![0.0; k];
        self.inner.gradient(&self.gather(x), &mut g);
        out.fill(0.0);
        for (a, &s) in self.support.iter().enumerate() {
            out[s] = g[a];
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let k = self.support.len();
        let mut h = vec![0.0; k * k];
        self.inner.hessian(&self.gather(x), &mut h);
        out.fill(0.0);
        for (a, &s) in self.support.iter().enumerate() {
            for (b, &t) in self.support.iter().enumerate() {
                out[s * self.dim + t] = h[a * k + b];
            }
        }
    }
    fn support(&self) -> Option<Vec<usize>> {
        Some(self.support.clone())
    }
    fn name(&self) -> String {
        format!("{}@{:?}", self.inner.name(), self.support)
    }
}

/// `Σ_k g^k` over payoffs sharing one dimension.
#[derive(Clone)]
pub struct Sum {
    pub terms: Vec<SharedPayoff>,
}

impl Sum {
    pub fn new(terms: Vec<SharedPayoff>) -> Result<Self> {
        let d = terms
            .first()
            .map(|t| t.dim())
            .ok_or_else(|| AttribError::InvalidParameter("empty payoff sum".into()))?;
        if terms.iter().any(|t| t.dim() != d) {
            return Err(AttribError::InvalidParameter("summands differ in dimension".into()));
        }
        Ok(Self { terms })
    }
}

impl Payoff for Sum {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut buf = vec![0.0; out.len()];
        out.fill(0.0);
        for t in &self.terms {
            t.gradient(x, &mut buf);
            out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b);
        }
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let mut buf = vec![0.0; out.len()];
        out.fill(0.0);
        for t in &self.terms {
            t.hessian(x, &mut buf);
            out.iter_mut().zip(&buf).for_each(|(o, b)| *o += b);
        }
    }
    fn name(&self) -> String {
        let names: Vec<String> = self.terms.iter().map(|t| t.name()).collect();
        names.join("+")
    }
}

/// Largest violation found when comparing analytic derivatives with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub gradient_error: f64,
    pub hessian_error: f64,
    pub asymmetry: f64,
}

impl DerivativeCheck {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.gradient_error <= rel_tol && self.hessian_error <= rel_tol && self.asymmetry <= 1e-10
    }
}

/// Compares the gradient with central differences of `value` and the Hessian
/// with central differences of the gradient at `x`.
///
/// Errors are relative to the largest entry of the gradient (resp. Hessian),
/// so exact zeros in the analytic derivative do not blow up the ratio.
pub fn check_derivatives(payoff: &dyn Payoff, x: &[f64]) -> DerivativeCheck {
    let d = payoff.dim();
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    payoff.gradient(x, &mut grad);
    payoff.hessian(x, &mut hess);

    let step = |v: f64| 1e-5 * v.abs().max(1e-2);
    let mut fd_grad = vec![0.0; d];
    let mut fd_hess = vec![0.0; d * d];
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; d];
    let mut gm = vec![0.0; d];
    for i in 0..d {
        let h = step(x[i]);
        xp[i] = x[i] + h;
        let fp = payoff.value(&xp);
        payoff.gradient(&xp, &mut gp);
        xp[i] = x[i] - h;
        let fm = payoff.value(&xp);
        payoff.gradient(&xp, &mut gm);
        xp[i] = x[i];
        fd_grad[i] = (fp - fm) / (2.0 * h);
        for j in 0..d {
            // column i of the Hessian from the i-th partial of the gradient
            fd_hess[j * d + i] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    let rel = |an: &[f64], fd: &[f64]| {
        let scale = an.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        an.iter()
            .zip(fd)
            .map(|(a, f)| (a - f).abs() / scale)
            .fold(0.0, f64::max)
    };
    let mut asymmetry = 0.0_f64;
    let hscale = hess.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..d {
        for j in 0..i {
            asymmetry = asymmetry.max((hess[i * d + j] - hess[j * d + i]).abs() / hscale);
        }
    }
    let all_zero = |v: &[f64]| v.iter().all(|&a| a == 0.0);
    DerivativeCheck {
        gradient_error: if all_zero(&grad) && all_zero(&fd_grad) { 0.0 } else { rel(&grad, &fd_grad) },
        hessian_error: if all_zero(&hess) && fd_hess.iter().all(|v| v.abs() < 1e-9) {
            0.0
        } else {
            rel(&hess, &fd_hess)
        },
        asymmetry,
    }
}

/// Checks that `payoff` has zero gradient outside `support` at the given states.
pub fn check_support(payoff: &dyn Payoff, support: &[usize], states: &[&[f64]]) -> Option<usize> {
    let d = payoff.dim();
    let mut g = vec![0.0; d];
    for x in states {
        payoff.gradient(x, &mut g);
        if let Some(k) = (0..d).find(|k| !support.contains(k) && g[*k] != 0.0) {
            return Some(k);
        }
    }
    None
}
