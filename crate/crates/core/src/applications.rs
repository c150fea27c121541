//! Worked applications: product of two stocks and its conditional value at
//! risk, a Black-Scholes call against (stock, calendar time), and a foreign
//! zero-coupon bond against (FX, rate, spread, calendar time).

use crate::decomposition::Decomposition;
use crate::error::{AttribError, Result};
use crate::limit::{iasu_closed_form, interaction_matrix, InteractionMatrix};
use crate::normal::{cdf, inv_cdf, pdf};
use crate::path::Path;
use crate::payoff::{Payoff, Product, ZeroCouponBond};
use crate::simulate::{simulate, BondFactors, ModelKind, ModelSpec};

/// `f(x1, x2) = x1·x2`, e.g. a foreign stock in domestic currency.
pub fn stock_product_payoff() -> Product {
    Product { dim: 2 }
}

/// Quantile `exp(a + b·Φ⁻¹(λ))` of the lognormal law of `e^{a + bZ}`.
pub fn lognormal_quantile(a: f64, b: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(AttribError::InvalidParameter(format!("level must lie in (0, 1), got {lambda}")));
    }
    if !(b > 0.0 && b.is_finite()) || !a.is_finite() {
        return Err(AttribError::InvalidParameter(format!("need finite a and b > 0, got a = {a}, b = {b}")));
    }
    Ok((a + b * inv_cdf(lambda)).exp())
}

/// Parameters of the correlated GBM pair
/// `X_k(t) = X_k(0) exp((a_k - b_k²/2) t + b_k W_k(t))`, `corr(W_1, W_2) = ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmPairParams {
    pub x0: [f64; 2],
    pub drift: [f64; 2],
    pub vol: [f64; 2],
    pub rho: f64,
}

impl Default for GbmPairParams {
    fn default() -> Self {
        Self {
            x0: [1.0, 1.0],
            drift: [0.05, 0.01],
            vol: [0.2, 0.1],
            rho: 0.3,
        }
    }
}

impl GbmPairParams {
    /// `(μ, σ)` of the log product return per unit time.
    pub fn product_log_moments(&self) -> (f64, f64) {
        let [a1, a2] = self.drift;
        let [b1, b2] = self.vol;
        let mu = a1 + a2 - 0.5 * (b1 * b1 + b2 * b2);
        let var = b1 * b1 + b2 * b2 + 2.0 * self.rho * b1 * b2;
        (mu, var.max(0.0).sqrt())
    }

    /// CVaR weight `w = Ξ⁻¹_{μT, σ√T}(λ)`.
    pub fn cvar_weight(&self, horizon: f64, lambda: f64) -> Result<f64> {
        if !(horizon > 0.0) {
            return Err(AttribError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let (mu, sigma) = self.product_log_moments();
        lognormal_quantile(mu * horizon, sigma * horizon.sqrt(), lambda)
    }

    pub fn model(&self, horizon: f64, steps: usize, seed: u64) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::CorrelatedGbmPair {
                x0: self.x0,
                drift: self.drift,
                vol: self.vol,
                rho: self.rho,
            },
            horizon,
            steps,
            seed,
        }
    }
}

/// IASU of the stock product on `path`, labelled by factor.
pub fn stock_decomposition(path: &Path) -> Result<Decomposition> {
    Ok(iasu_closed_form(&stock_product_payoff(), path)?.with_labels(&["X1", "X2"]))
}

/// IASU of `t ↦ CVaR_λ(X1(T+t) X2(T+t) | F_t) = w·X1(t)X2(t)`.
pub fn cvar_decomposition(params: &GbmPairParams, path: &Path, horizon: f64, lambda: f64) -> Result<Decomposition> {
    let w = params.cvar_weight(horizon, lambda)?;
    Ok(stock_decomposition(path)?.scaled(w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionSpec {
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
    /// End of the simulated window; must be before maturity.
    pub horizon: f64,
    pub steps: usize,
}

impl Default for OptionSpec {
    fn default() -> Self {
        Self {
            s0: 100.0,
            strike: 100.0,
            rate: 0.02,
            vol: 0.2,
            maturity: 1.0,
            horizon: 0.5,
            steps: 1000,
        }
    }
}

impl OptionSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.strike > 0.0
            && self.vol > 0.0
            && self.maturity > 0.0
            && self.s0 > 0.0
            && self.horizon > 0.0
            && self.horizon < self.maturity
            && self.steps > 0
            && self.rate.is_finite();
        if ok {
            Ok(())
        } else {
            Err(AttribError::InvalidParameter(format!(
                "option spec needs K, σ, T, S0 > 0 and 0 < horizon < T: {self:?}"
            )))
        }
    }
}

/// Black-Scholes call price as a function of `(spot, calendar time)`.
#[derive(Debug, Clone)]
pub struct BlackScholesCall {
    pub strike: f64,
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl From<&OptionSpec> for BlackScholesCall {
    fn from(s: &OptionSpec) -> Self {
        Self {
            strike: s.strike,
            rate: s.rate,
            vol: s.vol,
            maturity: s.maturity,
        }
    }
}

struct BsTerms {
    tau: f64,
    d1: f64,
    d2: f64,
    // ∂d1/∂t
    d1t: f64,
    disc: f64,
}

impl BlackScholesCall {
    fn terms(&self, x: f64, t: f64) -> BsTerms {
        let tau = self.maturity - t;
        let sq = tau.sqrt();
        let a = (x / self.strike).ln();
        let b = self.rate + 0.5 * self.vol * self.vol;
        let d1 = (a + b * tau) / (self.vol * sq);
        BsTerms {
            tau,
            d1,
            d2: d1 - self.vol * sq,
            d1t: (a - b * tau) / (2.0 * self.vol * tau * sq),
            disc: (-self.rate * tau).exp(),
        }
    }

    pub fn price(&self, x: f64, t: f64) -> f64 {
        let k = self.terms(x, t);
        cdf(k.d1) * x - cdf(k.d2) * self.strike * k.disc
    }

    pub fn delta(&self, x: f64, t: f64) -> f64 {
        cdf(self.terms(x, t).d1)
    }

    pub fn gamma(&self, x: f64, t: f64) -> f64 {
        let k = self.terms(x, t);
        pdf(k.d1) / (x * self.vol * k.tau.sqrt())
    }

    /// `∂f/∂t` in calendar time.
    pub fn theta(&self, x: f64, t: f64) -> f64 {
        let k = self.terms(x, t);
        -x * self.vol * pdf(k.d1) / (2.0 * k.tau.sqrt()) - self.rate * self.strike * k.disc * cdf(k.d2)
    }

    fn charm(&self, x: f64, t: f64) -> f64 {
        let k = self.terms(x, t);
        pdf(k.d1) * k.d1t
    }

    fn theta_t(&self, x: f64, t: f64) -> f64 {
        let k = self.terms(x, t);
        let sq = k.tau.sqrt();
        let phi = pdf(k.d1);
        let d2t = k.d1t + self.vol / (2.0 * sq);
        let first = -0.5 * x * self.vol * (-k.d1 * phi * k.d1t / sq + phi / (2.0 * k.tau * sq));
        let second = -self.rate * self.strike * k.disc * (self.rate * cdf(k.d2) + pdf(k.d2) * d2t);
        first + second
    }
}

impl Payoff for BlackScholesCall {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.price(x[0], x[1])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.delta(x[0], x[1]);
        out[1] = self.theta(x[0], x[1]);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let c = self.charm(x[0], x[1]);
        out[0] = self.gamma(x[0], x[1]);
        out[1] = c;
        out[2] = c;
        out[3] = self.theta_t(x[0], x[1]);
    }
    fn name(&self) -> String {
        format!("bs_call(K={},r={},vol={},T={})", self.strike, self.rate, self.vol, self.maturity)
    }
}

/// `(price, Δ, Γ, Θ)` of the call at spot `x` and calendar time `t < T`.
pub fn bs_greeks(x: f64, t: f64, spec: &OptionSpec) -> Result<(f64, f64, f64, f64)> {
    if !(t < spec.maturity) {
        return Err(AttribError::InvalidParameter(format!(
            "greeks are singular at expiry: t = {t}, T = {}",
            spec.maturity
        )));
    }
    if !(x > 0.0) {
        return Err(AttribError::InvalidParameter(format!("spot must be positive, got {x}")));
    }
    if !(spec.strike > 0.0 && spec.vol > 0.0) {
        return Err(AttribError::InvalidParameter("strike and vol must be positive".into()));
    }
    let c = BlackScholesCall::from(spec);
    Ok((c.price(x, t), c.delta(x, t), c.gamma(x, t), c.theta(x, t)))
}

/// `(S, t)` path of the option's underlying on `[0, horizon]`.
pub fn option_path(spec: &OptionSpec, seed: u64) -> Result<Path> {
    spec.validate()?;
    simulate(&ModelSpec {
        kind: ModelKind::BsStock {
            s0: spec.s0,
            rate: spec.rate,
            vol: spec.vol,
        },
        horizon: spec.horizon,
        steps: spec.steps,
        seed,
    })
}

/// IASU of the call price against stock and calendar time.
pub fn bs_pnl_decomposition(spec: &OptionSpec, seed: u64) -> Result<Decomposition> {
    let path = option_path(spec, seed)?;
    bs_pnl_on_path(spec, &path)
}

pub fn bs_pnl_on_path(spec: &OptionSpec, path: &Path) -> Result<Decomposition> {
    spec.validate()?;
    let call = BlackScholesCall::from(spec);
    Ok(iasu_closed_form(&call, path)?.with_labels(&["S", "t"]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondSpec {
    pub maturity: f64,
    pub factors: BondFactors,
    pub steps: usize,
    pub seed: u64,
}

impl Default for BondSpec {
    fn default() -> Self {
        Self {
            maturity: 1.0,
            factors: BondFactors::default(),
            steps: 1000,
            seed: 0,
        }
    }
}

impl BondSpec {
    /// The factors are simulated up to maturity.
    pub fn model(&self) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Bond(self.factors.clone()),
            horizon: self.maturity,
            steps: self.steps,
            seed: self.seed,
        }
    }
}

pub const BOND_LABELS: [&str; 4] = ["FX", "IR", "CS", "tau"];

#[derive(Debug, Clone)]
pub struct BondReport {
    pub path: Path,
    pub iasu: Decomposition,
    pub interaction: InteractionMatrix,
}

impl BondReport {
    pub fn i_zr(&self) -> &[f64] {
        self.interaction.series(0, 1)
    }
    pub fn i_zc(&self) -> &[f64] {
        self.interaction.series(0, 2)
    }
    pub fn i_cr(&self) -> &[f64] {
        self.interaction.series(2, 1)
    }
}

/// IASU of the foreign zero-coupon bond `P = Z·exp(-(R + C)(T - t))`.
pub fn bond_decomposition(spec: &BondSpec) -> Result<BondReport> {
    if !(spec.maturity > 0.0) {
        return Err(AttribError::InvalidParameter(format!(
            "maturity must be positive, got {}",
            spec.maturity
        )));
    }
    let path = simulate(&spec.model())?;
    let payoff = ZeroCouponBond {
        maturity: spec.maturity,
    };
    let iasu = iasu_closed_form(&payoff, &path)?.with_labels(&BOND_LABELS);
    let interaction = interaction_matrix(&payoff, &path)?;
    Ok(BondReport {
        path,
        iasu,
        interaction,
    })
}
