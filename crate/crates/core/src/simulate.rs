//! Reproducible path simulation for the attribution examples.
//!
//! GBM and Vasicek factors are sampled from their exact transition laws, so
//! marginals carry no time-discretization bias. Randomness comes from
//! [`RNG_ALGORITHM`] seeded with `seed_from_u64`; Gaussian variates use the
//! ziggurat sampler of `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{AttribError, Result};
use crate::path::Path;

/// Name of the pseudorandom generator, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha 0.9, seed_from_u64) + ziggurat StandardNormal (rand_distr 0.5)";

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Two GBMs driven by `W` and `ρW + √(1-ρ²)B`.
    CorrelatedGbmPair {
        x0: [f64; 2],
        drift: [f64; 2],
        vol: [f64; 2],
        rho: f64,
    },
    Vasicek {
        r0: f64,
        kappa: f64,
        theta: f64,
        sigma: f64,
    },
    Gbm {
        x0: f64,
        drift: f64,
        vol: f64,
    },
    /// Piecewise-constant path; `(time, new value)` pairs must sit on grid points.
    PureJumpSchedule {
        initial: f64,
        jumps: Vec<(f64, f64)>,
    },
    CalendarTime,
    /// Black-Scholes stock with calendar time as second factor: `(S, t)`.
    BsStock {
        s0: f64,
        rate: f64,
        vol: f64,
    },
    /// Foreign bond risk factors `(Z, R, C, t)`: GBM exchange rate, Vasicek
    /// rate correlated with it, pure-jump credit spread, calendar time.
    Bond(BondFactors),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondFactors {
    pub fx_vol: f64,
    pub r0: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub spread_jumps: Vec<(f64, f64)>,
}

impl Default for BondFactors {
    fn default() -> Self {
        Self {
            fx_vol: 0.01,
            r0: 0.01,
            kappa: 0.5,
            theta: 0.02,
            sigma: 0.01,
            rho: -0.5,
            spread_jumps: vec![(0.5, 0.01)],
        }
    }
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::CorrelatedGbmPair { .. } => "correlated_gbm_pair",
            ModelKind::Vasicek { .. } => "vasicek",
            ModelKind::Gbm { .. } => "gbm",
            ModelKind::PureJumpSchedule { .. } => "pure_jump_schedule",
            ModelKind::CalendarTime => "calendar_time",
            ModelKind::BsStock { .. } => "bs_stock",
            ModelKind::Bond(_) => "bond",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelKind::CorrelatedGbmPair { .. } | ModelKind::BsStock { .. } => 2,
            ModelKind::Bond(_) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub horizon: f64,
    pub steps: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AttribError::InvalidParameter(msg));
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        let check_vol = |name: &str, v: f64| -> Result<()> {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(AttribError::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
            Ok(())
        };
        let check_rho = |rho: f64| -> Result<()> {
            if !(-1.0..=1.0).contains(&rho) {
                return Err(AttribError::InvalidParameter(format!("|rho| must be <= 1, got {rho}")));
            }
            Ok(())
        };
        match &self.kind {
            ModelKind::CorrelatedGbmPair { x0, vol, rho, .. } => {
                check_vol("b1", vol[0])?;
                check_vol("b2", vol[1])?;
                check_rho(*rho)?;
                if x0.iter().any(|&v| !(v > 0.0)) {
                    return bad("GBM initial values must be positive".into());
                }
            }
            ModelKind::Gbm { x0, vol, .. } => {
                check_vol("vol", *vol)?;
                if !(*x0 > 0.0) {
                    return bad("GBM initial value must be positive".into());
                }
            }
            ModelKind::BsStock { s0, vol, .. } => {
                check_vol("vol", *vol)?;
                if !(*s0 > 0.0) {
                    return bad("s0 must be positive".into());
                }
            }
            ModelKind::Vasicek { kappa, sigma, .. } => {
                check_vol("sigma", *sigma)?;
                if !(*kappa > 0.0) {
                    return bad("kappa must be positive".into());
                }
            }
            ModelKind::Bond(b) => {
                check_vol("nu", b.fx_vol)?;
                check_vol("sigma", b.sigma)?;
                check_rho(b.rho)?;
                if !(b.kappa > 0.0) {
                    return bad("kappa must be positive".into());
                }
                jump_indices(&b.spread_jumps, self.horizon, self.steps)?;
            }
            ModelKind::PureJumpSchedule { jumps, .. } => {
                jump_indices(jumps, self.horizon, self.steps)?;
            }
            ModelKind::CalendarTime => {}
        }
        Ok(())
    }
}

fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|l| if l == steps { horizon } else { l as f64 * horizon / steps as f64 })
        .collect()
}

/// Maps scheduled jump times to grid indices `l >= 1`.
fn jump_indices(jumps: &[(f64, f64)], horizon: f64, steps: usize) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(jumps.len());
    for &(time, value) in jumps {
        let pos = time * steps as f64 / horizon;
        let l = pos.round();
        if !(time > 0.0 && time <= horizon) || (pos - l).abs() > 1e-9 * steps as f64 {
            return Err(AttribError::JumpOffGrid { time });
        }
        if !value.is_finite() {
            return Err(AttribError::InvalidParameter(format!("jump value {value} at {time}")));
        }
        out.push((l as usize, value));
    }
    out.sort_by_key(|&(l, _)| l);
    if out.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(AttribError::InvalidParameter("two scheduled jumps on one grid point".into()));
    }
    Ok(out)
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn pure_jump_series(initial: f64, jumps: &[(usize, f64)], steps: usize) -> (Vec<f64>, Vec<bool>) {
    let mut values = vec![initial; steps + 1];
    let mut flags = vec![false; steps];
    for &(l, v) in jumps {
        flags[l - 1] = true;
        values[l..].iter_mut().for_each(|x| *x = v);
    }
    (values, flags)
}

/// Simulates one path of the given model on the uniform grid `t_l = l·T/n`.
pub fn simulate(spec: &ModelSpec) -> Result<Path> {
    spec.validate()?;
    let n = spec.steps;
    let times = uniform_grid(spec.horizon, n);
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let no_flags = || vec![false; n];

    match &spec.kind {
        ModelKind::Gbm { x0, drift, vol } => {
            let mut w = 0.0;
            let mut xs = Vec::with_capacity(n + 1);
            xs.push(*x0);
            for l in 1..=n {
                w += (times[l] - times[l - 1]).sqrt() * normal(&mut rng);
                xs.push(x0 * ((drift - 0.5 * vol * vol) * times[l] + vol * w).exp());
            }
            Path::new(times, vec![xs], vec![no_flags()])
        }
        ModelKind::CorrelatedGbmPair { x0, drift, vol, rho } => {
            let mix = (1.0 - rho * rho).max(0.0).sqrt();
            let (mut w, mut b) = (0.0, 0.0);
            let mut x1 = vec![x0[0]];
            let mut x2 = vec![x0[1]];
            for l in 1..=n {
                let sd = (times[l] - times[l - 1]).sqrt();
                w += sd * normal(&mut rng);
                b += sd * normal(&mut rng);
                let t = times[l];
                x1.push(x0[0] * ((drift[0] - 0.5 * vol[0] * vol[0]) * t + vol[0] * w).exp());
                x2.push(
                    x0[1] * ((drift[1] - 0.5 * vol[1] * vol[1]) * t + vol[1] * (rho * w + mix * b)).exp(),
                );
            }
            Path::new(times, vec![x1, x2], vec![no_flags(), no_flags()])
        }
        ModelKind::Vasicek { r0, kappa, theta, sigma } => {
            let mut r = vec![*r0];
            for l in 1..=n {
                let dt = times[l] - times[l - 1];
                let decay = (-kappa * dt).exp();
                let sd = sigma * ((1.0 - (-2.0 * kappa * dt).exp()) / (2.0 * kappa)).sqrt();
                let prev = r[l - 1];
                r.push(prev * decay + theta * (1.0 - decay) + sd * normal(&mut rng));
            }
            Path::new(times, vec![r], vec![no_flags()])
        }
        ModelKind::PureJumpSchedule { initial, jumps } => {
            let idx = jump_indices(jumps, spec.horizon, n)?;
            let (values, flags) = pure_jump_series(*initial, &idx, n);
            Path::new(times, vec![values], vec![flags])
        }
        ModelKind::CalendarTime => {
            let t = times.clone();
            Path::new(times, vec![t], vec![no_flags()])
        }
        ModelKind::BsStock { s0, rate, vol } => {
            let mut w = 0.0;
            let mut s = vec![*s0];
            for l in 1..=n {
                w += (times[l] - times[l - 1]).sqrt() * normal(&mut rng);
                s.push(s0 * ((rate - 0.5 * vol * vol) * times[l] + vol * w).exp());
            }
            let t = times.clone();
            Path::new(times, vec![s, t], vec![no_flags(), no_flags()])
        }
        ModelKind::Bond(p) => simulate_bond(p, times, &mut rng),
    }
}

fn simulate_bond(p: &BondFactors, times: Vec<f64>, rng: &mut ChaCha20Rng) -> Result<Path> {
    let n = times.len() - 1;
    let horizon = times[n];
    let idx = jump_indices(&p.spread_jumps, horizon, n)?;
    let (spread, spread_flags) = pure_jump_series(0.0, &idx, n);

    let mut b = 0.0;
    let mut z = vec![1.0];
    let mut r = vec![p.r0];
    for l in 1..=n {
        let dt = times[l] - times[l - 1];
        // exact joint law of (ΔB, ∫ e^{-κ(Δ-u)} dW(u)) over one step
        let var_b = dt;
        let decay = (-p.kappa * dt).exp();
        let var_r = (1.0 - (-2.0 * p.kappa * dt).exp()) / (2.0 * p.kappa);
        let cov = p.rho * (1.0 - decay) / p.kappa;
        let (g1, g2) = (normal(rng), normal(rng));
        let sd_b = var_b.sqrt();
        let db = sd_b * g1;
        let c = cov / sd_b;
        let resid = (var_r - c * c).max(0.0).sqrt();
        let noise_r = c * g1 + resid * g2;
        b += db;
        let t = times[l];
        z.push((-0.5 * p.fx_vol * p.fx_vol * t + p.fx_vol * b).exp());
        let prev = r[l - 1];
        r.push(prev * decay + p.theta * (1.0 - decay) + p.sigma * noise_r);
    }
    let t = times.clone();
    Path::new(
        times,
        vec![z, r, spread, t],
        vec![vec![false; n], vec![false; n], spread_flags, vec![false; n]],
    )
}

/// Standard Brownian motion started at 0 on `n` uniform steps over `[0, T]`.
pub fn simulate_brownian(n: usize, horizon: f64, seed: u64) -> Result<Path> {
    if n == 0 {
        return Err(AttribError::InvalidParameter("steps must be at least 1".into()));
    }
    if !(horizon > 0.0) {
        return Err(AttribError::InvalidParameter("horizon must be positive".into()));
    }
    let times = uniform_grid(horizon, n);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut x = 0.0;
    for l in 1..=n {
        x += (times[l] - times[l - 1]).sqrt() * normal(&mut rng);
        values.push(x);
    }
    Path::new(times, vec![values], vec![vec![false; n]])
}

/// Parses a flat `key = value` model configuration.
///
/// Blank lines and `#` comments are ignored. Common keys: `kind`, `horizon`,
/// `steps`, `seed`. Kind-specific keys (all optional, defaults in brackets):
///
/// * `gbm`: `x0` [1], `drift` [0], `vol` [0.2]
/// * `correlated_gbm_pair`: `x0_1`, `x0_2` [1], `a1`, `a2` [0], `b1`, `b2` [0.2], `rho` [0]
/// * `vasicek`: `r0` [0.01], `kappa` [0.5], `theta` [0.02], `sigma` [0.01]
/// * `pure_jump_schedule`: `initial` [0], `jumps` as `t:v;t:v` [none]
/// * `calendar_time`: none
/// * `bs_stock`: `s0` [100], `rate` [0], `vol` [0.2]
/// * `bond`: `nu` [0.01], `r0` [0.01], `kappa` [0.5], `theta` [0.02],
///   `sigma` [0.01], `rho` [-0.5], `jumps` [`0.5:0.01`]
///
/// `horizon` defaults to 1, `steps` to 1000 and `seed` to 0.
pub fn parse_model_config(text: &str) -> Result<ModelSpec> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| AttribError::Parse(format!("line {}: expected `key = value`, got {raw:?}", k + 1)))?;
        let key = key.trim().to_string();
        if entries.iter().any(|(_, existing, _)| *existing == key) {
            return Err(AttribError::Parse(format!("line {}: duplicate key {key:?}", k + 1)));
        }
        entries.push((k + 1, key, value.trim().to_string()));
    }

    let kind_tag = entries
        .iter()
        .find(|(_, k, _)| k == "kind")
        .map(|(_, _, v)| v.clone())
        .ok_or_else(|| AttribError::Parse("missing required key `kind`".into()))?;

    let allowed: &[&str] = match kind_tag.as_str() {
        "gbm" => &["x0", "drift", "vol"],
        "correlated_gbm_pair" => &["x0_1", "x0_2", "a1", "a2", "b1", "b2", "rho"],
        "vasicek" => &["r0", "kappa", "theta", "sigma"],
        "pure_jump_schedule" => &["initial", "jumps"],
        "calendar_time" => &[],
        "bs_stock" => &["s0", "rate", "vol"],
        "bond" => &["nu", "r0", "kappa", "theta", "sigma", "rho", "jumps"],
        other => {
            let line = entries.iter().find(|(_, k, _)| k == "kind").map(|e| e.0).unwrap_or(0);
            return Err(AttribError::Parse(format!("line {line}: unknown model kind {other:?}")));
        }
    };
    for (line, key, _) in &entries {
        if !["kind", "horizon", "steps", "seed"].contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            return Err(AttribError::Parse(format!(
                "line {line}: key {key:?} is not valid for kind {kind_tag}"
            )));
        }
    }

    let lookup = |key: &str| entries.iter().find(|(_, k, _)| k == key);
    let num = |key: &str, default: f64| -> Result<f64> {
        match lookup(key) {
            None => Ok(default),
            Some((line, _, v)) => v
                .parse::<f64>()
                .map_err(|_| AttribError::Parse(format!("line {line}: {key} = {v:?} is not a number"))),
        }
    };
    let jumps = |default: Vec<(f64, f64)>| -> Result<Vec<(f64, f64)>> {
        match lookup("jumps") {
            None => Ok(default),
            Some((line, _, v)) => parse_jump_list(v)
                .map_err(|e| AttribError::Parse(format!("line {line}: {e}"))),
        }
    };

    let steps = match lookup("steps") {
        None => 1000,
        Some((line, _, v)) => v
            .parse::<usize>()
            .map_err(|_| AttribError::Parse(format!("line {line}: steps = {v:?} is not a count")))?,
    };
    let seed = match lookup("seed") {
        None => 0,
        Some((line, _, v)) => v
            .parse::<u64>()
            .map_err(|_| AttribError::Parse(format!("line {line}: seed = {v:?} is not an integer")))?,
    };

    let kind = match kind_tag.as_str() {
        "gbm" => ModelKind::Gbm {
            x0: num("x0", 1.0)?,
            drift: num("drift", 0.0)?,
            vol: num("vol", 0.2)?,
        },
        "correlated_gbm_pair" => ModelKind::CorrelatedGbmPair {
            x0: [num("x0_1", 1.0)?, num("x0_2", 1.0)?],
            drift: [num("a1", 0.0)?, num("a2", 0.0)?],
            vol: [num("b1", 0.2)?, num("b2", 0.2)?],
            rho: num("rho", 0.0)?,
        },
        "vasicek" => ModelKind::Vasicek {
            r0: num("r0", 0.01)?,
            kappa: num("kappa", 0.5)?,
            theta: num("theta", 0.02)?,
            sigma: num("sigma", 0.01)?,
        },
        "pure_jump_schedule" => ModelKind::PureJumpSchedule {
            initial: num("initial", 0.0)?,
            jumps: jumps(Vec::new())?,
        },
        "calendar_time" => ModelKind::CalendarTime,
        "bs_stock" => ModelKind::BsStock {
            s0: num("s0", 100.0)?,
            rate: num("rate", 0.0)?,
            vol: num("vol", 0.2)?,
        },
        _ => {
            let d = BondFactors::default();
            ModelKind::Bond(BondFactors {
                fx_vol: num("nu", d.fx_vol)?,
                r0: num("r0", d.r0)?,
                kappa: num("kappa", d.kappa)?,
                theta: num("theta", d.theta)?,
                sigma: num("sigma", d.sigma)?,
                rho: num("rho", d.rho)?,
                spread_jumps: jumps(d.spread_jumps)?,
            })
        }
    };
    let spec = ModelSpec {
        kind,
        horizon: num("horizon", 1.0)?,
        steps,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_jump_list(text: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (t, v) = pair
                .split_once(':')
                .ok_or_else(|| format!("jump entry {pair:?} must be `time:value`"))?;
            let t = t.trim().parse::<f64>().map_err(|_| format!("bad jump time in {pair:?}"))?;
            let v = v.trim().parse::<f64>().map_err(|_| format!("bad jump value in {pair:?}"))?;
            Ok((t, v))
        })
        .collect()
}
