//! Command-line front end: `simulate`, `decompose` and `demo`.
//!
//! Every command writes its files into an output directory together with a
//! single `manifest.json`. Exit codes: 0 on success, 1 for I/O and parse
//! failures, 2 for usage errors and violated mathematical preconditions.

use std::ffi::OsString;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::applications::{
    bond_decomposition, bs_pnl_on_path, cvar_decomposition, option_path, stock_decomposition, BondSpec,
    GbmPairParams, OptionSpec, BOND_LABELS,
};
use crate::counterexamples::{harmonic_divergence, harmonic_partial_sums, stability_gap};
use crate::decomposition::Decomposition;
use crate::error::{AttribError, Result};
use crate::grid::{asu_decompose, asu_two_perm, oat_decompose, su_decompose};
use crate::io::{
    fmt_f64, read_path_file, write_decomposition, write_interaction, write_path_file, write_waterfall, RunManifest,
};
use crate::limit::{iasu_closed_form, interaction_matrix, ioat_closed_form, isu_closed_form};
use crate::path::Path;
use crate::payoff::{Linear, Payoff, Product, QuadraticForm, SharedPayoff, ZeroCouponBond};
use crate::schedule::Permutation;
use crate::simulate::{parse_model_config, simulate, simulate_brownian};

#[derive(Debug, Parser)]
#[command(name = "pnl-attrib", version, about = "P&L attribution along simulated or recorded factor paths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a path from a `key = value` model config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decompose a payoff along a path CSV.
    Decompose(DecomposeArgs),
    /// Run one of the worked examples.
    Demo(DemoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Su,
    Oat,
    Asu,
    Asu2,
    Isu,
    Ioat,
    Iasu,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Update order for su/isu: `id`, `rev` or images such as `2,3,1`.
    #[arg(long)]
    pub perm: Option<String>,
    /// product2 | product | linear:c1,..,cd | quadratic:a11,a12,..,add | bond[:maturity=T] | bs_call[:k=v,..]
    #[arg(long)]
    pub payoff: String,
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Refuse the permutation-average fallback for iasu on simultaneous jumps.
    #[arg(long)]
    pub strict: bool,
    /// Worker threads for permutation fan-out; does not change output.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    Stock,
    Var,
    Option,
    Bond,
    Stability,
    Harmonic,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(value_enum)]
    pub name: DemoName,
    /// Grid steps (stock, var, option, bond, stability) or number of terms (harmonic).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Confidence level for the var demo.
    #[arg(long, default_value_t = 0.99)]
    pub lambda: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> AttribError {
    AttribError::InvalidParameter(msg.into())
}

fn parse_params(text: &str) -> Result<Vec<(String, f64)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| AttribError::Parse(format!("expected key=value, got {kv:?}")))?;
            let v = v
                .trim()
                .parse::<f64>()
                .map_err(|_| AttribError::Parse(format!("{k} = {v:?} is not a number")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| AttribError::Parse(format!("{s:?} is not a number")))
        })
        .collect()
}

/// Builds a payoff from its command-line name for a path with `d` factors.
pub fn parse_payoff(spec: &str, d: usize) -> Result<SharedPayoff> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let payoff: SharedPayoff = match name {
        "product2" => Arc::new(Product { dim: 2 }),
        "product" => Arc::new(Product { dim: d }),
        "linear" => Arc::new(Linear {
            coeffs: parse_numbers(rest)?,
            constant: 0.0,
        }),
        "quadratic" => {
            let a = parse_numbers(rest)?;
            let k = (a.len() as f64).sqrt().round() as usize;
            if k * k != a.len() {
                return Err(AttribError::Parse(format!(
                    "quadratic needs a square matrix, got {} entries",
                    a.len()
                )));
            }
            Arc::new(QuadraticForm::new(a, vec![0.0; k])?)
        }
        "bond" => {
            let mut maturity = 1.0;
            for (k, v) in parse_params(rest)? {
                match k.as_str() {
                    "maturity" | "T" => maturity = v,
                    other => return Err(AttribError::Parse(format!("unknown bond parameter {other:?}"))),
                }
            }
            Arc::new(ZeroCouponBond { maturity })
        }
        "bs_call" => {
            let mut spec = OptionSpec::default();
            for (k, v) in parse_params(rest)? {
                match k.as_str() {
                    "strike" | "K" => spec.strike = v,
                    "rate" | "r" => spec.rate = v,
                    "vol" | "sigma" => spec.vol = v,
                    "maturity" | "T" => spec.maturity = v,
                    other => return Err(AttribError::Parse(format!("unknown bs_call parameter {other:?}"))),
                }
            }
            Arc::new(crate::applications::BlackScholesCall::from(&spec))
        }
        other => return Err(AttribError::Parse(format!("unknown payoff {other:?}"))),
    };
    if payoff.dim() != d {
        return Err(AttribError::DimensionMismatch {
            payoff: payoff.dim(),
            path: d,
        });
    }
    Ok(payoff)
}

fn command_echo(args: &[OsString]) -> Vec<String> {
    args.iter().map(|a| a.to_string_lossy().into_owned()).collect()
}

struct Bundle {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Bundle {
    fn new(dir: &FsPath, args: &[OsString]) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command_echo(args)),
            started: Instant::now(),
        })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn path(&mut self, name: &str, path: &Path) -> Result<()> {
        let f = self.file(name);
        write_path_file(path, &f)?;
        self.manifest.add_output(&f)
    }

    fn decomposition(&mut self, name: &str, dec: &Decomposition) -> Result<()> {
        let f = self.file(name);
        write_decomposition(dec, fs::File::create(&f)?)?;
        self.manifest.add_output(&f)
    }

    fn interaction(&mut self, name: &str, inter: &crate::limit::InteractionMatrix) -> Result<()> {
        let f = self.file(name);
        write_interaction(inter, fs::File::create(&f)?)?;
        self.manifest.add_output(&f)
    }

    fn waterfall(&mut self, name: &str, dec: &Decomposition, start: f64, end: f64) -> Result<()> {
        let f = self.file(name);
        write_waterfall(dec, start, end, fs::File::create(&f)?)?;
        self.manifest.add_output(&f)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let f = self.file(name);
        fs::write(&f, body)?;
        self.manifest.add_output(&f)
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.notes.insert(key.into(), value.to_string());
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.elapsed_seconds = self.started.elapsed().as_secs_f64();
        self.manifest.write(&self.file("manifest.json"))
    }
}

fn cmd_simulate(config: &FsPath, out: &FsPath, args: &[OsString]) -> Result<()> {
    let text = fs::read_to_string(config)?;
    let spec = parse_model_config(&text)?;
    let path = simulate(&spec)?;
    let mut b = Bundle::new(out, args)?;
    b.manifest.add_input(config)?;
    b.manifest.seeds.push(spec.seed);
    b.note("model", spec.kind.tag());
    b.path("path.csv", &path)?;
    b.finish()
}

fn decompose(args: &DecomposeArgs, payoff: &dyn Payoff, path: &Path) -> Result<Decomposition> {
    let perm = match (&args.perm, args.method) {
        (Some(p), MethodArg::Su | MethodArg::Isu) => Some(Permutation::parse_for_dim(p, path.dim())?),
        (None, MethodArg::Su | MethodArg::Isu) => return Err(usage("--perm is required for su and isu")),
        (Some(_), m) => return Err(usage(format!("--perm is not accepted for {m:?}").to_lowercase())),
        (None, _) => None,
    };
    match args.method {
        MethodArg::Su => su_decompose(payoff, path, perm.as_ref().unwrap()),
        MethodArg::Isu => isu_closed_form(payoff, path, perm.as_ref().unwrap()),
        MethodArg::Oat => oat_decompose(payoff, path),
        MethodArg::Asu => asu_decompose(payoff, path),
        MethodArg::Asu2 => asu_two_perm(payoff, path),
        MethodArg::Ioat => ioat_closed_form(payoff, path),
        MethodArg::Iasu => {
            let simul = path.simultaneous_jumps();
            if let Some((first, _)) = simul.first() {
                if args.strict {
                    return Err(AttribError::SimultaneousJumpsPresent {
                        count: simul.len(),
                        first: *first,
                    });
                }
                eprintln!(
                    "warning: {} grid point(s) with simultaneous jumps (first at index {first}); \
                     averaging the closed form over all update orders",
                    simul.len()
                );
            }
            iasu_closed_form(payoff, path)
        }
    }
}

fn cmd_decompose(args: &DecomposeArgs, argv: &[OsString]) -> Result<()> {
    let path = read_path_file(&args.path)?;
    let payoff = parse_payoff(&args.payoff, path.dim())?;
    let dec = match args.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| usage(e.to_string()))?
            .install(|| decompose(args, payoff.as_ref(), &path))?,
        None => decompose(args, payoff.as_ref(), &path)?,
    };
    let mut b = Bundle::new(&args.out, argv)?;
    b.manifest.add_input(&args.path)?;
    b.note("method", dec.method);
    b.note("payoff", payoff.name());
    if let Some(p) = &dec.perm {
        b.note("perm", p);
    }
    b.decomposition("decomposition.csv", &dec)?;
    if dec.method.is_closed_form() {
        b.interaction("interaction.csv", &interaction_matrix(payoff.as_ref(), &path)?)?;
    }
    b.finish()
}

fn demo_stock(n: usize, seed: u64, lambda: Option<f64>, out: Option<&FsPath>, argv: &[OsString]) -> Result<()> {
    let params = GbmPairParams::default();
    let horizon = 1.0;
    let path = simulate(&params.model(horizon, n, seed))?;
    let dec = match lambda {
        None => stock_decomposition(&path)?,
        Some(l) => cvar_decomposition(&params, &path, horizon, l)?,
    };
    let last = path.steps();
    println!("factor  contribution");
    for (label, c) in dec.labels.iter().zip(&dec.contributions) {
        println!("{label:<7} {:.6}", c[last]);
    }
    println!("total   {:.6}", dec.total[last]);
    if let Some(l) = lambda {
        println!("weight  {:.6} (level {l})", params.cvar_weight(horizon, l)?);
    }
    if let Some(dir) = out {
        let mut b = Bundle::new(dir, argv)?;
        b.manifest.seeds.push(seed);
        b.path("path.csv", &path)?;
        b.decomposition("decomposition.csv", &dec)?;
        b.interaction("interaction.csv", &interaction_matrix(&Product { dim: 2 }, &path)?)?;
        b.waterfall("waterfall.csv", &dec, 0.0, horizon)?;
        b.note("labels", dec.labels.join(","));
        if let Some(l) = lambda {
            b.note("lambda", l);
            b.note("weight", params.cvar_weight(horizon, l)?);
        }
        b.finish()?;
    }
    Ok(())
}

fn demo_option(n: usize, seed: u64, out: Option<&FsPath>, argv: &[OsString]) -> Result<()> {
    let spec = OptionSpec {
        steps: n,
        ..OptionSpec::default()
    };
    let path = option_path(&spec, seed)?;
    let dec = bs_pnl_on_path(&spec, &path)?;
    let last = path.steps();
    println!("factor  contribution");
    println!("S       {:.6}", dec.contributions[0][last]);
    println!("t       {:.6}", dec.contributions[1][last]);
    println!("total   {:.6}", dec.total[last]);
    println!("gap     {:.3e}", dec.additivity_gap.as_ref().unwrap()[last]);
    if let Some(dir) = out {
        let mut b = Bundle::new(dir, argv)?;
        b.manifest.seeds.push(seed);
        b.note("labels", "S,t");
        b.path("path.csv", &path)?;
        b.decomposition("decomposition.csv", &dec)?;
        b.waterfall("waterfall.csv", &dec, 0.0, spec.horizon)?;
        b.finish()?;
    }
    Ok(())
}

fn demo_bond(n: usize, seed: u64, out: Option<&FsPath>, argv: &[OsString]) -> Result<()> {
    let spec = BondSpec {
        steps: n,
        seed,
        ..BondSpec::default()
    };
    let report = bond_decomposition(&spec)?;
    let dec = &report.iasu;
    let gap = dec.additivity_gap.as_ref().unwrap();
    let max_gap = gap.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    println!("window      FX            IR            CS            tau           total");
    for end in [0.4, 1.0] {
        let parts = dec.window(0.0, end);
        let m = dec.index_at(end);
        print!("[0, {end:.1}]   ");
        for p in &parts {
            print!("{p:>13.6e} ");
        }
        println!("{:>13.6e}", dec.total[m]);
    }
    println!("max |additivity gap| = {max_gap:.3e}");
    if let Some(dir) = out {
        let asu = asu_decompose(
            &ZeroCouponBond {
                maturity: spec.maturity,
            },
            &report.path,
        )?
        .with_labels(&BOND_LABELS);
        let mut b = Bundle::new(dir, argv)?;
        b.manifest.seeds.push(seed);
        b.note("labels", BOND_LABELS.join(","));
        b.note("max_abs_additivity_gap", max_gap);
        b.path("path.csv", &report.path)?;
        b.decomposition("decomposition.csv", dec)?;
        b.decomposition("decomposition_asu.csv", &asu)?;
        b.interaction("interaction.csv", &report.interaction)?;
        b.waterfall("waterfall_0_0.4.csv", dec, 0.0, 0.4)?;
        b.waterfall("waterfall_0_1.csv", dec, 0.0, 1.0)?;
        b.finish()?;
    }
    Ok(())
}

fn demo_stability(n: usize, seed: u64, out: Option<&FsPath>, argv: &[OsString]) -> Result<()> {
    let horizon = 1.0;
    let s = stability_gap(n, horizon, seed)?;
    let half_sq = 0.5 * s.terminal * s.terminal;
    println!("right_sum  {:.6}   (B(T)²/2 + T/2 = {:.6})", s.right_sum, half_sq + 0.5 * horizon);
    println!("left_sum   {:.6}   (B(T)²/2 - T/2 = {:.6})", s.left_sum, half_sq - 0.5 * horizon);
    println!("gap        {:.6}", s.gap);
    if let Some(dir) = out {
        let path = simulate_brownian(n, horizon, seed)?;
        let mut body = String::from("l,time,B,right_term,left_term\n");
        for l in 1..=n {
            let (b0, b1) = (path.value(0, l - 1), path.value(0, l));
            body.push_str(&format!(
                "{l},{},{},{},{}\n",
                fmt_f64(path.times()[l]),
                fmt_f64(b1),
                fmt_f64(b1 * (b1 - b0)),
                fmt_f64(b0 * (b1 - b0))
            ));
        }
        let mut b = Bundle::new(dir, argv)?;
        b.manifest.seeds.push(seed);
        b.note("right_sum", s.right_sum);
        b.note("left_sum", s.left_sum);
        b.note("gap", s.gap);
        b.text("stability.csv", &body)?;
        b.finish()?;
    }
    Ok(())
}

fn demo_harmonic(n: usize, out: Option<&FsPath>, argv: &[OsString]) -> Result<()> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let h = harmonic_divergence(n);
    println!("n        H_n");
    println!("{n:<8} {h:?}");
    if let Some(dir) = out {
        let mut body = String::from("l,term,partial_sum\n");
        for (l, term, acc) in harmonic_partial_sums(n) {
            body.push_str(&format!("{l},{},{}\n", fmt_f64(term), fmt_f64(acc)));
        }
        let mut b = Bundle::new(dir, argv)?;
        b.note("n", n);
        b.note("harmonic_number", fmt_f64(h));
        b.text("harmonic.csv", &body)?;
        b.finish()?;
    }
    Ok(())
}

fn cmd_demo(args: &DemoArgs, argv: &[OsString]) -> Result<()> {
    let out = args.out.as_deref();
    match args.name {
        DemoName::Stock => demo_stock(args.n.unwrap_or(1000), args.seed, None, out, argv),
        DemoName::Var => demo_stock(args.n.unwrap_or(1000), args.seed, Some(args.lambda), out, argv),
        DemoName::Option => demo_option(args.n.unwrap_or(1000), args.seed, out, argv),
        DemoName::Bond => demo_bond(args.n.unwrap_or(1000), args.seed, out, argv),
        DemoName::Stability => demo_stability(args.n.unwrap_or(100_000), args.seed, out, argv),
        DemoName::Harmonic => demo_harmonic(args.n.unwrap_or(10), out, argv),
    }
}

pub fn execute(cli: &Cli, argv: &[OsString]) -> Result<()> {
    match &cli.command {
        Command::Simulate { config, out } => cmd_simulate(config, out, argv),
        Command::Decompose(a) => cmd_decompose(a, argv),
        Command::Demo(a) => cmd_demo(a, argv),
    }
}

pub fn exit_code(err: &AttribError) -> i32 {
    if err.is_precondition() {
        2
    } else {
        1
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_names() {
        assert_eq!(parse_payoff("product2", 2).unwrap().value(&[2.0, 3.0]), 6.0);
        assert_eq!(parse_payoff("product", 3).unwrap().value(&[2.0, 3.0, 0.5]), 3.0);
        assert_eq!(parse_payoff("linear:1,-2", 2).unwrap().value(&[2.0, 3.0]), -4.0);
        assert_eq!(parse_payoff("quadratic:2,0,0,2", 2).unwrap().value(&[1.0, 2.0]), 5.0);
        assert!(parse_payoff("bond:maturity=2", 4).is_ok());
        assert!(parse_payoff("bs_call:strike=90,vol=0.3", 2).is_ok());
        assert!(matches!(parse_payoff("nope", 2), Err(AttribError::Parse(_))));
        assert!(matches!(
            parse_payoff("product2", 3),
            Err(AttribError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["pnl-attrib", "decompose", "--method", "bogus"]), 2);
        assert_eq!(run(["pnl-attrib", "demo", "nothing"]), 2);
    }
}
