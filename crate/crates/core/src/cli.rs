//! Command-line front end.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    build_drift, compare_with_oracle, likelihood_ratio_mean, run_estimator_with, run_table, write_csv,
    DriftPolicy, EstimatorKind, RunOptions, TableRow,
};
use crate::config::RunConfig;
use crate::drift_bs::{log_call_argmax, log_call_residual};
use crate::drift_mdp::{large_time_constants, large_time_q_monte_carlo};
use crate::error::{Error, Result};
use crate::model::{psi_path, psi_rk4, TimeGrid};
use crate::payoff::{PayoffKind, PayoffSpec};

/// Environment variable that replaces the large-time `nu` in the selftest.
pub const NU_OVERRIDE_ENV: &str = "HESTON_IS_NU_OVERRIDE";

#[derive(Debug, Parser)]
#[command(name = "heston-is", version, about = "Importance-sampling estimators under Heston dynamics")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// key = value configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Start from a named preset: table3, appendixC, varswap
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Comma-separated strikes
    #[arg(long, alias = "strike", global = true)]
    pub strikes: Option<String>,
    /// Comma-separated estimator kinds
    #[arg(long, alias = "kind", global = true)]
    pub kinds: Option<String>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// Payoff: geometric_asian, arithmetic_asian, european, vol_indicator
    #[arg(long, global = true)]
    pub payoff: Option<String>,
    /// Report wall-clock times (makes the CSV non-reproducible)
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run estimators and print the results table as CSV
    Price,
    /// Print the drift schedule of the first kind at the first strike
    Drift,
    /// Run the internal consistency checks
    Selftest {
        /// Small sample sizes and a coarse grid
        #[arg(long)]
        quick: bool,
    },
}

/// Preset, then config file, then flags.
pub fn load_config(a: &CommonArgs) -> Result<RunConfig> {
    let mut c = match &a.preset {
        Some(name) => RunConfig::preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        c.apply(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    }
    let flags = [
        ("strikes", a.strikes.clone()),
        ("kinds", a.kinds.clone()),
        ("paths", a.paths.map(|x| x.to_string())),
        ("steps", a.steps.map(|x| x.to_string())),
        ("seed", a.seed.map(|x| x.to_string())),
        ("out", a.out.clone()),
        ("payoff", a.payoff.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            c.set(k, &v).map_err(|e| Error::Config(format!("--{}", e.message())))?;
        }
    }
    if a.timing {
        c.timing = true;
    }
    c.validate()?;
    Ok(c)
}

/// Results table as CSV text, plus the rows for status reporting.
pub fn cmd_price(cfg: &RunConfig) -> Result<(String, Vec<TableRow>)> {
    let p = cfg.model()?;
    let grid = cfg.grid()?;
    let rows = run_table(
        cfg.payoff,
        &cfg.strikes,
        &cfg.kinds,
        &p,
        &grid,
        cfg.n_paths,
        cfg.seed,
        &cfg.run_options(),
    );
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).map_err(|e| Error::Io(e.to_string()))?;
    Ok((String::from_utf8(buf).expect("csv is utf-8"), rows))
}

pub const DRIFT_HEADER: &str = "t,h1,h2,psi,alpha,closed_value,oracle_value,oracle_gap";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.12e}")).unwrap_or_default()
}

/// Drift schedule on the grid knots. The last three columns repeat the
/// closed-form and variational objectives and their relative gap.
pub fn cmd_drift(cfg: &RunConfig, kind: EstimatorKind, strike: f64) -> Result<String> {
    let p = cfg.model()?;
    let grid = cfg.grid()?;
    let spec = PayoffSpec::new(cfg.payoff, strike)?;
    let tag = |e: Error| e.context(format_args!("{kind} at K={strike}"));
    let policy = DriftPolicy {
        oracle_check: false,
        ..Default::default()
    };
    let b = build_drift(kind, &spec, &p, &grid, &policy)
        .map_err(tag)?
        .ok_or_else(|| Error::Config(format!("{kind} has no drift schedule")))?;
    if b.schedule.running_alpha().is_some() {
        return Err(Error::Config(format!("{kind} recomputes its drift on every step; no schedule to print")));
    }
    let (closed, oracle) = if spec.log_call(&p).is_some() {
        let c = compare_with_oracle(kind, &spec, &p, &grid, &b, crate::varopt::DEFAULT_BUDGET).map_err(tag)?;
        (Some(c.closed), Some(c.oracle))
    } else {
        (None, b.oracle_value)
    };
    let gap = match (closed, oracle) {
        (Some(c), Some(o)) => Some((o - c) / c.abs().max(1e-300)),
        _ => None,
    };
    let alpha = spec.log_call(&p).map(|lc| lc.weight.on_grid(&grid));
    let mut s = String::new();
    writeln!(s, "{DRIFT_HEADER}").unwrap();
    for i in 0..=grid.n_steps {
        writeln!(
            s,
            "{:.10},{:.12e},{:.12e},{:.12e},{},{},{},{}",
            grid.t(i),
            b.schedule.h1[i],
            b.schedule.h2[i],
            b.psi[i],
            opt(alpha.as_ref().map(|a| a[i])),
            opt(closed),
            opt(oracle),
            opt(gap)
        )
        .unwrap();
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }

    fn failed(name: impl Into<String>, e: Error) -> Self {
        Self::new(name, false, e.to_string())
    }
}

/// Martingale, unbiasedness, oracle-agreement and ODE checks at reduced size.
pub fn cmd_selftest(cfg: &RunConfig, quick: bool) -> Vec<Check> {
    let mut out = Vec::new();
    let p = match cfg.model() {
        Ok(p) => p,
        Err(e) => return vec![Check::failed("config", e)],
    };
    let (n_paths, n_steps, budget, n_gamma) = if quick {
        (1_000, 50, 20_000, 1_000_000)
    } else {
        (20_000, 252, 200_000, 10_000_000)
    };
    let grid = TimeGrid::new(p.t_end, n_steps).expect("valid grid");
    let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).expect("valid payoff");
    let opts = RunOptions {
        policy: DriftPolicy {
            oracle_check: false,
            ..Default::default()
        },
        timing: false,
    };
    let heston = !p.is_constant_variance();

    let mut kinds = vec![EstimatorKind::Bs, EstimatorKind::LdpSn];
    if heston {
        kinds.push(EstimatorKind::MdpLt);
    }
    for &kind in &kinds {
        let name = format!("martingale {kind}");
        match build_drift(kind, &spec, &p, &grid, &opts.policy) {
            Ok(Some(b)) => {
                let (m, se) = likelihood_ratio_mean(&b.schedule, &p, &grid, n_paths, cfg.seed);
                out.push(Check::new(
                    name,
                    (m - 1.0).abs() <= 4.0 * se,
                    format!("E[Z]={m:.5} se={se:.5}"),
                ));
            }
            Ok(None) => unreachable!(),
            Err(e) => out.push(Check::failed(name, e)),
        }
    }

    let classic = run_estimator_with(EstimatorKind::Classic, &spec, &p, &grid, n_paths, cfg.seed, None, &opts);
    for kind in [EstimatorKind::Bs, EstimatorKind::LdpSn] {
        let name = format!("unbiased {kind}");
        let r = classic.clone().and_then(|c| {
            run_estimator_with(kind, &spec, &p, &grid, n_paths, cfg.seed, Some(c.variance), &opts).map(|r| (c, r))
        });
        match r {
            Ok((c, r)) => {
                let se = (c.std_err.powi(2) + r.std_err.powi(2)).sqrt();
                out.push(Check::new(
                    name,
                    (c.price - r.price).abs() <= 4.0 * se,
                    format!("classic={:.5} {kind}={:.5} se={se:.5}", c.price, r.price),
                ));
            }
            Err(e) => out.push(Check::failed(name, e)),
        }
    }

    let name = "oracle LDPsn";
    let cmp = build_drift(EstimatorKind::LdpSn, &spec, &p, &grid, &opts.policy)
        .and_then(|b| compare_with_oracle(EstimatorKind::LdpSn, &spec, &p, &grid, &b.unwrap(), budget));
    match cmp {
        Ok(c) => out.push(Check::new(
            name,
            c.oracle >= c.closed - 1e-6 && c.rel_gap <= 2e-3,
            format!("closed={:.8} oracle={:.8} gap={:.2e}", c.closed, c.oracle, c.rel_gap),
        )),
        Err(e) => out.push(Check::failed(name, e)),
    }

    let rk = psi_rk4(&p, p.v0, &grid, 4);
    let err = psi_path(&p, &grid)
        .iter()
        .zip(&rk)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(Check::new("psi closed form vs rk4", err <= 1e-10, format!("sup error {err:.2e}")));

    let (v, c) = (0.03, 0.2);
    let root = match log_call_argmax(v, c, 1.0) {
        Ok(b) => {
            let res = log_call_residual(b, v, c, 1.0).abs();
            let two = log_call_argmax(v, 2.0 * v + 0.5f64.ln(), 1.0).unwrap_or(f64::NAN);
            Check::new(
                "log-call root",
                res <= 1e-10 && (two - 2.0).abs() <= 1e-10,
                format!("residual {res:.2e}, substitution root {two:.12}"),
            )
        }
        Err(e) => Check::failed("log-call root", e),
    };
    out.push(root);

    if heston {
        let name = "large-time constant vs Gamma Monte Carlo";
        match large_time_constants(&p).and_then(|k| large_time_q_monte_carlo(&p, n_gamma, cfg.seed).map(|m| (k, m))) {
            Ok((k, (q_mc, se))) => {
                let nu = std::env::var(NU_OVERRIDE_ENV)
                    .ok()
                    .and_then(|s| s.parse::<f64>().ok())
                    .unwrap_or(k.nu);
                let q = 1.0 / nu;
                out.push(Check::new(
                    name,
                    nu > 0.0 && (q - q_mc).abs() <= 4.0 * se,
                    format!("nu={nu:.6} 1/nu={q:.6} mc={q_mc:.6} se={se:.2e}"),
                ));
            }
            Err(e) => out.push(Check::failed(name, e)),
        }
    }
    out
}

/// Process exit code: 0 ok, 1 config error, 2 optimizer or numerical failure, 3 selftest failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => 1,
        _ => 2,
    }
}

/// Entry point used by the binary. Returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let cfg = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let emit = |text: &str| -> i32 {
        match &cfg.out {
            Some(path) => match std::fs::write(path, text) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {path}: {e}");
                    1
                }
            },
            None => {
                print!("{text}");
                0
            }
        }
    };
    match cli.command {
        Command::Price => match cmd_price(&cfg) {
            Ok((csv, rows)) => {
                let code = emit(&csv);
                let mut failed = false;
                for e in rows.iter().filter_map(|r| r.as_ref().err()) {
                    eprintln!("failed: {e}");
                    failed = true;
                }
                if code != 0 {
                    code
                } else if failed {
                    2
                } else {
                    0
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Command::Drift => {
            let (Some(&kind), Some(&strike)) = (cfg.kinds.first(), cfg.strikes.first()) else {
                eprintln!("error: drift needs a kind and a strike");
                return 1;
            };
            match cmd_drift(&cfg, kind, strike) {
                Ok(csv) => emit(&csv),
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
        Command::Selftest { quick } => {
            let checks = cmd_selftest(&cfg, quick);
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                0
            } else {
                3
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("heston-is").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_preset() {
        let cli = parse(&["price", "--preset", "table3", "--strikes", "50,60", "--paths", "100"]);
        let c = load_config(&cli.common).unwrap();
        assert_eq!(c.strikes, vec![50.0, 60.0]);
        assert_eq!(c.n_paths, 100);
        assert_eq!(c.kinds.len(), 16);
    }

    #[test]
    fn bad_flag_value_is_config_error() {
        let cli = parse(&["price", "--kinds", "Classic,Nope"]);
        let e = load_config(&cli.common).unwrap_err();
        assert_eq!(exit_code(&e), 1);
        assert!(e.to_string().contains("kinds"), "{e}");
    }

    #[test]
    fn minimal_price_is_one_row() {
        let mut c = RunConfig::default();
        c.n_paths = 200;
        c.n_steps = 20;
        let (csv, rows) = cmd_price(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("Classic,50,200,20,1,"));
    }

    #[test]
    fn drift_csv_shape() {
        let mut c = RunConfig::default();
        c.n_steps = 20;
        let csv = cmd_drift(&c, EstimatorKind::Bs, 50.0).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], DRIFT_HEADER);
        assert_eq!(lines.len(), 22);
        assert!(cmd_drift(&c, EstimatorKind::Classic, 50.0).is_err());
        assert!(cmd_drift(&c, EstimatorKind::BsA2, 50.0).is_err());
    }
}
