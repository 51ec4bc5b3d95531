//! Estimators, drift dispatch and variance-reduction tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::drift_bs::{bs_drift, bs_fully_adaptive};
use crate::drift_ldp::{ldp_drift, LdpMode};
use crate::drift_mdp::{
    large_time_constants, mdp_large_time_drift, mdp_log_drift, mdp_price_drift, mdp_small_time_drift,
};
use crate::error::{domain, Error, Result};
use crate::measure::DriftSchedule;
use crate::model::{psi_path, HestonParams, TimeGrid};
use crate::numeric::mean_var;
use crate::payoff::{PayoffKind, PayoffSpec};
use crate::rng::RngSpec;
use crate::sim::{map_paths, Measure};
use crate::varopt::{default_problem, project, Skeleton, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Classic,
    Antithetic,
    ControlGeometric,
    Bs,
    BsA,
    BsA2,
    LdpSn,
    LdpSnA,
    LdpSt,
    LdpStA,
    MdpSnLog,
    MdpSnLogA,
    MdpSn,
    MdpSnA,
    MdpSt,
    MdpStA,
    MdpLt,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 17] = [
        EstimatorKind::Classic,
        EstimatorKind::Antithetic,
        EstimatorKind::ControlGeometric,
        EstimatorKind::Bs,
        EstimatorKind::BsA,
        EstimatorKind::BsA2,
        EstimatorKind::LdpSn,
        EstimatorKind::LdpSnA,
        EstimatorKind::LdpSt,
        EstimatorKind::LdpStA,
        EstimatorKind::MdpSnLog,
        EstimatorKind::MdpSnLogA,
        EstimatorKind::MdpSn,
        EstimatorKind::MdpSnA,
        EstimatorKind::MdpSt,
        EstimatorKind::MdpStA,
        EstimatorKind::MdpLt,
    ];

    pub fn name(&self) -> &'static str {
        use EstimatorKind::*;
        match self {
            Classic => "Classic",
            Antithetic => "Antithetic",
            ControlGeometric => "ControlGeometric",
            Bs => "BS",
            BsA => "BS_A",
            BsA2 => "BS_A2",
            LdpSn => "LDPsn",
            LdpSnA => "LDPsn_A",
            LdpSt => "LDPst",
            LdpStA => "LDPst_A",
            MdpSnLog => "MDPsnLog",
            MdpSnLogA => "MDPsnLog_A",
            MdpSn => "MDPsn",
            MdpSnA => "MDPsn_A",
            MdpSt => "MDPst",
            MdpStA => "MDPst_A",
            MdpLt => "MDPlt",
        }
    }

    /// Whether the drift is multiplied by `sqrt(V)` at run time.
    pub fn is_adaptive(&self) -> bool {
        use EstimatorKind::*;
        matches!(self, BsA | BsA2 | LdpSnA | LdpStA | MdpSnLogA | MdpSnA | MdpStA)
    }

    pub fn uses_drift(&self) -> bool {
        !matches!(
            self,
            EstimatorKind::Classic | EstimatorKind::Antithetic | EstimatorKind::ControlGeometric
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        EstimatorKind::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown estimator kind '{s}'")))
    }
}

/// How drifts are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPolicy {
    /// Cross-check moderate-deviation drifts against the variational solver and
    /// switch to the solver's drift when the relative gap exceeds `oracle_tol`.
    pub oracle_check: bool,
    pub oracle_tol: f64,
}

impl Default for DriftPolicy {
    fn default() -> Self {
        Self {
            oracle_check: true,
            oracle_tol: 2e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DriftBuild {
    pub schedule: DriftSchedule,
    /// Variance path used to turn controls into adaptive drifts (and for output).
    pub psi: Vec<f64>,
    /// Closed-form objective scored in the discretised functional.
    pub closed_value: Option<f64>,
    pub oracle_value: Option<f64>,
    pub used_oracle: bool,
}

impl DriftBuild {
    pub fn oracle_gap(&self) -> Option<f64> {
        match (self.closed_value, self.oracle_value) {
            (Some(c), Some(o)) => Some((o - c) / c.abs().max(1e-300)),
            _ => None,
        }
    }
}

/// Skeleton matching a drift kind's variational problem.
pub fn skeleton_for(kind: EstimatorKind, p: &HestonParams, grid: &TimeGrid) -> Result<Skeleton> {
    use EstimatorKind::*;
    Ok(match kind {
        Bs | BsA => Skeleton::BlackScholes {
            sigma: psi_path(p, grid).iter().map(|v| v.sqrt()).collect(),
        },
        LdpSn | LdpSnA => Skeleton::LdpSmallNoise,
        LdpSt | LdpStA => Skeleton::LdpSmallTime,
        MdpSnLog | MdpSnLogA => Skeleton::MdpLog,
        MdpSn | MdpSnA => Skeleton::MdpPrice,
        MdpSt | MdpStA => Skeleton::MdpSmallTime,
        MdpLt => Skeleton::LargeTime {
            nu: large_time_constants(p)?.nu,
        },
        _ => return domain(format!("{kind} has no variational problem")),
    })
}

/// Two-channel Brownian controls implied by skeleton controls.
fn lift_controls(kind: EstimatorKind, p: &HestonParams, ctrl: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    use EstimatorKind::*;
    Ok(match kind {
        Bs | BsA => (
            ctrl[0].iter().map(|z| p.rho * z).collect(),
            ctrl[0].iter().map(|z| p.rho_bar() * z).collect(),
        ),
        MdpLt => {
            let k = large_time_constants(p)?;
            (
                ctrl[0].iter().map(|x| k.bvec[0] * x).collect(),
                ctrl[0].iter().map(|x| k.bvec[1] * x).collect(),
            )
        }
        _ => (ctrl[0].clone(), ctrl[1].clone()),
    })
}

/// Controls of a closed-form schedule in the coordinates of its skeleton.
fn skeleton_controls(kind: EstimatorKind, p: &HestonParams, d: &DriftSchedule, psi: &[f64]) -> Vec<Vec<f64>> {
    use EstimatorKind::*;
    let det = |h: &[f64]| -> Vec<f64> {
        if kind.is_adaptive() {
            h.iter().zip(psi).map(|(h, v)| h * v.sqrt()).collect()
        } else {
            h.to_vec()
        }
    };
    let (h1, h2) = (det(&d.h1), det(&d.h2));
    match kind {
        Bs | BsA => vec![h1
            .iter()
            .zip(&h2)
            .map(|(a, b)| p.rho * a + p.rho_bar() * b)
            .collect()],
        MdpLt => {
            let k = large_time_constants(p).unwrap();
            let n2 = k.bvec[0] * k.bvec[0] + k.bvec[1] * k.bvec[1];
            vec![h1
                .iter()
                .zip(&h2)
                .map(|(a, b)| (k.bvec[0] * a + k.bvec[1] * b) / n2)
                .collect()]
        }
        _ => vec![h1, h2],
    }
}

fn schedule_from_controls(
    kind: EstimatorKind,
    p: &HestonParams,
    ctrl: &[Vec<f64>],
    psi: &[f64],
    prov: String,
) -> Result<DriftSchedule> {
    let (mut h1, mut h2) = lift_controls(kind, p, ctrl)?;
    if kind.is_adaptive() {
        for i in 0..h1.len() {
            let s = psi[i].sqrt();
            h1[i] /= s;
            h2[i] /= s;
        }
        Ok(DriftSchedule::adaptive(h1, h2, prov))
    } else {
        Ok(DriftSchedule::deterministic(h1, h2, prov))
    }
}

/// Build the drift for `kind`. Returns `None` for estimators without a drift.
pub fn build_drift(
    kind: EstimatorKind,
    spec: &PayoffSpec,
    p: &HestonParams,
    grid: &TimeGrid,
    policy: &DriftPolicy,
) -> Result<Option<DriftBuild>> {
    use EstimatorKind::*;
    if !kind.uses_drift() {
        return Ok(None);
    }
    let mean_psi = psi_path(p, grid);
    if kind == BsA2 {
        return Ok(Some(DriftBuild {
            schedule: bs_fully_adaptive(spec, p, grid)?,
            psi: mean_psi,
            closed_value: None,
            oracle_value: None,
            used_oracle: false,
        }));
    }
    let skeleton = skeleton_for(kind, p, grid)?;
    if spec.log_call(p).is_none() {
        // no closed form: solve the variational problem directly
        let pb = default_problem(p, grid, spec, skeleton)?;
        let r = pb.solve(None, DEFAULT_BUDGET)?;
        let psi = match kind {
            LdpSn | LdpSnA | LdpSt | LdpStA => pb.skeleton_path(&r.controls).unwrap().var,
            MdpSt | MdpStA => vec![p.v0; grid.n_steps + 1],
            _ => mean_psi,
        };
        let sched = schedule_from_controls(kind, p, &r.controls, &psi, format!("varopt {kind}"))?;
        return Ok(Some(DriftBuild {
            schedule: sched,
            psi,
            closed_value: None,
            oracle_value: Some(r.value),
            used_oracle: true,
        }));
    }
    let (schedule, psi) = match kind {
        Bs | BsA => {
            let sigma: Vec<f64> = mean_psi.iter().map(|v| v.sqrt()).collect();
            (bs_drift(spec, p, &sigma, grid, kind == BsA)?, mean_psi)
        }
        LdpSn | LdpSnA | LdpSt | LdpStA => {
            let mode = if matches!(kind, LdpSn | LdpSnA) {
                LdpMode::SmallNoise
            } else {
                LdpMode::SmallTime
            };
            let (d, sol) = ldp_drift(p, spec, grid, mode, kind.is_adaptive())?;
            (d, sol.psi)
        }
        MdpSnLog | MdpSnLogA => {
            let (d, sol) = mdp_log_drift(p, spec, grid, kind.is_adaptive())?;
            (d, sol.core.psi)
        }
        MdpSn | MdpSnA => {
            let (d, sol) = mdp_price_drift(p, spec, grid, kind.is_adaptive())?;
            (d, sol.psi)
        }
        MdpSt | MdpStA => {
            let (d, sol) = mdp_small_time_drift(p, spec, grid, kind.is_adaptive())?;
            (d, sol.psi)
        }
        MdpLt => (mdp_large_time_drift(p, spec, grid)?.0, mean_psi),
        _ => unreachable!(),
    };
    let mut out = DriftBuild {
        schedule,
        psi,
        closed_value: None,
        oracle_value: None,
        used_oracle: false,
    };
    let mdp = matches!(kind, MdpSnLog | MdpSnLogA | MdpSn | MdpSnA | MdpSt | MdpStA);
    if policy.oracle_check && mdp {
        let cmp = compare_with_oracle(kind, spec, p, grid, &out, DEFAULT_BUDGET)?;
        out.closed_value = Some(cmp.closed);
        out.oracle_value = Some(cmp.oracle);
        if cmp.rel_gap > policy.oracle_tol {
            out.schedule = schedule_from_controls(
                kind,
                p,
                &cmp.oracle_controls,
                &out.psi,
                format!("varopt {kind} (closed-form gap {:.3e})", cmp.rel_gap),
            )?;
            out.used_oracle = true;
        }
    }
    Ok(Some(out))
}

/// Closed form scored against the variational solver in the same functional.
#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub closed: f64,
    pub oracle: f64,
    /// `(oracle - closed) / |closed|`
    pub rel_gap: f64,
    pub oracle_controls: Vec<Vec<f64>>,
}

/// Compare an already built closed-form drift with the variational solver.
pub fn compare_with_oracle(
    kind: EstimatorKind,
    spec: &PayoffSpec,
    p: &HestonParams,
    grid: &TimeGrid,
    b: &DriftBuild,
    budget: usize,
) -> Result<OracleComparison> {
    if b.schedule.running_alpha().is_some() {
        return domain("per-step drifts have no static controls");
    }
    let pb = default_problem(p, grid, spec, skeleton_for(kind, p, grid)?)?;
    let ctrl = skeleton_controls(kind, p, &b.schedule, &b.psi);
    oracle_compare_controls(&pb, &ctrl, budget)
}

/// Score `ctrl` in `pb` and solve `pb` (warm-started from the projection of `ctrl`).
pub fn oracle_compare_controls(
    pb: &crate::varopt::VariationalProblem,
    ctrl: &[Vec<f64>],
    budget: usize,
) -> Result<OracleComparison> {
    let closed = pb.objective_controls(ctrl);
    let init = project(&pb.basis, ctrl);
    let r = pb.solve(Some(&init), budget)?;
    Ok(OracleComparison {
        closed,
        oracle: r.value,
        rel_gap: (r.value - closed) / closed.abs().max(1e-300),
        oracle_controls: r.controls,
    })
}

/// Closed-form drift of `kind` compared with the variational solver.
pub fn oracle_compare(
    kind: EstimatorKind,
    spec: &PayoffSpec,
    p: &HestonParams,
    grid: &TimeGrid,
) -> Result<OracleComparison> {
    let policy = DriftPolicy {
        oracle_check: false,
        ..Default::default()
    };
    let b = build_drift(kind, spec, p, grid, &policy)?
        .ok_or_else(|| Error::Domain(format!("{kind} has no drift")))?;
    compare_with_oracle(kind, spec, p, grid, &b, DEFAULT_BUDGET)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    pub kind: EstimatorKind,
    pub strike: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub price: f64,
    pub std_err: f64,
    /// Per-sample variance; an Antithetic sample is a pair average.
    pub variance: f64,
    pub var_reduction: f64,
    /// Estimate of `P(G > 0)`.
    pub prob_positive: f64,
    pub wall_time_s: f64,
    pub drift_time_s: f64,
    pub note: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub policy: DriftPolicy,
    /// Record wall-clock times; off by default so that output is reproducible.
    pub timing: bool,
}

/// Closed-form price of the discrete geometric-average call on `t_1..t_n`
/// under constant variance (the control variate's mean).
pub fn geometric_control_mean(p: &HestonParams, grid: &TimeGrid, strike: f64) -> Result<f64> {
    if !p.is_constant_variance() {
        return domain("the geometric control needs constant variance");
    }
    let n = grid.n_steps;
    let s2 = p.v0;
    let tbar = (1..=n).map(|j| grid.t(j)).sum::<f64>() / n as f64;
    let mins: f64 = (1..=n).map(|k| grid.t(k) * (2 * (n - k) + 1) as f64).sum();
    let var = s2 * mins / (n * n) as f64;
    let mu = p.s0.ln() + (p.r - 0.5 * s2) * tbar;
    let sd = var.sqrt();
    let d2 = (mu - strike.ln()) / sd;
    let nd = Normal::new(0.0, 1.0).unwrap();
    Ok((mu + 0.5 * var).exp() * nd.cdf(d2 + sd) - strike * nd.cdf(d2))
}

fn geometric_control_payoff(p: &HestonParams, grid: &TimeGrid, x: &[f64], strike: f64) -> f64 {
    let n = grid.n_steps;
    let s: f64 = (1..=n).map(|j| p.r * grid.t(j) + x[j]).sum();
    (p.s0 * (s / n as f64).exp() - strike).max(0.0)
}

fn elapsed(t: Instant, on: bool) -> f64 {
    if on {
        t.elapsed().as_secs_f64()
    } else {
        0.0
    }
}

/// Run one estimator. `baseline_var` is the Classic per-path variance used for
/// the reduction ratio (computed with the same seed when absent).
///
/// Antithetic draws `n_paths` pairs, so it simulates twice as many paths and
/// its ratio is not cost-normalised. ControlGeometric subtracts the discrete
/// geometric-average call with unit coefficient and adds back its exact mean.
#[allow(clippy::too_many_arguments)]
pub fn run_estimator_with(
    kind: EstimatorKind,
    spec: &PayoffSpec,
    p: &HestonParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    baseline_var: Option<f64>,
    opts: &RunOptions,
) -> Result<EstimatorReport> {
    if n_paths < 2 {
        return domain("need at least two paths");
    }
    let rng = RngSpec::new(seed);
    let t0 = Instant::now();
    let drift = build_drift(kind, spec, p, grid, &opts.policy)
        .map_err(|e| e.context(format_args!("{kind} at K={}", spec.strike)))?;
    let drift_time = elapsed(t0, opts.timing);
    let t1 = Instant::now();
    let mut note = String::new();
    let (n_used, price, variance, prob) = match kind {
        EstimatorKind::Classic => {
            let g = map_paths(p, grid, Measure::P, n_paths, rng, false, |x, v, _| spec.eval(p, grid, x, v));
            let (m, var) = mean_var(&g);
            let prob = g.iter().filter(|&&x| x > 0.0).count() as f64 / n_paths as f64;
            (n_paths, m, var, prob)
        }
        EstimatorKind::Antithetic => {
            // one sample is the average of an antithetic pair
            let g = map_paths(p, grid, Measure::P, 2 * n_paths, rng, true, |x, v, _| spec.eval(p, grid, x, v));
            let avg: Vec<f64> = g.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
            let (m, var) = mean_var(&avg);
            let prob = g.iter().filter(|&&x| x > 0.0).count() as f64 / g.len() as f64;
            (n_paths, m, var, prob)
        }
        EstimatorKind::ControlGeometric => {
            if spec.kind != PayoffKind::ArithmeticAsianCall {
                return Err(Error::Domain(format!(
                    "{kind} at K={}: the geometric control applies to arithmetic Asian calls",
                    spec.strike
                )));
            }
            let mean_c = geometric_control_mean(p, grid, spec.strike)
                .map_err(|e| e.context(format_args!("{kind} at K={}", spec.strike)))?;
            let g = map_paths(p, grid, Measure::P, n_paths, rng, false, |x, v, _| {
                (spec.eval(p, grid, x, v), geometric_control_payoff(p, grid, x, spec.strike))
            });
            let adj: Vec<f64> = g.iter().map(|(y, c)| y - (c - mean_c)).collect();
            let (m, var) = mean_var(&adj);
            let prob = g.iter().filter(|c| c.0 > 0.0).count() as f64 / n_paths as f64;
            (n_paths, m, var, prob)
        }
        _ => {
            let d = drift.as_ref().unwrap();
            note = d.schedule.provenance.clone();
            let w = map_paths(p, grid, Measure::Q(&d.schedule), n_paths, rng, false, |x, v, lw| {
                let g = spec.eval(p, grid, x, v);
                if g > 0.0 {
                    let z = lw.exp();
                    (g * z, z)
                } else {
                    (0.0, 0.0)
                }
            });
            let vals: Vec<f64> = w.iter().map(|c| c.0).collect();
            let (m, var) = mean_var(&vals);
            let prob = w.iter().map(|c| c.1).sum::<f64>() / n_paths as f64;
            (n_paths, m, var, prob)
        }
    };
    let wall = elapsed(t1, opts.timing);
    let base = match baseline_var {
        Some(b) => b,
        None if kind == EstimatorKind::Classic => variance,
        None => {
            run_estimator_with(EstimatorKind::Classic, spec, p, grid, n_paths, seed, None, opts)?.variance
        }
    };
    Ok(EstimatorReport {
        kind,
        strike: spec.strike,
        n_paths: n_used,
        n_steps: grid.n_steps,
        seed,
        price,
        std_err: (variance / n_used as f64).sqrt(),
        variance,
        var_reduction: base / variance,
        prob_positive: prob,
        wall_time_s: wall,
        drift_time_s: drift_time,
        note,
    })
}

pub fn run_estimator(
    kind: EstimatorKind,
    spec: &PayoffSpec,
    p: &HestonParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    run_estimator_with(kind, spec, p, grid, n_paths, seed, None, &RunOptions::default())
}

/// A table cell that could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellError {
    pub kind: EstimatorKind,
    pub strike: f64,
    pub message: String,
}

impl fmt::Display for CellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type TableRow = std::result::Result<EstimatorReport, CellError>;

/// Every kind at every strike, with a shared Classic baseline per strike.
/// Rows are ordered by strike, then by the order of `kinds`. Failed cells are
/// kept in place as errors.
#[allow(clippy::too_many_arguments)]
pub fn run_table(
    payoff: PayoffKind,
    strikes: &[f64],
    kinds: &[EstimatorKind],
    p: &HestonParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    opts: &RunOptions,
) -> Vec<TableRow> {
    let mut strikes = strikes.to_vec();
    strikes.sort_by(|a, b| a.total_cmp(b));
    let mut rows = Vec::new();
    if kinds.is_empty() {
        return rows;
    }
    for k in strikes {
        let fail = |kind: EstimatorKind, e: Error| CellError {
            kind,
            strike: k,
            message: e.to_string(),
        };
        let classic = PayoffSpec::new(payoff, k).and_then(|spec| {
            run_estimator_with(EstimatorKind::Classic, &spec, p, grid, n_paths, seed, None, opts)
                .map(|c| (spec, c))
        });
        let (spec, classic) = match classic {
            Ok(x) => x,
            Err(e) => {
                rows.extend(kinds.iter().map(|&kind| Err(fail(kind, e.clone()))));
                continue;
            }
        };
        for &kind in kinds {
            let row = if kind == EstimatorKind::Classic {
                Ok(classic.clone())
            } else {
                run_estimator_with(kind, &spec, p, grid, n_paths, seed, Some(classic.variance), opts)
            };
            rows.push(row.map_err(|e| fail(kind, e)));
        }
    }
    rows
}

pub const CSV_HEADER: &str = "kind,strike,n_paths,n_steps,seed,price,std_err,variance,var_reduction,prob_positive,wall_time_s,drift_time_s";

/// One line per row. Failed cells keep their kind and strike with empty fields.
pub fn write_csv(rows: &[TableRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let r = match row {
            Ok(r) => r,
            Err(e) => {
                writeln!(out, "{},{},,,,,,,,,,", e.kind, e.strike)?;
                continue;
            }
        };
        writeln!(
            out,
            "{},{},{},{},{},{:.10e},{:.6e},{:.6e},{:.6e},{:.6e},{:.3},{:.3}",
            r.kind,
            r.strike,
            r.n_paths,
            r.n_steps,
            r.seed,
            r.price,
            r.std_err,
            r.variance,
            r.var_reduction,
            r.prob_positive,
            r.wall_time_s,
            r.drift_time_s
        )?;
    }
    Ok(())
}

/// Sample mean and standard error of the likelihood ratio `Z` under P.
pub fn likelihood_ratio_mean(
    drift: &DriftSchedule,
    p: &HestonParams,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> (f64, f64) {
    let z = map_paths(
        p,
        grid,
        Measure::PWithLikelihood(drift),
        n_paths,
        RngSpec::new(seed),
        false,
        |_, _, lw| lw.exp(),
    );
    let (m, v) = mean_var(&z);
    (m, (v / n_paths as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (HestonParams, TimeGrid) {
        (HestonParams::reference(), TimeGrid::new(1.0, 50).unwrap())
    }

    #[test]
    fn kind_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("LDPxx".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn classic_reduction_is_one() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let r = run_estimator(EstimatorKind::Classic, &spec, &p, &g, 2000, 1).unwrap();
        assert_eq!(r.var_reduction, 1.0);
        assert!(r.price > 0.0 && r.prob_positive > 0.3 && r.prob_positive < 0.8);
    }

    #[test]
    fn zero_drift_matches_classic() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let z = DriftSchedule::zero(&g);
        let a = map_paths(&p, &g, Measure::Q(&z), 500, RngSpec::new(4), false, |x, v, lw| {
            spec.eval(&p, &g, x, v) * lw.exp()
        });
        let b = map_paths(&p, &g, Measure::P, 500, RngSpec::new(4), false, |x, v, _| spec.eval(&p, &g, x, v));
        assert_eq!(a, b);
    }

    #[test]
    fn control_mean_matches_simulation() {
        let p = HestonParams::black_scholes(0.25, 50.0, 0.05, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 12).unwrap();
        let m = geometric_control_mean(&p, &g, 50.0).unwrap();
        let c = map_paths(&p, &g, Measure::P, 200_000, RngSpec::new(8), false, |x, _, _| {
            geometric_control_payoff(&p, &g, x, 50.0)
        });
        let (mc, vc) = mean_var(&c);
        assert!((mc - m).abs() < 4.0 * (vc / 200_000.0).sqrt(), "{mc} {m}");
    }

    #[test]
    fn csv_is_stable() {
        let (p, g) = setup();
        let rows = run_table(
            PayoffKind::GeometricAsianCall,
            &[55.0, 45.0],
            &[EstimatorKind::Classic, EstimatorKind::Bs],
            &p,
            &g,
            500,
            3,
            &RunOptions::default(),
        );
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].as_ref().unwrap().strike, 45.0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&rows, &mut a).unwrap();
        write_csv(&rows, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn failed_cells_stay_in_the_table() {
        let (p, g) = setup();
        let kinds = [EstimatorKind::Classic, EstimatorKind::ControlGeometric];
        let rows = run_table(PayoffKind::GeometricAsianCall, &[50.0], &kinds, &p, &g, 200, 3, &RunOptions::default());
        assert!(rows[0].is_ok());
        let e = rows[1].as_ref().unwrap_err();
        assert_eq!((e.kind, e.strike), (EstimatorKind::ControlGeometric, 50.0));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "ControlGeometric,50,,,,,,,,,,");
        assert!(run_table(PayoffKind::GeometricAsianCall, &[50.0], &[], &p, &g, 200, 3, &RunOptions::default()).is_empty());
    }

    #[test]
    fn per_step_drift_rejects_other_payoffs() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::VolIndicatorSwap, 10.0).unwrap();
        assert!(build_drift(EstimatorKind::BsA2, &spec, &p, &g, &DriftPolicy::default()).is_err());
    }
}
