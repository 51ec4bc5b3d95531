//! Large-deviation drift for log-call payoffs via the Riccati reduction.
//!
//! With `A = U / sqrt(psi)` the Euler-Lagrange system collapses to a scalar
//! Riccati equation for `A` (independent of `psi`) plus a linear ODE for `psi`.
//! The first integral gives `(Z - rho U) / rho_bar^2 = beta alpha sqrt(psi) / 2`.
//! The remaining freedom `(A_0, beta)` is fixed by maximising the reduced
//! objective directly.

use std::io::Write;

use crate::drift_bs::bs_beta;
use crate::error::{domain, Error, Result};
use crate::measure::DriftSchedule;
use crate::model::{psi_path, HestonParams, TimeGrid};
use crate::numeric::{rk4_step, trapezoid};
use crate::optim::{nelder_mead_max, NmOptions};
use crate::payoff::{LogCall, PayoffSpec, WeightPath};

const BLOWUP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdpMode {
    SmallNoise,
    /// Drops mean reversion and the `-psi/2` log-price drift.
    SmallTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiPath {
    /// `A` on the grid knots (NaN after a blow-up).
    pub a: Vec<f64>,
    pub blew_up: bool,
}

/// Right-hand side of the Riccati equation at time `t`.
#[inline]
fn riccati_rhs(p: &HestonParams, w: WeightPath, mode: LdpMode, beta: f64, t: f64, a: f64) -> f64 {
    let (k, drift) = match mode {
        LdpMode::SmallNoise => (p.kappa, 0.5),
        LdpMode::SmallTime => (0.0, 0.0),
    };
    let rb2 = 1.0 - p.rho * p.rho;
    let al = w.alpha(t, p.t_end);
    0.5 * p.rho * beta * w.alpha_dot(p.t_end) + k * a - 0.5 * p.xi * a * a
        + 0.5 * beta * al * (p.xi * (drift - 0.25 * rb2 * beta * al) - p.rho * k)
}

/// RK4 with four substeps per grid cell. Flags a blow-up once `|A| > 1e6`.
pub fn riccati_solve(
    p: &HestonParams,
    w: WeightPath,
    grid: &TimeGrid,
    beta: f64,
    a0: f64,
    mode: LdpMode,
) -> RiccatiPath {
    let n = grid.n_steps;
    let h = grid.dt() / 4.0;
    let mut a = vec![f64::NAN; n + 1];
    a[0] = a0;
    let mut y = a0;
    for i in 0..n {
        for s in 0..4 {
            let t = grid.t(i) + s as f64 * h;
            y = rk4_step(|t, y| riccati_rhs(p, w, mode, beta, t, y), t, y, h);
        }
        if !(y.abs() <= BLOWUP) {
            return RiccatiPath { a, blew_up: true };
        }
        a[i + 1] = y;
    }
    RiccatiPath { a, blew_up: false }
}

/// Solve `psi' + (k - xi A) psi = k theta` by the integrating factor, with
/// trapezoid quadrature of the exponent and of the source term.
pub fn psi_from_a(p: &HestonParams, grid: &TimeGrid, a: &[f64], mode: LdpMode) -> Result<Vec<f64>> {
    let k = match mode {
        LdpMode::SmallNoise => p.kappa,
        LdpMode::SmallTime => 0.0,
    };
    let dt = grid.dt();
    let mut psi = Vec::with_capacity(a.len());
    let mut expo = 0.0;
    let mut src = 0.0;
    let mut prev_e = 1.0;
    psi.push(p.v0);
    for i in 1..a.len() {
        expo += 0.5 * dt * ((k - p.xi * a[i - 1]) + (k - p.xi * a[i]));
        let e = expo.exp();
        src += 0.5 * dt * (prev_e + e);
        prev_e = e;
        let v = (p.v0 + k * p.theta * src) / e;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Numerical(format!("psi left (0, inf) at knot {i}")));
        }
        psi.push(v);
    }
    Ok(psi)
}

/// Everything the reduced objective produces for one `(A_0, beta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpSolution {
    pub mode: LdpMode,
    pub a0: f64,
    pub beta: f64,
    pub value: f64,
    pub a: Vec<f64>,
    pub psi: Vec<f64>,
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    /// `int alpha phi' dt`
    pub y: f64,
}

impl LdpSolution {
    /// Controls `(x1', x2') = (U, (Z - rho U)/rho_bar)` on the knots.
    pub fn controls(&self, p: &HestonParams) -> (Vec<f64>, Vec<f64>) {
        let rb = p.rho_bar();
        let h2 = self
            .u
            .iter()
            .zip(&self.z)
            .map(|(u, z)| (z - p.rho * u) / rb)
            .collect();
        (self.u.clone(), h2)
    }

    /// Transversality residuals `(beta - 2 F'(y), A_T - rho beta alpha_T / 2)`.
    pub fn boundary_residuals(&self, lc: &LogCall, p: &HestonParams) -> (f64, f64) {
        let at = lc.weight.alpha(p.t_end, p.t_end);
        (
            self.beta - 2.0 * lc.f_prime(self.y),
            self.a[self.a.len() - 1] - 0.5 * p.rho * self.beta * at,
        )
    }

    /// Dump `t, A, psi, U, Z, h1, h2` as CSV.
    pub fn write_csv(&self, p: &HestonParams, grid: &TimeGrid, mut out: impl Write) -> std::io::Result<()> {
        let (h1, h2) = self.controls(p);
        writeln!(out, "t,a,psi,u,z,h1_dot,h2_dot")?;
        for i in 0..self.a.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                grid.t(i),
                self.a[i],
                self.psi[i],
                self.u[i],
                self.z[i],
                h1[i],
                h2[i]
            )?;
        }
        Ok(())
    }
}

fn log_call(spec: &PayoffSpec, p: &HestonParams) -> Result<LogCall> {
    spec.log_call(p)
        .ok_or_else(|| Error::Domain(format!("payoff {} has no log-call form", spec.kind)))
}

/// Reduced objective `F(int alpha phi') - 0.5 int (U^2 + ((Z - rho U)/rho_bar)^2)`.
pub fn ldp_objective(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    beta: f64,
    a0: f64,
    mode: LdpMode,
) -> Result<LdpSolution> {
    let lc = log_call(spec, p)?;
    let ric = riccati_solve(p, lc.weight, grid, beta, a0, mode);
    if ric.blew_up {
        return Err(Error::Numerical(format!("Riccati blow-up for A0={a0}, beta={beta}")));
    }
    let psi = psi_from_a(p, grid, &ric.a, mode)?;
    let dt = grid.dt();
    let rb2 = 1.0 - p.rho * p.rho;
    let n = psi.len();
    let mut u = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    let mut aphi = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n);
    for i in 0..n {
        let al = lc.weight.alpha(grid.t(i), grid.t_end);
        let sv = psi[i].sqrt();
        let ui = ric.a[i] * sv;
        let ci = 0.5 * rb2 * beta * al * sv;
        let zi = p.rho * ui + ci;
        let drift = if mode == LdpMode::SmallNoise { 0.5 * psi[i] } else { 0.0 };
        aphi.push(al * (zi * sv - drift));
        energy.push(ui * ui + ci * ci / rb2);
        u.push(ui);
        z.push(zi);
    }
    let y = trapezoid(&aphi, dt);
    let value = lc.f(y) - 0.5 * trapezoid(&energy, dt);
    Ok(LdpSolution {
        mode,
        a0,
        beta,
        value,
        a: ric.a,
        psi,
        u,
        z,
        y,
    })
}

/// Maximise the reduced objective over `(A_0, beta)` from a fixed grid of starts
/// (plus two starts scaled from the Black-Scholes `beta`).
pub fn ldp_solve(p: &HestonParams, spec: &PayoffSpec, grid: &TimeGrid, mode: LdpMode) -> Result<LdpSolution> {
    let eval = |x: &[f64]| match ldp_objective(p, spec, grid, x[1], x[0], mode) {
        Ok(s) => s.value,
        Err(_) => f64::NEG_INFINITY,
    };
    let mut starts: Vec<[f64; 2]> = Vec::new();
    for a0 in [-2.0, -0.5, 0.0, 0.5, 2.0] {
        for b in [0.1, 1.0, 5.0, 20.0] {
            starts.push([a0, b]);
        }
    }
    let sigma: Vec<f64> = psi_path(p, grid).iter().map(|v| v.sqrt()).collect();
    if let Ok(r) = bs_beta(spec, p, &sigma, grid) {
        starts.push([0.0, 2.0 * r.beta_star]);
        starts.push([0.0, 4.0 * r.beta_star]);
    }
    let opts = NmOptions {
        max_evals: 4_000,
        initial_step: 0.25,
        ..Default::default()
    };
    // for infeasible starts, first push y across the exercise threshold
    let lm = log_call(spec, p)?.log_moneyness();
    let margin = |x: &[f64]| match ldp_objective(p, spec, grid, x[1], x[0], mode) {
        Ok(s) => (s.y - lm).min(0.05),
        Err(_) => f64::NEG_INFINITY,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        let mut s = s.to_vec();
        if !eval(&s).is_finite() {
            if !margin(&s).is_finite() {
                continue;
            }
            let quick = NmOptions {
                max_evals: 1_500,
                ..opts
            };
            s = nelder_mead_max(margin, &s, &quick).x;
            if !eval(&s).is_finite() {
                continue;
            }
        }
        let r = nelder_mead_max(eval, &s, &opts);
        if best.as_ref().is_none_or(|b| r.value > b.0) {
            best = Some((r.value, r.x));
        }
    }
    let (_, x) = best.ok_or_else(|| Error::Optim("no feasible (A0, beta) start".into()))?;
    ldp_objective(p, spec, grid, x[1], x[0], mode)
}

/// Drift schedule from the optimal reduced solution. Adaptive mode divides by
/// `sqrt(psi)` so that the runtime shift is `hdot sqrt(V)`.
pub fn ldp_drift(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    mode: LdpMode,
    adaptive: bool,
) -> Result<(DriftSchedule, LdpSolution)> {
    if grid.n_steps < 1 {
        return domain("empty grid");
    }
    let sol = ldp_solve(p, spec, grid, mode)?;
    let (mut h1, mut h2) = sol.controls(p);
    let prov = format!("ldp {:?} A0={:.6} beta={:.6}", mode, sol.a0, sol.beta);
    let sched = if adaptive {
        for i in 0..h1.len() {
            let sv = sol.psi[i].sqrt();
            h1[i] /= sv;
            h2[i] /= sv;
        }
        DriftSchedule::adaptive(h1, h2, prov)
    } else {
        DriftSchedule::deterministic(h1, h2, prov)
    };
    Ok((sched, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::PayoffKind;

    fn setup() -> (HestonParams, TimeGrid) {
        (HestonParams::reference(), TimeGrid::new(1.0, 252).unwrap())
    }

    #[test]
    fn psi_linear_when_a_cancels_mean_reversion() {
        let (p, g) = setup();
        let a = vec![p.kappa / p.xi; g.n_steps + 1];
        let psi = psi_from_a(&p, &g, &a, LdpMode::SmallNoise).unwrap();
        for (i, v) in psi.iter().enumerate() {
            assert!((v - (p.v0 + p.kappa * p.theta * g.t(i))).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_with_zero_a_is_mean_path() {
        let (p, g) = setup();
        let psi = psi_from_a(&p, &g, &vec![0.0; g.n_steps + 1], LdpMode::SmallNoise).unwrap();
        let want = psi_path(&p, &g);
        let err = psi.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn negative_start_blows_up() {
        let (p, g) = setup();
        // exact blow-up time 2/(xi |A0|) is well inside [0, 1]
        let r = riccati_solve(&p, WeightPath::Asian, &g, 1.0, -100.0, LdpMode::SmallNoise);
        assert!(r.blew_up);
        let r = riccati_solve(&p, WeightPath::Asian, &g, 1.0, 50.0, LdpMode::SmallNoise);
        assert!(!r.blew_up);
    }

    #[test]
    fn optimum_satisfies_transversality() {
        let (p, g) = setup();
        for (kind, k) in [(PayoffKind::GeometricAsianCall, 55.0), (PayoffKind::EuropeanCall, 60.0)] {
            let spec = PayoffSpec::new(kind, k).unwrap();
            let sol = ldp_solve(&p, &spec, &g, LdpMode::SmallNoise).unwrap();
            let lc = spec.log_call(&p).unwrap();
            let (rb, ra) = sol.boundary_residuals(&lc, &p);
            assert!(rb.abs() < 2e-3 * sol.beta, "beta residual {rb} beta {}", sol.beta);
            assert!(ra.abs() < 2e-3 * (1.0 + sol.beta), "A_T residual {ra}");
        }
    }

    #[test]
    fn first_integral_holds_on_output() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let sol = ldp_solve(&p, &spec, &g, LdpMode::SmallNoise).unwrap();
        let rb2 = 1.0 - p.rho * p.rho;
        for i in 0..=g.n_steps {
            let al = WeightPath::Asian.alpha(g.t(i), 1.0);
            let lhs = (sol.z[i] - p.rho * sol.u[i]) / rb2;
            assert!((lhs - 0.5 * sol.beta * al * sol.psi[i].sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_times_sqrt_psi_is_deterministic() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 60.0).unwrap();
        let (d, sol) = ldp_drift(&p, &spec, &g, LdpMode::SmallNoise, false).unwrap();
        let (a, _) = ldp_drift(&p, &spec, &g, LdpMode::SmallNoise, true).unwrap();
        for i in 0..=g.n_steps {
            let s = sol.psi[i].sqrt();
            assert!((a.h1[i] * s - d.h1[i]).abs() < 1e-12);
            assert!((a.h2[i] * s - d.h2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_knot() {
        let p = HestonParams::reference();
        let g = TimeGrid::new(1.0, 20).unwrap();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let sol = ldp_solve(&p, &spec, &g, LdpMode::SmallTime).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&p, &g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 22);
    }
}
