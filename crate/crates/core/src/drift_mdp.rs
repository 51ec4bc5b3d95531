//! Moderate-deviation drifts.
//!
//! In the moderate-deviation limit the weighted log-price is affine in the
//! controls, `y = y_0 + <a, xdot>`, so the optimal control is `lambda a` and
//! `lambda` solves the same scalar problem as the Black-Scholes reduction with
//! `v = |a|^2`. The direction `a` differs between the variants:
//!
//! * log-price: `a = (rho alpha sqrt(psi) + 2u, rho_bar alpha sqrt(psi))` where `u`
//!   carries the variance fluctuation `eta` back into the log-price,
//! * price and small-time: `a = alpha sqrt(psi) (rho, rho_bar)`,
//! * large-time: a scalar problem on the log-price rate with penalty `nu/4`.

use statrs::function::gamma::ln_gamma;

use crate::drift_bs::log_call_argmax;
use crate::error::{domain, Error, Result};
use crate::measure::DriftSchedule;
use crate::model::{psi_path, HestonParams, SvCoefficients, TimeGrid};
use crate::numeric::{cumulative_trapezoid, mean_var, trapezoid};
use crate::payoff::{LogCall, PayoffSpec};

fn log_call(spec: &PayoffSpec, p: &HestonParams) -> Result<LogCall> {
    spec.log_call(p)
        .ok_or_else(|| Error::Domain(format!("payoff {} has no log-call form", spec.kind)))
}

/// Scalar reduction shared by the moderate-deviation variants.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    /// Multiplier of the direction, `xdot = lambda a`.
    pub lambda: f64,
    /// `int |a|^2 dt`
    pub v_quad: f64,
    /// Log threshold `log K - log A + shift`.
    pub c: f64,
    /// Optimal value of the reduced objective.
    pub value: f64,
    pub psi: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
}

/// Log-price variant with its auxiliary paths.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpLogSolution {
    pub core: MdpSolution,
    /// `B_t = int_0^t f'(psi)`
    pub b: Vec<f64>,
    /// `gamma_t = int_0^t e^{B} alpha`
    pub gamma: Vec<f64>,
    /// `u = g(psi) e^{-B} (gamma - gamma_T) / 4`
    pub u: Vec<f64>,
}

fn solve_direction(
    lc: &LogCall,
    grid: &TimeGrid,
    a1: Vec<f64>,
    a2: Vec<f64>,
    shift: f64,
    psi: Vec<f64>,
) -> Result<MdpSolution> {
    let dt = grid.dt();
    let sq: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| x * x + y * y).collect();
    let v = trapezoid(&sq, dt);
    if !(v > 0.0) {
        return domain("degenerate moderate-deviation direction");
    }
    let c = lc.log_moneyness() + shift;
    let lambda = log_call_argmax(v, c, 1.0)?;
    let value = lc.f(lambda * v - shift) - 0.5 * lambda * lambda * v;
    Ok(MdpSolution {
        lambda,
        v_quad: v,
        c,
        value,
        psi,
        h1: a1.iter().map(|x| lambda * x).collect(),
        h2: a2.iter().map(|x| lambda * x).collect(),
    })
}

fn into_schedule(sol: &MdpSolution, adaptive: bool, prov: String) -> DriftSchedule {
    if adaptive {
        let h1 = sol.h1.iter().zip(&sol.psi).map(|(h, v)| h / v.sqrt()).collect();
        let h2 = sol.h2.iter().zip(&sol.psi).map(|(h, v)| h / v.sqrt()).collect();
        DriftSchedule::adaptive(h1, h2, prov)
    } else {
        DriftSchedule::deterministic(sol.h1.clone(), sol.h2.clone(), prov)
    }
}

/// Auxiliary paths `(B, gamma, u)` of the log-price variant on the mean path.
pub fn mdp_log_aux(p: &HestonParams, lc: &LogCall, grid: &TimeGrid, psi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dt = grid.dt();
    let fp: Vec<f64> = psi.iter().map(|&v| p.f_prime(v)).collect();
    let b = cumulative_trapezoid(&fp, dt);
    let ea: Vec<f64> = (0..psi.len())
        .map(|i| b[i].exp() * lc.weight.alpha(grid.t(i), grid.t_end))
        .collect();
    let gamma = cumulative_trapezoid(&ea, dt);
    let gt = gamma[gamma.len() - 1];
    let u = (0..psi.len())
        .map(|i| 0.25 * p.g(psi[i]) * (-b[i]).exp() * (gamma[i] - gt))
        .collect();
    (b, gamma, u)
}

/// Log-price moderate-deviation solution on the mean variance path.
pub fn mdp_log_solve(p: &HestonParams, spec: &PayoffSpec, grid: &TimeGrid) -> Result<MdpLogSolution> {
    let lc = log_call(spec, p)?;
    let psi = psi_path(p, grid);
    let (b, gamma, u) = mdp_log_aux(p, &lc, grid, &psi);
    let rb = p.rho_bar();
    let mut a1 = Vec::with_capacity(psi.len());
    let mut a2 = Vec::with_capacity(psi.len());
    let mut apsi = Vec::with_capacity(psi.len());
    for i in 0..psi.len() {
        let al = lc.weight.alpha(grid.t(i), grid.t_end);
        let s = al * psi[i].sqrt();
        a1.push(p.rho * s + 2.0 * u[i]);
        a2.push(rb * s);
        apsi.push(al * psi[i]);
    }
    let shift = 0.5 * trapezoid(&apsi, grid.dt());
    let core = solve_direction(&lc, grid, a1, a2, shift, psi)?;
    Ok(MdpLogSolution { core, b, gamma, u })
}

/// Reduced log-price objective in the `beta = 2 lambda` parametrisation,
/// `Fbar(beta v / 2) - beta^2 v / 8`.
pub fn mdp_log_objective(p: &HestonParams, spec: &PayoffSpec, grid: &TimeGrid, beta: f64) -> Result<f64> {
    let sol = mdp_log_solve(p, spec, grid)?;
    let lc = log_call(spec, p)?;
    let shift = sol.core.c - lc.log_moneyness();
    let v = sol.core.v_quad;
    Ok(lc.f(0.5 * beta * v - shift) - 0.125 * beta * beta * v)
}

/// The reduced log-price objective in its printed two-parameter form, kept for
/// comparison against the oracle only. Its `eta_0` term is unpenalised.
pub fn mdp_log_objective_printed(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    beta: f64,
    eta0: f64,
) -> Result<f64> {
    let lc = log_call(spec, p)?;
    let psi = psi_path(p, grid);
    let (b, _, u) = mdp_log_aux(p, &lc, grid, &psi);
    let dt = grid.dt();
    let n = psi.len();
    let rb2 = 1.0 - p.rho * p.rho;
    let al: Vec<f64> = (0..n).map(|i| lc.weight.alpha(grid.t(i), grid.t_end)).collect();
    let core: Vec<f64> = (0..n).map(|i| u[i] + 0.5 * al[i] * psi[i].sqrt()).collect();
    let phi1: Vec<f64> = (0..n).map(|i| core[i] * psi[i].sqrt()).collect();
    let inner: Vec<f64> = (0..n).map(|i| (-b[i]).exp() * core[i] * p.g(psi[i])).collect();
    let inner = cumulative_trapezoid(&inner, dt);
    let phi2: Vec<f64> = (0..n).map(|i| b[i].exp() * inner[i]).collect();
    let arg: Vec<f64> = (0..n).map(|i| al[i] * (phi1[i] - 0.5 * phi2[i])).collect();
    let pen: Vec<f64> = (0..n)
        .map(|i| phi2[i] * phi2[i] + 0.25 * rb2 * al[i] * al[i] * psi[i])
        .collect();
    let apsi: Vec<f64> = (0..n).map(|i| al[i] * psi[i]).collect();
    let shift = 0.5 * trapezoid(&apsi, dt);
    let x = beta * trapezoid(&arg, dt) + eta0 * grid.t_end * b[n - 1].exp();
    Ok(lc.f(x - shift) - 0.5 * beta * beta * trapezoid(&pen, dt))
}

pub fn mdp_log_drift(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    adaptive: bool,
) -> Result<(DriftSchedule, MdpLogSolution)> {
    let sol = mdp_log_solve(p, spec, grid)?;
    let prov = format!("mdp log beta={:.6}", 2.0 * sol.core.lambda);
    Ok((into_schedule(&sol.core, adaptive, prov), sol))
}

/// Price variant; `small_time` freezes the variance at `v0` and drops `f`.
pub fn mdp_price_solve(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    small_time: bool,
) -> Result<MdpSolution> {
    let lc = log_call(spec, p)?;
    let psi = if small_time {
        vec![p.v0; grid.n_steps + 1]
    } else {
        psi_path(p, grid)
    };
    let rb = p.rho_bar();
    let n = psi.len();
    let al: Vec<f64> = (0..n).map(|i| lc.weight.alpha(grid.t(i), grid.t_end)).collect();
    let a1 = (0..n).map(|i| p.rho * al[i] * psi[i].sqrt()).collect();
    let a2 = (0..n).map(|i| rb * al[i] * psi[i].sqrt()).collect();
    let apsi: Vec<f64> = (0..n).map(|i| al[i] * psi[i]).collect();
    let shift = 0.5 * trapezoid(&apsi, grid.dt());
    solve_direction(&lc, grid, a1, a2, shift, psi)
}

pub fn mdp_price_drift(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    adaptive: bool,
) -> Result<(DriftSchedule, MdpSolution)> {
    let sol = mdp_price_solve(p, spec, grid, false)?;
    let prov = format!("mdp price beta={:.6}", sol.lambda);
    Ok((into_schedule(&sol, adaptive, prov), sol))
}

pub fn mdp_small_time_drift(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    adaptive: bool,
) -> Result<(DriftSchedule, MdpSolution)> {
    let sol = mdp_price_solve(p, spec, grid, true)?;
    let prov = format!("mdp small-time beta={:.6}", sol.lambda);
    Ok((into_schedule(&sol, adaptive, prov), sol))
}

/// Printed scalar price problem
/// `Fbar(varrho beta int alpha psi / 2) - beta^2 ((rho_bar+1)^2 + rho_bar^2) int alpha^2 psi^2 / 8`
/// with `varrho = rho_bar + (rho_bar + 1)(rho + rho_bar)`. Returns the maximiser,
/// the knot controls it implies and their value. For comparison only.
pub fn mdp_price_printed(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
    small_time: bool,
) -> Result<(f64, Vec<f64>, Vec<f64>, f64)> {
    let lc = log_call(spec, p)?;
    let psi = if small_time {
        vec![p.v0; grid.n_steps + 1]
    } else {
        psi_path(p, grid)
    };
    let rho = p.rho;
    let rb = p.rho_bar();
    let dt = grid.dt();
    let n = psi.len();
    let al: Vec<f64> = (0..n).map(|i| lc.weight.alpha(grid.t(i), grid.t_end)).collect();
    let apsi: Vec<f64> = (0..n).map(|i| al[i] * psi[i]).collect();
    let a2p2: Vec<f64> = (0..n).map(|i| (al[i] * psi[i]).powi(2)).collect();
    let shift = 0.5 * trapezoid(&apsi, dt);
    let varrho = rb + (rb + 1.0) * (rho + rb);
    let a = 0.5 * varrho * trapezoid(&apsi, dt);
    let b = 0.25 * ((rb + 1.0).powi(2) + rb * rb) * trapezoid(&a2p2, dt);
    if !(a > 0.0 && b > 0.0) {
        return domain("printed price problem is degenerate");
    }
    let beta = log_call_argmax(a, lc.log_moneyness() + shift, b / a)?;
    let value = lc.f(beta * a - shift) - 0.5 * beta * beta * b;
    let h1 = (0..n).map(|i| 0.5 * (1.0 + rb) * beta * al[i] * psi[i].sqrt()).collect();
    let h2 = (0..n).map(|i| 0.5 * beta * al[i] * psi[i].sqrt()).collect();
    Ok((beta, h1, h2, value))
}

/// Moments of the stationary Gamma law of the variance,
/// shape `2 kappa theta / xi^2`, rate `2 kappa / xi^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMoments {
    pub shape: f64,
    pub rate: f64,
    pub mean: f64,
    pub mean_sqrt: f64,
}

pub fn gamma_moments(p: &HestonParams) -> Result<GammaMoments> {
    if !(p.kappa > 0.0 && p.theta > 0.0 && p.xi > 0.0) {
        return domain("stationary law needs kappa, theta, xi > 0");
    }
    let shape = 2.0 * p.kappa * p.theta / (p.xi * p.xi);
    let rate = 2.0 * p.kappa / (p.xi * p.xi);
    let mean_sqrt = (ln_gamma(shape + 0.5) - ln_gamma(shape)).exp() / rate.sqrt();
    Ok(GammaMoments {
        shape,
        rate,
        mean: shape / rate,
        mean_sqrt,
    })
}

/// Constants of the large-time problem.
///
/// With `a = (rho - xi/(2 kappa)) sqrt(Y)`, `b = rho_bar sqrt(Y)` under the
/// stationary law and `m = (E a, E b)`, the log-price rate `x` has penalty
/// `(nu/4) x^2` and the optimal Brownian shift is `bvec x`, where
/// `nu = 1 / q` and `bvec = m / (2 q)` with
/// `q = E a^2 + E b^2 - (E a)^2 / 2 - (E b)^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeTimeConstants {
    /// `E a^2 + E b^2 - ((E a)^2 + (E b)^2) / 2`
    pub q: f64,
    /// `(E a, E b)`
    pub m: [f64; 2],
    pub nu: f64,
    pub bvec: [f64; 2],
    /// `rho - xi / (2 kappa)`
    pub c: f64,
}

pub fn large_time_constants(p: &HestonParams) -> Result<LargeTimeConstants> {
    let g = gamma_moments(p)?;
    let c = p.rho - p.xi / (2.0 * p.kappa);
    let rb = p.rho_bar();
    let m = [c * g.mean_sqrt, rb * g.mean_sqrt];
    let q = (c * c + rb * rb) * (g.mean - 0.5 * g.mean_sqrt * g.mean_sqrt);
    if !(q > 0.0) {
        return domain(format!("large-time penalty must be positive, got q={q}"));
    }
    Ok(LargeTimeConstants {
        q,
        m,
        nu: 1.0 / q,
        bvec: [m[0] / (2.0 * q), m[1] / (2.0 * q)],
        c,
    })
}

/// Monte Carlo estimate of `q` from `n` stationary Gamma draws of the variance.
/// Returns `(q_hat, standard error)`; the error uses the delta method.
pub fn large_time_q_monte_carlo(p: &HestonParams, n: usize, seed: u64) -> Result<(f64, f64)> {
    use rand_chacha::rand_core::SeedableRng;
    use rand_distr::{Distribution, Gamma};
    let g = gamma_moments(p)?;
    let dist = Gamma::new(g.shape, 1.0 / g.rate).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let ys: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let w = p.rho_bar().powi(2) + (p.rho - p.xi / (2.0 * p.kappa)).powi(2);
    let (my, _) = mean_var(&ys);
    let sq: Vec<f64> = ys.iter().map(|y| y.sqrt()).collect();
    let (ms, _) = mean_var(&sq);
    let infl: Vec<f64> = ys.iter().zip(&sq).map(|(y, s)| w * (y - ms * s)).collect();
    let (_, vi) = mean_var(&infl);
    Ok((w * (my - 0.5 * ms * ms), (vi / n as f64).sqrt()))
}

/// Large-time drift `hdot = bvec c* alpha_t`, where `c*` maximises
/// `Fbar(c int alpha^2) - (nu/4) c^2 int alpha^2` (log-price centred on `theta`).
pub fn mdp_large_time_drift(
    p: &HestonParams,
    spec: &PayoffSpec,
    grid: &TimeGrid,
) -> Result<(DriftSchedule, f64)> {
    let lc = log_call(spec, p)?;
    let k = large_time_constants(p)?;
    let c_star = large_time_c_star(&lc, grid, p.theta, k.nu)?;
    let al = lc.weight.on_grid(grid);
    let h1 = al.iter().map(|a| k.bvec[0] * c_star * a).collect();
    let h2 = al.iter().map(|a| k.bvec[1] * c_star * a).collect();
    Ok((
        DriftSchedule::deterministic(h1, h2, format!("mdp large-time c={c_star:.6}")),
        c_star,
    ))
}

/// Scalar large-time problem, solved by the log-call root with penalty `nu/2`.
pub fn large_time_c_star(lc: &LogCall, grid: &TimeGrid, theta: f64, nu: f64) -> Result<f64> {
    let al = lc.weight.on_grid(grid);
    let a2: Vec<f64> = al.iter().map(|a| a * a).collect();
    let v = trapezoid(&a2, grid.dt());
    let shift = 0.5 * theta * trapezoid(&al, grid.dt());
    log_call_argmax(v, lc.log_moneyness() + shift, 0.5 * nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::PayoffKind;

    fn setup() -> (HestonParams, TimeGrid) {
        (HestonParams::reference(), TimeGrid::new(1.0, 252).unwrap())
    }

    #[test]
    fn gamma_t_reference_value() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let sol = mdp_log_solve(&p, &spec, &g).unwrap();
        assert!((sol.gamma[g.n_steps] - 0.28383).abs() < 1e-5);
        assert!(sol.u.iter().all(|&u| u <= 0.0));
        assert_eq!(sol.u[g.n_steps], 0.0);
    }

    #[test]
    fn zero_beta_gives_fbar_zero() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 45.0).unwrap();
        let lc = spec.log_call(&p).unwrap();
        let psi = psi_path(&p, &g);
        let apsi: Vec<f64> = psi.iter().enumerate().map(|(i, v)| v * (1.0 - g.t(i))).collect();
        let want = lc.f(-0.5 * trapezoid(&apsi, g.dt()));
        assert!((mdp_log_objective(&p, &spec, &g, 0.0).unwrap() - want).abs() < 1e-12);
        assert!((mdp_log_objective_printed(&p, &spec, &g, 0.0, 0.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn log_objective_maximised_at_solution() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 55.0).unwrap();
        let sol = mdp_log_solve(&p, &spec, &g).unwrap();
        let b = 2.0 * sol.core.lambda;
        let f = |b: f64| mdp_log_objective(&p, &spec, &g, b).unwrap();
        assert!((f(b) - sol.core.value).abs() < 1e-12);
        assert!(f(b) > f(b * 1.01) && f(b) > f(b * 0.99));
    }

    #[test]
    fn price_variant_is_bs_direction() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 60.0).unwrap();
        let sol = mdp_price_solve(&p, &spec, &g, false).unwrap();
        let sigma: Vec<f64> = psi_path(&p, &g).iter().map(|v| v.sqrt()).collect();
        let bs = crate::drift_bs::bs_beta(&spec, &p, &sigma, &g).unwrap();
        assert!((sol.lambda - bs.beta_star).abs() < 1e-10);
    }

    #[test]
    fn large_time_reference_values() {
        let p = HestonParams::reference();
        let gm = gamma_moments(&p).unwrap();
        assert!((gm.shape - 9.0).abs() < 1e-12);
        assert!((gm.mean_sqrt - 0.29587).abs() < 1e-5);
        let k = large_time_constants(&p).unwrap();
        assert!((k.c + 0.55).abs() < 1e-15);
        // published values are rounded to about 1e-4 relative
        assert!((k.q - 0.048665).abs() < 2e-5);
        assert!((k.m[0] / -2.0 - 0.081364).abs() < 2e-5);
        assert!((k.m[1] / -2.0 + 0.128126).abs() < 2e-5);
        assert!((k.nu * k.q - 1.0).abs() < 1e-14);
    }

    #[test]
    fn large_time_constants_from_matrix_inverse() {
        // Q = E[alpha alpha^T] over (X, W, W_perp); penalty matrix Q^{-1} + diag(0, 1, 1)
        let p = HestonParams::reference();
        let gm = gamma_moments(&p).unwrap();
        let k = large_time_constants(&p).unwrap();
        let (ea, eb) = (k.m[0], k.m[1]);
        let s = (k.c * k.c + 1.0 - p.rho * p.rho) * gm.mean;
        let q = [[s, ea, eb], [ea, 1.0, 0.0], [eb, 0.0, 1.0]];
        let inv = invert3(q);
        let a = [
            [inv[0][0], inv[0][1], inv[0][2]],
            [inv[1][0], inv[1][1] + 1.0, inv[1][2]],
            [inv[2][0], inv[2][1], inv[2][2] + 1.0],
        ];
        let a22 = [[a[1][1], a[1][2]], [a[2][1], a[2][2]]];
        let det = a22[0][0] * a22[1][1] - a22[0][1] * a22[1][0];
        let i22 = [[a22[1][1] / det, -a22[0][1] / det], [-a22[1][0] / det, a22[0][0] / det]];
        let x = [
            i22[0][0] * a[1][0] + i22[0][1] * a[2][0],
            i22[1][0] * a[1][0] + i22[1][1] * a[2][0],
        ];
        let nu = a[0][0] - (a[0][1] * x[0] + a[0][2] * x[1]);
        assert!((nu - k.nu).abs() < 1e-9 * k.nu, "{nu} {}", k.nu);
        assert!((-x[0] - k.bvec[0]).abs() < 1e-9);
        assert!((-x[1] - k.bvec[1]).abs() < 1e-9);
    }

    fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        let mut r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = ((j + 1) % 3, (j + 2) % 3);
                let (c, d) = ((i + 1) % 3, (i + 2) % 3);
                r[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
            }
        }
        r
    }

    #[test]
    fn large_time_first_channel_vanishes_at_critical_rho() {
        let mut p = HestonParams::reference();
        p.rho = p.xi / (2.0 * p.kappa);
        let k = large_time_constants(&p).unwrap();
        assert_eq!(k.bvec[0], 0.0);
        let g = TimeGrid::new(1.0, 50).unwrap();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let (d, _) = mdp_large_time_drift(&p, &spec, &g).unwrap();
        assert!(d.h1.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn large_time_columns_keep_constant_ratio() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 60.0).unwrap();
        let (d, _) = mdp_large_time_drift(&p, &spec, &g).unwrap();
        let k = large_time_constants(&p).unwrap();
        for i in 0..g.n_steps {
            assert!((d.h2[i] / d.h1[i] - p.rho_bar() / k.c).abs() < 1e-12);
        }
    }

    #[test]
    fn large_time_penalty_scaling() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 30.0).unwrap();
        let lc = spec.log_call(&p).unwrap();
        let nu = large_time_constants(&p).unwrap().nu;
        let c1 = large_time_c_star(&lc, &g, p.theta, nu).unwrap();
        let c4 = large_time_c_star(&lc, &g, p.theta, 4.0 * nu).unwrap();
        assert!((c4 / c1 - 0.25).abs() < 0.02, "{}", c4 / c1);
    }

    #[test]
    fn printed_price_problem_solves() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0).unwrap();
        let (beta, h1, h2, v) = mdp_price_printed(&p, &spec, &g, false).unwrap();
        assert!(beta > 0.0 && v.is_finite());
        assert!(h1.iter().zip(&h2).all(|(a, b)| (a - (1.0 + p.rho_bar()) * b).abs() < 1e-12));
    }

    #[test]
    fn stationary_law_needs_positive_params() {
        let p = HestonParams::black_scholes(0.2, 50.0, 0.0, 1.0).unwrap();
        assert!(gamma_moments(&p).is_err());
    }
}
