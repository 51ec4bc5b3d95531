//! Black-Scholes reduction of the small-noise problem for log-call payoffs.
//!
//! With a deterministic volatility `sigma_t` the optimal control is
//! `xdot = beta alpha sigma`, and `beta` maximises
//! `F(-0.5 int alpha sigma^2 + beta v) - 0.5 lambda beta^2 v` with `v = int (alpha sigma)^2`.

use crate::error::{domain, Error, Result};
use crate::measure::DriftSchedule;
use crate::model::{HestonParams, TimeGrid};
use crate::numeric::{softplus, trapezoid};
use crate::payoff::{LogCall, PayoffSpec};

const BETA_MAX: f64 = 1e6;
const W_MIN: f64 = -700.0;

/// Scalar problem data and its maximiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsReduction {
    /// `int (alpha sigma)^2 dt`
    pub v_quad: f64,
    /// `log K - log A + 0.5 int alpha sigma^2 dt`
    pub c: f64,
    pub beta_star: f64,
}

/// Stationarity residual `beta v + log(lambda beta - 1) - log(lambda beta) - c`.
pub fn log_call_residual(beta: f64, v: f64, c: f64, lambda: f64) -> f64 {
    let s = lambda * beta;
    beta * v + (s - 1.0).ln() - s.ln() - c
}

/// Maximiser of `log(e^{beta v} - e^c) - 0.5 lambda beta^2 v` over `beta > 1/lambda`.
///
/// The residual is strictly increasing in `beta`, so the root is unique. Solved by
/// safeguarded Newton in `w = log(lambda beta - 1)`.
pub fn log_call_argmax(v: f64, c: f64, lambda: f64) -> Result<f64> {
    if !(v >= 0.0 && v.is_finite() && lambda > 0.0 && c.is_finite()) {
        return domain(format!("bad scalar problem v={v} c={c} lambda={lambda}"));
    }
    let g = |w: f64| (1.0 + w.exp()) * v / lambda + w - softplus(w) - c;
    let dg = |w: f64| w.exp() * v / lambda + 1.0 / (1.0 + w.exp());
    if lambda * BETA_MAX <= 1.0 {
        return Err(Error::Optim("penalty too small for the beta bracket".into()));
    }
    let (mut lo, mut hi) = (W_MIN, (lambda * BETA_MAX - 1.0).ln());
    if g(hi) < 0.0 {
        return Err(Error::Optim(format!(
            "payoff unreachable for beta <= {BETA_MAX} (c = {c}, v = {v})"
        )));
    }
    if g(lo) >= 0.0 {
        return Ok((1.0 + lo.exp()) / lambda);
    }
    let mut w = (c - v / lambda).clamp(lo, hi);
    if w > 0.0 && v > 0.0 {
        w = (lambda * c / v).max(1.0).ln().clamp(lo, hi);
    }
    for _ in 0..200 {
        let gw = g(w);
        if gw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        if gw.abs() <= 1e-14 * (1.0 + c.abs()) || hi - lo <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
        let step = w - gw / dg(w);
        w = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok((1.0 + w.exp()) / lambda)
}

fn log_call_of(spec: &PayoffSpec, p: &HestonParams) -> Result<LogCall> {
    spec.log_call(p).ok_or_else(|| {
        Error::Domain(format!(
            "payoff {} has no log-call form; use the variational solver",
            spec.kind
        ))
    })
}

/// Scalar reduction for a deterministic volatility path `sigma` on the knots.
pub fn bs_beta(
    spec: &PayoffSpec,
    p: &HestonParams,
    sigma: &[f64],
    grid: &TimeGrid,
) -> Result<BsReduction> {
    let lc = log_call_of(spec, p)?;
    let alpha = lc.weight.on_grid(grid);
    if sigma.len() != alpha.len() {
        return domain("sigma must be given on the grid knots");
    }
    let dt = grid.dt();
    let a2s2: Vec<f64> = alpha.iter().zip(sigma).map(|(a, s)| a * a * s * s).collect();
    let as2: Vec<f64> = alpha.iter().zip(sigma).map(|(a, s)| a * s * s).collect();
    let v_quad = trapezoid(&a2s2, dt);
    if !(v_quad > 0.0) {
        return domain("int (alpha sigma)^2 must be positive");
    }
    let c = lc.log_moneyness() + 0.5 * trapezoid(&as2, dt);
    let beta_star = log_call_argmax(v_quad, c, 1.0)?;
    Ok(BsReduction {
        v_quad,
        c,
        beta_star,
    })
}

/// Value of the scalar objective `F(-0.5 int alpha sigma^2 + beta v) - 0.5 beta^2 v`.
pub fn bs_objective(lc: &LogCall, red: &BsReduction, beta: f64) -> f64 {
    let shift = red.c - lc.log_moneyness();
    lc.f(-shift + beta * red.v_quad) - 0.5 * beta * beta * red.v_quad
}

/// Deterministic (`adaptive = false`) or adaptive drift from the BS reduction.
/// Deterministic: `hdot = beta alpha sigma (rho, rho_bar)`; adaptive divides by `sigma`.
pub fn bs_drift(
    spec: &PayoffSpec,
    p: &HestonParams,
    sigma: &[f64],
    grid: &TimeGrid,
    adaptive: bool,
) -> Result<DriftSchedule> {
    let red = bs_beta(spec, p, sigma, grid)?;
    let lc = log_call_of(spec, p)?;
    let alpha = lc.weight.on_grid(grid);
    let (rho, rb) = (p.rho, p.rho_bar());
    let scale: Vec<f64> = alpha
        .iter()
        .zip(sigma)
        .map(|(a, s)| red.beta_star * a * if adaptive { 1.0 } else { *s })
        .collect();
    let h1 = scale.iter().map(|s| s * rho).collect();
    let h2 = scale.iter().map(|s| s * rb).collect();
    let prov = format!("bs beta={:.6}", red.beta_star);
    Ok(if adaptive {
        DriftSchedule::adaptive(h1, h2, prov)
    } else {
        DriftSchedule::deterministic(h1, h2, prov)
    })
}

/// Per-step generator: at step `i` the BS problem on `[t_i, T]` is re-solved with
/// volatility frozen at `sqrt(V_i)` and the accumulated `y_i` carried into the
/// threshold. Remaining integrals use left sums on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FullyAdaptiveBs {
    log_moneyness: f64,
    alpha: Vec<f64>,
    /// `sum_{j >= i} alpha_j dt`
    s1: Vec<f64>,
    /// `sum_{j >= i} alpha_j^2 dt`
    s2: Vec<f64>,
    rho: f64,
    rho_bar: f64,
}

impl FullyAdaptiveBs {
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `beta_i` for state `(V_i, y_i)`.
    pub fn beta_at(&self, i: usize, v: f64, y: f64) -> Result<f64> {
        let c = self.log_moneyness - y + 0.5 * v * self.s1[i];
        log_call_argmax(v * self.s2[i], c, 1.0)
    }

    #[inline]
    pub fn shift(&self, i: usize, v: f64, y: f64) -> (f64, f64) {
        if !(v > 0.0) {
            return (0.0, 0.0);
        }
        match self.beta_at(i, v, y) {
            Ok(b) => {
                let m = b * self.alpha[i] * v.sqrt();
                (m * self.rho, m * self.rho_bar)
            }
            Err(_) => (0.0, 0.0),
        }
    }
}

pub fn bs_fully_adaptive(
    spec: &PayoffSpec,
    p: &HestonParams,
    grid: &TimeGrid,
) -> Result<DriftSchedule> {
    let lc = log_call_of(spec, p)?;
    let n = grid.n_steps;
    let dt = grid.dt();
    let alpha: Vec<f64> = (0..n).map(|i| lc.weight.alpha(grid.t(i), grid.t_end)).collect();
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    let (mut a1, mut a2) = (0.0, 0.0);
    for i in (0..n).rev() {
        a1 += alpha[i] * dt;
        a2 += alpha[i] * alpha[i] * dt;
        s1[i] = a1;
        s2[i] = a2;
    }
    let gen = FullyAdaptiveBs {
        log_moneyness: lc.log_moneyness(),
        alpha,
        s1,
        s2,
        rho: p.rho,
        rho_bar: p.rho_bar(),
    };
    Ok(DriftSchedule::per_step(gen, "bs per-step"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::psi_path;
    use crate::payoff::PayoffKind;

    #[test]
    fn root_known_case() {
        let c = 2.0 - 2f64.ln();
        let b = log_call_argmax(1.0, c, 1.0).unwrap();
        assert!((b - 2.0).abs() < 1e-12, "{b}");
    }

    #[test]
    fn root_residual_small() {
        for &(v, c, l) in &[(0.02, -0.01, 1.0), (0.3, 0.5, 1.0), (1.0 / 3.0, 0.1, 10.27), (0.05, -0.4, 1.0)] {
            let b = log_call_argmax(v, c, l).unwrap();
            assert!(log_call_residual(b, v, c, l).abs() <= 1e-10);
            // stationarity of the objective itself
            let obj = |b: f64| (b * v).exp().ln() + (1.0 - (c - b * v).exp()).ln() - 0.5 * l * b * b * v;
            let h = 1e-5 * b;
            assert!(obj(b) >= obj(b + h) && obj(b) >= obj(b - h));
        }
    }

    #[test]
    fn deep_itm_tends_to_one() {
        let b = log_call_argmax(0.02, -60.0, 1.0).unwrap();
        assert!(b >= 1.0 && b < 1.0 + 1e-12);
        let b = log_call_argmax(0.02, -800.0, 1.0).unwrap();
        assert!(b >= 1.0 && b < 1.0 + 1e-12);
    }

    #[test]
    fn unreachable_is_an_error() {
        assert!(matches!(log_call_argmax(1e-12, 50.0, 1.0), Err(Error::Optim(_))));
        assert!(matches!(log_call_argmax(0.0, 0.1, 1.0), Err(Error::Optim(_))));
        assert!(log_call_argmax(0.0, -0.1, 1.0).is_ok());
    }

    #[test]
    fn beta_increases_with_strike() {
        let p = HestonParams::reference();
        let g = TimeGrid::new(1.0, 252).unwrap();
        let sigma: Vec<f64> = psi_path(&p, &g).iter().map(|v| v.sqrt()).collect();
        let mut last = 0.0;
        for k in [40.0, 50.0, 60.0, 70.0] {
            let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, k).unwrap();
            let r = bs_beta(&spec, &p, &sigma, &g).unwrap();
            assert!(r.beta_star > last);
            last = r.beta_star;
        }
    }

    #[test]
    fn zero_correlation_puts_all_drift_on_second_channel() {
        let mut p = HestonParams::reference();
        p.rho = 0.0;
        let g = TimeGrid::new(1.0, 20).unwrap();
        let sigma = vec![0.25; 21];
        let spec = PayoffSpec::new(PayoffKind::EuropeanCall, 55.0).unwrap();
        let d = bs_drift(&spec, &p, &sigma, &g, false).unwrap();
        assert!(d.h1.iter().all(|&h| h == 0.0));
        assert!(d.h2.iter().all(|&h| h > 0.0));
    }

    #[test]
    fn rejects_non_log_call_payoffs() {
        let p = HestonParams::reference();
        let g = TimeGrid::new(1.0, 4).unwrap();
        let spec = PayoffSpec::new(PayoffKind::ArithmeticAsianCall, 50.0).unwrap();
        assert!(matches!(bs_beta(&spec, &p, &[0.2; 5], &g), Err(Error::Domain(_))));
        let spec = PayoffSpec::new(PayoffKind::EuropeanCall, 50.0).unwrap();
        assert!(bs_beta(&spec, &p, &[0.0; 5], &g).is_err());
    }

    #[test]
    fn per_step_generator_tends_to_delta_near_expiry() {
        let p = HestonParams::reference();
        let g = TimeGrid::new(1.0, 252).unwrap();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 30.0).unwrap();
        let d = bs_fully_adaptive(&spec, &p, &g).unwrap();
        let crate::measure::DriftMode::PerStepAdaptive(gen) = &d.mode else {
            panic!()
        };
        // deep in the money late on: beta -> F'(y) = A e^y / (A e^y - K)
        let lc = spec.log_call(&p).unwrap();
        let b = gen.beta_at(251, 0.04, 0.0).unwrap();
        assert!((b - lc.f_prime(0.0)).abs() < 1e-3, "{b}");
    }
}
