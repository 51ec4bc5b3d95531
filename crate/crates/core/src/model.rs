//! Heston parameters, time grid and the deterministic variance skeleton.
//!
//! The log-price starts at zero and the traded price is `s0 * exp(r t + X_t)`.

use crate::error::{domain, Result};
use crate::numeric::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub kappa: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub v0: f64,
    pub s0: f64,
    pub r: f64,
    pub t_end: f64,
}

impl HestonParams {
    /// Reference parameter set used throughout the numerical tables.
    pub fn reference() -> Self {
        Self {
            kappa: 2.0,
            theta: 0.09,
            xi: 0.2,
            rho: -0.5,
            v0: 0.04,
            s0: 50.0,
            r: 0.05,
            t_end: 1.0,
        }
    }

    /// Degenerate parameter set with constant variance `sigma^2`.
    ///
    /// Mean reversion and vol-of-vol are zero, so the variance never moves and the
    /// log-price is driven by the second Brownian channel only. This set does not
    /// pass [`HestonParams::validate`].
    pub fn black_scholes(sigma: f64, s0: f64, r: f64, t_end: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        if !(s0 > 0.0 && t_end > 0.0 && r.is_finite()) {
            return domain("s0 and t_end must be positive, r finite");
        }
        Ok(Self {
            kappa: 0.0,
            theta: sigma * sigma,
            xi: 0.0,
            rho: 0.0,
            v0: sigma * sigma,
            s0,
            r,
            t_end,
        })
    }

    pub fn is_constant_variance(&self) -> bool {
        self.kappa == 0.0 && self.xi == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("theta", self.theta),
            ("xi", self.xi),
            ("v0", self.v0),
            ("s0", self.s0),
            ("t_end", self.t_end),
        ];
        for (name, val) in positive {
            if !(val > 0.0 && val.is_finite()) {
                return domain(format!("{name} must be positive and finite, got {val}"));
            }
        }
        if !(self.rho.abs() < 1.0) {
            return domain(format!("rho must lie in (-1, 1), got {}", self.rho));
        }
        if !self.r.is_finite() {
            return domain("r must be finite");
        }
        Ok(())
    }

    /// Feller condition `2 kappa theta >= xi^2`. Violation is allowed.
    pub fn feller(&self) -> bool {
        2.0 * self.kappa * self.theta >= self.xi * self.xi
    }

    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }
}

/// Drift and diffusion of the variance, `dV = f(V) dt + g(V) dW`.
pub trait SvCoefficients {
    fn f(&self, v: f64) -> f64;
    fn f_prime(&self, v: f64) -> f64;
    fn g(&self, v: f64) -> f64;
}

impl SvCoefficients for HestonParams {
    #[inline]
    fn f(&self, v: f64) -> f64 {
        self.kappa * (self.theta - v)
    }
    #[inline]
    fn f_prime(&self, _v: f64) -> f64 {
        -self.kappa
    }
    #[inline]
    fn g(&self, v: f64) -> f64 {
        self.xi * v.max(0.0).sqrt()
    }
}

/// Uniform grid `t_i = i T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return domain(format!("t_end must be positive, got {t_end}"));
        }
        if n_steps == 0 {
            return domain("n_steps must be at least 1");
        }
        Ok(Self { t_end, n_steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.t_end * i as f64 / self.n_steps as f64
    }

    pub fn knots(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.t(i)).collect()
    }
}

/// `psi_t = theta + (v0 - theta) exp(-kappa t)`.
pub fn psi_closed_form(p: &HestonParams, t: f64) -> f64 {
    p.theta + (p.v0 - p.theta) * (-p.kappa * t).exp()
}

/// Closed-form variance skeleton on the grid knots.
pub fn psi_path(p: &HestonParams, grid: &TimeGrid) -> Vec<f64> {
    (0..=grid.n_steps)
        .map(|i| psi_closed_form(p, grid.t(i)))
        .collect()
}

/// RK4 solution of `psi' = f(psi)` with `substeps` steps per grid cell.
pub fn psi_rk4(c: &impl SvCoefficients, v0: f64, grid: &TimeGrid, substeps: usize) -> Vec<f64> {
    let h = grid.dt() / substeps.max(1) as f64;
    let mut out = Vec::with_capacity(grid.n_steps + 1);
    let mut y = v0;
    out.push(y);
    for i in 0..grid.n_steps {
        for k in 0..substeps.max(1) {
            let t = grid.t(i) + k as f64 * h;
            y = rk4_step(|_, y| c.f(y), t, y, h);
        }
        out.push(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_validates_and_meets_feller() {
        let p = HestonParams::reference();
        p.validate().unwrap();
        assert!(p.feller());
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut p = HestonParams::reference();
        p.rho = 1.0;
        assert!(p.validate().is_err());
        let mut p = HestonParams::reference();
        p.kappa = 0.0;
        assert!(p.validate().is_err());
        let mut p = HestonParams::reference();
        p.v0 = -0.1;
        assert!(p.validate().is_err());
        let mut p = HestonParams::reference();
        p.xi = 1.0;
        p.validate().unwrap();
        assert!(!p.feller());
        assert!(HestonParams::black_scholes(0.25, 50.0, 0.05, 1.0)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn psi_at_maturity() {
        let p = HestonParams::reference();
        let v = psi_closed_form(&p, 1.0);
        assert!((v - 0.0832332).abs() < 5e-8);
    }

    #[test]
    fn psi_rk4_matches_closed_form() {
        let p = HestonParams::reference();
        let g = TimeGrid::new(1.0, 252).unwrap();
        let a = psi_rk4(&p, p.v0, &g, 4);
        let b = psi_path(&p, &g);
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn psi_stationary_when_started_at_theta() {
        let mut p = HestonParams::reference();
        p.v0 = p.theta;
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(psi_path(&p, &g).iter().all(|&v| v == p.theta));
    }

    #[test]
    fn grid_basics() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(g.knots(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }
}
