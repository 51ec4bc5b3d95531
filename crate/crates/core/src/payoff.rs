//! Path payoffs on a simulated grid.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::model::{HestonParams, TimeGrid};

/// Time weight `alpha_t` applied to log-price increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightPath {
    /// `alpha_t = (T - t) / T`
    Asian,
    /// `alpha_t = 1`
    European,
}

impl WeightPath {
    #[inline]
    pub fn alpha(&self, t: f64, t_end: f64) -> f64 {
        match self {
            WeightPath::Asian => (t_end - t) / t_end,
            WeightPath::European => 1.0,
        }
    }

    #[inline]
    pub fn alpha_dot(&self, t_end: f64) -> f64 {
        match self {
            WeightPath::Asian => -1.0 / t_end,
            WeightPath::European => 0.0,
        }
    }

    /// `int_0^T alpha_t dt`
    pub fn integral(&self, t_end: f64) -> f64 {
        match self {
            WeightPath::Asian => 0.5 * t_end,
            WeightPath::European => t_end,
        }
    }

    pub fn on_grid(&self, grid: &TimeGrid) -> Vec<f64> {
        (0..=grid.n_steps)
            .map(|i| self.alpha(grid.t(i), grid.t_end))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    EuropeanCall,
    GeometricAsianCall,
    ArithmeticAsianCall,
    /// `sum_i V_i 1{S_i >= K} dt`
    VolIndicatorSwap,
}

impl PayoffKind {
    pub fn name(&self) -> &'static str {
        match self {
            PayoffKind::EuropeanCall => "european",
            PayoffKind::GeometricAsianCall => "geometric_asian",
            PayoffKind::ArithmeticAsianCall => "arithmetic_asian",
            PayoffKind::VolIndicatorSwap => "vol_indicator",
        }
    }
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PayoffKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "european" => Ok(PayoffKind::EuropeanCall),
            "geometric_asian" => Ok(PayoffKind::GeometricAsianCall),
            "arithmetic_asian" => Ok(PayoffKind::ArithmeticAsianCall),
            "vol_indicator" => Ok(PayoffKind::VolIndicatorSwap),
            other => Err(Error::Config(format!("unknown payoff '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    pub strike: f64,
}

/// `G = (A exp(y) - K)^+` with `y = int alpha dX`; the drift pipelines work with
/// `F(y) = log(A e^y - K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCall {
    pub prefactor: f64,
    pub strike: f64,
    pub weight: WeightPath,
    pub t_end: f64,
}

impl LogCall {
    #[inline]
    pub fn f(&self, y: f64) -> f64 {
        let g = self.prefactor * y.exp() - self.strike;
        if g > 0.0 {
            g.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    #[inline]
    pub fn f_prime(&self, y: f64) -> f64 {
        let a = self.prefactor * y.exp();
        a / (a - self.strike)
    }

    /// `log K - log A`
    pub fn log_moneyness(&self) -> f64 {
        (self.strike / self.prefactor).ln()
    }
}

impl PayoffSpec {
    pub fn new(kind: PayoffKind, strike: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return domain(format!("strike must be positive, got {strike}"));
        }
        Ok(Self { kind, strike })
    }

    pub fn weight(&self) -> Option<WeightPath> {
        match self.kind {
            PayoffKind::EuropeanCall => Some(WeightPath::European),
            PayoffKind::GeometricAsianCall => Some(WeightPath::Asian),
            _ => None,
        }
    }

    /// Log-call representation, `None` for payoffs that are not of the form
    /// `(A exp(int alpha dX) - K)^+`.
    pub fn log_call(&self, p: &HestonParams) -> Option<LogCall> {
        self.weight().map(|w| LogCall {
            prefactor: p.s0 * (p.r * w.integral(p.t_end)).exp(),
            strike: self.strike,
            weight: w,
            t_end: p.t_end,
        })
    }

    /// Payoff of one path. `x` and `v` hold the log-price and the (truncated)
    /// variance on the `n + 1` knots.
    pub fn eval(&self, p: &HestonParams, grid: &TimeGrid, x: &[f64], v: &[f64]) -> f64 {
        let n = grid.n_steps;
        debug_assert!(x.len() == n + 1 && v.len() == n + 1);
        match self.kind {
            PayoffKind::EuropeanCall | PayoffKind::GeometricAsianCall => {
                let w = self.weight().unwrap();
                let mut y = 0.0;
                for i in 0..n {
                    y += w.alpha(grid.t(i), grid.t_end) * (x[i + 1] - x[i]);
                }
                let a = p.s0 * (p.r * w.integral(grid.t_end)).exp();
                (a * y.exp() - self.strike).max(0.0)
            }
            PayoffKind::ArithmeticAsianCall => {
                let mut s = 0.0;
                for j in 1..=n {
                    s += (p.r * grid.t(j) + x[j]).exp();
                }
                (p.s0 * s / n as f64 - self.strike).max(0.0)
            }
            PayoffKind::VolIndicatorSwap => {
                let dt = grid.dt();
                let mut s = 0.0;
                for i in 0..n {
                    if p.s0 * (p.r * grid.t(i) + x[i]).exp() >= self.strike {
                        s += v[i] * dt;
                    }
                }
                s
            }
        }
    }
}

/// Log of the discrete geometric average used by the Asian payoff,
/// `log s0 + rT/2 + (1/n) sum_{j=1..n} X_j`.
pub fn geometric_log_average(p: &HestonParams, grid: &TimeGrid, x: &[f64]) -> f64 {
    let n = grid.n_steps;
    p.s0.ln() + 0.5 * p.r * grid.t_end + x[1..=n].iter().sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (HestonParams, TimeGrid) {
        (HestonParams::reference(), TimeGrid::new(1.0, 4).unwrap())
    }

    #[test]
    fn european_uses_terminal_value() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::EuropeanCall, 50.0).unwrap();
        let x = [0.0, 0.1, -0.2, 0.05, 0.1];
        let v = [0.04; 5];
        let want = 50.0 * (0.05f64 + 0.1).exp() - 50.0;
        assert!((spec.eval(&p, &g, &x, &v) - want).abs() < 1e-12);
    }

    #[test]
    fn geometric_matches_average_of_logs() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, 40.0).unwrap();
        let x = [0.0, 0.1, -0.2, 0.05, 0.1];
        let v = [0.04; 5];
        let want = geometric_log_average(&p, &g, &x).exp() - 40.0;
        assert!((spec.eval(&p, &g, &x, &v) - want).abs() < 1e-12);
    }

    #[test]
    fn flat_path_zero_rate_asian() {
        let mut p = HestonParams::reference();
        p.r = 0.0;
        let g = TimeGrid::new(1.0, 8).unwrap();
        let x = [0.0; 9];
        let v = [0.04; 9];
        let geo = PayoffSpec::new(PayoffKind::GeometricAsianCall, 45.0).unwrap();
        let ari = PayoffSpec::new(PayoffKind::ArithmeticAsianCall, 45.0).unwrap();
        assert!((geo.eval(&p, &g, &x, &v) - 5.0).abs() < 1e-12);
        assert!((ari.eval(&p, &g, &x, &v) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn vol_indicator_left_endpoints() {
        let (p, g) = setup();
        let spec = PayoffSpec::new(PayoffKind::VolIndicatorSwap, 50.0).unwrap();
        // S_0 = 50 counts, the dip at t_2 does not
        let x = [0.0, 0.1, -0.5, 0.05, -9.0];
        let v = [0.04, 0.05, 0.06, 0.07, 0.08];
        let want = 0.25 * (0.04 + 0.05 + 0.07);
        assert!((spec.eval(&p, &g, &x, &v) - want).abs() < 1e-15);
    }

    #[test]
    fn log_call_prefactor_and_derivative() {
        let (p, _) = setup();
        let lc = PayoffSpec::new(PayoffKind::GeometricAsianCall, 50.0)
            .unwrap()
            .log_call(&p)
            .unwrap();
        assert!((lc.prefactor - 50.0 * 0.025f64.exp()).abs() < 1e-12);
        let h = 1e-6;
        let fd = (lc.f(0.1 + h) - lc.f(0.1 - h)) / (2.0 * h);
        assert!((fd - lc.f_prime(0.1)).abs() < 1e-6);
        assert_eq!(lc.f(-1.0), f64::NEG_INFINITY);
        assert!(PayoffSpec::new(PayoffKind::VolIndicatorSwap, 10.0)
            .unwrap()
            .log_call(&p)
            .is_none());
    }

    #[test]
    fn strike_must_be_positive() {
        assert!(PayoffSpec::new(PayoffKind::EuropeanCall, 0.0).is_err());
        assert!("nope".parse::<PayoffKind>().is_err());
        for k in [
            PayoffKind::EuropeanCall,
            PayoffKind::GeometricAsianCall,
            PayoffKind::ArithmeticAsianCall,
            PayoffKind::VolIndicatorSwap,
        ] {
            assert_eq!(k.name().parse::<PayoffKind>().unwrap(), k);
        }
    }
}
