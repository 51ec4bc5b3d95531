//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::fmt;
use std::str::FromStr;

use crate::bench::{DriftPolicy, EstimatorKind, RunOptions};
use crate::error::{Error, Result};
use crate::model::{HestonParams, TimeGrid};
use crate::payoff::PayoffKind;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: HestonParams,
    /// Constant volatility; when set the model degenerates to Black-Scholes.
    pub bs_sigma: Option<f64>,
    pub payoff: PayoffKind,
    pub strikes: Vec<f64>,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub kinds: Vec<EstimatorKind>,
    pub out: Option<String>,
    pub timing: bool,
    pub oracle_check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: HestonParams::reference(),
            bs_sigma: None,
            payoff: PayoffKind::GeometricAsianCall,
            strikes: vec![50.0],
            n_steps: 252,
            n_paths: 100_000,
            seed: 1,
            kinds: vec![EstimatorKind::Classic],
            out: None,
            timing: false,
            oracle_check: true,
        }
    }
}

const TABLE3_KINDS: &str = "Classic,Antithetic,BS,BS_A,BS_A2,LDPsn,LDPsn_A,LDPst,LDPst_A,MDPsnLog,MDPsnLog_A,MDPsn,MDPsn_A,MDPst,MDPst_A,MDPlt";

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{x}'")))
        })
        .collect()
}

fn parse_scalar<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{}'", s.trim())))
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        o => Err(Error::Config(format!("{key}: expected a boolean, got '{o}'"))),
    }
}

impl RunConfig {
    /// Named preset: `table3`, `appendixC` or `varswap`.
    pub fn preset(name: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        match name.to_ascii_lowercase().as_str() {
            "table3" => {
                c.strikes = (0..12).map(|i| 30.0 + 5.0 * i as f64).collect();
                c.kinds = parse_list("kinds", TABLE3_KINDS)?;
            }
            "appendixc" => {
                c.set("bs_sigma", "0.25")?;
                c.payoff = PayoffKind::ArithmeticAsianCall;
                c.strikes = vec![30.0, 35.0, 40.0, 45.0, 50.0, 60.0, 70.0, 80.0];
                c.kinds = parse_list("kinds", "Classic,Antithetic,ControlGeometric,LDPsn")?;
            }
            "varswap" => {
                c.payoff = PayoffKind::VolIndicatorSwap;
                c.strikes = vec![10.0, 20.0, 30.0, 40.0, 45.0, 50.0, 55.0, 60.0, 70.0, 80.0, 90.0, 100.0];
                c.kinds = parse_list("kinds", "Classic,LDPsn,LDPsn_A,MDPsn,MDPsn_A,BS,BS_A,Antithetic")?;
            }
            o => return Err(Error::Config(format!("unknown preset '{o}'"))),
        }
        Ok(c)
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.params;
        match key {
            "kappa" => p.kappa = parse_scalar(key, value)?,
            "theta" => p.theta = parse_scalar(key, value)?,
            "xi" => p.xi = parse_scalar(key, value)?,
            "rho" => p.rho = parse_scalar(key, value)?,
            "v0" => p.v0 = parse_scalar(key, value)?,
            "s0" => p.s0 = parse_scalar(key, value)?,
            "r" => p.r = parse_scalar(key, value)?,
            "t_end" => p.t_end = parse_scalar(key, value)?,
            "bs_sigma" => {
                self.bs_sigma = match value.trim() {
                    "" | "none" => None,
                    v => Some(parse_scalar(key, v)?),
                }
            }
            "payoff" => self.payoff = parse_scalar(key, value)?,
            "strikes" | "strike" => self.strikes = parse_list(key, value)?,
            "steps" => self.n_steps = parse_scalar(key, value)?,
            "paths" => self.n_paths = parse_scalar(key, value)?,
            "seed" => self.seed = parse_scalar(key, value)?,
            "kinds" | "kind" => self.kinds = parse_list(key, value)?,
            "out" => {
                self.out = match value.trim() {
                    "" | "-" => None,
                    v => Some(v.to_string()),
                }
            }
            "timing" => self.timing = parse_bool(key, value)?,
            "oracle_check" => self.oracle_check = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Parse on top of the defaults and validate.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Apply the assignments in `text` without validating.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, e.message())))?;
        }
        Ok(())
    }

    /// Model actually simulated (constant variance when `bs_sigma` is set).
    pub fn model(&self) -> Result<HestonParams> {
        match self.bs_sigma {
            Some(s) => HestonParams::black_scholes(s, self.params.s0, self.params.r, self.params.t_end),
            None => Ok(self.params),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.params.t_end, self.n_steps)
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            policy: DriftPolicy {
                oracle_check: self.oracle_check,
                ..Default::default()
            },
            timing: self.timing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = |e: Error| Error::Config(e.message().to_string());
        self.params.validate().map_err(named)?;
        self.model().map_err(named)?;
        self.grid().map_err(|e| Error::Config(format!("steps: {}", e.message())))?;
        if self.strikes.is_empty() {
            return Err(Error::Config("strikes: at least one strike is required".into()));
        }
        if let Some(k) = self.strikes.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::Config(format!("strikes: {k} is not a positive number")));
        }
        if self.n_paths < 2 {
            return Err(Error::Config("paths: need at least 2".into()));
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        writeln!(f, "kappa = {:?}", p.kappa)?;
        writeln!(f, "theta = {:?}", p.theta)?;
        writeln!(f, "xi = {:?}", p.xi)?;
        writeln!(f, "rho = {:?}", p.rho)?;
        writeln!(f, "v0 = {:?}", p.v0)?;
        writeln!(f, "s0 = {:?}", p.s0)?;
        writeln!(f, "r = {:?}", p.r)?;
        writeln!(f, "t_end = {:?}", p.t_end)?;
        match self.bs_sigma {
            Some(s) => writeln!(f, "bs_sigma = {s:?}")?,
            None => writeln!(f, "bs_sigma = none")?,
        }
        writeln!(f, "payoff = {}", self.payoff)?;
        writeln!(f, "strikes = {}", list(&self.strikes))?;
        writeln!(f, "steps = {}", self.n_steps)?;
        writeln!(f, "paths = {}", self.n_paths)?;
        writeln!(f, "seed = {}", self.seed)?;
        let kinds: Vec<_> = self.kinds.iter().map(|k| k.name()).collect();
        writeln!(f, "kinds = {}", kinds.join(","))?;
        writeln!(f, "out = {}", self.out.as_deref().unwrap_or("-"))?;
        writeln!(f, "timing = {}", self.timing)?;
        writeln!(f, "oracle_check = {}", self.oracle_check)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_parse_from_empty() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let e = RunConfig::parse("seed = 3\nrho = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("rho"), "{e}");
        let e = RunConfig::parse("\n\nbogus = 1").unwrap_err().to_string();
        assert!(e.contains("line 3") && e.contains("bogus"), "{e}");
        let e = RunConfig::parse("paths 10").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn presets_parse() {
        assert_eq!(RunConfig::preset("table3").unwrap().strikes.len(), 12);
        let c = RunConfig::preset("appendixC").unwrap();
        assert!(c.model().unwrap().is_constant_variance());
        assert!(RunConfig::preset("nope").is_err());
        for name in ["table3", "appendixC", "varswap"] {
            let c = RunConfig::preset(name).unwrap();
            assert_eq!(RunConfig::parse(&c.to_string()).unwrap(), c);
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            kappa in 0.1f64..5.0,
            rho in -0.99f64..0.99,
            seed in any::<u64>(),
            paths in 2usize..1_000_000,
            strikes in proptest::collection::vec(1.0f64..200.0, 1..6),
            kinds in proptest::collection::vec(0usize..17, 0..5),
            sigma in proptest::option::of(0.01f64..1.0),
        ) {
            let mut c = RunConfig::default();
            c.params.kappa = kappa;
            c.params.rho = rho;
            c.seed = seed;
            c.n_paths = paths;
            c.strikes = strikes;
            c.kinds = kinds.into_iter().map(|i| EstimatorKind::ALL[i]).collect();
            c.bs_sigma = sigma;
            let back = RunConfig::parse(&c.to_string()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
