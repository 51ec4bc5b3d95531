//! Girsanov drift schedules and likelihood-ratio weights.
//!
//! Under the sampling measure `dW = dW^Q + m_1 dt`, `dW_perp = dW_perp^Q + m_2 dt`,
//! and the estimator multiplies the payoff by
//! `Z^{-1} = exp(-sum m . dW^Q - 0.5 sum |m|^2 dt)`.

use crate::drift_bs::FullyAdaptiveBs;
use crate::model::{HestonParams, TimeGrid};
use crate::payoff::PayoffSpec;
use crate::sim::PathBatch;

#[derive(Debug, Clone, PartialEq)]
pub enum DriftMode {
    /// `m = hdot(t_i)`
    Deterministic,
    /// `m = hdot(t_i) sqrt(V_i)`
    Adaptive,
    /// Re-solved on every step from the current state.
    PerStepAdaptive(FullyAdaptiveBs),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSchedule {
    pub mode: DriftMode,
    /// Values on the grid knots; step `i` uses index `i`.
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub provenance: String,
}

impl DriftSchedule {
    pub fn zero(grid: &TimeGrid) -> Self {
        Self::deterministic(
            vec![0.0; grid.n_steps + 1],
            vec![0.0; grid.n_steps + 1],
            "zero",
        )
    }

    pub fn deterministic(h1: Vec<f64>, h2: Vec<f64>, provenance: impl Into<String>) -> Self {
        Self {
            mode: DriftMode::Deterministic,
            h1,
            h2,
            provenance: provenance.into(),
        }
    }

    pub fn adaptive(h1: Vec<f64>, h2: Vec<f64>, provenance: impl Into<String>) -> Self {
        Self {
            mode: DriftMode::Adaptive,
            h1,
            h2,
            provenance: provenance.into(),
        }
    }

    pub fn per_step(gen: FullyAdaptiveBs, provenance: impl Into<String>) -> Self {
        Self {
            mode: DriftMode::PerStepAdaptive(gen),
            h1: Vec::new(),
            h2: Vec::new(),
            provenance: provenance.into(),
        }
    }

    /// Girsanov shift at step `i` given the truncated variance `v` and the running
    /// weighted log-price `y = sum_{j<i} alpha_j dX_j`.
    #[inline]
    pub fn shift(&self, i: usize, v: f64, y: f64) -> (f64, f64) {
        match &self.mode {
            DriftMode::Deterministic => (self.h1[i], self.h2[i]),
            DriftMode::Adaptive => {
                let s = v.sqrt();
                (self.h1[i] * s, self.h2[i] * s)
            }
            DriftMode::PerStepAdaptive(g) => g.shift(i, v, y),
        }
    }

    /// Time weights whose running sum the shift depends on, if any.
    pub fn running_alpha(&self) -> Option<&[f64]> {
        match &self.mode {
            DriftMode::PerStepAdaptive(g) => Some(g.alpha()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        !matches!(self.mode, DriftMode::PerStepAdaptive(_))
            && self.h1.iter().chain(&self.h2).all(|&h| h == 0.0)
    }

    /// `int |hdot|^2 dt` by the left rule (deterministic schedules only).
    pub fn energy(&self, grid: &TimeGrid) -> f64 {
        let dt = grid.dt();
        (0..grid.n_steps.min(self.h1.len()))
            .map(|i| (self.h1[i] * self.h1[i] + self.h2[i] * self.h2[i]) * dt)
            .sum()
    }
}

/// Contribution of one step to `log Z^{-1}` from Q-increments.
#[inline]
pub(crate) fn step_log_inv_weight(m1: f64, m2: f64, dw: f64, dwp: f64, dt: f64) -> f64 {
    -(m1 * dw + m2 * dwp) - 0.5 * (m1 * m1 + m2 * m2) * dt
}

/// Contribution of one step to `log Z` from P-increments.
#[inline]
pub(crate) fn step_log_weight(m1: f64, m2: f64, dw: f64, dwp: f64, dt: f64) -> f64 {
    (m1 * dw + m2 * dwp) - 0.5 * (m1 * m1 + m2 * m2) * dt
}

/// Recompute `log Z^{-1}` for every path from the retained Q-increments.
pub fn log_inverse_weight(batch: &PathBatch, drift: &DriftSchedule, grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_steps;
    let dt = grid.dt();
    (0..batch.n_paths)
        .map(|k| {
            let path = batch.path(k);
            let mut lw = 0.0;
            let mut y = 0.0;
            for i in 0..n {
                let (m1, m2) = drift.shift(i, path.v[i], y);
                lw += step_log_inv_weight(m1, m2, path.dw[i], path.dw_perp[i], dt);
                if let Some(a) = drift.running_alpha() {
                    y += a[i] * (path.x[i + 1] - path.x[i]);
                }
            }
            lw
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSample {
    pub payoff: f64,
    pub log_inv_weight: f64,
}

impl WeightedSample {
    /// `G Z^{-1}`; a zero payoff contributes zero whatever the weight.
    #[inline]
    pub fn value(&self) -> f64 {
        if self.payoff == 0.0 {
            0.0
        } else {
            self.payoff * self.log_inv_weight.exp()
        }
    }
}

pub fn reweighted_payoffs(
    batch: &PathBatch,
    spec: &PayoffSpec,
    params: &HestonParams,
    grid: &TimeGrid,
) -> Vec<WeightedSample> {
    (0..batch.n_paths)
        .map(|k| {
            let path = batch.path(k);
            WeightedSample {
                payoff: spec.eval(params, grid, path.x, path.v),
                log_inv_weight: batch.log_inv_weight[k],
            }
        })
        .collect()
}
