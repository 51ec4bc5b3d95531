//! Full-truncation Euler simulation of `(X, V)` under P or under a drifted measure.

use rayon::prelude::*;

use crate::measure::{step_log_inv_weight, step_log_weight, DriftSchedule};
use crate::model::{HestonParams, TimeGrid};
use crate::rng::{PathRng, RngSpec};

/// Paths stored row-major: path `k` occupies `x[k*(n+1)..(k+1)*(n+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub n_paths: usize,
    pub n_steps: usize,
    pub x: Vec<f64>,
    /// Truncated variance `V_i = max(V~_i, 0)`.
    pub v: Vec<f64>,
    /// Brownian increments under the sampling measure.
    pub dw: Vec<f64>,
    pub dw_perp: Vec<f64>,
    /// `log Z^{-1}` per path, zero under P.
    pub log_inv_weight: Vec<f64>,
}

pub struct PathView<'a> {
    pub x: &'a [f64],
    pub v: &'a [f64],
    pub dw: &'a [f64],
    pub dw_perp: &'a [f64],
}

impl PathBatch {
    pub fn path(&self, k: usize) -> PathView<'_> {
        let n = self.n_steps;
        PathView {
            x: &self.x[k * (n + 1)..(k + 1) * (n + 1)],
            v: &self.v[k * (n + 1)..(k + 1) * (n + 1)],
            dw: &self.dw[k * n..(k + 1) * n],
            dw_perp: &self.dw_perp[k * n..(k + 1) * n],
        }
    }
}

/// Which measure drives the path and which weight gets accumulated.
#[derive(Clone, Copy)]
pub enum Measure<'a> {
    /// Plain P simulation, weight 0.
    P,
    /// Simulate under Q, accumulate `log Z^{-1}`.
    Q(&'a DriftSchedule),
    /// Simulate under P, accumulate `log Z` for the given drift.
    PWithLikelihood(&'a DriftSchedule),
}

/// Path index to (stream, sign). Antithetic pairs share a stream.
#[inline]
fn stream_of(k: usize, antithetic: bool) -> (u64, f64) {
    if antithetic {
        ((k / 2) as u64, if k % 2 == 0 { 1.0 } else { -1.0 })
    } else {
        (k as u64, 1.0)
    }
}

/// Simulate one path into the given buffers and return the accumulated log weight.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_path(
    p: &HestonParams,
    grid: &TimeGrid,
    measure: Measure<'_>,
    rng: &mut PathRng,
    sign: f64,
    x: &mut [f64],
    v: &mut [f64],
    dw: &mut [f64],
    dwp: &mut [f64],
) -> f64 {
    let n = grid.n_steps;
    let dt = grid.dt();
    let sdt = dt.sqrt();
    let rb = p.rho_bar();
    let alpha = match measure {
        Measure::Q(d) | Measure::PWithLikelihood(d) => d.running_alpha(),
        Measure::P => None,
    };
    x[0] = 0.0;
    let mut vt = p.v0;
    let mut y = 0.0;
    let mut lw = 0.0;
    for i in 0..n {
        let vp = vt.max(0.0);
        v[i] = vp;
        let sv = vp.sqrt();
        let dwi = sign * rng.normal() * sdt;
        let dwpi = sign * rng.normal() * sdt;
        let (db, dbp) = match measure {
            Measure::P => (dwi, dwpi),
            Measure::Q(d) => {
                let (m1, m2) = d.shift(i, vp, y);
                lw += step_log_inv_weight(m1, m2, dwi, dwpi, dt);
                (dwi + m1 * dt, dwpi + m2 * dt)
            }
            Measure::PWithLikelihood(d) => {
                let (m1, m2) = d.shift(i, vp, y);
                lw += step_log_weight(m1, m2, dwi, dwpi, dt);
                (dwi, dwpi)
            }
        };
        vt += p.kappa * (p.theta - vp) * dt + p.xi * sv * db;
        x[i + 1] = x[i] - 0.5 * vp * dt + sv * (p.rho * db + rb * dbp);
        if let Some(a) = alpha {
            y += a[i] * (x[i + 1] - x[i]);
        }
        dw[i] = dwi;
        dwp[i] = dwpi;
    }
    v[n] = vt.max(0.0);
    lw
}

fn simulate(
    p: &HestonParams,
    grid: &TimeGrid,
    measure: Measure<'_>,
    n_paths: usize,
    rng: RngSpec,
    antithetic: bool,
) -> PathBatch {
    let n = grid.n_steps;
    let mut b = PathBatch {
        n_paths,
        n_steps: n,
        x: vec![0.0; n_paths * (n + 1)],
        v: vec![0.0; n_paths * (n + 1)],
        dw: vec![0.0; n_paths * n],
        dw_perp: vec![0.0; n_paths * n],
        log_inv_weight: vec![0.0; n_paths],
    };
    b.x.par_chunks_mut(n + 1)
        .zip(b.v.par_chunks_mut(n + 1))
        .zip(b.dw.par_chunks_mut(n))
        .zip(b.dw_perp.par_chunks_mut(n))
        .zip(b.log_inv_weight.par_iter_mut())
        .enumerate()
        .for_each(|(k, ((((x, v), dw), dwp), lw))| {
            let (stream, sign) = stream_of(k, antithetic);
            let mut r = PathRng::new(rng, stream);
            *lw = run_path(p, grid, measure, &mut r, sign, x, v, dw, dwp);
        });
    b
}

pub fn simulate_p(p: &HestonParams, grid: &TimeGrid, n_paths: usize, rng: RngSpec) -> PathBatch {
    simulate(p, grid, Measure::P, n_paths, rng, false)
}

pub fn simulate_q(
    p: &HestonParams,
    grid: &TimeGrid,
    drift: &DriftSchedule,
    n_paths: usize,
    rng: RngSpec,
) -> PathBatch {
    simulate(p, grid, Measure::Q(drift), n_paths, rng, false)
}

/// `2 n_pairs` paths under P; path `2k + 1` uses the negated normals of path `2k`.
pub fn antithetic_pairs(
    p: &HestonParams,
    grid: &TimeGrid,
    n_pairs: usize,
    rng: RngSpec,
) -> PathBatch {
    simulate(p, grid, Measure::P, 2 * n_pairs, rng, true)
}

/// Streaming variant used by the estimators: simulates each path into scratch
/// space and maps it through `f(x, v, log_weight)`. Output order follows the path
/// index, independent of the thread count.
pub fn map_paths<T, F>(
    p: &HestonParams,
    grid: &TimeGrid,
    measure: Measure<'_>,
    n_paths: usize,
    rng: RngSpec,
    antithetic: bool,
    f: F,
) -> Vec<T>
where
    T: Send,
    F: Fn(&[f64], &[f64], f64) -> T + Sync,
{
    let n = grid.n_steps;
    (0..n_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n], vec![0.0; n]),
            |(x, v, dw, dwp), k| {
                let (stream, sign) = stream_of(k, antithetic);
                let mut r = PathRng::new(rng, stream);
                let lw = run_path(p, grid, measure, &mut r, sign, x, v, dw, dwp);
                f(x, v, lw)
            },
        )
        .collect()
}
