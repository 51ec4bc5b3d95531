//! Derivative-free maximisation (Nelder-Mead with dimension-adapted coefficients
//! and restarts from the incumbent).

#[derive(Debug, Clone, Copy)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this.
    pub ftol: f64,
    /// and the simplex fits in a box of this half-width.
    pub xtol: f64,
    pub initial_step: f64,
    /// Number of restarts from the best point with a shrunken simplex.
    pub restarts: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            ftol: 1e-12,
            xtol: 1e-9,
            initial_step: 0.5,
            restarts: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn run_once(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    opts: &NmOptions,
    budget: usize,
) -> NmResult {
    let n = x0.len();
    let nf = n as f64;
    let (ca, cg, cr, cs) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    // minimise h = -f; non-finite values are treated as +inf
    let mut evals = 0usize;
    let mut h = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| h(p, &mut evals)).collect();
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let spread = vals[n] - vals[0];
        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread.abs() <= opts.ftol && size <= opts.xtol {
            converged = true;
            break;
        }
        if vals[0].is_finite() && size <= 1e-15 {
            converged = true;
            break;
        }
        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / nf;
            }
        }
        for j in 0..n {
            trial[j] = centroid[j] + ca * (centroid[j] - pts[n][j]);
        }
        let fr = h(&trial, &mut evals);
        if fr < vals[0] {
            for j in 0..n {
                trial2[j] = centroid[j] + cg * (trial[j] - centroid[j]);
            }
            let fe = h(&trial2, &mut evals);
            if fe < fr {
                pts[n].copy_from_slice(&trial2);
                vals[n] = fe;
            } else {
                pts[n].copy_from_slice(&trial);
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n].copy_from_slice(&trial);
            vals[n] = fr;
            continue;
        }
        let outside = fr < vals[n];
        for j in 0..n {
            trial2[j] = if outside {
                centroid[j] + cr * (trial[j] - centroid[j])
            } else {
                centroid[j] + cr * (pts[n][j] - centroid[j])
            };
        }
        let fc = h(&trial2, &mut evals);
        if (outside && fc <= fr) || (!outside && fc < vals[n]) {
            pts[n].copy_from_slice(&trial2);
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            for j in 0..n {
                pts[i][j] = pts[0][j] + cs * (pts[i][j] - pts[0][j]);
            }
            vals[i] = h(&pts[i], &mut evals);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
        .unwrap();
    NmResult {
        x: pts[best].clone(),
        value: -vals[best],
        evals,
        converged,
    }
}

/// Maximise `f` from `x0`. The returned value is never below `f(x0)`.
pub fn nelder_mead_max(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], opts: &NmOptions) -> NmResult {
    let mut best = run_once(&mut f, x0, opts.initial_step, opts, opts.max_evals);
    let mut evals = best.evals;
    let mut step = opts.initial_step;
    for _ in 0..opts.restarts {
        if evals >= opts.max_evals {
            break;
        }
        step *= 0.1;
        let step = step.max(10.0 * opts.xtol);
        let next = run_once(&mut f, &best.x, step, opts, opts.max_evals - evals);
        evals += next.evals;
        let gain = next.value - best.value;
        if next.value >= best.value {
            best = NmResult { evals, ..next };
        }
        if !(gain > opts.ftol) {
            break;
        }
    }
    best.evals = evals;
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_2d() {
        let f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = nelder_mead_max(f, &[-1.2, 1.0], &NmOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn concave_quadratic_in_20_dims() {
        let n = 20;
        let f = |x: &[f64]| -> f64 {
            -x.iter()
                .enumerate()
                .map(|(i, v)| (1.0 + i as f64 / 4.0) * (v - 0.1 * i as f64).powi(2))
                .sum::<f64>()
        };
        let opts = NmOptions {
            max_evals: 100_000,
            ..Default::default()
        };
        let r = nelder_mead_max(f, &vec![0.0; n], &opts);
        assert!(r.value > -1e-9, "{} after {}", r.value, r.evals);
    }

    #[test]
    fn handles_infeasible_regions() {
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                x[0].ln() - x[0]
            }
        };
        let r = nelder_mead_max(f, &[0.3], &NmOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| -(x[0] - 3.0).abs().sqrt();
        let r = nelder_mead_max(f, &[3.0], &NmOptions::default());
        assert_eq!(r.value, 0.0);
    }
}
