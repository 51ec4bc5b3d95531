//! Direct solver for discretised variational problems
//! `sup_x log G(skeleton(x)) - 0.5 s int |xdot|^2`.
//!
//! Controls live on the grid knots, the skeleton ODEs are integrated with Heun's
//! method and every time integral uses the trapezoid rule. The closed-form
//! pipelines can be scored in exactly the same functional via
//! [`VariationalProblem::objective_controls`].

use crate::error::{domain, Error, Result};
use crate::model::{psi_path, HestonParams, SvCoefficients, TimeGrid};
use crate::numeric::{cumulative_trapezoid, trapezoid};
use crate::optim::{nelder_mead_max, NmOptions};
use crate::payoff::{PayoffKind, PayoffSpec};

/// Deterministic skeleton dynamics driven by the controls.
#[derive(Debug, Clone, PartialEq)]
pub enum Skeleton {
    /// `psi' = f(psi) + g(psi) x1'`, `phi' = -psi/2 + sqrt(psi)(rho x1' + rho_bar x2')`
    LdpSmallNoise,
    /// `psi' = g(psi) x1'`, `phi' = sqrt(psi)(rho x1' + rho_bar x2')`
    LdpSmallTime,
    /// `psi` frozen on its mean path, `eta' = f'(psi) eta + g(psi) x1'`,
    /// `phi' = -(psi + eta)/2 + sqrt(psi)(rho x1' + rho_bar x2')`, variance `psi + eta`
    MdpLog,
    /// As [`Skeleton::MdpLog`] without `eta` in the log-price.
    MdpPrice,
    /// [`Skeleton::MdpPrice`] with `psi = v0` and `f = 0`.
    MdpSmallTime,
    /// One channel, `phi' = -sigma^2/2 + sigma x'`.
    BlackScholes { sigma: Vec<f64> },
    /// One channel on the log-price rate, `phi' = -theta/2 + x'`, penalty
    /// `(nu/4) int x'^2`.
    LargeTime { nu: f64 },
}

impl Skeleton {
    pub fn channels(&self) -> usize {
        match self {
            Skeleton::BlackScholes { .. } | Skeleton::LargeTime { .. } => 1,
            _ => 2,
        }
    }

    fn penalty_scale(&self) -> f64 {
        match self {
            Skeleton::LargeTime { nu } => 0.5 * nu,
            _ => 1.0,
        }
    }
}

/// Control basis; coefficients are stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    /// `funcs[channel][j]` sampled on the knots.
    pub funcs: Vec<Vec<Vec<f64>>>,
}

impl Basis {
    /// Piecewise-linear hats on `intervals + 1` equispaced nodes, per channel.
    pub fn hat(grid: &TimeGrid, channels: usize, intervals: usize) -> Result<Self> {
        if intervals == 0 || intervals > 64 {
            return domain("hat basis needs 1..=64 intervals");
        }
        let h = grid.t_end / intervals as f64;
        let one: Vec<Vec<f64>> = (0..=intervals)
            .map(|j| {
                let c = j as f64 * h;
                (0..=grid.n_steps)
                    .map(|i| (1.0 - (grid.t(i) - c).abs() / h).max(0.0))
                    .collect()
            })
            .collect();
        Ok(Self {
            funcs: vec![one; channels],
        })
    }

    /// Hats plus the same extra atoms appended to every channel.
    pub fn hat_with_atoms(
        grid: &TimeGrid,
        channels: usize,
        intervals: usize,
        atoms: &[Vec<f64>],
    ) -> Result<Self> {
        let mut b = Self::hat(grid, channels, intervals)?;
        for ch in &mut b.funcs {
            ch.extend(atoms.iter().cloned());
        }
        Ok(b)
    }

    pub fn atoms(per_channel: Vec<Vec<Vec<f64>>>) -> Self {
        Self { funcs: per_channel }
    }

    pub fn dim(&self) -> usize {
        self.funcs.iter().map(|c| c.len()).sum()
    }

    pub fn expand(&self, coeffs: &[f64]) -> Vec<Vec<f64>> {
        let mut k = 0;
        self.funcs
            .iter()
            .map(|fs| {
                let len = fs[0].len();
                let mut out = vec![0.0; len];
                for f in fs {
                    let c = coeffs[k];
                    k += 1;
                    if c != 0.0 {
                        for (o, b) in out.iter_mut().zip(f) {
                            *o += c * b;
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// Hat coefficients on `m` intervals mapped onto `2m` intervals (same function).
pub fn refine_hat_coeffs(coeffs: &[f64], channels: usize) -> Vec<f64> {
    let per = coeffs.len() / channels;
    let mut out = Vec::with_capacity(channels * (2 * per - 1));
    for ch in coeffs.chunks(per) {
        for j in 0..per {
            out.push(ch[j]);
            if j + 1 < per {
                out.push(0.5 * (ch[j] + ch[j + 1]));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct VariationalProblem {
    pub params: HestonParams,
    pub grid: TimeGrid,
    pub spec: PayoffSpec,
    pub skeleton: Skeleton,
    pub basis: Basis,
}

/// Skeleton path: log-price rate and variance on the knots.
pub struct SkeletonPath {
    pub phi_dot: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VaroptResult {
    pub coeffs: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
    pub value: f64,
    pub evals: usize,
}

impl VariationalProblem {
    pub fn new(
        params: HestonParams,
        grid: TimeGrid,
        spec: PayoffSpec,
        skeleton: Skeleton,
        basis: Basis,
    ) -> Result<Self> {
        if basis.funcs.len() != skeleton.channels() {
            return domain("basis channel count does not match the skeleton");
        }
        if let Skeleton::BlackScholes { sigma } = &skeleton {
            if sigma.len() != grid.n_steps + 1 {
                return domain("sigma must be given on the knots");
            }
        }
        Ok(Self {
            params,
            grid,
            spec,
            skeleton,
            basis,
        })
    }

    /// Integrate the skeleton; `None` if the variance leaves `(0, inf)`.
    pub fn skeleton_path(&self, ctrl: &[Vec<f64>]) -> Option<SkeletonPath> {
        let p = &self.params;
        let n = self.grid.n_steps;
        let dt = self.grid.dt();
        let (rho, rb) = (p.rho, p.rho_bar());
        let mixed = |sv: f64, i: usize| sv * (rho * ctrl[0][i] + rb * ctrl[1][i]);
        let mut phi_dot = vec![0.0; n + 1];
        let mut var = vec![0.0; n + 1];
        match &self.skeleton {
            Skeleton::LdpSmallNoise | Skeleton::LdpSmallTime => {
                let drift = matches!(self.skeleton, Skeleton::LdpSmallNoise);
                let rhs = |v: f64, u: f64| {
                    let d = if drift { p.f(v) } else { 0.0 };
                    d + p.g(v) * u
                };
                let mut v = p.v0;
                for i in 0..=n {
                    if !(v > 0.0 && v.is_finite()) {
                        return None;
                    }
                    var[i] = v;
                    let sv = v.sqrt();
                    phi_dot[i] = mixed(sv, i) - if drift { 0.5 * v } else { 0.0 };
                    if i < n {
                        let k1 = rhs(v, ctrl[0][i]);
                        let k2 = rhs(v + dt * k1, ctrl[0][i + 1]);
                        v += 0.5 * dt * (k1 + k2);
                    }
                }
            }
            Skeleton::MdpLog | Skeleton::MdpPrice | Skeleton::MdpSmallTime => {
                let small = matches!(self.skeleton, Skeleton::MdpSmallTime);
                let psi = if small {
                    vec![p.v0; n + 1]
                } else {
                    psi_path(p, &self.grid)
                };
                let fp = |v: f64| if small { 0.0 } else { p.f_prime(v) };
                let mut eta = 0.0;
                for i in 0..=n {
                    let sv = psi[i].sqrt();
                    phi_dot[i] = mixed(sv, i) - 0.5 * psi[i];
                    if matches!(self.skeleton, Skeleton::MdpLog) {
                        phi_dot[i] -= 0.5 * eta;
                    }
                    var[i] = psi[i] + eta;
                    if i < n {
                        let k1 = fp(psi[i]) * eta + p.g(psi[i]) * ctrl[0][i];
                        let e1 = eta + dt * k1;
                        let k2 = fp(psi[i + 1]) * e1 + p.g(psi[i + 1]) * ctrl[0][i + 1];
                        eta += 0.5 * dt * (k1 + k2);
                    }
                }
            }
            Skeleton::BlackScholes { sigma } => {
                for i in 0..=n {
                    phi_dot[i] = -0.5 * sigma[i] * sigma[i] + sigma[i] * ctrl[0][i];
                    var[i] = sigma[i] * sigma[i];
                }
            }
            Skeleton::LargeTime { .. } => {
                for i in 0..=n {
                    phi_dot[i] = -0.5 * p.theta + ctrl[0][i];
                    var[i] = p.theta;
                }
            }
        }
        Some(SkeletonPath { phi_dot, var })
    }

    /// `log G` on a skeleton path, `-inf` outside the exercise region.
    pub fn log_payoff(&self, path: &SkeletonPath) -> f64 {
        let p = &self.params;
        let g = &self.grid;
        let dt = g.dt();
        let n = g.n_steps;
        let k = self.spec.strike;
        let value = match self.spec.kind {
            PayoffKind::EuropeanCall | PayoffKind::GeometricAsianCall => {
                let lc = self.spec.log_call(p).unwrap();
                let w: Vec<f64> = (0..=n)
                    .map(|i| lc.weight.alpha(g.t(i), g.t_end) * path.phi_dot[i])
                    .collect();
                return lc.f(trapezoid(&w, dt));
            }
            PayoffKind::ArithmeticAsianCall => {
                let phi = cumulative_trapezoid(&path.phi_dot, dt);
                let s: f64 = (1..=n).map(|j| (p.r * g.t(j) + phi[j]).exp()).sum();
                p.s0 * s / n as f64 - k
            }
            PayoffKind::VolIndicatorSwap => {
                let phi = cumulative_trapezoid(&path.phi_dot, dt);
                (0..n)
                    .filter(|&i| p.s0 * (p.r * g.t(i) + phi[i]).exp() >= k)
                    .map(|i| path.var[i] * dt)
                    .sum()
            }
        };
        if value > 0.0 {
            value.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Signed distance to the exercise region in log units (positive inside).
    pub fn exercise_margin(&self, ctrl: &[Vec<f64>]) -> f64 {
        let Some(path) = self.skeleton_path(ctrl) else {
            return f64::NEG_INFINITY;
        };
        let p = &self.params;
        let g = &self.grid;
        let dt = g.dt();
        let n = g.n_steps;
        let lk = self.spec.strike.ln();
        match self.spec.kind {
            PayoffKind::EuropeanCall | PayoffKind::GeometricAsianCall => {
                let lc = self.spec.log_call(p).unwrap();
                let w: Vec<f64> = (0..=n)
                    .map(|i| lc.weight.alpha(g.t(i), g.t_end) * path.phi_dot[i])
                    .collect();
                trapezoid(&w, dt) - lc.log_moneyness()
            }
            PayoffKind::ArithmeticAsianCall => {
                let phi = cumulative_trapezoid(&path.phi_dot, dt);
                let s: f64 = (1..=n).map(|j| (p.r * g.t(j) + phi[j]).exp()).sum();
                (p.s0 * s / n as f64).ln() - lk
            }
            PayoffKind::VolIndicatorSwap => {
                let phi = cumulative_trapezoid(&path.phi_dot, dt);
                (0..n)
                    .map(|i| p.s0.ln() + p.r * g.t(i) + phi[i] - lk)
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Move an infeasible start into the exercise region.
    fn feasible_start(&self, start: &[f64]) -> Vec<f64> {
        if self.objective(start).is_finite() {
            return start.to_vec();
        }
        let opts = NmOptions {
            max_evals: 20_000,
            ..Default::default()
        };
        let r = nelder_mead_max(
            |c| {
                let m = self.exercise_margin(&self.basis.expand(c));
                let e: f64 = c.iter().map(|x| x * x).sum();
                m.min(0.05) - 1e-6 * e
            },
            start,
            &opts,
        );
        r.x
    }

    /// Objective for controls given directly on the knots (one vector per channel).
    pub fn objective_controls(&self, ctrl: &[Vec<f64>]) -> f64 {
        let Some(path) = self.skeleton_path(ctrl) else {
            return f64::NEG_INFINITY;
        };
        let dt = self.grid.dt();
        let energy: f64 = ctrl
            .iter()
            .map(|c| {
                let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
                trapezoid(&sq, dt)
            })
            .sum();
        self.log_payoff(&path) - 0.5 * self.skeleton.penalty_scale() * energy
    }

    pub fn objective(&self, coeffs: &[f64]) -> f64 {
        self.objective_controls(&self.basis.expand(coeffs))
    }

    /// Best of five deterministic starts (`init`, zero, all `+0.5`, all `-0.5`,
    /// `+0.5` on the last channel), each polished by Nelder-Mead.
    pub fn solve(&self, init: Option<&[f64]>, budget: usize) -> Result<VaroptResult> {
        let d = self.basis.dim();
        let last = self.basis.funcs.last().map_or(0, |c| c.len());
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(x) = init {
            if x.len() != d {
                return domain("init has the wrong dimension");
            }
            starts.push(x.to_vec());
        }
        starts.push(vec![0.0; d]);
        starts.push(vec![0.5; d]);
        starts.push(vec![-0.5; d]);
        let mut tail = vec![0.0; d];
        tail[d - last..].iter_mut().for_each(|c| *c = 0.5);
        starts.push(tail);
        let per = (budget / starts.len()).max(100);
        let opts = NmOptions {
            max_evals: per,
            ..Default::default()
        };
        let mut best: Option<VaroptResult> = None;
        let mut evals = 0;
        for s in &starts {
            let s = self.feasible_start(s);
            let r = nelder_mead_max(|c| self.objective(c), &s, &opts);
            evals += r.evals;
            if best.as_ref().map_or(true, |b| r.value > b.value) {
                best = Some(VaroptResult {
                    controls: self.basis.expand(&r.x),
                    coeffs: r.x,
                    value: r.value,
                    evals: 0,
                });
            }
        }
        let mut best = best.unwrap();
        best.evals = evals;
        if !best.value.is_finite() {
            return Err(Error::Optim(
                "no start reached the exercise region".into(),
            ));
        }
        Ok(best)
    }

    /// Largest gain from perturbing a single coefficient by `+-h`.
    pub fn local_optimality_check(&self, coeffs: &[f64], h: f64) -> f64 {
        let base = self.objective(coeffs);
        let mut worst = f64::NEG_INFINITY;
        let mut c = coeffs.to_vec();
        for j in 0..c.len() {
            for s in [h, -h] {
                c[j] = coeffs[j] + s;
                worst = worst.max(self.objective(&c) - base);
            }
            c[j] = coeffs[j];
        }
        worst
    }
}

/// Hat-basis problem with the default resolution used by the drift pipelines.
pub fn default_problem(
    params: &HestonParams,
    grid: &TimeGrid,
    spec: &PayoffSpec,
    skeleton: Skeleton,
) -> Result<VariationalProblem> {
    // smooth atoms shaped like the Black-Scholes control on the mean variance path
    let sig: Vec<f64> = match &skeleton {
        Skeleton::BlackScholes { sigma } => sigma.clone(),
        Skeleton::MdpSmallTime => vec![params.v0.sqrt(); grid.n_steps + 1],
        Skeleton::LargeTime { .. } => vec![1.0; grid.n_steps + 1],
        _ => psi_path(params, grid).iter().map(|v| v.sqrt()).collect(),
    };
    let w = spec.weight();
    let shape: Vec<f64> = (0..=grid.n_steps)
        .map(|i| w.map_or(1.0, |w| w.alpha(grid.t(i), grid.t_end)) * sig[i])
        .collect();
    let tilted: Vec<f64> = shape
        .iter()
        .enumerate()
        .map(|(i, s)| s * grid.t(i) / grid.t_end)
        .collect();
    let basis = Basis::hat_with_atoms(grid, skeleton.channels(), DEFAULT_INTERVALS, &[shape, tilted])?;
    VariationalProblem::new(*params, *grid, *spec, skeleton, basis)
}

pub const DEFAULT_INTERVALS: usize = 12;
pub const DEFAULT_BUDGET: usize = 200_000;

/// Least-squares projection of knot controls onto the basis (used as a warm start).
pub fn project(basis: &Basis, ctrl: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::with_capacity(basis.dim());
    for (fs, target) in basis.funcs.iter().zip(ctrl) {
        let m = fs.len();
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                a[i][j] = fs[i].iter().zip(&fs[j]).map(|(x, y)| x * y).sum();
            }
            b[i] = fs[i].iter().zip(target).map(|(x, y)| x * y).sum();
        }
        out.extend(solve_dense(a, b));
    }
    out
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        if d.abs() < 1e-300 {
            continue;
        }
        for r in col + 1..n {
            let f = a[r][col] / d;
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = if a[r][r].abs() < 1e-300 {
            0.0
        } else {
            (b[r] - s) / a[r][r]
        };
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs_problem(k: f64, m: usize) -> VariationalProblem {
        let mut p = HestonParams::reference();
        p.rho = 0.0;
        let g = TimeGrid::new(1.0, 50).unwrap();
        let spec = PayoffSpec::new(PayoffKind::GeometricAsianCall, k).unwrap();
        let sk = Skeleton::BlackScholes {
            sigma: vec![0.25; 51],
        };
        let basis = Basis::hat(&g, 1, m).unwrap();
        VariationalProblem::new(p, g, spec, sk, basis).unwrap()
    }

    #[test]
    fn hat_basis_partition_of_unity() {
        let g = TimeGrid::new(1.0, 30).unwrap();
        let b = Basis::hat(&g, 2, 6).unwrap();
        assert_eq!(b.dim(), 14);
        let c = b.expand(&[1.0; 14]);
        assert!(c[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn refinement_preserves_function() {
        let g = TimeGrid::new(1.0, 40).unwrap();
        let b4 = Basis::hat(&g, 2, 4).unwrap();
        let b8 = Basis::hat(&g, 2, 8).unwrap();
        let c: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let f4 = b4.expand(&c);
        let f8 = b8.expand(&refine_hat_coeffs(&c, 2));
        for ch in 0..2 {
            for (a, b) in f4[ch].iter().zip(&f8[ch]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_recovers_span_member() {
        let g = TimeGrid::new(1.0, 40).unwrap();
        let b = Basis::hat(&g, 1, 5).unwrap();
        let c = vec![0.3, -0.1, 0.7, 0.2, 0.0, 1.0];
        let back = project(&b, &b.expand(&c));
        for (x, y) in c.iter().zip(back) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn unreachable_payoff_is_minus_infinity() {
        let pb = bs_problem(500.0, 4);
        assert_eq!(pb.objective(&[0.0; 5]), f64::NEG_INFINITY);
    }

    #[test]
    fn solve_beats_zero_control_and_is_locally_optimal() {
        let pb = bs_problem(55.0, 4);
        let r = pb.solve(None, 20_000).unwrap();
        assert!(r.value >= pb.objective(&[0.0; 5]));
        assert!(pb.local_optimality_check(&r.coeffs, 1e-3) <= 1e-8);
    }
}
