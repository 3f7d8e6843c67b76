//! Minimum-norm null controls of the linearised system
//! `y' + A y + p(t) B phi_g = 0`.
//!
//! With `b_k = <B phi_g, phi_k>`, variation of constants gives
//!
//! ```text
//! y_k(T) = e^{-lambda_k T} y0_k - b_k int_0^T e^{-lambda_k (T - s)} p(s) ds,
//! ```
//!
//! so `y(T) = 0` iff `int_0^T e^{lambda_k s} p(s) ds = m_k := y0_k / b_k` for
//! every `k` with `b_k != 0`. We work with the reversed-time kernels
//! `g_k(s) = e^{-lambda_k (T - s)}`, which stay in (0, 1] and avoid overflow.
//!
//! The control is sought among continuous piecewise-linear functions on a
//! grid graded towards `s = T`, where the fast kernels live. The constraint
//! weights are exact for such controls, and the least-norm solution lies in
//! the span of the representers `M^{-1} W_k^T` (`M` the mass matrix), which
//! we orthonormalise by pivoted Gram–Schmidt in the `M` inner product.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::spectral::{EigenSystem, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    /// Uniform intervals covering `[0, T]`.
    pub uniform_intervals: usize,
    /// Ratio of the geometric refinement towards `s = T`.
    pub grading_ratio: f64,
    /// Finest spacing is `r_min_factor / lambda_max`.
    pub r_min_factor: f64,
    /// Cap on the number of controlled modes (`None`: all).
    pub max_constraints: Option<usize>,
    /// Columns whose remaining relative norm drops below this are dropped.
    pub rank_tol: f64,
    /// Largest acceptable `||y(T)|| / ||y0||`.
    pub residual_tol: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            uniform_intervals: 200,
            grading_ratio: 1.15,
            r_min_factor: 0.05,
            max_constraints: None,
            rank_tol: 1e-14,
            residual_tol: 1e-8,
        }
    }
}

/// Truncated moment problem on `[0, T]`.
#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub horizon: f64,
    /// Storage indices of the controlled modes.
    pub active: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub couplings: Vec<f64>,
    /// `m_k = y0_k / b_k`.
    pub targets: Vec<f64>,
    /// Full initial state, for residual reporting.
    pub y0: DVector<f64>,
    /// Eigenvalues of all modes.
    pub all_lambdas: Vec<f64>,
    /// Ground couplings of all modes.
    pub all_couplings: Vec<f64>,
    labels: Vec<usize>,
}

impl MomentProblem {
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// `e^{-lambda_k T} y0_k`: the final-time right-hand side of constraint `k`.
    fn decayed_data(&self, i: usize) -> f64 {
        let k = self.active[i];
        (-self.lambdas[i] * self.horizon).exp() * self.y0[k]
    }
}

pub fn assemble_moment_problem(
    y0: &State,
    eig: &EigenSystem,
    horizon: f64,
) -> Result<MomentProblem> {
    assemble_with_cap(y0, eig, horizon, None)
}

/// As [`assemble_moment_problem`], controlling only the first `cap` modes
/// with nonzero coupling.
pub fn assemble_with_cap(
    y0: &State,
    eig: &EigenSystem,
    horizon: f64,
    cap: Option<usize>,
) -> Result<MomentProblem> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if y0.len() != eig.len() {
        return Err(Error::Dimension {
            expected: eig.len(),
            got: y0.len(),
        });
    }
    let b = eig.ground_coupling();
    let bmax = b.amax();
    let ymax = y0.coeffs.amax();
    let mut problem = MomentProblem {
        horizon,
        active: Vec::new(),
        lambdas: Vec::new(),
        couplings: Vec::new(),
        targets: Vec::new(),
        y0: y0.coeffs.clone(),
        all_lambdas: eig.eigenvalues().to_vec(),
        all_couplings: b.iter().copied().collect(),
        labels: (0..eig.len()).map(|k| eig.label(k)).collect(),
    };
    for k in 0..eig.len() {
        let bk = b[k];
        if bk.abs() <= 1e-12 * bmax || bmax == 0.0 {
            if y0.coeffs[k].abs() > 1e-14 * ymax.max(f64::MIN_POSITIVE) && y0.coeffs[k] != 0.0 {
                return Err(Error::RankViolation {
                    k: eig.label(k),
                    value: y0.coeffs[k],
                });
            }
            continue;
        }
        if cap.is_some_and(|c| problem.active.len() >= c) {
            continue;
        }
        problem.active.push(k);
        problem.lambdas.push(eig.eigenvalue(k));
        problem.couplings.push(bk);
        problem.targets.push(y0.coeffs[k] / bk);
    }
    Ok(problem)
}

/// `int_0^1 e^{-z u} (1 - u) du` and `int_0^1 e^{-z u} u du`.
pub(crate) fn hat_moments(z: f64) -> (f64, f64) {
    if z.abs() < 0.1 {
        let mut f0 = 0.0;
        let mut f1 = 0.0;
        let mut term = 1.0; // (-z)^n / n!
        for n in 0..16 {
            let nf = n as f64;
            f0 += term / ((nf + 1.0) * (nf + 2.0));
            f1 += term / (nf + 2.0);
            term *= -z / (nf + 1.0);
        }
        (f0, f1)
    } else {
        let e = (-z).exp();
        let z2 = z * z;
        ((z - 1.0 + e) / z2, (1.0 - e * (1.0 + z)) / z2)
    }
}

/// Time grid on `[0, T]`: uniform intervals plus geometric refinement
/// towards `T` down to spacing `r_min_factor / lambda_max`.
pub fn moment_grid(horizon: f64, lambda_max: f64, opts: &MomentOptions) -> Vec<f64> {
    let n = opts.uniform_intervals.max(1);
    let mut nodes: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    if lambda_max > 0.0 {
        let h = horizon / n as f64;
        let mut r = opts.r_min_factor / lambda_max;
        while r < h {
            nodes.push(horizon - r);
            r *= opts.grading_ratio;
        }
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * horizon);
    *nodes.last_mut().expect("nonempty grid") = horizon;
    nodes[0] = 0.0;
    nodes
}

/// Rows `W_k` with `W_k . P = int_0^T g_k(s) p(s) ds` for the piecewise
/// linear `p` with nodal values `P`.
fn constraint_row(lambda: f64, grid: &[f64], horizon: f64) -> Vec<f64> {
    let mut w = vec![0.0; grid.len()];
    for i in 0..grid.len() - 1 {
        let (ta, tb) = (grid[i], grid[i + 1]);
        let h = tb - ta;
        let e = (-lambda * (horizon - tb)).exp();
        if e == 0.0 {
            continue;
        }
        let (f0, f1) = hat_moments(lambda * h);
        w[i] += h * e * f1;
        w[i + 1] += h * e * f0;
    }
    w
}

/// Tridiagonal P1 mass matrix of the grid: `(diag, off)`.
fn mass_matrix(grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let mut d = vec![0.0; n];
    let mut o = vec![0.0; n - 1];
    for i in 0..n - 1 {
        let h = grid[i + 1] - grid[i];
        d[i] += h / 3.0;
        d[i + 1] += h / 3.0;
        o[i] = h / 6.0;
    }
    (d, o)
}

fn mass_apply(d: &[f64], o: &[f64], x: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = d[i] * x[i];
        if i > 0 {
            y[i] += o[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            y[i] += o[i] * x[i + 1];
        }
    }
    y
}

/// Thomas algorithm for the symmetric positive-definite tridiagonal system.
fn mass_solve(d: &[f64], o: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    let mut diag = d[0];
    x[0] /= diag;
    for i in 1..n {
        c[i - 1] = o[i - 1] / diag;
        diag = d[i] - o[i - 1] * c[i - 1];
        x[i] = (x[i] - o[i - 1] * x[i - 1]) / diag;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of a least-norm solve.
#[derive(Debug, Clone)]
pub struct MomentSolution {
    pub control: ControlSignal,
    pub norm: f64,
    /// `||y(T)|| / ||y0||` over all modes by exact propagation; under a
    /// constraint cap this includes the free decay of the uncontrolled modes.
    pub residual: f64,
    /// Ratio of extreme pivots of the triangular factor, squared: an
    /// estimate of the Gram condition number.
    pub condition: f64,
    pub rank: usize,
    /// Labels of constraints dropped by the rank cap.
    pub dropped: Vec<usize>,
    pub grid_size: usize,
    /// Orthonormal-basis coordinates of the solution (for optimality checks).
    basis: Vec<Vec<f64>>,
    mass: (Vec<f64>, Vec<f64>),
}

impl MomentSolution {
    /// First-order optimality probe: moves the solution by `eps` along the
    /// feasible direction obtained from `direction` (projected onto the null
    /// space of the constraints) and returns `||p + eps n||^2 - ||p||^2`,
    /// which must be nonnegative for a least-norm solution.
    pub fn perturbation_gain(&self, direction: &[f64], eps: f64) -> f64 {
        let (d, o) = &self.mass;
        let p: Vec<f64> = self.control.values().to_vec();
        let mut n = direction.to_vec();
        for _ in 0..2 {
            let mn = mass_apply(d, o, &n);
            for q in &self.basis {
                let c = dot(q, &mn);
                for (ni, qi) in n.iter_mut().zip(q) {
                    *ni -= c * qi;
                }
            }
        }
        let pert: Vec<f64> = p.iter().zip(&n).map(|(a, b)| a + eps * b).collect();
        let norm2 = |x: &[f64]| dot(x, &mass_apply(d, o, x));
        norm2(&pert) - norm2(&p)
    }

    /// Number of nodal values of the control.
    pub fn dimension(&self) -> usize {
        self.control.nodes().len()
    }
}

pub fn solve_min_norm(problem: &MomentProblem, opts: &MomentOptions) -> Result<MomentSolution> {
    let horizon = problem.horizon;
    let lmax = problem.lambdas.iter().copied().fold(0.0, f64::max);
    let grid = moment_grid(horizon, lmax, opts);
    let q_nodes = grid.len();
    if problem.len() * 4 > q_nodes {
        return Err(Error::Precondition(format!(
            "{} constraints need at least {} grid nodes, have {q_nodes}",
            problem.len(),
            4 * problem.len()
        )));
    }
    let (md, mo) = mass_matrix(&grid);
    let y0_norm = problem.y0.norm();

    if problem.is_empty() || y0_norm == 0.0 {
        let control = ControlSignal::new(grid.clone(), vec![0.0; q_nodes])?;
        let residual = final_residual(problem, &control);
        return Ok(MomentSolution {
            control,
            norm: 0.0,
            residual,
            condition: 1.0,
            rank: 0,
            dropped: Vec::new(),
            grid_size: q_nodes,
            basis: Vec::new(),
            mass: (md, mo),
        });
    }

    // Scaled rows: b_k W_k P = e^{-lambda_k T} y0_k.
    let rows: Vec<Vec<f64>> = problem
        .lambdas
        .iter()
        .zip(&problem.couplings)
        .map(|(l, b)| {
            constraint_row(*l, &grid, horizon)
                .into_iter()
                .map(|w| b * w)
                .collect()
        })
        .collect();
    let data: Vec<f64> = (0..problem.len())
        .map(|i| problem.decayed_data(i))
        .collect();

    // Representers and their M-norms.
    let mut cols: Vec<Vec<f64>> = rows.iter().map(|r| mass_solve(&md, &mo, r)).collect();
    let orig: Vec<f64> = cols
        .iter()
        .zip(&rows)
        .map(|(c, r)| dot(c, r).max(0.0).sqrt())
        .collect();
    let m = cols.len();
    let mut remaining: Vec<bool> = vec![true; m];
    let mut order: Vec<usize> = Vec::with_capacity(m);
    let mut qs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut mqs: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut dropped = Vec::new();

    for _ in 0..m {
        // Pivot: largest remaining relative norm.
        let mut best = None;
        let mut best_rel = -1.0;
        for j in 0..m {
            if !remaining[j] || orig[j] == 0.0 {
                continue;
            }
            let mc = mass_apply(&md, &mo, &cols[j]);
            let rel = dot(&cols[j], &mc).max(0.0).sqrt() / orig[j];
            if rel > best_rel {
                best_rel = rel;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        if best_rel < opts.rank_tol {
            break;
        }
        remaining[j] = false;
        // Second orthogonalisation pass against the accepted basis.
        let mut v = cols[j].clone();
        for (q, mq) in qs.iter().zip(&mqs) {
            let c = dot(&v, mq);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
        }
        let mv = mass_apply(&md, &mo, &v);
        let nv = dot(&v, &mv).sqrt();
        if !(nv > opts.rank_tol * orig[j]) {
            continue;
        }
        let q: Vec<f64> = v.iter().map(|x| x / nv).collect();
        let mq: Vec<f64> = mv.iter().map(|x| x / nv).collect();
        // Right-looking update of the remaining columns.
        for (i, col) in cols.iter_mut().enumerate() {
            if remaining[i] {
                let c = dot(col, &mq);
                for (ci, qi) in col.iter_mut().zip(&q) {
                    *ci -= c * qi;
                }
            }
        }
        order.push(j);
        qs.push(q);
        mqs.push(mq);
    }
    for j in 0..m {
        if remaining[j] || (!order.contains(&j)) {
            dropped.push(problem.labels[problem.active[j]]);
        }
    }

    // U[i][j] = W_{order j} . q_i (upper triangular); solve U^T z = data.
    let r = order.len();
    let mut z = vec![0.0; r];
    let mut pivots = Vec::with_capacity(r);
    for jj in 0..r {
        let row = &rows[order[jj]];
        let mut s = data[order[jj]];
        for ii in 0..jj {
            s -= dot(row, &qs[ii]) * z[ii];
        }
        let ujj = dot(row, &qs[jj]);
        pivots.push(ujj.abs());
        z[jj] = s / ujj;
    }
    // One step of iterative refinement on the retained constraints.
    let mut pvec = vec![0.0; q_nodes];
    for (zi, q) in z.iter().zip(&qs) {
        for (p, qv) in pvec.iter_mut().zip(q) {
            *p += zi * qv;
        }
    }
    let mut corr = vec![0.0; r];
    for jj in 0..r {
        let row = &rows[order[jj]];
        let mut s = data[order[jj]] - dot(row, &pvec);
        for ii in 0..jj {
            s -= dot(row, &qs[ii]) * corr[ii];
        }
        corr[jj] = s / dot(row, &qs[jj]);
    }
    for (ci, q) in corr.iter().zip(&qs) {
        for (p, qv) in pvec.iter_mut().zip(q) {
            *p += ci * qv;
        }
    }

    let norm = dot(&pvec, &mass_apply(&md, &mo, &pvec)).max(0.0).sqrt();
    let control = ControlSignal::new(grid, pvec)?;
    let residual = final_residual(problem, &control);
    let constrained = constrained_residual(problem, &control);
    let pmax = pivots.iter().copied().fold(0.0, f64::max);
    let pmin = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if pmin > 0.0 {
        (pmax / pmin).powi(2)
    } else {
        f64::INFINITY
    };
    if !(constrained <= opts.residual_tol) {
        return Err(Error::Conditioning {
            residual: constrained,
            condition,
        });
    }
    Ok(MomentSolution {
        control,
        norm,
        residual,
        condition,
        rank: r,
        dropped,
        grid_size: q_nodes,
        basis: qs,
        mass: (md, mo),
    })
}

/// As [`final_residual`], restricted to the modes the problem constrains
/// (differs only under a constraint cap).
fn constrained_residual(problem: &MomentProblem, p: &ControlSignal) -> f64 {
    let y0: DVector<f64> =
        DVector::from_iterator(problem.len(), problem.active.iter().map(|&k| problem.y0[k]));
    let y0n = y0.norm();
    if y0n == 0.0 {
        return 0.0;
    }
    propagate_linear(
        &y0,
        &problem.lambdas,
        &problem.couplings,
        p,
        0.0,
        problem.horizon,
    )
    .norm()
        / y0n
}

/// `||y(T)|| / ||y0||` over all modes, by exact propagation.
fn final_residual(problem: &MomentProblem, p: &ControlSignal) -> f64 {
    let y0n = problem.y0.norm();
    if y0n == 0.0 {
        return 0.0;
    }
    let y = propagate_linear(
        &problem.y0,
        &problem.all_lambdas,
        &problem.all_couplings,
        p,
        0.0,
        problem.horizon,
    );
    y.norm() / y0n
}

/// Exact solution at `t1` of `y_k' = -lambda_k y_k - b_k p(t)` from `y(t0) = y0`
/// for piecewise-linear `p` (zero outside its support).
pub fn propagate_linear(
    y0: &DVector<f64>,
    lambdas: &[f64],
    couplings: &[f64],
    p: &ControlSignal,
    t0: f64,
    t1: f64,
) -> DVector<f64> {
    let pieces = p.pieces(t0, t1);
    let mut y = y0.clone();
    for (k, yk) in y.iter_mut().enumerate() {
        let (l, bk) = (lambdas[k], couplings[k]);
        for seg in &pieces {
            let h = seg.len();
            let (f0, f1) = hat_moments(l * h);
            let forced = h * (f1 * seg.p0 + f0 * seg.p1);
            *yk = (-l * h).exp() * *yk - bk * forced;
        }
    }
    y
}

/// Report of [`verify_linear_null`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullReport {
    pub max_abs_final: f64,
    pub relative_residual: f64,
    pub final_state: Vec<f64>,
}

/// Integrates every mode of the linearised system under `p` on `[0, T]`.
pub fn verify_linear_null(
    p: &ControlSignal,
    y0: &State,
    eig: &EigenSystem,
    horizon: f64,
) -> Result<NullReport> {
    if y0.len() != eig.len() {
        return Err(Error::Dimension {
            expected: eig.len(),
            got: y0.len(),
        });
    }
    let b: Vec<f64> = eig.ground_coupling().iter().copied().collect();
    let y = propagate_linear(&y0.coeffs, eig.eigenvalues(), &b, p, 0.0, horizon);
    let n0 = y0.coeffs.norm();
    Ok(NullReport {
        max_abs_final: y.amax(),
        relative_residual: if n0 > 0.0 { y.norm() / n0 } else { y.norm() },
        final_state: y.iter().copied().collect(),
    })
}

/// Seeded random unit vectors in `R^k` (uniform on the sphere).
pub fn random_unit_states(k: usize, count: usize, seed: u64) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = DVector::from_iterator(
                k,
                (0..k).map(|_| -> f64 { StandardNormal.sample(&mut rng) }),
            );
            let n = v.norm();
            State::new(v / n)
        })
        .collect()
}

/// Empirical control cost at one horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSample {
    pub horizon: f64,
    pub n_emp: f64,
    pub max_residual: f64,
    pub max_condition: f64,
    /// `e^{-lambda_K T}`: weight of the first discarded mode.
    pub tail_indicator: f64,
}

/// `max ||p|| / ||y0||` over seeded random unit `y0`.
pub fn estimate_control_cost(
    eig: &EigenSystem,
    horizon: f64,
    trials: usize,
    seed: u64,
    opts: &MomentOptions,
) -> Result<CostSample> {
    if trials < 8 {
        return Err(Error::Validation(format!(
            "need at least 8 trials, got {trials}"
        )));
    }
    let mut sample = CostSample {
        horizon,
        n_emp: 0.0,
        max_residual: 0.0,
        max_condition: 0.0,
        tail_indicator: eig.tail_indicator(horizon),
    };
    for y0 in random_unit_states(eig.len(), trials, seed) {
        let problem = assemble_with_cap(&y0, eig, horizon, opts.max_constraints)?;
        let sol = solve_min_norm(&problem, opts)?;
        sample.n_emp = sample.n_emp.max(sol.norm);
        sample.max_residual = sample.max_residual.max(sol.residual);
        sample.max_condition = sample.max_condition.max(sol.condition);
    }
    Ok(sample)
}

/// Fit `log N(T) = nu / T + c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostFit {
    pub nu_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `max_T T log N(T)`: the smallest `nu` with `N(T) <= e^{nu/T}` on the grid.
    pub nu_dominating: f64,
    pub points: usize,
}

pub fn fit_cost_law(samples: &[CostSample]) -> Option<CostFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.n_emp > 0.0 && s.n_emp.is_finite())
        .map(|s| (1.0 / s.horizon, s.n_emp.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    let nu_dominating = samples
        .iter()
        .map(|s| s.horizon * s.n_emp.max(1.0).ln())
        .fold(0.0, f64::max);
    Some(CostFit {
        nu_hat: slope,
        intercept: my - slope * mx,
        r_squared,
        nu_dominating,
        points: pts.len(),
    })
}

/// Cost samples over a horizon grid; failures are kept with their message
/// and excluded from the fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostCurve {
    pub samples: Vec<CostSample>,
    pub failures: Vec<(f64, String)>,
    pub fit: Option<CostFit>,
}

pub fn estimate_cost_curve(
    eig: &EigenSystem,
    horizons: &[f64],
    trials: usize,
    seed: u64,
    opts: &MomentOptions,
) -> Result<CostCurve> {
    if trials < 8 {
        return Err(Error::Validation(format!(
            "need at least 8 trials, got {trials}"
        )));
    }
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for &t in horizons {
        match estimate_control_cost(eig, t, trials, seed, opts) {
            Ok(s) => samples.push(s),
            Err(e) => failures.push((t, e.to_string())),
        }
    }
    let fit = fit_cost_law(&samples);
    Ok(CostCurve {
        samples,
        failures,
        fit,
    })
}
