//! Truncated eigen-representation of the pair (A, B).
//!
//! Everything downstream works on coefficient vectors in the orthonormal
//! eigenbasis of `A`. The coupling operator enters only through the matrix
//! `b[(m, k)] = <B phi_m, phi_k>`, so `(B u)_k = sum_m b[(m, k)] u_m`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::error::{Error, Result};

/// Fitted lower bound `|lambda_k - lambda_g|^q |b_k| >= b` over the truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankParams {
    pub q: f64,
    pub b: f64,
}

/// Spectral data of `A` together with the coupling coefficients of `B`.
#[derive(Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    ground_index: usize,
    label_base: usize,
    b_matrix: DMatrix<f64>,
    /// Transpose of `b_matrix`: the matrix of `B` acting on coefficient vectors.
    operator: DMatrix<f64>,
    basis: Option<Basis>,
    gap_constant: f64,
    rank_params: Option<RankParams>,
    /// Gap bound the analysis guarantees for this family, if known.
    stated_gap: Option<f64>,
}

impl fmt::Debug for EigenSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EigenSystem")
            .field("len", &self.len())
            .field("ground_index", &self.ground_index)
            .field("label_base", &self.label_base)
            .field("eigenvalues", &self.eigenvalues)
            .field("gap_constant", &self.gap_constant)
            .field("rank_params", &self.rank_params)
            .finish()
    }
}

impl EigenSystem {
    /// Builds a system from eigenvalues and the coupling matrix. The ground
    /// mode is storage index 0 and labels start at 0.
    pub fn new(eigenvalues: Vec<f64>, b_matrix: DMatrix<f64>) -> Result<Self> {
        let k = eigenvalues.len();
        if k == 0 {
            return Err(Error::Domain("empty spectrum".into()));
        }
        if b_matrix.nrows() != k || b_matrix.ncols() != k {
            return Err(Error::Dimension {
                expected: k,
                got: b_matrix.nrows().max(b_matrix.ncols()),
            });
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::Domain(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("eigenvalues must be nondecreasing".into()));
        }
        let gap_constant = measured_gap(&eigenvalues);
        let operator = b_matrix.transpose();
        Ok(Self {
            eigenvalues,
            ground_index: 0,
            label_base: 0,
            b_matrix,
            operator,
            basis: None,
            gap_constant,
            rank_params: None,
            stated_gap: None,
        })
    }

    pub fn with_label_base(mut self, base: usize) -> Self {
        self.label_base = base;
        self
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = Some(basis);
        self
    }

    pub fn with_rank_params(mut self, params: RankParams) -> Self {
        self.rank_params = Some(params);
        self
    }

    pub fn with_stated_gap(mut self, gap: f64) -> Self {
        self.stated_gap = Some(gap);
        self
    }

    pub fn stated_gap(&self) -> Option<f64> {
        self.stated_gap
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn ground_index(&self) -> usize {
        self.ground_index
    }

    pub fn ground_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.ground_index]
    }

    /// Label of storage index `k` in the problem's own numbering
    /// (Neumann problems count from 0, Dirichlet problems from 1).
    pub fn label(&self, k: usize) -> usize {
        k + self.label_base
    }

    pub fn label_base(&self) -> usize {
        self.label_base
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b_matrix
    }

    /// Matrix of `B` acting on coefficient vectors.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// Coefficients `b_k = <B phi_ground, phi_k>`.
    pub fn ground_coupling(&self) -> DVector<f64> {
        self.b_matrix.row(self.ground_index).transpose()
    }

    pub fn basis(&self) -> Option<&Basis> {
        self.basis.as_ref()
    }

    pub fn gap_constant(&self) -> f64 {
        self.gap_constant
    }

    pub fn rank_params(&self) -> Option<RankParams> {
        self.rank_params
    }

    /// Evaluates `phi_k(x)` when the system carries an eigenfunction basis.
    pub fn eigenfunction(&self, k: usize, x: f64) -> Option<f64> {
        self.basis.as_ref().map(|b| b.value(k, x))
    }

    /// Same eigenbasis and coupling, eigenvalues moved by `-sigma`.
    pub fn shifted(&self, sigma: f64) -> Result<Self> {
        let eigenvalues: Vec<f64> = self.eigenvalues.iter().map(|l| l - sigma).collect();
        if eigenvalues
            .iter()
            .any(|l| *l < -1e-12 * (1.0 + sigma.abs()))
        {
            return Err(Error::Domain(format!(
                "shift {sigma} makes the spectrum negative"
            )));
        }
        let eigenvalues = eigenvalues.into_iter().map(|l| l.max(0.0)).collect();
        let mut out = Self::new(eigenvalues, self.b_matrix.clone())?;
        out.ground_index = self.ground_index;
        out.label_base = self.label_base;
        out.basis = self.basis.clone();
        out.rank_params = self.rank_params;
        out.stated_gap = self.stated_gap;
        Ok(out)
    }

    /// Shift that puts the ground eigenvalue at zero.
    pub fn ground_shifted(&self) -> Result<Self> {
        self.shifted(self.ground_eigenvalue())
    }

    /// Leading `k` modes.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() || self.ground_index >= k {
            return Err(Error::Domain(format!(
                "cannot truncate {} modes to {k}",
                self.len()
            )));
        }
        let mut out = Self::new(
            self.eigenvalues[..k].to_vec(),
            self.b_matrix.view((0, 0), (k, k)).into_owned(),
        )?;
        out.ground_index = self.ground_index;
        out.label_base = self.label_base;
        out.basis = self.basis.clone();
        out.rank_params = self.rank_params;
        out.stated_gap = self.stated_gap;
        Ok(out)
    }

    /// Spectral tail indicator `exp(-lambda_max t)` for a horizon `t`.
    pub fn tail_indicator(&self, t: f64) -> f64 {
        (-self.eigenvalues[self.len() - 1] * t).exp()
    }

    /// Applies `B` to a coefficient vector.
    pub fn apply_b(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.operator * u
    }
}

fn measured_gap(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .windows(2)
        .map(|w| w[1].sqrt() - w[0].sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Coefficient vector of a state in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub coeffs: DVector<f64>,
}

impl State {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    pub fn from_slice(c: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(c))
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(DVector::zeros(k))
    }

    pub fn unit(k: usize, i: usize) -> Self {
        let mut s = Self::zeros(k);
        s.coeffs[i] = 1.0;
        s
    }

    /// The ground eigenfunction of `eig`.
    pub fn ground(eig: &EigenSystem) -> Self {
        Self::unit(eig.len(), eig.ground_index())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(&self.coeffs * c)
    }

    pub fn plus(&self, other: &State) -> Self {
        Self::new(&self.coeffs + &other.coeffs)
    }

    pub fn minus(&self, other: &State) -> Self {
        Self::new(&self.coeffs - &other.coeffs)
    }
}

/// The three gradings used by the analysis: `X`, `D(A^{1/2})`, `D(A)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grading {
    L2,
    Half,
    One,
}

impl Grading {
    pub fn exponent(self) -> f64 {
        match self {
            Grading::L2 => 0.0,
            Grading::Half => 0.5,
            Grading::One => 1.0,
        }
    }

    fn weight(self, lambda: f64) -> f64 {
        match self {
            Grading::L2 => 1.0,
            Grading::Half => 1.0 + lambda,
            Grading::One => 1.0 + lambda * lambda,
        }
    }
}

/// Graph norm `(sum_k (1 + lambda_k^{2s}) |u_k|^2)^{1/2}`.
///
/// For `s = 0` this is the plain coefficient norm (no doubling of the
/// `X` part), matching `norm_s(e_k, 0) = 1`.
pub fn norm_s(state: &State, grading: Grading, eig: &EigenSystem) -> Result<f64> {
    norm_coeffs(&state.coeffs, grading, eig.eigenvalues())
}

pub(crate) fn norm_coeffs(c: &DVector<f64>, grading: Grading, eigenvalues: &[f64]) -> Result<f64> {
    if c.len() != eigenvalues.len() {
        return Err(Error::Dimension {
            expected: eigenvalues.len(),
            got: c.len(),
        });
    }
    let sum: f64 = c
        .iter()
        .zip(eigenvalues)
        .map(|(u, l)| grading.weight(*l) * u * u)
        .sum();
    Ok(sum.sqrt())
}

/// `D(A^{1/2})` norm of a raw coefficient vector, panicking on size mismatch.
pub(crate) fn half_norm(c: &DVector<f64>, eigenvalues: &[f64]) -> f64 {
    norm_coeffs(c, Grading::Half, eigenvalues).expect("state length matches truncation")
}

/// Truncated embedding constant: `max ||B u|| / ||u||_{1/2}` over the span of
/// the retained modes.
///
/// This is the square root of the top eigenvalue of the pencil
/// `(B^T B, diag(1 + lambda_k))`, i.e. the top singular value of
/// `B diag(1 + lambda_k)^{-1/2}`. It is a lower bound for the true constant
/// and nondecreasing in the truncation.
pub fn estimate_cb(eig: &EigenSystem) -> f64 {
    let k = eig.len();
    let mut scaled = eig.operator().clone();
    for j in 0..k {
        let s = (1.0 + eig.eigenvalue(j)).sqrt().recip();
        scaled.column_mut(j).scale_mut(s);
    }
    if scaled.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    scaled.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Constants of the local steering estimate and its supporting
/// energy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c_b: f64,
    pub nu: f64,
    pub t0: f64,
    /// Ground eigenvalue entering `(1 + lambda^{1/2})^2`.
    pub lambda_ground: f64,
    pub horizon: f64,
    pub d: f64,
    pub gamma0: f64,
    pub t_f: f64,
    pub t_1: f64,
    /// Radius of the ball around the ground state, `exp(-6 Gamma_0 / T_1)`.
    pub r_t: f64,
}

impl BoundConstants {
    fn ground_factor(&self) -> f64 {
        let s = 1.0 + self.lambda_ground.sqrt();
        s * s
    }

    /// Control-cost law `exp(nu / T)`.
    pub fn n_bound(&self, t: f64) -> f64 {
        (self.nu / t).exp()
    }

    pub fn c2(&self, t: f64, p_norm: f64) -> f64 {
        2.0 * self.c_b * t.sqrt() * p_norm + self.c_b.powi(2) * p_norm.powi(2) + t
    }

    pub fn c3(&self, t: f64, p_norm: f64) -> f64 {
        1.5 * self.c_b.powi(2) * p_norm.powi(2) + self.c2(t, p_norm)
    }

    pub fn c4(&self, t: f64) -> f64 {
        self.c_b * (2.5 * self.c_b + 2.0 * t.sqrt()) + 2.0 * t
    }

    pub fn c5(&self, n: f64) -> f64 {
        let cb2 = self.c_b.powi(2);
        let g = self.ground_factor();
        1.0 + 2.5 * cb2 * g * n * n + 1.5 * cb2 * (cb2 * g * n * n + 1.0)
    }

    /// Quadratic-remainder constant `K(T)` for a given cost constant `N`.
    pub fn k_with(&self, t: f64, n: f64) -> f64 {
        (2.0 * self.c4(t).exp() * self.c_b.powi(2) * n * n * self.c5(n)).sqrt()
    }

    /// `K(T)` with `N(T) = exp(nu / T)`.
    pub fn k_of(&self, t: f64) -> f64 {
        self.k_with(t, self.n_bound(t))
    }

    /// Uniform-bound constant `C_{1,1}(T, ||v_0||_{1/2})` for a cost constant `N_T`.
    pub fn c11(&self, t: f64, n_t: f64, v0_half: f64) -> f64 {
        let cb = self.c_b;
        let cb2 = cb * cb;
        let g = self.ground_factor();
        let exponent = cb * n_t * (2.5 * cb * n_t * v0_half + 2.0 * t.sqrt()) * v0_half + t;
        let factor = 1.0
            + 2.5 * cb2 * g * n_t * n_t
            + 1.5 * cb2 * n_t * n_t * (cb2 * g * n_t * n_t + 1.0) * v0_half * v0_half;
        exponent.exp() * factor
    }

    /// The literal total-control quantity (a bound on the squared norm):
    /// `exp(-pi^2 Gamma_0 / T) / (exp(2 pi^2 Gamma_0 / (3 T)) - 1)`.
    pub fn control_norm_bound_display(&self) -> f64 {
        let t = self.t_f;
        let a = PI * PI * self.gamma0 / t;
        (-a).exp() / ((2.0 * a / 3.0).exp_m1())
    }

    /// Square root of the displayed quantity. The stage-wise estimates sum
    /// the squared stage norms, so this is the bound they actually deliver.
    pub fn control_norm_bound(&self) -> f64 {
        self.control_norm_bound_display().sqrt()
    }

    /// Natural log of the stage-`n` ceiling
    /// `exp((sum_{j<=n} 2^{n-j} j^2 - 6 * 2^n) Gamma_0 / T_1)`.
    pub fn log_stage_ceiling(&self, n: usize) -> f64 {
        let mut s = 0.0;
        for j in 1..=n {
            s += 2f64.powi((n - j) as i32) * (j * j) as f64;
        }
        (s - 6.0 * 2f64.powi(n as i32)) * self.gamma0 / self.t_1
    }
}

/// Evaluates every constant of the local steering estimate.
///
/// `c_b` below one is raised to one, as the analysis allows.
pub fn compute_bound_constants(
    c_b: f64,
    nu: f64,
    lambda_ground: f64,
    horizon: f64,
    t0: f64,
) -> Result<BoundConstants> {
    for (name, v) in [("C_B", c_b), ("nu", nu), ("T", horizon), ("T_0", t0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    if !(lambda_ground.is_finite() && lambda_ground >= 0.0) {
        return Err(Error::Domain(format!(
            "ground eigenvalue must be >= 0, got {lambda_ground}"
        )));
    }
    let c_b = c_b.max(1.0);
    let cb2 = c_b * c_b;
    let g = (1.0 + lambda_ground.sqrt()).powi(2);
    let inner = (1.0 + 1.5 * cb2).max(0.5 * cb2 * g * (5.0 + 3.0 * cb2));
    let d = 2.0 * 2f64.sqrt() * c_b * (c_b * (1.25 * c_b + 1.0) + 1.0).exp() * inner.sqrt();
    let gamma0 = 2.0 * nu + d.ln().max(0.0);
    let zeta2 = PI * PI / 6.0;
    let t_f = horizon.min(zeta2).min(zeta2 * t0);
    let t_1 = t_f / zeta2;
    let r_t = (-6.0 * gamma0 / t_1).exp();
    Ok(BoundConstants {
        c_b,
        nu,
        t0,
        lambda_ground,
        horizon,
        d,
        gamma0,
        t_f,
        t_1,
        r_t,
    })
}
