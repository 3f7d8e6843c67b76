//! The five model problems on (0, 1): eigen-data of `A`, coupling
//! coefficients of `B`, and numerical checks of the gap and rank hypotheses.
//!
//! | kind                   | A                       | B phi                               |
//! |------------------------|-------------------------|-------------------------------------|
//! | `fp_neumann`           | `-d2/dx2`, Neumann      | `(mu phi)'`                         |
//! | `fp_dirichlet`         | `-d2/dx2`, Dirichlet    | `(mu phi)'`                         |
//! | `heat_neumann_drift`   | `-d2/dx2`, Neumann      | `mu (phi' + phi)`                   |
//! | `degenerate_dirichlet` | `-(x^a u')'`, Dirichlet | `x phi'`                            |
//! | `degenerate_neumann`   | `-(x^a u')'`, Neumann   | `x^{2-a} (phi' + phi)`              |

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BesselBasis};
use crate::bessel::{bessel_j, bessel_j_pair, BesselTable};
use crate::error::{Error, Result};
use crate::quadrature::{graded_breaks, integrate_adaptive, uniform_breaks, CompositeRule};
use crate::spectral::{estimate_cb, EigenSystem, RankParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    FpNeumann,
    FpDirichlet,
    HeatNeumannDrift,
    DegenerateDirichlet,
    DegenerateNeumann,
}

impl ProblemKind {
    pub fn is_degenerate(self) -> bool {
        matches!(self, Self::DegenerateDirichlet | Self::DegenerateNeumann)
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(self, Self::FpDirichlet | Self::DegenerateDirichlet)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::FpNeumann => "fp_neumann",
            Self::FpDirichlet => "fp_dirichlet",
            Self::HeatNeumannDrift => "heat_neumann_drift",
            Self::DegenerateDirichlet => "degenerate_dirichlet",
            Self::DegenerateNeumann => "degenerate_neumann",
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fp_neumann" => Self::FpNeumann,
            "fp_dirichlet" => Self::FpDirichlet,
            "heat_neumann_drift" => Self::HeatNeumannDrift,
            "degenerate_dirichlet" => Self::DegenerateDirichlet,
            "degenerate_neumann" => Self::DegenerateNeumann,
            other => return Err(Error::Validation(format!("unknown problem kind '{other}'"))),
        })
    }
}

/// Drift profile `mu`. Written in configs as `x^n`, `sin(a)`, `0` or
/// `canonical` (the fixed drift of the degenerate problems).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Drift {
    Power(u32),
    Sine(f64),
    Zero,
    Canonical,
}

impl fmt::Display for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Power(n) => write!(f, "x^{n}"),
            Drift::Sine(a) => write!(f, "sin({a})"),
            Drift::Zero => write!(f, "0"),
            Drift::Canonical => write!(f, "canonical"),
        }
    }
}

impl FromStr for Drift {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().replace(' ', "");
        let bad = || {
            Error::Validation(format!(
                "cannot parse drift '{s}' (expected x^n, sin(a), 0 or canonical)"
            ))
        };
        if t == "0" {
            return Ok(Drift::Zero);
        }
        if t == "canonical" {
            return Ok(Drift::Canonical);
        }
        if t == "x" {
            return Ok(Drift::Power(1));
        }
        if let Some(n) = t.strip_prefix("x^") {
            return n.parse().map(Drift::Power).map_err(|_| bad());
        }
        if let Some(inner) = t.strip_prefix("sin(").and_then(|r| r.strip_suffix(')')) {
            let inner = inner
                .strip_suffix("x")
                .or_else(|| inner.strip_suffix("*x"))
                .unwrap_or(inner);
            let inner = inner.strip_suffix('*').unwrap_or(inner);
            let a: f64 = inner.parse().map_err(|_| bad())?;
            if !a.is_finite() {
                return Err(bad());
            }
            return Ok(Drift::Sine(a));
        }
        Err(bad())
    }
}

impl TryFrom<String> for Drift {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Drift> for String {
    fn from(d: Drift) -> String {
        d.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub drift: Drift,
    /// Degeneracy exponent; ignored by the non-degenerate kinds.
    pub alpha: f64,
    pub truncation: usize,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, drift: Drift, alpha: f64, truncation: usize) -> Self {
        Self {
            kind,
            drift,
            alpha,
            truncation,
        }
    }

    pub fn fp_neumann(drift: Drift, k: usize) -> Self {
        Self::new(ProblemKind::FpNeumann, drift, 0.0, k)
    }

    pub fn fp_dirichlet(drift: Drift, k: usize) -> Self {
        Self::new(ProblemKind::FpDirichlet, drift, 0.0, k)
    }

    pub fn heat_neumann_drift(drift: Drift, k: usize) -> Self {
        Self::new(ProblemKind::HeatNeumannDrift, drift, 0.0, k)
    }

    pub fn degenerate_dirichlet(alpha: f64, k: usize) -> Self {
        Self::new(ProblemKind::DegenerateDirichlet, Drift::Canonical, alpha, k)
    }

    pub fn degenerate_neumann(alpha: f64, k: usize) -> Self {
        Self::new(ProblemKind::DegenerateNeumann, Drift::Canonical, alpha, k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation == 0 {
            return Err(Error::Validation("truncation must be at least 1".into()));
        }
        if self.truncation > 512 {
            return Err(Error::Validation(format!(
                "truncation {} too large (max 512)",
                self.truncation
            )));
        }
        match self.kind {
            ProblemKind::DegenerateDirichlet | ProblemKind::DegenerateNeumann => {
                let upper_ok = if self.kind == ProblemKind::DegenerateNeumann {
                    self.alpha <= 4.0 / 3.0
                } else {
                    self.alpha < 2.0
                };
                if !(self.alpha >= 0.0 && upper_ok) {
                    let range = if self.kind == ProblemKind::DegenerateNeumann {
                        "[0, 4/3]"
                    } else {
                        "[0, 2)"
                    };
                    return Err(Error::Validation(format!(
                        "alpha = {} outside {range} for {}",
                        self.alpha,
                        self.kind.name()
                    )));
                }
                if !matches!(self.drift, Drift::Canonical | Drift::Zero) {
                    return Err(Error::Validation(format!(
                        "{} has a fixed drift; got '{}'",
                        self.kind.name(),
                        self.drift
                    )));
                }
            }
            _ => {
                if self.drift == Drift::Canonical {
                    return Err(Error::Validation(format!(
                        "{} needs an explicit drift",
                        self.kind.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Storage index 0 is the ground mode; this is its label.
    pub fn label_base(&self) -> usize {
        if self.kind.is_dirichlet() {
            1
        } else {
            0
        }
    }

    fn kappa(&self) -> f64 {
        1.0 - 0.5 * self.alpha
    }

    /// `mu(x)` and `mu'(x)`.
    pub fn mu(&self, x: f64) -> (f64, f64) {
        match self.drift {
            Drift::Zero => (0.0, 0.0),
            Drift::Power(0) => (1.0, 0.0),
            Drift::Power(n) => (x.powi(n as i32), n as f64 * x.powi(n as i32 - 1)),
            Drift::Sine(a) => ((a * x).sin(), a * (a * x).cos()),
            Drift::Canonical => match self.kind {
                ProblemKind::DegenerateNeumann => {
                    let e = 2.0 - self.alpha;
                    (x.powf(e), e * x.powf(e - 1.0))
                }
                _ => (x, 1.0),
            },
        }
    }

    /// `(B phi_m)(x)`.
    pub fn apply_b(&self, basis: &Basis, m: usize, x: f64) -> f64 {
        if self.drift == Drift::Zero {
            return 0.0;
        }
        match self.kind {
            ProblemKind::FpNeumann | ProblemKind::FpDirichlet => {
                let (mu, dmu) = self.mu(x);
                dmu * basis.value(m, x) + mu * basis.derivative(m, x)
            }
            ProblemKind::HeatNeumannDrift => {
                let (mu, _) = self.mu(x);
                mu * (basis.derivative(m, x) + basis.value(m, x))
            }
            ProblemKind::DegenerateDirichlet => basis.value_and_x_derivative(m, x).1,
            ProblemKind::DegenerateNeumann => {
                let (v, xd) = basis.value_and_x_derivative(m, x);
                x.powf(1.0 - self.alpha) * xd + x.powf(2.0 - self.alpha) * v
            }
        }
    }
}

/// Order of the Bessel function in the eigenfunctions and the order whose
/// zeros give the eigenvalues.
fn bessel_orders(spec: &ProblemSpec) -> (f64, f64) {
    let a = spec.alpha;
    match spec.kind {
        ProblemKind::DegenerateDirichlet => {
            let nu = (1.0 - a).abs() / (2.0 - a);
            (nu, nu)
        }
        ProblemKind::DegenerateNeumann => {
            let o = (a - 1.0) / (2.0 - a);
            (o, o + 1.0)
        }
        _ => unreachable!("not a Bessel family"),
    }
}

/// Zeros that generate the spectrum of a degenerate problem.
pub fn bessel_table(spec: &ProblemSpec) -> Result<BesselTable> {
    spec.validate()?;
    if !spec.kind.is_degenerate() {
        return Err(Error::Domain(format!(
            "{} has no Bessel spectrum",
            spec.kind.name()
        )));
    }
    let (_, zero_order) = bessel_orders(spec);
    let count = match spec.kind {
        ProblemKind::DegenerateNeumann => spec.truncation.saturating_sub(1).max(1),
        _ => spec.truncation,
    };
    BesselTable::new(zero_order, count)
}

fn breaks_for(spec: &ProblemSpec) -> Vec<f64> {
    let panels = (2 * spec.truncation).max(16);
    if spec.kind.is_degenerate() {
        graded_breaks(40, 0.25, panels)
    } else {
        uniform_breaks(panels)
    }
}

fn bessel_basis(spec: &ProblemSpec) -> Result<BesselBasis> {
    let (order, _) = bessel_orders(spec);
    let table = bessel_table(spec)?;
    let kappa = spec.kappa();
    let power = 0.5 * (1.0 - spec.alpha);
    let constant_ground = spec.kind == ProblemKind::DegenerateNeumann;
    let zeros = table.zeros;
    let normalizers = match spec.kind {
        ProblemKind::DegenerateDirichlet => zeros
            .iter()
            .map(|j| (2.0 * kappa).sqrt() / bessel_j_pair(order, *j).1.abs())
            .collect(),
        _ => {
            // Unit L2 norm by quadrature.
            let rule =
                CompositeRule::on_breaks(&graded_breaks(40, 0.25, (2 * zeros.len()).max(16)), 20);
            zeros
                .iter()
                .map(|j| {
                    let sq = rule.integrate(|x| {
                        let v = x.powf(power) * bessel_j(order, j * x.powf(kappa));
                        v * v
                    });
                    sq.sqrt().recip()
                })
                .collect()
        }
    };
    Ok(BesselBasis {
        order,
        kappa,
        power,
        zeros,
        normalizers,
        constant_ground,
    })
}

/// Eigenfunction family of a problem.
pub fn basis_for(spec: &ProblemSpec) -> Result<Basis> {
    spec.validate()?;
    Ok(match spec.kind {
        ProblemKind::FpNeumann | ProblemKind::HeatNeumannDrift => Basis::Cosine,
        ProblemKind::FpDirichlet => Basis::Sine,
        _ => Basis::Bessel(bessel_basis(spec)?),
    })
}

fn eigenvalues_for(spec: &ProblemSpec, basis: &Basis) -> Vec<f64> {
    let k = spec.truncation;
    match basis {
        Basis::Cosine => (0..k).map(|i| (i as f64 * PI).powi(2)).collect(),
        Basis::Sine => (1..=k).map(|i| (i as f64 * PI).powi(2)).collect(),
        Basis::Bessel(b) => {
            let mut out = Vec::with_capacity(k);
            if b.constant_ground {
                out.push(0.0);
            }
            out.extend(b.zeros.iter().map(|j| (b.kappa * j).powi(2)));
            out.truncate(k);
            out
        }
    }
}

/// Gap bound the analysis states for a family.
pub fn stated_gap(spec: &ProblemSpec) -> f64 {
    match spec.kind {
        // nu_alpha = |1 - alpha|/(2 - alpha) < 1/2 exactly for alpha < 4/3:
        // zero gaps increase towards pi from j_2 - j_1 >= 7 pi / 8, so the
        // bound is 7 kappa pi / 8 with kappa = (2 - alpha)/2 (>= 7 pi/16 below 1).
        ProblemKind::DegenerateDirichlet if spec.alpha < 1.0 => 7.0 / 16.0 * PI,
        ProblemKind::DegenerateDirichlet if spec.alpha < 4.0 / 3.0 => {
            7.0 / 16.0 * PI * (2.0 - spec.alpha)
        }
        ProblemKind::DegenerateDirichlet | ProblemKind::DegenerateNeumann => {
            (2.0 - spec.alpha) * PI / 2.0
        }
        _ => PI,
    }
}

/// Builds the truncated eigen-system. Fails when some ground coupling
/// `<B phi_ground, phi_k>` vanishes.
pub fn build_problem(spec: &ProblemSpec) -> Result<EigenSystem> {
    let eig = assemble_problem(spec)?;
    check_ground_coupling(&eig)?;
    Ok(eig)
}

/// Eigen-data without the ground-coupling check (for diagnostics).
pub fn assemble_problem(spec: &ProblemSpec) -> Result<EigenSystem> {
    let basis = basis_for(spec)?;
    let eigenvalues = eigenvalues_for(spec, &basis);
    let k = spec.truncation;

    let rule = CompositeRule::on_breaks(&breaks_for(spec), 20);
    let nq = rule.len();
    let mut phi = DMatrix::zeros(nq, k);
    let mut bphi = DMatrix::zeros(nq, k);
    for (q, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let sw = w.sqrt();
        for m in 0..k {
            phi[(q, m)] = sw * basis.value(m, x);
            bphi[(q, m)] = sw * spec.apply_b(&basis, m, x);
        }
    }
    let mut b = bphi.transpose() * &phi;

    // Replace the ground row by closed forms where they exist.
    for kk in 0..k {
        if let Ok(v) = closed_form_with(spec, &basis, kk) {
            b[(0, kk)] = v;
        }
    }

    let mut eig = EigenSystem::new(eigenvalues, b)?
        .with_label_base(spec.label_base())
        .with_basis(basis)
        .with_stated_gap(stated_gap(spec));
    if let Some(rp) = fit_rank_params(&eig) {
        eig = eig.with_rank_params(rp);
    }
    Ok(eig)
}

/// Every `<B phi_ground, phi_k>` must be nonzero.
pub fn check_ground_coupling(eig: &EigenSystem) -> Result<()> {
    let row = eig.ground_coupling();
    let scale = row.amax();
    for (i, v) in row.iter().enumerate() {
        if scale == 0.0 || v.abs() <= 1e-12 * scale {
            return Err(Error::HypothesisViolation {
                k: eig.label(i),
                reason: format!("<B phi_ground, phi_k> = {v:e} vanishes"),
            });
        }
    }
    Ok(())
}

/// Closed-form ground coupling `<B phi_ground, phi_k>` at label `k`.
pub fn b_coeff_closed_form(spec: &ProblemSpec, k: usize) -> Result<f64> {
    spec.validate()?;
    let storage = k.checked_sub(spec.label_base()).ok_or_else(|| {
        Error::Domain(format!(
            "label {k} below the first index {}",
            spec.label_base()
        ))
    })?;
    match spec.kind {
        ProblemKind::DegenerateDirichlet | ProblemKind::DegenerateNeumann => {
            let mut s = *spec;
            s.truncation = storage + 2;
            let basis = basis_for(&s)?;
            closed_form_with(spec, &basis, storage)
        }
        _ => closed_form_with(spec, &Basis::Cosine, storage),
    }
}

fn unsupported(spec: &ProblemSpec) -> Error {
    Error::UnsupportedClosedForm(format!("{} with drift {}", spec.kind.name(), spec.drift))
}

fn closed_form_with(spec: &ProblemSpec, basis: &Basis, storage: usize) -> Result<f64> {
    if spec.drift == Drift::Zero {
        return Ok(0.0);
    }
    let sign = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
    match (spec.kind, spec.drift) {
        (ProblemKind::FpNeumann, Drift::Power(3)) => {
            let k = storage;
            Ok(if k == 0 {
                1.0
            } else {
                6.0 * SQRT_2 * sign(k) / (k as f64 * PI).powi(2)
            })
        }
        (ProblemKind::FpNeumann, Drift::Sine(a)) => {
            let k = storage;
            if k == 0 {
                return Ok(a.sin());
            }
            let d = a * a - (k as f64 * PI).powi(2);
            if d.abs() < 1e-8 {
                return Err(unsupported(spec));
            }
            Ok(SQRT_2 * a * a * a.sin() * sign(k) / d)
        }
        (ProblemKind::FpDirichlet, Drift::Power(1)) => {
            let k = storage + 1;
            Ok(if k == 1 {
                0.5
            } else {
                let kf = k as f64;
                sign(k) * 2.0 * kf / (kf * kf - 1.0)
            })
        }
        (ProblemKind::HeatNeumannDrift, Drift::Power(2)) => {
            let k = storage;
            Ok(if k == 0 {
                1.0 / 3.0
            } else {
                2.0 * SQRT_2 * sign(k) / (k as f64 * PI).powi(2)
            })
        }
        (ProblemKind::DegenerateDirichlet, Drift::Canonical) => {
            let Basis::Bessel(b) = basis else {
                return Err(unsupported(spec));
            };
            if storage == 0 {
                return Ok(-0.5);
            }
            let kappa = b.kappa;
            let (j1, jk) = (b.zeros[0], b.zeros[storage]);
            let (l1, lk) = ((kappa * j1).powi(2), (kappa * jk).powi(2));
            // phi_1'(1) phi_k'(1) = 2 kappa^3 j_1 j_k (-1)^{1+k}, labels from 1
            let prod = 2.0 * kappa.powi(3) * j1 * jk * sign(storage);
            Ok(-prod / (lk - l1))
        }
        (ProblemKind::DegenerateNeumann, Drift::Canonical) => {
            let Basis::Bessel(b) = basis else {
                return Err(unsupported(spec));
            };
            let alpha = spec.alpha;
            if storage == 0 {
                return Ok(1.0 / (3.0 - alpha));
            }
            let i = storage - 1;
            let j = b.zeros[i];
            let lam = (b.kappa * j).powi(2);
            let s = bessel_j(b.order, j).signum();
            Ok((2.0 - alpha).powf(1.5) * s / lam)
        }
        _ => Err(unsupported(spec)),
    }
}

/// `<B phi_m, phi_k>` by adaptive quadrature (`m`, `k` are labels).
pub fn b_coeff_quadrature(spec: &ProblemSpec, m: usize, k: usize) -> Result<f64> {
    spec.validate()?;
    let base = spec.label_base();
    let (Some(sm), Some(sk)) = (m.checked_sub(base), k.checked_sub(base)) else {
        return Err(Error::Domain(format!(
            "labels ({m}, {k}) below the first index {base}"
        )));
    };
    let mut s = *spec;
    s.truncation = s.truncation.max(sm.max(sk) + 1);
    let basis = basis_for(&s)?;
    quadrature_with(spec, &basis, sm, sk)
}

fn quadrature_with(spec: &ProblemSpec, basis: &Basis, sm: usize, sk: usize) -> Result<f64> {
    let (breaks, tol) = if spec.kind.is_degenerate() {
        (graded_breaks(30, 0.25, 8), 1e-8)
    } else {
        (uniform_breaks(8), 1e-12)
    };
    integrate_adaptive(
        |x| spec.apply_b(basis, sm, x) * basis.value(sk, x),
        &breaks,
        tol,
        20_000,
    )
}

/// Gap, rank and embedding measurements for a built system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub gap: f64,
    pub gap_required: Option<f64>,
    pub gap_ok: bool,
    pub rank: Option<RankParams>,
    /// Smallest `|<B phi_ground, phi_k>|` and the label where it occurs.
    pub min_coupling: f64,
    pub min_coupling_label: usize,
    pub rank_ok: bool,
    pub c_b: f64,
    pub truncation: usize,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.gap_ok && self.rank_ok
    }
}

/// Least-squares fit of `log|b_k| ~ log b - q log|lambda_k - lambda_g|`
/// over `k != ground`, with `b` lowered to the worst mode.
pub fn fit_rank_params(eig: &EigenSystem) -> Option<RankParams> {
    let g = eig.ground_index();
    let lg = eig.ground_eigenvalue();
    let row = eig.ground_coupling();
    let pts: Vec<(f64, f64)> = (0..eig.len())
        .filter(|&k| k != g)
        .filter_map(|k| {
            let d = (eig.eigenvalue(k) - lg).abs();
            let b = row[k].abs();
            (d > 0.0 && b > 0.0).then(|| (d.ln(), b.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let q = (-sxy / sxx).max(0.0);
    let b = pts
        .iter()
        .map(|(lx, ly)| (q * lx + ly).exp())
        .fold(f64::INFINITY, f64::min);
    Some(RankParams { q, b })
}

pub fn verify_hypotheses(eig: &EigenSystem) -> HypothesisReport {
    let gap = eig.gap_constant();
    let gap_required = eig.stated_gap();
    let gap_ok = match gap_required {
        Some(r) => gap >= r - 1e-12 * r.max(1.0),
        None => gap > 0.0,
    };
    let row = eig.ground_coupling();
    let (mut min_coupling, mut at) = (f64::INFINITY, 0);
    for (i, v) in row.iter().enumerate() {
        if v.abs() < min_coupling {
            min_coupling = v.abs();
            at = i;
        }
    }
    let rank = fit_rank_params(eig).or(eig.rank_params());
    let rank_ok = min_coupling > 1e-12 * row.amax() && rank.is_some_and(|r| r.b > 0.0);
    HypothesisReport {
        gap,
        gap_required,
        gap_ok,
        rank,
        min_coupling,
        min_coupling_label: eig.label(at),
        rank_ok,
        c_b: estimate_cb(eig),
        truncation: eig.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fp_neumann_eigenvalues() {
        let eig = build_problem(&ProblemSpec::fp_neumann(Drift::Power(3), 8)).unwrap();
        assert_eq!(eig.eigenvalue(0), 0.0);
        assert!((eig.eigenvalue(3) - 9.0 * PI * PI).abs() < 1e-12);
        assert_eq!(eig.label(0), 0);
    }

    #[test]
    fn dirichlet_labels_start_at_one() {
        let eig = build_problem(&ProblemSpec::fp_dirichlet(Drift::Power(1), 4)).unwrap();
        assert_eq!(eig.label(0), 1);
        assert!((eig.eigenvalue(0) - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_listed_values() {
        let d = ProblemSpec::fp_dirichlet(Drift::Power(1), 8);
        assert_eq!(b_coeff_closed_form(&d, 1).unwrap(), 0.5);
        assert!((b_coeff_closed_form(&d, 4).unwrap() - 8.0 / 15.0).abs() < 1e-15);
        let h = ProblemSpec::heat_neumann_drift(Drift::Power(2), 8);
        assert!((b_coeff_closed_form(&h, 0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let n = ProblemSpec::degenerate_neumann(0.5, 8);
        assert!((b_coeff_closed_form(&n, 0).unwrap() - 1.0 / 2.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_unsupported() {
        let s = ProblemSpec::fp_dirichlet(Drift::Power(2), 8);
        assert!(matches!(
            b_coeff_closed_form(&s, 2),
            Err(Error::UnsupportedClosedForm(_))
        ));
    }

    #[test]
    fn second_dirichlet_coupling_sign() {
        // <(x phi_1)', phi_2> = 2 pi int x cos(pi x) sin(2 pi x) dx = 4/3
        let s = ProblemSpec::fp_dirichlet(Drift::Power(1), 4);
        let q = b_coeff_quadrature(&s, 1, 2).unwrap();
        assert!((q - 4.0 / 3.0).abs() < 1e-10);
        // and the transposed entry carries the opposite sign
        let qt = b_coeff_quadrature(&s, 2, 1).unwrap();
        assert!((qt + 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn zero_drift_quadrature_vanishes() {
        for s in [
            ProblemSpec::fp_neumann(Drift::Zero, 4),
            ProblemSpec::heat_neumann_drift(Drift::Zero, 4),
            ProblemSpec::new(ProblemKind::DegenerateDirichlet, Drift::Zero, 0.5, 4),
        ] {
            let b = s.label_base();
            assert_eq!(b_coeff_quadrature(&s, b, b + 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_strong_neumann_degeneracy() {
        let s = ProblemSpec::degenerate_neumann(1.5, 8);
        assert!(matches!(build_problem(&s), Err(Error::Validation(_))));
    }

    #[test]
    fn linear_fp_neumann_violates_rank() {
        // mu = x gives (mu phi_0)' = 1, orthogonal to every cosine mode.
        let s = ProblemSpec::fp_neumann(Drift::Power(1), 4);
        assert!(matches!(
            build_problem(&s),
            Err(Error::HypothesisViolation { k: 1, .. })
        ));
    }

    #[test]
    fn drift_parsing_round_trip() {
        for d in [
            Drift::Power(3),
            Drift::Sine(2.5),
            Drift::Zero,
            Drift::Canonical,
        ] {
            assert_eq!(d.to_string().parse::<Drift>().unwrap(), d);
        }
        assert_eq!("sin(2x)".parse::<Drift>().unwrap(), Drift::Sine(2.0));
        assert!("cos(x)".parse::<Drift>().is_err());
    }
}
