//! Staged steering to the ground state.
//!
//! The local loop works on the ground-shifted spectrum (ground eigenvalue 0,
//! so the target `phi_g` is stationary). Stage `n` has length
//! `T_n = T_1 / n^2`; it solves the linear null-control problem for the
//! current deviation `v_{n-1}`, applies that control to the full bilinear
//! v-system, and records the quadratic remainder. The original dynamics
//! differ from the shifted ones by the factor `e^{-lambda_g t}` only, so the
//! control carries over unchanged.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::moment::{assemble_with_cap, solve_min_norm, verify_linear_null, MomentOptions};
use crate::sim::{integrate_vw, SimOptions};
use crate::spectral::{half_norm, BoundConstants, EigenSystem, State};

const ZETA2: f64 = PI * PI / 6.0;

/// Dyadic stage schedule `T_j = T_1 / j^2`, `sum_j T_j = T_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub t_f: f64,
    pub t_1: f64,
    pub n_max: usize,
}

impl StageSchedule {
    /// `T_f = min(T, pi^2/6, (pi^2/6) T_0)`; `t0 = None` means no cap from
    /// the control-cost law.
    pub fn new(horizon: f64, t0: Option<f64>, n_max: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if n_max == 0 {
            return Err(Error::Validation("stage cap must be at least 1".into()));
        }
        let mut t_f = horizon.min(ZETA2);
        if let Some(t0) = t0 {
            if !(t0 > 0.0) {
                return Err(Error::Domain(format!("T_0 must be positive, got {t0}")));
            }
            t_f = t_f.min(ZETA2 * t0);
        }
        Ok(Self {
            t_f,
            t_1: t_f / ZETA2,
            n_max,
        })
    }

    pub fn from_constants(c: &BoundConstants, n_max: usize) -> Result<Self> {
        let mut s = Self::new(c.horizon, Some(c.t0), n_max)?;
        s.t_f = c.t_f;
        s.t_1 = c.t_1;
        Ok(s)
    }

    pub fn length(&self, j: usize) -> f64 {
        self.t_1 / (j * j) as f64
    }

    /// `tau_n = sum_{j <= n} T_j`.
    pub fn end(&self, n: usize) -> f64 {
        (1..=n).map(|j| self.length(j)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionMode {
    /// Run every stage; log the theoretical quantities when available.
    Empirical,
    /// Stop when the stage hypothesis `N(T_n) ||v_{n-1}||_{1/2} <= 1` fails.
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub horizon: f64,
    pub n_max: usize,
    pub stop_tol: f64,
    pub mode: AdmissionMode,
    pub moment: MomentOptions,
    pub sim: SimOptions,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_max: 12,
            stop_tol: 1e-10,
            mode: AdmissionMode::Empirical,
            moment: MomentOptions::default(),
            sim: SimOptions::default(),
        }
    }
}

/// Bookkeeping for one stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub v_prev_half: f64,
    pub v_norm0: f64,
    pub v_half: f64,
    pub p_norm: f64,
    /// `||y(T_n)|| / ||v_{n-1}||` of the linear stage problem.
    pub linear_residual: f64,
    /// `||p_n|| / ||v_{n-1}||_{1/2}`.
    pub n_emp: f64,
    /// `||v_n||_{1/2} / ||v_{n-1}||_{1/2}^2`.
    pub k_emp: f64,
    pub sup_v_half: f64,
    pub w_final_half: f64,
    pub dropped_constraints: usize,
    pub refinement_levels: usize,
    /// Natural log of the theoretical ceiling for `||v_n||_{1/2}`.
    pub log_ceiling: Option<f64>,
    /// `||p_n|| <= N(T_n) ||v_{n-1}||_{1/2}`.
    pub cost_hypothesis: Option<bool>,
    /// `N(T_n) ||v_{n-1}||_{1/2} <= 1`.
    pub smallness_hypothesis: Option<bool>,
    pub c11_bound: Option<f64>,
    pub c11_ok: Option<bool>,
    pub k_bound: Option<f64>,
    pub k_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopTrace {
    pub schedule: StageSchedule,
    pub v0_half: f64,
    pub stages: Vec<StageRecord>,
    /// Theoretical total-control bound, when constants were supplied.
    pub control_norm_bound: Option<f64>,
}

impl LoopTrace {
    /// Every logged a-priori bound whose hypotheses held was satisfied.
    pub fn bounds_respected(&self) -> bool {
        self.stages
            .iter()
            .all(|s| s.c11_ok != Some(false) && s.k_ok != Some(false))
    }

    pub fn total_control_norm_sq(&self) -> f64 {
        self.stages.iter().map(|s| s.p_norm * s.p_norm).sum()
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        let flag = |x: Option<bool>| x.map(|v| v.to_string()).unwrap_or_default();
        let mut s = String::from(
            "stage,tau_start,tau_end,v_prev_half,v_norm0,v_half,p_norm,linear_residual,n_emp,k_emp,sup_v_half,w_final_half,dropped,levels,log_ceiling,c11_bound,c11_ok,k_bound,k_ok\n",
        );
        for r in &self.stages {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e},{:.6e},{:.12e},{:.12e},{},{},{},{},{},{},{}\n",
                r.stage,
                r.tau_start,
                r.tau_end,
                r.v_prev_half,
                r.v_norm0,
                r.v_half,
                r.p_norm,
                r.linear_residual,
                r.n_emp,
                r.k_emp,
                r.sup_v_half,
                r.w_final_half,
                r.dropped_constraints,
                r.refinement_levels,
                opt(r.log_ceiling),
                opt(r.c11_bound),
                flag(r.c11_ok),
                opt(r.k_bound),
                flag(r.k_ok),
            ));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LoopStatus {
    /// `||v||_{1/2} <= stop_tol`.
    Converged,
    /// Stage cap reached above tolerance.
    StageCap,
    /// A stage failed; `message` carries the error.
    Failed {
        stage: usize,
        message: String,
        exit_code: i32,
    },
    /// `||v_n||` grew in two consecutive stages.
    Diverged { stage: usize },
}

#[derive(Debug)]
pub struct LoopOutcome {
    /// The applied control on `[0, horizon]` (zero after the last stage).
    pub control: ControlSignal,
    pub trace: LoopTrace,
    pub status: LoopStatus,
    /// Deviation from `phi_g` in ground-shifted coordinates at `tau_end`.
    pub final_deviation: State,
    pub tau_end: f64,
    final_half: f64,
    error: Option<Error>,
}

impl LoopOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.status, LoopStatus::Converged)
    }

    /// `||v||_{1/2}` at `tau_end`, in the shifted frame.
    pub fn final_deviation_half(&self) -> f64 {
        self.final_half
    }

    /// Converts a failed or divergent outcome into its error, keeping
    /// successful ones.
    pub fn into_result(mut self) -> Result<Self> {
        match self.error.take() {
            None => Ok(self),
            Some(e) => Err(e),
        }
    }
}

fn ensure_ground_zero(eig: &EigenSystem) -> Result<EigenSystem> {
    if eig.ground_eigenvalue() == 0.0 {
        Ok(eig.clone())
    } else {
        eig.ground_shifted()
    }
}

/// Runs the staged loop from `u0` (original coordinates, time 0).
///
/// Solver failures and divergence do not raise: they end the loop and are
/// reported in [`LoopOutcome::status`], so the partial trace survives. Use
/// [`LoopOutcome::into_result`] to turn them into errors.
pub fn run_local_loop(
    u0: &State,
    eig: &EigenSystem,
    cfg: &LoopConfig,
    constants: Option<&BoundConstants>,
) -> Result<LoopOutcome> {
    if u0.len() != eig.len() {
        return Err(Error::Dimension {
            expected: eig.len(),
            got: u0.len(),
        });
    }
    let shifted = ensure_ground_zero(eig)?;
    let g = shifted.ground_index();
    let mut v = u0.coeffs.clone();
    v[g] -= 1.0;
    run_shifted(State::new(v), &shifted, cfg, constants)
}

fn run_shifted(
    v0: State,
    eig: &EigenSystem,
    cfg: &LoopConfig,
    constants: Option<&BoundConstants>,
) -> Result<LoopOutcome> {
    let schedule = match constants {
        Some(c) => StageSchedule::from_constants(c, cfg.n_max)?,
        None => StageSchedule::new(cfg.horizon, None, cfg.n_max)?,
    };
    let lambdas = eig.eigenvalues();
    let v0_half = half_norm(&v0.coeffs, lambdas);
    let mut trace = LoopTrace {
        schedule,
        v0_half,
        stages: Vec::new(),
        control_norm_bound: constants.map(|c| c.control_norm_bound()),
    };
    let horizon = cfg.horizon.max(schedule.t_f);
    let mut control: Option<ControlSignal> = None;
    let mut v = v0;
    let mut v_half = v0_half;
    let mut tau = 0.0;
    let mut growth = 0;
    let mut status = LoopStatus::StageCap;
    let mut error = None;

    if v_half <= cfg.stop_tol {
        status = LoopStatus::Converged;
    } else {
        for n in 1..=cfg.n_max {
            let t_n = schedule.length(n);
            match run_stage(n, &v, tau, t_n, eig, cfg, constants) {
                Ok((rec, p, v_next)) => {
                    if cfg.mode == AdmissionMode::Theoretical
                        && rec.smallness_hypothesis == Some(false)
                    {
                        let msg = format!(
                            "stage hypothesis N(T_n) ||v|| <= 1 fails at stage {n} (||v||_1/2 = {v_half:.3e})"
                        );
                        error = Some(Error::StageFailure {
                            stage: n,
                            source: Box::new(Error::Precondition(msg.clone())),
                        });
                        status = LoopStatus::Failed {
                            stage: n,
                            message: msg,
                            exit_code: 3,
                        };
                        break;
                    }
                    let next_half = rec.v_half;
                    control = Some(match control {
                        None => p,
                        Some(c) => c.concat(&p)?,
                    });
                    trace.stages.push(rec);
                    tau += t_n;
                    growth = if next_half > v_half { growth + 1 } else { 0 };
                    v = v_next;
                    v_half = next_half;
                    if next_half <= cfg.stop_tol {
                        status = LoopStatus::Converged;
                        break;
                    }
                    if growth >= 2 {
                        error = Some(Error::Divergence { stage: n });
                        status = LoopStatus::Diverged { stage: n };
                        break;
                    }
                }
                Err(e) => {
                    status = LoopStatus::Failed {
                        stage: n,
                        message: e.to_string(),
                        exit_code: e.exit_code(),
                    };
                    error = Some(Error::StageFailure {
                        stage: n,
                        source: Box::new(e),
                    });
                    break;
                }
            }
        }
    }
    let control = match control {
        Some(c) => c.extended_to(horizon),
        None => ControlSignal::zero(0.0, horizon),
    };
    Ok(LoopOutcome {
        control,
        trace,
        status,
        final_deviation: v,
        tau_end: tau,
        final_half: v_half,
        error,
    })
}

fn run_stage(
    n: usize,
    v: &State,
    tau: f64,
    t_n: f64,
    eig: &EigenSystem,
    cfg: &LoopConfig,
    constants: Option<&BoundConstants>,
) -> Result<(StageRecord, ControlSignal, State)> {
    let lambdas = eig.eigenvalues();
    let v_prev_half = half_norm(&v.coeffs, lambdas);
    let problem = assemble_with_cap(v, eig, t_n, cfg.moment.max_constraints)?;
    let sol = solve_min_norm(&problem, &cfg.moment)?;
    let linear = verify_linear_null(&sol.control, v, eig, t_n)?;
    let p = sol.control.shifted(tau);
    let (vt, wt) = integrate_vw(v, &p, eig, tau, tau + t_n, &cfg.sim)?;
    let v_next = vt.final_state();
    let v_half = vt.final_half();
    let p_norm = p.l2_norm();
    let mut rec = StageRecord {
        stage: n,
        tau_start: tau,
        tau_end: tau + t_n,
        v_prev_half,
        v_norm0: v_next.coeffs.norm(),
        v_half,
        p_norm,
        linear_residual: linear.relative_residual,
        n_emp: p_norm / v_prev_half,
        k_emp: v_half / (v_prev_half * v_prev_half),
        sup_v_half: vt.sup_half(),
        w_final_half: wt.final_half(),
        dropped_constraints: sol.dropped.len(),
        refinement_levels: vt.levels,
        log_ceiling: None,
        cost_hypothesis: None,
        smallness_hypothesis: None,
        c11_bound: None,
        c11_ok: None,
        k_bound: None,
        k_ok: None,
    };
    if let Some(c) = constants {
        let nt = c.n_bound(t_n);
        let cost = p_norm <= nt * v_prev_half;
        let small = nt * v_prev_half <= 1.0;
        rec.log_ceiling = Some(c.log_stage_ceiling(n));
        rec.cost_hypothesis = Some(cost);
        rec.smallness_hypothesis = Some(small);
        let c11 = c.c11(t_n, nt, v_prev_half);
        rec.c11_bound = Some(c11);
        if cost {
            rec.c11_ok = Some(rec.sup_v_half.powi(2) <= c11 * v_prev_half.powi(2) * (1.0 + 1e-9));
        }
        let k = c.k_of(t_n);
        rec.k_bound = Some(k);
        if cost && small {
            rec.k_ok = Some(rec.w_final_half <= k * v_prev_half.powi(2) * (1.0 + 1e-9));
        }
    }
    Ok((rec, p, v_next))
}

/// Second distinct eigenvalue above the ground, measured from the ground.
pub fn second_gap(eig: &EigenSystem) -> Result<f64> {
    let g = eig.ground_eigenvalue();
    eig.eigenvalues()
        .iter()
        .map(|l| l - g)
        .filter(|d| *d > 1e-12 * (1.0 + g.abs()))
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
        .ok_or_else(|| Error::Precondition("no eigenvalue above the ground".into()))
}

/// Outcome of a semi-global run.
#[derive(Debug)]
pub struct SemiglobalOutcome {
    /// Control on `[0, t_dwell + horizon]`.
    pub control: ControlSignal,
    pub local: LoopOutcome,
    pub t_dwell: f64,
    /// `T_R = 1 + t_dwell` for the strip.
    pub t_r: f64,
    /// Time at which the last stage ended.
    pub total_time: f64,
    /// `||(I - P_g) u(t_dwell)||_{1/2}` after the free phase (shifted frame).
    pub orth_after_dwell: f64,
    /// Ground coefficient used for normalisation (1 for the strip).
    pub scale: f64,
}

/// `T_dwell = max(0, log(R^2 / r_1^2) / lambda_2)`.
pub fn dwell_time(radius: f64, log_r1: f64, lambda2: f64) -> f64 {
    ((2.0 * radius.ln() - 2.0 * log_r1) / lambda2).max(0.0)
}

/// Natural log of the local radius at horizon 1, `-6 Gamma_0 / T_1`.
pub fn log_local_radius(c: &BoundConstants) -> f64 {
    -6.0 * c.gamma0 / c.t_1
}

/// Strip strategy: free decay until the orthogonal part enters the local
/// ball, then the local loop on horizon 1.
///
/// `constants` must be evaluated at horizon 1; `r1` overrides the radius
/// `R_{T=1}` derived from them.
pub fn run_semiglobal_strip(
    u0: &State,
    eig: &EigenSystem,
    radius: f64,
    constants: &BoundConstants,
    r1: Option<f64>,
    cfg: &LoopConfig,
) -> Result<SemiglobalOutcome> {
    strip_inner(u0, eig, radius, constants, r1, cfg, 1.0)
}

fn strip_inner(
    u0: &State,
    eig: &EigenSystem,
    radius: f64,
    constants: &BoundConstants,
    r1: Option<f64>,
    cfg: &LoopConfig,
    scale: f64,
) -> Result<SemiglobalOutcome> {
    if u0.len() != eig.len() {
        return Err(Error::Dimension {
            expected: eig.len(),
            got: u0.len(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let shifted = ensure_ground_zero(eig)?;
    let lambdas = shifted.eigenvalues();
    let g = shifted.ground_index();
    let log_r1 = match r1 {
        Some(r) if r > 0.0 => r.ln(),
        Some(r) => return Err(Error::Domain(format!("r1 must be positive, got {r}"))),
        None => log_local_radius(constants),
    };
    let ground_dev = (u0.coeffs[g] - 1.0).abs();
    if ground_dev.ln() >= log_r1 && ground_dev > 0.0 {
        return Err(Error::Precondition(format!(
            "ground coefficient off by {ground_dev:.3e}, outside the strip |c - 1| < r1 = e^{log_r1:.3}"
        )));
    }
    let mut orth = u0.coeffs.clone();
    orth[g] = 0.0;
    let orth_half = half_norm(&orth, lambdas);
    if orth_half > radius * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "orthogonal part {orth_half:.3e} exceeds R = {radius:.3e}"
        )));
    }
    let lambda2 = second_gap(&shifted)?;
    let t_dwell = dwell_time(radius, log_r1, lambda2);
    // Exact free decay in the shifted frame.
    let mut v = DVector::from_iterator(
        lambdas.len(),
        lambdas
            .iter()
            .zip(u0.coeffs.iter())
            .map(|(l, c)| (-l * t_dwell).exp() * c),
    );
    let orth_after = {
        let mut o = v.clone();
        o[g] = 0.0;
        half_norm(&o, lambdas)
    };
    v[g] -= 1.0;
    let loop_cfg = LoopConfig {
        horizon: 1.0,
        ..*cfg
    };
    let local = run_shifted(State::new(v), &shifted, &loop_cfg, Some(constants))?;
    let mut control = local.control.shifted(t_dwell);
    if t_dwell > 0.0 {
        control = ControlSignal::zero(0.0, t_dwell).concat(&control)?;
    }
    let total_time = t_dwell + local.tau_end;
    Ok(SemiglobalOutcome {
        control,
        t_dwell,
        t_r: 1.0 + t_dwell,
        total_time,
        orth_after_dwell: orth_after,
        local,
        scale,
    })
}

/// Cone strategy: normalise by the ground coefficient `c`, steer `u0 / c`
/// through the strip, and rescale. The control is that of the normalised
/// state, since the dynamics are linear in `u` for fixed `p`.
pub fn run_semiglobal_cone(
    u0: &State,
    eig: &EigenSystem,
    radius: f64,
    constants: &BoundConstants,
    r1: Option<f64>,
    cfg: &LoopConfig,
) -> Result<SemiglobalOutcome> {
    if u0.len() != eig.len() {
        return Err(Error::Dimension {
            expected: eig.len(),
            got: u0.len(),
        });
    }
    let g = eig.ground_index();
    let c = u0.coeffs[g];
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Precondition(
            "initial state has no ground component".into(),
        ));
    }
    let mut orth = u0.coeffs.clone();
    orth[g] = 0.0;
    let lambdas: Vec<f64> = eig
        .eigenvalues()
        .iter()
        .map(|l| l - eig.ground_eigenvalue())
        .collect();
    let orth_half = half_norm(&orth, &lambdas);
    if orth_half > radius * c.abs() * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "cone condition fails: {orth_half:.3e} > R |c| = {:.3e}",
            radius * c.abs()
        )));
    }
    let normalised = u0.scaled(1.0 / c);
    strip_inner(&normalised, eig, radius, constants, r1, cfg, c)
}
