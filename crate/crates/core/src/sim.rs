//! Time integration of the truncated bilinear system
//! `u_k' = -lambda_k u_k - p(t) (B^T u)_k` and its two auxiliary forms:
//!
//! - the v-system, `v' + A v + p B v + p e^{-lambda_g t} B phi_g = 0`, i.e. the
//!   deviation `v = u - psi_g` from the free ground evolution;
//! - the w-system, `w' + A w + p B v = 0, w(t0) = 0`, integrated jointly with v.
//!
//! The scheme is ETDRK4 (Cox–Matthews), exact on the diagonal part, with
//! substeps aligned to the control's linear pieces so that `p` is smooth
//! inside every step. Each run is repeated with doubled substeps until two
//! successive levels agree to a relative tolerance in the `D(A^{1/2})` norm.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::{ControlSignal, Segment};
use crate::error::{Error, Result};
use crate::spectral::{half_norm, EigenSystem, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Relative successive-refinement tolerance in the 1/2-norm.
    pub tol: f64,
    /// Maximum number of step doublings.
    pub max_levels: usize,
    /// Bound on `h * |p| * ||B||` for the base step.
    pub stability: f64,
    /// Minimum base substeps per control piece.
    pub min_substeps: usize,
    /// Budget of substeps for a single refinement level.
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_levels: 8,
            stability: 0.5,
            min_substeps: 1,
            max_steps: 2_000_000,
        }
    }
}

/// States of one integration, sampled on the base substep grid.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub norms0: Vec<f64>,
    pub norms_half: Vec<f64>,
    pub control: ControlSignal,
    /// Step doublings used by the accepted solution.
    pub levels: usize,
    /// Relative difference between the last two levels.
    pub achieved: f64,
}

impl TrajectoryRecord {
    fn build(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        lambdas: &[f64],
        control: ControlSignal,
    ) -> Self {
        let norms0 = states.iter().map(|s| s.norm()).collect();
        let norms_half = states.iter().map(|s| half_norm(s, lambdas)).collect();
        Self {
            times,
            states,
            norms0,
            norms_half,
            control,
            levels: 0,
            achieved: 0.0,
        }
    }

    pub fn initial_state(&self) -> State {
        State::new(self.states[0].clone())
    }

    pub fn final_state(&self) -> State {
        State::new(self.states[self.states.len() - 1].clone())
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn sup_half(&self) -> f64 {
        self.norms_half.iter().copied().fold(0.0, f64::max)
    }

    pub fn final_half(&self) -> f64 {
        self.norms_half[self.norms_half.len() - 1]
    }

    /// CSV with columns `t, norm0, dev_half, p`, where `dev_half` is the
    /// 1/2-norm distance to `ground` evolved freely (or the norm itself if
    /// `ground` is `None`).
    pub fn to_csv(&self, eig: &EigenSystem, ground: Option<&State>) -> String {
        let mut out = String::from("t,norm0,dev_half,p\n");
        for (i, t) in self.times.iter().enumerate() {
            let dev = match ground {
                Some(g) => {
                    let decay = (-eig.ground_eigenvalue() * t).exp();
                    half_norm(&(&self.states[i] - &g.coeffs * decay), eig.eigenvalues())
                }
                None => self.norms_half[i],
            };
            let _ = writeln!(
                out,
                "{t:.12e},{:.12e},{dev:.12e},{:.12e}",
                self.norms0[i],
                self.control.value_at(*t)
            );
        }
        out
    }
}

/// `phi_1, phi_2, phi_3` of the ETD family at `z <= 0`.
fn phi123(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1.0 {
        // phi_k(z) = sum_n z^n / (n + k)!
        let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
        let mut zn = 1.0;
        let mut f1 = 1.0; // 1/(n+1)!
        let mut f2 = 0.5; // 1/(n+2)!
        let mut f3 = 1.0 / 6.0; // 1/(n+3)!
        for n in 0..30 {
            p1 += zn * f1;
            p2 += zn * f2;
            p3 += zn * f3;
            let nf = n as f64;
            zn *= z;
            f1 /= nf + 2.0;
            f2 /= nf + 3.0;
            f3 /= nf + 4.0;
        }
        (p1, p2, p3)
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
        (p1, p2, p3)
    }
}

/// Per-step coefficients for a fixed step `h`.
struct Coeffs {
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl Coeffs {
    fn new(lambdas: &[f64], h: f64) -> Self {
        let n = lambdas.len();
        let mut c = Coeffs {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &l in lambdas {
            let z = -l * h;
            c.e.push(z.exp());
            c.e2.push((0.5 * z).exp());
            c.q.push(0.5 * h * phi123(0.5 * z).0);
            let (p1, p2, p3) = phi123(z);
            c.f1.push(h * (p1 - 3.0 * p2 + 4.0 * p3));
            c.f2.push(h * (p2 - 2.0 * p3));
            c.f3.push(h * (-p2 + 4.0 * p3));
        }
        c
    }
}

/// Which auxiliary terms the right-hand side carries.
#[derive(Clone, Copy)]
enum Mode {
    Plain,
    Source,
    SourceJoint,
}

struct Engine<'a> {
    k: usize,
    lambdas: Vec<f64>,
    op: &'a DMatrix<f64>,
    source: DVector<f64>,
    lambda_g: f64,
    mode: Mode,
    op_scale: f64,
}

impl Engine<'_> {
    fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// Nonlinear part at time `t` with control value `p`.
    fn rhs(&self, y: &DVector<f64>, t: f64, p: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        if p == 0.0 {
            return out;
        }
        let v = y.rows(0, self.k);
        let bv = self.op * v;
        match self.mode {
            Mode::Plain => out.copy_from(&(bv * -p)),
            Mode::Source | Mode::SourceJoint => {
                let s = (-self.lambda_g * t).exp();
                let nv = (&bv + &self.source * s) * -p;
                out.rows_mut(0, self.k).copy_from(&nv);
                if matches!(self.mode, Mode::SourceJoint) {
                    out.rows_mut(self.k, self.k).copy_from(&(bv * -p));
                }
            }
        }
        out
    }

    fn step(&self, y: &DVector<f64>, t: f64, h: f64, seg: &Segment, c: &Coeffs) -> DVector<f64> {
        let pm = seg.at(t + 0.5 * h);
        let nu = self.rhs(y, t, seg.at(t));
        let mut a = y.clone();
        for i in 0..self.dim() {
            a[i] = c.e2[i] * y[i] + c.q[i] * nu[i];
        }
        let na = self.rhs(&a, t + 0.5 * h, pm);
        let mut b = y.clone();
        for i in 0..self.dim() {
            b[i] = c.e2[i] * y[i] + c.q[i] * na[i];
        }
        let nb = self.rhs(&b, t + 0.5 * h, pm);
        let mut cc = y.clone();
        for i in 0..self.dim() {
            cc[i] = c.e2[i] * a[i] + c.q[i] * (2.0 * nb[i] - nu[i]);
        }
        let nc = self.rhs(&cc, t + h, seg.at(t + h));
        let mut out = y.clone();
        for i in 0..self.dim() {
            out[i] =
                c.e[i] * y[i] + c.f1[i] * nu[i] + 2.0 * c.f2[i] * (na[i] + nb[i]) + c.f3[i] * nc[i];
        }
        out
    }

    fn base_substeps(&self, seg: &Segment, opts: &SimOptions) -> usize {
        let pmax = seg.p0.abs().max(seg.p1.abs());
        let n = (seg.len() * pmax * self.op_scale / opts.stability).ceil();
        (n as usize).max(opts.min_substeps).max(1)
    }

    /// One pass at refinement `level`, sampled at the base grid.
    fn run(
        &self,
        y0: &DVector<f64>,
        pieces: &[Segment],
        level: usize,
        opts: &SimOptions,
    ) -> (Vec<f64>, Vec<DVector<f64>>) {
        let mut times = vec![pieces[0].t0];
        let mut states = vec![y0.clone()];
        let mut y = y0.clone();
        let sub = 1usize << level;
        for seg in pieces {
            let nb = self.base_substeps(seg, opts);
            let n = nb * sub;
            let h = seg.len() / n as f64;
            let c = Coeffs::new(&self.lambdas, h);
            for i in 0..n {
                let t = seg.t0 + i as f64 * h;
                y = self.step(&y, t, h, seg, &c);
                if (i + 1) % sub == 0 {
                    times.push(if i + 1 == n {
                        seg.t1
                    } else {
                        seg.t0 + (i + 1) as f64 * h
                    });
                    states.push(y.clone());
                }
            }
        }
        (times, states)
    }

    fn integrate(
        &self,
        y0: &DVector<f64>,
        p: &ControlSignal,
        t0: f64,
        t1: f64,
        opts: &SimOptions,
    ) -> Result<(Vec<f64>, Vec<DVector<f64>>, usize, f64)> {
        let pieces = p.pieces(t0, t1);
        let (times, mut prev) = self.run(y0, &pieces, 0, opts);
        let mut achieved = f64::INFINITY;
        let base: usize = pieces.iter().map(|s| self.base_substeps(s, opts)).sum();
        for level in 1..=opts.max_levels {
            if base << level > opts.max_steps {
                return Err(Error::Integration {
                    achieved,
                    levels: level - 1,
                });
            }
            let (_, next) = self.run(y0, &pieces, level, opts);
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for (a, b) in prev.iter().zip(&next) {
                diff = diff.max(self.norm(&(a - b)));
                scale = scale.max(self.norm(b));
            }
            achieved = if scale > 0.0 { diff / scale } else { 0.0 };
            prev = next;
            if achieved <= opts.tol {
                return Ok((times, prev, level, achieved));
            }
        }
        Err(Error::Integration {
            achieved,
            levels: opts.max_levels,
        })
    }

    fn norm(&self, y: &DVector<f64>) -> f64 {
        y.iter()
            .zip(&self.lambdas)
            .map(|(u, l)| (1.0 + l) * u * u)
            .sum::<f64>()
            .sqrt()
    }
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::Domain(format!(
            "empty integration interval [{t0}, {t1}]"
        )));
    }
    Ok(())
}

fn check_len(s: &State, eig: &EigenSystem) -> Result<()> {
    if s.len() != eig.len() {
        return Err(Error::Dimension {
            expected: eig.len(),
            got: s.len(),
        });
    }
    Ok(())
}

fn engine(eig: &EigenSystem, mode: Mode) -> Engine<'_> {
    let k = eig.len();
    let mut lambdas = eig.eigenvalues().to_vec();
    if matches!(mode, Mode::SourceJoint) {
        lambdas.extend_from_slice(eig.eigenvalues());
    }
    let source = match mode {
        Mode::Plain => DVector::zeros(k),
        _ => eig.ground_coupling(),
    };
    Engine {
        k,
        lambdas,
        op: eig.operator(),
        source,
        lambda_g: eig.ground_eigenvalue(),
        mode,
        op_scale: eig.operator().norm().max(f64::MIN_POSITIVE),
    }
}

/// Solves `u' + A u + p B u = 0` on `[t0, t1]` from `u(t0) = u0`.
pub fn integrate_bilinear(
    u0: &State,
    p: &ControlSignal,
    eig: &EigenSystem,
    t0: f64,
    t1: f64,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    check_interval(t0, t1)?;
    check_len(u0, eig)?;
    let e = engine(eig, Mode::Plain);
    let (times, states, levels, achieved) = e.integrate(&u0.coeffs, p, t0, t1, opts)?;
    let mut rec = TrajectoryRecord::build(times, states, eig.eigenvalues(), p.clone());
    rec.levels = levels;
    rec.achieved = achieved;
    Ok(rec)
}

/// Solves the v-system on `[t0, t1]` from `v(t0) = v0`. The source is
/// `p(t) e^{-lambda_g t} B phi_g`, with absolute time `t`.
pub fn integrate_v_system(
    v0: &State,
    p: &ControlSignal,
    eig: &EigenSystem,
    t0: f64,
    t1: f64,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    check_interval(t0, t1)?;
    check_len(v0, eig)?;
    let e = engine(eig, Mode::Source);
    let (times, states, levels, achieved) = e.integrate(&v0.coeffs, p, t0, t1, opts)?;
    let mut rec = TrajectoryRecord::build(times, states, eig.eigenvalues(), p.clone());
    rec.levels = levels;
    rec.achieved = achieved;
    Ok(rec)
}

/// Integrates v and w jointly on `[t0, t1]` with `w(t0) = 0`.
pub fn integrate_vw(
    v0: &State,
    p: &ControlSignal,
    eig: &EigenSystem,
    t0: f64,
    t1: f64,
    opts: &SimOptions,
) -> Result<(TrajectoryRecord, TrajectoryRecord)> {
    check_interval(t0, t1)?;
    check_len(v0, eig)?;
    let k = eig.len();
    let e = engine(eig, Mode::SourceJoint);
    let mut y0 = DVector::zeros(2 * k);
    y0.rows_mut(0, k).copy_from(&v0.coeffs);
    let (times, states, levels, achieved) = e.integrate(&y0, p, t0, t1, opts)?;
    let vs: Vec<DVector<f64>> = states.iter().map(|y| y.rows(0, k).into_owned()).collect();
    let ws: Vec<DVector<f64>> = states.iter().map(|y| y.rows(k, k).into_owned()).collect();
    let mut v = TrajectoryRecord::build(times.clone(), vs, eig.eigenvalues(), p.clone());
    let mut w = TrajectoryRecord::build(times, ws, eig.eigenvalues(), p.clone());
    for r in [&mut v, &mut w] {
        r.levels = levels;
        r.achieved = achieved;
    }
    Ok((v, w))
}

/// The w-system `w' + A w + p B v = 0, w = 0` at the start of `v_traj`.
/// v is re-integrated alongside w from the record's initial state.
pub fn integrate_w_system(
    v_traj: &TrajectoryRecord,
    p: &ControlSignal,
    eig: &EigenSystem,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    Ok(integrate_vw(
        &v_traj.initial_state(),
        p,
        eig,
        v_traj.start(),
        v_traj.end(),
        opts,
    )?
    .1)
}

/// Fixed-step run (no refinement), `steps` substeps per control piece; for
/// convergence-order studies.
pub fn integrate_bilinear_fixed(
    u0: &State,
    p: &ControlSignal,
    eig: &EigenSystem,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<State> {
    check_interval(t0, t1)?;
    check_len(u0, eig)?;
    let e = engine(eig, Mode::Plain);
    let opts = SimOptions {
        min_substeps: steps,
        stability: f64::INFINITY,
        ..Default::default()
    };
    let pieces = p.pieces(t0, t1);
    let (_, states) = e.run(&u0.coeffs, &pieces, 0, &opts);
    Ok(State::new(states[states.len() - 1].clone()))
}
