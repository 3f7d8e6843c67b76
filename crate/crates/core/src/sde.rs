//! Particle view of the Fokker–Planck problems: Euler–Maruyama for
//! `dX = p(t) mu~(X) dt + sqrt(2) dW`, with fold reflection at the ends of
//! [0, 1], killing, or no boundary at all.
//!
//! Every particle owns a ChaCha8 stream (`seed`, particle index, epoch), so
//! results do not depend on how particles are split across threads.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::Basis;
use crate::catalog::{Drift, ProblemSpec};
use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Fold the post-step position back into [0, 1].
    PartialReflect,
    /// Remove particles that leave [0, 1].
    Absorb,
    /// No boundary.
    FreeLine,
}

/// `mu` on [0, 1] extended by its boundary values (continuous, same
/// Lipschitz constant), or used as is on the whole line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftExtension {
    pub drift: Drift,
    pub clamp: bool,
}

impl DriftExtension {
    pub fn new(drift: Drift) -> Self {
        Self { drift, clamp: true }
    }

    /// `mu` itself on the real line, for drifts that are globally Lipschitz.
    pub fn unbounded(drift: Drift) -> Self {
        Self {
            drift,
            clamp: false,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = if self.clamp { x.clamp(0.0, 1.0) } else { x };
        match self.drift {
            Drift::Zero => 0.0,
            Drift::Power(n) => x.powi(n as i32),
            Drift::Sine(a) => (a * x).sin(),
            Drift::Canonical => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InitialLaw {
    Uniform,
    Point {
        x: f64,
    },
    /// Density `1 + a sqrt(2) cos(pi x)` on [0, 1], `|a| <= 1/2`.
    Cosine {
        a: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
}

impl InitialLaw {
    /// The density `1 + (sqrt 2 / 2) cos(pi x)`.
    pub fn default_cosine() -> Self {
        InitialLaw::Cosine { a: 0.5 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            InitialLaw::Cosine { a } if !(a.abs() <= 0.5) => Err(Error::Validation(format!(
                "cosine amplitude {a} would make the density negative"
            ))),
            InitialLaw::Normal { sd, .. } if !(sd >= 0.0) => {
                Err(Error::Validation(format!("negative sd {sd}")))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            InitialLaw::Uniform => rng.random::<f64>(),
            InitialLaw::Point { x } => x,
            InitialLaw::Cosine { a } => {
                let top = 1.0 + a.abs() * SQRT_2;
                loop {
                    let x: f64 = rng.random();
                    let u: f64 = rng.random::<f64>() * top;
                    if u <= 1.0 + a * SQRT_2 * (PI * x).cos() {
                        return x;
                    }
                }
            }
            InitialLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
        }
    }

    /// Galerkin coefficients in the cosine basis, when the law has a
    /// finite expansion.
    pub fn cosine_coefficients(&self, k: usize) -> Option<Vec<f64>> {
        let mut c = vec![0.0; k];
        match *self {
            InitialLaw::Uniform => c[0] = 1.0,
            InitialLaw::Cosine { a } => {
                c[0] = 1.0;
                if k > 1 {
                    c[1] = a;
                }
            }
            _ => return None,
        }
        Some(c)
    }
}

fn particle_rng(seed: u64, particle: usize, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(particle as u64);
    rng
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub initial: Vec<f64>,
    pub alive: Vec<bool>,
    pub seed: u64,
    pub time: f64,
    /// Simulation calls so far; selects fresh random streams.
    pub epoch: u64,
    pub reflections: u64,
    pub absorptions: u64,
    /// Per-particle `sup_s |X_s|^2` over the last simulation.
    pub sup_sq: Vec<f64>,
    /// Per-particle `sup_s |X_s - X_0|^2` over the last simulation.
    pub sup_incr_sq: Vec<f64>,
    /// Whether `dt` resolved every control piece of the last run.
    pub grid_resolved: bool,
}

impl ParticleEnsemble {
    pub fn sample(law: &InitialLaw, n: usize, seed: u64) -> Result<Self> {
        law.validate()?;
        if n == 0 {
            return Err(Error::Validation(
                "ensemble needs at least one particle".into(),
            ));
        }
        let positions: Vec<f64> = (0..n)
            .map(|i| law.sample(&mut particle_rng(seed, i, u64::MAX)))
            .collect();
        Ok(Self {
            initial: positions.clone(),
            alive: vec![true; n],
            sup_sq: positions.iter().map(|x| x * x).collect(),
            sup_incr_sq: vec![0.0; n],
            positions,
            seed,
            time: 0.0,
            epoch: 0,
            reflections: 0,
            absorptions: 0,
            grid_resolved: true,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }
}

/// Per-particle result of one run.
struct Track {
    x: f64,
    alive: bool,
    folds: u64,
    bad_steps: u64,
    sup_sq: f64,
    sup_incr_sq: f64,
}

fn fold(mut x: f64) -> (f64, u32) {
    let mut n = 0;
    loop {
        if x < 0.0 {
            x = -x;
        } else if x > 1.0 {
            x = 2.0 - x;
        } else {
            return (x, n);
        }
        n += 1;
        if n > 64 {
            // Pathological step; land inside anyway.
            return (x.rem_euclid(2.0).min(2.0 - x.rem_euclid(2.0)), n);
        }
    }
}

struct RunSpec<'a> {
    increments: &'a [f64],
    drift: DriftExtension,
    regime: Regime,
    sqrt_dt: f64,
}

fn track(x0: f64, start: f64, mut rng: ChaCha8Rng, spec: &RunSpec) -> Track {
    let mut x = start;
    let mut t = Track {
        x,
        alive: true,
        folds: 0,
        bad_steps: 0,
        sup_sq: x * x,
        sup_incr_sq: (x - x0).powi(2),
    };
    for &ip in spec.increments {
        let z: f64 = rng.sample(StandardNormal);
        x += ip * spec.drift.value(x) + SQRT_2 * spec.sqrt_dt * z;
        match spec.regime {
            Regime::PartialReflect => {
                let (y, n) = fold(x);
                x = y;
                t.folds += n as u64;
                if n > 2 {
                    t.bad_steps += 1;
                }
            }
            Regime::Absorb => {
                if !(0.0..=1.0).contains(&x) {
                    t.alive = false;
                    t.x = x;
                    return t;
                }
            }
            Regime::FreeLine => {}
        }
        t.sup_sq = t.sup_sq.max(x * x);
        t.sup_incr_sq = t.sup_incr_sq.max((x - x0).powi(2));
    }
    t.x = x;
    t
}

/// Advances `ensemble` by `horizon` with step `dt`. The drift increment of
/// each step is `mu~(X) int_t^{t+dt} p`, exact for the piecewise-linear
/// control.
pub fn simulate_ensemble(
    ensemble: &ParticleEnsemble,
    p: &ControlSignal,
    drift: DriftExtension,
    regime: Regime,
    dt: f64,
    horizon: f64,
    threads: usize,
) -> Result<ParticleEnsemble> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("dt must be positive, got {dt}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Validation(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let steps = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let t0 = ensemble.time;
    let increments: Vec<f64> = (0..steps)
        .map(|i| p.integral(t0 + i as f64 * h, t0 + (i + 1) as f64 * h))
        .collect();
    let min_piece = p
        .pieces(t0, t0 + horizon)
        .iter()
        .map(|s| s.len())
        .fold(f64::INFINITY, f64::min);
    let spec = RunSpec {
        increments: &increments,
        drift,
        regime,
        sqrt_dt: h.sqrt(),
    };
    let n = ensemble.len();
    let epoch = ensemble.epoch;
    let seed = ensemble.seed;
    let run = |i: usize| -> Option<Track> {
        if !ensemble.alive[i] {
            return None;
        }
        Some(track(
            ensemble.initial[i],
            ensemble.positions[i],
            particle_rng(seed, i, epoch),
            &spec,
        ))
    };
    let threads = threads.max(1).min(n);
    let tracks: Vec<Option<Track>> = if threads == 1 {
        (0..n).map(run).collect()
    } else {
        let chunk = n.div_ceil(threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|w| {
                    let run = &run;
                    s.spawn(move || {
                        (w * chunk..((w + 1) * chunk).min(n))
                            .map(run)
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };
    let mut out = ensemble.clone();
    out.time = t0 + horizon;
    out.epoch += 1;
    out.grid_resolved = min_piece >= h * (1.0 - 1e-12);
    let mut bad = 0u64;
    for (i, tr) in tracks.into_iter().enumerate() {
        let Some(tr) = tr else { continue };
        out.positions[i] = tr.x;
        out.sup_sq[i] = tr.sup_sq;
        out.sup_incr_sq[i] = tr.sup_incr_sq;
        out.reflections += tr.folds;
        bad += tr.bad_steps;
        if !tr.alive {
            out.alive[i] = false;
            out.absorptions += 1;
        }
    }
    let fraction = bad as f64 / (steps as f64 * n as f64);
    if fraction > 1e-3 {
        return Err(Error::StepSize {
            fraction: 100.0 * fraction,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub counts: Vec<u64>,
    /// Particles used for normalisation.
    pub normaliser: usize,
    pub warning: Option<String>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn mass(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_center,density,count\n");
        for ((c, d), n) in self.centers().iter().zip(&self.density).zip(&self.counts) {
            s.push_str(&format!("{c:.6},{d:.12e},{n}\n"));
        }
        s
    }

    /// `sum_b |h_b - g_b| width_b`.
    pub fn l1_distance(&self, bin_density: &[f64]) -> f64 {
        self.density
            .iter()
            .zip(bin_density)
            .zip(self.edges.windows(2))
            .map(|((a, b), w)| (a - b).abs() * (w[1] - w[0]))
            .sum()
    }
}

/// Histogram of alive particles on [0, 1]. The absorbing regime normalises
/// by the initial count, so lost mass shows; otherwise by the alive count.
pub fn estimate_density(
    ensemble: &ParticleEnsemble,
    bins: usize,
    regime: Regime,
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Validation("need at least one bin".into()));
    }
    let mut counts = vec![0u64; bins];
    let mut alive = 0usize;
    for (x, a) in ensemble.positions.iter().zip(&ensemble.alive) {
        if !a {
            continue;
        }
        alive += 1;
        if (0.0..=1.0).contains(x) {
            let b = ((x * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let normaliser = match regime {
        Regime::Absorb => ensemble.len(),
        _ => alive,
    };
    let width = 1.0 / bins as f64;
    let density = counts
        .iter()
        .map(|c| {
            if normaliser > 0 {
                *c as f64 / (normaliser as f64 * width)
            } else {
                0.0
            }
        })
        .collect();
    let warning = (alive < 1000).then(|| {
        format!("only {alive} alive particles; the histogram is statistically unreliable")
    });
    Ok(Histogram {
        edges: (0..=bins).map(|i| i as f64 * width).collect(),
        density,
        counts,
        normaliser,
        warning,
    })
}

/// Bin averages of the Galerkin density `sum_k c_k phi_k`.
pub fn galerkin_bin_density(basis: &Basis, coeffs: &[f64], bins: usize) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(12);
    let width = 1.0 / bins as f64;
    (0..bins)
        .map(|b| {
            let a = b as f64 * width;
            let s: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(x, w)| 0.5 * w * basis.synthesize(coeffs, a + 0.5 * width * (x + 1.0)))
                .sum();
            s
        })
        .collect()
}

/// Mass balance of a Galerkin state: returns `(d/dt int u, -p [mu u]_0^1)`
/// for the partially reflecting problem, the first from the mode-0 equation
/// and the second from boundary evaluations of the truncated density.
pub fn mass_balance(
    spec: &ProblemSpec,
    basis: &Basis,
    operator_row0: &[f64],
    coeffs: &[f64],
    p: f64,
) -> (f64, f64) {
    let rate = -p
        * operator_row0
            .iter()
            .zip(coeffs)
            .map(|(b, c)| b * c)
            .sum::<f64>();
    let u1 = basis.synthesize(coeffs, 1.0);
    let u0 = basis.synthesize(coeffs, 0.0);
    let flux = -p * (spec.mu(1.0).0 * u1 - spec.mu(0.0).0 * u0);
    (rate, flux)
}

/// Monte Carlo sup statistics on the free line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AprioriReport {
    pub times: Vec<f64>,
    /// `E sup_{s <= t} |X_s|^2`.
    pub sup_sq: Vec<f64>,
    /// `E sup_{s <= t} |X_s - X_0|^2`.
    pub sup_incr_sq: Vec<f64>,
    pub second_moment_x0: f64,
    /// Log-log slope of `sup_incr_sq` against `t`.
    pub incr_slope: f64,
    /// Estimates nondecreasing in `t`.
    pub monotone: bool,
}

pub fn check_apriori_bounds(
    law: &InitialLaw,
    n: usize,
    seed: u64,
    p: &ControlSignal,
    drift: DriftExtension,
    dt: f64,
    times: &[f64],
    threads: usize,
) -> Result<AprioriReport> {
    if times.len() < 2 {
        return Err(Error::Validation("need at least two times".into()));
    }
    let ens = ParticleEnsemble::sample(law, n, seed)?;
    let second_moment_x0 = ens.initial.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let mut sup_sq = Vec::new();
    let mut sup_incr = Vec::new();
    for &t in times {
        // Same streams for every horizon: paths are nested.
        let e = simulate_ensemble(&ens, p, drift, Regime::FreeLine, dt, t, threads)?;
        sup_sq.push(e.sup_sq.iter().sum::<f64>() / n as f64);
        sup_incr.push(e.sup_incr_sq.iter().sum::<f64>() / n as f64);
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&sup_incr)
        .map(|(t, s)| (t.ln(), s.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|a, b| times[*a].total_cmp(&times[*b]));
    let monotone = order
        .windows(2)
        .all(|w| sup_sq[w[1]] >= sup_sq[w[0]] && sup_incr[w[1]] >= sup_incr[w[0]]);
    Ok(AprioriReport {
        times: times.to_vec(),
        sup_sq,
        sup_incr_sq: sup_incr,
        second_moment_x0,
        incr_slope: sxy / sxx,
        monotone,
    })
}

/// Distances between successive Picard iterates on one fixed path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicardReport {
    /// `d_m = sup_t |X_{m+1}(t) - X_m(t)|`, `m = 0, 1, ...`.
    pub distances: Vec<f64>,
    /// `d_m` grew three times in a row.
    pub diverged: bool,
}

impl PicardReport {
    /// Successive ratios `d_{m+1} / d_m`.
    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Seeded discrete Brownian path `W(t_i)` on `steps` steps of size `dt`.
pub fn brownian_path(steps: usize, dt: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Vec::with_capacity(steps + 1);
    w.push(0.0);
    let s = dt.sqrt();
    for i in 0..steps {
        let z: f64 = rng.sample(StandardNormal);
        w.push(w[i] + s * z);
    }
    w
}

/// Picard map `X_{m+1}(t) = X_0 + int_0^t p mu~(X_m) ds + sqrt(2) W(t)` on
/// the grid of `path`, starting from the constant path `X_0`.
pub fn picard_iterate_path(
    path: &[f64],
    dt: f64,
    x0: f64,
    p: &ControlSignal,
    drift: DriftExtension,
    m_max: usize,
) -> Result<PicardReport> {
    if path.len() < 2 {
        return Err(Error::Validation("path needs at least one step".into()));
    }
    let steps = path.len() - 1;
    let incr: Vec<f64> = (0..steps)
        .map(|i| p.integral(i as f64 * dt, (i + 1) as f64 * dt))
        .collect();
    let mut x = vec![x0; path.len()];
    let mut distances = Vec::with_capacity(m_max);
    let mut rising = 0;
    let mut diverged = false;
    for _ in 0..m_max {
        let mut next = Vec::with_capacity(path.len());
        let mut acc = 0.0;
        next.push(x0 + SQRT_2 * path[0]);
        for i in 0..steps {
            acc += incr[i] * drift.value(x[i]);
            next.push(x0 + acc + SQRT_2 * path[i + 1]);
        }
        let d = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if let Some(prev) = distances.last() {
            rising = if d > *prev { rising + 1 } else { 0 };
            if rising >= 3 {
                diverged = true;
            }
        }
        distances.push(d);
        x = next;
    }
    Ok(PicardReport {
        distances,
        diverged,
    })
}

/// The stationary cosine law used by the examples: `1 + (sqrt 2 / 2) cos(pi x)`.
pub fn cosine_density(x: f64) -> f64 {
    1.0 + FRAC_1_SQRT_2 * (PI * x).cos()
}
