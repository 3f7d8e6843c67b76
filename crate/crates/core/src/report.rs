//! Command implementations behind the CLI. Each writes CSV/JSON artifacts
//! and a `manifest.json` (config echo, seed, version, file list, status) to
//! its output directory, overwriting previous results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{
    assemble_problem, build_problem, check_ground_coupling, verify_hypotheses, ProblemKind,
};
use crate::config::{RunConfig, SdeControl, Strategy};
use crate::control::ControlSignal;
use crate::error::{Error, Result};
use crate::moment::{estimate_control_cost, fit_cost_law, random_unit_states, CostSample};
use crate::sde::{
    estimate_density, galerkin_bin_density, simulate_ensemble, DriftExtension, InitialLaw,
    ParticleEnsemble,
};
use crate::sim::{integrate_bilinear, SimOptions};
use crate::spectral::{
    compute_bound_constants, estimate_cb, half_norm, BoundConstants, EigenSystem, State,
};
use crate::steering::{
    run_local_loop, run_semiglobal_cone, run_semiglobal_strip, LoopStatus, LoopTrace,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub files: Vec<String>,
    pub status: String,
    pub exit_code: i32,
    pub summary: Value,
}

/// A finished command: the manifest was written; `error` is set when the
/// run failed after producing partial artifacts.
#[derive(Debug)]
pub struct CommandOutcome {
    pub manifest: Manifest,
    pub error: Option<Error>,
}

struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(v)?;
        self.put(name, &s)
    }

    fn finish(
        mut self,
        command: &str,
        cfg: &RunConfig,
        summary: Value,
        error: Option<Error>,
    ) -> Result<CommandOutcome> {
        let (status, exit_code) = match &error {
            None => ("ok".to_string(), 0),
            Some(e) => (e.to_string(), e.exit_code()),
        };
        self.files.sort();
        let manifest = Manifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            files: self.files.clone(),
            status,
            exit_code,
            summary,
        };
        let s = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.dir.join("manifest.json"), s)?;
        Ok(CommandOutcome { manifest, error })
    }
}

fn control_csv(p: &ControlSignal) -> String {
    let mut s = String::from("t,p\n");
    for (t, v) in p.samples() {
        let _ = writeln!(s, "{t:.15e},{v:.15e}");
    }
    s
}

/// Eigenvalues, ground couplings and the hypothesis report.
pub fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    cfg.validate()?;
    let eig = assemble_problem(&cfg.spec())?;
    let report = verify_hypotheses(&eig);
    let mut w = Writer::new(out)?;
    let mut ev = String::from("index,label,lambda\n");
    for k in 0..eig.len() {
        let _ = writeln!(ev, "{k},{},{:.15e}", eig.label(k), eig.eigenvalue(k));
    }
    w.put("eigenvalues.csv", &ev)?;
    let b = eig.ground_coupling();
    let mut gc = String::from("label,coupling\n");
    for k in 0..eig.len() {
        let _ = writeln!(gc, "{},{:.15e}", eig.label(k), b[k]);
    }
    w.put("ground_coupling.csv", &gc)?;
    w.json("hypotheses.json", &report)?;
    let summary = json!({
        "gap": report.gap,
        "gap_required": report.gap_required,
        "gap_ok": report.gap_ok,
        "rank_ok": report.rank_ok,
        "min_coupling": report.min_coupling,
        "c_b": report.c_b,
    });
    w.finish("spectrum", cfg, summary, check_ground_coupling(&eig).err())
}

/// Cost curve `N_emp(T)` over the configured horizons and its `nu` fit.
pub fn cmd_null_control(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    cfg.validate()?;
    let eig = build_problem(&cfg.spec())?.ground_shifted()?;
    let opts = cfg.moment_options();
    let mut w = Writer::new(out)?;
    let mut samples: Vec<CostSample> = Vec::new();
    let mut first_error = None;
    let mut failures = Vec::new();
    for &t in &cfg.horizons {
        match estimate_control_cost(&eig, t, cfg.trials, cfg.seed, &opts) {
            Ok(s) => samples.push(s),
            Err(e) => {
                failures.push(json!({"horizon": t, "error": e.to_string()}));
                first_error.get_or_insert(e);
            }
        }
    }
    let mut csv = String::from("T,n_emp,residual,condition,tail_indicator\n");
    for s in &samples {
        let _ = writeln!(
            csv,
            "{:.6},{:.12e},{:.6e},{:.6e},{:.6e}",
            s.horizon, s.n_emp, s.max_residual, s.max_condition, s.tail_indicator
        );
    }
    w.put("cost_curve.csv", &csv)?;
    let fit = fit_cost_law(&samples);
    w.json("fit.json", &json!({ "fit": fit, "failures": failures }))?;
    let summary = json!({
        "horizons": samples.len(),
        "failures": failures.len(),
        "nu_hat": fit.as_ref().map(|f| f.nu_hat),
        "r_squared": fit.as_ref().map(|f| f.r_squared),
        "nu_dominating": fit.as_ref().map(|f| f.nu_dominating),
        "max_residual": samples.iter().map(|s| s.max_residual).fold(0.0, f64::max),
    });
    w.finish("null-control", cfg, summary, first_error)
}

/// Constants at `horizon`, with `nu` from the config or from the dominating
/// fit of the empirical cost curve.
pub fn theoretical_constants(
    cfg: &RunConfig,
    shifted: &EigenSystem,
    horizon: f64,
) -> Result<BoundConstants> {
    let c_b = cfg.c_b.unwrap_or_else(|| estimate_cb(shifted));
    let nu = match cfg.nu {
        Some(nu) => nu,
        None => {
            let opts = cfg.moment_options();
            let samples: Vec<CostSample> = cfg
                .horizons
                .iter()
                .filter_map(|t| {
                    estimate_control_cost(shifted, *t, cfg.trials, cfg.seed, &opts).ok()
                })
                .collect();
            fit_cost_law(&samples)
                .map(|f| f.nu_dominating)
                .filter(|nu| *nu > 0.0)
                .ok_or_else(|| Error::Precondition("cannot fit nu from the cost curve".into()))?
        }
    };
    compute_bound_constants(c_b, nu, 0.0, horizon, cfg.t0)
}

/// Initial state for the loop commands (original coordinates).
pub fn initial_state(cfg: &RunConfig, shifted: &EigenSystem) -> State {
    if let Some(c) = &cfg.initial_state {
        return State::from_slice(c);
    }
    let k = shifted.len();
    let g = shifted.ground_index();
    let mut d = random_unit_states(k, 1, cfg.seed).remove(0).coeffs;
    let target = match cfg.strategy {
        Strategy::Local => cfg.perturbation,
        Strategy::Strip | Strategy::Cone => {
            d[g] = 0.0;
            cfg.radius
        }
    };
    let n = half_norm(&d, shifted.eigenvalues());
    let mut u = if n > 0.0 {
        d * (target / n)
    } else {
        DVector::zeros(k)
    };
    u[g] += 1.0;
    if cfg.strategy == Strategy::Cone {
        // Any nonzero ground coefficient; the cone is scale invariant.
        u *= 2.0;
    }
    State::new(u)
}

fn loop_summary(trace: &LoopTrace, status: &LoopStatus, extra: Value) -> Value {
    let last = trace.stages.last();
    json!({
        "status": status,
        "stages": trace.stages.len(),
        "v0_half": trace.v0_half,
        "final_v_half": last.map(|s| s.v_half).unwrap_or(trace.v0_half),
        "total_control_norm": trace.total_control_norm_sq().sqrt(),
        "bounds_respected": trace.bounds_respected(),
        "extra": extra,
    })
}

/// Local loop or a semi-global strategy, per `cfg.strategy`.
pub fn cmd_control_loop(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    cfg.validate()?;
    let eig = build_problem(&cfg.spec())?;
    let shifted = eig.ground_shifted()?;
    let u0 = initial_state(cfg, &shifted);
    let loop_cfg = cfg.loop_config();
    let mut w = Writer::new(out)?;
    let (outcome, control, extra, end) = match cfg.strategy {
        Strategy::Local => {
            let constants = if cfg.theoretical_constants {
                Some(theoretical_constants(cfg, &shifted, cfg.horizon)?)
            } else {
                None
            };
            let o = run_local_loop(&u0, &eig, &loop_cfg, constants.as_ref())?;
            let c = o.control.clone();
            let end = c.end();
            (o, c, json!({ "constants": constants }), end)
        }
        Strategy::Strip | Strategy::Cone => {
            let constants = theoretical_constants(cfg, &shifted, 1.0)?;
            let run = if cfg.strategy == Strategy::Strip {
                run_semiglobal_strip(&u0, &eig, cfg.radius, &constants, cfg.r1, &loop_cfg)?
            } else {
                run_semiglobal_cone(&u0, &eig, cfg.radius, &constants, cfg.r1, &loop_cfg)?
            };
            let extra = json!({
                "t_dwell": run.t_dwell,
                "t_r": run.t_r,
                "total_time": run.total_time,
                "orth_after_dwell": run.orth_after_dwell,
                "scale": run.scale,
                "constants": constants,
            });
            let end = run.control.end();
            (run.local, run.control, extra, end)
        }
    };
    w.put("trace.csv", &outcome.trace.to_csv())?;
    w.json(
        "trace.json",
        &json!({ "status": outcome.status, "trace": outcome.trace }),
    )?;
    w.put("control.csv", &control_csv(&control))?;
    let sim = SimOptions {
        tol: cfg.sim_tol,
        ..Default::default()
    };
    let traj_note = match integrate_bilinear(&u0, &control, &eig, 0.0, end, &sim) {
        Ok(traj) => {
            let ground = State::ground(&eig).scaled(u0.coeffs[eig.ground_index()]);
            w.put("trajectory.csv", &traj.to_csv(&eig, Some(&ground)))?;
            Value::Null
        }
        Err(e) => Value::String(e.to_string()),
    };
    let summary = loop_summary(
        &outcome.trace,
        &outcome.status,
        json!({ "strategy": cfg.strategy, "run": extra, "trajectory_error": traj_note }),
    );
    let error = outcome.into_result().err();
    w.finish("control-loop", cfg, summary, error)
}

/// Particle run and, for `fp_neumann` with a cosine initial law, the
/// comparison with the Galerkin density.
pub fn cmd_sde(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    cfg.validate()?;
    let spec = cfg.spec();
    let eig = build_problem(&spec)?;
    let law = if cfg.problem == ProblemKind::FpNeumann {
        InitialLaw::Cosine {
            a: cfg.initial_amplitude,
        }
    } else {
        InitialLaw::Uniform
    };
    let t_end = cfg.sde_horizon;
    let (control, loop_status) = match cfg.sde_control {
        SdeControl::Zero => (ControlSignal::zero(0.0, t_end), Value::Null),
        SdeControl::Loop => {
            let c0 = law.cosine_coefficients(eig.len()).expect("cosine law");
            let o = run_local_loop(&State::from_slice(&c0), &eig, &cfg.loop_config(), None)?;
            let st = serde_json::to_value(&o.status)?;
            (o.control.extended_to(t_end), st)
        }
    };
    let ens = ParticleEnsemble::sample(&law, cfg.particles, cfg.seed)?;
    let drift = DriftExtension::new(cfg.drift());
    let mut w = Writer::new(out)?;
    let run = simulate_ensemble(
        &ens,
        &control,
        drift,
        cfg.regime,
        cfg.dt,
        t_end,
        cfg.threads,
    );
    let ens = match run {
        Ok(e) => e,
        Err(e) => return w.finish("sde", cfg, json!({ "particles": cfg.particles }), Some(e)),
    };
    let hist = estimate_density(&ens, cfg.bins, cfg.regime)?;
    w.put("histogram.csv", &hist.to_csv())?;
    let mut l1 = Value::Null;
    let mut galerkin_mass = Value::Null;
    if cfg.problem == ProblemKind::FpNeumann {
        if let (Some(c0), Some(basis)) = (law.cosine_coefficients(eig.len()), eig.basis()) {
            let traj = integrate_bilinear(
                &State::from_slice(&c0),
                &control,
                &eig,
                0.0,
                t_end,
                &SimOptions::default(),
            )?;
            let fin = traj.final_state();
            let g = galerkin_bin_density(basis, fin.coeffs.as_slice(), cfg.bins);
            let mut csv = String::from("bin_center,mc_density,galerkin_density\n");
            for ((c, m), gd) in hist.centers().iter().zip(&hist.density).zip(&g) {
                let _ = writeln!(csv, "{c:.6},{m:.12e},{gd:.12e}");
            }
            w.put("comparison.csv", &csv)?;
            l1 = json!(hist.l1_distance(&g));
            galerkin_mass = json!(fin.coeffs[0]);
        }
    }
    w.put("control.csv", &control_csv(&control))?;
    let summary = json!({
        "particles": cfg.particles,
        "dt": cfg.dt,
        "regime": cfg.regime,
        "alive": ens.alive_count(),
        "reflections": ens.reflections,
        "absorptions": ens.absorptions,
        "grid_resolved": ens.grid_resolved,
        "l1_vs_galerkin": l1,
        "galerkin_mass": galerkin_mass,
        "loop_status": loop_status,
        "warning": hist.warning,
    });
    w.finish("sde", cfg, summary, None)
}

/// Collects `manifest.json` from `dir` and its immediate subdirectories and
/// writes `report.md`. Returns the report text.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let mut paths = Vec::new();
    if dir.join("manifest.json").is_file() {
        paths.push(dir.join("manifest.json"));
    }
    if dir.is_dir() {
        let mut subs: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("manifest.json").is_file())
            .collect();
        subs.sort();
        paths.extend(subs.into_iter().map(|p| p.join("manifest.json")));
    }
    if paths.is_empty() {
        return Err(Error::Validation(format!(
            "no manifest.json under {}",
            dir.display()
        )));
    }
    let mut s = String::from(
        "# Run report\n\n| directory | command | status | summary |\n|---|---|---|---|\n",
    );
    for p in &paths {
        let m: Manifest = serde_json::from_str(&fs::read_to_string(p)?)?;
        let d = p
            .parent()
            .map(|d| d.display().to_string())
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "| {d} | {} | {} | `{}` |",
            m.command, m.status, m.summary
        );
    }
    fs::write(dir.join("report.md"), &s)?;
    Ok(s)
}
