//! Run configuration: a flat key/value file (TOML, or JSON by extension),
//! overridden by `GSTEER_<KEY>` environment variables, then by CLI flags.
//!
//! Unknown keys are rejected and every value is validated before any
//! computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::catalog::{Drift, ProblemKind, ProblemSpec};
use crate::error::{Error, Result};
use crate::moment::MomentOptions;
use crate::sde::Regime;
use crate::sim::SimOptions;
use crate::steering::{AdmissionMode, LoopConfig};

/// Prefix of environment overrides, e.g. `GSTEER_TRUNCATION=32`.
pub const ENV_PREFIX: &str = "GSTEER_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Local,
    Strip,
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeControl {
    Zero,
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // problem
    pub problem: ProblemKind,
    /// Defaults per kind: see [`default_drift`].
    pub drift: Option<Drift>,
    pub alpha: f64,
    pub truncation: usize,

    // moment problem and cost curve
    pub horizons: Vec<f64>,
    pub trials: usize,
    pub max_constraints: Option<usize>,
    pub grid_intervals: usize,

    // loop
    pub horizon: f64,
    pub n_max: usize,
    pub stop_tol: f64,
    pub mode: AdmissionMode,
    pub strategy: Strategy,
    /// `||u0 - phi_g||_{1/2}` of the random initial perturbation.
    pub perturbation: f64,
    /// Explicit initial coefficients (overrides `perturbation`).
    pub initial_state: Option<Vec<f64>>,
    pub radius: f64,
    pub r1: Option<f64>,
    /// Supply the theoretical constants to the loop.
    pub theoretical_constants: bool,
    pub nu: Option<f64>,
    pub c_b: Option<f64>,
    pub t0: f64,
    pub sim_tol: f64,

    // particles
    pub particles: usize,
    pub dt: f64,
    pub sde_horizon: f64,
    pub regime: Regime,
    pub bins: usize,
    pub initial_amplitude: f64,
    pub sde_control: SdeControl,

    // run
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::FpDirichlet,
            drift: None,
            alpha: 0.0,
            truncation: 16,
            horizons: vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            trials: 20,
            max_constraints: None,
            grid_intervals: 200,
            horizon: 1.0,
            n_max: 12,
            stop_tol: 1e-10,
            mode: AdmissionMode::Empirical,
            strategy: Strategy::Local,
            perturbation: 1e-2,
            initial_state: None,
            radius: 1.0,
            r1: None,
            theoretical_constants: false,
            nu: None,
            c_b: None,
            t0: 1.0,
            sim_tol: 1e-10,
            particles: 100_000,
            dt: 1e-4,
            sde_horizon: 1.0,
            regime: Regime::PartialReflect,
            bins: 20,
            initial_amplitude: 0.5,
            sde_control: SdeControl::Zero,
            seed: 1,
            threads: 1,
            out: PathBuf::from("out"),
        }
    }
}

/// Drift used when none is configured. `x` would decouple the ground state
/// of `fp_neumann` from every cosine mode, hence `x^3` there.
pub fn default_drift(kind: ProblemKind) -> Drift {
    match kind {
        ProblemKind::FpDirichlet => Drift::Power(1),
        ProblemKind::FpNeumann => Drift::Power(3),
        ProblemKind::HeatNeumannDrift => Drift::Power(2),
        ProblemKind::DegenerateDirichlet | ProblemKind::DegenerateNeumann => Drift::Canonical,
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(msg()))
    }
}

impl RunConfig {
    pub fn drift(&self) -> Drift {
        self.drift.unwrap_or_else(|| default_drift(self.problem))
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec::new(self.problem, self.drift(), self.alpha, self.truncation)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec().validate()?;
        check(!self.horizons.is_empty(), || {
            "horizons must not be empty".into()
        })?;
        for h in &self.horizons {
            check(h.is_finite() && *h > 0.0, || {
                format!("horizon {h} must be positive")
            })?;
        }
        check(self.trials >= 8, || {
            format!("trials must be at least 8, got {}", self.trials)
        })?;
        if let Some(k) = self.max_constraints {
            check(k >= 1 && k <= self.truncation, || {
                format!("max_constraints {k} must lie in 1..=truncation")
            })?;
        }
        check(self.grid_intervals >= 4, || {
            "grid_intervals must be at least 4".into()
        })?;
        check(self.horizon.is_finite() && self.horizon > 0.0, || {
            "horizon must be positive".into()
        })?;
        check(self.n_max >= 1, || "n_max must be at least 1".into())?;
        check(self.stop_tol > 0.0, || "stop_tol must be positive".into())?;
        check(
            self.perturbation.is_finite() && self.perturbation >= 0.0,
            || "perturbation must be nonnegative".into(),
        )?;
        if let Some(s) = &self.initial_state {
            check(s.len() == self.truncation, || {
                format!(
                    "initial_state has {} entries, truncation is {}",
                    s.len(),
                    self.truncation
                )
            })?;
            check(s.iter().all(|v| v.is_finite()), || {
                "initial_state must be finite".into()
            })?;
        }
        check(self.radius.is_finite() && self.radius > 0.0, || {
            "radius must be positive".into()
        })?;
        if let Some(r) = self.r1 {
            check(r > 0.0, || "r1 must be positive".into())?;
        }
        for (name, v) in [("nu", self.nu), ("c_b", self.c_b)] {
            if let Some(v) = v {
                check(v.is_finite() && v > 0.0, || {
                    format!("{name} must be positive")
                })?;
            }
        }
        check(self.t0 > 0.0, || "t0 must be positive".into())?;
        check(self.sim_tol > 0.0, || "sim_tol must be positive".into())?;
        check(self.particles >= 1, || "particles must be positive".into())?;
        check(self.dt.is_finite() && self.dt > 0.0, || {
            "dt must be positive".into()
        })?;
        check(self.sde_horizon > 0.0, || {
            "sde_horizon must be positive".into()
        })?;
        check(self.bins >= 1, || "bins must be positive".into())?;
        check(self.initial_amplitude.abs() <= 0.5, || {
            "initial_amplitude must lie in [-1/2, 1/2]".into()
        })?;
        check(self.threads >= 1, || "threads must be at least 1".into())?;
        if self.sde_control == SdeControl::Loop {
            check(
                self.problem == ProblemKind::FpNeumann && self.regime == Regime::PartialReflect,
                || "loop-controlled particle runs need fp_neumann with partial_reflect".into(),
            )?;
        }
        Ok(())
    }

    pub fn moment_options(&self) -> MomentOptions {
        MomentOptions {
            uniform_intervals: self.grid_intervals,
            max_constraints: self.max_constraints,
            ..Default::default()
        }
    }

    pub fn loop_config(&self) -> LoopConfig {
        LoopConfig {
            horizon: self.horizon,
            n_max: self.n_max,
            stop_tol: self.stop_tol,
            mode: self.mode,
            moment: self.moment_options(),
            sim: SimOptions {
                tol: self.sim_tol,
                ..Default::default()
            },
        }
    }

    /// Parses a config file (`.json` as JSON, anything else as TOML).
    pub fn from_file(path: &Path) -> Result<Self> {
        let map = read_map(path)?;
        Self::from_map(map)
    }

    pub fn from_map(map: Map<String, Value>) -> Result<Self> {
        serde_json::from_value(Value::Object(map)).map_err(|e| Error::Validation(e.to_string()))
    }

    /// Defaults, then `path`, then environment overrides.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut map = match path {
            Some(p) => read_map(p)?,
            None => Map::new(),
        };
        apply_env(&mut map, env);
        Self::from_map(map)
    }
}

/// Reads a config file into a raw key/value map.
pub fn read_map(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
    };
    match value {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Validation(format!(
            "{}: expected a table of keys",
            path.display()
        ))),
    }
}

// Keys whose values are always strings (`GSTEER_DRIFT=0` is the zero drift).
const STRING_KEYS: &[&str] = &[
    "problem",
    "drift",
    "mode",
    "strategy",
    "regime",
    "sde_control",
    "out",
];

/// Inserts `GSTEER_<KEY>=value` pairs as lower-case keys. Values are read as
/// JSON when possible (numbers, booleans, arrays), else as strings.
pub fn apply_env(map: &mut Map<String, Value>, env: impl IntoIterator<Item = (String, String)>) {
    for (k, v) in env {
        let Some(key) = k.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let key = key.to_ascii_lowercase();
        let value = if STRING_KEYS.contains(&key.as_str()) {
            Value::String(v)
        } else {
            serde_json::from_str(&v).unwrap_or(Value::String(v))
        };
        map.insert(key, value);
    }
}
