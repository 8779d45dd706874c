//! Run configuration file (TOML) and its validation.

use std::path::{Path, PathBuf};

use axiflow::algebra::SuiteSizes;
use axiflow::monitors::AuditTolerances;
use axiflow::ovaloid::FamilyOptions;
use axiflow::profile::{self, GeneratingCurve};
use axiflow::solver::{Continuation, RunOptions, StepControl, StopConditions};
use axiflow::speeds::SpeedDescriptor;
use axiflow::SpeedSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Shape {
    Sphere { radius: f64 },
    Spherocylinder { half_length: f64, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub checkpoint_every: u64,
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        let d = RunOptions::default();
        Self { dir: PathBuf::from("axiflow-out"), checkpoint_every: d.checkpoint_every, snapshot_every: d.snapshot_every }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    pub enabled: bool,
    pub trigger: f64,
    pub target: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        let c = Continuation::default();
        Self { enabled: true, trigger: c.trigger, target: c.target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Existing run directory to audit; when absent the configured run is
    /// simulated first.
    pub record: Option<PathBuf>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { record: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OvaloidConfig {
    pub lengths: Vec<f64>,
    pub normalization_tol: f64,
    pub window: (f64, f64),
}

impl Default for OvaloidConfig {
    fn default() -> Self {
        Self { lengths: vec![2.0, 4.0, 8.0], normalization_tol: 1e-2, window: (-2.0, -1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowdownConfig {
    /// Cylinder half-length of the approximant that is blown down.
    pub length: f64,
    pub scales: Vec<f64>,
    pub t_probe: f64,
}

impl Default for BlowdownConfig {
    fn default() -> Self {
        Self { length: 8.0, scales: vec![1.0, 2.0, 4.0], t_probe: -1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub n: usize,
    pub nodes: usize,
    /// Seed of the ChaCha8 generator used by the algebra suite.
    pub seed: u64,
    pub speed: SpeedDescriptor,
    pub shape: Shape,
    pub control: StepControl,
    pub stop: StopConditions,
    pub continuation: ContinuationConfig,
    pub output: OutputConfig,
    pub tolerances: AuditTolerances,
    pub audit: AuditConfig,
    pub ovaloid: OvaloidConfig,
    pub blowdown: BlowdownConfig,
    pub algebra: SuiteSizes,
    /// Sample count of the speed assumption check.
    pub speed_samples: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            n: 2,
            nodes: 128,
            seed: 1,
            speed: SpeedDescriptor { kind: "mean-power".into(), alpha: 1.0, coefficients: vec![], n: None },
            shape: Shape::Sphere { radius: 1.0 },
            control: StepControl::default(),
            stop: StopConditions::default(),
            continuation: ContinuationConfig::default(),
            output: OutputConfig::default(),
            tolerances: AuditTolerances::default(),
            audit: AuditConfig::default(),
            ovaloid: OvaloidConfig::default(),
            blowdown: BlowdownConfig::default(),
            algebra: SuiteSizes::default(),
            speed_samples: 2000,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad(format!("malformed config: {e}")))
    }

    pub fn speed(&self) -> Result<SpeedSpec, ConfigError> {
        self.speed.build(self.n).map_err(|e| bad(e.to_string()))
    }

    pub fn initial_curve(&self) -> Result<GeneratingCurve, ConfigError> {
        let c = match self.shape {
            Shape::Sphere { radius } => profile::make_sphere(radius, self.nodes, self.n),
            Shape::Spherocylinder { half_length, radius } => profile::make_spherocylinder(half_length, radius, self.nodes, self.n),
        };
        c.map_err(|e| bad(e.to_string()))
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            control: self.control,
            stop: self.stop,
            continuation: self
                .continuation
                .enabled
                .then_some(Continuation { trigger: self.continuation.trigger, target: self.continuation.target }),
            checkpoint_every: self.output.checkpoint_every,
            snapshot_every: self.output.snapshot_every,
            ratio_events: vec![axiflow::ovaloid::TARGET_RATIO],
        }
    }

    pub fn family_options(&self) -> FamilyOptions {
        let mut run = self.run_options();
        // normalization and blowdown interpolate between snapshots
        run.snapshot_every = 1;
        FamilyOptions {
            nodes: self.nodes,
            run,
            tolerances: self.tolerances,
            normalization_tol: self.ovaloid.normalization_tol,
            window: self.ovaloid.window,
        }
    }

    /// Checks every value that any subcommand may use, before any compute.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.speed()?;
        self.initial_curve()?;
        self.control.validate().map_err(|e| bad(e.to_string()))?;
        self.stop.validate().map_err(|e| bad(e.to_string()))?;
        if self.output.checkpoint_every == 0 {
            return Err(bad("output.checkpoint_every must be >= 1"));
        }
        let c = &self.continuation;
        if c.enabled && !(c.target > 0.0 && c.trigger > c.target) {
            return Err(bad("continuation needs 0 < target < trigger"));
        }
        let o = &self.ovaloid;
        if o.lengths.is_empty() || o.lengths.iter().any(|l| !(*l >= 1.0)) || o.lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("ovaloid.lengths must be increasing and >= 1"));
        }
        if !(o.normalization_tol > 0.0) || !(o.window.0 < o.window.1 && o.window.1 < 0.0) {
            return Err(bad("ovaloid.normalization_tol must be positive and ovaloid.window a negative interval"));
        }
        let b = &self.blowdown;
        if !(b.length >= 1.0) || !(b.t_probe < 0.0) || b.scales.is_empty() || b.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(bad("blowdown needs length >= 1, t_probe < 0 and positive scales"));
        }
        if self.speed_samples == 0 {
            return Err(bad("speed_samples must be >= 1"));
        }
        Ok(())
    }
}
