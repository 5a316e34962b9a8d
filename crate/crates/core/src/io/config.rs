//! Run configuration, read from and written to TOML.
//!
//! Every key is optional except `grid.d`. Unknown sections or keys are errors.
//!
//! ```toml
//! [grid]
//! d = 3                 # required
//! n_per_axis = 64
//! half_length = 8.0
//!
//! [z]
//! theta = 0.7853981633974483
//!
//! [stepper]
//! dt = 1e-3
//! dt_min = 1e-7
//! blowup_sup_threshold = 1e6
//! blowup_kinetic_factor = 25.0
//! decay_h1_threshold = 1e-6
//! max_time = 20.0
//! energy_tolerance = 1e-8
//! grow_after = 50
//!
//! [experiment]
//! kind = "dichotomy_sweep"   # trapping_check, inviscid_limit, decay_study, weak_strong_gronwall
//! family = "gaussian"        # truncated_w (cutoff, taper_width), ring (radius, sigma)
//! sigma = 0.5
//! amplitudes = [0.5]
//! thetas = [0.7853981633974483]   # defaults to [z.theta]
//! seed = 0
//! epsilon = 1e-6
//! horizon = 1.0
//! trust_boundary = 1e-6
//! trust_tail = 1e-10
//! jobs = 0
//!
//! [output]
//! directory = "out"
//! record_cadence = 10
//! checkpoint_cadence = 0     # steps between checkpoints; 0 writes only the final one
//! bubble = false
//! ```

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use thiserror::Error;
use toml::{Table, Value};

use crate::experiments::{ExperimentKind, ExperimentSpec, GridSpec, InitialFamily, TrustLimits};
use crate::integrator::StepperConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed TOML: {0}")]
    Syntax(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn violations(&self) -> Vec<String> {
        match self {
            ConfigError::Invalid(v) => v.clone(),
            other => vec![other.to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub family: InitialFamily,
    pub amplitudes: Vec<f64>,
    pub thetas: Vec<f64>,
    pub seed: u64,
    pub epsilon: f64,
    pub horizon: f64,
    pub trust: TrustLimits,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub record_cadence: u64,
    pub checkpoint_cadence: u64,
    pub bubble: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub theta: f64,
    pub stepper: StepperConfig,
    pub experiment: ExperimentSection,
    pub output: OutputConfig,
}

pub const DEFAULT_N_PER_AXIS: usize = 64;
pub const DEFAULT_HALF_LENGTH: f64 = 8.0;
pub const DEFAULT_THETA: f64 = std::f64::consts::FRAC_PI_4;

pub fn kind_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::DichotomySweep => "dichotomy_sweep",
        ExperimentKind::InviscidLimit => "inviscid_limit",
        ExperimentKind::DecayStudy => "decay_study",
        ExperimentKind::WeakStrongGronwall => "weak_strong_gronwall",
        ExperimentKind::TrappingCheck => "trapping_check",
    }
}

fn parse_kind(s: &str) -> Option<ExperimentKind> {
    [
        ExperimentKind::DichotomySweep,
        ExperimentKind::InviscidLimit,
        ExperimentKind::DecayStudy,
        ExperimentKind::WeakStrongGronwall,
        ExperimentKind::TrappingCheck,
    ]
    .into_iter()
    .find(|k| kind_name(*k) == s)
}

/// Reads typed values out of one section, remembering which keys were used.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str, errors: &mut Vec<String>) -> Self {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errors.push(format!("[{name}] must be a table"));
                None
            }
        };
        Self {
            name,
            table,
            used: BTreeSet::new(),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Value> {
        self.used.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, key: &'a str, default: f64, errors: &mut Vec<String>) -> f64 {
        match self.raw(key) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(other) => {
                errors.push(format!(
                    "{}.{key} must be a number, got {}",
                    self.name,
                    other.type_str()
                ));
                default
            }
        }
    }

    fn int(&mut self, key: &'a str, default: u64, errors: &mut Vec<String>) -> u64 {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(v)) if *v >= 0 => *v as u64,
            Some(Value::Integer(v)) => {
                errors.push(format!("{}.{key} must be non-negative, got {v}", self.name));
                default
            }
            Some(other) => {
                errors.push(format!(
                    "{}.{key} must be an integer, got {}",
                    self.name,
                    other.type_str()
                ));
                default
            }
        }
    }

    fn boolean(&mut self, key: &'a str, default: bool, errors: &mut Vec<String>) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                errors.push(format!(
                    "{}.{key} must be a boolean, got {}",
                    self.name,
                    other.type_str()
                ));
                default
            }
        }
    }

    fn string(&mut self, key: &'a str, errors: &mut Vec<String>) -> Option<&'a str> {
        match self.raw(key) {
            None => None,
            Some(Value::String(s)) => Some(s.as_str()),
            Some(other) => {
                errors.push(format!(
                    "{}.{key} must be a string, got {}",
                    self.name,
                    other.type_str()
                ));
                None
            }
        }
    }

    fn floats(&mut self, key: &'a str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Float(v) => out.push(*v),
                        Value::Integer(v) => out.push(*v as f64),
                        other => {
                            errors.push(format!(
                                "{}.{key} entries must be numbers, got {}",
                                self.name,
                                other.type_str()
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                errors.push(format!(
                    "{}.{key} must be an array, got {}",
                    self.name,
                    other.type_str()
                ));
                None
            }
        }
    }

    fn present(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn finish(self, errors: &mut Vec<String>) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.used.contains(key.as_str()) {
                    errors.push(format!("unknown key {}.{key}", self.name));
                }
            }
        }
    }
}

const SECTIONS: [&str; 5] = ["grid", "z", "stepper", "experiment", "output"];

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    from_table(&root)
}

/// Builds a config from an already parsed document, collecting every violation.
pub fn from_table(root: &Table) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            errors.push(format!("unknown section [{key}]"));
        }
    }
    let e = &mut errors;

    let mut grid = Section::new(root, "grid", e);
    let d = if grid.present("d") {
        grid.int("d", 3, e) as usize
    } else {
        e.push("missing required key grid.d".into());
        3
    };
    let grid_spec = GridSpec {
        d,
        n_per_axis: grid.int("n_per_axis", DEFAULT_N_PER_AXIS as u64, e) as usize,
        half_length: grid.float("half_length", DEFAULT_HALF_LENGTH, e),
    };
    grid.finish(e);

    let mut z = Section::new(root, "z", e);
    let theta = z.float("theta", DEFAULT_THETA, e);
    z.finish(e);
    if !(theta > 0.0 && theta <= FRAC_PI_2) {
        e.push(format!("z.theta = {theta} is outside the range (0, pi/2]"));
    }

    let mut st = Section::new(root, "stepper", e);
    let base = StepperConfig::default();
    let stepper = StepperConfig {
        dt: st.float("dt", base.dt, e),
        dt_min: st.float("dt_min", base.dt_min, e),
        blowup_sup_threshold: st.float("blowup_sup_threshold", base.blowup_sup_threshold, e),
        blowup_kinetic_factor: st.float("blowup_kinetic_factor", base.blowup_kinetic_factor, e),
        decay_h1_threshold: st.float("decay_h1_threshold", base.decay_h1_threshold, e),
        max_time: st.float("max_time", base.max_time, e),
        energy_tolerance: st.float("energy_tolerance", base.energy_tolerance, e),
        grow_after: st.int("grow_after", base.grow_after, e),
    };
    st.finish(e);

    let mut ex = Section::new(root, "experiment", e);
    let kind = match ex.string("kind", e) {
        None => ExperimentKind::DichotomySweep,
        Some(s) => parse_kind(s).unwrap_or_else(|| {
            e.push(format!("experiment.kind = {s:?} is not a known experiment"));
            ExperimentKind::DichotomySweep
        }),
    };
    let family_name = ex.string("family", e).unwrap_or("gaussian");
    let family = match family_name {
        "gaussian" => InitialFamily::Gaussian {
            sigma: ex.float("sigma", 0.5, e),
        },
        "ring" => InitialFamily::Ring {
            radius: ex.float("radius", 2.0, e),
            sigma: ex.float("sigma", 0.5, e),
        },
        "truncated_w" => InitialFamily::TruncatedW {
            cutoff: ex.float("cutoff", 4.0, e),
            taper_width: ex.float("taper_width", 2.0, e),
        },
        other => {
            e.push(format!(
                "experiment.family = {other:?} is not one of gaussian, ring, truncated_w"
            ));
            InitialFamily::Gaussian { sigma: 0.5 }
        }
    };
    let amplitudes = ex.floats("amplitudes", e).unwrap_or_else(|| vec![0.5]);
    let thetas = ex.floats("thetas", e).unwrap_or_else(|| vec![theta]);
    let seed = ex.int("seed", 0, e);
    let epsilon = ex.float("epsilon", 1e-6, e);
    let horizon = ex.float("horizon", 1.0, e);
    let trust = TrustLimits {
        boundary_mass_fraction: ex.float(
            "trust_boundary",
            TrustLimits::default().boundary_mass_fraction,
            e,
        ),
        spectral_tail_fraction: ex.float(
            "trust_tail",
            TrustLimits::default().spectral_tail_fraction,
            e,
        ),
    };
    let jobs = ex.int("jobs", 0, e) as usize;
    ex.finish(e);

    let mut out = Section::new(root, "output", e);
    let output = OutputConfig {
        directory: PathBuf::from(out.string("directory", e).unwrap_or("out")),
        record_cadence: out.int("record_cadence", 10, e),
        checkpoint_cadence: out.int("checkpoint_cadence", 0, e),
        bubble: out.boolean("bubble", false, e),
    };
    out.finish(e);

    let cfg = RunConfig {
        grid: grid_spec,
        theta,
        stepper,
        experiment: ExperimentSection {
            kind,
            family: family.clone(),
            amplitudes,
            thetas,
            seed,
            epsilon,
            horizon,
            trust,
            jobs,
        },
        output,
    };
    // the profile constructors hold the family's own constraints
    if let Ok(grid) = cfg.grid.build() {
        if let Err(err) = family.profile(&grid) {
            errors.push(err.to_string());
        }
    }
    for v in cfg.experiment_spec().violations() {
        if !errors.contains(&v) {
            errors.push(v);
        }
    }
    if seed > i64::MAX as u64 {
        errors.push("experiment.seed exceeds the TOML integer range".into());
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

impl RunConfig {
    pub fn experiment_spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            kind: self.experiment.kind,
            initial_family: self.experiment.family.clone(),
            amplitudes: self.experiment.amplitudes.clone(),
            thetas: self.experiment.thetas.clone(),
            grid: self.grid,
            stepper: self.stepper.clone(),
            seed: self.experiment.seed,
            record_every: self.output.record_cadence,
            epsilon: self.experiment.epsilon,
            horizon: self.experiment.horizon,
            trust: self.experiment.trust,
            jobs: self.experiment.jobs,
        }
    }

    /// Every field written out explicitly; parsing it back yields `self`.
    pub fn to_table(&self) -> Table {
        let mut root = Table::new();
        let mut grid = Table::new();
        grid.insert("d".into(), Value::Integer(self.grid.d as i64));
        grid.insert(
            "n_per_axis".into(),
            Value::Integer(self.grid.n_per_axis as i64),
        );
        grid.insert("half_length".into(), Value::Float(self.grid.half_length));
        root.insert("grid".into(), Value::Table(grid));

        let mut z = Table::new();
        z.insert("theta".into(), Value::Float(self.theta));
        root.insert("z".into(), Value::Table(z));

        let s = &self.stepper;
        let mut st = Table::new();
        for (k, v) in [
            ("dt", s.dt),
            ("dt_min", s.dt_min),
            ("blowup_sup_threshold", s.blowup_sup_threshold),
            ("blowup_kinetic_factor", s.blowup_kinetic_factor),
            ("decay_h1_threshold", s.decay_h1_threshold),
            ("max_time", s.max_time),
            ("energy_tolerance", s.energy_tolerance),
        ] {
            st.insert(k.into(), Value::Float(v));
        }
        st.insert("grow_after".into(), Value::Integer(s.grow_after as i64));
        root.insert("stepper".into(), Value::Table(st));

        let x = &self.experiment;
        let mut ex = Table::new();
        ex.insert("kind".into(), Value::String(kind_name(x.kind).into()));
        match x.family {
            InitialFamily::Gaussian { sigma } => {
                ex.insert("family".into(), Value::String("gaussian".into()));
                ex.insert("sigma".into(), Value::Float(sigma));
            }
            InitialFamily::Ring { radius, sigma } => {
                ex.insert("family".into(), Value::String("ring".into()));
                ex.insert("radius".into(), Value::Float(radius));
                ex.insert("sigma".into(), Value::Float(sigma));
            }
            InitialFamily::TruncatedW {
                cutoff,
                taper_width,
            } => {
                ex.insert("family".into(), Value::String("truncated_w".into()));
                ex.insert("cutoff".into(), Value::Float(cutoff));
                ex.insert("taper_width".into(), Value::Float(taper_width));
            }
        }
        let floats = |v: &[f64]| Value::Array(v.iter().map(|&f| Value::Float(f)).collect());
        ex.insert("amplitudes".into(), floats(&x.amplitudes));
        ex.insert("thetas".into(), floats(&x.thetas));
        ex.insert("seed".into(), Value::Integer(x.seed as i64));
        ex.insert("epsilon".into(), Value::Float(x.epsilon));
        ex.insert("horizon".into(), Value::Float(x.horizon));
        ex.insert(
            "trust_boundary".into(),
            Value::Float(x.trust.boundary_mass_fraction),
        );
        ex.insert(
            "trust_tail".into(),
            Value::Float(x.trust.spectral_tail_fraction),
        );
        ex.insert("jobs".into(), Value::Integer(x.jobs as i64));
        root.insert("experiment".into(), Value::Table(ex));

        let mut out = Table::new();
        out.insert(
            "directory".into(),
            Value::String(self.output.directory.to_string_lossy().into_owned()),
        );
        out.insert(
            "record_cadence".into(),
            Value::Integer(self.output.record_cadence as i64),
        );
        out.insert(
            "checkpoint_cadence".into(),
            Value::Integer(self.output.checkpoint_cadence as i64),
        );
        out.insert("bubble".into(), Value::Boolean(self.output.bubble));
        root.insert("output".into(), Value::Table(out));
        root
    }

    pub fn to_toml(&self) -> String {
        self.to_table().to_string()
    }
}
