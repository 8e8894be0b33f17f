//! Strict TOML run configuration with `key=value` overrides.
//!
//! ```toml
//! [solver]
//! nu = 0.0
//! alpha = 0.1
//! r = 1.0
//! N = 16
//! dt = 1e-3
//! t_end = 1.0
//! dealias = "two_thirds"      # optional: two_thirds | none
//!
//! [ic]
//! kind = "abc"                # abc | taylor_green | random_smooth
//! a = 1.0                     # abc only, default 1
//! scale = 1.0                 # optional multiplier on the base field
//! perturbation = 0.5          # optional random_smooth perturbation amplitude
//! perturbation_seed = 7
//!
//! [output]
//! dir = "out"
//! sample_every = 10
//!
//! [study]
//! parameter = "alpha"         # alpha | nu
//! values = [0.2, 0.1, 0.05, 0.025]
//! mode = "to_euler"           # to_euler | to_nse | fixed_alpha | joint
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::json;
use thiserror::Error;
use toml::{Table, Value};

use crate::nonlinear::DealiasScheme;
use crate::solver::{initial_condition, InitialCondition, SolverParams};
use crate::spectral::{SpectralField, WaveGrid};
use crate::study::{AlphaMode, ViscosityMode};

pub const DEFAULT_SAMPLE_EVERY: u64 = 10;
pub const DEFAULT_OUTPUT_DIR: &str = "output";
pub const DEFAULT_DECAY_S: f64 = 4.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} not found")]
    Missing(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid override {0:?}: {1}")]
    Override(String, String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Base field plus an optional random perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub base: InitialCondition,
    pub scale: f64,
    /// `(amplitude, seed, decay_s)` of an added `random_smooth` field.
    pub perturbation: Option<(f64, u64, f64)>,
}

impl InitialData {
    pub fn plain(base: InitialCondition) -> Self {
        Self {
            base,
            scale: 1.0,
            perturbation: None,
        }
    }

    /// `scale * base + amplitude * random_smooth(seed, decay_s)`.
    pub fn build(&self, grid: &Arc<WaveGrid>) -> SpectralField {
        let mut u = initial_condition(&self.base, grid);
        if self.scale != 1.0 {
            u.scale(self.scale);
        }
        if let Some((amp, seed, decay_s)) = self.perturbation {
            let p = initial_condition(&InitialCondition::RandomSmooth { seed, decay_s }, grid);
            u.axpy(amp, &p);
        }
        u
    }

    fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self.base).unwrap_or_default();
        v["scale"] = json!(self.scale);
        if let Some((amp, seed, decay_s)) = self.perturbation {
            v["perturbation"] = json!({ "amplitude": amp, "seed": seed, "decay_s": decay_s });
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub sample_every: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyKind {
    Alpha(AlphaMode),
    Viscosity(ViscosityMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: SolverParams,
    pub ic: InitialData,
    pub output: OutputConfig,
    pub study: Option<StudyConfig>,
    /// Advisory messages from validation, e.g. regimes outside the proved windows.
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Normalized, fully defaulted view of the configuration.
    pub fn echo(&self) -> serde_json::Value {
        let p = &self.solver;
        let study = self.study.as_ref().map(|s| {
            let (parameter, mode) = match s.kind {
                StudyKind::Alpha(m) => ("alpha", serde_json::to_value(m).unwrap_or_default()),
                StudyKind::Viscosity(m) => ("nu", serde_json::to_value(m).unwrap_or_default()),
            };
            json!({ "parameter": parameter, "mode": mode, "values": s.values })
        });
        json!({
            "solver": {
                "nu": p.nu, "alpha": p.alpha, "r": p.r, "N": p.n, "dt": p.dt,
                "t_end": p.t_end, "dealias": p.dealias,
            },
            "ic": self.ic.echo(),
            "output": {
                "dir": self.output.dir.display().to_string(),
                "sample_every": self.output.sample_every,
            },
            "study": study,
        })
    }
}

const SOLVER_KEYS: &[&str] = &["nu", "alpha", "r", "N", "dt", "t_end", "dealias"];
const IC_KEYS: &[&str] = &[
    "kind",
    "a",
    "b",
    "c",
    "seed",
    "decay_s",
    "scale",
    "perturbation",
    "perturbation_seed",
    "perturbation_decay_s",
];
const OUTPUT_KEYS: &[&str] = &["dir", "sample_every"];
const STUDY_KEYS: &[&str] = &["parameter", "values", "mode"];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "solver" => Some(SOLVER_KEYS),
        "ic" => Some(IC_KEYS),
        "output" => Some(OUTPUT_KEYS),
        "study" => Some(STUDY_KEYS),
        _ => None,
    }
}

const SECTIONS: &[&str] = &["solver", "ic", "output", "study"];

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    load_config_with(path, &[])
}

/// Reads a config file, applies `key=value` overrides, then validates.
pub fn load_config_with(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ConfigError::Missing(path.to_path_buf())
        } else {
            ConfigError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    parse_config(&text, overrides)
}

/// Parses config text, applies overrides, then validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    from_table(&table)
}

/// Sets one `key=value` pair. `key` is either `section.key` or a bare key
/// that belongs to exactly one section. Values are read as TOML, falling
/// back to a plain string.
pub fn apply_override(table: &mut Table, entry: &str) -> Result<(), ConfigError> {
    let bad = |msg: &str| ConfigError::Override(entry.to_string(), msg.to_string());
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| bad("expected key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let (section, field) = match key.split_once('.') {
        Some((s, f)) => {
            let keys = section_keys(s).ok_or_else(|| bad("unknown section"))?;
            if !keys.contains(&f) {
                return Err(bad("unknown key"));
            }
            (s, f)
        }
        None => {
            let owners: Vec<&str> = SECTIONS
                .iter()
                .copied()
                .filter(|s| section_keys(s).is_some_and(|k| k.contains(&key)))
                .collect();
            match owners.as_slice() {
                [one] => (*one, key),
                [] => return Err(bad("unknown key")),
                _ => return Err(bad("ambiguous key, use section.key")),
            }
        }
    };
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| Value::Table(Table::new()));
    match entry {
        Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(bad("section is not a table")),
    }
}

/// Collects typed values from a section, recording every problem.
struct Reader<'a> {
    section: &'static str,
    table: Option<&'a Table>,
    errors: &'a mut Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn has(&self, key: &str) -> bool {
        self.raw(key).is_some()
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                let msg = format!(
                    "{}.{key}: expected a number, got {}",
                    self.section,
                    other.type_str()
                );
                self.errors.push(msg);
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            other => {
                let msg = format!(
                    "{}.{key}: expected a non-negative integer, got {other}",
                    self.section
                );
                self.errors.push(msg);
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                let msg = format!(
                    "{}.{key}: expected a string, got {}",
                    self.section,
                    other.type_str()
                );
                self.errors.push(msg);
                None
            }
        }
    }

    fn required_float(&mut self, key: &str) -> Option<f64> {
        if !self.has(key) {
            self.errors
                .push(format!("{}.{key}: required", self.section));
            return None;
        }
        self.float(key)
    }

    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let Value::Array(items) = self.raw(key)? else {
            self.errors.push(format!(
                "{}.{key}: expected an array of numbers",
                self.section
            ));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match item {
                Value::Float(x) => out.push(*x),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    self.errors.push(format!(
                        "{}.{key}: expected an array of numbers",
                        self.section
                    ));
                    return None;
                }
            }
        }
        Some(out)
    }
}

fn from_table(table: &Table) -> Result<RunConfig, ConfigError> {
    let mut errors = Vec::new();
    let mut sections: BTreeMap<&'static str, &Table> = BTreeMap::new();
    for (name, value) in table {
        let Some(known) = SECTIONS.iter().find(|s| **s == name) else {
            errors.push(format!("unknown section [{name}]"));
            continue;
        };
        let Value::Table(t) = value else {
            errors.push(format!("{name}: expected a section"));
            continue;
        };
        let keys = section_keys(known).unwrap_or_default();
        for k in t.keys() {
            if !keys.contains(&k.as_str()) {
                errors.push(format!("{name}.{k}: unknown key"));
            }
        }
        sections.insert(known, t);
    }
    if !sections.contains_key("solver") {
        errors.push("missing section [solver]".into());
    }
    if !sections.contains_key("ic") {
        errors.push("missing section [ic]".into());
    }

    let mut solver = Reader {
        section: "solver",
        table: sections.get("solver").copied(),
        errors: &mut errors,
    };
    let nu = solver.required_float("nu");
    let alpha = solver.required_float("alpha");
    let r = solver.required_float("r");
    let n = if solver.has("N") {
        solver.uint("N")
    } else {
        solver.errors.push("solver.N: required".into());
        None
    };
    let dt = solver.required_float("dt");
    let t_end = solver.required_float("t_end");
    let dealias = match solver.string("dealias").as_deref() {
        None | Some("two_thirds") => Some(DealiasScheme::TwoThirds),
        Some("none") => Some(DealiasScheme::None),
        Some(other) => {
            solver.errors.push(format!(
                "solver.dealias: expected two_thirds or none, got {other:?}"
            ));
            None
        }
    };

    let ic = read_ic(&mut Reader {
        section: "ic",
        table: sections.get("ic").copied(),
        errors: &mut errors,
    });

    let mut output = Reader {
        section: "output",
        table: sections.get("output").copied(),
        errors: &mut errors,
    };
    let dir = output
        .string("dir")
        .unwrap_or_else(|| DEFAULT_OUTPUT_DIR.to_string());
    let sample_every = output.uint("sample_every").unwrap_or(DEFAULT_SAMPLE_EVERY);
    if sample_every == 0 {
        output
            .errors
            .push("output.sample_every: must be >= 1".into());
    }

    let study = sections.get("study").and_then(|t| {
        read_study(
            &mut Reader {
                section: "study",
                table: Some(t),
                errors: &mut errors,
            },
            nu.unwrap_or(0.0),
        )
    });

    let mut warnings = Vec::new();
    if let (Some(nu), Some(alpha), Some(r), Some(n), Some(dt), Some(t_end), Some(dealias)) =
        (nu, alpha, r, n, dt, t_end, dealias)
    {
        let mut p = SolverParams::new(nu, alpha, r, n as usize, dt, t_end);
        p.dealias = dealias;
        match p.validate() {
            Ok(w) => warnings = w,
            Err(issues) => errors.extend(issues.iter().map(|i| format!("solver.{i}"))),
        }
        if errors.is_empty() {
            if let Some(ic) = ic {
                return Ok(RunConfig {
                    solver: p,
                    ic,
                    output: OutputConfig {
                        dir: PathBuf::from(dir),
                        sample_every,
                    },
                    study,
                    warnings,
                });
            }
        }
    }
    if errors.is_empty() {
        errors.push("incomplete configuration".into());
    }
    Err(ConfigError::Invalid(errors))
}

fn read_ic(rd: &mut Reader<'_>) -> Option<InitialData> {
    let kind = match rd.string("kind") {
        Some(k) => k,
        None => {
            if !rd.has("kind") && rd.table.is_some() {
                rd.errors.push("ic.kind: required".into());
            }
            return None;
        }
    };
    let allowed: &[&str] = match kind.as_str() {
        "abc" => &["a", "b", "c"],
        "taylor_green" => &[],
        "random_smooth" => &["seed", "decay_s"],
        other => {
            rd.errors.push(format!(
                "ic.kind: expected abc, taylor_green or random_smooth, got {other:?}"
            ));
            return None;
        }
    };
    for key in ["a", "b", "c", "seed", "decay_s"] {
        if rd.has(key) && !allowed.contains(&key) {
            rd.errors
                .push(format!("ic.{key}: not used by kind {kind:?}"));
        }
    }
    let base = match kind.as_str() {
        "abc" => InitialCondition::Abc {
            a: rd.float("a").unwrap_or(1.0),
            b: rd.float("b").unwrap_or(1.0),
            c: rd.float("c").unwrap_or(1.0),
        },
        "taylor_green" => InitialCondition::TaylorGreen,
        _ => InitialCondition::RandomSmooth {
            seed: rd.uint("seed").unwrap_or(0),
            decay_s: rd.float("decay_s").unwrap_or(DEFAULT_DECAY_S),
        },
    };
    let scale = rd.float("scale").unwrap_or(1.0);
    let perturbation = match rd.float("perturbation") {
        Some(amp) => Some((
            amp,
            rd.uint("perturbation_seed").unwrap_or(1),
            rd.float("perturbation_decay_s").unwrap_or(DEFAULT_DECAY_S),
        )),
        None => {
            for key in ["perturbation_seed", "perturbation_decay_s"] {
                if rd.has(key) {
                    rd.errors
                        .push(format!("ic.{key}: set without ic.perturbation"));
                }
            }
            None
        }
    };
    for (name, x) in [
        ("scale", Some(scale)),
        ("perturbation", perturbation.map(|p| p.0)),
    ] {
        if let Some(x) = x {
            if !x.is_finite() {
                rd.errors.push(format!("ic.{name}: must be finite"));
            }
        }
    }
    Some(InitialData {
        base,
        scale,
        perturbation,
    })
}

fn read_study(rd: &mut Reader<'_>, nu: f64) -> Option<StudyConfig> {
    let parameter = rd.string("parameter");
    let values = rd.float_list("values");
    if parameter.is_none() && !rd.has("parameter") {
        rd.errors.push("study.parameter: required".into());
    }
    if values.is_none() && !rd.has("values") {
        rd.errors.push("study.values: required".into());
    }
    let mode = rd.string("mode");
    let kind = match (parameter.as_deref(), mode.as_deref()) {
        (Some("alpha"), None) if nu == 0.0 => StudyKind::Alpha(AlphaMode::ToEuler),
        (Some("alpha"), None) => StudyKind::Alpha(AlphaMode::ToNse),
        (Some("alpha"), Some("to_euler")) => StudyKind::Alpha(AlphaMode::ToEuler),
        (Some("alpha"), Some("to_nse")) => StudyKind::Alpha(AlphaMode::ToNse),
        (Some("nu"), None | Some("fixed_alpha")) => StudyKind::Viscosity(ViscosityMode::FixedAlpha),
        (Some("nu"), Some("joint")) => StudyKind::Viscosity(ViscosityMode::Joint),
        (Some(p @ ("alpha" | "nu")), Some(m)) => {
            rd.errors
                .push(format!("study.mode: {m:?} is not a mode for parameter {p}"));
            return None;
        }
        (Some(p), _) => {
            rd.errors
                .push(format!("study.parameter: expected alpha or nu, got {p:?}"));
            return None;
        }
        (None, _) => return None,
    };
    let values = values?;
    if values.is_empty() {
        rd.errors.push("study.values: must not be empty".into());
        return None;
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        rd.errors
            .push("study.values: entries must be finite and >= 0".into());
        return None;
    }
    Some(StudyConfig { kind, values })
}
