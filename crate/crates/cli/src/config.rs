//! Experiment configuration: strict JSON parsing, defaults, and field-level
//! validation. Every problem found is reported, not just the first one.
//!
//! The defaults table lives in `CONFIG.md` next to this crate's manifest.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use viscowave::convergence::{InitialPolicy, TimePolicy};
use viscowave::kernels::power_law_scale_for_kappa;
use viscowave::volterra::{Projection, Scheme};
use viscowave::KernelVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ValidateKernel,
    Solve,
    PicardCertify,
    Convergence,
}

impl Command {
    const NAMES: [(&'static str, Command); 4] = [
        ("validate-kernel", Command::ValidateKernel),
        ("solve", Command::Solve),
        ("picard-certify", Command::PicardCertify),
        ("convergence", Command::Convergence),
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceChoice {
    Fem,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub kind: SpaceChoice,
    /// Polynomial degree of the FEM space (1 or 2).
    pub degree: usize,
    /// Elements per side (FEM) or modes (spectral) for single solves.
    pub size: usize,
    /// Refinement sizes for convergence studies.
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `amplitude · sin(kπx) cos(ωt)` on (0, 1).
    #[serde(rename = "sine_1d")]
    Sine1d,
    /// `amplitude · sin(πx) sin(πy) cos(ωt)` on the unit square.
    #[serde(rename = "sine_2d")]
    Sine2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub family: Family,
    pub wavenumber: usize,
    pub omega: f64,
    pub amplitude: f64,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scheme: Scheme,
    /// Time steps `N` (the grid has `N + 1` nodes).
    pub steps: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// Time resolution policy of convergence studies.
    pub time_policy: TimePolicy,
    pub initial: InitialPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    /// Number of random piecewise-linear test functions for the
    /// positive-type check.
    pub positive_type_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub kernel: KernelVariant,
    pub space: SpaceConfig,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub validation: ValidationConfig,
    /// Directory for artifacts.
    pub output: String,
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is plain data")
    }
}

/// Why a config was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// The text is not JSON or repeats a key.
    Syntax(String),
    /// One entry per offending field, dotted path first.
    Fields(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax(m) => write!(f, "config parse error: {m}"),
            ConfigError::Fields(list) => {
                writeln!(f, "config has {} error(s):", list.len())?;
                for e in list {
                    writeln!(f, "  {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// JSON value that rejects repeated keys while deserializing.
struct StrictValue(Value);

impl<'de> Deserialize<'de> for StrictValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(StrictVisitor)
    }
}

struct StrictVisitor;

impl<'de> Visitor<'de> for StrictVisitor {
    type Value = StrictValue;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::Bool(v)))
    }
    fn visit_i64<E>(self, v: i64) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::from(v)))
    }
    fn visit_u64<E>(self, v: u64) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::from(v)))
    }
    fn visit_f64<E>(self, v: f64) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::from(v)))
    }
    fn visit_str<E>(self, v: &str) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::String(v.to_owned())))
    }
    fn visit_string<E>(self, v: String) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::String(v)))
    }
    fn visit_unit<E>(self) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::Null))
    }
    fn visit_none<E>(self) -> Result<StrictValue, E> {
        Ok(StrictValue(Value::Null))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<StrictValue, A::Error> {
        let mut out = Vec::new();
        while let Some(StrictValue(v)) = seq.next_element()? {
            out.push(v);
        }
        Ok(StrictValue(Value::Array(out)))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<StrictValue, A::Error> {
        let mut out = Map::new();
        while let Some(key) = map.next_key::<String>()? {
            if out.contains_key(&key) {
                return Err(de::Error::custom(format!("duplicate key `{key}`")));
            }
            let StrictValue(v) = map.next_value()?;
            out.insert(key, v);
        }
        Ok(StrictValue(Value::Object(out)))
    }
}

/// Reads fields of one JSON object, recording errors and consumed keys.
struct Section<'a, 'e> {
    path: String,
    obj: Option<&'a Map<String, Value>>,
    seen: Vec<&'static str>,
    errors: &'e mut Vec<String>,
}

impl<'a, 'e> Section<'a, 'e> {
    fn new(path: &str, value: Option<&'a Value>, errors: &'e mut Vec<String>) -> Self {
        let obj = match value {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m),
            Some(_) => {
                errors.push(format!("{path}: expected an object"));
                None
            }
        };
        Self { path: path.to_owned(), obj, seen: Vec::new(), errors }
    }

    fn key(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.obj.and_then(|m| m.get(key)).filter(|v| !v.is_null())
    }

    fn has(&self, key: &str) -> bool {
        self.obj.is_some_and(|m| m.get(key).is_some_and(|v| !v.is_null()))
    }

    fn error(&mut self, key: &str, message: impl fmt::Display) {
        let k = self.key(key);
        self.errors.push(format!("{k}: {message}"));
    }

    fn f64_in(&mut self, key: &'static str, default: Option<f64>, ok: impl Fn(f64) -> bool, range: &str) -> f64 {
        self.f64_labeled(key, key, default, ok, range)
    }

    /// As `f64_in`, naming the quantity `label` in range errors.
    fn f64_labeled(
        &mut self,
        key: &'static str,
        label: &str,
        default: Option<f64>,
        ok: impl Fn(f64) -> bool,
        range: &str,
    ) -> f64 {
        match self.raw(key) {
            None => default.unwrap_or_else(|| {
                self.error(key, "missing required number");
                f64::NAN
            }),
            Some(v) => match v.as_f64() {
                Some(x) if ok(x) => x,
                Some(x) => {
                    self.error(key, format!("{label} must lie in {range}, got {x}"));
                    f64::NAN
                }
                None => {
                    self.error(key, format!("expected a number, got {v}"));
                    f64::NAN
                }
            },
        }
    }

    fn usize_in(&mut self, key: &'static str, default: usize, lo: usize, hi: usize) -> usize {
        match self.raw(key) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) if (lo as u64..=hi as u64).contains(&x) => x as usize,
                _ => {
                    self.error(key, format!("expected an integer in [{lo}, {hi}], got {v}"));
                    default
                }
            },
        }
    }

    fn choice<T: Copy>(&mut self, key: &'static str, default: Option<T>, options: &[(&str, T)]) -> Option<T> {
        let names = options.iter().map(|(n, _)| format!("`{n}`")).collect::<Vec<_>>().join(", ");
        match self.raw(key) {
            None => {
                if default.is_none() {
                    self.error(key, format!("missing; expected one of {names}"));
                }
                default
            }
            Some(Value::String(s)) => match options.iter().find(|(n, _)| n == s) {
                Some((_, v)) => Some(*v),
                None => {
                    self.error(key, format!("unknown value `{s}`; expected one of {names}"));
                    None
                }
            },
            Some(v) => {
                self.error(key, format!("expected a string, got {v}"));
                None
            }
        }
    }

    fn child(&mut self, key: &'static str) -> Option<&'a Value> {
        self.raw(key)
    }

    /// Reports keys present in the object but never read.
    fn finish(self) {
        if let Some(m) = self.obj {
            for k in m.keys() {
                if !self.seen.contains(&k.as_str()) {
                    let path = if self.path.is_empty() { k.clone() } else { format!("{}.{k}", self.path) };
                    self.errors.push(format!("{path}: unknown key"));
                }
            }
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 60;

fn parse_kernel(value: Option<&Value>, horizon: f64, errors: &mut Vec<String>) -> KernelVariant {
    let mut s = Section::new("kernel", value, errors);
    if value.is_none() {
        return KernelVariant::Zero;
    }
    let variant = s.choice("variant", None, &[("exponential", 0), ("power_law", 1), ("zero", 2)]);
    let kernel = match variant {
        Some(0) => {
            let amplitude = s.f64_in("amplitude", None, |x| x >= 0.0 && x.is_finite(), "[0, inf)");
            let rate = s.f64_in("rate", None, |x| x > 0.0 && x.is_finite(), "(0, inf)");
            KernelVariant::Exponential { amplitude, rate }
        }
        Some(1) => {
            let exponent = s.f64_labeled("exponent", "alpha", None, |x| x > 0.0 && x < 1.0, "(0,1)");
            let exponent_ok = exponent.is_finite();
            let scale = match (s.has("scale"), s.has("kappa")) {
                (true, true) => {
                    s.raw("scale");
                    s.raw("kappa");
                    s.error("kappa", "give either scale or kappa, not both");
                    f64::NAN
                }
                (false, true) => {
                    let kappa = s.f64_in("kappa", None, |x| x > 0.0 && x.is_finite(), "(0, inf)");
                    if exponent_ok && horizon > 0.0 {
                        power_law_scale_for_kappa(exponent, kappa, horizon)
                    } else {
                        f64::NAN
                    }
                }
                _ => s.f64_in("scale", None, |x| x > 0.0 && x.is_finite(), "(0, inf)"),
            };
            KernelVariant::PowerLaw { exponent, scale }
        }
        _ => KernelVariant::Zero,
    };
    s.finish();
    kernel
}

fn parse_sizes(s: &mut Section, key: &'static str, default: Vec<usize>) -> Vec<usize> {
    match s.raw(key) {
        None => default,
        Some(Value::Array(items)) => {
            let parsed: Option<Vec<usize>> =
                items.iter().map(|v| v.as_u64().filter(|&x| (1..=4096).contains(&x)).map(|x| x as usize)).collect();
            match parsed {
                Some(v) if v.len() >= 3 && v.windows(2).all(|w| w[0] < w[1]) => v,
                Some(_) => {
                    s.error(key, "need at least 3 strictly increasing sizes");
                    default
                }
                None => {
                    s.error(key, "sizes must be integers in [1, 4096]");
                    default
                }
            }
        }
        Some(v) => {
            s.error(key, format!("expected an array of integers, got {v}"));
            default
        }
    }
}

fn parse_projection(s: &mut Section, key: &'static str, default: Projection) -> Projection {
    s.choice(
        key,
        Some(default),
        &[
            ("l2", Projection::L2),
            ("ritz", Projection::Ritz),
            ("fourier", Projection::Fourier),
            ("interpolation", Projection::Interpolation),
        ],
    )
    .unwrap_or(default)
}

fn parse_time_policy(value: Option<&Value>, errors: &mut Vec<String>) -> TimePolicy {
    let mut s = Section::new("solver.time_policy", value, errors);
    if value.is_none() {
        return TimePolicy::Auto;
    }
    let policy = match s.choice("policy", None, &[("auto", 0), ("power_of_h", 1), ("fixed", 2)]) {
        Some(1) => TimePolicy::PowerOfH {
            exponent: s.f64_in("exponent", Some(1.0), |x| x > 0.0 && x <= 4.0, "(0, 4]"),
            factor: s.f64_in("factor", Some(1.0), |x| x > 0.0 && x.is_finite(), "(0, inf)"),
        },
        Some(2) => TimePolicy::Fixed { steps: s.usize_in("steps", 2048, 8, 1 << 20) },
        _ => TimePolicy::Auto,
    };
    s.finish();
    policy
}

/// Parses and validates a config, filling documented defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let StrictValue(root) = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();
    let mut top = Section::new("", Some(&root), &mut errors);
    let command = top.choice("command", None, &Command::NAMES);
    let kernel_v = top.child("kernel");
    let space_v = top.child("space");
    let problem_v = top.child("problem");
    let solver_v = top.child("solver");
    let validation_v = top.child("validation");
    let output = match top.raw("output") {
        None => ".".to_owned(),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(v) => {
            top.error("output", format!("expected a directory path, got {v}"));
            ".".to_owned()
        }
    };
    top.finish();

    let problem = {
        let mut s = Section::new("problem", problem_v, &mut errors);
        let family = s.choice("family", Some(Family::Sine1d), &[("sine_1d", Family::Sine1d), ("sine_2d", Family::Sine2d)]);
        let p = ProblemConfig {
            family: family.unwrap_or(Family::Sine1d),
            wavenumber: s.usize_in("wavenumber", 1, 1, 64),
            omega: s.f64_in("omega", Some(std::f64::consts::PI), |x| x.is_finite(), "(-inf, inf)"),
            amplitude: s.f64_in("amplitude", Some(1.0), |x| x.is_finite(), "(-inf, inf)"),
            final_time: s.f64_in("final_time", Some(1.0), |x| x > 0.0 && x.is_finite(), "(0, inf)"),
        };
        s.finish();
        p
    };

    let kernel = parse_kernel(kernel_v, problem.final_time, &mut errors);

    let space = {
        let mut s = Section::new("space", space_v, &mut errors);
        let kind = s.choice("kind", Some(SpaceChoice::Fem), &[("fem", SpaceChoice::Fem), ("spectral", SpaceChoice::Spectral)]);
        let kind = kind.unwrap_or(SpaceChoice::Fem);
        let degree = s.usize_in("degree", 1, 1, 2);
        let default_size = if kind == SpaceChoice::Spectral { 4 } else { 16 };
        let size = s.usize_in("size", default_size, 1, 4096);
        let sizes = parse_sizes(&mut s, "sizes", vec![8, 16, 32, 64]);
        s.finish();
        SpaceConfig { kind, degree, size, sizes }
    };
    if space.kind == SpaceChoice::Spectral && problem.family == Family::Sine2d {
        errors.push("space.kind: spectral spaces are one dimensional; family `sine_2d` needs `fem`".into());
    }

    let solver = {
        let mut s = Section::new("solver", solver_v, &mut errors);
        let scheme = s
            .choice("scheme", Some(Scheme::Newmark), &[("newmark", Scheme::Newmark), ("trapezoidal", Scheme::Trapezoidal)])
            .unwrap_or_default();
        let steps = s.usize_in("steps", 256, 8, 1 << 20);
        let tol = s.f64_in("tol", Some(DEFAULT_TOL), |x| x > 0.0 && x < 1.0, "(0, 1)");
        let max_iters = s.usize_in("max_iters", DEFAULT_MAX_ITERS, 1, 10_000);
        let policy_v = s.child("time_policy");
        let initial_v = s.child("initial");
        s.finish();
        let time_policy = parse_time_policy(policy_v, &mut errors);
        let mut s = Section::new("solver.initial", initial_v, &mut errors);
        let displacement = parse_projection(&mut s, "displacement", Projection::Ritz);
        let velocity = parse_projection(&mut s, "velocity", Projection::L2);
        s.finish();
        SolverConfig { scheme, steps, tol, max_iters, time_policy, initial: InitialPolicy { displacement, velocity } }
    };
    let fourier = [solver.initial.displacement, solver.initial.velocity].contains(&Projection::Fourier);
    if fourier && space.kind == SpaceChoice::Fem {
        errors.push("solver.initial: `fourier` projections need a spectral space".into());
    }

    let validation = {
        let mut s = Section::new("validation", validation_v, &mut errors);
        let v = ValidationConfig {
            positive_type_samples: s.usize_in("positive_type_samples", 20, 0, 10_000),
            seed: match s.raw("seed") {
                None => 0,
                Some(v) => v.as_u64().unwrap_or_else(|| {
                    s.error("seed", format!("expected a nonnegative integer, got {v}"));
                    0
                }),
            },
        };
        s.finish();
        v
    };

    match (command, errors.is_empty()) {
        (Some(command), true) => {
            Ok(ExperimentConfig { command, kernel, space, problem, solver, validation, output })
        }
        _ => Err(ConfigError::Fields(errors)),
    }
}

/// Documented defaults, keyed by dotted path, for `--help`-style listings.
pub fn defaults_table() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("kernel", "{\"variant\": \"zero\"}"),
        ("output", "\".\""),
        ("problem.amplitude", "1.0"),
        ("problem.family", "\"sine_1d\""),
        ("problem.final_time", "1.0"),
        ("problem.omega", "pi"),
        ("problem.wavenumber", "1"),
        ("solver.initial.displacement", "\"ritz\""),
        ("solver.initial.velocity", "\"l2\""),
        ("solver.max_iters", "60"),
        ("solver.scheme", "\"newmark\""),
        ("solver.steps", "256"),
        ("solver.time_policy", "{\"policy\": \"auto\"}"),
        ("solver.tol", "1e-10"),
        ("space.degree", "1"),
        ("space.kind", "\"fem\""),
        ("space.size", "16 (fem), 4 (spectral)"),
        ("space.sizes", "[8, 16, 32, 64]"),
        ("validation.positive_type_samples", "20"),
        ("validation.seed", "0"),
    ])
}
