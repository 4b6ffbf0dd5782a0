use std::path::{Path, PathBuf};

use malgpro::benchmarks::{by_name, lq_problem, BenchmarkProblem, LQ_DEFAULT_DIM, LQ_DEFAULT_SEED, REGISTRY};
use malgpro::flow::FlowMode;
use malgpro::malgpro::{Method, RateSchedule, SolveOptions};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Keys accepted in a run specification, in echo order.
pub const KEYS: [&str; 18] = [
    "problem",
    "method",
    "horizon",
    "steps",
    "batch",
    "rate",
    "rate_start",
    "rate_end",
    "max_iterations",
    "gradient_tolerance",
    "stall_tolerance",
    "stall_window",
    "master_seed",
    "flow_mode",
    "repetitions",
    "out_dir",
    "lq_dim",
    "lq_seed",
];

/// Validated run specification. Every field has a default except `problem`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSpec {
    pub problem: String,
    pub method: String,
    /// Must equal the benchmark's horizon when given.
    pub horizon: Option<f64>,
    pub steps: usize,
    pub batch: usize,
    /// Constant rate, ignored when `rate_start` and `rate_end` are both set.
    pub rate: f64,
    pub rate_start: Option<f64>,
    pub rate_end: Option<f64>,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub stall_tolerance: f64,
    pub stall_window: usize,
    pub master_seed: u64,
    pub flow_mode: String,
    pub repetitions: usize,
    pub out_dir: Option<PathBuf>,
    /// LQ state and control dimension.
    pub lq_dim: Option<usize>,
    /// Seed of the LQ drift matrices.
    pub lq_seed: Option<u64>,
}

impl Default for RunSpec {
    fn default() -> Self {
        let d = SolveOptions::<f64>::default();
        Self {
            problem: String::new(),
            method: Method::MalGpro.as_str().into(),
            horizon: None,
            steps: d.steps,
            batch: d.batch,
            rate: 0.01,
            rate_start: None,
            rate_end: None,
            max_iterations: d.max_iterations,
            gradient_tolerance: d.gradient_tolerance,
            stall_tolerance: d.stall_tolerance,
            stall_window: d.stall_window,
            master_seed: d.master_seed,
            flow_mode: "factorized".into(),
            repetitions: 1,
            out_dir: None,
            lq_dim: None,
            lq_seed: None,
        }
    }
}

fn field<T: DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<Option<T>, CliError> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| CliError::Validation(format!("field `{key}`: {e}"))),
    }
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("field `{key}` must be positive and finite, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("field `{key}` must be non-negative and finite, got {v}")))
    }
}

impl RunSpec {
    /// Parses and validates a flat JSON object.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("spec is not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(CliError::Validation("spec must be a JSON object".into()));
        };
        let unknown: Vec<&str> = map.keys().map(String::as_str).filter(|k| !KEYS.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(CliError::Validation(format!("unknown keys: {}", unknown.join(", "))));
        }
        let d = Self::default();
        let problem: String =
            field(&map, "problem")?.ok_or_else(|| CliError::Validation("field `problem` is required".into()))?;
        let spec = Self {
            problem,
            method: field(&map, "method")?.unwrap_or(d.method),
            horizon: field(&map, "horizon")?,
            steps: field(&map, "steps")?.unwrap_or(d.steps),
            batch: field(&map, "batch")?.unwrap_or(d.batch),
            rate: field(&map, "rate")?.unwrap_or(d.rate),
            rate_start: field(&map, "rate_start")?,
            rate_end: field(&map, "rate_end")?,
            max_iterations: field(&map, "max_iterations")?.unwrap_or(d.max_iterations),
            gradient_tolerance: field(&map, "gradient_tolerance")?.unwrap_or(d.gradient_tolerance),
            stall_tolerance: field(&map, "stall_tolerance")?.unwrap_or(d.stall_tolerance),
            stall_window: field(&map, "stall_window")?.unwrap_or(d.stall_window),
            master_seed: field(&map, "master_seed")?.unwrap_or(d.master_seed),
            flow_mode: field(&map, "flow_mode")?.unwrap_or(d.flow_mode),
            repetitions: field(&map, "repetitions")?.unwrap_or(d.repetitions),
            out_dir: field(&map, "out_dir")?,
            lq_dim: field(&map, "lq_dim")?,
            lq_seed: field(&map, "lq_seed")?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !REGISTRY.contains(&self.problem.as_str()) {
            return Err(CliError::Validation(format!("unknown problem `{}`; valid ids: {}", self.problem, REGISTRY.join(", "))));
        }
        self.method()?;
        self.flow_mode()?;
        for (key, v) in [("steps", self.steps), ("batch", self.batch), ("repetitions", self.repetitions)] {
            if v == 0 {
                return Err(CliError::Validation(format!("field `{key}` must be positive")));
            }
        }
        positive("rate", self.rate)?;
        match (self.rate_start, self.rate_end) {
            (Some(s), Some(e)) => {
                positive("rate_start", s)?;
                positive("rate_end", e)?;
            }
            (None, None) => {}
            _ => return Err(CliError::Validation("fields `rate_start` and `rate_end` must be given together".into())),
        }
        if let Some(h) = self.horizon {
            positive("horizon", h)?;
        }
        non_negative("gradient_tolerance", self.gradient_tolerance)?;
        non_negative("stall_tolerance", self.stall_tolerance)?;
        if self.problem != "lq" && (self.lq_dim.is_some() || self.lq_seed.is_some()) {
            return Err(CliError::Validation("fields `lq_dim` and `lq_seed` apply only to problem `lq`".into()));
        }
        if self.lq_dim == Some(0) {
            return Err(CliError::Validation("field `lq_dim` must be positive".into()));
        }
        Ok(())
    }

    pub fn method(&self) -> Result<Method, CliError> {
        match self.method.as_str() {
            "mal-gpro" => Ok(Method::MalGpro),
            "ad-sgd" => Ok(Method::AdSgd),
            other => Err(CliError::Validation(format!("field `method`: unknown method `{other}`; valid: mal-gpro, ad-sgd"))),
        }
    }

    pub fn flow_mode(&self) -> Result<FlowMode, CliError> {
        match self.flow_mode.as_str() {
            "factorized" => Ok(FlowMode::Factorized),
            "dense" => Ok(FlowMode::Dense),
            other => Err(CliError::Validation(format!("field `flow_mode`: unknown mode `{other}`; valid: factorized, dense"))),
        }
    }

    pub fn rate_schedule(&self) -> RateSchedule<f64> {
        match (self.rate_start, self.rate_end) {
            (Some(start), Some(end)) => RateSchedule::Linear { start, end },
            _ => RateSchedule::Constant(self.rate),
        }
    }

    pub fn benchmark(&self) -> Result<BenchmarkProblem<f64>, CliError> {
        let bench = if self.problem == "lq" {
            lq_problem(self.lq_dim.unwrap_or(LQ_DEFAULT_DIM), self.lq_seed.unwrap_or(LQ_DEFAULT_SEED))?
        } else {
            by_name(&self.problem)?
        };
        if let Some(h) = self.horizon {
            let defined: f64 = bench.problem.horizon();
            if (h - defined).abs() > 1e-12 {
                return Err(CliError::Validation(format!(
                    "field `horizon`: problem `{}` is defined on [0, {}], got {h}",
                    self.problem, defined
                )));
            }
        }
        Ok(bench)
    }

    /// Solver options for one repetition.
    pub fn options(&self, bench: &BenchmarkProblem<f64>, repetition: usize) -> Result<SolveOptions<f64>, CliError> {
        Ok(SolveOptions {
            steps: self.steps,
            batch: self.batch,
            rate: self.rate_schedule(),
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            stall_tolerance: self.stall_tolerance,
            stall_window: self.stall_window,
            master_seed: self.master_seed.wrapping_add(repetition as u64),
            flow_mode: self.flow_mode()?,
            reference: bench.reference_on(self.steps)?,
            ..SolveOptions::default()
        })
    }
}

/// Reads and validates a spec file.
pub fn load_spec(path: &Path) -> Result<RunSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    RunSpec::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spec_fills_defaults() {
        let spec = RunSpec::from_json(
            r#"{"problem":"scalar-bs","method":"mal-gpro","steps":100,"batch":100,"rate":0.01,"max_iterations":300,"master_seed":42}"#,
        )
        .unwrap();
        assert_eq!(spec.master_seed, 42);
        assert_eq!(spec.max_iterations, 300);
        assert_eq!(spec.repetitions, 1);
        assert_eq!(spec.flow_mode, "factorized");
        assert_eq!(spec.rate_schedule(), RateSchedule::Constant(0.01));
    }

    #[test]
    fn zero_steps_names_the_field() {
        let err = RunSpec::from_json(r#"{"problem":"scalar-bs","steps":0}"#).unwrap_err();
        assert!(matches!(&err, CliError::Validation(m) if m.contains("`steps`")), "{err}");
    }

    #[test]
    fn unknown_problem_lists_registry() {
        let err = RunSpec::from_json(r#"{"problem":"nope"}"#).unwrap_err().to_string();
        for id in REGISTRY {
            assert!(err.contains(id), "{err}");
        }
    }

    #[test]
    fn unknown_keys_are_all_listed() {
        let err = RunSpec::from_json(r#"{"problem":"lq","colour":1,"speed":2}"#).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("speed"), "{err}");
    }

    #[test]
    fn ill_typed_field_is_named() {
        let err = RunSpec::from_json(r#"{"problem":"lq","batch":"many"}"#).unwrap_err().to_string();
        assert!(err.contains("`batch`"), "{err}");
    }

    #[test]
    fn missing_problem_is_reported() {
        let err = RunSpec::from_json(r#"{"steps":10}"#).unwrap_err().to_string();
        assert!(err.contains("`problem`"), "{err}");
    }

    #[test]
    fn half_a_schedule_is_rejected() {
        assert!(RunSpec::from_json(r#"{"problem":"lq","rate_start":0.01}"#).is_err());
        let spec = RunSpec::from_json(r#"{"problem":"lq","rate_start":0.01,"rate_end":0.03}"#).unwrap();
        assert_eq!(spec.rate_schedule(), RateSchedule::Linear { start: 0.01, end: 0.03 });
    }

    #[test]
    fn lq_parameters_only_for_lq() {
        assert!(RunSpec::from_json(r#"{"problem":"scalar-bs","lq_dim":3}"#).is_err());
        let spec = RunSpec::from_json(r#"{"problem":"lq","lq_dim":3,"lq_seed":7}"#).unwrap();
        assert_eq!(spec.benchmark().unwrap().problem.dims().state, 3);
    }

    #[test]
    fn horizon_must_match_the_benchmark() {
        let spec = RunSpec::from_json(r#"{"problem":"scalar-bs","horizon":2.0}"#).unwrap();
        assert!(matches!(spec.benchmark(), Err(CliError::Validation(_))));
    }

    #[test]
    fn unknown_method_is_rejected() {
        assert!(RunSpec::from_json(r#"{"problem":"lq","method":"newton"}"#).is_err());
    }
}
