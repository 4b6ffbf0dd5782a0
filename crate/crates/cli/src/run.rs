use std::fs;
use std::path::{Path, PathBuf};

use malgpro::adjoint::adsgd_solve;
use malgpro::benchmarks::BenchmarkProblem;
use malgpro::malgpro::{solve, Method, SolveResult};
use serde_json::json;

use crate::error::CliError;
use crate::spec::RunSpec;

pub const CONVERGENCE_HEADER: [&str; 7] = ["repetition", "iteration", "J", "J_stderr", "grad_norm", "E_c", "seed"];
pub const TIMING_HEADER: [&str; 3] = ["repetition", "iteration", "wall_ms"];
pub const COMPARE_HEADER: [&str; 7] = ["spec", "method", "problem", "final_E_c", "final_J", "mean_wall_ms", "iterations"];

/// Outcome of every repetition of one spec.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub spec: RunSpec,
    pub results: Vec<SolveResult<f64>>,
}

impl RunReport {
    pub fn final_control_errors(&self) -> Option<Vec<f64>> {
        self.results.iter().map(|r| r.final_control_error).collect()
    }

    /// Last recorded objective of each repetition; NaN when no iteration ran.
    pub fn final_objectives(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.objective.last().copied().unwrap_or(f64::NAN)).collect()
    }

    pub fn mean_wall_ms(&self) -> f64 {
        mean(&self.results.iter().map(|r| r.mean_wall_ms()).collect::<Vec<_>>())
    }

    pub fn mean_iterations(&self) -> f64 {
        mean(&self.results.iter().map(|r| r.iterations() as f64).collect::<Vec<_>>())
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for a single value.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Runs every repetition of `spec` on `bench`, sequentially.
pub fn solve_spec(spec: &RunSpec, bench: &BenchmarkProblem<f64>) -> Result<RunReport, CliError> {
    let method = spec.method()?;
    let mut results = Vec::with_capacity(spec.repetitions);
    for r in 0..spec.repetitions {
        let opts = spec.options(bench, r)?;
        let result = match method {
            Method::MalGpro => solve(&bench.problem, &opts),
            Method::AdSgd => adsgd_solve(&bench.problem, &opts),
        }
        .map_err(|e| match CliError::from(e) {
            CliError::Instability(m) => {
                CliError::Instability(format!("{} on `{}`, repetition {r}: {m}", spec.method, spec.problem))
            }
            other => other,
        })?;
        results.push(result);
    }
    Ok(RunReport { spec: spec.clone(), results })
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

/// Writes convergence.csv, timing.csv, control.csv and summary.json into `out`.
pub fn write_artifacts(report: &RunReport, bench: &BenchmarkProblem<f64>, out: &Path) -> Result<(), CliError> {
    create_dir(out)?;
    let spec = &report.spec;

    let mut conv = writer(&out.join("convergence.csv"))?;
    conv.write_record(CONVERGENCE_HEADER)?;
    let mut timing = writer(&out.join("timing.csv"))?;
    timing.write_record(TIMING_HEADER)?;
    for (r, res) in report.results.iter().enumerate() {
        let seed = spec.master_seed.wrapping_add(r as u64).to_string();
        for i in 0..res.iterations() {
            let ec = res.control_error.get(i).map(|&e| num(e)).unwrap_or_default();
            conv.write_record([
                r.to_string(),
                i.to_string(),
                num(res.objective[i]),
                num(res.objective_std_error[i]),
                num(res.gradient_norm[i]),
                ec,
                seed.clone(),
            ])?;
            timing.write_record([r.to_string(), i.to_string(), num(res.wall_ms[i])])?;
        }
    }
    conv.flush()?;
    timing.flush()?;

    let k = bench.problem.dims().control;
    let reference = bench.reference_on(spec.steps)?;
    let mut control = writer(&out.join("control.csv"))?;
    let mut header = vec!["repetition".to_string(), "t".to_string()];
    header.extend((1..=k).map(|i| format!("u_{i}")));
    if reference.is_some() {
        header.extend((1..=k).map(|i| format!("ua_{i}")));
    }
    control.write_record(&header)?;
    for (r, res) in report.results.iter().enumerate() {
        let grid = res.control.grid();
        for j in 0..grid.steps() {
            let mut row = vec![r.to_string(), num(grid.node(j))];
            row.extend(res.control.at(j).iter().map(|&v| num(v)));
            if let Some(ua) = &reference {
                row.extend(ua.at(j).iter().map(|&v| num(v)));
            }
            control.write_record(&row)?;
        }
    }
    control.flush()?;

    let errors = report.final_control_errors();
    let objectives = report.final_objectives();
    let summary = json!({
        "library_version": env!("CARGO_PKG_VERSION"),
        "problem": spec.problem,
        "method": spec.method,
        "master_seed": spec.master_seed,
        "repetitions": report.results.iter().enumerate().map(|(r, res)| json!({
            "repetition": r,
            "seed": spec.master_seed.wrapping_add(r as u64),
            "iterations": res.iterations(),
            "termination": res.termination.as_str(),
            "final_E_c": res.final_control_error,
            "final_J": res.objective.last(),
            "mean_wall_ms": res.mean_wall_ms(),
        })).collect::<Vec<_>>(),
        "final_E_c": errors.as_ref().map(|e| json!({ "mean": mean(e), "std": std_dev(e) })),
        "final_J": json!({ "mean": mean(&objectives), "std": std_dev(&objectives) }),
        "termination": report.results.iter().map(|r| r.termination.as_str()).collect::<Vec<_>>(),
        "mean_wall_ms": report.mean_wall_ms(),
        "spec": spec,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    let path = out.join("summary.json");
    fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Output directory: command line, then spec, then `out`.
pub fn output_dir(cli: Option<&Path>, spec: &RunSpec) -> PathBuf {
    cli.map(Path::to_path_buf).or_else(|| spec.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

/// Solves `spec` and writes its artifacts into `out`.
pub fn run(spec: &RunSpec, out: &Path) -> Result<RunReport, CliError> {
    let bench = spec.benchmark()?;
    create_dir(out)?;
    let report = solve_spec(spec, &bench)?;
    write_artifacts(&report, &bench, out)?;
    Ok(report)
}

/// Runs each spec and writes compare.csv with one row per spec.
pub fn compare(specs: &[(String, RunSpec)], out: &Path) -> Result<Vec<RunReport>, CliError> {
    let Some((_, first)) = specs.first() else {
        return Err(CliError::Validation("compare needs at least one spec".into()));
    };
    for (name, s) in specs {
        if s.problem != first.problem || s.lq_dim != first.lq_dim || s.lq_seed != first.lq_seed {
            return Err(CliError::Validation(format!("spec `{name}` uses a different problem than the first spec")));
        }
        if s.steps != first.steps || s.horizon != first.horizon {
            return Err(CliError::Validation(format!("spec `{name}` uses a different grid than the first spec")));
        }
    }
    create_dir(out)?;
    let bench = first.benchmark()?;
    let mut reports = Vec::with_capacity(specs.len());
    let mut table = writer(&out.join("compare.csv"))?;
    table.write_record(COMPARE_HEADER)?;
    for (name, spec) in specs {
        let report = solve_spec(spec, &bench)?;
        let ec = report.final_control_errors().map(|e| num(mean(&e))).unwrap_or_default();
        table.write_record([
            name.clone(),
            spec.method.clone(),
            spec.problem.clone(),
            ec,
            num(mean(&report.final_objectives())),
            num(report.mean_wall_ms()),
            num(report.mean_iterations()),
        ])?;
        reports.push(report);
    }
    table.flush()?;
    Ok(reports)
}
