//! Command execution and artifact writing.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;
use viscowave::convergence::{error_norms, run_convergence, ManufacturedProblem, SpatialMode, StudySpec};
use viscowave::galerkin::SpaceKind;
use viscowave::kernels::{positive_type_check, validate, KernelError, PiecewiseLinear};
use viscowave::volterra::{picard_iterate, time_step_solve, to_integral_equation, PicardOptions, SolverError};
use viscowave::{MemoryKernel, XiFunction};

use crate::config::{ExperimentConfig, Family, SpaceChoice};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VALIDATION: u8 = 1;
    pub const NON_CONVERGENCE: u8 = 2;
    pub const CONFIG: u8 = 3;
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Config(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Validation(_) => exit::VALIDATION,
            RunError::NonConvergence(_) => exit::NON_CONVERGENCE,
            RunError::Config(_) | RunError::Io { .. } => exit::CONFIG,
        }
    }
}

impl From<SolverError> for RunError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InadmissibleKernel { .. } => RunError::Validation(e.to_string()),
            SolverError::PicardNotConverged { .. } | SolverError::Linalg(_) => RunError::NonConvergence(e.to_string()),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl From<KernelError> for RunError {
    fn from(e: KernelError) -> Self {
        RunError::Config(e.to_string())
    }
}

/// Result of a successful or partially successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub lines: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    /// Nonzero when artifacts were written but the run still failed.
    pub exit_code: u8,
    pub failure: Option<String>,
}

struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_owned(), source })?;
        Ok(Self { dir: dir.to_owned(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }
}

fn kernel_of(config: &ExperimentConfig) -> Result<MemoryKernel, RunError> {
    Ok(MemoryKernel::new(config.kernel, config.problem.final_time)?)
}

fn problem_of(config: &ExperimentConfig, kernel: MemoryKernel) -> ManufacturedProblem {
    let p = &config.problem;
    let mode = match p.family {
        Family::Sine1d => SpatialMode::Line { k: p.wavenumber },
        Family::Sine2d => SpatialMode::Square,
    };
    ManufacturedProblem::new(mode, p.omega, p.amplitude, kernel, p.final_time)
}

fn space_kind(config: &ExperimentConfig, size: usize) -> SpaceKind {
    match config.space.kind {
        SpaceChoice::Fem => SpaceKind::Fem { degree: config.space.degree, components: 1 },
        SpaceChoice::Spectral => SpaceKind::Spectral { modes: size },
    }
}

/// Runs the configured command, writing artifacts under `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary, RunError> {
    let mut artifacts = Artifacts::new(out)?;
    let (lines, failure) = match config.command {
        crate::config::Command::ValidateKernel => validate_kernel(config, &mut artifacts)?,
        crate::config::Command::Solve => solve(config, &mut artifacts)?,
        crate::config::Command::PicardCertify => picard_certify(config, &mut artifacts)?,
        crate::config::Command::Convergence => convergence(config, &mut artifacts)?,
    };
    let exit_code = if failure.is_some() { exit::NON_CONVERGENCE } else { exit::SUCCESS };
    Ok(RunSummary { lines, artifacts: artifacts.written, exit_code, failure })
}

fn validate_kernel(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<(Vec<String>, Option<String>), RunError> {
    let kernel = kernel_of(config)?;
    let horizon = config.problem.final_time;
    let report = validate(&kernel, horizon);
    let mut lines: Vec<String> = report.to_string().lines().map(str::to_owned).collect();
    let mut samples = Vec::new();
    let mut positive = true;
    if report.passed() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.validation.seed);
        let xi = XiFunction::new(kernel);
        for _ in 0..config.validation.positive_type_samples {
            let pieces = rng.random_range(3..=12);
            let values: Vec<f64> = (0..=pieces).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let phi = PiecewiseLinear::uniform(horizon, values);
            let scale = phi.sup_norm().powi(2) * horizon * horizon;
            let q = positive_type_check(&xi, &phi, 64);
            positive &= q >= -1e-10 * scale;
            samples.push(q / scale);
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        if !samples.is_empty() {
            lines.push(format!(
                "positive type: {} samples (seed {}), min normalized form {min:.4e}",
                samples.len(),
                config.validation.seed
            ));
        }
    }
    let checks: Vec<_> = report
        .checks
        .iter()
        .map(|c| json!({"property": c.property, "passed": c.passed, "detail": c.detail}))
        .collect();
    let body = json!({
        "kernel": kernel,
        "horizon": horizon,
        "kappa": report.kappa,
        "admissible": report.passed(),
        "checks": checks,
        "positive_type": {"seed": config.validation.seed, "normalized_forms": samples, "passed": positive},
    });
    artifacts.write("report.json", serde_json::to_string_pretty(&body).expect("json"))?;
    if !report.passed() {
        let reasons: Vec<String> = report.failures().map(|c| c.detail.clone()).collect();
        return Err(RunError::Validation(reasons.join("; ")));
    }
    if !positive {
        return Err(RunError::Validation("positive-type form below tolerance".into()));
    }
    Ok((lines, None))
}

fn solve(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<(Vec<String>, Option<String>), RunError> {
    let problem = problem_of(config, kernel_of(config)?);
    let size = config.space.size;
    let space = problem.space(space_kind(config, size), size).map_err(|e| RunError::Config(e.to_string()))?;
    let sys = problem.system(&space, config.solver.initial).map_err(map_convergence)?;
    let trajectory = time_step_solve(&sys, config.solver.steps, config.solver.scheme)?;
    let errors = error_norms(&space, &trajectory, &problem).map_err(map_convergence)?;
    let mut csv = Vec::new();
    trajectory.write_csv(&mut csv).expect("in-memory write");
    artifacts.write("trajectory.csv", csv)?;
    let body = json!({
        "dim": space.dim(),
        "h": space.h(),
        "steps": config.solver.steps,
        "scheme": config.solver.scheme,
        "kappa": sys.kappa(),
        "errors_at_T": errors,
    });
    artifacts.write("report.json", serde_json::to_string_pretty(&body).expect("json"))?;
    Ok((
        vec![
            format!("solved m = {} with {} steps to T = {}", space.dim(), config.solver.steps, problem.final_time),
            format!(
                "errors at T: L2 {:.4e}, energy {:.4e}, velocity {:.4e}",
                errors.l2, errors.energy, errors.velocity
            ),
        ],
        None,
    ))
}

fn map_convergence(e: viscowave::convergence::ConvergenceError) -> RunError {
    use viscowave::convergence::ConvergenceError as C;
    match e {
        C::Solver(s) => s.into(),
        other => RunError::Config(other.to_string()),
    }
}

fn picard_certify(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<(Vec<String>, Option<String>), RunError> {
    let problem = problem_of(config, kernel_of(config)?);
    let size = config.space.size;
    let space = problem.space(space_kind(config, size), size).map_err(|e| RunError::Config(e.to_string()))?;
    let sys = problem.system(&space, config.solver.initial).map_err(map_convergence)?;
    let ie = to_integral_equation(&sys)?;
    let opts = PicardOptions { tol: config.solver.tol, max_iters: config.solver.max_iters };
    let sol = picard_iterate(&ie, config.solver.steps, opts)?;
    artifacts.write("certificate.json", sol.certificate.to_json())?;
    let mut csv = Vec::new();
    sol.write_csv(&mut csv).expect("in-memory write");
    artifacts.write("trajectory.csv", csv)?;
    let up_to = 10.min(sol.certificate.iterations.len().saturating_sub(1));
    let dominated = sol.certificate.dominated(up_to, 1e-9);
    let lines = vec![
        format!("Z = {:.6e}, Z0 = {:.6e}, Z*T = {:.4}", ie.z(), ie.z0(), ie.z() * ie.final_time()),
        format!(
            "{} after {} iterations, last increment {:.3e}",
            if sol.converged { "converged" } else { "not converged" },
            sol.iterations,
            sol.last_increment
        ),
        format!("increments dominated by the factorial bound for n <= {up_to}: {dominated}"),
    ];
    // The certificate is still worth keeping when the iteration stalls.
    let failure = (!sol.converged).then(|| {
        format!("Picard iteration did not converge in {} iterations (last increment {:.3e})", sol.iterations, sol.last_increment)
    });
    Ok((lines, failure))
}

fn convergence(config: &ExperimentConfig, artifacts: &mut Artifacts) -> Result<(Vec<String>, Option<String>), RunError> {
    let problem = problem_of(config, kernel_of(config)?);
    let mut spec = StudySpec::new(space_kind(config, config.space.sizes[0]), config.space.sizes.clone())
        .with_time(config.solver.time_policy)
        .with_initial(config.solver.initial);
    spec.scheme = config.solver.scheme;
    let report = run_convergence(&problem, &spec).map_err(map_convergence)?;
    artifacts.write("report.csv", report.to_csv())?;
    artifacts.write("report.json", report.to_json())?;
    let mut lines = vec![viscowave::convergence::CSV_HEADER.to_owned()];
    lines.extend(report.to_csv().lines().skip(1).map(str::to_owned));
    let failed: Vec<String> =
        report.failures().map(|l| format!("level {}: {}", l.level, l.failure.clone().unwrap_or_default())).collect();
    let failure = (!failed.is_empty()).then(|| format!("{} level(s) failed: {}", failed.len(), failed.join("; ")));
    Ok((lines, failure))
}
