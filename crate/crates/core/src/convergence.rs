//! Manufactured solutions and spatial refinement studies.
//!
//! Every shipped problem is separable, `u(x,t) = a X(x) G(t)` with `X` a
//! Dirichlet eigenfunction of `−Δ` (`−ΔX = λX`) and `G(t) = cos ωt`, so
//! the load is `f = a X [G'' + λG − λ (K∗G)]`.

use std::fmt::Write as _;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galerkin::{
    assemble, assemble_load, energy_error, l2_error, ritz_project, EllipticForm, GalerkinSpace, SpaceError,
    SpaceKind, WithGradient,
};
use crate::kernels::{KernelVariant, MemoryKernel};
use crate::mesh::{Mesh, Mesh1D, Point, TriMesh2D};
use crate::quadrature::tanh_sinh;
use crate::special::gamma;
use crate::volterra::{
    initial_coefficients, time_step_solve, LoadFn, Projection, Scheme, SemidiscreteSystem, SolverError, Trajectory,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error("invalid refinement levels: {0}")]
    InvalidLevels(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Spatial factor `X` of a manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SpatialMode {
    /// `sin(kπx)` on (0, 1).
    Line { k: usize },
    /// `sin(πx) sin(πy)` on the unit square.
    Square,
}

impl SpatialMode {
    pub fn eigenvalue(&self) -> f64 {
        match *self {
            SpatialMode::Line { k } => (k as f64 * PI).powi(2),
            SpatialMode::Square => 2.0 * PI * PI,
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        match *self {
            SpatialMode::Line { k } => (k as f64 * PI * x[0]).sin(),
            SpatialMode::Square => (PI * x[0]).sin() * (PI * x[1]).sin(),
        }
    }

    pub fn gradient(&self, x: Point) -> [f64; 2] {
        match *self {
            SpatialMode::Line { k } => {
                let w = k as f64 * PI;
                [w * (w * x[0]).cos(), 0.0]
            }
            SpatialMode::Square => [
                PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            ],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SpatialMode::Line { .. } => 1,
            SpatialMode::Square => 2,
        }
    }
}

/// `u(x,t) = amplitude · X(x) · cos(ωt)` for the scalar Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedProblem {
    pub mode: SpatialMode,
    pub omega: f64,
    pub amplitude: f64,
    pub kernel: MemoryKernel,
    pub final_time: f64,
}

impl ManufacturedProblem {
    pub fn new(mode: SpatialMode, omega: f64, amplitude: f64, kernel: MemoryKernel, final_time: f64) -> Self {
        Self { mode, omega, amplitude, kernel, final_time }
    }

    /// `sin(πx) cos(ωt)` on (0, 1).
    pub fn standing_wave(omega: f64, kernel: MemoryKernel, final_time: f64) -> Self {
        Self::new(SpatialMode::Line { k: 1 }, omega, 1.0, kernel, final_time)
    }

    pub fn form(&self) -> EllipticForm {
        EllipticForm::ScalarLaplace
    }

    /// `(G, G', G'')` without the amplitude.
    fn profile(&self, t: f64) -> (f64, f64, f64) {
        let w = self.omega;
        let (s, c) = (w * t).sin_cos();
        (c, -w * s, -w * w * c)
    }

    /// `(K∗G)(t) = ∫₀ᵗ K(t−s) cos(ωs) ds` in closed form.
    pub fn convolution(&self, t: f64) -> f64 {
        let w = self.omega;
        match self.kernel.variant {
            KernelVariant::Zero => 0.0,
            KernelVariant::Exponential { amplitude, rate } => {
                let (s, c) = (w * t).sin_cos();
                amplitude * (rate * c + w * s - rate * (-rate * t).exp()) / (rate * rate + w * w)
            }
            KernelVariant::PowerLaw { exponent, scale } => {
                // Σ_k (−1)^k ω^{2k} t^{2k+α} / Γ(2k+α+1), terms by recurrence.
                if t <= 0.0 {
                    return 0.0;
                }
                let z2 = (w * t).powi(2);
                let mut term = t.powf(exponent) / gamma(exponent + 1.0);
                let mut sum = term;
                for k in 0..500 {
                    let kf = k as f64;
                    term *= -z2 / ((2.0 * kf + exponent + 1.0) * (2.0 * kf + exponent + 2.0));
                    sum += term;
                    if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
                        break;
                    }
                }
                scale * sum
            }
        }
    }

    /// Temporal factor of the load: `G'' + λG − λ(K∗G)`.
    pub fn load_profile(&self, t: f64) -> f64 {
        let lambda = self.mode.eigenvalue();
        let (g, _, g2) = self.profile(t);
        self.amplitude * (g2 + lambda * g - lambda * self.convolution(t))
    }

    pub fn exact(&self, x: Point, t: f64) -> f64 {
        self.amplitude * self.mode.value(x) * self.profile(t).0
    }

    pub fn velocity(&self, x: Point, t: f64) -> f64 {
        self.amplitude * self.mode.value(x) * self.profile(t).1
    }

    pub fn acceleration(&self, x: Point, t: f64) -> f64 {
        self.amplitude * self.mode.value(x) * self.profile(t).2
    }

    pub fn load(&self, x: Point, t: f64) -> f64 {
        self.mode.value(x) * self.load_profile(t)
    }

    /// `ü + Au − ∫₀ᵗ K(t−s) Au(s) ds − f` at `(x, t)`, with the memory
    /// integral computed by tanh-sinh quadrature instead of the closed form.
    pub fn residual(&self, x: Point, t: f64) -> f64 {
        let lambda = self.mode.eigenvalue();
        let au = |s: f64| lambda * self.exact(x, s);
        let kernel = self.kernel;
        let memory = match kernel.variant {
            KernelVariant::Zero => 0.0,
            _ => tanh_sinh(|s, _from_a, from_b| kernel.eval(from_b).unwrap_or(0.0) * au(s), 0.0, t, 1e-14),
        };
        self.acceleration(x, t) + au(t) - memory - self.load(x, t)
    }

    /// Field view of `u(·, t)` with its analytic gradient.
    pub fn displacement_field(&self, t: f64) -> impl crate::galerkin::Field + '_ {
        WithGradient {
            value: move |x: Point| self.exact(x, t),
            gradient: move |x: Point| {
                let g = self.mode.gradient(x);
                let s = self.amplitude * self.profile(t).0;
                [s * g[0], s * g[1]]
            },
        }
    }

    pub fn velocity_field(&self, t: f64) -> impl crate::galerkin::Field + '_ {
        WithGradient {
            value: move |x: Point| self.velocity(x, t),
            gradient: move |x: Point| {
                let g = self.mode.gradient(x);
                let s = self.amplitude * self.profile(t).1;
                [s * g[0], s * g[1]]
            },
        }
    }

    /// Semidiscrete load `F(t) = (X, φ) · [G'' + λG − λ(K∗G)]`.
    pub fn load_fn(&self, space: &GalerkinSpace) -> Result<LoadFn, SpaceError> {
        let spatial = spatial_load(space, self.mode)?;
        let problem = *self;
        Ok(Arc::new(move |t| &spatial * problem.load_profile(t)))
    }

    /// Space of the given kind on `size` elements per side (modes for
    /// spectral spaces).
    pub fn space(&self, kind: SpaceKind, size: usize) -> Result<GalerkinSpace, SpaceError> {
        match kind {
            SpaceKind::Spectral { .. } => match self.mode {
                SpatialMode::Line { .. } => GalerkinSpace::spectral(0.0, 1.0, size),
                SpatialMode::Square => Err(SpaceError::Unsupported("spectral basis is one dimensional".into())),
            },
            SpaceKind::Fem { degree, components } => {
                let mesh = match self.mode {
                    SpatialMode::Line { .. } => Mesh::Line(Mesh1D::uniform(0.0, 1.0, size)?),
                    SpatialMode::Square => Mesh::Triangles(TriMesh2D::unit_square(size)?),
                };
                GalerkinSpace::fem(mesh, degree, components)
            }
        }
    }

    /// Semidiscrete system on `space` with the chosen initial projections.
    pub fn system(&self, space: &GalerkinSpace, initial: InitialPolicy) -> Result<SemidiscreteSystem, ConvergenceError> {
        let form = self.form();
        let pair = assemble(space, &form)?;
        let (a0, v0) = initial_coefficients(
            space,
            &self.displacement_field(0.0),
            &self.velocity_field(0.0),
            initial.displacement,
            initial.velocity,
            &form,
        )?;
        Ok(SemidiscreteSystem::new(pair, self.kernel, Some(self.load_fn(space)?), a0, v0, self.final_time)?)
    }
}

/// `(‖u_h − u‖, ‖u_h − u‖_V, ‖u̇_h − u̇‖)` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub energy: f64,
    pub velocity: f64,
}

/// Errors at the last node of `trajectory`, which must sit at `problem.final_time`.
pub fn error_norms(
    space: &GalerkinSpace,
    trajectory: &Trajectory,
    problem: &ManufacturedProblem,
) -> Result<ErrorNorms, ConvergenceError> {
    check_trajectory(space, trajectory, problem)?;
    let t = problem.final_time;
    let u = problem.displacement_field(t);
    Ok(ErrorNorms {
        l2: l2_error(space, trajectory.final_displacement(), &u)?,
        energy: energy_error(space, trajectory.final_displacement(), &u, &problem.form())?,
        velocity: l2_error(space, trajectory.final_velocity(), &problem.velocity_field(t))?,
    })
}

fn check_trajectory(
    space: &GalerkinSpace,
    trajectory: &Trajectory,
    problem: &ManufacturedProblem,
) -> Result<(), ConvergenceError> {
    if trajectory.is_empty() || trajectory.final_displacement().len() != space.dim() {
        return Err(SolverError::DimensionMismatch(format!("trajectory does not live in a space of dimension {}", space.dim())).into());
    }
    let end = trajectory.final_time();
    if (end - problem.final_time).abs() > 1e-12 * problem.final_time.max(1.0) {
        return Err(SolverError::InvalidGrid(format!("trajectory ends at {end}, problem at {}", problem.final_time)).into());
    }
    Ok(())
}

/// `e = θ + ω` with `θ = u_h − R_h u` and `ω = R_h u − u`, L2 norms at `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    pub theta: f64,
    pub omega: f64,
    pub error: f64,
}

impl ErrorSplit {
    pub fn triangle_holds(&self) -> bool {
        self.error <= (self.theta + self.omega) * (1.0 + 1e-12) + 1e-15
    }
}

pub fn error_split(
    space: &GalerkinSpace,
    trajectory: &Trajectory,
    problem: &ManufacturedProblem,
) -> Result<ErrorSplit, ConvergenceError> {
    check_trajectory(space, trajectory, problem)?;
    let u = problem.displacement_field(problem.final_time);
    let ritz = ritz_project(space, &u, &problem.form())?;
    let pair = assemble(space, &problem.form())?;
    let theta = trajectory.final_displacement() - &ritz;
    Ok(ErrorSplit {
        theta: theta.dot(&pair.mass.mul_vec(&theta)).max(0.0).sqrt(),
        omega: l2_error(space, &ritz, &u)?,
        error: l2_error(space, trajectory.final_displacement(), &u)?,
    })
}

/// How many time steps a level gets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum TimePolicy {
    /// `Δt = h` for degree 1, `h^{3/2}` for degree 2 and above.
    Auto,
    /// `Δt = factor · h^exponent`, at least 8 steps.
    PowerOfH { exponent: f64, factor: f64 },
    /// The same number of steps on every level.
    Fixed { steps: usize },
}

impl TimePolicy {
    pub fn steps(&self, final_time: f64, h: f64, degree: usize) -> usize {
        let dt = match *self {
            TimePolicy::Auto if degree <= 1 => h,
            TimePolicy::Auto => h.powf(1.5),
            TimePolicy::PowerOfH { exponent, factor } => factor * h.powf(exponent),
            TimePolicy::Fixed { steps } => return steps.max(8),
        };
        ((final_time / dt).ceil() as usize).max(8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialPolicy {
    pub displacement: Projection,
    pub velocity: Projection,
}

impl Default for InitialPolicy {
    /// `u_h⁰ = R_h u⁰`, `u_h¹ = P_h u¹`.
    fn default() -> Self {
        Self { displacement: Projection::Ritz, velocity: Projection::L2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub kind: SpaceKind,
    /// Elements per side (modes for spectral spaces), strictly increasing.
    pub sizes: Vec<usize>,
    pub time: TimePolicy,
    pub initial: InitialPolicy,
    pub scheme: Scheme,
}

impl StudySpec {
    pub fn new(kind: SpaceKind, sizes: Vec<usize>) -> Self {
        Self { kind, sizes, time: TimePolicy::Auto, initial: InitialPolicy::default(), scheme: Scheme::Newmark }
    }

    pub fn with_time(mut self, time: TimePolicy) -> Self {
        self.time = time;
        self
    }

    pub fn with_initial(mut self, initial: InitialPolicy) -> Self {
        self.initial = initial;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    pub size: usize,
    pub h: f64,
    pub steps: usize,
    /// Errors at `T`; `None` when the level failed.
    pub errors: Option<ErrorNorms>,
    /// `max_i ‖u_h(t_i) − u(t_i)‖` over at most 65 evenly spaced nodes.
    pub sup_l2: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub l2: f64,
    pub energy: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
    /// `rates[i]` compares level `i` against level `i − 1`.
    pub rates: Vec<Option<Rates>>,
    /// Expected `(l, l − 1, l)` for degree `l − 1`.
    pub target: Rates,
}

pub const CSV_HEADER: &str = "level,h,e_L2,rate_L2,e_H1,rate_H1,e_vel,rate_vel";

fn rate(coarse: f64, fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (coarse / fine).ln() / (h_coarse / h_fine).ln()
}

impl ConvergenceReport {
    fn assemble(levels: Vec<LevelResult>, target: Rates) -> Self {
        let mut rates = vec![None];
        for w in levels.windows(2) {
            rates.push(match (&w[0].errors, &w[1].errors) {
                (Some(a), Some(b)) => Some(Rates {
                    l2: rate(a.l2, b.l2, w[0].h, w[1].h),
                    energy: rate(a.energy, b.energy, w[0].h, w[1].h),
                    velocity: rate(a.velocity, b.velocity, w[0].h, w[1].h),
                }),
                _ => None,
            });
        }
        Self { levels, rates, target }
    }

    /// Rate between the two finest successful levels.
    pub fn final_rates(&self) -> Option<Rates> {
        self.rates.iter().rev().flatten().next().copied()
    }

    /// Rates for every consecutive pair of levels.
    pub fn all_rates(&self) -> Vec<Rates> {
        self.rates.iter().flatten().copied().collect()
    }

    /// Fitted slope of `log e` against `log h` over all successful levels.
    pub fn fitted_rates(&self) -> Option<Rates> {
        let ok: Vec<(f64, ErrorNorms)> = self.levels.iter().filter_map(|l| l.errors.map(|e| (l.h, e))).collect();
        if ok.len() < 2 {
            return None;
        }
        let slope = |pick: fn(&ErrorNorms) -> f64| {
            let xs: Vec<f64> = ok.iter().map(|(h, _)| h.ln()).collect();
            let ys: Vec<f64> = ok.iter().map(|(_, e)| pick(e).ln()).collect();
            let n = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
            sxy / sxx
        };
        Some(Rates { l2: slope(|e| e.l2), energy: slope(|e| e.energy), velocity: slope(|e| e.velocity) })
    }

    pub fn failures(&self) -> impl Iterator<Item = &LevelResult> {
        self.levels.iter().filter(|l| l.failure.is_some())
    }

    /// Columns in [`CSV_HEADER`] order; missing values are empty.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6e}"));
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (l, r) in self.levels.iter().zip(&self.rates) {
            let e = l.errors;
            let _ = writeln!(
                out,
                "{},{:.6e},{},{},{},{},{},{}",
                l.level,
                l.h,
                fmt(e.map(|e| e.l2)),
                fmt(r.map(|r| r.l2)),
                fmt(e.map(|e| e.energy)),
                fmt(r.map(|r| r.energy)),
                fmt(e.map(|e| e.velocity)),
                fmt(r.map(|r| r.velocity)),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

fn run_level(problem: &ManufacturedProblem, spec: &StudySpec, level: usize, size: usize) -> LevelResult {
    let mut result = LevelResult { level, size, h: f64::NAN, steps: 0, errors: None, sup_l2: None, failure: None };
    let outcome = (|| -> Result<(), ConvergenceError> {
        let space = problem.space(spec.kind, size)?;
        result.h = match spec.kind {
            SpaceKind::Spectral { .. } => 1.0 / (size + 1) as f64,
            SpaceKind::Fem { .. } => space.h(),
        };
        let degree = space.degree().unwrap_or(1);
        result.steps = spec.time.steps(problem.final_time, result.h, degree);
        let sys = problem.system(&space, spec.initial)?;
        let trajectory = time_step_solve(&sys, result.steps, spec.scheme)?;
        result.errors = Some(error_norms(&space, &trajectory, problem)?);
        let stride = trajectory.len().div_ceil(64).max(1);
        let mut sup: f64 = 0.0;
        for i in (0..trajectory.len()).step_by(stride).chain(std::iter::once(trajectory.len() - 1)) {
            let u = problem.displacement_field(trajectory.times[i]);
            sup = sup.max(l2_error(&space, &trajectory.displacement[i], &u)?);
        }
        result.sup_l2 = Some(sup);
        Ok(())
    })();
    if let Err(e) = outcome {
        result.failure = Some(e.to_string());
        result.errors = None;
        result.sup_l2 = None;
    }
    result
}

/// Runs every level (concurrently) and reports errors at `T` with observed
/// rates. A failing level is recorded in the report rather than aborting.
pub fn run_convergence(problem: &ManufacturedProblem, spec: &StudySpec) -> Result<ConvergenceReport, ConvergenceError> {
    if spec.sizes.len() < 3 {
        return Err(ConvergenceError::InvalidLevels(format!("need at least 3 levels, got {}", spec.sizes.len())));
    }
    if spec.sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConvergenceError::InvalidLevels("sizes must be strictly increasing".into()));
    }
    if problem.kernel.horizon < problem.final_time {
        return Err(SolverError::InvalidGrid(format!(
            "kernel horizon {} is shorter than the final time {}",
            problem.kernel.horizon, problem.final_time
        ))
        .into());
    }
    let levels: Vec<LevelResult> =
        spec.sizes.par_iter().enumerate().map(|(level, &size)| run_level(problem, spec, level, size)).collect();
    let l = match spec.kind {
        SpaceKind::Fem { degree, .. } => (degree + 1) as f64,
        // Spectral errors decay faster than any power; the target is nominal.
        SpaceKind::Spectral { .. } => f64::INFINITY,
    };
    Ok(ConvergenceReport::assemble(levels, Rates { l2: l, energy: l - 1.0, velocity: l }))
}

/// Vector `(X, φ_k)` used by [`ManufacturedProblem::load_fn`], exposed for
/// callers that build their own loads.
pub fn spatial_load(space: &GalerkinSpace, mode: SpatialMode) -> Result<DVector<f64>, SpaceError> {
    assemble_load(space, &move |x: Point| mode.value(x), None)
}
