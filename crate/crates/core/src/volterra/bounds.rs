//! Constants of the Picard certificate: `Z` bounds `|𝒦(t,s)|∞` and `Z⁰`
//! bounds `|ℱ(t)|∞` on the solve horizon.

use nalgebra::{DMatrix, DVector};

use crate::galerkin::{self, AssembledPair, Field, GalerkinSpace, SpaceError};
use crate::linalg::{inf_norm, vec_inf_norm};
use crate::mesh::Point;
use crate::quadrature::GaussRule;

use super::integral::VolterraIE;
use super::system::{to_first_order, SemidiscreteSystem};
use super::SolverError;

/// `‖f‖_{L1(0,T; L2(Ω))}` and `‖g‖_{L1(0,T; L2(∂Ω_N))}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadNorms {
    pub f_l1: f64,
    pub g_l1: f64,
}

pub(crate) fn z_from(mass_inv_stiffness: &DMatrix<f64>, kappa: f64) -> f64 {
    inf_norm(mass_inv_stiffness) * (1.0 + kappa)
}

/// `Z = |M⁻¹S|∞ (1 + κ)` with `κ` on the solve horizon.
///
/// This dominates `sup |𝒦|∞` only when it is at least 1, since the upper
/// block row of `𝒦` always has norm 1.
pub fn bound_z(sys: &SemidiscreteSystem) -> Result<f64, SolverError> {
    let fo = to_first_order(sys)?;
    Ok(z_from(fo.mass_inv_stiffness(), sys.kappa()))
}

/// `Z⁰ = |α0|∞ + |α̇0|∞ + (‖f‖_L1 + ‖g‖_L1) max_k (√M_kk + C_Trace √S_kk)`.
pub fn bound_z0(sys: &SemidiscreteSystem, norms: LoadNorms, trace_constant: f64) -> f64 {
    let md = sys.pair.mass.diagonal();
    let sd = sys.pair.stiffness.diagonal();
    let reach = md
        .iter()
        .zip(&sd)
        .map(|(m, s)| m.max(0.0).sqrt() + trace_constant * s.max(0.0).sqrt())
        .fold(0.0, f64::max);
    vec_inf_norm(&sys.alpha0) + vec_inf_norm(&sys.alpha_dot0) + (norms.f_l1 + norms.g_l1) * reach
}

/// Spectral form `Z⁰ = ‖u⁰‖ + ‖u¹‖ + ‖f‖_L1 + C_Trace ‖g‖_L1 max_k ‖φ_k‖_V`,
/// where `‖φ_k‖_V = √λ_k`.
pub fn bound_z0_spectral(
    space: &GalerkinSpace,
    u0_norm: f64,
    u1_norm: f64,
    norms: LoadNorms,
    trace_constant: f64,
) -> Result<f64, SolverError> {
    let eig = space
        .eigenvalues()
        .ok_or_else(|| SpaceError::Unsupported("spectral Z0 needs a spectral space".into()))?;
    let max_v = eig.iter().fold(0.0_f64, |acc, l| acc.max(l.sqrt()));
    Ok(u0_norm + u1_norm + norms.f_l1 + trace_constant * norms.g_l1 * max_v)
}

/// `C_Trace = max_k ‖φ_k‖_{∂Ω_N} / ‖φ_k‖_V` over the basis of `V_h`.
pub fn trace_constant(space: &GalerkinSpace, pair: &AssembledPair) -> Result<f64, SolverError> {
    if !space.has_neumann_boundary() {
        return Err(SpaceError::NoNeumannBoundary.into());
    }
    let traces = galerkin::neumann_trace_squares(space);
    let sd = pair.stiffness.diagonal();
    if traces.len() != sd.len() {
        return Err(SolverError::DimensionMismatch(format!(
            "space has {} dofs, stiffness has {}",
            traces.len(),
            sd.len()
        )));
    }
    Ok(traces.iter().zip(&sd).filter(|(_, s)| **s > 0.0).map(|(t, s)| (t / s).sqrt()).fold(0.0, f64::max))
}

struct Frozen<'a> {
    f: &'a dyn Fn(f64, Point, usize) -> f64,
    t: f64,
}

impl Field for Frozen<'_> {
    fn value(&self, x: Point, component: usize) -> f64 {
        (self.f)(self.t, x, component)
    }
}

/// Time `L1` norms of the spatial `L2` norms of `f` and `g`, by 4-point
/// Gauss on 32 sub-intervals.
pub fn load_l1_norms(
    space: &GalerkinSpace,
    f: &dyn Fn(f64, Point, usize) -> f64,
    g: Option<&dyn Fn(f64, Point, usize) -> f64>,
    final_time: f64,
) -> Result<LoadNorms, SolverError> {
    if g.is_some() && !space.has_neumann_boundary() {
        return Err(SpaceError::NoNeumannBoundary.into());
    }
    let rule = GaussRule::new(4);
    let zero = DVector::zeros(space.dim());
    let pieces = 32;
    let step = final_time / pieces as f64;
    let mut norms = LoadNorms::default();
    for p in 0..pieces {
        let lo = p as f64 * step;
        for (t, w) in rule.on_interval(lo, lo + step) {
            norms.f_l1 += w * galerkin::l2_error(space, &zero, &Frozen { f, t })?;
            if let Some(g) = g {
                norms.g_l1 += w * galerkin::neumann_norm(space, &Frozen { f: g, t });
            }
        }
    }
    Ok(norms)
}

/// `max |𝒦(t,s)|∞` over `0 ≤ s ≤ t` on a uniform `samples × samples` grid.
pub fn sampled_kernel_sup(ie: &VolterraIE, samples: usize) -> f64 {
    let b = inf_norm(ie.first_order().mass_inv_stiffness());
    let n = samples.max(2);
    let dt = ie.final_time() / (n - 1) as f64;
    // The norm depends on t - s only: max(1, |1 - P(t-s)| |B|∞).
    (0..n).map(|k| (1.0 - ie.kernel().primitive(k as f64 * dt)).abs() * b).fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{assemble, EllipticForm};
    use crate::kernels::MemoryKernel;
    use crate::mesh::{Mesh, Mesh1D, TriMesh2D};
    use crate::volterra::to_integral_equation;
    use std::f64::consts::PI;

    fn spectral_system(modes: usize, kernel: MemoryKernel, t: f64) -> (GalerkinSpace, SemidiscreteSystem) {
        let space = GalerkinSpace::spectral(0.0, 1.0, modes).unwrap();
        let pair = assemble(&space, &EllipticForm::ScalarLaplace).unwrap();
        let sys = SemidiscreteSystem::new(pair, kernel, None, DVector::zeros(modes), DVector::zeros(modes), t).unwrap();
        (space, sys)
    }

    #[test]
    fn spectral_z_is_top_eigenvalue_times_one_plus_kappa() {
        let k = MemoryKernel::power_law_with_kappa(0.5, 0.4, 1.0).unwrap();
        let (_, sys) = spectral_system(3, k, 1.0);
        let z = bound_z(&sys).unwrap();
        assert!((z - 1.4 * 9.0 * PI * PI).abs() < 1e-10 * z);
    }

    #[test]
    fn z_dominates_sampled_kernel_norm() {
        let k = MemoryKernel::exponential(1.0, 2.0, 0.5).unwrap();
        let (_, sys) = spectral_system(4, k, 0.5);
        let ie = to_integral_equation(&sys).unwrap();
        let sampled = sampled_kernel_sup(&ie, 50);
        assert!(sampled <= ie.z());
        // Agrees with the dense norm at a few points.
        for &(t, s) in &[(0.5, 0.0), (0.3, 0.1), (0.2, 0.2)] {
            let dense = inf_norm(&ie.kernel_matrix(t, s));
            let analytic = (1.0 - k.primitive(t - s)).abs() * 16.0 * PI * PI;
            assert!((dense - analytic.max(1.0)).abs() < 1e-9 * dense);
        }
    }

    #[test]
    fn spectral_z0_with_unit_data() {
        let (space, _) = spectral_system(3, MemoryKernel::zero(1.0), 1.0);
        let norms = LoadNorms { f_l1: 0.5, g_l1: 0.0 };
        assert_eq!(bound_z0_spectral(&space, 1.0, 2.0, norms, 0.0).unwrap(), 3.5);
        let norms = LoadNorms { f_l1: 0.0, g_l1: 1.0 };
        let z0 = bound_z0_spectral(&space, 0.0, 0.0, norms, 2.0).unwrap();
        assert!((z0 - 2.0 * 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn z0_reduces_to_initial_data_without_load() {
        let (_, mut sys) = spectral_system(2, MemoryKernel::zero(1.0), 1.0);
        sys.alpha0 = DVector::from_vec(vec![0.5, -1.5]);
        sys.alpha_dot0 = DVector::from_vec(vec![0.25, 0.0]);
        assert_eq!(bound_z0(&sys, LoadNorms::default(), 3.0), 1.75);
        let with_load = bound_z0(&sys, LoadNorms { f_l1: 1.0, g_l1: 0.0 }, 0.0);
        assert!((with_load - 2.75).abs() < 1e-15);
    }

    #[test]
    fn trace_constant_on_interval_with_neumann_end() {
        // P1 on [0,1], Neumann at x = 1: φ_N(1) = 1 and S_NN = 1/h, so
        // C = √h, attained at the last hat.
        let mesh = Mesh1D::uniform(0.0, 1.0, 8)
            .unwrap()
            .with_markers(crate::mesh::BoundaryMarker::Dirichlet, crate::mesh::BoundaryMarker::Neumann);
        let space = GalerkinSpace::fem(Mesh::Line(mesh), 1, 1).unwrap();
        let pair = assemble(&space, &EllipticForm::ScalarLaplace).unwrap();
        let c = trace_constant(&space, &pair).unwrap();
        assert!((c - (1.0_f64 / 8.0).sqrt()).abs() < 1e-12);

        let dirichlet = GalerkinSpace::fem(Mesh::Triangles(TriMesh2D::unit_square(2).unwrap()), 1, 1).unwrap();
        let pair = assemble(&dirichlet, &EllipticForm::ScalarLaplace).unwrap();
        assert!(matches!(trace_constant(&dirichlet, &pair), Err(SolverError::Space(SpaceError::NoNeumannBoundary))));
    }

    #[test]
    fn load_norms_of_separable_load() {
        // f = t sin(πx) on (0,1): ‖f(t)‖ = t/√2, ∫₀¹ = 1/(2√2).
        let space = GalerkinSpace::spectral(0.0, 1.0, 4).unwrap();
        let f = |t: f64, x: Point, _c: usize| t * (PI * x[0]).sin();
        let norms = load_l1_norms(&space, &f, None, 1.0).unwrap();
        assert!((norms.f_l1 - 0.5 / 2.0_f64.sqrt()).abs() < 1e-10);
        assert_eq!(norms.g_l1, 0.0);
    }
}
