use nalgebra::{DMatrix, DVector};

use crate::kernels::MemoryKernel;
use crate::quadrature::GaussRule;

use super::bounds::z_from;
use super::system::{to_first_order, FirstOrderSystem, SemidiscreteSystem};
use super::SolverError;

/// `D(t) = ∫₀ᵗ 𝒦(t,s) D(s) ds + ℱ(t)` with
/// `𝒦(t,s) = −M̃⁻¹(S̃ − P(t−s) S̃̃)`, `P(u) = ∫₀ᵘ K`, and
/// `ℱ(t) = D(0) + ∫₀ᵗ M̃⁻¹F̃`.
///
/// The minus sign makes `Ḋ` reproduce the first-order system; see the
/// `kernel_sign_reproduces_ode` test.
#[derive(Debug, Clone)]
pub struct VolterraIE {
    pub(crate) first_order: FirstOrderSystem,
    pub(crate) kernel: MemoryKernel,
    pub(crate) initial_state: DVector<f64>,
    pub(crate) final_time: f64,
    pub(crate) z: f64,
    pub(crate) z0: f64,
}

pub fn to_integral_equation(sys: &SemidiscreteSystem) -> Result<VolterraIE, SolverError> {
    let first_order = to_first_order(sys)?;
    let m = sys.dim();
    let mut initial_state = DVector::zeros(2 * m);
    initial_state.rows_mut(0, m).copy_from(&sys.alpha0);
    initial_state.rows_mut(m, m).copy_from(&sys.alpha_dot0);
    let z = z_from(first_order.mass_inv_stiffness(), sys.kappa());
    let mut ie = VolterraIE { first_order, kernel: sys.kernel, initial_state, final_time: sys.final_time, z, z0: 0.0 };
    // |D(0)|∞ + ∫₀ᵀ |M̃⁻¹F̃|∞, the first link of the Z0 chain.
    let rule = GaussRule::new(4);
    let load_sup: f64 = if sys.load.is_some() {
        rule.integrate(|t| ie.first_order.forcing(t).amax(), 0.0, sys.final_time, 64)
    } else {
        0.0
    };
    ie.z0 = crate::linalg::vec_inf_norm(&sys.alpha0) + crate::linalg::vec_inf_norm(&sys.alpha_dot0) + load_sup;
    Ok(ie)
}

impl VolterraIE {
    /// Block system size `2m`.
    pub fn dim(&self) -> usize {
        2 * self.first_order.m()
    }

    pub fn first_order(&self) -> &FirstOrderSystem {
        &self.first_order
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.initial_state
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    /// Bound on `sup |𝒦(t,s)|∞` used by the certificate.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Bound on `sup |ℱ(t)|∞` used by the certificate.
    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// Replaces the `Z⁰` bound, e.g. with [`super::bound_z0`].
    pub fn with_z0(mut self, z0: f64) -> Self {
        self.z0 = z0;
        self
    }

    /// `𝒦(t, s)` for `0 ≤ s ≤ t`: `[[0, I], [−(1 − P(t−s)) M⁻¹S, 0]]`.
    pub fn kernel_matrix(&self, t: f64, s: f64) -> DMatrix<f64> {
        let primitive = self.kernel.primitive((t - s).max(0.0));
        -(self.first_order.drift_matrix() - primitive * self.first_order.memory_matrix())
    }

    /// `ℱ(t)` by 4-point Gauss on 64 sub-intervals of [0, t].
    pub fn forcing(&self, t: f64) -> DVector<f64> {
        let rule = GaussRule::new(4);
        let mut acc = self.initial_state.clone();
        if t > 0.0 {
            let pieces = 64;
            let step = t / pieces as f64;
            for p in 0..pieces {
                let lo = p as f64 * step;
                for (s, w) in rule.on_interval(lo, lo + step) {
                    acc.axpy(w, &self.first_order.forcing(s), 1.0);
                }
            }
        }
        acc
    }

    /// `ℱ` at the uniform grid nodes, accumulated interval by interval.
    pub fn forcing_on_grid(&self, times: &[f64]) -> Vec<DVector<f64>> {
        let rule = GaussRule::new(4);
        let mut out = Vec::with_capacity(times.len());
        let mut acc = self.initial_state.clone();
        out.push(acc.clone());
        for w in times.windows(2) {
            for (s, wt) in rule.on_interval(w[0], w[1]) {
                acc.axpy(wt, &self.first_order.forcing(s), 1.0);
            }
            out.push(acc.clone());
        }
        out
    }
}
