use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::galerkin::{self, AssembledPair, EllipticForm, Field, GalerkinSpace};
use crate::kernels::{validate, MemoryKernel};
use crate::linalg::SpdSolver;

use super::SolverError;

/// Semidiscrete load `t ↦ F(t)`.
pub type LoadFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// `M α̈ + S α − S ∫₀ᵗ K(t−s) α(s) ds = F(t)`, `α(0) = α0`, `α̇(0) = α̇0`.
#[derive(Clone)]
pub struct SemidiscreteSystem {
    pub pair: AssembledPair,
    pub kernel: MemoryKernel,
    pub load: Option<LoadFn>,
    pub alpha0: DVector<f64>,
    pub alpha_dot0: DVector<f64>,
    pub final_time: f64,
}

impl fmt::Debug for SemidiscreteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemidiscreteSystem")
            .field("dim", &self.dim())
            .field("kernel", &self.kernel)
            .field("has_load", &self.load.is_some())
            .field("final_time", &self.final_time)
            .finish()
    }
}

impl SemidiscreteSystem {
    pub fn new(
        pair: AssembledPair,
        kernel: MemoryKernel,
        load: Option<LoadFn>,
        alpha0: DVector<f64>,
        alpha_dot0: DVector<f64>,
        final_time: f64,
    ) -> Result<Self, SolverError> {
        let m = pair.mass.nrows();
        for (name, n) in [
            ("mass columns", pair.mass.ncols()),
            ("stiffness rows", pair.stiffness.nrows()),
            ("stiffness columns", pair.stiffness.ncols()),
            ("alpha0", alpha0.len()),
            ("alpha_dot0", alpha_dot0.len()),
        ] {
            if n != m {
                return Err(SolverError::DimensionMismatch(format!("{name} has size {n}, expected {m}")));
            }
        }
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(SolverError::InvalidGrid(format!("final time must be positive, got {final_time}")));
        }
        let report = validate(&kernel, final_time);
        if !report.passed() {
            let reason = report.failures().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
            return Err(SolverError::InadmissibleKernel { horizon: final_time, reason });
        }
        if let Some(load) = &load {
            let f0 = load(0.0);
            if f0.len() != m {
                return Err(SolverError::DimensionMismatch(format!("load has size {}, expected {m}", f0.len())));
            }
        }
        Ok(Self { pair, kernel, load, alpha0, alpha_dot0, final_time })
    }

    pub fn dim(&self) -> usize {
        self.pair.mass.nrows()
    }

    pub fn load_at(&self, t: f64) -> DVector<f64> {
        match &self.load {
            Some(f) => f(t),
            None => DVector::zeros(self.dim()),
        }
    }

    /// `κ = ‖K‖_{L1(0,T)}` on the solve horizon.
    pub fn kappa(&self) -> f64 {
        self.kernel.primitive(self.final_time)
    }
}

/// How an initial datum is mapped into `V_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    L2,
    Ritz,
    Fourier,
    /// Nodal interpolation; not one of the analysed choices, kept for
    /// sensitivity checks.
    Interpolation,
}

fn project(
    space: &GalerkinSpace,
    v: &dyn Field,
    how: Projection,
    form: &EllipticForm,
) -> Result<DVector<f64>, SolverError> {
    Ok(match how {
        Projection::L2 => galerkin::l2_project(space, v)?,
        Projection::Ritz => galerkin::ritz_project(space, v, form)?,
        Projection::Fourier => galerkin::fourier_project(space, v)?,
        Projection::Interpolation => galerkin::interpolate(space, v)?,
    })
}

/// `(α(0), α̇(0))` from `u⁰`, `u¹` by the chosen projections.
pub fn initial_coefficients(
    space: &GalerkinSpace,
    u0: &dyn Field,
    u1: &dyn Field,
    displacement: Projection,
    velocity: Projection,
    form: &EllipticForm,
) -> Result<(DVector<f64>, DVector<f64>), SolverError> {
    Ok((project(space, u0, displacement, form)?, project(space, u1, velocity, form)?))
}

/// Block form `Ḋ + M̃⁻¹S̃ D − M̃⁻¹S̃̃ ∫ K D = M̃⁻¹F̃` with `D = [α; α̇]`,
/// `M̃ = diag(M, M)`, `S̃ = [[0, −M], [S, 0]]`, `S̃̃ = [[0, 0], [S, 0]]`.
#[derive(Clone)]
pub struct FirstOrderSystem {
    m: usize,
    /// `B = M⁻¹S`.
    mass_inv_stiffness: DMatrix<f64>,
    mass_solver: SpdSolver,
    load: Option<LoadFn>,
}

impl fmt::Debug for FirstOrderSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstOrderSystem").field("m", &self.m).finish()
    }
}

pub fn to_first_order(sys: &SemidiscreteSystem) -> Result<FirstOrderSystem, SolverError> {
    let m = sys.dim();
    let mass_solver = SpdSolver::new(&sys.pair.mass)?;
    let stiffness = sys.pair.stiffness.to_dense();
    let mut b = DMatrix::zeros(m, m);
    for (j, col) in stiffness.column_iter().enumerate() {
        b.set_column(j, &mass_solver.solve(&col.into_owned())?);
    }
    Ok(FirstOrderSystem { m, mass_inv_stiffness: b, mass_solver, load: sys.load.clone() })
}

impl FirstOrderSystem {
    /// Size `m` of the second-order system (the block system is `2m`).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mass_inv_stiffness(&self) -> &DMatrix<f64> {
        &self.mass_inv_stiffness
    }

    /// `M̃⁻¹S̃ = [[0, −I], [M⁻¹S, 0]]`.
    pub fn drift_matrix(&self) -> DMatrix<f64> {
        let m = self.m;
        let mut d = DMatrix::zeros(2 * m, 2 * m);
        d.view_mut((0, m), (m, m)).fill_with_identity();
        d.view_mut((0, m), (m, m)).neg_mut();
        d.view_mut((m, 0), (m, m)).copy_from(&self.mass_inv_stiffness);
        d
    }

    /// `M̃⁻¹S̃̃ = [[0, 0], [M⁻¹S, 0]]`.
    pub fn memory_matrix(&self) -> DMatrix<f64> {
        let m = self.m;
        let mut d = DMatrix::zeros(2 * m, 2 * m);
        d.view_mut((m, 0), (m, m)).copy_from(&self.mass_inv_stiffness);
        d
    }

    /// `M̃⁻¹S̃ D = [−α̇; M⁻¹S α]`.
    pub fn apply_drift(&self, d: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        let mut out = DVector::zeros(2 * m);
        out.rows_mut(0, m).copy_from(&(-d.rows(m, m)));
        out.rows_mut(m, m).copy_from(&(&self.mass_inv_stiffness * d.rows(0, m)));
        out
    }

    /// `M̃⁻¹S̃̃ D = [0; M⁻¹S α]`.
    pub fn apply_memory(&self, d: &DVector<f64>) -> DVector<f64> {
        let m = self.m;
        let mut out = DVector::zeros(2 * m);
        out.rows_mut(m, m).copy_from(&(&self.mass_inv_stiffness * d.rows(0, m)));
        out
    }

    /// `M̃⁻¹F̃(t) = [0; M⁻¹F(t)]`.
    pub fn forcing(&self, t: f64) -> DVector<f64> {
        let m = self.m;
        let mut out = DVector::zeros(2 * m);
        if let Some(load) = &self.load {
            let f = self.mass_solver.solve(&load(t)).expect("mass solve with matching dimension");
            out.rows_mut(m, m).copy_from(&f);
        }
        out
    }

    /// `Ḋ + M̃⁻¹S̃ D − M̃⁻¹S̃̃ H − M̃⁻¹F̃(t)` where `H = ∫₀ᵗ K(t−s) D(s) ds`.
    pub fn residual(&self, t: f64, d: &DVector<f64>, d_dot: &DVector<f64>, history: &DVector<f64>) -> DVector<f64> {
        d_dot + self.apply_drift(d) - self.apply_memory(history) - self.forcing(t)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::SparseMatrix;

    pub(crate) fn scalar_system(mass: f64, stiffness: f64, kernel: MemoryKernel, a0: f64, v0: f64, t: f64) -> SemidiscreteSystem {
        let pair = AssembledPair {
            mass: SparseMatrix::from_diagonal(&[mass]),
            stiffness: SparseMatrix::from_diagonal(&[stiffness]),
        };
        SemidiscreteSystem::new(pair, kernel, None, DVector::from_element(1, a0), DVector::from_element(1, v0), t).unwrap()
    }

    #[test]
    fn scalar_block_matrices() {
        let sys = scalar_system(1.0, 3.0, MemoryKernel::zero(1.0), 1.0, 0.0, 1.0);
        let fo = to_first_order(&sys).unwrap();
        let d = fo.drift_matrix();
        assert_eq!(d.as_slice(), DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 3.0, 0.0]).as_slice());
        let x = DVector::from_vec(vec![2.0, 5.0]);
        assert_eq!(fo.apply_memory(&x).as_slice(), &[0.0, 6.0]);
        assert_eq!((fo.memory_matrix() * &x).as_slice(), &[0.0, 6.0]);
        assert_eq!((fo.drift_matrix() * &x), fo.apply_drift(&x));
    }

    #[test]
    fn rejects_inadmissible_kernel_and_bad_dims() {
        let pair = AssembledPair { mass: SparseMatrix::identity(2), stiffness: SparseMatrix::identity(2) };
        let bad = MemoryKernel::power_law(0.5, 1.0, 1.0).unwrap();
        let err = SemidiscreteSystem::new(pair.clone(), bad, None, DVector::zeros(2), DVector::zeros(2), 1.0).unwrap_err();
        assert!(matches!(err, SolverError::InadmissibleKernel { .. }));
        let err = SemidiscreteSystem::new(pair, MemoryKernel::zero(1.0), None, DVector::zeros(3), DVector::zeros(2), 1.0)
            .unwrap_err();
        assert!(matches!(err, SolverError::DimensionMismatch(_)));
    }

    #[test]
    fn first_order_residual_of_manufactured_coefficients() {
        // α(t) = [sin t, t²] with F chosen to satisfy the second-order form;
        // Ḋ from central differences then leaves a residual of O(δ²).
        let pair = AssembledPair {
            mass: SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 1.0)]),
            stiffness: SparseMatrix::from_triplets(2, 2, &[(0, 0, 3.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]),
        };
        let kernel = MemoryKernel::exponential(0.5, 1.0, 1.0).unwrap();
        let alpha = |t: f64| DVector::from_vec(vec![t.sin(), t * t]);
        let alpha_dot = |t: f64| DVector::from_vec(vec![t.cos(), 2.0 * t]);
        let alpha_ddot = |t: f64| DVector::from_vec(vec![-t.sin(), 2.0]);
        let history = move |t: f64| {
            let rule = crate::quadrature::GaussRule::new(12);
            let mut h = DVector::zeros(2);
            for (s, w) in rule.on_interval(0.0, t) {
                h += alpha(s) * (w * kernel.eval(t - s).unwrap());
            }
            h
        };
        let (m_d, s_d) = (pair.mass.clone(), pair.stiffness.clone());
        let load: LoadFn = Arc::new(move |t| {
            m_d.mul_vec(&alpha_ddot(t)) + s_d.mul_vec(&alpha(t)) - s_d.mul_vec(&history(t))
        });
        let sys = SemidiscreteSystem::new(pair, kernel, Some(load), alpha(0.0), alpha_dot(0.0), 1.0).unwrap();
        let fo = to_first_order(&sys).unwrap();
        let state = |t: f64| {
            let mut d = DVector::zeros(4);
            d.rows_mut(0, 2).copy_from(&alpha(t));
            d.rows_mut(2, 2).copy_from(&alpha_dot(t));
            d
        };
        let delta = 1e-4;
        for &t in &[0.2, 0.6, 0.9] {
            let d_dot = (state(t + delta) - state(t - delta)) / (2.0 * delta);
            let mut h = DVector::zeros(4);
            h.rows_mut(0, 2).copy_from(&history(t));
            let r = fo.residual(t, &state(t), &d_dot, &h);
            assert!(r.amax() < 1e-7, "t = {t}: {r}");
        }
    }
}
