use std::io::{self, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::kernels::MemoryKernel;
use crate::linalg::SpdSolver;

use super::system::SemidiscreteSystem;
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Trapezoidal rule on the first-order form `α̇ = v`, `M v̇ = …`.
    Trapezoidal,
    /// Average-acceleration Newmark (`β = 1/4`, `γ = 1/2`).
    #[default]
    Newmark,
}

/// Coefficients on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub displacement: Vec<DVector<f64>>,
    pub velocity: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn final_displacement(&self) -> &DVector<f64> {
        self.displacement.last().expect("non-empty trajectory")
    }

    pub fn final_velocity(&self) -> &DVector<f64> {
        self.velocity.last().expect("non-empty trajectory")
    }

    /// `max_i max(|α_i − α'_i|∞, |v_i − v'_i|∞)` over a shared grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64, SolverError> {
        if self.len() != other.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "trajectories have {} and {} nodes",
                self.len(),
                other.len()
            )));
        }
        let mut d: f64 = 0.0;
        for i in 0..self.len() {
            d = d.max((&self.displacement[i] - &other.displacement[i]).amax());
            d = d.max((&self.velocity[i] - &other.velocity[i]).amax());
        }
        Ok(d)
    }

    /// Header `time,alpha_0,…,alpha_{m-1},velocity_0,…`, one row per node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let m = self.displacement.first().map_or(0, |a| a.len());
        let mut header = vec!["time".to_string()];
        header.extend((0..m).map(|k| format!("alpha_{k}")));
        header.extend((0..m).map(|k| format!("velocity_{k}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.len() {
            write!(out, "{:.17e}", self.times[i])?;
            for x in self.displacement[i].iter().chain(self.velocity[i].iter()) {
                write!(out, ",{x:.17e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `W_k = ∫_{(k−1)Δt}^{kΔt} K`, `k = 1..=n`.
pub fn product_weights(kernel: &MemoryKernel, dt: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|k| kernel.moment((k - 1) as f64 * dt, k as f64 * dt)).collect()
}

/// Implicit stepping on `n_steps` uniform steps.
///
/// The memory term uses `∫₀^{t_n} K(t_n − s) α(s) ds ≈ Σ_k W_k (α_{n−k} + α_{n−k+1})/2`,
/// so K is never evaluated and the weights sum to `P(t_n)` exactly.
pub fn time_step_solve(sys: &SemidiscreteSystem, n_steps: usize, scheme: Scheme) -> Result<Trajectory, SolverError> {
    if n_steps < 8 {
        return Err(SolverError::InvalidGrid(format!("need at least 8 steps, got {n_steps}")));
    }
    let m = sys.dim();
    let dt = sys.final_time / n_steps as f64;
    let weights = product_weights(&sys.kernel, dt, n_steps);
    let has_memory = weights.iter().any(|&w| w != 0.0);
    let (mass, stiffness) = (&sys.pair.mass, &sys.pair.stiffness);
    let w1 = weights[0];
    // Effective stiffness on the unknown: S_eff = (1 − W_1/2) S.
    let s_eff = 1.0 - 0.5 * w1;
    let q = 0.25 * dt * dt;
    // Both schemes solve for a rate (acceleration or velocity) rather than
    // the displacement, which keeps rounding from being amplified by 1/Δt².
    let step_solver = SpdSolver::new(&mass.linear_combination(1.0, stiffness, q * s_eff))?;
    let mass_solver = SpdSolver::new(mass)?;

    let times: Vec<f64> = (0..=n_steps).map(|i| sys.final_time * i as f64 / n_steps as f64).collect();
    let mut alpha = Vec::with_capacity(n_steps + 1);
    let mut vel = Vec::with_capacity(n_steps + 1);
    alpha.push(sys.alpha0.clone());
    vel.push(sys.alpha_dot0.clone());
    // pairs[j] = α_j + α_{j+1}.
    let mut pairs: Vec<DVector<f64>> = Vec::with_capacity(n_steps);

    // Memory part R_{n+1} of H_{n+1} that does not involve α_{n+1}.
    let remainder = |n: usize, alpha: &[DVector<f64>], pairs: &[DVector<f64>]| -> DVector<f64> {
        let mut r = DVector::zeros(m);
        if !has_memory {
            return r;
        }
        r.axpy(0.5 * w1, &alpha[n], 1.0);
        for k in 2..=n + 1 {
            r.axpy(0.5 * weights[k - 1], &pairs[n + 1 - k], 1.0);
        }
        r
    };

    let mut load_prev = sys.load_at(0.0);
    let mut history_prev = DVector::zeros(m);
    let mut accel = mass_solver.solve(&(&load_prev - stiffness.mul_vec(&sys.alpha0)))?;
    for n in 0..n_steps {
        let load_next = sys.load_at(times[n + 1]);
        let r = remainder(n, &alpha, &pairs);
        let (a_n, v_n) = (&alpha[n], &vel[n]);
        let (a_next, v_next) = match scheme {
            Scheme::Newmark => {
                // [M + Δt²/4 S_eff] a_{n+1} = F_{n+1} + S R_{n+1} − S_eff (α_n + Δt v_n + Δt²/4 a_n).
                let predictor = a_n + v_n * dt + &accel * q;
                let rhs = &load_next + stiffness.mul_vec(&(&r - &predictor * s_eff));
                let acc_next = step_solver.solve(&rhs)?;
                let a_next = predictor + &acc_next * q;
                let v_next = v_n + (&accel + &acc_next) * (0.5 * dt);
                accel = acc_next;
                (a_next, v_next)
            }
            Scheme::Trapezoidal => {
                // [M + Δt²/4 S_eff] v_{n+1} = M v_n + Δt/2 [F_n + F_{n+1} − S α_n
                //   + S (H_n + R_{n+1}) − S_eff (α_n + Δt/2 v_n)].
                let elastic = a_n - &history_prev - &r + (a_n + v_n * (0.5 * dt)) * s_eff;
                let rhs = mass.mul_vec(v_n) + (&load_prev + &load_next - stiffness.mul_vec(&elastic)) * (0.5 * dt);
                let v_next = step_solver.solve(&rhs)?;
                let a_next = a_n + (v_n + &v_next) * (0.5 * dt);
                (a_next, v_next)
            }
        };
        history_prev = r + &a_next * (0.5 * w1);
        pairs.push(a_n + &a_next);
        alpha.push(a_next);
        vel.push(v_next);
        load_prev = load_next;
    }
    Ok(Trajectory { times, displacement: alpha, velocity: vel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{assemble, EllipticForm, GalerkinSpace};
    use crate::mesh::{Mesh, Mesh1D};
    use crate::volterra::system::tests::scalar_system;
    use crate::volterra::{picard_solve, to_integral_equation, PicardOptions};
    use nalgebra::DMatrix;

    #[test]
    fn power_law_weights_sum_to_primitive() {
        let k = MemoryKernel::power_law_with_kappa(0.3, 0.6, 2.0).unwrap();
        let w = product_weights(&k, 2.0 / 500.0, 500);
        for n in [1, 7, 250, 500] {
            let sum: f64 = w[..n].iter().sum();
            assert!((sum - k.primitive(n as f64 * 2.0 / 500.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillator_converges_at_second_order() {
        for scheme in [Scheme::Newmark, Scheme::Trapezoidal] {
            let errs: Vec<f64> = [32, 64, 128]
                .iter()
                .map(|&n| {
                    let sys = scalar_system(1.0, 4.0, MemoryKernel::zero(1.0), 1.0, 0.0, 1.0);
                    let tr = time_step_solve(&sys, n, scheme).unwrap();
                    tr.times.iter().zip(&tr.displacement).map(|(t, a)| (a[0] - (2.0 * t).cos()).abs()).fold(0.0, f64::max)
                })
                .collect();
            for p in errs.windows(2) {
                assert!((p[0] / p[1]).log2() >= 1.9, "{scheme:?}: {errs:?}");
            }
        }
    }

    fn p1_system(n: usize, kernel: MemoryKernel, t: f64) -> SemidiscreteSystem {
        let space = GalerkinSpace::fem(Mesh::Line(Mesh1D::uniform(0.0, 1.0, n).unwrap()), 1, 1).unwrap();
        let pair = assemble(&space, &EllipticForm::ScalarLaplace).unwrap();
        let m = pair.dim();
        let a0 = DVector::from_fn(m, |k, _| ((k + 1) as f64 / n as f64 * std::f64::consts::PI).sin());
        let v0 = DVector::from_fn(m, |k, _| if k == m / 2 { 1.0 } else { 0.0 });
        SemidiscreteSystem::new(pair, kernel, None, a0, v0, t).unwrap()
    }

    fn energy(sys: &SemidiscreteSystem, a: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v.dot(&sys.pair.mass.mul_vec(v)) + 0.5 * a.dot(&sys.pair.stiffness.mul_vec(a))
    }

    #[test]
    fn zero_kernel_conserves_energy() {
        let sys = p1_system(10, MemoryKernel::zero(1.0), 1.0);
        for scheme in [Scheme::Newmark, Scheme::Trapezoidal] {
            let tr = time_step_solve(&sys, 200, scheme).unwrap();
            let e0 = energy(&sys, &tr.displacement[0], &tr.velocity[0]);
            let drift = (0..tr.len())
                .map(|i| (energy(&sys, &tr.displacement[i], &tr.velocity[i]) - e0).abs())
                .fold(0.0, f64::max);
            assert!(drift <= 1e-10 * e0, "{scheme:?} drift {drift}");
        }
    }

    fn rk4(sys: &SemidiscreteSystem, n: usize) -> (DVector<f64>, DVector<f64>) {
        let b = sys.pair.mass.to_dense().cholesky().unwrap().solve(&sys.pair.stiffness.to_dense());
        let m = sys.dim();
        let mut op = DMatrix::zeros(2 * m, 2 * m);
        op.view_mut((0, m), (m, m)).fill_with_identity();
        op.view_mut((m, 0), (m, m)).copy_from(&(-b));
        let mut y = DVector::zeros(2 * m);
        y.rows_mut(0, m).copy_from(&sys.alpha0);
        y.rows_mut(m, m).copy_from(&sys.alpha_dot0);
        let h = sys.final_time / n as f64;
        for _ in 0..n {
            let k1 = &op * &y;
            let k2 = &op * (&y + &k1 * (h / 2.0));
            let k3 = &op * (&y + &k2 * (h / 2.0));
            let k4 = &op * (&y + &k3 * h);
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        (y.rows(0, m).into_owned(), y.rows(m, m).into_owned())
    }

    #[test]
    fn zero_kernel_matches_rk4() {
        let sys = p1_system(8, MemoryKernel::zero(0.5), 0.5);
        let (a_ref, v_ref) = rk4(&sys, 20_000);
        let errs: Vec<f64> = [256, 512]
            .iter()
            .map(|&n| {
                let tr = time_step_solve(&sys, n, Scheme::Newmark).unwrap();
                (tr.final_displacement() - &a_ref).amax().max((tr.final_velocity() - &v_ref).amax())
            })
            .collect();
        assert!(errs[0] < 1e-3, "{errs:?}");
        assert!((errs[0] / errs[1]).log2() > 1.8, "{errs:?}");
    }

    #[test]
    fn memory_solution_agrees_with_picard() {
        let t = 0.5;
        let sys = scalar_system(1.0, 9.0, MemoryKernel::exponential(1.0, 2.0, t).unwrap(), 1.0, 0.5, t);
        let tr = time_step_solve(&sys, 512, Scheme::Newmark).unwrap();
        let ie = to_integral_equation(&sys).unwrap();
        let pic = picard_solve(&ie, 512, PicardOptions { tol: 1e-12, max_iters: 80 }).unwrap();
        let gap = tr.sup_distance(&pic.trajectory()).unwrap();
        assert!(gap < 1e-4, "gap {gap}");
        let trap = time_step_solve(&sys, 512, Scheme::Trapezoidal).unwrap();
        assert!(tr.sup_distance(&trap).unwrap() < 1e-4);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let sys = scalar_system(1.0, 1.0, MemoryKernel::zero(1.0), 1.0, 0.0, 1.0);
        let tr = time_step_solve(&sys, 8, Scheme::Newmark).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,alpha_0,velocity_0");
        assert_eq!(lines.len(), 10);
        assert!(time_step_solve(&sys, 4, Scheme::Newmark).is_err());
    }
}
