use std::io::{self, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::integral::VolterraIE;
use super::stepping::Trajectory;
use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PicardOptions {
    /// Stop once the sup-grid increment falls to this value.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `max_i |D^{n+1}(t_i) − D^n(t_i)|∞`.
    pub measured: f64,
    /// `Z^{n+1} T^{n+1} / (n+1)! · Z⁰`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardCertificate {
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "Z0")]
    pub z0: f64,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub iterations: Vec<IterationRecord>,
}

impl PicardCertificate {
    /// `Z^{n+1} T^{n+1} / (n+1)! · Z⁰`, evaluated in log space.
    pub fn bound(z: f64, z0: f64, final_time: f64, n: usize) -> f64 {
        if z0 == 0.0 || z == 0.0 {
            return 0.0;
        }
        let k = (n + 1) as f64;
        let log_fact: f64 = (2..=n + 1).map(|j| (j as f64).ln()).sum();
        (k * (z * final_time).ln() - log_fact + z0.ln()).exp()
    }

    /// Every record with `n ≤ up_to` satisfies `measured ≤ bound + slack`.
    pub fn dominated(&self, up_to: usize, slack: f64) -> bool {
        self.iterations.iter().filter(|r| r.n <= up_to).all(|r| r.measured <= r.bound + slack)
    }

    /// Largest `measured − bound` over the records with `n ≤ up_to`.
    pub fn worst_margin(&self, up_to: usize) -> f64 {
        self.iterations
            .iter()
            .filter(|r| r.n <= up_to)
            .map(|r| r.measured - r.bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate is plain data")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    /// `D(t_i) = [α(t_i); α̇(t_i)]`.
    pub states: Vec<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub last_increment: f64,
    pub certificate: PicardCertificate,
}

impl PicardSolution {
    pub fn into_converged(self) -> Result<Self, SolverError> {
        if self.converged {
            Ok(self)
        } else {
            Err(SolverError::PicardNotConverged { iterations: self.iterations, last_increment: self.last_increment })
        }
    }

    pub fn trajectory(&self) -> Trajectory {
        let m = self.states[0].len() / 2;
        Trajectory {
            times: self.times.clone(),
            displacement: self.states.iter().map(|d| d.rows(0, m).into_owned()).collect(),
            velocity: self.states.iter().map(|d| d.rows(m, m).into_owned()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        self.trajectory().write_csv(out)
    }
}

/// Picard iteration from `D⁰ = ℱ` on `n_steps + 1` uniform nodes. Fails
/// with [`SolverError::PicardNotConverged`] when `max_iters` is exhausted.
pub fn picard_solve(ie: &VolterraIE, n_steps: usize, opts: PicardOptions) -> Result<PicardSolution, SolverError> {
    picard_iterate(ie, n_steps, opts)?.into_converged()
}

/// As [`picard_solve`] but returns the last iterate and its certificate even
/// without convergence.
pub fn picard_iterate(ie: &VolterraIE, n_steps: usize, opts: PicardOptions) -> Result<PicardSolution, SolverError> {
    check_grid(n_steps, opts)?;
    let times = grid(ie.final_time(), n_steps);
    let forcing = ie.forcing_on_grid(&times);
    iterate(ie, times, &forcing, forcing.clone(), opts)
}

/// Picard iteration from a caller-supplied `D⁰` on the grid; later iterates
/// use the true forcing `ℱ`.
pub fn picard_solve_from(
    ie: &VolterraIE,
    n_steps: usize,
    opts: PicardOptions,
    initial: Vec<DVector<f64>>,
) -> Result<PicardSolution, SolverError> {
    check_grid(n_steps, opts)?;
    if initial.len() != n_steps + 1 || initial.iter().any(|d| d.len() != ie.dim()) {
        return Err(SolverError::DimensionMismatch(format!(
            "initial iterate needs {} vectors of size {}",
            n_steps + 1,
            ie.dim()
        )));
    }
    let times = grid(ie.final_time(), n_steps);
    let forcing = ie.forcing_on_grid(&times);
    iterate(ie, times, &forcing, initial, opts)?.into_converged()
}

fn check_grid(n_steps: usize, opts: PicardOptions) -> Result<(), SolverError> {
    if n_steps < 8 {
        return Err(SolverError::InvalidGrid(format!("need at least 8 steps, got {n_steps}")));
    }
    if !(opts.tol > 0.0) {
        return Err(SolverError::InvalidGrid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    Ok(())
}

pub(crate) fn grid(final_time: f64, n_steps: usize) -> Vec<f64> {
    (0..=n_steps).map(|i| final_time * i as f64 / n_steps as f64).collect()
}

fn iterate(
    ie: &VolterraIE,
    times: Vec<f64>,
    forcing: &[DVector<f64>],
    mut current: Vec<DVector<f64>>,
    opts: PicardOptions,
) -> Result<PicardSolution, SolverError> {
    let m = ie.first_order().m();
    let n = times.len() - 1;
    let dt = ie.final_time() / n as f64;
    // 1 − P(t_i − t_j) depends on i − j only.
    let memory: Vec<f64> = (0..=n).map(|k| 1.0 - ie.kernel().primitive(k as f64 * dt)).collect();
    let b = ie.first_order().mass_inv_stiffness();
    let mut certificate =
        PicardCertificate { z: ie.z(), z0: ie.z0(), final_time: ie.final_time(), iterations: Vec::new() };
    let mut last_increment = f64::INFINITY;
    for it in 0..opts.max_iters {
        let b_alpha: Vec<DVector<f64>> = current.iter().map(|d| b * d.rows(0, m)).collect();
        let mut next = forcing.to_vec();
        let mut increment: f64 = 0.0;
        for i in 0..=n {
            let (mut da, mut dv) = (DVector::zeros(m), DVector::zeros(m));
            // Composite trapezoid on [0, t_i].
            for j in 0..=i {
                if i == 0 {
                    break;
                }
                let w = if j == 0 || j == i { 0.5 * dt } else { dt };
                da.axpy(w, &current[j].rows(m, m), 1.0);
                dv.axpy(-w * memory[i - j], &b_alpha[j], 1.0);
            }
            let mut top = next[i].rows_mut(0, m);
            top += da;
            let mut bottom = next[i].rows_mut(m, m);
            bottom += dv;
            increment = increment.max((&next[i] - &current[i]).amax());
        }
        certificate.iterations.push(IterationRecord {
            n: it,
            measured: increment,
            bound: PicardCertificate::bound(ie.z(), ie.z0(), ie.final_time(), it),
        });
        current = next;
        last_increment = increment;
        if increment <= opts.tol {
            return Ok(PicardSolution {
                times,
                states: current,
                iterations: it + 1,
                converged: true,
                last_increment,
                certificate,
            });
        }
    }
    Ok(PicardSolution { times, states: current, iterations: opts.max_iters, converged: false, last_increment, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{assemble, EllipticForm, GalerkinSpace};
    use crate::kernels::MemoryKernel;
    use crate::volterra::system::tests::scalar_system;
    use crate::volterra::{to_integral_equation, SemidiscreteSystem};

    #[test]
    fn free_particle_is_exact() {
        // M = 1, S = 0: α = 1 + t, α̇ = 1. The drift block −I still couples
        // α to α̇, so the iteration needs one nontrivial sweep.
        let sys = scalar_system(1.0, 0.0, MemoryKernel::zero(1.0), 1.0, 1.0, 1.0);
        let ie = to_integral_equation(&sys).unwrap();
        let sol = picard_solve(&ie, 16, PicardOptions::default()).unwrap();
        assert_eq!(sol.iterations, 2);
        for (t, d) in sol.times.iter().zip(&sol.states) {
            assert!((d[0] - (1.0 + t)).abs() < 1e-14);
            assert!((d[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn oscillator_error_is_second_order() {
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let sys = scalar_system(1.0, 4.0, MemoryKernel::zero(1.0), 1.0, 0.0, 1.0);
                let ie = to_integral_equation(&sys).unwrap();
                let sol = picard_solve(&ie, n, PicardOptions { tol: 1e-13, max_iters: 80 }).unwrap();
                sol.times.iter().zip(&sol.states).map(|(t, d)| (d[0] - (2.0 * t).cos()).abs()).fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] < 1e-3, "{errs:?}");
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "order {order}");
    }

    fn spectral_system(modes: usize, kernel: MemoryKernel, t: f64) -> SemidiscreteSystem {
        let space = GalerkinSpace::spectral(0.0, 1.0, modes).unwrap();
        let pair = assemble(&space, &EllipticForm::ScalarLaplace).unwrap();
        let a0 = DVector::from_fn(modes, |k, _| 1.0 / (k + 1) as f64);
        let v0 = DVector::from_fn(modes, |k, _| if k == 0 { 0.5 } else { 0.0 });
        SemidiscreteSystem::new(pair, kernel, None, a0, v0, t).unwrap()
    }

    #[test]
    fn certificate_dominates_increments() {
        let t = 0.015;
        let sys = spectral_system(4, MemoryKernel::exponential(1.0, 2.0, t).unwrap(), t);
        let ie = to_integral_equation(&sys).unwrap();
        assert!(ie.z() * t <= 4.0);
        let sol = picard_solve(&ie, 128, PicardOptions::default()).unwrap();
        assert!(sol.iterations < 40);
        assert!(sol.certificate.dominated(10, 1e-9), "{:?}", sol.certificate.iterations);
        let json: serde_json::Value = serde_json::from_str(&sol.certificate.to_json()).unwrap();
        assert!(json["Z"].is_number() && json["Z0"].is_number());
        assert!(json["iterations"][0]["measured"].is_number());
    }

    #[test]
    fn perturbed_start_reaches_same_fixed_point() {
        let t = 0.015;
        let sys = spectral_system(3, MemoryKernel::power_law_with_kappa(0.5, 0.3, t).unwrap(), t);
        let ie = to_integral_equation(&sys).unwrap();
        let opts = PicardOptions::default();
        let base = picard_solve(&ie, 64, opts).unwrap();
        let times = grid(t, 64);
        let forcing = ie.forcing_on_grid(&times);
        let perturbed: Vec<_> = forcing
            .iter()
            .zip(&times)
            .map(|(f, &s)| f + DVector::from_element(ie.dim(), 0.3 * (-s / t * 5.0).exp()))
            .collect();
        let other = picard_solve_from(&ie, 64, opts, perturbed).unwrap();
        let gap = base.trajectory().sup_distance(&other.trajectory()).unwrap();
        assert!(gap <= 10.0 * opts.tol, "gap {gap}");
    }

    #[test]
    fn reports_non_convergence_with_last_increment() {
        let sys = spectral_system(2, MemoryKernel::zero(1.0), 1.0);
        let ie = to_integral_equation(&sys).unwrap();
        let err = picard_solve(&ie, 16, PicardOptions { tol: 1e-10, max_iters: 3 }).unwrap_err();
        match err {
            SolverError::PicardNotConverged { iterations, last_increment } => {
                assert_eq!(iterations, 3);
                assert!(last_increment > 1e-10);
            }
            other => panic!("unexpected {other:?}"),
        }
        let partial = picard_iterate(&ie, 16, PicardOptions { tol: 1e-10, max_iters: 3 }).unwrap();
        assert!(!partial.converged);
        assert_eq!(partial.certificate.iterations.len(), 3);
        assert!(picard_solve(&ie, 4, PicardOptions::default()).is_err());
    }

    #[test]
    fn bound_matches_direct_formula() {
        let b = PicardCertificate::bound(3.0, 2.0, 0.5, 2);
        assert!((b - 1.5_f64.powi(3) / 6.0 * 2.0).abs() < 1e-14);
        assert_eq!(PicardCertificate::bound(3.0, 0.0, 0.5, 2), 0.0);
    }
}
