use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use viscowave::convergence::{
    error_split, run_convergence, InitialPolicy, ManufacturedProblem, SpatialMode, StudySpec, TimePolicy,
};
use viscowave::galerkin::SpaceKind;
use viscowave::volterra::{time_step_solve, Projection, Scheme};
use viscowave::MemoryKernel;

fn shipped() -> Vec<ManufacturedProblem> {
    let mut out = Vec::new();
    for kernel in [
        MemoryKernel::zero(1.0),
        MemoryKernel::exponential(0.5, 1.0, 1.0).unwrap(),
        MemoryKernel::power_law_with_kappa(0.5, 0.5, 1.0).unwrap(),
    ] {
        out.push(ManufacturedProblem::standing_wave(1.0, kernel, 1.0));
        out.push(ManufacturedProblem::standing_wave(PI, kernel, 1.0));
        out.push(ManufacturedProblem::new(SpatialMode::Square, 1.0, 1.0, kernel, 1.0));
    }
    out
}

#[test]
fn manufactured_residual_at_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in shipped() {
        for _ in 0..100 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let t = rng.random_range(0.0..p.final_time);
            let r = p.residual(x, t);
            assert!(r.abs() <= 1e-8, "{p:?} at {x:?}, {t}: {r}");
        }
    }
}

#[test]
fn refinement_reduces_each_error_by_the_rate() {
    let p = ManufacturedProblem::standing_wave(1.0, MemoryKernel::exponential(0.5, 1.0, 1.0).unwrap(), 1.0);
    let report = run_convergence(&p, &StudySpec::new(SpaceKind::p1(), vec![8, 16, 32])).unwrap();
    for w in report.levels.windows(2) {
        let (a, b) = (w[0].errors.unwrap(), w[1].errors.unwrap());
        assert!(a.l2 / b.l2 >= 2.0_f64.powf(2.0 - 0.3));
        assert!(a.energy / b.energy >= 2.0_f64.powf(1.0 - 0.3));
        assert!(a.velocity / b.velocity >= 2.0_f64.powf(2.0 - 0.3));
    }
    assert!(report.levels.iter().all(|l| l.sup_l2.unwrap() >= l.errors.unwrap().l2));
}

#[test]
fn interpolated_initial_data_keeps_the_rate() {
    let p = ManufacturedProblem::standing_wave(PI, MemoryKernel::exponential(0.5, 1.0, 1.0).unwrap(), 1.0);
    let base = StudySpec::new(SpaceKind::p1(), vec![8, 16, 32, 64]);
    let ritz = run_convergence(&p, &base).unwrap().final_rates().unwrap();
    let interp = base.with_initial(InitialPolicy { displacement: Projection::Interpolation, velocity: Projection::L2 });
    let nodal = run_convergence(&p, &interp).unwrap().final_rates().unwrap();
    assert!((ritz.l2 - nodal.l2).abs() < 0.2, "{ritz:?} vs {nodal:?}");
}

#[test]
fn error_split_obeys_triangle_inequality() {
    let p = ManufacturedProblem::standing_wave(1.0, MemoryKernel::power_law_with_kappa(0.5, 0.5, 1.0).unwrap(), 1.0);
    let mut omegas = Vec::new();
    for n in [8, 16, 32] {
        let space = p.space(SpaceKind::p1(), n).unwrap();
        let sys = p.system(&space, InitialPolicy::default()).unwrap();
        let tr = time_step_solve(&sys, 256, Scheme::Newmark).unwrap();
        let split = error_split(&space, &tr, &p).unwrap();
        assert!(split.triangle_holds(), "{split:?}");
        omegas.push(split.omega);
    }
    for w in omegas.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8);
    }
}

#[test]
fn two_dimensional_p1_rates() {
    let p = ManufacturedProblem::new(SpatialMode::Square, 1.0, 1.0, MemoryKernel::exponential(0.5, 1.0, 1.0).unwrap(), 0.5);
    let spec = StudySpec::new(SpaceKind::p1(), vec![4, 8, 16]).with_time(TimePolicy::Fixed { steps: 64 });
    let rates = run_convergence(&p, &spec).unwrap().final_rates().unwrap();
    assert!((rates.l2 - 2.0).abs() < 0.25, "{rates:?}");
    assert!((rates.energy - 1.0).abs() < 0.2, "{rates:?}");
}
