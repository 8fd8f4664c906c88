use proptest::prelude::*;
use statrs::function::gamma::gamma as oracle_gamma;
use viscowave::kernels::{l1_norm, validate};
use viscowave::quadrature::tanh_sinh;
use viscowave::{MemoryKernel, XiFunction};

#[test]
fn l1_norm_matches_quadrature_of_the_kernel() {
    let horizon = 1.5;
    for alpha in [0.25, 0.5, 0.75] {
        let k = MemoryKernel::power_law(alpha, 0.3, horizon).unwrap();
        let oracle = tanh_sinh(|_t, from_a, _| 0.3 * from_a.powf(alpha - 1.0) / oracle_gamma(alpha), 0.0, horizon, 1e-14);
        assert!((l1_norm(&k, horizon) - oracle).abs() < 1e-10 * oracle, "alpha {alpha}");
    }
    for rate in [0.5, 2.0, 10.0] {
        let k = MemoryKernel::exponential(0.7, rate, horizon).unwrap();
        let oracle = tanh_sinh(|t, _, _| 0.7 * (-rate * t).exp(), 0.0, horizon, 1e-14);
        assert!((l1_norm(&k, horizon) - oracle).abs() < 1e-12, "rate {rate}");
    }
}

#[test]
fn power_law_validation_boundary() {
    // Just above κ = 1 is rejected; just below is accepted.
    let c = oracle_gamma(1.25);
    assert!(!validate(&MemoryKernel::power_law(0.25, 1.001 * c, 1.0).unwrap(), 1.0).passed());
    assert!(validate(&MemoryKernel::power_law(0.25, 0.999 * c, 1.0).unwrap(), 1.0).passed());
}

fn admissible_kernel() -> impl Strategy<Value = MemoryKernel> {
    prop_oneof![
        (0.05f64..0.95, 0.05f64..0.9).prop_map(|(a, kappa)| MemoryKernel::power_law_with_kappa(a, kappa, 1.0).unwrap()),
        (0.1f64..10.0, 0.05f64..0.95).prop_map(|(rate, frac)| MemoryKernel::exponential(frac * rate, rate, 1.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn xi_is_nonincreasing(k in admissible_kernel(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let xi = XiFunction::new(k);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(xi.eval(lo).unwrap() >= xi.eval(hi).unwrap() - 1e-15);
    }
}

proptest! {
    #[test]
    fn xi_derivative_is_minus_kernel(k in admissible_kernel(), t in 0.05f64..0.95) {
        let xi = XiFunction::new(k);
        let d = 1e-5;
        let fd = (xi.eval(t + d).unwrap() - xi.eval(t - d).unwrap()) / (2.0 * d);
        let kt = k.eval(t).unwrap();
        prop_assert!((fd + kt).abs() <= 1e-6 * kt.max(1.0), "fd {} vs -K {}", fd, -kt);
    }

    #[test]
    fn xi_endpoints(k in admissible_kernel()) {
        let xi = XiFunction::new(k);
        prop_assert!((xi.eval(0.0).unwrap() - k.kappa()).abs() < 1e-14);
        prop_assert!(xi.eval(1.0).unwrap().abs() < 1e-15);
        prop_assert!(xi.eval(1.5).is_err());
    }
}
