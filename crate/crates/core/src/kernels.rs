//! Memory kernels `K` for the convolution term and the derived function
//! `ξ(t) = ∫_t^T K(s) ds`.
//!
//! Every kernel shipped here has a closed-form primitive, which the solvers
//! use for exact per-interval moments.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::GaussRule;
use crate::special::gamma;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel evaluated outside its domain at t = {t}")]
    Domain { t: f64 },
    #[error("invalid kernel parameter: {0}")]
    Parameter(String),
}

/// Kernel family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelVariant {
    /// `K(t) = amplitude · exp(-rate · t)`
    Exponential { amplitude: f64, rate: f64 },
    /// `K(t) = scale · t^(exponent - 1) / Γ(exponent)`, weakly singular at 0.
    PowerLaw { exponent: f64, scale: f64 },
    Zero,
}

/// An admissibility candidate: a kernel family checked against `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernel {
    pub variant: KernelVariant,
    pub horizon: f64,
}

impl MemoryKernel {
    pub fn new(variant: KernelVariant, horizon: f64) -> Result<Self, KernelError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(KernelError::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        match variant {
            KernelVariant::Exponential { amplitude, rate } => {
                if !(amplitude > 0.0 && amplitude.is_finite()) {
                    return Err(KernelError::Parameter(format!("amplitude must be > 0, got {amplitude}")));
                }
                if !(rate > 0.0 && rate.is_finite()) {
                    return Err(KernelError::Parameter(format!("rate must be > 0, got {rate}")));
                }
            }
            KernelVariant::PowerLaw { exponent, scale } => {
                if !(exponent > 0.0 && exponent < 1.0) {
                    return Err(KernelError::Parameter(format!("alpha must lie in (0,1), got {exponent}")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(KernelError::Parameter(format!("scale must be > 0, got {scale}")));
                }
            }
            KernelVariant::Zero => {}
        }
        Ok(Self { variant, horizon })
    }

    pub fn exponential(amplitude: f64, rate: f64, horizon: f64) -> Result<Self, KernelError> {
        Self::new(KernelVariant::Exponential { amplitude, rate }, horizon)
    }

    pub fn power_law(exponent: f64, scale: f64, horizon: f64) -> Result<Self, KernelError> {
        Self::new(KernelVariant::PowerLaw { exponent, scale }, horizon)
    }

    pub fn zero(horizon: f64) -> Self {
        Self { variant: KernelVariant::Zero, horizon }
    }

    /// Power-law kernel scaled so that its L1 norm on (0, horizon) equals `kappa`.
    pub fn power_law_with_kappa(exponent: f64, kappa: f64, horizon: f64) -> Result<Self, KernelError> {
        Self::power_law(exponent, power_law_scale_for_kappa(exponent, kappa, horizon), horizon)
    }

    pub fn is_singular_at_origin(&self) -> bool {
        matches!(self.variant, KernelVariant::PowerLaw { .. })
    }

    /// `K(t)`.
    pub fn eval(&self, t: f64) -> Result<f64, KernelError> {
        if t < 0.0 || t.is_nan() {
            return Err(KernelError::Domain { t });
        }
        Ok(match self.variant {
            KernelVariant::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
            KernelVariant::PowerLaw { exponent, scale } => {
                if t == 0.0 {
                    return Err(KernelError::Domain { t });
                }
                scale * t.powf(exponent - 1.0) / gamma(exponent)
            }
            KernelVariant::Zero => 0.0,
        })
    }

    /// `P(u) = ∫_0^u K(s) ds` for `u ≥ 0`.
    pub fn primitive(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        match self.variant {
            KernelVariant::Exponential { amplitude, rate } => -amplitude * (-rate * u).exp_m1() / rate,
            KernelVariant::PowerLaw { exponent, scale } => scale * u.powf(exponent) / gamma(exponent + 1.0),
            KernelVariant::Zero => 0.0,
        }
    }

    /// `∫_a^b K(s) ds` for `0 ≤ a ≤ b`, evaluated without cancellation.
    pub fn moment(&self, a: f64, b: f64) -> f64 {
        debug_assert!(0.0 <= a && a <= b);
        match self.variant {
            KernelVariant::Exponential { amplitude, rate } => {
                -amplitude * (-rate * a).exp() * (-rate * (b - a)).exp_m1() / rate
            }
            KernelVariant::PowerLaw { exponent, scale } => {
                scale * (b.powf(exponent) - a.powf(exponent)) / gamma(exponent + 1.0)
            }
            KernelVariant::Zero => 0.0,
        }
    }

    /// `κ = ‖K‖_{L1(0, horizon)}`.
    pub fn kappa(&self) -> f64 {
        self.primitive(self.horizon)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self, self.horizon)
    }
}

/// `‖K‖_{L1(0, T)}` from the closed-form primitive.
pub fn l1_norm(kernel: &MemoryKernel, horizon: f64) -> f64 {
    assert!(horizon > 0.0, "l1_norm needs a positive horizon");
    kernel.primitive(horizon)
}

/// Scale `c` giving `‖c t^(α-1)/Γ(α)‖_{L1(0,T)} = κ`.
pub fn power_law_scale_for_kappa(exponent: f64, kappa: f64, horizon: f64) -> f64 {
    kappa * gamma(exponent + 1.0) / horizon.powf(exponent)
}

/// One checked property of [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kappa: f64,
    pub horizon: f64,
    pub checks: Vec<PropertyCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kappa = {:.4} on (0, {})", self.kappa, self.horizon)?;
        for c in &self.checks {
            writeln!(f, "  [{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.property, c.detail)?;
        }
        Ok(())
    }
}

/// Sample points clustered at 0: `T·2^(-j)` for j = 0..=40 plus 200 uniform points.
pub fn validation_grid(horizon: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=40).map(|j| horizon * 0.5f64.powi(j)).collect();
    grid.extend((1..=200).map(|i| horizon * i as f64 / 200.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Checks `K ≥ 0`, `K̇ ≤ 0` on [`validation_grid`] and `κ < 1`.
pub fn validate(kernel: &MemoryKernel, horizon: f64) -> ValidationReport {
    assert!(horizon > 0.0, "validate needs a positive horizon");
    let grid = validation_grid(horizon);
    let samples: Vec<(f64, f64)> = grid
        .iter()
        .map(|&t| (t, kernel.eval(t).unwrap_or(f64::NAN)))
        .collect();

    let negative = samples.iter().find(|(_, k)| !(*k >= 0.0 && k.is_finite()));
    let sign = PropertyCheck {
        property: "nonnegative".into(),
        passed: negative.is_none(),
        detail: match negative {
            None => format!("K(t) >= 0 at {} sample points", samples.len()),
            Some((t, k)) => format!("K({t:e}) = {k:e}"),
        },
    };

    let increase = samples.windows(2).find(|w| w[1].1 > w[0].1 * (1.0 + 1e-14) + 1e-300);
    let monotone = PropertyCheck {
        property: "nonincreasing".into(),
        passed: increase.is_none(),
        detail: match increase {
            None => "K(t2) <= K(t1) for every sampled t1 < t2".into(),
            Some(w) => format!("K({:e}) = {:e} > K({:e}) = {:e}", w[1].0, w[1].1, w[0].0, w[0].1),
        },
    };

    let kappa = l1_norm(kernel, horizon);
    let norm = PropertyCheck {
        property: "kappa < 1".into(),
        passed: kappa < 1.0,
        detail: if kappa < 1.0 {
            format!("kappa = {kappa:.4} < 1")
        } else {
            format!("kappa = {kappa:.4} >= 1")
        },
    };

    ValidationReport { kappa, horizon, checks: vec![sign, monotone, norm] }
}

/// `ξ(t) = κ - ∫_0^t K = ∫_t^T K` on [0, T].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiFunction {
    pub kernel: MemoryKernel,
    pub kappa: f64,
}

impl XiFunction {
    pub fn new(kernel: MemoryKernel) -> Self {
        Self { kernel, kappa: kernel.kappa() }
    }

    pub fn horizon(&self) -> f64 {
        self.kernel.horizon
    }

    pub fn eval(&self, t: f64) -> Result<f64, KernelError> {
        let horizon = self.kernel.horizon;
        if !(0.0..=horizon).contains(&t) {
            return Err(KernelError::Domain { t });
        }
        Ok(self.kernel.moment(t, horizon))
    }
}

/// Continuous piecewise-linear function given by samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(nodes.len(), values.len());
        assert!(nodes.len() >= 2, "need at least two samples");
        assert!(nodes.windows(2).all(|w| w[0] < w[1]), "nodes must increase");
        Self { nodes, values }
    }

    /// Samples on the uniform grid of [0, T] with `values.len() - 1` intervals.
    pub fn uniform(horizon: f64, values: Vec<f64>) -> Self {
        let n = values.len() - 1;
        let nodes = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
        Self::new(nodes, values)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.nodes.len();
        if t <= self.nodes[0] {
            return self.values[0];
        }
        if t >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.nodes.partition_point(|&x| x <= t) - 1;
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let w = (t - x0) / (x1 - x0);
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// `∫_0^T ∫_0^t ξ(t-s) φ(t) φ(s) ds dt` by composite Gauss quadrature on
/// `resolution` uniform cells (6 points per cell in each direction).
pub fn positive_type_check(xi: &XiFunction, phi: &PiecewiseLinear, resolution: usize) -> f64 {
    assert!(resolution >= 16, "positive_type_check needs at least 16 intervals");
    let horizon = xi.horizon();
    let rule = GaussRule::new(6);
    let step = horizon / resolution as f64;
    let inner = |t: f64| -> f64 {
        let full = ((t / step).floor() as usize).min(resolution);
        let mut acc = 0.0;
        for cell in 0..full {
            let a = cell as f64 * step;
            acc += rule
                .on_interval(a, a + step)
                .map(|(s, w)| w * xi.kernel.moment((t - s).max(0.0), horizon) * phi.eval(s))
                .sum::<f64>();
        }
        let a = full as f64 * step;
        if t > a {
            acc += rule
                .on_interval(a, t)
                .map(|(s, w)| w * xi.kernel.moment((t - s).max(0.0), horizon) * phi.eval(s))
                .sum::<f64>();
        }
        acc
    };
    rule.integrate(|t| phi.eval(t) * inner(t), 0.0, horizon, resolution)
}
