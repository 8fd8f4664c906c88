//! Quadrature rules: Gauss-Legendre on intervals, collapsed Gauss on the
//! reference triangle, and tanh-sinh for integrands with endpoint
//! singularities.

use std::f64::consts::PI;

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Chebyshev-type initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = -x;
            points[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { points, weights }
    }

    /// Smallest rule exact for polynomials of the given degree.
    pub fn for_degree(degree: usize) -> Self {
        Self::new(degree / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Composite integral of `f` over [a, b] split into `pieces` equal parts.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64, pieces: usize) -> f64 {
        let pieces = pieces.max(1);
        let step = (b - a) / pieces as f64;
        let mut total = 0.0;
        for p in 0..pieces {
            let lo = a + p as f64 * step;
            let hi = if p + 1 == pieces { b } else { lo + step };
            total += self.on_interval(lo, hi).map(|(x, w)| w * f(x)).sum::<f64>();
        }
        total
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature on the reference triangle (0,0), (1,0), (0,1).
///
/// Weights sum to the reference area 1/2. Points are given in the
/// barycentric-friendly form `(x, y)` with `x, y >= 0, x + y <= 1`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Collapsed (Duffy) tensor Gauss rule exact for total degree `degree`.
    pub fn for_degree(degree: usize) -> Self {
        // Jacobian (1 - u) raises the u-degree by one.
        let line = GaussRule::new(degree.div_ceil(2) + 1);
        let mut points = Vec::with_capacity(line.len() * line.len());
        let mut weights = Vec::with_capacity(line.len() * line.len());
        for (u, wu) in line.on_interval(0.0, 1.0) {
            for (v, wv) in line.on_interval(0.0, 1.0) {
                points.push([u, (1.0 - u) * v]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        Self { points, weights }
    }
}

/// Double-exponential (tanh-sinh) quadrature of `f` over [a, b].
///
/// The integrand is never evaluated at the endpoints, so algebraic endpoint
/// singularities such as `t^(alpha - 1)` are handled. The closure receives
/// the abscissa together with its distances to `a` and `b` so that callers
/// can evaluate singular factors without cancellation.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, rel_tol: f64) -> f64
where
    F: Fn(f64, f64, f64) -> f64,
{
    if a == b {
        return 0.0;
    }
    let len = b - a;
    let half_pi = 0.5 * PI;
    let eval = |tau: f64| -> f64 {
        let s = half_pi * tau.sinh();
        let cosh_s = s.cosh();
        let w = 0.5 * len * half_pi * tau.cosh() / (cosh_s * cosh_s);
        if w == 0.0 || !w.is_finite() {
            return 0.0;
        }
        // Distances to the endpoints computed without forming a + x - a.
        let from_a = len / (1.0 + (-2.0 * s).exp());
        let from_b = len / (1.0 + (2.0 * s).exp());
        if from_a <= 0.0 || from_b <= 0.0 {
            return 0.0;
        }
        let x = if from_a <= from_b { a + from_a } else { b - from_b };
        w * f(x, from_a, from_b)
    };
    let tau_max = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    loop {
        let tau = k as f64 * h;
        if tau > tau_max {
            break;
        }
        sum += eval(tau) + eval(-tau);
        k += 1;
    }
    let mut estimate = sum * h;
    for _level in 0..12 {
        h *= 0.5;
        let mut added = 0.0;
        let mut k = 1;
        loop {
            let tau = k as f64 * h;
            if tau > tau_max {
                break;
            }
            added += eval(tau) + eval(-tau);
            k += 2;
        }
        sum += added;
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * estimate.abs().max(1e-300) {
            break;
        }
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exactness() {
        for n in 1..=8 {
            let rule = GaussRule::new(n);
            let sum_w: f64 = rule.weights.iter().sum();
            assert!((sum_w - 2.0).abs() < 1e-14);
            for deg in 0..(2 * n) {
                let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&x, &w)| w * x.powi(deg as i32))
                    .sum();
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn triangle_exactness() {
        // ∫_T x^p y^q = p! q! / (p + q + 2)!
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        for degree in 0..=8 {
            let rule = TriangleRule::for_degree(degree);
            for p in 0..=degree {
                for q in 0..=(degree - p) {
                    let exact = fact(p) * fact(q) / fact(p + q + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(x, w)| w * x[0].powi(p as i32) * x[1].powi(q as i32))
                        .sum();
                    assert!((approx - exact).abs() < 1e-14, "deg {degree}: x^{p} y^{q}");
                }
            }
        }
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        // ∫_0^1 t^(-3/4) dt = 4
        let v = tanh_sinh(|_, da, _| da.powf(-0.75), 0.0, 1.0, 1e-14);
        assert!((v - 4.0).abs() < 1e-11, "{v}");
        let v = tanh_sinh(|x, _, _| x.exp(), 0.0, 2.0, 1e-14);
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-12);
    }
}
