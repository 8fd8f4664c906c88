//! Lagrange P1/P2 shape functions on intervals and triangles.

use crate::mesh::{Mesh, Point};
use crate::quadrature::{GaussRule, TriangleRule};

use super::FemData;

/// Basis values and physical gradients at the quadrature points of one element.
#[derive(Debug, Clone)]
pub(crate) struct ElementQuad {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `values[q][i]`: local basis `i` at point `q`.
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

fn line_shape(degree: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    match degree {
        1 => (vec![1.0 - s, s], vec![-1.0, 1.0]),
        _ => (
            vec![(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)],
            vec![4.0 * s - 3.0, 4.0 * s - 1.0, 4.0 - 8.0 * s],
        ),
    }
}

/// Shape values on an edge parametrized by `s ∈ [0, 1]`; node order
/// `[start, end, midpoint]`.
pub(crate) fn edge_shape(degree: usize, s: f64) -> Vec<f64> {
    line_shape(degree, s).0
}

/// Barycentric gradients of a triangle and twice its area.
fn barycentric_gradients(c: [Point; 3]) -> ([[f64; 2]; 3], f64) {
    let two_area = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let g = |i: usize| {
        let (p, q) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area]
    };
    ([g(0), g(1), g(2)], two_area)
}

fn triangle_shape(degree: usize, lam: [f64; 3], gl: &[[f64; 2]; 3]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let scale = |a: f64, g: [f64; 2]| [a * g[0], a * g[1]];
    let add = |a: [f64; 2], b: [f64; 2]| [a[0] + b[0], a[1] + b[1]];
    match degree {
        1 => (lam.to_vec(), gl.to_vec()),
        _ => {
            let mut v = Vec::with_capacity(6);
            let mut g = Vec::with_capacity(6);
            for i in 0..3 {
                v.push(lam[i] * (2.0 * lam[i] - 1.0));
                g.push(scale(4.0 * lam[i] - 1.0, gl[i]));
            }
            for i in 0..3 {
                let j = (i + 1) % 3;
                v.push(4.0 * lam[i] * lam[j]);
                g.push(add(scale(4.0 * lam[j], gl[i]), scale(4.0 * lam[i], gl[j])));
            }
            (v, g)
        }
    }
}

/// Local basis values and gradients at reference coordinates `local`
/// (`[s, 0]` on intervals, `[ξ, η]` on the reference triangle).
pub(crate) fn shape_at(f: &FemData, e: usize, local: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    match &f.mesh {
        Mesh::Line(m) => {
            let (x0, x1) = m.element(e);
            let (v, d) = line_shape(f.degree, local[0]);
            (v, d.into_iter().map(|d| [d / (x1 - x0), 0.0]).collect())
        }
        Mesh::Triangles(m) => {
            let (gl, _) = barycentric_gradients(m.corners(e));
            let lam = [1.0 - local[0] - local[1], local[0], local[1]];
            triangle_shape(f.degree, lam, &gl)
        }
    }
}

impl FemData {
    /// Element quadrature exact for polynomials of total degree `degree`.
    pub(crate) fn element_quad(&self, e: usize, degree: usize) -> ElementQuad {
        match &self.mesh {
            Mesh::Line(m) => {
                let (x0, x1) = m.element(e);
                let rule = GaussRule::for_degree(degree);
                let mut q = ElementQuad {
                    points: Vec::with_capacity(rule.len()),
                    weights: Vec::with_capacity(rule.len()),
                    values: Vec::with_capacity(rule.len()),
                    grads: Vec::with_capacity(rule.len()),
                };
                for (s, w) in rule.on_interval(0.0, 1.0) {
                    let (v, d) = line_shape(self.degree, s);
                    q.points.push([x0 + s * (x1 - x0), 0.0]);
                    q.weights.push(w * (x1 - x0));
                    q.values.push(v);
                    q.grads.push(d.into_iter().map(|d| [d / (x1 - x0), 0.0]).collect());
                }
                q
            }
            Mesh::Triangles(m) => {
                let c = m.corners(e);
                let (gl, two_area) = barycentric_gradients(c);
                let rule = TriangleRule::for_degree(degree);
                let mut q = ElementQuad {
                    points: Vec::with_capacity(rule.weights.len()),
                    weights: Vec::with_capacity(rule.weights.len()),
                    values: Vec::with_capacity(rule.weights.len()),
                    grads: Vec::with_capacity(rule.weights.len()),
                };
                for (p, &w) in rule.points.iter().zip(&rule.weights) {
                    let lam = [1.0 - p[0] - p[1], p[0], p[1]];
                    let x = [
                        lam[0] * c[0][0] + lam[1] * c[1][0] + lam[2] * c[2][0],
                        lam[0] * c[0][1] + lam[1] * c[1][1] + lam[2] * c[2][1],
                    ];
                    let (v, g) = triangle_shape(self.degree, lam, &gl);
                    q.points.push(x);
                    q.weights.push(w * two_area);
                    q.values.push(v);
                    q.grads.push(g);
                }
                q
            }
        }
    }

    /// Element containing `x` and the reference coordinates of `x` in it.
    pub(crate) fn locate(&self, x: Point) -> Option<(usize, [f64; 2])> {
        let tol = 1e-12;
        match &self.mesh {
            Mesh::Line(m) => {
                let xs = m.vertices();
                let (a, b) = m.bounds();
                if x[0] < a - tol || x[0] > b + tol {
                    return None;
                }
                let e = (xs.partition_point(|&v| v <= x[0]).max(1) - 1).min(m.n_elements() - 1);
                let (x0, x1) = m.element(e);
                Some((e, [(x[0] - x0) / (x1 - x0), 0.0]))
            }
            Mesh::Triangles(m) => (0..m.triangles().len()).find_map(|e| {
                let c = m.corners(e);
                let (gl, _) = barycentric_gradients(c);
                let d = [x[0] - c[0][0], x[1] - c[0][1]];
                let l1 = gl[1][0] * d[0] + gl[1][1] * d[1];
                let l2 = gl[2][0] * d[0] + gl[2][1] * d[1];
                (l1 >= -tol && l2 >= -tol && l1 + l2 <= 1.0 + tol).then_some((e, [l1, l2]))
            }),
        }
    }
}
