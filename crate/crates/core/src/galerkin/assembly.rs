//! Mass/stiffness assembly and load vectors.

use nalgebra::DVector;

use crate::linalg::SparseMatrix;
use crate::mesh::{BoundaryMarker, Mesh};
use crate::quadrature::GaussRule;

use super::element::edge_shape;
use super::{EllipticForm, FemData, Field, GalerkinSpace, SpaceError, SpaceRepr, SpectralData};

/// `M = ((φ_j, φ_k))`, `S = (a(φ_j, φ_k))` on the free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledPair {
    pub mass: SparseMatrix,
    pub stiffness: SparseMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDiagnostics {
    pub mass_symmetry_defect: f64,
    pub stiffness_symmetry_defect: f64,
    pub mass_positive_definite: bool,
    pub stiffness_positive_definite: bool,
}

impl PairDiagnostics {
    /// Symmetric to 1e-14 relative and both factors positive definite.
    pub fn is_spd(&self) -> bool {
        self.mass_symmetry_defect <= 1e-14
            && self.stiffness_symmetry_defect <= 1e-14
            && self.mass_positive_definite
            && self.stiffness_positive_definite
    }
}

impl AssembledPair {
    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    pub fn diagnostics(&self) -> PairDiagnostics {
        PairDiagnostics {
            mass_symmetry_defect: self.mass.symmetry_defect(),
            stiffness_symmetry_defect: self.stiffness.symmetry_defect(),
            mass_positive_definite: self.mass.is_positive_definite(),
            stiffness_positive_definite: self.stiffness.is_positive_definite(),
        }
    }
}

pub(crate) fn check_form(space: &GalerkinSpace, form: &EllipticForm) -> Result<(), SpaceError> {
    match (&space.repr, form) {
        (SpaceRepr::Spectral(_), EllipticForm::ScalarLaplace) => Ok(()),
        (SpaceRepr::Spectral(_), _) => {
            Err(SpaceError::DimensionMismatch("spectral spaces carry the scalar Laplacian only".into()))
        }
        (SpaceRepr::Fem(f), EllipticForm::ScalarLaplace) if f.components == 1 => Ok(()),
        (SpaceRepr::Fem(f), EllipticForm::ScalarLaplace) => Err(SpaceError::DimensionMismatch(format!(
            "scalar Laplacian on a {}-component space",
            f.components
        ))),
        (SpaceRepr::Fem(f), EllipticForm::Elasticity2D { .. }) => {
            if f.mesh.dim() == 2 && f.components == 2 {
                Ok(())
            } else {
                Err(SpaceError::DimensionMismatch(format!(
                    "elasticity needs a 2D two-component space, got {}D with {} components",
                    f.mesh.dim(),
                    f.components
                )))
            }
        }
    }
}

/// Assembles `(M, S)`; exact for the polynomial integrands of P1/P2.
pub fn assemble(space: &GalerkinSpace, form: &EllipticForm) -> Result<AssembledPair, SpaceError> {
    check_form(space, form)?;
    match &space.repr {
        SpaceRepr::Spectral(s) => {
            let eig: Vec<f64> = (1..=s.modes).map(|j| s.eigenvalue(j)).collect();
            Ok(AssembledPair { mass: SparseMatrix::identity(s.modes), stiffness: SparseMatrix::from_diagonal(&eig) })
        }
        SpaceRepr::Fem(f) => Ok(assemble_fem(f, space.dim(), Some(form))),
    }
}

fn assemble_fem(f: &FemData, dim: usize, form: Option<&EllipticForm>) -> AssembledPair {
    let nc = f.components;
    let mut mass = Vec::new();
    let mut stiff = Vec::new();
    let zero = [[0.0; 2]; 2];
    for (e, cell) in f.cells.iter().enumerate() {
        let quad = f.element_quad(e, 2 * f.degree);
        for q in 0..quad.weights.len() {
            let w = quad.weights[q];
            for (i, &ni) in cell.iter().enumerate() {
                let Some(di) = f.node_dof[ni] else { continue };
                for (j, &nj) in cell.iter().enumerate() {
                    let Some(dj) = f.node_dof[nj] else { continue };
                    let m = w * quad.values[q][i] * quad.values[q][j];
                    for a in 0..nc {
                        mass.push((di + a, dj + a, m));
                        let Some(form) = form else { continue };
                        let mut gv = zero;
                        gv[a] = quad.grads[q][i];
                        for b in 0..nc {
                            let mut gu = zero;
                            gu[b] = quad.grads[q][j];
                            let s = form.density(&gu[..nc], &gv[..nc]);
                            if s != 0.0 {
                                stiff.push((di + a, dj + b, w * s));
                            }
                        }
                    }
                }
            }
        }
    }
    AssembledPair {
        mass: SparseMatrix::from_triplets(dim, dim, &mass),
        stiffness: SparseMatrix::from_triplets(dim, dim, &stiff),
    }
}

/// Mass matrix alone, for any number of components.
pub(crate) fn mass_matrix(space: &GalerkinSpace) -> SparseMatrix {
    match &space.repr {
        SpaceRepr::Spectral(s) => SparseMatrix::identity(s.modes),
        SpaceRepr::Fem(f) => assemble_fem(f, space.dim(), None).mass,
    }
}

/// Quadrature nodes and weights for spectral inner products on the interval.
pub(crate) fn spectral_quadrature(s: &SpectralData) -> Vec<(f64, f64)> {
    let rule = GaussRule::new(8);
    let pieces = 2 * s.modes + 16;
    let step = s.length() / pieces as f64;
    (0..pieces)
        .flat_map(|p| {
            let lo = s.a + p as f64 * step;
            rule.on_interval(lo, lo + step).collect::<Vec<_>>()
        })
        .collect()
}

/// `F_k = (f, φ_k) + (g, φ_k)_{∂Ω_N}`.
pub fn assemble_load(
    space: &GalerkinSpace,
    f: &dyn Field,
    g: Option<&dyn Field>,
) -> Result<DVector<f64>, SpaceError> {
    if g.is_some() && !space.has_neumann_boundary() {
        return Err(SpaceError::NoNeumannBoundary);
    }
    let mut load = DVector::zeros(space.dim());
    match &space.repr {
        SpaceRepr::Spectral(s) => {
            for (x, w) in spectral_quadrature(s) {
                let fx = f.value([x, 0.0], 0);
                for j in 1..=s.modes {
                    load[j - 1] += w * fx * s.basis(j, x).0;
                }
            }
        }
        SpaceRepr::Fem(fem) => {
            let nc = fem.components;
            for (e, cell) in fem.cells.iter().enumerate() {
                let quad = fem.element_quad(e, 2 * fem.degree + 2);
                for q in 0..quad.weights.len() {
                    let w = quad.weights[q];
                    let fx: Vec<f64> = (0..nc).map(|c| f.value(quad.points[q], c)).collect();
                    for (i, &ni) in cell.iter().enumerate() {
                        let Some(di) = fem.node_dof[ni] else { continue };
                        for (c, fc) in fx.iter().enumerate() {
                            load[di + c] += w * fc * quad.values[q][i];
                        }
                    }
                }
            }
            if let Some(g) = g {
                for_each_neumann_point(fem, |nodes, values, x, w| {
                    for (&n, v) in nodes.iter().zip(values) {
                        if let Some(d) = fem.node_dof[n] {
                            for c in 0..nc {
                                load[d + c] += w * g.value(x, c) * v;
                            }
                        }
                    }
                });
            }
        }
    }
    Ok(load)
}

/// Visits quadrature points on the Neumann boundary with the boundary nodes
/// touching each point, their trace basis values, and weights.
pub(crate) fn for_each_neumann_point(
    fem: &FemData,
    mut visit: impl FnMut(&[usize], &[f64], crate::mesh::Point, f64),
) {
    match &fem.mesh {
        Mesh::Line(m) => {
            let (left, right) = m.markers();
            let (a, b) = m.bounds();
            if left == BoundaryMarker::Neumann {
                visit(&[0], &[1.0], [a, 0.0], 1.0);
            }
            if right == BoundaryMarker::Neumann {
                visit(&[m.vertices().len() - 1], &[1.0], [b, 0.0], 1.0);
            }
        }
        Mesh::Triangles(m) => {
            let rule = GaussRule::for_degree(2 * fem.degree + 2);
            for edge in m.boundary().iter().filter(|e| e.marker == BoundaryMarker::Neumann) {
                let [a, b] = edge.nodes;
                let mut nodes = vec![a, b];
                if let Some(&mid) = fem.edge_nodes.get(&(a.min(b), a.max(b))) {
                    nodes.push(mid);
                }
                let (p, q) = (fem.nodes[a], fem.nodes[b]);
                let len = crate::mesh::dist(p, q);
                for (s, w) in rule.on_interval(0.0, 1.0) {
                    let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                    visit(&nodes, &edge_shape(fem.degree, s), x, w * len);
                }
            }
        }
    }
}

/// `∫_{∂Ω_N} φ_k²` per dof (summed over components of one node).
pub(crate) fn neumann_trace_squares(space: &GalerkinSpace) -> Vec<f64> {
    let mut out = vec![0.0; space.dim()];
    if let SpaceRepr::Fem(fem) = &space.repr {
        for_each_neumann_point(fem, |nodes, values, _x, w| {
            for (&n, v) in nodes.iter().zip(values) {
                if let Some(d) = fem.node_dof[n] {
                    for c in 0..fem.components {
                        out[d + c] += w * v * v;
                    }
                }
            }
        });
    }
    out
}

/// `‖g‖_{L2(∂Ω_N)}`; zero for spaces without a Neumann part.
pub(crate) fn neumann_norm(space: &GalerkinSpace, g: &dyn Field) -> f64 {
    let mut acc = 0.0;
    if let SpaceRepr::Fem(fem) = &space.repr {
        for_each_neumann_point(fem, |_nodes, _values, x, w| {
            for c in 0..fem.components {
                acc += w * g.value(x, c).powi(2);
            }
        });
    }
    acc.sqrt()
}
