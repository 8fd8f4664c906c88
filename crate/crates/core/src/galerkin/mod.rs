//! Finite element and spectral Galerkin spaces.
//!
//! A [`GalerkinSpace`] owns its mesh (or interval), the degree-of-freedom map
//! with Dirichlet nodes eliminated, and knows how to evaluate its basis at
//! quadrature points. Assembly, load vectors, projections and error norms
//! live in the submodules and are re-exported here.

mod assembly;
mod element;
mod projection;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::mesh::{BoundaryMarker, Mesh, MeshError, Point};

pub(crate) use assembly::{neumann_norm, neumann_trace_squares};
pub use assembly::{assemble, assemble_load, AssembledPair, PairDiagnostics};
pub use projection::{energy_error, fourier_project, interpolate, l2_error, l2_project, ritz_project};

pub(crate) use element::ElementQuad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("unsupported space: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Neumann datum supplied but the mesh has no Neumann boundary")]
    NoNeumannBoundary,
    #[error("linear solve failed: {0}")]
    Solver(#[from] LinalgError),
}

/// What kind of space to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// Continuous piecewise polynomials of the given degree (1 or 2) with
    /// `components` unknowns per node.
    Fem { degree: usize, components: usize },
    /// First `modes` Dirichlet eigenfunctions of `-d²/dx²` on an interval.
    Spectral { modes: usize },
}

impl SpaceKind {
    pub fn p1() -> Self {
        SpaceKind::Fem { degree: 1, components: 1 }
    }

    pub fn p2() -> Self {
        SpaceKind::Fem { degree: 2, components: 1 }
    }
}

/// Where a space lives.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceDomain {
    Mesh(Mesh),
    /// Interval with homogeneous Dirichlet ends (spectral spaces only).
    Interval { a: f64, b: f64 },
}

/// Elliptic operator `A` and its bilinear form `a(·,·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum EllipticForm {
    /// `a(u, v) = ∫ ∇u · ∇v`
    ScalarLaplace,
    /// `a(u, v) = ∫ 2μ ε(u):ε(v) + λ div u div v`
    Elasticity2D { lambda: f64, mu: f64 },
}

impl EllipticForm {
    pub fn elasticity(lambda: f64, mu: f64) -> Result<Self, SpaceError> {
        if !(mu >= 0.0 && lambda + mu > 0.0) {
            return Err(SpaceError::Unsupported(format!(
                "Lame constants need mu >= 0 and lambda + mu > 0, got lambda = {lambda}, mu = {mu}"
            )));
        }
        Ok(EllipticForm::Elasticity2D { lambda, mu })
    }

    /// Integrand of `a(u, v)` given per-component gradients.
    pub(crate) fn density(&self, gu: &[[f64; 2]], gv: &[[f64; 2]]) -> f64 {
        match *self {
            EllipticForm::ScalarLaplace => gu
                .iter()
                .zip(gv)
                .map(|(a, b)| a[0] * b[0] + a[1] * b[1])
                .sum(),
            EllipticForm::Elasticity2D { lambda, mu } => {
                let strain = |g: &[[f64; 2]]| {
                    [[g[0][0], 0.5 * (g[0][1] + g[1][0])], [0.5 * (g[0][1] + g[1][0]), g[1][1]]]
                };
                let (eu, ev) = (strain(gu), strain(gv));
                let contraction: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| eu[i][j] * ev[i][j]).sum();
                2.0 * mu * contraction + lambda * (gu[0][0] + gu[1][1]) * (gv[0][0] + gv[1][1])
            }
        }
    }
}

/// A spatial function, possibly vector valued, with an optional analytic
/// gradient. Scalar closures broadcast their value to every component.
pub trait Field {
    fn value(&self, x: Point, component: usize) -> f64;

    /// Central differences unless overridden.
    fn gradient(&self, x: Point, component: usize) -> [f64; 2] {
        let step = 1e-6;
        let mut g = [0.0; 2];
        for (d, gd) in g.iter_mut().enumerate() {
            let hd = step * x[d].abs().max(1.0);
            let (mut xp, mut xm) = (x, x);
            xp[d] += hd;
            xm[d] -= hd;
            *gd = (self.value(xp, component) - self.value(xm, component)) / (2.0 * hd);
        }
        g
    }
}

impl<F: Fn(Point) -> f64> Field for F {
    fn value(&self, x: Point, _component: usize) -> f64 {
        self(x)
    }
}

/// Scalar field with an analytic gradient.
pub struct WithGradient<V, G> {
    pub value: V,
    pub gradient: G,
}

impl<V: Fn(Point) -> f64, G: Fn(Point) -> [f64; 2]> Field for WithGradient<V, G> {
    fn value(&self, x: Point, _component: usize) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: Point, _component: usize) -> [f64; 2] {
        (self.gradient)(x)
    }
}

/// Two-component field from a closure returning both components.
pub struct VectorField<F>(pub F);

impl<F: Fn(Point) -> [f64; 2]> Field for VectorField<F> {
    fn value(&self, x: Point, component: usize) -> f64 {
        (self.0)(x)[component]
    }
}

/// Field that is identically zero.
pub struct ZeroField;

impl Field for ZeroField {
    fn value(&self, _x: Point, _component: usize) -> f64 {
        0.0
    }
    fn gradient(&self, _x: Point, _component: usize) -> [f64; 2] {
        [0.0; 2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FemData {
    pub mesh: Mesh,
    pub degree: usize,
    pub components: usize,
    /// All Lagrange nodes: vertices first, then higher-order nodes.
    pub nodes: Vec<Point>,
    /// Local node lists per element.
    pub cells: Vec<Vec<usize>>,
    /// First free dof of each node, `None` on the Dirichlet boundary.
    pub node_dof: Vec<Option<usize>>,
    /// Midpoint node of each edge (2D P2 only).
    pub edge_nodes: BTreeMap<(usize, usize), usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SpectralData {
    pub a: f64,
    pub b: f64,
    pub modes: usize,
}

impl SpectralData {
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// `λ_j = (jπ/L)²`, j = 1..=modes.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        (j as f64 * PI / self.length()).powi(2)
    }

    /// `φ_j(x) = √(2/L) sin(jπ(x-a)/L)` and its derivative.
    pub fn basis(&self, j: usize, x: f64) -> (f64, f64) {
        let l = self.length();
        let k = j as f64 * PI / l;
        let amp = (2.0 / l).sqrt();
        let arg = k * (x - self.a);
        (amp * arg.sin(), amp * k * arg.cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SpaceRepr {
    Fem(FemData),
    Spectral(SpectralData),
}

/// `V_h = span{φ_1, …, φ_m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinSpace {
    kind: SpaceKind,
    dim: usize,
    pub(crate) repr: SpaceRepr,
}

/// Builds the space, enumerating free dofs by node index then component.
pub fn build_space(domain: SpaceDomain, kind: SpaceKind) -> Result<GalerkinSpace, SpaceError> {
    match (domain, kind) {
        (SpaceDomain::Mesh(mesh), SpaceKind::Fem { degree, components }) => {
            GalerkinSpace::fem(mesh, degree, components)
        }
        (SpaceDomain::Interval { a, b }, SpaceKind::Spectral { modes }) => GalerkinSpace::spectral(a, b, modes),
        (SpaceDomain::Interval { .. }, SpaceKind::Fem { .. }) => Err(SpaceError::Unsupported(
            "finite element spaces need a mesh".into(),
        )),
        (SpaceDomain::Mesh(_), SpaceKind::Spectral { .. }) => Err(SpaceError::Unsupported(
            "spectral spaces are built on an interval, not a mesh".into(),
        )),
    }
}

impl GalerkinSpace {
    pub fn fem(mesh: Mesh, degree: usize, components: usize) -> Result<Self, SpaceError> {
        if !(1..=2).contains(&degree) {
            return Err(SpaceError::Unsupported(format!("element degree {degree} (only 1 and 2)")));
        }
        if components == 0 || components > mesh.dim() {
            return Err(SpaceError::Unsupported(format!(
                "{components} components on a {}D mesh",
                mesh.dim()
            )));
        }
        let mut nodes: Vec<Point>;
        let mut cells: Vec<Vec<usize>>;
        let mut dirichlet: Vec<bool>;
        let mut edge_nodes = BTreeMap::new();
        match &mesh {
            Mesh::Line(m) => {
                let xs = m.vertices();
                nodes = xs.iter().map(|&x| [x, 0.0]).collect();
                cells = (0..m.n_elements()).map(|e| vec![e, e + 1]).collect();
                if degree == 2 {
                    for (e, cell) in cells.iter_mut().enumerate() {
                        let (x0, x1) = m.element(e);
                        cell.push(nodes.len());
                        nodes.push([0.5 * (x0 + x1), 0.0]);
                    }
                }
                dirichlet = vec![false; nodes.len()];
                let (left, right) = m.markers();
                dirichlet[0] = left == BoundaryMarker::Dirichlet;
                dirichlet[xs.len() - 1] = right == BoundaryMarker::Dirichlet;
            }
            Mesh::Triangles(m) => {
                nodes = m.vertices().to_vec();
                cells = m.triangles().iter().map(|t| t.to_vec()).collect();
                if degree == 2 {
                    for (a, b) in m.edges() {
                        let (p, q) = (nodes[a], nodes[b]);
                        edge_nodes.insert((a, b), nodes.len());
                        nodes.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    }
                    for (cell, t) in cells.iter_mut().zip(m.triangles()) {
                        for k in 0..3 {
                            let (a, b) = (t[k], t[(k + 1) % 3]);
                            cell.push(edge_nodes[&(a.min(b), a.max(b))]);
                        }
                    }
                }
                dirichlet = vec![false; nodes.len()];
                for edge in m.boundary().iter().filter(|e| e.marker == BoundaryMarker::Dirichlet) {
                    let [a, b] = edge.nodes;
                    dirichlet[a] = true;
                    dirichlet[b] = true;
                    if let Some(&mid) = edge_nodes.get(&(a.min(b), a.max(b))) {
                        dirichlet[mid] = true;
                    }
                }
            }
        }
        let mut node_dof = vec![None; nodes.len()];
        let mut next = 0;
        for (n, slot) in node_dof.iter_mut().enumerate() {
            if !dirichlet[n] {
                *slot = Some(next);
                next += components;
            }
        }
        if next == 0 {
            return Err(SpaceError::Unsupported("space has no free degrees of freedom".into()));
        }
        Ok(Self {
            kind: SpaceKind::Fem { degree, components },
            dim: next,
            repr: SpaceRepr::Fem(FemData { mesh, degree, components, nodes, cells, node_dof, edge_nodes }),
        })
    }

    pub fn spectral(a: f64, b: f64, modes: usize) -> Result<Self, SpaceError> {
        if !(a < b) {
            return Err(SpaceError::Unsupported(format!("empty interval [{a}, {b}]")));
        }
        if modes == 0 {
            return Err(SpaceError::Unsupported("spectral space needs at least one mode".into()));
        }
        Ok(Self {
            kind: SpaceKind::Spectral { modes },
            dim: modes,
            repr: SpaceRepr::Spectral(SpectralData { a, b, modes }),
        })
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Number of basis functions `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        match &self.repr {
            SpaceRepr::Fem(f) => f.components,
            SpaceRepr::Spectral(_) => 1,
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.repr, SpaceRepr::Spectral(_))
    }

    /// Polynomial degree `l - 1` for FEM spaces.
    pub fn degree(&self) -> Option<usize> {
        match &self.repr {
            SpaceRepr::Fem(f) => Some(f.degree),
            SpaceRepr::Spectral(_) => None,
        }
    }

    pub fn mesh(&self) -> Option<&Mesh> {
        match &self.repr {
            SpaceRepr::Fem(f) => Some(&f.mesh),
            SpaceRepr::Spectral(_) => None,
        }
    }

    /// Mesh size `h`; for spectral spaces the half-wavelength `L/m` of the highest mode.
    pub fn h(&self) -> f64 {
        match &self.repr {
            SpaceRepr::Fem(f) => f.mesh.h(),
            SpaceRepr::Spectral(s) => s.length() / s.modes as f64,
        }
    }

    /// Whether the boundary carries any Neumann part.
    pub fn has_neumann_boundary(&self) -> bool {
        match &self.repr {
            SpaceRepr::Fem(f) => match &f.mesh {
                Mesh::Line(m) => {
                    let (l, r) = m.markers();
                    l == BoundaryMarker::Neumann || r == BoundaryMarker::Neumann
                }
                Mesh::Triangles(m) => m.boundary().iter().any(|e| e.marker == BoundaryMarker::Neumann),
            },
            SpaceRepr::Spectral(_) => false,
        }
    }

    /// Dof index of basis function tied to `(node, component)`, if free.
    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        match &self.repr {
            SpaceRepr::Fem(f) => f.node_dof[node].map(|d| d + component),
            SpaceRepr::Spectral(_) => Some(node),
        }
    }

    /// Spectral eigenvalues `λ_1..λ_m`, if this is a spectral space.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        match &self.repr {
            SpaceRepr::Spectral(s) => Some((1..=s.modes).map(|j| s.eigenvalue(j)).collect()),
            SpaceRepr::Fem(_) => None,
        }
    }

    /// Evaluates `Σ c_k φ_k` at `x` (component 0 for scalar spaces).
    pub fn evaluate(&self, coeffs: &nalgebra::DVector<f64>, x: Point, component: usize) -> Option<f64> {
        match &self.repr {
            SpaceRepr::Spectral(s) => {
                if x[0] < s.a || x[0] > s.b {
                    return None;
                }
                Some((1..=s.modes).map(|j| coeffs[j - 1] * s.basis(j, x[0]).0).sum())
            }
            SpaceRepr::Fem(f) => {
                let (e, local) = f.locate(x)?;
                let (values, _) = element::shape_at(f, e, local);
                Some(
                    f.cells[e]
                        .iter()
                        .zip(values)
                        .filter_map(|(&n, v)| f.node_dof[n].map(|d| coeffs[d + component] * v))
                        .sum(),
                )
            }
        }
    }
}
