//! L2, Ritz and truncated Fourier projections, nodal interpolation, and
//! error norms against analytic fields.

use nalgebra::DVector;

use crate::linalg::SpdSolver;

use super::assembly::{assemble, check_form, mass_matrix, spectral_quadrature};
use super::{EllipticForm, FemData, Field, GalerkinSpace, SpaceError, SpaceRepr};

/// `(P_h v, χ) = (v, χ)` for all `χ ∈ V_h`.
pub fn l2_project(space: &GalerkinSpace, v: &dyn Field) -> Result<DVector<f64>, SpaceError> {
    let rhs = super::assemble_load(space, v, None)?;
    match &space.repr {
        SpaceRepr::Spectral(_) => Ok(rhs),
        SpaceRepr::Fem(_) => Ok(SpdSolver::new(&mass_matrix(space))?.solve(&rhs)?),
    }
}

/// `a(R_h v, χ) = a(v, χ)` for all `χ ∈ V_h`, using `v`'s gradient.
pub fn ritz_project(space: &GalerkinSpace, v: &dyn Field, form: &EllipticForm) -> Result<DVector<f64>, SpaceError> {
    check_form(space, form)?;
    let rhs = energy_load(space, v, form);
    match &space.repr {
        SpaceRepr::Spectral(s) => Ok(DVector::from_iterator(
            s.modes,
            rhs.iter().enumerate().map(|(j, b)| b / s.eigenvalue(j + 1)),
        )),
        SpaceRepr::Fem(_) => {
            let pair = assemble(space, form)?;
            Ok(SpdSolver::new(&pair.stiffness)?.solve(&rhs)?)
        }
    }
}

/// `b_k = a(v, φ_k)`.
fn energy_load(space: &GalerkinSpace, v: &dyn Field, form: &EllipticForm) -> DVector<f64> {
    let mut rhs = DVector::zeros(space.dim());
    match &space.repr {
        SpaceRepr::Spectral(s) => {
            for (x, w) in spectral_quadrature(s) {
                let dv = v.gradient([x, 0.0], 0)[0];
                for j in 1..=s.modes {
                    rhs[j - 1] += w * dv * s.basis(j, x).1;
                }
            }
        }
        SpaceRepr::Fem(f) => {
            let nc = f.components;
            for (e, cell) in f.cells.iter().enumerate() {
                let quad = f.element_quad(e, 2 * f.degree + 2);
                for q in 0..quad.weights.len() {
                    let gu: Vec<[f64; 2]> = (0..nc).map(|c| v.gradient(quad.points[q], c)).collect();
                    for (i, &ni) in cell.iter().enumerate() {
                        let Some(di) = f.node_dof[ni] else { continue };
                        for a in 0..nc {
                            let mut gv = [[0.0; 2]; 2];
                            gv[a] = quad.grads[q][i];
                            rhs[di + a] += quad.weights[q] * form.density(&gu, &gv[..nc]);
                        }
                    }
                }
            }
        }
    }
    rhs
}

/// `P_F v = Σ (v, φ_j) φ_j`; spectral spaces only.
pub fn fourier_project(space: &GalerkinSpace, v: &dyn Field) -> Result<DVector<f64>, SpaceError> {
    match &space.repr {
        SpaceRepr::Spectral(_) => super::assemble_load(space, v, None),
        SpaceRepr::Fem(_) => Err(SpaceError::Unsupported("Fourier projection needs a spectral space".into())),
    }
}

/// Nodal interpolant on FEM spaces; the Fourier projection on spectral ones.
pub fn interpolate(space: &GalerkinSpace, v: &dyn Field) -> Result<DVector<f64>, SpaceError> {
    match &space.repr {
        SpaceRepr::Spectral(_) => fourier_project(space, v),
        SpaceRepr::Fem(f) => {
            let mut c = DVector::zeros(space.dim());
            for (n, &x) in f.nodes.iter().enumerate() {
                if let Some(d) = f.node_dof[n] {
                    for comp in 0..f.components {
                        c[d + comp] = v.value(x, comp);
                    }
                }
            }
            Ok(c)
        }
    }
}

fn check_len(space: &GalerkinSpace, coeffs: &DVector<f64>) -> Result<(), SpaceError> {
    if coeffs.len() != space.dim() {
        return Err(SpaceError::DimensionMismatch(format!(
            "coefficient vector has length {} but the space has dimension {}",
            coeffs.len(),
            space.dim()
        )));
    }
    Ok(())
}

/// Values and gradients of `Σ c_k φ_k` at the quadrature points of element `e`.
fn fem_discrete_at(
    f: &FemData,
    e: usize,
    quad: &super::ElementQuad,
    coeffs: &DVector<f64>,
) -> Vec<(Vec<f64>, Vec<[f64; 2]>)> {
    let cell = &f.cells[e];
    (0..quad.weights.len())
        .map(|q| {
            let mut val = vec![0.0; f.components];
            let mut grad = vec![[0.0; 2]; f.components];
            for (i, &ni) in cell.iter().enumerate() {
                let Some(d) = f.node_dof[ni] else { continue };
                for c in 0..f.components {
                    let ck = coeffs[d + c];
                    val[c] += ck * quad.values[q][i];
                    grad[c][0] += ck * quad.grads[q][i][0];
                    grad[c][1] += ck * quad.grads[q][i][1];
                }
            }
            (val, grad)
        })
        .collect()
}

/// `‖u_h - u‖` for `u_h = Σ c_k φ_k`.
pub fn l2_error(space: &GalerkinSpace, coeffs: &DVector<f64>, exact: &dyn Field) -> Result<f64, SpaceError> {
    check_len(space, coeffs)?;
    let mut acc = 0.0;
    match &space.repr {
        SpaceRepr::Spectral(s) => {
            for (x, w) in spectral_quadrature(s) {
                let uh: f64 = (1..=s.modes).map(|j| coeffs[j - 1] * s.basis(j, x).0).sum();
                acc += w * (uh - exact.value([x, 0.0], 0)).powi(2);
            }
        }
        SpaceRepr::Fem(f) => {
            for e in 0..f.cells.len() {
                let quad = f.element_quad(e, 2 * f.degree + 4);
                for (q, (val, _)) in fem_discrete_at(f, e, &quad, coeffs).into_iter().enumerate() {
                    for (c, vc) in val.iter().enumerate() {
                        acc += quad.weights[q] * (vc - exact.value(quad.points[q], c)).powi(2);
                    }
                }
            }
        }
    }
    Ok(acc.max(0.0).sqrt())
}

/// `‖u_h - u‖_V = a(e, e)^(1/2)`.
pub fn energy_error(
    space: &GalerkinSpace,
    coeffs: &DVector<f64>,
    exact: &dyn Field,
    form: &EllipticForm,
) -> Result<f64, SpaceError> {
    check_len(space, coeffs)?;
    check_form(space, form)?;
    let mut acc = 0.0;
    match &space.repr {
        SpaceRepr::Spectral(s) => {
            for (x, w) in spectral_quadrature(s) {
                let duh: f64 = (1..=s.modes).map(|j| coeffs[j - 1] * s.basis(j, x).1).sum();
                let g = [[duh - exact.gradient([x, 0.0], 0)[0], 0.0]];
                acc += w * form.density(&g, &g);
            }
        }
        SpaceRepr::Fem(f) => {
            for e in 0..f.cells.len() {
                let quad = f.element_quad(e, 2 * f.degree + 4);
                for (q, (_, grad)) in fem_discrete_at(f, e, &quad, coeffs).into_iter().enumerate() {
                    let err: Vec<[f64; 2]> = grad
                        .iter()
                        .enumerate()
                        .map(|(c, g)| {
                            let ge = exact.gradient(quad.points[q], c);
                            [g[0] - ge[0], g[1] - ge[1]]
                        })
                        .collect();
                    acc += quad.weights[q] * form.density(&err, &err);
                }
            }
        }
    }
    Ok(acc.max(0.0).sqrt())
}
