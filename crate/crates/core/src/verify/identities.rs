//! Derivative functional, resolvent, local Dirichlet integral, embedding norm
//! and spectrum-map suites.

use std::f64::consts::{PI, TAU};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{operator_norm, NORM_TOL};
use super::{rel_gap, Margins, Suite, SuiteReport, VerifyOptions};
use crate::clark::Window;
use crate::error::{MslabError, Result};
use crate::inner::{BoundaryPoint, InnerFunction};
use crate::modelspace::{boundary_kernel, clark_onb, norm_sq, pairwise_sum, tm_basis, CircleQuadrature, Holomorphic, OrthonormalBasis};
use crate::qop::{apply_difference_quotient, clark_setup, q_matrix_clark, resolvent_matrix};
use crate::rng::Lcg64;
use crate::spectral::{largest_singular_value, verify_spectrum_map};

const DERIVATIVE_TOL: f64 = 1e-8;
const RESOLVENT_TOL: f64 = 1e-9;
const CIRCLE_TOL: f64 = 1e-10;
const AREA_TOL: f64 = 1e-3;
const SPECTRUM_WINDOWS: [usize; 5] = [8, 16, 32, 64, 128];

fn require_blaschke(u: &InnerFunction, what: &str) -> Result<()> {
    if u.is_finite_blaschke() {
        Ok(())
    } else {
        Err(MslabError::Argument(format!("{what} needs a finite Blaschke product")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeFunctional {
    /// `(Σ |b_i′(ζ)|²)^{1/2}`.
    pub route_a: f64,
    /// `‖Q_ζ k_ζ‖`.
    pub route_b: f64,
    pub rel_gap: f64,
    pub basis: String,
    pub window: Option<usize>,
}

/// Route a from the basis derivatives; route b by quadrature of the
/// difference quotient of `k_ζ`.
pub fn derivative_functional(
    u: &InnerFunction,
    zeta: &BoundaryPoint,
    basis: &OrthonormalBasis,
    q: &CircleQuadrature,
) -> Result<DerivativeFunctional> {
    let z0 = zeta.point();
    let route_a = basis.derivatives(z0).iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
    let k = boundary_kernel(u, zeta)?;
    let route_b = norm_sq(&apply_difference_quotient(&k, zeta), q).sqrt();
    Ok(DerivativeFunctional {
        route_a,
        route_b,
        rel_gap: rel_gap(route_a, route_b),
        basis: basis.tag().to_string(),
        window: None,
    })
}

/// Finite Blaschke: Takenaka–Malmquist derivatives against quadrature.
/// Singular family: both routes over the truncated Clark basis (route b as
/// `‖k_ζ‖·‖Q_K e_ℓ‖`), reported per window without a threshold.
pub fn run_derivative_functional(u: &InnerFunction, zeta: &BoundaryPoint, opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut m = Margins::new();
    let rows = if u.is_finite_blaschke() {
        let q = CircleQuadrature::for_model_space(opts.quad_nodes, u, zeta)?;
        let row = derivative_functional(u, zeta, &tm_basis(u)?, &q)?;
        m.within("rel_gap", row.rel_gap, DERIVATIVE_TOL);
        vec![row]
    } else {
        let norm_zeta = u.boundary_derivatives(zeta)?.abs_first.sqrt();
        opts.schedule
            .par_iter()
            .map(|&k| {
                let (mu, q) = q_matrix_clark(u, zeta, Window::Symmetric(k))?;
                let basis = clark_onb(u, &mu)?;
                let ell = q.ell.expect("Clark matrices record ℓ");
                let mut e = vec![Complex64::new(0.0, 0.0); q.dim()];
                e[ell] = Complex64::new(1.0, 0.0);
                let col = q.apply(&e).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                let route_a = basis.derivatives(zeta.point()).iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
                let route_b = norm_zeta * col;
                Ok(DerivativeFunctional {
                    route_a,
                    route_b,
                    rel_gap: rel_gap(route_a, route_b),
                    basis: basis.tag().to_string(),
                    window: Some(k),
                })
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SuiteReport::new(Suite::DerivativeFunctional, u, Some(zeta))
        .param("quad_nodes", opts.quad_nodes)
        .rows(&rows)
        .margins(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ResolventRow {
    index: usize,
    r_norm_sq: f64,
    q_norm_sq: f64,
    f_zeta_sq: f64,
    rel_gap: f64,
}

/// `½(‖Q‖² + |u′|) ≤ ‖R‖² ≤ ‖Q‖² + |u′|` and `‖Rf‖² = ‖Qf‖² + |f(ζ)|²` for
/// seeded unit vectors in the Clark basis.
pub fn run_resolvent_suite(u: &InnerFunction, zeta: &BoundaryPoint, seed: u64, vectors: usize) -> Result<SuiteReport> {
    require_blaschke(u, "the resolvent suite")?;
    let (basis, q) = clark_setup(u, zeta, Window::Full)?;
    let r = resolvent_matrix(&q, zeta);
    let abs_up = u.boundary_derivatives(zeta)?.abs_first;
    let norm_q = largest_singular_value(&q, NORM_TOL)?;
    let norm_r = largest_singular_value(&r, NORM_TOL)?;
    let (nq2, nr2) = (norm_q * norm_q, norm_r * norm_r);
    let at_zeta = basis.values(zeta.point());

    let mut rng = Lcg64::new(seed);
    let rows: Vec<ResolventRow> = (0..vectors)
        .map(|index| {
            let f = rng.unit_vector(q.dim());
            let sq = |v: Vec<Complex64>| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
            let r_norm_sq = sq(r.apply(&f));
            let q_norm_sq = sq(q.apply(&f));
            let f_zeta: Complex64 = f.iter().zip(&at_zeta).map(|(c, b)| c * b).sum();
            let f_zeta_sq = f_zeta.norm_sqr();
            ResolventRow {
                index,
                r_norm_sq,
                q_norm_sq,
                f_zeta_sq,
                rel_gap: rel_gap(r_norm_sq, q_norm_sq + f_zeta_sq),
            }
        })
        .collect();

    let mut m = Margins::new();
    m.inequality("sandwich_lower", nr2, 0.5 * (nq2 + abs_up));
    m.inequality("sandwich_upper", nq2 + abs_up, nr2);
    let worst = rows.iter().map(|x| x.rel_gap).fold(0.0, f64::max);
    m.within("per_vector", worst, RESOLVENT_TOL);
    let mut report = SuiteReport::new(Suite::Resolvent, u, Some(zeta))
        .param("norm_q", norm_q)
        .param("norm_r_sq", nr2)
        .param("abs_u_prime", abs_up)
        .param("vectors", vectors)
        .rows(&rows)
        .margins(m);
    report.seed = Some(seed);
    Ok(report)
}

/// Tensor grid: Gauss–Legendre in `r ∈ [0,1)` times uniform angles offset by
/// half a spacing from `ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiskGrid {
    pub radial: usize,
    pub angular: usize,
}

/// `(1/π) ∬ |f′(z)|² (1 − |z|²)/|z − ζ|² dA(z)`.
pub fn area_dirichlet<F: Holomorphic + Sync + ?Sized>(f: &F, zeta: &BoundaryPoint, grid: DiskGrid) -> Result<f64> {
    let radial = NonZeroUsize::new(grid.radial)
        .filter(|_| grid.angular > 0)
        .ok_or_else(|| MslabError::Quadrature("disk grid needs nodes in both directions".into()))?;
    let gl = GaussLegendre::new(radial);
    let radii: Vec<(f64, f64)> = gl.iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let z0 = zeta.point();
    let h = TAU / grid.angular as f64;
    let per_angle: Vec<Complex64> = (0..grid.angular)
        .into_par_iter()
        .map(|m| {
            let t = zeta.theta() + (m as f64 + 0.5) * h;
            let terms: Vec<Complex64> = radii
                .iter()
                .map(|&(r, w)| {
                    let z = Complex64::from_polar(r, t);
                    let weight = (1.0 - r * r) / (z - z0).norm_sqr();
                    Complex64::new(f.derivative(z).norm_sqr() * weight * r * w, 0.0)
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&per_angle).re * h / PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirichletReport {
    pub circle_value: f64,
    pub norm_qf_sq: f64,
    pub circle_gap: f64,
    pub area_value: f64,
    pub area_value_refined: f64,
    pub area_gap: f64,
    pub area_gap_refined: f64,
    pub refinement_ratio: f64,
    pub area_converged: bool,
    pub embedding_norm_sq: f64,
    pub quad_nodes: usize,
    pub disk: DiskGrid,
    pub disk_refined: DiskGrid,
}

/// `𝒟_ζ(f)` three ways for `f = Σ γ_i k̃_i` in the Clark basis at `ζ`;
/// `coeffs = None` takes `f = k_ζ`.
pub fn run_dirichlet_suite(
    u: &InnerFunction,
    zeta: &BoundaryPoint,
    coeffs: Option<&[Complex64]>,
    opts: &VerifyOptions,
) -> Result<(DirichletReport, SuiteReport)> {
    require_blaschke(u, "the Dirichlet suite")?;
    let (basis, q) = clark_setup(u, zeta, Window::Full)?;
    let ell = q.ell.expect("Clark matrices record ℓ");
    let gamma: Vec<Complex64> = match coeffs {
        Some(c) if c.len() == basis.len() => c.to_vec(),
        Some(c) => {
            return Err(MslabError::Argument(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                c.len()
            )))
        }
        None => {
            let mut g = vec![Complex64::new(0.0, 0.0); basis.len()];
            g[ell] = Complex64::new(basis.kernel_norm(ell).unwrap_or(0.0), 0.0);
            g
        }
    };
    let f = basis.combine(&gamma);
    let quad = CircleQuadrature::for_model_space(opts.quad_nodes, u, zeta)?;
    let circle_value = norm_sq(&apply_difference_quotient(&f, zeta), &quad);
    let norm_qf_sq = q.apply(&gamma).iter().map(|c| c.norm_sqr()).sum::<f64>();
    let circle_gap = rel_gap(circle_value, norm_qf_sq);
    let area_value = area_dirichlet(&f, zeta, opts.disk)?;
    let area_value_refined = area_dirichlet(&f, zeta, opts.disk_refined)?;
    let area_gap = rel_gap(area_value, circle_value);
    let area_gap_refined = rel_gap(area_value_refined, circle_value);
    let refinement_ratio = if area_gap_refined > 0.0 { area_gap / area_gap_refined } else { f64::INFINITY };
    let norm_q = largest_singular_value(&q, NORM_TOL)?;
    let report = DirichletReport {
        circle_value,
        norm_qf_sq,
        circle_gap,
        area_value,
        area_value_refined,
        area_gap,
        area_gap_refined,
        refinement_ratio,
        area_converged: area_gap <= AREA_TOL && (area_gap == 0.0 || refinement_ratio >= 2.0),
        embedding_norm_sq: 1.0 + norm_q * norm_q,
        quad_nodes: opts.quad_nodes,
        disk: opts.disk,
        disk_refined: opts.disk_refined,
    };
    let mut m = Margins::new();
    m.within("circle_vs_qf", circle_gap, CIRCLE_TOL);
    let suite = SuiteReport::new(Suite::Dirichlet, u, Some(zeta))
        .param("coefficients", gamma.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
        .param("area_converged", report.area_converged)
        .rows(std::slice::from_ref(&report))
        .margins(m);
    Ok((report, suite))
}

/// `‖ι‖² = 1 + ‖Q‖²`.
pub fn run_embedding_norm(u: &InnerFunction, zeta: &BoundaryPoint, schedule: &[usize]) -> Result<(f64, SuiteReport)> {
    let norm = operator_norm(u, zeta, schedule)?;
    let value = 1.0 + norm.value * norm.value;
    let mut m = Margins::new();
    m.inequality("at_least_one", value, 1.0);
    let report = SuiteReport::new(Suite::Embedding, u, Some(zeta))
        .param("embedding_norm_sq", value)
        .rows(&[norm])
        .margins(m);
    Ok((value, report))
}

/// Predicted spectrum against the lemma-analytic matrix; for the singular
/// family, residual decay at the essential point across nested windows.
pub fn run_spectrum_suite(u: &InnerFunction, zeta: &BoundaryPoint) -> Result<SuiteReport> {
    let (window, windows): (Window, &[usize]) = if u.is_finite_blaschke() {
        (Window::Full, &[])
    } else {
        (Window::Symmetric(SPECTRUM_WINDOWS[0]), &SPECTRUM_WINDOWS)
    };
    let (_, q) = q_matrix_clark(u, zeta, window)?;
    let r = verify_spectrum_map(u, zeta, &q, windows)?;
    let mut m = Margins::new();
    if u.is_finite_blaschke() {
        let worst = r.residuals.iter().copied().fold(0.0, f64::max);
        m.within("residual", worst, r.tolerance);
        m.flag("multiplicity", r.multiplicity == r.dim);
        let scale = 1.0 + r.predicted_points().iter().map(|l| l.norm()).sum::<f64>();
        m.within("trace", r.trace_gap.unwrap_or(f64::INFINITY), 1e-8 * scale);
        m.within(
            "determinant",
            r.det_gap.unwrap_or(f64::INFINITY),
            1e-8 * (1.0 + r.sigma_max).powi(r.dim as i32),
        );
    }
    Ok(SuiteReport::new(Suite::Spectrum, u, Some(zeta))
        .param("window", windows.first())
        .rows(&[r])
        .margins(m))
}
