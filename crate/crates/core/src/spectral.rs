//! Singular values and the Möbius spectrum map `η ↦ conj(η)/(1 − ζ conj(η))`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::clark::Window;
use crate::error::{MslabError, Result};
use crate::inner::{BoundaryPoint, InnerFunction};
use crate::qop::{q_matrix_clark, OperatorMatrix};
use crate::rng::Lcg64;

/// Dense SVD is used up to this dimension; beyond it, power iteration.
pub const DENSE_SVD_LIMIT: usize = 512;
pub const MIN_TOL: f64 = 1e-13;
const POWER_MAX_ITER: usize = 200_000;
const POWER_SEED: u64 = 0x5eed;

fn check_tol(tol: f64) -> Result<()> {
    if !(tol >= MIN_TOL) {
        return Err(MslabError::Argument(format!("tolerance {tol:e} below {MIN_TOL:e}")));
    }
    Ok(())
}

fn dense_singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MslabError::Domain("matrix has non-finite entries".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let svd = m.clone().try_svd(false, false, f64::EPSILON, 10_000).ok_or(MslabError::NoConvergence {
        iterations: 10_000,
        estimate: f64::NAN,
        residual: f64::NAN,
    })?;
    Ok(svd.singular_values.iter().copied().collect())
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Power iteration on `AᴴA`. Stops once `‖AᴴAx − λx‖ ≤ √tol·λ/10`; for a
/// Hermitian matrix the Rayleigh quotient error is quadratic in that residual.
fn power_sigma_max(a: &OperatorMatrix, tol: f64) -> Result<f64> {
    let n = a.dim();
    let mut x = Lcg64::new(POWER_SEED).unit_vector(n);
    let target = 0.1 * tol.sqrt();
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        let y = a.apply(&x);
        let z = a.apply_adjoint(&y);
        lambda = y.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if lambda == 0.0 {
            return Ok(0.0);
        }
        residual = z.iter().zip(&x).map(|(zi, xi)| (zi - xi * lambda).norm_sqr()).sum::<f64>().sqrt();
        let nz = norm2(&z);
        x = z.into_iter().map(|c| c / nz).collect();
        if residual <= target * lambda {
            // one more Rayleigh quotient at the improved iterate
            let y = a.apply(&x);
            return Ok(y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    Err(MslabError::NoConvergence {
        iterations: POWER_MAX_ITER,
        estimate: lambda.sqrt(),
        residual,
    })
}

/// `σ_max(A)` to relative accuracy `tol`.
pub fn largest_singular_value(a: &OperatorMatrix, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if a.dim() == 0 {
        return Ok(0.0);
    }
    if a.dim() <= DENSE_SVD_LIMIT {
        let s = dense_singular_values(&a.to_dense())?;
        return Ok(s.into_iter().fold(0.0, f64::max));
    }
    power_sigma_max(a, tol)
}

/// `σ_min(A)` by dense SVD.
pub fn smallest_singular_value(a: &OperatorMatrix, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    smallest_singular_value_dense(&a.to_dense())
}

fn smallest_singular_value_dense(m: &DMatrix<Complex64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(dense_singular_values(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// `λ = conj(η)/(1 − ζ conj(η))`.
pub fn spectrum_map(eta: Complex64, zeta: &BoundaryPoint) -> Complex64 {
    eta.conj() / (1.0 - zeta.point() * eta.conj())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowResidual {
    pub window: usize,
    pub dim: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCheckReport {
    /// Predicted eigenvalues (finite Blaschke) with multiplicity, or the
    /// essential point (singular family).
    pub predicted: Vec<[f64; 2]>,
    /// `σ_min(λ_k I − Q)` per predicted point.
    pub residuals: Vec<f64>,
    pub trace_gap: Option<f64>,
    pub det_gap: Option<f64>,
    pub multiplicity: usize,
    pub dim: usize,
    pub sigma_max: f64,
    pub tolerance: f64,
    /// Residual decay across nested windows (singular family only).
    pub window_residuals: Vec<WindowResidual>,
    pub pass: bool,
}

impl SpectrumCheckReport {
    pub fn predicted_points(&self) -> Vec<Complex64> {
        self.predicted.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }
}

fn residual_at(q: &DMatrix<Complex64>, lambda: Complex64) -> Result<f64> {
    let n = q.nrows();
    let shifted = DMatrix::<Complex64>::identity(n, n) * lambda - q;
    smallest_singular_value_dense(&shifted)
}

/// Membership test of the predicted spectrum against `Q`.
///
/// Finite Blaschke: every `λ_k` must have `σ_min(λ_k I − Q) ≤ 10⁻⁸(1+‖Q‖)`
/// and trace/determinant must match the predicted multiset. Singular family:
/// the essential point is reported for `Q` and, when `windows` is non-empty,
/// for each truncation in it; no threshold is applied.
pub fn verify_spectrum_map(
    u: &InnerFunction,
    zeta: &BoundaryPoint,
    q: &OperatorMatrix,
    windows: &[usize],
) -> Result<SpectrumCheckReport> {
    let dense = q.to_dense();
    let n = dense.nrows();
    let sigma_max = largest_singular_value(q, 1e-12)?;
    let tolerance = 1e-8 * (1.0 + sigma_max);
    match u {
        InnerFunction::FiniteBlaschke { zeros, .. } => {
            let predicted: Vec<Complex64> = zeros.iter().map(|a| spectrum_map(*a, zeta)).collect();
            let residuals = predicted
                .par_iter()
                .map(|l| residual_at(&dense, *l))
                .collect::<Result<Vec<_>>>()?;
            let sum: Complex64 = predicted.iter().sum();
            let prod: Complex64 = predicted.iter().product();
            let trace_gap = (q.trace() - sum).norm();
            let det = if n == 0 { Complex64::new(1.0, 0.0) } else { dense.clone().lu().determinant() };
            let det_gap = (det - prod).norm();
            let trace_scale = 1.0 + predicted.iter().map(|l| l.norm()).sum::<f64>();
            let det_scale = (1.0 + sigma_max).powi(n as i32);
            let pass = predicted.len() == n
                && residuals.iter().all(|r| *r <= tolerance)
                && trace_gap <= 1e-8 * trace_scale
                && det_gap <= 1e-8 * det_scale;
            Ok(SpectrumCheckReport {
                predicted: predicted.iter().map(|l| [l.re, l.im]).collect(),
                residuals,
                trace_gap: Some(trace_gap),
                det_gap: Some(det_gap),
                multiplicity: predicted.len(),
                dim: n,
                sigma_max,
                tolerance,
                window_residuals: Vec::new(),
                pass,
            })
        }
        InnerFunction::SingularSingleAtom { xi_angle, .. } => {
            let eta = BoundaryPoint::new(*xi_angle).point();
            let lambda = spectrum_map(eta, zeta);
            let residual = residual_at(&dense, lambda)?;
            let window_residuals = windows
                .par_iter()
                .map(|&k| {
                    let (_, qk) = q_matrix_clark(u, zeta, Window::Symmetric(k))?;
                    Ok(WindowResidual {
                        window: k,
                        dim: qk.dim(),
                        residual: residual_at(&qk.to_dense(), lambda)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SpectrumCheckReport {
                predicted: vec![[lambda.re, lambda.im]],
                residuals: vec![residual],
                trace_gap: None,
                det_gap: None,
                multiplicity: 1,
                dim: n,
                sigma_max,
                tolerance,
                window_residuals,
                pass: true,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qop::{BasisTag, Provenance};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn op(rows: &[&[Complex64]]) -> OperatorMatrix {
        let m = DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]);
        OperatorMatrix::dense(m, BasisTag::Clark, Provenance::Derived)
    }

    const GOLDEN: f64 = 1.618_033_988_749_895;

    #[test]
    fn singular_value_examples() {
        let h = c(0.5, 0.0);
        let a = op(&[&[h, -h], &[h, -h]]);
        assert!((largest_singular_value(&a, 1e-13).unwrap() - 1.0).abs() < 1e-14);
        assert!(smallest_singular_value(&a, 1e-13).unwrap() < 1e-12);

        let id = OperatorMatrix::dense(DMatrix::identity(3, 3), BasisTag::Clark, Provenance::Derived);
        assert!((largest_singular_value(&id, 1e-13).unwrap() - 1.0).abs() < 1e-15);
        assert!((smallest_singular_value(&id, 1e-13).unwrap() - 1.0).abs() < 1e-15);

        let r = op(&[&[c(1.5, 0.0), c(-0.5, 0.0)], &[c(0.5, 0.0), c(0.5, 0.0)]]);
        assert!((largest_singular_value(&r, 1e-13).unwrap() - GOLDEN).abs() < 1e-14);

        let zero = op(&[&[c(0.0, 0.0)]]);
        assert_eq!(smallest_singular_value(&zero, 1e-13).unwrap(), 0.0);
        assert!(largest_singular_value(&zero, 1e-14).is_err());
    }

    #[test]
    fn power_iteration_matches_svd() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        for theta in [PI / 2.0, PI] {
            let zeta = BoundaryPoint::new(theta);
            let (_, q) = q_matrix_clark(&u, &zeta, Window::Symmetric(100)).unwrap();
            let svd = largest_singular_value(&q, 1e-13).unwrap();
            let power = power_sigma_max(&q, 1e-13).unwrap();
            assert!((svd - power).abs() < 1e-12 * svd, "{svd} {power}");
        }
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = Lcg64::new(8);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.next_complex());
        let a = OperatorMatrix::dense(m.clone(), BasisTag::Clark, Provenance::Derived);
        let s = largest_singular_value(&a, 1e-13).unwrap();
        for _ in 0..5 {
            let k = rng.next_complex() * 3.0;
            let b = OperatorMatrix::dense(m.map(|e| e * k), BasisTag::Clark, Provenance::Derived);
            assert!((largest_singular_value(&b, 1e-13).unwrap() - k.norm() * s).abs() < 1e-12 * k.norm() * s);
        }
    }

    #[test]
    fn principal_submatrix_monotone() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        let zeta = BoundaryPoint::new(2.0);
        let (_, q) = q_matrix_clark(&u, &zeta, Window::Symmetric(20)).unwrap();
        let full = largest_singular_value(&q, 1e-13).unwrap();
        for k in [1, 3, 10, 25, 40] {
            let idx: Vec<usize> = (0..k).collect();
            let sub = largest_singular_value(&q.principal_submatrix(&idx), 1e-13).unwrap();
            assert!(sub <= full + 1e-12);
        }
    }

    #[test]
    fn spectrum_map_examples() {
        let half = InnerFunction::blaschke_real(&[0.5]).unwrap();
        let zeta = BoundaryPoint::new(PI);
        let (_, q) = q_matrix_clark(&half, &zeta, Window::Full).unwrap();
        let r = verify_spectrum_map(&half, &zeta, &q, &[]).unwrap();
        assert!(r.pass);
        assert!((r.predicted_points()[0] - 1.0 / 3.0).norm() < 1e-15);
        assert!(r.residuals[0] < 1e-15);

        let z2 = InnerFunction::monomial(2).unwrap();
        let zeta = BoundaryPoint::new(0.0);
        let (_, q) = q_matrix_clark(&z2, &zeta, Window::Full).unwrap();
        let r = verify_spectrum_map(&z2, &zeta, &q, &[]).unwrap();
        assert!(r.pass);
        assert_eq!(r.multiplicity, 2);
        assert!(r.trace_gap.unwrap() < 1e-14 && r.det_gap.unwrap() < 1e-14);
    }

    #[test]
    fn spectrum_map_random_blaschke() {
        let mut rng = Lcg64::new(77);
        let zeros: Vec<Complex64> = (0..6).map(|_| rng.disk_point(0.9)).collect();
        let u = InnerFunction::blaschke(zeros, c(0.6, 0.8)).unwrap();
        for theta in [0.3, 2.0, 4.4] {
            let zeta = BoundaryPoint::new(theta);
            let (_, q) = q_matrix_clark(&u, &zeta, Window::Full).unwrap();
            let r = verify_spectrum_map(&u, &zeta, &q, &[]).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn singular_essential_point_residuals_decrease() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        let zeta = BoundaryPoint::new(PI);
        let (_, q) = q_matrix_clark(&u, &zeta, Window::Symmetric(8)).unwrap();
        let r = verify_spectrum_map(&u, &zeta, &q, &[8, 16, 32, 64, 128]).unwrap();
        assert!((r.predicted_points()[0] - 0.5).norm() < 1e-15);
        let res: Vec<f64> = r.window_residuals.iter().map(|w| w.residual).collect();
        assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    }
}
