//! Matrices of the difference-quotient operator `Q_ζ`, the backward shift
//! `X_u` and the resolvent `I + ζQ_ζ`.
//!
//! In the Clark basis attached to `α = u(ζ)` the matrix of `Q_ζ` is
//! arrowhead: with `ζ_ℓ = ζ`,
//!
//! ```text
//! q_ii = 1/(ζ_i − ζ)                         i ≠ ℓ
//! q_iℓ = (‖k_ζ‖/‖k_i‖) · 1/(ζ − ζ_i)         i ≠ ℓ
//! q_ℓj = k_j′(ζ)/(‖k_j‖ ‖k_ζ‖)               j ≠ ℓ
//! q_ℓℓ = k_ζ′(ζ)/‖k_ζ‖²,   k_ζ′(ζ) = ½ ζ conj(u(ζ)) u″(ζ)
//! ```
//!
//! and every other entry vanishes. Those matrices are stored in structured
//! form (`O(N)` memory) because singular-family windows reach `N = 8193`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::clark::{ClarkMeasure, Window};
use crate::error::{MslabError, Result};
use crate::format::{sig17, to_json_string};
use crate::inner::{BoundaryPoint, InnerFunction};
use crate::modelspace::{boundary_kernel, clark_onb, pairwise_sum, CircleQuadrature, Evaluable, Holomorphic, OrthonormalBasis};

/// Below this distance from `ζ` a difference quotient is replaced by `f′(ζ)`.
pub const REMOVABLE_RADIUS: f64 = 1e-8;
/// Quadrature nodes closer than this to `ζ` are treated as collisions.
const NODE_COLLISION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisTag {
    Clark,
    TakenakaMalmquist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    LemmaAnalytic,
    Quadrature,
    Derived,
}

impl BasisTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Clark => "clark",
            Self::TakenakaMalmquist => "takenaka-malmquist",
        }
    }
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LemmaAnalytic => "lemma-analytic",
            Self::Quadrature => "quadrature",
            Self::Derived => "derived",
        }
    }
}

/// Entry storage. Arrowhead: `diag[i]` is `(i,i)` (the corner at `ℓ`),
/// `row[j]` is `(ℓ,j)` and `col[i]` is `(i,ℓ)` for `i, j ≠ ℓ`; `row[ℓ]` and
/// `col[ℓ]` are unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Dense(DMatrix<Complex64>),
    Arrowhead {
        diag: Vec<Complex64>,
        row: Vec<Complex64>,
        col: Vec<Complex64>,
        ell: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub storage: Storage,
    pub basis: BasisTag,
    pub ell: Option<usize>,
    pub provenance: Provenance,
    pub zeta_theta: Option<f64>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    n: usize,
    ell: Option<usize>,
    basis: &'a str,
    provenance: &'a str,
    zeta_theta: Option<f64>,
}

impl OperatorMatrix {
    pub fn dense(m: DMatrix<Complex64>, basis: BasisTag, provenance: Provenance) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator matrices are square");
        Self {
            storage: Storage::Dense(m),
            basis,
            ell: None,
            provenance,
            zeta_theta: None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.nrows(),
            Storage::Arrowhead { diag, .. } => diag.len(),
        }
    }

    pub fn is_arrowhead(&self) -> bool {
        matches!(self.storage, Storage::Arrowhead { .. })
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Arrowhead { diag, row, col, ell } => {
                if i == j {
                    diag[i]
                } else if i == *ell {
                    row[j]
                } else if j == *ell {
                    col[i]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Arrowhead { .. } => {
                let n = self.dim();
                DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
            }
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        match &self.storage {
            Storage::Dense(m) => (m * DVector::from_column_slice(x)).as_slice().to_vec(),
            Storage::Arrowhead { diag, row, col, ell } => {
                let xl = x[*ell];
                let mut y: Vec<Complex64> = diag
                    .iter()
                    .zip(col)
                    .zip(x)
                    .map(|((d, c), xi)| d * xi + c * xl)
                    .collect();
                let tail: Vec<Complex64> = row
                    .iter()
                    .zip(x)
                    .enumerate()
                    .filter(|(j, _)| j != ell)
                    .map(|(_, (r, xj))| r * xj)
                    .collect();
                y[*ell] = diag[*ell] * xl + pairwise_sum(&tail);
                y
            }
        }
    }

    /// `y = Aᴴ x`.
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        match &self.storage {
            Storage::Dense(m) => (m.adjoint() * DVector::from_column_slice(x)).as_slice().to_vec(),
            Storage::Arrowhead { diag, row, col, ell } => {
                let xl = x[*ell];
                let mut y: Vec<Complex64> = diag
                    .iter()
                    .zip(row)
                    .zip(x)
                    .map(|((d, r), xi)| d.conj() * xi + r.conj() * xl)
                    .collect();
                let tail: Vec<Complex64> = col
                    .iter()
                    .zip(x)
                    .enumerate()
                    .filter(|(j, _)| j != ell)
                    .map(|(_, (c, xj))| c.conj() * xj)
                    .collect();
                y[*ell] = diag[*ell].conj() * xl + pairwise_sum(&tail);
                y
            }
        }
    }

    /// Leading `k × k` block, keeping the arrowhead layout when `ℓ < k`.
    pub fn principal_submatrix(&self, indices: &[usize]) -> OperatorMatrix {
        let n = indices.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.entry(indices[i], indices[j]));
        OperatorMatrix {
            storage: Storage::Dense(m),
            basis: self.basis,
            ell: self.ell.and_then(|l| indices.iter().position(|&i| i == l)),
            provenance: self.provenance,
            zeta_theta: self.zeta_theta,
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// CSV of `i,j,re,im` for the nonzero entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,re,im\n");
        let mut push = |i: usize, j: usize, z: Complex64| {
            if z != Complex64::new(0.0, 0.0) {
                writeln!(out, "{i},{j},{},{}", sig17(z.re), sig17(z.im)).expect("write to String");
            }
        };
        match &self.storage {
            Storage::Dense(m) => {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        push(i, j, m[(i, j)]);
                    }
                }
            }
            Storage::Arrowhead { .. } => {
                let n = self.dim();
                let ell = self.ell.expect("arrowhead matrices record ℓ");
                for i in 0..n {
                    if i == ell {
                        for j in 0..n {
                            push(i, j, self.entry(i, j));
                        }
                    } else {
                        let (a, b) = if i < ell { (i, ell) } else { (ell, i) };
                        push(i, a, self.entry(i, a));
                        push(i, b, self.entry(i, b));
                    }
                }
            }
        }
        out
    }

    /// JSON sidecar `{n, ell, basis, provenance, zeta_theta}`.
    pub fn sidecar_json(&self) -> String {
        to_json_string(&Sidecar {
            n: self.dim(),
            ell: self.ell,
            basis: self.basis.as_str(),
            provenance: self.provenance.as_str(),
            zeta_theta: self.zeta_theta,
        })
    }
}

/// Lemma-analytic matrix of `Q_ζ` in the Clark basis of `μ`, which must
/// contain `ζ` as atom `ℓ`.
pub fn q_matrix_clark_with(u: &InnerFunction, zeta: &BoundaryPoint, mu: &ClarkMeasure) -> Result<OperatorMatrix> {
    let ell = mu
        .ell
        .filter(|&l| mu.atoms[l].point.arc_distance(zeta) <= crate::clark::ELL_MATCH_TOL)
        .or_else(|| mu.locate(zeta))
        .ok_or_else(|| MslabError::Argument(format!("ζ = e^{{i{}}} is not an atom of the measure", zeta.theta())))?;
    let z0 = zeta.point();
    let k_zeta = boundary_kernel(u, zeta)?;
    let norm_zeta = k_zeta.norm_sq().sqrt();
    let n = mu.len();

    let entries: Vec<(Complex64, Complex64, Complex64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            if i == ell {
                let corner = k_zeta.derivative(z0) / k_zeta.norm_sq();
                return Ok((corner, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)));
            }
            let zi = mu.atoms[i].point.point();
            let k_i = boundary_kernel(u, &mu.atoms[i].point)?;
            let norm_i = k_i.norm_sq().sqrt();
            let diag = 1.0 / (zi - z0);
            let col = (norm_zeta / norm_i) / (z0 - zi);
            let row = k_i.derivative(z0) / (norm_i * norm_zeta);
            Ok((diag, row, col))
        })
        .collect::<Result<Vec<_>>>()?;

    let (diag, row, col) = entries.into_iter().fold(
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)),
        |(mut d, mut r, mut c), (a, b, e)| {
            d.push(a);
            r.push(b);
            c.push(e);
            (d, r, c)
        },
    );
    Ok(OperatorMatrix {
        storage: Storage::Arrowhead { diag, row, col, ell },
        basis: BasisTag::Clark,
        ell: Some(ell),
        provenance: Provenance::LemmaAnalytic,
        zeta_theta: Some(zeta.theta()),
    })
}

/// Builds the Clark measure for `α = u(ζ)` and the lemma-analytic matrix.
pub fn q_matrix_clark(u: &InnerFunction, zeta: &BoundaryPoint, window: Window) -> Result<(ClarkMeasure, OperatorMatrix)> {
    let mu = ClarkMeasure::for_base_point(u, zeta, window)?;
    let q = q_matrix_clark_with(u, zeta, &mu)?;
    Ok((mu, q))
}

/// `z ↦ (f(z) − f(ζ))/(z − ζ)` with the removable singularity filled by `f′(ζ)`.
pub struct DifferenceQuotient<'a, F: ?Sized> {
    f: &'a F,
    zeta: Complex64,
    f_zeta: Complex64,
    df_zeta: Complex64,
}

pub fn apply_difference_quotient<'a, F: Holomorphic + ?Sized>(f: &'a F, zeta: &BoundaryPoint) -> DifferenceQuotient<'a, F> {
    let z0 = zeta.point();
    DifferenceQuotient {
        f,
        zeta: z0,
        f_zeta: f.value(z0),
        df_zeta: f.derivative(z0),
    }
}

impl<F: Holomorphic + ?Sized> Evaluable for DifferenceQuotient<'_, F> {
    fn value(&self, z: Complex64) -> Complex64 {
        let d = z - self.zeta;
        if d.norm() < REMOVABLE_RADIUS {
            self.df_zeta
        } else {
            (self.f.value(z) - self.f_zeta) / d
        }
    }
}

fn basis_tag(basis: &OrthonormalBasis) -> BasisTag {
    match basis.kind() {
        crate::modelspace::BasisKind::Clark { .. } => BasisTag::Clark,
        crate::modelspace::BasisKind::TakenakaMalmquist { .. } => BasisTag::TakenakaMalmquist,
    }
}

/// `⟨T b_j, b_i⟩` by quadrature, where `image(j, z, values_at_z)` returns
/// `(T b_j)(z)` given all element values at the node.
fn matrix_by_quadrature(
    basis: &OrthonormalBasis,
    q: &CircleQuadrature,
    image: impl Fn(usize, Complex64, &[Complex64]) -> Complex64 + Sync,
) -> DMatrix<Complex64> {
    let n = basis.len();
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..q.len())
        .into_par_iter()
        .map(|m| {
            let z = q.node(m);
            let vals = basis.values(z);
            let imgs = (0..n).map(|j| image(j, z, &vals)).collect();
            (vals, imgs)
        })
        .collect();
    let entries: Vec<Complex64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx % n, idx / n);
            let terms: Vec<Complex64> = rows.iter().map(|(v, t)| t[j] * v[i].conj()).collect();
            pairwise_sum(&terms) * q.weight()
        })
        .collect();
    DMatrix::from_vec(n, n, entries)
}

/// `⟨Q_ζ b_j, b_i⟩` with pointwise difference quotients at the nodes.
pub fn q_matrix_quadrature(
    u: &InnerFunction,
    zeta: &BoundaryPoint,
    basis: &OrthonormalBasis,
    q: &CircleQuadrature,
) -> Result<OperatorMatrix> {
    u.boundary_derivatives(zeta)?;
    let z0 = zeta.point();
    let nearest = (0..q.len()).map(|m| (q.node(m) - z0).norm()).fold(f64::INFINITY, f64::min);
    if nearest < NODE_COLLISION {
        return Err(MslabError::Quadrature(format!(
            "quadrature node collides with ζ (distance {nearest:e}); offset the grid"
        )));
    }
    let at_zeta = basis.values(z0);
    let d_at_zeta = basis.derivatives(z0);
    let m = matrix_by_quadrature(basis, q, |j, z, vals| {
        let d = z - z0;
        if d.norm() < REMOVABLE_RADIUS {
            d_at_zeta[j]
        } else {
            (vals[j] - at_zeta[j]) / d
        }
    });
    let mut op = OperatorMatrix::dense(m, basis_tag(basis), Provenance::Quadrature);
    op.ell = basis.clark_measure().and_then(|mu| mu.locate(zeta));
    op.zeta_theta = Some(zeta.theta());
    Ok(op)
}

/// `⟨X_u b_j, b_i⟩` with `(X_u f)(z) = (f(z) − f(0))/z`.
pub fn x_matrix(u: &InnerFunction, basis: &OrthonormalBasis, q: &CircleQuadrature) -> Result<OperatorMatrix> {
    if !u.is_finite_blaschke() {
        return Err(MslabError::Argument("X_u matrices need a finite Blaschke product".into()));
    }
    let at_zero = basis.values(Complex64::new(0.0, 0.0));
    let m = matrix_by_quadrature(basis, q, |j, z, vals| (vals[j] - at_zero[j]) / z);
    let mut op = OperatorMatrix::dense(m, basis_tag(basis), Provenance::Quadrature);
    op.ell = basis.clark_measure().and_then(|mu| mu.ell);
    Ok(op)
}

/// `(I − ζX)⁻¹ X`, which equals `Q_ζ` in the same basis.
pub fn q_from_x(x: &OperatorMatrix, zeta: &BoundaryPoint) -> Result<OperatorMatrix> {
    let n = x.dim();
    let xd = x.to_dense();
    let a = DMatrix::<Complex64>::identity(n, n) - xd.scale(1.0) * zeta.point();
    let lu = a.lu();
    let solved = lu
        .solve(&xd)
        .ok_or_else(|| MslabError::Internal("I − ζX is singular; ζ must avoid σ(u)".into()))?;
    let mut op = OperatorMatrix::dense(solved, x.basis, Provenance::Derived);
    op.ell = x.ell;
    op.zeta_theta = Some(zeta.theta());
    Ok(op)
}

/// `I + ζQ`, the resolvent `(I − ζX_u)⁻¹`.
pub fn resolvent_matrix(q: &OperatorMatrix, zeta: &BoundaryPoint) -> OperatorMatrix {
    let z = zeta.point();
    let storage = match &q.storage {
        Storage::Dense(m) => {
            let n = m.nrows();
            Storage::Dense(DMatrix::<Complex64>::identity(n, n) + m.map(|e| e * z))
        }
        Storage::Arrowhead { diag, row, col, ell } => Storage::Arrowhead {
            diag: diag.iter().map(|d| 1.0 + z * d).collect(),
            row: row.iter().map(|r| z * r).collect(),
            col: col.iter().map(|c| z * c).collect(),
            ell: *ell,
        },
    };
    OperatorMatrix {
        storage,
        basis: q.basis,
        ell: q.ell,
        provenance: Provenance::Derived,
        zeta_theta: Some(zeta.theta()),
    }
}

/// Matrix of `Q_ζ` in any complete basis: lemma-analytic for a Clark basis
/// that contains `ζ`, quadrature otherwise.
pub fn q_matrix_in_basis(
    u: &InnerFunction,
    zeta: &BoundaryPoint,
    basis: &OrthonormalBasis,
    q: &CircleQuadrature,
) -> Result<OperatorMatrix> {
    if let Some(mu) = basis.clark_measure() {
        if mu.locate(zeta).is_some() {
            return q_matrix_clark_with(u, zeta, mu);
        }
    }
    q_matrix_quadrature(u, zeta, basis, q)
}

/// Clark basis at `ζ` together with its lemma-analytic `Q_ζ`.
pub fn clark_setup(u: &InnerFunction, zeta: &BoundaryPoint, window: Window) -> Result<(OrthonormalBasis, OperatorMatrix)> {
    let (mu, q) = q_matrix_clark(u, zeta, window)?;
    Ok((clark_onb(u, &mu)?, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelspace::{tm_basis, Analytic};
    use crate::rng::Lcg64;
    use std::f64::consts::{PI, TAU};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn mat(rows: &[&[Complex64]]) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
    }

    #[test]
    fn lemma_matrix_z_squared() {
        let u = InnerFunction::monomial(2).unwrap();
        let (_, q) = q_matrix_clark(&u, &BoundaryPoint::new(0.0), Window::Full).unwrap();
        assert!(q.is_arrowhead());
        assert_eq!(q.ell, Some(0));
        let h = c(0.5, 0.0);
        let expect = mat(&[&[h, -h], &[h, -h]]);
        assert!(max_diff(&q.to_dense(), &expect) < 1e-12);
    }

    #[test]
    fn lemma_matrix_monomial_basis_oracle() {
        // Q on K_{z²} = span{1, z} is [[0,1],[0,0]] in {1, z}; the Clark basis
        // is {(1+z)/√2, (1−z)/√2}, so the change of basis is explicit.
        let u = InnerFunction::monomial(2).unwrap();
        let (_, q) = q_matrix_clark(&u, &BoundaryPoint::new(0.0), Window::Full).unwrap();
        let r = 1.0 / 2f64.sqrt();
        let p = mat(&[&[c(r, 0.0), c(r, 0.0)], &[c(r, 0.0), c(-r, 0.0)]]);
        let q_mono = mat(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        let expect = p.adjoint() * q_mono * &p;
        assert!(max_diff(&q.to_dense(), &expect) < 1e-14);
    }

    #[test]
    fn lemma_matrix_degree_one() {
        let u = InnerFunction::blaschke_real(&[0.5]).unwrap();
        let (_, q) = q_matrix_clark(&u, &BoundaryPoint::new(PI), Window::Full).unwrap();
        assert_eq!(q.dim(), 1);
        assert!((q.entry(0, 0) - 1.0 / 3.0).norm() < 1e-14);
    }

    #[test]
    fn lemma_matrix_singular_window() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        let (mu, q) = q_matrix_clark(&u, &BoundaryPoint::new(PI), Window::Symmetric(1)).unwrap();
        assert_eq!(q.dim(), 3);
        let ell = q.ell.unwrap();
        assert_eq!(ell, 1);
        assert!((q.entry(ell, ell).norm() - 0.25).abs() < 1e-14);
        let k_minus = mu.atoms.iter().position(|a| a.branch == -1).unwrap();
        let theta = 2.0 * 1.0f64.atan2(TAU);
        let expect = 1.0 / (2.0 * (theta / 2.0).cos());
        assert!((q.entry(k_minus, k_minus).norm() - expect).abs() < 1e-13);
        assert!((expect - 0.5063).abs() < 1e-4);
        assert_eq!(q.entry(0, 2), c(0.0, 0.0));
    }

    #[test]
    fn lemma_matrix_rejects_missing_base() {
        let u = InnerFunction::monomial(2).unwrap();
        let mu = crate::clark::clark_atoms_blaschke(&u, c(1.0, 0.0)).unwrap();
        assert!(matches!(
            q_matrix_clark_with(&u, &BoundaryPoint::new(1.0), &mu),
            Err(MslabError::Argument(_))
        ));
    }

    #[test]
    fn quadrature_route_examples() {
        let u = InnerFunction::monomial(2).unwrap();
        let zeta = BoundaryPoint::new(0.0);
        let q = CircleQuadrature::avoiding(4096, &zeta).unwrap();
        let tm = tm_basis(&u).unwrap();
        let m = q_matrix_quadrature(&u, &zeta, &tm, &q).unwrap();
        let expect = mat(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(max_diff(&m.to_dense(), &expect) < 1e-12);

        let (basis, lemma) = clark_setup(&u, &zeta, Window::Full).unwrap();
        let m = q_matrix_quadrature(&u, &zeta, &basis, &q).unwrap();
        assert!(max_diff(&m.to_dense(), &lemma.to_dense()) < 1e-10);

        let half = InnerFunction::blaschke_real(&[0.5]).unwrap();
        let zeta = BoundaryPoint::new(PI);
        let q = CircleQuadrature::avoiding(4096, &zeta).unwrap();
        let m = q_matrix_quadrature(&half, &zeta, &tm_basis(&half).unwrap(), &q).unwrap();
        assert!((m.entry(0, 0) - 1.0 / 3.0).norm() < 1e-10);
    }

    #[test]
    fn quadrature_node_collision() {
        let u = InnerFunction::monomial(2).unwrap();
        let zeta = BoundaryPoint::new(0.0);
        let q = CircleQuadrature::new(64, 0.0).unwrap();
        assert!(matches!(
            q_matrix_quadrature(&u, &zeta, &tm_basis(&u).unwrap(), &q),
            Err(MslabError::Quadrature(_))
        ));
    }

    #[test]
    fn difference_quotient_examples() {
        let zeta = BoundaryPoint::new(0.4);
        let f = Analytic::new(|z: Complex64| 1.0 + z, |_| c(1.0, 0.0));
        let dq = apply_difference_quotient(&f, &zeta);
        for z in [c(0.1, 0.2), zeta.point(), zeta.point() + 1e-10] {
            assert!((dq.value(z) - 1.0).norm() < 1e-6);
        }
        let k = Analytic::new(|_: Complex64| c(3.0, -1.0), |_| c(0.0, 0.0));
        assert_eq!(apply_difference_quotient(&k, &zeta).value(c(0.3, 0.0)), c(0.0, 0.0));

        // Q c_a = ā/(1 − āζ) · c_a for the Cauchy kernel c_a = 1/(1 − āz)
        let a = c(0.3, -0.5);
        let ca = Analytic::new(move |z: Complex64| 1.0 / (1.0 - a.conj() * z), move |z: Complex64| a.conj() / (1.0 - a.conj() * z).powi(2));
        let dq = apply_difference_quotient(&ca, &zeta);
        let lambda = a.conj() / (1.0 - a.conj() * zeta.point());
        for m in 0..100 {
            let z = Complex64::from_polar(0.99, TAU * m as f64 / 100.0 + 0.01);
            assert!((dq.value(z) - lambda * ca.value(z)).norm() < 1e-12);
        }
    }

    #[test]
    fn x_matrix_examples() {
        let u = InnerFunction::monomial(2).unwrap();
        let q = CircleQuadrature::new(1024, 0.1).unwrap();
        let x = x_matrix(&u, &tm_basis(&u).unwrap(), &q).unwrap();
        let shift = mat(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(max_diff(&x.to_dense(), &shift) < 1e-13);
        let qx = q_from_x(&x, &BoundaryPoint::new(0.0)).unwrap();
        assert!(max_diff(&qx.to_dense(), &shift) < 1e-13);

        let half = InnerFunction::blaschke_real(&[0.5]).unwrap();
        let x = x_matrix(&half, &tm_basis(&half).unwrap(), &q).unwrap();
        assert!((x.entry(0, 0) - 0.5).norm() < 1e-13);
        let qx = q_from_x(&x, &BoundaryPoint::new(PI)).unwrap();
        assert!((qx.entry(0, 0) - 1.0 / 3.0).norm() < 1e-13);

        assert!(x_matrix(&InnerFunction::singular(0.0, 1.0).unwrap(), &tm_basis(&half).unwrap(), &q).is_err());
    }

    #[test]
    fn q_equals_resolvent_times_x() {
        let mut rng = Lcg64::new(21);
        for n in 2..=5 {
            let u = InnerFunction::blaschke((0..n).map(|_| rng.disk_point(0.8)).collect(), c(1.0, 0.0)).unwrap();
            let zeta = BoundaryPoint::new(rng.next_unit() * TAU);
            let quad = CircleQuadrature::avoiding(4096, &zeta).unwrap();
            let (basis, lemma) = clark_setup(&u, &zeta, Window::Full).unwrap();
            let x = x_matrix(&u, &basis, &quad).unwrap();
            let qx = q_from_x(&x, &zeta).unwrap();
            assert!(max_diff(&qx.to_dense(), &lemma.to_dense()) < 1e-8, "n={n}");
        }
    }

    #[test]
    fn resolvent_examples() {
        let u = InnerFunction::monomial(2).unwrap();
        let zeta = BoundaryPoint::new(0.0);
        let (_, q) = q_matrix_clark(&u, &zeta, Window::Full).unwrap();
        let r = resolvent_matrix(&q, &zeta);
        let expect = mat(&[&[c(1.5, 0.0), c(-0.5, 0.0)], &[c(0.5, 0.0), c(0.5, 0.0)]]);
        assert!(max_diff(&r.to_dense(), &expect) < 1e-12);

        let half = InnerFunction::blaschke_real(&[0.5]).unwrap();
        let zeta = BoundaryPoint::new(PI);
        let (_, q) = q_matrix_clark(&half, &zeta, Window::Full).unwrap();
        assert!((resolvent_matrix(&q, &zeta).entry(0, 0) - 2.0 / 3.0).norm() < 1e-14);
    }

    #[test]
    fn arrowhead_products_match_dense() {
        let u = InnerFunction::singular(0.8, 1.3).unwrap();
        let zeta = BoundaryPoint::new(3.5);
        let (_, q) = q_matrix_clark(&u, &zeta, Window::Symmetric(6)).unwrap();
        let d = q.to_dense();
        let x = Lcg64::new(4).unit_vector(q.dim());
        let xv = DVector::from_column_slice(&x);
        let y = q.apply(&x);
        let ya = q.apply_adjoint(&x);
        assert!((DVector::from_vec(y) - &d * &xv).norm() < 1e-13 * d.norm());
        assert!((DVector::from_vec(ya) - d.adjoint() * &xv).norm() < 1e-13 * d.norm());
        // off-arrow entries are exact zeros
        let ell = q.ell.unwrap();
        for i in 0..q.dim() {
            for j in 0..q.dim() {
                if i != j && i != ell && j != ell {
                    assert_eq!(d[(i, j)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn dump_formats() {
        let u = InnerFunction::monomial(2).unwrap();
        let (_, q) = q_matrix_clark(&u, &BoundaryPoint::new(0.0), Window::Full).unwrap();
        let csv = q.to_csv();
        assert!(csv.starts_with("i,j,re,im\n0,0,0.50000000000000000,0.0000000000000000\n"));
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(
            q.sidecar_json(),
            r#"{"n":2,"ell":0,"basis":"clark","provenance":"lemma-analytic","zeta_theta":0.0000000000000000}"#
        );
    }
}
