//! Kernels, orthonormal bases and the `H²(𝕋)` pairing.
//!
//! Functions of `K_u` are handled pointwise through the [`Evaluable`] and
//! [`Holomorphic`] traits. Inner products are computed by the periodic
//! trapezoidal rule, which converges geometrically for the rational and
//! analytic integrands that appear here.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::clark::ClarkMeasure;
use crate::error::{MslabError, Result};
use crate::inner::{BoundaryPoint, InnerFunction};

/// Below this distance a boundary kernel is evaluated near its own base point
/// by its first-order Taylor expansion.
const KERNEL_TAYLOR_RADIUS: f64 = 1e-7;

/// Something that can be evaluated at a point of the closed disk.
pub trait Evaluable {
    fn value(&self, z: Complex64) -> Complex64;
}

/// An [`Evaluable`] with a complex derivative.
pub trait Holomorphic: Evaluable {
    fn derivative(&self, z: Complex64) -> Complex64;
}

impl<F: Fn(Complex64) -> Complex64> Evaluable for F {
    fn value(&self, z: Complex64) -> Complex64 {
        self(z)
    }
}

/// A holomorphic function given by closures for its value and derivative.
#[derive(Clone, Copy)]
pub struct Analytic<F, D> {
    pub f: F,
    pub df: D,
}

impl<F, D> Analytic<F, D>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    pub fn new(f: F, df: D) -> Self {
        Self { f, df }
    }
}

impl<F, D> Evaluable for Analytic<F, D>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    fn value(&self, z: Complex64) -> Complex64 {
        (self.f)(z)
    }
}

impl<F, D> Holomorphic for Analytic<F, D>
where
    F: Fn(Complex64) -> Complex64,
    D: Fn(Complex64) -> Complex64,
{
    fn derivative(&self, z: Complex64) -> Complex64 {
        (self.df)(z)
    }
}

/// Equispaced nodes `θ_m = offset + 2πm/M` with weights `1/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleQuadrature {
    nodes: usize,
    offset: f64,
}

impl CircleQuadrature {
    pub fn new(nodes: usize, offset: f64) -> Result<Self> {
        if nodes == 0 {
            return Err(MslabError::Argument("quadrature needs at least one node".into()));
        }
        Ok(Self { nodes, offset })
    }

    /// Nodes shifted by half a spacing from `ζ`, so `ζ` sits midway between
    /// two nodes.
    pub fn avoiding(nodes: usize, zeta: &BoundaryPoint) -> Result<Self> {
        Self::new(nodes, zeta.theta() + 0.5 * TAU / nodes as f64)
    }

    /// Like [`avoiding`](Self::avoiding), and additionally refuses grids with a
    /// node closer than a quarter spacing to the boundary spectrum of `u`.
    pub fn for_model_space(nodes: usize, u: &InnerFunction, zeta: &BoundaryPoint) -> Result<Self> {
        let q = Self::avoiding(nodes, zeta)?;
        q.check_clearance(&u.spectrum().boundary_points)?;
        Ok(q)
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.nodes as f64
    }

    pub fn angle(&self, m: usize) -> f64 {
        self.offset + self.spacing() * m as f64
    }

    pub fn node(&self, m: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.angle(m))
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.nodes).map(|m| self.node(m)).collect()
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.nodes as f64
    }

    /// Smallest angular distance from a node to `p`.
    pub fn clearance(&self, p: &BoundaryPoint) -> f64 {
        let h = self.spacing();
        let r = (p.theta() - self.offset).rem_euclid(h);
        r.min(h - r)
    }

    pub fn check_clearance(&self, singular: &[BoundaryPoint]) -> Result<()> {
        for p in singular {
            if self.clearance(p) < 0.25 * self.spacing() {
                return Err(MslabError::Quadrature(format!(
                    "a node lies within {:e} rad of the singular point θ = {}; re-offset the grid",
                    self.clearance(p),
                    p.theta()
                )));
            }
        }
        Ok(())
    }
}

/// Pairwise (cascade) summation; the reduction order depends only on the length.
pub fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `⟨f, g⟩ = ∫ f ḡ dm` by the trapezoidal rule.
pub fn inner_product(f: &(impl Evaluable + ?Sized), g: &(impl Evaluable + ?Sized), q: &CircleQuadrature) -> Complex64 {
    let terms: Vec<Complex64> = (0..q.len())
        .map(|m| {
            let z = q.node(m);
            f.value(z) * g.value(z).conj()
        })
        .collect();
    pairwise_sum(&terms) * q.weight()
}

pub fn norm_sq(f: &(impl Evaluable + ?Sized), q: &CircleQuadrature) -> f64 {
    inner_product(f, f, q).re
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelBase {
    Interior(Complex64),
    Boundary(BoundaryPoint),
}

/// `k_w(z) = (1 − conj(u(w)) u(z))/(1 − w̄ z)`.
#[derive(Debug, Clone)]
pub struct KernelFunction {
    u: InnerFunction,
    base: KernelBase,
    w: Complex64,
    u_w: Complex64,
    /// `k_w(w)`; equals `|u′(ζ)|` for a boundary base point.
    diag: f64,
    /// `k_ζ′(ζ) = ½ ζ conj(u(ζ)) u″(ζ)` for a boundary base point.
    self_derivative: Complex64,
}

impl KernelFunction {
    pub fn interior(u: &InnerFunction, w: Complex64) -> Result<Self> {
        if w.norm() >= 1.0 {
            return Err(MslabError::Domain(format!("interior base point {w} is not in the disk")));
        }
        let u_w = u.eval(w)?;
        Ok(Self {
            u: u.clone(),
            base: KernelBase::Interior(w),
            w,
            u_w,
            diag: (1.0 - u_w.norm_sqr()) / (1.0 - w.norm_sqr()),
            self_derivative: Complex64::new(f64::NAN, f64::NAN),
        })
    }

    pub fn base(&self) -> KernelBase {
        self.base
    }

    /// `k_w(w) = ‖k_w‖²`.
    pub fn norm_sq(&self) -> f64 {
        self.diag
    }

    fn near_base(&self, z: Complex64) -> bool {
        matches!(self.base, KernelBase::Boundary(_)) && (z - self.w).norm() < KERNEL_TAYLOR_RADIUS
    }
}

/// Boundary kernel `k_ζ^u` for `ζ ∉ σ(u)`.
pub fn boundary_kernel(u: &InnerFunction, zeta: &BoundaryPoint) -> Result<KernelFunction> {
    let d = u.boundary_derivatives(zeta)?;
    let w = zeta.point();
    Ok(KernelFunction {
        u: u.clone(),
        base: KernelBase::Boundary(*zeta),
        w,
        u_w: d.value,
        diag: d.abs_first,
        self_derivative: 0.5 * w * d.value.conj() * d.second,
    })
}

impl Evaluable for KernelFunction {
    fn value(&self, z: Complex64) -> Complex64 {
        if self.near_base(z) {
            return self.diag + self.self_derivative * (z - self.w);
        }
        (1.0 - self.u_w.conj() * self.u.eval_unchecked(z)) / (1.0 - self.w.conj() * z)
    }
}

impl Holomorphic for KernelFunction {
    fn derivative(&self, z: Complex64) -> Complex64 {
        if self.near_base(z) {
            return self.self_derivative;
        }
        // k′ = (N′ + w̄·k)/D with N = 1 − conj(u(w))u, D = 1 − w̄z
        let jet = self.u.jet_unchecked(z);
        let den = 1.0 - self.w.conj() * z;
        let k = (1.0 - self.u_w.conj() * jet.value) / den;
        (-self.u_w.conj() * jet.first + self.w.conj() * k) / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// Normalized boundary kernels at the atoms of a Clark measure.
    /// `complete` is false for a truncated window (singular family).
    Clark { measure: ClarkMeasure, complete: bool },
    TakenakaMalmquist { zeros: Vec<Complex64> },
}

#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    kind: BasisKind,
    u: InnerFunction,
    kernels: Vec<KernelFunction>,
    /// `1/‖k_{ζ_i}‖` for Clark elements.
    scales: Vec<f64>,
}

/// Clark basis `k̃_i = k_{ζ_i}/‖k_{ζ_i}‖`, `‖k_{ζ_i}‖ = |u′(ζ_i)|^{1/2}`.
pub fn clark_onb(u: &InnerFunction, mu: &ClarkMeasure) -> Result<OrthonormalBasis> {
    let kernels = mu
        .atoms
        .iter()
        .map(|a| boundary_kernel(u, &a.point))
        .collect::<Result<Vec<_>>>()?;
    let scales = kernels.iter().map(|k| 1.0 / k.norm_sq().sqrt()).collect();
    let complete = match u {
        InnerFunction::FiniteBlaschke { zeros, .. } => mu.len() == zeros.len(),
        InnerFunction::SingularSingleAtom { .. } => false,
    };
    Ok(OrthonormalBasis {
        kind: BasisKind::Clark {
            measure: mu.clone(),
            complete,
        },
        u: u.clone(),
        kernels,
        scales,
    })
}

/// Takenaka–Malmquist system
/// `b_k(z) = √(1−|a_k|²)/(1−ā_k z) · ∏_{j<k} (z−a_j)/(1−ā_j z)`.
pub fn tm_basis(u: &InnerFunction) -> Result<OrthonormalBasis> {
    let InnerFunction::FiniteBlaschke { zeros, .. } = u else {
        return Err(MslabError::Argument(
            "the Takenaka–Malmquist basis needs a finite Blaschke product".into(),
        ));
    };
    Ok(OrthonormalBasis {
        kind: BasisKind::TakenakaMalmquist { zeros: zeros.clone() },
        u: u.clone(),
        kernels: Vec::new(),
        scales: Vec::new(),
    })
}

impl OrthonormalBasis {
    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn inner(&self) -> &InnerFunction {
        &self.u
    }

    pub fn len(&self) -> usize {
        match &self.kind {
            BasisKind::Clark { measure, .. } => measure.len(),
            BasisKind::TakenakaMalmquist { zeros } => zeros.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the elements span all of `K_u`.
    pub fn is_complete(&self) -> bool {
        match &self.kind {
            BasisKind::Clark { complete, .. } => *complete,
            BasisKind::TakenakaMalmquist { .. } => true,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            BasisKind::Clark { .. } => "clark",
            BasisKind::TakenakaMalmquist { .. } => "takenaka-malmquist",
        }
    }

    pub fn clark_measure(&self) -> Option<&ClarkMeasure> {
        match &self.kind {
            BasisKind::Clark { measure, .. } => Some(measure),
            BasisKind::TakenakaMalmquist { .. } => None,
        }
    }

    /// `‖k_{ζ_i}‖` for Clark elements.
    pub fn kernel_norm(&self, i: usize) -> Option<f64> {
        self.scales.get(i).map(|s| 1.0 / s)
    }

    /// All element values at `z`.
    pub fn values(&self, z: Complex64) -> Vec<Complex64> {
        match &self.kind {
            BasisKind::Clark { .. } => self
                .kernels
                .iter()
                .zip(&self.scales)
                .map(|(k, s)| k.value(z) * *s)
                .collect(),
            BasisKind::TakenakaMalmquist { zeros } => {
                let mut out = Vec::with_capacity(zeros.len());
                let mut prod = Complex64::new(1.0, 0.0);
                for a in zeros {
                    let den = 1.0 - a.conj() * z;
                    out.push(prod * (1.0 - a.norm_sqr()).sqrt() / den);
                    prod *= (z - a) / den;
                }
                out
            }
        }
    }

    /// All element derivatives at `z`.
    pub fn derivatives(&self, z: Complex64) -> Vec<Complex64> {
        match &self.kind {
            BasisKind::Clark { .. } => self
                .kernels
                .iter()
                .zip(&self.scales)
                .map(|(k, s)| k.derivative(z) * *s)
                .collect(),
            BasisKind::TakenakaMalmquist { zeros } => {
                let mut out = Vec::with_capacity(zeros.len());
                let mut p = Complex64::new(1.0, 0.0);
                let mut dp = Complex64::new(0.0, 0.0);
                for a in zeros {
                    let den = 1.0 - a.conj() * z;
                    let c = (1.0 - a.norm_sqr()).sqrt();
                    let g = c / den;
                    let dg = c * a.conj() / (den * den);
                    out.push(dp * g + p * dg);
                    let f = (z - a) / den;
                    let df = (1.0 - a.norm_sqr()) / (den * den);
                    dp = dp * f + p * df;
                    p *= f;
                }
                out
            }
        }
    }

    pub fn value(&self, i: usize, z: Complex64) -> Complex64 {
        self.values(z)[i]
    }

    pub fn derivative(&self, i: usize, z: Complex64) -> Complex64 {
        self.derivatives(z)[i]
    }

    pub fn element(&self, i: usize) -> BasisElement<'_> {
        BasisElement { basis: self, index: i }
    }

    /// The function `Σ γ_i b_i`.
    pub fn combine<'a>(&'a self, coeffs: &'a [Complex64]) -> Combination<'a> {
        Combination { basis: self, coeffs }
    }

    /// Gram matrix `⟨b_j, b_i⟩` by quadrature.
    pub fn gram(&self, q: &CircleQuadrature) -> DMatrix<Complex64> {
        let samples = self.sample(q);
        let n = self.len();
        let entries: Vec<Complex64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % n, idx / n);
                let terms: Vec<Complex64> = samples.iter().map(|row| row[j] * row[i].conj()).collect();
                pairwise_sum(&terms) * q.weight()
            })
            .collect();
        DMatrix::from_vec(n, n, entries)
    }

    /// Coefficients `γ_i = ⟨f, b_i⟩`.
    pub fn project(&self, f: &(impl Evaluable + Sync + ?Sized), q: &CircleQuadrature) -> Vec<Complex64> {
        let samples = self.sample(q);
        let fv: Vec<Complex64> = (0..q.len()).map(|m| f.value(q.node(m))).collect();
        (0..self.len())
            .map(|i| {
                let terms: Vec<Complex64> = samples.iter().zip(&fv).map(|(row, f)| f * row[i].conj()).collect();
                pairwise_sum(&terms) * q.weight()
            })
            .collect()
    }

    /// Element values at every quadrature node, one row per node.
    pub(crate) fn sample(&self, q: &CircleQuadrature) -> Vec<Vec<Complex64>> {
        (0..q.len()).into_par_iter().map(|m| self.values(q.node(m))).collect()
    }
}

#[derive(Clone, Copy)]
pub struct BasisElement<'a> {
    basis: &'a OrthonormalBasis,
    index: usize,
}

impl Evaluable for BasisElement<'_> {
    fn value(&self, z: Complex64) -> Complex64 {
        match &self.basis.kind {
            BasisKind::Clark { .. } => self.basis.kernels[self.index].value(z) * self.basis.scales[self.index],
            BasisKind::TakenakaMalmquist { .. } => self.basis.value(self.index, z),
        }
    }
}

impl Holomorphic for BasisElement<'_> {
    fn derivative(&self, z: Complex64) -> Complex64 {
        match &self.basis.kind {
            BasisKind::Clark { .. } => {
                self.basis.kernels[self.index].derivative(z) * self.basis.scales[self.index]
            }
            BasisKind::TakenakaMalmquist { .. } => self.basis.derivative(self.index, z),
        }
    }
}

/// `f = Σ γ_i b_i`.
#[derive(Clone, Copy)]
pub struct Combination<'a> {
    basis: &'a OrthonormalBasis,
    coeffs: &'a [Complex64],
}

impl Evaluable for Combination<'_> {
    fn value(&self, z: Complex64) -> Complex64 {
        self.basis
            .values(z)
            .iter()
            .zip(self.coeffs)
            .map(|(b, g)| b * g)
            .sum()
    }
}

impl Holomorphic for Combination<'_> {
    fn derivative(&self, z: Complex64) -> Complex64 {
        self.basis
            .derivatives(z)
            .iter()
            .zip(self.coeffs)
            .map(|(b, g)| b * g)
            .sum()
    }
}

/// Coefficient vector of a `K_u` element relative to some basis.
#[derive(Debug, Clone, PartialEq)]
pub struct KuVector {
    pub coeffs: Vec<Complex64>,
}

impl KuVector {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    /// Parseval: `‖f‖² = Σ |γ_i|²`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}
