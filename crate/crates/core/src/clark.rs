//! Clark measures `σ_α` of the two inner-function families.
//!
//! For `α ∈ 𝕋` the atoms of `σ_α` are the solutions of `u(ζ) = α` on the
//! circle and carry mass `1/|u′(ζ)|`. A continuous branch `Φ` of
//! `arg u(e^{iθ})` is strictly increasing with `Φ′(θ) = |u′(e^{iθ})|`, so
//! atoms are the preimages of `arg α + 2πk` under a monotone map.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{MslabError, Result};
use crate::format::sig17;
use crate::inner::{BoundaryPoint, InnerFunction};

/// Atoms must reproduce `α` to this accuracy (plus the angle-rounding floor).
pub const ATOM_RESIDUAL_TOL: f64 = 1e-10;
/// Angle match used to locate the base point among the atoms.
pub const ELL_MATCH_TOL: f64 = 1e-9;

const SAMPLES_PER_DEGREE: usize = 64;
const BISECTION_WIDTH: f64 = 1e-3;
const NEWTON_RESIDUAL: f64 = 1e-13;

/// Which atoms to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Every atom; only meaningful for finite Blaschke products.
    Full,
    /// Branch indices `|k| ≤ K` around the base point (singular family).
    Symmetric(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase {
    pub phase: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub point: BoundaryPoint,
    pub mass: f64,
    /// Branch index: `Φ(atom) = τ + 2π·branch`.
    pub branch: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClarkMeasure {
    pub alpha: Complex64,
    /// Sorted by ascending angle in `[0, 2π)`.
    pub atoms: Vec<Atom>,
    /// Index of the base point `ζ` among the atoms, when built from one.
    pub ell: Option<usize>,
    /// Branch window `K` for the singular family.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerglotzCheck {
    pub partial_sum: f64,
    pub expected: f64,
    pub gap: f64,
}

/// Continuous branch of `arg u(e^{iθ})` and its derivative.
///
/// Blaschke products use `arg c + nθ + 2 Σ Arg(1 − a_k e^{−iθ})`, shifted by a
/// multiple of `2π` so that `Φ(0)` is the principal argument of `u(1)`. The
/// singular family uses `−s·cot((θ − θ_ξ)/2)` on `(θ_ξ, θ_ξ + 2π)`.
pub fn continuous_phase(u: &InnerFunction, theta: f64) -> Result<Phase> {
    match u {
        InnerFunction::FiniteBlaschke { zeros, factor } => {
            let raw = |t: f64| -> f64 {
                let e = Complex64::from_polar(1.0, -t);
                factor.arg()
                    + zeros.len() as f64 * t
                    + 2.0 * zeros.iter().map(|a| (1.0 - a * e).arg()).sum::<f64>()
            };
            let principal = u.eval_unchecked(Complex64::new(1.0, 0.0)).arg();
            let shift = TAU * ((principal - raw(0.0)) / TAU).round();
            let z = Complex64::from_polar(1.0, theta);
            let derivative = zeros
                .iter()
                .map(|a| (1.0 - a.norm_sqr()) / (z - a).norm_sqr())
                .sum();
            Ok(Phase {
                phase: raw(theta) + shift,
                derivative,
            })
        }
        InnerFunction::SingularSingleAtom { xi_angle, mass } => {
            let phi = (theta - xi_angle).rem_euclid(TAU);
            if phi == 0.0 || phi >= TAU || (phi.min(TAU - phi)) < 1e-12 {
                return Err(MslabError::Domain(format!(
                    "θ = {theta} is on the boundary spectrum"
                )));
            }
            let half = phi / 2.0;
            let sin = half.sin();
            Ok(Phase {
                phase: -mass * half.cos() / sin,
                derivative: mass / (2.0 * sin * sin),
            })
        }
    }
}

impl ClarkMeasure {
    /// Clark measure for `α = u(ζ)` with `ζ` marked as atom `ℓ`.
    pub fn for_base_point(u: &InnerFunction, zeta: &BoundaryPoint, window: Window) -> Result<Self> {
        let alpha = u.eval(zeta.point())?;
        let mut measure = match (u, window) {
            (InnerFunction::FiniteBlaschke { .. }, Window::Full) => clark_atoms_blaschke(u, alpha)?,
            (InnerFunction::FiniteBlaschke { .. }, Window::Symmetric(_)) => {
                return Err(MslabError::Argument(
                    "finite Blaschke products use the full atom set".into(),
                ))
            }
            (InnerFunction::SingularSingleAtom { .. }, Window::Symmetric(k)) => {
                clark_atoms_singular_at(u, alpha, k, Some(zeta))?
            }
            (InnerFunction::SingularSingleAtom { .. }, Window::Full) => {
                return Err(MslabError::Argument(
                    "the singular family has infinitely many atoms; pick a symmetric window".into(),
                ))
            }
        };
        let ell = measure.locate(zeta).ok_or_else(|| {
            MslabError::Internal(format!("base point θ = {} not found among the atoms", zeta.theta()))
        })?;
        // pin the base atom to ζ exactly
        measure.atoms[ell].point = *zeta;
        measure.ell = Some(ell);
        Ok(measure)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Index of the atom within [`ELL_MATCH_TOL`] of `zeta`.
    pub fn locate(&self, zeta: &BoundaryPoint) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| a.point.arc_distance(zeta) <= ELL_MATCH_TOL)
    }

    pub fn total_mass(&self) -> f64 {
        let mut masses: Vec<f64> = self.atoms.iter().map(|a| a.mass).collect();
        // small masses first for a stable sum
        masses.sort_by(f64::total_cmp);
        masses.iter().sum()
    }

    /// `(min, max)` of `σ_α({ζ})/|ζ − ζ±|` over atoms that have both branch
    /// neighbours inside the window.
    pub fn neighbor_ratio_bounds(&self) -> Option<(f64, f64)> {
        let mut by_branch: Vec<&Atom> = self.atoms.iter().collect();
        by_branch.sort_by_key(|a| a.branch);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for w in by_branch.windows(3) {
            if w[1].branch - w[0].branch != 1 || w[2].branch - w[1].branch != 1 {
                continue;
            }
            for nb in [w[0], w[2]] {
                let r = w[1].mass / w[1].point.chord(&nb.point);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (hi > 0.0).then_some((lo, hi))
    }

    /// Atom table with header `index,theta,mass,u_prime_abs`.
    pub fn to_csv(&self, u: &InnerFunction) -> Result<String> {
        let mut out = String::from("index,theta,mass,u_prime_abs\n");
        for (i, atom) in self.atoms.iter().enumerate() {
            let d = u.boundary_derivatives(&atom.point)?;
            writeln!(
                out,
                "{},{},{},{}",
                i,
                sig17(atom.point.theta()),
                sig17(atom.mass),
                sig17(d.abs_first)
            )
            .expect("write to String");
        }
        Ok(out)
    }

    fn finish(alpha: Complex64, mut atoms: Vec<Atom>, window: Option<usize>) -> Result<Self> {
        atoms.sort_by(|a, b| a.point.theta().total_cmp(&b.point.theta()));
        if atoms.windows(2).any(|w| w[0].point.theta() >= w[1].point.theta()) {
            return Err(MslabError::Internal("duplicate atom angles".into()));
        }
        if atoms.iter().any(|a| !(a.mass > 0.0)) {
            return Err(MslabError::Internal("non-positive atom mass".into()));
        }
        Ok(Self {
            alpha,
            atoms,
            ell: None,
            window,
        })
    }
}

fn check_unimodular(alpha: Complex64) -> Result<()> {
    if (alpha.norm() - 1.0).abs() > 1e-10 {
        return Err(MslabError::Argument(format!("α = {alpha} is not unimodular")));
    }
    Ok(())
}

/// Residual test for `u(atom) = α`, allowing for the rounding of the atom's
/// angle, which moves `u` by about `|u′|·ulp(θ)`.
fn check_atom(u: &InnerFunction, alpha: Complex64, atom: &Atom) -> Result<()> {
    let d = u.boundary_derivatives(&atom.point)?;
    let floor = 4.0 * f64::EPSILON * TAU * d.abs_first;
    let residual = (d.value - alpha).norm();
    if residual > ATOM_RESIDUAL_TOL + floor {
        return Err(MslabError::Internal(format!(
            "atom θ = {} misses α by {residual:e}",
            atom.point.theta()
        )));
    }
    if (atom.mass * d.abs_first - 1.0).abs() > 1e-10 {
        return Err(MslabError::Internal(format!(
            "atom θ = {} has mass·|u'| = {}",
            atom.point.theta(),
            atom.mass * d.abs_first
        )));
    }
    Ok(())
}

/// All `n` atoms of `σ_α` for a degree-`n` Blaschke product.
pub fn clark_atoms_blaschke(u: &InnerFunction, alpha: Complex64) -> Result<ClarkMeasure> {
    let n = u
        .degree()
        .filter(|_| u.is_finite_blaschke())
        .ok_or_else(|| MslabError::Argument("expected a finite Blaschke product".into()))?;
    check_unimodular(alpha)?;
    let tau = alpha.arg();

    // sample on [θ0, θ0 + 2π) with θ0 slightly negative so θ = 0 is interior
    let samples = SAMPLES_PER_DEGREE * n;
    let step = TAU / samples as f64;
    let theta0 = -0.5 * step;
    let phase = |t: f64| continuous_phase(u, t).expect("Blaschke phase is total");
    let grid: Vec<(f64, f64)> = (0..=samples)
        .map(|j| {
            let t = theta0 + step * j as f64;
            (t, phase(t).phase)
        })
        .collect();
    let k0 = ((grid[0].1 - tau) / TAU).ceil() as i64;

    let atoms = (0..n as i64)
        .into_par_iter()
        .map(|k| {
            let target = tau + TAU * (k0 + k) as f64;
            let j = grid.partition_point(|&(_, p)| p <= target);
            if j == 0 || j > samples {
                return Err(MslabError::Internal(format!(
                    "failed to bracket phase target {target}"
                )));
            }
            let theta = solve_monotone(&phase, target, grid[j - 1].0, grid[j].0);
            let p = phase(theta);
            Ok(Atom {
                point: BoundaryPoint::new(theta),
                mass: 1.0 / p.derivative,
                branch: k,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    for atom in &atoms {
        check_atom(u, alpha, atom)?;
    }
    ClarkMeasure::finish(alpha, atoms, None)
}

/// Bisection down to [`BISECTION_WIDTH`], then Newton kept inside the bracket.
fn solve_monotone(phase: &impl Fn(f64) -> Phase, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if phase(mid).phase <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut theta = 0.5 * (lo + hi);
    let mut polish = 0;
    for _ in 0..100 {
        let p = phase(theta);
        let r = p.phase - target;
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let mut next = theta - r / p.derivative;
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        let stalled = (next - theta).abs() <= f64::EPSILON * theta.abs().max(1.0);
        theta = next;
        // two polishing steps past the residual target
        if r.abs() <= NEWTON_RESIDUAL {
            polish += 1;
        }
        if stalled || polish > 2 {
            break;
        }
    }
    theta
}

/// Atoms of `σ_α` for `exp(−s(ξ+z)/(ξ−z))` with branch index `|k| ≤ K`.
pub fn clark_atoms_singular(u: &InnerFunction, alpha: Complex64, window: usize) -> Result<ClarkMeasure> {
    clark_atoms_singular_at(u, alpha, window, None)
}

/// Same as [`clark_atoms_singular`]; with a base point the branch constant is
/// chosen so that `ζ` is the `k = 0` atom.
pub fn clark_atoms_singular_at(
    u: &InnerFunction,
    alpha: Complex64,
    window: usize,
    base: Option<&BoundaryPoint>,
) -> Result<ClarkMeasure> {
    let InnerFunction::SingularSingleAtom { xi_angle, mass } = *u else {
        return Err(MslabError::Argument("expected a singular inner function".into()));
    };
    check_unimodular(alpha)?;
    let tau = match base {
        Some(zeta) => {
            let p = continuous_phase(u, zeta.theta())?;
            let drift = Complex64::from_polar(1.0, p.phase) - alpha;
            if drift.norm() > 1e-8 {
                return Err(MslabError::Argument(format!(
                    "base point θ = {} is not an atom of σ_α",
                    zeta.theta()
                )));
            }
            p.phase
        }
        None => alpha.arg(),
    };
    let k = window as i64;
    let atoms: Vec<Atom> = (-k..=k)
        .into_par_iter()
        .map(|branch| {
            // −s·cot(φ/2) = τ + 2πk  ⇔  φ = 2·arccot(x), x = −(τ + 2πk)/s
            let x = -(tau + TAU * branch as f64) / mass;
            let arccot = 1.0f64.atan2(x);
            Atom {
                point: BoundaryPoint::new(xi_angle + 2.0 * arccot),
                // 1/|u′| = |e^{iθ} − ξ|²/(2s) = 2 sin²(φ/2)/s
                mass: 2.0 / (mass * (1.0 + x * x)),
                branch,
            }
        })
        .collect();
    for atom in &atoms {
        check_atom(u, alpha, atom)?;
    }
    ClarkMeasure::finish(alpha, atoms, Some(window))
}

/// Compares `Σ masses` with the Poisson-integral identity at `z = 0`,
/// `(1 − |u(0)|²)/|α − u(0)|²`.
pub fn herglotz_mass_check(u: &InnerFunction, alpha: Complex64, mu: &ClarkMeasure) -> Result<HerglotzCheck> {
    if (mu.alpha - alpha).norm() > 1e-12 {
        return Err(MslabError::Argument(format!(
            "measure was built for α = {}, not {alpha}",
            mu.alpha
        )));
    }
    for atom in &mu.atoms {
        let v = u.eval(atom.point.point())?;
        let slack = 1e-8 + 4.0 * f64::EPSILON * TAU * u.abs_derivative_closed_form(&atom.point);
        if (v - alpha).norm() > slack {
            return Err(MslabError::Argument(
                "measure atoms do not solve u = α for this inner function".into(),
            ));
        }
    }
    let u0 = u.eval(Complex64::new(0.0, 0.0))?;
    let expected = (1.0 - u0.norm_sqr()) / (alpha - u0).norm_sqr();
    let partial_sum = mu.total_mass();
    Ok(HerglotzCheck {
        partial_sum,
        expected,
        gap: expected - partial_sum,
    })
}
