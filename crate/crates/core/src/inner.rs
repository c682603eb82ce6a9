//! Inner functions on the unit disk.
//!
//! Two families are supported: finite Blaschke products
//! `c · ∏ (z − a_k)/(1 − ā_k z)` and single-atom singular inner functions
//! `exp(−s (ξ + z)/(ξ − z))`. Both are analytic across the unit circle away
//! from their boundary spectrum, so boundary derivatives are plain
//! derivatives of closed forms.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{MslabError, Result};

/// Blaschke zeros must stay this far inside the disk.
pub const ZERO_RADIUS_GUARD: f64 = 1e-12;
/// Points within this distance of a boundary-spectrum point are rejected.
const SPECTRUM_HIT: f64 = 1e-12;

/// A point `ζ = e^{iθ}` of the unit circle, stored by its angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    theta: f64,
}

impl BoundaryPoint {
    /// Normalizes `theta` into `[0, 2π)`.
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly 2π for tiny negative inputs
        if t >= TAU {
            t = 0.0;
        }
        Self { theta: t }
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::new(deg.to_radians())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn point(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.theta)
    }

    /// Chordal distance `|ζ − η|`.
    pub fn chord(&self, other: &BoundaryPoint) -> f64 {
        2.0 * ((self.theta - other.theta) / 2.0).sin().abs()
    }

    /// Distance between the two angles measured along the circle, in `[0, π]`.
    pub fn arc_distance(&self, other: &BoundaryPoint) -> f64 {
        let d = (self.theta - other.theta).rem_euclid(TAU);
        d.min(TAU - d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InnerFunction {
    FiniteBlaschke {
        zeros: Vec<Complex64>,
        factor: Complex64,
    },
    SingularSingleAtom {
        xi_angle: f64,
        mass: f64,
    },
}

/// Value and first two derivatives of `u` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: Complex64,
    pub first: Complex64,
    pub second: Complex64,
}

/// `u(ζ)`, `u′(ζ)`, `u″(ζ)` and `|u′(ζ)|` at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDerivatives {
    pub value: Complex64,
    pub first: Complex64,
    pub second: Complex64,
    pub abs_first: f64,
}

/// `σ(u)`: interior zeros (with multiplicity) and boundary spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDescription {
    pub interior_points: Vec<Complex64>,
    pub boundary_points: Vec<BoundaryPoint>,
}

impl InnerFunction {
    pub fn blaschke(zeros: Vec<Complex64>, factor: Complex64) -> Result<Self> {
        if zeros.is_empty() {
            return Err(MslabError::Argument(
                "a Blaschke product needs at least one zero".into(),
            ));
        }
        for a in &zeros {
            if !(a.re.is_finite() && a.im.is_finite()) || a.norm() >= 1.0 - ZERO_RADIUS_GUARD {
                return Err(MslabError::Argument(format!(
                    "Blaschke zero {a} is not inside |z| < 1 - {ZERO_RADIUS_GUARD:e}"
                )));
            }
        }
        if !((factor.norm() - 1.0).abs() <= 1e-12) {
            return Err(MslabError::Argument(format!(
                "unimodular factor {factor} has modulus {}",
                factor.norm()
            )));
        }
        Ok(Self::FiniteBlaschke { zeros, factor })
    }

    /// Blaschke product with real zeros and factor 1.
    pub fn blaschke_real(zeros: &[f64]) -> Result<Self> {
        Self::blaschke(
            zeros.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Complex64::new(1.0, 0.0),
        )
    }

    /// `z^n`.
    pub fn monomial(n: usize) -> Result<Self> {
        Self::blaschke(vec![Complex64::new(0.0, 0.0); n], Complex64::new(1.0, 0.0))
    }

    pub fn singular(xi_angle: f64, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(MslabError::Argument(format!(
                "singular mass must be positive, got {mass}"
            )));
        }
        if !xi_angle.is_finite() {
            return Err(MslabError::Argument("atom angle must be finite".into()));
        }
        Ok(Self::SingularSingleAtom {
            xi_angle: BoundaryPoint::new(xi_angle).theta(),
            mass,
        })
    }

    /// Number of zeros for a Blaschke product, `None` for the singular family.
    pub fn degree(&self) -> Option<usize> {
        match self {
            Self::FiniteBlaschke { zeros, .. } => Some(zeros.len()),
            Self::SingularSingleAtom { .. } => None,
        }
    }

    pub fn is_finite_blaschke(&self) -> bool {
        matches!(self, Self::FiniteBlaschke { .. })
    }

    pub fn spectrum(&self) -> SpectrumDescription {
        match self {
            Self::FiniteBlaschke { zeros, .. } => SpectrumDescription {
                interior_points: zeros.clone(),
                boundary_points: Vec::new(),
            },
            Self::SingularSingleAtom { xi_angle, .. } => SpectrumDescription {
                interior_points: Vec::new(),
                boundary_points: vec![BoundaryPoint::new(*xi_angle)],
            },
        }
    }

    /// `dist(ζ, σ(u) ∩ 𝕋)`, `+∞` when the boundary spectrum is empty.
    pub fn dist_to_boundary_spectrum(&self, zeta: &BoundaryPoint) -> f64 {
        self.spectrum()
            .boundary_points
            .iter()
            .map(|p| zeta.chord(p))
            .fold(f64::INFINITY, f64::min)
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1.0 + 1e-12 {
            return Err(MslabError::Domain(format!(
                "point {z} lies outside the closed unit disk"
            )));
        }
        if let Self::SingularSingleAtom { xi_angle, .. } = self {
            let xi = Complex64::from_polar(1.0, *xi_angle);
            if (z - xi).norm() < SPECTRUM_HIT {
                return Err(MslabError::Domain(format!(
                    "point {z} is on the boundary spectrum {{{xi}}}"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_domain(z)?;
        Ok(self.eval_unchecked(z))
    }

    pub(crate) fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        match self {
            Self::FiniteBlaschke { zeros, factor } => zeros
                .iter()
                .fold(*factor, |acc, a| acc * (z - a) / (1.0 - a.conj() * z)),
            Self::SingularSingleAtom { xi_angle, mass } => {
                let xi = Complex64::from_polar(1.0, *xi_angle);
                (-*mass * herglotz_kernel(xi, z)).exp()
            }
        }
    }

    /// `u`, `u′`, `u″` at any point of the closed disk off the boundary spectrum.
    pub fn jet(&self, z: Complex64) -> Result<Jet> {
        self.check_domain(z)?;
        Ok(self.jet_unchecked(z))
    }

    pub(crate) fn jet_unchecked(&self, z: Complex64) -> Jet {
        match self {
            Self::FiniteBlaschke { zeros, factor } => {
                // product rule over the Möbius factors, safe at the zeros themselves
                let mut p = *factor;
                let mut dp = Complex64::new(0.0, 0.0);
                let mut ddp = Complex64::new(0.0, 0.0);
                for a in zeros {
                    let d = 1.0 - a.conj() * z;
                    let w = 1.0 - a.norm_sqr();
                    let f = (z - a) / d;
                    let df = w / (d * d);
                    let ddf = 2.0 * a.conj() * w / (d * d * d);
                    ddp = ddp * f + 2.0 * dp * df + p * ddf;
                    dp = dp * f + p * df;
                    p *= f;
                }
                Jet {
                    value: p,
                    first: dp,
                    second: ddp,
                }
            }
            Self::SingularSingleAtom { xi_angle, mass } => {
                let xi = Complex64::from_polar(1.0, *xi_angle);
                let d = xi - z;
                let value = (-*mass * herglotz_kernel(xi, z)).exp();
                let g = -2.0 * *mass * xi / (d * d);
                let dg = -4.0 * *mass * xi / (d * d * d);
                Jet {
                    value,
                    first: g * value,
                    second: (dg + g * g) * value,
                }
            }
        }
    }

    pub fn boundary_derivatives(&self, zeta: &BoundaryPoint) -> Result<BoundaryDerivatives> {
        let z = zeta.point();
        let jet = self.jet(z)?;
        let abs_first = jet.first.norm();
        if let Self::FiniteBlaschke { zeros, .. } = self {
            let poisson: f64 = zeros
                .iter()
                .map(|a| (1.0 - a.norm_sqr()) / (z - a).norm_sqr())
                .sum();
            if (poisson - abs_first).abs() > 1e-10 * poisson.max(1.0) {
                return Err(MslabError::Internal(format!(
                    "|u'(ζ)| = {abs_first} disagrees with the Poisson sum {poisson}"
                )));
            }
        }
        Ok(BoundaryDerivatives {
            value: jet.value,
            first: jet.first,
            second: jet.second,
            abs_first,
        })
    }

    /// `|u′(ζ)| = Σ (1 − |a_k|²)/|ζ − a_k|²` for Blaschke products and
    /// `2s/|ζ − ξ|²` for the singular family.
    pub fn abs_derivative_closed_form(&self, zeta: &BoundaryPoint) -> f64 {
        let z = zeta.point();
        match self {
            Self::FiniteBlaschke { zeros, .. } => zeros
                .iter()
                .map(|a| (1.0 - a.norm_sqr()) / (z - a).norm_sqr())
                .sum(),
            Self::SingularSingleAtom { xi_angle, mass } => {
                2.0 * mass / (z - Complex64::from_polar(1.0, *xi_angle)).norm_sqr()
            }
        }
    }
}

/// `(ξ + z)/(ξ − z)` split as `((1 − |z|²) + 2i·Im(z ξ̄))/|ξ − z|²`, which avoids
/// cancellation near `ξ`. Points within a few ulps of the circle are treated
/// as on it, so the real part vanishes there exactly.
fn herglotz_kernel(xi: Complex64, z: Complex64) -> Complex64 {
    let d2 = (xi - z).norm_sqr();
    let mut radial = 1.0 - z.norm_sqr();
    if radial.abs() <= 4.0 * f64::EPSILON {
        radial = 0.0;
    }
    Complex64::new(radial, 2.0 * (z * xi.conj()).im) / d2
}

/// Parses `re`, `im i`, `re±im i`. A bare `i` means the imaginary unit.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || MslabError::Parse(format!("cannot parse complex number {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|r| Complex64::new(r, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that does not follow an exponent marker
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re_part, im_part) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        t => t.parse::<f64>().map_err(|_| bad())?,
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse::<f64>().map_err(|_| bad())?
    };
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

fn fmt_complex(z: &Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}{}i", z.re, z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Spec-string grammar:
/// `blaschke:<c>[,<c>...][;factor=<c>]` or `singular:xi=<radians>,s=<mass>`.
impl FromStr for InnerFunction {
    type Err = MslabError;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| MslabError::Parse(format!("missing family prefix in {spec:?}")))?;
        match kind.trim() {
            "blaschke" => {
                let (zero_list, options) = match rest.split_once(';') {
                    Some((z, o)) => (z, Some(o)),
                    None => (rest, None),
                };
                let zeros = zero_list
                    .split(',')
                    .map(parse_complex)
                    .collect::<Result<Vec<_>>>()?;
                let mut factor = Complex64::new(1.0, 0.0);
                if let Some(opts) = options {
                    for opt in opts.split(';') {
                        match opt.split_once('=') {
                            Some(("factor", v)) => factor = parse_complex(v)?,
                            _ => {
                                return Err(MslabError::Parse(format!(
                                    "unknown Blaschke option {opt:?}"
                                )))
                            }
                        }
                    }
                }
                Self::blaschke(zeros, factor).map_err(|e| match e {
                    MslabError::Argument(m) => MslabError::Parse(m),
                    other => other,
                })
            }
            "singular" => {
                let mut xi = None;
                let mut mass = None;
                for field in rest.split(',') {
                    let (k, v) = field.split_once('=').ok_or_else(|| {
                        MslabError::Parse(format!("expected key=value, got {field:?}"))
                    })?;
                    let v: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| MslabError::Parse(format!("bad number {v:?}")))?;
                    match k.trim() {
                        "xi" => xi = Some(v),
                        "s" => mass = Some(v),
                        other => {
                            return Err(MslabError::Parse(format!("unknown key {other:?}")))
                        }
                    }
                }
                let xi = xi.ok_or_else(|| MslabError::Parse("missing xi=".into()))?;
                let mass = mass.ok_or_else(|| MslabError::Parse("missing s=".into()))?;
                Self::singular(xi, mass).map_err(|e| match e {
                    MslabError::Argument(m) => MslabError::Parse(m),
                    other => other,
                })
            }
            other => Err(MslabError::Parse(format!("unknown inner family {other:?}"))),
        }
    }
}

impl fmt::Display for InnerFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FiniteBlaschke { zeros, factor } => {
                let list: Vec<String> = zeros.iter().map(fmt_complex).collect();
                write!(f, "blaschke:{}", list.join(","))?;
                if *factor != Complex64::new(1.0, 0.0) {
                    write!(f, ";factor={}", fmt_complex(factor))?;
                }
                Ok(())
            }
            Self::SingularSingleAtom { xi_angle, mass } => {
                write!(f, "singular:xi={xi_angle},s={mass}")
            }
        }
    }
}
