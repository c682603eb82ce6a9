//! Lower bounds, the upper-bound ratio `ρ = ‖Q‖/|u′(ζ)|` and the ratio
//! `|u″|/|u′|²`.

use rayon::prelude::*;
use serde::Serialize;

use super::truncation::truncation_rows;
use super::{grid_param, Margins, Suite, SuiteReport, STABILIZATION_TOL};
use crate::clark::Window;
use crate::error::Result;
use crate::inner::{BoundaryPoint, InnerFunction};
use crate::qop::q_matrix_clark;
use crate::spectral::largest_singular_value;

pub(crate) const NORM_TOL: f64 = 1e-13;

/// `‖Q_ζ‖`: exact for finite Blaschke, the largest truncation otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub exact: bool,
    pub window: Option<usize>,
    pub stabilized: bool,
}

pub fn operator_norm(u: &InnerFunction, zeta: &BoundaryPoint, schedule: &[usize]) -> Result<NormEstimate> {
    if u.is_finite_blaschke() {
        let (_, q) = q_matrix_clark(u, zeta, Window::Full)?;
        return Ok(NormEstimate {
            value: largest_singular_value(&q, NORM_TOL)?,
            exact: true,
            window: None,
            stabilized: true,
        });
    }
    let rows = truncation_rows(u, zeta, schedule)?;
    let last = rows
        .last()
        .ok_or_else(|| crate::MslabError::Argument("empty window schedule".into()))?;
    Ok(NormEstimate {
        value: last.norm,
        exact: false,
        window: Some(last.window),
        stabilized: last.diff.is_some_and(|d| d < STABILIZATION_TOL),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub zeta_theta: f64,
    pub norm_q: f64,
    pub exact: bool,
    pub window: Option<usize>,
    pub stabilized: bool,
    pub abs_u_prime: f64,
    /// `1/dist(ζ, σ(u) ∩ 𝕋)`, zero when the boundary spectrum is empty.
    pub dist_bound: f64,
    /// `|u″(ζ)|/(2|u′(ζ)|)`.
    pub second_deriv_bound: f64,
    pub upper_ratio: f64,
    pub aleksandrov_ratio: f64,
    pub sharper: String,
    /// `‖Q‖ − max(dist_bound, second_deriv_bound)`.
    pub margin: f64,
}

pub fn bound_report(u: &InnerFunction, zeta: &BoundaryPoint, schedule: &[usize]) -> Result<BoundReport> {
    let d = u.boundary_derivatives(zeta)?;
    let dist = u.dist_to_boundary_spectrum(zeta);
    let dist_bound = if dist.is_finite() { 1.0 / dist } else { 0.0 };
    let second = d.second.norm() / (2.0 * d.abs_first);
    let norm = operator_norm(u, zeta, schedule)?;
    let sharper = if second > dist_bound {
        "second-derivative"
    } else if second < dist_bound {
        "distance"
    } else {
        "equal"
    };
    Ok(BoundReport {
        zeta_theta: zeta.theta(),
        norm_q: norm.value,
        exact: norm.exact,
        window: norm.window,
        stabilized: norm.stabilized,
        abs_u_prime: d.abs_first,
        dist_bound,
        second_deriv_bound: second,
        upper_ratio: norm.value / d.abs_first,
        aleksandrov_ratio: d.second.norm() / (d.abs_first * d.abs_first),
        sharper: sharper.to_string(),
        margin: norm.value - dist_bound.max(second),
    })
}

fn reports(u: &InnerFunction, zetas: &[BoundaryPoint], schedule: &[usize]) -> Result<Vec<BoundReport>> {
    zetas.par_iter().map(|z| bound_report(u, z, schedule)).collect()
}

fn single_zeta(zetas: &[BoundaryPoint]) -> Option<&BoundaryPoint> {
    if zetas.len() == 1 {
        zetas.first()
    } else {
        None
    }
}

/// Both lower bounds at every grid point. Truncated norms are lower bounds
/// for the true norm, so checking them is conservative.
pub fn run_lower_bound_suite(u: &InnerFunction, zetas: &[BoundaryPoint], schedule: &[usize]) -> Result<SuiteReport> {
    let rows = reports(u, zetas, schedule)?;
    let mut m = Margins::new();
    let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    m.inequality("lower_bound", worst, 0.0);
    Ok(SuiteReport::new(Suite::LowerBounds, u, single_zeta(zetas))
        .param("zeta_grid", grid_param(zetas))
        .param("schedule", schedule)
        .rows(&rows)
        .margins(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ScanRow {
    theta: f64,
    norm_q: f64,
    abs_u_prime: f64,
    rho: f64,
    /// `|u″|/(2|u′|²)`, the floor for `ρ` implied by the second-derivative bound.
    rho_floor: f64,
}

/// `ρ(ζ)` over a grid; `max ρ` is reported as the empirical constant.
pub fn run_upper_bound_scan(u: &InnerFunction, zetas: &[BoundaryPoint], schedule: &[usize]) -> Result<SuiteReport> {
    let rows: Vec<ScanRow> = reports(u, zetas, schedule)?
        .into_iter()
        .map(|r| ScanRow {
            theta: r.zeta_theta,
            norm_q: r.norm_q,
            abs_u_prime: r.abs_u_prime,
            rho: r.upper_ratio,
            rho_floor: r.second_deriv_bound / r.abs_u_prime,
        })
        .collect();
    let mut m = Margins::new();
    let worst = rows.iter().map(|r| r.rho - r.rho_floor).fold(f64::INFINITY, f64::min);
    m.inequality("rho_floor", worst, 0.0);
    let c_u = rows.iter().map(|r| r.rho).fold(0.0, f64::max);
    Ok(SuiteReport::new(Suite::UpperScan, u, single_zeta(zetas))
        .param("zeta_grid", grid_param(zetas))
        .param("schedule", schedule)
        .param("empirical_c_u", c_u)
        .rows(&rows)
        .margins(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RatioRow {
    theta: f64,
    ratio: f64,
}

/// `|u″(ζ)|/|u′(ζ)|²` over a grid; the maximum is the empirical constant.
pub fn run_one_component_ratio(u: &InnerFunction, zetas: &[BoundaryPoint]) -> Result<SuiteReport> {
    let rows = zetas
        .par_iter()
        .map(|z| {
            let d = u.boundary_derivatives(z)?;
            Ok(RatioRow {
                theta: z.theta(),
                ratio: d.second.norm() / (d.abs_first * d.abs_first),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut m = Margins::new();
    m.flag("bounded", rows.iter().all(|r| r.ratio.is_finite()));
    Ok(SuiteReport::new(Suite::Aleksandrov, u, single_zeta(zetas))
        .param("zeta_grid", grid_param(zetas))
        .param("empirical_constant", max)
        .rows(&rows)
        .margins(m))
}
