//! Window truncations `Q_K` of the singular-family operator.

use rayon::prelude::*;
use serde::Serialize;

use super::bounds::NORM_TOL;
use super::{Margins, Suite, SuiteReport, MONOTONE_TOL, STABILIZATION_TOL};
use crate::clark::Window;
use crate::error::{MslabError, Result};
use crate::inner::{BoundaryPoint, InnerFunction};
use crate::qop::q_matrix_clark;
use crate::spectral::largest_singular_value;

/// Upper edge for `‖Q_stab‖·|ζ − ξ|²`.
pub const PRODUCT_CAP: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub window: usize,
    pub dim: usize,
    pub norm: f64,
    /// `‖Q_K‖ − ‖Q_{K_prev}‖`.
    pub diff: Option<f64>,
}

/// `‖Q_K‖` for each `K` of a strictly increasing schedule.
pub fn truncation_rows(u: &InnerFunction, zeta: &BoundaryPoint, schedule: &[usize]) -> Result<Vec<TruncationRow>> {
    if u.is_finite_blaschke() {
        return Err(MslabError::Argument("truncation applies to the singular family".into()));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MslabError::Argument("window schedule must be strictly increasing".into()));
    }
    let norms = schedule
        .par_iter()
        .map(|&k| {
            let (_, q) = q_matrix_clark(u, zeta, Window::Symmetric(k))?;
            Ok((q.dim(), largest_singular_value(&q, NORM_TOL)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(schedule
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(i, (&window, &(dim, norm)))| TruncationRow {
            window,
            dim,
            norm,
            diff: (i > 0).then(|| norm - norms[i - 1].1),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationStudy {
    pub rows: Vec<TruncationRow>,
    /// First window whose successive difference is below the tolerance.
    pub stabilized_at: Option<usize>,
    /// Norm at `stabilized_at`, or at the last window when it never stabilizes.
    pub q_stab: f64,
    pub chord: f64,
    pub lower_bound: f64,
    pub product: f64,
}

pub fn truncation_study(
    u: &InnerFunction,
    zeta: &BoundaryPoint,
    schedule: &[usize],
) -> Result<(TruncationStudy, SuiteReport)> {
    let rows = truncation_rows(u, zeta, schedule)?;
    let d = u.boundary_derivatives(zeta)?;
    let chord = u.dist_to_boundary_spectrum(zeta);
    let stab_row = rows.iter().find(|r| r.diff.is_some_and(|x| x < STABILIZATION_TOL)).cloned();
    let q_stab = stab_row.as_ref().or(rows.last()).map_or(0.0, |r| r.norm);
    let lower_bound = (1.0 / chord).max(d.second.norm() / (2.0 * d.abs_first));
    let product = q_stab * chord * chord;

    let mut m = Margins::new();
    let worst_drop = rows.iter().filter_map(|r| r.diff).fold(0.0, |acc: f64, x| acc.max(-x));
    m.within("monotone", worst_drop, MONOTONE_TOL);
    let last_diff = rows.last().and_then(|r| r.diff).unwrap_or(f64::INFINITY);
    m.within("stabilization", if stab_row.is_some() { 0.0 } else { last_diff }, STABILIZATION_TOL);
    m.at_least("lower_bound", q_stab, (1.0 - 1e-9) * lower_bound);
    m.at_least("product_low", product, 1.0 - 1e-6);
    m.at_least("product_high", PRODUCT_CAP, product);

    let study = TruncationStudy {
        rows,
        stabilized_at: stab_row.as_ref().map(|r| r.window),
        q_stab,
        chord,
        lower_bound,
        product,
    };
    let report = SuiteReport::new(Suite::Truncation, u, Some(zeta))
        .param("schedule", schedule)
        .param("stabilized_at", study.stabilized_at)
        .param("q_stab", q_stab)
        .param("product", product)
        .param("lower_bound", lower_bound)
        .rows(&study.rows)
        .margins(m);
    Ok((study, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn window_zero_is_the_corner() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        let rows = truncation_rows(&u, &BoundaryPoint::new(PI), &[0, 1]).unwrap();
        assert!((rows[0].norm - 0.25).abs() < 1e-15);
        assert_eq!(rows[0].dim, 1);
        assert!(rows[1].diff.unwrap() > 0.0);
    }

    #[test]
    fn short_schedule_is_monotone_and_bounded() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        let (s, r) = truncation_study(&u, &BoundaryPoint::new(PI), &[4, 8, 16, 32, 64]).unwrap();
        assert!(r.margin("monotone").unwrap() >= 0.0);
        assert!(s.q_stab >= 0.5);
        assert!(s.product >= 1.0 && s.product <= PRODUCT_CAP);
        assert!(r.margin("lower_bound").unwrap() >= 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let u = InnerFunction::singular(0.0, 1.0).unwrap();
        assert!(truncation_rows(&u, &BoundaryPoint::new(PI), &[8, 8]).is_err());
        let b = InnerFunction::monomial(2).unwrap();
        assert!(truncation_rows(&b, &BoundaryPoint::new(PI), &[8]).is_err());
    }
}
