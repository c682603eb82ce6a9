//! Experiment drivers. Every suite returns a [`SuiteReport`] with the schema
//! `{suite, inner_spec, zeta_theta, params, rows, margins, seed, pass}`.

pub mod bounds;
pub mod identities;
pub mod truncation;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{MslabError, Result};
use crate::format::{sig17, to_json_string};
use crate::inner::{BoundaryPoint, InnerFunction};

pub use bounds::{
    bound_report, operator_norm, run_lower_bound_suite, run_one_component_ratio, run_upper_bound_scan,
    BoundReport, NormEstimate,
};
pub use identities::{
    area_dirichlet, derivative_functional, run_derivative_functional, run_dirichlet_suite, run_embedding_norm,
    run_resolvent_suite, run_spectrum_suite, DerivativeFunctional, DirichletReport, DiskGrid,
};
pub use truncation::{truncation_rows, truncation_study, TruncationRow, TruncationStudy};

/// Slack allowed on inequality margins.
pub const MARGIN_SLACK: f64 = 1e-9;
pub const STABILIZATION_TOL: f64 = 1e-6;
pub const MONOTONE_TOL: f64 = 1e-12;
/// Doubling window schedule `2⁵, …, 2¹²`.
pub const DEFAULT_SCHEDULE: [usize; 8] = [32, 64, 128, 256, 512, 1024, 2048, 4096];

/// Named margins; each is nonnegative exactly when its check passes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Margins {
    values: BTreeMap<String, Option<f64>>,
    pass: bool,
    any: bool,
}

impl Margins {
    pub fn new() -> Self {
        Self {
            values: BTreeMap::new(),
            pass: true,
            any: false,
        }
    }

    fn record(&mut self, name: &str, margin: f64, ok: bool) {
        self.any = true;
        self.pass &= ok;
        self.values
            .insert(name.to_string(), if margin.is_finite() { Some(margin) } else { None });
    }

    /// `lhs ≥ rhs` up to [`MARGIN_SLACK`]; stores `lhs − rhs`.
    pub fn inequality(&mut self, name: &str, lhs: f64, rhs: f64) {
        let m = lhs - rhs;
        self.record(name, m, m >= -MARGIN_SLACK);
    }

    /// `lhs ≥ rhs` with no slack; stores `lhs − rhs`.
    pub fn at_least(&mut self, name: &str, lhs: f64, rhs: f64) {
        let m = lhs - rhs;
        self.record(name, m, m >= 0.0);
    }

    /// `gap ≤ tol`; stores `tol − gap`.
    pub fn within(&mut self, name: &str, gap: f64, tol: f64) {
        let m = tol - gap;
        self.record(name, m, m >= 0.0);
    }

    /// Boolean check; stores `0` or `−1`.
    pub fn flag(&mut self, name: &str, ok: bool) {
        self.record(name, if ok { 0.0 } else { -1.0 }, ok);
    }

    pub fn pass(&self) -> bool {
        self.pass
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub inner_spec: String,
    pub zeta_theta: Option<f64>,
    pub params: BTreeMap<String, Value>,
    pub rows: Vec<Value>,
    pub margins: BTreeMap<String, Option<f64>>,
    pub seed: Option<u64>,
    pub pass: bool,
}

impl SuiteReport {
    pub fn new(suite: Suite, u: &InnerFunction, zeta: Option<&BoundaryPoint>) -> Self {
        Self {
            suite: suite.to_string(),
            inner_spec: u.to_string(),
            zeta_theta: zeta.map(|z| z.theta()),
            params: BTreeMap::new(),
            rows: Vec::new(),
            margins: BTreeMap::new(),
            seed: None,
            pass: true,
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn rows<T: Serialize>(mut self, rows: &[T]) -> Self {
        self.rows = rows.iter().map(|r| serde_json::to_value(r).unwrap_or(Value::Null)).collect();
        self
    }

    pub fn margins(mut self, m: Margins) -> Self {
        self.pass = m.pass;
        self.margins = m.values;
        self
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins.get(name).copied().flatten()
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    /// One CSV row per report row; columns follow the row fields in order of
    /// first appearance.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<String> = Vec::new();
        for r in &self.rows {
            if let Value::Object(map) = r {
                for k in map.keys() {
                    if !keys.contains(k) {
                        keys.push(k.clone());
                    }
                }
            }
        }
        let mut out = keys.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = keys.iter().map(|k| csv_cell(r.get(k).unwrap_or(&Value::Null))).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) if !n.is_f64() => i.to_string(),
            (_, Some(u), _) if !n.is_f64() => u.to_string(),
            (_, _, Some(f)) => sig17(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(csv_cell).collect::<Vec<_>>().join(";"),
        Value::Object(_) => v.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    LowerBounds,
    UpperScan,
    Aleksandrov,
    DerivativeFunctional,
    Resolvent,
    Dirichlet,
    Embedding,
    Spectrum,
    Truncation,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::LowerBounds,
        Suite::UpperScan,
        Suite::Aleksandrov,
        Suite::DerivativeFunctional,
        Suite::Resolvent,
        Suite::Dirichlet,
        Suite::Embedding,
        Suite::Spectrum,
        Suite::Truncation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::LowerBounds => "lower-bounds",
            Suite::UpperScan => "upper-scan",
            Suite::Aleksandrov => "aleksandrov",
            Suite::DerivativeFunctional => "derivative-functional",
            Suite::Resolvent => "resolvent",
            Suite::Dirichlet => "dirichlet",
            Suite::Embedding => "embedding",
            Suite::Spectrum => "spectrum",
            Suite::Truncation => "truncation",
        }
    }

    /// Whether the suite is defined for `u`.
    pub fn applies_to(&self, u: &InnerFunction) -> bool {
        match self {
            Suite::Resolvent | Suite::Dirichlet => u.is_finite_blaschke(),
            Suite::Truncation => !u.is_finite_blaschke(),
            _ => true,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = MslabError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                MslabError::Parse(format!("unknown suite '{s}' (expected one of: all, {})", names.join(", ")))
            })
    }
}

/// Shared knobs for the suites.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub quad_nodes: usize,
    pub schedule: Vec<usize>,
    pub seed: u64,
    pub vectors: usize,
    pub disk: DiskGrid,
    pub disk_refined: DiskGrid,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            quad_nodes: 4096,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            seed: 1,
            vectors: 20,
            disk: DiskGrid { radial: 64, angular: 4096 },
            disk_refined: DiskGrid { radial: 128, angular: 8192 },
        }
    }
}

/// Runs one suite at a single base point.
pub fn run_suite(suite: Suite, u: &InnerFunction, zeta: &BoundaryPoint, opts: &VerifyOptions) -> Result<SuiteReport> {
    if !suite.applies_to(u) {
        return Err(MslabError::Argument(format!("suite '{suite}' does not apply to {u}")));
    }
    let z = std::slice::from_ref(zeta);
    match suite {
        Suite::LowerBounds => run_lower_bound_suite(u, z, &opts.schedule),
        Suite::UpperScan => run_upper_bound_scan(u, z, &opts.schedule),
        Suite::Aleksandrov => run_one_component_ratio(u, z),
        Suite::DerivativeFunctional => run_derivative_functional(u, zeta, opts),
        Suite::Resolvent => run_resolvent_suite(u, zeta, opts.seed, opts.vectors),
        Suite::Dirichlet => run_dirichlet_suite(u, zeta, None, opts).map(|(_, r)| r),
        Suite::Embedding => run_embedding_norm(u, zeta, &opts.schedule).map(|(_, r)| r),
        Suite::Spectrum => run_spectrum_suite(u, zeta),
        Suite::Truncation => truncation_study(u, zeta, &opts.schedule).map(|(_, r)| r),
    }
}

/// Every suite that applies to `u`, in canonical order.
pub fn run_all(u: &InnerFunction, zeta: &BoundaryPoint, opts: &VerifyOptions) -> Result<Vec<SuiteReport>> {
    Suite::ALL
        .iter()
        .filter(|s| s.applies_to(u))
        .map(|s| run_suite(*s, u, zeta, opts))
        .collect()
}

/// `θ_m = 2π(m + ½)/n`, dropping points closer than `min_dist` to `σ(u) ∩ 𝕋`.
pub fn theta_grid(u: &InnerFunction, n: usize, min_dist: f64) -> Vec<BoundaryPoint> {
    (0..n)
        .map(|m| BoundaryPoint::new(std::f64::consts::TAU * (m as f64 + 0.5) / n as f64))
        .filter(|z| u.dist_to_boundary_spectrum(z) >= min_dist)
        .collect()
}

pub(crate) fn grid_param(zetas: &[BoundaryPoint]) -> Value {
    json!(zetas.iter().map(|z| z.theta()).collect::<Vec<_>>())
}

pub(crate) fn rel_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
