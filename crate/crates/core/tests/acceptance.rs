//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit if any fail.
//!
//! Runs under `harness = false` so every line is printed regardless of the
//! outcome of the others.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;

use mslab::clark::{clark_atoms_blaschke, ClarkMeasure, Window};
use mslab::modelspace::{clark_onb, norm_sq, tm_basis, Analytic, CircleQuadrature};
use mslab::qop::{
    apply_difference_quotient, clark_setup, q_matrix_clark, q_matrix_quadrature, resolvent_matrix, BasisTag,
    OperatorMatrix, Provenance,
};
use mslab::rng::Lcg64;
use mslab::spectral::{largest_singular_value, smallest_singular_value};
use mslab::verify::bounds::run_one_component_ratio;
use mslab::verify::identities::{area_dirichlet, derivative_functional, run_resolvent_suite, DiskGrid};
use mslab::verify::truncation::truncation_rows;
use mslab::verify::{theta_grid, DEFAULT_SCHEDULE};
use mslab::{BoundaryPoint, Complex64, InnerFunction, MslabError};
use nalgebra::DMatrix;

const SVD_TOL: f64 = 1e-13;
const QUAD_NODES: usize = 4096;

type Outcome = std::result::Result<Checks, MslabError>;
type Criterion = (&'static str, fn() -> Outcome);

/// Named sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, label: &str, ok: bool, value: impl std::fmt::Display) {
        if !ok {
            self.failed.push(format!("{label} ({value})"));
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn seeded_blaschke(rng: &mut Lcg64, degree: usize) -> InnerFunction {
    let zeros = (0..degree).map(|_| rng.disk_point(0.9)).collect();
    InnerFunction::blaschke(zeros, c(1.0, 0.0)).expect("zeros inside the disk")
}

fn half() -> InnerFunction {
    InnerFunction::blaschke_real(&[0.5]).unwrap()
}

fn z_squared() -> InnerFunction {
    InnerFunction::monomial(2).unwrap()
}

fn singular_fixture() -> InnerFunction {
    InnerFunction::singular(0.0, 1.0).unwrap()
}

/// Seeded degree-4 product and its base point.
fn degree_four() -> (InnerFunction, BoundaryPoint) {
    let mut rng = Lcg64::new(4);
    let u = seeded_blaschke(&mut rng, 4);
    (u, BoundaryPoint::new(TAU * rng.next_unit()))
}

/// Seeded degree-6 product with three base points.
fn degree_six() -> (InnerFunction, Vec<BoundaryPoint>) {
    let mut rng = Lcg64::new(6);
    let u = seeded_blaschke(&mut rng, 6);
    let zetas = (0..3).map(|_| BoundaryPoint::new(TAU * rng.next_unit())).collect();
    (u, zetas)
}

/// Five seeded products of degrees 2 through 6.
fn cross_route_family() -> Vec<(InnerFunction, BoundaryPoint)> {
    let mut rng = Lcg64::new(2024);
    (2..=6)
        .map(|d| {
            let u = seeded_blaschke(&mut rng, d);
            (u, BoundaryPoint::new(TAU * rng.next_unit()))
        })
        .collect()
}

fn zeros_of(u: &InnerFunction) -> Vec<Complex64> {
    match u {
        InnerFunction::FiniteBlaschke { zeros, .. } => zeros.clone(),
        _ => Vec::new(),
    }
}

fn sq_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn max_entry_gap(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn degree_one_fixture() -> Outcome {
    let mut out = Checks::default();
    let u = half();
    let zeta = BoundaryPoint::new(PI);
    let (_, q) = q_matrix_clark(&u, &zeta, Window::Full)?;
    out.check("1x1 Clark matrix", q.dim() == 1 && (q.entry(0, 0) - 1.0 / 3.0).norm() <= 1e-12, q.entry(0, 0));
    let norm = largest_singular_value(&q, SVD_TOL)?;
    out.check("norm 1/3", (norm - 1.0 / 3.0).abs() <= 1e-12, norm);

    // u = (z − a)/(1 − az): |u′(−1)| = (1 − a²)/(1 + a)², |u″(−1)| = 2a(1 − a²)/(1 + a)³
    let a: f64 = 0.5;
    let up = (1.0 - a * a) / (1.0 + a).powi(2);
    let upp = 2.0 * a * (1.0 - a * a) / (1.0 + a).powi(3);
    let bound = upp / (2.0 * up);
    out.check("equality with second-derivative bound", (norm - bound).abs() <= 1e-12, norm - bound);

    let r = largest_singular_value(&resolvent_matrix(&q, &zeta), SVD_TOL)?;
    let r2 = r * r;
    out.check("resolvent norm² 4/9", (r2 - 4.0 / 9.0).abs() <= 1e-12, r2);
    out.check("upper edge attained", (r2 - (norm * norm + up)).abs() <= 1e-12, r2 - (norm * norm + up));
    out.note(format!("‖Q‖ = {norm:.15}, ‖R‖² = {r2:.15}"));
    Ok(out)
}

fn z_squared_fixture() -> Outcome {
    let mut out = Checks::default();
    let u = z_squared();
    let zeta = BoundaryPoint::new(0.0);
    let (mu, q) = q_matrix_clark(&u, &zeta, Window::Full)?;
    let ascending = mu.atoms.windows(2).all(|w| w[0].point.theta() < w[1].point.theta());
    out.check("ascending atoms", ascending, format!("{:?}", mu.atoms.iter().map(|a| a.point.theta()).collect::<Vec<_>>()));
    let expected = DMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(-0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0)]);
    let gap = max_entry_gap(&q.to_dense(), &expected);
    out.check("Clark matrix", gap <= 1e-12, gap);

    let norm = largest_singular_value(&q, SVD_TOL)?;
    out.check("norm 1", (norm - 1.0).abs() <= 1e-10, norm);
    let trace = q.trace().norm();
    let det = q.to_dense().determinant().norm();
    out.check("trace vanishes", trace <= 1e-12, trace);
    out.check("determinant vanishes", det <= 1e-12, det);

    let r = largest_singular_value(&resolvent_matrix(&q, &zeta), SVD_TOL)?;
    let r2 = r * r;
    let golden = (3.0 + 5f64.sqrt()) / 2.0;
    out.check("resolvent norm²", (r2 - golden).abs() <= 1e-10, r2);
    out.check("sandwich", (1.5..=3.0).contains(&r2), r2);
    out.note(format!("‖R‖² = {r2:.15}"));
    Ok(out)
}

fn cross_route_matrices() -> Outcome {
    let mut out = Checks::default();
    let mut worst = 0.0f64;
    for (u, zeta) in cross_route_family() {
        let (mu, lemma) = q_matrix_clark(&u, &zeta, Window::Full)?;
        let basis = clark_onb(&u, &mu)?;
        let quad = CircleQuadrature::for_model_space(QUAD_NODES, &u, &zeta)?;
        let numeric = q_matrix_quadrature(&u, &zeta, &basis, &quad)?;
        let gap = max_entry_gap(&lemma.to_dense(), &numeric.to_dense());
        out.check(&format!("degree {}", lemma.dim()), gap <= 1e-8, gap);
        worst = worst.max(gap);
    }
    out.note(format!("worst entry gap {worst:.3e}"));
    Ok(out)
}

fn eigenpairs() -> Outcome {
    let mut out = Checks::default();
    let (u, zetas) = degree_six();
    let zeros = zeros_of(&u);
    let distinct = zeros.iter().enumerate().all(|(i, a)| zeros[..i].iter().all(|b| (a - b).norm() > 1e-6));
    out.check("distinct zeros", distinct, "");
    let (mut worst_pair, mut worst_sigma) = (0.0f64, 0.0f64);
    for zeta in &zetas {
        let (basis, q) = clark_setup(&u, zeta, Window::Full)?;
        let quad = CircleQuadrature::for_model_space(QUAD_NODES, &u, zeta)?;
        let norm = largest_singular_value(&q, SVD_TOL)?;
        let dense = q.to_dense();
        for a in &zeros {
            let ab = a.conj();
            let cauchy = move |z: Complex64| 1.0 / (1.0 - ab * z);
            let coeffs = basis.project(&cauchy, &quad);
            let lambda = ab / (1.0 - ab * zeta.point());
            let image = q.apply(&coeffs);
            let diff: Vec<Complex64> = image.iter().zip(&coeffs).map(|(x, y)| x - lambda * y).collect();
            let residual = (sq_norm(&diff) / sq_norm(&coeffs)).sqrt();
            out.check(&format!("eigenpair θ={:.4} a={a:.4}", zeta.theta()), residual < 1e-9, residual);
            worst_pair = worst_pair.max(residual);

            let shifted = DMatrix::<Complex64>::identity(6, 6) * lambda - &dense;
            let op = OperatorMatrix::dense(shifted, BasisTag::Clark, Provenance::Derived);
            let sigma = smallest_singular_value(&op, SVD_TOL)?;
            let tol = 1e-8 * (1.0 + norm);
            out.check(&format!("σ_min θ={:.4} λ={lambda:.4}", zeta.theta()), sigma < tol, sigma);
            worst_sigma = worst_sigma.max(sigma / tol);
        }
    }
    out.note(format!("worst residual {worst_pair:.3e}, worst σ_min/tol {worst_sigma:.3e}"));
    Ok(out)
}

fn derivative_functional_routes() -> Outcome {
    let mut out = Checks::default();
    let expected = 1.0 / (3.0 * 3f64.sqrt());
    let u = half();
    let zeta = BoundaryPoint::new(PI);
    let quad = CircleQuadrature::for_model_space(QUAD_NODES, &u, &zeta)?;
    let d = derivative_functional(&u, &zeta, &tm_basis(&u)?, &quad)?;
    out.check("degree-1 routes agree", rel(d.route_a, d.route_b) <= 1e-8, rel(d.route_a, d.route_b));
    out.check("degree-1 value", rel(d.route_a, expected) <= 1e-8, d.route_a);
    out.note(format!("degree 1: {:.10} / {:.10}", d.route_a, d.route_b));

    let (u, zeta) = degree_four();
    let quad = CircleQuadrature::for_model_space(QUAD_NODES, &u, &zeta)?;
    let d = derivative_functional(&u, &zeta, &tm_basis(&u)?, &quad)?;
    out.check("degree-4 routes agree", rel(d.route_a, d.route_b) <= 1e-8, rel(d.route_a, d.route_b));
    out.note(format!("degree 4: {:.10} / {:.10}", d.route_a, d.route_b));
    Ok(out)
}

fn resolvent_identity() -> Outcome {
    let mut out = Checks::default();
    let (u, zeta) = degree_four();
    let report = run_resolvent_suite(&u, &zeta, 1, 20)?;
    out.check("20 vectors", report.rows.len() == 20, report.rows.len());
    let worst = report
        .rows
        .iter()
        .map(|r| r["rel_gap"].as_f64().unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    out.check("per-vector identity", worst <= 1e-9, worst);
    for name in ["sandwich_lower", "sandwich_upper"] {
        let m = report.margin(name).unwrap_or(f64::NEG_INFINITY);
        out.check(name, m >= -1e-9, m);
    }
    out.note(format!("worst relative gap {worst:.3e}"));
    Ok(out)
}

fn dirichlet_identity() -> Outcome {
    let mut out = Checks::default();
    let mut fixtures = vec![(half(), BoundaryPoint::new(PI)), (z_squared(), BoundaryPoint::new(0.0)), degree_four()];
    let (u6, zetas) = degree_six();
    fixtures.extend(zetas.into_iter().map(|z| (u6.clone(), z)));
    fixtures.extend(cross_route_family());

    let mut rng = Lcg64::new(7);
    let mut worst = 0.0f64;
    for (u, zeta) in &fixtures {
        let (basis, q) = clark_setup(u, zeta, Window::Full)?;
        let quad = CircleQuadrature::for_model_space(QUAD_NODES, u, zeta)?;
        let gamma = rng.unit_vector(q.dim());
        let f = basis.combine(&gamma);
        let circle = norm_sq(&apply_difference_quotient(&f, zeta), &quad);
        let qf = sq_norm(&q.apply(&gamma));
        let gap = rel(circle, qf);
        out.check(&format!("circle route degree {} θ={:.4}", q.dim(), zeta.theta()), gap <= 1e-10, gap);
        worst = worst.max(gap);
    }

    // f = 1 + z in K_{z²}: Qf = 1 at ζ = 1, so the energy is 1
    let zeta = BoundaryPoint::new(0.0);
    let f = Analytic::new(|z: Complex64| 1.0 + z, |_| c(1.0, 0.0));
    let quad = CircleQuadrature::for_model_space(QUAD_NODES, &z_squared(), &zeta)?;
    let circle = norm_sq(&apply_difference_quotient(&f, &zeta), &quad);
    out.check("circle route for 1 + z", (circle - 1.0).abs() <= 1e-10, circle);
    let coarse = area_dirichlet(&f, &zeta, DiskGrid { radial: 64, angular: 4096 })?;
    let fine = area_dirichlet(&f, &zeta, DiskGrid { radial: 128, angular: 8192 })?;
    let (g0, g1) = ((coarse - 1.0).abs(), (fine - 1.0).abs());
    out.check("area route within 1e-3", g0 <= 1e-3, coarse);
    out.check("refinement halves the gap", g1 > 0.0 && g0 / g1 >= 2.0 || g1 == 0.0, g0 / g1);
    out.note(format!("worst circle gap {worst:.3e}; area gaps {g0:.3e} → {g1:.3e} (×{:.2})", g0 / g1));
    Ok(out)
}

fn clark_masses() -> Outcome {
    let mut out = Checks::default();
    let tau = 0.7;
    let alpha = Complex64::from_polar(1.0, tau);
    for n in [2usize, 3, 5] {
        let mu = clark_atoms_blaschke(&InnerFunction::monomial(n)?, alpha)?;
        out.check(&format!("z^{n} atom count"), mu.len() == n, mu.len());
        let mut roots: Vec<f64> = (0..n).map(|k| ((tau + TAU * k as f64) / n as f64).rem_euclid(TAU)).collect();
        roots.sort_by(f64::total_cmp);
        for (atom, root) in mu.atoms.iter().zip(&roots) {
            let power = atom.point.point().powu(n as u32);
            out.check(&format!("z^{n} root"), (power - alpha).norm() <= 1e-12, (power - alpha).norm());
            out.check(&format!("z^{n} angle"), (atom.point.theta() - root).abs() <= 1e-12, atom.point.theta() - root);
            out.check(&format!("z^{n} mass"), (atom.mass - 1.0 / n as f64).abs() <= 1e-12, atom.mass);
        }
        let total = mu.total_mass();
        out.check(&format!("z^{n} total"), (total - 1.0).abs() <= 1e-12, total);
    }

    let s = singular_fixture();
    let mu = ClarkMeasure::for_base_point(&s, &BoundaryPoint::new(PI), Window::Symmetric(4000))?;
    let coth = 1.0 / 0.5f64.tanh();
    let total = mu.total_mass();
    out.check("singular partial mass", (total - coth).abs() <= 1e-4, total);
    out.note(format!("singular partial mass {total:.9} vs coth(1/2) = {coth:.9}"));
    Ok(out)
}

fn truncation_study() -> Outcome {
    let mut out = Checks::default();
    let u = singular_fixture();
    let mut products = Vec::new();
    for theta in [PI / 2.0, PI, 1.5 * PI] {
        let zeta = BoundaryPoint::new(theta);
        let rows = truncation_rows(&u, &zeta, &DEFAULT_SCHEDULE)?;
        let chord = (zeta.point() - 1.0).norm();
        let drops = rows.iter().filter_map(|r| r.diff).fold(0.0f64, |m, d| m.max(-d));
        out.check(&format!("θ={theta:.4} nondecreasing"), drops <= 1e-12, drops);
        let stable = rows.iter().find(|r| r.diff.is_some_and(|d| d < 1e-6));
        let last_diff = rows.last().and_then(|r| r.diff).unwrap_or(f64::NAN);
        out.check(&format!("θ={theta:.4} stabilizes by K=4096"), stable.is_some(), format!("last diff {last_diff:.3e}"));
        let q_stab = stable.or(rows.last()).map_or(0.0, |r| r.norm);
        let floor = (1.0 / chord).max(1.0 / (chord * chord));
        out.check(&format!("θ={theta:.4} lower bound"), q_stab >= (1.0 - 1e-9) * floor, q_stab - floor);
        let product = q_stab * chord * chord;
        out.check(&format!("θ={theta:.4} product"), (1.0 - 1e-6..=20.0).contains(&product), product);
        products.push(product);
        out.note(format!("θ={theta:.4}: ‖Q_4096‖ = {q_stab:.9}, last diff {last_diff:.3e}"));
    }
    out.note(format!("products {products:.6?}"));
    Ok(out)
}

fn aleksandrov_ratio() -> Outcome {
    let mut out = Checks::default();
    let s = singular_fixture();
    let grid = theta_grid(&s, 100, 1e-6);
    out.check("100-point grid", grid.len() == 100, grid.len());
    let mut worst = 0.0f64;
    for z in &grid {
        let d = s.boundary_derivatives(z)?;
        let ratio = d.second.norm() / (d.abs_first * d.abs_first);
        worst = worst.max((ratio - 1.0).abs());
    }
    out.check("singular ratio ≡ 1", worst <= 1e-10, worst);

    let u = z_squared();
    let mut worst_half = 0.0f64;
    for z in &theta_grid(&u, 100, 1e-6) {
        let d = u.boundary_derivatives(z)?;
        worst_half = worst_half.max((d.second.norm() / (d.abs_first * d.abs_first) - 0.5).abs());
    }
    out.check("z² ratio ≡ 1/2", worst_half <= 1e-10, worst_half);

    let mut scans = vec![(s, grid), (u.clone(), theta_grid(&u, 100, 1e-6))];
    scans.extend(cross_route_family().into_iter().map(|(b, _)| {
        let g = theta_grid(&b, 100, 1e-6);
        (b, g)
    }));
    for (f, g) in &scans {
        let report = run_one_component_ratio(f, g)?;
        let constant = report.params["empirical_constant"].as_f64().unwrap_or(f64::NAN);
        let max_row = report
            .rows
            .iter()
            .map(|r| r["ratio"].as_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        out.check(&format!("{f} bounded"), constant.is_finite() && max_row <= constant, constant);
    }
    out.note(format!("singular deviation {worst:.3e}, z² deviation {worst_half:.3e}"));
    Ok(out)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("degree-one fixture", degree_one_fixture),
        ("z² fixture", z_squared_fixture),
        ("cross-route Clark matrices", cross_route_matrices),
        ("Cauchy-kernel eigenpairs", eigenpairs),
        ("derivative functional", derivative_functional_routes),
        ("resolvent per-vector identity", resolvent_identity),
        ("local Dirichlet integral", dirichlet_identity),
        ("Clark masses", clark_masses),
        ("singular truncation study", truncation_study),
        ("Aleksandrov ratio", aleksandrov_ratio),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = std::time::Instant::now();
        let (pass, detail) = match run() {
            Ok(c) if c.failed.is_empty() => (true, c.notes.join("; ")),
            Ok(c) => (false, format!("failed: {}; {}", c.failed.join(", "), c.notes.join("; "))),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {:<32} {} [{:.1}s] {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

