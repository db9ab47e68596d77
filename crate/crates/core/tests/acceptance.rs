//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::{PI, SQRT_2};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use blab_core::chart::{Chart, Warp};
use blab_core::conformal::{conformal_metric, conformal_ricci, verify_ricci_law, verify_scalar_law, ConformalData};
use blab_core::field::{BuiltinField, FnField, FourierTerm, ScalarField};
use blab_core::geodesic::{
    bound_value, c_constant, estimate_diameter, integrate_geodesic, lemma1_check, prop1_epsilon_threshold, BoundKind,
    BoundSpec, DiameterMode, PhiFamily, PhiProfile, Prop1Case,
};
use blab_core::neck::{build_profile, certify_neck, neck_metric, rho_sweep, SampleSpec};
use blab_core::scan::{biricci_scan, ricci_scan, ScanSpec};
use blab_core::spline::GridAxis;
use blab_core::stability::{
    first_eigenpair, gauss_ricci, jacobi_operator, lemma4_check, BuiltinEmbedding, DomainGrid, Hypersurface,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CURVATURE_TOL: f64 = 1e-5;
const CURVATURE_BUDGET: Duration = Duration::from_secs(30);
const CONFORMAL_TOL: f64 = 1e-5;
const CONFORMAL_POINTS: usize = 50;
const CONFORMAL_BUDGET: Duration = Duration::from_secs(60);
const DIAMETER_SAMPLES: usize = 2000;
const DIAMETER_BUDGET: Duration = Duration::from_secs(300);
const LEMMA1_TOL: f64 = 1e-4;
const EIGEN_REL_TOL: f64 = 1e-3;
const EIGEN_MIN_ORDER: f64 = 1.9;
const EQUATOR_TOL: f64 = 1e-6;
const GAUSS_TOL: f64 = 1e-4;
const GAUSS_POINTS: usize = 100;
const LEMMA4_TRIALS: usize = 10_000;
const NECK_MARGIN: f64 = 1e-3;
const RHO_RATIO: f64 = 0.1;
const NECK_BUDGET: Duration = Duration::from_secs(600);
const BOUND_TOL: f64 = 1e-12;
const RICCI_ZERO_TOL: f64 = 1e-6;

type Check = Box<dyn FnOnce(&mut Vec<String>) -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn field(f: BuiltinField) -> Arc<dyn ScalarField> {
    Arc::new(f)
}

fn interior(chart: &Chart, rng: &mut ChaCha8Rng) -> Vec<f64> {
    chart.domain().axes.iter().map(|a| a.lo + a.width() * rng.gen_range(0.15..0.85)).collect()
}

fn unit_axis(chart: &Chart, x: &[f64], axis: usize) -> DVector<f64> {
    let g = chart.metric_at(x);
    let mut e = DVector::zeros(chart.dim());
    e[axis] = 1.0 / g[(axis, axis)].sqrt();
    e
}

fn axis(lo: f64, hi: f64, nodes: usize) -> GridAxis {
    GridAxis { lo, hi, nodes, periodic: false }
}

fn ring(nodes: usize, width: f64) -> GridAxis {
    GridAxis { lo: 0.0, hi: width, nodes, periodic: true }
}

fn curvature_kernel() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut charts: Vec<(String, Chart)> = Vec::new();
    for n in 2..=5 {
        charts.push((format!("flat R^{n}"), Chart::flat(n, 1.0)));
    }
    for n in 2..=4 {
        charts.push((format!("S^{n}"), Chart::sphere(n, 1.0)));
    }
    charts.push(("H^2".into(), Chart::hyperbolic(2, 1.0, 0.5, 2.0)));
    charts.push(("S^2 x S^1".into(), Chart::sphere_times_circles(2, 1.0, vec![1.0])));

    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut note = |name: &str, what: &str, err: f64| {
        if err > worst {
            worst = err;
            worst_at = format!("{name} {what}");
        }
    };
    for (name, chart) in &charts {
        let n = chart.dim();
        for _ in 0..20 {
            let x = interior(chart, &mut rng);
            let b = match chart.curvature(&x) {
                Ok(b) => b,
                Err(e) => return outcome(false, format!("{name}: {e}")),
            };
            note(name, "symmetry", b.symmetry_defect());
            note(name, "contraction", b.contraction_defect());
            if name.starts_with("flat") {
                note(name, "riemann", b.riemann.max_abs());
            } else if name.starts_with("S^") && !name.contains('x') {
                note(name, "Ric-(n-1)g", (&b.ricci - &b.metric * (n as f64 - 1.0)).abs().max());
                note(name, "scalar", (b.scalar - (n * (n - 1)) as f64).abs());
            } else if name == "H^2" {
                let k = b.sectional(&unit_axis(chart, &x, 0), &unit_axis(chart, &x, 1));
                note(name, "K+1", (k + 1.0).abs());
            } else {
                let mut want = b.metric.clone();
                want.row_mut(2).fill(0.0);
                want.column_mut(2).fill(0.0);
                note(name, "Ric", (&b.ricci - want).abs().max());
                note(name, "scalar", (b.scalar - 2.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < CURVATURE_TOL && elapsed < CURVATURE_BUDGET,
        format!("{} charts x 20 points, worst defect {worst:.2e} ({worst_at}), {:.1} s", charts.len(), elapsed.as_secs_f64()),
    )
}

/// Residual of `R̃ = f^{-4/(n-2)} tr_h(Ric − σ f⁻¹Δf h)` for `η² h` with
/// `f = η^{(n-2)/2}` and an arbitrary weight.
fn trace_residual(chart: &Chart, eta: &Arc<dyn ScalarField>, x: &[f64], sigma: f64) -> f64 {
    let n = chart.dim() as f64;
    let direct = conformal_metric(chart, &ConformalData::single(Arc::clone(eta), 1.0).unwrap())
        .unwrap()
        .curvature(x)
        .unwrap()
        .scalar;
    let inner = Arc::clone(eta);
    let f: Arc<dyn ScalarField> = Arc::new(FnField(move |y: &[f64]| inner.value(y).powf(0.5 * (n - 2.0))));
    let ric = conformal_ricci(chart, &ConformalData::single(Arc::clone(&f), sigma).unwrap(), x).unwrap();
    let ginv = chart.metric_at(x).try_inverse().unwrap();
    let trace = f.value(x).powf(-4.0 / (n - 2.0)) * ginv.component_mul(&ric).sum();
    (direct - trace).abs() / direct.abs().max(1.0)
}

struct ConformalRun {
    ricci: f64,
    scalar: f64,
    trace: f64,
    corrected: f64,
    elapsed: Duration,
}

fn conformal_matrix() -> Result<ConformalRun, String> {
    let start = Instant::now();
    let charts = [Chart::sphere(3, 1.0), Chart::hyperbolic(3, 1.0, 0.5, 2.0), Chart::flat(4, 1.0)];
    let factors = |n: usize| -> Vec<Arc<dyn ScalarField>> {
        let mut coeffs = vec![0.0; n];
        coeffs[0] = 0.4;
        coeffs[n - 1] = -0.3;
        let mut wave_a = vec![0.0; n];
        wave_a[0] = 1.0;
        let mut wave_b = vec![0.0; n];
        wave_b[1] = 2.0;
        vec![
            field(BuiltinField::ExpLinear { coeffs, scale: 1.0 }),
            field(BuiltinField::LogFourier {
                terms: vec![
                    FourierTerm { wave: wave_a, amplitude: 0.3, phase: 0.2 },
                    FourierTerm { wave: wave_b, amplitude: 0.2, phase: 1.0 },
                ],
            }),
            field(BuiltinField::InverseQuadratic { scale: 2.0 }),
        ]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut ricci, mut scalar, mut trace, mut corrected) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for chart in &charts {
        let n = chart.dim() as f64;
        let stated = 4.0 * (n - 1.0) / (n - 2.0);
        let fixed = stated / n;
        for eta in factors(chart.dim()) {
            for _ in 0..CONFORMAL_POINTS {
                let x = interior(chart, &mut rng);
                ricci = ricci.max(verify_ricci_law(chart, Arc::clone(&eta), &x).map_err(|e| e.to_string())?);
                let s = verify_scalar_law(chart, Arc::clone(&eta), &x).map_err(|e| e.to_string())?;
                scalar = scalar.max(s.law_residual);
                trace = trace.max(s.trace_residual);
                corrected = corrected.max(trace_residual(chart, &eta, &x, fixed));
            }
        }
    }
    Ok(ConformalRun { ricci, scalar, trace, corrected, elapsed: start.elapsed() })
}

fn conformal_laws(info: &mut Vec<String>) -> Outcome {
    let run = match conformal_matrix() {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    info.push(format!(
        "criterion 2 info: weight 4(n-1)/(n(n-2)) gives trace residual {:.2e} on the same matrix",
        run.corrected
    ));
    let pass = run.ricci < CONFORMAL_TOL
        && run.scalar < CONFORMAL_TOL
        && run.trace < CONFORMAL_TOL
        && run.elapsed < CONFORMAL_BUDGET;
    outcome(
        pass,
        format!(
            "3x3x{CONFORMAL_POINTS}: Ricci law {:.2e}, scalar law {:.2e}, trace identity at weight 4(n-1)/(n-2) {:.2e}, {:.1} s",
            run.ricci,
            run.scalar,
            run.trace,
            run.elapsed.as_secs_f64()
        ),
    )
}

fn bonnet_myers() -> Outcome {
    let start = Instant::now();
    let chart = Chart::sphere(3, 1.0);
    let cd = ConformalData::single(field(BuiltinField::Constant { value: 1.0 }), 1.0).unwrap();
    let est = match estimate_diameter(&chart, DIAMETER_SAMPLES, DiameterMode::Conformal(&cd)) {
        Ok(e) => e,
        Err(e) => return outcome(false, e.to_string()),
    };
    let bound = bound_value(&BoundSpec::new(BoundKind::Thm1, 3, 2.0)).unwrap();
    let elapsed = start.elapsed();
    let d = est.diameter;
    let pass = (0.98 * PI..=PI).contains(&d) && bound == PI && d <= bound && elapsed < DIAMETER_BUDGET;
    outcome(
        pass,
        format!("diameter {d:.6} = {:.4} pi, bound {bound:.15}, {:.1} s", d / PI, elapsed.as_secs_f64()),
    )
}

fn lemma1_suite() -> Outcome {
    let chart = Chart::sphere(2, 1.0);
    let cd = ConformalData::trivial(1.0).unwrap();
    let x0 = [PI / 2.0, 0.0];
    let family = PhiFamily::standard();
    let phis: Vec<&dyn PhiProfile> = family.iter().map(|p| p as &dyn PhiProfile).collect();
    let mut cases = 0;
    let mut worst = f64::INFINITY;
    for l in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
        let path = integrate_geodesic(&chart, &x0, &[0.6, 0.8], l).unwrap();
        for t in lemma1_check(&chart, &cd, &path, &phis).unwrap() {
            cases += 1;
            worst = worst.min(t.lhs - t.rhs);
        }
    }
    let sine = PhiFamily::Sine { k: 1 };
    let mut margins = Vec::new();
    let mut closed_form_gap = 0.0f64;
    for l in [0.9 * PI, 0.95 * PI, 0.99 * PI] {
        let path = integrate_geodesic(&chart, &x0, &[0.6, 0.8], l).unwrap();
        let m = lemma1_check(&chart, &cd, &path, &[&sine]).unwrap()[0].margin();
        closed_form_gap = closed_form_gap.max((m - (PI * PI / (l * l) - 1.0) * l / 2.0).abs());
        margins.push(m);
    }
    let monotone = margins.windows(2).all(|w| w[1] < w[0]) && margins.iter().all(|&m| m >= -LEMMA1_TOL);
    let pass = cases == 15 && worst >= -LEMMA1_TOL && monotone && closed_form_gap < LEMMA1_TOL;
    outcome(
        pass,
        format!(
            "{cases} cases, worst lhs-rhs {worst:.4e}; margins near pi {:.4e} > {:.4e} > {:.4e} (closed form gap {closed_form_gap:.1e})",
            margins[0], margins[1], margins[2]
        ),
    )
}

fn eigen_solver() -> Outcome {
    let strip = |nodes: usize| {
        let hs = Hypersurface::builtin(BuiltinEmbedding::Strip { length: 1.0 }).unwrap();
        let grid = DomainGrid::new(vec![axis(0.0, 1.0, nodes), ring(4, 1.0)]).unwrap();
        first_eigenpair(&hs, &grid).unwrap().lambda
    };
    let exact = PI * PI;
    let (coarse, fine) = (strip(200), strip(399));
    let (e1, e2) = ((coarse - exact).abs(), (fine - exact).abs());
    let order = (e1 / e2).log2();

    let mut equator = 0.0f64;
    for n in [2, 3] {
        let hs = Hypersurface::builtin(BuiltinEmbedding::Equator { dim: n, codim: 1 }).unwrap();
        let mut axes = vec![axis(0.0, PI, 9); n - 1];
        axes.push(ring(8, 2.0 * PI));
        let grid = DomainGrid::new(axes).unwrap();
        let phi = vec![1.0; grid.len()];
        let lphi = jacobi_operator(&hs, &grid, 0, &phi).unwrap();
        for i in grid.unknowns() {
            equator = equator.max((lphi[i] + n as f64).abs());
        }
    }
    let pass = e1 / exact < EIGEN_REL_TOL && order >= EIGEN_MIN_ORDER && equator < EQUATOR_TOL;
    outcome(
        pass,
        format!(
            "lambda_1 {coarse:.8} vs pi^2 (rel {:.2e}), order {order:.3}, equator L1 + n residual {equator:.2e}",
            e1 / exact
        ),
    )
}

fn gauss_and_lemma4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let hs = Hypersurface::builtin(BuiltinEmbedding::Equator { dim: 2, codim: 1 }).unwrap();
    let mut gauss = 0.0f64;
    for _ in 0..GAUSS_POINTS {
        let u = [rng.gen_range(0.3..PI - 0.3), rng.gen_range(0.0..2.0 * PI)];
        let g: DMatrix<f64> = hs.induced_metric(&u);
        let raw = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let v = &raw / (raw.transpose() * &g * &raw)[(0, 0)].sqrt();
        match gauss_ricci(&hs, &u, &v) {
            Ok(c) => gauss = gauss.max(c.residual()),
            Err(e) => return outcome(false, e.to_string()),
        }
    }
    let mut violations = 0;
    for n in 2..=6 {
        for _ in 0..LEMMA4_TRIALS {
            let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mean = d.iter().sum::<f64>() / n as f64;
            d.iter_mut().for_each(|x| *x -= mean);
            let mut a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            a.iter_mut().for_each(|x| *x /= norm);
            let s = lemma4_check(&d, &a).unwrap();
            if s.lhs < s.rhs - 1e-12 * s.lhs.max(1.0) {
                violations += 1;
            }
        }
    }
    outcome(
        gauss < GAUSS_TOL && violations == 0,
        format!("Gauss two-way residual {gauss:.2e} over {GAUSS_POINTS} points; {violations} violations in 5 x {LEMMA4_TRIALS} trials"),
    )
}

fn neck_construction() -> Outcome {
    let start = Instant::now();
    let ball = Chart::rotational(4, Warp::Sphere { radius: 1.0 }, 0.4);
    let kappa = match biricci_scan(&ball, 1.0, &ScanSpec::default()) {
        Ok(r) => r.min,
        Err(e) => return outcome(false, e.to_string()),
    };
    let profile = match build_profile(4, 1.0, kappa, 0.3, 6.0, None) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("kappa {kappa:.6}: {e}")),
    };
    let margin = profile.margin;
    let neck = neck_metric(&ball, Arc::new(profile)).unwrap();
    let report = certify_neck(&neck, 4, 1.0, &SampleSpec::default()).unwrap();
    let sweep = rho_sweep(4, 1.0, kappa, 0.3, &[4.0, 6.0, 8.0, 10.0]).unwrap();
    let decreasing = sweep.windows(2).all(|w| w[1].rho < w[0].rho);
    let ratio = sweep[3].rho / sweep[0].rho;
    let elapsed = start.elapsed();
    let pass = margin >= NECK_MARGIN
        && report.min_biricci > 0.0
        && decreasing
        && ratio < RHO_RATIO
        && elapsed < NECK_BUDGET;
    outcome(
        pass,
        format!(
            "kappa {kappa:.6}, margin {margin:.3e}, min bi-Ricci {:.6} over {} samples, rho(10)/rho(4) {ratio:.3e}, {:.1} s",
            report.min_biricci,
            report.samples,
            elapsed.as_secs_f64()
        ),
    )
}

fn bound_table() -> Outcome {
    let spec = BoundSpec::new;
    let value = |s: BoundSpec| bound_value(&s).unwrap();
    let rows: Vec<(&str, f64, f64)> = vec![
        ("thm1 n=3 kappa=2", value(spec(BoundKind::Thm1, 3, 2.0).epsilon(0.1)), PI),
        ("thm1 classical limit", value(spec(BoundKind::Thm1, 4, 3.0).epsilon(1e15)), PI),
        ("thm1 n=5 eps=1", value(spec(BoundKind::Thm1, 5, 4.0).epsilon(1.0)), 5f64.sqrt() * PI / 2.0),
        ("c(3,1)", c_constant(3, 1.0).unwrap(), SQRT_2),
        ("thm2 n=3", value(spec(BoundKind::Thm2, 3, 1.0).sigma(1.0)), SQRT_2 * PI),
        ("thm2 lambda=3", value(spec(BoundKind::Thm2, 3, 1.0).sigma(1.0).lambda(3.0)), SQRT_2 * PI / 2.0),
        ("cor1 n=3 edge", value(spec(BoundKind::Cor1, 3, 1.0).sigma(2.0)), SQRT_2 * PI),
        ("cor1 n=4", value(spec(BoundKind::Cor1, 4, 3.0).sigma(1.0)), 2.0 * PI / 3f64.sqrt()),
        ("lemma7 n=3", value(spec(BoundKind::Lemma7, 3, 4.0).total_weight(2.0)), SQRT_2 * PI / 2.0),
        ("case-2 threshold", prop1_epsilon_threshold(Prop1Case::Two, 5, 1.0, 1.0).unwrap(), 1.0 / (8.0 * PI + 2.0)),
        ("case-1 threshold", prop1_epsilon_threshold(Prop1Case::One, 4, 1.0, 1.0).unwrap(), 1.0 / (4.0 + 2.0 * PI * PI)),
        (
            "prop1 case 2",
            value(spec(BoundKind::Prop1Case2, 3, 1.0).sigma(1.0).epsilon(0.01).ambient(5)),
            2.0 * PI / 0.98f64.sqrt(),
        ),
    ];
    let (worst, name) = rows
        .iter()
        .map(|(n, got, want)| ((got - want).abs(), *n))
        .fold((0.0, ""), |acc, x| if x.0 > acc.0 { x } else { acc });
    outcome(worst < BOUND_TOL, format!("{} pairs, worst error {worst:.1e} {name}", rows.len()))
}

fn product_witness() -> Outcome {
    let chart = Chart::sphere_times_circles(2, 1.0, vec![1.0]);
    let spec = ScanSpec::default();
    let (b, r) = match (biricci_scan(&chart, 1.0, &spec), ricci_scan(&chart, &spec)) {
        (Ok(b), Ok(r)) => (b, r),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
    };
    let dir = &r.argmin_directions[0];
    let g = chart.metric_at(&r.argmin);
    let along = dir[2] * dir[2] * g[(2, 2)];
    outcome(
        b.min > 0.0 && r.min.abs() < RICCI_ZERO_TOL,
        format!("min B_1 Rc {:.6}, min Ric {:.2e} (circle share of argmin direction {along:.4})", b.min, r.min),
    )
}

fn main() -> ExitCode {
    let mut info = Vec::new();
    let criteria: Vec<(u32, &str, Check)> = vec![
        (1, "curvature kernel", Box::new(|_| curvature_kernel())),
        (2, "conformal laws", Box::new(conformal_laws)),
        (3, "diameter sharpness on S^3", Box::new(|_| bonnet_myers())),
        (4, "index form suite", Box::new(|_| lemma1_suite())),
        (5, "eigen solver", Box::new(|_| eigen_solver())),
        (6, "Gauss identity and trace inequality", Box::new(|_| gauss_and_lemma4())),
        (7, "neck construction", Box::new(|_| neck_construction())),
        (8, "bound calculators", Box::new(|_| bound_table())),
        (9, "positive bi-Ricci without positive Ricci", Box::new(|_| product_witness())),
    ];
    let mut failed = 0;
    for (k, name, check) in criteria {
        let o = check(&mut info);
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("criterion {k} {tag} {name}: {}", o.detail);
        for line in info.drain(..) {
            println!("{line}");
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
