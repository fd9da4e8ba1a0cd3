//! Acceptance suite: one test per shipping criterion, each printing a
//! `criterion N: PASS/FAIL` line with the measured numbers. A failing
//! criterion panics with the full audit trail rather than being silently
//! relaxed, so a red test here is a signed statement that the target it
//! encodes is not met by the current implementation.

use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowcurv::catalog;
use flowcurv::classify::{classify_system, ClassifyOptions};
use flowcurv::curvature::{Curvature, FieldSelector};
use flowcurv::dynamics::{
    find_fixed_points, integrate, wrapping_number, FixedPoint, IntegrateOptions, Role,
    SearchOptions, Trajectory,
};
use flowcurv::field_dsl::{parse_field, BoundField};
use flowcurv::section_analysis::{
    build_return_map, section_crossings, transition_matrix, SectionSpec, TransitionMatrix,
};
use flowcurv::surface_mesh::padded_bounds;

/// Systems with two fixed points (inner + outer saddle-focus pair).
const TWO_FIXED_POINT_SYSTEMS: [&str; 10] = [
    "rossler", "sprott_f", "sprott_g", "sprott_h", "sprott_k", "sprott_m", "sprott_o",
    "sprott_p", "sprott_q", "sprott_s",
];

/// Systems with a single fixed point.
const ONE_FIXED_POINT_SYSTEMS: [&str; 9] = [
    "sprott_d", "sprott_i", "sprott_j", "sprott_l", "sprott_n", "sprott_r", "thomas",
    "malasoma_a", "malasoma_b",
];

fn bound_field(name: &str, overrides: &[(String, f64)]) -> BoundField {
    let (field, _) = catalog::build(name, overrides).expect("catalog system builds");
    field.bind(&[]).expect("all parameters resolved")
}

fn short_trajectory(name: &str, t_end: f64, transient: f64) -> (BoundField, Trajectory) {
    let def = catalog::find(name).expect("known system");
    let bound = bound_field(name, &[]);
    let traj = integrate(
        &bound,
        &def.initial_condition(),
        &IntegrateOptions {
            t_end,
            dt_output: 0.01,
            transient,
            ..IntegrateOptions::default()
        },
    )
    .expect("integration runs");
    (bound, traj)
}

fn assert_budget(criterion: u32, elapsed: Duration, budget: Duration) {
    assert!(
        elapsed <= budget,
        "criterion {criterion}: runtime {:.2} s exceeds the {:.0} s budget",
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
}

// -----------------------------------------------------------------------
// 1. phi = phi_c + phi_t at random states of every catalog system.
// -----------------------------------------------------------------------

#[test]
fn criterion_1_decomposition_identity() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for (index, info) in catalog::list_systems().iter().enumerate() {
        let (bound, traj) = short_trajectory(info.name, 50.0, 20.0);
        let (lo, hi) = padded_bounds(&traj).expect("non-empty trajectory");
        let curv = Curvature::from_bound(bound);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + index as u64);
        for _ in 0..1000 {
            let state = Vector3::new(
                rng.gen_range(lo.x..=hi.x),
                rng.gen_range(lo.y..=hi.y),
                rng.gen_range(lo.z..=hi.z),
            );
            let (phi, phi_c, phi_t) = curv.det_values(&state);
            let scale = phi.abs().max(phi_c.abs()).max(phi_t.abs()).max(1e-300);
            let error = (phi - (phi_c + phi_t)).abs();
            assert!(
                error <= 1e-10 * scale,
                "{}: |phi - (phi_c + phi_t)| = {error:.3e} at {state:?} (scale {scale:.3e})",
                info.name
            );
            worst = worst.max(error / scale);
        }
    }
    let elapsed = started.elapsed();
    println!(
        "criterion 1: PASS — 19 systems x 1000 states, worst relative defect {worst:.3e}, {:.2} s",
        elapsed.as_secs_f64()
    );
    assert_budget(1, elapsed, Duration::from_secs(10));
}

// -----------------------------------------------------------------------
// 2. Wrapping numbers match the published values for nine Sprott systems.
// -----------------------------------------------------------------------

#[test]
fn criterion_2_wrapping_numbers() {
    let started = Instant::now();
    let expected = [
        ("sprott_f", 59.4),
        ("sprott_h", 48.5),
        ("sprott_q", 0.2),
        ("sprott_s", 3.8),
        ("sprott_o", 4.3),
        ("sprott_p", 8.5),
        ("sprott_m", 14.0),
        ("sprott_g", 21.3),
        ("sprott_k", 27.1),
    ];
    let mut mismatches = Vec::new();
    let mut summary = String::new();
    for (name, target) in expected {
        let bound = bound_field(name, &[]);
        let fps = find_fixed_points(&bound, &SearchOptions::default());
        let w = wrapping_number(&fps);
        let value = w.value.unwrap_or(f64::NAN);
        let tolerance = f64::max(0.05 * target, 0.05);
        let ok = (value - target).abs() <= tolerance;
        summary.push_str(&format!(
            "  {name}: W = {value:.4} (target {target}, tolerance {tolerance:.3}) {}\n",
            if ok { "ok" } else { "MISMATCH" }
        ));
        if !ok {
            // The audit trail: every eigenvalue of every fixed point, so a
            // mismatch can be traced to the linearization without rerunning.
            let mut audit = format!("{name}: W = {value:.6}, target {target}");
            for fp in &fps {
                audit.push_str(&format!(
                    "\n    fixed point ({:.6}, {:.6}, {:.6}) eigenvalues {}",
                    fp.location.x,
                    fp.location.y,
                    fp.location.z,
                    fp.eigenvalues
                        .iter()
                        .map(|l| format!("{:+.6}{:+.6}i", l.re, l.im))
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
            mismatches.push(audit);
        }
    }
    let elapsed = started.elapsed();
    if mismatches.is_empty() {
        println!(
            "criterion 2: PASS — nine wrapping numbers within max(5%, 0.05), {:.3} s",
            elapsed.as_secs_f64()
        );
    } else {
        println!(
            "criterion 2: FAIL — {} of 9 wrapping numbers off target, {:.3} s\n{summary}",
            mismatches.len(),
            elapsed.as_secs_f64()
        );
    }
    assert_budget(2, elapsed, Duration::from_secs(1));
    assert!(
        mismatches.is_empty(),
        "wrapping-number mismatches with eigenvalue audit:\n{}",
        mismatches.join("\n")
    );
}

// -----------------------------------------------------------------------
// 3. Rössler return-map branch counts at a = 0.432 and a = 0.52.
// -----------------------------------------------------------------------

/// Runs the production pipeline (t_end 20000, transient 500, dt 0.01,
/// default section through the inner fixed point) and returns the branch
/// count with the transition matrix.
fn production_return_map(name: &str, overrides: &[(String, f64)]) -> (usize, TransitionMatrix) {
    let def = catalog::find(name).expect("known system");
    let (field, _) = catalog::build(name, overrides).expect("system builds");
    let bound = field.bind(&[]).expect("parameters resolved");
    let traj = integrate(
        &bound,
        &def.initial_condition(),
        &IntegrateOptions {
            t_end: 20_000.0,
            dt_output: 0.01,
            transient: 500.0,
            ..IntegrateOptions::default()
        },
    )
    .expect("integration runs");
    assert!(!traj.diverged(), "{name}: trajectory diverged");
    let fps = find_fixed_points(&bound, &SearchOptions::default());
    let inner = fps
        .iter()
        .find(|fp| fp.role == Role::Inner)
        .unwrap_or_else(|| fps.first().expect("at least one fixed point"));
    let spec = SectionSpec::default_for(&traj, &inner.location).expect("section spec");
    let scan = section_crossings(&bound, &traj, &spec);
    let rho: Vec<f64> = scan.crossings.iter().map(|c| c.rho).collect();
    let map = build_return_map(&rho);
    let branches = map
        .partition
        .as_ref()
        .unwrap_or_else(|| panic!("{name}: no branch partition: {:?}", map.warning))
        .branch_count;
    let gamma = transition_matrix(&map).expect("transition matrix");
    (branches, gamma)
}

#[test]
fn criterion_3_rossler_branch_counts() {
    let started = Instant::now();
    let (m_periodic, _) = production_return_map("rossler", &[("a".into(), 0.432)]);
    let first = started.elapsed();
    assert_budget(3, first, Duration::from_secs(60));

    let second_start = Instant::now();
    let (m_funnel, gamma) = production_return_map("rossler", &[("a".into(), 0.52)]);
    let second = second_start.elapsed();
    assert_budget(3, second, Duration::from_secs(60));

    println!(
        "criterion 3: {} — a=0.432: m={m_periodic} (want 2); a=0.52: m={m_funnel} (want 4), \
         gamma {}x{} all-ones: {}; {:.1} s + {:.1} s",
        if m_periodic == 2 && m_funnel == 4 && gamma.size() == 4 && gamma.is_all_ones() {
            "PASS"
        } else {
            "FAIL"
        },
        gamma.size(),
        gamma.size(),
        gamma.is_all_ones(),
        first.as_secs_f64(),
        second.as_secs_f64()
    );
    assert_eq!(m_periodic, 2, "a=0.432 must give two monotone branches");
    assert_eq!(m_funnel, 4, "a=0.52 must give four monotone branches");
    assert_eq!(gamma.size(), 4, "transition matrix must be 4x4");
    assert!(
        gamma.is_all_ones(),
        "every branch-to-branch transition must be observed: {:?}",
        gamma.matrix
    );
}

// -----------------------------------------------------------------------
// 4. Rössler attractor/manifold crossing dichotomy.
// -----------------------------------------------------------------------

#[test]
fn criterion_4_rossler_crossing_dichotomy() {
    let started = Instant::now();
    let opts = ClassifyOptions::default();
    let before = classify_system("rossler", &[("a".into(), 0.43295)], &opts)
        .expect("classification runs");
    let first = started.elapsed();
    assert_budget(4, first, Duration::from_secs(60));

    let second_start = Instant::now();
    let after =
        classify_system("rossler", &[("a".into(), 0.556)], &opts).expect("classification runs");
    let second = second_start.elapsed();
    assert_budget(4, second, Duration::from_secs(60));

    let ok = before.verdict.events_counted == 0 && after.verdict.events_counted >= 1;
    println!(
        "criterion 4: {} — a=0.43295: {} counted crossings (want 0); a=0.556: {} (want >= 1); \
         {:.1} s + {:.1} s",
        if ok { "PASS" } else { "FAIL" },
        before.verdict.events_counted,
        after.verdict.events_counted,
        first.as_secs_f64(),
        second.as_secs_f64()
    );
    assert_eq!(
        before.verdict.events_counted, 0,
        "a=0.43295 sits just below the first crossing: {:?}",
        before.verdict
    );
    assert!(
        after.verdict.events_counted >= 1,
        "a=0.556 crosses the manifold: {:?}",
        after.verdict
    );
}

// -----------------------------------------------------------------------
// 5. Thomas transition-matrix zero pattern.
// -----------------------------------------------------------------------

#[test]
fn criterion_5_thomas_gamma_zero_pattern() {
    let started = Instant::now();
    let (m, gamma) = production_return_map("thomas", &[]);
    let elapsed = started.elapsed();
    if m == 4 {
        // A four-branch segmentation is a known near-miss of the default
        // merge rule; accepting it would need a recorded justification of
        // the minimum-population threshold, which this build does not claim.
        println!("criterion 5: FAIL — m=4 near-miss under default segmentation");
        panic!("thomas segmentation found m=4; the accepted target is m=5");
    }
    let mut violations = Vec::new();
    for row in 2..gamma.size().min(5) {
        for (col, &cell) in gamma.matrix[row].iter().enumerate() {
            if cell == 1 && col > 1 {
                violations.push(format!("gamma[{row}][{col}] = 1"));
            }
        }
    }
    let ok = m == 5 && violations.is_empty();
    println!(
        "criterion 5: {} — m={m} (want 5); rows 2..4 confined to columns 0..1: {}; {:.1} s\n  gamma: {:?}",
        if ok { "PASS" } else { "FAIL" },
        violations.is_empty(),
        elapsed.as_secs_f64(),
        gamma.matrix
    );
    assert_eq!(m, 5, "default segmentation must find five branches");
    assert!(
        violations.is_empty(),
        "outer branches must return to the first two only: {}",
        violations.join(", ")
    );
}

// -----------------------------------------------------------------------
// 6. Full verdict table and spurious-component reporting.
// -----------------------------------------------------------------------

#[test]
fn criterion_6_verdict_table() {
    let started = Instant::now();
    let expectations: Vec<(&str, Vec<(String, f64)>, &str)> = vec![
        ("sprott_f", vec![], "wrapping"),
        ("sprott_h", vec![], "wrapping"),
        ("sprott_q", vec![], "wrapping"),
        ("sprott_d", vec![], "wrapping"),
        ("sprott_i", vec![], "wrapping"),
        ("sprott_l", vec![], "wrapping"),
        ("sprott_n", vec![], "wrapping"),
        ("sprott_r", vec![], "wrapping"),
        ("rossler", vec![("a".into(), 0.556)], "crossing"),
        ("sprott_k", vec![], "crossing"),
        ("sprott_s", vec![], "crossing"),
        ("sprott_g", vec![], "crossing"),
        ("sprott_m", vec![], "crossing"),
        ("sprott_o", vec![], "crossing"),
        ("sprott_p", vec![], "crossing"),
        ("sprott_j", vec![], "crossing"),
        ("thomas", vec![], "crossing"),
        ("malasoma_a", vec![], "crossing"),
    ];
    let must_flag_spurious = ["sprott_k", "sprott_d", "sprott_r", "malasoma_a"];

    let opts = ClassifyOptions::default();
    let mut table = String::new();
    let mut verdict_mismatches = Vec::new();
    let mut spurious_missing = Vec::new();
    let mut spurious_seen = std::collections::BTreeMap::new();
    for (name, overrides, expected) in &expectations {
        let report = classify_system(name, overrides, &opts).expect("classification runs");
        let got = report.verdict.verdict.clone();
        let spurious = report
            .mesh
            .as_ref()
            .map(|m| m.spurious_components.clone())
            .unwrap_or_default();
        table.push_str(&format!(
            "  {name:<12} computed={got:<12} expected={expected:<10} counted={:<5} spurious={:?}\n",
            report.verdict.events_counted, spurious
        ));
        if got != *expected {
            verdict_mismatches.push(format!(
                "{name}: computed {got}, expected {expected} ({} counted crossings, basis {})",
                report.verdict.events_counted, report.verdict.basis
            ));
        }
        spurious_seen.insert(name.to_string(), spurious);
    }
    for name in must_flag_spurious {
        let flagged = spurious_seen.get(name).map(|s| !s.is_empty()).unwrap_or(false);
        if !flagged {
            spurious_missing.push(name.to_string());
        }
    }
    let elapsed = started.elapsed();
    let ok = verdict_mismatches.is_empty() && spurious_missing.is_empty();
    println!(
        "criterion 6: {} — {} verdict mismatches of 18, spurious reporting missing for {:?}, {:.1} s\n{table}",
        if ok { "PASS" } else { "FAIL" },
        verdict_mismatches.len(),
        spurious_missing,
        elapsed.as_secs_f64()
    );
    assert_budget(6, elapsed, Duration::from_secs(900));
    assert!(
        spurious_missing.is_empty(),
        "systems whose sign-sheet mesh components must be flagged: {spurious_missing:?}"
    );
    assert!(
        verdict_mismatches.is_empty(),
        "verdict table disagreements:\n{}",
        verdict_mismatches.join("\n")
    );
}

// -----------------------------------------------------------------------
// 7. Invariance identity grad(phi)·F = tr(J)·phi for linear fields.
// -----------------------------------------------------------------------

#[test]
fn criterion_7_linear_invariance_identity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..5 {
        // Symmetric A = Q D Q^T: real spectrum by construction; the first
        // three cases are stable (all negative), the last two saddles.
        let spectrum = Vector3::new(
            -rng.gen_range(0.3..2.0),
            -rng.gen_range(0.3..2.0),
            if case < 3 {
                -rng.gen_range(0.3..2.0)
            } else {
                rng.gen_range(0.3..2.0)
            },
        );
        let raw = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let q = raw.qr().q();
        let a = q * Matrix3::from_diagonal(&spectrum) * q.transpose();
        let source = format!(
            "dx = {:.17}*x + {:.17}*y + {:.17}*z\n\
             dy = {:.17}*x + {:.17}*y + {:.17}*z\n\
             dz = {:.17}*x + {:.17}*y + {:.17}*z",
            a[(0, 0)], a[(0, 1)], a[(0, 2)],
            a[(1, 0)], a[(1, 1)], a[(1, 2)],
            a[(2, 0)], a[(2, 1)], a[(2, 2)],
        );
        let field = parse_field(&source).expect("linear field parses");
        let bound = field.bind(&[]).expect("no parameters");
        let curv = Curvature::from_bound(bound);
        for _ in 0..100 {
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            let lhs = curv.gradient(FieldSelector::Phi, &p).dot(&curv.bound().f(&p));
            let rhs = curv.bound().jacobian_at(&p).trace() * curv.value(FieldSelector::Phi, &p);
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-8 * scale,
                "case {case}: |grad(phi)·F - tr(J)·phi| = {:.3e} at {p:?}",
                (lhs - rhs).abs()
            );
        }
    }
    let elapsed = started.elapsed();
    println!(
        "criterion 7: PASS — 5 linear systems x 100 points, identity within 1e-8, {:.3} s",
        elapsed.as_secs_f64()
    );
    assert_budget(7, elapsed, Duration::from_secs(1));
}

// -----------------------------------------------------------------------
// 8. Symbolic third derivative against a finite-difference oracle.
// -----------------------------------------------------------------------

/// Fixed-step fourth-order Runge-Kutta advance by `h` using `substeps`
/// equal substeps (negative `h` integrates backwards).
fn rk4_advance(bound: &BoundField, start: &Vector3<f64>, h: f64, substeps: usize) -> Vector3<f64> {
    let dt = h / substeps as f64;
    let mut x = *start;
    for _ in 0..substeps {
        let k1 = bound.f(&x);
        let k2 = bound.f(&(x + k1 * (dt / 2.0)));
        let k3 = bound.f(&(x + k2 * (dt / 2.0)));
        let k4 = bound.f(&(x + k3 * dt));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}

#[test]
fn criterion_8_third_derivative_oracle() {
    // Fourth-order central stencil for the third derivative at offsets
    // -3h .. +3h.
    const STENCIL: [(i32, f64); 6] = [
        (-3, 1.0 / 8.0),
        (-2, -1.0),
        (-1, 13.0 / 8.0),
        (1, -13.0 / 8.0),
        (2, 1.0),
        (3, -1.0 / 8.0),
    ];
    const H: f64 = 1e-3;
    let mut worst: (f64, String) = (0.0, String::new());
    for info in catalog::list_systems() {
        let (bound, traj) = short_trajectory(info.name, 40.0, 20.0);
        assert!(!traj.diverged(), "{}: short run diverged", info.name);
        let states = traj.states();
        for k in 0..20 {
            let index = (k * (states.len() - 1)) / 19;
            let center = states[index];
            let mut fd = Vector3::zeros();
            for (offset, weight) in STENCIL {
                let sample = rk4_advance(&bound, &center, offset as f64 * H, 10 * offset.unsigned_abs() as usize);
                fd += sample * (weight / (H * H * H));
            }
            let symbolic = bound.derivative_stack(&center).xdddot;
            let scale = symbolic.norm().max(fd.norm()).max(1e-9);
            let rel = (fd - symbolic).norm() / scale;
            if rel > worst.0 {
                worst = (rel, format!("{} sample {k}", info.name));
            }
            assert!(
                rel <= 1e-4,
                "{} sample {k}: relative third-derivative defect {rel:.3e} \
                 (symbolic {symbolic:?}, finite-difference {fd:?})",
                info.name
            );
        }
    }
    println!(
        "criterion 8: PASS — 19 systems x 20 samples, worst relative defect {:.3e} at {}",
        worst.0, worst.1
    );
}

// -----------------------------------------------------------------------
// 9. Fixed-point census with eigenpair residuals.
// -----------------------------------------------------------------------

fn eigen_residual(fp: &FixedPoint) -> f64 {
    let j = fp.jacobian.map(|v| Complex64::new(v, 0.0));
    let mut worst: f64 = 0.0;
    for (lambda, v) in fp.eigenvalues.iter().zip(&fp.eigenvectors) {
        let norm = v.norm();
        assert!(norm > 0.0, "zero eigenvector");
        let v = v / Complex64::new(norm, 0.0);
        let residual = (j * v - v * *lambda).norm();
        worst = worst.max(residual);
    }
    worst
}

#[test]
fn criterion_9_fixed_point_census() {
    let mut worst_residual: f64 = 0.0;
    for (names, expected_count) in [
        (&TWO_FIXED_POINT_SYSTEMS[..], 2usize),
        (&ONE_FIXED_POINT_SYSTEMS[..], 1usize),
    ] {
        for name in names {
            let bound = bound_field(name, &[]);
            let fps = find_fixed_points(&bound, &SearchOptions::default());
            assert_eq!(
                fps.len(),
                expected_count,
                "{name}: found {} fixed points, expected {expected_count}: {:?}",
                fps.len(),
                fps.iter().map(|fp| fp.location).collect::<Vec<_>>()
            );
            for fp in &fps {
                let residual = eigen_residual(fp);
                assert!(
                    residual < 1e-8,
                    "{name}: eigenpair residual {residual:.3e} at {:?}",
                    fp.location
                );
                worst_residual = worst_residual.max(residual);
            }
        }
    }

    // The two census outliers called out by name: a marginally stable pair
    // and a weakly unstable one.
    let d = find_fixed_points(&bound_field("sprott_d", &[]), &SearchOptions::default());
    let d_pair_re = d[0]
        .eigenvalues
        .iter()
        .find(|l| l.im != 0.0)
        .expect("sprott_d has a complex pair")
        .re;
    assert!(
        d_pair_re.abs() < 1e-3,
        "sprott_d complex pair must be marginally stable, got Re = {d_pair_re:.6}"
    );
    let i = find_fixed_points(&bound_field("sprott_i", &[]), &SearchOptions::default());
    let i_pair_re = i[0]
        .eigenvalues
        .iter()
        .find(|l| l.im != 0.0)
        .expect("sprott_i has a complex pair")
        .re;
    assert!(
        (i_pair_re - 0.07).abs() <= 0.02,
        "sprott_i complex pair must have Re within 0.07 +/- 0.02, got {i_pair_re:.6}"
    );
    println!(
        "criterion 9: PASS — census 10x2 + 9x1 fixed points, worst eigenpair residual \
         {worst_residual:.3e}, sprott_d Re = {d_pair_re:.2e}, sprott_i Re = {i_pair_re:.4}"
    );
}
