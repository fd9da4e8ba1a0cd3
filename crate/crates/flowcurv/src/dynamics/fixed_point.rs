//! Fixed-point location (damped-free Newton from a jittered seed grid),
//! eigenvalue classification, and the wrapping number.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field_dsl::BoundField;

/// Residual bound a Newton root must meet to count as a fixed point.
const ROOT_RESIDUAL: f64 = 1e-10;
/// Roots closer than this are considered the same fixed point.
const MERGE_DISTANCE: f64 = 1e-6;
/// Relative threshold below which an eigenvalue real part counts as zero.
const ZERO_REAL_TOL: f64 = 1e-9;

/// Search settings for [`find_fixed_points`].
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub box_min: Vector3<f64>,
    pub box_max: Vector3<f64>,
    /// Seeds per axis (the search launches `grid_n³` Newton iterations).
    pub grid_n: usize,
    /// Seed for the jitter applied to the regular seed grid.
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            box_min: Vector3::new(-20.0, -20.0, -20.0),
            box_max: Vector3::new(20.0, 20.0, 20.0),
            grid_n: 8,
            seed: 0,
        }
    }
}

/// Linearization class of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointClass {
    /// Real spectrum, all of one sign.
    Node,
    /// Real spectrum of mixed signs.
    Saddle,
    /// Complex pair plus a real eigenvalue, real parts not of mixed sign.
    FocusNode,
    /// Complex pair plus a real eigenvalue, nonzero real parts of mixed sign.
    SaddleFocus,
}

impl FixedPointClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointClass::Node => "node",
            FixedPointClass::Saddle => "saddle",
            FixedPointClass::FocusNode => "focus-node",
            FixedPointClass::SaddleFocus => "saddle-focus",
        }
    }

    /// Local geometry of the zero set of the curvature scalar around a
    /// fixed point of this class.
    pub fn shape(self) -> ShapeLabel {
        match self {
            FixedPointClass::Node | FixedPointClass::FocusNode => ShapeLabel::Plane,
            FixedPointClass::Saddle => ShapeLabel::ThreeTransversePlanes,
            FixedPointClass::SaddleFocus => ShapeLabel::PlaneWithTwoParaboloids,
        }
    }
}

/// Local shape of the curvature manifold near a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeLabel {
    Plane,
    ThreeTransversePlanes,
    PlaneWithTwoParaboloids,
}

impl ShapeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeLabel::Plane => "plane",
            ShapeLabel::ThreeTransversePlanes => "three transverse planes",
            ShapeLabel::PlaneWithTwoParaboloids => "plane + two elliptic paraboloids",
        }
    }
}

/// Position of a fixed point relative to the attractor, read off the
/// dimension of its unstable manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Two eigenvalues with positive real part (2D unstable manifold); the
    /// trajectory spirals away around this point.
    Inner,
    /// Exactly one eigenvalue with positive real part (1D unstable
    /// manifold).
    Outer,
    /// Anything else (fully stable, fully unstable, or marginal spectra).
    Marginal,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Inner => "inner",
            Role::Outer => "outer",
            Role::Marginal => "marginal",
        }
    }
}

/// A refined fixed point with its linearization data.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub location: Vector3<f64>,
    /// ‖F(location)‖ after refinement.
    pub residual: f64,
    pub jacobian: Matrix3<f64>,
    /// Canonical order: real eigenvalue first, then the pair member with
    /// positive imaginary part, then its conjugate. A fully real spectrum is
    /// sorted by descending real part instead.
    pub eigenvalues: [Complex<f64>; 3],
    pub eigenvectors: [Vector3<Complex<f64>>; 3],
    pub class: FixedPointClass,
    pub role: Role,
    pub shape: ShapeLabel,
    /// Only saddle-foci carry a nonvanishing time-dependent curvature
    /// component in their neighborhood.
    pub has_phi_t_component: bool,
}

fn inside(x: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>, slack: f64) -> bool {
    (0..3).all(|i| x[i] >= lo[i] - slack && x[i] <= hi[i] + slack)
}

/// Newton iteration on F(X) = 0. Returns the root when the update collapses
/// and the residual passes [`ROOT_RESIDUAL`]; anything else is discarded.
fn newton(field: &BoundField, seed: Vector3<f64>) -> Option<Vector3<f64>> {
    let mut x = seed;
    for _ in 0..100 {
        let fx = field.f(&x);
        if !fx.iter().all(|v| v.is_finite()) {
            return None;
        }
        let j = field.jacobian_at(&x);
        let delta = j.lu().solve(&(-fx))?;
        if !delta.iter().all(|v| v.is_finite()) || delta.norm() > 1e4 {
            return None;
        }
        x += delta;
        if x.norm() > 1e6 {
            return None;
        }
        if delta.norm() <= 1e-12 * (1.0 + x.norm()) {
            break;
        }
    }
    (field.f(&x).norm() < ROOT_RESIDUAL).then_some(x)
}

enum SpectrumKind {
    ThreeReal,
    RealAndPair,
}

/// Puts a raw eigenvalue triple into canonical form: conjugate symmetry is
/// enforced exactly, near-real values are snapped onto the axis.
fn canonical_spectrum(raw: [Complex<f64>; 3]) -> ([Complex<f64>; 3], SpectrumKind) {
    let scale = raw.iter().map(|l| l.norm()).fold(1.0, f64::max);
    let tol = ZERO_REAL_TOL * scale;
    // Candidate pair: the two entries with the largest imaginary magnitude.
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| {
        raw[b]
            .im
            .abs()
            .partial_cmp(&raw[a].im.abs())
            .expect("finite eigenvalues")
    });
    let (p, q, r) = (raw[idx[0]], raw[idx[1]], raw[idx[2]]);
    let is_pair = p.im.abs() > tol && q.im.abs() > tol && p.im * q.im < 0.0;
    if is_pair {
        let re = 0.5 * (p.re + q.re);
        let im = 0.5 * (p.im.abs() + q.im.abs());
        let real = Complex::new(r.re, 0.0);
        (
            [real, Complex::new(re, im), Complex::new(re, -im)],
            SpectrumKind::RealAndPair,
        )
    } else {
        let mut reals = [raw[0].re, raw[1].re, raw[2].re];
        reals.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
        (
            reals.map(|re| Complex::new(re, 0.0)),
            SpectrumKind::ThreeReal,
        )
    }
}

fn complex_cross(
    a: &Vector3<Complex<f64>>,
    b: &Vector3<Complex<f64>>,
) -> Vector3<Complex<f64>> {
    Vector3::new(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}

fn complex_norm(v: &Vector3<Complex<f64>>) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Null vector of (J − λI), from the cross products of its rows; when the
/// shifted matrix vanishes (repeated eigenvalue with full eigenspace) any
/// direction works and a basis vector is returned.
fn eigenvector(j: &Matrix3<f64>, lambda: Complex<f64>, fallback_axis: usize) -> Vector3<Complex<f64>> {
    let row = |i: usize| {
        Vector3::new(
            Complex::new(j[(i, 0)], 0.0) - if i == 0 { lambda } else { Complex::new(0.0, 0.0) },
            Complex::new(j[(i, 1)], 0.0) - if i == 1 { lambda } else { Complex::new(0.0, 0.0) },
            Complex::new(j[(i, 2)], 0.0) - if i == 2 { lambda } else { Complex::new(0.0, 0.0) },
        )
    };
    let rows = [row(0), row(1), row(2)];
    let candidates = [
        complex_cross(&rows[0], &rows[1]),
        complex_cross(&rows[0], &rows[2]),
        complex_cross(&rows[1], &rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| {
            complex_norm(a)
                .partial_cmp(&complex_norm(b))
                .expect("finite vectors")
        })
        .expect("nonempty");
    let norm = complex_norm(best);
    let matrix_scale = j.iter().fold(1.0_f64, |m, v| m.max(v.abs())) + lambda.norm();
    if norm <= 1e-14 * matrix_scale * matrix_scale {
        let mut v = Vector3::new(
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
        );
        v[fallback_axis] = Complex::new(1.0, 0.0);
        return v;
    }
    best.map(|c| c / norm)
}

/// ‖(J − λI)v‖ — the defect of (λ, v) as an eigenpair.
pub fn eigenvector_residual(
    j: &Matrix3<f64>,
    lambda: Complex<f64>,
    v: &Vector3<Complex<f64>>,
) -> f64 {
    let jc = j.map(|x| Complex::new(x, 0.0));
    let out = jc * v - v * lambda;
    complex_norm(&out)
}

fn classify(eigenvalues: &[Complex<f64>; 3], kind: &SpectrumKind) -> FixedPointClass {
    let scale = eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
    let tol = ZERO_REAL_TOL * scale;
    match kind {
        SpectrumKind::ThreeReal => {
            let pos = eigenvalues.iter().filter(|l| l.re > tol).count();
            let neg = eigenvalues.iter().filter(|l| l.re < -tol).count();
            if pos > 0 && neg > 0 {
                FixedPointClass::Saddle
            } else {
                FixedPointClass::Node
            }
        }
        SpectrumKind::RealAndPair => {
            let real = eigenvalues[0].re;
            let pair = eigenvalues[1].re;
            if real.abs() > tol && pair.abs() > tol && real * pair < 0.0 {
                FixedPointClass::SaddleFocus
            } else {
                FixedPointClass::FocusNode
            }
        }
    }
}

fn role(eigenvalues: &[Complex<f64>; 3]) -> Role {
    let scale = eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
    let tol = ZERO_REAL_TOL * scale;
    match eigenvalues.iter().filter(|l| l.re > tol).count() {
        2 => Role::Inner,
        1 => Role::Outer,
        _ => Role::Marginal,
    }
}

fn analyze(field: &BoundField, location: Vector3<f64>) -> FixedPoint {
    let jacobian = field.jacobian_at(&location);
    let raw = jacobian.complex_eigenvalues();
    let (eigenvalues, kind) = canonical_spectrum([raw[0], raw[1], raw[2]]);
    let eigenvectors = [
        eigenvector(&jacobian, eigenvalues[0], 0),
        eigenvector(&jacobian, eigenvalues[1], 1),
        eigenvector(&jacobian, eigenvalues[2], 2),
    ];
    let class = classify(&eigenvalues, &kind);
    FixedPoint {
        location,
        residual: field.f(&location).norm(),
        jacobian,
        eigenvalues,
        eigenvectors,
        class,
        role: role(&eigenvalues),
        shape: class.shape(),
        has_phi_t_component: class == FixedPointClass::SaddleFocus,
    }
}

/// Finds the real fixed points of `field` inside the search box.
///
/// Newton iterations start from a `grid_n³` lattice of jittered seeds;
/// non-convergent seeds are dropped silently, converged roots are merged
/// when closer than 1e−6 and classified through the Jacobian spectrum.
/// Results are sorted by distance from the origin.
pub fn find_fixed_points(field: &BoundField, opts: &SearchOptions) -> Vec<FixedPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.grid_n.max(1);
    let span = opts.box_max - opts.box_min;
    let cell = span / n as f64;

    let mut roots: Vec<(Vector3<f64>, f64)> = Vec::new();
    for ix in 0..n {
        for iy in 0..n {
            for iz in 0..n {
                let base = opts.box_min
                    + Vector3::new(
                        (ix as f64 + 0.5) * cell[0],
                        (iy as f64 + 0.5) * cell[1],
                        (iz as f64 + 0.5) * cell[2],
                    );
                let jitter = Vector3::new(
                    rng.gen_range(-0.25..0.25) * cell[0],
                    rng.gen_range(-0.25..0.25) * cell[1],
                    rng.gen_range(-0.25..0.25) * cell[2],
                );
                let Some(root) = newton(field, base + jitter) else {
                    continue;
                };
                if !inside(&root, &opts.box_min, &opts.box_max, MERGE_DISTANCE) {
                    continue;
                }
                let residual = field.f(&root).norm();
                match roots
                    .iter_mut()
                    .find(|(r, _)| (*r - root).norm() < MERGE_DISTANCE)
                {
                    Some(slot) => {
                        if residual < slot.1 {
                            *slot = (root, residual);
                        }
                    }
                    None => roots.push((root, residual)),
                }
            }
        }
    }

    roots.sort_by(|a, b| {
        let key = |v: &Vector3<f64>| (v.norm(), v[0], v[1], v[2]);
        key(&a.0)
            .partial_cmp(&key(&b.0))
            .expect("finite fixed points")
    });
    roots
        .into_iter()
        .map(|(location, _)| analyze(field, location))
        .collect()
}

/// Outcome of the wrapping-number computation. The number is defined for
/// exactly two fixed points whose outer member carries a complex pair and a
/// nonzero real eigenvalue; every other configuration is flagged with a
/// reason instead.
#[derive(Debug, Clone)]
pub struct WrappingReport {
    /// |Im| of the outer fixed point's complex pair.
    pub omega: Option<f64>,
    /// Real eigenvalue of the outer fixed point.
    pub lambda_3: Option<f64>,
    /// Distance between the two fixed points.
    pub separation: Option<f64>,
    /// W = |ω / λ₃| · separation.
    pub value: Option<f64>,
    /// Index (into the input slice) of the outer fixed point.
    pub outer_index: Option<usize>,
    /// Why the number is undefined, when it is.
    pub note: Option<String>,
}

impl WrappingReport {
    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }

    fn undefined(note: String) -> WrappingReport {
        WrappingReport {
            omega: None,
            lambda_3: None,
            separation: None,
            value: None,
            outer_index: None,
            note: Some(note),
        }
    }
}

/// Computes the wrapping number W = |ω/λ₃|·D from a fixed-point list.
pub fn wrapping_number(fps: &[FixedPoint]) -> WrappingReport {
    if fps.len() != 2 {
        return WrappingReport::undefined(format!(
            "wrapping number requires exactly two fixed points (found {})",
            fps.len()
        ));
    }
    let outer: Vec<usize> = (0..2).filter(|&i| fps[i].role == Role::Outer).collect();
    let &[outer_index] = outer.as_slice() else {
        return WrappingReport::undefined(
            "no unique fixed point with a one-dimensional unstable manifold".into(),
        );
    };
    let eigen = &fps[outer_index].eigenvalues;
    if eigen[1].im == 0.0 {
        return WrappingReport::undefined(
            "the outer fixed point has no complex-conjugate eigenvalue pair".into(),
        );
    }
    let lambda_3 = eigen[0].re;
    if lambda_3 == 0.0 {
        return WrappingReport::undefined(
            "the real eigenvalue of the outer fixed point vanishes".into(),
        );
    }
    let omega = eigen[1].im.abs();
    let separation = (fps[0].location - fps[1].location).norm();
    WrappingReport {
        omega: Some(omega),
        lambda_3: Some(lambda_3),
        separation: Some(separation),
        value: Some((omega / lambda_3).abs() * separation),
        outer_index: Some(outer_index),
        note: None,
    }
}
