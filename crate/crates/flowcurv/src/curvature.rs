//! The curvature scalar φ = det(Ẋ, Ẍ, X⃛) of a flow, split into a
//! time-independent part φ_c = det(Ẋ, Ẍ, JẌ) and a time-dependent part
//! φ_t = det(Ẋ, Ẍ, (dJ/dt)Ẋ), plus zero-crossing detection along
//! trajectories and Lie-derivative residual statistics over the zero set.
//!
//! Every quantity is computed along two independent routes — a numeric
//! determinant of the derivative stack and a prebuilt symbolic polynomial —
//! so each path checks the other.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::field_dsl::{Axis, BoundField, ClosedExpr, Expr, VectorField};

/// Which scalar of the decomposition an operation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSelector {
    Phi,
    PhiC,
    PhiT,
}

impl FieldSelector {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldSelector::Phi => "phi",
            FieldSelector::PhiC => "phi_c",
            FieldSelector::PhiT => "phi_t",
        }
    }
}

impl std::str::FromStr for FieldSelector {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<FieldSelector> {
        match s {
            "phi" => Ok(FieldSelector::Phi),
            "phi_c" => Ok(FieldSelector::PhiC),
            "phi_t" => Ok(FieldSelector::PhiT),
            other => Err(crate::Error::InvalidInput(format!(
                "unknown field selector `{other}` (expected phi, phi_c, or phi_t)"
            ))),
        }
    }
}

/// One evaluation of the decomposition at a state.
#[derive(Debug, Clone)]
pub struct CurvatureSample {
    pub state: Vector3<f64>,
    pub phi: f64,
    pub phi_c: f64,
    pub phi_t: f64,
    pub grad_phi: Vector3<f64>,
}

/// Symbolic expression of w_i = Σ_j M[i][j] · v_j.
fn matvec_expr(m: &[[ClosedExpr; 3]; 3], v: &[Expr; 3]) -> [Expr; 3] {
    std::array::from_fn(|i| {
        Expr::sum(
            (0..3)
                .map(|j| Expr::mul(m[i][j].expr().clone(), v[j].clone()))
                .collect(),
        )
    })
}

/// Symbolic determinant of the matrix with columns (u, v, w), expanded as
/// the triple product u · (v × w).
fn det_expr(u: &[Expr; 3], v: &[Expr; 3], w: &[Expr; 3]) -> Expr {
    let minor = |a: usize, b: usize| {
        Expr::sub(
            Expr::mul(v[a].clone(), w[b].clone()),
            Expr::mul(v[b].clone(), w[a].clone()),
        )
    };
    Expr::sum(vec![
        Expr::mul(u[0].clone(), minor(1, 2)),
        Expr::mul(u[1].clone(), minor(2, 0)),
        Expr::mul(u[2].clone(), minor(0, 1)),
    ])
}

fn close(e: Expr) -> ClosedExpr {
    ClosedExpr::new(e).expect("built from closed expressions")
}

fn gradient_of(e: &ClosedExpr) -> [ClosedExpr; 3] {
    std::array::from_fn(|i| e.diff(Axis::ALL[i]))
}

/// Builds the φ_t factorization when exactly one field row has any nonzero
/// second derivative (see [`PhiTFactors`]).
fn factorize_phi_t(
    field: &BoundField,
    f: &[Expr; 3],
    acc: &[Expr; 3],
    jerk_t: &[Expr; 3],
) -> Option<PhiTFactors> {
    let row_is_curved = |r: usize| {
        let c = &field.components()[r];
        Axis::ALL.iter().any(|&a| {
            let d = c.diff(a);
            Axis::ALL.iter().any(|&b| !d.diff(b).is_identically_zero())
        })
    };
    let mut curved = (0..3).filter(|&r| row_is_curved(r));
    let row = curved.next()?;
    if curved.next().is_some() {
        return None;
    }
    let basis: [Expr; 3] =
        std::array::from_fn(|i| Expr::constant(if i == row { 1.0 } else { 0.0 }));
    let geometric = close(det_expr(f, acc, &basis));
    let geometric_grad = gradient_of(&geometric);
    Some(PhiTFactors {
        row,
        velocity: close(jerk_t[row].clone()),
        geometric,
        geometric_grad,
    })
}

/// Exact on-flow factorization φ_t = velocity · geometric.
///
/// When every nonzero second derivative of the field sits in a single
/// component row r, the rate-of-Jacobian term is (dJ/dt)Ẋ = v(X)·e_r with
/// v(X) = Ẋᵀ H_r Ẋ (the row's Hessian form evaluated on the velocity), so
///
///   φ_t = det(Ẋ, Ẍ, (dJ/dt)Ẋ) = v(X) · det(Ẋ, Ẍ, e_r).
///
/// The two factors separate two very different kinds of zero sheet:
/// `velocity` vanishes wherever the velocity components of row r's
/// curvature happen to cancel — sheets tied to the direction of motion, not
/// to the attractor's geometry — while `geometric` carries the sign
/// structure of φ_t everywhere else. Sign changes of φ_t along an orbit off
/// the velocity sheets are exactly sign changes of the geometric factor.
#[derive(Debug, Clone)]
pub struct PhiTFactors {
    /// The single field row holding every nonlinear (curved) term.
    pub row: usize,
    velocity: ClosedExpr,
    geometric: ClosedExpr,
    geometric_grad: [ClosedExpr; 3],
}

impl PhiTFactors {
    /// v(X) = Ẋᵀ H_row Ẋ evaluated on the flow.
    pub fn velocity(&self, state: &Vector3<f64>) -> f64 {
        self.velocity.eval(state)
    }

    /// g(X) = det(Ẋ, Ẍ, e_row).
    pub fn geometric(&self, state: &Vector3<f64>) -> f64 {
        self.geometric.eval(state)
    }

    pub fn geometric_gradient(&self, state: &Vector3<f64>) -> Vector3<f64> {
        let g = &self.geometric_grad;
        Vector3::new(g[0].eval(state), g[1].eval(state), g[2].eval(state))
    }

    pub fn velocity_expression(&self) -> &ClosedExpr {
        &self.velocity
    }

    pub fn geometric_expression(&self) -> &ClosedExpr {
        &self.geometric
    }
}

/// The curvature scalars of one bound field, with prebuilt symbolic forms
/// and gradients.
#[derive(Debug, Clone)]
pub struct Curvature {
    field: BoundField,
    phi: ClosedExpr,
    phi_c: ClosedExpr,
    phi_t: ClosedExpr,
    grads: [[ClosedExpr; 3]; 3],
    factors: Option<PhiTFactors>,
}

impl Curvature {
    /// Binds `field` (defaults plus `overrides`) and builds the symbolic
    /// scalars.
    pub fn new(field: &VectorField, overrides: &[(String, f64)]) -> Result<Curvature> {
        Ok(Curvature::from_bound(field.bind(overrides)?))
    }

    pub fn from_bound(field: BoundField) -> Curvature {
        let f: [Expr; 3] = std::array::from_fn(|i| field.components()[i].expr().clone());
        let acc = matvec_expr(field.jacobian_exprs(), &f);
        let jerk_c = matvec_expr(field.jacobian_exprs(), &acc);
        let jerk_t = matvec_expr(field.jacobian_rate_exprs(), &f);
        let phi_c = close(det_expr(&f, &acc, &jerk_c));
        let phi_t = close(det_expr(&f, &acc, &jerk_t));
        let jerk: [Expr; 3] =
            std::array::from_fn(|i| Expr::add(jerk_c[i].clone(), jerk_t[i].clone()));
        let phi = close(det_expr(&f, &acc, &jerk));
        let grads = [
            gradient_of(&phi),
            gradient_of(&phi_c),
            gradient_of(&phi_t),
        ];
        let factors = factorize_phi_t(&field, &f, &acc, &jerk_t);
        Curvature {
            field,
            phi,
            phi_c,
            phi_t,
            grads,
            factors,
        }
    }

    /// The exact factorization of φ_t, when one exists (every nonlinear
    /// term of the field confined to a single row). `None` for affine
    /// fields (φ_t ≡ 0 needs no factoring) and for fields curved in more
    /// than one row.
    pub fn phi_t_factors(&self) -> Option<&PhiTFactors> {
        self.factors.as_ref()
    }

    pub fn bound(&self) -> &BoundField {
        &self.field
    }

    /// The symbolic polynomial of the selected scalar.
    pub fn expression(&self, which: FieldSelector) -> &ClosedExpr {
        match which {
            FieldSelector::Phi => &self.phi,
            FieldSelector::PhiC => &self.phi_c,
            FieldSelector::PhiT => &self.phi_t,
        }
    }

    /// Numeric-route values (φ, φ_c, φ_t): determinants of the derivative
    /// stack assembled at `state`.
    pub fn det_values(&self, state: &Vector3<f64>) -> (f64, f64, f64) {
        let stack = self.field.derivative_stack(state);
        let phi = Matrix3::from_columns(&[stack.xdot, stack.xddot, stack.xdddot]).determinant();
        let phi_c = Matrix3::from_columns(&[
            stack.xdot,
            stack.xddot,
            stack.jacobian * stack.xddot,
        ])
        .determinant();
        let phi_t = Matrix3::from_columns(&[
            stack.xdot,
            stack.xddot,
            stack.jacobian_rate * stack.xdot,
        ])
        .determinant();
        (phi, phi_c, phi_t)
    }

    /// Symbolic-route value of the selected scalar.
    pub fn value(&self, which: FieldSelector, state: &Vector3<f64>) -> f64 {
        self.expression(which).eval(state)
    }

    /// Gradient of the selected scalar (symbolic, evaluated numerically).
    pub fn gradient(&self, which: FieldSelector, state: &Vector3<f64>) -> Vector3<f64> {
        let g = &self.grads[match which {
            FieldSelector::Phi => 0,
            FieldSelector::PhiC => 1,
            FieldSelector::PhiT => 2,
        }];
        Vector3::new(g[0].eval(state), g[1].eval(state), g[2].eval(state))
    }

    /// Full decomposition sample at a state: scalars from the determinant
    /// route, gradient from the symbolic route.
    pub fn sample(&self, state: &Vector3<f64>) -> CurvatureSample {
        let (phi, phi_c, phi_t) = self.det_values(state);
        CurvatureSample {
            state: *state,
            phi,
            phi_c,
            phi_t,
            grad_phi: self.gradient(FieldSelector::Phi, state),
        }
    }
}

/// Sign-change direction of a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    PosToNeg,
    NegToPos,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::PosToNeg => "+to-",
            Direction::NegToPos => "-to+",
        }
    }
}

/// A refined zero of the selected scalar along a trajectory.
#[derive(Debug, Clone)]
pub struct CrossingEvent {
    pub t: f64,
    pub state: Vector3<f64>,
    pub which: FieldSelector,
    pub direction: Direction,
    /// Scalar value at the refined state (bounded by the refinement
    /// tolerance).
    pub value: f64,
}

/// Result of scanning one trajectory for zeros of a curvature scalar.
///
/// `events` hold isolated sign changes; `tangencies` hold the zeros of
/// double sign changes inside a single output interval (grazing passes),
/// kept apart so callers can decide their meaning.
#[derive(Debug, Clone)]
pub struct CrossingScan {
    pub which: FieldSelector,
    pub events: Vec<CrossingEvent>,
    pub tangencies: Vec<CrossingEvent>,
    /// Median |value| over the trajectory samples — the tolerance scale.
    pub scale: f64,
}

/// Cubic Hermite interpolation of the segment from `(p0, m0)` to `(p1, m1)`
/// over θ ∈ [0, 1]; tangents are already scaled by the segment duration.
fn hermite(
    p0: &Vector3<f64>,
    m0: &Vector3<f64>,
    p1: &Vector3<f64>,
    m1: &Vector3<f64>,
    theta: f64,
) -> Vector3<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + theta)
        + p1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

/// Refines a bracketed zero of `g` on [a, b] (g(a)·g(b) < 0) by bisection
/// with secant acceleration, until |g| ≤ tol or the bracket collapses.
fn refine_zero(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let (mut ga, mut gb) = (g(a), g(b));
    debug_assert!(ga * gb <= 0.0);
    let mut best = if ga.abs() < gb.abs() { (a, ga) } else { (b, gb) };
    for _ in 0..80 {
        if best.1.abs() <= tol || (b - a).abs() < 1e-15 {
            break;
        }
        // Secant candidate, demoted to the midpoint when degenerate or
        // outside the bracket.
        let mut c = if (gb - ga).abs() > 0.0 {
            b - gb * (b - a) / (gb - ga)
        } else {
            0.5 * (a + b)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c);
        if gc.abs() < best.1.abs() {
            best = (c, gc);
        }
        if ga * gc <= 0.0 {
            b = c;
            gb = gc;
        } else {
            a = c;
            ga = gc;
        }
    }
    best
}

/// Scans `traj` for zeros of the selected curvature scalar.
///
/// Values are checked at every sample and at the interpolated midpoint of
/// every interval, so grazing double crossings inside one interval are
/// caught and reported as tangencies. Each zero is refined along the
/// interpolated curve until the scalar magnitude drops below
/// 1e−8·max(1, median |value|).
pub fn crossings(curv: &Curvature, traj: &Trajectory, which: FieldSelector) -> CrossingScan {
    scan_scalar(curv.bound(), traj, which, &|s| curv.value(which, s))
}

/// Zero crossings of the geometric factor of φ_t along `traj` (see
/// [`PhiTFactors`]): the sign changes of φ_t that are carried by the
/// surface geometry rather than by the velocity factor. Events are labeled
/// `PhiT` (off the velocity sheets every geometric sign change is a φ_t
/// sign change); their `value` and the scan's `scale` refer to the
/// geometric factor. `None` when the field has no single-row factorization.
pub fn geometric_crossings(curv: &Curvature, traj: &Trajectory) -> Option<CrossingScan> {
    let factors = curv.phi_t_factors()?;
    Some(scan_scalar(curv.bound(), traj, FieldSelector::PhiT, &|s| {
        factors.geometric(s)
    }))
}

/// Shared sign-change scanner behind [`crossings`] and
/// [`geometric_crossings`].
fn scan_scalar(
    bound: &BoundField,
    traj: &Trajectory,
    which: FieldSelector,
    value: &dyn Fn(&Vector3<f64>) -> f64,
) -> CrossingScan {
    let states = traj.states();
    let mut scan = CrossingScan {
        which,
        events: Vec::new(),
        tangencies: Vec::new(),
        scale: 0.0,
    };
    if states.len() < 2 {
        return scan;
    }
    let dt = traj.dt_output();

    let values: Vec<f64> = states.iter().map(value).collect();
    let mut magnitudes: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    magnitudes.sort_by(|x, y| x.partial_cmp(y).expect("finite curvature values"));
    scan.scale = magnitudes[magnitudes.len() / 2];
    let tol = 1e-8 * scan.scale.max(1.0);

    let tangents: Vec<Vector3<f64>> = states.iter().map(|s| bound.f(s) * dt).collect();

    for k in 0..states.len() - 1 {
        let (v0, v1) = (values[k], values[k + 1]);
        if v0 == 0.0 {
            // A sample sitting exactly on the zero set: record it without
            // refinement, classified by the departure side.
            if v1 != 0.0 {
                scan.events.push(CrossingEvent {
                    t: traj.time(k),
                    state: states[k],
                    which,
                    direction: if v1 > 0.0 {
                        Direction::NegToPos
                    } else {
                        Direction::PosToNeg
                    },
                    value: 0.0,
                });
            }
            continue;
        }
        let curve = |theta: f64| {
            hermite(
                &states[k],
                &tangents[k],
                &states[k + 1],
                &tangents[k + 1],
                theta,
            )
        };
        let g = |theta: f64| value(&curve(theta));
        let push = |bracket: (f64, f64, f64, f64), out: &mut Vec<CrossingEvent>| {
            let (a, ga, b, _gb) = bracket;
            let (theta, gv) = refine_zero(&g, a, b, tol);
            out.push(CrossingEvent {
                t: traj.time(k) + theta * dt,
                state: curve(theta),
                which,
                direction: if ga > 0.0 {
                    Direction::PosToNeg
                } else {
                    Direction::NegToPos
                },
                value: gv,
            });
        };
        if v0 * v1 < 0.0 {
            let vm = g(0.5);
            if vm == 0.0 || v0 * vm < 0.0 {
                push((0.0, v0, 0.5, vm), &mut scan.events);
            } else {
                push((0.5, vm, 1.0, v1), &mut scan.events);
            }
        } else {
            let vm = g(0.5);
            if vm != 0.0 && v0 * vm < 0.0 {
                // Double sign change within one interval: a grazing pass.
                push((0.0, v0, 0.5, vm), &mut scan.tangencies);
                push((0.5, vm, 1.0, v1), &mut scan.tangencies);
            }
        }
    }
    scan
}

/// Distribution summary of the normalized Lie-derivative residual
/// |∇φ·F| / (‖∇φ‖·‖F‖) over points of the zero set.
#[derive(Debug, Clone)]
pub struct DarbouxStats {
    pub count: usize,
    /// Points skipped because ∇φ or F (numerically) vanishes there.
    pub excluded_degenerate: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

/// Measures how nearly the zero set of the selected scalar is carried along
/// the flow. Diagnostic: nothing here asserts invariance.
pub fn darboux_residual(
    curv: &Curvature,
    which: FieldSelector,
    points: &[Vector3<f64>],
) -> Option<DarbouxStats> {
    const DEGENERATE: f64 = 1e-10;
    let mut residuals = Vec::with_capacity(points.len());
    let mut excluded = 0usize;
    for p in points {
        let grad = curv.gradient(which, p);
        let f = curv.bound().f(p);
        let (gn, fn_) = (grad.norm(), f.norm());
        if gn < DEGENERATE || fn_ < DEGENERATE {
            excluded += 1;
            continue;
        }
        residuals.push((grad.dot(&f)).abs() / (gn * fn_));
    }
    if residuals.is_empty() {
        return None;
    }
    residuals.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    let count = residuals.len();
    Some(DarbouxStats {
        count,
        excluded_degenerate: excluded,
        min: residuals[0],
        max: residuals[count - 1],
        mean: residuals.iter().sum::<f64>() / count as f64,
        median: residuals[count / 2],
    })
}

/// Samples points of the zero set of the selected scalar: sign changes
/// along random chords through `bounds` are bisected, then polished by
/// Newton steps along the gradient. Every returned point satisfies
/// |value| < 1e−6; chord roots that cannot be driven that low (near
/// gradient degeneracies) are dropped. Returns at most `target` points;
/// fewer (possibly none) when the surface barely cuts the box.
pub fn manifold_points(
    curv: &Curvature,
    which: FieldSelector,
    bounds: (Vector3<f64>, Vector3<f64>),
    target: usize,
    seed: u64,
) -> Vec<Vector3<f64>> {
    const ACCEPT: f64 = 1e-6;
    let (lo, hi) = bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_point = |rng: &mut ChaCha8Rng| {
        Vector3::new(
            rng.gen_range(lo[0]..=hi[0]),
            rng.gen_range(lo[1]..=hi[1]),
            rng.gen_range(lo[2]..=hi[2]),
        )
    };
    let mut points = Vec::with_capacity(target);
    let budget = target.saturating_mul(40).max(400);
    for _ in 0..budget {
        if points.len() >= target {
            break;
        }
        let a = random_point(&mut rng);
        let b = random_point(&mut rng);
        let (va, vb) = (curv.value(which, &a), curv.value(which, &b));
        if va == 0.0 || vb == 0.0 || va * vb > 0.0 {
            continue;
        }
        let g = |theta: f64| curv.value(which, &(a + (b - a) * theta));
        let tol = 1e-10 * va.abs().max(vb.abs());
        let (theta, _) = refine_zero(&g, 0.0, 1.0, tol);
        let mut p = a + (b - a) * theta;
        for _ in 0..8 {
            let v = curv.value(which, &p);
            if v.abs() < ACCEPT {
                break;
            }
            let grad = curv.gradient(which, &p);
            let norm_sq = grad.norm_squared();
            if norm_sq < 1e-20 {
                break;
            }
            p -= grad * (v / norm_sq);
        }
        if curv.value(which, &p).abs() < ACCEPT {
            points.push(p);
        }
    }
    points
}
