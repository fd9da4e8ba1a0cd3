//! Poincaré sections, first-return maps, monotone-branch partitioning, and
//! branch-to-branch transition matrices.

use nalgebra::Vector3;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::field_dsl::BoundField;

/// Minimum crossings required before a return map is partitioned.
pub const MIN_CROSSINGS_FOR_PARTITION: usize = 200;
/// Moving-median window used to smooth images before run detection.
pub const SMOOTHING_WINDOW: usize = 5;
/// A slope-sign flip must persist for this many nonzero diffs to count as a
/// branch boundary.
pub const MIN_RUN_LENGTH: usize = 8;
/// Tolerated fraction of within-panel slope-sign violations.
pub const VIOLATION_BUDGET: f64 = 0.02;
/// A branch narrower than this fraction of the ρ-span is a merge candidate.
pub const MERGE_WIDTH_FRACTION: f64 = 0.1;
/// Image overlap (fraction of the smaller image span) beyond which a narrow
/// branch is folded into its neighbor.
pub const MERGE_IMAGE_OVERLAP: f64 = 0.8;

/// Which sign of the normal velocity Ẋ·n̂ a section accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionDirection {
    /// Ẋ·n̂ > 0 at the crossing.
    Up,
    /// Ẋ·n̂ < 0 at the crossing.
    Down,
    Both,
}

impl SectionDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SectionDirection::Up => "+",
            SectionDirection::Down => "-",
            SectionDirection::Both => "both",
        }
    }

    fn accepts(self, normal_speed: f64) -> bool {
        match self {
            SectionDirection::Up => normal_speed > 0.0,
            SectionDirection::Down => normal_speed < 0.0,
            SectionDirection::Both => true,
        }
    }
}

/// A planar section with its crossing filter and in-plane coordinate.
#[derive(Debug, Clone)]
pub struct SectionSpec {
    /// A point of the plane (the reference for ρ).
    pub point: Vector3<f64>,
    /// Unit plane normal.
    pub normal: Vector3<f64>,
    /// Unit in-plane direction; ρ = (X − point)·rho_axis.
    pub rho_axis: Vector3<f64>,
    /// Accepted sign of the normal velocity.
    pub direction: SectionDirection,
    /// When set, only crossings with ρ > 0 are kept (a half-plane section).
    pub half_plane_only: bool,
}

impl SectionSpec {
    /// Builds a spec, normalizing the normal and projecting `rho_axis` into
    /// the plane.
    pub fn new(
        point: Vector3<f64>,
        normal: Vector3<f64>,
        rho_axis: Vector3<f64>,
        direction: SectionDirection,
        half_plane_only: bool,
    ) -> Result<SectionSpec> {
        let n_norm = normal.norm();
        if n_norm < 1e-12 {
            return Err(Error::InvalidInput("section normal must be nonzero".into()));
        }
        let normal = normal / n_norm;
        let in_plane = rho_axis - normal * rho_axis.dot(&normal);
        let r_norm = in_plane.norm();
        if r_norm < 1e-12 {
            return Err(Error::InvalidInput(
                "rho axis must have a component inside the section plane".into(),
            ));
        }
        Ok(SectionSpec {
            point,
            normal,
            rho_axis: in_plane / r_norm,
            direction,
            half_plane_only,
        })
    }

    /// The default section for an attractor: the half-plane through
    /// `inner_point` whose normal is the coordinate axis of largest
    /// trajectory variance, on the side of the trajectory centroid, keeping
    /// the majority crossing direction.
    pub fn default_for(traj: &Trajectory, inner_point: &Vector3<f64>) -> Result<SectionSpec> {
        let states = traj.states();
        if states.len() < 10 {
            return Err(Error::InvalidInput(
                "trajectory too short to derive a section".into(),
            ));
        }
        let centroid = traj.centroid().expect("nonempty trajectory");
        let mut variance = Vector3::zeros();
        for s in states {
            let d = s - centroid;
            variance += d.component_mul(&d);
        }
        let axis = variance.imax();
        let mut normal = Vector3::zeros();
        normal[axis] = 1.0;

        let mut rho_axis = centroid - inner_point;
        rho_axis[axis] = 0.0;
        if rho_axis.norm() < 1e-9 {
            // Degenerate centroid direction: fall back to the axis of
            // second-largest variance.
            let mut v = variance;
            v[axis] = f64::NEG_INFINITY;
            rho_axis = Vector3::zeros();
            rho_axis[v.imax()] = 1.0;
        }
        let mut spec = SectionSpec::new(
            *inner_point,
            normal,
            rho_axis,
            SectionDirection::Both,
            true,
        )?;

        // Majority crossing direction among half-plane candidates (linear
        // interpolation is enough for counting); ties go Down.
        let (mut up, mut down) = (0usize, 0usize);
        for w in states.windows(2) {
            let g0 = (w[0] - spec.point).dot(&spec.normal);
            let g1 = (w[1] - spec.point).dot(&spec.normal);
            if g0 * g1 < 0.0 {
                let theta = g0 / (g0 - g1);
                let state = w[0] + (w[1] - w[0]) * theta;
                if (state - spec.point).dot(&spec.rho_axis) > 0.0 {
                    if g1 > g0 {
                        up += 1;
                    } else {
                        down += 1;
                    }
                }
            }
        }
        spec.direction = if up > down {
            SectionDirection::Up
        } else {
            SectionDirection::Down
        };
        Ok(spec)
    }
}

/// One accepted transversal crossing.
#[derive(Debug, Clone)]
pub struct SectionCrossing {
    pub t: f64,
    pub state: Vector3<f64>,
    /// In-plane coordinate (X − point)·rho_axis.
    pub rho: f64,
    /// Normal velocity Ẋ·n̂ at the crossing.
    pub normal_speed: f64,
}

/// All accepted crossings of a trajectory, plus the tangential-contact
/// count.
#[derive(Debug, Clone)]
pub struct SectionScan {
    pub crossings: Vec<SectionCrossing>,
    /// Crossings discarded because |Ẋ·n̂| ≤ 1e−8 at the refined state.
    pub tangential_dropped: usize,
}

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

fn hermite_derivative(
    p0: &Vector3<f64>,
    m0: &Vector3<f64>,
    p1: &Vector3<f64>,
    m1: &Vector3<f64>,
    theta: f64,
) -> Vector3<f64> {
    let t2 = theta * theta;
    p0 * (6.0 * t2 - 6.0 * theta)
        + m0 * (3.0 * t2 - 4.0 * theta + 1.0)
        + p1 * (-6.0 * t2 + 6.0 * theta)
        + m1 * (3.0 * t2 - 2.0 * theta)
}

/// Locates every crossing of `spec` along `traj`, refining each sign change
/// of the plane equation with safeguarded Newton steps on the interpolated
/// segment until |(X − p)·n̂| < 1e−10·max(‖X‖, 1e−6).
pub fn section_crossings(
    field: &BoundField,
    traj: &Trajectory,
    spec: &SectionSpec,
) -> SectionScan {
    const TANGENTIAL_SPEED: f64 = 1e-8;
    let states = traj.states();
    let mut scan = SectionScan {
        crossings: Vec::new(),
        tangential_dropped: 0,
    };
    if states.len() < 2 {
        return scan;
    }
    let dt = traj.dt_output();
    let plane = |s: &Vector3<f64>| (s - spec.point).dot(&spec.normal);
    let tangents: Vec<Vector3<f64>> = states.iter().map(|s| field.f(s) * dt).collect();

    for k in 0..states.len() - 1 {
        let (g0, g1) = (plane(&states[k]), plane(&states[k + 1]));
        if !(g0 * g1 < 0.0) {
            continue;
        }
        let curve = |theta: f64| {
            hermite(&states[k], &tangents[k], &states[k + 1], &tangents[k + 1], theta)
        };
        let slope = |theta: f64| {
            hermite_derivative(&states[k], &tangents[k], &states[k + 1], &tangents[k + 1], theta)
                .dot(&spec.normal)
        };
        // Newton on g(θ) with a bisection bracket.
        let (mut a, mut b, mut ga) = (0.0_f64, 1.0_f64, g0);
        let mut theta = g0 / (g0 - g1);
        let mut state = curve(theta);
        for _ in 0..60 {
            let g = plane(&state);
            if g.abs() <= 1e-10 * state.norm().max(1e-6) {
                break;
            }
            if ga * g <= 0.0 {
                b = theta;
            } else {
                a = theta;
                ga = g;
            }
            let ds = slope(theta);
            let mut next = if ds.abs() > 1e-300 { theta - g / ds } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            theta = next;
            state = curve(theta);
        }
        let normal_speed = field.f(&state).dot(&spec.normal);
        if normal_speed.abs() <= TANGENTIAL_SPEED {
            scan.tangential_dropped += 1;
            continue;
        }
        if !spec.direction.accepts(normal_speed) {
            continue;
        }
        let rho = (state - spec.point).dot(&spec.rho_axis);
        if spec.half_plane_only && rho <= 0.0 {
            continue;
        }
        scan.crossings.push(SectionCrossing {
            t: traj.time(k) + theta * dt,
            state,
            rho,
            normal_speed,
        });
    }
    scan
}

/// Branch partition of a return map.
#[derive(Debug, Clone)]
pub struct Partition {
    /// Interior panel boundaries, strictly increasing.
    pub critical_points: Vec<f64>,
    /// Number of monotone runs found (= critical_points.len() + 1).
    pub branch_count: usize,
    /// Branch count after folding narrow echo branches into neighbors.
    pub merged_branch_count: usize,
    /// Panel index of each map source ρ_k (one symbol per pair).
    pub symbols: Vec<usize>,
    /// Fraction of within-panel slope-sign violations over sorted pairs.
    pub violation_fraction: f64,
}

/// First-return map ρ_k → ρ_{k+1} with an optional branch partition.
#[derive(Debug, Clone)]
pub struct ReturnMap {
    /// Crossing coordinates in time order.
    pub rho: Vec<f64>,
    /// Consecutive pairs (ρ_k, ρ_{k+1}).
    pub pairs: Vec<(f64, f64)>,
    pub partition: Option<Partition>,
    /// Set when the map could not be partitioned or the partition exceeds
    /// the violation budget.
    pub warning: Option<String>,
}

fn moving_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let mut buffer = Vec::with_capacity(window);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        buffer.clear();
        buffer.extend_from_slice(&values[lo..hi]);
        buffer.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        out.push(buffer[buffer.len() / 2]);
    }
    out
}

/// Detects slope-sign boundaries in the smoothed image sequence: a flip
/// counts only when the new sign persists through the next
/// [`MIN_RUN_LENGTH`] nonzero diffs.
fn run_boundaries(xs: &[f64], ys_smoothed: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut diffs = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n - 1 {
        diffs.push((ys_smoothed[i + 1] - ys_smoothed[i]).signum() as i8);
    }
    let mut current: i8 = 0;
    let mut boundaries = Vec::new();
    let mut i = 0usize;
    while i < diffs.len() {
        let s = diffs[i];
        if s == 0 || s == current {
            i += 1;
            continue;
        }
        if current == 0 {
            current = s;
            i += 1;
            continue;
        }
        // Candidate flip: require persistence over nonzero diffs.
        let mut seen = 0usize;
        let mut k = i;
        let mut consistent = true;
        while k < diffs.len() && seen < MIN_RUN_LENGTH {
            match diffs[k] {
                0 => {}
                d if d == s => seen += 1,
                _ => {
                    consistent = false;
                    break;
                }
            }
            k += 1;
        }
        if consistent && seen == MIN_RUN_LENGTH {
            boundaries.push(0.5 * (xs[i] + xs[i + 1]));
            current = s;
            i = k;
        } else {
            i += 1;
        }
    }
    boundaries
}

fn panel_of(critical_points: &[f64], rho: f64) -> usize {
    critical_points.iter().take_while(|c| rho >= **c).count()
}

/// Folds branches that are narrow in ρ and whose images echo a neighbor's
/// into that neighbor, returning the resulting branch count. `branches` are
/// (domain, image) intervals in domain order.
fn merged_branch_count(branches: &[((f64, f64), (f64, f64))]) -> usize {
    let Some(first) = branches.first() else {
        return 0;
    };
    let span: f64 = branches.last().unwrap().0 .1 - first.0 .0;
    if span <= 0.0 {
        return branches.len();
    }
    let mut groups: Vec<((f64, f64), (f64, f64))> = vec![*first];
    for b in &branches[1..] {
        let g = groups.last_mut().expect("nonempty");
        let width = (b.0 .1 - b.0 .0).min(g.0 .1 - g.0 .0);
        let overlap = (b.1 .1.min(g.1 .1) - b.1 .0.max(g.1 .0)).max(0.0);
        let smaller_image = (b.1 .1 - b.1 .0).min(g.1 .1 - g.1 .0);
        let echoes = width < MERGE_WIDTH_FRACTION * span
            && smaller_image > 0.0
            && overlap > MERGE_IMAGE_OVERLAP * smaller_image;
        if echoes {
            g.0 .1 = b.0 .1;
            g.1 .0 = g.1 .0.min(b.1 .0);
            g.1 .1 = g.1 .1.max(b.1 .1);
        } else {
            groups.push(*b);
        }
    }
    groups.len()
}

/// Assembles the first-return map of a time-ordered coordinate sequence and
/// partitions it into monotone branches when enough data is available.
pub fn build_return_map(rho: &[f64]) -> ReturnMap {
    let pairs: Vec<(f64, f64)> = rho.windows(2).map(|w| (w[0], w[1])).collect();
    let mut map = ReturnMap {
        rho: rho.to_vec(),
        pairs,
        partition: None,
        warning: None,
    };
    if rho.len() < MIN_CROSSINGS_FOR_PARTITION {
        map.warning = Some(format!(
            "{} crossings are too few to partition (need {})",
            rho.len(),
            MIN_CROSSINGS_FOR_PARTITION
        ));
        return map;
    }

    let mut order: Vec<usize> = (0..map.pairs.len()).collect();
    order.sort_by(|&i, &j| {
        map.pairs[i]
            .0
            .partial_cmp(&map.pairs[j].0)
            .expect("finite coordinates")
    });
    let xs: Vec<f64> = order.iter().map(|&i| map.pairs[i].0).collect();
    let ys: Vec<f64> = order.iter().map(|&i| map.pairs[i].1).collect();
    let smoothed = moving_median(&ys, SMOOTHING_WINDOW);
    let critical_points = run_boundaries(&xs, &smoothed);
    let branch_count = critical_points.len() + 1;

    // Within-panel monotonicity violations, measured on the raw images.
    let mut violations = 0usize;
    let mut total = 0usize;
    let mut branches: Vec<((f64, f64), (f64, f64))> = Vec::with_capacity(branch_count);
    let mut start = 0usize;
    for panel in 0..branch_count {
        let end = if panel < critical_points.len() {
            xs.partition_point(|x| *x < critical_points[panel])
        } else {
            xs.len()
        };
        if end > start {
            let panel_ys = &ys[start..end];
            let mut ups = 0usize;
            let mut downs = 0usize;
            for w in panel_ys.windows(2) {
                match (w[1] - w[0]).partial_cmp(&0.0) {
                    Some(std::cmp::Ordering::Greater) => ups += 1,
                    Some(std::cmp::Ordering::Less) => downs += 1,
                    _ => {}
                }
            }
            violations += ups.min(downs);
            total += ups + downs;
            let (lo, hi) = panel_ys
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
                    (lo.min(*y), hi.max(*y))
                });
            branches.push(((xs[start], xs[end - 1]), (lo, hi)));
        }
        start = end;
    }
    let violation_fraction = if total > 0 {
        violations as f64 / total as f64
    } else {
        0.0
    };
    if violation_fraction > VIOLATION_BUDGET {
        map.warning = Some(format!(
            "within-panel slope violations at {:.1}% exceed the {:.0}% budget",
            100.0 * violation_fraction,
            100.0 * VIOLATION_BUDGET
        ));
    }

    let symbols = map
        .pairs
        .iter()
        .map(|(source, _)| panel_of(&critical_points, *source))
        .collect();
    map.partition = Some(Partition {
        merged_branch_count: merged_branch_count(&branches),
        critical_points,
        branch_count,
        symbols,
        violation_fraction,
    });
    map
}

/// Observed branch-to-branch transitions: `matrix[i][j] = 1` iff some
/// consecutive symbol pair (i, j) occurs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    pub matrix: Vec<Vec<u8>>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_all_ones(&self) -> bool {
        self.matrix.iter().all(|row| row.iter().all(|&v| v == 1))
    }
}

/// Builds Γ from a partitioned map.
pub fn transition_matrix(map: &ReturnMap) -> Result<TransitionMatrix> {
    let partition = map.partition.as_ref().ok_or_else(|| {
        Error::InvalidInput("transition matrix requires a partitioned return map".into())
    })?;
    let m = partition.branch_count;
    let mut matrix = vec![vec![0u8; m]; m];
    for w in partition.symbols.windows(2) {
        matrix[w[0]][w[1]] = 1;
    }
    Ok(TransitionMatrix { matrix })
}
