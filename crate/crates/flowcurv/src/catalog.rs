//! Built-in centered systems of the Rössler family.
//!
//! Every entry is an instance of one general quadratic form
//!
//! ```text
//! ẋ = a₂y + a₃z + a₄xz + a₅z²
//! ẏ = b₁x + b₂y + b₃z + b₄y² + b₅z²
//! ż = c₁x + c₂y + c₃z + c₄xy + c₅xz + c₆x² + c₇y²
//! ```
//!
//! with the inner fixed point at the origin. Coefficients may depend on the
//! entry's parameters (several rows use ratios or quadratic-root values), so
//! [`build`] freezes them numerically: the returned [`VectorField`] is
//! parameter-free and the resolved values are returned alongside it.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::field_dsl::{
    self, Axis, ClosedExpr, Expr, ParamValues, Poly, VectorField,
};

/// Whether the attractor has the standard orientation or differs from it by
/// a global half-turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Direct,
    Inverted,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Direct => "direct",
            Orientation::Inverted => "inverted",
        }
    }
}

/// Coefficients of the general quadratic form, in the order
/// `[a2, a3, a4, a5, b1..b5, c1..c7]`.
pub type Coefficients = [f64; 16];

/// One catalog entry.
pub struct SystemDef {
    pub name: &'static str,
    pub title: &'static str,
    pub params: &'static [(&'static str, f64)],
    /// Initial condition when one is documented for the system; otherwise
    /// the inner fixed point displaced by 0.1 along each axis.
    pub default_ic: Option<[f64; 3]>,
    pub expected_fixed_points: usize,
    pub orientation: Orientation,
    pub notes: &'static str,
    source: Source,
    /// Not listed by [`list_systems`]; buildable by name only.
    hidden: bool,
}

enum Source {
    Quadratic(fn(&ParamValues) -> Result<Coefficients>),
    Text(&'static str),
}

impl SystemDef {
    pub fn default_values(&self) -> ParamValues {
        ParamValues::from_pairs(self.params.iter().copied()).expect("unique names")
    }

    /// The default initial condition (inner fixed point + 0.1 per axis for
    /// centered systems, unless the entry documents one).
    pub fn initial_condition(&self) -> Vector3<f64> {
        match self.default_ic {
            Some([x, y, z]) => Vector3::new(x, y, z),
            None => Vector3::new(0.1, 0.1, 0.1),
        }
    }
}

/// Summary row for listings (serializable by the CLI).
pub struct SystemInfo {
    pub name: &'static str,
    pub title: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub default_ic: [f64; 3],
    pub expected_fixed_points: usize,
    pub orientation: Orientation,
    pub notes: &'static str,
}

fn quadratic_field(co: &Coefficients) -> VectorField {
    let [a2, a3, a4, a5, b1, b2, b3, b4, b5, c1, c2, c3, c4, c5, c6, c7] = *co;
    let x = || Expr::var(Axis::X);
    let y = || Expr::var(Axis::Y);
    let z = || Expr::var(Axis::Z);
    let t = |c: f64, e: Expr| Expr::mul(Expr::constant(c), e);
    let fx = Expr::sum(vec![
        t(a2, y()),
        t(a3, z()),
        t(a4, Expr::mul(x(), z())),
        t(a5, Expr::pow(z(), 2)),
    ]);
    let fy = Expr::sum(vec![
        t(b1, x()),
        t(b2, y()),
        t(b3, z()),
        t(b4, Expr::pow(y(), 2)),
        t(b5, Expr::pow(z(), 2)),
    ]);
    let fz = Expr::sum(vec![
        t(c1, x()),
        t(c2, y()),
        t(c3, z()),
        t(c4, Expr::mul(x(), y())),
        t(c5, Expr::mul(x(), z())),
        t(c6, Expr::pow(x(), 2)),
        t(c7, Expr::pow(y(), 2)),
    ]);
    VectorField::new([fx, fy, fz], Vec::new()).expect("no parameters referenced")
}

fn p(values: &ParamValues, name: &str) -> f64 {
    values.get(name).expect("declared parameter")
}

/// Inner-root coordinate z₋ of the uncentered Rössler system:
/// z₋ = (c − √(c² − 4ab)) / (2a).
fn rossler_inner_z(a: f64, b: f64, c: f64) -> Result<f64> {
    let disc = c * c - 4.0 * a * b;
    if disc < 0.0 {
        return Err(Error::ComplexFixedPoints("rossler".into()));
    }
    Ok((c - disc.sqrt()) / (2.0 * a))
}

const ROSSLER_ORIGINAL_TEXT: &str = "\
# Uncentered form: dz has a constant drive term, so the inner fixed point
# sits away from the origin.
param a = 0.432
param b = 2
param c = 4
dx = -y - z
dy = x + a*y
dz = b + z*(x - c)
";

static SYSTEMS: &[SystemDef] = &[
    SystemDef {
        name: "rossler",
        title: "Rössler",
        params: &[("a", 0.432), ("b", 2.0), ("c", 4.0)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "Centered form; the z-row coefficients are derived from (a, b, c) via the \
                inner root of x² − cx + ab. Studied parameter values: a = 0.432, 0.43295, \
                0.52, 0.556.",
        source: Source::Quadratic(|v| {
            let (a, b, c) = (p(v, "a"), p(v, "b"), p(v, "c"));
            let z_inner = rossler_inner_z(a, b, c)?;
            let x_inner = a * z_inner;
            let b_t = z_inner;
            let c_t = c - x_inner;
            Ok([
                -1.0, -1.0, 0.0, 0.0, // ẋ = −y − z
                1.0, a, 0.0, 0.0, 0.0, // ẏ = x + ay
                b_t, 0.0, -c_t, 0.0, 1.0, 0.0, 0.0, // ż = b̃x − c̃z + xz
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "rossler_original",
        title: "Rössler (uncentered)",
        params: &[("a", 0.432), ("b", 2.0), ("c", 4.0)],
        default_ic: Some([-1.0, 0.0, 0.0]),
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "Uncentered companion of `rossler`, kept for testing the centering \
                transformation; not part of the curated listing.",
        source: Source::Text(ROSSLER_ORIGINAL_TEXT),
        hidden: true,
    },
    SystemDef {
        name: "sprott_f",
        title: "Sprott F",
        params: &[("a", 0.5)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                -1.0, 1.0, 0.0, 0.0, // ẋ = −y + z
                1.0, a, 0.0, 0.0, 0.0, // ẏ = x + ay
                0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, // ż = −z + x²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_g",
        title: "Sprott G",
        params: &[("a", 0.42), ("b", 1.29)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            Ok([
                -1.0, 1.0, 0.0, 0.0, // ẋ = −y + z
                1.0, a, 0.0, 0.0, 0.0, // ẏ = x + ay
                0.0, 0.0, -b, 1.0, 0.0, 0.0, 0.0, // ż = −bz + xy
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_h",
        title: "Sprott H",
        params: &[("a", 0.5)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                -1.0, 0.0, 0.0, 1.0, // ẋ = −y + z²
                1.0, a, 0.0, 0.0, 0.0, // ẏ = x + ay
                1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, // ż = x − z
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_k",
        title: "Sprott K",
        params: &[("a", 0.35), ("b", 0.5)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            Ok([
                -1.0, 0.0, 1.0, 0.0, // ẋ = −y + xz
                1.0, a, 0.0, 0.0, 0.0, // ẏ = x + ay
                1.0, 0.0, -b, 0.0, 0.0, 0.0, 0.0, // ż = x − bz
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_m",
        title: "Sprott M",
        params: &[("a", 1.95), ("b", 1.65)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            Ok([
                -1.0, 0.0, 0.0, 0.0, // ẋ = −y
                a, 0.0, 1.0, 0.0, 0.0, // ẏ = ax + z
                b, 0.0, -1.0, 0.0, 0.0, -1.0, 0.0, // ż = bx − z − x²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_o",
        title: "Sprott O",
        params: &[("a", 2.67)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "The reference figure quotes `a = 2.67 and b = 0.5`, but this row has a \
                single tunable coefficient; only `a` is exposed.",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                1.0, 0.0, 0.0, 0.0, // ẋ = y
                1.0, 0.0, -1.0, 0.0, 0.0, // ẏ = x − z
                1.0, a, 0.0, 0.0, 1.0, 0.0, 0.0, // ż = x + ay + xz
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_p",
        title: "Sprott P",
        params: &[("a", 2.68)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                a, 1.0, 0.0, 0.0, // ẋ = ay + z
                -1.0, 0.0, 0.0, 1.0, 0.0, // ẏ = −x + y²
                1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, // ż = x + y
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_q",
        title: "Sprott Q",
        params: &[("a", 3.1), ("b", 0.5)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            Ok([
                -1.0, 0.0, 0.0, 0.0, // ẋ = −y
                a, b, 0.0, 0.0, 1.0, // ẏ = ax + by + z²
                1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, // ż = x − z
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_s",
        title: "Sprott S",
        params: &[("a", 0.99), ("b", 3.8)],
        default_ic: None,
        expected_fixed_points: 2,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            Ok([
                1.0, 0.0, 0.0, 0.0, // ẋ = y
                0.0, -a, -b, 0.0, 0.0, // ẏ = −ay − bz
                2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, // ż = 2x + y + x²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_d",
        title: "Sprott D",
        params: &[("a", 2.3)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Direct,
        notes: "ż = xz + ay² with the quadratic weight exposed as `a` (the published \
                system uses 3). The fixed point's complex pair is exactly ±i.",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                -1.0, 0.0, 0.0, 0.0, // ẋ = −y
                1.0, 0.0, 1.0, 0.0, 0.0, // ẏ = x + z
                0.0, 0.0, 0.0, 0.0, 1.0, 0.0, a, // ż = xz + ay²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_i",
        title: "Sprott I",
        params: &[("a", 0.25)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                -a, 0.0, 0.0, 0.0, // ẋ = −ay
                1.0, 0.0, 1.0, 0.0, 0.0, // ẏ = x + z
                1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, // ż = x − z + y²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_j",
        title: "Sprott J",
        params: &[("a", 1.76)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Direct,
        notes: "Stated as ẋ = ay, ẏ = −x + z + z², ż = y − az: the published system \
                with its two fixed coefficients generalized to `a` and the last two \
                variables interchanged.",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                a, 0.0, 0.0, 0.0, // ẋ = ay
                -1.0, 0.0, 1.0, 0.0, 1.0, // ẏ = −x + z + z²
                0.0, 1.0, -a, 0.0, 0.0, 0.0, 0.0, // ż = y − az
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_r",
        title: "Sprott R",
        params: &[("a", 0.90), ("b", 0.395)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Direct,
        notes: "The y-weight of ż is the ratio −b/a, frozen numerically at build time.",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            if a == 0.0 {
                return Err(Error::InvalidInput(
                    "sprott_r requires a ≠ 0 (ż carries a −b/a term)".into(),
                ));
            }
            Ok([
                -1.0, 0.0, 0.0, 0.0, // ẋ = −y
                0.0, 0.0, 1.0, 0.0, 0.0, // ẏ = z
                a, -b / a, -1.0, 1.0, 0.0, 0.0, 0.0, // ż = ax − (b/a)y − z + xy
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "thomas",
        title: "Thomas",
        params: &[("a", 0.28), ("c", 2.0)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Direct,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, c) = (p(v, "a"), p(v, "c"));
            Ok([
                1.0, 0.0, 0.0, 0.0, // ẋ = y
                -1.0, a, -1.0, 0.0, 0.0, // ẏ = −x + ay − z
                0.0, 0.0, -c, 0.0, 0.0, 0.0, 1.0, // ż = −cz + y²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_l",
        title: "Sprott L",
        params: &[("a", 3.87), ("b", 0.91)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Inverted,
        notes: "",
        source: Source::Quadratic(|v| {
            let (a, b) = (p(v, "a"), p(v, "b"));
            Ok([
                -1.0, 0.0, 0.0, 0.0, // ẋ = −y
                a, 0.0, 1.0, 0.0, 0.0, // ẏ = ax + z
                0.0, 2.0 * b, -1.0, 0.0, 0.0, 0.0, b, // ż = 2by − z + by²
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "sprott_n",
        title: "Sprott N",
        params: &[("a", 4.2)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Inverted,
        notes: "The z-weight of ẏ is the ratio 2/a, frozen numerically at build time.",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            if a == 0.0 {
                return Err(Error::InvalidInput(
                    "sprott_n requires a ≠ 0 (ẏ carries a 2/a term)".into(),
                ));
            }
            Ok([
                -a, 0.0, 0.0, 0.0, // ẋ = −ay
                1.0, 0.0, 2.0 / a, 0.0, 1.0, // ẏ = x + (2/a)z + z²
                0.0, 1.0, -a, 0.0, 0.0, 0.0, 0.0, // ż = y − az
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "malasoma_a",
        title: "Malasoma A",
        params: &[("a", 2.017)],
        default_ic: Some([0.1, 1.0, 1.9]),
        expected_fixed_points: 1,
        orientation: Orientation::Inverted,
        notes: "Minimal chaotic system; narrow chaotic window and small attraction \
                basin, hence the documented initial condition.",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                1.0, 0.0, 0.0, 0.0, // ẋ = y
                0.0, -a, 1.0, 0.0, 0.0, // ẏ = −ay + z
                -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, // ż = −x + xy
            ])
        }),
        hidden: false,
    },
    SystemDef {
        name: "malasoma_b",
        title: "Malasoma B",
        params: &[("a", 2.017)],
        default_ic: None,
        expected_fixed_points: 1,
        orientation: Orientation::Inverted,
        notes: "Differs from Malasoma A only in the ẋ line (ẋ = z). No reference \
                trajectory data exists for this entry; defaults mirror Malasoma A's \
                parameter value.",
        source: Source::Quadratic(|v| {
            let a = p(v, "a");
            Ok([
                0.0, 1.0, 0.0, 0.0, // ẋ = z
                0.0, -a, 1.0, 0.0, 0.0, // ẏ = −ay + z
                -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, // ż = −x + xy
            ])
        }),
        hidden: false,
    },
];

/// Maps accepted aliases onto canonical names.
fn canonical_name(name: &str) -> &str {
    match name {
        "rossler_centered" => "rossler",
        other => other,
    }
}

/// Looks up a catalog entry by name (aliases allowed).
pub fn find(name: &str) -> Result<&'static SystemDef> {
    let canonical = canonical_name(name);
    SYSTEMS
        .iter()
        .find(|s| s.name == canonical)
        .ok_or_else(|| Error::UnknownSystem(name.to_string()))
}

/// All curated entries, in catalog order.
pub fn list_systems() -> Vec<SystemInfo> {
    SYSTEMS
        .iter()
        .filter(|s| !s.hidden)
        .map(|s| SystemInfo {
            name: s.name,
            title: s.title,
            params: s.params.to_vec(),
            default_ic: s.initial_condition().into(),
            expected_fixed_points: s.expected_fixed_points,
            orientation: s.orientation,
            notes: s.notes,
        })
        .collect()
}

/// Instantiates a catalog system with defaults plus overrides. The returned
/// field is parameter-free (all coefficients frozen numerically); the
/// resolved parameter values are returned for reporting.
pub fn build(name: &str, overrides: &[(String, f64)]) -> Result<(VectorField, ParamValues)> {
    let def = find(name)?;
    let mut values = def.default_values();
    let mut seen: Vec<&str> = Vec::new();
    for (pname, value) in overrides {
        if seen.contains(&pname.as_str()) {
            return Err(Error::InvalidInput(format!(
                "parameter `{pname}` overridden twice"
            )));
        }
        seen.push(pname);
        values = values.with(pname, *value)?;
    }
    let field = match &def.source {
        Source::Quadratic(rowfn) => quadratic_field(&rowfn(&values)?),
        Source::Text(text) => {
            let parsed = field_dsl::parse_field(text)?;
            // Validate overrides against the declared parameter set, then
            // freeze so both sources yield parameter-free fields.
            field_dsl::freeze(&parsed, &values)?
        }
    };
    Ok((field, values))
}

/// Translates a field so that `fixed_point` moves to the origin. The point
/// must actually be a fixed point; the residual constant terms (cancellation
/// noise) are removed exactly.
pub fn center(
    field: &VectorField,
    params: &ParamValues,
    fixed_point: &Vector3<f64>,
) -> Result<VectorField> {
    const FP_TOLERANCE: f64 = 1e-9;
    let frozen = field_dsl::freeze(field, params)?;
    let bound = frozen.bind(&[])?;
    let residual = bound.f(fixed_point).norm();
    if residual >= FP_TOLERANCE {
        return Err(Error::NotAFixedPoint(
            fixed_point.x,
            fixed_point.y,
            fixed_point.z,
            residual,
        ));
    }
    let components = {
        let mut out = Vec::with_capacity(3);
        for c in frozen.components() {
            let closed = ClosedExpr::new(c.clone())?;
            let mut poly = Poly::from_shifted(&closed, fixed_point);
            // The constant term is F_i(fixed_point) up to rounding; drop it
            // so the origin is a fixed point of the result exactly.
            debug_assert!(poly.constant_term().abs() < FP_TOLERANCE);
            poly.remove_constant_term();
            out.push(poly.into_expr().into_expr());
        }
        <[crate::field_dsl::Expr; 3]>::try_from(out).expect("three components")
    };
    VectorField::new(components, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn listing_has_nineteen_entries() {
        let listed = list_systems();
        assert_eq!(listed.len(), 19);
        assert!(listed.iter().any(|s| s.name == "rossler"));
        assert!(!listed.iter().any(|s| s.name == "rossler_original"));
    }

    #[test]
    fn rossler_defaults_match_reference_values() {
        let def = find("rossler").unwrap();
        let v = def.default_values();
        assert_eq!(v.get("a"), Some(0.432));
        assert_eq!(v.get("b"), Some(2.0));
        assert_eq!(v.get("c"), Some(4.0));
    }

    #[test]
    fn malasoma_a_documents_its_initial_condition() {
        let def = find("malasoma_a").unwrap();
        assert_eq!(def.initial_condition(), Vector3::new(0.1, 1.0, 1.9));
    }

    #[test]
    fn build_sprott_f_hand_evaluation() {
        let (field, _) = build("sprott_f", &[("a".into(), 0.5)]).unwrap();
        let bound = field.bind(&[]).unwrap();
        let v = bound.f(&Vector3::new(1.0, 1.0, 1.0));
        assert_relative_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], 1.5);
        assert_relative_eq!(v[2], 0.0);
    }

    #[test]
    fn build_thomas_hand_evaluation() {
        let (field, _) =
            build("thomas", &[("a".into(), 0.28), ("c".into(), 2.0)]).unwrap();
        let bound = field.bind(&[]).unwrap();
        let v = bound.f(&Vector3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(v[1], 0.28);
    }

    #[test]
    fn centered_alias_resolves_and_origin_is_fixed() {
        let (field, _) = build("rossler_centered", &[]).unwrap();
        let bound = field.bind(&[]).unwrap();
        assert!(bound.f(&Vector3::zeros()).norm() < 1e-12);
    }

    #[test]
    fn every_listed_system_fixes_the_origin() {
        for info in list_systems() {
            let (field, _) = build(info.name, &[]).unwrap();
            let bound = field.bind(&[]).unwrap();
            let norm = bound.f(&Vector3::zeros()).norm();
            assert!(
                norm < 1e-12,
                "{}: |F(0)| = {norm:.3e}",
                info.name
            );
        }
    }

    #[test]
    fn rossler_z_row_uses_the_inner_quadratic_root() {
        // z₋ = (c − √(c² − 4ab)) / (2a) at (0.432, 2, 4), cross-checked by
        // substituting back into the quadratic a·z² − c·z + b = 0.
        let z_inner = rossler_inner_z(0.432, 2.0, 4.0).unwrap();
        assert_relative_eq!(z_inner, 0.530380, epsilon = 1e-6);
        assert_relative_eq!(
            0.432 * z_inner * z_inner - 4.0 * z_inner + 2.0,
            0.0,
            epsilon = 1e-12
        );
        let (field, _) = build("rossler", &[]).unwrap();
        let bound = field.bind(&[]).unwrap();
        // ż at (1, 0, 0) = b̃ = z₋.
        assert_relative_eq!(
            bound.f(&Vector3::new(1.0, 0.0, 0.0))[2],
            z_inner,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rossler_complex_roots_are_an_error() {
        let err = build("rossler", &[("b".into(), 100.0)]).unwrap_err();
        assert!(matches!(err, Error::ComplexFixedPoints(_)));
    }

    #[test]
    fn centering_the_original_rossler_matches_the_catalog_form() {
        let (original, values) = build("rossler_original", &[]).unwrap();
        let bound = original.bind(&[]).unwrap();
        let z_inner = rossler_inner_z(0.432, 2.0, 4.0).unwrap();
        let fp = Vector3::new(0.432 * z_inner, -z_inner, z_inner);
        assert!(bound.f(&fp).norm() < 1e-9);

        let centered = center(&original, &values, &fp).unwrap();
        let (reference, _) = build("rossler", &[]).unwrap();
        let cb = centered.bind(&[]).unwrap();
        let rb = reference.bind(&[]).unwrap();
        for s in [
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(-4.0, 0.5, 0.1),
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(7.0, -8.0, 2.5),
        ] {
            assert_relative_eq!((cb.f(&s) - rb.f(&s)).norm(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn centering_at_origin_is_identity() {
        let (field, values) = build("sprott_f", &[]).unwrap();
        let centered = center(&field, &values, &Vector3::zeros()).unwrap();
        let fb = field.bind(&[]).unwrap();
        let cb = centered.bind(&[]).unwrap();
        for s in [Vector3::new(1.0, -2.0, 3.0), Vector3::new(0.3, 0.4, 0.5)] {
            assert_relative_eq!((fb.f(&s) - cb.f(&s)).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn center_rejects_non_fixed_points() {
        let (field, values) = build("sprott_f", &[]).unwrap();
        let err = center(&field, &values, &Vector3::new(1.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::NotAFixedPoint(..)));
    }

    #[test]
    fn center_round_trip_restores_the_field() {
        let (original, values) = build("rossler_original", &[]).unwrap();
        let z_inner = rossler_inner_z(0.432, 2.0, 4.0).unwrap();
        let fp = Vector3::new(0.432 * z_inner, -z_inner, z_inner);
        let centered = center(&original, &values, &fp).unwrap();
        let back = field_dsl::translate(&centered, &(-fp)).unwrap();
        let ob = original.bind(&[]).unwrap();
        let bb = back.bind(&[]).unwrap();
        for s in [
            Vector3::new(0.2, -0.7, 1.1),
            Vector3::new(5.0, 5.0, 5.0),
            Vector3::new(-1.0, 3.0, -2.0),
        ] {
            let want = ob.f(&s);
            let got = bb.f(&s);
            assert_relative_eq!((want - got).norm() / want.norm().max(1.0), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unknown_lookups_fail_cleanly() {
        assert!(matches!(find("nosuch"), Err(Error::UnknownSystem(_))));
        assert!(matches!(
            build("sprott_f", &[("zz".into(), 1.0)]),
            Err(Error::UnknownParameter(_))
        ));
    }
}
