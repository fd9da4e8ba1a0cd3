//! Polynomial expression trees over three state variables and named
//! parameters, with exact symbolic differentiation.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// One of the three state-space coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A polynomial expression over the state variables and named parameters.
///
/// Values built through the constructors are kept in a simplified structural
/// form: sums and products are flattened, constants are folded, zero and one
/// are absorbed, double negations cancel, and `pow(e, 0)` collapses to `1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Axis),
    Param(Arc<str>),
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(axis: Axis) -> Expr {
        Expr::Var(axis)
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(Arc::from(name))
    }

    /// Builds a flattened sum with constants folded into a single trailing
    /// term; empty and singleton sums collapse.
    pub fn sum(terms: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(terms.len());
        let mut acc = 0.0;
        for term in terms {
            match term {
                Expr::Const(c) => acc += c,
                Expr::Sum(inner) => {
                    for t in inner {
                        match t {
                            Expr::Const(c) => acc += c,
                            other => flat.push(other),
                        }
                    }
                }
                other => flat.push(other),
            }
        }
        if acc != 0.0 {
            flat.push(Expr::Const(acc));
        }
        match flat.len() {
            0 => Expr::Const(0.0),
            1 => flat.pop().expect("len checked"),
            _ => Expr::Sum(flat),
        }
    }

    /// Builds a flattened product. Constants fold into a single leading
    /// coefficient, a zero factor annihilates, and an odd number of absorbed
    /// negations re-emerges as one outer negation.
    pub fn prod(factors: Vec<Expr>) -> Expr {
        fn absorb(e: Expr, flat: &mut Vec<Expr>, coef: &mut f64, negated: &mut bool) {
            match e {
                Expr::Const(c) => *coef *= c,
                Expr::Neg(inner) => {
                    *negated = !*negated;
                    absorb(*inner, flat, coef, negated);
                }
                Expr::Prod(inner) => {
                    for f in inner {
                        absorb(f, flat, coef, negated);
                    }
                }
                other => flat.push(other),
            }
        }

        let mut flat = Vec::with_capacity(factors.len());
        let mut coef = 1.0;
        let mut negated = false;
        for factor in factors {
            absorb(factor, &mut flat, &mut coef, &mut negated);
        }
        if coef == 0.0 {
            return Expr::Const(0.0);
        }
        if coef < 0.0 {
            negated = !negated;
            coef = -coef;
        }
        if coef != 1.0 {
            flat.insert(0, Expr::Const(coef));
        }
        let core = match flat.len() {
            0 => Expr::Const(1.0),
            1 => flat.pop().expect("len checked"),
            _ => Expr::Prod(flat),
        };
        if negated {
            Expr::neg(core)
        } else {
            core
        }
    }

    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(base: Expr, exp: u32) -> Expr {
        match (base, exp) {
            (_, 0) => Expr::Const(1.0),
            (b, 1) => b,
            (Expr::Const(c), n) => Expr::Const(c.powi(n as i32)),
            (Expr::Neg(b), n) if n % 2 == 0 => Expr::pow(*b, n),
            (Expr::Neg(b), n) => Expr::neg(Expr::pow(*b, n)),
            (Expr::Pow(b, m), n) => Expr::Pow(b, m.saturating_mul(n)),
            (b, n) => Expr::Pow(Box::new(b), n),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::sum(vec![a, b])
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::sum(vec![a, Expr::neg(b)])
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::prod(vec![a, b])
    }

    /// Evaluates at a state with parameter values supplied by `params`.
    pub fn eval(&self, state: &Vector3<f64>, params: &ParamValues) -> Result<f64> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(a) => Ok(state[a.index()]),
            Expr::Param(name) => params
                .get(name)
                .ok_or_else(|| Error::UnboundParameter(name.to_string())),
            Expr::Sum(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.eval(state, params)?;
                }
                Ok(acc)
            }
            Expr::Prod(factors) => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval(state, params)?;
                }
                Ok(acc)
            }
            Expr::Neg(inner) => Ok(-inner.eval(state, params)?),
            Expr::Pow(base, n) => Ok(base.eval(state, params)?.powi(*n as i32)),
        }
    }

    /// Exact partial derivative with respect to one state variable.
    /// Parameters are treated as symbolic constants.
    pub fn diff(&self, axis: Axis) -> Expr {
        match self {
            Expr::Const(_) | Expr::Param(_) => Expr::Const(0.0),
            Expr::Var(a) => Expr::Const(if *a == axis { 1.0 } else { 0.0 }),
            Expr::Sum(terms) => Expr::sum(terms.iter().map(|t| t.diff(axis)).collect()),
            Expr::Prod(factors) => Expr::sum(
                (0..factors.len())
                    .map(|i| {
                        let mut fs = factors.clone();
                        fs[i] = factors[i].diff(axis);
                        Expr::prod(fs)
                    })
                    .collect(),
            ),
            Expr::Neg(inner) => Expr::neg(inner.diff(axis)),
            Expr::Pow(base, n) => Expr::prod(vec![
                Expr::Const(f64::from(*n)),
                Expr::pow((**base).clone(), n - 1),
                base.diff(axis),
            ]),
        }
    }

    /// Replaces every parameter node with its bound value and re-simplifies.
    pub fn substitute_params(&self, params: &ParamValues) -> Result<Expr> {
        Ok(match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(a) => Expr::Var(*a),
            Expr::Param(name) => Expr::Const(
                params
                    .get(name)
                    .ok_or_else(|| Error::UnboundParameter(name.to_string()))?,
            ),
            Expr::Sum(terms) => Expr::sum(
                terms
                    .iter()
                    .map(|t| t.substitute_params(params))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Expr::Prod(factors) => Expr::prod(
                factors
                    .iter()
                    .map(|f| f.substitute_params(params))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Expr::Neg(inner) => Expr::neg(inner.substitute_params(params)?),
            Expr::Pow(base, n) => Expr::pow(base.substitute_params(params)?, *n),
        })
    }

    /// Collects the distinct parameter names referenced by this expression.
    pub fn collect_params(&self, out: &mut Vec<Arc<str>>) {
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Param(name) => {
                if !out.iter().any(|p| p.as_ref() == name.as_ref()) {
                    out.push(name.clone());
                }
            }
            Expr::Sum(terms) => terms.iter().for_each(|t| t.collect_params(out)),
            Expr::Prod(factors) => factors.iter().for_each(|f| f.collect_params(out)),
            Expr::Neg(inner) => inner.collect_params(out),
            Expr::Pow(base, _) => base.collect_params(out),
        }
    }

    /// Total degree in the state variables (parameters count as constants).
    pub fn degree(&self) -> u32 {
        match self {
            Expr::Const(_) | Expr::Param(_) => 0,
            Expr::Var(_) => 1,
            Expr::Sum(terms) => terms.iter().map(Expr::degree).max().unwrap_or(0),
            Expr::Prod(factors) => factors.iter().map(Expr::degree).sum(),
            Expr::Neg(inner) => inner.degree(),
            Expr::Pow(base, n) => base.degree() * n,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Sum(_) => 0,
            Expr::Neg(_) => 1,
            Expr::Prod(_) => 2,
            Expr::Pow(..) => 3,
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => 4,
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(a) => write!(f, "{a}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Sum(terms) => {
                for (i, term) in terms.iter().enumerate() {
                    if i == 0 {
                        write!(f, "{term}")?;
                    } else {
                        match term {
                            Expr::Neg(inner) => {
                                f.write_str(" - ")?;
                                write_wrapped(f, inner, 1)?;
                            }
                            Expr::Const(c) if *c < 0.0 => write!(f, " - {}", -c)?,
                            _ => {
                                f.write_str(" + ")?;
                                write!(f, "{term}")?;
                            }
                        }
                    }
                }
                Ok(())
            }
            Expr::Prod(factors) => {
                for (i, factor) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write_wrapped(f, factor, 2)?;
                }
                Ok(())
            }
            Expr::Neg(inner) => {
                f.write_str("-")?;
                write_wrapped(f, inner, 3)
            }
            Expr::Pow(base, n) => {
                write_wrapped(f, base, 4)?;
                write!(f, "^{n}")
            }
        }
    }
}

/// An immutable, name-sorted set of bound parameter values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamValues {
    pairs: Vec<(Arc<str>, f64)>,
}

impl ParamValues {
    pub fn empty() -> ParamValues {
        ParamValues::default()
    }

    /// Builds from (name, value) pairs; duplicate names are rejected.
    pub fn from_pairs<I, S>(pairs: I) -> Result<ParamValues>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut out: Vec<(Arc<str>, f64)> = Vec::new();
        for (name, value) in pairs {
            let name = name.as_ref();
            if out.iter().any(|(n, _)| n.as_ref() == name) {
                return Err(Error::InvalidInput(format!(
                    "duplicate parameter `{name}`"
                )));
            }
            out.push((Arc::from(name), value));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(ParamValues { pairs: out })
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.pairs
            .iter()
            .find(|(n, _)| n.as_ref() == name)
            .map(|(_, v)| *v)
    }

    /// Returns a copy with `name` set to `value`; the name must exist.
    pub fn with(&self, name: &str, value: f64) -> Result<ParamValues> {
        let mut pairs = self.pairs.clone();
        match pairs.iter_mut().find(|(n, _)| n.as_ref() == name) {
            Some(slot) => slot.1 = value,
            None => return Err(Error::UnknownParameter(name.to_string())),
        }
        Ok(ParamValues { pairs })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.pairs.iter().map(|(n, v)| (n.as_ref(), *v))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// An expression guaranteed to contain no parameter nodes, so evaluation is
/// total and infallible.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedExpr(Expr);

impl ClosedExpr {
    pub fn new(e: Expr) -> Result<ClosedExpr> {
        let mut params = Vec::new();
        e.collect_params(&mut params);
        match params.first() {
            Some(p) => Err(Error::UnboundParameter(p.to_string())),
            None => Ok(ClosedExpr(e)),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.0
    }

    pub fn into_expr(self) -> Expr {
        self.0
    }

    pub fn diff(&self, axis: Axis) -> ClosedExpr {
        // Differentiation introduces no parameter nodes.
        ClosedExpr(self.0.diff(axis))
    }

    pub fn eval(&self, state: &Vector3<f64>) -> f64 {
        fn go(e: &Expr, state: &Vector3<f64>) -> f64 {
            match e {
                Expr::Const(c) => *c,
                Expr::Var(a) => state[a.index()],
                Expr::Param(_) => unreachable!("closed expression holds no parameters"),
                Expr::Sum(terms) => terms.iter().map(|t| go(t, state)).sum(),
                Expr::Prod(factors) => factors.iter().map(|f| go(f, state)).product(),
                Expr::Neg(inner) => -go(inner, state),
                Expr::Pow(base, n) => go(base, state).powi(*n as i32),
            }
        }
        go(&self.0, state)
    }
}

impl fmt::Display for ClosedExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn constructors_simplify() {
        assert_eq!(Expr::sum(vec![]), Expr::Const(0.0));
        assert_eq!(
            Expr::sum(vec![Expr::Const(2.0), Expr::Const(3.0)]),
            Expr::Const(5.0)
        );
        assert_eq!(Expr::prod(vec![]), Expr::Const(1.0));
        assert_eq!(
            Expr::prod(vec![Expr::Const(0.0), Expr::var(Axis::X)]),
            Expr::Const(0.0)
        );
        assert_eq!(Expr::pow(Expr::var(Axis::Y), 0), Expr::Const(1.0));
        assert_eq!(Expr::pow(Expr::var(Axis::Y), 1), Expr::var(Axis::Y));
        assert_eq!(
            Expr::neg(Expr::neg(Expr::var(Axis::Z))),
            Expr::var(Axis::Z)
        );
    }

    #[test]
    fn nested_structures_flatten() {
        let e = Expr::sum(vec![
            Expr::sum(vec![Expr::var(Axis::X), Expr::Const(1.0)]),
            Expr::sum(vec![Expr::var(Axis::Y), Expr::Const(2.0)]),
        ]);
        match &e {
            Expr::Sum(terms) => {
                assert_eq!(terms.len(), 3);
                assert!(terms.iter().all(|t| !matches!(t, Expr::Sum(_))));
            }
            other => panic!("expected flattened sum, got {other:?}"),
        }

        let p = Expr::prod(vec![
            Expr::prod(vec![Expr::Const(2.0), Expr::var(Axis::X)]),
            Expr::neg(Expr::var(Axis::Y)),
        ]);
        // -(2*x*y)
        assert_eq!(
            p.eval(&v(3.0, 5.0, 0.0), &ParamValues::empty()).unwrap(),
            -30.0
        );
        assert!(matches!(p, Expr::Neg(_)));
    }

    #[test]
    fn evaluation_matches_hand_arithmetic() {
        // b + z*(x - c) at (1, 0, 3) with b=2, c=4 → 2 + 3*(1-4) = -7
        let e = Expr::add(
            Expr::param("b"),
            Expr::mul(
                Expr::var(Axis::Z),
                Expr::sub(Expr::var(Axis::X), Expr::param("c")),
            ),
        );
        let params = ParamValues::from_pairs([("b", 2.0), ("c", 4.0)]).unwrap();
        assert_eq!(e.eval(&v(1.0, 0.0, 3.0), &params).unwrap(), -7.0);
    }

    #[test]
    fn unbound_parameter_is_an_error() {
        let e = Expr::param("missing");
        let err = e.eval(&v(0.0, 0.0, 0.0), &ParamValues::empty());
        assert!(matches!(err, Err(Error::UnboundParameter(_))));
    }

    #[test]
    fn diff_product_rule() {
        // d/dx (x*z) = z
        let e = Expr::mul(Expr::var(Axis::X), Expr::var(Axis::Z));
        assert_eq!(e.diff(Axis::X), Expr::var(Axis::Z));
        // d/dy (y^2) = 2*y
        let e = Expr::pow(Expr::var(Axis::Y), 2);
        assert_eq!(
            e.diff(Axis::Y),
            Expr::prod(vec![Expr::Const(2.0), Expr::var(Axis::Y)])
        );
    }

    #[test]
    fn diff_matches_finite_differences() {
        // (x + 2y)^3 * z - a*x^2 with a = 1.7
        let e = Expr::sub(
            Expr::mul(
                Expr::pow(
                    Expr::add(
                        Expr::var(Axis::X),
                        Expr::mul(Expr::Const(2.0), Expr::var(Axis::Y)),
                    ),
                    3,
                ),
                Expr::var(Axis::Z),
            ),
            Expr::mul(Expr::param("a"), Expr::pow(Expr::var(Axis::X), 2)),
        );
        let params = ParamValues::from_pairs([("a", 1.7)]).unwrap();
        let h = 1e-5;
        let states = [
            v(0.3, -1.2, 0.7),
            v(1.0, 1.0, 1.0),
            v(-2.5, 0.4, 3.1),
            v(0.0, 0.0, -1.0),
        ];
        for axis in Axis::ALL {
            let d = e.diff(axis);
            for s in &states {
                let mut sp = *s;
                let mut sm = *s;
                sp[axis.index()] += h;
                sm[axis.index()] -= h;
                let fd = (e.eval(&sp, &params).unwrap() - e.eval(&sm, &params).unwrap())
                    / (2.0 * h);
                let exact = d.eval(s, &params).unwrap();
                assert_relative_eq!(exact, fd, max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn mixed_partials_commute() {
        let e = Expr::mul(
            Expr::pow(Expr::var(Axis::X), 2),
            Expr::mul(Expr::var(Axis::Y), Expr::pow(Expr::var(Axis::Z), 3)),
        );
        let params = ParamValues::empty();
        for i in Axis::ALL {
            for j in Axis::ALL {
                let dij = e.diff(i).diff(j);
                let dji = e.diff(j).diff(i);
                for s in [v(1.1, -0.3, 0.9), v(-2.0, 4.0, 0.5)] {
                    assert_relative_eq!(
                        dij.eval(&s, &params).unwrap(),
                        dji.eval(&s, &params).unwrap(),
                        max_relative = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn degree_is_total_degree() {
        let e = Expr::add(
            Expr::mul(Expr::var(Axis::X), Expr::var(Axis::Z)),
            Expr::pow(Expr::var(Axis::Y), 3),
        );
        assert_eq!(e.degree(), 3);
        assert_eq!(Expr::param("a").degree(), 0);
    }

    #[test]
    fn display_round_trips_semantics() {
        let e = Expr::sub(
            Expr::neg(Expr::mul(
                Expr::Const(2.5),
                Expr::pow(Expr::add(Expr::var(Axis::X), Expr::var(Axis::Y)), 2),
            )),
            Expr::mul(Expr::param("a"), Expr::var(Axis::Z)),
        );
        let text = e.to_string();
        let reparsed = crate::field_dsl::parse_expr(&text, &["a"]).unwrap();
        let params = ParamValues::from_pairs([("a", 0.77)]).unwrap();
        for s in [v(0.1, 0.2, 0.3), v(-1.0, 2.0, -3.0), v(4.0, 0.0, 1.5)] {
            assert_relative_eq!(
                e.eval(&s, &params).unwrap(),
                reparsed.eval(&s, &params).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn closed_expr_rejects_params() {
        assert!(ClosedExpr::new(Expr::param("a")).is_err());
        let c = ClosedExpr::new(Expr::add(Expr::var(Axis::X), Expr::Const(1.0))).unwrap();
        assert_eq!(c.eval(&v(2.0, 0.0, 0.0)), 3.0);
    }
}
