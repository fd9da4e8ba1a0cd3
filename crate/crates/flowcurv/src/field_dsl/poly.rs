//! Dense monomial form of a closed polynomial expression, used to expand
//! affine substitutions `X ↦ X + v` back into simplified expression trees.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::expr::{Axis, ClosedExpr, Expr};

/// Coefficients keyed by exponent triple (deterministic iteration order).
#[derive(Debug, Clone, Default)]
pub(crate) struct Poly {
    terms: BTreeMap<[u32; 3], f64>,
}

impl ClosedExpr {
    /// Exact zero test: the expanded monomial form has no terms left.
    pub fn is_identically_zero(&self) -> bool {
        Poly::from_shifted(self, &Vector3::zeros()).terms.is_empty()
    }
}

impl Poly {
    fn constant(c: f64) -> Poly {
        let mut p = Poly::default();
        if c != 0.0 {
            p.terms.insert([0, 0, 0], c);
        }
        p
    }

    fn add_term(&mut self, key: [u32; 3], coef: f64) {
        let slot = self.terms.entry(key).or_insert(0.0);
        *slot += coef;
        if *slot == 0.0 {
            self.terms.remove(&key);
        }
    }

    fn add(mut self, other: Poly) -> Poly {
        for (key, coef) in other.terms {
            self.add_term(key, coef);
        }
        self
    }

    fn scale(mut self, factor: f64) -> Poly {
        if factor == 0.0 {
            return Poly::default();
        }
        for coef in self.terms.values_mut() {
            *coef *= factor;
        }
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                out.add_term(
                    [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]],
                    ca * cb,
                );
            }
        }
        out
    }

    fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::constant(1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Expands `e` with every variable replaced by `var + shift[var]`.
    pub(crate) fn from_shifted(e: &ClosedExpr, shift: &Vector3<f64>) -> Poly {
        fn go(e: &Expr, shift: &Vector3<f64>) -> Poly {
            match e {
                Expr::Const(c) => Poly::constant(*c),
                Expr::Var(a) => {
                    let mut p = Poly::constant(shift[a.index()]);
                    let mut key = [0u32; 3];
                    key[a.index()] = 1;
                    p.add_term(key, 1.0);
                    p
                }
                Expr::Param(_) => unreachable!("closed expression holds no parameters"),
                Expr::Sum(terms) => terms
                    .iter()
                    .fold(Poly::default(), |acc, t| acc.add(go(t, shift))),
                Expr::Prod(factors) => factors
                    .iter()
                    .fold(Poly::constant(1.0), |acc, f| acc.mul(&go(f, shift))),
                Expr::Neg(inner) => go(inner, shift).scale(-1.0),
                Expr::Pow(base, n) => go(base, shift).pow(*n),
            }
        }
        go(e.expr(), shift)
    }

    pub(crate) fn constant_term(&self) -> f64 {
        self.terms.get(&[0, 0, 0]).copied().unwrap_or(0.0)
    }

    pub(crate) fn remove_constant_term(&mut self) {
        self.terms.remove(&[0, 0, 0]);
    }

    /// Rebuilds an expression tree, dropping coefficients that are
    /// negligible relative to the largest one (cancellation residue).
    pub(crate) fn into_expr(self) -> ClosedExpr {
        const RELATIVE_CUTOFF: f64 = 1e-12;
        let max_coef = self
            .terms
            .values()
            .fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let cutoff = max_coef * RELATIVE_CUTOFF;
        let mut terms = Vec::new();
        for ([i, j, k], coef) in self.terms {
            if coef.abs() <= cutoff {
                continue;
            }
            let mut factors = vec![Expr::Const(coef)];
            for (axis, exp) in Axis::ALL.into_iter().zip([i, j, k]) {
                if exp > 0 {
                    factors.push(Expr::pow(Expr::var(axis), exp));
                }
            }
            terms.push(Expr::prod(factors));
        }
        ClosedExpr::new(Expr::sum(terms)).expect("monomials hold no parameters")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn closed(src: &str) -> ClosedExpr {
        ClosedExpr::new(crate::field_dsl::parse_expr(src, &[]).unwrap()).unwrap()
    }

    #[test]
    fn shift_expands_exactly() {
        // f = x^2 + y*z shifted by (1, -2, 3):
        // (x+1)^2 + (y-2)(z+3) = x^2 + 2x + 1 + yz + 3y - 2z - 6
        let e = closed("x^2 + y*z");
        let shifted = Poly::from_shifted(&e, &Vector3::new(1.0, -2.0, 3.0)).into_expr();
        for s in [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.5, -0.5, 2.0),
            Vector3::new(-3.0, 4.0, 0.25),
        ] {
            let direct = e.eval(&(s + Vector3::new(1.0, -2.0, 3.0)));
            assert_relative_eq!(shifted.eval(&s), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_shift_is_identity() {
        let e = closed("x*y*z - 2*x + 7");
        let p = Poly::from_shifted(&e, &Vector3::zeros()).into_expr();
        for s in [Vector3::new(1.0, 2.0, 3.0), Vector3::new(-1.0, 0.5, 4.0)] {
            assert_relative_eq!(p.eval(&s), e.eval(&s), max_relative = 1e-12);
        }
    }

    #[test]
    fn constant_term_bookkeeping() {
        let e = closed("x^2 - 4");
        let mut p = Poly::from_shifted(&e, &Vector3::new(2.0, 0.0, 0.0));
        // (x+2)^2 - 4 = x^2 + 4x; constant term cancels exactly.
        assert_eq!(p.constant_term(), 0.0);
        p.remove_constant_term();
        let rebuilt = p.into_expr();
        assert_eq!(rebuilt.eval(&Vector3::new(1.0, 0.0, 0.0)), 5.0);
    }
}
