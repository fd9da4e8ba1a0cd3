//! Vector fields as symbolic polynomial expressions.
//!
//! A [`VectorField`] holds three expression trees plus declared parameters
//! with defaults. Binding parameter values yields a [`BoundField`], which
//! precomputes the Jacobian and its material derivative symbolically so that
//! the full derivative stack (Ẋ, Ẍ, X⃛, J, dJ/dt) evaluates exactly at any
//! state — no finite differencing anywhere.

mod expr;
mod parser;
mod poly;

pub use expr::{Axis, ClosedExpr, Expr, ParamValues};

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub(crate) use poly::Poly;

/// A declared parameter with its default value.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: Arc<str>,
    pub default: f64,
}

/// A three-component polynomial vector field with named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: [Expr; 3],
    params: Vec<ParamSpec>,
}

impl VectorField {
    /// Validates that every referenced parameter is declared (and that no
    /// parameter is declared twice).
    pub fn new(components: [Expr; 3], params: Vec<ParamSpec>) -> Result<VectorField> {
        for (i, p) in params.iter().enumerate() {
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidInput(format!(
                    "parameter `{}` declared twice",
                    p.name
                )));
            }
        }
        let mut referenced = Vec::new();
        for c in &components {
            c.collect_params(&mut referenced);
        }
        for name in referenced {
            if !params.iter().any(|p| p.name == name) {
                return Err(Error::UnknownParameter(name.to_string()));
            }
        }
        Ok(VectorField { components, params })
    }

    pub fn component(&self, axis: Axis) -> &Expr {
        &self.components[axis.index()]
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.components
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    /// Default parameter values as a bindable set.
    pub fn default_values(&self) -> ParamValues {
        ParamValues::from_pairs(self.params.iter().map(|p| (p.name.as_ref(), p.default)))
            .expect("declared names are unique")
    }

    /// Resolves defaults plus `(name, value)` overrides; unknown names and
    /// duplicate overrides are errors.
    pub fn resolve_params(&self, overrides: &[(String, f64)]) -> Result<ParamValues> {
        let mut values = self.default_values();
        let mut seen: Vec<&str> = Vec::new();
        for (name, value) in overrides {
            if seen.contains(&name.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "parameter `{name}` overridden twice"
                )));
            }
            seen.push(name);
            values = values.with(name, *value)?;
        }
        Ok(values)
    }

    /// Binds parameter values, producing a field ready for numeric work.
    pub fn bind(&self, overrides: &[(String, f64)]) -> Result<BoundField> {
        let values = self.resolve_params(overrides)?;
        BoundField::new(self, values)
    }

    /// The symbolic Jacobian and its material derivative, with parameters
    /// kept symbolic.
    pub fn jacobian(&self) -> SymbolicJacobian {
        let entries = core_jacobian(&self.components);
        let material_derivative = core_material_derivative(&entries, &self.components);
        SymbolicJacobian {
            entries,
            material_derivative,
        }
    }
}

/// 3×3 matrix of symbolic partials `J[i][j] = ∂F_i/∂x_j`, together with the
/// material derivative `dJ/dt = Σ_k (∂J/∂x_k)·F_k` along the flow.
#[derive(Debug, Clone)]
pub struct SymbolicJacobian {
    pub entries: [[Expr; 3]; 3],
    pub material_derivative: [[Expr; 3]; 3],
}

fn core_jacobian(components: &[Expr; 3]) -> [[Expr; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| {
        components[i].diff(Axis::ALL[j])
    }))
}

fn core_material_derivative(
    jacobian: &[[Expr; 3]; 3],
    components: &[Expr; 3],
) -> [[Expr; 3]; 3] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            Expr::sum(
                Axis::ALL
                    .into_iter()
                    .map(|k| {
                        Expr::mul(
                            jacobian[i][j].diff(k),
                            components[k.index()].clone(),
                        )
                    })
                    .collect(),
            )
        })
    })
}

/// A vector field with parameters substituted: every expression is closed,
/// and the Jacobian plus its material derivative are prebuilt.
#[derive(Debug, Clone)]
pub struct BoundField {
    components: [ClosedExpr; 3],
    jacobian: [[ClosedExpr; 3]; 3],
    jacobian_rate: [[ClosedExpr; 3]; 3],
    values: ParamValues,
}

impl BoundField {
    fn new(field: &VectorField, values: ParamValues) -> Result<BoundField> {
        let components: [ClosedExpr; 3] = {
            let mut out = Vec::with_capacity(3);
            for c in &field.components {
                out.push(ClosedExpr::new(c.substitute_params(&values)?)?);
            }
            out.try_into().expect("three components")
        };
        let raw: [Expr; 3] = std::array::from_fn(|i| components[i].expr().clone());
        let jac = core_jacobian(&raw);
        let rate = core_material_derivative(&jac, &raw);
        let close33 = |m: [[Expr; 3]; 3]| -> [[ClosedExpr; 3]; 3] {
            m.map(|row| row.map(|e| ClosedExpr::new(e).expect("derivatives of closed exprs")))
        };
        Ok(BoundField {
            components,
            jacobian: close33(jac),
            jacobian_rate: close33(rate),
            values,
        })
    }

    pub fn components(&self) -> &[ClosedExpr; 3] {
        &self.components
    }

    /// Symbolic entries of J(X).
    pub fn jacobian_exprs(&self) -> &[[ClosedExpr; 3]; 3] {
        &self.jacobian
    }

    /// Symbolic entries of dJ/dt(X).
    pub fn jacobian_rate_exprs(&self) -> &[[ClosedExpr; 3]; 3] {
        &self.jacobian_rate
    }

    pub fn values(&self) -> &ParamValues {
        &self.values
    }

    /// F(X) — the velocity.
    pub fn f(&self, state: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.components[0].eval(state),
            self.components[1].eval(state),
            self.components[2].eval(state),
        )
    }

    /// J(X) — the Jacobian matrix.
    pub fn jacobian_at(&self, state: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.jacobian[i][j].eval(state))
    }

    /// dJ/dt(X) = Σ_k (∂J/∂x_k)·F_k(X) — the Jacobian's rate of change
    /// along the flow.
    pub fn jacobian_rate_at(&self, state: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.jacobian_rate[i][j].eval(state))
    }

    /// The full derivative stack at one state. The jerk is assembled from
    /// the chain rule (X⃛ = JẌ + (dJ/dt)Ẋ), not by differencing.
    pub fn derivative_stack(&self, state: &Vector3<f64>) -> DerivativeStack {
        let xdot = self.f(state);
        let jacobian = self.jacobian_at(state);
        let jacobian_rate = self.jacobian_rate_at(state);
        let xddot = jacobian * xdot;
        let xdddot = jacobian * xddot + jacobian_rate * xdot;
        DerivativeStack {
            state: *state,
            xdot,
            xddot,
            xdddot,
            jacobian,
            jacobian_rate,
        }
    }
}

/// State and its first three time derivatives, with the Jacobian data used
/// to build them.
#[derive(Debug, Clone)]
pub struct DerivativeStack {
    pub state: Vector3<f64>,
    pub xdot: Vector3<f64>,
    pub xddot: Vector3<f64>,
    pub xdddot: Vector3<f64>,
    pub jacobian: Matrix3<f64>,
    pub jacobian_rate: Matrix3<f64>,
}

/// Parses a standalone expression over `x`, `y`, `z` and the given
/// parameter names.
pub fn parse_expr(source: &str, declared_params: &[&str]) -> Result<Expr> {
    parser::parse_expr_at(source, declared_params, 1, 0)
}

/// Parses the plain-text field format:
///
/// ```text
/// # comment
/// param a = 0.5
/// dx = -y + z
/// dy = x + a*y
/// dz = -z + x^2
/// ```
///
/// `param` lines declare parameters with defaults and may appear anywhere;
/// each of `dx`, `dy`, `dz` must appear exactly once.
pub fn parse_field(source: &str) -> Result<VectorField> {
    struct PendingComponent<'a> {
        axis: Axis,
        src: &'a str,
        line: usize,
        column_offset: usize,
    }

    let mut params: Vec<(ParamSpec, usize)> = Vec::new();
    let mut pending: Vec<PendingComponent> = Vec::new();
    let mut last_line = 0;

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let body = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        if body.trim().is_empty() {
            continue;
        }
        let (keyword, rest) = match body.trim_start().split_once('=') {
            Some((lhs, rhs)) => (lhs.trim(), rhs),
            None => {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("expected `<name> = <value>`, got `{}`", body.trim()),
                });
            }
        };
        let rhs_offset = body.len() - rest.len();
        if let Some(axis) = match keyword {
            "dx" => Some(Axis::X),
            "dy" => Some(Axis::Y),
            "dz" => Some(Axis::Z),
            _ => None,
        } {
            if pending.iter().any(|p| p.axis == axis) {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("duplicate definition of d{}", axis),
                });
            }
            pending.push(PendingComponent {
                axis,
                src: rest,
                line: line_no,
                column_offset: rhs_offset,
            });
        } else if let Some(name) = keyword.strip_prefix("param ") {
            let name = name.trim();
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_')
                || name.starts_with(|c: char| c.is_ascii_digit())
                || matches!(name, "x" | "y" | "z")
            {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("invalid parameter name `{name}`"),
                });
            }
            if params.iter().any(|(p, _)| p.name.as_ref() == name) {
                return Err(Error::Parse {
                    line: line_no,
                    column: 1,
                    message: format!("parameter `{name}` declared twice"),
                });
            }
            let default: f64 = rest.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                column: rhs_offset + 1,
                message: format!("malformed parameter default `{}`", rest.trim()),
            })?;
            params.push((
                ParamSpec {
                    name: Arc::from(name),
                    default,
                },
                line_no,
            ));
        } else {
            return Err(Error::Parse {
                line: line_no,
                column: 1,
                message: format!(
                    "unrecognized line `{}` (expected dx/dy/dz or `param <name> = <value>`)",
                    body.trim()
                ),
            });
        }
    }

    for axis in Axis::ALL {
        if !pending.iter().any(|p| p.axis == axis) {
            return Err(Error::Parse {
                line: last_line + 1,
                column: 1,
                message: format!("missing definition for d{axis}"),
            });
        }
    }

    let declared: Vec<&str> = params.iter().map(|(p, _)| p.name.as_ref()).collect();
    let mut components: [Option<Expr>; 3] = [None, None, None];
    for p in pending {
        let e = parser::parse_expr_at(p.src, &declared, p.line, p.column_offset)?;
        components[p.axis.index()] = Some(e);
    }
    let components = components.map(|c| c.expect("presence checked above"));
    VectorField::new(components, params.into_iter().map(|(p, _)| p).collect())
}

/// Substitutes parameters throughout, returning a parameter-free field.
pub fn freeze(field: &VectorField, values: &ParamValues) -> Result<VectorField> {
    let components = {
        let mut out = Vec::with_capacity(3);
        for c in field.components() {
            out.push(c.substitute_params(values)?);
        }
        <[Expr; 3]>::try_from(out).expect("three components")
    };
    VectorField::new(components, Vec::new())
}

/// Rigidly translates a parameter-free field: the result evaluates as
/// `g(X) = F(X + offset)`, expanded back into polynomial form.
pub fn translate(field: &VectorField, offset: &Vector3<f64>) -> Result<VectorField> {
    if !field.params().is_empty() {
        return Err(Error::InvalidInput(
            "translate requires a parameter-free field; freeze parameters first".into(),
        ));
    }
    let components = {
        let mut out = Vec::with_capacity(3);
        for c in field.components() {
            let closed = ClosedExpr::new(c.clone())?;
            out.push(Poly::from_shifted(&closed, offset).into_expr().into_expr());
        }
        <[Expr; 3]>::try_from(out).expect("three components")
    };
    VectorField::new(components, Vec::new())
}
