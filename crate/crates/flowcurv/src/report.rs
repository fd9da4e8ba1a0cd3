//! Serializable classification reports.
//!
//! Every numeric field of [`ClassifyReport`] is described in its `units`
//! map (dotted paths, `[]` for array elements), so consumers never have to
//! guess scales, and every runtime default is echoed so a report fully
//! describes the run that produced it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Bumped whenever the report layout changes shape.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComplexNumber {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub location: [f64; 3],
    pub eigenvalues: Vec<ComplexNumber>,
    /// node | saddle | focus-node | saddle-focus
    pub class: String,
    /// inner | outer | marginal
    pub role: String,
    /// Local shape of the curvature manifold around the point.
    pub shape: String,
    pub has_phi_t_component: bool,
    /// Worst ‖(J − λI)v‖ over the three eigenpairs.
    pub eigen_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WrappingNumberReport {
    pub defined: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    /// Why the number is undefined, when it is.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictReport {
    /// wrapping | crossing | undetermined (the latter only on divergence)
    pub verdict: String,
    /// What the counted events are sign changes of: "geometric_factor"
    /// when φ_t factors into velocity · geometric (so velocity-sheet
    /// crossings are discounted), "phi_t" when it does not, "none" on
    /// divergence.
    pub basis: String,
    /// Sampled sign changes of φ_t itself, before the factor split.
    pub phi_t_sign_changes: usize,
    /// Refined events of the verdict basis, before exclusions.
    pub events_total: usize,
    /// Events still counted after the exclusions below.
    pub events_counted: usize,
    pub excluded_near_fixed_points: usize,
    pub excluded_near_spurious_mesh: usize,
    /// Grazing double sign changes, reported but never counted.
    pub tangencies: usize,
    /// Radius of the near-fixed-point exclusion balls used for this run.
    pub exclusion_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectionReport {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub rho_axis: [f64; 3],
    /// + | - | both
    pub direction: String,
    pub half_plane_only: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnMapReport {
    pub section: SectionReport,
    pub crossings: usize,
    pub tangential_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merged_branch_count: Option<usize>,
    pub critical_points: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transition_matrix: Option<Vec<Vec<u8>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub field: String,
    pub resolution: usize,
    pub bounds: [[f64; 3]; 2],
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub component_count: usize,
    /// Indices of components judged artifacts of the implicit
    /// representation rather than crossable geometry: the union of the
    /// gradient-degenerate components and the velocity-sheet components.
    pub spurious_components: Vec<usize>,
    /// Components whose vertices mostly lie on zero sheets of the velocity
    /// factor of φ_t (empty when φ_t does not factor).
    pub velocity_sheet_components: Vec<usize>,
    pub flagged_vertex_fraction: f64,
    pub median_gradient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarbouxReport {
    /// Zero-set sample points measured.
    pub count: usize,
    pub excluded_degenerate: usize,
    /// Normalized invariance residuals |∇φ·F|/(‖∇φ‖‖F‖), 3 significant
    /// figures.
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

/// The runtime settings a report was produced with.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDefaults {
    pub initial_condition: [f64; 3],
    pub t_end: f64,
    pub dt: f64,
    pub transient: f64,
    pub mesh_resolution: usize,
    pub seed: u64,
    pub epsilon_fixed_point: f64,
    /// Crossing-exclusion radius around spurious mesh components, in units
    /// of the mesh cell diagonal.
    pub spurious_exclusion_cell_diagonals: f64,
    /// Near-fixed-point exclusion radius as a fraction of the attractor's
    /// bounding-box diagonal.
    pub fixed_point_cone_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub schema_version: u32,
    pub system: String,
    pub title: String,
    pub params: BTreeMap<String, f64>,
    pub defaults: RunDefaults,
    pub diverged: bool,
    pub fixed_points: Vec<FixedPointReport>,
    pub wrapping_number: WrappingNumberReport,
    pub verdict: VerdictReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub return_map: Option<ReturnMapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub darboux: Option<DarbouxReport>,
    /// Unit of every numeric field, keyed by dotted path.
    pub units: BTreeMap<String, String>,
}

/// Rounds to `sig` significant figures (report cosmetics only).
pub fn round_significant(x: f64, sig: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(sig - 1 - magnitude);
    (x * factor).round() / factor
}

/// The unit of every numeric field path in [`ClassifyReport`].
pub fn unit_map() -> BTreeMap<String, String> {
    let entries: &[(&str, &str)] = &[
        ("schema_version", "dimensionless"),
        ("params.*", "dimensionless"),
        ("defaults.initial_condition[]", "dimensionless"),
        ("defaults.t_end", "time"),
        ("defaults.dt", "time"),
        ("defaults.transient", "time"),
        ("defaults.mesh_resolution", "cells, dimensionless"),
        ("defaults.seed", "dimensionless"),
        ("defaults.epsilon_fixed_point", "state distance, dimensionless"),
        (
            "defaults.spurious_exclusion_cell_diagonals",
            "cell diagonals, dimensionless",
        ),
        ("defaults.fixed_point_cone_fraction", "dimensionless"),
        ("fixed_points[].location[]", "dimensionless"),
        ("fixed_points[].eigenvalues[].re", "1/time"),
        ("fixed_points[].eigenvalues[].im", "1/time"),
        ("fixed_points[].eigen_residual", "1/time"),
        ("wrapping_number.value", "dimensionless"),
        ("wrapping_number.omega", "radians/time"),
        ("wrapping_number.lambda_3", "1/time"),
        ("wrapping_number.separation", "state distance, dimensionless"),
        ("verdict.phi_t_sign_changes", "count"),
        ("verdict.events_total", "count"),
        ("verdict.events_counted", "count"),
        ("verdict.excluded_near_fixed_points", "count"),
        ("verdict.excluded_near_spurious_mesh", "count"),
        ("verdict.tangencies", "count"),
        ("verdict.exclusion_radius", "state distance, dimensionless"),
        ("return_map.section.point[]", "dimensionless"),
        ("return_map.section.normal[]", "dimensionless"),
        ("return_map.section.rho_axis[]", "dimensionless"),
        ("return_map.crossings", "count"),
        ("return_map.tangential_dropped", "count"),
        ("return_map.branch_count", "count"),
        ("return_map.merged_branch_count", "count"),
        ("return_map.critical_points[]", "state distance, dimensionless"),
        ("return_map.transition_matrix[][]", "dimensionless"),
        ("return_map.violation_fraction", "dimensionless"),
        ("mesh.resolution", "cells, dimensionless"),
        ("mesh.bounds[][]", "dimensionless"),
        ("mesh.vertex_count", "count"),
        ("mesh.triangle_count", "count"),
        ("mesh.component_count", "count"),
        ("mesh.spurious_components[]", "component index, dimensionless"),
        (
            "mesh.velocity_sheet_components[]",
            "component index, dimensionless",
        ),
        ("mesh.flagged_vertex_fraction", "dimensionless"),
        ("mesh.median_gradient", "1/time^6"),
        ("darboux.count", "count"),
        ("darboux.excluded_degenerate", "count"),
        ("darboux.min", "dimensionless"),
        ("darboux.max", "dimensionless"),
        ("darboux.mean", "dimensionless"),
        ("darboux.median", "dimensionless"),
    ];
    entries
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Collects the dotted path of every numeric leaf in a JSON value, with
/// array indices collapsed to `[]` and map keys under `params` collapsed to
/// `*`.
pub fn numeric_paths(value: &serde_json::Value) -> Vec<String> {
    fn walk(value: &serde_json::Value, path: String, out: &mut Vec<String>) {
        match value {
            serde_json::Value::Number(_) => out.push(path),
            serde_json::Value::Array(items) => {
                for item in items {
                    walk(item, format!("{path}[]"), out);
                }
            }
            serde_json::Value::Object(map) => {
                for (key, item) in map {
                    let key = if path == "params" || path == "units" {
                        "*"
                    } else {
                        key.as_str()
                    };
                    let next = if path.is_empty() {
                        key.to_string()
                    } else {
                        format!("{path}.{key}")
                    };
                    walk(item, next, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(value, String::new(), &mut out);
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_three_significant_figures() {
        assert_eq!(round_significant(0.0123456, 3), 0.0123);
        assert_eq!(round_significant(98765.4, 3), 98800.0);
        assert_eq!(round_significant(-0.00099999, 3), -0.001);
        assert_eq!(round_significant(0.0, 3), 0.0);
    }

    #[test]
    fn numeric_paths_collapse_arrays_and_param_keys() {
        let value = serde_json::json!({
            "params": {"a": 0.5, "b": 2.0},
            "fixed_points": [
                {"location": [0.0, 1.0, 2.0], "eigen_residual": 1e-12}
            ],
            "flag": true,
            "name": "x",
        });
        let paths = numeric_paths(&value);
        assert_eq!(
            paths,
            vec![
                "fixed_points[].eigen_residual".to_string(),
                "fixed_points[].location[]".to_string(),
                "params.*".to_string(),
            ]
        );
    }
}
