//! Implicit-surface extraction on a regular grid, with near-singular vertex
//! flagging and connected-component diagnostics.

mod tables;

use std::collections::HashMap;
use std::io;

use nalgebra::Vector3;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use tables::{case_table, CORNER_POS, EDGE_CORNERS};

/// Fewest cells per axis that still resolve a surface.
pub const MIN_RESOLUTION: usize = 8;
/// Largest supported grid (keeps the sample array within memory).
pub const MAX_RESOLUTION: usize = 512;
/// A vertex is flagged when ‖∇f‖ falls below this fraction of the mesh
/// median gradient norm.
pub const NEAR_SINGULAR_FRACTION: f64 = 1e-6;
/// A component is a spurious-surface candidate when more than half of its
/// vertices are flagged.
pub const SPURIOUS_MAJORITY: f64 = 0.5;

/// Grid and level for one extraction.
#[derive(Debug, Clone)]
pub struct MeshOptions {
    pub bounds: (Vector3<f64>, Vector3<f64>),
    /// Cells per axis.
    pub resolution: usize,
    /// Level value of the extracted set f = iso.
    pub iso: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            bounds: (Vector3::new(-1.0, -1.0, -1.0), Vector3::new(1.0, 1.0, 1.0)),
            resolution: 64,
            iso: 0.0,
        }
    }
}

/// One connected piece of the extracted surface.
#[derive(Debug, Clone)]
pub struct MeshComponent {
    pub vertices: Vec<usize>,
    pub triangle_count: usize,
    pub flagged_fraction: f64,
    /// Majority of vertices sit where the gradient nearly vanishes.
    pub spurious_candidate: bool,
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

/// An indexed triangle mesh of a level set.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// ‖∇f‖ at each vertex.
    pub gradient_norms: Vec<f64>,
    /// Near-singular flag per vertex.
    pub flagged: Vec<bool>,
    /// Component index of each vertex.
    pub component_of_vertex: Vec<usize>,
    pub components: Vec<MeshComponent>,
    /// Median of `gradient_norms` (0 for an empty mesh).
    pub median_gradient: f64,
    /// Spread of the sampled values over the grid corners.
    pub value_range: f64,
    /// Diagonal length of one grid cell.
    pub cell_diagonal: f64,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn spurious_component_indices(&self) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.spurious_candidate)
            .map(|(i, _)| i)
            .collect()
    }

    /// V − E + F with E counted over unique undirected edges.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Distance from `p` to the nearest vertex of any spurious-candidate
    /// component, if one exists.
    pub fn distance_to_spurious(&self, p: &Vector3<f64>) -> Option<f64> {
        let mut best: Option<f64> = None;
        for c in self.components.iter().filter(|c| c.spurious_candidate) {
            for &v in &c.vertices {
                let d = (self.vertices[v] - p).norm();
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }
}

/// Trajectory bounding box grown by 20% along each axis, the default mesh
/// domain for an attractor.
pub fn padded_bounds(traj: &Trajectory) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let (lo, hi) = traj.bounding_box()?;
    let mut out_lo = lo;
    let mut out_hi = hi;
    for axis in 0..3 {
        let pad = (0.1 * (hi[axis] - lo[axis])).max(1e-3);
        out_lo[axis] -= pad;
        out_hi[axis] += pad;
    }
    Some((out_lo, out_hi))
}

struct Grid {
    lo: Vector3<f64>,
    step: Vector3<f64>,
    n: usize,
    values: Vec<f64>,
}

impl Grid {
    fn corner(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(
            self.lo.x + self.step.x * i as f64,
            self.lo.y + self.step.y * j as f64,
            self.lo.z + self.step.z * k as f64,
        )
    }

    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + (self.n + 1) * (j + (self.n + 1) * k)]
    }
}

fn edge_key(cell: (usize, usize, usize), edge: u8, n: usize) -> u64 {
    let (a, b) = EDGE_CORNERS[edge as usize];
    let (pa, pb) = (CORNER_POS[a], CORNER_POS[b]);
    let mut lattice = [0usize; 3];
    let mut axis = 0u64;
    let cell = [cell.0, cell.1, cell.2];
    for d in 0..3 {
        let (la, lb) = (pa[d] as usize, pb[d] as usize);
        lattice[d] = cell[d] + la.min(lb);
        if la != lb {
            axis = d as u64;
        }
    }
    let stride = (n + 2) as u64;
    axis + 4 * (lattice[0] as u64 + stride * (lattice[1] as u64 + stride * lattice[2] as u64))
}

/// Extracts the level set f = iso over a regular grid. Vertices start at the
/// linear zero of each cut edge and are polished along the gradient until
/// |f − iso| < 1e−6 · cell diagonal (where the gradient is meaningful).
/// An all-positive or all-negative grid yields an empty mesh, not an error.
pub fn extract_mesh<F, G>(f: F, grad: G, opts: &MeshOptions) -> Result<Mesh>
where
    F: Fn(&Vector3<f64>) -> f64,
    G: Fn(&Vector3<f64>) -> Vector3<f64>,
{
    let n = opts.resolution;
    if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "resolution {n} outside {MIN_RESOLUTION}..={MAX_RESOLUTION}"
        )));
    }
    let (lo, hi) = opts.bounds;
    for axis in 0..3 {
        if !(hi[axis] - lo[axis]).is_finite() || hi[axis] <= lo[axis] {
            return Err(Error::InvalidInput("mesh bounds must satisfy lo < hi".into()));
        }
    }
    if !opts.iso.is_finite() {
        return Err(Error::InvalidInput("iso level must be finite".into()));
    }

    let step = (hi - lo) / n as f64;
    let cell_diagonal = step.norm();
    let mut grid = Grid {
        lo,
        step,
        n,
        values: Vec::with_capacity((n + 1).pow(3)),
    };
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                let v = f(&grid.corner(i, j, k));
                vmin = vmin.min(v);
                vmax = vmax.max(v);
                grid.values.push(v);
            }
        }
    }
    let value_range = if vmin.is_finite() && vmax.is_finite() {
        vmax - vmin
    } else {
        f64::INFINITY
    };

    let residual_tol = NEAR_SINGULAR_FRACTION * cell_diagonal;
    let table = case_table();
    let mut vertex_of_edge: HashMap<u64, usize> = HashMap::new();
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut gradient_norms: Vec<f64> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    let corner_offsets: [(usize, usize, usize); 8] = [
        (0, 0, 0),
        (1, 0, 0),
        (1, 1, 0),
        (0, 1, 0),
        (0, 0, 1),
        (1, 0, 1),
        (1, 1, 1),
        (0, 1, 1),
    ];

    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut mask = 0usize;
                for (bit, &(di, dj, dk)) in corner_offsets.iter().enumerate() {
                    if grid.value(i + di, j + dj, k + dk) < opts.iso {
                        mask |= 1 << bit;
                    }
                }
                if table.edge_mask[mask] == 0 {
                    continue;
                }
                for tri in &table.triangles[mask] {
                    let mut ids = [0usize; 3];
                    for (slot, &edge) in tri.iter().enumerate() {
                        let key = edge_key((i, j, k), edge, n);
                        let id = match vertex_of_edge.get(&key) {
                            Some(&id) => id,
                            None => {
                                let (ca, cb) = EDGE_CORNERS[edge as usize];
                                let (oa, ob) = (corner_offsets[ca], corner_offsets[cb]);
                                let pa = grid.corner(i + oa.0, j + oa.1, k + oa.2);
                                let pb = grid.corner(i + ob.0, j + ob.1, k + ob.2);
                                let va = grid.value(i + oa.0, j + oa.1, k + oa.2);
                                let vb = grid.value(i + ob.0, j + ob.1, k + ob.2);
                                let theta = ((opts.iso - va) / (vb - va)).clamp(0.0, 1.0);
                                let p_lin = pa + (pb - pa) * theta;
                                let mut p = p_lin;
                                for _ in 0..8 {
                                    let r = f(&p) - opts.iso;
                                    if r.abs() < residual_tol {
                                        break;
                                    }
                                    let g = grad(&p);
                                    let g2 = g.norm_squared();
                                    if g2.sqrt() <= 1e-8 {
                                        break;
                                    }
                                    let next = p - g * (r / g2);
                                    if (next - p_lin).norm() > cell_diagonal {
                                        break;
                                    }
                                    p = next;
                                }
                                let id = vertices.len();
                                vertices.push(p);
                                gradient_norms.push(grad(&p).norm());
                                vertex_of_edge.insert(key, id);
                                id
                            }
                        };
                        ids[slot] = id;
                    }
                    triangles.push(ids);
                }
            }
        }
    }

    // Near-singular flags relative to the median gradient magnitude.
    let median_gradient = if gradient_norms.is_empty() {
        0.0
    } else {
        let mut sorted = gradient_norms.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite gradient norms"));
        sorted[sorted.len() / 2]
    };
    let flagged: Vec<bool> = gradient_norms
        .iter()
        .map(|&g| g < NEAR_SINGULAR_FRACTION * median_gradient)
        .collect();

    // Connected components over triangle adjacency.
    let mut parent: Vec<usize> = (0..vertices.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tri in &triangles {
        let r0 = find(&mut parent, tri[0]);
        for &v in &tri[1..] {
            let rv = find(&mut parent, v);
            parent[rv.max(r0)] = rv.min(r0);
        }
    }
    let mut component_of_root: HashMap<usize, usize> = HashMap::new();
    let mut component_of_vertex = vec![0usize; vertices.len()];
    let mut components: Vec<MeshComponent> = Vec::new();
    for v in 0..vertices.len() {
        let root = find(&mut parent, v);
        let next_id = components.len();
        let id = *component_of_root.entry(root).or_insert_with(|| {
            components.push(MeshComponent {
                vertices: Vec::new(),
                triangle_count: 0,
                flagged_fraction: 0.0,
                spurious_candidate: false,
                min: Vector3::from_element(f64::INFINITY),
                max: Vector3::from_element(f64::NEG_INFINITY),
            });
            next_id
        });
        component_of_vertex[v] = id;
        let c = &mut components[id];
        c.vertices.push(v);
        c.min = c.min.inf(&vertices[v]);
        c.max = c.max.sup(&vertices[v]);
        if flagged[v] {
            c.flagged_fraction += 1.0;
        }
    }
    for tri in &triangles {
        components[component_of_vertex[tri[0]]].triangle_count += 1;
    }
    for c in &mut components {
        c.flagged_fraction /= c.vertices.len().max(1) as f64;
        c.spurious_candidate = c.flagged_fraction > SPURIOUS_MAJORITY;
    }

    Ok(Mesh {
        vertices,
        triangles,
        gradient_norms,
        flagged,
        component_of_vertex,
        components,
        median_gradient,
        value_range,
        cell_diagonal,
    })
}

/// Writes the mesh as Wavefront OBJ (1-based indices).
pub fn write_obj<W: io::Write>(mesh: &Mesh, w: &mut W) -> io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Writes the per-vertex diagnostics sidecar.
pub fn write_flags_csv<W: io::Write>(mesh: &Mesh, w: &mut W) -> io::Result<()> {
    writeln!(
        w,
        "vertex,x,y,z,gradient_norm,flagged,component,component_spurious"
    )?;
    for (v, p) in mesh.vertices.iter().enumerate() {
        let c = mesh.component_of_vertex[v];
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            v,
            p.x,
            p.y,
            p.z,
            mesh.gradient_norms[v],
            mesh.flagged[v],
            c,
            mesh.components[c].spurious_candidate
        )?;
    }
    Ok(())
}
