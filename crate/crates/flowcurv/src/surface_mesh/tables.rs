//! Marching-cubes case tables.
//!
//! Conventions: cube corner v0 sits at the cell origin, v1 = +x, v2 = +x+y,
//! v3 = +y, and v4–v7 repeat that square at +z. Edges 0–3 ring the bottom
//! face, 4–7 the top face, and 8–11 are the vertical pillars starting at
//! v0–v3. A corner's bit in the case index is set iff its sampled value is
//! below the iso level.
//!
//! Both tables are generated once at startup instead of being transcribed:
//! the cut-edge mask follows directly from the corner signs, and the
//! triangulation is built by pairing cut edges on each face and walking the
//! resulting closed loops. On a face cut four times, the segments are chosen
//! to cut off the below-iso corners; since that choice depends only on the
//! face's own sign pattern, the two cells sharing any face always agree and
//! the extracted surface stays watertight.

use std::sync::OnceLock;

/// Corner positions of the unit cube, in index order.
pub(crate) const CORNER_POS: [[f64; 3]; 8] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 1.0],
    [0.0, 1.0, 1.0],
];

/// Corner pair of each of the 12 edges.
pub(crate) const EDGE_CORNERS: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// The six faces as cyclic corner loops.
const FACES: [[usize; 4]; 6] = [
    [0, 1, 2, 3], // z = 0
    [4, 5, 6, 7], // z = 1
    [0, 1, 5, 4], // y = 0
    [3, 2, 6, 7], // y = 1
    [0, 3, 7, 4], // x = 0
    [1, 2, 6, 5], // x = 1
];

pub(crate) struct CaseTable {
    /// Bit e set iff edge e is cut in that configuration.
    pub edge_mask: [u16; 256],
    /// Triangles as triples of edge indices, per configuration.
    pub triangles: Vec<Vec<[u8; 3]>>,
}

fn edge_between(a: usize, b: usize) -> u8 {
    EDGE_CORNERS
        .iter()
        .position(|&(p, q)| (p == a && q == b) || (p == b && q == a))
        .expect("face edges are cube edges") as u8
}

fn edge_midpoint(e: u8) -> [f64; 3] {
    let (a, b) = EDGE_CORNERS[e as usize];
    let (pa, pb) = (CORNER_POS[a], CORNER_POS[b]);
    [
        0.5 * (pa[0] + pb[0]),
        0.5 * (pa[1] + pb[1]),
        0.5 * (pa[2] + pb[2]),
    ]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn triangulate_case(mask: usize) -> Vec<[u8; 3]> {
    let inside = |v: usize| mask >> v & 1 == 1;

    // Pair the cut edges of every face; each cut edge lies on two faces and
    // therefore ends up with exactly two partners, so the pairs form loops.
    let mut partners: [Vec<u8>; 12] = Default::default();
    let connect = |a: u8, b: u8, partners: &mut [Vec<u8>; 12]| {
        partners[a as usize].push(b);
        partners[b as usize].push(a);
    };
    for face in FACES {
        let fe: Vec<u8> = (0..4)
            .map(|i| edge_between(face[i], face[(i + 1) % 4]))
            .collect();
        let cut: Vec<usize> = (0..4)
            .filter(|&i| inside(face[i]) != inside(face[(i + 1) % 4]))
            .collect();
        match cut.len() {
            0 => {}
            2 => connect(fe[cut[0]], fe[cut[1]], &mut partners),
            4 => {
                // Alternating corners: cut off the below-iso diagonal.
                if inside(face[0]) {
                    connect(fe[3], fe[0], &mut partners);
                    connect(fe[1], fe[2], &mut partners);
                } else {
                    connect(fe[0], fe[1], &mut partners);
                    connect(fe[2], fe[3], &mut partners);
                }
            }
            _ => unreachable!("a face has an even number of cut edges"),
        }
    }

    // Walk the loops.
    let mut visited = [false; 12];
    let mut triangles = Vec::new();
    for start in 0..12u8 {
        if partners[start as usize].is_empty() || visited[start as usize] {
            continue;
        }
        let mut cycle = vec![start];
        visited[start as usize] = true;
        let mut prev = start;
        let mut current = partners[start as usize][0];
        while current != start {
            visited[current as usize] = true;
            cycle.push(current);
            let opts = &partners[current as usize];
            let next = if opts[0] == prev { opts[1] } else { opts[0] };
            prev = current;
            current = next;
        }

        // Orient the loop so triangle normals point from below-iso toward
        // above-iso territory, then fan-triangulate.
        let pts: Vec<[f64; 3]> = cycle.iter().map(|&e| edge_midpoint(e)).collect();
        let mut normal = [0.0; 3];
        for i in 0..pts.len() {
            let c = cross(pts[i], pts[(i + 1) % pts.len()]);
            normal[0] += c[0];
            normal[1] += c[1];
            normal[2] += c[2];
        }
        let mut outward = [0.0; 3];
        for &e in &cycle {
            let (a, b) = EDGE_CORNERS[e as usize];
            let (lo, hi) = if inside(a) { (a, b) } else { (b, a) };
            for d in 0..3 {
                outward[d] += CORNER_POS[hi][d] - CORNER_POS[lo][d];
            }
        }
        if dot(normal, outward) < 0.0 {
            cycle.reverse();
        }
        for i in 1..cycle.len() - 1 {
            triangles.push([cycle[0], cycle[i], cycle[i + 1]]);
        }
    }
    triangles
}

fn generate() -> CaseTable {
    let mut edge_mask = [0u16; 256];
    let mut triangles = Vec::with_capacity(256);
    for mask in 0..256usize {
        let inside = |v: usize| mask >> v & 1 == 1;
        for (e, &(a, b)) in EDGE_CORNERS.iter().enumerate() {
            if inside(a) != inside(b) {
                edge_mask[mask] |= 1 << e;
            }
        }
        triangles.push(triangulate_case(mask));
    }
    CaseTable {
        edge_mask,
        triangles,
    }
}

pub(crate) fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(generate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_mask_is_complement_symmetric() {
        let table = case_table();
        for i in 0..256 {
            assert_eq!(table.edge_mask[i], table.edge_mask[255 - i], "case {i}");
        }
        assert_eq!(table.edge_mask[0], 0);
        assert_eq!(table.edge_mask[255], 0);
        // One corner below iso cuts exactly its three incident edges.
        assert_eq!(table.edge_mask[1], 1 << 0 | 1 << 3 | 1 << 8);
    }

    #[test]
    fn triangles_use_exactly_the_cut_edges() {
        let table = case_table();
        for mask in 0..256usize {
            let mut used = 0u16;
            for tri in &table.triangles[mask] {
                for &e in tri {
                    used |= 1 << e;
                    assert_ne!(
                        table.edge_mask[mask] & (1 << e),
                        0,
                        "case {mask} triangle touches uncut edge {e}"
                    );
                }
            }
            assert_eq!(used, table.edge_mask[mask], "case {mask} leaves cut edges unused");
        }
    }

    #[test]
    fn every_case_triangulates_into_closed_fans() {
        let table = case_table();
        for mask in 1..255usize {
            let tris = &table.triangles[mask];
            assert!(!tris.is_empty(), "case {mask} has cut edges but no triangles");
            for tri in tris {
                assert!(tri[0] != tri[1] && tri[1] != tri[2] && tri[0] != tri[2]);
            }
            // Within one cell the triangulated patch is bounded by the loop
            // edges: every interior (shared) segment appears exactly twice,
            // once per direction.
            let mut directed = std::collections::HashSet::new();
            for tri in tris {
                for k in 0..3 {
                    assert!(
                        directed.insert((tri[k], tri[(k + 1) % 3])),
                        "case {mask} repeats a directed segment"
                    );
                }
            }
        }
    }

    #[test]
    fn single_corner_case_is_one_triangle() {
        let table = case_table();
        assert_eq!(table.triangles[1].len(), 1);
        // All four single-diagonal corners below iso: four separate triangles.
        let alternating = 1 | 1 << 2 | 1 << 5 | 1 << 7;
        assert_eq!(table.triangles[alternating].len(), 4);
    }
}
