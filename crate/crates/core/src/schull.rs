//! Sparse geometric graphs over point clouds.
//!
//! [`build_schull`] projects a cloud onto the unit sphere about its centroid
//! and keeps the edges of the convex hull of the projection. The result is
//! connected and has at most `3n - 6` edges. Node attributes are distances to
//! the centroid; edge attributes are the Euclidean length and `tau`, the angle
//! (radians) at the centroid between the two projected endpoints.
//!
//! [`radius_graph`] is the dense baseline: every pair within a cutoff.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    centroid, convex_hull_sphere, project_points, GeometryError, PointCloud, Vec3,
};

/// Magnitude of the optional per-point displacement used to escape
/// degenerate configurations.
pub const JITTER_AMPLITUDE: f64 = 1e-7;
const JITTER_SEED: u64 = 0x5343_4855_4c4c; // "SCHULL"

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub length: f64,
    pub tau: f64,
}

/// Attributed undirected graph; each edge is stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricGraph {
    pub node_coords: Vec<Vec3>,
    pub node_attrs: Vec<f64>,
    pub node_features: Vec<u64>,
    pub edges: Vec<GraphEdge>,
    pub centroid: Vec3,
}

impl GeometricGraph {
    pub fn node_count(&self) -> usize {
        self.node_coords.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbor lists as `(neighbor, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.node_count()];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.i].push((e.j, k));
            adj[e.j].push((e.i, k));
        }
        adj
    }

    /// Number of connected components (union-find).
    pub fn components(&self) -> usize {
        let n = self.node_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = n;
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a != b {
                parent[a] = b;
                count -= 1;
            }
        }
        count
    }
}

/// Largest edge count the hull construction can produce for `n` nodes.
pub fn edge_bound(n: usize) -> usize {
    match n {
        0 | 1 => 0,
        2 => 1,
        _ => 3 * n - 6,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SchullOptions {
    /// Retry degenerate clouds after displacing every point by a fixed
    /// pseudo-random offset of [`JITTER_AMPLITUDE`] Å seeded by its index.
    pub jitter: bool,
}

/// Strict construction: degenerate clouds are an error.
pub fn build_schull(cloud: &PointCloud) -> Result<GeometricGraph, GeometryError> {
    build_from(cloud.points(), cloud.features())
}

/// Construction with options. The flag in the result reports whether the
/// jittered retry was needed.
pub fn build_schull_with(
    cloud: &PointCloud,
    options: SchullOptions,
) -> Result<(GeometricGraph, bool), GeometryError> {
    match build_from(cloud.points(), cloud.features()) {
        Ok(g) => Ok((g, false)),
        Err(err) if options.jitter && is_degeneracy(&err) => {
            let moved = jittered(cloud.points());
            build_from(&moved, cloud.features()).map(|g| (g, true))
        }
        Err(err) => Err(err),
    }
}

pub fn is_degeneracy(err: &GeometryError) -> bool {
    matches!(
        err,
        GeometryError::DegeneratePoint(_)
            | GeometryError::DuplicateDirection(..)
            | GeometryError::DegenerateConfiguration(_)
    )
}

/// Deterministic displacement: point `k` moves by `JITTER_AMPLITUDE` along
/// a direction drawn from a generator seeded with `k`.
pub fn jittered(points: &[Vec3]) -> Vec<Vec3> {
    points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(JITTER_SEED ^ k as u64);
            let dir = loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v / n;
                }
            };
            p + dir * JITTER_AMPLITUDE
        })
        .collect()
}

fn central_angle(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

fn build_from(points: &[Vec3], features: &[u64]) -> Result<GeometricGraph, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let center = crate::geometry::mean(points);
    let node_attrs: Vec<f64> = points.iter().map(|p| (p - center).norm()).collect();
    let edges = if points.len() == 1 {
        Vec::new()
    } else {
        let sphere = project_points(points, &center)?;
        convex_hull_sphere(&sphere)?
            .into_iter()
            .map(|(i, j)| GraphEdge {
                i,
                j,
                length: (points[i] - points[j]).norm(),
                tau: central_angle(&sphere[i], &sphere[j]),
            })
            .collect()
    };
    Ok(GeometricGraph {
        node_coords: points.to_vec(),
        node_attrs,
        node_features: features.to_vec(),
        edges,
        centroid: center,
    })
}

/// All pairs with distance at most `cutoff`, found with a uniform cell grid.
/// Edges carry `tau = 0`.
pub fn radius_graph(cloud: &PointCloud, cutoff: f64) -> Result<GeometricGraph, GeometryError> {
    let pairs = radius_pairs(cloud.points(), cutoff)?;
    let points = cloud.points();
    let center = centroid(cloud);
    Ok(GeometricGraph {
        node_coords: points.to_vec(),
        node_attrs: points.iter().map(|p| (p - center).norm()).collect(),
        node_features: cloud.features().to_vec(),
        edges: pairs
            .into_iter()
            .map(|(i, j)| GraphEdge {
                i,
                j,
                length: (points[i] - points[j]).norm(),
                tau: 0.0,
            })
            .collect(),
        centroid: center,
    })
}

/// Index pairs `(i, j)`, `i < j`, with `|p_i - p_j| <= cutoff`, sorted.
pub fn radius_pairs(points: &[Vec3], cutoff: f64) -> Result<Vec<(usize, usize)>, GeometryError> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(GeometryError::InvalidParameter("cutoff must be positive and finite"));
    }
    let cell = |p: &Vec3| {
        (
            (p.x / cutoff).floor() as i64,
            (p.y / cutoff).floor() as i64,
            (p.z / cutoff).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (k, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(k);
    }
    let mut pairs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && (points[j] - p).norm() <= cutoff {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}
