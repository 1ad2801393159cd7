//! QuickHull over points on the unit sphere, reduced to its edge set.
//!
//! Every input point is a hull vertex in exact arithmetic (points on a sphere
//! are in convex position), so the output is a triangulation of the sphere
//! with `3n - 6` edges for `n >= 4` non-coplanar inputs. Points that the
//! tolerance places on an existing face (near-cocircular quadruples) are
//! inserted by splitting that face, which keeps every point connected and the
//! edge count unchanged.

use std::collections::{BTreeSet, HashMap};

use super::{find_close_pair, GeometryError, Vec3, COINCIDENCE_TOL};

/// Tolerance on point-plane signed distances.
const PLANE_EPS: f64 = 1e-9;

#[derive(Debug)]
struct Face {
    verts: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], verts: [usize; 3]) -> Self {
        let [a, b, c] = verts.map(|i| points[i]);
        let normal = (b - a).cross(&(c - a));
        let norm = normal.norm();
        let normal = if norm > 0.0 { normal / norm } else { normal };
        Face {
            verts,
            offset: normal.dot(&a),
            normal,
            outside: Vec::new(),
            alive: true,
        }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    fn directed_edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.verts;
        [(a, b), (b, c), (c, a)]
    }
}

/// Undirected edges `(i, j)` with `i < j` of the convex hull of `points`,
/// sorted ascending.
///
/// `n = 1` yields no edges and `n = 2` the single edge `(0, 1)`. When all
/// points are coplanar the hull is computed in their common plane: the
/// boundary cycle, plus a fan from the lexicographically smallest interior
/// point (if any) to the boundary, with remaining interior points joined to
/// that hub.
pub fn convex_hull_sphere(points: &[Vec3]) -> Result<Vec<(usize, usize)>, GeometryError> {
    match points.len() {
        0 => return Err(GeometryError::EmptyCloud),
        1 => return Ok(Vec::new()),
        2 => {
            if (points[0] - points[1]).norm() <= COINCIDENCE_TOL {
                return Err(GeometryError::DuplicateDirection(0, 1));
            }
            return Ok(vec![(0, 1)]);
        }
        _ => {}
    }
    if let Some((a, b)) = find_close_pair(points, COINCIDENCE_TOL) {
        return Err(GeometryError::DuplicateDirection(a, b));
    }

    let i0 = (0..points.len())
        .min_by(|&a, &b| lex_cmp(&points[a], &points[b]).then(a.cmp(&b)))
        .unwrap();
    let i1 = argmax(points.len(), |i| (points[i] - points[i0]).norm());
    let axis = (points[i1] - points[i0]).normalize();
    let i2 = argmax(points.len(), |i| {
        let d = points[i] - points[i0];
        (d - axis * axis.dot(&d)).norm()
    });
    let d2 = {
        let d = points[i2] - points[i0];
        (d - axis * axis.dot(&d)).norm()
    };
    if d2 <= PLANE_EPS {
        return Err(GeometryError::DegenerateConfiguration("collinear points"));
    }
    let normal = (points[i1] - points[i0]).cross(&(points[i2] - points[i0])).normalize();
    let i3 = argmax(points.len(), |i| normal.dot(&(points[i] - points[i0])).abs());
    if normal.dot(&(points[i3] - points[i0])).abs() <= PLANE_EPS {
        return Ok(planar_hull(points, i0, i1, normal));
    }

    let mut hull = Hull::new(points, [i0, i1, i2, i3]);
    hull.run();
    Ok(hull.edges())
}

fn lex_cmp(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Lowest index attaining the maximum of `f`.
fn argmax(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f(0);
    for i in 1..n {
        let v = f(i);
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

struct Hull<'a> {
    points: &'a [Vec3],
    faces: Vec<Face>,
    edge_owner: HashMap<(usize, usize), usize>,
    leftover: Vec<usize>,
}

impl<'a> Hull<'a> {
    fn new(points: &'a [Vec3], simplex: [usize; 4]) -> Self {
        let mut hull = Hull {
            points,
            faces: Vec::new(),
            edge_owner: HashMap::new(),
            leftover: Vec::new(),
        };
        let inner = simplex.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i]) / 4.0;
        let [a, b, c, d] = simplex;
        for tri in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
            let mut face = Face::new(points, tri);
            if face.distance(&inner) > 0.0 {
                face = Face::new(points, [tri[0], tri[2], tri[1]]);
            }
            hull.push_face(face);
        }
        let rest: Vec<usize> = (0..points.len()).filter(|i| !simplex.contains(i)).collect();
        let first_new = 0;
        hull.assign(&rest, first_new);
        hull
    }

    fn push_face(&mut self, face: Face) -> usize {
        let id = self.faces.len();
        for e in face.directed_edges() {
            self.edge_owner.insert(e, id);
        }
        self.faces.push(face);
        id
    }

    fn kill_face(&mut self, id: usize) {
        self.faces[id].alive = false;
        for e in self.faces[id].directed_edges() {
            if self.edge_owner.get(&e) == Some(&id) {
                self.edge_owner.remove(&e);
            }
        }
    }

    /// Hands each point to the face (among `faces[first..]`) it lies
    /// farthest outside of; points outside none are parked as leftovers.
    fn assign(&mut self, pts: &[usize], first: usize) {
        for &p in pts {
            let mut best: Option<(usize, f64)> = None;
            for (id, face) in self.faces.iter().enumerate().skip(first) {
                if !face.alive {
                    continue;
                }
                let d = face.distance(&self.points[p]);
                if d > PLANE_EPS && best.is_none_or(|(_, bd)| d > bd) {
                    best = Some((id, d));
                }
            }
            match best {
                Some((id, _)) => self.faces[id].outside.push(p),
                None => self.leftover.push(p),
            }
        }
    }

    fn run(&mut self) {
        // New faces are only ever appended, and points are only handed to new
        // faces, so a single forward cursor visits every face with work.
        let mut cursor = 0;
        while cursor < self.faces.len() {
            if !self.faces[cursor].alive || self.faces[cursor].outside.is_empty() {
                cursor += 1;
                continue;
            }
            self.expand(cursor);
        }
        let mut leftover = std::mem::take(&mut self.leftover);
        leftover.sort_unstable();
        for p in leftover {
            self.split_nearest_face(p);
        }
    }

    fn expand(&mut self, start: usize) {
        let eye = {
            let face = &self.faces[start];
            let mut best = face.outside[0];
            let mut best_d = face.distance(&self.points[best]);
            for &p in &face.outside[1..] {
                let d = face.distance(&self.points[p]);
                if d > best_d || (d == best_d && p < best) {
                    best = p;
                    best_d = d;
                }
            }
            best
        };
        let eye_pt = self.points[eye];

        let mut visible = vec![start];
        let mut is_visible: HashMap<usize, bool> = HashMap::from([(start, true)]);
        let mut horizon = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let f = visible[k];
            k += 1;
            for (a, b) in self.faces[f].directed_edges() {
                let nb = self.edge_owner[&(b, a)];
                let vis = *is_visible
                    .entry(nb)
                    .or_insert_with(|| self.faces[nb].distance(&eye_pt) > PLANE_EPS);
                if vis {
                    if !visible.contains(&nb) {
                        visible.push(nb);
                    }
                } else {
                    horizon.push((a, b));
                }
            }
        }

        let mut orphans = Vec::new();
        for &f in &visible {
            orphans.extend(self.faces[f].outside.drain(..).filter(|&p| p != eye));
        }
        for &f in &visible {
            self.kill_face(f);
        }
        let first_new = self.faces.len();
        for (a, b) in horizon {
            let face = Face::new(self.points, [a, b, eye]);
            self.push_face(face);
        }
        self.assign(&orphans, first_new);
    }

    fn split_nearest_face(&mut self, p: usize) {
        let pt = self.points[p];
        let target = self
            .faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive)
            .max_by(|(ia, a), (ib, b)| {
                a.distance(&pt)
                    .total_cmp(&b.distance(&pt))
                    .then(ib.cmp(ia))
            })
            .map(|(id, _)| id)
            .expect("hull has faces");
        let [a, b, c] = self.faces[target].verts;
        self.kill_face(target);
        for tri in [[a, b, p], [b, c, p], [c, a, p]] {
            let face = Face::new(self.points, tri);
            self.push_face(face);
        }
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for face in self.faces.iter().filter(|f| f.alive) {
            for (a, b) in face.directed_edges() {
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    }
}

fn planar_hull(points: &[Vec3], i0: usize, i1: usize, normal: Vec3) -> Vec<(usize, usize)> {
    let origin = points[i0];
    let u = (points[i1] - origin).normalize();
    let v = normal.cross(&u);
    let flat: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            let d = p - origin;
            (u.dot(&d), v.dot(&d))
        })
        .collect();

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        flat[a]
            .0
            .total_cmp(&flat[b].0)
            .then(flat[a].1.total_cmp(&flat[b].1))
            .then(a.cmp(&b))
    });
    let cross = |o: usize, a: usize, b: usize| {
        (flat[a].0 - flat[o].0) * (flat[b].1 - flat[o].1)
            - (flat[a].1 - flat[o].1) * (flat[b].0 - flat[o].0)
    };
    // Andrew's monotone chain keeping only strict left turns.
    let mut ring: Vec<usize> = Vec::with_capacity(2 * order.len());
    for pass in 0..2 {
        let start = ring.len();
        let seq: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(order.iter())
        } else {
            Box::new(order.iter().rev())
        };
        for &p in seq {
            while ring.len() >= start + 2 && cross(ring[ring.len() - 2], ring[ring.len() - 1], p) <= PLANE_EPS {
                ring.pop();
            }
            ring.push(p);
        }
        ring.pop();
    }

    let mut edges = BTreeSet::new();
    for k in 0..ring.len() {
        let (a, b) = (ring[k], ring[(k + 1) % ring.len()]);
        edges.insert((a.min(b), a.max(b)));
    }
    let on_ring: BTreeSet<usize> = ring.iter().copied().collect();
    let interior: Vec<usize> = (0..points.len()).filter(|i| !on_ring.contains(i)).collect();
    if let Some(&hub) = interior
        .iter()
        .min_by(|&&a, &&b| lex_cmp(&points[a], &points[b]).then(a.cmp(&b)))
    {
        for &r in &ring {
            edges.insert((hub.min(r), hub.max(r)));
        }
        for &p in &interior {
            if p != hub {
                edges.insert((hub.min(p), hub.max(p)));
            }
        }
    }
    edges.into_iter().collect()
}
