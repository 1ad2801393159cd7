use super::{mean, Mat3, PointCloud, Vec3};

/// Least-squares orthogonal alignment of one point set onto another.
#[derive(Debug, Clone, Copy)]
pub struct Superposition {
    pub rotation: Mat3,
    pub translation: Vec3,
    pub rmsd: f64,
    pub max_deviation: f64,
}

/// Kabsch superposition mapping `mobile[i]` onto `target[i]`. With
/// `allow_reflection` the optimal orthogonal matrix is returned even when its
/// determinant is -1.
pub fn kabsch(mobile: &[Vec3], target: &[Vec3], allow_reflection: bool) -> Superposition {
    assert_eq!(mobile.len(), target.len());
    assert!(!mobile.is_empty());
    let cm = mean(mobile);
    let ct = mean(target);
    let h = mobile
        .iter()
        .zip(target)
        .fold(Mat3::zeros(), |acc, (a, b)| acc + (a - cm) * (b - ct).transpose());
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut rotation = v_t.transpose() * u.transpose();
    if !allow_reflection && rotation.determinant() < 0.0 {
        let mut fix = Mat3::identity();
        fix[(2, 2)] = -1.0;
        rotation = v_t.transpose() * fix * u.transpose();
    }
    let translation = ct - rotation * cm;
    let mut sq = 0.0;
    let mut max_deviation: f64 = 0.0;
    for (a, b) in mobile.iter().zip(target) {
        let d = (rotation * a + translation - b).norm();
        sq += d * d;
        max_deviation = max_deviation.max(d);
    }
    Superposition {
        rotation,
        translation,
        rmsd: (sq / mobile.len() as f64).sqrt(),
        max_deviation,
    }
}

/// Whether some bijection plus isometry (rotation, reflection, translation)
/// maps `a` onto `b` with every point within `tol` and features preserved.
///
/// Sorted pairwise-distance multisets are compared first. Small clouds
/// (n <= 8) are then settled by enumerating every feature-preserving
/// permutation; larger ones by a backtracking search that only extends
/// partial matches whose distances agree, each complete match being verified
/// by a reflection-permitting Kabsch fit.
pub fn congruent(a: &PointCloud, b: &PointCloud, tol: f64) -> bool {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = a.len();
    if n != b.len() {
        return false;
    }
    let mut fa = a.features().to_vec();
    let mut fb = b.features().to_vec();
    fa.sort_unstable();
    fb.sort_unstable();
    if fa != fb {
        return false;
    }
    if n == 1 {
        return true;
    }
    let da = distance_matrix(a.points());
    let db = distance_matrix(b.points());
    let mut sa: Vec<f64> = upper(&da);
    let mut sb: Vec<f64> = upper(&db);
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    // a rigid match within tol moves each distance by at most 2 tol
    if sa.iter().zip(&sb).any(|(x, y)| (x - y).abs() > 2.0 * tol) {
        return false;
    }

    let mut search = Search {
        a,
        b,
        da: &da,
        db: &db,
        tol,
        prune: n > 8,
        assignment: Vec::with_capacity(n),
        used: vec![false; n],
    };
    search.extend()
}

fn distance_matrix(points: &[Vec3]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|p| points.iter().map(|q| (p - q).norm()).collect())
        .collect()
}

fn upper(m: &[Vec<f64>]) -> Vec<f64> {
    m.iter()
        .enumerate()
        .flat_map(|(i, row)| row[i + 1..].iter().copied())
        .collect()
}

struct Search<'a> {
    a: &'a PointCloud,
    b: &'a PointCloud,
    da: &'a [Vec<f64>],
    db: &'a [Vec<f64>],
    tol: f64,
    prune: bool,
    assignment: Vec<usize>,
    used: Vec<bool>,
}

impl Search<'_> {
    fn extend(&mut self) -> bool {
        let k = self.assignment.len();
        let n = self.a.len();
        if k == n {
            let target: Vec<Vec3> = self.assignment.iter().map(|&j| self.b.points()[j]).collect();
            let fit = kabsch(self.a.points(), &target, true);
            return fit.max_deviation <= self.tol;
        }
        for cand in 0..n {
            if self.used[cand] || self.a.features()[k] != self.b.features()[cand] {
                continue;
            }
            if self.prune
                && self
                    .assignment
                    .iter()
                    .enumerate()
                    .any(|(i, &j)| (self.da[k][i] - self.db[cand][j]).abs() > 2.0 * self.tol)
            {
                continue;
            }
            self.used[cand] = true;
            self.assignment.push(cand);
            if self.extend() {
                return true;
            }
            self.assignment.pop();
            self.used[cand] = false;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_rigid, RigidMotion};
    use proptest::prelude::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
        let pts = (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0)
            .collect();
        let feats = (0..n).map(|_| rng.random_range(0..3)).collect();
        PointCloud::new(pts, feats).unwrap()
    }

    fn shuffled_copy(rng: &mut ChaCha8Rng, c: &PointCloud) -> PointCloud {
        let moved = apply_rigid(&RigidMotion::random(rng, 100.0), c);
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.shuffle(rng);
        PointCloud::new(
            idx.iter().map(|&i| moved.points()[i]).collect(),
            idx.iter().map(|&i| moved.features()[i]).collect(),
        )
        .unwrap()
    }

    #[test]
    fn examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [5, 12] {
            let c = random_cloud(&mut rng, n);
            assert!(congruent(&c, &c, 1e-6));
            let copy = shuffled_copy(&mut rng, &c);
            assert!(congruent(&c, &copy, 1e-6));
            let scaled = PointCloud::new(c.points().iter().map(|p| p * 2.0).collect(), c.features().to_vec()).unwrap();
            assert!(!congruent(&c, &scaled, 1e-6));
        }
    }

    #[test]
    fn feature_mismatch_is_not_congruent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_cloud(&mut rng, 6);
        let mut feats = c.features().to_vec();
        feats[0] += 10;
        let other = PointCloud::new(c.points().to_vec(), feats).unwrap();
        assert!(!congruent(&c, &other, 1e-6));
    }

    #[test]
    fn mirror_image_is_congruent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_cloud(&mut rng, 10);
        let mirror = PointCloud::new(
            c.points().iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect(),
            c.features().to_vec(),
        )
        .unwrap();
        assert!(congruent(&c, &mirror, 1e-6));
    }

    #[test]
    fn kabsch_recovers_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_cloud(&mut rng, 9);
        let m = RigidMotion::random(&mut rng, 10.0);
        let moved = apply_rigid(&m, &c);
        let fit = kabsch(c.points(), moved.points(), true);
        assert!((fit.rotation - m.rotation()).amax() < 1e-9);
        assert!(fit.rmsd < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn reflexive_symmetric_order_invariant(seed in any::<u64>(), n in 2usize..14) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_cloud(&mut rng, n);
            let b = random_cloud(&mut rng, n);
            let a2 = shuffled_copy(&mut rng, &a);
            prop_assert!(congruent(&a, &a, 1e-6));
            prop_assert_eq!(congruent(&a, &b, 1e-6), congruent(&b, &a, 1e-6));
            prop_assert_eq!(congruent(&a2, &b, 1e-6), congruent(&a, &b, 1e-6));
            prop_assert!(congruent(&a2, &a, 1e-6));
        }
    }
}
