//! Synthetic backbones: ideal secondary-structure elements built from
//! internal coordinates, simple CA-trace backbones, small compact folds and
//! random generic chains. Used by the test suites and the benchmark fixtures.

use rand::Rng;

use crate::geometry::{frame_of_points, Mat3, Vec3};
use crate::pdbio::{ProteinChain, Residue};

// Engh & Huber backbone geometry.
const N_CA: f64 = 1.458;
const CA_C: f64 = 1.525;
const C_N: f64 = 1.329;
const C_O: f64 = 1.231;
const ANGLE_N_CA_C: f64 = 111.2;
const ANGLE_CA_C_N: f64 = 116.2;
const ANGLE_C_N_CA: f64 = 121.7;
const ANGLE_CA_C_O: f64 = 120.5;

/// Alpha-helix backbone dihedrals (degrees).
pub const ALPHA_PHI_PSI: (f64, f64) = (-57.8, -47.0);
/// Antiparallel beta-strand backbone dihedrals (degrees).
pub const BETA_PHI_PSI: (f64, f64) = (-139.0, 135.0);

const AMINO_ACIDS: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET", "PHE",
    "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

/// Places atom `d` such that |cd| = `length`, angle(b, c, d) = `angle` and
/// dihedral(a, b, c, d) = `torsion` (degrees).
pub fn place_atom(a: &Vec3, b: &Vec3, c: &Vec3, length: f64, angle: f64, torsion: f64) -> Vec3 {
    let (angle, torsion) = (angle.to_radians(), torsion.to_radians());
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let d2 = Vec3::new(
        -length * angle.cos(),
        length * angle.sin() * torsion.cos(),
        length * angle.sin() * torsion.sin(),
    );
    c + bc * d2.x + m * d2.y + n * d2.z
}

fn residue(aa: &str, n: Vec3, ca: Vec3, c: Vec3, o: Vec3) -> Residue {
    Residue {
        seq_index: 0,
        chain_id: 'A',
        aa_type: aa.to_string(),
        res_seq: 0,
        icode: ' ',
        n,
        ca,
        c,
        o,
        h: None,
    }
}

fn finish(id: &str, mut residues: Vec<Residue>) -> ProteinChain {
    for (k, r) in residues.iter_mut().enumerate() {
        r.res_seq = k as i32 + 1;
    }
    ProteinChain::new(id, 'A', residues)
}

/// Backbone from per-residue (phi, psi) dihedrals with trans peptides.
pub fn backbone_from_dihedrals(dihedrals: &[(f64, f64)], names: &[&str], id: &str) -> ProteinChain {
    assert_eq!(dihedrals.len(), names.len());
    let count = dihedrals.len();
    let mut n = Vec3::zeros();
    let mut ca = Vec3::new(N_CA, 0.0, 0.0);
    let theta = (180.0 - ANGLE_N_CA_C).to_radians();
    let mut c = ca + Vec3::new(CA_C * theta.cos(), CA_C * theta.sin(), 0.0);
    let mut atoms = Vec::with_capacity(count);
    for k in 0..count {
        let psi = dihedrals[k].1;
        let next_n = place_atom(&n, &ca, &c, C_N, ANGLE_CA_C_N, psi);
        let o = place_atom(&next_n, &ca, &c, C_O, ANGLE_CA_C_O, 180.0);
        atoms.push((n, ca, c, o));
        if k + 1 < count {
            let next_ca = place_atom(&ca, &c, &next_n, N_CA, ANGLE_C_N_CA, 180.0);
            let next_c = place_atom(&c, &next_n, &next_ca, CA_C, ANGLE_N_CA_C, dihedrals[k + 1].0);
            n = next_n;
            ca = next_ca;
            c = next_c;
        }
    }
    let residues = atoms
        .into_iter()
        .zip(names)
        .map(|((n, ca, c, o), aa)| residue(aa, n, ca, c, o))
        .collect();
    finish(id, residues)
}

/// Ideal alpha helix of `len` alanines.
pub fn ideal_helix(len: usize) -> ProteinChain {
    backbone_from_dihedrals(&vec![ALPHA_PHI_PSI; len], &vec!["ALA"; len], "ideal-helix")
}

/// Straight extended strand of `len` residues with its axis along +x and
/// the carbonyls of even residues pointing along +y.
pub fn ideal_strand(len: usize) -> ProteinChain {
    let raw = backbone_from_dihedrals(&vec![BETA_PHI_PSI; len], &vec!["VAL"; len], "strand");
    let res = raw.residues();
    let x = (res[len - 1].ca - res[0].ca).normalize();
    let mut pleat = Vec3::zeros();
    for (k, r) in res.iter().enumerate() {
        let co = r.o - r.c;
        pleat += if k % 2 == 0 { co } else { -co };
    }
    let y = (pleat - x * x.dot(&pleat)).normalize();
    let z = x.cross(&y);
    let basis = Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let origin = crate::geometry::mean(&raw.ca_coords());
    raw.map_atoms(|p| basis * (p - origin))
}

/// Backbone around a CA trace: N and C sit 1.2 Å from CA along the chain,
/// O is 1.23 Å off C perpendicular to the chain direction.
pub fn trace_backbone(cas: &[Vec3], id: &str) -> ProteinChain {
    let names = vec!["ALA"; cas.len()];
    trace_backbone_named(cas, &names, id)
}

pub fn trace_backbone_named(cas: &[Vec3], names: &[&str], id: &str) -> ProteinChain {
    let len = cas.len();
    let dir = |a: usize, b: usize| (cas[b] - cas[a]).normalize();
    let residues = (0..len)
        .map(|i| {
            let (incoming, outgoing) = match len {
                1 => (Vec3::x(), Vec3::x()),
                _ if i == 0 => (dir(0, 1), dir(0, 1)),
                _ if i == len - 1 => (dir(i - 1, i), dir(i - 1, i)),
                _ => (dir(i - 1, i), dir(i, i + 1)),
            };
            let ca = cas[i];
            let n = ca - incoming * 1.2;
            let c = ca + outgoing * 1.2;
            let o = c + perpendicular(&outgoing) * C_O;
            residue(names[i], n, ca, c, o)
        })
        .collect();
    finish(id, residues)
}

fn perpendicular(v: &Vec3) -> Vec3 {
    let reference = if v.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
    (reference - v * v.dot(&reference)).normalize()
}

/// Nine-residue trace along +x that turns 90° towards +y at residue 4.
pub fn kinked_trace() -> ProteinChain {
    let mut cas = Vec::new();
    for k in 0..=4 {
        cas.push(Vec3::new(3.8 * k as f64, 0.0, 0.0));
    }
    for k in 1..=4 {
        cas.push(Vec3::new(15.2, 3.8 * k as f64, 0.0));
    }
    trace_backbone(&cas, "kinked")
}

/// Two antiparallel strands of `strand_len` (odd) residues joined by a
/// two-residue loop. Strand two is the image of strand one under a two-fold
/// rotation about an axis normal to the sheet, `spacing` Å away, so residue
/// `i` of the first strand faces residue `2 * strand_len + 1 - i`.
pub fn beta_hairpin(strand_len: usize, spacing: f64) -> ProteinChain {
    assert!(strand_len % 2 == 1, "strand length must be odd");
    let strand = ideal_strand(strand_len);
    let center = strand_len / 2;
    // the central residue's carbonyl must face the partner strand
    let flip = if center.is_multiple_of(2) { 1.0 } else { -1.0 };
    let first = strand.map_atoms(|p| Vec3::new(p.x, flip * p.y, flip * p.z));
    let x0 = first.residues()[center].ca.x;
    let second = first.map_atoms(|p| Vec3::new(2.0 * x0 - p.x, spacing - p.y, p.z));

    let a = first.residues()[strand_len - 1].ca;
    let b = second.residues()[0].ca;
    let bulge = Vec3::new(3.0, 0.0, 0.0);
    let loop_cas = [a + (b - a) / 3.0 + bulge, a + (b - a) * 2.0 / 3.0 + bulge];
    let mut trace = vec![a];
    trace.extend(loop_cas);
    trace.push(b);
    let loop_res = trace_backbone(&trace, "loop");

    let mut residues: Vec<Residue> = first.residues().to_vec();
    residues.extend(loop_res.residues()[1..3].iter().cloned().map(|mut r| {
        r.aa_type = "GLY".into();
        r
    }));
    residues.extend(second.residues().iter().cloned());
    finish("beta-hairpin", residues)
}

/// Four antiparallel helices of `helix_len` residues on the corners of a
/// 10 Å square, joined by three-residue loops.
pub fn helix_bundle(helix_len: usize) -> ProteinChain {
    let helix = ideal_helix(helix_len);
    let frame = frame_of_points(&helix.ca_coords());
    // principal axis of a long helix is its helical axis
    let axis = frame.rotation().column(0).into_owned();
    let axis = if axis.dot(&(helix.residues()[helix_len - 1].ca - helix.residues()[0].ca)) < 0.0 {
        -axis
    } else {
        axis
    };
    let up = nalgebra::Rotation3::rotation_between(&axis, &Vec3::z()).expect("non-antipodal");
    let center = *frame.center();
    let corners = [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(10.0, 0.0, 0.0),
        Vec3::new(10.0, 10.0, 0.0),
        Vec3::new(0.0, 10.0, 0.0),
    ];
    let mut helices = Vec::new();
    for (k, corner) in corners.iter().enumerate() {
        let spin = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), 0.7 * k as f64);
        let flip = if k % 2 == 1 {
            nalgebra::Rotation3::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
        } else {
            nalgebra::Rotation3::identity()
        };
        helices.push(helix.map_atoms(|p| flip * spin * (up * (p - center)) + corner));
    }
    join_with_loops("helix-bundle", &helices, 3, 4.0)
}

/// Five-stranded antiparallel meander.
pub fn beta_meander(strand_len: usize, spacing: f64) -> ProteinChain {
    assert!(strand_len % 2 == 1);
    let strand = ideal_strand(strand_len);
    let center = strand_len / 2;
    let flip = if center.is_multiple_of(2) { 1.0 } else { -1.0 };
    let base = strand.map_atoms(|p| Vec3::new(p.x, flip * p.y, flip * p.z));
    let x0 = base.residues()[center].ca.x;
    let strands: Vec<ProteinChain> = (0..5)
        .map(|k| {
            let shift = spacing * (k / 2 * 2) as f64;
            if k % 2 == 0 {
                base.map_atoms(|p| Vec3::new(p.x, p.y + shift, p.z))
            } else {
                base.map_atoms(|p| Vec3::new(2.0 * x0 - p.x, spacing - p.y + shift, p.z))
            }
        })
        .collect();
    join_with_loops("beta-meander", &strands, 2, 3.0)
}

/// Concatenates pieces, inserting `loop_len` trace-built glycines between
/// consecutive pieces on a path that bulges `bulge` Å away from both ends.
fn join_with_loops(id: &str, pieces: &[ProteinChain], loop_len: usize, bulge: f64) -> ProteinChain {
    let mut residues: Vec<Residue> = Vec::new();
    for (k, piece) in pieces.iter().enumerate() {
        if k > 0 {
            let prev = &pieces[k - 1].residues();
            let a = prev[prev.len() - 1].ca;
            let a_dir = (a - prev[prev.len() - 2].ca).normalize();
            let next = piece.residues();
            let b = next[0].ca;
            let b_dir = (next[0].ca - next[1].ca).normalize();
            let mut trace = vec![a];
            for s in 1..=loop_len {
                let t = s as f64 / (loop_len + 1) as f64;
                let lift = (std::f64::consts::PI * t).sin() * bulge;
                let push = a_dir * (1.0 - t) + b_dir * t;
                trace.push(a + (b - a) * t + push * lift);
            }
            trace.push(b);
            let loop_res = trace_backbone(&trace, "loop");
            residues.extend(loop_res.residues()[1..=loop_len].iter().cloned().map(|mut r| {
                r.aa_type = "GLY".into();
                r
            }));
        }
        residues.extend(piece.residues().iter().cloned());
    }
    finish(id, residues)
}

/// Random self-avoiding CA walk with 3.8 Å steps, kept inside a sphere of
/// `radius` Å, with a trace-built backbone and random residue names.
/// Protein-like packing needs about `(len * 140 Å³ / (4/3 π))^(1/3)` Å;
/// much less than that and no walk exists.
pub fn compact_globule<R: Rng + ?Sized>(rng: &mut R, len: usize, radius: f64) -> ProteinChain {
    let cas = random_walk(rng, len, Some(radius));
    let names: Vec<&str> = (0..len).map(|_| AMINO_ACIDS[rng.random_range(0..20)]).collect();
    trace_backbone_named(&cas, &names, "globule")
}

/// Random generic chain: unconstrained self-avoiding CA walk.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, len: usize) -> ProteinChain {
    let cas = random_walk(rng, len, None);
    let names: Vec<&str> = (0..len).map(|_| AMINO_ACIDS[rng.random_range(0..20)]).collect();
    trace_backbone_named(&cas, &names, "random")
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_walk<R: Rng + ?Sized>(rng: &mut R, len: usize, confine: Option<f64>) -> Vec<Vec3> {
    const STEP: f64 = 3.8;
    const MIN_DIST: f64 = 4.2;
    'restart: for _attempt in 0..10_000 {
        let mut cas = vec![Vec3::zeros()];
        while cas.len() < len {
            let last = cas[cas.len() - 1];
            let prev_dir = (cas.len() >= 2).then(|| (last - cas[cas.len() - 2]).normalize());
            let mut placed = false;
            for _ in 0..500 {
                let d = random_unit(rng);
                // keep virtual bond angles in a protein-like range
                if prev_dir.is_some_and(|p| p.dot(&d) < -0.2 || p.dot(&d) > 0.8) {
                    continue;
                }
                let cand = last + d * STEP;
                if confine.is_some_and(|r| cand.norm() > r) {
                    continue;
                }
                if cas[..cas.len() - 1].iter().all(|p| (p - cand).norm() >= MIN_DIST) {
                    cas.push(cand);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        return cas;
    }
    panic!("no self-avoiding walk of {len} steps found; confinement radius {confine:?} is too small");
}

/// Adds independent uniform noise of at most `amplitude` Å per coordinate to
/// every atom, making symmetric templates generic.
pub fn jiggle<R: Rng + ?Sized>(chain: &ProteinChain, rng: &mut R, amplitude: f64) -> ProteinChain {
    let residues = chain
        .residues()
        .iter()
        .map(|r| {
            let mut j = |p: Vec3| {
                p + Vec3::new(
                    rng.random_range(-amplitude..=amplitude),
                    rng.random_range(-amplitude..=amplitude),
                    rng.random_range(-amplitude..=amplitude),
                )
            };
            Residue {
                n: j(r.n),
                ca: j(r.ca),
                c: j(r.c),
                o: j(r.o),
                h: None,
                ..r.clone()
            }
        })
        .collect();
    ProteinChain::new(chain.source_id.clone(), chain.chain_id, residues)
}
