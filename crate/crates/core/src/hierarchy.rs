//! Two-level graph of a protein chain.
//!
//! Each secondary-structure segment gets a hull graph over its CA atoms (the
//! intra graphs). A second hull graph joins the segment centers (the inter
//! graph), its edges carrying the relative orientation `g_iᵀ g_j` of the
//! segment frames.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::dssp::{assign_tokens, segment, Segment, SsToken};
use crate::geometry::{frame_of_points, mean, Frame, GeometryError, Mat3, PointCloud, Vec3};
use crate::pdbio::ProteinChain;
use crate::schull::{build_schull_with, is_degeneracy, jittered, GeometricGraph, SchullOptions};

const AMINO_ACIDS: [&str; 20] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET",
    "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
];

/// Index of a three-letter residue name among the twenty standard amino
/// acids; anything else maps to 20.
pub fn aa_index(name: &str) -> u64 {
    AMINO_ACIDS
        .iter()
        .position(|a| a.eq_ignore_ascii_case(name.trim()))
        .unwrap_or(20) as u64
}

/// Feature code of a residue node.
pub fn residue_feature(aa: &str, token: SsToken) -> u64 {
    aa_index(aa) * 16 + token.code()
}

/// Feature code of a segment node.
pub fn unit_feature(token: SsToken, size: usize) -> u64 {
    size as u64 * 16 + token.code()
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntraGraph {
    pub segment: Segment,
    pub graph: GeometricGraph,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterEdgeFeature {
    pub rel_orientation: Mat3,
    pub length: f64,
    pub tau: f64,
}

/// Hull graph over segment centers. `rel_orientation[k]` belongs to
/// `graph.edges[k]` and equals `g_iᵀ g_j` for that edge's `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterGraph {
    pub graph: GeometricGraph,
    pub rel_orientation: Vec<Mat3>,
}

impl InterGraph {
    pub fn edge_feature(&self, k: usize) -> InterEdgeFeature {
        let e = &self.graph.edges[k];
        InterEdgeFeature {
            rel_orientation: self.rel_orientation[k],
            length: e.length,
            tau: e.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalGraph {
    pub source_id: String,
    pub chain_id: char,
    pub intra: Vec<IntraGraph>,
    pub inter: InterGraph,
    pub residue_count: usize,
    /// Whether any hull needed the jittered retry.
    pub jittered: bool,
}

impl HierarchicalGraph {
    pub fn segments(&self) -> Vec<Segment> {
        self.intra.iter().map(|g| g.segment).collect()
    }

    pub fn tokens(&self) -> Vec<SsToken> {
        self.intra
            .iter()
            .flat_map(|g| std::iter::repeat_n(g.segment.token, g.segment.len()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeAudit {
    pub residue_count: usize,
    pub units: usize,
    pub inter: usize,
    pub intra_sum: usize,
    pub bound_ok: bool,
}

impl EdgeAudit {
    pub fn total(&self) -> usize {
        self.inter + self.intra_sum
    }

    pub fn bound(&self) -> usize {
        3 * self.residue_count
    }
}

pub fn total_edges(h: &HierarchicalGraph) -> EdgeAudit {
    let inter = h.inter.graph.edge_count();
    let intra_sum = h.intra.iter().map(|g| g.graph.edge_count()).sum();
    EdgeAudit {
        residue_count: h.residue_count,
        units: h.intra.len(),
        inter,
        intra_sum,
        bound_ok: inter + intra_sum < 3 * h.residue_count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Tokens,
    Intra,
    Inter,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Tokens => "tokens",
            Stage::Intra => "intra",
            Stage::Inter => "inter",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HierarchyError {
    #[error("tokens stage: {got} tokens for {expected} residues")]
    TokenCount { expected: usize, got: usize },
    #[error("tokens stage: segments do not tile 0..{0}")]
    BadSegments(usize),
    #[error("{stage} stage{}: {source}", .segment.map(|s| format!(", segment {s}")).unwrap_or_default())]
    Geometry {
        stage: Stage,
        segment: Option<usize>,
        source: GeometryError,
    },
}

impl HierarchyError {
    pub fn is_degeneracy(&self) -> bool {
        match self {
            HierarchyError::Geometry { source, .. } => {
                is_degeneracy(source) || matches!(source, GeometryError::CoincidentPoints(..))
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    pub jitter: bool,
}

/// Hull graph over `points`, jittering coincident or otherwise degenerate
/// input when allowed.
fn hull_graph(
    points: Vec<Vec3>,
    features: Vec<u64>,
    options: BuildOptions,
) -> Result<(GeometricGraph, bool), GeometryError> {
    let schull = SchullOptions { jitter: options.jitter };
    match PointCloud::new(points.clone(), features.clone()) {
        Ok(cloud) => build_schull_with(&cloud, schull),
        Err(GeometryError::CoincidentPoints(..)) if options.jitter => {
            let cloud = PointCloud::new(jittered(&points), features)?;
            build_schull_with(&cloud, schull).map(|(g, _)| (g, true))
        }
        Err(e) => Err(e),
    }
}

fn intra_one(
    chain: &ProteinChain,
    tokens: &[SsToken],
    seg: Segment,
    index: usize,
    options: BuildOptions,
) -> Result<(IntraGraph, bool), HierarchyError> {
    let residues = &chain.residues()[seg.range()];
    let points: Vec<Vec3> = residues.iter().map(|r| r.ca).collect();
    let features = residues
        .iter()
        .zip(&tokens[seg.range()])
        .map(|(r, &t)| residue_feature(&r.aa_type, t))
        .collect();
    let (graph, jit) = hull_graph(points, features, options).map_err(|source| HierarchyError::Geometry {
        stage: Stage::Intra,
        segment: Some(index),
        source,
    })?;
    // after any jitter, so the frame sees the same coordinates as the graph
    let frame = frame_of_points(&graph.node_coords);
    Ok((IntraGraph { segment: seg, graph, frame }, jit))
}

fn check_tiling(segments: &[Segment], n: usize) -> Result<(), HierarchyError> {
    let mut next = 0;
    for s in segments {
        if s.start != next || s.end < s.start {
            return Err(HierarchyError::BadSegments(n));
        }
        next = s.end + 1;
    }
    if next != n {
        return Err(HierarchyError::BadSegments(n));
    }
    Ok(())
}

/// One intra graph per segment, built in parallel and kept in segment order.
pub fn build_intra(
    chain: &ProteinChain,
    tokens: &[SsToken],
    segments: &[Segment],
    options: BuildOptions,
) -> Result<Vec<IntraGraph>, HierarchyError> {
    build_intra_flagged(chain, tokens, segments, options).map(|(v, _)| v)
}

fn build_intra_flagged(
    chain: &ProteinChain,
    tokens: &[SsToken],
    segments: &[Segment],
    options: BuildOptions,
) -> Result<(Vec<IntraGraph>, bool), HierarchyError> {
    if tokens.len() != chain.len() {
        return Err(HierarchyError::TokenCount {
            expected: chain.len(),
            got: tokens.len(),
        });
    }
    check_tiling(segments, chain.len())?;
    let built: Vec<(IntraGraph, bool)> = segments
        .par_iter()
        .enumerate()
        .map(|(k, &seg)| intra_one(chain, tokens, seg, k, options))
        .collect::<Result<_, _>>()?;
    let jit = built.iter().any(|(_, j)| *j);
    Ok((built.into_iter().map(|(g, _)| g).collect(), jit))
}

/// Hull graph over segment centers with frame products on the edges.
pub fn build_inter(intra: &[IntraGraph], options: BuildOptions) -> Result<(InterGraph, bool), HierarchyError> {
    let err = |source| HierarchyError::Geometry {
        stage: Stage::Inter,
        segment: None,
        source,
    };
    if intra.is_empty() {
        return Err(err(GeometryError::EmptyCloud));
    }
    let centers: Vec<Vec3> = intra.iter().map(|g| *g.frame.center()).collect();
    let features = intra
        .iter()
        .map(|g| unit_feature(g.segment.token, g.segment.len()))
        .collect();
    let (graph, jit) = hull_graph(centers, features, options).map_err(err)?;
    let rel_orientation = graph
        .edges
        .iter()
        .map(|e| intra[e.i].frame.relative_to(&intra[e.j].frame))
        .collect();
    Ok((InterGraph { graph, rel_orientation }, jit))
}

pub fn build_hierarchy(chain: &ProteinChain) -> Result<HierarchicalGraph, HierarchyError> {
    build_hierarchy_with(chain, BuildOptions::default())
}

/// Full pipeline: tokens, segments, intra graphs, inter graph.
pub fn build_hierarchy_with(chain: &ProteinChain, options: BuildOptions) -> Result<HierarchicalGraph, HierarchyError> {
    let tokens = assign_tokens(chain);
    build_hierarchy_with_tokens(chain, &tokens, options)
}

/// Pipeline with externally supplied tokens.
pub fn build_hierarchy_with_tokens(
    chain: &ProteinChain,
    tokens: &[SsToken],
    options: BuildOptions,
) -> Result<HierarchicalGraph, HierarchyError> {
    let segments = segment(tokens);
    let (intra, jit_intra) = build_intra_flagged(chain, tokens, &segments, options)?;
    let (inter, jit_inter) = build_inter(&intra, options)?;
    Ok(HierarchicalGraph {
        source_id: chain.source_id.clone(),
        chain_id: chain.chain_id,
        intra,
        inter,
        residue_count: chain.len(),
        jittered: jit_intra || jit_inter,
    })
}

/// Checks the structural invariants of a built hierarchy, returning a
/// description of the first one violated.
pub fn check_invariants(h: &HierarchicalGraph) -> Result<(), String> {
    let audit = total_edges(h);
    if !audit.bound_ok {
        return Err(format!(
            "edge total {} not below 3N = {}",
            audit.total(),
            audit.bound()
        ));
    }
    if h.inter.graph.node_count() != h.intra.len() {
        return Err("inter node count differs from segment count".into());
    }
    if h.inter.rel_orientation.len() != h.inter.graph.edge_count() {
        return Err("orientation count differs from inter edge count".into());
    }
    for (k, g) in h.intra.iter().enumerate() {
        if g.graph.node_count() != g.segment.len() {
            return Err(format!("segment {k}: node count differs from segment length"));
        }
        let center = mean(&g.graph.node_coords);
        let tol = if h.jittered { 1e-6 } else { 1e-9 };
        if (center - h.inter.graph.node_coords[k]).norm() > tol {
            return Err(format!("segment {k}: inter node is not the CA mean"));
        }
        if g.graph.node_count() >= 2 && g.graph.components() != 1 {
            return Err(format!("segment {k}: intra graph is disconnected"));
        }
    }
    for (k, r) in h.inter.rel_orientation.iter().enumerate() {
        let dev = (r.transpose() * r - Mat3::identity()).amax();
        if dev > 1e-6 {
            return Err(format!("inter edge {k}: orientation not orthogonal ({dev:e})"));
        }
    }
    Ok(())
}

fn compare_graphs(a: &GeometricGraph, b: &GeometricGraph, tol: f64, what: &str) -> Result<(), String> {
    if a.node_features != b.node_features {
        return Err(format!("{what}: node features differ"));
    }
    if a.edges.len() != b.edges.len() {
        return Err(format!("{what}: {} vs {} edges", a.edges.len(), b.edges.len()));
    }
    for (k, (x, y)) in a.node_attrs.iter().zip(&b.node_attrs).enumerate() {
        if (x - y).abs() > tol {
            return Err(format!("{what}: node {k} attribute {x} vs {y}"));
        }
    }
    for (e, f) in a.edges.iter().zip(&b.edges) {
        if (e.i, e.j) != (f.i, f.j) {
            return Err(format!("{what}: edge ({}, {}) vs ({}, {})", e.i, e.j, f.i, f.j));
        }
        if (e.length - f.length).abs() > tol || (e.tau - f.tau).abs() > tol {
            return Err(format!("{what}: edge ({}, {}) attributes differ", e.i, e.j));
        }
    }
    Ok(())
}

/// Compares every invariant quantity of two hierarchies: segments, node and
/// edge attributes, and the relative orientations between determinate
/// frames. Coordinates and absolute frames are not compared.
pub fn compare_invariants(a: &HierarchicalGraph, b: &HierarchicalGraph, tol: f64) -> Result<(), String> {
    if a.segments() != b.segments() {
        return Err("segments differ".into());
    }
    for (k, (x, y)) in a.intra.iter().zip(&b.intra).enumerate() {
        compare_graphs(&x.graph, &y.graph, tol, &format!("segment {k}"))?;
        if x.frame.is_determinate() != y.frame.is_determinate() {
            return Err(format!("segment {k}: frame determinacy differs"));
        }
    }
    compare_graphs(&a.inter.graph, &b.inter.graph, tol, "inter")?;
    for (k, e) in a.inter.graph.edges.iter().enumerate() {
        if a.intra[e.i].frame.is_determinate() && a.intra[e.j].frame.is_determinate() {
            let dev = (a.inter.rel_orientation[k] - b.inter.rel_orientation[k]).amax();
            if dev > tol {
                return Err(format!("inter edge ({}, {}): orientation differs by {dev:e}", e.i, e.j));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dssp::tokens_from_str;
    use crate::geometry::RigidMotion;
    use crate::synth;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generic_chain(len: usize, seed: u64) -> ProteinChain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        synth::random_chain(&mut rng, len)
    }

    fn with_tokens(chain: &ProteinChain, s: &str) -> HierarchicalGraph {
        let tokens = tokens_from_str(s).unwrap();
        build_hierarchy_with_tokens(chain, &tokens, BuildOptions::default()).unwrap()
    }

    #[test]
    fn fourteen_residue_example() {
        let chain = generic_chain(14, 7);
        let h = with_tokens(&chain, "HHHHHEEEE--TTT");
        let sizes: Vec<usize> = h.intra.iter().map(|g| g.segment.len()).collect();
        assert_eq!(sizes, vec![5, 4, 2, 3]);
        let bounds = [9, 6, 1, 3];
        for (g, b) in h.intra.iter().zip(bounds) {
            assert!(g.graph.edge_count() <= b);
        }
        let audit = total_edges(&h);
        assert!(audit.inter <= 6);
        assert!(audit.total() <= 25);
        assert!(audit.bound_ok);
        check_invariants(&h).unwrap();
    }

    #[test]
    fn small_segments() {
        let chain = generic_chain(8, 3);
        let h = with_tokens(&chain, "H-EEEEET");
        assert_eq!(h.intra[0].graph.edge_count(), 0);
        assert_eq!(*h.intra[0].frame.center(), chain.residues()[0].ca);
        assert!(h.intra[2].graph.edge_count() <= 9);
        let h2 = with_tokens(&generic_chain(5, 4), "HH---");
        assert_eq!(h2.intra[0].graph.edge_count(), 1);
        assert_eq!(h2.inter.graph.edge_count(), 1);
        let expected = h2.intra[0].frame.relative_to(&h2.intra[1].frame);
        assert_eq!(h2.inter.rel_orientation[0], expected);
    }

    #[test]
    fn single_segment_totals() {
        for (n, intra) in [(3, 3), (2, 1)] {
            let h = with_tokens(&generic_chain(n, 11), &"-".repeat(n));
            let audit = total_edges(&h);
            assert_eq!((audit.intra_sum, audit.inter), (intra, 0));
            assert!(audit.bound_ok);
        }
        let h = with_tokens(&generic_chain(30, 12), &"E".repeat(30));
        assert_eq!(h.inter.graph.node_count(), 1);
        assert_eq!(h.inter.graph.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_tokens() {
        let chain = generic_chain(6, 1);
        let tokens = tokens_from_str("HHH").unwrap();
        assert!(matches!(
            build_hierarchy_with_tokens(&chain, &tokens, BuildOptions::default()),
            Err(HierarchyError::TokenCount { expected: 6, got: 3 })
        ));
    }

    #[test]
    fn collinear_segment_reports_stage_and_index() {
        let cas: Vec<Vec3> = (0..9).map(|k| Vec3::new(3.8 * k as f64, 0.0, 0.0)).collect();
        let chain = synth::trace_backbone(&cas, "line");
        let tokens = vec![SsToken::None; 9];
        let err = build_hierarchy_with_tokens(&chain, &tokens, BuildOptions::default()).unwrap_err();
        assert!(err.is_degeneracy());
        assert!(matches!(err, HierarchyError::Geometry { stage: Stage::Intra, segment: Some(0), .. }));
        assert!(err.to_string().starts_with("intra stage, segment 0"));
        let h = build_hierarchy_with_tokens(&chain, &tokens, BuildOptions { jitter: true }).unwrap();
        assert!(h.jittered);
        check_invariants(&h).unwrap();
    }

    #[test]
    fn rel_orientation_survives_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chain = synth::jiggle(&synth::helix_bundle(16), &mut rng, 0.02);
        let h = build_hierarchy(&chain).unwrap();
        check_invariants(&h).unwrap();
        for _ in 0..10 {
            let m = RigidMotion::random(&mut rng, 100.0);
            let moved = chain.map_atoms(|p| m.apply(p));
            let tokens = h.tokens();
            let h2 = build_hierarchy_with_tokens(&moved, &tokens, BuildOptions::default()).unwrap();
            assert_eq!(h.inter.graph.edges.len(), h2.inter.graph.edges.len());
            for (k, (a, b)) in h.inter.graph.edges.iter().zip(&h2.inter.graph.edges).enumerate() {
                assert_eq!((a.i, a.j), (b.i, b.j));
                assert!((a.length - b.length).abs() < 1e-6);
                let both = h.intra[a.i].frame.is_determinate() && h.intra[a.j].frame.is_determinate();
                if both {
                    assert!((h.inter.rel_orientation[k] - h2.inter.rel_orientation[k]).amax() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn edge_bound_holds_on_random_tokens() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        use rand::Rng;
        for _ in 0..40 {
            let n = rng.random_range(8..=60);
            let chain = synth::random_chain(&mut rng, n);
            let tokens: Vec<SsToken> = (0..n)
                .map(|_| SsToken::ALL[rng.random_range(0..4)])
                .collect();
            let h = build_hierarchy_with_tokens(&chain, &tokens, BuildOptions::default()).unwrap();
            check_invariants(&h).unwrap();
        }
    }
}
