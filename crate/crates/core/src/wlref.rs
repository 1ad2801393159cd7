//! Deterministic two-stage color refinement over a hierarchical graph.
//!
//! Stage one runs Weisfeiler-Lehman refinement on every intra graph and
//! reduces it to a unit code. Stage two seeds the inter graph with those
//! codes, refines again with relative orientations on the edges, and reduces
//! to a single [`Fingerprint`]. All reals are quantized before hashing, so the
//! result depends only on rigid-motion invariant data.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_128_with_seed;

use crate::geometry::Mat3;
use crate::hierarchy::{build_hierarchy, HierarchicalGraph, HierarchyError, IntraGraph};
use crate::pdbio::ProteinChain;
use crate::schull::GeometricGraph;

/// Seed of every hash; reported in output metadata.
pub const HASH_SEED: u64 = 0x5353_4847_5746_0001;
pub const HASH_NAME: &str = "xxh3-128";
pub const DEFAULT_SCALE: f64 = 1e6;
pub const DEFAULT_ROUNDS: (usize, usize) = (3, 3);

// Domain tags keep hash inputs of different roles apart.
const TAG_NODE: u8 = 1;
const TAG_ROUND: u8 = 2;
const TAG_UNIT: u8 = 3;
const TAG_INTER_NODE: u8 = 4;
const TAG_GLOBAL: u8 = 5;
const TAG_COMBINED: u8 = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WlError {
    #[error("value {0} overflows the quantization range")]
    Overflow(f64),
    #[error("quantization scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("refinement needs at least one round")]
    ZeroRounds,
    #[error(transparent)]
    Build(#[from] HierarchyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantConfig {
    scale: f64,
}

impl QuantConfig {
    pub fn new(scale: f64) -> Result<Self, WlError> {
        if scale > 0.0 && scale.is_finite() {
            Ok(Self { scale })
        } else {
            Err(WlError::InvalidScale(scale))
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Default for QuantConfig {
    fn default() -> Self {
        Self { scale: DEFAULT_SCALE }
    }
}

/// `x · scale` rounded half to even.
pub fn quantize(x: f64, cfg: QuantConfig) -> Result<i64, WlError> {
    let v = (x * cfg.scale).round_ties_even();
    // 2^62 leaves headroom for any later arithmetic on the codes
    if !v.is_finite() || v.abs() >= 4.611_686_018_427_388e18 {
        return Err(WlError::Overflow(x));
    }
    Ok(v as i64)
}

/// 128-bit structure code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u128);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for Fingerprint {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u128::from_str_radix(s, 16).map(Fingerprint)
    }
}

/// Length-prefixed little-endian encoding of a hash input.
struct Enc(Vec<u8>);

impl Enc {
    fn new(tag: u8) -> Self {
        Enc(vec![tag])
    }

    fn u64(&mut self, v: u64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn i64(&mut self, v: i64) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn u128(&mut self, v: u128) -> &mut Self {
        self.0.extend_from_slice(&v.to_le_bytes());
        self
    }

    fn ints(&mut self, v: &[i64]) -> &mut Self {
        self.u64(v.len() as u64);
        for &x in v {
            self.i64(x);
        }
        self
    }

    fn finish(&self) -> u128 {
        xxh3_128_with_seed(&self.0, HASH_SEED)
    }
}

fn hash_multiset(tag: u8, mut colors: Vec<u128>) -> u128 {
    colors.sort_unstable();
    let mut e = Enc::new(tag);
    e.u64(colors.len() as u64);
    for c in colors {
        e.u128(c);
    }
    e.finish()
}

/// Neighbor lists with quantized edge labels, as seen from each node.
type LabeledAdjacency = Vec<Vec<(usize, Vec<i64>)>>;

/// Colors after every round, `[initial, round 1, ..., round t]`.
fn refine(initial: Vec<u128>, adj: &LabeledAdjacency, rounds: usize) -> Vec<Vec<u128>> {
    let mut history = vec![initial];
    for _ in 0..rounds {
        let prev = history.last().unwrap();
        let next = (0..prev.len())
            .map(|v| {
                let mut msgs: Vec<(u128, &[i64])> =
                    adj[v].iter().map(|(u, label)| (prev[*u], label.as_slice())).collect();
                msgs.sort_unstable();
                let mut e = Enc::new(TAG_ROUND);
                e.u128(prev[v]).u64(msgs.len() as u64);
                for (c, label) in msgs {
                    e.u128(c).ints(label);
                }
                e.finish()
            })
            .collect();
        history.push(next);
    }
    history
}

fn intra_inputs(g: &GeometricGraph, cfg: QuantConfig) -> Result<(Vec<u128>, LabeledAdjacency), WlError> {
    let initial = g
        .node_features
        .iter()
        .zip(&g.node_attrs)
        .map(|(&f, &a)| Ok(Enc::new(TAG_NODE).u64(f).i64(quantize(a, cfg)?).finish()))
        .collect::<Result<Vec<_>, WlError>>()?;
    let mut adj = vec![Vec::new(); g.node_count()];
    for e in &g.edges {
        let label = vec![quantize(e.length, cfg)?, quantize(e.tau, cfg)?];
        adj[e.i].push((e.j, label.clone()));
        adj[e.j].push((e.i, label));
    }
    Ok((initial, adj))
}

/// Color history of plain refinement on one graph.
pub fn wl_colors(g: &GeometricGraph, rounds: usize, cfg: QuantConfig) -> Result<Vec<Vec<u128>>, WlError> {
    let (initial, adj) = intra_inputs(g, cfg)?;
    Ok(refine(initial, &adj, rounds))
}

/// Order-independent code of one graph after `rounds` refinement rounds.
pub fn graph_code(g: &GeometricGraph, rounds: usize, cfg: QuantConfig) -> Result<u128, WlError> {
    if rounds == 0 {
        return Err(WlError::ZeroRounds);
    }
    let colors = wl_colors(g, rounds, cfg)?;
    Ok(hash_multiset(TAG_UNIT, colors.last().unwrap().clone()))
}

pub fn intra_code(g: &IntraGraph, rounds: usize, cfg: QuantConfig) -> Result<u128, WlError> {
    graph_code(&g.graph, rounds, cfg)
}

fn quantize_matrix(m: &Mat3, cfg: QuantConfig) -> Result<Vec<i64>, WlError> {
    // row-major
    (0..3)
        .flat_map(|r| (0..3).map(move |c| m[(r, c)]))
        .map(|x| quantize(x, cfg))
        .collect()
}

/// Whether edge `k` of the inter graph carries a usable orientation: both
/// frames must be determinate, since otherwise the product is not invariant.
pub fn orientation_hashed(h: &HierarchicalGraph, k: usize) -> bool {
    let e = &h.inter.graph.edges[k];
    h.intra[e.i].frame.is_determinate() && h.intra[e.j].frame.is_determinate()
}

fn inter_inputs(
    h: &HierarchicalGraph,
    codes: &[u128],
    cfg: QuantConfig,
) -> Result<(Vec<u128>, LabeledAdjacency), WlError> {
    let g = &h.inter.graph;
    let initial = (0..g.node_count())
        .map(|i| {
            Ok(Enc::new(TAG_INTER_NODE)
                .u128(codes[i])
                .u64(g.node_features[i])
                .i64(quantize(g.node_attrs[i], cfg)?)
                .finish())
        })
        .collect::<Result<Vec<_>, WlError>>()?;
    let mut adj = vec![Vec::new(); g.node_count()];
    for (k, e) in g.edges.iter().enumerate() {
        let base = [quantize(e.length, cfg)?, quantize(e.tau, cfg)?];
        let (mut from_i, mut from_j) = (base.to_vec(), base.to_vec());
        if orientation_hashed(h, k) {
            // seen from j the relative orientation is the transpose
            let r = &h.inter.rel_orientation[k];
            from_i.push(1);
            from_i.extend(quantize_matrix(r, cfg)?);
            from_j.push(1);
            from_j.extend(quantize_matrix(&r.transpose(), cfg)?);
        } else {
            from_i.push(0);
            from_j.push(0);
        }
        adj[e.i].push((e.j, from_i));
        adj[e.j].push((e.i, from_j));
    }
    Ok((initial, adj))
}

/// Two-stage fingerprint with `(T1, T2)` rounds.
pub fn fingerprint(h: &HierarchicalGraph, rounds: (usize, usize), cfg: QuantConfig) -> Result<Fingerprint, WlError> {
    let (t1, t2) = rounds;
    if t1 == 0 || t2 == 0 {
        return Err(WlError::ZeroRounds);
    }
    let codes = h
        .intra
        .par_iter()
        .map(|g| intra_code(g, t1, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let (initial, adj) = inter_inputs(h, &codes, cfg)?;
    let colors = refine(initial, &adj, t2);
    Ok(Fingerprint(hash_multiset(TAG_GLOBAL, colors.last().unwrap().clone())))
}

/// Order-independent combination of per-chain fingerprints.
pub fn combine(parts: &[Fingerprint]) -> Fingerprint {
    if parts.len() == 1 {
        return parts[0];
    }
    Fingerprint(hash_multiset(TAG_COMBINED, parts.iter().map(|f| f.0).collect()))
}

/// Builds both hierarchies with default options and compares fingerprints.
pub fn distinguish(
    a: &ProteinChain,
    b: &ProteinChain,
    rounds: (usize, usize),
    cfg: QuantConfig,
) -> Result<(bool, Fingerprint, Fingerprint), WlError> {
    let fa = fingerprint(&build_hierarchy(a)?, rounds, cfg)?;
    let fb = fingerprint(&build_hierarchy(b)?, rounds, cfg)?;
    Ok((fa == fb, fa, fb))
}

/// Every real that enters the hash, in a fixed traversal order.
pub fn hashed_reals(h: &HierarchicalGraph) -> Vec<f64> {
    let mut out = Vec::new();
    for g in &h.intra {
        out.extend(&g.graph.node_attrs);
        for e in &g.graph.edges {
            out.extend([e.length, e.tau]);
        }
    }
    out.extend(&h.inter.graph.node_attrs);
    for (k, e) in h.inter.graph.edges.iter().enumerate() {
        out.extend([e.length, e.tau]);
        if orientation_hashed(h, k) {
            out.extend(h.inter.rel_orientation[k].transpose().iter());
        }
    }
    out
}

/// The quantized pre-image of a fingerprint, for logging collisions.
pub fn quantized_preimage(h: &HierarchicalGraph, cfg: QuantConfig) -> Result<Vec<i64>, WlError> {
    hashed_reals(h).into_iter().map(|x| quantize(x, cfg)).collect()
}

/// Smallest distance, in quantization units, between a hashed value and a
/// rounding boundary. Values closer than the numerical noise of a rigid
/// motion could round differently after one.
pub fn boundary_margin(h: &HierarchicalGraph, cfg: QuantConfig) -> f64 {
    hashed_reals(h)
        .into_iter()
        .map(|x| {
            let v = x * cfg.scale;
            ((v - v.floor()) - 0.5).abs()
        })
        .fold(0.5, f64::min)
}
