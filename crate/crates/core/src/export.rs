//! JSON interchange format for hierarchical graphs.
//!
//! Reals are written with 9 significant digits. Orientation matrices are
//! row-major. [`read_document`] reverses [`to_document`]; values that are not
//! stored (centroids, inter node attributes, feature codes) are recomputed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dssp::{Segment, SsToken};
use crate::geometry::{mean, Frame, GeometryError, Mat3, Vec3};
use crate::hierarchy::{
    residue_feature, total_edges, unit_feature, HierarchicalGraph, InterGraph, IntraGraph,
};
use crate::pdbio::ProteinChain;
use crate::schull::{GeometricGraph, GraphEdge};
use crate::wlref::{QuantConfig, HASH_NAME, HASH_SEED};

pub const TAU_DEFINITION: &str =
    "angle in radians at the centroid between the unit-sphere projections of the two endpoints";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("inconsistent document: {0}")]
    Inconsistent(String),
    #[error("bad frame: {0}")]
    Frame(#[from] GeometryError),
}

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap()
}

fn r3(v: &Vec3) -> [f64; 3] {
    [round_sig9(v.x), round_sig9(v.y), round_sig9(v.z)]
}

fn r9(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = round_sig9(m[(r, c)]);
        }
    }
    out
}

fn mat(v: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub source_id: String,
    pub chain_id: String,
    pub tool: String,
    pub version: String,
    pub hash: String,
    pub hash_seed: String,
    pub quant_scale: f64,
    pub jitter: bool,
    pub jittered: bool,
    pub tau: String,
    pub rel_orientation: String,
}

/// `[residue index, residue name, [x, y, z], distance to centroid]`
pub type NodeRecord = (usize, String, [f64; 3], f64);
/// `[i, j, length, tau]`
pub type EdgeRecord = (usize, usize, f64, f64);
/// `[[x, y, z], token, size]`
pub type UnitRecord = ([f64; 3], SsToken, usize);
/// `[i, j, length, tau, row-major g_iᵀ g_j]`
pub type InterEdgeRecord = (usize, usize, f64, f64, [f64; 9]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub rotation: [f64; 9],
    pub center: [f64; 3],
    pub determinate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraRecord {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub frame: FrameRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterRecord {
    pub nodes: Vec<UnitRecord>,
    pub edges: Vec<InterEdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct AuditRecord {
    pub N: usize,
    pub I: usize,
    pub inter_edges: usize,
    pub intra_edges_sum: usize,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub meta: Meta,
    pub segments: Vec<Segment>,
    pub intra: Vec<IntraRecord>,
    pub inter: InterRecord,
    pub audit: AuditRecord,
}

fn edge_records(g: &GeometricGraph) -> Vec<EdgeRecord> {
    g.edges
        .iter()
        .map(|e| (e.i, e.j, round_sig9(e.length), round_sig9(e.tau)))
        .collect()
}

/// Serializable form of `h`. `chain` supplies residue names.
pub fn to_document(h: &HierarchicalGraph, chain: &ProteinChain, cfg: QuantConfig, jitter: bool) -> Document {
    let residues = chain.residues();
    let intra = h
        .intra
        .iter()
        .map(|g| IntraRecord {
            nodes: g
                .segment
                .range()
                .zip(&g.graph.node_coords)
                .zip(&g.graph.node_attrs)
                .map(|((k, p), a)| (k, residues[k].aa_type.clone(), r3(p), round_sig9(*a)))
                .collect(),
            edges: edge_records(&g.graph),
            frame: FrameRecord {
                rotation: r9(g.frame.rotation()),
                center: r3(g.frame.center()),
                determinate: g.frame.is_determinate(),
            },
        })
        .collect();
    let inter = InterRecord {
        nodes: h
            .intra
            .iter()
            .zip(&h.inter.graph.node_coords)
            .map(|(g, c)| (r3(c), g.segment.token, g.segment.len()))
            .collect(),
        edges: h
            .inter
            .graph
            .edges
            .iter()
            .zip(&h.inter.rel_orientation)
            .map(|(e, r)| (e.i, e.j, round_sig9(e.length), round_sig9(e.tau), r9(r)))
            .collect(),
    };
    let audit = total_edges(h);
    Document {
        meta: Meta {
            source_id: h.source_id.clone(),
            chain_id: h.chain_id.to_string(),
            tool: "sshg".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            hash: HASH_NAME.into(),
            hash_seed: format!("{HASH_SEED:#018x}"),
            quant_scale: cfg.scale(),
            jitter,
            jittered: h.jittered,
            tau: TAU_DEFINITION.into(),
            rel_orientation: "row-major 3x3, g_i^T g_j for edge (i, j)".into(),
        },
        segments: h.segments(),
        intra,
        inter,
        audit: AuditRecord {
            N: audit.residue_count,
            I: audit.units,
            inter_edges: audit.inter,
            intra_edges_sum: audit.intra_sum,
            bound_ok: audit.bound_ok,
        },
    }
}

pub fn to_json(doc: &Document) -> String {
    serde_json::to_string_pretty(doc).expect("documents always serialize")
}

fn graph_from(coords: Vec<Vec3>, features: Vec<u64>, attrs: Option<Vec<f64>>, edges: Vec<GraphEdge>) -> GeometricGraph {
    let centroid = mean(&coords);
    let node_attrs = attrs.unwrap_or_else(|| coords.iter().map(|p| (p - centroid).norm()).collect());
    GeometricGraph {
        node_coords: coords,
        node_attrs,
        node_features: features,
        edges,
        centroid,
    }
}

fn check_edges(edges: &[(usize, usize)], n: usize, what: &str) -> Result<(), ExportError> {
    for &(i, j) in edges {
        if i >= j || j >= n {
            return Err(ExportError::Inconsistent(format!("{what} edge ({i}, {j}) with {n} nodes")));
        }
    }
    Ok(())
}

/// Rebuilds the in-memory hierarchy from a document.
pub fn from_document(doc: &Document) -> Result<HierarchicalGraph, ExportError> {
    let bad = |m: String| ExportError::Inconsistent(m);
    if doc.segments.len() != doc.intra.len() || doc.inter.nodes.len() != doc.intra.len() {
        return Err(bad("segment, intra and inter node counts differ".into()));
    }
    let mut intra = Vec::with_capacity(doc.intra.len());
    for (seg, rec) in doc.segments.iter().zip(&doc.intra) {
        if rec.nodes.len() != seg.len() {
            return Err(bad(format!("segment {}..={} has {} nodes", seg.start, seg.end, rec.nodes.len())));
        }
        check_edges(&rec.edges.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>(), rec.nodes.len(), "intra")?;
        let coords = rec.nodes.iter().map(|n| Vec3::from(n.2)).collect();
        let features = rec.nodes.iter().map(|n| residue_feature(&n.1, seg.token)).collect();
        let attrs = rec.nodes.iter().map(|n| n.3).collect();
        let edges = rec
            .edges
            .iter()
            .map(|&(i, j, length, tau)| GraphEdge { i, j, length, tau })
            .collect();
        let frame = Frame::new(mat(&rec.frame.rotation), Vec3::from(rec.frame.center), rec.frame.determinate)?;
        intra.push(IntraGraph {
            segment: *seg,
            graph: graph_from(coords, features, Some(attrs), edges),
            frame,
        });
    }
    check_edges(
        &doc.inter.edges.iter().map(|e| (e.0, e.1)).collect::<Vec<_>>(),
        doc.inter.nodes.len(),
        "inter",
    )?;
    let coords = doc.inter.nodes.iter().map(|n| Vec3::from(n.0)).collect();
    let features = doc.inter.nodes.iter().map(|n| unit_feature(n.1, n.2)).collect();
    let edges = doc
        .inter
        .edges
        .iter()
        .map(|&(i, j, length, tau, _)| GraphEdge { i, j, length, tau })
        .collect();
    let rel_orientation = doc.inter.edges.iter().map(|e| mat(&e.4)).collect();
    let mut chars = doc.meta.chain_id.chars();
    let chain_id = match (chars.next(), chars.next()) {
        (Some(c), None) => c,
        _ => return Err(bad(format!("chain id {:?}", doc.meta.chain_id))),
    };
    Ok(HierarchicalGraph {
        source_id: doc.meta.source_id.clone(),
        chain_id,
        intra,
        inter: InterGraph {
            graph: graph_from(coords, features, None, edges),
            rel_orientation,
        },
        residue_count: doc.audit.N,
        jittered: doc.meta.jittered,
    })
}

pub fn read_document(json: &str) -> Result<Document, ExportError> {
    Ok(serde_json::from_str(json)?)
}

pub fn read_hierarchy(json: &str) -> Result<HierarchicalGraph, ExportError> {
    from_document(&read_document(json)?)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn graphs_close(a: &GeometricGraph, b: &GeometricGraph, tol: f64) -> bool {
    a.node_features == b.node_features
        && a.node_coords.len() == b.node_coords.len()
        && a.edges.len() == b.edges.len()
        && a.node_coords.iter().zip(&b.node_coords).all(|(p, q)| (p - q).amax() <= tol * p.amax().max(1.0))
        && a.node_attrs.iter().zip(&b.node_attrs).all(|(x, y)| close(*x, *y, tol))
        && (a.centroid - b.centroid).amax() <= tol * a.centroid.amax().max(1.0)
        && a.edges.iter().zip(&b.edges).all(|(e, f)| {
            (e.i, e.j) == (f.i, f.j) && close(e.length, f.length, tol) && close(e.tau, f.tau, tol)
        })
}

/// Structural equality with reals compared to a relative tolerance.
pub fn hierarchies_close(a: &HierarchicalGraph, b: &HierarchicalGraph, tol: f64) -> bool {
    a.source_id == b.source_id
        && a.chain_id == b.chain_id
        && a.residue_count == b.residue_count
        && a.jittered == b.jittered
        && a.intra.len() == b.intra.len()
        && a.intra.iter().zip(&b.intra).all(|(x, y)| {
            x.segment == y.segment
                && graphs_close(&x.graph, &y.graph, tol)
                && x.frame.is_determinate() == y.frame.is_determinate()
                && (x.frame.rotation() - y.frame.rotation()).amax() <= tol
                && (x.frame.center() - y.frame.center()).amax() <= tol * x.frame.center().amax().max(1.0)
        })
        && graphs_close(&a.inter.graph, &b.inter.graph, tol)
        && a.inter.rel_orientation.len() == b.inter.rel_orientation.len()
        && a.inter
            .rel_orientation
            .iter()
            .zip(&b.inter.rel_orientation)
            .all(|(x, y)| (x - y).amax() <= tol)
}
