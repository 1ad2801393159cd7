//! Python bindings: chains, hierarchical graphs, fingerprints and the hull
//! graph primitive.

use nalgebra::Matrix3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sshg::dssp::{assign_tokens, energy_from_distances, tokens_to_string};
use sshg::export::{read_hierarchy, to_document, to_json};
use sshg::geometry::{PointCloud, RigidMotion, Vec3};
use sshg::hierarchy::{build_hierarchy_with, total_edges, BuildOptions, HierarchicalGraph};
use sshg::pdbio::{parse_pdb, write_pdb, ProteinChain};
use sshg::schull::{build_schull_with, radius_pairs, SchullOptions};
use sshg::synth;
use sshg::wlref::{fingerprint, quantize, QuantConfig};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn points(coords: Vec<[f64; 3]>) -> Vec<Vec3> {
    coords.into_iter().map(Vec3::from).collect()
}

/// Protein backbone chain.
#[pyclass(name = "Chain", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChain {
    inner: ProteinChain,
}

#[pymethods]
impl PyChain {
    #[staticmethod]
    fn ideal_helix(length: usize) -> Self {
        PyChain {
            inner: synth::ideal_helix(length),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (strand_length=7, spacing=4.8))]
    fn beta_hairpin(strand_length: usize, spacing: f64) -> PyResult<Self> {
        if strand_length.is_multiple_of(2) || strand_length < 3 {
            return Err(PyValueError::new_err("strand_length must be odd and at least 3"));
        }
        Ok(PyChain {
            inner: synth::beta_hairpin(strand_length, spacing),
        })
    }

    /// Self-avoiding random CA walk with a traced backbone.
    #[staticmethod]
    fn random(length: usize, seed: u64) -> PyResult<Self> {
        if length == 0 {
            return Err(PyValueError::new_err("length must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyChain {
            inner: synth::random_chain(&mut rng, length),
        })
    }

    #[getter]
    fn chain_id(&self) -> String {
        self.inner.chain_id.to_string()
    }

    #[getter]
    fn source_id(&self) -> String {
        self.inner.source_id.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Chain({:?}, {}, {} residues)", self.inner.source_id, self.inner.chain_id, self.inner.len())
    }

    /// One secondary-structure letter per residue.
    fn tokens(&self) -> String {
        tokens_to_string(&assign_tokens(&self.inner))
    }

    fn ca_coords(&self) -> Vec<[f64; 3]> {
        self.inner.ca_coords().iter().map(|p| [p.x, p.y, p.z]).collect()
    }

    fn residue_names(&self) -> Vec<String> {
        self.inner.residues().iter().map(|r| r.aa_type.clone()).collect()
    }

    fn to_pdb(&self) -> String {
        write_pdb(std::slice::from_ref(&self.inner))
    }

    /// Copy moved by `x -> Q x + t`; `rotation` is row-major and must be
    /// orthogonal (reflections allowed).
    fn transformed(&self, rotation: [f64; 9], translation: [f64; 3]) -> PyResult<Self> {
        let m = RigidMotion::new(Matrix3::from_row_slice(&rotation), Vec3::from(translation)).map_err(value_err)?;
        Ok(PyChain {
            inner: self.inner.map_atoms(|p| m.apply(p)),
        })
    }
}

/// Hierarchical graph of one chain.
#[pyclass(name = "Hierarchy", frozen)]
struct PyHierarchy {
    inner: HierarchicalGraph,
    chain: Option<ProteinChain>,
    jitter: bool,
}

#[pymethods]
impl PyHierarchy {
    #[staticmethod]
    #[pyo3(signature = (chain, jitter=false))]
    fn build(chain: &PyChain, jitter: bool) -> PyResult<Self> {
        let inner = build_hierarchy_with(&chain.inner, BuildOptions { jitter }).map_err(value_err)?;
        Ok(PyHierarchy {
            inner,
            chain: Some(chain.inner.clone()),
            jitter,
        })
    }

    /// Reads the JSON produced by `to_json` or `sshg build`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = read_hierarchy(text).map_err(value_err)?;
        Ok(PyHierarchy {
            inner,
            chain: None,
            jitter: false,
        })
    }

    #[getter]
    fn residue_count(&self) -> usize {
        self.inner.residue_count
    }

    #[getter]
    fn units(&self) -> usize {
        self.inner.intra.len()
    }

    /// `(start, end, token)` per segment, `end` inclusive.
    fn segments(&self) -> Vec<(usize, usize, String)> {
        self.inner
            .segments()
            .iter()
            .map(|s| (s.start, s.end, s.token.letter().to_string()))
            .collect()
    }

    /// Inter edges as `(i, j, length, tau, row-major relative orientation)`.
    fn inter_edges(&self) -> Vec<(usize, usize, f64, f64, Vec<f64>)> {
        (0..self.inner.inter.graph.edges.len())
            .map(|k| {
                let e = &self.inner.inter.graph.edges[k];
                let r = self.inner.inter.rel_orientation[k];
                let rows = (0..3).flat_map(|i| (0..3).map(move |j| r[(i, j)])).collect();
                (e.i, e.j, e.length, e.tau, rows)
            })
            .collect()
    }

    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let a = total_edges(&self.inner);
        let d = PyDict::new(py);
        d.set_item("N", a.residue_count)?;
        d.set_item("I", a.units)?;
        d.set_item("inter_edges", a.inter)?;
        d.set_item("intra_edges_sum", a.intra_sum)?;
        d.set_item("bound_ok", a.bound_ok)?;
        Ok(d)
    }

    /// 128-bit fingerprint as 32 hex digits.
    #[pyo3(signature = (t1=3, t2=3, scale=1e6))]
    fn fingerprint(&self, t1: usize, t2: usize, scale: f64) -> PyResult<String> {
        let cfg = QuantConfig::new(scale).map_err(value_err)?;
        fingerprint(&self.inner, (t1, t2), cfg)
            .map(|f| f.to_string())
            .map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        let chain = self
            .chain
            .as_ref()
            .ok_or_else(|| PyRuntimeError::new_err("residue names are unavailable for a hierarchy read from JSON"))?;
        Ok(to_json(&to_document(&self.inner, chain, QuantConfig::default(), self.jitter)))
    }
}

/// Chains of the first model of a PDB text.
#[pyfunction]
#[pyo3(signature = (text, source_id="input"))]
fn read_pdb(text: &str, source_id: &str) -> PyResult<Vec<PyChain>> {
    let s = parse_pdb(text, source_id).map_err(value_err)?;
    Ok(s.chains.into_iter().map(|inner| PyChain { inner }).collect())
}

/// Electrostatic hydrogen-bond energy in kcal/mol from the four distances.
#[pyfunction]
fn hbond_energy(r_on: f64, r_ch: f64, r_oh: f64, r_cn: f64) -> PyResult<f64> {
    energy_from_distances(r_on, r_ch, r_oh, r_cn).map_err(value_err)
}

/// Hull graph edges `(i, j, length, tau)` of a point cloud.
#[pyfunction]
#[pyo3(signature = (coords, jitter=false))]
fn schull_edges(coords: Vec<[f64; 3]>, jitter: bool) -> PyResult<Vec<(usize, usize, f64, f64)>> {
    let cloud = PointCloud::from_points(points(coords)).map_err(value_err)?;
    let (g, _) = build_schull_with(&cloud, SchullOptions { jitter }).map_err(value_err)?;
    Ok(g.edges.iter().map(|e| (e.i, e.j, e.length, e.tau)).collect())
}

/// Index pairs within `cutoff` Å.
#[pyfunction]
fn radius_edges(coords: Vec<[f64; 3]>, cutoff: f64) -> PyResult<Vec<(usize, usize)>> {
    radius_pairs(&points(coords), cutoff).map_err(value_err)
}

#[pyfunction]
#[pyo3(name = "quantize", signature = (x, scale=1e6))]
fn py_quantize(x: f64, scale: f64) -> PyResult<i64> {
    quantize(x, QuantConfig::new(scale).map_err(value_err)?).map_err(value_err)
}

#[pymodule]
fn sshg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChain>()?;
    m.add_class::<PyHierarchy>()?;
    m.add_function(wrap_pyfunction!(read_pdb, m)?)?;
    m.add_function(wrap_pyfunction!(hbond_energy, m)?)?;
    m.add_function(wrap_pyfunction!(schull_edges, m)?)?;
    m.add_function(wrap_pyfunction!(radius_edges, m)?)?;
    m.add_function(wrap_pyfunction!(py_quantize, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
