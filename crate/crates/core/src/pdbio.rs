//! Backbone-only PDB reader and writer.
//!
//! Only `ATOM` records of the first model are read, using the fixed PDB
//! columns. Residues lacking any of N, CA, C, O are dropped and counted.

use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

use crate::geometry::Vec3;

/// C(i) to N(i+1) distance at or above which consecutive residues are
/// considered disconnected.
pub const PEPTIDE_BREAK: f64 = 2.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdbError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("EmptyStructure: no residue with a complete N/CA/C/O backbone")]
    EmptyStructure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    /// 0-based position along the chain.
    pub seq_index: usize,
    pub chain_id: char,
    /// Three-letter residue name as written in the file.
    pub aa_type: String,
    /// Author residue number and insertion code, kept for writing back out.
    pub res_seq: i32,
    pub icode: char,
    pub n: Vec3,
    pub ca: Vec3,
    pub c: Vec3,
    pub o: Vec3,
    /// Estimated amide hydrogen; absent for the first residue and prolines.
    pub h: Option<Vec3>,
}

impl Residue {
    pub fn is_proline(&self) -> bool {
        self.aa_type.eq_ignore_ascii_case("PRO")
    }

    /// Applies `f` to every stored atom position.
    pub fn map_atoms(&self, f: impl Fn(&Vec3) -> Vec3) -> Residue {
        Residue {
            n: f(&self.n),
            ca: f(&self.ca),
            c: f(&self.c),
            o: f(&self.o),
            h: self.h.as_ref().map(&f),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProteinChain {
    pub source_id: String,
    pub chain_id: char,
    residues: Vec<Residue>,
}

impl ProteinChain {
    /// Builds a chain, renumbering `seq_index` to `0..len`.
    ///
    /// # Panics
    /// If `residues` is empty.
    pub fn new(source_id: impl Into<String>, chain_id: char, mut residues: Vec<Residue>) -> Self {
        assert!(!residues.is_empty(), "a chain needs at least one residue");
        for (i, r) in residues.iter_mut().enumerate() {
            r.seq_index = i;
            r.chain_id = chain_id;
        }
        Self {
            source_id: source_id.into(),
            chain_id,
            residues,
        }
    }

    pub fn residues(&self) -> &[Residue] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    pub fn ca_coords(&self) -> Vec<Vec3> {
        self.residues.iter().map(|r| r.ca).collect()
    }

    /// `true` at `i` when residue `i` and `i + 1` are not peptide-bonded.
    pub fn breaks(&self) -> Vec<bool> {
        let mut out = vec![false; self.residues.len()];
        for (i, w) in self.residues.windows(2).enumerate() {
            out[i] = (w[0].c - w[1].n).norm() >= PEPTIDE_BREAK;
        }
        out
    }

    /// Same chain with every atom moved by `f`.
    pub fn map_atoms(&self, f: impl Fn(&Vec3) -> Vec3) -> ProteinChain {
        ProteinChain {
            source_id: self.source_id.clone(),
            chain_id: self.chain_id,
            residues: self.residues.iter().map(|r| r.map_atoms(&f)).collect(),
        }
    }
}

/// Result of reading one PDB file.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub chains: Vec<ProteinChain>,
    /// Residues dropped because a backbone atom was missing.
    pub incomplete_residues: usize,
    /// Consecutive residue pairs with C(i)-N(i+1) >= 2.5 Å.
    pub chain_breaks: usize,
}

impl Structure {
    pub fn chain(&self, id: char) -> Option<&ProteinChain> {
        self.chains.iter().find(|c| c.chain_id == id)
    }
}

#[derive(Default)]
struct PartialResidue {
    chain_id: char,
    aa_type: String,
    res_seq: i32,
    icode: char,
    n: Option<Vec3>,
    ca: Option<Vec3>,
    c: Option<Vec3>,
    o: Option<Vec3>,
}

impl PartialResidue {
    fn complete(&self) -> Option<Residue> {
        Some(Residue {
            seq_index: 0,
            chain_id: self.chain_id,
            aa_type: self.aa_type.clone(),
            res_seq: self.res_seq,
            icode: self.icode,
            n: self.n?,
            ca: self.ca?,
            c: self.c?,
            o: self.o?,
            h: None,
        })
    }
}

fn column(line: &str, start: usize, end: usize) -> &str {
    // 1-based inclusive columns; short lines yield a truncated or empty field
    let bytes = line.as_bytes();
    let s = (start - 1).min(bytes.len());
    let e = end.min(bytes.len());
    line.get(s..e).unwrap_or("")
}

fn column_char(line: &str, col: usize) -> char {
    column(line, col, col).chars().next().unwrap_or(' ')
}

fn coordinate(line: &str, start: usize, end: usize, lineno: usize, axis: &str) -> Result<f64, PdbError> {
    let field = column(line, start, end).trim();
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| PdbError::MalformedRecord {
            line: lineno,
            reason: format!("cannot parse {axis} coordinate {field:?}"),
        })
}

/// Parses PDB text into backbone chains, one per chain identifier in order
/// of first appearance.
pub fn parse_pdb(text: &str, source_id: &str) -> Result<Structure, PdbError> {
    let mut chain_order: Vec<char> = Vec::new();
    let mut residues: Vec<Vec<PartialResidue>> = Vec::new();
    let mut seen_model_end = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let record = column(line, 1, 6);
        if record.starts_with("ENDMDL") {
            seen_model_end = true;
            continue;
        }
        if seen_model_end || record != "ATOM  " && record.trim_end() != "ATOM" {
            continue;
        }
        let alt = column_char(line, 17);
        if alt != ' ' && alt != 'A' {
            continue;
        }
        let atom = column(line, 13, 16).trim();
        if !matches!(atom, "N" | "CA" | "C" | "O") {
            continue;
        }
        let x = coordinate(line, 31, 38, lineno, "x")?;
        let y = coordinate(line, 39, 46, lineno, "y")?;
        let z = coordinate(line, 47, 54, lineno, "z")?;
        let pos = Vec3::new(x, y, z);

        let chain_id = column_char(line, 22);
        let res_name = column(line, 18, 20).trim().to_string();
        let seq_field = column(line, 23, 26).trim();
        let res_seq: i32 = seq_field.parse().map_err(|_| PdbError::MalformedRecord {
            line: lineno,
            reason: format!("cannot parse residue number {seq_field:?}"),
        })?;
        let icode = column_char(line, 27);

        let ci = match chain_order.iter().position(|&c| c == chain_id) {
            Some(ci) => ci,
            None => {
                chain_order.push(chain_id);
                residues.push(Vec::new());
                chain_order.len() - 1
            }
        };
        let list = &mut residues[ci];
        let same = list
            .last()
            .is_some_and(|r| r.res_seq == res_seq && r.icode == icode && r.aa_type == res_name);
        if !same {
            list.push(PartialResidue {
                chain_id,
                aa_type: res_name,
                res_seq,
                icode,
                ..Default::default()
            });
        }
        let r = list.last_mut().expect("just pushed");
        let slot = match atom {
            "N" => &mut r.n,
            "CA" => &mut r.ca,
            "C" => &mut r.c,
            _ => &mut r.o,
        };
        if slot.is_none() {
            *slot = Some(pos);
        }
    }

    let mut incomplete = 0;
    let mut chains = Vec::new();
    for (chain_id, partials) in chain_order.into_iter().zip(residues) {
        let complete: Vec<Residue> = partials
            .iter()
            .filter_map(|p| {
                let r = p.complete();
                if r.is_none() {
                    incomplete += 1;
                }
                r
            })
            .collect();
        if !complete.is_empty() {
            chains.push(ProteinChain::new(source_id, chain_id, complete));
        }
    }
    if chains.is_empty() {
        return Err(PdbError::EmptyStructure);
    }
    if incomplete > 0 {
        warn!("{source_id}: dropped {incomplete} residue(s) with incomplete backbone");
    }
    let chain_breaks = chains
        .iter()
        .map(|c| c.breaks().into_iter().filter(|&b| b).count())
        .sum();
    if chain_breaks > 0 {
        warn!("{source_id}: {chain_breaks} chain break(s) (C-N >= {PEPTIDE_BREAK} Å)");
    }
    Ok(Structure {
        chains,
        incomplete_residues: incomplete,
        chain_breaks,
    })
}

/// Places amide hydrogens 1.0 Å from N along the previous residue's O→C
/// direction. The first residue and prolines get none.
pub fn estimate_hydrogens(chain: &ProteinChain) -> ProteinChain {
    let mut out = chain.clone();
    for i in 0..out.residues.len() {
        out.residues[i].h = if i == 0 || out.residues[i].is_proline() {
            None
        } else {
            let prev = &chain.residues[i - 1];
            let co = prev.c - prev.o;
            let norm = co.norm();
            (norm > 0.0).then(|| chain.residues[i].n + co / norm)
        };
    }
    out
}

/// Writes the backbone (and any estimated H) as fixed-column ATOM records.
pub fn write_pdb(chains: &[ProteinChain]) -> String {
    let mut out = String::new();
    let mut serial = 1;
    for chain in chains {
        for r in chain.residues() {
            let mut atoms = vec![("N", r.n, 'N'), ("CA", r.ca, 'C'), ("C", r.c, 'C'), ("O", r.o, 'O')];
            if let Some(h) = r.h {
                atoms.push(("H", h, 'H'));
            }
            for (name, pos, element) in atoms {
                // atom names shorter than 4 characters start in column 14
                let name_field = format!(" {name:<3}");
                let _ = writeln!(
                    out,
                    "ATOM  {serial:>5} {name_field} {res:>3} {chain}{seq:>4}{icode}   {x:>8.3}{y:>8.3}{z:>8.3}  1.00  0.00          {element:>2}",
                    res = r.aa_type,
                    chain = chain.chain_id,
                    seq = r.res_seq,
                    icode = r.icode,
                    x = pos.x,
                    y = pos.y,
                    z = pos.z,
                );
                serial += 1;
            }
        }
        out.push_str("TER\n");
    }
    out.push_str("END\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CA_LINE: &str =
        "ATOM      1  CA  ALA A   1      11.104   6.134  -6.504  1.00  0.00           C";

    fn atom(serial: usize, name: &str, res: &str, chain: char, seq: i32, xyz: [f64; 3]) -> String {
        format!(
            "ATOM  {serial:>5}  {name:<3} {res:>3} {chain}{seq:>4}    {:>8.3}{:>8.3}{:>8.3}  1.00  0.00           C",
            xyz[0], xyz[1], xyz[2]
        )
    }

    fn residue_lines(seq: i32, chain: char, res: &str, base: f64, with_o: bool) -> Vec<String> {
        let mut v = vec![
            atom(1, "N", res, chain, seq, [base, 0.0, 0.0]),
            atom(2, "CA", res, chain, seq, [base + 1.46, 0.0, 0.0]),
            atom(3, "C", res, chain, seq, [base + 2.0, 1.4, 0.0]),
        ];
        if with_o {
            v.push(atom(4, "O", res, chain, seq, [base + 1.5, 2.4, 0.0]));
        }
        v
    }

    #[test]
    fn fixed_column_extraction() {
        let mut text = String::from(CA_LINE);
        text.push('\n');
        for l in ["N", "C", "O"] {
            text.push_str(&atom(2, l, "ALA", 'A', 1, [1.0, 2.0, 3.0]));
            text.push('\n');
        }
        let s = parse_pdb(&text, "t").unwrap();
        let r = &s.chains[0].residues()[0];
        assert_eq!(r.aa_type, "ALA");
        assert_eq!(r.chain_id, 'A');
        assert_eq!(r.ca, Vec3::new(11.104, 6.134, -6.504));
    }

    #[test]
    fn hetatm_only_is_empty() {
        let text = CA_LINE.replacen("ATOM  ", "HETATM", 1);
        assert_eq!(parse_pdb(&text, "t").unwrap_err(), PdbError::EmptyStructure);
    }

    #[test]
    fn incomplete_residue_dropped() {
        let mut lines = residue_lines(1, 'A', "GLY", 0.0, true);
        lines.extend(residue_lines(2, 'A', "GLY", 3.0, false));
        let s = parse_pdb(&lines.join("\n"), "t").unwrap();
        assert_eq!(s.chains[0].len(), 1);
        assert_eq!(s.incomplete_residues, 1);
    }

    #[test]
    fn malformed_coordinate_reports_line() {
        let mut lines = residue_lines(1, 'A', "GLY", 0.0, true);
        lines[2] = lines[2].replace("   1.400", "   1.4x0");
        let err = parse_pdb(&lines.join("\n"), "t").unwrap_err();
        assert!(matches!(err, PdbError::MalformedRecord { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn altloc_and_models() {
        let mut lines = residue_lines(1, 'A', "GLY", 0.0, true);
        let mut alt_b = atom(9, "CA", "GLY", 'A', 1, [99.0, 99.0, 99.0]);
        alt_b.replace_range(16..17, "B");
        lines.insert(2, alt_b);
        lines.push("ENDMDL".into());
        lines.extend(residue_lines(2, 'A', "GLY", 3.0, true));
        let s = parse_pdb(&lines.join("\n"), "t").unwrap();
        assert_eq!(s.chains[0].len(), 1);
        assert_eq!(s.chains[0].residues()[0].ca.x, 1.46);
    }

    #[test]
    fn chains_and_renumbering() {
        let mut lines = residue_lines(10, 'B', "GLY", 0.0, true);
        lines.extend(residue_lines(11, 'B', "ALA", 3.0, true));
        lines.extend(residue_lines(5, 'A', "SER", 6.0, true));
        let s = parse_pdb(&lines.join("\n"), "t").unwrap();
        assert_eq!(s.chains.len(), 2);
        assert_eq!(s.chains[0].chain_id, 'B');
        let idx: Vec<usize> = s.chains[0].residues().iter().map(|r| r.seq_index).collect();
        assert_eq!(idx, vec![0, 1]);
        assert_eq!(s.chain('A').unwrap().residues()[0].aa_type, "SER");
    }

    fn residue(aa: &str, n: Vec3, c: Vec3, o: Vec3) -> Residue {
        Residue {
            seq_index: 0,
            chain_id: 'A',
            aa_type: aa.into(),
            res_seq: 1,
            icode: ' ',
            n,
            ca: n + Vec3::new(0.5, 0.5, 0.0),
            c,
            o,
            h: None,
        }
    }

    #[test]
    fn hydrogen_along_carbonyl() {
        let r0 = residue("ALA", Vec3::new(-1., 0., 0.), Vec3::zeros(), Vec3::new(0., 0., 1.));
        let r1 = residue("ALA", Vec3::new(3., 0., 0.), Vec3::new(4., 0., 0.), Vec3::new(4., 1., 0.));
        let r2 = residue("PRO", Vec3::new(6., 0., 0.), Vec3::new(7., 0., 0.), Vec3::new(7., 1., 0.));
        let chain = estimate_hydrogens(&ProteinChain::new("t", 'A', vec![r0.clone(), r1, r2]));
        assert_eq!(chain.residues()[0].h, None);
        assert_eq!(chain.residues()[1].h, Some(Vec3::new(3., 0., -1.)));
        assert_eq!(chain.residues()[2].h, None);
        let single = estimate_hydrogens(&ProteinChain::new("t", 'A', vec![r0]));
        assert_eq!(single.residues()[0].h, None);
    }

    fn arb_coord() -> impl Strategy<Value = f64> {
        (-99_999i64..99_999).prop_map(|v| v as f64 / 1000.0)
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (arb_coord(), arb_coord(), arb_coord()).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(
            atoms in prop::collection::vec((arb_vec(), arb_vec(), arb_vec(), arb_vec()), 1..20),
            names in prop::collection::vec(prop::sample::select(vec!["ALA", "GLY", "PRO", "TRP"]), 20),
        ) {
            let residues: Vec<Residue> = atoms
                .iter()
                .enumerate()
                .map(|(i, (n, ca, c, o))| Residue {
                    seq_index: i,
                    chain_id: 'A',
                    aa_type: names[i].to_string(),
                    res_seq: i as i32 + 1,
                    icode: ' ',
                    n: *n, ca: *ca, c: *c, o: *o,
                    h: None,
                })
                .collect();
            let chain = ProteinChain::new("rt", 'A', residues);
            let text = write_pdb(std::slice::from_ref(&chain));
            let parsed = parse_pdb(&text, "rt").unwrap();
            prop_assert_eq!(parsed.chains.len(), 1);
            prop_assert_eq!(&parsed.chains[0], &chain);
        }

        #[test]
        fn hydrogens_sit_one_angstrom_from_n(
            atoms in prop::collection::vec((arb_vec(), arb_vec(), arb_vec(), arb_vec()), 2..10),
        ) {
            let residues: Vec<Residue> = atoms
                .iter()
                .map(|(n, ca, c, o)| Residue {
                    seq_index: 0, chain_id: 'A', aa_type: "ALA".into(), res_seq: 1, icode: ' ',
                    n: *n, ca: *ca, c: *c, o: *o, h: None,
                })
                .collect();
            let chain = estimate_hydrogens(&ProteinChain::new("h", 'A', residues));
            for r in chain.residues() {
                if let Some(h) = r.h {
                    prop_assert!(((h - r.n).norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
