//! Kabsch-Sander style secondary-structure assignment.
//!
//! Hydrogen bonds are detected from the electrostatic energy of the backbone
//! C=O / N-H pair. `Hbond(i, j)` means the carbonyl of residue `i` accepts
//! from the amide of residue `j`. From those bonds: n-turns, parallel and
//! antiparallel bridges, helices, ladders, sheets and bends are derived, and
//! each residue receives one token in the priority order H, B, E, G, I, T, S.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pdbio::{estimate_hydrogens, ProteinChain, Residue};

/// 0.084 * 332 kcal/mol · Å.
pub const COULOMB_FACTOR: f64 = 0.084 * 332.0;
/// Energy below which a hydrogen bond is considered present (kcal/mol).
pub const HBOND_THRESHOLD: f64 = -0.5;
/// Minimum |i - j| for a hydrogen bond.
pub const MIN_HBOND_SEPARATION: usize = 2;
/// Bend angle threshold in degrees.
pub const BEND_ANGLE: f64 = 70.0;
/// Shortest interatomic distance accepted by the energy function (Å).
const CLASH_DISTANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DsspError {
    #[error("atom clash: an interatomic distance is {0:.4} Å")]
    AtomClash(f64),
    #[error("donor residue has no amide hydrogen")]
    MissingHydrogen,
}

/// Secondary-structure token, one per residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SsToken {
    #[serde(rename = "H")]
    AlphaHelix,
    #[serde(rename = "B")]
    IsolatedBridge,
    #[serde(rename = "E")]
    Strand,
    #[serde(rename = "G")]
    Helix310,
    #[serde(rename = "I")]
    PiHelix,
    /// Polyproline II. Part of the token set but never assigned.
    #[serde(rename = "P")]
    Polyproline,
    #[serde(rename = "T")]
    Turn,
    #[serde(rename = "S")]
    Bend,
    #[serde(rename = "-")]
    None,
}

impl SsToken {
    pub const ALL: [SsToken; 9] = [
        SsToken::AlphaHelix,
        SsToken::IsolatedBridge,
        SsToken::Strand,
        SsToken::Helix310,
        SsToken::PiHelix,
        SsToken::Polyproline,
        SsToken::Turn,
        SsToken::Bend,
        SsToken::None,
    ];

    pub fn letter(self) -> char {
        match self {
            SsToken::AlphaHelix => 'H',
            SsToken::IsolatedBridge => 'B',
            SsToken::Strand => 'E',
            SsToken::Helix310 => 'G',
            SsToken::PiHelix => 'I',
            SsToken::Polyproline => 'P',
            SsToken::Turn => 'T',
            SsToken::Bend => 'S',
            SsToken::None => '-',
        }
    }

    pub fn from_letter(c: char) -> Option<SsToken> {
        SsToken::ALL.into_iter().find(|t| t.letter() == c)
    }

    /// Stable small integer used in feature codes.
    pub fn code(self) -> u64 {
        SsToken::ALL.iter().position(|&t| t == self).unwrap() as u64
    }

    pub fn from_code(code: u64) -> Option<SsToken> {
        SsToken::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for SsToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Parses a token string such as `"HHHH--EEE"`.
pub fn tokens_from_str(s: &str) -> Option<Vec<SsToken>> {
    s.chars().map(SsToken::from_letter).collect()
}

pub fn tokens_to_string(tokens: &[SsToken]) -> String {
    tokens.iter().map(|t| t.letter()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HBond {
    /// Residue providing N-H.
    pub donor: usize,
    /// Residue providing C=O.
    pub acceptor: usize,
    /// kcal/mol
    pub energy: f64,
}

/// Hydrogen bonds of one chain, queryable as `Hbond(i, j)`.
#[derive(Debug, Clone, Default)]
pub struct HBondSet {
    bonds: Vec<HBond>,
    present: HashSet<(usize, usize)>,
}

impl HBondSet {
    pub fn new(mut bonds: Vec<HBond>) -> Self {
        bonds.sort_by_key(|b| (b.acceptor, b.donor));
        let present = bonds.iter().map(|b| (b.acceptor, b.donor)).collect();
        Self { bonds, present }
    }

    /// Bonds given as `(i, j)` pairs meaning `Hbond(i, j)`; energies unknown.
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(i, j)| HBond {
                    acceptor: i,
                    donor: j,
                    energy: f64::NAN,
                })
                .collect(),
        )
    }

    /// `Hbond(i, j)`: carbonyl of `i` bonded to the amide of `j`.
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.present.contains(&(i, j))
    }

    /// Signed-index variant; out-of-range indices are never bonded.
    fn has(&self, i: isize, j: isize) -> bool {
        i >= 0 && j >= 0 && self.contains(i as usize, j as usize)
    }

    pub fn bonds(&self) -> &[HBond] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }
}

/// Electrostatic energy from the four interatomic distances (Å).
pub fn energy_from_distances(r_on: f64, r_ch: f64, r_oh: f64, r_cn: f64) -> Result<f64, DsspError> {
    let min = r_on.min(r_ch).min(r_oh).min(r_cn);
    if min <= CLASH_DISTANCE {
        return Err(DsspError::AtomClash(min));
    }
    Ok(COULOMB_FACTOR * (1.0 / r_on + 1.0 / r_ch - 1.0 / r_oh - 1.0 / r_cn))
}

/// Energy of the bond between the N-H of `donor` and the C=O of `acceptor`.
pub fn hbond_energy(donor: &Residue, acceptor: &Residue) -> Result<f64, DsspError> {
    let h = donor.h.ok_or(DsspError::MissingHydrogen)?;
    energy_from_distances(
        (acceptor.o - donor.n).norm(),
        (acceptor.c - h).norm(),
        (acceptor.o - h).norm(),
        (acceptor.c - donor.n).norm(),
    )
}

/// True when no chain break lies between residues `a` and `b` (a <= b).
fn unbroken(breaks: &[bool], a: usize, b: usize) -> bool {
    !breaks[a..b].iter().any(|&x| x)
}

/// All bonds with energy below `threshold` and |i - j| >= 2. Donors need an
/// estimated hydrogen and must not directly follow a chain break.
pub fn detect_hbonds(chain: &ProteinChain, threshold: f64) -> HBondSet {
    let res = chain.residues();
    let breaks = chain.breaks();
    let mut bonds = Vec::new();
    for (j, donor) in res.iter().enumerate() {
        if donor.h.is_none() || j == 0 || breaks[j - 1] {
            continue;
        }
        for (i, acceptor) in res.iter().enumerate() {
            if i.abs_diff(j) < MIN_HBOND_SEPARATION {
                continue;
            }
            match hbond_energy(donor, acceptor) {
                Ok(e) if e < threshold => bonds.push(HBond {
                    donor: j,
                    acceptor: i,
                    energy: e,
                }),
                _ => {}
            }
        }
    }
    HBondSet::new(bonds)
}

/// n-turn flags for n = 3, 4, 5.
#[derive(Debug, Clone, PartialEq)]
pub struct Turns {
    flags: [Vec<bool>; 3],
}

impl Turns {
    /// Whether an `n`-turn starts at residue `i`.
    pub fn at(&self, n: usize, i: usize) -> bool {
        (3..=5).contains(&n) && self.flags[n - 3].get(i).copied().unwrap_or(false)
    }

    pub fn starts(&self, n: usize) -> Vec<usize> {
        (0..self.flags[n - 3].len()).filter(|&i| self.at(n, i)).collect()
    }
}

/// An n-turn exists at `i` iff `Hbond(i, i + n)` and no break lies in between.
pub fn detect_turns(hbonds: &HBondSet, breaks: &[bool]) -> Turns {
    let len = breaks.len();
    let flags = [3, 4, 5].map(|n| {
        (0..len)
            .map(|i| i + n < len && hbonds.contains(i, i + n) && unbroken(breaks, i, i + n))
            .collect()
    });
    Turns { flags }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BridgeKind {
    Parallel,
    Antiparallel,
}

/// Bridge between residues `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bridge {
    pub i: usize,
    pub j: usize,
    pub kind: BridgeKind,
}

/// Bridges between non-overlapping residue triplets (j - i >= 3).
pub fn detect_bridges(hbonds: &HBondSet, breaks: &[bool]) -> Vec<Bridge> {
    let len = breaks.len();
    let mut out = Vec::new();
    if len < 5 {
        return out;
    }
    for i in 1..len - 1 {
        if !unbroken(breaks, i - 1, i + 1) {
            continue;
        }
        for j in i + 3..len - 1 {
            if !unbroken(breaks, j - 1, j + 1) {
                continue;
            }
            let (si, sj) = (i as isize, j as isize);
            let parallel = (hbonds.has(si - 1, sj) && hbonds.has(sj, si + 1))
                || (hbonds.has(sj - 1, si) && hbonds.has(si, sj + 1));
            let antiparallel = (hbonds.has(si, sj) && hbonds.has(sj, si))
                || (hbonds.has(si - 1, sj + 1) && hbonds.has(sj - 1, si + 1));
            let kind = if parallel {
                BridgeKind::Parallel
            } else if antiparallel {
                BridgeKind::Antiparallel
            } else {
                continue;
            };
            out.push(Bridge { i, j, kind });
        }
    }
    out
}

/// Run of consecutive bridges of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub kind: BridgeKind,
    pub bridges: Vec<(usize, usize)>,
}

impl Ladder {
    pub fn residues(&self) -> impl Iterator<Item = usize> + '_ {
        self.bridges.iter().flat_map(|&(i, j)| [i, j])
    }
}

/// Per-residue structure candidates before priority resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureFlags {
    /// Residues covered by a 3-, 4- and 5-helix.
    pub helix: [Vec<bool>; 3],
    pub isolated_bridge: Vec<bool>,
    pub ladder: Vec<bool>,
    pub turn: Vec<bool>,
    pub bend: Vec<bool>,
    pub ladders: Vec<Ladder>,
    /// Sheet index of each residue that belongs to a ladder.
    pub sheet: Vec<Option<usize>>,
}

/// Groups bridges into ladders: parallel (i, j) continues (i-1, j-1),
/// antiparallel (i, j) continues (i-1, j+1).
pub fn build_ladders(bridges: &[Bridge]) -> Vec<Ladder> {
    let mut sorted = bridges.to_vec();
    sorted.sort_by_key(|b| (b.i, b.j));
    let mut ladder_of: HashMap<(usize, usize, BridgeKind), usize> = HashMap::new();
    let mut ladders: Vec<Ladder> = Vec::new();
    for b in sorted {
        let prev = match b.kind {
            BridgeKind::Parallel => b.j.checked_sub(1).map(|pj| (b.i.wrapping_sub(1), pj)),
            BridgeKind::Antiparallel => Some((b.i.wrapping_sub(1), b.j + 1)),
        };
        let existing = prev.and_then(|(pi, pj)| ladder_of.get(&(pi, pj, b.kind)).copied());
        let id = match existing {
            Some(id) => {
                ladders[id].bridges.push((b.i, b.j));
                id
            }
            None => {
                ladders.push(Ladder {
                    kind: b.kind,
                    bridges: vec![(b.i, b.j)],
                });
                ladders.len() - 1
            }
        };
        ladder_of.insert((b.i, b.j, b.kind), id);
    }
    ladders
}

fn bend_angle(chain: &ProteinChain, i: usize) -> Option<f64> {
    let res = chain.residues();
    let a = res[i].ca - res[i - 2].ca;
    let b = res[i + 2].ca - res[i].ca;
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(a.cross(&b).norm().atan2(a.dot(&b)).to_degrees())
}

pub fn detect_structures(chain: &ProteinChain, turns: &Turns, bridges: &[Bridge]) -> StructureFlags {
    let len = chain.len();
    let breaks = chain.breaks();

    let helix = [3usize, 4, 5].map(|n| {
        let mut v = vec![false; len];
        for i in 1..len {
            if turns.at(n, i - 1) && turns.at(n, i) {
                for flag in v.iter_mut().skip(i).take(n) {
                    *flag = true;
                }
            }
        }
        v
    });

    let mut turn = vec![false; len];
    for n in 3..=5 {
        for i in turns.starts(n) {
            for flag in turn.iter_mut().take(i + n).skip(i + 1) {
                *flag = true;
            }
        }
    }

    let ladders = build_ladders(bridges);
    let mut isolated_bridge = vec![false; len];
    let mut ladder = vec![false; len];
    for l in &ladders {
        if l.bridges.len() == 1 {
            let (i, j) = l.bridges[0];
            isolated_bridge[i] = true;
            isolated_bridge[j] = true;
        } else {
            for r in l.residues() {
                ladder[r] = true;
            }
        }
    }

    // sheets: ladders joined through shared residues
    let mut parent: Vec<usize> = (0..ladders.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut owner: Vec<Option<usize>> = vec![None; len];
    for (id, l) in ladders.iter().enumerate() {
        for r in l.residues() {
            match owner[r] {
                Some(other) => {
                    let (a, b) = (find(&mut parent, other), find(&mut parent, id));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => owner[r] = Some(id),
            }
        }
    }
    let mut sheet_ids: HashMap<usize, usize> = HashMap::new();
    let mut sheet = vec![None; len];
    for r in 0..len {
        if let Some(l) = owner[r] {
            let root = find(&mut parent, l);
            let next = sheet_ids.len();
            sheet[r] = Some(*sheet_ids.entry(root).or_insert(next));
        }
    }

    let mut bend = vec![false; len];
    if len >= 5 {
        for (i, flag) in bend.iter_mut().enumerate().take(len - 2).skip(2) {
            if unbroken(&breaks, i - 2, i + 2) {
                *flag = bend_angle(chain, i).is_some_and(|a| a > BEND_ANGLE);
            }
        }
    }

    StructureFlags {
        helix,
        isolated_bridge,
        ladder,
        turn,
        bend,
        ladders,
        sheet,
    }
}

/// Resolves candidates in the order H, B, E, G, I, T, S; unflagged residues
/// get `None`.
pub fn resolve_tokens(flags: &StructureFlags) -> Vec<SsToken> {
    let len = flags.bend.len();
    let layers: [(&Vec<bool>, SsToken); 7] = [
        (&flags.helix[1], SsToken::AlphaHelix),
        (&flags.isolated_bridge, SsToken::IsolatedBridge),
        (&flags.ladder, SsToken::Strand),
        (&flags.helix[0], SsToken::Helix310),
        (&flags.helix[2], SsToken::PiHelix),
        (&flags.turn, SsToken::Turn),
        (&flags.bend, SsToken::Bend),
    ];
    (0..len)
        .map(|r| {
            layers
                .iter()
                .find(|(v, _)| v[r])
                .map_or(SsToken::None, |&(_, t)| t)
        })
        .collect()
}

/// Everything the assignment computed for one chain.
#[derive(Debug, Clone)]
pub struct Assignment {
    pub hbonds: HBondSet,
    pub turns: Turns,
    pub bridges: Vec<Bridge>,
    pub flags: StructureFlags,
    pub tokens: Vec<SsToken>,
}

/// Full assignment; amide hydrogens are (re-)estimated from the backbone.
pub fn analyze(chain: &ProteinChain) -> Assignment {
    let chain = estimate_hydrogens(chain);
    let breaks = chain.breaks();
    let hbonds = detect_hbonds(&chain, HBOND_THRESHOLD);
    let turns = detect_turns(&hbonds, &breaks);
    let bridges = detect_bridges(&hbonds, &breaks);
    let flags = detect_structures(&chain, &turns, &bridges);
    let tokens = resolve_tokens(&flags);
    Assignment {
        hbonds,
        turns,
        bridges,
        flags,
        tokens,
    }
}

pub fn assign_tokens(chain: &ProteinChain) -> Vec<SsToken> {
    analyze(chain).tokens
}

/// Maximal run of equal tokens, `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub token: SsToken,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

pub fn segment(tokens: &[SsToken]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (i, &t) in tokens.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.token == t => s.end = i,
            _ => out.push(Segment {
                start: i,
                end: i,
                token: t,
            }),
        }
    }
    out
}
