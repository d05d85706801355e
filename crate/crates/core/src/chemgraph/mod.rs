//! Molecular graphs from SMILES, one-hot atom/bond features, and hashed
//! circular fingerprints as an alternative reaction featurizer.

mod smiles;

pub use smiles::{parse_components, parse_smiles, SmilesError, PERIODIC};

use crate::mat::Mat;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        match self {
            BondOrder::Single => 0,
            BondOrder::Double => 1,
            BondOrder::Triple => 2,
            BondOrder::Aromatic => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: &'static str,
    pub charge: i8,
    pub aromatic: bool,
}

/// Each bond is stored once; `neighbors` mirrors it on query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolGraph {
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    /// Optional conformation, one 3-vector per atom (Angstrom).
    pub coords: Option<Vec<[f64; 3]>>,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, BondOrder)> + '_ {
        self.bonds.iter().filter_map(move |b| {
            if b.a == i {
                Some((b.b, b.order))
            } else if b.b == i {
                Some((b.a, b.order))
            } else {
                None
            }
        })
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }
}

/// Versioned element vocabulary: the 30 elements most common in enzymatic
/// chemistry, everything else lands in the trailing OTHER slot.
pub const ELEMENT_VOCAB_V1: &[&str] = &[
    "H", "C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B", "Si", "Se", "As", "Na", "K", "Mg",
    "Ca", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Mo", "W", "V", "Cd", "Hg", "Li",
];

/// Charge buckets: <= -2, -1, 0, +1, >= +2.
const CHARGE_BUCKETS: usize = 5;

#[derive(Debug, Clone)]
pub struct ElementVocab {
    symbols: Vec<&'static str>,
}

impl ElementVocab {
    pub fn v1() -> Self {
        ElementVocab { symbols: ELEMENT_VOCAB_V1.to_vec() }
    }

    pub fn new(symbols: &[&'static str]) -> Self {
        ElementVocab { symbols: symbols.to_vec() }
    }

    /// Element block width including the OTHER slot.
    pub fn element_width(&self) -> usize {
        self.symbols.len() + 1
    }

    /// Full feature width: elements+OTHER, charge buckets, aromatic flag.
    pub fn feature_width(&self) -> usize {
        self.element_width() + CHARGE_BUCKETS + 1
    }

    fn slot(&self, element: &str) -> usize {
        self.symbols.iter().position(|s| *s == element).unwrap_or(self.symbols.len())
    }
}

fn charge_bucket(charge: i8) -> usize {
    match charge {
        c if c <= -2 => 0,
        -1 => 1,
        0 => 2,
        1 => 3,
        _ => 4,
    }
}

/// One-hot atom features: element block (OTHER absorbs unknowns), charge
/// bucket, aromatic flag. Never fails.
pub fn featurize_atoms(g: &MolGraph, vocab: &ElementVocab) -> Mat {
    let width = vocab.feature_width();
    let mut m = Mat::zeros(g.atoms.len(), width);
    for (i, atom) in g.atoms.iter().enumerate() {
        let row = m.row_mut(i);
        row[vocab.slot(atom.element)] = 1.0;
        row[vocab.element_width() + charge_bucket(atom.charge)] = 1.0;
        if atom.aromatic {
            row[width - 1] = 1.0;
        }
    }
    m
}

/// Fixed-length bit vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    nbits: usize,
    blocks: Vec<u64>,
}

impl Fingerprint {
    pub fn new(nbits: usize) -> Self {
        Fingerprint { nbits, blocks: vec![0; nbits.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.nbits
    }

    pub fn is_empty(&self) -> bool {
        self.nbits == 0
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.nbits);
        self.blocks[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.nbits);
        self.blocks[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn popcount(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn or_with(&mut self, other: &Fingerprint) {
        assert_eq!(self.nbits, other.nbits);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a |= b;
        }
    }

    /// Append `other` after `self`, producing a vector of both lengths.
    pub fn concat(&self, other: &Fingerprint) -> Fingerprint {
        let mut out = Fingerprint::new(self.nbits + other.nbits);
        for i in 0..self.nbits {
            if self.get(i) {
                out.set(i);
            }
        }
        for i in 0..other.nbits {
            if other.get(i) {
                out.set(self.nbits + i);
            }
        }
        out
    }

    pub fn to_f32_vec(&self) -> Vec<f32> {
        (0..self.nbits).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.nbits).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(h: u64, v: u64) -> u64 {
    splitmix64(h ^ v.wrapping_mul(0x2545_F491_4F6C_DD1D))
}

fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| mix(h, b as u64))
}

/// Morgan-style hashed circular fingerprint. The round-0 invariant hashes
/// (element, degree, charge, aromatic); each further round folds in the
/// sorted neighbor invariants together with the bond order. Every invariant
/// from every round sets bit `invariant % nbits`.
pub fn circular_fingerprint(g: &MolGraph, radius: usize, nbits: usize) -> Fingerprint {
    assert!(nbits > 0);
    let mut fp = Fingerprint::new(nbits);
    let n = g.atoms.len();
    let mut inv: Vec<u64> = (0..n)
        .map(|i| {
            let a = &g.atoms[i];
            let mut h = hash_str(a.element);
            h = mix(h, g.degree(i) as u64);
            h = mix(h, a.charge as i64 as u64);
            h = mix(h, a.aromatic as u64);
            h
        })
        .collect();
    for v in &inv {
        fp.set((*v % nbits as u64) as usize);
    }
    for _ in 0..radius {
        let mut next = inv.clone();
        for (i, slot) in next.iter_mut().enumerate() {
            let mut nbrs: Vec<u64> = g
                .neighbors(i)
                .map(|(j, order)| mix(order.index() as u64 + 1, inv[j]))
                .collect();
            nbrs.sort_unstable();
            let mut h = mix(0x517c_c1b7_2722_0a95, inv[i]);
            for v in nbrs {
                h = mix(h, v);
            }
            *slot = h;
        }
        inv = next;
        for v in &inv {
            fp.set((*v % nbits as u64) as usize);
        }
    }
    fp
}

/// Reaction featurizer: OR-fold of substrate fingerprints concatenated with
/// the OR-fold of product fingerprints (2*nbits total).
pub fn reaction_fingerprint(
    substrates: &[MolGraph],
    products: &[MolGraph],
    radius: usize,
    nbits: usize,
) -> Fingerprint {
    assert!(!substrates.is_empty() && !products.is_empty(), "reaction sides must be non-empty");
    let fold = |side: &[MolGraph]| {
        let mut acc = Fingerprint::new(nbits);
        for g in side {
            acc.or_with(&circular_fingerprint(g, radius, nbits));
        }
        acc
    };
    fold(substrates).concat(&fold(products))
}
