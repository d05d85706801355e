//! SMILES subset parser: organic-subset and bracket atoms, charges, ring
//! closures (digits and %nn), branches, bond symbols `- = # :`, aromatic
//! lowercase atoms, `*` wildcards. Stereo markers (`/ \ @`) are accepted and
//! ignored; implicit hydrogens never become nodes.

use super::{Atom, Bond, BondOrder, MolGraph};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("dangling ring closure {0}")]
    DanglingRingClosure(u32),
    #[error("unknown element symbol '{0}'")]
    UnknownElement(String),
    #[error("unexpected character '{ch}' at byte {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("bond symbol with nothing to bind at byte {0}")]
    LoneBond(usize),
    #[error("conflicting bond orders on ring closure {0}")]
    RingBondConflict(u32),
    #[error("multi-component SMILES; use parse_components")]
    MultiComponent,
}

/// All element symbols we admit inside brackets. Featurization separately
/// buckets rare ones into OTHER; parsing only checks the symbol exists.
pub const PERIODIC: &[&str] = &[
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og", "*",
];

fn lookup(symbol: &str) -> Option<&'static str> {
    PERIODIC.iter().find(|s| **s == symbol).copied()
}

/// Parse a single-component SMILES string into a molecular graph.
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    let mut parts = parse_components(s)?;
    if parts.len() != 1 {
        return Err(SmilesError::MultiComponent);
    }
    Ok(parts.pop().expect("one component"))
}

/// Parse a possibly multi-component SMILES ("A.B") into one graph per
/// component. Dots are separators only at branch depth zero.
pub fn parse_components(s: &str) -> Result<Vec<MolGraph>, SmilesError> {
    if s.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, b) in s.bytes().enumerate() {
        match b {
            b'(' => depth += 1,
            b')' => depth = depth.checked_sub(1).ok_or(SmilesError::UnbalancedParens)?,
            b'.' if depth == 0 => {
                out.push(parse_one(&s[start..i], start)?);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(parse_one(&s[start..], start)?);
    Ok(out)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    offset: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    stack: Vec<Option<usize>>,
    pending: Option<BondOrder>,
    rings: HashMap<u32, (usize, Option<BondOrder>)>,
}

fn parse_one(s: &str, offset: usize) -> Result<MolGraph, SmilesError> {
    if s.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut p = Parser {
        bytes: s.as_bytes(),
        pos: 0,
        offset,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        stack: Vec::new(),
        pending: None,
        rings: HashMap::new(),
    };
    p.run()?;
    if !p.stack.is_empty() {
        return Err(SmilesError::UnbalancedParens);
    }
    if let Some((&digit, _)) = p.rings.iter().min_by_key(|(d, _)| **d) {
        return Err(SmilesError::DanglingRingClosure(digit));
    }
    if p.pending.is_some() {
        return Err(SmilesError::LoneBond(p.offset + p.pos));
    }
    Ok(MolGraph { atoms: p.atoms, bonds: p.bonds, coords: None })
}

impl<'a> Parser<'a> {
    fn run(&mut self) -> Result<(), SmilesError> {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            match b {
                b'(' => {
                    self.stack.push(self.prev);
                    self.pos += 1;
                }
                b')' => {
                    self.prev = self.stack.pop().ok_or(SmilesError::UnbalancedParens)?;
                    self.pos += 1;
                }
                b'-' => {
                    self.pending = Some(BondOrder::Single);
                    self.pos += 1;
                }
                b'=' => {
                    self.pending = Some(BondOrder::Double);
                    self.pos += 1;
                }
                b'#' => {
                    self.pending = Some(BondOrder::Triple);
                    self.pos += 1;
                }
                b':' => {
                    self.pending = Some(BondOrder::Aromatic);
                    self.pos += 1;
                }
                // stereo bond markers act as single bonds
                b'/' | b'\\' => {
                    self.pending = Some(BondOrder::Single);
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    let d = (b - b'0') as u32;
                    self.pos += 1;
                    self.close_or_open_ring(d)?;
                }
                b'%' => {
                    if self.pos + 2 >= self.bytes.len()
                        || !self.bytes[self.pos + 1].is_ascii_digit()
                        || !self.bytes[self.pos + 2].is_ascii_digit()
                    {
                        return Err(SmilesError::UnexpectedChar {
                            ch: '%',
                            pos: self.offset + self.pos,
                        });
                    }
                    let d = (self.bytes[self.pos + 1] - b'0') as u32 * 10
                        + (self.bytes[self.pos + 2] - b'0') as u32;
                    self.pos += 3;
                    self.close_or_open_ring(d)?;
                }
                b'[' => {
                    self.pos += 1;
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom);
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.push_atom(atom);
                }
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let b = self.bytes[self.pos];
        let rest = &self.bytes[self.pos..];
        // Two-letter organic-subset symbols first.
        for (pat, sym) in [("Cl", "Cl"), ("Br", "Br")] {
            if rest.starts_with(pat.as_bytes()) {
                self.pos += 2;
                return Ok(Atom { element: lookup(sym).expect("periodic"), charge: 0, aromatic: false });
            }
        }
        let (sym, aromatic) = match b {
            b'B' => ("B", false),
            b'C' => ("C", false),
            b'N' => ("N", false),
            b'O' => ("O", false),
            b'P' => ("P", false),
            b'S' => ("S", false),
            b'F' => ("F", false),
            b'I' => ("I", false),
            b'b' => ("B", true),
            b'c' => ("C", true),
            b'n' => ("N", true),
            b'o' => ("O", true),
            b'p' => ("P", true),
            b's' => ("S", true),
            b'*' => ("*", false),
            _ => {
                return Err(SmilesError::UnexpectedChar {
                    ch: b as char,
                    pos: self.offset + self.pos,
                })
            }
        };
        self.pos += 1;
        Ok(Atom { element: lookup(sym).expect("periodic"), charge: 0, aromatic })
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        // isotope digits, discarded
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos >= self.bytes.len() {
            return Err(SmilesError::UnexpectedChar { ch: '[', pos: self.offset + self.pos - 1 });
        }
        let b = self.bytes[self.pos];
        let (symbol, aromatic) = if b == b'*' {
            self.pos += 1;
            ("*".to_string(), false)
        } else if b.is_ascii_lowercase() {
            // aromatic bracket atoms: c, n, o, p, s, se, as
            let two = if self.pos + 1 < self.bytes.len() {
                &self.bytes[self.pos..self.pos + 2]
            } else {
                &self.bytes[self.pos..self.pos + 1]
            };
            if two == b"se" || two == b"as" {
                self.pos += 2;
                let mut sym = String::new();
                sym.push(two[0].to_ascii_uppercase() as char);
                sym.push(two[1] as char);
                (sym, true)
            } else if matches!(b, b'b' | b'c' | b'n' | b'o' | b'p' | b's') {
                self.pos += 1;
                ((b.to_ascii_uppercase() as char).to_string(), true)
            } else {
                return Err(SmilesError::UnexpectedChar {
                    ch: b as char,
                    pos: self.offset + self.pos,
                });
            }
        } else if b.is_ascii_uppercase() {
            let mut sym = (b as char).to_string();
            self.pos += 1;
            if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_lowercase() {
                // Greedy two-letter symbol, but only when valid; "[CH4]" must
                // not swallow the hydrogen-count 'H'... lowercase h is not a
                // symbol continuation, uppercase H is handled below.
                let cand = format!("{}{}", sym, self.bytes[self.pos] as char);
                if lookup(&cand).is_some() {
                    sym = cand;
                    self.pos += 1;
                }
            }
            (sym, false)
        } else {
            return Err(SmilesError::UnexpectedChar { ch: b as char, pos: self.offset + self.pos });
        };
        let element =
            lookup(&symbol).ok_or_else(|| SmilesError::UnknownElement(symbol.clone()))?;

        let mut charge: i32 = 0;
        loop {
            if self.pos >= self.bytes.len() {
                return Err(SmilesError::UnbalancedParens);
            }
            match self.bytes[self.pos] {
                b']' => {
                    self.pos += 1;
                    break;
                }
                b'@' => self.pos += 1, // chirality, ignored
                b'H' => {
                    // explicit H count, hydrogens stay implicit
                    self.pos += 1;
                    while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                b'+' | b'-' => {
                    let sign: i32 = if self.bytes[self.pos] == b'+' { 1 } else { -1 };
                    self.pos += 1;
                    let mut mag = 1;
                    if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                        mag = 0;
                        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                            mag = mag * 10 + (self.bytes[self.pos] - b'0') as i32;
                            self.pos += 1;
                        }
                    } else {
                        // ++ / -- forms
                        while self.pos < self.bytes.len()
                            && self.bytes[self.pos] == if sign > 0 { b'+' } else { b'-' }
                        {
                            mag += 1;
                            self.pos += 1;
                        }
                    }
                    charge += sign * mag;
                }
                b':' => {
                    // atom class, discarded
                    self.pos += 1;
                    while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                }
                other => {
                    return Err(SmilesError::UnexpectedChar {
                        ch: other as char,
                        pos: self.offset + self.pos,
                    })
                }
            }
        }
        Ok(Atom { element, charge: charge.clamp(-128, 127) as i8, aromatic })
    }

    fn push_atom(&mut self, atom: Atom) {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = self.pending.take().unwrap_or_else(|| {
                if self.atoms[prev].aromatic && self.atoms[idx].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            });
            self.bonds.push(Bond { a: prev, b: idx, order });
        } else {
            self.pending = None;
        }
        self.prev = Some(idx);
    }

    fn close_or_open_ring(&mut self, digit: u32) -> Result<(), SmilesError> {
        let cur = match self.prev {
            Some(i) => i,
            None => return Err(SmilesError::LoneBond(self.offset + self.pos)),
        };
        let pending = self.pending.take();
        if let Some((other, opened_with)) = self.rings.remove(&digit) {
            let order = match (opened_with, pending) {
                (Some(a), Some(b)) if a != b => return Err(SmilesError::RingBondConflict(digit)),
                (Some(a), _) => a,
                (None, Some(b)) => b,
                (None, None) => {
                    if self.atoms[other].aromatic && self.atoms[cur].aromatic {
                        BondOrder::Aromatic
                    } else {
                        BondOrder::Single
                    }
                }
            };
            self.bonds.push(Bond { a: other, b: cur, order });
        } else {
            self.rings.insert(digit, (cur, pending));
        }
        Ok(())
    }
}
