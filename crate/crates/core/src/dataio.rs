//! Corpus artifacts: pair tables, FASTA sequences, reaction tables, the
//! binary tensor container, and split manifests.
//!
//! Loaded tables are immutable; reads of distinct files are thread-safe.

use crate::chemgraph::{self, MolGraph};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    MalformedRow { path: String, line: usize, msg: String },
    #[error("{path}: unknown column '{0}'", .column)]
    UnknownColumn { path: String, column: String },
    #[error("{path}: missing required column '{0}'", .column)]
    MissingColumn { path: String, column: String },
    #[error("record '{id}': empty sequence")]
    EmptySequence { id: String },
    #[error("record '{id}': illegal residue '{ch}'")]
    IllegalResidue { id: String, ch: char },
    #[error("{path}: bad magic (expected RZTF)")]
    BadMagic { path: String },
    #[error("{path}: {msg}")]
    BadTensor { path: String, msg: String },
    #[error("manifest: index {index} appears in both {a} and {b}")]
    OverlappingSplits { index: usize, a: &'static str, b: &'static str },
    #[error("pair ({enzyme}, {reaction}) has conflicting labels")]
    ConflictingLabels { enzyme: String, reaction: String },
    #[error("unresolved {kind} id '{id}' in pair table")]
    UnresolvedId { kind: &'static str, id: String },
    #[error("enzyme '{id}': {what} has {got} rows, sequence has {expected} residues")]
    RowCountMismatch { id: String, what: &'static str, expected: usize, got: usize },
    #[error("smiles for reaction '{id}': {source}")]
    BadSmiles {
        id: String,
        #[source]
        source: chemgraph::SmilesError,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io { path: path.display().to_string(), source }
}

/// Days since 1970-01-01.
pub type EpochDays = i64;

pub fn parse_date(s: &str) -> Option<EpochDays> {
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch");
    Some((d - epoch).num_days())
}

pub fn format_date(days: EpochDays) -> String {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch");
    (epoch + chrono::Duration::days(days)).format("%Y-%m-%d").to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnzymeRecord {
    pub id: String,
    /// Uppercase amino-acid string over the 20 canonical residues plus X.
    pub sequence: String,
    /// Residue coordinates, one 3-vector per residue.
    pub coords: Option<Vec<[f64; 3]>>,
    /// Residue embedding matrix, rows = residues (or a single pre-pooled
    /// row), row width = d_plm.
    pub embedding: Option<crate::mat::Mat>,
}

impl EnzymeRecord {
    pub fn new(id: impl Into<String>, sequence: impl Into<String>) -> Self {
        EnzymeRecord { id: id.into(), sequence: sequence.into(), coords: None, embedding: None }
    }

    /// Coords must have one row per residue; embeddings one row per residue
    /// or a single pre-pooled row.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.sequence.is_empty() {
            return Err(DataError::EmptySequence { id: self.id.clone() });
        }
        let n = self.sequence.len();
        if let Some(coords) = &self.coords {
            if coords.len() != n {
                return Err(DataError::RowCountMismatch {
                    id: self.id.clone(),
                    what: "coords",
                    expected: n,
                    got: coords.len(),
                });
            }
        }
        if let Some(emb) = &self.embedding {
            if emb.rows != n && emb.rows != 1 {
                return Err(DataError::RowCountMismatch {
                    id: self.id.clone(),
                    what: "embedding",
                    expected: n,
                    got: emb.rows,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReactionRecord {
    pub id: String,
    pub substrate_smiles: Vec<String>,
    pub product_smiles: Vec<String>,
    pub substrates: Vec<MolGraph>,
    pub products: Vec<MolGraph>,
    pub date: Option<EpochDays>,
}

impl ReactionRecord {
    /// Deterministic string form: components sorted per side, sides joined
    /// with `>>`. Used by the reaction-similarity split and negative mining.
    pub fn canonical_string(&self) -> String {
        let mut subs = self.substrate_smiles.clone();
        subs.sort();
        let mut prods = self.product_smiles.clone();
        prods.sort();
        format!("{}>>{}", subs.join("."), prods.join("."))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub enzyme: u32,
    pub reaction: u32,
    pub label: u8,
    pub date: Option<EpochDays>,
}

/// Labeled (enzyme, reaction) tuples with interned ids. The unit of splits,
/// training and evaluation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PairSet {
    pub enzyme_ids: Vec<String>,
    pub reaction_ids: Vec<String>,
    pub pairs: Vec<Pair>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn enzyme_id(&self, p: &Pair) -> &str {
        &self.enzyme_ids[p.enzyme as usize]
    }

    pub fn reaction_id(&self, p: &Pair) -> &str {
        &self.reaction_ids[p.reaction as usize]
    }

    pub fn positives(&self) -> impl Iterator<Item = &Pair> {
        self.pairs.iter().filter(|p| p.label == 1)
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "enzyme_id\treaction_id\tlabel\tdate")?;
        for p in &self.pairs {
            let date = p.date.map(format_date).unwrap_or_default();
            writeln!(w, "{}\t{}\t{}\t{}", self.enzyme_id(p), self.reaction_id(p), p.label, date)?;
        }
        Ok(())
    }
}

struct Interner {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    fn new() -> Self {
        Interner { ids: Vec::new(), index: HashMap::new() }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

/// Load a pair table: UTF-8 TSV with a header row naming exactly the columns
/// enzyme_id, reaction_id, label, date (date entries may be empty).
pub fn load_pairs(path: &Path) -> Result<PairSet, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let pstr = path.display().to_string();
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(io_err(path, e)),
        None => {
            return Err(DataError::MalformedRow {
                path: pstr,
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let cols: Vec<&str> = header.trim_end_matches('\n').split('\t').collect();
    const EXPECTED: [&str; 4] = ["enzyme_id", "reaction_id", "label", "date"];
    for c in &cols {
        if !EXPECTED.contains(c) {
            return Err(DataError::UnknownColumn { path: pstr, column: c.to_string() });
        }
    }
    let col_of = |name: &'static str| -> Result<usize, DataError> {
        cols.iter().position(|c| *c == name).ok_or(DataError::MissingColumn {
            path: path.display().to_string(),
            column: name.to_string(),
        })
    };
    let (ce, cr, cl) = (col_of("enzyme_id")?, col_of("reaction_id")?, col_of("label")?);
    let cd = cols.iter().position(|c| *c == "date");

    let mut enzymes = Interner::new();
    let mut reactions = Interner::new();
    let mut pairs = Vec::new();
    let mut seen: HashMap<(u32, u32), u8> = HashMap::new();

    for (lineno, line) in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let row_err = |msg: String| DataError::MalformedRow {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        if fields.len() != cols.len() {
            return Err(row_err(format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let label: u8 = match fields[cl] {
            "0" => 0,
            "1" => 1,
            other => return Err(row_err(format!("label must be 0 or 1, got '{other}'"))),
        };
        let date = match cd.map(|i| fields[i]) {
            None | Some("") => None,
            Some(s) => {
                Some(parse_date(s).ok_or_else(|| row_err(format!("bad date '{s}'")))?)
            }
        };
        let e = enzymes.intern(fields[ce]);
        let r = reactions.intern(fields[cr]);
        if let Some(&prev) = seen.get(&(e, r)) {
            if prev != label {
                return Err(DataError::ConflictingLabels {
                    enzyme: fields[ce].to_string(),
                    reaction: fields[cr].to_string(),
                });
            }
        } else {
            seen.insert((e, r), label);
        }
        pairs.push(Pair { enzyme: e, reaction: r, label, date });
    }
    Ok(PairSet { enzyme_ids: enzymes.ids, reaction_ids: reactions.ids, pairs })
}

const RESIDUES: &str = "ACDEFGHIKLMNPQRSTVWYX";

/// FASTA loader: id is the first whitespace-separated token after '>',
/// sequences are uppercased and folded across lines.
pub fn load_fasta(path: &Path) -> Result<Vec<EnzymeRecord>, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out: Vec<EnzymeRecord> = Vec::new();
    let mut current: Option<(String, String)> = None;

    let flush = |cur: Option<(String, String)>, out: &mut Vec<EnzymeRecord>| {
        if let Some((id, seq)) = cur {
            if seq.is_empty() {
                return Err(DataError::EmptySequence { id });
            }
            out.push(EnzymeRecord::new(id, seq));
        }
        Ok(())
    };

    for line in reader.lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('>') {
            flush(current.take(), &mut out)?;
            let id = rest.split_whitespace().next().unwrap_or("").to_string();
            current = Some((id, String::new()));
        } else {
            let (id, seq) = current.as_mut().ok_or_else(|| DataError::MalformedRow {
                path: path.display().to_string(),
                line: 0,
                msg: "sequence data before first '>' header".into(),
            })?;
            for ch in line.chars() {
                if ch.is_whitespace() {
                    continue;
                }
                let up = ch.to_ascii_uppercase();
                if !RESIDUES.contains(up) {
                    return Err(DataError::IllegalResidue { id: id.clone(), ch });
                }
                seq.push(up);
            }
        }
    }
    flush(current.take(), &mut out)?;
    Ok(out)
}

/// Reaction table: TSV with header reaction_id, smiles[, date]. The smiles
/// column is `subs>>prods` with '.'-separated components per side.
pub fn load_reactions(path: &Path) -> Result<Vec<ReactionRecord>, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let pstr = path.display().to_string();
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(io_err(path, e)),
        None => {
            return Err(DataError::MalformedRow { path: pstr, line: 1, msg: "empty file".into() })
        }
    };
    let cols: Vec<&str> = header.split('\t').collect();
    for c in &cols {
        if !["reaction_id", "smiles", "date"].contains(c) {
            return Err(DataError::UnknownColumn { path: pstr, column: c.to_string() });
        }
    }
    let cid = cols.iter().position(|c| *c == "reaction_id").ok_or(DataError::MissingColumn {
        path: path.display().to_string(),
        column: "reaction_id".into(),
    })?;
    let csm = cols.iter().position(|c| *c == "smiles").ok_or(DataError::MissingColumn {
        path: path.display().to_string(),
        column: "smiles".into(),
    })?;
    let cd = cols.iter().position(|c| *c == "date");

    let mut out = Vec::new();
    for (lineno, line) in lines {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let row_err = |msg: String| DataError::MalformedRow {
            path: path.display().to_string(),
            line: lineno + 1,
            msg,
        };
        if fields.len() != cols.len() {
            return Err(row_err(format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let id = fields[cid].to_string();
        let (subs, prods) = fields[csm]
            .split_once(">>")
            .ok_or_else(|| row_err("smiles must contain '>>'".into()))?;
        if subs.is_empty() || prods.is_empty() {
            return Err(row_err("both reaction sides must be non-empty".into()));
        }
        let date = match cd.map(|i| fields[i]) {
            None | Some("") => None,
            Some(s) => Some(parse_date(s).ok_or_else(|| row_err(format!("bad date '{s}'")))?),
        };
        out.push(parse_reaction(id, subs, prods, date)?);
    }
    Ok(out)
}

pub fn parse_reaction(
    id: String,
    subs: &str,
    prods: &str,
    date: Option<EpochDays>,
) -> Result<ReactionRecord, DataError> {
    let side = |s: &str| -> (Vec<String>, Result<Vec<MolGraph>, chemgraph::SmilesError>) {
        let smiles: Vec<String> = s.split('.').map(str::to_string).collect();
        let graphs = chemgraph::parse_components(s);
        (smiles, graphs)
    };
    let (ss, sg) = side(subs);
    let (ps, pg) = side(prods);
    Ok(ReactionRecord {
        substrates: sg.map_err(|e| DataError::BadSmiles { id: id.clone(), source: e })?,
        products: pg.map_err(|e| DataError::BadSmiles { id: id.clone(), source: e })?,
        substrate_smiles: ss,
        product_smiles: ps,
        id,
        date,
    })
}

// ---------------------------------------------------------------------------
// Tensor container: 4-byte magic, u32-LE header length, UTF-8 JSON header,
// little-endian f32 payload. Round-trips are bit-exact.
// ---------------------------------------------------------------------------

pub const TENSOR_MAGIC: &[u8; 4] = b"RZTF";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub dims: Vec<usize>,
    pub dtype: String,
    pub order: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub payload: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, payload: Vec<f32>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), payload.len(), "dims/payload mismatch");
        TensorFile { dims, payload }
    }

    pub fn from_mat(m: &crate::mat::Mat) -> Self {
        TensorFile::new(vec![m.rows, m.cols], m.data.iter().map(|&v| v as f32).collect())
    }

    pub fn to_mat(&self) -> Result<crate::mat::Mat, DataError> {
        if self.dims.len() != 2 {
            return Err(DataError::BadTensor {
                path: String::new(),
                msg: format!("expected rank-2 tensor, got dims {:?}", self.dims),
            });
        }
        Ok(crate::mat::Mat::from_vec(
            self.dims[0],
            self.dims[1],
            self.payload.iter().map(|&v| v as f64).collect(),
        ))
    }
}

pub fn write_tensor(t: &TensorFile, path: &Path) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let header = TensorHeader {
        dims: t.dims.clone(),
        dtype: "f32".into(),
        order: "row-major".into(),
    };
    let hbytes = serde_json::to_vec(&header)?;
    w.write_all(TENSOR_MAGIC).map_err(|e| io_err(path, e))?;
    w.write_all(&(hbytes.len() as u32).to_le_bytes()).map_err(|e| io_err(path, e))?;
    w.write_all(&hbytes).map_err(|e| io_err(path, e))?;
    for v in &t.payload {
        w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Parse magic and header only; the payload is not touched, so headers of
/// arbitrarily large tensors can be inspected cheaply.
pub fn read_tensor_header(path: &Path) -> Result<TensorHeader, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    read_header_from(&mut r, path)
}

fn read_header_from<R: Read>(r: &mut R, path: &Path) -> Result<TensorHeader, DataError> {
    let pstr = path.display().to_string();
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != TENSOR_MAGIC {
        return Err(DataError::BadMagic { path: pstr });
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|e| io_err(path, e))?;
    let hlen = u32::from_le_bytes(len) as usize;
    let mut hbytes = vec![0u8; hlen];
    r.read_exact(&mut hbytes).map_err(|e| io_err(path, e))?;
    let header: TensorHeader = serde_json::from_slice(&hbytes)?;
    if header.dtype != "f32" {
        return Err(DataError::BadTensor { path: pstr, msg: format!("unsupported dtype {}", header.dtype) });
    }
    if header.order != "row-major" {
        return Err(DataError::BadTensor { path: pstr, msg: format!("unsupported order {}", header.order) });
    }
    Ok(header)
}

pub fn read_tensor(path: &Path) -> Result<TensorFile, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header_from(&mut r, path)?;
    let expected: usize = header.dims.iter().product();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(DataError::BadTensor {
            path: path.display().to_string(),
            msg: format!("payload holds {} bytes, dims {:?} require {}", bytes.len(), header.dims, expected * 4),
        });
    }
    let payload = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(TensorFile { dims: header.dims, payload })
}

/// Stream a rank-2 tensor row by row without loading the whole payload.
pub struct TensorRowReader {
    reader: BufReader<File>,
    pub rows: usize,
    pub cols: usize,
    next_row: usize,
}

impl TensorRowReader {
    pub fn open(path: &Path) -> Result<Self, DataError> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut reader = BufReader::new(file);
        let header = read_header_from(&mut reader, path)?;
        if header.dims.len() != 2 {
            return Err(DataError::BadTensor {
                path: path.display().to_string(),
                msg: format!("row reader needs rank-2 dims, got {:?}", header.dims),
            });
        }
        Ok(TensorRowReader { reader, rows: header.dims[0], cols: header.dims[1], next_row: 0 })
    }

    pub fn next_row(&mut self) -> Result<Option<Vec<f32>>, DataError> {
        if self.next_row >= self.rows {
            return Ok(None);
        }
        let mut bytes = vec![0u8; self.cols * 4];
        self.reader
            .read_exact(&mut bytes)
            .map_err(|e| io_err(Path::new("<tensor stream>"), e))?;
        self.next_row += 1;
        Ok(Some(
            bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Split manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Time,
    EnzymeSim,
    ReactionSim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitParamsRecord {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    pub valid_fraction: f64,
    /// Normalization used for the similarity threshold (always max-length).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
}

/// Disjoint train/valid/test pair-index lists plus the parameters that
/// produced them. Validation indices are always drawn from the train pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub split_kind: SplitKind,
    pub params: SplitParamsRecord,
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    pub fn validate(&self) -> Result<(), DataError> {
        let mut seen: HashMap<usize, &'static str> = HashMap::new();
        for (name, list) in
            [("train", &self.train), ("valid", &self.valid), ("test", &self.test)]
        {
            for &i in list {
                if let Some(prev) = seen.insert(i, name) {
                    return Err(DataError::OverlappingSplits { index: i, a: prev, b: name });
                }
            }
        }
        Ok(())
    }

    /// Train pool = train + valid (validation is sampled from it).
    pub fn train_pool(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.train.iter().chain(&self.valid).copied().collect();
        v.sort_unstable();
        v
    }
}

pub fn write_manifest(m: &SplitManifest, path: &Path) -> Result<(), DataError> {
    m.validate()?;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, m)?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_manifest(path: &Path) -> Result<SplitManifest, DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let m: SplitManifest = serde_json::from_reader(BufReader::new(file))?;
    m.validate()?;
    Ok(m)
}

// ---------------------------------------------------------------------------
// Resolved corpus
// ---------------------------------------------------------------------------

/// Pair table with ids resolved against the enzyme and reaction tables.
/// Immutable and shareable once constructed.
#[derive(Debug)]
pub struct Corpus {
    pub enzymes: Vec<EnzymeRecord>,
    pub reactions: Vec<ReactionRecord>,
    pub pairs: PairSet,
    enzyme_by_id: HashMap<String, usize>,
    reaction_by_id: HashMap<String, usize>,
    /// pairs.enzyme (intern index) -> index into `enzymes`
    pub enzyme_of_intern: Vec<usize>,
    pub reaction_of_intern: Vec<usize>,
}

impl Corpus {
    pub fn resolve(
        enzymes: Vec<EnzymeRecord>,
        reactions: Vec<ReactionRecord>,
        pairs: PairSet,
    ) -> Result<Self, DataError> {
        for e in &enzymes {
            e.validate()?;
        }
        let enzyme_by_id: HashMap<String, usize> =
            enzymes.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();
        let reaction_by_id: HashMap<String, usize> =
            reactions.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let enzyme_of_intern = pairs
            .enzyme_ids
            .iter()
            .map(|id| {
                enzyme_by_id
                    .get(id)
                    .copied()
                    .ok_or_else(|| DataError::UnresolvedId { kind: "enzyme", id: id.clone() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let reaction_of_intern = pairs
            .reaction_ids
            .iter()
            .map(|id| {
                reaction_by_id
                    .get(id)
                    .copied()
                    .ok_or_else(|| DataError::UnresolvedId { kind: "reaction", id: id.clone() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Corpus {
            enzymes,
            reactions,
            pairs,
            enzyme_by_id,
            reaction_by_id,
            enzyme_of_intern,
            reaction_of_intern,
        })
    }

    pub fn enzyme_index(&self, id: &str) -> Option<usize> {
        self.enzyme_by_id.get(id).copied()
    }

    pub fn reaction_index(&self, id: &str) -> Option<usize> {
        self.reaction_by_id.get(id).copied()
    }

    /// Record referenced by a pair's enzyme side.
    pub fn enzyme_of(&self, p: &Pair) -> &EnzymeRecord {
        &self.enzymes[self.enzyme_of_intern[p.enzyme as usize]]
    }

    pub fn reaction_of(&self, p: &Pair) -> &ReactionRecord {
        &self.reactions[self.reaction_of_intern[p.reaction as usize]]
    }

    /// Set of positive (enzyme id, reaction id) keys.
    pub fn positive_keys(&self) -> HashSet<(u32, u32)> {
        self.pairs
            .pairs
            .iter()
            .filter(|p| p.label == 1)
            .map(|p| (p.enzyme, p.reaction))
            .collect()
    }

    pub fn summary(&self) -> CorpusSummary {
        let positives = self.pairs.pairs.iter().filter(|p| p.label == 1).count();
        let unique_enzymes: HashSet<u32> =
            self.pairs.pairs.iter().filter(|p| p.label == 1).map(|p| p.enzyme).collect();
        let unique_reactions: HashSet<u32> =
            self.pairs.pairs.iter().filter(|p| p.label == 1).map(|p| p.reaction).collect();
        CorpusSummary {
            pairs: self.pairs.len(),
            positive_pairs: positives,
            unique_enzymes: unique_enzymes.len(),
            unique_reactions: unique_reactions.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub pairs: usize,
    pub positive_pairs: usize,
    pub unique_enzymes: usize,
    pub unique_reactions: usize,
}
