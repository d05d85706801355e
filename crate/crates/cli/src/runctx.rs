//! Corpus-directory IO and run-manifest emission shared by the subcommands.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use zymebench_core::dataio::{self, Corpus};
use zymebench_core::mat::Mat;

pub const PAIRS_FILE: &str = "pairs.tsv";
pub const FASTA_FILE: &str = "enzymes.fasta";
pub const REACTIONS_FILE: &str = "reactions.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.rztf";
pub const EMBEDDING_IDS_FILE: &str = "embedding_ids.json";
pub const RESIDUE_DIR: &str = "residues";

fn require(path: &Path, producer: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing artifact {}; run `zymebench {producer}` first",
            path.display()
        );
    }
    Ok(())
}

/// Load a corpus directory. With `embeddings` set, pooled rows are attached
/// to every enzyme; per-enzyme residue tensors (embedding + coords) override
/// the pooled row where present.
pub fn load_corpus(dir: &Path, embeddings: bool) -> Result<Corpus> {
    require(&dir.join(PAIRS_FILE), "ingest")?;
    let pairs = dataio::load_pairs(&dir.join(PAIRS_FILE))?;
    let mut enzymes = dataio::load_fasta(&dir.join(FASTA_FILE))?;
    let reactions = dataio::load_reactions(&dir.join(REACTIONS_FILE))?;

    if embeddings {
        let emb_path = dir.join(EMBEDDINGS_FILE);
        let ids_path = dir.join(EMBEDDING_IDS_FILE);
        require(&emb_path, "ingest (with --embeddings)")?;
        require(&ids_path, "ingest (with --embedding-ids)")?;
        let tensor = dataio::read_tensor(&emb_path)?;
        let pooled = tensor.to_mat()?;
        let ids: Vec<String> = serde_json::from_reader(
            std::fs::File::open(&ids_path)
                .with_context(|| format!("open {}", ids_path.display()))?,
        )?;
        if ids.len() != pooled.rows {
            bail!(
                "{} rows in {} but {} ids in {}",
                pooled.rows,
                emb_path.display(),
                ids.len(),
                ids_path.display()
            );
        }
        let index: std::collections::HashMap<&str, usize> =
            ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for rec in enzymes.iter_mut() {
            if let Some(&row) = index.get(rec.id.as_str()) {
                rec.embedding = Some(Mat::from_vec(1, pooled.cols, pooled.row(row).to_vec()));
            }
        }
        let residues = dir.join(RESIDUE_DIR);
        if residues.is_dir() {
            for rec in enzymes.iter_mut() {
                let emb = residues.join(format!("{}.embedding.rztf", rec.id));
                if emb.exists() {
                    rec.embedding = Some(dataio::read_tensor(&emb)?.to_mat()?);
                }
                let coords = residues.join(format!("{}.coords.rztf", rec.id));
                if coords.exists() {
                    let m = dataio::read_tensor(&coords)?.to_mat()?;
                    if m.cols != 3 {
                        bail!("{}: coords must be N x 3", coords.display());
                    }
                    rec.coords =
                        Some((0..m.rows).map(|i| [m.get(i, 0), m.get(i, 1), m.get(i, 2)]).collect());
                }
            }
        }
    }
    Ok(Corpus::resolve(enzymes, reactions, pairs)?)
}

pub fn read_manifest_artifact(path: &Path) -> Result<zymebench_core::SplitManifest> {
    require(path, "split")?;
    Ok(dataio::read_manifest(path)?)
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

#[derive(Serialize)]
struct RunManifest<'a, C: Serialize> {
    subcommand: &'a str,
    config: &'a C,
    config_hash: String,
    git: String,
    tool_version: &'a str,
}

/// Every stage writes one of these next to its main artifact: the resolved
/// configuration (all defaults echoed), its hash, and the tree version.
pub fn write_run_manifest<C: Serialize>(
    out_artifact: &Path,
    subcommand: &str,
    config: &C,
) -> Result<PathBuf> {
    let config_json = serde_json::to_vec(config)?;
    let mut hasher = Sha256::new();
    hasher.update(&config_json);
    let hash = format!("{:x}", hasher.finalize());
    let manifest = RunManifest {
        subcommand,
        config,
        config_hash: hash,
        git: git_describe(),
        tool_version: env!("CARGO_PKG_VERSION"),
    };
    let path = if out_artifact.is_dir() {
        out_artifact.join("run_manifest.json")
    } else {
        let name = out_artifact
            .file_name()
            .map(|n| format!("{}.run.json", n.to_string_lossy()))
            .unwrap_or_else(|| "run_manifest.json".into());
        out_artifact.with_file_name(name)
    };
    let f = std::fs::File::create(&path)
        .with_context(|| format!("create {}", path.display()))?;
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(path)
}

pub fn write_json_pretty<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)
        .with_context(|| format!("create {}", path.display()))?;
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}
