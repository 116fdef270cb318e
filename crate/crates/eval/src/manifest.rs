//! Reference-set loading and the on-disk layout produced by `genset`:
//! one `.mid` file per piece plus a `manifest.json` describing programs
//! and instrument counts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use amt_eval_core::note::Piece;
use amt_eval_core::rules::{validate_piece, Rules, Violation};
use amt_eval_core::smf::{parse_smf, write_smf, ParseError, WriteError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub programs: Vec<u8>,
    pub instrument_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pieces: Vec<ManifestEntry>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("cannot parse manifest {path}: {source}")]
    BadManifest {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("no reference pieces found in {0}")]
    Empty(PathBuf),
    #[error("reference {file} does not parse: {source}")]
    Parse { file: PathBuf, source: ParseError },
    #[error("reference {file} violates rule(s) {rule_ids:?}: {first}", rule_ids = .violations.iter().map(|v| v.rule.id()).collect::<Vec<_>>(), first = .violations[0])]
    NonCompliant {
        file: PathBuf,
        violations: Vec<Violation>,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: io::Error,
    },
    #[error("cannot serialize piece: {0}")]
    Smf(#[from] WriteError),
}

/// The graded-against ground truth: compliant pieces keyed by piece id.
#[derive(Debug, Clone)]
pub struct ReferenceSet {
    pieces: BTreeMap<String, Piece>,
}

impl ReferenceSet {
    /// Loads every reference piece from a directory. When `manifest.json`
    /// is present it names the pieces; otherwise all `.mid` files are
    /// taken with their file stem as id. Every piece must parse and pass
    /// the default rules.
    pub fn load(dir: &Path) -> Result<Self, LoadError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let file_list: Vec<(String, PathBuf)> = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(|source| LoadError::Io {
                path: manifest_path.clone(),
                source,
            })?;
            let manifest: Manifest =
                serde_json::from_str(&text).map_err(|source| LoadError::BadManifest {
                    path: manifest_path,
                    source,
                })?;
            manifest
                .pieces
                .into_iter()
                .map(|entry| (entry.id, dir.join(entry.file)))
                .collect()
        } else {
            list_midi_files(dir)?
        };
        if file_list.is_empty() {
            return Err(LoadError::Empty(dir.to_path_buf()));
        }

        let rules = Rules::default();
        let mut pieces = BTreeMap::new();
        for (id, path) in file_list {
            let bytes = fs::read(&path).map_err(|source| LoadError::Io {
                path: path.clone(),
                source,
            })?;
            let parsed = parse_smf(&bytes).map_err(|source| LoadError::Parse {
                file: path.clone(),
                source,
            })?;
            let violations = validate_piece(&parsed.piece, &rules);
            if !violations.is_empty() {
                return Err(LoadError::NonCompliant {
                    file: path,
                    violations,
                });
            }
            pieces.insert(id, parsed.piece);
        }
        Ok(Self { pieces })
    }

    pub fn from_pieces(pieces: BTreeMap<String, Piece>) -> Self {
        Self { pieces }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Piece> {
        self.pieces.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Piece)> {
        self.pieces.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.pieces.keys()
    }
}

/// `.mid` files in a directory with their stems, sorted by name.
pub fn list_midi_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, LoadError> {
    let entries = fs::read_dir(dir).map_err(|source| LoadError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| LoadError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("mid") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.push((stem.to_string(), path));
            }
        }
    }
    files.sort();
    Ok(files)
}

/// Writes a generated set as `piece_{seed}_{index}.mid` files plus the
/// manifest, returning the manifest.
pub fn write_set(dir: &Path, seed: u64, pieces: &[Piece]) -> Result<Manifest, LoadError> {
    fs::create_dir_all(dir).map_err(|source| LoadError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(pieces.len());
    for (index, piece) in pieces.iter().enumerate() {
        let id = format!("piece_{seed}_{index}");
        let file = format!("{id}.mid");
        let bytes = write_smf(piece)?;
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|source| LoadError::Write { path, source })?;
        entries.push(ManifestEntry {
            id,
            file,
            programs: piece.programs().collect(),
            instrument_count: piece.tracks.len(),
        });
    }
    let manifest = Manifest { pieces: entries };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|source| LoadError::Write { path, source })?;
    Ok(manifest)
}
