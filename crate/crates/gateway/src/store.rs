//! Directory-backed persistence for an [`Engine`].
//!
//! Every committed state is a pair of files, the documents in the ingestion
//! encoding and everything else as one JSON document, named after the
//! generation that wrote them. `manifest.json` names the current pair with
//! their lengths and SHA-256 digests and is replaced atomically last, so a
//! crash leaves either the old or the new state. Files that do not match the
//! manifest make the store refuse to open.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use docbi_core::mart::{AccessLog, MartEngine};
use docbi_core::user::UserModel;
use docbi_core::warehouse::{from_record, to_record, AttributeKind, Warehouse};
use docbi_core::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: corrupt store file: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
}

impl StoreError {
    /// The file the failure is about.
    pub fn path(&self) -> &Path {
        match self {
            StoreError::Io { path, .. } | StoreError::Corrupt { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FileEntry {
    name: String,
    len: u64,
    sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    generation: u64,
    documents: FileEntry,
    state: FileEntry,
}

#[derive(Serialize)]
struct StateRef<'a> {
    snapshot_id: u64,
    declared: &'a BTreeMap<String, AttributeKind>,
    users: &'a UserModel,
    marts: &'a MartEngine,
    access: &'a AccessLog,
}

#[derive(Deserialize)]
struct State {
    snapshot_id: u64,
    declared: BTreeMap<String, AttributeKind>,
    users: UserModel,
    marts: MartEngine,
    access: AccessLog,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    engine: Engine,
    generation: u64,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn corrupt(path: &Path, reason: impl Into<String>) -> StoreError {
    StoreError::Corrupt {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn is_store_file(name: &str) -> bool {
    (name.starts_with("documents-") && name.ends_with(".jsonl"))
        || (name.starts_with("state-") && name.ends_with(".json"))
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serialized form of an engine: (documents file, state file).
pub fn encode(engine: &Engine) -> (Vec<u8>, Vec<u8>) {
    let mut docs = Vec::new();
    for doc in engine.warehouse().documents() {
        serde_json::to_writer(&mut docs, &to_record(doc)).expect("records serialize");
        docs.push(b'\n');
    }
    let state = StateRef {
        snapshot_id: engine.warehouse().snapshot_id(),
        declared: engine.warehouse().declared_attributes(),
        users: engine.users(),
        marts: engine.marts(),
        access: engine.access_log(),
    };
    let state = serde_json::to_vec(&state).expect("state serializes");
    (docs, state)
}

impl Store {
    /// Opens the store in `dir`, creating an empty one when the directory is
    /// missing or holds no manifest.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = match fs::read(&manifest_path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                let leftovers = fs::read_dir(&dir)
                    .map_err(io_err(&dir))?
                    .filter_map(|e| e.ok())
                    .any(|e| is_store_file(&e.file_name().to_string_lossy()));
                if leftovers {
                    return Err(corrupt(&manifest_path, "missing while store files are present"));
                }
                return Ok(Store {
                    dir,
                    engine: Engine::new(),
                    generation: 0,
                });
            }
            Err(e) => return Err(io_err(&manifest_path)(e)),
        };
        let manifest: Manifest =
            serde_json::from_slice(&raw).map_err(|e| corrupt(&manifest_path, e.to_string()))?;
        if manifest.format != FORMAT_VERSION {
            return Err(corrupt(
                &manifest_path,
                format!("unsupported format version {}", manifest.format),
            ));
        }

        let (docs_path, docs_bytes) = read_checked(&dir, &manifest.documents)?;
        let (state_path, state_bytes) = read_checked(&dir, &manifest.state)?;

        let text = std::str::from_utf8(&docs_bytes).map_err(|e| corrupt(&docs_path, e.to_string()))?;
        let docs = text
            .lines()
            .enumerate()
            .map(|(i, line)| from_record(line).map_err(|e| corrupt(&docs_path, format!("line {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        let state: State =
            serde_json::from_slice(&state_bytes).map_err(|e| corrupt(&state_path, e.to_string()))?;
        let warehouse = Warehouse::from_parts(docs, state.declared, state.snapshot_id)
            .map_err(|e| corrupt(&docs_path, e.to_string()))?;
        Ok(Store {
            dir,
            engine: Engine::from_parts(warehouse, state.users, state.marts, state.access),
            generation: manifest.generation,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Number of committed states so far.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Runs `op` on a copy of the engine and commits the copy to disk. The
    /// in-memory state only changes once the files are durable; a failed
    /// operation or write leaves both untouched.
    pub fn mutate<T>(
        &mut self,
        op: impl FnOnce(&mut Engine) -> Result<T, docbi_core::Error>,
    ) -> Result<T, GatewayError> {
        let mut next = self.engine.clone();
        let out = op(&mut next)?;
        self.commit(&next, self.generation + 1)?;
        self.engine = next;
        self.generation += 1;
        Ok(out)
    }

    fn commit(&self, engine: &Engine, generation: u64) -> Result<(), StoreError> {
        let (docs, state) = encode(engine);
        let docs_name = format!("documents-{generation:010}.jsonl");
        let state_name = format!("state-{generation:010}.json");
        self.write_atomic(&docs_name, &docs)?;
        self.write_atomic(&state_name, &state)?;
        let manifest = Manifest {
            format: FORMAT_VERSION,
            generation,
            documents: FileEntry {
                name: docs_name.clone(),
                len: docs.len() as u64,
                sha256: digest(&docs),
            },
            state: FileEntry {
                name: state_name.clone(),
                len: state.len() as u64,
                sha256: digest(&state),
            },
        };
        let mut raw = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        raw.push(b'\n');
        self.write_atomic(MANIFEST_FILE, &raw)?;
        if let Ok(dir) = fs::File::open(&self.dir) {
            let _ = dir.sync_all();
        }
        self.remove_stale(&[docs_name, state_name]);
        Ok(())
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io_err(&path))?;
        tmp.write_all(bytes).map_err(io_err(&path))?;
        tmp.as_file().sync_all().map_err(io_err(&path))?;
        tmp.persist(&path).map_err(|e| io_err(&path)(e.error))?;
        Ok(())
    }

    fn remove_stale(&self, keep: &[String]) {
        let Ok(entries) = fs::read_dir(&self.dir) else { return };
        for entry in entries.filter_map(|e| e.ok()) {
            let name = entry.file_name().to_string_lossy().into_owned();
            if is_store_file(&name) && !keep.contains(&name) {
                if let Err(e) = fs::remove_file(entry.path()) {
                    log::warn!("could not remove stale store file {name}: {e}");
                }
            }
        }
    }
}

fn read_checked(dir: &Path, entry: &FileEntry) -> Result<(PathBuf, Vec<u8>), StoreError> {
    if entry.name.contains(['/', '\\']) || !is_store_file(&entry.name) {
        return Err(corrupt(&dir.join(MANIFEST_FILE), format!("bad file name {:?}", entry.name)));
    }
    let path = dir.join(&entry.name);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(corrupt(&path, "missing")),
        Err(e) => return Err(io_err(&path)(e)),
    };
    if bytes.len() as u64 != entry.len {
        return Err(corrupt(
            &path,
            format!("expected {} bytes, found {} (truncated?)", entry.len, bytes.len()),
        ));
    }
    if digest(&bytes) != entry.sha256 {
        return Err(corrupt(&path, "checksum mismatch"));
    }
    Ok((path, bytes))
}
