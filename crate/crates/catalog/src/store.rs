//! Directory-per-entry file store.
//!
//! ```text
//! <root>/entries/<sha256(id)>/raw.jsonld
//!                            /meta.json
//!                            /runs/<run_id>/bundle.json, plots/...
//! <root>/tmp/                 staging area, emptied on open
//! ```
//!
//! Every write is staged under `tmp/` and moved into place with a rename,
//! so a crash leaves either the previous state or nothing.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tsflow_core::document::{parse_document, validate, ValidationReport, WorkflowDoc};
use tsflow_core::engine::{execute, EngineError, EngineOptions, RunBundle};
use tsflow_core::vocabulary::load_vocabulary;

use crate::CatalogError;

/// Persisted alongside the raw document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub id: String,
    pub imported_at: DateTime<Utc>,
    /// Digest of the raw text, used to tell re-imports from conflicts.
    pub sha256: String,
    pub runs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub doc: WorkflowDoc,
    pub raw: String,
    pub meta: EntryMeta,
}

/// Listing row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntrySummary {
    pub id: String,
    pub name: Option<String>,
    pub imported_at: DateTime<Utc>,
    pub runs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Imported {
    pub id: String,
    /// False when the identical document was already stored.
    pub created: bool,
    pub report: ValidationReport,
}

pub struct Store {
    root: PathBuf,
    index: RwLock<BTreeMap<String, Arc<CatalogEntry>>>,
    runs: RwLock<HashMap<String, String>>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn storage(path: &Path, e: impl std::fmt::Display) -> CatalogError {
    CatalogError::Storage {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), CatalogError> {
    let mut f = File::create(path).map_err(|e| storage(path, e))?;
    f.write_all(bytes).map_err(|e| storage(path, e))?;
    f.sync_all().map_err(|e| storage(path, e))
}

fn sync_dir(path: &Path) {
    // directory fsync is not supported everywhere; the rename itself is atomic
    if let Ok(d) = File::open(path) {
        let _ = d.sync_all();
    }
}

fn rename(from: &Path, to: &Path) -> Result<(), CatalogError> {
    fs::rename(from, to).map_err(|e| storage(to, e))?;
    if let Some(parent) = to.parent() {
        sync_dir(parent);
    }
    Ok(())
}

fn meta_json(meta: &EntryMeta) -> String {
    serde_json::to_string_pretty(meta).expect("meta serializes") + "\n"
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Store {
    /// Opens or creates a store and loads its index.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, CatalogError> {
        let root = root.into();
        let entries = root.join("entries");
        let tmp = root.join("tmp");
        fs::create_dir_all(&entries).map_err(|e| storage(&entries, e))?;
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| storage(&tmp, e))?;
        }
        fs::create_dir_all(&tmp).map_err(|e| storage(&tmp, e))?;

        let mut index = BTreeMap::new();
        let mut runs = HashMap::new();
        for dir in fs::read_dir(&entries).map_err(|e| storage(&entries, e))? {
            let dir = dir.map_err(|e| storage(&entries, e))?.path();
            let Some(entry) = load_entry(&dir)? else { continue };
            for r in &entry.meta.runs {
                runs.insert(r.clone(), entry.meta.id.clone());
            }
            index.insert(entry.meta.id.clone(), Arc::new(entry));
        }
        Ok(Store {
            root,
            index: RwLock::new(index),
            runs: RwLock::new(runs),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_dir(&self, id: &str) -> PathBuf {
        self.root.join("entries").join(digest(id))
    }

    fn staging(&self) -> Result<PathBuf, CatalogError> {
        let dir = self.root.join("tmp").join(uuid::Uuid::new_v4().simple().to_string());
        fs::create_dir_all(&dir).map_err(|e| storage(&dir, e))?;
        Ok(dir)
    }

    fn entry_lock(&self, id: &str) -> Arc<Mutex<()>> {
        lock(&self.locks).entry(id.to_string()).or_default().clone()
    }

    fn publish(&self, entry: CatalogEntry) {
        let entry = Arc::new(entry);
        self.index
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(entry.meta.id.clone(), entry);
    }

    /// Parses, validates and stores `text`. An identical re-import succeeds
    /// without changes; different content under an existing id needs
    /// `force`, which replaces the entry and drops its runs.
    pub fn import_document(&self, text: &str, force: bool) -> Result<Imported, CatalogError> {
        let doc = parse_document(text).map_err(|e| CatalogError::Invalid(e.to_report()))?;
        let report = validate(&doc, load_vocabulary());
        if !report.valid {
            return Err(CatalogError::Invalid(report));
        }
        let id = doc.id.clone();
        let sha256 = digest(text);

        let guard = self.entry_lock(&id);
        let _held = lock(&guard);
        let previous = self.get(&id);
        if let Some(prev) = &previous {
            if prev.meta.sha256 == sha256 {
                return Ok(Imported { id, created: false, report });
            }
            if !force {
                return Err(CatalogError::Conflict(id));
            }
        }

        let meta = EntryMeta {
            id: id.clone(),
            imported_at: Utc::now(),
            sha256,
            runs: Vec::new(),
        };
        let stage = self.staging()?;
        write_synced(&stage.join("raw.jsonld"), text.as_bytes())?;
        write_synced(&stage.join("meta.json"), meta_json(&meta).as_bytes())?;
        sync_dir(&stage);

        let target = self.entry_dir(&id);
        if let Some(prev) = &previous {
            let old = self.staging()?.join("old");
            rename(&target, &old)?;
            let mut runs = self.runs.write().unwrap_or_else(|e| e.into_inner());
            for r in &prev.meta.runs {
                runs.remove(r);
            }
        }
        rename(&stage, &target)?;
        self.publish(CatalogEntry {
            doc,
            raw: text.to_string(),
            meta,
        });
        Ok(Imported { id, created: true, report })
    }

    pub fn get(&self, id: &str) -> Option<Arc<CatalogEntry>> {
        self.index
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
    }

    pub fn require(&self, id: &str) -> Result<Arc<CatalogEntry>, CatalogError> {
        self.get(id)
            .ok_or_else(|| CatalogError::NotFound(format!("workflow `{id}`")))
    }

    /// Every entry, oldest import first, ties broken by id.
    pub fn entries(&self) -> Vec<Arc<CatalogEntry>> {
        let mut all: Vec<_> = self
            .index
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        all.sort_by(|a, b| {
            (a.meta.imported_at, &a.meta.id).cmp(&(b.meta.imported_at, &b.meta.id))
        });
        all
    }

    pub fn list(&self) -> Vec<EntrySummary> {
        self.entries()
            .iter()
            .map(|e| EntrySummary {
                id: e.meta.id.clone(),
                name: e.doc.name.clone(),
                imported_at: e.meta.imported_at,
                runs: e.meta.runs.clone(),
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Executes the stored document and records the run under the entry.
    /// Nothing is recorded when the run cannot start.
    pub fn run_workflow(
        &self,
        id: &str,
        horizon: usize,
        data_root: &Path,
    ) -> Result<RunBundle, CatalogError> {
        if horizon == 0 {
            return Err(CatalogError::BadRequest("horizon must be at least 1".into()));
        }
        let entry = self.require(id)?;
        let stage = self.staging()?;
        let opts = EngineOptions {
            horizon,
            ..EngineOptions::default()
        };
        let bundle = match execute(&entry.doc, data_root, &stage, opts) {
            Ok(b) => b,
            Err(e) => {
                let _ = fs::remove_dir_all(&stage);
                return Err(match e {
                    EngineError::Input(m) => CatalogError::Input(m),
                    other => CatalogError::Engine(other),
                });
            }
        };

        let guard = self.entry_lock(id);
        let _held = lock(&guard);
        let current = self.require(id)?;
        if current.meta.sha256 != entry.meta.sha256 {
            let _ = fs::remove_dir_all(&stage);
            return Err(CatalogError::Conflict(id.to_string()));
        }
        let runs_dir = self.entry_dir(id).join("runs");
        fs::create_dir_all(&runs_dir).map_err(|e| storage(&runs_dir, e))?;
        rename(&bundle.run_dir(&stage), &runs_dir.join(&bundle.run_id))?;
        let _ = fs::remove_dir_all(&stage);

        let mut meta = current.meta.clone();
        meta.runs.push(bundle.run_id.clone());
        let meta_stage = self.staging()?.join("meta.json");
        write_synced(&meta_stage, meta_json(&meta).as_bytes())?;
        rename(&meta_stage, &self.entry_dir(id).join("meta.json"))?;
        self.runs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(bundle.run_id.clone(), id.to_string());
        self.publish(CatalogEntry {
            doc: current.doc.clone(),
            raw: current.raw.clone(),
            meta,
        });
        Ok(bundle)
    }

    /// The workflow a run belongs to.
    pub fn run_owner(&self, run_id: &str) -> Option<String> {
        self.runs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(run_id)
            .cloned()
    }

    pub fn run_dir(&self, run_id: &str) -> Result<PathBuf, CatalogError> {
        let owner = self
            .run_owner(run_id)
            .ok_or_else(|| CatalogError::NotFound(format!("run `{run_id}`")))?;
        Ok(self.entry_dir(&owner).join("runs").join(run_id))
    }

    /// The stored bundle.json text of a run.
    pub fn run_bundle(&self, run_id: &str) -> Result<String, CatalogError> {
        let path = self.run_dir(run_id)?.join("bundle.json");
        fs::read_to_string(&path).map_err(|e| storage(&path, e))
    }
}

fn load_entry(dir: &Path) -> Result<Option<CatalogEntry>, CatalogError> {
    let meta_path = dir.join("meta.json");
    let raw_path = dir.join("raw.jsonld");
    if !meta_path.is_file() || !raw_path.is_file() {
        return Ok(None);
    }
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| storage(&meta_path, e))?;
    let meta: EntryMeta = serde_json::from_str(&meta_text).map_err(|e| storage(&meta_path, e))?;
    let raw = fs::read_to_string(&raw_path).map_err(|e| storage(&raw_path, e))?;
    if digest(&raw) != meta.sha256 {
        return Err(storage(&raw_path, "content does not match its recorded digest"));
    }
    let doc = parse_document(&raw).map_err(|e| storage(&raw_path, e))?;
    Ok(Some(CatalogEntry { doc, raw, meta }))
}
