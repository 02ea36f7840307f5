//! Ancestor-linked version tree of worlds.
//!
//! Rows live in an append-mostly `versions.jsonl` log; worlds are stored once
//! per content hash under `blobs/`. The log order, not `created_at`, is the
//! authoritative sequence. An `active` file holds the pointer shared by the
//! CLI and the service.

mod diff;
mod patch;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::world::{validate_world, BranchTag, Finding, WorldState};

pub(crate) use diff::scalars;
pub use patch::{apply_patch, make_patch, ListPatch, WorldPatch};
pub use diff::{diff_worlds, BeliefChange, BeliefChangeKind, EdgeDiff, FamilyDiff, TraitChange, WorldDiff};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VersionSource {
    Ingestion,
    ManualEdit,
    PipelineRun,
    Promotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchPolicy {
    #[default]
    Auto,
    Mainline,
    Shadow,
}

impl std::str::FromStr for BranchPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(BranchPolicy::Auto),
            "mainline" => Ok(BranchPolicy::Mainline),
            "shadow" => Ok(BranchPolicy::Shadow),
            other => Err(format!("unknown branch policy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRow {
    pub id: String,
    pub ancestor_id: Option<String>,
    pub world_id: BranchTag,
    pub source: VersionSource,
    pub created_at: String,
    /// Content hash of the stored world.
    pub world_ref: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VersionError {
    #[error("unknown version `{0}`")]
    UnknownVersion(String),
    #[error("world has {} validation error(s)", .0.len())]
    InvalidWorld(Vec<Finding>),
    #[error("project already has a root; a parent is required")]
    SecondRoot,
    #[error("version `{0}` is not a shadow branch")]
    NotShadow(String),
    #[error("re-parenting `{row}` under `{parent}` would create a cycle")]
    Cycle { row: String, parent: String },
    #[error("operation would leave more than one root")]
    MultiRoot,
    #[error("root `{0}` has several children and cannot be deleted")]
    RootHasChildren(String),
    #[error("storage error: {0}")]
    Io(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl VersionError {
    /// True for violations of the tree rules (as opposed to lookups or IO).
    pub fn is_conflict(&self) -> bool {
        matches!(
            self,
            VersionError::SecondRoot
                | VersionError::NotShadow(_)
                | VersionError::Cycle { .. }
                | VersionError::MultiRoot
                | VersionError::RootHasChildren(_)
        )
    }
}

impl From<std::io::Error> for VersionError {
    fn from(e: std::io::Error) -> Self {
        VersionError::Io(e.to_string())
    }
}

/// A project's version tree, optionally backed by a directory.
#[derive(Debug, Clone, Default)]
pub struct VersionStore {
    dir: Option<PathBuf>,
    rows: Vec<VersionRow>,
    blobs: BTreeMap<String, WorldState>,
    active: Option<String>,
    next_seq: u64,
}

const LOG_FILE: &str = "versions.jsonl";
const ACTIVE_FILE: &str = "active";
const BLOB_DIR: &str = "blobs";
const SEQ_FILE: &str = "next_seq";

impl VersionStore {
    pub fn in_memory() -> Self {
        Self {
            next_seq: 1,
            ..Default::default()
        }
    }

    /// Opens (or initialises) a project directory.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, VersionError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(dir.join(BLOB_DIR))?;
        let mut store = Self {
            dir: Some(dir.clone()),
            next_seq: 1,
            ..Default::default()
        };
        let log = dir.join(LOG_FILE);
        if log.exists() {
            for (n, line) in fs::read_to_string(&log)?.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let row: VersionRow = serde_json::from_str(line)
                    .map_err(|e| VersionError::Corrupt(format!("{LOG_FILE}:{}: {e}", n + 1)))?;
                store.bump_seq(&row.id);
                store.rows.push(row);
            }
        }
        for row in &store.rows {
            if store.blobs.contains_key(&row.world_ref) {
                continue;
            }
            let path = dir.join(BLOB_DIR).join(format!("{}.json", row.world_ref));
            let text = fs::read_to_string(&path)
                .map_err(|e| VersionError::Corrupt(format!("blob {}: {e}", row.world_ref)))?;
            let world = WorldState::from_json(&text).map_err(|e| VersionError::Corrupt(e.to_string()))?;
            store.blobs.insert(row.world_ref.clone(), world);
        }
        let seq = dir.join(SEQ_FILE);
        if seq.exists() {
            if let Ok(n) = fs::read_to_string(seq)?.trim().parse::<u64>() {
                store.next_seq = store.next_seq.max(n);
            }
        }
        let active = dir.join(ACTIVE_FILE);
        if active.exists() {
            let id = fs::read_to_string(active)?.trim().to_string();
            if store.row(&id).is_some() {
                store.active = Some(id);
            }
        }
        Ok(store)
    }

    fn bump_seq(&mut self, id: &str) {
        if let Some(n) = id.strip_prefix('v').and_then(|s| s.parse::<u64>().ok()) {
            self.next_seq = self.next_seq.max(n + 1);
        }
    }

    pub fn rows(&self) -> &[VersionRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: &str) -> Option<&VersionRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn root(&self) -> Option<&VersionRow> {
        self.rows.iter().find(|r| r.ancestor_id.is_none())
    }

    pub fn children(&self, id: &str) -> Vec<&VersionRow> {
        self.rows
            .iter()
            .filter(|r| r.ancestor_id.as_deref() == Some(id))
            .collect()
    }

    pub fn active(&self) -> Option<&VersionRow> {
        self.active.as_deref().and_then(|id| self.row(id))
    }

    pub fn world(&self, id: &str) -> Result<&WorldState, VersionError> {
        let row = self.require(id)?;
        self.blobs
            .get(&row.world_ref)
            .ok_or_else(|| VersionError::Corrupt(format!("missing blob {}", row.world_ref)))
    }

    fn require(&self, id: &str) -> Result<&VersionRow, VersionError> {
        self.row(id).ok_or_else(|| VersionError::UnknownVersion(id.to_string()))
    }

    /// Ancestor chain from `id` (exclusive) up to the root.
    pub fn ancestors(&self, id: &str) -> Vec<&VersionRow> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut cur = self.row(id).and_then(|r| r.ancestor_id.as_deref());
        while let Some(pid) = cur {
            if !seen.insert(pid) {
                break;
            }
            match self.row(pid) {
                Some(r) => {
                    out.push(r);
                    cur = r.ancestor_id.as_deref();
                }
                None => break,
            }
        }
        out
    }

    pub fn set_active(&mut self, id: &str) -> Result<(), VersionError> {
        self.require(id)?;
        self.active = Some(id.to_string());
        self.persist_active()
    }

    /// Appends a new row. Under [`BranchPolicy::Auto`] counterfactual results
    /// land on a shadow branch and everything else inherits the parent's tag;
    /// a root is always factual.
    pub fn create_version(
        &mut self,
        parent: Option<&str>,
        world: &WorldState,
        source: VersionSource,
        policy: BranchPolicy,
        counterfactual: bool,
    ) -> Result<VersionRow, VersionError> {
        let report = validate_world(world);
        if !report.is_valid() {
            return Err(VersionError::InvalidWorld(report.errors));
        }
        let parent_tag = match parent {
            Some(pid) => Some(self.require(pid)?.world_id),
            None if !self.rows.is_empty() => return Err(VersionError::SecondRoot),
            None => None,
        };
        let tag = match policy {
            BranchPolicy::Mainline => BranchTag::Factual,
            BranchPolicy::Shadow => BranchTag::Shadow,
            BranchPolicy::Auto if counterfactual => BranchTag::Shadow,
            BranchPolicy::Auto => parent_tag.unwrap_or(BranchTag::Factual),
        };
        self.insert_row(parent.map(str::to_string), world, tag, source)
    }

    fn insert_row(
        &mut self,
        parent: Option<String>,
        world: &WorldState,
        tag: BranchTag,
        source: VersionSource,
    ) -> Result<VersionRow, VersionError> {
        let mut stored = world.clone();
        stored.world_id = tag;
        let hash = stored.content_hash();
        self.write_blob(&hash, &stored)?;
        self.blobs.entry(hash.clone()).or_insert(stored);

        let row = VersionRow {
            id: format!("v{:04}", self.next_seq),
            ancestor_id: parent,
            world_id: tag,
            source,
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            world_ref: hash,
        };
        self.next_seq += 1;
        if let Some(dir) = &self.dir {
            // Ids are never reused, even after the highest row is deleted.
            atomic_write(&dir.join(SEQ_FILE), self.next_seq.to_string().as_bytes())?;
        }
        self.append_log(&row)?;
        self.rows.push(row.clone());
        self.active = Some(row.id.clone());
        self.persist_active()?;
        Ok(row)
    }

    /// Copies a shadow onto a fresh factual row parented to the shadow's
    /// nearest factual ancestor. The shadow row is retained.
    pub fn promote_branch(&mut self, shadow_id: &str) -> Result<VersionRow, VersionError> {
        let row = self.require(shadow_id)?.clone();
        if row.world_id != BranchTag::Shadow {
            return Err(VersionError::NotShadow(shadow_id.to_string()));
        }
        let parent = self
            .ancestors(shadow_id)
            .into_iter()
            .find(|r| r.world_id == BranchTag::Factual)
            .map(|r| r.id.clone())
            .unwrap_or_else(|| row.id.clone());
        let world = self.world(shadow_id)?.clone();
        self.insert_row(Some(parent), &world, BranchTag::Factual, VersionSource::Promotion)
    }

    /// Moves `id` under `new_parent`; `None` makes it the root, which is only
    /// allowed when it already is the root.
    pub fn reparent(&mut self, id: &str, new_parent: Option<&str>) -> Result<(), VersionError> {
        let row = self.require(id)?.clone();
        match new_parent {
            None => {
                if row.ancestor_id.is_some() {
                    return Err(VersionError::MultiRoot);
                }
                return Ok(());
            }
            Some(pid) => {
                self.require(pid)?;
                if pid == id || self.ancestors(pid).iter().any(|r| r.id == id) {
                    return Err(VersionError::Cycle {
                        row: id.to_string(),
                        parent: pid.to_string(),
                    });
                }
                let pos = self.rows.iter().position(|r| r.id == id).expect("row exists");
                self.rows[pos].ancestor_id = Some(pid.to_string());
            }
        }
        self.rewrite_log()
    }

    /// Removes a row and re-parents its children to its ancestor. A root can
    /// be removed only when it has at most one child, which becomes the root.
    pub fn delete_version(&mut self, id: &str) -> Result<(), VersionError> {
        let row = self.require(id)?.clone();
        let children: Vec<String> = self.children(id).iter().map(|r| r.id.clone()).collect();
        if row.ancestor_id.is_none() && children.len() > 1 {
            return Err(VersionError::RootHasChildren(id.to_string()));
        }
        for r in self.rows.iter_mut() {
            if r.ancestor_id.as_deref() == Some(id) {
                r.ancestor_id = row.ancestor_id.clone();
            }
        }
        self.rows.retain(|r| r.id != id);
        if !self.rows.iter().any(|r| r.world_ref == row.world_ref) {
            self.blobs.remove(&row.world_ref);
        }
        if self.active.as_deref() == Some(id) {
            self.active = row
                .ancestor_id
                .clone()
                .or_else(|| children.first().cloned());
        }
        self.rewrite_log()?;
        self.persist_active()
    }

    pub fn diff_versions(&self, a: &str, b: &str) -> Result<WorldDiff, VersionError> {
        Ok(diff_worlds(self.world(a)?, self.world(b)?))
    }

    /// One JSON object per row, in log order.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(r).expect("row serializes"));
            out.push('\n');
        }
        out
    }

    fn write_blob(&self, hash: &str, world: &WorldState) -> Result<(), VersionError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(BLOB_DIR).join(format!("{hash}.json"));
        if !path.exists() {
            atomic_write(&path, world.to_json_pretty().as_bytes())?;
        }
        Ok(())
    }

    fn append_log(&self, row: &VersionRow) -> Result<(), VersionError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(LOG_FILE))?;
        writeln!(f, "{}", serde_json::to_string(row).expect("row serializes"))?;
        Ok(())
    }

    fn rewrite_log(&self) -> Result<(), VersionError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        atomic_write(&dir.join(LOG_FILE), self.export_jsonl().as_bytes())
    }

    fn persist_active(&self) -> Result<(), VersionError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(ACTIVE_FILE);
        match &self.active {
            Some(id) => atomic_write(&path, id.as_bytes()),
            None => {
                if path.exists() {
                    fs::remove_file(path)?;
                }
                Ok(())
            }
        }
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), VersionError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Entity;

    fn world(n: usize) -> WorldState {
        WorldState {
            entities: (0..n).map(|i| Entity::new(format!("ENT_{i}"))).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn root_then_branch_policies() {
        let mut s = VersionStore::in_memory();
        let root = s
            .create_version(None, &world(1), VersionSource::Ingestion, BranchPolicy::Auto, false)
            .unwrap();
        assert_eq!(root.world_id, BranchTag::Factual);
        assert_eq!(
            s.create_version(None, &world(1), VersionSource::Ingestion, BranchPolicy::Auto, false),
            Err(VersionError::SecondRoot)
        );
        let cf = s
            .create_version(Some(&root.id), &world(2), VersionSource::PipelineRun, BranchPolicy::Auto, true)
            .unwrap();
        assert_eq!(cf.world_id, BranchTag::Shadow);
        assert_eq!(cf.ancestor_id.as_deref(), Some(root.id.as_str()));
        let main = s
            .create_version(Some(&root.id), &world(2), VersionSource::PipelineRun, BranchPolicy::Mainline, true)
            .unwrap();
        assert_eq!(main.world_id, BranchTag::Factual);
        let child_of_shadow = s
            .create_version(Some(&cf.id), &world(2), VersionSource::ManualEdit, BranchPolicy::Auto, false)
            .unwrap();
        assert_eq!(child_of_shadow.world_id, BranchTag::Shadow);
    }

    #[test]
    fn promote_twice_gives_two_factual_rows() {
        let mut s = VersionStore::in_memory();
        let root = s
            .create_version(None, &world(1), VersionSource::Ingestion, BranchPolicy::Auto, false)
            .unwrap();
        let sh = s
            .create_version(Some(&root.id), &world(3), VersionSource::PipelineRun, BranchPolicy::Auto, true)
            .unwrap();
        let p1 = s.promote_branch(&sh.id).unwrap();
        let p2 = s.promote_branch(&sh.id).unwrap();
        assert_ne!(p1.id, p2.id);
        assert_eq!(p1.world_id, BranchTag::Factual);
        assert_eq!(p1.ancestor_id.as_deref(), Some(root.id.as_str()));
        assert!(s.row(&sh.id).is_some());
        assert_eq!(s.world(&p1.id).unwrap().entities.len(), 3);
        assert!(s.diff_versions(&sh.id, &p1.id).unwrap().only_branch_tags());
        assert_eq!(s.promote_branch(&root.id), Err(VersionError::NotShadow(root.id.clone())));
    }

    #[test]
    fn reparent_and_delete_rules() {
        let mut s = VersionStore::in_memory();
        let p = s
            .create_version(None, &world(1), VersionSource::Ingestion, BranchPolicy::Auto, false)
            .unwrap();
        let a = s
            .create_version(Some(&p.id), &world(1), VersionSource::ManualEdit, BranchPolicy::Auto, false)
            .unwrap();
        let c = s
            .create_version(Some(&a.id), &world(1), VersionSource::ManualEdit, BranchPolicy::Auto, false)
            .unwrap();
        assert!(matches!(s.reparent(&a.id, Some(&c.id)), Err(VersionError::Cycle { .. })));
        assert_eq!(s.reparent(&a.id, None), Err(VersionError::MultiRoot));
        s.delete_version(&a.id).unwrap();
        assert_eq!(s.row(&c.id).unwrap().ancestor_id.as_deref(), Some(p.id.as_str()));
        s.delete_version(&p.id).unwrap();
        assert!(s.row(&c.id).unwrap().ancestor_id.is_none());
    }

    #[test]
    fn invalid_world_is_rejected() {
        let mut s = VersionStore::in_memory();
        let mut w = world(1);
        w.entities.push(Entity::new("ENT_0"));
        assert!(matches!(
            s.create_version(None, &w, VersionSource::Ingestion, BranchPolicy::Auto, false),
            Err(VersionError::InvalidWorld(_))
        ));
    }

    #[test]
    fn directory_store_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let (root_id, child_id) = {
            let mut s = VersionStore::open(dir.path()).unwrap();
            let r = s
                .create_version(None, &world(1), VersionSource::Ingestion, BranchPolicy::Auto, false)
                .unwrap();
            let c = s
                .create_version(Some(&r.id), &world(2), VersionSource::PipelineRun, BranchPolicy::Auto, true)
                .unwrap();
            s.create_version(Some(&r.id), &world(1), VersionSource::ManualEdit, BranchPolicy::Auto, false)
                .unwrap();
            (r.id, c.id)
        };
        let mut s = VersionStore::open(dir.path()).unwrap();
        assert_eq!(s.rows().len(), 3);
        assert_eq!(s.active().unwrap().id, "v0003");
        assert_eq!(s.world(&child_id).unwrap().world_id, BranchTag::Shadow);
        // identical worlds share one blob
        let blobs = fs::read_dir(dir.path().join(BLOB_DIR)).unwrap().count();
        assert_eq!(blobs, 2);
        s.delete_version("v0003").unwrap();
        let s = VersionStore::open(dir.path()).unwrap();
        assert_eq!(s.rows().len(), 2);
        assert_eq!(s.active().unwrap().id, root_id);
        let next = {
            let mut s = s;
            s.create_version(Some(&root_id), &world(4), VersionSource::ManualEdit, BranchPolicy::Auto, false)
                .unwrap()
        };
        assert_eq!(next.id, "v0004");
    }
}
