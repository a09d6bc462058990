use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cascade, ObjectId, ObjectInstance, ObjectStore, TypeDef};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

/// On-disk form of a store. Serialized as JSON with sorted keys so repeated
/// saves of one state are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub format_version: u64,
    pub next_oid: u64,
    pub types: Vec<TypeDef>,
    pub objects: Vec<ObjectInstance>,
    #[serde(default)]
    pub cascades: Vec<Cascade>,
    /// Sections owned by layers above the store.
    #[serde(default)]
    pub extensions: BTreeMap<String, serde_json::Value>,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        // Going through `serde_json::Value` sorts every object's keys.
        let tree = serde_json::to_value(self).expect("snapshot is always serializable");
        let mut out = serde_json::to_vec_pretty(&tree).expect("value tree is always serializable");
        out.push(b'\n');
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let tree: serde_json::Value =
            serde_json::from_slice(bytes).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
        let version = tree
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptSnapshot("missing format_version".into()))?;
        if version != FORMAT_VERSION {
            return Err(Error::FormatVersionMismatch { found: version, expected: FORMAT_VERSION });
        }
        serde_json::from_value(tree).map_err(|e| Error::CorruptSnapshot(e.to_string()))
    }
}

impl ObjectStore {
    pub fn to_snapshot(&self) -> Snapshot {
        Snapshot {
            format_version: FORMAT_VERSION,
            next_oid: self.next_oid,
            types: self.types.values().cloned().collect(),
            objects: self.objects.values().cloned().collect(),
            cascades: self.cascades.clone(),
            extensions: BTreeMap::new(),
        }
    }

    pub fn from_snapshot(snapshot: &Snapshot) -> Result<Self> {
        let mut store = ObjectStore::new();
        let mut pending: Vec<&TypeDef> = snapshot.types.iter().collect();
        // Types are stored by name; re-insert them supertypes-first.
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for def in pending {
                if def.supertypes.iter().all(|s| store.types.contains_key(s)) {
                    store.types.insert(def.name.clone(), def.clone());
                } else {
                    rest.push(def);
                }
            }
            if rest.len() == before {
                return Err(Error::CorruptSnapshot(format!("unresolvable supertypes for `{}`", rest[0].name)));
            }
            pending = rest;
        }
        let mut seen = BTreeSet::new();
        for obj in &snapshot.objects {
            if obj.oid.0 >= snapshot.next_oid || !seen.insert(obj.oid) {
                return Err(Error::CorruptSnapshot(format!("bad object id {}", obj.oid)));
            }
            if obj.types.is_empty() {
                return Err(Error::CorruptSnapshot(format!("{} has no type", obj.oid)));
            }
            if let Some(t) = obj.types.iter().find(|t| !store.types.contains_key(*t)) {
                return Err(Error::CorruptSnapshot(format!("{} has unknown type `{t}`", obj.oid)));
            }
            store.objects.insert(obj.oid, obj.clone());
        }
        for obj in &snapshot.objects {
            if let Some(f) = obj.bindings.keys().find(|f| !store.declares(obj.oid, f)) {
                return Err(Error::CorruptSnapshot(format!("{} binds undeclared `{f}`", obj.oid)));
            }
        }
        store.next_oid = snapshot.next_oid;
        store.cascades = snapshot.cascades.clone();
        Ok(store)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot().to_bytes())?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        ObjectStore::from_snapshot(&Snapshot::from_bytes(&bytes)?)
    }

    pub fn max_oid(&self) -> Option<ObjectId> {
        self.objects.keys().next_back().copied()
    }
}
