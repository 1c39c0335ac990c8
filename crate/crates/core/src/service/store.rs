//! Key-value persistence behind the annotation service.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;

use redb::{Database, TableDefinition};

use super::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Table {
    Projects,
    Triples,
    Evaluators,
    Tasks,
    TaskIndex,
    Annotations,
}

impl Table {
    pub const ALL: [Table; 6] = [
        Table::Projects,
        Table::Triples,
        Table::Evaluators,
        Table::Tasks,
        Table::TaskIndex,
        Table::Annotations,
    ];

    fn definition(self) -> TableDefinition<'static, &'static str, &'static [u8]> {
        TableDefinition::new(match self {
            Table::Projects => "projects",
            Table::Triples => "triples",
            Table::Evaluators => "evaluators",
            Table::Tasks => "tasks",
            Table::TaskIndex => "task_index",
            Table::Annotations => "annotations",
        })
    }
}

/// Puts applied together or not at all.
#[derive(Debug, Clone, Default)]
pub struct WriteBatch {
    pub(crate) puts: Vec<(Table, String, Vec<u8>)>,
}

impl WriteBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, table: Table, key: impl Into<String>, value: Vec<u8>) {
        self.puts.push((table, key.into(), value));
    }

    pub fn is_empty(&self) -> bool {
        self.puts.is_empty()
    }
}

pub trait KvStore: Send + Sync {
    fn get(&self, table: Table, key: &str) -> Result<Option<Vec<u8>>, ServiceError>;
    /// Entries whose key starts with `prefix`, in key order.
    fn scan_prefix(&self, table: Table, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, ServiceError>;
    fn commit(&self, batch: WriteBatch) -> Result<(), ServiceError>;
}

/// Volatile store for tests and throwaway sessions.
#[derive(Debug, Default)]
pub struct MemoryStore {
    data: RwLock<BTreeMap<(Table, String), Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Full copy of the contents, for comparing states.
    pub fn dump(&self) -> BTreeMap<(Table, String), Vec<u8>> {
        self.data.read().expect("store lock").clone()
    }
}

impl KvStore for MemoryStore {
    fn get(&self, table: Table, key: &str) -> Result<Option<Vec<u8>>, ServiceError> {
        Ok(self
            .data
            .read()
            .expect("store lock")
            .get(&(table, key.to_string()))
            .cloned())
    }

    fn scan_prefix(&self, table: Table, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, ServiceError> {
        let data = self.data.read().expect("store lock");
        Ok(data
            .range((table, prefix.to_string())..)
            .take_while(|((t, k), _)| *t == table && k.starts_with(prefix))
            .map(|((_, k), v)| (k.clone(), v.clone()))
            .collect())
    }

    fn commit(&self, batch: WriteBatch) -> Result<(), ServiceError> {
        let mut data = self.data.write().expect("store lock");
        for (table, key, value) in batch.puts {
            data.insert((table, key), value);
        }
        Ok(())
    }
}

/// Embedded transactional store; reads run on MVCC snapshots.
pub struct RedbStore {
    db: Database,
}

fn storage_err(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Storage(e.to_string())
}

impl RedbStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(storage_err)?;
        }
        let db = Database::create(path).map_err(storage_err)?;
        let txn = db.begin_write().map_err(storage_err)?;
        for table in Table::ALL {
            txn.open_table(table.definition()).map_err(storage_err)?;
        }
        txn.commit().map_err(storage_err)?;
        Ok(RedbStore { db })
    }
}

impl KvStore for RedbStore {
    fn get(&self, table: Table, key: &str) -> Result<Option<Vec<u8>>, ServiceError> {
        let txn = self.db.begin_read().map_err(storage_err)?;
        let t = txn.open_table(table.definition()).map_err(storage_err)?;
        Ok(t.get(key).map_err(storage_err)?.map(|v| v.value().to_vec()))
    }

    fn scan_prefix(&self, table: Table, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, ServiceError> {
        let txn = self.db.begin_read().map_err(storage_err)?;
        let t = txn.open_table(table.definition()).map_err(storage_err)?;
        let mut out = Vec::new();
        for entry in t.range(prefix..).map_err(storage_err)? {
            let (k, v) = entry.map_err(storage_err)?;
            if !k.value().starts_with(prefix) {
                break;
            }
            out.push((k.value().to_string(), v.value().to_vec()));
        }
        Ok(out)
    }

    fn commit(&self, batch: WriteBatch) -> Result<(), ServiceError> {
        let txn = self.db.begin_write().map_err(storage_err)?;
        for table in Table::ALL {
            let mut t = txn.open_table(table.definition()).map_err(storage_err)?;
            for (_, key, value) in batch.puts.iter().filter(|(tb, _, _)| *tb == table) {
                t.insert(key.as_str(), value.as_slice()).map_err(storage_err)?;
            }
        }
        txn.commit().map_err(storage_err)
    }
}
