use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("storage error: {0}")]
    Backend(String),
    #[error("event references unknown table or column: {0}")]
    SchemaMismatch(String),
    #[error("update arrived before insert: {0}")]
    OrderViolation(String),
}

/// A parameter or cell value crossing the storage port.
#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl SqlValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            SqlValue::Real(v) => Some(*v),
            SqlValue::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            SqlValue::Int(v) => Some(*v),
            SqlValue::Real(v) => Some(*v as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            SqlValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Option<SqlValue> {
        match value {
            serde_json::Value::Null => Some(SqlValue::Null),
            serde_json::Value::Bool(b) => Some(SqlValue::Int(i64::from(*b))),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(SqlValue::Int(i))
                } else {
                    n.as_f64().map(SqlValue::Real)
                }
            }
            serde_json::Value::String(s) => Some(SqlValue::Text(s.clone())),
            _ => None,
        }
    }
}

pub type Row = BTreeMap<String, SqlValue>;

/// Abstract SQL-capable storage. All tool access goes through parameterized
/// queries on this port; the per-call counter lets tests prove that gated
/// rejections never reach storage.
pub trait StoragePort: Send + Sync {
    /// Run one parameterized statement; returns affected row count.
    fn execute(&self, sql: &str, params: &[SqlValue]) -> Result<usize, StorageError>;

    /// Run a batch of statements (DDL, transactions).
    fn execute_batch(&self, sql: &str) -> Result<(), StorageError>;

    /// Run one parameterized query.
    fn query(&self, sql: &str, params: &[SqlValue]) -> Result<Vec<Row>, StorageError>;

    /// Number of statements that have reached this store since creation.
    fn op_count(&self) -> u64;
}

/// Embedded SQL engine behind the port. An in-memory store serves desk-scale
/// runs; pointing it at a file gives a persistent warehouse.
pub struct SqliteStore {
    conn: Mutex<rusqlite::Connection>,
    ops: AtomicU64,
}

impl SqliteStore {
    pub fn in_memory() -> Result<Self, StorageError> {
        let conn = rusqlite::Connection::open_in_memory().map_err(backend)?;
        Ok(SqliteStore { conn: Mutex::new(conn), ops: AtomicU64::new(0) })
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, StorageError> {
        let conn = rusqlite::Connection::open(path).map_err(backend)?;
        conn.execute_batch("PRAGMA journal_mode=WAL; PRAGMA synchronous=NORMAL;")
            .map_err(backend)?;
        Ok(SqliteStore { conn: Mutex::new(conn), ops: AtomicU64::new(0) })
    }

    fn bump(&self) {
        self.ops.fetch_add(1, Ordering::Relaxed);
    }
}

fn backend(e: rusqlite::Error) -> StorageError {
    StorageError::Backend(e.to_string())
}

fn to_sql(value: &SqlValue) -> rusqlite::types::Value {
    match value {
        SqlValue::Null => rusqlite::types::Value::Null,
        SqlValue::Int(i) => rusqlite::types::Value::Integer(*i),
        SqlValue::Real(f) => rusqlite::types::Value::Real(*f),
        SqlValue::Text(s) => rusqlite::types::Value::Text(s.clone()),
    }
}

impl StoragePort for SqliteStore {
    fn execute(&self, sql: &str, params: &[SqlValue]) -> Result<usize, StorageError> {
        self.bump();
        let conn = self.conn.lock().expect("store lock");
        let mut stmt = conn.prepare_cached(sql).map_err(backend)?;
        let values: Vec<rusqlite::types::Value> = params.iter().map(to_sql).collect();
        stmt.execute(rusqlite::params_from_iter(values)).map_err(backend)
    }

    fn execute_batch(&self, sql: &str) -> Result<(), StorageError> {
        self.bump();
        let conn = self.conn.lock().expect("store lock");
        conn.execute_batch(sql).map_err(backend)
    }

    fn query(&self, sql: &str, params: &[SqlValue]) -> Result<Vec<Row>, StorageError> {
        self.bump();
        let conn = self.conn.lock().expect("store lock");
        let mut stmt = conn.prepare_cached(sql).map_err(backend)?;
        let column_names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let values: Vec<rusqlite::types::Value> = params.iter().map(to_sql).collect();
        let mut rows = stmt.query(rusqlite::params_from_iter(values)).map_err(backend)?;
        let mut out = Vec::new();
        while let Some(row) = rows.next().map_err(backend)? {
            let mut record = Row::new();
            for (i, name) in column_names.iter().enumerate() {
                let value = match row.get_ref(i).map_err(backend)? {
                    rusqlite::types::ValueRef::Null => SqlValue::Null,
                    rusqlite::types::ValueRef::Integer(v) => SqlValue::Int(v),
                    rusqlite::types::ValueRef::Real(v) => SqlValue::Real(v),
                    rusqlite::types::ValueRef::Text(t) => {
                        SqlValue::Text(String::from_utf8_lossy(t).into_owned())
                    }
                    rusqlite::types::ValueRef::Blob(_) => SqlValue::Null,
                };
                record.insert(name.clone(), value);
            }
            out.push(record);
        }
        Ok(out)
    }

    fn op_count(&self) -> u64 {
        self.ops.load(Ordering::Relaxed)
    }
}

/// Count helper used throughout reports and tests.
pub fn count_rows(store: &dyn StoragePort, table: &str) -> Result<u64, StorageError> {
    let rows = store.query(&format!("SELECT COUNT(*) AS n FROM {table}"), &[])?;
    Ok(rows[0]["n"].as_i64().unwrap_or(0) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_values_and_counts_ops() {
        let store = SqliteStore::in_memory().unwrap();
        store.execute_batch("CREATE TABLE t (a TEXT, b REAL, c INTEGER)").unwrap();
        store
            .execute(
                "INSERT INTO t (a, b, c) VALUES (?1, ?2, ?3)",
                &[SqlValue::Text("x".into()), SqlValue::Real(1.5), SqlValue::Int(7)],
            )
            .unwrap();
        let rows = store.query("SELECT a, b, c FROM t", &[]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["a"].as_str(), Some("x"));
        assert_eq!(rows[0]["b"].as_f64(), Some(1.5));
        assert_eq!(rows[0]["c"].as_i64(), Some(7));
        assert_eq!(store.op_count(), 3);
    }
}
