use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::sim::{CdcOp, CdcRecord, EventLog};

use super::schema::{table_defs, TableDef};
use super::store::{SqlValue, StorageError, StoragePort};

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub rows_by_table: BTreeMap<String, u64>,
    pub total_rows: u64,
    pub updates_applied: u64,
    pub elapsed_ms: u64,
}

/// Apply a CDC stream in order. Inserts create rows; updates patch existing
/// rows by primary key. An update whose target row does not exist yet is an
/// ordering violation, and any reference to an unknown table or column is a
/// schema mismatch; both abort the ingest.
pub fn ingest(events: &EventLog, store: &dyn StoragePort) -> Result<IngestReport, StorageError> {
    let started = Instant::now();
    let defs: BTreeMap<&str, TableDef> = table_defs().into_iter().map(|d| (d.name, d)).collect();
    let mut rows_by_table: BTreeMap<String, u64> = BTreeMap::new();
    let mut updates_applied = 0u64;

    store.execute_batch("BEGIN")?;
    let outcome = (|| {
        for record in &events.records {
            let def = defs
                .get(record.table.as_str())
                .ok_or_else(|| StorageError::SchemaMismatch(format!("unknown table '{}'", record.table)))?;
            for key in record.payload.keys() {
                if !def.has_column(key) {
                    return Err(StorageError::SchemaMismatch(format!(
                        "table '{}' has no column '{key}'",
                        record.table
                    )));
                }
            }
            match record.op {
                CdcOp::Insert => {
                    apply_insert(store, def, record)?;
                    *rows_by_table.entry(record.table.clone()).or_insert(0) += 1;
                }
                CdcOp::Update => {
                    apply_update(store, def, record)?;
                    updates_applied += 1;
                }
            }
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => store.execute_batch("COMMIT")?,
        Err(e) => {
            store.execute_batch("ROLLBACK")?;
            return Err(e);
        }
    }

    Ok(IngestReport {
        total_rows: rows_by_table.values().sum(),
        rows_by_table,
        updates_applied,
        elapsed_ms: started.elapsed().as_millis() as u64,
    })
}

fn params_of(record: &CdcRecord, keys: &[&String]) -> Result<Vec<SqlValue>, StorageError> {
    keys.iter()
        .map(|k| {
            SqlValue::from_json(&record.payload[k.as_str()]).ok_or_else(|| {
                StorageError::SchemaMismatch(format!("unsupported value for column '{k}' in '{}'", record.table))
            })
        })
        .collect()
}

fn apply_insert(store: &dyn StoragePort, def: &TableDef, record: &CdcRecord) -> Result<(), StorageError> {
    let keys: Vec<&String> = record.payload.keys().collect();
    let columns: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    let placeholders: Vec<String> = (1..=keys.len()).map(|i| format!("?{i}")).collect();
    let sql = format!(
        "INSERT INTO {} ({}) VALUES ({})",
        def.name,
        columns.join(", "),
        placeholders.join(", ")
    );
    store.execute(&sql, &params_of(record, &keys)?)?;
    Ok(())
}

fn apply_update(store: &dyn StoragePort, def: &TableDef, record: &CdcRecord) -> Result<(), StorageError> {
    if def.primary_key.is_empty() {
        return Err(StorageError::SchemaMismatch(format!(
            "table '{}' does not accept updates",
            def.name
        )));
    }
    let set_keys: Vec<&String> = record
        .payload
        .keys()
        .filter(|k| !def.primary_key.contains(&k.as_str()))
        .collect();
    let pk_keys: Vec<&String> = record
        .payload
        .keys()
        .filter(|k| def.primary_key.contains(&k.as_str()))
        .collect();
    if pk_keys.len() != def.primary_key.len() {
        return Err(StorageError::SchemaMismatch(format!(
            "update on '{}' must carry its full primary key",
            def.name
        )));
    }
    let mut assignments = Vec::new();
    let mut predicates = Vec::new();
    for (i, k) in set_keys.iter().enumerate() {
        assignments.push(format!("{k} = ?{}", i + 1));
    }
    for (i, k) in pk_keys.iter().enumerate() {
        predicates.push(format!("{k} = ?{}", set_keys.len() + i + 1));
    }
    let sql = format!(
        "UPDATE {} SET {} WHERE {}",
        def.name,
        assignments.join(", "),
        predicates.join(" AND ")
    );
    let mut params = params_of(record, &set_keys)?;
    params.extend(params_of(record, &pk_keys)?);
    let affected = store.execute(&sql, &params)?;
    if affected == 0 {
        return Err(StorageError::OrderViolation(format!(
            "update for missing row in '{}' ({:?})",
            def.name,
            pk_keys.iter().map(|k| &record.payload[k.as_str()]).collect::<Vec<_>>()
        )));
    }
    Ok(())
}
