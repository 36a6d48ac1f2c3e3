//! CDC ingest, operational tables, and the star schema (14 dimensions,
//! 8 facts, 1 bridge), all behind an abstract storage port.

mod ingest;
mod schema;
mod star;
mod store;

pub use ingest::{ingest, IngestReport};
pub use schema::{
    build_schema, ddl_text, fact_tables_for, table_defs, SchemaManifest, TableDef, TableInfo,
    TableKind,
};
pub use star::{refresh_star, StarReport};
pub use store::{count_rows, Row, SqlValue, SqliteStore, StorageError, StoragePort};
