//! The 12 parameterized analytics tools.
//!
//! Schemas are projected from the pinned snapshot ([`project_schemas`]);
//! invocation resolves every entity argument through the contract before any
//! SQL runs, builds parameterized queries against the star schema, and wraps
//! the typed result with the entity's domain context and ontology version.

mod catalog;
mod invoke;
mod period;

pub use catalog::{project_schemas, Constraint, ConstraintMode, DomainGroup, ParamSpec, ToolSpec};
pub use invoke::{invoke, ToolError, ToolResult};
pub use period::{parse_period, DateWindow};
