//! Incremental relational lenses.
//!
//! A lens relates a database of source tables to a view. Reading goes
//! through `get`; writing a changed view back goes either through the
//! state-based `put`, which recomputes whole tables, or through the
//! incremental `δput`, which turns a small view delta into small table
//! deltas while fetching only the rows that can be affected.

pub mod backend;
pub mod bench;
pub mod delta;
pub mod dsl;
pub mod error;
pub mod fdeps;
pub mod lenses;
pub mod music;
pub mod relalg;

pub use delta::DeltaRelation;
pub use error::{Error, Result};
pub use fdeps::{FunDep, FunDepSet};
pub use relalg::{CmpOp, Kind, Predicate, QueryExpr, Record, Relation, Value};
