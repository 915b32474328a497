//! Records, relations, predicates and the relational query language.

mod predicate;
mod query;
mod record;
mod relation;
mod value;

pub use predicate::{CmpOp, Compiled, Predicate};
pub use query::{query_eval, Env, QueryExpr};
pub use record::Record;
pub use relation::{Relation, Row};
pub(crate) use relation::positions;
pub use value::{Kind, Value};
