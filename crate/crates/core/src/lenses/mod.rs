//! Typed relational lenses.
//!
//! [`lens_build`] checks a [`LensExpr`] against a source [`Schema`]. The
//! resulting [`TypedLens`] supports the state-based `get`/`put` pair and the
//! incremental `δput`, which works against any [`Fetch`](crate::backend::Fetch)
//! backend.

mod build;
mod incremental;
mod naive;
mod types;

pub use build::{lens_build, JoinVariant, LensExpr, TypedLens};
pub use incremental::{
    drop_delta_put, join_delta_put, lens_delta_put, lens_delta_put_in, rename_delta_put,
    select_delta_put,
};
pub use naive::{
    drop_put, drop_put_bohannon, get_query, join_put, lens_delta_get, lens_delta_put_reference,
    lens_get, lens_put_drop_bohannon, lens_put_naive, rename_put, select_put,
};
pub use types::{RelationType, Schema, Table, Tree};

#[cfg(test)]
mod tests;
