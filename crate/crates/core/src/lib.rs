//! Reachability solvers for broadcast protocols over mobile ad hoc
//! networks.
//!
//! Networks are modeled as labeled graphs whose nodes run a common
//! finite-state process; nodes broadcast messages to their current
//! neighbors and the topology changes spontaneously. The crate decides
//! parameterized reachability of presence/absence constraints and
//! cardinality reachability, and ships a brute-force oracle plus hardness
//! instance generators for cross-validation:
//!
//! - [`model`]: domain types and the operational semantics.
//! - [`lang`]: the process DSL, query parsers, and witness rendering.
//! - [`reach`]: the saturation computation of reachable control states.
//! - [`ccsolve`]: the two-phase set-chain search for full constraints.
//! - [`cardsolve`]: multiset search for cardinality queries.
//! - [`oracle`]: enumerative graph- and labeling-level ground truth.
//! - [`reductions`]: SAT, circuit-value, and 1-safe Petri net encodings.
//! - [`sample`]: seeded random instance generators.

pub mod cardsolve;
pub mod ccsolve;
pub mod ids;
pub mod lang;
pub mod model;
pub mod oracle;
pub mod reach;
pub mod reductions;
pub mod sample;
