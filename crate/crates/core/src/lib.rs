//! Restricted time-based dynamic controllability (R-TDC) checking for
//! disjunctive temporal networks with uncertainty.
//!
//! [`search::check_rtdc`] decides whether a [`model::Dtnu`] admits an
//! execution strategy that only decides at a finite set of timepoints, and
//! returns that strategy when it does. Child ordering at decision nodes is
//! pluggable ([`ordering`]), including a learned ranking ([`mpnn`]) over the
//! graph encoding in [`encode`].

pub mod dtn;
pub mod encode;
pub mod gen;
pub mod model;
pub mod mpnn;
pub mod ordering;
pub mod propagation;
pub mod search;
pub mod strategy;
pub mod time;

pub use model::{parse_dtnu, serialize_dtnu, Dtnu, ModelError, TpId};
pub use search::{check_rtdc, PruningRules, SearchConfig, SearchReport, Verdict};
pub use strategy::{simulate_execution, Strategy};
