//! Personalized citation augmentation for scholarly reading.
//!
//! The crate is organised as a pipeline:
//!
//! * [`citeparse`] turns a [`citeparse::DocumentBundle`] into a
//!   [`citeparse::ParsedDocument`] with sentences, inline markers and
//!   reference entries.
//! * [`corpus`] maps reference entries onto canonical [`corpus::PaperId`]s.
//! * [`activity`] is the append-only event log of what the reader opened,
//!   scrolled, saved or deleted, and the state folded from it.
//! * [`augment`] classifies each citation (saved, visited, reencountered,
//!   own, cited by own) and computes reencounter scores.
//! * [`cards`] assembles Paper Cards with cross-document context.
//! * [`strategies`] implements the four citation-selection strategies and
//!   top-k pooling.
//! * [`usage`] aggregates opens, card opens and saves from the event log.
//! * [`engine`] ties everything together behind one facade used by both the
//!   HTTP server and the command-line tool; [`simulate`] drives it from a
//!   scripted session.

pub mod activity;
pub mod augment;
pub mod cards;
pub mod citeparse;
pub mod corpus;
pub mod document;
pub mod engine;
pub mod simulate;
pub mod strategies;
pub mod text;
pub mod usage;

pub use engine::{Engine, EngineError, IngestOutcome};
