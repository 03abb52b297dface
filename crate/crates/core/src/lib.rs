//! Locate potentially vulnerable source-to-sink data flows in C programs and
//! rewrite the guarding code so the flow becomes an actual, ground-truth
//! documented taint-style bug.
//!
//! The pipeline runs in stages over an in-process code property graph:
//!
//! 1. [`frontend`] parses preprocessed C of a defined subset.
//! 2. [`cpg`] builds AST/control-flow/data-flow nodes and edges per function.
//! 3. [`interproc`] adds the call graph, analysis order, and per-function
//!    parameter-modification summaries, folding callee effects back into each
//!    caller's data flow.
//! 4. [`taint`] finds sensitive sinks and traces them backward to
//!    user-controlled sources.
//! 5. [`guards`] enumerates the control flows spanning each data-flow path
//!    and classifies the security checks on them.
//! 6. [`instrument`] picks an applicable rewrite with a seeded RNG and
//!    applies it bytewise, emitting a ground-truth record.
//! 7. [`report`] computes corpus metrics and persists machine-readable JSON.

pub mod cpg;
pub mod frontend;
pub mod guards;
pub mod instrument;
pub mod interproc;
pub mod pipeline;
pub mod report;
pub mod taint;
pub mod verify;

// Modules are declared above in pipeline order; see each module's docs.
