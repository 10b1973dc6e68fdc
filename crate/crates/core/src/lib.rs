//! Vector-based dependency-based compositional semantics.
//!
//! Words get query vectors and answer vectors, fields get a projection matrix
//! and an (approximate) inverse, and DCS trees compose query vectors by
//! addition and linear maps. The crate covers the whole pipeline: CoNLL-U
//! ingestion, path sampling, noise-contrastive training, composition, and
//! evaluation, plus an executable set-theoretic DCS for checking the logic.

pub mod dcs;
pub mod eval;
pub mod model;
pub mod synth;
pub mod train;
pub mod ud;
pub mod vocab;
