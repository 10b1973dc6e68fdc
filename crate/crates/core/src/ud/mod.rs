//! CoNLL-U ingestion and UD → DCS conversion.

mod conllu;
mod convert;

use thiserror::Error;

pub use conllu::{parse_conllu, write_conllu_sentence, UdSentence, UdToken};
pub use convert::{coarse_pos, ud_to_dcs, upos_for, Converted, RelationRule, RuleTable};

#[derive(Debug, Error)]
pub enum UdError {
    #[error("line {line}: malformed CoNLL-U: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: heads do not form a tree: {reason}")]
    CyclicTree { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
