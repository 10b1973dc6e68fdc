//! Phrase similarity, relation features and sentence completion.

mod completion;
mod relation;
mod spearman;

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use thiserror::Error;

use crate::dcs::{DcsError, DcsTree, Edge, FieldId, Pos, Word};
use crate::model::{cosine, Model, ModelError};

pub use completion::{
    completion_score, eval_completion, read_completion_items, CompletionItem, CompletionOptions, CompletionReport,
    ItemOutcome,
};
pub use relation::{
    export_features, parse_features, read_relation_instances, relation_features, write_relation_instance,
    RelationInstance,
};
pub use spearman::spearman;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("sentence cannot be converted or has no content word at the blank")]
    ConversionFailure,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tree(#[from] DcsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Phrase shapes with fixed micro-tree templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Construction {
    /// adjective noun
    AN,
    /// modifier-noun head-noun
    NN,
    /// verb object
    VO,
    /// subject verb object
    SVO,
    /// adjective noun verb adjective noun
    ANVAN,
}

impl Construction {
    /// Part of speech of each phrase position.
    pub fn slots(self) -> &'static [Pos] {
        match self {
            Construction::AN => &[Pos::J, Pos::N],
            Construction::NN => &[Pos::N, Pos::N],
            Construction::VO => &[Pos::V, Pos::N],
            Construction::SVO => &[Pos::N, Pos::V, Pos::N],
            Construction::ANVAN => &[Pos::J, Pos::N, Pos::V, Pos::J, Pos::N],
        }
    }

    /// Build the micro tree. Words are given in surface order.
    pub fn tree(self, words: &[Word]) -> Result<DcsTree, DcsError> {
        if words.len() != self.slots().len() {
            return Err(DcsError::Malformed(format!(
                "{self} needs {} words, got {}",
                self.slots().len(),
                words.len()
            )));
        }
        let e = |parent, child, pf: FieldId, cf: FieldId| Edge { parent, child, parent_field: pf, child_field: cf };
        let (arg, subj, comp) = (FieldId::arg(), FieldId::subj(), FieldId::comp());
        let (root, edges) = match self {
            Construction::AN | Construction::NN => (1, vec![e(1, 0, arg.clone(), arg)]),
            Construction::VO => (0, vec![e(0, 1, comp, arg)]),
            Construction::SVO => (1, vec![e(1, 0, subj, arg.clone()), e(1, 2, comp, arg)]),
            Construction::ANVAN => (
                2,
                vec![
                    e(2, 1, subj, arg.clone()),
                    e(1, 0, arg.clone(), arg.clone()),
                    e(2, 4, comp, arg.clone()),
                    e(4, 3, arg.clone(), arg),
                ],
            ),
        };
        DcsTree::new(words.to_vec(), root, edges)
    }

    /// Parse a space-separated phrase. Tokens may be bare lemmas (the
    /// template supplies the part of speech) or `lemma/POS`.
    pub fn parse_phrase(self, phrase: &str) -> Result<DcsTree, DcsError> {
        let tokens: Vec<&str> = phrase.split_whitespace().collect();
        let words = tokens
            .iter()
            .zip(self.slots().iter().chain(std::iter::repeat(&Pos::X)))
            .map(|(tok, &pos)| {
                if tok.contains('/') {
                    tok.parse()
                } else {
                    Ok(Word::new(tok.to_lowercase(), pos))
                }
            })
            .collect::<Result<Vec<Word>, DcsError>>()?;
        self.tree(&words)
    }
}

impl FromStr for Construction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "AN" => Ok(Construction::AN),
            "NN" => Ok(Construction::NN),
            "VO" => Ok(Construction::VO),
            "SVO" => Ok(Construction::SVO),
            "ANVAN" => Ok(Construction::ANVAN),
            _ => Err(format!("unknown construction {s:?}")),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Construction::AN => "AN",
            Construction::NN => "NN",
            Construction::VO => "VO",
            Construction::SVO => "SVO",
            Construction::ANVAN => "ANVAN",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct PhrasePair {
    pub left: DcsTree,
    pub right: DcsTree,
    pub gold: f64,
    pub construction: Construction,
}

/// Cosine of the two composed query vectors.
pub fn phrase_similarity(model: &Model, left: &DcsTree, right: &DcsTree, strict: bool) -> Result<f64, ModelError> {
    let a = model.compose_query(left, strict)?;
    let b = model.compose_query(right, strict)?;
    Ok(cosine(&a, &b))
}

/// Read `construction<TAB>phrase1<TAB>phrase2<TAB>score` rows. Blank lines
/// and `#` comments are skipped.
pub fn read_phrase_pairs<R: BufRead>(input: R) -> Result<Vec<PhrasePair>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| EvalError::Malformed { line: lineno, reason };
        let cols: Vec<&str> = line.split('\t').collect();
        let [c, p1, p2, score] = cols[..] else {
            return Err(bad(format!("expected 4 tab-separated columns, found {}", cols.len())));
        };
        let construction: Construction = c.trim().parse().map_err(bad)?;
        let gold: f64 = score
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad score {score:?}")))?;
        let left = construction.parse_phrase(p1).map_err(|e| bad(e.to_string()))?;
        let right = construction.parse_phrase(p2).map_err(|e| bad(e.to_string()))?;
        out.push(PhrasePair { left, right, gold, construction });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseResult {
    pub construction: Construction,
    pub pairs: usize,
    pub rho: f64,
}

/// Spearman's ρ between gold scores and model similarity, per construction.
/// Zero-variance groups report NaN with a warning.
pub fn eval_phrase_pairs(model: &Model, pairs: &[PhrasePair], strict: bool) -> Result<Vec<PhraseResult>, EvalError> {
    let mut groups: BTreeMap<Construction, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in pairs {
        let sim = phrase_similarity(model, &p.left, &p.right, strict)?;
        let g = groups.entry(p.construction).or_default();
        g.0.push(p.gold);
        g.1.push(sim);
    }
    groups
        .into_iter()
        .map(|(construction, (gold, sims))| {
            let rho = spearman(&gold, &sims)?;
            if rho.is_nan() {
                log::warn!("{construction}: zero variance, correlation undefined");
            }
            Ok(PhraseResult { construction, pairs: gold.len(), rho })
        })
        .collect()
}
