use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dcs::{enumerate_paths, Word};
use crate::model::{Model, ModelError};
use crate::train::log_sigmoid;
use crate::ud::{ud_to_dcs, UdSentence, UdToken};

/// A sentence with one blank token and five candidate fillers.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionItem {
    pub sentence: UdSentence,
    /// 0-based index into the sentence tokens.
    pub blank: usize,
    pub choices: Vec<Word>,
    pub answer: usize,
}

#[derive(Serialize, Deserialize)]
struct RawItem {
    tokens: Vec<UdToken>,
    blank: usize,
    choices: Vec<String>,
    answer: usize,
}

impl CompletionItem {
    pub fn to_json(&self) -> String {
        let raw = RawItem {
            tokens: self.sentence.tokens.clone(),
            blank: self.blank,
            choices: self.choices.iter().map(|w| w.to_string()).collect(),
            answer: self.answer,
        };
        serde_json::to_string(&raw).expect("items serialize")
    }
}

/// Read JSON-lines items. Each must have exactly five choices, one blank
/// inside the sentence, and a valid dependency tree.
pub fn read_completion_items<R: BufRead>(input: R) -> Result<Vec<CompletionItem>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EvalError::Malformed { line: i + 1, reason };
        let raw: RawItem = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if raw.choices.len() != 5 {
            return Err(bad(format!("expected 5 choices, found {}", raw.choices.len())));
        }
        if raw.answer >= raw.choices.len() {
            return Err(bad(format!("answer index {} out of range", raw.answer)));
        }
        if raw.blank >= raw.tokens.len() {
            return Err(bad(format!("blank index {} outside sentence", raw.blank)));
        }
        let choices = raw
            .choices
            .iter()
            .map(|c| c.parse::<Word>().map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let sentence = UdSentence { tokens: raw.tokens };
        sentence.validate(i + 1).map_err(|e| bad(e.to_string()))?;
        out.push(CompletionItem { sentence, blank: raw.blank, choices, answer: raw.answer });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CompletionOptions {
    /// Sum `log σ` over paths instead of the weighted mean.
    pub unweighted_sum: bool,
    pub strict: bool,
}

/// Weighted mean of `log σ(score)` over every path ending at the blank, with
/// the candidate's answer vector at the end.
pub fn completion_score(
    model: &Model,
    item: &CompletionItem,
    candidate: &Word,
    opts: CompletionOptions,
) -> Result<f64, EvalError> {
    Ok(score_all(model, item, std::slice::from_ref(candidate), opts)?[0])
}

fn score_all(model: &Model, item: &CompletionItem, candidates: &[Word], opts: CompletionOptions) -> Result<Vec<f64>, EvalError> {
    let conv = ud_to_dcs(&item.sentence).ok_or(EvalError::ConversionFailure)?;
    let blank = conv
        .node_of_token
        .get(item.blank)
        .copied()
        .flatten()
        .ok_or(EvalError::ConversionFailure)?;
    let tree = &conv.tree;
    let paths: Vec<_> = enumerate_paths(tree).into_iter().filter(|p| p.end == blank).collect();
    let total: f64 = paths.iter().map(|p| p.weight).sum();
    candidates
        .iter()
        .map(|c| {
            let mut acc = 0.0;
            for p in &paths {
                let s = model.path_score_with_end(tree, p, c, opts.strict)?;
                let w = if opts.unweighted_sum { 1.0 } else { p.weight };
                acc += w * log_sigmoid(s);
            }
            Ok(if opts.unweighted_sum { acc } else { acc / total })
        })
        .collect::<Result<Vec<f64>, ModelError>>()
        .map_err(EvalError::from)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItemOutcome {
    Correct,
    Wrong,
    /// Several choices share the best score.
    Tie,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionReport {
    pub outcomes: Vec<ItemOutcome>,
    pub correct: usize,
    pub evaluated: usize,
    pub skipped: usize,
}

impl CompletionReport {
    /// Fraction correct among evaluated (non-skipped) items.
    pub fn accuracy(&self) -> f64 {
        if self.evaluated == 0 {
            f64::NAN
        } else {
            self.correct as f64 / self.evaluated as f64
        }
    }
}

/// Score every item; unconvertible items are skipped and counted, ties count
/// as incorrect.
pub fn eval_completion(model: &Model, items: &[CompletionItem], opts: CompletionOptions) -> Result<CompletionReport, EvalError> {
    let mut report = CompletionReport { outcomes: Vec::new(), correct: 0, evaluated: 0, skipped: 0 };
    let mut ties = 0;
    for item in items {
        let scores = match score_all(model, item, &item.choices, opts) {
            Ok(s) => s,
            Err(EvalError::ConversionFailure) => {
                report.skipped += 1;
                report.outcomes.push(ItemOutcome::Skipped);
                continue;
            }
            Err(e) => return Err(e),
        };
        report.evaluated += 1;
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..scores.len()).filter(|&k| scores[k] == best).collect();
        let outcome = if winners.len() > 1 {
            ties += 1;
            ItemOutcome::Tie
        } else if winners[0] == item.answer {
            report.correct += 1;
            ItemOutcome::Correct
        } else {
            ItemOutcome::Wrong
        };
        report.outcomes.push(outcome);
    }
    if ties > 0 {
        log::warn!("{ties} items had tied best scores and count as incorrect");
    }
    if report.skipped > 0 {
        log::warn!("skipped {} items that could not be converted", report.skipped);
    }
    Ok(report)
}
