use std::io::{BufRead, Write};

use super::EvalError;
use crate::dcs::{lowest_common_ancestor, reroot, subtree, DcsTree};
use crate::model::{linalg, Model, ModelError};

/// Two marked nodes of a tree and the relation label between them.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationInstance {
    pub tree: DcsTree,
    pub e1: usize,
    pub e2: usize,
    pub label: String,
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = linalg::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

/// Four unit query vectors, concatenated: the subtrees under `e1` and `e2`,
/// then the subtree at their lowest common ancestor re-rooted at `e1` and at
/// `e2`.
pub fn relation_features(model: &Model, inst: &RelationInstance, strict: bool) -> Result<Vec<f64>, ModelError> {
    let tree = &inst.tree;
    let (e1, e2) = (inst.e1, inst.e2);
    assert!(e1 != e2 && e1 < tree.len() && e2 < tree.len(), "e1 and e2 must be distinct nodes");
    let lca = lowest_common_ancestor(tree, e1, e2);
    let (t, old_of_new) = subtree(tree, lca);
    let new_of = |old: usize| old_of_new.iter().position(|&o| o == old).expect("marked nodes lie under their ancestor");
    let blocks = [
        model.compose_query(&subtree(tree, e1).0, strict)?,
        model.compose_query(&subtree(tree, e2).0, strict)?,
        model.compose_query(&reroot(&t, new_of(e1)), strict)?,
        model.compose_query(&reroot(&t, new_of(e2)), strict)?,
    ];
    Ok(blocks.into_iter().flat_map(unit).collect())
}

/// One line per instance: the label, then 1-based `index:value` pairs with
/// zeros omitted.
pub fn export_features<W: Write>(rows: &[(String, Vec<f64>)], mut out: W) -> std::io::Result<()> {
    for (label, feats) in rows {
        let mut line = label.clone();
        for (i, &x) in feats.iter().enumerate() {
            if x != 0.0 {
                line.push_str(&format!(" {}:{}", i + 1, x));
            }
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

/// Parse exported features back into dense vectors of length `dim`.
pub fn parse_features<R: BufRead>(input: R, dim: usize) -> Result<Vec<(String, Vec<f64>)>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| EvalError::Malformed { line: i + 1, reason };
        let mut parts = line.split_whitespace();
        let label = parts.next().expect("non-empty line").to_string();
        let mut v = vec![0.0; dim];
        for p in parts {
            let (idx, val) = p.split_once(':').ok_or_else(|| bad(format!("bad pair {p:?}")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad index {idx:?}")))?;
            if idx == 0 || idx > dim {
                return Err(bad(format!("index {idx} out of range 1..={dim}")));
            }
            v[idx - 1] = val.parse().map_err(|_| bad(format!("bad value {val:?}")))?;
        }
        out.push((label, v));
    }
    Ok(out)
}

/// Instance lines: `label<TAB>e1<TAB>e2<TAB>root<TAB>words<TAB>edges`, the
/// last three columns being a tree line.
pub fn read_relation_instances<R: BufRead>(input: R) -> Result<Vec<RelationInstance>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| EvalError::Malformed { line: i + 1, reason };
        let mut cols = line.splitn(4, '\t');
        let (Some(label), Some(e1), Some(e2), Some(tree)) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(bad("expected label, e1, e2 and a tree line".into()));
        };
        let tree = DcsTree::from_line(tree).map_err(|e| bad(e.to_string()))?;
        let node = |s: &str| -> Result<usize, EvalError> {
            let n: usize = s.parse().map_err(|_| bad(format!("bad node index {s:?}")))?;
            if n >= tree.len() {
                return Err(bad(format!("node {n} outside tree of {} nodes", tree.len())));
            }
            Ok(n)
        };
        let (e1, e2) = (node(e1)?, node(e2)?);
        if e1 == e2 {
            return Err(bad("e1 and e2 must differ".into()));
        }
        out.push(RelationInstance { tree, e1, e2, label: label.to_string() });
    }
    Ok(out)
}

pub fn write_relation_instance(inst: &RelationInstance) -> String {
    format!("{}\t{}\t{}\t{}", inst.label, inst.e1, inst.e2, inst.tree.to_line())
}
