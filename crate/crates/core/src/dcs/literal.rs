use std::collections::HashMap;

use super::{DcsError, DcsTree, Edge, FieldId, Word};

/// Parse the ad-hoc tree syntax used on the command line.
///
/// Edges are written parent first: `ban/V -COMP:ARG-> drug/N` makes `drug/N` a
/// child of `ban/V` with `COMP` on the parent end and `ARG` on the child end.
/// Arrows chain (`a/N -ARG:COMP-> b/V -SUBJ:ARG-> c/N`) and several chains are
/// separated by `;` or `,`. A node mentioned twice is the same node; append
/// `#tag` (e.g. `man/N#2`) to make distinct nodes with the same word. A bare
/// word is a single-node tree. The root is the one node that is nobody's child.
pub fn parse_tree_literal(src: &str) -> Result<DcsTree, DcsError> {
    let bad = |msg: String| DcsError::Malformed(format!("tree literal: {msg}"));
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut nodes: Vec<Word> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();

    let mut node_id = |token: &str, nodes: &mut Vec<Word>| -> Result<usize, DcsError> {
        if let Some(&i) = ids.get(token) {
            return Ok(i);
        }
        let word_part = token.split_once('#').map_or(token, |(w, _)| w);
        let word: Word = word_part.parse()?;
        nodes.push(word);
        ids.insert(token.to_string(), nodes.len() - 1);
        Ok(nodes.len() - 1)
    };

    for chain in src.split([';', ',']).map(str::trim).filter(|c| !c.is_empty()) {
        let tokens: Vec<&str> = chain.split_whitespace().collect();
        if tokens.len().is_multiple_of(2) {
            return Err(bad(format!("expected word (-P:L-> word)*, got {chain:?}")));
        }
        let mut prev = node_id(tokens[0], &mut nodes)?;
        for pair in tokens[1..].chunks(2) {
            let arrow = pair[0];
            let fields = arrow
                .strip_prefix('-')
                .and_then(|a| a.strip_suffix("->"))
                .ok_or_else(|| bad(format!("bad arrow {arrow:?}")))?;
            let (pf, cf) = fields
                .split_once(':')
                .filter(|(p, c)| !p.is_empty() && !c.is_empty())
                .ok_or_else(|| bad(format!("arrow {arrow:?} needs PFIELD:LFIELD")))?;
            let child = node_id(pair[1], &mut nodes)?;
            edges.push(Edge {
                parent: prev,
                child,
                parent_field: FieldId::new(pf),
                child_field: FieldId::new(cf),
            });
            prev = child;
        }
    }
    if nodes.is_empty() {
        return Err(bad("empty".into()));
    }
    let mut is_child = vec![false; nodes.len()];
    for e in &edges {
        is_child[e.child] = true;
    }
    let roots: Vec<usize> = (0..nodes.len()).filter(|&i| !is_child[i]).collect();
    let [root] = roots[..] else {
        return Err(bad(format!("expected exactly one root, found {}", roots.len())));
    };
    DcsTree::new(nodes, root, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let t = parse_tree_literal("ban/V -COMP:ARG-> drug/N").unwrap();
        assert_eq!(t.to_line(), "0\tban/V drug/N\t0:1:COMP:ARG");
    }

    #[test]
    fn chains_and_tags() {
        let t = parse_tree_literal("sell/V -SUBJ:ARG-> man/N; sell/V -COMP:ARG-> drug/N -ARG:COMP-> ban/V").unwrap();
        assert_eq!(t.root(), 0);
        assert_eq!(t.to_line(), "0\tsell/V man/N drug/N ban/V\t0:1:SUBJ:ARG;0:2:COMP:ARG;2:3:ARG:COMP");
        let t = parse_tree_literal("meet/V -SUBJ:ARG-> man/N#1, meet/V -COMP:ARG-> man/N#2").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(parse_tree_literal("drug/N").unwrap(), DcsTree::single("drug/N".parse().unwrap()));
    }

    #[test]
    fn errors() {
        assert!(parse_tree_literal("").is_err());
        assert!(parse_tree_literal("a/N -ARG-> b/N").is_err());
        assert!(parse_tree_literal("a/N ->ARG:ARG b/N").is_err());
        assert!(parse_tree_literal("a/N -ARG:ARG->").is_err());
        // two roots
        assert!(parse_tree_literal("a/N -ARG:ARG-> b/N; c/N -ARG:ARG-> d/N").is_err());
    }
}
