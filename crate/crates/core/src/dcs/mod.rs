//! DCS trees: the semantic programs that drive both the set-theoretic
//! denotation calculus and the vector composition.
//!
//! A tree has content words (lemma/POS pairs) as nodes. Every edge carries two
//! field labels, one at each end: the parent-side field and the child-side
//! field. Fields are `ARG`, `SUBJ`, `COMP`, prepositions, or `*UNKNOWN*`.

mod literal;
pub mod logic;
mod paths;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use literal::parse_tree_literal;
pub use paths::{enumerate_paths, lowest_common_ancestor, reroot, subtree};

/// Placeholder lemma for rare or out-of-vocabulary words.
pub const UNKNOWN_LEMMA: &str = "*UNKNOWN*";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DcsError {
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("malformed tree line: {0}")]
    Malformed(String),
    #[error("missing field {field} in tuple")]
    MissingField { field: FieldId },
    #[error("word {0} has no denotation in the database")]
    UnknownWord(Word),
}

/// Coarse part-of-speech tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    N,
    V,
    J,
    P,
    R,
    X,
}

impl Pos {
    pub const ALL: [Pos; 6] = [Pos::N, Pos::V, Pos::J, Pos::P, Pos::R, Pos::X];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::N => "N",
            Pos::V => "V",
            Pos::J => "J",
            Pos::P => "P",
            Pos::R => "R",
            Pos::X => "X",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = DcsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" => Ok(Pos::N),
            "V" => Ok(Pos::V),
            "J" => Ok(Pos::J),
            "P" => Ok(Pos::P),
            "R" => Ok(Pos::R),
            "X" => Ok(Pos::X),
            _ => Err(DcsError::Malformed(format!("unknown POS tag {s:?}"))),
        }
    }
}

/// A content word, rendered canonically as `lemma/POS`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    pub lemma: String,
    pub pos: Pos,
}

impl Word {
    pub fn new(lemma: impl Into<String>, pos: Pos) -> Self {
        let lemma = lemma.into();
        assert!(!lemma.is_empty(), "word lemma must be non-empty");
        Word { lemma, pos }
    }

    pub fn unknown(pos: Pos) -> Self {
        Word::new(UNKNOWN_LEMMA, pos)
    }

    pub fn is_unknown(&self) -> bool {
        self.lemma == UNKNOWN_LEMMA
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.lemma, self.pos)
    }
}

impl FromStr for Word {
    type Err = DcsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lemma, pos) = s
            .rsplit_once('/')
            .ok_or_else(|| DcsError::Malformed(format!("word {s:?} is not lemma/POS")))?;
        if lemma.is_empty() {
            return Err(DcsError::Malformed(format!("word {s:?} has an empty lemma")));
        }
        Ok(Word::new(lemma, pos.parse()?))
    }
}

/// A field label. Cheap to clone; compared by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldId(Arc<str>);

impl FieldId {
    pub fn new(name: &str) -> Self {
        FieldId(Arc::from(name))
    }

    pub fn arg() -> Self {
        FieldId::new("ARG")
    }

    pub fn subj() -> Self {
        FieldId::new("SUBJ")
    }

    pub fn comp() -> Self {
        FieldId::new("COMP")
    }

    pub fn unknown() -> Self {
        FieldId::new(UNKNOWN_LEMMA)
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// `ARG`, `SUBJ` and `COMP` are never thresholded away.
    pub fn is_core(&self) -> bool {
        matches!(&*self.0, "ARG" | "SUBJ" | "COMP")
    }

    pub fn is_unknown(&self) -> bool {
        &*self.0 == UNKNOWN_LEMMA
    }
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub parent: usize,
    pub child: usize,
    pub parent_field: FieldId,
    pub child_field: FieldId,
}

/// One step out of a node: the neighbour, the field at our end, and the field
/// at the neighbour's end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub to: usize,
    pub near: FieldId,
    pub far: FieldId,
}

/// A rooted tree of words with double-field-labelled edges.
///
/// Immutable once built; [`DcsTree::new`] checks that the edges form a tree
/// rooted at `root` covering every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcsTree {
    nodes: Vec<Word>,
    root: usize,
    edges: Vec<Edge>,
    parent_edge: Vec<Option<usize>>,
    child_edges: Vec<Vec<usize>>,
    adjacency: Vec<Vec<Link>>,
}

impl DcsTree {
    pub fn new(nodes: Vec<Word>, root: usize, edges: Vec<Edge>) -> Result<Self, DcsError> {
        let n = nodes.len();
        if n == 0 {
            return Err(DcsError::InvalidTree("tree has no nodes".into()));
        }
        if root >= n {
            return Err(DcsError::InvalidTree(format!("root {root} out of range")));
        }
        if edges.len() != n - 1 {
            return Err(DcsError::InvalidTree(format!(
                "{} nodes need {} edges, got {}",
                n,
                n - 1,
                edges.len()
            )));
        }
        let mut parent_edge = vec![None; n];
        let mut child_edges = vec![Vec::new(); n];
        let mut adjacency = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            if e.parent >= n || e.child >= n {
                return Err(DcsError::InvalidTree(format!("edge {i} references a missing node")));
            }
            if e.parent == e.child {
                return Err(DcsError::InvalidTree(format!("edge {i} is a self loop")));
            }
            if e.child == root {
                return Err(DcsError::InvalidTree("root has a parent".into()));
            }
            if parent_edge[e.child].replace(i).is_some() {
                return Err(DcsError::InvalidTree(format!("node {} has two parents", e.child)));
            }
            child_edges[e.parent].push(i);
            adjacency[e.parent].push(Link {
                to: e.child,
                near: e.parent_field.clone(),
                far: e.child_field.clone(),
            });
            adjacency[e.child].push(Link {
                to: e.parent,
                near: e.child_field.clone(),
                far: e.parent_field.clone(),
            });
        }
        // n-1 edges, unique parents: connected iff every node reaches the root.
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            for &ei in &child_edges[u] {
                let c = edges[ei].child;
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(DcsError::InvalidTree(format!("node {orphan} is not reachable from the root")));
        }
        Ok(DcsTree {
            nodes,
            root,
            edges,
            parent_edge,
            child_edges,
            adjacency,
        })
    }

    pub fn single(word: Word) -> Self {
        DcsTree::new(vec![word], 0, Vec::new()).expect("single node tree is valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[Word] {
        &self.nodes
    }

    pub fn word(&self, node: usize) -> &Word {
        &self.nodes[node]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn links(&self, node: usize) -> &[Link] {
        &self.adjacency[node]
    }

    pub fn parent_edge(&self, node: usize) -> Option<&Edge> {
        self.parent_edge[node].map(|i| &self.edges[i])
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent_edge(node).map(|e| e.parent)
    }

    /// Edges to the children of `node`, in insertion order.
    pub fn child_edges(&self, node: usize) -> impl Iterator<Item = &Edge> {
        self.child_edges[node].iter().map(move |&i| &self.edges[i])
    }

    /// Nodes in post-order (children before parents), starting from the root.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![(self.root, false)];
        while let Some((u, expanded)) = stack.pop() {
            if expanded {
                order.push(u);
            } else {
                stack.push((u, true));
                for e in self.child_edges(u).collect::<Vec<_>>().into_iter().rev() {
                    stack.push((e.child, false));
                }
            }
        }
        order
    }

    /// Same tree with every word rewritten by `f`.
    pub fn map_words(&self, mut f: impl FnMut(&Word) -> Word) -> DcsTree {
        let nodes = self.nodes.iter().map(&mut f).collect();
        DcsTree::new(nodes, self.root, self.edges.clone()).expect("structure unchanged")
    }

    /// Serialise as `root<TAB>w0/P w1/P ...<TAB>parent:child:PFIELD:LFIELD;...`.
    pub fn to_line(&self) -> String {
        let words: Vec<String> = self.nodes.iter().map(Word::to_string).collect();
        let edges: Vec<String> = self
            .edges
            .iter()
            .map(|e| format!("{}:{}:{}:{}", e.parent, e.child, e.parent_field, e.child_field))
            .collect();
        format!("{}\t{}\t{}", self.root, words.join(" "), edges.join(";"))
    }

    pub fn from_line(line: &str) -> Result<Self, DcsError> {
        let mut cols = line.trim_end_matches(['\r', '\n']).split('\t');
        let (Some(root), Some(words), Some(edges), None) = (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(DcsError::Malformed(format!("expected 3 tab-separated columns: {line:?}")));
        };
        let root: usize = root
            .parse()
            .map_err(|_| DcsError::Malformed(format!("bad root index {root:?}")))?;
        let nodes = words
            .split(' ')
            .filter(|w| !w.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Word>, _>>()?;
        let mut parsed = Vec::new();
        for spec in edges.split(';').filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = spec.split(':').collect();
            let [p, c, pf, cf] = parts[..] else {
                return Err(DcsError::Malformed(format!("bad edge {spec:?}")));
            };
            let idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| DcsError::Malformed(format!("bad node index in edge {spec:?}")))
            };
            if pf.is_empty() || cf.is_empty() {
                return Err(DcsError::Malformed(format!("empty field in edge {spec:?}")));
            }
            parsed.push(Edge {
                parent: idx(p)?,
                child: idx(c)?,
                parent_field: FieldId::new(pf),
                child_field: FieldId::new(cf),
            });
        }
        DcsTree::new(nodes, root, parsed)
    }
}

/// A simple directed path through a tree, with one `(near, far)` field pair per
/// hop and its sampling weight.
#[derive(Debug, Clone, PartialEq)]
pub struct TreePath {
    pub start: usize,
    pub end: usize,
    /// Every node on the path, `start` first and `end` last.
    pub nodes: Vec<usize>,
    pub hops: Vec<Hop>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hop {
    pub near: FieldId,
    pub far: FieldId,
}

impl TreePath {
    /// Build a path from its node sequence; consecutive nodes must be adjacent
    /// and no node may repeat.
    pub fn from_nodes(tree: &DcsTree, nodes: Vec<usize>) -> Result<Self, DcsError> {
        if nodes.len() < 2 {
            return Err(DcsError::InvalidTree("a path needs at least one hop".into()));
        }
        let mut seen = vec![false; tree.len()];
        let mut hops = Vec::with_capacity(nodes.len() - 1);
        let mut denom: u64 = 1;
        for (k, &u) in nodes.iter().enumerate() {
            if u >= tree.len() || std::mem::replace(&mut seen[u], true) {
                return Err(DcsError::InvalidTree(format!("path node {u} repeated or out of range")));
            }
            if k > 0 && k + 1 < nodes.len() {
                denom = denom.saturating_mul(tree.degree(u) as u64 - 1);
            }
            if let Some(&v) = nodes.get(k + 1) {
                let link = tree
                    .links(u)
                    .iter()
                    .find(|l| l.to == v)
                    .ok_or_else(|| DcsError::InvalidTree(format!("nodes {u} and {v} are not adjacent")))?;
                hops.push(Hop {
                    near: link.near.clone(),
                    far: link.far.clone(),
                });
            }
        }
        Ok(TreePath {
            start: nodes[0],
            end: *nodes.last().unwrap(),
            nodes,
            hops,
            weight: 1.0 / denom as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn edge(p: usize, c: usize, pf: &str, cf: &str) -> Edge {
        Edge {
            parent: p,
            child: c,
            parent_field: FieldId::new(pf),
            child_field: FieldId::new(cf),
        }
    }

    #[test]
    fn word_roundtrip() {
        let word = w("burn_down/V");
        assert_eq!(word.lemma, "burn_down");
        assert_eq!(word.pos, Pos::V);
        assert_eq!(word.to_string(), "burn_down/V");
        assert_eq!(w("a/b/N").lemma, "a/b");
        assert!("noslash".parse::<Word>().is_err());
        assert!("/N".parse::<Word>().is_err());
        assert!("x/Q".parse::<Word>().is_err());
    }

    #[test]
    fn rejects_non_trees() {
        let nodes = vec![w("a/N"), w("b/N"), w("c/N")];
        // cycle b <-> c, a disconnected
        let cyc = DcsTree::new(
            nodes.clone(),
            0,
            vec![edge(1, 2, "ARG", "ARG"), edge(2, 1, "ARG", "ARG")],
        );
        assert!(cyc.is_err());
        let root_child = DcsTree::new(nodes.clone(), 0, vec![edge(1, 0, "ARG", "ARG"), edge(0, 2, "ARG", "ARG")]);
        assert!(root_child.is_err());
        let too_few = DcsTree::new(nodes.clone(), 0, vec![edge(0, 1, "ARG", "ARG")]);
        assert!(too_few.is_err());
        let ok = DcsTree::new(nodes, 0, vec![edge(0, 1, "ARG", "ARG"), edge(1, 2, "SUBJ", "ARG")]);
        assert!(ok.is_ok());
    }

    #[test]
    fn line_roundtrip() {
        let t = DcsTree::new(
            vec![w("sell/V"), w("man/N"), w("drug/N"), w("ban/V")],
            0,
            vec![edge(0, 1, "SUBJ", "ARG"), edge(0, 2, "COMP", "ARG"), edge(2, 3, "ARG", "COMP")],
        )
        .unwrap();
        let line = t.to_line();
        assert_eq!(line, "0\tsell/V man/N drug/N ban/V\t0:1:SUBJ:ARG;0:2:COMP:ARG;2:3:ARG:COMP");
        assert_eq!(DcsTree::from_line(&line).unwrap(), t);

        let single = DcsTree::single(w("drug/N"));
        assert_eq!(single.to_line(), "0\tdrug/N\t");
        assert_eq!(DcsTree::from_line(&single.to_line()).unwrap(), single);
        assert!(DcsTree::from_line("0\tdrug/N").is_err());
        assert!(DcsTree::from_line("x\tdrug/N\t").is_err());
        assert!(DcsTree::from_line("0\ta/N b/N\t0:1:ARG").is_err());
    }

    #[test]
    fn post_order_visits_children_first() {
        let t = DcsTree::from_line("1\ta/N b/V c/N d/J\t1:0:SUBJ:ARG;1:2:COMP:ARG;2:3:ARG:ARG").unwrap();
        let order = t.post_order();
        assert_eq!(order.len(), 4);
        let pos = |n| order.iter().position(|&x| x == n).unwrap();
        assert!(pos(3) < pos(2));
        assert!(pos(0) < pos(1) && pos(2) < pos(1));
        assert_eq!(*order.last().unwrap(), 1);
    }

    #[test]
    fn path_hops_follow_direction() {
        // play(SUBJ) -- kid(ARG)
        let t = DcsTree::from_line("0\tplay/V kid/N\t0:1:SUBJ:ARG").unwrap();
        let p = TreePath::from_nodes(&t, vec![1, 0]).unwrap();
        assert_eq!(p.hops, vec![Hop { near: FieldId::arg(), far: FieldId::subj() }]);
        assert_eq!(p.weight, 1.0);
        assert!(TreePath::from_nodes(&t, vec![1]).is_err());
        assert!(TreePath::from_nodes(&t, vec![1, 0, 1]).is_err());
    }
}
