//! Random-walk path sampler.
//!
//! One walk starts along every directed edge. After each hop the current path
//! is emitted; the walk then stops at a leaf or continues to one of the other
//! `n-1` neighbours uniformly. A path through intermediate nodes of degrees
//! `n_i` is therefore emitted with probability `prod 1/(n_i-1)`, which equals
//! its enumeration weight.

use rand::Rng;

use super::Vocabulary;
use crate::dcs::{DcsTree, TreePath};

/// A sampled path with words and fields resolved to vocabulary ids.
/// `hops` holds `(near, far)` field ids from start to end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSample {
    pub start: usize,
    pub end: usize,
    pub hops: Vec<(usize, usize)>,
}

/// A tree with words and fields mapped to vocabulary ids, ready for repeated
/// sampling.
#[derive(Debug, Clone)]
pub struct IndexedTree {
    pub words: Vec<usize>,
    adj: Vec<Vec<usize>>,
    fields: Vec<Vec<(usize, usize)>>,
}

impl IndexedTree {
    /// `None` if the vocabulary cannot resolve a word or field (it lacks the
    /// `*UNKNOWN*` entries).
    pub fn new(tree: &DcsTree, vocab: &Vocabulary) -> Option<IndexedTree> {
        let words = tree
            .nodes()
            .iter()
            .map(|w| vocab.resolve_word(w))
            .collect::<Option<Vec<_>>>()?;
        let adj = adjacency(tree);
        let fields = (0..tree.len())
            .map(|u| {
                tree.links(u)
                    .iter()
                    .map(|l| Some((vocab.resolve_field(&l.near)?, vocab.resolve_field(&l.far)?)))
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>()?;
        Some(IndexedTree { words, adj, fields })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn hop(&self, a: usize, b: usize) -> (usize, usize) {
        let k = self.adj[a].iter().position(|&x| x == b).expect("consecutive path nodes are adjacent");
        self.fields[a][k]
    }

    /// Resolve a node sequence to a sample.
    pub fn sample_of(&self, nodes: &[usize]) -> PathSample {
        PathSample {
            start: self.words[nodes[0]],
            end: self.words[nodes[nodes.len() - 1]],
            hops: nodes.windows(2).map(|w| self.hop(w[0], w[1])).collect(),
        }
    }

    pub fn walk<R: Rng + ?Sized>(&self, rng: &mut R, visit: impl FnMut(&[usize])) {
        walk_adjacency(&self.adj, rng, visit)
    }
}

fn adjacency(tree: &DcsTree) -> Vec<Vec<usize>> {
    (0..tree.len()).map(|u| tree.links(u).iter().map(|l| l.to).collect()).collect()
}

fn walk_adjacency<R: Rng + ?Sized>(adj: &[Vec<usize>], rng: &mut R, mut visit: impl FnMut(&[usize])) {
    let mut path = Vec::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            path.clear();
            path.push(u);
            path.push(v);
            visit(&path);
            loop {
                let cur = path[path.len() - 1];
                let prev = path[path.len() - 2];
                let deg = adj[cur].len();
                if deg <= 1 {
                    break;
                }
                let mut k = rng.random_range(0..deg - 1);
                let mut next = adj[cur][k];
                if next == prev {
                    k += 1;
                    next = adj[cur][k];
                } else if adj[cur][..k].contains(&prev) {
                    // prev sits before k, so skipping it shifts by one
                    next = adj[cur][k + 1];
                }
                path.push(next);
                visit(&path);
            }
        }
    }
}

/// One sampling epoch over a tree, reporting node sequences.
pub fn walk_paths<R: Rng + ?Sized>(tree: &DcsTree, rng: &mut R, visit: impl FnMut(&[usize])) {
    walk_adjacency(&adjacency(tree), rng, visit)
}

/// One sampling epoch as structural paths.
pub fn sample_tree_paths<R: Rng + ?Sized>(tree: &DcsTree, rng: &mut R) -> Vec<TreePath> {
    let mut out = Vec::new();
    walk_paths(tree, rng, |nodes| {
        out.push(TreePath::from_nodes(tree, nodes.to_vec()).expect("walks follow tree edges"));
    });
    out
}

/// One sampling epoch as vocabulary-resolved samples.
pub fn sample_paths<R: Rng + ?Sized>(tree: &IndexedTree, rng: &mut R) -> Vec<PathSample> {
    let mut out = Vec::new();
    tree.walk(rng, |nodes| out.push(tree.sample_of(nodes)));
    out
}
