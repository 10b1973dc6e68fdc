#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use vecdcs::dcs::{DcsTree, Edge, FieldId, Word};
use vecdcs::model::{Param, ParamStore};

pub const WORDS: [&str; 8] = ["man/N", "drug/N", "sell/V", "ban/V", "kid/N", "play/V", "ball/N", "red/J"];
pub const FIELDS: [&str; 5] = ["ARG", "SUBJ", "COMP", "in", "to"];

/// A random tree on `n` nodes: node `i > 0` hangs under a random earlier node,
/// then the root is moved to a random node.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, words: &[&str], fields: &[&str]) -> DcsTree {
    let nodes: Vec<Word> = (0..n).map(|_| words.choose(rng).unwrap().parse().unwrap()).collect();
    let edges = (1..n)
        .map(|c| Edge {
            parent: rng.random_range(0..c),
            child: c,
            parent_field: FieldId::new(fields.choose(rng).unwrap()),
            child_field: FieldId::new(fields.choose(rng).unwrap()),
        })
        .collect();
    let t = DcsTree::new(nodes, 0, edges).unwrap();
    let root = rng.random_range(0..n);
    vecdcs::dcs::reroot(&t, root)
}

/// Undirected adjacency of a tree.
pub fn adjacency(t: &DcsTree) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); t.len()];
    for e in t.edges() {
        adj[e.parent].push(e.child);
        adj[e.child].push(e.parent);
    }
    adj
}

/// Node sequence from `a` to `b`, found by breadth-first search.
pub fn node_path(adj: &[Vec<usize>], a: usize, b: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; adj.len()];
    prev[a] = a;
    let mut queue = std::collections::VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![b];
    while *path.last().unwrap() != a {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

/// `∏ 1/(deg − 1)` over the intermediate nodes.
pub fn path_weight(adj: &[Vec<usize>], nodes: &[usize]) -> f64 {
    nodes[1..nodes.len() - 1].iter().map(|&u| 1.0 / (adj[u].len() - 1) as f64).product()
}

/// Parameters held in 64-bit floats, for derivative checks.
#[derive(Debug, Clone, Default)]
pub struct F64Store {
    pub dim: usize,
    pub blocks: HashMap<Param, Vec<f64>>,
}

impl F64Store {
    pub fn random<R: Rng>(rng: &mut R, dim: usize, words: usize, fields: usize) -> Self {
        let mut blocks = HashMap::new();
        let mut uniform = |len: usize, scale: f64| -> Vec<f64> {
            (0..len).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect()
        };
        for w in 0..words {
            blocks.insert(Param::Query(w), uniform(dim, 0.6));
            blocks.insert(Param::Answer(w), uniform(dim, 0.6));
        }
        for f in 0..fields {
            blocks.insert(Param::Matrix(f), uniform(dim * dim, 0.5));
            blocks.insert(Param::Inverse(f), uniform(dim * dim, 0.5));
        }
        F64Store { dim, blocks }
    }

    pub fn block(&self, p: Param) -> &Vec<f64> {
        &self.blocks[&p]
    }
}

impl ParamStore for F64Store {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load(&self, p: Param, out: &mut [f64]) {
        out.copy_from_slice(&self.blocks[&p]);
    }

    fn add(&mut self, p: Param, delta: &[f64]) {
        for (x, d) in self.blocks.get_mut(&p).unwrap().iter_mut().zip(delta) {
            *x += d;
        }
    }
}
