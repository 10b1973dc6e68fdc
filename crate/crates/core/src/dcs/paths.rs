use super::{DcsTree, Edge, Hop, TreePath};

/// Every directed simple path between distinct nodes, weighted by the product
/// of `1/(n-1)` over the degrees `n` of the intermediate nodes.
///
/// An `n`-node tree yields `n(n-1)` paths. Weights are accumulated as an
/// integer denominator and only converted to floating point on output.
pub fn enumerate_paths(tree: &DcsTree) -> Vec<TreePath> {
    let n = tree.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for start in 0..n {
        // (node, previous node, nodes so far, hops so far, weight denominator)
        let mut stack = vec![(start, usize::MAX, vec![start], Vec::<Hop>::new(), 1u64)];
        while let Some((u, prev, nodes, hops, denom)) = stack.pop() {
            if u != start {
                out.push(TreePath {
                    start,
                    end: u,
                    nodes: nodes.clone(),
                    hops: hops.clone(),
                    weight: 1.0 / denom as f64,
                });
            }
            // passing through u (unless it is the start) costs 1/(deg-1)
            let next_denom = if u == start {
                denom
            } else {
                denom.saturating_mul(tree.degree(u) as u64 - 1)
            };
            for link in tree.links(u).iter().rev() {
                if link.to == prev {
                    continue;
                }
                let mut nn = nodes.clone();
                nn.push(link.to);
                let mut hh = hops.clone();
                hh.push(Hop {
                    near: link.near.clone(),
                    far: link.far.clone(),
                });
                stack.push((link.to, u, nn, hh, next_denom));
            }
        }
    }
    out
}

/// Re-root the tree at `new_root`: edges on the path from the old root to
/// `new_root` swap parent and child together with their fields.
pub fn reroot(tree: &DcsTree, new_root: usize) -> DcsTree {
    assert!(new_root < tree.len(), "reroot target out of range");
    let mut on_path = vec![false; tree.len()];
    let mut cur = new_root;
    while let Some(p) = tree.parent(cur) {
        on_path[cur] = true;
        cur = p;
    }
    let edges = tree
        .edges()
        .iter()
        .map(|e| {
            if on_path[e.child] {
                Edge {
                    parent: e.child,
                    child: e.parent,
                    parent_field: e.child_field.clone(),
                    child_field: e.parent_field.clone(),
                }
            } else {
                e.clone()
            }
        })
        .collect();
    DcsTree::new(tree.nodes().to_vec(), new_root, edges).expect("re-rooting preserves the tree")
}

/// The subtree rooted at `node`, with nodes renumbered in their original
/// order. Also returns the original index of each new node.
pub fn subtree(tree: &DcsTree, node: usize) -> (DcsTree, Vec<usize>) {
    let mut keep = vec![false; tree.len()];
    let mut stack = vec![node];
    while let Some(u) = stack.pop() {
        keep[u] = true;
        stack.extend(tree.child_edges(u).map(|e| e.child));
    }
    let old_of_new: Vec<usize> = (0..tree.len()).filter(|&i| keep[i]).collect();
    let mut new_of_old = vec![usize::MAX; tree.len()];
    for (new, &old) in old_of_new.iter().enumerate() {
        new_of_old[old] = new;
    }
    let nodes = old_of_new.iter().map(|&i| tree.word(i).clone()).collect();
    let edges = tree
        .edges()
        .iter()
        .filter(|e| keep[e.parent] && keep[e.child])
        .map(|e| Edge {
            parent: new_of_old[e.parent],
            child: new_of_old[e.child],
            parent_field: e.parent_field.clone(),
            child_field: e.child_field.clone(),
        })
        .collect();
    let sub = DcsTree::new(nodes, new_of_old[node], edges).expect("subtree of a tree is a tree");
    (sub, old_of_new)
}

pub fn lowest_common_ancestor(tree: &DcsTree, a: usize, b: usize) -> usize {
    let mut is_anc = vec![false; tree.len()];
    let mut cur = Some(a);
    while let Some(u) = cur {
        is_anc[u] = true;
        cur = tree.parent(u);
    }
    let mut cur = b;
    while !is_anc[cur] {
        cur = tree.parent(cur).expect("root is a common ancestor");
    }
    cur
}
