//! Word vectors, field matrices, path scoring and tree composition.
//!
//! Each word has a query vector `v` and an answer vector `u`; each field `N`
//! has a matrix `M_N` and an approximate inverse `Minv_N`. A hop from a node
//! through its field `near` to a neighbour's field `far` maps a row vector by
//! `M_near · Minv_far`, and a path scores `v_start · Π hops · u_end`.
//!
//! A tree composes bottom-up as
//! `v⟦x⟧ = v_x + (1/n) Σ_i v⟦y_i⟧ · M_{L_i} · Minv_{P_i}` where child `y_i`
//! hangs off `x` with parent field `P_i` and child field `L_i`.

mod io;
pub mod linalg;
mod params;

use thiserror::Error;

use crate::dcs::{DcsTree, FieldId, Hop, Pos, TreePath, Word};
use crate::vocab::Vocabulary;

pub use io::{load_model, save_model, MODEL_MAGIC};
pub use params::{AtomicParams, ModelParams, Param, ParamStore};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown word {0}")]
    UnknownWord(Word),
    #[error("unknown field {0}")]
    UnknownField(FieldId),
    #[error("cannot normalize a zero {0:?}")]
    ZeroNorm(Param),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("model file truncated at byte {offset}")]
    TruncatedFile { offset: usize },
    #[error("malformed model header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Score `v_start · S_1 · … · S_k · u_end` for id-level hops `(near, far)`.
pub fn score_ids<S: ParamStore + ?Sized>(store: &S, start: usize, hops: &[(usize, usize)], end: usize) -> f64 {
    let d = store.dim();
    let mut a = vec![0.0; d];
    store.load(Param::Query(start), &mut a);
    let mut tmp = vec![0.0; d];
    let mut m = vec![0.0; d * d];
    for &(near, far) in hops {
        store.load(Param::Matrix(near), &mut m);
        linalg::vec_mat(&a, &m, &mut tmp);
        store.load(Param::Inverse(far), &mut m);
        linalg::vec_mat(&tmp, &m, &mut a);
    }
    store.load(Param::Answer(end), &mut tmp);
    linalg::dot(&a, &tmp)
}

/// Apply `M_near · Minv_far` to a row vector in place.
fn apply_hop(params: &ModelParams, near: usize, far: usize, v: &mut [f64]) {
    let mut tmp = vec![0.0; v.len()];
    linalg::vec_mat(v, &params.block_f64(Param::Matrix(near)), &mut tmp);
    linalg::vec_mat(&tmp, &params.block_f64(Param::Inverse(far)), v);
}

/// Vocabulary plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

impl Model {
    pub fn new(vocab: Vocabulary, params: ModelParams) -> Self {
        assert_eq!(vocab.num_words(), params.num_words());
        assert_eq!(vocab.num_fields(), params.num_fields());
        Model { vocab, params }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Word id; with `strict == false` unknown words fall back to
    /// `*UNKNOWN*/POS`.
    pub fn word_id(&self, w: &Word, strict: bool) -> Result<usize, ModelError> {
        let id = if strict { self.vocab.word_id(w) } else { self.vocab.resolve_word(w) };
        id.ok_or_else(|| ModelError::UnknownWord(w.clone()))
    }

    pub fn field_id(&self, f: &FieldId, strict: bool) -> Result<usize, ModelError> {
        let id = if strict { self.vocab.field_id(f) } else { self.vocab.resolve_field(f) };
        id.ok_or_else(|| ModelError::UnknownField(f.clone()))
    }

    fn hop_ids(&self, hops: &[Hop], strict: bool) -> Result<Vec<(usize, usize)>, ModelError> {
        hops.iter()
            .map(|h| Ok((self.field_id(&h.near, strict)?, self.field_id(&h.far, strict)?)))
            .collect()
    }

    /// `Π M_near · Minv_far` over the hops, in order from the start.
    pub fn path_matrix(&self, hops: &[Hop]) -> Result<Vec<f64>, ModelError> {
        let d = self.dim();
        let mut acc = linalg::identity(d);
        let mut tmp = vec![0.0; d * d];
        for (near, far) in self.hop_ids(hops, true)? {
            linalg::matmul(&acc, &self.params.block_f64(Param::Matrix(near)), &mut tmp, d);
            linalg::matmul(&tmp, &self.params.block_f64(Param::Inverse(far)), &mut acc, d);
        }
        Ok(acc)
    }

    /// Score of a path through `tree` with its own start and end words.
    pub fn path_score(&self, tree: &DcsTree, path: &TreePath) -> Result<f64, ModelError> {
        self.path_score_with_end(tree, path, tree.word(path.end), true)
    }

    /// Score of a path with the end word replaced by `end`.
    pub fn path_score_with_end(&self, tree: &DcsTree, path: &TreePath, end: &Word, strict: bool) -> Result<f64, ModelError> {
        let start = self.word_id(tree.word(path.start), strict)?;
        let end = self.word_id(end, strict)?;
        let hops = self.hop_ids(&path.hops, strict)?;
        Ok(score_ids(&self.params, start, &hops, end))
    }

    /// Query vector of the whole tree.
    pub fn compose_query(&self, tree: &DcsTree, strict: bool) -> Result<Vec<f64>, ModelError> {
        let mut memo: Vec<Option<Vec<f64>>> = vec![None; tree.len()];
        for x in tree.post_order() {
            let mut acc = self.params.block_f64(Param::Query(self.word_id(tree.word(x), strict)?));
            let children: Vec<_> = tree.child_edges(x).collect();
            let scale = 1.0 / children.len().max(1) as f64;
            for e in children {
                let mut child = memo[e.child].take().expect("children precede parents in post-order");
                let near = self.field_id(&e.child_field, strict)?;
                let far = self.field_id(&e.parent_field, strict)?;
                apply_hop(&self.params, near, far, &mut child);
                for (a, c) in acc.iter_mut().zip(&child) {
                    *a += scale * c;
                }
            }
            memo[x] = Some(acc);
        }
        Ok(memo[tree.root()].take().expect("root is composed"))
    }

    /// Top `k` answers by `q · u_w`, ties broken by vocabulary index.
    pub fn nearest_answers(&self, q: &[f64], k: usize, pos: Option<Pos>) -> Vec<(Word, f64)> {
        assert!(k >= 1, "k must be at least 1");
        let mut scored: Vec<(usize, f64)> = (0..self.vocab.num_words())
            .filter(|&w| pos.is_none_or(|p| self.vocab.word(w).pos == p))
            .map(|w| (w, linalg::dot(q, &self.params.block_f64(Param::Answer(w)))))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored.into_iter().map(|(w, s)| (self.vocab.word(w).clone(), s)).collect()
    }

    /// Like [`Model::nearest_answers`], but skipping the `*UNKNOWN*`
    /// placeholders and every word in `exclude`.
    pub fn nearest_known_answers(&self, q: &[f64], k: usize, pos: Option<Pos>, exclude: &[Word]) -> Vec<(Word, f64)> {
        self.nearest_answers(q, self.vocab.num_words(), pos)
            .into_iter()
            .filter(|(w, _)| !w.is_unknown() && !exclude.contains(w))
            .take(k)
            .collect()
    }

    /// Scale vectors to unit length and matrices to Frobenius norm `√d`.
    pub fn normalize(&mut self) -> Result<(), ModelError> {
        normalize(&mut self.params)
    }
}

pub fn normalize(params: &mut ModelParams) -> Result<(), ModelError> {
    let target_mat = (params.dim() as f64).sqrt();
    let all: Vec<Param> = params.params().collect();
    for p in all {
        let mut b = params.block_f64(p);
        let n = linalg::norm(&b);
        if n == 0.0 || !n.is_finite() {
            return Err(ModelError::ZeroNorm(p));
        }
        let s = if p.is_vector() { 1.0 / n } else { target_mat / n };
        b.iter_mut().for_each(|x| *x *= s);
        params.set_block(p, &b);
    }
    Ok(())
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    linalg::dot(a, b) / (linalg::norm(a) * linalg::norm(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcs::parse_tree_literal;
    use crate::vocab::build_vocab;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn toy_model(d: usize, seed: u64) -> Model {
        let trees = [
            parse_tree_literal("fight/V -COMP:ARG-> war/N").unwrap(),
            parse_tree_literal("ban/V -SUBJ:ARG-> canada/N; ban/V -COMP:ARG-> drug/N -ARG:ARG-> banned/J").unwrap(),
            parse_tree_literal("play/V -on:ARG-> grass/N").unwrap(),
        ];
        let vocab = build_vocab(&trees, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(d, vocab.num_words(), vocab.num_fields(), &mut rng);
        Model::new(vocab, params)
    }

    fn fid(m: &Model, s: &str) -> usize {
        m.vocab.field_id(&FieldId::new(s)).unwrap()
    }

    fn wid(m: &Model, s: &str) -> usize {
        m.vocab.word_id(&w(s)).unwrap()
    }

    fn vm(v: &[f64], m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        linalg::vec_mat(v, m, &mut out);
        out
    }

    #[test]
    fn identity_path_matrix() {
        let mut m = toy_model(3, 0);
        m.params.set_identity_matrices();
        let tree = parse_tree_literal("ban/V -COMP:ARG-> drug/N -ARG:ARG-> banned/J").unwrap();
        let path = TreePath::from_nodes(&tree, vec![2, 1, 0]).unwrap();
        assert_eq!(m.path_matrix(&path.hops).unwrap(), linalg::identity(3));
        let s = m.path_score(&tree, &path).unwrap();
        let v = m.params.block_f64(Param::Query(wid(&m, "banned/J")));
        let u = m.params.block_f64(Param::Answer(wid(&m, "ban/V")));
        assert!((s - linalg::dot(&v, &u)).abs() < 1e-12);
    }

    #[test]
    fn two_hop_matrix_by_hand() {
        let m = toy_model(3, 1);
        let tree = parse_tree_literal("ban/V -COMP:ARG-> drug/N -ARG:ARG-> banned/J").unwrap();
        // banned -> drug -> ban: (ARG, ARG) then (ARG, COMP)
        let path = TreePath::from_nodes(&tree, vec![2, 1, 0]).unwrap();
        let arg = fid(&m, "ARG");
        let comp = fid(&m, "COMP");
        let p = |x| m.params.block_f64(x);
        let mut expect = linalg::identity(3);
        for factor in [
            p(Param::Matrix(arg)),
            p(Param::Inverse(arg)),
            p(Param::Matrix(arg)),
            p(Param::Inverse(comp)),
        ] {
            let mut next = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    next[i * 3 + j] = (0..3).map(|k| expect[i * 3 + k] * factor[k * 3 + j]).sum();
                }
            }
            expect = next;
        }
        let got = m.path_matrix(&path.hops).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn path_score_explicit_loops() {
        let m = toy_model(4, 2);
        let tree = parse_tree_literal("ban/V -SUBJ:ARG-> canada/N; ban/V -COMP:ARG-> drug/N").unwrap();
        let path = TreePath::from_nodes(&tree, vec![1, 0, 2]).unwrap();
        let pm = m.path_matrix(&path.hops).unwrap();
        let v = m.params.block_f64(Param::Query(wid(&m, "canada/N")));
        let u = m.params.block_f64(Param::Answer(wid(&m, "drug/N")));
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += v[i] * pm[i * 4 + j] * u[j];
            }
        }
        assert!((m.path_score(&tree, &path).unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn zero_vectors_score_zero() {
        let mut m = toy_model(3, 0);
        m.params = ModelParams::zeros(3, m.vocab.num_words(), m.vocab.num_fields());
        let tree = parse_tree_literal("fight/V -COMP:ARG-> war/N").unwrap();
        let path = TreePath::from_nodes(&tree, vec![1, 0]).unwrap();
        assert_eq!(m.path_score(&tree, &path).unwrap(), 0.0);
    }

    #[test]
    fn fight_war_query() {
        let m = toy_model(5, 3);
        let tree = parse_tree_literal("fight/V -COMP:ARG-> war/N").unwrap();
        let q = m.compose_query(&tree, true).unwrap();
        let p = |x| m.params.block_f64(x);
        let t = vm(&p(Param::Query(wid(&m, "war/N"))), &p(Param::Matrix(fid(&m, "ARG"))));
        let t = vm(&t, &p(Param::Inverse(fid(&m, "COMP"))));
        let fight = p(Param::Query(wid(&m, "fight/V")));
        for i in 0..5 {
            assert!((q[i] - (t[i] + fight[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn leaf_and_identity_chain() {
        let mut m = toy_model(4, 4);
        let leaf = parse_tree_literal("war/N").unwrap();
        assert_eq!(m.compose_query(&leaf, true).unwrap(), m.params.block_f64(Param::Query(wid(&m, "war/N"))));
        m.params.set_identity_matrices();
        let chain = parse_tree_literal("ban/V -COMP:ARG-> drug/N -ARG:ARG-> banned/J").unwrap();
        let q = m.compose_query(&chain, true).unwrap();
        let sum: Vec<f64> = ["ban/V", "drug/N", "banned/J"]
            .iter()
            .map(|s| m.params.block_f64(Param::Query(wid(&m, s))))
            .fold(vec![0.0; 4], |acc, v| acc.iter().zip(&v).map(|(a, b)| a + b).collect());
        for (a, b) in q.iter().zip(&sum) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn oov_fallback_and_strict() {
        let m = toy_model(3, 5);
        let tree = parse_tree_literal("fight/V -COMP:ARG-> thalidomide/N").unwrap();
        assert!(matches!(m.compose_query(&tree, true), Err(ModelError::UnknownWord(_))));
        let q = m.compose_query(&tree, false).unwrap();
        let unk = parse_tree_literal("fight/V -COMP:ARG-> *UNKNOWN*/N").unwrap();
        assert_eq!(q, m.compose_query(&unk, true).unwrap());
        let odd_field = parse_tree_literal("fight/V -despite:ARG-> war/N").unwrap();
        assert!(matches!(m.compose_query(&odd_field, true), Err(ModelError::UnknownField(_))));
        assert!(m.compose_query(&odd_field, false).is_ok());
    }

    #[test]
    fn normalize_norms() {
        let mut m = toy_model(4, 6);
        m.normalize().unwrap();
        for p in m.params.params() {
            let n = linalg::norm(&m.params.block_f64(p));
            let target = if p.is_vector() { 1.0 } else { 2.0 };
            assert!((n - target).abs() < 1e-6, "{p:?} {n}");
        }
        let mut z = ModelParams::zeros(2, 1, 0);
        z.set_block(Param::Query(0), &[3.0, 4.0]);
        z.set_block(Param::Answer(0), &[1.0, 0.0]);
        normalize(&mut z).unwrap();
        assert_eq!(z.block(Param::Query(0)), &[0.6, 0.8]);
        let mut id = ModelParams::zeros(4, 0, 1);
        id.set_identity_matrices();
        let before = id.clone();
        normalize(&mut id).unwrap();
        assert_eq!(id, before);
        assert!(matches!(normalize(&mut ModelParams::zeros(2, 1, 0)), Err(ModelError::ZeroNorm(_))));
    }

    #[test]
    fn nearest_self_and_full_ranking() {
        let mut m = toy_model(8, 7);
        m.normalize().unwrap();
        let target = wid(&m, "drug/N");
        let q = m.params.block_f64(Param::Answer(target));
        let top = m.nearest_answers(&q, 1, None);
        assert_eq!(top[0].0, w("drug/N"));
        let all = m.nearest_answers(&q, 1000, None);
        assert_eq!(all.len(), m.vocab.num_words());
        let nouns = m.nearest_answers(&q, 1000, Some(Pos::N));
        assert!(nouns.iter().all(|(w, _)| w.pos == Pos::N));
    }

    #[test]
    fn nearest_tie_break_by_index() {
        let mut m = toy_model(2, 8);
        let n = m.vocab.num_words();
        m.params = ModelParams::zeros(2, n, m.vocab.num_fields());
        let ranked = m.nearest_answers(&[1.0, 0.0], n, None);
        let expect: Vec<Word> = m.vocab.words().to_vec();
        assert_eq!(ranked.into_iter().map(|(w, _)| w).collect::<Vec<_>>(), expect);
    }
}
