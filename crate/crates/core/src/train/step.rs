//! Noise generation, NCE loss and the sparse SGD step.
//!
//! A path with `l` hops has `2l` matrix slots `M_1 Minv_2 … M_{2l-1} Minv_{2l}`:
//! odd slot `2h-1` is `M` of hop `h`'s near field, even slot `2h` is `Minv`
//! of its far field. A noised copy picks `i` in `2..=2l`, redraws the field of
//! every slot `j ≥ i` and the end word from the unigram tables, and shares
//! slots `j < i` with the positive path.
//!
//! Gradients are taken per slot occurrence: a field used in several slots
//! only receives the partial derivative of the updated slot.

use rand::Rng;

use crate::model::{linalg, Param, ParamStore};
use crate::vocab::{PathSample, Vocabulary};

/// A noised copy of a positive path. `fields[j - i]` replaces slot `j`
/// (1-based) for `j` in `i..=2l`; `word` replaces the end word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisedExample {
    pub i: usize,
    pub fields: Vec<usize>,
    pub word: usize,
}

pub fn make_noise<R: Rng + ?Sized>(pos: &PathSample, vocab: &Vocabulary, rng: &mut R, k: usize) -> Vec<NoisedExample> {
    let slots = 2 * pos.hops.len();
    assert!(slots >= 2, "paths have at least one hop");
    (0..k)
        .map(|_| {
            let i = rng.random_range(2..=slots);
            let fields = (i..=slots).map(|_| vocab.draw_field(rng)).collect();
            let word = vocab.draw_word(rng);
            NoisedExample { i, fields, word }
        })
        .collect()
}

/// Field of positive slot `j` (1-based).
pub fn slot_field(pos: &PathSample, j: usize) -> usize {
    let (near, far) = pos.hops[(j - 1) / 2];
    if j % 2 == 1 {
        near
    } else {
        far
    }
}

pub fn slot_param(j: usize, field: usize) -> Param {
    if j % 2 == 1 {
        Param::Matrix(field)
    } else {
        Param::Inverse(field)
    }
}

/// `ln σ(x)`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Occurrence {
    Positive(usize),
    Noise(usize, usize),
}

/// One scored chain: the positive path or a noised copy.
struct Chain {
    params: Vec<Param>,
    occurrences: Vec<Occurrence>,
    end: usize,
    coeff: f64,
}

fn chains(pos: &PathSample, noises: &[NoisedExample]) -> Vec<Chain> {
    let slots = 2 * pos.hops.len();
    let mut out = vec![Chain {
        params: (1..=slots).map(|j| slot_param(j, slot_field(pos, j))).collect(),
        occurrences: (1..=slots).map(Occurrence::Positive).collect(),
        end: pos.end,
        coeff: 0.0,
    }];
    for (q, n) in noises.iter().enumerate() {
        let mut params = Vec::with_capacity(slots);
        let mut occurrences = Vec::with_capacity(slots);
        for j in 1..=slots {
            if j < n.i {
                params.push(slot_param(j, slot_field(pos, j)));
                occurrences.push(Occurrence::Positive(j));
            } else {
                params.push(slot_param(j, n.fields[j - n.i]));
                occurrences.push(Occurrence::Noise(q, j));
            }
        }
        out.push(Chain { params, occurrences, end: n.word, coeff: 0.0 });
    }
    out
}

struct Loaded {
    d: usize,
    blocks: Vec<(Param, Vec<f64>)>,
}

impl Loaded {
    fn get<S: ParamStore + ?Sized>(&mut self, store: &S, p: Param) -> usize {
        if let Some(k) = self.blocks.iter().position(|(q, _)| *q == p) {
            return k;
        }
        let len = if p.is_vector() { self.d } else { self.d * self.d };
        let mut buf = vec![0.0; len];
        store.load(p, &mut buf);
        self.blocks.push((p, buf));
        self.blocks.len() - 1
    }
}

/// `-[ln σ(s⁺) + Σ ln σ(-s⁻)]`
pub fn nce_loss<S: ParamStore + ?Sized>(store: &S, pos: &PathSample, noises: &[NoisedExample]) -> f64 {
    let mut loaded = Loaded { d: store.dim(), blocks: Vec::new() };
    chains(pos, noises)
        .iter()
        .enumerate()
        .map(|(c, ch)| {
            let s = chain_prefixes(store, &mut loaded, pos.start, ch).1;
            if c == 0 {
                -log_sigmoid(s)
            } else {
                -log_sigmoid(-s)
            }
        })
        .sum()
}

/// Prefix row vectors `a_0 = v, a_j = a_{j-1}·S_j` and the chain score.
fn chain_prefixes<S: ParamStore + ?Sized>(store: &S, loaded: &mut Loaded, start: usize, ch: &Chain) -> (Vec<Vec<f64>>, f64) {
    let d = loaded.d;
    let v = loaded.get(store, Param::Query(start));
    let mut a = vec![loaded.blocks[v].1.clone()];
    for &p in &ch.params {
        let k = loaded.get(store, p);
        let mut next = vec![0.0; d];
        linalg::vec_mat(&a[a.len() - 1], &loaded.blocks[k].1, &mut next);
        a.push(next);
    }
    let u = loaded.get(store, Param::Answer(ch.end));
    let s = linalg::dot(&a[a.len() - 1], &loaded.blocks[u].1);
    (a, s)
}

/// Regularizer weights and which blocks a step may touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub lr_vec: f64,
    pub lr_mat: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub clip_vec: f64,
    pub clip_mat: f64,
    pub update_matrices: bool,
}

/// Loss and the gradient of every block the step updates, before clipping.
#[derive(Debug, Clone)]
pub struct StepGradients {
    pub loss: f64,
    pub grads: Vec<(Param, Vec<f64>)>,
}

fn accumulate(grads: &mut Vec<(Param, Vec<f64>)>, p: Param, len: usize) -> &mut Vec<f64> {
    let k = match grads.iter().position(|(q, _)| *q == p) {
        Some(k) => k,
        None => {
            grads.push((p, vec![0.0; len]));
            grads.len() - 1
        }
    };
    &mut grads[k].1
}

pub fn step_gradients<S: ParamStore + ?Sized>(
    store: &S,
    pos: &PathSample,
    noises: &[NoisedExample],
    sp: &StepParams,
) -> StepGradients {
    let d = store.dim();
    let mut loaded = Loaded { d, blocks: Vec::new() };
    let mut touched = Vec::new();
    if sp.update_matrices {
        for (q, n) in noises.iter().enumerate() {
            touched.extend([Occurrence::Positive(n.i - 1), Occurrence::Positive(n.i), Occurrence::Noise(q, n.i)]);
        }
    }

    let mut grads: Vec<(Param, Vec<f64>)> = Vec::new();
    let mut loss = 0.0;
    let mut chs = chains(pos, noises);
    for (c, ch) in chs.iter_mut().enumerate() {
        let (a, s) = chain_prefixes(store, &mut loaded, pos.start, ch);
        if c == 0 {
            loss -= log_sigmoid(s);
            ch.coeff = sigmoid(s) - 1.0;
        } else {
            loss -= log_sigmoid(-s);
            ch.coeff = sigmoid(s);
        }
        let g = ch.coeff;
        let slots = ch.params.len();
        // suffixes b_j = S_{j+1} … S_{2l} · u, walking backwards
        let u = loaded.get(store, Param::Answer(ch.end));
        let mut b = loaded.blocks[u].1.clone();
        let ga: Vec<f64> = a[slots].iter().map(|x| g * x).collect();
        accumulate(&mut grads, Param::Answer(ch.end), d)
            .iter_mut()
            .zip(&ga)
            .for_each(|(x, y)| *x += y);
        for j in (1..=slots).rev() {
            let p = ch.params[j - 1];
            if touched.contains(&ch.occurrences[j - 1]) {
                linalg::add_outer(accumulate(&mut grads, p, d * d), g, &a[j - 1], &b);
            }
            let k = loaded.get(store, p);
            let mut next = vec![0.0; d];
            linalg::mat_vec(&loaded.blocks[k].1, &b, &mut next);
            b = next;
        }
        accumulate(&mut grads, Param::Query(pos.start), d)
            .iter_mut()
            .zip(&b)
            .for_each(|(x, y)| *x += g * y);
    }

    if sp.update_matrices && (sp.gamma > 0.0 || sp.kappa > 0.0) {
        for (p, grad) in grads.iter_mut() {
            let (f, is_inverse) = match *p {
                Param::Matrix(f) => (f, false),
                Param::Inverse(f) => (f, true),
                _ => continue,
            };
            let m = loaded.get(store, Param::Matrix(f));
            let mi = loaded.get(store, Param::Inverse(f));
            let (m, minv) = (&loaded.blocks[m].1, &loaded.blocks[mi].1);
            let r = if is_inverse {
                regularizer_grad_inverse(m, minv, d, sp.gamma)
            } else {
                regularizer_grad_matrix(m, minv, d, sp.gamma, sp.kappa)
            };
            grad.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
        }
    }
    StepGradients { loss, grads }
}

/// `A - (tr A / d) I`
fn traceless(a: &mut [f64], d: usize) {
    let t = linalg::trace(a, d) / d as f64;
    for i in 0..d {
        a[i * d + i] -= t;
    }
}

/// `γ‖Minv·M − (tr/d)I‖² + κ‖Mᵀ·M − (tr/d)I‖²`
pub fn regularizer_penalty(m: &[f64], minv: &[f64], d: usize, gamma: f64, kappa: f64) -> f64 {
    let mut c = vec![0.0; d * d];
    linalg::matmul(minv, m, &mut c, d);
    traceless(&mut c, d);
    let mut e = vec![0.0; d * d];
    linalg::matmul_tn(m, m, &mut e, d);
    traceless(&mut e, d);
    gamma * linalg::dot(&c, &c) + kappa * linalg::dot(&e, &e)
}

/// Gradient of the penalty with respect to `M`: `2γ Minvᵀ C + 4κ M D`.
pub fn regularizer_grad_matrix(m: &[f64], minv: &[f64], d: usize, gamma: f64, kappa: f64) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    let mut tmp = vec![0.0; d * d];
    let mut x = vec![0.0; d * d];
    if gamma != 0.0 {
        linalg::matmul(minv, m, &mut x, d);
        traceless(&mut x, d);
        linalg::matmul_tn(minv, &x, &mut tmp, d);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += 2.0 * gamma * t);
    }
    if kappa != 0.0 {
        linalg::matmul_tn(m, m, &mut x, d);
        traceless(&mut x, d);
        linalg::matmul(m, &x, &mut tmp, d);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += 4.0 * kappa * t);
    }
    out
}

/// Gradient of the penalty with respect to `Minv`: `2γ C Mᵀ`.
pub fn regularizer_grad_inverse(m: &[f64], minv: &[f64], d: usize, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    if gamma != 0.0 {
        let mut c = vec![0.0; d * d];
        linalg::matmul(minv, m, &mut c, d);
        traceless(&mut c, d);
        linalg::matmul_nt(&c, m, &mut out, d);
        out.iter_mut().for_each(|o| *o *= 2.0 * gamma);
    }
    out
}

/// Both penalty gradients: `(∂/∂M, ∂/∂Minv)`.
pub fn regularizer_grads(m: &[f64], minv: &[f64], d: usize, gamma: f64, kappa: f64) -> (Vec<f64>, Vec<f64>) {
    (
        regularizer_grad_matrix(m, minv, d, gamma, kappa),
        regularizer_grad_inverse(m, minv, d, gamma),
    )
}

/// Rescale `g` to norm `max` if it is longer.
pub fn clip(g: &mut [f64], max: f64) {
    let n = linalg::norm(g);
    if n > max {
        let s = max / n;
        g.iter_mut().for_each(|x| *x *= s);
    }
}

/// Apply one SGD step; returns the loss, or `None` when a gradient is not
/// finite (nothing is written in that case).
pub fn step<S: ParamStore + ?Sized>(
    store: &mut S,
    pos: &PathSample,
    noises: &[NoisedExample],
    sp: &StepParams,
) -> Result<f64, Param> {
    let StepGradients { loss, mut grads } = step_gradients(store, pos, noises, sp);
    if let Some((p, _)) = grads.iter().find(|(_, g)| g.iter().any(|x| !x.is_finite())) {
        return Err(*p);
    }
    for (p, g) in grads.iter_mut() {
        let (lr, max) = if p.is_vector() { (sp.lr_vec, sp.clip_vec) } else { (sp.lr_mat, sp.clip_mat) };
        if lr == 0.0 {
            continue;
        }
        clip(g, max);
        g.iter_mut().for_each(|x| *x *= -lr);
        store.add(*p, g);
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcs::{FieldId, Word};
    use crate::model::ModelParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab(words: usize, fields: usize) -> Vocabulary {
        let ws = (0..words).map(|i| (format!("w{i}/N").parse::<Word>().unwrap(), 1.0 + i as f64)).collect();
        let fs = (0..fields).map(|i| (FieldId::new(&format!("f{i}")), 1.0 + i as f64)).collect();
        Vocabulary::from_ordered(ws, fs, 1.0, 1.0)
    }

    fn path(l: usize) -> PathSample {
        PathSample { start: 0, end: 1, hops: (0..l).map(|h| (h % 3, (h + 1) % 3)).collect() }
    }

    fn defaults() -> StepParams {
        StepParams {
            lr_vec: 0.1,
            lr_mat: 0.0005,
            gamma: 0.001,
            kappa: 0.0001,
            clip_vec: 1.0,
            clip_mat: 0.1,
            update_matrices: true,
        }
    }

    #[test]
    fn single_hop_always_index_two() {
        let v = vocab(5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in make_noise(&path(1), &v, &mut rng, 100) {
            assert_eq!(n.i, 2);
            assert_eq!(n.fields.len(), 1);
        }
    }

    #[test]
    fn index_uniform_for_two_hops() {
        let v = vocab(5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 1_000_000;
        let mut counts = [0usize; 5];
        for n in make_noise(&path(2), &v, &mut rng, draws) {
            counts[n.i] += 1;
            assert_eq!(n.fields.len(), 4 - n.i + 1);
        }
        for c in &counts[2..] {
            let f = *c as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.005, "{f}");
        }
    }

    #[test]
    fn zero_scores_give_two_ln_two() {
        let p = ModelParams::zeros(3, 5, 4);
        let n = NoisedExample { i: 2, fields: vec![1], word: 2 };
        let loss = nce_loss(&p, &path(1), &[n]);
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn saturated_scores_give_zero_loss() {
        let mut p = ModelParams::zeros(2, 3, 3);
        p.set_identity_matrices();
        p.set_block(Param::Query(0), &[30.0, 0.0]);
        p.set_block(Param::Answer(1), &[30.0, 0.0]);
        p.set_block(Param::Answer(2), &[-30.0, 0.0]);
        let n = NoisedExample { i: 2, fields: vec![0], word: 2 };
        assert!(nce_loss(&p, &path(1), &[n]) < 1e-12);
    }

    #[test]
    fn stable_log_sigmoid() {
        assert_eq!(log_sigmoid(0.0), -(2f64.ln()));
        assert!(log_sigmoid(800.0) == 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn regularizer_zero_at_orthogonal_inverse() {
        // rotation by 90 degrees, inverse is its transpose
        let m = [0.0, -1.0, 1.0, 0.0];
        let minv = [0.0, 1.0, -1.0, 0.0];
        assert_eq!(regularizer_penalty(&m, &minv, 2, 1.0, 1.0), 0.0);
        let (gm, gi) = regularizer_grads(&m, &minv, 2, 1.0, 1.0);
        assert!(gm.iter().chain(&gi).all(|&x| x == 0.0));
    }

    #[test]
    fn regularizer_hand_values() {
        // Minv·M = diag(2,1), tr/2 = 1.5, residual diag(0.5,-0.5): norm² 0.5.
        // MᵀM = diag(4,1), tr/2 = 2.5, residual diag(1.5,-1.5): norm² 4.5.
        let m = [2.0, 0.0, 0.0, 1.0];
        let minv = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(regularizer_penalty(&m, &minv, 2, 1.0, 0.0), 0.5);
        assert_eq!(regularizer_penalty(&m, &minv, 2, 0.0, 1.0), 4.5);
        assert_eq!(regularizer_penalty(&m, &minv, 2, 0.001, 0.0001), 0.001 * 0.5 + 0.0001 * 4.5);
    }

    #[test]
    fn zero_rates_leave_params_unchanged() {
        let v = vocab(5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ModelParams::init(4, 5, 4, &mut rng);
        let before = p.clone();
        let pos = path(2);
        let noises = make_noise(&pos, &v, &mut rng, 1);
        let sp = StepParams { lr_vec: 0.0, lr_mat: 0.0, ..defaults() };
        let loss = step(&mut p, &pos, &noises, &sp).unwrap();
        assert!(loss > 0.0);
        assert_eq!(p, before);
    }

    #[test]
    fn clipped_norms_bounded() {
        let mut g = vec![3.0, 4.0];
        clip(&mut g, 1.0);
        assert!((linalg::norm(&g) - 1.0).abs() < 1e-12);
        let mut small = vec![0.1, 0.0];
        clip(&mut small, 1.0);
        assert_eq!(small, vec![0.1, 0.0]);
    }

    #[test]
    fn non_finite_gradient_reported() {
        let mut p = ModelParams::zeros(2, 3, 3);
        p.set_identity_matrices();
        p.set_block(Param::Query(0), &[f64::NAN, 0.0]);
        let n = NoisedExample { i: 2, fields: vec![0], word: 2 };
        assert!(step(&mut p, &path(1), &[n], &defaults()).is_err());
    }
}
