use std::sync::atomic::{AtomicU32, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::linalg;

/// One parameter block: a word's query or answer vector, or a field's matrix
/// or inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Query(usize),
    Answer(usize),
    Matrix(usize),
    Inverse(usize),
}

impl Param {
    pub fn is_vector(self) -> bool {
        matches!(self, Param::Query(_) | Param::Answer(_))
    }
}

/// Read/update access to parameter blocks in 64-bit precision.
pub trait ParamStore {
    fn dim(&self) -> usize;
    /// Copy a block into `out` (length `d` or `d*d`).
    fn load(&self, p: Param, out: &mut [f64]);
    /// Add `delta` to a block.
    fn add(&mut self, p: Param, delta: &[f64]);
}

/// Query vectors `V`, answer vectors `U`, and per-field matrices `M` and
/// `Minv`, stored as 32-bit floats. Vectors are rows; a path applies
/// matrices on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dim: usize,
    num_words: usize,
    num_fields: usize,
    query: Vec<f32>,
    answer: Vec<f32>,
    matrix: Vec<f32>,
    inverse: Vec<f32>,
}

impl ModelParams {
    pub fn zeros(dim: usize, num_words: usize, num_fields: usize) -> Self {
        ModelParams {
            dim,
            num_words,
            num_fields,
            query: vec![0.0; num_words * dim],
            answer: vec![0.0; num_words * dim],
            matrix: vec![0.0; num_fields * dim * dim],
            inverse: vec![0.0; num_fields * dim * dim],
        }
    }

    /// `M = (I + G)/2` with `G` and all vectors drawn from `N(0, 1/d)`;
    /// `Minv = Mᵀ`.
    pub fn init<R: Rng + ?Sized>(dim: usize, num_words: usize, num_fields: usize, rng: &mut R) -> Self {
        assert!(dim >= 2, "dimension must be at least 2");
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("valid std dev");
        let mut p = Self::zeros(dim, num_words, num_fields);
        for x in p.query.iter_mut().chain(p.answer.iter_mut()) {
            *x = normal.sample(rng) as f32;
        }
        let dd = dim * dim;
        for f in 0..num_fields {
            let m = &mut p.matrix[f * dd..(f + 1) * dd];
            for i in 0..dim {
                for j in 0..dim {
                    let g = normal.sample(rng);
                    let diag = if i == j { 1.0 } else { 0.0 };
                    m[i * dim + j] = ((diag + g) / 2.0) as f32;
                }
            }
            let inv = &mut p.inverse[f * dd..(f + 1) * dd];
            for i in 0..dim {
                for j in 0..dim {
                    inv[j * dim + i] = m[i * dim + j];
                }
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn num_fields(&self) -> usize {
        self.num_fields
    }

    fn range(&self, p: Param) -> (&[f32], std::ops::Range<usize>) {
        let d = self.dim;
        let dd = d * d;
        match p {
            Param::Query(w) => (&self.query, w * d..(w + 1) * d),
            Param::Answer(w) => (&self.answer, w * d..(w + 1) * d),
            Param::Matrix(f) => (&self.matrix, f * dd..(f + 1) * dd),
            Param::Inverse(f) => (&self.inverse, f * dd..(f + 1) * dd),
        }
    }

    pub fn block(&self, p: Param) -> &[f32] {
        let (data, r) = self.range(p);
        &data[r]
    }

    pub fn block_mut(&mut self, p: Param) -> &mut [f32] {
        let (_, r) = self.range(p);
        let data = match p {
            Param::Query(_) => &mut self.query,
            Param::Answer(_) => &mut self.answer,
            Param::Matrix(_) => &mut self.matrix,
            Param::Inverse(_) => &mut self.inverse,
        };
        &mut data[r]
    }

    pub fn block_f64(&self, p: Param) -> Vec<f64> {
        self.block(p).iter().map(|&x| x as f64).collect()
    }

    pub fn set_block(&mut self, p: Param, values: &[f64]) {
        for (x, &v) in self.block_mut(p).iter_mut().zip(values) {
            *x = v as f32;
        }
    }

    /// Set every matrix and inverse to the identity.
    pub fn set_identity_matrices(&mut self) {
        let id = linalg::identity(self.dim);
        for f in 0..self.num_fields {
            self.set_block(Param::Matrix(f), &id);
            self.set_block(Param::Inverse(f), &id);
        }
    }

    /// All blocks, vectors first.
    pub fn params(&self) -> impl Iterator<Item = Param> {
        let (n, m) = (self.num_words, self.num_fields);
        (0..n)
            .map(Param::Query)
            .chain((0..n).map(Param::Answer))
            .chain((0..m).map(Param::Matrix))
            .chain((0..m).map(Param::Inverse))
    }

    pub fn is_finite(&self) -> bool {
        [&self.query, &self.answer, &self.matrix, &self.inverse]
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Raw tables in storage order: query, answer, matrix, inverse.
    pub fn tables(&self) -> [&[f32]; 4] {
        [&self.query, &self.answer, &self.matrix, &self.inverse]
    }

    pub fn tables_mut(&mut self) -> [&mut Vec<f32>; 4] {
        [&mut self.query, &mut self.answer, &mut self.matrix, &mut self.inverse]
    }
}

impl ParamStore for ModelParams {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load(&self, p: Param, out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(self.block(p)) {
            *o = x as f64;
        }
    }

    fn add(&mut self, p: Param, delta: &[f64]) {
        for (x, &dv) in self.block_mut(p).iter_mut().zip(delta) {
            *x = (*x as f64 + dv) as f32;
        }
    }
}

/// Shared parameters for lock-free training. Loads and stores are relaxed
/// and updates are unsynchronized read-modify-writes, so concurrent workers
/// may lose or tear updates; every value read is still some finite `f32`
/// that was written.
#[derive(Debug)]
pub struct AtomicParams {
    dim: usize,
    num_words: usize,
    num_fields: usize,
    tables: [Vec<AtomicU32>; 4],
}

impl AtomicParams {
    pub fn from_params(p: &ModelParams) -> Self {
        let conv = |t: &[f32]| t.iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        let [q, a, m, i] = p.tables();
        AtomicParams {
            dim: p.dim,
            num_words: p.num_words,
            num_fields: p.num_fields,
            tables: [conv(q), conv(a), conv(m), conv(i)],
        }
    }

    pub fn to_params(&self) -> ModelParams {
        let mut p = ModelParams::zeros(self.dim, self.num_words, self.num_fields);
        for (dst, src) in p.tables_mut().into_iter().zip(&self.tables) {
            for (x, a) in dst.iter_mut().zip(src) {
                *x = f32::from_bits(a.load(Ordering::Relaxed));
            }
        }
        p
    }

    fn cells(&self, p: Param) -> &[AtomicU32] {
        let d = self.dim;
        let dd = d * d;
        match p {
            Param::Query(w) => &self.tables[0][w * d..(w + 1) * d],
            Param::Answer(w) => &self.tables[1][w * d..(w + 1) * d],
            Param::Matrix(f) => &self.tables[2][f * dd..(f + 1) * dd],
            Param::Inverse(f) => &self.tables[3][f * dd..(f + 1) * dd],
        }
    }
}

impl ParamStore for &AtomicParams {
    fn dim(&self) -> usize {
        self.dim
    }

    fn load(&self, p: Param, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.cells(p)) {
            *o = f32::from_bits(c.load(Ordering::Relaxed)) as f64;
        }
    }

    fn add(&mut self, p: Param, delta: &[f64]) {
        for (c, &dv) in self.cells(p).iter().zip(delta) {
            let x = f32::from_bits(c.load(Ordering::Relaxed)) as f64;
            c.store(((x + dv) as f32).to_bits(), Ordering::Relaxed);
        }
    }
}
