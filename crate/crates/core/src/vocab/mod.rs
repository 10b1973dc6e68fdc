//! Vocabulary with rare-word thresholds and unigram noise tables.
//!
//! Word counts are expected path-endpoint frequencies: a word gains the weight
//! of every enumerated path that ends at it. Field counts are weighted hop
//! traversals (each hop counts both of its fields). Words below `word_min`
//! collapse into `*UNKNOWN*/POS` and prepositions below `prep_min` into the
//! `*UNKNOWN*` field; `ARG`, `SUBJ` and `COMP` are always kept.

mod sampler;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use crate::dcs::{enumerate_paths, DcsTree, FieldId, Pos, Word};

pub use sampler::{sample_paths, sample_tree_paths, walk_paths, IndexedTree, PathSample};

pub const VOCAB_MAGIC: &str = "VDCS-VOCAB 1";

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("corpus contains no paths")]
    EmptyCorpus,
    #[error("thresholds must be at least 1")]
    BadThreshold,
    #[error("vocabulary file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Raw weighted counts from a set of trees. Partial counts from disjoint
/// shards merge by addition.
#[derive(Debug, Clone, Default)]
pub struct VocabCounts {
    pub words: BTreeMap<Word, f64>,
    pub fields: BTreeMap<FieldId, f64>,
    pub paths: usize,
}

impl VocabCounts {
    pub fn add_tree(&mut self, tree: &DcsTree) {
        for path in enumerate_paths(tree) {
            *self.words.entry(tree.word(path.end).clone()).or_default() += path.weight;
            for hop in &path.hops {
                *self.fields.entry(hop.near.clone()).or_default() += path.weight;
                *self.fields.entry(hop.far.clone()).or_default() += path.weight;
            }
            self.paths += 1;
        }
    }

    pub fn merge(mut self, other: VocabCounts) -> VocabCounts {
        for (w, c) in other.words {
            *self.words.entry(w).or_default() += c;
        }
        for (f, c) in other.fields {
            *self.fields.entry(f).or_default() += c;
        }
        self.paths += other.paths;
        self
    }

    /// Apply thresholds and build the unigram tables.
    pub fn finalize(self, word_min: f64, prep_min: f64) -> Result<Vocabulary, VocabError> {
        if word_min < 1.0 || prep_min < 1.0 {
            return Err(VocabError::BadThreshold);
        }
        if self.paths == 0 {
            return Err(VocabError::EmptyCorpus);
        }
        let mut words: BTreeMap<Word, f64> = Pos::ALL.iter().map(|&p| (Word::unknown(p), 0.0)).collect();
        for (w, c) in self.words {
            let key = if c >= word_min && !w.is_unknown() { w } else { Word::unknown(w.pos) };
            *words.entry(key).or_default() += c;
        }
        let mut fields: BTreeMap<FieldId, f64> = [FieldId::arg(), FieldId::subj(), FieldId::comp(), FieldId::unknown()]
            .into_iter()
            .map(|f| (f, 0.0))
            .collect();
        for (f, c) in self.fields {
            let key = if f.is_core() || (c >= prep_min && !f.is_unknown()) { f } else { FieldId::unknown() };
            *fields.entry(key).or_default() += c;
        }
        Ok(Vocabulary::from_counts(
            words.into_iter().collect(),
            fields.into_iter().collect(),
            word_min,
            prep_min,
        ))
    }
}

/// Count and threshold a corpus.
pub fn build_vocab<'a>(
    trees: impl IntoIterator<Item = &'a DcsTree>,
    word_min: f64,
    prep_min: f64,
) -> Result<Vocabulary, VocabError> {
    let mut counts = VocabCounts::default();
    for t in trees {
        counts.add_tree(t);
    }
    counts.finalize(word_min, prep_min)
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    words: Vec<Word>,
    word_counts: Vec<f64>,
    word_index: HashMap<Word, usize>,
    fields: Vec<FieldId>,
    field_counts: Vec<f64>,
    field_index: HashMap<FieldId, usize>,
    word_min: f64,
    prep_min: f64,
    word_table: Option<WeightedIndex<f64>>,
    field_table: Option<WeightedIndex<f64>>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.words == other.words
            && self.word_counts == other.word_counts
            && self.fields == other.fields
            && self.field_counts == other.field_counts
    }
}

fn by_count_desc<T: Ord>(mut entries: Vec<(T, f64)>) -> Vec<(T, f64)> {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries
}

impl Vocabulary {
    /// Build from explicit counts, ordered by descending count then name.
    pub fn from_counts(words: Vec<(Word, f64)>, fields: Vec<(FieldId, f64)>, word_min: f64, prep_min: f64) -> Self {
        Self::from_ordered(by_count_desc(words), by_count_desc(fields), word_min, prep_min)
    }

    /// Build keeping the given entry order.
    pub fn from_ordered(words: Vec<(Word, f64)>, fields: Vec<(FieldId, f64)>, word_min: f64, prep_min: f64) -> Self {
        let (words, word_counts): (Vec<_>, Vec<_>) = words.into_iter().unzip();
        let (fields, field_counts): (Vec<_>, Vec<_>) = fields.into_iter().unzip();
        let word_index = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let field_index = fields.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
        let word_table = WeightedIndex::new(&word_counts).ok();
        let field_table = WeightedIndex::new(&field_counts).ok();
        Vocabulary {
            words,
            word_counts,
            word_index,
            fields,
            field_counts,
            field_index,
            word_min,
            prep_min,
            word_table,
            field_table,
        }
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn fields(&self) -> &[FieldId] {
        &self.fields
    }

    pub fn word(&self, id: usize) -> &Word {
        &self.words[id]
    }

    pub fn field(&self, id: usize) -> &FieldId {
        &self.fields[id]
    }

    pub fn word_count(&self, id: usize) -> f64 {
        self.word_counts[id]
    }

    pub fn field_count(&self, id: usize) -> f64 {
        self.field_counts[id]
    }

    pub fn word_min(&self) -> f64 {
        self.word_min
    }

    pub fn prep_min(&self) -> f64 {
        self.prep_min
    }

    /// Exact lookup, no fallback.
    pub fn word_id(&self, word: &Word) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    pub fn field_id(&self, field: &FieldId) -> Option<usize> {
        self.field_index.get(field).copied()
    }

    /// Lookup falling back to `*UNKNOWN*/POS`.
    pub fn resolve_word(&self, word: &Word) -> Option<usize> {
        self.word_id(word).or_else(|| self.word_id(&Word::unknown(word.pos)))
    }

    /// Lookup falling back to the `*UNKNOWN*` field.
    pub fn resolve_field(&self, field: &FieldId) -> Option<usize> {
        self.field_id(field).or_else(|| self.field_id(&FieldId::unknown()))
    }

    /// Unigram draw over word counts.
    pub fn draw_word<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.word_table.as_ref().expect("vocabulary has positive word counts").sample(rng)
    }

    pub fn draw_field<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.field_table.as_ref().expect("vocabulary has positive field counts").sample(rng)
    }

    pub fn unigram_draw_word<R: Rng + ?Sized>(&self, rng: &mut R) -> &Word {
        self.word(self.draw_word(rng))
    }

    pub fn unigram_draw_field<R: Rng + ?Sized>(&self, rng: &mut R) -> &FieldId {
        self.field(self.draw_field(rng))
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{VOCAB_MAGIC}")?;
        for (w, c) in self.words.iter().zip(&self.word_counts) {
            writeln!(out, "W\t{w}\t{c}")?;
        }
        for (f, c) in self.fields.iter().zip(&self.field_counts) {
            writeln!(out, "F\t{f}\t{c}")?;
        }
        Ok(())
    }

    /// Read a vocabulary file. Thresholds are not stored and read back as 1.
    pub fn read<R: BufRead>(input: R) -> Result<Vocabulary, VocabError> {
        let mut lines = input.lines();
        let bad = |line: usize, reason: String| VocabError::Format { line, reason };
        match lines.next() {
            Some(Ok(h)) if h.trim_end() == VOCAB_MAGIC => {}
            Some(Err(e)) => return Err(e.into()),
            _ => return Err(bad(1, format!("expected header {VOCAB_MAGIC:?}"))),
        }
        let mut words = Vec::new();
        let mut fields = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [kind, name, count] = cols[..] else {
                return Err(bad(lineno, "expected 3 columns".into()));
            };
            let count: f64 = count
                .parse()
                .map_err(|_| bad(lineno, format!("bad count {count:?}")))?;
            match kind {
                "W" => words.push((name.parse::<Word>().map_err(|e| bad(lineno, e.to_string()))?, count)),
                "F" if !name.is_empty() => fields.push((FieldId::new(name), count)),
                _ => return Err(bad(lineno, format!("unknown record {kind:?}"))),
            }
        }
        Ok(Vocabulary::from_ordered(words, fields, 1.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(line: &str) -> DcsTree {
        DcsTree::from_line(line).unwrap()
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn toy_corpus() -> Vec<DcsTree> {
        vec![
            t("0\tplay/V kid/N\t0:1:SUBJ:ARG"),
            t("0\tban/V canada/N thalidomide/N\t0:1:SUBJ:ARG;0:2:COMP:ARG"),
            t("0\tplay/V kid/N grass/N\t0:1:SUBJ:ARG;0:2:on:ARG"),
        ]
    }

    #[test]
    fn counts_are_endpoint_weights() {
        // hand-summed: tree 1 gives play 1, kid 1; tree 2 (star, centre ban
        // deg 2) gives ban 2, canada 1+1, thalidomide 1+1; tree 3 gives play 2,
        // kid 2, grass 2
        let v = build_vocab(&toy_corpus(), 1.0, 1.0).unwrap();
        let count = |s: &str| v.word_count(v.word_id(&w(s)).unwrap());
        assert_eq!(count("play/V"), 3.0);
        assert_eq!(count("kid/N"), 3.0);
        assert_eq!(count("ban/V"), 2.0);
        assert_eq!(count("canada/N"), 2.0);
        assert_eq!(count("thalidomide/N"), 2.0);
        assert_eq!(count("grass/N"), 2.0);
        // placeholders exist but are empty at threshold 1
        assert_eq!(count("*UNKNOWN*/N"), 0.0);
        let fcount = |s: &str| v.field_count(v.field_id(&FieldId::new(s)).unwrap());
        // every hop counts both fields; ARG appears on every edge
        // star trees: 4 one-hop paths plus 2 two-hop paths, each hop carrying ARG
        assert_eq!(fcount("ARG"), 2.0 + 8.0 + 8.0);
        assert_eq!(fcount("SUBJ"), 2.0 + 4.0 + 4.0);
        assert_eq!(fcount("on"), 4.0);
    }

    #[test]
    fn threshold_boundary() {
        // thalidomide has weight 2: kept at word_min 2, unknown at 3
        let v = build_vocab(&toy_corpus(), 2.0, 1.0).unwrap();
        assert!(v.word_id(&w("thalidomide/N")).is_some());
        let v = build_vocab(&toy_corpus(), 3.0, 1.0).unwrap();
        assert!(v.word_id(&w("thalidomide/N")).is_none());
        let unk = v.word_id(&Word::unknown(Pos::N)).unwrap();
        assert_eq!(v.resolve_word(&w("thalidomide/N")), Some(unk));
        // canada 2 + thalidomide 2 + grass 2
        assert_eq!(v.word_count(unk), 6.0);
        assert_eq!(v.word_count(v.word_id(&Word::unknown(Pos::V)).unwrap()), 2.0);
        for (i, word) in v.words().iter().enumerate() {
            if !word.is_unknown() {
                assert!(v.word_count(i) >= 3.0);
            }
        }
    }

    #[test]
    fn rare_prepositions_become_unknown_field() {
        let v = build_vocab(&toy_corpus(), 1.0, 5.0).unwrap();
        assert!(v.field_id(&FieldId::new("on")).is_none());
        assert_eq!(v.resolve_field(&FieldId::new("on")), v.field_id(&FieldId::unknown()));
        // core fields survive any threshold
        let v = build_vocab(&toy_corpus(), 1.0, 1e9).unwrap();
        assert!(v.field_id(&FieldId::subj()).is_some());
        assert!(v.field_id(&FieldId::comp()).is_some());
    }

    #[test]
    fn identity_at_threshold_one() {
        let v = build_vocab(&toy_corpus(), 1.0, 1.0).unwrap();
        let real: Vec<&Word> = v.words().iter().filter(|w| !w.is_unknown()).collect();
        assert_eq!(real.len(), 6);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_vocab(&[], 1.0, 1.0), Err(VocabError::EmptyCorpus)));
        let single = [DcsTree::single(w("drug/N"))];
        assert!(matches!(build_vocab(&single, 1.0, 1.0), Err(VocabError::EmptyCorpus)));
        assert!(matches!(build_vocab(&toy_corpus(), 0.0, 1.0), Err(VocabError::BadThreshold)));
    }

    #[test]
    fn merge_is_additive() {
        let corpus = toy_corpus();
        let mut a = VocabCounts::default();
        a.add_tree(&corpus[0]);
        let mut b = VocabCounts::default();
        b.add_tree(&corpus[1]);
        b.add_tree(&corpus[2]);
        let merged = a.merge(b).finalize(1.0, 1.0).unwrap();
        assert_eq!(merged, build_vocab(&corpus, 1.0, 1.0).unwrap());
    }

    #[test]
    fn single_word_draws_with_certainty() {
        let v = Vocabulary::from_counts(vec![(w("a/N"), 4.0)], vec![(FieldId::arg(), 1.0)], 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(v.unigram_draw_word(&mut rng), &w("a/N"));
        }
    }

    #[test]
    fn three_to_one_frequency() {
        let v = Vocabulary::from_counts(vec![(w("a/N"), 3.0), (w("b/N"), 1.0)], vec![(FieldId::arg(), 1.0)], 1.0, 1.0);
        let a = v.word_id(&w("a/N")).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| v.draw_word(&mut rng) == a).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn file_roundtrip() {
        let v = build_vocab(&toy_corpus(), 2.0, 1.0).unwrap();
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("VDCS-VOCAB 1\nW\t"));
        assert!(text.contains("F\tARG\t"));
        let back = Vocabulary::read(buf.as_slice()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::read("nope\n".as_bytes()).is_err());
        assert!(Vocabulary::read("VDCS-VOCAB 1\nW\tx/N\tabc\n".as_bytes()).is_err());
    }
}
