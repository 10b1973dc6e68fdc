//! Model file: text header with the vocabulary, then raw little-endian f32.
//!
//! ```text
//! VECDCS 1
//! dim <d>
//! words <n>
//! fields <m>
//! <lemma/POS>\t<count>     (n lines)
//! <field>\t<count>         (m lines)
//! <blank line>
//! V rows (n×d), U rows (n×d), then per field M (d×d) and Minv (d×d)
//! ```
//!
//! Vectors are row vectors and matrices act on the right (`v·M`), stored
//! row-major.

use std::io::{Read, Write};

use super::{Model, ModelError, ModelParams, Param};
use crate::dcs::{FieldId, Word};
use crate::vocab::Vocabulary;

pub const MODEL_MAGIC: &str = "VECDCS 1";

pub fn save_model<W: Write>(model: &Model, mut out: W) -> std::io::Result<()> {
    let p = &model.params;
    let v = &model.vocab;
    let mut header = format!(
        "{MODEL_MAGIC}\ndim {}\nwords {}\nfields {}\n",
        p.dim(),
        v.num_words(),
        v.num_fields()
    );
    for (i, w) in v.words().iter().enumerate() {
        header.push_str(&format!("{w}\t{}\n", v.word_count(i)));
    }
    for (i, f) in v.fields().iter().enumerate() {
        header.push_str(&format!("{f}\t{}\n", v.field_count(i)));
    }
    header.push('\n');
    out.write_all(header.as_bytes())?;

    let mut buf = Vec::with_capacity(4 * p.tables().iter().map(|t| t.len()).sum::<usize>());
    let blocks = (0..p.num_words())
        .map(Param::Query)
        .chain((0..p.num_words()).map(Param::Answer))
        .chain((0..p.num_fields()).flat_map(|f| [Param::Matrix(f), Param::Inverse(f)]));
    for b in blocks {
        for x in p.block(b) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    out.flush()
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str, ModelError> {
        let rest = &self.data[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(ModelError::TruncatedFile { offset: self.data.len() })?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| ModelError::Header("header is not UTF-8".into()))
    }

    fn keyed(&mut self, key: &str) -> Result<usize, ModelError> {
        let line = self.line()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .and_then(|r| r.parse().ok())
            .ok_or_else(|| ModelError::Header(format!("expected `{key} <number>`, found {line:?}")))
    }
}

fn entry(line: &str) -> Result<(&str, f64), ModelError> {
    let (name, count) = line
        .split_once('\t')
        .ok_or_else(|| ModelError::Header(format!("expected `name<TAB>count`, found {line:?}")))?;
    let count = count
        .parse()
        .map_err(|_| ModelError::Header(format!("bad count in {line:?}")))?;
    Ok((name, count))
}

pub fn load_model<R: Read>(mut input: R) -> Result<Model, ModelError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if !data.starts_with(format!("{MODEL_MAGIC}\n").as_bytes()) {
        return Err(ModelError::BadMagic);
    }
    let mut cur = Cursor { data: &data, pos: MODEL_MAGIC.len() + 1 };
    let d = cur.keyed("dim")?;
    let n = cur.keyed("words")?;
    let m = cur.keyed("fields")?;
    if d < 2 {
        return Err(ModelError::DimensionMismatch(format!("dimension {d} is below 2")));
    }
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let (name, c) = entry(cur.line()?)?;
        let w: Word = name.parse().map_err(|e: crate::dcs::DcsError| ModelError::Header(e.to_string()))?;
        words.push((w, c));
    }
    let mut fields = Vec::with_capacity(m);
    for _ in 0..m {
        let (name, c) = entry(cur.line()?)?;
        if name.is_empty() {
            return Err(ModelError::Header("empty field name".into()));
        }
        fields.push((FieldId::new(name), c));
    }
    if !cur.line()?.is_empty() {
        return Err(ModelError::DimensionMismatch("header lists fewer entries than the file holds".into()));
    }

    let expected = 4 * (2 * n * d + 2 * m * d * d);
    let body = &data[cur.pos..];
    if body.len() < expected {
        return Err(ModelError::TruncatedFile { offset: data.len() });
    }
    if body.len() > expected {
        return Err(ModelError::DimensionMismatch(format!(
            "{} bytes of parameters, expected {expected}",
            body.len()
        )));
    }
    let mut floats = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut params = ModelParams::zeros(d, n, m);
    let blocks: Vec<Param> = (0..n)
        .map(Param::Query)
        .chain((0..n).map(Param::Answer))
        .chain((0..m).flat_map(|f| [Param::Matrix(f), Param::Inverse(f)]))
        .collect();
    for b in blocks {
        for x in params.block_mut(b) {
            *x = floats.next().expect("length checked");
        }
    }
    let vocab = Vocabulary::from_ordered(words, fields, 1.0, 1.0);
    Ok(Model::new(vocab, params))
}
