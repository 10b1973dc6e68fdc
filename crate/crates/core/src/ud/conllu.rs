use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::UdError;

/// One syntactic word of a CoNLL-U sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UdToken {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UdSentence {
    pub tokens: Vec<UdToken>,
}

impl UdSentence {
    /// Check that ids run 1..=n and heads form a single rooted tree.
    /// `first_line` is only used for error positions.
    pub fn validate(&self, first_line: usize) -> Result<(), UdError> {
        let n = self.tokens.len();
        let malformed = |reason: String| UdError::MalformedLine { line: first_line, reason };
        let not_tree = |reason: String| UdError::CyclicTree { line: first_line, reason };
        for (i, t) in self.tokens.iter().enumerate() {
            if t.id != i + 1 {
                return Err(malformed(format!("token {} has id {}", i + 1, t.id)));
            }
            if t.head > n {
                return Err(malformed(format!("token {} has head {} beyond sentence end", t.id, t.head)));
            }
            if t.head == t.id {
                return Err(not_tree(format!("token {} is its own head", t.id)));
            }
        }
        let roots = self.tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(not_tree(format!("{roots} root tokens")));
        }
        for t in &self.tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                steps += 1;
                if steps > n {
                    return Err(not_tree(format!("cycle through token {}", t.id)));
                }
                cur = self.tokens[cur - 1].head;
            }
        }
        Ok(())
    }

    pub fn token(&self, id: usize) -> &UdToken {
        &self.tokens[id - 1]
    }

    /// Ids of the dependents of `id` (0 for the root's dependents).
    pub fn dependents(&self, id: usize) -> impl Iterator<Item = &UdToken> {
        self.tokens.iter().filter(move |t| t.head == id)
    }
}

/// Parse CoNLL-U text. Comment lines are ignored, multiword-token ranges
/// (`1-2`) and empty nodes (`1.1`) are skipped.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<UdSentence>, UdError> {
    let mut sentences = Vec::new();
    let mut current = UdSentence::default();
    let mut first_line = 0;

    let mut finish = |current: &mut UdSentence, first_line: usize| -> Result<(), UdError> {
        if current.tokens.is_empty() {
            return Ok(());
        }
        let sent = std::mem::take(current);
        sent.validate(first_line)?;
        sentences.push(sent);
        Ok(())
    };

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut current, first_line)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(UdError::MalformedLine {
                line: lineno,
                reason: format!("expected 10 columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let number = |s: &str, what: &str| {
            s.parse::<usize>().map_err(|_| UdError::MalformedLine {
                line: lineno,
                reason: format!("non-numeric {what} {s:?}"),
            })
        };
        let id = number(cols[0], "id")?;
        let head = number(cols[6], "head")?;
        if id == 0 {
            return Err(UdError::MalformedLine { line: lineno, reason: "id 0".into() });
        }
        if current.tokens.is_empty() {
            first_line = lineno;
        }
        current.tokens.push(UdToken {
            id,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    finish(&mut current, first_line)?;
    Ok(sentences)
}

/// Render one sentence back to CoNLL-U (unused columns as `_`).
pub fn write_conllu_sentence(sent: &UdSentence, out: &mut String) {
    for t in &sent.tokens {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_\n",
            t.id, t.form, t.lemma, t.upos, t.head, t.deprel
        ));
    }
    out.push('\n');
}
