//! Rule-based conversion from UD trees to DCS trees.

use std::collections::{HashMap, HashSet};

use crate::dcs::{DcsTree, Edge, FieldId, Pos, Word};

use super::{UdSentence, UdToken};

/// How a dependent attaches to its content governor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelationRule {
    /// Fixed `(parent field, child field)` pair.
    Fields(FieldId, FieldId),
    /// Parent field is the lemma of the dependent's `case`/`mark` child;
    /// `ARG:ARG` when there is none.
    Preposition,
    /// `ARG` on the noun, `SUBJ` or `COMP` on the clause head depending on the
    /// relativizer's role inside the clause.
    RelativeClause,
    /// Attach to the governor's own parent, copying the governor's fields.
    Conjunct,
    /// Function word folded into its head.
    Absorb,
}

/// Data-driven relation table. Lookup tries the full relation (`nsubj:pass`)
/// first, then its base (`nsubj`), then falls back to `ARG:ARG`.
#[derive(Debug, Clone)]
pub struct RuleTable {
    relations: HashMap<String, RelationRule>,
    relativizers: HashSet<String>,
}

impl Default for RuleTable {
    fn default() -> Self {
        let f = |p: &str, c: &str| RelationRule::Fields(FieldId::new(p), FieldId::new(c));
        let mut relations = HashMap::new();
        relations.insert("nsubj".to_string(), f("SUBJ", "ARG"));
        relations.insert("nsubj:pass".to_string(), f("COMP", "ARG"));
        relations.insert("obj".to_string(), f("COMP", "ARG"));
        relations.insert("dobj".to_string(), f("COMP", "ARG"));
        relations.insert("iobj".to_string(), f("to", "ARG"));
        for rel in ["amod", "compound", "nummod", "det:poss", "nmod:poss", "advmod"] {
            relations.insert(rel.to_string(), f("ARG", "ARG"));
        }
        for rel in ["nmod", "obl", "advcl", "acl"] {
            relations.insert(rel.to_string(), RelationRule::Preposition);
        }
        relations.insert("acl:relcl".to_string(), RelationRule::RelativeClause);
        relations.insert("conj".to_string(), RelationRule::Conjunct);
        for rel in ["cop", "aux", "case", "det", "punct", "mark", "cc", "expl", "compound:prt"] {
            relations.insert(rel.to_string(), RelationRule::Absorb);
        }
        let relativizers = ["that", "which", "who", "whom"].iter().map(|s| s.to_string()).collect();
        RuleTable { relations, relativizers }
    }
}

/// Map a UD UPOS tag onto the coarse tag set.
pub fn coarse_pos(upos: &str) -> Pos {
    match upos {
        "NOUN" | "PROPN" | "NUM" => Pos::N,
        "VERB" => Pos::V,
        "ADJ" => Pos::J,
        "PRON" => Pos::P,
        "ADV" => Pos::R,
        _ => Pos::X,
    }
}

/// A UPOS tag that maps back onto `pos`.
pub fn upos_for(pos: Pos) -> &'static str {
    match pos {
        Pos::N => "NOUN",
        Pos::V => "VERB",
        Pos::J => "ADJ",
        Pos::P => "PRON",
        Pos::R => "ADV",
        Pos::X => "X",
    }
}

/// A converted sentence: the tree plus the node each UD token became, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub tree: DcsTree,
    /// Indexed by token id - 1.
    pub node_of_token: Vec<Option<usize>>,
}

fn normalize_lemma(t: &UdToken) -> String {
    let raw = if t.lemma.is_empty() || t.lemma == "_" { &t.form } else { &t.lemma };
    raw.to_lowercase()
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect()
}

fn field_name(lemma: &str) -> String {
    lemma
        .to_lowercase()
        .chars()
        .map(|c| if c.is_whitespace() || c == ':' || c == ';' { '_' } else { c })
        .collect()
}

fn base(rel: &str) -> &str {
    rel.split_once(':').map_or(rel, |(b, _)| b)
}

impl RuleTable {
    pub fn empty() -> Self {
        RuleTable {
            relations: HashMap::new(),
            relativizers: HashSet::new(),
        }
    }

    pub fn set(&mut self, relation: &str, rule: RelationRule) {
        self.relations.insert(relation.to_string(), rule);
    }

    pub fn rule(&self, deprel: &str) -> RelationRule {
        self.relations
            .get(deprel)
            .or_else(|| self.relations.get(base(deprel)))
            .cloned()
            .unwrap_or_else(|| RelationRule::Fields(FieldId::arg(), FieldId::arg()))
    }

    /// Convert a validated sentence; `None` when fewer than two content words
    /// survive.
    pub fn convert(&self, sent: &UdSentence) -> Option<Converted> {
        let n = sent.tokens.len();
        let tok = |id: usize| &sent.tokens[id - 1];

        // relative pronouns are coreferent with the modified noun: drop them and
        // remember their role for the clause head
        let mut relativizer_role: HashMap<usize, FieldId> = HashMap::new();
        let mut is_relativizer = vec![false; n + 1];
        for t in &sent.tokens {
            if t.head == 0 || self.rule(&tok(t.head).deprel) != RelationRule::RelativeClause {
                continue;
            }
            if self.relativizers.contains(&t.lemma.to_lowercase()) && base(&t.deprel) != "mark" {
                is_relativizer[t.id] = true;
                let role = if t.deprel == "nsubj" { FieldId::subj() } else { FieldId::comp() };
                relativizer_role.entry(t.head).or_insert(role);
            }
        }

        let content: Vec<bool> = std::iter::once(false)
            .chain(sent.tokens.iter().map(|t| {
                coarse_pos(&t.upos) != Pos::X
                    && (t.head == 0 || self.rule(&t.deprel) != RelationRule::Absorb)
                    && !is_relativizer[t.id]
            }))
            .collect();
        let content_ids: Vec<usize> = (1..=n).filter(|&i| content[i]).collect();
        if content_ids.len() < 2 {
            return None;
        }

        let governor = |id: usize| -> Option<usize> {
            let mut cur = tok(id).head;
            while cur != 0 {
                if content[cur] {
                    return Some(cur);
                }
                cur = tok(cur).head;
            }
            None
        };
        let depth = |id: usize| {
            let mut d = 0;
            let mut cur = tok(id).head;
            while cur != 0 {
                d += 1;
                cur = tok(cur).head;
            }
            d
        };

        let tops: Vec<usize> = content_ids.iter().copied().filter(|&i| governor(i).is_none()).collect();
        let root_tok = *tops.iter().min_by_key(|&&i| (depth(i), i)).expect("some content token is topmost");

        // attachment[id] = (parent token, parent field, child field)
        let mut attachment: HashMap<usize, (usize, FieldId, FieldId)> = HashMap::new();
        fn resolve(
            id: usize,
            table: &RuleTable,
            sent: &UdSentence,
            root_tok: usize,
            governor: &dyn Fn(usize) -> Option<usize>,
            relativizer_role: &HashMap<usize, FieldId>,
            memo: &mut HashMap<usize, (usize, FieldId, FieldId)>,
        ) -> Option<(usize, FieldId, FieldId)> {
            if id == root_tok {
                return None;
            }
            if let Some(a) = memo.get(&id) {
                return Some(a.clone());
            }
            let t = sent.token(id);
            let a = match governor(id) {
                None => (root_tok, FieldId::arg(), FieldId::arg()),
                Some(g) => match table.rule(&t.deprel) {
                    RelationRule::Fields(p, c) => (g, p, c),
                    RelationRule::Preposition => {
                        let prep = sent
                            .dependents(id)
                            .find(|d| matches!(base(&d.deprel), "case" | "mark"))
                            .map(|d| field_name(&normalize_lemma(d)))
                            .filter(|p| !p.is_empty());
                        match prep {
                            Some(p) => (g, FieldId::new(&p), FieldId::arg()),
                            None => (g, FieldId::arg(), FieldId::arg()),
                        }
                    }
                    RelationRule::RelativeClause => {
                        let role = relativizer_role.get(&id).cloned().unwrap_or_else(FieldId::comp);
                        (g, FieldId::arg(), role)
                    }
                    RelationRule::Conjunct => {
                        match resolve(g, table, sent, root_tok, governor, relativizer_role, memo) {
                            Some((gg, pf, cf)) => (gg, pf, cf),
                            None => (g, FieldId::arg(), FieldId::arg()),
                        }
                    }
                    RelationRule::Absorb => (g, FieldId::arg(), FieldId::arg()),
                },
            };
            memo.insert(id, a.clone());
            Some(a)
        }
        for &id in &content_ids {
            resolve(id, self, sent, root_tok, &governor, &relativizer_role, &mut attachment);
        }

        let mut node_of_token = vec![None; n];
        let mut nodes = Vec::with_capacity(content_ids.len());
        for &id in &content_ids {
            node_of_token[id - 1] = Some(nodes.len());
            let t = tok(id);
            nodes.push(Word::new(normalize_lemma(t), coarse_pos(&t.upos)));
        }
        let edges = content_ids
            .iter()
            .filter(|&&id| id != root_tok)
            .map(|&id| {
                let (p, pf, cf) = attachment[&id].clone();
                Edge {
                    parent: node_of_token[p - 1].unwrap(),
                    child: node_of_token[id - 1].unwrap(),
                    parent_field: pf,
                    child_field: cf,
                }
            })
            .collect();
        let tree = DcsTree::new(nodes, node_of_token[root_tok - 1].unwrap(), edges)
            .expect("attachments follow content ancestors, so they form a tree");
        Some(Converted { tree, node_of_token })
    }
}

/// Convert with the default rule table.
pub fn ud_to_dcs(sent: &UdSentence) -> Option<Converted> {
    RuleTable::default().convert(sent)
}
