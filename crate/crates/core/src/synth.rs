//! A small synthetic world with known facts, for end-to-end checks.
//!
//! Entities belong to types (`drug`, `city`, ...). Each verb allows a random
//! subset of subjects and objects drawn from fixed types; templated CoNLL-U
//! sentences realize those facts, sometimes naming an entity's type as a
//! compound (`the drug aspirin`) or in a copula sentence (`aspirin is a
//! drug`). Type nouns never attach to verbs directly, so two-word queries
//! like `drug -ARG:COMP-> ban` are never seen as trees during training.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dcs::{parse_tree_literal, DcsTree, FieldId, Pos, Word};
use crate::eval::{CompletionItem, RelationInstance};
use crate::ud::{ud_to_dcs, UdSentence, UdToken};

const TYPES: [(&str, &[&str]); 7] = [
    ("person", &["farmer", "doctor", "teacher", "lawyer", "chef", "student", "nurse", "pilot", "writer", "baker"]),
    ("country", &["canada", "france", "japan", "brazil", "kenya", "norway", "chile", "egypt"]),
    ("drug", &["thalidomide", "aspirin", "heroin", "morphine", "insulin", "penicillin", "codeine", "ritalin"]),
    ("food", &["apple", "bread", "rice", "cheese", "soup", "fish", "pasta", "salad"]),
    ("city", &["paris", "london", "tokyo", "cairo", "lima", "oslo", "rome", "delhi"]),
    ("book", &["novel", "poem", "diary", "manual", "atlas", "memoir", "thesis", "script"]),
    ("animal", &["dog", "cat", "horse", "cow", "sheep", "goat", "rabbit", "tiger"]),
];

const PROPER: [&str; 2] = ["country", "city"];

/// How a verb's second argument attaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Object,
    Prep(&'static str),
}

struct VerbSpec {
    lemma: &'static str,
    subj: &'static [&'static str],
    obj: &'static [&'static str],
    slot: Slot,
}

const VERBS: [VerbSpec; 16] = [
    VerbSpec { lemma: "ban", subj: &["country"], obj: &["drug", "book"], slot: Slot::Object },
    VerbSpec { lemma: "sell", subj: &["person"], obj: &["drug", "food", "animal"], slot: Slot::Object },
    VerbSpec { lemma: "eat", subj: &["person", "animal"], obj: &["food"], slot: Slot::Object },
    VerbSpec { lemma: "cook", subj: &["person"], obj: &["food"], slot: Slot::Object },
    VerbSpec { lemma: "read", subj: &["person"], obj: &["book"], slot: Slot::Object },
    VerbSpec { lemma: "write", subj: &["person"], obj: &["book"], slot: Slot::Object },
    VerbSpec { lemma: "feed", subj: &["person"], obj: &["animal"], slot: Slot::Object },
    VerbSpec { lemma: "produce", subj: &["country"], obj: &["drug", "food"], slot: Slot::Object },
    VerbSpec { lemma: "import", subj: &["country"], obj: &["food", "animal"], slot: Slot::Object },
    VerbSpec { lemma: "visit", subj: &["person"], obj: &["city", "country"], slot: Slot::Object },
    VerbSpec { lemma: "live", subj: &["person", "animal"], obj: &["city"], slot: Slot::Prep("in") },
    VerbSpec { lemma: "travel", subj: &["person"], obj: &["city", "country"], slot: Slot::Prep("to") },
    VerbSpec { lemma: "prescribe", subj: &["person"], obj: &["drug"], slot: Slot::Object },
    VerbSpec { lemma: "meet", subj: &["person"], obj: &["person"], slot: Slot::Object },
    VerbSpec { lemma: "call", subj: &["person"], obj: &["person"], slot: Slot::Object },
    VerbSpec { lemma: "help", subj: &["person"], obj: &["person"], slot: Slot::Object },
];

const PERSON_VERBS: [&str; 3] = ["meet", "call", "help"];

/// Queries: (type noun, verb, field of the verb's edge to the type).
const QUERIES: [(&str, &str, &str); 20] = [
    ("drug", "ban", "COMP"),
    ("book", "ban", "COMP"),
    ("drug", "sell", "COMP"),
    ("food", "sell", "COMP"),
    ("animal", "sell", "COMP"),
    ("food", "eat", "COMP"),
    ("food", "cook", "COMP"),
    ("book", "read", "COMP"),
    ("book", "write", "COMP"),
    ("animal", "feed", "COMP"),
    ("drug", "produce", "COMP"),
    ("food", "import", "COMP"),
    ("city", "visit", "COMP"),
    ("drug", "prescribe", "COMP"),
    ("city", "live", "in"),
    ("country", "travel", "to"),
    ("country", "ban", "SUBJ"),
    ("country", "produce", "SUBJ"),
    ("person", "write", "SUBJ"),
    ("animal", "eat", "SUBJ"),
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub sentences: usize,
    pub completion_items: usize,
    pub relation_instances: usize,
    pub seed: u64,
    /// Fraction of each verb's subject and object candidates it allows.
    pub allowed_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { sentences: 20_000, completion_items: 100, relation_instances: 400, seed: 1, allowed_fraction: 0.5 }
    }
}

/// A composed query with its gold fillers.
#[derive(Debug, Clone)]
pub struct SynthQuery {
    pub tree: DcsTree,
    pub gold: Vec<Word>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub sentences: Vec<UdSentence>,
    pub queries: Vec<SynthQuery>,
    pub completion: Vec<CompletionItem>,
    pub relations: Vec<RelationInstance>,
}

struct World {
    type_of: BTreeMap<&'static str, &'static str>,
    subjects: Vec<Vec<&'static str>>,
    objects: Vec<Vec<&'static str>>,
}

fn members(ty: &str) -> &'static [&'static str] {
    TYPES.iter().find(|(t, _)| *t == ty).expect("known type").1
}

fn upos(ty: &str) -> &'static str {
    if PROPER.contains(&ty) {
        "PROPN"
    } else {
        "NOUN"
    }
}

fn pick_subset<R: Rng>(types: &[&str], fraction: f64, rng: &mut R) -> Vec<&'static str> {
    let mut out = Vec::new();
    for ty in types {
        let mut m: Vec<&'static str> = members(ty).to_vec();
        m.shuffle(rng);
        let keep = ((m.len() as f64 * fraction).round() as usize).clamp(1, m.len());
        out.extend_from_slice(&m[..keep]);
    }
    out.sort_unstable();
    out
}

impl World {
    fn new<R: Rng>(fraction: f64, rng: &mut R) -> World {
        let type_of = TYPES.iter().flat_map(|(t, ms)| ms.iter().map(move |m| (*m, *t))).collect();
        let mut subjects = Vec::new();
        let mut objects = Vec::new();
        for v in &VERBS {
            // person-person verbs keep every person on both sides
            let f = if PERSON_VERBS.contains(&v.lemma) { 1.0 } else { fraction };
            subjects.push(pick_subset(v.subj, f, rng));
            objects.push(pick_subset(v.obj, f, rng));
        }
        World { type_of, subjects, objects }
    }
}

/// Token spec: (form, lemma, upos, head position or None for root, deprel).
type Spec = (String, String, &'static str, Option<usize>, &'static str);

fn sentence(specs: Vec<Spec>) -> UdSentence {
    UdSentence {
        tokens: specs
            .into_iter()
            .enumerate()
            .map(|(i, (form, lemma, upos, head, deprel))| UdToken {
                id: i + 1,
                form,
                lemma,
                upos: upos.to_string(),
                head: head.map_or(0, |h| h + 1),
                deprel: deprel.to_string(),
            })
            .collect(),
    }
}

fn tok(form: &str, upos: &'static str, head: Option<usize>, deprel: &'static str) -> Spec {
    (form.to_string(), form.to_string(), upos, head, deprel)
}

/// Push a noun phrase headed at the returned position: optional determiner,
/// optional type compound, then the noun.
fn noun_phrase(specs: &mut Vec<Spec>, noun: &str, ty: &'static str, head: usize, deprel: &'static str, with_type: bool) -> usize {
    let proper = PROPER.contains(&ty);
    let n = specs.len() + if proper { 0 } else { 1 } + usize::from(with_type);
    if !proper {
        specs.push(tok("the", "DET", Some(n), "det"));
    }
    if with_type {
        specs.push(tok(ty, "NOUN", Some(n), "compound"));
    }
    specs.push(tok(noun, upos(ty), Some(head), deprel));
    n
}

struct Clause<'a> {
    verb: &'a VerbSpec,
    subj: &'a str,
    obj: &'a str,
}

/// Render a clause; `blank_obj` replaces the object with a blank token and
/// returns its position.
fn render<R: Rng>(world: &World, c: &Clause, rng: &mut R, extras: bool, blank_obj: bool) -> (UdSentence, usize) {
    let mut specs: Vec<Spec> = Vec::new();
    let subj_ty = world.type_of[c.subj];
    let obj_ty = world.type_of[c.obj];
    let subj_proper = PROPER.contains(&subj_ty);
    let subj_type = extras && rng.random_bool(0.25);
    // verb position is after the subject phrase
    let v = usize::from(!subj_proper) + usize::from(subj_type) + 1;
    noun_phrase(&mut specs, c.subj, subj_ty, v, "nsubj", subj_type);
    specs.push((format!("{}s", c.verb.lemma), c.verb.lemma.to_string(), "VERB", None, "root"));
    let obj_type = extras && !blank_obj && rng.random_bool(0.25);
    if let Slot::Prep(p) = c.verb.slot {
        let case_at = specs.len();
        specs.push(tok(p, "ADP", None, "case"));
        let head = noun_phrase(&mut specs, c.obj, obj_ty, v, "obl", obj_type);
        specs[case_at].3 = Some(head);
    } else {
        noun_phrase(&mut specs, c.obj, obj_ty, v, "obj", obj_type);
    }
    let blank = specs.len() - 1;
    if blank_obj {
        specs[blank].0 = "___".into();
        specs[blank].1 = "___".into();
    }
    if extras && !blank_obj && c.verb.slot == Slot::Object && rng.random_bool(0.2) {
        let city = *members("city").choose(rng).expect("cities");
        specs.push(tok("in", "ADP", Some(specs.len() + 1), "case"));
        specs.push(tok(city, "PROPN", Some(v), "obl"));
    }
    specs.push(tok(".", "PUNCT", Some(v), "punct"));
    (sentence(specs), blank)
}

fn copula(entity: &str, ty: &'static str) -> UdSentence {
    let proper = PROPER.contains(&ty);
    let mut specs = Vec::new();
    let root = if proper { 3 } else { 4 };
    if !proper {
        specs.push(tok("the", "DET", Some(1), "det"));
    }
    specs.push(tok(entity, upos(ty), Some(root), "nsubj"));
    specs.push(("is".into(), "be".into(), "AUX", Some(root), "cop"));
    specs.push(tok("a", "DET", Some(root), "det"));
    specs.push(tok(ty, "NOUN", None, "root"));
    specs.push(tok(".", "PUNCT", Some(root), "punct"));
    sentence(specs)
}

fn noun(lemma: &str) -> Word {
    Word::new(lemma, Pos::N)
}

/// Generate the corpus and the evaluation sets.
pub fn generate(cfg: &SynthConfig) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world = World::new(cfg.allowed_fraction, &mut rng);

    // held-out (subject, verb, object) triples for completion
    let mut held_out: BTreeSet<(usize, &str, &str)> = BTreeSet::new();
    let mut completion = Vec::new();
    let content_verbs: Vec<usize> = (0..VERBS.len()).filter(|&i| !PERSON_VERBS.contains(&VERBS[i].lemma)).collect();
    let mut attempts = 0;
    while completion.len() < cfg.completion_items && attempts < cfg.completion_items * 100 {
        attempts += 1;
        let vi = *content_verbs.choose(&mut rng).expect("verbs");
        let subj = *world.subjects[vi].choose(&mut rng).expect("subjects");
        let obj = *world.objects[vi].choose(&mut rng).expect("objects");
        if !held_out.insert((vi, subj, obj)) {
            continue;
        }
        let verb = &VERBS[vi];
        let (sent, blank) = render(&world, &Clause { verb, subj, obj }, &mut rng, false, true);
        let wrong: Vec<&str> = world
            .type_of
            .iter()
            .filter(|(_, ty)| !verb.obj.contains(ty))
            .map(|(m, _)| *m)
            .collect();
        let mut choices: Vec<Word> = wrong.choose_multiple(&mut rng, 4).map(|m| noun(m)).collect();
        let answer = rng.random_range(0..5);
        choices.insert(answer, noun(obj));
        completion.push(CompletionItem { sentence: sent, blank, choices, answer });
    }

    let mut sentences = Vec::with_capacity(cfg.sentences);
    let entities: Vec<(&str, &'static str)> = world.type_of.iter().map(|(m, t)| (*m, *t)).collect();
    while sentences.len() < cfg.sentences {
        if rng.random_bool(0.1) {
            let (e, ty) = *entities.choose(&mut rng).expect("entities");
            sentences.push(copula(e, ty));
            continue;
        }
        let vi = rng.random_range(0..VERBS.len());
        let subj = *world.subjects[vi].choose(&mut rng).expect("subjects");
        let obj = *world.objects[vi].choose(&mut rng).expect("objects");
        if subj == obj || held_out.contains(&(vi, subj, obj)) {
            continue;
        }
        let (sent, _) = render(&world, &Clause { verb: &VERBS[vi], subj, obj }, &mut rng, true, false);
        sentences.push(sent);
    }

    let queries = QUERIES
        .iter()
        .map(|&(ty, verb, field)| {
            let vi = VERBS.iter().position(|v| v.lemma == verb).expect("query verb");
            let pool = if field == "SUBJ" { &world.subjects[vi] } else { &world.objects[vi] };
            let gold = pool.iter().filter(|m| world.type_of[*m] == ty).map(|m| noun(m)).collect();
            let tree = parse_tree_literal(&format!("{ty}/N -ARG:{field}-> {verb}/V")).expect("query literal");
            SynthQuery { tree, gold }
        })
        .collect();

    let persons = members("person");
    let mut relations = Vec::with_capacity(cfg.relation_instances);
    while relations.len() < cfg.relation_instances {
        let lemma = *PERSON_VERBS.choose(&mut rng).expect("verbs");
        let verb = VERBS.iter().find(|v| v.lemma == lemma).expect("verb");
        let pair: Vec<&&str> = persons.choose_multiple(&mut rng, 2).collect();
        let (sent, _) = render(&world, &Clause { verb, subj: pair[0], obj: pair[1] }, &mut rng, false, false);
        let conv = ud_to_dcs(&sent).expect("templated sentences convert");
        let node = |lemma: &str| conv.tree.nodes().iter().position(|w| w.lemma == lemma).expect("entity node");
        let (s, o) = (node(pair[0]), node(pair[1]));
        let subject_first = rng.random_bool(0.5);
        let (e1, e2) = if subject_first { (s, o) } else { (o, s) };
        let label = if subject_first { FieldId::subj() } else { FieldId::comp() };
        relations.push(RelationInstance { tree: conv.tree, e1, e2, label: label.name().to_string() });
    }

    SyntheticData { sentences, queries, completion, relations }
}
