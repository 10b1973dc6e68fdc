//! Set-theoretic DCS over a finite toy database.
//!
//! Denotations are finite sets of tuples. Inverse images are never
//! materialised: `x ∩ π⁻¹_P(V)` is evaluated as a membership filter on `x`.

use std::collections::{BTreeMap, BTreeSet};

use super::{DcsError, DcsTree, FieldId, TreePath, Word};

pub type Value = String;

/// A thing in a denotation: a non-empty map from fields to opaque values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple(BTreeMap<FieldId, Value>);

impl Tuple {
    pub fn new<I, F, V>(assignments: I) -> Self
    where
        I: IntoIterator<Item = (F, V)>,
        F: AsRef<str>,
        V: Into<Value>,
    {
        let map: BTreeMap<FieldId, Value> = assignments
            .into_iter()
            .map(|(f, v)| (FieldId::new(f.as_ref()), v.into()))
            .collect();
        assert!(!map.is_empty(), "a tuple assigns at least one field");
        Tuple(map)
    }

    pub fn get(&self, field: &FieldId) -> Option<&Value> {
        self.0.get(field)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&FieldId, &Value)> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Denotation(BTreeSet<Tuple>);

impl Denotation {
    pub fn new(tuples: impl IntoIterator<Item = Tuple>) -> Self {
        Denotation(tuples.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.0.iter()
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.0.contains(t)
    }

    pub fn intersection(&self, other: &Denotation) -> Denotation {
        Denotation(self.0.intersection(&other.0).cloned().collect())
    }
}

impl FromIterator<Tuple> for Denotation {
    fn from_iter<I: IntoIterator<Item = Tuple>>(iter: I) -> Self {
        Denotation::new(iter)
    }
}

/// Word denotations of a toy world.
#[derive(Debug, Clone, Default)]
pub struct Database {
    entries: BTreeMap<Word, Denotation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: Word, den: Denotation) {
        self.entries.insert(word, den);
    }

    pub fn get(&self, word: &Word) -> Result<&Denotation, DcsError> {
        self.entries.get(word).ok_or_else(|| DcsError::UnknownWord(word.clone()))
    }

    /// Every tuple of every entry: the finite universe inverse images range over.
    pub fn universe(&self) -> Denotation {
        self.entries.values().flat_map(|d| d.iter().cloned()).collect()
    }
}

/// `π_f(den)`; every tuple must assign `f`.
pub fn project(den: &Denotation, field: &FieldId) -> Result<BTreeSet<Value>, DcsError> {
    den.iter()
        .map(|t| {
            t.get(field)
                .cloned()
                .ok_or_else(|| DcsError::MissingField { field: field.clone() })
        })
        .collect()
}

/// `π_f(den)` ignoring tuples that lack `f`.
fn project_present(den: &Denotation, field: &FieldId) -> BTreeSet<Value> {
    den.iter().filter_map(|t| t.get(field).cloned()).collect()
}

/// `parent ∩ π⁻¹_p(values)`: the tuples whose `p` value is in `values`.
/// Tuples without `p` are dropped.
pub fn restrict_by_child(parent: &Denotation, p: &FieldId, values: &BTreeSet<Value>) -> Denotation {
    parent
        .iter()
        .filter(|t| t.get(p).is_some_and(|v| values.contains(v)))
        .cloned()
        .collect()
}

/// Bottom-up denotation of the whole tree:
/// `⟦x⟧ = x ∩ ⋂_i π⁻¹_{P_i}(π_{L_i}(⟦y_i⟧))`.
pub fn denotation_of_tree(tree: &DcsTree, db: &Database) -> Result<Denotation, DcsError> {
    let mut dens: Vec<Option<Denotation>> = vec![None; tree.len()];
    for u in tree.post_order() {
        let mut den = db.get(tree.word(u))?.clone();
        for e in tree.child_edges(u) {
            let child = dens[e.child].take().expect("children evaluated first");
            let values = project_present(&child, &e.child_field);
            den = restrict_by_child(&den, &e.parent_field, &values);
        }
        dens[u] = Some(den);
    }
    Ok(dens[tree.root()].take().expect("root evaluated"))
}

/// The chain `π⁻¹_N(π_K(…π⁻¹_L(π_P(x))…))` along `path`.
///
/// Intermediate inverse images range over the database universe; the last one
/// is filtered against the end word's own denotation.
pub fn path_denotation(path: &TreePath, tree: &DcsTree, db: &Database) -> Result<Denotation, DcsError> {
    let mut current = db.get(tree.word(path.start))?.clone();
    let end = db.get(tree.word(path.end))?;
    let universe = db.universe();
    for (k, hop) in path.hops.iter().enumerate() {
        let values = project_present(&current, &hop.near);
        let pool = if k + 1 == path.hops.len() { end } else { &universe };
        current = restrict_by_child(pool, &hop.far, &values);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn den(tuples: &[&[(&str, &str)]]) -> Denotation {
        tuples.iter().map(|t| Tuple::new(t.iter().copied())).collect()
    }

    fn values(vs: &[&str]) -> BTreeSet<Value> {
        vs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn project_examples() {
        let ban = den(&[&[("SUBJ", "Canada"), ("COMP", "Thalidomide")]]);
        assert_eq!(project(&ban, &FieldId::comp()).unwrap(), values(&["Thalidomide"]));
        assert!(project(&Denotation::default(), &FieldId::arg()).unwrap().is_empty());
        let d = den(&[&[("ARG", "a")], &[("ARG", "b")], &[("ARG", "a")]]);
        assert_eq!(d.len(), 2);
        assert_eq!(project(&d, &FieldId::arg()).unwrap(), values(&["a", "b"]));
        assert_eq!(
            project(&ban, &FieldId::arg()),
            Err(DcsError::MissingField { field: FieldId::arg() })
        );
    }

    #[test]
    fn restrict_examples() {
        let drug = den(&[&[("ARG", "Aspirin")], &[("ARG", "Thalidomide")]]);
        assert_eq!(
            restrict_by_child(&drug, &FieldId::arg(), &values(&["Thalidomide"])),
            den(&[&[("ARG", "Thalidomide")]])
        );
        assert!(restrict_by_child(&drug, &FieldId::arg(), &BTreeSet::new()).is_empty());
        let sell = den(&[&[("SUBJ", "John"), ("COMP", "Aspirin")]]);
        assert_eq!(restrict_by_child(&sell, &FieldId::subj(), &values(&["John", "Mary"])), sell);
        // tuples lacking the field are excluded, not errors
        assert!(restrict_by_child(&drug, &FieldId::subj(), &values(&["Aspirin"])).is_empty());
    }

    #[test]
    fn banned_drugs() {
        let mut db = Database::new();
        db.insert(w("drug/N"), den(&[&[("ARG", "Aspirin")], &[("ARG", "Thalidomide")]]));
        db.insert(w("ban/V"), den(&[&[("SUBJ", "Canada"), ("COMP", "Thalidomide")]]));
        let tree = DcsTree::from_line("0\tdrug/N ban/V\t0:1:ARG:COMP").unwrap();
        assert_eq!(denotation_of_tree(&tree, &db).unwrap(), den(&[&[("ARG", "Thalidomide")]]));
        let single = DcsTree::single(w("drug/N"));
        assert_eq!(&denotation_of_tree(&single, &db).unwrap(), db.get(&w("drug/N")).unwrap());
        let missing = DcsTree::single(w("cat/N"));
        assert_eq!(denotation_of_tree(&missing, &db), Err(DcsError::UnknownWord(w("cat/N"))));
    }

    #[test]
    fn man_sells_banned_drugs() {
        let mut db = Database::new();
        db.insert(w("man/N"), den(&[&[("ARG", "John")], &[("ARG", "Bob")]]));
        db.insert(w("drug/N"), den(&[&[("ARG", "Aspirin")], &[("ARG", "Thalidomide")]]));
        db.insert(w("ban/V"), den(&[&[("SUBJ", "Canada"), ("COMP", "Thalidomide")]]));
        db.insert(
            w("sell/V"),
            den(&[
                &[("SUBJ", "John"), ("COMP", "Thalidomide")],
                &[("SUBJ", "Mary"), ("COMP", "Thalidomide")],
                &[("SUBJ", "Bob"), ("COMP", "Aspirin")],
            ]),
        );
        let tree = DcsTree::from_line(
            "0\tsell/V man/N drug/N ban/V\t0:1:SUBJ:ARG;0:2:COMP:ARG;2:3:ARG:COMP",
        )
        .unwrap();
        assert_eq!(
            denotation_of_tree(&tree, &db).unwrap(),
            den(&[&[("SUBJ", "John"), ("COMP", "Thalidomide")]])
        );
    }

    #[test]
    fn kid_play_path() {
        let mut db = Database::new();
        db.insert(w("kid/N"), den(&[&[("ARG", "Ann")]]));
        db.insert(w("play/V"), den(&[&[("SUBJ", "Ann")]]));
        let tree = DcsTree::from_line("0\tplay/V kid/N\t0:1:SUBJ:ARG").unwrap();
        let path = TreePath::from_nodes(&tree, vec![1, 0]).unwrap();
        assert_eq!(path_denotation(&path, &tree, &db).unwrap(), den(&[&[("SUBJ", "Ann")]]));

        let mut db2 = Database::new();
        db2.insert(w("kid/N"), den(&[&[("ARG", "Ann")]]));
        db2.insert(w("play/V"), den(&[&[("SUBJ", "Bea")]]));
        assert!(path_denotation(&path, &tree, &db2).unwrap().is_empty());
    }
}
