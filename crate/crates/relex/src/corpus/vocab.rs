use std::collections::HashMap;

use crate::corpus::Bag;

pub const NA_RELATION: &str = "NA";

/// Word vocabulary with PAD at id 0 and UNK at id 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    id_of: HashMap<String, usize>,
    words: Vec<String>,
}

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

impl Vocab {
    /// Builds from the given word list, in order, after the two specials.
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocab {
            id_of: HashMap::new(),
            words: vec!["<PAD>".to_string(), "<UNK>".to_string()],
        };
        for w in words {
            if !v.id_of.contains_key(&w) {
                v.id_of.insert(w.clone(), v.words.len());
                v.words.push(w);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id for a word, falling back to UNK.
    pub fn id(&self, word: &str) -> usize {
        self.id_of.get(word).copied().unwrap_or(UNK_ID)
    }

    /// Id only if the word was actually loaded; specials do not count.
    pub fn known_id(&self, word: &str) -> Option<usize> {
        self.id_of.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Frequency-based vocabulary: words below `min_count` map to UNK. Id order
/// is frequency descending, ties broken lexicographically.
pub fn build_vocab(bags: &[Bag], min_count: usize) -> Vocab {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for bag in bags {
        for s in &bag.sentences {
            for t in &s.tokens {
                *freq.entry(t.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut entries: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocab::from_words(entries.into_iter().map(|(w, _)| w.to_string()))
}

/// Relation label space. NA is always present at id 0; other relations are
/// sorted by name.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationVocab {
    names: Vec<String>,
}

impl RelationVocab {
    pub fn from_dataset(bags: &[Bag]) -> Self {
        let mut names: Vec<String> = bags
            .iter()
            .map(|b| b.relation.clone())
            .filter(|r| r != NA_RELATION)
            .collect();
        names.sort();
        names.dedup();
        let mut all = vec![NA_RELATION.to_string()];
        all.extend(names);
        RelationVocab { names: all }
    }

    pub fn from_names(names: Vec<String>) -> Self {
        RelationVocab { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub const fn na_id(&self) -> usize {
        0
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Coarse entity type space; the row after the last named type is the
/// unknown-type embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeVocab {
    names: Vec<String>,
}

impl TypeVocab {
    pub fn from_dataset(bags: &[Bag]) -> Self {
        let mut names: Vec<String> = bags
            .iter()
            .flat_map(|b| b.subj_types.iter().chain(&b.obj_types).cloned())
            .collect();
        names.sort();
        names.dedup();
        TypeVocab { names }
    }

    pub fn from_names(names: Vec<String>) -> Self {
        TypeVocab { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn unknown_id(&self) -> usize {
        self.names.len()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SentenceInstance;

    fn bag_with_tokens(tokens: &[&str]) -> Bag {
        Bag {
            subj: "s".into(),
            obj: "o".into(),
            relation: "r".into(),
            subj_types: vec![],
            obj_types: vec![],
            sentences: vec![SentenceInstance {
                tokens: tokens.iter().map(|t| t.to_string()).collect(),
                subj_span: (0, 1),
                obj_span: (1, 2),
                dep_edges: vec![],
                phrases: None,
            }],
        }
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let bags = vec![bag_with_tokens(&["a", "a", "b"])];
        let v = build_vocab(&bags, 1);
        assert!(v.known_id("a").is_some());
        assert!(v.known_id("b").is_some());
        // a is more frequent, so it gets the lower id.
        assert!(v.id("a") < v.id("b"));
    }

    #[test]
    fn min_count_two_drops_singletons() {
        let bags = vec![bag_with_tokens(&["a", "a", "b"])];
        let v = build_vocab(&bags, 2);
        assert!(v.known_id("a").is_some());
        assert!(v.known_id("b").is_none());
        assert_eq!(v.id("b"), UNK_ID);
    }

    #[test]
    fn id_order_is_stable_across_runs() {
        let bags = vec![bag_with_tokens(&["z", "y", "x", "z", "y", "z"])];
        let a = build_vocab(&bags, 1);
        let b = build_vocab(&bags, 1);
        assert_eq!(a.words(), b.words());
        // Frequency desc, then lexicographic.
        assert_eq!(a.word(2), "z");
        assert_eq!(a.word(3), "y");
        assert_eq!(a.word(4), "x");
    }

    #[test]
    fn na_is_always_relation_zero() {
        let bags = vec![bag_with_tokens(&["a"])];
        let rv = RelationVocab::from_dataset(&bags);
        assert_eq!(rv.name(0), NA_RELATION);
        assert_eq!(rv.id("r"), Some(1));
        assert_eq!(rv.len(), 2);
    }
}
