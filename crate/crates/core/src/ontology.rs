//! Concept ontology: synonym index, exact lookup and child merging.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use crate::hash::Fnv64;
use crate::textprep::normalize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("duplicate concept id {0:?}")]
    DuplicateId(String),
    #[error("concept id must not be empty")]
    EmptyId,
    #[error("concept {id:?} has an empty canonical name or synonym")]
    EmptySynonym { id: String },
    #[error("synonym {synonym:?} belongs to both {first:?} and {second:?}")]
    SynonymCollision { synonym: String, first: String, second: String },
    #[error("concept {id:?} references unknown parent {parent:?}")]
    UnknownParent { id: String, parent: String },
    #[error("parent links of concept {0:?} form a cycle")]
    ParentCycle(String),
    #[error("cannot merge root concept {0:?}: it has no parent")]
    MergeRoot(String),
    #[error("unknown concept id {0:?}")]
    UnknownConcept(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub id: String,
    pub canonical: String,
    /// Normalized surface forms; always contains `canonical`.
    pub synonyms: BTreeSet<String>,
    pub parent: Option<String>,
}

impl Concept {
    /// Normalizes every name and adds the canonical name to the synonyms.
    pub fn new<I, S>(id: impl Into<String>, canonical: &str, synonyms: I, parent: Option<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let canonical = normalize(canonical);
        let mut set: BTreeSet<String> = synonyms.into_iter().map(|s| normalize(s.as_ref())).collect();
        set.insert(canonical.clone());
        Self { id: id.into(), canonical, synonyms: set, parent }
    }
}

/// An indexed, immutable concept set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ontology {
    concepts: BTreeMap<String, Concept>,
    synonym_index: BTreeMap<String, String>,
}

impl Ontology {
    /// Validates and indexes `concepts`. Names are normalized again so that
    /// callers constructing [`Concept`] by hand get the same guarantees.
    pub fn from_concepts<I: IntoIterator<Item = Concept>>(concepts: I) -> Result<Self, OntologyError> {
        let mut map = BTreeMap::new();
        for mut c in concepts {
            if c.id.is_empty() {
                return Err(OntologyError::EmptyId);
            }
            c.canonical = normalize(&c.canonical);
            let mut syns: BTreeSet<String> = c.synonyms.iter().map(|s| normalize(s)).collect();
            syns.insert(c.canonical.clone());
            if syns.iter().any(String::is_empty) {
                return Err(OntologyError::EmptySynonym { id: c.id });
            }
            c.synonyms = syns;
            if map.contains_key(&c.id) {
                return Err(OntologyError::DuplicateId(c.id));
            }
            map.insert(c.id.clone(), c);
        }
        Self::index(map)
    }

    fn index(concepts: BTreeMap<String, Concept>) -> Result<Self, OntologyError> {
        let mut synonym_index: BTreeMap<String, String> = BTreeMap::new();
        for c in concepts.values() {
            for s in &c.synonyms {
                if let Some(prev) = synonym_index.get(s) {
                    return Err(OntologyError::SynonymCollision {
                        synonym: s.clone(),
                        first: prev.clone(),
                        second: c.id.clone(),
                    });
                }
                synonym_index.insert(s.clone(), c.id.clone());
            }
            if let Some(p) = &c.parent {
                if !concepts.contains_key(p) {
                    return Err(OntologyError::UnknownParent { id: c.id.clone(), parent: p.clone() });
                }
            }
        }
        for id in concepts.keys() {
            let mut cur = id;
            let mut steps = 0;
            while let Some(p) = concepts[cur].parent.as_ref() {
                steps += 1;
                if p == id || steps > concepts.len() {
                    return Err(OntologyError::ParentCycle(id.clone()));
                }
                cur = p;
            }
        }
        Ok(Self { concepts, synonym_index })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    /// Concepts in id order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn concept_ids(&self) -> impl Iterator<Item = &str> {
        self.concepts.keys().map(String::as_str)
    }

    /// `(synonym, concept id)` pairs in synonym order.
    pub fn synonym_index(&self) -> &BTreeMap<String, String> {
        &self.synonym_index
    }

    pub fn synonym_count(&self) -> usize {
        self.synonym_index.len()
    }

    /// Exact lookup of an already normalized string.
    pub fn lookup_exact(&self, s: &str) -> Option<&str> {
        self.synonym_index.get(s).map(String::as_str)
    }

    /// Hash of the sorted concept ids.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        for id in self.concepts.keys() {
            h.write_str(id).sep();
        }
        h.finish()
    }

    /// Deletes each listed child, moving its synonyms into its parent and
    /// re-parenting its own children to that parent.
    pub fn merge_children<'a, I>(&self, merge_ids: I) -> Result<Ontology, OntologyError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let ids: BTreeSet<&str> = merge_ids.into_iter().collect();
        for id in &ids {
            match self.concepts.get(*id) {
                None => return Err(OntologyError::UnknownConcept(String::from(*id))),
                Some(c) if c.parent.is_none() => return Err(OntologyError::MergeRoot(String::from(*id))),
                Some(_) => {}
            }
        }
        let mut concepts = self.concepts.clone();
        for id in ids {
            let child = concepts.remove(id).expect("validated above");
            let parent_id = child.parent.expect("validated above");
            // A parent that was itself merged earlier has already been
            // replaced by its own parent in this child's link.
            let parent = concepts.get_mut(&parent_id).expect("parent links are closed");
            parent.synonyms.extend(child.synonyms);
            for c in concepts.values_mut() {
                if c.parent.as_deref() == Some(id) {
                    c.parent = Some(parent_id.clone());
                }
            }
        }
        Self::index(concepts)
    }
}
