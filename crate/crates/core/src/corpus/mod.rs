//! Persona corpus: loading, facet derivation and faceted filtering.
//!
//! The corpus is immutable after [`PersonaCorpus::load`]; facets are derived
//! eagerly and indexed so that [`PersonaCorpus::filter`] never rescans records.

pub mod facets;
pub mod filter;
pub mod hierarchy;
pub mod record;

use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use facets::{derive_facets, CorpusStats, FacetSet};
pub use filter::{FilterQuery, QueryError};
pub use hierarchy::{Category, Facet};
pub use record::{Persona, TraitScore};

use filter::FacetIndex;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("record {index}: invalid JSON: {message}")]
    Json { index: usize, message: String },
    #[error("record {index}: field `{field}`: {message}")]
    Field {
        index: usize,
        field: String,
        message: String,
    },
    #[error("record {index}: duplicate persona id `{id}`")]
    DuplicateId { index: usize, id: String },
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
}

impl LoadError {
    pub(crate) fn field(index: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        LoadError::Field {
            index,
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown persona `{0}`")]
pub struct UnknownPersona(pub String);

/// Preview of one persona: headline, every facet, and the raw attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaCard {
    pub id: String,
    pub headline: String,
    pub facets: FacetSet,
    pub details: IndexMap<String, Value>,
}

#[derive(Debug, Clone)]
pub struct PersonaCorpus {
    personas: Vec<Persona>,
    facets: Vec<FacetSet>,
    stats: CorpusStats,
    by_id: HashMap<String, usize>,
    index: FacetIndex,
}

impl PersonaCorpus {
    /// Load newline-delimited JSON records (one persona per line). A stream
    /// whose first non-blank character is `[` is read as a JSON array instead.
    pub fn load(mut source: impl Read) -> Result<Self, LoadError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        let records: Vec<(usize, Result<Value, String>)> = if text.trim_start().starts_with('[') {
            match serde_json::from_str::<Vec<Value>>(&text) {
                Ok(values) => values.into_iter().map(Ok).enumerate().collect(),
                Err(e) => {
                    return Err(LoadError::Json {
                        index: 0,
                        message: e.to_string(),
                    })
                }
            }
        } else {
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str::<Value>(l).map_err(|e| e.to_string()))
                .enumerate()
                .collect()
        };

        let mut personas = Vec::with_capacity(records.len());
        let mut by_id = HashMap::with_capacity(records.len());
        for (index, record) in records {
            let value = record.map_err(|message| LoadError::Json { index, message })?;
            let persona = Persona::from_value(index, value)?;
            if by_id.insert(persona.id.clone(), personas.len()).is_some() {
                return Err(LoadError::DuplicateId { index, id: persona.id });
            }
            personas.push(persona);
        }
        Ok(Self::from_personas_unchecked(personas, by_id))
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let file = std::fs::File::open(path)?;
        Self::load(std::io::BufReader::new(file))
    }

    fn from_personas_unchecked(personas: Vec<Persona>, by_id: HashMap<String, usize>) -> Self {
        let stats = CorpusStats::from_personas(&personas);
        let facets: Vec<FacetSet> = personas.iter().map(|p| derive_facets(p, &stats)).collect();
        let index = FacetIndex::build(&facets);
        PersonaCorpus {
            personas,
            facets,
            stats,
            by_id,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.personas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.personas.is_empty()
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.personas.iter().map(|p| p.id.as_str())
    }

    pub fn personas(&self) -> &[Persona] {
        &self.personas
    }

    pub fn get(&self, id: &str) -> Result<&Persona, UnknownPersona> {
        self.by_id
            .get(id)
            .map(|&i| &self.personas[i])
            .ok_or_else(|| UnknownPersona(id.to_string()))
    }

    pub fn facets_of(&self, id: &str) -> Result<&FacetSet, UnknownPersona> {
        self.by_id
            .get(id)
            .map(|&i| &self.facets[i])
            .ok_or_else(|| UnknownPersona(id.to_string()))
    }

    /// Ids of matching personas in corpus order.
    pub fn filter(&self, query: &FilterQuery) -> Vec<String> {
        match self.index.lookup(query) {
            None => self.ids().map(str::to_string).collect(),
            Some(positions) => positions
                .into_iter()
                .map(|p| self.personas[p as usize].id.clone())
                .collect(),
        }
    }

    /// Number of personas per value of `facet`.
    pub fn facet_counts(&self, facet: Facet) -> BTreeMap<String, usize> {
        self.index.counts(facet)
    }

    pub fn preview(&self, id: &str) -> Result<PersonaCard, UnknownPersona> {
        let persona = self.get(id)?;
        let facets = self.facets_of(id)?.clone();
        Ok(PersonaCard {
            id: persona.id.clone(),
            headline: headline(persona, &facets),
            facets,
            details: persona.raw.clone(),
        })
    }
}

fn headline(persona: &Persona, facets: &FacetSet) -> String {
    let mut parts = vec![format!("{}-year-old", persona.age)];
    let sex = facets.get(Facet::Sex);
    if sex != hierarchy::UNSPECIFIED {
        parts.push(sex.to_string());
    }
    let mut line = parts.join(" ");
    if let Some(job) = persona
        .text("occupation_category")
        .or_else(|| persona.text("employment_status"))
    {
        line.push_str(", ");
        line.push_str(&job);
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = r#"{"id":"a","age":22,"sex":"Female","income":0,"big_five_scores":{"openness":0.1,"conscientiousness":0.2,"extraversion":0.3,"agreeableness":0.4,"neuroticism":0.5}}
{"id":"b","age":40,"sex":"Male","income":80000,"disability":"With a disability","big_five_scores":{"openness":0.5,"conscientiousness":0.2,"extraversion":0.3,"agreeableness":0.4,"neuroticism":0.5}}

{"id":"c","age":70,"sex":"Female","income":20000,"big_five_scores":{"openness":0.9,"conscientiousness":0.2,"extraversion":0.3,"agreeableness":0.4,"neuroticism":0.5}}
"#;

    #[test]
    fn loads_three_records() {
        let corpus = PersonaCorpus::load(THREE.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.ids().collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn json_array_input() {
        let corpus = PersonaCorpus::load(
            r#"[{"id":"z","age":30,"big_five_scores":"openness: 1, conscientiousness: 2, extraversion: 3, agreeableness: 4, neuroticism: 5"}]"#
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(corpus.len(), 1);
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = format!("{}\n{}", THREE.lines().next().unwrap(), THREE.lines().next().unwrap());
        let err = PersonaCorpus::load(text.as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::DuplicateId { index: 1, ref id } if id == "a"));
    }

    #[test]
    fn malformed_json_names_record() {
        let err = PersonaCorpus::load("{\"id\":\"a\",\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::Json { index: 0, .. }));
    }

    #[test]
    fn missing_big_five_names_field() {
        let err = PersonaCorpus::load(r#"{"id":"a","age":3}"#.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("big_five_scores.openness"), "{err}");
    }

    #[test]
    fn preview_projects_facets() {
        let corpus = PersonaCorpus::load(THREE.as_bytes()).unwrap();
        let card = corpus.preview("b").unwrap();
        assert_eq!(&card.facets, corpus.facets_of("b").unwrap());
        assert_eq!(card.facets.get(Facet::Disability), "With a disability");
        assert_eq!(card.headline, "40-year-old Male");
        assert_eq!(corpus.preview("nope").unwrap_err(), UnknownPersona("nope".into()));
    }

    #[test]
    fn filter_basics() {
        let corpus = PersonaCorpus::load(THREE.as_bytes()).unwrap();
        assert_eq!(corpus.filter(&FilterQuery::new()), ["a", "b", "c"]);
        let q = FilterQuery::parse_clauses(["Age=18-25"]).unwrap();
        assert_eq!(corpus.filter(&q), ["a"]);
        let q = FilterQuery::parse_clauses(["Sex=Female", "Income=No income"]).unwrap();
        assert_eq!(corpus.filter(&q), ["a"]);
        let q = FilterQuery::parse_clauses(["Openness=High"]).unwrap();
        assert_eq!(corpus.filter(&q), ["c"]);
    }
}
