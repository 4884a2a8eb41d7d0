//! Faceted filter queries: AND across facets, OR within a facet.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::hierarchy::{Domain, Facet, UnknownFacet};
use super::FacetSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    UnknownFacet(#[from] UnknownFacet),
    #[error("facet {0} has an empty accepted-value set")]
    EmptyValues(Facet),
    #[error("`{value}` is not a value of {facet}")]
    UnknownValue { facet: Facet, value: String },
    #[error("malformed facet clause `{0}` (expected PATH=VALUE)")]
    Malformed(String),
}

/// Validated facet query. Values are stored in their canonical spelling.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterQuery {
    clauses: BTreeMap<Facet, BTreeSet<String>>,
}

impl FilterQuery {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from (path, values) pairs. Repeated paths merge their values.
    pub fn from_pairs<P, V, I>(pairs: impl IntoIterator<Item = (P, I)>) -> Result<Self, QueryError>
    where
        P: AsRef<str>,
        V: AsRef<str>,
        I: IntoIterator<Item = V>,
    {
        let mut query = FilterQuery::new();
        for (path, values) in pairs {
            let facet: Facet = path.as_ref().parse()?;
            let values: Vec<V> = values.into_iter().collect();
            if values.is_empty() {
                return Err(QueryError::EmptyValues(facet));
            }
            for value in values {
                query.accept(facet, value.as_ref())?;
            }
        }
        Ok(query)
    }

    /// Parse `PATH=VALUE` clauses (a value may list alternatives separated by `|`).
    pub fn parse_clauses<S: AsRef<str>>(clauses: impl IntoIterator<Item = S>) -> Result<Self, QueryError> {
        let mut pairs = Vec::new();
        for clause in clauses {
            let clause = clause.as_ref();
            let (path, values) = clause
                .split_once('=')
                .ok_or_else(|| QueryError::Malformed(clause.to_string()))?;
            let values: Vec<String> = values
                .split('|')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_string)
                .collect();
            pairs.push((path.trim().to_string(), values));
        }
        Self::from_pairs(pairs)
    }

    /// Add `value` to the accepted set of `facet`.
    pub fn accept(&mut self, facet: Facet, value: &str) -> Result<(), QueryError> {
        let value = match facet.domain() {
            Domain::Closed { .. } => facet
                .canonical_value(value)
                .ok_or_else(|| QueryError::UnknownValue {
                    facet,
                    value: value.to_string(),
                })?
                .to_string(),
            Domain::Open if value.trim().is_empty() => return Err(QueryError::EmptyValues(facet)),
            Domain::Open => value.trim().to_string(),
        };
        self.clauses.entry(facet).or_default().insert(value);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clauses(&self) -> impl Iterator<Item = (Facet, &BTreeSet<String>)> {
        self.clauses.iter().map(|(f, v)| (*f, v))
    }

    /// Direct per-persona predicate.
    pub fn matches(&self, facets: &FacetSet) -> bool {
        self.clauses
            .iter()
            .all(|(facet, accepted)| accepted.contains(facets.get(*facet)))
    }
}

/// Inverted index from (facet, value) to ascending persona positions.
#[derive(Debug, Clone, Default)]
pub(crate) struct FacetIndex {
    postings: BTreeMap<Facet, BTreeMap<String, Vec<u32>>>,
}

impl FacetIndex {
    pub(crate) fn build<'a>(facet_sets: impl IntoIterator<Item = &'a FacetSet>) -> Self {
        let mut postings: BTreeMap<Facet, BTreeMap<String, Vec<u32>>> = BTreeMap::new();
        for (pos, set) in facet_sets.into_iter().enumerate() {
            for (facet, value) in set.iter() {
                postings
                    .entry(facet)
                    .or_default()
                    .entry(value.to_string())
                    .or_default()
                    .push(pos as u32);
            }
        }
        FacetIndex { postings }
    }

    /// Matching positions in ascending order, or `None` for "everything".
    pub(crate) fn lookup(&self, query: &FilterQuery) -> Option<Vec<u32>> {
        let mut result: Option<Vec<u32>> = None;
        // narrowest clause first keeps intersections small
        let mut unions: Vec<Vec<u32>> = query
            .clauses()
            .map(|(facet, accepted)| {
                let by_value = self.postings.get(&facet);
                let lists: Vec<&Vec<u32>> = accepted.iter().filter_map(|v| by_value?.get(v)).collect();
                union_sorted(&lists)
            })
            .collect();
        unions.sort_by_key(Vec::len);
        for list in unions {
            result = Some(match result {
                None => list,
                Some(acc) => intersect_sorted(&acc, &list),
            });
            if result.as_ref().is_some_and(Vec::is_empty) {
                break;
            }
        }
        result
    }

    pub(crate) fn counts(&self, facet: Facet) -> BTreeMap<String, usize> {
        self.postings
            .get(&facet)
            .map(|m| m.iter().map(|(v, p)| (v.clone(), p.len())).collect())
            .unwrap_or_default()
    }
}

fn union_sorted(lists: &[&Vec<u32>]) -> Vec<u32> {
    let mut out: Vec<u32> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
