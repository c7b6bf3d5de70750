//! Finite directed index sets: validation of the preorder axioms, down-sets,
//! canonical upper bounds, and the sequential-finiteness certificate that
//! gates the model constructors.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Violations detected while validating or querying an index set. Each
/// variant carries a witness naming the offending elements.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("index set has no elements")]
    EmptyElements,
    #[error("unknown element {element:?}")]
    UnknownElement { element: String },
    #[error("pair references unknown element {element:?}")]
    PairReferencesUnknown { element: String },
    #[error("preorder is not reflexive: ({element:?}, {element:?}) missing")]
    NotReflexive { element: String },
    #[error("preorder is not transitive: {a:?} <= {b:?} <= {c:?} but ({a:?}, {c:?}) missing")]
    NotTransitive { a: String, b: String, c: String },
    #[error("elements {a:?} and {b:?} have no common upper bound")]
    NoUpperBound { a: String, b: String },
    #[error("chain witness is empty")]
    EmptyChain,
    #[error("chain violates (c1) at position {position}: {a:?} is not below {b:?}")]
    ChainNotIncreasing {
        position: usize,
        a: String,
        b: String,
    },
    #[error("chain violates (c2): element {element:?} is below no chain entry")]
    ChainNotCofinal { element: String },
}

impl OrderError {
    /// Tag naming the violated axiom, used in machine-readable reports.
    pub fn tag(&self) -> &'static str {
        match self {
            OrderError::EmptyElements
            | OrderError::UnknownElement { .. }
            | OrderError::PairReferencesUnknown { .. } => "malformed-input",
            OrderError::NotReflexive { .. } | OrderError::NotTransitive { .. } => "preorder",
            OrderError::NoUpperBound { .. } => "directed",
            OrderError::EmptyChain => "malformed-witness",
            OrderError::ChainNotIncreasing { .. } => "c1",
            OrderError::ChainNotCofinal { .. } => "c2",
        }
    }
}

/// Row-per-element bit matrix for the relation `a <= b`.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRows {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl BitRows {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitRows {
            n,
            words,
            rows: vec![0u64; n * words],
        }
    }

    fn set(&mut self, a: usize, b: usize) {
        self.rows[a * self.words + b / 64] |= 1u64 << (b % 64);
    }

    fn get(&self, a: usize, b: usize) -> bool {
        self.rows[a * self.words + b / 64] & (1u64 << (b % 64)) != 0
    }
}

/// A validated finite directed index set. Elements are identified by UTF-8
/// strings and kept in lexicographic order; the preorder may contain
/// equivalent (mutually comparable) elements, which are flagged but
/// permitted.
#[derive(Debug, Clone)]
pub struct DirectedSet {
    ids: Vec<String>,
    index_of: BTreeMap<String, usize>,
    up: BitRows,
    equivalent_pairs: Vec<(String, String)>,
}

impl PartialEq for DirectedSet {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.up == other.up
    }
}

impl DirectedSet {
    /// Validates a candidate index set against the preorder and
    /// directedness axioms. On failure, the first violated axiom is
    /// reported with a witness.
    pub fn validate(
        elements: &[String],
        pairs: &[(String, String)],
    ) -> Result<DirectedSet, OrderError> {
        if elements.is_empty() {
            return Err(OrderError::EmptyElements);
        }
        let mut ids: Vec<String> = elements.to_vec();
        ids.sort();
        ids.dedup();
        let index_of: BTreeMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let n = ids.len();
        let mut up = BitRows::new(n);
        for (a, b) in pairs {
            let ia = *index_of
                .get(a)
                .ok_or_else(|| OrderError::PairReferencesUnknown { element: a.clone() })?;
            let ib = *index_of
                .get(b)
                .ok_or_else(|| OrderError::PairReferencesUnknown { element: b.clone() })?;
            up.set(ia, ib);
        }
        for (i, id) in ids.iter().enumerate() {
            if !up.get(i, i) {
                return Err(OrderError::NotReflexive {
                    element: id.clone(),
                });
            }
        }
        for a in 0..n {
            for b in 0..n {
                if a != b && up.get(a, b) {
                    for w in 0..up.words {
                        let missing = up.rows[b * up.words + w] & !up.rows[a * up.words + w];
                        if missing != 0 {
                            let c = w * 64 + missing.trailing_zeros() as usize;
                            return Err(OrderError::NotTransitive {
                                a: ids[a].clone(),
                                b: ids[b].clone(),
                                c: ids[c].clone(),
                            });
                        }
                    }
                }
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                let joint = (0..up.words)
                    .any(|w| up.rows[a * up.words + w] & up.rows[b * up.words + w] != 0);
                if !joint {
                    return Err(OrderError::NoUpperBound {
                        a: ids[a].clone(),
                        b: ids[b].clone(),
                    });
                }
            }
        }
        let mut equivalent_pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if up.get(a, b) && up.get(b, a) {
                    equivalent_pairs.push((ids[a].clone(), ids[b].clone()));
                }
            }
        }
        Ok(DirectedSet {
            ids,
            index_of,
            up,
            equivalent_pairs,
        })
    }

    /// Builds a linear chain `0 <= 1 <= ... <= n-1` over the given labels.
    pub fn chain(labels: &[String]) -> Result<DirectedSet, OrderError> {
        let mut pairs = Vec::new();
        for (i, a) in labels.iter().enumerate() {
            for b in labels.iter().skip(i) {
                pairs.push((a.clone(), b.clone()));
            }
        }
        DirectedSet::validate(labels, &pairs)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Elements in lexicographic order.
    pub fn elements(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index_of.contains_key(id)
    }

    fn idx(&self, id: &str) -> Result<usize, OrderError> {
        self.index_of
            .get(id)
            .copied()
            .ok_or_else(|| OrderError::UnknownElement { element: id.into() })
    }

    /// Whether `a <= b` holds.
    pub fn leq(&self, a: &str, b: &str) -> Result<bool, OrderError> {
        Ok(self.up.get(self.idx(a)?, self.idx(b)?))
    }

    /// Mutually comparable pairs flagged during validation.
    pub fn equivalent_pairs(&self) -> &[(String, String)] {
        &self.equivalent_pairs
    }

    /// The down-set `{α : α <= λ}`.
    pub fn down_set(&self, id: &str) -> Result<Vec<String>, OrderError> {
        let j = self.idx(id)?;
        Ok((0..self.ids.len())
            .filter(|&i| self.up.get(i, j))
            .map(|i| self.ids[i].clone())
            .collect())
    }

    /// All ordered comparable pairs `(λ, ν)` with `λ <= ν` and `λ != ν`.
    pub fn comparable_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for a in 0..self.ids.len() {
            for b in 0..self.ids.len() {
                if a != b && self.up.get(a, b) {
                    out.push((self.ids[a].clone(), self.ids[b].clone()));
                }
            }
        }
        out
    }

    /// All unordered pairs of distinct elements.
    pub fn unordered_pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for a in 0..self.ids.len() {
            for b in a + 1..self.ids.len() {
                out.push((self.ids[a].clone(), self.ids[b].clone()));
            }
        }
        out
    }

    /// The canonical common upper bound of `a` and `b`: among all common
    /// upper bounds those minimal in the preorder are kept, and ties are
    /// broken by lexicographically smallest identifier.
    pub fn upper_bound(&self, a: &str, b: &str) -> Result<String, OrderError> {
        let ia = self.idx(a)?;
        let ib = self.idx(b)?;
        if ia == ib {
            return Ok(self.ids[ia].clone());
        }
        let candidates: Vec<usize> = (0..self.ids.len())
            .filter(|&e| self.up.get(ia, e) && self.up.get(ib, e))
            .collect();
        let minimal: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&e| {
                candidates
                    .iter()
                    .all(|&f| !(self.up.get(f, e) && !self.up.get(e, f)))
            })
            .collect();
        minimal
            .into_iter()
            .min_by(|&x, &y| self.ids[x].cmp(&self.ids[y]))
            .map(|e| self.ids[e].clone())
            .ok_or_else(|| OrderError::NoUpperBound {
                a: a.into(),
                b: b.into(),
            })
    }

    /// Lexicographically smallest element lying above every element, if any.
    pub fn top(&self) -> Option<String> {
        (0..self.ids.len())
            .find(|&t| (0..self.ids.len()).all(|i| self.up.get(i, t)))
            .map(|t| self.ids[t].clone())
    }
}

/// An increasing chain claimed to witness sequential finiteness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainWitness {
    pub chain: Vec<String>,
}

impl ChainWitness {
    pub fn new<I: Into<String>>(chain: Vec<I>) -> Self {
        ChainWitness {
            chain: chain.into_iter().map(Into::into).collect(),
        }
    }
}

/// Certificate that a directed set together with a witness chain satisfies
/// (c1) through (c3). Down-set sizes are recorded per chain entry; their
/// finiteness is what (c3) asks for, established here by enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SequentialFiniteness {
    pub chain: Vec<String>,
    pub down_set_sizes: Vec<usize>,
}

/// Verifies (c1) chain monotonicity, (c2) cofinality, and (c3) finiteness of
/// the down-sets against the given witness.
pub fn is_sequentially_finite(
    ds: &DirectedSet,
    witness: &ChainWitness,
) -> Result<SequentialFiniteness, OrderError> {
    if witness.chain.is_empty() {
        return Err(OrderError::EmptyChain);
    }
    for id in &witness.chain {
        if !ds.contains(id) {
            return Err(OrderError::UnknownElement {
                element: id.clone(),
            });
        }
    }
    for (k, pair) in witness.chain.windows(2).enumerate() {
        if !ds.leq(&pair[0], &pair[1])? {
            return Err(OrderError::ChainNotIncreasing {
                position: k,
                a: pair[0].clone(),
                b: pair[1].clone(),
            });
        }
    }
    for el in ds.elements() {
        let covered = witness.chain.iter().any(|e| ds.leq(el, e).unwrap_or(false));
        if !covered {
            return Err(OrderError::ChainNotCofinal {
                element: el.clone(),
            });
        }
    }
    let down_set_sizes = witness
        .chain
        .iter()
        .map(|e| ds.down_set(e).map(|d| d.len()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SequentialFiniteness {
        chain: witness.chain.clone(),
        down_set_sizes,
    })
}

/// JSON document for an index set, matching the external interface
/// `{"elements": [...], "leq": [["a","b"], ...], "chain": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectedSetDoc {
    pub elements: Vec<String>,
    pub leq: Vec<(String, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<String>>,
}

impl DirectedSetDoc {
    pub fn from_set(ds: &DirectedSet, chain: Option<&ChainWitness>) -> Self {
        let mut leq = ds.comparable_pairs();
        for e in ds.elements() {
            leq.push((e.clone(), e.clone()));
        }
        leq.sort();
        DirectedSetDoc {
            elements: ds.elements().to_vec(),
            leq,
            chain: chain.map(|w| w.chain.clone()),
        }
    }

    pub fn build(&self) -> Result<DirectedSet, OrderError> {
        DirectedSet::validate(&self.elements, &self.leq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn p(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn singleton_is_directed() {
        let ds = DirectedSet::validate(&s(&["a"]), &p(&[("a", "a")])).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.down_set("a").unwrap(), s(&["a"]));
    }

    #[test]
    fn empty_elements_rejected() {
        assert_eq!(
            DirectedSet::validate(&[], &[]).unwrap_err(),
            OrderError::EmptyElements
        );
    }

    #[test]
    fn antichain_of_two_rejected_with_witness() {
        let err =
            DirectedSet::validate(&s(&["a", "b"]), &p(&[("a", "a"), ("b", "b")])).unwrap_err();
        assert_eq!(
            err,
            OrderError::NoUpperBound {
                a: "a".into(),
                b: "b".into()
            }
        );
        assert_eq!(err.tag(), "directed");
    }

    #[test]
    fn missing_reflexive_pair_rejected() {
        let err =
            DirectedSet::validate(&s(&["a", "b"]), &p(&[("a", "a"), ("a", "b")])).unwrap_err();
        assert_eq!(
            err,
            OrderError::NotReflexive {
                element: "b".into()
            }
        );
    }

    #[test]
    fn transitivity_violation_names_triple() {
        let err = DirectedSet::validate(
            &s(&["a", "b", "c"]),
            &p(&[("a", "a"), ("b", "b"), ("c", "c"), ("a", "b"), ("b", "c")]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            OrderError::NotTransitive {
                a: "a".into(),
                b: "b".into(),
                c: "c".into()
            }
        );
    }

    #[test]
    fn linear_chain_queries() {
        let ds = DirectedSet::chain(&s(&["1", "2", "3"])).unwrap();
        assert_eq!(ds.down_set("2").unwrap(), s(&["1", "2"]));
        assert_eq!(ds.upper_bound("1", "3").unwrap(), "3");
        assert_eq!(ds.upper_bound("1", "2").unwrap(), "2");
        assert_eq!(ds.upper_bound("2", "2").unwrap(), "2");
        assert_eq!(ds.top().unwrap(), "3");
    }

    #[test]
    fn equivalent_elements_flagged_not_rejected() {
        let ds = DirectedSet::validate(
            &s(&["a", "b"]),
            &p(&[("a", "a"), ("b", "b"), ("a", "b"), ("b", "a")]),
        )
        .unwrap();
        assert_eq!(ds.equivalent_pairs(), &[("a".to_string(), "b".to_string())]);
    }

    #[test]
    fn witness_certificate_on_chain() {
        let ds = DirectedSet::chain(&s(&["1", "2", "3"])).unwrap();
        let w = ChainWitness::new(vec!["1", "2", "3"]);
        let cert = is_sequentially_finite(&ds, &w).unwrap();
        assert_eq!(cert.down_set_sizes, vec![1, 2, 3]);
    }

    #[test]
    fn truncated_witness_fails_c2_with_witness_element() {
        let ds = DirectedSet::chain(&s(&["1", "2", "3"])).unwrap();
        let w = ChainWitness::new(vec!["1", "2"]);
        let err = is_sequentially_finite(&ds, &w).unwrap_err();
        assert_eq!(
            err,
            OrderError::ChainNotCofinal {
                element: "3".into()
            }
        );
        assert_eq!(err.tag(), "c2");
    }

    #[test]
    fn decreasing_chain_fails_c1() {
        let ds = DirectedSet::chain(&s(&["1", "2", "3"])).unwrap();
        let w = ChainWitness::new(vec!["3", "1", "3"]);
        let err = is_sequentially_finite(&ds, &w).unwrap_err();
        assert_eq!(err.tag(), "c1");
    }

    #[test]
    fn empty_chain_is_malformed() {
        let ds = DirectedSet::chain(&s(&["1"])).unwrap();
        let err = is_sequentially_finite(&ds, &ChainWitness { chain: vec![] }).unwrap_err();
        assert_eq!(err.tag(), "malformed-witness");
    }

    #[test]
    fn json_round_trip() {
        let doc: DirectedSetDoc = serde_json::from_str(
            r#"{"elements":["a","b"],"leq":[["a","a"],["a","b"],["b","b"]],"chain":["b"]}"#,
        )
        .unwrap();
        let ds = doc.build().unwrap();
        assert!(ds.leq("a", "b").unwrap());
        let w = ChainWitness {
            chain: doc.chain.clone().unwrap(),
        };
        assert!(is_sequentially_finite(&ds, &w).is_ok());
        let out = serde_json::to_string(&DirectedSetDoc::from_set(&ds, Some(&w))).unwrap();
        let doc2: DirectedSetDoc = serde_json::from_str(&out).unwrap();
        assert_eq!(doc2.build().unwrap(), ds);
    }
}
