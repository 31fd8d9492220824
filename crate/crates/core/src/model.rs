//! Concrete models of every family and their text encodings.
//!
//! Encodings are bracketed lists over item labels:
//!
//! | model                | example                |
//! |----------------------|------------------------|
//! | variable subset      | `[a, c]`               |
//! | partition            | `[[a, b], [c]]`        |
//! | changepoint times    | `[3, 0, 2]`            |
//! | total ranking        | `[b, a, c]` (best first) |
//! | partial ranking      | `[a->b, a->c]`         |
//! | CPDAG                | `[a->c, b--c]`         |
//!
//! Every encoding is canonical (sorted as described on each encoder), so
//! equal models print identically.

use std::collections::HashMap;

use crate::cpdag::Cpdag;
use crate::error::{Error, Result};
use crate::families::boolean::VariableSubset;
use crate::families::changepoint::ChangepointVector;
use crate::families::partial_ranking::StrictPartialOrder;
use crate::families::partition::Partition;
use crate::families::total_ranking::{TotalRanking, TotalRankingPoset};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelElement {
    Subset(VariableSubset),
    Partition(Partition),
    Changepoint(ChangepointVector),
    PartialOrder(StrictPartialOrder),
    Ranking(TotalRanking),
    Cpdag(Cpdag),
}

/// Item names for encoding and decoding; items are `0..p` internally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Labels {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains(['[', ']', ',', ' ']) || n.contains("->") || n.contains("--") {
                return Err(Error::Parse(format!("label {n:?} is empty or contains a delimiter")));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Parse(format!("duplicate label {n:?}")));
            }
        }
        Ok(Labels { names, index })
    }

    /// Labels `0, 1, …, p−1`.
    pub fn numeric(p: usize) -> Self {
        Labels::new((0..p).map(|i| i.to_string()).collect()).expect("digits are valid labels")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn item(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown item {name:?}")))
    }
}

fn bracketed(items: impl IntoIterator<Item = String>) -> String {
    format!("[{}]", items.into_iter().collect::<Vec<_>>().join(", "))
}

/// Splits `[x, y, [z, w]]` into its top-level entries.
fn entries(text: &str) -> Result<Vec<&str>> {
    let t = text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| Error::Parse(format!("expected a bracketed list, got {t:?}")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (k, ch) in inner.char_indices() {
        match ch {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(inner[start..k].trim());
                start = k + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::Parse(format!("unbalanced brackets in {t:?}")));
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced brackets in {t:?}")));
    }
    out.push(inner[start..].trim());
    if out.iter().any(|e| e.is_empty()) {
        return Err(Error::Parse(format!("empty entry in {t:?}")));
    }
    Ok(out)
}

fn items(text: &str, labels: &Labels) -> Result<Vec<usize>> {
    entries(text)?.into_iter().map(|e| labels.item(e)).collect()
}

/// `a->b` or `a--b`; the flag is true for directed edges.
fn edge(text: &str, labels: &Labels) -> Result<(usize, usize, bool)> {
    let (split, directed) = if let Some(k) = text.find("->") {
        (k, true)
    } else if let Some(k) = text.find("--") {
        (k, false)
    } else {
        return Err(Error::Parse(format!("expected `a->b` or `a--b`, got {text:?}")));
    };
    let a = labels.item(text[..split].trim())?;
    let b = labels.item(text[split + 2..].trim())?;
    Ok((a, b, directed))
}

/// Sorted member list.
pub fn encode_subset(x: &VariableSubset, labels: &Labels) -> String {
    bracketed(x.members().iter().map(|&i| labels.name(i).to_string()))
}

pub fn parse_subset(text: &str, labels: &Labels) -> Result<VariableSubset> {
    VariableSubset::new(labels.len(), items(text, labels)?)
}

/// Blocks sorted by their smallest item, items sorted within blocks.
pub fn encode_partition(x: &Partition, labels: &Labels) -> String {
    bracketed(
        x.blocks()
            .into_iter()
            .map(|b| bracketed(b.into_iter().map(|i| labels.name(i).to_string()))),
    )
}

pub fn parse_partition(text: &str, labels: &Labels) -> Result<Partition> {
    let blocks = entries(text)?
        .into_iter()
        .map(|b| items(b, labels))
        .collect::<Result<Vec<_>>>()?;
    Partition::from_blocks(labels.len(), &blocks)
}

pub fn encode_changepoint(x: &ChangepointVector) -> String {
    bracketed(x.times().iter().map(|t| t.to_string()))
}

pub fn parse_changepoint(text: &str, horizon: u32) -> Result<ChangepointVector> {
    let times = entries(text)?
        .into_iter()
        .map(|e| e.parse::<u32>().map_err(|_| Error::Parse(format!("bad time {e:?}"))))
        .collect::<Result<Vec<_>>>()?;
    ChangepointVector::new(horizon, times)
}

/// Items from best to worst.
pub fn encode_ranking(x: &TotalRanking, labels: &Labels) -> String {
    bracketed(x.order().iter().map(|&i| labels.name(i).to_string()))
}

pub fn parse_ranking(text: &str, labels: &Labels, poset: &TotalRankingPoset) -> Result<TotalRanking> {
    poset.ranking(items(text, labels)?)
}

/// `above->below` pairs in lexicographic order of item indices.
pub fn encode_partial_order(x: &StrictPartialOrder, labels: &Labels) -> String {
    bracketed(
        x.pairs()
            .into_iter()
            .map(|(a, b)| format!("{}->{}", labels.name(a), labels.name(b))),
    )
}

pub fn parse_partial_order(text: &str, labels: &Labels) -> Result<StrictPartialOrder> {
    let pairs = entries(text)?
        .into_iter()
        .map(|e| match edge(e, labels)? {
            (a, b, true) => Ok((a, b)),
            _ => Err(Error::Parse(format!("relation pairs are written `a->b`, got {e:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    StrictPartialOrder::new(labels.len(), pairs)
}

/// Directed edges first, then undirected ones, each in index order.
pub fn encode_cpdag(x: &Cpdag, labels: &Labels) -> String {
    let directed = x
        .directed_edges()
        .into_iter()
        .map(|(a, b)| format!("{}->{}", labels.name(a), labels.name(b)));
    let undirected = x
        .undirected_edges()
        .into_iter()
        .map(|(a, b)| format!("{}--{}", labels.name(a), labels.name(b)));
    bracketed(directed.chain(undirected))
}

pub fn parse_cpdag(text: &str, labels: &Labels) -> Result<Cpdag> {
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for e in entries(text)? {
        match edge(e, labels)? {
            (a, b, true) => directed.push((a, b)),
            (a, b, false) => undirected.push((a.min(b), a.max(b))),
        }
    }
    Cpdag::new(labels.len(), &directed, &undirected)
}

impl ModelElement {
    pub fn encode(&self, labels: &Labels) -> String {
        match self {
            ModelElement::Subset(x) => encode_subset(x, labels),
            ModelElement::Partition(x) => encode_partition(x, labels),
            ModelElement::Changepoint(x) => encode_changepoint(x),
            ModelElement::PartialOrder(x) => encode_partial_order(x, labels),
            ModelElement::Ranking(x) => encode_ranking(x, labels),
            ModelElement::Cpdag(x) => encode_cpdag(x, labels),
        }
    }
}
