//! Concept curation: normalisation, near-duplicate merging, scoring and the
//! quality threshold.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Concept;
use crate::provider::{GenerationRequest, Provider, TemplateId};
use crate::util::{collapse_whitespace, slugify};

/// Jaccard similarity at or above which two concepts are one.
pub const DEFAULT_DEDUP_THRESHOLD: f64 = 0.8;

/// Minimum score on both axes for a concept to be kept.
pub const MIN_AXIS_SCORE: u8 = 3;

/// Nouns ending in "ing" that are not gerunds.
const ING_NOUNS: &[&str] = &[
    "anything", "building", "ceiling", "during", "engineering", "evening", "everything",
    "king", "morning", "nothing", "programming", "ring", "something", "spring", "string",
    "thing", "wing",
];

const MIN_STEM: usize = 4;

fn stem(word: &str) -> String {
    if let Some(base) = word.strip_suffix("ing") {
        if !ING_NOUNS.contains(&word) && base.chars().count() >= MIN_STEM {
            return base.to_string();
        }
        return word.to_string();
    }
    if word.ends_with("ss") || word.ends_with("is") || word.ends_with("us") {
        return word.to_string();
    }
    if let Some(base) = word.strip_suffix("es") {
        if ["ss", "x", "ch", "sh", "z"].iter().any(|s| base.ends_with(s)) {
            return if base.chars().count() >= MIN_STEM { base.to_string() } else { word.to_string() };
        }
    }
    if let Some(base) = word.strip_suffix('s') {
        if base.chars().count() >= MIN_STEM {
            return base.to_string();
        }
    }
    word.to_string()
}

/// Lowercases, collapses whitespace and strips plural/gerund suffixes from
/// every token.
pub fn normalize_concept(text: &str) -> String {
    collapse_whitespace(&text.to_lowercase())
        .split(' ')
        .filter(|w| !w.is_empty())
        .map(stem)
        .collect::<Vec<_>>()
        .join(" ")
}

fn token_set(text: &str) -> BTreeSet<String> {
    normalize_concept(text).split(' ').filter(|w| !w.is_empty()).map(str::to_string).collect()
}

/// |A ∩ B| / |A ∪ B|; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BatchStats {
    pub input_count: usize,
    pub deduped_count: usize,
    pub kept_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptBatch {
    pub concepts: Vec<Concept>,
    pub stats: BatchStats,
}

/// Concept as read from an input file; `id` is derived when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptInput {
    #[serde(default)]
    pub id: Option<String>,
    pub text: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub source_ref: String,
}

/// Assigns ids (slug of the text, suffixed on collision).
pub fn concepts_from_inputs(inputs: Vec<ConceptInput>) -> Vec<Concept> {
    let mut used: BTreeSet<String> = BTreeSet::new();
    inputs
        .into_iter()
        .map(|c| {
            let base = c.id.clone().unwrap_or_else(|| {
                let s = slugify(&c.text);
                if s.is_empty() { "concept".to_string() } else { s }
            });
            let mut id = base.clone();
            let mut k = 2;
            while !used.insert(id.clone()) {
                id = format!("{base}-{k}");
                k += 1;
            }
            Concept {
                id,
                text: c.text,
                description: c.description,
                difficulty: None,
                relevance: None,
                source_ref: c.source_ref,
            }
        })
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Merges concepts whose normalised token sets are at least `threshold`
/// Jaccard-similar (transitively). Each group keeps its longest original
/// text, ties broken lexicographically; groups appear in the order their
/// canonical member first appeared. Concepts empty after normalisation are
/// dropped.
pub fn dedup_concepts(concepts: Vec<Concept>, threshold: f64) -> ConceptBatch {
    let input_count = concepts.len();
    let concepts: Vec<Concept> = concepts
        .into_iter()
        .filter(|c| !normalize_concept(&c.text).is_empty())
        .collect();
    let sets: Vec<BTreeSet<String>> = concepts.iter().map(|c| token_set(&c.text)).collect();
    let n = concepts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if jaccard(&sets[i], &sets[j]) >= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut canon: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        let better = match canon[root] {
            None => true,
            Some(c) => {
                let (li, lc) = (concepts[i].text.chars().count(), concepts[c].text.chars().count());
                li > lc || (li == lc && concepts[i].text < concepts[c].text)
            }
        };
        if better {
            canon[root] = Some(i);
        }
    }
    let mut picks: Vec<usize> = canon.into_iter().flatten().collect();
    picks.sort_unstable();
    let out: Vec<Concept> = picks.into_iter().map(|i| concepts[i].clone()).collect();
    let count = out.len();
    ConceptBatch {
        concepts: out,
        stats: BatchStats {
            input_count,
            deduped_count: count,
            kept_count: count,
        },
    }
}

fn axis(text: &str, label: &str) -> Result<u8, String> {
    let line = text
        .lines()
        .map(|l| l.trim().trim_matches('*').trim())
        .find(|l| l.to_lowercase().starts_with(&label.to_lowercase()))
        .ok_or_else(|| format!("missing {label}"))?;
    let value = line[label.len()..].trim_start_matches([':', ' ', '*']).trim();
    let digits: String = value.chars().take_while(char::is_ascii_digit).collect();
    let n: u32 = digits.parse().map_err(|_| format!("{label}: '{value}' is not an integer"))?;
    if !(1..=5).contains(&n) {
        return Err(format!("{label}: {n} outside 1-5"));
    }
    Ok(n as u8)
}

/// Parses a `Difficulty: n` / `Relevance: n` response.
pub fn parse_concept_score(text: &str) -> Result<(u8, u8), String> {
    Ok((axis(text, "Difficulty")?, axis(text, "Relevance")?))
}

/// A concept the provider could not score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreIssue {
    pub concept_id: String,
    pub reason: String,
}

/// Scores every concept. Unscorable concepts come back with both scores
/// unset and an issue entry.
pub fn score_concepts(
    concepts: Vec<Concept>,
    provider: &dyn Provider,
    seed: u64,
) -> (Vec<Concept>, Vec<ScoreIssue>) {
    let results: Vec<(Concept, Option<ScoreIssue>)> = concepts
        .into_par_iter()
        .map(|mut c| {
            let req = GenerationRequest::new(TemplateId::ConceptScore)
                .var("concept", c.text.clone())
                .var("description", c.description.clone())
                .seed(seed);
            let parsed = provider
                .complete(&req)
                .map_err(|e| e.to_string())
                .and_then(|text| parse_concept_score(&text));
            match parsed {
                Ok((d, r)) => {
                    c.difficulty = Some(d);
                    c.relevance = Some(r);
                    (c, None)
                }
                Err(reason) => {
                    c.difficulty = None;
                    c.relevance = None;
                    log::warn!("concept {} unscored: {reason}", c.id);
                    let issue = ScoreIssue { concept_id: c.id.clone(), reason };
                    (c, Some(issue))
                }
            }
        })
        .collect();
    let mut issues = Vec::new();
    let mut out = Vec::with_capacity(results.len());
    for (c, i) in results {
        out.push(c);
        issues.extend(i);
    }
    (out, issues)
}

/// Keeps scored concepts at or above the threshold on both axes.
pub fn filter_concepts(batch: ConceptBatch) -> ConceptBatch {
    let concepts: Vec<Concept> = batch
        .concepts
        .into_iter()
        .filter(|c| {
            c.is_scored()
                && c.difficulty.is_some_and(|d| d >= MIN_AXIS_SCORE)
                && c.relevance.is_some_and(|r| r >= MIN_AXIS_SCORE)
        })
        .collect();
    ConceptBatch {
        stats: BatchStats {
            kept_count: concepts.len(),
            ..batch.stats
        },
        concepts,
    }
}
