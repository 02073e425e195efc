use std::collections::BTreeSet;

use cotforge::bank::DEMO_CONCEPTS;
use cotforge::curation::{
    concepts_from_inputs, dedup_concepts, filter_concepts, jaccard, normalize_concept, score_concepts,
    ConceptInput, DEFAULT_DEDUP_THRESHOLD,
};
use cotforge::provider::MockProvider;
use cotforge::Concept;
use proptest::prelude::*;

fn concepts(texts: &[String]) -> Vec<Concept> {
    concepts_from_inputs(
        texts
            .iter()
            .map(|t| ConceptInput {
                id: None,
                text: t.clone(),
                description: String::new(),
                source_ref: String::new(),
            })
            .collect(),
    )
}

fn tokens(text: &str) -> BTreeSet<String> {
    normalize_concept(text).split(' ').filter(|w| !w.is_empty()).map(str::to_string).collect()
}

fn texts() -> impl Strategy<Value = Vec<String>> {
    let word = prop::sample::select(vec![
        "binary", "search", "searching", "tree", "trees", "hash", "maps", "map", "graph", "graphs",
        "dynamic", "programming", "sorting", "sort", "Stack", "stacks", "queue",
    ]);
    prop::collection::vec(prop::collection::vec(word, 1..4).prop_map(|ws| ws.join(" ")), 0..14)
}

proptest! {
    #[test]
    fn dedup_shrinks_and_separates(ts in texts(), threshold in 0.3f64..=1.0) {
        let input = concepts(&ts);
        let batch = dedup_concepts(input.clone(), threshold);
        prop_assert!(batch.concepts.len() <= input.len());
        prop_assert_eq!(batch.stats.input_count, input.len());
        for (i, a) in batch.concepts.iter().enumerate() {
            for b in &batch.concepts[i + 1..] {
                prop_assert!(jaccard(&tokens(&a.text), &tokens(&b.text)) < threshold, "{} / {}", a.text, b.text);
            }
        }
        let again = dedup_concepts(batch.concepts.clone(), threshold);
        prop_assert_eq!(again.concepts, batch.concepts);
    }

    #[test]
    fn every_input_is_represented(ts in texts()) {
        let batch = dedup_concepts(concepts(&ts), DEFAULT_DEDUP_THRESHOLD);
        for t in &ts {
            let best = batch
                .concepts
                .iter()
                .map(|c| jaccard(&tokens(&c.text), &tokens(t)))
                .fold(0.0, f64::max);
            // transitive merges can place an input a few hops from its canonical
            prop_assert!(best > 0.0);
        }
    }

    #[test]
    fn normalization_is_idempotent(t in "[A-Za-z ]{0,30}") {
        let once = normalize_concept(&t);
        prop_assert_eq!(normalize_concept(&once), once);
    }
}

fn demo() -> Vec<Concept> {
    concepts_from_inputs(
        DEMO_CONCEPTS
            .iter()
            .map(|(text, description, _, _)| ConceptInput {
                id: None,
                text: text.to_string(),
                description: description.to_string(),
                source_ref: String::new(),
            })
            .collect(),
    )
}

#[test]
fn demo_list_merges_binary_search_variants() {
    let batch = dedup_concepts(demo(), DEFAULT_DEDUP_THRESHOLD);
    assert_eq!(batch.concepts.len(), DEMO_CONCEPTS.len() - 1);
    let binary: Vec<&str> = batch.concepts.iter().map(|c| c.text.as_str()).filter(|t| t.to_lowercase().contains("binary")).collect();
    assert_eq!(binary, ["binary searching"]);
    assert_eq!(normalize_concept("Binary Search"), normalize_concept("binary searching"));
    assert_ne!(normalize_concept("String"), "str");
}

#[test]
fn filtering_scored_concepts_is_idempotent() {
    let batch = dedup_concepts(demo(), DEFAULT_DEDUP_THRESHOLD);
    let (scored, issues) = score_concepts(batch.concepts.clone(), &MockProvider::new(), 0);
    assert!(issues.is_empty());
    let scored = cotforge::curation::ConceptBatch { concepts: scored, stats: batch.stats };
    let once = filter_concepts(scored);
    assert!(once.concepts.iter().all(|c| c.difficulty >= Some(3) && c.relevance >= Some(3)));
    assert!(!once.concepts.iter().any(|c| c.text == "print statements"));
    assert_eq!(filter_concepts(once.clone()), once);
}
