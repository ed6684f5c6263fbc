use super::{NliExample, NliLabel, Triplet};
use crate::rng::rng_for;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletStats {
    pub groups: usize,
    pub emitted: usize,
    /// Groups lacking an entailment or a contradiction hypothesis.
    pub dropped: usize,
}

#[derive(Debug, Clone)]
pub struct TripletBuild {
    pub triplets: Vec<Triplet>,
    pub stats: TripletStats,
}

/// Group NLI examples by exact premise text and emit one triplet per
/// group that has at least one entailment and one contradiction
/// hypothesis. The positive and hard negative are drawn from the
/// respective pools by a seeded deterministic generator; groups in
/// first-occurrence order. Neutral hypotheses are ignored.
pub fn build_triplets(examples: &[NliExample], seed: u64) -> TripletBuild {
    struct Group {
        language: String,
        entailments: Vec<usize>,
        contradictions: Vec<usize>,
    }

    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Group> = HashMap::new();
    for (i, ex) in examples.iter().enumerate() {
        let group = groups.entry(ex.premise.as_str()).or_insert_with(|| {
            order.push(ex.premise.as_str());
            Group {
                language: ex.language.clone(),
                entailments: Vec::new(),
                contradictions: Vec::new(),
            }
        });
        match ex.label {
            NliLabel::Entailment => group.entailments.push(i),
            NliLabel::Contradiction => group.contradictions.push(i),
            NliLabel::Neutral => {}
        }
    }

    let mut rng = rng_for(seed, "triplets");
    let mut triplets = Vec::new();
    let mut dropped = 0;
    for premise in &order {
        let group = &groups[premise];
        if group.entailments.is_empty() || group.contradictions.is_empty() {
            dropped += 1;
            continue;
        }
        let pos = group.entailments[rng.gen_range(0..group.entailments.len())];
        let neg = group.contradictions[rng.gen_range(0..group.contradictions.len())];
        triplets.push(Triplet {
            anchor: premise.to_string(),
            positive: examples[pos].hypothesis.clone(),
            hard_negative: examples[neg].hypothesis.clone(),
            language: group.language.clone(),
        });
    }

    let stats = TripletStats {
        groups: order.len(),
        emitted: triplets.len(),
        dropped,
    };
    TripletBuild { triplets, stats }
}
