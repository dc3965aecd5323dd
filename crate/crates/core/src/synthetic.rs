//! Small seeded graphs for smoke tests and capacity checks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::kg::{KnowledgeGraph, Triple};
use crate::numerics::{rng_for, Stream};

/// `num_triples` distinct uniformly random triples, all in the training
/// split.
pub fn random_kg(
    num_entities: usize,
    num_relations: usize,
    num_triples: usize,
    seed: u64,
) -> Result<KnowledgeGraph> {
    let mut rng = rng_for(seed, Stream::Sampling);
    let capacity = num_entities * num_entities * num_relations;
    let target = num_triples.min(capacity);
    let mut set = BTreeSet::new();
    while set.len() < target {
        let h = rng.gen_range(0..num_entities);
        let r = rng.gen_range(0..num_relations);
        let t = rng.gen_range(0..num_entities);
        set.insert(Triple::new(h, r, t));
    }
    KnowledgeGraph::from_indexed(
        num_entities,
        num_relations,
        set.into_iter().collect(),
        vec![],
        vec![],
    )
}

/// The capacity check graph: 50 entities, 5 relations, 300 triples.
pub fn overfit_kg(seed: u64) -> Result<KnowledgeGraph> {
    random_kg(50, 5, 300, seed)
}

/// A graph where relation 1 is exactly the inverse of relation 0.
///
/// Relation 0 links each entity of the first half to `fanout` entities of the
/// second half. Relation 1 holds every reversed relation-0 fact; `held_out`
/// of those go to the test split, the rest to training. Relation 2 adds
/// `noise` random facts among the first half.
pub fn inverse_pair_kg(
    num_entities: usize,
    fanout: usize,
    noise: usize,
    held_out: f64,
    seed: u64,
) -> Result<KnowledgeGraph> {
    let mut rng = rng_for(seed, Stream::Sampling);
    let half = num_entities / 2;
    let upper: Vec<usize> = (half..num_entities).collect();
    let mut forward = Vec::new();
    for h in 0..half {
        for &t in upper.choose_multiple(&mut rng, fanout.min(upper.len())) {
            forward.push(Triple::new(h, 0, t));
        }
    }
    let mut reversed: Vec<Triple> = forward
        .iter()
        .map(|t| Triple::new(t.tail, 1, t.head))
        .collect();
    reversed.shuffle(&mut rng);
    let n_test = (reversed.len() as f64 * held_out).round() as usize;
    let test = reversed.split_off(reversed.len() - n_test);

    let mut noise_set = BTreeSet::new();
    while noise_set.len() < noise.min(half * half) {
        noise_set.insert(Triple::new(
            rng.gen_range(0..half),
            2,
            rng.gen_range(0..half),
        ));
    }
    let mut train = forward;
    train.extend(reversed);
    train.extend(noise_set);
    KnowledgeGraph::from_indexed(num_entities, 3, train, vec![], test)
}

/// The generalization check graph: 50 entities, three tails per head, 20% of
/// the inverse facts held out.
pub fn compositional_kg(seed: u64) -> Result<KnowledgeGraph> {
    inverse_pair_kg(50, 3, 50, 0.2, seed)
}
