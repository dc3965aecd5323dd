use rand::seq::SliceRandom;

use kge::encoder::{
    Activation, Aggregation, CompGcnEncoder, CompositionOp, EncoderConfig, ReductionMode,
    BASIS_COEF, NODE_INIT,
};
use kge::kg::{augment, KnowledgeGraph, Triple};
use kge::numerics::{rng_for, ParameterStore, Stream, Tensor2};
use kge::synthetic::random_kg;

fn encoder(
    num_nodes: usize,
    num_base: usize,
    op: CompositionOp,
    mode: ReductionMode,
    bases: Option<usize>,
) -> CompGcnEncoder {
    CompGcnEncoder::new(EncoderConfig {
        num_nodes,
        num_relations: 2 * num_base + 1,
        init_dim: 6,
        layer_dims: vec![5, 4],
        op,
        mode,
        bases,
        activation: Activation::Tanh,
        aggregation: Aggregation::Sum,
        dropout: 0.0,
    })
    .unwrap()
}

#[test]
fn permuting_entities_permutes_outputs() {
    for (seed, op) in [
        (1, CompositionOp::Sub),
        (2, CompositionOp::Mult),
        (3, CompositionOp::Corr),
    ] {
        let kg = random_kg(10, 3, 25, seed).unwrap();
        let mut perm: Vec<usize> = (0..10).collect();
        perm.shuffle(&mut rng_for(seed, Stream::Permutations));
        let moved: Vec<Triple> = kg
            .train
            .iter()
            .rev()
            .map(|t| Triple::new(perm[t.head], t.rel, perm[t.tail]))
            .collect();
        let kg2 = KnowledgeGraph::from_indexed(10, 3, moved, vec![], vec![]).unwrap();

        let enc = encoder(10, 3, op, ReductionMode::Full, Some(4));
        let mut store = ParameterStore::new();
        enc.init_params(&mut store, &mut rng_for(seed, Stream::Init))
            .unwrap();
        let mut store2 = store.clone();
        let x = store.value(NODE_INIT).unwrap().clone();
        let mut x2 = Tensor2::zeros(x.rows(), x.cols());
        for (v, &pv) in perm.iter().enumerate() {
            x2.row_mut(pv).copy_from_slice(x.row(v));
        }
        *store2.value_mut(NODE_INIT).unwrap() = x2;

        let (h, z, _) = enc
            .forward(&store, &augment(&kg), None::<&mut rand_chacha::ChaCha8Rng>)
            .unwrap();
        let (h2, z2, _) = enc
            .forward(
                &store2,
                &augment(&kg2),
                None::<&mut rand_chacha::ChaCha8Rng>,
            )
            .unwrap();
        for (v, &pv) in perm.iter().enumerate() {
            for (a, b) in h.row(v).iter().zip(h2.row(pv)) {
                assert!((a - b).abs() < 1e-12, "{op:?} node {v}: {a} vs {b}");
            }
        }
        assert_eq!(z, z2);
    }
}

#[test]
fn layer_parameters_do_not_grow_with_relations() {
    let bases = 3;
    let mut layer_counts = Vec::new();
    for num_base in [1, 4, 9] {
        let enc = encoder(
            8,
            num_base,
            CompositionOp::Corr,
            ReductionMode::Full,
            Some(bases),
        );
        let mut store = ParameterStore::new();
        enc.init_params(&mut store, &mut rng_for(0, Stream::Init))
            .unwrap();
        let per_layer: Vec<usize> = enc.layers.iter().map(|l| l.num_scalars(&store)).collect();
        // Three direction weights and one relation projection per layer.
        assert_eq!(per_layer, vec![4 * 5 * 6, 4 * 4 * 5]);
        assert_eq!(
            store.value(BASIS_COEF).unwrap().len(),
            bases * (2 * num_base + 1)
        );
        layer_counts.push(per_layer);
    }
    assert!(layer_counts.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn relational_mode_grows_per_relation() {
    let count = |num_base: usize| {
        let enc = encoder(
            8,
            num_base,
            CompositionOp::Sub,
            ReductionMode::RelationalGcn,
            None,
        );
        let mut store = ParameterStore::new();
        enc.init_params(&mut store, &mut rng_for(0, Stream::Init))
            .unwrap();
        enc.layers[0].num_scalars(&store)
    };
    assert_eq!(count(3) - count(2), 2 * 5 * 6);
}
