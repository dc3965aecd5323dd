//! A link-prediction model: an optional CompGCN encoder feeding a decoder.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::{
    default_plane, ConvDecoder, Decoder, DecoderCache, InteractEConfig, Query, ReshapeKind,
    ReshapingSpec,
};
use crate::encoder::{
    Activation, Aggregation, CompGcnEncoder, CompositionOp, EncoderCache, EncoderConfig,
    ReductionMode, DEFAULT_BASES,
};
use crate::error::{KgeError, Result};
use crate::kg::AugmentedGraph;
use crate::numerics::{rng_for, xavier_uniform, ParameterStore, Stream, Tensor2};

/// Free entity embeddings of models without an encoder.
pub const ENTITY_TABLE: &str = "ent";
/// Free relation embeddings (originals, inverses and the self-loop).
pub const RELATION_TABLE: &str = "rel";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecoderKind {
    TransE,
    DistMult,
    HolE,
    ConvE,
    InteractE,
}

impl DecoderKind {
    fn as_str(self) -> &'static str {
        match self {
            DecoderKind::TransE => "transe",
            DecoderKind::DistMult => "distmult",
            DecoderKind::HolE => "hole",
            DecoderKind::ConvE => "conve",
            DecoderKind::InteractE => "interacte",
        }
    }
}

impl FromStr for DecoderKind {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transe" => Ok(DecoderKind::TransE),
            "distmult" => Ok(DecoderKind::DistMult),
            "hole" => Ok(DecoderKind::HolE),
            "conve" => Ok(DecoderKind::ConvE),
            "interacte" => Ok(DecoderKind::InteractE),
            other => Err(KgeError::InvalidArgument(format!(
                "unknown decoder '{other}'"
            ))),
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `transe`, `distmult`, `hole`, `conve`, `interacte`, or
/// `compgcn+{transe,distmult,conve}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelTag {
    pub encoder: bool,
    pub decoder: DecoderKind,
}

impl FromStr for ModelTag {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("compgcn+") {
            Some(rest) => {
                let decoder: DecoderKind = rest.parse()?;
                if !matches!(
                    decoder,
                    DecoderKind::TransE | DecoderKind::DistMult | DecoderKind::ConvE
                ) {
                    return Err(KgeError::InvalidArgument(format!(
                        "compgcn pairs with transe, distmult or conve, not '{rest}'"
                    )));
                }
                Ok(ModelTag {
                    encoder: true,
                    decoder,
                })
            }
            None => Ok(ModelTag {
                encoder: false,
                decoder: s.parse()?,
            }),
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.encoder {
            write!(f, "compgcn+{}", self.decoder)
        } else {
            write!(f, "{}", self.decoder)
        }
    }
}

/// Every architectural hyperparameter of a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub tag: ModelTag,
    /// Embedding width seen by the decoder.
    pub dim: usize,
    pub comp: CompositionOp,
    pub reduction: ReductionMode,
    pub layers: usize,
    /// Relation basis count; 0 disables the decomposition.
    pub bases: usize,
    pub activation: Activation,
    pub aggregation: Aggregation,
    pub encoder_dropout: f64,
    pub transe_norm: u8,
    pub kernel_size: usize,
    pub filters: usize,
    pub permutations: usize,
    pub reshape: ReshapeKind,
    pub feature_dropout: f64,
}

impl ModelConfig {
    pub fn new(tag: ModelTag, dim: usize) -> Self {
        ModelConfig {
            tag,
            dim,
            comp: CompositionOp::Corr,
            reduction: ReductionMode::Full,
            layers: 1,
            bases: DEFAULT_BASES,
            activation: Activation::Tanh,
            aggregation: Aggregation::Sum,
            encoder_dropout: 0.0,
            transe_norm: 1,
            kernel_size: 3,
            filters: 32,
            permutations: 1,
            reshape: ReshapeKind::Chequer,
            feature_dropout: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub num_entities: usize,
    /// Size of the extended relation set, `2|R| + 1`.
    pub num_relations: usize,
    pub encoder: Option<CompGcnEncoder>,
    pub decoder: Decoder,
}

/// Values kept from [`Model::forward`] for [`Model::backward`].
#[derive(Clone, Debug)]
pub struct ModelCache {
    entities: Tensor2,
    encoder: Option<EncoderCache>,
    decoder: DecoderCache,
}

impl Model {
    /// Builds the model for a graph with `num_entities` nodes and
    /// `num_base_relations` original relations. `seed` fixes the
    /// InteractE feature permutations.
    pub fn new(
        config: ModelConfig,
        num_entities: usize,
        num_base_relations: usize,
        seed: u64,
    ) -> Result<Self> {
        let d = config.dim;
        if d == 0 || num_entities == 0 || num_base_relations == 0 {
            return Err(KgeError::InvalidArgument(
                "dimension, entity count and relation count must be positive".into(),
            ));
        }
        let num_relations = 2 * num_base_relations + 1;
        let decoder = match config.tag.decoder {
            DecoderKind::TransE => {
                if config.transe_norm != 1 && config.transe_norm != 2 {
                    return Err(KgeError::InvalidArgument(format!(
                        "TransE norm must be 1 or 2, got {}",
                        config.transe_norm
                    )));
                }
                Decoder::TransE {
                    norm: config.transe_norm,
                }
            }
            DecoderKind::DistMult => Decoder::DistMult,
            DecoderKind::HolE => Decoder::HolE,
            DecoderKind::ConvE => {
                let (rows, _) = default_plane(d)?;
                Decoder::ConvE(ConvDecoder::conve(
                    d,
                    rows,
                    config.kernel_size,
                    config.filters,
                    config.feature_dropout,
                )?)
            }
            DecoderKind::InteractE => {
                let (rows, cols) = default_plane(d)?;
                let mut cfg = InteractEConfig::new(
                    d,
                    config.permutations,
                    config.kernel_size,
                    config.filters,
                    seed,
                )?;
                cfg.reshape = ReshapingSpec::new(config.reshape, rows, cols);
                cfg.feature_dropout = config.feature_dropout;
                Decoder::InteractE(ConvDecoder::interacte(&cfg)?)
            }
        };
        let encoder = if config.tag.encoder {
            if config.layers == 0 {
                return Err(KgeError::InvalidArgument(
                    "compgcn needs at least one layer".into(),
                ));
            }
            Some(CompGcnEncoder::new(EncoderConfig {
                num_nodes: num_entities,
                num_relations,
                init_dim: d,
                layer_dims: vec![d; config.layers],
                op: config.comp,
                mode: config.reduction,
                bases: (config.bases > 0).then_some(config.bases),
                activation: config.activation,
                aggregation: config.aggregation,
                dropout: config.encoder_dropout,
            })?)
        } else {
            None
        };
        Ok(Model {
            config,
            num_entities,
            num_relations,
            encoder,
            decoder,
        })
    }

    /// Fresh parameters drawn from the init stream of `seed`.
    pub fn init_params(&self, seed: u64) -> Result<ParameterStore> {
        let mut rng = rng_for(seed, Stream::Init);
        let mut store = ParameterStore::new();
        match &self.encoder {
            Some(enc) => enc.init_params(&mut store, &mut rng)?,
            None => {
                store.insert(
                    ENTITY_TABLE,
                    xavier_uniform(self.num_entities, self.config.dim, &mut rng)?,
                );
                store.insert(
                    RELATION_TABLE,
                    xavier_uniform(self.num_relations, self.config.dim, &mut rng)?,
                );
            }
        }
        self.decoder.init_params(&mut store, &mut rng)?;
        Ok(store)
    }

    /// Entity and relation embeddings handed to the decoder.
    pub fn embeddings<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        graph: &AugmentedGraph,
        dropout_rng: Option<&mut R>,
    ) -> Result<(Tensor2, Tensor2, Option<EncoderCache>)> {
        match &self.encoder {
            Some(enc) => {
                if graph.num_nodes() != self.num_entities
                    || graph.num_relations() != self.num_relations
                {
                    return Err(KgeError::Shape(format!(
                        "graph has {} nodes and {} relations, model expects {} and {}",
                        graph.num_nodes(),
                        graph.num_relations(),
                        self.num_entities,
                        self.num_relations
                    )));
                }
                let (ent, rel, cache) = enc.forward(store, graph, dropout_rng)?;
                Ok((ent, rel, Some(cache)))
            }
            None => Ok((
                store.value(ENTITY_TABLE)?.clone(),
                store.value(RELATION_TABLE)?.clone(),
                None,
            )),
        }
    }

    /// Logits of every entity for each query (`B × |V|`).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        graph: &AugmentedGraph,
        queries: &[Query],
        mut dropout_rng: Option<&mut R>,
    ) -> Result<(Tensor2, ModelCache)> {
        let (ent, rel, enc_cache) = self.embeddings(store, graph, dropout_rng.as_deref_mut())?;
        let (logits, dec_cache) = self
            .decoder
            .forward(store, &ent, &rel, queries, dropout_rng)?;
        Ok((
            logits,
            ModelCache {
                entities: ent,
                encoder: enc_cache,
                decoder: dec_cache,
            },
        ))
    }

    /// Accumulates the gradient of the loss into the store, given its
    /// gradient with respect to the logits.
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        graph: &AugmentedGraph,
        queries: &[Query],
        cache: &ModelCache,
        dlogits: &Tensor2,
    ) -> Result<()> {
        let d = self.config.dim;
        let mut dent = Tensor2::zeros(self.num_entities, d);
        let mut drel = Tensor2::zeros(self.num_relations, d);
        self.decoder.backward(
            store,
            &cache.entities,
            queries,
            &cache.decoder,
            dlogits,
            &mut dent,
            &mut drel,
        )?;
        match (&self.encoder, &cache.encoder) {
            (Some(enc), Some(ec)) => enc.backward(store, graph, ec, &dent, &drel),
            (None, _) => {
                store.accumulate(ENTITY_TABLE, &dent)?;
                store.accumulate(RELATION_TABLE, &drel)
            }
            (Some(_), None) => Err(KgeError::Internal("encoder cache missing".into())),
        }
    }

    /// Embeddings computed once for repeated scoring without dropout.
    pub fn freeze<'a>(
        &'a self,
        store: &'a ParameterStore,
        graph: &AugmentedGraph,
    ) -> Result<FrozenModel<'a>> {
        let (entities, relations, _) =
            self.embeddings::<rand_chacha::ChaCha8Rng>(store, graph, None)?;
        Ok(FrozenModel {
            model: self,
            store,
            entities,
            relations,
        })
    }
}

/// A model with fixed embeddings, ready for evaluation.
pub struct FrozenModel<'a> {
    model: &'a Model,
    store: &'a ParameterStore,
    pub entities: Tensor2,
    pub relations: Tensor2,
}

impl FrozenModel<'_> {
    /// Scores of every entity as the object of `(subject, relation, ?)`.
    pub fn score_objects(&self, subject: usize, relation: usize) -> Result<Vec<f64>> {
        if subject >= self.entities.rows() || relation >= self.relations.rows() {
            return Err(KgeError::InvalidArgument("query id out of range".into()));
        }
        self.model.decoder.score_all(
            self.store,
            self.entities.row(subject),
            self.relations.row(relation),
            &self.entities,
        )
    }
}
