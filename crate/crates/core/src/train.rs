//! 1-vs-all training with Adam, validation-based model selection and early
//! stopping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::Query;
use crate::error::{KgeError, Result};
use crate::eval::{rank_triples, Metrics, Side};
use crate::kg::{augment, inverse_relation, AugmentedGraph, FilterIndex, KnowledgeGraph, Triple};
use crate::model::Model;
use crate::numerics::kernels::sigmoid_scalar;
use crate::numerics::{adam_step, rng_for, AdamConfig, ParameterStore, Stream, Tensor2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    /// Binary cross entropy against every entity.
    Bce,
    /// Hinge on sigmoid scores with the given margin, against sampled
    /// negatives.
    Margin(f64),
}

impl FromStr for LossKind {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bce" {
            return Ok(LossKind::Bce);
        }
        if let Some(g) = s.strip_prefix("margin:") {
            let gamma: f64 = g
                .parse()
                .map_err(|_| KgeError::InvalidArgument(format!("bad margin '{g}'")))?;
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(KgeError::InvalidArgument("margin must be positive".into()));
            }
            return Ok(LossKind::Margin(gamma));
        }
        Err(KgeError::InvalidArgument(format!(
            "unknown loss '{s}', expected bce or margin:<gamma>"
        )))
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Bce => f.write_str("bce"),
            LossKind::Margin(g) => write!(f, "margin:{g}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub label_smoothing: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Negatives drawn per positive for the margin loss.
    pub negatives: usize,
    /// Validate every this many epochs; 0 disables validation.
    pub eval_every: usize,
    /// Stop after this many validations without improvement; 0 never stops.
    pub patience: usize,
}

/// Learning rates and batch sizes of the standard hyperparameter grid.
pub const STANDARD_LEARNING_RATES: [f64; 2] = [1e-3, 1e-4];
pub const STANDARD_BATCH_SIZES: [usize; 2] = [128, 256];

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            lr: 1e-3,
            batch_size: 128,
            epochs: 100,
            label_smoothing: 0.1,
            seed: 0,
            loss: LossKind::Bce,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            negatives: 10,
            eval_every: 1,
            patience: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(KgeError::InvalidArgument(m.into()));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad("label smoothing must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.adam_eps <= 0.0
        {
            return bad("Adam betas must lie in [0, 1) and eps must be positive");
        }
        if matches!(self.loss, LossKind::Margin(_)) && self.negatives == 0 {
            return bad("margin loss needs at least one negative");
        }
        Ok(())
    }

    /// Settings outside the standard search grid.
    pub fn off_grid_settings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !STANDARD_LEARNING_RATES.contains(&self.lr) {
            out.push(format!("lr={}", self.lr));
        }
        if !STANDARD_BATCH_SIZES.contains(&self.batch_size) {
            out.push(format!("batch_size={}", self.batch_size));
        }
        out
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }
}

/// Target vector with ones at `positives`, smoothed towards `ε/|V|`.
pub fn make_targets(positives: &[usize], num_entities: usize, eps: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&eps) {
        return Err(KgeError::InvalidArgument(format!(
            "label smoothing {eps} outside [0, 1)"
        )));
    }
    let mut y = vec![0.0; num_entities];
    for &p in positives {
        *y.get_mut(p).ok_or_else(|| {
            KgeError::InvalidArgument(format!("positive {p} outside {num_entities} entities"))
        })? = 1.0;
    }
    let floor = eps / num_entities as f64;
    Ok(y.into_iter().map(|v| v * (1.0 - eps) + floor).collect())
}

/// Mean binary cross entropy over entities and its gradient with respect to
/// the logits.
pub fn bce_loss(logits: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(KgeError::Shape(format!(
            "{} logits against {} targets",
            logits.len(),
            targets.len()
        )));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(KgeError::NonFinite("logits".into()));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        // max(z, 0) − z·y + log(1 + e^{−|z|})
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((sigmoid_scalar(z) - y) / n);
    }
    Ok((loss / n, grad))
}

/// `Σ_j max(0, γ + σ(η_j) − σ(η_i))` and its gradients with respect to the
/// positive and negative scores. At the kink the subgradient is 0.
pub fn margin_ranking_loss(
    positive: f64,
    negatives: &[f64],
    gamma: f64,
) -> Result<(f64, f64, Vec<f64>)> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(KgeError::InvalidArgument("margin must be positive".into()));
    }
    let sp = sigmoid_scalar(positive);
    let dsp = sp * (1.0 - sp);
    let mut loss = 0.0;
    let mut dpos = 0.0;
    let mut dneg = Vec::with_capacity(negatives.len());
    for &n in negatives {
        let sn = sigmoid_scalar(n);
        let h = gamma + sn - sp;
        if h > 0.0 {
            loss += h;
            dpos -= dsp;
            dneg.push(sn * (1.0 - sn));
        } else {
            dneg.push(0.0);
        }
    }
    Ok((loss, dpos, dneg))
}

/// A training query with every training answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub query: Query,
    pub answers: Vec<usize>,
}

/// One query per distinct `(h, r)` and per distinct `(t, r⁻¹)` in `triples`.
pub fn build_examples(triples: &[Triple], num_base_relations: usize) -> Vec<Example> {
    let mut map: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for t in triples {
        map.entry((t.head, t.rel)).or_default().insert(t.tail);
        map.entry((t.tail, inverse_relation(t.rel, num_base_relations)))
            .or_default()
            .insert(t.head);
    }
    map.into_iter()
        .map(|((subject, relation), answers)| Example {
            query: Query { subject, relation },
            answers: answers.into_iter().collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub valid_mrr: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validated epoch, or the last epoch without
    /// validation.
    pub best: ParameterStore,
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub log: Vec<EpochLog>,
}

/// Loss of one batch and its gradient with respect to the logits.
fn batch_loss<R: Rng + ?Sized>(
    logits: &Tensor2,
    batch: &[&Example],
    config: &TrainConfig,
    num_entities: usize,
    rng: &mut R,
) -> Result<(f64, Tensor2)> {
    let b = batch.len() as f64;
    let mut total = 0.0;
    let mut dlogits = Tensor2::zeros(batch.len(), num_entities);
    for (q, ex) in batch.iter().enumerate() {
        match config.loss {
            LossKind::Bce => {
                let y = make_targets(&ex.answers, num_entities, config.label_smoothing)?;
                let (l, g) = bce_loss(logits.row(q), &y)?;
                total += l;
                for (d, g) in dlogits.row_mut(q).iter_mut().zip(g) {
                    *d = g / b;
                }
            }
            LossKind::Margin(gamma) => {
                let row = logits.row(q);
                let candidates: Vec<usize> = (0..num_entities)
                    .filter(|o| ex.answers.binary_search(o).is_err())
                    .collect();
                if candidates.is_empty() {
                    continue;
                }
                let scale = 1.0 / (b * ex.answers.len() as f64);
                for &pos in &ex.answers {
                    let negs: Vec<usize> = (0..config.negatives)
                        .map(|_| candidates[rng.gen_range(0..candidates.len())])
                        .collect();
                    let neg_scores: Vec<f64> = negs.iter().map(|&o| row[o]).collect();
                    let (l, dp, dn) = margin_ranking_loss(row[pos], &neg_scores, gamma)?;
                    total += l / ex.answers.len() as f64;
                    let out = dlogits.row_mut(q);
                    out[pos] += dp * scale;
                    for (&o, g) in negs.iter().zip(dn) {
                        out[o] += g * scale;
                    }
                }
            }
        }
    }
    Ok((total / b, dlogits))
}

/// Filtered MRR over `triples`, both sides, with the given parameters.
pub fn filtered_mrr(
    model: &Model,
    store: &ParameterStore,
    graph: &AugmentedGraph,
    triples: &[Triple],
    filter: &FilterIndex,
) -> Result<Metrics> {
    let frozen = model.freeze(store, graph)?;
    let ranks = rank_triples(
        &frozen,
        triples,
        graph.num_base_relations(),
        filter,
        Side::Both,
    )?;
    let flat: Vec<f64> = ranks
        .iter()
        .flat_map(|(h, t)| h.iter().chain(t.iter()).copied())
        .collect();
    Ok(Metrics::from_ranks(&flat))
}

/// Trains `model` on the training split of `kg`. The encoder, if any, runs
/// over the full augmented training graph at every step. `on_epoch` sees
/// each epoch's log line as it is produced.
pub fn train(
    model: &Model,
    kg: &KnowledgeGraph,
    mut store: ParameterStore,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    config.validate()?;
    if kg.num_entities() != model.num_entities || 2 * kg.num_relations() + 1 != model.num_relations
    {
        return Err(KgeError::Shape("model does not match the graph".into()));
    }
    let graph = augment(kg);
    let filter = FilterIndex::from_triples(kg.all_triples());
    let examples = build_examples(&kg.train, kg.num_relations());
    if examples.is_empty() {
        return Err(KgeError::InvalidArgument("training split is empty".into()));
    }
    let adam = config.adam();
    let mut batch_rng = rng_for(config.seed, Stream::Batching);
    let mut dropout_rng = rng_for(config.seed, Stream::Dropout);
    let mut sample_rng = rng_for(config.seed, Stream::Sampling);
    let validate = config.eval_every > 0 && !kg.valid.is_empty();

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::new();
    let mut best = store.clone();
    let mut best_epoch = 0;
    let mut best_mrr: Option<f64> = None;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut batch_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            let queries: Vec<Query> = batch.iter().map(|e| e.query).collect();
            store.zero_grad();
            let (logits, cache) =
                model.forward(&store, &graph, &queries, Some(&mut dropout_rng))?;
            let (loss, dlogits) =
                batch_loss(&logits, &batch, config, model.num_entities, &mut sample_rng)?;
            if !loss.is_finite() {
                return Err(KgeError::Diverged { epoch, step, loss });
            }
            model.backward(&mut store, &graph, &queries, &cache, &dlogits)?;
            adam_step(&mut store, &adam).map_err(|_| KgeError::Diverged { epoch, step, loss })?;
            epoch_loss += loss;
            batches += 1;
        }
        let mut entry = EpochLog {
            epoch,
            loss: epoch_loss / batches as f64,
            valid_mrr: None,
        };
        if validate && (epoch + 1) % config.eval_every == 0 {
            let mrr = filtered_mrr(model, &store, &graph, &kg.valid, &filter)?.mrr;
            entry.valid_mrr = Some(mrr);
            if best_mrr.is_none_or(|b| mrr > b) {
                best_mrr = Some(mrr);
                best = store.clone();
                best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
            }
        }
        on_epoch(&entry);
        log.push(entry);
        if config.patience > 0 && stale >= config.patience {
            break;
        }
    }
    if best_mrr.is_none() {
        best = store;
        best_epoch = log.len().saturating_sub(1);
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_valid_mrr: best_mrr,
        log,
    })
}
