//! Self-check suites shared by the command line and the test harness:
//! finite-difference gradient checks over every scorer and encoder
//! configuration, and the interaction-count verifiers over a grid.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decoders::{Query, ReshapeKind};
use crate::encoder::{Activation, CompositionOp, GatedDirectedLayer, ReductionMode};
use crate::error::Result;
use crate::interaction::{
    closed_form_het, enumerate_interactions, prop1_grid, prop2_taus, stacked_closed_form_applies,
    verify_prop1, verify_prop2, verify_prop3, verify_prop4, LayoutMatrix, Prop1Report, Prop2Report,
    Prop3Report, Prop4Report,
};
use crate::kg::{augment, AugmentedGraph};
use crate::model::{Model, ModelConfig};
use crate::numerics::{
    grad_check, rng_for, xavier_uniform, FnObjective, GradCheckReport, ParameterStore, Stream,
    Tensor2,
};
use crate::synthetic::random_kg;
use crate::train::{bce_loss, make_targets};

#[derive(Clone, Debug, PartialEq)]
pub struct GradSuiteConfig {
    pub dim: usize,
    pub seed: u64,
    pub h: f64,
    pub tolerance: f64,
}

impl Default for GradSuiteConfig {
    fn default() -> Self {
        GradSuiteConfig {
            dim: 8,
            seed: 0,
            h: 1e-5,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCase {
    pub name: String,
    pub report: GradCheckReport,
}

const GRAPH_ENTITIES: usize = 7;
const GRAPH_RELATIONS: usize = 2;

fn check_model(
    model: &Model,
    graph: &AugmentedGraph,
    cfg: &GradSuiteConfig,
) -> Result<GradCheckReport> {
    let mut store = model.init_params(cfg.seed)?;
    let n = model.num_entities;
    let queries = [
        Query {
            subject: 1,
            relation: 0,
        },
        Query {
            subject: 3,
            relation: GRAPH_RELATIONS + 1,
        },
        Query {
            subject: 5,
            relation: 1,
        },
    ];
    let answers: [&[usize]; 3] = [&[2], &[4, 6], &[0]];
    let b = queries.len() as f64;
    let loss_of = |logits: &Tensor2| -> Result<(f64, Tensor2)> {
        let mut total = 0.0;
        let mut d = Tensor2::zeros(queries.len(), n);
        for (i, ans) in answers.iter().enumerate() {
            let (l, g) = bce_loss(logits.row(i), &make_targets(ans, n, 0.1)?)?;
            total += l / b;
            for (t, v) in d.row_mut(i).iter_mut().zip(g) {
                *t = v / b;
            }
        }
        Ok((total, d))
    };
    let objective = FnObjective {
        loss: |s: &ParameterStore| {
            let (logits, _) = model.forward::<ChaCha8Rng>(s, graph, &queries, None)?;
            Ok(loss_of(&logits)?.0)
        },
        loss_and_grad: |s: &mut ParameterStore| {
            let (logits, cache) = model.forward::<ChaCha8Rng>(s, graph, &queries, None)?;
            let (l, d) = loss_of(&logits)?;
            model.backward(s, graph, &queries, &cache, &d)?;
            Ok(l)
        },
    };
    grad_check(&mut store, &objective, cfg.h, cfg.tolerance)
}

fn check_gated(graph: &AugmentedGraph, cfg: &GradSuiteConfig) -> Result<GradCheckReport> {
    let layer = GatedDirectedLayer {
        prefix: "gated.".into(),
        d_in: cfg.dim,
        d_out: cfg.dim,
        activation: Activation::Tanh,
    };
    let mut rng = rng_for(cfg.seed, Stream::Init);
    let mut store = ParameterStore::new();
    layer.init_params(&mut store, &mut rng)?;
    // Non-zero biases so their gradients are exercised away from zero.
    for (name, p) in store.iter_mut() {
        if name.contains("b_") {
            for v in p.value.data_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
    }
    store.insert(
        "gated.x",
        xavier_uniform(graph.num_nodes(), cfg.dim, &mut rng)?,
    );
    let probe = xavier_uniform(graph.num_nodes(), cfg.dim, &mut rng)?;
    let weighted = |h: &Tensor2| {
        h.data()
            .iter()
            .zip(probe.data())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    let objective = FnObjective {
        loss: |s: &ParameterStore| {
            let (h, _) = layer.forward(s, graph, s.value("gated.x")?)?;
            Ok(weighted(&h))
        },
        loss_and_grad: |s: &mut ParameterStore| {
            let x = s.value("gated.x")?.clone();
            let (h, cache) = layer.forward(s, graph, &x)?;
            let dx = layer.backward(s, graph, &cache, &probe)?;
            s.accumulate("gated.x", &dx)?;
            Ok(weighted(&h))
        },
    };
    grad_check(&mut store, &objective, cfg.h, cfg.tolerance)
}

/// Checks every scorer, every composition and reduction of a CompGCN layer
/// (with and without relation bases, one and two layers) and the gated
/// layer, on a small random graph.
pub fn gradcheck_suite(cfg: &GradSuiteConfig) -> Result<Vec<GradCase>> {
    let kg = random_kg(GRAPH_ENTITIES, GRAPH_RELATIONS, 12, cfg.seed)?;
    let graph = augment(&kg);
    let build = |tag: &str, tweak: &dyn Fn(&mut ModelConfig)| -> Result<Model> {
        let mut mc = ModelConfig::new(tag.parse()?, cfg.dim);
        mc.filters = 2;
        mc.permutations = 2;
        mc.bases = 0;
        tweak(&mut mc);
        Model::new(mc, GRAPH_ENTITIES, GRAPH_RELATIONS, cfg.seed)
    };
    let mut cases = Vec::new();
    let mut push = |name: String, model: Model| -> Result<()> {
        let report = check_model(&model, &graph, cfg)?;
        cases.push(GradCase { name, report });
        Ok(())
    };

    push("transe-l1".into(), build("transe", &|m| m.transe_norm = 1)?)?;
    push("transe-l2".into(), build("transe", &|m| m.transe_norm = 2)?)?;
    for tag in ["distmult", "hole", "conve", "interacte"] {
        push(tag.into(), build(tag, &|_| {})?)?;
    }
    for op in [CompositionOp::Sub, CompositionOp::Mult, CompositionOp::Corr] {
        for mode in ReductionMode::ALL {
            let model = build("compgcn+distmult", &|m| {
                m.comp = op;
                m.reduction = mode;
            })?;
            push(format!("compgcn-{op}-{mode}"), model)?;
        }
    }
    push(
        "compgcn-corr-full-bases-2layers".into(),
        build("compgcn+distmult", &|m| {
            m.bases = 3;
            m.layers = 2;
        })?,
    )?;
    push(
        "compgcn-mean-conve".into(),
        build("compgcn+conve", &|m| {
            m.aggregation = crate::encoder::Aggregation::Mean
        })?,
    )?;
    push(
        "compgcn-transe".into(),
        build("compgcn+transe", &|m| m.transe_norm = 2)?,
    )?;
    cases.push(GradCase {
        name: "gated-directed".into(),
        report: check_gated(&graph, cfg)?,
    });
    Ok(cases)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub closed_form_ns: Vec<usize>,
    pub closed_form_ks: Vec<usize>,
    /// Extra window sizes checked for the stacked closed form only.
    pub stacked_extra_ks: Vec<usize>,
    pub prop1_max_n: usize,
    pub prop2: Vec<(usize, usize)>,
    pub prop3: Vec<(usize, usize)>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            closed_form_ns: vec![4, 6, 8, 10],
            closed_form_ks: vec![1, 3, 5],
            stacked_extra_ks: vec![2, 4],
            prop1_max_n: 12,
            prop2: vec![(8, 2), (12, 3)],
            prop3: vec![(4, 3), (6, 3), (6, 5)],
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosedFormStatus {
    Match,
    Mismatch,
    /// The point violates the derivation's assumptions; reported, not
    /// asserted.
    OutsideAssumptions,
    /// The window does not fit the layout.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosedFormEntry {
    pub reshape: String,
    pub n: usize,
    pub k: usize,
    pub closed_form: Option<u64>,
    pub enumerated: Option<u64>,
    /// The derivation's formula evaluated regardless of its assumptions.
    pub formula_unchecked: Option<u64>,
    pub status: ClosedFormStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop4Entry {
    pub n: usize,
    pub layout: String,
    pub report: Prop4Report,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub closed_form: Vec<ClosedFormEntry>,
    pub prop1: Prop1Report,
    pub prop2: Vec<Prop2Report>,
    pub prop3: Vec<Prop3Report>,
    pub prop4: Vec<Prop4Entry>,
    pub passed: bool,
}

fn stacked_formula(n: u64, k: u64) -> u64 {
    (n - k + 1) * k * k * (k * (k + 1) * (k - 1) / 3)
}

fn closed_form_entry(kind: ReshapeKind, n: usize, k: usize) -> Result<ClosedFormEntry> {
    let mut entry = ClosedFormEntry {
        reshape: kind.to_string(),
        n,
        k,
        closed_form: None,
        enumerated: None,
        formula_unchecked: None,
        status: ClosedFormStatus::Infeasible,
    };
    if k > n {
        return Ok(entry);
    }
    let enumerated = enumerate_interactions(&LayoutMatrix::square(kind, n)?, k, false)?.n_het;
    entry.enumerated = Some(enumerated);
    if kind == ReshapeKind::Stacked && !stacked_closed_form_applies(n, k) {
        entry.formula_unchecked = Some(stacked_formula(n as u64, k as u64));
        entry.status = ClosedFormStatus::OutsideAssumptions;
        return Ok(entry);
    }
    let closed = closed_form_het(kind, n, k)?;
    entry.closed_form = Some(closed);
    entry.status = if closed == enumerated {
        ClosedFormStatus::Match
    } else {
        ClosedFormStatus::Mismatch
    };
    Ok(entry)
}

/// Runs the closed-form comparison and all four verifiers.
pub fn analysis_suite(cfg: &AnalysisConfig) -> Result<AnalysisReport> {
    let mut closed_form = Vec::new();
    for &n in &cfg.closed_form_ns {
        for &k in &cfg.closed_form_ks {
            closed_form.push(closed_form_entry(ReshapeKind::Alternate(1), n, k)?);
            closed_form.push(closed_form_entry(ReshapeKind::Stacked, n, k)?);
        }
        for &k in &cfg.stacked_extra_ks {
            closed_form.push(closed_form_entry(ReshapeKind::Stacked, n, k)?);
        }
    }
    let prop1 = verify_prop1(&prop1_grid(cfg.prop1_max_n));
    let prop2 = cfg
        .prop2
        .iter()
        .map(|&(n, k)| verify_prop2(n, k, &prop2_taus(n)))
        .collect::<Result<Vec<_>>>()?;
    let prop3 = cfg
        .prop3
        .iter()
        .map(|&(n, k)| verify_prop3(n, k, cfg.samples, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut prop4 = Vec::new();
    for &(n, k) in &cfg.prop3 {
        for kind in [
            ReshapeKind::Chequer,
            ReshapeKind::Stacked,
            ReshapeKind::Alternate(1),
        ] {
            let layout = LayoutMatrix::square(kind, n)?;
            prop4.push(Prop4Entry {
                n,
                layout: kind.to_string(),
                report: verify_prop4(&layout, k, k / 2)?,
            });
        }
    }
    let passed = closed_form
        .iter()
        .all(|e| e.status != ClosedFormStatus::Mismatch)
        && prop1.passed
        && prop2.iter().all(|r| r.passed)
        && prop3.iter().all(|r| r.passed)
        && prop4.iter().all(|e| e.report.passed);
    Ok(AnalysisReport {
        closed_form,
        prop1,
        prop2,
        prop3,
        prop4,
        passed,
    })
}
