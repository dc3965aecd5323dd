//! CompGCN: joint node and relation embeddings by message passing over the
//! augmented graph, with non-parametric composition of neighbour and
//! relation features.
//!
//! A layer computes
//!
//! ```text
//! h_v   = f( Σ_{(u, r) ∈ N(v)}  W_{λ(r)} · φ(x_u, z_r) )
//! h_r   = W_rel · z_r
//! ```
//!
//! where `λ(r)` picks the weight family. [`ReductionMode::Full`] uses the
//! direction-specific `W_O / W_I / W_S` with the configured composition; the
//! other modes reproduce Kipf-GCN, R-GCN, directed GCN and weighted GCN.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KgeError, Result};
use crate::kg::{AugmentedGraph, Direction};
use crate::numerics::kernels::{
    self, circular_correlate_1d, circular_correlate_1d_backward, matmul, matmul_at, matmul_bt,
};
use crate::numerics::{xavier_uniform, ParameterStore, Tensor2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompositionOp {
    Sub,
    Mult,
    Corr,
}

impl CompositionOp {
    pub fn apply(self, hu: &[f64], hr: &[f64]) -> Result<Vec<f64>> {
        if hu.len() != hr.len() {
            return Err(KgeError::Shape(format!(
                "composition of dims {} and {}",
                hu.len(),
                hr.len()
            )));
        }
        Ok(match self {
            CompositionOp::Sub => hu.iter().zip(hr).map(|(a, b)| a - b).collect(),
            CompositionOp::Mult => hu.iter().zip(hr).map(|(a, b)| a * b).collect(),
            CompositionOp::Corr => circular_correlate_1d(hu, hr)?,
        })
    }

    /// Accumulates `∂φ/∂h_u · g` into `dhu` and `∂φ/∂h_r · g` into `dhr`.
    pub fn backward(self, hu: &[f64], hr: &[f64], g: &[f64], dhu: &mut [f64], dhr: &mut [f64]) {
        match self {
            CompositionOp::Sub => {
                for i in 0..g.len() {
                    dhu[i] += g[i];
                    dhr[i] -= g[i];
                }
            }
            CompositionOp::Mult => {
                for i in 0..g.len() {
                    dhu[i] += g[i] * hr[i];
                    dhr[i] += g[i] * hu[i];
                }
            }
            CompositionOp::Corr => circular_correlate_1d_backward(hu, hr, g, dhu, dhr),
        }
    }
}

impl FromStr for CompositionOp {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sub" => Ok(CompositionOp::Sub),
            "mult" => Ok(CompositionOp::Mult),
            "corr" => Ok(CompositionOp::Corr),
            other => Err(KgeError::InvalidArgument(format!(
                "unknown composition `{other}` (expected sub, mult or corr)"
            ))),
        }
    }
}

impl fmt::Display for CompositionOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionOp::Sub => "sub",
            CompositionOp::Mult => "mult",
            CompositionOp::Corr => "corr",
        })
    }
}

pub fn compose(op: CompositionOp, hu: &[f64], hr: &[f64]) -> Result<Vec<f64>> {
    op.apply(hu, hr)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReductionMode {
    /// Direction weights with relation composition.
    Full,
    /// One shared `W`, `φ = h_u`.
    Kipf,
    /// One `W_r` per extended relation, `φ = h_u`.
    RelationalGcn,
    /// Direction weights, `φ = h_u`.
    DirectedGcn,
    /// One shared `W`, `φ = α_r h_u` with a learned scalar per relation.
    WeightedGcn,
}

impl ReductionMode {
    pub const ALL: [ReductionMode; 5] = [
        ReductionMode::Full,
        ReductionMode::Kipf,
        ReductionMode::RelationalGcn,
        ReductionMode::DirectedGcn,
        ReductionMode::WeightedGcn,
    ];
}

impl FromStr for ReductionMode {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "compgcn" => Ok(ReductionMode::Full),
            "kipf" | "gcn" => Ok(ReductionMode::Kipf),
            "rgcn" | "r-gcn" => Ok(ReductionMode::RelationalGcn),
            "dgcn" | "d-gcn" => Ok(ReductionMode::DirectedGcn),
            "wgcn" | "w-gcn" => Ok(ReductionMode::WeightedGcn),
            other => Err(KgeError::InvalidArgument(format!(
                "unknown reduction `{other}` (expected full, kipf, rgcn, dgcn or wgcn)"
            ))),
        }
    }
}

impl fmt::Display for ReductionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionMode::Full => "full",
            ReductionMode::Kipf => "kipf",
            ReductionMode::RelationalGcn => "rgcn",
            ReductionMode::DirectedGcn => "dgcn",
            ReductionMode::WeightedGcn => "wgcn",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn forward(self, x: &Tensor2) -> Tensor2 {
        match self {
            Activation::Relu => kernels::relu(x),
            Activation::Tanh => kernels::tanh(x),
            Activation::Identity => x.clone(),
        }
    }

    /// Gradient through the activation given pre-activation `x` and output `y`.
    pub fn backward(self, x: &Tensor2, y: &Tensor2, g: &Tensor2) -> Tensor2 {
        match self {
            Activation::Relu => kernels::relu_backward(x, g),
            Activation::Tanh => kernels::tanh_backward(y, g),
            Activation::Identity => g.clone(),
        }
    }
}

impl FromStr for Activation {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "none" => Ok(Activation::Identity),
            other => Err(KgeError::InvalidArgument(format!(
                "unknown activation `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Aggregation {
    Sum,
    Mean,
}

impl FromStr for Aggregation {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(KgeError::InvalidArgument(format!(
                "unknown aggregation `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Mean => "mean",
        })
    }
}

/// `z_r = Σ_b α_{br} v_b` for every extended relation: `coefficients · basis`.
pub fn basis_expand(coefficients: &Tensor2, basis: &Tensor2) -> Result<Tensor2> {
    matmul(coefficients, basis)
}

/// Gradients of [`basis_expand`]: `(dα, dv)`.
pub fn basis_expand_backward(
    coefficients: &Tensor2,
    basis: &Tensor2,
    dz: &Tensor2,
) -> Result<(Tensor2, Tensor2)> {
    kernels::matmul_backward(coefficients, basis, dz)
}

/// One CompGCN layer. Its parameters live in a [`ParameterStore`] under
/// `prefix`.
#[derive(Clone, Debug)]
pub struct CompGcnLayer {
    pub prefix: String,
    pub d_in: usize,
    pub d_out: usize,
    pub num_relations: usize,
    pub op: CompositionOp,
    pub mode: ReductionMode,
    pub activation: Activation,
    pub aggregation: Aggregation,
    pub dropout: f64,
}

/// Values kept from the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    x: Tensor2,
    z: Tensor2,
    aggregates: Vec<Tensor2>,
    pre: Tensor2,
    activated: Tensor2,
    mask: Option<Vec<f64>>,
}

impl CompGcnLayer {
    fn name(&self, suffix: &str) -> String {
        format!("{}{}", self.prefix, suffix)
    }

    /// Names of the weight matrices, one per message group.
    fn weight_names(&self) -> Vec<String> {
        match self.mode {
            ReductionMode::Full | ReductionMode::DirectedGcn => {
                vec![self.name("w_o"), self.name("w_i"), self.name("w_s")]
            }
            ReductionMode::Kipf | ReductionMode::WeightedGcn => vec![self.name("w")],
            ReductionMode::RelationalGcn => (0..self.num_relations)
                .map(|r| self.name(&format!("w_r{r}")))
                .collect(),
        }
    }

    fn group_of(&self, rel: usize, dir: Direction) -> usize {
        match self.mode {
            ReductionMode::Full | ReductionMode::DirectedGcn => dir.index(),
            ReductionMode::Kipf | ReductionMode::WeightedGcn => 0,
            ReductionMode::RelationalGcn => rel,
        }
    }

    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParameterStore,
        rng: &mut R,
    ) -> Result<()> {
        for name in self.weight_names() {
            store.insert(name, xavier_uniform(self.d_out, self.d_in, rng)?);
        }
        store.insert(
            self.name("w_rel"),
            xavier_uniform(self.d_out, self.d_in, rng)?,
        );
        if self.mode == ReductionMode::WeightedGcn {
            store.insert(
                self.name("alpha"),
                Tensor2::filled(self.num_relations, 1, 1.0),
            );
        }
        Ok(())
    }

    /// Number of scalars this layer stores.
    pub fn num_scalars(&self, store: &ParameterStore) -> usize {
        store.num_scalars_with_prefix(&self.prefix)
    }

    /// Message `φ_e` of one edge.
    fn message(
        &self,
        store: &ParameterStore,
        xu: &[f64],
        zr: &[f64],
        rel: usize,
    ) -> Result<Vec<f64>> {
        match self.mode {
            ReductionMode::Full => self.op.apply(xu, zr),
            ReductionMode::Kipf | ReductionMode::RelationalGcn | ReductionMode::DirectedGcn => {
                Ok(xu.to_vec())
            }
            ReductionMode::WeightedGcn => {
                let a = store.value(&self.name("alpha"))?.get(rel, 0);
                Ok(xu.iter().map(|v| a * v).collect())
            }
        }
    }

    fn check_inputs(&self, graph: &AugmentedGraph, x: &Tensor2, z: &Tensor2) -> Result<()> {
        if x.shape() != (graph.num_nodes(), self.d_in) {
            return Err(KgeError::Shape(format!(
                "node features {:?}, expected ({}, {})",
                x.shape(),
                graph.num_nodes(),
                self.d_in
            )));
        }
        if z.shape() != (self.num_relations, self.d_in)
            || graph.num_relations() != self.num_relations
        {
            return Err(KgeError::Shape(format!(
                "relation features {:?}, expected ({}, {})",
                z.shape(),
                self.num_relations,
                self.d_in
            )));
        }
        Ok(())
    }

    /// Forward pass. When `dropout_rng` is given and the rate is positive, an
    /// inverted-dropout mask is applied to the node output.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        graph: &AugmentedGraph,
        x: &Tensor2,
        z: &Tensor2,
        dropout_rng: Option<&mut R>,
    ) -> Result<(Tensor2, Tensor2, LayerCache)> {
        self.check_inputs(graph, x, z)?;
        let names = self.weight_names();
        let nv = graph.num_nodes();
        let mut aggregates = vec![Tensor2::zeros(nv, self.d_in); names.len()];
        for e in graph.edges() {
            let msg = self.message(store, x.row(e.src), z.row(e.rel), e.rel)?;
            let g = self.group_of(e.rel, e.dir);
            for (a, m) in aggregates[g].row_mut(e.dst).iter_mut().zip(&msg) {
                *a += m;
            }
        }
        let mut pre = Tensor2::zeros(nv, self.d_out);
        for (agg, name) in aggregates.iter().zip(&names) {
            pre.add_assign(&matmul_bt(agg, store.value(name)?)?);
        }
        if self.aggregation == Aggregation::Mean {
            for v in 0..nv {
                let deg = graph.in_degree(v);
                if deg > 0 {
                    pre.row_mut(v).iter_mut().for_each(|p| *p /= deg as f64);
                }
            }
        }
        let activated = self.activation.forward(&pre);
        if !activated.is_finite() {
            return Err(KgeError::NonFinite(format!(
                "{}node activations",
                self.prefix
            )));
        }
        let mut h = activated.clone();
        let mask = match dropout_rng {
            Some(rng) if self.dropout > 0.0 => {
                let m = kernels::dropout_mask(h.len(), self.dropout, rng);
                kernels::apply_mask(h.data_mut(), &m);
                Some(m)
            }
            _ => None,
        };
        let rel_out = matmul_bt(z, store.value(&self.name("w_rel"))?)?;
        let cache = LayerCache {
            x: x.clone(),
            z: z.clone(),
            aggregates,
            pre,
            activated,
            mask,
        };
        Ok((h, rel_out, cache))
    }

    /// Backward pass: accumulates parameter gradients into `store` and returns
    /// the gradients w.r.t. the node and relation inputs.
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        graph: &AugmentedGraph,
        cache: &LayerCache,
        dh: &Tensor2,
        drel: &Tensor2,
    ) -> Result<(Tensor2, Tensor2)> {
        let mut dact = dh.clone();
        if let Some(mask) = &cache.mask {
            kernels::apply_mask(dact.data_mut(), mask);
        }
        let mut dpre = self
            .activation
            .backward(&cache.pre, &cache.activated, &dact);
        if self.aggregation == Aggregation::Mean {
            for v in 0..graph.num_nodes() {
                let deg = graph.in_degree(v);
                if deg > 0 {
                    dpre.row_mut(v).iter_mut().for_each(|p| *p /= deg as f64);
                }
            }
        }

        let names = self.weight_names();
        let mut dagg = Vec::with_capacity(names.len());
        for (agg, name) in cache.aggregates.iter().zip(&names) {
            store.accumulate(name, &matmul_at(&dpre, agg)?)?;
            dagg.push(matmul(&dpre, store.value(name)?)?);
        }

        let mut dx = Tensor2::zeros(cache.x.rows(), cache.x.cols());
        let mut dz = Tensor2::zeros(cache.z.rows(), cache.z.cols());
        let alpha = if self.mode == ReductionMode::WeightedGcn {
            Some(store.value(&self.name("alpha"))?.clone())
        } else {
            None
        };
        let mut dalpha = alpha.as_ref().map(|a| Tensor2::zeros(a.rows(), 1));
        for e in graph.edges() {
            let g = dagg[self.group_of(e.rel, e.dir)].row(e.dst);
            let xu = cache.x.row(e.src);
            match self.mode {
                ReductionMode::Full => {
                    let zr = cache.z.row(e.rel).to_vec();
                    let mut gx = vec![0.0; xu.len()];
                    self.op.backward(xu, &zr, g, &mut gx, dz.row_mut(e.rel));
                    for (d, v) in dx.row_mut(e.src).iter_mut().zip(&gx) {
                        *d += v;
                    }
                }
                ReductionMode::Kipf | ReductionMode::RelationalGcn | ReductionMode::DirectedGcn => {
                    for (d, v) in dx.row_mut(e.src).iter_mut().zip(g) {
                        *d += v;
                    }
                }
                ReductionMode::WeightedGcn => {
                    let a = alpha.as_ref().expect("alpha present").get(e.rel, 0);
                    let da = dalpha.as_mut().expect("alpha present");
                    let contrib: f64 = g.iter().zip(xu).map(|(gi, xi)| gi * xi).sum();
                    da.data_mut()[e.rel] += contrib;
                    for (d, v) in dx.row_mut(e.src).iter_mut().zip(g) {
                        *d += a * v;
                    }
                }
            }
        }
        if let Some(da) = dalpha {
            store.accumulate(&self.name("alpha"), &da)?;
        }

        let w_rel = self.name("w_rel");
        store.accumulate(&w_rel, &matmul_at(drel, &cache.z)?)?;
        dz.add_assign(&matmul(drel, store.value(&w_rel)?)?);
        Ok((dx, dz))
    }
}

/// Full encoder configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_nodes: usize,
    /// Extended relation count `|R'| = 2|R| + 1`.
    pub num_relations: usize,
    pub init_dim: usize,
    /// Output dimension of each layer; its length is the layer count `K`.
    pub layer_dims: Vec<usize>,
    pub op: CompositionOp,
    pub mode: ReductionMode,
    /// Number of basis vectors for the initial relation features, or `None`
    /// for a free relation table.
    pub bases: Option<usize>,
    pub activation: Activation,
    pub aggregation: Aggregation,
    pub dropout: f64,
}

pub const DEFAULT_DIM: usize = 200;
pub const DEFAULT_BASES: usize = 50;

#[derive(Clone, Debug)]
pub struct CompGcnEncoder {
    pub config: EncoderConfig,
    pub layers: Vec<CompGcnLayer>,
}

#[derive(Clone, Debug)]
pub struct EncoderCache {
    z0: Tensor2,
    layers: Vec<LayerCache>,
}

pub const NODE_INIT: &str = "enc.node";
pub const REL_INIT: &str = "enc.rel";
pub const BASIS: &str = "enc.basis";
pub const BASIS_COEF: &str = "enc.basis_coef";

impl CompGcnEncoder {
    pub fn new(config: EncoderConfig) -> Result<Self> {
        if config.layer_dims.is_empty() {
            return Err(KgeError::InvalidArgument(
                "encoder needs at least one layer".into(),
            ));
        }
        if config.bases == Some(0) {
            return Err(KgeError::InvalidArgument(
                "basis count must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(KgeError::InvalidArgument(
                "dropout must lie in [0, 1)".into(),
            ));
        }
        let mut d_in = config.init_dim;
        let layers = config
            .layer_dims
            .iter()
            .enumerate()
            .map(|(k, &d_out)| {
                let layer = CompGcnLayer {
                    prefix: format!("enc.l{k}."),
                    d_in,
                    d_out,
                    num_relations: config.num_relations,
                    op: config.op,
                    mode: config.mode,
                    activation: config.activation,
                    aggregation: config.aggregation,
                    dropout: config.dropout,
                };
                d_in = d_out;
                layer
            })
            .collect();
        Ok(CompGcnEncoder { config, layers })
    }

    pub fn output_dim(&self) -> usize {
        *self.config.layer_dims.last().expect("non-empty")
    }

    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParameterStore,
        rng: &mut R,
    ) -> Result<()> {
        let c = &self.config;
        store.insert(NODE_INIT, xavier_uniform(c.num_nodes, c.init_dim, rng)?);
        match c.bases {
            Some(b) => {
                store.insert(BASIS, xavier_uniform(b, c.init_dim, rng)?);
                store.insert(BASIS_COEF, xavier_uniform(c.num_relations, b, rng)?);
            }
            None => store.insert(REL_INIT, xavier_uniform(c.num_relations, c.init_dim, rng)?),
        }
        for layer in &self.layers {
            layer.init_params(store, rng)?;
        }
        Ok(())
    }

    /// Initial relation features, basis-expanded when bases are configured.
    pub fn initial_relations(&self, store: &ParameterStore) -> Result<Tensor2> {
        match self.config.bases {
            Some(_) => basis_expand(store.value(BASIS_COEF)?, store.value(BASIS)?),
            None => Ok(store.value(REL_INIT)?.clone()),
        }
    }

    /// Runs all layers; the first consumes the initial features, later ones
    /// consume the previous layer's transformed relations.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        graph: &AugmentedGraph,
        mut dropout_rng: Option<&mut R>,
    ) -> Result<(Tensor2, Tensor2, EncoderCache)> {
        let z0 = self.initial_relations(store)?;
        let mut x = store.value(NODE_INIT)?.clone();
        let mut z = z0.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (h, r, cache) = layer.forward(store, graph, &x, &z, dropout_rng.as_deref_mut())?;
            caches.push(cache);
            x = h;
            z = r;
        }
        Ok((x, z, EncoderCache { z0, layers: caches }))
    }

    pub fn backward(
        &self,
        store: &mut ParameterStore,
        graph: &AugmentedGraph,
        cache: &EncoderCache,
        dent: &Tensor2,
        drel: &Tensor2,
    ) -> Result<()> {
        let mut dx = dent.clone();
        let mut dz = drel.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            let (ndx, ndz) = layer.backward(store, graph, lc, &dx, &dz)?;
            dx = ndx;
            dz = ndz;
        }
        store.accumulate(NODE_INIT, &dx)?;
        match self.config.bases {
            Some(_) => {
                let coef = store.value(BASIS_COEF)?.clone();
                let basis = store.value(BASIS)?.clone();
                debug_assert_eq!(cache.z0.shape(), dz.shape());
                let (dcoef, dbasis) = basis_expand_backward(&coef, &basis, &dz)?;
                store.accumulate(BASIS_COEF, &dcoef)?;
                store.accumulate(BASIS, &dbasis)?;
            }
            None => store.accumulate(REL_INIT, &dz)?,
        }
        Ok(())
    }
}

/// Edge-gated directed GCN layer with one parameter set per edge label
/// (original, inverse, self-loop):
///
/// ```text
/// g_uv = σ(h_u · ŵ_L + b̂_L)
/// h_v  = f( Σ g_uv · (W_L h_u + b_L) )
/// ```
#[derive(Clone, Debug)]
pub struct GatedDirectedLayer {
    pub prefix: String,
    pub d_in: usize,
    pub d_out: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug)]
pub struct GatedCache {
    x: Tensor2,
    gates: Vec<f64>,
    messages: Tensor2,
    pre: Tensor2,
    activated: Tensor2,
}

impl GatedDirectedLayer {
    fn name(&self, what: &str, label: Direction) -> String {
        let l = match label {
            Direction::Original => "fwd",
            Direction::Inverse => "bwd",
            Direction::SelfLoop => "self",
        };
        format!("{}{what}_{l}", self.prefix)
    }

    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParameterStore,
        rng: &mut R,
    ) -> Result<()> {
        for l in Direction::ALL {
            store.insert(
                self.name("w", l),
                xavier_uniform(self.d_out, self.d_in, rng)?,
            );
            store.insert(self.name("b", l), Tensor2::zeros(1, self.d_out));
            store.insert(self.name("gate_w", l), xavier_uniform(1, self.d_in, rng)?);
            store.insert(self.name("gate_b", l), Tensor2::zeros(1, 1));
        }
        Ok(())
    }

    pub fn forward(
        &self,
        store: &ParameterStore,
        graph: &AugmentedGraph,
        x: &Tensor2,
    ) -> Result<(Tensor2, GatedCache)> {
        if x.shape() != (graph.num_nodes(), self.d_in) {
            return Err(KgeError::Shape(format!(
                "gated layer input {:?}",
                x.shape()
            )));
        }
        let ne = graph.edges().len();
        let mut gates = Vec::with_capacity(ne);
        let mut messages = Tensor2::zeros(ne, self.d_out);
        let mut pre = Tensor2::zeros(graph.num_nodes(), self.d_out);
        for (i, e) in graph.edges().iter().enumerate() {
            let xu = x.row(e.src);
            let gw = store.value(&self.name("gate_w", e.dir))?;
            let gb = store.value(&self.name("gate_b", e.dir))?.get(0, 0);
            let gate = kernels::sigmoid_scalar(crate::numerics::tensor::dot(xu, gw.row(0)) + gb);
            let w = store.value(&self.name("w", e.dir))?;
            let b = store.value(&self.name("b", e.dir))?;
            let msg = messages.row_mut(i);
            for (o, m) in msg.iter_mut().enumerate() {
                *m = crate::numerics::tensor::dot(w.row(o), xu) + b.get(0, o);
            }
            let msg = messages.row(i).to_vec();
            for (p, m) in pre.row_mut(e.dst).iter_mut().zip(&msg) {
                *p += gate * m;
            }
            gates.push(gate);
        }
        let activated = self.activation.forward(&pre);
        let cache = GatedCache {
            x: x.clone(),
            gates,
            messages,
            pre,
            activated: activated.clone(),
        };
        Ok((activated, cache))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        graph: &AugmentedGraph,
        cache: &GatedCache,
        dh: &Tensor2,
    ) -> Result<Tensor2> {
        let dpre = self.activation.backward(&cache.pre, &cache.activated, dh);
        let mut dx = Tensor2::zeros(cache.x.rows(), cache.x.cols());
        for (i, e) in graph.edges().iter().enumerate() {
            let xu = cache.x.row(e.src).to_vec();
            let gate = cache.gates[i];
            let g = dpre.row(e.dst).to_vec();
            let msg = cache.messages.row(i);
            let dgate: f64 = g.iter().zip(msg).map(|(a, b)| a * b).sum();
            let dlogit = dgate * gate * (1.0 - gate);
            let dmsg: Vec<f64> = g.iter().map(|v| v * gate).collect();

            let gw_name = self.name("gate_w", e.dir);
            let gw = store.value(&gw_name)?.row(0).to_vec();
            let dgw: Vec<f64> = xu.iter().map(|v| v * dlogit).collect();
            store.accumulate(&gw_name, &Tensor2::row_vector(&dgw))?;
            store.accumulate(&self.name("gate_b", e.dir), &Tensor2::filled(1, 1, dlogit))?;

            let w_name = self.name("w", e.dir);
            let mut dw = Tensor2::zeros(self.d_out, self.d_in);
            for (o, &dm) in dmsg.iter().enumerate() {
                for (k, &xv) in xu.iter().enumerate() {
                    dw.data_mut()[o * self.d_in + k] = dm * xv;
                }
            }
            store.accumulate(&w_name, &dw)?;
            store.accumulate(&self.name("b", e.dir), &Tensor2::row_vector(&dmsg))?;

            let w = store.value(&w_name)?;
            let dxu = dx.row_mut(e.src);
            for (k, d) in dxu.iter_mut().enumerate() {
                let mut acc = dlogit * gw[k];
                for (o, &dm) in dmsg.iter().enumerate() {
                    acc += dm * w.get(o, k);
                }
                *d += acc;
            }
        }
        Ok(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{augment, KnowledgeGraph, Triple};
    use crate::numerics::{rng_for, Stream};
    use rand_chacha::ChaCha8Rng;

    const NO_RNG: Option<&mut ChaCha8Rng> = None;

    #[test]
    fn compose_examples() {
        assert_eq!(
            compose(CompositionOp::Sub, &[3.0, 4.0], &[1.0, 1.0]).unwrap(),
            vec![2.0, 3.0]
        );
        let hu = [0.3, -2.0, 5.0];
        assert_eq!(
            compose(CompositionOp::Mult, &hu, &[1.0; 3]).unwrap(),
            hu.to_vec()
        );
        assert_eq!(
            compose(CompositionOp::Corr, &[1.0, 0.0], &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        assert!(compose(CompositionOp::Sub, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn corr_first_component_is_dot() {
        let a = [0.1, -0.7, 2.0, 0.4];
        let b = [1.5, 0.2, -0.3, 0.9];
        let c = compose(CompositionOp::Corr, &a, &b).unwrap();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((c[0] - dot).abs() <= 1e-12 * dot.abs().max(1.0));
    }

    #[test]
    fn basis_expand_examples() {
        let v = Tensor2::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let alpha = Tensor2::filled(4, 1, 1.0);
        let z = basis_expand(&alpha, &v).unwrap();
        for r in 0..4 {
            assert_eq!(z.row(r), v.row(0));
        }
        let z = basis_expand(&Tensor2::zeros(4, 1), &v).unwrap();
        assert_eq!(z.sum(), 0.0);
        let v2 = Tensor2::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        let alpha2 = Tensor2::from_rows(&[vec![1.0, -1.0]]).unwrap();
        assert_eq!(basis_expand(&alpha2, &v2).unwrap().data(), &[0.0, 0.0]);
    }

    fn layer(mode: ReductionMode, activation: Activation, nr: usize) -> CompGcnLayer {
        CompGcnLayer {
            prefix: "l.".into(),
            d_in: 3,
            d_out: 2,
            num_relations: nr,
            op: CompositionOp::Sub,
            mode,
            activation,
            aggregation: Aggregation::Sum,
            dropout: 0.0,
        }
    }

    #[test]
    fn self_loops_only_reduce_to_w_s() {
        let kg = KnowledgeGraph::from_indexed(3, 1, vec![], vec![], vec![]).unwrap();
        let g = augment(&kg);
        let l = layer(ReductionMode::Full, Activation::Tanh, g.num_relations());
        let mut store = ParameterStore::new();
        l.init_params(&mut store, &mut rng_for(1, Stream::Init))
            .unwrap();
        let x = xavier_uniform(3, 3, &mut rng_for(2, Stream::Init)).unwrap();
        let z = Tensor2::zeros(3, 3);
        let (h, _, _) = l.forward(&store, &g, &x, &z, NO_RNG).unwrap();
        let expected = kernels::tanh(&matmul_bt(&x, store.value("l.w_s").unwrap()).unwrap());
        for (a, b) in h.data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_weights_identity_activation_give_zero() {
        let kg =
            KnowledgeGraph::from_indexed(3, 1, vec![Triple::new(0, 0, 1)], vec![], vec![]).unwrap();
        let g = augment(&kg);
        for mode in ReductionMode::ALL {
            let l = layer(mode, Activation::Identity, g.num_relations());
            let mut store = ParameterStore::new();
            l.init_params(&mut store, &mut rng_for(1, Stream::Init))
                .unwrap();
            let names: Vec<String> = store.names().map(String::from).collect();
            for n in names {
                if !n.ends_with("alpha") {
                    store.value_mut(&n).unwrap().fill(0.0);
                }
            }
            let x = Tensor2::filled(3, 3, 0.7);
            let z = Tensor2::filled(3, 3, -0.2);
            let (h, r, _) = l.forward(&store, &g, &x, &z, NO_RNG).unwrap();
            assert_eq!(h.max_abs(), 0.0);
            assert_eq!(r.max_abs(), 0.0);
        }
    }

    #[test]
    fn input_shape_checked() {
        let kg = KnowledgeGraph::from_indexed(3, 1, vec![], vec![], vec![]).unwrap();
        let g = augment(&kg);
        let l = layer(ReductionMode::Full, Activation::Tanh, g.num_relations());
        let mut store = ParameterStore::new();
        l.init_params(&mut store, &mut rng_for(1, Stream::Init))
            .unwrap();
        let bad = Tensor2::zeros(2, 3);
        assert!(l
            .forward(&store, &g, &bad, &Tensor2::zeros(3, 3), NO_RNG)
            .is_err());
    }

    #[test]
    fn gates_at_zero_halve_the_ungated_sum() {
        let kg = KnowledgeGraph::from_indexed(
            3,
            1,
            vec![Triple::new(0, 0, 1), Triple::new(2, 0, 1)],
            vec![],
            vec![],
        )
        .unwrap();
        let g = augment(&kg);
        let gl = GatedDirectedLayer {
            prefix: "g.".into(),
            d_in: 3,
            d_out: 2,
            activation: Activation::Identity,
        };
        let mut store = ParameterStore::new();
        gl.init_params(&mut store, &mut rng_for(4, Stream::Init))
            .unwrap();
        for l in Direction::ALL {
            store.value_mut(&gl.name("gate_w", l)).unwrap().fill(0.0);
        }
        let x = xavier_uniform(3, 3, &mut rng_for(5, Stream::Init)).unwrap();
        let (h, _) = gl.forward(&store, &g, &x).unwrap();
        let mut ungated = Tensor2::zeros(3, 2);
        for e in g.edges() {
            let w = store.value(&gl.name("w", e.dir)).unwrap();
            for o in 0..2 {
                ungated.data_mut()[e.dst * 2 + o] +=
                    crate::numerics::tensor::dot(w.row(o), x.row(e.src));
            }
        }
        for (a, b) in h.data().iter().zip(ungated.data()) {
            assert!((a - 0.5 * b).abs() < 1e-14);
        }

        for l in Direction::ALL {
            store.value_mut(&gl.name("gate_b", l)).unwrap().fill(-1e3);
        }
        let (h, _) = gl.forward(&store, &g, &x).unwrap();
        assert!(h.max_abs() < 1e-300);
    }
}
