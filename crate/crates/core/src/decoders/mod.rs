//! Link-prediction score functions.
//!
//! Every decoder scores a query `(s, r)` against all entities at once
//! (1-vs-all). Higher scores are better for all of them; TransE returns the
//! negated distance.

pub mod conv;
pub mod reshape;

use rand::Rng;

pub use conv::{default_plane, ConvCache, ConvDecoder, InteractEConfig};
pub use reshape::{permutations, reshape, Cell, PermutationPair, ReshapeKind, ReshapingSpec};

use crate::error::{KgeError, Result};
use crate::numerics::kernels::{
    circular_convolve_1d, circular_convolve_1d_backward, circular_correlate_1d, gather_rows,
    matmul, matmul_at, matmul_bt,
};
use crate::numerics::tensor::dot;
use crate::numerics::{ParameterStore, Tensor2};

fn same_dims(parts: &[&[f64]]) -> Result<()> {
    let d = parts[0].len();
    if parts.iter().any(|p| p.len() != d) {
        return Err(KgeError::Shape(
            "score arguments differ in dimension".into(),
        ));
    }
    Ok(())
}

fn p_norm(v: impl Iterator<Item = f64>, p: u8) -> f64 {
    match p {
        1 => v.map(f64::abs).sum(),
        _ => v.map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// `-‖e_s + e_r - e_o‖_p`, `p ∈ {1, 2}`.
pub fn score_transe(e_s: &[f64], e_r: &[f64], e_o: &[f64], p: u8) -> Result<f64> {
    same_dims(&[e_s, e_r, e_o])?;
    if p != 1 && p != 2 {
        return Err(KgeError::InvalidArgument(format!(
            "TransE norm must be 1 or 2, got {p}"
        )));
    }
    Ok(-p_norm((0..e_s.len()).map(|i| e_s[i] + e_r[i] - e_o[i]), p))
}

/// `Σ_i s_i r_i o_i`.
pub fn score_distmult(e_s: &[f64], e_r: &[f64], e_o: &[f64]) -> Result<f64> {
    same_dims(&[e_s, e_r, e_o])?;
    Ok((0..e_s.len()).map(|i| e_s[i] * e_r[i] * e_o[i]).sum())
}

/// `e_r · (e_s ⋆ e_o)` with `⋆` circular correlation.
pub fn score_hole(e_s: &[f64], e_r: &[f64], e_o: &[f64]) -> Result<f64> {
    same_dims(&[e_s, e_r, e_o])?;
    Ok(dot(e_r, &circular_correlate_1d(e_s, e_o)?))
}

/// A query `(subject, relation)` whose object is to be ranked. The relation
/// id is over the extended set, so head prediction uses inverse relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Query {
    pub subject: usize,
    pub relation: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    TransE { norm: u8 },
    DistMult,
    HolE,
    ConvE(ConvDecoder),
    InteractE(ConvDecoder),
}

/// Values kept from [`Decoder::forward`] for [`Decoder::backward`].
#[derive(Clone, Debug)]
pub struct DecoderCache {
    subjects: Tensor2,
    relations: Tensor2,
    /// Per-query hidden vectors for the bilinear decoders.
    hidden: Option<Tensor2>,
    conv: Option<ConvCache>,
}

impl Decoder {
    pub fn name(&self) -> &'static str {
        match self {
            Decoder::TransE { .. } => "transe",
            Decoder::DistMult => "distmult",
            Decoder::HolE => "hole",
            Decoder::ConvE(_) => "conve",
            Decoder::InteractE(_) => "interacte",
        }
    }

    fn conv(&self) -> Option<&ConvDecoder> {
        match self {
            Decoder::ConvE(c) | Decoder::InteractE(c) => Some(c),
            _ => None,
        }
    }

    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParameterStore,
        rng: &mut R,
    ) -> Result<()> {
        match self.conv() {
            Some(c) => c.init_params(store, rng),
            None => Ok(()),
        }
    }

    /// Logits for a batch of queries against every row of `entities`
    /// (`B × |V|`).
    pub fn forward<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        entities: &Tensor2,
        relations: &Tensor2,
        queries: &[Query],
        dropout_rng: Option<&mut R>,
    ) -> Result<(Tensor2, DecoderCache)> {
        if entities.cols() != relations.cols() {
            return Err(KgeError::Shape(format!(
                "entity dim {} differs from relation dim {}",
                entities.cols(),
                relations.cols()
            )));
        }
        let s_idx: Vec<usize> = queries.iter().map(|q| q.subject).collect();
        let r_idx: Vec<usize> = queries.iter().map(|q| q.relation).collect();
        if s_idx.iter().any(|&s| s >= entities.rows())
            || r_idx.iter().any(|&r| r >= relations.rows())
        {
            return Err(KgeError::InvalidArgument("query id out of range".into()));
        }
        let subjects = gather_rows(entities, &s_idx);
        let rels = gather_rows(relations, &r_idx);
        let d = entities.cols();
        let mut cache = DecoderCache {
            subjects,
            relations: rels,
            hidden: None,
            conv: None,
        };
        let logits = match self {
            Decoder::TransE { norm } => {
                let mut out = Tensor2::zeros(queries.len(), entities.rows());
                for q in 0..queries.len() {
                    let (s, r) = (cache.subjects.row(q), cache.relations.row(q));
                    for o in 0..entities.rows() {
                        let e = entities.row(o);
                        let v = -p_norm((0..d).map(|i| s[i] + r[i] - e[i]), *norm);
                        out.set(q, o, v);
                    }
                }
                out
            }
            Decoder::DistMult | Decoder::HolE => {
                let mut hidden = Tensor2::zeros(queries.len(), d);
                for q in 0..queries.len() {
                    let (s, r) = (cache.subjects.row(q), cache.relations.row(q));
                    let h = match self {
                        Decoder::DistMult => s.iter().zip(r).map(|(a, b)| a * b).collect(),
                        _ => circular_convolve_1d(r, s)?,
                    };
                    hidden.row_mut(q).copy_from_slice(&h);
                }
                let logits = matmul_bt(&hidden, entities)?;
                cache.hidden = Some(hidden);
                logits
            }
            Decoder::ConvE(c) | Decoder::InteractE(c) => {
                let (hidden, conv_cache) =
                    c.hidden(store, &cache.subjects, &cache.relations, dropout_rng)?;
                let logits = matmul_bt(&hidden, entities)?;
                cache.hidden = Some(hidden);
                cache.conv = Some(conv_cache);
                logits
            }
        };
        if !logits.is_finite() {
            return Err(KgeError::NonFinite(format!("{} logits", self.name())));
        }
        Ok((logits, cache))
    }

    /// Accumulates decoder-parameter gradients into `store` and embedding
    /// gradients into `dentities` / `drelations`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        entities: &Tensor2,
        queries: &[Query],
        cache: &DecoderCache,
        dlogits: &Tensor2,
        dentities: &mut Tensor2,
        drelations: &mut Tensor2,
    ) -> Result<()> {
        let d = entities.cols();
        let b = queries.len();
        let mut dsub = Tensor2::zeros(b, d);
        let mut drel = Tensor2::zeros(b, d);
        match self {
            Decoder::TransE { norm } => {
                for q in 0..b {
                    let (s, r) = (cache.subjects.row(q), cache.relations.row(q));
                    let mut dq = vec![0.0; d];
                    for o in 0..entities.rows() {
                        let g = dlogits.get(q, o);
                        if g == 0.0 {
                            continue;
                        }
                        let e = entities.row(o);
                        let u: Vec<f64> = (0..d).map(|i| s[i] + r[i] - e[i]).collect();
                        // d(-‖u‖)/du
                        let grad_u: Vec<f64> = match norm {
                            1 => u
                                .iter()
                                .map(|v| -v.signum() * (*v != 0.0) as u8 as f64)
                                .collect(),
                            _ => {
                                let n = p_norm(u.iter().copied(), 2);
                                if n == 0.0 {
                                    vec![0.0; d]
                                } else {
                                    u.iter().map(|v| -v / n).collect()
                                }
                            }
                        };
                        let de = dentities.row_mut(o);
                        for i in 0..d {
                            dq[i] += g * grad_u[i];
                            de[i] -= g * grad_u[i];
                        }
                    }
                    dsub.row_mut(q).copy_from_slice(&dq);
                    drel.row_mut(q).copy_from_slice(&dq);
                }
            }
            Decoder::DistMult | Decoder::HolE | Decoder::ConvE(_) | Decoder::InteractE(_) => {
                let hidden = cache.hidden.as_ref().expect("hidden cached");
                dentities.add_assign(&matmul_at(dlogits, hidden)?);
                let dhidden = matmul(dlogits, entities)?;
                match self {
                    Decoder::DistMult => {
                        for q in 0..b {
                            let (s, r, g) = (
                                cache.subjects.row(q),
                                cache.relations.row(q),
                                dhidden.row(q),
                            );
                            for i in 0..d {
                                dsub.data_mut()[q * d + i] = g[i] * r[i];
                                drel.data_mut()[q * d + i] = g[i] * s[i];
                            }
                        }
                    }
                    Decoder::HolE => {
                        for q in 0..b {
                            let (s, r) = (cache.subjects.row(q), cache.relations.row(q));
                            let mut ds = vec![0.0; d];
                            let mut dr = vec![0.0; d];
                            circular_convolve_1d_backward(r, s, dhidden.row(q), &mut dr, &mut ds);
                            dsub.row_mut(q).copy_from_slice(&ds);
                            drel.row_mut(q).copy_from_slice(&dr);
                        }
                    }
                    _ => {
                        let c = self.conv().expect("conv decoder");
                        let cc = cache.conv.as_ref().expect("conv cache");
                        let (ds, dr) = c.hidden_backward(store, cc, &dhidden)?;
                        dsub = ds;
                        drel = dr;
                    }
                }
            }
        }
        for (q, query) in queries.iter().enumerate() {
            for (t, v) in dentities.row_mut(query.subject).iter_mut().zip(dsub.row(q)) {
                *t += v;
            }
            for (t, v) in drelations
                .row_mut(query.relation)
                .iter_mut()
                .zip(drel.row(q))
            {
                *t += v;
            }
        }
        Ok(())
    }

    /// Scores of one `(e_s, e_r)` against every row of `entities`.
    pub fn score_all(
        &self,
        store: &ParameterStore,
        e_s: &[f64],
        e_r: &[f64],
        entities: &Tensor2,
    ) -> Result<Vec<f64>> {
        match self {
            Decoder::TransE { norm } => (0..entities.rows())
                .map(|o| score_transe(e_s, e_r, entities.row(o), *norm))
                .collect(),
            Decoder::DistMult => (0..entities.rows())
                .map(|o| score_distmult(e_s, e_r, entities.row(o)))
                .collect(),
            Decoder::HolE => (0..entities.rows())
                .map(|o| score_hole(e_s, e_r, entities.row(o)))
                .collect(),
            Decoder::ConvE(c) | Decoder::InteractE(c) => c.score(store, e_s, e_r, entities),
        }
    }
}
