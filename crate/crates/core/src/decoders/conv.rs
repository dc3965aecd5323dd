//! Convolutional decoders over reshaped `(e_s, e_r)` planes.
//!
//! ConvE: one stacked plane, zero-padded convolution.
//! InteractE: `t` permuted planes (chequer by default) convolved depth-wise
//! with one circular filter bank shared across the planes.
//!
//! Both then flatten the ReLU'd feature maps, project to `R^d`, apply ReLU
//! and dot the result with every entity embedding. The sigmoid lives in the
//! loss.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reshape::{permutations, Cell, PermutationPair, ReshapeKind, ReshapingSpec};
use crate::error::{KgeError, Result};
use crate::numerics::kernels::{
    self, convolve_2d, convolve_2d_backward, matmul, matmul_at, Padding,
};
use crate::numerics::{xavier_uniform, ParameterStore, Tensor2};

pub const FILTERS: &str = "dec.filters";
pub const PROJECTION: &str = "dec.proj";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractEConfig {
    pub dim: usize,
    /// Number of feature permutations `t`.
    pub permutations: usize,
    pub seed: u64,
    pub reshape: ReshapingSpec,
    pub kernel_size: usize,
    pub filters: usize,
    /// Dropout on the flattened feature maps during training.
    pub feature_dropout: f64,
}

impl InteractEConfig {
    /// Chequer reshaping on the default plane for `dim`.
    pub fn new(
        dim: usize,
        permutations: usize,
        kernel_size: usize,
        filters: usize,
        seed: u64,
    ) -> Result<Self> {
        let (rows, cols) = default_plane(dim)?;
        Ok(InteractEConfig {
            dim,
            permutations,
            seed,
            reshape: ReshapingSpec::new(ReshapeKind::Chequer, rows, cols),
            kernel_size,
            filters,
            feature_dropout: 0.0,
        })
    }
}

/// Plane extents `m × n = 2d` with `m` the largest even divisor of `2d` not
/// exceeding `sqrt(2d)`; `d = 200` gives `20 × 20`.
pub fn default_plane(dim: usize) -> Result<(usize, usize)> {
    let cells = 2 * dim;
    (2..=cells)
        .step_by(2)
        .take_while(|m| m * m <= cells)
        .filter(|m| cells.is_multiple_of(*m))
        .last()
        .map(|m| (m, cells / m))
        .ok_or_else(|| KgeError::InvalidArgument(format!("no even plane height for dim {dim}")))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvDecoder {
    pub dim: usize,
    pub reshape: ReshapingSpec,
    pub permutations: Vec<PermutationPair>,
    pub padding: Padding,
    pub kernel_size: usize,
    pub filters: usize,
    pub feature_dropout: f64,
    cells: Vec<Cell>,
}

/// Forward values of one query needed for its backward pass.
#[derive(Clone, Debug)]
struct QueryTrace {
    planes: Vec<Tensor2>,
    maps_pre: Vec<Tensor2>,
}

#[derive(Clone, Debug)]
pub struct ConvCache {
    traces: Vec<QueryTrace>,
    /// Flattened features after ReLU and dropout, one row per query.
    flat: Tensor2,
    mask: Option<Vec<f64>>,
    hidden_pre: Tensor2,
}

impl ConvDecoder {
    fn build(
        dim: usize,
        reshape: ReshapingSpec,
        permutations: Vec<PermutationPair>,
        padding: Padding,
        kernel_size: usize,
        filters: usize,
        feature_dropout: f64,
    ) -> Result<Self> {
        if reshape.dim() != dim {
            return Err(KgeError::InvalidArgument(format!(
                "{}x{} plane does not hold two {dim}-dim embeddings",
                reshape.rows, reshape.cols
            )));
        }
        if kernel_size.is_multiple_of(2) || kernel_size == 0 {
            return Err(KgeError::InvalidArgument(format!(
                "kernel size must be odd, got {kernel_size}"
            )));
        }
        if filters == 0 {
            return Err(KgeError::InvalidArgument("need at least one filter".into()));
        }
        if !(0.0..1.0).contains(&feature_dropout) {
            return Err(KgeError::InvalidArgument(
                "dropout must lie in [0, 1)".into(),
            ));
        }
        let cells = reshape.cells()?;
        Ok(ConvDecoder {
            dim,
            reshape,
            permutations,
            padding,
            kernel_size,
            filters,
            feature_dropout,
            cells,
        })
    }

    /// ConvE on a stacked `rows × (2d / rows)` plane.
    pub fn conve(
        dim: usize,
        rows: usize,
        kernel_size: usize,
        filters: usize,
        feature_dropout: f64,
    ) -> Result<Self> {
        if rows == 0 || !(2 * dim).is_multiple_of(rows) {
            return Err(KgeError::InvalidArgument(format!(
                "{rows} rows do not tile 2*{dim} cells"
            )));
        }
        let spec = ReshapingSpec::new(ReshapeKind::Stacked, rows, 2 * dim / rows);
        Self::build(
            dim,
            spec,
            vec![PermutationPair::identity(dim)],
            Padding::Zero,
            kernel_size,
            filters,
            feature_dropout,
        )
    }

    pub fn interacte(cfg: &InteractEConfig) -> Result<Self> {
        let perms = permutations(cfg.permutations, cfg.seed, cfg.dim)?;
        Self::build(
            cfg.dim,
            cfg.reshape,
            perms,
            Padding::Circular,
            cfg.kernel_size,
            cfg.filters,
            cfg.feature_dropout,
        )
    }

    fn plane_cells(&self) -> usize {
        self.reshape.rows * self.reshape.cols
    }

    /// Length of the flattened feature vector, `t · F · m · n`.
    pub fn flat_len(&self) -> usize {
        self.permutations.len() * self.filters * self.plane_cells()
    }

    pub fn init_params<R: Rng + ?Sized>(
        &self,
        store: &mut ParameterStore,
        rng: &mut R,
    ) -> Result<()> {
        let k2 = self.kernel_size * self.kernel_size;
        store.insert(FILTERS, xavier_uniform(self.filters, k2, rng)?);
        store.insert(PROJECTION, xavier_uniform(self.flat_len(), self.dim, rng)?);
        Ok(())
    }

    fn kernel(&self, filters: &Tensor2, f: usize) -> Tensor2 {
        let k = self.kernel_size;
        Tensor2::from_vec(k, k, filters.row(f).to_vec()).expect("k*k row")
    }

    fn plane(&self, perm: &PermutationPair, e_s: &[f64], e_r: &[f64]) -> Tensor2 {
        let data = self
            .cells
            .iter()
            .map(|c| match *c {
                Cell::S(i) => e_s[perm.subject[i]],
                Cell::R(i) => e_r[perm.relation[i]],
                Cell::Zero => 0.0,
            })
            .collect();
        Tensor2::from_vec(self.reshape.rows, self.reshape.cols, data).expect("plane extents")
    }

    /// Convolves every permuted plane with every filter; returns the trace and
    /// the flattened ReLU features.
    fn trace(&self, filters: &Tensor2, e_s: &[f64], e_r: &[f64]) -> Result<(QueryTrace, Vec<f64>)> {
        let kernels: Vec<Tensor2> = (0..self.filters).map(|f| self.kernel(filters, f)).collect();
        let mut planes = Vec::with_capacity(self.permutations.len());
        let mut maps_pre = Vec::with_capacity(self.permutations.len() * self.filters);
        let mut flat = Vec::with_capacity(self.flat_len());
        for perm in &self.permutations {
            let plane = self.plane(perm, e_s, e_r);
            for kernel in &kernels {
                let map = convolve_2d(&plane, kernel, self.padding)?;
                flat.extend(map.data().iter().map(|v| v.max(0.0)));
                maps_pre.push(map);
            }
            planes.push(plane);
        }
        Ok((QueryTrace { planes, maps_pre }, flat))
    }

    /// Hidden query vectors `relu(vec(relu(conv)) · W)` for a batch of
    /// `(e_s, e_r)` row pairs.
    pub fn hidden<R: Rng + ?Sized>(
        &self,
        store: &ParameterStore,
        subjects: &Tensor2,
        relations: &Tensor2,
        dropout_rng: Option<&mut R>,
    ) -> Result<(Tensor2, ConvCache)> {
        let filters = store.value(FILTERS)?;
        let results: Vec<Result<(QueryTrace, Vec<f64>)>> = (0..subjects.rows())
            .into_par_iter()
            .map(|q| self.trace(filters, subjects.row(q), relations.row(q)))
            .collect();
        let mut traces = Vec::with_capacity(results.len());
        let mut flat = Tensor2::zeros(subjects.rows(), self.flat_len());
        for (q, r) in results.into_iter().enumerate() {
            let (trace, f) = r?;
            flat.row_mut(q).copy_from_slice(&f);
            traces.push(trace);
        }
        let mask = match dropout_rng {
            Some(rng) if self.feature_dropout > 0.0 => {
                let m = kernels::dropout_mask(flat.len(), self.feature_dropout, rng);
                kernels::apply_mask(flat.data_mut(), &m);
                Some(m)
            }
            _ => None,
        };
        let hidden_pre = matmul(&flat, store.value(PROJECTION)?)?;
        let hidden = kernels::relu(&hidden_pre);
        if !hidden.is_finite() {
            return Err(KgeError::NonFinite("convolutional decoder features".into()));
        }
        Ok((
            hidden,
            ConvCache {
                traces,
                flat,
                mask,
                hidden_pre,
            },
        ))
    }

    /// Backpropagates `dhidden`; accumulates filter/projection gradients and
    /// returns gradients for the subject and relation rows.
    pub fn hidden_backward(
        &self,
        store: &mut ParameterStore,
        cache: &ConvCache,
        dhidden: &Tensor2,
    ) -> Result<(Tensor2, Tensor2)> {
        let dpre = kernels::relu_backward(&cache.hidden_pre, dhidden);
        store.accumulate(PROJECTION, &matmul_at(&cache.flat, &dpre)?)?;
        let mut dflat = kernels::matmul_bt(&dpre, store.value(PROJECTION)?)?;
        if let Some(mask) = &cache.mask {
            kernels::apply_mask(dflat.data_mut(), mask);
        }
        let filters = store.value(FILTERS)?.clone();
        let kernels: Vec<Tensor2> = (0..self.filters)
            .map(|f| self.kernel(&filters, f))
            .collect();
        let cells = self.plane_cells();

        let per_query: Vec<(Vec<f64>, Vec<f64>, Tensor2)> = cache
            .traces
            .par_iter()
            .enumerate()
            .map(|(q, trace)| {
                let k = self.kernel_size;
                let mut ds = vec![0.0; self.dim];
                let mut dr = vec![0.0; self.dim];
                let mut dfilters = Tensor2::zeros(self.filters, k * k);
                let g = dflat.row(q);
                for (c, perm) in self.permutations.iter().enumerate() {
                    let plane = &trace.planes[c];
                    let mut dplane = Tensor2::zeros(plane.rows(), plane.cols());
                    for (f, kernel) in kernels.iter().enumerate() {
                        let slot = c * self.filters + f;
                        let pre = &trace.maps_pre[slot];
                        let seg = &g[slot * cells..(slot + 1) * cells];
                        let dmap_data = pre
                            .data()
                            .iter()
                            .zip(seg)
                            .map(|(&p, &gv)| if p > 0.0 { gv } else { 0.0 })
                            .collect();
                        let dmap =
                            Tensor2::from_vec(plane.rows(), plane.cols(), dmap_data).expect("map");
                        let mut dkernel = Tensor2::zeros(k, k);
                        convolve_2d_backward(
                            plane,
                            kernel,
                            &dmap,
                            self.padding,
                            &mut dplane,
                            &mut dkernel,
                        );
                        for (d, v) in dfilters.row_mut(f).iter_mut().zip(dkernel.data()) {
                            *d += v;
                        }
                    }
                    for (cell, &gv) in self.cells.iter().zip(dplane.data()) {
                        match *cell {
                            Cell::S(i) => ds[perm.subject[i]] += gv,
                            Cell::R(i) => dr[perm.relation[i]] += gv,
                            Cell::Zero => {}
                        }
                    }
                }
                (ds, dr, dfilters)
            })
            .collect();

        let b = cache.traces.len();
        let mut dsub = Tensor2::zeros(b, self.dim);
        let mut drel = Tensor2::zeros(b, self.dim);
        let mut dfilters = Tensor2::zeros(self.filters, self.kernel_size * self.kernel_size);
        for (q, (ds, dr, df)) in per_query.into_iter().enumerate() {
            dsub.row_mut(q).copy_from_slice(&ds);
            drel.row_mut(q).copy_from_slice(&dr);
            dfilters.add_assign(&df);
        }
        store.accumulate(FILTERS, &dfilters)?;
        Ok((dsub, drel))
    }

    /// Scores of `(e_s, e_r, o)` for every row `o` of `entities`.
    pub fn score(
        &self,
        store: &ParameterStore,
        e_s: &[f64],
        e_r: &[f64],
        entities: &Tensor2,
    ) -> Result<Vec<f64>> {
        let (h, _) = self.hidden::<rand_chacha::ChaCha8Rng>(
            store,
            &Tensor2::row_vector(e_s),
            &Tensor2::row_vector(e_r),
            None,
        )?;
        Ok((0..entities.rows())
            .map(|o| crate::numerics::tensor::dot(h.row(0), entities.row(o)))
            .collect())
    }

    /// Feature maps before flattening (pre-ReLU), one per `(plane, filter)`.
    pub fn feature_maps(
        &self,
        store: &ParameterStore,
        e_s: &[f64],
        e_r: &[f64],
    ) -> Result<Vec<Tensor2>> {
        Ok(self.trace(store.value(FILTERS)?, e_s, e_r)?.0.maps_pre)
    }

    /// The reshaped (permuted) input planes.
    pub fn planes(&self, e_s: &[f64], e_r: &[f64]) -> Vec<Tensor2> {
        self.permutations
            .iter()
            .map(|p| self.plane(p, e_s, e_r))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rng_for, Stream};

    #[test]
    fn default_planes() {
        assert_eq!(default_plane(200).unwrap(), (20, 20));
        assert_eq!(default_plane(32).unwrap(), (8, 8));
        assert_eq!(default_plane(8).unwrap(), (4, 4));
        assert_eq!(default_plane(9).unwrap(), (2, 9));
    }

    #[test]
    fn zero_parameters_give_zero_scores() {
        let cfg = InteractEConfig::new(8, 2, 3, 2, 1).unwrap();
        for dec in [
            ConvDecoder::interacte(&cfg).unwrap(),
            ConvDecoder::conve(8, 4, 3, 2, 0.0).unwrap(),
        ] {
            let mut store = ParameterStore::new();
            dec.init_params(&mut store, &mut rng_for(0, Stream::Init))
                .unwrap();
            store.value_mut(FILTERS).unwrap().fill(0.0);
            store.value_mut(PROJECTION).unwrap().fill(0.0);
            let ents = xavier_uniform(5, 8, &mut rng_for(1, Stream::Init)).unwrap();
            let s = dec.score(&store, ents.row(0), ents.row(1), &ents).unwrap();
            assert!(s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ConvDecoder::conve(8, 3, 3, 1, 0.0).is_err());
        assert!(ConvDecoder::conve(8, 4, 2, 1, 0.0).is_err());
        assert!(ConvDecoder::conve(8, 4, 3, 0, 0.0).is_err());
        let mut cfg = InteractEConfig::new(8, 1, 3, 1, 0).unwrap();
        cfg.reshape.rows = 2;
        assert!(ConvDecoder::interacte(&cfg).is_err());
    }
}
