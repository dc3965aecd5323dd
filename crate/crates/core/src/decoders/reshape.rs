//! Arrangements of a subject and a relation embedding into a 2-D plane, and
//! the feature permutations applied before reshaping.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{KgeError, Result};
use crate::numerics::{rng_for, Stream, Tensor2};

/// Provenance of one plane cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    /// Component `i` of the subject embedding.
    S(usize),
    /// Component `i` of the relation embedding.
    R(usize),
    /// Padding.
    Zero,
}

impl Cell {
    pub fn is_s(self) -> bool {
        matches!(self, Cell::S(_))
    }

    pub fn is_r(self) -> bool {
        matches!(self, Cell::R(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReshapeKind {
    /// Subject rows on top, relation rows below.
    Stacked,
    /// Blocks of `τ` subject rows and `τ` relation rows, alternating.
    Alternate(usize),
    /// Subject on cells with even `i + j`, relation on odd ones.
    Chequer,
}

impl FromStr for ReshapeKind {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "stacked" | "stack" => Ok(ReshapeKind::Stacked),
            "chequer" | "checker" | "chk" => Ok(ReshapeKind::Chequer),
            "alternate" | "alt" => Ok(ReshapeKind::Alternate(1)),
            _ => {
                let tau = lower
                    .strip_prefix("alternate:")
                    .or_else(|| lower.strip_prefix("alt:"))
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| {
                        KgeError::InvalidArgument(format!(
                            "unknown reshaping `{s}` (expected stacked, chequer or alternate:<tau>)"
                        ))
                    })?;
                Ok(ReshapeKind::Alternate(tau))
            }
        }
    }
}

impl fmt::Display for ReshapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReshapeKind::Stacked => f.write_str("stacked"),
            ReshapeKind::Alternate(t) => write!(f, "alternate:{t}"),
            ReshapeKind::Chequer => f.write_str("chequer"),
        }
    }
}

/// A reshaping function with target extents `rows × cols = 2d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReshapingSpec {
    pub kind: ReshapeKind,
    pub rows: usize,
    pub cols: usize,
}

impl ReshapingSpec {
    pub fn new(kind: ReshapeKind, rows: usize, cols: usize) -> Self {
        ReshapingSpec { kind, rows, cols }
    }

    /// Embedding dimension this spec consumes.
    pub fn dim(&self) -> usize {
        self.rows * self.cols / 2
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = (self.rows, self.cols);
        if m == 0 || n == 0 {
            return Err(KgeError::InvalidArgument(
                "reshape extents must be non-zero".into(),
            ));
        }
        if (m * n) % 2 != 0 {
            return Err(KgeError::InvalidArgument(format!(
                "{m}x{n} plane has an odd cell count"
            )));
        }
        match self.kind {
            ReshapeKind::Stacked if m % 2 != 0 => Err(KgeError::InvalidArgument(format!(
                "stacked reshaping needs an even row count, got {m}"
            ))),
            ReshapeKind::Alternate(tau) => {
                if m % 2 != 0 {
                    return Err(KgeError::InvalidArgument(format!(
                        "alternate reshaping needs an even row count, got {m}"
                    )));
                }
                if tau == 0 || (m / 2) % tau != 0 {
                    return Err(KgeError::InvalidArgument(format!(
                        "alternate block size {tau} must divide {}",
                        m / 2
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Row-major cell provenance of the plane.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let (m, n) = (self.rows, self.cols);
        let mut cells = Vec::with_capacity(m * n);
        match self.kind {
            ReshapeKind::Stacked => {
                let half = m / 2;
                for i in 0..m {
                    for j in 0..n {
                        cells.push(if i < half {
                            Cell::S(i * n + j)
                        } else {
                            Cell::R((i - half) * n + j)
                        });
                    }
                }
            }
            ReshapeKind::Alternate(tau) => {
                for i in 0..m {
                    let block = i / tau;
                    let src_row = (block / 2) * tau + i % tau;
                    for j in 0..n {
                        let idx = src_row * n + j;
                        cells.push(if block % 2 == 0 {
                            Cell::S(idx)
                        } else {
                            Cell::R(idx)
                        });
                    }
                }
            }
            ReshapeKind::Chequer => {
                let (mut si, mut ri) = (0, 0);
                for i in 0..m {
                    for j in 0..n {
                        if (i + j) % 2 == 0 {
                            cells.push(Cell::S(si));
                            si += 1;
                        } else {
                            cells.push(Cell::R(ri));
                            ri += 1;
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Places `e_s` and `e_r` into the plane described by `spec`.
pub fn reshape(spec: &ReshapingSpec, e_s: &[f64], e_r: &[f64]) -> Result<Tensor2> {
    if e_s.len() != spec.dim() || e_r.len() != spec.dim() {
        return Err(KgeError::Shape(format!(
            "{}x{} plane needs two {}-dim embeddings, got {} and {}",
            spec.rows,
            spec.cols,
            spec.dim(),
            e_s.len(),
            e_r.len()
        )));
    }
    let data = spec
        .cells()?
        .into_iter()
        .map(|c| match c {
            Cell::S(i) => e_s[i],
            Cell::R(i) => e_r[i],
            Cell::Zero => 0.0,
        })
        .collect();
    Tensor2::from_vec(spec.rows, spec.cols, data)
}

/// One permutation of the subject and one of the relation components.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPair {
    pub subject: Vec<usize>,
    pub relation: Vec<usize>,
}

impl PermutationPair {
    pub fn identity(d: usize) -> Self {
        PermutationPair {
            subject: (0..d).collect(),
            relation: (0..d).collect(),
        }
    }
}

/// `t` permutation pairs of `[0, d)`. The first pair is the identity; the
/// rest are Fisher–Yates shuffles drawn from the seed's permutation stream.
pub fn permutations(t: usize, seed: u64, d: usize) -> Result<Vec<PermutationPair>> {
    if t == 0 {
        return Err(KgeError::InvalidArgument(
            "permutation count must be at least 1".into(),
        ));
    }
    let mut rng = rng_for(seed, Stream::Permutations);
    let mut out = vec![PermutationPair::identity(d)];
    for _ in 1..t {
        let mut subject: Vec<usize> = (0..d).collect();
        let mut relation: Vec<usize> = (0..d).collect();
        subject.shuffle(&mut rng);
        relation.shuffle(&mut rng);
        out.push(PermutationPair { subject, relation });
    }
    Ok(out)
}
