//! Exact counting of feature interactions inside convolution windows.
//!
//! A layout is a grid of provenance tags. An interaction is an ordered pair of
//! distinct components that fall inside the same `k × k` window. Pairs with
//! one subject and one relation component are heterogeneous; pairs from the
//! same embedding are homogeneous. Everything here is integer arithmetic.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::decoders::reshape::{Cell, ReshapeKind, ReshapingSpec};
use crate::error::{KgeError, Result};
use crate::numerics::{rng_for, Stream};

/// A grid of provenance tags, stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutMatrix {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl LayoutMatrix {
    pub fn new(rows: usize, cols: usize, cells: Vec<Cell>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(KgeError::Shape(format!(
                "layout {rows}x{cols} needs {} cells, got {}",
                rows * cols,
                cells.len()
            )));
        }
        Ok(LayoutMatrix { rows, cols, cells })
    }

    pub fn from_spec(spec: &ReshapingSpec) -> Result<Self> {
        Self::new(spec.rows, spec.cols, spec.cells()?)
    }

    /// An `n × n` layout of the given reshaping.
    pub fn square(kind: ReshapeKind, n: usize) -> Result<Self> {
        Self::from_spec(&ReshapingSpec::new(kind, n, n))
    }

    /// A uniformly random balanced assignment of `rows·cols/2` subject tags
    /// and as many relation tags.
    pub fn random_balanced<R: rand::Rng + ?Sized>(
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !(rows * cols).is_multiple_of(2) {
            return Err(KgeError::InvalidArgument(format!(
                "{rows}x{cols} layout cannot hold a balanced assignment"
            )));
        }
        let d = rows * cols / 2;
        let mut cells: Vec<Cell> = (0..d).map(Cell::S).chain((0..d).map(Cell::R)).collect();
        cells.shuffle(rng);
        Self::new(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.cols + j]
    }

    /// Surrounds the layout with `p` rows and columns of `Zero` on every side.
    pub fn pad_zero(&self, p: usize) -> Self {
        let (m, n) = (self.rows + 2 * p, self.cols + 2 * p);
        let mut cells = vec![Cell::Zero; m * n];
        for i in 0..self.rows {
            for j in 0..self.cols {
                cells[(i + p) * n + j + p] = self.get(i, j);
            }
        }
        LayoutMatrix {
            rows: m,
            cols: n,
            cells,
        }
    }

    /// Surrounds the layout with `p` wrapped-around rows and columns on every
    /// side.
    pub fn pad_circular(&self, p: usize) -> Self {
        let (m, n) = (self.rows + 2 * p, self.cols + 2 * p);
        let mut cells = Vec::with_capacity(m * n);
        for i in 0..m {
            let si = (i as isize - p as isize).rem_euclid(self.rows as isize) as usize;
            for j in 0..n {
                let sj = (j as isize - p as isize).rem_euclid(self.cols as isize) as usize;
                cells.push(self.get(si, sj));
            }
        }
        LayoutMatrix {
            rows: m,
            cols: n,
            cells,
        }
    }

    /// The same layout with every subject tag turned into a relation tag and
    /// vice versa.
    pub fn swap_tags(&self) -> Self {
        let cells = self
            .cells
            .iter()
            .map(|c| match *c {
                Cell::S(i) => Cell::R(i),
                Cell::R(i) => Cell::S(i),
                Cell::Zero => Cell::Zero,
            })
            .collect();
        LayoutMatrix {
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }

    /// Distinct non-zero tags inside the window whose top-left corner is
    /// `(top, left)`, split into subject and relation counts.
    fn window_split(
        &self,
        top: usize,
        left: usize,
        k: usize,
        wrap: bool,
        scratch: &mut Vec<Cell>,
    ) -> (u64, u64) {
        scratch.clear();
        for di in 0..k {
            for dj in 0..k {
                let (i, j) = if wrap {
                    ((top + di) % self.rows, (left + dj) % self.cols)
                } else {
                    (top + di, left + dj)
                };
                let c = self.get(i, j);
                if c != Cell::Zero {
                    scratch.push(c);
                }
            }
        }
        scratch.sort_unstable_by_key(|c| match *c {
            Cell::S(i) => (0, i),
            Cell::R(i) => (1, i),
            Cell::Zero => (2, 0),
        });
        scratch.dedup();
        let s = scratch.iter().filter(|c| c.is_s()).count() as u64;
        (s, scratch.len() as u64 - s)
    }

    fn window_origins(&self, k: usize, wrap: bool) -> impl Iterator<Item = (usize, usize)> {
        let (rows, cols) = if wrap {
            (self.rows, self.cols)
        } else {
            (self.rows + 1 - k, self.cols + 1 - k)
        };
        (0..rows).flat_map(move |i| (0..cols).map(move |j| (i, j)))
    }
}

/// Interaction totals over every window of a layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InteractionCount {
    pub n_het: u64,
    pub n_homo: u64,
    pub positions: u64,
}

fn check_window(layout: &LayoutMatrix, k: usize) -> Result<()> {
    if k == 0 || k > layout.rows.min(layout.cols) {
        return Err(KgeError::InvalidArgument(format!(
            "window {k} does not fit a {}x{} layout",
            layout.rows, layout.cols
        )));
    }
    Ok(())
}

/// Counts ordered heterogeneous and homogeneous pairs over all `k × k`
/// windows. With `wrap` the windows wrap around the edges and there are
/// `rows·cols` of them; otherwise `(rows−k+1)(cols−k+1)`.
pub fn enumerate_interactions(
    layout: &LayoutMatrix,
    k: usize,
    wrap: bool,
) -> Result<InteractionCount> {
    check_window(layout, k)?;
    let mut scratch = Vec::with_capacity(k * k);
    let mut count = InteractionCount::default();
    for (i, j) in layout.window_origins(k, wrap) {
        let (x, y) = layout.window_split(i, j, k, wrap, &mut scratch);
        count.n_het += 2 * x * y;
        count.n_homo += x * x.saturating_sub(1) + y * y.saturating_sub(1);
        count.positions += 1;
    }
    Ok(count)
}

/// Largest heterogeneous count of any single window, used against the
/// per-window bound `2⌊k⁴/4⌋`.
pub fn max_window_het(layout: &LayoutMatrix, k: usize, wrap: bool) -> Result<u64> {
    check_window(layout, k)?;
    let mut scratch = Vec::with_capacity(k * k);
    Ok(layout
        .window_origins(k, wrap)
        .map(|(i, j)| {
            let (x, y) = layout.window_split(i, j, k, wrap, &mut scratch);
            2 * x * y
        })
        .max()
        .unwrap_or(0))
}

/// Upper bound on the heterogeneous pairs in one `k × k` window.
pub fn window_het_bound(k: usize) -> u64 {
    let k4 = (k as u64).pow(4);
    2 * (k4 / 4)
}

/// Whether the stacked closed form's derivation applies: every split of a
/// window into `l` subject rows and `k − l` relation rows, `1 ≤ l < k`, must
/// occur exactly once per column position, which needs `n/2 ≥ k − 1`.
pub fn stacked_closed_form_applies(n: usize, k: usize) -> bool {
    n.is_multiple_of(2) && k >= 1 && k <= n && n / 2 + 1 >= k
}

/// Closed-form heterogeneous count of an `n × n` stacked or single-row
/// alternating layout without wrap-around.
pub fn closed_form_het(kind: ReshapeKind, n: usize, k: usize) -> Result<u64> {
    if k == 0 || k > n || !n.is_multiple_of(2) {
        return Err(KgeError::InvalidArgument(format!(
            "closed form needs an even n and 1 <= k <= n, got n={n}, k={k}"
        )));
    }
    let (n, k) = (n as u64, k as u64);
    let positions = n - k + 1;
    match kind {
        ReshapeKind::Alternate(1) => {
            Ok(positions * positions * k * k * 2 * (k / 2) * k.div_ceil(2))
        }
        ReshapeKind::Stacked => {
            if !stacked_closed_form_applies(n as usize, k as usize) {
                return Err(KgeError::Unsupported(format!(
                    "stacked closed form assumes n/2 >= k-1, got n={n}, k={k}"
                )));
            }
            Ok(positions * k * k * (k * (k + 1) * (k - 1) / 3))
        }
        other => Err(KgeError::Unsupported(format!(
            "no closed form for {other} reshaping"
        ))),
    }
}

/// The admissibility threshold below which the alternate-beats-stacked
/// inequality is not claimed.
pub fn prop1_threshold_holds(n: usize, k: usize) -> bool {
    let (n, k) = (n as u64, k as u64);
    if k % 2 == 1 {
        // n ≥ 5k/3 − 1
        3 * n + 3 >= 5 * k
    } else {
        // n ≥ (5k+2)(k−1)/(3k)
        3 * k * n >= (5 * k + 2) * (k - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop1Entry {
    pub n: usize,
    pub k: usize,
    pub alternate_het: u64,
    pub stacked_het: u64,
    /// Whether the inequality is asserted at this point.
    pub asserted: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop1Report {
    pub entries: Vec<Prop1Entry>,
    /// `(n, k)` points that are not square layouts with an even side and a
    /// fitting window.
    pub skipped: Vec<(usize, usize)>,
    pub counterexamples: Vec<(usize, usize)>,
    pub passed: bool,
}

/// Every even `n ≤ max_n` paired with every window size `1 ≤ k ≤ n`.
pub fn prop1_grid(max_n: usize) -> Vec<(usize, usize)> {
    (2..=max_n)
        .step_by(2)
        .flat_map(|n| (1..=n).map(move |k| (n, k)))
        .collect()
}

/// Alternating rows never carry fewer heterogeneous pairs than stacking,
/// checked by enumeration at every grid point past the threshold.
pub fn verify_prop1(grid: &[(usize, usize)]) -> Prop1Report {
    let mut report = Prop1Report {
        entries: Vec::new(),
        skipped: Vec::new(),
        counterexamples: Vec::new(),
        passed: true,
    };
    for &(n, k) in grid {
        let layouts = LayoutMatrix::square(ReshapeKind::Alternate(1), n)
            .and_then(|alt| Ok((alt, LayoutMatrix::square(ReshapeKind::Stacked, n)?)));
        let (alt, stk) = match layouts {
            Ok(pair) if k >= 1 && k <= n => pair,
            _ => {
                report.skipped.push((n, k));
                continue;
            }
        };
        let a = enumerate_interactions(&alt, k, false)
            .expect("window fits")
            .n_het;
        let s = enumerate_interactions(&stk, k, false)
            .expect("window fits")
            .n_het;
        let asserted = prop1_threshold_holds(n, k);
        let holds = a >= s;
        if asserted && !holds {
            report.counterexamples.push((n, k));
            report.passed = false;
        }
        report.entries.push(Prop1Entry {
            n,
            k,
            alternate_het: a,
            stacked_het: s,
            asserted,
            holds,
        });
    }
    report
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop2Report {
    pub n: usize,
    pub k: usize,
    /// Admissible block sizes in increasing order with their counts.
    pub chain: Vec<(usize, u64)>,
    pub skipped: Vec<usize>,
    pub passed: bool,
}

/// Block size `τ` is admissible when `n/(2τ)` is a whole number and, for
/// `τ < k`, so is `k/τ`.
pub fn prop2_admissible(n: usize, k: usize, tau: usize) -> bool {
    tau >= 1 && n.is_multiple_of(2 * tau) && (tau >= k || k.is_multiple_of(tau))
}

/// Every block size dividing `n/2`.
pub fn prop2_taus(n: usize) -> Vec<usize> {
    (1..=n / 2).filter(|t| (n / 2).is_multiple_of(*t)).collect()
}

/// Heterogeneous counts are non-increasing as the alternating block grows.
pub fn verify_prop2(n: usize, k: usize, taus: &[usize]) -> Result<Prop2Report> {
    let mut taus = taus.to_vec();
    taus.sort_unstable();
    taus.dedup();
    let mut chain = Vec::new();
    let mut skipped = Vec::new();
    for tau in taus {
        if !prop2_admissible(n, k, tau) || k > n {
            skipped.push(tau);
            continue;
        }
        let layout = LayoutMatrix::square(ReshapeKind::Alternate(tau), n)?;
        chain.push((tau, enumerate_interactions(&layout, k, false)?.n_het));
    }
    let passed = chain.windows(2).all(|w| w[0].1 >= w[1].1);
    Ok(Prop2Report {
        n,
        k,
        chain,
        skipped,
        passed,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop3Report {
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    pub chequer_het: u64,
    pub best_sample_het: u64,
    /// Structured layouts compared against the chequer layout.
    pub structured: Vec<(String, u64)>,
    pub window_bound: u64,
    /// Largest single-window count seen in any compared layout.
    pub max_window_het: u64,
    pub counterexamples: usize,
    pub passed: bool,
}

/// The chequer layout has at least as many heterogeneous pairs as `samples`
/// random balanced layouts and every structured layout, and no window of any
/// of them exceeds the per-window bound.
pub fn verify_prop3(n: usize, k: usize, samples: usize, seed: u64) -> Result<Prop3Report> {
    if samples == 0 {
        return Err(KgeError::InvalidArgument(
            "at least one sample is required".into(),
        ));
    }
    let chequer = LayoutMatrix::square(ReshapeKind::Chequer, n)?;
    let chequer_het = enumerate_interactions(&chequer, k, false)?.n_het;
    let bound = window_het_bound(k);
    let mut max_window = max_window_het(&chequer, k, false)?;
    let mut counterexamples = 0;

    let mut structured = Vec::new();
    let mut kinds = vec![ReshapeKind::Stacked];
    kinds.extend(prop2_taus(n).into_iter().map(ReshapeKind::Alternate));
    for kind in kinds {
        let layout = LayoutMatrix::square(kind, n)?;
        let het = enumerate_interactions(&layout, k, false)?.n_het;
        max_window = max_window.max(max_window_het(&layout, k, false)?);
        if het > chequer_het {
            counterexamples += 1;
        }
        structured.push((kind.to_string(), het));
    }

    let mut rng = rng_for(seed, Stream::Sampling);
    let mut best = 0;
    for _ in 0..samples {
        let layout = LayoutMatrix::random_balanced(n, n, &mut rng)?;
        let het = enumerate_interactions(&layout, k, false)?.n_het;
        max_window = max_window.max(max_window_het(&layout, k, false)?);
        best = best.max(het);
        if het > chequer_het {
            counterexamples += 1;
        }
    }
    Ok(Prop3Report {
        n,
        k,
        samples,
        chequer_het,
        best_sample_het: best,
        structured,
        window_bound: bound,
        max_window_het: max_window,
        counterexamples,
        passed: counterexamples == 0 && max_window <= bound,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prop4Report {
    pub k: usize,
    pub padding: usize,
    pub circular_het: u64,
    pub zero_het: u64,
    pub passed: bool,
}

/// Circular padding yields at least as many heterogeneous pairs as zero
/// padding of the same width.
pub fn verify_prop4(layout: &LayoutMatrix, k: usize, p: usize) -> Result<Prop4Report> {
    let circular = enumerate_interactions(&layout.pad_circular(p), k, false)?.n_het;
    let zero = enumerate_interactions(&layout.pad_zero(p), k, false)?.n_het;
    Ok(Prop4Report {
        k,
        padding: p,
        circular_het: circular,
        zero_het: zero,
        passed: circular >= zero,
    })
}
