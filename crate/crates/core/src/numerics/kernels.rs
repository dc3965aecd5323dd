//! Primitive kernels and their vector-Jacobian products.
//!
//! Every forward function `op` has a matching `op_backward` that takes the
//! upstream gradient and returns (or accumulates) the gradient with respect to
//! each input. Model code chains these by hand; there is no tape.
//!
//! The convolution and correlation loops are the direct `O(d^2)` and
//! `O(m n k^2)` forms and define the semantics of the operators.

use rand::Rng;

use super::tensor::Tensor2;
use crate::error::{KgeError, Result};

fn check_inner(op: &str, a: (usize, usize), b: (usize, usize), ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(KgeError::Shape(format!(
            "{op}: {}x{} incompatible with {}x{}",
            a.0, a.1, b.0, b.1
        )))
    }
}

/// `a · b` for `a: m×k`, `b: k×n`.
pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_inner("matmul", a.shape(), b.shape(), a.cols() == b.rows())?;
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = Tensor2::zeros(m, n);
    let bd = b.data();
    for i in 0..m {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (p, &av) in arow.iter().enumerate().take(k) {
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// `a · bᵀ` for `a: m×k`, `b: n×k`.
pub fn matmul_bt(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_inner("matmul_bt", a.shape(), b.shape(), a.cols() == b.cols())?;
    let (m, n) = (a.rows(), b.rows());
    let mut out = Tensor2::zeros(m, n);
    for i in 0..m {
        let arow = a.row(i);
        for j in 0..n {
            let v = super::tensor::dot(arow, b.row(j));
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// `aᵀ · b` for `a: k×m`, `b: k×n`.
pub fn matmul_at(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_inner("matmul_at", a.shape(), b.shape(), a.rows() == b.rows())?;
    let (m, n) = (a.cols(), b.cols());
    let mut out = Tensor2::zeros(m, n);
    for p in 0..a.rows() {
        let arow = a.row(p);
        let brow = b.row(p);
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = out.row_mut(i);
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Ok(out)
}

/// Gradients of `y = a · b`: returns `(g bᵀ, aᵀ g)`.
pub fn matmul_backward(a: &Tensor2, b: &Tensor2, g: &Tensor2) -> Result<(Tensor2, Tensor2)> {
    Ok((matmul_bt(g, b)?, matmul_at(a, g)?))
}

pub fn add(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_inner("add", a.shape(), b.shape(), a.same_shape(b))?;
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

pub fn sub(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_inner("sub", a.shape(), b.shape(), a.same_shape(b))?;
    let mut out = a.clone();
    out.axpy(-1.0, b);
    Ok(out)
}

/// Elementwise product.
pub fn mul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_inner("mul", a.shape(), b.shape(), a.same_shape(b))?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor2::from_vec(a.rows(), a.cols(), data)
}

/// Gradients of the elementwise product: `(g ∘ b, g ∘ a)`.
pub fn mul_backward(a: &Tensor2, b: &Tensor2, g: &Tensor2) -> Result<(Tensor2, Tensor2)> {
    Ok((mul(g, b)?, mul(g, a)?))
}

pub fn relu(x: &Tensor2) -> Tensor2 {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given the pre-activation `x`; the kink gets slope 0.
pub fn relu_backward(x: &Tensor2, g: &Tensor2) -> Tensor2 {
    let data = x
        .data()
        .iter()
        .zip(g.data())
        .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
        .collect();
    Tensor2::from_vec(x.rows(), x.cols(), data).expect("shape preserved")
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor2) -> Tensor2 {
    x.map(sigmoid_scalar)
}

/// Gradient of sigmoid given its output `y`.
pub fn sigmoid_backward(y: &Tensor2, g: &Tensor2) -> Tensor2 {
    let data = y
        .data()
        .iter()
        .zip(g.data())
        .map(|(&yv, &gv)| gv * yv * (1.0 - yv))
        .collect();
    Tensor2::from_vec(y.rows(), y.cols(), data).expect("shape preserved")
}

pub fn tanh(x: &Tensor2) -> Tensor2 {
    x.map(f64::tanh)
}

/// Gradient of tanh given its output `y`.
pub fn tanh_backward(y: &Tensor2, g: &Tensor2) -> Tensor2 {
    let data = y
        .data()
        .iter()
        .zip(g.data())
        .map(|(&yv, &gv)| gv * (1.0 - yv * yv))
        .collect();
    Tensor2::from_vec(y.rows(), y.cols(), data).expect("shape preserved")
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else
/// `1 / (1 - rate)`. A zero rate yields all ones.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Applies a mask in place. The backward rule is the same call on the gradient.
pub fn apply_mask(values: &mut [f64], mask: &[f64]) {
    debug_assert_eq!(values.len(), mask.len());
    for (v, m) in values.iter_mut().zip(mask) {
        *v *= m;
    }
}

/// `out[i] = table[idx[i]]`.
pub fn gather_rows(table: &Tensor2, idx: &[usize]) -> Tensor2 {
    let mut out = Tensor2::zeros(idx.len(), table.cols());
    for (i, &r) in idx.iter().enumerate() {
        out.row_mut(i).copy_from_slice(table.row(r));
    }
    out
}

/// Backward of [`gather_rows`]: scatter-adds `g` into `dtable`.
pub fn gather_rows_backward(g: &Tensor2, idx: &[usize], dtable: &mut Tensor2) {
    for (i, &r) in idx.iter().enumerate() {
        for (d, &v) in dtable.row_mut(r).iter_mut().zip(g.row(i)) {
            *d += v;
        }
    }
}

/// Flattens tensors row-major and concatenates them.
pub fn concat_flat(parts: &[&Tensor2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(parts.iter().map(|t| t.len()).sum());
    for p in parts {
        out.extend_from_slice(p.data());
    }
    out
}

/// Backward of [`concat_flat`]: splits a flat gradient back into tensors of
/// the given shapes.
pub fn concat_flat_backward(g: &[f64], shapes: &[(usize, usize)]) -> Vec<Tensor2> {
    let mut offset = 0;
    shapes
        .iter()
        .map(|&(r, c)| {
            let t = Tensor2::from_vec(r, c, g[offset..offset + r * c].to_vec()).expect("sized");
            offset += r * c;
            t
        })
        .collect()
}

/// Circular correlation `[a ⋆ b]_k = Σ_i a_i b_{(k+i) mod d}`.
pub fn circular_correlate_1d(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(KgeError::Shape(format!(
            "circular correlation needs equal non-zero dims, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = a.len();
    let mut out = vec![0.0; d];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..d {
            acc += a[i] * b[(k + i) % d];
        }
        *o = acc;
    }
    Ok(out)
}

/// Accumulates the gradients of [`circular_correlate_1d`] into `da`, `db`.
pub fn circular_correlate_1d_backward(
    a: &[f64],
    b: &[f64],
    g: &[f64],
    da: &mut [f64],
    db: &mut [f64],
) {
    let d = a.len();
    for (k, &gk) in g.iter().enumerate() {
        if gk == 0.0 {
            continue;
        }
        for i in 0..d {
            let j = (k + i) % d;
            da[i] += gk * b[j];
            db[j] += gk * a[i];
        }
    }
}

/// Circular convolution `[a ∗ b]_j = Σ_k a_k b_{(j-k) mod d}`.
pub fn circular_convolve_1d(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(KgeError::Shape(format!(
            "circular convolution needs equal non-zero dims, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d = a.len();
    let mut out = vec![0.0; d];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in 0..d {
            acc += a[k] * b[(j + d - k) % d];
        }
        *o = acc;
    }
    Ok(out)
}

/// Accumulates the gradients of [`circular_convolve_1d`] into `da`, `db`.
pub fn circular_convolve_1d_backward(
    a: &[f64],
    b: &[f64],
    g: &[f64],
    da: &mut [f64],
    db: &mut [f64],
) {
    let d = a.len();
    for (j, &gj) in g.iter().enumerate() {
        if gj == 0.0 {
            continue;
        }
        for k in 0..d {
            let i = (j + d - k) % d;
            da[k] += gj * b[i];
            db[i] += gj * a[k];
        }
    }
}

/// Boundary handling for the 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// Indices wrap modulo the input extents.
    Circular,
    /// Out-of-range taps read zero ("same"-size output).
    Zero,
}

fn check_kernel(input: &Tensor2, kernel: &Tensor2) -> Result<usize> {
    let k = kernel.rows();
    if kernel.cols() != k || k == 0 {
        return Err(KgeError::Shape(format!(
            "kernel must be square, got {}x{}",
            kernel.rows(),
            kernel.cols()
        )));
    }
    if k.is_multiple_of(2) {
        return Err(KgeError::InvalidArgument(format!(
            "kernel size must be odd, got {k}"
        )));
    }
    if input.is_empty() {
        return Err(KgeError::Shape("empty convolution input".into()));
    }
    Ok(k)
}

#[inline]
fn tap(p: usize, a: usize, half: usize, extent: usize, padding: Padding) -> Option<usize> {
    // source index p - (a - half)
    let s = p as isize + half as isize - a as isize;
    match padding {
        Padding::Circular => Some(s.rem_euclid(extent as isize) as usize),
        Padding::Zero => (s >= 0 && (s as usize) < extent).then_some(s as usize),
    }
}

/// 2-D convolution with symmetric taps `i, j ∈ [-⌊k/2⌋, ⌊k/2⌋]`:
/// `out[p,q] = Σ_{i,j} I[p-i, q-j] · w[i,j]`, where the kernel is stored with
/// tap `(i, j)` at `(i + ⌊k/2⌋, j + ⌊k/2⌋)`. Output extents equal input extents.
pub fn convolve_2d(input: &Tensor2, kernel: &Tensor2, padding: Padding) -> Result<Tensor2> {
    let k = check_kernel(input, kernel)?;
    let (m, n) = input.shape();
    let half = k / 2;
    let mut out = Tensor2::zeros(m, n);
    for p in 0..m {
        for a in 0..k {
            let Some(si) = tap(p, a, half, m, padding) else {
                continue;
            };
            let irow = input.row(si);
            let krow = kernel.row(a);
            for q in 0..n {
                let mut acc = 0.0;
                for (b, &w) in krow.iter().enumerate() {
                    if let Some(sj) = tap(q, b, half, n, padding) {
                        acc += irow[sj] * w;
                    }
                }
                out.data_mut()[p * n + q] += acc;
            }
        }
    }
    Ok(out)
}

/// Accumulates gradients of [`convolve_2d`] w.r.t. input and kernel.
pub fn convolve_2d_backward(
    input: &Tensor2,
    kernel: &Tensor2,
    g: &Tensor2,
    padding: Padding,
    dinput: &mut Tensor2,
    dkernel: &mut Tensor2,
) {
    let k = kernel.rows();
    let (m, n) = input.shape();
    let half = k / 2;
    for p in 0..m {
        for a in 0..k {
            let Some(si) = tap(p, a, half, m, padding) else {
                continue;
            };
            for q in 0..n {
                let gv = g.get(p, q);
                if gv == 0.0 {
                    continue;
                }
                for b in 0..k {
                    if let Some(sj) = tap(q, b, half, n, padding) {
                        dinput.data_mut()[si * n + sj] += gv * kernel.get(a, b);
                        dkernel.data_mut()[a * k + b] += gv * input.get(si, sj);
                    }
                }
            }
        }
    }
}

/// Circular 2-D convolution, see [`convolve_2d`].
pub fn circular_convolve_2d(input: &Tensor2, kernel: &Tensor2) -> Result<Tensor2> {
    convolve_2d(input, kernel, Padding::Circular)
}
