use rand::Rng;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hcat(parts: &[&Matrix]) -> Matrix {
        let rows = parts[0].rows;
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                assert_eq!(p.rows, rows, "hcat row mismatch");
                data.extend_from_slice(p.row(r));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Columns `[from, to)`.
    pub fn columns(&self, from: usize, to: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * (to - from));
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[from..to]);
        }
        Matrix {
            rows: self.rows,
            cols: to - from,
            data,
        }
    }
}

/// `c = a * b` (or `c += a * b` when `accumulate`), with arbitrary strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(
        k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len(),
        "gemm: a out of bounds"
    );
    assert!(
        k == 0 || (k - 1) * rsb + (n - 1) * csb < b.len(),
        "gemm: b out of bounds"
    );
    assert!(c.len() >= m * n, "gemm: c out of bounds");
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above bound every index the kernel touches, and
    // `c` does not alias `a` or `b` (distinct borrows).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fully connected layer `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Tanh MLP with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input of each layer; entry `i > 0` is the tanh output of layer `i - 1`.
    inputs: Vec<Matrix>,
    /// Input columns that are not identically zero across the batch, or
    /// `None` when all columns are used.
    active: Option<Vec<usize>>,
}

/// Per-layer gradients, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.data.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`. Weights are uniform in
    /// `+-1/sqrt(fan_in)`; the output layer is scaled by `out_scale`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
                let bound = 1.0 / (fan_in as f64).sqrt() * if i + 1 == n { out_scale } else { 1.0 };
                let w = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                let b = (0..fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Linear {
                    w: Matrix::from_vec(fan_in, fan_out, w),
                    b,
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|s| Linear {
                w: Matrix::zeros(s[0], s[1]),
                b: vec![0.0; s[1]],
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.rows
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.cols
    }

    /// Parameter tensors in a fixed order: `w_0, b_0, w_1, b_1, ...`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.w.data.as_slice(), l.b.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.w.data.as_mut_slice(), l.b.as_mut_slice()])
            .collect()
    }

    /// Shapes matching [`Mlp::tensors`].
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .flat_map(|l| [vec![l.w.rows, l.w.cols], vec![l.b.len()]])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Matrix) -> (Matrix, MlpCache) {
        assert_eq!(x.cols, self.input_dim(), "MLP input width");
        let n = x.rows;
        let active = sparse_columns(x);
        let mut inputs = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let out_dim = layer.w.cols;
            let mut out = Matrix::zeros(n, out_dim);
            for r in 0..n {
                out.row_mut(r).copy_from_slice(&layer.b);
            }
            match (i, &active) {
                (0, Some(cols)) => {
                    // Skip input columns that are zero for every row.
                    let packed = pack_columns(&cur, cols);
                    let w = pack_rows(&layer.w, cols);
                    gemm(
                        n,
                        cols.len(),
                        out_dim,
                        &packed.data,
                        cols.len(),
                        1,
                        &w.data,
                        out_dim,
                        1,
                        &mut out.data,
                        true,
                    );
                }
                _ => gemm(
                    n,
                    cur.cols,
                    out_dim,
                    &cur.data,
                    cur.cols,
                    1,
                    &layer.w.data,
                    out_dim,
                    1,
                    &mut out.data,
                    true,
                ),
            }
            if i < last {
                for v in &mut out.data {
                    *v = tanh(*v);
                }
            }
            inputs.push(std::mem::replace(&mut cur, out));
        }
        (cur, MlpCache { inputs, active })
    }

    /// Backpropagates `dy` (gradient of the loss w.r.t. the output).
    /// Accumulates parameter gradients into `grads` when given and returns
    /// the gradient w.r.t. the input when `want_dx`.
    pub fn backward(
        &self,
        cache: &MlpCache,
        dy: &Matrix,
        mut grads: Option<&mut MlpGrads>,
        want_dx: bool,
    ) -> Option<Matrix> {
        let n = dy.rows;
        let mut dz = dy.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let x = &cache.inputs[i];
            let (in_dim, out_dim) = (layer.w.rows, layer.w.cols);
            if let Some(g) = grads.as_deref_mut() {
                let (gw, gb) = &mut g.layers[i];
                match (i, &cache.active) {
                    (0, Some(cols)) => {
                        let packed = pack_columns(x, cols);
                        let mut gp = vec![0.0; cols.len() * out_dim];
                        gemm(
                            cols.len(),
                            n,
                            out_dim,
                            &packed.data,
                            1,
                            cols.len(),
                            &dz.data,
                            out_dim,
                            1,
                            &mut gp,
                            false,
                        );
                        for (j, &c) in cols.iter().enumerate() {
                            for (dst, src) in gw[c * out_dim..(c + 1) * out_dim]
                                .iter_mut()
                                .zip(&gp[j * out_dim..])
                            {
                                *dst += src;
                            }
                        }
                    }
                    _ => gemm(
                        in_dim, n, out_dim, &x.data, 1, in_dim, &dz.data, out_dim, 1, gw, true,
                    ),
                }
                for r in 0..n {
                    for (g, d) in gb.iter_mut().zip(dz.row(r)) {
                        *g += d;
                    }
                }
            }
            if i == 0 && !want_dx {
                return None;
            }
            let mut dx = Matrix::zeros(n, in_dim);
            gemm(
                n,
                out_dim,
                in_dim,
                &dz.data,
                out_dim,
                1,
                &layer.w.data,
                1,
                out_dim,
                &mut dx.data,
                false,
            );
            if i > 0 {
                // x is the tanh output of the previous layer.
                for (d, h) in dx.data.iter_mut().zip(&x.data) {
                    *d *= 1.0 - h * h;
                }
            }
            dz = dx;
        }
        Some(dz)
    }
}

/// `tanh` accurate to a few ulp, written so the hidden-layer loop vectorizes:
/// `-m / (2 + m)` with `m = expm1(-2|x|)` from a range-reduced Taylor series.
#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    // Adding 1.5 * 2^52 rounds to an integer that sits in the low mantissa bits.
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let y0 = -2.0 * x.abs();
    let y = if y0 < -40.0 { -40.0 } else { y0 };
    let kf = y * std::f64::consts::LOG2_E + SHIFT;
    let bits = kf.to_bits();
    let k = kf - SHIFT;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    // exp(r) = 1 + r * q
    let mut q = 1.0 / 479_001_600.0;
    q = q * r + 1.0 / 39_916_800.0;
    q = q * r + 1.0 / 3_628_800.0;
    q = q * r + 1.0 / 362_880.0;
    q = q * r + 1.0 / 40_320.0;
    q = q * r + 1.0 / 5_040.0;
    q = q * r + 1.0 / 720.0;
    q = q * r + 1.0 / 120.0;
    q = q * r + 1.0 / 24.0;
    q = q * r + 1.0 / 6.0;
    q = q * r + 0.5;
    q = q * r + 1.0;
    let scale = f64::from_bits(bits.wrapping_add(1023) << 52);
    let m = scale * (r * q) + (scale - 1.0);
    (-m / (2.0 + m)).copysign(x)
}

/// Indices of columns with at least one nonzero entry, when that saves work.
fn sparse_columns(x: &Matrix) -> Option<Vec<usize>> {
    let mut used = vec![false; x.cols];
    for r in 0..x.rows {
        for (u, v) in used.iter_mut().zip(x.row(r)) {
            *u |= *v != 0.0;
        }
    }
    let cols: Vec<usize> = (0..x.cols).filter(|&c| used[c]).collect();
    if cols.len() * 4 <= x.cols * 3 {
        Some(cols)
    } else {
        None
    }
}

fn pack_columns(x: &Matrix, cols: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(x.rows * cols.len());
    for r in 0..x.rows {
        let row = x.row(r);
        data.extend(cols.iter().map(|&c| row[c]));
    }
    Matrix {
        rows: x.rows,
        cols: cols.len(),
        data,
    }
}

fn pack_rows(w: &Matrix, rows: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(rows.len() * w.cols);
    for &r in rows {
        data.extend_from_slice(w.row(r));
    }
    Matrix {
        rows: rows.len(),
        cols: w.cols,
        data,
    }
}
