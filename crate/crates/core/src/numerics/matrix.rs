//! Dense row-major `f64` matrices and the forward kernels shared by the tape.

use serde::{Deserialize, Serialize};

use crate::error::{HecvlError, Result};

/// Rows whose Euclidean norm falls below this are treated as degenerate.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(HecvlError::Shape {
                op: "from_vec",
                left_rows: rows,
                left_cols: cols,
                right_rows: data.len(),
                right_cols: 1,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(HecvlError::Shape {
                    op: "from_rows",
                    left_rows: rows.len(),
                    left_cols: cols,
                    right_rows: 1,
                    right_cols: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Adds `other * alpha` in place.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) -> Result<()> {
        check_same_shape("axpy", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }
}

pub(crate) fn check_same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(HecvlError::Shape {
            op,
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    Ok(())
}

/// Matrix product `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(HecvlError::Shape {
            op: "matmul",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * b.cols..(k + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Ok(out)
}

/// Product with the second operand transposed: `a · bᵀ`.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(HecvlError::Shape {
            op: "matmul_nt",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        for j in 0..b.rows {
            out.data[i * b.rows + j] = dot(ar, b.row(j));
        }
    }
    Ok(out)
}

/// Product with the first operand transposed: `aᵀ · b`.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(HecvlError::Shape {
            op: "matmul_tn",
            left_rows: a.rows,
            left_cols: a.cols,
            right_rows: b.rows,
            right_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.cols, b.cols);
    for k in 0..a.rows {
        let b_row = b.row(k);
        for i in 0..a.cols {
            let aki = a.data[k * a.cols + i];
            if aki == 0.0 {
                continue;
            }
            let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aki * bkj;
            }
        }
    }
    Ok(out)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales every row to unit Euclidean norm.
pub fn l2_normalize_rows(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for r in 0..m.rows {
        let n = norm(m.row(r));
        if !(n > NORM_GUARD) {
            return Err(HecvlError::DegenerateEmbedding { row: r });
        }
        for v in out.row_mut(r) {
            *v /= n;
        }
    }
    Ok(out)
}

/// Row-wise softmax of `m / tau`, computed with per-row max subtraction.
pub fn softmax_rows(m: &Matrix, tau: f64) -> Result<Matrix> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(HecvlError::Config(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let mut out = Matrix::zeros(m.rows, m.cols);
    for r in 0..m.rows {
        let row = m.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let o = out.row_mut(r);
        let mut total = 0.0;
        for (dst, &v) in o.iter_mut().zip(row) {
            *dst = ((v - max) / tau).exp();
            total += *dst;
        }
        for dst in o.iter_mut() {
            *dst /= total;
        }
    }
    Ok(out)
}

/// Arithmetic mean over rows, returned as a `1 × cols` matrix.
pub fn mean_pool(rows: &Matrix) -> Result<Matrix> {
    if rows.rows == 0 {
        return Err(HecvlError::EmptyAggregation);
    }
    let mut out = Matrix::zeros(1, rows.cols);
    for r in 0..rows.rows {
        for (o, v) in out.data.iter_mut().zip(rows.row(r)) {
            *o += v;
        }
    }
    let n = rows.rows as f64;
    for o in &mut out.data {
        *o /= n;
    }
    Ok(out)
}

/// Mean-pools consecutive row groups: group `g` covers `sizes[g]` rows.
pub fn mean_pool_groups(rows: &Matrix, sizes: &[usize]) -> Result<Matrix> {
    let total: usize = sizes.iter().sum();
    if total != rows.rows {
        return Err(HecvlError::Shape {
            op: "mean_pool_groups",
            left_rows: rows.rows,
            left_cols: rows.cols,
            right_rows: total,
            right_cols: sizes.len(),
        });
    }
    let mut out = Matrix::zeros(sizes.len(), rows.cols);
    let mut start = 0;
    for (g, &size) in sizes.iter().enumerate() {
        if size == 0 {
            return Err(HecvlError::EmptyAggregation);
        }
        let o = &mut out.data[g * rows.cols..(g + 1) * rows.cols];
        for r in start..start + size {
            for (dst, v) in o.iter_mut().zip(rows.row(r)) {
                *dst += v;
            }
        }
        let n = size as f64;
        for dst in o.iter_mut() {
            *dst /= n;
        }
        start += size;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_product_is_noop() {
        let m = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn matmul_row_sums() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0], [1.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(3, 4, &mut rng);
        let b = random(4, 2, &mut rng);
        let got = matmul(&a, &b).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..4 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert!((got.get(i, j) - s).abs() < 1e-14);
            }
        }
        let nt = matmul_nt(&a, &b.transpose()).unwrap();
        let tn = matmul_tn(&a.transpose(), &b).unwrap();
        for (x, y) in got.data().iter().zip(nt.data()) {
            assert!((x - y).abs() < 1e-14);
        }
        for (x, y) in got.data().iter().zip(tn.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3 vs 2x3"), "{msg}");
    }

    #[test]
    fn normalize_examples() {
        let m = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let n = l2_normalize_rows(&m).unwrap();
        assert!((n.get(0, 0) - 0.6).abs() < 1e-15 && (n.get(0, 1) - 0.8).abs() < 1e-15);

        let unit = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(l2_normalize_rows(&unit).unwrap(), unit);

        let ones = Matrix::from_rows(&[[1.0, 1.0, 1.0]]).unwrap();
        let expected = 1.0 / 3f64.sqrt();
        for v in l2_normalize_rows(&ones).unwrap().data() {
            assert!((v - expected).abs() < 1e-15);
            assert!((v - 0.57735).abs() < 1e-5);
        }
    }

    #[test]
    fn normalize_rejects_zero_row() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        match l2_normalize_rows(&m) {
            Err(HecvlError::DegenerateEmbedding { row }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn softmax_examples() {
        let uniform = Matrix::filled(1, 5, 0.3);
        for v in softmax_rows(&uniform, 0.5).unwrap().data() {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let row = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let p = softmax_rows(&row, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p.get(0, 0) - e / (e + 1.0)).abs() < 1e-15);
        assert!((p.get(0, 0) - 0.73106).abs() < 1e-5);
        assert!((p.get(0, 1) - 0.26894).abs() < 1e-5);
        let sharp = softmax_rows(&row, 0.1).unwrap();
        assert!(sharp.get(0, 0) >= 0.9999);
        assert!(matches!(softmax_rows(&row, 0.0), Err(HecvlError::Config(_))));
        assert!(matches!(softmax_rows(&row, -1.0), Err(HecvlError::Config(_))));
    }

    #[test]
    fn mean_pool_examples() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(mean_pool(&m).unwrap().data(), &[0.5, 0.5]);
        let single = Matrix::from_rows(&[[0.25, -4.0]]).unwrap();
        assert_eq!(mean_pool(&single).unwrap(), single);
        assert!(matches!(
            mean_pool(&Matrix::zeros(0, 3)),
            Err(HecvlError::EmptyAggregation)
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random(5, 4, &mut rng);
        let pooled = mean_pool(&r).unwrap();
        for c in 0..4 {
            let mut acc = 0.0;
            for i in 0..5 {
                acc += r.get(i, c);
            }
            assert!((pooled.get(0, c) - acc / 5.0).abs() < 1e-15);
        }
    }

    #[test]
    fn grouped_mean_pool() {
        let m = Matrix::from_rows(&[[1.0], [3.0], [10.0]]).unwrap();
        let g = mean_pool_groups(&m, &[2, 1]).unwrap();
        assert_eq!(g.data(), &[2.0, 10.0]);
        assert!(mean_pool_groups(&m, &[3, 0]).is_err());
        assert!(mean_pool_groups(&m, &[1, 1]).is_err());
    }
}
