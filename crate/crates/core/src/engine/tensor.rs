use super::Real;

use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawTensor<F>",
    bound(deserialize = "F: Deserialize<'de> + Clone")
)]
pub struct Tensor<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTensor<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F> TryFrom<RawTensor<F>> for Tensor<F> {
    type Error = String;

    fn try_from(raw: RawTensor<F>) -> Result<Self, String> {
        if raw.rows.checked_mul(raw.cols) != Some(raw.data.len()) {
            return Err(format!(
                "{}x{} tensor with {} values",
                raw.rows,
                raw.cols,
                raw.data.len()
            ));
        }
        Ok(Tensor {
            rows: raw.rows,
            cols: raw.cols,
            data: raw.data,
        })
    }
}

impl<F: Real> Tensor<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn full(rows: usize, cols: usize, value: F) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "tensor data length does not match shape [{rows}, {cols}]"
        );
        Tensor { rows, cols, data }
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Self {
        Tensor::from_vec(rows, cols, data.iter().map(|&x| F::of(x)).collect())
    }

    pub fn scalar(value: F) -> Self {
        Tensor {
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

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn item(&self) -> F {
        assert_eq!(self.data.len(), 1, "item() on a non-scalar tensor");
        self.data[0]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.f64()).collect()
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| G::of(x.f64())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn add_assign(&mut self, other: &Tensor<F>) {
        assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor<F>) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (*a - *b).abs().f64())
            .fold(0.0, f64::max)
    }

    /// `self (op) rhs`, optionally transposing either operand, written into a new tensor.
    pub fn matmul(&self, trans_self: bool, rhs: &Tensor<F>, trans_rhs: bool) -> Tensor<F> {
        let (m, k) = if trans_self {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        };
        let (k2, n) = if trans_rhs {
            (rhs.cols, rhs.rows)
        } else {
            (rhs.rows, rhs.cols)
        };
        assert_eq!(k, k2, "matmul inner dimensions differ");
        let mut out = Tensor::zeros(m, n);
        matmul_into(self, trans_self, rhs, trans_rhs, &mut out, false);
        out
    }
}

/// `out (+)= a (op) b`.
pub(crate) fn matmul_into<F: Real>(
    a: &Tensor<F>,
    ta: bool,
    b: &Tensor<F>,
    tb: bool,
    out: &mut Tensor<F>,
    accumulate: bool,
) {
    let (m, k) = if ta {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let n = if tb { b.rows } else { b.cols };
    let sa = if ta {
        (1, a.cols as isize)
    } else {
        (a.cols as isize, 1)
    };
    let sb = if tb {
        (1, b.cols as isize)
    } else {
        (b.cols as isize, 1)
    };
    debug_assert_eq!(out.shape(), [m, n]);
    let beta = if accumulate { F::one() } else { F::zero() };
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            out.data.iter_mut().for_each(|x| *x = F::zero());
        }
        return;
    }
    F::gemm(
        m,
        k,
        n,
        &a.data,
        sa,
        &b.data,
        sb,
        beta,
        &mut out.data,
        (n as isize, 1),
    );
}
