//! A small reverse-mode differentiation engine over dense row-major matrices.
//!
//! Forward operations record themselves on a [`Graph`] tape; [`Graph::backward`]
//! walks the tape in reverse. Every kernel is deterministic: reductions run in a
//! fixed order and matrix products go through `matrixmultiply`'s single-threaded
//! kernels.

mod adam;
mod attention;
mod gradcheck;
mod graph;
mod tensor;

pub use adam::{Adam, AdamConfig, StepOutcome};
pub use attention::{attention, masked_attention, KeySets};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use graph::{Csr, Gradients, Graph, NeGapGame, Var};
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of the engine (`f32` or `f64`).
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    const BITS: u32;

    /// `c = a * b + beta * c` with explicit strides (row-major when `cs == 1`).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        sa: (isize, isize),
        b: &[Self],
        sb: (isize, isize),
        beta: Self,
        c: &mut [Self],
        sc: (isize, isize),
    );

    /// `tanh` used by the GELU kernels; `f32` trades the last few ulps near zero for speed.
    fn tanh_fast(self) -> Self {
        self.tanh()
    }

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }

    fn f64(self) -> f64 {
        self.to_f64().expect("representable")
    }
}

fn check_gemm_bounds<T>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    sa: (isize, isize),
    b: &[T],
    sb: (isize, isize),
    c: &[T],
    sc: (isize, isize),
) {
    let extent = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
        }
    };
    assert!(sa.0 >= 0 && sa.1 >= 0 && sb.0 >= 0 && sb.1 >= 0 && sc.0 >= 0 && sc.1 >= 0);
    assert!(extent(m, k, sa) <= a.len(), "gemm: lhs out of bounds");
    assert!(extent(k, n, sb) <= b.len(), "gemm: rhs out of bounds");
    assert!(extent(m, n, sc) <= c.len(), "gemm: output out of bounds");
}

impl Real for f32 {
    const BITS: u32 = 32;

    fn tanh_fast(self) -> f32 {
        let e = (-2.0 * self.abs()).exp();
        ((1.0 - e) / (1.0 + e)).copysign(self)
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        sa: (isize, isize),
        b: &[f32],
        sb: (isize, isize),
        beta: f32,
        c: &mut [f32],
        sc: (isize, isize),
    ) {
        check_gemm_bounds(m, k, n, a, sa, b, sb, c, sc);
        // SAFETY: bounds checked above for every addressed element.
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                sa.0,
                sa.1,
                b.as_ptr(),
                sb.0,
                sb.1,
                beta,
                c.as_mut_ptr(),
                sc.0,
                sc.1,
            );
        }
    }
}

impl Real for f64 {
    const BITS: u32 = 64;

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        sa: (isize, isize),
        b: &[f64],
        sb: (isize, isize),
        beta: f64,
        c: &mut [f64],
        sc: (isize, isize),
    ) {
        check_gemm_bounds(m, k, n, a, sa, b, sb, c, sc);
        // SAFETY: bounds checked above for every addressed element.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                sa.0,
                sa.1,
                b.as_ptr(),
                sb.0,
                sb.1,
                beta,
                c.as_mut_ptr(),
                sc.0,
                sc.1,
            );
        }
    }
}

/// Floating-point width selector used by configs and the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Precision {
    F32,
    F64,
}

impl TryFrom<u32> for Precision {
    type Error = String;

    fn try_from(bits: u32) -> Result<Self, String> {
        match bits {
            32 => Ok(Precision::F32),
            64 => Ok(Precision::F64),
            other => Err(format!("precision must be 32 or 64, got {other}")),
        }
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.bits()
    }
}

impl Precision {
    pub fn bits(self) -> u32 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}
