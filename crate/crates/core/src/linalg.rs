//! Dense complex matrix helpers on top of nalgebra storage.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// `out = a * b` through the packed complex GEMM kernel.
///
/// nalgebra only dispatches real matrices to an optimized kernel; the
/// solver's per-iteration products are complex, so they go through here.
pub fn matmul_into(a: &CMatrix, b: &CMatrix, out: &mut CMatrix) {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!(out.shape(), (m, n), "output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        out.fill(Complex64::new(0.0, 0.0));
        return;
    }
    // Complex64 is repr(C) { re, im }, identical to [f64; 2].
    let a_ptr = a.as_slice().as_ptr() as *const [f64; 2];
    let b_ptr = b.as_slice().as_ptr() as *const [f64; 2];
    let c_ptr = out.as_mut_slice().as_mut_ptr() as *mut [f64; 2];
    // SAFETY: all three buffers are contiguous column-major storage whose
    // extents match (m, k), (k, n), (m, n) as asserted above, and `out` does
    // not alias the inputs because it is borrowed mutably.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a_ptr,
            1,
            m as isize,
            b_ptr,
            1,
            k as isize,
            [0.0, 0.0],
            c_ptr,
            1,
            m as isize,
        );
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.nrows(), b.ncols());
    matmul_into(a, b, &mut out);
    out
}

pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}
