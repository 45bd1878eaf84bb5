//! Thin safe wrappers over the system LAPACK/BLAS (Fortran ABI).
//!
//! Everything goes through explicit column-major buffers, so the wrappers are
//! agnostic to ndarray's memory order.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

type LapackComplex = lapack_sys::__BindgenComplex<f64>;

fn to_col_major_c(a: &Array2<Complex64>) -> Vec<Complex64> {
    let (m, n) = a.dim();
    let mut buf = vec![Complex64::default(); m * n];
    for j in 0..n {
        for i in 0..m {
            buf[i + j * m] = a[[i, j]];
        }
    }
    buf
}

fn from_col_major_c(buf: &[Complex64], m: usize, n: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((m, n), |(i, j)| buf[i + j * m])
}

fn to_col_major_r(a: &Array2<f64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let mut buf = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            buf[i + j * m] = a[[i, j]];
        }
    }
    buf
}

/// Full symmetric eigendecomposition (dsyevd). Eigenvalues ascending;
/// `vectors[:, j]` is the eigenvector of `values[j]`.
pub fn eigh_real(a: &Array2<f64>, want_vectors: bool) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok((vec![], want_vectors.then(|| Array2::zeros((0, 0)))));
    }
    let mut buf = to_col_major_r(a);
    let mut w = vec![0.0f64; n];
    let jobz = if want_vectors { b'V' } else { b'N' } as i8;
    let uplo = b'L' as i8;
    let ni = n as i32;
    let mut info = 0i32;

    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    let m1 = -1i32;
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(),
            work_query.as_mut_ptr(), &m1, iwork_query.as_mut_ptr(), &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevd workspace query failed: info={info}")));
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::dsyevd_(
            &jobz, &uplo, &ni, buf.as_mut_ptr(), &ni, w.as_mut_ptr(),
            work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevd failed: info={info}")));
    }
    let vecs = want_vectors.then(|| Array2::from_shape_fn((n, n), |(i, j)| buf[i + j * n]));
    Ok((w, vecs))
}

/// Full Hermitian eigendecomposition (zheevd). Same conventions as
/// [`eigh_real`].
pub fn eigh_complex(
    a: &Array2<Complex64>,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<Complex64>>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok((vec![], want_vectors.then(|| Array2::zeros((0, 0)))));
    }
    let mut buf = to_col_major_c(a);
    let mut w = vec![0.0f64; n];
    let jobz = if want_vectors { b'V' } else { b'N' } as i8;
    let uplo = b'L' as i8;
    let ni = n as i32;
    let mut info = 0i32;

    let mut work_query = [Complex64::default()];
    let mut rwork_query = [0.0f64];
    let mut iwork_query = [0i32];
    let m1 = -1i32;
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &ni,
            buf.as_mut_ptr() as *mut LapackComplex, &ni, w.as_mut_ptr(),
            work_query.as_mut_ptr() as *mut LapackComplex, &m1,
            rwork_query.as_mut_ptr(), &m1, iwork_query.as_mut_ptr(), &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zheevd workspace query failed: info={info}")));
    }
    let lwork = work_query[0].re as i32;
    let lrwork = rwork_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![Complex64::default(); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz, &uplo, &ni,
            buf.as_mut_ptr() as *mut LapackComplex, &ni, w.as_mut_ptr(),
            work.as_mut_ptr() as *mut LapackComplex, &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zheevd failed: info={info}")));
    }
    let vecs = want_vectors.then(|| from_col_major_c(&buf, n, n));
    Ok((w, vecs))
}

/// Inverse of a general complex square matrix (zgetrf + zgetri).
pub fn invert_complex(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let mut buf = to_col_major_c(a);
    let ni = n as i32;
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        lapack_sys::zgetrf_(
            &ni, &ni, buf.as_mut_ptr() as *mut LapackComplex, &ni,
            ipiv.as_mut_ptr(), &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zgetrf failed: info={info}")));
    }
    let mut work_query = [Complex64::default()];
    let m1 = -1i32;
    unsafe {
        lapack_sys::zgetri_(
            &ni, buf.as_mut_ptr() as *mut LapackComplex, &ni, ipiv.as_mut_ptr(),
            work_query.as_mut_ptr() as *mut LapackComplex, &m1, &mut info,
        );
    }
    let lwork = work_query[0].re as i32;
    let mut work = vec![Complex64::default(); lwork as usize];
    unsafe {
        lapack_sys::zgetri_(
            &ni, buf.as_mut_ptr() as *mut LapackComplex, &ni, ipiv.as_mut_ptr(),
            work.as_mut_ptr() as *mut LapackComplex, &lwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zgetri failed: info={info}")));
    }
    Ok(from_col_major_c(&buf, n, n))
}

/// Complex matrix product via zgemm; `op` characters follow BLAS
/// ('N', 'C' for conjugate transpose).
pub fn gemm_complex(
    op_a: u8,
    op_b: u8,
    a: &Array2<Complex64>,
    b: &Array2<Complex64>,
) -> Array2<Complex64> {
    let (am, an) = a.dim();
    let (bm, bn) = b.dim();
    let (m, k) = if op_a == b'N' { (am, an) } else { (an, am) };
    let (kb, n) = if op_b == b'N' { (bm, bn) } else { (bn, bm) };
    assert_eq!(k, kb, "gemm inner dimension mismatch");
    if m == 0 || n == 0 || k == 0 {
        return Array2::zeros((m, n));
    }
    let abuf = to_col_major_c(a);
    let bbuf = to_col_major_c(b);
    let cbuf = vec![Complex64::default(); m * n];
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let (mi, ni, ki) = (m as i32, n as i32, k as i32);
    let lda = am.max(1) as i32;
    let ldb = bm.max(1) as i32;
    let ldc = m.max(1) as i32;
    unsafe {
        blas_sys::zgemm_(
            &(op_a as i8), &(op_b as i8), &mi, &ni, &ki,
            &one as *const Complex64 as *const blas_sys::c_double_complex,
            abuf.as_ptr() as *const blas_sys::c_double_complex, &lda,
            bbuf.as_ptr() as *const blas_sys::c_double_complex, &ldb,
            &zero as *const Complex64 as *const blas_sys::c_double_complex,
            cbuf.as_ptr() as *mut blas_sys::c_double_complex, &ldc,
        );
    }
    from_col_major_c(&cbuf, m, n)
}

/// The `top` largest eigenvalues (descending) of a real symmetric matrix and,
/// optionally, their eigenvectors (`vectors[:, j]` pairs with `values[j]`),
/// via the range-selecting driver dsyevr. Much cheaper than a full
/// decomposition when only edge eigenpairs are needed.
pub fn eigh_top_real(
    a: &Array2<f64>,
    top: usize,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if top == 0 || top > n {
        return Err(Error::OutOfRange { index: top, dim: n });
    }
    let mut buf = to_col_major_r(a);
    let jobz = if want_vectors { b'V' } else { b'N' } as i8;
    let range = b'I' as i8;
    let uplo = b'L' as i8;
    let ni = n as i32;
    let il = (n - top + 1) as i32;
    let iu = n as i32;
    let (vl, vu, abstol) = (0.0f64, 0.0f64, 0.0f64);
    let mut found = 0i32;
    let mut w = vec![0.0f64; n];
    let ldz = n.max(1) as i32;
    let mut z = vec![0.0f64; if want_vectors { n * top } else { 1 }];
    let mut isuppz = vec![0i32; 2 * top.max(1)];
    let mut info = 0i32;
    let mut work_query = [0.0f64];
    let mut iwork_query = [0i32];
    let m1 = -1i32;
    unsafe {
        lapack_sys::dsyevr_(
            &jobz, &range, &uplo, &ni, buf.as_mut_ptr(), &ni, &vl, &vu, &il, &iu,
            &abstol, &mut found, w.as_mut_ptr(), z.as_mut_ptr(), &ldz,
            isuppz.as_mut_ptr(), work_query.as_mut_ptr(), &m1,
            iwork_query.as_mut_ptr(), &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("dsyevr workspace query failed: info={info}")));
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::dsyevr_(
            &jobz, &range, &uplo, &ni, buf.as_mut_ptr(), &ni, &vl, &vu, &il, &iu,
            &abstol, &mut found, w.as_mut_ptr(), z.as_mut_ptr(), &ldz,
            isuppz.as_mut_ptr(), work.as_mut_ptr(), &lwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 || found as usize != top {
        return Err(Error::Linalg(format!("dsyevr failed: info={info}, found={found}")));
    }
    let values: Vec<f64> = (0..top).map(|j| w[top - 1 - j]).collect();
    let vecs = want_vectors
        .then(|| Array2::from_shape_fn((n, top), |(i, j)| z[i + (top - 1 - j) * n]));
    Ok((values, vecs))
}

/// Complex Hermitian counterpart of [`eigh_top_real`] (zheevr).
pub fn eigh_top_complex(
    a: &Array2<Complex64>,
    top: usize,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<Array2<Complex64>>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if top == 0 || top > n {
        return Err(Error::OutOfRange { index: top, dim: n });
    }
    let mut buf = to_col_major_c(a);
    let jobz = if want_vectors { b'V' } else { b'N' } as i8;
    let range = b'I' as i8;
    let uplo = b'L' as i8;
    let ni = n as i32;
    let il = (n - top + 1) as i32;
    let iu = n as i32;
    let (vl, vu, abstol) = (0.0f64, 0.0f64, 0.0f64);
    let mut found = 0i32;
    let mut w = vec![0.0f64; n];
    let ldz = n.max(1) as i32;
    let mut z = vec![Complex64::default(); if want_vectors { n * top } else { 1 }];
    let mut isuppz = vec![0i32; 2 * top.max(1)];
    let mut info = 0i32;
    let mut work_query = [Complex64::default()];
    let mut rwork_query = [0.0f64];
    let mut iwork_query = [0i32];
    let m1 = -1i32;
    unsafe {
        lapack_sys::zheevr_(
            &jobz, &range, &uplo, &ni,
            buf.as_mut_ptr() as *mut LapackComplex, &ni, &vl, &vu, &il, &iu,
            &abstol, &mut found, w.as_mut_ptr(),
            z.as_mut_ptr() as *mut LapackComplex, &ldz, isuppz.as_mut_ptr(),
            work_query.as_mut_ptr() as *mut LapackComplex, &m1,
            rwork_query.as_mut_ptr(), &m1, iwork_query.as_mut_ptr(), &m1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zheevr workspace query failed: info={info}")));
    }
    let lwork = work_query[0].re as i32;
    let lrwork = rwork_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![Complex64::default(); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::zheevr_(
            &jobz, &range, &uplo, &ni,
            buf.as_mut_ptr() as *mut LapackComplex, &ni, &vl, &vu, &il, &iu,
            &abstol, &mut found, w.as_mut_ptr(),
            z.as_mut_ptr() as *mut LapackComplex, &ldz, isuppz.as_mut_ptr(),
            work.as_mut_ptr() as *mut LapackComplex, &lwork,
            rwork.as_mut_ptr(), &lrwork, iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 || found as usize != top {
        return Err(Error::Linalg(format!("zheevr failed: info={info}, found={found}")));
    }
    let values: Vec<f64> = (0..top).map(|j| w[top - 1 - j]).collect();
    let vecs = want_vectors
        .then(|| Array2::from_shape_fn((n, top), |(i, j)| z[i + (top - 1 - j) * n]));
    Ok((values, vecs))
}

/// The k x k upper-triangular R factor of the QR decomposition of an
/// m x k matrix with m >= k (zgeqrf).
pub fn qr_r_complex(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let (m, k) = a.dim();
    if m < k {
        return Err(Error::InvalidArgument("qr_r requires m >= k".into()));
    }
    if k == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let mut buf = to_col_major_c(a);
    let (mi, ki) = (m as i32, k as i32);
    let mut tau = vec![Complex64::default(); k];
    let mut info = 0i32;
    let mut work_query = [Complex64::default()];
    let m1 = -1i32;
    unsafe {
        lapack_sys::zgeqrf_(
            &mi, &ki, buf.as_mut_ptr() as *mut LapackComplex, &mi,
            tau.as_mut_ptr() as *mut LapackComplex,
            work_query.as_mut_ptr() as *mut LapackComplex, &m1, &mut info,
        );
    }
    let lwork = work_query[0].re as i32;
    let mut work = vec![Complex64::default(); lwork as usize];
    unsafe {
        lapack_sys::zgeqrf_(
            &mi, &ki, buf.as_mut_ptr() as *mut LapackComplex, &mi,
            tau.as_mut_ptr() as *mut LapackComplex,
            work.as_mut_ptr() as *mut LapackComplex, &lwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Linalg(format!("zgeqrf failed: info={info}")));
    }
    let mut r = Array2::zeros((k, k));
    for j in 0..k {
        for i in 0..=j {
            r[[i, j]] = buf[i + j * m];
        }
    }
    Ok(r)
}
