//! Thin safe wrappers over the system BLAS/LAPACK for the dense symmetric
//! kernels used by the removal engine and its oracles.
//!
//! All matrices handled here are square symmetric in standard (row-major)
//! layout, so they can be passed to column-major LAPACK unchanged. The
//! Cholesky solve performs one step of iterative refinement; callers that
//! need a certified residual check it against the original matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

fn as_slice<'a>(a: &'a ArrayView2<'_, f64>) -> Result<&'a [f64]> {
    a.to_slice()
        .ok_or_else(|| Error::Shape("matrix is not in contiguous standard layout".into()))
}

/// `X^T X` for a row-major `n x d` matrix, via `dsyrk` on the upper triangle.
pub fn gram(x: &ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (n, d) = x.dim();
    let xs = as_slice(x)?;
    let mut k = Array2::<f64>::zeros((d, d));
    unsafe {
        cblas_sys::cblas_dsyrk(
            cblas_sys::CBLAS_LAYOUT::CblasRowMajor,
            cblas_sys::CBLAS_UPLO::CblasUpper,
            cblas_sys::CBLAS_TRANSPOSE::CblasTrans,
            d as i32,
            n as i32,
            1.0,
            xs.as_ptr(),
            d as i32,
            0.0,
            k.as_slice_mut().expect("freshly allocated").as_mut_ptr(),
            d as i32,
        );
    }
    mirror_upper_to_lower(&mut k);
    Ok(k)
}

fn mirror_upper_to_lower(a: &mut Array2<f64>) {
    let d = a.nrows();
    for i in 1..d {
        for j in 0..i {
            a[[i, j]] = a[[j, i]];
        }
    }
}

/// All eigenvalues of a symmetric matrix, ascending (`dsyev`, values only).
pub fn sym_eigenvalues(a: &ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::Shape(format!(
            "expected square matrix, got {}x{}",
            d,
            a.ncols()
        )));
    }
    if d == 0 {
        return Ok(Vec::new());
    }
    let mut buf: Vec<f64> = a.iter().cloned().collect();
    let mut w = vec![0.0f64; d];
    let nn = d as i32;
    let mut info = 0i32;
    unsafe {
        let mut query = [0.0f64];
        let m1 = -1i32;
        lapack_sys::dsyev_(
            &(b'N' as std::ffi::c_char),
            &(b'L' as std::ffi::c_char),
            &nn,
            buf.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            query.as_mut_ptr(),
            &m1,
            &mut info,
        );
        let lwork = query[0] as i32;
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        lapack_sys::dsyev_(
            &(b'N' as std::ffi::c_char),
            &(b'L' as std::ffi::c_char),
            &nn,
            buf.as_mut_ptr(),
            &nn,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numeric(format!("dsyev failed with info={info}")));
    }
    Ok(w)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_eig_max(a: &ArrayView2<'_, f64>) -> Result<f64> {
    let vals = sym_eigenvalues(a)?;
    vals.last()
        .copied()
        .ok_or_else(|| Error::Shape("empty matrix has no eigenvalues".into()))
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Holds both the factor and the original matrix so solves can run one
/// iterative-refinement pass against the unfactored operator.
pub struct CholeskyFactor {
    factor: Vec<f64>,
    original: Array2<f64>,
    dim: usize,
}

impl CholeskyFactor {
    pub fn new(a: &ArrayView2<'_, f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || d == 0 {
            return Err(Error::Shape(format!(
                "expected nonempty square matrix, got {}x{}",
                d,
                a.ncols()
            )));
        }
        let mut factor: Vec<f64> = a.iter().cloned().collect();
        let nn = d as i32;
        let mut info = 0i32;
        unsafe {
            lapack_sys::dpotrf_(
                &(b'L' as std::ffi::c_char),
                &nn,
                factor.as_mut_ptr(),
                &nn,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Numeric(format!(
                "Cholesky factorization failed (dpotrf info={info}); matrix not positive definite"
            )));
        }
        Ok(Self {
            factor,
            original: a.to_owned(),
            dim: d,
        })
    }

    fn solve_raw(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let nn = self.dim as i32;
        let one = 1i32;
        let mut x = rhs.to_vec();
        let mut info = 0i32;
        unsafe {
            lapack_sys::dpotrs_(
                &(b'L' as std::ffi::c_char),
                &nn,
                &one,
                self.factor.as_ptr(),
                &nn,
                x.as_mut_ptr(),
                &nn,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Numeric(format!("dpotrs failed with info={info}")));
        }
        Ok(x)
    }

    /// Solve `A s = rhs` with one iterative-refinement step.
    pub fn solve(&self, rhs: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::Shape(format!(
                "rhs length {} does not match matrix dimension {}",
                rhs.len(),
                self.dim
            )));
        }
        let rhs_v = rhs.to_owned();
        let mut s = Array1::from_vec(self.solve_raw(rhs_v.as_slice().expect("owned"))?);
        let resid = &rhs_v - &self.original.dot(&s);
        let ds = self.solve_raw(resid.as_slice().expect("owned"))?;
        s += &Array1::from_vec(ds);
        Ok(s)
    }

    /// Relative residual `||A s - rhs|| / ||rhs||` (0 when `rhs = 0`).
    pub fn relative_residual(&self, s: &ArrayView1<'_, f64>, rhs: &ArrayView1<'_, f64>) -> f64 {
        let rhs_norm = rhs.dot(rhs).sqrt();
        if rhs_norm == 0.0 {
            return 0.0;
        }
        let r = &self.original.dot(&s.to_owned()) - &rhs.to_owned();
        r.dot(&r).sqrt() / rhs_norm
    }
}

/// Solve `A x = b` for a general square matrix via LU (`dgesv`).
///
/// Used only by oracle code so reference solutions do not share the
/// Cholesky route the removal engine uses. The matrix is transposed into
/// column-major order internally, so non-symmetric inputs are handled.
pub fn solve_lu(a: &ArrayView2<'_, f64>, b: &ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let d = a.nrows();
    if a.ncols() != d || b.len() != d || d == 0 {
        return Err(Error::Shape(format!(
            "solve_lu expects square system, got {}x{} with rhs {}",
            d,
            a.ncols(),
            b.len()
        )));
    }
    // column-major copy
    let mut af = vec![0.0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            af[j * d + i] = a[[i, j]];
        }
    }
    let mut x: Vec<f64> = b.iter().cloned().collect();
    let nn = d as i32;
    let one = 1i32;
    let mut ipiv = vec![0i32; d];
    let mut info = 0i32;
    unsafe {
        lapack_sys::dgesv_(
            &nn,
            &one,
            af.as_mut_ptr(),
            &nn,
            ipiv.as_mut_ptr(),
            x.as_mut_ptr(),
            &nn,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numeric(format!("dgesv failed with info={info}")));
    }
    Ok(Array1::from_vec(x))
}

/// Largest singular value of a rectangular matrix (`dgesvd`, values only).
///
/// Independent route from [`sym_eig_max`]; used as the oracle for spectral
/// norms computed from Gram matrices.
pub fn singular_value_max(x: &ArrayView2<'_, f64>) -> Result<f64> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(Error::Shape("empty matrix has no singular values".into()));
    }
    // Row-major n x d data read as column-major is the d x n transpose,
    // which has the same singular values.
    let xs = x.to_owned();
    let mut a: Vec<f64> = xs.iter().cloned().collect();
    let (m_eff, n_eff) = (d as i32, n as i32);
    let mut sv = vec![0.0f64; d.min(n)];
    let mut info = 0i32;
    let ldu = 1i32;
    let ldvt = 1i32;
    unsafe {
        let mut query = [0.0f64];
        let m1 = -1i32;
        lapack_sys::dgesvd_(
            &(b'N' as std::ffi::c_char),
            &(b'N' as std::ffi::c_char),
            &m_eff,
            &n_eff,
            a.as_mut_ptr(),
            &m_eff,
            sv.as_mut_ptr(),
            std::ptr::null_mut(),
            &ldu,
            std::ptr::null_mut(),
            &ldvt,
            query.as_mut_ptr(),
            &m1,
            &mut info,
        );
        let lwork = query[0] as i32;
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        lapack_sys::dgesvd_(
            &(b'N' as std::ffi::c_char),
            &(b'N' as std::ffi::c_char),
            &m_eff,
            &n_eff,
            a.as_mut_ptr(),
            &m_eff,
            sv.as_mut_ptr(),
            std::ptr::null_mut(),
            &ldu,
            std::ptr::null_mut(),
            &ldvt,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numeric(format!("dgesvd failed with info={info}")));
    }
    Ok(sv[0])
}
