//! Dense complex linear-algebra helpers shared by the decomposition and
//! adaptive-update modules: truncated pseudoinverses and Moore-Penrose
//! diagnostics.

use ndarray::{Array1, Array2};
use ndarray_linalg::svddc::{JobSvd, SVDDC};
use ndarray_linalg::{Eigh, Norm, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Conjugate transpose.
pub fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Symmetrize in the Hermitian sense: `(a + a^H) / 2`.
pub fn hermitize(a: &mut Array2<Complex64>) {
    let ah = adjoint(a);
    a.zip_mut_with(&ah, |x, &y| *x = (*x + y) * 0.5);
}

/// Largest deviation from Hermitian symmetry, relative to the Frobenius norm.
pub fn hermitian_defect(a: &Array2<Complex64>) -> f64 {
    let scale = a.norm_l2().max(f64::MIN_POSITIVE);
    let ah = adjoint(a);
    (&ah - a).norm_l2() / scale
}

/// Truncated pseudoinverse of a Hermitian positive semi-definite matrix via
/// its eigendecomposition. Eigenvalues at or below `rcond * lambda_max` are
/// treated as zero. Returns the pseudoinverse and the retained rank.
///
/// Fails with a degeneracy error when no eigenvalue clears the threshold;
/// use [`hermitian_pinv_or_zero`] where an all-zero matrix is a legitimate
/// input.
pub fn hermitian_pinv(g: &Array2<Complex64>, rcond: f64) -> Result<(Array2<Complex64>, usize)> {
    match hermitian_pinv_or_zero(g, rcond)? {
        (_, 0) => Err(Error::DegenerateData(
            "matrix is entirely below the pseudoinverse truncation tolerance".into(),
        )),
        ok => Ok(ok),
    }
}

/// Symmetric eigendecomposition of a Hermitian matrix with eigenvector
/// columns oriented so that `g v_i = lambda_i v_i`.
///
/// The LAPACK round trip through row-major storage can hand back the
/// conjugate of the eigenvector matrix for complex input; this wrapper
/// checks both orientations against the eigen equation and returns the one
/// that satisfies it.
pub fn hermitian_eig(g: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let (eigs, vecs) = g.eigh(UPLO::Lower)?;
    let scaled = |v: &Array2<Complex64>| {
        let mut m = v.clone();
        for (mut col, &l) in m.columns_mut().into_iter().zip(eigs.iter()) {
            col.mapv_inplace(|z| z * l);
        }
        m
    };
    let residual_plain = (&g.dot(&vecs) - &scaled(&vecs)).norm_l2();
    let conj = vecs.mapv(|z| z.conj());
    let residual_conj = (&g.dot(&conj) - &scaled(&conj)).norm_l2();
    if residual_conj < residual_plain {
        Ok((eigs, conj))
    } else {
        Ok((eigs, vecs))
    }
}

/// As [`hermitian_pinv`], but an all-truncated matrix yields the zero matrix
/// with rank 0 instead of an error.
pub fn hermitian_pinv_or_zero(
    g: &Array2<Complex64>,
    rcond: f64,
) -> Result<(Array2<Complex64>, usize)> {
    if g.nrows() != g.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "pseudoinverse input must be square, got {:?}",
            g.dim()
        )));
    }
    if !(0.0..f64::INFINITY).contains(&rcond) {
        return Err(Error::InvalidArgument(format!(
            "rcond must be a finite nonnegative number, got {rcond}"
        )));
    }
    if g.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("pseudoinverse input has non-finite entries".into()));
    }
    if g.nrows() == 0 {
        return Ok((g.clone(), 0));
    }
    let (eigs, vecs) = hermitian_eig(g)?;
    let lambda_max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lambda_max > 0.0) {
        return Ok((Array2::zeros(g.dim()), 0));
    }
    let threshold = rcond * lambda_max;
    let mut pinv = Array2::<Complex64>::zeros(g.dim());
    let mut rank = 0usize;
    for (i, &l) in eigs.iter().enumerate() {
        if l > threshold && l > 0.0 {
            rank += 1;
            let v = vecs.column(i);
            let inv = Complex64::new(1.0 / l, 0.0);
            // pinv += (1/l) v v^H
            for r in 0..g.nrows() {
                let vr = v[r] * inv;
                for c in 0..g.ncols() {
                    pinv[[r, c]] += vr * v[c].conj();
                }
            }
        }
    }
    Ok((pinv, rank))
}

/// Truncated pseudoinverse of a general (rectangular) complex matrix via its
/// singular value decomposition. Singular values at or below
/// `rcond * sigma_max` are discarded.
pub fn svd_pinv(a: &Array2<Complex64>, rcond: f64) -> Result<Array2<Complex64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Array2::zeros((a.ncols(), a.nrows())));
    }
    let (u, s, vt) = a.svddc(JobSvd::Some)?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^H");
    let smax = s[0];
    if !(smax > 0.0) {
        return Ok(Array2::zeros((a.ncols(), a.nrows())));
    }
    let threshold = rcond * smax;
    let kept: Vec<usize> = (0..s.len()).filter(|&i| s[i] > threshold).collect();
    let mut pinv = Array2::<Complex64>::zeros((a.ncols(), a.nrows()));
    for &i in &kept {
        let inv = 1.0 / s[i];
        let vi = vt.row(i); // row i of V^H = conj of column i of V
        let ui = u.column(i);
        for r in 0..a.ncols() {
            let vr = vi[r].conj() * inv;
            for c in 0..a.nrows() {
                pinv[[r, c]] += vr * ui[c].conj();
            }
        }
    }
    Ok(pinv)
}

/// Relative residuals of the four Penrose identities for `(g, gp)`:
/// `g gp g = g`, `gp g gp = gp`, `(g gp)^H = g gp`, `(gp g)^H = gp g`.
pub fn penrose_residuals(g: &Array2<Complex64>, gp: &Array2<Complex64>) -> [f64; 4] {
    let ng = g.norm_l2().max(f64::MIN_POSITIVE);
    let ngp = gp.norm_l2().max(f64::MIN_POSITIVE);
    let ggp = g.dot(gp);
    let gpg = gp.dot(g);
    let r1 = (&ggp.dot(g) - g).norm_l2() / ng;
    let r2 = (&gpg.dot(gp) - gp).norm_l2() / ngp;
    let r3 = (&adjoint(&ggp) - &ggp).norm_l2() / ggp.norm_l2().max(f64::MIN_POSITIVE);
    let r4 = (&adjoint(&gpg) - &gpg).norm_l2() / gpg.norm_l2().max(f64::MIN_POSITIVE);
    [r1, r2, r3, r4]
}

/// Cast a real matrix to complex.
pub fn complexify(a: ndarray::ArrayView2<'_, f64>) -> Array2<Complex64> {
    a.mapv(|v| Complex64::new(v, 0.0))
}

/// Real parts of a complex matrix.
pub fn real_part(a: &Array2<Complex64>) -> Array2<f64> {
    a.mapv(|z| z.re)
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
