//! Dense linear-algebra helpers shared by the structural modules.
//!
//! Rank decisions follow one rule everywhere: a singular value counts as zero
//! when it is at most `tol * scale`, where `scale` is the largest singular
//! value unless the caller supplies a reference scale.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;

/// Default relative singular-value threshold.
pub const TOL_RANK: f64 = 1e-9;

/// Singular values (descending) and the matching right singular vectors as
/// columns of a square matrix. Wide inputs are padded with zero rows so that
/// the full right basis is always returned.
pub fn svd_right(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.ncols();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &v_t.row(i).transpose());
    }
    (sigma, v)
}

/// Orthonormal basis of the null space. `scale` overrides the reference
/// magnitude used for the rank threshold.
pub fn null_space_scaled(m: &DMatrix<f64>, tol: f64, scale: Option<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let (sigma, v) = svd_right(m);
    let reference = scale.unwrap_or_else(|| sigma.first().copied().unwrap_or(0.0));
    let threshold = tol * reference;
    let rank = sigma.iter().filter(|&&s| s > threshold).count();
    v.columns(rank, n - rank).into_owned()
}

pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    null_space_scaled(m, TOL_RANK, None)
}

/// Orthonormal basis for the column span of `m`.
pub fn orth(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    orth_scaled(m, tol, None)
}

/// Like [`orth`], with singular values compared against `tol * scale`
/// instead of `tol * sigma_max` when `scale` is given.
pub fn orth_scaled(m: &DMatrix<f64>, tol: f64, scale: Option<f64>) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let reference = scale.unwrap_or(smax);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * reference)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    columns_to_matrix(rows, &cols)
}

/// Eigenvalues of a real matrix, `None` if the Schur iteration does not
/// converge. The zero matrix is handled directly.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<C64>> {
    if m.iter().all(|&x| x == 0.0) {
        return Some(vec![C64::new(0.0, 0.0); m.nrows()]);
    }
    match nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000) {
        Some(s) => Some(s.complex_eigenvalues().iter().cloned().collect()),
        None => complex_eigenvalues(&to_complex(m)),
    }
}

/// Diagonal of a complex Schur form.
pub fn complex_eigenvalues(m: &DMatrix<C64>) -> Option<Vec<C64>> {
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Some(vec![C64::new(0.0, 0.0); m.nrows()]);
    }
    let t = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 10_000)?.unpack().1;
    Some((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

pub fn columns_to_matrix(rows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Concatenates two column blocks with the same row count.
pub fn hstack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    m.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    m
}

/// Pivoted Gram-Schmidt of the standard basis vectors projected onto the
/// span of the orthonormal columns `q`. Produces an orthonormal basis of the
/// same space that coincides with coordinate axes whenever the space allows.
pub fn canonical_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let r = q.ncols();
    let mut candidates: Vec<DVector<f64>> = (0..n)
        .map(|i| q * q.row(i).transpose())
        .collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(r);
    let mut used = vec![false; n];
    for _ in 0..r {
        let mut best = None;
        let mut best_norm = 0.0;
        for (i, c) in candidates.iter().enumerate() {
            let norm = c.norm();
            if !used[i] && norm > best_norm + 1e-12 {
                best_norm = norm;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        used[i] = true;
        let v = &candidates[i] / best_norm;
        for c in candidates.iter_mut() {
            let d = v.dot(c);
            *c -= &v * d;
        }
        basis.push(v);
    }
    columns_to_matrix(n, &basis)
}

/// Orthonormal basis for the complement of the column span of `q` (assumed
/// orthonormal), chosen by pivoted orthogonalization of standard vectors.
pub fn canonical_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let projector = DMatrix::identity(n, n) - q * q.transpose();
    canonical_basis(&orth(&projector, 1e-8))
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal columns. Returns 1 when the dimensions differ.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.transpose() * b);
    residual.singular_values().max().min(1.0)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// The `count` right singular vectors of a complex matrix belonging to its
/// smallest singular values, together with the largest of those values.
pub fn smallest_right_vectors(m: &DMatrix<C64>, count: usize) -> (DMatrix<C64>, f64) {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let mut out = DMatrix::zeros(n, count);
    let mut worst: f64 = 0.0;
    for (col, &i) in order.iter().take(count).enumerate() {
        worst = worst.max(svd.singular_values[i]);
        for r in 0..n {
            out[(r, col)] = v_t[(i, r)].conj();
        }
    }
    (out, worst)
}

/// Spectral-norm condition number of a square complex matrix.
pub fn condition_number(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ns = null_space(&m);
        assert_eq!(ns.ncols(), 2);
        assert_abs_diff_eq!((m * ns).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn null_space_of_zero_is_everything() {
        let ns = null_space(&DMatrix::zeros(2, 3));
        assert_eq!(ns.ncols(), 3);
    }

    #[test]
    fn canonical_basis_recovers_axes() {
        let q = orth(
            &DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, 0.0, 0.0]),
            1e-9,
        );
        let c = canonical_basis(&q);
        assert_abs_diff_eq!(c[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[(1, 1)].abs(), 1.0, epsilon = 1e-12);
        let comp = canonical_complement(&c);
        assert_eq!(comp.ncols(), 1);
        assert_abs_diff_eq!(comp[(2, 0)].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn distance_between_equal_spans() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[-1.0, 0.0]);
        assert!(subspace_distance(&a, &b) < 1e-15);
        let c = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_abs_diff_eq!(subspace_distance(&a, &c), 1.0, epsilon = 1e-15);
    }
}
