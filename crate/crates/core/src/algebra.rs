//! Finite-dimensional Lie algebras given by structure constants, together
//! with the subspace, ideal and quotient calculus used by the decompositions.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::linalg::{self, C64, TOL_RANK};
use crate::par::task_rng;

/// Residual bound for Jacobi, Leibniz and bracket-preservation checks.
pub const TOL_ALG: f64 = 1e-10;

/// Seed used when the nilradical computation needs to break eigenvalue ties.
pub const DEFAULT_TRIANGULARIZATION_SEED: u64 = 0x5eed;

/// A subspace of an ambient coordinate space, stored as orthonormal columns.
#[derive(Debug, Clone)]
pub struct Subspace {
    ambient: usize,
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self {
            ambient,
            basis: DMatrix::zeros(ambient, 0),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self {
            ambient,
            basis: DMatrix::identity(ambient, ambient),
        }
    }

    /// Span of arbitrary columns; dependent columns are dropped at `TOL_RANK`.
    pub fn span(ambient: usize, columns: &DMatrix<f64>) -> Self {
        assert_eq!(columns.nrows(), ambient, "column length must match ambient dimension");
        Self {
            ambient,
            basis: linalg::orth(columns, TOL_RANK),
        }
    }

    pub fn span_vectors(ambient: usize, vectors: &[DVector<f64>]) -> Self {
        Self::span(ambient, &linalg::columns_to_matrix(ambient, vectors))
    }

    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        Self {
            ambient: basis.nrows(),
            basis,
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Basis of the same space aligned with coordinate axes where possible.
    pub fn canonical(&self) -> Self {
        Self {
            ambient: self.ambient,
            basis: linalg::canonical_basis(&self.basis),
        }
    }

    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Distance from `v` to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        (v - &self.basis * (self.basis.transpose() * v)).norm()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        self.residual(v) <= tol * v.norm().max(1.0)
    }

    pub fn contains_space(&self, other: &Subspace, tol: f64) -> bool {
        other.vectors().iter().all(|v| self.contains(v, tol))
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        Subspace::span(self.ambient, &linalg::hstack(&self.basis, &other.basis))
    }

    pub fn intersection(&self, other: &Subspace) -> Subspace {
        if self.is_zero() || other.is_zero() {
            return Subspace::zero(self.ambient);
        }
        let stacked = linalg::hstack(&self.basis, &(-&other.basis));
        let ns = linalg::null_space(&stacked);
        let coeffs = ns.rows(0, self.dim()).into_owned();
        Subspace::span(self.ambient, &(&self.basis * coeffs))
    }

    /// Sine of the largest principal angle; 1 for different dimensions.
    pub fn distance(&self, other: &Subspace) -> f64 {
        linalg::subspace_distance(&self.basis, &other.basis)
    }

    pub fn same_as(&self, other: &Subspace, tol: f64) -> bool {
        self.dim() == other.dim() && self.distance(other) <= tol
    }
}

/// A Lie algebra over a fixed basis `e_1..e_n` with
/// `[e_i, e_j] = sum_k c[i][j][k] e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    labels: Vec<String>,
    table: Vec<f64>,
}

fn default_labels(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("e{i}")).collect()
}

impl LieAlgebra {
    /// Builds an algebra from nonzero constants `(i, j, k, value)` with
    /// 0-based indices, meaning `[e_i, e_j]` has `value` on `e_k`. The
    /// antisymmetric partner is filled in; conflicting entries are rejected.
    pub fn from_triples(
        dim: usize,
        labels: Option<Vec<String>>,
        triples: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let mut table = vec![0.0; dim * dim * dim];
        let mut set = vec![false; dim * dim * dim];
        let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        for &(i, j, k, v) in triples {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: i.max(j).max(k) + 1,
                });
            }
            if i == j {
                if v != 0.0 {
                    return Err(Error::NotAntisymmetric { i, j, k });
                }
                continue;
            }
            for (a, b, val) in [(i, j, v), (j, i, -v)] {
                let p = idx(a, b, k);
                if set[p] && (table[p] - val).abs() > 0.0 {
                    return Err(Error::NotAntisymmetric { i, j, k });
                }
                table[p] = val;
                set[p] = true;
            }
        }
        Self::from_table(dim, labels, table)
    }

    /// Builds an algebra from a full dense table, checking antisymmetry and
    /// the Jacobi identity.
    pub fn from_table(dim: usize, labels: Option<Vec<String>>, table: Vec<f64>) -> Result<Self> {
        if table.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                found: table.len(),
            });
        }
        let labels = labels.unwrap_or_else(|| default_labels(dim));
        if labels.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: labels.len(),
            });
        }
        let alg = Self { dim, labels, table };
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    let a = alg.constant(i, j, k);
                    let b = alg.constant(j, i, k);
                    if (a + b).abs() > TOL_ALG * (1.0 + a.abs()) {
                        return Err(Error::NotAntisymmetric { i, j, k });
                    }
                }
            }
        }
        let residual = alg.jacobi_residual();
        if residual > TOL_ALG {
            return Err(Error::JacobiViolated { residual });
        }
        Ok(alg)
    }

    pub fn abelian(dim: usize) -> Self {
        Self {
            dim,
            labels: default_labels(dim),
            table: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        self.table[(i * self.dim + j) * self.dim + k]
    }

    /// Nonzero constants with `i < j`, 0-based.
    pub fn triples(&self) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                for k in 0..self.dim {
                    let v = self.constant(i, j, k);
                    if v != 0.0 {
                        out.push((i, j, k, v));
                    }
                }
            }
        }
        out
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        v[i] = 1.0;
        v
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn bracket(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(a)?;
        self.check_len(b)?;
        Ok(self.bracket_unchecked(a, b))
    }

    /// Bracket without length validation; callers guarantee dimensions.
    pub fn bracket_unchecked(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let ai = a[i];
            if ai == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = ai * b[j];
                if w == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += w * self.table[base + k];
                }
            }
        }
        out
    }

    /// Matrix of `ad(x) = [x, .]`.
    pub fn ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += x[i] * self.constant(i, j, k);
                }
            }
        }
        m
    }

    pub fn ad_basis(&self, i: usize) -> DMatrix<f64> {
        self.ad(&self.basis_vector(i))
    }

    /// Largest Jacobi residual over basis triples.
    pub fn jacobi_residual(&self) -> f64 {
        let e: Vec<DVector<f64>> = (0..self.dim).map(|i| self.basis_vector(i)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                for k in (j + 1)..self.dim {
                    let r = self.bracket_unchecked(&e[i], &self.bracket_unchecked(&e[j], &e[k]))
                        + self.bracket_unchecked(&e[j], &self.bracket_unchecked(&e[k], &e[i]))
                        + self.bracket_unchecked(&e[k], &self.bracket_unchecked(&e[i], &e[j]));
                    worst = worst.max(r.norm());
                }
            }
        }
        worst
    }

    pub fn is_abelian(&self) -> bool {
        self.table.iter().all(|&c| c.abs() <= TOL_ALG)
    }

    /// Scale of the structure constants, used to make rank tests relative.
    fn scale(&self) -> f64 {
        self.table.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0)
    }

    /// `{x : [x, e_i] = 0 for all i}`.
    pub fn center(&self) -> Subspace {
        let n = self.dim;
        let mut m = DMatrix::zeros(n * n, n);
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    m[(i * n + k, j)] = self.constant(j, i, k);
                }
            }
        }
        Subspace::from_orthonormal(linalg::null_space_scaled(&m, TOL_RANK, Some(self.scale())))
    }

    /// `[A, B]` as a subspace.
    pub fn bracket_spaces(&self, a: &Subspace, b: &Subspace) -> Subspace {
        let mut cols = Vec::new();
        for x in a.vectors() {
            for y in b.vectors() {
                cols.push(self.bracket_unchecked(&x, &y));
            }
        }
        if cols.is_empty() {
            return Subspace::zero(self.dim);
        }
        let m = linalg::columns_to_matrix(self.dim, &cols);
        Subspace::from_orthonormal(linalg::orth_scaled(&m, TOL_RANK, Some(self.scale())))
    }

    /// `g^1 = g, g^{i+1} = [g, g^i]`, ending at the first zero term or when
    /// the series stabilizes.
    pub fn lower_central_series(&self) -> Vec<Subspace> {
        let full = Subspace::full(self.dim);
        let mut series = vec![full.clone()];
        loop {
            let last = series.last().expect("non-empty");
            if last.is_zero() {
                break;
            }
            let next = self.bracket_spaces(&full, last);
            let stalled = next.dim() == last.dim();
            series.push(next);
            if stalled {
                break;
            }
        }
        series
    }

    /// Number of nonzero lower-central terms, or `None` if not nilpotent.
    pub fn nilpotency_class(&self) -> Option<usize> {
        let series = self.lower_central_series();
        let last = series.last().expect("non-empty");
        if !last.is_zero() {
            return None;
        }
        Some(series.iter().filter(|s| !s.is_zero()).count())
    }

    pub fn is_nilpotent(&self) -> bool {
        self.nilpotency_class().is_some()
    }

    pub fn derived_series(&self) -> Vec<Subspace> {
        let mut series = vec![Subspace::full(self.dim)];
        loop {
            let last = series.last().expect("non-empty");
            if last.is_zero() {
                break;
            }
            let next = self.bracket_spaces(last, last);
            let stalled = next.dim() == last.dim();
            series.push(next);
            if stalled {
                break;
            }
        }
        series
    }

    pub fn is_solvable(&self) -> bool {
        self.derived_series().last().map(|s| s.is_zero()).unwrap_or(true)
    }

    /// Largest distance from `[e_i, s]` to `s` over basis vectors.
    pub fn ideal_residual(&self, s: &Subspace) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            let e = self.basis_vector(i);
            for v in s.vectors() {
                worst = worst.max(s.residual(&self.bracket_unchecked(&e, &v)));
            }
        }
        worst
    }

    pub fn is_ideal(&self, s: &Subspace) -> bool {
        self.ideal_residual(s) <= 1e-8 * self.scale()
    }

    /// Structure constants of a subalgebra on the orthonormal basis of `s`.
    pub fn restrict(&self, s: &Subspace) -> Result<LieAlgebra> {
        let b = s.basis();
        let r = s.dim();
        let vecs = s.vectors();
        let mut table = vec![0.0; r * r * r];
        for a in 0..r {
            for c in 0..r {
                let br = self.bracket_unchecked(&vecs[a], &vecs[c]);
                let resid = s.residual(&br);
                if resid > 1e-8 * self.scale() {
                    return Err(Error::NotAnIdeal { residual: resid });
                }
                let coords = b.transpose() * br;
                for k in 0..r {
                    table[(a * r + c) * r + k] = coords[k];
                }
            }
        }
        LieAlgebra::from_table(r, None, table)
    }

    /// Quotient by an ideal, on a complement chosen by pivoted
    /// orthogonalization against the ideal.
    pub fn quotient(&self, ideal: &Subspace) -> Result<Quotient> {
        let residual = self.ideal_residual(ideal);
        if residual > 1e-8 * self.scale() {
            return Err(Error::NotAnIdeal { residual });
        }
        let complement = linalg::canonical_complement(ideal.basis());
        let q = complement.ncols();
        let cols: Vec<DVector<f64>> = complement.column_iter().map(|c| c.into_owned()).collect();
        let mut table = vec![0.0; q * q * q];
        for a in 0..q {
            for b in 0..q {
                let coords = complement.transpose() * self.bracket_unchecked(&cols[a], &cols[b]);
                for k in 0..q {
                    table[(a * q + b) * q + k] = coords[k];
                }
            }
        }
        let labels = if q == self.dim {
            Some(self.labels.clone())
        } else {
            None
        };
        let algebra = LieAlgebra::from_table(q, labels, table)?;
        Ok(Quotient {
            algebra,
            projection: complement.transpose(),
            complement,
            ideal: ideal.clone(),
        })
    }

    /// Smallest subspace containing `seed`, closed under the bracket and
    /// under each of `maps`.
    pub fn bracket_saturate(&self, seed: &Subspace, maps: &[DMatrix<f64>]) -> Subspace {
        let mut current = seed.clone();
        loop {
            let vecs = current.vectors();
            let mut cols = vecs.clone();
            for (i, a) in vecs.iter().enumerate() {
                for b in vecs.iter().skip(i + 1) {
                    cols.push(self.bracket_unchecked(a, b));
                }
                for m in maps {
                    cols.push(m * a);
                }
            }
            if cols.is_empty() {
                return current;
            }
            let next = Subspace::span_vectors(self.dim, &cols);
            if next.dim() == current.dim() {
                return next;
            }
            current = next;
        }
    }

    /// Largest nilpotent ideal, computed by simultaneous triangularization of
    /// `ad(g)` over the complexification.
    pub fn nilradical(&self) -> Result<Subspace> {
        self.nilradical_seeded(DEFAULT_TRIANGULARIZATION_SEED)
    }

    pub fn nilradical_seeded(&self, seed: u64) -> Result<Subspace> {
        if !self.is_solvable() {
            return Err(Error::NotSolvable);
        }
        if self.is_nilpotent() {
            return Ok(Subspace::full(self.dim));
        }
        let weights = self.weights(seed)?;
        let n = self.dim;
        let mut m = DMatrix::zeros(2 * weights.len(), n);
        for (t, w) in weights.iter().enumerate() {
            for i in 0..n {
                m[(2 * t, i)] = w[i].re;
                m[(2 * t + 1, i)] = w[i].im;
            }
        }
        let ns = linalg::null_space_scaled(&m, 1e-7, Some(self.scale()));
        let nil = Subspace::from_orthonormal(ns).canonical();
        self.check_nilradical(&nil)?;
        Ok(nil)
    }

    /// Accepts a user-supplied nilradical after verifying it is an ideal,
    /// nilpotent, and contains `[g, g]`.
    pub fn nilradical_from_candidate(&self, columns: &DMatrix<f64>) -> Result<Subspace> {
        if !self.is_solvable() {
            return Err(Error::NotSolvable);
        }
        let cand = Subspace::span(self.dim, columns).canonical();
        self.check_nilradical(&cand)?;
        Ok(cand)
    }

    fn check_nilradical(&self, s: &Subspace) -> Result<()> {
        if !self.is_ideal(s) {
            return Err(Error::InvalidNilradical("not an ideal".into()));
        }
        let sub = self.restrict(s)?;
        if !sub.is_nilpotent() {
            return Err(Error::InvalidNilradical("not nilpotent".into()));
        }
        let full = Subspace::full(self.dim);
        let derived = self.bracket_spaces(&full, &full);
        if !s.contains_space(&derived, 1e-8) {
            return Err(Error::InvalidNilradical("does not contain [g, g]".into()));
        }
        Ok(())
    }

    /// Diagonal weight functionals of a triangular form of `ad(g)`; entry
    /// `w[t][i]` is the t-th weight evaluated on `e_i`.
    fn weights(&self, seed: u64) -> Result<Vec<Vec<C64>>> {
        let n = self.dim;
        let series = self.derived_series();
        // Ideal families from the deepest nonzero derived term up to g itself.
        let mut families: Vec<Vec<DMatrix<C64>>> = series
            .iter()
            .filter(|s| !s.is_zero())
            .rev()
            .map(|s| {
                s.vectors()
                    .iter()
                    .map(|v| linalg::to_complex(&self.ad(v)))
                    .collect()
            })
            .collect();
        let full_family: Vec<DMatrix<C64>> =
            (0..n).map(|i| linalg::to_complex(&self.ad_basis(i))).collect();
        let last = families.len() - 1;
        families[last] = full_family;

        let mut rng = task_rng(seed, 0);
        let scale = self.scale();
        let mut weights = Vec::with_capacity(n);
        let mut size = n;
        while size > 0 {
            let v = common_eigenvector(&families, size, scale, &mut rng)?;
            let full = &families[last];
            let w: Vec<C64> = full
                .iter()
                .map(|a| (v.adjoint() * (a * &v))[(0, 0)])
                .collect();
            weights.push(w);
            if size == 1 {
                break;
            }
            // Pass to the quotient by span{v} through its orthogonal complement.
            let q = complex_complement(&v);
            for fam in families.iter_mut() {
                for a in fam.iter_mut() {
                    *a = q.adjoint() * &*a * &q;
                }
            }
            size -= 1;
        }
        Ok(weights)
    }
}

fn complex_complement(v: &DMatrix<C64>) -> DMatrix<C64> {
    let n = v.nrows();
    let p = DMatrix::<C64>::identity(n, n) - v * v.adjoint();
    let svd = p.svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out = DMatrix::zeros(n, n - 1);
    for (col, &i) in order.iter().take(n - 1).enumerate() {
        out.set_column(col, &u.column(i));
    }
    out
}

/// Common eigenvector of a solvable family acting on `C^size`. `families`
/// lists ideals from the deepest derived term to the whole algebra; each is
/// commutative on the joint weight space of the previous ones.
fn common_eigenvector(
    families: &[Vec<DMatrix<C64>>],
    size: usize,
    scale: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<DMatrix<C64>> {
    let mut q = DMatrix::<C64>::identity(size, size);
    for fam in families {
        for a in fam {
            if q.ncols() <= 1 {
                break;
            }
            let b = q.adjoint() * a * &q;
            let w = b.nrows();
            let mean = b.trace() / C64::new(w as f64, 0.0);
            let shifted = &b - DMatrix::<C64>::identity(w, w) * mean;
            if shifted.norm() <= 1e-12 * scale {
                continue;
            }
            let mut eigs = linalg::complex_eigenvalues(&b).ok_or_else(|| {
                Error::TriangularizationFailed("Schur iteration did not converge".into())
            })?;
            eigs.shuffle(rng);
            let mu = eigs[0];
            let shifted = &b - DMatrix::<C64>::identity(w, w) * mu;
            let svd = shifted.svd(false, true);
            let v_t = svd.v_t.expect("requested right singular vectors");
            let threshold = 1e-7 * scale.max(b.norm());
            let kernel: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] <= threshold)
                .collect();
            if kernel.is_empty() {
                return Err(Error::TriangularizationFailed(format!(
                    "no eigenvector for eigenvalue {mu} within tolerance"
                )));
            }
            let mut k = DMatrix::<C64>::zeros(w, kernel.len());
            for (col, &i) in kernel.iter().enumerate() {
                for r in 0..w {
                    k[(r, col)] = v_t[(i, r)].conj();
                }
            }
            q = &q * k;
        }
    }
    let v = q.column(0).into_owned();
    let norm = v.norm();
    if norm == 0.0 {
        return Err(Error::TriangularizationFailed("degenerate joint eigenspace".into()));
    }
    Ok(DMatrix::from_column_slice(size, 1, (v / C64::new(norm, 0.0)).as_slice()))
}

/// `g / ideal` with the coordinate maps relating it to `g`.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub algebra: LieAlgebra,
    /// `q x n`, maps `g` coordinates to quotient coordinates.
    pub projection: DMatrix<f64>,
    /// `n x q`, orthonormal complement of the ideal; lifts quotient
    /// coordinates to minimum-norm representatives.
    pub complement: DMatrix<f64>,
    pub ideal: Subspace,
}
