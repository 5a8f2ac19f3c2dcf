//! Derivations, their additive Jordan decomposition, generalized kernels and
//! the kernel/nilradical split of a solvable algebra.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::algebra::{LieAlgebra, Subspace, TOL_ALG};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, TOL_RANK};

/// Relative eigenvalue clustering tolerance.
pub const TOL_EIG: f64 = 1e-7;

/// Largest eigenvector-basis condition number accepted for a clustering.
const MAX_BASIS_CONDITION: f64 = 1e6;

/// A linear map satisfying the Leibniz rule on a given algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivation {
    matrix: DMatrix<f64>,
}

impl Derivation {
    /// Certifies `matrix` as a derivation of `g`.
    pub fn new(g: &LieAlgebra, matrix: DMatrix<f64>) -> Result<Self> {
        let report = leibniz_check(&matrix, g)?;
        if !report.pass {
            return Err(Error::NotADerivation {
                residual: report.max_residual,
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LeibnizReport {
    pub max_residual: f64,
    /// Basis pair (0-based) attaining the maximum.
    pub worst_pair: Option<(usize, usize)>,
    pub threshold: f64,
    pub pass: bool,
}

/// Max over basis pairs of `|D[e_i,e_j] - [De_i,e_j] - [e_i,De_j]|`.
pub fn leibniz_check(d: &DMatrix<f64>, g: &LieAlgebra) -> Result<LeibnizReport> {
    let n = g.dim();
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: d.nrows(),
        });
    }
    let mut worst: f64 = 0.0;
    let mut worst_pair = None;
    for i in 0..n {
        let ei = g.basis_vector(i);
        let dei = d.column(i).into_owned();
        for j in (i + 1)..n {
            let ej = g.basis_vector(j);
            let dej = d.column(j).into_owned();
            let r = d * g.bracket_unchecked(&ei, &ej)
                - g.bracket_unchecked(&dei, &ej)
                - g.bracket_unchecked(&ei, &dej);
            let norm = r.norm();
            if norm > worst {
                worst = norm;
                worst_pair = Some((i, j));
            }
        }
    }
    let threshold = TOL_ALG * linalg::max_abs(d).max(1.0);
    Ok(LeibnizReport {
        max_residual: worst,
        worst_pair,
        threshold,
        pass: worst <= threshold,
    })
}

/// Coefficient matrix of the Leibniz equations in the unknowns
/// `d[a][b]` (row-major), one row per `(i < j, k)`.
fn leibniz_system<T, F>(g: &LieAlgebra, c: F) -> Vec<Vec<T>>
where
    T: Clone + Zero + std::ops::AddAssign + std::ops::SubAssign,
    F: Fn(usize, usize, usize) -> T,
{
    let n = g.dim();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                let mut row = vec![T::zero(); n * n];
                for l in 0..n {
                    row[k * n + l] += c(i, j, l);
                }
                for a in 0..n {
                    row[a * n + i] -= c(a, j, k);
                    row[a * n + j] -= c(i, a, k);
                }
                rows.push(row);
            }
        }
    }
    rows
}

fn exact_constant(v: f64) -> Option<BigRational> {
    if v == 0.0 {
        return Some(BigRational::zero());
    }
    let r = Ratio::<i64>::approximate_float(v)?;
    let back = *r.numer() as f64 / *r.denom() as f64;
    (back == v).then(|| BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())))
}

/// Exact null space by reduced row echelon form. Basis vectors set one free
/// variable to 1 and the others to 0.
fn rational_null_space(rows: Vec<Vec<BigRational>>, cols: usize) -> Vec<Vec<BigRational>> {
    let mut m = rows;
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = BigRational::one() / m[r][c].clone();
        for x in m[r].iter_mut() {
            *x = x.clone() * inv.clone();
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for cc in 0..cols {
                    let delta = f.clone() * m[r][cc].clone();
                    m[i][cc] = m[i][cc].clone() - delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f].clone();
            }
            v
        })
        .collect()
}

/// Basis of `Der(g)`. For rational structure constants the basis is exact
/// (free-variable normalized); otherwise it is an orthonormal SVD basis.
pub fn derivation_basis(g: &LieAlgebra) -> Vec<DMatrix<f64>> {
    let n = g.dim();
    let exact: Option<Vec<BigRational>> = g.table().iter().map(|&v| exact_constant(v)).collect();
    let vectors: Vec<Vec<f64>> = match exact {
        Some(table) => {
            let c = |i: usize, j: usize, k: usize| table[(i * n + j) * n + k].clone();
            let rows = leibniz_system(g, c);
            rational_null_space(rows, n * n)
                .into_iter()
                .map(|v| {
                    v.iter()
                        .map(|x| {
                            if x.is_zero() {
                                0.0
                            } else {
                                x.numer().to_f64().unwrap_or(0.0) / x.denom().to_f64().unwrap_or(1.0)
                            }
                        })
                        .collect()
                })
                .collect()
        }
        None => {
            let rows = leibniz_system(g, |i, j, k| g.constant(i, j, k));
            let mut m = DMatrix::zeros(rows.len(), n * n);
            for (r, row) in rows.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    m[(r, c)] = *v;
                }
            }
            let ns = linalg::null_space(&m);
            ns.column_iter().map(|c| c.iter().cloned().collect()).collect()
        }
    };
    vectors
        .into_iter()
        .map(|v| DMatrix::from_row_slice(n, n, &v))
        .collect()
}

/// Additive Jordan decomposition `D = H + E + N`.
#[derive(Debug, Clone)]
pub struct JordanParts {
    /// Real semisimple part.
    pub hyperbolic: DMatrix<f64>,
    /// Imaginary semisimple part.
    pub elliptic: DMatrix<f64>,
    pub nilpotent: DMatrix<f64>,
    /// Cluster representatives with algebraic multiplicities.
    pub eigenvalues: Vec<(C64, usize)>,
}

impl JordanParts {
    pub fn semisimple(&self) -> DMatrix<f64> {
        &self.hyperbolic + &self.elliptic
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JordanReport {
    pub reconstruction: f64,
    pub max_commutator: f64,
    pub nilpotent_power: f64,
    /// Largest |Re| among eigenvalues of E.
    pub elliptic_real_part: f64,
    /// Largest |Im| among eigenvalues of H.
    pub hyperbolic_imag_part: f64,
    /// Largest Leibniz residual of the three parts (0 without an algebra).
    pub parts_leibniz: f64,
    /// Reference norm used for the relative bounds.
    pub scale: f64,
}

impl JordanReport {
    /// All invariants hold at relative tolerance `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        let s = self.scale.max(f64::MIN_POSITIVE);
        self.reconstruction <= tol * s
            && self.max_commutator <= tol * s * s
            && self.nilpotent_power <= tol
            && self.elliptic_real_part <= tol * s
            && self.hyperbolic_imag_part <= tol * s
            && self.parts_leibniz <= tol * s.max(1.0)
    }
}

fn single_linkage(values: &[C64], radius: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= radius {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group = std::collections::HashMap::new();
    for i in 0..n {
        let r = find(&mut label, i);
        let g = *root_to_group.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

fn mat_pow(m: &DMatrix<C64>, p: usize) -> DMatrix<C64> {
    let n = m.nrows();
    let mut out = DMatrix::<C64>::identity(n, n);
    for _ in 0..p {
        out = &out * m;
    }
    out
}

struct Clustering {
    reps: Vec<(C64, usize)>,
    basis: DMatrix<C64>,
}

fn try_clustering(d: &DMatrix<f64>, eigs: &[C64], radius: f64, scale: f64) -> Option<Clustering> {
    let n = d.nrows();
    let dc = linalg::to_complex(d);
    let groups = single_linkage(eigs, radius);
    let mut reps = Vec::new();
    for g in &groups {
        let sum: C64 = g.iter().map(|&i| eigs[i]).sum();
        let mut mean = sum / C64::new(g.len() as f64, 0.0);
        if mean.im.abs() <= radius {
            mean.im = 0.0;
        }
        reps.push((mean, g.len()));
    }
    let mut basis = DMatrix::<C64>::zeros(n, n);
    let mut col = 0;
    for &(lambda, m) in &reps {
        let shifted = &dc - DMatrix::<C64>::identity(n, n) * lambda;
        let (k, worst) = linalg::smallest_right_vectors(&mat_pow(&shifted, m), m);
        if worst > 1e-6 * scale.powi(m as i32).max(f64::MIN_POSITIVE) {
            return None;
        }
        basis.view_mut((0, col), (n, m)).copy_from(&k);
        col += m;
    }
    if linalg::condition_number(&basis) > MAX_BASIS_CONDITION {
        return None;
    }
    Some(Clustering { reps, basis })
}

/// Jordan decomposition of an arbitrary real square matrix.
pub fn jordan_parts(d: &DMatrix<f64>) -> Result<JordanParts> {
    let n = d.nrows();
    let scale = linalg::spectral_norm(d);
    if scale == 0.0 {
        return Ok(JordanParts {
            hyperbolic: DMatrix::zeros(n, n),
            elliptic: DMatrix::zeros(n, n),
            nilpotent: d.clone(),
            eigenvalues: if n > 0 { vec![(C64::new(0.0, 0.0), n)] } else { vec![] },
        });
    }
    let tol_eig = TOL_EIG * scale;
    let eigs = linalg::eigenvalues(d).ok_or(Error::ClusteringAmbiguous { gap: 0.0 })?;
    let mut last_gap = f64::INFINITY;
    for step in 0..6 {
        let radius = tol_eig * 10f64.powi(step);
        let groups = single_linkage(&eigs, radius);
        let means: Vec<C64> = groups
            .iter()
            .map(|g| g.iter().map(|&i| eigs[i]).sum::<C64>() / C64::new(g.len() as f64, 0.0))
            .collect();
        let mut gap = f64::INFINITY;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                gap = gap.min((means[i] - means[j]).norm());
            }
        }
        last_gap = gap;
        if gap < 10.0 * tol_eig {
            continue;
        }
        let Some(cl) = try_clustering(d, &eigs, radius, scale) else {
            continue;
        };
        let Some(inv) = cl.basis.clone().try_inverse() else {
            continue;
        };
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        for &(lambda, m) in &cl.reps {
            for _ in 0..m {
                re.push(C64::new(lambda.re, 0.0));
                im.push(C64::new(0.0, lambda.im));
            }
        }
        let h = &cl.basis * DMatrix::from_diagonal(&DVector::from_vec(re)) * &inv;
        let e = &cl.basis * DMatrix::from_diagonal(&DVector::from_vec(im)) * &inv;
        let imag_residue = h.iter().chain(e.iter()).fold(0.0f64, |a, z| a.max(z.im.abs()));
        if imag_residue > 1e-8 * scale {
            continue;
        }
        let hyperbolic = h.map(|z| z.re);
        let elliptic = e.map(|z| z.re);
        let nilpotent = d - &hyperbolic - &elliptic;
        let parts = JordanParts {
            hyperbolic,
            elliptic,
            nilpotent,
            eigenvalues: cl.reps,
        };
        let report = verify_parts(d, &parts, None);
        if report.nilpotent_power <= 1e-9 && report.max_commutator <= 1e-9 * scale * scale {
            return Ok(parts);
        }
    }
    Err(Error::ClusteringAmbiguous { gap: last_gap })
}

/// Jordan decomposition of a certified derivation; each part is checked to
/// be a derivation again.
pub fn jordan_decomposition(g: &LieAlgebra, d: &Derivation) -> Result<JordanParts> {
    let parts = jordan_parts(d.matrix())?;
    let report = verify_parts(d.matrix(), &parts, Some(g));
    let s = report.scale.max(1.0);
    if report.parts_leibniz > 1e-9 * s {
        return Err(Error::NotADerivation {
            residual: report.parts_leibniz,
        });
    }
    Ok(parts)
}

/// Residuals of every Jordan invariant for `parts` against `d`.
pub fn verify_parts(d: &DMatrix<f64>, parts: &JordanParts, g: Option<&LieAlgebra>) -> JordanReport {
    let n = d.nrows();
    let scale = linalg::spectral_norm(d);
    let (h, e, nn) = (&parts.hyperbolic, &parts.elliptic, &parts.nilpotent);
    let reconstruction = (h + e + nn - d).norm();
    let comm = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a * b - b * a).norm();
    let max_commutator = comm(h, e).max(comm(h, nn)).max(comm(e, nn));
    let nilpotent_power = if scale == 0.0 {
        linalg::max_abs(nn)
    } else {
        let scaled = nn / scale;
        let mut p = DMatrix::identity(n, n);
        for _ in 0..n {
            p = &p * &scaled;
        }
        p.norm()
    };
    let elliptic_real_part = linalg::eigenvalues(e)
        .map(|ev| ev.iter().fold(0.0f64, |a, z| a.max(z.re.abs())))
        .unwrap_or(f64::INFINITY);
    let hyperbolic_imag_part = linalg::eigenvalues(h)
        .map(|ev| ev.iter().fold(0.0f64, |a, z| a.max(z.im.abs())))
        .unwrap_or(f64::INFINITY);
    let parts_leibniz = match g {
        Some(g) => [h, e, nn]
            .iter()
            .map(|m| leibniz_check(m, g).map(|r| r.max_residual).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max),
        None => 0.0,
    };
    JordanReport {
        reconstruction,
        max_commutator,
        nilpotent_power,
        elliptic_real_part,
        hyperbolic_imag_part,
        parts_leibniz,
        scale,
    }
}

/// `ker D^n`, computed as the stable end of the chain
/// `K_1 = ker D`, `K_{j+1} = D^{-1}(K_j)` without forming powers.
pub fn generalized_kernel(d: &DMatrix<f64>) -> Subspace {
    let n = d.nrows();
    let scale = linalg::spectral_norm(d);
    let mut current = Subspace::zero(n);
    loop {
        let proj_out = DMatrix::identity(n, n) - current.projector();
        let m = proj_out * d;
        let next = Subspace::from_orthonormal(linalg::null_space_scaled(&m, TOL_RANK, Some(scale)));
        if next.dim() == current.dim() {
            return next;
        }
        current = next;
    }
}

/// `ker(H + E)` from a Jordan decomposition.
pub fn semisimple_kernel(parts: &JordanParts, scale: f64) -> Subspace {
    Subspace::from_orthonormal(linalg::null_space_scaled(
        &parts.semisimple(),
        TOL_RANK,
        Some(scale),
    ))
}

/// Generalized kernel with both routes computed and required to agree.
pub fn generalized_kernel_checked(d: &DMatrix<f64>) -> Result<Subspace> {
    let direct = generalized_kernel(d);
    let parts = jordan_parts(d)?;
    let via_parts = semisimple_kernel(&parts, linalg::spectral_norm(d));
    let distance = direct.distance(&via_parts);
    if direct.dim() != via_parts.dim() || distance > 1e-8 {
        return Err(Error::KernelRoutesDisagree { distance });
    }
    Ok(direct)
}

#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub g0: Subspace,
    pub n: Subspace,
    pub n0: Subspace,
    pub report: KernelSplitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelSplitReport {
    pub dim_g: usize,
    pub dim_g0: usize,
    pub dim_n: usize,
    pub dim_n0: usize,
    pub dim_n_plus_g0: usize,
    /// `n + g0 = g`.
    pub sum_is_whole: bool,
    /// `[g0, g0]` lies in `n0`.
    pub g0_bracket_in_n0: bool,
}

/// `g0 = ker D^n`, `n` the nilradical and `n0 = n ∩ g0`.
pub fn kernel_split(g: &LieAlgebra, d: &Derivation) -> Result<KernelSplit> {
    let n = g.nilradical()?;
    kernel_split_with(g, d, n)
}

/// As [`kernel_split`] with a nilradical supplied by the caller.
pub fn kernel_split_with(g: &LieAlgebra, d: &Derivation, nil: Subspace) -> Result<KernelSplit> {
    let g0 = generalized_kernel_checked(d.matrix())?.canonical();
    let n0 = nil.intersection(&g0);
    let sum = nil.sum(&g0);
    let bracket = g.bracket_spaces(&g0, &g0);
    let report = KernelSplitReport {
        dim_g: g.dim(),
        dim_g0: g0.dim(),
        dim_n: nil.dim(),
        dim_n0: n0.dim(),
        dim_n_plus_g0: sum.dim(),
        sum_is_whole: sum.dim() == g.dim(),
        g0_bracket_in_n0: n0.contains_space(&bracket, 1e-8),
    };
    Ok(KernelSplit {
        g0,
        n: nil,
        n0,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Compactness {
    Compact,
    NotCompactInModel { note: String },
}

/// In a simply connected model a connected subgroup of a nilpotent group is
/// compact only when trivial.
pub fn n0_compactness_criterion(n0: &Subspace) -> Compactness {
    if n0.dim() == 0 {
        Compactness::Compact
    } else {
        Compactness::NotCompactInModel {
            note: format!(
                "dim n0 = {}: a nontrivial connected subgroup of a simply connected nilpotent group is \
                 isomorphic to a vector group; torus quotients are not modelled",
                n0.dim()
            ),
        }
    }
}

/// Smallest `n <= nmax` with `|exp(n S0 D_E) g - g| < eps`.
pub fn elliptic_recurrence(
    d_e: &DMatrix<f64>,
    g: &DVector<f64>,
    s0: f64,
    eps: f64,
    nmax: usize,
) -> Result<Option<usize>> {
    let parts = jordan_parts(d_e)?;
    let scale = linalg::spectral_norm(d_e).max(1.0);
    let off = linalg::spectral_norm(&parts.hyperbolic).max(linalg::spectral_norm(&parts.nilpotent));
    if off > 1e-9 * scale {
        return Err(Error::NotElliptic(format!(
            "hyperbolic/nilpotent part of norm {off:.3e}"
        )));
    }
    let step = (d_e * s0).exp();
    let mut x = g.clone();
    for n in 1..=nmax {
        x = &step * x;
        if (&x - g).norm() < eps {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    #[test]
    fn leibniz_examples() {
        let h = catalog::heisenberg_algebra();
        assert!(leibniz_check(&diag(&[1.0, 1.0, 2.0]), &h).unwrap().pass);
        let r = leibniz_check(&diag(&[1.0, 1.0, 1.0]), &h).unwrap();
        assert!(!r.pass);
        assert_abs_diff_eq!(r.max_residual, 1.0, epsilon = 1e-15);
        assert_eq!(r.worst_pair, Some((0, 1)));
        let ab = LieAlgebra::abelian(3);
        let m = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        assert!(leibniz_check(&m, &ab).unwrap().pass);
        assert!(leibniz_check(&diag(&[1.0, 1.0]), &h).is_err());
    }

    #[test]
    fn derivation_bases_have_expected_dimension() {
        assert_eq!(derivation_basis(&catalog::heisenberg_algebra()).len(), 6);
        assert_eq!(derivation_basis(&LieAlgebra::abelian(2)).len(), 4);
        let n4 = catalog::filiform_algebra();
        for d in derivation_basis(&n4) {
            assert!(leibniz_check(&d, &n4).unwrap().pass);
        }
    }

    #[test]
    fn jordan_examples() {
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let p = jordan_parts(&nil).unwrap();
        assert!(p.hyperbolic.norm() < 1e-12 && p.elliptic.norm() < 1e-12);
        assert!((p.nilpotent - &nil).norm() < 1e-12);

        let d = diag(&[1.0, 2.0]);
        let p = jordan_parts(&d).unwrap();
        assert!((p.hyperbolic - &d).norm() < 1e-12);
        assert!(p.elliptic.norm() < 1e-12 && p.nilpotent.norm() < 1e-12);

        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let p = jordan_parts(&rot).unwrap();
        assert!((p.elliptic - &rot).norm() < 1e-12);
        assert!(p.hyperbolic.norm() < 1e-12 && p.nilpotent.norm() < 1e-12);

        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let p = jordan_parts(&j).unwrap();
        assert!((p.hyperbolic - DMatrix::identity(2, 2)).norm() < 1e-9);
        assert!(p.elliptic.norm() < 1e-9);
        assert!((p.nilpotent - nil).norm() < 1e-9);
    }

    #[test]
    fn jordan_of_large_block() {
        // 3x3 Jordan block at 2 plus a rotation-scaling block.
        let mut d = DMatrix::zeros(5, 5);
        for i in 0..3 {
            d[(i, i)] = 2.0;
        }
        d[(0, 1)] = 1.0;
        d[(1, 2)] = 1.0;
        d[(3, 3)] = 0.5;
        d[(4, 4)] = 0.5;
        d[(3, 4)] = -3.0;
        d[(4, 3)] = 3.0;
        let p = jordan_parts(&d).unwrap();
        let r = verify_parts(&d, &p, None);
        assert!(r.passes(1e-9), "{r:?}");
        assert_abs_diff_eq!(p.elliptic[(4, 3)], 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.hyperbolic[(3, 3)], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn generalized_kernels() {
        let gk = generalized_kernel_checked(&diag(&[1.0, 0.0])).unwrap();
        assert_eq!(gk.dim(), 1);
        assert_abs_diff_eq!(gk.basis()[(1, 0)].abs(), 1.0, epsilon = 1e-12);
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(generalized_kernel_checked(&nil).unwrap().dim(), 2);
        assert_eq!(generalized_kernel_checked(&diag(&[1.0, -1.0])).unwrap().dim(), 0);
    }

    #[test]
    fn kernel_split_examples() {
        let h = catalog::heisenberg_algebra();
        let d = Derivation::new(&h, diag(&[1.0, 1.0, 2.0])).unwrap();
        let ks = kernel_split(&h, &d).unwrap();
        assert_eq!((ks.g0.dim(), ks.n.dim(), ks.n0.dim()), (0, 3, 0));
        assert!(ks.report.sum_is_whole);

        let e2 = catalog::euclid_algebra();
        let d = Derivation::new(&e2, diag(&[0.0, 1.0, 1.0])).unwrap();
        let ks = kernel_split(&e2, &d).unwrap();
        assert_eq!((ks.g0.dim(), ks.n.dim(), ks.n0.dim()), (1, 2, 0));
        assert_abs_diff_eq!(ks.g0.basis()[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert!(ks.report.sum_is_whole && ks.report.g0_bracket_in_n0);

        let ab = LieAlgebra::abelian(2);
        let d = Derivation::new(&ab, DMatrix::zeros(2, 2)).unwrap();
        let ks = kernel_split(&ab, &d).unwrap();
        assert_eq!((ks.g0.dim(), ks.n.dim(), ks.n0.dim()), (2, 2, 2));
    }

    #[test]
    fn compactness_verdicts() {
        assert_eq!(n0_compactness_criterion(&Subspace::zero(3)), Compactness::Compact);
        let line = Subspace::span_vectors(3, &[DVector::from_row_slice(&[0.0, 0.0, 1.0])]);
        assert!(matches!(
            n0_compactness_criterion(&line),
            Compactness::NotCompactInModel { .. }
        ));
        let h = catalog::heisenberg_algebra();
        let d = Derivation::new(&h, DMatrix::zeros(3, 3)).unwrap();
        let ks = kernel_split(&h, &d).unwrap();
        assert!(matches!(
            n0_compactness_criterion(&ks.n0),
            Compactness::NotCompactInModel { .. }
        ));
    }

    #[test]
    fn recurrence_examples() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let g = DVector::from_row_slice(&[0.3, -0.7]);
        assert_eq!(
            elliptic_recurrence(&rot, &g, 2.0 * std::f64::consts::PI, 1e-9, 10).unwrap(),
            Some(1)
        );
        let g = DVector::from_row_slice(&[1.0, 0.0]);
        // brute-force oracle: smallest n with |n mod 2pi| small enough
        let oracle = (1..=710usize)
            .find(|&n| {
                let a = n as f64;
                ((a.cos() - 1.0).powi(2) + a.sin().powi(2)).sqrt() < 0.05
            })
            .unwrap();
        assert_eq!(oracle, 44);
        assert_eq!(elliptic_recurrence(&rot, &g, 1.0, 0.05, 710).unwrap(), Some(oracle));
        assert_eq!(
            elliptic_recurrence(&DMatrix::zeros(2, 2), &g, 1.0, 0.05, 10).unwrap(),
            Some(1)
        );
        assert!(matches!(
            elliptic_recurrence(&diag(&[1.0, 0.0]), &g, 1.0, 0.05, 10),
            Err(Error::NotElliptic(_))
        ));
    }
}
