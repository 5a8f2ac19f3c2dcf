//! Group arithmetic on the simply connected nilpotent group `(n, *)` in
//! exponential coordinates.
//!
//! The product is the Baker-Campbell-Hausdorff series, which terminates at the
//! nilpotency class. Its coefficients are generated exactly: the series
//! `log(exp(X) exp(Y))` is expanded in the truncated free associative algebra
//! on two letters with rational coefficients, and each word `w` of length `n`
//! is mapped to `(1/n) [w_1, [w_2, ..., [w_{n-1}, w_n]]]` (Dynkin-Specht-Wever),
//! which is exact because the series is a Lie element.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::algebra::{LieAlgebra, TOL_ALG};
use crate::error::{Error, Result};
use crate::linalg;

/// Largest nilpotency class with a generated BCH table.
pub const MAX_CLASS: usize = 8;

type Word = Vec<u8>;
type Series = BTreeMap<Word, BigRational>;

/// One node of the nested-bracket DAG: `letter` bracketed onto `child`.
#[derive(Debug, Clone)]
struct Node {
    letter: u8,
    child: Option<usize>,
}

/// BCH terms up to a fixed total degree, as coefficients on right-nested
/// brackets of the two arguments.
#[derive(Debug)]
pub struct BchSeries {
    degree: usize,
    nodes: Vec<Node>,
    terms: Vec<(usize, f64)>,
    exact: Vec<(Word, BigRational)>,
}

fn mul_truncated(a: &Series, b: &Series, max_degree: usize) -> Series {
    let mut out = Series::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            if wa.len() + wb.len() > max_degree {
                continue;
            }
            let mut w = wa.clone();
            w.extend_from_slice(wb);
            let entry = out.entry(w).or_insert_with(BigRational::zero);
            *entry += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn exp_letter(letter: u8, max_degree: usize) -> Series {
    let mut s = Series::new();
    let mut fact = BigInt::one();
    for n in 0..=max_degree {
        if n > 0 {
            fact *= BigInt::from(n);
        }
        s.insert(vec![letter; n], BigRational::new(BigInt::one(), fact.clone()));
    }
    s
}

impl BchSeries {
    fn generate(degree: usize) -> Self {
        let mut z = mul_truncated(&exp_letter(0, degree), &exp_letter(1, degree), degree);
        z.remove(&Vec::new());
        let mut log = Series::new();
        let mut power = z.clone();
        for n in 1..=degree {
            let sign = if n % 2 == 1 { 1 } else { -1 };
            let f = BigRational::new(BigInt::from(sign), BigInt::from(n));
            for (w, c) in &power {
                *log.entry(w.clone()).or_insert_with(BigRational::zero) += c * &f;
            }
            power = mul_truncated(&power, &z, degree);
        }
        let mut exact = Vec::new();
        for (w, c) in log {
            if c.is_zero() || w.is_empty() {
                continue;
            }
            let n = w.len();
            if n >= 2 && w[n - 1] == w[n - 2] {
                continue;
            }
            exact.push((w, c / BigRational::from_integer(BigInt::from(n))));
        }

        let mut nodes: Vec<Node> = Vec::new();
        let mut index: BTreeMap<Word, usize> = BTreeMap::new();
        let mut terms = Vec::new();
        // Insert suffixes shortest first so children precede parents.
        let mut words: Vec<&Word> = exact.iter().map(|(w, _)| w).collect();
        words.sort_by_key(|w| w.len());
        for w in words {
            for start in (0..w.len()).rev() {
                let suffix = w[start..].to_vec();
                if index.contains_key(&suffix) {
                    continue;
                }
                let child = if suffix.len() == 1 {
                    None
                } else {
                    Some(index[&suffix[1..].to_vec()])
                };
                nodes.push(Node {
                    letter: suffix[0],
                    child,
                });
                index.insert(suffix, nodes.len() - 1);
            }
        }
        for (w, c) in &exact {
            let value = c.numer().to_f64().unwrap_or(0.0) / c.denom().to_f64().unwrap_or(1.0);
            terms.push((index[w], value));
        }
        Self {
            degree,
            nodes,
            terms,
            exact,
        }
    }

    /// Cached table for total degree `degree <= MAX_CLASS`.
    pub fn for_degree(degree: usize) -> Result<&'static BchSeries> {
        static TABLES: [OnceLock<BchSeries>; MAX_CLASS + 1] = [const { OnceLock::new() }; MAX_CLASS + 1];
        if degree > MAX_CLASS {
            return Err(Error::ClassTooLarge {
                class: degree,
                max: MAX_CLASS,
            });
        }
        Ok(TABLES[degree].get_or_init(|| BchSeries::generate(degree)))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Exact coefficient of the right-nested bracket for `word` (letters
    /// 0 = x, 1 = y), or zero if absent.
    pub fn coefficient(&self, word: &[u8]) -> BigRational {
        self.exact
            .iter()
            .find(|(w, _)| w.as_slice() == word)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn evaluate(&self, g: &LieAlgebra, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut values: Vec<DVector<f64>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let letter = if node.letter == 0 { x } else { y };
            let v = match node.child {
                None => letter.clone(),
                Some(c) => g.bracket_unchecked(letter, &values[c]),
            };
            values.push(v);
        }
        let mut out = DVector::zeros(g.dim());
        for &(node, coeff) in &self.terms {
            out.axpy(coeff, &values[node], 1.0);
        }
        out
    }
}

/// `B_j / j!` for `j < count`, with `B_1 = -1/2`.
pub fn bernoulli_coefficients(count: usize) -> Vec<f64> {
    let mut b: Vec<BigRational> = Vec::with_capacity(count);
    for m in 0..count {
        if m == 0 {
            b.push(BigRational::one());
            continue;
        }
        let mut sum = BigRational::zero();
        let mut binom = BigInt::one();
        for (k, bk) in b.iter().enumerate() {
            sum += BigRational::from_integer(binom.clone()) * bk;
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        b.push(-sum / BigRational::from_integer(BigInt::from(m + 1)));
    }
    let mut fact = BigInt::one();
    b.iter()
        .enumerate()
        .map(|(j, bj)| {
            if j > 0 {
                fact *= BigInt::from(j);
            }
            let c = bj / BigRational::from_integer(fact.clone());
            c.numer().to_f64().unwrap_or(0.0) / c.denom().to_f64().unwrap_or(1.0)
        })
        .collect()
}

/// An automorphism of `n`, certified by bracket preservation.
#[derive(Debug, Clone)]
pub struct GroupAutomorphism {
    matrix: DMatrix<f64>,
    residual: f64,
}

impl GroupAutomorphism {
    /// Relative bracket-preservation residual
    /// `max |phi[e_i,e_j] - [phi e_i, phi e_j]| / max(1, |phi|^2)`.
    pub fn bracket_residual(g: &LieAlgebra, m: &DMatrix<f64>) -> f64 {
        let n = g.dim();
        let scale = linalg::spectral_norm(m).powi(2).max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let ci = m.column(i).into_owned();
            for j in (i + 1)..n {
                let cj = m.column(j).into_owned();
                let lhs = m * g.bracket_unchecked(&g.basis_vector(i), &g.basis_vector(j));
                let rhs = g.bracket_unchecked(&ci, &cj);
                worst = worst.max((lhs - rhs).norm());
            }
        }
        worst / scale
    }

    pub fn certify(g: &LieAlgebra, m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != g.dim() || m.ncols() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: m.nrows(),
            });
        }
        let residual = Self::bracket_residual(g, &m);
        if residual > TOL_ALG || m.determinant().abs() == 0.0 {
            return Err(Error::AutomorphismCertificateFailed { residual });
        }
        Ok(Self {
            matrix: m,
            residual,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// `|det(phi - I)|`.
    pub fn det_gap(&self) -> f64 {
        let n = self.matrix.nrows();
        (&self.matrix - DMatrix::identity(n, n)).determinant().abs()
    }

    /// `1e-8 (1 + |phi|)`.
    pub fn det_threshold(&self) -> f64 {
        det_threshold(&self.matrix)
    }
}

fn det_threshold(m: &DMatrix<f64>) -> f64 {
    1e-8 * (1.0 + linalg::spectral_norm(m))
}

/// Center and quotient data for one level of the inversion recursion.
#[derive(Debug, Clone)]
struct CenterLayer {
    center: DMatrix<f64>,
    projection: DMatrix<f64>,
    complement: DMatrix<f64>,
    quotient: Box<NilGroup>,
}

/// The group `(n, *)` for a nilpotent algebra `n`.
#[derive(Debug, Clone)]
pub struct NilGroup {
    algebra: LieAlgebra,
    class: usize,
    series: &'static BchSeries,
    field_coefficients: Vec<f64>,
    layer: Option<CenterLayer>,
}

impl NilGroup {
    pub fn new(algebra: LieAlgebra) -> Result<Self> {
        let class = algebra.nilpotency_class().ok_or(Error::NotNilpotent)?;
        let series = BchSeries::for_degree(class)?;
        let layer = if algebra.is_abelian() {
            None
        } else {
            let center = algebra.center();
            let q = algebra.quotient(&center)?;
            Some(CenterLayer {
                center: center.basis().clone(),
                projection: q.projection,
                complement: q.complement,
                quotient: Box::new(NilGroup::new(q.algebra)?),
            })
        };
        Ok(Self {
            field_coefficients: bernoulli_coefficients(class.max(1)),
            algebra,
            class,
            series,
            layer,
        })
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn identity(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    /// `x * y` by the BCH series truncated at the nilpotency class.
    pub fn product(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.series.evaluate(&self.algebra, x, y)
    }

    pub fn checked_product(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        for v in [x, y] {
            if v.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: v.len(),
                });
            }
        }
        Ok(self.product(x, y))
    }

    pub fn inverse(&self, x: &DVector<f64>) -> DVector<f64> {
        -x
    }

    /// Right-invariant field `Z(x) = d/ds|0 (sZ) * x = sum_j c_j ad(x)^j Z`.
    pub fn right_invariant_field(&self, z: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let mut term = z.clone();
        let mut out = z * self.field_coefficients[0];
        for &c in &self.field_coefficients[1..] {
            term = self.algebra.bracket_unchecked(x, &term);
            if c != 0.0 {
                out.axpy(c, &term, 1.0);
            }
        }
        out
    }

    pub fn field_coefficients(&self) -> &[f64] {
        &self.field_coefficients
    }

    /// `f_phi(x) = x * phi(x)^{-1}`.
    pub fn f_phi_apply(&self, phi: &GroupAutomorphism, x: &DVector<f64>) -> DVector<f64> {
        self.product(x, &-(phi.matrix() * x))
    }

    /// The unique `x` with `f_phi(x) = y`, by recursion over the center.
    pub fn f_phi_invert(&self, phi: &GroupAutomorphism, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.invert_matrix(phi.matrix(), y)
    }

    fn invert_matrix(&self, phi: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        let one_minus = DMatrix::identity(n, n) - phi;
        let gap = one_minus.determinant().abs();
        let threshold = det_threshold(phi);
        if gap <= threshold {
            return Err(Error::DetGapTooSmall { gap, threshold });
        }
        let Some(layer) = &self.layer else {
            return one_minus
                .lu()
                .solve(y)
                .ok_or(Error::DetGapTooSmall { gap, threshold });
        };
        let phi_hat = &layer.projection * phi * &layer.complement;
        let y_hat = &layer.projection * y;
        let x_hat = layer.quotient.invert_matrix(&phi_hat, &y_hat)?;
        let x1 = &layer.complement * x_hat;
        let f1 = self.product(&x1, &-(phi * &x1));
        let r = self.product(&-f1, y);
        let z = &layer.center;
        let off_center = (&r - z * (z.transpose() * &r)).norm();
        if off_center > 1e-9 * (1.0 + y.norm()) {
            return Err(Error::ResidualNotCentral {
                residual: off_center,
            });
        }
        let phi_z = z.transpose() * phi * z;
        let c = z.ncols();
        let w_c = (DMatrix::identity(c, c) - phi_z)
            .lu()
            .solve(&(z.transpose() * &r))
            .ok_or(Error::DetGapTooSmall { gap, threshold })?;
        Ok(self.product(&x1, &(z * w_c)))
    }

    /// Pointwise inversion along a sampled curve of automorphisms and targets,
    /// with a continuity scan of the output.
    pub fn curve_invert(&self, phis: &[GroupAutomorphism], ys: &[DVector<f64>]) -> CurveInversion {
        let points: Vec<std::result::Result<DVector<f64>, String>> = phis
            .iter()
            .zip(ys)
            .map(|(p, y)| self.f_phi_invert(p, y).map_err(|e| e.to_string()))
            .collect();
        let mut ratios = Vec::new();
        let mut max_jump: f64 = 0.0;
        for i in 1..points.len() {
            if let (Ok(a), Ok(b)) = (&points[i - 1], &points[i]) {
                let jump = (b - a).norm();
                max_jump = max_jump.max(jump);
                let step = (phis[i].matrix() - phis[i - 1].matrix()).norm() + (&ys[i] - &ys[i - 1]).norm();
                if step > 0.0 {
                    ratios.push(jump / step);
                } else if jump > 1e-9 {
                    ratios.push(f64::INFINITY);
                }
            }
        }
        let lipschitz_estimate = ratios.iter().cloned().fold(0.0, f64::max);
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted.get(sorted.len() / 2).copied().unwrap_or(0.0);
        // A jump is flagged when it exceeds ten times the typical local slope.
        let continuous = ratios.iter().all(|&r| r.is_finite() && r <= 10.0 * median + 1e-9);
        CurveInversion {
            points,
            max_jump,
            lipschitz_estimate,
            continuous,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveInversion {
    #[serde(skip)]
    pub points: Vec<std::result::Result<DVector<f64>, String>>,
    pub max_jump: f64,
    pub lipschitz_estimate: f64,
    pub continuous: bool,
}

impl CurveInversion {
    pub fn errors(&self) -> Vec<(usize, &str)> {
        self.points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.as_ref().err().map(|e| (i, e.as_str())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, diag};
    use approx::assert_abs_diff_eq;
    use num_traits::FromPrimitive;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn bch_low_degree_coefficients() {
        let s = BchSeries::for_degree(3).unwrap();
        // x + y + 1/2[x,y] + 1/12[x,[x,y]] - 1/12[y,[x,y]] expressed on
        // right-nested words: [x,y] gets 1/4 from xy and 1/4 from yx.
        assert_eq!(s.coefficient(&[0]), rat(1, 1));
        assert_eq!(s.coefficient(&[1]), rat(1, 1));
        assert_eq!(s.coefficient(&[0, 1]), rat(1, 4));
        assert_eq!(s.coefficient(&[1, 0]), rat(-1, 4));
        assert!(s.coefficient(&[0, 0]).is_zero());
    }

    #[test]
    fn bernoulli_convention() {
        let c = bernoulli_coefficients(5);
        assert_eq!(c[0], 1.0);
        assert_eq!(c[1], -0.5);
        assert_abs_diff_eq!(c[2], 1.0 / 12.0, epsilon = 1e-16);
        assert_eq!(c[3], 0.0);
        assert_abs_diff_eq!(c[4], -1.0 / 720.0, epsilon = 1e-16);
        let _ = BigRational::from_i64(1);
    }

    #[test]
    fn heisenberg_products() {
        let g = NilGroup::new(catalog::heisenberg_algebra()).unwrap();
        assert_eq!(g.product(&v(&[1., 0., 0.]), &v(&[0., 1., 0.])), v(&[1., 1., 0.5]));
        let x = v(&[0.3, -1.2, 2.0]);
        assert_eq!(g.product(&x, &g.identity()), x);
        assert!(g.product(&x, &g.inverse(&x)).norm() < 1e-15);
        assert_eq!(g.inverse(&v(&[1., 2., 3.])), v(&[-1., -2., -3.]));
    }

    #[test]
    fn unsupported_class_is_rejected() {
        assert!(matches!(
            BchSeries::for_degree(MAX_CLASS + 1),
            Err(Error::ClassTooLarge { .. })
        ));
        assert!(matches!(
            NilGroup::new(catalog::euclid_algebra()),
            Err(Error::NotNilpotent)
        ));
    }

    #[test]
    fn field_examples() {
        let g = NilGroup::new(catalog::heisenberg_algebra()).unwrap();
        let f = g.right_invariant_field(&v(&[1., 0., 0.]), &v(&[0., 1., 0.]));
        assert_eq!(f, v(&[1., 0., 0.5]));
        let z = v(&[0.2, -0.4, 1.0]);
        assert_eq!(g.right_invariant_field(&z, &g.identity()), z);
        let ab = NilGroup::new(LieAlgebra::abelian(2)).unwrap();
        assert_eq!(ab.right_invariant_field(&v(&[1., 2.]), &v(&[5., 6.])), v(&[1., 2.]));
    }

    #[test]
    fn f_phi_examples() {
        let ab = NilGroup::new(LieAlgebra::abelian(2)).unwrap();
        let phi = GroupAutomorphism::certify(ab.algebra(), diag(&[2.0, 2.0])).unwrap();
        assert_eq!(ab.f_phi_apply(&phi, &v(&[1., -3.])), v(&[-1., 3.]));

        let h = NilGroup::new(catalog::heisenberg_algebra()).unwrap();
        let phi = GroupAutomorphism::certify(h.algebra(), diag(&[2.0, 2.0, 4.0])).unwrap();
        assert_eq!(h.f_phi_apply(&phi, &h.identity()), h.identity());
        assert_eq!(h.f_phi_apply(&phi, &v(&[1., 0., 0.])), v(&[-1., 0., 0.]));
        let x = h.f_phi_invert(&phi, &v(&[1., 0., 0.])).unwrap();
        assert!((x - v(&[-1., 0., 0.])).norm() < 1e-14);
        assert_eq!(h.f_phi_invert(&phi, &h.identity()).unwrap(), h.identity());

        let line = NilGroup::new(LieAlgebra::abelian(1)).unwrap();
        let phi = GroupAutomorphism::certify(line.algebra(), diag(&[2.0])).unwrap();
        assert_abs_diff_eq!(line.f_phi_invert(&phi, &v(&[5.0])).unwrap()[0], -5.0);
    }

    #[test]
    fn det_gap_guard() {
        let h = NilGroup::new(catalog::heisenberg_algebra()).unwrap();
        let phi = GroupAutomorphism::certify(h.algebra(), diag(&[1.0, 2.0, 2.0])).unwrap();
        assert!(matches!(
            h.f_phi_invert(&phi, &v(&[1., 1., 1.])),
            Err(Error::DetGapTooSmall { .. })
        ));
    }

    #[test]
    fn non_automorphism_rejected() {
        let h = catalog::heisenberg_algebra();
        assert!(matches!(
            GroupAutomorphism::certify(&h, diag(&[2.0, 2.0, 2.0])),
            Err(Error::AutomorphismCertificateFailed { .. })
        ));
    }

    #[test]
    fn constant_and_abelian_curves() {
        let ab = NilGroup::new(LieAlgebra::abelian(1)).unwrap();
        let ts: Vec<f64> = (0..=20).map(|i| 1.0 + i as f64 / 20.0).collect();
        let phis: Vec<_> = ts
            .iter()
            .map(|t| GroupAutomorphism::certify(ab.algebra(), diag(&[1.0 + t])).unwrap())
            .collect();
        let ys: Vec<_> = ts.iter().map(|t| v(&[*t])).collect();
        let out = ab.curve_invert(&phis, &ys);
        assert!(out.errors().is_empty());
        for p in &out.points {
            assert_abs_diff_eq!(p.as_ref().unwrap()[0], -1.0, epsilon = 1e-12);
        }
        assert!(out.max_jump < 1e-12);

        let h = NilGroup::new(catalog::heisenberg_algebra()).unwrap();
        let phi = GroupAutomorphism::certify(h.algebra(), diag(&[2.0, 3.0, 6.0])).unwrap();
        let y = v(&[0.5, 1.0, -1.0]);
        let out = h.curve_invert(&vec![phi; 5], &vec![y; 5]);
        assert!(out.max_jump < 1e-14 && out.continuous);
    }
}
