//! Polynomial vector fields on `R^n` and their Lie brackets.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::algebra::LieAlgebra;

/// Coefficients below this magnitude are dropped after every operation.
const PRUNE: f64 = 1e-14;

type Exponent = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponent, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    fn add_term(&mut self, e: Exponent, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(e).or_insert(0.0);
        *entry += c;
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, c| c.abs() > PRUNE);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &f64)> {
        self.terms.iter()
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out.pruned()
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * s)).collect(),
        }
        .pruned()
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out.pruned()
    }

    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[i] -= 1;
            out.add_term(d, c * e[i] as f64);
        }
        out.pruned()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(*c, |acc, (i, &p)| acc * x[i].powi(p as i32))
            })
            .sum()
    }
}

/// A vector field with polynomial components.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    components: Vec<Polynomial>,
}

impl PolyField {
    pub fn zero(n: usize) -> Self {
        Self {
            components: vec![Polynomial::zero(n); n],
        }
    }

    pub fn from_components(components: Vec<Polynomial>) -> Self {
        Self { components }
    }

    /// `x -> m x`.
    pub fn linear(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let components = (0..n)
            .map(|k| {
                (0..n).fold(Polynomial::zero(n), |acc, i| {
                    acc.add(&Polynomial::variable(n, i).scale(m[(k, i)]))
                })
            })
            .collect();
        Self { components }
    }

    pub fn constant(v: &DVector<f64>) -> Self {
        let n = v.len();
        Self {
            components: v.iter().map(|&c| Polynomial::constant(n, c)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn add(&self, other: &PolyField) -> PolyField {
        PolyField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> PolyField {
        PolyField {
            components: self.components.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// `[f, g] = Dg f - Df g`.
    pub fn bracket(&self, g: &PolyField) -> PolyField {
        let n = self.dim();
        let components = (0..n)
            .map(|k| {
                let mut acc = Polynomial::zero(n);
                for i in 0..n {
                    acc = acc.add(&self.components[i].mul(&g.components[k].derivative(i)));
                    acc = acc.add(&g.components[i].mul(&self.components[k].derivative(i)).scale(-1.0));
                }
                acc
            })
            .collect();
        PolyField { components }
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.components.iter().map(|p| p.eval(x)))
    }

    /// Embeds a field on the last `self.dim()` coordinates of `R^{offset + dim}`.
    pub fn embed(&self, offset: usize) -> PolyField {
        let n = offset + self.dim();
        let shift = |p: &Polynomial| {
            let mut out = Polynomial::zero(n);
            for (e, c) in p.terms() {
                let mut ee = vec![0; offset];
                ee.extend_from_slice(e);
                out.add_term(ee, *c);
            }
            out
        };
        let mut components = vec![Polynomial::zero(n); offset];
        components.extend(self.components.iter().map(shift));
        PolyField { components }
    }

    /// Stacks a field on the first coordinates with one on the rest.
    pub fn stack(first: &PolyField, second: &PolyField) -> PolyField {
        let k = first.dim();
        let lifted_first = PolyField {
            components: first
                .components
                .iter()
                .map(|p| {
                    let mut out = Polynomial::zero(k + second.dim());
                    for (e, c) in p.terms() {
                        let mut ee = e.clone();
                        ee.extend(std::iter::repeat(0).take(second.dim()));
                        out.add_term(ee, *c);
                    }
                    out
                })
                .chain((0..second.dim()).map(|_| Polynomial::zero(k + second.dim())))
                .collect(),
        };
        lifted_first.add(&second.embed(k))
    }
}

/// Right-invariant field `x -> sum_j c_j ad(x)^j z` as a polynomial field.
pub fn right_invariant_poly(g: &LieAlgebra, coefficients: &[f64], z: &DVector<f64>) -> PolyField {
    let n = g.dim();
    let mut term = PolyField::constant(z);
    let mut out = term.scale(coefficients[0]);
    for &c in &coefficients[1..] {
        // [x, w]_k = sum_{i,l} c_ilk x_i w_l
        let components = (0..n)
            .map(|k| {
                let mut acc = Polynomial::zero(n);
                for i in 0..n {
                    for l in 0..n {
                        let s = g.constant(i, l, k);
                        if s != 0.0 {
                            acc = acc.add(&Polynomial::variable(n, i).mul(&term.components[l]).scale(s));
                        }
                    }
                }
                acc
            })
            .collect();
        term = PolyField { components };
        if c != 0.0 {
            out = out.add(&term.scale(c));
        }
    }
    out
}

/// Incremental linear-independence test on polynomial fields, via
/// Gram-Schmidt on their coefficient vectors.
#[derive(Debug, Default)]
pub struct IndependentSet {
    index: BTreeMap<(usize, Exponent), usize>,
    basis: Vec<Vec<f64>>,
}

impl IndependentSet {
    fn coefficients(&mut self, f: &PolyField) -> Vec<f64> {
        for (k, p) in f.components().iter().enumerate() {
            for (e, _) in p.terms() {
                let next = self.index.len();
                self.index.entry((k, e.clone())).or_insert(next);
            }
        }
        let mut v = vec![0.0; self.index.len()];
        for (k, p) in f.components().iter().enumerate() {
            for (e, c) in p.terms() {
                v[self.index[&(k, e.clone())]] = *c;
            }
        }
        v
    }

    /// Adds `f` if it is independent of the fields accepted so far.
    pub fn insert(&mut self, f: &PolyField, tol: f64) -> bool {
        let mut v = self.coefficients(f);
        let norm0 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for b in &self.basis {
                let dot: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= dot * bi;
                }
            }
        }
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm <= tol * norm0 {
            return false;
        }
        for c in v.iter_mut() {
            *c /= norm;
        }
        let len = self.index.len();
        for b in self.basis.iter_mut() {
            b.resize(len, 0.0);
        }
        self.basis.push(v);
        true
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::nilgroup::bernoulli_coefficients;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn brackets_of_linear_fields_match_commutators() {
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        let b = DMatrix::from_row_slice(2, 2, &[0., 0., 1., 0.]);
        let br = PolyField::linear(&a).bracket(&PolyField::linear(&b));
        // [Ax, Bx] as fields is (BA - AB) x.
        assert_eq!(br, PolyField::linear(&(&b * &a - &a * &b)));
    }

    #[test]
    fn right_invariant_polynomial_matches_series() {
        let h = catalog::heisenberg_algebra();
        let c = bernoulli_coefficients(2);
        let f = right_invariant_poly(&h, &c, &v(&[1., 0., 0.]));
        assert_eq!(f.eval(&v(&[0., 1., 0.])), v(&[1., 0., 0.5]));
        assert_eq!(f.components()[2].degree(), 1);
    }

    #[test]
    fn independence() {
        let mut set = IndependentSet::default();
        let f = PolyField::constant(&v(&[1., 0.]));
        assert!(set.insert(&f, 1e-9));
        assert!(!set.insert(&f.scale(3.0), 1e-9));
        assert!(set.insert(&PolyField::linear(&DMatrix::identity(2, 2)), 1e-9));
        assert!(!set.insert(&PolyField::zero(2), 1e-9));
        assert_eq!(set.len(), 2);
    }

    #[test]
    fn stacking() {
        let f = PolyField::stack(&PolyField::constant(&v(&[2.0])), &PolyField::linear(&DMatrix::identity(2, 2)));
        assert_eq!(f.eval(&v(&[9., 1., -1.])), v(&[2., 1., -1.]));
    }
}
