//! Piecewise-constant control laws and the solutions of the affine systems on
//! `(n, *)`, their products with linear systems on a vector space, the
//! semidirect coordinates of a solvable system, and time rescaling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{LieAlgebra, Subspace};
use crate::derivation::{kernel_split, Derivation, KernelSplit};
use crate::error::{Error, Result};
use crate::linalg;
use crate::nilgroup::{GroupAutomorphism, NilGroup};
use crate::poly::{right_invariant_poly, PolyField};

/// Agreement required between successive RK4 refinements.
pub const RK4_AGREEMENT: f64 = 1e-9;
const MAX_RK4_STEPS: usize = 1 << 22;
/// Fixed RK4 step of the search integrator.
const FAST_STEP: f64 = 0.02;

/// The box `prod [-rho_j, rho_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlRange {
    radii: Vec<f64>,
}

impl ControlRange {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidLaw(format!("control radius {r} is not positive")));
        }
        Ok(Self { radii })
    }

    pub fn uniform(m: usize, radius: f64) -> Result<Self> {
        Self::new(vec![radius; m])
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn channels(&self) -> usize {
        self.radii.len()
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.radii.len()
            && values
                .iter()
                .zip(&self.radii)
                .all(|(v, r)| v.is_finite() && v.abs() <= r * (1.0 + 1e-12))
    }

    pub fn clamp(&self, values: &mut [f64]) {
        for (v, r) in values.iter_mut().zip(&self.radii) {
            *v = v.clamp(-r, *r);
        }
    }

    /// Uniform sample of `scale * Omega`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Vec<f64> {
        self.radii
            .iter()
            .map(|r| scale * r * rng.gen_range(-1.0..=1.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub duration: f64,
    pub values: Vec<f64>,
}

/// A piecewise-constant law on `[0, S]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlLaw {
    pieces: Vec<Piece>,
}

impl ControlLaw {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        for p in &pieces {
            if !(p.duration.is_finite() && p.duration > 0.0) {
                return Err(Error::InvalidLaw(format!("duration {} is not positive", p.duration)));
            }
            if p.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidLaw("non-finite control value".into()));
            }
        }
        Ok(Self { pieces })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn constant(values: Vec<f64>, duration: f64) -> Result<Self> {
        Self::new(vec![Piece { duration, values }])
    }

    pub fn zero(channels: usize, duration: f64) -> Result<Self> {
        Self::constant(vec![0.0; channels], duration)
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.pieces.iter().map(|p| p.duration).sum()
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &ControlLaw) -> ControlLaw {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        ControlLaw { pieces }
    }

    /// The first `k` pieces.
    pub fn prefix(&self, k: usize) -> ControlLaw {
        ControlLaw {
            pieces: self.pieces[..k.min(self.pieces.len())].to_vec(),
        }
    }

    pub fn validate(&self, range: &ControlRange) -> Result<()> {
        for p in &self.pieces {
            if !range.contains(&p.values) {
                return Err(Error::InvalidLaw(format!(
                    "values {:?} outside the control range {:?}",
                    p.values,
                    range.radii()
                )));
            }
        }
        Ok(())
    }

    /// Value at time `t` (right-continuous; the last value past the end).
    pub fn value_at(&self, t: f64) -> Option<&[f64]> {
        let mut acc = 0.0;
        for p in &self.pieces {
            acc += p.duration;
            if t < acc {
                return Some(&p.values);
            }
        }
        self.pieces.last().map(|p| p.values.as_slice())
    }

    /// `(signed duration, values)` in application order.
    pub(crate) fn signed_pieces(&self, direction: Direction) -> Vec<(f64, &[f64])> {
        match direction {
            Direction::Forward => self.pieces.iter().map(|p| (p.duration, p.values.as_slice())).collect(),
            Direction::Backward => self
                .pieces
                .iter()
                .rev()
                .map(|p| (-p.duration, p.values.as_slice()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    /// Inverse of the forward flow: points steered onto the base point.
    Backward,
}

/// A system whose state can be advanced along piecewise-constant laws.
pub trait ControlledSystem: Sync {
    fn state_dim(&self) -> usize;

    fn range(&self) -> &ControlRange;

    /// Flow over one constant piece of signed duration `t`.
    fn step(&self, x: &DVector<f64>, values: &[f64], t: f64) -> Result<DVector<f64>>;

    /// Cheaper approximation of [`ControlledSystem::step`] for searches whose
    /// results are re-verified with `step`.
    fn step_fast(&self, x: &DVector<f64>, values: &[f64], t: f64) -> Result<DVector<f64>> {
        self.step(x, values, t)
    }

    /// Drift `f_0` followed by the control fields `f_1, ..., f_m`.
    fn vector_fields(&self) -> Vec<PolyField>;

    fn advance(&self, x: &DVector<f64>, u: &ControlLaw, direction: Direction) -> Result<DVector<f64>> {
        let mut state = x.clone();
        for (t, values) in u.signed_pieces(direction) {
            state = self.step(&state, values, t)?;
        }
        Ok(state)
    }

    /// States after each piece, starting with `x`.
    fn advance_path(
        &self,
        x: &DVector<f64>,
        u: &ControlLaw,
        direction: Direction,
    ) -> Result<Vec<DVector<f64>>> {
        let mut path = vec![x.clone()];
        for (t, values) in u.signed_pieces(direction) {
            let next = self.step(path.last().expect("non-empty"), values, t)?;
            path.push(next);
        }
        Ok(path)
    }
}

/// One classical RK4 pass with `n` equal steps.
fn rk4<F: Fn(&DVector<f64>) -> DVector<f64>>(f: &F, x0: &DVector<f64>, t: f64, n: usize) -> DVector<f64> {
    let h = t / n as f64;
    let mut x = x0.clone();
    for _ in 0..n {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

/// RK4 with step `min(|t|/32, 1e-2)`, halved until two successive results
/// agree to `RK4_AGREEMENT`.
pub fn rk4_adaptive<F: Fn(&DVector<f64>) -> DVector<f64>>(
    f: &F,
    x0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    if t == 0.0 {
        return Ok(x0.clone());
    }
    let h0 = (t.abs() / 32.0).min(1e-2);
    let mut n = (t.abs() / h0).ceil() as usize;
    let mut prev = rk4(f, x0, t, n);
    loop {
        n *= 2;
        if n > MAX_RK4_STEPS {
            return Err(Error::StepSizeUnderflow { t });
        }
        let cur = rk4(f, x0, t, n);
        let diff = (&cur - &prev).norm();
        if !diff.is_finite() {
            return Err(Error::StepSizeUnderflow { t });
        }
        if diff <= RK4_AGREEMENT * cur.norm().max(1.0) {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// `x' = D(u) x + sum_j u_j Z_j(x)` on `(n, *)` with
/// `D(u) = D_0 + sign * sum_j u_j D_j`.
#[derive(Debug, Clone)]
pub struct SigmaASystem {
    group: NilGroup,
    d0: Derivation,
    dj: Vec<Derivation>,
    zj: Vec<DVector<f64>>,
    range: ControlRange,
    sign: f64,
}

impl SigmaASystem {
    /// `dj` may be empty, meaning every `D_j = 0`.
    pub fn new(
        algebra: LieAlgebra,
        d0: DMatrix<f64>,
        dj: Vec<DMatrix<f64>>,
        zj: Vec<DVector<f64>>,
        range: ControlRange,
        sign: i32,
    ) -> Result<Self> {
        let n = algebra.dim();
        let m = zj.len();
        if range.channels() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: range.channels(),
            });
        }
        if !dj.is_empty() && dj.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: dj.len(),
            });
        }
        if let Some(z) = zj.iter().find(|z| z.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: z.len(),
            });
        }
        if sign != 1 && sign != -1 {
            return Err(Error::Parse(format!("sign convention must be +1 or -1, got {sign}")));
        }
        let d0 = Derivation::new(&algebra, d0)?;
        let dj = if dj.is_empty() {
            vec![DMatrix::zeros(n, n); m]
        } else {
            dj
        };
        let dj = dj
            .into_iter()
            .map(|d| Derivation::new(&algebra, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            group: NilGroup::new(algebra)?,
            d0,
            dj,
            zj,
            range,
            sign: sign as f64,
        })
    }

    pub fn group(&self) -> &NilGroup {
        &self.group
    }

    pub fn algebra(&self) -> &LieAlgebra {
        self.group.algebra()
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    pub fn controls(&self) -> usize {
        self.zj.len()
    }

    pub fn d0(&self) -> &Derivation {
        &self.d0
    }

    pub fn dj(&self) -> &[Derivation] {
        &self.dj
    }

    pub fn zj(&self) -> &[DVector<f64>] {
        &self.zj
    }

    pub fn sign(&self) -> i32 {
        self.sign as i32
    }

    pub fn control_range(&self) -> &ControlRange {
        &self.range
    }

    pub fn drift_matrix(&self, u: &[f64]) -> DMatrix<f64> {
        let mut m = self.d0.matrix().clone();
        for (uj, d) in u.iter().zip(&self.dj) {
            if *uj != 0.0 {
                m += d.matrix() * (self.sign * uj);
            }
        }
        m
    }

    pub fn field(&self, x: &DVector<f64>, u: &[f64]) -> DVector<f64> {
        let mut out = self.drift_matrix(u) * x;
        for (uj, z) in u.iter().zip(&self.zj) {
            if *uj != 0.0 {
                out.axpy(*uj, &self.group.right_invariant_field(z, x), 1.0);
            }
        }
        out
    }

    fn check_law(&self, u: &ControlLaw) -> Result<()> {
        if let Some(p) = u.pieces().iter().find(|p| p.values.len() != self.controls()) {
            return Err(Error::DimensionMismatch {
                expected: self.controls(),
                found: p.values.len(),
            });
        }
        Ok(())
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Flow of `x' = F(x)` over one piece, starting anywhere.
    fn piece_flow(&self, x0: &DVector<f64>, u: &[f64], t: f64) -> Result<DVector<f64>> {
        let m = self.drift_matrix(u);
        if u.iter().all(|v| *v == 0.0) {
            return Ok((m * t).exp() * x0);
        }
        if self.algebra().is_abelian() {
            // Affine right-hand side: exponential of the augmented matrix.
            let n = self.dim();
            let mut aug = DMatrix::zeros(n + 1, n + 1);
            aug.view_mut((0, 0), (n, n)).copy_from(&m);
            let mut b = DVector::zeros(n);
            for (uj, z) in u.iter().zip(&self.zj) {
                b.axpy(*uj, z, 1.0);
            }
            aug.view_mut((0, n), (n, 1)).copy_from(&b);
            let e = (aug * t).exp();
            return Ok(e.view((0, 0), (n, n)) * x0 + e.view((0, n), (n, 1)).column(0));
        }
        let zs: Vec<(f64, &DVector<f64>)> = u
            .iter()
            .zip(&self.zj)
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, z)| (*v, z))
            .collect();
        let f = |x: &DVector<f64>| {
            let mut out = &m * x;
            for (uj, z) in &zs {
                out.axpy(*uj, &self.group.right_invariant_field(z, x), 1.0);
            }
            out
        };
        rk4_adaptive(&f, x0, t)
    }

    fn flow_b_signed(&self, u: &ControlLaw, direction: Direction) -> DMatrix<f64> {
        let n = self.dim();
        let mut phi = DMatrix::identity(n, n);
        for (t, values) in u.signed_pieces(direction) {
            phi = (self.drift_matrix(values) * t).exp() * phi;
        }
        phi
    }

    /// `Phi^B = exp(t_r D(u_r)) ... exp(t_1 D(u_1))`, certified.
    pub fn flow_b(&self, u: &ControlLaw) -> Result<GroupAutomorphism> {
        self.check_law(u)?;
        GroupAutomorphism::certify(self.algebra(), self.flow_b_signed(u, Direction::Forward))
    }

    fn from_identity_signed(&self, u: &ControlLaw, direction: Direction) -> Result<DVector<f64>> {
        let mut a = self.group.identity();
        for (t, values) in u.signed_pieces(direction) {
            let p = self.piece_flow(&self.group.identity(), values, t)?;
            let moved = (self.drift_matrix(values) * t).exp() * a;
            a = self.group.product(&p, &moved);
        }
        Ok(a)
    }

    /// `phi^A(S, 0, u)`, one RK4 solve per piece composed by the cocycle.
    pub fn solve_from_identity(&self, u: &ControlLaw) -> Result<DVector<f64>> {
        self.check_law(u)?;
        self.from_identity_signed(u, Direction::Forward)
    }

    /// `phi^A(S, x, u) = phi^A(S, 0, u) * Phi^B(x)`.
    pub fn solve(&self, x: &DVector<f64>, u: &ControlLaw) -> Result<DVector<f64>> {
        self.solve_directed(x, u, Direction::Forward)
    }

    pub fn solve_directed(&self, x: &DVector<f64>, u: &ControlLaw, direction: Direction) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_law(u)?;
        let a = self.from_identity_signed(u, direction)?;
        Ok(self.group.product(&a, &(self.flow_b_signed(u, direction) * x)))
    }

    /// Piece-by-piece RK4 integration from `x` without the cocycle.
    pub fn integrate_direct(&self, x: &DVector<f64>, u: &ControlLaw) -> Result<DVector<f64>> {
        self.check_point(x)?;
        self.check_law(u)?;
        let mut state = x.clone();
        for p in u.pieces() {
            let m = self.drift_matrix(&p.values);
            let f = |y: &DVector<f64>| {
                let mut out = &m * y;
                for (uj, z) in p.values.iter().zip(&self.zj) {
                    if *uj != 0.0 {
                        out.axpy(*uj, &self.group.right_invariant_field(z, y), 1.0);
                    }
                }
                out
            };
            state = rk4_adaptive(&f, &state, p.duration)?;
        }
        Ok(state)
    }

    /// Samples `(t, x(t))` with `per_piece` points inside every piece.
    pub fn trajectory(&self, x: &DVector<f64>, u: &ControlLaw, per_piece: usize) -> Result<Vec<(f64, DVector<f64>)>> {
        self.check_point(x)?;
        self.check_law(u)?;
        let per_piece = per_piece.max(1);
        let mut out = vec![(0.0, x.clone())];
        let mut t0 = 0.0;
        let mut state = x.clone();
        for p in u.pieces() {
            let dt = p.duration / per_piece as f64;
            for k in 1..=per_piece {
                state = self.piece_flow(&state, &p.values, dt)?;
                out.push((t0 + dt * k as f64, state.clone()));
            }
            t0 += p.duration;
        }
        Ok(out)
    }
}

impl ControlledSystem for SigmaASystem {
    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn range(&self) -> &ControlRange {
        &self.range
    }

    fn step(&self, x: &DVector<f64>, values: &[f64], t: f64) -> Result<DVector<f64>> {
        let p = self.piece_flow(&self.group.identity(), values, t)?;
        Ok(self.group.product(&p, &((self.drift_matrix(values) * t).exp() * x)))
    }

    fn step_fast(&self, x: &DVector<f64>, values: &[f64], t: f64) -> Result<DVector<f64>> {
        if values.iter().all(|v| *v == 0.0) || self.algebra().is_abelian() {
            return self.piece_flow(x, values, t);
        }
        let n = ((t.abs() / FAST_STEP).ceil() as usize).max(4);
        Ok(rk4(&|y: &DVector<f64>| self.field(y, values), x, t, n))
    }

    fn vector_fields(&self) -> Vec<PolyField> {
        let coeffs = self.group.field_coefficients();
        let mut out = vec![PolyField::linear(self.d0.matrix())];
        for (d, z) in self.dj.iter().zip(&self.zj) {
            let f = PolyField::linear(&(d.matrix() * self.sign))
                .add(&right_invariant_poly(self.algebra(), coeffs, z));
            out.push(f);
        }
        out
    }
}

/// `v' = A v + sum_j u_j b_j` on `V` times an inner system on `n`.
#[derive(Debug, Clone)]
pub struct ProductSystem {
    a: DMatrix<f64>,
    b: Vec<DVector<f64>>,
    inner: SigmaASystem,
}

impl ProductSystem {
    pub fn new(a: DMatrix<f64>, b: Vec<DVector<f64>>, inner: SigmaASystem) -> Result<Self> {
        let k = a.nrows();
        if a.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: a.ncols(),
            });
        }
        if b.len() != inner.controls() {
            return Err(Error::DimensionMismatch {
                expected: inner.controls(),
                found: b.len(),
            });
        }
        if let Some(v) = b.iter().find(|v| v.len() != k) {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: v.len(),
            });
        }
        let mut p = DMatrix::identity(k, k);
        for _ in 0..k {
            p = &p * &a;
        }
        let residual = linalg::max_abs(&p);
        if residual > 1e-9 * linalg::max_abs(&a).max(1.0).powi(k as i32) {
            return Err(Error::ANotNilpotent { residual });
        }
        Ok(Self { a, b, inner })
    }

    pub fn v_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[DVector<f64>] {
        &self.b
    }

    pub fn inner(&self) -> &SigmaASystem {
        &self.inner
    }

    pub fn join(&self, v: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(v.len() + x.len(), v.iter().chain(x.iter()).cloned())
    }

    pub fn split(&self, state: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let k = self.v_dim();
        (
            state.rows(0, k).into_owned(),
            state.rows(k, state.len() - k).into_owned(),
        )
    }

    /// Exact flow of the `V` component over one piece of signed duration `t`:
    /// `e^{tA} v + sum_k t^{k+1} A^k / (k+1)! B u`.
    pub fn v_step(&self, v: &DVector<f64>, values: &[f64], t: f64) -> DVector<f64> {
        let k = self.v_dim();
        let mut bu = DVector::zeros(k);
        for (uj, bj) in values.iter().zip(&self.b) {
            bu.axpy(*uj, bj, 1.0);
        }
        let mut exp_v = v.clone();
        let mut forced = DVector::zeros(k);
        let mut term_v = v.clone();
        let mut term_b = bu * t;
        forced += &term_b;
        for j in 1..=k {
            term_v = &self.a * term_v * (t / j as f64);
            exp_v += &term_v;
            term_b = &self.a * term_b * (t / (j + 1) as f64);
            forced += &term_b;
        }
        exp_v + forced
    }

    pub fn solve(&self, v: &DVector<f64>, x: &DVector<f64>, u: &ControlLaw) -> Result<(DVector<f64>, DVector<f64>)> {
        if v.len() != self.v_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.v_dim(),
                found: v.len(),
            });
        }
        let mut vv = v.clone();
        for p in u.pieces() {
            vv = self.v_step(&vv, &p.values, p.duration);
        }
        Ok((vv, self.inner.solve(x, u)?))
    }
}

impl ControlledSystem for ProductSystem {
    fn state_dim(&self) -> usize {
        self.v_dim() + self.inner.dim()
    }

    fn range(&self) -> &ControlRange {
        self.inner.control_range()
    }

    fn step(&self, state: &DVector<f64>, values: &[f64], t: f64) -> Result<DVector<f64>> {
        let (v, x) = self.split(state);
        let v = self.v_step(&v, values, t);
        let x = self.inner.step(&x, values, t)?;
        Ok(self.join(&v, &x))
    }

    fn step_fast(&self, state: &DVector<f64>, values: &[f64], t: f64) -> Result<DVector<f64>> {
        let (v, x) = self.split(state);
        let v = self.v_step(&v, values, t);
        let x = self.inner.step_fast(&x, values, t)?;
        Ok(self.join(&v, &x))
    }

    fn vector_fields(&self) -> Vec<PolyField> {
        let inner = self.inner.vector_fields();
        let mut out = vec![PolyField::stack(&PolyField::linear(&self.a), &inner[0])];
        for (b, f) in self.b.iter().zip(&inner[1..]) {
            out.push(PolyField::stack(&PolyField::constant(b), f));
        }
        out
    }
}

/// A linear control system on a solvable group with drift derivation `D` and
/// right-invariant control vectors `Y_j`.
#[derive(Debug, Clone)]
pub struct SemidirectLcs {
    pub algebra: LieAlgebra,
    pub derivation: DMatrix<f64>,
    pub controls: Vec<DVector<f64>>,
    pub range: ControlRange,
}

/// Coordinates `g = g0 + n` and the induced product system.
#[derive(Debug, Clone)]
pub struct SemidirectModel {
    pub split: KernelSplit,
    /// Basis of `g0` (columns in `g` coordinates).
    pub g0_basis: DMatrix<f64>,
    /// Basis of `n` (columns in `g` coordinates).
    pub n_basis: DMatrix<f64>,
    /// `ad(g0_basis_i)` restricted to `n`.
    pub rho_generators: Vec<DMatrix<f64>>,
    pub product: ProductSystem,
}

fn restrict_to(basis: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    basis.transpose() * m * basis
}

impl SemidirectLcs {
    pub fn new(algebra: LieAlgebra, derivation: DMatrix<f64>, controls: Vec<DVector<f64>>, range: ControlRange) -> Self {
        Self {
            algebra,
            derivation,
            controls,
            range,
        }
    }

    /// Reduction to a product system on `g0 x n`.
    pub fn build(&self) -> Result<SemidirectModel> {
        let g = &self.algebra;
        let d = Derivation::new(g, self.derivation.clone())?;
        if let Some(y) = self.controls.iter().find(|y| y.len() != g.dim()) {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: y.len(),
            });
        }
        let split = kernel_split(g, &d)?;
        if split.n0.dim() > 0 {
            return Err(Error::N0NotTrivial { dim: split.n0.dim() });
        }
        let g0_basis = split.g0.canonical().basis().clone();
        let n_basis = split.n.canonical().basis().clone();
        let (k, q) = (g0_basis.ncols(), n_basis.ncols());

        let a = restrict_to(&g0_basis, d.matrix());
        let d0 = restrict_to(&n_basis, d.matrix());
        let det = d0.determinant();
        let d0_scale = linalg::max_abs(&d0).max(1.0).powi(q as i32);
        if det.abs() <= 1e-8 * d0_scale {
            return Err(Error::D0Singular { det });
        }

        let both = linalg::hstack(&g0_basis, &n_basis);
        let lu = both.clone().lu();
        let mut b = Vec::new();
        let mut dj = Vec::new();
        let mut zj = Vec::new();
        for y in &self.controls {
            let c = lu
                .solve(y)
                .ok_or_else(|| Error::InvalidNilradical("g0 + n does not span g".into()))?;
            let y0 = c.rows(0, k).into_owned();
            let z = c.rows(k, q).into_owned();
            let y0_full = &g0_basis * &y0;
            dj.push(restrict_to(&n_basis, &g.ad(&y0_full)));
            b.push(y0);
            zj.push(z);
        }
        let rho_generators = (0..k)
            .map(|i| restrict_to(&n_basis, &g.ad(&g0_basis.column(i).into_owned())))
            .collect();
        let n_algebra = g.restrict(&Subspace::from_orthonormal(n_basis.clone()))?;
        let inner = SigmaASystem::new(n_algebra, d0, dj, zj, self.range.clone(), 1)?;
        let product = ProductSystem::new(a, b, inner)?;
        Ok(SemidirectModel {
            split,
            g0_basis,
            n_basis,
            rho_generators,
            product,
        })
    }
}

impl SemidirectModel {
    /// `rho(h) = exp(sum_i h_i ad(g0_i)|n)`.
    pub fn rho(&self, h: &DVector<f64>) -> DMatrix<f64> {
        let q = self.n_basis.ncols();
        let mut m = DMatrix::zeros(q, q);
        for (hi, gi) in h.iter().zip(&self.rho_generators) {
            m += gi * *hi;
        }
        m.exp()
    }

    /// `(g1, X1)(g2, X2) = (g1 + g2, X1 * rho(g1) X2)`.
    pub fn group_law(
        &self,
        p1: (&DVector<f64>, &DVector<f64>),
        p2: (&DVector<f64>, &DVector<f64>),
    ) -> (DVector<f64>, DVector<f64>) {
        let group = self.product.inner().group();
        (p1.0 + p2.0, group.product(p1.1, &(self.rho(p1.0) * p2.1)))
    }

    /// Right-invariant field of `(Y, Z)` at `(h, x)`:
    /// `(Y, Z(x) + ad(Y)|n x)`.
    pub fn field(&self, y: &DVector<f64>, z: &DVector<f64>, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let group = self.product.inner().group();
        let mut ad = DMatrix::zeros(x.len(), x.len());
        for (yi, gi) in y.iter().zip(&self.rho_generators) {
            ad += gi * *yi;
        }
        (y.clone(), group.right_invariant_field(z, x) + ad * x)
    }

    /// Max deviation between [`SemidirectModel::field`] and a central
    /// difference of `s -> (sY, sZ)(h, x)`.
    pub fn field_check(&self, y: &DVector<f64>, z: &DVector<f64>, h: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let s = 1e-4;
        let plus = self.group_law((&(y * s), &(z * s)), (h, x));
        let minus = self.group_law((&(y * -s), &(z * -s)), (h, x));
        let fd_h = (plus.0 - minus.0) / (2.0 * s);
        let fd_x = (plus.1 - minus.1) / (2.0 * s);
        let (fh, fx) = self.field(y, z, x);
        (fd_h - fh).amax().max((fd_x - fx).amax())
    }
}

/// `tau(S) = int_0^S v`, piecewise linear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeMap {
    /// Knots `(S, tau(S))`, starting at `(0, 0)`.
    pub knots: Vec<(f64, f64)>,
}

impl TimeMap {
    fn interpolate(knots: &[(f64, f64)], s: f64, forward: bool) -> f64 {
        let key = |k: &(f64, f64)| if forward { k.0 } else { k.1 };
        let val = |k: &(f64, f64)| if forward { k.1 } else { k.0 };
        for w in knots.windows(2) {
            if s <= key(&w[1]) {
                let span = key(&w[1]) - key(&w[0]);
                let frac = if span > 0.0 { (s - key(&w[0])) / span } else { 0.0 };
                return val(&w[0]) + frac * (val(&w[1]) - val(&w[0]));
            }
        }
        let (a, b) = (knots[knots.len() - 2], knots[knots.len() - 1]);
        let slope = (val(&b) - val(&a)) / (key(&b) - key(&a));
        val(&b) + slope * (s - key(&b))
    }

    pub fn eval(&self, s: f64) -> f64 {
        Self::interpolate(&self.knots, s, true)
    }

    pub fn inverse(&self, s: f64) -> f64 {
        Self::interpolate(&self.knots, s, false)
    }
}

/// Reparametrizes a law of the time-scaled system `y' = v (f_0 + sum u_j f_j)`.
///
/// With `tau(S) = int_0^S v`, the returned law is `u(s) = u_alpha(tau^{-1}(s))`
/// and satisfies `phi(tau(S), x, u) = phi_alpha(S, x, u_alpha, v)`.
pub fn rescale_control(u_alpha: &ControlLaw, v: &ControlLaw, alpha: f64) -> Result<(ControlLaw, TimeMap)> {
    if !(alpha > 1.0) {
        return Err(Error::RescaleOutOfRange {
            value: alpha,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let (lo, hi) = (1.0 / alpha, alpha);
    for p in v.pieces() {
        if p.values.len() != 1 {
            return Err(Error::InvalidLaw("speed law must be scalar".into()));
        }
        let s = p.values[0];
        if !(s > lo && s < hi) {
            return Err(Error::RescaleOutOfRange { value: s, lo, hi });
        }
    }
    let total = u_alpha.total_time();
    if (v.total_time() - total).abs() > 1e-12 * total.max(1.0) {
        return Err(Error::InvalidLaw(format!(
            "speed law covers {} but the control law covers {}",
            v.total_time(),
            total
        )));
    }
    if u_alpha.is_empty() {
        return Ok((ControlLaw::empty(), TimeMap { knots: vec![(0.0, 0.0), (1.0, 1.0)] }));
    }

    let mut cuts = vec![0.0];
    for law in [u_alpha, v] {
        let mut acc = 0.0;
        for p in law.pieces() {
            acc += p.duration;
            cuts.push(acc);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * total.max(1.0));
    if let Some(last) = cuts.last_mut() {
        *last = total;
    }

    let mut pieces: Vec<Piece> = Vec::new();
    let mut knots = vec![(0.0, 0.0)];
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let speed = v.value_at(mid).expect("non-empty")[0];
        let values = u_alpha.value_at(mid).expect("non-empty").to_vec();
        let duration = speed * (w[1] - w[0]);
        let tau_end = knots.last().expect("non-empty").1 + duration;
        knots.push((w[1], tau_end));
        match pieces.last_mut() {
            Some(last) if last.values == values => last.duration += duration,
            _ => pieces.push(Piece { duration, values }),
        }
    }
    Ok((ControlLaw::new(pieces)?, TimeMap { knots }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, diag};
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn h3_system(dj: Vec<DMatrix<f64>>) -> SigmaASystem {
        SigmaASystem::new(
            catalog::heisenberg_algebra(),
            diag(&[1.0, 1.0, 2.0]),
            dj,
            vec![v(&[1., 0., 0.]), v(&[0., 1., 0.])],
            ControlRange::uniform(2, 1.0).unwrap(),
            1,
        )
        .unwrap()
    }

    fn fixed_rk4(sys: &SigmaASystem, x: &DVector<f64>, u: &[f64], t: f64, n: usize) -> DVector<f64> {
        let h = t / n as f64;
        let mut x = x.clone();
        for _ in 0..n {
            let k1 = sys.field(&x, u);
            let k2 = sys.field(&(&x + &k1 * (h / 2.0)), u);
            let k3 = sys.field(&(&x + &k2 * (h / 2.0)), u);
            let k4 = sys.field(&(&x + &k3 * h), u);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        x
    }

    #[test]
    fn flow_b_of_diagonal_drift() {
        let sys = h3_system(vec![]);
        let phi = sys.flow_b(&ControlLaw::zero(2, 1.0).unwrap()).unwrap();
        let e = std::f64::consts::E;
        assert!((phi.matrix() - diag(&[e, e, e * e])).amax() < 1e-12);
    }

    #[test]
    fn flow_b_semigroup() {
        let d1 = DMatrix::from_row_slice(3, 3, &[0., 1., 0., -1., 0., 0., 0., 0., 0.]);
        let sys = h3_system(vec![d1, DMatrix::zeros(3, 3)]);
        let u1 = ControlLaw::constant(vec![0.5, -0.2], 0.3).unwrap();
        let u2 = ControlLaw::constant(vec![-0.7, 0.9], 0.6).unwrap();
        let both = sys.flow_b(&u1.concat(&u2)).unwrap();
        let composed = sys.flow_b(&u2).unwrap().matrix() * sys.flow_b(&u1).unwrap().matrix();
        assert!((both.matrix() - composed).amax() < 1e-12);
        assert!(both.residual() < 1e-12);
    }

    #[test]
    fn identity_orbit_examples() {
        let sys = h3_system(vec![]);
        assert_eq!(sys.solve_from_identity(&ControlLaw::zero(2, 1.0).unwrap()).unwrap(), v(&[0., 0., 0.]));

        let line = SigmaASystem::new(
            LieAlgebra::abelian(1),
            diag(&[1.0]),
            vec![],
            vec![v(&[1.0])],
            ControlRange::uniform(1, 1.0).unwrap(),
            1,
        )
        .unwrap();
        let a = line.solve_from_identity(&ControlLaw::constant(vec![0.4], 1.5).unwrap()).unwrap();
        assert_abs_diff_eq!(a[0], 0.4 * (1.5f64.exp() - 1.0), epsilon = 1e-12);

        let u = ControlLaw::constant(vec![1.0, 0.0], 1.0).unwrap();
        let a = sys.solve_from_identity(&u).unwrap();
        let oracle = fixed_rk4(&sys, &v(&[0., 0., 0.]), &[1.0, 0.0], 1.0, 4000);
        assert!((a - oracle).amax() < 1e-8);
    }

    #[test]
    fn translation_identity() {
        let d1 = DMatrix::from_row_slice(3, 3, &[0., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let sys = h3_system(vec![d1, DMatrix::zeros(3, 3)]);
        let x = v(&[0.3, -0.5, 0.2]);
        let u = ControlLaw::new(vec![
            Piece { duration: 0.4, values: vec![0.5, -1.0] },
            Piece { duration: 0.7, values: vec![-0.3, 0.8] },
        ])
        .unwrap();
        let composed = sys.solve(&x, &u).unwrap();
        let direct = sys.integrate_direct(&x, &u).unwrap();
        assert!((composed - direct).amax() < 1e-8);

        let zero = ControlLaw::zero(2, 0.8).unwrap();
        let drift = (sys.d0().matrix() * 0.8).exp() * &x;
        assert!((sys.solve(&x, &zero).unwrap() - drift).amax() < 1e-12);
        assert_eq!(sys.solve(&v(&[0., 0., 0.]), &u).unwrap(), sys.solve_from_identity(&u).unwrap());
    }

    #[test]
    fn backward_inverts_forward() {
        let sys = h3_system(vec![]);
        let x = v(&[0.1, 0.2, -0.3]);
        let u = ControlLaw::new(vec![
            Piece { duration: 0.5, values: vec![1.0, 0.0] },
            Piece { duration: 0.3, values: vec![0.0, -1.0] },
        ])
        .unwrap();
        let y = sys.advance(&x, &u, Direction::Forward).unwrap();
        let back = sys.advance(&y, &u, Direction::Backward).unwrap();
        assert!((back - &x).amax() < 1e-9);
        assert!((sys.solve_directed(&y, &u, Direction::Backward).unwrap() - &x).amax() < 1e-9);
    }

    #[test]
    fn product_examples() {
        let inner = h3_system(vec![]);
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        let ps = ProductSystem::new(a, vec![v(&[0., 1.]), v(&[0., 0.])], inner).unwrap();
        let u = ControlLaw::constant(vec![1.0, 0.0], 1.0).unwrap();
        let (vv, _) = ps.solve(&v(&[0.3, -0.4]), &v(&[0., 0., 0.]), &u).unwrap();
        assert!((vv - v(&[0.3 - 0.4 + 0.5, -0.4 + 1.0])).amax() < 1e-15);

        let bad = DMatrix::from_row_slice(2, 2, &[1., 0., 0., 0.]);
        assert!(matches!(
            ProductSystem::new(bad, vec![v(&[0., 1.]), v(&[0., 0.])], h3_system(vec![])),
            Err(Error::ANotNilpotent { .. })
        ));
    }

    #[test]
    fn shift_along_kernel() {
        let a = DMatrix::from_row_slice(2, 2, &[0., 1., 0., 0.]);
        let ps = ProductSystem::new(a, vec![v(&[0., 1.]), v(&[1., 0.])], h3_system(vec![])).unwrap();
        let u = ControlLaw::new(vec![
            Piece { duration: 0.3, values: vec![0.2, -0.6] },
            Piece { duration: 0.9, values: vec![-1.0, 0.4] },
        ])
        .unwrap();
        let x = v(&[0.2, 0.1, -0.1]);
        let shift = v(&[1.7, 0.0]);
        let (v1, x1) = ps.solve(&shift, &x, &u).unwrap();
        let (v0, x0) = ps.solve(&v(&[0., 0.]), &x, &u).unwrap();
        assert!((v1 - (v0 + shift)).amax() < 1e-12);
        assert_eq!(x1, x0);
    }

    fn euclid_lcs() -> SemidirectLcs {
        SemidirectLcs::new(
            catalog::euclid_algebra(),
            diag(&[0.0, 1.0, 1.0]),
            vec![v(&[1., 0., 0.]), v(&[0., 1., 0.])],
            ControlRange::uniform(2, 1.0).unwrap(),
        )
    }

    #[test]
    fn semidirect_reduction_of_euclid_example() {
        let model = euclid_lcs().build().unwrap();
        let ps = &model.product;
        assert_eq!(ps.v_dim(), 1);
        assert!(ps.a().amax() < 1e-12);
        let inner = ps.inner();
        assert!((inner.d0().matrix() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
        let rot = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        assert!((inner.dj()[0].matrix() - rot).amax() < 1e-12);
        assert!(inner.dj()[1].matrix().amax() < 1e-12);
        assert_abs_diff_eq!(ps.b()[0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ps.b()[1][0], 0.0, epsilon = 1e-12);
        assert!((&inner.zj()[1] - v(&[1., 0.])).amax() < 1e-12);
        assert!(inner.zj()[0].amax() < 1e-12);
        assert_eq!(inner.sign(), 1);
    }

    #[test]
    fn semidirect_guards() {
        let h = SemidirectLcs::new(
            catalog::heisenberg_algebra(),
            diag(&[1.0, 1.0, 2.0]),
            vec![v(&[1., 0., 0.])],
            ControlRange::uniform(1, 1.0).unwrap(),
        );
        let model = h.build().unwrap();
        assert_eq!(model.product.v_dim(), 0);
        assert_eq!(model.product.inner().dim(), 3);

        let degenerate = SemidirectLcs::new(
            catalog::heisenberg_algebra(),
            DMatrix::zeros(3, 3),
            vec![v(&[1., 0., 0.])],
            ControlRange::uniform(1, 1.0).unwrap(),
        );
        assert!(matches!(degenerate.build(), Err(Error::N0NotTrivial { dim: 3 })));
    }

    #[test]
    fn semidirect_law_and_field() {
        let model = euclid_lcs().build().unwrap();
        let zero = v(&[0.0]);
        let (x1, x2) = (v(&[0.3, -0.2]), v(&[1.1, 0.4]));
        let (h, x) = model.group_law((&zero, &x1), (&zero, &x2));
        assert_eq!(h, zero);
        assert!((x - (&x1 + &x2)).amax() < 1e-15);

        let r = model.field_check(&v(&[0.7]), &v(&[-0.4, 0.9]), &v(&[1.3]), &v(&[0.5, -1.5]));
        assert!(r < 1e-6, "field residual {r}");
    }

    #[test]
    fn rescaling_examples() {
        let c = ControlLaw::constant(vec![0.5, -0.5], 1.0).unwrap();
        let (u, tau) = rescale_control(&c, &ControlLaw::constant(vec![1.0], 1.0).unwrap(), 2.0).unwrap();
        assert_eq!(u, c);
        assert_abs_diff_eq!(tau.eval(0.6), 0.6);

        let (u, tau) = rescale_control(&c, &ControlLaw::constant(vec![2.0], 1.0).unwrap(), 3.0).unwrap();
        assert_abs_diff_eq!(u.total_time(), 2.0);
        assert_eq!(u.pieces().len(), 1);
        assert_abs_diff_eq!(tau.eval(0.25), 0.5);
        assert_abs_diff_eq!(tau.inverse(1.5), 0.75);

        assert!(matches!(
            rescale_control(&c, &ControlLaw::constant(vec![5.0], 1.0).unwrap(), 2.0),
            Err(Error::RescaleOutOfRange { .. })
        ));
    }

    #[test]
    fn rescaled_trajectory_matches() {
        let sys = h3_system(vec![]);
        let ua = ControlLaw::new(vec![
            Piece { duration: 0.4, values: vec![1.0, -0.5] },
            Piece { duration: 0.6, values: vec![-0.2, 0.7] },
        ])
        .unwrap();
        let speed = ControlLaw::new(vec![
            Piece { duration: 0.25, values: vec![1.5] },
            Piece { duration: 0.75, values: vec![0.8] },
        ])
        .unwrap();
        let (u, _) = rescale_control(&ua, &speed, 2.0).unwrap();
        let x = v(&[0.2, -0.1, 0.3]);
        // Time-scaled system: the field is multiplied by the speed.
        let mut y = x.clone();
        for (lo, hi, s, vals) in [
            (0.0, 0.25, 1.5, [1.0, -0.5]),
            (0.25, 0.4, 0.8, [1.0, -0.5]),
            (0.4, 1.0, 0.8, [-0.2, 0.7]),
        ] {
            y = fixed_rk4(&sys, &y, &vals, s * (hi - lo), 4000);
        }
        assert!((sys.solve(&x, &u).unwrap() - y).amax() < 1e-7);
    }
}
