use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::ControlledSystem;
use crate::linalg;
use crate::poly::{IndependentSet, PolyField};

/// Upper bound on the number of independent brackets kept by a saturation.
const MAX_FIELDS: usize = 256;
const INDEPENDENCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PointRank {
    pub point: Vec<f64>,
    pub rank_l: usize,
    pub rank_l0: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccessibilityReport {
    pub state_dim: usize,
    /// Dimension of the system Lie algebra as a space of polynomial fields.
    pub l_dim: usize,
    pub l0_dim: usize,
    pub points: Vec<PointRank>,
    pub larc: bool,
    pub strong: bool,
    /// Set when the saturation hit `MAX_FIELDS` before closing.
    pub truncated: bool,
}

/// Span of `seeds` closed under bracketing with `generators`, as a list of
/// independent fields. Right-nested brackets with the generators span the
/// generated algebra and the ideal generated by `seeds` alike.
pub fn saturate(seeds: &[PolyField], generators: &[PolyField]) -> (Vec<PolyField>, bool) {
    let mut set = IndependentSet::default();
    let mut fields = Vec::new();
    for s in seeds {
        if set.insert(s, INDEPENDENCE_TOL) {
            fields.push(s.clone());
        }
    }
    let mut next = 0;
    while next < fields.len() {
        if fields.len() >= MAX_FIELDS {
            return (fields, true);
        }
        let f = fields[next].clone();
        for g in generators {
            let b = g.bracket(&f);
            if set.insert(&b, INDEPENDENCE_TOL) {
                fields.push(b);
            }
        }
        next += 1;
    }
    (fields, false)
}

fn rank_at(fields: &[PolyField], x: &DVector<f64>) -> usize {
    if fields.is_empty() {
        return 0;
    }
    let cols: Vec<DVector<f64>> = fields.iter().map(|f| f.eval(x)).collect();
    let m = linalg::columns_to_matrix(x.len(), &cols);
    let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0;
    }
    let sv = m.singular_values();
    sv.iter().filter(|&&s| s > linalg::TOL_RANK * scale).count()
}

/// Rank of the system Lie algebra and of the ideal generated by the control
/// fields at each point.
pub fn larc_check<S: ControlledSystem + ?Sized>(sys: &S, points: &[DVector<f64>]) -> AccessibilityReport {
    let generators = sys.vector_fields();
    let n = sys.state_dim();
    let (l, t1) = saturate(&generators, &generators);
    let (l0, t2) = saturate(&generators[1..], &generators);
    let points: Vec<PointRank> = points
        .iter()
        .map(|x| PointRank {
            point: x.iter().cloned().collect(),
            rank_l: rank_at(&l, x),
            rank_l0: rank_at(&l0, x),
        })
        .collect();
    AccessibilityReport {
        state_dim: n,
        l_dim: l.len(),
        l0_dim: l0.len(),
        larc: points.iter().all(|p| p.rank_l == n),
        strong: points.iter().all(|p| p.rank_l0 == n),
        points,
        truncated: t1 || t2,
    }
}

/// The origin plus a few fixed off-origin points.
pub fn default_points(n: usize) -> Vec<DVector<f64>> {
    let mut pts = vec![DVector::zeros(n)];
    let m = DMatrix::from_fn(n, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.25 - 0.5);
    pts.extend(m.column_iter().map(|c| c.into_owned()));
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, diag};
    use crate::dynamics::{ControlRange, SigmaASystem};
    use crate::LieAlgebra;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn heisenberg_with_two_controls_is_accessible() {
        let sys = SigmaASystem::new(
            catalog::heisenberg_algebra(),
            diag(&[1.0, 1.0, 2.0]),
            vec![],
            vec![v(&[1., 0., 0.]), v(&[0., 1., 0.])],
            ControlRange::uniform(2, 1.0).unwrap(),
            1,
        )
        .unwrap();
        let r = larc_check(&sys, &[v(&[0., 0., 0.])]);
        assert_eq!(r.points[0].rank_l, 3);
        assert!(r.larc && r.strong);
    }

    #[test]
    fn heisenberg_with_one_control_is_not() {
        let sys = SigmaASystem::new(
            catalog::heisenberg_algebra(),
            diag(&[1.0, 1.0, 2.0]),
            vec![],
            vec![v(&[1., 0., 0.])],
            ControlRange::uniform(1, 1.0).unwrap(),
            1,
        )
        .unwrap();
        let r = larc_check(&sys, &[v(&[0., 0., 0.])]);
        assert_eq!(r.points[0].rank_l, 1);
        assert!(!r.larc);
    }

    #[test]
    fn constant_fields_on_the_plane() {
        let sys = SigmaASystem::new(
            LieAlgebra::abelian(2),
            DMatrix::zeros(2, 2),
            vec![],
            vec![v(&[1., 0.]), v(&[0., 1.])],
            ControlRange::uniform(2, 1.0).unwrap(),
            1,
        )
        .unwrap();
        let r = larc_check(&sys, &default_points(2));
        assert!(r.larc && r.strong);
        assert_eq!(r.l_dim, 2);
    }
}
