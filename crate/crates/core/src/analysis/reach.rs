use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ControlLaw, ControlRange, ControlledSystem, Direction, Piece};
use crate::error::Result;
use crate::linalg;
use crate::par::{self, Parallelism};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReachParams {
    pub budget: usize,
    pub horizon: f64,
    pub max_pieces: usize,
    pub rng_seed: u64,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for ReachParams {
    fn default() -> Self {
        Self {
            budget: 1000,
            horizon: 1.0,
            max_pieces: 4,
            rng_seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachSample {
    pub point: Vec<f64>,
    pub time: f64,
    /// 0 for the base point, `i` for the `i`-th random law.
    pub law_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachCloud {
    pub base: Vec<f64>,
    pub direction: Direction,
    pub rng_seed: u64,
    pub samples: Vec<ReachSample>,
}

/// Random law with `1..=max_pieces` pieces, total time uniform in
/// `(0, horizon]` and values uniform in the range.
pub fn random_law<R: Rng>(range: &ControlRange, rng: &mut R, horizon: f64, max_pieces: usize) -> ControlLaw {
    let k = rng.gen_range(1..=max_pieces.max(1));
    let total = horizon * (1.0 - rng.gen::<f64>());
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.0..total)).collect();
    cuts.push(0.0);
    cuts.push(total);
    cuts.sort_by(f64::total_cmp);
    let pieces: Vec<Piece> = cuts
        .windows(2)
        .map(|w| (w[1] - w[0], range.sample(rng, 1.0)))
        .filter(|(d, _)| *d > 0.0)
        .map(|(duration, values)| Piece { duration, values })
        .collect();
    ControlLaw::new(pieces).expect("positive durations")
}

/// The law used for sample `law_id` of a cloud.
pub fn cloud_law(range: &ControlRange, params: &ReachParams, law_id: usize) -> ControlLaw {
    let mut rng = par::task_rng(params.rng_seed, law_id as u64);
    random_law(range, &mut rng, params.horizon, params.max_pieces)
}

/// Endpoints of `budget` random laws from `x0`, forward or backward in
/// time. Deterministic in `rng_seed` for either parallelism mode.
pub fn reach_sample<S: ControlledSystem + ?Sized>(
    sys: &S,
    x0: &DVector<f64>,
    direction: Direction,
    params: &ReachParams,
) -> Result<ReachCloud> {
    let points = par::map_indexed(params.budget, params.parallelism, |i| {
        let law = cloud_law(sys.range(), params, i + 1);
        sys.advance(x0, &law, direction).map(|p| (p, law.total_time()))
    });
    let mut samples = vec![ReachSample {
        point: x0.iter().cloned().collect(),
        time: 0.0,
        law_id: 0,
    }];
    for (i, r) in points.into_iter().enumerate() {
        let (p, t) = r?;
        samples.push(ReachSample {
            point: p.iter().cloned().collect(),
            time: t,
            law_id: i + 1,
        });
    }
    Ok(ReachCloud {
        base: x0.iter().cloned().collect(),
        direction,
        rng_seed: params.rng_seed,
        samples,
    })
}

impl ReachCloud {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn points(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.samples.iter().map(|s| DVector::from_row_slice(&s.point))
    }

    /// Rank of the covariance of displacements from the base point.
    pub fn spread_rank(&self) -> usize {
        let n = self.dim();
        let base = DVector::from_row_slice(&self.base);
        let mut cov = DMatrix::zeros(n, n);
        for p in self.points() {
            let d = p - &base;
            cov += &d * d.transpose();
        }
        linalg::rank(&cov, 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, diag};
    use crate::dynamics::SigmaASystem;

    fn h3() -> SigmaASystem {
        SigmaASystem::new(
            catalog::heisenberg_algebra(),
            diag(&[1.0, 1.0, 2.0]),
            vec![],
            vec![DVector::from_row_slice(&[1., 0., 0.]), DVector::from_row_slice(&[0., 1., 0.])],
            ControlRange::uniform(2, 1.0).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn empty_budget_is_the_base_point() {
        let params = ReachParams {
            budget: 0,
            ..Default::default()
        };
        let x0 = DVector::from_row_slice(&[0.1, 0.2, 0.3]);
        let cloud = reach_sample(&h3(), &x0, Direction::Forward, &params).unwrap();
        assert_eq!(cloud.samples.len(), 1);
        assert_eq!(cloud.samples[0].point, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn clouds_are_deterministic_across_modes() {
        let sys = h3();
        let x0 = DVector::zeros(3);
        let p = ReachParams {
            budget: 40,
            rng_seed: 11,
            ..Default::default()
        };
        let a = reach_sample(&sys, &x0, Direction::Forward, &p).unwrap();
        let b = reach_sample(
            &sys,
            &x0,
            Direction::Forward,
            &ReachParams {
                parallelism: Parallelism::Sequential,
                ..p.clone()
            },
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.spread_rank(), 3);
    }

    #[test]
    fn laws_respect_range_and_horizon() {
        let range = ControlRange::new(vec![0.5, 2.0]).unwrap();
        let mut rng = par::task_rng(3, 0);
        for _ in 0..100 {
            let law = random_law(&range, &mut rng, 1.5, 4);
            assert!(law.validate(&range).is_ok());
            assert!(law.total_time() <= 1.5 && !law.is_empty() && law.pieces().len() <= 4);
        }
    }
}
