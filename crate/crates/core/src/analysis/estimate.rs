use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use super::reach::{reach_sample, ReachCloud, ReachParams};
use super::shooting::{cross_reachability, ShootingOutcome, ShootingParams};
use crate::dynamics::{ControlLaw, ControlledSystem, Direction, ProductSystem};
use crate::error::Result;

pub const UNIQUE_CONSISTENT: &str = "UNIQUE-CONSISTENT";
pub const INCONCLUSIVE: &str = "INCONCLUSIVE";

#[derive(Debug, Clone)]
pub struct EstimateParams {
    pub cloud: ReachParams,
    pub r_match: f64,
    /// Pairwise steering between seeds; skipped when `None`.
    pub shooting: Option<ShootingParams>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub verified: bool,
    pub distance: f64,
    pub shots: usize,
    pub law: Option<ControlLaw>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlSetEstimate {
    pub seeds: Vec<Vec<f64>>,
    pub r_match: f64,
    pub forward_samples: usize,
    pub backward_samples: usize,
    /// Seeds plus forward samples within `r_match` of a backward sample.
    pub inliers: Vec<Vec<f64>>,
    pub bounding_box: Option<(Vec<f64>, Vec<f64>)>,
    pub transitions: Vec<Transition>,
    pub label: String,
    #[serde(skip)]
    pub forward: Vec<ReachCloud>,
    #[serde(skip)]
    pub backward: Vec<ReachCloud>,
}

impl ControlSetEstimate {
    pub fn dim(&self) -> usize {
        self.seeds.first().map(Vec::len).unwrap_or(0)
    }

    /// Distance from `p` to the nearest inlier.
    pub fn distance_to(&self, p: &DVector<f64>) -> f64 {
        self.inliers
            .iter()
            .map(|q| (DVector::from_row_slice(q) - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Extent of the inlier box along each coordinate.
    pub fn extent(&self) -> Vec<f64> {
        match &self.bounding_box {
            Some((lo, hi)) => lo.iter().zip(hi).map(|(a, b)| b - a).collect(),
            None => vec![0.0; self.dim()],
        }
    }
}

fn cell(p: &[f64], r: f64) -> Vec<i64> {
    p.iter().map(|x| (x / r).floor() as i64).collect()
}

/// Neighbouring cells of `c` (all offsets in {-1, 0, 1}^n).
fn neighbour_cells(c: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for &x in c {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-1..=1).map(move |d| {
                    let mut v = prefix.clone();
                    v.push(x + d);
                    v
                })
            })
            .collect();
    }
    out
}

fn matched(forward: &[&[f64]], backward: &[&[f64]], r: f64) -> Vec<usize> {
    let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, b) in backward.iter().enumerate() {
        grid.entry(cell(b, r)).or_default().push(i);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    forward
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            neighbour_cells(&cell(f, r)).iter().any(|c| {
                grid.get(c)
                    .map(|ids| ids.iter().any(|&j| dist(f, backward[j]) <= r))
                    .unwrap_or(false)
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Forward and backward clouds from each seed, matched at `r_match`, plus
/// shooting between every ordered pair of seeds.
pub fn control_set_estimate<S: ControlledSystem + ?Sized>(
    sys: &S,
    seeds: &[DVector<f64>],
    params: &EstimateParams,
) -> Result<ControlSetEstimate> {
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for (i, s) in seeds.iter().enumerate() {
        let mut p = params.cloud.clone();
        p.rng_seed = params.cloud.rng_seed.wrapping_add(2 * i as u64);
        forward.push(reach_sample(sys, s, Direction::Forward, &p)?);
        p.rng_seed = p.rng_seed.wrapping_add(1);
        backward.push(reach_sample(sys, s, Direction::Backward, &p)?);
    }
    let f_pts: Vec<&[f64]> = forward
        .iter()
        .flat_map(|c| c.samples.iter().skip(1).map(|s| s.point.as_slice()))
        .collect();
    let b_pts: Vec<&[f64]> = backward
        .iter()
        .flat_map(|c| c.samples.iter().map(|s| s.point.as_slice()))
        .collect();
    let mut inliers: Vec<Vec<f64>> = seeds.iter().map(|s| s.iter().cloned().collect()).collect();
    inliers.extend(matched(&f_pts, &b_pts, params.r_match).into_iter().map(|i| f_pts[i].to_vec()));

    let bounding_box = inliers.first().map(|first| {
        let mut lo = first.clone();
        let mut hi = first.clone();
        for p in &inliers {
            for (k, x) in p.iter().enumerate() {
                lo[k] = lo[k].min(*x);
                hi[k] = hi[k].max(*x);
            }
        }
        (lo, hi)
    });

    let transitions = match &params.shooting {
        Some(shooting) => pairwise_transitions(sys, seeds, shooting)?,
        None => Vec::new(),
    };
    let all = transitions.iter().all(|t| t.verified);
    let label = if seeds.len() <= 1 || (params.shooting.is_some() && all) {
        UNIQUE_CONSISTENT
    } else {
        INCONCLUSIVE
    };
    Ok(ControlSetEstimate {
        seeds: seeds.iter().map(|s| s.iter().cloned().collect()).collect(),
        r_match: params.r_match,
        forward_samples: f_pts.len(),
        backward_samples: b_pts.len(),
        inliers,
        bounding_box,
        transitions,
        label: label.into(),
        forward,
        backward,
    })
}

/// Shooting between every ordered pair of points, each pair on its own
/// RNG seed.
pub fn pairwise_transitions<S: ControlledSystem + ?Sized>(
    sys: &S,
    points: &[DVector<f64>],
    params: &ShootingParams,
) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let mut p = params.clone();
            p.rng_seed = params.rng_seed.wrapping_add((i * points.len() + j) as u64);
            out.push(transition(i, j, cross_reachability(sys, &points[i], &points[j], &p)?));
        }
    }
    Ok(out)
}

fn transition(from: usize, to: usize, out: ShootingOutcome) -> Transition {
    match out {
        ShootingOutcome::Found { law, distance, shots } => Transition {
            from,
            to,
            verified: true,
            distance,
            shots,
            law: Some(law),
        },
        ShootingOutcome::NotFound { best_distance, shots } => Transition {
            from,
            to,
            verified: false,
            distance: best_distance,
            shots,
            law: None,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberPoint {
    pub v: Vec<f64>,
    pub to_fiber: bool,
    pub from_fiber: bool,
    pub distances: (f64, f64),
    /// Law steering `(0, x*)` to `(v, x*)`.
    pub to_law: Option<ControlLaw>,
    /// Law steering `(v, x*)` to `(0, x*)`.
    pub from_law: Option<ControlLaw>,
    /// Whether the shift identity along `ker A` was used to recenter.
    pub recentered: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberReport {
    pub x_star: Vec<f64>,
    pub ball: f64,
    pub points: Vec<FiberPoint>,
    pub verified_both: usize,
    pub fraction_both: f64,
}

/// Two-way steering between `(0, x*)` and `(v, x*)` for each grid point `v`.
/// For `v` in `ker A` both searches start at `(0, x*)`, since the flow
/// commutes with translation by `v`.
pub fn fiber_closure_check(
    ps: &ProductSystem,
    x_star: &DVector<f64>,
    grid: &[DVector<f64>],
    params: &ShootingParams,
) -> Result<FiberReport> {
    let k = ps.v_dim();
    let origin = ps.join(&DVector::zeros(k), x_star);
    let mut points = Vec::new();
    for (i, v) in grid.iter().enumerate() {
        let target = ps.join(v, x_star);
        let in_kernel = (ps.a() * v).norm() <= 1e-12 * v.norm().max(1.0);
        let mut p = params.clone();
        p.rng_seed = params.rng_seed.wrapping_add(2 * i as u64);
        let there = cross_reachability(ps, &origin, &target, &p)?;
        p.rng_seed = p.rng_seed.wrapping_add(1);
        let back = if in_kernel {
            cross_reachability(ps, &origin, &ps.join(&-v, x_star), &p)?
        } else {
            cross_reachability(ps, &target, &origin, &p)?
        };
        points.push(FiberPoint {
            v: v.iter().cloned().collect(),
            to_fiber: there.is_found(),
            from_fiber: back.is_found(),
            distances: (there.distance(), back.distance()),
            to_law: there.law().cloned(),
            from_law: back.law().cloned(),
            recentered: in_kernel,
        });
    }
    let verified_both = points.iter().filter(|p| p.to_fiber && p.from_fiber).count();
    Ok(FiberReport {
        x_star: x_star.iter().cloned().collect(),
        ball: params.ball,
        fraction_both: if points.is_empty() {
            1.0
        } else {
            verified_both as f64 / points.len() as f64
        },
        verified_both,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_matching() {
        let f: Vec<&[f64]> = vec![&[0.0, 0.0], &[1.0, 1.0], &[0.5, 0.52]];
        let b: Vec<&[f64]> = vec![&[0.01, 0.0], &[0.5, 0.5]];
        assert_eq!(matched(&f, &b, 0.05), vec![0, 2]);
        assert_eq!(neighbour_cells(&[0, 0]).len(), 9);
    }
}
