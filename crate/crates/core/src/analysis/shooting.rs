use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::reach::random_law;
use crate::dynamics::{ControlLaw, ControlledSystem, Direction, Piece};
use crate::error::Result;
use crate::par::{self, Parallelism};

/// Candidates kept for refinement.
const KEEP: usize = 4;
/// Smallest coordinate-descent step, relative to the initial one.
const MIN_STEP: f64 = 1e-4;
const MIN_DURATION: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShootingParams {
    pub ball: f64,
    pub budget: usize,
    pub horizon: f64,
    pub max_pieces: usize,
    pub rng_seed: u64,
    /// Random shots evaluated between refinement rounds.
    pub batch: usize,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for ShootingParams {
    fn default() -> Self {
        Self {
            ball: 0.05,
            budget: 100_000,
            horizon: 3.0,
            max_pieces: 4,
            rng_seed: 0,
            batch: 256,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ShootingOutcome {
    Found {
        law: ControlLaw,
        distance: f64,
        shots: usize,
    },
    /// Budget exhausted; evidence of nothing.
    NotFound { best_distance: f64, shots: usize },
}

impl ShootingOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, ShootingOutcome::Found { .. })
    }

    pub fn shots(&self) -> usize {
        match self {
            ShootingOutcome::Found { shots, .. } | ShootingOutcome::NotFound { shots, .. } => *shots,
        }
    }

    pub fn law(&self) -> Option<&ControlLaw> {
        match self {
            ShootingOutcome::Found { law, .. } => Some(law),
            ShootingOutcome::NotFound { .. } => None,
        }
    }

    pub fn distance(&self) -> f64 {
        match self {
            ShootingOutcome::Found { distance, .. } => *distance,
            ShootingOutcome::NotFound { best_distance, .. } => *best_distance,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    law: ControlLaw,
    distance: f64,
}

/// Closest approach to `to` over the piece endpoints, with the law cut
/// after the best piece.
fn score<S: ControlledSystem + ?Sized>(sys: &S, from: &DVector<f64>, to: &DVector<f64>, law: &ControlLaw) -> Candidate {
    let mut state = from.clone();
    let mut best = (f64::INFINITY, 0);
    for (k, p) in law.pieces().iter().enumerate() {
        state = match sys.step_fast(&state, &p.values, p.duration) {
            Ok(s) => s,
            Err(_) => break,
        };
        let d = (&state - to).norm();
        if !d.is_finite() {
            break;
        }
        if d < best.0 {
            best = (d, k + 1);
        }
    }
    Candidate {
        law: law.prefix(best.1),
        distance: best.0,
    }
}

fn insert_candidate(top: &mut Vec<Candidate>, c: Candidate) {
    if !c.distance.is_finite() || c.law.is_empty() {
        return;
    }
    top.push(c);
    top.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    top.truncate(KEEP);
}

/// All single-coordinate moves of size `step` on values and durations.
fn neighbours<S: ControlledSystem + ?Sized>(sys: &S, law: &ControlLaw, step: f64, horizon: f64) -> Vec<ControlLaw> {
    let radii = sys.range().radii();
    let total = law.total_time();
    let mut out = Vec::new();
    for (k, p) in law.pieces().iter().enumerate() {
        for (j, r) in radii.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let mut pieces = law.pieces().to_vec();
                let v = (p.values[j] + sign * step * r).clamp(-r, *r);
                if v == p.values[j] {
                    continue;
                }
                pieces[k].values[j] = v;
                out.push(pieces);
            }
        }
        for sign in [1.0, -1.0] {
            let delta = sign * step * horizon / 4.0;
            let d = (p.duration + delta).max(MIN_DURATION);
            if total - p.duration + d > horizon || d == p.duration {
                continue;
            }
            let mut pieces = law.pieces().to_vec();
            pieces[k].duration = d;
            out.push(pieces);
        }
    }
    if total < horizon {
        // Append a short piece of the last values to extend the law.
        let mut pieces: Vec<Piece> = law.pieces().to_vec();
        let last = pieces.last().expect("non-empty").values.clone();
        pieces.push(Piece {
            duration: (step * horizon / 4.0).min(horizon - total).max(MIN_DURATION),
            values: last,
        });
        out.push(pieces);
    }
    out.into_iter()
        .map(|p| ControlLaw::new(p).expect("positive durations"))
        .collect()
}

/// Steers `from` into the ball around `to` by random shooting followed by
/// coordinate descent on piece values and durations.
///
/// Candidate endpoints are searched with the cheap integrator and confirmed
/// with the certified one before a law is reported.
pub fn cross_reachability<S: ControlledSystem + ?Sized>(
    sys: &S,
    from: &DVector<f64>,
    to: &DVector<f64>,
    params: &ShootingParams,
) -> Result<ShootingOutcome> {
    let d0 = (from - to).norm();
    if d0 <= params.ball {
        return Ok(ShootingOutcome::Found {
            law: ControlLaw::empty(),
            distance: d0,
            shots: 0,
        });
    }
    let mut shots = 0;
    let mut top: Vec<Candidate> = Vec::new();
    let verify = |c: &Candidate| -> Result<Option<ShootingOutcome>> {
        let end = sys.advance(from, &c.law, Direction::Forward)?;
        let d = (&end - to).norm();
        Ok((d <= params.ball).then(|| ShootingOutcome::Found {
            law: c.law.clone(),
            distance: d,
            shots: 0,
        }))
    };
    let batch = params.batch.max(1);
    let mut next_id = 0u64;
    while shots < params.budget {
        let n = batch.min(params.budget - shots);
        let base = next_id;
        let batch_results = par::map_indexed(n, params.parallelism, |i| {
            let mut rng = par::task_rng(params.rng_seed, base + i as u64);
            let law = random_law(sys.range(), &mut rng, params.horizon, params.max_pieces);
            score(sys, from, to, &law)
        });
        next_id += n as u64;
        shots += n;
        for c in batch_results {
            insert_candidate(&mut top, c);
        }
        if let Some(best) = top.first().cloned() {
            if best.distance <= params.ball {
                if let Some(found) = verify(&best)? {
                    return Ok(with_shots(found, shots));
                }
            }
        }
        // Refine the current leaders.
        let leaders = top.clone();
        for leader in leaders {
            let mut current = leader;
            let mut step = 0.25;
            while step >= 0.25 * MIN_STEP && shots < params.budget {
                let moves = neighbours(sys, &current.law, step, params.horizon);
                let take = moves.len().min(params.budget - shots);
                let scored = par::map_indexed(take, params.parallelism, |i| score(sys, from, to, &moves[i]));
                shots += take;
                let best = scored
                    .into_iter()
                    .filter(|c| !c.law.is_empty())
                    .min_by(|a, b| a.distance.total_cmp(&b.distance));
                match best {
                    Some(b) if b.distance < current.distance => current = b,
                    _ => step *= 0.5,
                }
                if current.distance <= params.ball {
                    if let Some(found) = verify(&current)? {
                        return Ok(with_shots(found, shots));
                    }
                    // The cheap integrator was optimistic; aim deeper.
                    if current.distance <= 0.5 * params.ball {
                        break;
                    }
                }
            }
            insert_candidate(&mut top, current);
        }
    }
    Ok(ShootingOutcome::NotFound {
        best_distance: top.first().map(|c| c.distance).unwrap_or(d0),
        shots,
    })
}

fn with_shots(outcome: ShootingOutcome, total: usize) -> ShootingOutcome {
    match outcome {
        ShootingOutcome::Found { law, distance, .. } => ShootingOutcome::Found {
            law,
            distance,
            shots: total,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, diag};
    use crate::dynamics::{ControlRange, SigmaASystem};

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
    fn same_point_needs_no_law() {
        let x = DVector::from_row_slice(&[0.2, 0.1, 0.0]);
        let out = cross_reachability(&h3(), &x, &x, &ShootingParams::default()).unwrap();
        match out {
            ShootingOutcome::Found { law, shots, .. } => {
                assert!(law.is_empty());
                assert_eq!(shots, 0);
            }
            _ => panic!("expected a trivial law"),
        }
    }

    #[test]
    fn zero_budget_is_not_found() {
        let params = ShootingParams {
            budget: 0,
            ..Default::default()
        };
        let out = cross_reachability(&h3(), &DVector::zeros(3), &DVector::from_row_slice(&[9., 9., 9.]), &params).unwrap();
        assert!(!out.is_found());
    }

    #[test]
    fn steers_between_nearby_points() {
        let sys = h3();
        let from = DVector::from_row_slice(&[-0.3, 0.2, 0.0]);
        let to = DVector::from_row_slice(&[0.2, -0.1, 0.1]);
        let params = ShootingParams {
            budget: 20_000,
            rng_seed: 5,
            ..Default::default()
        };
        let out = cross_reachability(&sys, &from, &to, &params).unwrap();
        let ShootingOutcome::Found { law, .. } = out else {
            panic!("no law found: {out:?}");
        };
        let end = sys.advance(&from, &law, Direction::Forward).unwrap();
        assert!((end - to).norm() <= params.ball);
        assert!(law.validate(sys.range()).is_ok());
    }
}
