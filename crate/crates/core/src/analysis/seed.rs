use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use super::estimate::{pairwise_transitions, Transition};
use super::shooting::ShootingParams;
use crate::dynamics::{ControlLaw, ControlledSystem, Piece, SigmaASystem};
use crate::error::{Error, Result};
use crate::nilgroup::GroupAutomorphism;
use crate::par::{self, Parallelism};

/// Re-integrated periodicity tolerance.
pub const TOL_SEED: f64 = 1e-7;
/// Algebraic fixed-point tolerance, relative to `1 + |x*|`.
pub const TOL_INVERSION: f64 = 1e-9;
/// Largest number of pieces in a scanned law.
const SCAN_MAX_PIECES: usize = 4;
/// Initial scale of scanned law values relative to the control range.
const SCAN_SCALE: f64 = 0.5;

/// A periodic point `x* = phi^A(S, x*, u)` with its residuals.
#[derive(Debug, Clone, Serialize)]
pub struct SeedCertificate {
    pub time: f64,
    pub law: ControlLaw,
    pub det_gap: f64,
    pub det_threshold: f64,
    /// `phi^A(S, 0, u)`.
    pub orbit_of_identity: Vec<f64>,
    pub x_star: Vec<f64>,
    /// `|phi^A(S, x*, u) - x*|` by direct re-integration.
    pub periodicity_residual: f64,
    /// `|x* - a * Phi(x*)|`.
    pub inversion_residual: f64,
}

impl SeedCertificate {
    pub fn point(&self) -> DVector<f64> {
        DVector::from_vec(self.x_star.clone())
    }
}

/// Fixed point of `x -> phi^A(S, x, u)` by inverting `f_Phi` at
/// `a = phi^A(S, 0, u)`.
pub fn seed_finder(sys: &SigmaASystem, u: &ControlLaw) -> Result<SeedCertificate> {
    u.validate(sys.control_range())?;
    let m = sys.dim();
    let phi_matrix = sys.flow_b(u)?;
    let det_gap = phi_matrix.det_gap();
    let det_threshold = phi_matrix.det_threshold();
    if det_gap <= det_threshold {
        return Err(Error::DetGapTooSmall {
            gap: det_gap,
            threshold: det_threshold,
        });
    }
    let a = sys.solve_from_identity(u)?;
    let group = sys.group();
    let x_star = group.f_phi_invert(&phi_matrix, &a)?;
    let inversion_residual = (&x_star - group.product(&a, &phi_matrix.apply(&x_star))).norm();
    let inversion_threshold = TOL_INVERSION * (1.0 + x_star.norm());
    if inversion_residual > inversion_threshold {
        return Err(Error::InversionResidualExceeded {
            residual: inversion_residual,
            threshold: inversion_threshold,
        });
    }
    let periodicity_residual = (sys.integrate_direct(&x_star, u)? - &x_star).norm();
    if periodicity_residual > TOL_SEED {
        return Err(Error::PeriodicityResidualExceeded {
            residual: periodicity_residual,
            threshold: TOL_SEED,
        });
    }
    debug_assert_eq!(x_star.len(), m);
    Ok(SeedCertificate {
        time: u.total_time(),
        law: u.clone(),
        det_gap,
        det_threshold,
        orbit_of_identity: a.iter().cloned().collect(),
        x_star: x_star.iter().cloned().collect(),
        periodicity_residual,
        inversion_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanFailure {
    pub law_index: usize,
    pub hypothesis: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub pairs: Vec<Transition>,
    pub all_connected: bool,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub time: f64,
    pub requested: usize,
    pub certificates: Vec<SeedCertificate>,
    pub failures: Vec<ScanFailure>,
    pub consistency: Option<ConsistencyReport>,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub rng_seed: u64,
    pub parallelism: Parallelism,
    /// Pairwise shooting between seeds; skipped when `None`.
    pub consistency: Option<ShootingParams>,
}

/// Random piecewise-constant law on `[0, time]` with values in
/// `scale * Omega`.
fn scan_law<R: Rng>(sys: &SigmaASystem, rng: &mut R, time: f64, scale: f64) -> ControlLaw {
    let k = rng.gen_range(1..=SCAN_MAX_PIECES);
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.0..time)).collect();
    cuts.push(0.0);
    cuts.push(time);
    cuts.sort_by(f64::total_cmp);
    let mut pieces = Vec::new();
    for w in cuts.windows(2) {
        let values = sys.control_range().sample(rng, scale);
        if w[1] - w[0] > 1e-9 * time {
            pieces.push(Piece {
                duration: w[1] - w[0],
                values,
            });
        }
    }
    ControlLaw::new(pieces).expect("positive durations")
}

fn shrink(law: &ControlLaw, factor: f64) -> ControlLaw {
    let pieces = law
        .pieces()
        .iter()
        .map(|p| Piece {
            duration: p.duration,
            values: p.values.iter().map(|v| v * factor).collect(),
        })
        .collect();
    ControlLaw::new(pieces).expect("durations unchanged")
}

fn det_gap_of(sys: &SigmaASystem, law: &ControlLaw) -> Option<(f64, f64)> {
    sys.flow_b(law).ok().map(|phi: GroupAutomorphism| (phi.det_gap(), phi.det_threshold()))
}

/// Seeds for `n_laws` laws on `[0, time]`: the zero law first, then random
/// laws near zero shrunk until the det-gap filter passes.
pub fn seed_family_scan(sys: &SigmaASystem, time: f64, n_laws: usize, options: &ScanOptions) -> Result<ScanReport> {
    let zero = ControlLaw::zero(sys.controls(), time)?;
    let mut report = ScanReport {
        time,
        requested: n_laws,
        certificates: Vec::new(),
        failures: Vec::new(),
        consistency: None,
        note: String::new(),
    };
    let anchored = match det_gap_of(sys, &zero) {
        Some((gap, threshold)) if gap > threshold => true,
        Some((gap, threshold)) => {
            report.note = format!(
                "det(I - exp(S D0)) = {gap:.3e} is below {threshold:.3e} at S = {time}: \
                 the zero law is not admissible, so every law near it is rejected"
            );
            false
        }
        None => {
            report.note = "drift exponential failed the automorphism certificate".into();
            false
        }
    };
    if !anchored {
        for i in 0..n_laws {
            report.failures.push(ScanFailure {
                law_index: i,
                hypothesis: "det(I - phi) != 0".into(),
                message: "rejected by the det-gap filter at the anchor law".into(),
            });
        }
        return Ok(report);
    }

    let results = par::map_indexed(n_laws, options.parallelism, |i| {
        if i == 0 {
            return seed_finder(sys, &zero);
        }
        let mut rng = par::task_rng(options.rng_seed, i as u64);
        let mut law = scan_law(sys, &mut rng, time, SCAN_SCALE);
        for _ in 0..40 {
            match det_gap_of(sys, &law) {
                Some((gap, threshold)) if gap > threshold => break,
                _ => law = shrink(&law, 0.5),
            }
        }
        seed_finder(sys, &law)
    });
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => report.certificates.push(c),
            Err(e) => report.failures.push(ScanFailure {
                law_index: i,
                hypothesis: e.hypothesis().into(),
                message: e.to_string(),
            }),
        }
    }
    report.note = "seeds are consistent with density of admissible laws near zero; \
                   sampling cannot falsify it"
        .into();
    if let Some(params) = &options.consistency {
        let points: Vec<DVector<f64>> = report.certificates.iter().map(|c| c.point()).collect();
        report.consistency = Some(pairwise_consistency(sys, &points, params)?);
    }
    Ok(report)
}

/// Pairwise steering between seeds.
pub fn pairwise_consistency<S: ControlledSystem + ?Sized>(
    sys: &S,
    points: &[DVector<f64>],
    params: &ShootingParams,
) -> Result<ConsistencyReport> {
    let pairs = pairwise_transitions(sys, points, params)?;
    let all_connected = pairs.iter().all(|p| p.verified);
    let note = if all_connected {
        "all seeds mutually reachable: consistent with a single control set".into()
    } else {
        "some pairs unverified within the shooting budget (not evidence of disconnection)".into()
    };
    Ok(ConsistencyReport {
        pairs,
        all_connected,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, diag};
    use crate::dynamics::ControlRange;
    use crate::LieAlgebra;
    use nalgebra::DMatrix;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    fn h3() -> SigmaASystem {
        SigmaASystem::new(
            catalog::heisenberg_algebra(),
            diag(&[1.0, 1.0, 2.0]),
            vec![],
            vec![v(&[1., 0., 0.]), v(&[0., 1., 0.])],
            ControlRange::uniform(2, 1.0).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn zero_law_seed_is_identity() {
        let c = seed_finder(&h3(), &ControlLaw::zero(2, 1.0).unwrap()).unwrap();
        assert_eq!(c.x_star, vec![0.0; 3]);
        assert_eq!(c.periodicity_residual, 0.0);
    }

    #[test]
    fn constant_law_seed() {
        let c = seed_finder(&h3(), &ControlLaw::constant(vec![1.0, 0.0], 1.0).unwrap()).unwrap();
        assert!(c.periodicity_residual < TOL_SEED);
        // (-1, 0, 0) is an equilibrium of the constant field.
        assert!((c.x_star[0] + 1.0).abs() < 1e-9);
        assert!(c.x_star[1].abs() < 1e-12 && c.x_star[2].abs() < 1e-9);
    }

    #[test]
    fn resonant_rotation_is_rejected() {
        let rot = DMatrix::from_row_slice(2, 2, &[0., -1., 1., 0.]);
        let sys = SigmaASystem::new(
            LieAlgebra::abelian(2),
            rot,
            vec![],
            vec![v(&[1., 0.])],
            ControlRange::uniform(1, 1.0).unwrap(),
            1,
        )
        .unwrap();
        let u = ControlLaw::zero(1, 2.0 * std::f64::consts::PI).unwrap();
        assert!(matches!(seed_finder(&sys, &u), Err(Error::DetGapTooSmall { .. })));
        let opts = ScanOptions {
            rng_seed: 1,
            parallelism: Parallelism::Sequential,
            consistency: None,
        };
        let r = seed_family_scan(&sys, 2.0 * std::f64::consts::PI, 3, &opts).unwrap();
        assert!(r.certificates.is_empty());
        assert_eq!(r.failures.len(), 3);
        assert!(!r.note.is_empty());
    }

    #[test]
    fn scan_is_reproducible() {
        let opts = ScanOptions {
            rng_seed: 7,
            parallelism: Parallelism::Parallel,
            consistency: None,
        };
        let a = seed_family_scan(&h3(), 1.0, 4, &opts).unwrap();
        let b = seed_family_scan(
            &h3(),
            1.0,
            4,
            &ScanOptions {
                parallelism: Parallelism::Sequential,
                ..opts.clone()
            },
        )
        .unwrap();
        assert_eq!(a.certificates.len(), 4);
        assert_eq!(a.certificates[0].x_star, vec![0.0; 3]);
        for (x, y) in a.certificates.iter().zip(&b.certificates) {
            assert_eq!(x.x_star, y.x_star);
        }
    }
}
