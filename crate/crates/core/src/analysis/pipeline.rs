use nalgebra::DVector;
use serde::Serialize;

use super::estimate::{control_set_estimate, fiber_closure_check, ControlSetEstimate, EstimateParams, FiberReport};
use super::larc::{default_points, larc_check, AccessibilityReport};
use super::reach::ReachParams;
use super::seed::{seed_family_scan, ScanOptions, ScanReport};
use super::shooting::ShootingParams;
use crate::derivation::{kernel_split, n0_compactness_criterion, Compactness, Derivation, KernelSplitReport};
use crate::dynamics::{ControlledSystem, SemidirectLcs};
use crate::error::{Error, ErrorKind};
use crate::par::Parallelism;

pub const SCHEMA: &str = "solvctrl-report/1";

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub scan_time: f64,
    pub n_laws: usize,
    /// Scanned seeds carried into the control-set estimate.
    pub estimate_seeds: usize,
    pub rng_seed: u64,
    pub cloud: ReachParams,
    pub r_match: f64,
    pub shooting: ShootingParams,
    /// Half-width of the integer grid on `V` used by the fiber check.
    pub window: i32,
    pub fiber_shooting: ShootingParams,
    pub parallelism: Parallelism,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scan_time: 1.0,
            n_laws: 4,
            estimate_seeds: 2,
            rng_seed: 0,
            cloud: ReachParams::default(),
            r_match: 0.05,
            shooting: ShootingParams::default(),
            window: 2,
            fiber_shooting: ShootingParams {
                ball: 0.1,
                budget: 20_000,
                horizon: 5.0,
                ..Default::default()
            },
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Completed,
    Stopped {
        hypothesis: String,
        message: String,
        kind: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub schema: &'static str,
    pub hypotheses: Vec<HypothesisCheck>,
    pub warnings: Vec<String>,
    pub kernel_split: Option<KernelSplitReport>,
    pub compactness: Option<Compactness>,
    pub accessibility: Option<AccessibilityReport>,
    pub scan: Option<ScanReport>,
    pub estimate: Option<ControlSetEstimate>,
    pub fiber: Option<FiberReport>,
    pub outcome: Outcome,
}

impl PipelineReport {
    fn new() -> Self {
        Self {
            schema: SCHEMA,
            hypotheses: Vec::new(),
            warnings: Vec::new(),
            kernel_split: None,
            compactness: None,
            accessibility: None,
            scan: None,
            estimate: None,
            fiber: None,
            outcome: Outcome::Completed,
        }
    }

    fn check(&mut self, name: &str, holds: bool, detail: impl Into<String>) {
        self.hypotheses.push(HypothesisCheck {
            name: name.into(),
            holds,
            detail: detail.into(),
        });
    }

    fn stop(mut self, e: &Error) -> Self {
        if e.kind() == ErrorKind::Guard {
            self.check(e.hypothesis(), false, e.to_string());
        }
        self.outcome = Outcome::Stopped {
            hypothesis: e.hypothesis().into(),
            message: e.to_string(),
            kind: format!("{:?}", e.kind()).to_lowercase(),
        };
        self
    }

    pub fn is_completed(&self) -> bool {
        matches!(self.outcome, Outcome::Completed)
    }

    /// The failure kind when the run stopped early.
    pub fn stop_kind(&self) -> Option<ErrorKind> {
        match &self.outcome {
            Outcome::Completed => None,
            Outcome::Stopped { kind, .. } => Some(match kind.as_str() {
                "guard" => ErrorKind::Guard,
                "usage" => ErrorKind::Usage,
                _ => ErrorKind::Numerical,
            }),
        }
    }
}

fn grid(dim: usize, window: i32) -> Vec<DVector<f64>> {
    if dim == 0 {
        return Vec::new();
    }
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                (-window..=window).map(move |k| {
                    let mut q = p.clone();
                    q.push(k as f64);
                    q
                })
            })
            .collect();
    }
    out.into_iter().map(DVector::from_vec).collect()
}

/// Reduction of a linear system on a solvable group to a product system,
/// followed by the seed and control-set experiments. Guard failures stop the
/// run and are reported with the hypothesis that failed.
pub fn full_pipeline(sd: &SemidirectLcs, config: &PipelineConfig) -> PipelineReport {
    let mut report = PipelineReport::new();
    let g = &sd.algebra;

    let solvable = g.is_solvable();
    report.check("solvability", solvable, "derived series reaches zero");
    if !solvable {
        return report.stop(&Error::NotSolvable);
    }
    let d = match Derivation::new(g, sd.derivation.clone()) {
        Ok(d) => d,
        Err(e) => return report.stop(&e),
    };
    report.check("Leibniz rule", true, "drift matrix is a derivation");
    let split = match kernel_split(g, &d) {
        Ok(s) => s,
        Err(e) => return report.stop(&e),
    };
    report.check(
        "n + g0 = g",
        split.report.sum_is_whole,
        format!("dim(n + g0) = {} of {}", split.report.dim_n_plus_g0, split.report.dim_g),
    );
    report.kernel_split = Some(split.report.clone());
    let compactness = n0_compactness_criterion(&split.n0);
    report.compactness = Some(compactness.clone());
    if compactness != Compactness::Compact {
        return report.stop(&Error::N0NotTrivial { dim: split.n0.dim() });
    }
    report.check("N0 compactness (n0 = 0)", true, "n0 = 0");

    let model = match sd.build() {
        Ok(m) => m,
        Err(e) => return report.stop(&e),
    };
    report.check("det D0 != 0", true, format!("D0 = D restricted to n, dim {}", model.n_basis.ncols()));
    report.check("A nilpotent", true, format!("A = D restricted to g0, dim {}", model.g0_basis.ncols()));
    let ps = &model.product;

    let access = larc_check(ps, &default_points(ps.state_dim()));
    report.check(
        "LARC",
        access.larc,
        format!("rank of the system algebra at {} points", access.points.len()),
    );
    if !access.larc {
        report
            .warnings
            .push("LARC fails: seeds are still periodic points, but interior claims are not supported".into());
    }
    report.accessibility = Some(access);

    let inner = ps.inner();
    let options = ScanOptions {
        rng_seed: config.rng_seed,
        parallelism: config.parallelism,
        consistency: None,
    };
    let scan = match seed_family_scan(inner, config.scan_time, config.n_laws, &options) {
        Ok(s) => s,
        Err(e) => return report.stop(&e),
    };
    let Some(x_star) = scan.certificates.first().map(|c| c.point()) else {
        let e = Error::DetGapTooSmall {
            gap: 0.0,
            threshold: 0.0,
        };
        report.warnings.push(scan.note.clone());
        report.scan = Some(scan);
        return report.stop(&e);
    };
    let k = ps.v_dim();
    let seeds: Vec<DVector<f64>> = scan
        .certificates
        .iter()
        .take(config.estimate_seeds.max(1))
        .map(|c| ps.join(&DVector::zeros(k), &c.point()))
        .collect();
    report.scan = Some(scan);

    let mut cloud = config.cloud.clone();
    cloud.rng_seed = config.rng_seed;
    cloud.parallelism = config.parallelism;
    let mut shooting = config.shooting.clone();
    shooting.rng_seed = config.rng_seed;
    shooting.parallelism = config.parallelism;
    let params = EstimateParams {
        cloud,
        r_match: config.r_match,
        shooting: Some(shooting),
    };
    match control_set_estimate(ps, &seeds, &params) {
        Ok(est) => report.estimate = Some(est),
        Err(e) => return report.stop(&e),
    }

    let mut fiber = config.fiber_shooting.clone();
    fiber.rng_seed = config.rng_seed;
    fiber.parallelism = config.parallelism;
    match fiber_closure_check(ps, &x_star, &grid(k, config.window), &fiber) {
        Ok(f) => report.fiber = Some(f),
        Err(e) => return report.stop(&e),
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        assert!(grid(0, 2).is_empty());
        assert_eq!(grid(1, 2).len(), 5);
        assert_eq!(grid(2, 1).len(), 9);
        assert_eq!(grid(1, 2)[0][0], -2.0);
    }
}
