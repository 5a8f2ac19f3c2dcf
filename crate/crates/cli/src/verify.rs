//! Invariant suites run by `solvctrl verify`.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;
use solvctrl::analysis::reach::random_law;
use solvctrl::analysis::seed::{seed_family_scan, ScanOptions};
use solvctrl::derivation::{generalized_kernel_checked, jordan_parts, kernel_split, leibniz_check, verify_parts};
use solvctrl::dynamics::{ControlledSystem, Direction, SemidirectLcs, SigmaASystem};
use solvctrl::{linalg, par, Derivation, Error, ErrorKind, GroupAutomorphism, LieAlgebra};

use crate::sysfile::{Model, SystemFile};

const SUITE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Set when the failure is a structural hypothesis rather than a residual.
    #[serde(skip)]
    pub guard: bool,
}

impl Check {
    fn residual(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= bound,
            detail: format!("{value:.3e} <= {bound:.1e}"),
            guard: false,
        }
    }

    fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
            guard: true,
        }
    }

    fn error(e: &Error) -> Self {
        Self {
            name: e.hypothesis().into(),
            passed: false,
            detail: e.to_string(),
            guard: e.kind() != ErrorKind::Numerical,
        }
    }
}

fn random_vec<R: Rng>(rng: &mut R, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-r..=r))
}

fn structure(g: &LieAlgebra, d: &nalgebra::DMatrix<f64>, out: &mut Vec<Check>) -> bool {
    out.push(Check::residual("Jacobi identity", g.jacobi_residual(), 1e-10));
    match leibniz_check(d, g) {
        Ok(r) => out.push(Check::residual("Leibniz rule", r.max_residual, r.threshold)),
        Err(e) => {
            out.push(Check::error(&e));
            return false;
        }
    }
    match jordan_parts(d) {
        Ok(parts) => {
            let r = verify_parts(d, &parts, Some(g));
            out.push(Check {
                name: "Jordan decomposition".into(),
                passed: r.passes(1e-9),
                detail: format!("reconstruction {:.3e}, commutators {:.3e}", r.reconstruction, r.max_commutator),
                guard: false,
            });
        }
        Err(e) => out.push(Check::error(&e)),
    }
    if let Err(e) = generalized_kernel_checked(d) {
        out.push(Check::error(&e));
    } else {
        out.push(Check::flag("generalized kernel agreement", true, "ker D^n = ker(H + E)"));
    }
    match Derivation::new(g, d.clone()).and_then(|d| kernel_split(g, &d)) {
        Ok(s) => out.push(Check::flag(
            "n + g0 = g",
            s.report.sum_is_whole,
            format!("dim(n + g0) = {} of {}", s.report.dim_n_plus_g0, s.report.dim_g),
        )),
        Err(e) => out.push(Check::error(&e)),
    }
    out.iter().all(|c| c.passed)
}

fn group_checks(sys: &SigmaASystem, scan_time: f64, out: &mut Vec<Check>) {
    let group = sys.group();
    let g = sys.algebra();
    let n = sys.dim();
    let mut rng = par::task_rng(SUITE_SEED, 0);

    let mut assoc: f64 = 0.0;
    let mut inverse: f64 = 0.0;
    let mut field: f64 = 0.0;
    for _ in 0..50 {
        let (x, y, z) = (random_vec(&mut rng, n, 1.0), random_vec(&mut rng, n, 1.0), random_vec(&mut rng, n, 1.0));
        let l = group.product(&group.product(&x, &y), &z);
        let r = group.product(&x, &group.product(&y, &z));
        assoc = assoc.max((&l - &r).norm() / l.norm().max(1.0));
        inverse = inverse.max(group.product(&x, &group.inverse(&x)).norm());
        let s = 1e-5;
        let fd = (group.product(&(&z * s), &x) - group.product(&(&z * -s), &x)) / (2.0 * s);
        field = field.max((fd - group.right_invariant_field(&z, &x)).norm());
    }
    out.push(Check::residual("BCH associativity", assoc, 1e-10));
    out.push(Check::residual("group inverse", inverse, 1e-12));
    out.push(Check::residual("right-invariant field", field, 1e-6));

    let mut bracket: f64 = 0.0;
    let mut roundtrip: f64 = 0.0;
    let mut translation: f64 = 0.0;
    for _ in 0..10 {
        let law = random_law(sys.control_range(), &mut rng, 2.0, 3);
        let phi = match sys.flow_b(&law) {
            Ok(p) => p,
            Err(e) => {
                out.push(Check::error(&e));
                return;
            }
        };
        let scale = phi.matrix().norm().max(1.0);
        bracket = bracket.max(GroupAutomorphism::bracket_residual(g, phi.matrix()) / (scale * scale));
        if phi.det_gap() > phi.det_threshold() {
            let y = random_vec(&mut rng, n, 1.0);
            match group.f_phi_invert(&phi, &y) {
                Ok(x) => roundtrip = roundtrip.max((group.f_phi_apply(&phi, &x) - &y).norm() / (1.0 + y.norm())),
                Err(e) => {
                    out.push(Check::error(&e));
                    return;
                }
            }
        }
        let x = random_vec(&mut rng, n, 1.0);
        let composed = sys.solve(&x, &law);
        let direct = sys.integrate_direct(&x, &law);
        match (composed, direct) {
            (Ok(a), Ok(b)) => translation = translation.max((a - b).norm()),
            (Err(e), _) | (_, Err(e)) => {
                out.push(Check::error(&e));
                return;
            }
        }
    }
    out.push(Check::residual("automorphism certificate", bracket, 1e-9));
    out.push(Check::residual("f_phi round trip", roundtrip, 1e-9));
    out.push(Check::residual("translation identity", translation, 1e-6));

    let options = ScanOptions {
        rng_seed: SUITE_SEED,
        parallelism: Default::default(),
        consistency: None,
    };
    match seed_family_scan(sys, scan_time, 3, &options) {
        Ok(r) => {
            let worst = r.certificates.iter().map(|c| c.periodicity_residual).fold(0.0, f64::max);
            out.push(Check {
                name: "seed periodicity".into(),
                passed: r.failures.is_empty() && worst <= 1e-7,
                detail: format!("{} seeds, worst residual {worst:.3e}", r.certificates.len()),
                guard: false,
            });
        }
        Err(e) => out.push(Check::error(&e)),
    }
}

fn semidirect_checks(sd: &SemidirectLcs, out: &mut Vec<Check>) -> Option<SigmaASystem> {
    let model = match sd.build() {
        Ok(m) => m,
        Err(e) => {
            out.push(Check::error(&e));
            return None;
        }
    };
    out.push(Check::flag("semidirect reduction", true, "n0 = 0, det D0 != 0, A nilpotent"));
    let ps = &model.product;
    let (k, q) = (ps.v_dim(), ps.inner().dim());
    let mut rng = par::task_rng(SUITE_SEED, 1);
    let mut field: f64 = 0.0;
    let mut assoc: f64 = 0.0;
    for _ in 0..10 {
        let (y, z) = (random_vec(&mut rng, k, 1.0), random_vec(&mut rng, q, 1.0));
        let (h, x) = (random_vec(&mut rng, k, 1.0), random_vec(&mut rng, q, 1.0));
        field = field.max(model.field_check(&y, &z, &h, &x));
        let p: Vec<_> = (0..3).map(|_| (random_vec(&mut rng, k, 1.0), random_vec(&mut rng, q, 1.0))).collect();
        let ab = model.group_law((&p[0].0, &p[0].1), (&p[1].0, &p[1].1));
        let l = model.group_law((&ab.0, &ab.1), (&p[2].0, &p[2].1));
        let bc = model.group_law((&p[1].0, &p[1].1), (&p[2].0, &p[2].1));
        let r = model.group_law((&p[0].0, &p[0].1), (&bc.0, &bc.1));
        assoc = assoc.max((l.0 - r.0).norm().max((l.1 - r.1).norm()));
    }
    out.push(Check::residual("semidirect field", field, 1e-6));
    out.push(Check::residual("semidirect associativity", assoc, 1e-9));

    let kernel = linalg::null_space(ps.a());
    let mut shift: f64 = 0.0;
    for _ in 0..10 {
        if kernel.ncols() == 0 {
            break;
        }
        let v = &kernel * random_vec(&mut rng, kernel.ncols(), 1.0);
        let x = random_vec(&mut rng, q, 0.5);
        let law = random_law(ps.range(), &mut rng, 2.0, 3);
        let direct = ps.advance(&ps.join(&v, &x), &law, Direction::Forward);
        let base = ps.advance(&ps.join(&DVector::zeros(k), &x), &law, Direction::Forward);
        match (direct, base) {
            (Ok(d), Ok(b)) => {
                let shifted = b + ps.join(&v, &DVector::zeros(q));
                shift = shift.max((d - shifted).norm());
            }
            (Err(e), _) | (_, Err(e)) => {
                out.push(Check::error(&e));
                return None;
            }
        }
    }
    out.push(Check::residual("shift along ker A", shift, 1e-9));
    Some(ps.inner().clone())
}

/// All invariant checks for one system file, in a fixed order.
pub fn suite(file: &SystemFile) -> Vec<Check> {
    let mut out = Vec::new();
    let g = match file.algebra() {
        Ok(g) => g,
        Err(e) => return vec![Check::error(&e)],
    };
    let d = match file.model() {
        Ok(Model::Sigma(s)) => s.d0().matrix().clone(),
        Ok(Model::Semidirect(sd)) => sd.derivation.clone(),
        Err(e) => {
            out.push(Check::error(&e));
            return out;
        }
    };
    if !structure(&g, &d, &mut out) {
        return out;
    }
    let sigma = match file.model().expect("checked above") {
        Model::Sigma(s) => Some(s),
        Model::Semidirect(sd) => semidirect_checks(&sd, &mut out),
    };
    if let Some(s) = sigma {
        group_checks(&s, file.analysis.scan_time, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn catalog_entries_pass() {
        for name in ["heisenberg3", "euclid-like"] {
            let checks = suite(&examples::lookup(name).unwrap());
            assert!(checks.iter().all(|c| c.passed), "{name}: {checks:?}");
            assert!(checks.len() > 10);
        }
    }

    #[test]
    fn tampered_constants_name_jacobi() {
        let mut f = examples::lookup("heisenberg3").unwrap();
        f.algebra.brackets.push((0, 2, 0, 1.0));
        let checks = suite(&f);
        assert!(!checks[0].passed);
        assert_eq!(checks[0].name, "Jacobi identity");
        assert!(checks[0].guard);
    }
}
