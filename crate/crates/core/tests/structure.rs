use nalgebra::DMatrix;
use solvctrl::catalog;
use solvctrl::derivation::{jordan_parts, kernel_split, n0_compactness_criterion, Compactness};
use solvctrl::{Derivation, ErrorKind};

#[test]
fn heisenberg_split_with_invertible_derivation() {
    let g = catalog::heisenberg_algebra();
    let d = Derivation::new(&g, catalog::diag(&[1.0, 1.0, 2.0])).unwrap();
    let s = kernel_split(&g, &d).unwrap();
    assert_eq!(s.report.dim_g0, 0);
    assert_eq!(s.report.dim_n, 3);
    assert!(s.report.sum_is_whole);
}

#[test]
fn euclid_split_has_rotation_direction_in_g0() {
    let g = catalog::euclid_algebra();
    let d = Derivation::new(&g, catalog::diag(&[0.0, 1.0, 1.0])).unwrap();
    let s = kernel_split(&g, &d).unwrap();
    assert_eq!(s.report.dim_g0, 1);
    assert_eq!(s.report.dim_n, 2);
    assert_eq!(s.report.dim_n0, 0);
    assert!(s.report.sum_is_whole);
}

#[test]
fn rotation_is_purely_elliptic() {
    let d = catalog::rotation().d0().matrix().clone();
    let p = jordan_parts(&d).unwrap();
    assert!(p.hyperbolic.norm() < 1e-12);
    assert!(p.nilpotent.norm() < 1e-12);
    assert!((&p.elliptic - &d).norm() < 1e-12);
}

#[test]
fn non_derivation_is_rejected() {
    let g = catalog::heisenberg_algebra();
    let err = Derivation::new(&g, DMatrix::identity(3, 3)).unwrap_err();
    assert_ne!(err.kind(), ErrorKind::Numerical);
}

#[test]
fn zero_derivation_fails_compactness_on_nilpotent_algebra() {
    let g = catalog::heisenberg_algebra();
    let d = Derivation::new(&g, DMatrix::zeros(3, 3)).unwrap();
    let s = kernel_split(&g, &d).unwrap();
    assert_eq!(s.report.dim_n0, 3);
    assert_ne!(n0_compactness_criterion(&s.n0), Compactness::Compact);
}
