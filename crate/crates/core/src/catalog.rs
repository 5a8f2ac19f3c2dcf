//! Built-in example algebras and systems.

use nalgebra::{DMatrix, DVector};

use crate::algebra::LieAlgebra;
use crate::dynamics::{ControlRange, SemidirectLcs, SigmaASystem};

fn labels(names: &[&str]) -> Option<Vec<String>> {
    Some(names.iter().map(|s| s.to_string()).collect())
}

/// `h3`: `[e1, e2] = e3`.
pub fn heisenberg_algebra() -> LieAlgebra {
    LieAlgebra::from_triples(3, None, &[(0, 1, 2, 1.0)]).expect("valid catalog algebra")
}

/// Filiform `n4`: `[e1, e2] = e3`, `[e1, e3] = e4`.
pub fn filiform_algebra() -> LieAlgebra {
    LieAlgebra::from_triples(4, None, &[(0, 1, 2, 1.0), (0, 2, 3, 1.0)])
        .expect("valid catalog algebra")
}

/// `{T, X, Y}` with `[T, X] = Y`, `[T, Y] = -X`.
pub fn euclid_algebra() -> LieAlgebra {
    LieAlgebra::from_triples(3, labels(&["T", "X", "Y"]), &[(0, 1, 2, 1.0), (0, 2, 1, -1.0)])
        .expect("valid catalog algebra")
}

/// `sl2`: `[h, e] = 2e`, `[h, f] = -2f`, `[e, f] = h`.
pub fn sl2_algebra() -> LieAlgebra {
    LieAlgebra::from_triples(
        3,
        labels(&["h", "e", "f"]),
        &[(0, 1, 1, 2.0), (0, 2, 2, -2.0), (1, 2, 0, 1.0)],
    )
    .expect("valid catalog algebra")
}

/// `h3` with drift `diag(1, 1, 2)` and controls along `e1`, `e2`.
pub fn heisenberg3() -> SigmaASystem {
    SigmaASystem::new(
        heisenberg_algebra(),
        diag(&[1.0, 1.0, 2.0]),
        vec![],
        vec![unit(3, 0), unit(3, 1)],
        ControlRange::uniform(2, 1.0).expect("positive radius"),
        1,
    )
    .expect("valid catalog system")
}

/// `n4` with drift `diag(1, 1, 2, 3)` and controls along `e1`, `e2`.
pub fn filiform4() -> SigmaASystem {
    SigmaASystem::new(
        filiform_algebra(),
        diag(&[1.0, 1.0, 2.0, 3.0]),
        vec![],
        vec![unit(4, 0), unit(4, 1)],
        ControlRange::uniform(2, 1.0).expect("positive radius"),
        1,
    )
    .expect("valid catalog system")
}

/// `{T, X, Y}` with `D = diag(0, 1, 1)` and control vectors `T`, `X`.
pub fn euclid_like() -> SemidirectLcs {
    SemidirectLcs::new(
        euclid_algebra(),
        diag(&[0.0, 1.0, 1.0]),
        vec![unit(3, 0), unit(3, 1)],
        ControlRange::uniform(2, 1.0).expect("positive radius"),
    )
}

/// `R^n` with drift `I` and one control per coordinate.
pub fn abelian(n: usize) -> SigmaASystem {
    SigmaASystem::new(
        LieAlgebra::abelian(n),
        DMatrix::identity(n, n),
        vec![],
        (0..n).map(|i| unit(n, i)).collect(),
        ControlRange::uniform(n, 1.0).expect("positive radius"),
        1,
    )
    .expect("valid catalog system")
}

/// Rotation drift on `R^2` with one control along `e1`; resonant at `S = 2 pi`.
pub fn rotation() -> SigmaASystem {
    SigmaASystem::new(
        LieAlgebra::abelian(2),
        DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        vec![],
        vec![unit(2, 0)],
        ControlRange::uniform(1, 1.0).expect("positive radius"),
        1,
    )
    .expect("valid catalog system")
}

pub fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(v))
}

pub fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}
