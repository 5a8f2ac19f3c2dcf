//! Built-in systems, addressed on the command line as `@name`.

use crate::sysfile::{AlgebraBlock, AnalysisBlock, ControlsBlock, DerivationBlock, Mode, SystemFile};

/// Entries checked by `verify --all-examples`.
pub const ALL: &[&str] = &["heisenberg3", "filiform4", "euclid-like", "abelian-2", "abelian-3", "rotation"];

fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn sigma(name: &str, dim: usize, brackets: Vec<(usize, usize, usize, f64)>, d: Vec<Vec<f64>>, vectors: Vec<Vec<f64>>) -> SystemFile {
    SystemFile {
        name: Some(name.into()),
        algebra: AlgebraBlock {
            dim,
            labels: Vec::new(),
            brackets,
        },
        derivation: DerivationBlock { matrix: d },
        controls: ControlsBlock {
            mode: Mode::Sigma,
            radii: vec![1.0; vectors.len()],
            vectors,
            derivations: Vec::new(),
            sign: 1,
        },
        analysis: AnalysisBlock::default(),
    }
}

pub fn lookup(name: &str) -> Option<SystemFile> {
    let f = match name {
        "heisenberg3" => sigma("heisenberg3", 3, vec![(0, 1, 2, 1.0)], diag(&[1.0, 1.0, 2.0]), vec![unit(3, 0), unit(3, 1)]),
        "filiform4" => sigma(
            "filiform4",
            4,
            vec![(0, 1, 2, 1.0), (0, 2, 3, 1.0)],
            diag(&[1.0, 1.0, 2.0, 3.0]),
            vec![unit(4, 0), unit(4, 1)],
        ),
        "rotation" => sigma(
            "rotation",
            2,
            Vec::new(),
            vec![vec![0.0, -1.0], vec![1.0, 0.0]],
            vec![unit(2, 0)],
        ),
        "euclid-like" => SystemFile {
            name: Some("euclid-like".into()),
            algebra: AlgebraBlock {
                dim: 3,
                labels: vec!["T".into(), "X".into(), "Y".into()],
                brackets: vec![(0, 1, 2, 1.0), (0, 2, 1, -1.0)],
            },
            derivation: DerivationBlock {
                matrix: diag(&[0.0, 1.0, 1.0]),
            },
            controls: ControlsBlock {
                mode: Mode::Semidirect,
                vectors: vec![unit(3, 0), unit(3, 1)],
                derivations: Vec::new(),
                radii: vec![1.0, 1.0],
                sign: 1,
            },
            analysis: AnalysisBlock {
                n_laws: 4,
                ..Default::default()
            },
        },
        other => {
            let n: usize = other.strip_prefix("abelian-")?.parse().ok().filter(|&n| n > 0)?;
            let mut f = sigma(other, n, Vec::new(), diag(&vec![1.0; n]), (0..n).map(|i| unit(n, i)).collect());
            f.analysis.n_laws = 4;
            f
        }
    };
    let mut f = f;
    f.normalize();
    Some(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysfile::Model;
    use solvctrl::catalog;

    #[test]
    fn entries_match_the_library_catalog() {
        let Model::Sigma(h) = lookup("heisenberg3").unwrap().model().unwrap() else {
            panic!("sigma expected");
        };
        let c = catalog::heisenberg3();
        assert_eq!(h.d0().matrix(), c.d0().matrix());
        assert_eq!(h.zj(), c.zj());
        assert_eq!(h.algebra().table(), c.algebra().table());

        let Model::Semidirect(e) = lookup("euclid-like").unwrap().model().unwrap() else {
            panic!("semidirect expected");
        };
        let c = catalog::euclid_like();
        assert_eq!(e.derivation, c.derivation);
        assert_eq!(e.algebra.table(), c.algebra.table());
    }

    #[test]
    fn every_entry_round_trips() {
        for name in ALL {
            let f = lookup(name).unwrap();
            assert_eq!(SystemFile::parse(&f.to_toml()).unwrap(), f, "{name}");
            assert!(f.model().is_ok(), "{name}");
        }
        assert!(lookup("abelian-0").is_none());
        assert!(lookup("nope").is_none());
        assert_eq!(lookup("abelian-5").unwrap().algebra.dim, 5);
    }
}
