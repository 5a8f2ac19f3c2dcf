//! System definition files (TOML, strict).
//!
//! ```toml
//! name = "heisenberg3"
//!
//! [algebra]
//! dim = 3
//! brackets = [[0, 1, 2, 1.0]]   # [e_i, e_j] has c on e_k, 0-based
//!
//! [derivation]
//! matrix = [[1, 0, 0], [0, 1, 0], [0, 0, 2]]
//!
//! [controls]
//! mode = "sigma"                # or "semidirect"
//! vectors = [[1, 0, 0], [0, 1, 0]]
//! radii = [1.0, 1.0]
//! ```

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use solvctrl::analysis::{PipelineConfig, ReachParams, ShootingParams};
use solvctrl::dynamics::{ControlRange, SemidirectLcs, SigmaASystem};
use solvctrl::{Error, LieAlgebra, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub algebra: AlgebraBlock,
    pub derivation: DerivationBlock,
    pub controls: ControlsBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraBlock {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default)]
    pub brackets: Vec<(usize, usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivationBlock {
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Affine system on a nilpotent group; `vectors` are the `Z_j`.
    #[default]
    Sigma,
    /// Linear system on a solvable group; `vectors` are the `Y_j`.
    Semidirect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsBlock {
    #[serde(default)]
    pub mode: Mode,
    pub vectors: Vec<Vec<f64>>,
    /// Per-channel derivations `D_j`, sigma mode only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derivations: Vec<Vec<Vec<f64>>>,
    pub radii: Vec<f64>,
    #[serde(default = "plus_one")]
    pub sign: i32,
}

fn plus_one() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisBlock {
    pub scan_time: f64,
    pub n_laws: usize,
    pub rng_seed: u64,
    pub budget: usize,
    pub horizon: f64,
    pub max_pieces: usize,
    pub r_match: f64,
    pub ball: f64,
    pub shooting_budget: usize,
    pub shooting_horizon: f64,
    /// Half-width of the integer grid on `V` for the fiber check.
    pub window: i32,
    pub fiber_ball: f64,
    pub fiber_budget: usize,
    pub fiber_horizon: f64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        Self {
            scan_time: 1.0,
            n_laws: 10,
            rng_seed: 0,
            budget: 1000,
            horizon: 1.0,
            max_pieces: 4,
            r_match: 0.05,
            ball: 0.05,
            shooting_budget: 100_000,
            shooting_horizon: 3.0,
            window: 2,
            fiber_ball: 0.1,
            fiber_budget: 20_000,
            fiber_horizon: 5.0,
        }
    }
}

/// A parsed file turned into library objects.
#[derive(Debug, Clone)]
pub enum Model {
    Sigma(SigmaASystem),
    Semidirect(SemidirectLcs),
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what}: expected a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn vector(v: &[f64], n: usize, what: &str) -> Result<DVector<f64>> {
    if v.len() != n {
        return Err(Error::Parse(format!("{what}: expected {n} entries, found {}", v.len())));
    }
    Ok(DVector::from_row_slice(v))
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut f: SystemFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        f.normalize();
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("system files serialize")
    }

    /// Brackets with `i < j`, sorted, zero entries dropped.
    pub fn normalize(&mut self) {
        let mut b: Vec<_> = self
            .algebra
            .brackets
            .iter()
            .filter(|t| t.3 != 0.0 && t.0 != t.1)
            .map(|&(i, j, k, c)| if i < j { (i, j, k, c) } else { (j, i, k, -c) })
            .collect();
        b.sort_by(|x, y| (x.0, x.1, x.2).cmp(&(y.0, y.1, y.2)).then(x.3.total_cmp(&y.3)));
        b.dedup();
        self.algebra.brackets = b;
    }

    pub fn algebra(&self) -> Result<LieAlgebra> {
        let labels = (!self.algebra.labels.is_empty()).then(|| self.algebra.labels.clone());
        LieAlgebra::from_triples(self.algebra.dim, labels, &self.algebra.brackets)
    }

    pub fn range(&self) -> Result<ControlRange> {
        if self.controls.radii.len() != self.controls.vectors.len() {
            return Err(Error::Parse(format!(
                "controls: {} vectors but {} radii",
                self.controls.vectors.len(),
                self.controls.radii.len()
            )));
        }
        ControlRange::new(self.controls.radii.clone())
    }

    pub fn model(&self) -> Result<Model> {
        let g = self.algebra()?;
        let n = g.dim();
        let d = matrix(&self.derivation.matrix, n, "derivation.matrix")?;
        let vectors = self
            .controls
            .vectors
            .iter()
            .enumerate()
            .map(|(j, v)| vector(v, n, &format!("controls.vectors[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let range = self.range()?;
        if self.controls.sign != 1 && self.controls.sign != -1 {
            return Err(Error::Parse("controls.sign must be 1 or -1".into()));
        }
        match self.controls.mode {
            Mode::Sigma => {
                let dj = self
                    .controls
                    .derivations
                    .iter()
                    .enumerate()
                    .map(|(j, m)| matrix(m, n, &format!("controls.derivations[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Sigma(SigmaASystem::new(g, d, dj, vectors, range, self.controls.sign)?))
            }
            Mode::Semidirect => {
                if !self.controls.derivations.is_empty() {
                    return Err(Error::Parse(
                        "controls.derivations is only allowed in sigma mode".into(),
                    ));
                }
                Ok(Model::Semidirect(SemidirectLcs::new(g, d, vectors, range)))
            }
        }
    }

    /// The nilpotent system the seed finder works on.
    pub fn sigma_system(&self) -> Result<SigmaASystem> {
        match self.model()? {
            Model::Sigma(s) => Ok(s),
            Model::Semidirect(sd) => Ok(sd.build()?.product.inner().clone()),
        }
    }

    pub fn reach_params(&self) -> ReachParams {
        let a = &self.analysis;
        ReachParams {
            budget: a.budget,
            horizon: a.horizon,
            max_pieces: a.max_pieces,
            rng_seed: a.rng_seed,
            ..Default::default()
        }
    }

    pub fn shooting_params(&self) -> ShootingParams {
        let a = &self.analysis;
        ShootingParams {
            ball: a.ball,
            budget: a.shooting_budget,
            horizon: a.shooting_horizon,
            max_pieces: a.max_pieces,
            rng_seed: a.rng_seed,
            ..Default::default()
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let a = &self.analysis;
        PipelineConfig {
            scan_time: a.scan_time,
            n_laws: a.n_laws,
            rng_seed: a.rng_seed,
            cloud: self.reach_params(),
            r_match: a.r_match,
            shooting: self.shooting_params(),
            window: a.window,
            fiber_shooting: ShootingParams {
                ball: a.fiber_ball,
                budget: a.fiber_budget,
                horizon: a.fiber_horizon,
                max_pieces: a.max_pieces,
                rng_seed: a.rng_seed,
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H3: &str = r#"
[algebra]
dim = 3
brackets = [[1, 0, 2, -1.0]]

[derivation]
matrix = [[1, 0, 0], [0, 1, 0], [0, 0, 2]]

[controls]
vectors = [[1, 0, 0], [0, 1, 0]]
radii = [1.0, 1.0]
"#;

    #[test]
    fn parses_and_normalizes() {
        let f = SystemFile::parse(H3).unwrap();
        assert_eq!(f.algebra.brackets, vec![(0, 1, 2, 1.0)]);
        assert_eq!(f.controls.mode, Mode::Sigma);
        assert_eq!(f.analysis, AnalysisBlock::default());
        assert!(matches!(f.model().unwrap(), Model::Sigma(_)));
    }

    #[test]
    fn round_trip() {
        let f = SystemFile::parse(H3).unwrap();
        let g = SystemFile::parse(&f.to_toml()).unwrap();
        assert_eq!(f, g);
        assert_eq!(f.to_toml(), g.to_toml());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = H3.replace("radii", "radius");
        assert!(matches!(SystemFile::parse(&text), Err(Error::Parse(_))));
        let text = format!("{H3}\n[analysis]\nbugdet = 3\n");
        let Err(Error::Parse(msg)) = SystemFile::parse(&text) else {
            panic!("typo accepted");
        };
        assert!(msg.contains("bugdet"));
    }

    #[test]
    fn parse_errors_carry_a_location() {
        let Err(Error::Parse(msg)) = SystemFile::parse("[algebra]\ndim = \n") else {
            panic!("accepted");
        };
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn shape_errors() {
        let text = H3.replace("[[1, 0, 0], [0, 1, 0], [0, 0, 2]]", "[[1, 0], [0, 1]]");
        let f = SystemFile::parse(&text).unwrap();
        assert!(matches!(f.model(), Err(Error::Parse(_))));
        let text = H3.replace("radii = [1.0, 1.0]", "radii = [1.0]");
        assert!(SystemFile::parse(&text).unwrap().model().is_err());
    }
}
