use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;
use solvctrl::analysis::estimate::{control_set_estimate, ControlSetEstimate, EstimateParams};
use solvctrl::analysis::larc::{default_points, larc_check, AccessibilityReport};
use solvctrl::analysis::pipeline::{full_pipeline, Outcome, PipelineReport, SCHEMA};
use solvctrl::analysis::reach::ReachCloud;
use solvctrl::analysis::seed::{seed_family_scan, seed_finder, ScanOptions, ScanReport, SeedCertificate};
use solvctrl::derivation::{
    jordan_parts, kernel_split, n0_compactness_criterion, verify_parts, Compactness, JordanReport, KernelSplitReport,
};
use solvctrl::dynamics::{ControlLaw, ControlledSystem, SemidirectLcs};
use solvctrl::{Derivation, Error, ErrorKind, Parallelism};

use crate::examples;
use crate::output::{csv_row, float, json};
use crate::sysfile::{Model, SystemFile};
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "solvctrl", version, about = "Linear control systems on solvable Lie groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure checks, kernel split, Jordan decomposition, N0 criterion and LARC.
    Analyze(AnalyzeArgs),
    /// Periodic seeds from one law or a scan of laws near zero.
    Seed(SeedArgs),
    /// Forward and backward reachability clouds plus a control-set estimate.
    Reach(ReachArgs),
    /// Runs every invariant suite; exit code 0 iff all pass.
    Verify(VerifyArgs),
    /// Gnuplot data and script for a 2D projection of an estimate.
    ExportPlots(ExportArgs),
    /// Reduction to a product system followed by seeds, estimate and fiber check.
    Pipeline(PipelineArgs),
    /// Prints a built-in system file.
    Example { name: String },
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// System file, or `@name` for a built-in example.
    pub system: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    pub system: String,
    /// Period `S` for the zero law or the scan; defaults to the file's `scan_time`.
    #[arg(long)]
    pub time: Option<f64>,
    /// JSON list of `{duration, values}` pieces.
    #[arg(long, conflicts_with_all = ["scan", "time"])]
    pub law: Option<PathBuf>,
    /// Number of laws to scan.
    #[arg(long)]
    pub scan: Option<usize>,
    /// Shoot between every pair of scanned seeds.
    #[arg(long, requires = "scan")]
    pub consistency: bool,
    #[arg(long, env = "SOLVCTRL_SEED")]
    pub rng_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    pub system: String,
    /// `origin`, `seed` (the zero-law seed), or comma-separated coordinates.
    #[arg(long, default_value = "seed")]
    pub from: String,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, env = "SOLVCTRL_SEED")]
    pub rng_seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(required_unless_present = "all_examples")]
    pub system: Option<String>,
    #[arg(long, conflicts_with = "system")]
    pub all_examples: bool,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// `estimate.json` written by `reach`.
    pub estimate: PathBuf,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// 0-based coordinate on the horizontal axis.
    #[arg(long, default_value_t = 0)]
    pub x_axis: usize,
    #[arg(long, default_value_t = 1)]
    pub y_axis: usize,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    pub system: String,
    #[arg(long, env = "SOLVCTRL_SEED")]
    pub rng_seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failed command, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    Guard { hypothesis: String, message: String },
    Numerical { check: String, message: String },
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Lib(e) => match e.kind() {
                ErrorKind::Guard => 1,
                ErrorKind::Usage => 2,
                ErrorKind::Numerical => 3,
            },
            Failure::Guard { .. } => 1,
            Failure::Usage(_) => 2,
            Failure::Numerical { .. } => 3,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Lib(e) if e.kind() == ErrorKind::Usage => e.to_string(),
            Failure::Lib(e) => format!("{}: {e}", e.hypothesis()),
            Failure::Guard { hypothesis, message } => format!("hypothesis failed: {hypothesis}: {message}"),
            Failure::Numerical { check, message } => format!("check failed: {check}: {message}"),
            Failure::Usage(m) => m.clone(),
        }
    }
}

pub type CmdResult = std::result::Result<(), Failure>;

pub fn load_system(spec: &str) -> Result<SystemFile, Failure> {
    match spec.strip_prefix('@') {
        Some(name) => examples::lookup(name)
            .ok_or_else(|| Failure::Usage(format!("unknown example `{name}`; try one of {:?}", examples::ALL))),
        None => Ok(SystemFile::load(Path::new(spec))?),
    }
}

fn emit(text: &str, out: Option<&Path>) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn mode_name(m: &Model) -> &'static str {
    match m {
        Model::Sigma(_) => "sigma",
        Model::Semidirect(_) => "semidirect",
    }
}

#[derive(Serialize)]
struct AlgebraSummary {
    dim: usize,
    labels: Vec<String>,
    jacobi_residual: f64,
    solvable: bool,
    nilpotent: bool,
    nilpotency_class: Option<usize>,
    center_dim: usize,
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema: &'static str,
    system: Option<String>,
    mode: &'static str,
    algebra: AlgebraSummary,
    jordan: JordanReport,
    kernel_split: KernelSplitReport,
    g0_basis: Vec<Vec<f64>>,
    compactness: Compactness,
    accessibility: Option<AccessibilityReport>,
    warnings: Vec<String>,
}

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let file = load_system(&args.system)?;
    let model = file.model()?;
    let g = file.algebra()?;
    let d = match &model {
        Model::Sigma(s) => s.d0().clone(),
        Model::Semidirect(sd) => Derivation::new(&g, sd.derivation.clone())?,
    };
    let parts = jordan_parts(d.matrix())?;
    let jordan = verify_parts(d.matrix(), &parts, Some(&g));
    let split = kernel_split(&g, &d)?;
    let compactness = n0_compactness_criterion(&split.n0);
    let mut warnings = Vec::new();
    let accessibility = match &model {
        Model::Sigma(s) => Some(larc_check(s, &default_points(s.dim()))),
        Model::Semidirect(sd) => match sd.build() {
            Ok(m) => Some(larc_check(&m.product, &default_points(m.product.state_dim()))),
            Err(e) => {
                warnings.push(format!("LARC skipped: {e}"));
                None
            }
        },
    };
    if let Some(a) = &accessibility {
        if !a.larc {
            warnings.push("LARC fails at some sample point".into());
        }
    }
    let report = AnalyzeReport {
        schema: SCHEMA,
        system: file.name.clone(),
        mode: mode_name(&model),
        algebra: AlgebraSummary {
            dim: g.dim(),
            labels: g.labels().to_vec(),
            jacobi_residual: g.jacobi_residual(),
            solvable: g.is_solvable(),
            nilpotent: g.is_nilpotent(),
            nilpotency_class: g.nilpotency_class(),
            center_dim: g.center().dim(),
        },
        jordan,
        kernel_split: split.report.clone(),
        g0_basis: split.g0.vectors().iter().map(|v| v.iter().cloned().collect()).collect(),
        compactness: compactness.clone(),
        accessibility,
        warnings,
    };
    emit(&json(&report), args.out.as_deref())?;
    let larc = report.accessibility.as_ref().map(|a| a.larc.to_string()).unwrap_or_else(|| "skipped".into());
    eprintln!(
        "dim g = {}, dim n = {}, dim g0 = {}, dim n0 = {}, larc = {larc}",
        g.dim(),
        split.report.dim_n,
        split.report.dim_g0,
        split.report.dim_n0
    );
    if let Compactness::NotCompactInModel { note } = compactness {
        return Err(Failure::Guard {
            hypothesis: Error::N0NotTrivial { dim: split.n0.dim() }.hypothesis().into(),
            message: note,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedReport {
    schema: &'static str,
    system: Option<String>,
    rng_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<SeedCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scan: Option<ScanReport>,
}

pub fn seed(args: &SeedArgs) -> CmdResult {
    let file = load_system(&args.system)?;
    let sys = file.sigma_system()?;
    let rng_seed = args.rng_seed.unwrap_or(file.analysis.rng_seed);
    let time = args.time.unwrap_or(file.analysis.scan_time);
    let mut report = SeedReport {
        schema: SCHEMA,
        system: file.name.clone(),
        rng_seed,
        certificate: None,
        scan: None,
    };
    if let Some(n) = args.scan {
        let mut shooting = file.shooting_params();
        shooting.rng_seed = rng_seed;
        let options = ScanOptions {
            rng_seed,
            parallelism: Parallelism::default(),
            consistency: args.consistency.then_some(shooting),
        };
        let scan = seed_family_scan(&sys, time, n, &options)?;
        eprintln!("{} of {n} laws certified; {}", scan.certificates.len(), scan.note);
        if scan.certificates.is_empty() && n > 0 {
            emit(&json(&scan), args.out.as_deref())?;
            return Err(Failure::Guard {
                hypothesis: "det(I - phi) != 0".into(),
                message: scan.note.clone(),
            });
        }
        report.scan = Some(scan);
    } else {
        let law = match &args.law {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                serde_json::from_str::<ControlLaw>(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
            }
            None => ControlLaw::zero(sys.controls(), time)?,
        };
        let c = seed_finder(&sys, &law)?;
        eprintln!("x* = {:?}, periodicity residual {:.3e}", c.x_star, c.periodicity_residual);
        report.certificate = Some(c);
    }
    emit(&json(&report), args.out.as_deref())
}

fn parse_point(spec: &str, n: usize) -> Result<DVector<f64>, Failure> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(format!("--from: {e}")))?;
    if v.len() != n {
        return Err(Failure::Usage(format!("--from: expected {n} coordinates, found {}", v.len())));
    }
    Ok(DVector::from_vec(v))
}

fn cloud_csv(cloud: &ReachCloud) -> String {
    let n = cloud.dim();
    let mut s = csv_row(
        std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x_{i}")))
            .chain(std::iter::once("law_id".to_string())),
    );
    for sample in &cloud.samples {
        s.push_str(&csv_row(
            std::iter::once(float(sample.time))
                .chain(sample.point.iter().map(|x| float(*x)))
                .chain(std::iter::once(sample.law_id.to_string())),
        ));
    }
    s
}

#[derive(Serialize)]
struct EstimateFile<'a> {
    schema: &'static str,
    system: Option<String>,
    rng_seed: u64,
    budget: usize,
    horizon: f64,
    estimate: &'a ControlSetEstimate,
}

pub fn reach(args: &ReachArgs) -> CmdResult {
    let file = load_system(&args.system)?;
    let model = file.model()?;
    let product;
    let sigma;
    let sys: &dyn ControlledSystem = match &model {
        Model::Sigma(s) => {
            sigma = s.clone();
            &sigma
        }
        Model::Semidirect(sd) => {
            product = sd.build()?.product;
            &product
        }
    };
    let n = sys.state_dim();
    let base = match args.from.as_str() {
        "origin" => DVector::zeros(n),
        "seed" => {
            let inner = file.sigma_system()?;
            let c = seed_finder(&inner, &ControlLaw::zero(inner.controls(), file.analysis.scan_time)?)?;
            let mut x = DVector::zeros(n);
            x.rows_mut(n - inner.dim(), inner.dim()).copy_from(&c.point());
            x
        }
        other => parse_point(other, n)?,
    };
    let mut cloud = file.reach_params();
    cloud.rng_seed = args.rng_seed.unwrap_or(file.analysis.rng_seed);
    if let Some(b) = args.budget {
        cloud.budget = b;
    }
    if let Some(h) = args.horizon {
        cloud.horizon = h;
    }
    if args.sequential {
        cloud.parallelism = Parallelism::Sequential;
    }
    let params = EstimateParams {
        cloud: cloud.clone(),
        r_match: file.analysis.r_match,
        shooting: None,
    };
    let est = control_set_estimate(sys, &[base], &params)?;
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("forward.csv"), cloud_csv(&est.forward[0]))?;
    fs::write(args.out_dir.join("backward.csv"), cloud_csv(&est.backward[0]))?;
    let doc = EstimateFile {
        schema: SCHEMA,
        system: file.name.clone(),
        rng_seed: cloud.rng_seed,
        budget: cloud.budget,
        horizon: cloud.horizon,
        estimate: &est,
    };
    fs::write(args.out_dir.join("estimate.json"), json(&doc))?;
    eprintln!(
        "{} forward, {} backward samples; {} inliers; forward spread rank {}",
        est.forward_samples,
        est.backward_samples,
        est.inliers.len(),
        est.forward[0].spread_rank()
    );
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let names: Vec<String> = if args.all_examples {
        examples::ALL.iter().map(|n| format!("@{n}")).collect()
    } else {
        vec![args.system.clone().expect("clap requires a system")]
    };
    let mut first_failure: Option<Failure> = None;
    for name in &names {
        let file = match load_system(name) {
            Ok(f) => f,
            Err(e) => {
                if args.all_examples {
                    first_failure.get_or_insert(e);
                    continue;
                }
                return Err(e);
            }
        };
        for c in verify::suite(&file) {
            println!("{} {name} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            if !c.passed && first_failure.is_none() {
                first_failure = Some(if c.guard {
                    Failure::Guard {
                        hypothesis: c.name,
                        message: c.detail,
                    }
                } else {
                    Failure::Numerical {
                        check: c.name,
                        message: c.detail,
                    }
                });
            }
        }
    }
    match first_failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

pub fn export_plots(args: &ExportArgs) -> CmdResult {
    let text = fs::read_to_string(&args.estimate)?;
    let doc: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", args.estimate.display())))?;
    let est = doc.get("estimate").unwrap_or(&doc);
    let points = |key: &str| -> Result<Vec<Vec<f64>>, Failure> {
        match est.get(key) {
            None | Some(serde_json::Value::Null) => Ok(Vec::new()),
            Some(v) => serde_json::from_value(v.clone())
                .map_err(|e| Failure::Usage(format!("{}: `{key}`: {e}", args.estimate.display()))),
        }
    };
    let inliers = points("inliers")?;
    let seeds = points("seeds")?;
    let dim = inliers.iter().chain(&seeds).map(Vec::len).max().unwrap_or(0);
    if dim > 0 && (args.x_axis >= dim || args.y_axis >= dim) {
        return Err(Failure::Usage(format!(
            "axes ({}, {}) out of range for dimension {dim}",
            args.x_axis, args.y_axis
        )));
    }
    let project = |pts: &[Vec<f64>]| {
        let mut s = String::new();
        for p in pts {
            let _ = writeln!(s, "{} {}", float(p[args.x_axis]), float(p[args.y_axis]));
        }
        s
    };
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("inliers.dat"), project(&inliers))?;
    fs::write(args.out_dir.join("seeds.dat"), project(&seeds))?;
    let (xl, yl) = (args.x_axis + 1, args.y_axis + 1);
    let script = format!(
        "set xlabel \"x_{xl}\"\nset ylabel \"x_{yl}\"\nset key outside\n\
         plot \"inliers.dat\" using 1:2 with points pt 7 ps 0.3 title \"inliers\", \\\n     \
         \"seeds.dat\" using 1:2 with points pt 2 ps 1.5 title \"seeds\"\n"
    );
    fs::write(args.out_dir.join("plot.gp"), script)?;
    if inliers.is_empty() {
        eprintln!("warning: estimate has no inliers; wrote empty data files");
    }
    Ok(())
}

pub fn pipeline(args: &PipelineArgs) -> CmdResult {
    let file = load_system(&args.system)?;
    let sd = match file.model()? {
        Model::Semidirect(sd) => sd,
        Model::Sigma(s) => {
            if s.dj().iter().any(|d| d.matrix().iter().any(|x| *x != 0.0)) || s.sign() != 1 {
                return Err(Failure::Usage(
                    "pipeline needs a semidirect file or a sigma file without control derivations".into(),
                ));
            }
            SemidirectLcs::new(
                s.algebra().clone(),
                s.d0().matrix().clone(),
                s.zj().to_vec(),
                s.control_range().clone(),
            )
        }
    };
    let mut config = file.pipeline_config();
    if let Some(seed) = args.rng_seed {
        config.rng_seed = seed;
    }
    let report: PipelineReport = full_pipeline(&sd, &config);
    emit(&json(&report), args.out.as_deref())?;
    for h in &report.hypotheses {
        eprintln!("{} {}: {}", if h.holds { "ok  " } else { "FAIL" }, h.name, h.detail);
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match (&report.outcome, report.stop_kind()) {
        (Outcome::Completed, _) => {
            if let Some(f) = &report.fiber {
                eprintln!("fiber: {}/{} grid points verified both ways", f.verified_both, f.points.len());
            }
            Ok(())
        }
        (Outcome::Stopped { hypothesis, message, .. }, Some(ErrorKind::Guard)) => Err(Failure::Guard {
            hypothesis: hypothesis.clone(),
            message: message.clone(),
        }),
        (Outcome::Stopped { hypothesis, message, .. }, _) => Err(Failure::Numerical {
            check: hypothesis.clone(),
            message: message.clone(),
        }),
    }
}

pub fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Seed(a) => seed(a),
        Command::Reach(a) => reach(a),
        Command::Verify(a) => verify(a),
        Command::ExportPlots(a) => export_plots(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Example { name } => {
            let f = examples::lookup(name)
                .ok_or_else(|| Failure::Usage(format!("unknown example `{name}`; try one of {:?}", examples::ALL)))?;
            print!("{}", f.to_toml());
            Ok(())
        }
    }
}
