//! Command-line experiments. Every subcommand resolves to an
//! [`ExperimentConfig`] whose canonical JSON form heads each artifact file as
//! `# ssos {...}`, so a run can be reproduced from any of its outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{cluster_basis, lasserre_basis, ClusterLevel, ClusterStructure};
use crate::error::{Result, SsosError};
use crate::extract::{
    convergence_csv, convergence_study, gaps_non_increasing, linspace, median,
    piecewise_lower_bound, sigma34, ConvergenceRow,
};
use crate::mcpo::{mcpo_run, mcpo_run_fixed};
use crate::noise::NoiseDistribution;
use crate::poly::{simple_quadratic, Polynomial};
use crate::sdp::import_sdpa;
use crate::snl::{
    build_potential, delta_m, generate_instance, solve_ssos, AnchorMode, SnlBasis, SnlInstance,
    SnlProblemType,
};
use crate::solver::{kkt_residuals, solve, ExternalSolver, SdpSolver, SolverOptions};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SSOS_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "ssos",
    version,
    about = "Stochastic sum-of-squares experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Degree sweep on `(x - w)^2 + (w x)^2`, whose expected minimum is known.
    SimpleQuadratic(SimpleQuadraticArgs),
    /// Degree sweep on a polynomial read from a file.
    Convergence(ConvergenceArgs),
    /// Print basis multi-indices, one per line.
    BasisDump(BasisArgs),
    /// Solve an SDPA-format problem.
    SolveSdpa(SolveArgs),
    /// Generate a sensor network instance as JSON.
    SnlGen(SnlGenArgs),
    /// Localize the sensors of an instance with the moment relaxation.
    SnlSolve(SnlSolveArgs),
    /// Compare the relaxation against Monte Carlo point optimization.
    SnlBench(SnlBenchArgs),
    /// Monte Carlo point optimization on its own.
    Mcpo(McpoArgs),
    /// `gen`, `solve` and `bench` for sensor networks.
    #[command(subcommand)]
    Snl(SnlCommand),
    /// `dump`, same as `basis-dump`.
    #[command(subcommand)]
    Basis(BasisCommand),
    /// Same as `solve-sdpa`.
    Solve(SolveArgs),
}

#[derive(Subcommand, Debug)]
pub enum SnlCommand {
    Gen(SnlGenArgs),
    Solve(SnlSolveArgs),
    Bench(SnlBenchArgs),
}

#[derive(Subcommand, Debug)]
pub enum BasisCommand {
    Dump(BasisArgs),
}

impl Command {
    pub fn into_config(self) -> ExperimentConfig {
        use ExperimentConfig as E;
        match self {
            Command::SimpleQuadratic(a) => E::SimpleQuadratic(a),
            Command::Convergence(a) => E::Convergence(a),
            Command::BasisDump(a) | Command::Basis(BasisCommand::Dump(a)) => E::BasisDump(a),
            Command::SolveSdpa(a) | Command::Solve(a) => E::SolveSdpa(a),
            Command::SnlGen(a) | Command::Snl(SnlCommand::Gen(a)) => E::SnlGen(a),
            Command::SnlSolve(a) | Command::Snl(SnlCommand::Solve(a)) => E::SnlSolve(a),
            Command::SnlBench(a) | Command::Snl(SnlCommand::Bench(a)) => E::SnlBench(a),
            Command::Mcpo(a) => E::Mcpo(a),
        }
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    SimpleQuadratic(SimpleQuadraticArgs),
    Convergence(ConvergenceArgs),
    BasisDump(BasisArgs),
    SolveSdpa(SolveArgs),
    SnlGen(SnlGenArgs),
    SnlSolve(SnlSolveArgs),
    SnlBench(SnlBenchArgs),
    Mcpo(McpoArgs),
}

impl ExperimentConfig {
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("configs always serialize")
    }

    pub fn from_canonical(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The `# ssos {...}` line that heads artifact files.
    pub fn header(&self) -> String {
        format!("# ssos {}\n", self.canonical())
    }

    /// Recovers the config from an artifact's first line.
    pub fn from_header(artifact: &str) -> Result<Self> {
        let line = artifact.lines().next().unwrap_or_default();
        let json = line
            .strip_prefix("# ssos ")
            .ok_or_else(|| SsosError::parse(1, "artifact has no `# ssos` header"))?;
        Self::from_canonical(json)
    }
}

/// Degrees given as `A..B` (inclusive) or a comma list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DegreeList(pub Vec<u32>);

fn parse_degrees(s: &str) -> std::result::Result<DegreeList, String> {
    let bad = || format!("bad degree list `{s}` (use `2..5` or `2,3,4`)");
    let v: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad())?
    };
    if v.is_empty() || v.contains(&0) {
        return Err(bad());
    }
    Ok(DegreeList(v))
}

fn parse_noise(s: &str) -> std::result::Result<String, String> {
    s.parse::<NoiseDistribution>()
        .map(|_| s.trim().to_string())
        .map_err(|e| e.to_string())
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("tolerance must be a positive number, got `{s}`")),
    }
}

fn solver_options(tol: f64) -> SolverOptions {
    SolverOptions {
        tol_gap: tol,
        tol_feas: tol,
        ..SolverOptions::default()
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimpleQuadraticArgs {
    #[arg(long, value_parser = parse_degrees, default_value = "2..5")]
    pub degrees: DegreeList,
    /// `uniform` or `gaussian:SIGMA`.
    #[arg(long, value_parser = parse_noise, default_value = "uniform")]
    pub noise: String,
    /// Grid points for the sampled lower-bound functions.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Also compute a step-function bound on this many grid points.
    #[arg(long)]
    pub piecewise: Option<usize>,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    pub tol: f64,
    /// Convergence CSV path; lower-bound samples and a gnuplot script are
    /// written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceArgs {
    /// Polynomial in the plain-text format.
    #[arg(long)]
    pub poly: PathBuf,
    /// Reference value of the expected minimum.
    #[arg(long = "p-star")]
    pub p_star: f64,
    #[arg(long, value_parser = parse_degrees, default_value = "2..5")]
    pub degrees: DegreeList,
    #[arg(long, value_parser = parse_noise, default_value = "uniform")]
    pub noise: String,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisArgs {
    /// Decision variables.
    #[arg(long)]
    pub n: usize,
    /// Noise variables.
    #[arg(long, default_value_t = 0)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub s: u32,
    /// Split the decision variables into this many contiguous clusters on a
    /// ring and use the cluster basis with body order 2.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub sdpa: PathBuf,
    /// External SDPA solver program (CSDP command line) instead of the
    /// built-in interior-point method.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnlTypeArgs {
    /// Spatial dimension.
    #[arg(long = "l", default_value_t = 1)]
    pub dim: usize,
    /// Sensors.
    #[arg(long = "N", default_value_t = 5)]
    pub n_sensors: usize,
    /// Anchors; defaults to one more than the dimension.
    #[arg(long = "K")]
    pub n_anchors: Option<usize>,
    /// Sensing radius.
    #[arg(long = "r", default_value_t = 3.0)]
    pub radius: f64,
    #[arg(long = "eps", default_value_t = 0.1)]
    pub epsilon: f64,
    /// Pin this many sensors instead of using soft anchors.
    #[arg(long = "hard")]
    pub n_hard: Option<usize>,
    /// Clusters.
    #[arg(long = "nc", default_value_t = 1)]
    pub n_clusters: usize,
    /// Noise variables; defaults to the cluster count.
    #[arg(long = "d")]
    pub noise_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SnlTypeArgs {
    pub fn problem_type(&self, seed: u64) -> SnlProblemType {
        SnlProblemType {
            dim: self.dim,
            n_sensors: self.n_sensors,
            n_anchors: self.n_anchors.unwrap_or(self.dim + 1),
            radius: self.radius,
            epsilon: self.epsilon,
            anchor_mode: match self.n_hard {
                Some(n_hard) => AnchorMode::Hard { n_hard },
                None => AnchorMode::Soft,
            },
            n_clusters: self.n_clusters,
            noise_dim: self.noise_dim,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BasisChoice {
    Full,
    Cluster,
}

impl From<BasisChoice> for SnlBasis {
    fn from(b: BasisChoice) -> Self {
        match b {
            BasisChoice::Full => SnlBasis::Full,
            BasisChoice::Cluster => SnlBasis::Cluster,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnlGenArgs {
    #[command(flatten)]
    pub problem: SnlTypeArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnlSolveArgs {
    /// Instance JSON written by `snl-gen`.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub basis: BasisChoice,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnlBenchArgs {
    #[command(flatten)]
    pub problem: SnlTypeArgs,
    /// Instances; instance `i` uses seed `seed + i`.
    #[arg(long = "L", default_value_t = 5)]
    pub instances: usize,
    /// Monte Carlo samples per instance.
    #[arg(long = "T", default_value_t = 50)]
    pub samples: usize,
    #[arg(long, value_enum, default_value = "full")]
    pub basis: BasisChoice,
    #[arg(long, value_parser = parse_tol, default_value = "1e-8")]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McpoArgs {
    #[arg(long = "T", default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Polynomial file; the simple quadratic when neither this nor an
    /// instance is given.
    #[arg(long, conflicts_with = "instance")]
    pub poly: Option<PathBuf>,
    /// Sensor network instance; pinned sensors stay fixed.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, value_parser = parse_noise, default_value = "uniform")]
    pub noise: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a run produced: text for standard output and files to write. File
/// bodies do not yet carry the config header.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub files: Vec<(PathBuf, String)>,
}

impl Output {
    /// The body goes to `out` when given and to standard output otherwise.
    fn emit(&mut self, out: &Option<PathBuf>, body: String) {
        match out {
            Some(p) => self.files.push((p.clone(), body)),
            None => self.stdout.push_str(&body),
        }
    }
}

/// Reads a file, skipping leading `#` header lines.
pub fn read_artifact(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .skip_while(|l| l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n"))
}

fn noise_for(spec: &str, dim: usize) -> Result<NoiseDistribution> {
    Ok(spec.parse::<NoiseDistribution>()?.with_dim(dim))
}

/// `E[w^4 / (1 + w^2)]`, the expected minimum of the simple quadratic.
pub fn simple_quadratic_reference(noise: &NoiseDistribution) -> Result<f64> {
    match noise {
        NoiseDistribution::Uniform { .. } => Ok(std::f64::consts::FRAC_PI_4 - 2.0 / 3.0),
        NoiseDistribution::Gaussian { sigmas } => {
            let s = sigmas[0];
            if s == 0.0 {
                return Ok(0.0);
            }
            // composite Simpson on +-12 sigma
            let k = 20_000;
            let (lo, hi) = (-12.0 * s, 12.0 * s);
            let h = (hi - lo) / k as f64;
            let g = |w: f64| {
                let dens =
                    (-0.5 * (w / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                w.powi(4) / (1.0 + w * w) * dens
            };
            let mut acc = g(lo) + g(hi);
            for i in 1..k {
                acc += g(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            Ok(acc * h / 3.0)
        }
    }
}

fn c_star(w: f64) -> f64 {
    w.powi(4) / (1.0 + w * w)
}

fn plot_script(csv: &str, lower: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 1000,420\n\
         set output 'convergence.png'\n\
         set multiplot layout 1,2\n\
         set logscale y\n\
         set xlabel 's'\n\
         set ylabel 'p* - p*_2s'\n\
         plot '{csv}' using 1:3 with linespoints\n\
         unset logscale y\n\
         set xlabel 'omega'\n\
         set ylabel 'c(omega)'\n\
         plot for [k=2:*] '{lower}' using 1:k with lines\n\
         unset multiplot\n"
    )
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn run_simple_quadratic(a: &SimpleQuadraticArgs) -> Result<Output> {
    let noise = noise_for(&a.noise, 1)?;
    let p_star = simple_quadratic_reference(&noise)?;
    let opts = solver_options(a.tol);
    let f = simple_quadratic();
    let rows = convergence_study(&f, &noise, &a.degrees.0, p_star, &opts)?;
    let mut out = Output::default();
    let csv = convergence_csv(&rows);
    let mut summary = String::new();
    let _ = writeln!(summary, "p* = {p_star:.10}");
    for r in &rows {
        let _ = writeln!(
            summary,
            "s = {}: p*_2s = {:.10}  dual = {:.10}  gap = {:.3e}",
            r.s, r.p_star_2s, r.dual_value, r.gap
        );
    }
    let _ = writeln!(
        summary,
        "gaps non-increasing: {}",
        gaps_non_increasing(&rows, 1e-7)
    );
    let grid = linspace(-1.0, 1.0, a.grid.max(2));
    let mut lower = String::from("omega");
    for r in &rows {
        let _ = write!(lower, ",c_s{}", r.s);
    }
    lower.push_str(",c_star\n");
    for &w in &grid {
        let _ = write!(lower, "{w:.6}");
        for r in &rows {
            let _ = write!(lower, ",{:.12e}", r.lower_bound.evaluate(&[w])?);
        }
        let _ = writeln!(lower, ",{:.12e}", c_star(w));
    }
    if let Some(sp) = a.piecewise {
        let s = a.degrees.0.iter().copied().max().unwrap_or(2);
        let pw = piecewise_lower_bound(&f, (-1.0, 1.0), sp, s, &opts)?;
        if let crate::extract::LowerBoundFn::Piecewise { grid, values } = &pw {
            summary.push_str("piecewise bound (omega, value, c*):\n");
            for (w, v) in grid.iter().zip(values) {
                let _ = writeln!(summary, "  {w:+.4}  {v:.10}  {:.10}", c_star(*w));
            }
        }
    }
    match &a.out {
        Some(p) => {
            let lower_path = sibling(p, ".lower.csv");
            let script = plot_script(
                &p.file_name().unwrap_or_default().to_string_lossy(),
                &lower_path.file_name().unwrap_or_default().to_string_lossy(),
            );
            out.files.push((p.clone(), csv));
            out.files.push((lower_path, lower));
            out.files.push((sibling(p, ".gp"), script));
            out.stdout = summary;
        }
        None => {
            out.stdout = csv;
        }
    }
    Ok(out)
}

fn run_convergence(a: &ConvergenceArgs) -> Result<Output> {
    let f = Polynomial::from_text(&read_artifact(&a.poly)?)?;
    let noise = noise_for(&a.noise, f.n_w())?;
    let rows: Vec<ConvergenceRow> =
        convergence_study(&f, &noise, &a.degrees.0, a.p_star, &solver_options(a.tol))?;
    let mut out = Output::default();
    out.emit(&a.out, convergence_csv(&rows));
    Ok(out)
}

fn run_basis_dump(a: &BasisArgs) -> Result<Output> {
    let basis = match a.clusters {
        None => lasserre_basis(a.n, a.d, a.s),
        Some(k) => {
            if k == 0 || k > a.n {
                return Err(SsosError::Parameter(format!(
                    "cannot split {} variables into {k} clusters",
                    a.n
                )));
            }
            let partition: Vec<Vec<usize>> = (0..k)
                .map(|c| (c * a.n / k..(c + 1) * a.n / k).collect())
                .collect();
            let edges: Vec<(usize, usize)> = match k {
                1 => Vec::new(),
                2 => vec![(0, 1)],
                _ => (0..k)
                    .map(|c| (c.min((c + 1) % k), c.max((c + 1) % k)))
                    .collect(),
            };
            let cs = ClusterStructure {
                partition,
                edges,
                noise_assignment: vec![Vec::new(); k],
            };
            cluster_basis(
                a.n,
                a.d,
                &cs,
                ClusterLevel::new(2, a.s).with_total_degree(a.s),
            )?
        }
    };
    let mut out = Output::default();
    out.emit(&a.out, basis.dump());
    Ok(out)
}

fn run_solve(a: &SolveArgs) -> Result<Output> {
    let p = import_sdpa(&read_artifact(&a.sdpa)?)?;
    let opts = solver_options(a.tol);
    let sol = match &a.solver {
        Some(prog) => ExternalSolver::new(prog.clone()).solve(&p, &opts)?,
        None => solve(&p, &opts)?,
    };
    let r = kkt_residuals(&p, &sol);
    let mut body = String::new();
    let _ = writeln!(body, "status {}", sol.status);
    let _ = writeln!(body, "iterations {}", sol.iterations);
    let _ = writeln!(body, "objective_primal {:.12e}", sol.objective_primal);
    let _ = writeln!(body, "objective_dual {:.12e}", sol.objective_dual);
    let _ = writeln!(body, "residual_primal {:.3e}", r.primal);
    let _ = writeln!(body, "residual_dual {:.3e}", r.dual);
    let _ = writeln!(body, "gap {:.3e}", r.gap);
    let y: Vec<String> = sol.y.iter().map(|v| format!("{v:.12e}")).collect();
    let _ = writeln!(body, "y {}", y.join(" "));
    let mut out = Output::default();
    out.emit(&a.out, body);
    Ok(out)
}

fn run_snl_gen(a: &SnlGenArgs) -> Result<Output> {
    let inst = generate_instance(&a.problem.problem_type(a.problem.seed))?;
    let mut out = Output::default();
    let mut json = inst.to_json()?;
    json.push('\n');
    out.emit(&a.out, json);
    Ok(out)
}

fn run_snl_solve(a: &SnlSolveArgs) -> Result<Output> {
    let inst = SnlInstance::from_json(&read_artifact(&a.instance)?)?;
    let est = solve_ssos(&inst, a.basis.into(), &solver_options(a.tol))?;
    let mut out = Output::default();
    let mut json = serde_json::to_string_pretty(&est)?;
    json.push('\n');
    out.emit(&a.out, json);
    Ok(out)
}

/// One benchmark row; `None` marks a failed method.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub instance: usize,
    pub seed: u64,
    pub ssos_status: String,
    pub ssos: Option<f64>,
    pub mcpo: Option<f64>,
}

/// Runs both methods on `instances` seeded problem types. Failures are
/// recorded per instance and do not stop the sweep.
pub fn snl_bench(a: &SnlBenchArgs) -> Result<Vec<BenchRow>> {
    if a.instances == 0 || a.samples < 2 {
        return Err(SsosError::Parameter("need L >= 1 and T >= 2".into()));
    }
    a.problem.problem_type(a.problem.seed).validate()?;
    let opts = solver_options(a.tol);
    Ok((0..a.instances)
        .into_par_iter()
        .map(|i| {
            let seed = a.problem.seed.wrapping_add(i as u64);
            let mut row = BenchRow {
                instance: i,
                seed,
                ssos_status: "failed".into(),
                ssos: None,
                mcpo: None,
            };
            let Ok(inst) = generate_instance(&a.problem.problem_type(seed)) else {
                row.ssos_status = "generation_failed".into();
                return row;
            };
            if let Ok(est) = solve_ssos(&inst, a.basis.into(), &opts) {
                row.ssos_status = est.status.to_string();
                row.ssos = Some(est.delta_m);
            }
            row.mcpo = (|| {
                let f = build_potential(&inst, inst.problem.epsilon)?;
                let dist = NoiseDistribution::uniform(inst.n_noise());
                let run = mcpo_run_fixed(&f, &dist, a.samples, seed, &inst.hard_constraints()?)?;
                delta_m(&inst, &run.mean, &run.variances())
            })()
            .ok();
            row
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6e}"))
}

/// Median and robust spread, absolute and relative to the median.
fn summary_row(name: &str, vals: &[f64]) -> String {
    let m = median(vals);
    let s = sigma34(vals);
    format!(
        "{name},{},{m:.6e},{s:.6e},{:.1}\n",
        vals.len(),
        100.0 * s / m.abs()
    )
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("instance,seed,ssos_status,ssos_delta_m,mcpo_delta_m\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.instance,
            r.seed,
            r.ssos_status,
            fmt_opt(r.ssos),
            fmt_opt(r.mcpo)
        );
    }
    out.push_str("\nmethod,n,median_delta_m,sigma34,sigma34_pct\n");
    let ssos: Vec<f64> = rows.iter().filter_map(|r| r.ssos).collect();
    let mcpo: Vec<f64> = rows.iter().filter_map(|r| r.mcpo).collect();
    out.push_str(&summary_row("ssos", &ssos));
    out.push_str(&summary_row("mcpo", &mcpo));
    out
}

fn run_snl_bench(a: &SnlBenchArgs) -> Result<Output> {
    let rows = snl_bench(a)?;
    let mut out = Output::default();
    out.emit(&a.out, bench_csv(&rows));
    Ok(out)
}

fn run_mcpo(a: &McpoArgs) -> Result<Output> {
    let result = match (&a.poly, &a.instance) {
        (_, Some(path)) => {
            let inst = SnlInstance::from_json(&read_artifact(path)?)?;
            let f = build_potential(&inst, inst.problem.epsilon)?;
            let dist = noise_for(&a.noise, inst.n_noise())?;
            mcpo_run_fixed(&f, &dist, a.samples, a.seed, &inst.hard_constraints()?)?
        }
        (Some(path), None) => {
            let f = Polynomial::from_text(&read_artifact(path)?)?;
            mcpo_run(&f, &noise_for(&a.noise, f.n_w())?, a.samples, a.seed)?
        }
        (None, None) => mcpo_run(
            &simple_quadratic(),
            &noise_for(&a.noise, 1)?,
            a.samples,
            a.seed,
        )?,
    };
    let mut out = Output::default();
    out.emit(&a.out, result.samples_csv());
    let _ = writeln!(
        out.stdout,
        "# integral {:.10e} over {} samples ({} diverged)",
        result.integral, result.n_samples, result.n_diverged
    );
    Ok(out)
}

/// Executes `cfg` without touching the filesystem for outputs.
pub fn run(cfg: &ExperimentConfig) -> Result<Output> {
    match cfg {
        ExperimentConfig::SimpleQuadratic(a) => run_simple_quadratic(a),
        ExperimentConfig::Convergence(a) => run_convergence(a),
        ExperimentConfig::BasisDump(a) => run_basis_dump(a),
        ExperimentConfig::SolveSdpa(a) => run_solve(a),
        ExperimentConfig::SnlGen(a) => run_snl_gen(a),
        ExperimentConfig::SnlSolve(a) => run_snl_solve(a),
        ExperimentConfig::SnlBench(a) => run_snl_bench(a),
        ExperimentConfig::Mcpo(a) => run_mcpo(a),
    }
}

/// Runs `cfg`, writes its files with the config header, and returns the
/// standard output text.
pub fn execute(cfg: &ExperimentConfig) -> Result<String> {
    let out = run(cfg)?;
    let header = cfg.header();
    for (path, body) in &out.files {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, format!("{header}{body}"))?;
    }
    Ok(out.stdout)
}

/// Exit status for an error: 1 for bad configuration, 2 for runtime
/// failures.
pub fn exit_code(e: &SsosError) -> i32 {
    match e {
        SsosError::Parameter(_) | SsosError::Parse { .. } | SsosError::Json(_) => 1,
        _ => 2,
    }
}

/// Sizes the global thread pool from [`THREADS_ENV`] if set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| {
        SsosError::Parameter(format!(
            "{THREADS_ENV} must be a positive integer, got `{v}`"
        ))
    })?;
    if n == 0 {
        return Err(SsosError::Parameter(format!(
            "{THREADS_ENV} must be positive"
        )));
    }
    // a pool that is already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> ExperimentConfig {
        let mut v = vec!["ssos"];
        v.extend_from_slice(args);
        Cli::try_parse_from(v).unwrap().command.into_config()
    }

    #[test]
    fn degree_lists() {
        assert_eq!(parse_degrees("2..5").unwrap().0, vec![2, 3, 4, 5]);
        assert_eq!(parse_degrees("2,4").unwrap().0, vec![2, 4]);
        assert!(parse_degrees("0..2").is_err());
        assert!(parse_degrees("x").is_err());
        assert!(parse_degrees("5..2").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        for args in [
            vec!["simple-quadratic", "--degrees", "2..3"],
            vec![
                "snl-bench",
                "--l",
                "1",
                "--N",
                "5",
                "--r",
                "3",
                "--eps",
                "0.1",
                "--L",
                "5",
                "--T",
                "50",
            ],
            vec!["basis-dump", "--n", "10", "--d", "1", "--s", "2"],
            vec!["mcpo", "--T", "10", "--seed", "4"],
        ] {
            let cfg = parse(&args);
            let text = cfg.canonical();
            let back = ExperimentConfig::from_canonical(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.canonical(), text);
            assert_eq!(ExperimentConfig::from_header(&cfg.header()).unwrap(), cfg);
        }
    }

    #[test]
    fn nested_forms_resolve_to_flat_ones() {
        assert_eq!(
            parse(&["snl", "gen", "--N", "4"]),
            parse(&["snl-gen", "--N", "4"])
        );
        assert_eq!(
            parse(&["basis", "dump", "--n", "3"]),
            parse(&["basis-dump", "--n", "3"])
        );
        assert_eq!(
            parse(&["solve", "--sdpa", "a.dat-s"]),
            parse(&["solve-sdpa", "--sdpa", "a.dat-s"])
        );
    }

    #[test]
    fn basis_dump_line_count() {
        let out = run(&parse(&["basis-dump", "--n", "10", "--d", "1", "--s", "2"])).unwrap();
        assert_eq!(out.stdout.lines().count(), 78);
        let out = run(&parse(&[
            "basis-dump",
            "--n",
            "6",
            "--s",
            "2",
            "--clusters",
            "6",
        ]))
        .unwrap();
        assert_eq!(out.stdout.lines().count(), 28 - 9);
    }

    #[test]
    fn bad_flags_are_rejected() {
        assert!(Cli::try_parse_from(["ssos", "simple-quadratic", "--noise", "cauchy"]).is_err());
        assert!(Cli::try_parse_from(["ssos", "solve-sdpa", "--tol", "-1"]).is_err());
        assert!(Cli::try_parse_from(["ssos", "frobnicate"]).is_err());
    }

    #[test]
    fn gaussian_reference_is_small_for_small_sigma() {
        let v = simple_quadratic_reference(&NoiseDistribution::gaussian(1, 0.1)).unwrap();
        // E[w^4] = 3 sigma^4 to leading order
        assert!((v - 3e-4).abs() < 2e-5, "{v}");
    }

    #[test]
    fn summary_rows_skip_failures() {
        let rows = vec![
            BenchRow {
                instance: 0,
                seed: 0,
                ssos_status: "optimal".into(),
                ssos: Some(1.0),
                mcpo: Some(2.0),
            },
            BenchRow {
                instance: 1,
                seed: 1,
                ssos_status: "failed".into(),
                ssos: None,
                mcpo: Some(4.0),
            },
        ];
        let csv = bench_csv(&rows);
        assert!(csv.contains("1,1,failed,nan,4.000000e0"));
        assert!(csv.contains("ssos,1,1.000000e0"));
        assert!(csv.contains("mcpo,2,3.000000e0"));
    }

    #[test]
    fn uniform_reference_matches_quadrature() {
        let q = crate::noise::gauss_legendre(60).unwrap();
        let r = simple_quadratic_reference(&NoiseDistribution::uniform(1)).unwrap();
        assert!((q.uniform_mean(c_star) - r).abs() < 1e-12);
    }
}
