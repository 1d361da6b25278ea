//! The `tdp` command line: one subcommand per reproduced figure.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{
    adiabatic_loop_run, default_k0, write_trajectory_csv, DephasingModel, RampSchedule,
};
use crate::error::Error;
use crate::geometry::{covariance_tensor, ellipsoid, ellipsoid_record, moments};
use crate::measurement::{measure_loop, PipelineConfig};
use crate::model::{momentum_hamiltonian, CouplingParams, MomentumPoint};
use crate::topology::{
    flux_scan_beta, phase_diagram, vortex_scan, LoopShape, LoopSpec, SphereGrid,
};

#[derive(Debug, Parser)]
#[command(name = "tdp", version, about = "Spin-1 monopole simulator")]
pub struct Cli {
    /// JSON configuration for the chosen command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Random seed for simulated readout.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monopole charge over an (alpha, beta) grid.
    PhaseDiagram,
    /// Berry flux of the small loop versus beta.
    FluxScan(FluxScanArgs),
    /// Moments and ellipsoids along one ramped loop.
    LoopSim(LoopSimArgs),
    /// Ground-state moments at the north pole versus alpha.
    AlphaJump,
    /// Arrow azimuth around a latitude circle.
    Vortex,
}

#[derive(Debug, Args)]
pub struct FluxScanArgs {
    /// Ramp each loop and read it out with simulated detection.
    #[arg(long, conflicts_with = "ideal")]
    pub dynamics: bool,
    /// Use exact eigenstates (the default).
    #[arg(long)]
    pub ideal: bool,
    /// Loop radius.
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct LoopSimArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseDiagramConfig {
    pub alpha_range: [f64; 2],
    pub n_alpha: usize,
    pub beta_range: [f64; 2],
    pub n_beta: usize,
    pub grid: SphereGrid,
}

impl Default for PhaseDiagramConfig {
    fn default() -> Self {
        PhaseDiagramConfig {
            alpha_range: [-3.0, 3.0],
            n_alpha: 61,
            beta_range: [-4.0, 4.0],
            n_beta: 81,
            grid: SphereGrid {
                n_theta: 24,
                n_phi: 48,
                max_doublings: 1,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxScanConfig {
    pub alpha: f64,
    pub beta_range: [f64; 2],
    pub n_beta: usize,
    pub r: f64,
    pub samples: usize,
    pub k0: f64,
    pub dynamics: bool,
    pub ramp_time: f64,
    pub pipeline: PipelineConfig,
}

impl Default for FluxScanConfig {
    fn default() -> Self {
        FluxScanConfig {
            alpha: 0.0,
            beta_range: [-4.0, 0.0],
            n_beta: 40,
            r: 0.2,
            samples: 2048,
            k0: default_k0(),
            dynamics: false,
            ramp_time: 1e-3,
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopSimConfig {
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub k0: f64,
    pub ramp_time: f64,
    pub tau_samples: usize,
    /// Loop positions, in units of pi, at which ellipsoid frames are written.
    pub frames: Vec<f64>,
    pub dephasing: bool,
}

impl Default for LoopSimConfig {
    fn default() -> Self {
        LoopSimConfig {
            alpha: 0.0,
            beta: -1.9,
            r: 0.2,
            k0: default_k0(),
            ramp_time: 1e-3,
            tau_samples: 2000,
            frames: vec![0.0, 0.19, 0.48, 0.95, 1.05, 1.71, 1.81, 1.90],
            dephasing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlphaJumpConfig {
    pub alpha_range: [f64; 2],
    pub n_alpha: usize,
    pub beta: f64,
    pub theta: f64,
}

impl Default for AlphaJumpConfig {
    fn default() -> Self {
        AlphaJumpConfig {
            alpha_range: [0.5, 1.5],
            n_alpha: 21,
            beta: 0.0,
            theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VortexConfig {
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub samples: usize,
}

impl Default for VortexConfig {
    fn default() -> Self {
        VortexConfig {
            alpha: 2.0,
            beta: 0.0,
            theta: 0.1,
            samples: 32,
        }
    }
}

/// Failure of a command, mapped onto the exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "ConfigError: {m}"),
            CliError::Numerical(e) => write!(f, "{}: {e}", e.name()),
            CliError::Io(e) => write!(f, "IoError: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

/// SHA-256 of the effective configuration, hex encoded.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("configs serialize");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn linspace(range: [f64; 2], n: usize) -> CliResult<Vec<f64>> {
    if n == 0 || !range.iter().all(|x| x.is_finite()) {
        return Err(CliError::Config(format!(
            "bad range {range:?} with {n} points"
        )));
    }
    if n == 1 {
        return Ok(vec![range[0]]);
    }
    Ok((0..n)
        .map(|k| range[0] + (range[1] - range[0]) * k as f64 / (n - 1) as f64)
        .collect())
}

fn create(out: &Path, name: &str) -> CliResult<BufWriter<File>> {
    std::fs::create_dir_all(out)?;
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn csv_header(w: &mut impl Write, command: &str, hash: &str) -> std::io::Result<()> {
    writeln!(w, "# tdp {command} config_sha256={hash}")
}

#[derive(Serialize)]
struct PhaseDiagramOutput<'a> {
    config_sha256: &'a str,
    config: &'a PhaseDiagramConfig,
    alphas: &'a [f64],
    betas: &'a [f64],
    /// `charge[i_beta][i_alpha]`, null where undefined.
    charge: Vec<Vec<Option<i64>>>,
    /// Error name of each undefined cell, null elsewhere.
    failure: Vec<Vec<Option<String>>>,
}

fn cmd_phase_diagram(cli: &Cli) -> CliResult<()> {
    let cfg: PhaseDiagramConfig = load(cli.config.as_deref())?;
    let alphas = linspace(cfg.alpha_range, cfg.n_alpha)?;
    let betas = linspace(cfg.beta_range, cfg.n_beta)?;
    if cfg.grid.n_theta < 4 || cfg.grid.n_phi < 4 {
        return Err(CliError::Config("sphere grid must be at least 4x4".into()));
    }
    let pd = phase_diagram(&alphas, &betas, cfg.grid);
    let hash = config_hash(&cfg);
    let out = PhaseDiagramOutput {
        config_sha256: &hash,
        config: &cfg,
        alphas: &alphas,
        betas: &betas,
        charge: pd
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.charge).collect())
            .collect(),
        failure: pd
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.failure.clone()).collect())
            .collect(),
    };
    let mut w = create(&cli.out, "phase_diagram.json")?;
    serde_json::to_writer_pretty(&mut w, &out).map_err(std::io::Error::other)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_flux_scan(cli: &Cli, args: &FluxScanArgs) -> CliResult<()> {
    let mut cfg: FluxScanConfig = load(cli.config.as_deref())?;
    if let Some(r) = args.r {
        cfg.r = r;
    }
    if args.dynamics {
        cfg.dynamics = true;
    }
    if args.ideal {
        cfg.dynamics = false;
    }
    if let Some(seed) = cli.seed {
        cfg.pipeline.seed = seed;
    }
    if !(cfg.r > 0.0 && cfg.k0 > 0.0 && cfg.ramp_time > 0.0) {
        return Err(CliError::Config(
            "r, k0 and ramp_time must be positive".into(),
        ));
    }
    let betas = linspace(cfg.beta_range, cfg.n_beta)?;
    let hash = config_hash(&cfg);
    let mut w = create(&cli.out, "flux_scan.csv")?;
    csv_header(&mut w, "flux-scan", &hash)?;
    writeln!(w, "beta,gamma,gamma_F,gamma_T,wrapped,sigma,status")?;
    if cfg.dynamics {
        use rayon::prelude::*;
        let rows: Vec<String> = betas
            .par_iter()
            .map(|&beta| {
                let run = LoopSpec::new(
                    LoopShape::small(cfg.r),
                    cfg.samples,
                    cfg.k0,
                    CouplingParams::new(cfg.alpha, beta),
                )
                .and_then(|lp| RampSchedule::new(lp, cfg.ramp_time))
                .and_then(|sched| measure_loop(&sched, &cfg.pipeline));
                match run {
                    Ok(p) => format!(
                        "{beta},{},{},{},{},{},ok",
                        p.gamma,
                        p.flux.gamma_f,
                        p.flux.gamma_t,
                        crate::model::canonical_phase(p.gamma),
                        p.sigma
                    ),
                    Err(e) => format!("{beta},NaN,NaN,NaN,NaN,NaN,{}", e.name()),
                }
            })
            .collect();
        for row in rows {
            writeln!(w, "{row}")?;
        }
    } else {
        for p in flux_scan_beta(cfg.alpha, &betas, cfg.r, cfg.samples, cfg.k0) {
            match p.result {
                Ok(f) => writeln!(
                    w,
                    "{},{},{},{},{},0,ok",
                    p.beta, f.gamma, f.gamma_f, f.gamma_t, f.wrapped
                )?,
                Err(e) => writeln!(w, "{},NaN,NaN,NaN,NaN,NaN,{}", p.beta, e.name())?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FramesOutput<'a> {
    config_sha256: &'a str,
    frames: Vec<crate::geometry::EllipsoidRecord>,
}

fn cmd_loop_sim(cli: &Cli, args: &LoopSimArgs) -> CliResult<()> {
    let mut cfg: LoopSimConfig = load(cli.config.as_deref())?;
    if let Some(beta) = args.beta {
        cfg.beta = beta;
    }
    let lp = LoopSpec::new(
        LoopShape::small(cfg.r),
        64,
        cfg.k0,
        CouplingParams::new(cfg.alpha, cfg.beta),
    )?;
    let sched = RampSchedule::new(lp, cfg.ramp_time)?;
    let model = cfg.dephasing.then(DephasingModel::experimental);
    let run = adiabatic_loop_run(&sched, model.as_ref(), cfg.tau_samples)?;
    let hash = config_hash(&cfg);

    let mut w = create(&cli.out, "loop_trajectory.csv")?;
    csv_header(&mut w, "loop-sim", &hash)?;
    write_trajectory_csv(&mut w, &run)?;
    w.flush()?;

    let frames = cfg
        .frames
        .iter()
        .map(|&f| {
            let tau = f * PI;
            let k = ((tau / (2.0 * PI)) * cfg.tau_samples as f64)
                .round()
                .clamp(0.0, cfg.tau_samples as f64) as usize;
            let s = &run.samples[k];
            ellipsoid_record(s.tau, &s.moments)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let mut w = create(&cli.out, "ellipsoids.json")?;
    serde_json::to_writer_pretty(
        &mut w,
        &FramesOutput {
            config_sha256: &hash,
            frames,
        },
    )
    .map_err(std::io::Error::other)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_alpha_jump(cli: &Cli) -> CliResult<()> {
    let cfg: AlphaJumpConfig = load(cli.config.as_deref())?;
    let alphas = linspace(cfg.alpha_range, cfg.n_alpha)?;
    let hash = config_hash(&cfg);
    let mut w = create(&cli.out, "alpha_jump.csv")?;
    csv_header(&mut w, "alpha-jump", &hash)?;
    writeln!(
        w,
        "alpha,Fx,Fy,Fz,len0,len1,len2,long_axis_x,long_axis_y,long_axis_z,status"
    )?;
    for alpha in alphas {
        let p = MomentumPoint::new(1.0, cfg.theta, 0.0);
        let h = momentum_hamiltonian(&p, &CouplingParams::new(alpha, cfg.beta));
        let row = h.eigensystem().band_state(0, 1e-9).and_then(|g| {
            let m = moments(&g);
            Ok((m, ellipsoid(&covariance_tensor(&m)?)))
        });
        match row {
            Ok((m, e)) => writeln!(
                w,
                "{alpha},{},{},{},{},{},{},{},{},{},ok",
                m.f[0],
                m.f[1],
                m.f[2],
                e.lengths[0],
                e.lengths[1],
                e.lengths[2],
                e.axes[2][0],
                e.axes[2][1],
                e.axes[2][2]
            )?,
            Err(e) => writeln!(
                w,
                "{alpha},NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN,NaN,{}",
                e.name()
            )?,
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_vortex(cli: &Cli) -> CliResult<()> {
    let cfg: VortexConfig = load(cli.config.as_deref())?;
    let scan = vortex_scan(
        &CouplingParams::new(cfg.alpha, cfg.beta),
        cfg.theta,
        cfg.samples,
    )?;
    let hash = config_hash(&cfg);
    let mut w = create(&cli.out, "vortex.csv")?;
    csv_header(&mut w, "vortex", &hash)?;
    writeln!(w, "# winding={}", scan.winding)?;
    writeln!(w, "phi,phi_F")?;
    for (phi, phi_f) in &scan.points {
        writeln!(w, "{phi},{phi_f}")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::PhaseDiagram => cmd_phase_diagram(cli),
        Command::FluxScan(a) => cmd_flux_scan(cli, a),
        Command::LoopSim(a) => cmd_loop_sim(cli, a),
        Command::AlphaJump => cmd_alpha_jump(cli),
        Command::Vortex => cmd_vortex(cli),
    })
}

/// Entry point of the `tdp` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
