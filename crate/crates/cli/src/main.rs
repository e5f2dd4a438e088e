//! `pointmass` — spectra, null controls and their verification for the heat
//! equation with an interior point mass.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pointmass::moment::{assemble_with_rest, solve_min_norm, SolveOptions};
use pointmass::pde::Scheme;
use pointmass::state::{project, SpectralCoeffs};
use pointmass::verify::{
    duality_gap_modal, epsilon_study, null_control_verify, random_polynomial_control, smooth_datum, InitialData,
    VerifyConfig,
};
use pointmass::{io, BoundaryCase, Error, Precision};

use config::{parse_list, parse_modes, RunConfig};

/// Exit status of a verification that ran but did not pass.
const EXIT_FAIL: u8 = 1;
/// Exit status for errors (bad input, refused computation, I/O).
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "pointmass", version, about = "Boundary null control of the heat equation with a point mass")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, eigenvector norms and input coefficients → spectrum.csv
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Number of modes to tabulate
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Synthesize the min-norm null control → control.csv, control.json
    Control {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Synthesize a control and check it with the grid solver; exit 0 iff it passes
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Negate the input coefficients before synthesis (diagnostic; the run must fail)
        #[arg(long, hide = true)]
        flip_b_sign: bool,
        /// Report the raw grid run instead of the Richardson-extrapolated one
        #[arg(long)]
        no_extrapolate: bool,
    },
    /// Distance between the ε-density and point-mass solutions → epsilon.csv
    Epsilon {
        #[command(flatten)]
        common: Common,
        /// Comma-separated list of ε values in (0, 0.5)
        #[arg(long)]
        eps: Option<String>,
        /// Comparison time
        #[arg(long)]
        t_star: Option<f64>,
        /// Initial state CSV (default: a fixed smooth datum)
        #[arg(long)]
        state: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
#[allow(non_snake_case)]
struct Common {
    /// Boundary control type
    #[arg(long)]
    case: Option<BoundaryCase>,
    /// Control horizon
    #[arg(long = "T")]
    T: Option<f64>,
    /// Number of modes to steer to zero
    #[arg(long = "N")]
    N: Option<usize>,
    /// Intervals per unit length of the grid
    #[arg(long)]
    mesh_n: Option<usize>,
    /// Time step of the grid solver
    #[arg(long)]
    dt: Option<f64>,
    /// cn (Crank–Nicolson) or be (backward Euler)
    #[arg(long)]
    scheme: Option<Scheme>,
    /// double or extended
    #[arg(long)]
    precision: Option<Precision>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Initial data as modal coefficients, e.g. "1:1.0,2:0.5"
    #[arg(long)]
    modes: Option<String>,
    /// Initial data as a state CSV (`x,value,region`)
    #[arg(long)]
    state: Option<PathBuf>,
    /// Fraction of T at the end during which the control is held at zero
    #[arg(long)]
    rest: Option<f64>,
}

impl Common {
    fn resolve(&self, extra: RunConfig) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            case: self.case,
            T: self.T,
            N: self.N,
            mesh_n: self.mesh_n,
            dt: self.dt,
            scheme: self.scheme,
            precision: self.precision,
            seed: self.seed,
            out: self.out.clone(),
            ..extra
        };
        let cfg = file.overlay(flags);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl DataArgs {
    fn as_config(&self) -> Result<RunConfig> {
        let modes = match &self.modes {
            Some(s) => Some(parse_modes(s).map_err(|e| anyhow::anyhow!("--modes: {e}"))?),
            None => None,
        };
        Ok(RunConfig { modes, state: self.state.clone(), rest: self.rest, ..RunConfig::default() })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(advice) = advisory(&e) {
                eprintln!("advisory: {advice}");
            }
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Extra guidance for refusals caused by an ill-conditioned moment problem.
fn advisory(e: &anyhow::Error) -> Option<String> {
    let mut err = e.downcast_ref::<Error>()?;
    while let Error::Stage { source, .. } = err {
        err = source;
    }
    match err {
        Error::IllConditioned { estimate, cap } => Some(format!(
            "the exponential Gram matrix is too ill-conditioned for this (T, N) \
             (estimate {estimate:.3e} > cap {cap:.3e}); lengthen T, lower N, or rerun with --precision extended"
        )),
        Error::NotPositiveDefinite { .. } => {
            Some("lengthen T, lower N, or rerun with --precision extended".to_string())
        }
        _ => None,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Spectrum { common, n_max, format } => {
            let cfg = common.resolve(RunConfig { n_max, ..RunConfig::default() })?;
            cmd_spectrum(&cfg, format)
        }
        Command::Control { common, data } => cmd_control(&common.resolve(data.as_config()?)?),
        Command::Verify { common, data, flip_b_sign, no_extrapolate } => {
            let extrapolate = if no_extrapolate { Some(false) } else { None };
            let cfg = common.resolve(RunConfig { extrapolate, ..data.as_config()? })?;
            cmd_verify(&cfg, flip_b_sign)
        }
        Command::Epsilon { common, eps, t_star, state } => {
            let eps = match eps {
                Some(s) => Some(parse_list(&s).map_err(|e| anyhow::anyhow!("--eps: {e}"))?),
                None => None,
            };
            cmd_epsilon(&common.resolve(RunConfig { eps, t_star, state, ..RunConfig::default() })?)
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn initial_data(cfg: &RunConfig) -> Result<InitialData> {
    if let Some(path) = &cfg.state {
        let f = File::open(path).with_context(|| format!("opening state file {}", path.display()))?;
        let y = io::read_state_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
        return Ok(InitialData::Grid(y));
    }
    Ok(InitialData::Modes(cfg.modes.clone().unwrap_or_else(|| vec![(1, 1.0), (2, 0.5), (3, 0.25)])))
}

fn cmd_spectrum(cfg: &RunConfig, format: Format) -> Result<ExitCode> {
    let case = cfg.case();
    let n_max = cfg.n_max.unwrap_or(20);
    if n_max == 0 {
        anyhow::bail!("n_max must be at least 1");
    }
    let dir = cfg.out_dir();
    match format {
        Format::Csv => {
            let mut w = create(&dir, "spectrum.csv")?;
            io::write_spectrum_csv(&mut w, case, n_max)?;
            finish(w)?;
            println!("wrote {} ({case}, {n_max} modes)", dir.join("spectrum.csv").display());
        }
        Format::Json => {
            let pairs = pointmass::spectrum::eigenpairs(case, n_max)?;
            let mut w = create(&dir, "spectrum.json")?;
            io::write_json(&mut w, &pairs)?;
            finish(w)?;
            println!("wrote {} ({case}, {n_max} modes)", dir.join("spectrum.json").display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_control(cfg: &RunConfig) -> Result<ExitCode> {
    let case = cfg.case();
    let t_final = cfg.T.unwrap_or(0.5);
    let n = cfg.N.unwrap_or(10);
    let a0 = match initial_data(cfg)? {
        InitialData::Modes(modes) => {
            if let Some((k, _)) = modes.iter().find(|m| m.0 > n) {
                eprintln!("warning: mode {k} lies beyond N = {n} and is not steered");
            }
            let mut w = vec![0.0; n];
            for (k, c) in modes.iter().filter(|m| m.0 <= n) {
                w[k - 1] += c;
            }
            SpectralCoeffs::from_expansion(case, &w)?
        }
        InitialData::Grid(y) => project(&y, case, n)?,
    };
    let rest = cfg.rest.unwrap_or(0.0) * t_final;
    let sys = assemble_with_rest(case, &a0, t_final, rest)?;
    let opts = SolveOptions {
        precision: cfg.precision.unwrap_or_default(),
        condition_cap: VerifyConfig::default().condition_cap,
        sample_n: 1001,
    };
    let synth = solve_min_norm(&sys, opts)?;
    let dir = cfg.out_dir();
    let mut w = create(&dir, "control.csv")?;
    io::write_control_csv(&mut w, &synth.signal)?;
    finish(w)?;
    let mut w = create(&dir, "control.json")?;
    io::write_control_json(&mut w, &synth)?;
    finish(w)?;
    let max_res = synth.residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    println!("case {case}, T = {t_final}, N = {n}, precision {}", synth.precision);
    println!("Gram condition estimate: {:.3e}", synth.condition);
    println!("max moment residual:     {max_res:.3e}");
    println!("control L2 norm:         {:.6e}", synth.signal.l2_norm());
    println!("wrote {} and {}", dir.join("control.csv").display(), dir.join("control.json").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(cfg: &RunConfig, flip_b_sign: bool) -> Result<ExitCode> {
    let case = cfg.case();
    let t_final = cfg.T.unwrap_or(0.5);
    let n = cfg.N.unwrap_or(10);
    let defaults = VerifyConfig::default();
    let vcfg = VerifyConfig {
        mesh_n: cfg.mesh_n.unwrap_or(defaults.mesh_n),
        dt: cfg.dt.unwrap_or(defaults.dt),
        scheme: cfg.scheme.unwrap_or(defaults.scheme),
        precision: cfg.precision.unwrap_or(defaults.precision),
        rest_fraction: cfg.rest.unwrap_or(defaults.rest_fraction),
        extrapolate: cfg.extrapolate.unwrap_or(defaults.extrapolate),
        flip_b_sign,
        ..defaults
    };
    let data = initial_data(cfg)?;
    let out = null_control_verify(case, &data, t_final, n, &vcfg)?;
    let r = &out.report;

    // Duality identity with the input table the synthesis actually used: the
    // synthesized control and a seeded random control against all N modes.
    let a0 = project(&data.sample(case, vcfg.mesh_n)?, case, n)?;
    let sign = if flip_b_sign { -1.0 } else { 1.0 };
    let b: Vec<f64> = a0.modes.iter().map(|p| sign * p.b).collect();
    let test = SpectralCoeffs::from_expansion(case, &vec![1.0; n])?;
    let random = random_polynomial_control(t_final, cfg.seed.unwrap_or(0), 1001);
    let gap = [&out.control, &random]
        .iter()
        .map(|f| duality_gap_modal(&a0, f, &test, t_final, Some(&b)).map(|g| g.gap))
        .collect::<pointmass::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0_f64, f64::max);

    let dir = cfg.out_dir();
    let mut w = create(&dir, "report.json")?;
    io::write_json(&mut w, r)?;
    finish(w)?;
    let mut w = create(&dir, "control.csv")?;
    io::write_control_csv(&mut w, &out.control)?;
    finish(w)?;
    let mut w = create(&dir, "final_state.csv")?;
    io::write_state_csv(&mut w, &out.final_state)?;
    finish(w)?;

    let max_modal = r.final_modal.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    println!("case {case}, T = {t_final}, N = {n}, mesh_n = {}, dt = {:e}", vcfg.mesh_n, out.fd.step());
    println!("duality gap:            {gap:.3e}");
    println!("Gram condition:         {:.3e}", r.gram_condition);
    println!("initial norm:           {:.6e}", r.initial_norm);
    println!(
        "final norm (grid):      {:.6e}  (ratio {:.3e}, limit {:.0e})",
        r.final_norm_fd,
        r.final_norm_fd / r.initial_norm,
        vcfg.fd_tol
    );
    println!(
        "max final modal:        {max_modal:.6e}  (ratio {:.3e}, limit {:.0e})",
        max_modal / r.initial_norm,
        vcfg.modal_tol
    );
    if vcfg.extrapolate {
        let raw = out.raw_final_modal.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        println!("single-grid run:        norm {:.6e}, max modal {raw:.6e}", out.raw_final_norm_fd);
    }
    println!("verdict:                {}", if r.pass { "PASS" } else { "FAIL" });
    println!("report: {}", dir.join("report.json").display());
    Ok(if r.pass { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
}

fn cmd_epsilon(cfg: &RunConfig) -> Result<ExitCode> {
    let eps = cfg.eps.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
    if eps.is_empty() {
        anyhow::bail!("eps list is empty");
    }
    let t_star = cfg.t_star.unwrap_or(0.1);
    let dt = cfg.dt.unwrap_or(1e-4);
    let y0 = match &cfg.state {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening state file {}", path.display()))?;
            io::read_state_csv(BufReader::new(f))?
        }
        None => smooth_datum(cfg.mesh_n.unwrap_or(400)),
    };
    let rows = epsilon_study(&eps, &y0, t_star, dt)?;
    let dir = cfg.out_dir();
    let mut w = create(&dir, "epsilon.csv")?;
    io::write_epsilon_csv(&mut w, &rows)?;
    finish(w)?;
    for r in &rows {
        println!("eps = {:<8} error_H = {:.6e}", r.eps, r.error_h);
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    if sorted.len() < 2 {
        println!("trend: single eps, no verdict");
    } else if sorted.windows(2).all(|w| w[1].error_h < w[0].error_h) {
        println!("trend: error decreases as eps decreases");
    } else {
        println!("trend: error is not monotone in eps");
    }
    println!("wrote {}", dir.join("epsilon.csv").display());
    Ok(ExitCode::SUCCESS)
}
