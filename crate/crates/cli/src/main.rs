//! `phaseless`: forward scattering, phaseless data, phase recovery and inversion.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use phaseless_core::io::{self, DatasetSidecar};
use phaseless_core::pipeline::{self, PipelineConfig};
use phaseless_core::recovery::{self, RowStatus};
use phaseless_core::{
    phaseless, selftest, Error, ForwardOptions, ForwardSolver, InversionOptions, RecoveryOptions,
    ReflectionTable,
};
use serde::Serialize;

use config::{config_bail, ConfigError, Overrides, RunConfig};

/// Exit codes.
mod code {
    pub const OK: u8 = 0;
    pub const FAILED_CHECK: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const DEGENERATE: u8 = 3;
    pub const NON_PHYSICAL: u8 = 4;
    pub const INVERSION: u8 = 5;
    pub const INTEGRATION: u8 = 6;
    pub const IO: u8 = 7;
}

#[derive(Parser)]
#[command(
    name = "phaseless",
    version,
    about = "Phaseless inverse scattering for the 1D Schrodinger equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON file with any of the flag values; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep s21 and s22 over the wavenumber grid.
    Forward(Common),
    /// Generate a phaseless dataset (intensities, optional noise).
    Synthesize(Common),
    /// Recover s21 from a dataset (`--input`) or from data synthesized on the fly.
    Recover(Common),
    /// Reconstruct the potential from a recovery or forward CSV (`--input`), or from `--potential`.
    Invert(Common),
    /// Run potential -> data -> recovery -> inversion and report the errors.
    Pipeline(Common),
    /// Run the built-in invariant checks.
    Selftest(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Forward(c) => ("forward", c),
        Command::Synthesize(c) => ("synthesize", c),
        Command::Recover(c) => ("recover", c),
        Command::Invert(c) => ("invert", c),
        Command::Pipeline(c) => ("pipeline", c),
        Command::Selftest(c) => ("selftest", c),
    };
    let result =
        RunConfig::resolve(name, common.config.as_deref(), common.flags.clone()).and_then(|cfg| {
            match name {
                "forward" => forward(&cfg),
                "synthesize" => synthesize(&cfg),
                "recover" => recover(&cfg),
                "invert" => invert(&cfg),
                "pipeline" => run_pipeline(&cfg),
                _ => run_selftest(&cfg),
            }
        });
    match result {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return code::CONFIG;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidPotential(_)
            | Error::InvalidWavenumber(_)
            | Error::OutsideMeasurementRegion(_)
            | Error::InvalidConfig(_)
            | Error::Csv(_)
            | Error::Json(_),
        ) => code::CONFIG,
        Some(Error::DegenerateConfiguration { .. }) => code::DEGENERATE,
        Some(Error::NonPhysicalIntensity { .. }) => code::NON_PHYSICAL,
        Some(Error::Truncation(_) | Error::IllConditioned { .. }) => code::INVERSION,
        Some(Error::Integration(_)) => code::INTEGRATION,
        Some(Error::Io(_)) => code::IO,
        None if err.downcast_ref::<std::io::Error>().is_some() => code::IO,
        None => code::FAILED_CHECK,
    }
}

fn solver(cfg: &RunConfig) -> ForwardSolver {
    let mut opts = ForwardOptions::default();
    opts.stepper.rtol = cfg.rtol;
    opts.stepper.atol = cfg.rtol;
    ForwardSolver::new(opts)
}

fn inversion_options(cfg: &RunConfig) -> InversionOptions {
    InversionOptions {
        nystrom_step: cfg.nystrom_step,
        taper: cfg.taper,
        ..Default::default()
    }
}

fn create(cfg: &RunConfig, name: &str) -> Result<BufWriter<File>> {
    cfg.ensure_out_dir()?;
    let path = cfg.out.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

/// JSON outputs carry the same provenance as CSV comment headers.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    generator: String,
    config_hash: String,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(cfg: &RunConfig, name: &str, body: &T) -> Result<()> {
    let stamped = Stamped {
        generator: format!("phaseless {}", env!("CARGO_PKG_VERSION")),
        config_hash: cfg.hash(),
        body,
    };
    let mut w = create(cfg, name)?;
    serde_json::to_writer_pretty(&mut w, &stamped).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn forward(cfg: &RunConfig) -> Result<u8> {
    let coeffs = solver(cfg).sweep(&cfg.potential, &cfg.kgrid)?;
    let mut w = create(cfg, "forward.csv")?;
    io::write_forward_csv(&mut w, &cfg.header(), &coeffs)?;
    w.flush()?;
    let worst = coeffs
        .iter()
        .map(|c| c.unitarity_defect())
        .fold(0.0, f64::max);
    let flagged = coeffs.iter().filter(|c| c.flagged).count();
    println!(
        "forward: {} wavenumbers, max unitarity defect {worst:.3e}, flagged {flagged}",
        coeffs.len()
    );
    Ok(code::OK)
}

fn build_dataset(cfg: &RunConfig) -> Result<phaseless::PhaselessDataset> {
    cfg.require_positions()?;
    Ok(phaseless::build(
        &solver(cfg),
        &cfg.potential,
        cfg.method,
        &cfg.positions,
        &cfg.kgrid,
        &cfg.noise,
        cfg.derivative_mode,
    )?)
}

fn synthesize(cfg: &RunConfig) -> Result<u8> {
    let dataset = build_dataset(cfg)?;
    let stem = format!("dataset_{}", cfg.method);
    let mut w = create(cfg, &format!("{stem}.csv"))?;
    io::write_dataset_csv(&mut w, &cfg.header(), &dataset)?;
    w.flush()?;
    let sidecar = DatasetSidecar {
        method: cfg.method,
        potential: cfg.potential.clone(),
        positions: cfg.positions.clone(),
        kgrid: cfg.kgrid,
        noise: cfg.noise,
        derivative_mode: cfg.derivative_mode,
    };
    write_json(cfg, &format!("{stem}.json"), &sidecar)?;
    println!("synthesize: {} {} records", dataset.len(), cfg.method);
    Ok(code::OK)
}

fn recover(cfg: &RunConfig) -> Result<u8> {
    let (dataset, reference) = match &cfg.input {
        Some(path) => (io::read_dataset_csv(open(path)?)?, None),
        None => {
            let dataset = build_dataset(cfg)?;
            let coeffs = solver(cfg).sweep(&cfg.potential, &cfg.kgrid)?;
            (
                dataset,
                Some(coeffs.iter().map(|c| c.s21).collect::<Vec<_>>()),
            )
        }
    };
    let opts = RecoveryOptions {
        eps_det: cfg.eps_det,
    };
    let report = recovery::sweep_recover(&dataset, &opts, reference.as_deref())?;
    let mut w = create(cfg, "recovery.csv")?;
    io::write_recovery_csv(&mut w, &cfg.header(), &report.rows)?;
    w.flush()?;

    let s = &report.summary;
    println!(
        "recover ({}): {} ok, {} degenerate, {} non-physical, max residual {:.3e}",
        report.method, s.recovered, s.degenerate, s.non_physical, s.max_residual
    );
    if let (Some(max), Some(median)) = (s.max_error, s.median_error) {
        println!("error vs forward solver: max {max:.3e}, median {median:.3e}");
    }
    if s.recovered == 0 {
        if let Some(row) = report.rows.iter().find(|r| r.status != RowStatus::Ok) {
            eprintln!(
                "error: no wavenumber recovered: {}",
                row.message.as_deref().unwrap_or("")
            );
            return Ok(match row.status {
                RowStatus::NonPhysical => code::NON_PHYSICAL,
                _ => code::DEGENERATE,
            });
        }
    }
    Ok(code::OK)
}

fn invert(cfg: &RunConfig) -> Result<u8> {
    let table = match &cfg.input {
        Some(path) => io::read_reflection_table(open(path)?)?,
        None => {
            let coeffs = solver(cfg).sweep(&cfg.potential, &cfg.kgrid)?;
            if cfg.potential.min_value() < 0.0 {
                config_bail!("inversion needs a potential without bound states; this one has negative values");
            }
            ReflectionTable::from_coefficients(cfg.kgrid, &coeffs, true)?
        }
    };
    let vhat = phaseless_core::inversion::reconstruct_potential(
        &table,
        &cfg.xgrid,
        &inversion_options(cfg),
    )?;
    let mut w = create(cfg, "potential.csv")?;
    io::write_potential_csv(&mut w, &cfg.header(), &vhat)?;
    w.flush()?;
    write_json(cfg, "inversion.json", &vhat.diagnostics)?;
    let d = &vhat.diagnostics;
    println!(
        "invert: {} points, peak |v| {:.4}, truncation bound {:.3e}, residual {:.3e}",
        vhat.values.len(),
        d.peak_abs,
        d.truncation_bound,
        d.residual_norm
    );
    if cfg.input.is_none() {
        println!(
            "relative L1 error vs input potential: {:.4}",
            phaseless_core::inversion::roundtrip_error(&cfg.potential, &vhat)
        );
    }
    Ok(code::OK)
}

fn run_pipeline(cfg: &RunConfig) -> Result<u8> {
    cfg.require_positions()?;
    let mut pc = PipelineConfig::new(cfg.potential.clone(), cfg.method, cfg.positions.clone())?;
    pc.kgrid = cfg.kgrid;
    pc.noise = cfg.noise;
    pc.derivative_mode = cfg.derivative_mode;
    pc.recovery = RecoveryOptions {
        eps_det: cfg.eps_det,
    };
    pc.xgrid = cfg.xgrid;
    pc.inversion = inversion_options(cfg);
    let out = pipeline::run(&solver(cfg), &pc)?;

    let header = cfg.header();
    let mut w = create(cfg, "forward.csv")?;
    io::write_forward_csv(&mut w, &header, &out.coefficients)?;
    w.flush()?;
    let mut w = create(cfg, &format!("dataset_{}.csv", cfg.method))?;
    io::write_dataset_csv(&mut w, &header, &out.dataset)?;
    w.flush()?;
    let mut w = create(cfg, "recovery.csv")?;
    io::write_recovery_csv(&mut w, &header, &out.recovery.rows)?;
    w.flush()?;
    let mut w = create(cfg, "potential.csv")?;
    io::write_potential_csv(&mut w, &header, &out.reconstruction)?;
    w.flush()?;
    write_json(cfg, "report.json", &out.report)?;

    let r = &out.report;
    println!("pipeline: {} via {}", r.potential, r.method);
    println!("  wavenumbers          {}", r.k_points);
    println!("  max unitarity defect {:.3e}", r.max_unitarity_defect);
    println!(
        "  recovered            {} ({} degenerate, {} non-physical)",
        r.recovered, r.degenerate, r.non_physical
    );
    println!(
        "  s21 error max/median {:.3e} / {:.3e}",
        r.max_s21_error, r.median_s21_error
    );
    println!("  relative L1 error    {:.4}", r.roundtrip_l1_error);
    println!("  re-scatter error     {:.4}", r.rescatter_error);
    Ok(code::OK)
}

fn run_selftest(cfg: &RunConfig) -> Result<u8> {
    let checks = selftest::run(&solver(cfg))?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag}  {:<45} {:.3e} (tol {:.0e})",
            c.name, c.value, c.tolerance
        );
        failed += usize::from(!c.passed);
    }
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    Ok(if failed == 0 {
        code::OK
    } else {
        code::FAILED_CHECK
    })
}
