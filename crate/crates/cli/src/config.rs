//! Run configuration: a JSON file merged with command-line flags (flags win).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use phaseless_core::inversion::Taper;
use phaseless_core::recovery::DEFAULT_EPS_DET;
use phaseless_core::{DerivativeMode, KGrid, Method, NoiseModel, PotentialSpec, XGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Marks an error as a configuration problem (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

macro_rules! config_bail {
    ($($arg:tt)*) => {
        return Err(anyhow::Error::new(ConfigError(format!($($arg)*))))
    };
}
pub(crate) use config_bail;

/// Options shared by every subcommand. Each one may also come from `--config`.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Potential as inline JSON, a JSON file, or a two-column (x, v) CSV file.
    #[arg(long)]
    #[serde(default, deserialize_with = "potential_field")]
    pub potential: Option<String>,
    #[arg(long)]
    pub kmin: Option<f64>,
    #[arg(long)]
    pub kmax: Option<f64>,
    #[arg(long)]
    pub kcount: Option<usize>,
    /// Measurement positions x1[,x2[,x3]], all negative.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub positions: Option<Vec<f64>>,
    /// Dataset kind: s1, s2 or s3.
    #[arg(long)]
    pub method: Option<String>,
    /// Relative Gaussian noise level on intensities.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Threshold on |determinant| below which a geometry counts as degenerate.
    #[arg(long = "eps-det")]
    pub eps_det: Option<f64>,
    /// Use central differences with this step for S3 derivatives instead of the exact formula.
    #[arg(long = "fd-step")]
    pub fd_step: Option<f64>,
    /// Input CSV: a dataset for `recover`, a recovery or forward sweep for `invert`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub xmin: Option<f64>,
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long)]
    pub xstep: Option<f64>,
    #[arg(long = "nystrom-step")]
    pub nystrom_step: Option<f64>,
    /// Spectral taper for the inversion kernel: none or lanczos.
    #[arg(long)]
    pub taper: Option<String>,
    #[arg(long = "rtol")]
    pub rtol: Option<f64>,
}

/// Accepts the potential either as a JSON object or as a string.
fn potential_field<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let v = Option::<serde_json::Value>::deserialize(d)?;
    Ok(v.map(|v| match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }))
}

impl Overrides {
    fn or(self, base: Overrides) -> Overrides {
        Overrides {
            potential: self.potential.or(base.potential),
            kmin: self.kmin.or(base.kmin),
            kmax: self.kmax.or(base.kmax),
            kcount: self.kcount.or(base.kcount),
            positions: self.positions.or(base.positions),
            method: self.method.or(base.method),
            noise: self.noise.or(base.noise),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            eps_det: self.eps_det.or(base.eps_det),
            fd_step: self.fd_step.or(base.fd_step),
            input: self.input.or(base.input),
            xmin: self.xmin.or(base.xmin),
            xmax: self.xmax.or(base.xmax),
            xstep: self.xstep.or(base.xstep),
            nystrom_step: self.nystrom_step.or(base.nystrom_step),
            taper: self.taper.or(base.taper),
            rtol: self.rtol.or(base.rtol),
        }
    }
}

/// Fully resolved settings; its JSON form is hashed into every output header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub potential: PotentialSpec,
    pub kgrid: KGrid,
    pub positions: Vec<f64>,
    pub method: Method,
    pub noise: NoiseModel,
    pub derivative_mode: DerivativeMode,
    pub eps_det: f64,
    /// Where files go does not change their content, so it stays out of the hash.
    #[serde(skip)]
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub xgrid: XGrid,
    pub nystrom_step: f64,
    pub taper: Taper,
    pub rtol: f64,
}

fn default_positions(method: Method) -> Vec<f64> {
    match method {
        Method::S1 => vec![-1.0, -1.3],
        Method::S2 => vec![-1.0, -1.3, -1.7],
        Method::S3 => vec![-1.0],
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        config_bail!("--{name} must be positive, got {v}");
    }
    Ok(())
}

impl RunConfig {
    pub fn resolve(command: &str, config: Option<&Path>, flags: Overrides) -> Result<Self> {
        let file = match config {
            Some(path) => {
                if !path.exists() {
                    config_bail!("config file {} does not exist", path.display());
                }
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                match serde_json::from_str::<Overrides>(&text) {
                    Ok(o) => o,
                    Err(e) => config_bail!("invalid config file {}: {e}", path.display()),
                }
            }
            None => Overrides::default(),
        };
        let o = flags.or(file);

        let potential = match &o.potential {
            Some(p) => {
                let looks_inline = p.trim_start().starts_with('{');
                if !looks_inline && !Path::new(p).exists() {
                    config_bail!("potential file {p} does not exist");
                }
                match phaseless_core::io::load_potential(p) {
                    Ok(v) => v,
                    Err(e) => config_bail!("invalid potential: {e}"),
                }
            }
            None => PotentialSpec::square_barrier(1.0, 1.0),
        };

        let method: Method = match o.method.as_deref().unwrap_or("s3").parse() {
            Ok(m) => m,
            Err(e) => config_bail!("{e}"),
        };
        let kgrid = match KGrid::new(
            o.kmin.unwrap_or(0.05),
            o.kmax.unwrap_or(40.0),
            o.kcount.unwrap_or(2000),
        ) {
            Ok(g) => g,
            Err(e) => config_bail!("{e}"),
        };
        let positions = o
            .positions
            .clone()
            .unwrap_or_else(|| default_positions(method));
        if let Some(x) = positions.iter().find(|x| !(x.is_finite() && **x < 0.0)) {
            config_bail!("measurement positions must be strictly negative, got {x}");
        }
        let noise = match NoiseModel::new(o.noise.unwrap_or(0.0), o.seed.unwrap_or(0)) {
            Ok(n) => n,
            Err(e) => config_bail!("{e}"),
        };
        let derivative_mode = match o.fd_step {
            Some(h) => {
                check_positive("fd-step", h)?;
                DerivativeMode::CentralDifference { h }
            }
            None => DerivativeMode::Analytic,
        };
        let eps_det = o.eps_det.unwrap_or(DEFAULT_EPS_DET);
        if !(eps_det.is_finite() && eps_det >= 0.0) {
            config_bail!("--eps-det must be >= 0, got {eps_det}");
        }
        if let Some(input) = &o.input {
            if !input.exists() {
                config_bail!("input file {} does not exist", input.display());
            }
        }
        let xstep = o.xstep.unwrap_or(0.01);
        check_positive("xstep", xstep)?;
        let xmin = o.xmin.unwrap_or(-1.0);
        let xmax = o.xmax.unwrap_or((potential.support_end() + 2.0).max(3.0));
        let xgrid = match XGrid::with_step(xmin, xmax, xstep) {
            Ok(g) => g,
            Err(e) => config_bail!("{e}"),
        };
        let nystrom_step = o.nystrom_step.unwrap_or(0.01);
        check_positive("nystrom-step", nystrom_step)?;
        let taper = match o.taper.as_deref().unwrap_or("lanczos") {
            "none" => Taper::None,
            "lanczos" => Taper::Lanczos,
            other => config_bail!("unknown taper '{other}', expected none|lanczos"),
        };
        let rtol = o.rtol.unwrap_or(1e-11);
        check_positive("rtol", rtol)?;

        Ok(Self {
            command: command.to_string(),
            potential,
            kgrid,
            positions,
            method,
            noise,
            derivative_mode,
            eps_det,
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            input: o.input,
            xgrid,
            nystrom_step,
            taper,
            rtol,
        })
    }

    /// First 16 hex digits of the SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn header(&self) -> Vec<String> {
        vec![format!(
            "phaseless {} command={} config={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.hash()
        )]
    }

    pub fn ensure_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
    }

    pub fn require_positions(&self) -> Result<()> {
        if self.positions.len() != self.method.positions_required() {
            bail!(ConfigError(format!(
                "method {} needs {} position(s), got {}",
                self.method,
                self.method.positions_required(),
                self.positions.len()
            )));
        }
        Ok(())
    }
}
