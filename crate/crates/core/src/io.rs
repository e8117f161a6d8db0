//! CSV and JSON file formats.
//!
//! Every CSV starts with optional `#` comment lines followed by a header row.
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the written values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::ScatteringCoefficients;
use crate::grid::KGrid;
use crate::inversion::{ReconstructedPotential, ReflectionTable};
use crate::phaseless::{
    DerivativeMode, Method, NoiseModel, PhaselessDataset, S1Record, S2Record, S3Record,
};
use crate::potential::PotentialSpec;
use crate::recovery::{RowStatus, SweepRow};

pub const FORWARD_COLUMNS: [&str; 6] = [
    "k",
    "re_s21",
    "im_s21",
    "re_s22",
    "im_s22",
    "unitarity_defect",
];
pub const RECOVERY_COLUMNS: [&str; 6] = [
    "k",
    "re_s21",
    "im_s21",
    "conditioning",
    "residual",
    "status",
];
pub const S1_COLUMNS: [&str; 6] = ["k", "x1", "x2", "r2", "i1", "i2"];
pub const S2_COLUMNS: [&str; 7] = ["k", "x1", "x2", "x3", "i1", "i2", "i3"];
pub const S3_COLUMNS: [&str; 4] = ["k", "x", "i", "di"];
pub const POTENTIAL_COLUMNS: [&str; 2] = ["x", "v"];

fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(w)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

#[derive(Debug, Serialize, Deserialize)]
struct ForwardRow {
    k: f64,
    re_s21: f64,
    im_s21: f64,
    re_s22: f64,
    im_s22: f64,
    unitarity_defect: f64,
}

pub fn write_forward_csv<W: Write>(
    mut w: W,
    comments: &[String],
    coeffs: &[ScatteringCoefficients],
) -> Result<()> {
    write_comments(&mut w, comments)?;
    let mut out = writer(w);
    for c in coeffs {
        out.serialize(ForwardRow {
            k: c.k,
            re_s21: c.s21.re,
            im_s21: c.s21.im,
            re_s22: c.s22.re,
            im_s22: c.s22.im,
            unitarity_defect: c.unitarity_defect(),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_forward_csv<R: Read>(r: R) -> Result<Vec<ScatteringCoefficients>> {
    reader(r)
        .deserialize::<ForwardRow>()
        .map(|row| {
            let row = row?;
            Ok(ScatteringCoefficients::new(
                row.k,
                Complex64::new(row.re_s21, row.im_s21),
                Complex64::new(row.re_s22, row.im_s22),
            ))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RecoveryRow {
    k: f64,
    re_s21: f64,
    im_s21: f64,
    conditioning: f64,
    residual: f64,
    status: String,
}

pub fn write_recovery_csv<W: Write>(
    mut w: W,
    comments: &[String],
    rows: &[SweepRow],
) -> Result<()> {
    write_comments(&mut w, comments)?;
    let mut out = writer(w);
    for r in rows {
        let s = r.s21_est.unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        out.serialize(RecoveryRow {
            k: r.k,
            re_s21: s.re,
            im_s21: s.im,
            conditioning: r.conditioning,
            residual: r.residual,
            status: r.status.as_str().to_string(),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_recovery_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    reader(r)
        .deserialize::<RecoveryRow>()
        .map(|row| {
            let row = row?;
            let status: RowStatus = row.status.parse()?;
            let s21 = Complex64::new(row.re_s21, row.im_s21);
            Ok(SweepRow {
                k: row.k,
                s21_est: (status == RowStatus::Ok && s21.is_finite()).then_some(s21),
                conditioning: row.conditioning,
                residual: row.residual,
                status,
                message: None,
            })
        })
        .collect()
}

pub fn write_dataset_csv<W: Write>(
    mut w: W,
    comments: &[String],
    dataset: &PhaselessDataset,
) -> Result<()> {
    write_comments(&mut w, comments)?;
    let mut out = writer(w);
    match dataset {
        PhaselessDataset::S1(recs) => recs.iter().try_for_each(|r| out.serialize(r))?,
        PhaselessDataset::S2(recs) => recs.iter().try_for_each(|r| out.serialize(r))?,
        PhaselessDataset::S3(recs) => recs.iter().try_for_each(|r| out.serialize(r))?,
    }
    out.flush()?;
    Ok(())
}

/// Reads any dataset variant, recognised by its header row.
pub fn read_dataset_csv<R: Read>(r: R) -> Result<PhaselessDataset> {
    let mut rdr = reader(r);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let is = |cols: &[&str]| {
        headers.len() == cols.len() && headers.iter().zip(cols).all(|(h, c)| h == c)
    };
    if is(&S1_COLUMNS) {
        Ok(PhaselessDataset::S1(
            rdr.deserialize::<S1Record>().collect::<Result<_, _>>()?,
        ))
    } else if is(&S2_COLUMNS) {
        Ok(PhaselessDataset::S2(
            rdr.deserialize::<S2Record>().collect::<Result<_, _>>()?,
        ))
    } else if is(&S3_COLUMNS) {
        Ok(PhaselessDataset::S3(
            rdr.deserialize::<S3Record>().collect::<Result<_, _>>()?,
        ))
    } else {
        Err(Error::InvalidConfig(format!(
            "unrecognised dataset header [{}]",
            headers.join(",")
        )))
    }
}

/// Metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub method: Method,
    pub potential: PotentialSpec,
    pub positions: Vec<f64>,
    pub kgrid: KGrid,
    pub noise: NoiseModel,
    pub derivative_mode: DerivativeMode,
}

pub fn write_potential_csv<W: Write>(
    mut w: W,
    comments: &[String],
    vhat: &ReconstructedPotential,
) -> Result<()> {
    write_comments(&mut w, comments)?;
    let mut out = writer(w);
    out.write_record(POTENTIAL_COLUMNS)?;
    for (x, v) in vhat.positions().iter().zip(&vhat.values) {
        out.serialize((x, v))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a two-column `(x, v)` CSV sampled uniformly on `[0, L]`.
pub fn read_grid_potential_csv<R: Read>(r: R) -> Result<PotentialSpec> {
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for row in reader(r).deserialize::<(f64, f64)>() {
        let (x, v) = row?;
        xs.push(x);
        vs.push(v);
    }
    if xs.len() < 2 {
        return Err(Error::InvalidPotential(
            "grid CSV needs at least two rows".into(),
        ));
    }
    if xs[0].abs() > 1e-12 {
        return Err(Error::InvalidPotential(format!(
            "grid CSV must start at x = 0 (support violates x >= 0 otherwise), got {}",
            xs[0]
        )));
    }
    let l = xs[xs.len() - 1];
    let h = l / (xs.len() - 1) as f64;
    if let Some((i, x)) = xs
        .iter()
        .enumerate()
        .find(|(i, x)| (**x - *i as f64 * h).abs() > 1e-9 * l.max(1.0))
    {
        return Err(Error::InvalidPotential(format!(
            "grid CSV must be uniformly spaced; row {i} has x = {x}, expected {}",
            i as f64 * h
        )));
    }
    PotentialSpec::grid_sampled(l, vs).validate()
}

/// Parses inline JSON, a JSON file, or a two-column CSV file.
pub fn load_potential(arg: &str) -> Result<PotentialSpec> {
    let trimmed = arg.trim_start();
    let spec = if trimmed.starts_with('{') {
        serde_json::from_str(trimmed)?
    } else {
        let path = Path::new(arg);
        let file = std::fs::File::open(path)?;
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            read_grid_potential_csv(file)?
        } else {
            serde_json::from_reader(std::io::BufReader::new(file))?
        }
    };
    PotentialSpec::validate(spec)
}

fn uniform_grid(ks: &[f64]) -> Result<KGrid> {
    if ks.len() < 2 {
        return Err(Error::InvalidConfig(
            "reflection table needs at least two rows".into(),
        ));
    }
    let grid = KGrid::new(ks[0], ks[ks.len() - 1], ks.len())?;
    let tol = 1e-9 * grid.max;
    if let Some((i, k)) = ks
        .iter()
        .enumerate()
        .find(|(i, k)| (**k - grid.point(*i)).abs() > tol)
    {
        return Err(Error::InvalidConfig(format!(
            "k-grid must be uniform; row {i} has k = {k}, expected {}",
            grid.point(i)
        )));
    }
    Ok(grid)
}

/// Fills missing entries by linear interpolation between the nearest present neighbours.
pub fn fill_gaps(values: &[Option<Complex64>]) -> Result<Vec<Complex64>> {
    let present: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    if present.is_empty() {
        return Err(Error::InvalidConfig(
            "no usable reflection coefficients".into(),
        ));
    }
    Ok((0..values.len())
        .map(|i| {
            if let Some(v) = values[i] {
                return v;
            }
            let right = present.partition_point(|&p| p < i);
            match (right.checked_sub(1).map(|j| present[j]), present.get(right)) {
                (Some(a), Some(&b)) => {
                    let t = (i - a) as f64 / (b - a) as f64;
                    values[a].unwrap() * (1.0 - t) + values[b].unwrap() * t
                }
                (Some(a), None) => values[a].unwrap(),
                (None, Some(&b)) => values[b].unwrap(),
                (None, None) => unreachable!(),
            }
        })
        .collect())
}

/// Reads a forward sweep or recovery CSV into a reflection table.
///
/// Skipped recovery rows are filled by interpolation. Tables read from
/// files are assumed to come from potentials without bound states.
pub fn read_reflection_table<R: Read>(r: R) -> Result<ReflectionTable> {
    let mut text = String::new();
    let mut r = r;
    r.read_to_string(&mut text)?;
    let header = text
        .lines()
        .find(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .unwrap_or_default();
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let (ks, values): (Vec<f64>, Vec<Option<Complex64>>) = if cols == FORWARD_COLUMNS {
        read_forward_csv(text.as_bytes())?
            .into_iter()
            .map(|c| (c.k, Some(c.s21)))
            .unzip()
    } else if cols == RECOVERY_COLUMNS {
        read_recovery_csv(text.as_bytes())?
            .into_iter()
            .map(|r| (r.k, r.s21_est))
            .unzip()
    } else {
        return Err(Error::InvalidConfig(format!(
            "expected a forward or recovery CSV, found header [{header}]"
        )));
    };
    let grid = uniform_grid(&ks)?;
    ReflectionTable::new(grid, fill_gaps(&values)?, true)
}
