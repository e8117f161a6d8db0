//! Explicit recovery of the complex reflection coefficient from phaseless data.
//!
//! Each record yields `|s21| (cos alpha, sin alpha)` by solving a small linear
//! system built from `a(x, k) = |psi_plus(x, k)|^2 - 1 = 2|s21| cos(2kx - alpha) + |s21|^2`.
//!
//! The derivative-based formulas use the factor `e^{-2ikx}`: the intensity
//! expansion `1 + 2 Re(s21 e^{-2ikx}) + |s21|^2` only involves that rotation, so
//! this is the consistent reading of the single-point formulas (a printed
//! `e^{-ikx}` there would not reproduce `s21`).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::require_measurement_region;
use crate::phaseless::{a_of, Method, PhaselessDataset, S1Record, S2Record, S3Record};

/// Default threshold on `|sin|` products below which a geometry is rejected.
pub const DEFAULT_EPS_DET: f64 = 1e-6;

/// Polar form `s21 = modulus * e^{i alpha}` with `alpha` in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSplit {
    pub modulus: f64,
    pub alpha: f64,
}

impl PhaseSplit {
    pub fn from_complex(s21: Complex64) -> Self {
        let (modulus, alpha) = s21.to_polar();
        let alpha = if alpha == -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            alpha
        };
        Self { modulus, alpha }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub eps_det: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            eps_det: DEFAULT_EPS_DET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub k: f64,
    pub s21_est: Complex64,
    /// `|determinant|` of the solved system (1 for the single-point method).
    pub conditioning: f64,
    /// For S1: `| |(c, s)| - sqrt(r2) |`; zero for the other methods.
    pub residual: f64,
    pub method: Method,
}

impl RecoveryResult {
    pub fn phase_split(&self) -> PhaseSplit {
        PhaseSplit::from_complex(self.s21_est)
    }
}

/// `sin(2k(x3-x2)) + sin(2k(x2-x1)) + sin(2k(x1-x3))`, the determinant of the
/// differenced three-point system written as a sum.
pub fn determinant_expanded(x1: f64, x2: f64, x3: f64, k: f64) -> f64 {
    (2.0 * k * (x3 - x2)).sin() + (2.0 * k * (x2 - x1)).sin() + (2.0 * k * (x1 - x3)).sin()
}

/// The same determinant in product form `4 sin(k(x2-x3)) sin(k(x2-x1)) sin(k(x1-x3))`.
pub fn determinant_product(x1: f64, x2: f64, x3: f64, k: f64) -> f64 {
    4.0 * (k * (x2 - x3)).sin() * (k * (x2 - x1)).sin() * (k * (x1 - x3)).sin()
}

pub fn conditioning(method: Method, positions: &[f64], k: f64) -> f64 {
    match method {
        Method::S1 => (2.0 * k * (positions[1] - positions[0])).sin().abs(),
        Method::S2 => determinant_product(positions[0], positions[1], positions[2], k).abs(),
        Method::S3 => 1.0,
    }
}

fn degenerate(condition: &'static str, value: f64, threshold: f64) -> Error {
    Error::DegenerateConfiguration {
        condition,
        value,
        threshold,
    }
}

pub fn recover_from_s1(rec: &S1Record, opts: &RecoveryOptions) -> Result<RecoveryResult> {
    let S1Record {
        k,
        x1,
        x2,
        r2,
        i1,
        i2,
    } = *rec;
    let det = (2.0 * k * (x2 - x1)).sin();
    if det.abs() <= opts.eps_det {
        return Err(degenerate(
            "S1 requires x1 != x2 mod pi/(2k)",
            det,
            opts.eps_det,
        ));
    }
    let b1 = a_of(i1).0 - r2;
    let b2 = a_of(i2).0 - r2;
    let (s1, c1) = (2.0 * k * x1).sin_cos();
    let (s2, c2) = (2.0 * k * x2).sin_cos();
    let scale = 0.5 / det;
    let cos_part = scale * (s2 * b1 - s1 * b2);
    let sin_part = scale * (-c2 * b1 + c1 * b2);

    let modulus = r2.max(0.0).sqrt();
    let alpha = sin_part.atan2(cos_part);
    Ok(RecoveryResult {
        k,
        s21_est: Complex64::from_polar(modulus, alpha),
        conditioning: det.abs(),
        residual: (cos_part.hypot(sin_part) - modulus).abs(),
        method: Method::S1,
    })
}

pub fn recover_from_s2(rec: &S2Record, opts: &RecoveryOptions) -> Result<RecoveryResult> {
    let S2Record {
        k,
        x1,
        x2,
        x3,
        i1,
        i2,
        i3,
    } = *rec;
    for (xa, xb) in [(x1, x2), (x2, x3), (x1, x3)] {
        let s = (k * (xa - xb)).sin();
        if s.abs() <= opts.eps_det {
            return Err(degenerate(
                "S2 requires x_i != x_j mod pi/k for i != j",
                s,
                opts.eps_det,
            ));
        }
    }
    let det = determinant_product(x1, x2, x3, k);
    if det.abs() <= opts.eps_det {
        return Err(degenerate("S2 determinant vanishes", det, opts.eps_det));
    }
    let d21 = a_of(i2).0 - a_of(i1).0;
    let d31 = a_of(i3).0 - a_of(i1).0;
    let (s1, c1) = (2.0 * k * x1).sin_cos();
    let (s2, c2) = (2.0 * k * x2).sin_cos();
    let (s3, c3) = (2.0 * k * x3).sin_cos();
    let scale = 0.5 / det;
    let cos_part = scale * ((s3 - s1) * d21 + (s1 - s2) * d31);
    let sin_part = scale * ((c1 - c3) * d21 + (c2 - c1) * d31);
    Ok(RecoveryResult {
        k,
        s21_est: Complex64::new(cos_part, sin_part),
        conditioning: det.abs(),
        residual: 0.0,
        method: Method::S2,
    })
}

pub fn recover_from_s3(rec: &S3Record) -> Result<RecoveryResult> {
    let S3Record { k, x, i, di } = *rec;
    let im = di / (4.0 * k);
    let radicand = i - im * im;
    if radicand < 0.0 {
        return Err(Error::NonPhysicalIntensity { radicand });
    }
    // |s21| < 1 forces Re(s21 e^{-2ikx}) + 1 > 0, hence the positive root.
    let re = radicand.sqrt() - 1.0;
    Ok(RecoveryResult {
        k,
        s21_est: Complex64::new(re, im) * Complex64::cis(2.0 * k * x),
        conditioning: 1.0,
        residual: 0.0,
        method: Method::S3,
    })
}

/// `s21 = e^{ikx} psi_plus(x, k) - e^{2ikx}` from the complex field at `x < 0`.
pub fn s21_from_field(psi: Complex64, x: f64, k: f64) -> Result<Complex64> {
    require_measurement_region(x)?;
    Ok(Complex64::cis(k * x) * psi - Complex64::cis(2.0 * k * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    Degenerate,
    NonPhysical,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Degenerate => "degenerate",
            RowStatus::NonPhysical => "non-physical",
        }
    }
}

impl std::str::FromStr for RowStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RowStatus::Ok),
            "degenerate" => Ok(RowStatus::Degenerate),
            "non-physical" => Ok(RowStatus::NonPhysical),
            other => Err(Error::InvalidConfig(format!(
                "unknown recovery status '{other}'"
            ))),
        }
    }
}

/// One line of a recovery sweep; `s21_est` is `None` for skipped wavenumbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub s21_est: Option<Complex64>,
    pub conditioning: f64,
    pub residual: f64,
    pub status: RowStatus,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub recovered: usize,
    pub degenerate: usize,
    pub non_physical: usize,
    pub max_error: Option<f64>,
    pub median_error: Option<f64>,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub method: Method,
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

fn row_from(k: f64, conditioning: f64, outcome: Result<RecoveryResult>) -> Result<SweepRow> {
    match outcome {
        Ok(r) => Ok(SweepRow {
            k,
            s21_est: Some(r.s21_est),
            conditioning: r.conditioning,
            residual: r.residual,
            status: RowStatus::Ok,
            message: None,
        }),
        Err(e) => {
            let status = match e {
                Error::DegenerateConfiguration { .. } => RowStatus::Degenerate,
                Error::NonPhysicalIntensity { .. } => RowStatus::NonPhysical,
                other => return Err(other),
            };
            Ok(SweepRow {
                k,
                s21_est: None,
                conditioning,
                residual: f64::NAN,
                status,
                message: Some(e.to_string()),
            })
        }
    }
}

/// Recovers every record, flagging (not aborting on) degenerate or non-physical ones.
///
/// `reference`, when given, must align with the dataset's records and feeds
/// the error statistics of the summary.
pub fn sweep_recover(
    dataset: &PhaselessDataset,
    opts: &RecoveryOptions,
    reference: Option<&[Complex64]>,
) -> Result<SweepReport> {
    let rows: Vec<SweepRow> = match dataset {
        PhaselessDataset::S1(recs) => recs
            .par_iter()
            .map(|r| {
                row_from(
                    r.k,
                    conditioning(Method::S1, &[r.x1, r.x2], r.k),
                    recover_from_s1(r, opts),
                )
            })
            .collect::<Result<_>>()?,
        PhaselessDataset::S2(recs) => recs
            .par_iter()
            .map(|r| {
                row_from(
                    r.k,
                    conditioning(Method::S2, &[r.x1, r.x2, r.x3], r.k),
                    recover_from_s2(r, opts),
                )
            })
            .collect::<Result<_>>()?,
        PhaselessDataset::S3(recs) => recs
            .par_iter()
            .map(|r| row_from(r.k, 1.0, recover_from_s3(r)))
            .collect::<Result<_>>()?,
    };

    if let Some(reference) = reference {
        if reference.len() != rows.len() {
            return Err(Error::InvalidConfig(format!(
                "reference table has {} entries, dataset has {}",
                reference.len(),
                rows.len()
            )));
        }
    }

    let mut summary = SweepSummary::default();
    let mut errors = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match row.status {
            RowStatus::Ok => summary.recovered += 1,
            RowStatus::Degenerate => summary.degenerate += 1,
            RowStatus::NonPhysical => summary.non_physical += 1,
        }
        if let Some(est) = row.s21_est {
            summary.max_residual = summary.max_residual.max(row.residual);
            if let Some(reference) = reference {
                errors.push((est - reference[i]).norm());
            }
        }
    }
    if !errors.is_empty() {
        errors.sort_by(f64::total_cmp);
        summary.max_error = errors.last().copied();
        summary.median_error = Some(median_sorted(&errors));
    }
    Ok(SweepReport {
        method: dataset.method(),
        rows,
        summary,
    })
}

pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phaseless::DerivativeMode;
    use std::f64::consts::PI;

    fn target() -> Complex64 {
        Complex64::from_polar(0.5, PI / 3.0)
    }

    #[test]
    fn phase_split_round_trip() {
        let p = PhaseSplit::from_complex(target());
        assert!((p.modulus - 0.5).abs() < 1e-15);
        assert!((p.alpha - PI / 3.0).abs() < 1e-15);
        assert!((p.to_complex() - target()).norm() < 1e-15);
        assert_eq!(
            PhaseSplit::from_complex(Complex64::new(-0.5, -0.0)).alpha,
            PI
        );
    }

    #[test]
    fn s1_zero_record_gives_zero() {
        let rec = S1Record {
            k: 1.0,
            x1: -1.0,
            x2: -2.0,
            r2: 0.0,
            i1: 1.0,
            i2: 1.0,
        };
        let r = recover_from_s1(&rec, &RecoveryOptions::default()).unwrap();
        assert_eq!(r.s21_est, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn s1_recovers_synthesized_coefficient() {
        let rec = S1Record::synthesize(target(), 1.0, -1.0, -2.0);
        let r = recover_from_s1(&rec, &RecoveryOptions::default()).unwrap();
        assert!((r.s21_est - target()).norm() < 1e-10);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn s1_degenerate_geometry() {
        let rec = S1Record::synthesize(target(), 1.0, -1.0, -1.0 - PI / 2.0);
        match recover_from_s1(&rec, &RecoveryOptions::default()) {
            Err(Error::DegenerateConfiguration { value, .. }) => assert!(value.abs() < 1e-12),
            other => panic!("expected degenerate configuration, got {other:?}"),
        }
    }

    #[test]
    fn s2_recovers_synthesized_coefficient_and_modulus() {
        let rec = S2Record::synthesize(target(), 1.0, -1.0, -2.0, -3.5);
        let r = recover_from_s2(&rec, &RecoveryOptions::default()).unwrap();
        assert!((r.s21_est - target()).norm() < 1e-10);
        assert!((r.s21_est.norm() - 0.5).abs() < 1e-10);
        let zero = S2Record {
            k: 1.0,
            x1: -1.0,
            x2: -2.0,
            x3: -3.5,
            i1: 1.0,
            i2: 1.0,
            i3: 1.0,
        };
        assert_eq!(
            recover_from_s2(&zero, &RecoveryOptions::default())
                .unwrap()
                .s21_est
                .norm(),
            0.0
        );
    }

    #[test]
    fn s2_degenerate_pair() {
        let rec = S2Record::synthesize(target(), 1.0, -1.0, -1.0 - PI, -2.0);
        assert!(matches!(
            recover_from_s2(&rec, &RecoveryOptions::default()),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn s3_recovers_synthesized_coefficient() {
        let rec = S3Record::synthesize(target(), 1.0, -1.0, DerivativeMode::Analytic);
        let r = recover_from_s3(&rec).unwrap();
        assert!((r.s21_est - target()).norm() < 1e-12);
        let zero = S3Record {
            k: 1.0,
            x: -1.0,
            i: 1.0,
            di: 0.0,
        };
        assert_eq!(recover_from_s3(&zero).unwrap().s21_est.norm(), 0.0);
    }

    #[test]
    fn s3_negative_radicand_is_non_physical() {
        // di / 4k = 1 so the radicand is i - 1 = -1e-9.
        let rec = S3Record {
            k: 1.0,
            x: -1.0,
            i: 1.0 - 1e-9,
            di: 4.0,
        };
        match recover_from_s3(&rec) {
            Err(Error::NonPhysicalIntensity { radicand }) => {
                assert!((radicand + 1e-9).abs() < 1e-15)
            }
            other => panic!("expected non-physical intensity, got {other:?}"),
        }
    }

    #[test]
    fn field_reduction() {
        let (x, k) = (-1.7, 2.3);
        assert!(s21_from_field(Complex64::cis(k * x), x, k).unwrap().norm() < 1e-15);
        let psi = Complex64::cis(k * x) + Complex64::cis(-k * x) * 0.3;
        assert!((s21_from_field(psi, x, k).unwrap() - 0.3).norm() < 1e-15);
        assert!(s21_from_field(psi, 0.0, k).is_err());
    }

    #[test]
    fn conditioning_values() {
        assert!((conditioning(Method::S1, &[-1.0, -2.0], PI / 4.0) - 1.0).abs() < 1e-15);
        let x2 = -1.0 - PI / 2.0;
        assert!(conditioning(Method::S1, &[-1.0, x2], 1.0) < 1e-15);
        assert_eq!(conditioning(Method::S3, &[-1.0], 3.0), 1.0);
    }

    #[test]
    fn sweep_flags_degenerate_rows_without_aborting() {
        let ks = [1.0, PI / 2.0, 2.0];
        let recs: Vec<S1Record> = ks
            .iter()
            .map(|&k| S1Record::synthesize(target(), k, -1.0, -2.0))
            .collect();
        let report = sweep_recover(
            &PhaselessDataset::S1(recs),
            &RecoveryOptions::default(),
            Some(&[target(); 3]),
        )
        .unwrap();
        assert_eq!(report.summary.recovered, 2);
        assert_eq!(report.summary.degenerate, 1);
        assert_eq!(report.rows[1].status, RowStatus::Degenerate);
        assert!(report.rows[1].s21_est.is_none());
        assert!(report.summary.max_error.unwrap() < 1e-10);
        assert!(sweep_recover(
            &PhaselessDataset::S1(vec![]),
            &RecoveryOptions::default(),
            Some(&[target()])
        )
        .is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median_sorted(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median_sorted(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }
}
