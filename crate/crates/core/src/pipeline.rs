//! End-to-end run: potential → phaseless data → recovered `s21` → reconstructed potential.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{ForwardSolver, ScatteringCoefficients, Wavenumber};
use crate::grid::{KGrid, XGrid};
use crate::inversion::{
    self, InversionDiagnostics, InversionOptions, ReconstructedPotential, ReflectionTable,
};
use crate::io::fill_gaps;
use crate::phaseless::{self, DerivativeMode, Method, NoiseModel, PhaselessDataset};
use crate::potential::PotentialSpec;
use crate::recovery::{self, RecoveryOptions, SweepReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub potential: PotentialSpec,
    pub kgrid: KGrid,
    pub method: Method,
    pub positions: Vec<f64>,
    pub noise: NoiseModel,
    pub derivative_mode: DerivativeMode,
    pub recovery: RecoveryOptions,
    pub xgrid: XGrid,
    pub inversion: InversionOptions,
    /// Re-scatter the reconstruction at every `rescatter_stride`-th wavenumber.
    pub rescatter_stride: usize,
}

impl PipelineConfig {
    /// Defaults matching the documented convergence study.
    pub fn new(potential: PotentialSpec, method: Method, positions: Vec<f64>) -> Result<Self> {
        let hi = (potential.support_end() + 2.0).max(3.0);
        Ok(Self {
            potential,
            kgrid: KGrid::new(0.05, 40.0, 2000)?,
            method,
            positions,
            noise: NoiseModel::none(),
            derivative_mode: DerivativeMode::Analytic,
            recovery: RecoveryOptions::default(),
            xgrid: XGrid::with_step(-1.0, hi, 0.01)?,
            inversion: InversionOptions::default(),
            rescatter_stride: 10,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub potential: String,
    pub method: Method,
    pub k_points: usize,
    pub max_unitarity_defect: f64,
    pub recovered: usize,
    pub degenerate: usize,
    pub non_physical: usize,
    pub max_s21_error: f64,
    pub median_s21_error: f64,
    /// Recovered coefficients with modulus >= 1 that were pulled back inside the unit disk.
    pub clamped: usize,
    pub roundtrip_l1_error: f64,
    /// Relative l2 mismatch between the recovered table and the re-scattered reconstruction.
    pub rescatter_error: f64,
    pub inversion: InversionDiagnostics,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub coefficients: Vec<ScatteringCoefficients>,
    pub dataset: PhaselessDataset,
    pub recovery: SweepReport,
    pub table: ReflectionTable,
    pub reconstruction: ReconstructedPotential,
    pub report: PipelineReport,
}

const MAX_MODULUS: f64 = 1.0 - 1e-9;

/// Reflection table from a recovery sweep; skipped rows are interpolated.
pub fn table_from_recovery(
    kgrid: KGrid,
    report: &SweepReport,
    bound_state_free: bool,
) -> Result<(ReflectionTable, usize)> {
    let raw: Vec<Option<Complex64>> = report.rows.iter().map(|r| r.s21_est).collect();
    let mut clamped = 0;
    let values = fill_gaps(&raw)?
        .into_iter()
        .map(|s| {
            if s.norm() >= 1.0 {
                clamped += 1;
                s * (MAX_MODULUS / s.norm())
            } else {
                s
            }
        })
        .collect();
    Ok((
        ReflectionTable::new(kgrid, values, bound_state_free)?,
        clamped,
    ))
}

/// Relative l2 difference `|a - b| / max(|b|, floor)` over the shared samples.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(1e-24)).sqrt()
}

pub fn run(solver: &ForwardSolver, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let potential = cfg.potential.clone().validate()?;
    phaseless::check_positions(cfg.method, &cfg.positions)?;
    if cfg.rescatter_stride == 0 {
        return Err(Error::InvalidConfig("rescatter_stride must be >= 1".into()));
    }

    let coefficients = solver.sweep(&potential, &cfg.kgrid)?;
    let reference: Vec<Complex64> = coefficients.iter().map(|c| c.s21).collect();
    let dataset = phaseless::build(
        solver,
        &potential,
        cfg.method,
        &cfg.positions,
        &cfg.kgrid,
        &cfg.noise,
        cfg.derivative_mode,
    )?;
    let recovery = recovery::sweep_recover(&dataset, &cfg.recovery, Some(&reference))?;

    let bound_state_free = potential.min_value() >= 0.0;
    let (table, clamped) = table_from_recovery(cfg.kgrid, &recovery, bound_state_free)?;
    let reconstruction = inversion::reconstruct_potential(&table, &cfg.xgrid, &cfg.inversion)?;
    let roundtrip = inversion::roundtrip_error(&potential, &reconstruction);

    let rebuilt = reconstruction.to_potential()?;
    let idx: Vec<usize> = (0..cfg.kgrid.count).step_by(cfg.rescatter_stride).collect();
    let rescattered = idx
        .iter()
        .map(|&i| {
            Ok(solver
                .scatter(&rebuilt, Wavenumber::new(cfg.kgrid.point(i))?)?
                .s21)
        })
        .collect::<Result<Vec<_>>>()?;
    let sampled: Vec<Complex64> = idx.iter().map(|&i| table.values[i]).collect();

    let summary = &recovery.summary;
    let report = PipelineReport {
        potential: potential.label(),
        method: cfg.method,
        k_points: cfg.kgrid.count,
        max_unitarity_defect: coefficients
            .iter()
            .map(|c| c.unitarity_defect())
            .fold(0.0, f64::max),
        recovered: summary.recovered,
        degenerate: summary.degenerate,
        non_physical: summary.non_physical,
        max_s21_error: summary.max_error.unwrap_or(f64::NAN),
        median_s21_error: summary.median_error.unwrap_or(f64::NAN),
        clamped,
        roundtrip_l1_error: roundtrip,
        rescatter_error: relative_l2(&rescattered, &sampled),
        inversion: reconstruction.diagnostics.clone(),
    };
    Ok(PipelineOutput {
        coefficients,
        dataset,
        recovery,
        table,
        reconstruction,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_pipeline_is_all_zero() {
        let mut cfg =
            PipelineConfig::new(PotentialSpec::zero(), Method::S1, vec![-1.0, -1.3]).unwrap();
        cfg.kgrid = KGrid::new(0.05, 20.0, 400).unwrap();
        cfg.xgrid = XGrid::with_step(-1.0, 2.0, 0.02).unwrap();
        let out = run(&ForwardSolver::default(), &cfg).unwrap();
        assert!(out.table.values.iter().all(|s| s.norm() == 0.0));
        assert!(out.reconstruction.values.iter().all(|v| *v == 0.0));
        assert_eq!(out.report.roundtrip_l1_error, 0.0);
        assert_eq!(out.report.rescatter_error, 0.0);
        assert_eq!(out.report.max_s21_error, 0.0);
    }

    #[test]
    fn relative_l2_guards_zero_reference() {
        let z = [Complex64::new(0.0, 0.0); 3];
        assert_eq!(relative_l2(&z, &z), 0.0);
        let one = [Complex64::new(1.0, 0.0)];
        let two = [Complex64::new(2.0, 0.0)];
        assert_eq!(relative_l2(&two, &one), 1.0);
    }

    #[test]
    fn invalid_positions_are_rejected_before_any_work() {
        let cfg = PipelineConfig::new(PotentialSpec::zero(), Method::S1, vec![-1.0, -1.0]).unwrap();
        let err = run(&ForwardSolver::default(), &cfg).unwrap_err();
        assert!(err.to_string().contains("x1 != x2"));
    }
}
