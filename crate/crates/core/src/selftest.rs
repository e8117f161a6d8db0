//! Quick invariant checks run by `phaseless selftest`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::forward::{intensity_from_s21, ForwardSolver, Wavenumber};
use crate::grid::{KGrid, XGrid};
use crate::inversion::{reconstruct_potential, InversionOptions, ReflectionTable};
use crate::phaseless::{DerivativeMode, S1Record, S2Record, S3Record};
use crate::potential::PotentialSpec;
use crate::recovery::{self, determinant_expanded, determinant_product, RecoveryOptions};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        }
    }
}

/// `(s21, s22)` of a square barrier from plane-wave matching at both edges.
pub fn barrier_by_matching(height: f64, width: f64, k: f64) -> (Complex64, Complex64) {
    let i = Complex64::new(0.0, 1.0);
    let q = Complex64::new(k * k - height, 0.0).sqrt();
    let ik = i * k;
    let iq = i * q;
    let (eq, emq, ek) = ((iq * width).exp(), (-iq * width).exp(), (ik * width).exp());
    // Unknowns (r, b, c, t): e^{ikx} + r e^{-ikx} | b e^{iqx} + c e^{-iqx} | t e^{ikx}.
    let m = Matrix4::new(
        Complex64::new(1.0, 0.0),
        -Complex64::new(1.0, 0.0),
        -Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        -ik,
        -iq,
        iq,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        eq,
        emq,
        -ek,
        Complex64::new(0.0, 0.0),
        iq * eq,
        -iq * emq,
        -ik * ek,
    );
    let rhs = Vector4::new(
        -Complex64::new(1.0, 0.0),
        -ik,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    );
    let sol = m
        .lu()
        .solve(&rhs)
        .expect("matching system is regular for k > 0");
    (sol[0], sol[3])
}

fn presets() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::zero(),
        PotentialSpec::square_barrier(2.0, 1.0),
        PotentialSpec::double_barrier(3.0, 0.4, 0.6),
        PotentialSpec::gaussian(1.5, 1.5, 0.3),
        PotentialSpec::grid_sampled(2.0, vec![0.0, 1.0, -0.5, 2.0, 0.0]),
    ]
}

pub fn run(solver: &ForwardSolver) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let ks = KGrid::new(0.2, 12.0, 20)?.points();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);

    let mut defect = 0.0f64;
    let mut exact_defect = 0.0f64;
    for v in presets() {
        for &k in &ks {
            let c = solver.scatter(&v, Wavenumber::new(k)?)?;
            defect = defect.max(c.unitarity_defect());
            if v.segments().is_some() {
                exact_defect = exact_defect.max(c.unitarity_defect());
            }
        }
    }
    checks.push(Check::new("unitarity |s21|^2 + |s22|^2 = 1", defect, 1e-8));
    checks.push(Check::new(
        "unitarity, exact propagator",
        exact_defect,
        1e-12,
    ));

    let mut oracle = 0.0f64;
    for &k in &ks {
        let c = solver.scatter(
            &PotentialSpec::square_barrier(2.0, 1.0),
            Wavenumber::new(k)?,
        )?;
        let (r, t) = barrier_by_matching(2.0, 1.0, k);
        oracle = oracle.max((c.s21 - r).norm()).max((c.s22 - t).norm());
    }
    checks.push(Check::new(
        "square barrier vs plane-wave matching",
        oracle,
        1e-8,
    ));

    let mut shift = 0.0f64;
    for v in presets() {
        let moved = v.translate(0.7)?;
        for &k in &ks {
            let a = solver.scatter(&v, Wavenumber::new(k)?)?.s21;
            let b = solver.scatter(&moved, Wavenumber::new(k)?)?.s21;
            shift = shift.max((b - a * Complex64::cis(2.0 * k * 0.7)).norm());
        }
    }
    checks.push(Check::new(
        "translation multiplies s21 by e^{2iky}",
        shift,
        1e-8,
    ));

    let mut reduction = 0.0f64;
    let mut intensity = 0.0f64;
    for v in presets() {
        for _ in 0..5 {
            let k = Wavenumber::new(rng.gen_range(0.2..10.0))?;
            let x = rng.gen_range(-5.0..-0.01);
            let psi = solver.psi_plus(&v, x, k)?;
            let s21 = solver.scatter(&v, k)?.s21;
            reduction = reduction.max((recovery::s21_from_field(psi, x, k.get())? - s21).norm());
            intensity = intensity.max((intensity_from_s21(s21, x, k.get()) - psi.norm_sqr()).abs());
        }
    }
    checks.push(Check::new("s21 from the complex field", reduction, 1e-10));
    checks.push(Check::new(
        "intensity expansion equals |psi|^2",
        intensity,
        1e-12,
    ));

    let opts = RecoveryOptions::default();
    let (mut e1, mut e2, mut e3) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let s21 = Complex64::from_polar(rng.gen_range(0.0..0.99), rng.gen_range(-3.1..3.1));
        let k = rng.gen_range(0.1..20.0);
        let x1 = rng.gen_range(-5.0..-0.01);
        let x2 = rng.gen_range(-5.0..-0.01);
        let x3 = rng.gen_range(-5.0..-0.01);
        if let Ok(r) = recovery::recover_from_s1(&S1Record::synthesize(s21, k, x1, x2), &opts) {
            if r.conditioning > 1e-2 {
                e1 = e1.max((r.s21_est - s21).norm());
            }
        }
        if let Ok(r) = recovery::recover_from_s2(&S2Record::synthesize(s21, k, x1, x2, x3), &opts) {
            if r.conditioning > 1e-2 {
                e2 = e2.max((r.s21_est - s21).norm());
            }
        }
        let r =
            recovery::recover_from_s3(&S3Record::synthesize(s21, k, x1, DerivativeMode::Analytic))?;
        e3 = e3.max((r.s21_est - s21).norm());
    }
    checks.push(Check::new("two-point recovery with |s21|^2", e1, 1e-10));
    checks.push(Check::new("three-point recovery", e2, 1e-10));
    checks.push(Check::new(
        "single-point recovery with derivative",
        e3,
        1e-12,
    ));

    let mut det = 0.0f64;
    for _ in 0..10_000 {
        let (x1, x2, x3) = (
            rng.gen_range(-10.0..0.0),
            rng.gen_range(-10.0..0.0),
            rng.gen_range(-10.0..0.0),
        );
        let k = rng.gen_range(0.01..10.0);
        det = det
            .max((determinant_expanded(x1, x2, x3, k) - determinant_product(x1, x2, x3, k)).abs());
    }
    checks.push(Check::new(
        "determinant sum equals product form",
        det,
        1e-12,
    ));

    let table = ReflectionTable::zero(KGrid::new(0.05, 20.0, 400)?)?;
    let rec = reconstruct_potential(
        &table,
        &XGrid::with_step(-1.0, 2.0, 0.05)?,
        &InversionOptions::default(),
    )?;
    let peak = rec.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    checks.push(Check::new(
        "zero reflection reconstructs zero potential",
        peak,
        0.0,
    ));

    Ok(checks)
}
