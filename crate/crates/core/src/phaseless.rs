//! Intensity-only measurement records taken to the left of the potential.
//!
//! * `S1`: `|s21(k)|^2` plus intensities at two distinct points.
//! * `S2`: intensities at three pairwise distinct points.
//! * `S3`: intensity and its spatial derivative at one point.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{
    intensity_derivative_from_s21, intensity_from_s21, require_measurement_region, ForwardSolver,
};
use crate::grid::KGrid;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    S1,
    S2,
    S3,
}

impl Method {
    pub fn positions_required(self) -> usize {
        match self {
            Method::S1 => 2,
            Method::S2 => 3,
            Method::S3 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::S1 => "s1",
            Method::S2 => "s2",
            Method::S3 => "s3",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Method::S1),
            "s2" => Ok(Method::S2),
            "s3" => Ok(Method::S3),
            other => Err(Error::InvalidConfig(format!(
                "unknown method '{other}', expected s1|s2|s3"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S1Record {
    pub k: f64,
    pub x1: f64,
    pub x2: f64,
    pub r2: f64,
    pub i1: f64,
    pub i2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S2Record {
    pub k: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S3Record {
    pub k: f64,
    pub x: f64,
    pub i: f64,
    pub di: f64,
}

/// `a(x, k) = |psi_plus(x, k)|^2 - 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AValue(pub f64);

pub fn a_of(intensity: f64) -> AValue {
    AValue(intensity - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    CentralDifference {
        h: f64,
    },
}

/// Multiplicative Gaussian noise `value * (1 + sigma * xi)`, seeded per quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(Self { sigma, seed })
    }

    /// Perturbs `value`; the draw depends only on `(seed, k, x, channel)`.
    pub fn perturb(&self, value: f64, k: f64, x: f64, channel: u64) -> f64 {
        if self.sigma == 0.0 {
            return value;
        }
        let key = splitmix(splitmix(splitmix(self.seed ^ k.to_bits()) ^ x.to_bits()) ^ channel);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let xi: f64 = StandardNormal.sample(&mut rng);
        value * (1.0 + self.sigma * xi)
    }
}

const CH_R2: u64 = 1;
const CH_INTENSITY: u64 = 2;
const CH_DERIVATIVE: u64 = 3;

/// Rejects positions outside `x < 0` and coincident pairs.
pub fn check_positions(method: Method, positions: &[f64]) -> Result<()> {
    if positions.len() != method.positions_required() {
        return Err(Error::InvalidConfig(format!(
            "method {method} needs {} measurement position(s), got {}",
            method.positions_required(),
            positions.len()
        )));
    }
    for &x in positions {
        require_measurement_region(x)?;
    }
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i] == positions[j] {
                let msg = match method {
                    Method::S1 => "S1 requires distinct measurement positions x1 != x2".to_string(),
                    _ => format!(
                        "S2 requires pairwise distinct measurement positions (x{} = x{} = {})",
                        i + 1,
                        j + 1,
                        positions[i]
                    ),
                };
                return Err(Error::InvalidConfig(msg));
            }
        }
    }
    Ok(())
}

impl S1Record {
    /// Noise-free record for a known reflection coefficient.
    pub fn synthesize(s21: Complex64, k: f64, x1: f64, x2: f64) -> Self {
        Self {
            k,
            x1,
            x2,
            r2: s21.norm_sqr(),
            i1: intensity_from_s21(s21, x1, k),
            i2: intensity_from_s21(s21, x2, k),
        }
    }

    fn noisy(self, noise: &NoiseModel) -> Self {
        Self {
            r2: noise.perturb(self.r2, self.k, 0.0, CH_R2),
            i1: noise.perturb(self.i1, self.k, self.x1, CH_INTENSITY),
            i2: noise.perturb(self.i2, self.k, self.x2, CH_INTENSITY),
            ..self
        }
    }
}

impl S2Record {
    pub fn synthesize(s21: Complex64, k: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Self {
            k,
            x1,
            x2,
            x3,
            i1: intensity_from_s21(s21, x1, k),
            i2: intensity_from_s21(s21, x2, k),
            i3: intensity_from_s21(s21, x3, k),
        }
    }

    fn noisy(self, noise: &NoiseModel) -> Self {
        Self {
            i1: noise.perturb(self.i1, self.k, self.x1, CH_INTENSITY),
            i2: noise.perturb(self.i2, self.k, self.x2, CH_INTENSITY),
            i3: noise.perturb(self.i3, self.k, self.x3, CH_INTENSITY),
            ..self
        }
    }
}

impl S3Record {
    pub fn synthesize(s21: Complex64, k: f64, x: f64, mode: DerivativeMode) -> Self {
        Self::synthesize_noisy(s21, k, x, mode, &NoiseModel::none())
    }

    fn synthesize_noisy(
        s21: Complex64,
        k: f64,
        x: f64,
        mode: DerivativeMode,
        noise: &NoiseModel,
    ) -> Self {
        let i = noise.perturb(intensity_from_s21(s21, x, k), k, x, CH_INTENSITY);
        let di = match mode {
            DerivativeMode::Analytic => noise.perturb(
                intensity_derivative_from_s21(s21, x, k),
                k,
                x,
                CH_DERIVATIVE,
            ),
            DerivativeMode::CentralDifference { h } => {
                let (xp, xm) = (x + h, x - h);
                let ip = noise.perturb(intensity_from_s21(s21, xp, k), k, xp, CH_INTENSITY);
                let im = noise.perturb(intensity_from_s21(s21, xm, k), k, xm, CH_INTENSITY);
                (ip - im) / (2.0 * h)
            }
        };
        Self { k, x, i, di }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaselessDataset {
    S1(Vec<S1Record>),
    S2(Vec<S2Record>),
    S3(Vec<S3Record>),
}

impl PhaselessDataset {
    pub fn method(&self) -> Method {
        match self {
            PhaselessDataset::S1(_) => Method::S1,
            PhaselessDataset::S2(_) => Method::S2,
            PhaselessDataset::S3(_) => Method::S3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PhaselessDataset::S1(r) => r.len(),
            PhaselessDataset::S2(r) => r.len(),
            PhaselessDataset::S3(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        match self {
            PhaselessDataset::S1(r) => r.iter().map(|r| r.k).collect(),
            PhaselessDataset::S2(r) => r.iter().map(|r| r.k).collect(),
            PhaselessDataset::S3(r) => r.iter().map(|r| r.k).collect(),
        }
    }
}

/// Scattering coefficients over the grid, computed once per dataset.
fn reflection_over(
    solver: &ForwardSolver,
    v: &PotentialSpec,
    kgrid: &KGrid,
) -> Result<Vec<(f64, Complex64)>> {
    Ok(solver
        .sweep(v, kgrid)?
        .into_iter()
        .map(|c| (c.k, c.s21))
        .collect())
}

pub fn build_s1(
    solver: &ForwardSolver,
    v: &PotentialSpec,
    x1: f64,
    x2: f64,
    kgrid: &KGrid,
    noise: &NoiseModel,
) -> Result<Vec<S1Record>> {
    check_positions(Method::S1, &[x1, x2])?;
    Ok(reflection_over(solver, v, kgrid)?
        .into_iter()
        .map(|(k, s21)| S1Record::synthesize(s21, k, x1, x2).noisy(noise))
        .collect())
}

pub fn build_s2(
    solver: &ForwardSolver,
    v: &PotentialSpec,
    positions: [f64; 3],
    kgrid: &KGrid,
    noise: &NoiseModel,
) -> Result<Vec<S2Record>> {
    let [x1, x2, x3] = positions;
    check_positions(Method::S2, &positions)?;
    Ok(reflection_over(solver, v, kgrid)?
        .into_iter()
        .map(|(k, s21)| S2Record::synthesize(s21, k, x1, x2, x3).noisy(noise))
        .collect())
}

pub fn build_s3(
    solver: &ForwardSolver,
    v: &PotentialSpec,
    x: f64,
    kgrid: &KGrid,
    noise: &NoiseModel,
    mode: DerivativeMode,
) -> Result<Vec<S3Record>> {
    check_positions(Method::S3, &[x])?;
    if let DerivativeMode::CentralDifference { h } = mode {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "difference step must be positive, got {h}"
            )));
        }
        require_measurement_region(x + h)?;
    }
    Ok(reflection_over(solver, v, kgrid)?
        .into_iter()
        .map(|(k, s21)| S3Record::synthesize_noisy(s21, k, x, mode, noise))
        .collect())
}

/// Builds the dataset of the requested kind from a positions slice.
pub fn build(
    solver: &ForwardSolver,
    v: &PotentialSpec,
    method: Method,
    positions: &[f64],
    kgrid: &KGrid,
    noise: &NoiseModel,
    mode: DerivativeMode,
) -> Result<PhaselessDataset> {
    check_positions(method, positions)?;
    Ok(match method {
        Method::S1 => PhaselessDataset::S1(build_s1(
            solver,
            v,
            positions[0],
            positions[1],
            kgrid,
            noise,
        )?),
        Method::S2 => PhaselessDataset::S2(build_s2(
            solver,
            v,
            [positions[0], positions[1], positions[2]],
            kgrid,
            noise,
        )?),
        Method::S3 => PhaselessDataset::S3(build_s3(solver, v, positions[0], kgrid, noise, mode)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn solver() -> ForwardSolver {
        ForwardSolver::default()
    }

    #[test]
    fn a_values() {
        assert_eq!(a_of(1.0), AValue(0.0));
        assert_eq!(a_of(2.25), AValue(1.25));
        assert_eq!(a_of(0.0), AValue(-1.0));
    }

    #[test]
    fn zero_potential_records() {
        let grid = KGrid::new(0.5, 5.0, 7).unwrap();
        let v = PotentialSpec::zero();
        for r in build_s1(&solver(), &v, -1.0, -2.0, &grid, &NoiseModel::none()).unwrap() {
            assert_eq!((r.r2, r.i1, r.i2), (0.0, 1.0, 1.0));
        }
        for r in build_s2(
            &solver(),
            &v,
            [-1.0, -2.0, -3.0],
            &grid,
            &NoiseModel::none(),
        )
        .unwrap()
        {
            assert_eq!((r.i1, r.i2, r.i3), (1.0, 1.0, 1.0));
        }
        for mode in [
            DerivativeMode::Analytic,
            DerivativeMode::CentralDifference { h: 1e-3 },
        ] {
            for r in build_s3(&solver(), &v, -1.0, &grid, &NoiseModel::none(), mode).unwrap() {
                assert_eq!((r.i, r.di), (1.0, 0.0));
            }
        }
    }

    #[test]
    fn coincident_positions_are_rejected() {
        let grid = KGrid::new(1.0, 1.0, 1).unwrap();
        let v = PotentialSpec::zero();
        let err = build_s1(&solver(), &v, -1.0, -1.0, &grid, &NoiseModel::none()).unwrap_err();
        assert!(err.to_string().contains("x1 != x2"), "{err}");
        assert!(build_s2(
            &solver(),
            &v,
            [-1.0, -2.0, -1.0],
            &grid,
            &NoiseModel::none()
        )
        .is_err());
        assert!(matches!(
            build_s1(&solver(), &v, 0.5, -1.0, &grid, &NoiseModel::none()),
            Err(Error::OutsideMeasurementRegion(_))
        ));
        assert!(build_s3(
            &solver(),
            &v,
            0.0,
            &grid,
            &NoiseModel::none(),
            DerivativeMode::Analytic
        )
        .is_err());
        let bad_h = DerivativeMode::CentralDifference { h: 0.0 };
        assert!(build_s3(&solver(), &v, -1.0, &grid, &NoiseModel::none(), bad_h).is_err());
    }

    #[test]
    fn s1_records_satisfy_the_cosine_form() {
        let s21 = Complex64::from_polar(0.4, 2.0);
        for (k, x) in [(0.7, -1.3), (3.0, -0.2), (10.0, -5.0)] {
            let r = S1Record::synthesize(s21, k, x, x - 0.4);
            let a = a_of(r.i1).0;
            let expected = 2.0 * 0.4 * (2.0 * k * x - 2.0).cos() + 0.16;
            assert!((a - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn central_difference_tracks_the_analytic_derivative() {
        let s21 = Complex64::from_polar(0.3, -1.0);
        let exact = S3Record::synthesize(s21, 2.0, -1.0, DerivativeMode::Analytic);
        let fd = S3Record::synthesize(
            s21,
            2.0,
            -1.0,
            DerivativeMode::CentralDifference { h: 1e-4 },
        );
        assert!(
            (exact.di - fd.di).abs() < 1e-7,
            "{}",
            (exact.di - fd.di).abs()
        );
        assert_eq!(exact.i, fd.i);
    }

    #[test]
    fn noise_is_deterministic_and_seed_dependent() {
        let a = NoiseModel::new(1e-2, 7).unwrap();
        let b = NoiseModel::new(1e-2, 8).unwrap();
        assert_eq!(a.perturb(2.0, 1.0, -1.0, 2), a.perturb(2.0, 1.0, -1.0, 2));
        assert_ne!(a.perturb(2.0, 1.0, -1.0, 2), b.perturb(2.0, 1.0, -1.0, 2));
        assert_ne!(a.perturb(2.0, 1.0, -1.0, 2), a.perturb(2.0, 1.0, -2.0, 2));
        assert_eq!(NoiseModel::none().perturb(2.0, 1.0, -1.0, 2), 2.0);
        assert!(NoiseModel::new(-1.0, 0).is_err());
    }

    #[test]
    fn noise_has_roughly_the_requested_spread() {
        let n = NoiseModel::new(0.1, 42).unwrap();
        let draws: Vec<f64> = (0..4000)
            .map(|i| n.perturb(1.0, 1.0 + i as f64, -1.0, 2) - 1.0)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var.sqrt() - 0.1).abs() < 0.01);
    }

    #[test]
    fn translated_potential_has_identical_r2() {
        let grid = KGrid::new(0.2, 6.0, 25).unwrap();
        let v = PotentialSpec::square_barrier(2.0, 1.0);
        let moved = v.translate(0.7).unwrap();
        let a = build_s1(
            &solver(),
            &v,
            -1.0,
            -1.0 - PI / 7.0,
            &grid,
            &NoiseModel::none(),
        )
        .unwrap();
        let b = build_s1(
            &solver(),
            &moved,
            -1.0,
            -1.0 - PI / 7.0,
            &grid,
            &NoiseModel::none(),
        )
        .unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert!((ra.r2 - rb.r2).abs() < 1e-12);
        }
    }
}
