//! Forward scattering: the solution `psi_plus` incident from the left and the
//! coefficients `s21` (reflected to the left) and `s22` (transmitted to the right).
//!
//! For `x < 0` the field is exactly `e^{ikx} + s21 e^{-ikx}`, for `x > L` it is
//! `s22 e^{ikx}`. Inside the support we integrate the Jost-type solution `g`
//! with `g = e^{ikx}` beyond `L` down to `x = 0` and match there.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::KGrid;
use crate::ode::{self, StepperOptions};
use crate::potential::PotentialSpec;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A strictly positive wavenumber; the energy is `k^2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Wavenumber(f64);

impl Wavenumber {
    pub fn new(k: f64) -> Result<Self> {
        if k.is_finite() && k > 0.0 {
            Ok(Self(k))
        } else {
            Err(Error::InvalidWavenumber(k))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn energy(self) -> f64 {
        self.0 * self.0
    }
}

impl TryFrom<f64> for Wavenumber {
    type Error = Error;
    fn try_from(k: f64) -> Result<Self> {
        Self::new(k)
    }
}

impl From<Wavenumber> for f64 {
    fn from(k: Wavenumber) -> f64 {
        k.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    pub k: f64,
    pub s21: Complex64,
    pub s22: Complex64,
    /// Set when the unitarity defect exceeded the solver's tolerance.
    #[serde(default)]
    pub flagged: bool,
}

impl ScatteringCoefficients {
    pub fn new(k: f64, s21: Complex64, s22: Complex64) -> Self {
        Self {
            k,
            s21,
            s22,
            flagged: false,
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(self)
    }
}

/// `| |s21|^2 + |s22|^2 - 1 |`.
pub fn unitarity_defect(c: &ScatteringCoefficients) -> f64 {
    (c.s21.norm_sqr() + c.s22.norm_sqr() - 1.0).abs()
}

/// `|psi_plus(x, k)|^2` for `x < 0`, expanded as `1 + 2 Re(s21 e^{-2ikx}) + |s21|^2`.
pub fn intensity_from_s21(s21: Complex64, x: f64, k: f64) -> f64 {
    let rotated = s21 * Complex64::cis(-2.0 * k * x);
    1.0 + 2.0 * rotated.re + s21.norm_sqr()
}

/// `d|psi_plus(x, k)|^2 / dx = 4k Im(s21 e^{-2ikx})` for `x < 0`.
pub fn intensity_derivative_from_s21(s21: Complex64, x: f64, k: f64) -> f64 {
    4.0 * k * (s21 * Complex64::cis(-2.0 * k * x)).im
}

/// Field to the left of the support, `e^{ikx} + s21 e^{-ikx}`.
pub fn free_field(s21: Complex64, x: f64, k: f64) -> Complex64 {
    Complex64::cis(k * x) + s21 * Complex64::cis(-k * x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    pub stepper: StepperOptions,
    /// Results whose unitarity defect exceeds this are flagged.
    pub unitarity_tol: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            stepper: StepperOptions {
                rtol: 1e-11,
                atol: 1e-11,
                ..Default::default()
            },
            unitarity_tol: 1e-8,
        }
    }
}

/// Transfer matrix of `g'' = (v - k^2) g` over a signed step `d` for constant `v`.
fn constant_propagator(value: f64, k: f64, d: f64) -> [[f64; 2]; 2] {
    let q2 = k * k - value;
    if q2 > 0.0 {
        let q = q2.sqrt();
        let (s, c) = (q * d).sin_cos();
        [[c, s / q], [-q * s, c]]
    } else if q2 < 0.0 {
        let kappa = (-q2).sqrt();
        let (sh, ch) = ((kappa * d).sinh(), (kappa * d).cosh());
        [[ch, sh / kappa], [kappa * sh, ch]]
    } else {
        [[1.0, d], [0.0, 1.0]]
    }
}

fn apply(m: [[f64; 2]; 2], y: [Complex64; 2]) -> [Complex64; 2] {
    [
        y[0] * m[0][0] + y[1] * m[0][1],
        y[0] * m[1][0] + y[1] * m[1][1],
    ]
}

#[derive(Debug, Clone, Default)]
pub struct ForwardSolver {
    pub options: ForwardOptions,
}

impl ForwardSolver {
    pub fn new(options: ForwardOptions) -> Self {
        Self { options }
    }

    /// `(g, g')` at `x` in `[0, L]`, with `g` normalized as `e^{ikx}` at `x = L`.
    pub fn jost_state(&self, v: &PotentialSpec, k: Wavenumber, x: f64) -> Result<[Complex64; 2]> {
        let k = k.get();
        let l = v.support_end();
        let start = Complex64::cis(k * l);
        let mut y = [start, I * k * start];
        if x >= l {
            return Ok(y);
        }

        let mut nodes = v.breakpoints();
        nodes.push(0.0);
        nodes.push(x);
        nodes.retain(|p| *p >= x && *p <= l);
        nodes.sort_by(|a, b| b.total_cmp(a));
        nodes.dedup();

        let exact = v.segments().is_some();
        for w in nodes.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            let mid = 0.5 * (hi + lo);
            if exact || mid < v.shift {
                y = apply(constant_propagator(v.evaluate(mid), k, lo - hi), y);
            } else {
                let vmax = v
                    .evaluate(hi)
                    .abs()
                    .max(v.evaluate(lo).abs())
                    .max(v.evaluate(mid).abs());
                let h0 = 0.05 / (k * k + vmax).sqrt();
                let rhs = |t: f64, s: &[Complex64; 2]| [s[1], s[0] * (v.evaluate(t) - k * k)];
                y = ode::integrate(rhs, hi, y, lo, h0, &self.options.stepper)?.0;
            }
        }
        Ok(y)
    }

    /// Amplitudes `(A, B)` with `g = A e^{ikx} + B e^{-ikx}` for `x <= 0`.
    fn matching_amplitudes(
        &self,
        v: &PotentialSpec,
        k: Wavenumber,
    ) -> Result<(Complex64, Complex64)> {
        let [g, dg] = self.jost_state(v, k, 0.0)?;
        let ratio = dg / (I * k.get());
        Ok(((g + ratio) * 0.5, (g - ratio) * 0.5))
    }

    pub fn scatter(&self, v: &PotentialSpec, k: Wavenumber) -> Result<ScatteringCoefficients> {
        let (a, b) = self.matching_amplitudes(v, k)?;
        let mut c = ScatteringCoefficients::new(k.get(), b / a, a.inv());
        if !(c.s21.is_finite() && c.s22.is_finite()) {
            return Err(Error::Integration(format!(
                "non-finite coefficients at k = {}",
                k.get()
            )));
        }
        c.flagged = c.unitarity_defect() > self.options.unitarity_tol;
        Ok(c)
    }

    pub fn psi_plus(&self, v: &PotentialSpec, x: f64, k: Wavenumber) -> Result<Complex64> {
        let l = v.support_end();
        if x < 0.0 {
            let c = self.scatter(v, k)?;
            Ok(free_field(c.s21, x, k.get()))
        } else if x > l {
            let c = self.scatter(v, k)?;
            Ok(c.s22 * Complex64::cis(k.get() * x))
        } else {
            let (a, _) = self.matching_amplitudes(v, k)?;
            Ok(self.jost_state(v, k, x)?[0] / a)
        }
    }

    pub fn intensity(&self, v: &PotentialSpec, x: f64, k: Wavenumber) -> Result<f64> {
        require_measurement_region(x)?;
        Ok(intensity_from_s21(self.scatter(v, k)?.s21, x, k.get()))
    }

    pub fn intensity_derivative(&self, v: &PotentialSpec, x: f64, k: Wavenumber) -> Result<f64> {
        require_measurement_region(x)?;
        Ok(intensity_derivative_from_s21(
            self.scatter(v, k)?.s21,
            x,
            k.get(),
        ))
    }

    /// Scatters at every grid point, in parallel, preserving grid order.
    pub fn sweep(&self, v: &PotentialSpec, grid: &KGrid) -> Result<Vec<ScatteringCoefficients>> {
        grid.validate()?;
        grid.points()
            .into_par_iter()
            .map(|k| self.scatter(v, Wavenumber::new(k)?))
            .collect()
    }
}

pub(crate) fn require_measurement_region(x: f64) -> Result<()> {
    if x.is_finite() && x < 0.0 {
        Ok(())
    } else {
        Err(Error::OutsideMeasurementRegion(x))
    }
}
