//! Potential reconstruction from the left reflection coefficient.
//!
//! With `f(x, k) = e^{-ikx} + ∫_{-∞}^{x} K(x, y) e^{-iky} dy` the Jost solution
//! normalized at `-∞`, the transformation kernel satisfies (no bound states)
//!
//! ```text
//! K(x, y) + F(x + y) + ∫_{-∞}^{x} K(x, z) F(z + y) dz = 0,   y < x,
//! F(t) = (1/2π) ∫ s21(k) e^{-ikt} dk,
//! v(x) = 2 d/dx K(x, x).
//! ```
//!
//! Because `v` vanishes on `x < 0`, `F(t) = 0` for `t < 0` and `K(x, y) = 0`
//! for `y < -x`, so for `x > 0` the equation lives on the finite interval
//! `y ∈ [-x, x]`. In the variable `u = x + y ∈ [0, 2x]`, with `G(u) = K(x, u - x)`,
//!
//! ```text
//! G(u) + F(u) + ∫_0^{2x} G(w) F(w + u - 2x) dw = 0,   K(x, x) = G(2x),
//! ```
//!
//! which is discretized by the Nyström method with trapezoid weights. For
//! `x <= 0` the integral term is empty and `K(x, x) = -F(2x)`. The sign
//! conventions are pinned by the forward/inverse round-trip tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::forward::ScatteringCoefficients;
use crate::grid::{KGrid, XGrid};
use crate::potential::PotentialSpec;
use crate::quad;

/// Reflection coefficient sampled on a uniform positive wavenumber grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionTable {
    pub kgrid: KGrid,
    pub values: Vec<Complex64>,
    /// Whether the source potential is known to have no bound states.
    pub bound_state_free: bool,
}

impl ReflectionTable {
    pub fn new(kgrid: KGrid, values: Vec<Complex64>, bound_state_free: bool) -> Result<Self> {
        kgrid.validate()?;
        if values.len() != kgrid.count {
            return Err(Error::InvalidConfig(format!(
                "reflection table has {} values for {} grid points",
                values.len(),
                kgrid.count
            )));
        }
        if kgrid.count < 2 {
            return Err(Error::InvalidConfig(
                "reflection table needs at least two wavenumbers".into(),
            ));
        }
        if let Some((i, s)) = values
            .iter()
            .enumerate()
            .find(|(_, s)| !s.is_finite() || s.norm() >= 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "reflection coefficient at k = {} has modulus {} (must be finite and < 1)",
                kgrid.point(i),
                s.norm()
            )));
        }
        Ok(Self {
            kgrid,
            values,
            bound_state_free,
        })
    }

    pub fn from_coefficients(
        kgrid: KGrid,
        coeffs: &[ScatteringCoefficients],
        bound_state_free: bool,
    ) -> Result<Self> {
        Self::new(
            kgrid,
            coeffs.iter().map(|c| c.s21).collect(),
            bound_state_free,
        )
    }

    pub fn zero(kgrid: KGrid) -> Result<Self> {
        Self::new(kgrid, vec![Complex64::new(0.0, 0.0); kgrid.count], true)
    }
}

/// Spectral window applied to `s21` before the Fourier integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taper {
    None,
    /// Lanczos sigma factors `sinc(k / k_max)`; damps the ringing caused by the hard cutoff.
    #[default]
    Lanczos,
}

impl Taper {
    fn factor(self, k: f64, k_max: f64) -> f64 {
        match self {
            Taper::None => 1.0,
            Taper::Lanczos => {
                let a = PI * k / k_max;
                if a == 0.0 {
                    1.0
                } else {
                    a.sin() / a
                }
            }
        }
    }
}

/// The Fourier kernel `F(t)` of a reflection table.
///
/// The integral over the real line uses `s21(-k) = conj(s21(k))` and the
/// trapezoid rule on the nodes `±k_j`; the central panel `[-k_min, k_min]`
/// is a single trapezoid panel.
#[derive(Debug, Clone)]
pub struct MarchenkoKernel {
    nodes: Vec<f64>,
    weighted: Vec<Complex64>,
    step: f64,
    tail_bound: f64,
}

impl MarchenkoKernel {
    pub fn new(table: &ReflectionTable) -> Self {
        Self::with_taper(table, Taper::None)
    }

    pub fn with_taper(table: &ReflectionTable, taper: Taper) -> Self {
        let grid = table.kgrid;
        let nodes = grid.points();
        let step = grid.step();
        let mut weights = quad::trapezoid_weights(nodes.len(), step);
        weights[0] += grid.min;
        let weighted = nodes
            .iter()
            .zip(weights.iter().zip(&table.values))
            .map(|(k, (w, s))| s * (*w * taper.factor(*k, grid.max)))
            .collect();
        let last = table.values[table.values.len() - 1].norm();
        Self {
            nodes,
            weighted,
            step,
            tail_bound: last * grid.max / PI,
        }
    }

    /// Largest `|t|` the grid resolves before the quadrature aliases.
    pub fn max_time(&self) -> f64 {
        PI / self.step
    }

    /// Estimate of `|F|` error from discarding `|k| > k_max`, assuming `|s21| ~ 1/k^2` decay.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t.abs() > self.max_time() {
            return Err(Error::Truncation(format!(
                "|t| = {:.4} exceeds pi/dk = {:.4}; refine the k-grid",
                t.abs(),
                self.max_time()
            )));
        }
        Ok(())
    }

    /// `(Re F(t), Im F(t))`; the imaginary part vanishes up to round-off.
    pub fn evaluate_complex(&self, t: f64) -> Result<Complex64> {
        self.check_range(t)?;
        let mut pos = Complex64::new(0.0, 0.0);
        let mut neg = Complex64::new(0.0, 0.0);
        for (k, ws) in self.nodes.iter().zip(&self.weighted) {
            pos += ws * Complex64::cis(-k * t);
            neg += ws.conj() * Complex64::cis(k * t);
        }
        Ok((pos + neg) / (2.0 * PI))
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        Ok(self.evaluate_complex(t)?.re)
    }

    /// `F(m dt)` for `m = -m_max ..= m_max`.
    pub fn evaluate_symmetric(&self, dt: f64, m_max: usize) -> Result<Vec<f64>> {
        self.check_range(dt * m_max as f64)?;
        let n = 2 * m_max + 1;
        let mut out = vec![0.0; n];
        let t0 = -(m_max as f64) * dt;
        for (k, ws) in self.nodes.iter().zip(&self.weighted) {
            let rot = Complex64::cis(-k * dt);
            let mut z = *ws * Complex64::cis(-k * t0);
            for (m, slot) in out.iter_mut().enumerate() {
                // Resynchronize periodically to bound round-off drift of the recurrence.
                if m % 64 == 0 && m > 0 {
                    z = *ws * Complex64::cis(-k * (t0 + m as f64 * dt));
                }
                *slot += z.re;
                z *= rot;
            }
        }
        for v in &mut out {
            *v /= PI;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    /// Largest Nyström node spacing in the `u = x + y` variable.
    pub nystrom_step: f64,
    /// Reject systems whose pivot ratio falls below this.
    pub min_pivot_ratio: f64,
    #[serde(default)]
    pub taper: Taper,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            nystrom_step: 0.01,
            min_pivot_ratio: 1e-12,
            taper: Taper::Lanczos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InversionDiagnostics {
    /// Tail estimate of the kernel error from the finite `k_max`.
    pub truncation_bound: f64,
    /// Largest `|A G - b|_inf` over all Nyström solves.
    pub residual_norm: f64,
    /// Largest `|Im F|` over the evaluated kernel values.
    pub imag_residue: f64,
    /// Mean `|v|` on `x < -0.5`, which should be near zero.
    pub left_mean_abs: f64,
    pub peak_abs: f64,
    pub max_nystrom_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedPotential {
    pub xgrid: XGrid,
    pub values: Vec<f64>,
    /// `K(x, x)` at the grid points.
    pub diagonal: Vec<f64>,
    pub diagnostics: InversionDiagnostics,
}

impl ReconstructedPotential {
    pub fn positions(&self) -> Vec<f64> {
        self.xgrid.points()
    }

    /// Linear interpolation on the grid; zero outside it.
    pub fn value_at(&self, x: f64) -> f64 {
        let g = &self.xgrid;
        if x < g.lo || x > g.hi {
            return 0.0;
        }
        let pos = (x - g.lo) / g.step();
        let i = (pos.floor() as usize).min(g.count - 2);
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// The reconstruction restricted to `x >= 0`, as a grid-sampled potential.
    pub fn to_potential(&self) -> Result<PotentialSpec> {
        let hi = self.xgrid.hi;
        if hi <= 0.0 || self.values.iter().all(|v| *v == 0.0) {
            return Ok(PotentialSpec::zero());
        }
        let cells = (hi / self.xgrid.step()).round().max(1.0) as usize;
        let values = (0..=cells)
            .map(|i| self.value_at(hi * i as f64 / cells as f64))
            .collect();
        PotentialSpec::grid_sampled(hi, values).validate()
    }
}

/// Solves for `K(x, x)` at one `x > 0`; returns `(K(x, x), residual, nodes)`.
fn diagonal_at(
    kernel: &MarchenkoKernel,
    x: f64,
    opts: &InversionOptions,
) -> Result<(f64, f64, usize)> {
    let m = ((2.0 * x / opts.nystrom_step).ceil() as usize).max(2);
    let du = 2.0 * x / m as f64;
    let f = kernel.evaluate_symmetric(du, m)?;
    let n = m + 1;
    let w = quad::trapezoid_weights(n, du);

    let a = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) + w[j] * f[i + j]);
    let b = DVector::from_fn(n, |i, _| -f[i + m]);
    let lu = a.clone().lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    let (dmin, dmax) = (diag.min(), diag.max());
    if !(dmin.is_finite() && dmax > 0.0) || dmin / dmax < opts.min_pivot_ratio {
        return Err(Error::IllConditioned {
            x,
            reason: format!(
                "pivot ratio {:.3e} below {:.1e}",
                dmin / dmax,
                opts.min_pivot_ratio
            ),
        });
    }
    let g = lu.solve(&b).ok_or_else(|| Error::IllConditioned {
        x,
        reason: "singular Nystrom matrix".into(),
    })?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned {
            x,
            reason: "non-finite solution".into(),
        });
    }
    let residual = (&a * &g - &b).amax();
    Ok((g[m], residual, n))
}

/// Fourth-order derivative on a uniform grid, one-sided at the two ends.
fn differentiate(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least five samples");
    let c = 1.0 / (12.0 * h);
    (0..n)
        .map(|i| {
            let d = if i >= 2 && i + 2 < n {
                -f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]
            } else if i == 0 {
                -25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]
            } else if i == 1 {
                -3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]
            } else if i == n - 2 {
                3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]
            } else {
                25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
                    + 3.0 * f[n - 5]
            };
            d * c
        })
        .collect()
}

pub fn marchenko_kernel(table: &ReflectionTable, t: f64) -> Result<f64> {
    MarchenkoKernel::new(table).evaluate(t)
}

pub fn reconstruct_potential(
    table: &ReflectionTable,
    xgrid: &XGrid,
    opts: &InversionOptions,
) -> Result<ReconstructedPotential> {
    if !table.bound_state_free {
        return Err(Error::InvalidConfig(
            "inversion requires a reflection table from a potential without bound states".into(),
        ));
    }
    if !(opts.nystrom_step.is_finite() && opts.nystrom_step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "Nystrom step must be positive, got {}",
            opts.nystrom_step
        )));
    }
    let kernel = MarchenkoKernel::with_taper(table, opts.taper);
    let needed = 2.0 * xgrid.hi.abs().max(xgrid.lo.abs());
    kernel.check_range(needed + opts.nystrom_step)?;

    let xs = xgrid.points();
    let solved: Vec<(f64, f64, usize)> = xs
        .par_iter()
        .map(|&x| {
            if x > 0.0 {
                diagonal_at(&kernel, x, opts)
            } else {
                Ok((-kernel.evaluate(2.0 * x)?, 0.0, 1))
            }
        })
        .collect::<Result<_>>()?;

    let diagonal: Vec<f64> = solved.iter().map(|s| s.0).collect();
    let values: Vec<f64> = differentiate(&diagonal, xgrid.step())
        .into_iter()
        .map(|d| 2.0 * d)
        .collect();

    let probes = [0.0, 0.5 * needed, needed];
    let imag_residue = probes
        .iter()
        .map(|&t| kernel.evaluate_complex(t).map(|c| c.im.abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let left: Vec<f64> = xs
        .iter()
        .zip(&values)
        .filter(|(x, _)| **x < -0.5)
        .map(|(_, v)| v.abs())
        .collect();
    let diagnostics = InversionDiagnostics {
        truncation_bound: kernel.tail_bound(),
        residual_norm: solved.iter().map(|s| s.1).fold(0.0, f64::max),
        imag_residue,
        left_mean_abs: if left.is_empty() {
            0.0
        } else {
            left.iter().sum::<f64>() / left.len() as f64
        },
        peak_abs: values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        max_nystrom_nodes: solved.iter().map(|s| s.2).max().unwrap_or(0),
    };
    Ok(ReconstructedPotential {
        xgrid: *xgrid,
        values,
        diagonal,
        diagnostics,
    })
}

/// Relative L1 error `∫|v - v̂| / max(∫|v|, floor)` over the reconstruction grid.
pub fn roundtrip_error(v: &PotentialSpec, vhat: &ReconstructedPotential) -> f64 {
    const FLOOR: f64 = 1e-12;
    let pts = vhat.positions();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for w in pts.windows(2) {
        diff += quad::gauss_legendre(|x| (v.evaluate(x) - vhat.value_at(x)).abs(), w[0], w[1], 4);
        norm += quad::gauss_legendre(|x| v.evaluate(x).abs(), w[0], w[1], 4);
    }
    diff / norm.max(FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_table_gives_zero_kernel_and_potential() {
        let table = ReflectionTable::zero(KGrid::new(0.05, 20.0, 400).unwrap()).unwrap();
        assert_eq!(marchenko_kernel(&table, 1.3).unwrap(), 0.0);
        let xg = XGrid::with_step(-1.0, 2.0, 0.05).unwrap();
        let rec = reconstruct_potential(&table, &xg, &InversionOptions::default()).unwrap();
        assert!(rec.values.iter().all(|v| *v == 0.0));
        assert_eq!(roundtrip_error(&PotentialSpec::zero(), &rec), 0.0);
    }

    #[test]
    fn kernel_of_a_single_mode_matches_closed_form() {
        // s21 = c (constant, real) on [k0, k1]: F(t) = (c/π) ∫ cos(kt) dk plus the central panel.
        let grid = KGrid::new(0.1, 10.0, 2001).unwrap();
        let c = 0.2;
        let table =
            ReflectionTable::new(grid, vec![Complex64::new(c, 0.0); grid.count], true).unwrap();
        let t: f64 = 0.7;
        let integral = ((10.0 * t).sin() - (0.1 * t).sin()) / t;
        let panel = 0.1 * (0.1 * t).cos();
        let expected = c / PI * (integral + panel);
        let got = marchenko_kernel(&table, t).unwrap();
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }

    #[test]
    fn symmetric_evaluation_matches_direct_sum() {
        let grid = KGrid::new(0.05, 30.0, 1500).unwrap();
        let values = grid
            .points()
            .iter()
            .map(|k| Complex64::from_polar(0.5 / (1.0 + k * k), 2.0 * k))
            .collect();
        let table = ReflectionTable::new(grid, values, true).unwrap();
        let kernel = MarchenkoKernel::new(&table);
        let fast = kernel.evaluate_symmetric(0.013, 300).unwrap();
        for m in [0usize, 17, 300, 450, 600] {
            let t = (m as f64 - 300.0) * 0.013;
            let direct = kernel.evaluate_complex(t).unwrap();
            assert!((fast[m] - direct.re).abs() < 1e-12);
            assert!(direct.im.abs() < 1e-12);
        }
    }

    #[test]
    fn nyquist_limit_is_enforced() {
        let grid = KGrid::new(0.1, 10.0, 100).unwrap();
        let table = ReflectionTable::zero(grid).unwrap();
        let limit = PI / grid.step();
        assert!(matches!(
            marchenko_kernel(&table, limit * 1.01),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn table_validation() {
        let grid = KGrid::new(0.1, 1.0, 3).unwrap();
        assert!(ReflectionTable::new(grid, vec![Complex64::new(1.0, 0.0); 3], true).is_err());
        assert!(ReflectionTable::new(grid, vec![Complex64::new(0.1, 0.0); 2], true).is_err());
        let table = ReflectionTable::zero(grid).unwrap();
        let bound = ReflectionTable {
            bound_state_free: false,
            ..table
        };
        let xg = XGrid::new(-1.0, 1.0, 11).unwrap();
        assert!(reconstruct_potential(&bound, &xg, &InversionOptions::default()).is_err());
    }

    #[test]
    fn fourth_order_differences_are_exact_on_quartics() {
        let h = 0.1;
        let f: Vec<f64> = (0..12).map(|i| (i as f64 * h).powi(4)).collect();
        let d = differentiate(&f, h);
        for (i, di) in d.iter().enumerate() {
            let x = i as f64 * h;
            assert!((di - 4.0 * x.powi(3)).abs() < 1e-10, "i={i}: {di}");
        }
    }

    #[test]
    fn roundtrip_error_of_identical_profile_is_zero() {
        let v = PotentialSpec::grid_sampled(2.0, vec![0.0, 1.0, 0.5, 0.0, 0.0]);
        let xg = XGrid::new(0.0, 2.0, 5).unwrap();
        let vhat = ReconstructedPotential {
            xgrid: xg,
            values: vec![0.0, 1.0, 0.5, 0.0, 0.0],
            diagonal: vec![0.0; 5],
            diagnostics: InversionDiagnostics::default(),
        };
        assert!(roundtrip_error(&v, &vhat) < 1e-14);
    }
}
