//! Adaptive Dormand-Prince 5(4) integrator for small complex first-order systems.
//!
//! Integration may run in either direction; the forward solver integrates
//! from the right edge of the support down to `x = 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// 5th-order weights; also row 7 of the tableau (FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State<const N: usize> = [Complex64; N];

fn axpy<const N: usize>(y: &State<N>, terms: &[(f64, &State<N>)], h: f64) -> State<N> {
    let mut out = *y;
    for (coef, k) in terms {
        for i in 0..N {
            out[i] += k[i] * (h * coef);
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` and returns `y(x1)`.
///
/// `h0` is a hint for the first step size magnitude.
pub fn integrate<const N: usize, F>(
    f: F,
    x0: f64,
    y0: State<N>,
    x1: f64,
    h0: f64,
    opts: &StepperOptions,
) -> Result<(State<N>, StepStats)>
where
    F: Fn(f64, &State<N>) -> State<N>,
{
    let mut stats = StepStats::default();
    let span = x1 - x0;
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut h = h0
        .abs()
        .min(span.abs())
        .max(f64::EPSILON * span.abs().max(1.0))
        * dir;
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);

    while (x1 - x) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Integration(format!(
                "step budget of {} exhausted at x = {x}",
                opts.max_steps
            )));
        }
        let last = (x + h - x1) * dir >= 0.0;
        if last {
            h = x1 - x;
        }

        let k2 = f(x + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(x + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(
            x + C4 * h,
            &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h),
        );
        let k5 = f(
            x + C5 * h,
            &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
        );
        let k6 = f(
            x + h,
            &axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            ),
        );
        let y_new = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = f(x + h, &y_new);

        let mut err = 0.0f64;
        for i in 0..N {
            let e =
                (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Integration(format!(
                "non-finite error estimate at x = {x}"
            )));
        }

        if err <= 1.0 {
            stats.accepted += 1;
            x = if last { x1 } else { x + h };
            y = y_new;
            k1 = k7;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::Integration(format!(
                "step size underflow at x = {x}"
            )));
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        // g'' = -k^2 g with g(0) = 1, g'(0) = ik  =>  g = e^{ikx}.
        let k = 3.0;
        let f = |_x: f64, y: &[Complex64; 2]| [y[1], -k * k * y[0]];
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, k)];
        let opts = StepperOptions::default();
        let (y, stats) = integrate(f, 0.0, y0, 5.0, 0.01, &opts).unwrap();
        let exact = Complex64::new(0.0, 5.0 * k).exp();
        assert!((y[0] - exact).norm() < 1e-8, "{}", (y[0] - exact).norm());
        assert!(stats.accepted > 10);
    }

    #[test]
    fn integrates_backwards() {
        let f = |_x: f64, y: &[Complex64; 1]| [y[0]];
        let (y, _) = integrate(
            f,
            1.0,
            [Complex64::new(1.0, 0.0)],
            0.0,
            0.1,
            &StepperOptions::default(),
        )
        .unwrap();
        assert!((y[0].re - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn step_budget_is_enforced() {
        let f = |_x: f64, y: &[Complex64; 2]| [y[1], -1e6 * y[0]];
        let opts = StepperOptions {
            max_steps: 10,
            ..Default::default()
        };
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(matches!(
            integrate(f, 0.0, y0, 10.0, 0.1, &opts),
            Err(Error::Integration(_))
        ));
    }
}
