//! Reference solutions written independently of the library's solvers.
#![allow(dead_code)]

use num_complex::Complex64;
use phaseless_core::{PotentialSpec, Segment};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn layer_basis(q: Complex64, x: f64) -> [[Complex64; 2]; 2] {
    let (p, m) = ((I * q * x).exp(), (-I * q * x).exp());
    [[p, m], [I * q * p, -I * q * m]]
}

fn inv2(m: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

fn mul(m: [[Complex64; 2]; 2], v: [Complex64; 2]) -> [Complex64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// `(s21, s22)` for layered constant potentials by matching `a e^{iqx} + b e^{-iqx}`
/// across every interface, sweeping from the transmitted side.
pub fn layered(segments: &[Segment], k: f64) -> (Complex64, Complex64) {
    let mut layers: Vec<(f64, f64, f64)> =
        segments.iter().map(|s| (s.start, s.end, s.value)).collect();
    layers.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let q_of = |v: f64| Complex64::new(k * k - v, 0.0).sqrt();

    // Region list from right to left, with the interface to the left of each.
    let mut coeffs = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let mut q_right = Complex64::new(k, 0.0);
    let mut edge = layers.last().map_or(0.0, |l| l.1);
    for &(start, end, v) in layers.iter().rev() {
        if end < edge {
            // Free gap between layers.
            let q0 = Complex64::new(k, 0.0);
            coeffs = mul(
                inv2(layer_basis(q0, edge)),
                mul(layer_basis(q_right, edge), coeffs),
            );
            q_right = q0;
            edge = end;
        }
        let q = q_of(v);
        coeffs = mul(
            inv2(layer_basis(q, edge)),
            mul(layer_basis(q_right, edge), coeffs),
        );
        q_right = q;
        edge = start;
    }
    let q0 = Complex64::new(k, 0.0);
    coeffs = mul(
        inv2(layer_basis(q0, edge)),
        mul(layer_basis(q_right, edge), coeffs),
    );
    let [a, b] = coeffs;
    (b / a, Complex64::new(1.0, 0.0) / a)
}

/// Textbook closed form for a barrier of height `v0` on `[0, width]`.
pub fn square_barrier_closed_form(v0: f64, width: f64, k: f64) -> (Complex64, Complex64) {
    let q = Complex64::new(k * k - v0, 0.0).sqrt();
    let k = Complex64::new(k, 0.0);
    let (s, c) = ((q * width).sin(), (q * width).cos());
    let denom = c - I * (k * k + q * q) / (2.0 * k * q) * s;
    let t = (-I * k * width).exp() / denom;
    let r = I * (q * q - k * k) / (2.0 * k * q) * s / denom;
    (r, t)
}

/// Jost solution `g` (with `g ~ e^{ikx}` right of the support) by classical RK4 with fixed step.
pub struct Rk4Jost {
    pub step: f64,
}

impl Rk4Jost {
    /// `(g(x), g'(x))` for `x` below the support end.
    ///
    /// Steps are aligned with the breakpoints and the potential is sampled
    /// strictly inside each piece, so jumps do not degrade the order.
    pub fn state(&self, v: &PotentialSpec, k: f64, x: f64) -> [Complex64; 2] {
        let end = v.support_end();
        let e = (I * k * end).exp();
        let mut y = [e, I * k * e];
        let mut stops: Vec<f64> = v
            .breakpoints()
            .into_iter()
            .filter(|&b| b > x && b < end)
            .collect();
        stops.extend([x, 0.0_f64.max(x)]);
        stops.sort_by(|a, b| b.total_cmp(a));
        stops.dedup();
        let mut hi = end;
        for lo in stops {
            if lo >= hi {
                continue;
            }
            let eps = 1e-13 * (hi - lo);
            let pot = |t: f64| v.evaluate(t.clamp(lo + eps, hi - eps));
            let rhs = |t: f64, y: [Complex64; 2]| [y[1], y[0] * (pot(t) - k * k)];
            let n = ((hi - lo) / self.step).ceil() as usize;
            let h = -(hi - lo) / n as f64;
            let mut t = hi;
            for _ in 0..n {
                let add = |y: [Complex64; 2], d: [Complex64; 2], s: f64| {
                    [y[0] + d[0] * s, y[1] + d[1] * s]
                };
                let k1 = rhs(t, y);
                let k2 = rhs(t + h / 2.0, add(y, k1, h / 2.0));
                let k3 = rhs(t + h / 2.0, add(y, k2, h / 2.0));
                let k4 = rhs(t + h, add(y, k3, h));
                for j in 0..2 {
                    y[j] += (k1[j] + k2[j] * 2.0 + k3[j] * 2.0 + k4[j]) * (h / 6.0);
                }
                t += h;
            }
            hi = lo;
        }
        y
    }

    pub fn scatter(&self, v: &PotentialSpec, k: f64) -> (Complex64, Complex64) {
        let [g, dg] = self.state(v, k, 0.0);
        let a = (g + dg / (I * k)) / 2.0;
        let b = (g - dg / (I * k)) / 2.0;
        (b / a, Complex64::new(1.0, 0.0) / a)
    }

    /// `|psi+(x)|^2` at `x < 0`, from the Jost solution scaled by the transmission.
    pub fn intensity(&self, v: &PotentialSpec, k: f64, x: f64) -> f64 {
        let [g0, dg0] = self.state(v, k, 0.0);
        let a = (g0 + dg0 / (I * k)) / 2.0;
        let [g, _] = self.state(v, k, x);
        (g / a).norm_sqr()
    }
}

/// A fixed set of potentials covering every constructor.
pub fn presets() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::zero(),
        PotentialSpec::square_barrier(1.0, 1.0),
        PotentialSpec::square_barrier(5.0, 0.5),
        PotentialSpec::double_barrier(3.0, 0.4, 0.6),
        PotentialSpec::gaussian(1.5, 1.5, 0.3),
        PotentialSpec::piecewise_constant(vec![
            Segment {
                start: 0.0,
                end: 0.5,
                value: 2.0,
            },
            Segment {
                start: 0.5,
                end: 1.0,
                value: -0.7,
            },
            Segment {
                start: 1.4,
                end: 2.0,
                value: 1.2,
            },
        ]),
        PotentialSpec::grid_sampled(2.0, vec![0.0, 1.0, -0.5, 2.0, 0.0]),
    ]
}
