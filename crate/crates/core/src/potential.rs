//! Real potentials supported on a bounded subset of the half-line `x >= 0`.
//!
//! Every potential is a base profile living on `[0, L0]` plus a nonnegative
//! shift, so `v(x) = base(x - shift)` and the support ends at `shift + L0`.
//! Presets and piecewise-constant profiles additionally expose their constant
//! pieces, which lets the forward solver use exact propagators for them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Level below which the tails of a decaying preset are discarded.
pub const TRUNCATION_LEVEL: f64 = 1e-12;

/// A constant piece `value` on `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, f64)", into = "(f64, f64, f64)")]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub value: f64,
}

impl Segment {
    pub fn new(start: f64, end: f64, value: f64) -> Self {
        Self { start, end, value }
    }

    fn contains(&self, x: f64) -> bool {
        self.start <= x && x < self.end
    }
}

impl From<(f64, f64, f64)> for Segment {
    fn from((start, end, value): (f64, f64, f64)) -> Self {
        Self { start, end, value }
    }
}

impl From<Segment> for (f64, f64, f64) {
    fn from(s: Segment) -> Self {
        (s.start, s.end, s.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum PotentialKind {
    Zero,
    SquareBarrier {
        height: f64,
        width: f64,
    },
    /// Two barriers of equal `height` and `width` separated by `gap`.
    DoubleBarrier {
        height: f64,
        width: f64,
        gap: f64,
    },
    /// `amplitude * exp(-(x - center)^2 / (2 width^2))` cut to `[0, support_end]`.
    TruncatedGaussian {
        amplitude: f64,
        center: f64,
        width: f64,
        support_end: f64,
    },
    PiecewiseConstant {
        segments: Vec<Segment>,
    },
    /// Node values on a uniform grid over `[0, support_end]`, linearly interpolated.
    GridSampled {
        support_end: f64,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Self {
        Self { kind, shift: 0.0 }
    }

    pub fn zero() -> Self {
        Self::new(PotentialKind::Zero)
    }

    pub fn square_barrier(height: f64, width: f64) -> Self {
        Self::new(PotentialKind::SquareBarrier { height, width })
    }

    pub fn double_barrier(height: f64, width: f64, gap: f64) -> Self {
        Self::new(PotentialKind::DoubleBarrier { height, width, gap })
    }

    pub fn truncated_gaussian(amplitude: f64, center: f64, width: f64, support_end: f64) -> Self {
        Self::new(PotentialKind::TruncatedGaussian {
            amplitude,
            center,
            width,
            support_end,
        })
    }

    /// Gaussian whose support is cut where the profile drops below [`TRUNCATION_LEVEL`].
    pub fn gaussian(amplitude: f64, center: f64, width: f64) -> Self {
        let ratio = amplitude.abs() / TRUNCATION_LEVEL;
        let reach = if ratio > 1.0 {
            width * (2.0 * ratio.ln()).sqrt()
        } else {
            0.0
        };
        Self::truncated_gaussian(amplitude, center, width, (center + reach).max(0.0))
    }

    pub fn piecewise_constant(segments: Vec<Segment>) -> Self {
        Self::new(PotentialKind::PiecewiseConstant { segments })
    }

    pub fn grid_sampled(support_end: f64, values: Vec<f64>) -> Self {
        Self::new(PotentialKind::GridSampled {
            support_end,
            values,
        })
    }

    /// Checks the standing assumptions: real finite values, support in `x >= 0`.
    pub fn validate(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidPotential(msg));
        if !self.shift.is_finite() || self.shift < 0.0 {
            return bad(format!("support violates x >= 0 (shift {})", self.shift));
        }
        match &self.kind {
            PotentialKind::Zero => {}
            PotentialKind::SquareBarrier { height, width } => {
                finite("height", *height)?;
                nonnegative("width", *width)?;
            }
            PotentialKind::DoubleBarrier { height, width, gap } => {
                finite("height", *height)?;
                nonnegative("width", *width)?;
                nonnegative("gap", *gap)?;
            }
            PotentialKind::TruncatedGaussian {
                amplitude,
                center,
                width,
                support_end,
            } => {
                finite("amplitude", *amplitude)?;
                finite("center", *center)?;
                nonnegative("support_end", *support_end)?;
                if !(width.is_finite() && *width > 0.0) {
                    return bad(format!("gaussian width must be positive, got {width}"));
                }
            }
            PotentialKind::PiecewiseConstant { segments } => {
                let mut sorted = segments.clone();
                sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
                for s in &sorted {
                    finite("segment start", s.start)?;
                    finite("segment end", s.end)?;
                    finite("segment value", s.value)?;
                    if s.start < 0.0 {
                        return bad(format!(
                            "support violates x >= 0 (segment starts at {})",
                            s.start
                        ));
                    }
                    if s.end < s.start {
                        return bad(format!("segment [{}, {}) is reversed", s.start, s.end));
                    }
                }
                if let Some(w) = sorted.windows(2).find(|w| w[1].start < w[0].end) {
                    return bad(format!(
                        "segments [{}, {}) and [{}, {}) overlap",
                        w[0].start, w[0].end, w[1].start, w[1].end
                    ));
                }
            }
            PotentialKind::GridSampled {
                support_end,
                values,
            } => {
                if !(support_end.is_finite() && *support_end > 0.0) {
                    return bad(format!(
                        "grid support_end must be positive, got {support_end}"
                    ));
                }
                if values.len() < 2 {
                    return bad("grid potential needs at least two nodes".into());
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return bad(format!("non-finite grid value {v}"));
                }
            }
        }
        Ok(self)
    }

    /// Length of the base profile's support, before shifting.
    fn base_length(&self) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareBarrier { width, .. } => *width,
            PotentialKind::DoubleBarrier { width, gap, .. } => 2.0 * width + gap,
            PotentialKind::TruncatedGaussian { support_end, .. } => *support_end,
            PotentialKind::PiecewiseConstant { segments } => {
                segments.iter().map(|s| s.end).fold(0.0, f64::max)
            }
            PotentialKind::GridSampled { support_end, .. } => *support_end,
        }
    }

    /// `L` such that `v(x) = 0` for every `x > L`.
    pub fn support_end(&self) -> f64 {
        let base = self.base_length();
        if base > 0.0 {
            self.shift + base
        } else {
            0.0
        }
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        if x < 0.0 || x < self.shift {
            return 0.0;
        }
        let u = x - self.shift;
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareBarrier { height, width } => {
                if u < *width {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::DoubleBarrier { height, width, gap } => {
                if u < *width || (u >= width + gap && u < 2.0 * width + gap) {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::TruncatedGaussian {
                amplitude,
                center,
                width,
                support_end,
            } => {
                if u <= *support_end {
                    let z = (u - center) / width;
                    amplitude * (-0.5 * z * z).exp()
                } else {
                    0.0
                }
            }
            PotentialKind::PiecewiseConstant { segments } => segments
                .iter()
                .find(|s| s.contains(u))
                .map_or(0.0, |s| s.value),
            PotentialKind::GridSampled {
                support_end,
                values,
            } => {
                if u > *support_end {
                    return 0.0;
                }
                let cells = values.len() - 1;
                let pos = u / support_end * cells as f64;
                let i = (pos.floor() as usize).min(cells - 1);
                let t = pos - i as f64;
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Constant pieces in absolute coordinates, if the profile is piecewise constant.
    pub fn segments(&self) -> Option<Vec<Segment>> {
        let base = match &self.kind {
            PotentialKind::Zero => vec![],
            PotentialKind::SquareBarrier { height, width } => {
                vec![Segment::new(0.0, *width, *height)]
            }
            PotentialKind::DoubleBarrier { height, width, gap } => vec![
                Segment::new(0.0, *width, *height),
                Segment::new(width + gap, 2.0 * width + gap, *height),
            ],
            PotentialKind::PiecewiseConstant { segments } => {
                let mut s = segments.clone();
                s.sort_by(|a, b| a.start.total_cmp(&b.start));
                s
            }
            PotentialKind::TruncatedGaussian { .. } | PotentialKind::GridSampled { .. } => {
                return None
            }
        };
        Some(
            base.into_iter()
                .filter(|s| s.end > s.start)
                .map(|s| Segment::new(s.start + self.shift, s.end + self.shift, s.value))
                .collect(),
        )
    }

    /// Ascending points in `[shift, support_end]` between which the profile is smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let l = self.support_end();
        match &self.kind {
            PotentialKind::GridSampled { values, .. } => {
                let cells = values.len() - 1;
                (0..=cells)
                    .map(|i| self.shift + (l - self.shift) * i as f64 / cells as f64)
                    .collect()
            }
            _ => match self.segments() {
                Some(segs) => {
                    let mut pts: Vec<f64> = segs.iter().flat_map(|s| [s.start, s.end]).collect();
                    pts.push(self.shift);
                    pts.push(l);
                    pts.sort_by(f64::total_cmp);
                    pts.dedup();
                    pts
                }
                None => vec![self.shift, l],
            },
        }
    }

    /// Shifted copy `v_y(x) = v(x - y)`.
    pub fn translate(&self, y: f64) -> Result<Self> {
        if !y.is_finite() || y < 0.0 {
            return Err(Error::InvalidPotential(format!(
                "translation by {y} would move support into x < 0"
            )));
        }
        let mut out = self.clone();
        out.shift += y;
        Ok(out)
    }

    /// `∫ (1 + |x|) |v(x)| dx`.
    pub fn l11_norm(&self) -> f64 {
        if let Some(segs) = self.segments() {
            return segs
                .iter()
                .map(|s| {
                    s.value.abs() * ((s.end - s.start) + 0.5 * (s.end * s.end - s.start * s.start))
                })
                .sum();
        }
        let panels = match &self.kind {
            PotentialKind::GridSampled { .. } => 4,
            _ => 400,
        };
        self.breakpoints()
            .windows(2)
            .map(|w| {
                quad::gauss_legendre(|x| (1.0 + x) * self.evaluate(x).abs(), w[0], w[1], panels)
            })
            .sum()
    }

    /// Largest magnitude discarded when a decaying profile was cut to its support.
    pub fn truncation_bound(&self) -> f64 {
        match &self.kind {
            PotentialKind::TruncatedGaussian {
                amplitude,
                center,
                width,
                support_end,
            } => {
                let g = |u: f64| amplitude.abs() * (-0.5 * ((u - center) / width).powi(2)).exp();
                let left = if *center > 0.0 {
                    g(0.0)
                } else {
                    amplitude.abs()
                };
                let right = if *center < *support_end {
                    g(*support_end)
                } else {
                    amplitude.abs()
                };
                left.max(right)
            }
            _ => 0.0,
        }
    }

    /// Lower bound of `v` over the real line (0 counts, since `v` vanishes outside the support).
    pub fn min_value(&self) -> f64 {
        let m = match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::SquareBarrier { height, .. }
            | PotentialKind::DoubleBarrier { height, .. } => *height,
            PotentialKind::TruncatedGaussian { amplitude, .. } => *amplitude,
            PotentialKind::PiecewiseConstant { segments } => {
                segments.iter().map(|s| s.value).fold(0.0, f64::min)
            }
            PotentialKind::GridSampled { values, .. } => values.iter().copied().fold(0.0, f64::min),
        };
        m.min(0.0)
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        let base = match &self.kind {
            PotentialKind::Zero => "zero".to_string(),
            PotentialKind::SquareBarrier { height, width } => {
                format!("square-barrier({height}, {width})")
            }
            PotentialKind::DoubleBarrier { height, width, gap } => {
                format!("double-barrier({height}, {width}, {gap})")
            }
            PotentialKind::TruncatedGaussian {
                amplitude,
                center,
                width,
                support_end,
            } => format!("truncated-gaussian({amplitude}, {center}, {width}, {support_end})"),
            PotentialKind::PiecewiseConstant { segments } => {
                format!("piecewise-constant({} segments)", segments.len())
            }
            PotentialKind::GridSampled { values, .. } => {
                format!("grid-sampled({} nodes)", values.len())
            }
        };
        if self.shift != 0.0 {
            format!("{base} shifted by {}", self.shift)
        } else {
            base
        }
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidPotential(format!(
            "{name} is not finite ({v})"
        )))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v < 0.0 {
        Err(Error::InvalidPotential(format!(
            "{name} must be >= 0, got {v}"
        )))
    } else {
        Ok(())
    }
}
