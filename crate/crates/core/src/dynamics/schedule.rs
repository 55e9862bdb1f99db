use crate::geometry::gauss_legendre;
use crate::{Error, Result};
use nalgebra::DVector;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

/// Constant controls on `[start, end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub values: Vec<f64>,
}

/// `amplitude · sin(2π·frequency·t + phase)` on control `field`.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub field: usize,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

/// Time-dependent controls `λ₁..λ_n` on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlSchedule {
    /// Piecewise-constant controls; zero outside the listed segments.
    Piecewise { dim: usize, duration: f64, segments: Vec<Segment> },
    /// Sums of sinusoids.
    Harmonic { dim: usize, duration: f64, terms: Vec<Harmonic> },
    /// Piecewise-constant controls (extended by zero) convolved with the
    /// kernel `(35/32)(1 − u²)³` scaled to half-width `width`.
    Mollified { dim: usize, duration: f64, segments: Vec<Segment>, width: f64 },
}

/// Primitive of the mollifier on `[-1, 1]`.
fn kernel_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let u2 = u * u;
        0.5 + 35.0 / 32.0 * u * (1.0 - u2 + u2 * u2 * (0.6 - u2 / 7.0))
    }
}

/// `∫ K(u) cos(ωu) du` for the mollifier.
fn kernel_cosine_transform(omega: f64) -> f64 {
    let (x, w) = gauss_legendre(32);
    x.iter()
        .zip(&w)
        .map(|(u, w)| w * 35.0 / 32.0 * (1.0 - u * u).powi(3) * (omega * u).cos())
        .sum()
}

impl ControlSchedule {
    pub fn zero(dim: usize, duration: f64) -> Self {
        ControlSchedule::Piecewise { dim, duration, segments: vec![] }
    }

    /// Piecewise schedule from consecutive segments.
    pub fn piecewise(dim: usize, segments: Vec<Segment>) -> Result<Self> {
        let mut t = 0.0;
        for s in &segments {
            if s.values.len() != dim {
                return Err(Error::InvalidInput(format!("segment has {} values, expected {dim}", s.values.len())));
            }
            if !(s.end > s.start) || s.start < t - 1e-12 {
                return Err(Error::InvalidInput(format!("segment [{}, {}] is out of order", s.start, s.end)));
            }
            t = s.end;
        }
        Ok(ControlSchedule::Piecewise { dim, duration: t, segments })
    }

    pub fn harmonic(dim: usize, duration: f64, terms: Vec<Harmonic>) -> Result<Self> {
        if let Some(h) = terms.iter().find(|h| h.field >= dim) {
            return Err(Error::InvalidInput(format!("harmonic term drives field {} of {dim}", h.field + 1)));
        }
        Ok(ControlSchedule::Harmonic { dim, duration, terms })
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSchedule::Piecewise { dim, .. } | ControlSchedule::Harmonic { dim, .. } | ControlSchedule::Mollified { dim, .. } => *dim,
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            ControlSchedule::Piecewise { duration, .. }
            | ControlSchedule::Harmonic { duration, .. }
            | ControlSchedule::Mollified { duration, .. } => *duration,
        }
    }

    pub fn segments(&self) -> Option<&[Segment]> {
        match self {
            ControlSchedule::Piecewise { segments, .. } => Some(segments),
            _ => None,
        }
    }

    fn segment_at(segments: &[Segment], t: f64) -> Option<&Segment> {
        let idx = segments.partition_point(|s| s.end <= t);
        segments.get(idx).filter(|s| s.start <= t)
    }

    /// Controls at `t`; piecewise schedules are right-continuous except at `T`.
    pub fn value(&self, t: f64) -> DVector<f64> {
        match self {
            ControlSchedule::Piecewise { dim, duration, segments } => {
                let seg = Self::segment_at(segments, t)
                    .or_else(|| if t >= *duration { segments.last().filter(|s| s.end >= t) } else { None });
                seg.map(|s| DVector::from_column_slice(&s.values)).unwrap_or_else(|| DVector::zeros(*dim))
            }
            ControlSchedule::Harmonic { dim, terms, .. } => {
                let mut v = DVector::zeros(*dim);
                for h in terms {
                    v[h.field] += h.amplitude * (2.0 * PI * h.frequency * t + h.phase).sin();
                }
                v
            }
            ControlSchedule::Mollified { dim, segments, width, .. } => {
                let mut v = DVector::zeros(*dim);
                let first = segments.partition_point(|s| s.end <= t - width);
                for s in &segments[first..] {
                    if s.start >= t + width {
                        break;
                    }
                    let weight = kernel_cdf((t - s.start) / width) - kernel_cdf((t - s.end) / width);
                    for (vi, si) in v.iter_mut().zip(&s.values) {
                        *vi += weight * si;
                    }
                }
                v
            }
        }
    }

    /// Controls at `t` as seen from inside the interval `[lo, hi]`, which
    /// must not contain a breakpoint in its interior.
    pub fn value_within(&self, t: f64, lo: f64, hi: f64) -> DVector<f64> {
        match self {
            ControlSchedule::Piecewise { dim, segments, .. } => Self::segment_at(segments, 0.5 * (lo + hi))
                .map(|s| DVector::from_column_slice(&s.values))
                .unwrap_or_else(|| DVector::zeros(*dim)),
            _ => self.value(t),
        }
    }

    /// Sorted times at which the controls may jump, including `0` and `T`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0, self.duration()];
        if let ControlSchedule::Piecewise { segments, duration, .. } = self {
            for s in segments {
                for t in [s.start, s.end] {
                    if t > 0.0 && t < *duration {
                        b.push(t);
                    }
                }
            }
        }
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, c| (*a - *c).abs() <= 1e-14 * (1.0 + c.abs()));
        b
    }

    /// `t ↦ −λ(T − t)`: drives the system back along its own path.
    pub fn reversed(&self) -> Self {
        let big_t = self.duration();
        match self {
            ControlSchedule::Piecewise { dim, duration, segments } => ControlSchedule::Piecewise {
                dim: *dim,
                duration: *duration,
                segments: segments
                    .iter()
                    .rev()
                    .map(|s| Segment { start: big_t - s.end, end: big_t - s.start, values: s.values.iter().map(|v| -v).collect() })
                    .collect(),
            },
            ControlSchedule::Harmonic { dim, duration, terms } => ControlSchedule::Harmonic {
                dim: *dim,
                duration: *duration,
                terms: terms
                    .iter()
                    .map(|h| Harmonic { phase: -2.0 * PI * h.frequency * big_t - h.phase, ..h.clone() })
                    .collect(),
            },
            ControlSchedule::Mollified { dim, duration, segments, width } => ControlSchedule::Mollified {
                dim: *dim,
                duration: *duration,
                width: *width,
                segments: segments
                    .iter()
                    .rev()
                    .map(|s| Segment { start: big_t - s.end, end: big_t - s.start, values: s.values.iter().map(|v| -v).collect() })
                    .collect(),
            },
        }
    }

    /// Total variation of a piecewise schedule (jumps at every breakpoint, including
    /// the jumps to and from zero at the ends), summed over controls.
    pub fn total_variation(&self) -> Option<f64> {
        let segments = self.segments()?;
        let dim = self.dim();
        let mut prev = vec![0.0; dim];
        let mut prev_end = f64::NEG_INFINITY;
        let mut tv = 0.0;
        for s in segments {
            if s.start > prev_end + 1e-14 {
                tv += prev.iter().map(|v: &f64| v.abs()).sum::<f64>();
                prev = vec![0.0; dim];
            }
            tv += s.values.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>();
            prev = s.values.clone();
            prev_end = s.end;
        }
        Some(tv + prev.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Schedule CSV `t_start,t_end,lambda1..lambdan` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let segs = self.segments().ok_or_else(|| std::io::Error::other("only piecewise schedules have a segment table"))?;
        let mut header = String::from("t_start,t_end");
        for i in 1..=self.dim() {
            header.push_str(&format!(",lambda{i}"));
        }
        writeln!(w, "{header}")?;
        for s in segs {
            let mut line = format!("{:.16e},{:.16e}", s.start, s.end);
            for v in &s.values {
                line.push_str(&format!(",{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a schedule CSV written by [`ControlSchedule::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty schedule file".into()))?
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 2 || cols[0] != "t_start" || cols[1] != "t_end" {
            return Err(Error::InvalidInput("schedule header must start with t_start,t_end".into()));
        }
        let dim = cols.len() - 2;
        let mut segments = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.trim().split(',').map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| Error::InvalidInput(format!("schedule row {}: {e}", k + 2)))?;
            if vals.len() != dim + 2 {
                return Err(Error::InvalidInput(format!("schedule row {} has {} columns", k + 2, vals.len())));
            }
            segments.push(Segment { start: vals[0], end: vals[1], values: vals[2..].to_vec() });
        }
        Self::piecewise(dim, segments)
    }
}

/// Mollifies `schedule` with a smooth compactly supported kernel of
/// half-width `width`. Piecewise schedules are extended by zero outside
/// `[0, T]`; harmonic schedules are convolved exactly.
pub fn smooth_controls(schedule: &ControlSchedule, width: f64) -> Result<ControlSchedule> {
    if !(width > 0.0) {
        return Err(Error::InvalidInput(format!("mollifier width must be positive, got {width}")));
    }
    match schedule {
        ControlSchedule::Piecewise { dim, duration, segments } => Ok(ControlSchedule::Mollified {
            dim: *dim,
            duration: *duration,
            segments: segments.clone(),
            width,
        }),
        ControlSchedule::Harmonic { dim, duration, terms } => Ok(ControlSchedule::Harmonic {
            dim: *dim,
            duration: *duration,
            terms: terms
                .iter()
                .map(|h| Harmonic {
                    amplitude: h.amplitude * kernel_cosine_transform(2.0 * PI * h.frequency * width),
                    ..h.clone()
                })
                .collect(),
        }),
        ControlSchedule::Mollified { .. } => Err(Error::InvalidInput("schedule is already mollified".into())),
    }
}
