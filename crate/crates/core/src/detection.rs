//! MRRC, exhaustive ML and zero-forcing receivers under perfect CSI.

use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::modulation::{Constellation, SmMapper};
use crate::Complex;

/// Default cap on `columns × order` for exhaustive ML search.
pub const DEFAULT_ML_BUDGET: usize = 1 << 20;

/// Hard decision for one channel use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub antenna_index: usize,
    pub symbol_label: usize,
    pub symbol: Complex,
    /// `|g_l̂|` for MRRC, the winning metric for ML.
    pub peak: f64,
    /// Second-best `|g_l|` for MRRC, second-best metric for ML.
    pub runner_up: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub detection: Detection,
    pub bits: Vec<u8>,
}

/// Nearest constellation point; ties resolve to the lowest bit label.
pub fn slice(v: Complex, constellation: &Constellation) -> Complex {
    constellation.slice(v)
}

/// Column-major conjugated channel and column energies shared by the receivers.
#[derive(Debug, Clone)]
struct MatchedFilter {
    dim: usize,
    conj: Vec<Complex>,
    energy: Vec<f64>,
}

impl MatchedFilter {
    fn new(h: &ChannelMatrix) -> Self {
        let e = h.entries();
        let conj: Vec<Complex> = e.as_slice().iter().map(|z| z.conj()).collect();
        Self {
            dim: e.nrows(),
            energy: h.column_norms_sqr(),
            conj,
        }
    }

    fn check(&self, y: &[Complex]) -> Result<()> {
        if y.len() != self.dim {
            return Err(Error::invalid(format!(
                "received vector has length {}, channel has {} rows",
                y.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `g = Hᴴy` into `out`.
    #[inline]
    fn apply(&self, y: &[Complex], out: &mut [Complex]) {
        for (g, col) in out.iter_mut().zip(self.conj.chunks_exact(self.dim)) {
            let mut acc = Complex::new(0.0, 0.0);
            for (a, b) in col.iter().zip(y) {
                acc += a * b;
            }
            *g = acc;
        }
    }
}

/// Reusable MRRC receiver for one channel realization.
#[derive(Debug, Clone)]
pub struct MrrcDetector {
    filter: MatchedFilter,
    constellation: Constellation,
    g: Vec<Complex>,
}

impl MrrcDetector {
    pub fn new(h: &ChannelMatrix, constellation: Constellation) -> Self {
        let filter = MatchedFilter::new(h);
        let n = filter.energy.len();
        Self {
            filter,
            constellation,
            g: vec![Complex::new(0.0, 0.0); n],
        }
    }

    /// `l̂ = argmax |g_l|` (lowest index on ties), `x̂ = slice(g_l̂ / ‖h_l̂‖²)`.
    pub fn detect(&mut self, y: &[Complex]) -> Result<Detection> {
        self.filter.check(y)?;
        self.filter.apply(y, &mut self.g);
        let (mut best, mut peak, mut runner_up) = (0usize, -1.0f64, 0.0f64);
        for (l, g) in self.g.iter().enumerate() {
            let m = g.norm_sqr();
            if m > peak {
                runner_up = peak.max(0.0);
                peak = m;
                best = l;
            } else if m > runner_up {
                runner_up = m;
            }
        }
        let energy = self.filter.energy[best];
        if energy <= 0.0 {
            return Err(Error::Numerical("degenerate channel column".into()));
        }
        let symbol_label = self.constellation.slice_label(self.g[best] / energy);
        Ok(Detection {
            antenna_index: best,
            symbol_label,
            symbol: self.constellation.point(symbol_label),
            peak: peak.sqrt(),
            runner_up: runner_up.sqrt(),
        })
    }

    /// Matched-filter output from the last call to [`Self::detect`].
    pub fn matched_output(&self) -> &[Complex] {
        &self.g
    }
}

/// Reusable exhaustive ML receiver minimizing `‖y − h_l x‖²`.
#[derive(Debug, Clone)]
pub struct MlDetector {
    filter: MatchedFilter,
    constellation: Constellation,
    g: Vec<Complex>,
}

impl MlDetector {
    pub fn new(h: &ChannelMatrix, constellation: Constellation, budget: usize) -> Result<Self> {
        let hypotheses = h.dim().saturating_mul(constellation.order());
        if hypotheses > budget {
            return Err(Error::invalid(format!(
                "ML search over {hypotheses} hypotheses exceeds the budget of {budget}"
            )));
        }
        let filter = MatchedFilter::new(h);
        let n = filter.energy.len();
        Ok(Self {
            filter,
            constellation,
            g: vec![Complex::new(0.0, 0.0); n],
        })
    }

    /// Ties resolve to the lowest antenna index, then the lowest label.
    pub fn detect(&mut self, y: &[Complex]) -> Result<Detection> {
        self.filter.check(y)?;
        self.filter.apply(y, &mut self.g);
        let y_energy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let points = self.constellation.points();
        let (mut best, mut best_metric, mut second) = ((0usize, 0usize), f64::INFINITY, f64::INFINITY);
        for (l, (&g, &e)) in self.g.iter().zip(&self.filter.energy).enumerate() {
            for (label, x) in points.iter().enumerate() {
                // ‖y − h x‖² − ‖y‖²
                let metric = x.norm_sqr() * e - 2.0 * (x.conj() * g).re;
                if metric < best_metric {
                    second = best_metric;
                    best_metric = metric;
                    best = (l, label);
                } else if metric < second {
                    second = metric;
                }
            }
        }
        Ok(Detection {
            antenna_index: best.0,
            symbol_label: best.1,
            symbol: points[best.1],
            peak: (best_metric + y_energy).max(0.0),
            runner_up: (second + y_energy).max(0.0),
        })
    }
}

fn with_bits(d: Detection, mapper: &SmMapper) -> Result<DetectionResult> {
    Ok(DetectionResult {
        bits: mapper.decode_bits(d.antenna_index, d.symbol_label)?,
        detection: d,
    })
}

fn check_mapper(h: &ChannelMatrix, mapper: &SmMapper) -> Result<()> {
    if h.dim() != mapper.num_antennas() {
        return Err(Error::invalid(format!(
            "channel has {} columns but the mapper addresses {} antennas",
            h.dim(),
            mapper.num_antennas()
        )));
    }
    Ok(())
}

pub fn mrrc_detect(h: &ChannelMatrix, y: &[Complex], mapper: &SmMapper) -> Result<DetectionResult> {
    check_mapper(h, mapper)?;
    let d = MrrcDetector::new(h, mapper.constellation().clone()).detect(y)?;
    with_bits(d, mapper)
}

pub fn ml_detect(h: &ChannelMatrix, y: &[Complex], mapper: &SmMapper) -> Result<DetectionResult> {
    check_mapper(h, mapper)?;
    let d = MlDetector::new(h, mapper.constellation().clone(), DEFAULT_ML_BUDGET)?.detect(y)?;
    with_bits(d, mapper)
}

/// Zero-forcing receiver for spatial multiplexing: `x̂ = slice(H⁺y)` per stream.
#[derive(Debug, Clone)]
pub struct ZfDetector {
    pinv: DMatrix<Complex>,
    constellation: Constellation,
    scale: f64,
}

impl ZfDetector {
    /// `amplitude` is the per-stream transmit amplitude the receiver divides out.
    pub fn new(h: &ChannelMatrix, constellation: Constellation, amplitude: f64) -> Result<Self> {
        if amplitude <= 0.0 {
            return Err(Error::invalid("stream amplitude must be positive"));
        }
        let sv = h.entries().clone().singular_values();
        let tol = sv.max() * f64::EPSILON * h.dim() as f64;
        if sv.min() <= tol {
            return Err(Error::Numerical("channel matrix is singular".into()));
        }
        let pinv = h
            .entries()
            .clone()
            .pseudo_inverse(tol)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(Self {
            pinv,
            constellation,
            scale: 1.0 / amplitude,
        })
    }

    pub fn detect_into(&self, y: &[Complex], labels: &mut [usize]) -> Result<()> {
        if y.len() != self.pinv.ncols() || labels.len() != self.pinv.nrows() {
            return Err(Error::invalid("dimension mismatch in zero-forcing detection"));
        }
        let x = &self.pinv * DVector::from_column_slice(y);
        for (out, v) in labels.iter_mut().zip(x.iter()) {
            *out = self.constellation.slice_label(v * self.scale);
        }
        Ok(())
    }
}
