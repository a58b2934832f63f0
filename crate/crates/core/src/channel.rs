//! Line-of-sight THz channel synthesis and conditioning analysis.
//!
//! Each SA forms a single beam, so at SA level the coefficient between two
//! SAs is `√(GtGr)·Q·α(d)`, which makes the per-stream SNR exactly
//! `GtGr·Q²·|α|²/σ²`. At AE level there is no beamforming and every AE pair
//! gets `√(GtGr)·α(d)` with its own exact distance.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::geometry::{
    ae_positions, distance_from_lateral, ArrayGeometry, DistanceModel, ElementPosition,
};
use crate::{Complex, SPEED_OF_LIGHT};

use std::f64::consts::PI;

/// Which antenna hierarchy level carries the spatial bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmLevel {
    /// One addressable unit per SA (beamforming inside the SA).
    #[default]
    Subarray,
    /// Every AE individually addressable.
    Element,
}

/// How channel coefficients are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainModel {
    /// Exact spherical distance in both magnitude and phase.
    #[default]
    Exact,
    /// Magnitude at `D`, binomial-approximated phase.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub geometry: ArrayGeometry,
    pub freq_hz: f64,
    /// Linear transmit antenna power gain.
    pub gain_tx: f64,
    /// Linear receive antenna power gain.
    pub gain_rx: f64,
    /// Noise power per complex sample.
    pub noise_power: f64,
    /// Absorption coefficient `K(f)` (1/m).
    pub absorption: f64,
    pub level: SmLevel,
    pub gain_model: GainModel,
}

impl SystemConfig {
    /// Unit gains, unit noise, no absorption, SA-level, exact gains.
    pub fn new(geometry: ArrayGeometry, freq_hz: f64) -> Self {
        Self {
            geometry,
            freq_hz,
            gain_tx: 1.0,
            gain_rx: 1.0,
            noise_power: 1.0,
            absorption: 0.0,
            level: SmLevel::Subarray,
            gain_model: GainModel::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        ensure_positive("frequency", self.freq_hz)?;
        ensure_positive("transmit gain", self.gain_tx)?;
        ensure_positive("receive gain", self.gain_rx)?;
        ensure_positive("noise power", self.noise_power)?;
        ensure_non_negative("absorption coefficient", self.absorption)
    }

    /// Number of addressable units per side.
    pub fn num_antennas(&self) -> usize {
        match self.level {
            SmLevel::Subarray => self.geometry.num_sas(),
            SmLevel::Element => self.geometry.num_sas() * self.geometry.aes_per_sa(),
        }
    }

    /// Beamforming amplitude factor: `Q` at SA level, 1 at AE level.
    pub fn array_factor(&self) -> f64 {
        match self.level {
            SmLevel::Subarray => self.geometry.ae_per_axis as f64,
            SmLevel::Element => 1.0,
        }
    }

    /// `GtGr·Q²·|α(f, D)|²`, the numerator of the per-stream SNR.
    pub fn reference_gain(&self) -> Result<f64> {
        let alpha = los_path_gain(self.freq_hz, self.geometry.range, self.absorption)?;
        let af = self.array_factor();
        Ok(self.gain_tx * self.gain_rx * af * af * alpha.norm_sqr())
    }

    /// Per-stream SNR `GtGr·Q²·|α|²/σ²` for the configured noise power.
    pub fn snr(&self) -> Result<f64> {
        Ok(self.reference_gain()? / self.noise_power)
    }
}

/// Complex LoS path gain `c/(4πfd)·exp(−K d/2)·exp(−j2πfd/c)`.
pub fn los_path_gain(freq_hz: f64, distance: f64, absorption: f64) -> Result<Complex> {
    ensure_positive("frequency", freq_hz)?;
    ensure_positive("distance", distance)?;
    ensure_non_negative("absorption coefficient", absorption)?;
    Ok(gain_unchecked(freq_hz, distance, distance, absorption))
}

#[inline]
fn gain_unchecked(freq_hz: f64, mag_distance: f64, phase_distance: f64, absorption: f64) -> Complex {
    let mag = SPEED_OF_LIGHT / (4.0 * PI * freq_hz * mag_distance)
        * (-0.5 * absorption * mag_distance).exp();
    Complex::from_polar(mag, -2.0 * PI * freq_hz * phase_distance / SPEED_OF_LIGHT)
}

/// Path gain with the magnitude evaluated at `D` and the binomial phase.
pub fn los_path_gain_approx(
    freq_hz: f64,
    geom: &ArrayGeometry,
    tx: (usize, usize),
    rx: (usize, usize),
    absorption: f64,
) -> Result<Complex> {
    ensure_positive("frequency", freq_hz)?;
    ensure_non_negative("absorption coefficient", absorption)?;
    let d = crate::geometry::effective_distance(geom, tx, rx, DistanceModel::Approx)?;
    Ok(gain_unchecked(freq_hz, geom.range, d, absorption))
}

/// Single-bounce NLoS gain over path `r1 + r2` with reflection coefficient `reflection`.
pub fn nlos_path_gain(
    freq_hz: f64,
    r1: f64,
    r2: f64,
    reflection: Complex,
    absorption: f64,
) -> Result<Complex> {
    ensure_positive("r1", r1)?;
    ensure_positive("r2", r2)?;
    if reflection.norm() > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "|R| must not exceed 1, got {}",
            reflection.norm()
        )));
    }
    Ok(los_path_gain(freq_hz, r1 + r2, absorption)? * reflection)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub weights: Vec<Complex>,
    pub azimuth: f64,
    pub elevation: f64,
}

/// Ideal SA steering vector: weight `(1/Q)·exp(jΦ)` per AE, with `Q² = positions.len()`.
pub fn steering_vector(
    positions: &[ElementPosition],
    azimuth: f64,
    elevation: f64,
    lambda_spp: f64,
) -> Result<SteeringVector> {
    if positions.is_empty() {
        return Err(Error::invalid("steering vector needs at least one element"));
    }
    ensure_positive("SPP wavelength", lambda_spp)?;
    let k = 2.0 * PI / lambda_spp;
    let (dx, dy, dz) = (
        azimuth.cos() * elevation.sin(),
        azimuth.sin() * elevation.sin(),
        elevation.cos(),
    );
    let amp = 1.0 / (positions.len() as f64).sqrt();
    let weights = positions
        .iter()
        .map(|p| Complex::from_polar(amp, k * (p.x * dx + p.y * dy + p.z * dz)))
        .collect();
    Ok(SteeringVector {
        weights,
        azimuth,
        elevation,
    })
}

/// Square channel matrix between the addressable units of the two arrays.
///
/// Columns are transmit units, rows receive units; both use row-major
/// `(m, n)` SA order followed by row-major `(p, q)` AE order.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    entries: DMatrix<Complex>,
    level: SmLevel,
    reference_gain: f64,
    config: Option<SystemConfig>,
}

impl ChannelMatrix {
    /// Wraps an arbitrary square matrix. The per-stream reference gain is
    /// taken as the mean column energy per receive unit.
    pub fn from_entries(entries: DMatrix<Complex>, level: SmLevel) -> Result<Self> {
        if entries.nrows() == 0 || entries.nrows() != entries.ncols() {
            return Err(Error::invalid(format!(
                "channel matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let reference_gain = entries.norm_squared() / (entries.ncols() * entries.nrows()) as f64;
        Ok(Self {
            entries,
            level,
            reference_gain,
            config: None,
        })
    }

    pub fn entries(&self) -> &DMatrix<Complex> {
        &self.entries
    }

    pub fn level(&self) -> SmLevel {
        self.level
    }

    pub fn config(&self) -> Option<&SystemConfig> {
        self.config.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    /// `GtGr·Q²·|α(D)|²` for built channels.
    pub fn reference_gain(&self) -> f64 {
        self.reference_gain
    }

    /// Noise power giving per-stream SNR `gamma` (linear).
    pub fn noise_for_snr(&self, gamma: f64) -> Result<f64> {
        ensure_positive("SNR", gamma)?;
        Ok(self.reference_gain / gamma)
    }

    pub fn snr_for_noise(&self, sigma2: f64) -> Result<f64> {
        ensure_positive("noise power", sigma2)?;
        Ok(self.reference_gain / sigma2)
    }

    pub fn column_norms_sqr(&self) -> Vec<f64> {
        self.entries
            .column_iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    /// Gram matrix `HᴴH`.
    pub fn gram(&self) -> DMatrix<Complex> {
        self.entries.ad_mul(&self.entries)
    }

    /// Largest `|⟨h_l, h_k⟩| / √(‖h_l‖²‖h_k‖²)` over distinct column pairs.
    pub fn max_column_coherence(&self) -> f64 {
        let gram = self.gram();
        let n = gram.ncols();
        let mut worst = 0.0f64;
        for k in 0..n {
            for l in 0..k {
                let c = gram[(l, k)].norm() / (gram[(l, l)].re * gram[(k, k)].re).sqrt();
                worst = worst.max(c);
            }
        }
        worst
    }

    pub fn scaled(&self, factor: Complex) -> Self {
        let mut out = self.clone();
        out.entries *= factor;
        out.reference_gain *= factor.norm_sqr();
        out
    }
}

/// Builds the channel matrix for `config`.
pub fn build_channel(config: &SystemConfig) -> Result<ChannelMatrix> {
    config.validate()?;
    let geom = &config.geometry;
    let positions = unit_positions(config)?;
    let n = positions.len();
    let amp = (config.gain_tx * config.gain_rx).sqrt() * config.array_factor();
    let range_sqr = geom.range * geom.range;
    let distance_model = match config.gain_model {
        GainModel::Exact => DistanceModel::Exact,
        GainModel::Approx => DistanceModel::Approx,
    };
    let entries = DMatrix::from_fn(n, n, |r, t| {
        let lateral = positions[r].distance_sqr(&positions[t]);
        let d = distance_from_lateral(geom.range, lateral, distance_model);
        let mag_d = match config.gain_model {
            GainModel::Exact => (range_sqr + lateral).sqrt(),
            GainModel::Approx => geom.range,
        };
        gain_unchecked(config.freq_hz, mag_d, d, config.absorption) * amp
    });
    Ok(ChannelMatrix {
        entries,
        level: config.level,
        reference_gain: config.reference_gain()?,
        config: Some(*config),
    })
}

/// In-plane positions of the addressable units of one array.
fn unit_positions(config: &SystemConfig) -> Result<Vec<ElementPosition>> {
    let geom = &config.geometry;
    let m = geom.sa_per_axis;
    let mut out = Vec::with_capacity(config.num_antennas());
    for row in 0..m {
        for col in 0..m {
            match config.level {
                SmLevel::Subarray => out.push(geom.sa_center((row, col))?),
                SmLevel::Element => out.extend(ae_positions(geom, (row, col))?),
            }
        }
    }
    Ok(out)
}

fn sa_column(h: &ChannelMatrix, sa: (usize, usize)) -> Result<usize> {
    if h.level != SmLevel::Subarray {
        return Err(Error::invalid("column inner products are defined on SA-level channels"));
    }
    let m = (h.dim() as f64).sqrt().round() as usize;
    for index in [sa.0, sa.1] {
        if index >= m {
            return Err(Error::IndexOutOfRange {
                what: "SA",
                index,
                size: m,
            });
        }
    }
    Ok(sa.0 * m + sa.1)
}

/// `⟨h_{kl}, h_{k'l'}⟩ = h_{kl}ᴴ h_{k'l'}` from the matrix columns.
pub fn column_inner_product(
    h: &ChannelMatrix,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<Complex> {
    let a = sa_column(h, first)?;
    let b = sa_column(h, second)?;
    Ok(h.entries
        .column(a)
        .iter()
        .zip(h.entries.column(b).iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Closed form of [`column_inner_product`] for the approximate-gain SA-level
/// channel: a product of two Dirichlet kernels times a unimodular phase.
pub fn dirichlet_inner_product(
    config: &SystemConfig,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<Complex> {
    config.validate()?;
    let geom = &config.geometry;
    let m = geom.sa_per_axis;
    for index in [first.0, first.1, second.0, second.1] {
        if index >= m {
            return Err(Error::IndexOutOfRange {
                what: "SA",
                index,
                size: m,
            });
        }
    }
    let u = config.freq_hz * geom.sa_pitch * geom.sa_pitch / (SPEED_OF_LIGHT * geom.range);
    let beta = config.reference_gain()?;
    let (k, l) = (first.0 as f64, first.1 as f64);
    let (k2, l2) = (second.0 as f64, second.1 as f64);
    let common = Complex::from_polar(1.0, PI * u * (k * k - k2 * k2 + l * l - l2 * l2));
    Ok(common * beta * geometric_sum(m, u * (k2 - k)) * geometric_sum(m, u * (l2 - l)))
}

/// `Σ_{i<m} exp(j2π·x·i)` written as a phase times `sin(πmx)/sin(πx)`.
fn geometric_sum(m: usize, x: f64) -> Complex {
    let mf = m as f64;
    let s = (PI * x).sin();
    let ratio = if s.abs() < 1e-12 {
        // limit at integer x: the kernel tends to ±m
        let cycles = x.round();
        if (cycles as i64) % 2 == 0 || m % 2 == 1 {
            mf
        } else {
            -mf
        }
    } else {
        (PI * mf * x).sin() / s
    };
    Complex::from_polar(1.0, PI * (mf - 1.0) * x) * ratio
}

/// `20·log10(σ_max/σ_min)` from a full SVD; `+∞` when singular to working precision.
pub fn condition_number_db(h: &ChannelMatrix) -> f64 {
    condition_number_db_of(h.entries())
}

pub(crate) fn condition_number_db_of(m: &DMatrix<Complex>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 || min <= max * f64::EPSILON * m.nrows() as f64 {
        f64::INFINITY
    } else {
        20.0 * (max / min).log10()
    }
}

/// Condition number (dB) of the channel at every `(Δ, D)` pair. Rows follow
/// `sa_pitches`, columns follow `ranges`.
pub fn condition_sweep(
    template: &SystemConfig,
    sa_pitches: &[f64],
    ranges: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if sa_pitches.is_empty() || ranges.is_empty() {
        return Err(Error::invalid("condition sweep needs non-empty grids"));
    }
    let cells: Vec<(f64, f64)> = sa_pitches
        .iter()
        .flat_map(|&p| ranges.iter().map(move |&r| (p, r)))
        .collect();
    let values = cells
        .par_iter()
        .map(|&(pitch, range)| {
            let mut cfg = *template;
            cfg.geometry.sa_pitch = pitch;
            cfg.geometry.range = range;
            build_channel(&cfg).map(|h| condition_number_db(&h))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.chunks(ranges.len()).map(|c| c.to_vec()).collect())
}
