//! Array-of-subarrays layout.
//!
//! Both arrays lie in the z = 0 plane, broadside, with their centers on the
//! z-axis and separated by the communication range `D`. Subarray (SA) centers
//! form an `M x M` grid of pitch `Δ` centered on the array origin, and the
//! `Q x Q` antenna elements (AEs) of an SA form a grid of pitch `δ` centered
//! on the SA center. `Δ` is measured center-to-center. Indices are zero-based.

use crate::error::{ensure_positive, Error, Result};
use crate::SPEED_OF_LIGHT;

/// Physical AoSA parameters, shared by transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    /// SAs per axis (`M`), `M²` SAs in total.
    pub sa_per_axis: usize,
    /// AEs per axis inside an SA (`Q`), `Q²` AEs per SA.
    pub ae_per_axis: usize,
    /// AE pitch `δ` (m).
    pub ae_pitch: f64,
    /// SA pitch `Δ` (m).
    pub sa_pitch: f64,
    /// Distance between the array centers `D` (m).
    pub range: f64,
}

impl ArrayGeometry {
    pub fn new(
        sa_per_axis: usize,
        ae_per_axis: usize,
        ae_pitch: f64,
        sa_pitch: f64,
        range: f64,
    ) -> Result<Self> {
        let geom = Self {
            sa_per_axis,
            ae_per_axis,
            ae_pitch,
            sa_pitch,
            range,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sa_per_axis == 0 || self.ae_per_axis == 0 {
            return Err(Error::invalid("M and Q must be at least 1"));
        }
        ensure_positive("AE pitch", self.ae_pitch)?;
        ensure_positive("SA pitch", self.sa_pitch)?;
        ensure_positive("range", self.range)
    }

    pub fn num_sas(&self) -> usize {
        self.sa_per_axis * self.sa_per_axis
    }

    pub fn aes_per_sa(&self) -> usize {
        self.ae_per_axis * self.ae_per_axis
    }

    /// Whether the SAs fit on one sheet without overlapping (`Δ ≥ Qδ`).
    pub fn is_realizable(&self) -> bool {
        self.sa_pitch >= self.ae_per_axis as f64 * self.ae_pitch
    }

    fn check_sa(&self, (row, col): (usize, usize)) -> Result<()> {
        for index in [row, col] {
            if index >= self.sa_per_axis {
                return Err(Error::IndexOutOfRange {
                    what: "SA",
                    index,
                    size: self.sa_per_axis,
                });
            }
        }
        Ok(())
    }

    /// Center of SA `(row, col)`. Rows run along x, columns along y.
    pub fn sa_center(&self, sa: (usize, usize)) -> Result<ElementPosition> {
        self.check_sa(sa)?;
        Ok(ElementPosition {
            x: centered(sa.0, self.sa_per_axis) * self.sa_pitch,
            y: centered(sa.1, self.sa_per_axis) * self.sa_pitch,
            z: 0.0,
        })
    }
}

/// Offset of grid index `i` from the center of an `n`-point grid, in pitches.
fn centered(i: usize, n: usize) -> f64 {
    i as f64 - (n as f64 - 1.0) / 2.0
}

/// AE coordinates (m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElementPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ElementPosition {
    pub fn distance_sqr(&self, other: &ElementPosition) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }
}

/// Positions of the `Q²` AEs of SA `(row, col)`, in row-major `(p, q)` order.
pub fn ae_positions(geom: &ArrayGeometry, sa: (usize, usize)) -> Result<Vec<ElementPosition>> {
    let center = geom.sa_center(sa)?;
    let q = geom.ae_per_axis;
    let mut out = Vec::with_capacity(q * q);
    for p in 0..q {
        for r in 0..q {
            out.push(ElementPosition {
                x: center.x + centered(p, q) * geom.ae_pitch,
                y: center.y + centered(r, q) * geom.ae_pitch,
                z: 0.0,
            });
        }
    }
    Ok(out)
}

/// SA pitch that makes all channel columns orthogonal: `√(z·D·c / (M·f))`.
///
/// Orthogonality of every column pair additionally needs `gcd(z, M) = 1`;
/// for other integers some columns coincide (see [`crate::channel`]).
pub fn optimal_sa_spacing(range: f64, freq_hz: f64, sa_per_axis: usize, z: f64) -> Result<f64> {
    ensure_positive("range", range)?;
    ensure_positive("frequency", freq_hz)?;
    ensure_positive("z", z)?;
    if sa_per_axis == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    Ok((z * range * SPEED_OF_LIGHT / (sa_per_axis as f64 * freq_hz)).sqrt())
}

/// [`optimal_sa_spacing`] rounded (half away from zero) to a multiple of the AE pitch.
pub fn quantized_sa_spacing(
    range: f64,
    freq_hz: f64,
    sa_per_axis: usize,
    z: f64,
    ae_pitch: f64,
) -> Result<f64> {
    ensure_positive("AE pitch", ae_pitch)?;
    let opt = optimal_sa_spacing(range, freq_hz, sa_per_axis, z)?;
    let steps = (opt / ae_pitch).round();
    if steps == 0.0 {
        return Err(Error::invalid(format!(
            "optimal SA pitch {opt:e} m quantizes to zero with AE pitch {ae_pitch:e} m"
        )));
    }
    Ok(steps * ae_pitch)
}

/// SPP wavelength `λ/η` for confinement factor `η ≥ 1`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail
pub fn spp_wavelength(lambda_free: f64, eta: f64) -> Result<f64> {
    ensure_positive("wavelength", lambda_free)?;
    if !(eta >= 1.0) || !eta.is_finite() {
        return Err(Error::invalid(format!(
            "confinement factor must be >= 1, got {eta}"
        )));
    }
    Ok(lambda_free / eta)
}

/// Active graphene footprint `(1.5·M·Q·λ_spp)²` (m²).
pub fn sheet_footprint(sa_per_axis: usize, ae_per_axis: usize, lambda_spp: f64) -> Result<f64> {
    if sa_per_axis == 0 || ae_per_axis == 0 {
        return Err(Error::invalid("M and Q must be at least 1"));
    }
    ensure_positive("SPP wavelength", lambda_spp)?;
    let side = 1.5 * sa_per_axis as f64 * ae_per_axis as f64 * lambda_spp;
    Ok(side * side)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceModel {
    #[default]
    Exact,
    /// Binomial (paraxial) approximation, valid for `D ≫ Δ`.
    Approx,
}

/// Distance between transmit SA `tx` and receive SA `rx`.
pub fn effective_distance(
    geom: &ArrayGeometry,
    tx: (usize, usize),
    rx: (usize, usize),
    model: DistanceModel,
) -> Result<f64> {
    geom.check_sa(tx)?;
    geom.check_sa(rx)?;
    let dm = rx.0 as f64 - tx.0 as f64;
    let dn = rx.1 as f64 - tx.1 as f64;
    let lateral_sqr = geom.sa_pitch * geom.sa_pitch * (dm * dm + dn * dn);
    Ok(distance_from_lateral(geom.range, lateral_sqr, model))
}

pub(crate) fn distance_from_lateral(range: f64, lateral_sqr: f64, model: DistanceModel) -> f64 {
    match model {
        DistanceModel::Exact => (range * range + lateral_sqr).sqrt(),
        DistanceModel::Approx => range + lateral_sqr / (2.0 * range),
    }
}
