//! Python bindings: `import thzsm`.

use num_complex::Complex64;
use pyo3::exceptions::{PyIndexError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use thz_sm::analysis::{self, AnalysisOptions, AntennaErrorModel};
use thz_sm::channel::{self, ChannelMatrix, GainModel, SmLevel, SystemConfig};
use thz_sm::detection;
use thz_sm::geometry::{self, ArrayGeometry};
use thz_sm::linkbudget::{self, LinkBudget};
use thz_sm::modulation::{Constellation, SmMapper};
use thz_sm::sim::{self, Detector, Scheme, SmxPower, SnrAxis, SpacingPolicy, SweepSpec};
use thz_sm::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        Error::IndexOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn bad_choice(what: &str, got: &str, options: &[&str]) -> PyErr {
    PyValueError::new_err(format!("unknown {what} {got:?}; expected one of {}", options.join(", ")))
}

fn parse_level(s: &str) -> PyResult<SmLevel> {
    match s {
        "sa" => Ok(SmLevel::Subarray),
        "ae" => Ok(SmLevel::Element),
        _ => Err(bad_choice("level", s, &["sa", "ae"])),
    }
}

fn parse_gain_model(s: &str) -> PyResult<GainModel> {
    match s {
        "exact" => Ok(GainModel::Exact),
        "approx" => Ok(GainModel::Approx),
        _ => Err(bad_choice("gain model", s, &["exact", "approx"])),
    }
}

fn parse_antenna_model(s: &str) -> PyResult<AntennaErrorModel> {
    match s {
        "order_statistic" => Ok(AntennaErrorModel::OrderStatistic),
        "paper_intersection" => Ok(AntennaErrorModel::PaperIntersection),
        _ => Err(bad_choice("antenna model", s, &["order_statistic", "paper_intersection"])),
    }
}

#[pyclass(name = "Constellation", module = "thzsm", frozen)]
struct PyConstellation {
    inner: Constellation,
}

#[pymethods]
impl PyConstellation {
    #[new]
    fn new(order: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Constellation::new(order).map_err(py_err)?,
        })
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn bits(&self) -> u32 {
        self.inner.bits()
    }

    /// Scale factor `Γ` giving unit mean power.
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    /// Points indexed by Gray label.
    fn points(&self) -> Vec<Complex64> {
        self.inner.points().to_vec()
    }

    fn mean_power(&self) -> f64 {
        self.inner.mean_power()
    }

    fn slice_label(&self, v: Complex64) -> usize {
        self.inner.slice_label(v)
    }

    fn __repr__(&self) -> String {
        format!("Constellation({})", self.inner.order())
    }
}

#[pyclass(name = "ChannelMatrix", module = "thzsm", frozen)]
struct PyChannel {
    inner: ChannelMatrix,
}

#[pymethods]
impl PyChannel {
    /// Line-of-sight channel between two matched `M×M` arrays of `Q×Q` subarrays.
    #[staticmethod]
    #[pyo3(signature = (m, sa_pitch_m, range_m, freq_hz=1e12, q=1, ae_pitch_m=None, level="sa", gain_model="exact", gain_tx=1.0, gain_rx=1.0, absorption_per_m=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        m: usize,
        sa_pitch_m: f64,
        range_m: f64,
        freq_hz: f64,
        q: usize,
        ae_pitch_m: Option<f64>,
        level: &str,
        gain_model: &str,
        gain_tx: f64,
        gain_rx: f64,
        absorption_per_m: f64,
    ) -> PyResult<Self> {
        let ae_pitch = ae_pitch_m.unwrap_or(thz_sm::wavelength(freq_hz) / 2.0);
        let geom = ArrayGeometry::new(m, q, ae_pitch, sa_pitch_m, range_m).map_err(py_err)?;
        let mut cfg = SystemConfig::new(geom, freq_hz);
        cfg.level = parse_level(level)?;
        cfg.gain_model = parse_gain_model(gain_model)?;
        cfg.gain_tx = gain_tx;
        cfg.gain_rx = gain_rx;
        cfg.absorption = absorption_per_m;
        Ok(Self {
            inner: channel::build_channel(&cfg).map_err(py_err)?,
        })
    }

    /// Wraps explicit row-major entries.
    #[staticmethod]
    #[pyo3(signature = (rows, level="sa"))]
    fn from_rows(rows: Vec<Vec<Complex64>>, level: &str) -> PyResult<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("channel entries must form a non-empty square matrix"));
        }
        let entries = nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Ok(Self {
            inner: ChannelMatrix::from_entries(entries, parse_level(level)?).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn reference_gain(&self) -> f64 {
        self.inner.reference_gain()
    }

    /// Row-major entries.
    fn rows(&self) -> Vec<Vec<Complex64>> {
        let e = self.inner.entries();
        (0..e.nrows()).map(|i| e.row(i).iter().copied().collect()).collect()
    }

    fn column_norms_sqr(&self) -> Vec<f64> {
        self.inner.column_norms_sqr()
    }

    fn condition_number_db(&self) -> f64 {
        channel::condition_number_db(&self.inner)
    }

    fn max_column_coherence(&self) -> f64 {
        self.inner.max_column_coherence()
    }

    fn noise_for_snr(&self, gamma: f64) -> PyResult<f64> {
        self.inner.noise_for_snr(gamma).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("ChannelMatrix(dim={})", self.inner.dim())
    }
}

#[pyclass(name = "SmMapper", module = "thzsm", frozen)]
struct PyMapper {
    inner: SmMapper,
}

#[pymethods]
impl PyMapper {
    #[new]
    #[pyo3(signature = (m, q, order, level="sa"))]
    fn new(m: usize, q: usize, order: usize, level: &str) -> PyResult<Self> {
        let c = Constellation::new(order).map_err(py_err)?;
        Ok(Self {
            inner: SmMapper::new(m, q, parse_level(level)?, c).map_err(py_err)?,
        })
    }

    #[getter]
    fn num_bits(&self) -> u32 {
        self.inner.num_bits()
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.inner.num_antennas()
    }

    /// `(antenna_index, symbol_label, symbol, bits)` for an integer word.
    fn encode_word(&self, word: u64) -> PyResult<(usize, usize, Complex64, Vec<u8>)> {
        let f = self.inner.encode_word(word).map_err(py_err)?;
        Ok((f.antenna_index, f.symbol_label, f.symbol, f.bits))
    }

    /// Same as [`encode_word`] for an MSB-first bit list.
    fn encode(&self, bits: Vec<u8>) -> PyResult<(usize, usize, Complex64, Vec<u8>)> {
        let f = self.inner.encode(&bits).map_err(py_err)?;
        Ok((f.antenna_index, f.symbol_label, f.symbol, f.bits))
    }

    fn decode_bits(&self, antenna_index: usize, symbol_label: usize) -> PyResult<Vec<u8>> {
        self.inner.decode_bits(antenna_index, symbol_label).map_err(py_err)
    }
}

fn detect(
    h: &PyChannel,
    y: Vec<Complex64>,
    mapper: &PyMapper,
    f: fn(&ChannelMatrix, &[Complex64], &SmMapper) -> thz_sm::Result<detection::DetectionResult>,
) -> PyResult<(usize, usize, Vec<u8>)> {
    let r = f(&h.inner, &y, &mapper.inner).map_err(py_err)?;
    Ok((r.detection.antenna_index, r.detection.symbol_label, r.bits))
}

/// MRRC detection: `(antenna_index, symbol_label, bits)`.
#[pyfunction]
fn mrrc_detect(h: &PyChannel, y: Vec<Complex64>, mapper: &PyMapper) -> PyResult<(usize, usize, Vec<u8>)> {
    detect(h, y, mapper, detection::mrrc_detect)
}

/// Exhaustive ML detection: `(antenna_index, symbol_label, bits)`.
#[pyfunction]
fn ml_detect(h: &PyChannel, y: Vec<Complex64>, mapper: &PyMapper) -> PyResult<(usize, usize, Vec<u8>)> {
    detect(h, y, mapper, detection::ml_detect)
}

#[pyfunction]
#[pyo3(signature = (range_m, freq_hz, m, z=1.0))]
fn optimal_sa_spacing(range_m: f64, freq_hz: f64, m: usize, z: f64) -> PyResult<f64> {
    geometry::optimal_sa_spacing(range_m, freq_hz, m, z).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (range_m, freq_hz, m, z, ae_pitch_m))]
fn quantized_sa_spacing(range_m: f64, freq_hz: f64, m: usize, z: f64, ae_pitch_m: f64) -> PyResult<f64> {
    geometry::quantized_sa_spacing(range_m, freq_hz, m, z, ae_pitch_m).map_err(py_err)
}

/// Condition number grid, rows over `sa_pitches`, columns over `ranges`.
#[pyfunction]
#[pyo3(signature = (m, freq_hz, sa_pitches, ranges, q=1))]
fn condition_sweep(m: usize, freq_hz: f64, sa_pitches: Vec<f64>, ranges: Vec<f64>, q: usize) -> PyResult<Vec<Vec<f64>>> {
    let first = *sa_pitches.first().ok_or_else(|| PyValueError::new_err("empty pitch grid"))?;
    let range = *ranges.first().ok_or_else(|| PyValueError::new_err("empty range grid"))?;
    let geom = ArrayGeometry::new(m, q, thz_sm::wavelength(freq_hz) / 2.0, first, range).map_err(py_err)?;
    channel::condition_sweep(&SystemConfig::new(geom, freq_hz), &sa_pitches, &ranges).map_err(py_err)
}

#[pyfunction]
fn qam_ser(gamma: f64, order: usize) -> PyResult<f64> {
    analysis::qam_ser(gamma, order).map_err(py_err)
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    analysis::q_function(x)
}

#[pyclass(name = "SerBreakdown", module = "thzsm", frozen, get_all)]
struct PySerBreakdown {
    gamma: f64,
    sigma2: f64,
    p_s: f64,
    p_a: f64,
    p_tilde_a: f64,
    p_e: f64,
    p_e_joint: Option<f64>,
    orthogonality_residual: f64,
    clamped: bool,
}

#[pymethods]
impl PySerBreakdown {
    fn __repr__(&self) -> String {
        let joint = self.p_e_joint.map_or("None".to_string(), |v| format!("{v:.4e}"));
        format!(
            "SerBreakdown(gamma={}, p_s={:.4e}, p_a={:.4e}, p_e={:.4e}, p_e_joint={joint})",
            self.gamma, self.p_s, self.p_a, self.p_e
        )
    }
}

/// Analytical SER of SM with MRRC at per-stream SNR `gamma` (linear).
#[pyfunction]
#[pyo3(signature = (h, order, gamma, antenna_model="order_statistic", joint=true))]
fn total_ser(h: &PyChannel, order: usize, gamma: f64, antenna_model: &str, joint: bool) -> PyResult<PySerBreakdown> {
    let c = Constellation::new(order).map_err(py_err)?;
    let options = AnalysisOptions {
        antenna_model: parse_antenna_model(antenna_model)?,
        joint,
        ..AnalysisOptions::default()
    };
    let b = analysis::total_ser(&h.inner, &c, gamma, &options).map_err(py_err)?;
    Ok(PySerBreakdown {
        gamma: b.gamma,
        sigma2: b.sigma2,
        p_s: b.p_s,
        p_a: b.p_a,
        p_tilde_a: b.p_tilde_a,
        p_e: b.p_e,
        p_e_joint: b.p_e_joint,
        orthogonality_residual: b.orthogonality_residual,
        clamped: b.clamped,
    })
}

#[pyclass(name = "SweepPoint", module = "thzsm", frozen, get_all)]
struct PySweepPoint {
    snr_db: f64,
    sigma2: f64,
    trials: u64,
    bit_errors: u64,
    symbol_errors: u64,
    antenna_errors: u64,
    ber: f64,
    ser: f64,
    aer: f64,
    ci95: f64,
}

#[pymethods]
impl PySweepPoint {
    fn __repr__(&self) -> String {
        format!(
            "SweepPoint(snr_db={}, trials={}, ber={:.4e}, ser={:.4e})",
            self.snr_db, self.trials, self.ber, self.ser
        )
    }
}

/// Seeded Monte Carlo sweep; identical arguments give identical results.
#[pyfunction]
#[pyo3(signature = (m, order, snr_db, trials, seed=1, freq_hz=1e12, range_m=1.0, q=1, level="sa", spacing="region2_optimized", z=1.0, sa_pitch_m=None, detector="mrrc", scheme="sm", snr_axis="per_stream", smx_power="unit_per_stream"))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    m: usize,
    order: usize,
    snr_db: Vec<f64>,
    trials: u64,
    seed: u64,
    freq_hz: f64,
    range_m: f64,
    q: usize,
    level: &str,
    spacing: &str,
    z: f64,
    sa_pitch_m: Option<f64>,
    detector: &str,
    scheme: &str,
    snr_axis: &str,
    smx_power: &str,
) -> PyResult<Vec<PySweepPoint>> {
    let pitch = match sa_pitch_m {
        Some(p) => p,
        None => geometry::optimal_sa_spacing(range_m, freq_hz, m, 1.0).map_err(py_err)?,
    };
    let geom = ArrayGeometry::new(m, q, thz_sm::wavelength(freq_hz) / 2.0, pitch, range_m).map_err(py_err)?;
    let mut cfg = SystemConfig::new(geom, freq_hz);
    cfg.level = parse_level(level)?;
    let mut spec = SweepSpec::new(cfg, order, snr_db, trials, seed);
    spec.spacing = match spacing {
        "region1" => SpacingPolicy::Region1,
        "region2_optimized" => SpacingPolicy::Region2Optimized { z, quantized: false },
        "region2_quantized" => SpacingPolicy::Region2Optimized { z, quantized: true },
        "region2_raw" => SpacingPolicy::Region2Raw { sa_pitch: pitch },
        s => {
            return Err(bad_choice(
                "spacing",
                s,
                &["region1", "region2_optimized", "region2_quantized", "region2_raw"],
            ))
        }
    };
    spec.detector = match detector {
        "mrrc" => Detector::Mrrc,
        "ml" => Detector::Ml,
        s => return Err(bad_choice("detector", s, &["mrrc", "ml"])),
    };
    spec.scheme = match scheme {
        "sm" => Scheme::Sm,
        "smx" => Scheme::Smx,
        s => return Err(bad_choice("scheme", s, &["sm", "smx"])),
    };
    spec.snr_axis = match snr_axis {
        "per_stream" => SnrAxis::PerStream,
        "transmit" => SnrAxis::Transmit,
        s => return Err(bad_choice("SNR axis", s, &["per_stream", "transmit"])),
    };
    spec.smx_power = match smx_power {
        "unit_per_stream" => SmxPower::UnitPerStream,
        "total_unit" => SmxPower::TotalUnit,
        s => return Err(bad_choice("SMX power", s, &["unit_per_stream", "total_unit"])),
    };
    let result = py.detach(|| sim::run_sweep(&spec)).map_err(py_err)?;
    Ok(result
        .points
        .iter()
        .map(|p| PySweepPoint {
            snr_db: p.snr_db,
            sigma2: p.sigma2,
            trials: p.trials,
            bit_errors: p.bit_errors,
            symbol_errors: p.symbol_errors,
            antenna_errors: p.antenna_errors,
            ber: p.ber(),
            ser: p.ser(),
            aer: p.aer(),
            ci95: p.ci95(),
        })
        .collect())
}

#[pyfunction]
fn path_loss_db(freq_hz: f64, distance_m: f64) -> PyResult<f64> {
    linkbudget::path_loss_db(freq_hz, distance_m, None).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (p_tx_dbm, gamma_th_db, noise_dbm, g_t_dbi, g_r_dbi, array_gain_db=0.0))]
fn pl_threshold_db(
    p_tx_dbm: f64,
    gamma_th_db: f64,
    noise_dbm: f64,
    g_t_dbi: f64,
    g_r_dbi: f64,
    array_gain_db: f64,
) -> PyResult<f64> {
    let b = LinkBudget {
        p_tx_dbm,
        gamma_th_db,
        noise_dbm,
        g_t_dbi,
        g_r_dbi,
        array_gain_db,
    };
    b.validate().map_err(py_err)?;
    Ok(linkbudget::pl_threshold_db(&b, 0.0))
}

/// Smallest power-of-two `Q` whose array gain covers `required_db`: `(q, gain_db)`.
#[pyfunction]
#[pyo3(signature = (required_db, max_q=linkbudget::DEFAULT_MAX_Q))]
fn q_for_gain(required_db: f64, max_q: usize) -> PyResult<(usize, f64)> {
    linkbudget::q_for_gain(required_db, max_q).map_err(py_err)
}

#[pymodule]
fn thzsm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SPEED_OF_LIGHT", thz_sm::SPEED_OF_LIGHT)?;
    m.add_class::<PyConstellation>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyMapper>()?;
    m.add_class::<PySerBreakdown>()?;
    m.add_class::<PySweepPoint>()?;
    m.add_function(wrap_pyfunction!(mrrc_detect, m)?)?;
    m.add_function(wrap_pyfunction!(ml_detect, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_sa_spacing, m)?)?;
    m.add_function(wrap_pyfunction!(quantized_sa_spacing, m)?)?;
    m.add_function(wrap_pyfunction!(condition_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(qam_ser, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(total_ser, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(path_loss_db, m)?)?;
    m.add_function(wrap_pyfunction!(pl_threshold_db, m)?)?;
    m.add_function(wrap_pyfunction!(q_for_gain, m)?)?;
    Ok(())
}
