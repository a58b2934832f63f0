//! Path loss, link budget and subarray sizing.

use std::f64::consts::{E, PI};
use std::io::Read;
use std::path::Path;

use crate::error::{ensure_positive, Error, Result};
use crate::geometry::ElementPosition;
use crate::SPEED_OF_LIGHT;

/// Molecular absorption coefficient samples `(f, K(f))`, strictly increasing in `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    rows: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("absorption table needs at least one row"));
        }
        for (i, &(f, k)) in rows.iter().enumerate() {
            check_row(f, k).map_err(|message| Error::Parse {
                line: i as u64 + 1,
                message,
            })?;
            if i > 0 && f <= rows[i - 1].0 {
                return Err(Error::Parse {
                    line: i as u64 + 1,
                    message: format!("frequency {f} does not increase"),
                });
            }
        }
        Ok(Self { rows })
    }

    /// Parses `freq_hz,kappa_per_m` CSV. Error lines count the header as line 1.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.iter().collect::<Vec<_>>() != ["freq_hz", "kappa_per_m"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `freq_hz,kappa_per_m`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut rows: Vec<(f64, f64)> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize, name: &str| -> Result<f64> {
                let raw = record.get(i).unwrap_or("");
                raw.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid {name} `{raw}`"),
                })
            };
            let (f, k) = (field(0, "freq_hz")?, field(1, "kappa_per_m")?);
            check_row(f, k).map_err(|message| Error::Parse { line, message })?;
            if let Some(&(prev, _)) = rows.last() {
                if f <= prev {
                    return Err(Error::Parse {
                        line,
                        message: format!("frequency {f} does not increase (previous {prev})"),
                    });
                }
            }
            rows.push((f, k));
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "absorption table has no data rows".into(),
            });
        }
        Ok(Self { rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    /// Piecewise-linear `K(f)`, held at the end values outside the table.
    pub fn kappa(&self, freq_hz: f64) -> f64 {
        let rows = &self.rows;
        let i = rows.partition_point(|r| r.0 <= freq_hz);
        if i == 0 {
            return rows[0].1;
        }
        if i == rows.len() {
            return rows[rows.len() - 1].1;
        }
        let ((f0, k0), (f1, k1)) = (rows[i - 1], rows[i]);
        k0 + (k1 - k0) * (freq_hz - f0) / (f1 - f0)
    }
}

fn check_row(f: f64, k: f64) -> std::result::Result<(), String> {
    if !(f.is_finite() && f > 0.0) {
        return Err(format!("frequency must be positive, got {f}"));
    }
    if !(k.is_finite() && k >= 0.0) {
        return Err(format!("absorption coefficient must be non-negative, got {k}"));
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Spreading plus absorption loss `20log10(4πfd/c) + 10·K(f)·d·log10(e)`.
pub fn path_loss_db(freq_hz: f64, distance: f64, table: Option<&AbsorptionTable>) -> Result<f64> {
    ensure_positive("frequency", freq_hz)?;
    ensure_positive("distance", distance)?;
    let kappa = table.map_or(0.0, |t| t.kappa(freq_hz));
    Ok(20.0 * (4.0 * PI * freq_hz * distance / SPEED_OF_LIGHT).log10() + 10.0 * kappa * distance * E.log10())
}

/// Link budget terms, all in dB units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkBudget {
    pub p_tx_dbm: f64,
    pub gamma_th_db: f64,
    /// `20log10(σ)` in dBm.
    pub noise_dbm: f64,
    pub g_t_dbi: f64,
    pub g_r_dbi: f64,
    pub array_gain_db: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("transmit power", self.p_tx_dbm),
            ("threshold SNR", self.gamma_th_db),
            ("noise level", self.noise_dbm),
            ("transmit gain", self.g_t_dbi),
            ("receive gain", self.g_r_dbi),
            ("array gain", self.array_gain_db),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `P_Tx + G_t + G_r + G_array + 20log10|α| − γ_th − 20log10σ`.
pub fn pl_threshold_db(budget: &LinkBudget, alpha_db: f64) -> f64 {
    budget.p_tx_dbm + budget.g_t_dbi + budget.g_r_dbi + budget.array_gain_db + alpha_db
        - budget.gamma_th_db
        - budget.noise_dbm
}

pub const DEFAULT_MAX_Q: usize = 64;

/// Beamforming power gain of a `Q×Q` SA on one side, `10log10(Q²)`.
pub fn array_gain_db(q: usize) -> f64 {
    20.0 * (q as f64).log10()
}

/// Smallest power-of-two `Q ≤ max_q` whose array gain covers `required_db`.
pub fn q_for_gain(required_db: f64, max_q: usize) -> Result<(usize, f64)> {
    if !required_db.is_finite() {
        return Err(Error::invalid(format!("required gain must be finite, got {required_db}")));
    }
    let mut q = 1usize;
    while q <= max_q {
        // tolerate rounding in dB bookkeeping
        if array_gain_db(q) >= required_db - 1e-12 {
            return Ok((q, array_gain_db(q)));
        }
        q *= 2;
    }
    Err(Error::invalid(format!(
        "infeasible range: {required_db:.3} dB of array gain needs Q > {max_q}"
    )))
}

/// SA size closing the link at range `range` (array gain of `budget` ignored).
pub fn required_q(
    freq_hz: f64,
    range: f64,
    budget: &LinkBudget,
    table: Option<&AbsorptionTable>,
    max_q: usize,
) -> Result<(usize, f64)> {
    budget.validate()?;
    let base = LinkBudget {
        array_gain_db: 0.0,
        ..*budget
    };
    q_for_gain(path_loss_db(freq_hz, range, table)? - pl_threshold_db(&base, 0.0), max_q)
}

/// Active SAs on a square sheet of AEs at pitch `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaMask {
    pub sa_per_axis: usize,
    pub ae_per_axis: usize,
    /// Physical AEs per sheet axis.
    pub sheet_aes_per_axis: usize,
    pub sa_pitch: f64,
    pub ae_pitch: f64,
    /// SA centers in row-major `(m, n)` order.
    pub centers: Vec<ElementPosition>,
    /// Owning SA of each physical AE (row-major), `None` when inactive.
    pub owner: Vec<Option<usize>>,
}

impl SaMask {
    pub fn owner_of(&self, row: usize, col: usize) -> Option<usize> {
        self.owner[row * self.sheet_aes_per_axis + col]
    }

    pub fn active_count(&self) -> usize {
        self.owner.iter().filter(|o| o.is_some()).count()
    }
}

/// Rounds `t` to an integer, resolving halves toward `mid` so that blocks mirror.
fn round_toward(t: f64, mid: f64) -> i64 {
    const EPS: f64 = 1e-9;
    if t > mid + EPS {
        (t - 0.5 - EPS).ceil() as i64
    } else if t < mid - EPS {
        (t + 0.5 + EPS).floor() as i64
    } else {
        mid.floor() as i64
    }
}

/// `M×M` SAs of `Q×Q` AEs, `Δ̄` apart and centered on a sheet of side `extent`.
pub fn active_sa_mask(extent: f64, sa_per_axis: usize, sa_pitch: f64, ae_pitch: f64, q: usize) -> Result<SaMask> {
    ensure_positive("sheet extent", extent)?;
    ensure_positive("SA pitch", sa_pitch)?;
    ensure_positive("AE pitch", ae_pitch)?;
    if sa_per_axis == 0 || q == 0 {
        return Err(Error::invalid("SA and AE counts must be at least 1"));
    }
    let needed = (sa_per_axis - 1) as f64 * sa_pitch + q as f64 * ae_pitch;
    if needed > extent * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "sheet extent {extent:.6e} m is too small; at least {needed:.6e} m is required"
        )));
    }
    if sa_per_axis > 1 && sa_pitch < q as f64 * ae_pitch * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "SA pitch {sa_pitch:.6e} m is smaller than the SA width {:.6e} m",
            q as f64 * ae_pitch
        )));
    }
    let n = (extent / ae_pitch * (1.0 + 1e-12)).floor() as usize;
    let offset = |i: usize| (i as f64 - 0.5 * (sa_per_axis as f64 - 1.0)) * sa_pitch;
    let x0 = -0.5 * (n as f64 - 1.0) * ae_pitch;
    let mid = 0.5 * (n - q) as f64;
    let starts: Vec<usize> = (0..sa_per_axis)
        .map(|i| {
            let t = (offset(i) - x0) / ae_pitch - 0.5 * (q as f64 - 1.0);
            round_toward(t, mid).clamp(0, (n - q) as i64) as usize
        })
        .collect();
    let mut owner = vec![None; n * n];
    for (r, &sr) in starts.iter().enumerate() {
        for (c, &sc) in starts.iter().enumerate() {
            for i in sr..sr + q {
                for j in sc..sc + q {
                    owner[i * n + j] = Some(r * sa_per_axis + c);
                }
            }
        }
    }
    let centers = (0..sa_per_axis * sa_per_axis)
        .map(|s| ElementPosition {
            x: offset(s / sa_per_axis),
            y: offset(s % sa_per_axis),
            z: 0.0,
        })
        .collect();
    Ok(SaMask {
        sa_per_axis,
        ae_per_axis: q,
        sheet_aes_per_axis: n,
        sa_pitch,
        ae_pitch,
        centers,
        owner,
    })
}
