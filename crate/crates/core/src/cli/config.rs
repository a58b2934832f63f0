//! Sectioned TOML run configuration. Every key is optional; flags override it.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelArg {
    Sa,
    Ae,
    /// Picked from the threshold table.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainModelArg {
    Exact,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorArg {
    Mrrc,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Sm,
    Smx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingArg {
    Region1,
    Region2Optimized,
    Region2Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrAxisArg {
    PerStream,
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmxPowerArg {
    UnitPerStream,
    TotalUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaModelArg {
    OrderStatistic,
    PaperIntersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridArg {
    Linear,
    Log,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub freq_hz: Option<f64>,
    pub range_m: Option<f64>,
    pub sa_per_axis: Option<usize>,
    pub ae_per_axis: Option<usize>,
    pub ae_pitch_m: Option<f64>,
    pub sa_pitch_m: Option<f64>,
    pub gain_tx_dbi: Option<f64>,
    pub gain_rx_dbi: Option<f64>,
    pub absorption_per_m: Option<f64>,
    pub absorption_csv: Option<PathBuf>,
    pub level: Option<LevelArg>,
    pub gain_model: Option<GainModelArg>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub order: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub snr_start_db: Option<f64>,
    pub snr_stop_db: Option<f64>,
    pub snr_step_db: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub detector: Option<DetectorArg>,
    pub scheme: Option<SchemeArg>,
    pub spacing: Option<SpacingArg>,
    pub z: Option<f64>,
    pub quantized: Option<bool>,
    pub snr_axis: Option<SnrAxisArg>,
    pub smx_power: Option<SmxPowerArg>,
    pub analytical: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub antenna_model: Option<AntennaModelArg>,
    pub joint: Option<bool>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSection {
    pub pitch_min_m: Option<f64>,
    pub pitch_max_m: Option<f64>,
    pub pitch_points: Option<usize>,
    pub range_min_m: Option<f64>,
    pub range_max_m: Option<f64>,
    pub range_points: Option<usize>,
    pub grid: Option<GridArg>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingSection {
    pub zmax: Option<u32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudgetSection {
    pub p_tx_dbm: Option<f64>,
    pub gamma_th_db: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub max_q: Option<usize>,
    pub q: Option<usize>,
    pub extent_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    /// `[[freq_hz, multiplier], ...]`, ascending in frequency.
    pub thresholds: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub condition: ConditionSection,
    #[serde(default)]
    pub spacing: SpacingSection,
    #[serde(default)]
    pub link_budget: LinkBudgetSection,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(p) = cfg.system.absorption_csv.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse() {
        let cfg = RunConfig::parse(
            r#"
[system]
freq_hz = 3e12
range_m = 0.5
level = "auto"

[sweep]
snr_db = [0.0, 5.0]
spacing = "region2_raw"
sa_pitch_m = 1e-3
"#,
        );
        assert!(matches!(cfg, Err(Error::Parse { line: 10, .. })), "{cfg:?}");

        let cfg = RunConfig::parse("[system]\nfreq_hz = 3e12\nlevel = \"auto\"\n[mode]\nthresholds = [[1e12, 20.0]]\n").unwrap();
        assert_eq!(cfg.system.freq_hz, Some(3e12));
        assert_eq!(cfg.system.level, Some(LevelArg::Auto));
        assert_eq!(cfg.mode.thresholds, Some(vec![(1e12, 20.0)]));
        assert!(cfg.sweep.order.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[system]\nfreq = 1e12\n").is_err());
        assert!(RunConfig::parse("[nonsense]\n").is_err());
        assert!(RunConfig::parse("[sweep]\ndetector = \"zf\"\n").is_err());
    }
}
