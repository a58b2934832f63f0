//! Gray-mapped square QAM and the hierarchical spatial bit mapper.
//!
//! A frame's bits are `b = [b_m | b_q | b_s]`, stored most significant bit
//! first. `b_m` picks the SA, `b_q` the AE inside it (AE level only), and
//! `b_s` the constellation point. Each spatial field is split into row bits
//! followed by column bits, and each half is binary-reflected Gray decoded.

use crate::channel::SmLevel;
use crate::error::{ensure_positive, Error, Result};
use crate::Complex;

pub const SUPPORTED_ORDERS: [usize; 5] = [4, 16, 64, 256, 1024];

#[inline]
pub fn gray_encode(i: u64) -> u64 {
    i ^ (i >> 1)
}

#[inline]
pub fn gray_decode(mut g: u64) -> u64 {
    let mut i = g;
    while g > 1 {
        g >>= 1;
        i ^= g;
    }
    i
}

fn log2_exact(what: &str, n: usize) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("{what} must be a power of two, got {n}")));
    }
    Ok(n.trailing_zeros())
}

/// Square QAM constellation, with `points[label]` the point for a bit label.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    per_axis: usize,
    bits_per_axis: u32,
    gamma: f64,
    points: Vec<Complex>,
    mu: Vec<f64>,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        if !SUPPORTED_ORDERS.contains(&order) {
            return Err(Error::invalid(format!(
                "unsupported constellation order {order}; expected one of {SUPPORTED_ORDERS:?}"
            )));
        }
        let per_axis = (order as f64).sqrt().round() as usize;
        let bits_per_axis = per_axis.trailing_zeros();
        let gamma = 1.0 / (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let points = (0..order as u64)
            .map(|label| {
                let i = gray_decode(label >> bits_per_axis) as usize;
                let q = gray_decode(label & ((1 << bits_per_axis) - 1)) as usize;
                Complex::new(
                    Self::level_of(gamma, per_axis, i),
                    Self::level_of(gamma, per_axis, q),
                )
            })
            .collect();
        let mu = (1..=per_axis / 2).map(|i| gamma * (2 * i - 1) as f64).collect();
        Ok(Self {
            order,
            per_axis,
            bits_per_axis,
            gamma,
            points,
            mu,
        })
    }

    #[inline]
    fn level_of(gamma: f64, per_axis: usize, index: usize) -> f64 {
        gamma * (2.0 * index as f64 - (per_axis as f64 - 1.0))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits(&self) -> u32 {
        2 * self.bits_per_axis
    }

    /// Levels per axis, `√|X|`.
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn points(&self) -> &[Complex] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex {
        self.points[label]
    }

    /// Positive per-axis levels `Γ(2i − 1)`, `i = 1..√|X|/2`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }

    /// Nearest level on one axis, returned as its Gray code. Exact midpoints
    /// resolve to the neighbour with the smaller code.
    #[inline]
    fn slice_axis(&self, v: f64) -> u64 {
        let top = (self.per_axis - 1) as f64;
        let t = 0.5 * (v / self.gamma + top);
        let idx = if t <= 0.0 {
            0
        } else if t >= top {
            self.per_axis as u64 - 1
        } else {
            let lo = t.floor();
            if t - lo == 0.5 {
                let (a, b) = (lo as u64, lo as u64 + 1);
                return gray_encode(a).min(gray_encode(b));
            }
            t.round() as u64
        };
        gray_encode(idx)
    }

    /// Bit label of the nearest point; ties go to the lowest label.
    #[inline]
    pub fn slice_label(&self, v: Complex) -> usize {
        ((self.slice_axis(v.re) << self.bits_per_axis) | self.slice_axis(v.im)) as usize
    }

    pub fn slice(&self, v: Complex) -> Complex {
        self.points[self.slice_label(v)]
    }
}

/// Single-use SM transmit frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SmFrame {
    pub bits: Vec<u8>,
    pub sa_index: usize,
    /// AE index within the SA; `None` at SA level.
    pub ae_index: Option<usize>,
    pub antenna_index: usize,
    pub symbol_label: usize,
    pub symbol: Complex,
    pub tx_vector: Vec<Complex>,
}

/// `N_b` for one channel use.
pub fn bits_per_use(sa_per_axis: usize, ae_per_axis: usize, order: usize, level: SmLevel) -> Result<u32> {
    let m = 2 * log2_exact("SA count per axis", sa_per_axis)?;
    let q = 2 * log2_exact("AE count per axis", ae_per_axis)?;
    let s = log2_exact("constellation order", order)?;
    Ok(match level {
        SmLevel::Subarray => m + s,
        SmLevel::Element => m + q + s,
    })
}

/// `floor(log2(C(n, k)))`, exact while the coefficient fits in 128 bits.
fn floor_log2_binomial(n: u64, k: u64) -> u32 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        // c·(n−k+i)/i stays integral at every step
        match c.checked_mul(n as u128 - k as u128 + i) {
            Some(v) => c = v / i,
            None => return ln_binomial_floor_log2(n, k),
        }
    }
    127 - c.leading_zeros()
}

fn ln_binomial_floor_log2(n: u64, k: u64) -> u32 {
    let ln = crate::analysis::ln_binomial(n, k);
    (ln / std::f64::consts::LN_2).floor() as u32
}

/// Bits per use for generalized SM with `active` of `total_aes` AEs switched on.
pub fn gsm_bits(total_aes: u64, active: u64, order: usize) -> Result<u32> {
    if active == 0 || active > total_aes {
        return Err(Error::invalid(format!(
            "active AE count must lie in 1..={total_aes}, got {active}"
        )));
    }
    Ok(floor_log2_binomial(total_aes, active) + log2_exact("constellation order", order)?)
}

/// Bits per use for generalized index modulation over frequency bands.
pub fn gim_bits(bands_total: u64, bands_used: u64, total_aes: u64, active: u64, order: usize) -> Result<u32> {
    if bands_used == 0 || bands_used > bands_total {
        return Err(Error::invalid(format!(
            "used band count must lie in 1..={bands_total}, got {bands_used}"
        )));
    }
    Ok(floor_log2_binomial(bands_total, bands_used) + gsm_bits(total_aes, active, order)?)
}

/// Hierarchical bit mapper between bit words and (antenna, symbol) pairs.
#[derive(Debug, Clone)]
pub struct SmMapper {
    sa_per_axis: usize,
    ae_per_axis: usize,
    level: SmLevel,
    sa_axis_bits: u32,
    ae_axis_bits: u32,
    constellation: Constellation,
}

impl SmMapper {
    pub fn new(sa_per_axis: usize, ae_per_axis: usize, level: SmLevel, constellation: Constellation) -> Result<Self> {
        let sa_axis_bits = log2_exact("SA count per axis", sa_per_axis)?;
        let ae_axis_bits = match level {
            SmLevel::Subarray => 0,
            SmLevel::Element => log2_exact("AE count per axis", ae_per_axis)?,
        };
        let out = Self {
            sa_per_axis,
            ae_per_axis,
            level,
            sa_axis_bits,
            ae_axis_bits,
            constellation,
        };
        if out.num_bits() > 63 {
            return Err(Error::invalid(format!("{} bits per use exceeds 63", out.num_bits())));
        }
        Ok(out)
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn level(&self) -> SmLevel {
        self.level
    }

    pub fn spatial_bits(&self) -> u32 {
        2 * (self.sa_axis_bits + self.ae_axis_bits)
    }

    pub fn num_bits(&self) -> u32 {
        self.spatial_bits() + self.constellation.bits()
    }

    pub fn num_antennas(&self) -> usize {
        1 << self.spatial_bits()
    }

    fn aes_per_sa(&self) -> usize {
        match self.level {
            SmLevel::Subarray => 1,
            SmLevel::Element => self.ae_per_axis * self.ae_per_axis,
        }
    }

    /// Splits `2·axis_bits` bits into Gray-decoded (row, col).
    fn grid_from_bits(field: u64, axis_bits: u32) -> (usize, usize) {
        let mask = (1u64 << axis_bits) - 1;
        (
            gray_decode(field >> axis_bits) as usize,
            gray_decode(field & mask) as usize,
        )
    }

    fn grid_to_bits((row, col): (usize, usize), axis_bits: u32) -> u64 {
        (gray_encode(row as u64) << axis_bits) | gray_encode(col as u64)
    }

    /// Flattened antenna index for a spatial label `[b_m | b_q]`.
    #[inline]
    pub fn antenna_for_label(&self, spatial: u64) -> usize {
        let ae_bits = 2 * self.ae_axis_bits;
        let (r, c) = Self::grid_from_bits(spatial >> ae_bits, self.sa_axis_bits);
        let sa = r * self.sa_per_axis + c;
        if self.level == SmLevel::Subarray {
            return sa;
        }
        let (p, q) = Self::grid_from_bits(spatial & ((1u64 << ae_bits) - 1), self.ae_axis_bits);
        sa * self.aes_per_sa() + p * self.ae_per_axis + q
    }

    /// Inverse of [`Self::antenna_for_label`].
    #[inline]
    pub fn label_for_antenna(&self, antenna: usize) -> u64 {
        let per_sa = self.aes_per_sa();
        let (sa, ae) = (antenna / per_sa, antenna % per_sa);
        let m_bits = Self::grid_to_bits((sa / self.sa_per_axis, sa % self.sa_per_axis), self.sa_axis_bits);
        if self.level == SmLevel::Subarray {
            return m_bits;
        }
        let q_bits = Self::grid_to_bits((ae / self.ae_per_axis, ae % self.ae_per_axis), self.ae_axis_bits);
        (m_bits << (2 * self.ae_axis_bits)) | q_bits
    }

    /// `(antenna index, symbol label)` for a bit word.
    #[inline]
    pub fn split_word(&self, word: u64) -> (usize, usize) {
        let sb = self.constellation.bits();
        let antenna = self.antenna_for_label(word >> sb);
        (antenna, (word & ((1u64 << sb) - 1)) as usize)
    }

    #[inline]
    pub fn join_word(&self, antenna: usize, symbol_label: usize) -> u64 {
        (self.label_for_antenna(antenna) << self.constellation.bits()) | symbol_label as u64
    }

    pub fn encode_word(&self, word: u64) -> Result<SmFrame> {
        if word >> self.num_bits() != 0 {
            return Err(Error::invalid(format!(
                "word {word:#x} does not fit in {} bits",
                self.num_bits()
            )));
        }
        let (antenna, symbol_label) = self.split_word(word);
        let symbol = self.constellation.point(symbol_label);
        let mut tx_vector = vec![Complex::new(0.0, 0.0); self.num_antennas()];
        tx_vector[antenna] = symbol;
        let per_sa = self.aes_per_sa();
        Ok(SmFrame {
            bits: word_to_bits(word, self.num_bits()),
            sa_index: antenna / per_sa,
            ae_index: (self.level == SmLevel::Element).then_some(antenna % per_sa),
            antenna_index: antenna,
            symbol_label,
            symbol,
            tx_vector,
        })
    }

    pub fn encode(&self, bits: &[u8]) -> Result<SmFrame> {
        if bits.len() != self.num_bits() as usize {
            return Err(Error::invalid(format!(
                "expected {} bits, got {}",
                self.num_bits(),
                bits.len()
            )));
        }
        self.encode_word(bits_to_word(bits)?)
    }

    pub fn decode_bits(&self, antenna: usize, symbol_label: usize) -> Result<Vec<u8>> {
        if antenna >= self.num_antennas() {
            return Err(Error::IndexOutOfRange {
                what: "antenna",
                index: antenna,
                size: self.num_antennas(),
            });
        }
        if symbol_label >= self.constellation.order() {
            return Err(Error::IndexOutOfRange {
                what: "symbol label",
                index: symbol_label,
                size: self.constellation.order(),
            });
        }
        Ok(word_to_bits(self.join_word(antenna, symbol_label), self.num_bits()))
    }

    pub fn decode_frame(&self, frame: &SmFrame) -> Result<Vec<u8>> {
        self.decode_bits(frame.antenna_index, frame.symbol_label)
    }
}

/// MSB-first bit vector of the low `n` bits of `word`.
pub fn word_to_bits(word: u64, n: u32) -> Vec<u8> {
    (0..n).rev().map(|i| ((word >> i) & 1) as u8).collect()
}

pub fn bits_to_word(bits: &[u8]) -> Result<u64> {
    if bits.len() > 64 {
        return Err(Error::invalid("at most 64 bits fit in a word"));
    }
    bits.iter().try_fold(0u64, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b as u64),
        _ => Err(Error::invalid(format!("bit values must be 0 or 1, got {b}"))),
    })
}

/// Frequency-keyed `k(f)` table for the AE/SA switching rule `D < k(f)·δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    entries: Vec<(f64, f64)>,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self {
            entries: vec![(1e12, 20.0)],
        }
    }
}

impl ThresholdTable {
    pub fn new(mut entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("threshold table must not be empty"));
        }
        for &(f, k) in &entries {
            ensure_positive("threshold table frequency", f)?;
            ensure_positive("threshold table multiplier", k)?;
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate frequency in threshold table"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Piecewise-constant lookup: the entry at or below `f`, else the lowest one.
    pub fn multiplier(&self, freq_hz: f64) -> f64 {
        self.entries
            .iter()
            .rev()
            .find(|e| e.0 <= freq_hz)
            .unwrap_or(&self.entries[0])
            .1
    }
}

/// AE level when `D < k(f)·δ`, SA level otherwise.
pub fn mode_select(range: f64, ae_pitch: f64, freq_hz: f64, table: &ThresholdTable) -> Result<SmLevel> {
    ensure_positive("range", range)?;
    ensure_positive("AE pitch", ae_pitch)?;
    ensure_positive("frequency", freq_hz)?;
    Ok(if range < table.multiplier(freq_hz) * ae_pitch {
        SmLevel::Element
    } else {
        SmLevel::Subarray
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gray_round_trip() {
        for i in 0..4096u64 {
            assert_eq!(gray_decode(gray_encode(i)), i);
            assert_eq!((gray_encode(i) ^ gray_encode(i + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn small_constellations() {
        let c = Constellation::new(4).unwrap();
        let g = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(c.gamma(), g, epsilon = 1e-15);
        for p in c.points() {
            assert_relative_eq!(p.re.abs(), g, epsilon = 1e-15);
            assert_relative_eq!(p.im.abs(), g, epsilon = 1e-15);
        }
        assert_relative_eq!(c.mean_power(), 1.0, epsilon = 1e-15);

        let c = Constellation::new(16).unwrap();
        let g = 1.0 / 10f64.sqrt();
        assert_relative_eq!(c.gamma(), g, epsilon = 1e-15);
        assert_eq!(c.mu().len(), 2);
        assert_relative_eq!(c.mu()[0], g, epsilon = 1e-15);
        assert_relative_eq!(c.mu()[1], 3.0 * g, epsilon = 1e-15);

        let c = Constellation::new(64).unwrap();
        let g = 1.0 / 42f64.sqrt();
        for (i, mu) in c.mu().iter().enumerate() {
            assert_relative_eq!(*mu, (2 * i + 1) as f64 * g, epsilon = 1e-15);
        }
        assert!(Constellation::new(8).is_err());
        assert!(Constellation::new(2048).is_err());
    }

    #[test]
    fn power_and_gray_adjacency() {
        for order in SUPPORTED_ORDERS {
            let c = Constellation::new(order).unwrap();
            assert!((c.mean_power() - 1.0).abs() < 1e-12, "order {order}");
            assert!(c.mu().windows(2).all(|w| w[0] < w[1]));
            let step = 2.0 * c.gamma();
            let pts = c.points();
            for a in 0..order {
                for b in 0..a {
                    let d = pts[a] - pts[b];
                    let adjacent = ((d.re.abs() - step).abs() < 1e-9 && d.im.abs() < 1e-9)
                        || ((d.im.abs() - step).abs() < 1e-9 && d.re.abs() < 1e-9);
                    if adjacent {
                        assert_eq!((a ^ b).count_ones(), 1, "order {order}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn slicer_cases() {
        let c = Constellation::new(4).unwrap();
        let g = c.gamma();
        assert_eq!(c.slice_label(Complex::new(0.0, 0.0)), 0);
        assert_eq!(c.slice(Complex::new(0.9, 0.1)), Complex::new(g, g));
        for (label, p) in c.points().iter().enumerate() {
            assert_eq!(c.slice_label(*p), label);
        }
        let c = Constellation::new(16).unwrap();
        for (label, p) in c.points().iter().enumerate() {
            assert_eq!(c.slice_label(*p), label);
            assert_eq!(c.slice_label(*p * 1.2), label);
        }
        // the four inner points tie at the origin; their labels are 0b0101, 0b0111, 0b1101, 0b1111
        assert_eq!(c.slice_label(Complex::new(0.0, 0.0)), 0b0101);
    }

    #[test]
    fn bit_counts() {
        use SmLevel::*;
        assert_eq!(bits_per_use(2, 2, 16, Element).unwrap(), 8);
        assert_eq!(bits_per_use(4, 1, 16, Subarray).unwrap(), 8);
        assert_eq!(bits_per_use(1, 1, 64, Element).unwrap(), 6);
        assert!(bits_per_use(3, 1, 16, Subarray).is_err());
        assert!(bits_per_use(2, 2, 12, Subarray).is_err());

        assert_eq!(gsm_bits(16, 1, 16).unwrap(), 4 + 4);
        assert_eq!(gsm_bits(16, 2, 4).unwrap(), 8);
        assert_eq!(gsm_bits(4, 4, 4).unwrap(), 2);
        assert!(gsm_bits(4, 5, 4).is_err());
        assert!(gsm_bits(4, 0, 4).is_err());

        assert_eq!(gim_bits(8, 8, 16, 2, 4).unwrap(), gsm_bits(16, 2, 4).unwrap());
        assert_eq!(gim_bits(8, 1, 16, 1, 4).unwrap(), 9);
        assert_eq!(gim_bits(4, 2, 4, 1, 4).unwrap(), 6);
        assert!(gim_bits(4, 5, 4, 1, 4).is_err());

        // C(200, 100) ≈ 9.05e58 overflows the exact path partway
        assert_eq!(gsm_bits(200, 100, 4).unwrap(), 195 + 2);
        // C(1024, 512) needs the log-gamma fallback
        assert_eq!(gsm_bits(1024, 512, 4).unwrap(), 1018 + 2);
    }

    fn mapper(m: usize, q: usize, order: usize, level: SmLevel) -> SmMapper {
        SmMapper::new(m, q, level, Constellation::new(order).unwrap()).unwrap()
    }

    #[test]
    fn encode_examples() {
        let map = mapper(2, 2, 16, SmLevel::Element);
        let zero = map.encode(&[0; 8]).unwrap();
        assert_eq!((zero.sa_index, zero.ae_index, zero.symbol_label), (0, Some(0), 0));
        assert_eq!(zero.symbol, map.constellation().point(0));

        let bits = [0, 1, 1, 0, 0, 1, 1, 1];
        let f = map.encode(&bits).unwrap();
        assert_eq!(f.sa_index, 1); // row 0, col 1
        assert_eq!(f.ae_index, Some(2)); // row 1, col 0
        assert_eq!(f.symbol_label, 0b0111);
        assert_eq!(map.decode_frame(&f).unwrap(), bits);
        assert_eq!(f.tx_vector.iter().filter(|x| x.norm() > 0.0).count(), 1);
        assert_eq!(f.tx_vector[f.antenna_index], f.symbol);

        assert!(map.encode(&[0; 7]).is_err());
        assert!(map.encode(&[0, 0, 0, 0, 0, 0, 0, 2]).is_err());
        assert!(map.encode_word(1 << 8).is_err());
    }

    #[test]
    fn exhaustive_round_trips() {
        for &(m, q, order, level) in &[
            (2, 2, 16, SmLevel::Element),
            (4, 1, 16, SmLevel::Subarray),
            (2, 1, 4, SmLevel::Subarray),
            (4, 4, 16, SmLevel::Element),
            (4, 2, 4, SmLevel::Subarray),
        ] {
            let map = mapper(m, q, order, level);
            let mut seen = vec![false; map.num_antennas() * order];
            for word in 0..1u64 << map.num_bits() {
                let f = map.encode_word(word).unwrap();
                assert_eq!(f.bits.len(), map.num_bits() as usize);
                assert_eq!(bits_to_word(&map.decode_frame(&f).unwrap()).unwrap(), word);
                let slot = f.antenna_index * order + f.symbol_label;
                assert!(!seen[slot]);
                seen[slot] = true;
            }
        }
    }

    #[test]
    fn single_bit_flips_move_to_neighbours() {
        let map = mapper(4, 1, 16, SmLevel::Subarray);
        let c = map.constellation();
        for word in 0..256u64 {
            let (a, s) = map.split_word(word);
            for bit in 0..8 {
                let (a2, s2) = map.split_word(word ^ (1 << bit));
                if bit < 4 {
                    let d = c.point(s) - c.point(s2);
                    assert_eq!(a, a2);
                    let moved = if d.re.abs() > 1e-12 { d.re } else { d.im };
                    assert!(moved.abs() > 0.0);
                } else {
                    assert_eq!(s, s2);
                    let (r, col) = (a / 4, a % 4);
                    let (r2, col2) = (a2 / 4, a2 % 4);
                    assert!(r == r2 || col == col2);
                }
            }
        }
    }

    #[test]
    fn mode_selection() {
        let t = ThresholdTable::default();
        assert_eq!(mode_select(1e-3, 150e-6, 1e12, &t).unwrap(), SmLevel::Element);
        assert_eq!(mode_select(1.0, 150e-6, 1e12, &t).unwrap(), SmLevel::Subarray);
        assert_eq!(mode_select(20.0 * 0.5, 0.5, 1e12, &t).unwrap(), SmLevel::Subarray);
        assert!(ThresholdTable::new(vec![]).is_err());

        let t = ThresholdTable::new(vec![(3e12, 40.0), (1e12, 20.0)]).unwrap();
        assert_eq!(t.multiplier(0.5e12), 20.0);
        assert_eq!(t.multiplier(2e12), 20.0);
        assert_eq!(t.multiplier(3e12), 40.0);
        assert_eq!(mode_select(5e-3, 150e-6, 3e12, &t).unwrap(), SmLevel::Element);
    }

    proptest! {
        #[test]
        fn ae_level_adds_element_bits(m in 0u32..4, q in 0u32..4, o in 0usize..5) {
            let (m, q, order) = (1usize << m, 1usize << q, SUPPORTED_ORDERS[o]);
            let sa = bits_per_use(m, q, order, SmLevel::Subarray).unwrap();
            let ae = bits_per_use(m, q, order, SmLevel::Element).unwrap();
            prop_assert_eq!(ae, sa + 2 * q.trailing_zeros());
        }

        #[test]
        fn slicer_is_nearest_neighbour(re in -1.5f64..1.5, im in -1.5f64..1.5, o in 0usize..3) {
            let c = Constellation::new([4, 16, 64][o]).unwrap();
            let v = Complex::new(re, im);
            let best = c.points().iter().map(|p| (v - p).norm_sqr()).fold(f64::INFINITY, f64::min);
            prop_assert!((v - c.slice(v)).norm_sqr() <= best + 1e-12);
        }

        #[test]
        fn symbol_bit_flip_is_axis_adjacent(label in 0usize..64, bit in 0u32..6) {
            let c = Constellation::new(64).unwrap();
            let d = c.point(label) - c.point(label ^ (1 << bit));
            let on_axis = d.re.abs() < 1e-12 || d.im.abs() < 1e-12;
            prop_assert!(on_axis);
        }
    }
}
