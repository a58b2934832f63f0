//! Closed-form and numerical error probabilities for SM with MRRC detection.
//!
//! Columns of `H` are treated as orthogonal, so the matched-filter output of
//! the active column is `‖h_k‖²x + w_k` and every other output is pure noise
//! with variance `‖h_l‖²σ²`. Everything is expressed per channel column, so
//! unequal column norms (exact-distance channels) are handled by grouping.

pub mod quadrature;

use std::f64::consts::{PI, SQRT_2};

use libm::{erf, erfc};

pub use quadrature::{integrate, try_integrate, Tolerance};

use crate::channel::ChannelMatrix;
use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::modulation::Constellation;
use crate::Complex;

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn check_square_order(order: usize) -> Result<f64> {
    let m = (order as f64).sqrt().round() as usize;
    if order < 4 || m * m != order || !m.is_power_of_two() {
        return Err(Error::invalid(format!("square QAM order expected, got {order}")));
    }
    Ok(m as f64)
}

/// Exact symbol error probability of Gray square QAM at SNR `gamma` (linear).
pub fn qam_ser(gamma: f64, order: usize) -> Result<f64> {
    ensure_non_negative("SNR", gamma)?;
    let m = check_square_order(order)?;
    let p = 2.0 * (1.0 - 1.0 / m) * q_function((3.0 * gamma / (order as f64 - 1.0)).sqrt());
    Ok(2.0 * p - p * p)
}

/// Nearest-neighbour bound `4Q(√(3γ/(|X|−1)))`, clamped to `[0, 1]`.
pub fn qam_ser_union_bound(gamma: f64, order: usize) -> Result<f64> {
    ensure_non_negative("SNR", gamma)?;
    check_square_order(order)?;
    Ok((4.0 * q_function((3.0 * gamma / (order as f64 - 1.0)).sqrt())).min(1.0))
}

/// Exponentially scaled modified Bessel function `e^{−|x|}·I₀(x)`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        let q = 0.25 * x * x;
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        let mut k = 1.0;
        while term > sum * 1e-17 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        for k in 1..200 {
            let next = term * ((2 * k - 1) as f64).powi(2) / (8.0 * k as f64 * x);
            if next >= term || next < 1e-17 * sum {
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

fn check_folded(v: f64, sigma2: f64) -> Result<()> {
    ensure_non_negative("v", v)?;
    ensure_positive("sigma²", sigma2)
}

fn folded_pdf(v: f64, mu: f64, sigma2: f64) -> f64 {
    let s2 = 2.0 * sigma2;
    ((-(v - mu) * (v - mu) / s2).exp() + (-(v + mu) * (v + mu) / s2).exp()) / (PI * s2).sqrt()
}

fn ln_folded_pdf(v: f64, mu: f64, sigma2: f64) -> f64 {
    let s2 = 2.0 * sigma2;
    let (a, b) = (-(v - mu) * (v - mu) / s2, -(v + mu) * (v + mu) / s2);
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln() - 0.5 * (PI * s2).ln()
}

/// `(F, 1 − F)` of the folded normal, each evaluated without cancellation.
fn folded_cdf_sf(v: f64, mu: f64, sigma2: f64) -> (f64, f64) {
    let s = (2.0 * sigma2).sqrt();
    let (a, b) = ((v + mu) / s, (v - mu) / s);
    // below the mean, erf(a) + erf(b) cancels; the erfc difference keeps the small tail
    let cdf = if b < 0.0 { 0.5 * (erfc(-b) - erfc(a)) } else { 0.5 * (erf(a) + erf(b)) };
    let sf = 0.5 * (erfc(a) + erfc(b));
    (cdf.clamp(0.0, 1.0), sf.clamp(0.0, 1.0))
}

/// Density of `|X|` for `X ~ N(mu, sigma2)`.
pub fn folded_normal_pdf(v: f64, mu: f64, sigma2: f64) -> Result<f64> {
    check_folded(v, sigma2)?;
    Ok(folded_pdf(v, mu, sigma2))
}

pub fn folded_normal_cdf(v: f64, mu: f64, sigma2: f64) -> Result<f64> {
    check_folded(v, sigma2)?;
    Ok(folded_cdf_sf(v, mu, sigma2).0)
}

pub fn folded_normal_sf(v: f64, mu: f64, sigma2: f64) -> Result<f64> {
    check_folded(v, sigma2)?;
    Ok(folded_cdf_sf(v, mu, sigma2).1)
}

/// `ln(n!/((j−1)!(n−j)!))`.
fn ln_order_coefficient(j: u64, n: u64) -> f64 {
    (n as f64).ln() + ln_binomial(n - 1, j - 1)
}

pub(crate) fn ln_binomial(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

fn ln_order_pdf(v: f64, j: u64, n: u64, mu: f64, sigma2: f64) -> f64 {
    let (cdf, sf) = folded_cdf_sf(v, mu, sigma2);
    let mut ln = ln_order_coefficient(j, n) + ln_folded_pdf(v, mu, sigma2);
    if j > 1 {
        ln += (j - 1) as f64 * cdf.ln();
    }
    if n > j {
        ln += (n - j) as f64 * sf.ln();
    }
    ln
}

/// Density of the `j`-th smallest of `n` i.i.d. folded normals.
pub fn order_statistic_pdf(v: f64, j: u64, n: u64, mu: f64, sigma2: f64) -> Result<f64> {
    check_folded(v, sigma2)?;
    if j == 0 || j > n {
        return Err(Error::invalid(format!("rank {j} out of range 1..={n}")));
    }
    Ok(ln_order_pdf(v, j, n, mu, sigma2).exp())
}

/// Rice density with non-centrality `nu` and per-axis variance `s2`.
pub fn rice_pdf(v: f64, nu: f64, s2: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    v / s2 * (-(v - nu) * (v - nu) / (2.0 * s2)).exp() * bessel_i0e(v * nu / s2)
}

/// How the antenna-index error probability is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AntennaErrorModel {
    /// Exact: the active output (Rice) must exceed the largest null output (Rayleigh).
    #[default]
    OrderStatistic,
    /// Real-axis folded-normal construction with pdf intersection points.
    PaperIntersection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntennaError {
    pub p_a: f64,
    pub p_tilde_a: f64,
    /// `P(μ_i)` for the intersection model; the error conditioned on each
    /// distinct symbol magnitude (ascending) for the order-statistic model.
    pub components: Vec<f64>,
    /// Whether any value had to be clamped into `[0, 1]`.
    pub clamped: bool,
}

/// Distinct values with multiplicities, merged at relative tolerance 1e-12.
fn group_values(values: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((u, c)) if (v - *u).abs() <= 1e-12 * u.abs().max(v.abs()) => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// Null-output statistics for one channel at one noise level.
struct NullClasses {
    /// `(per-axis variance s_l², multiplicity)` per column-norm class.
    classes: Vec<(f64, usize)>,
}

impl NullClasses {
    fn new(norm_groups: &[(f64, usize)], sigma2: f64) -> Self {
        Self {
            classes: norm_groups.iter().map(|&(e, c)| (0.5 * e * sigma2, c)).collect(),
        }
    }

    /// `1 − Π_{l≠k} (1 − exp(−v²/2s_l²))`, the probability some null output exceeds `v`.
    #[inline]
    fn exceed(&self, v: f64, own: usize) -> f64 {
        let mut ln_all = 0.0;
        for (i, &(s2, c)) in self.classes.iter().enumerate() {
            let count = c - (i == own) as usize;
            if count == 0 {
                continue;
            }
            let ln_f = (-(-v * v / (2.0 * s2)).exp_m1()).ln();
            ln_all += count as f64 * ln_f;
        }
        -ln_all.exp_m1()
    }
}

fn check_channel(h: &ChannelMatrix) -> Result<Vec<(f64, usize)>> {
    if h.dim() < 2 {
        return Err(Error::invalid("antenna error analysis needs at least two antennas"));
    }
    let groups = group_values(&h.column_norms_sqr());
    if groups[0].0 <= 0.0 {
        return Err(Error::Numerical("degenerate channel column".into()));
    }
    Ok(groups)
}

fn magnitude_groups(constellation: &Constellation) -> Vec<(f64, usize)> {
    let mags: Vec<f64> = constellation.points().iter().map(|p| p.norm()).collect();
    group_values(&mags)
}

/// Antenna-index error probability of MRRC at per-stream SNR `gamma`.
pub fn antenna_error_prob(
    h: &ChannelMatrix,
    constellation: &Constellation,
    gamma: f64,
    model: AntennaErrorModel,
    tol: Tolerance,
) -> Result<AntennaError> {
    let sigma2 = h.noise_for_snr(gamma)?;
    let groups = check_channel(h)?;
    match model {
        AntennaErrorModel::OrderStatistic => order_statistic_error(&groups, h.dim(), constellation, sigma2, tol),
        AntennaErrorModel::PaperIntersection => intersection_error(&groups, h.dim(), constellation, sigma2),
    }
}

fn order_statistic_error(
    groups: &[(f64, usize)],
    n: usize,
    constellation: &Constellation,
    sigma2: f64,
    tol: Tolerance,
) -> Result<AntennaError> {
    let nulls = NullClasses::new(groups, sigma2);
    let mags = magnitude_groups(constellation);
    let order = constellation.order() as f64;
    let mut components = vec![0.0; mags.len()];
    for (k, &(e, count)) in groups.iter().enumerate() {
        let s2 = 0.5 * e * sigma2;
        let s = s2.sqrt();
        for (slot, &(a, _)) in components.iter_mut().zip(&mags) {
            let nu = e * a;
            let integrand = |v: f64| rice_pdf(v, nu, s2) * nulls.exceed(v, k);
            let p = integrate(integrand, (nu - 12.0 * s).max(0.0), nu + 12.0 * s, tol)?;
            *slot += count as f64 / n as f64 * p;
        }
    }
    let p_a: f64 = components
        .iter()
        .zip(&mags)
        .map(|(p, &(_, c))| p * c as f64 / order)
        .sum();
    let clamped = !(0.0..=1.0).contains(&p_a);
    let p_a = p_a.clamp(0.0, 1.0);
    Ok(AntennaError {
        p_a,
        p_tilde_a: 1.0 - (1.0 - p_a).sqrt(),
        components,
        clamped,
    })
}

/// Largest crossing of `d` on `[lo, hi]`, scanned on 512 points then bisected.
fn largest_crossing<F: Fn(f64) -> f64>(d: F, lo: f64, hi: f64) -> Crossing {
    const SCAN: usize = 512;
    let xs: Vec<f64> = (0..SCAN).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / SCAN as f64).collect();
    let ds: Vec<f64> = xs.iter().map(|&x| d(x)).collect();
    // both log-densities can underflow together (NaN difference); such points are skipped
    let sign = |v: f64| if v.is_nan() { 0 } else if v > 0.0 { 1 } else { -1 };
    let mut last: Option<(usize, usize)> = None;
    let mut prev: Option<usize> = None;
    for (i, &v) in ds.iter().enumerate() {
        if sign(v) == 0 {
            continue;
        }
        if let Some(p) = prev {
            if sign(ds[p]) != sign(v) {
                last = Some((p, i));
            }
        }
        prev = Some(i);
    }
    let Some((i, k)) = last else {
        let positive = ds.iter().filter(|v| !v.is_nan()).all(|&v| v > 0.0);
        return if positive { Crossing::SignalDominates } else { Crossing::NullDominates };
    };
    let (mut a, mut b) = (xs[i], xs[k]);
    let sa = sign(ds[i]);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if sign(d(m)) == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Crossing::At(0.5 * (a + b))
}

enum Crossing {
    At(f64),
    SignalDominates,
    NullDominates,
}

fn intersection_error(groups: &[(f64, usize)], n: usize, constellation: &Constellation, sigma2: f64) -> Result<AntennaError> {
    let mean_energy = groups.iter().map(|&(e, c)| e * c as f64).sum::<f64>() / n as f64;
    let sd2 = 0.5 * mean_energy * sigma2;
    let sd = sd2.sqrt();
    let nn = n as u64;
    let mut components = Vec::with_capacity(constellation.mu().len());
    for &mu in constellation.mu() {
        let mu_bar = mean_energy * mu;
        let upper = mu_bar + 10.0 * sd;
        let signal = |v: f64| ln_order_pdf(v, nn, nn, mu_bar, sd2);
        let mut sum = 0.0;
        for j in 1..nn {
            let d = |v: f64| signal(v) - ln_order_pdf(v, j, nn, 0.0, sd2);
            // ∫₀^{v_t} of the top order-statistic density is F(v_t)^n
            sum += match largest_crossing(d, 0.0, upper) {
                Crossing::At(vt) => folded_cdf_sf(vt, mu_bar, sd2).0.powi(n as i32),
                Crossing::SignalDominates => 0.0,
                Crossing::NullDominates => folded_cdf_sf(upper, mu_bar, sd2).0.powi(n as i32),
            };
        }
        components.push(sum / (n - 1) as f64);
    }
    let raw = 2.0 / constellation.per_axis() as f64 * components.iter().sum::<f64>();
    let p_tilde_a = raw.clamp(0.0, 1.0);
    let p_a_raw = 2.0 * p_tilde_a - p_tilde_a * p_tilde_a;
    let p_a = p_a_raw.clamp(0.0, 1.0);
    Ok(AntennaError {
        p_a,
        p_tilde_a,
        components,
        clamped: raw != p_tilde_a || p_a_raw != p_a,
    })
}

/// Probability that MRRC misses the (antenna, symbol) pair, without the
/// independence assumption between index and slicing errors.
fn joint_error(
    groups: &[(f64, usize)],
    n: usize,
    constellation: &Constellation,
    sigma2: f64,
    tol: Tolerance,
) -> Result<f64> {
    let nulls = NullClasses::new(groups, sigma2);
    let order = constellation.order();
    let gamma_c = constellation.gamma();
    let top = constellation.mu().last().copied().unwrap_or(gamma_c);
    // the cell and |g| are symmetric under axis reflections, so the positive quadrant suffices
    let quadrant: Vec<Complex> = constellation
        .points()
        .iter()
        .copied()
        .filter(|p| p.re > 0.0 && p.im > 0.0)
        .collect();
    let mut total = 0.0;
    for (k, &(e, count)) in groups.iter().enumerate() {
        let s = (0.5 * e * sigma2).sqrt();
        let half = gamma_c * e / s;
        let edge = |level: f64| {
            let hi = if level >= top - 1e-12 { 12.0 } else { half.min(12.0) };
            ((-half).max(-12.0), hi)
        };
        let mut miss = 0.0;
        for x in &quadrant {
            let (u0, u1) = edge(x.re);
            let (w0, w1) = edge(x.im);
            let (cx, cy) = (e * x.re, e * x.im);
            let outer = |u: f64| {
                let gx = cx + s * u;
                let inner = |w: f64| {
                    let gy = cy + s * w;
                    (-0.5 * w * w).exp() * nulls.exceed(gx.hypot(gy), k)
                };
                integrate(inner, w0, w1, tol.scaled(0.01)).map(|v| v * (-0.5 * u * u).exp())
            };
            miss += try_integrate(outer, u0, u1, tol)? / (2.0 * PI);
        }
        let p_s = qam_ser(e / sigma2, order)?;
        total += count as f64 / n as f64 * (p_s + miss / quadrant.len() as f64);
    }
    Ok(total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub antenna_model: AntennaErrorModel,
    /// Also evaluate the exact pair-error probability (2-D quadrature per point).
    pub joint: bool,
    pub tolerance: Tolerance,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            antenna_model: AntennaErrorModel::OrderStatistic,
            joint: true,
            tolerance: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SerBreakdown {
    /// Per-stream SNR (linear).
    pub gamma: f64,
    pub sigma2: f64,
    /// Per-axis noise variance after matched filtering, `‖h‖²σ²/2` (mean column).
    pub sigma_dot2: f64,
    pub p_s: f64,
    pub p_a: f64,
    pub p_tilde_a: f64,
    /// `p_a + p_s − p_a·p_s`.
    pub p_e: f64,
    /// Exact pair-error probability, when requested.
    pub p_e_joint: Option<f64>,
    pub components: Vec<f64>,
    pub clamped: bool,
    /// Largest normalized off-diagonal Gram entry; the analysis assumes 0.
    pub orthogonality_residual: f64,
    pub antenna_model: AntennaErrorModel,
}

/// Symbol, antenna and total error probabilities of SM with MRRC.
pub fn total_ser(
    h: &ChannelMatrix,
    constellation: &Constellation,
    gamma: f64,
    options: &AnalysisOptions,
) -> Result<SerBreakdown> {
    let sigma2 = h.noise_for_snr(gamma)?;
    let groups = check_channel(h)?;
    let n = h.dim();
    let order = constellation.order();
    let mut p_s = 0.0;
    for &(e, c) in &groups {
        p_s += c as f64 / n as f64 * qam_ser(e / sigma2, order)?;
    }
    let ant = antenna_error_prob(h, constellation, gamma, options.antenna_model, options.tolerance)?;
    let p_e_joint = if options.joint {
        Some(joint_error(&groups, n, constellation, sigma2, options.tolerance)?)
    } else {
        None
    };
    let mean_energy = groups.iter().map(|&(e, c)| e * c as f64).sum::<f64>() / n as f64;
    Ok(SerBreakdown {
        gamma,
        sigma2,
        sigma_dot2: 0.5 * mean_energy * sigma2,
        p_s,
        p_a: ant.p_a,
        p_tilde_a: ant.p_tilde_a,
        p_e: ant.p_a + p_s - ant.p_a * p_s,
        p_e_joint,
        components: ant.components,
        clamped: ant.clamped,
        orthogonality_residual: h.max_column_coherence(),
        antenna_model: options.antenna_model,
    })
}

/// `P(x → ẋ) = Q(√(‖H(x − ẋ)‖²/2σ²))`.
pub fn pep(h: &ChannelMatrix, x: &[Complex], x_dot: &[Complex], sigma2: f64) -> Result<f64> {
    ensure_positive("noise power", sigma2)?;
    let n = h.dim();
    if x.len() != n || x_dot.len() != n {
        return Err(Error::invalid(format!(
            "transmit vectors must have length {n}, got {} and {}",
            x.len(),
            x_dot.len()
        )));
    }
    let diff = nalgebra::DVector::from_iterator(n, x.iter().zip(x_dot).map(|(a, b)| a - b));
    let d2 = (h.entries() * diff).norm_squared();
    Ok(q_function((d2 / (2.0 * sigma2)).sqrt()))
}

/// Largest SM pair count accepted by [`union_bound`].
pub const UNION_BOUND_PAIR_BUDGET: usize = 1 << 26;

/// ML union bound `(1/N)·Σ_{a≠b} P(x_a → x_b)` over all SM transmit vectors.
pub fn union_bound(h: &ChannelMatrix, constellation: &Constellation, sigma2: f64) -> Result<f64> {
    ensure_positive("noise power", sigma2)?;
    let n = h.dim();
    let hyp = n * constellation.order();
    if hyp.saturating_mul(hyp) > UNION_BOUND_PAIR_BUDGET {
        return Err(Error::invalid(format!("union bound over {hyp} hypotheses exceeds the pair budget")));
    }
    let gram = h.gram();
    let pts = constellation.points();
    let mut sum = 0.0;
    for l in 0..n {
        for lp in 0..n {
            let (el, elp, cross) = (gram[(l, l)].re, gram[(lp, lp)].re, gram[(l, lp)]);
            for (a, s) in pts.iter().enumerate() {
                for (b, sp) in pts.iter().enumerate() {
                    if l == lp && a == b {
                        continue;
                    }
                    // ‖h_l s − h_l' s'‖²
                    let d2 = s.norm_sqr() * el + sp.norm_sqr() * elp - 2.0 * (s.conj() * sp * cross).re;
                    sum += q_function((d2.max(0.0) / (2.0 * sigma2)).sqrt());
                }
            }
        }
    }
    Ok(sum / hyp as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel, GainModel, SmLevel, SystemConfig};
    use crate::geometry::{optimal_sa_spacing, ArrayGeometry};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn optimal_channel(m: usize) -> ChannelMatrix {
        let pitch = optimal_sa_spacing(1.0, 1e12, m, 1.0).unwrap();
        let mut cfg = SystemConfig::new(ArrayGeometry::new(m, 1, 150e-6, pitch, 1.0).unwrap(), 1e12);
        cfg.gain_model = GainModel::Approx;
        build_channel(&cfg).unwrap()
    }

    fn identity(n: usize) -> ChannelMatrix {
        ChannelMatrix::from_entries(DMatrix::identity(n, n), SmLevel::Subarray).unwrap()
    }

    #[test]
    fn q_function_reference_values() {
        for &(x, want) in &[
            (0.0, 0.5),
            (1.0, 0.15865525393145707),
            (3.0, 0.0013498980316300933),
            (5.0, 2.866515718791933e-07),
            (8.0, 6.22096057427174e-16),
        ] {
            assert_relative_eq!(q_function(x), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn bessel_reference_values() {
        for &(x, want) in &[
            (0.0, 1.0),
            (1e-3, 0.9990007495835156),
            (0.5, 0.64503527044915),
            (1.0, 0.46575960759364043),
            (5.0, 0.18354081260932834),
            (15.0, 0.1038995314488227),
            (29.9, 0.07326921904600191),
            (30.1, 0.07302329413106094),
            (50.0, 0.056561626647454184),
            (100.0, 0.03994437929909668),
            (1e3, 0.012617240455891257),
            (1e5, 0.0012615678379767766),
        ] {
            assert_relative_eq!(bessel_i0e(x), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn qam_ser_cases() {
        assert!(qam_ser(1e6, 16).unwrap() < 1e-300);
        assert_relative_eq!(qam_ser(0.0, 16).unwrap(), 0.9375, epsilon = 1e-15);
        assert_eq!(qam_ser_union_bound(0.0, 16).unwrap(), 1.0);
        assert!(qam_ser(-1.0, 16).is_err());
        assert!(qam_ser(1.0, 8).is_err());
        // the bound exceeds the exact value by the factor 1/(1 − 1/√|X|) to leading order
        let g = 10f64.powf(2.5);
        let ratio = qam_ser_union_bound(g, 16).unwrap() / qam_ser(g, 16).unwrap();
        assert_relative_eq!(ratio, 4.0 / 3.0, max_relative = 1e-4);
    }

    #[test]
    fn folded_normal_cases() {
        let s2 = 1.7;
        assert_relative_eq!(folded_normal_pdf(0.0, 0.0, s2).unwrap(), 2.0 / (2.0 * PI * s2).sqrt(), max_relative = 1e-15);
        let v = folded_normal_pdf(3.0, 3.0, 1.0).unwrap();
        assert_relative_eq!(v, (1.0 + (-18f64).exp()) / (2.0 * PI).sqrt(), max_relative = 1e-15);
        assert!((v - 0.39894).abs() < 1e-5);
        for mu in [0.0, 0.7, 4.0] {
            let total = integrate(|v| folded_pdf(v, mu, s2), 0.0, mu + 12.0 * s2.sqrt(), Tolerance::default()).unwrap();
            assert!((total - 1.0).abs() < 1e-9);
            let (c, s) = folded_cdf_sf(1.3, mu, s2);
            assert_relative_eq!(c + s, 1.0, epsilon = 1e-15);
        }
        assert!(folded_normal_pdf(-1.0, 0.0, 1.0).is_err());
        assert!(folded_normal_cdf(1.0, 0.0, 0.0).is_err());
        assert_eq!(folded_normal_cdf(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(folded_normal_sf(3.0, 0.0, 1.0).unwrap(), 2.0 * q_function(3.0), max_relative = 1e-12);
    }

    #[test]
    fn order_statistics_normalize() {
        for n in 1..=16u64 {
            for mu in [0.0, 2.0] {
                for j in 1..=n {
                    let f = |v: f64| order_statistic_pdf(v, j, n, mu, 1.0).unwrap();
                    let total = integrate(f, 0.0, mu + 14.0, Tolerance::default()).unwrap();
                    assert!((total - 1.0).abs() < 1e-8, "n={n} j={j} mu={mu}: {total}");
                }
            }
        }
        assert_relative_eq!(
            order_statistic_pdf(0.8, 1, 1, 0.3, 2.0).unwrap(),
            folded_normal_pdf(0.8, 0.3, 2.0).unwrap(),
            max_relative = 1e-14
        );
        assert!(order_statistic_pdf(1.0, 0, 3, 0.0, 1.0).is_err());
        assert!(order_statistic_pdf(1.0, 4, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn exchangeability_identity() {
        for n in [2u64, 5, 16] {
            for &v in &[0.05, 0.4, 1.0, 2.5, 4.0] {
                let mix: f64 = (1..=n).map(|j| order_statistic_pdf(v, j, n, 1.2, 0.8).unwrap()).sum::<f64>() / n as f64;
                let direct = folded_normal_pdf(v, 1.2, 0.8).unwrap();
                assert!((mix - direct).abs() < 1e-9 * direct.max(1.0), "n={n} v={v}");
            }
        }
    }

    #[test]
    fn rice_pdf_normalizes_and_matches_rayleigh() {
        for &(nu, s2) in &[(0.0, 1.0), (1.0, 0.5), (40.0, 2.0), (3e3, 1.0)] {
            let s: f64 = f64::sqrt(s2);
            let total = integrate(|v| rice_pdf(v, nu, s2), (nu - 12.0 * s).max(0.0), nu + 12.0 * s, Tolerance::default()).unwrap();
            assert!((total - 1.0).abs() < 1e-9, "nu={nu}: {total}");
        }
        let v: f64 = 1.3;
        assert_relative_eq!(rice_pdf(v, 0.0, 0.7), v / 0.7 * (-v * v / 1.4).exp(), max_relative = 1e-14);
    }

    #[test]
    fn antenna_error_limits() {
        let h = optimal_channel(4);
        let c = Constellation::new(16).unwrap();
        let tol = Tolerance::default();
        let high = antenna_error_prob(&h, &c, 1e4, AntennaErrorModel::OrderStatistic, tol).unwrap();
        assert!(high.p_a < 1e-30);
        let paper_high = antenna_error_prob(&h, &c, 1e4, AntennaErrorModel::PaperIntersection, tol).unwrap();
        assert!(paper_high.p_a < 1e-12, "{paper_high:?}");

        // no usable signal: every antenna wins with probability 1/n
        let h = identity(4);
        let c = Constellation::new(4).unwrap();
        let low = antenna_error_prob(&h, &c, 1e-4, AntennaErrorModel::OrderStatistic, tol).unwrap();
        assert!(low.p_a >= 1.0 - 0.25 - 0.02);
        assert!(low.p_a <= 0.75 + 1e-9);
        assert!(antenna_error_prob(&identity(1), &c, 1.0, AntennaErrorModel::OrderStatistic, tol).is_err());
    }

    #[test]
    fn two_antenna_closed_form() {
        // for n = 2 and equal norms, P(|g_null| > |g_sig|) = ½·exp(−ν²/4s²)
        let h = identity(2);
        let c = Constellation::new(4).unwrap();
        for gamma in [0.5, 3.0, 10.0] {
            let p = antenna_error_prob(&h, &c, gamma, AntennaErrorModel::OrderStatistic, Tolerance::default()).unwrap();
            let s2 = 0.5 * h.noise_for_snr(gamma).unwrap();
            let want = 0.5 * (-1.0 / (4.0 * s2)).exp();
            assert_relative_eq!(p.p_a, want, max_relative = 1e-8);
            assert_relative_eq!(2.0 * p.p_tilde_a - p.p_tilde_a.powi(2), p.p_a, max_relative = 1e-12);
        }
    }

    #[test]
    fn breakdown_identities() {
        let h = optimal_channel(2);
        let c = Constellation::new(16).unwrap();
        let opts = AnalysisOptions::default();
        let mut prev: Option<SerBreakdown> = None;
        for db in [-6.0, -2.0, 2.0, 6.0, 10.0] {
            let b = total_ser(&h, &c, 10f64.powf(db / 10.0), &opts).unwrap();
            assert!((b.p_e - (b.p_a + b.p_s - b.p_a * b.p_s)).abs() <= 1e-15);
            let joint = b.p_e_joint.unwrap();
            assert!(joint >= b.p_s.max(b.p_a) - 1e-12);
            assert!(joint <= b.p_s + b.p_a + 1e-12);
            for p in [b.p_s, b.p_a, b.p_e, joint] {
                assert!((0.0..=1.0).contains(&p));
            }
            assert!(b.orthogonality_residual < 1e-10);
            if let Some(p) = prev {
                assert!(b.p_s <= p.p_s && b.p_a <= p.p_a && b.p_e <= p.p_e);
                assert!(joint <= p.p_e_joint.unwrap());
            }
            prev = Some(b);
        }
    }

    #[test]
    fn tolerance_sensitivity() {
        let h = optimal_channel(4);
        let c = Constellation::new(16).unwrap();
        let a = total_ser(&h, &c, 0.5, &AnalysisOptions::default()).unwrap();
        let tight = AnalysisOptions {
            tolerance: Tolerance::default().scaled(0.5),
            ..AnalysisOptions::default()
        };
        let b = total_ser(&h, &c, 0.5, &tight).unwrap();
        assert!((a.p_a - b.p_a).abs() <= 1e-6 * a.p_a);
        assert!((a.p_e_joint.unwrap() - b.p_e_joint.unwrap()).abs() <= 1e-6 * a.p_e_joint.unwrap());
    }

    #[test]
    fn pep_cases() {
        let h = optimal_channel(2);
        let x = [Complex::new(0.5, 0.5), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)];
        let y = [Complex::new(0.0, 0.0), Complex::new(0.5, -0.5), Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)];
        assert_eq!(pep(&h, &x, &x, 1.0).unwrap(), 0.5);
        assert!(pep(&h, &x, &y, 1e-30).unwrap() < 1e-300);
        assert!(pep(&h, &x, &y[..3], 1.0).is_err());
        let c = Constellation::new(4).unwrap();
        assert!(union_bound(&h, &c, 1e-30).unwrap() < 1e-300);
    }

    proptest! {
        #[test]
        fn qam_ser_is_monotone(g in 0.0f64..1e3, o in 0usize..4) {
            let order = [4, 16, 64, 256][o];
            prop_assert!(qam_ser(g * 1.05 + 1e-3, order).unwrap() <= qam_ser(g, order).unwrap());
            prop_assert!(qam_ser(g, order).unwrap() <= qam_ser_union_bound(g, order).unwrap() + 1e-15);
        }

        #[test]
        fn bessel_is_positive_and_decreasing(x in 0.0f64..1e4) {
            let a = bessel_i0e(x);
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(bessel_i0e(x * 1.01 + 1e-6) <= a);
        }
    }
}
