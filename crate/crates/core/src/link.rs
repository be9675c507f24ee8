//! Bit-level Monte Carlo model of the digital link.
//!
//! quantize -> bits -> QAM -> fading + AWGN -> equalize -> hard
//! demodulation -> bits -> levels. Also the training-time perturbation
//! operators: BSC flips with BER matching and nested-dropout masks.
//!
//! QAM labeling is square QAM with an independent reflected Gray code on
//! each rail. With `P = 2^(m/2)` levels per rail, position `i` (0 at the
//! most positive amplitude) carries label `i ^ (i >> 1)` and amplitude
//! `((P - 1) - 2i) * scale`. The first `m/2` bits of a symbol go to the I
//! rail, the rest to Q, both big-endian. See the README for the table.

use std::path::Path;

use num_complex::Complex64;
use rand::distr::{Bernoulli, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ber::ModOrder;
use crate::error::{domain, Error, Result};
use crate::importance::ImportanceProfile;
use crate::matching::ChannelState;
use crate::solver::AllocationPlan;

/// Random streams. Each stochastic stage of each feature draws from its own
/// ChaCha stream so results do not depend on evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Features = 1,
    ChannelPhase = 2,
    Noise = 3,
    Bsc = 4,
    BerDraw = 5,
    Dropout = 6,
    Source = 7,
}

pub fn stream_rng(seed: u64, feature: usize, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((feature as u64) << 8) | stage as u64);
    rng
}

/// Scalar quantizer with hard nearest-level decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    levels: Vec<f64>,
    n_bits: u32,
}

impl Quantizer {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        let len = levels.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(domain(format!(
                "quantizer needs 2^N_b >= 2 levels, got {len}"
            )));
        }
        if levels.iter().any(|l| !l.is_finite()) || levels.windows(2).any(|p| p[0] >= p[1]) {
            return Err(domain("quantizer levels must be finite and strictly increasing"));
        }
        Ok(Self {
            n_bits: len.trailing_zeros(),
            levels,
        })
    }

    /// `(i - (2^N_b - 1)/2) * step`, e.g. `{-1.5, -0.5, 0.5, 1.5} * step`.
    pub fn uniform(n_bits: u32, step: f64) -> Result<Self> {
        if !(1..=16).contains(&n_bits) || !(step > 0.0 && step.is_finite()) {
            return Err(domain(format!(
                "uniform quantizer needs 1 <= N_b <= 16 and step > 0, got {n_bits}, {step}"
            )));
        }
        let count = 1usize << n_bits;
        let mid = (count as f64 - 1.0) / 2.0;
        Self::new((0..count).map(|i| (i as f64 - mid) * step).collect())
    }

    /// One level per line; `#` comments and blank lines are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut levels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            levels.push(line.parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("`{line}`: {e}"),
            })?);
        }
        Self::new(levels)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    /// Index of the nearest level. A value exactly on a midpoint goes to the
    /// lower index.
    pub fn quantize(&self, y: f64) -> usize {
        self.levels
            .windows(2)
            .take_while(|p| y > 0.5 * (p[0] + p[1]))
            .count()
    }

    pub fn dequantize(&self, index: usize) -> f64 {
        self.levels[index]
    }
}

/// Index-to-bits map applied before modulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitMapping {
    #[default]
    Natural,
    Gray,
}

pub fn gray_encode(i: usize) -> usize {
    i ^ (i >> 1)
}

pub fn gray_decode(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// Big-endian `n_bits` per index.
pub fn bits_from_levels(indices: &[usize], n_bits: u32, mapping: BitMapping) -> Vec<u8> {
    let mut bits = Vec::with_capacity(indices.len() * n_bits as usize);
    for &i in indices {
        let v = match mapping {
            BitMapping::Natural => i,
            BitMapping::Gray => gray_encode(i),
        };
        push_bits(&mut bits, v, n_bits);
    }
    bits
}

pub fn levels_from_bits(bits: &[u8], n_bits: u32, mapping: BitMapping) -> Result<Vec<usize>> {
    let w = n_bits as usize;
    if w == 0 || !bits.len().is_multiple_of(w) {
        return Err(Error::DimensionMismatch {
            what: "bit count (multiple of N_b)",
            expected: bits.len().next_multiple_of(w.max(1)),
            got: bits.len(),
        });
    }
    Ok(bits
        .chunks(w)
        .map(|c| {
            let v = read_bits(c);
            match mapping {
                BitMapping::Natural => v,
                BitMapping::Gray => gray_decode(v),
            }
        })
        .collect())
}

fn push_bits(out: &mut Vec<u8>, v: usize, n_bits: u32) {
    for b in (0..n_bits).rev() {
        out.push(((v >> b) & 1) as u8);
    }
}

fn read_bits(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

/// Amplitude step making the average symbol energy 1.
pub fn qam_scale(m: ModOrder) -> f64 {
    let p = m.rail_levels() as f64;
    (3.0 / (2.0 * (p * p - 1.0))).sqrt()
}

fn rail_amplitude(label: usize, levels: usize, scale: f64) -> f64 {
    let i = gray_decode(label);
    ((levels - 1) as f64 - 2.0 * i as f64) * scale
}

fn rail_label(x: f64, levels: usize, scale: f64) -> usize {
    let pos = ((levels - 1) as f64 - x / scale) / 2.0;
    let i = pos.round().clamp(0.0, (levels - 1) as f64) as usize;
    gray_encode(i)
}

/// Maps `m` bits per symbol onto the Gray-labelled square constellation.
pub fn qam_modulate(bits: &[u8], m: ModOrder) -> Result<Vec<Complex64>> {
    let bps = m.bits_per_symbol() as usize;
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::DimensionMismatch {
            what: "bit count (multiple of bits/symbol)",
            expected: bits.len().next_multiple_of(bps),
            got: bits.len(),
        });
    }
    let (half, levels, scale) = (bps / 2, m.rail_levels(), qam_scale(m));
    Ok(bits
        .chunks(bps)
        .map(|c| {
            Complex64::new(
                rail_amplitude(read_bits(&c[..half]), levels, scale),
                rail_amplitude(read_bits(&c[half..]), levels, scale),
            )
        })
        .collect())
}

/// Per-rail nearest-point decision.
pub fn qam_demodulate(symbols: &[Complex64], m: ModOrder) -> Vec<u8> {
    let bps = m.bits_per_symbol() as usize;
    let (half, levels, scale) = (bps as u32 / 2, m.rail_levels(), qam_scale(m));
    let mut bits = Vec::with_capacity(symbols.len() * bps);
    for s in symbols {
        push_bits(&mut bits, rail_label(s.re, levels, scale), half);
        push_bits(&mut bits, rail_label(s.im, levels, scale), half);
    }
    bits
}

/// All constellation points indexed by their `m`-bit label.
pub fn constellation(m: ModOrder) -> Vec<Complex64> {
    let bps = m.bits_per_symbol();
    let bits: Vec<u8> = (0..1usize << bps)
        .flat_map(|v| {
            let mut b = Vec::new();
            push_bits(&mut b, v, bps);
            b
        })
        .collect();
    qam_modulate(&bits, m).expect("aligned by construction")
}

/// Flat block-fading subchannel `y = h x + n`, `n ~ CN(0, sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingChannel {
    pub h: Complex64,
    pub noise_variance: f64,
}

impl FadingChannel {
    pub fn new(h: Complex64, noise_variance: f64) -> Result<Self> {
        if !(h.norm() > 0.0 && h.norm().is_finite()) {
            return Err(domain(format!("channel coefficient must be nonzero, got {h}")));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(domain(format!("noise variance must be > 0, got {noise_variance}")));
        }
        Ok(Self { h, noise_variance })
    }

    /// Unit-gain channel with phase `phase` and normalized SNR `gamma`.
    pub fn from_gamma(gamma: f64, phase: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(domain(format!("normalized SNR must be > 0, got {gamma}")));
        }
        Self::new(Complex64::from_polar(1.0, phase), 1.0 / gamma)
    }

    /// `|h|^2 / sigma^2`.
    pub fn gamma(&self) -> f64 {
        self.h.norm_sqr() / self.noise_variance
    }
}

/// One fading channel per subchannel of `ch`, with random phases.
pub fn channels_from_state(ch: &ChannelState, seed: u64) -> Result<Vec<FadingChannel>> {
    ch.gammas()
        .iter()
        .enumerate()
        .map(|(l, &g)| {
            let phase = stream_rng(seed, l, Stage::ChannelPhase).random_range(-std::f64::consts::PI..std::f64::consts::PI);
            FadingChannel::from_gamma(g, phase)
        })
        .collect()
}

/// Sends `symbols` at power `p` and zero-forcing equalizes.
/// Output is `sqrt(p) s + h^* n / |h|^2`.
pub fn transmit<R: Rng + ?Sized>(
    symbols: &[Complex64],
    p: f64,
    ch: &FadingChannel,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(domain(format!("transmit power must be >= 0, got {p}")));
    }
    let amp = p.sqrt();
    let sigma = (ch.noise_variance / 2.0).sqrt();
    let eq = ch.h.conj() / ch.h.norm_sqr();
    Ok(symbols
        .iter()
        .map(|&s| {
            let n = Complex64::new(
                sigma * rng.sample::<f64, _>(StandardNormal),
                sigma * rng.sample::<f64, _>(StandardNormal),
            );
            eq * (ch.h * s * amp + n)
        })
        .collect())
}

fn check_probability(p: f64, hi: f64, what: &str) -> Result<()> {
    if !(0.0..=hi).contains(&p) {
        return Err(domain(format!("{what} must lie in [0, {hi}], got {p}")));
    }
    Ok(())
}

/// i.i.d. flips with probability `flip_prob`.
pub fn bsc_perturb_with<R: Rng + ?Sized>(bits: &[u8], flip_prob: f64, rng: &mut R) -> Result<Vec<u8>> {
    check_probability(flip_prob, 0.5, "flip probability")?;
    let coin = Bernoulli::new(flip_prob).map_err(|e| domain(e.to_string()))?;
    Ok(bits.iter().map(|&b| b ^ coin.sample(rng) as u8).collect())
}

pub fn bsc_perturb(bits: &[u8], flip_prob: f64, seed: u64) -> Result<Vec<u8>> {
    bsc_perturb_with(bits, flip_prob, &mut stream_rng(seed, 0, Stage::Bsc))
}

/// `N` feature rows of equal bit length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFrame {
    rows: Vec<Vec<u8>>,
}

impl BitFrame {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != len) {
            return Err(Error::DimensionMismatch {
                what: "bits per feature",
                expected: len,
                got: r.len(),
            });
        }
        if rows.iter().flatten().any(|&b| b > 1) {
            return Err(domain("bit frame entries must be 0 or 1"));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn n_features(&self) -> usize {
        self.rows.len()
    }

    pub fn bits_per_feature(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// `n` i.i.d. Uniform(0, ber_max) draws, ascending.
pub fn draw_sorted_bers<R: Rng + ?Sized>(n: usize, ber_max: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(ber_max > 0.0 && ber_max <= 0.5) {
        return Err(domain(format!("ber_max must lie in (0, 0.5], got {ber_max}")));
    }
    let mut bers: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * ber_max).collect();
    bers.sort_by(f64::total_cmp);
    Ok(bers)
}

/// Feature `i` passes through BSC(mu_i) with ascending mu: the most
/// important feature sees the cleanest channel.
pub fn ber_matching_perturb(frame: &BitFrame, ber_max: f64, seed: u64) -> Result<(BitFrame, Vec<f64>)> {
    let bers = draw_sorted_bers(frame.n_features(), ber_max, &mut stream_rng(seed, 0, Stage::BerDraw))?;
    let rows = frame
        .rows
        .iter()
        .zip(&bers)
        .enumerate()
        .map(|(i, (row, &mu))| bsc_perturb_with(row, mu, &mut stream_rng(seed, i, Stage::Bsc)))
        .collect::<Result<_>>()?;
    Ok((BitFrame { rows }, bers))
}

/// `n_nd ~ U{1..N}` leading ones, then zeros.
pub fn nested_dropout_mask_with<R: Rng + ?Sized>(n_features: usize, rng: &mut R) -> Result<Vec<u8>> {
    if n_features == 0 {
        return Err(domain("nested dropout needs at least one feature"));
    }
    let keep = rng.random_range(1..=n_features);
    Ok((0..n_features).map(|i| u8::from(i < keep)).collect())
}

pub fn nested_dropout_mask(n_features: usize, seed: u64) -> Result<Vec<u8>> {
    nested_dropout_mask_with(n_features, &mut stream_rng(seed, 0, Stage::Dropout))
}

pub fn apply_mask(features: &[Vec<f64>], mask: &[u8]) -> Vec<Vec<f64>> {
    features
        .iter()
        .zip(mask)
        .map(|(row, &keep)| row.iter().map(|&x| if keep == 1 { x } else { 0.0 }).collect())
        .collect()
}

/// `n x l` standard normal features.
pub fn synthetic_features(n: usize, l: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|f| {
            let mut rng = stream_rng(seed, f, Stage::Features);
            (0..l).map(|_| rng.sample(StandardNormal)).collect()
        })
        .collect()
}

/// CSV matrix, one feature per row, no header.
pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkOptions {
    pub d_t: f64,
    pub mapping: BitMapping,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    /// Empirical BER of each retained feature, in plan order.
    pub per_feature_ber: Vec<f64>,
    pub bit_errors: Vec<u64>,
    pub bits_per_feature: usize,
    pub symbols_per_feature: Vec<usize>,
    pub transmission_term: f64,
    pub truncation_term: f64,
    pub empirical_j: f64,
    /// Dequantized features after the link; discarded features are zero.
    pub reconstructed: Vec<Vec<f64>>,
}

/// Runs every retained feature of `plan` through the full chain.
/// `channels[l]` is subchannel `l`; feature `f` uses
/// `channels[plan.matching.permutation[f]]`.
pub fn end_to_end_run(
    features: &[Vec<f64>],
    plan: &AllocationPlan,
    w: &ImportanceProfile,
    q: &Quantizer,
    channels: &[FadingChannel],
    opts: &LinkOptions,
) -> Result<LinkReport> {
    let n = w.n_features();
    for (what, got) in [
        ("feature rows", features.len()),
        ("plan features", plan.n_features()),
        ("fading channels", channels.len()),
    ] {
        if got != n {
            return Err(Error::DimensionMismatch { what, expected: n, got });
        }
    }
    let l = features.first().map_or(0, Vec::len);
    if let Some(r) = features.iter().find(|r| r.len() != l) {
        return Err(Error::DimensionMismatch {
            what: "elements per feature",
            expected: l,
            got: r.len(),
        });
    }
    let bits_per_feature = l * q.n_bits() as usize;
    let mut reconstructed = vec![vec![0.0; l]; n];
    let mut per_feature_ber = Vec::with_capacity(plan.k);
    let mut bit_errors = Vec::with_capacity(plan.k);
    let mut symbols_per_feature = Vec::with_capacity(plan.k);
    let mut transmission_term = 0.0;

    for (r, &f) in plan.retained().iter().enumerate() {
        let m = plan.orders.orders()[r];
        let p = plan.powers.as_slice()[r];
        let ch = &channels[plan.matching.permutation[f]];
        let indices: Vec<usize> = features[f].iter().map(|&y| q.quantize(y)).collect();
        let mut bits = bits_from_levels(&indices, q.n_bits(), opts.mapping);
        bits.resize(bits.len().next_multiple_of(m.bits_per_symbol() as usize), 0);

        let symbols = qam_modulate(&bits, m)?;
        let mut rng = stream_rng(opts.seed, f, Stage::Noise);
        let received = transmit(&symbols, p, ch, &mut rng)?;
        let gain = p.sqrt().max(f64::MIN_POSITIVE);
        let scaled: Vec<Complex64> = received.iter().map(|s| s / gain).collect();
        let mut decided = qam_demodulate(&scaled, m);
        decided.truncate(bits_per_feature);

        let errors = decided
            .iter()
            .zip(&bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        let ber = if bits_per_feature == 0 {
            0.0
        } else {
            errors as f64 / bits_per_feature as f64
        };
        for (slot, idx) in reconstructed[f]
            .iter_mut()
            .zip(levels_from_bits(&decided, q.n_bits(), opts.mapping)?)
        {
            *slot = q.dequantize(idx.min(q.levels().len() - 1));
        }
        transmission_term += w.weights()[f] * ber;
        per_feature_ber.push(ber);
        bit_errors.push(errors);
        symbols_per_feature.push(symbols.len());
    }
    let truncation_term = plan
        .truncated()
        .iter()
        .fold(0.0, |acc, &f| acc + w.weights()[f] * opts.d_t);
    Ok(LinkReport {
        per_feature_ber,
        bit_errors,
        bits_per_feature,
        symbols_per_feature,
        transmission_term,
        truncation_term,
        empirical_j: transmission_term + truncation_term,
        reconstructed,
    })
}

/// Uniform random bits through one channel at power `p`: (errors, bits).
pub fn simulate_ber(m: ModOrder, p: f64, gamma: f64, n_bits: usize, seed: u64) -> Result<(u64, u64)> {
    let bps = m.bits_per_symbol() as usize;
    let n_bits = n_bits.next_multiple_of(bps);
    let mut src = stream_rng(seed, 0, Stage::Source);
    let bits: Vec<u8> = (0..n_bits).map(|_| src.random::<bool>() as u8).collect();
    let ch = FadingChannel::from_gamma(gamma, src.random_range(-3.0..3.0))?;
    let rx = transmit(&qam_modulate(&bits, m)?, p, &ch, &mut stream_rng(seed, 0, Stage::Noise))?;
    let gain = p.sqrt().max(f64::MIN_POSITIVE);
    let scaled: Vec<Complex64> = rx.iter().map(|s| s / gain).collect();
    let decided = qam_demodulate(&scaled, m);
    let errors = decided.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
    Ok((errors, n_bits as u64))
}
