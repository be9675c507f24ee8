//! Approximate bit-error rate of Gray-coded square QAM on an equalized
//! fading subchannel.
//!
//! For a modulation order of `m` bits per symbol, allocated power `p` and
//! normalized SNR `gamma`, the BER is approximated as
//!
//! ```text
//! mu = a * erfc(sqrt(d p gamma)) + b * erfc(c * sqrt(d p gamma))
//! ```
//!
//! with `a`, `b`, `d` depending on `m` and `c = 3`. The function depends on
//! `p` and `gamma` only through the received SNR `p * gamma`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Square QAM order, expressed in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ModOrder {
    /// 4-QAM, 2 bits/symbol.
    Qam4,
    /// 16-QAM, 4 bits/symbol.
    Qam16,
    /// 64-QAM, 6 bits/symbol.
    Qam64,
}

impl ModOrder {
    pub const ALL: [ModOrder; 3] = [ModOrder::Qam4, ModOrder::Qam16, ModOrder::Qam64];

    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            2 => Ok(ModOrder::Qam4),
            4 => Ok(ModOrder::Qam16),
            6 => Ok(ModOrder::Qam64),
            other => Err(domain(format!(
                "modulation order must be 2, 4 or 6 bits/symbol, got {other}"
            ))),
        }
    }

    pub const fn bits_per_symbol(self) -> u32 {
        match self {
            ModOrder::Qam4 => 2,
            ModOrder::Qam16 => 4,
            ModOrder::Qam64 => 6,
        }
    }

    /// Points per I/Q rail, `sqrt(2^m)`.
    pub const fn rail_levels(self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }

    pub fn coefficients(self) -> BerCoefficients {
        coefficients(self)
    }
}

impl TryFrom<u32> for ModOrder {
    type Error = crate::Error;

    fn try_from(bits: u32) -> Result<Self> {
        ModOrder::from_bits(bits)
    }
}

impl From<ModOrder> for u32 {
    fn from(m: ModOrder) -> u32 {
        m.bits_per_symbol()
    }
}

impl fmt::Display for ModOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits_per_symbol())
    }
}

/// Constants of the BER approximation for one modulation order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Factor inside the second erfc term, shared by every order.
pub const SECOND_TERM_FACTOR: f64 = 3.0;

pub fn coefficients(m: ModOrder) -> BerCoefficients {
    let points = f64::from(1u32 << m.bits_per_symbol());
    let rail = points.sqrt();
    let denom = rail * rail.log2();
    BerCoefficients {
        a: (rail - 1.0) / denom,
        b: (rail - 2.0) / denom,
        c: SECOND_TERM_FACTOR,
        d: 3.0 / (2.0 * (points - 1.0)),
    }
}

impl BerCoefficients {
    /// BER at received SNR `snr = p * gamma`. `snr` must be non-negative.
    #[inline]
    pub fn ber_at_snr(&self, snr: f64) -> f64 {
        let x = (self.d * snr).sqrt();
        let mut v = self.a * erfc(x);
        if self.b != 0.0 {
            v += self.b * erfc(self.c * x);
        }
        v
    }

    /// Derivative of the BER with respect to power. Requires `p > 0`.
    #[inline]
    pub fn dber_dp(&self, p: f64, gamma: f64) -> f64 {
        let dg = self.d * gamma;
        let s = dg * p;
        let mut bracket = self.a * (-s).exp();
        if self.b != 0.0 {
            bracket += self.b * self.c * (-self.c * self.c * s).exp();
        }
        -(dg / (PI * p)).sqrt() * bracket
    }

    /// Value at zero power, `a + b`.
    pub fn ber_ceiling(&self) -> f64 {
        self.a + self.b
    }
}

/// Approximate BER of order `m` with power `p` on a subchannel with
/// normalized SNR `gamma`.
pub fn ber(m: ModOrder, p: f64, gamma: f64) -> Result<f64> {
    check_power(p)?;
    check_gamma(gamma)?;
    Ok(coefficients(m).ber_at_snr(p * gamma))
}

/// `ber` clamped to 0.5, usable as a bit-flip probability.
pub fn flip_probability(m: ModOrder, p: f64, gamma: f64) -> Result<f64> {
    ber(m, p, gamma).map(|v| v.min(0.5))
}

/// Partial derivative of `ber` with respect to `p`. Strictly negative.
pub fn ber_power_derivative(m: ModOrder, p: f64, gamma: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(domain(format!(
            "BER derivative is singular at p = 0; need p > 0, got {p}"
        )));
    }
    check_gamma(gamma)?;
    Ok(coefficients(m).dber_dp(p, gamma))
}

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

fn check_power(p: f64) -> Result<()> {
    if p >= 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("power must be finite and >= 0, got {p}")))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && !gamma.is_nan() {
        Ok(())
    } else {
        Err(domain(format!("normalized SNR must be > 0, got {gamma}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rtol: f64) -> bool {
        (a - b).abs() <= rtol * b.abs().max(f64::MIN_POSITIVE)
    }

    // Values computed with mpmath at 40 significant digits.
    const ERFC_REFERENCE: &[(f64, f64)] = &[
        (-10.0, 2.0),
        (-3.5, 1.9999992569016277),
        (-1.0, 1.842_700_792_949_715),
        (-0.5, 1.5204998778130465),
        (-0.001, 1.0011283787909692),
        (0.0, 1.0),
        (1e-08, 0.999_999_988_716_208_3),
        (0.001, 0.998_871_621_209_030_7),
        (0.1, 0.887_537_083_981_715),
        (0.5, 0.479_500_122_186_953_5),
        (1.0, 0.15729920705028513),
        (1.5, 0.033894853524689273),
        (2.0, 0.004_677_734_981_047_266),
        (2.5, 0.000_406_952_017_444_958_9),
        (3.0, 2.209_049_699_858_544e-5),
        (4.0, 1.541_725_790_028_002e-8),
        (5.0, 1.537_459_794_428_035e-12),
        (6.0, 2.1519736712498913e-17),
        (8.0, 1.1224297172982927e-29),
        (10.0, 2.088_487_583_762_545e-45),
    ];

    #[test]
    fn erfc_matches_reference_table() {
        for &(x, want) in ERFC_REFERENCE {
            let got = erfc(x);
            assert!(close(got, want, 1e-12), "erfc({x}) = {got:e}, want {want:e}");
        }
    }

    #[test]
    fn erfc_symmetry() {
        for i in -100..=100 {
            let x = f64::from(i) * 0.1;
            assert!((erfc(x) + erfc(-x) - 2.0).abs() < 1e-15, "x = {x}");
        }
        assert_eq!(erfc(0.0), 1.0);
    }

    #[test]
    fn coefficient_values() {
        let c2 = coefficients(ModOrder::Qam4);
        assert_eq!((c2.a, c2.b, c2.c, c2.d), (0.5, 0.0, 3.0, 0.5));
        let c4 = coefficients(ModOrder::Qam16);
        assert!(close(c4.a, 3.0 / 8.0, 1e-15));
        assert!(close(c4.b, 0.25, 1e-15));
        assert!(close(c4.d, 0.1, 1e-15));
        let c6 = coefficients(ModOrder::Qam64);
        assert!(close(c6.a, 7.0 / 24.0, 1e-15));
        assert!(close(c6.b, 0.25, 1e-15));
        assert!(close(c6.d, 3.0 / 126.0, 1e-15));
        for m in ModOrder::ALL {
            let c = coefficients(m);
            assert!(c.a > 0.0 && c.b >= 0.0 && c.d > 0.0 && c.c == 3.0);
        }
    }

    #[test]
    fn invalid_orders_rejected() {
        for bits in [0, 1, 3, 5, 8] {
            assert!(matches!(ModOrder::from_bits(bits), Err(crate::Error::Domain(_))));
        }
        assert_eq!(ModOrder::from_bits(4).unwrap(), ModOrder::Qam16);
    }

    #[test]
    fn ber_examples() {
        // 0.5 * erfc(1), mpmath
        let v = ber(ModOrder::Qam4, 2.0, 1.0).unwrap();
        assert!(close(v, 0.078_649_603_525_142_57, 1e-12), "{v}");
        assert_eq!(ber(ModOrder::Qam4, 0.0, 1.0).unwrap(), 0.5);
        assert!(ber(ModOrder::Qam16, 1e6, 1e6).unwrap() < 1e-300);
        assert!(close(ber(ModOrder::Qam16, 0.0, 1.0).unwrap(), 0.625, 1e-15));
        assert_eq!(flip_probability(ModOrder::Qam16, 0.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn ber_domain_errors() {
        assert!(ber(ModOrder::Qam4, -1e-9, 1.0).is_err());
        assert!(ber(ModOrder::Qam4, 1.0, 0.0).is_err());
        assert!(ber(ModOrder::Qam4, 1.0, -2.0).is_err());
        assert!(ber(ModOrder::Qam4, f64::NAN, 1.0).is_err());
        assert!(ber_power_derivative(ModOrder::Qam4, 0.0, 1.0).is_err());
        assert!(ber_power_derivative(ModOrder::Qam16, 1.0, 0.0).is_err());
    }

    fn log_grid() -> impl Iterator<Item = f64> {
        (-20..=20).map(|i| 10f64.powf(f64::from(i) / 10.0))
    }

    #[test]
    fn derivative_matches_central_difference() {
        for m in ModOrder::ALL {
            for snr in log_grid() {
                for gamma in [0.3, 1.0, 7.0] {
                    let p = snr / gamma;
                    let h = 1e-6 * p;
                    let fd = (ber(m, p + h, gamma).unwrap() - ber(m, p - h, gamma).unwrap())
                        / (2.0 * h);
                    let an = ber_power_derivative(m, p, gamma).unwrap();
                    assert!(an < 0.0);
                    assert!(close(an, fd, 1e-5), "m={m} p={p} g={gamma}: {an:e} vs {fd:e}");
                }
            }
        }
    }

    #[test]
    fn qam4_derivative_has_single_term() {
        for snr in log_grid() {
            let (p, gamma) = (snr, 1.0);
            let want = -0.5 * (0.5 * gamma / (PI * p)).sqrt() * (-0.5 * gamma * p).exp();
            let got = ber_power_derivative(ModOrder::Qam4, p, gamma).unwrap();
            assert!(close(got, want, 1e-12), "snr={snr}: {got:e} vs {want:e}");
        }
    }

    #[test]
    fn negative_derivative_decreases_with_power() {
        for m in ModOrder::ALL {
            let mut prev = f64::INFINITY;
            for snr in log_grid() {
                let t = -ber_power_derivative(m, snr, 1.0).unwrap();
                assert!(t < prev, "m={m} snr={snr}");
                prev = t;
            }
        }
    }

    #[test]
    fn ber_monotone_in_power_and_gamma() {
        for m in ModOrder::ALL {
            let mut prev_p = f64::INFINITY;
            let mut prev_g = f64::INFINITY;
            for x in (-20..=12).map(|i| 10f64.powf(f64::from(i) / 10.0)) {
                let by_p = ber(m, x, 2.0).unwrap();
                let by_g = ber(m, 2.0, x).unwrap();
                assert!(by_p < prev_p && by_g < prev_g, "m={m} x={x}");
                prev_p = by_p;
                prev_g = by_g;
            }
        }
    }

    #[test]
    fn ber_increases_with_order() {
        for snr in (0..=30).map(|i| 10f64.powf(f64::from(i) / 10.0)) {
            let b2 = ber(ModOrder::Qam4, snr, 1.0).unwrap();
            let b4 = ber(ModOrder::Qam16, snr, 1.0).unwrap();
            let b6 = ber(ModOrder::Qam64, snr, 1.0).unwrap();
            assert!(b2 < b4 && b4 < b6, "snr={snr}: {b2} {b4} {b6}");
        }
    }

    #[test]
    fn ber_depends_only_on_snr_product() {
        for m in ModOrder::ALL {
            for snr in log_grid() {
                let base = ber(m, snr, 1.0).unwrap();
                for scale in [0.01, 0.5, 3.0, 250.0] {
                    let v = ber(m, snr * scale, 1.0 / scale).unwrap();
                    assert!(close(v, base, 1e-12));
                }
            }
        }
    }

    #[test]
    fn serde_uses_bit_counts() {
        let v: Vec<ModOrder> = serde_json::from_str("[2,4,6]").unwrap();
        assert_eq!(v, ModOrder::ALL.to_vec());
        assert_eq!(serde_json::to_string(&ModOrder::Qam64).unwrap(), "6");
        assert!(serde_json::from_str::<ModOrder>("3").is_err());
    }
}
