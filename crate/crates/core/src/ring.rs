//! Arithmetic in `Z_2^64` and the fixed-point encoding layered on top.
//!
//! A [`RingElem`] is a 64-bit word; addition, subtraction and
//! multiplication wrap. Signed quantities use the two's-complement
//! interpretation, so `signed(x) = x` for `x < 2^63` and `x − 2^64`
//! otherwise. Fixed-point values carry `f` fractional bits
//! ([`FixedPointConfig::frac_bits`], default 13): a real `v` is stored as
//! `round(v · 2^f)`.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{Error, Result};
use crate::Party;

/// An element of `Z_2^64`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RingElem(pub u64);

impl RingElem {
    pub const ZERO: RingElem = RingElem(0);
    pub const ONE: RingElem = RingElem(1);

    /// Two's-complement signed interpretation.
    pub fn signed(self) -> i64 {
        self.0 as i64
    }

    pub fn from_signed(v: i64) -> RingElem {
        RingElem(v as u64)
    }

    /// Sign bit (bit 63).
    pub fn is_negative(self) -> bool {
        self.0 >> 63 == 1
    }

    /// Arithmetic right shift of the signed interpretation.
    pub fn asr(self, bits: u32) -> RingElem {
        RingElem(((self.0 as i64) >> bits) as u64)
    }

    pub fn wrapping_shl(self, bits: u32) -> RingElem {
        RingElem(self.0.wrapping_shl(bits))
    }
}

impl Add for RingElem {
    type Output = RingElem;
    fn add(self, rhs: RingElem) -> RingElem {
        RingElem(self.0.wrapping_add(rhs.0))
    }
}

impl AddAssign for RingElem {
    fn add_assign(&mut self, rhs: RingElem) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl Sub for RingElem {
    type Output = RingElem;
    fn sub(self, rhs: RingElem) -> RingElem {
        RingElem(self.0.wrapping_sub(rhs.0))
    }
}

impl SubAssign for RingElem {
    fn sub_assign(&mut self, rhs: RingElem) {
        self.0 = self.0.wrapping_sub(rhs.0);
    }
}

impl Mul for RingElem {
    type Output = RingElem;
    fn mul(self, rhs: RingElem) -> RingElem {
        RingElem(self.0.wrapping_mul(rhs.0))
    }
}

impl MulAssign for RingElem {
    fn mul_assign(&mut self, rhs: RingElem) {
        self.0 = self.0.wrapping_mul(rhs.0);
    }
}

impl Neg for RingElem {
    type Output = RingElem;
    fn neg(self) -> RingElem {
        RingElem(self.0.wrapping_neg())
    }
}

impl Sum for RingElem {
    fn sum<I: Iterator<Item = RingElem>>(iter: I) -> RingElem {
        iter.fold(RingElem::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Debug for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RingElem({})", self.0)
    }
}

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fixed-point layout plus the indicator gain constant.
///
/// The indicator construction `relu(1 − K·relu(−x))` is exact on the
/// `2^−f` grid only when `K > 2^f`, so that invariant is enforced here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedPointConfig {
    /// Fractional bits `f`.
    pub frac_bits: u32,
    /// Indicator gain `K`.
    pub indicator_gain: u64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            frac_bits: 13,
            indicator_gain: 1 << 14,
        }
    }
}

impl FixedPointConfig {
    pub fn new(frac_bits: u32, indicator_gain: u64) -> Result<FixedPointConfig> {
        let cfg = FixedPointConfig {
            frac_bits,
            indicator_gain,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frac_bits == 0 || self.frac_bits > 30 {
            return Err(Error::Config(format!(
                "fractional bits {} outside supported range 1..=30",
                self.frac_bits
            )));
        }
        if self.indicator_gain <= (1u64 << self.frac_bits) {
            return Err(Error::Config(format!(
                "indicator gain {} must exceed 2^{}",
                self.indicator_gain, self.frac_bits
            )));
        }
        Ok(())
    }

    /// One unit in the last place, as a real.
    pub fn ulp(&self) -> f64 {
        1.0 / (1u64 << self.frac_bits) as f64
    }

    /// Largest encodable magnitude (exclusive).
    pub fn max_magnitude(&self) -> f64 {
        (1u64 << (63 - self.frac_bits)) as f64
    }
}

/// Encode a real on the `2^−f` grid, rounding half away from zero.
pub fn encode(x: f64, cfg: &FixedPointConfig) -> Result<RingElem> {
    if !x.is_finite() || x.abs() >= cfg.max_magnitude() {
        return Err(Error::Range(format!(
            "{} not representable with {} fractional bits",
            x, cfg.frac_bits
        )));
    }
    let scaled = x * (1u64 << cfg.frac_bits) as f64;
    // f64::round rounds half-way cases away from zero.
    Ok(RingElem::from_signed(scaled.round() as i64))
}

/// Decode the signed interpretation back to a real.
pub fn decode(e: RingElem, cfg: &FixedPointConfig) -> f64 {
    e.signed() as f64 / (1u64 << cfg.frac_bits) as f64
}

/// Share-local truncation of one additive part of a `2f`-scaled product.
///
/// Party 0 arithmetic-shifts its part; party 1 negates, shifts, negates
/// again. The reconstructed sum lands within one ulp of the truncated
/// product (exactly one of the two low-bit remainders can carry).
pub fn truncate_part(part: RingElem, role: Party, cfg: &FixedPointConfig) -> RingElem {
    match role {
        Party::P0 => part.asr(cfg.frac_bits),
        Party::P1 => -((-part).asr(cfg.frac_bits)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn cfg() -> FixedPointConfig {
        FixedPointConfig::default()
    }

    #[test]
    fn encode_known_values() {
        assert_eq!(encode(1.0, &cfg()).unwrap().0, 8192);
        assert_eq!(encode(0.0, &cfg()).unwrap().0, 0);
        assert_eq!(encode(-1.0, &cfg()).unwrap().0, u64::MAX - 8191); // 2^64 - 8192
    }

    #[test]
    fn encode_rounds_half_away_from_zero() {
        // 2^-14 is exactly half an ulp at f = 13.
        let half = 1.0 / 16384.0;
        assert_eq!(encode(half, &cfg()).unwrap().0, 1);
        assert_eq!(encode(-half, &cfg()).unwrap(), RingElem::from_signed(-1));
    }

    #[test]
    fn encode_out_of_range() {
        assert!(matches!(encode(2.0_f64.powi(51), &cfg()), Err(Error::Range(_))));
        assert!(matches!(encode(f64::NAN, &cfg()), Err(Error::Range(_))));
    }

    #[test]
    fn decode_known_values() {
        assert_eq!(decode(RingElem(8192), &cfg()), 1.0);
        assert_eq!(decode(RingElem(u64::MAX - 8191), &cfg()), -1.0);
        assert_eq!(decode(RingElem(4096), &cfg()), 0.5);
    }

    #[test]
    fn config_rejects_small_gain() {
        assert!(FixedPointConfig::new(13, 1 << 13).is_err());
        assert!(FixedPointConfig::new(13, (1 << 13) + 1).is_ok());
    }

    #[test]
    fn truncate_unmasked_product() {
        // encode(1.0)^2 = 2^26 held entirely by P0.
        let part0 = RingElem(1 << 26);
        let part1 = RingElem::ZERO;
        let t0 = truncate_part(part0, Party::P0, &cfg());
        let t1 = truncate_part(part1, Party::P1, &cfg());
        assert_eq!(t0.0, 1 << 13);
        assert_eq!(t1.0, 0);
        assert_eq!(decode(t0 + t1, &cfg()), 1.0);
    }

    fn check_random_splits(value: i64, trials: usize, seed: u64) {
        let c = cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let want = value >> c.frac_bits; // oracle: arithmetic shift of the true sum
        for _ in 0..trials {
            let part0 = RingElem(rng.gen::<u64>());
            let part1 = RingElem::from_signed(value) - part0;
            let got = truncate_part(part0, Party::P0, &c) + truncate_part(part1, Party::P1, &c);
            let err = got.signed() - want;
            assert!(err.abs() <= 1, "split of {value}: err {err}");
        }
    }

    #[test]
    fn truncate_random_splits_positive() {
        check_random_splits(1 << 26, 100_000, 11);
    }

    #[test]
    fn truncate_random_splits_negative() {
        check_random_splits(-(1 << 26), 100_000, 12);
    }

    proptest! {
        #[test]
        fn add_then_decode_matches_reals(a in -1_000_000i64..1_000_000, b in -1_000_000i64..1_000_000) {
            let c = cfg();
            let x = a as f64 / 8192.0;
            let y = b as f64 / 8192.0;
            let s = encode(x, &c).unwrap() + encode(y, &c).unwrap();
            prop_assert_eq!(decode(s, &c), x + y);
        }

        #[test]
        fn encode_decode_roundtrip_on_grid(v in -(1i64 << 40)..(1i64 << 40)) {
            let c = cfg();
            let x = v as f64 / 8192.0;
            let e = encode(x, &c).unwrap();
            prop_assert_eq!(e.signed(), v);
            prop_assert_eq!(encode(decode(e, &c), &c).unwrap(), e);
        }

        #[test]
        fn truncated_product_within_one_ulp(
            a in -(1i64 << 24)..(1i64 << 24),
            b in -(1i64 << 24)..(1i64 << 24),
            mask: u64,
        ) {
            let c = cfg();
            let prod = RingElem::from_signed(a) * RingElem::from_signed(b);
            let p0 = RingElem(mask);
            let p1 = prod - p0;
            let got = truncate_part(p0, Party::P0, &c) + truncate_part(p1, Party::P1, &c);
            let want = prod.signed() >> c.frac_bits;
            prop_assert!((got.signed() - want).abs() <= 1);
        }
    }
}
