use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TrustError;

/// Units per 1.0.
pub const SCALE: u32 = 10_000;

/// A score in `[0, 1]` held as an exact count of ten-thousandths, so that
/// repeated deductions land exactly on zero.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Score(u32);

impl Score {
    pub const ZERO: Score = Score(0);
    pub const ONE: Score = Score(SCALE);

    pub fn from_units(units: u32) -> Result<Score, TrustError> {
        if units <= SCALE {
            Ok(Score(units))
        } else {
            Err(TrustError::InvalidScore(format!("{units} units exceeds 1.0")))
        }
    }

    /// Nearest representable score; `None` outside `[0, 1]` or non-finite.
    pub fn from_f64(v: f64) -> Option<Score> {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return None;
        }
        Some(Score((v * SCALE as f64).round() as u32))
    }

    pub fn units(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// `self - d`, clamped at zero.
    pub fn deduct(self, d: Score) -> Score {
        Score(self.0.saturating_sub(d.0))
    }
}

impl FromStr for Score {
    type Err = TrustError;

    /// Accepts plain decimals (`1`, `0.99`, `.5`) with at most four
    /// significant fractional digits.
    fn from_str(s: &str) -> Result<Score, TrustError> {
        let bad = || TrustError::InvalidScore(format!("{s:?} is not a decimal in [0, 1]"));
        let (int, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
        if (int.is_empty() && frac.is_empty())
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() > 4 {
            return Err(TrustError::InvalidScore(format!(
                "{s:?} has more than 4 fractional digits"
            )));
        }
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_units: u64 = format!("{frac:0<4}").parse().map_err(|_| bad())?;
        let units = int
            .checked_mul(SCALE as u64)
            .and_then(|u| u.checked_add(frac_units))
            .ok_or_else(bad)?;
        u32::try_from(units).map_err(|_| bad()).and_then(Score::from_units)
    }
}

impl fmt::Display for Score {
    /// Shortest decimal with at least one fractional digit: `1.0`, `0.99`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.0 / SCALE;
        let frac = format!("{:04}", self.0 % SCALE);
        let frac = frac.trim_end_matches('0');
        write!(f, "{int}.{}", if frac.is_empty() { "0" } else { frac })
    }
}

impl fmt::Debug for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Num(f64),
            Text(String),
        }
        match Wire::deserialize(d)? {
            Wire::Num(v) => {
                Score::from_f64(v).ok_or_else(|| serde::de::Error::custom(format!("{v} is not a score in [0, 1]")))
            }
            Wire::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_forms() {
        for (units, text) in [
            (10_000, "1.0"),
            (9_900, "0.99"),
            (9_000, "0.9"),
            (0, "0.0"),
            (5, "0.0005"),
        ] {
            assert_eq!(Score::from_units(units).unwrap().to_string(), text);
        }
    }

    #[test]
    fn parse_accepts_common_spellings() {
        assert_eq!("1".parse::<Score>().unwrap(), Score::ONE);
        assert_eq!("1.0000".parse::<Score>().unwrap(), Score::ONE);
        assert_eq!(".5".parse::<Score>().unwrap().units(), 5_000);
        assert_eq!("0.95".parse::<Score>().unwrap().units(), 9_500);
    }

    #[test]
    fn parse_rejects_out_of_range_and_junk() {
        for s in ["1.5", "-0.1", "", ".", "0.00001", "1e-2", "NaN", "2"] {
            assert!(s.parse::<Score>().is_err(), "{s}");
        }
    }

    #[test]
    fn deduction_clamps_at_zero() {
        let s = "0.005".parse::<Score>().unwrap();
        assert_eq!(s.deduct("0.02".parse().unwrap()), Score::ZERO);
    }

    #[test]
    fn hundred_deductions_reach_exact_zero() {
        let d: Score = "0.01".parse().unwrap();
        let mut s = Score::ONE;
        for n in 1..=100u32 {
            s = s.deduct(d);
            // oracle: integer arithmetic on hundredths, rendered independently
            let hundredths = 100 - n;
            let expected = match hundredths {
                100 => "1.0".to_string(),
                h if h % 10 == 0 => format!("0.{}", h / 10),
                h => format!("0.{h:02}"),
            };
            assert_eq!(s.to_string(), expected);
        }
        assert!(s.is_zero());
    }

    #[test]
    fn json_accepts_number_or_string() {
        let a: Score = serde_json::from_str("0.99").unwrap();
        let b: Score = serde_json::from_str("\"0.99\"").unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), "0.99");
        assert!(serde_json::from_str::<Score>("1.2").is_err());
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(units in 0u32..=SCALE) {
            let s = Score::from_units(units).unwrap();
            prop_assert_eq!(s.to_string().parse::<Score>().unwrap(), s);
        }
    }
}
