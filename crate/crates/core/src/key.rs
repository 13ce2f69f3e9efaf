//! Keys and the fixed-point decimal parser used for dataset values.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Number of fractional decimal digits kept by [`parse_fixed_point`].
pub const FIXED_POINT_DIGITS: u32 = 7;

/// Multiplier applied to decimal inputs.
pub const FIXED_POINT_SCALE: i64 = 10_i64.pow(FIXED_POINT_DIGITS);

/// An element of the ordered universe.
///
/// Ordering and equality look only at `raw`. `seq` identifies the element
/// (its arrival position) so duplicates can be told apart when auditing.
#[derive(Clone, Copy, Debug)]
pub struct Key {
    pub raw: i64,
    pub seq: u64,
}

/// Sentinel below every dataset key.
pub const MIN_KEY: Key = Key {
    raw: i64::MIN,
    seq: u64::MAX,
};

impl Key {
    pub const fn new(raw: i64, seq: u64) -> Self {
        Key { raw, seq }
    }

    pub fn is_sentinel(&self) -> bool {
        self.raw == i64::MIN && self.seq == u64::MAX
    }
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.raw == other.raw
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.raw.cmp(&other.raw)
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_sentinel() {
            return f.write_str("-inf");
        }
        let sign = if self.raw < 0 { "-" } else { "" };
        let abs = self.raw.unsigned_abs();
        let scale = FIXED_POINT_SCALE as u64;
        write!(f, "{sign}{}.{:07}", abs / scale, abs % scale)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseKeyError {
    #[error("line {line}: empty value")]
    Empty { line: usize },
    #[error("line {line}: malformed decimal {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: value {text:?} out of fixed-point range")]
    Overflow { line: usize, text: String },
}

impl ParseKeyError {
    pub fn line(&self) -> usize {
        match self {
            ParseKeyError::Empty { line }
            | ParseKeyError::Malformed { line, .. }
            | ParseKeyError::Overflow { line, .. } => *line,
        }
    }
}

/// Parses a plain decimal (`-12.345`, `+7`, `.5`) into a raw fixed-point
/// value scaled by 10^7. Digits past the seventh fractional place are
/// rounded half away from zero. Exponents, `inf` and `nan` are rejected.
///
/// `line` is only used to label errors.
pub fn parse_fixed_point(text: &str, line: usize) -> Result<i64, ParseKeyError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(ParseKeyError::Empty { line });
    }
    let malformed = || ParseKeyError::Malformed {
        line,
        text: s.to_string(),
    };
    let overflow = || ParseKeyError::Overflow {
        line,
        text: s.to_string(),
    };

    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(malformed());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(malformed());
    }

    let mut magnitude: i128 = 0;
    for b in int_part.bytes() {
        magnitude = magnitude * 10 + i128::from(b - b'0');
        if magnitude > i128::from(i64::MAX) {
            return Err(overflow());
        }
    }
    let frac = frac_part.as_bytes();
    for i in 0..FIXED_POINT_DIGITS as usize {
        let digit = frac.get(i).map_or(0, |b| i128::from(b - b'0'));
        magnitude = magnitude * 10 + digit;
    }
    if frac
        .get(FIXED_POINT_DIGITS as usize)
        .is_some_and(|&b| b >= b'5')
    {
        magnitude += 1;
    }

    let value = if negative { -magnitude } else { magnitude };
    // i64::MIN is reserved for the sentinel.
    if value <= i128::from(i64::MIN) || value > i128::from(i64::MAX) {
        return Err(overflow());
    }
    Ok(value as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_latitude() {
        assert_eq!(parse_fixed_point("37.7749", 1), Ok(377_749_000));
    }

    #[test]
    fn smallest_step() {
        assert_eq!(parse_fixed_point("-0.0000001", 1), Ok(-1));
        assert_eq!(parse_fixed_point("0.00000005", 1), Ok(1));
        assert_eq!(parse_fixed_point("0.00000004", 1), Ok(0));
    }

    #[test]
    fn integers_are_scaled() {
        assert_eq!(parse_fixed_point("42", 1), Ok(420_000_000));
        assert_eq!(parse_fixed_point("+3", 1), Ok(30_000_000));
        assert_eq!(parse_fixed_point(".5", 1), Ok(5_000_000));
        assert_eq!(parse_fixed_point("7.", 1), Ok(70_000_000));
    }

    #[test]
    fn rejects_scientific_notation() {
        let err = parse_fixed_point("1e3", 12).unwrap_err();
        assert!(matches!(err, ParseKeyError::Malformed { line: 12, .. }));
        assert!(err.to_string().contains("line 12"));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "-", ".", "1.2.3", "abc", "nan", "inf", "1,5", "--1"] {
            assert!(parse_fixed_point(bad, 3).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn range_limits() {
        assert!(parse_fixed_point("920000000000", 1).is_ok());
        assert!(parse_fixed_point("-920000000000", 1).is_ok());
        assert!(matches!(
            parse_fixed_point("922337203686", 1),
            Err(ParseKeyError::Overflow { .. })
        ));
        assert!(matches!(
            parse_fixed_point("99999999999999999999999", 9),
            Err(ParseKeyError::Overflow { line: 9, .. })
        ));
    }

    #[test]
    fn ordering_ignores_seq() {
        let a = Key::new(5, 0);
        let b = Key::new(5, 9);
        assert_eq!(a, b);
        assert!(MIN_KEY < Key::new(i64::MIN + 1, 0));
        assert!(MIN_KEY.is_sentinel());
    }

    #[test]
    fn display_round_trips_through_parser() {
        let k = Key::new(-377_749_001, 0);
        assert_eq!(parse_fixed_point(&k.to_string(), 1), Ok(k.raw));
    }
}
