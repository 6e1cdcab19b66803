use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier for one trading day.
///
/// Stored as `YYYYMMDD` for real calendar data; simulated series simply use
/// `1..=T`. Ordering is numeric, which is chronological in both conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DayId(pub u32);

impl DayId {
    /// Parse a `YYYYMMDD` string, as used in tick file names.
    pub fn parse(s: &str) -> Option<DayId> {
        if s.len() != 8 {
            return None;
        }
        let v: u32 = s.parse().ok()?;
        let (m, d) = ((v / 100) % 100, v % 100);
        if (1..=12).contains(&m) && (1..=31).contains(&d) {
            Some(DayId(v))
        } else {
            None
        }
    }
}

impl fmt::Display for DayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for DayId {
    fn from(v: u32) -> Self {
        DayId(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_calendar_days() {
        assert_eq!(DayId::parse("20130503"), Some(DayId(20130503)));
        assert_eq!(DayId::parse("20131344"), None);
        assert_eq!(DayId::parse("503"), None);
        assert_eq!(DayId::parse("2013050x"), None);
    }

    #[test]
    fn orders_numerically() {
        assert!(DayId(20121231) < DayId(20130101));
        assert!(DayId(1) < DayId(2));
    }
}
