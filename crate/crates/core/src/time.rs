//! UTC timestamps at one-second resolution.

use std::fmt;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Seconds since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.with_timezone(&Utc).timestamp()));
        }
        // Accept zone-less forms, interpreted as UTC.
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(Timestamp(naive.and_utc().timestamp()));
            }
        }
        None
    }

    pub fn plus_seconds(self, secs: i64) -> Self {
        Timestamp(self.0 + secs)
    }

    pub fn plus_days(self, days: i64) -> Self {
        Timestamp(self.0 + days * SECONDS_PER_DAY)
    }

    pub fn date(self) -> NaiveDate {
        self.to_datetime().date_naive()
    }

    fn to_datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0, 0).expect("timestamp within chrono range")
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_datetime().to_rfc3339_opts(SecondsFormat::Secs, true))
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

/// Whole calendar years elapsed from `birth` to `at`.
pub fn whole_years(birth: NaiveDate, at: NaiveDate) -> i32 {
    use chrono::Datelike;
    let mut years = at.year() - birth.year();
    if (at.month(), at.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    years
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats_iso8601() {
        let t = Timestamp::parse("2130-01-05T08:30:00Z").unwrap();
        assert_eq!(t.to_string(), "2130-01-05T08:30:00Z");
        assert_eq!(Timestamp::parse("2130-01-05 08:30:00"), Some(t));
        assert_eq!(Timestamp::parse("2130-01-05T10:30:00+02:00"), Some(t));
        assert!(Timestamp::parse("yesterday").is_none());
    }

    #[test]
    fn whole_years_counts_birthdays() {
        let b = parse_date("2000-03-15").unwrap();
        assert_eq!(whole_years(b, parse_date("2018-03-14").unwrap()), 17);
        assert_eq!(whole_years(b, parse_date("2018-03-15").unwrap()), 18);
    }
}
