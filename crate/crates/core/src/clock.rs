//! Timestamps and the clock used to stamp samples and runs.

use chrono::{DateTime, NaiveDateTime, SubsecRound, TimeZone, Utc};

pub type Timestamp = DateTime<Utc>;

const FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

/// Source of "now". A fixed clock makes whole pipeline runs byte-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub enum Clock {
    #[default]
    System,
    Fixed(Timestamp),
}

impl Clock {
    pub fn now(&self) -> Timestamp {
        match self {
            Clock::System => Utc::now().trunc_subsecs(3),
            Clock::Fixed(t) => *t,
        }
    }
}

/// ISO-8601 UTC with millisecond precision and a `Z` suffix.
pub fn format_timestamp(t: &Timestamp) -> String {
    t.format(FORMAT).to_string()
}

/// Accepts RFC 3339 and the JIRA flavour (`2015-01-01T10:00:00.000+0000`).
/// Sub-millisecond precision is dropped so every stored instant renders exactly.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc).trunc_subsecs(3));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%dT%H:%M:%S%z"] {
        if let Ok(t) = DateTime::parse_from_str(s, fmt) {
            return Some(t.with_timezone(&Utc).trunc_subsecs(3));
        }
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f")
        .ok()
        .map(|n| Utc.from_utc_datetime(&n).trunc_subsecs(3))
}

pub(crate) mod serde_ts {
    use super::{format_timestamp, parse_timestamp, Timestamp};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let raw = String::deserialize(d)?;
        parse_timestamp(&raw).ok_or_else(|| D::Error::custom(format!("bad timestamp {raw:?}")))
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => s.serialize_str(&format_timestamp(t)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
            match Option::<String>::deserialize(d)? {
                None => Ok(None),
                Some(raw) => parse_timestamp(&raw)
                    .map(Some)
                    .ok_or_else(|| D::Error::custom(format!("bad timestamp {raw:?}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jira_and_rfc3339_forms_agree() {
        let a = parse_timestamp("2015-01-01T10:00:00.000+0000").unwrap();
        let b = parse_timestamp("2015-01-01T10:00:00Z").unwrap();
        assert_eq!(a, b);
        assert_eq!(format_timestamp(&a), "2015-01-01T10:00:00.000Z");
    }

    #[test]
    fn offsets_are_normalized_to_utc() {
        let t = parse_timestamp("2015-01-01T12:30:00.250+0200").unwrap();
        assert_eq!(format_timestamp(&t), "2015-01-01T10:30:00.250Z");
    }

    #[test]
    fn rendering_round_trips() {
        let t = Clock::System.now();
        assert_eq!(parse_timestamp(&format_timestamp(&t)), Some(t));
    }

    #[test]
    fn garbage_is_rejected() {
        assert_eq!(parse_timestamp("yesterday"), None);
    }
}
