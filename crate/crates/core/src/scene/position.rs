//! Ego-centred 5x5 position grid.
//!
//! Rows are lanes (`LL`, `L`, centre, `R`, `RR`), columns are longitudinal
//! offsets. A leading `-` marks cells behind the subject; the digit is the
//! distance index and is omitted in the subject's own column.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown position label `{0}`")]
pub struct PositionError(pub String);

/// `lane` is positive to the subject's left; `long` is positive forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PositionCode {
    lane: i8,
    long: i8,
}

/// Label of the subject's own cell.
pub const SUBJECT_LABEL: &str = "S";

impl PositionCode {
    pub const SUBJECT: PositionCode = PositionCode { lane: 0, long: 0 };

    pub fn new(lane: i8, long: i8) -> Option<Self> {
        ((-2..=2).contains(&lane) && (-2..=2).contains(&long)).then_some(PositionCode { lane, long })
    }

    pub fn lane(self) -> i8 {
        self.lane
    }

    pub fn long(self) -> i8 {
        self.long
    }

    pub fn is_subject(self) -> bool {
        self == Self::SUBJECT
    }

    /// All 25 cells, row by row from `LL` to `RR`, rear to front.
    pub fn all() -> impl Iterator<Item = PositionCode> {
        (-2..=2i8).rev().flat_map(|lane| (-2..=2i8).map(move |long| PositionCode { lane, long }))
    }

    /// Cell of `self` as seen from an actor standing at `origin`.
    pub fn relative_to(self, origin: PositionCode) -> Option<PositionCode> {
        PositionCode::new(self.lane - origin.lane, self.long - origin.long)
    }

    pub fn label(self) -> String {
        if self.is_subject() {
            return SUBJECT_LABEL.to_string();
        }
        let lane = match self.lane {
            2 => "LL",
            1 => "L",
            0 => "",
            -1 => "R",
            _ => "RR",
        };
        let sign = if self.long < 0 { "-" } else { "" };
        let digit = match self.long.unsigned_abs() {
            0 => String::new(),
            d => d.to_string(),
        };
        format!("{sign}{lane}{digit}")
    }

    pub fn parse(label: &str) -> Result<Self, PositionError> {
        let err = || PositionError(label.to_string());
        let s = label.trim();
        if s.eq_ignore_ascii_case(SUBJECT_LABEL) {
            return Ok(Self::SUBJECT);
        }
        let (rear, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let upper = rest.to_ascii_uppercase();
        let letters_end = upper.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(upper.len());
        let (letters, digits) = upper.split_at(letters_end);
        let lane = match letters {
            "LL" => 2,
            "L" => 1,
            "" => 0,
            "R" => -1,
            "RR" => -2,
            _ => return Err(err()),
        };
        let dist: i8 = match digits {
            "" => 0,
            "1" => 1,
            "2" => 2,
            _ => return Err(err()),
        };
        // "-L" and a bare "" are not cells; "-" needs a distance.
        if rest.is_empty() || (rear && dist == 0) {
            return Err(err());
        }
        let long = if rear { -dist } else { dist };
        Ok(PositionCode { lane, long })
    }
}

impl fmt::Display for PositionCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for PositionCode {
    type Err = PositionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PositionCode::parse(s)
    }
}

impl Serialize for PositionCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for PositionCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PositionCode::parse(&s).map_err(serde::de::Error::custom)
    }
}
