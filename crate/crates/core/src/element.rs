//! Value types shared by the crash catalog, consolidated cases and scenes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Record level of a crash data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FileLevel {
    Crash,
    Vehicle,
    Person,
    Event,
}

impl FileLevel {
    pub const ALL: [FileLevel; 4] = [FileLevel::Crash, FileLevel::Vehicle, FileLevel::Person, FileLevel::Event];

    pub fn as_str(self) -> &'static str {
        match self {
            FileLevel::Crash => "CRASH",
            FileLevel::Vehicle => "VEHICLE",
            FileLevel::Person => "PERSON",
            FileLevel::Event => "EVENT",
        }
    }

    /// Guess the level of a release file from its name (`accident.csv`,
    /// `vehicle.csv`, `person.csv`, `vevent.csv`, ...).
    pub fn guess_from_file_name(name: &str) -> Option<FileLevel> {
        let lower = name.to_ascii_lowercase();
        let stem = lower.rsplit(['/', '\\']).next().unwrap_or(&lower);
        if stem.contains("event") {
            Some(FileLevel::Event)
        } else if stem.starts_with("accident") || stem.starts_with("crash") {
            Some(FileLevel::Crash)
        } else if stem.starts_with("vehicle") || stem.starts_with("vehnit") || stem.starts_with("vpic") {
            Some(FileLevel::Vehicle)
        } else if stem.starts_with("person") || stem.starts_with("pbtype") || stem.starts_with("nmcrash") {
            Some(FileLevel::Person)
        } else {
            None
        }
    }
}

impl fmt::Display for FileLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FileLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CRASH" | "ACCIDENT" => Ok(FileLevel::Crash),
            "VEHICLE" => Ok(FileLevel::Vehicle),
            "PERSON" => Ok(FileLevel::Person),
            "EVENT" => Ok(FileLevel::Event),
            other => Err(format!("unknown file level `{other}`")),
        }
    }
}

/// Inclusive range of data collection years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearRange {
    pub start: u16,
    pub end: u16,
}

impl YearRange {
    pub fn new(start: u16, end: u16) -> Option<Self> {
        (start <= end).then_some(YearRange { start, end })
    }

    pub fn contains(&self, year: u16) -> bool {
        self.start <= year && year <= self.end
    }

    pub fn overlaps(&self, other: &YearRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("year range `{s}` must look like A..B"))?;
        let start: u16 = a.trim().parse().map_err(|_| format!("bad start year in `{s}`"))?;
        let end: u16 = b.trim().parse().map_err(|_| format!("bad end year in `{s}`"))?;
        YearRange::new(start, end).ok_or_else(|| format!("empty year range `{s}`"))
    }
}

/// Value of one element in a consolidated case or a scene: either a
/// canonical attribute id or, for numeric elements, a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementValue {
    Number(f64),
    Attr(String),
}

impl ElementValue {
    pub fn attr(id: impl Into<String>) -> Self {
        ElementValue::Attr(id.into())
    }

    pub fn as_attr(&self) -> Option<&str> {
        match self {
            ElementValue::Attr(a) => Some(a),
            ElementValue::Number(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            ElementValue::Number(n) => Some(*n),
            ElementValue::Attr(_) => None,
        }
    }
}

impl fmt::Display for ElementValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementValue::Number(n) => write!(f, "{n}"),
            ElementValue::Attr(a) => f.write_str(a),
        }
    }
}

/// Canonical element ids the engines refer to directly.
pub mod ids {
    pub const CRASH_TYPE: &str = "crash_type";
    pub const TRIGGER_EVENT: &str = "critical_event_precrash";
    pub const FIRST_HARMFUL_EVENT: &str = "first_harmful_event";
    pub const TRAVEL_SPEED: &str = "travel_speed";
    pub const SPEED_LIMIT: &str = "speed_limit";
    pub const HOUR: &str = "hour_of_crash";
    pub const LIGHT: &str = "light_condition";
    pub const ATMOSPHERIC: &str = "atmospheric_conditions";
    pub const SURFACE: &str = "roadway_surface_condition";
    pub const TOTAL_LANES: &str = "total_lanes";
    pub const BODY_TYPE: &str = "body_type";
    pub const AGE: &str = "age";
    pub const SEX: &str = "sex";

    /// Derived features appended by the feature encoder.
    pub const SPEED_OVER_LIMIT: &str = "speed_over_limit";
    pub const TIME_OF_DAY: &str = "time_of_day";
}

/// Miles per hour to metres per second.
pub const MPH_TO_MPS: f64 = 0.44704;
