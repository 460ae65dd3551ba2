//! Comprehensive severity index and its level buckets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Per-case counts feeding the severity index.
///
/// * `a` fatalities
/// * `b` persons with a serious, fatal or unknown-severity injury (codes 3, 4, 5)
/// * `c` persons ejected (codes 1, 2, 3)
/// * `d` vehicles with disabling damage (code 6)
/// * `e` vehicles that rolled over (codes 1, 2, 9)
/// * `f` vehicles with fire (codes 1, 2)
/// * `g` jack-knifed vehicles (codes 2, 3)
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeverityCounts {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
    pub e: u32,
    pub f: u32,
    pub g: u32,
}

impl SeverityCounts {
    pub fn from_array(v: [u32; 7]) -> Self {
        SeverityCounts { a: v[0], b: v[1], c: v[2], d: v[3], e: v[4], f: v[5], g: v[6] }
    }
}

/// CSI = 10a + 6b + 4c + 3d + 2e + 2f + 2g.
pub fn compute_csi(c: &SeverityCounts) -> u64 {
    10 * u64::from(c.a)
        + 6 * u64::from(c.b)
        + 4 * u64::from(c.c)
        + 3 * u64::from(c.d)
        + 2 * u64::from(c.e)
        + 2 * u64::from(c.f)
        + 2 * u64::from(c.g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeverityLevel {
    I,
    II,
    III,
    IV,
    V,
}

impl SeverityLevel {
    pub const ALL: [SeverityLevel; 5] = [
        SeverityLevel::I,
        SeverityLevel::II,
        SeverityLevel::III,
        SeverityLevel::IV,
        SeverityLevel::V,
    ];

    /// 1-based class number used as the rating target and report label.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeverityLevel::I => "I",
            SeverityLevel::II => "II",
            SeverityLevel::III => "III",
            SeverityLevel::IV => "IV",
            SeverityLevel::V => "V",
        })
    }
}

impl FromStr for SeverityLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "I" | "1" => SeverityLevel::I,
            "II" | "2" => SeverityLevel::II,
            "III" | "3" => SeverityLevel::III,
            "IV" | "4" => SeverityLevel::IV,
            "V" | "5" => SeverityLevel::V,
            other => return Err(format!("unknown severity level `{other}`")),
        })
    }
}

/// Buckets: I = 0..=1, II = 2..=5, III = 6..=9, IV = 10..=14, V = 15+.
///
/// A CSI of exactly 2 falls in level II so the buckets partition the
/// non-negative integers.
pub fn severity_level(csi: u64) -> SeverityLevel {
    match csi {
        0..=1 => SeverityLevel::I,
        2..=5 => SeverityLevel::II,
        6..=9 => SeverityLevel::III,
        10..=14 => SeverityLevel::IV,
        _ => SeverityLevel::V,
    }
}

/// Level I is non-severe (0); every higher level is severe (1).
pub fn binary_severity(level: SeverityLevel) -> u8 {
    u8::from(level != SeverityLevel::I)
}
