//! Crash-data ingest: catalog-driven normalisation of yearly release files
//! into a consolidated, year-independent dataset.

pub mod catalog;
pub mod consolidate;
pub mod raw;
pub mod split;

use std::io::{BufRead, Write};

pub use catalog::{CatalogEntry, CatalogError, ElementCatalog, ElementGroup, ElementKind, Resolution};
pub use consolidate::{consolidate, consolidate_all, ConsolidatedCase, EffectElements};
pub use raw::{parse_year, parse_year_readers, IngestError, IngestIssue, IngestReport, LevelFile, RawCase, Row, YearParse};
pub use split::{holdout_size, split_dataset, Split, SplitError};

/// Write cases as JSON Lines, one case per line, fields in declaration order.
pub fn write_dataset<W: Write>(cases: &[ConsolidatedCase], mut out: W) -> std::io::Result<()> {
    for c in cases {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Vec<ConsolidatedCase>, String> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::ElementValue;
    use crate::ere::severity::SeverityCounts;
    use std::collections::BTreeMap;

    #[test]
    fn dataset_lines_round_trip() {
        let mut causal = BTreeMap::new();
        causal.insert("light_condition".to_string(), ElementValue::attr("light_daylight"));
        causal.insert("travel_speed".to_string(), ElementValue::Number(55.0));
        let cases = vec![ConsolidatedCase::from_parts("1", 2020, causal, "ct_20", SeverityCounts { b: 1, ..Default::default() })];
        let mut buf = Vec::new();
        write_dataset(&cases, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("{\"case_id\":\"1\",\"year\":2020,\"causal\":"));
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), cases);
    }
}
