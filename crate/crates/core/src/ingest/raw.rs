//! Reading one data year of delimited release files into per-case row groups.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::ElementCatalog;
use crate::element::FileLevel;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{source_name}: {message}")]
    Io { source_name: String, message: String },
    #[error("{source_name}: case identifier column `{column}` not found in header")]
    MissingCaseIdColumn { source_name: String, column: String },
    #[error("catalog declares no case identifier column for {level} files in {year}")]
    NoCaseIdRule { year: u16, level: FileLevel },
    #[error("year {0} is outside the catalog's coverage")]
    YearNotCovered(u16),
}

/// One data row; column names are upper-cased.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    header: Arc<[String]>,
    values: Vec<String>,
}

impl Row {
    pub fn new(header: Arc<[String]>, values: Vec<String>) -> Self {
        debug_assert_eq!(header.len(), values.len());
        Row { header, values }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let (h, v): (Vec<String>, Vec<String>) = pairs
            .into_iter()
            .map(|(k, v)| (k.to_ascii_uppercase(), v.to_string()))
            .unzip();
        Row::new(h.into(), v)
    }

    pub fn get(&self, column: &str) -> Option<&str> {
        self.header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(column))
            .map(|i| self.values[i].as_str())
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &str)> {
        self.header.iter().map(String::as_str).zip(self.values.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCase {
    pub year: u16,
    pub case_id: String,
    pub level_records: BTreeMap<FileLevel, Vec<Row>>,
}

impl RawCase {
    pub fn new(year: u16, case_id: impl Into<String>) -> Self {
        RawCase { year, case_id: case_id.into(), level_records: BTreeMap::new() }
    }

    pub fn with_row(mut self, level: FileLevel, row: Row) -> Self {
        self.level_records.entry(level).or_default().push(row);
        self
    }

    pub fn rows(&self, level: FileLevel) -> &[Row] {
        self.level_records.get(&level).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn row_count(&self) -> usize {
        self.level_records.values().map(Vec::len).sum()
    }
}

/// Quarantined defects and catalog gaps found while ingesting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IngestIssue {
    MalformedRow {
        source: String,
        line: u64,
        expected_fields: usize,
        found_fields: usize,
    },
    CatalogGap {
        year: u16,
        case_id: String,
        element: String,
        locator: String,
        raw_value: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub issues: Vec<IngestIssue>,
}

impl IngestReport {
    pub fn malformed_rows(&self) -> usize {
        self.issues
            .iter()
            .filter(|i| matches!(i, IngestIssue::MalformedRow { .. }))
            .count()
    }

    pub fn catalog_gaps(&self) -> usize {
        self.issues
            .iter()
            .filter(|i| matches!(i, IngestIssue::CatalogGap { .. }))
            .count()
    }

    pub fn extend(&mut self, other: IngestReport) {
        self.issues.extend(other.issues);
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for issue in &self.issues {
            serde_json::to_writer(&mut out, issue)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelFile {
    pub level: FileLevel,
    pub path: PathBuf,
}

impl LevelFile {
    pub fn new(level: FileLevel, path: impl Into<PathBuf>) -> Self {
        LevelFile { level, path: path.into() }
    }

    /// `LEVEL=path`, or a bare path whose level is guessed from the file name.
    pub fn parse_arg(arg: &str) -> Result<Self, String> {
        if let Some((level, path)) = arg.split_once('=') {
            if let Ok(level) = level.parse() {
                return Ok(LevelFile::new(level, path));
            }
        }
        FileLevel::guess_from_file_name(arg)
            .map(|level| LevelFile::new(level, arg))
            .ok_or_else(|| format!("cannot tell the file level of `{arg}`; use LEVEL=path"))
    }
}

#[derive(Debug, Default)]
pub struct YearParse {
    pub cases: Vec<RawCase>,
    pub report: IngestReport,
    /// Data rows read across all files, including quarantined ones.
    pub rows_read: usize,
}

struct ParsedSource {
    level: FileLevel,
    rows: Vec<(String, Row)>,
    issues: Vec<IngestIssue>,
    rows_read: usize,
}

/// Parse every file of one data year. Files are read in parallel; output is
/// ordered by case id regardless.
pub fn parse_year(files: &[LevelFile], year: u16, catalog: &ElementCatalog) -> Result<YearParse, IngestError> {
    check_year(year, catalog)?;
    let parsed: Vec<ParsedSource> = files
        .par_iter()
        .map(|f| {
            let name = f.path.display().to_string();
            let file = File::open(&f.path).map_err(|e| IngestError::Io { source_name: name.clone(), message: e.to_string() })?;
            parse_source(&name, f.level, BufReader::new(file), year, catalog)
        })
        .collect::<Result<_, _>>()?;
    Ok(group(parsed, year))
}

/// Same as [`parse_year`] over in-memory readers; `name` labels issues.
pub fn parse_year_readers<R: Read>(
    sources: Vec<(String, FileLevel, R)>,
    year: u16,
    catalog: &ElementCatalog,
) -> Result<YearParse, IngestError> {
    check_year(year, catalog)?;
    let parsed = sources
        .into_iter()
        .map(|(name, level, reader)| parse_source(&name, level, reader, year, catalog))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(group(parsed, year))
}

pub fn parse_year_paths(paths: &[&Path], year: u16, catalog: &ElementCatalog) -> Result<YearParse, IngestError> {
    let files = paths
        .iter()
        .map(|p| {
            LevelFile::parse_arg(&p.display().to_string())
                .map_err(|message| IngestError::Io { source_name: p.display().to_string(), message })
        })
        .collect::<Result<Vec<_>, _>>()?;
    parse_year(&files, year, catalog)
}

fn check_year(year: u16, catalog: &ElementCatalog) -> Result<(), IngestError> {
    if catalog.covers_year(year) {
        Ok(())
    } else {
        Err(IngestError::YearNotCovered(year))
    }
}

fn parse_source<R: Read>(
    name: &str,
    level: FileLevel,
    reader: R,
    year: u16,
    catalog: &ElementCatalog,
) -> Result<ParsedSource, IngestError> {
    let io_err = |e: csv::Error| IngestError::Io { source_name: name.to_string(), message: e.to_string() };
    let id_columns = catalog
        .case_id_columns(year, level)
        .ok_or(IngestError::NoCaseIdRule { year, level })?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let header: Arc<[String]> = rdr
        .byte_headers()
        .map_err(io_err)?
        .iter()
        .map(|h| {
            String::from_utf8_lossy(h)
                .trim_start_matches('\u{feff}')
                .trim()
                .to_ascii_uppercase()
        })
        .collect::<Vec<_>>()
        .into();
    let id_idx = id_columns
        .iter()
        .find_map(|c| header.iter().position(|h| h.eq_ignore_ascii_case(c)))
        .ok_or_else(|| IngestError::MissingCaseIdColumn {
            source_name: name.to_string(),
            column: id_columns.join("|"),
        })?;

    let mut out = ParsedSource { level, rows: Vec::new(), issues: Vec::new(), rows_read: 0 };
    let mut record = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(io_err(e)),
        }
        out.rows_read += 1;
        if record.len() != header.len() {
            out.issues.push(IngestIssue::MalformedRow {
                source: name.to_string(),
                line: record.position().map(|p| p.line()).unwrap_or(0),
                expected_fields: header.len(),
                found_fields: record.len(),
            });
            continue;
        }
        let values: Vec<String> = record
            .iter()
            .map(|f| String::from_utf8_lossy(f).trim().to_string())
            .collect();
        let case_id = values[id_idx].clone();
        out.rows.push((case_id, Row::new(header.clone(), values)));
    }
    Ok(out)
}

fn group(parsed: Vec<ParsedSource>, year: u16) -> YearParse {
    let mut result = YearParse::default();
    let mut cases: HashMap<String, RawCase> = HashMap::new();
    for source in parsed {
        result.rows_read += source.rows_read;
        result.report.issues.extend(source.issues);
        for (case_id, row) in source.rows {
            cases
                .entry(case_id.clone())
                .or_insert_with(|| RawCase::new(year, case_id))
                .level_records
                .entry(source.level)
                .or_default()
                .push(row);
        }
    }
    let mut cases: Vec<RawCase> = cases.into_values().collect();
    cases.sort_by(|a, b| compare_case_ids(&a.case_id, &b.case_id));
    result.cases = cases;
    result
}

/// Numeric ids compare numerically, everything else lexically.
pub fn compare_case_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> ElementCatalog {
        "case_id years=2000..2030 column=ST_CASE|CASENUM\n".parse().unwrap()
    }

    fn src(name: &str, level: FileLevel, text: &'static str) -> (String, FileLevel, &'static [u8]) {
        (name.to_string(), level, text.as_bytes())
    }

    #[test]
    fn single_crash_row() {
        let parsed = parse_year_readers(
            vec![src("accident.csv", FileLevel::Crash, "ST_CASE,LGT_COND\n100,1\n")],
            2020,
            &catalog(),
        )
        .unwrap();
        assert_eq!(parsed.cases.len(), 1);
        assert_eq!(parsed.cases[0].case_id, "100");
        assert_eq!(parsed.cases[0].rows(FileLevel::Crash).len(), 1);
        assert_eq!(parsed.cases[0].rows(FileLevel::Crash)[0].get("lgt_cond"), Some("1"));
    }

    #[test]
    fn rows_group_by_case_across_levels() {
        let parsed = parse_year_readers(
            vec![
                src("accident.csv", FileLevel::Crash, "ST_CASE,LGT_COND\n100,1\n"),
                src("vehicle.csv", FileLevel::Vehicle, "ST_CASE,VEH_NO\n100,1\n100,2\n"),
            ],
            2020,
            &catalog(),
        )
        .unwrap();
        assert_eq!(parsed.cases.len(), 1);
        assert_eq!(parsed.cases[0].rows(FileLevel::Vehicle).len(), 2);
    }

    #[test]
    fn empty_input_gives_no_cases() {
        let parsed = parse_year_readers(Vec::<(String, FileLevel, &[u8])>::new(), 2020, &catalog()).unwrap();
        assert!(parsed.cases.is_empty());
        assert_eq!(parsed.rows_read, 0);
    }

    #[test]
    fn malformed_rows_are_quarantined_not_dropped() {
        let parsed = parse_year_readers(
            vec![src("vehicle.csv", FileLevel::Vehicle, "ST_CASE,VEH_NO\n100,1\n100\n101,1,9\n101,2\n")],
            2020,
            &catalog(),
        )
        .unwrap();
        let kept: usize = parsed.cases.iter().map(RawCase::row_count).sum();
        assert_eq!(kept, 2);
        assert_eq!(parsed.report.malformed_rows(), 2);
        assert_eq!(kept + parsed.report.malformed_rows(), parsed.rows_read);
        match &parsed.report.issues[0] {
            IngestIssue::MalformedRow { line, expected_fields, found_fields, .. } => {
                assert_eq!((*line, *expected_fields, *found_fields), (3, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_case_id_column_is_an_error() {
        let err = parse_year_readers(vec![src("x.csv", FileLevel::Crash, "CASE,A\n1,2\n")], 2020, &catalog()).unwrap_err();
        assert!(matches!(err, IngestError::MissingCaseIdColumn { .. }));
    }

    #[test]
    fn alternative_case_id_column() {
        let parsed = parse_year_readers(vec![src("accident.csv", FileLevel::Crash, "CASENUM,A\n5,2\n")], 2020, &catalog()).unwrap();
        assert_eq!(parsed.cases[0].case_id, "5");
    }

    #[test]
    fn uncovered_year_is_an_error() {
        let err = parse_year_readers(vec![src("x.csv", FileLevel::Crash, "ST_CASE\n1\n")], 1990, &catalog()).unwrap_err();
        assert!(matches!(err, IngestError::YearNotCovered(1990)));
    }

    #[test]
    fn bom_and_case_ordering() {
        let parsed = parse_year_readers(
            vec![src("accident.csv", FileLevel::Crash, "\u{feff}st_case,X\n100,a\n99,b\n1000,c\n")],
            2020,
            &catalog(),
        )
        .unwrap();
        let ids: Vec<_> = parsed.cases.iter().map(|c| c.case_id.as_str()).collect();
        assert_eq!(ids, ["99", "100", "1000"]);
    }

    #[test]
    fn level_file_args() {
        assert_eq!(LevelFile::parse_arg("VEHICLE=a.csv").unwrap().level, FileLevel::Vehicle);
        assert_eq!(LevelFile::parse_arg("dir/accident.csv").unwrap().level, FileLevel::Crash);
        assert!(LevelFile::parse_arg("dir/misc.csv").is_err());
    }
}
