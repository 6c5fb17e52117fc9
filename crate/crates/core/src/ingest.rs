//! Hourly zonal generation input.
//!
//! Input files are CSV with a required header:
//!
//! ```text
//! timestamp,zone,fuel,generation_mwh
//! 2022-01-01T00:00Z,North,natural_gas,5000
//! 2022-01-01T00:00Z,North,Wind Onshore,812.5
//! ```
//!
//! The `fuel` column takes either a normalized category (`fossil_coal`,
//! `derived_gas`, `natural_gas`, `fossil_oil`, `non_emitting`) or a raw
//! transparency-platform production type such as `Fossil Hard coal`.
//! Several raw types can map to one category; their rows are summed after
//! duplicate detection on the raw key. Timestamps are normalized to UTC and
//! must fall on whole hours.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Timelike, Utc};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fuel::FuelKind;

/// Market zone.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ZoneId {
    North,
    CentreNorth,
    CentreSouth,
    South,
    Calabria,
    Sicily,
    Sardinia,
    Custom(String),
}

impl ZoneId {
    pub const BUILTIN: [ZoneId; 7] = [
        ZoneId::North,
        ZoneId::CentreNorth,
        ZoneId::CentreSouth,
        ZoneId::South,
        ZoneId::Calabria,
        ZoneId::Sicily,
        ZoneId::Sardinia,
    ];

    pub fn name(&self) -> &str {
        match self {
            ZoneId::North => "North",
            ZoneId::CentreNorth => "Centre-North",
            ZoneId::CentreSouth => "Centre-South",
            ZoneId::South => "South",
            ZoneId::Calabria => "Calabria",
            ZoneId::Sicily => "Sicily",
            ZoneId::Sardinia => "Sardinia",
            ZoneId::Custom(name) => name,
        }
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ZoneId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Err(Error::config("empty zone name"));
        }
        let key: String = trimmed
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "north" | "nord" => ZoneId::North,
            "centrenorth" | "centernorth" | "cnor" => ZoneId::CentreNorth,
            "centresouth" | "centersouth" | "csud" => ZoneId::CentreSouth,
            "south" | "sud" => ZoneId::South,
            "calabria" | "cala" => ZoneId::Calabria,
            "sicily" | "sicilia" | "sici" => ZoneId::Sicily,
            "sardinia" | "sardegna" | "sard" => ZoneId::Sardinia,
            _ => ZoneId::Custom(trimmed.to_string()),
        })
    }
}

impl Serialize for ZoneId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Generation category after label mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Source {
    Fuel(FuelKind),
    NonEmitting,
}

impl Source {
    pub fn fuel(self) -> Option<FuelKind> {
        match self {
            Source::Fuel(f) => Some(f),
            Source::NonEmitting => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Fuel(k) => k.fmt(f),
            Source::NonEmitting => f.write_str("non_emitting"),
        }
    }
}

/// What to do with a `fuel` label that is not recognized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelPolicy {
    /// Reject the row.
    #[default]
    Strict,
    /// Treat as non-emitting and log a warning.
    Lenient,
}

const PRODUCTION_TYPES: &[(&str, Source)] = &[
    ("Fossil Hard coal", Source::Fuel(FuelKind::FossilCoal)),
    ("Fossil Brown coal/Lignite", Source::Fuel(FuelKind::FossilCoal)),
    ("Fossil Coal-derived gas", Source::Fuel(FuelKind::DerivedGas)),
    ("Fossil Gas", Source::Fuel(FuelKind::NaturalGas)),
    ("Fossil Oil", Source::Fuel(FuelKind::FossilOil)),
    ("Fossil Oil shale", Source::Fuel(FuelKind::FossilOil)),
    ("Biomass", Source::NonEmitting),
    ("Energy storage", Source::NonEmitting),
    ("Geothermal", Source::NonEmitting),
    ("Hydro Pumped Storage", Source::NonEmitting),
    ("Hydro Run-of-river and poundage", Source::NonEmitting),
    ("Hydro Water Reservoir", Source::NonEmitting),
    ("Marine", Source::NonEmitting),
    ("Nuclear", Source::NonEmitting),
    ("Other", Source::NonEmitting),
    ("Other renewable", Source::NonEmitting),
    ("Solar", Source::NonEmitting),
    ("Waste", Source::NonEmitting),
    ("Wind Offshore", Source::NonEmitting),
    ("Wind Onshore", Source::NonEmitting),
    ("non_emitting", Source::NonEmitting),
];

/// Maps a production-type label or normalized fuel name to a category.
/// Returns `None` for unknown labels.
pub fn map_production_type(label: &str) -> Option<Source> {
    let label = label.trim();
    if let Ok(kind) = label.parse::<FuelKind>() {
        return Some(Source::Fuel(kind));
    }
    PRODUCTION_TYPES
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(label))
        .map(|(_, s)| *s)
}

/// [`map_production_type`] with the unknown-label policy applied.
pub fn resolve_label(label: &str, policy: LabelPolicy) -> Result<Source> {
    match (map_production_type(label), policy) {
        (Some(s), _) => Ok(s),
        (None, LabelPolicy::Lenient) => {
            log::warn!("unknown production type '{label}', treated as non-emitting");
            Ok(Source::NonEmitting)
        }
        (None, LabelPolicy::Strict) => Err(Error::config(format!("unknown production type '{label}'"))),
    }
}

/// One hour of one zone's generation from one category, MWh.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub timestamp: DateTime<Utc>,
    pub zone: ZoneId,
    pub fuel: Source,
    pub generation_mwh: f64,
}

impl GenerationRecord {
    fn sort_key(&self) -> (&ZoneId, DateTime<Utc>, Source) {
        (&self.zone, self.timestamp, self.fuel)
    }
}

/// Formats an hour as `YYYY-MM-DDTHH:MMZ`.
pub fn format_hour(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%MZ").to_string()
}

/// Parses an ISO 8601 timestamp; offset-less values are taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    let with_offset = match s.strip_suffix('Z').or_else(|| s.strip_suffix('z')) {
        Some(head) => format!("{head}+00:00"),
        None => s.to_string(),
    };
    for fmt in [
        "%Y-%m-%dT%H:%M%:z",
        "%Y-%m-%dT%H:%M:%S%:z",
        "%Y-%m-%d %H:%M%:z",
        "%Y-%m-%d %H:%M:%S%:z",
    ] {
        if let Ok(dt) = DateTime::parse_from_str(&with_offset, fmt) {
            return Some(dt.with_timezone(&Utc));
        }
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(naive.and_utc());
        }
    }
    None
}

const HEADER: [&str; 4] = ["timestamp", "zone", "fuel", "generation_mwh"];

/// Parses one generation file.
pub fn parse_generation_file(path: &Path, policy: LabelPolicy) -> Result<Vec<GenerationRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_generation_reader(file, &path.display().to_string(), policy)
}

/// Parses generation CSV from any reader; `name` labels error messages.
pub fn parse_generation_reader<R: Read>(reader: R, name: &str, policy: LabelPolicy) -> Result<Vec<GenerationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let mut cols = [0usize; 4];
    for (slot, want) in cols.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(want))
            .ok_or_else(|| Error::Parse {
                path: name.to_string(),
                line: 1,
                message: format!("missing column '{want}' (expected header {})", HEADER.join(",")),
            })?;
    }

    // raw key -> (value, line)
    type RawKey = (ZoneId, DateTime<Utc>, String);
    let mut raw: BTreeMap<RawKey, (Source, f64, u64)> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |message: String| Error::Parse {
            path: name.to_string(),
            line,
            message,
        };
        let field = |i: usize| {
            row.get(cols[i])
                .ok_or_else(|| parse_err(format!("missing field '{}'", HEADER[i])))
        };

        let ts_text = field(0)?;
        let ts = parse_timestamp(ts_text).ok_or_else(|| parse_err(format!("bad timestamp '{ts_text}'")))?;
        if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(Error::Validation {
                path: name.to_string(),
                line,
                message: format!("timestamp '{ts_text}' is not on a whole hour"),
            });
        }
        let zone: ZoneId = field(1)?.parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let label = field(2)?;
        let source = resolve_label(label, policy).map_err(|e| parse_err(e.to_string()))?;
        let g_text = field(3)?;
        let g: f64 = g_text
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(format!("bad generation value '{g_text}'")))?;
        if g < 0.0 {
            return Err(Error::Validation {
                path: name.to_string(),
                line,
                message: format!("negative generation {g} MWh"),
            });
        }

        let key = (zone, ts, label.to_ascii_lowercase());
        match raw.get(&key) {
            Some(&(_, prev, _)) if prev != g => {
                return Err(Error::Conflict {
                    key: format!("{} {} {label} (line {line})", key.0, format_hour(ts)),
                    first: prev,
                    second: g,
                });
            }
            Some(_) => {}
            None => {
                raw.insert(key, (source, g, line));
            }
        }
    }

    let mut merged: BTreeMap<(ZoneId, DateTime<Utc>, Source), f64> = BTreeMap::new();
    for ((zone, ts, _), (source, g, _)) in raw {
        *merged.entry((zone, ts, source)).or_insert(0.0) += g;
    }
    Ok(merged
        .into_iter()
        .map(|((zone, timestamp, fuel), generation_mwh)| GenerationRecord {
            timestamp,
            zone,
            fuel,
            generation_mwh,
        })
        .collect())
}

/// Parses several files in parallel and merges them deterministically.
/// Equal records present in more than one file collapse; differing ones conflict.
pub fn parse_generation_files(paths: &[impl AsRef<Path> + Sync], policy: LabelPolicy) -> Result<Vec<GenerationRecord>> {
    let parts = paths
        .par_iter()
        .map(|p| parse_generation_file(p.as_ref(), policy))
        .collect::<Result<Vec<_>>>()?;
    merge_records(parts.into_iter().flatten())
}

/// Sorts and deduplicates records.
pub fn merge_records(records: impl IntoIterator<Item = GenerationRecord>) -> Result<Vec<GenerationRecord>> {
    let mut all: Vec<GenerationRecord> = records.into_iter().collect();
    all.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out: Vec<GenerationRecord> = Vec::with_capacity(all.len());
    for r in all {
        match out.last() {
            Some(prev) if prev.sort_key() == r.sort_key() => {
                if prev.generation_mwh != r.generation_mwh {
                    return Err(Error::Conflict {
                        key: format!("{} {} {}", r.zone, format_hour(r.timestamp), r.fuel),
                        first: prev.generation_mwh,
                        second: r.generation_mwh,
                    });
                }
            }
            _ => out.push(r),
        }
    }
    Ok(out)
}

/// Writes records in the normalized input schema.
pub fn write_generation_csv<W: Write>(records: &[GenerationRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            format_hour(r.timestamp),
            r.zone.to_string(),
            r.fuel.to_string(),
            r.generation_mwh.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Handling of hours with no record for a zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingHour {
    #[default]
    Skip,
    ZeroFill,
    Error,
}

impl FromStr for MissingHour {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "skip" => Ok(MissingHour::Skip),
            "zero-fill" | "zero_fill" | "zerofill" => Ok(MissingHour::ZeroFill),
            "error" => Ok(MissingHour::Error),
            other => Err(Error::config(format!("unknown missing-hour policy '{other}'"))),
        }
    }
}

/// A zone's documented data outage, inclusive UTC dates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownGap {
    pub zone: ZoneId,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl KnownGap {
    pub fn covers(&self, zone: &ZoneId, ts: DateTime<Utc>) -> bool {
        let day = ts.date_naive();
        &self.zone == zone && self.start <= day && day <= self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveragePolicy {
    pub on_missing_hour: MissingHour,
    pub known_gaps: Vec<KnownGap>,
    /// Expected hourly span `[start, end]`; defaults to the span of the data.
    pub span: Option<(DateTime<Utc>, DateTime<Utc>)>,
    /// Zones expected even if absent from the data.
    pub expected_zones: Vec<ZoneId>,
}

impl CoveragePolicy {
    /// South has no data for 2016–2018 and Calabria for 2016–2020.
    pub fn default_known_gaps() -> Vec<KnownGap> {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        vec![
            KnownGap {
                zone: ZoneId::South,
                start: d(2016, 1, 1),
                end: d(2018, 12, 31),
            },
            KnownGap {
                zone: ZoneId::Calabria,
                start: d(2016, 1, 1),
                end: d(2020, 12, 31),
            },
        ]
    }
}

impl Default for CoveragePolicy {
    fn default() -> Self {
        Self {
            on_missing_hour: MissingHour::default(),
            known_gaps: Self::default_known_gaps(),
            span: None,
            expected_zones: Vec::new(),
        }
    }
}

fn serialize_hour<S: Serializer>(ts: &DateTime<Utc>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_hour(*ts))
}

/// A run of consecutive missing hours, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    pub zone: ZoneId,
    #[serde(serialize_with = "serialize_hour")]
    pub start: DateTime<Utc>,
    #[serde(serialize_with = "serialize_hour")]
    pub end: DateTime<Utc>,
    pub hours_missing: u64,
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}..{} ({} h)",
            self.zone,
            format_hour(self.start),
            format_hour(self.end),
            self.hours_missing
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoverageReport {
    pub unexpected: Vec<Gap>,
    pub known: Vec<Gap>,
}

impl CoverageReport {
    /// Unexpected gaps as JSON lines.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for g in &self.unexpected {
            out.push_str(&serde_json::to_string(g)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn push_hour(runs: &mut Vec<Gap>, zone: &ZoneId, ts: DateTime<Utc>) {
    match runs.last_mut() {
        Some(g) if g.end + Duration::hours(1) == ts => {
            g.end = ts;
            g.hours_missing += 1;
        }
        _ => runs.push(Gap {
            zone: zone.clone(),
            start: ts,
            end: ts,
            hours_missing: 1,
        }),
    }
}

/// Enumerates missing hours per zone and applies the policy.
///
/// `records` must be sorted as returned by the parser.
pub fn apply_coverage(
    mut records: Vec<GenerationRecord>,
    policy: &CoveragePolicy,
) -> Result<(CoverageReport, Vec<GenerationRecord>)> {
    let span = match policy.span {
        Some(s) => Some(s),
        None => {
            let min = records.iter().map(|r| r.timestamp).min();
            let max = records.iter().map(|r| r.timestamp).max();
            min.zip(max)
        }
    };
    let Some((start, end)) = span else {
        return Ok((CoverageReport::default(), records));
    };

    let mut present: BTreeMap<ZoneId, (BTreeSet<DateTime<Utc>>, BTreeSet<Source>)> = BTreeMap::new();
    for z in &policy.expected_zones {
        present.entry(z.clone()).or_default();
    }
    for r in &records {
        let e = present.entry(r.zone.clone()).or_default();
        e.0.insert(r.timestamp);
        e.1.insert(r.fuel);
    }

    let mut report = CoverageReport::default();
    let mut fill = Vec::new();
    for (zone, (hours, sources)) in &present {
        let mut ts = start;
        while ts <= end {
            if !hours.contains(&ts) {
                if policy.known_gaps.iter().any(|k| k.covers(zone, ts)) {
                    push_hour(&mut report.known, zone, ts);
                } else {
                    push_hour(&mut report.unexpected, zone, ts);
                    if policy.on_missing_hour == MissingHour::ZeroFill {
                        let fill_sources: Vec<Source> = if sources.is_empty() {
                            vec![Source::NonEmitting]
                        } else {
                            sources.iter().copied().collect()
                        };
                        fill.extend(fill_sources.into_iter().map(|fuel| GenerationRecord {
                            timestamp: ts,
                            zone: zone.clone(),
                            fuel,
                            generation_mwh: 0.0,
                        }));
                    }
                }
            }
            ts += Duration::hours(1);
        }
    }

    match policy.on_missing_hour {
        MissingHour::Error if !report.unexpected.is_empty() => {
            return Err(Error::Coverage {
                gaps: report.unexpected,
            })
        }
        MissingHour::ZeroFill if !fill.is_empty() => {
            records.extend(fill);
            records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        }
        _ => {}
    }
    Ok((report, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn parse(text: &str) -> Result<Vec<GenerationRecord>> {
        parse_generation_reader(text.as_bytes(), "test.csv", LabelPolicy::Strict)
    }

    fn hour(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    #[test]
    fn minimal_file() {
        let recs = parse("timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,natural_gas,5000\n").unwrap();
        assert_eq!(
            recs,
            vec![GenerationRecord {
                timestamp: hour(2022, 1, 1, 0),
                zone: ZoneId::North,
                fuel: Source::Fuel(FuelKind::NaturalGas),
                generation_mwh: 5000.0,
            }]
        );
    }

    #[test]
    fn header_only_and_empty() {
        assert!(parse("timestamp,zone,fuel,generation_mwh\n").unwrap().is_empty());
        assert!(parse("").unwrap().is_empty());
    }

    #[test]
    fn negative_generation_rejected_with_line() {
        let err = parse("timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,natural_gas,10\n2022-01-01T01:00Z,North,natural_gas,-5\n")
            .unwrap_err();
        match err {
            Error::Validation { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = parse("timestamp,zone,fuel,generation_mwh\nnot-a-date,North,natural_gas,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = parse("timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,natural_gas,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse("timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,Unobtainium,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse("timestamp,zone,generation_mwh\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse("timestamp,zone,fuel,generation_mwh\n2022-01-01T00:30Z,North,natural_gas,1\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 2, .. }));
    }

    #[test]
    fn duplicates_collapse_or_conflict() {
        let text = "timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,natural_gas,5\n2022-01-01T00:00Z,North,natural_gas,5\n";
        assert_eq!(parse(text).unwrap().len(), 1);
        let text = "timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,natural_gas,5\n2022-01-01T00:00Z,North,natural_gas,6\n";
        assert!(matches!(parse(text), Err(Error::Conflict { .. })));
    }

    #[test]
    fn raw_labels_aggregate_into_categories() {
        let text = "timestamp,zone,fuel,generation_mwh\n\
            2022-01-01T00:00Z,North,Fossil Hard coal,10\n\
            2022-01-01T00:00Z,North,Fossil Brown coal/Lignite,5\n\
            2022-01-01T00:00Z,North,Wind Onshore,7\n\
            2022-01-01T00:00Z,North,Solar,3\n";
        let recs = parse(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].fuel, Source::Fuel(FuelKind::FossilCoal));
        assert_eq!(recs[0].generation_mwh, 15.0);
        assert_eq!(recs[1].fuel, Source::NonEmitting);
        assert_eq!(recs[1].generation_mwh, 10.0);
    }

    #[test]
    fn lenient_unknown_label() {
        let text = "timestamp,zone,fuel,generation_mwh\n2022-01-01T00:00Z,North,Fossil Peat,4\n";
        let recs = parse_generation_reader(text.as_bytes(), "t", LabelPolicy::Lenient).unwrap();
        assert_eq!(recs[0].fuel, Source::NonEmitting);
    }

    #[test]
    fn timestamps_normalize_to_utc() {
        assert_eq!(parse_timestamp("2022-01-01T01:00+01:00"), Some(hour(2022, 1, 1, 0)));
        assert_eq!(parse_timestamp("2022-01-01T00:00:00Z"), Some(hour(2022, 1, 1, 0)));
        assert_eq!(parse_timestamp("2022-01-01 05:00"), Some(hour(2022, 1, 1, 5)));
        assert_eq!(parse_timestamp("2022-01-01T05:00Z"), Some(hour(2022, 1, 1, 5)));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn label_mapping_table() {
        assert_eq!(
            map_production_type("Fossil Gas"),
            Some(Source::Fuel(FuelKind::NaturalGas))
        );
        assert_eq!(map_production_type("Wind Onshore"), Some(Source::NonEmitting));
        assert_eq!(
            map_production_type("Fossil Coal-derived gas"),
            Some(Source::Fuel(FuelKind::DerivedGas))
        );
        assert_eq!(
            map_production_type("Fossil Oil shale"),
            Some(Source::Fuel(FuelKind::FossilOil))
        );
        assert_eq!(
            map_production_type("fossil_coal"),
            Some(Source::Fuel(FuelKind::FossilCoal))
        );
        assert_eq!(map_production_type("mystery"), None);
    }

    #[test]
    fn zone_names() {
        assert_eq!("Centre-North".parse::<ZoneId>().unwrap(), ZoneId::CentreNorth);
        assert_eq!("CSUD".parse::<ZoneId>().unwrap(), ZoneId::CentreSouth);
        assert_eq!("Sicily".parse::<ZoneId>().unwrap(), ZoneId::Sicily);
        assert_eq!("Corsica".parse::<ZoneId>().unwrap(), ZoneId::Custom("Corsica".into()));
        assert_eq!(ZoneId::BUILTIN.len(), 7);
    }

    fn day_of(zone: ZoneId, day: u32, skip: &[u32]) -> Vec<GenerationRecord> {
        (0..24)
            .filter(|h| !skip.contains(h))
            .map(|h| GenerationRecord {
                timestamp: hour(2022, 3, day, h),
                zone: zone.clone(),
                fuel: Source::Fuel(FuelKind::NaturalGas),
                generation_mwh: 1.0,
            })
            .collect()
    }

    #[test]
    fn coverage_no_gaps() {
        let recs = day_of(ZoneId::North, 1, &[]);
        let (report, out) = apply_coverage(recs.clone(), &CoveragePolicy::default()).unwrap();
        assert!(report.unexpected.is_empty() && report.known.is_empty());
        assert_eq!(out, recs);
    }

    #[test]
    fn coverage_zero_fill_and_error() {
        let recs = day_of(ZoneId::North, 1, &[5]);
        let mut policy = CoveragePolicy::default();
        policy.on_missing_hour = MissingHour::ZeroFill;
        let (report, out) = apply_coverage(recs.clone(), &policy).unwrap();
        assert_eq!(report.unexpected.len(), 1);
        assert_eq!(report.unexpected[0].hours_missing, 1);
        assert_eq!(out.len(), 24);
        assert_eq!(out[5].timestamp, hour(2022, 3, 1, 5));
        assert_eq!(out[5].generation_mwh, 0.0);
        assert_eq!(
            report.to_json_lines().unwrap(),
            "{\"zone\":\"North\",\"start\":\"2022-03-01T05:00Z\",\"end\":\"2022-03-01T05:00Z\",\"hours_missing\":1}\n"
        );

        policy.on_missing_hour = MissingHour::Error;
        assert!(matches!(
            apply_coverage(recs.clone(), &policy),
            Err(Error::Coverage { .. })
        ));

        policy.on_missing_hour = MissingHour::Skip;
        let (_, out) = apply_coverage(recs.clone(), &policy).unwrap();
        assert_eq!(out, recs);
    }

    #[test]
    fn known_gaps_are_not_unexpected() {
        // North covers 2018; Calabria is absent entirely.
        let recs: Vec<_> = (0..48)
            .map(|h| GenerationRecord {
                timestamp: hour(2018, 6, 1, 0) + Duration::hours(h),
                zone: ZoneId::North,
                fuel: Source::NonEmitting,
                generation_mwh: 2.0,
            })
            .collect();
        let mut policy = CoveragePolicy::default();
        policy.expected_zones = vec![ZoneId::Calabria, ZoneId::Sicily];
        policy.on_missing_hour = MissingHour::Error;
        let err = apply_coverage(recs.clone(), &policy).unwrap_err();
        match err {
            Error::Coverage { gaps } => {
                assert_eq!(gaps.len(), 1);
                assert_eq!(gaps[0].zone, ZoneId::Sicily);
                assert_eq!(gaps[0].hours_missing, 48);
            }
            other => panic!("{other:?}"),
        }
        policy.expected_zones = vec![ZoneId::Calabria];
        let (report, _) = apply_coverage(recs, &policy).unwrap();
        assert!(report.unexpected.is_empty());
        assert_eq!(report.known.len(), 1);
        assert_eq!(report.known[0].zone, ZoneId::Calabria);
    }
}
