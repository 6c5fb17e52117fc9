//! Run orchestration behind the `gridcarbon` command line.
//!
//! Each command loads the inputs, applies the coverage policy, builds one
//! hourly series per (zone, method) in parallel and writes its outputs under
//! the run's output directory. Output bytes depend only on the inputs:
//! iteration order is fixed and floats use fixed formatting (integer tCO₂
//! for totals and intervals, 4 decimals for AEF, 3 decimals for series
//! points).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{AuxParams, Method, MethodConfig, MethodId};
use crate::fuel::{FuelKind, Registry};
use crate::ingest::{
    apply_coverage, parse_generation_files, CoveragePolicy, CoverageReport, GenerationRecord, LabelPolicy, ZoneId,
};
use crate::series::{
    annual_summary, bucket_json, difference_series, hourly_series_with, monthly_mean, rolling_mean, write_bucket_csv,
    AnnualSummary, DifferenceSeries, EmissionSeries, Resolution, DEFAULT_WINDOW,
};
use crate::stats::{mean_difference_report, IntervalMatrix, Kernel, PairCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::config(format!("unknown output format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    /// `None` selects every zone present in the data.
    pub zones: Option<Vec<ZoneId>>,
    pub methods: Vec<MethodId>,
    /// Half-open `[from, to)`.
    pub period: Option<(DateTime<Utc>, DateTime<Utc>)>,
    pub registry: Registry,
    pub baseline_2019: Option<f64>,
    pub g2019: Option<BTreeMap<FuelKind, f64>>,
    pub aux: AuxParams,
    pub window: usize,
    pub lag: Option<usize>,
    pub kernel: Kernel,
    pub resolution: Resolution,
    pub alpha: f64,
    /// Pairs to compare; `None` compares every pair of `methods`.
    pub pairs: Option<Vec<(MethodId, MethodId)>>,
    pub coverage: CoveragePolicy,
    pub label_policy: LabelPolicy,
    pub out_dir: PathBuf,
    pub formats: BTreeSet<Format>,
}

impl RunConfig {
    pub fn new(inputs: Vec<PathBuf>, out_dir: PathBuf) -> Self {
        Self {
            inputs,
            zones: None,
            methods: MethodId::COMPARED[..5].to_vec(),
            period: None,
            registry: Registry::builtin(),
            baseline_2019: None,
            g2019: None,
            aux: AuxParams::default(),
            window: DEFAULT_WINDOW,
            lag: None,
            kernel: Kernel::Bartlett,
            resolution: Resolution::Monthly,
            alpha: 0.05,
            pairs: None,
            coverage: CoveragePolicy::default(),
            label_policy: LabelPolicy::Strict,
            out_dir,
            formats: BTreeSet::from([Format::Csv]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::config("no input files"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("at least one method must be selected"));
        }
        if matches!(&self.zones, Some(z) if z.is_empty()) {
            return Err(Error::config("at least one zone must be selected"));
        }
        if let Some((from, to)) = self.period {
            if from >= to {
                return Err(Error::config("period start must precede its end"));
            }
        }
        if self.window == 0 {
            return Err(Error::config("rolling window must be at least 1"));
        }
        if self.formats.is_empty() {
            return Err(Error::config("no output format selected"));
        }
        Ok(())
    }

    fn method_config(&self, id: MethodId) -> MethodConfig {
        let mut cfg = MethodConfig::new(id).with_extras(self.aux.clone());
        cfg.baseline_2019_emissions = self.baseline_2019;
        cfg.generation_2019_by_fuel = self.g2019.clone();
        cfg
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Loaded, filtered and coverage-checked input.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<GenerationRecord>,
    pub coverage: CoverageReport,
    pub zones: Vec<ZoneId>,
}

pub fn load(config: &RunConfig) -> Result<Dataset> {
    config.validate()?;
    let records = parse_generation_files(&config.inputs, config.label_policy)?;
    let records: Vec<_> = records
        .into_iter()
        .filter(|r| config.zones.as_ref().is_none_or(|z| z.contains(&r.zone)))
        .filter(|r| {
            config
                .period
                .is_none_or(|(from, to)| from <= r.timestamp && r.timestamp < to)
        })
        .collect();
    let mut policy = config.coverage.clone();
    if let Some(z) = &config.zones {
        policy.expected_zones = z.clone();
    }
    if policy.span.is_none() {
        if let Some((from, to)) = config.period {
            policy.span = Some((from, to - chrono::Duration::hours(1)));
        }
    }
    let (coverage, records) = apply_coverage(records, &policy)?;
    let zones: Vec<ZoneId> = match &config.zones {
        Some(z) => z.clone(),
        None => records
            .iter()
            .map(|r| r.zone.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    if zones.is_empty() {
        return Err(Error::config("no zone selected: input has no records in range"));
    }
    Ok(Dataset {
        records,
        coverage,
        zones,
    })
}

type SeriesMap = BTreeMap<(ZoneId, MethodId), EmissionSeries>;

fn build_series(config: &RunConfig, records: &[GenerationRecord], methods: &[MethodId]) -> Result<SeriesMap> {
    let bound = methods
        .iter()
        .map(|&id| Method::new(config.method_config(id), &config.registry))
        .collect::<Result<Vec<_>>>()?;
    let per_method = bound
        .par_iter()
        .map(|m| hourly_series_with(records, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_method
        .into_iter()
        .flatten()
        .map(|s| ((s.zone.clone(), s.method), s))
        .collect())
}

fn file_stem(zone: &ZoneId) -> String {
    zone.name()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

fn fmt_int(x: f64) -> String {
    format!("{:.0}", x.round() + 0.0)
}

fn fmt_aef(x: Option<f64>) -> String {
    x.map(|v| format!("{:.4}", v + 0.0)).unwrap_or_default()
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn put_json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.put(name, text)
    }

    fn put_buckets<B: std::fmt::Display>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = (B, f64)>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        write_bucket_csv(rows, 3, &mut buf)?;
        self.put(name, buf)
    }
}

/// Files written by a command.
#[derive(Debug, Clone, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
    pub coverage: CoverageReport,
}

/// Hourly, monthly, rolling and annual outputs for every (zone, method).
pub fn cmd_compute(config: &RunConfig) -> Result<Outputs> {
    let data = load(config)?;
    let series = build_series(config, &data.records, &config.methods)?;
    let mut w = Writer::new(&config.out_dir)?;
    w.put("coverage_gaps.jsonl", data.coverage.to_json_lines()?)?;

    for zone in &data.zones {
        let stem = file_stem(zone);
        let mut monthly_lines = Vec::new();
        let mut rolling_lines = Vec::new();
        let mut annual: Vec<(MethodId, Vec<AnnualSummary>)> = Vec::new();
        for &method in &config.methods {
            let Some(s) = series.get(&(zone.clone(), method)) else {
                log::warn!("no data for zone {zone}");
                continue;
            };
            let monthly = monthly_mean(s);
            let rolling = rolling_mean(s, config.window)?;
            let hourly_rows = s.points.iter().map(|&(t, v)| (crate::ingest::format_hour(t), v));
            let rolling_rows: Vec<_> = rolling
                .iter()
                .map(|&(t, v)| (crate::ingest::format_hour(t), v))
                .collect();
            if config.wants(Format::Csv) {
                w.put_buckets(&format!("{stem}_{method}_hourly.csv"), hourly_rows.clone())?;
                w.put_buckets(&format!("{stem}_{method}_monthly.csv"), monthly.iter().copied())?;
                w.put_buckets(&format!("{stem}_{method}_rolling.csv"), rolling_rows.iter().cloned())?;
            }
            if config.wants(Format::Json) {
                w.put_json(
                    &format!("{stem}_{method}.json"),
                    &serde_json::json!({
                        "zone": zone,
                        "method": method,
                        "window": config.window,
                        "hourly": bucket_json(hourly_rows),
                        "monthly": bucket_json(monthly.iter().copied()),
                        "rolling": bucket_json(rolling_rows.iter().cloned()),
                    }),
                )?;
            }
            monthly_lines.push((
                method.to_string(),
                monthly
                    .iter()
                    .map(|(m, v)| (m.year as f64 + (m.month as f64 - 1.0) / 12.0, *v))
                    .collect(),
            ));
            rolling_lines.push((
                method.to_string(),
                rolling
                    .iter()
                    .map(|(t, v)| (t.timestamp() as f64 / 3600.0, *v))
                    .collect(),
            ));
            annual.push((method, annual_summary(s, &data.records)));
        }
        if annual.is_empty() {
            continue;
        }
        if config.wants(Format::Csv) {
            w.put(&format!("{stem}_annual.csv"), annual_table_csv(&annual)?)?;
        }
        if config.wants(Format::Json) {
            w.put_json(&format!("{stem}_annual.json"), &annual_json(zone, &annual))?;
        }
        if config.wants(Format::Svg) {
            w.put(
                &format!("{stem}_monthly.svg"),
                line_chart_svg(&format!("Monthly mean emissions, {zone} (tCO2/h)"), &monthly_lines),
            )?;
            w.put(
                &format!("{stem}_rolling.svg"),
                line_chart_svg(
                    &format!("Rolling mean ({} h) emissions, {zone} (tCO2/h)", config.window),
                    &rolling_lines,
                ),
            )?;
        }
    }
    Ok(Outputs {
        files: w.written,
        coverage: data.coverage,
    })
}

/// Annual totals laid out with years as columns: `E_t` and `AEF` rows per
/// method followed by one `G_t` row.
pub fn annual_table_csv(annual: &[(MethodId, Vec<AnnualSummary>)]) -> Result<String> {
    let years: BTreeSet<i32> = annual.iter().flat_map(|(_, a)| a.iter().map(|s| s.year)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string(), "row".to_string()];
    header.extend(years.iter().map(|y| y.to_string()));
    w.write_record(&header)?;
    let lookup = |a: &[AnnualSummary], y: i32| a.iter().find(|s| s.year == y).cloned();
    for (method, rows) in annual {
        let mut e = vec![method.to_string(), "E_t".to_string()];
        let mut f = vec![method.to_string(), "AEF".to_string()];
        for &y in &years {
            let s = lookup(rows, y);
            e.push(s.as_ref().map(|s| fmt_int(s.total_emissions)).unwrap_or_default());
            f.push(fmt_aef(s.and_then(|s| s.aef)));
        }
        w.write_record(&e)?;
        w.write_record(&f)?;
    }
    if let Some((_, rows)) = annual.first() {
        let mut g = vec![String::new(), "G_t".to_string()];
        for &y in &years {
            g.push(lookup(rows, y).map(|s| fmt_int(s.total_generation)).unwrap_or_default());
        }
        w.write_record(&g)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv writer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

fn annual_json(zone: &ZoneId, annual: &[(MethodId, Vec<AnnualSummary>)]) -> serde_json::Value {
    let methods: Vec<_> = annual
        .iter()
        .map(|(m, rows)| {
            serde_json::json!({
                "method": m,
                "tier": m.tier(),
                "years": rows,
            })
        })
        .collect();
    serde_json::json!({ "zone": zone, "methods": methods })
}

/// Canonical lower-triangular orientation `(earlier, later)` by position in `methods`.
fn canonical_pairs(config: &RunConfig) -> Result<Vec<(MethodId, MethodId)>> {
    let order = |m: MethodId| config.methods.iter().position(|&x| x == m);
    match &config.pairs {
        None => {
            if config.methods.len() < 2 {
                return Err(Error::config("compare needs at least two methods"));
            }
            let mut out = Vec::new();
            for (r, &row) in config.methods.iter().enumerate() {
                for &col in &config.methods[..r] {
                    out.push((col, row));
                }
            }
            Ok(out)
        }
        Some(pairs) => {
            if pairs.is_empty() {
                return Err(Error::config("empty pair list"));
            }
            let mut seen = BTreeSet::new();
            let mut out = Vec::new();
            for &(a, b) in pairs {
                let (Some(ia), Some(ib)) = (order(a), order(b)) else {
                    return Err(Error::config(format!("pair {a}:{b} uses a method not in --methods")));
                };
                let p = if ia <= ib { (a, b) } else { (b, a) };
                if seen.insert(p) {
                    out.push(p);
                }
            }
            Ok(out)
        }
    }
}

/// Pairwise non-rejection intervals and difference series per zone.
///
/// Pair `(i, j)` is reported as `E_i − E_j` with `i` listed before `j` in
/// `methods`; in the matrix this is row `j`, column `i`.
pub fn cmd_compare(config: &RunConfig) -> Result<Outputs> {
    let pairs = canonical_pairs(config)?;
    let data = load(config)?;
    let needed: Vec<MethodId> = {
        let set: BTreeSet<MethodId> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        config.methods.iter().copied().filter(|m| set.contains(m)).collect()
    };
    let series = build_series(config, &data.records, &needed)?;
    let mut w = Writer::new(&config.out_dir)?;
    let mut any_ok = false;
    let mut last_degenerate = None;

    for zone in &data.zones {
        let stem = file_stem(zone);
        let mut cells = BTreeMap::new();
        let mut tidy = csv::Writer::from_writer(Vec::new());
        tidy.write_record([
            "method_i",
            "method_j",
            "status",
            "n",
            "lag_m",
            "kernel",
            "d_bar",
            "long_run_variance",
            "std_error",
            "mu_lo",
            "mu_hi",
            "mu_lo_rounded",
            "mu_hi_rounded",
        ])?;
        let mut diff_lines = Vec::new();
        let mut found = false;
        for &(i, j) in &pairs {
            let (Some(si), Some(sj)) = (series.get(&(zone.clone(), i)), series.get(&(zone.clone(), j))) else {
                continue;
            };
            found = true;
            let diff: DifferenceSeries = difference_series(si, sj, config.resolution)?;
            let cell = match mean_difference_report(&diff, config.alpha, config.lag, config.kernel) {
                Ok(r) => {
                    any_ok = true;
                    let (lo, hi) = r.rounded_interval();
                    tidy.write_record([
                        i.to_string(),
                        j.to_string(),
                        "ok".to_string(),
                        r.n.to_string(),
                        r.lag_m.to_string(),
                        r.kernel.to_string(),
                        format!("{:.6}", r.d_bar),
                        format!("{:.6}", r.long_run_variance),
                        format!("{:.6}", r.std_error),
                        format!("{:.6}", r.interval.0),
                        format!("{:.6}", r.interval.1),
                        lo.to_string(),
                        hi.to_string(),
                    ])?;
                    PairCell::Interval(r)
                }
                Err(e @ Error::DegenerateVariance(_)) => {
                    log::warn!("{zone} {i} vs {j}: {e}");
                    tidy.write_record(
                        [i.to_string(), j.to_string(), "degenerate".to_string()]
                            .into_iter()
                            .chain(std::iter::repeat_n(String::new(), 10)),
                    )?;
                    let msg = e.to_string();
                    last_degenerate = Some(e);
                    PairCell::Degenerate(msg)
                }
                Err(e) => return Err(e),
            };
            cells.insert((j, i), cell);

            if config.wants(Format::Csv) {
                w.put_buckets(&format!("{stem}_diff_{i}_{j}.csv"), diff.points.iter().copied())?;
            }
            diff_lines.push((
                format!("{i} - {j}"),
                diff.points.iter().map(|(b, v)| (bucket_x(b), *v)).collect::<Vec<_>>(),
            ));
        }
        if !found {
            log::warn!("no data for zone {zone}");
            continue;
        }
        let matrix = IntervalMatrix {
            methods: needed.clone(),
            cells,
        };
        if config.wants(Format::Csv) {
            w.put(&format!("{stem}_compare_matrix.csv"), matrix.to_csv()?)?;
            let bytes = tidy
                .into_inner()
                .map_err(|e| Error::io("<csv writer>", e.into_error()))?;
            w.put(&format!("{stem}_compare_pairs.csv"), bytes)?;
        }
        if config.wants(Format::Json) {
            w.put_json(&format!("{stem}_compare.json"), &matrix.to_json())?;
        }
        if config.wants(Format::Svg) {
            w.put(
                &format!("{stem}_differences.svg"),
                line_chart_svg(&format!("Differences between methods, {zone} (tCO2/h)"), &diff_lines),
            )?;
        }
    }
    if !any_ok {
        return Err(
            last_degenerate.unwrap_or_else(|| Error::Alignment("no overlapping data for any requested pair".into()))
        );
    }
    Ok(Outputs {
        files: w.written,
        coverage: data.coverage,
    })
}

fn bucket_x(b: &crate::series::Bucket) -> f64 {
    match b {
        crate::series::Bucket::Month(m) => m.year as f64 + (m.month as f64 - 1.0) / 12.0,
        crate::series::Bucket::Hour(t) => t.timestamp() as f64 / 3600.0,
    }
}

/// One row of the zonal summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneYearRow {
    pub zone: ZoneId,
    pub year: Option<i32>,
    pub method: MethodId,
    /// `None` when the zone has no data.
    pub summary: Option<AnnualSummary>,
}

/// Generation, emissions and AEF per zone, year and method.
pub fn zonal_summary(config: &RunConfig, data: &Dataset) -> Result<Vec<ZoneYearRow>> {
    let series = build_series(config, &data.records, &config.methods)?;
    let all_years: BTreeSet<i32> = match config.period {
        Some((from, to)) => (from.year()..=(to - chrono::Duration::hours(1)).year()).collect(),
        None => data.records.iter().map(|r| r.timestamp.year()).collect(),
    };
    let mut rows = Vec::new();
    for zone in &data.zones {
        for &method in &config.methods {
            match series.get(&(zone.clone(), method)) {
                Some(s) => {
                    let annual = annual_summary(s, &data.records);
                    for y in &all_years {
                        rows.push(ZoneYearRow {
                            zone: zone.clone(),
                            year: Some(*y),
                            method,
                            summary: annual.iter().find(|a| a.year == *y).cloned(),
                        });
                    }
                }
                None => {
                    if all_years.is_empty() {
                        rows.push(ZoneYearRow {
                            zone: zone.clone(),
                            year: None,
                            method,
                            summary: None,
                        });
                    }
                    for y in &all_years {
                        rows.push(ZoneYearRow {
                            zone: zone.clone(),
                            year: Some(*y),
                            method,
                            summary: None,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Zonal summary table.
pub fn cmd_report(config: &RunConfig) -> Result<Outputs> {
    let data = load(config)?;
    let rows = zonal_summary(config, &data)?;
    let mut w = Writer::new(&config.out_dir)?;
    if config.wants(Format::Csv) {
        let mut c = csv::Writer::from_writer(Vec::new());
        c.write_record([
            "zone",
            "year",
            "method",
            "status",
            "generation_mwh",
            "emissions_tco2",
            "aef",
        ])?;
        for r in &rows {
            let year = r.year.map(|y| y.to_string()).unwrap_or_default();
            match &r.summary {
                Some(s) => c.write_record([
                    r.zone.to_string(),
                    year,
                    r.method.to_string(),
                    "ok".to_string(),
                    fmt_int(s.total_generation),
                    fmt_int(s.total_emissions),
                    fmt_aef(s.aef),
                ])?,
                None => c.write_record([
                    r.zone.to_string(),
                    year,
                    r.method.to_string(),
                    "absent".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?,
            }
        }
        let bytes = c.into_inner().map_err(|e| Error::io("<csv writer>", e.into_error()))?;
        w.put("zonal_summary.csv", bytes)?;
    }
    if config.wants(Format::Json) {
        let items: Vec<_> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "zone": r.zone,
                    "year": r.year,
                    "method": r.method,
                    "status": if r.summary.is_some() { "ok" } else { "absent" },
                    "generation_mwh": r.summary.as_ref().map(|s| s.total_generation),
                    "emissions_tco2": r.summary.as_ref().map(|s| s.total_emissions),
                    "aef": r.summary.as_ref().and_then(|s| s.aef),
                })
            })
            .collect();
        w.put_json("zonal_summary.json", &serde_json::Value::Array(items))?;
    }
    if config.wants(Format::Svg) {
        for &method in &config.methods {
            let lines: Vec<(String, Vec<(f64, f64)>)> = data
                .zones
                .iter()
                .map(|z| {
                    let pts = rows
                        .iter()
                        .filter(|r| &r.zone == z && r.method == method)
                        .filter_map(|r| Some((r.year? as f64, r.summary.as_ref()?.aef?)))
                        .collect();
                    (z.to_string(), pts)
                })
                .collect();
            w.put(
                &format!("zonal_aef_{method}.svg"),
                line_chart_svg(&format!("Average emission factor by zone, {method} (tCO2/MWh)"), &lines),
            )?;
        }
    }
    Ok(Outputs {
        files: w.written,
        coverage: data.coverage,
    })
}

/// Parses and coverage-checks the inputs; writes the gap report.
pub fn cmd_validate(config: &RunConfig) -> Result<(Dataset, Outputs)> {
    let data = load(config)?;
    let mut w = Writer::new(&config.out_dir)?;
    w.put("coverage_gaps.jsonl", data.coverage.to_json_lines()?)?;
    let out = Outputs {
        files: w.written,
        coverage: data.coverage.clone(),
    };
    Ok((data, out))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG line chart.
pub fn line_chart_svg(title: &str, lines: &[(String, Vec<(f64, f64)>)]) -> String {
    const W: f64 = 800.0;
    const H: f64 = 450.0;
    const L: f64 = 70.0;
    const R: f64 = 150.0;
    const T: f64 = 40.0;
    const B: f64 = 40.0;
    let pts = lines.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let sy = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<polyline points="{L},{T} {L},{} {},{}" fill="none" stroke="black"/>"#,
        H - B,
        W - R,
        H - B
    );
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.1}</text>"#,
            L - 6.0,
            sy(v) + 4.0,
            v
        );
    }
    for k in 0..=4 {
        let v = x0 + (x1 - x0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{:.2}</text>"#,
            sx(v),
            H - B + 16.0,
            v
        );
    }
    for (idx, (name, p)) in lines.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let ly = T + 16.0 * idx as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - R + 10.0,
            W - R + 30.0,
            W - R + 36.0,
            ly + 4.0,
            xml_escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}
