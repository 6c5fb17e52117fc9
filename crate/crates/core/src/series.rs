//! Hourly emission series and their aggregate views.
//!
//! All calendar bucketing is done in UTC. Rolling windows are trailing and
//! count observations, not wall-clock hours: a 720-point window spans 30 days
//! only when the series has no gaps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Datelike, Utc};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{Method, MethodConfig, MethodId};
use crate::fuel::{FuelKind, Registry};
use crate::ingest::{format_hour, GenerationRecord, ZoneId};

/// Default rolling window, hours.
pub const DEFAULT_WINDOW: usize = 720;

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSeries {
    pub zone: ZoneId,
    pub method: MethodId,
    /// `(hour, tCO₂)`, strictly increasing in time.
    pub points: Vec<(DateTime<Utc>, f64)>,
}

impl EmissionSeries {
    pub fn new(zone: ZoneId, method: MethodId, points: Vec<(DateTime<Utc>, f64)>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(Error::Alignment(format!(
                "series {zone}/{method} is not strictly increasing at {}",
                format_hour(w[1].0)
            )));
        }
        Ok(Self { zone, method, points })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn total(&self) -> f64 {
        self.values().sum()
    }
}

/// Calendar month in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(ts: DateTime<Utc>) -> Self {
        Self {
            year: ts.year(),
            month: ts.month(),
        }
    }

    pub fn hours(self) -> u32 {
        let (ny, nm) = if self.month == 12 {
            (self.year + 1, 1)
        } else {
            (self.year, self.month + 1)
        };
        let first = chrono::NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month");
        let next = chrono::NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid month");
        (next - first).num_days() as u32 * 24
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

/// Time bucket of a difference series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Hour(DateTime<Utc>),
    Month(YearMonth),
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucket::Hour(ts) => f.write_str(&format_hour(*ts)),
            Bucket::Month(m) => m.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resolution {
    #[default]
    Monthly,
    Hourly,
}

/// Emissions of every zone present in `records` under one method.
pub fn hourly_series(
    records: &[GenerationRecord],
    config: &MethodConfig,
    registry: &Registry,
) -> Result<Vec<EmissionSeries>> {
    let method = Method::new(config.clone(), registry)?;
    hourly_series_with(records, &method)
}

/// [`hourly_series`] for an already-bound method.
pub fn hourly_series_with(records: &[GenerationRecord], method: &Method) -> Result<Vec<EmissionSeries>> {
    type Hour = (BTreeMap<FuelKind, f64>, f64);
    let mut by_zone: BTreeMap<&ZoneId, BTreeMap<DateTime<Utc>, Hour>> = BTreeMap::new();
    for r in records {
        let (fuels, total) = by_zone.entry(&r.zone).or_default().entry(r.timestamp).or_default();
        *total += r.generation_mwh;
        if let Some(f) = r.fuel.fuel() {
            *fuels.entry(f).or_insert(0.0) += r.generation_mwh;
        }
    }
    by_zone
        .into_iter()
        .map(|(zone, hours)| {
            let points = hours
                .into_iter()
                .map(|(ts, (fuels, total))| {
                    method.hour_emissions(&fuels, total).map(|e| (ts, e)).map_err(|e| {
                        let at = format!("{zone} {} {}", method.id(), format_hour(ts));
                        match e {
                            Error::Config(m) => Error::Config(format!("{at}: {m}")),
                            Error::Domain(m) => Error::Domain(format!("{at}: {m}")),
                            other => other,
                        }
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EmissionSeries {
                zone: zone.clone(),
                method: method.id(),
                points,
            })
        })
        .collect()
}

/// Mean hourly value per calendar month. Months without observations are omitted.
pub fn monthly_mean(series: &EmissionSeries) -> Vec<(YearMonth, f64)> {
    let mut acc: BTreeMap<YearMonth, (f64, usize)> = BTreeMap::new();
    for &(ts, v) in &series.points {
        let e = acc.entry(YearMonth::of(ts)).or_default();
        e.0 += v;
        e.1 += 1;
    }
    acc.into_iter().map(|(m, (s, n))| (m, s / n as f64)).collect()
}

/// Observation count per calendar month.
pub fn monthly_counts(series: &EmissionSeries) -> BTreeMap<YearMonth, usize> {
    let mut acc = BTreeMap::new();
    for &(ts, _) in &series.points {
        *acc.entry(YearMonth::of(ts)).or_insert(0) += 1;
    }
    acc
}

/// Trailing mean over `window` observations, stamped at the window's last hour.
/// Emits nothing until the window is full.
pub fn rolling_mean(series: &EmissionSeries, window: usize) -> Result<Vec<(DateTime<Utc>, f64)>> {
    if window == 0 {
        return Err(Error::domain("rolling window must be at least 1"));
    }
    let pts = &series.points;
    if window > pts.len() {
        return Ok(Vec::new());
    }
    let w = window as f64;
    let mut out = Vec::with_capacity(pts.len() - window + 1);
    let mut sum: f64 = pts[..window].iter().map(|p| p.1).sum();
    out.push((pts[window - 1].0, sum / w));
    for end in window..pts.len() {
        let start = end + 1 - window;
        if start.is_multiple_of(window) {
            // re-sum periodically so add/subtract drift stays bounded
            sum = pts[start..=end].iter().map(|p| p.1).sum();
        } else {
            sum += pts[end].1 - pts[start - 1].1;
        }
        out.push((pts[end].0, sum / w));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualSummary {
    pub year: i32,
    /// tCO₂.
    pub total_emissions: f64,
    /// Net generation of all sources, MWh.
    pub total_generation: f64,
    /// tCO₂/MWh; absent when generation is zero.
    pub aef: Option<f64>,
}

/// Average emission factor, `None` unless generation is positive.
pub fn aef(total_emissions: f64, total_generation: f64) -> Option<f64> {
    (total_generation > 0.0).then(|| total_emissions / total_generation)
}

/// Yearly totals of a zone's emissions and generation.
///
/// Generation is taken from the records of the series' zone, including
/// non-emitting sources.
pub fn annual_summary(series: &EmissionSeries, records: &[GenerationRecord]) -> Vec<AnnualSummary> {
    let mut years: BTreeMap<i32, (f64, f64)> = BTreeMap::new();
    for &(ts, v) in &series.points {
        years.entry(ts.year()).or_default().0 += v;
    }
    for r in records.iter().filter(|r| r.zone == series.zone) {
        years.entry(r.timestamp.year()).or_default().1 += r.generation_mwh;
    }
    years
        .into_iter()
        .map(|(year, (e, g))| AnnualSummary {
            year,
            total_emissions: e,
            total_generation: g,
            aef: aef(e, g),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSeries {
    pub method_i: MethodId,
    pub method_j: MethodId,
    /// `(bucket, E_i − E_j)`.
    pub points: Vec<(Bucket, f64)>,
}

impl DifferenceSeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// Pointwise `series_i − series_j` over shared buckets.
pub fn difference_series(
    series_i: &EmissionSeries,
    series_j: &EmissionSeries,
    resolution: Resolution,
) -> Result<DifferenceSeries> {
    let (a, b): (BTreeMap<Bucket, f64>, BTreeMap<Bucket, f64>) = match resolution {
        Resolution::Monthly => (
            monthly_mean(series_i)
                .into_iter()
                .map(|(m, v)| (Bucket::Month(m), v))
                .collect(),
            monthly_mean(series_j)
                .into_iter()
                .map(|(m, v)| (Bucket::Month(m), v))
                .collect(),
        ),
        Resolution::Hourly => (
            series_i.points.iter().map(|&(t, v)| (Bucket::Hour(t), v)).collect(),
            series_j.points.iter().map(|&(t, v)| (Bucket::Hour(t), v)).collect(),
        ),
    };
    let points: Vec<(Bucket, f64)> = a
        .iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| (*k, va - vb)))
        .collect();
    let dropped = a.len() + b.len() - 2 * points.len();
    if points.is_empty() {
        return Err(Error::Alignment(format!(
            "{} and {} share no time bucket",
            series_i.method, series_j.method
        )));
    }
    if dropped > 0 {
        log::warn!(
            "{} vs {}: dropped {dropped} unmatched bucket(s)",
            series_i.method,
            series_j.method
        );
    }
    Ok(DifferenceSeries {
        method_i: series_i.method,
        method_j: series_j.method,
        points,
    })
}

/// Writes `bucket,value` CSV with fixed decimals.
pub fn write_bucket_csv<W: Write, B: fmt::Display>(
    rows: impl IntoIterator<Item = (B, f64)>,
    decimals: usize,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bucket", "value"])?;
    for (b, v) in rows {
        w.write_record([b.to_string(), format!("{v:.decimals$}")])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// `[{"bucket": ..., "value": ...}, ...]`.
pub fn bucket_json<B: fmt::Display>(rows: impl IntoIterator<Item = (B, f64)>) -> serde_json::Value {
    serde_json::Value::Array(
        rows.into_iter()
            .map(|(b, v)| serde_json::json!({ "bucket": b.to_string(), "value": v }))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuel::{builtin_parameters, EfSource};
    use crate::ingest::Source;
    use chrono::{Duration, TimeZone};

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap()
    }

    fn series(values: &[f64]) -> EmissionSeries {
        let pts = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (t0() + Duration::hours(i as i64), v))
            .collect();
        EmissionSeries::new(ZoneId::North, MethodId::M1, pts).unwrap()
    }

    fn rec(h: i64, fuel: Source, g: f64) -> GenerationRecord {
        GenerationRecord {
            timestamp: t0() + Duration::hours(h),
            zone: ZoneId::North,
            fuel,
            generation_mwh: g,
        }
    }

    #[test]
    fn hourly_gas_method1() {
        let recs = vec![rec(0, Source::Fuel(FuelKind::NaturalGas), 100.0)];
        let s = hourly_series(&recs, &MethodConfig::new(MethodId::M1), &Registry::builtin()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].points.len(), 1);
        // 100 × 56.10 / 277.7778
        assert!((s[0].points[0].1 - 20.196).abs() < 5e-4);
    }

    #[test]
    fn hourly_zero_and_non_emitting() {
        let recs = vec![
            rec(0, Source::Fuel(FuelKind::NaturalGas), 0.0),
            rec(1, Source::NonEmitting, 500.0),
        ];
        let s = hourly_series(&recs, &MethodConfig::new(MethodId::M4), &Registry::builtin()).unwrap();
        assert_eq!(s[0].points.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0.0, 0.0]);
    }

    #[test]
    fn hourly_method4_mixed() {
        let recs = vec![
            rec(0, Source::Fuel(FuelKind::FossilCoal), 50.0),
            rec(0, Source::Fuel(FuelKind::NaturalGas), 100.0),
        ];
        let s = hourly_series(&recs, &MethodConfig::new(MethodId::M4), &Registry::builtin()).unwrap();
        assert!((s[0].points[0].1 - 130.75).abs() < 5e-3);
    }

    #[test]
    fn hourly_m6_without_baseline_is_config_error() {
        let recs = vec![rec(0, Source::Fuel(FuelKind::NaturalGas), 1.0)];
        let err = hourly_series(&recs, &MethodConfig::new(MethodId::M6), &Registry::builtin()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn method3_series_is_method1_times_oxidation() {
        let recs: Vec<_> = (0..50)
            .map(|h| rec(h, Source::Fuel(FuelKind::FossilCoal), 10.0 + h as f64))
            .collect();
        let reg = Registry::builtin();
        let m1 = hourly_series(&recs, &MethodConfig::new(MethodId::M1), &reg).unwrap();
        let m3 = hourly_series(&recs, &MethodConfig::new(MethodId::M3), &reg).unwrap();
        let o = builtin_parameters(EfSource::Ipcc, FuelKind::FossilCoal).oxidation_fraction;
        for (a, b) in m1[0].points.iter().zip(&m3[0].points) {
            assert!((b.1 / a.1 - o).abs() <= 1e-12);
        }
    }

    #[test]
    fn monthly_means() {
        let jan = Utc.with_ymd_and_hms(2022, 1, 10, 0, 0, 0).unwrap();
        let feb = Utc.with_ymd_and_hms(2022, 2, 3, 0, 0, 0).unwrap();
        let s = EmissionSeries::new(
            ZoneId::North,
            MethodId::M1,
            vec![
                (jan, 1.0),
                (jan + Duration::hours(1), 2.0),
                (jan + Duration::hours(2), 3.0),
                (feb, 4.0),
            ],
        )
        .unwrap();
        let m = monthly_mean(&s);
        assert_eq!(
            m,
            vec![
                (YearMonth { year: 2022, month: 1 }, 2.0),
                (YearMonth { year: 2022, month: 2 }, 4.0)
            ]
        );
        assert_eq!(
            monthly_mean(&series(&[7.5])),
            vec![(YearMonth { year: 2022, month: 1 }, 7.5)]
        );
        let constant = series(&vec![3.25; 24 * 40]);
        assert!(monthly_mean(&constant).iter().all(|&(_, v)| v == 3.25));
    }

    #[test]
    fn rolling_examples() {
        let ramp: Vec<f64> = (1..=720).map(|v| v as f64).collect();
        let r = rolling_mean(&series(&ramp), 720).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].1, 360.5);
        assert_eq!(r[0].0, t0() + Duration::hours(719));

        let s = series(&[4.0, 1.0, 9.0]);
        let id = rolling_mean(&s, 1).unwrap();
        assert_eq!(id, s.points);

        assert!(rolling_mean(&s, 4).unwrap().is_empty());
        assert!(rolling_mean(&s, 0).is_err());

        let c = rolling_mean(&series(&vec![2.2; 3000]), 720).unwrap();
        assert_eq!(c.len(), 3000 - 719);
        assert!(c.iter().all(|p| (p.1 - 2.2).abs() < 1e-12));
    }

    #[test]
    fn rolling_periodic_is_constant() {
        let period = [1.0, 5.0, 2.5, 8.0, 0.5, 3.0];
        let vals: Vec<f64> = (0..600).map(|i| period[i % 6]).collect();
        let r = rolling_mean(&series(&vals), 6).unwrap();
        let first = r[0].1;
        assert!(r.iter().all(|p| (p.1 - first).abs() < 1e-12));
    }

    #[test]
    fn annual_examples() {
        assert!((aef(15_606_947.0, 122_222_342.0).unwrap() - 0.1277).abs() < 5e-5);
        assert!((aef(57_552_323.0, 122_222_342.0).unwrap() - 0.4709).abs() < 5e-5);
        assert_eq!(aef(0.0, 100.0), Some(0.0));
        assert_eq!(aef(10.0, 0.0), None);

        let recs = vec![
            rec(0, Source::Fuel(FuelKind::NaturalGas), 100.0),
            rec(0, Source::NonEmitting, 300.0),
        ];
        let s = hourly_series(&recs, &MethodConfig::new(MethodId::M1), &Registry::builtin()).unwrap();
        let a = annual_summary(&s[0], &recs);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].total_generation, 400.0);
        assert!((a[0].aef.unwrap() - s[0].total() / 400.0).abs() < 1e-15);
    }

    #[test]
    fn monthly_conservation() {
        let vals: Vec<f64> = (0..24 * 365).map(|i| ((i * 37) % 101) as f64 + 0.25).collect();
        let s = series(&vals);
        let total: f64 = monthly_mean(&s).iter().map(|(m, v)| v * m.hours() as f64).sum();
        let annual = annual_summary(&s, &[])[0].total_emissions;
        assert!((total - annual).abs() / annual < 1e-6);
    }

    #[test]
    fn differences() {
        let i = series(&[10.0, 12.0]);
        let mut j = series(&[7.0, 8.0]);
        j.method = MethodId::M2;
        let d = difference_series(&i, &j, Resolution::Hourly).unwrap();
        assert_eq!(d.values(), vec![3.0, 4.0]);
        let r = difference_series(&j, &i, Resolution::Hourly).unwrap();
        assert_eq!(r.values(), vec![-3.0, -4.0]);
        let same = difference_series(&i, &i, Resolution::Monthly).unwrap();
        assert!(same.values().iter().all(|&v| v == 0.0));

        let far = EmissionSeries::new(
            ZoneId::North,
            MethodId::M2,
            vec![(Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap(), 1.0)],
        )
        .unwrap();
        assert!(matches!(
            difference_series(&i, &far, Resolution::Monthly),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn series_must_increase() {
        let t = t0();
        assert!(EmissionSeries::new(ZoneId::North, MethodId::M1, vec![(t, 1.0), (t, 2.0)]).is_err());
    }

    #[test]
    fn exports() {
        let mut buf = Vec::new();
        write_bucket_csv(vec![(YearMonth { year: 2022, month: 3 }, 1.23456)], 3, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bucket,value\n2022-03,1.235\n");
        let j = bucket_json(vec![("x", 2.0)]);
        assert_eq!(j.to_string(), r#"[{"bucket":"x","value":2.0}]"#);
    }
}
