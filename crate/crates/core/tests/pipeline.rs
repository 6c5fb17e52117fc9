use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, TimeZone, Utc};

use gridcarbon::estimators::MethodId;
use gridcarbon::stats::{report_from_values, Kernel};

const BIN: &str = env!("CARGO_BIN_EXE_gridcarbon");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/two_zone_two_month.csv")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn gridcarbon")
}

fn write_csv(dir: &Path, rows: &[(String, &str, &str, f64)]) -> PathBuf {
    let mut s = String::from("timestamp,zone,fuel,generation_mwh\n");
    for (t, z, f, g) in rows {
        writeln!(s, "{t},{z},{f},{g}").unwrap();
    }
    let p = dir.join("input.csv");
    std::fs::write(&p, s).unwrap();
    p
}

fn hours(n: i64) -> impl Iterator<Item = String> {
    let t0 = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
    (0..n).map(move |h| (t0 + Duration::hours(h)).format("%Y-%m-%dT%H:%MZ").to_string())
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn one_zone_one_method_one_day() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<_> = hours(24)
        .flat_map(|t| [(t.clone(), "North", "Fossil Gas", 1000.0), (t, "North", "Solar", 200.0)])
        .collect();
    let input = write_csv(dir.path(), &rows);
    let out = dir.path().join("out");
    let o = run(&[
        "compute",
        "--input",
        input.to_str().unwrap(),
        "--methods",
        "M1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hourly = csv_rows(&out.join("North_M1_hourly.csv"));
    assert_eq!(hourly.len(), 24);
    // 1000 MWh gas at 56.10 tCO2/TJ
    let expected = 1000.0 * 56.10 / 277.7778;
    for r in &hourly {
        assert!((r[1].parse::<f64>().unwrap() - expected).abs() < 5e-4);
    }
    assert_eq!(csv_rows(&out.join("North_M1_monthly.csv")).len(), 1);
    assert!(csv_rows(&out.join("North_M1_rolling.csv")).is_empty());
}

#[test]
fn m6_without_baseline_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compute",
        "--input",
        fixture().to_str().unwrap(),
        "--methods",
        "M1,M6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("M6"));
}

#[test]
fn six_methods_give_fifteen_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compare",
        "--input",
        fixture().to_str().unwrap(),
        "--zones",
        "North",
        "--methods",
        "M1,M2,M3,M4,M5,M6",
        "--baseline-2019",
        "6.0e7",
        "--g2019",
        "natural_gas=9.0e7,fossil_coal=1.5e7,fossil_oil=2.0e6,derived_gas=1.0e6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pairs = csv_rows(&dir.path().join("North_compare_pairs.csv"));
    assert_eq!(pairs.len(), 15);
    let matrix = csv_rows(&dir.path().join("North_compare_matrix.csv"));
    assert_eq!(matrix.len(), 6);
    for (r, row) in matrix.iter().enumerate() {
        assert_eq!(row[r + 1], "-");
        for c in 0..r {
            assert!(row[c + 1].starts_with('['), "{row:?}");
        }
        for c in r + 1..6 {
            assert!(row[c + 1].is_empty());
        }
    }
}

#[test]
fn identical_methods_are_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compare",
        "--input",
        fixture().to_str().unwrap(),
        "--methods",
        "M1",
        "--pairs",
        "M1:M1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn constant_offset_lies_in_every_interval() {
    for c in [-250.0, 0.0, 3.5, 1e4] {
        for n in [12usize, 60, 500] {
            // zero-mean alternating perturbation keeps the mean at c
            let values: Vec<f64> = (0..n)
                .map(|i| c + if i % 2 == 0 { 0.5 } else { -0.5 } * (1.0 + (i / 2) as f64 % 3.0))
                .collect();
            for kernel in [Kernel::Bartlett, Kernel::Truncated] {
                if let Ok(r) = report_from_values(MethodId::M4, MethodId::M5, &values, 0.05, Some(0), kernel) {
                    assert!(r.interval.0 <= c && c <= r.interval.1, "{c} {n} {:?}", r.interval);
                }
            }
            let r = report_from_values(MethodId::M4, MethodId::M5, &values, 0.05, None, Kernel::Bartlett).unwrap();
            assert!(r.interval.0 <= c && c <= r.interval.1);
        }
    }
}

#[test]
fn zone_without_emitting_generation_has_zero_emissions() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<_> = hours(48)
        .flat_map(|t| {
            [
                (t.clone(), "Sardinia", "Wind Onshore", 300.0),
                (t, "Sardinia", "Hydro Run-of-river and poundage", 50.0),
            ]
        })
        .collect();
    let input = write_csv(dir.path(), &rows);
    let out = dir.path().join("out");
    let o = run(&[
        "report",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("zonal_summary.csv"));
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert_eq!(r[3], "ok");
        assert_eq!(r[4], "16800");
        assert_eq!(r[5], "0");
        assert_eq!(r[6], "0.0000");
    }
}

#[test]
fn annual_aef_is_emissions_over_generation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "compute",
        "--input",
        fixture().to_str().unwrap(),
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    for zone in ["North", "Sicily"] {
        let text = std::fs::read_to_string(dir.path().join(format!("{zone}_annual.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let methods = v["methods"].as_array().unwrap();
        assert_eq!(methods.len(), 5);
        for m in methods {
            for y in m["years"].as_array().unwrap() {
                let e = y["total_emissions"].as_f64().unwrap();
                let g = y["total_generation"].as_f64().unwrap();
                let aef = y["aef"].as_f64().unwrap();
                assert!((e / g - aef).abs() <= 5e-5);
            }
        }
    }
}

#[test]
fn unknown_label_strict_fails_lenient_passes() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<_> = hours(3).map(|t| (t, "North", "Fossil Peat", 10.0)).collect();
    let input = write_csv(dir.path(), &rows);
    let out = dir.path().join("out");
    let strict = run(&[
        "compute",
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(strict.status.code(), Some(3));
    let lenient = run(&[
        "compute",
        "--input",
        input.to_str().unwrap(),
        "--lenient-labels",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(lenient.status.success());
}

#[test]
fn requested_zone_without_data_is_reported_absent() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "report",
        "--input",
        fixture().to_str().unwrap(),
        "--zones",
        "North,Sardinia",
        "--methods",
        "M1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("zonal_summary.csv"));
    assert!(rows.iter().any(|r| r[0] == "North" && r[3] == "ok"));
    assert!(rows.iter().any(|r| r[0] == "Sardinia" && r[3] == "absent"));
}

#[test]
fn validate_reports_the_fixture_gap() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "validate",
        "--input",
        fixture().to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["zone"], "Sicily");
    assert_eq!(lines[0]["hours_missing"], 3);
    let err = run(&[
        "validate",
        "--input",
        fixture().to_str().unwrap(),
        "--on-missing",
        "error",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(err.status.code(), Some(3));
}

#[test]
fn auxiliary_methods_run_from_parameter_files() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let o = run(&[
        "compute",
        "--input",
        fixture().to_str().unwrap(),
        "--zones",
        "North",
        "--methods",
        "M1,M4,imports,capacity,energy_share,plant_quadratic,stoichiometric,tier3_tech",
        "--method-params",
        fixtures.join("method_params.toml").to_str().unwrap(),
        "--ef-registry",
        fixtures.join("registry_override.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("North_annual.csv"));
    let e = |m: &str| -> f64 {
        rows.iter().find(|r| r[0] == m && r[1] == "E_t").unwrap()[2]
            .parse()
            .unwrap()
    };
    let hours = csv_rows(&dir.path().join("North_M1_hourly.csv")).len() as f64;
    // 500 MWh/h at 0.35 tCO2/MWh on top of the M4 base
    assert!((e("imports") - e("M4") - 175.0 * hours).abs() <= 1.0);
    assert_eq!(e("energy_share"), e("M1"));
}

#[test]
fn malformed_parameter_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("params.toml");
    std::fs::write(&bad, "unknown_key = 1\n").unwrap();
    let o = run(&[
        "compute",
        "--input",
        fixture().to_str().unwrap(),
        "--method-params",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
