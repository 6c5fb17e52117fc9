use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use chrono::{DateTime, NaiveDate, Utc};
use clap::{Args, Parser, Subcommand};

use gridcarbon::estimators::{AuxParams, MethodId};
use gridcarbon::fuel::{FuelKind, Registry};
use gridcarbon::ingest::{parse_timestamp, CoveragePolicy, LabelPolicy, MissingHour, ZoneId};
use gridcarbon::report::{cmd_compare, cmd_compute, cmd_report, cmd_validate, Format, Outputs, RunConfig};
use gridcarbon::series::Resolution;
use gridcarbon::Error;

#[derive(Parser)]
#[command(
    name = "gridcarbon",
    version,
    about = "CO2 emissions from electricity generation by emission-factor method"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hourly, monthly, rolling and annual emissions per zone and method.
    Compute(CommonArgs),
    /// Pairwise mean-difference intervals between methods.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Pairs such as `M4:M5`; defaults to every pair of --methods.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        /// Truncation lag; defaults to floor(n^(1/3)).
        #[arg(long)]
        lag: Option<usize>,
        /// bartlett or truncated.
        #[arg(long, default_value = "bartlett")]
        kernel: String,
        /// monthly or hourly differencing.
        #[arg(long, default_value = "monthly")]
        bucket: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Generation, emissions and AEF per zone and year.
    Report(CommonArgs),
    /// Parse inputs and report coverage gaps as JSON lines.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Generation CSV files.
    #[arg(long = "input", required = true, value_delimiter = ',')]
    inputs: Vec<PathBuf>,
    /// Zones to include; all zones in the data by default.
    #[arg(long, value_delimiter = ',')]
    zones: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "M1,M2,M3,M4,M5")]
    methods: Vec<String>,
    /// Inclusive start (date or ISO 8601 hour, UTC).
    #[arg(long)]
    from: Option<String>,
    /// Exclusive end.
    #[arg(long)]
    to: Option<String>,
    /// TOML or JSON file overriding builtin fuel parameters.
    #[arg(long)]
    ef_registry: Option<PathBuf>,
    /// 2019 baseline emissions, tCO2 (method M6).
    #[arg(long = "baseline-2019")]
    baseline_2019: Option<f64>,
    /// 2019 generation by fuel, e.g. `fossil_coal=1.2e7,natural_gas=8e7` (method M6).
    #[arg(long)]
    g2019: Option<String>,
    /// TOML or JSON parameters for auxiliary methods.
    #[arg(long)]
    method_params: Option<PathBuf>,
    /// Rolling-mean window in hours.
    #[arg(long, default_value_t = 720)]
    window: usize,
    /// skip, zero-fill or error.
    #[arg(long, default_value = "skip")]
    on_missing: String,
    /// Treat unknown production types as non-emitting instead of failing.
    #[arg(long)]
    lenient_labels: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    format: Vec<String>,
}

fn parse_bound(s: &str) -> Result<DateTime<Utc>, Error> {
    if let Ok(d) = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc());
    }
    parse_timestamp(s).ok_or_else(|| Error::Config(format!("bad period bound '{s}'")))
}

fn parse_g2019(s: &str) -> Result<BTreeMap<FuelKind, f64>, Error> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|part| {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--g2019 entry '{part}' is not fuel=MWh")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("--g2019 value '{v}' is not a number")))?;
            Ok((k.parse()?, v))
        })
        .collect()
}

fn load_aux(path: &PathBuf) -> Result<AuxParams, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn run_config(a: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::new(a.inputs.clone(), a.out.clone());
    if !a.zones.is_empty() {
        cfg.zones = Some(a.zones.iter().map(|z| z.parse::<ZoneId>()).collect::<Result<_, _>>()?);
    }
    cfg.methods = a.methods.iter().map(|m| m.parse()).collect::<Result<_, _>>()?;
    let mut seen = BTreeSet::new();
    cfg.methods.retain(|m| seen.insert(*m));
    cfg.period = match (&a.from, &a.to) {
        (Some(f), Some(t)) => Some((parse_bound(f)?, parse_bound(t)?)),
        (None, None) => None,
        _ => return Err(Error::Config("--from and --to must be given together".into())),
    };
    if let Some(path) = &a.ef_registry {
        cfg.registry = Registry::with_overrides_from(path).map_err(|e| match e {
            Error::Io { .. } | Error::Json(_) | Error::Domain(_) => Error::Config(e.to_string()),
            other => other,
        })?;
    }
    cfg.baseline_2019 = a.baseline_2019;
    cfg.g2019 = a.g2019.as_deref().map(parse_g2019).transpose()?;
    if let Some(p) = &a.method_params {
        cfg.aux = load_aux(p)?;
    }
    cfg.window = a.window;
    cfg.coverage = CoveragePolicy {
        on_missing_hour: a.on_missing.parse::<MissingHour>()?,
        ..CoveragePolicy::default()
    };
    cfg.label_policy = if a.lenient_labels {
        LabelPolicy::Lenient
    } else {
        LabelPolicy::Strict
    };
    cfg.formats = a.format.iter().map(|f| f.parse::<Format>()).collect::<Result<_, _>>()?;
    Ok(cfg)
}

fn parse_pair(s: &str) -> Result<(MethodId, MethodId), Error> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("pair '{s}' is not of the form M4:M5")))?;
    Ok((a.parse()?, b.parse()?))
}

fn summarize(out: &Outputs) {
    for f in &out.files {
        println!("{}", f.display());
    }
    if !out.coverage.unexpected.is_empty() {
        log::warn!(
            "{} unexpected coverage gap(s); see coverage_gaps.jsonl",
            out.coverage.unexpected.len()
        );
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Compute(a) => summarize(&cmd_compute(&run_config(&a)?)?),
        Command::Report(a) => summarize(&cmd_report(&run_config(&a)?)?),
        Command::Validate(a) => {
            let (data, out) = cmd_validate(&run_config(&a)?)?;
            print!("{}", out.coverage.to_json_lines()?);
            eprintln!(
                "{} records, {} zone(s), {} unexpected gap(s), {} known gap(s)",
                data.records.len(),
                data.zones.len(),
                out.coverage.unexpected.len(),
                out.coverage.known.len()
            );
        }
        Command::Compare {
            common,
            pairs,
            lag,
            kernel,
            bucket,
            alpha,
        } => {
            let mut cfg = run_config(&common)?;
            if !pairs.is_empty() {
                cfg.pairs = Some(pairs.iter().map(|p| parse_pair(p)).collect::<Result<_, _>>()?);
            }
            cfg.lag = lag;
            cfg.kernel = kernel.parse()?;
            cfg.resolution = match bucket.to_ascii_lowercase().as_str() {
                "monthly" => Resolution::Monthly,
                "hourly" => Resolution::Hourly,
                other => return Err(Error::Config(format!("unknown bucket '{other}'"))),
            };
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!("--alpha {alpha} outside (0, 1)")));
            }
            cfg.alpha = alpha;
            summarize(&cmd_compare(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli).context("gridcarbon failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map(Error::exit_code).unwrap_or(3);
            ExitCode::from(code as u8)
        }
    }
}
