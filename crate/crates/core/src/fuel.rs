//! Fuel taxonomy, emission-factor parameter sets and unit conversion.
//!
//! The builtin registry carries the IPCC default and ISPRA (Italian
//! country-specific) parameters for the four fossil categories reported by
//! the transparency platform. Emission factors are stored at full precision
//! on the tCO₂/TJ basis; the tCO₂/MWh basis is always derived through
//! [`convert_ef`], never read from a rounded table column.
//!
//! A registry may be extended or overridden from a TOML or JSON file:
//!
//! ```toml
//! [[fuel]]
//! fuel = "natural_gas"
//! source = "ISPRA"
//! ef_per_tj = 56.38
//! oxidation_fraction = 1.0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Molecular weight of CO₂ over the atomic weight of carbon.
pub const MOLECULAR_RATIO: f64 = 44.0 / 12.0;

/// MWh in one TJ, as tabulated alongside the emission factors.
pub const MWH_PER_TJ: f64 = 277.7778;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelKind {
    FossilCoal,
    DerivedGas,
    NaturalGas,
    FossilOil,
}

impl FuelKind {
    pub const ALL: [FuelKind; 4] = [
        FuelKind::FossilCoal,
        FuelKind::DerivedGas,
        FuelKind::NaturalGas,
        FuelKind::FossilOil,
    ];

    /// Normalized snake_case name used in files.
    pub fn as_str(self) -> &'static str {
        match self {
            FuelKind::FossilCoal => "fossil_coal",
            FuelKind::DerivedGas => "derived_gas",
            FuelKind::NaturalGas => "natural_gas",
            FuelKind::FossilOil => "fossil_oil",
        }
    }
}

impl fmt::Display for FuelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FuelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FuelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown fuel kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EfSource {
    #[serde(rename = "IPCC")]
    Ipcc,
    #[serde(rename = "ISPRA")]
    Ispra,
}

impl fmt::Display for EfSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EfSource::Ipcc => "IPCC",
            EfSource::Ispra => "ISPRA",
        })
    }
}

/// One row of a parameter table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuelParameters {
    pub fuel: FuelKind,
    /// tCO₂/TJ.
    pub ef_per_tj: f64,
    /// tCO₂/MWh, derived from `ef_per_tj`.
    pub ef_per_mwh: f64,
    /// Fraction of carbon oxidized, in (0, 1].
    pub oxidation_fraction: f64,
    /// Net calorific value, TJ per 10³ t. Absent for ISPRA rows.
    pub ncv: Option<f64>,
    pub source: EfSource,
}

impl FuelParameters {
    /// Builds a validated row, deriving the MWh basis from the TJ basis.
    pub fn new(
        source: EfSource,
        fuel: FuelKind,
        ef_per_tj: f64,
        oxidation_fraction: f64,
        ncv: Option<f64>,
    ) -> Result<Self> {
        let ef_per_mwh = convert_ef(ef_per_tj)?;
        if !(oxidation_fraction > 0.0 && oxidation_fraction <= 1.0) {
            return Err(Error::domain(format!(
                "oxidation fraction {oxidation_fraction} for {source}/{fuel} outside (0, 1]"
            )));
        }
        if source == EfSource::Ispra && oxidation_fraction != 1.0 {
            return Err(Error::domain(format!(
                "ISPRA row for {fuel} must have oxidation fraction 1, got {oxidation_fraction}"
            )));
        }
        if let Some(v) = ncv {
            if !(v >= 0.0) {
                return Err(Error::domain(format!("negative NCV {v} for {source}/{fuel}")));
            }
        }
        Ok(Self {
            fuel,
            ef_per_tj,
            ef_per_mwh,
            oxidation_fraction,
            ncv,
            source,
        })
    }
}

/// Converts an emission factor from tCO₂/TJ to tCO₂/MWh, unrounded.
pub fn convert_ef(ef_per_tj: f64) -> Result<f64> {
    if !(ef_per_tj >= 0.0) || !ef_per_tj.is_finite() {
        return Err(Error::domain(format!(
            "emission factor must be a nonnegative number, got {ef_per_tj}"
        )));
    }
    Ok(ef_per_tj / MWH_PER_TJ)
}

/// Table row of the builtin parameters: (tCO₂/TJ, oxidation, NCV).
fn builtin_row(source: EfSource, fuel: FuelKind) -> (f64, f64, Option<f64>) {
    use EfSource::*;
    use FuelKind::*;
    match (source, fuel) {
        (Ipcc, FossilCoal) => (94.60, 0.92, Some(20.91)),
        (Ipcc, DerivedGas) => (107.07, 0.93, Some(33.46)),
        (Ipcc, NaturalGas) => (56.10, 0.99, Some(38.93)),
        (Ipcc, FossilOil) => (77.7, 0.98, Some(41.82)),
        (Ispra, FossilCoal) => (94.13, 1.0, None),
        // Average of steel-mill, blast-furnace and coke-oven gas factors.
        (Ispra, DerivedGas) => (163.36, 1.0, None),
        (Ispra, NaturalGas) => (56.38, 1.0, None),
        (Ispra, FossilOil) => (76.59, 1.0, None),
    }
}

/// Returns the builtin row for `(source, fuel)`.
pub fn builtin_parameters(source: EfSource, fuel: FuelKind) -> FuelParameters {
    let (ef_per_tj, oxidation_fraction, ncv) = builtin_row(source, fuel);
    FuelParameters::new(source, fuel, ef_per_tj, oxidation_fraction, ncv).expect("builtin parameters are valid")
}

/// Immutable lookup of parameters by source and fuel.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    rows: BTreeMap<(EfSource, FuelKind), FuelParameters>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    fuel: Vec<RowFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    fuel: FuelKind,
    source: EfSource,
    ef_per_tj: f64,
    /// Accepted for schema symmetry; the value is re-derived from `ef_per_tj`.
    #[serde(default)]
    ef_per_mwh: Option<f64>,
    oxidation_fraction: f64,
    #[serde(default)]
    ncv: Option<f64>,
}

impl Registry {
    /// All eight builtin rows.
    pub fn builtin() -> Self {
        let rows = [EfSource::Ipcc, EfSource::Ispra]
            .into_iter()
            .flat_map(|s| FuelKind::ALL.into_iter().map(move |f| (s, f)))
            .map(|(s, f)| ((s, f), builtin_parameters(s, f)))
            .collect();
        Self { rows }
    }

    pub fn get(&self, source: EfSource, fuel: FuelKind) -> &FuelParameters {
        // every (source, fuel) key is populated at construction and overrides only replace rows
        &self.rows[&(source, fuel)]
    }

    pub fn rows(&self) -> impl Iterator<Item = &FuelParameters> {
        self.rows.values()
    }

    /// Replaces a row.
    pub fn insert(&mut self, params: FuelParameters) {
        self.rows.insert((params.source, params.fuel), params);
    }

    /// Builtin table overridden by the rows in `path` (`.toml` or `.json`).
    pub fn with_overrides_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        let file: RegistryFile = if is_json {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        };
        let mut reg = Self::builtin();
        for row in file.fuel {
            let params = FuelParameters::new(row.source, row.fuel, row.ef_per_tj, row.oxidation_fraction, row.ncv)?;
            if let Some(given) = row.ef_per_mwh {
                if (given - params.ef_per_mwh).abs() > 0.005 {
                    log::warn!(
                        "{}: ef_per_mwh {given} for {}/{} disagrees with derived {:.5}; using derived",
                        path.display(),
                        row.source,
                        row.fuel,
                        params.ef_per_mwh
                    );
                }
            }
            reg.insert(params);
        }
        Ok(reg)
    }
}
