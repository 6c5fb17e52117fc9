//! Emission formulas and the method matrix.
//!
//! Every formula works on the tCO₂/MWh basis with generation in MWh. The
//! free functions are pure and check their argument domains; [`Method`] binds
//! a [`MethodConfig`] to a [`Registry`] and evaluates one hour of a zone's
//! generation mix.
//!
//! | Method | Formula                      | EF source |
//! |--------|------------------------------|-----------|
//! | M1     | G × EF                       | IPCC      |
//! | M2     | Σ G × EF (country-specific)  | ISPRA     |
//! | M3     | G × EF × O                   | IPCC      |
//! | M4     | G × EF × O × 44/12           | IPCC      |
//! | M5     | G × EF × O × 44/12           | ISPRA     |
//! | M6     | G × EF × E₂₀₁₉ / Σ G₂₀₁₉ EF   | ISPRA     |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuel::{EfSource, FuelKind, FuelParameters, Registry, MOLECULAR_RATIO};

/// Tolerance on shares that must sum to one.
pub const SHARE_TOLERANCE: f64 = 1e-9;

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be nonnegative, got {v}")))
    }
}

fn check_fraction_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1], got {v}")))
    }
}

fn check_fraction_closed(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Tier 1 with default factors: `g × ef`.
pub fn tier1_default(g: f64, ef: f64) -> Result<f64> {
    check_nonneg("generation", g)?;
    check_nonneg("emission factor", ef)?;
    Ok(g * ef)
}

/// Tier 2: sum of generation × country-specific factor over contexts.
pub fn tier2_country(g_by_context: &[(f64, f64)]) -> Result<f64> {
    g_by_context.iter().map(|&(g, ef)| tier1_default(g, ef)).sum()
}

/// `g × ef × o`.
pub fn with_oxidation(g: f64, ef: f64, o: f64) -> Result<f64> {
    check_fraction_open("oxidation fraction", o)?;
    Ok(tier1_default(g, ef)? * o)
}

/// `g × ef × o × m`; `m` is normally [`MOLECULAR_RATIO`].
pub fn with_oxidation_molecular(g: f64, ef: f64, o: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::domain(format!("molecular ratio must be positive, got {m}")));
    }
    Ok(with_oxidation(g, ef, o)? * m)
}

/// `g × ef × ncv × o`. Output units follow the caller's activity basis.
pub fn with_ncv(g: f64, ef: f64, ncv: f64, o: f64) -> Result<f64> {
    check_nonneg("net calorific value", ncv)?;
    check_nonneg("oxidation fraction", o)?;
    Ok(tier1_default(g, ef)? * ncv * o)
}

/// Adds emissions attributed to net purchases; `q_p < 0` for a net exporter.
pub fn with_imports(base: f64, q_p: f64, ci_p: f64) -> Result<f64> {
    check_nonneg("import carbon intensity", ci_p)?;
    if !q_p.is_finite() || !base.is_finite() {
        return Err(Error::domain("imports and base emissions must be finite"));
    }
    Ok(base + q_p * ci_p)
}

/// Emissions of capacity `c` (MW) running at capacity factor `cf` over `hours`.
pub fn capacity_scenario(c: f64, cf: f64, hours: f64, ef: f64) -> Result<f64> {
    check_nonneg("capacity", c)?;
    check_fraction_closed("capacity factor", cf)?;
    check_nonneg("hours", hours)?;
    tier1_default(c * cf * hours, ef)
}

/// `g_total × alpha × ef`.
pub fn energy_share(g_total: f64, alpha: f64, ef: f64) -> Result<f64> {
    check_fraction_closed("energy share", alpha)?;
    Ok(tier1_default(g_total, ef)? * alpha)
}

/// Coefficients of the hourly fuel-consumption curve `c2 g² + c1 g + c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoeffs {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuadraticCoeffs {
    fn eval(&self, g: f64) -> f64 {
        self.c2 * g * g + self.c1 * g + self.c0
    }
}

/// Plant-level emissions from a quadratic consumption curve, scaled by the
/// fuel mix `alpha`, an efficiency scalar `lambda` and the factor `ef`.
pub fn plant_quadratic(g: f64, coeffs: QuadraticCoeffs, alpha: &[f64], lambda: f64, ef: f64) -> Result<f64> {
    check_nonneg("generation", g)?;
    for (name, c) in [("c2", coeffs.c2), ("c1", coeffs.c1), ("c0", coeffs.c0)] {
        check_nonneg(name, c)?;
    }
    for &a in alpha {
        check_nonneg("fuel-mix fraction", a)?;
    }
    let mix: f64 = alpha.iter().sum();
    if mix > 1.0 + SHARE_TOLERANCE {
        return Err(Error::domain(format!("fuel-mix fractions sum to {mix} > 1")));
    }
    check_nonneg("lambda", lambda)?;
    check_nonneg("emission factor", ef)?;
    let consumption: f64 = alpha.iter().map(|a| a * coeffs.eval(g)).sum();
    Ok(ef * lambda * consumption)
}

/// `(g × ef) / (eta × lhv)`. Output units follow the caller's convention.
pub fn stoichiometric(g: f64, ef: f64, eta: f64, lhv: f64) -> Result<f64> {
    check_fraction_open("generator efficiency", eta)?;
    if !(lhv > 0.0) {
        return Err(Error::domain(format!(
            "lower heating value must be positive, got {lhv}"
        )));
    }
    Ok(tier1_default(g, ef)? / (eta * lhv))
}

/// Default lower heating value in MJ/kg, where one is tabulated.
pub fn default_lhv(fuel: FuelKind) -> Option<f64> {
    match fuel {
        FuelKind::FossilCoal => Some(25.0),
        FuelKind::NaturalGas => Some(35.0),
        _ => None,
    }
}

/// Ratio `baseline / Σ_f G₂₀₁₉,f × EF_f` applied to every fuel's factor.
pub fn baseline_ratio(
    baseline_2019: f64,
    g2019_by_fuel: &BTreeMap<FuelKind, f64>,
    ef_by_fuel: &BTreeMap<FuelKind, f64>,
) -> Result<f64> {
    check_nonneg("2019 baseline emissions", baseline_2019)?;
    let mut denom = 0.0;
    for (fuel, &g) in g2019_by_fuel {
        let ef = ef_by_fuel
            .get(fuel)
            .ok_or_else(|| Error::config(format!("no emission factor for {fuel} in baseline adjustment")))?;
        denom += tier1_default(g, *ef)?;
    }
    if !(denom > 0.0) {
        return Err(Error::DegenerateBaseline(denom));
    }
    Ok(baseline_2019 / denom)
}

/// Baseline-adjusted emission factor.
pub fn adjusted_ef(
    ef: f64,
    baseline_2019: f64,
    g2019_by_fuel: &BTreeMap<FuelKind, f64>,
    ef_by_fuel: &BTreeMap<FuelKind, f64>,
) -> Result<f64> {
    check_nonneg("emission factor", ef)?;
    Ok(ef * baseline_ratio(baseline_2019, g2019_by_fuel, ef_by_fuel)?)
}

/// Splits total generation across technologies by penetration rate.
pub fn split_by_penetration(g_total: f64, p_by_tech: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    check_nonneg("generation", g_total)?;
    for (tech, &p) in p_by_tech {
        check_nonneg(&format!("penetration of {tech}"), p)?;
    }
    let sum: f64 = p_by_tech.values().sum();
    if (sum - 1.0).abs() > SHARE_TOLERANCE {
        return Err(Error::domain(format!("penetration rates sum to {sum}, expected 1")));
    }
    Ok(p_by_tech.iter().map(|(t, p)| (t.clone(), g_total * p)).collect())
}

/// Tier 3: Σ over technologies of generation × technology factor.
pub fn tier3_technology(g_by_tech: &BTreeMap<String, f64>, ef_by_tech: &BTreeMap<String, f64>) -> Result<f64> {
    g_by_tech
        .iter()
        .map(|(tech, &g)| {
            let ef = ef_by_tech
                .get(tech)
                .ok_or_else(|| Error::config(format!("no emission factor for technology '{tech}'")))?;
            tier1_default(g, *ef)
        })
        .sum()
}

/// Sum over fuels.
pub fn total_emissions(per_fuel: &[f64]) -> f64 {
    per_fuel.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    Ncv,
    Imports,
    CapacityScenario,
    EnergyShare,
    PlantQuadratic,
    Stoichiometric,
    Tier3Tech,
}

impl MethodId {
    pub const COMPARED: [MethodId; 6] = [
        MethodId::M1,
        MethodId::M2,
        MethodId::M3,
        MethodId::M4,
        MethodId::M5,
        MethodId::M6,
    ];

    /// Factor source fixed by the method matrix, `None` for auxiliary formulas.
    pub fn bound_source(self) -> Option<EfSource> {
        match self {
            MethodId::M1 | MethodId::M3 | MethodId::M4 => Some(EfSource::Ipcc),
            MethodId::M2 | MethodId::M5 | MethodId::M6 => Some(EfSource::Ispra),
            _ => None,
        }
    }

    /// IPCC tier for the six compared methods.
    pub fn tier(self) -> Option<u8> {
        match self {
            MethodId::M1 | MethodId::M3 | MethodId::M4 => Some(1),
            MethodId::M2 | MethodId::M5 => Some(2),
            MethodId::M6 | MethodId::PlantQuadratic | MethodId::Tier3Tech => Some(3),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::M1 => "M1",
            MethodId::M2 => "M2",
            MethodId::M3 => "M3",
            MethodId::M4 => "M4",
            MethodId::M5 => "M5",
            MethodId::M6 => "M6",
            MethodId::Ncv => "ncv",
            MethodId::Imports => "imports",
            MethodId::CapacityScenario => "capacity",
            MethodId::EnergyShare => "energy_share",
            MethodId::PlantQuadratic => "plant_quadratic",
            MethodId::Stoichiometric => "stoichiometric",
            MethodId::Tier3Tech => "tier3_tech",
        }
    }

    const ALL: [MethodId; 13] = [
        MethodId::M1,
        MethodId::M2,
        MethodId::M3,
        MethodId::M4,
        MethodId::M5,
        MethodId::M6,
        MethodId::Ncv,
        MethodId::Imports,
        MethodId::CapacityScenario,
        MethodId::EnergyShare,
        MethodId::PlantQuadratic,
        MethodId::Stoichiometric,
        MethodId::Tier3Tech,
    ];
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .or(match s {
                "1" => Some(MethodId::M1),
                "2" => Some(MethodId::M2),
                "3" => Some(MethodId::M3),
                "4" => Some(MethodId::M4),
                "5" => Some(MethodId::M5),
                "6" => Some(MethodId::M6),
                _ => None,
            })
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

/// One technology within a fuel category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Technology {
    pub name: String,
    /// Penetration rate within the fuel category.
    pub share: f64,
    /// tCO₂/MWh.
    pub ef: f64,
}

/// Free parameters of the auxiliary formulas. Maps are keyed by fuel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuxParams {
    /// Net purchased electricity per hour, MWh (signed).
    pub imports_mwh: Option<f64>,
    /// Carbon intensity of purchased electricity, tCO₂/MWh.
    pub imports_ci: Option<f64>,
    /// Installed capacity, MW.
    pub capacity_mw: BTreeMap<FuelKind, f64>,
    pub capacity_factor: BTreeMap<FuelKind, f64>,
    /// Fixed energy shares; when empty the observed hourly shares are used.
    pub energy_share: BTreeMap<FuelKind, f64>,
    pub quadratic: BTreeMap<FuelKind, QuadraticCoeffs>,
    /// Plant fuel-mix fraction per fuel (default 1).
    pub plant_mix: BTreeMap<FuelKind, f64>,
    pub lambda: Option<f64>,
    /// Generator efficiency.
    pub eta: Option<f64>,
    /// Lower heating value, MJ/kg; coal and gas have defaults.
    pub lhv: BTreeMap<FuelKind, f64>,
    pub technologies: BTreeMap<FuelKind, Vec<Technology>>,
}

/// A method and all of its free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub id: MethodId,
    pub ef_source: EfSource,
    /// tCO₂, required for M6.
    pub baseline_2019_emissions: Option<f64>,
    /// MWh by fuel, required for M6.
    pub generation_2019_by_fuel: Option<BTreeMap<FuelKind, f64>>,
    pub extras: AuxParams,
}

impl MethodConfig {
    /// Config with the method's bound source (IPCC for auxiliary formulas).
    pub fn new(id: MethodId) -> Self {
        Self {
            id,
            ef_source: id.bound_source().unwrap_or(EfSource::Ipcc),
            baseline_2019_emissions: None,
            generation_2019_by_fuel: None,
            extras: AuxParams::default(),
        }
    }

    pub fn with_baseline(mut self, baseline: f64, g2019: BTreeMap<FuelKind, f64>) -> Self {
        self.baseline_2019_emissions = Some(baseline);
        self.generation_2019_by_fuel = Some(g2019);
        self
    }

    pub fn with_extras(mut self, extras: AuxParams) -> Self {
        self.extras = extras;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bound) = self.id.bound_source() {
            if bound != self.ef_source {
                return Err(Error::config(format!(
                    "method {} uses {bound} factors, not {}",
                    self.id, self.ef_source
                )));
            }
        }
        let x = &self.extras;
        match self.id {
            MethodId::M6 => {
                if self.baseline_2019_emissions.is_none() || self.generation_2019_by_fuel.is_none() {
                    return Err(Error::config(
                        "method M6 requires both the 2019 baseline emissions and 2019 generation by fuel",
                    ));
                }
            }
            MethodId::Imports => {
                if x.imports_mwh.is_none() || x.imports_ci.is_none() {
                    return Err(Error::config("imports method requires imports_mwh and imports_ci"));
                }
            }
            MethodId::CapacityScenario => {
                if x.capacity_mw.is_empty() {
                    return Err(Error::config("capacity method requires capacity_mw"));
                }
                for fuel in x.capacity_mw.keys() {
                    if !x.capacity_factor.contains_key(fuel) {
                        return Err(Error::config(format!("capacity method: no capacity_factor for {fuel}")));
                    }
                }
            }
            MethodId::PlantQuadratic if x.quadratic.is_empty() => {
                return Err(Error::config("plant_quadratic method requires quadratic coefficients"));
            }
            MethodId::Stoichiometric if x.eta.is_none() => {
                return Err(Error::config("stoichiometric method requires eta"));
            }
            MethodId::Tier3Tech => {
                if x.technologies.is_empty() {
                    return Err(Error::config("tier3_tech method requires technologies"));
                }
                for techs in x.technologies.values() {
                    let p = techs.iter().map(|t| (t.name.clone(), t.share)).collect();
                    split_by_penetration(1.0, &p)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A validated method bound to a parameter registry.
#[derive(Debug, Clone)]
pub struct Method {
    config: MethodConfig,
    params: BTreeMap<FuelKind, FuelParameters>,
    /// Uniform factor multiplier (M6 baseline ratio, 1 otherwise).
    ef_scale: f64,
}

impl Method {
    pub fn new(config: MethodConfig, registry: &Registry) -> Result<Self> {
        config.validate()?;
        let params: BTreeMap<_, _> = FuelKind::ALL
            .into_iter()
            .map(|f| (f, registry.get(config.ef_source, f).clone()))
            .collect();
        let ef_scale = match config.id {
            MethodId::M6 => {
                let ef_by_fuel = params.iter().map(|(f, p)| (*f, p.ef_per_mwh)).collect();
                baseline_ratio(
                    config.baseline_2019_emissions.unwrap_or_default(),
                    config.generation_2019_by_fuel.as_ref().expect("validated"),
                    &ef_by_fuel,
                )?
            }
            _ => 1.0,
        };
        Ok(Self {
            config,
            params,
            ef_scale,
        })
    }

    pub fn id(&self) -> MethodId {
        self.config.id
    }

    pub fn config(&self) -> &MethodConfig {
        &self.config
    }

    /// Factor actually applied to `fuel`, tCO₂/MWh.
    pub fn effective_ef(&self, fuel: FuelKind) -> f64 {
        self.params[&fuel].ef_per_mwh * self.ef_scale
    }

    /// Emissions attributed to one fuel in one hour.
    ///
    /// `total_generation` is the zone's total net generation in that hour,
    /// including non-emitting sources.
    pub fn fuel_emissions(&self, fuel: FuelKind, g: f64, total_generation: f64) -> Result<f64> {
        let p = &self.params[&fuel];
        let ef = p.ef_per_mwh;
        let o = p.oxidation_fraction;
        let x = &self.config.extras;
        match self.config.id {
            MethodId::M1 => tier1_default(g, ef),
            MethodId::M2 => tier2_country(&[(g, ef)]),
            MethodId::M3 => with_oxidation(g, ef, o),
            MethodId::M4 | MethodId::M5 | MethodId::Imports => with_oxidation_molecular(g, ef, o, MOLECULAR_RATIO),
            MethodId::M6 => tier1_default(g, ef * self.ef_scale),
            MethodId::Ncv => {
                let ncv = p
                    .ncv
                    .ok_or_else(|| Error::config(format!("no net calorific value for {}/{fuel}", p.source)))?;
                with_ncv(g, ef, ncv, o)
            }
            MethodId::CapacityScenario => match x.capacity_mw.get(&fuel) {
                Some(&c) => capacity_scenario(c, x.capacity_factor[&fuel], 1.0, ef),
                None => Ok(0.0),
            },
            MethodId::EnergyShare => {
                if total_generation <= 0.0 {
                    check_nonneg("generation", g)?;
                    return Ok(0.0);
                }
                let alpha = match x.energy_share.get(&fuel) {
                    Some(&a) => a,
                    None if x.energy_share.is_empty() => (g / total_generation).min(1.0),
                    None => 0.0,
                };
                energy_share(total_generation, alpha, ef)
            }
            MethodId::PlantQuadratic => {
                if g == 0.0 && !x.quadratic.contains_key(&fuel) {
                    return Ok(0.0);
                }
                let coeffs = x
                    .quadratic
                    .get(&fuel)
                    .ok_or_else(|| Error::config(format!("no quadratic coefficients for {fuel}")))?;
                let alpha = x.plant_mix.get(&fuel).copied().unwrap_or(1.0);
                plant_quadratic(g, *coeffs, &[alpha], x.lambda.unwrap_or(1.0), ef)
            }
            MethodId::Stoichiometric => {
                let lhv = x.lhv.get(&fuel).copied().or_else(|| default_lhv(fuel));
                match lhv {
                    Some(lhv) => stoichiometric(g, ef, x.eta.expect("validated"), lhv),
                    None if g == 0.0 => Ok(0.0),
                    None => Err(Error::config(format!("no lower heating value for {fuel}"))),
                }
            }
            MethodId::Tier3Tech => match x.technologies.get(&fuel) {
                Some(techs) => {
                    let p = techs.iter().map(|t| (t.name.clone(), t.share)).collect();
                    let ef_by = techs.iter().map(|t| (t.name.clone(), t.ef)).collect();
                    tier3_technology(&split_by_penetration(g, &p)?, &ef_by)
                }
                None if g == 0.0 => Ok(0.0),
                None => Err(Error::config(format!("no technology breakdown for {fuel}"))),
            },
        }
    }

    /// Emissions of one hour: per-fuel estimates summed, plus any hourly term.
    pub fn hour_emissions(&self, by_fuel: &BTreeMap<FuelKind, f64>, total_generation: f64) -> Result<f64> {
        let parts = by_fuel
            .iter()
            .map(|(&f, &g)| self.fuel_emissions(f, g, total_generation))
            .collect::<Result<Vec<_>>>()?;
        let mut total = total_emissions(&parts);
        match self.config.id {
            MethodId::Imports => {
                let x = &self.config.extras;
                total = with_imports(total, x.imports_mwh.unwrap_or(0.0), x.imports_ci.unwrap_or(0.0))?;
            }
            MethodId::CapacityScenario => {
                // capacity-driven: fuels absent from this hour still run
                let x = &self.config.extras;
                for (fuel, &c) in &x.capacity_mw {
                    if !by_fuel.contains_key(fuel) {
                        total += capacity_scenario(c, x.capacity_factor[fuel], 1.0, self.params[fuel].ef_per_mwh)?;
                    }
                }
            }
            _ => {}
        }
        Ok(total)
    }
}
