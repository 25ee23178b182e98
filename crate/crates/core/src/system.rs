//! Hydrothermal system data model.
//!
//! Units follow a single per-stage convention: volumes are abstract volume
//! units, turbine limits are volume units per stage, power is average MW over
//! the stage, and `production_factor` converts turbined volume directly into
//! average MW. One stage is one time unit, so the energy balance is written in
//! average MW.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thermal {
    pub name: String,
    pub capacity: f64,
    pub variable_cost: f64,
    /// Bus index; always 0 in a single-bus system.
    #[serde(default)]
    pub bus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hydro {
    pub name: String,
    pub v_max: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub production_factor: f64,
    /// Index of the plant receiving this plant's turbined and spilled water.
    pub downstream: Option<usize>,
    pub v0: f64,
    pub v_f: f64,
    #[serde(default)]
    pub bus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub name: String,
    /// Fraction of the system demand drawn at this bus.
    pub load_share: f64,
}

/// Transport line; flow is positive in the `from → to` direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub capacity: f64,
}

/// Optional transport network. Without one the system is a single bus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydroSystem {
    pub hydros: Vec<Hydro>,
    pub thermals: Vec<Thermal>,
    /// System demand per stage (average MW), `horizon` entries.
    pub demand: Vec<f64>,
    pub deficit_cost: f64,
    pub horizon: usize,
    /// Per-stage discount rate; the discount factor base is `1 + discount_rate`.
    pub discount_rate: f64,
    pub network: Option<Network>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    EmptyHorizon,
    DemandLength,
    NegativeDemand,
    NegativeDeficitCost,
    InvalidDiscountRate,
    NegativeCapacity,
    NegativeCost,
    StorageBounds,
    InitialStorage,
    FinalStorage,
    NegativeTurbineLimit,
    NegativeProductionFactor,
    DownstreamOutOfRange,
    CycleDetected,
    DuplicateName,
    BusOutOfRange,
    LoadShares,
    NegativeLineCapacity,
    NonFinite,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyHorizon => "empty_horizon",
            ViolationCode::DemandLength => "demand_length",
            ViolationCode::NegativeDemand => "negative_demand",
            ViolationCode::NegativeDeficitCost => "negative_deficit_cost",
            ViolationCode::InvalidDiscountRate => "invalid_discount_rate",
            ViolationCode::NegativeCapacity => "negative_capacity",
            ViolationCode::NegativeCost => "negative_cost",
            ViolationCode::StorageBounds => "storage_bounds",
            ViolationCode::InitialStorage => "initial_storage",
            ViolationCode::FinalStorage => "final_storage",
            ViolationCode::NegativeTurbineLimit => "negative_turbine_limit",
            ViolationCode::NegativeProductionFactor => "negative_production_factor",
            ViolationCode::DownstreamOutOfRange => "downstream_out_of_range",
            ViolationCode::CycleDetected => "cycle_detected",
            ViolationCode::DuplicateName => "duplicate_name",
            ViolationCode::BusOutOfRange => "bus_out_of_range",
            ViolationCode::LoadShares => "load_shares",
            ViolationCode::NegativeLineCapacity => "negative_line_capacity",
            ViolationCode::NonFinite => "non_finite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Violation {
            code,
            message: message.into(),
        }
    }
}

/// Returns every structural problem of `system`; an empty list means valid.
pub fn validate_system(system: &HydroSystem) -> Vec<Violation> {
    use ViolationCode::*;
    let mut out = Vec::new();

    if system.horizon == 0 {
        out.push(Violation::new(EmptyHorizon, "horizon must be at least one stage"));
    }
    if system.demand.len() != system.horizon {
        out.push(Violation::new(
            DemandLength,
            format!(
                "demand has {} entries for a horizon of {} stages",
                system.demand.len(),
                system.horizon
            ),
        ));
    }
    for (i, d) in system.demand.iter().enumerate() {
        if !d.is_finite() {
            out.push(Violation::new(NonFinite, format!("demand at stage {} is not finite", i + 1)));
        } else if *d < 0.0 {
            out.push(Violation::new(NegativeDemand, format!("demand at stage {} is negative", i + 1)));
        }
    }
    if !(system.deficit_cost >= 0.0 && system.deficit_cost.is_finite()) {
        out.push(Violation::new(NegativeDeficitCost, "deficit_cost must be finite and >= 0"));
    }
    if !(system.discount_rate > -1.0 && system.discount_rate.is_finite()) {
        out.push(Violation::new(InvalidDiscountRate, "discount_rate must be finite and > -1"));
    }

    let n_buses = system.n_buses();
    let mut names = HashSet::new();
    for t in &system.thermals {
        if !names.insert(t.name.as_str()) {
            out.push(Violation::new(DuplicateName, format!("plant name '{}' is used twice", t.name)));
        }
        if !(t.capacity >= 0.0 && t.capacity.is_finite()) {
            out.push(Violation::new(NegativeCapacity, format!("thermal '{}': capacity must be >= 0", t.name)));
        }
        if !(t.variable_cost >= 0.0 && t.variable_cost.is_finite()) {
            out.push(Violation::new(NegativeCost, format!("thermal '{}': variable_cost must be >= 0", t.name)));
        }
        if t.bus >= n_buses {
            out.push(Violation::new(BusOutOfRange, format!("thermal '{}': bus {} does not exist", t.name, t.bus)));
        }
    }

    for (i, h) in system.hydros.iter().enumerate() {
        if !names.insert(h.name.as_str()) {
            out.push(Violation::new(DuplicateName, format!("plant name '{}' is used twice", h.name)));
        }
        let fields = [h.v_max, h.v_min, h.u_max, h.production_factor, h.v0, h.v_f];
        if fields.iter().any(|x| !x.is_finite()) {
            out.push(Violation::new(NonFinite, format!("hydro '{}': non-finite parameter", h.name)));
            continue;
        }
        if !(0.0 <= h.v_min && h.v_min <= h.v_max) {
            out.push(Violation::new(StorageBounds, format!("hydro '{}': need 0 <= v_min <= v_max", h.name)));
        }
        if !(h.v_min <= h.v0 && h.v0 <= h.v_max) {
            out.push(Violation::new(InitialStorage, format!("hydro '{}': v0 outside [v_min, v_max]", h.name)));
        }
        if !(h.v_min <= h.v_f && h.v_f <= h.v_max) {
            out.push(Violation::new(FinalStorage, format!("hydro '{}': v_f outside [v_min, v_max]", h.name)));
        }
        if h.u_max < 0.0 {
            out.push(Violation::new(NegativeTurbineLimit, format!("hydro '{}': u_max must be >= 0", h.name)));
        }
        if h.production_factor < 0.0 {
            out.push(Violation::new(
                NegativeProductionFactor,
                format!("hydro '{}': production_factor must be >= 0", h.name),
            ));
        }
        if let Some(d) = h.downstream {
            if d >= system.hydros.len() {
                out.push(Violation::new(
                    DownstreamOutOfRange,
                    format!("hydro '{}': downstream plant {} does not exist", h.name, d + 1),
                ));
            } else if d == i {
                out.push(Violation::new(CycleDetected, format!("hydro '{}' is its own downstream plant", h.name)));
            }
        }
        if h.bus >= n_buses {
            out.push(Violation::new(BusOutOfRange, format!("hydro '{}': bus {} does not exist", h.name, h.bus)));
        }
    }

    // A cycle exists iff following downstream links from some plant revisits a
    // plant within |H| steps. Self-loops were reported above.
    let n = system.hydros.len();
    let mut reported = HashSet::new();
    for start in 0..n {
        let mut current = start;
        for _ in 0..n {
            match system.hydros[current].downstream {
                Some(d) if d < n && d != current => current = d,
                _ => break,
            }
            if current == start {
                let mut members = vec![start];
                let mut c = system.hydros[start].downstream.unwrap_or(start);
                while c != start {
                    members.push(c);
                    c = system.hydros[c].downstream.unwrap_or(start);
                }
                members.sort_unstable();
                if reported.insert(members.clone()) {
                    let names: Vec<_> = members.iter().map(|&m| system.hydros[m].name.as_str()).collect();
                    out.push(Violation::new(
                        CycleDetected,
                        format!("cycle detected among hydros {}", names.join(" -> ")),
                    ));
                }
                break;
            }
        }
    }

    if let Some(net) = &system.network {
        if net.buses.is_empty() {
            out.push(Violation::new(BusOutOfRange, "network declares no buses"));
        }
        let share: f64 = net.buses.iter().map(|b| b.load_share).sum();
        if net.buses.iter().any(|b| b.load_share < 0.0) || (share - 1.0).abs() > 1e-9 {
            out.push(Violation::new(LoadShares, format!("bus load shares must be >= 0 and sum to 1 (got {share})")));
        }
        for l in &net.lines {
            if l.from >= n_buses || l.to >= n_buses {
                out.push(Violation::new(BusOutOfRange, format!("line '{}' references a missing bus", l.name)));
            }
            if !(l.capacity >= 0.0) {
                out.push(Violation::new(NegativeLineCapacity, format!("line '{}': capacity must be >= 0", l.name)));
            }
        }
    }
    out
}

impl HydroSystem {
    pub fn validate(&self) -> Result<()> {
        let v = validate_system(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSystem(v))
        }
    }

    pub fn n_hydros(&self) -> usize {
        self.hydros.len()
    }

    pub fn n_thermals(&self) -> usize {
        self.thermals.len()
    }

    pub fn n_buses(&self) -> usize {
        self.network.as_ref().map_or(1, |n| n.buses.len().max(1))
    }

    pub fn lines(&self) -> &[Line] {
        self.network.as_ref().map_or(&[], |n| n.lines.as_slice())
    }

    /// Demand at bus `bus` in stage `t` (1-based).
    pub fn bus_demand(&self, bus: usize, t: usize) -> f64 {
        let total = self.demand[t - 1];
        match &self.network {
            Some(net) if !net.buses.is_empty() => total * net.buses[bus].load_share,
            _ => total,
        }
    }

    /// Signed cascade incidence matrix M (row = water balance of plant h).
    ///
    /// `M[h][h] = 1` and `M[down(h')][h'] = -1` for every plant `h'` with a
    /// downstream plant.
    pub fn topology_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_hydros();
        let mut m = vec![vec![0.0; n]; n];
        for (h, hydro) in self.hydros.iter().enumerate() {
            m[h][h] = 1.0;
            if let Some(d) = hydro.downstream {
                if d < n && d != h {
                    m[d][h] = -1.0;
                }
            }
        }
        m
    }

    /// Plants discharging directly into `h`.
    pub fn upstream_of(&self, h: usize) -> impl Iterator<Item = usize> + '_ {
        self.hydros
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.downstream == Some(h))
            .map(|(i, _)| i)
    }

    pub fn max_production_factor(&self) -> f64 {
        self.hydros.iter().map(|h| h.production_factor).fold(0.0, f64::max)
    }

    /// Present-value weight `α^{-t}` with `α = 1 + discount_rate`.
    pub fn discount_factor(&self, t: usize) -> Result<f64> {
        discount_factor(self, t)
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<HydroSystem> {
        let file: SystemFile = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        file.into_system(origin)
    }

    /// Reads and validates a system file.
    pub fn load(path: &Path) -> Result<HydroSystem> {
        let text = util::read_to_string(path)?;
        let system = HydroSystem::from_toml_str(&text, path)?;
        system.validate()?;
        Ok(system)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SystemFile::from_system(self);
        toml::to_string(&file).expect("system file serialization cannot fail")
    }
}

/// Discount weight `α^{-t}` for stage `t` in `1..=horizon`.
pub fn discount_factor(system: &HydroSystem, t: usize) -> Result<f64> {
    if t == 0 || t > system.horizon {
        return Err(Error::StageOutOfRange {
            stage: t as i64,
            horizon: system.horizon,
        });
    }
    Ok((1.0 + system.discount_rate).powi(-(t as i32)))
}

// ---------------------------------------------------------------------------
// System file

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    system: SystemSection,
    #[serde(default, rename = "hydro")]
    hydros: Vec<HydroEntry>,
    #[serde(default, rename = "thermal")]
    thermals: Vec<ThermalEntry>,
    #[serde(default, rename = "bus", skip_serializing_if = "Vec::is_empty")]
    buses: Vec<Bus>,
    #[serde(default, rename = "line", skip_serializing_if = "Vec::is_empty")]
    lines: Vec<LineEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    horizon: usize,
    demand: Demand,
    deficit_cost: f64,
    discount_rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Demand {
    Constant(f64),
    PerStage(Vec<f64>),
}

/// Plant reference in files: a 1-based position or a plant name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PlantRef {
    Position(usize),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HydroEntry {
    name: String,
    v_max: f64,
    v_min: f64,
    u_max: f64,
    production_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    downstream: Option<PlantRef>,
    v0: f64,
    v_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus: Option<PlantRef>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThermalEntry {
    name: String,
    capacity: f64,
    variable_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus: Option<PlantRef>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineEntry {
    name: String,
    from: PlantRef,
    to: PlantRef,
    capacity: f64,
}

impl SystemFile {
    fn into_system(self, origin: &Path) -> Result<HydroSystem> {
        let horizon = self.system.horizon;
        let demand = match self.system.demand {
            Demand::Constant(d) => vec![d; horizon],
            Demand::PerStage(v) => v,
        };
        let hydro_names: Vec<&str> = self.hydros.iter().map(|h| h.name.as_str()).collect();
        let bus_names: Vec<&str> = self.buses.iter().map(|b| b.name.as_str()).collect();

        let resolve = |r: &PlantRef, names: &[&str], what: &str, owner: &str| -> Result<usize> {
            match r {
                PlantRef::Position(p) if *p >= 1 => Ok(p - 1),
                PlantRef::Position(_) => Err(Error::parse(
                    origin,
                    format!("{owner}: {what} positions are 1-based"),
                )),
                PlantRef::Name(n) => names.iter().position(|x| x == n).ok_or_else(|| {
                    Error::parse(origin, format!("{owner}: unknown {what} '{n}'"))
                }),
            }
        };
        let bus_of = |r: &Option<PlantRef>, owner: &str| -> Result<usize> {
            match r {
                None => Ok(0),
                Some(r) => resolve(r, &bus_names, "bus", owner),
            }
        };

        let mut hydros = Vec::with_capacity(self.hydros.len());
        for h in &self.hydros {
            let owner = format!("[[hydro]] '{}'", h.name);
            let downstream = match &h.downstream {
                None => None,
                Some(r) => Some(resolve(r, &hydro_names, "downstream plant", &owner)?),
            };
            hydros.push(Hydro {
                name: h.name.clone(),
                v_max: h.v_max,
                v_min: h.v_min,
                u_max: h.u_max,
                production_factor: h.production_factor,
                downstream,
                v0: h.v0,
                v_f: h.v_f,
                bus: bus_of(&h.bus, &owner)?,
            });
        }
        let mut thermals = Vec::with_capacity(self.thermals.len());
        for t in &self.thermals {
            let owner = format!("[[thermal]] '{}'", t.name);
            thermals.push(Thermal {
                name: t.name.clone(),
                capacity: t.capacity,
                variable_cost: t.variable_cost,
                bus: bus_of(&t.bus, &owner)?,
            });
        }
        let network = if self.buses.is_empty() && self.lines.is_empty() {
            None
        } else {
            let mut lines = Vec::with_capacity(self.lines.len());
            for l in &self.lines {
                let owner = format!("[[line]] '{}'", l.name);
                lines.push(Line {
                    name: l.name.clone(),
                    from: resolve(&l.from, &bus_names, "bus", &owner)?,
                    to: resolve(&l.to, &bus_names, "bus", &owner)?,
                    capacity: l.capacity,
                });
            }
            Some(Network {
                buses: self.buses,
                lines,
            })
        };
        Ok(HydroSystem {
            hydros,
            thermals,
            demand,
            deficit_cost: self.system.deficit_cost,
            horizon,
            discount_rate: self.system.discount_rate,
            network,
        })
    }

    fn from_system(s: &HydroSystem) -> SystemFile {
        let demand = match s.demand.first() {
            Some(&d0) if s.demand.iter().all(|&d| d == d0) => Demand::Constant(d0),
            _ => Demand::PerStage(s.demand.clone()),
        };
        let multi_bus = s.network.is_some();
        let bus = |b: usize| multi_bus.then_some(PlantRef::Position(b + 1));
        SystemFile {
            system: SystemSection {
                horizon: s.horizon,
                demand,
                deficit_cost: s.deficit_cost,
                discount_rate: s.discount_rate,
            },
            hydros: s
                .hydros
                .iter()
                .map(|h| HydroEntry {
                    name: h.name.clone(),
                    v_max: h.v_max,
                    v_min: h.v_min,
                    u_max: h.u_max,
                    production_factor: h.production_factor,
                    downstream: h.downstream.map(|d| PlantRef::Position(d + 1)),
                    v0: h.v0,
                    v_f: h.v_f,
                    bus: bus(h.bus),
                })
                .collect(),
            thermals: s
                .thermals
                .iter()
                .map(|t| ThermalEntry {
                    name: t.name.clone(),
                    capacity: t.capacity,
                    variable_cost: t.variable_cost,
                    bus: bus(t.bus),
                })
                .collect(),
            buses: s.network.as_ref().map(|n| n.buses.clone()).unwrap_or_default(),
            lines: s
                .lines()
                .iter()
                .map(|l| LineEntry {
                    name: l.name.clone(),
                    from: PlantRef::Position(l.from + 1),
                    to: PlantRef::Position(l.to + 1),
                    capacity: l.capacity,
                })
                .collect(),
        }
    }
}
