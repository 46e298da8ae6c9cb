//! Static system description: buses, lines, shift factors, the increment
//! catalog, the power-balance penalty curve, technologies and the existing
//! fleet, plus the hourly demand and availability inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::timeseries::{read_series_file, HourlySeries};

/// Injection balance tolerance for [`line_flows`], MW.
pub const BALANCE_TOLERANCE_MW: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default, rename = "reference")]
    pub is_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    #[serde(rename = "from")]
    pub from_bus: String,
    #[serde(rename = "to")]
    pub to_bus: String,
    /// Initial capacity L₀ in MW.
    #[serde(rename = "capacity")]
    pub initial_capacity: f64,
    #[serde(default)]
    pub reactance: Option<f64>,
    /// Whether increments may be built on this corridor.
    #[serde(default = "yes")]
    pub expandable: bool,
}

fn yes() -> bool {
    true
}

/// Shift factors SF[l, b] for every line and every non-reference bus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftFactorMatrix {
    /// Bus indices (into the case bus list) of the columns, reference excluded.
    pub columns: Vec<usize>,
    /// Row per line, column per entry of `columns`.
    pub entries: Array2<f64>,
    pub reference: usize,
}

impl ShiftFactorMatrix {
    /// Shift factor of line `l` with respect to case bus `b` (zero for the
    /// reference bus).
    pub fn get(&self, l: usize, b: usize) -> f64 {
        match self.columns.iter().position(|&c| c == b) {
            Some(j) => self.entries[[l, j]],
            None => 0.0,
        }
    }

    /// Dense `lines × buses` view with a zero column at the reference bus.
    pub fn full(&self, bus_count: usize) -> Array2<f64> {
        let mut out = Array2::zeros((self.entries.nrows(), bus_count));
        for (j, &b) in self.columns.iter().enumerate() {
            for l in 0..self.entries.nrows() {
                out[[l, b]] = self.entries[[l, j]];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Increment {
    pub id: String,
    /// ΔL_q, MW.
    pub capacity: f64,
}

/// Increment sizes plus the annualized cost of each (line, increment) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementCatalog {
    pub increments: Vec<Increment>,
    /// `cost[[l, q]]`, $/yr.
    pub cost: Array2<f64>,
}

impl IncrementCatalog {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.increments
            .iter()
            .position(|q| q.id == id)
            .ok_or_else(|| Error::unknown("increment", id))
    }

    /// Per-MW cost of increment `q` on line `l`.
    pub fn unit_cost(&self, l: usize, q: usize) -> f64 {
        self.cost[[l, q]] / self.increments[q].capacity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySegment {
    /// Z̄ᵢ in MW; `None` for an unbounded last segment.
    #[serde(default)]
    pub cap: Option<f64>,
    /// γᵢ in $/MWh.
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyCurve {
    pub segments: Vec<PenaltySegment>,
    /// γ^LINE, $/MWh of flow-limit violation.
    pub line_violation_price: f64,
    /// γ^LOAD, $/MWh of served load.
    pub load_value: f64,
}

impl PenaltyCurve {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::input("penalty curve has no segments"));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if let Some(cap) = s.cap {
                if cap <= 0.0 {
                    return Err(Error::input(format!("penalty segment {i} cap must be > 0")));
                }
            } else if i + 1 != self.segments.len() {
                return Err(Error::input(format!(
                    "penalty segment {i} is unbounded but not last"
                )));
            }
            if i > 0 && s.price < self.segments[i - 1].price {
                return Err(Error::input(
                    "penalty segment prices must be non-decreasing",
                ));
            }
        }
        Ok(())
    }
}

/// Cost of a system-wide power-balance violation and its split into
/// segments. Segments fill in price order.
pub fn curtailment_cost(total_violation: f64, curve: &PenaltyCurve) -> Result<(f64, Vec<f64>)> {
    if total_violation < 0.0 || total_violation.is_nan() {
        return Err(Error::input(format!(
            "violation {total_violation} must be >= 0"
        )));
    }
    let mut remaining = total_violation;
    let mut cost = 0.0;
    let mut split = Vec::with_capacity(curve.segments.len());
    for seg in &curve.segments {
        let take = match seg.cap {
            Some(cap) => remaining.min(cap),
            None => remaining,
        };
        split.push(take);
        cost += take * seg.price;
        remaining -= take;
    }
    if remaining > 0.0 {
        return Err(Error::input(format!(
            "violation exceeds total penalty curve capacity by {remaining} MW"
        )));
    }
    Ok((cost, split))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Technology {
    pub id: String,
    #[serde(default)]
    pub renewable: bool,
    /// C^FIX, $/MW-yr.
    pub fixed_om: f64,
    /// C^VOM, $/MWh.
    pub variable_om: f64,
    /// Base C^EN, $/MWh.
    pub fuel_cost: f64,
    /// Base annualized C^INV, $/MW-yr.
    pub investment_cost: f64,
    /// Whether new capacity may be built.
    #[serde(default = "yes")]
    pub buildable: bool,
}

/// Demand and availability by hour for the source year.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HourlyInputs {
    /// `demand[[b, h]]`, MW.
    pub demand: Array2<f64>,
    /// `availability[[b, g, h]]` in [0, 1].
    pub availability: Array3<f64>,
}

impl HourlyInputs {
    pub fn hours(&self) -> usize {
        self.demand.ncols()
    }
}

/// Everything static about the system under study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemCase {
    pub name: String,
    pub buses: Vec<Bus>,
    pub reference: usize,
    pub lines: Vec<Line>,
    pub shift_factors: ShiftFactorMatrix,
    pub catalog: IncrementCatalog,
    pub penalty: PenaltyCurve,
    pub technologies: Vec<Technology>,
    /// `existing[[b, g]]` = G⁰, MW.
    pub existing: Array2<f64>,
    pub hourly: HourlyInputs,
    /// Restrict each (node, line) to at most one increment.
    pub at_most_one_increment: bool,
    /// Non-fatal findings from ingestion.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl SystemCase {
    pub fn bus_index(&self, id: &str) -> Result<usize> {
        self.buses
            .iter()
            .position(|b| b.id == id)
            .ok_or_else(|| Error::unknown("bus", id))
    }

    pub fn line_index(&self, id: &str) -> Result<usize> {
        self.lines
            .iter()
            .position(|l| l.id == id)
            .ok_or_else(|| Error::unknown("line", id))
    }

    pub fn tech_index(&self, id: &str) -> Result<usize> {
        self.technologies
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| Error::unknown("technology", id))
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn tech_count(&self) -> usize {
        self.technologies.len()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base, &path.display().to_string())
    }

    /// Parse a case file. Series `file` entries resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path, context: &str) -> Result<Self> {
        let file: CaseFile = toml::from_str(text).map_err(|e| Error::parse(context, e))?;
        file.resolve(base_dir)
    }
}

/// Connectivity-checked DC shift factors relative to `reference`.
///
/// Flows are positive in the `from → to` direction of each line; a unit
/// injection at bus b is withdrawn at the reference bus.
pub fn compute_shift_factors(
    buses: &[Bus],
    lines: &[Line],
    reference: usize,
) -> Result<ShiftFactorMatrix> {
    let nb = buses.len();
    if reference >= nb {
        return Err(Error::input("reference bus index out of range"));
    }
    let index: BTreeMap<&str, usize> = buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();
    let mut ends = Vec::with_capacity(lines.len());
    for line in lines {
        let f = *index
            .get(line.from_bus.as_str())
            .ok_or_else(|| Error::unknown("bus", &line.from_bus))?;
        let t = *index
            .get(line.to_bus.as_str())
            .ok_or_else(|| Error::unknown("bus", &line.to_bus))?;
        let x = line
            .reactance
            .ok_or_else(|| Error::input(format!("line '{}' has no reactance", line.id)))?;
        if !(x > 0.0) {
            return Err(Error::input(format!(
                "line '{}' reactance must be > 0",
                line.id
            )));
        }
        ends.push((f, t, x));
    }
    if !is_connected(nb, ends.iter().map(|&(f, t, _)| (f, t))) {
        return Err(Error::Network("network is not connected".into()));
    }

    let columns: Vec<usize> = (0..nb).filter(|&b| b != reference).collect();
    let pos = |b: usize| columns.iter().position(|&c| c == b);
    let m = columns.len();
    let mut susceptance = DMatrix::<f64>::zeros(m, m);
    for &(f, t, x) in &ends {
        let y = 1.0 / x;
        let (pf, pt) = (pos(f), pos(t));
        if let Some(i) = pf {
            susceptance[(i, i)] += y;
        }
        if let Some(j) = pt {
            susceptance[(j, j)] += y;
        }
        if let (Some(i), Some(j)) = (pf, pt) {
            susceptance[(i, j)] -= y;
            susceptance[(j, i)] -= y;
        }
    }
    let reactance_inv = if m == 0 {
        DMatrix::zeros(0, 0)
    } else {
        susceptance
            .try_inverse()
            .ok_or_else(|| Error::Network("singular susceptance matrix".into()))?
    };

    let mut entries = Array2::zeros((lines.len(), m));
    for (l, &(f, t, x)) in ends.iter().enumerate() {
        for j in 0..m {
            let theta_f = pos(f).map_or(0.0, |i| reactance_inv[(i, j)]);
            let theta_t = pos(t).map_or(0.0, |i| reactance_inv[(i, j)]);
            entries[[l, j]] = (theta_f - theta_t) / x;
        }
    }
    Ok(ShiftFactorMatrix {
        columns,
        entries,
        reference,
    })
}

fn is_connected(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    if n == 0 {
        return true;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    let root = find(&mut parent, 0);
    (1..n).all(|i| find(&mut parent, i) == root)
}

/// flow_l = Σ_b SF[l, b]·NI_b over non-reference buses. `injections` is
/// indexed by case bus and must sum to zero.
pub fn line_flows(sf: &ShiftFactorMatrix, injections: &[f64]) -> Result<Vec<f64>> {
    let imbalance: f64 = injections.iter().sum();
    if imbalance.abs() > BALANCE_TOLERANCE_MW {
        return Err(Error::input(format!(
            "net injections sum to {imbalance} MW, expected 0"
        )));
    }
    Ok(flows_unchecked(sf, injections))
}

pub(crate) fn flows_unchecked(sf: &ShiftFactorMatrix, injections: &[f64]) -> Vec<f64> {
    (0..sf.entries.nrows())
        .map(|l| {
            sf.columns
                .iter()
                .enumerate()
                .map(|(j, &b)| sf.entries[[l, j]] * injections[b])
                .sum()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Case file schema

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    name: String,
    load_value: f64,
    line_violation_price: f64,
    #[serde(default)]
    at_most_one_increment: bool,
    buses: Vec<Bus>,
    lines: Vec<Line>,
    #[serde(default)]
    shift_factors: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(default)]
    increments: Vec<IncrementEntry>,
    penalty_segments: Vec<PenaltySegment>,
    technologies: Vec<TechnologyEntry>,
    #[serde(default)]
    existing: Vec<ExistingEntry>,
    demand: Vec<DemandEntry>,
    #[serde(default)]
    availability: Vec<AvailabilityEntry>,
    #[serde(default)]
    series: BTreeMap<String, SeriesEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IncrementEntry {
    id: String,
    capacity: f64,
    cost: f64,
    #[serde(default)]
    line_cost: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TechnologyEntry {
    #[serde(flatten)]
    tech: Technology,
    /// Constant availability when no profile applies.
    #[serde(default)]
    availability: Option<f64>,
    #[serde(default)]
    profile: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExistingEntry {
    bus: String,
    tech: String,
    capacity: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandEntry {
    bus: String,
    profile: String,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AvailabilityEntry {
    bus: String,
    tech: String,
    profile: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesEntry {
    #[serde(default)]
    values: Option<Vec<f64>>,
    #[serde(default)]
    file: Option<PathBuf>,
    #[serde(default)]
    column: Option<String>,
}

impl CaseFile {
    fn resolve(self, base_dir: &Path) -> Result<SystemCase> {
        let mut warnings = Vec::new();

        let refs: Vec<usize> = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_reference)
            .map(|(i, _)| i)
            .collect();
        if refs.len() != 1 {
            return Err(Error::input(format!(
                "exactly one reference bus required, found {}",
                refs.len()
            )));
        }
        let reference = refs[0];
        let bus_idx: BTreeMap<&str, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect();
        if bus_idx.len() != self.buses.len() {
            return Err(Error::input("duplicate bus id"));
        }
        for line in &self.lines {
            if line.initial_capacity < 0.0 {
                return Err(Error::input(format!(
                    "line '{}' capacity must be >= 0",
                    line.id
                )));
            }
            if line.from_bus == line.to_bus {
                return Err(Error::input(format!(
                    "line '{}' endpoints must differ",
                    line.id
                )));
            }
            for end in [&line.from_bus, &line.to_bus] {
                if !bus_idx.contains_key(end.as_str()) {
                    return Err(Error::unknown("bus", end));
                }
            }
        }
        let line_idx: BTreeMap<&str, usize> = self
            .lines
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        if line_idx.len() != self.lines.len() {
            return Err(Error::input("duplicate line id"));
        }

        let all_reactances = self.lines.iter().all(|l| l.reactance.is_some());
        let computed = if all_reactances {
            Some(compute_shift_factors(&self.buses, &self.lines, reference)?)
        } else {
            None
        };
        let shift_factors = match (self.shift_factors, computed) {
            (Some(table), computed) => {
                let columns: Vec<usize> =
                    (0..self.buses.len()).filter(|&b| b != reference).collect();
                let mut entries = Array2::zeros((self.lines.len(), columns.len()));
                for (line_id, row) in &table {
                    let l = *line_idx
                        .get(line_id.as_str())
                        .ok_or_else(|| Error::unknown("line", line_id))?;
                    for (bus_id, &v) in row {
                        let b = *bus_idx
                            .get(bus_id.as_str())
                            .ok_or_else(|| Error::unknown("bus", bus_id))?;
                        let j = columns.iter().position(|&c| c == b).ok_or_else(|| {
                            Error::input(format!("shift factor given for reference bus '{bus_id}'"))
                        })?;
                        entries[[l, j]] = v;
                    }
                }
                let ingested = ShiftFactorMatrix {
                    columns,
                    entries,
                    reference,
                };
                if let Some(c) = computed {
                    let diff = (&c.entries - &ingested.entries)
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()));
                    if diff > 1e-6 {
                        warnings.push(format!(
                            "ingested shift factors differ from reactance-derived values by up to {diff:.3e}; using ingested values"
                        ));
                    }
                }
                ingested
            }
            (None, Some(c)) => c,
            (None, None) => {
                return Err(Error::input(
                    "either [shift_factors] or a reactance on every line is required",
                ))
            }
        };

        let nl = self.lines.len();
        let mut cost = Array2::zeros((nl, self.increments.len()));
        let mut increments = Vec::with_capacity(self.increments.len());
        for (q, inc) in self.increments.iter().enumerate() {
            if !(inc.capacity > 0.0) {
                return Err(Error::input(format!(
                    "increment '{}' capacity must be > 0",
                    inc.id
                )));
            }
            if inc.cost < 0.0 {
                return Err(Error::input(format!(
                    "increment '{}' cost must be >= 0",
                    inc.id
                )));
            }
            for l in 0..nl {
                cost[[l, q]] = inc.cost;
            }
            for (line_id, &c) in &inc.line_cost {
                let l = *line_idx
                    .get(line_id.as_str())
                    .ok_or_else(|| Error::unknown("line", line_id))?;
                cost[[l, q]] = c;
            }
            increments.push(Increment {
                id: inc.id.clone(),
                capacity: inc.capacity,
            });
        }
        let catalog = IncrementCatalog { increments, cost };

        let penalty = PenaltyCurve {
            segments: self.penalty_segments,
            line_violation_price: self.line_violation_price,
            load_value: self.load_value,
        };
        penalty.validate()?;

        for t in &self.technologies {
            let tech = &t.tech;
            for (name, v) in [
                ("fixed_om", tech.fixed_om),
                ("variable_om", tech.variable_om),
                ("fuel_cost", tech.fuel_cost),
                ("investment_cost", tech.investment_cost),
            ] {
                if v < 0.0 {
                    return Err(Error::input(format!(
                        "technology '{}' {name} must be >= 0",
                        tech.id
                    )));
                }
            }
        }
        let technologies: Vec<Technology> =
            self.technologies.iter().map(|t| t.tech.clone()).collect();
        let tech_idx: BTreeMap<&str, usize> = technologies
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.as_str(), i))
            .collect();

        let nb = self.buses.len();
        let ng = technologies.len();
        let mut existing = Array2::zeros((nb, ng));
        for e in &self.existing {
            let b = *bus_idx
                .get(e.bus.as_str())
                .ok_or_else(|| Error::unknown("bus", &e.bus))?;
            let g = *tech_idx
                .get(e.tech.as_str())
                .ok_or_else(|| Error::unknown("technology", &e.tech))?;
            if e.capacity < 0.0 {
                return Err(Error::input("existing capacity must be >= 0"));
            }
            existing[[b, g]] += e.capacity;
        }

        let mut series: BTreeMap<String, HourlySeries> = BTreeMap::new();
        for (name, entry) in &self.series {
            let s = match (&entry.values, &entry.file) {
                (Some(v), None) => HourlySeries::new(v.clone()),
                (None, Some(f)) => read_series_file(&base_dir.join(f), entry.column.as_deref())?,
                _ => {
                    return Err(Error::input(format!(
                        "series '{name}' needs exactly one of values/file"
                    )))
                }
            };
            series.insert(name.clone(), s);
        }
        let hours = series.values().map(HourlySeries::len).next().unwrap_or(0);
        if hours == 0 {
            return Err(Error::input("case defines no hourly series"));
        }
        for (name, s) in &series {
            if s.len() != hours {
                return Err(Error::input(format!(
                    "series '{name}' has {} hours, expected {hours}",
                    s.len()
                )));
            }
        }
        let get = |name: &str| -> Result<&HourlySeries> {
            series
                .get(name)
                .ok_or_else(|| Error::unknown("series", name))
        };

        let mut demand = Array2::zeros((nb, hours));
        for d in &self.demand {
            let b = *bus_idx
                .get(d.bus.as_str())
                .ok_or_else(|| Error::unknown("bus", &d.bus))?;
            let s = get(&d.profile)?;
            for h in 0..hours {
                demand[[b, h]] += d.scale * s.values()[h];
            }
        }
        if demand.iter().any(|&v| v < 0.0) {
            return Err(Error::input("demand must be >= 0"));
        }

        let mut availability = Array3::zeros((nb, ng, hours));
        for (g, t) in self.technologies.iter().enumerate() {
            let base: Vec<f64> = match (&t.profile, t.availability) {
                (Some(p), None) => get(p)?.values().to_vec(),
                (None, Some(a)) => vec![a; hours],
                (None, None) => vec![1.0; hours],
                (Some(_), Some(_)) => {
                    return Err(Error::input(format!(
                        "technology '{}' sets both profile and availability",
                        t.tech.id
                    )))
                }
            };
            for b in 0..nb {
                for h in 0..hours {
                    availability[[b, g, h]] = base[h];
                }
            }
        }
        for a in &self.availability {
            let b = *bus_idx
                .get(a.bus.as_str())
                .ok_or_else(|| Error::unknown("bus", &a.bus))?;
            let g = *tech_idx
                .get(a.tech.as_str())
                .ok_or_else(|| Error::unknown("technology", &a.tech))?;
            let s = get(&a.profile)?;
            for h in 0..hours {
                availability[[b, g, h]] = s.values()[h];
            }
        }
        if availability.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::input("availability must lie in [0, 1]"));
        }

        Ok(SystemCase {
            name: self.name,
            buses: self.buses,
            reference,
            lines: self.lines,
            shift_factors,
            catalog,
            penalty,
            technologies,
            existing,
            hourly: HourlyInputs {
                demand,
                availability,
            },
            at_most_one_increment: self.at_most_one_increment,
            warnings,
        })
    }
}
