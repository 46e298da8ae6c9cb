//! Beneficiaries-pay allocation ratios, benefit–cost ratios, and the
//! project-sum versus portfolio comparison.
//!
//! Ratios are held as fractions internally; `percent` fields and the text
//! tables round to two decimals for display only.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    LoadOnly,
    LoadAndGen,
}

impl std::str::FromStr for Policy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "load-only" => Ok(Policy::LoadOnly),
            "load+gen" | "load-and-gen" => Ok(Policy::LoadAndGen),
            _ => Err(Error::input(format!(
                "unknown policy '{s}' (load-only | load+gen)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Participant {
    Load { bus: String },
    Generator { bus: String, tech: String },
}

impl Participant {
    pub fn bus(&self) -> &str {
        match self {
            Participant::Load { bus } | Participant::Generator { bus, .. } => bus,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Participant::Load { bus } => format!("load@{bus}"),
            Participant::Generator { bus, tech } => format!("gen@{bus}/{tech}"),
        }
    }
}

/// One participant's line in an allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Share {
    pub participant: Participant,
    /// Benefit entering the allocation: ΔU for loads, G⁰·ΔU for generators.
    pub benefit: f64,
    /// Allocation ratio as a fraction.
    pub ratio: f64,
    pub allocated_cost: f64,
    /// benefit / allocated cost; `None` when no cost is allocated.
    pub benefit_cost_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    pub policy: Policy,
    pub scope: String,
    pub cost: f64,
    pub compensate_losers: bool,
    pub shares: Vec<Share>,
}

impl AllocationReport {
    pub fn ratio_of(&self, p: &Participant) -> Option<f64> {
        self.shares
            .iter()
            .find(|s| &s.participant == p)
            .map(|s| s.ratio)
    }

    /// Σ of ratios (fraction).
    pub fn total_ratio(&self) -> f64 {
        self.shares.iter().map(|s| s.ratio).sum()
    }

    /// Percent by bus for loads.
    pub fn load_percent_by_bus(&self) -> BTreeMap<String, f64> {
        self.percent_by_bus(|p| matches!(p, Participant::Load { .. }))
    }

    /// Percent by bus summed over generator participants.
    pub fn gen_percent_by_bus(&self) -> BTreeMap<String, f64> {
        self.percent_by_bus(|p| matches!(p, Participant::Generator { .. }))
    }

    fn percent_by_bus(&self, keep: impl Fn(&Participant) -> bool) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for s in self.shares.iter().filter(|s| keep(&s.participant)) {
            *out.entry(s.participant.bus().to_string()).or_insert(0.0) += 100.0 * s.ratio;
        }
        out
    }

    /// Builds a report from externally supplied ratios (fractions).
    pub fn from_ratios(scope: &str, cost: f64, ratios: &[(Participant, f64)]) -> Result<Self> {
        let shares = ratios
            .iter()
            .map(|(p, r)| {
                if !r.is_finite() {
                    return Err(Error::input(format!(
                        "ratio for {} is not finite",
                        p.label()
                    )));
                }
                Ok(Share {
                    participant: p.clone(),
                    benefit: f64::NAN,
                    ratio: *r,
                    allocated_cost: r * cost,
                    benefit_cost_ratio: None,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AllocationReport {
            policy: Policy::LoadOnly,
            scope: scope.to_string(),
            cost,
            compensate_losers: false,
            shares,
        })
    }

    /// Participants as rows, two-decimal percentages, benefit and cost.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scope\t{}\npolicy\t{:?}\ncost\t{}",
            self.scope,
            self.policy,
            fmt2(self.cost)
        );
        let _ = writeln!(
            out,
            "participant\tbenefit\tratio_pct\tallocated_cost\tbenefit_cost_ratio"
        );
        for s in &self.shares {
            let bcr = s
                .benefit_cost_ratio
                .map_or_else(|| "no cost allocated".to_string(), fmt2);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                s.participant.label(),
                fmt2(s.benefit),
                fmt2(100.0 * s.ratio),
                fmt2(s.allocated_cost),
                bcr
            );
        }
        let _ = writeln!(
            out,
            "sum\t\t{}\t{}",
            fmt2(100.0 * self.total_ratio()),
            fmt2(self.cost)
        );
        out
    }
}

/// Two-decimal display with negative zero folded to zero.
pub fn fmt2(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == 0.0 {
        "0.00".into()
    } else {
        format!("{r:.2}")
    }
}

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

fn allocate(
    policy: Policy,
    scope: &str,
    cost: f64,
    entries: Vec<(Participant, f64)>,
    compensate_losers: bool,
) -> Result<AllocationReport> {
    if let Some((p, _)) = entries.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::input(format!(
            "benefit for {} is not finite",
            p.label()
        )));
    }
    let denom: f64 = if compensate_losers {
        entries.iter().map(|(_, v)| v).sum()
    } else {
        entries.iter().map(|(_, v)| pos(*v)).sum()
    };
    if !(denom > 0.0) {
        return Err(Error::NoBeneficiaries);
    }
    let shares = entries
        .into_iter()
        .map(|(participant, benefit)| {
            let ratio = if compensate_losers {
                benefit / denom
            } else {
                pos(benefit) / denom
            };
            let allocated_cost = ratio * cost;
            Share {
                participant,
                benefit,
                ratio,
                allocated_cost,
                benefit_cost_ratio: (ratio != 0.0 && cost != 0.0).then(|| benefit / allocated_cost),
            }
        })
        .collect();
    Ok(AllocationReport {
        policy,
        scope: scope.to_string(),
        cost,
        compensate_losers,
        shares,
    })
}

/// Load-only allocation: r_b = [ΔU_b]₊ / Σ[ΔU]₊. With `compensate_losers`
/// the net form ΔU_b / ΣΔU is used and ratios may be negative.
pub fn allocate_load_only(
    scope: &str,
    cost: f64,
    deltas: &[LoadDelta],
    compensate_losers: bool,
) -> Result<AllocationReport> {
    let entries = deltas
        .iter()
        .map(|d| (Participant::Load { bus: d.bus.clone() }, d.delta))
        .collect();
    allocate(Policy::LoadOnly, scope, cost, entries, compensate_losers)
}

/// Allocation to loads and existing generation. Generator benefit is
/// G⁰·ΔU^gen, with G⁰ taken at the generator's own bus.
pub fn allocate_load_and_gen(
    scope: &str,
    cost: f64,
    loads: &[LoadDelta],
    generators: &[GenDelta],
    compensate_losers: bool,
) -> Result<AllocationReport> {
    let mut entries: Vec<(Participant, f64)> = loads
        .iter()
        .map(|d| (Participant::Load { bus: d.bus.clone() }, d.delta))
        .collect();
    for g in generators {
        if g.existing_mw < 0.0 {
            return Err(Error::input(format!(
                "negative existing capacity for gen@{}/{}",
                g.bus, g.tech
            )));
        }
        entries.push((
            Participant::Generator {
                bus: g.bus.clone(),
                tech: g.tech.clone(),
            },
            g.existing_mw * g.unit_delta,
        ));
    }
    allocate(Policy::LoadAndGen, scope, cost, entries, compensate_losers)
}

/// ΔU / (r·cost) per participant; `None` where no cost is allocated.
pub fn benefit_cost_ratios(
    report: &AllocationReport,
    total_cost: f64,
) -> Result<Vec<(Participant, Option<f64>)>> {
    if !(total_cost > 0.0) {
        return Err(Error::input("total cost must be > 0"));
    }
    Ok(report
        .shares
        .iter()
        .map(|s| {
            let c = s.ratio * total_cost;
            (s.participant.clone(), (c != 0.0).then(|| s.benefit / c))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeRow {
    pub participant: Participant,
    /// Σ_p r_p·cost_p.
    pub summed_cost: f64,
    /// summed_cost as a share of Σ_p cost_p.
    pub summed_ratio: f64,
    pub portfolio_cost: f64,
    pub portfolio_ratio: f64,
    pub portfolio_benefit: f64,
    /// Negative portfolio benefit but positive summed cost.
    pub flagged: bool,
    /// portfolio benefit / summed cost.
    pub summed_benefit_cost_ratio: Option<f64>,
    pub portfolio_benefit_cost_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeComparison {
    pub project_cost: f64,
    pub portfolio_cost: f64,
    pub rows: Vec<ScopeRow>,
}

impl ScopeComparison {
    pub fn flagged(&self) -> Vec<&Participant> {
        self.rows
            .iter()
            .filter(|r| r.flagged)
            .map(|r| &r.participant)
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "participant\tsummed_cost\tsummed_pct\tportfolio_cost\tportfolio_pct\tportfolio_benefit\tflag"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.participant.label(),
                fmt2(r.summed_cost),
                fmt2(100.0 * r.summed_ratio),
                fmt2(r.portfolio_cost),
                fmt2(100.0 * r.portfolio_ratio),
                fmt2(r.portfolio_benefit),
                if r.flagged {
                    "negative-benefit-positive-cost"
                } else {
                    ""
                }
            );
        }
        out
    }
}

/// Summed project-level allocations against the portfolio allocation.
/// `portfolio_benefits` supplies the portfolio ΔU per participant when the
/// portfolio report was built from ratios alone.
pub fn compare_scopes(
    projects: &[AllocationReport],
    portfolio: &AllocationReport,
    portfolio_benefits: Option<&[(Participant, f64)]>,
) -> Result<ScopeComparison> {
    if projects.is_empty() {
        return Err(Error::input("no project reports to compare"));
    }
    let participants: Vec<&Participant> = portfolio.shares.iter().map(|s| &s.participant).collect();
    for p in projects {
        let mut a: Vec<&Participant> = p.shares.iter().map(|s| &s.participant).collect();
        let mut b = participants.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::input(format!(
                "project '{}' participants differ from the portfolio's",
                p.scope
            )));
        }
    }
    let project_cost: f64 = projects.iter().map(|p| p.cost).sum();
    if !(project_cost > 0.0) {
        return Err(Error::input("summed project cost must be > 0"));
    }
    let rows = portfolio
        .shares
        .iter()
        .map(|s| {
            let summed_cost: f64 = projects
                .iter()
                .map(|p| p.ratio_of(&s.participant).unwrap_or(0.0) * p.cost)
                .sum();
            let benefit = match portfolio_benefits {
                Some(list) => list
                    .iter()
                    .find(|(p, _)| p == &s.participant)
                    .map(|(_, v)| *v)
                    .unwrap_or(f64::NAN),
                None => s.benefit,
            };
            ScopeRow {
                participant: s.participant.clone(),
                summed_cost,
                summed_ratio: summed_cost / project_cost,
                portfolio_cost: s.allocated_cost,
                portfolio_ratio: s.ratio,
                portfolio_benefit: benefit,
                flagged: benefit < 0.0 && summed_cost > 0.0,
                summed_benefit_cost_ratio: (summed_cost != 0.0).then(|| benefit / summed_cost),
                portfolio_benefit_cost_ratio: (s.allocated_cost != 0.0)
                    .then(|| benefit / s.allocated_cost),
            }
        })
        .collect();
    Ok(ScopeComparison {
        project_cost,
        portfolio_cost: portfolio.cost,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Benefit sets: the allocation input file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadDelta {
    pub bus: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDelta {
    pub bus: String,
    pub tech: String,
    pub existing_mw: f64,
    /// Per-MW benefit.
    pub unit_delta: f64,
}

/// Benefits for one scope (a project or the portfolio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeBenefits {
    pub scope: String,
    pub cost: f64,
    #[serde(default)]
    pub loads: Vec<LoadDelta>,
    #[serde(default)]
    pub generators: Vec<GenDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenefitSet {
    pub scopes: Vec<ScopeBenefits>,
}

impl BenefitSet {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    pub fn scope(&self, name: &str) -> Result<&ScopeBenefits> {
        self.scopes
            .iter()
            .find(|s| s.scope == name)
            .ok_or_else(|| Error::unknown("scope", name))
    }

    pub fn projects(&self) -> impl Iterator<Item = &ScopeBenefits> {
        self.scopes.iter().filter(|s| s.scope != "portfolio")
    }
}

impl ScopeBenefits {
    pub fn allocate(&self, policy: Policy, compensate_losers: bool) -> Result<AllocationReport> {
        match policy {
            Policy::LoadOnly => {
                allocate_load_only(&self.scope, self.cost, &self.loads, compensate_losers)
            }
            Policy::LoadAndGen => allocate_load_and_gen(
                &self.scope,
                self.cost,
                &self.loads,
                &self.generators,
                compensate_losers,
            ),
        }
    }
}

/// Ready-made benefit vectors from the eight-bus study ($M), usable as
/// regression inputs for the allocation formulas.
pub mod fixtures {
    use super::*;

    pub const BUSES: [&str; 8] = ["b1", "b2", "b3", "b4", "b5", "b6", "b7", "b8"];

    /// Per-project load benefits and annualized line costs ($M/yr).
    pub const PROJECTS: [(&str, f64, [f64; 8]); 6] = [
        (
            "l2",
            154.96,
            [
                4904.0, -1488.0, -1509.0, -171.0, -831.0, -15.0, -2015.0, 411.0,
            ],
        ),
        (
            "l3",
            78.34,
            [
                3668.0, -2279.0, -61.0, -625.0, -2233.0, -104.0, -908.0, -2170.0,
            ],
        ),
        (
            "l6",
            72.64,
            [-67.0, 2600.0, -2.0, 1.0, 53.0, -9.0, -1887.0, 132.0],
        ),
        (
            "l7",
            98.79,
            [-456.0, -1714.0, -912.0, 304.0, 85.0, -159.0, -1525.0, 795.0],
        ),
        (
            "l10",
            78.34,
            [
                181.0, -2333.0, -10.0, -149.0, -1439.0, -146.0, -910.0, 2288.0,
            ],
        ),
        (
            "l12",
            78.34,
            [12.0, 196.0, -5.0, 77.0, 1195.0, 12.0, -1848.0, 336.0],
        ),
    ];

    /// Printed per-project load ratios (%), in `PROJECTS` order.
    pub const PROJECT_RATIOS: [[f64; 8]; 6] = [
        [92.27, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 7.73],
        [100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 93.32, 0.0, 0.04, 0.0, 0.0, 0.0, 1.90],
        [0.0, 0.0, 0.0, 25.68, 7.18, 0.0, 0.0, 67.15],
        [7.33, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 92.67],
        [0.66, 10.72, 0.0, 4.21, 65.37, 0.65, 0.0, 18.38],
    ];

    pub const PORTFOLIO: [f64; 8] = [
        6215.0, 2281.0, -1379.0, -453.0, -120.0, 15.0, -3250.0, 2360.0,
    ];

    /// Generator ratios (%) by bus under the load-and-generation policy.
    pub const GEN_RATIOS: [f64; 8] = [0.0, 0.01, 46.48, 11.2, 0.03, 0.07, 17.3, 2.19];
    /// Load share (%) under the load-and-generation policy.
    pub const LOAD_SHARE: f64 = 22.72;

    fn loads(deltas: &[f64; 8]) -> Vec<LoadDelta> {
        BUSES
            .iter()
            .zip(deltas)
            .map(|(b, &d)| LoadDelta {
                bus: b.to_string(),
                delta: d,
            })
            .collect()
    }

    pub fn portfolio_cost() -> f64 {
        PROJECTS.iter().map(|p| p.1).sum()
    }

    /// Generator benefits consistent with the load/generation split: each
    /// bus holds one beneficiary "thermal" unit block sized so that the
    /// pooled ratios reproduce `GEN_RATIOS`, plus losing "wind" blocks at
    /// the load-benefit buses (which the [·]₊ operator must ignore).
    pub fn portfolio_generators() -> Vec<GenDelta> {
        let load_positive: f64 = PORTFOLIO.iter().map(|v| v.max(0.0)).sum();
        let pool = load_positive / (LOAD_SHARE / 100.0);
        let mut out = Vec::new();
        for (b, &pct) in BUSES.iter().zip(&GEN_RATIOS) {
            let existing = 1000.0;
            out.push(GenDelta {
                bus: b.to_string(),
                tech: "thermal".into(),
                existing_mw: existing,
                unit_delta: pool * pct / 100.0 / existing,
            });
        }
        for b in ["b1", "b2"] {
            out.push(GenDelta {
                bus: b.to_string(),
                tech: "wind".into(),
                existing_mw: 2000.0,
                unit_delta: -1.5,
            });
        }
        out
    }

    pub fn benefit_set() -> BenefitSet {
        let mut scopes: Vec<ScopeBenefits> = PROJECTS
            .iter()
            .map(|(id, cost, d)| ScopeBenefits {
                scope: id.to_string(),
                cost: *cost,
                loads: loads(d),
                generators: Vec::new(),
            })
            .collect();
        scopes.push(ScopeBenefits {
            scope: "portfolio".into(),
            cost: portfolio_cost(),
            loads: loads(&PORTFOLIO),
            generators: portfolio_generators(),
        });
        BenefitSet { scopes }
    }

    /// A benefit set in which nobody gains.
    pub fn no_beneficiaries() -> BenefitSet {
        BenefitSet {
            scopes: vec![ScopeBenefits {
                scope: "portfolio".into(),
                cost: 100.0,
                loads: loads(&[-1.0, -2.0, 0.0, -3.0, -4.0, 0.0, -5.0, -6.0]),
                generators: Vec::new(),
            }],
        }
    }

    /// Project reports built from the printed ratios.
    pub fn printed_project_reports() -> Vec<AllocationReport> {
        PROJECTS
            .iter()
            .zip(&PROJECT_RATIOS)
            .map(|((id, cost, _), r)| {
                let ratios: Vec<(Participant, f64)> = BUSES
                    .iter()
                    .zip(r)
                    .map(|(b, &v)| (Participant::Load { bus: b.to_string() }, v / 100.0))
                    .collect();
                AllocationReport::from_ratios(id, *cost, &ratios).expect("finite fixture")
            })
            .collect()
    }

    pub fn portfolio_benefits() -> Vec<(Participant, f64)> {
        BUSES
            .iter()
            .zip(&PORTFOLIO)
            .map(|(b, &v)| (Participant::Load { bus: b.to_string() }, v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn load_deltas(v: &[f64]) -> Vec<LoadDelta> {
        v.iter()
            .enumerate()
            .map(|(i, &d)| LoadDelta {
                bus: format!("b{}", i + 1),
                delta: d,
            })
            .collect()
    }

    #[test]
    fn all_negative_is_no_beneficiaries() {
        let r = allocate_load_only("p", 1.0, &load_deltas(&[-1.0, 0.0, -3.0]), false);
        assert!(matches!(r, Err(Error::NoBeneficiaries)));
    }

    #[test]
    fn two_equal_beneficiaries_split_evenly() {
        let r = allocate_load_only("p", 10.0, &load_deltas(&[5.0, -1.0, 5.0]), false).unwrap();
        assert_eq!(r.shares[0].ratio, 0.5);
        assert_eq!(r.shares[1].ratio, 0.0);
        assert_eq!(r.shares[2].ratio, 0.5);
        assert_eq!(r.shares[1].benefit_cost_ratio, None);
    }

    #[test]
    fn zero_gen_deltas_reduce_to_load_only() {
        let loads = load_deltas(&[3.0, 1.0, -2.0]);
        let gens = vec![GenDelta {
            bus: "b1".into(),
            tech: "gas".into(),
            existing_mw: 100.0,
            unit_delta: 0.0,
        }];
        let a = allocate_load_only("p", 7.0, &loads, false).unwrap();
        let b = allocate_load_and_gen("p", 7.0, &loads, &gens, false).unwrap();
        for s in &a.shares {
            assert_eq!(b.ratio_of(&s.participant), Some(s.ratio));
        }
        assert_eq!(b.shares.last().unwrap().ratio, 0.0);
    }

    #[test]
    fn compensation_allows_negative_ratios() {
        let r = allocate_load_only("p", 10.0, &load_deltas(&[6.0, -2.0]), true).unwrap();
        assert!((r.shares[0].ratio - 1.5).abs() < 1e-12);
        assert!((r.shares[1].ratio + 0.5).abs() < 1e-12);
        assert!((r.total_ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_single_project_and_portfolio_match() {
        let d = load_deltas(&[4.0, -1.0, 2.0]);
        let p = allocate_load_only("l1", 9.0, &d, false).unwrap();
        let q = allocate_load_only("portfolio", 9.0, &d, false).unwrap();
        let cmp = compare_scopes(&[p], &q, None).unwrap();
        for r in &cmp.rows {
            assert!((r.summed_ratio - r.portfolio_ratio).abs() < 1e-15);
            assert!(!r.flagged);
        }
    }

    #[test]
    fn mismatched_participants_rejected() {
        let p = allocate_load_only("l1", 1.0, &load_deltas(&[1.0, 2.0]), false).unwrap();
        let q =
            allocate_load_only("portfolio", 1.0, &load_deltas(&[1.0, 2.0, 3.0]), false).unwrap();
        assert!(compare_scopes(&[p], &q, None).is_err());
    }

    #[test]
    fn zero_cost_benefit_cost_ratio_is_error() {
        let r = allocate_load_only("p", 1.0, &load_deltas(&[1.0]), false).unwrap();
        assert!(benefit_cost_ratios(&r, 0.0).is_err());
    }

    #[test]
    fn display_rounding() {
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(57.1659), "57.17");
    }

    proptest! {
        #[test]
        fn ratios_normalize_and_zero_losers(v in prop::collection::vec(-100.0f64..100.0, 1..12)) {
            prop_assume!(v.iter().any(|&x| x > 0.0));
            let r = allocate_load_only("p", 5.0, &load_deltas(&v), false).unwrap();
            prop_assert!((r.total_ratio() - 1.0).abs() < 1e-9);
            for (s, &d) in r.shares.iter().zip(&v) {
                prop_assert!(s.ratio >= 0.0);
                if d <= 0.0 { prop_assert_eq!(s.ratio, 0.0); }
            }
        }

        #[test]
        fn ratios_scale_invariant(v in prop::collection::vec(-100.0f64..100.0, 1..12), k in 0.001f64..1000.0) {
            prop_assume!(v.iter().any(|&x| x > 0.0));
            let a = allocate_load_only("p", 5.0, &load_deltas(&v), false).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
            let b = allocate_load_only("p", 5.0, &load_deltas(&scaled), false).unwrap();
            for (x, y) in a.shares.iter().zip(&b.shares) {
                prop_assert!((x.ratio - y.ratio).abs() < 1e-12);
            }
        }

        #[test]
        fn pooled_ratios_normalize(
            loads in prop::collection::vec(-50.0f64..50.0, 1..6),
            gens in prop::collection::vec((0.0f64..500.0, -1.0f64..1.0), 0..6),
        ) {
            let g: Vec<GenDelta> = gens.iter().enumerate().map(|(i, &(e, u))| GenDelta {
                bus: format!("b{}", i + 1), tech: "t".into(), existing_mw: e, unit_delta: u,
            }).collect();
            let any_pos = loads.iter().any(|&x| x > 0.0) || g.iter().any(|x| x.existing_mw * x.unit_delta > 0.0);
            let r = allocate_load_and_gen("p", 1.0, &load_deltas(&loads), &g, false);
            if any_pos {
                let r = r.unwrap();
                prop_assert!((r.total_ratio() - 1.0).abs() < 1e-9);
                let bcr: Vec<f64> = r.shares.iter().filter_map(|s| s.benefit_cost_ratio).collect();
                for w in bcr.windows(2) {
                    prop_assert!((w[0] - w[1]).abs() <= 1e-9 * w[0].abs().max(1.0));
                }
            } else {
                prop_assert!(matches!(r, Err(Error::NoBeneficiaries)));
            }
        }
    }
}
