//! Hourly series ingestion and representative-day clustering.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::system::{HourlyInputs, SystemCase};

pub const HOURS_PER_DAY: usize = 24;
const MAX_KMEANS_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlySeries(Vec<f64>);

impl HourlySeries {
    pub fn new(values: Vec<f64>) -> Self {
        HourlySeries(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn days(&self) -> usize {
        self.0.len() / HOURS_PER_DAY
    }
}

/// Read a delimited file with one value per hour. Without `column`, the
/// first field of each row is used and a non-numeric first row is treated as
/// a header.
pub fn read_series_file(path: &Path, column: Option<&str>) -> Result<HourlySeries> {
    let text = read_to_string(path)?;
    let ctx = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let mut values = Vec::new();
    let mut col = 0usize;
    if let Some(name) = column {
        let header = rows
            .next()
            .ok_or_else(|| Error::parse(&ctx, "empty file"))?
            .map_err(|e| Error::parse(&ctx, e))?;
        col = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(&ctx, format!("no column '{name}'")))?;
    }
    for (i, row) in rows.enumerate() {
        let row = row.map_err(|e| Error::parse(&ctx, e))?;
        let field = row
            .get(col)
            .ok_or_else(|| Error::parse(&ctx, format!("row {} has no column {col}", i + 1)))?;
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 && column.is_none() => continue,
            Err(e) => return Err(Error::parse(&ctx, format!("row {}: {e}", i + 1))),
        }
    }
    Ok(HourlySeries(values))
}

/// demand − Σ profileᵢ·capacityᵢ, hour by hour.
pub fn net_load(
    demand: &HourlySeries,
    renewable_profiles: &[HourlySeries],
    renewable_capacity: &[f64],
) -> Result<HourlySeries> {
    if renewable_profiles.len() != renewable_capacity.len() {
        return Err(Error::input("one capacity per renewable profile required"));
    }
    let mut out = demand.0.clone();
    for (profile, &cap) in renewable_profiles.iter().zip(renewable_capacity) {
        if profile.len() != demand.len() {
            return Err(Error::input(format!(
                "profile length {} does not match demand length {}",
                profile.len(),
                demand.len()
            )));
        }
        for (o, p) in out.iter_mut().zip(&profile.0) {
            *o -= p * cap;
        }
    }
    Ok(HourlySeries(out))
}

/// System-aggregate net load of a case: total demand minus existing renewable
/// output at full availability.
pub fn case_net_load(case: &SystemCase) -> HourlySeries {
    let hours = case.hourly.hours();
    let values = (0..hours)
        .map(|h| {
            let demand: f64 = (0..case.bus_count())
                .map(|b| case.hourly.demand[[b, h]])
                .sum();
            let renewable: f64 = (0..case.bus_count())
                .flat_map(|b| (0..case.tech_count()).map(move |g| (b, g)))
                .filter(|&(_, g)| case.technologies[g].renewable)
                .map(|(b, g)| case.existing[[b, g]] * case.hourly.availability[[b, g, h]])
                .sum();
            demand - renewable
        })
        .collect();
    HourlySeries(values)
}

/// One representative day and the days it stands for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayCluster {
    pub representative_day: usize,
    pub members: Vec<usize>,
}

/// Weighted time blocks. Block t stands for `weights[t]` hours of the source
/// year and takes its data from source hour `hours[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeBlocks {
    pub weights: Vec<f64>,
    pub hours: Vec<usize>,
    pub total_hours: usize,
    #[serde(default)]
    pub clusters: Vec<DayCluster>,
    /// Within-cluster sum of squares after each K-means iteration.
    #[serde(default)]
    pub wcss_history: Vec<f64>,
}

impl TimeBlocks {
    /// Every hour its own block with weight 1.
    pub fn full(hours: usize) -> Self {
        TimeBlocks {
            weights: vec![1.0; hours],
            hours: (0..hours).collect(),
            total_hours: hours,
            clusters: Vec::new(),
            wcss_history: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Demand and availability sliced at the representative hours.
    pub fn slice_inputs(&self, hourly: &HourlyInputs) -> Result<BlockInputs> {
        let hours = hourly.hours();
        if let Some(&h) = self.hours.iter().find(|&&h| h >= hours) {
            return Err(Error::input(format!(
                "block references hour {h}, series has {hours}"
            )));
        }
        let (nb, ng, _) = hourly.availability.dim();
        let nt = self.len();
        let mut demand = Array2::zeros((nb, nt));
        let mut availability = Array3::zeros((nb, ng, nt));
        for (t, &h) in self.hours.iter().enumerate() {
            for b in 0..nb {
                demand[[b, t]] = hourly.demand[[b, h]];
                for g in 0..ng {
                    availability[[b, g, t]] = hourly.availability[[b, g, h]];
                }
            }
        }
        Ok(BlockInputs {
            weights: self.weights.clone(),
            demand,
            availability,
        })
    }

    /// Audit table: block, source hour, day, hour of day, weight.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::parse("block export", e);
        w.write_record(["block", "source_hour", "day", "hour_of_day", "weight"])
            .map_err(io)?;
        for (t, (&h, &wt)) in self.hours.iter().zip(&self.weights).enumerate() {
            w.write_record([
                t.to_string(),
                h.to_string(),
                (h / HOURS_PER_DAY).to_string(),
                (h % HOURS_PER_DAY).to_string(),
                format!("{wt}"),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io {
            context: "block export".into(),
            source: e,
        })
    }
}

/// Per-block demand and availability, the data the optimizer consumes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockInputs {
    pub weights: Vec<f64>,
    /// `demand[[b, t]]`, MW.
    pub demand: Array2<f64>,
    /// `availability[[b, g, t]]`.
    pub availability: Array3<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a centre; take the first unused
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            if chosen.contains(&pick) {
                (0..n)
                    .find(|i| !chosen.contains(i) && d2[*i] > 0.0)
                    .unwrap_or(pick)
            } else {
                pick
            }
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

/// K-means over standardized 24-hour day vectors. Each cluster is represented
/// by its medoid day; every hour of that day becomes a block weighted by the
/// cluster size. Blocks are ordered by representative day.
pub fn cluster_days(net_load: &HourlySeries, k: usize, seed: u64) -> Result<TimeBlocks> {
    let hours = net_load.len();
    if hours == 0 || hours % HOURS_PER_DAY != 0 {
        return Err(Error::input(format!(
            "series length {hours} is not a positive multiple of {HOURS_PER_DAY}"
        )));
    }
    let days = hours / HOURS_PER_DAY;
    if k < 1 || k > days {
        return Err(Error::input(format!(
            "representative day count {k} must lie in 1..={days}"
        )));
    }

    let v = net_load.values();
    let mean = v.iter().sum::<f64>() / hours as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / hours as f64;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    let points: Vec<Vec<f64>> = (0..days)
        .map(|d| {
            v[d * HOURS_PER_DAY..(d + 1) * HOURS_PER_DAY]
                .iter()
                .map(|x| (x - mean) / sd)
                .collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(&points, k, &mut rng);
    let mut assignment = vec![usize::MAX; days];
    let mut history = Vec::new();

    for _ in 0..MAX_KMEANS_ITERATIONS {
        let mut changed = false;
        for (d, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if assignment[d] != c {
                assignment[d] = c;
                changed = true;
            }
        }
        // reseed empty clusters with the point farthest from its centroid
        for c in 0..k {
            if !assignment.contains(&c) {
                let far = (0..days)
                    .filter(|&d| assignment.iter().filter(|&&a| a == assignment[d]).count() > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[assignment[a]]);
                        let db = sq_dist(&points[b], &centroids[assignment[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("k <= days leaves a shared cluster");
                assignment[far] = c;
                centroids[c] = points[far].clone();
                changed = true;
            }
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(p, _)| p)
                .collect();
            for (i, x) in centroid.iter_mut().enumerate() {
                *x = members.iter().map(|m| m[i]).sum::<f64>() / members.len() as f64;
            }
        }
        let wcss: f64 = points
            .iter()
            .zip(&assignment)
            .map(|(p, &a)| sq_dist(p, &centroids[a]))
            .sum();
        history.push(wcss);
        if !changed {
            break;
        }
    }

    let mut clusters: Vec<DayCluster> = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..days).filter(|&d| assignment[d] == c).collect();
            let representative_day = *members
                .iter()
                .min_by(|&&a, &&b| {
                    sq_dist(&points[a], &centroids[c])
                        .total_cmp(&sq_dist(&points[b], &centroids[c]))
                        .then(a.cmp(&b))
                })
                .expect("clusters are non-empty");
            DayCluster {
                representative_day,
                members,
            }
        })
        .collect();
    clusters.sort_by_key(|c| c.representative_day);

    let mut weights = Vec::with_capacity(k * HOURS_PER_DAY);
    let mut block_hours = Vec::with_capacity(k * HOURS_PER_DAY);
    for c in &clusters {
        for h in 0..HOURS_PER_DAY {
            weights.push(c.members.len() as f64);
            block_hours.push(c.representative_day * HOURS_PER_DAY + h);
        }
    }
    Ok(TimeBlocks {
        weights,
        hours: block_hours,
        total_hours: hours,
        clusters,
        wcss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_year(days: usize) -> HourlySeries {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = (0..days * 24)
            .map(|h| {
                let day = (h / 24) as f64;
                let hod = (h % 24) as f64;
                1000.0
                    + 300.0 * (2.0 * std::f64::consts::PI * day / 365.0).cos()
                    + 200.0 * (2.0 * std::f64::consts::PI * (hod - 6.0) / 24.0).sin()
                    + rng.gen_range(-50.0..50.0)
            })
            .collect();
        HourlySeries::new(v)
    }

    #[test]
    fn net_load_examples() {
        let demand = HourlySeries::new(vec![100.0; 4]);
        assert_eq!(net_load(&demand, &[], &[]).unwrap(), demand);
        let full = HourlySeries::new(vec![1.0; 4]);
        assert_eq!(
            net_load(&demand, &[full], &[100.0]).unwrap().values(),
            &[0.0; 4]
        );
        let half = HourlySeries::new(vec![0.5; 4]);
        assert_eq!(
            net_load(&demand, &[half], &[100.0]).unwrap().values(),
            &[50.0; 4]
        );
        let short = HourlySeries::new(vec![0.5; 3]);
        assert!(net_load(&demand, &[short], &[100.0]).is_err());
    }

    #[test]
    fn k_equal_days_gives_unit_day_weights() {
        let s = synthetic_year(10);
        let blocks = cluster_days(&s, 10, 1).unwrap();
        assert_eq!(blocks.len(), 240);
        assert!(blocks.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn constant_series_single_cluster() {
        let s = HourlySeries::new(vec![5.0; 24 * 30]);
        let blocks = cluster_days(&s, 1, 3).unwrap();
        assert_eq!(blocks.len(), 24);
        assert_eq!(blocks.weights.iter().sum::<f64>(), 720.0);
    }

    #[test]
    fn full_year_twenty_days() {
        let s = synthetic_year(365);
        let blocks = cluster_days(&s, 20, 42).unwrap();
        assert_eq!(blocks.len(), 480);
        assert_eq!(blocks.weights.iter().sum::<f64>(), 8760.0);
        for pair in blocks.wcss_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs(), "{pair:?}");
        }
    }

    #[test]
    fn clustering_is_deterministic() {
        let s = synthetic_year(60);
        assert_eq!(
            cluster_days(&s, 6, 9).unwrap(),
            cluster_days(&s, 6, 9).unwrap()
        );
    }

    #[test]
    fn k_out_of_range() {
        let s = synthetic_year(5);
        assert!(cluster_days(&s, 0, 1).is_err());
        assert!(cluster_days(&s, 6, 1).is_err());
        assert!(cluster_days(&HourlySeries::new(vec![1.0; 25]), 1, 1).is_err());
    }

    #[test]
    fn reads_series_with_header_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(&p, "load,wind\n1,0.5\n2,0.25\n").unwrap();
        assert_eq!(read_series_file(&p, None).unwrap().values(), &[1.0, 2.0]);
        assert_eq!(
            read_series_file(&p, Some("wind")).unwrap().values(),
            &[0.5, 0.25]
        );
        assert!(read_series_file(&dir.path().join("missing.csv"), None).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn weights_conserve_hours(days in 1usize..40, k_frac in 0.0f64..1.0, seed in 0u64..1000) {
            let s = synthetic_year(days);
            let k = 1 + ((days - 1) as f64 * k_frac) as usize;
            let blocks = cluster_days(&s, k, seed).unwrap();
            proptest::prop_assert_eq!(blocks.weights.iter().sum::<f64>(), (days * 24) as f64);
            proptest::prop_assert_eq!(blocks.len(), k * 24);
            for pair in blocks.wcss_history.windows(2) {
                proptest::prop_assert!(pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0));
            }
        }
    }
}
