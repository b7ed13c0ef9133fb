//! K-means over panel signals with DTW as the dissimilarity and DBA centroids.
//!
//! Every restart seeds with k-means++ on squared DTW distances, then alternates
//! nearest-centroid assignment with a DBA update warm-started from the previous
//! centroid, until the assignment stops changing. Seeding and member order are
//! keyed on sorted panel ids, so reordering the fleet permutes the output without
//! changing the partition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dba::{dba_from, Centroid, DbaConfig};
use crate::dtw::{accumulated_cost, distance_matrix, BandConstraint, DistanceMatrix, Envelope};
use crate::error::{Error, Result};
use crate::numeric::exact_sum;
use crate::signal::Fleet;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub band: BandConstraint,
    pub dba_max_iter: usize,
    pub dba_tol: f64,
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 2,
            max_iter: 50,
            seed: DEFAULT_SEED,
            band: BandConstraint::Unconstrained,
            dba_max_iter: crate::dba::DEFAULT_MAX_ITER,
            dba_tol: crate::dba::DEFAULT_TOL,
            n_init: 5,
        }
    }
}

impl KMeansConfig {
    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_band(mut self, band: BandConstraint) -> Self {
        self.band = band;
        self
    }

    pub fn with_n_init(mut self, n_init: usize) -> Self {
        self.n_init = n_init;
        self
    }

    fn dba(&self) -> DbaConfig {
        DbaConfig {
            band: self.band,
            max_iter: self.dba_max_iter,
            tol: self.dba_tol,
        }
    }

    pub fn validate(&self, fleet_size: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.k > fleet_size {
            return Err(Error::TooManyClusters {
                k: self.k,
                n: fleet_size,
            });
        }
        if self.n_init == 0 || self.max_iter == 0 || self.dba_max_iter == 0 {
            return Err(Error::InvalidConfig(
                "n_init, max_iter and dba_max_iter must be at least 1".into(),
            ));
        }
        if self.dba_tol.is_nan() || self.dba_tol <= 0.0 {
            return Err(Error::InvalidConfig("dba_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Panel id to cluster index, in fleet order. Serializes as a JSON object that keeps that order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignments(Vec<(String, usize)>);

impl Assignments {
    pub fn new(pairs: Vec<(String, usize)>) -> Self {
        Self(pairs)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(id, c)| (id.as_str(), *c))
    }

    pub fn get(&self, panel_id: &str) -> Option<usize> {
        self.0.iter().find(|(id, _)| id == panel_id).map(|&(_, c)| c)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.0.iter().map(|&(_, c)| c).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for Assignments {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (id, c) in &self.0 {
            map.serialize_entry(id, c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Assignments {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct OrderedMap;
        impl<'de> Visitor<'de> for OrderedMap {
            type Value = Assignments;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of panel id to cluster index")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Assignments, A::Error> {
                let mut pairs = Vec::new();
                while let Some(entry) = access.next_entry::<String, usize>()? {
                    pairs.push(entry);
                }
                Ok(Assignments(pairs))
            }
        }
        deserializer.deserialize_map(OrderedMap)
    }
}

/// Objective history of one restart.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RestartTrace {
    pub seed_stream: u64,
    /// Inertia after every assignment step and every centroid update, in order.
    pub inertia: Vec<f64>,
    /// DBA objective sequence of every centroid update, cluster by cluster.
    pub dba_objectives: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub restarts: Vec<RestartTrace>,
    pub best_restart: usize,
}

/// Result of [`fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub seed: u64,
    /// Sum over panels of the squared DTW distance to the assigned centroid.
    pub inertia: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub centroids: Vec<Centroid>,
    pub assignments: Assignments,
    #[serde(skip)]
    pub trace: FitTrace,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for (_, c) in self.assignments.iter() {
            sizes[c] += 1;
        }
        sizes
    }

    /// Panel ids in cluster `c`, in fleet order.
    pub fn members(&self, c: usize) -> Vec<&str> {
        self.assignments
            .iter()
            .filter(|&(_, a)| a == c)
            .map(|(id, _)| id)
            .collect()
    }
}

/// k-means++ seeding on squared DTW distances. Returns copies of fleet members.
pub fn init_centroids(fleet: &Fleet, config: &KMeansConfig, rng: &mut impl Rng) -> Result<Vec<Centroid>> {
    fleet.require_aligned()?;
    if config.k > fleet.len() {
        return Err(Error::TooManyClusters {
            k: config.k,
            n: fleet.len(),
        });
    }
    if config.k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let distances = if fleet.len() > 1 {
        distance_matrix(fleet, config.band)?
    } else {
        DistanceMatrix::from_rows(fleet.panel_ids(), vec![vec![0.0]])?
    };
    let chosen = seed_indices(&distances, &fleet.id_order(), config.k, rng);
    Ok(chosen
        .into_iter()
        .map(|i| Centroid(fleet.series()[i].values().to_vec()))
        .collect())
}

/// Fleet indices picked by k-means++; candidates are scanned in `order`.
fn seed_indices(distances: &DistanceMatrix, order: &[usize], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = order.len();
    let mut chosen = vec![order[rng.random_range(0..n)]];
    let mut nearest: Vec<f64> = order.iter().map(|&i| distances.get(i, chosen[0]).powi(2)).collect();
    while chosen.len() < k {
        let total = exact_sum(nearest.iter().copied());
        let pos = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (p, &w) in nearest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(p);
                if acc > target {
                    break;
                }
            }
            pick.unwrap()
        } else {
            // Every remaining candidate coincides with a chosen one.
            let free: Vec<usize> = (0..n).filter(|&p| !chosen.contains(&order[p])).collect();
            free[rng.random_range(0..free.len())]
        };
        let next = order[pos];
        chosen.push(next);
        for (p, w) in nearest.iter_mut().enumerate() {
            *w = w.min(distances.get(order[p], next).powi(2));
        }
    }
    chosen
}

/// Nearest centroid for each panel; ties go to the lowest centroid index.
pub fn assign(fleet: &Fleet, centroids: &[Centroid], band: BandConstraint) -> Result<Vec<usize>> {
    let series = aligned_values(fleet)?;
    check_centroids(centroids, series[0].len(), band)?;
    Ok(nearest(&series, centroids, band, true)
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}

/// [`assign`] without lower-bound pruning.
pub fn assign_exhaustive(fleet: &Fleet, centroids: &[Centroid], band: BandConstraint) -> Result<Vec<usize>> {
    let series = aligned_values(fleet)?;
    check_centroids(centroids, series[0].len(), band)?;
    Ok(nearest(&series, centroids, band, false)
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}

fn aligned_values(fleet: &Fleet) -> Result<Vec<&[f64]>> {
    fleet.require_aligned()?;
    Ok(fleet.series().iter().map(|s| s.values()).collect())
}

fn check_centroids(centroids: &[Centroid], len: usize, band: BandConstraint) -> Result<()> {
    if centroids.is_empty() {
        return Err(Error::InvalidConfig("no centroids".into()));
    }
    for c in centroids {
        band.check(c.len(), len)?;
    }
    Ok(())
}

/// `(cluster, squared distance)` per series.
fn nearest(series: &[&[f64]], centroids: &[Centroid], band: BandConstraint, prune: bool) -> Vec<(usize, f64)> {
    let envelopes: Option<Vec<Envelope>> = match band.radius() {
        Some(r) if prune && centroids.iter().all(|c| c.len() == series[0].len()) => {
            Some(centroids.iter().map(|c| Envelope::new(c.values(), r)).collect())
        }
        _ => None,
    };
    series
        .par_iter()
        .map(|s| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                if let Some(env) = &envelopes {
                    // Margin keeps rounding in the bound from hiding a true tie or win.
                    if best.1.is_finite() && env[c].lower_bound_cost(s) > best.1 * (1.0 + 1e-9) {
                        continue;
                    }
                }
                let d = accumulated_cost(s, centroid.values(), band);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

/// Index of the centroid nearest to `series`.
pub fn predict(series: &[f64], model: &ClusterModel, band: BandConstraint) -> Result<usize> {
    let len = model.centroids.first().map_or(0, Centroid::len);
    if series.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: series.len(),
        });
    }
    check_centroids(&model.centroids, len, band)?;
    Ok(nearest(&[series], &model.centroids, band, false)[0].0)
}

struct Restart {
    centroids: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
    n_iter: usize,
    converged: bool,
    trace: RestartTrace,
}

/// Runs `n_init` seeded restarts and keeps the one with the lowest inertia.
pub fn fit(fleet: &Fleet, config: &KMeansConfig) -> Result<ClusterModel> {
    fleet.require_aligned()?;
    config.validate(fleet.len())?;
    let series: Vec<&[f64]> = fleet.series().iter().map(|s| s.values()).collect();
    let distances = if fleet.len() > 1 {
        distance_matrix(fleet, config.band)?
    } else {
        DistanceMatrix::from_rows(fleet.panel_ids(), vec![vec![0.0]])?
    };
    let order = fleet.id_order();

    let restarts = (0..config.n_init as u64)
        .into_par_iter()
        .map(|stream| run_restart(&series, &distances, &order, config, stream))
        .collect::<Result<Vec<_>>>()?;

    let best = restarts
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.inertia.total_cmp(&b.inertia))
        .map(|(i, _)| i)
        .unwrap();
    let traces = restarts.iter().map(|r| r.trace.clone()).collect();
    let chosen = restarts.into_iter().nth(best).unwrap();

    Ok(ClusterModel {
        k: config.k,
        seed: config.seed,
        inertia: chosen.inertia,
        n_iter: chosen.n_iter,
        converged: chosen.converged,
        centroids: chosen.centroids.into_iter().map(Centroid).collect(),
        assignments: Assignments(fleet.panel_ids().into_iter().zip(chosen.labels).collect()),
        trace: FitTrace {
            restarts: traces,
            best_restart: best,
        },
    })
}

fn run_restart(
    series: &[&[f64]],
    distances: &DistanceMatrix,
    order: &[usize],
    config: &KMeansConfig,
    stream: u64,
) -> Result<Restart> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let mut centroids: Vec<Vec<f64>> = seed_indices(distances, order, config.k, &mut rng)
        .into_iter()
        .map(|i| series[i].to_vec())
        .collect();
    let dba_config = config.dba();
    let mut trace = RestartTrace {
        seed_stream: stream,
        ..Default::default()
    };
    let mut previous: Option<Vec<usize>> = None;
    let mut n_iter = 0;

    loop {
        let as_centroids: Vec<Centroid> = centroids.iter().cloned().map(Centroid).collect();
        let (mut labels, mut costs): (Vec<usize>, Vec<f64>) =
            nearest(series, &as_centroids, config.band, true).into_iter().unzip();
        repair_empty(&mut labels, &mut costs, &mut centroids, series, order);
        let inertia = exact_sum(costs.iter().copied());
        trace.inertia.push(inertia);

        let converged = previous.as_ref() == Some(&labels);
        if converged || n_iter == config.max_iter {
            return Ok(Restart {
                centroids,
                labels,
                inertia,
                n_iter,
                converged,
                trace,
            });
        }
        n_iter += 1;

        let mut updated_costs = Vec::with_capacity(series.len());
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&[f64]> = order.iter().filter(|&&i| labels[i] == c).map(|&i| series[i]).collect();
            let result = dba_from(centroid, &members, &dba_config)?;
            updated_costs.extend_from_slice(&result.member_costs);
            trace.dba_objectives.push(result.objectives);
            *centroid = result.centroid.0;
        }
        trace.inertia.push(exact_sum(updated_costs));
        previous = Some(labels);
    }
}

/// Gives every empty cluster the panel farthest from its centroid, taken from a
/// cluster that keeps at least one member, and re-centres the empty cluster on it.
fn repair_empty(
    labels: &mut [usize],
    costs: &mut [f64],
    centroids: &mut [Vec<f64>],
    series: &[&[f64]],
    order: &[usize],
) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for &i in order {
            if sizes[labels[i]] > 1 && pick.is_none_or(|p| costs[i] > costs[p]) {
                pick = Some(i);
            }
        }
        // k <= fleet size guarantees a donor exists.
        let p = pick.expect("no panel available to refill an empty cluster");
        sizes[labels[p]] -= 1;
        sizes[empty] = 1;
        labels[p] = empty;
        costs[p] = 0.0;
        centroids[empty] = series[p].to_vec();
    }
}
