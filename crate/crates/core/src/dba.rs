//! DTW barycenter averaging.
//!
//! Each iteration aligns every member to the current centroid and replaces each
//! centroid sample by the mean of the member samples aligned to it. An update that
//! that does not strictly lower the objective is rejected and iteration stops, so
//! the objective trace is decreasing. Objectives are correctly rounded sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtw::{accumulated_cost, dtw_path_cost, BandConstraint, DistanceMatrix, WarpingPath};
use crate::error::{Error, Result};
use crate::numeric::exact_sum;

pub const DEFAULT_MAX_ITER: usize = 30;
pub const DEFAULT_TOL: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbaConfig {
    pub band: BandConstraint,
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
}

impl Default for DbaConfig {
    fn default() -> Self {
        Self {
            band: BandConstraint::Unconstrained,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

/// A cluster representative with the members' common length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Centroid(pub Vec<f64>);

impl Centroid {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct DbaResult {
    pub centroid: Centroid,
    /// Objective of the starting centroid followed by one entry per accepted update.
    pub objectives: Vec<f64>,
    /// Number of accepted updates.
    pub iterations: usize,
    /// Squared DTW distance from the returned centroid to each member.
    pub member_costs: Vec<f64>,
}

impl DbaResult {
    pub fn objective(&self) -> f64 {
        *self.objectives.last().unwrap()
    }
}

/// Index of the member with the smallest sum of squared distances to the others.
/// Ties go to the lowest index.
pub fn medoid(distances: &DistanceMatrix) -> Result<usize> {
    let n = distances.n();
    if n == 0 {
        return Err(Error::EmptyMembers);
    }
    let mut best = (0, f64::INFINITY);
    for i in 0..n {
        let total: f64 = distances.row(i).iter().map(|d| d * d).sum();
        if total < best.1 {
            best = (i, total);
        }
    }
    Ok(best.0)
}

/// Sum over members of the squared DTW distance to `centroid`.
pub fn frechet_objective(centroid: &[f64], members: &[&[f64]], band: BandConstraint) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyMembers);
    }
    let costs = members
        .par_iter()
        .map(|m| {
            band.check(centroid.len(), m.len())
                .map(|_| accumulated_cost(centroid, m, band))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(exact_sum(costs))
}

/// DBA started from the members' medoid.
pub fn dba(members: &[&[f64]], config: &DbaConfig) -> Result<DbaResult> {
    check_members(members)?;
    let ids = (0..members.len()).map(|i| i.to_string()).collect();
    let distances = DistanceMatrix::from_series(ids, members, config.band)?;
    let start = medoid(&distances)?;
    dba_from(members[start], members, config)
}

/// DBA started from a given centroid, e.g. the previous K-means centroid.
pub fn dba_from(init: &[f64], members: &[&[f64]], config: &DbaConfig) -> Result<DbaResult> {
    let len = check_members(members)?;
    if init.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: init.len(),
        });
    }
    if config.max_iter == 0 || config.tol.is_nan() || config.tol <= 0.0 {
        return Err(Error::InvalidConfig("DBA needs max_iter >= 1 and tol > 0".into()));
    }

    let mut centroid = init.to_vec();
    let (mut paths, mut costs) = align(&centroid, members, config.band)?;
    let mut objective = exact_sum(costs.iter().copied());
    let mut objectives = vec![objective];
    let mut iterations = 0;

    while iterations < config.max_iter && objective > 0.0 {
        let proposal = average(len, &paths, members);
        let (next_paths, next_costs) = align(&proposal, members, config.band)?;
        let next_objective = exact_sum(next_costs.iter().copied());
        if next_objective >= objective {
            break;
        }
        let decrease = (objective - next_objective) / objective;
        centroid = proposal;
        paths = next_paths;
        costs = next_costs;
        objective = next_objective;
        objectives.push(objective);
        iterations += 1;
        if decrease < config.tol {
            break;
        }
    }

    Ok(DbaResult {
        centroid: Centroid(centroid),
        objectives,
        iterations,
        member_costs: costs,
    })
}

fn check_members(members: &[&[f64]]) -> Result<usize> {
    let first = members.first().ok_or(Error::EmptyMembers)?;
    if first.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(m) = members.iter().find(|m| m.len() != first.len()) {
        return Err(Error::LengthMismatch {
            expected: first.len(),
            actual: m.len(),
        });
    }
    Ok(first.len())
}

/// Warping paths from `centroid` to every member with their squared distances.
fn align(centroid: &[f64], members: &[&[f64]], band: BandConstraint) -> Result<(Vec<WarpingPath>, Vec<f64>)> {
    let results = members
        .par_iter()
        .map(|m| dtw_path_cost(centroid, m, band))
        .collect::<Result<Vec<_>>>()?;
    Ok(results.into_iter().map(|(c, p)| (p, c)).unzip())
}

/// Mean of the member samples aligned to each centroid index.
fn average(len: usize, paths: &[WarpingPath], members: &[&[f64]]) -> Vec<f64> {
    let mut sums = vec![0.0; len];
    let mut counts = vec![0usize; len];
    for (path, member) in paths.iter().zip(members) {
        for &(i, j) in path.pairs() {
            sums[i] += member[j];
            counts[i] += 1;
        }
    }
    sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
}
