//! End-to-end diagnosis: prepare the fleet, cluster it with k = 2, and call the
//! cluster with the higher mean integrated current healthy.
//!
//! The healthy/abnormal call is a heuristic. Faults such as broken glass lower
//! the output current, so the brighter cluster is taken as the healthy one.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtw::{dtw, format_f64};
use crate::error::{Error, Result};
use crate::kmeans::{fit, ClusterModel, KMeansConfig};
use crate::signal::{
    align_to_grid, fill_missing, slice_window, trim_dark, znormalize, Fleet, WindowSpec, DEFAULT_MAX_GAP,
    DEFAULT_PERIOD,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Healthy,
    Abnormal,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Verdict::Healthy => "healthy",
            Verdict::Abnormal => "abnormal",
        })
    }
}

/// Clustering parameters plus the preparation steps applied before clustering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiagnoseConfig {
    pub kmeans: KMeansConfig,
    /// Longest interior gap, in samples, that is interpolated.
    pub max_gap: usize,
    /// Grid period used when the input is not already aligned.
    pub period: i64,
    /// Z-normalize each panel before clustering. Energies are still taken from raw currents.
    pub normalize: bool,
    /// Trim leading and trailing samples where the fleet maximum is below this current.
    pub trim_dark: Option<f64>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            kmeans: KMeansConfig::default(),
            max_gap: DEFAULT_MAX_GAP,
            period: DEFAULT_PERIOD,
            normalize: false,
            trim_dark: None,
        }
    }
}

impl From<KMeansConfig> for DiagnoseConfig {
    fn from(kmeans: KMeansConfig) -> Self {
        Self {
            kmeans,
            ..Default::default()
        }
    }
}

/// Fleet after gap filling, alignment and trimming.
#[derive(Clone, Debug)]
pub struct Prepared {
    /// Currents in amperes, used for energies and plot output.
    pub raw: Fleet,
    /// What the clustering sees; equals `raw` unless normalization is on.
    pub clustered: Fleet,
}

pub fn prepare(fleet: &Fleet, config: &DiagnoseConfig) -> Result<Prepared> {
    let mut raw = if fleet.series().iter().any(|s| !s.is_complete()) {
        Fleet::new(
            fleet
                .series()
                .iter()
                .map(|s| fill_missing(s, config.max_gap))
                .collect::<Result<Vec<_>>>()?,
        )?
    } else {
        fleet.clone()
    };
    if !raw.is_grid_aligned() {
        raw = align_to_grid(&raw, config.period)?;
    }
    if let Some(threshold) = config.trim_dark {
        raw = trim_dark(&raw, threshold)?;
    }
    let clustered = if config.normalize {
        Fleet::new(raw.series().iter().map(znormalize).collect::<Result<Vec<_>>>()?)?
    } else {
        raw.clone()
    };
    Ok(Prepared { raw, clustered })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelVerdict {
    pub panel_id: String,
    pub cluster: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub label: Verdict,
    pub size: usize,
    /// Mean over members of the summed current, in ampere-samples.
    pub mean_integrated_current: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowVotes {
    pub panel_id: String,
    pub healthy: usize,
    pub abnormal: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSettings {
    pub window_len: usize,
    pub stride: usize,
    pub windows: usize,
    /// Offset, in samples, of the window whose model is embedded in the report.
    pub representative_start: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub verdicts: Vec<PanelVerdict>,
    pub clusters: Vec<ClusterStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window_votes: Option<Vec<WindowVotes>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub window: Option<WindowSettings>,
    /// Epoch seconds of the first centroid sample.
    pub model_start_time: i64,
    pub period: i64,
    pub model: ClusterModel,
    pub config: DiagnoseConfig,
    pub notes: Vec<String>,
}

impl DiagnosisReport {
    pub fn verdict_of(&self, panel_id: &str) -> Option<Verdict> {
        self.verdicts.iter().find(|v| v.panel_id == panel_id).map(|v| v.verdict)
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.verdicts.iter().filter(|v| v.verdict == verdict).count()
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let cfg = &self.config.kmeans;
        let _ = writeln!(out, "DTW K-means diagnosis");
        let _ = writeln!(
            out,
            "  seed {}  k {}  band {}  restarts {}  normalize {}",
            cfg.seed, cfg.k, cfg.band, cfg.n_init, self.config.normalize
        );
        let _ = writeln!(
            out,
            "  inertia {:.6}  iterations {}  converged {}",
            self.model.inertia, self.model.n_iter, self.model.converged
        );
        if let Some(w) = &self.window {
            let _ = writeln!(
                out,
                "  windows {} of {} samples, stride {}",
                w.windows, w.window_len, w.stride
            );
        }
        let _ = writeln!(out, "clusters:");
        for c in &self.clusters {
            let _ = writeln!(
                out,
                "  {} {:<8}  size {:>3}  mean integrated current {:.3} A·samples",
                c.cluster, c.label, c.size, c.mean_integrated_current
            );
        }
        let _ = writeln!(
            out,
            "panels: {} healthy, {} abnormal",
            self.count(Verdict::Healthy),
            self.count(Verdict::Abnormal)
        );
        let votes = self.window_votes.as_deref().unwrap_or(&[]);
        for v in &self.verdicts {
            let _ = write!(out, "  {:<12} {:<8} cluster {}", v.panel_id, v.verdict, v.cluster);
            if let Some(w) = votes.iter().find(|w| w.panel_id == v.panel_id) {
                let _ = write!(out, "  votes {}/{}", w.healthy, w.abnormal);
            }
            out.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }

    pub fn write_json(&self, writer: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Labels each cluster of a two-cluster model.
///
/// The cluster with the larger mean integrated current is healthy. Equal means
/// fall back to the larger cluster, then to cluster 0.
pub fn label_clusters(model: &ClusterModel, fleet: &Fleet) -> Result<Vec<Verdict>> {
    if model.k != 2 {
        return Err(Error::LabelingRequiresTwoClusters(model.k));
    }
    let stats = cluster_energy(model, fleet)?;
    let (e0, n0) = stats[0];
    let (e1, n1) = stats[1];
    let healthy = if e0 != e1 {
        if e0 > e1 {
            0
        } else {
            1
        }
    } else if n0 != n1 {
        if n0 > n1 {
            0
        } else {
            1
        }
    } else {
        0
    };
    Ok((0..2)
        .map(|c| {
            if c == healthy {
                Verdict::Healthy
            } else {
                Verdict::Abnormal
            }
        })
        .collect())
}

/// `(mean integrated current, size)` per cluster.
fn cluster_energy(model: &ClusterModel, fleet: &Fleet) -> Result<Vec<(f64, usize)>> {
    let mut sums = vec![0.0; model.k];
    let mut sizes = vec![0usize; model.k];
    for (id, c) in model.assignments.iter() {
        let series = fleet
            .get(id)
            .ok_or_else(|| Error::InvalidFleet(format!("panel {id} is not in the fleet")))?;
        if c >= model.k {
            return Err(Error::InvalidConfig(format!(
                "panel {id} assigned to cluster {c} of {}",
                model.k
            )));
        }
        sums[c] += series.integrated_current();
        sizes[c] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(sizes)
        .map(|(s, n)| (if n > 0 { s / n as f64 } else { 0.0 }, n))
        .collect())
}

/// Clusters a prepared fleet and labels the result.
fn diagnose_prepared(raw: &Fleet, clustered: &Fleet, config: &DiagnoseConfig) -> Result<DiagnosisReport> {
    let model = fit(clustered, &config.kmeans)?;
    let labels = label_clusters(&model, raw)?;
    let energy = cluster_energy(&model, raw)?;

    let verdicts = model
        .assignments
        .iter()
        .map(|(id, c)| PanelVerdict {
            panel_id: id.to_string(),
            cluster: c,
            verdict: labels[c],
        })
        .collect();
    let clusters = energy
        .iter()
        .enumerate()
        .map(|(c, &(mean, size))| ClusterStats {
            cluster: c,
            label: labels[c],
            size,
            mean_integrated_current: mean,
        })
        .collect();

    let mut notes =
        vec!["healthy cluster = higher mean integrated current (automated stand-in for inspection)".to_string()];
    if energy[0].0 == energy[1].0 {
        notes.push("cluster energies are equal; labeled by the size/index tie-break".into());
    }
    let separation = dtw(
        model.centroids[0].values(),
        model.centroids[1].values(),
        config.kmeans.band,
    )?;
    if separation == 0.0 {
        notes.push(
            "centroids coincide: the fleet shows no structure and the abnormal cluster only holds \
             the panel moved there to keep it non-empty"
                .into(),
        );
    }
    if !model.converged {
        notes.push(format!("assignments still changing after {} iterations", model.n_iter));
    }

    let first = &clustered.series()[0];
    Ok(DiagnosisReport {
        verdicts,
        clusters,
        window_votes: None,
        window: None,
        model_start_time: first.start_time(),
        period: first.period(),
        model,
        config: *config,
        notes,
    })
}

/// Full pipeline on one fleet.
pub fn diagnose(fleet: &Fleet, config: &DiagnoseConfig) -> Result<DiagnosisReport> {
    check_two_clusters(config)?;
    let prepared = prepare(fleet, config)?;
    diagnose_prepared(&prepared.raw, &prepared.clustered, config)
}

fn check_two_clusters(config: &DiagnoseConfig) -> Result<()> {
    if config.kmeans.k != 2 {
        return Err(Error::LabelingRequiresTwoClusters(config.kmeans.k));
    }
    Ok(())
}

/// Diagnoses every sliding window and takes a per-panel majority vote.
///
/// A panel is healthy only when strictly more windows call it healthy than
/// abnormal. The embedded model is the one from the window that agrees best with
/// the final verdicts (earliest on ties).
pub fn windowed_diagnose(
    fleet: &Fleet,
    window_len: usize,
    stride: usize,
    config: &DiagnoseConfig,
) -> Result<DiagnosisReport> {
    check_two_clusters(config)?;
    if window_len < 3 {
        return Err(Error::InvalidWindow(format!(
            "window length must be at least 3, got {window_len}"
        )));
    }
    if stride == 0 {
        return Err(Error::InvalidWindow("stride must be at least 1".into()));
    }
    let prepared = prepare(fleet, config)?;
    let len = prepared.raw.series_len()?;
    if len < window_len {
        return Err(Error::InvalidWindow(format!(
            "window of {window_len} samples exceeds series length {len}"
        )));
    }
    let period = prepared.raw.series()[0].period();
    let starts: Vec<usize> = (0..=len - window_len).step_by(stride).collect();

    let reports = starts
        .par_iter()
        .map(|&start| {
            let w = WindowSpec::new(start as i64 * period, window_len);
            let raw = slice_window(&prepared.raw, w)?;
            let clustered = slice_window(&prepared.clustered, w)?;
            diagnose_prepared(&raw, &clustered, config)
        })
        .collect::<Result<Vec<_>>>()?;

    let ids = prepared.raw.panel_ids();
    let votes: Vec<WindowVotes> = ids
        .iter()
        .enumerate()
        .map(|(p, id)| {
            let healthy = reports
                .iter()
                .filter(|r| r.verdicts[p].verdict == Verdict::Healthy)
                .count();
            WindowVotes {
                panel_id: id.clone(),
                healthy,
                abnormal: reports.len() - healthy,
            }
        })
        .collect();
    let majority: Vec<Verdict> = votes
        .iter()
        .map(|v| {
            if v.healthy > v.abnormal {
                Verdict::Healthy
            } else {
                Verdict::Abnormal
            }
        })
        .collect();

    let agreement = |r: &DiagnosisReport| {
        r.verdicts
            .iter()
            .zip(&majority)
            .filter(|(v, m)| v.verdict == **m)
            .count()
    };
    let mut best = 0;
    for (i, r) in reports.iter().enumerate() {
        if agreement(r) > agreement(&reports[best]) {
            best = i;
        }
    }
    let windows = reports.len();
    let mut report = reports.into_iter().nth(best).unwrap();
    for (v, m) in report.verdicts.iter_mut().zip(&majority) {
        v.verdict = *m;
    }
    report.window_votes = Some(votes);
    report.window = Some(WindowSettings {
        window_len,
        stride,
        windows,
        representative_start: starts[best],
    });
    report.notes.push(format!(
        "verdicts are majority votes over {windows} windows (ties count as abnormal); \
         model and cluster statistics come from the window starting at sample {}",
        starts[best]
    ));
    Ok(report)
}

/// Long-format plot data: one row per panel sample, then one row per centroid sample.
///
/// Columns: `timestamp,panel_id,current_a,cluster,verdict`. Centroid rows use the id
/// `centroid-<c>` and carry their cluster's label.
pub fn write_plot_csv(report: &DiagnosisReport, fleet: &Fleet, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "panel_id", "current_a", "cluster", "verdict"])?;
    for v in &report.verdicts {
        let series = fleet
            .get(&v.panel_id)
            .ok_or_else(|| Error::InvalidFleet(format!("panel {} is not in the fleet", v.panel_id)))?;
        for (t, value) in series.observations() {
            w.write_record([
                t.to_string(),
                v.panel_id.clone(),
                format_f64(value),
                v.cluster.to_string(),
                v.verdict.to_string(),
            ])?;
        }
    }
    for (c, centroid) in report.model.centroids.iter().enumerate() {
        let label = report.clusters.get(c).map_or_else(String::new, |s| s.label.to_string());
        for (i, value) in centroid.values().iter().enumerate() {
            w.write_record([
                (report.model_start_time + i as i64 * report.period).to_string(),
                format!("centroid-{c}"),
                format_f64(*value),
                c.to_string(),
                label.clone(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
