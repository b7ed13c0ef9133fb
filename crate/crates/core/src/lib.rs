//! Unsupervised fault detection for photovoltaic panel fleets.
//!
//! Each panel contributes one current signal sampled once a minute. The signals
//! are compared pairwise with dynamic time warping, grouped by K-means with DTW
//! barycenter averaging as the centroid update, and the two resulting clusters
//! are labeled healthy and abnormal.
//!
//! ```
//! use pvdtw::{diagnose, generate_fleet, broken_glass_profiles, DayModel, DiagnoseConfig, Verdict};
//!
//! let profiles = broken_glass_profiles(12, 4, 0.75);
//! let (fleet, truth) = generate_fleet(12, &profiles, &DayModel::default(), 7)?;
//! let report = diagnose(&fleet, &DiagnoseConfig::default())?;
//! for panel in &report.verdicts {
//!     assert_eq!(Some(panel.verdict), truth.label_of(&panel.panel_id));
//! }
//! assert_eq!(report.count(Verdict::Abnormal), 4);
//! # Ok::<(), pvdtw::Error>(())
//! ```
//!
//! The guide in `book/` walks through each stage.

pub mod dba;
pub mod dtw;
mod error;
pub mod ingest;
pub mod kmeans;
pub mod numeric;
pub mod pipeline;
pub mod signal;
pub mod synth;

pub use dba::{dba, dba_from, frechet_objective, medoid, Centroid, DbaConfig, DbaResult};
pub use dtw::{
    distance_matrix, dtw, dtw_path, euclidean, lb_keogh, BandConstraint, DistanceMatrix, Envelope, WarpingPath,
};
pub use error::{Error, Result};
pub use ingest::{ingest_csv, read_csv, write_csv};
pub use kmeans::{assign, assign_exhaustive, fit, init_centroids, predict, ClusterModel, KMeansConfig};
pub use pipeline::{
    diagnose, label_clusters, prepare, windowed_diagnose, write_plot_csv, DiagnoseConfig, DiagnosisReport, Verdict,
};
pub use signal::{align_to_grid, fill_missing, slice_window, znormalize, Fleet, PanelSeries, WindowSpec};
pub use synth::{broken_glass_profiles, clear_sky_current, generate_fleet, DayModel, FaultProfile, GroundTruth};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/signals.md")]
    mod signals {}
    #[doc = include_str!("../../../book/src/dtw.md")]
    mod dtw {}
    #[doc = include_str!("../../../book/src/lower-bounds.md")]
    mod lower_bounds {}
    #[doc = include_str!("../../../book/src/dba.md")]
    mod dba {}
    #[doc = include_str!("../../../book/src/kmeans.md")]
    mod kmeans {}
    #[doc = include_str!("../../../book/src/diagnosis.md")]
    mod diagnosis {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
