//! Seeded synthetic fleets with ground-truth labels.
//!
//! A clear day is a half sine between sunrise and sunset. Faults act on that
//! curve before noise is added: broken glass and snail trails scale it, shading
//! attenuates an interval. Snail trails are labeled healthy because at the scales
//! modeled here they do not yet cost measurable output.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::Verdict;
use crate::signal::{Fleet, PanelSeries, DEFAULT_PERIOD};

pub const MINUTES_PER_DAY: usize = 1440;

/// 2021-06-21T00:00:00Z.
pub const DEFAULT_DAY_START: i64 = 1_624_233_600;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudEvent {
    pub start_min: f64,
    pub duration_min: f64,
    /// Fraction of current removed while the cloud passes, in (0, 1).
    pub attenuation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayModel {
    pub sunrise_min: f64,
    pub sunset_min: f64,
    pub peak_current: f64,
    pub noise_sigma: f64,
    pub samples: usize,
    pub cloud_events: Vec<CloudEvent>,
    /// Epoch seconds of minute 0.
    pub day_start: i64,
}

impl Default for DayModel {
    fn default() -> Self {
        Self {
            sunrise_min: 360.0,
            sunset_min: 1200.0,
            peak_current: 8.0,
            noise_sigma: 0.16,
            samples: MINUTES_PER_DAY,
            cloud_events: Vec::new(),
            day_start: DEFAULT_DAY_START,
        }
    }
}

impl DayModel {
    /// Default day with noise set to `fraction` of the peak current.
    pub fn with_noise_fraction(fraction: f64) -> Self {
        let day = Self::default();
        Self {
            noise_sigma: fraction * day.peak_current,
            ..day
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0 <= self.sunrise_min && self.sunrise_min < self.sunset_min && self.sunset_min <= 1440.0) {
            return bad(format!(
                "need 0 <= sunrise < sunset <= 1440, got {} and {}",
                self.sunrise_min, self.sunset_min
            ));
        }
        if !(self.peak_current > 0.0 && self.peak_current.is_finite()) {
            return bad(format!("peak current must be positive, got {}", self.peak_current));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be non-negative, got {}", self.noise_sigma));
        }
        if self.samples == 0 || self.samples > MINUTES_PER_DAY {
            return bad(format!("samples must be in 1..=1440, got {}", self.samples));
        }
        for c in &self.cloud_events {
            if !(c.attenuation > 0.0 && c.attenuation < 1.0) || c.duration_min.is_nan() || c.duration_min < 0.0 {
                return bad(format!("invalid cloud event {c:?}"));
            }
        }
        Ok(())
    }
}

/// Panel condition used by the generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FaultProfile {
    Healthy,
    BrokenGlass { scale: f64 },
    Shading { start_min: f64, end_min: f64, depth: f64 },
    SnailTrail { scale: f64 },
}

impl FaultProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            FaultProfile::Healthy => true,
            FaultProfile::BrokenGlass { scale } => scale > 0.0 && scale < 1.0,
            FaultProfile::Shading {
                start_min,
                end_min,
                depth,
            } => start_min <= end_min && depth > 0.0 && depth < 1.0,
            FaultProfile::SnailTrail { scale } => (0.97..1.0).contains(&scale),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("fault profile out of range: {self:?}")))
        }
    }

    /// Ground-truth label.
    pub fn label(&self) -> Verdict {
        match self {
            FaultProfile::Healthy | FaultProfile::SnailTrail { .. } => Verdict::Healthy,
            _ => Verdict::Abnormal,
        }
    }

    fn apply(&self, minute: f64, current: f64) -> f64 {
        match *self {
            FaultProfile::Healthy => current,
            FaultProfile::BrokenGlass { scale } | FaultProfile::SnailTrail { scale } => current * scale,
            FaultProfile::Shading {
                start_min,
                end_min,
                depth,
            } => {
                if (start_min..end_min).contains(&minute) {
                    current * (1.0 - depth)
                } else {
                    current
                }
            }
        }
    }
}

/// Noise-free current of a healthy panel at `minute`.
pub fn clear_sky_current(minute: f64, day: &DayModel) -> f64 {
    if minute < day.sunrise_min || minute > day.sunset_min {
        return 0.0;
    }
    let phase = PI * (minute - day.sunrise_min) / (day.sunset_min - day.sunrise_min);
    let mut current = (day.peak_current * phase.sin()).max(0.0);
    for c in &day.cloud_events {
        if minute >= c.start_min && minute < c.start_min + c.duration_min {
            current *= 1.0 - c.attenuation;
        }
    }
    current
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelTruth {
    pub panel_id: String,
    pub label: Verdict,
    pub profile: FaultProfile,
}

/// Labels sidecar written next to a synthetic CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub panels: Vec<PanelTruth>,
}

impl GroundTruth {
    pub fn label_of(&self, panel_id: &str) -> Option<Verdict> {
        self.panels.iter().find(|p| p.panel_id == panel_id).map(|p| p.label)
    }

    pub fn labels(&self) -> Vec<Verdict> {
        self.panels.iter().map(|p| p.label).collect()
    }
}

/// Panel ids `P01`, `P02`, ... padded to the width of `n`.
pub fn panel_id(index: usize, n: usize) -> String {
    let width = n.to_string().len().max(2);
    format!("P{:0width$}", index + 1)
}

/// `n - faulty` healthy panels followed by `faulty` broken-glass panels.
pub fn broken_glass_profiles(n: usize, faulty: usize, scale: f64) -> Vec<FaultProfile> {
    (0..n)
        .map(|i| {
            if i >= n.saturating_sub(faulty) {
                FaultProfile::BrokenGlass { scale }
            } else {
                FaultProfile::Healthy
            }
        })
        .collect()
}

/// Generates one day of one-minute samples per panel.
///
/// Noise is Gaussian with `day.noise_sigma`, drawn from an independent stream per
/// panel, and the result is clamped at zero.
pub fn generate_fleet(
    n_panels: usize,
    profiles: &[FaultProfile],
    day: &DayModel,
    seed: u64,
) -> Result<(Fleet, GroundTruth)> {
    if profiles.len() != n_panels {
        return Err(Error::InvalidConfig(format!(
            "{} fault profiles for {n_panels} panels",
            profiles.len()
        )));
    }
    if n_panels == 0 {
        return Err(Error::InvalidConfig("need at least one panel".into()));
    }
    day.validate()?;
    for p in profiles {
        p.validate()?;
    }
    let noise = Normal::new(0.0, day.noise_sigma).map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
    let base: Vec<f64> = (0..day.samples).map(|m| clear_sky_current(m as f64, day)).collect();

    let mut series = Vec::with_capacity(n_panels);
    let mut truth = Vec::with_capacity(n_panels);
    for (i, profile) in profiles.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let values = base
            .iter()
            .enumerate()
            .map(|(m, &clear)| {
                let v = profile.apply(m as f64, clear);
                let v = if day.noise_sigma > 0.0 {
                    v + noise.sample(&mut rng)
                } else {
                    v
                };
                v.max(0.0)
            })
            .collect();
        let id = panel_id(i, n_panels);
        series.push(PanelSeries::new(id.clone(), day.day_start, DEFAULT_PERIOD, values)?);
        truth.push(PanelTruth {
            panel_id: id,
            label: profile.label(),
            profile: *profile,
        });
    }
    Ok((Fleet::new(series)?, GroundTruth { seed, panels: truth }))
}
