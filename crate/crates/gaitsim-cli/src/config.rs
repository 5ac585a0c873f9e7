//! TOML pipeline configuration: parsing, validation and conversion to
//! library types. Validation happens before any file is written.

use gaitsim::cycle::CycleParams;
use gaitsim::features::{CropMargins, FeatureKind, Provenance};
use gaitsim::recognition::{Condition, ExperimentSpec};
use gaitsim::synth::{ConfounderConfig, OccluderRect, Projection, RenderSettings, WalkerIdentity};
use serde::Deserialize;
use std::path::Path;

use crate::error::{validation, CliError};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub identities: Vec<IdentitySection>,
    #[serde(default)]
    pub variants: Vec<VariantSection>,
    #[serde(default)]
    pub segmentation: SegmentationSection,
    #[serde(default)]
    pub cycles: CyclesSection,
    #[serde(default)]
    pub features: FeaturesSection,
    pub similarity: Option<SimilaritySection>,
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub viewsweep: ViewsweepSection,
    pub plot: Option<PlotSection>,
}

fn default_fps() -> f64 {
    25.0
}

fn default_duration() -> f64 {
    4.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    #[serde(default = "default_render_px")]
    pub width: usize,
    #[serde(default = "default_render_px")]
    pub height: usize,
    #[serde(default = "default_distance")]
    pub distance: f64,
    #[serde(default = "default_projection")]
    pub projection: String,
    #[serde(default = "default_mm_per_px")]
    pub mm_per_px: f64,
    #[serde(default = "default_focal_px")]
    pub focal_px: f64,
}

fn default_render_px() -> usize {
    64
}

fn default_distance() -> f64 {
    4000.0
}

fn default_projection() -> String {
    "orthographic".to_string()
}

fn default_mm_per_px() -> f64 {
    34.0
}

fn default_focal_px() -> f64 {
    900.0
}

impl Default for RenderSection {
    fn default() -> Self {
        toml::from_str("").expect("empty render section uses defaults")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitySection {
    pub name: String,
    #[serde(default)]
    pub preset: usize,
    pub hip_amplitude: Option<f64>,
    pub knee_amplitude: Option<f64>,
    pub arm_amplitude: Option<f64>,
    pub phase_quirk: Option<f64>,
    pub cadence_bias: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSection {
    pub name: String,
    #[serde(default)]
    pub azimuth: f64,
    #[serde(default)]
    pub elevation: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_bulk")]
    pub clothing_bulk: f64,
    #[serde(default)]
    pub boundary_noise: f64,
    #[serde(default = "default_background")]
    pub background_color: [u8; 3],
    pub occluder: Option<OccluderSection>,
}

fn default_speed() -> f64 {
    5.0
}

fn default_bulk() -> f64 {
    1.0
}

fn default_background() -> [u8; 3] {
    [0, 200, 0]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderSection {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_tolerance")]
    pub tolerance: u8,
    #[serde(default)]
    pub largest_component: bool,
    /// Background image for the LAB path; defaults to each sequence's
    /// own background.png emitted by synth.
    pub background: Option<String>,
}

fn default_method() -> String {
    "chroma".to_string()
}

fn default_tolerance() -> u8 {
    8
}

impl Default for SegmentationSection {
    fn default() -> Self {
        toml::from_str("").expect("empty segmentation section uses defaults")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclesSection {
    #[serde(default = "default_lower_fraction")]
    pub lower_fraction: f64,
    #[serde(default = "default_smooth_window")]
    pub smooth_window: usize,
    /// Minimum peak spacing as a fraction of one second.
    #[serde(default = "default_min_distance_fraction")]
    pub min_distance_fraction: f64,
    #[serde(default = "default_min_prominence_ratio")]
    pub min_prominence_ratio: f64,
}

fn default_lower_fraction() -> f64 {
    0.5
}

fn default_smooth_window() -> usize {
    5
}

fn default_min_distance_fraction() -> f64 {
    0.25
}

fn default_min_prominence_ratio() -> f64 {
    0.02
}

impl Default for CyclesSection {
    fn default() -> Self {
        toml::from_str("").expect("empty cycles section uses defaults")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default = "default_provenance")]
    pub provenance: String,
    /// Crop margins as (top, bottom, left, right) tuples.
    #[serde(default = "default_crops")]
    pub crops: Vec<[usize; 4]>,
}

fn default_kind() -> String {
    "gei".to_string()
}

fn default_provenance() -> String {
    "synthetic".to_string()
}

fn default_crops() -> Vec<[usize; 4]> {
    vec![[2, 2, 2, 2], [4, 4, 2, 2]]
}

impl Default for FeaturesSection {
    fn default() -> Self {
        toml::from_str("").expect("empty features section uses defaults")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    /// Run directories holding masks.csv and cycles.csv.
    pub set_a: String,
    pub set_b: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Feature archive CSVs.
    pub real: String,
    pub synth: String,
    #[serde(default = "default_component_counts")]
    pub component_counts: Vec<usize>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_reg_weight")]
    pub reg_weight: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn default_component_counts() -> Vec<usize> {
    vec![5, 10, 20, 50]
}

fn default_reg_weight() -> f64 {
    0.01
}

fn default_epochs() -> usize {
    400
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewsweepSection {
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    5.0
}

impl Default for ViewsweepSection {
    fn default() -> Self {
        toml::from_str("").expect("empty viewsweep section uses defaults")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSection {
    /// Experiment results CSV for the accuracy-vs-k plot.
    pub results: Option<String>,
    /// Similarity stats CSV for the per-subject box plot.
    pub stats: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| validation(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| validation(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.fps > 0.0) {
            return Err(validation("fps: must be positive"));
        }
        if !(self.duration > 0.0) {
            return Err(validation("duration: must be positive"));
        }
        match self.render.projection.as_str() {
            "orthographic" | "perspective" => {}
            other => {
                return Err(validation(format!(
                    "render.projection: unknown projection {other:?}"
                )))
            }
        }
        for (i, id) in self.identities.iter().enumerate() {
            self.walker_identity(id)
                .validate()
                .map_err(|e| validation(format!("identities[{i}] ({}): {e}", id.name)))?;
        }
        for (i, v) in self.variants.iter().enumerate() {
            self.confounders(v)
                .validate()
                .map_err(|e| validation(format!("variants[{i}] ({}): {e}", v.name)))?;
        }
        match self.segmentation.method.as_str() {
            "chroma" | "lab" => {}
            other => {
                return Err(validation(format!(
                    "segmentation.method: unknown method {other:?}"
                )))
            }
        }
        let c = &self.cycles;
        if !(c.lower_fraction > 0.0 && c.lower_fraction <= 1.0) {
            return Err(validation("cycles.lower_fraction: must be in (0, 1]"));
        }
        if c.smooth_window % 2 == 0 || c.smooth_window == 0 {
            return Err(validation("cycles.smooth_window: must be odd and >= 1"));
        }
        match self.features.kind.as_str() {
            "gei" | "geni" => {}
            other => return Err(validation(format!("features.kind: unknown kind {other:?}"))),
        }
        match self.features.provenance.as_str() {
            "synthetic" | "real-proxy" => {}
            other => {
                return Err(validation(format!(
                    "features.provenance: unknown provenance {other:?}"
                )))
            }
        }
        if let Some(e) = &self.experiment {
            if e.component_counts.is_empty() {
                return Err(validation("experiment.component_counts: must be non-empty"));
            }
            if e.component_counts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(validation(
                    "experiment.component_counts: must be strictly ascending",
                ));
            }
            if !(e.reg_weight > 0.0) {
                return Err(validation("experiment.reg_weight: must be positive"));
            }
            if e.epochs == 0 {
                return Err(validation("experiment.epochs: must be >= 1"));
            }
        }
        if !(self.viewsweep.step > 0.0) {
            return Err(validation("viewsweep.step: must be positive"));
        }
        Ok(())
    }

    pub fn walker_identity(&self, section: &IdentitySection) -> WalkerIdentity {
        let mut identity = WalkerIdentity::preset(section.preset);
        if let Some(v) = section.hip_amplitude {
            identity.hip_amplitude = v;
        }
        if let Some(v) = section.knee_amplitude {
            identity.knee_amplitude = v;
        }
        if let Some(v) = section.arm_amplitude {
            identity.arm_amplitude = v;
        }
        if let Some(v) = section.phase_quirk {
            identity.phase_quirk = v;
        }
        if let Some(v) = section.cadence_bias {
            identity.cadence_bias = v;
        }
        identity
    }

    pub fn confounders(&self, section: &VariantSection) -> ConfounderConfig {
        ConfounderConfig {
            azimuth: section.azimuth,
            elevation: section.elevation,
            clothing_bulk: section.clothing_bulk,
            speed: section.speed,
            boundary_noise: section.boundary_noise,
            occluder: section.occluder.as_ref().map(|o| OccluderRect {
                x: o.x,
                y: o.y,
                width: o.width,
                height: o.height,
            }),
            background_color: section.background_color,
            ..Default::default()
        }
    }

    pub fn render_settings(&self) -> RenderSettings {
        RenderSettings {
            width: self.render.width,
            height: self.render.height,
            distance: self.render.distance,
            projection: match self.render.projection.as_str() {
                "perspective" => Projection::Perspective { focal_px: self.render.focal_px },
                _ => Projection::Orthographic { mm_per_px: self.render.mm_per_px },
            },
        }
    }

    pub fn cycle_params(&self) -> CycleParams {
        CycleParams {
            lower_fraction: self.cycles.lower_fraction,
            smooth_window: self.cycles.smooth_window,
            min_distance: ((self.cycles.min_distance_fraction * self.fps).round() as usize).max(1),
            min_prominence_ratio: self.cycles.min_prominence_ratio,
        }
    }

    pub fn feature_kind(&self) -> FeatureKind {
        match self.features.kind.as_str() {
            "geni" => FeatureKind::Geni,
            _ => FeatureKind::Gei,
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self.features.provenance.as_str() {
            "real-proxy" => Provenance::RealProxy,
            _ => Provenance::Synthetic,
        }
    }

    pub fn crop_margins(&self) -> Vec<CropMargins> {
        self.features
            .crops
            .iter()
            .map(|[top, bottom, left, right]| CropMargins {
                top: *top,
                bottom: *bottom,
                left: *left,
                right: *right,
            })
            .collect()
    }

    pub fn experiment_spec(&self, section: &ExperimentSection) -> ExperimentSpec {
        ExperimentSpec {
            conditions: Condition::ALL.to_vec(),
            component_counts: section.component_counts.clone(),
            split_seed: section.split_seed,
            reg_weight: section.reg_weight,
            epochs: section.epochs,
        }
    }
}
