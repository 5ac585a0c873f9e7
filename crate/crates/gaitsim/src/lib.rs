//! gaitsim: subject-specific synthetic gait sequences and identity analysis.
//!
//! The pipeline runs from motion data to recognition results:
//!
//! * [`mocap`] — BVH / joint-stream parsing, resampling, retargeting and
//!   forward kinematics over a quaternion skeleton.
//! * [`synth`] — procedural walking kinematics for a capsule avatar and a
//!   software rasterizer producing binary or shaded frames under
//!   controllable confounders (viewpoint, clothing bulk, speed, noise,
//!   occlusion).
//! * [`segment`] — silhouette extraction: LAB background subtraction with
//!   two-class intensity clustering, or chroma keying for synthetic frames.
//! * [`cycle`] — gait-cycle segmentation from the lower-body pixel-count
//!   signal using the every-second-peak rule.
//! * [`features`] — 50x30 GEI / GEnI feature images with flip/crop
//!   augmentation.
//! * [`similarity`] — Jaccard-index agreement between silhouettes with
//!   centroid alignment and per-subject distribution statistics.
//! * [`recognition`] — PCA, eigen-image export, linear one-vs-rest SVM and
//!   the six-condition cross-mode experiment protocol.
//!
//! Everything is deterministic: identical inputs (including seeds) give
//! bit-identical outputs regardless of thread count.

pub mod cycle;
pub mod features;
pub mod mocap;
pub mod raster;
pub mod recognition;
pub mod rng;
pub mod segment;
pub mod similarity;
pub mod synth;
