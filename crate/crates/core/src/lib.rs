//! Anatomical-prior channel encoding, CTV segmentation metrics and
//! sex-stratified fairness statistics for volumetric CT masks.
//!
//! Modules, bottom-up:
//! - [`nifti`]: NIfTI-1 volumes and label maps
//! - [`cohort`]: patient manifests and sex stratification
//! - [`encoding`]: the five prior-encoding strategies
//! - [`edt`], [`metrics`]: exact distance transform, DSC and (percentile) HD
//! - [`regions`]: HN / THX / ABDM / PELV partition from landmarks
//! - [`fairness`]: AGD, MGD and QD per region
//! - [`phantom`]: deterministic synthetic cohorts

pub mod cohort;
pub mod edt;
pub mod encoding;
pub mod error;
pub mod fairness;
pub mod metrics;
pub mod nifti;
pub mod phantom;
pub mod regions;
pub mod stats;

pub use cohort::{load_manifest, stratify, CohortManifest, PatientRecord, Sex, SuperiorAxis};
pub use encoding::{EncodingStrategy, StrategyKind};
pub use error::{Error, Result};
pub use fairness::{summarize, EvalRegion, FairnessSummary, ScoreSample};
pub use metrics::{dice, evaluate_pair, hausdorff, MetricResult};
pub use nifti::{check_aligned, read_labelmap, read_volume, write_volume, Datatype, Grid, LabelMap, NiftiHeader, Volume3D};
pub use phantom::{generate_cohort, PhantomSpec};
pub use regions::{compute_bounds, crop_to_region, Region, RegionBounds};
