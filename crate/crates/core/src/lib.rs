//! Evaluation toolkit for missing-marker reconstruction in optical motion
//! capture.
//!
//! The pipeline runs clean marker data through [`corrupt`] (gap masks and
//! noise), fills the gaps with a [`reconstruct`] method, scores the result
//! with the [`metrics`] suite and relates metric values to human ratings in
//! [`stats`]. [`synth`] generates clean ground truth and [`io`] reads and
//! writes the file formats.

pub mod corrupt;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod reconstruct;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use metrics::NormMode;
pub use model::{
    BodyPart, BoneDef, CurriculumParams, MarkerDef, MarkerSequence, MetricName, MetricReport, MetricRow,
    ObservationMask, PointGrid, Rating, RatingsTable, SkeletonConfig, Vec3,
};
