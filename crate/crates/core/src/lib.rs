//! Post-processing for single-object trackers.
//!
//! Each frame the backbone tracker's proposals are turned into a candidate
//! set, every candidate is tracked backwards in time, and the resulting
//! tracklets are matched against the target's own history and the tracklets
//! of nearby look-alikes ("neighbors"). The candidate whose backward tracklet
//! is assigned to the target history becomes the frame's result.

pub mod engine;
pub mod error;
pub mod geometry;
pub mod matching;
pub mod motion;
pub mod pools;
pub mod port;
pub mod select;

pub use engine::{is_stable, SequenceRun, Fallback, run_baseline, run_sequence, Engine, EngineConfig, EngineState, FrameRecord, Gate};
pub use error::{Error, Result};
pub use geometry::{iou, tracklet_avg_iou, BBox, Tracklet};
pub use matching::{hungarian_max, Assignment, WeightMatrix};
pub use motion::{MotionConfig, MotionState};
pub use pools::{CandidatePool, NeighborPool};
pub use port::{RawCandidates, Template, TrackerPort};
pub use select::CandidateSet;
