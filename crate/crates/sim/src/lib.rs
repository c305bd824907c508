//! Deterministic synthetic tracking world.
//!
//! A [`Scene`] scripts object paths, appearances and occlusions; a [`World`]
//! precomputes what a sensor sees each frame and acts as a mock appearance
//! tracker for the engine.

pub mod appearance;
pub mod error;
pub mod mot;
mod rng;
pub mod scenario;
pub mod scene;
pub mod world;

pub use error::{SimError, SimResult};
pub use mot::{load_mot, parse_mot, write_mot};
pub use scenario::{generate_scene, ScenarioConfig, ScenarioKind};
pub use scene::{DriftSpike, ObjectId, ObjectSpec, Occluder, Occlusion, Scene, SensorModel, Trajectory};
pub use world::{FrameObs, ObjectObs, World};
