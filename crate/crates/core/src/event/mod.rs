//! Toy gamma-ray telescope: event generation, track fitting, the fillers
//! that turn events into representables, and the drivable session.

pub mod detector;
pub mod fillers;
pub mod fit;
pub mod generate;
pub mod session;

pub use detector::{BoxVolume, DetectorModel, VolumeKind};
pub use fillers::{standard_fillers, standard_registry};
pub use fit::{fit_track, FitError, TrackFit};
pub use generate::{
    generate_event, generate_event_with, AcdHit, CalDeposit, Event, GeneratorConfig, McTrack, TrackHit,
};
pub use session::{ActionDescriptor, ActionInvocation, AlgorithmReport, ArgSpec, Session, SessionConfig, SessionError};

/// What fillers read from: the detector description and the current event.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientStore {
    pub detector: DetectorModel,
    pub event: Event,
}
