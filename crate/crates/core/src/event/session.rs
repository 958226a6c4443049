use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::builder::{memory_builder, BuildError, BuildReport, Builder, FillerRegistry, FinishBuilder};
use crate::model::{
    instance_at, names_eq, AttPayload, AttValueKind, HepRepDocument, InstancePath, InstanceTree, ModelError, TypeTree,
};
use crate::query::{get_instance_tree_top, get_instances_mapped, InstanceRequest, InstanceTreeTop, QueryError};

use super::detector::DetectorModel;
use super::fillers::{standard_registry, REMOVE_HIT_AND_REFIT, TRACK};
use super::fit::{fit_track, FitError};
use super::generate::{generate_event_with, Event, GeneratorConfig};
use super::TransientStore;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no current event")]
    NoEvent,
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Path(#[from] ModelError),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("bad target: {0}")]
    BadTarget(String),
    #[error("bad action argument: {0}")]
    ActionArg(String),
    #[error("action precondition failed: {0}")]
    ActionPrecondition(String),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub detector: DetectorModel,
}

impl SessionConfig {
    pub fn with_seed(seed: u64) -> Self {
        SessionConfig {
            seed,
            generator: GeneratorConfig::default(),
            detector: DetectorModel::default(),
        }
    }
}

/// A pick action to run on the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionInvocation {
    pub action_name: String,
    /// Path in the unfiltered instance tree, as reported by `origPath`.
    pub target_path: InstancePath,
    pub args: BTreeMap<String, AttPayload>,
}

impl ActionInvocation {
    pub fn new(action_name: impl Into<String>, target_path: InstancePath) -> Self {
        ActionInvocation {
            action_name: action_name.into(),
            target_path,
            args: BTreeMap::new(),
        }
    }

    pub fn arg(mut self, name: impl Into<String>, value: AttPayload) -> Self {
        self.args.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArgSpec {
    pub name: String,
    pub kind: AttValueKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionDescriptor {
    pub name: String,
    pub description: String,
    pub args: Vec<ArgSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmReport {
    pub name: String,
    pub status: String,
    pub summary: String,
}

pub const ALGORITHMS: [&str; 2] = ["refitAll", "summarize"];

/// The drivable event loop: one current event, the filler registry, and a
/// cached full document for it.
pub struct Session {
    config: SessionConfig,
    registry: FillerRegistry<TransientStore>,
    event_id: u64,
    store: Option<TransientStore>,
    full: OnceLock<Arc<HepRepDocument>>,
}

impl Session {
    /// A session with the standard fillers and no event loaded yet.
    pub fn new(config: SessionConfig) -> Self {
        Self::with_registry(config, standard_registry())
    }

    pub fn with_registry(config: SessionConfig, registry: FillerRegistry<TransientStore>) -> Self {
        Session {
            config,
            registry,
            event_id: 0,
            store: None,
            full: OnceLock::new(),
        }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn event_id(&self) -> u64 {
        self.event_id
    }

    pub fn event(&self) -> Option<&Event> {
        self.store.as_ref().map(|s| &s.event)
    }

    pub fn registry(&self) -> &FillerRegistry<TransientStore> {
        &self.registry
    }

    fn store(&self) -> Result<&TransientStore, SessionError> {
        self.store.as_ref().ok_or(SessionError::NoEvent)
    }

    fn set_event(&mut self, event: Event) {
        self.store = Some(TransientStore {
            detector: self.config.detector.clone(),
            event,
        });
        self.full = OnceLock::new();
    }

    /// Advances the loop and generates the next event.
    pub fn next_event(&mut self) -> u64 {
        self.event_id += 1;
        let ev = generate_event_with(
            &self.config.detector,
            &self.config.generator,
            self.config.seed,
            self.event_id,
        );
        self.set_event(ev);
        self.event_id
    }

    /// Builds a document for the current event with the fillers `request`
    /// needs.
    pub fn build(&self, request: &InstanceRequest) -> Result<(HepRepDocument, BuildReport), SessionError> {
        let mut b = memory_builder();
        let report = self.build_into(request, &mut b)?;
        let doc = b.finish().map_err(BuildError::from)?;
        Ok((doc, report))
    }

    /// Drives any back end for the current event. The caller finishes it.
    pub fn build_into(
        &self,
        request: &InstanceRequest,
        builder: &mut dyn Builder,
    ) -> Result<BuildReport, SessionError> {
        Ok(self.registry.build_event(self.store()?, request, builder)?)
    }

    /// The complete document of the current event, built once per event
    /// state.
    pub fn document(&self) -> Result<Arc<HepRepDocument>, SessionError> {
        if let Some(d) = self.full.get() {
            return Ok(d.clone());
        }
        let (doc, _) = self.build(&InstanceRequest::all())?;
        Ok(self.full.get_or_init(|| Arc::new(doc)).clone())
    }

    pub fn type_tree(&self) -> Result<TypeTree, SessionError> {
        Ok(self.document()?.type_tree.clone())
    }

    pub fn instance_tree_top(&self) -> Result<InstanceTreeTop, SessionError> {
        Ok(get_instance_tree_top(&*self.document()?))
    }

    /// Filtered instances; only the fillers the request selects run.
    pub fn instances(&self, request: &InstanceRequest) -> Result<InstanceTree, SessionError> {
        request.validate()?;
        let (doc, report) = self.build(request)?;
        Ok(get_instances_mapped(&doc, request, &report.root_origin)?)
    }

    pub fn instances_after_action(
        &mut self,
        action: &ActionInvocation,
        request: &InstanceRequest,
    ) -> Result<InstanceTree, SessionError> {
        request.validate()?;
        self.apply_action(action)?;
        self.instances(request)
    }

    pub fn list_actions(&self) -> Vec<ActionDescriptor> {
        vec![ActionDescriptor {
            name: REMOVE_HIT_AND_REFIT.into(),
            description: "Remove one hit from a Track and refit it".into(),
            args: vec![ArgSpec {
                name: "hitIndex".into(),
                kind: AttValueKind::Integer,
            }],
        }]
    }

    pub fn list_algorithms(&self) -> Vec<String> {
        ALGORITHMS.iter().map(|s| s.to_string()).collect()
    }

    /// Runs a pick action. Everything is checked before the event changes;
    /// on error the event is untouched.
    pub fn apply_action(&mut self, action: &ActionInvocation) -> Result<(), SessionError> {
        if !names_eq(&action.action_name, REMOVE_HIT_AND_REFIT) {
            return Err(SessionError::UnknownAction(action.action_name.clone()));
        }
        let doc = self.document()?;
        let target = instance_at(&doc, &action.target_path)?;
        if !names_eq(&target.type_full_name, TRACK) {
            return Err(SessionError::BadTarget(format!(
                "{} is a {}, not a Track",
                action.target_path, target.type_full_name
            )));
        }
        let track = target
            .att_values
            .iter()
            .find(|v| names_eq(&v.name, "TrackId"))
            .and_then(|v| match v.value {
                AttPayload::Integer(i) => usize::try_from(i).ok(),
                _ => None,
            })
            .ok_or_else(|| SessionError::BadTarget(format!("{} has no TrackId", action.target_path)))?;

        let mut hit_index = None;
        for (name, value) in &action.args {
            if !names_eq(name, "hitIndex") {
                return Err(SessionError::ActionArg(format!("unknown argument `{name}`")));
            }
            match value {
                AttPayload::Integer(i) => hit_index = Some(*i),
                other => {
                    return Err(SessionError::ActionArg(format!(
                        "hitIndex must be an int, got {}",
                        other.kind().token()
                    )))
                }
            }
        }
        let hit_index = hit_index.ok_or_else(|| SessionError::ActionArg("missing hitIndex".into()))?;

        let event = &self.store()?.event;
        let t = event
            .tracks
            .get(track)
            .ok_or_else(|| SessionError::BadTarget(format!("no track {track}")))?;
        let n = t.hits.len();
        let idx = usize::try_from(hit_index)
            .ok()
            .filter(|&i| i < n)
            .ok_or_else(|| SessionError::ActionArg(format!("hitIndex {hit_index} out of range 0..{n}")))?;
        if n <= 2 {
            return Err(SessionError::ActionPrecondition(format!(
                "track {track} has {n} hits; a fit needs at least 2"
            )));
        }
        let mut hits = t.hits.clone();
        hits.remove(idx);
        let fit = fit_track(&hits)?;

        let mut ev = event.clone();
        ev.tracks[track].hits = hits;
        ev.tracks[track].fit = fit;
        self.set_event(ev);
        Ok(())
    }

    pub fn run_algorithm(&mut self, name: &str) -> Result<AlgorithmReport, SessionError> {
        let canonical = ALGORITHMS
            .iter()
            .find(|a| names_eq(a, name))
            .ok_or_else(|| SessionError::UnknownAlgorithm(name.to_string()))?;
        let event = &self.store()?.event;
        let summary = match *canonical {
            "refitAll" => {
                let mut ev = event.clone();
                for t in &mut ev.tracks {
                    t.fit = fit_track(&t.hits)?;
                }
                let n = ev.tracks.len();
                self.set_event(ev);
                format!("refitted {n} track(s)")
            }
            _ => {
                let cal: f64 = event.cal_deposits.iter().map(|d| d.energy).fold(0.0, |a, b| a + b);
                let acd: f64 = event.acd_hits.iter().map(|h| h.energy).fold(0.0, |a, b| a + b);
                let trk: f64 = event.tracks.iter().map(|t| t.energy).fold(0.0, |a, b| a + b);
                format!(
                    "eventId={} nTracks={} nCalDeposits={} nAcdHits={} trackEnergy={} calEnergy={} acdEnergy={} sumEnergy={} gammaEnergy={}",
                    event.event_id,
                    event.tracks.len(),
                    event.cal_deposits.len(),
                    event.acd_hits.len(),
                    trk,
                    cal,
                    acd,
                    trk + cal + acd,
                    event.gamma_energy
                )
            }
        };
        Ok(AlgorithmReport {
            name: canonical.to_string(),
            status: "ok".into(),
            summary,
        })
    }
}
