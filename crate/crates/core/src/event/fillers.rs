use crate::builder::{Builder, BuilderError, Filler, FillerRegistry};
use crate::model::{AttDef, AttValue, AttValueKind, AttributeCategory, Color};
use crate::query::{orig_path_def, InstanceRequest};

use super::detector::BoxVolume;
use super::TransientStore;

pub const GEOMETRY: &str = "Geometry";
pub const TRACK: &str = "Track";
pub const TRACK_HIT: &str = "Track/TrackHit";
pub const CAL_CRYSTAL: &str = "CalCrystal";
pub const ACD_TILE: &str = "AcdTile";
pub const REMOVE_HIT_AND_REFIT: &str = "removeHitAndRefit";

use AttValueKind::{Integer, Real, Text};
use AttributeCategory::{Physics, PickAction};

fn physics(name: &str, desc: &str, kind: AttValueKind, units: &str) -> AttDef {
    AttDef::new(name, desc, Physics, kind, units)
}

fn points(b: &mut dyn Builder, pts: &[[f64; 3]]) -> Result<(), BuilderError> {
    pts.iter().try_for_each(|p| b.point(p[0], p[1], p[2]))
}

fn prism(b: &mut dyn Builder, v: &BoxVolume) -> Result<(), BuilderError> {
    points(b, &v.corners())
}

/// Every detector volume as an outline prism.
pub struct GeometryFiller;

impl Filler<TransientStore> for GeometryFiller {
    fn name(&self) -> &str {
        "GeometryFiller"
    }

    fn type_names(&self) -> Vec<String> {
        vec![GEOMETRY.into()]
    }

    fn fill_types(&self, b: &mut dyn Builder) -> Result<(), BuilderError> {
        b.open_type(GEOMETRY)?;
        b.att_def(&orig_path_def())?;
        b.att_def(&physics("Volume", "Detector volume name", Text, ""))?;
        b.type_att_value(&AttValue::text("DrawAs", "Prism"))?;
        b.type_att_value(&AttValue::color("Color", Color { r: 0.6, g: 0.6, b: 0.6 }))?;
        b.type_att_value(&AttValue::real("LineWidth", 1.0))?;
        b.type_att_value(&AttValue::boolean("Visibility", true))?;
        b.close_type()
    }

    fn fill_instances(
        &self,
        b: &mut dyn Builder,
        store: &TransientStore,
        _request: &InstanceRequest,
    ) -> Result<(), BuilderError> {
        for (kind, id, vol) in store.detector.volumes() {
            b.open_instance(GEOMETRY)?;
            b.instance_att_value(&AttValue::text("Volume", format!("{} {id}", kind.label())))?;
            prism(b, &vol)?;
            b.close_instance()?;
        }
        Ok(())
    }

    fn root_instance_count(&self, store: &TransientStore) -> usize {
        store.detector.volumes().len()
    }
}

/// Fitted tracks as polylines through their hits, with one TrackHit child
/// per hit.
pub struct TrackFiller;

impl Filler<TransientStore> for TrackFiller {
    fn name(&self) -> &str {
        "TrackFiller"
    }

    fn type_names(&self) -> Vec<String> {
        vec![TRACK.into()]
    }

    fn fill_types(&self, b: &mut dyn Builder) -> Result<(), BuilderError> {
        b.open_type(TRACK)?;
        b.att_def(&orig_path_def())?;
        b.att_def(&physics("Momentum", "Track momentum", Real, "MeV"))?;
        b.att_def(&physics("ParticleID", "Particle species", Text, ""))?;
        b.att_def(&physics("Chi2", "Sum of squared fit residuals", Real, "mm2"))?;
        b.att_def(&physics("TrackId", "Index of the track in the event", Integer, ""))?;
        b.att_def(&physics("NHits", "Number of hits on the track", Integer, ""))?;
        b.att_def(&AttDef::new(
            REMOVE_HIT_AND_REFIT,
            "Remove one hit from the track and refit it",
            PickAction,
            Text,
            "",
        ))?;
        b.type_att_value(&AttValue::text("DrawAs", "Line"))?;
        b.type_att_value(&AttValue::color("Color", Color { r: 1.0, g: 0.2, b: 0.2 }))?;
        b.type_att_value(&AttValue::real("LineWidth", 2.0))?;
        b.type_att_value(&AttValue::text(REMOVE_HIT_AND_REFIT, "hitIndex:int"))?;

        b.open_type("TrackHit")?;
        b.att_def(&physics("HitIndex", "Position of the hit along the track", Integer, ""))?;
        b.type_att_value(&AttValue::text("DrawAs", "Point"))?;
        b.type_att_value(&AttValue::real("MarkerSize", 4.0))?;
        b.type_att_value(&AttValue::color("Color", Color { r: 1.0, g: 1.0, b: 0.0 }))?;
        b.close_type()?;
        b.close_type()
    }

    fn fill_instances(
        &self,
        b: &mut dyn Builder,
        store: &TransientStore,
        _request: &InstanceRequest,
    ) -> Result<(), BuilderError> {
        for (i, t) in store.event.tracks.iter().enumerate() {
            b.open_instance(TRACK)?;
            b.instance_att_value(&AttValue::real("Momentum", t.energy))?;
            b.instance_att_value(&AttValue::text("ParticleID", t.particle_id.clone()))?;
            b.instance_att_value(&AttValue::real("Chi2", t.fit.chi2))?;
            b.instance_att_value(&AttValue::int("TrackId", i as i64))?;
            b.instance_att_value(&AttValue::int("NHits", t.hits.len() as i64))?;
            for h in &t.hits {
                b.point(h.x, h.y, h.z)?;
            }
            for (k, h) in t.hits.iter().enumerate() {
                b.open_instance(TRACK_HIT)?;
                b.instance_att_value(&AttValue::int("HitIndex", k as i64))?;
                b.point(h.x, h.y, h.z)?;
                b.close_instance()?;
            }
            b.close_instance()?;
        }
        Ok(())
    }

    fn root_instance_count(&self, store: &TransientStore) -> usize {
        store.event.tracks.len()
    }
}

pub struct CalFiller;

impl Filler<TransientStore> for CalFiller {
    fn name(&self) -> &str {
        "CalFiller"
    }

    fn type_names(&self) -> Vec<String> {
        vec![CAL_CRYSTAL.into()]
    }

    fn fill_types(&self, b: &mut dyn Builder) -> Result<(), BuilderError> {
        b.open_type(CAL_CRYSTAL)?;
        b.att_def(&orig_path_def())?;
        b.att_def(&physics("Energy", "Deposited energy", Real, "MeV"))?;
        b.att_def(&physics("CrystalId", "Crystal number", Integer, ""))?;
        b.type_att_value(&AttValue::text("DrawAs", "Prism"))?;
        b.type_att_value(&AttValue::color("Color", Color { r: 0.2, g: 0.6, b: 1.0 }))?;
        b.close_type()
    }

    fn fill_instances(
        &self,
        b: &mut dyn Builder,
        store: &TransientStore,
        _request: &InstanceRequest,
    ) -> Result<(), BuilderError> {
        for d in &store.event.cal_deposits {
            b.open_instance(CAL_CRYSTAL)?;
            b.instance_att_value(&AttValue::real("Energy", d.energy))?;
            b.instance_att_value(&AttValue::int("CrystalId", d.crystal_id as i64))?;
            prism(b, &store.detector.crystal_volume(d.crystal_id))?;
            b.close_instance()?;
        }
        Ok(())
    }

    fn root_instance_count(&self, store: &TransientStore) -> usize {
        store.event.cal_deposits.len()
    }
}

pub struct AcdFiller;

impl Filler<TransientStore> for AcdFiller {
    fn name(&self) -> &str {
        "AcdFiller"
    }

    fn type_names(&self) -> Vec<String> {
        vec![ACD_TILE.into()]
    }

    fn fill_types(&self, b: &mut dyn Builder) -> Result<(), BuilderError> {
        b.open_type(ACD_TILE)?;
        b.att_def(&orig_path_def())?;
        b.att_def(&physics("Energy", "Deposited energy", Real, "MeV"))?;
        b.att_def(&physics("TileId", "Tile number", Integer, ""))?;
        b.type_att_value(&AttValue::text("DrawAs", "Polygon"))?;
        b.type_att_value(&AttValue::color("Color", Color { r: 0.2, g: 0.9, b: 0.3 }))?;
        b.close_type()
    }

    fn fill_instances(
        &self,
        b: &mut dyn Builder,
        store: &TransientStore,
        _request: &InstanceRequest,
    ) -> Result<(), BuilderError> {
        for h in &store.event.acd_hits {
            b.open_instance(ACD_TILE)?;
            b.instance_att_value(&AttValue::real("Energy", h.energy))?;
            b.instance_att_value(&AttValue::int("TileId", h.tile_id as i64))?;
            let v = store.detector.acd_tile_volume(h.tile_id);
            let top = v.corners();
            points(b, &top[4..])?;
            b.close_instance()?;
        }
        Ok(())
    }

    fn root_instance_count(&self, store: &TransientStore) -> usize {
        store.event.acd_hits.len()
    }
}

pub fn standard_fillers() -> Vec<Box<dyn Filler<TransientStore>>> {
    vec![
        Box::new(GeometryFiller),
        Box::new(TrackFiller),
        Box::new(CalFiller),
        Box::new(AcdFiller),
    ]
}

pub fn standard_registry() -> FillerRegistry<TransientStore> {
    let mut reg = FillerRegistry::default();
    for f in standard_fillers() {
        reg.register(f).expect("standard fillers own disjoint types");
    }
    reg
}
