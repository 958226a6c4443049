use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::detector::DetectorModel;
use super::fit::{fit_track, TrackFit};

/// Energies are whole multiples of this many MeV, so every sum of them is
/// exact in binary floating point.
pub const ENERGY_QUANTUM: f64 = 1.0 / 1024.0;

pub const MIN_GAMMA_ENERGY: f64 = 20.0;
pub const MAX_GAMMA_ENERGY: f64 = 300_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    /// Chance that one hit of one track is displaced by `outlier_offset`.
    pub outlier_probability: f64,
    /// Gaussian hit smearing in x and y, mm.
    pub smear_sigma: f64,
    pub outlier_offset: f64,
    /// Chance that a track's backward extension leaves a signal in the ACD
    /// tile it crosses.
    pub backsplash_probability: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            outlier_probability: 0.1,
            smear_sigma: 0.2,
            outlier_offset: 5.0,
            backsplash_probability: 0.25,
        }
    }
}

/// A measured tracker hit, mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackHit {
    pub z: f64,
    pub x: f64,
    pub y: f64,
    /// Monte Carlo truth: this hit carries the injected outlier offset.
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McTrack {
    pub particle_id: String,
    /// MeV.
    pub energy: f64,
    /// Unit vector pointing downward along the track.
    pub direction: [f64; 3],
    /// Increasing z.
    pub hits: Vec<TrackHit>,
    pub fit: TrackFit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalDeposit {
    pub crystal_id: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcdHit {
    pub tile_id: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub event_id: u64,
    pub gamma_energy: f64,
    pub vertex: [f64; 3],
    pub tracks: Vec<McTrack>,
    pub cal_deposits: Vec<CalDeposit>,
    pub acd_hits: Vec<AcdHit>,
}

impl Event {
    /// Sum of all deposited and carried energies, MeV.
    pub fn accounted_energy(&self) -> f64 {
        self.tracks.iter().map(|t| t.energy).fold(0.0, |a, b| a + b)
            + self.cal_deposits.iter().map(|d| d.energy).fold(0.0, |a, b| a + b)
            + self.acd_hits.iter().map(|h| h.energy).fold(0.0, |a, b| a + b)
    }

    /// `(track, hit)` of the injected outlier, if this event has one.
    pub fn outlier(&self) -> Option<(usize, usize)> {
        self.tracks
            .iter()
            .enumerate()
            .find_map(|(t, track)| track.hits.iter().position(|h| h.outlier).map(|h| (t, h)))
    }
}

fn quanta(mev: f64) -> u64 {
    (mev / ENERGY_QUANTUM).round() as u64
}

fn mev(q: u64) -> f64 {
    q as f64 * ENERGY_QUANTUM
}

const MAX_GAMMA_THETA_DEG: f64 = 15.0;
const MAX_OPENING_DEG: f64 = 5.0;
const VERTEX_INSET: f64 = 40.0;
const HIT_INSET: f64 = 10.0;

/// The toy generator with the default detector and configuration.
pub fn generate_event(seed: u64, event_id: u64) -> Event {
    generate_event_with(&DetectorModel::default(), &GeneratorConfig::default(), seed, event_id)
}

/// A gamma converting at a tracker plane into an e± pair. A pure function of
/// its arguments.
pub fn generate_event_with(det: &DetectorModel, config: &GeneratorConfig, seed: u64, event_id: u64) -> Event {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(event_id);

    let log_e = rng.random_range(MIN_GAMMA_ENERGY.ln()..=MAX_GAMMA_ENERGY.ln());
    let total = quanta(log_e.exp()).clamp(quanta(MIN_GAMMA_ENERGY), quanta(MAX_GAMMA_ENERGY));

    let tower = rng.random_range(0..det.tower_count());
    let plane = rng.random_range(1..det.plane_z.len());
    let (x0, x1, y0, y1) = det.footprint(tower);
    let vertex = [
        rng.random_range(x0 + VERTEX_INSET..=x1 - VERTEX_INSET),
        rng.random_range(y0 + VERTEX_INSET..=y1 - VERTEX_INSET),
        det.plane_z[plane],
    ];

    // slopes are dx/d(-z), dy/d(-z)
    let cos_max = MAX_GAMMA_THETA_DEG.to_radians().cos();
    let cos_t: f64 = rng.random_range(cos_max..=1.0);
    let tan_t = (1.0 - cos_t * cos_t).max(0.0).sqrt() / cos_t;
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let gamma_slope = [tan_t * phi.cos(), tan_t * phi.sin()];
    let open = rng.random_range(0.0..=MAX_OPENING_DEG.to_radians()).tan() / 2.0;
    let psi = rng.random_range(0.0..std::f64::consts::TAU);
    let delta = [open * psi.cos(), open * psi.sin()];

    let smear = Normal::new(0.0, config.smear_sigma.max(0.0)).expect("finite sigma");
    let mut tracks = Vec::with_capacity(2);
    for (pid, sign) in [("e-", 1.0), ("e+", -1.0)] {
        let slope = [gamma_slope[0] + sign * delta[0], gamma_slope[1] + sign * delta[1]];
        let norm = (slope[0] * slope[0] + slope[1] * slope[1] + 1.0).sqrt();
        let direction = [slope[0] / norm, slope[1] / norm, -1.0 / norm];
        let mut hits = Vec::new();
        for &z in det.plane_z[..=plane].iter().rev() {
            let tx = vertex[0] + slope[0] * (vertex[2] - z);
            let ty = vertex[1] + slope[1] * (vertex[2] - z);
            if !det.in_footprint(tower, tx, ty, HIT_INSET) {
                break;
            }
            let x = (tx + smear.sample(&mut rng)).clamp(x0, x1);
            let y = (ty + smear.sample(&mut rng)).clamp(y0, y1);
            hits.push(TrackHit {
                z,
                x,
                y,
                outlier: false,
            });
        }
        hits.reverse();
        tracks.push((pid, direction, slope, hits));
    }

    if rng.random_bool(config.outlier_probability.clamp(0.0, 1.0)) {
        let eligible: Vec<usize> = (0..tracks.len()).filter(|&t| tracks[t].3.len() >= 3).collect();
        if !eligible.is_empty() {
            let t = eligible[rng.random_range(0..eligible.len())];
            let hits = &mut tracks[t].3;
            let h = rng.random_range(0..hits.len());
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            hits[h].x = (hits[h].x + config.outlier_offset * a.cos()).clamp(x0, x1);
            hits[h].y = (hits[h].y + config.outlier_offset * a.sin()).clamp(y0, y1);
            hits[h].outlier = true;
        }
    }

    // energy partition, in quanta
    let track_total = (total as f64 * rng.random_range(0.05..=0.3)).round() as u64;
    let first = (track_total as f64 * rng.random_range(0.2..=0.8)).round() as u64;
    let track_q = [first, track_total - first];

    let mut acd_hits: Vec<(usize, u64)> = Vec::new();
    for (_, _, slope, _) in &tracks {
        let back = det.acd_z - vertex[2];
        let ax = vertex[0] - slope[0] * back;
        let ay = vertex[1] - slope[1] * back;
        let Some(tile) = det.tower_at(ax, ay) else { continue };
        if !rng.random_bool(config.backsplash_probability.clamp(0.0, 1.0)) {
            continue;
        }
        let q = ((total as f64 * rng.random_range(0.0005..=0.005)).round() as u64).max(1);
        match acd_hits.iter_mut().find(|(t, _)| *t == tile) {
            Some((_, e)) => *e += q,
            None => acd_hits.push((tile, q)),
        }
    }
    let acd_total: u64 = acd_hits.iter().map(|(_, q)| q).sum();
    let cal_total = total - track_total - acd_total;

    let mut crystals: Vec<usize> = Vec::new();
    for (_, _, slope, _) in &tracks {
        let ex = vertex[0] + slope[0] * (vertex[2] - det.cal_z.1);
        let ey = vertex[1] + slope[1] * (vertex[2] - det.cal_z.1);
        let c = det.crystal_at(tower, ex, ey);
        if !crystals.contains(&c) {
            crystals.push(c);
        }
    }
    let wanted = rng.random_range(1..=4usize);
    let mut i = 0;
    while crystals.len() < wanted && i < crystals.len() {
        for n in det.crystal_neighbours(crystals[i]) {
            if crystals.len() < wanted && !crystals.contains(&n) {
                crystals.push(n);
            }
        }
        i += 1;
    }
    crystals.truncate(wanted);
    let weights: Vec<f64> = crystals.iter().map(|_| rng.random_range(0.1..=1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut left = cal_total;
    let mut cal_deposits = Vec::with_capacity(crystals.len());
    for (k, (&c, w)) in crystals.iter().zip(&weights).enumerate() {
        let q = if k + 1 == crystals.len() {
            left
        } else {
            ((cal_total as f64 * w / wsum).floor() as u64).min(left)
        };
        left -= q;
        cal_deposits.push(CalDeposit {
            crystal_id: c,
            energy: mev(q),
        });
    }

    let tracks = tracks
        .into_iter()
        .zip(track_q)
        .map(|((pid, direction, _, hits), q)| {
            let fit = fit_track(&hits).expect("generated tracks cross at least two planes");
            McTrack {
                particle_id: pid.to_string(),
                energy: mev(q),
                direction,
                hits,
                fit,
            }
        })
        .collect();

    Event {
        event_id,
        gamma_energy: mev(total),
        vertex,
        tracks,
        cal_deposits,
        acd_hits: acd_hits
            .into_iter()
            .map(|(tile_id, q)| AcdHit {
                tile_id,
                energy: mev(q),
            })
            .collect(),
    }
}
