//! Toy LAT-like geometry: a 4×4 array of towers, each with a tracker stack
//! above a calorimeter, and one anti-coincidence tile over each tower.

/// Axis-aligned box, millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxVolume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxVolume {
    /// Bottom face counter-clockwise, then the top face in the same order.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let [x0, y0, z0] = self.min;
        let [x1, y1, z1] = self.max;
        [
            [x0, y0, z0],
            [x1, y0, z0],
            [x1, y1, z0],
            [x0, y1, z0],
            [x0, y0, z1],
            [x1, y0, z1],
            [x1, y1, z1],
            [x0, y1, z1],
        ]
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// True when the interiors overlap.
    pub fn overlaps(&self, other: &BoxVolume) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeKind {
    Tracker,
    Crystal,
    AcdTile,
}

impl VolumeKind {
    pub fn label(self) -> &'static str {
        match self {
            VolumeKind::Tracker => "Tower",
            VolumeKind::Crystal => "CalCrystal",
            VolumeKind::AcdTile => "AcdTile",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub towers_per_side: usize,
    pub tower_pitch: f64,
    pub tower_footprint: f64,
    /// Tracker plane heights, ascending.
    pub plane_z: Vec<f64>,
    pub cal_z: (f64, f64),
    pub crystals_x: usize,
    pub crystals_y: usize,
    pub acd_z: f64,
    pub acd_thickness: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            towers_per_side: 4,
            tower_pitch: 400.0,
            tower_footprint: 360.0,
            plane_z: (1..=10).map(|i| 50.0 * i as f64).collect(),
            cal_z: (-200.0, 0.0),
            crystals_x: 4,
            crystals_y: 2,
            acd_z: 550.0,
            acd_thickness: 10.0,
        }
    }
}

impl DetectorModel {
    pub fn tower_count(&self) -> usize {
        self.towers_per_side * self.towers_per_side
    }

    pub fn crystals_per_tower(&self) -> usize {
        self.crystals_x * self.crystals_y
    }

    pub fn crystal_count(&self) -> usize {
        self.tower_count() * self.crystals_per_tower()
    }

    pub fn tower_center(&self, tower: usize) -> (f64, f64) {
        let n = self.towers_per_side;
        let offset = (n as f64 - 1.0) / 2.0;
        let ix = (tower % n) as f64 - offset;
        let iy = (tower / n) as f64 - offset;
        (ix * self.tower_pitch, iy * self.tower_pitch)
    }

    /// `(xmin, xmax, ymin, ymax)` of a tower.
    pub fn footprint(&self, tower: usize) -> (f64, f64, f64, f64) {
        let (cx, cy) = self.tower_center(tower);
        let h = self.tower_footprint / 2.0;
        (cx - h, cx + h, cy - h, cy + h)
    }

    pub fn in_footprint(&self, tower: usize, x: f64, y: f64, inset: f64) -> bool {
        let (x0, x1, y0, y1) = self.footprint(tower);
        x >= x0 + inset && x <= x1 - inset && y >= y0 + inset && y <= y1 - inset
    }

    pub fn tower_at(&self, x: f64, y: f64) -> Option<usize> {
        (0..self.tower_count()).find(|&t| self.in_footprint(t, x, y, 0.0))
    }

    /// The tracker stack of a tower, enclosing all its planes with half a
    /// plane gap of margin.
    pub fn tracker_volume(&self, tower: usize) -> BoxVolume {
        let (x0, x1, y0, y1) = self.footprint(tower);
        let gap = self.plane_gap() / 2.0;
        let zlo = self.plane_z.first().copied().unwrap_or(0.0) - gap;
        let zhi = self.plane_z.last().copied().unwrap_or(0.0) + gap;
        BoxVolume {
            min: [x0, y0, zlo],
            max: [x1, y1, zhi],
        }
    }

    fn plane_gap(&self) -> f64 {
        match self.plane_z.as_slice() {
            [a, b, ..] => b - a,
            _ => 50.0,
        }
    }

    pub fn crystal_volume(&self, crystal: usize) -> BoxVolume {
        let per = self.crystals_per_tower();
        let tower = crystal / per;
        let local = crystal % per;
        let (ix, iy) = (local % self.crystals_x, local / self.crystals_x);
        let (x0, x1, y0, y1) = self.footprint(tower);
        let dx = (x1 - x0) / self.crystals_x as f64;
        let dy = (y1 - y0) / self.crystals_y as f64;
        BoxVolume {
            min: [x0 + dx * ix as f64, y0 + dy * iy as f64, self.cal_z.0],
            max: [x0 + dx * (ix + 1) as f64, y0 + dy * (iy + 1) as f64, self.cal_z.1],
        }
    }

    /// Crystal under `(x, y)` within a tower; positions outside the tower are
    /// clamped onto its edge.
    pub fn crystal_at(&self, tower: usize, x: f64, y: f64) -> usize {
        let (x0, x1, y0, y1) = self.footprint(tower);
        let fx = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0 - 1e-12);
        let fy = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0 - 1e-12);
        let ix = (fx * self.crystals_x as f64) as usize;
        let iy = (fy * self.crystals_y as f64) as usize;
        tower * self.crystals_per_tower() + iy * self.crystals_x + ix
    }

    /// Crystals sharing a face with `crystal` inside the same tower.
    pub fn crystal_neighbours(&self, crystal: usize) -> Vec<usize> {
        let per = self.crystals_per_tower();
        let base = crystal - crystal % per;
        let local = crystal % per;
        let (ix, iy) = ((local % self.crystals_x) as isize, (local / self.crystals_x) as isize);
        [(-1, 0), (1, 0), (0, -1), (0, 1)]
            .into_iter()
            .map(|(dx, dy)| (ix + dx, iy + dy))
            .filter(|&(x, y)| x >= 0 && y >= 0 && (x as usize) < self.crystals_x && (y as usize) < self.crystals_y)
            .map(|(x, y)| base + y as usize * self.crystals_x + x as usize)
            .collect()
    }

    pub fn acd_tile_volume(&self, tile: usize) -> BoxVolume {
        let (x0, x1, y0, y1) = self.footprint(tile);
        let h = self.acd_thickness / 2.0;
        BoxVolume {
            min: [x0, y0, self.acd_z - h],
            max: [x1, y1, self.acd_z + h],
        }
    }

    /// Every volume with its kind and id: trackers, crystals, tiles.
    pub fn volumes(&self) -> Vec<(VolumeKind, usize, BoxVolume)> {
        let mut out = Vec::new();
        for t in 0..self.tower_count() {
            out.push((VolumeKind::Tracker, t, self.tracker_volume(t)));
        }
        for c in 0..self.crystal_count() {
            out.push((VolumeKind::Crystal, c, self.crystal_volume(c)));
        }
        for t in 0..self.tower_count() {
            out.push((VolumeKind::AcdTile, t, self.acd_tile_volume(t)));
        }
        out
    }

    pub fn bounding_box(&self) -> BoxVolume {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for (_, _, v) in self.volumes() {
            for i in 0..3 {
                min[i] = min[i].min(v.min[i]);
                max[i] = max[i].max(v.max[i]);
            }
        }
        BoxVolume { min, max }
    }
}
