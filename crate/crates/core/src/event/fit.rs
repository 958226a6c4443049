use thiserror::Error;

use super::TrackHit;

/// Straight-line fit of a track: `x = slope_x * z + intercept_x`, likewise for y.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackFit {
    pub slope_x: f64,
    pub intercept_x: f64,
    pub slope_y: f64,
    pub intercept_y: f64,
    /// Unweighted sum of squared residuals over both projections.
    pub chi2: f64,
}

impl TrackFit {
    pub fn chi2_of(&self, hits: &[TrackHit]) -> f64 {
        hits.iter()
            .map(|h| {
                let rx = h.x - (self.slope_x * h.z + self.intercept_x);
                let ry = h.y - (self.slope_y * h.z + self.intercept_y);
                rx * rx + ry * ry
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("degenerate fit: {distinct} distinct plane(s) among {hits} hit(s)")]
    Degenerate { hits: usize, distinct: usize },
}

/// Least-squares lines x(z) and y(z), fitted independently.
pub fn fit_track(hits: &[TrackHit]) -> Result<TrackFit, FitError> {
    let mut zs: Vec<f64> = hits.iter().map(|h| h.z).collect();
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    if zs.len() < 2 {
        return Err(FitError::Degenerate {
            hits: hits.len(),
            distinct: zs.len(),
        });
    }
    let (slope_x, intercept_x) = fit_line(hits.iter().map(|h| (h.z, h.x)));
    let (slope_y, intercept_y) = fit_line(hits.iter().map(|h| (h.z, h.y)));
    let mut fit = TrackFit {
        slope_x,
        intercept_x,
        slope_y,
        intercept_y,
        chi2: 0.0,
    };
    fit.chi2 = fit.chi2_of(hits);
    Ok(fit)
}

// centred sums keep the normal equations well conditioned at z ~ 500
fn fit_line(pts: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = pts.clone().count() as f64;
    let (sz, sv) = pts.clone().fold((0.0, 0.0), |(a, b), (z, v)| (a + z, b + v));
    let (mz, mv) = (sz / n, sv / n);
    let (szz, szv) = pts.fold((0.0, 0.0), |(a, b), (z, v)| {
        (a + (z - mz) * (z - mz), b + (z - mz) * (v - mv))
    });
    let slope = szv / szz;
    (slope, mv - slope * mz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(z: f64, x: f64, y: f64) -> TrackHit {
        TrackHit {
            z,
            x,
            y,
            outlier: false,
        }
    }

    #[test]
    fn exact_line() {
        let hits: Vec<_> = (1..=6)
            .map(|i| {
                let z = 50.0 * i as f64;
                hit(z, 0.1 * z + 2.0, -0.05 * z + 1.0)
            })
            .collect();
        let f = fit_track(&hits).unwrap();
        assert!((f.slope_x - 0.1).abs() < 1e-9);
        assert!((f.intercept_x - 2.0).abs() < 1e-9);
        assert!((f.slope_y + 0.05).abs() < 1e-9);
        assert!((f.intercept_y - 1.0).abs() < 1e-9);
        assert!(f.chi2 < 1e-9);
    }

    #[test]
    fn degenerate() {
        assert!(fit_track(&[hit(1.0, 0.0, 0.0), hit(1.0, 1.0, 1.0)]).is_err());
        assert!(fit_track(&[hit(1.0, 0.0, 0.0)]).is_err());
        assert!(fit_track(&[]).is_err());
    }
}
