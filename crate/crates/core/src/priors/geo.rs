use std::collections::HashMap;
use std::sync::RwLock;

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::numeric::tensor::softmax;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in kilometers between two (lat, lon) points in degrees.
pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Location coordinates with a lazily filled distance cache.
#[derive(Debug, Default)]
pub struct GeoTable {
    coords: Vec<Option<(f64, f64)>>,
    cache: RwLock<HashMap<(usize, usize), f64>>,
}

impl Clone for GeoTable {
    fn clone(&self) -> Self {
        Self::new(self.coords.clone())
    }
}

impl PartialEq for GeoTable {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}

impl GeoTable {
    pub fn new(coords: Vec<Option<(f64, f64)>>) -> Self {
        Self {
            coords,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Coordinates of each known location's first training occurrence.
    pub fn from_dataset(ds: &Dataset) -> Self {
        let mut coords = vec![None; ds.num_locations()];
        for s in ds.sessions.iter().filter(|s| s.split == Split::Train) {
            for v in &s.visits {
                if let Some(slot @ None) = coords.get_mut(v.location) {
                    *slot = Some((v.latitude, v.longitude));
                }
            }
        }
        Self::new(coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self, location: usize) -> Option<(f64, f64)> {
        self.coords.get(location).copied().flatten()
    }

    pub fn all_coords(&self) -> &[Option<(f64, f64)>] {
        &self.coords
    }

    /// Distance in km, or `None` when either location has no coordinates.
    pub fn distance(&self, a: usize, b: usize) -> Option<f64> {
        let (ca, cb) = (self.coords(a)?, self.coords(b)?);
        let key = (a.min(b), a.max(b));
        if let Some(&d) = self.cache.read().unwrap().get(&key) {
            return Some(d);
        }
        let d = haversine(ca, cb);
        self.cache.write().unwrap().insert(key, d);
        Some(d)
    }
}

/// Softmax over positions of `1 / max(d, clamp_km)` from `current` to each
/// location of `sequence`. Positions without a distance contribute a zero
/// exponent.
pub fn distance_weights(current: usize, sequence: &[usize], geo: &GeoTable, clamp_km: f64) -> Result<Vec<f64>> {
    if sequence.is_empty() {
        return Err(Error::Shape("distance weights over an empty sequence".into()));
    }
    let scores: Vec<f64> = sequence
        .iter()
        .map(|&l| geo.distance(current, l).map_or(0.0, |d| 1.0 / d.max(clamp_km)))
        .collect();
    Ok(softmax(&scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quarter_meridian() {
        assert_eq!(haversine((10.0, 20.0), (10.0, 20.0)), 0.0);
        assert_abs_diff_eq!(haversine((0.0, 0.0), (90.0, 0.0)), std::f64::consts::FRAC_PI_2 * 6371.0, epsilon = 1e-9);
    }

    #[test]
    fn closed_form_weights() {
        // Points on the equator at 1 km and 2 km from the origin.
        let deg = |km: f64| km / EARTH_RADIUS_KM * 180.0 / std::f64::consts::PI;
        let geo = GeoTable::new(vec![Some((0.0, 0.0)), Some((0.0, deg(1.0))), Some((0.0, deg(2.0)))]);
        let w = distance_weights(0, &[1, 2], &geo, 0.01).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(w[0], e / (e + e.sqrt()), epsilon = 1e-9);
        assert_abs_diff_eq!(w[1], e.sqrt() / (e + e.sqrt()), epsilon = 1e-9);
        assert_abs_diff_eq!(w[0], 0.6225, epsilon = 1e-4);
    }

    #[test]
    fn singleton_and_symmetric() {
        let geo = GeoTable::new(vec![Some((0.0, 0.0)), Some((0.0, 0.1)), Some((0.0, -0.1))]);
        assert_eq!(distance_weights(0, &[1], &geo, 0.01).unwrap(), vec![1.0]);
        let w = distance_weights(0, &[1, 2], &geo, 0.01).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
        assert!(distance_weights(0, &[], &geo, 0.01).is_err());
    }

    #[test]
    fn self_distance_is_clamped() {
        let geo = GeoTable::new(vec![Some((0.0, 0.0)), Some((0.0, 1.0))]);
        let w = distance_weights(0, &[0, 1], &geo, 0.01).unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
        assert!(w[0] > 0.999);
    }
}
