use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Integer coordinates of a spatial bin.
pub type BinKey = [i64; 3];

/// A regular grid of boxes. An infinite width leaves that axis unbinned.
///
/// The grid has no bounds: every position maps to some key, so it covers any
/// ensemble however far it spreads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    pub origin: [f64; 3],
    pub width: [f64; 3],
}

impl BinGrid {
    pub fn new(origin: [f64; 3], width: [f64; 3]) -> Self {
        assert!(
            width.iter().all(|w| *w > 0.0),
            "bin widths must be positive"
        );
        Self { origin, width }
    }

    /// Cubic bins of side `width` with a corner at the origin.
    pub fn uniform(width: f64) -> Self {
        Self::new([0.0; 3], [width; 3])
    }

    /// Bins of `width` along x only, centred on the origin.
    pub fn along_x(width: f64) -> Self {
        Self::new(
            [-0.5 * width, 0.0, 0.0],
            [width, f64::INFINITY, f64::INFINITY],
        )
    }

    /// A single bin holding everything.
    pub fn single() -> Self {
        Self::new([0.0; 3], [f64::INFINITY; 3])
    }

    pub fn is_binned(&self, axis: usize) -> bool {
        self.width[axis].is_finite()
    }

    pub fn key(&self, x: &Vector3<f64>) -> BinKey {
        let mut k = [0i64; 3];
        for a in 0..3 {
            if self.is_binned(a) {
                k[a] = ((x[a] - self.origin[a]) / self.width[a]).floor() as i64;
            }
        }
        k
    }

    /// Centre of a bin; unbinned axes report the origin coordinate.
    pub fn center(&self, key: &BinKey) -> Vector3<f64> {
        Vector3::from_fn(|a, _| {
            if self.is_binned(a) {
                self.origin[a] + (key[a] as f64 + 0.5) * self.width[a]
            } else {
                self.origin[a]
            }
        })
    }

    /// Product of the finite widths.
    pub fn volume(&self) -> f64 {
        self.width.iter().filter(|w| w.is_finite()).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_and_centres() {
        let g = BinGrid::along_x(0.2);
        let k = g.key(&Vector3::new(0.05, 3.0, -7.0));
        assert_eq!(k, [0, 0, 0]);
        assert_eq!(g.key(&Vector3::new(-0.15, 0.0, 0.0)), [-1, 0, 0]);
        assert!((g.center(&[2, 0, 0]).x - 0.4).abs() < 1e-15);
        assert_eq!(g.volume(), 0.2);
        assert_eq!(BinGrid::single().volume(), 1.0);
        assert_eq!(BinGrid::single().key(&Vector3::new(1e9, -1e9, 3.0)), [0, 0, 0]);
    }
}
