//! Table geometry: playing field dimensions and pocket positions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Pocket number 1..=6, clockwise from the bottom-left corner.
///
/// 1=(0,0), 2=(0,W), 3=(L/2,W), 4=(L,W), 5=(L,0), 6=(L/2,0). Pockets 3 and 6
/// sit in the middle of the long rails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PocketIndex(u8);

impl PocketIndex {
    pub const ALL: [PocketIndex; 6] = [
        PocketIndex(1),
        PocketIndex(2),
        PocketIndex(3),
        PocketIndex(4),
        PocketIndex(5),
        PocketIndex(6),
    ];

    pub fn new(index: u8) -> Option<Self> {
        (1..=6).contains(&index).then_some(PocketIndex(index))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based position in `ALL`.
    pub fn ordinal(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl std::fmt::Display for PocketIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Playing field in table units, bottom-left corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGeometry {
    pub length: f64,
    pub width: f64,
    pub ball_radius: f64,
}

impl Default for TableGeometry {
    fn default() -> Self {
        // Default radius approximates a 57.15 mm ball on a table whose long
        // side maps to 200 units.
        TableGeometry {
            length: 200.0,
            width: 100.0,
            ball_radius: 2.25,
        }
    }
}

impl TableGeometry {
    pub fn standard() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err(Error::Config("table dimensions must be positive".into()));
        }
        if !(self.ball_radius > 0.0 && self.ball_radius < self.width / 4.0) {
            return Err(Error::Config(format!(
                "ball radius {} out of range (0, {})",
                self.ball_radius,
                self.width / 4.0
            )));
        }
        Ok(())
    }

    /// Pocket center position.
    pub fn pocket(&self, index: PocketIndex) -> (f64, f64) {
        let (l, w) = (self.length, self.width);
        match index.get() {
            1 => (0.0, 0.0),
            2 => (0.0, w),
            3 => (l / 2.0, w),
            4 => (l, w),
            5 => (l, 0.0),
            _ => (l / 2.0, 0.0),
        }
    }

    /// Unit directions of the two cushion edges meeting at a pocket, pointing
    /// away from the pocket along the rails. For the middle pockets the two
    /// edges are the collinear halves of the long rail.
    pub fn cushion_directions(&self, index: PocketIndex) -> [(f64, f64); 2] {
        match index.get() {
            1 => [(1.0, 0.0), (0.0, 1.0)],
            2 => [(1.0, 0.0), (0.0, -1.0)],
            3 => [(1.0, 0.0), (-1.0, 0.0)],
            4 => [(-1.0, 0.0), (0.0, -1.0)],
            5 => [(-1.0, 0.0), (0.0, 1.0)],
            _ => [(1.0, 0.0), (-1.0, 0.0)],
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.length.hypot(self.width)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.length).contains(&x) && (0.0..=self.width).contains(&y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pocket_positions_run_clockwise() {
        let g = TableGeometry::standard();
        let expected = [
            (0.0, 0.0),
            (0.0, 100.0),
            (100.0, 100.0),
            (200.0, 100.0),
            (200.0, 0.0),
            (100.0, 0.0),
        ];
        for (p, want) in PocketIndex::ALL.iter().zip(expected) {
            assert_eq!(g.pocket(*p), want);
        }
    }

    #[test]
    fn radius_bounds_enforced() {
        let mut g = TableGeometry::standard();
        g.ball_radius = 25.0;
        assert!(g.validate().is_err());
        g.ball_radius = 0.0;
        assert!(g.validate().is_err());
        g.ball_radius = 2.25;
        assert!(g.validate().is_ok());
    }

    #[test]
    fn diagonal_matches_hand_value() {
        assert!((TableGeometry::standard().diagonal() - 223.606_797_749_979).abs() < 1e-9);
    }
}
