//! Per-ball geometric features.
//!
//! Three groups per ball:
//! - position `(x, y)` on the table;
//! - per-pocket: cushion angle, pocket distance, occlusion indicator and the
//!   pocket index itself, for each of the six pockets;
//! - for object balls, the shot angle: the minimum angle between the incoming
//!   direction (predecessor ball to this ball) and any ball-to-pocket sight
//!   line, together with the minimizing pocket.
//!
//! That is 1 + 4*6 + 2 = 27 feature slots per ball. The cue ball carries no
//! shot-angle entry.

use crate::error::{Error, Result};
use crate::geom::{PocketIndex, TableGeometry};
use crate::layout::{Ball, Layout, CUE_NUMBER};
use serde::{Deserialize, Serialize};

/// Feature slots per ball.
pub const SLOTS_PER_BALL: usize = 27;

/// Cushion-angle, distance and occlusion of one ball with respect to one pocket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PocketFeature {
    pub pocket: PocketIndex,
    /// Degrees in [0, 90].
    pub cushion_angle: f64,
    pub distance: f64,
    pub occluded: bool,
    /// Set when the ball sits on the pocket center and the angle degenerates.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

/// Minimum-angle pocket assignment for an object ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotFeature {
    /// Degrees in [0, 180].
    pub angle: f64,
    pub pocket: PocketIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallFeatures {
    pub num: u8,
    pub x: f64,
    pub y: f64,
    pub pockets: [PocketFeature; 6],
    /// `None` for the cue ball.
    pub shot: Option<ShotFeature>,
}

/// One row per ball present, canonical order (cue first, objects ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub layout_id: String,
    pub rows: Vec<BallFeatures>,
}

impl FeatureTable {
    pub fn row(&self, num: u8) -> Option<&BallFeatures> {
        self.rows.iter().find(|r| r.num == num)
    }
}

fn angle_between_deg(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let na = ax.hypot(ay);
    let nb = bx.hypot(by);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let cos = ((ax * bx + ay * by) / (na * nb)).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

/// Minimum angle between the ball-to-pocket sight line and the pocket's two
/// cushion edges, in degrees in [0, 90]. The boolean flags the degenerate
/// ball-on-pocket case, reported as 0.
pub fn cushion_angle(ball: &Ball, pocket: PocketIndex, geom: &TableGeometry) -> (f64, bool) {
    let (px, py) = geom.pocket(pocket);
    let (vx, vy) = (ball.x - px, ball.y - py);
    if vx == 0.0 && vy == 0.0 {
        return (0.0, true);
    }
    let angle = geom
        .cushion_directions(pocket)
        .iter()
        .map(|&(ex, ey)| angle_between_deg(vx, vy, ex, ey))
        .fold(f64::INFINITY, f64::min);
    (angle, false)
}

/// Euclidean distance from a ball to a pocket center.
pub fn pocket_distance(ball: &Ball, pocket: PocketIndex, geom: &TableGeometry) -> f64 {
    let (px, py) = geom.pocket(pocket);
    (ball.x - px).hypot(ball.y - py)
}

/// Whether any other ball blocks the straight path from `ball` to the pocket:
/// its center lies strictly between the endpoints (projection parameter in
/// (0,1)) and within two ball radii of the sight line.
pub fn occlusion_indicator(
    ball: &Ball,
    pocket: PocketIndex,
    others: &[Ball],
    geom: &TableGeometry,
) -> bool {
    let (px, py) = geom.pocket(pocket);
    let (dx, dy) = (px - ball.x, py - ball.y);
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return false;
    }
    let corridor = 2.0 * geom.ball_radius;
    others.iter().any(|other| {
        if other.num == ball.num {
            return false;
        }
        let (ox, oy) = (other.x - ball.x, other.y - ball.y);
        let t = (ox * dx + oy * dy) / len_sq;
        if t <= 0.0 || t >= 1.0 {
            return false;
        }
        let perp = (ox - t * dx).hypot(oy - t * dy);
        perp < corridor
    })
}

/// The ball the cue would be near when `num` becomes the target: the present
/// ball with the largest number below `num`, or the cue ball.
pub fn predecessor(layout: &Layout, num: u8) -> Option<&Ball> {
    layout
        .balls
        .iter()
        .filter(|b| b.num < num)
        .max_by_key(|b| b.num)
}

/// Minimum angle between the incoming direction (predecessor to ball) and the
/// six ball-to-pocket directions; ties broken by the smallest pocket index.
pub fn shot_angle(layout: &Layout, num: u8, geom: &TableGeometry) -> Result<ShotFeature> {
    if num == CUE_NUMBER {
        return Err(Error::Feature("shot angle undefined for the cue ball".into()));
    }
    let ball = layout
        .ball(num)
        .ok_or_else(|| Error::Feature(format!("ball {num} not in layout `{}`", layout.id)))?;
    let pred = predecessor(layout, num)
        .ok_or_else(|| Error::Feature(format!("layout `{}` has no cue ball", layout.id)))?;
    let (ix, iy) = (ball.x - pred.x, ball.y - pred.y);
    if ix == 0.0 && iy == 0.0 {
        return Err(Error::Feature(format!(
            "zero-length incoming direction for ball {num} in `{}`",
            layout.id
        )));
    }
    let mut best: Option<ShotFeature> = None;
    for pocket in PocketIndex::ALL {
        let (px, py) = geom.pocket(pocket);
        let angle = angle_between_deg(ix, iy, px - ball.x, py - ball.y);
        if best.map_or(true, |b| angle < b.angle) {
            best = Some(ShotFeature { angle, pocket });
        }
    }
    Ok(best.expect("six pockets"))
}

/// Computes the full feature table of a layout. Expects a valid, canonical
/// layout; errors from degenerate ball arrangements are propagated.
pub fn extract_features(layout: &Layout, geom: &TableGeometry) -> Result<FeatureTable> {
    let mut rows = Vec::with_capacity(layout.balls.len());
    for ball in &layout.balls {
        let pockets = PocketIndex::ALL.map(|pocket| {
            let (angle, degenerate) = cushion_angle(ball, pocket, geom);
            PocketFeature {
                pocket,
                cushion_angle: angle,
                distance: pocket_distance(ball, pocket, geom),
                occluded: occlusion_indicator(ball, pocket, &layout.balls, geom),
                degenerate,
            }
        });
        let shot = if ball.num == CUE_NUMBER {
            None
        } else {
            Some(shot_angle(layout, ball.num, geom)?)
        };
        rows.push(BallFeatures {
            num: ball.num,
            x: ball.x,
            y: ball.y,
            pockets,
            shot,
        });
    }
    Ok(FeatureTable {
        layout_id: layout.id.clone(),
        rows,
    })
}

/// Writes one JSON record per layout with values at 2-decimal precision,
/// mirroring the table structure. Debug aid for inspecting features.
pub fn write_feature_dump<W: std::io::Write>(
    writer: &mut W,
    table: &FeatureTable,
) -> std::io::Result<()> {
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|r| {
            let bp: Vec<serde_json::Value> = r
                .pockets
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "pocket": p.pocket.get(),
                        "cushion_angle": crate::layout::round2(p.cushion_angle),
                        "distance": crate::layout::round2(p.distance),
                        "occluded": u8::from(p.occluded),
                    })
                })
                .collect();
            let bb = r.shot.map(|s| {
                serde_json::json!({
                    "shot_angle": crate::layout::round2(s.angle),
                    "pocket": s.pocket.get(),
                })
            });
            serde_json::json!({
                "num": r.num,
                "bs": [crate::layout::round2(r.x), crate::layout::round2(r.y)],
                "bp": bp,
                "bb": bb,
            })
        })
        .collect();
    let record = serde_json::json!({ "id": table.layout_id, "balls": rows });
    serde_json::to_writer(&mut *writer, &record)?;
    writer.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Layout;

    fn geom() -> TableGeometry {
        TableGeometry::standard()
    }

    #[test]
    fn cushion_angle_matches_worked_example() {
        // Ball-to-pocket-1 sight line against the bottom rail.
        let ball = Ball::new(2, 88.06, 76.02);
        let (angle, degenerate) = cushion_angle(&ball, PocketIndex::new(1).unwrap(), &geom());
        assert!(!degenerate);
        assert!((angle - 40.80).abs() < 0.01, "angle {angle}");
    }

    #[test]
    fn cushion_angle_collinear_with_rail_is_zero() {
        let ball = Ball::new(1, 100.0, 0.0);
        let (angle, _) = cushion_angle(&ball, PocketIndex::new(1).unwrap(), &geom());
        assert!(angle.abs() < 1e-12);
    }

    #[test]
    fn cushion_angle_corner_takes_minimum_edge() {
        // (50,50) seen from pocket 4: 18.43 deg vs the top rail beats 71.57
        // vs the right rail.
        let ball = Ball::new(1, 50.0, 50.0);
        let (angle, _) = cushion_angle(&ball, PocketIndex::new(4).unwrap(), &geom());
        assert!((angle - (50.0f64 / 150.0).atan().to_degrees()).abs() < 1e-9);
        assert!((angle - 18.43).abs() < 0.01);
    }

    #[test]
    fn cushion_angle_degenerate_flagged() {
        let ball = Ball::new(1, 0.0, 0.0);
        let (angle, degenerate) = cushion_angle(&ball, PocketIndex::new(1).unwrap(), &geom());
        assert_eq!(angle, 0.0);
        assert!(degenerate);
    }

    #[test]
    fn pocket_distance_matches_worked_example() {
        let ball = Ball::new(2, 88.06, 76.02);
        let d = pocket_distance(&ball, PocketIndex::new(1).unwrap(), &geom());
        assert!((d - 116.33).abs() < 0.01, "distance {d}");
    }

    #[test]
    fn pocket_distance_corner_cases() {
        let at_pocket = Ball::new(1, 0.0, 0.0);
        assert_eq!(pocket_distance(&at_pocket, PocketIndex::new(1).unwrap(), &geom()), 0.0);
        let far = Ball::new(1, 100.0, 100.0);
        let d = pocket_distance(&far, PocketIndex::new(1).unwrap(), &geom());
        assert!((d - 20_000f64.sqrt()).abs() < 1e-9);
        assert!((d - 141.42).abs() < 0.01);
    }

    #[test]
    fn occlusion_on_and_off_the_corridor() {
        let g = geom();
        let ball = Ball::new(2, 100.0, 50.0);
        let p1 = PocketIndex::new(1).unwrap();
        // Exactly on the segment midpoint-ish.
        let blocker_on = [Ball::new(1, 50.0, 25.0)];
        assert!(occlusion_indicator(&ball, p1, &blocker_on, &g));
        // Perpendicular distance 20/sqrt(5) > 4.5.
        let blocker_off = [Ball::new(1, 50.0, 35.0)];
        assert!(!occlusion_indicator(&ball, p1, &blocker_off, &g));
        // No other balls at all.
        assert!(!occlusion_indicator(&ball, p1, &[], &g));
    }

    #[test]
    fn occlusion_requires_strict_interior_projection() {
        let g = geom();
        let ball = Ball::new(2, 100.0, 50.0);
        let p1 = PocketIndex::new(1).unwrap();
        // Behind the ball (t < 0) and past the pocket (t > 1).
        let behind = [Ball::new(1, 150.0, 75.0)];
        assert!(!occlusion_indicator(&ball, p1, &behind, &g));
        let beyond = [Ball::new(1, 0.0, 0.0)];
        assert!(!occlusion_indicator(&ball, p1, &beyond, &g));
    }

    #[test]
    fn shot_angle_collinear_pocket() {
        let layout = Layout::new(
            "s",
            vec![Ball::new(0, 0.0, 0.0), Ball::new(1, 10.0, 0.0)],
        );
        let shot = shot_angle(&layout, 1, &geom()).unwrap();
        assert!(shot.angle.abs() < 1e-9);
        assert_eq!(shot.pocket.get(), 5);
    }

    #[test]
    fn shot_angle_brute_force_example() {
        let layout = Layout::new(
            "s",
            vec![Ball::new(0, 0.0, 0.0), Ball::new(1, 100.0, 40.0)],
        );
        let shot = shot_angle(&layout, 1, &geom()).unwrap();
        assert_eq!(shot.pocket.get(), 4);
        assert!((shot.angle - 9.16).abs() < 0.01, "angle {}", shot.angle);
    }

    #[test]
    fn shot_angle_predecessor_skips_missing_numbers() {
        let layout = Layout::new(
            "s",
            vec![
                Ball::new(0, 0.0, 0.0),
                Ball::new(2, 40.0, 40.0),
                Ball::new(7, 120.0, 60.0),
                Ball::new(9, 180.0, 20.0),
            ],
        );
        assert_eq!(predecessor(&layout, 7).unwrap().num, 2);
        assert_eq!(predecessor(&layout, 2).unwrap().num, 0);
        assert_eq!(predecessor(&layout, 9).unwrap().num, 7);
    }

    #[test]
    fn shot_angle_degenerate_direction_errors() {
        let mut layout = Layout::new(
            "s",
            vec![Ball::new(0, 50.0, 50.0), Ball::new(1, 50.0, 50.0)],
        );
        layout.canonicalize();
        let err = shot_angle(&layout, 1, &geom()).unwrap_err();
        assert!(err.to_string().contains("zero-length"));
    }

    #[test]
    fn extract_counts_and_cue_rules() {
        let layout = Layout::new(
            "f",
            vec![
                Ball::new(0, 20.0, 20.0),
                Ball::new(2, 88.06, 76.02),
                Ball::new(7, 120.0, 60.0),
                Ball::new(9, 180.0, 20.0),
            ],
        );
        let table = extract_features(&layout, &geom()).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(table.row(0).unwrap().shot.is_none());
        assert!(table.row(2).unwrap().shot.is_some());
        // 27 slots: position pair + 6 pockets * 4 + shot pair.
        assert_eq!(SLOTS_PER_BALL, 1 + 4 * 6 + 2);
    }

    #[test]
    fn features_invariant_under_storage_shuffle() {
        let a = Layout::new(
            "p",
            vec![
                Ball::new(0, 20.0, 20.0),
                Ball::new(3, 60.0, 80.0),
                Ball::new(5, 150.0, 30.0),
            ],
        );
        let mut shuffled = a.clone();
        shuffled.balls.reverse();
        shuffled.canonicalize();
        assert_eq!(
            extract_features(&a, &geom()).unwrap(),
            extract_features(&shuffled, &geom()).unwrap()
        );
    }

    #[test]
    fn mirror_symmetry_preserves_cushion_angles_and_distances() {
        // Reflect across the horizontal midline and swap pockets
        // 1<->2, 5<->4, 6<->3.
        let g = geom();
        let swap = |p: u8| match p {
            1 => 2,
            2 => 1,
            3 => 6,
            4 => 5,
            5 => 4,
            6 => 3,
            _ => unreachable!(),
        };
        let ball = Ball::new(2, 88.06, 76.02);
        let mirrored = Ball::new(2, 88.06, g.width - 76.02);
        for p in PocketIndex::ALL {
            let q = PocketIndex::new(swap(p.get())).unwrap();
            let (a0, _) = cushion_angle(&ball, p, &g);
            let (a1, _) = cushion_angle(&mirrored, q, &g);
            assert!((a0 - a1).abs() < 1e-9);
            let d0 = pocket_distance(&ball, p, &g);
            let d1 = pocket_distance(&mirrored, q, &g);
            assert!((d0 - d1).abs() < 1e-9);
        }
    }
}
