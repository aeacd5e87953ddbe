//! Discretization of continuous features into dense token ids.
//!
//! Positions map to grid cells (row-major from the bottom-left), angles and
//! distances to fixed-granularity bins; occlusion flags and pocket indexes
//! are tokens already. Each feature family also carries a PAD sentinel used
//! for rows of absent balls, and the two shot families carry an extra NA
//! sentinel for the cue ball, whose shot features are undefined. Values
//! exactly at a range maximum fall into the last bin.
//!
//! Token ids are dense and globally unique: families are laid out back to
//! back in a fixed order, so a `(TokenConfig, TableGeometry)` pair fully
//! determines the vocabulary.

use crate::error::{Error, Result};
use crate::features::{FeatureTable, SLOTS_PER_BALL};
use crate::geom::TableGeometry;
use crate::layout::{GameSpec, CUE_NUMBER};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenConfig {
    pub cell_size: f64,
    /// Degrees per angle bin, shared by cushion and shot angles.
    pub angle_granularity: f64,
    pub distance_granularity: f64,
}

impl Default for TokenConfig {
    fn default() -> Self {
        TokenConfig {
            cell_size: 15.0,
            angle_granularity: 15.0,
            distance_granularity: 10.0,
        }
    }
}

impl TokenConfig {
    pub fn validate(&self, geom: &TableGeometry) -> Result<()> {
        if self.cell_size <= 0.0 || self.angle_granularity <= 0.0 || self.distance_granularity <= 0.0
        {
            return Err(Error::Config("token granularities must be positive".into()));
        }
        if self.cell_size > geom.length.min(geom.width) {
            return Err(Error::Config(format!(
                "cell size {} exceeds table side {}",
                self.cell_size,
                geom.length.min(geom.width)
            )));
        }
        Ok(())
    }
}

/// Token families in vocabulary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Position,
    CushionAngle,
    Distance,
    Occlusion,
    PocketIndex,
    ShotAngle,
    ShotPocket,
}

pub const FAMILIES: [Family; 7] = [
    Family::Position,
    Family::CushionAngle,
    Family::Distance,
    Family::Occlusion,
    Family::PocketIndex,
    Family::ShotAngle,
    Family::ShotPocket,
];

/// Family of each of the 27 slots in a ball row: position, then
/// (cushion angle, distance, occlusion, pocket index) for pockets 1..=6,
/// then the two shot slots.
pub fn slot_family(slot: usize) -> Family {
    match slot {
        0 => Family::Position,
        25 => Family::ShotAngle,
        26 => Family::ShotPocket,
        s => match (s - 1) % 4 {
            0 => Family::CushionAngle,
            1 => Family::Distance,
            2 => Family::Occlusion,
            _ => Family::PocketIndex,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct FamilyRange {
    offset: u16,
    /// Value bins, sentinels excluded.
    bins: u16,
    /// Total ids including PAD (and NA where present).
    size: u16,
    has_na: bool,
}

/// Dense token-id space derived from a token config and table geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub config: TokenConfig,
    pub cols: u16,
    pub rows: u16,
    ranges: [FamilyRange; 7],
    total: u16,
}

impl Vocabulary {
    pub fn new(config: TokenConfig, geom: &TableGeometry) -> Result<Self> {
        config.validate(geom)?;
        geom.validate()?;
        let cols = (geom.length / config.cell_size).ceil() as u16;
        let rows = (geom.width / config.cell_size).ceil() as u16;
        let cushion_bins = (90.0 / config.angle_granularity).ceil() as u16;
        let shot_bins = (180.0 / config.angle_granularity).ceil() as u16;
        let distance_bins = (geom.diagonal() / config.distance_granularity).ceil() as u16;
        let mut ranges = [FamilyRange {
            offset: 0,
            bins: 0,
            size: 0,
            has_na: false,
        }; 7];
        let mut offset = 0u16;
        for (i, family) in FAMILIES.iter().enumerate() {
            let (bins, has_na) = match family {
                Family::Position => (cols * rows, false),
                Family::CushionAngle => (cushion_bins, false),
                Family::Distance => (distance_bins, false),
                Family::Occlusion => (2, false),
                Family::PocketIndex => (6, false),
                Family::ShotAngle => (shot_bins, true),
                Family::ShotPocket => (6, true),
            };
            let size = bins + 1 + u16::from(has_na);
            ranges[i] = FamilyRange {
                offset,
                bins,
                size,
                has_na,
            };
            offset = offset
                .checked_add(size)
                .ok_or_else(|| Error::Config("vocabulary too large".into()))?;
        }
        Ok(Vocabulary {
            config,
            cols,
            rows,
            ranges,
            total: offset,
        })
    }

    fn range(&self, family: Family) -> &FamilyRange {
        &self.ranges[FAMILIES.iter().position(|f| *f == family).expect("family")]
    }

    /// Total ids across all families, sentinels included.
    pub fn total(&self) -> usize {
        usize::from(self.total)
    }

    /// Value bins of a family (sentinels excluded).
    pub fn bins(&self, family: Family) -> usize {
        usize::from(self.range(family).bins)
    }

    /// Ids in a family including sentinels; the family's embedding-table rows.
    pub fn family_size(&self, family: Family) -> usize {
        usize::from(self.range(family).size)
    }

    pub fn global(&self, family: Family, local: u16) -> u16 {
        debug_assert!(local < self.range(family).size);
        self.range(family).offset + local
    }

    /// Local id within the slot's family.
    pub fn local(&self, family: Family, global: u16) -> u16 {
        global - self.range(family).offset
    }

    pub fn pad(&self, family: Family) -> u16 {
        let r = self.range(family);
        r.offset + r.bins
    }

    pub fn na(&self, family: Family) -> Option<u16> {
        let r = self.range(family);
        r.has_na.then_some(r.offset + r.bins + 1)
    }
}

/// Grid-cell token for a position: `floor(y/cell)*cols + floor(x/cell)`,
/// with coordinates exactly on the far edges clamped into the last cell.
pub fn tokenize_position(x: f64, y: f64, cfg: &TokenConfig, geom: &TableGeometry) -> Result<u16> {
    if !geom.contains(x, y) {
        return Err(Error::Tokenize(format!("position ({x}, {y}) out of bounds")));
    }
    let cols = (geom.length / cfg.cell_size).ceil() as u16;
    let rows = (geom.width / cfg.cell_size).ceil() as u16;
    let col = ((x / cfg.cell_size) as u16).min(cols - 1);
    let row = ((y / cfg.cell_size) as u16).min(rows - 1);
    Ok(row * cols + col)
}

/// Center of a position cell, clipped to the playing field (edge cells can
/// overhang the table when the cell size does not divide it evenly).
pub fn cell_center(token: u16, cfg: &TokenConfig, geom: &TableGeometry) -> (f64, f64) {
    let cols = (geom.length / cfg.cell_size).ceil() as u16;
    let col = f64::from(token % cols);
    let row = f64::from(token / cols);
    let x = (col * cfg.cell_size + ((col + 1.0) * cfg.cell_size).min(geom.length)) / 2.0;
    let y = (row * cfg.cell_size + ((row + 1.0) * cfg.cell_size).min(geom.width)) / 2.0;
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleKind {
    Cushion,
    Shot,
}

/// Bin token for an angle in degrees; [0,90] for cushion, [0,180] for shot.
pub fn tokenize_angle(angle: f64, cfg: &TokenConfig, kind: AngleKind) -> Result<u16> {
    let max = match kind {
        AngleKind::Cushion => 90.0,
        AngleKind::Shot => 180.0,
    };
    if !(0.0..=max + 1e-9).contains(&angle) {
        return Err(Error::Tokenize(format!("angle {angle} outside [0, {max}]")));
    }
    let bins = (max / cfg.angle_granularity).ceil() as u16;
    Ok(((angle / cfg.angle_granularity) as u16).min(bins - 1))
}

/// Bin token for a distance in [0, table diagonal].
pub fn tokenize_distance(d: f64, cfg: &TokenConfig, geom: &TableGeometry) -> Result<u16> {
    let diag = geom.diagonal();
    if !(0.0..=diag * (1.0 + 1e-12)).contains(&d) {
        return Err(Error::Tokenize(format!("distance {d} outside [0, {diag}]")));
    }
    let bins = (diag / cfg.distance_granularity).ceil() as u16;
    Ok(((d / cfg.distance_granularity) as u16).min(bins - 1))
}

/// Token rows of a layout, padded to the game's ball count.
///
/// Row `i` holds ball number `i`; rows of absent balls are all-PAD, and the
/// cue row's two shot slots are NA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub game: GameSpec,
    /// `game.n * 27` global token ids, row-major.
    pub tokens: Vec<u16>,
}

impl TokenSequence {
    pub fn n(&self) -> usize {
        self.game.n
    }

    pub fn row(&self, number: usize) -> &[u16] {
        &self.tokens[number * SLOTS_PER_BALL..(number + 1) * SLOTS_PER_BALL]
    }
}

/// Tokenizes an extracted feature table into the padded sequence.
pub fn tokenize_layout(
    features: &FeatureTable,
    game: GameSpec,
    vocab: &Vocabulary,
    geom: &TableGeometry,
) -> Result<TokenSequence> {
    game.validate()?;
    let cfg = &vocab.config;
    let mut tokens = vec![0u16; game.n * SLOTS_PER_BALL];
    for slot in 0..SLOTS_PER_BALL {
        let pad = vocab.pad(slot_family(slot));
        for number in 0..game.n {
            tokens[number * SLOTS_PER_BALL + slot] = pad;
        }
    }
    for row in &features.rows {
        let number = usize::from(row.num);
        if number >= game.n {
            return Err(Error::Tokenize(format!(
                "ball {} outside the {}-ball game",
                row.num, game.n
            )));
        }
        let out = &mut tokens[number * SLOTS_PER_BALL..(number + 1) * SLOTS_PER_BALL];
        out[0] = vocab.global(Family::Position, tokenize_position(row.x, row.y, cfg, geom)?);
        for (j, pf) in row.pockets.iter().enumerate() {
            out[1 + 4 * j] = vocab.global(
                Family::CushionAngle,
                tokenize_angle(pf.cushion_angle, cfg, AngleKind::Cushion)?,
            );
            out[2 + 4 * j] =
                vocab.global(Family::Distance, tokenize_distance(pf.distance, cfg, geom)?);
            out[3 + 4 * j] = vocab.global(Family::Occlusion, u16::from(pf.occluded));
            out[4 + 4 * j] =
                vocab.global(Family::PocketIndex, u16::from(pf.pocket.get()) - 1);
        }
        match row.shot {
            Some(shot) => {
                out[25] = vocab.global(
                    Family::ShotAngle,
                    tokenize_angle(shot.angle, cfg, AngleKind::Shot)?,
                );
                out[26] =
                    vocab.global(Family::ShotPocket, u16::from(shot.pocket.get()) - 1);
            }
            None => {
                if row.num != CUE_NUMBER {
                    return Err(Error::Tokenize(format!(
                        "object ball {} lacks shot features",
                        row.num
                    )));
                }
                out[25] = vocab.na(Family::ShotAngle).expect("shot NA");
                out[26] = vocab.na(Family::ShotPocket).expect("shot NA");
            }
        }
    }
    Ok(TokenSequence { game, tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::extract_features;
    use crate::layout::{Ball, Layout};

    fn setup() -> (TokenConfig, TableGeometry, Vocabulary) {
        let cfg = TokenConfig::default();
        let geom = TableGeometry::standard();
        let vocab = Vocabulary::new(cfg, &geom).unwrap();
        (cfg, geom, vocab)
    }

    #[test]
    fn default_vocabulary_counts() {
        let (_, _, vocab) = setup();
        assert_eq!(vocab.bins(Family::Position), 98);
        assert_eq!(vocab.family_size(Family::Position), 99);
        assert_eq!(vocab.bins(Family::CushionAngle), 6);
        assert_eq!(vocab.bins(Family::ShotAngle), 12);
        assert_eq!(vocab.bins(Family::Distance), 23);
        assert_eq!(vocab.bins(Family::Occlusion), 2);
        assert_eq!(vocab.bins(Family::PocketIndex), 6);
        assert_eq!(vocab.family_size(Family::ShotAngle), 14);
        assert_eq!(vocab.family_size(Family::ShotPocket), 8);
        assert_eq!(vocab.total(), 99 + 7 + 24 + 3 + 7 + 14 + 8);
    }

    #[test]
    fn position_tokens_row_major_with_edge_clamp() {
        let (cfg, geom, _) = setup();
        assert_eq!(tokenize_position(0.0, 0.0, &cfg, &geom).unwrap(), 0);
        // col 5, row 5 on a 14-column grid.
        assert_eq!(tokenize_position(88.06, 76.02, &cfg, &geom).unwrap(), 75);
        assert_eq!(tokenize_position(200.0, 100.0, &cfg, &geom).unwrap(), 97);
        assert!(tokenize_position(200.1, 50.0, &cfg, &geom).is_err());
        // Exact-divisor geometry needs the clamp.
        let cfg20 = TokenConfig {
            cell_size: 20.0,
            ..cfg
        };
        assert_eq!(tokenize_position(200.0, 100.0, &cfg20, &geom).unwrap(), 49);
    }

    #[test]
    fn angle_tokens_with_clamp() {
        let (cfg, _, _) = setup();
        assert_eq!(tokenize_angle(40.80, &cfg, AngleKind::Cushion).unwrap(), 2);
        assert_eq!(tokenize_angle(0.0, &cfg, AngleKind::Cushion).unwrap(), 0);
        assert_eq!(tokenize_angle(90.0, &cfg, AngleKind::Cushion).unwrap(), 5);
        assert_eq!(tokenize_angle(180.0, &cfg, AngleKind::Shot).unwrap(), 11);
        assert!(tokenize_angle(91.0, &cfg, AngleKind::Cushion).is_err());
    }

    #[test]
    fn distance_tokens_with_clamp() {
        let (cfg, geom, _) = setup();
        assert_eq!(tokenize_distance(116.33, &cfg, &geom).unwrap(), 11);
        assert_eq!(tokenize_distance(0.0, &cfg, &geom).unwrap(), 0);
        assert_eq!(tokenize_distance(geom.diagonal(), &cfg, &geom).unwrap(), 22);
        assert!(tokenize_distance(-1.0, &cfg, &geom).is_err());
    }

    #[test]
    fn monotone_distance_binning() {
        let (cfg, geom, _) = setup();
        let mut last = 0;
        for i in 0..2000 {
            let d = geom.diagonal() * f64::from(i) / 2000.0;
            let bin = tokenize_distance(d, &cfg, &geom).unwrap();
            assert!(bin >= last);
            last = bin;
        }
    }

    #[test]
    fn cell_center_stays_in_bounds() {
        let (cfg, geom, vocab) = setup();
        for token in 0..vocab.bins(Family::Position) as u16 {
            let (x, y) = cell_center(token, &cfg, &geom);
            assert!(geom.contains(x, y), "token {token} -> ({x}, {y})");
            assert_eq!(tokenize_position(x, y, &cfg, &geom).unwrap(), token);
        }
    }

    #[test]
    fn layout_rows_padded_and_cue_na() {
        let (_, geom, vocab) = setup();
        let layout = Layout::new(
            "t",
            vec![
                Ball::new(0, 20.0, 20.0),
                Ball::new(2, 88.06, 76.02),
                Ball::new(7, 120.0, 60.0),
                Ball::new(9, 180.0, 20.0),
            ],
        );
        let features = extract_features(&layout, &geom).unwrap();
        let seq = tokenize_layout(&features, GameSpec::nine_ball(), &vocab, &geom).unwrap();
        assert_eq!(seq.tokens.len(), 10 * SLOTS_PER_BALL);
        for missing in [1usize, 3, 4, 5, 6, 8] {
            for (slot, token) in seq.row(missing).iter().enumerate() {
                assert_eq!(*token, vocab.pad(slot_family(slot)), "row {missing} slot {slot}");
            }
        }
        assert_eq!(seq.row(0)[25], vocab.na(Family::ShotAngle).unwrap());
        assert_eq!(seq.row(0)[26], vocab.na(Family::ShotPocket).unwrap());
        // Present rows contain no PAD anywhere.
        for present in [0usize, 2, 7, 9] {
            for (slot, token) in seq.row(present).iter().enumerate() {
                assert_ne!(*token, vocab.pad(slot_family(slot)), "row {present} slot {slot}");
            }
        }
        // Worked example: ball 2 position cell 75, pocket-1 cushion bin 2,
        // distance bin 11.
        assert_eq!(seq.row(2)[0], vocab.global(Family::Position, 75));
        assert_eq!(seq.row(2)[1], vocab.global(Family::CushionAngle, 2));
        assert_eq!(seq.row(2)[2], vocab.global(Family::Distance, 11));
    }

    #[test]
    fn full_layout_has_no_pad_outside_missing_rows() {
        let (_, geom, vocab) = setup();
        let balls = vec![
            Ball::new(0, 10.0, 10.0),
            Ball::new(1, 30.0, 30.0),
            Ball::new(2, 50.0, 50.0),
            Ball::new(3, 70.0, 70.0),
            Ball::new(4, 90.0, 90.0),
            Ball::new(5, 110.0, 10.0),
            Ball::new(6, 130.0, 30.0),
            Ball::new(7, 150.0, 50.0),
            Ball::new(8, 170.0, 70.0),
            Ball::new(9, 190.0, 90.0),
        ];
        let layout = Layout::new("full", balls);
        let features = extract_features(&layout, &geom).unwrap();
        let seq = tokenize_layout(&features, GameSpec::nine_ball(), &vocab, &geom).unwrap();
        for number in 0..10 {
            for (slot, token) in seq.row(number).iter().enumerate() {
                assert_ne!(*token, vocab.pad(slot_family(slot)));
            }
        }
    }

    #[test]
    fn ball_outside_game_rejected() {
        let (_, geom, vocab) = setup();
        let layout = Layout::new(
            "t",
            vec![Ball::new(0, 20.0, 20.0), Ball::new(7, 120.0, 60.0)],
        );
        let features = extract_features(&layout, &geom).unwrap();
        let err = tokenize_layout(&features, GameSpec { n: 5 }, &vocab, &geom).unwrap_err();
        assert!(err.to_string().contains("outside"));
    }
}
