//! Synthetic break-shot layouts with planted outcome labels.
//!
//! Each layout comes from one of two equally likely post-break regimes: an
//! "open" table (object balls drift toward rails and pockets, clear sight
//! lines) or a "congested" one (balls bunched around the table center, far
//! from every pocket and often blocking each other). The cue ball lands
//! mostly in the left half in both. Labels are planted from a difficulty
//! score built on the same geometric quantities the feature extractor
//! reports, so they are learnable from features, and the two regimes make
//! the score distribution bimodal, so the two label classes form real
//! clusters:
//!
//! - difficulty = w1 * mean shot angle + w2 * mean min-pocket distance
//!   + w3 * occlusion fraction + small noise (components normalized to ~[0,1])
//! - clear  = difficulty below the batch median (so the clear rate is ~50%)
//! - win    = clear, or a 0.2-probability coin flip otherwise
//! - potted = decreasing in the difficulty percentile, clipped to [0, 9]
//!
//! Generation is deterministic given the seed: each layout draws from its own
//! derived ChaCha stream, so the output is reproducible across runs and
//! platforms.

use crate::error::{Error, Result};
use crate::features;
use crate::geom::{PocketIndex, TableGeometry};
use crate::layout::{round2, Ball, GameLabels, Layout, MAX_BALL_NUMBER};
use crate::rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    /// Weights of (mean shot angle, mean min-pocket distance, occlusion
    /// fraction) in the planted difficulty score.
    pub clear_weights: [f64; 3],
    pub min_object_balls: usize,
    pub max_object_balls: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 500,
            seed: 0,
            clear_weights: [0.5, 0.3, 0.2],
            min_object_balls: 5,
            max_object_balls: 9,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::Config("synthetic count must be positive".into()));
        }
        if self.min_object_balls < 1
            || self.max_object_balls > MAX_BALL_NUMBER as usize
            || self.min_object_balls > self.max_object_balls
        {
            return Err(Error::Config(format!(
                "object-ball range [{}, {}] invalid",
                self.min_object_balls, self.max_object_balls
            )));
        }
        Ok(())
    }
}

const PLACE_ATTEMPTS: usize = 400;
/// Gap margin above the contact distance so 2-decimal rounding cannot
/// re-introduce an overlap.
const PLACE_MARGIN: f64 = 0.05;
const LABEL_NOISE_STD: f64 = 0.005;

fn truncated_normal(rng: &mut rng::Rng, mean: f64, std: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..64 {
        let v = rng::normal(rng, mean, std);
        if v >= lo && v <= hi {
            return v;
        }
    }
    rng.gen_range(lo..=hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Open,
    Congested,
}

fn place_ball(
    rng: &mut rng::Rng,
    geom: &TableGeometry,
    placed: &[Ball],
    num: u8,
    regime: Regime,
) -> Result<Ball> {
    let min_dist = 2.0 * geom.ball_radius + PLACE_MARGIN;
    for _ in 0..PLACE_ATTEMPTS {
        let (x, y) = if num == 0 {
            (
                truncated_normal(rng, geom.length * 0.3, geom.length * 0.2, 0.0, geom.length),
                truncated_normal(rng, geom.width * 0.5, geom.width * 0.25, 0.0, geom.width),
            )
        } else {
            match regime {
                Regime::Open => {
                    if rng.gen_bool(0.4) {
                        (
                            rng.gen_range(0.0..=geom.length),
                            rng.gen_range(0.0..=geom.width),
                        )
                    } else {
                        // Drift toward a random pocket mouth.
                        let pocket = crate::geom::PocketIndex::ALL[rng.gen_range(0..6)];
                        let (px, py) = geom.pocket(pocket);
                        (
                            truncated_normal(rng, px, geom.length * 0.09, 0.0, geom.length),
                            truncated_normal(rng, py, geom.width * 0.12, 0.0, geom.width),
                        )
                    }
                }
                Regime::Congested => {
                    if rng.gen_bool(0.08) {
                        (
                            rng.gen_range(0.0..=geom.length),
                            rng.gen_range(0.0..=geom.width),
                        )
                    } else {
                        // Bunched around the table center, far from pockets.
                        (
                            truncated_normal(
                                rng,
                                geom.length * 0.5,
                                geom.length * 0.10,
                                0.0,
                                geom.length,
                            ),
                            truncated_normal(rng, geom.width * 0.5, geom.width * 0.16, 0.0, geom.width),
                        )
                    }
                }
            }
        };
        let ball = Ball::new(num, round2(x), round2(y));
        if placed.iter().all(|b| b.distance_to(&ball) >= min_dist) {
            return Ok(ball);
        }
    }
    Err(Error::PlacementExhausted {
        attempts: PLACE_ATTEMPTS,
    })
}

/// Draws `m` distinct object-ball numbers via partial Fisher-Yates.
fn draw_object_numbers(rng: &mut rng::Rng, m: usize) -> Vec<u8> {
    let mut pool: Vec<u8> = (1..=MAX_BALL_NUMBER).collect();
    for i in 0..m {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut chosen = pool[..m].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Normalized planted-difficulty score of one layout, before noise.
pub fn difficulty_components(layout: &Layout, geom: &TableGeometry) -> Result<[f64; 3]> {
    let table = features::extract_features(layout, geom)?;
    let mut shot_sum = 0.0;
    let mut shot_count = 0usize;
    let mut min_dist_sum = 0.0;
    let mut occlusions = 0usize;
    for row in &table.rows {
        if let Some(shot) = row.shot {
            shot_sum += shot.angle;
            shot_count += 1;
        }
        let min_dist = row
            .pockets
            .iter()
            .map(|p| p.distance)
            .fold(f64::INFINITY, f64::min);
        min_dist_sum += min_dist;
        occlusions += row.pockets.iter().filter(|p| p.occluded).count();
    }
    let balls = table.rows.len() as f64;
    // Farthest any point can be from all pockets is about w/sqrt(2).
    let dist_scale = geom.width / std::f64::consts::SQRT_2;
    Ok([
        shot_sum / shot_count.max(1) as f64 / 180.0,
        min_dist_sum / balls / dist_scale,
        occlusions as f64 / (balls * PocketIndex::ALL.len() as f64),
    ])
}

/// Generates `config.count` valid labeled layouts, deterministically.
pub fn generate_synthetic(config: &SynthConfig, geom: &TableGeometry) -> Result<Vec<Layout>> {
    config.validate()?;
    geom.validate()?;
    let mut layouts = Vec::with_capacity(config.count);
    let mut difficulties = Vec::with_capacity(config.count);
    for idx in 0..config.count {
        let mut rng = rng::derive(config.seed, idx as u64 * 2);
        let regime = if rng.gen_bool(0.5) {
            Regime::Open
        } else {
            Regime::Congested
        };
        let m = rng.gen_range(config.min_object_balls..=config.max_object_balls);
        let numbers = draw_object_numbers(&mut rng, m);
        let mut balls: Vec<Ball> = Vec::with_capacity(m + 1);
        balls.push(place_ball(&mut rng, geom, &[], 0, regime)?);
        for num in numbers {
            let ball = place_ball(&mut rng, geom, &balls, num, regime)?;
            balls.push(ball);
        }
        let layout = Layout::new(format!("syn-{}-{:06}", config.seed, idx), balls);
        let comps = difficulty_components(&layout, geom)?;
        let mut label_rng = rng::derive(config.seed, idx as u64 * 2 + 1);
        let noise = rng::normal(&mut label_rng, 0.0, LABEL_NOISE_STD);
        let difficulty = config
            .clear_weights
            .iter()
            .zip(comps)
            .map(|(w, c)| w * c)
            .sum::<f64>()
            + noise;
        difficulties.push(difficulty);
        layouts.push(layout);
    }

    let mut sorted = difficulties.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite difficulty"));
    let median = sorted[config.count / 2];
    // Percentile rank for the potted-count curve.
    let rank_of = |d: f64| sorted.partition_point(|x| *x < d) as f64 / config.count.max(1) as f64;

    for (idx, layout) in layouts.iter_mut().enumerate() {
        let mut label_rng = rng::derive(config.seed, idx as u64 * 2 + 1);
        let _ = rng::normal(&mut label_rng, 0.0, 1.0); // skip the noise draw
        let difficulty = difficulties[idx];
        let clear = difficulty < median;
        let win = clear || label_rng.gen_bool(0.2);
        let pct = rank_of(difficulty);
        let jitter = match label_rng.gen_range(0..4) {
            0 => -1.0,
            1 | 2 => 0.0,
            _ => 1.0,
        };
        let potted = ((1.0 - pct) * 9.0 + jitter).round().clamp(0.0, 9.0) as u8;
        layout.labels = Some(GameLabels {
            clear: Some(clear),
            win: Some(win),
            potted: Some(potted),
        });
    }
    Ok(layouts)
}
