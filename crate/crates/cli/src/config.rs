//! TOML run configuration. Every setting has a built-in default, may be
//! overridden by a config file, and again by a command-line flag:
//! flags > file > defaults.

use anyhow::{Context, Result};
use blkit::blcnn::TrainSchedule;
use blkit::bl2vec::{PerturbConfig, TripletConfig};
use blkit::blgan::{BlganConfig, GeneratorConfig};
use blkit::{NetConfig, SynthConfig, TableGeometry, TokenConfig};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub table: TableSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub tokenizer: TokenizerSection,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default)]
    pub triplet: TripletSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub blgan: BlganSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub length: Option<f64>,
    pub width: Option<f64>,
    pub ball_radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub count: Option<usize>,
    pub clear_weights: Option<[f64; 3]>,
    pub min_object_balls: Option<usize>,
    pub max_object_balls: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSection {
    pub cell_size: Option<f64>,
    pub angle_granularity: Option<f64>,
    pub distance_granularity: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    pub embed_dim: Option<usize>,
    pub filters_total: Option<usize>,
    pub max_filter_width: Option<usize>,
    pub l2_lambda: Option<f64>,
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSection {
    pub margin: Option<f64>,
    pub positive_noise: Option<f64>,
    pub positive_drop: Option<f64>,
    pub negative_noise: Option<f64>,
    pub negative_drop: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub patience: Option<usize>,
    pub eval_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub patience: Option<usize>,
    pub eval_every: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlganSection {
    pub generator_steps: Option<usize>,
    pub batch_size: Option<usize>,
    pub hidden: Option<usize>,
    pub token_embed: Option<usize>,
    pub generator_learning_rate: Option<f64>,
    pub discriminator_learning_rate: Option<f64>,
    pub baseline_decay: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }

    pub fn table(&self) -> TableGeometry {
        let d = TableGeometry::standard();
        TableGeometry {
            length: self.table.length.unwrap_or(d.length),
            width: self.table.width.unwrap_or(d.width),
            ball_radius: self.table.ball_radius.unwrap_or(d.ball_radius),
        }
    }

    pub fn synth(&self, count: Option<usize>, seed: u64) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            count: count.or(self.synth.count).unwrap_or(d.count),
            seed,
            clear_weights: self.synth.clear_weights.unwrap_or(d.clear_weights),
            min_object_balls: self.synth.min_object_balls.unwrap_or(d.min_object_balls),
            max_object_balls: self.synth.max_object_balls.unwrap_or(d.max_object_balls),
        }
    }

    pub fn tokenizer(&self) -> TokenConfig {
        let d = TokenConfig::default();
        TokenConfig {
            cell_size: self.tokenizer.cell_size.unwrap_or(d.cell_size),
            angle_granularity: self
                .tokenizer
                .angle_granularity
                .unwrap_or(d.angle_granularity),
            distance_granularity: self
                .tokenizer
                .distance_granularity
                .unwrap_or(d.distance_granularity),
        }
    }

    pub fn net(&self, learning_rate: Option<f64>, seed: u64) -> NetConfig {
        let d = NetConfig::default();
        let total = self.net.filters_total.unwrap_or(d.filter_widths.len());
        let max_width = self.net.max_filter_width.unwrap_or(7);
        NetConfig {
            embed_dim: self.net.embed_dim.unwrap_or(d.embed_dim),
            filter_widths: blkit::nn::encoder::default_filter_widths(total, max_width),
            l2_lambda: self.net.l2_lambda.unwrap_or(d.l2_lambda),
            learning_rate: learning_rate
                .or(self.net.learning_rate)
                .unwrap_or(d.learning_rate),
            seed,
        }
    }

    pub fn triplet(&self, epochs: Option<usize>, seed: u64) -> TripletConfig {
        let d = TripletConfig::default();
        let t = &self.triplet;
        TripletConfig {
            margin: t.margin.unwrap_or(d.margin),
            positive: PerturbConfig::new(
                t.positive_noise.unwrap_or(d.positive.noise_rate),
                t.positive_drop.unwrap_or(d.positive.drop_rate),
                0,
            ),
            negative: PerturbConfig::new(
                t.negative_noise.unwrap_or(d.negative.noise_rate),
                t.negative_drop.unwrap_or(d.negative.drop_rate),
                0,
            ),
            epochs: epochs.or(t.epochs).unwrap_or(d.epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            validation_fraction: t.validation_fraction.unwrap_or(d.validation_fraction),
            patience: t.patience.unwrap_or(d.patience),
            eval_every: t.eval_every.unwrap_or(d.eval_every),
            seed,
        }
    }

    pub fn schedule(&self, epochs: Option<usize>, seed: u64) -> TrainSchedule {
        let d = TrainSchedule::default();
        let s = &self.schedule;
        TrainSchedule {
            epochs: epochs.or(s.epochs).unwrap_or(d.epochs),
            batch_size: s.batch_size.unwrap_or(d.batch_size),
            validation_fraction: s.validation_fraction.unwrap_or(d.validation_fraction),
            patience: s.patience.unwrap_or(d.patience),
            eval_every: s.eval_every.unwrap_or(d.eval_every),
            seed,
        }
    }

    pub fn blgan(&self, steps: Option<usize>, seed: u64) -> BlganConfig {
        let d = BlganConfig::default();
        let g = &self.blgan;
        BlganConfig {
            generator_steps: steps.or(g.generator_steps).unwrap_or(d.generator_steps),
            batch_size: g.batch_size.unwrap_or(d.batch_size),
            generator: GeneratorConfig {
                hidden: g.hidden.unwrap_or(d.generator.hidden),
                token_embed: g.token_embed.unwrap_or(d.generator.token_embed),
                learning_rate: g
                    .generator_learning_rate
                    .unwrap_or(d.generator.learning_rate),
                seed,
            },
            disc_net: NetConfig {
                learning_rate: g
                    .discriminator_learning_rate
                    .unwrap_or(d.disc_net.learning_rate),
                seed,
                ..d.disc_net
            },
            baseline_decay: g.baseline_decay.unwrap_or(d.baseline_decay),
            seed,
        }
    }
}
