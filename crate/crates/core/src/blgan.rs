//! Layout generation: a recurrent location-token generator trained with
//! policy gradient against a convolutional discriminator.
//!
//! The corpus of cleared layouts is split by the prediction model's clear
//! score into a high-score half (G1, the discriminator's real examples) and
//! a low-score half (G2, which supplies the empirical break-pattern
//! distribution). The generator turns a break pattern into an initial hidden
//! state and emits one grid-cell token per remaining ball, masking used
//! cells so decoded layouts never overlap. Rewards arrive only after a full
//! layout is generated: the discriminator's real-probability, shared across
//! all steps of the episode.

use crate::blcnn::BlcnnModel;
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::geom::TableGeometry;
use crate::layout::{Ball, GameSpec, Layout, CUE_NUMBER};
use crate::nn::gru::{GruCell, GruStepCache};
use crate::nn::layers::Dense;
use crate::nn::{losses, Adam, AdamConfig, Encoder, EncoderCache, NetConfig, ParamId, ParamLayout, ParamSet};
use crate::rng::{self};
use crate::tokenizer::{cell_center, tokenize_layout, Family, TokenConfig, Vocabulary};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Object-ball numbers already potted (absent) in a break-shot layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BreakPattern {
    missing: Vec<u8>,
}

impl BreakPattern {
    pub fn new(mut missing: Vec<u8>, game: GameSpec) -> Result<Self> {
        missing.sort_unstable();
        missing.dedup();
        if missing.iter().any(|m| *m == 0 || usize::from(*m) >= game.n) {
            return Err(Error::Config(format!(
                "break pattern {missing:?} outside the game's object balls"
            )));
        }
        Ok(BreakPattern { missing })
    }

    pub fn from_layout(layout: &Layout, game: GameSpec) -> Self {
        let missing = game
            .object_numbers()
            .filter(|n| layout.ball(*n).is_none())
            .collect();
        BreakPattern { missing }
    }

    pub fn missing(&self) -> &[u8] {
        &self.missing
    }

    /// Ball numbers of a layout realizing this pattern: cue plus the
    /// remaining objects ascending.
    pub fn present_numbers(&self, game: GameSpec) -> Vec<u8> {
        std::iter::once(CUE_NUMBER)
            .chain(game.object_numbers().filter(|n| !self.missing.contains(n)))
            .collect()
    }

    /// Episode length: one token per present ball.
    pub fn episode_len(&self, game: GameSpec) -> usize {
        game.n - self.missing.len()
    }

    /// Fixed-width indicator over the object balls, 1 at missing numbers.
    pub fn indicator(&self, game: GameSpec) -> Vec<f32> {
        game.object_numbers()
            .map(|n| f32::from(u8::from(self.missing.contains(&n))))
            .collect()
    }
}

impl std::fmt::Display for BreakPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, m) in self.missing.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, ")")
    }
}

/// Cleared layouts split into a high-score and a low-score half.
#[derive(Debug, Clone)]
pub struct ScoreSplit {
    pub g1: Vec<Layout>,
    pub g2: Vec<Layout>,
}

/// Scores every layout with the clear-task model, sorts descending (ties by
/// id) and assigns the top floor(N/2) to G1.
pub fn split_by_score(clear_layouts: &[Layout], scorer: &BlcnnModel) -> Result<ScoreSplit> {
    if clear_layouts.is_empty() {
        return Err(Error::Config("score split over an empty corpus".into()));
    }
    for layout in clear_layouts {
        if layout.labels.and_then(|l| l.clear) != Some(true) {
            return Err(Error::Config(format!(
                "layout `{}` is not clear-labeled",
                layout.id
            )));
        }
    }
    let mut scored: Vec<(f64, &Layout)> = clear_layouts
        .iter()
        .map(|l| Ok((scorer.clear_score(l)?, l)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite scores")
            .then_with(|| a.1.id.cmp(&b.1.id))
    });
    let top = clear_layouts.len() / 2;
    Ok(ScoreSplit {
        g1: scored[..top].iter().map(|(_, l)| (*l).clone()).collect(),
        g2: scored[top..].iter().map(|(_, l)| (*l).clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub hidden: usize,
    pub token_embed: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            hidden: 64,
            token_embed: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// One sampled generation: the pattern, the distinct location tokens, their
/// sampling log-probabilities and the episode reward (shared by every step).
#[derive(Debug, Clone)]
pub struct Episode {
    pub pattern: BreakPattern,
    pub tokens: Vec<u16>,
    pub log_probs: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub cfg: GeneratorConfig,
    pub token: TokenConfig,
    pub geom: TableGeometry,
    pub game: GameSpec,
}

/// GRU policy over grid-cell tokens, seeded by a break-pattern embedding.
#[derive(Debug)]
pub struct GeneratorModel {
    pub meta: GeneratorMeta,
    /// Location vocabulary: the tokenizer's position cells.
    pub vocab_len: usize,
    pattern_proj: Dense,
    token_table: ParamId,
    gru: GruCell,
    out: Dense,
    pub params: ParamSet<f32>,
}

pub const GENERATOR_KIND: &str = "blgan-generator";

/// Start-of-sequence row index in the token-input table.
fn start_row(vocab_len: usize) -> usize {
    vocab_len
}

impl GeneratorModel {
    pub fn new(meta: GeneratorMeta) -> Result<Self> {
        meta.geom.validate()?;
        meta.game.validate()?;
        let vocab = Vocabulary::new(meta.token, &meta.geom)?;
        let vocab_len = vocab.bins(Family::Position);
        if vocab_len < meta.game.n {
            return Err(Error::Config(format!(
                "{} position cells cannot seat {} balls",
                vocab_len, meta.game.n
            )));
        }
        // Decoded cell centers must respect the non-overlap invariant even in
        // the shrunken edge cells.
        let min_gap = |side: f64, cell: f64| {
            let cols = (side / cell).ceil();
            let rem = side - (cols - 1.0) * cell;
            if cols > 1.0 {
                (cell + rem) / 2.0
            } else {
                f64::INFINITY
            }
        };
        let gap = min_gap(meta.geom.length, meta.token.cell_size)
            .min(min_gap(meta.geom.width, meta.token.cell_size));
        if gap < 2.0 * meta.geom.ball_radius {
            return Err(Error::Config(format!(
                "cell grid too fine: decoded centers {gap} apart can overlap balls"
            )));
        }
        let cfg = meta.cfg.clone();
        let mut builder = ParamLayout::builder();
        let pattern_proj = Dense::new(&mut builder, "pattern", meta.game.n - 1, cfg.hidden);
        let token_table = builder.add("token_table", &[vocab_len + 1, cfg.token_embed]);
        let gru = GruCell::new(&mut builder, "gru", cfg.token_embed, cfg.hidden);
        let out = Dense::new(&mut builder, "out", cfg.hidden, vocab_len);
        let mut params = ParamSet::<f32>::zeros(builder.build());
        let mut rng = rng::derive(cfg.seed, 0x6E9);
        pattern_proj.init(&mut params, &mut rng);
        crate::nn::init::uniform(&mut params, token_table, crate::nn::init::EMBED_BOUND, &mut rng);
        gru.init(&mut params, &mut rng);
        out.init(&mut params, &mut rng);
        Ok(GeneratorModel {
            meta,
            vocab_len,
            pattern_proj,
            token_table,
            gru,
            out,
            params,
        })
    }

    fn initial_hidden(&self, pattern: &BreakPattern) -> Vec<f32> {
        let ind = pattern.indicator(self.meta.game);
        let mut h = vec![0.0f32; self.meta.cfg.hidden];
        self.pattern_proj.forward(&self.params, &ind, &mut h);
        for v in h.iter_mut() {
            *v = v.tanh();
        }
        h
    }

    fn token_input(&self, token: Option<u16>) -> &[f32] {
        let row = token.map_or(start_row(self.vocab_len), usize::from);
        let d = self.meta.cfg.token_embed;
        &self.params.get(self.token_table)[row * d..(row + 1) * d]
    }

    /// Masked output distribution over unused cells.
    fn step_probs(&self, h: &[f32], used: &[bool]) -> Vec<f32> {
        let mut logits = vec![0.0f32; self.vocab_len];
        self.out.forward(&self.params, h, &mut logits);
        masked_softmax(&logits, used)
    }

    /// Samples one layout for a break pattern. Tokens are pairwise distinct;
    /// the decoded layout realizes the pattern exactly.
    pub fn sample(&self, pattern: &BreakPattern, seed: u64) -> Result<(Episode, Layout)> {
        let steps = pattern.episode_len(self.meta.game);
        let mut rng = rng::root(seed);
        let mut used = vec![false; self.vocab_len];
        let mut h = self.initial_hidden(pattern);
        let mut next_h = vec![0.0f32; h.len()];
        let mut tokens = Vec::with_capacity(steps);
        let mut log_probs = Vec::with_capacity(steps);
        let mut prev: Option<u16> = None;
        for _ in 0..steps {
            let x = self.token_input(prev).to_vec();
            self.gru.forward(&self.params, &x, &h, &mut next_h, None);
            std::mem::swap(&mut h, &mut next_h);
            let probs = self.step_probs(&h, &used);
            let pick = sample_index(&probs, rng.gen::<f64>());
            used[pick] = true;
            tokens.push(pick as u16);
            log_probs.push(f64::from(probs[pick].max(1e-30)).ln());
            prev = Some(pick as u16);
        }
        let layout = self.decode(pattern, &tokens, seed);
        Ok((
            Episode {
                pattern: pattern.clone(),
                tokens,
                log_probs,
                reward: 0.0,
            },
            layout,
        ))
    }

    /// Decodes tokens to cell-center coordinates: first token is the cue,
    /// the rest go to the remaining object numbers ascending.
    fn decode(&self, pattern: &BreakPattern, tokens: &[u16], seed: u64) -> Layout {
        let numbers = pattern.present_numbers(self.meta.game);
        debug_assert_eq!(numbers.len(), tokens.len());
        let balls = numbers
            .iter()
            .zip(tokens)
            .map(|(num, token)| {
                let (x, y) = cell_center(*token, &self.meta.token, &self.meta.geom);
                Ball::new(*num, x, y)
            })
            .collect();
        let mut layout = Layout::new(format!("gen-{seed:016x}"), balls);
        layout.remarks = Some("generated".into());
        layout
    }

    /// Policy-gradient step over a batch of episodes with a shared baseline:
    /// minimizes `-(reward - baseline) * sum_t log pi(c_t)` averaged over the
    /// batch. Returns the mean surrogate loss.
    pub fn reinforce_update(
        &mut self,
        episodes: &[Episode],
        baseline: f64,
        adam: &mut Adam<f32>,
    ) -> Result<f64> {
        if episodes.is_empty() {
            return Ok(0.0);
        }
        for e in episodes {
            if !e.reward.is_finite() {
                return Err(Error::NonFinite("episode reward".into()));
            }
        }
        let mut grads = self.params.grad_buffer();
        let scale = 1.0f32 / episodes.len() as f32;
        let mut surrogate = 0.0f64;
        let d = self.meta.cfg.token_embed;
        let hid = self.meta.cfg.hidden;
        for episode in episodes {
            let adv = (episode.reward - baseline) as f32;
            let steps = episode.tokens.len();
            // Replay the episode with caches.
            let ind = episode.pattern.indicator(self.meta.game);
            let mut h0_pre = vec![0.0f32; hid];
            self.pattern_proj.forward(&self.params, &ind, &mut h0_pre);
            let h0: Vec<f32> = h0_pre.iter().map(|v| v.tanh()).collect();
            let mut used = vec![false; self.vocab_len];
            let mut hs = Vec::with_capacity(steps + 1);
            hs.push(h0.clone());
            let mut caches: Vec<GruStepCache<f32>> = Vec::with_capacity(steps);
            let mut step_probs: Vec<Vec<f32>> = Vec::with_capacity(steps);
            let mut masks: Vec<Vec<bool>> = Vec::with_capacity(steps);
            let mut inputs: Vec<usize> = Vec::with_capacity(steps);
            for (t, token) in episode.tokens.iter().enumerate() {
                let prev = if t == 0 {
                    None
                } else {
                    Some(episode.tokens[t - 1])
                };
                inputs.push(prev.map_or(start_row(self.vocab_len), usize::from));
                let x = self.token_input(prev).to_vec();
                let mut cache = GruStepCache::default();
                let mut h_new = vec![0.0f32; hid];
                self.gru
                    .forward(&self.params, &x, &hs[t], &mut h_new, Some(&mut cache));
                caches.push(cache);
                masks.push(used.clone());
                let probs = self.step_probs(&h_new, &used);
                surrogate -= f64::from(adv) * f64::from(probs[usize::from(*token)].max(1e-30)).ln();
                step_probs.push(probs);
                hs.push(h_new);
                used[usize::from(*token)] = true;
            }
            // Backward through time.
            let mut dh = vec![0.0f32; hid];
            let mut dtable = vec![0.0f32; 0];
            dtable.resize((self.vocab_len + 1) * d, 0.0);
            for t in (0..steps).rev() {
                let token = usize::from(episode.tokens[t]);
                let probs = &step_probs[t];
                let mask = &masks[t];
                let mut dlogits = vec![0.0f32; self.vocab_len];
                for (j, dl) in dlogits.iter_mut().enumerate() {
                    if !mask[j] {
                        let indicator = if j == token { 1.0 } else { 0.0 };
                        *dl = adv * scale * (probs[j] - indicator);
                    }
                }
                self.out
                    .backward(&self.params, &hs[t + 1], &dlogits, Some(&mut dh), &mut grads);
                let mut dx = vec![0.0f32; d];
                let mut dh_prev = vec![0.0f32; hid];
                self.gru
                    .backward(&self.params, &caches[t], &dh, &mut dx, &mut dh_prev, &mut grads);
                let row = inputs[t];
                for (j, g) in dx.iter().enumerate() {
                    dtable[row * d + j] += *g;
                }
                dh = dh_prev;
            }
            // Pattern projection through the tanh.
            let mut da0 = vec![0.0f32; hid];
            for i in 0..hid {
                da0[i] = dh[i] * (1.0 - h0[i] * h0[i]);
            }
            self.pattern_proj
                .backward(&self.params, &ind, &da0, None, &mut grads);
            let spec = self.params.layout.spec(self.token_table);
            for (j, g) in dtable.iter().enumerate() {
                grads[spec.offset + j] += *g;
            }
        }
        adam.step(&mut self.params.data, &grads)?;
        Ok(surrogate / episodes.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, GENERATOR_KIND, &self.meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, raw): (GeneratorMeta, _) = checkpoint::load(path, GENERATOR_KIND)?;
        let fresh = GeneratorModel::new(meta)?;
        let params = raw.into_params(fresh.params.layout.clone())?;
        Ok(GeneratorModel { params, ..fresh })
    }
}

fn masked_softmax(logits: &[f32], used: &[bool]) -> Vec<f32> {
    let mut max = f32::NEG_INFINITY;
    for (l, u) in logits.iter().zip(used) {
        if !u && *l > max {
            max = *l;
        }
    }
    let mut probs = vec![0.0f32; logits.len()];
    let mut sum = 0.0f32;
    for ((p, l), u) in probs.iter_mut().zip(logits).zip(used) {
        if !u {
            *p = (l - max).exp();
            sum += *p;
        }
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    probs
}

/// Inverse-CDF sampling; `u` uniform in [0,1).
fn sample_index(probs: &[f32], u: f64) -> usize {
    let mut acc = 0.0f64;
    let mut last_valid = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_valid = i;
            acc += f64::from(*p);
            if u < acc {
                return i;
            }
        }
    }
    last_valid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorMeta {
    pub net: NetConfig,
    pub token: TokenConfig,
    pub geom: TableGeometry,
    pub game: GameSpec,
}

/// Encoder + sigmoid head judging whether a layout is a real high-score one.
#[derive(Debug)]
pub struct Discriminator {
    pub meta: DiscriminatorMeta,
    encoder: Encoder,
    head: Dense,
    pub params: ParamSet<f32>,
}

pub const DISCRIMINATOR_KIND: &str = "blgan-discriminator";

impl Discriminator {
    pub fn new(meta: DiscriminatorMeta) -> Result<Self> {
        let vocab = Vocabulary::new(meta.token, &meta.geom)?;
        let mut builder = ParamLayout::builder();
        let encoder = Encoder::build(&mut builder, &meta.net, vocab, meta.game)?;
        let head = Dense::new(&mut builder, "head", encoder.k(), 1);
        let mut params = ParamSet::<f32>::zeros(builder.build());
        let mut rng = rng::derive(meta.net.seed, 0xD15C);
        encoder.init(&mut params, &mut rng);
        head.init(&mut params, &mut rng);
        Ok(Discriminator {
            meta,
            encoder,
            head,
            params,
        })
    }

    fn logit(&self, layout: &Layout, cache: &mut EncoderCache<f32>) -> Result<f32> {
        let features = extract_features(layout, &self.meta.geom)?;
        let tokens = tokenize_layout(&features, self.meta.game, &self.encoder.vocab, &self.meta.geom)?;
        self.encoder.forward(&self.params, &tokens, cache);
        let mut out = [0.0f32];
        self.head.forward(&self.params, &cache.out, &mut out);
        Ok(out[0])
    }

    /// Probability that a layout is real.
    pub fn prob(&self, layout: &Layout) -> Result<f64> {
        let mut cache = EncoderCache::default();
        Ok(f64::from(losses::sigmoid(self.logit(layout, &mut cache)?)))
    }

    /// One BCE step on a real batch (target 1) and a fake batch (target 0).
    /// Returns the mean batch loss.
    pub fn update(
        &mut self,
        real: &[Layout],
        fake: &[Layout],
        adam: &mut Adam<f32>,
    ) -> Result<f64> {
        if real.is_empty() || fake.is_empty() {
            return Err(Error::Config("discriminator batches must be non-empty".into()));
        }
        let mut grads = self.params.grad_buffer();
        let mut cache = EncoderCache::default();
        let total = (real.len() + fake.len()) as f32;
        let mut loss = 0.0f64;
        for (batch, target) in [(real, true), (fake, false)] {
            for layout in batch {
                let features = extract_features(layout, &self.meta.geom)?;
                let tokens =
                    tokenize_layout(&features, self.meta.game, &self.encoder.vocab, &self.meta.geom)?;
                self.encoder.forward(&self.params, &tokens, &mut cache);
                let mut out = [0.0f32];
                self.head.forward(&self.params, &cache.out, &mut out);
                let (l, p) = losses::sigmoid_bce_with_logit(out[0], target);
                loss += f64::from(l);
                let dlogit = [losses::sigmoid_bce_grad(p, target) / total];
                let mut dvec = vec![0.0f32; self.encoder.k()];
                self.head
                    .backward(&self.params, &cache.out, &dlogit, Some(&mut dvec), &mut grads);
                self.encoder
                    .backward(&self.params, &tokens, &mut cache, &dvec, &mut grads);
            }
        }
        adam.step(&mut self.params.data, &grads)?;
        Ok(loss / f64::from(total))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, DISCRIMINATOR_KIND, &self.meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, raw): (DiscriminatorMeta, _) = checkpoint::load(path, DISCRIMINATOR_KIND)?;
        let fresh = Discriminator::new(meta)?;
        let params = raw.into_params(fresh.params.layout.clone())?;
        Ok(Discriminator { params, ..fresh })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlganConfig {
    pub generator_steps: usize,
    pub batch_size: usize,
    pub generator: GeneratorConfig,
    /// Discriminator stack; its learning rate and seed come from here.
    pub disc_net: NetConfig,
    pub baseline_decay: f64,
    pub seed: u64,
}

impl Default for BlganConfig {
    fn default() -> Self {
        BlganConfig {
            generator_steps: 5000,
            batch_size: 16,
            generator: GeneratorConfig::default(),
            disc_net: NetConfig {
                learning_rate: 1e-4,
                ..Default::default()
            },
            baseline_decay: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GanCurves {
    pub steps: Vec<u64>,
    pub mean_reward: Vec<f64>,
    pub disc_loss: Vec<f64>,
    pub diverged: bool,
}

pub struct BlganOutcome {
    pub generator: GeneratorModel,
    pub discriminator: Discriminator,
    pub split: ScoreSplit,
    pub curves: GanCurves,
}

/// Alternating training: sample a pattern batch from G2, generate G3, reward
/// with the discriminator, policy-gradient the generator, then one
/// discriminator step on G1 vs G3.
pub fn train_blgan(
    clear_layouts: &[Layout],
    scorer: &BlcnnModel,
    cfg: &BlganConfig,
) -> Result<BlganOutcome> {
    if cfg.batch_size == 0 || cfg.generator_steps == 0 {
        return Err(Error::Config("batch size and step budget must be positive".into()));
    }
    let split = split_by_score(clear_layouts, scorer)?;
    if split.g1.is_empty() || split.g2.is_empty() {
        return Err(Error::Config(format!(
            "score split too small ({} / {}); need at least two scored layouts",
            split.g1.len(),
            split.g2.len()
        )));
    }
    let game = scorer.meta.game;
    let patterns: Vec<BreakPattern> = split
        .g2
        .iter()
        .map(|l| BreakPattern::from_layout(l, game))
        .collect();
    let mut generator = GeneratorModel::new(GeneratorMeta {
        cfg: GeneratorConfig {
            seed: cfg.generator.seed ^ cfg.seed,
            ..cfg.generator.clone()
        },
        token: scorer.meta.token,
        geom: scorer.meta.geom,
        game,
    })?;
    let mut discriminator = Discriminator::new(DiscriminatorMeta {
        net: NetConfig {
            seed: cfg.disc_net.seed ^ cfg.seed.rotate_left(13),
            ..cfg.disc_net.clone()
        },
        token: scorer.meta.token,
        geom: scorer.meta.geom,
        game,
    })?;
    let mut gen_adam = Adam::<f32>::new(
        generator.params.data.len(),
        AdamConfig::new(cfg.generator.learning_rate, 0.0),
    );
    let mut disc_adam = Adam::<f32>::new(
        discriminator.params.data.len(),
        AdamConfig::new(cfg.disc_net.learning_rate, cfg.disc_net.l2_lambda),
    );
    let mut pick_rng = rng::derive(cfg.seed, 0x6A0);
    let mut baseline: Option<f64> = None;
    let mut curves = GanCurves::default();
    let mut last_good: Option<(Vec<f32>, Vec<f32>, u64)> = None;

    for step in 0..cfg.generator_steps as u64 {
        let mut episodes = Vec::with_capacity(cfg.batch_size);
        let mut generated = Vec::with_capacity(cfg.batch_size);
        for item in 0..cfg.batch_size {
            let pattern = &patterns[pick_rng.gen_range(0..patterns.len())];
            let seed = rng::mix(cfg.seed ^ rng::mix(step * cfg.batch_size as u64 + item as u64 + 1));
            let (mut episode, layout) = generator.sample(pattern, seed)?;
            episode.reward = discriminator.prob(&layout)?;
            episodes.push(episode);
            generated.push(layout);
        }
        let mean_reward =
            episodes.iter().map(|e| e.reward).sum::<f64>() / episodes.len() as f64;
        let b = *baseline.get_or_insert(mean_reward);
        let gen_result = generator.reinforce_update(&episodes, b, &mut gen_adam);
        baseline = Some(cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * mean_reward);

        let real: Vec<Layout> = (0..cfg.batch_size)
            .map(|_| split.g1[pick_rng.gen_range(0..split.g1.len())].clone())
            .collect();
        let disc_result = discriminator.update(&real, &generated, &mut disc_adam);

        match (gen_result, disc_result) {
            (Ok(_), Ok(disc_loss)) => {
                if step % 20 == 0 || step + 1 == cfg.generator_steps as u64 {
                    curves.steps.push(step + 1);
                    curves.mean_reward.push(mean_reward);
                    curves.disc_loss.push(disc_loss);
                }
                if step % 100 == 0 {
                    last_good = Some((
                        generator.params.data.clone(),
                        discriminator.params.data.clone(),
                        step,
                    ));
                }
            }
            (gen_r, disc_r) => {
                // Divergence: fall back to the last snapshot and stop.
                gen_r.and(disc_r.map(|_| ()))?;
                if let Some((g, d, _)) = last_good.take() {
                    generator.params.data = g;
                    discriminator.params.data = d;
                }
                curves.diverged = true;
                break;
            }
        }
    }
    Ok(BlganOutcome {
        generator,
        discriminator,
        split,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::validate_layout;

    fn meta(game_n: usize) -> GeneratorMeta {
        GeneratorMeta {
            cfg: GeneratorConfig {
                hidden: 16,
                token_embed: 8,
                seed: 3,
                ..Default::default()
            },
            token: TokenConfig::default(),
            geom: TableGeometry::standard(),
            game: GameSpec { n: game_n },
        }
    }

    #[test]
    fn episode_lengths_match_patterns() {
        let gen = GeneratorModel::new(meta(10)).unwrap();
        let game = GameSpec::nine_ball();
        let p46 = BreakPattern::new(vec![4, 6], game).unwrap();
        let (episode, layout) = gen.sample(&p46, 11).unwrap();
        assert_eq!(episode.tokens.len(), 8);
        assert_eq!(layout.ball_numbers(), vec![0, 1, 2, 3, 5, 7, 8, 9]);
        let empty = BreakPattern::new(vec![], game).unwrap();
        let (episode, layout) = gen.sample(&empty, 11).unwrap();
        assert_eq!(episode.tokens.len(), 10);
        assert_eq!(layout.balls.len(), 10);
    }

    #[test]
    fn generated_layouts_valid_and_pattern_consistent() {
        let gen = GeneratorModel::new(meta(10)).unwrap();
        let game = GameSpec::nine_ball();
        for seed in 0..40u64 {
            let missing = if seed % 3 == 0 { vec![2, 5, 9] } else { vec![] };
            let pattern = BreakPattern::new(missing, game).unwrap();
            let (episode, layout) = gen.sample(&pattern, seed).unwrap();
            assert!(validate_layout(&layout, &gen.meta.geom).is_valid(), "seed {seed}");
            assert_eq!(BreakPattern::from_layout(&layout, game), pattern);
            let mut tokens = episode.tokens.clone();
            tokens.sort_unstable();
            tokens.dedup();
            assert_eq!(tokens.len(), episode.tokens.len(), "duplicate cells");
        }
    }

    #[test]
    fn sampling_deterministic_given_seed() {
        let gen = GeneratorModel::new(meta(10)).unwrap();
        let pattern = BreakPattern::new(vec![3], GameSpec::nine_ball()).unwrap();
        let (e1, l1) = gen.sample(&pattern, 99).unwrap();
        let (e2, l2) = gen.sample(&pattern, 99).unwrap();
        assert_eq!(e1.tokens, e2.tokens);
        assert_eq!(l1, l2);
    }

    #[test]
    fn zero_advantage_means_zero_update() {
        let mut gen = GeneratorModel::new(meta(10)).unwrap();
        let pattern = BreakPattern::new(vec![], GameSpec::nine_ball()).unwrap();
        let mut episodes = Vec::new();
        for seed in 0..4 {
            let (mut e, _) = gen.sample(&pattern, seed).unwrap();
            e.reward = 0.7;
            episodes.push(e);
        }
        let before = gen.params.data.clone();
        let mut adam = Adam::<f32>::new(before.len(), AdamConfig::new(1e-2, 0.0));
        gen.reinforce_update(&episodes, 0.7, &mut adam).unwrap();
        assert_eq!(gen.params.data, before);
    }

    #[test]
    fn positive_advantage_raises_sampled_token_probability() {
        // Tiny 3-cell vocabulary: a 300x100 table with 100-unit cells.
        let meta = GeneratorMeta {
            cfg: GeneratorConfig {
                hidden: 8,
                token_embed: 4,
                learning_rate: 0.05,
                seed: 5,
            },
            token: TokenConfig {
                cell_size: 100.0,
                ..Default::default()
            },
            geom: TableGeometry {
                length: 300.0,
                width: 100.0,
                ball_radius: 2.25,
            },
            game: GameSpec { n: 2 },
        };
        let mut gen = GeneratorModel::new(meta).unwrap();
        assert_eq!(gen.vocab_len, 3);
        let pattern = BreakPattern::new(vec![], gen.meta.game).unwrap();
        let (mut episode, _) = gen.sample(&pattern, 1).unwrap();
        episode.reward = 1.0;
        let probs_before: Vec<f32> = {
            let h = gen.initial_hidden(&pattern);
            let x = gen.token_input(None).to_vec();
            let mut h1 = vec![0.0f32; 8];
            gen.gru.forward(&gen.params, &x, &h, &mut h1, None);
            gen.step_probs(&h1, &[false, false, false])
        };
        let mut adam = Adam::<f32>::new(gen.params.data.len(), AdamConfig::new(0.05, 0.0));
        gen.reinforce_update(&[episode.clone()], 0.0, &mut adam).unwrap();
        let probs_after: Vec<f32> = {
            let h = gen.initial_hidden(&pattern);
            let x = gen.token_input(None).to_vec();
            let mut h1 = vec![0.0f32; 8];
            gen.gru.forward(&gen.params, &x, &h, &mut h1, None);
            gen.step_probs(&h1, &[false, false, false])
        };
        let picked = usize::from(episode.tokens[0]);
        assert!(
            probs_after[picked] > probs_before[picked],
            "{probs_before:?} -> {probs_after:?}"
        );
    }

    #[test]
    fn masked_softmax_excludes_used_cells() {
        let probs = masked_softmax(&[1.0, 5.0, 1.0], &[false, true, false]);
        assert_eq!(probs[1], 0.0);
        assert!((probs.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert_eq!(sample_index(&probs, 0.999), 2);
    }
}
