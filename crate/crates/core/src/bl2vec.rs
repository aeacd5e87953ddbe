//! Self-supervised layout metric learning and retrieval.
//!
//! Training samples an anchor layout, builds a lightly-perturbed positive and
//! a heavily-perturbed negative, embeds all three through the shared encoder
//! and minimizes the hinge triplet loss over the two Euclidean distances.
//! The trained encoder then embeds whole databases for exact nearest-neighbor
//! retrieval.

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::geom::TableGeometry;
use crate::layout::{round2, Ball, GameSpec, Layout};
use crate::nn::{
    losses, Adam, AdamConfig, Encoder, EncoderCache, NetConfig, ParamLayout, ParamSet,
};
use crate::rng::{self};
use crate::tokenizer::{tokenize_layout, TokenConfig, TokenSequence, Vocabulary};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Perturbation strengths: each ball shifts by up to `noise_rate` times the
/// table side along each axis, then `ceil(drop_rate * n)` balls are removed
/// and re-placed uniformly at random.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub noise_rate: f64,
    pub drop_rate: f64,
    pub seed: u64,
}

impl PerturbConfig {
    pub fn new(noise_rate: f64, drop_rate: f64, seed: u64) -> Self {
        PerturbConfig {
            noise_rate,
            drop_rate,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_rate) || !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(Error::Config(format!(
                "perturbation rates ({}, {}) outside [0, 1]",
                self.noise_rate, self.drop_rate
            )));
        }
        Ok(())
    }
}

const RETRY_SHIFT: usize = 200;
const RETRY_PLACE: usize = 400;
const GAP_MARGIN: f64 = 0.05;

/// Noisy copy of a layout: bounded shifts for every ball, then a drop-and-
/// replace pass. Ball identities survive; the result always validates.
pub fn perturb_layout(layout: &Layout, cfg: &PerturbConfig, geom: &TableGeometry) -> Result<Layout> {
    cfg.validate()?;
    let mut rng = rng::root(cfg.seed);
    let mut balls = layout.balls.clone();
    let min_dist = 2.0 * geom.ball_radius + GAP_MARGIN;
    if cfg.noise_rate > 0.0 {
        let (bx, by) = (cfg.noise_rate * geom.length, cfg.noise_rate * geom.width);
        for i in 0..balls.len() {
            let mut placed = false;
            for _ in 0..RETRY_SHIFT {
                let x = round2((balls[i].x + rng.gen_range(-bx..=bx)).clamp(0.0, geom.length));
                let y = round2((balls[i].y + rng.gen_range(-by..=by)).clamp(0.0, geom.width));
                let candidate = Ball::new(balls[i].num, x, y);
                if balls
                    .iter()
                    .enumerate()
                    .all(|(j, b)| j == i || b.distance_to(&candidate) >= min_dist)
                {
                    balls[i] = candidate;
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::PlacementExhausted {
                    attempts: RETRY_SHIFT,
                });
            }
        }
    }
    let drops = (cfg.drop_rate * balls.len() as f64).ceil() as usize;
    if drops > 0 {
        // Partial Fisher-Yates for the dropped indexes.
        let mut order: Vec<usize> = (0..balls.len()).collect();
        for i in 0..drops.min(balls.len()) {
            let j = rng.gen_range(i..order.len());
            order.swap(i, j);
        }
        let mut chosen = order[..drops.min(balls.len())].to_vec();
        chosen.sort_unstable();
        for i in chosen {
            let mut placed = false;
            for _ in 0..RETRY_PLACE {
                let x = round2(rng.gen_range(0.0..=geom.length));
                let y = round2(rng.gen_range(0.0..=geom.width));
                let candidate = Ball::new(balls[i].num, x, y);
                if balls
                    .iter()
                    .enumerate()
                    .all(|(j, b)| j == i || b.distance_to(&candidate) >= min_dist)
                {
                    balls[i] = candidate;
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::PlacementExhausted {
                    attempts: RETRY_PLACE,
                });
            }
        }
    }
    let mut out = layout.clone();
    out.balls = balls;
    out.canonicalize();
    Ok(out)
}

/// Triplet-training settings. Negative rates must dominate positive ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletConfig {
    pub margin: f64,
    pub positive: PerturbConfig,
    pub negative: PerturbConfig,
    /// Cap on passes over the training anchors.
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    /// Early-stopping window: evaluations without improvement before giving
    /// up.
    pub patience: usize,
    /// Steps between validation evaluations.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TripletConfig {
    fn default() -> Self {
        TripletConfig {
            margin: 1.0,
            positive: PerturbConfig::new(0.2, 0.2, 0),
            negative: PerturbConfig::new(0.4, 0.4, 0),
            epochs: 120,
            batch_size: 16,
            validation_fraction: 0.15,
            patience: 10,
            eval_every: 200,
            seed: 0,
        }
    }
}

impl TripletConfig {
    pub fn validate(&self) -> Result<()> {
        self.positive.validate()?;
        self.negative.validate()?;
        if self.negative.noise_rate < self.positive.noise_rate
            || self.negative.drop_rate < self.positive.drop_rate
        {
            return Err(Error::Config(
                "negative perturbation must be at least as strong as positive".into(),
            ));
        }
        if self.margin < 0.0 {
            return Err(Error::Config("margin must be non-negative".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation fraction outside [0, 1)".into()));
        }
        Ok(())
    }
}

/// Builds (anchor, positive, negative) with the config's perturbation seeds.
pub fn make_triplet(
    anchor: &Layout,
    cfg: &TripletConfig,
    geom: &TableGeometry,
) -> Result<(Layout, Layout, Layout)> {
    let positive = perturb_layout(anchor, &cfg.positive, geom)?;
    let negative = perturb_layout(anchor, &cfg.negative, geom)?;
    Ok((anchor.clone(), positive, negative))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurves {
    pub steps: Vec<u64>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bl2VecMeta {
    pub net: NetConfig,
    pub token: TokenConfig,
    pub geom: TableGeometry,
    pub game: GameSpec,
    pub margin: f64,
    pub positive_rates: (f64, f64),
    pub negative_rates: (f64, f64),
    pub curves: TrainingCurves,
}

/// A trained layout embedder.
#[derive(Debug)]
pub struct Bl2VecModel {
    pub meta: Bl2VecMeta,
    pub encoder: Encoder,
    pub params: ParamSet<f32>,
}

pub const CHECKPOINT_KIND: &str = "bl2vec";

impl Bl2VecModel {
    fn build_encoder(meta: &Bl2VecMeta) -> Result<(Encoder, std::sync::Arc<ParamLayout>)> {
        let vocab = Vocabulary::new(meta.token, &meta.geom)?;
        let mut builder = ParamLayout::builder();
        let encoder = Encoder::build(&mut builder, &meta.net, vocab, meta.game)?;
        Ok((encoder, builder.build()))
    }

    pub fn k(&self) -> usize {
        self.encoder.k()
    }

    pub fn tokenize(&self, layout: &Layout) -> Result<TokenSequence> {
        let features = extract_features(layout, &self.meta.geom)?;
        tokenize_layout(&features, self.meta.game, &self.encoder.vocab, &self.meta.geom)
    }

    /// Feature-extract, tokenize and encode one layout.
    pub fn embed(&self, layout: &Layout) -> Result<Vec<f32>> {
        let tokens = self.tokenize(layout)?;
        let mut cache = EncoderCache::default();
        self.encoder.forward(&self.params, &tokens, &mut cache);
        Ok(cache.out)
    }

    pub fn embed_all(&self, layouts: &[Layout]) -> Result<Vec<Vec<f32>>> {
        use rayon::prelude::*;
        layouts.par_iter().map(|l| self.embed(l)).collect()
    }

    /// Euclidean distance between two layout embeddings.
    pub fn distance(&self, a: &Layout, b: &Layout) -> Result<f64> {
        let (va, vb) = (self.embed(a)?, self.embed(b)?);
        Ok(f64::from(losses::euclidean(&va, &vb)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, CHECKPOINT_KIND, &self.meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, raw): (Bl2VecMeta, _) = checkpoint::load(path, CHECKPOINT_KIND)?;
        let (encoder, layout) = Self::build_encoder(&meta)?;
        let params = raw.into_params(layout)?;
        Ok(Bl2VecModel {
            meta,
            encoder,
            params,
        })
    }
}

fn triplet_seed(root: u64, tag: u64, index: u64) -> u64 {
    rng::mix(root ^ rng::mix(tag).rotate_left(17) ^ rng::mix(index))
}

struct TripletBatchGrad<'a> {
    encoder: &'a Encoder,
    caches: [EncoderCache<f32>; 3],
}

impl<'a> TripletBatchGrad<'a> {
    fn new(encoder: &'a Encoder) -> Self {
        TripletBatchGrad {
            encoder,
            caches: Default::default(),
        }
    }

    /// Forward + backward for one triplet; returns the loss. Gradients are
    /// scaled by `scale` and accumulated.
    fn accumulate(
        &mut self,
        params: &ParamSet<f32>,
        triplet: &(TokenSequence, TokenSequence, TokenSequence),
        margin: f32,
        scale: f32,
        grads: Option<&mut [f32]>,
    ) -> f32 {
        let (tq, tp, tn) = triplet;
        self.encoder.forward(params, tq, &mut self.caches[0]);
        self.encoder.forward(params, tp, &mut self.caches[1]);
        self.encoder.forward(params, tn, &mut self.caches[2]);
        let d_pos = losses::euclidean(&self.caches[0].out, &self.caches[1].out);
        let d_neg = losses::euclidean(&self.caches[0].out, &self.caches[2].out);
        let loss = losses::triplet(d_pos, d_neg, margin);
        if let Some(grads) = grads {
            if loss > 0.0 {
                let k = self.encoder.k();
                let mut dq = vec![0.0f32; k];
                let mut dp = vec![0.0f32; k];
                let mut dn = vec![0.0f32; k];
                losses::euclidean_grad(
                    &self.caches[0].out,
                    &self.caches[1].out,
                    d_pos,
                    scale,
                    &mut dq,
                    &mut dp,
                );
                losses::euclidean_grad(
                    &self.caches[0].out,
                    &self.caches[2].out,
                    d_neg,
                    -scale,
                    &mut dq,
                    &mut dn,
                );
                self.encoder.backward(params, tq, &mut self.caches[0], &dq, grads);
                self.encoder.backward(params, tp, &mut self.caches[1], &dp, grads);
                self.encoder.backward(params, tn, &mut self.caches[2], &dn, grads);
            }
        }
        loss
    }
}

/// Trains the embedder on a layout corpus (Adam over the triplet hinge loss,
/// early stopping on a fixed held-out triplet set).
pub fn train_bl2vec(
    data: &[Layout],
    cfg: &TripletConfig,
    net: &NetConfig,
    token: TokenConfig,
    geom: TableGeometry,
    game: GameSpec,
) -> Result<Bl2VecModel> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Config("need at least two layouts to train".into()));
    }
    let meta = Bl2VecMeta {
        net: net.clone(),
        token,
        geom,
        game,
        margin: cfg.margin,
        positive_rates: (cfg.positive.noise_rate, cfg.positive.drop_rate),
        negative_rates: (cfg.negative.noise_rate, cfg.negative.drop_rate),
        curves: TrainingCurves::default(),
    };
    let (encoder, layout) = Bl2VecModel::build_encoder(&meta)?;
    let mut params = ParamSet::<f32>::zeros(layout);
    encoder.init(&mut params, &mut rng::derive(net.seed, 0xB12));

    // Split off validation anchors.
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut split_rng = rng::derive(cfg.seed, 0x5197);
    for i in (1..order.len()).rev() {
        let j = split_rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let val_count = ((data.len() as f64 * cfg.validation_fraction).round() as usize)
        .min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(val_count);
    let train_idx = train_idx.to_vec();

    let tokenize = |layout: &Layout| -> Result<TokenSequence> {
        let features = extract_features(layout, &geom)?;
        tokenize_layout(&features, game, &encoder.vocab, &geom)
    };
    // Fixed validation triplets.
    let mut val_triplets = Vec::with_capacity(val_idx.len());
    for (i, idx) in val_idx.iter().enumerate() {
        let anchor = &data[*idx];
        let pos_cfg = cfg.positive.with_seed(triplet_seed(cfg.seed, 0xA11, i as u64));
        let neg_cfg = cfg.negative.with_seed(triplet_seed(cfg.seed, 0xA12, i as u64));
        let positive = perturb_layout(anchor, &pos_cfg, &geom)?;
        let negative = perturb_layout(anchor, &neg_cfg, &geom)?;
        val_triplets.push((tokenize(anchor)?, tokenize(&positive)?, tokenize(&negative)?));
    }

    let margin = cfg.margin as f32;
    let mut adam = Adam::<f32>::new(params.data.len(), AdamConfig::new(net.learning_rate, net.l2_lambda));
    let mut grads = params.grad_buffer();
    let mut worker = TripletBatchGrad::new(&encoder);
    let mut sample_rng = rng::derive(cfg.seed, 0x7A1);

    let steps_per_epoch = train_idx.len().div_ceil(cfg.batch_size).max(1);
    let max_steps = (cfg.epochs * steps_per_epoch) as u64;
    let mut curves = TrainingCurves::default();
    let mut best_val = f64::INFINITY;
    let mut best_params = params.data.clone();
    let mut stale = 0usize;
    let mut train_accum = 0.0f64;
    let mut train_count = 0u64;

    let eval_val = |params: &ParamSet<f32>, worker: &mut TripletBatchGrad| -> f32 {
        if val_triplets.is_empty() {
            return 0.0;
        }
        let mut total = 0.0f32;
        for t in &val_triplets {
            total += worker.accumulate(params, t, margin, 0.0, None);
        }
        total / val_triplets.len() as f32
    };

    'training: for step in 0..max_steps {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0f32 / cfg.batch_size as f32;
        let mut batch_loss = 0.0f32;
        for item in 0..cfg.batch_size {
            let anchor = &data[train_idx[sample_rng.gen_range(0..train_idx.len())]];
            let tag = step * cfg.batch_size as u64 + item as u64;
            let pos_cfg = cfg.positive.with_seed(triplet_seed(cfg.seed, 0x905, tag));
            let neg_cfg = cfg.negative.with_seed(triplet_seed(cfg.seed, 0x906, tag));
            let positive = perturb_layout(anchor, &pos_cfg, &geom)?;
            let negative = perturb_layout(anchor, &neg_cfg, &geom)?;
            let triplet = (tokenize(anchor)?, tokenize(&positive)?, tokenize(&negative)?);
            batch_loss += worker.accumulate(&params, &triplet, margin, scale, Some(&mut grads));
        }
        batch_loss /= cfg.batch_size as f32;
        if !batch_loss.is_finite() {
            curves.diverged = true;
            params.data = best_params.clone();
            break 'training;
        }
        train_accum += f64::from(batch_loss);
        train_count += 1;
        adam.step(&mut params.data, &grads)?;

        if (step + 1) % cfg.eval_every as u64 == 0 || step + 1 == max_steps {
            let val = f64::from(eval_val(&params, &mut worker));
            curves.steps.push(step + 1);
            curves.train_loss.push(train_accum / train_count.max(1) as f64);
            curves.val_loss.push(val);
            train_accum = 0.0;
            train_count = 0;
            if val + 1e-6 < best_val {
                best_val = val;
                best_params = params.data.clone();
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    break 'training;
                }
            }
        }
    }
    if !curves.diverged {
        params.data = best_params;
    }
    let mut meta = meta;
    meta.curves = curves;
    Ok(Bl2VecModel {
        meta,
        encoder,
        params,
    })
}

/// Exact-scan retrieval index over embedded layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    pub dim: usize,
    pub ids: Vec<String>,
    /// Row-major `len x dim`.
    pub vectors: Vec<f32>,
    /// Digest of the checkpoint the vectors came from, when known.
    pub checkpoint_digest: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexMeta {
    dim: usize,
    ids: Vec<String>,
    checkpoint_digest: Option<String>,
}

pub const INDEX_KIND: &str = "bl2vec-index";

/// Squared Euclidean distance with independent accumulator lanes; the hot
/// loop of every scan.
#[inline]
pub fn sqdist(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f32; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (xa, xb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            let d = xa[l] - xb[l];
            lanes[l] += d * d;
        }
    }
    let mut acc = lanes.iter().sum::<f32>();
    for i in chunks * 8..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

impl RetrievalIndex {
    pub fn new(dim: usize) -> Self {
        RetrievalIndex {
            dim,
            ids: Vec::new(),
            vectors: Vec::new(),
            checkpoint_digest: None,
        }
    }

    pub fn build(model: &Bl2VecModel, layouts: &[Layout]) -> Result<Self> {
        let mut index = RetrievalIndex::new(model.k());
        let embedded = model.embed_all(layouts)?;
        for (layout, vector) in layouts.iter().zip(embedded) {
            index.insert(layout.id.clone(), &vector);
        }
        Ok(index)
    }

    pub fn insert(&mut self, id: String, vector: &[f32]) {
        assert_eq!(vector.len(), self.dim);
        self.ids.push(id);
        self.vectors.extend_from_slice(vector);
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    /// Exact k nearest neighbors by Euclidean distance, ascending; ties break
    /// on the id. Bounded-heap scan, linear in the index size.
    pub fn knn(&self, query: &[f32], k: usize) -> Result<Vec<(String, f64)>> {
        if self.is_empty() {
            return Err(Error::Config("knn query against an empty index".into()));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        // Max-heap of the current k best; comparisons fall back to ids so
        // equal distances resolve deterministically.
        let mut heap: Vec<(f32, usize)> = Vec::with_capacity(k + 1);
        let worse = |a: &(f32, usize), b: &(f32, usize)| {
            (a.0, self.ids[a.1].as_str()) > (b.0, self.ids[b.1].as_str())
        };
        for row in 0..self.len() {
            let d = sqdist(query, self.vector(row));
            let entry = (d, row);
            if heap.len() < k {
                heap.push(entry);
                heap.sort_by(|a, b| {
                    if worse(a, b) {
                        std::cmp::Ordering::Less
                    } else {
                        std::cmp::Ordering::Greater
                    }
                });
            } else if worse(&heap[0], &entry) {
                heap[0] = entry;
                let mut i = 0;
                // Restore the "worst first" order by a single pass; k is tiny.
                while i + 1 < heap.len() && worse(&heap[i + 1], &heap[i]) {
                    heap.swap(i, i + 1);
                    i += 1;
                }
            }
        }
        heap.sort_by(|a, b| {
            (a.0, self.ids[a.1].as_str())
                .partial_cmp(&(b.0, self.ids[b.1].as_str()))
                .expect("finite distances")
        });
        Ok(heap
            .into_iter()
            .map(|(d, row)| (self.ids[row].clone(), f64::from(d).max(0.0).sqrt()))
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut builder = ParamLayout::builder();
        let id = builder.add("vectors", &[self.len(), self.dim]);
        let mut params = ParamSet::<f32>::zeros(builder.build());
        params.get_mut(id).copy_from_slice(&self.vectors);
        let meta = IndexMeta {
            dim: self.dim,
            ids: self.ids.clone(),
            checkpoint_digest: self.checkpoint_digest.clone(),
        };
        checkpoint::save(path, INDEX_KIND, &meta, &params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, raw): (IndexMeta, _) = checkpoint::load(path, INDEX_KIND)?;
        let mut builder = ParamLayout::builder();
        builder.add("vectors", &[meta.ids.len(), meta.dim]);
        let params = raw.into_params(builder.build())?;
        Ok(RetrievalIndex {
            dim: meta.dim,
            ids: meta.ids,
            vectors: params.data,
            checkpoint_digest: meta.checkpoint_digest,
        })
    }
}
