//! Supervised outcome prediction over the shared encoder: clear / win /
//! potted-count heads with softmax cross-entropy. The clear-task probability
//! doubles as the generation score function.

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::geom::TableGeometry;
use crate::layout::{GameSpec, Layout};
use crate::nn::layers::Dense;
use crate::nn::{losses, Adam, AdamConfig, Encoder, EncoderCache, NetConfig, ParamLayout, ParamSet};
use crate::rng::{self};
use crate::tokenizer::{tokenize_layout, TokenConfig, TokenSequence, Vocabulary};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Clear,
    Win,
    Potted,
}

impl Task {
    pub fn class_count(self) -> usize {
        match self {
            Task::Clear | Task::Win => 2,
            // 0..=9 potted balls in a 9-ball break.
            Task::Potted => 10,
        }
    }

    /// Class label of a layout for this task, if present.
    pub fn label(self, layout: &Layout) -> Option<usize> {
        let labels = layout.labels.as_ref()?;
        match self {
            Task::Clear => labels.clear.map(usize::from),
            Task::Win => labels.win.map(usize::from),
            Task::Potted => labels.potted.map(usize::from),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Clear => write!(f, "clear"),
            Task::Win => write!(f, "win"),
            Task::Potted => write!(f, "potted"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
}

/// Epochs, batching and early stopping shared by the supervised trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub patience: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 60,
            batch_size: 32,
            validation_fraction: 0.15,
            patience: 10,
            eval_every: 200,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation fraction outside [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlcnnMeta {
    pub task: TaskSpec,
    pub net: NetConfig,
    pub token: TokenConfig,
    pub geom: TableGeometry,
    pub game: GameSpec,
    pub curves: crate::bl2vec::TrainingCurves,
}

#[derive(Debug)]
pub struct BlcnnModel {
    pub meta: BlcnnMeta,
    pub encoder: Encoder,
    pub head: Dense,
    pub params: ParamSet<f32>,
}

pub const CHECKPOINT_KIND: &str = "blcnn";

impl BlcnnModel {
    fn build_parts(
        meta: &BlcnnMeta,
    ) -> Result<(Encoder, Dense, std::sync::Arc<ParamLayout>)> {
        let vocab = Vocabulary::new(meta.token, &meta.geom)?;
        let mut builder = ParamLayout::builder();
        let encoder = Encoder::build(&mut builder, &meta.net, vocab, meta.game)?;
        let head = Dense::new(
            &mut builder,
            "head",
            encoder.k(),
            meta.task.task.class_count(),
        );
        Ok((encoder, head, builder.build()))
    }

    pub fn tokenize(&self, layout: &Layout) -> Result<TokenSequence> {
        let features = extract_features(layout, &self.meta.geom)?;
        tokenize_layout(&features, self.meta.game, &self.encoder.vocab, &self.meta.geom)
    }

    fn logits(&self, tokens: &TokenSequence) -> Vec<f32> {
        let mut cache = EncoderCache::default();
        self.encoder.forward(&self.params, tokens, &mut cache);
        let mut out = vec![0.0f32; self.head.output];
        self.head.forward(&self.params, &cache.out, &mut out);
        out
    }

    /// Class probabilities for a layout (softmax over the head logits).
    pub fn predict(&self, layout: &Layout) -> Result<Vec<f64>> {
        let tokens = self.tokenize(layout)?;
        let logits = self.logits(&tokens);
        let mut probs = vec![0.0f32; logits.len()];
        losses::softmax(&logits, &mut probs);
        Ok(probs.into_iter().map(f64::from).collect())
    }

    /// Probability of the positive "clear" class. Refuses checkpoints
    /// trained on another task.
    pub fn clear_score(&self, layout: &Layout) -> Result<f64> {
        if self.meta.task.task != Task::Clear {
            return Err(Error::Incompatible(format!(
                "clear score needs a clear-task checkpoint, found `{}`",
                self.meta.task.task
            )));
        }
        Ok(self.predict(layout)?[1])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, CHECKPOINT_KIND, &self.meta, &self.params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (meta, raw): (BlcnnMeta, _) = checkpoint::load(path, CHECKPOINT_KIND)?;
        let (encoder, head, layout) = Self::build_parts(&meta)?;
        let params = raw.into_params(layout)?;
        Ok(BlcnnModel {
            meta,
            encoder,
            head,
            params,
        })
    }

    /// Accuracy of the argmax prediction over a labeled set.
    pub fn accuracy(&self, layouts: &[Layout]) -> Result<f64> {
        let task = self.meta.task.task;
        let mut hits = 0usize;
        for layout in layouts {
            let label = task
                .label(layout)
                .ok_or_else(|| Error::Config(format!("layout `{}` lacks a {task} label", layout.id)))?;
            let probs = self.predict(layout)?;
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .expect("non-empty probabilities");
            hits += usize::from(argmax == label);
        }
        Ok(hits as f64 / layouts.len().max(1) as f64)
    }
}

/// Trains a prediction head with a stratified validation split and early
/// stopping on validation cross-entropy.
pub fn train_blcnn(
    data: &[Layout],
    task: TaskSpec,
    net: &NetConfig,
    token: TokenConfig,
    geom: TableGeometry,
    game: GameSpec,
    sched: &TrainSchedule,
) -> Result<BlcnnModel> {
    sched.validate()?;
    let mut labeled = Vec::with_capacity(data.len());
    for layout in data {
        let label = task
            .task
            .label(layout)
            .ok_or_else(|| Error::Config(format!("layout `{}` lacks a {} label", layout.id, task.task)))?;
        if label >= task.task.class_count() {
            return Err(Error::Config(format!(
                "label {label} outside the {} classes of task {}",
                task.task.class_count(),
                task.task
            )));
        }
        labeled.push(label);
    }
    let classes_present: std::collections::BTreeSet<usize> = labeled.iter().copied().collect();
    if classes_present.len() < 2 {
        return Err(Error::Config(
            "training set contains a single class; nothing to learn".into(),
        ));
    }

    let meta = BlcnnMeta {
        task,
        net: net.clone(),
        token,
        geom,
        game,
        curves: Default::default(),
    };
    let (encoder, head, layout) = BlcnnModel::build_parts(&meta)?;
    let mut params = ParamSet::<f32>::zeros(layout);
    let mut init_rng = rng::derive(net.seed, 0xC33);
    encoder.init(&mut params, &mut init_rng);
    head.init(&mut params, &mut init_rng);

    // Stratified split: an equal fraction of every class goes to validation.
    let mut split_rng = rng::derive(sched.seed, 0x517);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for class in &classes_present {
        let mut members: Vec<usize> = (0..data.len()).filter(|i| labeled[*i] == *class).collect();
        for i in (1..members.len()).rev() {
            let j = split_rng.gen_range(0..=i);
            members.swap(i, j);
        }
        let v = ((members.len() as f64 * sched.validation_fraction).round() as usize)
            .min(members.len().saturating_sub(1));
        val_idx.extend_from_slice(&members[..v]);
        train_idx.extend_from_slice(&members[v..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    let tokenize = |l: &Layout| -> Result<TokenSequence> {
        let features = extract_features(l, &geom)?;
        tokenize_layout(&features, game, &encoder.vocab, &geom)
    };
    let train_tokens: Vec<TokenSequence> = train_idx
        .iter()
        .map(|i| tokenize(&data[*i]))
        .collect::<Result<_>>()?;
    let val_tokens: Vec<TokenSequence> = val_idx
        .iter()
        .map(|i| tokenize(&data[*i]))
        .collect::<Result<_>>()?;

    let mut adam = Adam::<f32>::new(
        params.data.len(),
        AdamConfig::new(net.learning_rate, net.l2_lambda),
    );
    let mut grads = params.grad_buffer();
    let mut cache = EncoderCache::default();
    let mut sample_rng = rng::derive(sched.seed, 0x7C2);
    let steps_per_epoch = train_idx.len().div_ceil(sched.batch_size).max(1);
    let max_steps = (sched.epochs * steps_per_epoch) as u64;

    let forward_loss = |params: &ParamSet<f32>,
                        cache: &mut EncoderCache<f32>,
                        tokens: &TokenSequence,
                        label: usize|
     -> (f32, Vec<f32>, Vec<f32>) {
        encoder.forward(params, tokens, cache);
        let mut logits = vec![0.0f32; head.output];
        head.forward(params, &cache.out, &mut logits);
        let (loss, probs) = losses::cross_entropy(&logits, label);
        (loss, probs, logits)
    };

    let mut curves = crate::bl2vec::TrainingCurves::default();
    let mut best_val = f64::INFINITY;
    let mut best_params = params.data.clone();
    let mut stale = 0usize;
    let mut train_accum = 0.0f64;
    let mut train_count = 0u64;

    'training: for step in 0..max_steps {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0f32 / sched.batch_size as f32;
        let mut batch_loss = 0.0f32;
        for _ in 0..sched.batch_size {
            let pick = sample_rng.gen_range(0..train_idx.len());
            let (loss, probs, _) = forward_loss(&params, &mut cache, &train_tokens[pick], labeled[train_idx[pick]]);
            batch_loss += loss;
            let mut dlogits = vec![0.0f32; head.output];
            losses::cross_entropy_grad(&probs, labeled[train_idx[pick]], scale, &mut dlogits);
            let mut dvec = vec![0.0f32; encoder.k()];
            head.backward(&params, &cache.out, &dlogits, Some(&mut dvec), &mut grads);
            encoder.backward(&params, &train_tokens[pick], &mut cache, &dvec, &mut grads);
        }
        batch_loss /= sched.batch_size as f32;
        if !batch_loss.is_finite() {
            curves.diverged = true;
            params.data = best_params.clone();
            break 'training;
        }
        train_accum += f64::from(batch_loss);
        train_count += 1;
        adam.step(&mut params.data, &grads)?;

        if (step + 1) % sched.eval_every as u64 == 0 || step + 1 == max_steps {
            let mut val = 0.0f64;
            for (tokens, idx) in val_tokens.iter().zip(&val_idx) {
                let (loss, _, _) = forward_loss(&params, &mut cache, tokens, labeled[*idx]);
                val += f64::from(loss);
            }
            let val = val / val_tokens.len().max(1) as f64;
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
                if stale >= sched.patience {
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
    Ok(BlcnnModel {
        meta,
        encoder,
        head,
        params,
    })
}
