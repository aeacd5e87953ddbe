//! The shared layout encoder: token embeddings -> convolution bank -> ReLU
//! -> global max-pool, producing one K-dimensional vector per layout.

use super::layers::{ConvBank, ConvCache};
use super::params::{ParamId, ParamLayoutBuilder, ParamSet};
use super::{ops, Scalar};
use crate::error::{Error, Result};
use crate::features::SLOTS_PER_BALL;
use crate::layout::GameSpec;
use crate::rng::Rng;
use crate::tokenizer::{slot_family, Family, TokenSequence, Vocabulary, FAMILIES};
use serde::{Deserialize, Serialize};

/// Architecture and optimizer settings of the shared stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Embedding width per feature family.
    pub embed_dim: usize,
    /// One entry per filter; the pooled layout vector has this many
    /// dimensions.
    pub filter_widths: Vec<usize>,
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            embed_dim: 10,
            filter_widths: default_filter_widths(156, 7),
            l2_lambda: 0.001,
            learning_rate: 1e-5,
            seed: 0,
        }
    }
}

/// `total` filters with widths cycling 1..=max_width.
pub fn default_filter_widths(total: usize, max_width: usize) -> Vec<usize> {
    (0..total).map(|i| i % max_width + 1).collect()
}

impl NetConfig {
    /// Layout-vector width.
    pub fn k(&self) -> usize {
        self.filter_widths.len()
    }

    pub fn k_prime(&self) -> usize {
        self.embed_dim * SLOTS_PER_BALL
    }

    pub fn validate(&self, game: &GameSpec) -> Result<()> {
        if self.embed_dim == 0 || self.filter_widths.is_empty() {
            return Err(Error::Config("empty embedding or filter bank".into()));
        }
        let max = self.filter_widths.iter().copied().max().unwrap_or(0);
        if max > game.n {
            return Err(Error::Config(format!(
                "filter width {max} exceeds the game's {} ball rows",
                game.n
            )));
        }
        if self.filter_widths.iter().any(|w| *w == 0) {
            return Err(Error::Config("zero-width filter".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.learning_rate > 0.0) {
            return Err(Error::Config("bad optimizer constants".into()));
        }
        Ok(())
    }
}

/// Scratch space reused across forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct EncoderCache<F> {
    /// Embedded layout, `n x k_prime`.
    pub x: Vec<F>,
    pub conv: ConvCache,
    /// Pooled output, length K.
    pub out: Vec<F>,
    dx: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub game: GameSpec,
    pub vocab: Vocabulary,
    pub embed_dim: usize,
    tables: Vec<ParamId>,
    pub conv: ConvBank,
}

impl Encoder {
    pub fn build(
        builder: &mut ParamLayoutBuilder,
        cfg: &NetConfig,
        vocab: Vocabulary,
        game: GameSpec,
    ) -> Result<Encoder> {
        cfg.validate(&game)?;
        let tables = FAMILIES
            .iter()
            .map(|family| {
                builder.add(
                    format!("embed.{family:?}"),
                    &[vocab.family_size(*family), cfg.embed_dim],
                )
            })
            .collect();
        let conv = ConvBank::new(builder, &cfg.filter_widths, cfg.k_prime());
        Ok(Encoder {
            game,
            vocab,
            embed_dim: cfg.embed_dim,
            tables,
            conv,
        })
    }

    pub fn init<F: Scalar>(&self, ps: &mut ParamSet<F>, rng: &mut Rng) {
        for id in &self.tables {
            super::init::uniform(ps, *id, super::init::EMBED_BOUND, rng);
        }
        self.conv.init(ps, rng);
    }

    pub fn k(&self) -> usize {
        self.conv.k
    }

    pub fn k_prime(&self) -> usize {
        self.embed_dim * SLOTS_PER_BALL
    }

    fn table(&self, family: Family) -> ParamId {
        self.tables[FAMILIES.iter().position(|f| *f == family).expect("family")]
    }

    /// Embeds a token sequence into the `n x k_prime` matrix.
    pub fn embed<F: Scalar>(&self, ps: &ParamSet<F>, tokens: &TokenSequence, x: &mut [F]) {
        let d = self.embed_dim;
        debug_assert_eq!(tokens.game, self.game);
        debug_assert_eq!(x.len(), self.game.n * self.k_prime());
        for number in 0..self.game.n {
            let row = tokens.row(number);
            let out = &mut x[number * self.k_prime()..(number + 1) * self.k_prime()];
            for (slot, token) in row.iter().enumerate() {
                let family = slot_family(slot);
                let local = usize::from(self.vocab.local(family, *token));
                let table = ps.get(self.table(family));
                out[slot * d..(slot + 1) * d].copy_from_slice(&table[local * d..(local + 1) * d]);
            }
        }
        ops::add((self.game.n * SLOTS_PER_BALL * d) as u64);
    }

    /// Full forward pass; leaves the layout vector in `cache.out`.
    pub fn forward<F: Scalar>(&self, ps: &ParamSet<F>, tokens: &TokenSequence, cache: &mut EncoderCache<F>) {
        let n = self.game.n;
        cache.x.clear();
        cache.x.resize(n * self.k_prime(), F::ZERO);
        cache.out.clear();
        cache.out.resize(self.k(), F::ZERO);
        self.embed(ps, tokens, &mut cache.x);
        self.conv.forward(ps, &cache.x, n, &mut cache.out, &mut cache.conv);
    }

    /// Backward from the layout-vector gradient into filter and embedding
    /// gradients.
    pub fn backward<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        tokens: &TokenSequence,
        cache: &mut EncoderCache<F>,
        dout: &[F],
        grads: &mut [F],
    ) {
        let n = self.game.n;
        cache.dx.clear();
        cache.dx.resize(n * self.k_prime(), F::ZERO);
        let dx = &mut cache.dx;
        self.conv
            .backward(ps, &cache.x, n, &cache.conv, dout, Some(dx), grads);
        // Scatter the embedded-matrix gradient back into the tables.
        let d = self.embed_dim;
        for number in 0..n {
            let row = tokens.row(number);
            let drow = &dx[number * self.k_prime()..(number + 1) * self.k_prime()];
            for (slot, token) in row.iter().enumerate() {
                let family = slot_family(slot);
                let local = usize::from(self.vocab.local(family, *token));
                let spec = ps.layout.spec(self.table(family));
                let base = spec.offset + local * d;
                for (j, g) in drow[slot * d..(slot + 1) * d].iter().enumerate() {
                    grads[base + j] += *g;
                }
            }
        }
    }
}
