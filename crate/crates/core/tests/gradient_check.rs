//! Finite-difference validation of every analytic gradient: embedding
//! tables, convolution + max-pool, dense heads, the GRU cell, and the
//! triplet / cross-entropy / BCE losses, in isolation and composed.
//!
//! All checks run in f64 with central differences of step 1e-5.

use blkit::features::extract_features;
use blkit::geom::TableGeometry;
use blkit::layout::GameSpec;
use blkit::nn::gru::{GruCell, GruStepCache};
use blkit::nn::layers::Dense;
use blkit::nn::{losses, Encoder, EncoderCache, NetConfig, ParamLayout, ParamSet};
use blkit::rng;
use blkit::synth::{generate_synthetic, SynthConfig};
use blkit::tokenizer::{tokenize_layout, TokenConfig, TokenSequence, Vocabulary};

const FD_STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

/// Central finite differences over every parameter vs the analytic gradient.
/// Returns the worst relative error.
fn max_rel_error<F>(params: &mut ParamSet<f64>, analytic: &[f64], mut loss: F) -> f64
where
    F: FnMut(&ParamSet<f64>) -> f64,
{
    let mut worst = 0.0f64;
    for i in 0..params.data.len() {
        let saved = params.data[i];
        params.data[i] = saved + FD_STEP;
        let up = loss(params);
        params.data[i] = saved - FD_STEP;
        let down = loss(params);
        params.data[i] = saved;
        let fd = (up - down) / (2.0 * FD_STEP);
        let denom = fd.abs().max(analytic[i].abs());
        if denom < 1e-6 {
            continue; // both effectively zero
        }
        let rel = (fd - analytic[i]).abs() / denom.max(1e-6);
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

fn tiny_net(seed: u64) -> NetConfig {
    NetConfig {
        embed_dim: 3,
        filter_widths: vec![1, 2, 3, 5, 7, 2],
        l2_lambda: 0.0,
        learning_rate: 1e-3,
        seed,
    }
}

struct Fixture {
    encoder: Encoder,
    params: ParamSet<f64>,
    tokens: Vec<TokenSequence>,
}

fn fixture(seed: u64) -> Fixture {
    let geom = TableGeometry::standard();
    let game = GameSpec::nine_ball();
    let cfg = tiny_net(seed);
    let vocab = Vocabulary::new(TokenConfig::default(), &geom).unwrap();
    let mut builder = ParamLayout::builder();
    let encoder = Encoder::build(&mut builder, &cfg, vocab, game).unwrap();
    let mut params = ParamSet::<f64>::zeros(builder.build());
    encoder.init(&mut params, &mut rng::derive(seed, 1));
    let layouts = generate_synthetic(
        &SynthConfig {
            count: 3,
            seed: seed ^ 0xF00D,
            ..Default::default()
        },
        &geom,
    )
    .unwrap();
    let tokens = layouts
        .iter()
        .map(|l| {
            let features = extract_features(l, &geom).unwrap();
            tokenize_layout(&features, game, &encoder.vocab, &geom).unwrap()
        })
        .collect();
    Fixture {
        encoder,
        params,
        tokens,
    }
}

/// Weighted-sum readout of the encoder output; exercises embeddings, conv
/// filters, ReLU and max-pool routing.
#[test]
fn encoder_weighted_sum_gradients() {
    for seed in [1u64, 2, 3, 4] {
        let Fixture {
            encoder,
            mut params,
            tokens,
        } = fixture(seed);
        let k = encoder.k();
        let weights: Vec<f64> = (0..k).map(|i| ((i % 7) as f64 - 3.0) / 3.0).collect();
        let mut grads = params.grad_buffer();
        let mut cache = EncoderCache::default();
        encoder.forward(&params, &tokens[0], &mut cache);
        encoder.backward(&params, &tokens[0], &mut cache, &weights, &mut grads);
        let worst = max_rel_error(&mut params, &grads, |ps| {
            let mut c = EncoderCache::default();
            encoder.forward(ps, &tokens[0], &mut c);
            c.out.iter().zip(&weights).map(|(v, w)| v * w).sum()
        });
        assert!(worst < TOLERANCE, "seed {seed}: max rel error {worst}");
    }
}

#[test]
fn triplet_loss_gradients_through_encoder() {
    for seed in [10u64, 11, 12, 13, 14, 15] {
        let Fixture {
            encoder,
            mut params,
            tokens,
        } = fixture(seed);
        let margin = 0.5f64;
        let forward = |ps: &ParamSet<f64>| -> f64 {
            let mut caches = [
                EncoderCache::default(),
                EncoderCache::default(),
                EncoderCache::default(),
            ];
            for (c, t) in caches.iter_mut().zip(&tokens) {
                encoder.forward(ps, t, c);
            }
            let d_pos = losses::euclidean(&caches[0].out, &caches[1].out);
            let d_neg = losses::euclidean(&caches[0].out, &caches[2].out);
            losses::triplet(d_pos, d_neg, margin)
        };
        // Analytic pass.
        let mut caches = [
            EncoderCache::default(),
            EncoderCache::default(),
            EncoderCache::default(),
        ];
        for (c, t) in caches.iter_mut().zip(&tokens) {
            encoder.forward(&params, t, c);
        }
        let d_pos = losses::euclidean(&caches[0].out, &caches[1].out);
        let d_neg = losses::euclidean(&caches[0].out, &caches[2].out);
        let mut grads = params.grad_buffer();
        if losses::triplet(d_pos, d_neg, margin) > 0.0 {
            let k = encoder.k();
            let (mut dq, mut dp, mut dn) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
            losses::euclidean_grad(&caches[0].out, &caches[1].out, d_pos, 1.0, &mut dq, &mut dp);
            losses::euclidean_grad(&caches[0].out, &caches[2].out, d_neg, -1.0, &mut dq, &mut dn);
            encoder.backward(&params, &tokens[0], &mut caches[0], &dq, &mut grads);
            encoder.backward(&params, &tokens[1], &mut caches[1], &dp, &mut grads);
            encoder.backward(&params, &tokens[2], &mut caches[2], &dn, &mut grads);
        }
        let worst = max_rel_error(&mut params, &grads, forward);
        assert!(worst < TOLERANCE, "seed {seed}: max rel error {worst}");
    }
}

#[test]
fn cross_entropy_gradients_through_head() {
    for (seed, label) in [(20u64, 0usize), (21, 1), (22, 2), (23, 1), (24, 0)] {
        let geom = TableGeometry::standard();
        let game = GameSpec::nine_ball();
        let cfg = tiny_net(seed);
        let vocab = Vocabulary::new(TokenConfig::default(), &geom).unwrap();
        let mut builder = ParamLayout::builder();
        let encoder = Encoder::build(&mut builder, &cfg, vocab, game).unwrap();
        let head = Dense::new(&mut builder, "head", encoder.k(), 3);
        let mut params = ParamSet::<f64>::zeros(builder.build());
        let mut init_rng = rng::derive(seed, 2);
        encoder.init(&mut params, &mut init_rng);
        head.init(&mut params, &mut init_rng);
        let Fixture { tokens, .. } = fixture(seed);

        let forward = |ps: &ParamSet<f64>| -> f64 {
            let mut cache = EncoderCache::default();
            encoder.forward(ps, &tokens[0], &mut cache);
            let mut logits = vec![0.0; 3];
            head.forward(ps, &cache.out, &mut logits);
            losses::cross_entropy(&logits, label).0
        };
        let mut cache = EncoderCache::default();
        encoder.forward(&params, &tokens[0], &mut cache);
        let mut logits = vec![0.0; 3];
        head.forward(&params, &cache.out, &mut logits);
        let (_, probs) = losses::cross_entropy(&logits, label);
        let mut dlogits = vec![0.0; 3];
        losses::cross_entropy_grad(&probs, label, 1.0, &mut dlogits);
        let mut grads = params.grad_buffer();
        let mut dvec = vec![0.0; encoder.k()];
        head.backward(&params, &cache.out, &dlogits, Some(&mut dvec), &mut grads);
        encoder.backward(&params, &tokens[0], &mut cache, &dvec, &mut grads);
        let worst = max_rel_error(&mut params, &grads, forward);
        assert!(worst < TOLERANCE, "seed {seed}: max rel error {worst}");
    }
}

#[test]
fn bce_gradients_through_sigmoid_head() {
    for (seed, target) in [(30u64, true), (31, false), (32, true), (33, false)] {
        let geom = TableGeometry::standard();
        let game = GameSpec::nine_ball();
        let cfg = tiny_net(seed);
        let vocab = Vocabulary::new(TokenConfig::default(), &geom).unwrap();
        let mut builder = ParamLayout::builder();
        let encoder = Encoder::build(&mut builder, &cfg, vocab, game).unwrap();
        let head = Dense::new(&mut builder, "head", encoder.k(), 1);
        let mut params = ParamSet::<f64>::zeros(builder.build());
        let mut init_rng = rng::derive(seed, 3);
        encoder.init(&mut params, &mut init_rng);
        head.init(&mut params, &mut init_rng);
        let Fixture { tokens, .. } = fixture(seed);

        let forward = |ps: &ParamSet<f64>| -> f64 {
            let mut cache = EncoderCache::default();
            encoder.forward(ps, &tokens[1], &mut cache);
            let mut logit = [0.0];
            head.forward(ps, &cache.out, &mut logit);
            losses::sigmoid_bce_with_logit(logit[0], target).0
        };
        let mut cache = EncoderCache::default();
        encoder.forward(&params, &tokens[1], &mut cache);
        let mut logit = [0.0];
        head.forward(&params, &cache.out, &mut logit);
        let (_, prob) = losses::sigmoid_bce_with_logit(logit[0], target);
        let dlogit = [losses::sigmoid_bce_grad(prob, target)];
        let mut grads = params.grad_buffer();
        let mut dvec = vec![0.0; encoder.k()];
        head.backward(&params, &cache.out, &dlogit, Some(&mut dvec), &mut grads);
        encoder.backward(&params, &tokens[1], &mut cache, &dvec, &mut grads);
        let worst = max_rel_error(&mut params, &grads, forward);
        assert!(worst < TOLERANCE, "seed {seed}: max rel error {worst}");
    }
}

/// GRU through a measured sequence with a masked-softmax surrogate readout,
/// exercising backpropagation through time and the input-embedding scatter.
#[test]
fn gru_sequence_gradients() {
    for seed in [40u64, 41, 42, 43, 44] {
        let (input_dim, hidden, vocab, steps) = (3usize, 4usize, 5usize, 4usize);
        let mut builder = ParamLayout::builder();
        let table = builder.add("table", &[vocab + 1, input_dim]);
        let gru = GruCell::new(&mut builder, "gru", input_dim, hidden);
        let out = Dense::new(&mut builder, "out", hidden, vocab);
        let mut params = ParamSet::<f64>::zeros(builder.build());
        let mut init_rng = rng::derive(seed, 4);
        blkit::nn::init::uniform(&mut params, table, 0.5, &mut init_rng);
        gru.init(&mut params, &mut init_rng);
        out.init(&mut params, &mut init_rng);

        let picks: Vec<usize> = (0..steps).map(|t| (t * 2 + seed as usize) % vocab).collect();
        let h0 = vec![0.1f64; hidden];

        let forward = |ps: &ParamSet<f64>| -> f64 {
            let mut h = h0.clone();
            let mut next = vec![0.0; hidden];
            let mut loss = 0.0;
            let mut prev: Option<usize> = None;
            for &pick in &picks {
                let row = prev.map_or(vocab, |p| p);
                let x = ps.get(table)[row * input_dim..(row + 1) * input_dim].to_vec();
                gru.forward(ps, &x, &h, &mut next, None);
                std::mem::swap(&mut h, &mut next);
                let mut logits = vec![0.0; vocab];
                out.forward(ps, &h, &mut logits);
                let (l, _) = losses::cross_entropy(&logits, pick);
                loss += l;
                prev = Some(pick);
            }
            loss
        };

        // Analytic: replay with caches then walk backward through time.
        let mut grads = params.grad_buffer();
        {
            let mut h = h0.clone();
            let mut caches: Vec<GruStepCache<f64>> = Vec::new();
            let mut hs = vec![h.clone()];
            let mut probs_per_step = Vec::new();
            let mut rows = Vec::new();
            let mut prev: Option<usize> = None;
            for &pick in &picks {
                let row = prev.map_or(vocab, |p| p);
                rows.push(row);
                let x = params.get(table)[row * input_dim..(row + 1) * input_dim].to_vec();
                let mut cache = GruStepCache::default();
                let mut next = vec![0.0; hidden];
                gru.forward(&params, &x, &h, &mut next, Some(&mut cache));
                caches.push(cache);
                h = next;
                hs.push(h.clone());
                let mut logits = vec![0.0; vocab];
                out.forward(&params, &h, &mut logits);
                probs_per_step.push(losses::cross_entropy(&logits, pick).1);
                prev = Some(pick);
            }
            let mut dh = vec![0.0; hidden];
            for t in (0..steps).rev() {
                let mut dlogits = vec![0.0; vocab];
                losses::cross_entropy_grad(&probs_per_step[t], picks[t], 1.0, &mut dlogits);
                out.backward(&params, &hs[t + 1], &dlogits, Some(&mut dh), &mut grads);
                let mut dx = vec![0.0; input_dim];
                let mut dh_prev = vec![0.0; hidden];
                gru.backward(&params, &caches[t], &dh, &mut dx, &mut dh_prev, &mut grads);
                let spec = params.layout.spec(table);
                for (j, g) in dx.iter().enumerate() {
                    grads[spec.offset + rows[t] * input_dim + j] += *g;
                }
                dh = dh_prev;
            }
        }
        let worst = max_rel_error(&mut params, &grads, forward);
        assert!(worst < TOLERANCE, "seed {seed}: max rel error {worst}");
    }
}

/// Plain BCE (no logit shortcut) against finite differences on the
/// probability argument.
#[test]
fn bce_probability_derivative() {
    for (p, target) in [(0.3f64, true), (0.7, false), (0.5, true)] {
        let analytic = if target { -1.0 / p } else { 1.0 / (1.0 - p) };
        let fd = (losses::bce(p + FD_STEP, target) - losses::bce(p - FD_STEP, target))
            / (2.0 * FD_STEP);
        assert!((fd - analytic).abs() / analytic.abs() < TOLERANCE);
    }
}

/// Scaling the loss scales every gradient linearly; a constant loss has a
/// zero gradient.
#[test]
fn gradient_linearity_and_zero_loss() {
    let Fixture {
        encoder,
        params,
        tokens,
    } = fixture(77);
    let weights: Vec<f64> = (0..encoder.k()).map(|i| (i % 5) as f64 - 2.0).collect();
    let doubled: Vec<f64> = weights.iter().map(|w| 2.0 * w).collect();
    let mut cache = EncoderCache::default();
    let mut g1 = params.grad_buffer();
    let mut g2 = params.grad_buffer();
    encoder.forward(&params, &tokens[0], &mut cache);
    encoder.backward(&params, &tokens[0], &mut cache, &weights, &mut g1);
    encoder.forward(&params, &tokens[0], &mut cache);
    encoder.backward(&params, &tokens[0], &mut cache, &doubled, &mut g2);
    for (a, b) in g1.iter().zip(&g2) {
        assert!((2.0 * a - b).abs() < 1e-9);
    }
    let zeros = vec![0.0; encoder.k()];
    let mut g0 = params.grad_buffer();
    encoder.forward(&params, &tokens[0], &mut cache);
    encoder.backward(&params, &tokens[0], &mut cache, &zeros, &mut g0);
    assert!(g0.iter().all(|g| *g == 0.0));
}
