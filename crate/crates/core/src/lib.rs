//! Billiards layout analytics.
//!
//! A layout is a table state: the cue ball plus the object balls that remain
//! after a break shot, each with a 2-D location. This crate turns layouts
//! into per-ball geometric features (ball-self, ball-pocket, ball-ball),
//! discretizes them into tokens, and builds three models on the shared
//! token-embedding + convolution encoder:
//!
//! - [`blcnn`]: supervised outcome prediction (clear / win / potted count);
//! - [`blgan`]: layout generation with a recurrent token generator trained
//!   by policy gradient against a convolutional discriminator;
//! - [`bl2vec`]: self-supervised metric learning over perturbation triplets,
//!   embedding layouts for nearest-neighbor retrieval.
//!
//! Classical similarity measures ([`baselines`]) and the evaluation protocol
//! ([`evalkit`]) round out the toolkit. Everything is seeded and
//! deterministic; see `rng` for the splittable generator discipline.

pub mod baselines;
pub mod bl2vec;
pub mod blcnn;
pub mod blgan;
pub mod checkpoint;
pub mod error;
pub mod evalkit;
pub mod features;
pub mod geom;
pub mod layout;
pub mod nn;
pub mod rng;
pub mod synth;
pub mod tokenizer;

pub use error::{Error, Result};
pub use features::{extract_features, BallFeatures, FeatureTable};
pub use geom::{PocketIndex, TableGeometry};
pub use layout::{
    parse_layouts, validate_layout, write_layouts, Ball, GameLabels, GameSpec, Layout,
    ValidationReport,
};
pub use nn::NetConfig;
pub use synth::{generate_synthetic, SynthConfig};
pub use tokenizer::{TokenConfig, TokenSequence, Vocabulary};
