//! `blkit` command line: synthetic data, validation, features, tokens,
//! training for the three models, retrieval, evaluation protocols, timing
//! scans and SVG rendering.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

mod config;
mod manifest;
mod render;

use anyhow::{anyhow, bail, Context, Result};
use blkit::bl2vec::{self, Bl2VecModel, PerturbConfig, RetrievalIndex};
use blkit::blcnn::{self, BlcnnModel, Task, TaskSpec};
use blkit::blgan::{self, BreakPattern};
use blkit::evalkit::{self, Measure, RetrievalProtocol};
use blkit::layout::{read_layouts_file, write_layouts_file, GameSpec};
use blkit::{extract_features, generate_synthetic, validate_layout, Layout, TableGeometry};
use clap::{Args, Parser, Subcommand};
use config::FileConfig;
use manifest::RunManifest;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "blkit", version, about = "Billiards layout analytics toolkit")]
struct Cli {
    /// TOML configuration file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel-capable operations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SeedArg {
    /// RNG seed; all stochastic steps derive from it.
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled synthetic layouts.
    Synth {
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Validate a layout file, reporting every violation.
    Validate {
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Extract per-ball features to line-delimited JSON.
    Features {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Tokenize layouts to padded token rows.
    Tokenize {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train the retrieval embedder.
    TrainBl2vec {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Train a prediction head (clear | win | potted).
    TrainBlcnn {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_task)]
        task: Task,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Train the layout generator against a clear-task checkpoint.
    TrainBlgan {
        /// Corpus of clear-labeled layouts.
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        blcnn: PathBuf,
        #[arg(long)]
        generator_out: PathBuf,
        #[arg(long)]
        discriminator_out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Embed layouts with a trained retrieval checkpoint.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build a retrieval index from a checkpoint and a layout database.
    Index {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// k-nearest-neighbor query against an index.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Layout file; every record is used as a query.
        #[arg(long)]
        layout: PathBuf,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// Pairwise distances between two layout files under a measure.
    Distance {
        #[arg(long, value_parser = parse_measure_name)]
        measure: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(short = 'a', long)]
        left: PathBuf,
        #[arg(short = 'b', long)]
        right: PathBuf,
        /// Print the full matrix instead of aligned pairs.
        #[arg(long)]
        matrix: bool,
    },
    /// Class probabilities from a prediction checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample layouts from a trained generator.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        count: usize,
        #[command(flatten)]
        seed: SeedArg,
        /// Fixed break pattern like "4,6"; defaults to the full table.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Self-similarity retrieval metrics (HR@10, MRR).
    EvalRetrieval {
        #[arg(long, value_parser = parse_measure_name)]
        measure: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long, default_value_t = 500)]
        db: usize,
        #[arg(long, default_value_t = 0.2)]
        noise: f64,
        #[arg(long, default_value_t = 0.2)]
        drop: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Leave-one-out kNN classification accuracy.
    EvalClassify {
        #[arg(long, value_parser = parse_measure_name)]
        measure: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_task, default_value = "clear")]
        task: Task,
        #[arg(short, default_value_t = 10)]
        k: usize,
    },
    /// k-means clustering of embeddings scored by normalized ARI/AMI.
    EvalCluster {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Wall-clock and operation-count scan comparison across measures.
    Bench {
        /// Comma-separated measures, e.g. "emd,dtw,bl2vec".
        #[arg(long)]
        measures: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(short, long)]
        input: PathBuf,
        /// Ascending database sizes, e.g. "1000,2000,5000".
        #[arg(long)]
        db_sizes: String,
        #[arg(long, default_value_t = 5)]
        queries: usize,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
    },
    /// Render a layout to SVG.
    Render {
        #[arg(long)]
        layout: PathBuf,
        /// Record index within the file.
        #[arg(long, default_value_t = 0)]
        record: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    match s {
        "clear" => Ok(Task::Clear),
        "win" => Ok(Task::Win),
        "potted" => Ok(Task::Potted),
        other => Err(format!("unknown task `{other}` (clear|win|potted)")),
    }
}

fn parse_measure_name(s: &str) -> std::result::Result<String, String> {
    match s {
        "emd" | "hausdorff" | "dtw" | "frechet" | "pm" | "bl2vec" => Ok(s.to_string()),
        other => Err(format!(
            "unknown measure `{other}` (emd|hausdorff|dtw|frechet|pm|bl2vec)"
        )),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Version/help are successful exits; anything else is usage.
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if let Some(err) = e.downcast_ref::<blkit::Error>() {
                match err {
                    blkit::Error::NonFinite(_) => 3,
                    _ => 2,
                }
            } else {
                2
            };
            std::process::exit(code);
        }
    }
}

fn load_layouts(path: &Path, geom: &TableGeometry) -> Result<Vec<Layout>> {
    read_layouts_file(path, geom).with_context(|| format!("loading {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let geom = cfg.table();
    let game = GameSpec::nine_ball();
    let config_path = cli.config.as_deref();

    match cli.command {
        Command::Synth {
            count,
            seed,
            output,
        } => {
            let synth_cfg = cfg.synth(count, seed.seed);
            let layouts = generate_synthetic(&synth_cfg, &geom)?;
            write_layouts_file(&output, &layouts)?;
            let mut m = RunManifest::new("synth", config_path, Some(seed.seed));
            m.output(&output)?;
            m.write(Some(&output))?;
            println!("wrote {} layouts to {}", layouts.len(), output.display());
        }
        Command::Validate { input } => {
            let file = std::fs::File::open(&input)?;
            let layouts = blkit::parse_layouts(std::io::BufReader::new(file), &geom)?;
            let mut violations = 0usize;
            for layout in &layouts {
                violations += validate_layout(layout, &geom).violations.len();
            }
            let mut m = RunManifest::new("validate", config_path, None);
            m.input(&input)?;
            m.write(None)?;
            println!("{} layouts valid ({} violations)", layouts.len(), violations);
        }
        Command::Features { input, output } => {
            let layouts = load_layouts(&input, &geom)?;
            let mut file = std::io::BufWriter::new(std::fs::File::create(&output)?);
            for layout in &layouts {
                let table = extract_features(layout, &geom)?;
                blkit::features::write_feature_dump(&mut file, &table)?;
            }
            drop(file);
            let mut m = RunManifest::new("features", config_path, None);
            m.input(&input)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!("wrote features for {} layouts", layouts.len());
        }
        Command::Tokenize { input, output } => {
            let token_cfg = cfg.tokenizer();
            let vocab = blkit::Vocabulary::new(token_cfg, &geom)?;
            let layouts = load_layouts(&input, &geom)?;
            let mut file = std::io::BufWriter::new(std::fs::File::create(&output)?);
            use std::io::Write as _;
            for layout in &layouts {
                let features = extract_features(layout, &geom)?;
                let seq = blkit::tokenizer::tokenize_layout(&features, game, &vocab, &geom)?;
                let rows: Vec<Vec<u16>> = (0..game.n).map(|i| seq.row(i).to_vec()).collect();
                let record = serde_json::json!({ "id": layout.id, "tokens": rows });
                serde_json::to_writer(&mut file, &record)?;
                file.write_all(b"\n")?;
            }
            drop(file);
            let mut m = RunManifest::new("tokenize", config_path, None);
            m.input(&input)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!(
                "wrote {} token rows ({} ids in the vocabulary)",
                layouts.len(),
                vocab.total()
            );
        }
        Command::TrainBl2vec {
            input,
            output,
            seed,
            epochs,
            learning_rate,
        } => {
            let layouts = load_layouts(&input, &geom)?;
            let net = cfg.net(learning_rate, seed.seed);
            let triplet = cfg.triplet(epochs, seed.seed);
            let model =
                bl2vec::train_bl2vec(&layouts, &triplet, &net, cfg.tokenizer(), geom, game)?;
            model.save(&output)?;
            let mut m = RunManifest::new("train-bl2vec", config_path, Some(seed.seed));
            m.input(&input)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            let curves = &model.meta.curves;
            println!(
                "trained bl2vec on {} layouts; {} evals, best val loss {:.4}{}",
                layouts.len(),
                curves.val_loss.len(),
                curves
                    .val_loss
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min),
                if curves.diverged {
                    " (diverged, kept best)"
                } else {
                    ""
                }
            );
        }
        Command::TrainBlcnn {
            input,
            task,
            output,
            seed,
            epochs,
            learning_rate,
        } => {
            let layouts = load_layouts(&input, &geom)?;
            let net = cfg.net(learning_rate, seed.seed);
            let sched = cfg.schedule(epochs, seed.seed);
            let model = blcnn::train_blcnn(
                &layouts,
                TaskSpec { task },
                &net,
                cfg.tokenizer(),
                geom,
                game,
                &sched,
            )?;
            model.save(&output)?;
            let mut m = RunManifest::new("train-blcnn", config_path, Some(seed.seed));
            m.input(&input)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!(
                "trained blcnn[{task}] on {} layouts; train accuracy {:.3}",
                layouts.len(),
                model.accuracy(&layouts)?
            );
        }
        Command::TrainBlgan {
            input,
            blcnn: blcnn_path,
            generator_out,
            discriminator_out,
            seed,
            steps,
        } => {
            let layouts = load_layouts(&input, &geom)?;
            let scorer = BlcnnModel::load(&blcnn_path)?;
            let gan_cfg = cfg.blgan(steps, seed.seed);
            let outcome = blgan::train_blgan(&layouts, &scorer, &gan_cfg)?;
            outcome.generator.save(&generator_out)?;
            outcome.discriminator.save(&discriminator_out)?;
            let mut m = RunManifest::new("train-blgan", config_path, Some(seed.seed));
            m.input(&input)?;
            m.input(&blcnn_path)?;
            m.output(&generator_out)?;
            m.output(&discriminator_out)?;
            m.write(Some(&generator_out))?;
            let last_reward = outcome.curves.mean_reward.last().copied().unwrap_or(0.0);
            println!(
                "trained blgan for {} steps (|G1|={}, |G2|={}); last mean reward {last_reward:.3}",
                gan_cfg.generator_steps,
                outcome.split.g1.len(),
                outcome.split.g2.len()
            );
        }
        Command::Embed {
            checkpoint,
            input,
            output,
        } => {
            let model = Bl2VecModel::load(&checkpoint)?;
            let layouts = load_layouts(&input, &geom)?;
            let vectors = model.embed_all(&layouts)?;
            let mut file = std::io::BufWriter::new(std::fs::File::create(&output)?);
            use std::io::Write as _;
            for (layout, vector) in layouts.iter().zip(&vectors) {
                let record = serde_json::json!({ "id": layout.id, "vector": vector });
                serde_json::to_writer(&mut file, &record)?;
                file.write_all(b"\n")?;
            }
            drop(file);
            let mut m = RunManifest::new("embed", config_path, None);
            m.input(&checkpoint)?;
            m.input(&input)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!(
                "embedded {} layouts to {}-d vectors",
                layouts.len(),
                model.k()
            );
        }
        Command::Index {
            checkpoint,
            input,
            output,
        } => {
            let model = Bl2VecModel::load(&checkpoint)?;
            let layouts = load_layouts(&input, &geom)?;
            let mut index = RetrievalIndex::build(&model, &layouts)?;
            index.checkpoint_digest = Some(blkit::checkpoint::file_digest(&checkpoint)?);
            index.save(&output)?;
            let mut m = RunManifest::new("index", config_path, None);
            m.input(&checkpoint)?;
            m.input(&input)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!("indexed {} layouts", index.len());
        }
        Command::Query {
            index,
            checkpoint,
            layout,
            k,
        } => {
            let model = Bl2VecModel::load(&checkpoint)?;
            let idx = RetrievalIndex::load(&index)?;
            if let Some(digest) = &idx.checkpoint_digest {
                let actual = blkit::checkpoint::file_digest(&checkpoint)?;
                if *digest != actual {
                    bail!(blkit::Error::Incompatible(
                        "index was built from a different checkpoint".into()
                    ));
                }
            }
            let queries = load_layouts(&layout, &geom)?;
            for q in &queries {
                let vector = model.embed(q)?;
                let hits = idx.knn(&vector, k)?;
                for (rank, (id, dist)) in hits.iter().enumerate() {
                    println!("{}\t{}\t{id}\t{dist:.4}", q.id, rank + 1);
                }
            }
            let mut m = RunManifest::new("query", config_path, None);
            m.input(&index)?;
            m.input(&checkpoint)?;
            m.input(&layout)?;
            m.write(None)?;
        }
        Command::Distance {
            measure,
            checkpoint,
            left,
            right,
            matrix,
        } => {
            let model = checkpoint.as_deref().map(Bl2VecModel::load).transpose()?;
            let measure = Measure::from_name(&measure, model.as_ref())?;
            let a = load_layouts(&left, &geom)?;
            let b = load_layouts(&right, &geom)?;
            if matrix {
                let d = measure.distance_matrix(&a, &b)?;
                for (i, la) in a.iter().enumerate() {
                    for (j, lb) in b.iter().enumerate() {
                        println!("{}\t{}\t{:.6}", la.id, lb.id, d[i * b.len() + j]);
                    }
                }
            } else {
                if a.len() != b.len() {
                    bail!("paired mode needs files of equal length; use --matrix");
                }
                for (la, lb) in a.iter().zip(&b) {
                    println!("{}\t{}\t{:.6}", la.id, lb.id, measure.distance(la, lb)?);
                }
            }
            let mut m = RunManifest::new("distance", config_path, None);
            m.input(&left)?;
            m.input(&right)?;
            m.write(None)?;
        }
        Command::Predict {
            checkpoint,
            input,
            output,
        } => {
            let model = BlcnnModel::load(&checkpoint)?;
            let layouts = load_layouts(&input, &geom)?;
            let mut lines = Vec::new();
            for layout in &layouts {
                let probs = model.predict(layout)?;
                let record = serde_json::json!({
                    "id": layout.id,
                    "task": model.meta.task.task.to_string(),
                    "probs": probs,
                });
                lines.push(serde_json::to_string(&record)?);
            }
            match &output {
                Some(path) => std::fs::write(path, lines.join("\n") + "\n")?,
                None => lines.iter().for_each(|l| println!("{l}")),
            }
            let mut m = RunManifest::new("predict", config_path, None);
            m.input(&checkpoint)?;
            m.input(&input)?;
            if let Some(path) = &output {
                m.output(path)?;
            }
            m.write(output.as_deref())?;
        }
        Command::Generate {
            checkpoint,
            count,
            seed,
            pattern,
            output,
        } => {
            let generator = blgan::GeneratorModel::load(&checkpoint)?;
            let pattern = match pattern {
                Some(text) => {
                    let missing = text
                        .split(',')
                        .filter(|s| !s.is_empty())
                        .map(|s| s.trim().parse::<u8>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| anyhow!("bad pattern: {e}"))?;
                    BreakPattern::new(missing, generator.meta.game)?
                }
                None => BreakPattern::new(vec![], generator.meta.game)?,
            };
            let mut layouts = Vec::with_capacity(count);
            for i in 0..count {
                let episode_seed = blkit::rng::mix(seed.seed ^ blkit::rng::mix(i as u64));
                let (_, layout) = generator.sample(&pattern, episode_seed)?;
                layouts.push(layout);
            }
            write_layouts_file(&output, &layouts)?;
            let mut m = RunManifest::new("generate", config_path, Some(seed.seed));
            m.input(&checkpoint)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!("generated {count} layouts with pattern {pattern}");
        }
        Command::EvalRetrieval {
            measure,
            checkpoint,
            input,
            queries,
            db,
            noise,
            drop,
            seed,
        } => {
            let model = checkpoint.as_deref().map(Bl2VecModel::load).transpose()?;
            let measure = Measure::from_name(&measure, model.as_ref())?;
            let layouts = load_layouts(&input, &geom)?;
            let protocol = RetrievalProtocol {
                query_count: queries,
                db_count: db,
                perturb: PerturbConfig::new(noise, drop, 0),
                seed: seed.seed,
            };
            let metrics = evalkit::self_similarity_eval(&measure, &layouts, &protocol, &geom)?;
            println!("measure    HR@10   MRR");
            println!(
                "{:<10} {:<7.3} {:.4}",
                measure.name(),
                metrics.hr_at_10,
                metrics.mrr
            );
            let mut m = RunManifest::new("eval-retrieval", config_path, Some(seed.seed));
            m.input(&input)?;
            m.write(None)?;
        }
        Command::EvalClassify {
            measure,
            checkpoint,
            input,
            task,
            k,
        } => {
            let model = checkpoint.as_deref().map(Bl2VecModel::load).transpose()?;
            let measure = Measure::from_name(&measure, model.as_ref())?;
            let layouts = load_layouts(&input, &geom)?;
            let labels = layouts
                .iter()
                .map(|l| {
                    task.label(l)
                        .ok_or_else(|| anyhow!("layout `{}` lacks a {task} label", l.id))
                })
                .collect::<Result<Vec<_>>>()?;
            let accuracy = evalkit::knn_classify(&measure, &layouts, &labels, k)?;
            println!("measure    task    k   accuracy");
            println!("{:<10} {:<7} {:<3} {:.4}", measure.name(), task, k, accuracy);
            let mut m = RunManifest::new("eval-classify", config_path, None);
            m.input(&input)?;
            m.write(None)?;
        }
        Command::EvalCluster {
            checkpoint,
            input,
            k,
            seed,
        } => {
            let model = Bl2VecModel::load(&checkpoint)?;
            let layouts = load_layouts(&input, &geom)?;
            let labels = layouts
                .iter()
                .map(|l| {
                    Task::Clear
                        .label(l)
                        .ok_or_else(|| anyhow!("layout `{}` lacks a clear label", l.id))
                })
                .collect::<Result<Vec<_>>>()?;
            let vectors = model.embed_all(&layouts)?;
            let scores = evalkit::cluster_eval(&vectors, &labels, k, seed.seed)?;
            println!("k   ARI     AMI");
            println!("{:<3} {:<7.4} {:.4}", k, scores.ari_norm, scores.ami_norm);
            let mut m = RunManifest::new("eval-cluster", config_path, Some(seed.seed));
            m.input(&checkpoint)?;
            m.input(&input)?;
            m.write(None)?;
        }
        Command::Bench {
            measures,
            checkpoint,
            input,
            db_sizes,
            queries,
            repeat,
        } => {
            let model = checkpoint.as_deref().map(Bl2VecModel::load).transpose()?;
            let names: Vec<&str> = measures.split(',').filter(|s| !s.is_empty()).collect();
            let parsed: Vec<Measure> = names
                .iter()
                .map(|n| Measure::from_name(n, model.as_ref()))
                .collect::<blkit::Result<_>>()?;
            let sizes: Vec<usize> = db_sizes
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| anyhow!("bad db size: {e}"))?;
            let layouts = load_layouts(&input, &geom)?;
            let max = sizes.iter().copied().max().unwrap_or(0);
            if layouts.len() < max + queries {
                bail!("input smaller than the largest database size plus queries");
            }
            let query_set: Vec<Layout> = layouts[max..max + queries].to_vec();
            let rows = evalkit::timing_bench(&parsed, &layouts, &sizes, &query_set, repeat)?;
            println!("measure    db_size   query_ms   embed_s    ops/query");
            for row in &rows {
                println!(
                    "{:<10} {:<9} {:<10.4} {:<10} {}",
                    row.measure,
                    row.db_size,
                    row.query_seconds * 1e3,
                    row.embed_seconds
                        .map_or_else(|| "-".to_string(), |v| format!("{v:.3}")),
                    row.ops_per_query
                );
            }
            let mut m = RunManifest::new("bench", config_path, None);
            m.input(&input)?;
            m.write(None)?;
        }
        Command::Render {
            layout,
            record,
            output,
        } => {
            let layouts = load_layouts(&layout, &geom)?;
            let chosen = layouts.get(record).ok_or_else(|| {
                anyhow!("record {record} out of range ({} layouts)", layouts.len())
            })?;
            std::fs::write(&output, render::layout_to_svg(chosen, &geom))?;
            let mut m = RunManifest::new("render", config_path, None);
            m.input(&layout)?;
            m.output(&output)?;
            m.write(Some(&output))?;
            println!("rendered `{}` to {}", chosen.id, output.display());
        }
    }
    Ok(())
}
