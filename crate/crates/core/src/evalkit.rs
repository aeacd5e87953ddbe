//! Evaluation protocol: self-similarity retrieval (HR@10, MRR), leave-one-out
//! kNN classification, k-means clustering scored by normalized ARI/AMI, and
//! wall-clock/operation-count scans for the scalability comparison.

use crate::baselines::{self, PointSeq};
use crate::bl2vec::{perturb_layout, Bl2VecModel, PerturbConfig, RetrievalIndex};
use crate::error::{Error, Result};
use crate::geom::TableGeometry;
use crate::layout::Layout;
use crate::rng::{self};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// A similarity measure usable by every evaluation task.
#[derive(Clone, Copy)]
pub enum Measure<'a> {
    Emd,
    Hausdorff,
    Dtw,
    Frechet,
    Pm,
    Learned(&'a Bl2VecModel),
}

impl<'a> Measure<'a> {
    pub fn name(&self) -> &'static str {
        match self {
            Measure::Emd => "emd",
            Measure::Hausdorff => "hausdorff",
            Measure::Dtw => "dtw",
            Measure::Frechet => "frechet",
            Measure::Pm => "pm",
            Measure::Learned(_) => "bl2vec",
        }
    }

    pub fn from_name(name: &str, model: Option<&'a Bl2VecModel>) -> Result<Measure<'a>> {
        Ok(match name {
            "emd" => Measure::Emd,
            "hausdorff" => Measure::Hausdorff,
            "dtw" => Measure::Dtw,
            "frechet" => Measure::Frechet,
            "pm" => Measure::Pm,
            "bl2vec" => Measure::Learned(model.ok_or_else(|| {
                Error::Config("measure `bl2vec` needs a trained checkpoint".into())
            })?),
            other => return Err(Error::Config(format!("unknown measure `{other}`"))),
        })
    }

    pub fn distance(&self, a: &Layout, b: &Layout) -> Result<f64> {
        Ok(match self {
            Measure::Emd => baselines::emd(&PointSeq::from_layout(a), &PointSeq::from_layout(b)),
            Measure::Hausdorff => {
                baselines::hausdorff(&PointSeq::from_layout(a), &PointSeq::from_layout(b))
            }
            Measure::Dtw => baselines::dtw(&PointSeq::from_layout(a), &PointSeq::from_layout(b)),
            Measure::Frechet => {
                baselines::frechet(&PointSeq::from_layout(a), &PointSeq::from_layout(b))
            }
            Measure::Pm => baselines::peer_matching(a, b),
            Measure::Learned(model) => model.distance(a, b)?,
        })
    }

    /// Row-major `rows.len() x cols.len()` distance matrix. Learned
    /// embeddings are computed once per side.
    pub fn distance_matrix(&self, rows: &[Layout], cols: &[Layout]) -> Result<Vec<f64>> {
        match self {
            Measure::Learned(model) => {
                let vr = model.embed_all(rows)?;
                let vc = model.embed_all(cols)?;
                Ok(vr
                    .par_iter()
                    .flat_map_iter(|r| {
                        vc.iter()
                            .map(|c| f64::from(crate::bl2vec::sqdist(r, c)).max(0.0).sqrt())
                            .collect::<Vec<_>>()
                    })
                    .collect())
            }
            Measure::Pm => Ok(rows
                .par_iter()
                .flat_map_iter(|r| cols.iter().map(|c| baselines::peer_matching(r, c)).collect::<Vec<_>>())
                .collect()),
            _ => {
                let sr: Vec<PointSeq> = rows.iter().map(PointSeq::from_layout).collect();
                let sc: Vec<PointSeq> = cols.iter().map(PointSeq::from_layout).collect();
                let f = self.seq_fn();
                Ok(sr
                    .par_iter()
                    .flat_map_iter(|r| sc.iter().map(|c| f(r, c)).collect::<Vec<_>>())
                    .collect())
            }
        }
    }

    fn seq_fn(&self) -> fn(&PointSeq, &PointSeq) -> f64 {
        match self {
            Measure::Emd => baselines::emd,
            Measure::Hausdorff => baselines::hausdorff,
            Measure::Dtw => baselines::dtw,
            Measure::Frechet => baselines::frechet,
            _ => unreachable!("sequence function of a non-sequence measure"),
        }
    }
}

/// Self-similarity protocol: rank each query's perturbed positive inside the
/// database plus that positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalProtocol {
    pub query_count: usize,
    pub db_count: usize,
    pub perturb: PerturbConfig,
    pub seed: u64,
}

impl Default for RetrievalProtocol {
    fn default() -> Self {
        RetrievalProtocol {
            query_count: 100,
            db_count: 500,
            perturb: PerturbConfig::new(0.2, 0.2, 0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub hr_at_10: f64,
    pub mrr: f64,
}

/// Draws disjoint query and database sets from the dataset, perturbs each
/// query into its positive, and scores HR@10 and MRR of the positives.
pub fn self_similarity_eval(
    measure: &Measure,
    dataset: &[Layout],
    protocol: &RetrievalProtocol,
    geom: &TableGeometry,
) -> Result<RetrievalMetrics> {
    let need = protocol.query_count + protocol.db_count;
    if dataset.len() < need {
        return Err(Error::Config(format!(
            "dataset of {} cannot supply {} queries + {} database layouts",
            dataset.len(),
            protocol.query_count,
            protocol.db_count
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = rng::derive(protocol.seed, 0xE7A1);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let queries: Vec<Layout> = order[..protocol.query_count]
        .iter()
        .map(|i| dataset[*i].clone())
        .collect();
    let db: Vec<Layout> = order[protocol.query_count..need]
        .iter()
        .map(|i| dataset[*i].clone())
        .collect();
    let positives: Vec<Layout> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let cfg = protocol
                .perturb
                .with_seed(rng::mix(protocol.seed ^ rng::mix(0xB05 + i as u64)));
            let mut p = perturb_layout(q, &cfg, geom)?;
            p.id = format!("{}+pos", q.id);
            Ok(p)
        })
        .collect::<Result<_>>()?;

    // One matrix over db ++ positives; query i's candidate set is the db
    // plus its own positive.
    let mut candidates = db;
    candidates.extend(positives);
    let matrix = measure.distance_matrix(&queries, &candidates)?;
    let d = protocol.db_count;
    let cols = candidates.len();
    let mut hits = 0usize;
    let mut mrr = 0.0f64;
    for i in 0..queries.len() {
        let row = &matrix[i * cols..(i + 1) * cols];
        let d_pos = row[d + i];
        // Database entries at or below the positive's distance push it down.
        let rank = 1 + row[..d].iter().filter(|v| **v <= d_pos).count();
        if rank <= 10 {
            hits += 1;
        }
        mrr += 1.0 / rank as f64;
    }
    Ok(RetrievalMetrics {
        hr_at_10: hits as f64 / queries.len() as f64,
        mrr: mrr / queries.len() as f64,
    })
}

/// Leave-one-out kNN accuracy. Votes break ties toward the class with the
/// smaller mean distance among its voting neighbors, then the smaller class.
pub fn knn_classify(
    measure: &Measure,
    layouts: &[Layout],
    labels: &[usize],
    k: usize,
) -> Result<f64> {
    if layouts.len() != labels.len() {
        return Err(Error::Config("labels must align with layouts".into()));
    }
    if layouts.len() <= k {
        return Err(Error::Config(format!(
            "need more than k={k} items, found {}",
            layouts.len()
        )));
    }
    let n = layouts.len();
    let matrix = measure.distance_matrix(layouts, layouts)?;
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut hits = 0usize;
    for i in 0..n {
        let row = &matrix[i * n..(i + 1) * n];
        let mut neighbors: Vec<(f64, usize)> = (0..n)
            .filter(|j| *j != i)
            .map(|j| (row[j], j))
            .collect();
        neighbors.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("finite distances")
                .then_with(|| layouts[a.1].id.cmp(&layouts[b.1].id))
        });
        neighbors.truncate(k);
        let mut votes = vec![0usize; classes];
        let mut dist_sum = vec![0.0f64; classes];
        for (d, j) in &neighbors {
            votes[labels[*j]] += 1;
            dist_sum[labels[*j]] += *d;
        }
        let best = (0..classes)
            .filter(|c| votes[*c] > 0)
            .min_by(|a, b| {
                let key = |c: usize| (std::cmp::Reverse(votes[c]), dist_sum[c] / votes[c] as f64, c);
                key(*a).partial_cmp(&key(*b)).expect("finite distances")
            })
            .expect("k >= 1 neighbors");
        hits += usize::from(best == labels[i]);
    }
    Ok(hits as f64 / n as f64)
}

/// k-means with k-means++ seeding and multi-restart by inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<Vec<usize>> {
    if points.is_empty() || k == 0 || points.len() < k {
        return Err(Error::Config("kmeans needs at least k points".into()));
    }
    let dim = points[0].len();
    let sq = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = rng::derive(seed, 0x4B3A + restart as u64);
        // k-means++ seeding.
        let mut centers: Vec<Vec<f64>> = vec![points[rng.gen_range(0..points.len())].clone()];
        let mut d2: Vec<f64> = points.iter().map(|p| sq(p, &centers[0])).collect();
        while centers.len() < k {
            let total: f64 = d2.iter().sum();
            let next = if total <= 0.0 {
                rng.gen_range(0..points.len())
            } else {
                let mut u = rng.gen_range(0.0..total);
                let mut chosen = points.len() - 1;
                for (i, w) in d2.iter().enumerate() {
                    u -= w;
                    if u <= 0.0 {
                        chosen = i;
                        break;
                    }
                }
                chosen
            };
            centers.push(points[next].clone());
            for (i, p) in points.iter().enumerate() {
                d2[i] = d2[i].min(sq(p, centers.last().expect("just pushed")));
            }
        }
        // Lloyd iterations.
        let mut assign = vec![0usize; points.len()];
        for _ in 0..100 {
            let mut changed = false;
            for (i, p) in points.iter().enumerate() {
                let nearest = (0..k)
                    .min_by(|a, b| {
                        (sq(p, &centers[*a]), *a)
                            .partial_cmp(&(sq(p, &centers[*b]), *b))
                            .expect("finite coordinates")
                    })
                    .expect("k > 0");
                if assign[i] != nearest {
                    assign[i] = nearest;
                    changed = true;
                }
            }
            let mut sums = vec![vec![0.0f64; dim]; k];
            let mut counts = vec![0usize; k];
            for (p, a) in points.iter().zip(&assign) {
                counts[*a] += 1;
                for (s, v) in sums[*a].iter_mut().zip(p) {
                    *s += *v;
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    // Re-seed an empty cluster at the farthest point.
                    let far = (0..points.len())
                        .max_by(|a, b| {
                            sq(&points[*a], &centers[assign[*a]])
                                .partial_cmp(&sq(&points[*b], &centers[assign[*b]]))
                                .expect("finite coordinates")
                        })
                        .expect("non-empty points");
                    centers[c] = points[far].clone();
                    changed = true;
                } else {
                    for (cv, s) in centers[c].iter_mut().zip(&sums[c]) {
                        *cv = *s / counts[c] as f64;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let inertia: f64 = points
            .iter()
            .zip(&assign)
            .map(|(p, a)| sq(p, &centers[*a]))
            .sum();
        if best.as_ref().map_or(true, |(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    Ok(best.expect("at least one restart").1)
}

fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (x, y) in a.iter().zip(b) {
        table[*x][*y] += 1;
    }
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    (table, rows, cols)
}

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index in [-1, 1].
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let (table, rows, cols) = contingency(a, b);
    let sum_ij: f64 = table
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| choose2(*v))
        .sum();
    let sum_a: f64 = rows.iter().map(|v| choose2(*v)).sum();
    let sum_b: f64 = cols.iter().map(|v| choose2(*v)).sum();
    let expected = sum_a * sum_b / choose2(n);
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-12 {
        return if (sum_ij - expected).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (sum_ij - expected) / (max - expected)
}

/// Adjusted mutual information in [-1, 1] (arithmetic normalization, with
/// the exact hypergeometric expected MI).
pub fn adjusted_mutual_info(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let nf = n as f64;
    let (table, rows, cols) = contingency(a, b);
    let h = |counts: &[usize]| -> f64 {
        counts
            .iter()
            .filter(|c| **c > 0)
            .map(|c| {
                let p = *c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let (hu, hv) = (h(&rows), h(&cols));
    let mut mi = 0.0f64;
    for (i, row) in table.iter().enumerate() {
        for (j, nij) in row.iter().enumerate() {
            if *nij > 0 {
                let pij = *nij as f64 / nf;
                mi += pij * ((nf * *nij as f64) / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    // Expected MI under the permutation model.
    let mut lnfact = vec![0.0f64; n + 1];
    for i in 1..=n {
        lnfact[i] = lnfact[i - 1] + (i as f64).ln();
    }
    let mut emi = 0.0f64;
    for &ai in rows.iter().filter(|v| **v > 0) {
        for &bj in cols.iter().filter(|v| **v > 0) {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let nijf = nij as f64;
                let term1 = nijf / nf * ((nf * nijf) / (ai as f64 * bj as f64)).ln();
                let ln_p = lnfact[ai] + lnfact[bj] + lnfact[n - ai] + lnfact[n - bj]
                    - lnfact[n]
                    - lnfact[nij]
                    - lnfact[ai - nij]
                    - lnfact[bj - nij]
                    - lnfact[n + nij - ai - bj];
                emi += term1 * ln_p.exp();
            }
        }
    }
    let denom = 0.5 * (hu + hv) - emi;
    if denom.abs() < 1e-12 {
        return if (mi - emi).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    ((mi - emi) / denom).clamp(-1.0, 1.0)
}

/// Maps a [-1, 1] agreement score onto [0, 1].
pub fn normalize_unit(x: f64) -> f64 {
    (x + 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterScores {
    pub ari_norm: f64,
    pub ami_norm: f64,
}

/// k-means over embedding vectors scored against labels; ARI/AMI are
/// normalized onto [0, 1].
pub fn cluster_eval(
    vectors: &[Vec<f32>],
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<ClusterScores> {
    if vectors.len() != labels.len() || vectors.len() < k.max(2) {
        return Err(Error::Config("degenerate clustering input".into()));
    }
    let points: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|x| f64::from(*x)).collect())
        .collect();
    let assign = kmeans(&points, k, 20, seed)?;
    Ok(ClusterScores {
        ari_norm: normalize_unit(adjusted_rand_index(&assign, labels)),
        ami_norm: normalize_unit(adjusted_mutual_info(&assign, labels)),
    })
}

/// One row of the scalability study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub measure: String,
    pub db_size: usize,
    /// Mean wall-clock seconds per query for a full scan of the database.
    pub query_seconds: f64,
    /// One-time embedding cost of the database (learned measures only).
    pub embed_seconds: Option<f64>,
    /// Point-distance evaluations (matching measures) or multiply-add count
    /// (learned) per query.
    pub ops_per_query: u64,
}

/// Times full scans of database prefixes. Database representations
/// (point sequences, embeddings) are prepared outside the timed region;
/// embedding cost is reported separately since it is a one-time cost.
pub fn timing_bench(
    measures: &[Measure],
    dataset: &[Layout],
    db_sizes: &[usize],
    queries: &[Layout],
    repeat: usize,
) -> Result<Vec<TimingRow>> {
    let max_size = db_sizes.iter().copied().max().unwrap_or(0);
    if dataset.len() < max_size {
        return Err(Error::Config(format!(
            "dataset of {} smaller than requested database size {max_size}",
            dataset.len()
        )));
    }
    if !db_sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config("database sizes must be ascending".into()));
    }
    let mut out = Vec::new();
    for measure in measures {
        match measure {
            Measure::Learned(model) => {
                let embed_start = Instant::now();
                let index = RetrievalIndex::build(model, &dataset[..max_size])?;
                let embed_total = embed_start.elapsed().as_secs_f64();
                let qvecs = model.embed_all(queries)?;
                for &size in db_sizes {
                    let mut sub = RetrievalIndex::new(index.dim);
                    for row in 0..size {
                        sub.insert(index.ids[row].clone(), index.vector(row));
                    }
                    // Warm-up pass, then timed scans.
                    let _ = sub.knn(&qvecs[0], 10)?;
                    crate::nn::ops::reset();
                    let start = Instant::now();
                    let mut sink = 0.0f64;
                    for _ in 0..repeat.max(1) {
                        for q in &qvecs {
                            sink += sub.knn(q, 10)?[0].1;
                        }
                    }
                    let elapsed = start.elapsed().as_secs_f64();
                    std::hint::black_box(sink);
                    out.push(TimingRow {
                        measure: measure.name().into(),
                        db_size: size,
                        query_seconds: elapsed / (repeat.max(1) * queries.len()) as f64,
                        embed_seconds: Some(embed_total * size as f64 / max_size as f64),
                        // The scan computes dim multiply-adds per vector.
                        ops_per_query: (size * index.dim) as u64,
                    });
                }
            }
            Measure::Pm => {
                for &size in db_sizes {
                    let db = &dataset[..size];
                    baselines::ops::reset();
                    let mut sink = 0.0f64;
                    for q in queries {
                        sink += baselines::peer_matching(q, &db[0]);
                    }
                    let start = Instant::now();
                    baselines::ops::reset();
                    for _ in 0..repeat.max(1) {
                        for q in queries {
                            for item in db {
                                sink += baselines::peer_matching(q, item);
                            }
                        }
                    }
                    let elapsed = start.elapsed().as_secs_f64();
                    std::hint::black_box(sink);
                    let per_query = (repeat.max(1) * queries.len()) as u64;
                    out.push(TimingRow {
                        measure: measure.name().into(),
                        db_size: size,
                        query_seconds: elapsed / per_query as f64,
                        embed_seconds: None,
                        ops_per_query: baselines::ops::get() / per_query,
                    });
                }
            }
            _ => {
                let f = measure.seq_fn();
                let db_seqs: Vec<PointSeq> =
                    dataset[..max_size].iter().map(PointSeq::from_layout).collect();
                let q_seqs: Vec<PointSeq> = queries.iter().map(PointSeq::from_layout).collect();
                for &size in db_sizes {
                    let db = &db_seqs[..size];
                    let mut sink = f(&q_seqs[0], &db[0]);
                    let start = Instant::now();
                    baselines::ops::reset();
                    for _ in 0..repeat.max(1) {
                        for q in &q_seqs {
                            for item in db {
                                sink += f(q, item);
                            }
                        }
                    }
                    let elapsed = start.elapsed().as_secs_f64();
                    std::hint::black_box(sink);
                    let per_query = (repeat.max(1) * queries.len()) as u64;
                    out.push(TimingRow {
                        measure: measure.name().into(),
                        db_size: size,
                        query_seconds: elapsed / per_query as f64,
                        embed_seconds: None,
                        ops_per_query: baselines::ops::get() / per_query,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Least-squares fit of `y = a + b x` returning (a, b, r_squared).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (a + b * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (a, b, r2)
}
