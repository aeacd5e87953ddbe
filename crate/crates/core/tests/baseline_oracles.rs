//! Independent brute-force oracles for the similarity measures, checked on
//! random small instances to 1e-9.
//!
//! - EMD: exhaustive permutation matching when the sets have equal size, and
//!   a from-scratch cycle-canceling transportation solver for unequal sizes
//!   (a different algorithm than the production successive-shortest-paths).
//! - DTW and discrete Frechet: the naive exponential recursions.
//! - Hausdorff: the plain max-min definition, without the production early
//!   exit.

use blkit::baselines::{dtw, emd, frechet, hausdorff, Point, PointSeq};
use blkit::rng;
use rand::Rng as _;

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Minimum mean matching cost over all permutations (uniform equal-size EMD
/// is attained at a one-to-one matching).
fn emd_permutation_oracle(a: &[Point], b: &[Point]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; n];
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, j)| dist(a[i], b[*j]))
            .sum::<f64>()
            / n as f64
    };
    best = best.min(cost(&idx));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                idx.swap(0, i);
            } else {
                idx.swap(c[i], i);
            }
            best = best.min(cost(&idx));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Transportation oracle: northwest-corner feasible flow, then negative-cycle
/// canceling with Bellman-Ford. Costs are scaled to integers so cycle
/// detection is exact and termination is guaranteed; the rounding error is
/// orders of magnitude below the comparison tolerance.
fn emd_cycle_canceling_oracle(a: &[Point], b: &[Point]) -> f64 {
    const SCALE: f64 = 1e12;
    let (m, k) = (a.len(), b.len());
    let cost = |u: usize, v: usize| -> i64 { (dist(a[u], b[v]) * SCALE).round() as i64 };
    // Integer supplies: each left node ships k units, each right node takes m.
    let mut flow = vec![vec![0i64; k]; m];
    let mut supply: Vec<i64> = vec![k as i64; m];
    let mut demand: Vec<i64> = vec![m as i64; k];
    let (mut i, mut j) = (0usize, 0usize);
    while i < m && j < k {
        let push = supply[i].min(demand[j]);
        flow[i][j] += push;
        supply[i] -= push;
        demand[j] -= push;
        if supply[i] == 0 {
            i += 1;
        } else {
            j += 1;
        }
    }
    // Residual arcs: forward i -> (m+j) always open; backward (m+j) -> i
    // open while flow remains.
    let n = m + k;
    let residual = |flow: &Vec<Vec<i64>>, u: usize, v: usize| -> Option<(i64, i64)> {
        if u < m && v >= m {
            Some((i64::MAX / 4, cost(u, v - m)))
        } else if v < m && u >= m && flow[v][u - m] > 0 {
            Some((flow[v][u - m], -cost(v, u - m)))
        } else {
            None
        }
    };
    loop {
        let mut d = vec![0i64; n];
        let mut pre = vec![usize::MAX; n];
        let mut updated = usize::MAX;
        for _ in 0..n {
            updated = usize::MAX;
            for u in 0..n {
                for v in 0..n {
                    if let Some((cap, c)) = residual(&flow, u, v) {
                        if cap > 0 && d[u] + c < d[v] {
                            d[v] = d[u] + c;
                            pre[v] = u;
                            updated = v;
                        }
                    }
                }
            }
            if updated == usize::MAX {
                break;
            }
        }
        if updated == usize::MAX {
            break; // no negative cycle left
        }
        // Walk back n steps to land on the cycle, then collect it.
        let mut x = updated;
        for _ in 0..n {
            x = pre[x];
        }
        let mut cycle = vec![x];
        let mut y = pre[x];
        while y != x {
            cycle.push(y);
            y = pre[y];
        }
        cycle.reverse();
        let mut push = i64::MAX;
        for w in 0..cycle.len() {
            let u = cycle[w];
            let v = cycle[(w + 1) % cycle.len()];
            let (cap, _) = residual(&flow, u, v).expect("cycle arc must be residual");
            push = push.min(cap);
        }
        assert!(push > 0, "cycle canceling stalled");
        for w in 0..cycle.len() {
            let u = cycle[w];
            let v = cycle[(w + 1) % cycle.len()];
            if u < m {
                flow[u][v - m] += push;
            } else {
                flow[v][u - m] -= push;
            }
        }
    }
    let mut total = 0.0;
    for (i, row) in flow.iter().enumerate() {
        for (j, f) in row.iter().enumerate() {
            total += *f as f64 * dist(a[i], b[j]);
        }
    }
    total / (m * k) as f64
}

fn dtw_naive(a: &[Point], b: &[Point], i: usize, j: usize) -> f64 {
    let d = dist(a[i], b[j]);
    match (i, j) {
        (0, 0) => d,
        (_, 0) => d + dtw_naive(a, b, i - 1, 0),
        (0, _) => d + dtw_naive(a, b, 0, j - 1),
        _ => {
            d + dtw_naive(a, b, i - 1, j)
                .min(dtw_naive(a, b, i, j - 1))
                .min(dtw_naive(a, b, i - 1, j - 1))
        }
    }
}

fn frechet_naive(a: &[Point], b: &[Point], i: usize, j: usize) -> f64 {
    let d = dist(a[i], b[j]);
    match (i, j) {
        (0, 0) => d,
        (_, 0) => d.max(frechet_naive(a, b, i - 1, 0)),
        (0, _) => d.max(frechet_naive(a, b, 0, j - 1)),
        _ => {
            let best = frechet_naive(a, b, i - 1, j)
                .min(frechet_naive(a, b, i, j - 1))
                .min(frechet_naive(a, b, i - 1, j - 1));
            d.max(best)
        }
    }
}

fn hausdorff_plain(a: &[Point], b: &[Point]) -> f64 {
    let directed = |x: &[Point], y: &[Point]| -> f64 {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| dist(*p, *q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

fn random_points(rng: &mut rng::Rng, len: usize) -> Vec<Point> {
    (0..len)
        .map(|_| (rng.gen_range(0.0..200.0), rng.gen_range(0.0..100.0)))
        .collect()
}

const TOL: f64 = 1e-9;

#[test]
fn emd_matches_permutation_oracle_on_equal_sizes() {
    let mut rng = rng::root(0xE3D);
    for case in 0..100 {
        let n = rng.gen_range(1..=6);
        let a = random_points(&mut rng, n);
        let b = random_points(&mut rng, n);
        let got = emd(&PointSeq(a.clone()), &PointSeq(b.clone()));
        let want = emd_permutation_oracle(&a, &b);
        assert!((got - want).abs() <= TOL, "case {case}: {got} vs {want}");
    }
}

#[test]
fn emd_matches_cycle_canceling_oracle_on_mixed_sizes() {
    let mut rng = rng::root(0xE3E);
    for case in 0..100 {
        let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_points(&mut rng, la);
        let b = random_points(&mut rng, lb);
        let got = emd(&PointSeq(a.clone()), &PointSeq(b.clone()));
        let want = emd_cycle_canceling_oracle(&a, &b);
        assert!((got - want).abs() <= TOL, "case {case}: {got} vs {want}");
    }
}

#[test]
fn dtw_matches_naive_recursion() {
    let mut rng = rng::root(0xD7A);
    for case in 0..200 {
        let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_points(&mut rng, la);
        let b = random_points(&mut rng, lb);
        let got = dtw(&PointSeq(a.clone()), &PointSeq(b.clone()));
        let want = dtw_naive(&a, &b, a.len() - 1, b.len() - 1);
        assert!((got - want).abs() <= TOL, "case {case}: {got} vs {want}");
    }
}

#[test]
fn frechet_matches_naive_recursion() {
    let mut rng = rng::root(0xF3C);
    for case in 0..200 {
        let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_points(&mut rng, la);
        let b = random_points(&mut rng, lb);
        let got = frechet(&PointSeq(a.clone()), &PointSeq(b.clone()));
        let want = frechet_naive(&a, &b, a.len() - 1, b.len() - 1);
        assert!((got - want).abs() <= TOL, "case {case}: {got} vs {want}");
    }
}

#[test]
fn hausdorff_matches_plain_definition() {
    let mut rng = rng::root(0x4A5);
    for case in 0..200 {
        let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = random_points(&mut rng, la);
        let b = random_points(&mut rng, lb);
        let got = hausdorff(&PointSeq(a.clone()), &PointSeq(b.clone()));
        let want = hausdorff_plain(&a, &b);
        assert!((got - want).abs() <= TOL, "case {case}: {got} vs {want}");
    }
}

#[test]
fn all_measures_symmetric_nonnegative_zero_on_identity() {
    let mut rng = rng::root(0x515);
    for _ in 0..50 {
        let (la, lb) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let a = PointSeq(random_points(&mut rng, la));
        let b = PointSeq(random_points(&mut rng, lb));
        for f in [emd, hausdorff, dtw, frechet] {
            let ab = f(&a, &b);
            let ba = f(&b, &a);
            assert!(ab >= 0.0);
            assert!((ab - ba).abs() <= TOL, "asymmetric: {ab} vs {ba}");
            assert!(f(&a, &a).abs() <= TOL);
        }
    }
}
