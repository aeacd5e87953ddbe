//! Classical layout-similarity measures used as retrieval baselines: exact
//! EMD, Hausdorff, DTW, discrete Frechet, and number-based peer matching.
//!
//! The first four operate on the point sequence of a layout (cue location
//! first, object balls ascending by number); peer matching needs the ball
//! numbers and takes layouts directly. Every point-distance evaluation is
//! counted on a thread-local counter so complexity claims can be checked by
//! instrumentation rather than wall clock.

use crate::layout::Layout;

/// Counters of point-distance evaluations.
pub mod ops {
    use std::cell::Cell;

    thread_local! {
        static COUNT: Cell<u64> = const { Cell::new(0) };
    }

    pub fn reset() {
        COUNT.with(|c| c.set(0));
    }

    #[inline]
    pub(super) fn bump() {
        COUNT.with(|c| c.set(c.get() + 1));
    }

    pub fn get() -> u64 {
        COUNT.with(|c| c.get())
    }
}

pub type Point = (f64, f64);

#[inline]
fn eucl(a: Point, b: Point) -> f64 {
    ops::bump();
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Ordered point view of a layout: cue first, then object balls ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSeq(pub Vec<Point>);

impl PointSeq {
    pub fn from_layout(layout: &Layout) -> Self {
        let mut layout = layout.clone();
        layout.canonicalize();
        PointSeq(layout.balls.iter().map(|b| (b.x, b.y)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cost scale for the exact integer transportation solve; half a unit of
/// rounding at this scale is far below any tolerance used on the results.
const COST_SCALE: f64 = 1e12;

/// Exact earth mover's distance between uniform distributions on the two
/// point sets, solved as a min-cost flow on integer-scaled masses and costs
/// (successive shortest paths with Dijkstra and potentials).
pub fn emd(a: &PointSeq, b: &PointSeq) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "emd on empty point set");
    let (m, k) = (a.len(), b.len());
    // Left nodes supply k units each, right nodes demand m units each, so
    // both sides total m*k units and unit mass divides out at the end.
    let mut flow = MinCostFlow::new(m + k + 2);
    let src = m + k;
    let snk = m + k + 1;
    for i in 0..m {
        flow.add_edge(src, i, k as i64, 0);
        for j in 0..k {
            let cost = (eucl(a.0[i], b.0[j]) * COST_SCALE).round() as i64;
            flow.add_edge(i, m + j, (m * k) as i64, cost);
        }
    }
    for j in 0..k {
        flow.add_edge(m + j, snk, m as i64, 0);
    }
    let cost = flow.run(src, snk, (m * k) as i64);
    cost as f64 / COST_SCALE / (m * k) as f64
}

struct Edge {
    to: usize,
    cap: i64,
    cost: i64,
}

const INF_COST: i64 = i64::MAX / 4;

/// Dense-graph successive shortest paths over integer costs, so shortest
/// paths are exact and augmentation always makes integer progress.
struct MinCostFlow {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl MinCostFlow {
    fn new(nodes: usize) -> Self {
        MinCostFlow {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
    }

    fn run(&mut self, src: usize, snk: usize, mut want: i64) -> i64 {
        let n = self.adj.len();
        let mut potential = vec![0i64; n];
        let mut total = 0i64;
        while want > 0 {
            // Dijkstra over reduced costs; the graph is tiny, O(n^2) is fine.
            let mut dist = vec![INF_COST; n];
            let mut done = vec![false; n];
            let mut pre_edge = vec![usize::MAX; n];
            dist[src] = 0;
            for _ in 0..n {
                let mut u = usize::MAX;
                let mut best = INF_COST;
                for v in 0..n {
                    if !done[v] && dist[v] < best {
                        best = dist[v];
                        u = v;
                    }
                }
                if u == usize::MAX {
                    break;
                }
                done[u] = true;
                for &eid in &self.adj[u] {
                    let e = &self.edges[eid];
                    if e.cap <= 0 || done[e.to] {
                        continue;
                    }
                    let nd = dist[u] + e.cost + potential[u] - potential[e.to];
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        pre_edge[e.to] = eid;
                    }
                }
            }
            assert!(dist[snk] < INF_COST, "transportation network disconnected");
            for v in 0..n {
                if dist[v] < INF_COST {
                    potential[v] += dist[v];
                }
            }
            let mut push = want;
            let mut v = snk;
            while v != src {
                let eid = pre_edge[v];
                push = push.min(self.edges[eid].cap);
                v = self.edges[eid ^ 1].to;
            }
            let mut v = snk;
            while v != src {
                let eid = pre_edge[v];
                self.edges[eid].cap -= push;
                self.edges[eid ^ 1].cap += push;
                total += self.edges[eid].cost * push;
                v = self.edges[eid ^ 1].to;
            }
            want -= push;
        }
        total
    }
}

/// max(h(A,B), h(B,A)) with h the directed max-min distance. The inner loop
/// short-circuits once a point cannot raise the running maximum; the plain
/// definition serves as its oracle in tests.
pub fn hausdorff(a: &PointSeq, b: &PointSeq) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "hausdorff on empty point set");
    directed_hausdorff(&a.0, &b.0).max(directed_hausdorff(&b.0, &a.0))
}

fn directed_hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let mut max = 0.0f64;
    for &pa in a {
        let mut min = f64::INFINITY;
        for &pb in b {
            let d = eucl(pa, pb);
            if d < min {
                min = d;
                if min <= max {
                    break;
                }
            }
        }
        if min > max {
            max = min;
        }
    }
    max
}

/// Dynamic time warping cost: sum of distances along the optimal warping
/// path.
pub fn dtw(a: &PointSeq, b: &PointSeq) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "dtw on empty point set");
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur[0] = f64::INFINITY;
        for j in 1..=m {
            let d = eucl(a.0[i - 1], b.0[j - 1]);
            cur[j] = d + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

/// Discrete Frechet distance: the minimax coupling cost.
pub fn frechet(a: &PointSeq, b: &PointSeq) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "frechet on empty point set");
    let (n, m) = (a.len(), b.len());
    let mut ca = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = eucl(a.0[i], b.0[j]);
            let reach = match (i, j) {
                (0, 0) => d,
                (_, 0) => ca[(i - 1) * m].max(d),
                (0, _) => ca[j - 1].max(d),
                _ => ca[(i - 1) * m + j]
                    .min(ca[(i - 1) * m + j - 1])
                    .min(ca[i * m + j - 1])
                    .max(d),
            };
            ca[i * m + j] = reach;
        }
    }
    ca[n * m - 1]
}

/// Mean distance between balls matched by number; leftover balls of the two
/// sides are aligned ascending and matched positionally, surplus ignored.
pub fn peer_matching(a: &Layout, b: &Layout) -> f64 {
    let mut pairs: Vec<(Point, Point)> = Vec::new();
    let mut left: Vec<&crate::layout::Ball> = Vec::new();
    let mut right: Vec<&crate::layout::Ball> = Vec::new();
    for ball in &a.balls {
        match b.ball(ball.num) {
            Some(other) => pairs.push((ball.position(), other.position())),
            None => left.push(ball),
        }
    }
    for ball in &b.balls {
        if a.ball(ball.num).is_none() {
            right.push(ball);
        }
    }
    left.sort_by_key(|b| b.num);
    right.sort_by_key(|b| b.num);
    for (l, r) in left.iter().zip(&right) {
        pairs.push((l.position(), r.position()));
    }
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|(p, q)| eucl(*p, *q)).sum::<f64>() / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Ball;

    fn seq(points: &[Point]) -> PointSeq {
        PointSeq(points.to_vec())
    }

    #[test]
    fn emd_single_and_split_mass() {
        assert_eq!(emd(&seq(&[(0.0, 0.0)]), &seq(&[(3.0, 4.0)])), 5.0);
        let a = seq(&[(0.0, 0.0), (2.0, 0.0)]);
        let b = seq(&[(0.0, 0.0), (0.0, 2.0)]);
        let expected = 0.5 * 8.0f64.sqrt();
        assert!((emd(&a, &b) - expected).abs() < 1e-12);
        assert!(emd(&a, &a).abs() < 1e-12);
    }

    #[test]
    fn emd_unequal_cardinalities() {
        // One point against two: half the mass travels to each target.
        let a = seq(&[(0.0, 0.0)]);
        let b = seq(&[(1.0, 0.0), (0.0, 3.0)]);
        assert!((emd(&a, &b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hausdorff_examples() {
        let a = seq(&[(0.0, 0.0), (10.0, 0.0)]);
        let b = seq(&[(0.0, 0.0)]);
        assert_eq!(hausdorff(&a, &b), 10.0);
        assert_eq!(hausdorff(&b, &a), 10.0);
        assert_eq!(hausdorff(&a, &a), 0.0);
    }

    #[test]
    fn dtw_and_frechet_forced_alignment() {
        let a = seq(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = seq(&[(0.0, 0.0)]);
        assert_eq!(dtw(&a, &b), 1.0);
        assert_eq!(frechet(&a, &b), 1.0);
        assert_eq!(dtw(&a, &a), 0.0);
        assert_eq!(frechet(&a, &a), 0.0);
    }

    #[test]
    fn peer_matching_examples() {
        let a = Layout::new("a", vec![Ball::new(0, 0.0, 0.0), Ball::new(1, 10.0, 0.0)]);
        let b = Layout::new("b", vec![Ball::new(0, 0.0, 5.0), Ball::new(1, 10.0, 3.0)]);
        assert_eq!(peer_matching(&a, &b), 4.0);
        assert_eq!(peer_matching(&a, &a), 0.0);

        // Leftovers 1 and 9 pair positionally after the direct 2<->2 match.
        let a = Layout::new("a", vec![Ball::new(1, 0.0, 0.0), Ball::new(2, 5.0, 5.0)]);
        let b = Layout::new("b", vec![Ball::new(2, 5.0, 5.0), Ball::new(9, 6.0, 0.0)]);
        let expected = (0.0 + eucl_plain((0.0, 0.0), (6.0, 0.0))) / 2.0;
        assert!((peer_matching(&a, &b) - expected).abs() < 1e-12);
    }

    fn eucl_plain(a: Point, b: Point) -> f64 {
        (a.0 - b.0).hypot(a.1 - b.1)
    }

    #[test]
    fn point_seq_orders_cue_first_then_ascending() {
        let layout = Layout::new(
            "o",
            vec![
                Ball::new(5, 4.0, 4.0),
                Ball::new(0, 1.0, 1.0),
                Ball::new(2, 2.0, 2.0),
            ],
        );
        let seq = PointSeq::from_layout(&layout);
        assert_eq!(seq.0, vec![(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]);
    }

    #[test]
    fn distance_op_counter_scales_quadratically() {
        let mk = |n: usize, off: f64| {
            PointSeq((0..n).map(|i| (i as f64 * 3.0 + off, off)).collect())
        };
        let (a5, b5) = (mk(5, 0.0), mk(5, 7.0));
        let (a10, b10) = (mk(10, 0.0), mk(10, 7.0));
        ops::reset();
        dtw(&a5, &b5);
        let small = ops::get();
        ops::reset();
        dtw(&a10, &b10);
        let big = ops::get();
        assert_eq!(small, 25);
        assert_eq!(big, 100);
    }
}
