//! Dense layers and the 1-D convolution bank with global max-pooling.

use super::params::{ParamId, ParamLayoutBuilder, ParamSet};
use super::{ops, Scalar};
use crate::rng::Rng;

/// Fully-connected layer, weights row-major `output x input`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(
        builder: &mut ParamLayoutBuilder,
        name: &str,
        input: usize,
        output: usize,
    ) -> Self {
        let w = builder.add(format!("{name}.w"), &[output, input]);
        let b = builder.add(format!("{name}.b"), &[output]);
        Dense {
            w,
            b,
            input,
            output,
        }
    }

    pub fn init<F: Scalar>(&self, ps: &mut ParamSet<F>, rng: &mut Rng) {
        super::init::xavier(ps, self.w, self.input, self.output, rng);
        // biases start at zero
    }

    pub fn forward<F: Scalar>(&self, ps: &ParamSet<F>, x: &[F], y: &mut [F]) {
        debug_assert_eq!(x.len(), self.input);
        debug_assert_eq!(y.len(), self.output);
        let w = ps.get(self.w);
        let b = ps.get(self.b);
        for (o, y_o) in y.iter_mut().enumerate() {
            let row = &w[o * self.input..(o + 1) * self.input];
            let mut acc = F::ZERO;
            for (wi, xi) in row.iter().zip(x) {
                acc += *wi * *xi;
            }
            *y_o = acc + b[o];
        }
        ops::add((self.input * self.output) as u64);
    }

    /// Accumulates parameter gradients and, when `dx` is given, the input
    /// gradient.
    pub fn backward<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        dy: &[F],
        mut dx: Option<&mut [F]>,
        grads: &mut [F],
    ) {
        let w = ps.get(self.w);
        let wspec = ps.layout.spec(self.w);
        let bspec = ps.layout.spec(self.b);
        for (o, g) in dy.iter().enumerate() {
            let g = *g;
            let row_off = wspec.offset + o * self.input;
            for (i, xi) in x.iter().enumerate() {
                grads[row_off + i] += g * *xi;
            }
            grads[bspec.offset + o] += g;
            if let Some(dx) = dx.as_deref_mut() {
                let row = &w[o * self.input..(o + 1) * self.input];
                for (di, wi) in dx.iter_mut().zip(row) {
                    *di += g * *wi;
                }
            }
        }
    }
}

/// Filters of one width, weights row-major `count x (width*k_prime)`.
#[derive(Debug, Clone)]
pub struct ConvGroup {
    pub width: usize,
    pub count: usize,
    pub w: ParamId,
    pub b: ParamId,
}

/// Bank of full-width convolution filters over the ball axis, ReLU, then
/// global max-pooling; emits one feature per filter.
#[derive(Debug, Clone)]
pub struct ConvBank {
    pub groups: Vec<ConvGroup>,
    pub k_prime: usize,
    /// Total filter count; the pooled output width.
    pub k: usize,
}

/// Pooling bookkeeping for the backward pass: winning window per filter and
/// whether its pre-activation was positive.
#[derive(Debug, Clone, Default)]
pub struct ConvCache {
    pub argmax: Vec<u32>,
    pub active: Vec<bool>,
}

impl ConvBank {
    /// Groups `widths` (one entry per filter) by width, preserving first-seen
    /// order of the widths.
    pub fn new(builder: &mut ParamLayoutBuilder, widths: &[usize], k_prime: usize) -> Self {
        let mut order: Vec<usize> = Vec::new();
        for w in widths {
            if !order.contains(w) {
                order.push(*w);
            }
        }
        let groups = order
            .into_iter()
            .map(|width| {
                let count = widths.iter().filter(|w| **w == width).count();
                ConvGroup {
                    width,
                    count,
                    w: builder.add(format!("conv.w{width}.w"), &[count, width * k_prime]),
                    b: builder.add(format!("conv.w{width}.b"), &[count]),
                }
            })
            .collect::<Vec<_>>();
        ConvBank {
            k: widths.len(),
            groups,
            k_prime,
        }
    }

    pub fn max_width(&self) -> usize {
        self.groups.iter().map(|g| g.width).max().unwrap_or(0)
    }

    pub fn init<F: Scalar>(&self, ps: &mut ParamSet<F>, rng: &mut Rng) {
        for g in &self.groups {
            super::init::xavier(ps, g.w, g.width * self.k_prime, 1, rng);
        }
    }

    /// `x` is the `n x k_prime` embedded layout; `out` receives `k` pooled
    /// features.
    pub fn forward<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        n: usize,
        out: &mut [F],
        cache: &mut ConvCache,
    ) {
        debug_assert_eq!(x.len(), n * self.k_prime);
        debug_assert_eq!(out.len(), self.k);
        cache.argmax.clear();
        cache.argmax.resize(self.k, 0);
        cache.active.clear();
        cache.active.resize(self.k, false);
        let mut f0 = 0usize;
        for group in &self.groups {
            let windows = n + 1 - group.width;
            let wlen = group.width * self.k_prime;
            let wdata = ps.get(group.w);
            let bdata = ps.get(group.b);
            for f in 0..group.count {
                let filter = &wdata[f * wlen..(f + 1) * wlen];
                let mut best = F::ZERO; // ReLU floor
                let mut best_i = 0u32;
                let mut active = false;
                for i in 0..windows {
                    let window = &x[i * self.k_prime..i * self.k_prime + wlen];
                    let mut acc = F::ZERO;
                    for (wv, xv) in filter.iter().zip(window) {
                        acc += *wv * *xv;
                    }
                    acc += bdata[f];
                    // First strict maximizer of the ReLU-ed map wins.
                    if acc > best {
                        best = acc;
                        best_i = i as u32;
                        active = true;
                    }
                }
                out[f0 + f] = best;
                cache.argmax[f0 + f] = best_i;
                cache.active[f0 + f] = active;
            }
            f0 += group.count;
            ops::add((windows * wlen * group.count) as u64);
        }
    }

    pub fn backward<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        _n: usize,
        cache: &ConvCache,
        dout: &[F],
        mut dx: Option<&mut [F]>,
        grads: &mut [F],
    ) {
        let mut f0 = 0usize;
        for group in &self.groups {
            let wlen = group.width * self.k_prime;
            let wdata = ps.get(group.w);
            let wspec = ps.layout.spec(group.w);
            let bspec = ps.layout.spec(group.b);
            for f in 0..group.count {
                let g = dout[f0 + f];
                if !cache.active[f0 + f] || g.to_f64() == 0.0 {
                    continue;
                }
                let i = cache.argmax[f0 + f] as usize;
                let window = &x[i * self.k_prime..i * self.k_prime + wlen];
                let w_off = wspec.offset + f * wlen;
                for (j, xv) in window.iter().enumerate() {
                    grads[w_off + j] += g * *xv;
                }
                grads[bspec.offset + f] += g;
                if let Some(dx) = dx.as_deref_mut() {
                    let filter = &wdata[f * wlen..(f + 1) * wlen];
                    let dwin = &mut dx[i * self.k_prime..i * self.k_prime + wlen];
                    for (dv, wv) in dwin.iter_mut().zip(filter) {
                        *dv += g * *wv;
                    }
                }
            }
            f0 += group.count;
        }
    }
}
