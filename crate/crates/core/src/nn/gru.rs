//! Gated recurrent unit cell with backpropagation through time.

use super::layers::Dense;
use super::losses::sigmoid;
use super::params::{ParamId, ParamLayoutBuilder, ParamSet};
use super::Scalar;
use crate::rng::Rng;

/// Standard GRU:
/// z = sig(Wz x + Uz h + bz), r = sig(Wr x + Ur h + br),
/// hhat = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*hhat.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
    wz: ParamId,
    uz: ParamId,
    bz: ParamId,
    wr: ParamId,
    ur: ParamId,
    br: ParamId,
    wh: ParamId,
    uh: ParamId,
    bh: ParamId,
}

/// Per-step activations needed by the backward pass.
#[derive(Debug, Clone, Default)]
pub struct GruStepCache<F> {
    pub x: Vec<F>,
    pub h_prev: Vec<F>,
    pub z: Vec<F>,
    pub r: Vec<F>,
    pub hhat: Vec<F>,
}

impl GruCell {
    pub fn new(builder: &mut ParamLayoutBuilder, name: &str, input: usize, hidden: usize) -> Self {
        GruCell {
            input,
            hidden,
            wz: builder.add(format!("{name}.wz"), &[hidden, input]),
            uz: builder.add(format!("{name}.uz"), &[hidden, hidden]),
            bz: builder.add(format!("{name}.bz"), &[hidden]),
            wr: builder.add(format!("{name}.wr"), &[hidden, input]),
            ur: builder.add(format!("{name}.ur"), &[hidden, hidden]),
            br: builder.add(format!("{name}.br"), &[hidden]),
            wh: builder.add(format!("{name}.wh"), &[hidden, input]),
            uh: builder.add(format!("{name}.uh"), &[hidden, hidden]),
            bh: builder.add(format!("{name}.bh"), &[hidden]),
        }
    }

    pub fn init<F: Scalar>(&self, ps: &mut ParamSet<F>, rng: &mut Rng) {
        for (id, fan_in) in [
            (self.wz, self.input),
            (self.uz, self.hidden),
            (self.wr, self.input),
            (self.ur, self.hidden),
            (self.wh, self.input),
            (self.uh, self.hidden),
        ] {
            super::init::xavier(ps, id, fan_in, self.hidden, rng);
        }
    }

    fn matvec<F: Scalar>(ps: &ParamSet<F>, id: ParamId, x: &[F], out: &mut [F]) {
        let w = ps.get(id);
        let cols = x.len();
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &w[o * cols..(o + 1) * cols];
            let mut acc = F::ZERO;
            for (wv, xv) in row.iter().zip(x) {
                acc += *wv * *xv;
            }
            *out_o += acc;
        }
    }

    pub fn forward<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        x: &[F],
        h_prev: &[F],
        h_out: &mut [F],
        mut cache: Option<&mut GruStepCache<F>>,
    ) {
        let h = self.hidden;
        let mut z = ps.get(self.bz).to_vec();
        Self::matvec(ps, self.wz, x, &mut z);
        Self::matvec(ps, self.uz, h_prev, &mut z);
        for v in z.iter_mut() {
            *v = sigmoid(*v);
        }
        let mut r = ps.get(self.br).to_vec();
        Self::matvec(ps, self.wr, x, &mut r);
        Self::matvec(ps, self.ur, h_prev, &mut r);
        for v in r.iter_mut() {
            *v = sigmoid(*v);
        }
        let rh: Vec<F> = (0..h).map(|i| r[i] * h_prev[i]).collect();
        let mut hhat = ps.get(self.bh).to_vec();
        Self::matvec(ps, self.wh, x, &mut hhat);
        Self::matvec(ps, self.uh, &rh, &mut hhat);
        for v in hhat.iter_mut() {
            *v = v.tanh();
        }
        for i in 0..h {
            h_out[i] = (F::ONE - z[i]) * h_prev[i] + z[i] * hhat[i];
        }
        if let Some(c) = cache.as_deref_mut() {
            c.x = x.to_vec();
            c.h_prev = h_prev.to_vec();
            c.z = z;
            c.r = r;
            c.hhat = hhat;
        }
    }

    /// Accumulates gradients for one step; `dh` is the loss gradient wrt the
    /// step's output. `dx` and `dh_prev` are accumulated into.
    pub fn backward<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        cache: &GruStepCache<F>,
        dh: &[F],
        dx: &mut [F],
        dh_prev: &mut [F],
        grads: &mut [F],
    ) {
        let h = self.hidden;
        let (z, r, hhat, h_prev) = (&cache.z, &cache.r, &cache.hhat, &cache.h_prev);
        // Pre-activation gradients for the three gates.
        let mut da_h = vec![F::ZERO; h];
        let mut da_z = vec![F::ZERO; h];
        for i in 0..h {
            let dhhat = dh[i] * z[i];
            da_h[i] = dhhat * (F::ONE - hhat[i] * hhat[i]);
            let dz = dh[i] * (hhat[i] - h_prev[i]);
            da_z[i] = dz * z[i] * (F::ONE - z[i]);
            dh_prev[i] += dh[i] * (F::ONE - z[i]);
        }
        // d(r*h_prev) = Uh^T da_h.
        let uh = ps.get(self.uh);
        let mut drh = vec![F::ZERO; h];
        for o in 0..h {
            let g = da_h[o];
            if g.to_f64() == 0.0 {
                continue;
            }
            let row = &uh[o * h..(o + 1) * h];
            for (i, uv) in row.iter().enumerate() {
                drh[i] += g * *uv;
            }
        }
        let mut da_r = vec![F::ZERO; h];
        for i in 0..h {
            dh_prev[i] += drh[i] * r[i];
            da_r[i] = drh[i] * h_prev[i] * r[i] * (F::ONE - r[i]);
        }
        let rh: Vec<F> = (0..h).map(|i| r[i] * h_prev[i]).collect();
        self.accumulate(ps, self.wz, self.uz, self.bz, &cache.x, h_prev, &da_z, dx, dh_prev, grads);
        self.accumulate(ps, self.wr, self.ur, self.br, &cache.x, h_prev, &da_r, dx, dh_prev, grads);
        // The candidate's recurrent input is r*h_prev; route its gradient
        // into drh ourselves, so pass a scratch buffer instead of dh_prev.
        let mut d_rh_direct = vec![F::ZERO; h];
        self.accumulate(ps, self.wh, self.uh, self.bh, &cache.x, &rh, &da_h, dx, &mut d_rh_direct, grads);
        // d_rh_direct was already folded into dh_prev/da_r via drh above.
    }

    #[allow(clippy::too_many_arguments)]
    fn accumulate<F: Scalar>(
        &self,
        ps: &ParamSet<F>,
        w: ParamId,
        u: ParamId,
        b: ParamId,
        x: &[F],
        hin: &[F],
        da: &[F],
        dx: &mut [F],
        dhin: &mut [F],
        grads: &mut [F],
    ) {
        let wspec = ps.layout.spec(w);
        let uspec = ps.layout.spec(u);
        let bspec = ps.layout.spec(b);
        let wdata = ps.get(w);
        let udata = ps.get(u);
        let (ni, h) = (self.input, self.hidden);
        for o in 0..h {
            let g = da[o];
            if g.to_f64() == 0.0 {
                continue;
            }
            for (i, xv) in x.iter().enumerate() {
                grads[wspec.offset + o * ni + i] += g * *xv;
            }
            for (i, hv) in hin.iter().enumerate() {
                grads[uspec.offset + o * h + i] += g * *hv;
            }
            grads[bspec.offset + o] += g;
            let wrow = &wdata[o * ni..(o + 1) * ni];
            for (i, wv) in wrow.iter().enumerate() {
                dx[i] += g * *wv;
            }
            let urow = &udata[o * h..(o + 1) * h];
            for (i, uv) in urow.iter().enumerate() {
                dhin[i] += g * *uv;
            }
        }
    }
}

/// Dense wrapper so generator heads can reuse the layer type.
pub type Projection = Dense;
