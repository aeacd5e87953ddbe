//! Parameter initialization. Draws are made in `f64` and cast, so `f32` and
//! `f64` instantiations of the same model start from identical values.

use super::{ParamId, ParamSet, Scalar};
use crate::rng::Rng;
use rand::Rng as _;

/// Uniform(-bound, bound).
pub fn uniform<F: Scalar>(ps: &mut ParamSet<F>, id: ParamId, bound: f64, rng: &mut Rng) {
    for v in ps.get_mut(id) {
        *v = F::from_f64(rng.gen_range(-bound..bound));
    }
}

/// Glorot-style uniform: bound = sqrt(6 / (fan_in + fan_out)).
pub fn xavier<F: Scalar>(
    ps: &mut ParamSet<F>,
    id: ParamId,
    fan_in: usize,
    fan_out: usize,
    rng: &mut Rng,
) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(ps, id, bound, rng);
}

pub const EMBED_BOUND: f64 = 0.05;
