//! Loss functions and the Euclidean-distance node used by the triplet loss.

use super::Scalar;

pub const PROB_CLAMP: f64 = 1e-7;

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(logits: &[F], out: &mut [F]) {
    let max = logits
        .iter()
        .fold(F::from_f64(f64::NEG_INFINITY), |a, b| a.maxv(*b));
    let mut sum = F::ZERO;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (*l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// Cross-entropy of a softmax over `logits` against `label`.
/// Returns the loss and the probability vector.
pub fn cross_entropy<F: Scalar>(logits: &[F], label: usize) -> (F, Vec<F>) {
    let mut probs = vec![F::ZERO; logits.len()];
    softmax(logits, &mut probs);
    let p = probs[label].maxv(F::from_f64(PROB_CLAMP));
    (-p.ln(), probs)
}

/// d(loss)/d(logits) for softmax cross-entropy: `probs - onehot(label)`,
/// scaled by `upstream`.
pub fn cross_entropy_grad<F: Scalar>(probs: &[F], label: usize, upstream: F, dlogits: &mut [F]) {
    for (i, (d, p)) in dlogits.iter_mut().zip(probs).enumerate() {
        let target = if i == label { F::ONE } else { F::ZERO };
        *d += upstream * (*p - target);
    }
}

pub fn sigmoid<F: Scalar>(x: F) -> F {
    F::ONE / (F::ONE + (-x).exp())
}

/// Binary cross-entropy of a probability against a boolean target, with the
/// probability clamped away from 0 and 1.
pub fn bce<F: Scalar>(prob: F, target: bool) -> F {
    let lo = F::from_f64(PROB_CLAMP);
    let hi = F::from_f64(1.0 - PROB_CLAMP);
    let p = if prob < lo {
        lo
    } else if prob > hi {
        hi
    } else {
        prob
    };
    if target {
        -p.ln()
    } else {
        -(F::ONE - p).ln()
    }
}

/// BCE through a sigmoid head. Returns (loss, probability); the logit
/// gradient is the stable `prob - target`.
pub fn sigmoid_bce_with_logit<F: Scalar>(logit: F, target: bool) -> (F, F) {
    let p = sigmoid(logit);
    (bce(p, target), p)
}

pub fn sigmoid_bce_grad<F: Scalar>(prob: F, target: bool) -> F {
    prob - if target { F::ONE } else { F::ZERO }
}

/// Hinge triplet loss `max(d_pos - d_neg + margin, 0)`.
pub fn triplet<F: Scalar>(d_pos: F, d_neg: F, margin: F) -> F {
    (d_pos - d_neg + margin).maxv(F::ZERO)
}

pub fn euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    let mut acc = F::ZERO;
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Backward of `d = ||a - b||`: adds `upstream * (a - b) / d` into `da` and
/// the negation into `db`. The zero-distance subgradient is zero.
pub fn euclidean_grad<F: Scalar>(a: &[F], b: &[F], d: F, upstream: F, da: &mut [F], db: &mut [F]) {
    if d.to_f64() == 0.0 {
        return;
    }
    let scale = upstream / d;
    for i in 0..a.len() {
        let g = scale * (a[i] - b[i]);
        da[i] += g;
        db[i] -= g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_hinge_cases() {
        assert_eq!(triplet(2.0, 1.0, 1.0), 2.0);
        assert_eq!(triplet(0.0, 3.0, 1.0), 0.0);
        assert_eq!(triplet(1.0, 1.0, 0.0), 0.0);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let mut out = [0.0f64; 4];
        softmax(&[10.0, -2.0, 3.0, 3.0], &mut out);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out.iter().all(|p| *p >= 0.0));
        assert!(out[0] > out[2]);
    }

    #[test]
    fn bce_limits() {
        // Confident right answers drive the loss toward zero.
        assert!(bce(1.0 - 1e-9, true) < 1e-6);
        assert!(bce(1e-9, false) < 1e-6);
        // Coin-flip output costs ln 2.
        assert!((bce(0.5f64, true) - std::f64::consts::LN_2).abs() < 1e-12);
        // Clamping keeps the worst case finite.
        assert!(bce(0.0f64, true).is_finite());
    }

    #[test]
    fn cross_entropy_perfect_prediction() {
        let (loss, probs) = cross_entropy(&[100.0f64, 0.0], 0);
        assert!(loss < 1e-6);
        assert!(probs[0] > 0.999);
    }

    #[test]
    fn euclidean_zero_distance_has_zero_grad() {
        let a = [1.0f64, 2.0];
        let mut da = [0.0; 2];
        let mut db = [0.0; 2];
        euclidean_grad(&a, &a, 0.0, 1.0, &mut da, &mut db);
        assert_eq!(da, [0.0; 2]);
        assert_eq!(db, [0.0; 2]);
    }
}
