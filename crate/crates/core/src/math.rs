//! Numerically stable logistic helpers.

/// Logistic link `1 / (1 + exp(-x))`, evaluated without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    let r = 1.0 / (1.0 + e);
    if x >= 0.0 {
        r
    } else {
        e * r
    }
}

/// `log(1 + exp(x))` as `max(x, 0) + log1p(exp(-|x|))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Fused `(softplus(x), sigmoid(x))` sharing one exponential.
#[inline]
pub fn softplus_and_sigmoid(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let sp = x.max(0.0) + e.ln_1p();
    let r = 1.0 / (1.0 + e);
    (sp, if x >= 0.0 { r } else { e * r })
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_on_moderate_inputs() {
        for x in [-20.0, -3.0, -0.5, 0.0, 0.5, 3.0, 20.0] {
            let naive = (1.0f64 + f64::exp(x)).ln();
            assert!((softplus(x) - naive).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn extremes_stay_finite() {
        for x in [-1e6, -500.0, 500.0, 1e6] {
            assert!(softplus(x).is_finite());
            let s = sigmoid(x);
            assert!((0.0..=1.0).contains(&s));
        }
        assert_eq!(softplus(1e6), 1e6);
    }

    #[test]
    fn fused_agrees_with_separate() {
        for x in [-40.0, -1.0, 0.0, 1.0, 40.0] {
            let (sp, s) = softplus_and_sigmoid(x);
            assert_eq!(sp, softplus(x));
            assert_eq!(s, sigmoid(x));
        }
    }

    #[test]
    fn logit_inverts_sigmoid() {
        for x in [-5.0, -0.3, 0.0, 2.0] {
            assert!((logit(sigmoid(x)) - x).abs() < 1e-12);
        }
    }
}
