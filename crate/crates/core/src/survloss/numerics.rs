//! Overflow-free scalar building blocks.

/// `ln(1 + e^x)` without overflow or loss of small values.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(softplus(x))`, accurate for very negative `x` where softplus underflows.
#[inline]
pub fn ln_softplus(x: f64) -> f64 {
    if x < -30.0 {
        // ln(ln(1+u)) = ln u - u/2 + O(u^2)
        x - 0.5 * x.exp()
    } else {
        softplus(x).ln()
    }
}

/// `sigmoid(x) / softplus(x)`, the derivative of `ln(softplus(x))`.
#[inline]
pub fn sigmoid_over_softplus(x: f64) -> f64 {
    if x < -30.0 {
        1.0 - 0.5 * x.exp()
    } else {
        sigmoid(x) / softplus(x)
    }
}

/// Inverse of softplus: the `z` with `softplus(z) = y`, for `y > 0`.
#[inline]
pub fn inv_softplus(y: f64) -> f64 {
    // y + ln(1 - e^-y), stable for both tiny and huge y
    y + (-(-y).exp_m1()).ln()
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + (-(a - b).abs()).exp().ln_1p()
}

/// `ln(sum(exp(v)))`; `-inf` for an empty slice.
pub fn log_sum_exp(v: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let hi = v.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    if hi == f64::INFINITY {
        return hi;
    }
    hi + v.into_iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}
