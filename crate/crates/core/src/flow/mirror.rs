//! Mirror-map quantities of the hyperbolic entropy, evaluated in log space so
//! that initialisation scales down to `α = 1e-300` never underflow where it
//! matters.

use nalgebra::DVector;

const SATURATION: f64 = 0.9 * 709.782712893384;

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln sinh x` for `x ≥ 0`; `-∞` at zero.
fn ln_sinh(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln() - std::f64::consts::LN_2
}

/// `β(ζ)_i = α² sinh ζ_i`, with the exponent clamped below `0.9·ln(f64::MAX)`.
/// The flag reports whether any coordinate hit the clamp.
pub fn beta_from_zeta(zeta: &DVector<f64>, log_alpha: f64) -> (DVector<f64>, bool) {
    let mut saturated = false;
    let beta = zeta.map(|z| {
        let mut e = 2.0 * log_alpha + ln_sinh(z.abs());
        if e > SATURATION {
            e = SATURATION;
            saturated = true;
        }
        z.signum() * e.exp()
    });
    (beta, saturated)
}

/// Inverse of [`beta_from_zeta`]: `ζ_i = asinh(β_i/α²)`.
pub fn zeta_from_beta(beta: &DVector<f64>, log_alpha: f64) -> DVector<f64> {
    beta.map(|b| b.signum() * asinh_scaled(b.abs(), log_alpha))
}

/// `asinh(b/α²)` for `b ≥ 0`.
fn asinh_scaled(b: f64, log_alpha: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let ln_x = b.ln() - 2.0 * log_alpha;
    if ln_x < 20.0 {
        ln_x.exp().asinh()
    } else {
        // asinh x = ln x + ln(1 + sqrt(1 + x⁻²))
        ln_x + (1.0 + (-2.0 * ln_x).exp()).sqrt().ln_1p()
    }
}

/// Weights `(u, v)` of the diagonal network realising `β = u ⊙ v` from the
/// initialisation `u₀ = √2·α, v₀ = 0`, so that `u² − v² = 2α²`.
pub fn weights_from_beta(beta: &DVector<f64>, log_alpha: f64) -> (DVector<f64>, DVector<f64>) {
    let la2 = 2.0 * log_alpha;
    let u = if la2 > -600.0 {
        let a2 = la2.exp();
        beta.map(|b| (a2 + b.hypot(a2)).sqrt())
    } else {
        beta.map(|b| {
            // ln sqrt(β² + α⁴)
            let ln_h = if b == 0.0 { la2 } else { 0.5 * log_add_exp(2.0 * b.abs().ln(), 2.0 * la2) };
            (0.5 * log_add_exp(la2, ln_h)).exp()
        })
    };
    let v = beta.zip_map(&u, |b, u| b / u);
    (u, v)
}

/// Hyperbolic entropy `φ_α(β) = ½ Σ (β_i asinh(β_i/α²) − sqrt(β_i² + α⁴) + α²)`,
/// divided by `ln(1/α)` when `rescaled`.
pub fn potential(beta: &DVector<f64>, log_alpha: f64, rescaled: bool) -> f64 {
    let la2 = 2.0 * log_alpha;
    let total: f64 = beta
        .iter()
        .map(|&b| {
            let b = b.abs();
            if b == 0.0 {
                return 0.0;
            }
            let ln_x = b.ln() - la2;
            if ln_x < 13.8 {
                // α²·f(x) with f(x) = x·asinh x − x²/(1 + sqrt(1 + x²)), free of cancellation
                let x = ln_x.exp();
                let f = x * x.asinh() - x * x / (1.0 + (1.0 + x * x).sqrt());
                if f <= 0.0 {
                    0.0
                } else {
                    (la2 + f.ln()).exp()
                }
            } else {
                let inv_x2 = (-2.0 * ln_x).exp();
                let asinh = ln_x + (1.0 + inv_x2).sqrt().ln_1p();
                b * asinh - b * (1.0 + inv_x2).sqrt() + la2.exp()
            }
        })
        .sum();
    let phi = 0.5 * total;
    if rescaled {
        phi / -log_alpha
    } else {
        phi
    }
}

/// `ln α₀` for the scale below which the iterates stay bounded by
/// `3‖β*‖₁ + 1`: `α₀ = min(1, sqrt‖β*‖₁, 1/(2‖β*‖₁), exp(−d/2))`.
pub fn log_alpha_threshold(l1_norm: f64, d: usize) -> f64 {
    if l1_norm <= 0.0 {
        return f64::NEG_INFINITY;
    }
    0f64.min(0.5 * l1_norm.ln()).min(-(2.0 * l1_norm).ln()).min(-(d as f64) / 2.0)
}
