//! Exponential integrals, the `Ψ` capacity kernel, and modified Bessel
//! functions of the second kind for orders 0 and 1.
//!
//! `Ψ(A) = e^{1/A} E1(1/A)` is the ergodic capacity (in nats) of a
//! Rayleigh channel with mean SNR `A`. Evaluating it as a product of
//! `exp` and `E1` overflows for small `A`, so the scaled function
//! `e^x E1(x)` is computed directly.

use crate::error::{invalid, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 500;

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || x <= 0.0 {
        return invalid(format!("{name} requires a positive argument, got {x}"));
    }
    Ok(())
}

/// Power series for `E1(x)`, accurate for `0 < x <= 1`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < EPS * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Modified Lentz evaluation of the continued fraction for `e^x E1(x)`,
/// used for `x > 1`.
fn scaled_e1_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn e1(x: f64) -> Result<f64> {
    check_positive("E1", x)?;
    Ok(if x <= 1.0 {
        e1_series(x)
    } else {
        scaled_e1_cf(x) * (-x).exp()
    })
}

/// `e^x E1(x)` without intermediate overflow.
pub fn scaled_e1(x: f64) -> Result<f64> {
    check_positive("scaled E1", x)?;
    Ok(if x <= 1.0 {
        x.exp() * e1_series(x)
    } else {
        scaled_e1_cf(x)
    })
}

/// Exponential integral `Ei(x)` (Cauchy principal value) for `x != 0`.
///
/// For negative arguments this is `-E1(-x)`; for positive arguments the
/// all-positive power series is summed directly.
pub fn ei(x: f64) -> Result<f64> {
    if x.is_nan() || x == 0.0 {
        return invalid(format!("Ei is undefined at {x}"));
    }
    if x < 0.0 {
        return Ok(-e1(-x)?);
    }
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..5 * MAX_ITER {
        term *= x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add < EPS * sum {
            break;
        }
    }
    Ok(EULER_GAMMA + x.ln() + sum)
}

/// `Ψ(A) = -e^{1/A} Ei(-1/A) = E[ln(1 + A·X)]` for `X ~ Exp(1)`.
pub fn psi(a: f64) -> Result<f64> {
    check_positive("psi", a)?;
    Ok(psi_unchecked(a))
}

/// `Ψ` extended by continuity to `Ψ(0) = 0`.
pub(crate) fn psi_nonneg(a: f64) -> f64 {
    if a <= 0.0 {
        0.0
    } else {
        psi_unchecked(a)
    }
}

fn psi_unchecked(a: f64) -> f64 {
    if a < 1e-8 {
        // e^x E1(x) ~ 1/x - 1/x^2 + 2/x^3 for large x
        return a * (1.0 - a * (1.0 - 2.0 * a));
    }
    let x = 1.0 / a;
    if x <= 1.0 {
        x.exp() * e1_series(x)
    } else {
        scaled_e1_cf(x)
    }
}

/// Small-argument expansions of `I0, I1, K0, K1`.
fn bessel_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut k0_sum = 0.0;
    let mut k1_sum = 0.0;
    // term_k = q^k / (k!)^2, term1_k = q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut term1 = 1.0;
    let mut harmonic = 0.0; // H_k
    for k in 0..MAX_ITER {
        let kf = k as f64;
        if k > 0 {
            term *= q / (kf * kf);
            term1 *= q / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
        }
        let harmonic_next = harmonic + 1.0 / (kf + 1.0);
        i0 += term;
        i1 += term1;
        k0_sum += harmonic * term;
        // psi(k+1) + psi(k+2) = H_k + H_{k+1} - 2γ
        k1_sum += (harmonic + harmonic_next - 2.0 * EULER_GAMMA) * term1;
        if term < EPS * i0 && term1 < EPS * i1 {
            break;
        }
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(log_half + EULER_GAMMA) * i0 + k0_sum;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_sum;
    (k0, k1)
}

/// Steed's continued fraction (Temme's normalisation) for `K0, K1`,
/// efficient once `x` exceeds about 2.
fn bessel_cf(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn bessel_pair(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        bessel_series(x)
    } else {
        bessel_cf(x)
    }
}

/// Modified Bessel function of the second kind, order 0.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check_positive("K0", x)?;
    Ok(bessel_pair(x).0)
}

/// Modified Bessel function of the second kind, order 1.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_positive("K1", x)?;
    Ok(bessel_pair(x).1)
}

/// `K_order(x)` for `order` in `{0, 1}`.
pub fn bessel_k(order: u32, x: f64) -> Result<f64> {
    match order {
        0 => bessel_k0(x),
        1 => bessel_k1(x),
        _ => invalid(format!("only orders 0 and 1 are supported, got {order}")),
    }
}

/// Density of `Z = U·V` with `U ~ Exp(mean u)` and `V ~ Exp(mean v)`.
pub fn exp_product_pdf(z: f64, mean_u: f64, mean_v: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    let s = mean_u * mean_v;
    Ok(2.0 / s * bessel_k0(2.0 * (z / s).sqrt())?)
}

/// Distribution function of the same product.
pub fn exp_product_cdf(z: f64, mean_u: f64, mean_v: f64) -> Result<f64> {
    if z <= 0.0 {
        return Ok(0.0);
    }
    let y = 2.0 * (z / (mean_u * mean_v)).sqrt();
    Ok(1.0 - y * bessel_k1(y)?)
}
