//! Independent reference computations used by the validation suite and
//! the tests. Nothing here shares code with the production paths it
//! checks: integrals are done by adaptive quadrature, null spaces by
//! Gram–Schmidt, and optimality by random search.

use num_complex::Complex64;
use rand::Rng;

use crate::linalg::CMat;
use crate::precoder::{csit_objective, relay_input_power, PowerProfile};
use crate::channel::NetworkScenario;
use crate::spectral::VcLayout;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
// Gauss weights for the odd Kronrod nodes (indices 1, 3, 5, 7).
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (val, err) = gk15(f, a, b);
    // Below round-off the error estimate is noise; splitting further only
    // multiplies work.
    if err <= tol.max(16.0 * f64::EPSILON * val.abs()) || depth == 0 {
        return val;
    }
    let mid = 0.5 * (a + b);
    adapt(f, a, mid, 0.5 * tol, depth - 1) + adapt(f, mid, b, 0.5 * tol, depth - 1)
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 40)
}

/// `∫_a^∞ f` for an integrand that decays at least exponentially, summed
/// over intervals of doubling length until they stop contributing.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = 0.5;
    for _ in 0..200 {
        let piece = adapt(&f, lo, lo + width, tol, 40);
        total += piece;
        lo += width;
        width *= 2.0;
        if piece.abs() <= tol * total.abs().max(f64::MIN_POSITIVE) && lo > a + 4.0 {
            break;
        }
    }
    total
}

/// `Ψ(A) = ∫₀^∞ e^{-u} ln(1 + A u) du` by quadrature.
pub fn psi_quadrature(a: f64) -> f64 {
    // Resolve the log's curvature near u ~ 1/A before the exponential tail.
    let knee = (1.0 / a).min(1.0);
    let f = |u: f64| (-u).exp() * (a * u).ln_1p();
    integrate(f, 0.0, knee, 1e-15) + integrate_to_infinity(f, knee, 1e-15)
}

/// `K_ν(x)` for `ν ∈ {0, 1}` from
/// `K_ν(x) = √π x^ν / (2^ν Γ(ν + ½)) ∫₁^∞ e^{-xt} (t² − 1)^{ν − ½} dt`,
/// evaluated after the substitution `t = cosh s`.
pub fn bessel_k_quadrature(order: u32, x: f64) -> f64 {
    assert!(order <= 1 && x > 0.0);
    let f = |s: f64| {
        let sh = s.sinh();
        (-x * s.cosh()).exp() * if order == 0 { 1.0 } else { sh * sh }
    };
    // Integrate on a scaled axis so the decay scale does not depend on x.
    let scale = if x > 1.0 { 1.0 / x.sqrt() } else { 1.0 };
    let val = integrate_to_infinity(|u| f(u * scale) * scale, 0.0, 1e-16);
    if order == 0 { val } else { x * val }
}

/// Orthonormal basis of the null space of `a` by classical Gram–Schmidt
/// with re-orthogonalisation: the rows of `a` are orthonormalised first and
/// the unit vectors that survive span the complement.
pub fn gram_schmidt_null_space(a: &CMat, tol: f64) -> CMat {
    let n = a.ncols();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut complement: Vec<Vec<Complex64>> = Vec::new();
    let candidates = (0..a.nrows())
        .map(|r| (a.row(r).iter().map(|z| z.conj()).collect::<Vec<_>>(), true))
        .chain((0..n).map(|k| {
            let mut e = vec![Complex64::default(); n];
            e[k] = Complex64::from(1.0);
            (e, false)
        }));
    for (mut v, from_rows) in candidates {
        let start: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for _ in 0..2 {
            for b in &basis {
                let proj: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
        }
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > tol * start.max(1.0) {
            v.iter_mut().for_each(|z| *z /= norm);
            if !from_rows {
                complement.push(v.clone());
            }
            basis.push(v);
        }
    }
    let mut out = CMat::zeros(n, complement.len());
    for (j, v) in complement.iter().enumerate() {
        for i in 0..n {
            out[(i, j)] = v[i];
        }
    }
    out
}

/// Best CSIT objective over `n` random profiles that spend the whole
/// budget. Directions are drawn from a flat Dirichlet, so every feasible
/// profile has positive density.
pub fn random_feasible_search<R: Rng + ?Sized>(
    layout: &VcLayout,
    scenario: &NetworkScenario,
    h_su: &[Complex64],
    h_24: &[Complex64],
    use_vcs: bool,
    n: usize,
    rng: &mut R,
) -> f64 {
    let w = relay_input_power(scenario);
    let mut slots: Vec<(usize, bool)> = layout.uc_indices().iter().map(|&i| (i, false)).collect();
    if use_vcs {
        slots.extend(layout.vc_indices().iter().map(|&i| (i, true)));
    }
    let mut best = f64::NEG_INFINITY;
    let mut profile = PowerProfile::zeros(layout.m());
    let mut weights = vec![0.0; slots.len()];
    for _ in 0..n {
        // Sparse corners are drawn as often as interior points.
        let sparse = rng.random::<bool>();
        for v in weights.iter_mut() {
            let e = -(1.0 - rng.random::<f64>()).ln();
            *v = if sparse && rng.random::<f64>() < 0.5 { 0.0 } else { e };
        }
        let total: f64 = weights.iter().sum();
        if total == 0.0 {
            continue;
        }
        for (&(i, is_vc), &v) in slots.iter().zip(&weights) {
            let share = scenario.p_su * v / total;
            if is_vc {
                profile.g[i] = share;
            } else {
                profile.a[i] = share / w;
            }
        }
        best = best.max(csit_objective(layout, scenario, h_su, h_24, &profile));
    }
    best
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_gaussian() {
        let v = integrate_to_infinity(|x| (-x * x).exp(), 0.0, 1e-15);
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn psi_quadrature_small_argument() {
        let a = 1e-3;
        assert!((psi_quadrature(a) / a - 1.0).abs() < 2e-3);
    }

    #[test]
    fn gram_schmidt_complement() {
        let a = CMat::from_row_slice(1, 3, &[Complex64::from(1.0), Complex64::from(1.0), Complex64::default()]);
        let n = gram_schmidt_null_space(&a, 1e-10);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).iter().all(|z| z.norm() < 1e-14));
    }
}
