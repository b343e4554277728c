//! Ergodic capacity bounds and outage for the primary and secondary links.
//!
//! All capacities are in bits/s/Hz per OFDM symbol, normalised by `M` and
//! ignoring the cyclic-prefix overhead. Monte Carlo quantities come with a
//! standard error.

use std::f64::consts::LOG2_E;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, draw_channels, Link, LinkSpecs, NetworkScenario, SymbolModel};
use crate::error::{invalid, Result};
use crate::mc::{Estimate, MonteCarlo};
use crate::precoder::{csit_objective, relay_input_power, srx_uc_noise, uniform_profile, waterfilling_profile, PowerProfile, PrecoderSet};
use crate::special::{bessel_k1, psi_nonneg, EULER_GAMMA};
use crate::spectral::{SpectralContext, VcLayout};
use crate::transceiver::{simulate_frame, BlockHistory, FrameConfig, FrameInputs, FrameSetup};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsitMode {
    #[default]
    Csit,
    Nocsit,
}

/// How per-subcarrier channel coefficients are drawn in capacity trials.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Independent `CN(0, σ²)` coefficients on every subcarrier.
    #[default]
    IidSubcarriers,
    /// Frequency responses of tap-domain channels, correlated across
    /// subcarriers.
    TapDomain(LinkSpecs),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub c_pu_lower: f64,
    pub c_pu_direct: f64,
    pub delta_c_pu: f64,
    pub c_su_lower: f64,
    pub mode: CsitMode,
    pub p_out: f64,
    pub n_trials: usize,
    pub stderr_c_pu_lower: f64,
    pub stderr_delta_c_pu: f64,
    pub stderr_c_su_lower: f64,
}

/// `1 − 2κ K1(2κ)`; independent of the precoder.
pub fn pu_outage_probability(scenario: &NetworkScenario) -> Result<f64> {
    scenario.validate()?;
    let y = 2.0 * scenario.kappa();
    Ok((1.0 - y * bessel_k1(y)?).clamp(0.0, 1.0))
}

/// `C_PU,direct = (Q log2e / M) Ψ(SNR13)`.
pub fn c_pu_direct(scenario: &NetworkScenario, layout: &VcLayout) -> f64 {
    layout.q() as f64 * LOG2_E / layout.m() as f64 * psi_nonneg(scenario.snr13())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuCapacity {
    pub lower: Estimate,
    pub direct: f64,
    /// `lower − direct`; the standard error is that of `lower`.
    pub delta: Estimate,
    /// Fraction of (trial, UC) pairs with `Γ3 < SNR13`.
    pub outage: Estimate,
}

fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// `Γ3 = SNR13 (1 + |H23|²|αᴴx|² σ12²/σ13²) / (1 + a σ23² σv2²/σv3²)`
/// written with `|H23|² = σ23² e1` and `|αᴴx|² = a e2`.
fn gamma3(scenario: &NetworkScenario, a: f64, e1: f64, e2: f64) -> f64 {
    let s12 = scenario.variance(Link::PtxStx);
    let s13 = scenario.variance(Link::PtxPrx);
    let s23 = scenario.variance(Link::StxPrx);
    let num = 1.0 + s23 * e1 * a * e2 * s12 / s13;
    let den = 1.0 + a * s23 * scenario.noise.stx / scenario.noise.prx;
    scenario.snr13() * num / den
}

/// Monte Carlo `C_PU,lower = (log2e/M) Σ_uc E[Ψ(Γ3,m)]` for a
/// channel-independent profile.
///
/// Every trial consumes the same random numbers regardless of the profile,
/// so runs with the same seed use common random numbers.
pub fn c_pu_lower(scenario: &NetworkScenario, layout: &VcLayout, profile: &PowerProfile, mc: &MonteCarlo) -> Result<PuCapacity> {
    scenario.validate()?;
    profile.check(layout)?;
    let m = layout.m() as f64;
    let q = layout.q().max(1) as f64;
    let snr13 = scenario.snr13();
    let [lower, outage] = mc.run(|rng| {
        let mut sum = 0.0;
        let mut out = 0.0;
        for &i in layout.uc_indices() {
            let (e1, e2) = (exp1(rng), exp1(rng));
            let g3 = gamma3(scenario, profile.a[i], e1, e2);
            sum += psi_nonneg(g3);
            if g3 < snr13 {
                out += 1.0;
            }
        }
        [sum * LOG2_E / m, out / q]
    });
    let direct = c_pu_direct(scenario, layout);
    let delta = Estimate { mean: lower.mean - direct, ..lower };
    Ok(PuCapacity { lower, direct, delta, outage })
}

/// Monte Carlo estimate of `Prob(Γ3 < SNR13)` at filter power `a`.
pub fn pu_outage_monte_carlo(scenario: &NetworkScenario, a: f64, mc: &MonteCarlo) -> Result<Estimate> {
    scenario.validate()?;
    if !(a > 0.0) {
        return invalid("outage is only defined for a transmitting STx");
    }
    let snr13 = scenario.snr13();
    Ok(mc.run(|rng| {
        let (e1, e2) = (exp1(rng), exp1(rng));
        [f64::from(u8::from(gamma3(scenario, a, e1, e2) < snr13))]
    })[0])
}

/// End-to-end counterpart of [`c_pu_lower`]: noiseless frames from the
/// time-domain simulator give `H_PU(m)`, and each trial averages
/// `log2(1 + P_pu |H_PU(m)|² / R_m)` with the worst-case noise variance
/// `R_m = σ23² σv2² a_m + σv3²` over the used carriers.
pub fn c_pu_lower_end_to_end(
    scenario: &NetworkScenario,
    cfg: &FrameConfig,
    ctx: &SpectralContext,
    layout: &VcLayout,
    precoders: &PrecoderSet,
    mc: &MonteCarlo,
) -> Result<Estimate> {
    scenario.validate()?;
    let setup = FrameSetup { cfg, ctx, layout, precoders };
    let s23 = scenario.variance(Link::StxPrx);
    let history = BlockHistory::silent(cfg);
    let m = layout.m() as f64;
    let results: Vec<Result<f64>> = mc.samples(|rng| {
        let channels = draw_channels(scenario, &cfg.specs, cfg.m, rng);
        let x_pu: Vec<Complex64> = (0..layout.q()).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)).collect();
        let x_su_i: Vec<Complex64> = (0..precoders.n_streams()).map(|_| complex_gaussian(rng, 1.0)).collect();
        let x_su_ii = vec![Complex64::default(); layout.m_vc()];
        let inputs = FrameInputs::noiseless(x_pu.clone(), x_su_i, x_su_ii, cfg.p());
        let trace = simulate_frame(&setup, &history, &channels, &inputs)?;
        let mut sum = 0.0;
        for (q, &i) in layout.uc_indices().iter().enumerate() {
            let h_pu = trace.y_pu_f[i] / x_pu[q];
            let r = s23 * scenario.noise.stx * precoders.profile.a[i] + scenario.noise.prx;
            sum += (scenario.p_pu * h_pu.norm_sqr() / r).ln_1p() * LOG2_E;
        }
        Ok(sum / m)
    });
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(crate::mc::summarize(&values))
}

/// Per-subcarrier SU channel draw.
struct SuDraw {
    h_su: Vec<Complex64>,
    h_24: Vec<Complex64>,
}

fn draw_pu_symbol<R: Rng + ?Sized>(rng: &mut R, scenario: &NetworkScenario) -> Complex64 {
    match scenario.pu_symbols {
        SymbolModel::Gaussian => complex_gaussian(rng, scenario.p_pu),
        SymbolModel::ConstantModulus => Complex64::from_polar(scenario.p_pu.sqrt(), rng.random::<f64>() * std::f64::consts::TAU),
    }
}

fn draw_su<R: Rng + ?Sized>(rng: &mut R, scenario: &NetworkScenario, layout: &VcLayout, fading: FadingModel) -> SuDraw {
    let m = layout.m();
    let (h12, h24): (Vec<Complex64>, Vec<Complex64>) = match fading {
        FadingModel::IidSubcarriers => {
            let s12 = scenario.variance(Link::PtxStx);
            let s24 = scenario.variance(Link::StxSrx);
            (0..m).map(|_| (complex_gaussian(rng, s12), complex_gaussian(rng, s24))).unzip()
        }
        FadingModel::TapDomain(specs) => {
            let ch = draw_channels(scenario, &specs, m, rng);
            (ch.get(Link::PtxStx).freq.clone(), ch.get(Link::StxSrx).freq.clone())
        }
    };
    let h_su = (0..m)
        .map(|i| {
            let x = if layout.is_vc(i) { Complex64::default() } else { draw_pu_symbol(rng, scenario) };
            let v2 = complex_gaussian(rng, scenario.noise.stx);
            h24[i] * (h12[i] * x + v2)
        })
        .collect();
    SuDraw { h_su, h_24: h24 }
}

/// Monte Carlo `C_SU,lower,CSIT` with waterfilling recomputed every trial.
pub fn c_su_lower_csit(scenario: &NetworkScenario, layout: &VcLayout, fading: FadingModel, use_vcs: bool, mc: &MonteCarlo) -> Result<Estimate> {
    scenario.validate()?;
    let m = layout.m() as f64;
    let results: Vec<Result<f64>> = mc.samples(|rng| {
        let d = draw_su(rng, scenario, layout, fading);
        let sol = waterfilling_profile(layout, scenario, &d.h_su, &d.h_24, use_vcs)?;
        Ok(csit_objective(layout, scenario, &d.h_su, &d.h_24, &sol.profile) / m)
    });
    let values = results.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(crate::mc::summarize(&values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NocsitEstimate {
    /// Sampling `log2(1 + γ)` directly on every used carrier.
    pub direct: Estimate,
    /// Sampling `Ψ(Γ4,m)` after conditioning on `H24` and `x_PU`.
    pub conditional: Estimate,
}

/// `SNR24,direct = σ24² g / σv4²`.
fn snr24(scenario: &NetworkScenario, g: f64) -> f64 {
    scenario.variance(Link::StxSrx) * g / scenario.noise.srx
}

/// Monte Carlo `C_SU,lower,NOCSIT` with equal VC power `g` and the
/// remaining budget spread uniformly over the used carriers.
pub fn c_su_lower_nocsit(scenario: &NetworkScenario, layout: &VcLayout, g: f64, mc: &MonteCarlo) -> Result<NocsitEstimate> {
    scenario.validate()?;
    let profile = uniform_profile(layout, scenario, g)?;
    let a = layout.uc_indices().first().map_or(0.0, |&i| profile.a[i]);
    let m = layout.m() as f64;
    let n_uc = srx_uc_noise(scenario);
    let s12 = scenario.variance(Link::PtxStx);
    let s24 = scenario.variance(Link::StxSrx);
    let vc_term = layout.m_vc() as f64 * psi_nonneg(snr24(scenario, g));
    let [direct, conditional] = mc.run(|rng| {
        let mut d = 0.0;
        let mut c = 0.0;
        for _ in 0..layout.q() {
            let h24 = complex_gaussian(rng, s24);
            let h12 = complex_gaussian(rng, s12);
            let x = draw_pu_symbol(rng, scenario);
            let v2 = complex_gaussian(rng, scenario.noise.stx);
            let h_su = h24 * (h12 * x + v2);
            d += (h_su.norm_sqr() * a / n_uc).ln_1p();
            let gamma4 = h24.norm_sqr() * (s12 * x.norm_sqr() + scenario.noise.stx) * a / n_uc;
            c += psi_nonneg(gamma4);
        }
        [(d + vc_term) * LOG2_E / m, (c + vc_term) * LOG2_E / m]
    });
    Ok(NocsitEstimate { direct, conditional })
}

/// Mean of `Γ4,m` for constant-modulus PU symbols,
/// `σ24² (P_su − M_vc g) / (Q (σ14² P_pu + σv4²))`.
pub fn nocsit_mean_gamma4(scenario: &NetworkScenario, layout: &VcLayout, g: f64) -> f64 {
    scenario.variance(Link::StxSrx) * (scenario.p_su - layout.m_vc() as f64 * g) / (layout.q() as f64 * srx_uc_noise(scenario))
}

/// Low-SNR approximation `E[Ψ(Γ4)] ≈ E[Γ4]`.
pub fn nocsit_low_snr_approx(scenario: &NetworkScenario, layout: &VcLayout, g: f64) -> f64 {
    let q = layout.q() as f64;
    let gbar = nocsit_mean_gamma4(scenario, layout, g);
    LOG2_E / layout.m() as f64 * (q * gbar + layout.m_vc() as f64 * psi_nonneg(snr24(scenario, g)))
}

/// High-SNR approximation `E[Ψ(Γ4)] ≈ E[ln(1 + Γ4)] − γ = Ψ(Γ̄4) − γ`,
/// summed over all `Q` used carriers.
pub fn nocsit_high_snr_approx(scenario: &NetworkScenario, layout: &VcLayout, g: f64) -> f64 {
    let q = layout.q() as f64;
    let gbar = nocsit_mean_gamma4(scenario, layout, g);
    LOG2_E / layout.m() as f64 * (q * (psi_nonneg(gbar) - EULER_GAMMA) + layout.m_vc() as f64 * psi_nonneg(snr24(scenario, g)))
}

/// SU transmits on the VCs only with `g = P_su / M_vc`.
pub fn baseline_ocr(scenario: &NetworkScenario, layout: &VcLayout, mc: &MonteCarlo) -> Result<Estimate> {
    scenario.validate()?;
    if layout.m_vc() == 0 {
        return Ok(Estimate::exact(0.0));
    }
    let g = scenario.p_su / layout.m_vc() as f64;
    let s24 = scenario.variance(Link::StxSrx);
    let m = layout.m() as f64;
    Ok(mc.run(|rng| {
        let sum: f64 = (0..layout.m_vc())
            .map(|_| (complex_gaussian(rng, s24).norm_sqr() * g / scenario.noise.srx).ln_1p())
            .sum();
        [sum * LOG2_E / m]
    })[0])
}

/// Closed form of [`baseline_ocr`]: `(log2e/M) M_vc Ψ(σ24² g / σv4²)`.
pub fn baseline_ocr_closed_form(scenario: &NetworkScenario, layout: &VcLayout) -> f64 {
    if layout.m_vc() == 0 {
        return 0.0;
    }
    let g = scenario.p_su / layout.m_vc() as f64;
    LOG2_E / layout.m() as f64 * layout.m_vc() as f64 * psi_nonneg(snr24(scenario, g))
}

/// Uniform profile of the single-stream multiplicative scheme: no VC
/// power and equal `a` on every used carrier.
pub fn nocr_profile(scenario: &NetworkScenario, layout: &VcLayout) -> Result<PowerProfile> {
    uniform_profile(layout, scenario, 0.0)
}

/// SU capacity of the single-stream multiplicative scheme.
///
/// With one stream and `A = √a·1`, the SRx sees a rank-one channel, so the
/// capacity is `(1/M) log2(1 + a Σ_uc |H_SU(m)|² / (σ14² P_pu + σv4²))`.
pub fn baseline_nocr(scenario: &NetworkScenario, layout: &VcLayout, mc: &MonteCarlo) -> Result<Estimate> {
    scenario.validate()?;
    let q = layout.q();
    if q == 0 {
        return Ok(Estimate::exact(0.0));
    }
    let a = scenario.p_su / (q as f64 * relay_input_power(scenario));
    let n_uc = srx_uc_noise(scenario);
    let s12 = scenario.variance(Link::PtxStx);
    let s24 = scenario.variance(Link::StxSrx);
    let m = layout.m() as f64;
    Ok(mc.run(|rng| {
        let mut energy = 0.0;
        for _ in 0..q {
            let h24 = complex_gaussian(rng, s24);
            let h12 = complex_gaussian(rng, s12);
            let x = draw_pu_symbol(rng, scenario);
            let v2 = complex_gaussian(rng, scenario.noise.stx);
            energy += (h24 * (h12 * x + v2)).norm_sqr();
        }
        [(a * energy / n_uc).ln_1p() * LOG2_E / m]
    })[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Whether `κ ≤ 0.1`, the regime in which monotonicity is claimed.
    pub hypothesis_met: bool,
    pub kappa: f64,
    pub budgets: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// Grid steps `(i, i+1)` where the estimate drops by more than three
    /// combined standard errors.
    pub violations: Vec<usize>,
    /// `Some(no violations)` when the hypothesis holds, `None` otherwise.
    pub non_decreasing: Option<bool>,
}

pub const MONOTONICITY_KAPPA_MAX: f64 = 0.1;

/// Evaluates `C_PU,lower` on an increasing grid of SU budgets with common
/// random numbers (same seed at every point) and `g = P_su/(2 M_vc)`.
pub fn check_pu_monotonicity(scenario: &NetworkScenario, layout: &VcLayout, budgets: &[f64], mc: &MonteCarlo) -> Result<MonotonicityReport> {
    if budgets.windows(2).any(|w| w[1] < w[0]) {
        return invalid("budget grid must be non-decreasing");
    }
    let kappa = scenario.kappa();
    let mut estimates = Vec::with_capacity(budgets.len());
    for &p in budgets {
        let mut s = scenario.clone();
        s.p_su = p;
        let g = if layout.m_vc() > 0 { p / (2.0 * layout.m_vc() as f64) } else { 0.0 };
        let profile = uniform_profile(layout, &s, g)?;
        estimates.push(c_pu_lower(&s, layout, &profile, mc)?.lower);
    }
    let violations: Vec<usize> = estimates
        .windows(2)
        .enumerate()
        .filter(|(_, w)| {
            let band = 3.0 * (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt();
            w[1].mean < w[0].mean - band
        })
        .map(|(i, _)| i)
        .collect();
    let hypothesis_met = kappa <= MONOTONICITY_KAPPA_MAX;
    let non_decreasing = hypothesis_met.then_some(violations.is_empty());
    Ok(MonotonicityReport { hypothesis_met, kappa, budgets: budgets.to_vec(), estimates, violations, non_decreasing })
}
