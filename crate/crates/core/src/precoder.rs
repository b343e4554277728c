//! Secondary precoders and power allocation.
//!
//! The STx filter response is `f = A x_I` with `A = Π_IDFT Υ_vc C`, so every
//! realisable response is silent on the virtual carriers, and the VC
//! signal is `G x_II` with `G = Ξ D`. A [`PowerProfile`] fixes the
//! per-subcarrier powers `a_m = ‖row m of A‖²` and `g_m = ‖row m of G‖²`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Link, NetworkScenario};
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_sqrt, numerical_rank, CMat, CVec, RANK_TOL};
use crate::spectral::{SpectralContext, VcLayout};

/// Relative row-norm mismatch above which a realised precoder is flagged.
pub const ROW_MISMATCH_WARN: f64 = 0.05;

const MAX_BISECTIONS: usize = 200;

/// Per-subcarrier powers, both stored as length-`M` vectors. `a` is zero
/// on VCs and `g` is zero on UCs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub a: Vec<f64>,
    pub g: Vec<f64>,
}

impl PowerProfile {
    pub fn zeros(m: usize) -> Self {
        Self { a: vec![0.0; m], g: vec![0.0; m] }
    }

    /// Average STx transmit power `(σ12² P_pu + σ_v2²) Σ a_m + Σ g_m`.
    pub fn transmit_power(&self, scenario: &NetworkScenario) -> f64 {
        relay_input_power(scenario) * self.a.iter().sum::<f64>() + self.g.iter().sum::<f64>()
    }

    pub fn check(&self, layout: &VcLayout) -> Result<()> {
        let m = layout.m();
        if self.a.len() != m || self.g.len() != m {
            return invalid(format!("power profile must have length {m}"));
        }
        for i in 0..m {
            let (a, g) = (self.a[i], self.g[i]);
            if !(a >= 0.0 && g >= 0.0 && a.is_finite() && g.is_finite()) {
                return invalid(format!("subcarrier {i} has invalid powers a={a}, g={g}"));
            }
            if layout.is_vc(i) && a != 0.0 {
                return invalid(format!("VC {i} must carry no filter power"));
            }
            if !layout.is_vc(i) && g != 0.0 {
                return invalid(format!("UC {i} must carry no VC power"));
            }
        }
        Ok(())
    }
}

/// Average power received by the STx on each used carrier,
/// `σ12² P_pu + σ_v2²`.
pub fn relay_input_power(scenario: &NetworkScenario) -> f64 {
    scenario.variance(Link::PtxStx) * scenario.p_pu + scenario.noise.stx
}

/// Interference-plus-noise power at the SRx on a used carrier,
/// `σ14² P_pu + σ_v4²`.
pub fn srx_uc_noise(scenario: &NetworkScenario) -> f64 {
    scenario.variance(Link::PtxSrx) * scenario.p_pu + scenario.noise.srx
}

/// Equal VC power `g` on every VC and the remaining budget spread evenly
/// over the used carriers.
pub fn uniform_profile(layout: &VcLayout, scenario: &NetworkScenario, g: f64) -> Result<PowerProfile> {
    if !(g >= 0.0) {
        return invalid(format!("VC power must be non-negative, got {g}"));
    }
    let vc_total = g * layout.m_vc() as f64;
    let rest = scenario.p_su - vc_total;
    if rest < -1e-12 * scenario.p_su.max(1.0) {
        return invalid(format!("VC power {vc_total} exceeds the budget {}", scenario.p_su));
    }
    let rest = rest.max(0.0);
    if layout.q() == 0 && rest > 0.0 {
        return invalid("no used carriers are left for the remaining power");
    }
    let a = if layout.q() == 0 { 0.0 } else { rest / (layout.q() as f64 * relay_input_power(scenario)) };
    let mut profile = PowerProfile::zeros(layout.m());
    for &i in layout.uc_indices() {
        profile.a[i] = a;
    }
    for &i in layout.vc_indices() {
        profile.g[i] = g;
    }
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillingSolution {
    pub profile: PowerProfile,
    /// Water level of the used carriers, in units of `a_m`.
    pub mu: f64,
    /// Water level of the virtual carriers, `w·μ` with `w = σ12² P_pu + σ_v2²`.
    pub mu_vc: f64,
    pub iterations: usize,
}

/// Capacity-maximising allocation for known `H_SU` and `H_24`.
///
/// A unit of `a_m` costs `w = σ12² P_pu + σ_v2²` of transmit power while a
/// unit of `g_m` costs one, so the KKT conditions give
/// `a_m = [μ − n/|H_SU(m)|²]⁺` and `g_m = [wμ − σ_v4²/|H_24(m)|²]⁺`. The
/// level is bracketed by bisection and then solved exactly on the final
/// active set. With `use_vcs = false` all power goes to the used carriers.
pub fn waterfilling_profile(
    layout: &VcLayout,
    scenario: &NetworkScenario,
    h_su: &[Complex64],
    h_24: &[Complex64],
    use_vcs: bool,
) -> Result<WaterfillingSolution> {
    let m = layout.m();
    if h_su.len() != m || h_24.len() != m {
        return invalid(format!("channel vectors must have length {m}"));
    }
    let budget = scenario.p_su;
    let w = relay_input_power(scenario);
    let n_uc = srx_uc_noise(scenario);
    let n_vc = scenario.noise.srx;

    // Thresholds in units of μ together with their power weight.
    let mut items: Vec<(usize, f64, f64, bool)> = Vec::with_capacity(m);
    for &i in layout.uc_indices() {
        items.push((i, n_uc / h_su[i].norm_sqr(), w, false));
    }
    if use_vcs {
        for &i in layout.vc_indices() {
            items.push((i, n_vc / (w * h_24[i].norm_sqr()), w, true));
        }
    }
    let power = |mu: f64| -> f64 { items.iter().map(|&(_, t, wt, _)| wt * (mu - t).max(0.0)).sum() };

    let mut profile = PowerProfile::zeros(m);
    if budget == 0.0 {
        return Ok(WaterfillingSolution { profile, mu: 0.0, mu_vc: 0.0, iterations: 0 });
    }
    let t_max = items.iter().map(|x| x.1).filter(|t| t.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !t_max.is_finite() {
        return invalid("every subcarrier has a zero channel gain");
    }
    let w_min = items.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    let mut hi = t_max + budget / w_min;
    let mut iterations = 0;
    while iterations < MAX_BISECTIONS && hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if power(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    // Exact level on the active set.
    let active: Vec<&(usize, f64, f64, bool)> = items.iter().filter(|x| x.1 < hi).collect();
    let weight: f64 = active.iter().map(|x| x.2).sum();
    let offset: f64 = active.iter().map(|x| x.2 * x.1).sum();
    let mu = (budget + offset) / weight;
    let residual = power(mu) - budget;
    if !(residual.abs() <= 1e-9 * budget) {
        return Err(Error::NoConvergence(iterations));
    }
    for &(i, t, _, is_vc) in &items {
        let level = (mu - t).max(0.0);
        if is_vc {
            profile.g[i] = w * level;
        } else {
            profile.a[i] = level;
        }
    }
    Ok(WaterfillingSolution { profile, mu, mu_vc: w * mu, iterations })
}

/// Objective of the CSIT allocation problem in bits per block (not yet
/// divided by `M`).
pub fn csit_objective(
    layout: &VcLayout,
    scenario: &NetworkScenario,
    h_su: &[Complex64],
    h_24: &[Complex64],
    profile: &PowerProfile,
) -> f64 {
    let n_uc = srx_uc_noise(scenario);
    let uc: f64 = layout
        .uc_indices()
        .iter()
        .map(|&i| (h_su[i].norm_sqr() * profile.a[i] / n_uc).ln_1p())
        .sum();
    let vc: f64 = layout
        .vc_indices()
        .iter()
        .map(|&i| (h_24[i].norm_sqr() * profile.g[i] / scenario.noise.srx).ln_1p())
        .sum();
    (uc + vc) * std::f64::consts::LOG2_E
}

/// Realised precoders for one power profile.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    /// `M × N` filter-response precoder.
    pub a: CMat,
    /// `(L_su+1) × N` tap-domain precoder `Υ_vc C`.
    pub b: CMat,
    /// `N × N` principal root of the power-normalised Gram target.
    pub c: CMat,
    /// `M_vc × M_vc` diagonal VC amplitudes.
    pub d: CMat,
    /// `M × M_vc` VC precoder `Ξ D`.
    pub g: CMat,
    /// Profile handed to [`realize_precoders`].
    pub requested: PowerProfile,
    /// Row norms actually realised by `A` and `G`.
    pub profile: PowerProfile,
    /// Scalar applied to the Gram target so that the UC power matches.
    pub gram_scale: f64,
    /// Largest relative gap between requested and realised UC row norms.
    pub max_row_mismatch: f64,
}

impl PrecoderSet {
    pub fn n_streams(&self) -> usize {
        self.a.ncols()
    }

    pub fn mismatch_flagged(&self) -> bool {
        self.max_row_mismatch > ROW_MISMATCH_WARN
    }

    /// Filter response `f = A x_I`.
    pub fn response(&self, x_su_i: &[Complex64]) -> Result<Vec<Complex64>> {
        if x_su_i.len() != self.a.ncols() {
            return invalid(format!("expected {} streams, got {}", self.a.ncols(), x_su_i.len()));
        }
        Ok((&self.a * CVec::from_column_slice(x_su_i)).iter().copied().collect())
    }

    /// VC signal `G x_II` in the frequency domain.
    pub fn vc_signal(&self, x_su_ii: &[Complex64]) -> Result<Vec<Complex64>> {
        if x_su_ii.len() != self.g.ncols() {
            return invalid(format!("expected {} VC symbols, got {}", self.g.ncols(), x_su_ii.len()));
        }
        Ok((&self.g * CVec::from_column_slice(x_su_ii)).iter().copied().collect())
    }
}

/// Builds `A, B, C, D, G` from a power profile.
///
/// `C` is the principal square root of `s · Υᴴ Πᴴ Σ_A Π Υ`. Because `A`
/// has rank `N < Q` in general, its row norms cannot equal an arbitrary
/// diagonal `Σ_A`; the scalar `s` is chosen so that the realised UC power
/// `Σ_m ‖row m of A‖²` equals `Σ_m a_m`, which keeps the STx transmit power
/// on budget. The realised per-row powers are reported in
/// [`PrecoderSet::profile`] and the worst relative gap in
/// [`PrecoderSet::max_row_mismatch`].
pub fn realize_precoders(
    ctx: &SpectralContext,
    layout: &VcLayout,
    requested: &PowerProfile,
) -> Result<PrecoderSet> {
    requested.check(layout)?;
    let m = layout.m();
    let n = layout.n_streams();
    let requested_uc: f64 = requested.a.iter().sum();
    if n == 0 {
        return Err(Error::RankDeficient(format!(
            "{} virtual carriers leave no filter degrees of freedom for L_su = {}",
            layout.m_vc(),
            layout.l_su()
        )));
    }
    if requested_uc <= 0.0 {
        return Err(Error::RankDeficient("the filter power profile is identically zero".into()));
    }

    let pu = ctx.pi_idft() * layout.upsilon_vc();
    let mut weighted = pu.clone();
    for i in 0..m {
        let a = requested.a[i];
        for z in weighted.row_mut(i).iter_mut() {
            *z *= a;
        }
    }
    let gram = pu.adjoint() * &weighted;
    let c0 = hermitian_sqrt(&gram);
    let rank = numerical_rank(&c0, RANK_TOL);
    if rank < n {
        return Err(Error::RankDeficient(format!("C has rank {rank}, need {n}")));
    }
    let a0 = &pu * &c0;
    let row0: Vec<f64> = (0..m).map(|i| a0.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
    let realised_uc: f64 = layout.uc_indices().iter().map(|&i| row0[i]).sum();
    let gram_scale = requested_uc / realised_uc;
    let root = gram_scale.sqrt();

    let c = c0.map(|z| z * root);
    let a = a0.map(|z| z * root);
    let b = layout.upsilon_vc() * &c;

    let mut profile = PowerProfile::zeros(m);
    let row_max = row0.iter().copied().fold(0.0, f64::max) * gram_scale;
    let mut max_row_mismatch: f64 = 0.0;
    for i in 0..m {
        let r = row0[i] * gram_scale;
        if layout.is_vc(i) {
            if r > 1e-20 * row_max.max(1.0) {
                return Err(Error::NumericalCheck(format!("VC row {i} of A has power {r:e}")));
            }
        } else {
            profile.a[i] = r;
            let want = requested.a[i];
            let gap = if want > 0.0 { (r - want).abs() / want } else if r > 0.0 { f64::INFINITY } else { 0.0 };
            max_row_mismatch = max_row_mismatch.max(gap);
        }
    }

    let m_vc = layout.m_vc();
    let mut d = CMat::zeros(m_vc, m_vc);
    for (k, &i) in layout.vc_indices().iter().enumerate() {
        d[(k, k)] = Complex64::from(requested.g[i].sqrt());
        profile.g[i] = requested.g[i];
    }
    let g = layout.xi() * &d;

    Ok(PrecoderSet { a, b, c, d, g, requested: requested.clone(), profile, gram_scale, max_row_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, max_abs_diff};
    use crate::spectral::LayoutSpec;

    fn scenario() -> NetworkScenario {
        NetworkScenario::reference(0.3, 0.01)
    }

    #[test]
    fn uniform_profile_meets_budget() {
        let (_, layout) = LayoutSpec::default().build().unwrap();
        let s = scenario();
        let p = uniform_profile(&layout, &s, s.p_su / 8.0).unwrap();
        assert!((p.transmit_power(&s) - s.p_su).abs() < 1e-12);
        assert!(uniform_profile(&layout, &s, 1.0).is_err());
    }

    #[test]
    fn precoders_respect_budget_and_vcs() {
        let (ctx, layout) = LayoutSpec::default().build().unwrap();
        let s = scenario();
        let p = uniform_profile(&layout, &s, s.p_su / 8.0).unwrap();
        let set = realize_precoders(&ctx, &layout, &p).unwrap();
        assert_eq!(set.a.shape(), (64, 7));
        assert!((set.profile.transmit_power(&s) - s.p_su).abs() < 1e-9);
        for &i in layout.vc_indices() {
            assert!(set.a.row(i).iter().all(|z| z.norm() < 1e-12));
        }
        // A rank-7 filter cannot spread equal power over 60 carriers.
        assert!(set.mismatch_flagged());
        assert!(max_abs_diff(&set.c, &set.c.adjoint()) < 1e-12);
    }

    #[test]
    fn full_length_filter_without_vcs_is_scaled_identity() {
        let ctx = SpectralContext::new(8, 3).unwrap();
        let layout = VcLayout::new(&ctx, &[]).unwrap();
        let mut p = PowerProfile::zeros(8);
        p.a.iter_mut().for_each(|a| *a = 0.5);
        let set = realize_precoders(&ctx, &layout, &p).unwrap();
        let scale = set.c[(0, 0)];
        assert!(max_abs_diff(&set.c, &(CMat::identity(4, 4) * scale)) < 1e-12);
        // Γ_C is 0.5·I before normalisation; the rows of A carry 0.5 each afterwards.
        for r in &set.profile.a {
            assert!((r - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_profile_is_rank_deficient() {
        let (ctx, layout) = LayoutSpec::default().build().unwrap();
        let err = realize_precoders(&ctx, &layout, &PowerProfile::zeros(64)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
    }

    #[test]
    fn zero_vc_power_gives_zero_g() {
        let (ctx, layout) = LayoutSpec::default().build().unwrap();
        let s = scenario();
        let p = uniform_profile(&layout, &s, 0.0).unwrap();
        let set = realize_precoders(&ctx, &layout, &p).unwrap();
        assert_eq!(max_abs(&set.g), 0.0);
    }

    #[test]
    fn waterfilling_residual_and_kkt() {
        let (_, layout) = LayoutSpec::default().build().unwrap();
        let s = scenario();
        let h: Vec<Complex64> = (0..64).map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.3, 0.2)).collect();
        let sol = waterfilling_profile(&layout, &s, &h, &h, true).unwrap();
        assert!((sol.profile.transmit_power(&s) - s.p_su).abs() < 1e-9 * s.p_su);
        let n_uc = srx_uc_noise(&s);
        for &i in layout.uc_indices() {
            let t = n_uc / h[i].norm_sqr();
            if sol.profile.a[i] > 0.0 {
                assert!((sol.profile.a[i] + t - sol.mu).abs() < 1e-12);
            } else {
                assert!(t >= sol.mu);
            }
        }
    }
}
