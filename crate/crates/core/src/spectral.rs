//! DFT bookkeeping shared by the whole chain: the unitary transforms, the
//! partial-DFT basis of length-`L_su+1` filters, the minimum-norm filter
//! synthesis, and the split of subcarriers into used carriers (UCs) and
//! virtual carriers (VCs).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dft_matrix, idft_matrix, max_abs, null_space, numerical_rank, CMat, CVec, RANK_TOL};

/// Tolerance for the structural identities verified at construction.
const IDENTITY_TOL: f64 = 1e-12;
/// Relative residual allowed when a frequency response is mapped back to taps.
pub const FILTER_RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SpectralContext {
    m: usize,
    l_su: usize,
    w_idft: CMat,
    w_dft: CMat,
    pi_idft: CMat,
}

impl SpectralContext {
    /// Builds the transforms for `m` subcarriers and an FIR of order `l_su`.
    ///
    /// Fails if `l_su >= m` or if the annihilation identity
    /// `W̄_IDFT · Π_IDFT = 0` does not hold to `1e-12`.
    pub fn new(m: usize, l_su: usize) -> Result<Self> {
        if m < 2 {
            return invalid(format!("M = {m} must be at least 2"));
        }
        if l_su >= m {
            return invalid(format!("L_su = {l_su} must satisfy L_su < M = {m}"));
        }
        let w_idft = idft_matrix(m);
        let w_dft = dft_matrix(m);
        let pi_idft = w_dft.columns(0, l_su + 1).into_owned();
        let ctx = Self { m, l_su, w_idft, w_dft, pi_idft };

        if l_su + 1 < m {
            let residual = max_abs(&(ctx.wbar_idft() * &ctx.pi_idft));
            if residual > IDENTITY_TOL {
                return Err(Error::NumericalCheck(format!(
                    "annihilation residual {residual:e} exceeds {IDENTITY_TOL:e}"
                )));
            }
        }
        Ok(ctx)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l_su(&self) -> usize {
        self.l_su
    }

    pub fn w_idft(&self) -> &CMat {
        &self.w_idft
    }

    pub fn w_dft(&self) -> &CMat {
        &self.w_dft
    }

    /// Partial DFT basis, `M × (L_su+1)`.
    pub fn pi_idft(&self) -> &CMat {
        &self.pi_idft
    }

    /// Zero-padding operator `J = [I; 0]`, `M × (L_su+1)`.
    pub fn zero_pad(&self) -> CMat {
        CMat::identity(self.m, self.l_su + 1)
    }

    /// Last `M − L_su − 1` rows of the IDFT matrix.
    pub fn wbar_idft(&self) -> CMat {
        self.w_idft.rows(self.l_su + 1, self.m - self.l_su - 1).into_owned()
    }

    /// Unitary DFT of a length-`M` block.
    pub fn dft(&self, x: &[Complex64]) -> CVec {
        &self.w_dft * CVec::from_column_slice(x)
    }

    /// Unitary IDFT of a length-`M` block.
    pub fn idft(&self, x: &[Complex64]) -> CVec {
        &self.w_idft * CVec::from_column_slice(x)
    }

    /// Frequency response `F(m) = Σ_ℓ f̃(ℓ) e^{-j2πℓm/M}` of up to
    /// `L_su+1` taps.
    pub fn filter_response(&self, taps: &[Complex64]) -> Result<CVec> {
        if taps.len() > self.l_su + 1 {
            return invalid(format!("{} taps exceed the filter order {}", taps.len(), self.l_su));
        }
        let scale = (self.m as f64).sqrt();
        Ok(CVec::from_fn(self.m, |m, _| {
            taps.iter()
                .enumerate()
                .map(|(l, t)| t * self.w_dft[(m, l)])
                .sum::<Complex64>()
                * scale
        }))
    }

    /// Minimum-norm taps `f̃ = (1/√M) Jᵀ W_IDFT f` realising the response `f`.
    ///
    /// The response must lie in the span of `Π_IDFT`; otherwise the mapping
    /// back to the frequency domain would not reproduce it and an
    /// [`Error::InconsistentResponse`] is returned.
    pub fn min_norm_filter(&self, f: &[Complex64]) -> Result<Vec<Complex64>> {
        if f.len() != self.m {
            return invalid(format!("response has length {}, expected {}", f.len(), self.m));
        }
        let scale = 1.0 / (self.m as f64).sqrt();
        let taps: Vec<Complex64> = (0..=self.l_su)
            .map(|l| f.iter().enumerate().map(|(m, v)| self.w_idft[(l, m)] * v).sum::<Complex64>() * scale)
            .collect();
        let back = self.filter_response(&taps)?;
        let norm: f64 = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let residual: f64 = back.iter().zip(f).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let tolerance = FILTER_RESIDUAL_TOL * norm.max(f64::MIN_POSITIVE);
        if residual > tolerance {
            return Err(Error::InconsistentResponse { residual, tolerance });
        }
        Ok(taps)
    }
}

/// Split of subcarriers into used carriers and virtual carriers, plus the
/// null-space basis `Υ_vc` that keeps filter responses silent on the VCs.
#[derive(Debug, Clone)]
pub struct VcLayout {
    m: usize,
    l_su: usize,
    vc: Vec<usize>,
    uc: Vec<usize>,
    theta: CMat,
    xi: CMat,
    pi_vc: CMat,
    upsilon_vc: CMat,
    r_vc: usize,
}

impl VcLayout {
    pub fn new(ctx: &SpectralContext, vc_indices: &[usize]) -> Result<Self> {
        let m = ctx.m();
        let mut vc = vc_indices.to_vec();
        vc.sort_unstable();
        vc.dedup();
        if vc.len() != vc_indices.len() {
            return invalid("virtual carrier indices must be distinct");
        }
        if let Some(&bad) = vc.iter().find(|&&i| i >= m) {
            return invalid(format!("virtual carrier index {bad} is outside 0..{m}"));
        }
        let mut is_vc = vec![false; m];
        for &i in &vc {
            is_vc[i] = true;
        }
        let uc: Vec<usize> = (0..m).filter(|&i| !is_vc[i]).collect();

        let mut theta = CMat::zeros(m, uc.len());
        for (q, &i) in uc.iter().enumerate() {
            theta[(i, q)] = Complex64::from(1.0);
        }
        let mut xi = CMat::zeros(m, vc.len());
        for (q, &i) in vc.iter().enumerate() {
            xi[(i, q)] = Complex64::from(1.0);
        }
        let pi_vc = xi.transpose() * ctx.pi_idft();
        let r_vc = numerical_rank(&pi_vc, RANK_TOL);
        let upsilon_vc = if vc.is_empty() {
            CMat::identity(ctx.l_su() + 1, ctx.l_su() + 1)
        } else {
            null_space(&pi_vc, RANK_TOL)
        };
        Ok(Self { m, l_su: ctx.l_su(), vc, uc, theta, xi, pi_vc, upsilon_vc, r_vc })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn l_su(&self) -> usize {
        self.l_su
    }

    pub fn vc_indices(&self) -> &[usize] {
        &self.vc
    }

    pub fn uc_indices(&self) -> &[usize] {
        &self.uc
    }

    pub fn m_vc(&self) -> usize {
        self.vc.len()
    }

    /// Number of used carriers `Q = M − M_vc`.
    pub fn q(&self) -> usize {
        self.uc.len()
    }

    pub fn is_vc(&self, i: usize) -> bool {
        self.vc.binary_search(&i).is_ok()
    }

    /// UC insertion matrix `Θ`, `M × Q`.
    pub fn theta(&self) -> &CMat {
        &self.theta
    }

    /// VC insertion matrix `Ξ`, `M × M_vc`.
    pub fn xi(&self) -> &CMat {
        &self.xi
    }

    /// Rows of `Π_IDFT` at the VC positions.
    pub fn pi_vc(&self) -> &CMat {
        &self.pi_vc
    }

    /// Orthonormal basis of the null space of `Π_vc`.
    pub fn upsilon_vc(&self) -> &CMat {
        &self.upsilon_vc
    }

    pub fn r_vc(&self) -> usize {
        self.r_vc
    }

    /// Number of spatial streams the filter can carry, `L_su + 1 − R_vc`.
    /// Zero means the VCs consume every filter degree of freedom.
    pub fn n_streams(&self) -> usize {
        self.l_su + 1 - self.r_vc
    }

    /// Scatters `Q` UC symbols into an `M`-vector (`Θ x`).
    pub fn place_uc(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.q() {
            return invalid(format!("expected {} UC symbols, got {}", self.q(), x.len()));
        }
        let mut out = vec![Complex64::default(); self.m];
        for (v, &i) in x.iter().zip(&self.uc) {
            out[i] = *v;
        }
        Ok(out)
    }

    /// Scatters `M_vc` VC symbols into an `M`-vector (`Ξ x`).
    pub fn place_vc(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.m_vc() {
            return invalid(format!("expected {} VC symbols, got {}", self.m_vc(), x.len()));
        }
        let mut out = vec![Complex64::default(); self.m];
        for (v, &i) in x.iter().zip(&self.vc) {
            out[i] = *v;
        }
        Ok(out)
    }
}

/// `M_vc` equally spaced virtual carriers starting at subcarrier 0.
pub fn equispaced_vcs(m: usize, m_vc: usize) -> Vec<usize> {
    if m_vc == 0 {
        return Vec::new();
    }
    (0..m_vc).map(|k| k * m / m_vc).collect()
}

/// Layout description that can be stored in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub m: usize,
    pub l_su: usize,
    pub vc_indices: Vec<usize>,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        Self { m: 64, l_su: 10, vc_indices: equispaced_vcs(64, 4) }
    }
}

impl LayoutSpec {
    pub fn build(&self) -> Result<(SpectralContext, VcLayout)> {
        let ctx = SpectralContext::new(self.m, self.l_su)?;
        let layout = VcLayout::new(&ctx, &self.vc_indices)?;
        Ok((ctx, layout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs_diff};

    #[test]
    fn annihilation_identity() {
        let ctx = SpectralContext::new(64, 10).unwrap();
        assert!(max_abs(&(ctx.wbar_idft() * ctx.pi_idft())) < 1e-12);
        let ident = ctx.w_idft() * ctx.zero_pad();
        assert!(max_abs_diff(&(ctx.w_dft() * ident), &ctx.zero_pad()) < 1e-12);
    }

    #[test]
    fn rejects_long_filter() {
        assert!(SpectralContext::new(8, 8).is_err());
        assert!(SpectralContext::new(8, 7).is_ok());
    }

    #[test]
    fn filter_roundtrip() {
        let ctx = SpectralContext::new(16, 3).unwrap();
        let taps = vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0), c(0.25, -0.75)];
        let f = ctx.filter_response(&taps).unwrap();
        let back = ctx.min_norm_filter(f.as_slice()).unwrap();
        for (a, b) in taps.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn inconsistent_response_rejected() {
        let ctx = SpectralContext::new(16, 3).unwrap();
        let mut f = vec![Complex64::default(); 16];
        f[0] = c(1.0, 0.0);
        assert!(matches!(ctx.min_norm_filter(&f), Err(Error::InconsistentResponse { .. })));
    }

    #[test]
    fn default_layout_dimensions() {
        let (_, layout) = LayoutSpec::default().build().unwrap();
        assert_eq!(layout.q(), 60);
        assert_eq!(layout.r_vc(), 4);
        assert_eq!(layout.n_streams(), 7);
        assert_eq!(layout.upsilon_vc().shape(), (11, 7));
    }

    #[test]
    fn too_many_vcs_leave_no_streams() {
        let ctx = SpectralContext::new(16, 3).unwrap();
        let layout = VcLayout::new(&ctx, &[0, 2, 4, 6, 8]).unwrap();
        assert_eq!(layout.r_vc(), 4);
        assert_eq!(layout.n_streams(), 0);
        assert_eq!(layout.upsilon_vc().ncols(), 0);
    }

    #[test]
    fn no_vcs_keeps_every_stream() {
        let ctx = SpectralContext::new(16, 3).unwrap();
        let layout = VcLayout::new(&ctx, &[]).unwrap();
        assert_eq!(layout.n_streams(), 4);
        assert_eq!(layout.q(), 16);
    }
}
