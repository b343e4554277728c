//! Block-level time-domain simulation of one primary OFDM symbol period.
//!
//! The PTx sends `ũ_PU = T_cp W_IDFT Θ x_PU`. The STx receives `ỹ₂`, runs
//! it through the causal FIR `f̃` chosen by its data, and adds its own OFDM
//! block on the virtual carriers. Both receivers see the current block and
//! the tail of the previous one; after CP removal and a DFT the outputs are
//! compared with the per-subcarrier models [`pu_frequency_model`] and
//! [`srx_frequency_model`].

use std::io::{self, Read, Write};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{block_convolve, complex_gaussian, draw_channels, ChannelRealization, Link, LinkSpecs, NetworkScenario, SymbolModel};
use crate::error::{invalid, Error, Result};
use crate::precoder::PrecoderSet;
use crate::spectral::{SpectralContext, VcLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub m: usize,
    pub l_cp: usize,
    pub l_su: usize,
    pub specs: LinkSpecs,
}

impl FrameConfig {
    /// Validated configuration; every CP inequality must hold.
    pub fn new(m: usize, l_cp: usize, l_su: usize, specs: LinkSpecs) -> Result<Self> {
        let cfg = Self { m, l_cp, l_su, specs };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with the shortest admissible cyclic prefix.
    pub fn with_minimal_cp(m: usize, l_su: usize, specs: LinkSpecs) -> Result<Self> {
        Self::new(m, required_cp(&specs, l_su), l_su, specs)
    }

    /// Skips the CP checks. Only meant for fault-injection experiments.
    pub fn unchecked(m: usize, l_cp: usize, l_su: usize, specs: LinkSpecs) -> Self {
        Self { m, l_cp, l_su, specs }
    }

    /// Block length `P = M + L_cp`.
    pub fn p(&self) -> usize {
        self.m + self.l_cp
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.specs;
        if self.l_su >= self.m {
            return invalid(format!("L_su = {} must be below M = {}", self.l_su, self.m));
        }
        if self.l_cp > self.m {
            return Err(Error::CyclicPrefix(format!("L_cp = {} exceeds M = {}", self.l_cp, self.m)));
        }
        let relay3 = s.l12.span() + self.l_su + s.l23.span();
        let relay4 = s.l12.span() + self.l_su + s.l24.span();
        let checks = [
            ("L12+L_su+L23+θ12+θ23", relay3),
            ("L13+θ13", s.l13.span()),
            ("L12+L_su+L24+θ12+θ24", relay4),
            ("L14+θ14", s.l14.span()),
        ];
        for (name, need) in checks {
            if self.l_cp < need {
                return Err(Error::CyclicPrefix(format!("L_cp >= {name} fails: {} < {need}", self.l_cp)));
            }
        }
        let p = self.p();
        if relay3 > p - 1 || relay4 > p - 1 {
            return Err(Error::CyclicPrefix(format!(
                "relayed delay span {} exceeds P-1 = {}",
                relay3.max(relay4),
                p - 1
            )));
        }
        Ok(())
    }
}

/// Smallest `L_cp` meeting both receivers' CP conditions.
pub fn required_cp(specs: &LinkSpecs, l_su: usize) -> usize {
    let relay3 = specs.l12.span() + l_su + specs.l23.span();
    let relay4 = specs.l12.span() + l_su + specs.l24.span();
    relay3.max(specs.l13.span()).max(relay4).max(specs.l14.span())
}

/// How the STx receiver noise is generated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Independent white noise on all `P` samples.
    #[default]
    White,
    /// `ṽ₂ = T_cp w` for a white `M`-block `w`, which makes the relayed
    /// noise behave exactly like a circularly filtered sequence.
    CpStructured,
}

/// Symbols and noise blocks for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInputs {
    pub x_pu: Vec<Complex64>,
    pub x_su_i: Vec<Complex64>,
    pub x_su_ii: Vec<Complex64>,
    pub v2: Vec<Complex64>,
    pub v3: Vec<Complex64>,
    pub v4: Vec<Complex64>,
}

impl FrameInputs {
    pub fn noiseless(x_pu: Vec<Complex64>, x_su_i: Vec<Complex64>, x_su_ii: Vec<Complex64>, p: usize) -> Self {
        let z = vec![Complex64::default(); p];
        Self { x_pu, x_su_i, x_su_ii, v2: z.clone(), v3: z.clone(), v4: z }
    }

    /// Random symbols and noise for one frame.
    pub fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        cfg: &FrameConfig,
        layout: &VcLayout,
        n_streams: usize,
        scenario: &NetworkScenario,
        mode: NoiseMode,
    ) -> Self {
        let p = cfg.p();
        let x_pu = draw_pu_symbols(rng, layout.q(), scenario);
        let x_su_i = (0..n_streams).map(|_| complex_gaussian(rng, 1.0)).collect();
        let x_su_ii = (0..layout.m_vc()).map(|_| complex_gaussian(rng, 1.0)).collect();
        let v2 = match mode {
            NoiseMode::White => (0..p).map(|_| complex_gaussian(rng, scenario.noise.stx)).collect(),
            NoiseMode::CpStructured => {
                let w: Vec<Complex64> = (0..cfg.m).map(|_| complex_gaussian(rng, scenario.noise.stx)).collect();
                add_cp(&w, cfg.l_cp)
            }
        };
        let v3 = (0..p).map(|_| complex_gaussian(rng, scenario.noise.prx)).collect();
        let v4 = (0..p).map(|_| complex_gaussian(rng, scenario.noise.srx)).collect();
        Self { x_pu, x_su_i, x_su_ii, v2, v3, v4 }
    }
}

/// `Q` primary symbols of power `P_pu`.
pub fn draw_pu_symbols<R: Rng + ?Sized>(rng: &mut R, q: usize, scenario: &NetworkScenario) -> Vec<Complex64> {
    match scenario.pu_symbols {
        SymbolModel::Gaussian => (0..q).map(|_| complex_gaussian(rng, scenario.p_pu)).collect(),
        SymbolModel::ConstantModulus => (0..q)
            .map(|_| Complex64::from_polar(scenario.p_pu.sqrt(), rng.random::<f64>() * std::f64::consts::TAU))
            .collect(),
    }
}

/// Transmitted blocks and channels of the previous frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockHistory {
    pub u_pu: Vec<Complex64>,
    pub z2: Vec<Complex64>,
    pub channels: ChannelRealization,
}

impl BlockHistory {
    /// Zero state used before the first frame.
    pub fn silent(cfg: &FrameConfig) -> Self {
        let z = vec![Complex64::default(); cfg.p()];
        Self { u_pu: z.clone(), z2: z, channels: ChannelRealization::silent(&cfg.specs, cfg.m) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    pub x_pu: Vec<Complex64>,
    pub x_su_i: Vec<Complex64>,
    pub x_su_ii: Vec<Complex64>,
    pub u_pu: Vec<Complex64>,
    pub v2: Vec<Complex64>,
    pub y2: Vec<Complex64>,
    /// STx filter taps `f̃`.
    pub taps: Vec<Complex64>,
    /// STx filter response `F(m)`.
    pub response: Vec<Complex64>,
    /// VC signal `G x_II` in the frequency domain.
    pub vc_signal: Vec<Complex64>,
    pub z2: Vec<Complex64>,
    pub v3: Vec<Complex64>,
    pub y3: Vec<Complex64>,
    pub v4: Vec<Complex64>,
    pub y4: Vec<Complex64>,
    pub y_pu_f: Vec<Complex64>,
    pub y_su_f: Vec<Complex64>,
}

impl FrameTrace {
    /// State to carry into the next frame.
    pub fn history(&self, channels: &ChannelRealization) -> BlockHistory {
        BlockHistory { u_pu: self.u_pu.clone(), z2: self.z2.clone(), channels: channels.clone() }
    }
}

/// Prepends the last `l_cp` samples.
pub fn add_cp(block: &[Complex64], l_cp: usize) -> Vec<Complex64> {
    let m = block.len();
    let mut out = Vec::with_capacity(m + l_cp);
    out.extend_from_slice(&block[m - l_cp..]);
    out.extend_from_slice(block);
    out
}

/// Drops the first `l_cp` samples.
pub fn remove_cp(block: &[Complex64], l_cp: usize) -> &[Complex64] {
    &block[l_cp..]
}

/// `T_cp W_IDFT Θ x_PU`.
pub fn pu_transmit(x_pu: &[Complex64], ctx: &SpectralContext, layout: &VcLayout, cfg: &FrameConfig) -> Result<Vec<Complex64>> {
    let placed = layout.place_uc(x_pu)?;
    let time = ctx.idft(&placed);
    Ok(add_cp(time.as_slice(), cfg.l_cp))
}

/// `z(p) = Σ_{ℓ ≤ p} f̃(ℓ) y(p − ℓ)`; the filter restarts at every block.
pub fn causal_filter(taps: &[Complex64], input: &[Complex64]) -> Vec<Complex64> {
    (0..input.len())
        .map(|p| {
            taps.iter()
                .enumerate()
                .take(p + 1)
                .map(|(l, f)| f * input[p - l])
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StxOutput {
    pub z2: Vec<Complex64>,
    pub taps: Vec<Complex64>,
    pub response: Vec<Complex64>,
    pub vc_signal: Vec<Complex64>,
}

/// Convolutive superposition at the STx: `z̃₂ = F̃ ỹ₂ + T_cp W_IDFT G x_II`.
pub fn stx_process(
    y2: &[Complex64],
    x_su_i: &[Complex64],
    x_su_ii: &[Complex64],
    precoders: &PrecoderSet,
    ctx: &SpectralContext,
    cfg: &FrameConfig,
) -> Result<StxOutput> {
    if y2.len() != cfg.p() {
        return invalid(format!("received block has {} samples, expected {}", y2.len(), cfg.p()));
    }
    let response = precoders.response(x_su_i)?;
    let taps = ctx.min_norm_filter(&response)?;
    let vc_signal = precoders.vc_signal(x_su_ii)?;
    let u_su = add_cp(ctx.idft(&vc_signal).as_slice(), cfg.l_cp);
    let mut z2 = causal_filter(&taps, y2);
    for (z, u) in z2.iter_mut().zip(&u_su) {
        *z += u;
    }
    Ok(StxOutput { z2, taps, response, vc_signal })
}

/// Everything the simulator needs that does not change between frames.
#[derive(Debug, Clone)]
pub struct FrameSetup<'a> {
    pub cfg: &'a FrameConfig,
    pub ctx: &'a SpectralContext,
    pub layout: &'a VcLayout,
    pub precoders: &'a PrecoderSet,
}

fn conv(channels: &ChannelRealization, link: Link, cur: &[Complex64], prev_channels: &ChannelRealization, prev: &[Complex64]) -> Vec<Complex64> {
    let now = channels.get(link);
    let before = prev_channels.get(link);
    let zero = vec![Complex64::default(); cur.len()];
    let mut y = block_convolve(&now.taps, now.offset, cur, &zero);
    let tail = block_convolve(&before.taps, before.offset, &zero, prev);
    for (a, b) in y.iter_mut().zip(tail) {
        *a += b;
    }
    y
}

/// One frame through both receivers. The current block sees this frame's
/// channels; the inter-block tail of the previous block is filtered by the
/// previous frame's channels.
pub fn simulate_frame(
    setup: &FrameSetup<'_>,
    history: &BlockHistory,
    channels: &ChannelRealization,
    inputs: &FrameInputs,
) -> Result<FrameTrace> {
    let cfg = setup.cfg;
    let p = cfg.p();
    for (name, v) in [("v2", &inputs.v2), ("v3", &inputs.v3), ("v4", &inputs.v4)] {
        if v.len() != p {
            return invalid(format!("noise block {name} has {} samples, expected {p}", v.len()));
        }
    }
    let prev = &history.channels;
    let u_pu = pu_transmit(&inputs.x_pu, setup.ctx, setup.layout, cfg)?;

    let mut y2 = conv(channels, Link::PtxStx, &u_pu, prev, &history.u_pu);
    add_assign(&mut y2, &inputs.v2);

    let stx = stx_process(&y2, &inputs.x_su_i, &inputs.x_su_ii, setup.precoders, setup.ctx, cfg)?;

    let mut y3 = conv(channels, Link::PtxPrx, &u_pu, prev, &history.u_pu);
    add_assign(&mut y3, &conv(channels, Link::StxPrx, &stx.z2, prev, &history.z2));
    add_assign(&mut y3, &inputs.v3);

    let mut y4 = conv(channels, Link::PtxSrx, &u_pu, prev, &history.u_pu);
    add_assign(&mut y4, &conv(channels, Link::StxSrx, &stx.z2, prev, &history.z2));
    add_assign(&mut y4, &inputs.v4);

    let y_pu_f = setup.ctx.dft(remove_cp(&y3, cfg.l_cp)).iter().copied().collect();
    let y_su_f = setup.ctx.dft(remove_cp(&y4, cfg.l_cp)).iter().copied().collect();

    Ok(FrameTrace {
        x_pu: inputs.x_pu.clone(),
        x_su_i: inputs.x_su_i.clone(),
        x_su_ii: inputs.x_su_ii.clone(),
        u_pu,
        v2: inputs.v2.clone(),
        y2,
        taps: stx.taps,
        response: stx.response,
        vc_signal: stx.vc_signal,
        z2: stx.z2,
        v3: inputs.v3.clone(),
        y3,
        v4: inputs.v4.clone(),
        y4,
        y_pu_f,
        y_su_f,
    })
}

fn add_assign(a: &mut [Complex64], b: &[Complex64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Frequency-domain view of a time-domain noise block: `W_DFT R_cp ṽ`.
pub fn noise_spectrum(ctx: &SpectralContext, v: &[Complex64], l_cp: usize) -> Vec<Complex64> {
    ctx.dft(remove_cp(v, l_cp)).iter().copied().collect()
}

/// Per-subcarrier PRx model
/// `y_PU = H_PU Θx + H23 F v2 + H23 G x_II + v3`, `H_PU = H13 + H12 H23 F`.
pub fn pu_frequency_model(
    channels: &ChannelRealization,
    layout: &VcLayout,
    x_pu: &[Complex64],
    response: &[Complex64],
    vc_signal: &[Complex64],
    v2_f: &[Complex64],
    v3_f: &[Complex64],
) -> Result<Vec<Complex64>> {
    let x = layout.place_uc(x_pu)?;
    Ok((0..layout.m())
        .map(|m| {
            let h23 = channels.h(Link::StxPrx, m);
            let h_pu = channels.h(Link::PtxPrx, m) + channels.h(Link::PtxStx, m) * h23 * response[m];
            h_pu * x[m] + h23 * response[m] * v2_f[m] + h23 * vc_signal[m] + v3_f[m]
        })
        .collect())
}

/// Diagonal of `H_SU`: `H24(m) [H12(m) x_PU(m) β_m + v2(m)]`, with `β_m = 0`
/// on virtual carriers.
pub fn h_su_diagonal(channels: &ChannelRealization, layout: &VcLayout, x_pu: &[Complex64], v2_f: &[Complex64]) -> Result<Vec<Complex64>> {
    let x = layout.place_uc(x_pu)?;
    Ok((0..layout.m())
        .map(|m| channels.h(Link::StxSrx, m) * (channels.h(Link::PtxStx, m) * x[m] + v2_f[m]))
        .collect())
}

/// Per-subcarrier SRx model
/// `y_SU = H_SU F + H24 G x_II + H14 Θx + v4`.
pub fn srx_frequency_model(
    channels: &ChannelRealization,
    layout: &VcLayout,
    x_pu: &[Complex64],
    response: &[Complex64],
    vc_signal: &[Complex64],
    v2_f: &[Complex64],
    v4_f: &[Complex64],
) -> Result<Vec<Complex64>> {
    let h_su = h_su_diagonal(channels, layout, x_pu, v2_f)?;
    let x = layout.place_uc(x_pu)?;
    Ok((0..layout.m())
        .map(|m| {
            h_su[m] * response[m] + channels.h(Link::StxSrx, m) * vc_signal[m] + channels.h(Link::PtxSrx, m) * x[m] + v4_f[m]
        })
        .collect())
}

/// Stateful driver that draws channels and inputs and threads the block
/// history from one frame to the next.
pub struct LinkSimulator<'a> {
    setup: FrameSetup<'a>,
    scenario: &'a NetworkScenario,
    mode: NoiseMode,
    history: BlockHistory,
}

impl<'a> LinkSimulator<'a> {
    pub fn new(setup: FrameSetup<'a>, scenario: &'a NetworkScenario, mode: NoiseMode) -> Self {
        let history = BlockHistory::silent(setup.cfg);
        Self { setup, scenario, mode, history }
    }

    pub fn reset(&mut self) {
        self.history = BlockHistory::silent(self.setup.cfg);
    }

    pub fn history(&self) -> &BlockHistory {
        &self.history
    }

    /// Draws one frame, simulates it and advances the history.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(ChannelRealization, FrameTrace)> {
        let cfg = self.setup.cfg;
        let channels = draw_channels(self.scenario, &cfg.specs, cfg.m, rng);
        let inputs = FrameInputs::draw(rng, cfg, self.setup.layout, self.setup.precoders.n_streams(), self.scenario, self.mode);
        let trace = simulate_frame(&self.setup, &self.history, &channels, &inputs)?;
        self.history = trace.history(&channels);
        Ok((channels, trace))
    }
}

/// Frame-trace file format, little-endian throughout:
///
/// ```text
/// header : b"CSFT" | version u32 | M u32 | L_cp u32 | L_su u32 | seed u64
/// record : frame u64 | 13 blocks, each u32 length n then n (re f64, im f64)
/// ```
///
/// Block order: `x_pu, x_su_i, x_su_ii, u_pu, v2, y2, z2, v3, y3, v4, y4,
/// y_pu_f, y_su_f`.
pub mod trace_file {
    use super::*;

    pub const MAGIC: &[u8; 4] = b"CSFT";
    pub const VERSION: u32 = 1;
    pub const BLOCKS: usize = 13;

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub struct Header {
        pub m: u32,
        pub l_cp: u32,
        pub l_su: u32,
        pub seed: u64,
    }

    pub fn write_header<W: Write>(w: &mut W, h: &Header) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&h.m.to_le_bytes())?;
        w.write_all(&h.l_cp.to_le_bytes())?;
        w.write_all(&h.l_su.to_le_bytes())?;
        w.write_all(&h.seed.to_le_bytes())
    }

    fn blocks(t: &FrameTrace) -> [&[Complex64]; BLOCKS] {
        [
            &t.x_pu, &t.x_su_i, &t.x_su_ii, &t.u_pu, &t.v2, &t.y2, &t.z2, &t.v3, &t.y3, &t.v4, &t.y4, &t.y_pu_f, &t.y_su_f,
        ]
    }

    pub fn write_record<W: Write>(w: &mut W, frame: u64, t: &FrameTrace) -> io::Result<()> {
        w.write_all(&frame.to_le_bytes())?;
        for b in blocks(t) {
            w.write_all(&(b.len() as u32).to_le_bytes())?;
            for z in b {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    fn take<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
        let mut buf = [0u8; N];
        r.read_exact(&mut buf)?;
        Ok(buf)
    }

    pub fn read_header<R: Read>(r: &mut R) -> io::Result<Header> {
        if &take::<4, _>(r)? != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not a frame-trace file"));
        }
        let version = u32::from_le_bytes(take(r)?);
        if version != VERSION {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unsupported version {version}")));
        }
        Ok(Header {
            m: u32::from_le_bytes(take(r)?),
            l_cp: u32::from_le_bytes(take(r)?),
            l_su: u32::from_le_bytes(take(r)?),
            seed: u64::from_le_bytes(take(r)?),
        })
    }

    /// Reads one record, or `None` at a clean end of file.
    pub fn read_record<R: Read>(r: &mut R) -> io::Result<Option<(u64, Vec<Vec<Complex64>>)>> {
        let mut first = [0u8; 8];
        match r.read_exact(&mut first) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        let frame = u64::from_le_bytes(first);
        let mut out = Vec::with_capacity(BLOCKS);
        for _ in 0..BLOCKS {
            let n = u32::from_le_bytes(take(r)?) as usize;
            let mut b = Vec::with_capacity(n);
            for _ in 0..n {
                let re = f64::from_le_bytes(take(r)?);
                let im = f64::from_le_bytes(take(r)?);
                b.push(Complex64::new(re, im));
            }
            out.push(b);
        }
        Ok(Some((frame, out)))
    }
}
