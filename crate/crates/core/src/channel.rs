//! Network geometry, path loss, and block-fading multipath channels.
//!
//! Four nodes take part: the primary transmitter (PTx) and receiver (PRx),
//! the secondary transmitter (STx) and the secondary receiver (SRx). Every
//! link is an FIR of order `L` preceded by an integer timing offset `θ`
//! and has total average gain `d^{-η}`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    /// PTx to STx.
    PtxStx,
    /// PTx to PRx.
    PtxPrx,
    /// PTx to SRx.
    PtxSrx,
    /// STx to PRx.
    StxPrx,
    /// STx to SRx.
    StxSrx,
}

impl Link {
    pub const ALL: [Link; 5] = [Link::PtxStx, Link::PtxPrx, Link::PtxSrx, Link::StxPrx, Link::StxSrx];

    fn index(self) -> usize {
        self as usize
    }

    /// Two-digit label with nodes numbered PTx=1, STx=2, PRx=3, SRx=4.
    pub fn label(self) -> &'static str {
        match self {
            Link::PtxStx => "12",
            Link::PtxPrx => "13",
            Link::PtxSrx => "14",
            Link::StxPrx => "23",
            Link::StxSrx => "24",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Receiver noise variances at STx, PRx and SRx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseVariances {
    pub stx: f64,
    pub prx: f64,
    pub srx: f64,
}

impl NoiseVariances {
    pub fn equal(v: f64) -> Self {
        Self { stx: v, prx: v, srx: v }
    }
}

/// Distribution of the primary data symbols on each used carrier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolModel {
    /// Circularly symmetric complex Gaussian with variance `P_pu`.
    #[default]
    Gaussian,
    /// Unit-modulus symbols scaled to power `P_pu` (PSK-like).
    ConstantModulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScenario {
    pub ptx: Point,
    pub stx: Point,
    pub prx: Point,
    pub srx: Point,
    /// Path-loss exponent.
    pub eta: f64,
    /// Primary transmit power per used carrier.
    pub p_pu: f64,
    /// Secondary transmit power budget per block.
    pub p_su: f64,
    pub noise: NoiseVariances,
    #[serde(default)]
    pub pu_symbols: SymbolModel,
}

/// Default node placement: PTx and PRx one unit apart, SRx two units above
/// their midpoint.
pub const PTX: Point = Point::new(-0.5, 0.0);
pub const PRX: Point = Point::new(0.5, 0.0);
pub const SRX: Point = Point::new(0.0, 2.0);

/// Direction of the ray from PTx on which the STx is placed.
pub const STX_BEARING: f64 = std::f64::consts::FRAC_PI_3;

impl NetworkScenario {
    /// Reference geometry with the STx at distance `d12` from the PTx,
    /// path-loss exponent 3, unit powers, and equal noise `sigma2`.
    pub fn reference(d12: f64, sigma2: f64) -> Self {
        Self {
            ptx: PTX,
            stx: stx_on_ray(d12),
            prx: PRX,
            srx: SRX,
            eta: 3.0,
            p_pu: 1.0,
            p_su: 1.0,
            noise: NoiseVariances::equal(sigma2),
            pu_symbols: SymbolModel::Gaussian,
        }
    }

    pub fn distance(&self, link: Link) -> f64 {
        match link {
            Link::PtxStx => self.ptx.dist(self.stx),
            Link::PtxPrx => self.ptx.dist(self.prx),
            Link::PtxSrx => self.ptx.dist(self.srx),
            Link::StxPrx => self.stx.dist(self.prx),
            Link::StxSrx => self.stx.dist(self.srx),
        }
    }

    /// Average link gain `σ² = d^{-η}`.
    pub fn variance(&self, link: Link) -> f64 {
        self.distance(link).powf(-self.eta)
    }

    /// `SNR_13 = σ13² P_pu / σ_v3²`.
    pub fn snr13(&self) -> f64 {
        self.variance(Link::PtxPrx) * self.p_pu / self.noise.prx
    }

    /// `κ = (σ13/σ12)(σ_v2/σ_v3)`, which alone fixes the PU outage probability.
    pub fn kappa(&self) -> f64 {
        (self.variance(Link::PtxPrx) / self.variance(Link::PtxStx)).sqrt()
            * (self.noise.stx / self.noise.prx).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        for link in Link::ALL {
            let d = self.distance(link);
            if !(d > 0.0 && d.is_finite()) {
                return invalid(format!("link {} has non-positive distance {d}", link.label()));
            }
        }
        if !(self.eta > 0.0) {
            return invalid(format!("path-loss exponent must be positive, got {}", self.eta));
        }
        if !(self.p_pu > 0.0 && self.p_su >= 0.0) {
            return invalid(format!(
                "powers must satisfy P_pu > 0 and P_su >= 0, got {} and {}",
                self.p_pu, self.p_su
            ));
        }
        let n = self.noise;
        if !(n.stx > 0.0 && n.prx > 0.0 && n.srx > 0.0) {
            return invalid("noise variances must be positive");
        }
        Ok(())
    }
}

/// STx position at distance `d12` along the fixed bearing from the PTx.
pub fn stx_on_ray(d12: f64) -> Point {
    Point::new(PTX.x + d12 * STX_BEARING.cos(), PTX.y + d12 * STX_BEARING.sin())
}

/// Order `L` and timing offset `θ` of one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub order: usize,
    pub offset: usize,
}

impl LinkSpec {
    pub const fn new(order: usize, offset: usize) -> Self {
        Self { order, offset }
    }

    /// Total delay span `L + θ`.
    pub fn span(&self) -> usize {
        self.order + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpecs {
    pub l12: LinkSpec,
    pub l13: LinkSpec,
    pub l14: LinkSpec,
    pub l23: LinkSpec,
    pub l24: LinkSpec,
}

impl Default for LinkSpecs {
    fn default() -> Self {
        Self {
            l12: LinkSpec::new(1, 1),
            l13: LinkSpec::new(3, 3),
            l14: LinkSpec::new(3, 3),
            l23: LinkSpec::new(2, 2),
            l24: LinkSpec::new(2, 2),
        }
    }
}

impl LinkSpecs {
    pub fn get(&self, link: Link) -> LinkSpec {
        match link {
            Link::PtxStx => self.l12,
            Link::PtxPrx => self.l13,
            Link::PtxSrx => self.l14,
            Link::StxPrx => self.l23,
            Link::StxSrx => self.l24,
        }
    }
}

/// One link of one block: taps, offset, and the frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkChannel {
    pub taps: Vec<Complex64>,
    pub offset: usize,
    pub freq: Vec<Complex64>,
}

impl LinkChannel {
    pub fn new(taps: Vec<Complex64>, offset: usize, m: usize) -> Self {
        let freq = frequency_response(&taps, offset, m);
        Self { taps, offset, freq }
    }

    pub fn order(&self) -> usize {
        self.taps.len().saturating_sub(1)
    }
}

/// All five links for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    links: [LinkChannel; 5],
}

impl ChannelRealization {
    pub fn from_links(links: [LinkChannel; 5]) -> Self {
        Self { links }
    }

    pub fn get(&self, link: Link) -> &LinkChannel {
        &self.links[link.index()]
    }

    /// Frequency response of `link` on subcarrier `m`.
    pub fn h(&self, link: Link, m: usize) -> Complex64 {
        self.links[link.index()].freq[m]
    }

    pub fn m(&self) -> usize {
        self.links[0].freq.len()
    }

    /// All-zero channels of the given shapes.
    pub fn silent(specs: &LinkSpecs, m: usize) -> Self {
        let make = |s: LinkSpec| LinkChannel::new(vec![Complex64::default(); s.order + 1], s.offset, m);
        Self {
            links: [make(specs.l12), make(specs.l13), make(specs.l14), make(specs.l23), make(specs.l24)],
        }
    }
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draws one block of channels with a uniform power-delay profile, each
/// tap `CN(0, σ²/(L+1))`.
pub fn draw_channels<R: Rng + ?Sized>(
    scenario: &NetworkScenario,
    specs: &LinkSpecs,
    m: usize,
    rng: &mut R,
) -> ChannelRealization {
    let mut draw = |link: Link| {
        let spec = specs.get(link);
        let tap_var = scenario.variance(link) / (spec.order + 1) as f64;
        let taps = (0..=spec.order).map(|_| complex_gaussian(rng, tap_var)).collect();
        LinkChannel::new(taps, spec.offset, m)
    };
    let links = Link::ALL.map(&mut draw);
    ChannelRealization { links }
}

/// `H(m) = e^{-j2πθm/M} Σ_ℓ h(ℓ) e^{-j2πℓm/M}`.
pub fn frequency_response(taps: &[Complex64], offset: usize, m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| {
                    let r = ((l + offset) * k) % m;
                    h * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * r as f64 / m as f64)
                })
                .sum()
        })
        .collect()
}

/// Current-block and previous-block Toeplitz matrices of size `P × P`.
///
/// `H0` is lower triangular with `h(ℓ)` on subdiagonal `ℓ+θ`; `H1` carries
/// the tail of the previous block into the first `L+θ` rows.
pub fn toeplitz_pair(taps: &[Complex64], offset: usize, p: usize) -> Result<(CMat, CMat)> {
    if taps.is_empty() {
        return invalid("a channel needs at least one tap");
    }
    let span = taps.len() - 1 + offset;
    if span >= p {
        return invalid(format!("delay span {span} must be shorter than the block length {p}"));
    }
    let mut h0 = CMat::zeros(p, p);
    let mut h1 = CMat::zeros(p, p);
    for (l, &h) in taps.iter().enumerate() {
        let k = l + offset;
        for i in 0..p - k {
            h0[(i + k, i)] = h;
        }
        // backward shift by P - k: ones at (i, i + P - k)
        for i in 0..k {
            h1[(i, i + p - k)] = h;
        }
    }
    Ok((h0, h1))
}

/// Block-wise linear convolution `y(p) = Σ_ℓ h(ℓ) s(p − ℓ − θ)` where
/// negative indices reach into `previous`.
pub fn block_convolve(
    taps: &[Complex64],
    offset: usize,
    current: &[Complex64],
    previous: &[Complex64],
) -> Vec<Complex64> {
    let p = current.len();
    assert_eq!(previous.len(), p, "consecutive blocks must have equal length");
    assert!(taps.len() + offset <= p, "delay span must be shorter than the block");
    (0..p)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| {
                    let back = l + offset;
                    let s = if i >= back { current[i - back] } else { previous[p + i - back] };
                    h * s
                })
                .sum()
        })
        .collect()
}
