//! Configuration-driven sweeps and their CSV / JSON artefacts.
//!
//! A [`SweepConfig`] fixes a scenario template, one swept variable (and an
//! optional second "series" variable), the schemes to compare, and the
//! Monte Carlo budget. [`run_sweep`] produces one [`SweepRow`] per
//! (series value, grid value, scheme); all schemes at a grid point share
//! the same seed so their differences are measured with common random
//! numbers.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::{
    baseline_nocr, baseline_ocr, c_pu_direct, c_pu_lower, c_su_lower_csit, c_su_lower_nocsit, nocr_profile, pu_outage_probability,
    CapacityReport, CsitMode, FadingModel,
};
use crate::channel::{Link, LinkSpecs, NetworkScenario, NoiseVariances, Point, SymbolModel, PRX, PTX, SRX};
use crate::error::{Error, Result};
use crate::mc::MonteCarlo;
use crate::precoder::{realize_precoders, uniform_profile};
use crate::spectral::{LayoutSpec, SpectralContext, VcLayout};
use crate::transceiver::FrameConfig;

pub use crate::validation::{validate_suite, validate_suite_with, CheckOutcome, CheckStatus, ValidateOptions, ValidationReport};

/// Symbol rate used to convert bits/s/Hz into bits/s.
pub const SYMBOL_RATE_HZ: f64 = 20e6;

pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Convolutive superposition with power on the virtual carriers.
    ProposedWithVcs,
    /// Convolutive superposition only (`G = 0`).
    ProposedWithoutVcs,
    /// SU transmits on the virtual carriers only.
    Ocr,
    /// Single-stream multiplicative relaying (`L_su = 0`, `N = 1`).
    Nocr,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ProposedWithVcs => "proposed_with_vcs",
            Scheme::ProposedWithoutVcs => "proposed_without_vcs",
            Scheme::Ocr => "ocr",
            Scheme::Nocr => "nocr",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// Noise set from `SNR_PU = P_pu / σ²`.
    #[default]
    Pu,
    /// Noise set from `SNR_SU = P_su / σ²`.
    Su,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioReference {
    /// `d12 = ratio · d13`.
    #[default]
    D13,
    /// `d12 = ratio · d14`.
    D14,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    #[default]
    IidSubcarriers,
    TapDomain,
}

fn default_eta() -> f64 {
    3.0
}
fn default_one() -> f64 {
    1.0
}
fn default_snr() -> f64 {
    20.0
}
fn default_ratio() -> f64 {
    0.3
}

/// Scenario with every knob in explicit units. Distances are relative to
/// `d13 = 1`; SNRs are in dB; powers are linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioTemplate {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_one")]
    pub p_pu: f64,
    /// `P_su / P_pu`.
    #[serde(default = "default_one")]
    pub power_ratio: f64,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub snr_reference: SnrReference,
    #[serde(default = "default_ratio")]
    pub d12_ratio: f64,
    #[serde(default)]
    pub ratio_reference: RatioReference,
    #[serde(default)]
    pub pu_symbols: SymbolModel,
    #[serde(default)]
    pub fading: FadingKind,
}

impl Default for ScenarioTemplate {
    fn default() -> Self {
        Self {
            eta: 3.0,
            p_pu: 1.0,
            power_ratio: 1.0,
            snr_db: 20.0,
            snr_reference: SnrReference::Pu,
            d12_ratio: 0.3,
            ratio_reference: RatioReference::D13,
            pu_symbols: SymbolModel::Gaussian,
            fading: FadingKind::IidSubcarriers,
        }
    }
}

impl ScenarioTemplate {
    /// Concrete scenario: STx on the fixed ray from PTx, equal noise at
    /// all receivers.
    pub fn resolve(&self) -> Result<NetworkScenario> {
        if !(self.snr_db.is_finite() && self.d12_ratio > 0.0 && self.power_ratio >= 0.0 && self.p_pu > 0.0) {
            return Err(Error::Config(format!(
                "need finite snr_db, d12_ratio > 0, power_ratio >= 0 and p_pu > 0 (got {}, {}, {}, {})",
                self.snr_db, self.d12_ratio, self.power_ratio, self.p_pu
            )));
        }
        let reference = match self.ratio_reference {
            RatioReference::D13 => PTX.dist(PRX),
            RatioReference::D14 => PTX.dist(SRX),
        };
        let p_su = self.power_ratio * self.p_pu;
        let p_ref = match self.snr_reference {
            SnrReference::Pu => self.p_pu,
            SnrReference::Su => p_su,
        };
        if p_ref <= 0.0 {
            return Err(Error::Config("the SNR reference power is zero".into()));
        }
        let sigma2 = p_ref / 10f64.powf(self.snr_db / 10.0);
        let mut s = NetworkScenario::reference(self.d12_ratio * reference, sigma2);
        s.eta = self.eta;
        s.p_pu = self.p_pu;
        s.p_su = p_su;
        s.noise = NoiseVariances::equal(sigma2);
        s.pu_symbols = self.pu_symbols;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrPuDb,
    SnrSuDb,
    D12Ratio,
    PowerRatio,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::SnrPuDb => "snr_pu_db",
            SweepVariable::SnrSuDb => "snr_su_db",
            SweepVariable::D12Ratio => "d12_ratio",
            SweepVariable::PowerRatio => "power_ratio",
        }
    }

    pub fn apply(self, t: &mut ScenarioTemplate, value: f64) {
        match self {
            SweepVariable::SnrPuDb => {
                t.snr_reference = SnrReference::Pu;
                t.snr_db = value;
            }
            SweepVariable::SnrSuDb => {
                t.snr_reference = SnrReference::Su;
                t.snr_db = value;
            }
            SweepVariable::D12Ratio => t.d12_ratio = value,
            SweepVariable::PowerRatio => t.power_ratio = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Axis {
    fn check(&self, what: &str) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config(format!("{what} grid is empty")));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::Config(format!("{what} grid must be strictly monotone")));
        }
        Ok(())
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::ProposedWithVcs, Scheme::ProposedWithoutVcs, Scheme::Ocr, Scheme::Nocr]
}

fn default_trials() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub csit_mode: CsitMode,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub scenario: ScenarioTemplate,
    #[serde(default)]
    pub layout: LayoutSpec,
    #[serde(default)]
    pub links: LinkSpecs,
    pub sweep: Axis,
    #[serde(default)]
    pub series: Option<Axis>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that can be checked without running trials and
    /// returns the derived frame geometry.
    pub fn validate(&self) -> Result<Derived> {
        self.sweep.check("sweep")?;
        if let Some(s) = &self.series {
            s.check("series")?;
            if s.variable == self.sweep.variable {
                return Err(Error::Config("series and sweep must use different variables".into()));
            }
        }
        if self.n_trials < MIN_TRIALS {
            return Err(Error::Config(format!("n_trials = {} is below the minimum {MIN_TRIALS}", self.n_trials)));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no schemes selected".into()));
        }
        let (ctx, layout) = self.layout.build()?;
        if layout.n_streams() == 0 {
            return Err(Error::Config(format!(
                "N = L_su + 1 - R_vc must be positive, got {} + 1 - {}",
                self.layout.l_su,
                layout.r_vc()
            )));
        }
        let cfg = FrameConfig::with_minimal_cp(self.layout.m, self.layout.l_su, self.links)?;
        for point in self.points() {
            point.template.resolve()?;
        }
        Ok(Derived::new(&ctx, &layout, &cfg))
    }

    fn points(&self) -> Vec<GridPoint> {
        let series: Vec<Option<(usize, f64)>> = match &self.series {
            None => vec![None],
            Some(axis) => axis.values.iter().copied().enumerate().map(Some).collect(),
        };
        let mut out = Vec::new();
        for s in series {
            for (gi, &v) in self.sweep.values.iter().enumerate() {
                let mut template = self.scenario.clone();
                if let (Some((_, sv)), Some(axis)) = (s, &self.series) {
                    axis.variable.apply(&mut template, sv);
                }
                self.sweep.variable.apply(&mut template, v);
                let si = s.map_or(0, |x| x.0);
                out.push(GridPoint {
                    series_value: s.map(|x| x.1),
                    sweep_value: v,
                    seed: point_seed(self.seed, si as u64, gi as u64),
                    template,
                });
            }
        }
        out
    }

    fn fading(&self) -> FadingModel {
        match self.scenario.fading {
            FadingKind::IidSubcarriers => FadingModel::IidSubcarriers,
            FadingKind::TapDomain => FadingModel::TapDomain(self.links),
        }
    }
}

#[derive(Debug, Clone)]
struct GridPoint {
    series_value: Option<f64>,
    sweep_value: f64,
    seed: u64,
    template: ScenarioTemplate,
}

/// SplitMix64 finaliser, used to derive independent per-point seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn point_seed(seed: u64, series_index: u64, grid_index: u64) -> u64 {
    mix(mix(seed ^ mix(series_index)) ^ grid_index)
}

/// Frame geometry implied by a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub m: usize,
    pub l_su: usize,
    pub l_cp: usize,
    pub p: usize,
    pub q: usize,
    pub m_vc: usize,
    pub n_streams: usize,
    /// `M / (M + L_cp)`, the CP efficiency left out of all capacities.
    pub cp_efficiency: f64,
    pub symbol_rate_hz: f64,
}

impl Derived {
    fn new(ctx: &SpectralContext, layout: &VcLayout, cfg: &FrameConfig) -> Self {
        Self {
            m: ctx.m(),
            l_su: ctx.l_su(),
            l_cp: cfg.l_cp,
            p: cfg.p(),
            q: layout.q(),
            m_vc: layout.m_vc(),
            n_streams: layout.n_streams(),
            cp_efficiency: cfg.m as f64 / cfg.p() as f64,
            symbol_rate_hz: SYMBOL_RATE_HZ,
        }
    }
}

/// Per-(point, scheme) evaluation result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub report: CapacityReport,
    /// Worst relative UC row-norm gap of the realised precoder, if any.
    pub row_mismatch: Option<f64>,
}

/// Capacities of one scheme at one resolved scenario.
pub fn evaluate_scheme(
    scenario: &NetworkScenario,
    ctx: &SpectralContext,
    layout: &VcLayout,
    scheme: Scheme,
    mode: CsitMode,
    fading: FadingModel,
    mc: &MonteCarlo,
) -> Result<SchemeResult> {
    let direct = c_pu_direct(scenario, layout);
    let m_vc = layout.m_vc() as f64;
    let report = |pu: Option<crate::capacity::PuCapacity>, su: crate::mc::Estimate, p_out: f64| {
        let (lower, lower_se) = pu.map_or((direct, 0.0), |p| (p.lower.mean, p.lower.std_err));
        CapacityReport {
            c_pu_lower: lower,
            c_pu_direct: direct,
            delta_c_pu: lower - direct,
            c_su_lower: su.mean,
            mode,
            p_out,
            n_trials: mc.trials,
            stderr_c_pu_lower: lower_se,
            stderr_delta_c_pu: lower_se,
            stderr_c_su_lower: su.std_err,
        }
    };
    match scheme {
        Scheme::ProposedWithVcs | Scheme::ProposedWithoutVcs => {
            let use_vcs = scheme == Scheme::ProposedWithVcs && layout.m_vc() > 0;
            let g = if use_vcs { scenario.p_su / (2.0 * m_vc) } else { 0.0 };
            let requested = uniform_profile(layout, scenario, g)?;
            let (pu, mismatch) = if scenario.p_su > 0.0 {
                let pre = realize_precoders(ctx, layout, &requested)?;
                (c_pu_lower(scenario, layout, &pre.profile, mc)?, Some(pre.max_row_mismatch))
            } else {
                (c_pu_lower(scenario, layout, &requested, mc)?, None)
            };
            let su = match mode {
                CsitMode::Csit => c_su_lower_csit(scenario, layout, fading, use_vcs, mc)?,
                CsitMode::Nocsit => c_su_lower_nocsit(scenario, layout, g, mc)?.direct,
            };
            let p_out = if scenario.p_su > 0.0 { pu_outage_probability(scenario)? } else { 0.0 };
            Ok(SchemeResult { report: report(Some(pu), su, p_out), row_mismatch: mismatch })
        }
        Scheme::Ocr => {
            let su = baseline_ocr(scenario, layout, mc)?;
            Ok(SchemeResult { report: report(None, su, 0.0), row_mismatch: None })
        }
        Scheme::Nocr => {
            let profile = nocr_profile(scenario, layout)?;
            let pu = c_pu_lower(scenario, layout, &profile, mc)?;
            let su = baseline_nocr(scenario, layout, mc)?;
            let p_out = if scenario.p_su > 0.0 { pu_outage_probability(scenario)? } else { 0.0 };
            Ok(SchemeResult { report: report(Some(pu), su, p_out), row_mismatch: None })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub series_var: Option<String>,
    pub series_value: Option<f64>,
    pub sweep_var: String,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub csit_mode: CsitMode,
    pub c_pu_lower: f64,
    pub c_pu_direct: f64,
    pub delta_c_pu: f64,
    pub c_su_lower: f64,
    pub p_out: f64,
    pub stderr_c_pu_lower: f64,
    pub stderr_delta_c_pu: f64,
    pub stderr_c_su_lower: f64,
    pub n_trials: usize,
    pub seed: u64,
}

pub const CSV_HEADER: [&str; 16] = [
    "series_var",
    "series_value",
    "sweep_var",
    "sweep_value",
    "scheme",
    "csit_mode",
    "c_pu_lower",
    "c_pu_direct",
    "delta_c_pu",
    "c_su_lower",
    "p_out",
    "stderr_c_pu_lower",
    "stderr_delta_c_pu",
    "stderr_c_su_lower",
    "n_trials",
    "seed",
];

/// Resolved coordinates and derived quantities of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub series_value: Option<f64>,
    pub sweep_value: f64,
    pub seed: u64,
    pub stx: Point,
    pub d12: f64,
    pub p_su: f64,
    pub noise_variance: f64,
    pub kappa: f64,
    pub row_mismatch: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library: String,
    pub version: String,
    pub config: SweepConfig,
    pub derived: Derived,
    pub points: Vec<PointRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub manifest: Manifest,
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutput> {
    let derived = cfg.validate()?;
    let (ctx, layout) = cfg.layout.build()?;
    let fading = cfg.fading();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for point in cfg.points() {
        let scenario = point.template.resolve()?;
        let mc = MonteCarlo::new(cfg.n_trials, point.seed);
        let mut mismatch = None;
        for &scheme in &cfg.schemes {
            let r = evaluate_scheme(&scenario, &ctx, &layout, scheme, cfg.csit_mode, fading, &mc)?;
            mismatch = mismatch.or(r.row_mismatch);
            let rep = r.report;
            rows.push(SweepRow {
                series_var: cfg.series.as_ref().map(|s| s.variable.name().to_string()),
                series_value: point.series_value,
                sweep_var: cfg.sweep.variable.name().to_string(),
                sweep_value: point.sweep_value,
                scheme,
                csit_mode: cfg.csit_mode,
                c_pu_lower: rep.c_pu_lower,
                c_pu_direct: rep.c_pu_direct,
                delta_c_pu: rep.delta_c_pu,
                c_su_lower: rep.c_su_lower,
                p_out: rep.p_out,
                stderr_c_pu_lower: rep.stderr_c_pu_lower,
                stderr_delta_c_pu: rep.stderr_delta_c_pu,
                stderr_c_su_lower: rep.stderr_c_su_lower,
                n_trials: rep.n_trials,
                seed: point.seed,
            });
        }
        points.push(PointRecord {
            series_value: point.series_value,
            sweep_value: point.sweep_value,
            seed: point.seed,
            stx: scenario.stx,
            d12: scenario.distance(Link::PtxStx),
            p_su: scenario.p_su,
            noise_variance: scenario.noise.prx,
            kappa: scenario.kappa(),
            row_mismatch: mismatch,
        });
    }
    let manifest = Manifest {
        library: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        derived,
        points,
    };
    Ok(SweepOutput { rows, manifest })
}

fn sci(v: f64) -> String {
    format!("{v:e}")
}

/// Writes the rows as CSV; floats use shortest round-trip scientific
/// notation.
pub fn write_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.series_var.clone().unwrap_or_default(),
            r.series_value.map(sci).unwrap_or_default(),
            r.sweep_var.clone(),
            sci(r.sweep_value),
            r.scheme.name().to_string(),
            match r.csit_mode {
                CsitMode::Csit => "csit".to_string(),
                CsitMode::Nocsit => "nocsit".to_string(),
            },
            sci(r.c_pu_lower),
            sci(r.c_pu_direct),
            sci(r.delta_c_pu),
            sci(r.c_su_lower),
            sci(r.p_out),
            sci(r.stderr_c_pu_lower),
            sci(r.stderr_delta_c_pu),
            sci(r.stderr_c_su_lower),
            r.n_trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(File::create(path)?, rows)
}

/// Parses a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    let bad = |what: &str| Error::Config(format!("malformed CSV field {what}"));
    for rec in reader.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> { rec[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i])) };
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let scheme: Scheme = serde_json::from_str(&format!("\"{}\"", &rec[4]))?;
        let csit_mode: CsitMode = serde_json::from_str(&format!("\"{}\"", &rec[5]))?;
        rows.push(SweepRow {
            series_var: opt(&rec[0]),
            series_value: if rec[1].is_empty() { None } else { Some(f(1)?) },
            sweep_var: rec[2].to_string(),
            sweep_value: f(3)?,
            scheme,
            csit_mode,
            c_pu_lower: f(6)?,
            c_pu_direct: f(7)?,
            delta_c_pu: f(8)?,
            c_su_lower: f(9)?,
            p_out: f(10)?,
            stderr_c_pu_lower: f(11)?,
            stderr_delta_c_pu: f(12)?,
            stderr_c_su_lower: f(13)?,
            n_trials: rec[14].parse().map_err(|_| bad("n_trials"))?,
            seed: rec[15].parse().map_err(|_| bad("seed"))?,
        });
    }
    Ok(rows)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, manifest)?;
    writeln!(f)?;
    Ok(())
}

/// `<csv stem>.manifest.json` next to the CSV.
pub fn manifest_path(csv_path: &Path) -> std::path::PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    csv_path.with_file_name(format!("{stem}.manifest.json"))
}
