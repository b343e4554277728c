use std::io::Cursor;

use convshare::channel::{complex_gaussian, draw_channels, toeplitz_pair, Link, LinkSpecs, NetworkScenario};
use convshare::linalg::CVec;
use convshare::mc::{stream_rng, McRng};
use convshare::precoder::{realize_precoders, uniform_profile, PrecoderSet};
use convshare::spectral::{LayoutSpec, SpectralContext, VcLayout};
use convshare::transceiver::{
    causal_filter, h_su_diagonal, pu_transmit, simulate_frame, stx_process, trace_file, BlockHistory, FrameConfig, FrameInputs,
    FrameSetup, LinkSimulator, NoiseMode,
};
use convshare::validation::{check_frequency_equivalence, check_noise_identity, CheckStatus};
use convshare::Complex64;

struct Fixture {
    ctx: SpectralContext,
    layout: VcLayout,
    cfg: FrameConfig,
    pre: PrecoderSet,
    scenario: NetworkScenario,
}

fn fixture() -> Fixture {
    let (ctx, layout) = LayoutSpec::default().build().unwrap();
    let cfg = FrameConfig::with_minimal_cp(64, 10, LinkSpecs::default()).unwrap();
    let scenario = NetworkScenario::reference(0.3, 0.01);
    let pre = realize_precoders(&ctx, &layout, &uniform_profile(&layout, &scenario, 0.125).unwrap()).unwrap();
    Fixture { ctx, layout, cfg, pre, scenario }
}

fn gaussians(rng: &mut McRng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| complex_gaussian(rng, 1.0)).collect()
}

#[test]
fn silent_secondary_leaves_the_direct_link() {
    let f = fixture();
    let setup = FrameSetup { cfg: &f.cfg, ctx: &f.ctx, layout: &f.layout, precoders: &f.pre };
    let mut rng = stream_rng(1, 0);
    let ch = draw_channels(&f.scenario, &f.cfg.specs, 64, &mut rng);
    let x = gaussians(&mut rng, 60);
    let inputs = FrameInputs::noiseless(x.clone(), vec![Complex64::default(); 7], vec![Complex64::default(); 4], f.cfg.p());
    let t = simulate_frame(&setup, &BlockHistory::silent(&f.cfg), &ch, &inputs).unwrap();
    let placed = f.layout.place_uc(&x).unwrap();
    for m in 0..64 {
        let want = ch.h(Link::PtxPrx, m) * placed[m];
        assert!((t.y_pu_f[m] - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
}

#[test]
fn direct_convolution_matches_toeplitz_filter() {
    let mut rng = stream_rng(2, 0);
    let taps = gaussians(&mut rng, 5);
    let y = gaussians(&mut rng, 24);
    let (h0, _) = toeplitz_pair(&taps, 0, 24).unwrap();
    let want = &h0 * CVec::from_vec(y.clone());
    let got = causal_filter(&taps, &y);
    assert!(got.iter().zip(want.iter()).all(|(a, b)| (a - b).norm() <= 1e-12));
}

#[test]
fn filter_is_causal() {
    let mut rng = stream_rng(3, 0);
    let taps = gaussians(&mut rng, 11);
    let y = gaussians(&mut rng, 80);
    let full = causal_filter(&taps, &y);
    let mut cut = y.clone();
    cut[40..].iter_mut().for_each(|z| *z = Complex64::default());
    let partial = causal_filter(&taps, &cut);
    assert_eq!(&full[..40], &partial[..40]);
}

#[test]
fn forced_identity_filter_passes_through() {
    // With the full-length filter and no VCs, a flat unit response is a
    // single unit tap.
    let (ctx, layout) = LayoutSpec { m: 16, l_su: 15, vc_indices: vec![] }.build().unwrap();
    let cfg = FrameConfig::unchecked(16, 4, 15, LinkSpecs::default());
    let taps = ctx.min_norm_filter(&vec![Complex64::from(1.0); 16]).unwrap();
    assert!((taps[0] - Complex64::from(1.0)).norm() <= 1e-12);
    assert!(taps[1..].iter().all(|t| t.norm() <= 1e-12));
    let s = NetworkScenario::reference(0.3, 0.01);
    let pre = realize_precoders(&ctx, &layout, &uniform_profile(&layout, &s, 0.0).unwrap()).unwrap();
    let mut rng = stream_rng(4, 0);
    let y2 = gaussians(&mut rng, cfg.p());
    let out = stx_process(&y2, &vec![Complex64::default(); 16], &[], &pre, &ctx, &cfg).unwrap();
    assert!(out.z2.iter().all(|z| z.norm() == 0.0));
    assert_eq!(causal_filter(&taps, &y2).len(), y2.len());
}

#[test]
fn previous_block_does_not_leak() {
    let f = fixture();
    let setup = FrameSetup { cfg: &f.cfg, ctx: &f.ctx, layout: &f.layout, precoders: &f.pre };
    let mut rng = stream_rng(5, 0);
    let ch = draw_channels(&f.scenario, &f.cfg.specs, 64, &mut rng);
    let inputs = FrameInputs::noiseless(gaussians(&mut rng, 60), gaussians(&mut rng, 7), gaussians(&mut rng, 4), f.cfg.p());
    let quiet = simulate_frame(&setup, &BlockHistory::silent(&f.cfg), &ch, &inputs).unwrap();
    let noisy_history = BlockHistory {
        u_pu: gaussians(&mut rng, f.cfg.p()),
        z2: gaussians(&mut rng, f.cfg.p()),
        channels: draw_channels(&f.scenario, &f.cfg.specs, 64, &mut rng),
    };
    let loud = simulate_frame(&setup, &noisy_history, &ch, &inputs).unwrap();
    let scale = quiet.y_pu_f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (a, b) in quiet.y_pu_f.iter().zip(&loud.y_pu_f).chain(quiet.y_su_f.iter().zip(&loud.y_su_f)) {
        assert!((a - b).norm() <= 1e-10 * scale);
    }
    // The time-domain blocks do differ inside the prefix.
    assert!(quiet.y3[..16].iter().zip(&loud.y3[..16]).any(|(a, b)| (a - b).norm() > 1e-6));
}

#[test]
fn short_prefix_breaks_equivalence() {
    let ok = check_frequency_equivalence(50, 6, None);
    assert!(ok.iter().all(|o| o.status == CheckStatus::Pass), "{ok:?}");
    let bad = check_frequency_equivalence(50, 6, Some(15));
    assert!(bad.iter().all(|o| o.status == CheckStatus::Fail), "{bad:?}");
    let noise = check_noise_identity(50, 6, None);
    assert!(noise.iter().all(|o| o.status == CheckStatus::Pass), "{noise:?}");
}

#[test]
fn short_prefix_rejected_by_config() {
    let err = FrameConfig::new(64, 15, 10, LinkSpecs::default()).unwrap_err().to_string();
    assert!(err.contains("L_cp"), "{err}");
}

#[test]
fn vc_subcarriers_see_relayed_noise_only() {
    let f = fixture();
    let mut rng = stream_rng(7, 0);
    let ch = draw_channels(&f.scenario, &f.cfg.specs, 64, &mut rng);
    let x = gaussians(&mut rng, 60);
    let v2 = gaussians(&mut rng, 64);
    let h = h_su_diagonal(&ch, &f.layout, &x, &v2).unwrap();
    for &m in f.layout.vc_indices() {
        assert!((h[m] - ch.h(Link::StxSrx, m) * v2[m]).norm() <= 1e-14);
    }
    let h0 = h_su_diagonal(&ch, &f.layout, &x, &[Complex64::default(); 64]).unwrap();
    let placed = f.layout.place_uc(&x).unwrap();
    for &m in f.layout.uc_indices() {
        let want = ch.h(Link::StxSrx, m) * (ch.h(Link::PtxStx, m) * placed[m]);
        assert!((h0[m] - want).norm() <= 1e-14 * (1.0 + want.norm()));
    }
}

#[test]
fn transmit_of_delta_spectrum() {
    let (ctx, layout) = LayoutSpec { m: 16, l_su: 2, vc_indices: vec![] }.build().unwrap();
    let cfg = FrameConfig::unchecked(16, 6, 2, LinkSpecs::default());
    let mut delta = vec![Complex64::default(); 16];
    delta[3] = Complex64::from(1.0);
    let x: Vec<Complex64> = ctx.dft(&delta).iter().copied().collect();
    let u = pu_transmit(&x, &ctx, &layout, &cfg).unwrap();
    for (i, z) in u[6..].iter().enumerate() {
        let want = if i == 3 { 1.0 } else { 0.0 };
        assert!((z - Complex64::from(want)).norm() <= 1e-12);
    }
    assert_eq!(&u[..6], &u[16..]);
}

#[test]
fn simulator_replays_under_fixed_seed() {
    let f = fixture();
    let run = || {
        let setup = FrameSetup { cfg: &f.cfg, ctx: &f.ctx, layout: &f.layout, precoders: &f.pre };
        let mut sim = LinkSimulator::new(setup, &f.scenario, NoiseMode::White);
        let mut rng = stream_rng(8, 0);
        (0..3).map(|_| sim.step(&mut rng).unwrap().1).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn trace_file_round_trip() {
    let f = fixture();
    let setup = FrameSetup { cfg: &f.cfg, ctx: &f.ctx, layout: &f.layout, precoders: &f.pre };
    let mut sim = LinkSimulator::new(setup, &f.scenario, NoiseMode::CpStructured);
    let mut rng = stream_rng(9, 0);
    let traces: Vec<_> = (0..2).map(|_| sim.step(&mut rng).unwrap().1).collect();

    let header = trace_file::Header { m: 64, l_cp: 16, l_su: 10, seed: 9 };
    let mut buf = Vec::new();
    trace_file::write_header(&mut buf, &header).unwrap();
    for (i, t) in traces.iter().enumerate() {
        trace_file::write_record(&mut buf, i as u64, t).unwrap();
    }
    let mut r = Cursor::new(buf);
    assert_eq!(trace_file::read_header(&mut r).unwrap(), header);
    for (i, t) in traces.iter().enumerate() {
        let (frame, blocks) = trace_file::read_record(&mut r).unwrap().unwrap();
        assert_eq!(frame, i as u64);
        assert_eq!(blocks.len(), trace_file::BLOCKS);
        assert_eq!(blocks[0], t.x_pu);
        assert_eq!(blocks[6], t.z2);
        assert_eq!(blocks[12], t.y_su_f);
    }
    assert!(trace_file::read_record(&mut r).unwrap().is_none());
    assert!(trace_file::read_header(&mut Cursor::new(b"XXXX".to_vec())).is_err());
}
