use convshare::channel::{
    block_convolve, complex_gaussian, draw_channels, frequency_response, stx_on_ray, toeplitz_pair, Link, LinkSpec, LinkSpecs,
    NetworkScenario,
};
use convshare::linalg::{max_abs_diff, CMat, CVec};
use convshare::mc::{stream_rng, MonteCarlo};
use convshare::Complex64;

fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
}

#[test]
fn single_tap_is_flat() {
    let h = frequency_response(&[Complex64::new(0.3, -0.7)], 0, 16);
    assert!(h.iter().all(|z| (z - h[0]).norm() <= 1e-15));
}

#[test]
fn pure_delay_has_unit_magnitude() {
    let m = 16;
    let h = frequency_response(&[Complex64::from(1.0)], 2, m);
    for (k, z) in h.iter().enumerate() {
        let want = Complex64::from_polar(1.0, -4.0 * std::f64::consts::PI * k as f64 / m as f64);
        assert!((z - want).norm() <= 1e-12);
        assert!((z.norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn identity_and_shift_toeplitz() {
    let (h0, h1) = toeplitz_pair(&[Complex64::from(1.0)], 0, 8).unwrap();
    assert_eq!(h0, CMat::identity(8, 8));
    assert!(h1.iter().all(|z| z.norm() == 0.0));

    let (h0, h1) = toeplitz_pair(&[Complex64::default(), Complex64::from(1.0)], 0, 8).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let want = if i == j + 1 { 1.0 } else { 0.0 };
            assert_eq!(h0[(i, j)], Complex64::from(want));
            let corner = if (i, j) == (0, 7) { 1.0 } else { 0.0 };
            assert_eq!(h1[(i, j)], Complex64::from(corner));
        }
    }
}

#[test]
fn block_output_matches_scalar_convolution() {
    let (p, offset) = (16, 2);
    let taps = random_vec(4, 1);
    let prev = random_vec(p, 2);
    let cur = random_vec(p, 3);
    let stream: Vec<Complex64> = prev.iter().chain(&cur).copied().collect();
    let brute: Vec<Complex64> = (p..2 * p)
        .map(|n| taps.iter().enumerate().map(|(l, h)| h * stream[n - l - offset]).sum())
        .collect();
    let got = block_convolve(&taps, offset, &cur, &prev);
    assert!(got.iter().zip(&brute).all(|(a, b)| (a - b).norm() <= 1e-12));
    let (h0, h1) = toeplitz_pair(&taps, offset, p).unwrap();
    let via = &h0 * CVec::from_vec(cur) + &h1 * CVec::from_vec(prev);
    assert!(via.iter().zip(&brute).all(|(a, b)| (a - b).norm() <= 1e-12));
}

#[test]
fn response_is_dft_of_circulant_embedding() {
    let m = 16;
    let taps = random_vec(3, 4);
    let offset = 2;
    let mut impulse = vec![Complex64::default(); m];
    for (l, t) in taps.iter().enumerate() {
        impulse[l + offset] = *t;
    }
    let (ctx, _) = convshare::spectral::LayoutSpec { m, l_su: 2, vc_indices: vec![] }.build().unwrap();
    let dft = ctx.dft(&impulse).map(|z| z * (m as f64).sqrt());
    let h = frequency_response(&taps, offset, m);
    assert!(max_abs_diff(&CMat::from_column_slice(m, 1, &h), &CMat::from_column_slice(m, 1, dft.as_slice())) <= 1e-10);
}

#[test]
fn stored_response_matches_taps() {
    let s = NetworkScenario::reference(0.3, 0.01);
    let ch = draw_channels(&s, &LinkSpecs::default(), 64, &mut stream_rng(5, 0));
    for link in Link::ALL {
        let lc = ch.get(link);
        let h = frequency_response(&lc.taps, lc.offset, 64);
        assert!(h.iter().zip(&lc.freq).all(|(a, b)| (a - b).norm() <= 1e-12));
    }
}

#[test]
fn unit_distance_gives_unit_variance() {
    // d = 1 on the PTx→PRx link, so σ² = 1.
    let s = NetworkScenario::reference(0.3, 0.01);
    assert!((s.variance(Link::PtxPrx) - 1.0).abs() <= 1e-12);
    let specs = LinkSpecs::default();
    let est = MonteCarlo::new(100_000, 6).run(|rng| [draw_channels(&s, &specs, 64, rng).h(Link::PtxPrx, 0).norm_sqr()])[0];
    assert!(est.agrees_with(1.0, 3.0, 0.0), "{est:?}");
}

#[test]
fn links_are_uncorrelated() {
    let s = NetworkScenario::reference(0.3, 0.01);
    let specs = LinkSpecs::default();
    let [re, im] = MonteCarlo::new(100_000, 7).run(|rng| {
        let ch = draw_channels(&s, &specs, 64, rng);
        let x = ch.h(Link::PtxStx, 3) * ch.h(Link::StxPrx, 3).conj();
        [x.re, x.im]
    });
    assert!(re.agrees_with(0.0, 3.0, 0.0) && im.agrees_with(0.0, 3.0, 0.0), "{re:?} {im:?}");
}

#[test]
fn stx_ray_geometry() {
    for d in [0.1, 0.3, 0.7] {
        let s = NetworkScenario::reference(d, 0.01);
        assert!((s.distance(Link::PtxStx) - d).abs() <= 1e-12);
        assert_eq!(s.stx, stx_on_ray(d));
    }
}

#[test]
fn default_specs() {
    let s = LinkSpecs::default();
    assert_eq!(s.get(Link::PtxStx), LinkSpec::new(1, 1));
    assert_eq!(s.get(Link::PtxPrx), LinkSpec::new(3, 3));
    assert_eq!(s.get(Link::PtxSrx), LinkSpec::new(3, 3));
    assert_eq!(s.get(Link::StxPrx), LinkSpec::new(2, 2));
    assert_eq!(s.get(Link::StxSrx), LinkSpec::new(2, 2));
}
