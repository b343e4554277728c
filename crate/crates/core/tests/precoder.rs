use convshare::channel::{complex_gaussian, NetworkScenario};
use convshare::linalg::{max_abs, max_abs_diff, numerical_rank, CMat, RANK_TOL};
use convshare::mc::stream_rng;
use convshare::precoder::{csit_objective, realize_precoders, relay_input_power, uniform_profile, waterfilling_profile, PowerProfile};
use convshare::spectral::LayoutSpec;
use convshare::{Complex64, Error};

fn scenario() -> NetworkScenario {
    NetworkScenario::reference(0.3, 0.01)
}

fn budget_used(p: &PowerProfile, s: &NetworkScenario) -> f64 {
    relay_input_power(s) * p.a.iter().sum::<f64>() + p.g.iter().sum::<f64>()
}

#[test]
fn uniform_profile_examples() {
    let s = scenario();
    let (_, layout) = LayoutSpec::default().build().unwrap();
    let all_vc = uniform_profile(&layout, &s, s.p_su / 4.0).unwrap();
    assert!(all_vc.a.iter().all(|&a| a == 0.0));
    let half = uniform_profile(&layout, &s, s.p_su / 8.0).unwrap();
    assert!((budget_used(&half, &s) - 1.0).abs() <= 1e-12);
    assert!(uniform_profile(&layout, &s, s.p_su / 3.0).is_err());

    let (_, plain) = LayoutSpec { m: 16, l_su: 4, vc_indices: vec![] }.build().unwrap();
    let p = uniform_profile(&plain, &s, 0.0).unwrap();
    let want = s.p_su / (16.0 * relay_input_power(&s));
    assert!(p.a.iter().all(|&a| (a - want).abs() <= 1e-15 * want));
}

#[test]
fn single_used_carrier_takes_everything() {
    let s = scenario();
    let (_, layout) = LayoutSpec { m: 2, l_su: 1, vc_indices: vec![1] }.build().unwrap();
    for h in [0.01, 1.0, 40.0] {
        let h_su = [Complex64::new(h, 0.0), Complex64::default()];
        let sol = waterfilling_profile(&layout, &s, &h_su, &[Complex64::from(1.0); 2], false).unwrap();
        let want = s.p_su / relay_input_power(&s);
        assert!((sol.profile.a[0] - want).abs() <= 1e-9 * want);
        assert_eq!(sol.profile.g[1], 0.0);
    }
}

#[test]
fn equal_gains_split_equally() {
    let s = scenario();
    let (_, layout) = LayoutSpec { m: 2, l_su: 1, vc_indices: vec![] }.build().unwrap();
    let h = [Complex64::new(0.6, 0.8); 2];
    let p = waterfilling_profile(&layout, &s, &h, &h, false).unwrap().profile;
    assert!((p.a[0] - p.a[1]).abs() <= 1e-12 * p.a[0]);
}

#[test]
fn waterfilling_meets_budget_and_kkt() {
    let s = scenario();
    let (_, layout) = LayoutSpec { m: 8, l_su: 3, vc_indices: vec![0, 4] }.build().unwrap();
    let mut rng = stream_rng(3, 0);
    for _ in 0..50 {
        let h_su: Vec<Complex64> = (0..8).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let h_24: Vec<Complex64> = (0..8).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let sol = waterfilling_profile(&layout, &s, &h_su, &h_24, true).unwrap();
        assert!((budget_used(&sol.profile, &s) - s.p_su).abs() <= 1e-9 * s.p_su);
        let uni = uniform_profile(&layout, &s, s.p_su / 4.0).unwrap();
        assert!(
            csit_objective(&layout, &s, &h_su, &h_24, &sol.profile) >= csit_objective(&layout, &s, &h_su, &h_24, &uni) - 1e-12
        );
    }
}

#[test]
fn waterfilling_ignores_labels() {
    let s = scenario();
    let (_, layout) = LayoutSpec { m: 8, l_su: 3, vc_indices: vec![] }.build().unwrap();
    let mut rng = stream_rng(4, 0);
    let h: Vec<Complex64> = (0..8).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let perm = [3, 7, 0, 5, 1, 6, 2, 4];
    let hp: Vec<Complex64> = perm.iter().map(|&i| h[i]).collect();
    let base = waterfilling_profile(&layout, &s, &h, &h, false).unwrap().profile;
    let shuffled = waterfilling_profile(&layout, &s, &hp, &hp, false).unwrap().profile;
    for (k, &i) in perm.iter().enumerate() {
        assert!((shuffled.a[k] - base.a[i]).abs() <= 1e-9 * base.a[i].max(1e-12));
    }
}

#[test]
fn uniform_precoders_on_default_layout() {
    let s = scenario();
    let (ctx, layout) = LayoutSpec::default().build().unwrap();
    let pre = realize_precoders(&ctx, &layout, &uniform_profile(&layout, &s, s.p_su / 8.0).unwrap()).unwrap();
    assert_eq!(pre.a.shape(), (64, 7));
    assert_eq!(numerical_rank(&pre.c, RANK_TOL), 7);
    assert_eq!(numerical_rank(&pre.a, RANK_TOL), 7);
    let norms: Vec<f64> = (0..64).map(|i| pre.a.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
    for &i in layout.vc_indices() {
        assert!(norms[i] <= 1e-20);
        assert!((pre.g.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>() - s.p_su / 8.0).abs() <= 1e-12);
    }
    let uc = layout.uc_indices();
    for &i in uc {
        assert!(pre.g.row(i).iter().all(|z| z.norm() == 0.0));
    }
    // A rank-7 A cannot give 60 equal row norms; the total is kept on
    // budget and the spread is flagged.
    let total: f64 = uc.iter().map(|&i| norms[i]).sum();
    let requested: f64 = pre.requested.a.iter().sum();
    assert!((total - requested).abs() <= 1e-9 * requested);
    assert!(pre.mismatch_flagged());
    for &i in uc {
        assert!((pre.profile.a[i] - norms[i]).abs() <= 1e-12 * requested);
    }
}

#[test]
fn isotropic_profile_gives_scaled_identity() {
    let (ctx, layout) = LayoutSpec { m: 16, l_su: 5, vc_indices: vec![] }.build().unwrap();
    let mut p = PowerProfile::zeros(16);
    p.a.iter_mut().for_each(|a| *a = 0.25);
    let pre = realize_precoders(&ctx, &layout, &p).unwrap();
    // Proportional to the identity, scaled so every realised row is 0.25.
    let k = pre.c[(0, 0)];
    assert!(k.re > 0.0 && k.im.abs() <= 1e-12);
    assert!(max_abs_diff(&pre.c, &(CMat::identity(6, 6) * k)) <= 1e-12);
    for i in 0..16 {
        let row: f64 = pre.a.row(i).iter().map(|z| z.norm_sqr()).sum();
        assert!((row - 0.25).abs() <= 1e-12);
    }
    assert!(!pre.mismatch_flagged());
    assert!(max_abs(&pre.d) == 0.0);
}

#[test]
fn zero_profile_is_rank_deficient() {
    let (ctx, layout) = LayoutSpec::default().build().unwrap();
    let err = realize_precoders(&ctx, &layout, &PowerProfile::zeros(64)).unwrap_err();
    assert!(matches!(err, Error::RankDeficient(_)), "{err}");
}
