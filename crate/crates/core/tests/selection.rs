use mqf_core::selection::{
    overfit_sigmas, select_er, select_ic, select_rm, vec_select_rm, IcSearch, SelectionMethod,
    DEFAULT_C0,
};
use mqf_core::simulate::{gen_panel, DgpConfig};
use std::collections::BTreeMap;

use mqf_core::{rate_l, FitConfig, MatrixPanel, QuantileLevel};

fn noiseless(seed: u64) -> MatrixPanel {
    let cfg = DgpConfig::new(15, 12, 12)
        .with_theta_star(0.0)
        .with_seed(seed);
    gen_panel(&cfg, QuantileLevel::median()).unwrap().0
}

fn config(seed: u64) -> FitConfig {
    FitConfig::new(1, 1).with_seed(seed)
}

#[test]
fn noiseless_overfit_sigmas_vanish() {
    let panel = noiseless(1);
    let (s1, s2, fit) = overfit_sigmas(&panel, QuantileLevel::median(), 6, 6, &config(1)).unwrap();
    assert_eq!((s1.len(), s2.len()), (6, 6));
    assert!(s1[2..].iter().all(|&s| s < 1e-6), "{s1:?}");
    assert!(s2[3..].iter().all(|&s| s < 1e-6), "{s2:?}");
    assert!(s1[1] > 0.1 && s2[2] > 0.1);
    assert_eq!(fit.sigma1, s1);
}

#[test]
fn eigenvalue_ratio_finds_the_noiseless_ranks() {
    let tau = QuantileLevel::median();
    for seed in 0..3 {
        let er = select_er(&noiseless(seed), tau, 6, 6, DEFAULT_C0, &config(seed)).unwrap();
        assert_eq!((er.k1_hat, er.k2_hat), (2, 3), "{er:?}");
        assert_eq!(er.threshold_used, DEFAULT_C0);
        assert_eq!(er.method, SelectionMethod::EigenvalueRatio);
    }
}

#[test]
fn rank_minimization_counts_above_its_threshold() {
    let panel = noiseless(0);
    let rm = select_rm(&panel, QuantileLevel::median(), 6, 6, &config(0)).unwrap();
    let l = rate_l(12, 12, 15).value();
    let delta = (rm.sigma1_full[0] + rm.sigma2_full[0]) / 2.0;
    let threshold = delta * l.powf(-2.0 / 3.0);
    assert!((rm.threshold_used - threshold).abs() < 1e-12);
    let count = |s: &[f64]| s.iter().filter(|&&v| v > threshold).count().max(1);
    assert_eq!(rm.k1_hat, count(&rm.sigma1_full));
    assert_eq!(rm.k2_hat, count(&rm.sigma2_full));
    assert!(rm.k1_hat <= 2 && rm.k2_hat <= 3);
}

fn argmin(
    surface: &BTreeMap<(usize, usize), f64>,
    cells: impl Iterator<Item = (usize, usize)>,
) -> (usize, usize) {
    let mut best = ((0, 0), f64::INFINITY);
    for cell in cells {
        if surface[&cell] < best.1 {
            best = (cell, surface[&cell]);
        }
    }
    best.0
}

#[test]
fn two_pass_ic_follows_its_surface() {
    let panel = noiseless(1);
    let ic = select_ic(
        &panel,
        QuantileLevel::median(),
        4,
        5,
        &config(1),
        IcSearch::TwoPass,
    )
    .unwrap();
    let l = rate_l(12, 12, 15).value();
    let delta = (ic.sigma1_full[0] + ic.sigma2_full[0]) / 2.0;
    assert!((ic.threshold_used - delta / l).abs() < 1e-12);
    let surface = ic.ic_surface.unwrap();
    assert_eq!(surface.len(), 4 + 5 - 1 + usize::from(ic.k1_hat == 4));
    let k1 = argmin(&surface, (1..=4).map(|l1| (l1, 5))).0;
    let k2 = argmin(&surface, (1..=5).map(|l2| (k1, l2)));
    assert_eq!((ic.k1_hat, ic.k2_hat), (k1, k2.1));
}

#[test]
fn vectorized_rule_sees_the_product_rank() {
    let panel = noiseless(2);
    let tau = QuantileLevel::median();
    let (s1, s2, _) = overfit_sigmas(&panel.vectorized(), tau, 8, 1, &config(2)).unwrap();
    assert_eq!(s2.len(), 1);
    assert!(s1[5] > 1e-3 && s1[6..].iter().all(|&s| s < 1e-6), "{s1:?}");
    let k = vec_select_rm(&panel, tau, 8, &config(2)).unwrap();
    let l = rate_l(144, 1, 15).value();
    let threshold = (s1[0] + s2[0]) / 2.0 * l.powf(-2.0 / 3.0);
    assert_eq!(k, s1.iter().filter(|&&s| s > threshold).count().max(1));
}

#[test]
fn full_grid_ic_covers_every_cell() {
    let panel = noiseless(3);
    let ic = select_ic(
        &panel,
        QuantileLevel::median(),
        3,
        4,
        &config(3),
        IcSearch::FullGrid,
    )
    .unwrap();
    let surface = ic.ic_surface.unwrap();
    assert_eq!(surface.len(), 12);
    let best = argmin(&surface, (1..=3).flat_map(|a| (1..=4).map(move |b| (a, b))));
    assert_eq!((ic.k1_hat, ic.k2_hat), best);
}

#[test]
fn eigenvalue_ratio_is_scale_invariant() {
    let panel = noiseless(4);
    let tau = QuantileLevel::median();
    let base = select_er(&panel, tau, 5, 5, DEFAULT_C0, &config(4)).unwrap();
    for c in [0.5, 2.0] {
        let scaled =
            select_er(&panel.scaled(c), tau, 5, 5, DEFAULT_C0 * c * c, &config(4)).unwrap();
        assert_eq!((scaled.k1_hat, scaled.k2_hat), (base.k1_hat, base.k2_hat));
        let raw = select_er(&panel.scaled(c), tau, 5, 5, DEFAULT_C0, &config(4)).unwrap();
        assert_eq!((raw.k1_hat, raw.k2_hat), (base.k1_hat, base.k2_hat));
    }
}

#[test]
fn invalid_requests() {
    let panel = noiseless(5);
    let tau = QuantileLevel::median();
    assert!(select_er(&panel, tau, 1, 4, DEFAULT_C0, &config(0)).is_err());
    assert!(select_er(&panel, tau, 4, 4, 0.0, &config(0)).is_err());
    assert!(vec_select_rm(&panel, tau, 0, &config(0)).is_err());
    assert_eq!(
        SelectionMethod::from_short_name("er"),
        Some(SelectionMethod::EigenvalueRatio)
    );
}
