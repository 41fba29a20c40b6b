use proptest::collection::vec;
use proptest::prelude::*;

use affect_core::affect::{contentment_component, moving_average, AffectParams};
use affect_core::curve::{
    bin_state, fit_affective_curve, from_sam_scale, to_sam_scale, AffectiveState, CurveConfig,
    SamScalePair, StateThresholds,
};
use affect_core::eeg::{
    bicoherence, butter_highpass, clean_mask, filtfilt, welch_psd, BicoherenceNorm,
};
use affect_core::eval::{pearson, rmse, spearman};
use affect_core::flow::{artifact_gate, motion_activity, motion_component, FlowField};
use affect_core::ingest::AccelSeries;
use affect_core::motivation::{
    decompose, motivation_component, reconstruct, Decomposition, MotivationConfig,
};
use affect_core::saliency::{attentive_region, binarize, BinaryMask, SaliencyMap};

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn distinct_series(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    vec(-100.0..100.0f64, n).prop_filter("needs spread", |x| {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo > 1e-3
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompose_reconstruct_roundtrip(c in prop::array::uniform4(-10.0..10.0f64)) {
        let chi = [[c[0], c[1]], [c[2], c[3]]];
        let back = reconstruct(decompose(chi));
        for r in 0..2 {
            for k in 0..2 {
                prop_assert!((back[r][k] - chi[r][k]).abs() <= 1e-12 * chi[r][k].abs().max(1.0));
            }
        }
        let d = decompose(chi);
        let again = decompose(reconstruct(d));
        prop_assert!((again.d1 - d.d1).abs() < 1e-12 && (again.h2 - d.h2).abs() < 1e-12);
    }

    #[test]
    fn negated_flow_negates_motivation(
        (cols, rows, vs) in (4usize..9, 4usize..8).prop_flat_map(|(c, r)| {
            (Just(c), Just(r), vec(prop::array::uniform2(-6.0..6.0f64), c * r))
        })
    ) {
        let f = FlowField::new(cols, rows, 16, vs).unwrap();
        let neg = f.map(|v| [-v[0], -v[1]]);
        let region = attentive_region(&BinaryMask::from_fn(cols * 16, rows * 16, |_, _| true));
        let cfg = MotivationConfig::default();
        let a = motivation_component(&f, &region, &cfg).unwrap();
        let b = motivation_component(&neg, &region, &cfg).unwrap();
        prop_assert!((a.log_o + b.log_o).abs() <= 1e-9 * a.log_o.abs().max(1.0));
        // Each window contributes at most the clamp.
        prop_assert!(a.log_o.abs() <= 10.0 * a.windows.len() as f64 + 1e-9);
    }

    #[test]
    fn activity_and_gating_stay_in_range(
        vs in vec(prop::array::uniform2(-40.0..40.0f64), 1..60),
        vmax in 0.5..30.0f64,
        g in unit(),
    ) {
        let n = vs.len();
        let f = FlowField::new(n, 1, 8, vs).unwrap();
        let m_bar = motion_activity(&f, vmax).unwrap();
        prop_assert!((0.0..=1.0).contains(&m_bar));
        let m = motion_component(m_bar, g).unwrap();
        prop_assert!(m >= 0.0 && m <= m_bar);
    }

    #[test]
    fn accelerometer_gate_is_normalized(mags in vec(-20.0..20.0f64, 4..200), sigma in 0.05..2.0f64) {
        let ts: Vec<f64> = (0..mags.len()).map(|i| i as f64 * 0.02).collect();
        let samples = mags.iter().map(|&m| [m, 0.0, 9.81]).collect();
        let g = artifact_gate(&AccelSeries::new(ts, samples).unwrap(), sigma).unwrap();
        prop_assert_eq!(g.len(), mags.len());
        prop_assert!(g.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn binarize_is_idempotent(
        (w, h, vals) in (2usize..24, 2usize..24).prop_flat_map(|(w, h)| {
            (Just(w), Just(h), vec(unit(), w * h))
        }),
        t in 0.01..0.99f64,
    ) {
        let map = SaliencyMap::new(w, h, vals).unwrap();
        let once = binarize(&map, t).unwrap();
        let twice = binarize(&once.to_map(), t).unwrap();
        prop_assert_eq!(&once, &twice);

        let region = attentive_region(&once);
        if !region.fallback {
            for y in 0..h {
                for x in 0..w {
                    if region.mask.get(x, y) {
                        prop_assert!(once.get(x, y));
                        prop_assert!(region.bbox.contains(x as f64, y as f64));
                    }
                }
            }
        }
    }

    #[test]
    fn contentment_is_increasing(a in 0.0..1e4f64, b in 0.0..1e4f64, l1 in 0.01..5.0f64) {
        let p = AffectParams { lambda1: l1, ..AffectParams::default() };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(contentment_component(lo, &p) < contentment_component(hi, &p));
    }

    #[test]
    fn moving_average_bounds(xs in vec(-5.0..5.0f64, 1..300), len in 1usize..80) {
        let out = moving_average(&xs, len);
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(out.len(), xs.len());
        prop_assert!(out.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12));
        let w = len.min(xs.len()) as f64;
        for pair in out.windows(2) {
            prop_assert!((pair[1] - pair[0]).abs() <= (hi - lo) / w + 1e-12);
        }
    }

    #[test]
    fn sam_scale_is_a_bijection(v in -1.0..=1.0f64, a in unit()) {
        let pair = to_sam_scale(v, a).unwrap();
        prop_assert!((0.0..=6.0).contains(&pair.v6) && (0.0..=6.0).contains(&pair.a6));
        let (v2, a2) = from_sam_scale(pair);
        prop_assert!((v2 - v).abs() < 1e-12 && (a2 - a).abs() < 1e-12);
    }

    #[test]
    fn states_partition_the_plane(v6 in 0.0..=6.0f64, a6 in 0.0..=6.0f64) {
        let th = StateThresholds::default();
        let lvl = |x: f64, t: [f64; 2]| (x >= t[0]) as usize + (x >= t[1]) as usize;
        let want = AffectiveState::ALL[3 * lvl(a6, th.arousal) + lvl(v6, th.valence)];
        prop_assert_eq!(bin_state(SamScalePair { v6, a6 }, &th), want);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(x in distinct_series(3..40), y in distinct_series(3..40)) {
        let n = x.len().min(y.len());
        let (x, y) = (&x[..n], &y[..n]);
        prop_assume!(n >= 3);
        if let Ok(r) = spearman(x, y) {
            let tx: Vec<f64> = x.iter().map(|v| (v / 50.0).exp() + v.powi(3)).collect();
            let r2 = spearman(&tx, y).unwrap();
            prop_assert!((r - r2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        x in distinct_series(3..40),
        y in distinct_series(3..40),
        a in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64],
        b in -100.0..100.0f64,
    ) {
        let n = x.len().min(y.len());
        prop_assume!(n >= 3);
        let (x, y) = (&x[..n], &y[..n]);
        if let Ok(r) = pearson(x, y) {
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = pearson(&ax, y).unwrap();
            prop_assert!((r2 - a.signum() * r).abs() < 1e-9);
        }
    }

    #[test]
    fn rmse_is_symmetric_and_nonnegative(
        pairs in vec((-6.0..6.0f64, -6.0..6.0f64), 1..50)
    ) {
        let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let e = rmse(&p, &t).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, rmse(&t, &p).unwrap());
        let max = p.iter().zip(&t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(e <= max + 1e-12);
    }

    #[test]
    fn clean_set_grows_with_theta(g in vec(unit(), 1..100), t1 in unit(), t2 in unit()) {
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = clean_mask(&g, lo);
        let b = clean_mask(&g, hi);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| !*x || *y));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gp_gradient_and_variance(
        pts in vec((-1.0..1.0f64, 0.0..1.0f64), 3..40),
        noise in prop_oneof![Just(1e-2), Just(1e-4), Just(1e-1)],
    ) {
        let cfg = CurveConfig { noise_variance: noise, ..CurveConfig::default() };
        let c = fit_affective_curve(&pts, &cfg).unwrap();
        prop_assume!(!c.is_degenerate());
        let h = 1e-4 * c.length_scale().unwrap();
        for i in 0..=40 {
            let v = -1.2 + 2.4 * i as f64 / 40.0;
            prop_assert!(c.variance(v) >= 0.0);
            let fd = (c.mean(v + h) - c.mean(v - h)) / (2.0 * h);
            let an = c.mean_gradient(v);
            prop_assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3), "v={} fd={} an={}", v, fd, an);
        }
    }

    #[test]
    fn bicoherence_is_scale_invariant_and_bounded(
        seed in vec(-1.0..1.0f64, 8 * 64),
        scale in prop_oneof![1e-3..1e-1f64, 1.0..1e3f64],
    ) {
        let segs: Vec<&[f64]> = seed.chunks(64).collect();
        let scaled_data: Vec<f64> = seed.iter().map(|x| x * scale).collect();
        let scaled: Vec<&[f64]> = scaled_data.chunks(64).collect();
        for norm in [BicoherenceNorm::CauchySchwarz] {
            let a = bicoherence(&segs, 64.0, norm).unwrap();
            let b = bicoherence(&scaled, 64.0, norm).unwrap();
            for ((ka, va), (kb, vb)) in a.defined_cells().zip(b.defined_cells()) {
                prop_assert_eq!(ka, kb);
                prop_assert!((va - vb).abs() < 1e-9);
                prop_assert!((0.0..=1.0 + 1e-9).contains(&va));
            }
        }
    }

    #[test]
    fn psd_scales_quadratically(seed in vec(-1.0..1.0f64, 4 * 128), scale in 0.1..10.0f64) {
        let segs: Vec<&[f64]> = seed.chunks(128).collect();
        let scaled_data: Vec<f64> = seed.iter().map(|x| x * scale).collect();
        let scaled: Vec<&[f64]> = scaled_data.chunks(128).collect();
        let a = welch_psd(&segs, 128.0).unwrap();
        let b = welch_psd(&scaled, 128.0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(*x >= 0.0);
            prop_assert!((y - scale * scale * x).abs() <= 1e-9 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn zero_phase_filter_is_linear(
        x in vec(-50.0..50.0f64, 40..400),
        y in vec(-50.0..50.0f64, 40..400),
        a in -3.0..3.0f64,
    ) {
        let n = x.len().min(y.len());
        let sos = butter_highpass(4, 2.0, 250.0).unwrap();
        let mix: Vec<f64> = (0..n).map(|i| a * x[i] + y[i]).collect();
        let fm = filtfilt(&sos, &mix);
        let fx = filtfilt(&sos, &x[..n]);
        let fy = filtfilt(&sos, &y[..n]);
        for i in 0..n {
            prop_assert!((fm[i] - (a * fx[i] + fy[i])).abs() < 1e-8);
        }
    }
}

#[test]
fn decomposition_zero_is_zero() {
    assert_eq!(
        decompose([[0.0; 2]; 2]),
        Decomposition {
            d1: 0.0,
            d2: 0.0,
            h1: 0.0,
            h2: 0.0
        }
    );
}
