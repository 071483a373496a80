use std::f64::consts::{PI, TAU};

use chowkit::flows::{
    apply_word, commutator_flow_residual, commutator_flow_residual_with, integrate_flow, CircleDiffeo, FlowStep,
    FlowWord, Integrator,
};
use chowkit::rational::{q, Q};
use chowkit::steering::diffeo_distance;
use chowkit::trig_fields::TrigPoly;
use num_traits::Signed;
use proptest::prelude::*;

fn coef() -> impl Strategy<Value = Q> {
    (-4i64..=4, 1i64..=4).prop_map(|(n, d)| q(n, d))
}

/// Random field rescaled so that `Σ n(|aₙ| + |bₙ|) ≤ 1`, a bound on `|v′|`.
///
/// Round trips through a sink amplify errors by up to `exp(|t|·sup|v′|)`, so
/// fixed absolute tolerances only make sense for fields of bounded slope.
fn field(max_mode: usize) -> impl Strategy<Value = TrigPoly> {
    (0..=max_mode).prop_flat_map(|n| {
        (coef(), prop::collection::vec(coef(), n), prop::collection::vec(coef(), n)).prop_map(|(c0, c, s)| {
            let slope: Q = c.iter().zip(&s).zip(1i64..).map(|((a, b), k)| (a.abs() + b.abs()) * q(k, 1)).sum();
            let p = TrigPoly::new(c0, c, s).unwrap();
            if slope > q(1, 1) {
                p.scale(&(q(1, 1) / slope))
            } else {
                p
            }
        })
    })
}

fn word(max_len: usize) -> impl Strategy<Value = FlowWord> {
    prop::collection::vec((field(3), -1.5f64..1.5), 0..=max_len)
        .prop_map(|steps| FlowWord::new(steps.into_iter().map(|(f, t)| FlowStep::new(f, t)).collect()))
}

fn sup(a: &CircleDiffeo, b: &CircleDiffeo) -> f64 {
    a.lift().iter().zip(b.lift()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn closed_form_sine_flow() {
    // tan(θ/2) = eᵗ tan(θ₀/2) for θ' = sin θ.
    let got = integrate_flow(&TrigPoly::sin_mode(1), 2f64.ln(), PI / 2.0).unwrap();
    assert!((got - 2.0 * 2f64.atan()).abs() < 1e-9);
    assert!((got - 2.214297).abs() < 1e-6);
    for (t, th) in [(0.3, 0.4), (-1.2, 2.5), (2.0, -1.0)] {
        let want = 2.0 * (f64::exp(t) * f64::tan(th / 2.0)).atan();
        assert!((integrate_flow(&TrigPoly::sin_mode(1), t, th).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn residual_error_halves() {
    let (x, y) = (TrigPoly::cos_mode(1), TrigPoly::sin_mode(2));
    let theta = PI / 3.0;
    let fine = Integrator::with_tolerance(1e-12);
    let b = x.bracket(&y).evaluate(theta);
    let e1 = (commutator_flow_residual_with(&x, &y, theta, 0.02, &fine).unwrap() - b).abs();
    let e2 = (commutator_flow_residual_with(&x, &y, theta, 0.01, &fine).unwrap() - b).abs();
    let ratio = e2 / e1;
    assert!((0.3..=0.7).contains(&ratio), "ratio {ratio}");
    let default = (commutator_flow_residual(&x, &y, theta, 0.01).unwrap() - b).abs();
    assert!((default - e2).abs() < 1e-5);
}

#[test]
fn first_order_tangency_slope() {
    let pairs = [
        (TrigPoly::cos_mode(1), TrigPoly::sin_mode(2)),
        (TrigPoly::sin_mode(1), TrigPoly::cos_mode(1)),
        (&TrigPoly::cos_mode(2) + &TrigPoly::sin_mode(1), TrigPoly::cos_mode(3)),
    ];
    let fine = Integrator::with_tolerance(1e-12);
    let ts: Vec<f64> = (0..8).map(|k| 0.1 / 2f64.powi(k) * if k == 7 { 1.28 } else { 1.0 }).collect();
    for (x, y) in &pairs {
        for theta in [0.3, 1.7, 4.0] {
            let b = x.bracket(y).evaluate(theta);
            let pts: Vec<(f64, f64)> = ts
                .iter()
                .map(|&t| (t.ln(), (commutator_flow_residual_with(x, y, theta, t, &fine).unwrap() - b).abs().ln()))
                .collect();
            let slope = fit_slope(&pts);
            assert!(slope >= 0.9, "slope {slope} at θ = {theta}");
            let c = pts.iter().map(|(lt, le)| (le - lt).exp()).fold(0.0, f64::max);
            assert!(c.is_finite());
        }
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn zero_field_is_identity_and_rotation_is_exact() {
    let phi = CircleDiffeo::rotation(32, 0.4);
    let w = FlowWord::new(vec![FlowStep::new(TrigPoly::zero(), 3.0)]);
    assert_eq!(apply_word(&w, &phi).unwrap(), phi);
    let r = FlowWord::new(vec![FlowStep::new(TrigPoly::constant(q(1, 1)), 0.3)]);
    let out = apply_word(&r, &CircleDiffeo::identity(32)).unwrap();
    assert!(sup(&out, &CircleDiffeo::rotation(32, 0.3)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_law(v in field(4), s in -2.0f64..2.0, t in -2.0f64..2.0, th in 0.0..TAU) {
        let once = integrate_flow(&v, s + t, th).unwrap();
        let twice = integrate_flow(&v, t, integrate_flow(&v, s, th).unwrap()).unwrap();
        prop_assert!((once - twice).abs() < 1e-8, "{} vs {}", once, twice);
    }

    #[test]
    fn words_stay_diffeomorphisms(w in word(8)) {
        let out = apply_word(&w, &CircleDiffeo::identity(64)).unwrap();
        prop_assert!(CircleDiffeo::from_lift(out.lift().to_vec()).is_ok());
        prop_assert!(out.lift().windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn concatenation(w1 in word(4), w2 in word(4)) {
        let phi = CircleDiffeo::identity(48);
        let split = apply_word(&w2, &apply_word(&w1, &phi).unwrap()).unwrap();
        let joined = apply_word(&w1.concat(&w2), &phi).unwrap();
        prop_assert!(sup(&split, &joined) <= 1e-9);
    }

    #[test]
    fn inverse_word(w in word(6)) {
        let phi = CircleDiffeo::rotation(48, 0.2);
        let there = apply_word(&w, &phi).unwrap();
        let back = apply_word(&w.inverse(), &there).unwrap();
        prop_assert!(diffeo_distance(&back, &phi).unwrap() < 1e-8);
    }

    #[test]
    fn word_json_round_trip(w in word(5)) {
        let spec = w.to_spec();
        let back = FlowWord::from_spec(&spec, None).unwrap();
        prop_assert_eq!(back, w);
    }
}

#[test]
fn diffeo_csv_and_json_round_trip() {
    let w = FlowWord::new(vec![
        FlowStep::labeled("sin1", TrigPoly::sin_mode(1), 0.7),
        FlowStep::labeled("cos2", TrigPoly::cos_mode(2), -0.4),
    ]);
    let phi = apply_word(&w, &CircleDiffeo::identity(40)).unwrap();
    assert_eq!(CircleDiffeo::from_csv(&phi.to_csv()).unwrap(), phi);
    let text = serde_json::to_string(&phi).unwrap();
    assert_eq!(serde_json::from_str::<CircleDiffeo>(&text).unwrap(), phi);
    let wt = serde_json::to_string(&w).unwrap();
    assert_eq!(serde_json::from_str::<FlowWord>(&wt).unwrap(), w);
}

#[test]
fn composition_matches_sequential_flows() {
    let a = apply_word(&FlowWord::new(vec![FlowStep::new(TrigPoly::sin_mode(1), 0.5)]), &CircleDiffeo::identity(256)).unwrap();
    let b = apply_word(&FlowWord::new(vec![FlowStep::new(TrigPoly::cos_mode(1), -0.3)]), &CircleDiffeo::identity(256)).unwrap();
    let seq = apply_word(&FlowWord::new(vec![FlowStep::new(TrigPoly::cos_mode(1), -0.3)]), &a).unwrap();
    let composed = b.compose(&a).unwrap();
    // compose interpolates `b` between its samples.
    assert!(sup(&seq, &composed) < 1e-4);
}
