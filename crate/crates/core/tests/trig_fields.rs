use chowkit::rational::{q, qi, Q};
use chowkit::trig_fields::{Mode, TrigPoly};
use proptest::prelude::*;

fn rational(num: i64) -> impl Strategy<Value = Q> {
    (-num..=num, 1i64..=4).prop_map(|(n, d)| q(n, d))
}

fn trig_poly(max_mode: usize, num: i64) -> impl Strategy<Value = TrigPoly> {
    (0..=max_mode).prop_flat_map(move |n| {
        (rational(num), prop::collection::vec(rational(num), n), prop::collection::vec(rational(num), n))
            .prop_map(|(c0, cos, sin)| TrigPoly::new(c0, cos, sin).unwrap())
    })
}

/// `cos(kθ)` for any integer `k`, as a field.
fn cos_k(k: i64) -> TrigPoly {
    if k == 0 {
        TrigPoly::constant(qi(1))
    } else {
        TrigPoly::cos_mode(k.unsigned_abs() as usize)
    }
}

/// `sin(kθ)` for any integer `k`.
fn sin_k(k: i64) -> TrigPoly {
    match k.signum() {
        0 => TrigPoly::zero(),
        1 => TrigPoly::sin_mode(k as usize),
        _ => -&TrigPoly::sin_mode(k.unsigned_abs() as usize),
    }
}

fn d_dtheta(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn complex_mode_law() {
    // e_m = cos mθ + i sin mθ; [e_m, e_n] = (m − n) i e_{m+n}.
    for m in -6i64..=6 {
        for n in -6i64..=6 {
            let (a, b) = (cos_k(m), sin_k(m));
            let (c, d) = (cos_k(n), sin_k(n));
            let re = &a.bracket(&c) - &b.bracket(&d);
            let im = &a.bracket(&d) + &b.bracket(&c);
            let k = qi(m - n);
            assert_eq!(re, sin_k(m + n).scale(&-k.clone()), "re m={m} n={n}");
            assert_eq!(im, cos_k(m + n).scale(&k), "im m={m} n={n}");
        }
    }
}

#[test]
fn named_identities() {
    let (c1, s1) = (TrigPoly::cos_mode(1), TrigPoly::sin_mode(1));
    let (c2, s2) = (TrigPoly::cos_mode(2), TrigPoly::sin_mode(2));
    assert_eq!(s1.bracket(&c1), TrigPoly::constant(qi(1)));
    let mut want = TrigPoly::with_max_mode(3);
    want = &want + &TrigPoly::sin_mode(1).scale(&q(3, 2));
    want = &want + &TrigPoly::sin_mode(3).scale(&q(1, 2));
    assert_eq!(c1.bracket(&c2), want);
    assert_eq!(&c1.bracket(&c2) - &s1.bracket(&s2), TrigPoly::sin_mode(3));
    assert!((want.evaluate(std::f64::consts::PI / 6.0) - 1.25).abs() < 1e-15);
    assert_eq!(TrigPoly::basis(Mode::CONST).bracket(&TrigPoly::constant(qi(7))), TrigPoly::zero());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn antisymmetry(v in trig_poly(6, 5), w in trig_poly(6, 5)) {
        prop_assert_eq!(v.bracket(&w), -&w.bracket(&v));
        prop_assert!(v.bracket(&v).is_zero());
    }

    #[test]
    fn bilinearity(u in trig_poly(5, 5), v in trig_poly(5, 5), w in trig_poly(5, 5), a in rational(6), b in rational(6)) {
        let lhs = (&u.scale(&a) + &v.scale(&b)).bracket(&w);
        let rhs = &u.bracket(&w).scale(&a) + &v.bracket(&w).scale(&b);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn jacobi(u in trig_poly(6, 4), v in trig_poly(6, 4), w in trig_poly(6, 4)) {
        let s = &(&u.bracket(&v.bracket(&w)) + &v.bracket(&w.bracket(&u))) + &w.bracket(&u.bracket(&v));
        prop_assert!(s.is_zero());
    }

    #[test]
    fn bracket_matches_finite_differences(v in trig_poly(4, 2), w in trig_poly(4, 2), theta in 0.0..std::f64::consts::TAU) {
        let h = 1e-5;
        let fd = d_dtheta(|x| v.evaluate(x), theta, h) * w.evaluate(theta)
            - d_dtheta(|x| w.evaluate(x), theta, h) * v.evaluate(theta);
        let exact = v.bracket(&w).evaluate(theta);
        prop_assert!((fd - exact).abs() < 1e-6, "fd {} exact {}", fd, exact);
    }

    #[test]
    fn json_round_trip(v in trig_poly(6, 9)) {
        let text = serde_json::to_string(&v).unwrap();
        let back: TrigPoly = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, v);
    }
}
