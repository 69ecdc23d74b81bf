mod common;

use common::*;
use coreprice::mid::star_price;
use coreprice::random::{random_instance, random_star};
use coreprice::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Raising s1's bid lowers s2's Vickrey price `10 − b1` until it hits zero,
/// so the projection of `(2, 10 − b1)` onto `p1 + p2 ≥ 10` gives
/// `p1 = 1 + b1/2` up to 10 and 6 after.
#[test]
fn example_price_in_own_bid() {
    let (inst, w) = example();
    let expect = |b: f64| if b <= 10.0 { 1.0 + b / 2.0 } else { 6.0 };
    for rule in [PaymentRule::QuadCore, PaymentRule::MrcQuad] {
        let curve = sweep_generic_curve(
            &inst,
            &GenericSweep {
                buyer: "s1".into(),
                from: m("8"),
                to: m("12"),
                step: None,
                rule,
                tie: TieBreakPolicy::Lexicographic,
            },
        )
        .unwrap();
        assert_eq!(curve.x_range(), (8.0, 12.0));
        for &(b, p) in &curve.breakpoints {
            assert!((p - expect(b)).abs() < 1e-9, "{rule} at {b}: {p}");
        }
        assert!((compute_mid(&curve).max_slope - 0.5).abs() < 1e-9);
    }
    // the same points by alternating projections on the enumerated core
    for b in ["8", "9.5", "10", "11"] {
        let at = inst.with_amount(0, m(b)).unwrap();
        let poly = enumerate_core_polytope(&at, &w, 1000).unwrap();
        let v: Vec<f64> = coreprice::wdp::vickrey_prices(&at, &w).unwrap().iter().map(|x| x.to_f64()).collect();
        let d = dykstra(&poly, &v, 2000);
        assert!((d[0] - expect(m(b).to_f64())).abs() < 1e-9, "{b}: {d:?}");
    }
}

#[test]
fn vickrey_price_is_flat_too() {
    let (inst, _) = example();
    let curve = sweep_generic_curve(
        &inst,
        &GenericSweep {
            buyer: "s2".into(),
            from: m("8"),
            to: m("20"),
            step: Some(m("0.5")),
            rule: PaymentRule::Vickrey,
            tie: TieBreakPolicy::Lexicographic,
        },
    )
    .unwrap();
    assert_eq!(curve.breakpoints.len(), 2);
    assert!(curve.breakpoints.iter().all(|&(_, p)| p == 2.0));
}

#[test]
fn sweep_argument_errors() {
    let (inst, _) = example();
    let sweep = |from: &str, to: &str| GenericSweep {
        buyer: "s1".into(),
        from: m(from),
        to: m(to),
        step: None,
        rule: PaymentRule::QuadCore,
        tie: TieBreakPolicy::Lexicographic,
    };
    let err = sweep_generic_curve(&inst, &sweep("8", "1")).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)), "{err}");
    // At 1 the pair no longer beats the bundle bid of 10.
    let err = sweep_generic_curve(&inst, &sweep("1", "3")).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
    let mut bad = sweep("8", "9");
    bad.buyer = "nobody".into();
    assert!(sweep_generic_curve(&inst, &bad).is_err());
}

#[test]
fn generic_sweep_matches_star_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for s in 0..6 {
        let star = random_star(&mut rng, 3, 4);
        let tmax = theta_max(&star);
        let (inst, _, tie) = star_to_instance(&star, Money::ZERO).unwrap();
        for rule in [PaymentRule::QuadCore, PaymentRule::MrcQuad] {
            let generic = sweep_generic_curve(
                &inst,
                &GenericSweep {
                    buyer: "w0".into(),
                    from: star.v0(),
                    to: star.v0() + Money::from_f64(tmax),
                    step: None,
                    rule,
                    tie: tie.clone(),
                },
            )
            .unwrap();
            let v0 = star.v0().to_f64();
            for &(bid, p) in &generic.breakpoints {
                let a = star_price(&star, bid - v0, rule).unwrap();
                assert!((a - p).abs() < 1e-7, "star {s} {rule} bid {bid}: generic {p} analytic {a}");
            }
            let exact = compute_mid(&sweep_star_curve(&star, tmax, rule).unwrap()).max_slope;
            let sampled = compute_mid(&generic).max_slope;
            assert!(sampled <= exact + 1e-6, "star {s} {rule}: {sampled} > {exact}");
            assert!(sampled <= 1.0 + 1e-8);
        }
    }
}

#[test]
fn lower_bound_scenario_slope_along_the_sweep() {
    for w in 2..=4usize {
        let delta = Money::from_f64(0.5 / (w as f64 - 1.0));
        let sc = generate_lower_bound_scenario(w, delta).unwrap();
        let from = sc.scenario_one.amount(0);
        let to = sc.scenario_two.amount(0);
        for rule in [PaymentRule::QuadCore, PaymentRule::MrcQuad] {
            let curve = sweep_generic_curve(
                &sc.scenario_two,
                &GenericSweep {
                    buyer: sc.deviating_buyer.clone(),
                    from,
                    to,
                    step: None,
                    rule,
                    tie: sc.tie_policy(),
                },
            )
            .unwrap();
            let (x0, x1) = curve.x_range();
            let rise = curve.value_at(x1).unwrap() - curve.value_at(x0).unwrap();
            let bound = 1.0 - 1.0 / w as f64;
            assert!(rise / (x1 - x0) >= bound - 1e-8, "w={w} {rule}: {}", rise / (x1 - x0));
            assert!(compute_mid(&curve).max_slope >= bound - 1e-8);
        }
    }
}

/// Outside stars there is no proof of the slope bound; this records the
/// largest slope seen on small random instances without asserting it.
#[test]
fn non_star_slopes_exploration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 6, 4);
        let w = solve_wdp(&inst, &TieBreakPolicy::Lexicographic).unwrap().winners;
        for &i in w.members() {
            let b = inst.amount(i);
            let curve = sweep_generic_curve(
                &inst,
                &GenericSweep {
                    buyer: inst.buyer_id(i).into(),
                    from: b,
                    to: b + m("5"),
                    step: None,
                    rule: PaymentRule::QuadCore,
                    tie: TieBreakPolicy::Lexicographic,
                },
            )
            .unwrap();
            worst = worst.max(compute_mid(&curve).max_slope);
        }
    }
    println!("largest slope on random non-star instances: {worst}");
    assert!(worst.is_finite());
}
