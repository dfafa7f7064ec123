//! Property tests for the scalar core and the jet lift: random expression
//! trees exercise the canonical form, the ring axioms, differentiation, and
//! exact evaluation; random polynomial sections exercise holonomicity of jet
//! lifts.

use num_traits::Signed;
use proptest::prelude::*;

use pfaffian_core::expr::parse::parse_expr;
use pfaffian_core::exterior::SmoothMap;
use pfaffian_core::jets::{build_first_jet, prolong_section};
use pfaffian_core::linalg::{qi, sample_point, SamplingPolicy};
use pfaffian_core::{Chart, ChartRef, Expr, Point};

fn chart2() -> ChartRef {
    Chart::new("M", &["x", "y"]).unwrap()
}

/// Random expression trees of depth <= 6 over chart (x, y). Division is
/// kept total by only dividing by nonzero constants.
fn expr_tree() -> impl Strategy<Value = Expr> {
    let chart = chart2();
    let leaf_chart = chart.clone();
    let leaf = prop_oneof![
        (0usize..2).prop_map({
            let c = leaf_chart.clone();
            move |i| Expr::coord(&c, i)
        }),
        (-6i64..=6).prop_map({
            let c = leaf_chart.clone();
            move |k| Expr::int(&c, k)
        }),
    ];
    leaf.prop_recursive(6, 64, 2, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            (inner.clone(), 1i64..=4).prop_map(|(a, k)| {
                a.div(&Expr::int(a.chart(), k)).unwrap()
            }),
            (inner.clone(), 0i64..=3).prop_map(|(a, e)| a.pow(e).unwrap()),
            inner.clone().prop_map(|a| a.neg()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn print_parse_roundtrip(e in expr_tree()) {
        let printed = e.to_string();
        let reparsed = parse_expr(&printed, e.chart()).unwrap();
        prop_assert_eq!(e, reparsed);
    }

    #[test]
    fn ring_axioms(a in expr_tree(), b in expr_tree(), c in expr_tree()) {
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
    }

    #[test]
    fn leibniz_rule(a in expr_tree(), b in expr_tree()) {
        for coord in 0..2 {
            let lhs = a.mul(&b).differentiate(coord);
            let rhs = a.differentiate(coord).mul(&b).add(&a.mul(&b.differentiate(coord)));
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(a in expr_tree(), b in expr_tree(), seed in 0u64..32) {
        let chart = a.chart().clone();
        // avoid the poles of both operands
        let mut avoid = Vec::new();
        for e in [&a, &b] {
            if !e.denominator().is_constant() {
                avoid.push(e.denominator_expr());
            }
        }
        let p = match sample_point(&chart, &avoid, &SamplingPolicy::with_seed(seed)) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let (va, vb) = (a.evaluate(&p).unwrap(), b.evaluate(&p).unwrap());
        prop_assert_eq!(a.add(&b).evaluate(&p).unwrap(), &va + &vb);
        prop_assert_eq!(a.mul(&b).evaluate(&p).unwrap(), &va * &vb);
    }

    #[test]
    fn normalization_is_idempotent(e in expr_tree()) {
        let n = pfaffian_core::expr::normalize(&e);
        prop_assert_eq!(&n, &pfaffian_core::expr::normalize(&n));
        prop_assert_eq!(n, e);
    }
}

/// Random polynomial in (x, y) of degree <= 3 with small coefficients.
fn poly_deg3() -> impl Strategy<Value = Expr> {
    proptest::collection::vec(-4i64..=4, 10).prop_map(|coefs| {
        let base = Chart::new("X", &["x", "y"]).unwrap();
        let x = Expr::coord(&base, 0);
        let y = Expr::coord(&base, 1);
        let mut acc = Expr::zero(&base);
        let mut k = 0;
        for dx in 0..=3usize {
            for dy in 0..=(3 - dx) {
                let t = x
                    .pow(dx as i64)
                    .unwrap()
                    .mul(&y.pow(dy as i64).unwrap())
                    .scale(&qi(coefs[k]));
                acc = acc.add(&t);
                k += 1;
            }
        }
        acc
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jet_lifts_are_holonomic(s in poly_deg3()) {
        let q_chart = Chart::new("Q", &["x", "y", "u"]).unwrap();
        let x_chart = Chart::new("X", &["x", "y"]).unwrap();
        let q = SmoothMap::new(
            q_chart.clone(),
            x_chart,
            vec![Expr::coord(&q_chart, 0), Expr::coord(&q_chart, 1)],
        )
        .unwrap();
        let jet = build_first_jet(&q, &SamplingPolicy::with_seed(1)).unwrap();
        let lift = prolong_section(&jet, &[s]).unwrap();
        prop_assert!(jet.fibration().holonomic_check(&lift).unwrap());
    }
}

#[test]
fn finite_difference_cross_check() {
    // d/dx (x/(1+x)) = 1/(1+x)^2; central difference at x = 1 with step
    // 1/1024 must agree within 1e-3, all in exact rational arithmetic.
    let chart = Chart::new("M", &["x"]).unwrap();
    let f = parse_expr("x/(1+x)", &chart).unwrap();
    let df = f.differentiate(0);
    assert_eq!(df, parse_expr("1/(1+x)^2", &chart).unwrap());
    let h = pfaffian_core::linalg::Rational::new(1.into(), 1024.into());
    let at = |v: pfaffian_core::linalg::Rational| {
        f.evaluate(&Point::new(chart.clone(), vec![v]).unwrap()).unwrap()
    };
    let one = qi(1);
    let fd = (at(&one + &h) - at(&one - &h)) / (qi(2) * &h);
    let exact = df
        .evaluate(&Point::new(chart.clone(), vec![one]).unwrap())
        .unwrap();
    let err = (fd - exact).abs();
    assert!(err <= pfaffian_core::linalg::Rational::new(1.into(), 1000.into()));
}
