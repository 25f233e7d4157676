use std::sync::Arc;

use proptest::prelude::*;
use riskattr::attribution::{bshap, ig_bond_closed_form, integrated_gradients, QuadratureConfig};
use riskattr::pricing::{BondModel, LinearCombination, PolynomialModel, WithDummy};
use riskattr::{FeatureVector, PricingModel, ShapeProfile};

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::new(names(v.len()), v.to_vec()).unwrap()
}

/// Random polynomial of total degree <= 3 over `n` features.
fn poly_strategy(n: usize) -> impl Strategy<Value = PolynomialModel> {
    let term = (-2.0f64..2.0, prop::collection::vec(0u32..2, n));
    prop::collection::vec(term, 1..6).prop_map(move |terms| {
        let terms = terms
            .into_iter()
            .map(|(c, mut e)| {
                // cap the total degree at 3
                let mut total = 0;
                for x in e.iter_mut() {
                    total += *x;
                    if total > 3 {
                        *x = 0;
                    }
                }
                (c, e)
            })
            .collect();
        PolynomialModel::new(names(n), terms).unwrap()
    })
}

fn case(max_n: usize) -> impl Strategy<Value = (PolynomialModel, Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            poly_strategy(n),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bshap_is_efficient((m, e, b) in case(8)) {
        let res = bshap(&m, &fv(&e), &fv(&b)).unwrap();
        prop_assert!(res.relative_residual() <= 1e-10, "{}", res.relative_residual());
        prop_assert_eq!(res.n_model_evals, 1 << e.len());
    }

    #[test]
    fn ig_residual_shrinks_with_refinement((m, e, b) in case(6)) {
        let coarse = integrated_gradients(&m, &fv(&e), &fv(&b), &QuadratureConfig::trapezoid(256)).unwrap();
        let fine = integrated_gradients(&m, &fv(&e), &fv(&b), &QuadratureConfig::trapezoid(512)).unwrap();
        let exact = integrated_gradients(&m, &fv(&e), &fv(&b), &QuadratureConfig::gauss_legendre(4)).unwrap();
        prop_assert!(exact.relative_residual() <= 1e-12);
        // once round-off dominates there is nothing left to shrink
        let floor = 1e-12 * (1.0 + coarse.f_explicand.abs() + coarse.f_baseline.abs());
        prop_assert!(coarse.completeness_residual.abs() <= floor
            || fine.completeness_residual.abs() * 3.0 <= coarse.completeness_residual.abs());
    }

    #[test]
    fn methods_are_linear((f, e, b) in case(5), a in -3.0f64..3.0, c in -3.0f64..3.0, seed_terms in poly_strategy(5)) {
        let n = e.len();
        let g = PolynomialModel::new(names(n), seed_terms.terms().iter().map(|(k, ex)| (*k, ex[..n].to_vec())).collect()).unwrap();
        let f: Arc<dyn PricingModel> = Arc::new(f);
        let g: Arc<dyn PricingModel> = Arc::new(g);
        let combo = LinearCombination::new(vec![(a, f.clone()), (c, g.clone())], ShapeProfile::unconstrained(n)).unwrap();
        let (xe, xb) = (fv(&e), fv(&b));
        let q = QuadratureConfig::gauss_legendre(16);
        for (lhs, rf, rg) in [
            (bshap(&combo, &xe, &xb).unwrap(), bshap(f.as_ref(), &xe, &xb).unwrap(), bshap(g.as_ref(), &xe, &xb).unwrap()),
            (
                integrated_gradients(&combo, &xe, &xb, &q).unwrap(),
                integrated_gradients(f.as_ref(), &xe, &xb, &q).unwrap(),
                integrated_gradients(g.as_ref(), &xe, &xb, &q).unwrap(),
            ),
        ] {
            for i in 0..n {
                let want = a * rf.attributions[i] + c * rg.attributions[i];
                prop_assert!((lhs.attributions[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
            }
        }
    }

    #[test]
    fn dummy_gets_nothing((m, e, b) in case(5), extra in -5.0f64..5.0, extra_b in -5.0f64..5.0) {
        let with = WithDummy::new(&m, "dummy").unwrap();
        let mut en = names(e.len());
        en.push("dummy".into());
        let mut ev = e.clone();
        ev.push(extra);
        let mut bv = b.clone();
        bv.push(extra_b);
        let xe = FeatureVector::new(en.clone(), ev).unwrap();
        let xb = FeatureVector::new(en, bv).unwrap();
        let d = e.len();
        prop_assert_eq!(bshap(&with, &xe, &xb).unwrap().attributions[d], 0.0);
        prop_assert_eq!(integrated_gradients(&with, &xe, &xb, &QuadratureConfig::default()).unwrap().attributions[d], 0.0);
    }

    #[test]
    fn bshap_symmetry(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, v in -2.0f64..2.0, w in -2.0f64..2.0, z in -2.0f64..2.0, zb in -2.0f64..2.0) {
        // f symmetric in x0 and x1
        let m = PolynomialModel::new(names(3), vec![(c1, vec![1, 1, 0]), (c2, vec![1, 0, 1]), (c2, vec![0, 1, 1])]).unwrap();
        let res = bshap(&m, &fv(&[v, v, z]), &fv(&[w, w, zb])).unwrap();
        prop_assert!((res.attributions[0] - res.attributions[1]).abs() <= 1e-12 * (1.0 + res.attributions[0].abs()));
    }

    #[test]
    fn additive_models_agree(a in prop::collection::vec(-2.0f64..2.0, 4), e in prop::collection::vec(-2.0f64..2.0, 4), b in prop::collection::vec(-2.0f64..2.0, 4)) {
        // f(x) = sum_i a_i x_i^3 + x_i^2
        let mut terms = Vec::new();
        for i in 0..4 {
            let mut cube = vec![0; 4];
            cube[i] = 3;
            let mut sq = vec![0; 4];
            sq[i] = 2;
            terms.push((a[i], cube));
            terms.push((1.0, sq));
        }
        let m = PolynomialModel::new(names(4), terms).unwrap();
        let s = bshap(&m, &fv(&e), &fv(&b)).unwrap();
        let g = integrated_gradients(&m, &fv(&e), &fv(&b), &QuadratureConfig::gauss_legendre(8)).unwrap();
        for i in 0..4 {
            let want = a[i] * (e[i].powi(3) - b[i].powi(3)) + e[i].powi(2) - b[i].powi(2);
            prop_assert!((s.attributions[i] - want).abs() < 1e-10);
            prop_assert!((g.attributions[i] - want).abs() < 1e-10);
        }
    }
}

#[test]
fn bond_ig_matches_closed_form_with_gauss_legendre() {
    let base = FeatureVector::new(["r", "c"], vec![0.0, 0.0]).unwrap();
    let q = QuadratureConfig::gauss_legendre(256);
    for t in 1..=30 {
        let m = BondModel::new(t as f64).unwrap();
        for k in 0..60 {
            let r = 0.01 + k as f64 * 0.01;
            for c in [1.0, 100.0] {
                let e = FeatureVector::new(["r", "c"], vec![r, c]).unwrap();
                let ig = integrated_gradients(&m, &e, &base, &q).unwrap();
                let want = ig_bond_closed_form(r, c, t as f64).unwrap();
                assert!(
                    (ig.attributions[0] - want).abs() < 1e-10,
                    "r={r} T={t} c={c}"
                );
            }
        }
    }
}

#[test]
fn trapezoid_error_shrinks_quadratically_on_the_bond() {
    let m = BondModel::new(30.0).unwrap();
    let base = FeatureVector::new(["r", "c"], vec![0.0, 0.0]).unwrap();
    let e = FeatureVector::new(["r", "c"], vec![0.6, 100.0]).unwrap();
    let want = ig_bond_closed_form(0.6, 100.0, 30.0).unwrap();
    let err = |m_pts| {
        let res = integrated_gradients(&m, &e, &base, &QuadratureConfig::trapezoid(m_pts)).unwrap();
        (res.attributions[0] - want).abs()
    };
    let ratio = err(256) / err(511);
    assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
}
