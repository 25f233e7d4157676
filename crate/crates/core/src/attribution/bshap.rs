use crate::error::{Error, Result};
use crate::features::{shapley_weight, splice, AttributionResult, FeatureVector, Method};
use crate::pricing::PricingModel;

use super::{check_inputs, eval_at};

/// Exact enumeration visits all `2^n` coalitions.
pub const MAX_BSHAP_FEATURES: usize = 20;

/// Baseline Shapley values by exact enumeration.
///
/// `v(S) = f(explicand_S; baseline_rest)` is evaluated once per coalition
/// bitmask and reused for every player; contributions are summed in
/// ascending mask order so results are reproducible bit for bit.
pub fn bshap(
    model: &dyn PricingModel,
    explicand: &FeatureVector,
    baseline: &FeatureVector,
) -> Result<AttributionResult> {
    check_inputs(model, explicand, baseline)?;
    let n = explicand.len();
    if n > MAX_BSHAP_FEATURES {
        return Err(Error::SizeLimit {
            n,
            limit: MAX_BSHAP_FEATURES,
        });
    }
    let corners = 1usize << n;
    let mut points = Vec::with_capacity(corners);
    let mut value = Vec::with_capacity(corners);
    for mask in 0..corners as u64 {
        let z = splice(explicand.values(), baseline.values(), mask);
        value.push(eval_at(model, &z)?);
        points.push(z);
    }

    let weights = (0..n.max(1))
        .map(|k| shapley_weight(k, n.max(1)))
        .collect::<Result<Vec<_>>>()?;
    let mut attributions = vec![0.0; n];
    for (i, a) in attributions.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in (0..corners).filter(|m| m & bit == 0) {
            let k = mask.count_ones() as usize;
            *a += weights[k] * (value[mask | bit] - value[mask]);
        }
    }

    let f_baseline = value[0];
    let f_explicand = value[corners - 1];
    let completeness_residual = attributions.iter().sum::<f64>() - (f_explicand - f_baseline);
    Ok(AttributionResult {
        method: Method::BShap,
        attributions,
        explicand: explicand.clone(),
        baseline: baseline.clone(),
        f_explicand,
        f_baseline,
        completeness_residual,
        evaluation_points: points,
        n_model_evals: corners,
        refinement_delta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::{BondModel, LinearModel};

    fn fv(names: &[&str], v: &[f64]) -> FeatureVector {
        FeatureVector::new(names.iter().copied(), v.to_vec()).unwrap()
    }

    #[test]
    fn bond_two_player_enumeration() {
        // Hand enumeration of both orderings: s_r = ½[(B(r̄,0)-B(0,0)) + (B(r̄,c̄)-B(0,c̄))]
        let m = BondModel::new(10.0).unwrap();
        let e = fv(&["r", "c"], &[0.05, 100.0]);
        let b = fv(&["r", "c"], &[0.0, 0.0]);
        let res = bshap(&m, &e, &b).unwrap();
        assert!((res.attributions[0] - -19.673_467_014_368_33).abs() < 1e-10);
        assert!((res.attributions[1] - 80.326_532_985_631_67).abs() < 1e-10);
        assert!(res.completeness_residual.abs() < 1e-12);
        assert_eq!(res.n_model_evals, 4);
        assert_eq!(res.evaluation_points.len(), 4);
    }

    #[test]
    fn linear_model_gets_weighted_deltas() {
        let m = LinearModel::new(["a", "b", "c"], vec![2.0, -1.0, 0.5], 3.0).unwrap();
        let e = fv(&["a", "b", "c"], &[1.0, 4.0, -2.0]);
        let b = fv(&["a", "b", "c"], &[0.5, 1.0, 2.0]);
        let res = bshap(&m, &e, &b).unwrap();
        let want = [1.0, -3.0, -2.0];
        for (a, w) in res.attributions.iter().zip(want) {
            assert!((a - w).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_points_give_zero() {
        let m = BondModel::new(5.0).unwrap();
        let e = fv(&["r", "c"], &[0.03, 50.0]);
        let res = bshap(&m, &e, &e).unwrap();
        assert!(res.attributions.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn rejects_oversized_and_misaligned_inputs() {
        let names: Vec<String> = (0..21).map(|i| format!("x{i}")).collect();
        let m = LinearModel::new(names.clone(), vec![1.0; 21], 0.0).unwrap();
        let e = FeatureVector::new(names.clone(), vec![1.0; 21]).unwrap();
        let b = FeatureVector::new(names, vec![0.0; 21]).unwrap();
        assert!(matches!(
            bshap(&m, &e, &b),
            Err(Error::SizeLimit { n: 21, .. })
        ));

        let bond = BondModel::new(1.0).unwrap();
        let e = fv(&["c", "r"], &[1.0, 0.1]);
        assert!(matches!(bshap(&bond, &e, &e), Err(Error::Contract(_))));
    }

    #[test]
    fn evaluation_failure_names_the_corner() {
        let bond = BondModel::new(1.0).unwrap();
        let e = fv(&["r", "c"], &[0.1, -5.0]);
        let b = fv(&["r", "c"], &[0.0, 0.0]);
        match bshap(&bond, &e, &b) {
            Err(Error::ModelEvaluation { point, .. }) => assert_eq!(point, vec![0.0, -5.0]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
