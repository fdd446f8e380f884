//! Randomized invariants, 1000 instances each.

use proptest::prelude::*;
use slm_bounds::bounds::{bound_l_k, ssnm_unbiased_bound, theorem_bound};
use slm_bounds::estimators::{ht, ml_slm, ml_ssnm, Estimator};
use slm_bounds::linalg::{gram, projector, pseudo_inverse, Cholesky};
use slm_bounds::model::{isometry_data, kernel_slm};
use slm_bounds::{
    simulate, BoundConfig, Matrix, MeanFunction, SimulationSpec, SparseLinearModel, SparseVector, SupportSet,
};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    }
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

/// Full-column-rank matrix with a tame condition number.
fn tall_matrix() -> impl Strategy<Value = Matrix> {
    (1usize..4, 0usize..3)
        .prop_flat_map(|(s, extra)| matrix(s + extra + 1, s))
        .prop_filter("well conditioned", |a| {
            Cholesky::factor(&gram(a).unwrap())
                .map(|c| (0..a.cols()).all(|i| c.inverse_quadratic_form(&unit(a.cols(), i)).unwrap() < 1e6))
                .unwrap_or(false)
        })
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// `(N, S, x0)` with `x0` in `X_S`.
fn sparse_instance(max_n: usize) -> impl Strategy<Value = (usize, usize, SparseVector)> {
    (2usize..=max_n)
        .prop_flat_map(|n| (Just(n), 1usize..n))
        .prop_flat_map(|(n, s)| {
            (
                Just(n),
                Just(s),
                prop::collection::vec(-3.0f64..3.0, n),
                prop::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=s),
            )
        })
        .prop_map(|(n, s, vals, keep)| {
            let mut x = vec![0.0; n];
            for i in keep {
                x[i] = vals[i];
            }
            (n, s, SparseVector::new(x).unwrap())
        })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn projector_is_symmetric_idempotent(a in tall_matrix()) {
        let p = projector(&a).unwrap();
        let pp = p.matmul(&p).unwrap();
        prop_assert!(pp.max_abs_diff(&p) < 1e-9);
        prop_assert!(p.transpose().max_abs_diff(&p) < 1e-12);
        // P A = A
        prop_assert!(p.matmul(&a).unwrap().max_abs_diff(&a) < 1e-9);
    }

    #[test]
    fn pseudo_inverse_is_left_inverse(a in tall_matrix()) {
        let pinv = pseudo_inverse(&a).unwrap();
        let id = pinv.matmul(&a).unwrap();
        prop_assert!(id.max_abs_diff(&Matrix::identity(a.cols())) < 1e-9);
        // A A^+ A = A
        let back = a.matmul(&id).unwrap();
        prop_assert!(back.max_abs_diff(&a) < 1e-9);
    }

    #[test]
    fn kernel_is_symmetric_psd(
        (n, s, x0) in sparse_instance(5),
        seeds in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 5), 4),
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
        sigma2 in 0.3f64..3.0,
    ) {
        let model = SparseLinearModel::ssnm(n, s, sigma2).unwrap();
        // points in X_S: keep the s largest entries of each seed
        let pts: Vec<SparseVector> = seeds
            .iter()
            .map(|v| ml_ssnm(&v[..n], s).unwrap())
            .collect();
        let mut r = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = kernel_slm(&pts[i], &pts[j], &x0, &model).unwrap();
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((r[i][j] - r[j][i]).abs() <= 1e-14 * r[i][j].abs());
            }
        }
        let q: f64 = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| coeffs[i] * r[i][j] * coeffs[j]).sum();
        let scale: f64 = (0..4).map(|i| r[i][i]).fold(0.0, f64::max);
        prop_assert!(q >= -1e-12 * scale, "quadratic form {}", q);
    }

    #[test]
    fn l_k_two_forms_agree(
        (n, s, x0) in sparse_instance(5),
        sigma2 in 0.3f64..3.0,
        kind in 0usize..3,
        comp_seed in 0usize..100,
        k_seed in 0usize..1000,
        t in 0.5f64..5.0,
    ) {
        let model = SparseLinearModel::ssnm(n, s, sigma2).unwrap();
        let comp = comp_seed % n;
        let gamma = match kind {
            0 => MeanFunction::unbiased(comp),
            1 => MeanFunction::affine(comp, (0..n).map(|i| 0.3 * i as f64 - 0.5).collect::<Vec<_>>().into(), 0.2),
            _ => MeanFunction::ht_induced(comp, t, sigma2.sqrt()).unwrap(),
        };
        let supports: Vec<Vec<usize>> = itertools::Itertools::combinations(0..n, s).collect();
        let k = SupportSet::new(supports[k_seed % supports.len()].clone(), n).unwrap();
        let b = bound_l_k(&model, &gamma, &k, &x0, &BoundConfig::default()).unwrap();
        prop_assert!(b.forms_agree(), "{} vs {}", b.value, b.value_tilde_form);
        let ing = &b.ingredients;
        let recomposed = ing.beta2 * (ing.crb_term + ing.gamma_at_xs0 * ing.gamma_at_xs0) - ing.gamma_at_x0 * ing.gamma_at_x0;
        prop_assert!((recomposed - b.value).abs() <= 1e-12 * recomposed.abs().max(ing.gamma_at_x0 * ing.gamma_at_x0).max(1e-300));
        prop_assert!(ing.crb_term >= 0.0);
    }

    #[test]
    fn beta_decreases_with_distance_from_support(
        (n, s, x0) in sparse_instance(6),
        h in matrix(7, 6),
        c in 1.01f64..3.0,
        sigma2 in 0.3f64..3.0,
    ) {
        let h = h.select_columns(&(0..n).collect::<Vec<_>>()).unwrap();
        let Ok(model) = SparseLinearModel::new(h, sigma2, s) else { return Ok(()); };
        let k = SupportSet::new((0..s).collect(), n).unwrap();
        // scale the part of x0 outside K
        let far = SparseVector::new(
            x0.entries().iter().enumerate().map(|(i, v)| if k.contains(i) { *v } else { c * v }).collect(),
        ).unwrap();
        let near_iso = isometry_data(&model, &k, &x0).unwrap();
        let far_iso = isometry_data(&model, &k, &far).unwrap();
        prop_assert!(far_iso.beta <= near_iso.beta * (1.0 + 1e-12));
        prop_assert!(near_iso.beta <= 1.0 && near_iso.beta > 0.0);
        if near_iso.residual_energy > 1e-9 {
            prop_assert!(far_iso.beta < near_iso.beta);
        }
    }

    #[test]
    fn closed_form_decreases_in_xi(n in 2usize..10, s_seed in 0usize..100, a in 0.0f64..5.0, d in 1e-3f64..3.0, sigma2 in 0.2f64..4.0) {
        let s = 1 + s_seed % (n - 1);
        let lo = ssnm_unbiased_bound(n, s, a, sigma2).unwrap();
        let hi = ssnm_unbiased_bound(n, s, a + d, sigma2).unwrap();
        prop_assert!(hi < lo || (lo - s as f64 * sigma2).abs() < 1e-12 * sigma2);
        prop_assert_eq!(lo, ssnm_unbiased_bound(n, s, -a, sigma2).unwrap());
    }

    #[test]
    fn summed_bound_matches_closed_form((n, s, x0) in sparse_instance(6), sigma2 in 0.25f64..4.0) {
        let model = SparseLinearModel::ssnm(n, s, sigma2).unwrap();
        let gammas: Vec<_> = (0..n).map(MeanFunction::unbiased).collect();
        let t = theorem_bound(&model, &gammas, &x0, &BoundConfig::default()).unwrap().total;
        let (xi, _) = slm_bounds::model::xi_and_j(&x0, s);
        let c = ssnm_unbiased_bound(n, s, xi, sigma2).unwrap();
        prop_assert!((t - c).abs() <= 1e-10 * c, "{} vs {}", t, c);
    }

    #[test]
    fn selection_equivariance_and_count(
        y in prop::collection::vec(-5.0f64..5.0, 2..8),
        s_seed in 0usize..100,
        c in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        t in 0.0f64..4.0,
    ) {
        let n = y.len();
        let s = 1 + s_seed % (n - 1);
        let base = ml_ssnm(&y, s).unwrap();
        let cy: Vec<f64> = y.iter().map(|v| c * v).collect();
        let scaled = ml_ssnm(&cy, s).unwrap();
        for k in 0..n {
            prop_assert_eq!(scaled.get(k), c * base.get(k));
        }
        let nnz = y.iter().filter(|v| **v != 0.0).count();
        prop_assert_eq!(base.l0(), s.min(nnz));
        let h1 = ht(&y, t).unwrap();
        let h2 = ht(&cy, c.abs() * t).unwrap();
        for k in 0..n {
            // kept sets agree unless |c y_k| rounds across |c| T
            if (y[k].abs() - t).abs() > 1e-12 {
                prop_assert_eq!(h2.get(k), c * h1.get(k));
            }
        }
    }

    #[test]
    fn ml_slm_minimizes_residual(h in matrix(5, 6), y in prop::collection::vec(-3.0f64..3.0, 5), s in 1usize..3) {
        let Ok(model) = SparseLinearModel::new(h.clone(), 1.0, s) else { return Ok(()); };
        let x = ml_slm(&y, &model, 1_000_000).unwrap();
        let res = |x: &[f64]| -> f64 {
            let f = h.matvec(x).unwrap();
            y.iter().zip(f.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let best = res(x.entries());
        for idx in itertools::Itertools::combinations(0..6, s) {
            let k = SupportSet::new(idx, 6).unwrap();
            let hk = h.select_columns(k.indices()).unwrap();
            let sk = pseudo_inverse(&hk).unwrap().matvec(&y).unwrap();
            let xk = slm_bounds::model::embed(&sk, &k, 6).unwrap();
            prop_assert!(best <= res(xk.entries()) + 1e-9);
        }
    }

    #[test]
    fn ml_slm_reduces_to_selection(y in prop::collection::vec(-3.0f64..3.0, 5), s in 1usize..4) {
        let model = SparseLinearModel::ssnm(5, s, 1.0).unwrap();
        let a = ml_slm(&y, &model, 1000).unwrap();
        let b = ml_ssnm(&y, s).unwrap();
        for k in 0..5 {
            prop_assert!((a.get(k) - b.get(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_decomposition(
        (n, s, x0) in sparse_instance(4),
        kind in 0usize..4,
        seed in any::<u64>(),
        sigma2 in 0.3f64..2.0,
    ) {
        let model = SparseLinearModel::ssnm(n, s, sigma2).unwrap();
        let est = match kind {
            0 => Estimator::Identity,
            1 => Estimator::ml_ssnm(s).unwrap(),
            2 => Estimator::ht(1.5).unwrap(),
            _ => Estimator::ml_slm(&model, 1000).unwrap(),
        };
        let st = simulate(&SimulationSpec::new(model, x0.entries().to_vec().into(), est, 300, seed)).unwrap();
        let (gap, allowance) = st.decomposition_gap();
        prop_assert!(gap.abs() <= allowance.max(1e-12 * st.mse), "gap {} allowance {}", gap, allowance);
        let sum: f64 = st.component_variances.iter().sum();
        prop_assert_eq!(st.total_variance, sum);
    }
}
