use hlop_core::hlop::{quantize, QuantConfig};
use hlop_core::numeric::{matmul, matmul_nt, matmul_tn, orthonormalize_rows, rowspace_projector, topk_principal};
use hlop_core::{subspace_alignment_error, HebbianConfig, Layer, LayerKind, LateralMode, LateralSubspace, Matrix, Rng};
use proptest::prelude::*;

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

/// Plain triple loop.
fn naive_product(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            out.as_mut_slice()[i * b.cols() + j] = (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum();
        }
    }
    out
}

fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
    a.shape() == b.shape() && a.sub(b).unwrap().max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

fn subspace_with(h: &Matrix) -> LateralSubspace {
    let mut s = LateralSubspace::new(h.cols(), HebbianConfig::default(), LateralMode::Linear);
    s.set_consolidated(h.clone()).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn products_agree_with_the_triple_loop(seed in any::<u64>(), m in 1usize..7, k in 1usize..7, n in 1usize..7) {
        let mut rng = Rng::new(seed);
        let a = gaussian(m, k, &mut rng);
        let b = gaussian(k, n, &mut rng);
        let want = naive_product(&a, &b);
        prop_assert!(close(&matmul(&a, &b).unwrap(), &want, 1e-12));
        prop_assert!(close(&matmul_nt(&a, &b.transpose()).unwrap(), &want, 1e-12));
        prop_assert!(close(&matmul_tn(&a.transpose(), &b).unwrap(), &want, 1e-12));
    }

    #[test]
    fn product_is_associative_and_bilinear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let mut rng = Rng::new(seed);
        let (a, b, c, d) = (gaussian(3, 4, &mut rng), gaussian(4, 5, &mut rng), gaussian(5, 2, &mut rng), gaussian(4, 5, &mut rng));
        let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
        let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
        let mut combo = b.clone();
        combo.add_scaled(&d, alpha).unwrap();
        let mut expect = matmul(&a, &b).unwrap();
        expect.add_scaled(&matmul(&a, &d).unwrap(), alpha).unwrap();
        prop_assert!(close(&matmul(&a, &combo).unwrap(), &expect, 1e-12));
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(seed in any::<u64>(), k in 1usize..6, n in 6usize..12) {
        let mut rng = Rng::new(seed);
        let h = orthonormalize_rows(&gaussian(k, n, &mut rng));
        let sub = subspace_with(&h);
        let x = gaussian(4, n, &mut rng);
        let once = sub.project_rows(&x).unwrap();
        let twice = sub.project_rows(&once).unwrap();
        prop_assert!(close(&once, &twice, 1e-12));
        // The residual is orthogonal to every row of H.
        prop_assert!(matmul_nt(&once, &h).unwrap().max_abs() < 1e-12);
        // And matches I − P with P from the pseudo-inverse.
        let p = rowspace_projector(&h, 1e-8).unwrap();
        let mut expect = x.clone();
        expect.add_scaled(&matmul(&x, &p).unwrap(), -1.0).unwrap();
        prop_assert!(close(&once, &expect, 1e-10));
    }

    #[test]
    fn projected_updates_leave_old_responses_unchanged(seed in any::<u64>(), k in 1usize..5) {
        let mut rng = Rng::new(seed);
        let n = 8;
        let h = orthonormalize_rows(&gaussian(k, n, &mut rng));
        let sub = subspace_with(&h);
        let mut layer = Layer::from_parts(gaussian(3, n, &mut rng), vec![0.0; 3], LayerKind::Dense { inputs: n, outputs: 3 }).unwrap();
        // An old input inside rowspace(H).
        let old = matmul(&gaussian(1, k, &mut rng), &h).unwrap();
        let before = matmul_nt(&old, &layer.weights).unwrap();
        let grad = hlop_core::LayerGrad::new(gaussian(5, 3, &mut rng), gaussian(5, n, &mut rng)).unwrap();
        hlop_core::trainers::sgd_update(&mut layer, &grad, 5, 0.7, Some(&sub), false).unwrap();
        let after = matmul_nt(&old, &layer.weights).unwrap();
        prop_assert!(close(&before, &after, 1e-10));
    }

    #[test]
    fn two_stage_rule_is_the_oja_subspace_rule_without_history(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = Rng::new(seed);
        let n = 6;
        let mut sub = LateralSubspace::new(n, HebbianConfig::default(), LateralMode::Linear);
        let h_new = gaussian(k, n, &mut rng);
        sub.set_fresh(h_new.clone()).unwrap();
        let x = gaussian(7, n, &mut rng);
        // Oja subspace rule by hand: mean over samples of y xᵀ − y yᵀ H.
        let mut want = Matrix::zeros(k, n);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let y: Vec<f64> = (0..k).map(|i| (0..n).map(|j| h_new[(i, j)] * xr[j]).sum()).collect();
            for i in 0..k {
                for j in 0..n {
                    let back: f64 = (0..k).map(|m| y[m] * h_new[(m, j)]).sum();
                    want.as_mut_slice()[i * n + j] += y[i] * (xr[j] - back) / x.rows() as f64;
                }
            }
        }
        prop_assert!(close(&sub.hebbian_delta(&x).unwrap(), &want, 1e-12));
    }

    #[test]
    fn quantizer_stays_on_the_clamped_grid(y in -100.0f64..100.0, scale in 0.5f64..30.0, steps in 1usize..200) {
        let q = QuantConfig { scale, steps };
        let v = quantize(y, &q);
        prop_assert!(v.abs() <= scale + 1e-12);
        let units = v / scale * steps as f64;
        prop_assert!((units - units.round()).abs() < 1e-9);
        if y.abs() <= scale {
            prop_assert!((v - y).abs() <= scale / (2.0 * steps as f64) + 1e-12);
        }
    }

    #[test]
    fn alignment_depends_only_on_the_subspaces(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = Rng::new(seed);
        let n = 7;
        let h = gaussian(k, n, &mut rng);
        // The reference is an orthonormal basis, as the oracle produces.
        let m = orthonormalize_rows(&gaussian(k, n, &mut rng));
        // Mixing rows by an invertible matrix keeps the row space.
        let mut mix = gaussian(k, k, &mut rng);
        for i in 0..k {
            mix.as_mut_slice()[i * k + i] += 4.0;
        }
        let e1 = subspace_alignment_error(&h, &m).unwrap();
        let e2 = subspace_alignment_error(&matmul(&mix, &h).unwrap(), &m).unwrap();
        prop_assert!((e1 - e2).abs() < 1e-8);
        let h_basis = orthonormalize_rows(&h);
        prop_assert!((e1 - subspace_alignment_error(&m, &h_basis).unwrap()).abs() < 1e-10);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e1));
        prop_assert!(subspace_alignment_error(&h, &h_basis).unwrap() < 1e-10);
    }
}

#[test]
fn full_rank_oracle_has_zero_alignment_error() {
    let mut rng = Rng::new(4);
    let data = gaussian(40, 5, &mut rng);
    let m = topk_principal(&data, 5).unwrap();
    let h = gaussian(5, 5, &mut rng);
    assert!(subspace_alignment_error(&h, &m).unwrap() < 1e-10);
}

#[test]
fn dominant_direction_of_an_anisotropic_sample() {
    // diag(4, 1) Gaussian: the top direction should sit within 5° of e1.
    let mut rng = Rng::new(12);
    let data = Matrix::from_vec(2000, 2, (0..2000).flat_map(|_| [2.0 * rng.normal(), rng.normal()]).collect()).unwrap();
    let m = topk_principal(&data, 1).unwrap();
    let cos = m[(0, 0)].abs() / (m[(0, 0)].powi(2) + m[(0, 1)].powi(2)).sqrt();
    assert!(cos > 5f64.to_radians().cos(), "angle {:.2}°", cos.acos().to_degrees());
}
