use ldg_core::baselines::{covariance, fda_fit, fda_scatter, pca_fit};
use ldg_core::data::{class_priors, sample_per_class, split_indices, Normalization, SplitSpec};
use ldg_core::eval::{knn_classify, loo_accuracy, select_dimension, select_k_gauss, CvProtocol};
use ldg_core::ldg::{ldg_objective, ldg_solve, scatter_matrices};
use ldg_core::linalg::{default_ridge, gen_sym_eig, orthonormalize_columns, sym_eig};
use ldg_core::localgauss::{fit_local_gaussian, local_qda_classify, map_loo_error, objective_f, NeighborhoodConfig};
use ldg_core::transfer::{transfer_matrix, transfer_scatter, DomainPair};
use ldg_core::{LabeledDataset, Matrix, Method, Projection};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn symmetric(seed: u64, d: usize) -> Matrix {
    let g = uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed), d, d);
    g.add_scaled(&g.transpose(), 1.0).unwrap()
}

/// Uniform clouds around random class centres; each class has at least
/// `min_per_class` rows.
fn dataset(seed: u64, n: usize, d: usize, classes: usize, min_per_class: usize) -> LabeledDataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let centres = uniform_matrix(&mut r, classes, d).scaled(2.0);
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes + 1).collect();
    for l in labels.iter_mut().skip(classes * min_per_class) {
        *l = r.random_range(1..=classes);
    }
    let mut data = Vec::with_capacity(n * d);
    for &y in &labels {
        for c in 0..d {
            data.push(centres.get(y - 1, c) + r.random_range(-1.0..1.0));
        }
    }
    LabeledDataset::new(Matrix::from_vec(n, d, data).unwrap(), labels, classes).unwrap()
}

fn random_basis(seed: u64, d: usize, l: usize) -> Matrix {
    orthonormalize_columns(&uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed), d, l)).unwrap()
}

fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn half_trace(m: &Matrix, b: &Matrix) -> f64 {
    let mb = m.matmul(b).unwrap();
    0.5 * b.as_slice().iter().zip(mb.as_slice()).map(|(x, y)| x * y).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_reconstruction_and_trace(seed in any::<u64>(), d in 1usize..40) {
        let s = symmetric(seed, d);
        let e = sym_eig(&s).unwrap();
        let q = &e.vectors;
        let rebuilt = q.matmul(&Matrix::from_diag(&e.values)).unwrap().matmul(&q.transpose()).unwrap();
        prop_assert!(max_abs_diff(&rebuilt, &s) <= 1e-8 * (1.0 + s.norm_inf()));
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - s.trace()).abs() <= 1e-8 * (1.0 + s.trace().abs()));
        prop_assert!(q.orthonormality_error() <= 1e-10);
    }

    #[test]
    fn eigen_shift(seed in any::<u64>(), d in 1usize..20, c in -50.0f64..50.0) {
        let s = symmetric(seed, d);
        let shifted = s.add_scaled(&Matrix::identity(d), c).unwrap();
        let a = sym_eig(&s).unwrap();
        let b = sym_eig(&shifted).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x + c - y).abs() <= 1e-9 * (1.0 + c.abs() + x.abs()));
        }
        let gap = a.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 1e-6);
        for col in 0..d {
            let dot: f64 = a.vector(col).iter().zip(b.vector(col)).map(|(x, y)| x * y).sum();
            prop_assert!((dot.abs() - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn pencil_with_identity_is_plain_eig(seed in any::<u64>(), d in 1usize..15) {
        let s = symmetric(seed, d);
        let g = gen_sym_eig(&s, &Matrix::identity(d), 0.0).unwrap();
        let e = sym_eig(&s).unwrap();
        for (x, y) in g.values.iter().zip(e.values.iter().rev()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn normalization_inverts(seed in any::<u64>(), n in 2usize..40, d in 1usize..8) {
        let x = uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed), n, d).scaled(1e3);
        let norm = Normalization::fit(&x).unwrap();
        let back = norm.invert(&norm.apply(&x).unwrap()).unwrap();
        for (a, b) in x.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn split_partitions_rows(
        seed in any::<u64>(),
        n in 6usize..300,
        classes in 2usize..5,
        fraction in 0.1f64..0.9,
        cap in 4usize..400,
    ) {
        let labels: Vec<usize> = (0..n).map(|i| i % classes + 1).collect();
        let mut spec = SplitSpec::new(fraction, seed, 0);
        spec.max_train = cap.max(classes);
        let s = split_indices(&labels, classes, &spec).unwrap();
        prop_assert!(s.train.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.test.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.train.iter().all(|i| s.test.binary_search(i).is_err()));
        prop_assert!(s.train.len() <= spec.max_train);
        let mut present = vec![false; classes];
        for &i in &s.train {
            present[labels[i] - 1] = true;
        }
        prop_assert!(present.iter().all(|&p| p));
        if s.train.len() < spec.max_train {
            prop_assert_eq!(s.train.len() + s.test.len(), n);
        }
    }

    #[test]
    fn per_class_sampling_is_exact(seed in any::<u64>(), classes in 1usize..6, per in 1usize..4, extra in 0usize..10) {
        let labels: Vec<usize> = (0..classes * (per + extra)).map(|i| i % classes + 1).collect();
        let s = sample_per_class(&labels, classes, per, seed, 3).unwrap();
        prop_assert_eq!(s.train.len(), per * classes);
        prop_assert_eq!(s.train.len() + s.test.len(), labels.len());
        for j in 1..=classes {
            prop_assert_eq!(s.train.iter().filter(|&&i| labels[i] == j).count(), per);
        }
    }

    #[test]
    fn local_gaussian_translation(seed in any::<u64>(), k in 2usize..8, d in 1usize..5, shift in -100.0f64..100.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let pts = uniform_matrix(&mut r, k, d);
        let anchor: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let moved = Matrix::from_vec(k, d, pts.as_slice().iter().map(|v| v + shift).collect()).unwrap();
        let moved_anchor: Vec<f64> = anchor.iter().map(|v| v + shift).collect();
        let a = fit_local_gaussian(&pts, &anchor).unwrap();
        let b = fit_local_gaussian(&moved, &moved_anchor).unwrap();
        prop_assert!((a.var - b.var).abs() <= 1e-9 * (1.0 + shift.abs()) * a.var.max(1e-3));
        for c in 0..d {
            prop_assert!((a.mu[c] + shift - b.mu[c]).abs() <= 1e-9 * (1.0 + shift.abs()));
            prop_assert!((a.delta[c] - b.delta[c]).abs() <= 1e-9 * (1.0 + shift.abs()));
        }
    }

    #[test]
    fn knn_ignores_rotations(seed in any::<u64>(), n in 5usize..40, d in 1usize..6) {
        let ds = dataset(seed, n, d, 3, 1);
        let q = random_basis(seed ^ 1, d, d);
        let rotated = ds.features().matmul(&q).unwrap();
        let queries = uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed ^ 2), 10, d).scaled(3.0);
        let rq = queries.matmul(&q).unwrap();
        for i in 0..10 {
            prop_assert_eq!(
                knn_classify(ds.features(), ds.labels(), queries.row(i), 3).unwrap(),
                knn_classify(&rotated, ds.labels(), rq.row(i), 3).unwrap()
            );
        }
    }

    #[test]
    fn duplicated_points_are_perfect_for_one_nn(seed in any::<u64>(), n in 3usize..30, d in 1usize..5) {
        let ds = dataset(seed, n, d, 3, 1);
        let both = ds.concat(&ds).unwrap();
        prop_assert_eq!(loo_accuracy(both.features(), both.labels(), 1).unwrap(), 1.0);
    }

    #[test]
    fn pca_variance_bookkeeping(seed in any::<u64>(), n in 3usize..40, d in 1usize..8) {
        let x = uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed), n, d);
        let full = pca_fit(&x, d).unwrap();
        let total = covariance(&x).unwrap().trace();
        let sum: f64 = full.eigenvalues().iter().sum();
        prop_assert!((sum - total).abs() <= 1e-8 * (1.0 + total));
        prop_assert!(full.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        let mean: Vec<f64> = (0..d).map(|c| x.column(c).iter().sum::<f64>() / n as f64).collect();
        let mut previous = f64::INFINITY;
        for l in 1..=d {
            let b = full.truncate(l).unwrap();
            let mut err = 0.0;
            for r in 0..n {
                let centred: Vec<f64> = x.row(r).iter().zip(&mean).map(|(v, m)| v - m).collect();
                let z = b.project_point(&centred).unwrap();
                let back = b.basis().mul_vec(&z).unwrap();
                err += centred.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
            prop_assert!(err <= previous + 1e-9);
            previous = err;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fda_pencil_residual(seed in any::<u64>(), n in 12usize..50, d in 2usize..7, classes in 2usize..5) {
        let ds = dataset(seed, n, d, classes, 2);
        let s = fda_scatter(&ds).unwrap();
        let ridge = default_ridge(&s.within);
        let e = gen_sym_eig(&s.between, &s.within, ridge).unwrap();
        let w = s.within.add_scaled(&Matrix::identity(d), ridge).unwrap();
        for c in 0..d {
            let v = e.vectors.column(c);
            let lhs = s.between.mul_vec(&v).unwrap();
            let rhs = w.mul_vec(&v).unwrap();
            let res = lhs.iter().zip(&rhs).map(|(a, b)| (a - e.values[c] * b).abs()).fold(0.0, f64::max);
            prop_assert!(res <= 1e-7 * (1.0 + s.between.norm_inf()));
        }
        let l = (classes - 1).min(d);
        prop_assert!(fda_fit(&ds, l).unwrap().basis().orthonormality_error() <= 1e-8);
    }

    #[test]
    fn scatter_spectrum_and_gamma(seed in any::<u64>(), n in 10usize..40, d in 1usize..6, gamma in 0.0f64..1.5) {
        let ds = dataset(seed, n, d, 2, 3);
        let priors = class_priors(&ds);
        let pair = scatter_matrices(&ds, &NeighborhoodConfig::new(3, true).unwrap(), &priors).unwrap();
        let m = pair.combined(gamma);
        prop_assert!(m.asymmetry() <= 1e-12 * (1.0 + m.max_abs()));
        let e = sym_eig(&m).unwrap();
        let expect = pair.v.trace() - gamma * pair.a.trace();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - expect).abs() <= 1e-8 * (1.0 + pair.v.trace() + gamma * pair.a.trace()));

        let l = 1 + (seed as usize) % d;
        let b = ldg_solve(&pair, gamma, l, 3).unwrap();
        let slope = -half_trace(&pair.a, b.basis());
        prop_assert!(slope <= 1e-12);
        for g in [0.0, 0.5, 2.0] {
            let o = ldg_objective(&b, &pair, g).unwrap();
            let affine = half_trace(&pair.v, b.basis()) + g * slope;
            prop_assert!((o - affine).abs() <= 1e-9 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn objective_rotation_and_optimality(seed in any::<u64>(), n in 10usize..40, d in 2usize..7) {
        let ds = dataset(seed, n, d, 3, 3);
        let priors = class_priors(&ds);
        let pair = scatter_matrices(&ds, &NeighborhoodConfig::new(3, true).unwrap(), &priors).unwrap();
        let l = 1 + (seed as usize) % d;
        let b = ldg_solve(&pair, 0.6, l, 3).unwrap();
        let o = ldg_objective(&b, &pair, 0.6).unwrap();
        let q = random_basis(seed ^ 9, l, l);
        let rotated = Projection::new(b.basis().matmul(&q).unwrap(), vec![0.0; l], Method::Ldg).unwrap();
        prop_assert!((ldg_objective(&rotated, &pair, 0.6).unwrap() - o).abs() <= 1e-9 * (1.0 + o.abs()));
        for t in 0..5u64 {
            let other = Projection::new(random_basis(seed ^ (100 + t), d, l), vec![0.0; l], Method::Ldg).unwrap();
            prop_assert!(o <= ldg_objective(&other, &pair, 0.6).unwrap() + 1e-8 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn map_loo_error_matches_naive_oracle(seed in any::<u64>(), n in 9usize..50, d in 1usize..5, k in 2usize..6) {
        let ds = dataset(seed, n, d, 3, 3);
        let priors = class_priors(&ds);
        let l = 1 + (seed as usize) % d;
        let b = Projection::new(random_basis(seed ^ 5, d, l), vec![0.0; l], Method::Ldg).unwrap();
        let cfg = NeighborhoodConfig::new(k, true).unwrap();
        let got = map_loo_error(&b, &ds, &cfg, &priors).unwrap();
        prop_assert!(got <= n);
        prop_assert_eq!(got, naive_map_errors(&ds, b.basis(), k, &priors));
        prop_assert!(objective_f(&b, &ds, &cfg, &priors).unwrap() >= 0.0);
    }

    #[test]
    fn qda_relabel_equivariance(seed in any::<u64>(), n in 12usize..40, d in 1usize..4) {
        let ds = dataset(seed, n, d, 3, 3);
        let mut perm = [1, 2, 3];
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 3));
        let renamed = LabeledDataset::new(
            ds.features().clone(),
            ds.labels().iter().map(|&y| perm[y - 1]).collect(),
            3,
        )
        .unwrap();
        let cfg = NeighborhoodConfig::new(3, false).unwrap();
        let queries = uniform_matrix(&mut ChaCha8Rng::seed_from_u64(seed ^ 4), 8, d).scaled(3.0);
        for i in 0..8 {
            let a = local_qda_classify(&ds, queries.row(i), &cfg, &class_priors(&ds)).unwrap();
            let b = local_qda_classify(&renamed, queries.row(i), &cfg, &class_priors(&renamed)).unwrap();
            prop_assert_eq!(perm[a - 1], b);
        }
    }

    #[test]
    fn transfer_combination_is_linear(seed in any::<u64>(), alpha in 0.0f64..1.0, gamma in 0.0f64..1.0) {
        let source = dataset(seed, 24, 3, 2, 4);
        let target = dataset(seed ^ 7, 6, 3, 2, 2);
        let pair = DomainPair::new(target, source).unwrap();
        let (t, s) = transfer_scatter(&pair, 3, &pair.pooled_priors()).unwrap();
        let m = transfer_matrix(&t, &s, alpha, gamma);
        let expect = t.combined(gamma).scaled(1.0 - alpha).add_scaled(&s.combined(gamma), alpha).unwrap();
        for (x, y) in m.as_slice().iter().zip(expect.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
        prop_assert_eq!(transfer_matrix(&t, &s, 0.0, gamma), t.combined(gamma));
    }

    #[test]
    fn dimension_scan_stays_in_range(seed in any::<u64>(), n in 12usize..40, d in 1usize..6) {
        let ds = dataset(seed, n, d, 2, 3);
        let p = pca_fit(ds.features(), d).unwrap();
        let s = select_dimension(&ds, &p, &CvProtocol::default()).unwrap();
        prop_assert!(s.dim >= 1 && s.dim <= p.output_dim());
    }
}

/// Per point: rebuild every class neighbourhood by sorting, score the
/// mapped Gaussians directly, count points whose own class is beaten.
fn naive_map_errors(ds: &LabeledDataset, b: &Matrix, k: usize, priors: &[f64]) -> usize {
    let d = ds.dim();
    let l = b.cols() as f64;
    let mut errors = 0;
    for i in 0..ds.len() {
        let x = ds.row(i);
        let mut scores = Vec::new();
        for j in 1..=ds.classes() {
            let mut cand: Vec<(f64, usize)> = (0..ds.len())
                .filter(|&r| r != i && ds.label(r) == j)
                .map(|r| (ds.row(r).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), r))
                .collect();
            cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let used = k.min(cand.len());
            if used < 2 {
                scores.push(f64::NEG_INFINITY);
                continue;
            }
            let mu: Vec<f64> = (0..d)
                .map(|c| cand[..used].iter().map(|&(_, r)| ds.row(r)[c]).sum::<f64>() / used as f64)
                .collect();
            let ss: f64 = cand[..used]
                .iter()
                .map(|&(_, r)| ds.row(r).iter().zip(&mu).map(|(a, m)| (a - m) * (a - m)).sum::<f64>())
                .sum();
            let var = (ss / (used * d) as f64).max(1e-12);
            let mut r2 = 0.0;
            for col in 0..b.cols() {
                let z: f64 = (0..d).map(|c| b.get(c, col) * (mu[c] - x[c])).sum();
                r2 += z * z;
            }
            let ln2pi = (2.0 * std::f64::consts::PI).ln();
            scores.push(priors[j - 1].ln() - 0.5 * l * (ln2pi + var.ln()) - r2 / (2.0 * var));
        }
        let own = scores[ds.label(i) - 1];
        if scores.iter().any(|&s| s > own) {
            errors += 1;
        }
    }
    errors
}

#[test]
fn eigen_reconstruction_at_d_200() {
    let s = symmetric(42, 200);
    let e = sym_eig(&s).unwrap();
    let rebuilt = e
        .vectors
        .matmul(&Matrix::from_diag(&e.values))
        .unwrap()
        .matmul(&e.vectors.transpose())
        .unwrap();
    assert!(max_abs_diff(&rebuilt, &s) <= 1e-8 * (1.0 + s.norm_inf()));
}

#[test]
fn local_qda_separates_two_gaussians() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let draw = |r: &mut ChaCha8Rng, n: usize, shift: f64| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| {
                // sum of uniforms is close enough to Gaussian here
                let g = |r: &mut ChaCha8Rng| (0..6).map(|_| r.random_range(-1.0..1.0)).sum::<f64>() / 1.4;
                [g(r) + shift, g(r)]
            })
            .collect()
    };
    let mut rows = draw(&mut r, 100, -3.0);
    rows.extend(draw(&mut r, 100, 3.0));
    let labels: Vec<usize> = (0..200).map(|i| if i < 100 { 1 } else { 2 }).collect();
    let train = LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap();
    let mut test_rows = draw(&mut r, 100, -3.0);
    test_rows.extend(draw(&mut r, 100, 3.0));
    let cfg = NeighborhoodConfig::new(16, false).unwrap();
    let correct = test_rows
        .iter()
        .enumerate()
        .filter(|(i, x)| {
            let want = if *i < 100 { 1 } else { 2 };
            local_qda_classify(&train, &x[..], &cfg, &[0.5, 0.5]).unwrap() == want
        })
        .count();
    assert!(correct >= 190, "{correct} / 200");
}

#[test]
fn k_selection_is_repeatable() {
    let ds = dataset(3, 120, 4, 3, 10);
    let protocol = CvProtocol::default();
    let a = select_k_gauss(&ds, &[4, 8, 16, 32, 64], &protocol).unwrap();
    let b = select_k_gauss(&ds, &[4, 8, 16, 32, 64], &protocol).unwrap();
    assert_eq!(a, b);
    assert!(a.k <= 16, "grid capped by smallest fold class count");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// At γ = 1 the scatter form equals the per-class expansion
    /// `½ Σ_i [(1 − p(y_i))/σ²_{i,y_i}·‖BᵀΔ_{i,y_i}‖² − Σ_{j≠y_i} p(j)/σ²_{ij}·‖BᵀΔ_ij‖²]`.
    #[test]
    fn unit_gamma_matches_per_class_expansion(seed in any::<u64>(), n in 12usize..40, d in 1usize..5) {
        let ds = dataset(seed, n, d, 3, 3);
        let priors = class_priors(&ds);
        let pair = scatter_matrices(&ds, &NeighborhoodConfig::new(3, true).unwrap(), &priors).unwrap();
        let l = 1 + (seed as usize) % d;
        let b = Projection::new(random_basis(seed ^ 11, d, l), vec![0.0; l], Method::Ldg).unwrap();
        let scatter_form = ldg_objective(&b, &pair, 1.0).unwrap();

        let mut model = ldg_core::localgauss::LocalGaussianModel::new(&ds, 3).unwrap();
        let mut expansion = 0.0;
        for i in 0..ds.len() {
            let y = ds.label(i);
            for j in 1..=3 {
                let g = model.fit(ds.row(i), j, Some(i)).unwrap();
                let z = b.project_point(&g.delta).unwrap();
                let r2: f64 = z.iter().map(|v| v * v).sum();
                let w = if j == y { 1.0 - priors[j - 1] } else { -priors[j - 1] };
                expansion += 0.5 * w * r2 / g.var;
            }
        }
        prop_assert!((scatter_form - expansion).abs() <= 1e-9 * (1.0 + expansion.abs()));
    }
}
