use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsh_core::graph::{laplacian, LaplacianMatrix, SimilarityGraph};
use zsh_core::train::{
    dcc, objective_terms, procrustes, reduced_code_objective, update_p, update_r, update_w, Hyperparameters,
    Trainer, Variables,
};

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn signs(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

fn random_laplacian(rng: &mut ChaCha8Rng, n: usize) -> LaplacianMatrix {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.4 {
                edges.push((i, j, rng.random::<f64>()));
            }
        }
    }
    laplacian(&SimilarityGraph::from_edges(n, &edges).unwrap())
}

fn p_objective(p: &DMatrix<f64>, phi: &DMatrix<f64>, b: &DMatrix<f64>, l: &DMatrix<f64>, a: f64, be: f64, g: f64) -> f64 {
    let f = p.transpose() * phi;
    a * (&f - b).norm_squared() + be * p.norm_squared() + g * (&f * l * f.transpose()).trace()
}

fn fd_gradient(x: &DMatrix<f64>, f: impl Fn(&DMatrix<f64>) -> f64) -> DMatrix<f64> {
    let h = 1e-6;
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let mut up = x.clone();
        let mut down = x.clone();
        up[(i, j)] += h;
        down[(i, j)] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

#[test]
fn p_update_is_stationary_and_beats_gradient_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let (m, n, l) = (6, 12, 3);
        let phi = gauss(&mut rng, m, n);
        let b = signs(&mut rng, l, n);
        let lap = random_laplacian(&mut rng, n);
        let ld = lap.to_dense();
        let (a, be, g) = (0.7, 0.2, 0.3);
        let p = update_p(&phi, &b, &lap, a, be, g).unwrap();
        let obj = |q: &DMatrix<f64>| p_objective(q, &phi, &b, &ld, a, be, g);

        let grad = fd_gradient(&p, obj);
        assert!(grad.amax() < 1e-6, "finite-difference gradient {}", grad.amax());

        // plain gradient descent from zero never gets below the closed form
        let mut q = DMatrix::zeros(m, l);
        for _ in 0..5000 {
            let f = q.transpose() * &phi;
            let gq = (&phi * (&f - &b).transpose()) * (2.0 * a)
                + &q * (2.0 * be)
                + (&phi * (&ld + ld.transpose()) * f.transpose()) * g;
            q -= gq * 2e-3;
        }
        assert!(obj(&p) <= obj(&q) + 1e-9);
        assert!((&p - &q).amax() < 1e-4);
    }
}

#[test]
fn w_update_matches_conjugate_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let (l, e, n) = (4, 3, 15);
        let b = signs(&mut rng, l, n);
        let y = gauss(&mut rng, e, n);
        let r = gauss(&mut rng, e, e).qr().q();
        let lambda = 0.05;
        let w = update_w(&b, &y, &r, lambda).unwrap();

        // CG on (BBᵀ + λI) w_k = (B Yᵀ R)_k, column by column
        let a = &b * b.transpose() + DMatrix::identity(l, l) * lambda;
        let rhs = &b * y.transpose() * &r;
        for k in 0..e {
            let target = rhs.column(k).into_owned();
            let mut x = nalgebra::DVector::zeros(l);
            let mut res = &target - &a * &x;
            let mut dir = res.clone();
            for _ in 0..50 {
                let rr = res.dot(&res);
                if rr < 1e-28 {
                    break;
                }
                let ad = &a * &dir;
                let step = rr / dir.dot(&ad);
                x += &dir * step;
                res -= ad * step;
                dir = &res + dir * (res.dot(&res) / rr);
            }
            assert!((w.column(k) - x).amax() < 1e-9);
        }

        let obj = |v: &DMatrix<f64>| (r.transpose() * &y - v.transpose() * &b).norm_squared() + lambda * v.norm_squared();
        assert!(fd_gradient(&w, obj).amax() < 1e-5);
    }
}

fn brute_force_row(w: &DMatrix<f64>, h: &DMatrix<f64>, b: &DMatrix<f64>, i: usize) -> Vec<f64> {
    let n = b.ncols();
    let mut best = (f64::INFINITY, vec![]);
    for mask in 0u32..(1 << n) {
        let mut trial = b.clone();
        for j in 0..n {
            trial[(i, j)] = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
        }
        let v = (w.transpose() * &trial).norm_squared() - 2.0 * trial.component_mul(h).sum();
        if v < best.0 {
            best = (v, trial.row(i).iter().copied().collect());
        }
    }
    best.1
}

#[test]
fn dcc_fixed_point_is_row_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    for _ in 0..40 {
        let n = rng.random_range(1..=8);
        let l = rng.random_range(1..=4);
        let e = rng.random_range(1..=3);
        let w = gauss(&mut rng, l, e);
        let h = gauss(&mut rng, l, n);
        let out = dcc(&w, &h, &signs(&mut rng, l, n), 100).unwrap();
        assert!(out.converged);
        for i in 0..l {
            let row: Vec<f64> = out.codes.row(i).iter().copied().collect();
            assert_eq!(row, brute_force_row(&w, &h, &out.codes, i));
            checked += 1;
        }
    }
    assert!(checked > 40);
}

#[test]
fn dcc_never_increases_reduced_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let (l, e, n) = (5, 3, 30);
        let w = gauss(&mut rng, l, e);
        let h = gauss(&mut rng, l, n);
        let b0 = signs(&mut rng, l, n);
        let out = dcc(&w, &h, &b0, 30).unwrap();
        assert!(reduced_code_objective(&w, &out.codes, &h) <= reduced_code_objective(&w, &b0, &h) + 1e-12);
    }
}

#[test]
fn procrustes_beats_random_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5 {
        let (l, e, n) = (6, 4, 20);
        let y = gauss(&mut rng, e, n);
        let w = gauss(&mut rng, l, e);
        let b = signs(&mut rng, l, n);
        let r = update_r(&y, &w, &b).unwrap();
        let m = w.transpose() * &b;
        let best = (r.transpose() * &y - &m).norm_squared();
        for _ in 0..200 {
            let q = gauss(&mut rng, e, e).qr().q();
            assert!(best <= (q.transpose() * &y - &m).norm_squared() + 1e-10);
        }
    }
}

#[test]
fn procrustes_of_orthogonal_is_itself() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let q = gauss(&mut rng, 5, 5).qr().q();
    assert!((procrustes(&q).unwrap() - &q).amax() < 1e-10);
}

fn setup(seed: u64, n: usize) -> (DMatrix<f64>, DMatrix<f64>, LaplacianMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = gauss(&mut rng, 8, n).map(|v| v.abs());
    let y = gauss(&mut rng, 3, n);
    (phi, y, random_laplacian(&mut rng, n))
}

#[test]
fn every_block_is_monotone() {
    for seed in 0..6 {
        let (phi, y, lap) = setup(seed, 40);
        let hyper = Hyperparameters { bits: 6, alpha: 0.1, gamma: 0.01, seed, ..Default::default() };
        let mut t = Trainer::new(&phi, &y, &lap, hyper).unwrap();
        let mut prev = t.objective();
        for _ in 0..8 {
            let rec = t.iterate().unwrap();
            for v in rec.after_block {
                assert!(v <= prev + 1e-9 * (1.0 + prev.abs()), "{v} > {prev}");
                prev = v;
            }
        }
    }
}

#[test]
fn objective_is_invariant_to_joint_rotation() {
    // ‖RᵀY − WᵀB‖ is unchanged by Y → QY, R → QR
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (phi, y, lap) = setup(3, 25);
    let q = gauss(&mut rng, 3, 3).qr().q();
    let p = gauss(&mut rng, 8, 4);
    let w = gauss(&mut rng, 4, 3);
    let r = gauss(&mut rng, 3, 3).qr().q();
    let b = signs(&mut rng, 4, 25);
    let hyper = Hyperparameters { bits: 4, ..Default::default() };
    let vars = Variables { projection: &p, semantic_map: &w, rotation: &r, codes: &b };
    let base = objective_terms(&vars, &phi, &y, &lap, &hyper).unwrap().total();
    let qr = &q * &r;
    let rotated = Variables { rotation: &qr, ..vars };
    let moved = objective_terms(&rotated, &phi, &(&q * &y), &lap, &hyper).unwrap().total();
    assert!((base - moved).abs() < 1e-10 * (1.0 + base));
}

#[test]
fn infinite_tolerance_stops_after_one_iteration() {
    let (phi, y, lap) = setup(5, 30);
    let hyper = Hyperparameters { bits: 4, tol: f64::INFINITY, max_iters: 10, ..Default::default() };
    let (_, trace) = Trainer::new(&phi, &y, &lap, hyper).unwrap().run().unwrap();
    assert_eq!(trace.iterations.len(), 1);
}

#[test]
fn seeded_runs_are_identical() {
    let (phi, y, lap) = setup(6, 30);
    let hyper = Hyperparameters { bits: 5, seed: 99, ..Default::default() };
    let a = Trainer::new(&phi, &y, &lap, hyper).unwrap().run().unwrap();
    let b = Trainer::new(&phi, &y, &lap, hyper).unwrap().run().unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.to_csv(), b.1.to_csv());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn update_r_is_orthogonal_with_symmetric_certificate(seed in any::<u64>(), e in 1usize..6, l in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = gauss(&mut rng, e, 10);
        let w = gauss(&mut rng, l, e);
        let b = signs(&mut rng, l, 10);
        let r = update_r(&y, &w, &b).unwrap();
        prop_assert!((r.transpose() * &r - DMatrix::identity(e, e)).amax() < 1e-10);
        let c = r.transpose() * &y * (w.transpose() * &b).transpose();
        prop_assert!((&c - c.transpose()).amax() < 1e-9 * (1.0 + c.amax()));
    }
}

