use nalgebra::{DMatrix, DVector};
use rand::Rng;
use tck_core::svm::{train_dense, SvmConfig};
use tck_core::synth::rng;

/// Global optimum of the dual by enumerating every split of the variables
/// into lower-bound, upper-bound and free sets.
fn exhaustive_dual(k: &[f64], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let objective = |a: &[f64]| {
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * a[i] * a[j] * q(i, j);
            }
        }
        v - a.iter().sum::<f64>()
    };
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut x = code;
        for s in state.iter_mut() {
            *s = (x % 3) as u8;
            x /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut a: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            // stationarity on the free set plus the equality constraint
            let m = free.len();
            let mut lhs = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut rhs = DVector::<f64>::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    lhs[(r, s)] = q(i, j);
                }
                lhs[(r, m)] = y[i];
                lhs[(m, r)] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|j| state[*j] == 1).map(|j| q(i, j) * c).sum::<f64>();
            }
            rhs[m] = -(0..n).filter(|j| state[*j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = lhs.lu().solve(&rhs) else { continue };
            if free.iter().enumerate().any(|(r, _)| !(sol[r] > 0.0 && sol[r] < c)) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
        }
        let balance: f64 = a.iter().zip(y).map(|(ai, yi)| ai * yi).sum();
        if balance.abs() > 1e-9 {
            continue;
        }
        best = best.min(objective(&a));
    }
    best
}

fn rbf_problem(seed: u64, n: usize) -> (Vec<f64>, Vec<i8>) {
    let mut r = rng(seed);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
    let mut labels: Vec<i8> = points.iter().map(|p| if p[0] + 0.3 * p[1] > 0.0 { 1 } else { -1 }).collect();
    labels[0] = 1;
    labels[1] = -1;
    // a few flipped labels make the problem non-separable
    if n > 4 {
        labels[n - 1] = -labels[n - 1];
    }
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d = (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2);
            k[i * n + j] = (-d).exp();
        }
    }
    (k, labels)
}

#[test]
fn smo_reaches_exhaustive_optimum() {
    for seed in 0..12 {
        for &c in &[0.1, 1.0, 10.0] {
            let n = 4 + (seed as usize % 4);
            let (k, labels) = rbf_problem(seed, n);
            let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
            let model = train_dense(&k, &labels, &SvmConfig::new(c)).unwrap();
            let got = model.objective(|i, j| k[i * n + j]);
            let best = exhaustive_dual(&k, &y, c);
            assert!(
                (got - best).abs() <= 1e-3 * best.abs().max(1.0),
                "seed {seed} C {c}: smo {got} vs exhaustive {best}"
            );
            for &a in &model.alphas {
                assert!((0.0..=c).contains(&a), "{a} outside [0, {c}]");
            }
            let balance: f64 = model.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
            assert!(balance.abs() < 1e-9);
        }
    }
}

#[test]
fn smo_f32_matches_f64() {
    let (k, labels) = rbf_problem(3, 6);
    let k32: Vec<f32> = k.iter().map(|&v| v as f32).collect();
    let a = train_dense(&k, &labels, &SvmConfig::new(1.0)).unwrap();
    let b = train_dense(&k32, &labels, &SvmConfig::new(1.0f32)).unwrap();
    for (x, y) in a.alphas.iter().zip(&b.alphas) {
        assert!((x - f64::from(*y)).abs() < 1e-2);
    }
}
