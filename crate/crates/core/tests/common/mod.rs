//! Dense reference implementations used to check the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub const PINV_CUTOFF: f64 = 1e-10;

/// Moore-Penrose pseudo-inverse of a symmetric positive semidefinite
/// matrix, from its eigendecomposition (which is its SVD). nalgebra's
/// general SVD loses accuracy on rank-deficient inputs with close
/// singular values, so it is not used here.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!((a - a.transpose()).amax() < 1e-12 * a.amax().max(1.0), "pinv oracle expects a symmetric matrix");
    let eig = SymmetricEigen::new(a.clone());
    let inv = eig.eigenvalues.map(|l| if l > PINV_CUTOFF { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

/// Least squares on the played basis columns: `(A A^T)^+ A r`, where the
/// columns of `A` are the played actions.
pub fn explore_oracle(u: &DMatrix<f64>, plays: &[(usize, f64)]) -> DVector<f64> {
    let d = u.nrows();
    let mut a = DMatrix::zeros(d, plays.len());
    let mut r = DVector::zeros(plays.len());
    for (i, &(c, reward)) in plays.iter().enumerate() {
        a.set_column(i, &u.column(c));
        r[i] = reward;
    }
    pinv(&(&a * a.transpose())) * (&a * r)
}

/// `V = lambda P + sum P a a^T P` and `theta = V^+ sum r P a`, all in `R^d`.
pub fn dense_ridge(u: &DMatrix<f64>, actions: &[DVector<f64>], rewards: &[f64], lambda: f64) -> (DVector<f64>, DMatrix<f64>) {
    let p = u * u.transpose();
    let mut v = &p * lambda;
    let mut rhs = DVector::zeros(u.nrows());
    for (a, &r) in actions.iter().zip(rewards) {
        let pa = &p * a;
        v += &pa * pa.transpose();
        rhs += pa * r;
    }
    let v_pinv = pinv(&v);
    (&v_pinv * rhs, v_pinv)
}

/// Projected UCB score in the ambient space: `<theta, a> + beta sqrt(a^T P V^+ P a)`.
pub fn dense_ucb(theta: &DVector<f64>, v_pinv: &DMatrix<f64>, p: &DMatrix<f64>, a: &DVector<f64>, beta: f64) -> f64 {
    let pa = p * a;
    theta.dot(a) + beta * (pa.dot(&(v_pinv * &pa))).max(0.0).sqrt()
}

/// `max <theta, z>` over the 2-d ellipse `(theta - c)^T S (theta - c) = beta^2`,
/// by scanning the boundary.
pub fn ellipse_max(center: &DVector<f64>, sigma: &DMatrix<f64>, z: &DVector<f64>, beta: f64) -> f64 {
    assert_eq!(center.len(), 2);
    let eig = SymmetricEigen::new(sigma.clone());
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let steps = 400_000;
    let mut best = f64::NEG_INFINITY;
    for s in 0..steps {
        let phi = std::f64::consts::TAU * s as f64 / steps as f64;
        let w = DVector::from_vec(vec![beta * phi.cos(), beta * phi.sin()]);
        best = best.max((center + &inv_sqrt * w).dot(z));
    }
    best
}

/// Confidence radius written out directly.
pub fn beta_oracle(delta: f64, m: usize, lambda: f64, n: u64, s: f64) -> f64 {
    let mf = m as f64;
    s * lambda.sqrt() + (2.0 * (1.0 / delta).ln() + mf * (1.0 + n as f64 / (lambda * mf)).ln()).sqrt()
}

/// `E[b^{2 tau}]` for PULL spreading from `source`, by propagating the
/// exact distribution over informed sets.
pub fn rumor_dp_moment(rows: &[Vec<f64>], source: usize, b: f64) -> (f64, f64) {
    let n = rows.len();
    assert!(n <= 12);
    let full = (1usize << n) - 1;
    let mut mass = vec![0.0; 1 << n];
    mass[1 << source] = 1.0;
    let (mut moment, mut mean_tau) = (0.0, 0.0);
    if n == 1 {
        return (1.0, 0.0);
    }
    for round in 1..100_000u64 {
        let mut next = vec![0.0; 1 << n];
        for (set, &p) in mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let uninformed: Vec<usize> = (0..n).filter(|i| set & (1 << i) == 0).collect();
            let q: Vec<f64> = uninformed
                .iter()
                .map(|&i| (0..n).filter(|j| set & (1 << j) != 0).map(|j| rows[i][j]).sum())
                .collect();
            for pick in 0..(1usize << uninformed.len()) {
                let mut prob = p;
                let mut new = set;
                for (bit, (&i, &qi)) in uninformed.iter().zip(&q).enumerate() {
                    if pick & (1 << bit) != 0 {
                        prob *= qi;
                        new |= 1 << i;
                    } else {
                        prob *= 1.0 - qi;
                    }
                }
                next[new] += prob;
            }
        }
        let done = next[full];
        moment += done * b.powf(2.0 * round as f64);
        mean_tau += done * round as f64;
        next[full] = 0.0;
        mass = next;
        if mass.iter().sum::<f64>() < 1e-16 {
            break;
        }
    }
    (moment, mean_tau)
}

/// Welford mean and standard error.
pub fn welford(xs: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = xs.len() as f64;
    (mean, (m2 / (n - 1.0) / n).sqrt())
}

pub fn assert_close(a: f64, b: f64, rel: f64, what: &str) {
    let scale = a.abs().max(b.abs()).max(1.0);
    assert!((a - b).abs() <= rel * scale, "{what}: {a} vs {b}");
}
