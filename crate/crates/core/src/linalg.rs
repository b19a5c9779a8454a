//! Small dense linear algebra for subspaces.
//!
//! Subspaces are carried as `d x m` orthonormal bases. Projectors are never
//! formed densely; everything LinUCB-related lives in the `m`-dimensional
//! coordinates `U^T a`, where the rank-deficient `d x d` design matrix
//! `P (A A^T + lambda I) P` becomes `U Sigma U^T` with `Sigma` invertible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Max-entry tolerance on `U^T U - I`.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal `d x m` basis of an `m`-dimensional subspace of `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    columns: DMatrix<f64>,
}

impl Basis {
    /// Wrap a matrix whose columns must already be orthonormal.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (d, m) = columns.shape();
        if m == 0 || m > d {
            return Err(Error::InvalidDimension(format!(
                "basis must have 1 <= m <= d, got d={d}, m={m}"
            )));
        }
        let basis = Basis { columns };
        let err = basis.orthonormality_error();
        if !(err <= ORTHONORMAL_TOL) {
            return Err(Error::InvalidDimension(format!(
                "columns are not orthonormal: max |U^T U - I| = {err:e}"
            )));
        }
        Ok(basis)
    }

    /// Basis spanned by the listed standard unit vectors of `R^d`.
    pub fn standard(d: usize, axes: &[usize]) -> Result<Self> {
        let mut cols = DMatrix::zeros(d, axes.len());
        for (c, &axis) in axes.iter().enumerate() {
            if axis >= d {
                return Err(Error::InvalidDimension(format!("axis {axis} out of range for d={d}")));
            }
            cols[(axis, c)] = 1.0;
        }
        Basis::new(cols)
    }

    pub fn dim_ambient(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim_sub(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn column(&self, n: usize) -> DVector<f64> {
        self.columns.column(n).into_owned()
    }

    /// `max |U^T U - I_m|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.columns.tr_mul(&self.columns);
        let m = gram.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Subspace coordinates `U^T x`.
    pub fn coords(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_ambient(x.len())?;
        Ok(self.columns.tr_mul(x))
    }

    /// Coordinates of every column of `actions` (a `d x n` matrix).
    pub fn coords_of_columns(&self, actions: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_ambient(actions.nrows())?;
        Ok(self.columns.tr_mul(actions))
    }

    /// `U y` for `y` in subspace coordinates.
    pub fn lift(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.dim_sub() {
            return Err(Error::InvalidDimension(format!(
                "coordinate vector has length {}, basis has m={}",
                y.len(),
                self.dim_sub()
            )));
        }
        Ok(&self.columns * y)
    }

    fn check_ambient(&self, len: usize) -> Result<()> {
        if len != self.dim_ambient() {
            return Err(Error::InvalidDimension(format!(
                "vector has length {len}, basis lives in R^{}",
                self.dim_ambient()
            )));
        }
        Ok(())
    }
}

/// Orthonormal basis of a uniformly random `m`-dimensional subspace.
///
/// Draws a `d x m` standard Gaussian matrix `G = W S V^T` and returns the
/// polar factor `W V^T`, which is Haar-distributed on the Stiefel manifold.
pub fn random_orthonormal_basis<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Result<Basis> {
    if m == 0 || m >= d {
        return Err(Error::InvalidDimension(format!("need 1 <= m < d, got d={d}, m={m}")));
    }
    let g = DMatrix::<f64>::from_fn(d, m, |_, _| rng.sample(StandardNormal));
    let svd = g.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(Error::NumericalDegeneracy("SVD did not return singular vectors".into()));
    };
    Basis::new(u * v_t)
}

/// Orthogonal projection `U (U^T x)` onto `span(U)`.
pub fn project(basis: &Basis, x: &DVector<f64>) -> Result<DVector<f64>> {
    let y = basis.coords(x)?;
    basis.lift(&y)
}

/// Largest singular value of `U1^T U2`: the cosine of the smallest
/// principal angle. Equals 1 exactly when the subspaces share a direction.
pub fn subspace_overlap(b1: &Basis, b2: &Basis) -> Result<f64> {
    if b1.dim_ambient() != b2.dim_ambient() {
        return Err(Error::InvalidDimension(format!(
            "ambient dimensions differ: {} vs {}",
            b1.dim_ambient(),
            b2.dim_ambient()
        )));
    }
    let cross = b1.columns.tr_mul(&b2.columns);
    let sv = cross.singular_values();
    Ok(sv.iter().copied().fold(0.0, f64::max).clamp(0.0, 1.0))
}

/// Explore-phase statistics of one subspace: reward sums and play counts
/// per basis column.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploreStats {
    reward_sum: Vec<f64>,
    count: Vec<u64>,
    total: u64,
}

impl ExploreStats {
    pub fn new(m: usize) -> Self {
        ExploreStats {
            reward_sum: vec![0.0; m],
            count: vec![0; m],
            total: 0,
        }
    }

    pub fn dim_sub(&self) -> usize {
        self.count.len()
    }

    pub fn total_count(&self) -> u64 {
        self.total
    }

    pub fn per_basis_count(&self) -> &[u64] {
        &self.count
    }

    pub fn per_basis_reward_sum(&self) -> &[f64] {
        &self.reward_sum
    }

    /// Column the round-robin schedule plays next.
    pub fn next_column(&self) -> usize {
        (self.total % self.count.len() as u64) as usize
    }

    pub fn record(&mut self, column: usize, reward: f64) -> Result<()> {
        if column >= self.count.len() {
            return Err(Error::InvalidDimension(format!(
                "basis column {column} out of range for m={}",
                self.count.len()
            )));
        }
        self.reward_sum[column] += reward;
        self.count[column] += 1;
        self.total += 1;
        Ok(())
    }

    /// `max(count) - min(count) <= 1`, which round-robin play maintains.
    pub fn is_balanced(&self) -> bool {
        let max = self.count.iter().copied().max().unwrap_or(0);
        let min = self.count.iter().copied().min().unwrap_or(0);
        max - min <= 1
    }

    fn column_means(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.reward_sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
    }
}

/// Least-squares estimate of `P theta*` from explore samples:
/// `U ybar` with `ybar_n` the mean reward of basis column `n`.
pub fn explore_estimate(stats: &ExploreStats, basis: &Basis) -> Result<DVector<f64>> {
    check_explore_dims(stats, basis)?;
    let mut means = DVector::zeros(stats.dim_sub());
    for (n, mean) in stats.column_means().enumerate() {
        means[n] = mean.ok_or_else(|| {
            Error::InsufficientSamples(format!("basis column {n} has never been explored"))
        })?;
    }
    basis.lift(&means)
}

/// Minimum-norm least-squares estimate, defined for any explore design:
/// columns never played contribute nothing. Coincides with
/// [`explore_estimate`] once every column has at least one sample.
pub fn explore_estimate_min_norm(stats: &ExploreStats, basis: &Basis) -> Result<DVector<f64>> {
    check_explore_dims(stats, basis)?;
    let means = DVector::from_iterator(stats.dim_sub(), stats.column_means().map(|m| m.unwrap_or(0.0)));
    basis.lift(&means)
}

fn check_explore_dims(stats: &ExploreStats, basis: &Basis) -> Result<()> {
    if stats.dim_sub() != basis.dim_sub() {
        return Err(Error::InvalidDimension(format!(
            "explore stats have m={}, basis has m={}",
            stats.dim_sub(),
            basis.dim_sub()
        )));
    }
    Ok(())
}

/// Regularized design statistics for LinUCB, in `p`-dimensional
/// coordinates (`p = m` for projected play, `p = d` for ambient OFUL).
///
/// `gram = lambda I + sum z z^T`, `moment = sum z r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinUcbStats {
    gram: DMatrix<f64>,
    moment: DVector<f64>,
    count: u64,
    lambda: f64,
}

impl LinUcbStats {
    pub fn new(p: usize, lambda: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidDimension("LinUCB dimension must be positive".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(LinUcbStats {
            gram: DMatrix::identity(p, p) * lambda,
            moment: DVector::zeros(p),
            count: 0,
            lambda,
        })
    }

    /// Assemble stats from raw parts. Positive definiteness is not checked
    /// here; scoring reports it.
    pub fn from_parts(gram: DMatrix<f64>, moment: DVector<f64>, count: u64, lambda: f64) -> Result<Self> {
        if !gram.is_square() || gram.nrows() != moment.len() {
            return Err(Error::InvalidDimension(format!(
                "gram is {}x{}, moment has length {}",
                gram.nrows(),
                gram.ncols(),
                moment.len()
            )));
        }
        Ok(LinUcbStats {
            gram,
            moment,
            count,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &DVector<f64> {
        &self.moment
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Add one play with coordinates `z` and observed `reward`.
    pub fn record_coords(&mut self, z: &[f64], reward: f64) -> Result<()> {
        let p = self.dim();
        if z.len() != p {
            return Err(Error::InvalidDimension(format!(
                "play coordinates have length {}, stats have p={p}",
                z.len()
            )));
        }
        for j in 0..p {
            let zj = z[j];
            if zj != 0.0 {
                for i in 0..p {
                    self.gram[(i, j)] += z[i] * zj;
                }
            }
            self.moment[j] += zj * reward;
        }
        self.count += 1;
        Ok(())
    }

    fn cholesky(&self) -> Result<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>> {
        self.gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NumericalDegeneracy("gram matrix is not positive definite".into()))
    }

    /// Ridge estimate `gram^{-1} moment` in coordinates.
    pub fn ridge_estimate(&self) -> Result<DVector<f64>> {
        Ok(self.cholesky()?.solve(&self.moment))
    }

    /// `|| y - theta_hat ||_gram`, the confidence-ellipsoid distance of a
    /// coordinate vector from the current estimate.
    pub fn ellipsoid_distance(&self, y: &DVector<f64>) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::InvalidDimension(format!(
                "vector has length {}, stats have p={}",
                y.len(),
                self.dim()
            )));
        }
        let diff = self.ridge_estimate()? - y;
        Ok(diff.dot(&(&self.gram * &diff)).max(0.0).sqrt())
    }

    /// Factor once, then score many actions.
    pub fn scorer(&self) -> Result<UcbScorer> {
        let chol = self.cholesky()?;
        let theta = chol.solve(&self.moment);
        let inv = chol.inverse();
        let p = self.dim();
        Ok(UcbScorer {
            p,
            theta: theta.iter().copied().collect(),
            inv: (0..p * p).map(|k| inv[(k / p, k % p)]).collect(),
        })
    }
}

/// Prepared optimistic scorer: `<theta_hat, z> + beta ||z||_{gram^{-1}}`.
#[derive(Debug, Clone)]
pub struct UcbScorer {
    p: usize,
    theta: Vec<f64>,
    // row-major gram inverse
    inv: Vec<f64>,
}

impl UcbScorer {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    #[inline]
    pub fn mean(&self, z: &[f64]) -> f64 {
        self.theta.iter().zip(z).map(|(t, x)| t * x).sum()
    }

    /// `||z||_{gram^{-1}}`.
    #[inline]
    pub fn width(&self, z: &[f64]) -> f64 {
        let p = self.p;
        let mut q = 0.0;
        for i in 0..p {
            let zi = z[i];
            if zi == 0.0 {
                continue;
            }
            let row = &self.inv[i * p..(i + 1) * p];
            let mut acc = 0.0;
            for j in 0..p {
                acc += row[j] * z[j];
            }
            q += zi * acc;
        }
        q.max(0.0).sqrt()
    }

    #[inline]
    pub fn score(&self, z: &[f64], beta: f64) -> f64 {
        self.mean(z) + beta * self.width(z)
    }
}

/// Max over the confidence ellipsoid of `<theta, P a>`, in closed form.
pub fn ucb_score(stats: &LinUcbStats, basis: &Basis, a: &DVector<f64>, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!("beta must be >= 0, got {beta}")));
    }
    check_stats_basis(stats, basis)?;
    let z = basis.coords(a)?;
    Ok(stats.scorer()?.score(z.as_slice(), beta))
}

/// Record a Projected LinUCB play of `a` with `reward` and return the
/// updated statistics.
pub fn record_linucb_play(
    mut stats: LinUcbStats,
    basis: &Basis,
    a: &DVector<f64>,
    reward: f64,
) -> Result<LinUcbStats> {
    check_stats_basis(&stats, basis)?;
    let z = basis.coords(a)?;
    stats.record_coords(z.as_slice(), reward)?;
    Ok(stats)
}

fn check_stats_basis(stats: &LinUcbStats, basis: &Basis) -> Result<()> {
    if stats.dim() != basis.dim_sub() {
        return Err(Error::InvalidDimension(format!(
            "LinUCB stats have p={}, basis has m={}",
            stats.dim(),
            basis.dim_sub()
        )));
    }
    Ok(())
}
