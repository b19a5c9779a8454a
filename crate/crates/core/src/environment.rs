//! Bandit environments: subspace side information, hidden parameter,
//! action set and reward noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{project, random_orthonormal_basis, subspace_overlap, Basis};

/// Pairwise overlap must stay below `1 - DISJOINT_TOL`.
pub const DISJOINT_TOL: f64 = 1e-8;
/// Gaps at or below this are treated as degenerate.
pub const GAP_TOL: f64 = 1e-10;
const ACTION_NORM_TOL: f64 = 1e-12;
const MAX_RESAMPLES: usize = 100;

/// The `K` candidate subspaces, all `m`-dimensional in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCollection {
    bases: Vec<Basis>,
}

impl SubspaceCollection {
    pub fn new(bases: Vec<Basis>) -> Result<Self> {
        let Some(first) = bases.first() else {
            return Err(Error::InvalidInstance("subspace collection is empty".into()));
        };
        let (d, m) = (first.dim_ambient(), first.dim_sub());
        for (k, b) in bases.iter().enumerate() {
            if b.dim_ambient() != d || b.dim_sub() != m {
                return Err(Error::InvalidDimension(format!(
                    "subspace {k} is {}x{}, expected {d}x{m}",
                    b.dim_ambient(),
                    b.dim_sub()
                )));
            }
        }
        let collection = SubspaceCollection { bases };
        if let Some((i, j, ov)) = collection.first_overlapping_pair()? {
            return Err(Error::InvalidInstance(format!(
                "subspaces {i} and {j} are not disjoint (overlap {ov})"
            )));
        }
        Ok(collection)
    }

    fn first_overlapping_pair(&self) -> Result<Option<(usize, usize, f64)>> {
        for i in 0..self.bases.len() {
            for j in i + 1..self.bases.len() {
                let ov = subspace_overlap(&self.bases[i], &self.bases[j])?;
                if !(ov < 1.0 - DISJOINT_TOL) {
                    return Ok(Some((i, j, ov)));
                }
            }
        }
        Ok(None)
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn basis(&self, k: usize) -> &Basis {
        &self.bases[k]
    }

    pub fn d(&self) -> usize {
        self.bases[0].dim_ambient()
    }

    pub fn m(&self) -> usize {
        self.bases[0].dim_sub()
    }

    /// Largest pairwise overlap, 0 for a single subspace.
    pub fn max_overlap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.bases.len() {
            for j in i + 1..self.bases.len() {
                worst = worst.max(subspace_overlap(&self.bases[i], &self.bases[j]).unwrap_or(1.0));
            }
        }
        worst
    }
}

/// Draw `K` independent uniformly random subspaces, resampling any
/// collection that is not pairwise disjoint.
pub fn random_subspaces<R: Rng + ?Sized>(d: usize, m: usize, k: usize, rng: &mut R) -> Result<SubspaceCollection> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if k >= 2 && 2 * m > d {
        return Err(Error::GenerationFailure(format!(
            "two {m}-dimensional subspaces of R^{d} always intersect"
        )));
    }
    for _ in 0..MAX_RESAMPLES {
        let bases = (0..k)
            .map(|_| random_orthonormal_basis(d, m, rng))
            .collect::<Result<Vec<_>>>()?;
        match SubspaceCollection::new(bases) {
            Ok(c) => return Ok(c),
            Err(Error::InvalidInstance(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailure(format!(
        "no disjoint collection of {k} subspaces after {MAX_RESAMPLES} attempts"
    )))
}

/// Unit vector drawn uniformly from the sphere in `R^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

/// `n` unit-sphere Gaussian actions as the columns of a `d x n` matrix.
pub fn random_actions<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, n);
    for c in 0..n {
        out.set_column(c, &random_unit_vector(d, rng));
    }
    out
}

/// Knobs for [`generate_instance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceParams {
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub true_index: usize,
    pub n_actions: usize,
    pub noise_std: f64,
    pub s_bound: f64,
}

/// One bandit environment shared by every agent.
///
/// The action matrix holds the random actions first, followed by the
/// `K * m` basis columns: column `c` of subspace `k` sits at
/// `n_random + k * m + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    subspaces: SubspaceCollection,
    theta_star: DVector<f64>,
    true_index: usize,
    actions: DMatrix<f64>,
    n_random: usize,
    noise_std: f64,
    s_bound: f64,
}

impl ProblemInstance {
    /// Assemble and validate an instance. Basis columns are appended to
    /// `random_actions`.
    pub fn new(
        subspaces: SubspaceCollection,
        theta_star: DVector<f64>,
        true_index: usize,
        random_actions: DMatrix<f64>,
        noise_std: f64,
        s_bound: f64,
    ) -> Result<Self> {
        let (d, m, k) = (subspaces.d(), subspaces.m(), subspaces.len());
        if true_index >= k {
            return Err(Error::InvalidInstance(format!("true_index {true_index} out of range for K={k}")));
        }
        if theta_star.len() != d {
            return Err(Error::InvalidDimension(format!("theta* has length {}, d={d}", theta_star.len())));
        }
        if random_actions.nrows() != d {
            return Err(Error::InvalidDimension(format!(
                "actions live in R^{}, d={d}",
                random_actions.nrows()
            )));
        }
        if !(noise_std >= 0.0 && noise_std.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise_std must be >= 0, got {noise_std}")));
        }
        if !(s_bound > 0.0 && s_bound.is_finite()) {
            return Err(Error::InvalidConfig(format!("s_bound must be > 0, got {s_bound}")));
        }
        let residual = (&theta_star - project(subspaces.basis(true_index), &theta_star)?).norm();
        if residual > 1e-10 {
            return Err(Error::InvalidInstance(format!(
                "theta* is {residual:e} away from subspace {true_index}"
            )));
        }
        if theta_star.norm() > s_bound * (1.0 + ACTION_NORM_TOL) {
            return Err(Error::InvalidInstance(format!(
                "||theta*|| = {} exceeds S = {s_bound}",
                theta_star.norm()
            )));
        }
        let n_random = random_actions.ncols();
        let mut actions = DMatrix::zeros(d, n_random + k * m);
        actions.columns_mut(0, n_random).copy_from(&random_actions);
        for (kk, b) in subspaces.bases().iter().enumerate() {
            actions.columns_mut(n_random + kk * m, m).copy_from(b.columns());
        }
        for (c, col) in actions.column_iter().enumerate() {
            if col.norm() > 1.0 + ACTION_NORM_TOL {
                return Err(Error::InvalidInstance(format!("action {c} has norm {} > 1", col.norm())));
            }
        }
        Ok(ProblemInstance {
            subspaces,
            theta_star,
            true_index,
            actions,
            n_random,
            noise_std,
            s_bound,
        })
    }

    pub fn subspaces(&self) -> &SubspaceCollection {
        &self.subspaces
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn true_index(&self) -> usize {
        self.true_index
    }

    /// `d x n` matrix of all actions.
    pub fn actions(&self) -> &DMatrix<f64> {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.ncols()
    }

    pub fn n_random_actions(&self) -> usize {
        self.n_random
    }

    pub fn action(&self, idx: usize) -> DVector<f64> {
        self.actions.column(idx).into_owned()
    }

    /// Index of column `c` of subspace `k` in the action matrix.
    pub fn basis_action_index(&self, k: usize, c: usize) -> usize {
        self.n_random + k * self.subspaces.m() + c
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn s_bound(&self) -> f64 {
        self.s_bound
    }

    pub fn d(&self) -> usize {
        self.subspaces.d()
    }

    pub fn m(&self) -> usize {
        self.subspaces.m()
    }

    pub fn k(&self) -> usize {
        self.subspaces.len()
    }

    /// Same instance with a fresh draw of the random actions; basis
    /// columns are kept.
    pub fn with_resampled_actions<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        ProblemInstance::new(
            self.subspaces.clone(),
            self.theta_star.clone(),
            self.true_index,
            random_actions(self.d(), self.n_random, rng),
            self.noise_std,
            self.s_bound,
        )
    }
}

/// Build an instance the way the experiments do: random subspaces, `theta*`
/// the projection of a standard Gaussian onto the true subspace (rescaled
/// to norm at most `s_bound`), `n_actions` random unit actions plus every
/// basis column.
pub fn generate_instance<R: Rng + ?Sized>(p: &InstanceParams, rng: &mut R) -> Result<ProblemInstance> {
    if p.m == 0 || p.m >= p.d {
        return Err(Error::InvalidConfig(format!("need 1 <= m < d, got d={}, m={}", p.d, p.m)));
    }
    if p.true_index >= p.k {
        return Err(Error::InvalidConfig(format!(
            "true_index {} out of range for K={}",
            p.true_index, p.k
        )));
    }
    let subspaces = random_subspaces(p.d, p.m, p.k, rng)?;
    let theta_star = loop {
        let g = DVector::<f64>::from_fn(p.d, |_, _| rng.sample(StandardNormal));
        let t = project(subspaces.basis(p.true_index), &g)?;
        let norm = t.norm();
        if norm > 0.0 {
            break if norm > p.s_bound { t * (p.s_bound / norm) } else { t };
        }
    };
    let acts = random_actions(p.d, p.n_actions, rng);
    ProblemInstance::new(subspaces, theta_star, p.true_index, acts, p.noise_std, p.s_bound)
}

/// Noiseless reward `<a, theta*>`.
pub fn mean_reward(instance: &ProblemInstance, a: &DVector<f64>) -> f64 {
    a.dot(&instance.theta_star)
}

/// `<a, theta*> + eta` with `eta ~ N(0, noise_std^2)`.
pub fn reward<R: Rng + ?Sized>(instance: &ProblemInstance, a: &DVector<f64>, rng: &mut R) -> f64 {
    mean_reward(instance, a) + noise(instance.noise_std, rng)
}

/// One Gaussian noise draw. Always consumes one sample, even at zero std,
/// so streams stay aligned across noise levels.
#[inline]
pub fn noise<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    std * z
}

/// Best action (lowest index among ties) and its mean reward.
pub fn optimal_action(instance: &ProblemInstance) -> Result<(usize, f64)> {
    argmax_first(instance.actions.tr_mul(&instance.theta_star).iter().copied())
        .ok_or_else(|| Error::InvalidInstance("action set is empty".into()))
}

/// `(index, value)` of the first maximum.
pub fn argmax_first(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, bv)) if !(v > bv) => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// How well the wrong subspaces can be told apart from the true one.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    /// `min_k Delta_k` over wrong subspaces; infinite when `K = 1`.
    pub delta: f64,
    /// `Delta_k = || P_true theta* - P_k theta* ||`; zero at the true index.
    pub per_subspace: Vec<f64>,
}

pub fn compute_gap(instance: &ProblemInstance) -> Result<GapReport> {
    let theta = &instance.theta_star;
    let p_true = project(instance.subspaces.basis(instance.true_index), theta)?;
    let mut per_subspace = vec![0.0; instance.k()];
    let mut delta = f64::INFINITY;
    for (k, b) in instance.subspaces.bases().iter().enumerate() {
        if k == instance.true_index {
            continue;
        }
        let gap = (&p_true - project(b, theta)?).norm();
        per_subspace[k] = gap;
        delta = delta.min(gap);
    }
    if delta <= GAP_TOL {
        return Err(Error::DegenerateInstance(format!(
            "gap {delta:e}: another subspace explains theta* equally well"
        )));
    }
    Ok(GapReport { delta, per_subspace })
}

/// Plain serializable form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub d: usize,
    pub m: usize,
    pub true_index: usize,
    pub noise_std: f64,
    pub s_bound: f64,
    /// One entry per subspace, each a column-major `d x m` basis.
    pub bases: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    /// Random actions only; basis columns are implied.
    pub random_actions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InstanceRecord {
    pub fn from_instance(instance: &ProblemInstance, seed: Option<u64>) -> Self {
        InstanceRecord {
            d: instance.d(),
            m: instance.m(),
            true_index: instance.true_index,
            noise_std: instance.noise_std,
            s_bound: instance.s_bound,
            bases: instance
                .subspaces
                .bases()
                .iter()
                .map(|b| b.columns().as_slice().to_vec())
                .collect(),
            theta_star: instance.theta_star.as_slice().to_vec(),
            random_actions: (0..instance.n_random)
                .map(|c| instance.actions.column(c).iter().copied().collect())
                .collect(),
            seed,
        }
    }

    pub fn to_instance(&self) -> Result<ProblemInstance> {
        let (d, m) = (self.d, self.m);
        let bases = self
            .bases
            .iter()
            .map(|cols| {
                if cols.len() != d * m {
                    return Err(Error::InvalidDimension(format!("basis has {} entries, expected {}", cols.len(), d * m)));
                }
                Basis::new(DMatrix::from_column_slice(d, m, cols))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut acts = DMatrix::zeros(d, self.random_actions.len());
        for (c, a) in self.random_actions.iter().enumerate() {
            if a.len() != d {
                return Err(Error::InvalidDimension(format!("action {c} has length {}, d={d}", a.len())));
            }
            acts.set_column(c, &DVector::from_column_slice(a));
        }
        ProblemInstance::new(
            SubspaceCollection::new(bases)?,
            DVector::from_column_slice(&self.theta_star),
            self.true_index,
            acts,
            self.noise_std,
            self.s_bound,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}
