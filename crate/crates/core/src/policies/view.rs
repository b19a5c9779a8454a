//! The action set as seen at one time slot, with per-subspace coordinates
//! computed on first use.

use std::borrow::Cow;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;

use crate::environment::{argmax_first, random_actions, ProblemInstance};

pub struct ActionView<'a> {
    instance: &'a ProblemInstance,
    actions: Cow<'a, DMatrix<f64>>,
    means: Vec<f64>,
    best: (usize, f64),
    // column-major m x n coordinates per subspace
    coords: Vec<OnceLock<Vec<f64>>>,
}

impl<'a> ActionView<'a> {
    /// The instance's own fixed action set.
    pub fn fixed(instance: &'a ProblemInstance) -> Self {
        Self::build(instance, Cow::Borrowed(instance.actions()))
    }

    /// A fresh draw of the random actions; basis columns stay in place.
    pub fn resampled<R: Rng + ?Sized>(instance: &'a ProblemInstance, rng: &mut R) -> Self {
        let mut actions = instance.actions().clone();
        let n_random = instance.n_random_actions();
        actions
            .columns_mut(0, n_random)
            .copy_from(&random_actions(instance.d(), n_random, rng));
        Self::build(instance, Cow::Owned(actions))
    }

    fn build(instance: &'a ProblemInstance, actions: Cow<'a, DMatrix<f64>>) -> Self {
        let means: Vec<f64> = actions.tr_mul(instance.theta_star()).iter().copied().collect();
        let best = argmax_first(means.iter().copied()).unwrap_or((0, 0.0));
        ActionView {
            instance,
            actions,
            means,
            best,
            coords: (0..instance.k()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn instance(&self) -> &ProblemInstance {
        self.instance
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn mean(&self, idx: usize) -> f64 {
        self.means[idx]
    }

    pub fn best_index(&self) -> usize {
        self.best.0
    }

    pub fn best_value(&self) -> f64 {
        self.best.1
    }

    /// Instantaneous regret of playing `idx`; never negative.
    pub fn regret(&self, idx: usize) -> f64 {
        self.best.1 - self.means[idx]
    }

    /// Column-major `d x n` raw actions.
    pub fn raw(&self) -> &[f64] {
        self.actions.as_slice()
    }

    /// Column-major `m x n` coordinates `U_k^T a` of every action.
    pub fn coords(&self, k: usize) -> &[f64] {
        self.coords[k].get_or_init(|| {
            self.instance
                .subspaces()
                .basis(k)
                .columns()
                .tr_mul(&self.actions)
                .as_slice()
                .to_vec()
        })
    }
}
