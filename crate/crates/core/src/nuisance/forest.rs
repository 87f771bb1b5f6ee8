//! Random forests of CART trees for class probabilities and conditional means.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// A node with at most this many samples becomes a leaf.
    pub node_size: usize,
    /// Features tried per split; `None` picks ⌈√d⌉ for classification and ⌈d/3⌉ for regression.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig { n_trees: 500, node_size: 1, mtry: None, bootstrap: true }
    }
}

impl ForestConfig {
    fn resolve_mtry(&self, d: usize, task: Task) -> Result<usize> {
        if self.n_trees == 0 || self.node_size == 0 {
            return Err(Error::arg("forest needs n_trees >= 1 and node_size >= 1"));
        }
        let m = self.mtry.unwrap_or(match task {
            Task::Classification(_) => (d as f64).sqrt().ceil() as usize,
            Task::Regression => d.div_ceil(3),
        });
        if m == 0 || m > d {
            return Err(Error::arg(format!("mtry must lie in 1..={d}, got {m}")));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Task {
    Classification(usize),
    Regression,
}

impl Task {
    fn width(self) -> usize {
        match self {
            Task::Classification(c) => c,
            Task::Regression => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Node {
    /// Offset into the tree's leaf value buffer.
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) values: Vec<f64>,
}

impl Tree {
    fn leaf_values(&self, x: ArrayView1<f64>, width: usize) -> &[f64] {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(off) => return &self.values[off..off + width],
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Ensemble of trees sharing one task. Classification leaves hold class frequencies,
/// regression leaves hold the mean target.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub(crate) trees: Vec<Tree>,
    pub(crate) width: usize,
    pub(crate) classification: bool,
    pub(crate) range: (f64, f64),
}

impl RandomForest {
    /// Largest feature index used by any split.
    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.trees
            .iter()
            .flat_map(|t| &t.nodes)
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf(_) => None,
            })
            .max()
    }
}

struct Builder<'a> {
    features: ArrayView2<'a, f64>,
    /// Class index (as f64) or regression target.
    targets: &'a [f64],
    task: Task,
    node_size: usize,
    mtry: usize,
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn leaf_value(&self, rows: &[usize], out: &mut Vec<f64>) {
        match self.task {
            Task::Classification(c) => {
                let start = out.len();
                out.resize(start + c, 0.0);
                for &r in rows {
                    out[start + self.targets[r] as usize] += 1.0;
                }
                let n = rows.len() as f64;
                for v in &mut out[start..] {
                    *v /= n;
                }
            }
            Task::Regression => {
                out.push(rows.iter().map(|&r| self.targets[r]).sum::<f64>() / rows.len() as f64);
            }
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let t0 = self.targets[rows[0]];
        rows.iter().all(|&r| self.targets[r] == t0)
    }

    /// Best split of `rows` on `feature`; larger score is better.
    fn scan_feature(&self, rows: &[usize], feature: usize, scratch: &mut Vec<(f64, f64)>, best: &mut Option<Best>) {
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (self.features[[r, feature]], self.targets[r])));
        scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = scratch.len();
        if scratch[0].0 == scratch[n - 1].0 {
            return;
        }
        match self.task {
            Task::Classification(c) => {
                let mut left = vec![0.0; c];
                let mut right = vec![0.0; c];
                for &(_, t) in scratch.iter() {
                    right[t as usize] += 1.0;
                }
                let mut sq_left = 0.0;
                let mut sq_right: f64 = right.iter().map(|v| v * v).sum();
                for i in 0..n - 1 {
                    let k = scratch[i].1 as usize;
                    sq_left += 2.0 * left[k] + 1.0;
                    sq_right -= 2.0 * right[k] - 1.0;
                    left[k] += 1.0;
                    right[k] -= 1.0;
                    if scratch[i].0 == scratch[i + 1].0 {
                        continue;
                    }
                    let nl = (i + 1) as f64;
                    let score = sq_left / nl + sq_right / (n as f64 - nl);
                    consider(best, score, feature, scratch[i].0, scratch[i + 1].0);
                }
            }
            Task::Regression => {
                let total: f64 = scratch.iter().map(|p| p.1).sum();
                let mut sum_left = 0.0;
                for i in 0..n - 1 {
                    sum_left += scratch[i].1;
                    if scratch[i].0 == scratch[i + 1].0 {
                        continue;
                    }
                    let nl = (i + 1) as f64;
                    let sr = total - sum_left;
                    let score = sum_left * sum_left / nl + sr * sr / (n as f64 - nl);
                    consider(best, score, feature, scratch[i].0, scratch[i + 1].0);
                }
            }
        }
    }

    fn grow(&self, rows: Vec<usize>, feature_rng: &mut rng::Rng) -> Tree {
        let d = self.features.ncols();
        let width = self.task.width();
        let mut nodes = vec![Node::Leaf(0)];
        let mut values = Vec::new();
        let mut stack = vec![(0usize, rows)];
        let mut scratch = Vec::new();
        while let Some((id, rows)) = stack.pop() {
            let mut best = None;
            if rows.len() > self.node_size && !self.is_pure(&rows) {
                let mut tried: Vec<usize> = sample(feature_rng, d, self.mtry).into_vec();
                tried.sort_unstable();
                for f in tried {
                    self.scan_feature(&rows, f, &mut scratch, &mut best);
                }
            }
            match best {
                None => {
                    nodes[id] = Node::Leaf(values.len());
                    self.leaf_value(&rows, &mut values);
                    debug_assert_eq!(values.len() % width, 0);
                }
                Some(b) => {
                    let (l, r): (Vec<usize>, Vec<usize>) =
                        rows.iter().partition(|&&i| self.features[[i, b.feature]] <= b.threshold);
                    let left = nodes.len();
                    nodes.push(Node::Leaf(0));
                    nodes.push(Node::Leaf(0));
                    nodes[id] = Node::Split { feature: b.feature, threshold: b.threshold, left, right: left + 1 };
                    stack.push((left + 1, r));
                    stack.push((left, l));
                }
            }
        }
        Tree { nodes, values }
    }
}

fn consider(best: &mut Option<Best>, score: f64, feature: usize, lo: f64, hi: f64) {
    if best.as_ref().is_some_and(|b| score <= b.score) {
        return;
    }
    let mut threshold = lo + (hi - lo) / 2.0;
    if threshold >= hi {
        threshold = lo;
    }
    *best = Some(Best { score, feature, threshold });
}

/// Bootstrap draws used by [`fit_classifier`] and [`fit_regressor`] for a given seed.
pub fn bootstrap_draws(n: usize, config: &ForestConfig, seed: u64) -> Vec<Vec<usize>> {
    (0..config.n_trees)
        .map(|t| {
            if config.bootstrap {
                let mut r = rng::stream(rng::derive_seed(seed, t as u64), 0);
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            }
        })
        .collect()
}

fn fit(
    features: ArrayView2<f64>,
    targets: &[f64],
    task: Task,
    config: &ForestConfig,
    seed: u64,
    draws: &[Vec<usize>],
) -> Result<RandomForest> {
    let mtry = config.resolve_mtry(features.ncols(), task)?;
    if draws.len() != config.n_trees || draws.iter().any(|d| d.is_empty()) {
        return Err(Error::arg("one nonempty bootstrap draw per tree is required"));
    }
    let builder = Builder { features, targets, task, node_size: config.node_size, mtry };
    let trees: Vec<Tree> = draws
        .par_iter()
        .enumerate()
        .map(|(t, rows)| {
            let mut frng = rng::stream(rng::derive_seed(seed, t as u64), 1);
            builder.grow(rows.clone(), &mut frng)
        })
        .collect();
    let lo = targets.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RandomForest {
        trees,
        width: task.width(),
        classification: matches!(task, Task::Classification(_)),
        range: (lo, hi),
    })
}

fn check_classes(classes: &[usize], n_classes: usize, rows: usize) -> Result<()> {
    if classes.len() != rows || rows == 0 {
        return Err(Error::arg("features and classes must have the same nonzero length"));
    }
    if classes.iter().any(|&c| c >= n_classes) {
        return Err(Error::arg("class index out of range"));
    }
    if classes.iter().all(|&c| c == classes[0]) {
        return Err(Error::DegenerateFit(format!("only class {} present", classes[0])));
    }
    Ok(())
}

pub fn fit_classifier(
    features: ArrayView2<f64>,
    classes: &[usize],
    n_classes: usize,
    config: &ForestConfig,
    seed: u64,
) -> Result<RandomForest> {
    let draws = bootstrap_draws(features.nrows(), config, seed);
    fit_classifier_with_draws(features, classes, n_classes, config, seed, &draws)
}

/// Classifier grown on caller-supplied bootstrap draws (row indices per tree).
pub fn fit_classifier_with_draws(
    features: ArrayView2<f64>,
    classes: &[usize],
    n_classes: usize,
    config: &ForestConfig,
    seed: u64,
    draws: &[Vec<usize>],
) -> Result<RandomForest> {
    check_classes(classes, n_classes, features.nrows())?;
    let targets: Vec<f64> = classes.iter().map(|&c| c as f64).collect();
    fit(features, &targets, Task::Classification(n_classes), config, seed, draws)
}

pub fn fit_regressor(
    features: ArrayView2<f64>,
    targets: &[f64],
    config: &ForestConfig,
    seed: u64,
) -> Result<RandomForest> {
    if features.nrows() < 2 || targets.len() != features.nrows() {
        return Err(Error::arg("regression forest needs at least two rows and matching targets"));
    }
    let draws = bootstrap_draws(features.nrows(), config, seed);
    fit(features, targets, Task::Regression, config, seed, &draws)
}

impl RandomForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn is_classifier(&self) -> bool {
        self.classification
    }

    /// Averaged leaf class frequencies.
    pub fn predict_proba(&self, x: ArrayView1<f64>) -> Vec<f64> {
        let mut acc = vec![0.0; self.width];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.leaf_values(x, self.width)) {
                *a += v;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    /// Averaged leaf means, clipped to the training target range.
    pub fn predict_value(&self, x: ArrayView1<f64>) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.leaf_values(x, 1)[0]).sum();
        (s / self.trees.len() as f64).clamp(self.range.0, self.range.1)
    }
}
