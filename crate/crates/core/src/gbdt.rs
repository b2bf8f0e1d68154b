//! Gradient-boosted depth-limited regression trees on logistic loss, from
//! scratch. The ensemble doubles as a capacity-ordered family: the i-tree
//! prefix realizes capacity c(i), and the boosted adaptive divergence stops
//! growing the ensemble once the monitored loss crosses the capacity-scaled
//! threshold c(i) * ln 2.

use std::f64::consts::LN_2;

use crate::budget::BudgetLedger;
use crate::capacity::CapacityFunction;
use crate::dataset::Dataset;
use crate::divergence::{
    DivergenceEstimate, Estimator, FamilyKind, Probe, PseudoDivergenceFamily, ScorerEstimator,
    Trainer,
};
use crate::error::{Error, Result};
use crate::loss::{cross_entropy, sigmoid, Scorer, CLIP};
use crate::rng::Rng;

/// Leaf-value damping; keeps Newton steps finite when hessians vanish.
const DAMPING: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Learning rate applied to every tree's contribution.
    pub shrinkage: f64,
    pub min_leaf: usize,
    pub capacity: CapacityFunction,
}

impl GbdtConfig {
    /// 100 trees of depth 3 with the linear c0 = 1/4 capacity.
    pub fn default_linear() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            shrinkage: 0.1,
            min_leaf: 8,
            capacity: CapacityFunction::linear(0.25, 100).unwrap(),
        }
    }

    pub fn default_logarithmic() -> Self {
        Self {
            capacity: CapacityFunction::logarithmic(0.25, 100).unwrap(),
            ..Self::default_linear()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shrinkage {} outside (0, 1]",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn output(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] < *threshold { *left } else { *right };
                }
            }
        }
    }
}

fn leaf_value(grad_sum: f64, hess_sum: f64) -> f64 {
    -grad_sum / (hess_sum + DAMPING)
}

struct TreeBuilder<'a> {
    xs: &'a Dataset,
    grad: &'a [f64],
    hess: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: &mut [usize], depth: usize) -> usize {
        let (g, h) = indices
            .iter()
            .fold((0.0, 0.0), |(g, h), &i| (g + self.grad[i], h + self.hess[i]));

        if depth >= self.max_depth || indices.len() < 2 * self.min_leaf {
            return self.push_leaf(g, h);
        }
        match self.best_split(indices, g, h) {
            None => self.push_leaf(g, h),
            Some((feature, threshold)) => {
                let mid = partition(self.xs, indices, feature, threshold);
                let node = self.nodes.len();
                self.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
                let (left_idx, right_idx) = indices.split_at_mut(mid);
                let left = self.build(left_idx, depth + 1);
                let right = self.build(right_idx, depth + 1);
                self.nodes[node] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                node
            }
        }
    }

    fn push_leaf(&mut self, g: f64, h: f64) -> usize {
        self.nodes.push(Node::Leaf {
            value: leaf_value(g, h),
        });
        self.nodes.len() - 1
    }

    /// Exact greedy split: maximize the Newton gain over every feature and
    /// every threshold between distinct consecutive values.
    fn best_split(&self, indices: &[usize], g_total: f64, h_total: f64) -> Option<(usize, f64)> {
        let parent = g_total * g_total / (h_total + DAMPING);
        let mut best_gain = 1e-12;
        let mut best = None;
        let mut order: Vec<usize> = Vec::with_capacity(indices.len());
        for feature in 0..self.xs.n_cols() {
            order.clear();
            order.extend_from_slice(indices);
            order.sort_unstable_by(|&a, &b| {
                self.xs.row(a)[feature]
                    .partial_cmp(&self.xs.row(b)[feature])
                    .unwrap()
            });
            let mut gl = 0.0;
            let mut hl = 0.0;
            for k in 0..order.len() - 1 {
                let i = order[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let here = self.xs.row(i)[feature];
                let next = self.xs.row(order[k + 1])[feature];
                if here == next {
                    continue;
                }
                let n_left = k + 1;
                let n_right = order.len() - n_left;
                if n_left < self.min_leaf || n_right < self.min_leaf {
                    continue;
                }
                let gr = g_total - gl;
                let hr = h_total - hl;
                let gain =
                    gl * gl / (hl + DAMPING) + gr * gr / (hr + DAMPING) - parent;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((feature, 0.5 * (here + next)));
                }
            }
        }
        best
    }
}

fn partition(xs: &Dataset, indices: &mut [usize], feature: usize, threshold: f64) -> usize {
    let mut mid = 0;
    for k in 0..indices.len() {
        if xs.row(indices[k])[feature] < threshold {
            indices.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

/// Fit a single regression tree to per-row gradients and hessians.
pub fn fit_tree(grad: &[f64], hess: &[f64], xs: &Dataset, cfg: &GbdtConfig) -> Result<Tree> {
    if grad.len() != xs.n_rows() || hess.len() != xs.n_rows() {
        return Err(Error::InvalidParameter(
            "gradient/hessian length mismatch".into(),
        ));
    }
    if grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite gradient or hessian".into(),
        ));
    }
    let mut builder = TreeBuilder {
        xs,
        grad,
        hess,
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        nodes: Vec::new(),
    };
    let mut indices: Vec<usize> = (0..xs.n_rows()).collect();
    builder.build(&mut indices, 0);
    Ok(Tree {
        nodes: builder.nodes,
    })
}

// ---------------------------------------------------------------------------
// Ensemble
// ---------------------------------------------------------------------------

/// An ordered ensemble over the raw score F (log-odds). F_0 = 0, so the empty
/// prefix predicts exactly 1/2.
#[derive(Debug, Clone)]
pub struct Ensemble {
    trees: Vec<Tree>,
    shrinkage: f64,
    dim: usize,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw score of the first `k` trees.
    pub fn prefix_score(&self, k: usize, x: &[f64]) -> f64 {
        self.trees[..k]
            .iter()
            .map(|t| self.shrinkage * t.output(x))
            .sum()
    }

    /// Raw ensemble score (log-odds).
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.prefix_score(self.trees.len(), x)
    }

    /// Probability view of a prefix.
    pub fn prefix(&self, k: usize) -> Result<PrefixScorer<'_>> {
        if k > self.trees.len() {
            return Err(Error::IndexBeyondEnsemble {
                index: k,
                max: self.trees.len(),
            });
        }
        Ok(PrefixScorer { ensemble: self, k })
    }
}

impl Scorer for Ensemble {
    fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}

pub struct PrefixScorer<'a> {
    ensemble: &'a Ensemble,
    k: usize,
}

impl Scorer for PrefixScorer<'_> {
    fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.ensemble.prefix_score(self.k, x))
    }
}

/// ln 2 minus the cross-entropy of the i-tree prefix; exactly 0 at i = 0.
pub fn ensemble_prefix_divergence(
    ens: &Ensemble,
    i: usize,
    xp: &Dataset,
    xq: &Dataset,
) -> Result<f64> {
    let prefix = ens.prefix(i)?;
    Ok(LN_2 - cross_entropy(&prefix, xp, xq)?)
}

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

/// Two-sample loss from cached raw scores, classes weighted 1/2 each.
fn loss_from_scores(scores_p: &[f64], scores_q: &[f64]) -> f64 {
    let lp = crate::loss::stream_mean(
        scores_p
            .iter()
            .map(|&s| sigmoid(s).clamp(CLIP, 1.0 - CLIP).ln()),
    );
    let lq = crate::loss::stream_mean(
        scores_q
            .iter()
            .map(|&s| (1.0 - sigmoid(s).clamp(CLIP, 1.0 - CLIP)).ln()),
    );
    -0.5 * lp - 0.5 * lq
}

struct BoostState<'a> {
    xs: Dataset, // pooled train rows: P first, then Q
    n_p: usize,
    cfg: &'a GbdtConfig,
    scores: Vec<f64>,
    trees: Vec<Tree>,
}

impl<'a> BoostState<'a> {
    fn new(xp: &Dataset, xq: &Dataset, cfg: &'a GbdtConfig) -> Result<Self> {
        if xp.n_cols() != xq.n_cols() {
            return Err(Error::InvalidParameter(format!(
                "dimension mismatch: {} vs {}",
                xp.n_cols(),
                xq.n_cols()
            )));
        }
        cfg.validate()?;
        let mut flat = xp.as_slice().to_vec();
        flat.extend_from_slice(xq.as_slice());
        let xs = Dataset::new(flat, xp.n_cols())?;
        let n = xs.n_rows();
        Ok(Self {
            xs,
            n_p: xp.n_rows(),
            cfg,
            scores: vec![0.0; n],
            trees: Vec::new(),
        })
    }

    /// Train one more tree on the current residuals and update cached scores.
    fn step(&mut self) -> Result<&Tree> {
        let n = self.xs.n_rows();
        let mut grad = Vec::with_capacity(n);
        let mut hess = Vec::with_capacity(n);
        for (i, &s) in self.scores.iter().enumerate() {
            let p = sigmoid(s);
            let y = if i < self.n_p { 1.0 } else { 0.0 };
            grad.push(p - y);
            hess.push(p * (1.0 - p));
        }
        let tree = fit_tree(&grad, &hess, &self.xs, self.cfg)?;
        for (i, s) in self.scores.iter_mut().enumerate() {
            *s += self.cfg.shrinkage * tree.output(self.xs.row(i));
        }
        self.trees.push(tree);
        Ok(self.trees.last().unwrap())
    }

    fn train_loss(&self) -> f64 {
        loss_from_scores(&self.scores[..self.n_p], &self.scores[self.n_p..])
    }

    fn into_ensemble(self) -> Ensemble {
        Ensemble {
            trees: self.trees,
            shrinkage: self.cfg.shrinkage,
            dim: self.xs.n_cols(),
        }
    }
}

/// Fit the full ensemble with no early stopping (the family's alpha = 1
/// configuration, and the JSD trainer).
pub fn fit_ensemble(xp: &Dataset, xq: &Dataset, cfg: &GbdtConfig) -> Result<Ensemble> {
    fit_ensemble_capped(xp, xq, cfg, cfg.n_trees)
}

fn fit_ensemble_capped(
    xp: &Dataset,
    xq: &Dataset,
    cfg: &GbdtConfig,
    n_trees: usize,
) -> Result<Ensemble> {
    let mut state = BoostState::new(xp, xq, cfg)?;
    for _ in 0..n_trees {
        state.step()?;
    }
    Ok(state.into_ensemble())
}

/// The capacity-thresholded stopping scan shared by the boosted estimator and
/// its tests. `step(i)` makes tree `i` (1-based) available and returns the
/// monitored loss L_i. Returns `(i, L_i)` at the first `i` with
/// `L_i <= c(i) * ln 2`, or `(n_max, L_n)` if the guard never releases.
/// Capacity indices beyond the function's domain are clamped to its endpoint.
pub fn early_stop_scan(
    capacity: &CapacityFunction,
    n_max: usize,
    mut step: impl FnMut(usize) -> Result<f64>,
) -> Result<(usize, f64)> {
    let mut last = LN_2;
    for i in 1..=n_max {
        let loss = step(i)?;
        let c = capacity.eval(i.min(capacity.max_index()))?;
        if loss <= c * LN_2 {
            return Ok((i, loss));
        }
        last = loss;
    }
    Ok((n_max, last))
}

/// Point of the per-iteration loss trajectory, dumpable as CSV.
#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub i: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    /// Stopping threshold c(i) * ln 2 at this iteration.
    pub threshold: f64,
}

/// Result of the early-stopped boosted adaptive divergence.
#[derive(Debug, Clone)]
pub struct BoostedFit {
    pub ensemble: Ensemble,
    /// Trees kept when the guard released (or n_trees if it never did).
    pub stop_index: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    /// Capacity at the stopping index.
    pub alpha: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl BoostedFit {
    pub fn value(&self) -> f64 {
        LN_2 - self.valid_loss
    }
}

/// Boosted adaptive divergence: grow the ensemble tree by tree and stop as
/// soon as the held-out loss falls to c(i) * ln 2. The stopping check uses
/// the validation split so the returned value stays an honest estimate.
pub fn boosted_ad(
    train_p: &Dataset,
    train_q: &Dataset,
    valid_p: &Dataset,
    valid_q: &Dataset,
    cfg: &GbdtConfig,
) -> Result<BoostedFit> {
    let mut state = BoostState::new(train_p, train_q, cfg)?;
    let mut vp_scores = vec![0.0; valid_p.n_rows()];
    let mut vq_scores = vec![0.0; valid_q.n_rows()];
    let mut trajectory = Vec::new();

    let (stop_index, valid_loss) = {
        let state = &mut state;
        let trajectory = &mut trajectory;
        let vp_scores = &mut vp_scores;
        let vq_scores = &mut vq_scores;
        early_stop_scan(&cfg.capacity, cfg.n_trees, move |i| {
            let tree = state.step()?;
            for (s, row) in vp_scores.iter_mut().zip(valid_p.rows_iter()) {
                *s += cfg.shrinkage * tree.output(row);
            }
            for (s, row) in vq_scores.iter_mut().zip(valid_q.rows_iter()) {
                *s += cfg.shrinkage * tree.output(row);
            }
            let valid = loss_from_scores(vp_scores, vq_scores);
            let c = cfg.capacity.eval(i.min(cfg.capacity.max_index()))?;
            trajectory.push(TrajectoryPoint {
                i,
                train_loss: state.train_loss(),
                valid_loss: valid,
                threshold: c * LN_2,
            });
            Ok(valid)
        })?
    };

    let train_loss = state.train_loss();
    let alpha = cfg
        .capacity
        .eval(stop_index.min(cfg.capacity.max_index()))?;
    Ok(BoostedFit {
        ensemble: state.into_ensemble(),
        stop_index,
        train_loss,
        valid_loss,
        alpha,
        trajectory,
    })
}

// ---------------------------------------------------------------------------
// Divergence-layer adapters
// ---------------------------------------------------------------------------

/// Full-capacity trainer (all trees, no early stop); the JSD backend.
#[derive(Debug, Clone)]
pub struct GbdtTrainer {
    pub cfg: GbdtConfig,
}

impl Trainer for GbdtTrainer {
    fn fit(&self, xp: &Dataset, xq: &Dataset, _rng: &mut Rng) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(fit_ensemble(xp, xq, &self.cfg)?))
    }
}

/// Trainer restricted to the first trees realizing a requested capacity.
#[derive(Debug, Clone)]
struct CappedTrainer {
    cfg: GbdtConfig,
    n_trees: usize,
}

impl Trainer for CappedTrainer {
    fn fit(&self, xp: &Dataset, xq: &Dataset, _rng: &mut Rng) -> Result<Box<dyn Scorer>> {
        Ok(Box::new(fit_ensemble_capped(
            xp,
            xq,
            &self.cfg,
            self.n_trees,
        )?))
    }
}

/// The prefix-ensemble pseudo-divergence family: capacity alpha maps to the
/// smallest ensemble size i with c(i) >= alpha, saturating at the full
/// ensemble for alpha beyond the capacity range.
#[derive(Debug, Clone)]
pub struct GbdtFamily {
    pub cfg: GbdtConfig,
}

impl GbdtFamily {
    fn trees_for(&self, alpha: f64) -> usize {
        let cap = &self.cfg.capacity;
        let n = cap.max_index().min(self.cfg.n_trees);
        if alpha <= 0.0 {
            return 0;
        }
        for i in 0..=n {
            if cap.eval(i).unwrap_or(0.0) >= alpha {
                return i;
            }
        }
        self.cfg.n_trees
    }
}

impl PseudoDivergenceFamily for GbdtFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Boosted
    }

    fn at(&self, alpha: f64) -> Box<dyn Estimator + '_> {
        let n_trees = if alpha >= 1.0 {
            self.cfg.n_trees
        } else {
            self.trees_for(alpha)
        };
        Box::new(ScorerEstimator {
            alpha,
            trainer: CappedTrainer {
                cfg: self.cfg.clone(),
                n_trees,
            },
        })
    }
}

/// [`Estimator`] view of the boosted adaptive divergence, for the size-search
/// and harness layers.
#[derive(Debug, Clone)]
pub struct BoostedAdEstimator {
    pub cfg: GbdtConfig,
}

impl Estimator for BoostedAdEstimator {
    fn estimate(
        &self,
        train_p: &Dataset,
        train_q: &Dataset,
        valid_p: &Dataset,
        valid_q: &Dataset,
        _rng: &mut Rng,
    ) -> Result<DivergenceEstimate> {
        let fit = boosted_ad(train_p, train_q, valid_p, valid_q, &self.cfg)?;
        let samples_used = (train_p.n_rows()
            + train_q.n_rows()
            + valid_p.n_rows()
            + valid_q.n_rows()) as u64;
        Ok(DivergenceEstimate {
            value: fit.value(),
            alpha_used: fit.alpha,
            train_loss: fit.train_loss,
            valid_loss: fit.valid_loss,
            samples_used,
        })
    }
}

/// Convenience: run the boosted estimator once on datasets drawn here,
/// charging the ledger; used by the probe-log emitting paths.
pub fn boosted_ad_probe(
    cfg: &GbdtConfig,
    n: usize,
    p: &dyn crate::divergence::Sampler,
    q: &dyn crate::divergence::Sampler,
    ledger: &mut BudgetLedger,
    rng: &mut Rng,
) -> Result<(DivergenceEstimate, Probe)> {
    let mut r = rng.split();
    let tp = p.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    let tq = q.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    let vp = p.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    let vq = q.sample(n, &mut r, ledger)?;
    let est = BoostedAdEstimator { cfg: cfg.clone() };
    let mut r = rng.split();
    let e = est.estimate(&tp, &tq, &vp, &vq, &mut r)?;
    let probe = Probe {
        alpha: e.alpha_used,
        n,
        train_loss: e.train_loss,
        valid_loss: e.valid_loss,
    };
    Ok((e, probe))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GbdtConfig {
        GbdtConfig::default_linear()
    }

    #[test]
    fn zero_gradients_give_single_zero_leaf() {
        let xs = Dataset::new(vec![0.0, 1.0, 2.0, 3.0], 1).unwrap();
        let tree = fit_tree(&[0.0; 4], &[0.25; 4], &xs, &cfg()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.output(&[1.5]), 0.0);
    }

    #[test]
    fn identical_rows_give_single_leaf_average() {
        // Two identical rows with opposite gradients cannot be split; the
        // leaf averages them to zero.
        let xs = Dataset::new(vec![1.0, 1.0], 1).unwrap();
        let mut c = cfg();
        c.min_leaf = 1;
        let tree = fit_tree(&[0.5, -0.5], &[0.25, 0.25], &xs, &c).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(tree.output(&[1.0]).abs() < 1e-12);
    }

    #[test]
    fn perfect_split_threshold_lies_at_class_boundary() {
        // Gradients flip sign at x = 0; brute force over split points puts
        // the maximal gain at the boundary.
        let mut xs = Vec::new();
        let mut grad = Vec::new();
        for i in 0..16 {
            let x = -2.0 + i as f64 * 0.2; // -2.0 .. 1.0
            xs.push(x);
            grad.push(if x < 0.0 { 0.5 } else { -0.5 });
        }
        let data = Dataset::new(xs.clone(), 1).unwrap();
        let mut c = cfg();
        c.min_leaf = 2;
        let tree = fit_tree(&grad, &vec![0.25; 16], &data, &c).unwrap();
        let max_neg = xs.iter().copied().filter(|&x| x < 0.0).fold(f64::MIN, f64::max);
        let min_pos = xs.iter().copied().filter(|&x| x >= 0.0).fold(f64::MAX, f64::min);
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => {
                assert!(
                    *threshold > max_neg && *threshold <= min_pos,
                    "threshold {threshold} outside ({max_neg}, {min_pos}]"
                );
            }
            Node::Leaf { .. } => panic!("expected a root split"),
        }
    }

    #[test]
    fn prefix_zero_divergence_is_exactly_zero() {
        let xp = Dataset::new(vec![0.0, 1.0], 1).unwrap();
        let xq = Dataset::new(vec![5.0, 6.0], 1).unwrap();
        let ens = fit_ensemble(&xp, &xq, &small_cfg(4)).unwrap();
        let d0 = ensemble_prefix_divergence(&ens, 0, &xp, &xq).unwrap();
        assert_eq!(d0, 0.0);
    }

    fn small_cfg(n: usize) -> GbdtConfig {
        GbdtConfig {
            n_trees: n,
            max_depth: 2,
            shrinkage: 0.1,
            min_leaf: 1,
            capacity: CapacityFunction::linear(0.25, n).unwrap(),
        }
    }

    fn two_blob_data(rng: &mut Rng, n: usize, sep: f64) -> (Dataset, Dataset) {
        let mut p = Vec::new();
        let mut q = Vec::new();
        for _ in 0..n {
            p.push(-sep + 0.3 * rng.normal());
            p.push(-sep + 0.3 * rng.normal());
            q.push(sep + 0.3 * rng.normal());
            q.push(sep + 0.3 * rng.normal());
        }
        (
            Dataset::new(p, 2).unwrap(),
            Dataset::new(q, 2).unwrap(),
        )
    }

    #[test]
    fn prefix_predictions_unchanged_by_later_trees() {
        let mut rng = Rng::new(7);
        let (xp, xq) = two_blob_data(&mut rng, 64, 1.0);
        let ens_short = fit_ensemble(&xp, &xq, &small_cfg(5)).unwrap();
        let ens_long = fit_ensemble(&xp, &xq, &small_cfg(10)).unwrap();
        for row in xp.rows_iter().chain(xq.rows_iter()) {
            assert_eq!(
                ens_short.prefix_score(5, row).to_bits(),
                ens_long.prefix_score(5, row).to_bits()
            );
        }
    }

    #[test]
    fn determinism_same_data_same_ensemble() {
        let mut rng = Rng::new(11);
        let (xp, xq) = two_blob_data(&mut rng, 64, 0.5);
        let a = fit_ensemble(&xp, &xq, &cfg()).unwrap();
        let b = fit_ensemble(&xp, &xq, &cfg()).unwrap();
        for row in xp.rows_iter() {
            assert_eq!(a.raw_score(row).to_bits(), b.raw_score(row).to_bits());
        }
    }

    #[test]
    fn training_prefix_divergence_nondecreasing_on_separable_data() {
        let mut rng = Rng::new(3);
        let (xp, xq) = two_blob_data(&mut rng, 128, 1.5);
        let ens = fit_ensemble(&xp, &xq, &cfg()).unwrap();
        let d10 = ensemble_prefix_divergence(&ens, 10, &xp, &xq).unwrap();
        let d20 = ensemble_prefix_divergence(&ens, 20, &xp, &xq).unwrap();
        assert!(d10 <= d20 + 1e-9, "d10 = {d10}, d20 = {d20}");
    }

    #[test]
    fn stub_loss_sequence_stops_at_26() {
        // L_i = ln2 * 0.9^i against the linear capacity c0 = 1/4, N = 100:
        // first index with 0.9^i <= 0.0025 i is 26.
        let capacity = CapacityFunction::linear(0.25, 100).unwrap();
        let (i, loss) =
            early_stop_scan(&capacity, 100, |i| Ok(LN_2 * 0.9f64.powi(i as i32))).unwrap();
        assert_eq!(i, 26);
        assert!((loss - LN_2 * 0.9f64.powi(26)).abs() < 1e-15);
    }

    #[test]
    fn same_distribution_runs_all_trees_and_returns_near_zero() {
        let mut rng = Rng::new(20260810);
        let mut flat = Vec::new();
        for _ in 0..512 {
            flat.push(rng.normal());
            flat.push(rng.normal());
        }
        let all = Dataset::new(flat, 2).unwrap();
        let (xp, xq) = all.split_at_row(256).unwrap();
        let mut vflat = Vec::new();
        for _ in 0..512 {
            vflat.push(rng.normal());
            vflat.push(rng.normal());
        }
        let vall = Dataset::new(vflat, 2).unwrap();
        let (vp, vq) = vall.split_at_row(256).unwrap();
        let fit = boosted_ad(&xp, &xq, &vp, &vq, &cfg()).unwrap();
        assert_eq!(fit.stop_index, 100, "stopping needs L <= c0 ln2 < ln2");
        assert!(fit.value().abs() < 0.1, "value {} should hover near 0", fit.value());
    }

    #[test]
    fn disjoint_supports_stop_early_with_high_value() {
        let mut rng = Rng::new(5);
        let gen = |rng: &mut Rng, offset: f64, n: usize| {
            Dataset::new(
                (0..n).map(|_| offset + 0.2 * rng.normal()).collect(),
                1,
            )
            .unwrap()
        };
        let xp = gen(&mut rng, -3.0, 256);
        let xq = gen(&mut rng, 3.0, 256);
        let vp = gen(&mut rng, -3.0, 256);
        let vq = gen(&mut rng, 3.0, 256);
        let fit = boosted_ad(&xp, &xq, &vp, &vq, &cfg()).unwrap();
        assert!(fit.stop_index < 100, "expected early stop, got {}", fit.stop_index);
        assert!(
            fit.value() >= 0.75 * LN_2,
            "value {} below 0.75 ln2",
            fit.value()
        );
    }

    #[test]
    fn family_capacity_inverse_is_monotone() {
        let fam = GbdtFamily { cfg: cfg() };
        let mut prev = 0;
        for k in 0..=20 {
            let alpha = k as f64 / 20.0;
            let t = if alpha >= 1.0 {
                fam.cfg.n_trees
            } else {
                fam.trees_for(alpha)
            };
            assert!(t >= prev);
            prev = t;
        }
        assert_eq!(fam.trees_for(0.0), 0);
        // alpha = 1 must be the full ensemble.
        assert_eq!(fam.trees_for(1.0).max(fam.cfg.n_trees), fam.cfg.n_trees);
    }
}
