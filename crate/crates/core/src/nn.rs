//! One-hidden-layer network with manual backpropagation.
//!
//! Two regularization routes produce the capacity schedule: dropout on the
//! hidden layer and l2 decay on the weights. During training the strength
//! zeta is recomputed every step from an exponential moving average of the
//! minibatch loss, so the network starts maximally regularized and frees up
//! capacity only as the two samples actually become distinguishable. An R1
//! penalty (squared input-gradient on P-samples) stabilizes training
//! throughout.

use std::f64::consts::LN_2;

use crate::dataset::Dataset;
use crate::divergence::{DivergenceEstimate, Estimator};
use crate::error::{Error, Result};
use crate::loss::{sigmoid, Scorer, CLIP};
use crate::rng::Rng;

/// Cap for the l2 strength; c(a) = -ln(a) diverges as a -> 0.
pub const ZETA_MAX_L2: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dropout,
    L2,
}

/// How the regularization strength evolves during training.
#[derive(Debug, Clone, Copy)]
pub enum Schedule {
    /// zeta = c(1 - L_acc / ln 2), recomputed every step.
    Adaptive(Variant),
    /// Fixed strength; zeta = 0 with an R1 penalty is the plain-JSD baseline.
    Constant(Variant, f64),
}

impl Schedule {
    fn variant(&self) -> Variant {
        match self {
            Schedule::Adaptive(v) | Schedule::Constant(v, _) => *v,
        }
    }
}

/// Regularization strength for a given accumulated loss.
pub fn zeta_for(variant: Variant, l_acc: f64) -> f64 {
    let a = 1.0 - l_acc / LN_2;
    match variant {
        // c(a) = 1 - a, clamped to a valid dropout probability.
        Variant::Dropout => (1.0 - a).clamp(0.0, 1.0),
        // c(a) = -ln(a), clamped to [0, ZETA_MAX_L2].
        Variant::L2 => {
            if a <= 0.0 {
                ZETA_MAX_L2
            } else {
                (-a.ln()).clamp(0.0, ZETA_MAX_L2)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Fully-connected d -> hidden -> 1 network, ReLU hidden, sigmoid output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub dim: usize,
    pub hidden: usize,
    /// hidden x dim, row-major: row j feeds hidden unit j.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Mlp {
    pub fn init(dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let s1 = (2.0 / dim as f64).sqrt();
        let s2 = (1.0 / hidden as f64).sqrt();
        Mlp {
            dim,
            hidden,
            w1: (0..hidden * dim).map(|_| s1 * rng.normal()).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| s2 * rng.normal()).collect(),
            b2: 0.0,
        }
    }

    fn preactivations(&self, x: &[f64], z1: &mut [f64]) {
        for j in 0..self.hidden {
            let row = &self.w1[j * self.dim..(j + 1) * self.dim];
            let mut z = self.b1[j];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            z1[j] = z;
        }
    }

    /// Evaluation-mode forward: no mask, no rescaling. Deterministic.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut z1 = vec![0.0; self.hidden];
        self.preactivations(x, &mut z1);
        let mut s = self.b2;
        for j in 0..self.hidden {
            if z1[j] > 0.0 {
                s += self.w2[j] * z1[j];
            }
        }
        sigmoid(s)
    }

    /// Training-mode forward with an explicit dropout mask. Each entry is the
    /// multiplier applied to that hidden activation (0 for dropped units,
    /// 1/(1-p) for survivors).
    pub fn forward_masked(&self, x: &[f64], mask: &[f64]) -> f64 {
        let mut z1 = vec![0.0; self.hidden];
        self.preactivations(x, &mut z1);
        let mut s = self.b2;
        for j in 0..self.hidden {
            if z1[j] > 0.0 {
                s += self.w2[j] * z1[j] * mask[j];
            }
        }
        sigmoid(s)
    }

    /// Training-mode forward: hidden units dropped with probability p and
    /// survivors rescaled by 1/(1-p). At p = 1 the hidden layer is fully
    /// zeroed with no rescale, so the output is sigmoid(b2).
    pub fn forward(&self, x: &[f64], dropout_p: f64, rng: &mut Rng) -> f64 {
        let mask = draw_mask(self.hidden, dropout_p, rng);
        self.forward_masked(x, &mask)
    }

    fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Sum of squared weights (biases excluded), the l2 regularizer R.
    pub fn weight_norm_sq(&self) -> f64 {
        self.w1.iter().chain(self.w2.iter()).map(|w| w * w).sum()
    }
}

impl Scorer for Mlp {
    fn score(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

/// Dropout mask with keep-probability 1-p; survivors scaled by 1/(1-p).
pub fn draw_mask(hidden: usize, p: f64, rng: &mut Rng) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; hidden];
    }
    if p >= 1.0 {
        return vec![0.0; hidden];
    }
    let scale = 1.0 / (1.0 - p);
    (0..hidden)
        .map(|_| if rng.bernoulli(p) { 0.0 } else { scale })
        .collect()
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

/// Parameter gradient with the same layout as [`Mlp`].
#[derive(Debug, Clone)]
pub struct Grad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Grad {
    pub fn zeros(net: &Mlp) -> Self {
        Grad {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: 0.0,
        }
    }

    /// self += c * other
    pub fn add_scaled(&mut self, other: &Grad, c: f64) {
        for (a, b) in self.w1.iter_mut().zip(&other.w1) {
            *a += c * b;
        }
        for (a, b) in self.b1.iter_mut().zip(&other.b1) {
            *a += c * b;
        }
        for (a, b) in self.w2.iter_mut().zip(&other.w2) {
            *a += c * b;
        }
        self.b2 += c * other.b2;
    }
}

/// Backward pass over one minibatch pair.
///
/// `g0` is the parameter gradient of the two-sample cross-entropy (plus
/// zeta * R(theta) in the l2 variant; in the dropout variant the loss is
/// evaluated through per-row dropout masks of probability zeta). `g1` is the
/// parameter gradient of mean over P of the squared input-gradient norm of
/// the evaluation-mode network.
pub fn backward(
    net: &Mlp,
    batch_p: &[&[f64]],
    batch_q: &[&[f64]],
    variant: Variant,
    zeta: f64,
    r1_coeff: f64,
    rng: &mut Rng,
) -> (Grad, Grad) {
    let mut g0 = Grad::zeros(net);
    let mut g1 = Grad::zeros(net);
    let h = net.hidden;
    let d = net.dim;
    let dropout_p = match variant {
        Variant::Dropout => zeta,
        Variant::L2 => 0.0,
    };
    let wp = 0.5 / batch_p.len() as f64;
    let wq = 0.5 / batch_q.len() as f64;
    let r1_weight = 1.0 / batch_p.len() as f64;

    let mut z1 = vec![0.0; h];
    let mut v = vec![0.0; d];

    for (side, batch) in [(1.0, batch_p), (0.0, batch_q)] {
        let class_w = if side == 1.0 { wp } else { wq };
        for &x in batch {
            net.preactivations(x, &mut z1);
            let mask = draw_mask(h, dropout_p, rng);

            // Masked (training-mode) score and cross-entropy backprop.
            let mut s = net.b2;
            for j in 0..h {
                if z1[j] > 0.0 {
                    s += net.w2[j] * z1[j] * mask[j];
                }
            }
            let f = sigmoid(s);
            let dls = (f - side) * class_w;
            g0.b2 += dls;
            for j in 0..h {
                let a = if z1[j] > 0.0 { z1[j] * mask[j] } else { 0.0 };
                g0.w2[j] += dls * a;
                let dh = if z1[j] > 0.0 { dls * net.w2[j] * mask[j] } else { 0.0 };
                if dh != 0.0 {
                    g0.b1[j] += dh;
                    let row = &mut g0.w1[j * d..(j + 1) * d];
                    for (gw, xi) in row.iter_mut().zip(x) {
                        *gw += dh * xi;
                    }
                }
            }

            // R1 penalty, on P-samples only, through the clean network.
            if side == 1.0 && r1_coeff != 0.0 {
                let mut sc = net.b2;
                for j in 0..h {
                    if z1[j] > 0.0 {
                        sc += net.w2[j] * z1[j];
                    }
                }
                let fc = sigmoid(sc);
                let sp = fc * (1.0 - fc); // sigma'
                let spp = sp * (1.0 - 2.0 * fc); // sigma''

                // v = d(pre-sigmoid score)/dx = W1^T (w2 .* relu')
                v.iter_mut().for_each(|e| *e = 0.0);
                for j in 0..h {
                    if z1[j] > 0.0 {
                        let m = net.w2[j];
                        let row = &net.w1[j * d..(j + 1) * d];
                        for (ve, we) in v.iter_mut().zip(row) {
                            *ve += m * we;
                        }
                    }
                }
                let vnorm2: f64 = v.iter().map(|e| e * e).sum();

                // penalty = sigma'(s)^2 ||v||^2; gradient split into the
                // s-dependent part and the v-dependent part (ReLU mask and
                // dropout-free path treated as locally constant).
                let coef_s = r1_weight * 2.0 * sp * spp * vnorm2;
                let coef_v = r1_weight * 2.0 * sp * sp;
                g1.b2 += coef_s;
                for j in 0..h {
                    if z1[j] > 0.0 {
                        let row = &net.w1[j * d..(j + 1) * d];
                        let mut wv = 0.0;
                        for (we, ve) in row.iter().zip(&v) {
                            wv += we * ve;
                        }
                        g1.w2[j] += coef_s * z1[j] + coef_v * wv;
                        g1.b1[j] += coef_s * net.w2[j];
                        let m = net.w2[j];
                        let grow = &mut g1.w1[j * d..(j + 1) * d];
                        for k in 0..d {
                            grow[k] += coef_s * m * x[k] + coef_v * m * v[k];
                        }
                    }
                }
            }
        }
    }

    // l2 weight decay enters g0 directly: d/dw [zeta * 0.5 ||w||^2] = zeta w.
    if variant == Variant::L2 && zeta != 0.0 {
        for (g, w) in g0.w1.iter_mut().zip(&net.w1) {
            *g += zeta * w;
        }
        for (g, w) in g0.w2.iter_mut().zip(&net.w2) {
            *g += zeta * w;
        }
    }

    (g0, g1)
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NnConfig {
    pub hidden: usize,
    /// Adam step size for the discriminator.
    pub step_size: f64,
    /// Exponential moving average coefficient for the loss.
    pub ema_coeff: f64,
    /// Weight of the R1 penalty.
    pub r1_coeff: f64,
    /// Minibatch size per distribution.
    pub batch: usize,
    /// Convergence: |delta L_acc| below this for `ema_patience` straight steps.
    pub ema_tol: f64,
    pub ema_patience: usize,
    pub max_steps: usize,
}

impl Default for NnConfig {
    fn default() -> Self {
        NnConfig {
            hidden: 32,
            step_size: 1e-2,
            ema_coeff: 0.9,
            r1_coeff: 10.0,
            batch: 64,
            ema_tol: 1e-4,
            ema_patience: 200,
            max_steps: 20_000,
        }
    }
}

/// One row of the per-step trace. `l_acc` is the moving average after this
/// step's update; `zeta` is the strength used during the step (derived from
/// the previous step's `l_acc`).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub step: usize,
    pub batch_loss: f64,
    pub l_acc: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone)]
pub struct NnFit {
    pub net: Mlp,
    pub steps: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    pub final_zeta: f64,
    pub trace: Vec<TraceRow>,
}

impl NnFit {
    pub fn value(&self) -> f64 {
        LN_2 - self.valid_loss
    }
}

fn eval_mean_loss(net: &Mlp, rows_p: &[&[f64]], rows_q: &[&[f64]]) -> f64 {
    let lp = crate::loss::stream_mean(
        rows_p
            .iter()
            .map(|x| net.predict(x).clamp(CLIP, 1.0 - CLIP).ln()),
    );
    let lq = crate::loss::stream_mean(
        rows_q
            .iter()
            .map(|x| (1.0 - net.predict(x).clamp(CLIP, 1.0 - CLIP)).ln()),
    );
    -0.5 * lp - 0.5 * lq
}

/// Train a discriminator with the scheduled regularization and return the
/// held-out divergence estimate. The loss average starts at ln 2 (no
/// regularization has been earned yet) and every batch uses fresh draws with
/// replacement from the training datasets.
pub fn train_ad_nn(
    train_p: &Dataset,
    train_q: &Dataset,
    valid_p: &Dataset,
    valid_q: &Dataset,
    schedule: Schedule,
    cfg: &NnConfig,
    rng: &mut Rng,
) -> Result<NnFit> {
    if train_p.n_cols() != train_q.n_cols() {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    let dim = train_p.n_cols();
    let mut init_rng = rng.split();
    let mut net = Mlp::init(dim, cfg.hidden, &mut init_rng);
    let mut train_rng = rng.split();

    let n = net.n_params();
    let mut adam = crate::optim::Adam::new(n);
    let mut l_acc = LN_2;
    let mut zeta = match schedule {
        Schedule::Adaptive(v) => zeta_for(v, l_acc),
        Schedule::Constant(_, z) => z,
    };
    let mut trace = Vec::new();
    let mut calm = 0usize;
    let mut steps = 0usize;

    for step in 0..cfg.max_steps {
        steps = step + 1;
        // Minibatches with replacement.
        let batch_p: Vec<&[f64]> = (0..cfg.batch)
            .map(|_| train_p.row(train_rng.index(train_p.n_rows())))
            .collect();
        let batch_q: Vec<&[f64]> = (0..cfg.batch)
            .map(|_| train_q.row(train_rng.index(train_q.n_rows())))
            .collect();

        zeta = match schedule {
            Schedule::Adaptive(v) => zeta_for(v, l_acc),
            Schedule::Constant(_, z) => z,
        };

        let (g0, g1) = backward(
            &net,
            &batch_p,
            &batch_q,
            schedule.variant(),
            zeta,
            cfg.r1_coeff,
            &mut train_rng,
        );

        // EMA update uses the evaluation-mode batch loss of the pre-update
        // network.
        let batch_loss = eval_mean_loss(&net, &batch_p, &batch_q);
        if !batch_loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        let new_l_acc = cfg.ema_coeff * l_acc + (1.0 - cfg.ema_coeff) * batch_loss;

        // theta step with g = g0 + beta g1.
        let mut g = g0;
        g.add_scaled(&g1, cfg.r1_coeff);
        adam.begin_step();
        let mut off = 0;
        adam.update(off, &mut net.w1, &g.w1, cfg.step_size);
        off += g.w1.len();
        adam.update(off, &mut net.b1, &g.b1, cfg.step_size);
        off += g.b1.len();
        adam.update(off, &mut net.w2, &g.w2, cfg.step_size);
        off += g.w2.len();
        let mut b2 = net.b2;
        adam.update(off, std::slice::from_mut(&mut b2), &[g.b2], cfg.step_size);
        net.b2 = b2;

        trace.push(TraceRow {
            step,
            batch_loss,
            l_acc: new_l_acc,
            zeta,
        });

        if (new_l_acc - l_acc).abs() < cfg.ema_tol {
            calm += 1;
        } else {
            calm = 0;
        }
        l_acc = new_l_acc;
        if calm >= cfg.ema_patience {
            break;
        }
    }

    let train_rows_p: Vec<&[f64]> = train_p.rows_iter().collect();
    let train_rows_q: Vec<&[f64]> = train_q.rows_iter().collect();
    let valid_rows_p: Vec<&[f64]> = valid_p.rows_iter().collect();
    let valid_rows_q: Vec<&[f64]> = valid_q.rows_iter().collect();
    let train_loss = eval_mean_loss(&net, &train_rows_p, &train_rows_q);
    let valid_loss = eval_mean_loss(&net, &valid_rows_p, &valid_rows_q);
    Ok(NnFit {
        net,
        steps,
        train_loss,
        valid_loss,
        final_zeta: zeta,
        trace,
    })
}

/// [`Estimator`] view for the size-search and harness layers. `alpha_used`
/// reports the capacity the schedule settled on, mapped back through the
/// variant's capacity function.
#[derive(Debug, Clone)]
pub struct NnAdEstimator {
    pub schedule: Schedule,
    pub cfg: NnConfig,
}

impl Estimator for NnAdEstimator {
    fn estimate(
        &self,
        train_p: &Dataset,
        train_q: &Dataset,
        valid_p: &Dataset,
        valid_q: &Dataset,
        rng: &mut Rng,
    ) -> Result<DivergenceEstimate> {
        let fit = train_ad_nn(train_p, train_q, valid_p, valid_q, self.schedule, &self.cfg, rng)?;
        let alpha_used = match self.schedule.variant() {
            Variant::Dropout => (1.0 - fit.final_zeta).clamp(0.0, 1.0),
            Variant::L2 => (-fit.final_zeta).exp().clamp(0.0, 1.0),
        };
        let samples_used = (train_p.n_rows()
            + train_q.n_rows()
            + valid_p.n_rows()
            + valid_q.n_rows()) as u64;
        Ok(DivergenceEstimate {
            value: fit.value(),
            alpha_used,
            train_loss: fit.train_loss,
            valid_loss: fit.valid_loss,
            samples_used,
        })
    }
}
