//! Gaussian-process regression with a Matern nu = 3/2 kernel. The length
//! scale is fit by maximum likelihood over a 61-point log grid spanning
//! [1e-3, 1e3], refined by golden-section search around the best grid point.
//! Targets are standardized before fitting so the marginal-likelihood grid
//! stays well conditioned across tasks.

use crate::error::{Error, Result};

/// Matern nu = 3/2: sigma^2 (1 + sqrt3 r / l) exp(-sqrt3 r / l).
pub fn matern32(x: &[f64], y: &[f64], len_scale: f64, signal_var: f64) -> f64 {
    debug_assert!(len_scale > 0.0);
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let t = 3f64.sqrt() * r2.sqrt() / len_scale;
    signal_var * (1.0 + t) * (-t).exp()
}

pub const LEN_SCALE_LO: f64 = 1e-3;
pub const LEN_SCALE_HI: f64 = 1e3;
const NOISE_FLOOR: f64 = 1e-6;
const MAX_JITTER: f64 = 1e-1;

/// Fitted GP posterior over observed (psi, divergence) pairs.
#[derive(Debug, Clone)]
pub struct GpModel {
    xs: Vec<Vec<f64>>,
    /// Standardized targets.
    ys: Vec<f64>,
    y_mean: f64,
    y_std: f64,
    pub len_scale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
    /// Lower-triangular Cholesky factor of K + noise I, row-major n x n.
    chol: Vec<f64>,
    /// (K + noise I)^-1 y, for posterior means.
    alpha: Vec<f64>,
}

/// In-place Cholesky; returns None when the matrix is not positive definite.
fn cholesky(a: &mut [f64], n: usize) -> Option<()> {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Some(())
}

fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let t = l[i * n + k] * x[k];
            x[i] -= t;
        }
        x[i] /= l[i * n + i];
    }
    x
}

fn solve_upper_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    // Solves L^T x = b given lower-triangular L.
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = l[k * n + i] * x[k];
            x[i] -= t;
        }
        x[i] /= l[i * n + i];
    }
    x
}

struct Factorized {
    chol: Vec<f64>,
    alpha: Vec<f64>,
    noise: f64,
    lml: f64,
}

/// Build and factorize K(l) + noise I, escalating jitter until the Cholesky
/// succeeds; returns the log marginal likelihood alongside.
fn factorize(xs: &[Vec<f64>], ys: &[f64], len_scale: f64) -> Result<Factorized> {
    let n = xs.len();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let k = matern32(&xs[i], &xs[j], len_scale, 1.0);
            base[i * n + j] = k;
            base[j * n + i] = k;
        }
    }
    let mut noise = NOISE_FLOOR;
    loop {
        let mut a = base.clone();
        for i in 0..n {
            a[i * n + i] += noise;
        }
        if cholesky(&mut a, n).is_some() {
            let alpha_half = solve_lower(&a, n, ys);
            let alpha = solve_upper_t(&a, n, &alpha_half);
            let fit: f64 = ys.iter().zip(&alpha).map(|(y, al)| y * al).sum();
            let logdet: f64 = (0..n).map(|i| a[i * n + i].ln()).sum();
            let lml = -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            return Ok(Factorized {
                chol: a,
                alpha,
                noise,
                lml,
            });
        }
        noise *= 10.0;
        if noise > MAX_JITTER {
            return Err(Error::Factorization { jitter: MAX_JITTER });
        }
    }
}

/// Maximum-likelihood fit of the length scale over observed points.
pub fn gp_fit(points: &[Vec<f64>], values: &[f64]) -> Result<GpModel> {
    let n = points.len();
    if n < 2 || values.len() != n {
        return Err(Error::InvalidParameter(format!(
            "gp_fit needs >= 2 points, got {n}"
        )));
    }
    let y_mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let ys: Vec<f64> = values.iter().map(|y| (y - y_mean) / y_std).collect();

    // 61 grid points: log10(l) from -3 to 3 in steps of 0.1.
    let log_lo = LEN_SCALE_LO.log10();
    let log_hi = LEN_SCALE_HI.log10();
    let mut best_k: usize = 0;
    let mut best_lml = f64::NEG_INFINITY;
    for k in 0..=60 {
        let l = 10f64.powf(log_lo + k as f64 * 0.1);
        if let Ok(f) = factorize(points, &ys, l) {
            if f.lml > best_lml {
                best_lml = f.lml;
                best_k = k;
            }
        }
    }
    if best_lml == f64::NEG_INFINITY {
        return Err(Error::Factorization { jitter: MAX_JITTER });
    }

    // Golden-section refinement between the neighbors of the best grid point.
    let mut lo = log_lo + (best_k.saturating_sub(1)) as f64 * 0.1;
    let mut hi = (log_lo + (best_k + 1) as f64 * 0.1).min(log_hi);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let lml_at = |log_l: f64| {
        factorize(points, &ys, 10f64.powf(log_l))
            .map(|f| f.lml)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = lml_at(a);
    let mut fb = lml_at(b);
    for _ in 0..24 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = lml_at(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = lml_at(b);
        }
    }
    let log_best = if fa >= fb { a } else { b };
    let candidate = 10f64.powf(log_best);
    let grid_best = 10f64.powf(log_lo + best_k as f64 * 0.1);
    let len_scale = if lml_at(log_best) >= best_lml {
        candidate
    } else {
        grid_best
    };

    let f = factorize(points, &ys, len_scale)?;
    Ok(GpModel {
        xs: points.to_vec(),
        ys,
        y_mean,
        y_std,
        len_scale,
        signal_var: 1.0,
        noise_var: f.noise,
        chol: f.chol,
        alpha: f.alpha,
    })
}

impl GpModel {
    pub fn n_points(&self) -> usize {
        self.xs.len()
    }

    /// Posterior mean and variance at `x`, in the original target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.xs.len();
        let k: Vec<f64> = self
            .xs
            .iter()
            .map(|xi| matern32(x, xi, self.len_scale, self.signal_var))
            .collect();
        let mean_std: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let w = solve_lower(&self.chol, n, &k);
        let reduction: f64 = w.iter().map(|v| v * v).sum();
        let var_std = (self.signal_var - reduction).max(0.0);
        (
            self.y_mean + self.y_std * mean_std,
            var_std * self.y_std * self.y_std,
        )
    }

    /// Log marginal likelihood of the standardized targets under the fitted
    /// hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.xs.len();
        let fit: f64 = self.ys.iter().zip(&self.alpha).map(|(y, a)| y * a).sum();
        let logdet: f64 = (0..n).map(|i| self.chol[i * n + i].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_at_zero_distance_is_signal_variance() {
        let v = matern32(&[1.0, 2.0], &[1.0, 2.0], 0.7, 2.5);
        assert_eq!(v, 2.5);
    }

    #[test]
    fn matern_unit_distance_hand_value() {
        // (1 + sqrt3) e^{-sqrt3} with l = 1, sigma^2 = 1.
        let v = matern32(&[0.0], &[1.0], 1.0, 1.0);
        let expect = (1.0 + 3f64.sqrt()) * (-3f64.sqrt()).exp();
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.483_357_724_596_507_7).abs() < 1e-12);
    }

    #[test]
    fn matern_decays_monotonically() {
        let mut prev = f64::MAX;
        for k in 0..50 {
            let r = k as f64 * 0.5;
            let v = matern32(&[0.0], &[r], 1.3, 1.0);
            assert!(v <= prev);
            assert!(v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-9);
    }

    #[test]
    fn smooth_function_interpolated_at_training_inputs() {
        let xs: Vec<Vec<f64>> = vec![vec![0.0], vec![0.25], vec![0.5], vec![0.75], vec![1.0]];
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 + 0.5 * x[0]).collect();
        let gp = gp_fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, _) = gp.predict(x);
            assert!((m - y).abs() < 1e-6, "at {x:?}: {m} vs {y}");
        }
    }

    #[test]
    fn identical_points_interpolate_their_value() {
        let xs = vec![vec![0.3, 0.3], vec![0.3, 0.3]];
        let ys = vec![1.7, 1.7];
        let gp = gp_fit(&xs, &ys).unwrap();
        let (m, _) = gp.predict(&[0.3, 0.3]);
        assert!((m - 1.7).abs() < 1e-8);
    }

    #[test]
    fn constant_targets_predict_the_constant_everywhere() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let ys = vec![4.2; 6];
        let gp = gp_fit(&xs, &ys).unwrap();
        for x in [-3.0, 0.5, 2.5, 9.0] {
            let (m, _) = gp.predict(&[x]);
            assert!((m - 4.2).abs() < 1e-6, "at {x}: {m}");
        }
    }

    #[test]
    fn too_few_points_error() {
        assert!(gp_fit(&[vec![0.0]], &[1.0]).is_err());
    }
}
