//! Adam updates over grouped parameter slices.

pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n_params: usize) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Advance the shared timestep; call once per optimization step, before
    /// updating the parameter groups.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Update one parameter group living at `offset` in the flat moment
    /// vectors.
    pub fn update(&mut self, offset: usize, params: &mut [f64], grads: &[f64], lr: f64) {
        debug_assert!(self.t >= 1, "begin_step before update");
        debug_assert_eq!(params.len(), grads.len());
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            let k = offset + i;
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * g;
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = Adam::new(3);
        let mut p = [1.0, -2.0, 0.5];
        adam.begin_step();
        adam.update(0, &mut p, &[0.0; 3], 0.1);
        assert_eq!(p, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn step_magnitude_close_to_lr_for_steady_gradient() {
        let mut adam = Adam::new(1);
        let mut p = [0.0];
        for _ in 0..50 {
            adam.begin_step();
            adam.update(0, &mut p, &[3.0], 0.01);
        }
        // With constant gradients Adam moves ~lr per step.
        assert!((p[0] + 0.5).abs() < 0.05, "p = {}", p[0]);
    }
}
