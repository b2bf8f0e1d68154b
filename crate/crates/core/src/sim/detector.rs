//! Toy detector-alignment task. Events are bundles of rays emitted from the
//! collision point with random directions and exponential energies; each ray
//! deposits its energy in the cell of a spherical grid it crosses, uniform in
//! pseudorapidity and azimuth. The three parameters are the x/y/z offsets of
//! the detector center relative to the collision point; zero offset is
//! nominal.

use crate::budget::BudgetLedger;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::rng::Rng;
use crate::sim::{check_bounds, Task};

#[derive(Debug, Clone)]
pub struct DetectorTask {
    pub eta_cells: usize,
    pub phi_cells: usize,
    pub eta_range: f64,
    pub rays_per_event: usize,
    /// Detector sphere radius; must exceed the largest admissible offset.
    pub radius: f64,
    pub offset_bound: f64,
}

impl Default for DetectorTask {
    fn default() -> Self {
        Self {
            eta_cells: 32,
            phi_cells: 32,
            eta_range: 5.0,
            rays_per_event: 16,
            radius: 4.0,
            offset_bound: 2.0,
        }
    }
}

impl DetectorTask {
    fn deposit(&self, offset: &[f64], rng: &mut Rng, cells: &mut [f64]) {
        // Ray from the collision point, which sits at -offset in the
        // detector frame.
        let ox = -offset[0];
        let oy = -offset[1];
        let oz = -offset[2];
        for _ in 0..self.rays_per_event {
            // Uniform direction via normalized Gaussian triple.
            let (mut ux, mut uy, mut uz) = (rng.normal(), rng.normal(), rng.normal());
            let norm = (ux * ux + uy * uy + uz * uz).sqrt();
            if norm < 1e-12 {
                continue;
            }
            ux /= norm;
            uy /= norm;
            uz /= norm;
            let energy = rng.exponential();

            // First intersection of origin + t u with the sphere |p| = R.
            let b = ox * ux + oy * uy + oz * uz;
            let c = ox * ox + oy * oy + oz * oz - self.radius * self.radius;
            let disc = b * b - c;
            if disc <= 0.0 {
                continue;
            }
            let t = -b + disc.sqrt();
            if t <= 0.0 {
                continue;
            }
            let px = ox + t * ux;
            let py = oy + t * uy;
            let pz = oz + t * uz;

            let rho = (px * px + py * py).sqrt();
            if rho < 1e-12 {
                continue; // along the beam axis, unmeasured
            }
            let theta = rho.atan2(pz);
            let eta = -(theta / 2.0).tan().ln();
            if eta.abs() >= self.eta_range {
                continue;
            }
            let phi = py.atan2(px);

            let ei = ((eta + self.eta_range) / (2.0 * self.eta_range) * self.eta_cells as f64)
                as usize;
            let pi = ((phi + std::f64::consts::PI) / (2.0 * std::f64::consts::PI)
                * self.phi_cells as f64) as usize;
            let ei = ei.min(self.eta_cells - 1);
            let pi = pi.min(self.phi_cells - 1);
            cells[ei * self.phi_cells + pi] += energy;
        }
    }
}

impl Task for DetectorTask {
    fn name(&self) -> &'static str {
        "detector"
    }

    fn dim(&self) -> usize {
        self.eta_cells * self.phi_cells
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-self.offset_bound, self.offset_bound); 3]
    }

    fn nominal(&self) -> Vec<f64> {
        vec![0.0; 3]
    }

    fn sample(
        &self,
        psi: &[f64],
        n: usize,
        rng: &mut Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<Dataset> {
        check_bounds(self, psi)?;
        ledger.record("detector", n as u64);
        let d = self.dim();
        let mut xs = vec![0.0; n * d];
        for ev in 0..n {
            self.deposit(psi, rng, &mut xs[ev * d..(ev + 1) * d]);
        }
        Dataset::new(xs, d)
    }
}
