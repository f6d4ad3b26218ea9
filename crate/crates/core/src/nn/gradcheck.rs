//! Central finite-difference gradient checking at 64-bit.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::AgentParams;

/// Denominator floor so coordinates with vanishing gradients are compared
/// absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub epsilon: f64,
    /// Above this many coordinates a seeded random subset of this size is
    /// checked.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_coords: 10_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

impl GradCheck {
    /// Compares `analytic` with central differences of `loss` around `x`.
    pub fn run(&self, loss: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> GradCheckReport {
        assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
        let indices: Vec<usize> = if x.len() > self.max_coords {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let mut v = sample(&mut rng, x.len(), self.max_coords).into_vec();
            v.sort_unstable();
            v
        } else {
            (0..x.len()).collect()
        };
        let mut probe = x.to_vec();
        let mut report = GradCheckReport {
            max_relative_error: 0.0,
            worst_index: 0,
            checked: indices.len(),
        };
        for &i in &indices {
            let orig = probe[i];
            probe[i] = orig + self.epsilon;
            let up = loss(&probe);
            probe[i] = orig - self.epsilon;
            let down = loss(&probe);
            probe[i] = orig;
            let numeric = (up - down) / (2.0 * self.epsilon);
            let err = relative_error(analytic[i], numeric);
            if err > report.max_relative_error || err.is_nan() {
                report.max_relative_error = err;
                report.worst_index = i;
            }
        }
        report
    }

    /// Convenience wrapper for agent parameters: `loss_and_grad` returns the
    /// loss and its analytic gradient.
    pub fn run_agent(
        &self,
        params: &AgentParams<f64>,
        loss_and_grad: impl Fn(&AgentParams<f64>) -> (f64, AgentParams<f64>),
    ) -> GradCheckReport {
        let (_, grads) = loss_and_grad(params);
        let analytic = grads.flat();
        let x = params.flat();
        let mut scratch = params.clone();
        let scratch = std::cell::RefCell::new(&mut scratch);
        self.run(
            |v| {
                let mut p = scratch.borrow_mut();
                p.set_flat(v);
                loss_and_grad(&p).0
            },
            &x,
            &analytic,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = vec![0.3, -1.2, 2.0, 0.7];
        let coef = [1.0, 2.0, 0.5, 3.0];
        let f = |v: &[f64]| v.iter().zip(coef).map(|(a, c)| c * a * a).sum::<f64>();
        let g: Vec<f64> = x.iter().zip(coef).map(|(a, c)| 2.0 * c * a).collect();
        let r = GradCheck::default().run(f, &x, &g);
        assert!(r.max_relative_error < 1e-9, "{r:?}");
    }

    #[test]
    fn linear_is_exact_for_any_epsilon() {
        let x = vec![1.0, 2.0, -3.0];
        let f = |v: &[f64]| 0.5 * v[0] - 2.0 * v[1] + 4.0 * v[2];
        for eps in [1e-3, 1e-5, 1e-2] {
            let r = GradCheck {
                epsilon: eps,
                ..GradCheck::default()
            }
            .run(f, &x, &[0.5, -2.0, 4.0]);
            assert!(r.max_relative_error < 1e-10, "{eps}: {r:?}");
        }
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let f = |v: &[f64]| v[0] * v[0];
        let r = GradCheck::default().run(f, &[1.0], &[2.5]);
        assert!(r.max_relative_error > 0.1);
    }

    #[test]
    fn subsample_is_seeded() {
        let x = vec![0.5; 50];
        let g = vec![1.0; 50];
        let gc = GradCheck {
            max_coords: 10,
            ..GradCheck::default()
        };
        let f = |v: &[f64]| v.iter().sum::<f64>();
        let a = gc.run(f, &x, &g);
        assert_eq!(a.checked, 10);
        assert_eq!(a, gc.run(f, &x, &g));
    }

    use crate::env::ObsMode;
    use crate::nn::{init_params, ControllerKind, ControllerSpec, NetworkSpec};

    fn weighted_loss(p: &AgentParams<f64>, obs: &[f64], steps: usize, resets: &[bool]) -> (f64, AgentParams<f64>) {
        let h0 = {
            let mut h = p.initial_hidden();
            h.h.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * (i as f64).cos());
            h.c.iter_mut().enumerate().for_each(|(i, v)| *v = -0.2 * (i as f64).sin());
            h
        };
        let rec = p.unroll_with_resets(&h0, obs, steps, resets).unwrap();
        let w: Vec<f64> = (0..rec.logits.len()).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let loss = rec.logits.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
            + rec.values.iter().map(|v| 0.5 * v * v).sum::<f64>();
        let grads = p.backward(&rec, &w, &rec.values).unwrap();
        (loss, grads)
    }

    fn check(spec: NetworkSpec, steps: usize, resets: Vec<bool>) -> GradCheckReport {
        check_eps(spec, steps, resets, GradCheck::default().epsilon)
    }

    fn check_eps(spec: NetworkSpec, steps: usize, resets: Vec<bool>, epsilon: f64) -> GradCheckReport {
        let params: AgentParams<f64> = init_params(&spec, 21);
        let obs: Vec<f64> = (0..steps * spec.obs_len()).map(|i| ((i as f64) * 0.731).sin().abs()).collect();
        GradCheck {
            epsilon,
            max_coords: 3000,
            ..GradCheck::default()
        }
        .run_agent(&params, |p| weighted_loss(p, &obs, steps, &resets))
    }

    #[test]
    fn agent_gradients_every_controller() {
        for kind in ControllerKind::ALL {
            let spec = NetworkSpec::new(ControllerSpec::new(kind, 8), ObsMode::Symbolic);
            let r = check(spec, 5, vec![false; 5]);
            assert!(r.max_relative_error < 1e-4, "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn agent_gradients_with_reset_mask() {
        for kind in [ControllerKind::Lstm, ControllerKind::Gru, ControllerKind::VanillaRnn] {
            let spec = NetworkSpec::new(ControllerSpec::new(kind, 6), ObsMode::Symbolic);
            let r = check(spec, 6, vec![false, false, true, false, true, false]);
            assert!(r.max_relative_error < 1e-4, "{kind:?}: {r:?}");
        }
    }

    #[test]
    fn agent_gradients_pixel_embedding() {
        let mut spec = NetworkSpec::new(ControllerSpec::new(ControllerKind::Lstm, 6), ObsMode::Pixel);
        spec.pixel_size = 8;
        spec.conv_channels = vec![2, 3, 2];
        spec.embedding_width = 16;
        // Rectifier and max-pool kinks sit close to the default step here.
        let r = check_eps(spec, 3, vec![false; 3], 1e-6);
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }
}
