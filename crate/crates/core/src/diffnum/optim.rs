use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{DiffError, Real};

/// Initial learning rate.
pub const LR_START: f64 = 1e-4;
/// Learning rate reached at the last step.
pub const LR_END: f64 = 5e-7;

/// `lr_end + (lr_start - lr_end) (1 + cos(pi step / total)) / 2`.
pub fn cosine_lr(step: u64, total_steps: u64, lr_start: f64, lr_end: f64) -> Result<f64, DiffError> {
    if step > total_steps {
        return Err(DiffError::StepOutOfRange {
            step,
            total: total_steps,
        });
    }
    if total_steps == 0 {
        return Ok(lr_start);
    }
    let phase = std::f64::consts::PI * step as f64 / total_steps as f64;
    Ok(lr_end + 0.5 * (lr_start - lr_end) * (1.0 + phase.cos()))
}

/// Cosine decay without warmup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub lr_start: f64,
    pub lr_end: f64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn new(total_steps: u64) -> Self {
        LrSchedule {
            lr_start: LR_START,
            lr_end: LR_END,
            total_steps,
        }
    }

    pub fn lr(&self, step: u64) -> Result<f64, DiffError> {
        cosine_lr(step, self.total_steps, self.lr_start, self.lr_end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam over an ordered list of parameter arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<F> {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Array2<F>>,
    pub second_moment: Vec<Array2<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let shapes: Vec<_> = shapes.into_iter().collect();
        Adam {
            config,
            step: 0,
            first_moment: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            second_moment: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// One update. Gradients are checked for finiteness before anything is
    /// modified, so a failed step leaves parameters and state untouched.
    pub fn update(
        &mut self,
        params: &mut [Array2<F>],
        grads: &[Array2<F>],
        names: &[String],
        lr: f64,
    ) -> Result<(), DiffError> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(DiffError::Invalid {
                op: "adam",
                message: format!(
                    "{} parameters, {} gradients, {} moment slots",
                    params.len(),
                    grads.len(),
                    self.first_moment.len()
                ),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.dim() != g.dim() || p.dim() != self.first_moment[i].dim() {
                return Err(DiffError::Shape {
                    op: "adam",
                    expected: p.dim(),
                    found: g.dim(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(DiffError::NonFiniteGradient {
                    name: names.get(i).cloned().unwrap_or_else(|| format!("#{i}")),
                    step: self.step,
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (F::from_f64(beta1), F::from_f64(beta2));
        let (one_b1, one_b2) = (F::from_f64(1.0 - beta1), F::from_f64(1.0 - beta2));
        let step_size = F::from_f64(lr / bias1);
        let inv_sqrt_bias2 = F::from_f64(1.0 / bias2.sqrt());
        let eps = F::from_f64(eps);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            Zip::from(p)
                .and(g)
                .and(&mut self.first_moment[i])
                .and(&mut self.second_moment[i])
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    *p -= step_size * *m / (v.sqrt() * inv_sqrt_bias2 + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn schedule_endpoints() {
        let total = 1000;
        assert_eq!(cosine_lr(0, total, LR_START, LR_END).unwrap(), 1e-4);
        assert!((cosine_lr(total, total, LR_START, LR_END).unwrap() - 5e-7).abs() < 1e-20);
        let mid = cosine_lr(total / 2, total, LR_START, LR_END).unwrap();
        assert!((mid - (LR_START + LR_END) / 2.0).abs() < 1e-18);
        assert!(cosine_lr(total + 1, total, LR_START, LR_END).is_err());
        let s = LrSchedule::new(total);
        let mut prev = f64::INFINITY;
        for step in 0..=total {
            let lr = s.lr(step).unwrap();
            assert!(lr <= prev);
            prev = lr;
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), [(1, 2)]);
        let mut params = vec![array![[1.0, 2.0]]];
        adam.update(&mut params, &[Array2::zeros((1, 2))], &names(1), 1e-3)
            .unwrap();
        assert_eq!(params[0], array![[1.0, 2.0]]);
        assert_eq!(adam.step, 1);

        // accumulated moments decay by beta1 / beta2
        adam.first_moment[0] = array![[0.5, -0.5]];
        adam.second_moment[0] = array![[1.0, 1.0]];
        adam.update(&mut params, &[Array2::zeros((1, 2))], &names(1), 1e-3)
            .unwrap();
        assert_eq!(adam.first_moment[0], array![[0.5 * 0.9, -0.5 * 0.9]]);
        assert_eq!(adam.second_moment[0], array![[0.999, 0.999]]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), [(1, 1)]);
        let mut params = vec![array![[3.0]]];
        adam.update(&mut params, &[array![[1.0]]], &names(1), 1e-4).unwrap();
        assert!((params[0][[0, 0]] - (3.0 - 1e-4)).abs() < 1e-11);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut adam = Adam::<f32>::new(AdamConfig::default(), [(1, 1), (1, 1)]);
        let mut params = vec![array![[1.0f32]], array![[2.0f32]]];
        let err = adam
            .update(&mut params, &[array![[0.0]], array![[f32::NAN]]], &names(2), 1e-3)
            .unwrap_err();
        assert_eq!(
            err,
            DiffError::NonFiniteGradient {
                name: "p1".into(),
                step: 0
            }
        );
        assert_eq!(params, vec![array![[1.0f32]], array![[2.0f32]]]);
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn trajectories_repeat_exactly() {
        let run = || {
            let mut adam = Adam::<f32>::new(AdamConfig::default(), [(2, 2)]);
            let mut p = vec![array![[1.0f32, -1.0], [0.5, 0.25]]];
            for step in 0..50 {
                let g = p[0].mapv(|v| v * 2.0 + step as f32 * 1e-3);
                adam.update(&mut p, &[g], &names(1), 1e-2).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
