use std::f64::consts::PI;

use super::mlp::{Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Pruned parameters stay exactly zero.
pub fn adam_step(
    mlp: &mut Mlp,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) {
    assert_eq!(grads.values.len(), mlp.params().len());
    assert_eq!(state.m.len(), mlp.params().len());
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    let mask = mlp.prune_mask().map(<[bool]>::to_vec);
    let params = mlp.params_mut();
    for (i, (&g, p)) in grads.values.iter().zip(params.iter_mut()).enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    if let Some(mask) = mask {
        for (p, keep) in params.iter_mut().zip(mask) {
            if !keep {
                *p = 0.0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant {
        lr: f64,
    },
    /// Linear ramp from 0 to `lr0` over `warmup_epochs`, then cosine decay
    /// to `lr_min` at the last epoch.
    CosineWarmup {
        lr0: f64,
        warmup_epochs: usize,
        lr_min: f64,
    },
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize, total_epochs: usize) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::CosineWarmup {
                lr0,
                warmup_epochs,
                lr_min,
            } => {
                if epoch < warmup_epochs {
                    return lr0 * epoch as f64 / warmup_epochs as f64;
                }
                let span = total_epochs.saturating_sub(1).saturating_sub(warmup_epochs);
                if span == 0 {
                    return lr0;
                }
                let progress = ((epoch - warmup_epochs) as f64 / span as f64).min(1.0);
                lr_min + (lr0 - lr_min) * (1.0 + (PI * progress).cos()) / 2.0
            }
        }
    }

    pub fn validate(&self) -> bool {
        match *self {
            LrSchedule::Constant { lr } => lr > 0.0 && lr.is_finite(),
            LrSchedule::CosineWarmup { lr0, lr_min, .. } => {
                lr0 > 0.0 && lr_min > 0.0 && lr0.is_finite() && lr_min <= lr0
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::mlp::MlpArchitecture;

    #[test]
    fn cosine_warmup_anchor_points() {
        let s = LrSchedule::CosineWarmup {
            lr0: 1e-4,
            warmup_epochs: 300,
            lr_min: 1e-12,
        };
        assert_eq!(s.lr_at(0, 3000), 0.0);
        assert!((s.lr_at(150, 3000) - 5e-5).abs() < 1e-20);
        assert_eq!(s.lr_at(300, 3000), 1e-4);
        assert!((s.lr_at(2999, 3000) - 1e-12).abs() < 1e-25);
        let mid = s.lr_at(300 + 2699 / 2, 3000);
        assert!((mid - 5e-5).abs() < 1e-7);
    }

    #[test]
    fn constant_schedule() {
        assert_eq!(LrSchedule::Constant { lr: 1e-3 }.lr_at(1234, 3000), 1e-3);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut mlp = Mlp::new(MlpArchitecture::mask(2, 4), 9).unwrap();
        let before = mlp.clone();
        let n = mlp.params().len();
        let mut state = AdamState::new(n);
        let g = Gradients {
            values: vec![0.0; n],
        };
        adam_step(&mut mlp, &g, &mut state, 1e-3, &AdamConfig::default());
        assert_eq!(mlp, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With g = 1, m_hat = v_hat = 1, so the step is lr / (1 + eps).
        let arch = MlpArchitecture::mask(1, 1);
        let n = arch.param_count();
        let mut mlp = Mlp::from_params(arch, vec![0.0; n]).unwrap();
        let mut state = AdamState::new(n);
        let g = Gradients {
            values: vec![1.0; n],
        };
        adam_step(&mut mlp, &g, &mut state, 1e-3, &AdamConfig::default());
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!(mlp.params().iter().all(|&p| (p - expected).abs() < 1e-18));
    }
}
