//! SGD with momentum, L2 regularisation and a step learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;

/// Learning-rate multipliers applied from a given epoch onwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Schedule {
    pub milestones: Vec<(usize, f64)>,
}

impl Schedule {
    /// `lr` drops by 0.2 at epochs 50, 100 and 140.
    pub fn long_run() -> Self {
        Self {
            milestones: vec![(50, 0.2), (100, 0.2), (140, 0.2)],
        }
    }

    /// Product of all multipliers whose epoch has been reached.
    pub fn factor(&self, epoch: usize) -> f64 {
        self.milestones
            .iter()
            .filter(|(e, _)| *e <= epoch)
            .map(|(_, m)| m)
            .product()
    }
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub schedule: Schedule,
    velocity: Vec<Vec<f64>>,
    current_lr: f64,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64, l2: f64, schedule: Schedule) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {learning_rate} must be positive")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum {momentum} outside [0, 1)")));
        }
        if !(l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("l2 {l2} must be nonnegative")));
        }
        Ok(Self {
            learning_rate,
            momentum,
            l2,
            schedule,
            velocity: Vec::new(),
            current_lr: learning_rate,
        })
    }

    /// Sets the effective rate for `epoch` and returns it.
    pub fn start_epoch(&mut self, epoch: usize) -> f64 {
        self.current_lr = self.learning_rate * self.schedule.factor(epoch);
        self.current_lr
    }

    pub fn lr(&self) -> f64 {
        self.current_lr
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    /// `v ← μ·v − lr·(g + λ·p); p ← p + v`, then clears gradients and
    /// re-projects activation parameters.
    ///
    /// Every trainable parameter must carry a gradient; the update is applied
    /// only once that has been checked for all of them.
    pub fn step(&mut self, net: &mut Network) -> Result<()> {
        let mut missing = None;
        net.visit_params(&mut |p| {
            if p.grad.is_none() && missing.is_none() {
                missing = Some(p.name);
            }
        });
        if let Some(name) = missing {
            return Err(Error::MissingGrad(name));
        }

        let (lr, mu, l2) = (self.current_lr, self.momentum, self.l2);
        let velocity = &mut self.velocity;
        let mut index = 0;
        net.visit_params(&mut |p| {
            if velocity.len() <= index {
                velocity.push(vec![0.0; p.value.len()]);
            }
            let v = &mut velocity[index];
            let grad = p.grad.expect("checked above");
            let decay = if p.decay { l2 } else { 0.0 };
            for ((vi, pi), gi) in v.iter_mut().zip(p.value.iter_mut()).zip(grad) {
                *vi = mu * *vi - lr * (gi + decay * *pi);
                *pi += *vi;
            }
            index += 1;
        });
        net.clear_grads();
        net.project_constraints();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Layer, Linear};
    use crate::network::sum_loss;
    use crate::tensor::Tensor;

    // One linear unit with weight `w` fed x = 1, so d(sum)/dw = `grad`.
    fn scalar_net(w: f64) -> Network {
        let lin = Linear {
            weight: Tensor::new([1, 1], vec![w]).unwrap().into_param(),
            bias: Tensor::zeros([1]),
        };
        Network::new(vec![Layer::Linear(lin)], [1]).unwrap()
    }

    fn weight(net: &Network) -> f64 {
        match &net.layers()[0] {
            Layer::Linear(l) => l.weight.data()[0],
            _ => unreachable!(),
        }
    }

    fn backprop_with_grad(net: &mut Network, grad: f64) {
        let y = net.forward(&Tensor::new([1, 1], vec![grad]).unwrap()).unwrap();
        net.backward(&sum_loss(&y)).unwrap();
    }

    #[test]
    fn vanilla_step() {
        let mut net = scalar_net(1.0);
        let mut opt = Sgd::new(0.1, 0.0, 0.0, Schedule::default()).unwrap();
        backprop_with_grad(&mut net, 2.0);
        opt.step(&mut net).unwrap();
        assert!((weight(&net) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn momentum_two_steps() {
        let mut net = scalar_net(0.0);
        let mut opt = Sgd::new(0.1, 0.9, 0.0, Schedule::default()).unwrap();
        for _ in 0..2 {
            backprop_with_grad(&mut net, 1.0);
            opt.step(&mut net).unwrap();
        }
        assert!((weight(&net) + 0.29).abs() < 1e-12);
    }

    #[test]
    fn l2_decay_adds_to_gradient() {
        let mut net = scalar_net(1.0);
        let mut opt = Sgd::new(0.1, 0.0, 0.5, Schedule::default()).unwrap();
        backprop_with_grad(&mut net, 0.0);
        opt.step(&mut net).unwrap();
        assert!((weight(&net) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn step_without_grad_fails() {
        let mut net = scalar_net(1.0);
        let mut opt = Sgd::new(0.1, 0.9, 0.0, Schedule::default()).unwrap();
        backprop_with_grad(&mut net, 1.0);
        opt.step(&mut net).unwrap();
        let err = opt.step(&mut net).unwrap_err();
        assert!(matches!(err, Error::MissingGrad(ref n) if n == "0.linear.weight"), "{err}");
    }

    #[test]
    fn schedule_drops_once_per_milestone() {
        let mut opt = Sgd::new(0.1, 0.9, 5e-4, Schedule { milestones: vec![(50, 0.2)] }).unwrap();
        assert!((opt.start_epoch(49) - 0.1).abs() < 1e-15);
        assert!((opt.start_epoch(50) - 0.02).abs() < 1e-15);
        assert!((opt.start_epoch(50) - 0.02).abs() < 1e-15);
        assert!((opt.start_epoch(120) - 0.02).abs() < 1e-15);
        let long = Schedule::long_run();
        assert!((long.factor(159) - 0.008).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Sgd::new(0.0, 0.9, 0.0, Schedule::default()).is_err());
        assert!(Sgd::new(0.1, 1.0, 0.0, Schedule::default()).is_err());
        assert!(Sgd::new(0.1, 0.9, -1.0, Schedule::default()).is_err());
    }
}
