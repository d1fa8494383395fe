//! Central finite differences against an analytic gradient.
//!
//! A ReLU network is only piecewise smooth. When the ±ε probe straddles a
//! gate flip or a max-pool switch, the difference quotient is not an
//! estimate of the derivative at all, so objectives may report a signature
//! of their discrete decisions and such parameters are set aside (and
//! counted) rather than compared.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::ClassifierModel;

/// Anything with parameters, a scalar loss and a claimed gradient.
pub trait Objective {
    fn n_params(&self) -> usize;
    fn param(&self, i: usize) -> f64;
    fn set_param(&mut self, i: usize, v: f64);
    fn loss(&self) -> f64;
    fn gradient(&self) -> Vec<f64>;

    /// Loss plus an identifier of the smooth piece it was evaluated on.
    /// Smooth objectives can keep the default.
    fn loss_and_piece(&self) -> (f64, u64) {
        (self.loss(), 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Index of the worst parameter.
    pub worst: usize,
    pub checked: usize,
    /// Parameters whose probe crossed a non-differentiable point.
    pub skipped_kinks: usize,
}

/// Gradients below this magnitude are compared absolutely; relative error
/// is meaningless when both sides are rounding noise.
pub const GRAD_FLOOR: f64 = 1e-7;

/// Compare on `samples` distinct parameters drawn in a `seed`-shuffled order
/// (all of them when there are fewer smooth ones).
pub fn gradient_check<O: Objective>(obj: &mut O, epsilon: f64, samples: usize, seed: u64) -> GradCheck {
    let analytic = obj.gradient();
    let (_, piece) = obj.loss_and_piece();
    let mut order: Vec<usize> = (0..obj.n_params()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = GradCheck { max_relative_error: 0.0, worst: 0, checked: 0, skipped_kinks: 0 };
    for i in order {
        if out.checked == samples {
            break;
        }
        let orig = obj.param(i);
        obj.set_param(i, orig + epsilon);
        let (up, p_up) = obj.loss_and_piece();
        obj.set_param(i, orig - epsilon);
        let (down, p_down) = obj.loss_and_piece();
        obj.set_param(i, orig);
        if p_up != piece || p_down != piece {
            out.skipped_kinks += 1;
            continue;
        }
        out.checked += 1;
        let numeric = (up - down) / (2.0 * epsilon);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(GRAD_FLOOR);
        if err > out.max_relative_error {
            out.max_relative_error = err;
            out.worst = i;
        }
    }
    out
}

/// The classifier's mean cross-entropy over a fixed batch.
pub struct ModelObjective {
    pub model: ClassifierModel,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl ModelObjective {
    fn batch(&self) -> Vec<(&[f64], usize)> {
        self.inputs.iter().map(Vec::as_slice).zip(self.labels.iter().copied()).collect()
    }
}

impl Objective for ModelObjective {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn param(&self, i: usize) -> f64 {
        self.model.params()[i]
    }

    fn set_param(&mut self, i: usize, v: f64) {
        self.model.params_mut()[i] = v;
    }

    fn loss(&self) -> f64 {
        self.model.loss_and_gradient(&self.batch(), false, false).loss
    }

    fn gradient(&self) -> Vec<f64> {
        self.model.loss_and_gradient(&self.batch(), true, false).gradient
    }

    fn loss_and_piece(&self) -> (f64, u64) {
        self.model.loss_and_signature(&self.batch())
    }
}
