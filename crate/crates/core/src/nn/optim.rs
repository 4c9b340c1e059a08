use super::tensor::Param;

/// RMSprop with the accumulator stored on each [`Param`].
///
/// `cache = ρ·cache + (1-ρ)·g²` then `value -= lr·g / sqrt(cache + ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub decay: f64,
    pub eps: f64,
}

impl Default for RmsProp {
    fn default() -> Self {
        RmsProp {
            lr: 0.001,
            decay: 0.9,
            eps: 1e-8,
        }
    }
}

impl RmsProp {
    /// Applies one update and zeroes the gradient.
    pub fn step(&self, p: &mut Param) {
        let Param {
            value,
            grad,
            rms_cache,
        } = p;
        for ((v, g), c) in value
            .data_mut()
            .iter_mut()
            .zip(grad.data_mut().iter_mut())
            .zip(rms_cache.data_mut().iter_mut())
        {
            *c = self.decay * *c + (1.0 - self.decay) * *g * *g;
            *v -= self.lr * *g / (*c + self.eps).sqrt();
            *g = 0.0;
        }
    }
}
