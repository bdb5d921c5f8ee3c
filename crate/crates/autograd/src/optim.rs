use crate::{ParamSet, Scalar, Tensor};

/// A first-order update rule over a [`ParamSet`]; `grads` follow the set's
/// parameter order.
pub trait Optimizer<T: Scalar> {
    fn step(&mut self, params: &mut ParamSet<T>, grads: &[Tensor<T>]);
    fn learning_rate(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self { lr, beta1, beta2, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn step(&mut self, params: &mut ParamSet<T>, grads: &[Tensor<T>]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| Tensor::zeros(g.shape().to_vec())).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let bc1 = T::of(1.0 - self.beta1.powi(self.t));
        let bc2 = T::of(1.0 - self.beta2.powi(self.t));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for (i, (_, p)) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (((p, &g), m), v) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }
}

/// RMSprop without momentum (smoothing 0.99, eps 1e-8).
#[derive(Debug, Clone)]
pub struct RmsProp<T: Scalar> {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
    sq: Vec<Tensor<T>>,
}

impl<T: Scalar> RmsProp<T> {
    pub fn new(lr: f64) -> Self {
        Self { lr, alpha: 0.99, eps: 1e-8, sq: Vec::new() }
    }
}

impl<T: Scalar> Optimizer<T> for RmsProp<T> {
    fn step(&mut self, params: &mut ParamSet<T>, grads: &[Tensor<T>]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        if self.sq.is_empty() {
            self.sq = grads.iter().map(|g| Tensor::zeros(g.shape().to_vec())).collect();
        }
        let (a, lr, eps) = (T::of(self.alpha), T::of(self.lr), T::of(self.eps));
        for (i, (_, p)) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let s = self.sq[i].data_mut();
            for ((p, &g), s) in p.data_mut().iter_mut().zip(g).zip(s.iter_mut()) {
                *s = a * *s + (T::one() - a) * g * g;
                *p -= lr * g / (s.sqrt() + eps);
            }
        }
    }

    fn learning_rate(&self) -> f64 {
        self.lr
    }
}
