//! Fully connected network: `Linear → BatchNorm → SELU → dropout` for every
//! hidden layer, then a linear output layer.

use ndarray::{Array1, Array2, ArrayView2, Axis, NdFloat, Zip};
use num_traits::FromPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};

/// Scalar type the network can run in.
pub trait Real: NdFloat + FromPrimitive {}

impl<T: NdFloat + FromPrimitive> Real for T {}

pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

fn c<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<F> {
    /// `in × out`.
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub running_mean: Array1<F>,
    pub running_var: Array1<F>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<F> {
    pub dense: Vec<Dense<F>>,
    /// One per hidden layer.
    pub norms: Vec<BatchNorm<F>>,
    pub dropout: f64,
}

/// Activations kept by a training forward pass.
pub struct Cache<F> {
    inputs: Vec<Array2<F>>,
    xhat: Vec<Array2<F>>,
    inv_std: Vec<Array1<F>>,
    pre_act: Vec<Array2<F>>,
    masks: Vec<Option<Array2<F>>>,
}

/// Gradients flattened in [`Mlp::parameters_mut`] order.
pub type Grads<F> = Vec<Vec<F>>;

fn selu<F: Real>(y: F) -> F {
    if y > F::zero() {
        c::<F>(SELU_LAMBDA) * y
    } else {
        c::<F>(SELU_LAMBDA * SELU_ALPHA) * (y.exp() - F::one())
    }
}

fn selu_grad<F: Real>(y: F) -> F {
    if y > F::zero() {
        c(SELU_LAMBDA)
    } else {
        c::<F>(SELU_LAMBDA * SELU_ALPHA) * y.exp()
    }
}

impl<F: Real> Mlp<F> {
    /// LeCun-normal weights, zero biases, identity batch norm.
    pub fn new(input_len: usize, hidden: &[usize], output_len: usize, dropout: f64, seed: u64) -> Result<Self> {
        if input_len == 0 || output_len == 0 || hidden.contains(&0) {
            return Err(invalid("layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(invalid(format!("dropout {dropout} outside [0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input_len];
        sizes.extend_from_slice(hidden);
        sizes.push(output_len);
        let dense = sizes
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (1.0 / w[0] as f64).sqrt()).expect("finite std");
                Dense {
                    weight: Array2::from_shape_simple_fn((w[0], w[1]), || c(normal.sample(&mut rng))),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        let norms = hidden
            .iter()
            .map(|&h| BatchNorm {
                gamma: Array1::ones(h),
                beta: Array1::zeros(h),
                running_mean: Array1::zeros(h),
                running_var: Array1::ones(h),
            })
            .collect();
        Ok(Self { dense, norms, dropout })
    }

    pub fn input_len(&self) -> usize {
        self.dense[0].weight.nrows()
    }

    pub fn output_len(&self) -> usize {
        self.dense.last().expect("at least one layer").weight.ncols()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.norms.iter().map(|n| n.gamma.len()).collect()
    }

    fn check_input(&self, x: &ArrayView2<F>) -> Result<()> {
        if x.ncols() != self.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.input_len(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Eval-mode forward with running statistics.
    pub fn forward(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        self.check_input(&x)?;
        let eps = c::<F>(BN_EPS);
        let mut a = x.to_owned();
        for (d, bn) in self.dense.iter().zip(&self.norms) {
            let mut z = a.dot(&d.weight) + &d.bias;
            let scale = Zip::from(&bn.gamma)
                .and(&bn.running_var)
                .map_collect(|&g, &v| g / (v + eps).sqrt());
            let shift = Zip::from(&bn.beta)
                .and(&bn.running_mean)
                .and(&scale)
                .map_collect(|&b, &m, &s| b - m * s);
            Zip::from(z.rows_mut()).for_each(|mut row| {
                Zip::from(&mut row)
                    .and(&scale)
                    .and(&shift)
                    .for_each(|v, &s, &t| *v = selu(*v * s + t));
            });
            a = z;
        }
        let last = self.dense.last().expect("output layer");
        Ok(a.dot(&last.weight) + &last.bias)
    }

    /// Training forward: batch statistics, seeded dropout, running-stat update.
    pub fn forward_train(&mut self, x: ArrayView2<F>, rng: &mut ChaCha8Rng) -> Result<(Array2<F>, Cache<F>)> {
        self.check_input(&x)?;
        let b = x.nrows();
        let bf = c::<F>(b as f64);
        let eps = c::<F>(BN_EPS);
        let mom = c::<F>(BN_MOMENTUM);
        let keep = 1.0 - self.dropout;
        let keep_scale = c::<F>(1.0 / keep);
        let mut cache = Cache {
            inputs: Vec::new(),
            xhat: Vec::new(),
            inv_std: Vec::new(),
            pre_act: Vec::new(),
            masks: Vec::new(),
        };
        let mut a = x.to_owned();
        for (d, bn) in self.dense.iter().zip(self.norms.iter_mut()) {
            let z = a.dot(&d.weight) + &d.bias;
            let mean = z.sum_axis(Axis(0)) / bf;
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / bf;
            let inv_std = var.mapv(|v| F::one() / (v + eps).sqrt());
            let xhat = &centered * &inv_std;
            let pre = &xhat * &bn.gamma + &bn.beta;
            let unbias = if b > 1 { bf / (bf - F::one()) } else { F::one() };
            Zip::from(&mut bn.running_mean)
                .and(&mean)
                .for_each(|r, &m| *r = (F::one() - mom) * *r + mom * m);
            Zip::from(&mut bn.running_var)
                .and(&var)
                .for_each(|r, &v| *r = (F::one() - mom) * *r + mom * v * unbias);
            let mut out = pre.mapv(selu);
            let mask = (self.dropout > 0.0).then(|| {
                Array2::from_shape_simple_fn(out.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        keep_scale
                    } else {
                        F::zero()
                    }
                })
            });
            if let Some(m) = &mask {
                out *= m;
            }
            cache.inputs.push(a);
            cache.xhat.push(xhat);
            cache.inv_std.push(inv_std);
            cache.pre_act.push(pre);
            cache.masks.push(mask);
            a = out;
        }
        let last = self.dense.last().expect("output layer");
        let y = a.dot(&last.weight) + &last.bias;
        cache.inputs.push(a);
        Ok((y, cache))
    }

    /// Gradients of a loss with respect to every trainable tensor, given
    /// `grad_out = ∂loss/∂output`.
    pub fn backward(&self, cache: &Cache<F>, grad_out: Array2<F>) -> Grads<F> {
        let hidden = self.norms.len();
        let b = grad_out.nrows();
        let bf = c::<F>(b as f64);
        let mut dense_grads: Vec<(Vec<F>, Vec<F>)> = vec![(Vec::new(), Vec::new()); hidden + 1];
        let mut norm_grads: Vec<(Vec<F>, Vec<F>)> = vec![(Vec::new(), Vec::new()); hidden];

        let mut g = grad_out;
        let last = &self.dense[hidden];
        dense_grads[hidden] = (
            flat(cache.inputs[hidden].t().dot(&g)),
            g.sum_axis(Axis(0)).to_vec(),
        );
        g = g.dot(&last.weight.t());
        for l in (0..hidden).rev() {
            if let Some(m) = &cache.masks[l] {
                g *= m;
            }
            Zip::from(&mut g)
                .and(&cache.pre_act[l])
                .for_each(|gv, &y| *gv *= selu_grad(y));
            let xhat = &cache.xhat[l];
            let dgamma = (&g * xhat).sum_axis(Axis(0));
            let dbeta = g.sum_axis(Axis(0));
            let dxhat = &g * &self.norms[l].gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
            let mut dz = dxhat * bf - &sum_dxhat - &(xhat * &sum_dxhat_xhat);
            dz *= &(&cache.inv_std[l] / bf);
            norm_grads[l] = (dgamma.to_vec(), dbeta.to_vec());
            dense_grads[l] = (
                flat(cache.inputs[l].t().dot(&dz)),
                dz.sum_axis(Axis(0)).to_vec(),
            );
            if l > 0 {
                g = dz.dot(&self.dense[l].weight.t());
            }
        }
        let mut out = Vec::with_capacity(2 * (2 * hidden + 1));
        for (w, bias) in dense_grads {
            out.push(w);
            out.push(bias);
        }
        for (gamma, beta) in norm_grads {
            out.push(gamma);
            out.push(beta);
        }
        out
    }

    /// Trainable tensors: every dense weight and bias, then every batch-norm
    /// scale and shift.
    pub fn parameters_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        for d in &mut self.dense {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("contiguous"));
        }
        for n in &mut self.norms {
            out.push(n.gamma.as_slice_mut().expect("contiguous"));
            out.push(n.beta.as_slice_mut().expect("contiguous"));
        }
        out
    }

    /// Every stored tensor in checkpoint order: trainable ones, then running
    /// means and variances.
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        for d in &self.dense {
            out.push(d.weight.as_slice().expect("standard layout"));
            out.push(d.bias.as_slice().expect("contiguous"));
        }
        for n in &self.norms {
            out.push(n.gamma.as_slice().expect("contiguous"));
            out.push(n.beta.as_slice().expect("contiguous"));
        }
        for n in &self.norms {
            out.push(n.running_mean.as_slice().expect("contiguous"));
            out.push(n.running_var.as_slice().expect("contiguous"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut out: Vec<&mut [F]> = Vec::new();
        let mut stats: Vec<&mut [F]> = Vec::new();
        for d in &mut self.dense {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("contiguous"));
        }
        for n in &mut self.norms {
            out.push(n.gamma.as_slice_mut().expect("contiguous"));
            out.push(n.beta.as_slice_mut().expect("contiguous"));
            stats.push(n.running_mean.as_slice_mut().expect("contiguous"));
            stats.push(n.running_var.as_slice_mut().expect("contiguous"));
        }
        out.extend(stats);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.dense.iter().map(|d| d.weight.len() + d.bias.len()).sum::<usize>()
            + self.norms.iter().map(|n| 2 * n.gamma.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn flat<F: Clone>(a: Array2<F>) -> Vec<F> {
    if a.is_standard_layout() {
        let (v, _) = a.into_raw_vec_and_offset();
        v
    } else {
        a.iter().cloned().collect()
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![F::zero(); n]).collect(),
        }
    }

    pub fn for_model(model: &mut Mlp<F>) -> Self {
        let shapes: Vec<usize> = model.parameters_mut().iter().map(|p| p.len()).collect();
        Self::new(&shapes)
    }

    pub fn step(&mut self, params: Vec<&mut [F]>, grads: &[Vec<F>], lr: f64) {
        self.step += 1;
        let b1 = c::<F>(self.beta1);
        let b2 = c::<F>(self.beta2);
        let one = F::one();
        let eps = c::<F>(self.eps);
        let lr_t = c::<F>(
            lr * (1.0 - self.beta2.powi(self.step)).sqrt() / (1.0 - self.beta1.powi(self.step)),
        );
        let eps_t = eps * c::<F>((1.0 - self.beta2.powi(self.step)).sqrt());
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                p[i] -= lr_t * m[i] / (v[i].sqrt() + eps_t);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn total_loss(net: &mut Mlp<f64>, x: &Array2<f64>, t: &Array2<f64>) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, _) = net.clone().forward_train(x.view(), &mut rng).unwrap();
        (&y - t).mapv(|v| v * v).sum()
    }

    fn random(shape: (usize, usize), seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn backprop_matches_central_differences() {
        let mut net = Mlp::<f64>::new(5, &[7, 6, 4], 9, 0.0, 3).unwrap();
        // non-trivial batch norm parameters
        for (i, n) in net.norms.iter_mut().enumerate() {
            n.gamma.mapv_inplace(|g| g + 0.3 * i as f64 - 0.2);
            n.beta.iter_mut().enumerate().for_each(|(j, b)| *b = 0.1 * j as f64 - 0.25);
        }
        let x = random((6, 5), 1);
        let t = random((6, 9), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (y, cache) = net.clone().forward_train(x.view(), &mut rng).unwrap();
        let grads = net.backward(&cache, (&y - &t) * 2.0);

        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (p, g) in grads.iter().enumerate() {
            for (i, &analytic) in g.iter().enumerate() {
                let orig = net.parameters_mut()[p][i];
                net.parameters_mut()[p][i] = orig + h;
                let up = total_loss(&mut net, &x, &t);
                net.parameters_mut()[p][i] = orig - h;
                let down = total_loss(&mut net, &x, &t);
                net.parameters_mut()[p][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let scale = numeric.abs().max(analytic.abs());
                let err = if scale < 1e-7 {
                    (numeric - analytic).abs()
                } else {
                    (numeric - analytic).abs() / scale
                };
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst:e}");
    }

    #[test]
    fn eval_is_pure_and_rowwise() {
        let net = Mlp::<f32>::new(3, &[4, 4, 4], 6, 0.1, 9).unwrap();
        let x = array![[0.5f32, -1.0, 2.0], [0.5, -1.0, 2.0]];
        let a = net.forward(x.view()).unwrap();
        let b = net.forward(x.view()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row(0), a.row(1));
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let mut net = Mlp::<f32>::new(3, &[4, 4, 4], 6, 0.0, 1).unwrap();
        let last = net.dense.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
        let y = net.forward(array![[1.0f32, 2.0, 3.0]].view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_checks() {
        let net = Mlp::<f32>::new(3, &[4, 4, 4], 6, 0.0, 1).unwrap();
        assert!(matches!(
            net.forward(Array2::zeros((1, 2)).view()),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(Mlp::<f32>::new(3, &[4], 6, 1.0, 1).is_err());
        assert_eq!(net.hidden_sizes(), vec![4, 4, 4]);
        assert_eq!(net.output_len(), 6);
    }

    #[test]
    fn selu_is_continuous() {
        assert!((selu(1e-12f64) - selu(-1e-12)).abs() < 1e-11);
        assert!((selu_grad(-1e-12f64) - SELU_LAMBDA * SELU_ALPHA).abs() < 1e-9);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = [1.0f64, -2.0];
        let mut adam = Adam::<f64>::new(&[2]);
        adam.step(vec![&mut p[..]], &[vec![0.5, -3.0]], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 1.9).abs() < 1e-6);
    }
}
