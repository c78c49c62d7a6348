use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ForgerError, Result};

/// Fully connected network with rectified-linear hidden layers and a linear
/// output layer. All parameters live in one flat vector; layer `l` stores
/// its `in x out` weight matrix row-major, followed by its `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// `acts[0]` is the input; `acts[l]` is the post-activation of layer `l-1`.
    acts: Vec<Array2<f64>>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(ForgerError::InvalidConfig(format!("layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// He-normal weights, zero biases.
    pub fn he_init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Mlp::zeros(sizes)?;
        for l in 0..net.num_layers() {
            let fan_in = net.sizes[l];
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| ForgerError::InvalidConfig(e.to_string()))?;
            let (w, _) = net.layer_ranges(l);
            for p in &mut net.params[w] {
                *p = normal.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = Mlp::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(ForgerError::Dimension {
                expected: net.params.len(),
                actual: params.len(),
            });
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Flat index ranges of layer `l`'s weights and biases.
    pub fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start = param_count(&self.sizes[..=l]);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (start..start + i * o, start + i * o..start + i * o + o)
    }

    /// True for every flat index that is a weight rather than a bias.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.params.len()];
        for l in 0..self.num_layers() {
            for m in &mut mask[self.layer_ranges(l).0] {
                *m = true;
            }
        }
        mask
    }

    fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (w, b) = self.layer_ranges(l);
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (
            ArrayView2::from_shape((i, o), &self.params[w]).expect("layer shape"),
            ArrayView1::from(&self.params[b]),
        )
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(ForgerError::Dimension {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// Batched forward pass; rows of `x` are inputs.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let mut z = a.dot(&w);
            z += &b;
            if l + 1 < self.num_layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, MlpCache)> {
        self.check_input(&x)?;
        let mut acts = vec![x.to_owned()];
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let mut z = acts[l].dot(&w);
            z += &b;
            if l + 1 < self.num_layers() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        let out = acts.pop().unwrap();
        Ok((out, MlpCache { acts }))
    }

    /// Gradient of a scalar loss with respect to all parameters, given the
    /// loss gradient `d_out` with respect to the outputs of the cached pass.
    pub fn backward(&self, cache: &MlpCache, d_out: &Array2<f64>) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let mut dz = d_out.clone();
        for l in (0..self.num_layers()).rev() {
            let a_in = &cache.acts[l];
            let (wr, br) = self.layer_ranges(l);
            let dw = a_in.t().dot(&dz);
            grads[wr].copy_from_slice(dw.as_standard_layout().as_slice().unwrap());
            let db = dz.sum_axis(Axis(0));
            grads[br].copy_from_slice(db.as_slice().unwrap());
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut da = dz.dot(&w.t());
                // relu gate: post-activation is positive exactly where the gate is open
                ndarray::Zip::from(&mut da).and(a_in).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                dz = da;
            }
        }
        grads
    }

    /// Sum of squared weights, plus biases when `include_biases`.
    pub fn l2(&self, include_biases: bool) -> f64 {
        let mut sum = 0.0;
        for l in 0..self.num_layers() {
            let (w, b) = self.layer_ranges(l);
            sum += self.params[w].iter().map(|v| v * v).sum::<f64>();
            if include_biases {
                sum += self.params[b].iter().map(|v| v * v).sum::<f64>();
            }
        }
        sum
    }

    /// Adds `coef * d/dθ l2(θ)` to `grads`.
    pub fn add_l2_grad(&self, coef: f64, include_biases: bool, grads: &mut [f64]) {
        if coef == 0.0 {
            return;
        }
        for l in 0..self.num_layers() {
            let (w, b) = self.layer_ranges(l);
            for i in w {
                grads[i] += 2.0 * coef * self.params[i];
            }
            if include_biases {
                for i in b {
                    grads[i] += 2.0 * coef * self.params[i];
                }
            }
        }
    }

    /// Output row of a single input.
    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| ForgerError::Contract(e.to_string()))?;
        let out = self.forward(view)?;
        Ok(out.slice(s![0, ..]).to_vec())
    }
}
