//! Fully connected ELU network with hand-written reverse mode, including the
//! double-backward pass needed to differentiate an input-gradient penalty.
//!
//! Batches are rows: `z_l = h_l W_lᵀ + b_l`, `h_{l+1} = elu(z_l)` for hidden
//! layers, linear output. `elu'(0)` is taken as 1 (right limit).

use ndarray::{Array1, Array2, ArrayView2, Axis as NdAxis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::CriticError;

#[inline]
fn elu(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

#[inline]
fn elu_d1(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        z.exp()
    }
}

#[inline]
fn elu_d2(z: f64) -> f64 {
    if z >= 0.0 {
        0.0
    } else {
        z.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }
}

/// Network or gradient: one [`Dense`] per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations saved by [`Mlp::forward_cached`].
#[derive(Debug, Clone)]
pub struct Cache {
    /// Layer inputs `h_0 .. h_{L-1}` (`h_0` is the batch).
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activations `z_0 .. z_{L-1}`.
    pub pre: Vec<Array2<f64>>,
}

impl Cache {
    /// First output per row.
    pub fn output(&self) -> Array1<f64> {
        self.pre
            .last()
            .expect("at least one layer")
            .column(0)
            .to_owned()
    }

    pub fn output_matrix(&self) -> &Array2<f64> {
        self.pre.last().expect("at least one layer")
    }
}

/// Per-sample input gradients and the intermediate products needed to
/// differentiate them again.
#[derive(Debug, Clone)]
pub struct InputGradTape {
    /// `D_l`: sensitivity of the output to `z_l`, per sample.
    d: Vec<Array2<f64>>,
    /// `A_l = D_l W_l`: sensitivity to `h_l`; `A_0` is `∇_x D`.
    a: Vec<Array2<f64>>,
}

impl InputGradTape {
    pub fn input_gradient(&self) -> &Array2<f64> {
        &self.a[0]
    }
}

impl Mlp {
    /// Layer widths `[in, hidden.., out]`, all parameters zero.
    pub fn zeros(widths: &[usize]) -> Result<Self, CriticError> {
        validate_widths(widths)?;
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::zeros(w[0], w[1]))
                .collect(),
        })
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self, CriticError> {
        let mut net = Self::zeros(widths)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            layer.w.mapv_inplace(|_| rng.gen_range(-bound..bound));
            layer.b.mapv_inplace(|_| rng.gen_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].inputs()];
        w.extend(self.layers.iter().map(Dense::outputs));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Same architecture, all zeros: the shape of a gradient.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<(), CriticError> {
        if x.ncols() != self.input_dim() {
            return Err(CriticError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Err(CriticError::EmptyBatch);
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<Cache, CriticError> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.w.t()) + &layer.b;
            let next = if l < last {
                z.mapv(elu)
            } else {
                Array2::zeros((0, 0))
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        Ok(Cache { inputs, pre })
    }

    /// Network outputs, one row per input row.
    pub fn forward_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, CriticError> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = h.dot(&layer.w.t()) + &layer.b;
            h = if l < last { z.mapv(elu) } else { z };
        }
        Ok(h)
    }

    /// First output for each row of `x` (the critic value).
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, CriticError> {
        Ok(self.forward_matrix(x)?.column(0).to_owned())
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<f64, CriticError> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward(view)?[0])
    }

    /// `∂D/∂x` of the first output for every row of the cached batch.
    pub fn input_gradients(&self, cache: &Cache) -> InputGradTape {
        let n = self.layers.len();
        let batch = cache.pre[0].nrows();
        let mut d = vec![Array2::zeros((0, 0)); n];
        let mut a = vec![Array2::zeros((0, 0)); n];
        let mut top = Array2::zeros((batch, self.output_dim()));
        top.column_mut(0).fill(1.0);
        a[n - 1] = top.dot(&self.layers[n - 1].w);
        d[n - 1] = top;
        for l in (0..n - 1).rev() {
            d[l] = &a[l + 1] * &cache.pre[l].mapv(elu_d1);
            a[l] = d[l].dot(&self.layers[l].w);
        }
        InputGradTape { d, a }
    }

    /// Parameter gradient of `Σ_b ⟨ȳ_b, y(x_b)⟩ + Σ_b ⟨ḡ_b, ∇_x D(x_b)⟩`.
    ///
    /// `main` pairs a cache with the output adjoint `ȳ` (batch × outputs);
    /// `input_adjoint` (with its own cache and tape) carries `ḡ`.
    pub fn backward(
        &self,
        main: Option<(&Cache, &Array2<f64>)>,
        input_adjoint: Option<(&Cache, &InputGradTape, &Array2<f64>)>,
    ) -> Mlp {
        let mut grad = self.zeros_like();
        if let Some((cache, top)) = main {
            self.backprop_forward(
                cache,
                vec![None; self.layers.len()],
                Some(top.clone()),
                &mut grad,
            );
        }
        if let Some((cache, tape, adjoint)) = input_adjoint {
            let n = self.layers.len();
            let mut direct: Vec<Option<Array2<f64>>> = vec![None; n];
            let mut a_bar = adjoint.clone();
            for l in 0..n - 1 {
                // A_l = D_l W_l
                grad.layers[l].w += &tape.d[l].t().dot(&a_bar);
                let d_bar = a_bar.dot(&self.layers[l].w.t());
                // D_l = A_{l+1} ⊙ elu'(z_l)
                let z = &cache.pre[l];
                direct[l] = Some(&d_bar * &tape.a[l + 1] * &z.mapv(elu_d2));
                a_bar = d_bar * z.mapv(elu_d1);
            }
            // A_{L-1} = D_{L-1} W_{L-1} with D_{L-1} the constant output selector
            grad.layers[n - 1].w += &tape.d[n - 1].t().dot(&a_bar);
            self.backprop_forward(cache, direct, None, &mut grad);
        }
        grad
    }

    /// Reverse of the forward pass, seeded with per-layer direct adjoints on
    /// the pre-activations and an optional output adjoint.
    fn backprop_forward(
        &self,
        cache: &Cache,
        direct: Vec<Option<Array2<f64>>>,
        top: Option<Array2<f64>>,
        grad: &mut Mlp,
    ) {
        let n = self.layers.len();
        let mut h_bar: Option<Array2<f64>> = None;
        for l in (0..n).rev() {
            let mut z_bar = if l == n - 1 { top.clone() } else { None };
            if let Some(hb) = h_bar.take() {
                let through = hb * cache.pre[l].mapv(elu_d1);
                z_bar = Some(match z_bar {
                    Some(z) => z + through,
                    None => through,
                });
            }
            if let Some(d) = &direct[l] {
                z_bar = Some(match z_bar {
                    Some(z) => z + d,
                    None => d.clone(),
                });
            }
            let Some(z_bar) = z_bar else { continue };
            grad.layers[l].w += &z_bar.t().dot(&cache.inputs[l]);
            grad.layers[l].b += &z_bar.sum_axis(NdAxis(0));
            if l > 0 {
                h_bar = Some(z_bar.dot(&self.layers[l].w));
            }
        }
    }

    /// Parameters in layer order, each weight matrix row-major then its bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), CriticError> {
        if flat.len() != self.num_params() {
            return Err(CriticError::DimensionMismatch {
                expected: self.num_params(),
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.w.iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
            l.b.iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// `self += scale · other`.
    pub fn axpy(&mut self, scale: f64, other: &Mlp) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.scaled_add(scale, &b.w);
            a.b.scaled_add(scale, &b.b);
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            widths: self.widths(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerRecord {
                    weights: l.w.iter().copied().collect(),
                    biases: l.b.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, CriticError> {
        if ck.version != CHECKPOINT_VERSION {
            return Err(CriticError::Checkpoint(format!(
                "unsupported version {}",
                ck.version
            )));
        }
        let mut net =
            Self::zeros(&ck.widths).map_err(|e| CriticError::Checkpoint(e.to_string()))?;
        if ck.layers.len() != net.layers.len() {
            return Err(CriticError::Checkpoint(format!(
                "{} layer records for {} layers",
                ck.layers.len(),
                net.layers.len()
            )));
        }
        for (i, (layer, rec)) in net.layers.iter_mut().zip(&ck.layers).enumerate() {
            if rec.weights.len() != layer.w.len() || rec.biases.len() != layer.b.len() {
                return Err(CriticError::Checkpoint(format!(
                    "layer {i}: parameter count does not match widths"
                )));
            }
            if !rec.weights.iter().chain(&rec.biases).all(|v| v.is_finite()) {
                return Err(CriticError::Checkpoint(format!(
                    "layer {i}: non-finite parameter"
                )));
            }
            layer.w = Array2::from_shape_vec(layer.w.raw_dim(), rec.weights.clone())
                .expect("length checked");
            layer.b = Array1::from(rec.biases.clone());
        }
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CriticError> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| CriticError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(&ck)
    }
}

fn validate_widths(widths: &[usize]) -> Result<(), CriticError> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(CriticError::InvalidConfig(format!(
            "layer widths {widths:?} need ≥ 2 non-zero entries"
        )));
    }
    Ok(())
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// Row-major `out × in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub widths: Vec<usize>,
    pub layers: Vec<LayerRecord>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent per-sample forward with explicit loops.
    fn naive_forward(net: &Mlp, x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        for (l, layer) in net.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs()];
            for o in 0..layer.outputs() {
                z[o] = layer.b[o]
                    + (0..layer.inputs())
                        .map(|i| layer.w[[o, i]] * h[i])
                        .sum::<f64>();
            }
            h = if l + 1 < net.layers.len() {
                z.iter()
                    .map(|&v| if v >= 0.0 { v } else { v.exp() - 1.0 })
                    .collect()
            } else {
                z
            };
        }
        h[0]
    }

    fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.5..1.5))
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 8, 1]).unwrap();
        assert!(net
            .forward(array![[1.0, -2.0, 3.0]].view())
            .unwrap()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn linear_net_is_a_dot_product() {
        let mut net = Mlp::zeros(&[3, 1]).unwrap();
        net.layers[0].w = array![[0.5, -1.0, 2.0]];
        let x = array![[1.0, 2.0, 3.0]];
        assert_eq!(net.forward(x.view()).unwrap()[0], 4.5);
        let tape = net.input_gradients(&net.forward_cached(x.view()).unwrap());
        assert_eq!(tape.input_gradient().row(0).to_vec(), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn matches_naive_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[5, 16, 7, 1], &mut rng).unwrap();
        let x = random_batch(&mut rng, 9, 5);
        let out = net.forward(x.view()).unwrap();
        let cached = net.forward_cached(x.view()).unwrap().output();
        for (b, row) in x.rows().into_iter().enumerate() {
            let naive = naive_forward(&net, row.as_slice().unwrap());
            assert!((out[b] - naive).abs() <= 1e-12);
            assert_eq!(out[b], cached[b]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::zeros(&[3, 1]).unwrap();
        assert_eq!(
            net.forward(array![[1.0, 2.0]].view()),
            Err(CriticError::DimensionMismatch {
                expected: 3,
                actual: 2
            })
        );
    }

    #[test]
    fn elu_right_limit_at_zero() {
        assert_eq!(elu_d1(0.0), 1.0);
        assert_eq!(elu_d2(0.0), 0.0);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::new(&[4, 6, 1], &mut rng).unwrap();
        let mut other = net.zeros_like();
        other.set_flat(&net.to_flat()).unwrap();
        assert_eq!(net, other);
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[4, 32, 16, 1], &mut rng).unwrap();
        let back = Mlp::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn input_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[3, 10, 10, 1], &mut rng).unwrap();
        let x = random_batch(&mut rng, 4, 3);
        let tape = net.input_gradients(&net.forward_cached(x.view()).unwrap());
        let h = 1e-5;
        for b in 0..4 {
            for i in 0..3 {
                let mut p = x.row(b).to_vec();
                let mut m = p.clone();
                p[i] += h;
                m[i] -= h;
                let fd = (net.forward_one(&p).unwrap() - net.forward_one(&m).unwrap()) / (2.0 * h);
                let g = tape.input_gradient()[[b, i]];
                assert!((g - fd).abs() <= 1e-7 * fd.abs().max(1.0));
            }
        }
    }
}
