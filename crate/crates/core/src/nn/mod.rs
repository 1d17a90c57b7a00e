//! Dense feed-forward networks with exact reverse-mode gradients.
//!
//! Parameters of a network live in one flat `Vec<f64>`. Layer `l` occupies
//! its weight matrix (`out×in`, row-major) followed by its bias vector, and
//! layers follow each other in order. Gradients and Adam moments share the
//! layout, so optimiser and target updates are plain elementwise loops.
//!
//! A network may take a second input (the critic's action) that is appended
//! to the input of one chosen layer. Appending it at layer 0 is ordinary
//! input concatenation.

mod adam;
mod gemm;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamConfig, AdamState};
use gemm::gemm;

/// `e^x` for `x ∈ [-708, 0]`: round-to-nearest range reduction by `ln 2`
/// and a degree-13 Taylor polynomial (truncation below 1e-17). Branch-free,
/// so loops over it vectorise.
#[inline(always)]
fn exp_nonpositive(x: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5·2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let t = x * core::f64::consts::LOG2_E + SHIFT;
    let n = t - SHIFT;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for k in (1..13u32).rev() {
        p = p * r + INV_FACTORIAL[k as usize];
    }
    p = p * r + 1.0;
    let k = t.to_bits() as i64 - SHIFT.to_bits() as i64;
    p * f64::from_bits(((k + 1023) as u64) << 52)
}

const INV_FACTORIAL: [f64; 13] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5_040.0,
    1.0 / 40_320.0,
    1.0 / 362_880.0,
    1.0 / 3_628_800.0,
    1.0 / 39_916_800.0,
    1.0 / 479_001_600.0,
];

/// `tanh` via one `e^{-2|x|}`. NaN propagates.
#[inline(always)]
pub(crate) fn tanh(x: f64) -> f64 {
    let a = x.abs();
    let a = if a > 19.0 { 19.0 } else { a };
    let e = exp_nonpositive(-2.0 * a);
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Tanh,
    Linear,
    Relu,
}

impl Activation {
    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Tanh => z.iter_mut().for_each(|v| *v = tanh(*v)),
            Activation::Linear => {}
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the output `y`.
    fn backprop(self, y: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Tanh => {
                for (g, y) in grad.iter_mut().zip(y) {
                    *g *= 1.0 - y * y;
                }
            }
            Activation::Linear => {}
            Activation::Relu => {
                for (g, y) in grad.iter_mut().zip(y) {
                    if *y <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Linear => 1,
            Activation::Relu => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Linear),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// A secondary input appended to the input of `layer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxInput {
    pub layer: usize,
    pub width: usize,
}

/// Architecture of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpShape {
    /// Main path: input, hidden widths, output.
    pub layer_dims: Vec<usize>,
    pub aux: Option<AuxInput>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

impl MlpShape {
    pub fn new(layer_dims: Vec<usize>, hidden: Activation, output: Activation) -> Self {
        Self {
            layer_dims,
            aux: None,
            hidden_activation: hidden,
            output_activation: output,
        }
    }

    pub fn with_aux(mut self, layer: usize, width: usize) -> Self {
        self.aux = Some(AuxInput { layer, width });
        self
    }

    pub fn layer_count(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }

    /// `(fan_in, fan_out)` of layer `l`, including any appended input.
    pub fn layer_shape(&self, l: usize) -> (usize, usize) {
        let extra = match self.aux {
            Some(a) if a.layer == l => a.width,
            _ => 0,
        };
        (self.layer_dims[l] + extra, self.layer_dims[l + 1])
    }

    pub fn param_count(&self) -> usize {
        (0..self.layer_count())
            .map(|l| {
                let (i, o) = self.layer_shape(l);
                o * i + o
            })
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::config(
                "layer_dims",
                "need at least input and output",
            ));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::config("layer_dims", "widths must be >= 1"));
        }
        if let Some(a) = self.aux {
            if a.layer >= self.layer_count() || a.width == 0 {
                return Err(Error::config(
                    "aux_input",
                    "layer out of range or zero width",
                ));
            }
        }
        Ok(())
    }

    fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.layer_count() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }
}

/// Weights and biases of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    shape: MlpShape,
    values: Vec<f64>,
}

/// Per-parameter gradient in the [`MlpParams`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().for_each(|g| *g *= k);
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    /// Input of each layer (aux input already appended); `None` when it is
    /// the previous layer's output.
    inputs: Vec<Option<Vec<f64>>>,
    /// Post-activation output of each layer.
    outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Network output, `batch × output_dim` row-major.
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    fn input(&self, l: usize) -> &[f64] {
        match &self.inputs[l] {
            Some(x) => x,
            None => &self.outputs[l - 1],
        }
    }
}

/// Gradients of a scalar loss with respect to parameters and inputs.
#[derive(Debug, Clone)]
pub struct Backprop {
    pub params: Gradients,
    pub input: Vec<f64>,
    /// Gradient w.r.t. the appended input; empty without one.
    pub aux: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(shape: MlpShape) -> Result<Self> {
        shape.validate()?;
        let n = shape.param_count();
        Ok(Self {
            shape,
            values: vec![0.0; n],
        })
    }

    pub fn from_values(shape: MlpShape, values: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.param_count() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: shape.param_count(),
                got: values.len(),
            });
        }
        Ok(Self { shape, values })
    }

    /// Uniform fan-in initialisation, `U(-1/√fan_in, 1/√fan_in)`, with the
    /// last layer additionally multiplied by `final_layer_scale`.
    pub fn init<R: Rng + ?Sized>(
        shape: MlpShape,
        final_layer_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        let layers = net.shape.layer_count();
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = net.shape.layer_shape(l);
            let mut bound = 1.0 / libm::sqrt(fan_in as f64);
            if l + 1 == layers {
                bound *= final_layer_scale;
            }
            let len = fan_out * fan_in + fan_out;
            for v in &mut net.values[offset..offset + len] {
                *v = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
            offset += len;
        }
        Ok(net)
    }

    pub fn shape(&self) -> &MlpShape {
        &self.shape
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.shape.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.shape.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.shape.layer_dims.last().unwrap_or(&0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| {
                let (i, o) = self.shape.layer_shape(k);
                o * i + o
            })
            .sum()
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (i, o) = self.shape.layer_shape(l);
        let start = self.layer_offset(l);
        &self.values[start..start + o * i]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (i, o) = self.shape.layer_shape(l);
        let start = self.layer_offset(l) + o * i;
        &self.values[start..start + o]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (i, o) = self.shape.layer_shape(l);
        let start = self.layer_offset(l);
        &mut self.values[start..start + o * i]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        let (i, o) = self.shape.layer_shape(l);
        let start = self.layer_offset(l) + o * i;
        &mut self.values[start..start + o]
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.shape == other.shape
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Forward pass over `batch` row-major samples.
    pub fn forward(
        &self,
        input: &[f64],
        aux: Option<&[f64]>,
        batch: usize,
    ) -> Result<ForwardCache> {
        let shape = &self.shape;
        check_len("network input", shape.layer_dims[0] * batch, input.len())?;
        match (shape.aux, aux) {
            (Some(a), Some(x)) => check_len("auxiliary input", a.width * batch, x.len())?,
            (None, None) => {}
            (Some(a), None) => {
                return Err(Error::Dimension {
                    context: "auxiliary input",
                    expected: a.width * batch,
                    got: 0,
                })
            }
            (None, Some(x)) => {
                return Err(Error::Dimension {
                    context: "auxiliary input",
                    expected: 0,
                    got: x.len(),
                })
            }
        }

        let layers = shape.layer_count();
        let mut inputs = Vec::with_capacity(layers);
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            let (fan_in, fan_out) = shape.layer_shape(l);
            let prev: &[f64] = if l == 0 { input } else { &outputs[l - 1] };
            let joined = match (shape.aux, aux) {
                (Some(a), Some(extra)) if a.layer == l => {
                    let main = shape.layer_dims[l];
                    let mut joined = Vec::with_capacity(batch * fan_in);
                    for b in 0..batch {
                        joined.extend_from_slice(&prev[b * main..(b + 1) * main]);
                        joined.extend_from_slice(&extra[b * a.width..(b + 1) * a.width]);
                    }
                    Some(joined)
                }
                _ if l == 0 => Some(input.to_vec()),
                _ => None,
            };
            let x = joined.as_deref().unwrap_or(prev);
            let w = &self.values[offset..offset + fan_out * fan_in];
            let bias = &self.values[offset + fan_out * fan_in..offset + fan_out * fan_in + fan_out];
            let mut z = Vec::with_capacity(batch * fan_out);
            for _ in 0..batch {
                z.extend_from_slice(bias);
            }
            gemm(batch, fan_in, fan_out, x, false, w, true, 1.0, &mut z);
            shape.activation(l).apply(&mut z);
            inputs.push(joined);
            outputs.push(z);
            offset += fan_out * fan_in + fan_out;
        }
        Ok(ForwardCache {
            batch,
            inputs,
            outputs,
        })
    }

    /// Single-sample evaluation without an appended input.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward(input, None, 1)?;
        Ok(cache.outputs.pop().unwrap_or_default())
    }

    /// Reverse pass for `output_grad = ∂L/∂output` (`batch × output_dim`).
    pub fn backward(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Backprop> {
        self.reverse(cache, output_grad, true)
    }

    /// Like [`backward`](Self::backward) but skips parameter gradients;
    /// `params` of the result is empty.
    pub fn input_gradient(&self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Backprop> {
        self.reverse(cache, output_grad, false)
    }

    fn reverse(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        with_params: bool,
    ) -> Result<Backprop> {
        let shape = &self.shape;
        let layers = shape.layer_count();
        let batch = cache.batch;
        if cache.outputs.len() != layers {
            return Err(Error::Dimension {
                context: "forward cache layers",
                expected: layers,
                got: cache.outputs.len(),
            });
        }
        for l in 0..layers {
            let (fan_in, fan_out) = shape.layer_shape(l);
            check_len("forward cache input", batch * fan_in, cache.input(l).len())?;
            check_len(
                "forward cache output",
                batch * fan_out,
                cache.outputs[l].len(),
            )?;
        }
        check_len(
            "output gradient",
            batch * self.output_dim(),
            output_grad.len(),
        )?;

        let mut params = if with_params {
            vec![0.0; self.values.len()]
        } else {
            Vec::new()
        };
        let mut aux_grad = Vec::new();
        let mut grad = output_grad.to_vec();
        let mut offset = self.values.len();
        for l in (0..layers).rev() {
            let (fan_in, fan_out) = shape.layer_shape(l);
            offset -= fan_out * fan_in + fan_out;
            shape.activation(l).backprop(&cache.outputs[l], &mut grad);

            if with_params {
                let (dw, db) = params[offset..offset + fan_out * fan_in + fan_out]
                    .split_at_mut(fan_out * fan_in);
                gemm(
                    fan_out,
                    batch,
                    fan_in,
                    &grad,
                    true,
                    cache.input(l),
                    false,
                    0.0,
                    dw,
                );
                for row in grad.chunks_exact(fan_out) {
                    for (d, g) in db.iter_mut().zip(row) {
                        *d += g;
                    }
                }
            }

            let w = &self.values[offset..offset + fan_out * fan_in];
            let mut dx = vec![0.0; batch * fan_in];
            gemm(batch, fan_out, fan_in, &grad, false, w, false, 0.0, &mut dx);

            grad = match shape.aux {
                Some(a) if a.layer == l => {
                    let main = shape.layer_dims[l];
                    let mut main_grad = Vec::with_capacity(batch * main);
                    aux_grad = Vec::with_capacity(batch * a.width);
                    for row in dx.chunks_exact(fan_in) {
                        main_grad.extend_from_slice(&row[..main]);
                        aux_grad.extend_from_slice(&row[main..]);
                    }
                    main_grad
                }
                _ => dx,
            };
        }
        Ok(Backprop {
            params: Gradients(params),
            input: grad,
            aux: aux_grad,
        })
    }
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}

/// `target ← τ·source + (1−τ)·target`.
pub fn soft_update(target: &mut MlpParams, source: &MlpParams, tau: f64) -> Result<()> {
    if !target.same_shape(source) {
        return Err(Error::Dimension {
            context: "soft update",
            expected: target.values.len(),
            got: source.values.len(),
        });
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config("hp.tau", "must lie in [0, 1]"));
    }
    let keep = 1.0 - tau;
    for (t, s) in target.values.iter_mut().zip(&source.values) {
        *t = tau * s + keep * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, domain};

    fn tanh_net(dims: &[usize], seed: u64) -> MlpParams {
        let shape = MlpShape::new(dims.to_vec(), Activation::Tanh, Activation::Tanh);
        MlpParams::init(shape, 1.0, &mut rng::stream(seed, domain::INIT_ACTOR, 0, 0)).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let shape = MlpShape::new(vec![18, 8, 4], Activation::Tanh, Activation::Tanh);
        let net = MlpParams::zeros(shape).unwrap();
        assert_eq!(net.predict(&[0.7; 18]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let shape = MlpShape::new(vec![3, 3], Activation::Linear, Activation::Linear);
        let mut net = MlpParams::zeros(shape).unwrap();
        for i in 0..3 {
            net.weights_mut(0)[i * 3 + i] = 1.0;
        }
        assert_eq!(
            net.predict(&[1.5, -2.0, 0.25]).unwrap(),
            vec![1.5, -2.0, 0.25]
        );
    }

    #[test]
    fn tanh_matches_reference() {
        for i in -4000..=4000 {
            let x = i as f64 * 0.01 + 1e-3;
            assert!((tanh(x) - libm::tanh(x)).abs() < 4e-16, "{x}");
            let y = -x.abs() * 17.7;
            assert!(
                (exp_nonpositive(y) / libm::exp(y) - 1.0).abs() < 1e-15,
                "{y}"
            );
            assert_eq!(tanh(-x), -tanh(x));
        }
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(tanh(1e3), 1.0);
        assert_eq!(tanh(-1e3), -1.0);
        assert!(tanh(f64::NAN).is_nan());
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        let net = tanh_net(&[18, 8, 4], 3);
        let x: Vec<f64> = (0..18).map(|i| (i as f64 * 0.3).sin()).collect();
        let (w0, b0, w1, b1) = (net.weights(0), net.biases(0), net.weights(1), net.biases(1));
        let mut h = [0.0; 8];
        for (j, hj) in h.iter_mut().enumerate() {
            let mut z = b0[j];
            for i in 0..18 {
                z += w0[j * 18 + i] * x[i];
            }
            *hj = z.tanh();
        }
        let y = net.predict(&x).unwrap();
        for k in 0..4 {
            let mut z = b1[k];
            for j in 0..8 {
                z += w1[k * 8 + j] * h[j];
            }
            assert!((y[k] - z.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_unit_gradient() {
        let shape = MlpShape::new(vec![1, 1], Activation::Linear, Activation::Linear);
        let net = MlpParams::from_values(shape, vec![0.7, -0.2]).unwrap();
        let cache = net.forward(&[3.0], None, 1).unwrap();
        let bp = net.backward(&cache, &[1.0]).unwrap();
        assert_eq!(bp.params.0, vec![3.0, 1.0]);
        assert_eq!(bp.input, vec![0.7]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let net = tanh_net(&[5, 6, 2], 4);
        let cache = net.forward(&[0.1; 10], None, 2).unwrap();
        let bp = net.backward(&cache, &[0.0; 4]).unwrap();
        assert!(bp.params.0.iter().all(|&g| g == 0.0));
        assert!(bp.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn appended_input_at_layer_zero_is_concatenation() {
        let shape = MlpShape::new(vec![3, 5, 1], Activation::Tanh, Activation::Linear);
        let mut r = rng::stream(5, domain::INIT_CRITIC, 0, 0);
        let split = MlpParams::init(shape.clone().with_aux(0, 2), 1.0, &mut r).unwrap();
        let flat_shape = MlpShape::new(vec![5, 5, 1], Activation::Tanh, Activation::Linear);
        let flat = MlpParams::from_values(flat_shape, split.values().to_vec()).unwrap();
        let s = [0.1, 0.2, 0.3, -0.1, -0.2, -0.3];
        let a = [0.5, -0.5, 0.25, 0.75];
        let joined = [0.1, 0.2, 0.3, 0.5, -0.5, -0.1, -0.2, -0.3, 0.25, 0.75];
        let c1 = split.forward(&s, Some(&a), 2).unwrap();
        let c2 = flat.forward(&joined, None, 2).unwrap();
        assert_eq!(c1.output(), c2.output());
    }

    #[test]
    fn dimension_errors() {
        let net = tanh_net(&[4, 3, 2], 1);
        assert!(matches!(
            net.forward(&[0.0; 5], None, 1),
            Err(Error::Dimension { .. })
        ));
        assert!(net.forward(&[0.0; 4], Some(&[1.0]), 1).is_err());
        let cache = net.forward(&[0.0; 4], None, 1).unwrap();
        assert!(net.backward(&cache, &[1.0; 3]).is_err());
        let other = tanh_net(&[4, 5, 2], 1);
        assert!(other.backward(&cache, &[1.0; 2]).is_err());
        assert!(MlpParams::from_values(net.shape().clone(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn soft_update_cases() {
        let shape = MlpShape::new(vec![2, 2], Activation::Linear, Activation::Linear);
        let zero = MlpParams::zeros(shape.clone()).unwrap();
        let one = MlpParams::from_values(shape.clone(), vec![1.0; 6]).unwrap();

        let mut t = zero.clone();
        soft_update(&mut t, &one, 1.0).unwrap();
        assert_eq!(t, one);

        let mut t = zero.clone();
        soft_update(&mut t, &one, 0.0).unwrap();
        assert_eq!(t, zero);

        let mut t = zero.clone();
        soft_update(&mut t, &one, 0.005).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.005));

        let wrong = MlpParams::zeros(MlpShape::new(
            vec![2, 3],
            Activation::Linear,
            Activation::Linear,
        ))
        .unwrap();
        assert!(soft_update(&mut t, &wrong, 0.5).is_err());
    }

    #[test]
    fn soft_update_converges_geometrically() {
        let source = tanh_net(&[3, 4, 2], 7);
        let mut target = tanh_net(&[3, 4, 2], 8);
        let dist = |a: &MlpParams, b: &MlpParams| {
            a.values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let d0 = dist(&target, &source);
        let tau = 0.05;
        for n in 1..=100 {
            soft_update(&mut target, &source, tau).unwrap();
            let expected = d0 * (1.0 - tau).powi(n);
            assert!((dist(&target, &source) - expected).abs() <= 1e-12 * d0);
        }
    }
}
