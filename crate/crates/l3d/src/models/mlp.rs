//! Toy MLP zoo: architecture spec, named parameters, batched forward with
//! activation cache, analytic per-sample backprop, and forward-mode
//! directional derivatives.

use serde::{Deserialize, Serialize};

use crate::models::divergence::Divergence;
use crate::models::ModelError;
use crate::numkit::{RngState, Tensor};

/// Per-layer-boundary activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Gelu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            // Exact Gaussian-CDF form: x · Φ(x).
            Activation::Gelu => x * 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)),
        }
    }

    /// Derivative at pre-activation `z`. ReLU uses the 0 subgradient at the
    /// kink; GeLU uses the exact erf-based form Φ(z) + z·φ(z).
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let phi_cdf = 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2));
                let phi_pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                phi_cdf + z * phi_pdf
            }
        }
    }
}

/// MLP architecture: layer extents plus one activation and bias flag per
/// layer boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub biases: Vec<bool>,
}

impl MlpSpec {
    pub fn new(
        dims: Vec<usize>,
        activations: Vec<Activation>,
        biases: Vec<bool>,
    ) -> Result<Self, ModelError> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(ModelError::Spec(format!("bad layer extents {dims:?}")));
        }
        let n_layers = dims.len() - 1;
        if activations.len() != n_layers || biases.len() != n_layers {
            return Err(ModelError::Spec(format!(
                "need one activation and bias flag per layer: {} layers, {} activations, {} bias flags",
                n_layers,
                activations.len(),
                biases.len()
            )));
        }
        Ok(MlpSpec {
            dims,
            activations,
            biases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Parameter names and shapes in flattening order: `w0, (b0,) w1, (b1,) …`
    /// with weight `wL` of shape `out×in`.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for l in 0..self.n_layers() {
            out.push((format!("w{l}"), vec![self.dims[l + 1], self.dims[l]]));
            if self.biases[l] {
                out.push((format!("b{l}"), vec![self.dims[l + 1]]));
            }
        }
        out
    }

    /// Glorot-uniform weights (`±√(6/(fan_in+fan_out))`) and zero biases.
    ///
    /// Zero bias matters for the sparse toy tasks: it starts every ReLU gate
    /// at the gradient-neutral point instead of letting early bias drift
    /// shut gates on rarely-active features.
    pub fn init_params(&self, rng: &mut RngState) -> ParamSet {
        let mut entries = Vec::new();
        for l in 0..self.n_layers() {
            let bound = (6.0 / (self.dims[l] + self.dims[l + 1]) as f64).sqrt();
            let w = rng
                .uniform(-bound, bound, &[self.dims[l + 1], self.dims[l]])
                .expect("bound positive");
            entries.push((format!("w{l}"), w));
            if self.biases[l] {
                entries.push((format!("b{l}"), Tensor::zeros(&[self.dims[l + 1]])));
            }
        }
        ParamSet::from_entries(entries).expect("layer names are unique")
    }

    /// Index of each layer's weight (and optional bias) within the
    /// parameter flattening order.
    pub(crate) fn layer_slots(&self) -> Vec<(usize, Option<usize>)> {
        let mut slots = Vec::with_capacity(self.n_layers());
        let mut idx = 0;
        for l in 0..self.n_layers() {
            let w = idx;
            idx += 1;
            let b = if self.biases[l] {
                let b = idx;
                idx += 1;
                Some(b)
            } else {
                None
            };
            slots.push((w, b));
        }
        slots
    }
}

/// Ordered, named parameter tensors with a fixed flattening order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn from_entries(entries: Vec<(String, Tensor)>) -> Result<Self, ModelError> {
        let (names, tensors): (Vec<String>, Vec<Tensor>) = entries.into_iter().unzip();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                if names[i] == names[j] {
                    return Err(ModelError::Spec(format!(
                        "duplicate parameter name {}",
                        names[i]
                    )));
                }
            }
        }
        Ok(ParamSet { names, tensors })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Total scalar parameter count.
    pub fn n_params(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Same names and shapes, all zeros — the shape of a gradient.
    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect()
    }

    pub fn shapes_match(&self, blocks: &[Tensor]) -> bool {
        blocks.len() == self.tensors.len()
            && self
                .tensors
                .iter()
                .zip(blocks)
                .all(|(t, b)| t.shape() == b.shape())
    }

    /// A copy with each tensor replaced by the matching block.
    pub fn with_tensors(&self, blocks: Vec<Tensor>) -> Result<ParamSet, ModelError> {
        if !self.shapes_match(&blocks) {
            return Err(ModelError::Shape(
                "replacement blocks do not match parameter shapes".into(),
            ));
        }
        Ok(ParamSet {
            names: self.names.clone(),
            tensors: blocks,
        })
    }

    /// Concatenate all tensors into the flat parameter vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for t in &self.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Inverse of [`ParamSet::flatten`]; the round trip is exact.
    pub fn unflatten(&self, flat: &[f64]) -> Result<ParamSet, ModelError> {
        if flat.len() != self.n_params() {
            return Err(ModelError::Spec(format!(
                "flat vector length {} does not match parameter count {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut tensors = Vec::with_capacity(self.tensors.len());
        let mut off = 0;
        for t in &self.tensors {
            let n = t.len();
            tensors.push(Tensor::from_vec(t.shape(), flat[off..off + n].to_vec()));
            off += n;
        }
        Ok(ParamSet {
            names: self.names.clone(),
            tensors,
        })
    }
}

/// Per-sample activation cache, reusable across samples.
#[derive(Debug, Clone)]
pub struct SampleCache {
    /// `acts[0]` is the input; `acts[l+1]` the post-activation of layer `l`.
    acts: Vec<Vec<f64>>,
    /// `pre[l]` is the pre-activation of layer `l`.
    pre: Vec<Vec<f64>>,
    // backprop scratch, sized to the widest layer
    delta_a: Vec<f64>,
    delta_b: Vec<f64>,
}

impl SampleCache {
    pub fn new(spec: &MlpSpec) -> Self {
        let acts = spec.dims.iter().map(|&d| vec![0.0; d]).collect();
        let pre = spec.dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        let widest = *spec.dims.iter().max().unwrap();
        SampleCache {
            acts,
            pre,
            delta_a: vec![0.0; widest],
            delta_b: vec![0.0; widest],
        }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

/// Forward pass of one sample into a reusable cache.
pub fn forward_sample_into(spec: &MlpSpec, params: &ParamSet, x: &[f64], cache: &mut SampleCache) {
    debug_assert_eq!(x.len(), spec.input_dim());
    cache.acts[0].copy_from_slice(x);
    let slots = spec.layer_slots();
    for l in 0..spec.n_layers() {
        let (w_idx, b_idx) = slots[l];
        let w = params.tensor(w_idx);
        let (out_d, in_d) = (w.shape()[0], w.shape()[1]);
        let (lower, upper) = cache.acts.split_at_mut(l + 1);
        let a_prev = &lower[l];
        let a_next = &mut upper[0];
        let z = &mut cache.pre[l];
        let wd = w.data();
        for i in 0..out_d {
            let mut acc = match b_idx {
                Some(bi) => params.tensor(bi).data()[i],
                None => 0.0,
            };
            let wrow = &wd[i * in_d..(i + 1) * in_d];
            for (j, &aj) in a_prev.iter().enumerate() {
                acc += wrow[j] * aj;
            }
            z[i] = acc;
            a_next[i] = spec.activations[l].apply(acc);
        }
    }
}

/// Batched forward: outputs `n_s×n_o` plus per-sample caches.
pub fn forward(
    spec: &MlpSpec,
    params: &ParamSet,
    x: &Tensor,
) -> Result<(Tensor, Vec<SampleCache>), ModelError> {
    if x.ndim() != 2 || x.shape()[1] != spec.input_dim() {
        return Err(ModelError::Shape(format!(
            "input shape {:?} does not match input dim {}",
            x.shape(),
            spec.input_dim()
        )));
    }
    let n_s = x.shape()[0];
    let n_o = spec.output_dim();
    let mut y = Tensor::zeros(&[n_s, n_o]);
    let mut caches = Vec::with_capacity(n_s);
    for s in 0..n_s {
        let mut cache = SampleCache::new(spec);
        forward_sample_into(spec, params, x.row(s), &mut cache);
        y.row_mut(s).copy_from_slice(cache.output());
        caches.push(cache);
    }
    Ok((y, caches))
}

/// Batched forward without caches (eval paths).
pub fn forward_outputs(spec: &MlpSpec, params: &ParamSet, x: &Tensor) -> Result<Tensor, ModelError> {
    if x.ndim() != 2 || x.shape()[1] != spec.input_dim() {
        return Err(ModelError::Shape(format!(
            "input shape {:?} does not match input dim {}",
            x.shape(),
            spec.input_dim()
        )));
    }
    let n_s = x.shape()[0];
    let n_o = spec.output_dim();
    let mut y = Tensor::zeros(&[n_s, n_o]);
    let mut cache = SampleCache::new(spec);
    for s in 0..n_s {
        forward_sample_into(spec, params, x.row(s), &mut cache);
        y.row_mut(s).copy_from_slice(cache.output());
    }
    Ok(y)
}

/// Reverse-mode gradient of `D(f(x, W), y_r)` with respect to every
/// parameter tensor, accumulated into `grads` (which must be zeroed by the
/// caller if a fresh gradient is wanted).
///
/// `cache` must hold the forward pass of `x` under `params`.
pub fn backprop_divergence_into(
    spec: &MlpSpec,
    params: &ParamSet,
    y_r: &[f64],
    divergence: Divergence,
    cache: &mut SampleCache,
    grads: &mut [Tensor],
) -> Result<(), ModelError> {
    if !params.shapes_match(grads) {
        return Err(ModelError::Shape(
            "gradient blocks do not match parameter shapes".into(),
        ));
    }
    let n_layers = spec.n_layers();
    let slots = spec.layer_slots();
    let n_o = spec.output_dim();

    // delta at the output layer: dD/dy ⊙ σ'(z_L)
    divergence.grad_output(&cache.acts[n_layers], y_r, &mut cache.delta_a[..n_o])?;
    for i in 0..n_o {
        cache.delta_a[i] *= spec.activations[n_layers - 1].deriv(cache.pre[n_layers - 1][i]);
    }

    for l in (0..n_layers).rev() {
        let (w_idx, b_idx) = slots[l];
        let out_d = spec.dims[l + 1];
        let in_d = spec.dims[l];
        {
            let gw = grads[w_idx].data_mut();
            let a_prev = &cache.acts[l];
            for i in 0..out_d {
                let d = cache.delta_a[i];
                let grow = &mut gw[i * in_d..(i + 1) * in_d];
                for (j, &aj) in a_prev.iter().enumerate() {
                    grow[j] += d * aj;
                }
            }
        }
        if let Some(bi) = b_idx {
            let gb = grads[bi].data_mut();
            for i in 0..out_d {
                gb[i] += cache.delta_a[i];
            }
        }
        if l > 0 {
            // delta_{l-1} = (W_l^T delta_l) ⊙ σ'(z_{l-1})
            let w = params.tensor(w_idx).data();
            for j in 0..in_d {
                let mut acc = 0.0;
                for i in 0..out_d {
                    acc += w[i * in_d + j] * cache.delta_a[i];
                }
                cache.delta_b[j] = acc * spec.activations[l - 1].deriv(cache.pre[l - 1][j]);
            }
            cache.delta_a[..in_d].copy_from_slice(&cache.delta_b[..in_d]);
        }
    }
    Ok(())
}

/// Analytic parameter gradient of the divergence between `f(x, W)` and the
/// reference output `y_r`, evaluated at the current parameters.
pub fn grad_divergence(
    spec: &MlpSpec,
    params: &ParamSet,
    x: &[f64],
    y_r: &[f64],
    divergence: Divergence,
) -> Result<Vec<Tensor>, ModelError> {
    if y_r.len() != spec.output_dim() {
        return Err(ModelError::Shape(format!(
            "reference length {} does not match output dim {}",
            y_r.len(),
            spec.output_dim()
        )));
    }
    let mut cache = SampleCache::new(spec);
    forward_sample_into(spec, params, x, &mut cache);
    let mut grads = params.zeros_like();
    backprop_divergence_into(spec, params, y_r, divergence, &mut cache, &mut grads)?;
    Ok(grads)
}

/// Forward-mode directional derivative of every output coordinate along a
/// parameter-space direction: `d/dδ f(x, W + δ·dir)` at `δ = 0`.
pub fn jvp_in_direction(
    spec: &MlpSpec,
    params: &ParamSet,
    x: &[f64],
    direction: &[Tensor],
) -> Result<Vec<f64>, ModelError> {
    if !params.shapes_match(direction) {
        return Err(ModelError::Shape(
            "direction blocks do not match parameter shapes".into(),
        ));
    }
    let slots = spec.layer_slots();
    let mut a: Vec<f64> = x.to_vec();
    let mut a_dot = vec![0.0; x.len()];
    for l in 0..spec.n_layers() {
        let (w_idx, b_idx) = slots[l];
        let w = params.tensor(w_idx);
        let dw = &direction[w_idx];
        let (out_d, in_d) = (w.shape()[0], w.shape()[1]);
        let mut z = vec![0.0; out_d];
        let mut z_dot = vec![0.0; out_d];
        for i in 0..out_d {
            let wrow = &w.data()[i * in_d..(i + 1) * in_d];
            let dwrow = &dw.data()[i * in_d..(i + 1) * in_d];
            let mut acc = 0.0;
            let mut acc_dot = 0.0;
            for j in 0..in_d {
                acc += wrow[j] * a[j];
                acc_dot += dwrow[j] * a[j] + wrow[j] * a_dot[j];
            }
            if let Some(bi) = b_idx {
                acc += params.tensor(bi).data()[i];
                acc_dot += direction[bi].data()[i];
            }
            z[i] = acc;
            z_dot[i] = acc_dot;
        }
        let act = spec.activations[l];
        a = z.iter().map(|&v| act.apply(v)).collect();
        a_dot = z
            .iter()
            .zip(&z_dot)
            .map(|(&zv, &zd)| act.deriv(zv) * zd)
            .collect();
    }
    Ok(a_dot)
}
