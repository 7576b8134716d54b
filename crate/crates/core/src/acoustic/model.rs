use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::crfloss::PosteriorMatrix;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One entry of the layer menu. Input widths are inferred from the
/// previous layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Affine { output: usize },
    Tanh,
    /// Elman recurrence `h_t = tanh(W x_t + U h_{t-1} + b)`. A
    /// bidirectional layer concatenates forward and backward states.
    Recurrent { hidden: usize, bidirectional: bool },
}

impl LayerSpec {
    /// Parses a comma-separated menu such as `affine:32,tanh,birnn:16`.
    pub fn parse_list(text: &str) -> Result<Vec<LayerSpec>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                let (kind, arg) = item.split_once(':').unwrap_or((item, ""));
                let size = || {
                    arg.parse::<usize>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| Error::Config(format!("layer `{item}` needs a positive size")))
                };
                match kind {
                    "affine" => Ok(LayerSpec::Affine { output: size()? }),
                    "tanh" => Ok(LayerSpec::Tanh),
                    "rnn" => Ok(LayerSpec::Recurrent { hidden: size()?, bidirectional: false }),
                    "birnn" => Ok(LayerSpec::Recurrent { hidden: size()?, bidirectional: true }),
                    _ => Err(Error::Config(format!("unknown layer `{item}`"))),
                }
            })
            .collect()
    }

    pub fn describe(&self) -> String {
        match *self {
            LayerSpec::Affine { output } => format!("affine:{output}"),
            LayerSpec::Tanh => "tanh".into(),
            LayerSpec::Recurrent { hidden, bidirectional: false } => format!("rnn:{hidden}"),
            LayerSpec::Recurrent { hidden, bidirectional: true } => format!("birnn:{hidden}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Affine {
    input: usize,
    output: usize,
    /// output × input
    weight: Vec<f64>,
    bias: Vec<f64>,
}

impl Affine {
    fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (6.0 / (input + output) as f64).sqrt();
        Affine {
            input,
            output,
            weight: (0..input * output).map(|_| rng.gen_range(-scale..scale)).collect(),
            bias: vec![0.0; output],
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = Matrix::zeros(x.rows(), self.output);
        for t in 0..x.rows() {
            let xr = x.row(t);
            for (o, yo) in y.row_mut(t).iter_mut().enumerate() {
                let w = &self.weight[o * self.input..(o + 1) * self.input];
                *yo = self.bias[o] + w.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        y
    }

    fn backward(&self, x: &Matrix, dy: &Matrix, dw: &mut [f64], db: &mut [f64]) -> Matrix {
        let mut dx = Matrix::zeros(x.rows(), self.input);
        for t in 0..x.rows() {
            let xr = x.row(t);
            let dyr = dy.row(t);
            let dxr = dx.row_mut(t);
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                db[o] += g;
                let w = &self.weight[o * self.input..(o + 1) * self.input];
                let dwo = &mut dw[o * self.input..(o + 1) * self.input];
                for i in 0..self.input {
                    dwo[i] += g * xr[i];
                    dxr[i] += g * w[i];
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RnnDirection {
    /// hidden × input
    input_weight: Vec<f64>,
    /// hidden × hidden
    recurrent_weight: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Recurrent {
    input: usize,
    hidden: usize,
    forward: RnnDirection,
    backward: Option<RnnDirection>,
}

impl RnnDirection {
    fn new(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let si = (6.0 / (input + hidden) as f64).sqrt();
        let sr = 1.0 / (hidden as f64).sqrt();
        RnnDirection {
            input_weight: (0..input * hidden).map(|_| rng.gen_range(-si..si)).collect(),
            recurrent_weight: (0..hidden * hidden).map(|_| rng.gen_range(-sr..sr)).collect(),
            bias: vec![0.0; hidden],
        }
    }

    /// Hidden states in time order; `reverse` runs the recurrence backwards.
    fn run(&self, x: &Matrix, input: usize, hidden: usize, reverse: bool) -> Matrix {
        let frames = x.rows();
        let mut h = Matrix::zeros(frames, hidden);
        let mut prev = vec![0.0; hidden];
        for step in 0..frames {
            let t = if reverse { frames - 1 - step } else { step };
            let xr = x.row(t);
            let mut cur = vec![0.0; hidden];
            for (j, c) in cur.iter_mut().enumerate() {
                let wi = &self.input_weight[j * input..(j + 1) * input];
                let wr = &self.recurrent_weight[j * hidden..(j + 1) * hidden];
                let a = self.bias[j]
                    + wi.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>()
                    + wr.iter().zip(&prev).map(|(a, b)| a * b).sum::<f64>();
                *c = a.tanh();
            }
            h.row_mut(t).copy_from_slice(&cur);
            prev = cur;
        }
        h
    }

    /// Backpropagation through time. `dh` is the gradient on the emitted
    /// states; adds into `dx` and the three gradient buffers.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        x: &Matrix,
        h: &Matrix,
        dh: &Matrix,
        input: usize,
        hidden: usize,
        reverse: bool,
        dx: &mut Matrix,
        grads: [&mut [f64]; 3],
    ) {
        let [dwi, dwr, db] = grads;
        let frames = x.rows();
        let mut carry = vec![0.0; hidden];
        for step in (0..frames).rev() {
            let t = if reverse { frames - 1 - step } else { step };
            let prev_t = if step == 0 {
                None
            } else if reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let hr = h.row(t);
            let da: Vec<f64> = (0..hidden)
                .map(|j| (dh.get(t, j) + carry[j]) * (1.0 - hr[j] * hr[j]))
                .collect();
            let xr = x.row(t);
            let mut next_carry = vec![0.0; hidden];
            let dxr = dx.row_mut(t);
            for (j, &g) in da.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                db[j] += g;
                let wi = &self.input_weight[j * input..(j + 1) * input];
                let dwij = &mut dwi[j * input..(j + 1) * input];
                for i in 0..input {
                    dwij[i] += g * xr[i];
                    dxr[i] += g * wi[i];
                }
                if let Some(pt) = prev_t {
                    let hp = h.row(pt);
                    let wr = &self.recurrent_weight[j * hidden..(j + 1) * hidden];
                    let dwrj = &mut dwr[j * hidden..(j + 1) * hidden];
                    for k in 0..hidden {
                        dwrj[k] += g * hp[k];
                        next_carry[k] += g * wr[k];
                    }
                }
            }
            carry = next_carry;
        }
    }
}

impl Recurrent {
    fn output_width(&self) -> usize {
        if self.backward.is_some() {
            2 * self.hidden
        } else {
            self.hidden
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Affine(Affine),
    Tanh,
    Recurrent(Recurrent),
}

/// Parameters of the acoustic model: the layer menu followed by a final
/// affine map to |S_π| outputs and a log-softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    input_dim: usize,
    num_outputs: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    output: Affine,
    dropout: f64,
}

/// Gradients laid out like [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads(pub Vec<Vec<f64>>);

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        ParamGrads(params.tensors().iter().map(|t| vec![0.0; t.len()]).collect())
    }

    /// `self += k * other`
    pub fn add_scaled(&mut self, k: f64, other: &ParamGrads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += k * y;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// Activations kept from a training forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every hidden layer, then the input of the output layer.
    inputs: Vec<Matrix>,
    /// Per recurrent layer: (forward states, backward states).
    states: Vec<Option<(Matrix, Option<Matrix>)>>,
    /// Dropout masks on recurrent outputs.
    masks: Vec<Option<Vec<f64>>>,
    log_probs: Matrix,
}

impl ModelParams {
    pub fn new(input_dim: usize, specs: &[LayerSpec], num_outputs: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || num_outputs < 2 {
            return Err(Error::Config("model needs input and at least two outputs".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut width = input_dim;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Affine { output } if output > 0 => {
                    Layer::Affine(Affine::new(width, output, &mut rng))
                }
                LayerSpec::Tanh => Layer::Tanh,
                LayerSpec::Recurrent { hidden, bidirectional } if hidden > 0 => {
                    Layer::Recurrent(Recurrent {
                        input: width,
                        hidden,
                        forward: RnnDirection::new(width, hidden, &mut rng),
                        backward: bidirectional.then(|| RnnDirection::new(width, hidden, &mut rng)),
                    })
                }
                _ => return Err(Error::Config(format!("bad layer {spec:?}"))),
            };
            width = match &layer {
                Layer::Affine(a) => a.output,
                Layer::Tanh => width,
                Layer::Recurrent(r) => r.output_width(),
            };
            layers.push(layer);
        }
        Ok(ModelParams {
            input_dim,
            num_outputs,
            specs: specs.to_vec(),
            layers,
            output: Affine::new(width, num_outputs, &mut rng),
            dropout: 0.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Inverted dropout on recurrent outputs during training.
    pub fn set_dropout(&mut self, p: f64) -> Result<()> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout {p} outside [0, 1)")));
        }
        self.dropout = p;
        Ok(())
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Affine(a) => out.extend([a.weight.as_slice(), a.bias.as_slice()]),
                Layer::Tanh => {}
                Layer::Recurrent(r) => {
                    for d in std::iter::once(&r.forward).chain(r.backward.as_ref()) {
                        out.extend([
                            d.input_weight.as_slice(),
                            d.recurrent_weight.as_slice(),
                            d.bias.as_slice(),
                        ]);
                    }
                }
            }
        }
        out.extend([self.output.weight.as_slice(), self.output.bias.as_slice()]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Affine(a) => out.extend([&mut a.weight, &mut a.bias]),
                Layer::Tanh => {}
                Layer::Recurrent(r) => {
                    let Recurrent { forward, backward, .. } = r;
                    for d in std::iter::once(forward).chain(backward.as_mut()) {
                        out.extend([&mut d.input_weight, &mut d.recurrent_weight, &mut d.bias]);
                    }
                }
            }
        }
        out.extend([&mut self.output.weight, &mut self.output.bias]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Sets every output-layer weight and bias to zero.
    pub fn zero_output_layer(&mut self) {
        self.output.weight.iter_mut().for_each(|v| *v = 0.0);
        self.output.bias.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Log-softmax posteriors for a `frames × input_dim` feature matrix.
    pub fn forward(&self, features: &Matrix) -> Result<PosteriorMatrix> {
        let (post, _) = self.forward_cached(features, None)?;
        Ok(post)
    }

    /// Forward pass keeping activations for [`backward_cached`]. Dropout is
    /// applied only when `dropout_seed` is given and the rate is positive.
    ///
    /// [`backward_cached`]: Self::backward_cached
    pub fn forward_cached(
        &self,
        features: &Matrix,
        dropout_seed: Option<u64>,
    ) -> Result<(PosteriorMatrix, ForwardCache)> {
        if features.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "features have {} columns, model expects {}",
                features.cols(),
                self.input_dim
            )));
        }
        if features.rows() == 0 {
            return Err(Error::Shape("features have no frames".into()));
        }
        let mut rng = dropout_seed
            .filter(|_| self.dropout > 0.0)
            .map(ChaCha8Rng::seed_from_u64);
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut states = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut x = features.clone();
        for layer in &self.layers {
            let (y, st, mask) = match layer {
                Layer::Affine(a) => (a.forward(&x), None, None),
                Layer::Tanh => {
                    let mut y = x.clone();
                    y.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
                    (y, None, None)
                }
                Layer::Recurrent(r) => {
                    let hf = r.forward.run(&x, r.input, r.hidden, false);
                    let hb = r.backward.as_ref().map(|d| d.run(&x, r.input, r.hidden, true));
                    let mut y = concat(&hf, hb.as_ref());
                    let mask = rng.as_mut().map(|rng| {
                        let keep = 1.0 / (1.0 - self.dropout);
                        let mask: Vec<f64> = (0..y.as_slice().len())
                            .map(|_| if rng.gen::<f64>() < self.dropout { 0.0 } else { keep })
                            .collect();
                        for (v, m) in y.as_mut_slice().iter_mut().zip(&mask) {
                            *v *= m;
                        }
                        mask
                    });
                    (y, Some((hf, hb)), mask)
                }
            };
            inputs.push(std::mem::replace(&mut x, y));
            states.push(st);
            masks.push(mask);
        }
        let mut logits = self.output.forward(&x);
        inputs.push(x);
        for t in 0..logits.rows() {
            crate::numeric::log_softmax_in_place(logits.row_mut(t));
        }
        let post = PosteriorMatrix::new(logits.clone())?;
        Ok((
            post,
            ForwardCache {
                inputs,
                states,
                masks,
                log_probs: logits,
            },
        ))
    }

    /// Reverse-mode gradients of `Σ upstream ⊙ log_probs` with respect to
    /// every parameter, including the log-softmax Jacobian.
    pub fn backward_cached(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<ParamGrads> {
        let lp = &cache.log_probs;
        if upstream.rows() != lp.rows() || upstream.cols() != lp.cols() {
            return Err(Error::Shape(format!(
                "upstream is {}x{}, output is {}x{}",
                upstream.rows(),
                upstream.cols(),
                lp.rows(),
                lp.cols()
            )));
        }
        let mut grads = ParamGrads::zeros_like(self);
        let mut slot = grads.0.len();

        // log-softmax: dz = g - softmax * Σ g
        let mut dz = upstream.clone();
        for t in 0..dz.rows() {
            let total: f64 = upstream.row(t).iter().sum();
            let lr = lp.row(t);
            for (k, v) in dz.row_mut(t).iter_mut().enumerate() {
                *v -= lr[k].exp() * total;
            }
        }

        slot -= 2;
        let (head, tail) = grads.0.split_at_mut(slot);
        let (ow, ob) = tail.split_at_mut(1);
        let mut dx = self.output.backward(
            cache.inputs.last().expect("output input cached"),
            &dz,
            &mut ow[0],
            &mut ob[0],
        );
        let mut head = head;

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[i];
            match layer {
                Layer::Affine(a) => {
                    let (h, t) = head.split_at_mut(head.len() - 2);
                    let (dw, db) = t.split_at_mut(1);
                    dx = a.backward(x, &dx, &mut dw[0], &mut db[0]);
                    head = h;
                }
                Layer::Tanh => {
                    let y = &cache.inputs[i + 1];
                    for (d, v) in dx.as_mut_slice().iter_mut().zip(y.as_slice()) {
                        *d *= 1.0 - v * v;
                    }
                }
                Layer::Recurrent(r) => {
                    if let Some(mask) = &cache.masks[i] {
                        for (d, m) in dx.as_mut_slice().iter_mut().zip(mask) {
                            *d *= m;
                        }
                    }
                    let (hf, hb) = cache.states[i].as_ref().expect("recurrent states cached");
                    let (dhf, dhb) = split(&dx, r.hidden, hb.is_some());
                    let mut dinput = Matrix::zeros(x.rows(), r.input);
                    let n = if r.backward.is_some() { 6 } else { 3 };
                    let (h, t) = head.split_at_mut(head.len() - n);
                    let (fw, bw) = t.split_at_mut(3);
                    let [a, b, c] = fw else { unreachable!() };
                    r.forward.backward(x, hf, &dhf, r.input, r.hidden, false, &mut dinput, [a, b, c]);
                    if let (Some(d), Some(hb), Some(dhb)) = (&r.backward, hb, &dhb) {
                        let [a, b, c] = bw else { unreachable!() };
                        d.backward(x, hb, dhb, r.input, r.hidden, true, &mut dinput, [a, b, c]);
                    }
                    dx = dinput;
                    head = h;
                }
            }
        }
        debug_assert!(head.is_empty());
        Ok(grads)
    }

    /// Recomputes the forward pass (without dropout) and backpropagates.
    pub fn backward(&self, features: &Matrix, upstream: &Matrix) -> Result<ParamGrads> {
        let (_, cache) = self.forward_cached(features, None)?;
        self.backward_cached(&cache, upstream)
    }

    pub(crate) fn from_parts(
        input_dim: usize,
        specs: &[LayerSpec],
        num_outputs: usize,
        dropout: f64,
        tensors: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut model = ModelParams::new(input_dim, specs, num_outputs, 0)?;
        model.set_dropout(dropout)?;
        let slots = model.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Shape("tensor count does not match layer specs".into()));
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            if slot.len() != t.len() {
                return Err(Error::Shape("tensor size does not match layer specs".into()));
            }
            *slot = t;
        }
        Ok(model)
    }
}

fn concat(a: &Matrix, b: Option<&Matrix>) -> Matrix {
    let Some(b) = b else { return a.clone() };
    let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
    for t in 0..a.rows() {
        let row = out.row_mut(t);
        row[..a.cols()].copy_from_slice(a.row(t));
        row[a.cols()..].copy_from_slice(b.row(t));
    }
    out
}

fn split(m: &Matrix, hidden: usize, bidirectional: bool) -> (Matrix, Option<Matrix>) {
    if !bidirectional {
        return (m.clone(), None);
    }
    let mut a = Matrix::zeros(m.rows(), hidden);
    let mut b = Matrix::zeros(m.rows(), hidden);
    for t in 0..m.rows() {
        a.row_mut(t).copy_from_slice(&m.row(t)[..hidden]);
        b.row_mut(t).copy_from_slice(&m.row(t)[hidden..]);
    }
    (a, Some(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn objective(model: &ModelParams, x: &Matrix, upstream: &Matrix) -> f64 {
        let post = model.forward(x).unwrap();
        post.matrix()
            .as_slice()
            .iter()
            .zip(upstream.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn finite_difference_check(specs: &[LayerSpec]) {
        let model = ModelParams::new(3, specs, 4, 7).unwrap();
        let x = features(5, 3, 1);
        let upstream = features(5, 4, 2);
        let grads = model.backward(&x, &upstream).unwrap();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for (ti, tensor) in model.tensors().iter().enumerate() {
            for i in 0..tensor.len() {
                let mut plus = model.clone();
                plus.tensors_mut()[ti][i] += h;
                let mut minus = model.clone();
                minus.tensors_mut()[ti][i] -= h;
                let fd = (objective(&plus, &x, &upstream) - objective(&minus, &x, &upstream)) / (2.0 * h);
                let err = crate::numeric::relative_error(fd, grads.0[ti][i], 1e-4);
                worst = worst.max(err);
            }
        }
        assert!(worst < 1e-3, "{specs:?}: worst relative error {worst}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        finite_difference_check(&[LayerSpec::Affine { output: 4 }, LayerSpec::Tanh]);
        finite_difference_check(&[LayerSpec::Recurrent { hidden: 3, bidirectional: false }]);
        finite_difference_check(&[
            LayerSpec::Recurrent { hidden: 2, bidirectional: true },
            LayerSpec::Tanh,
            LayerSpec::Affine { output: 3 },
        ]);
    }

    #[test]
    fn zero_output_layer_gives_uniform_rows() {
        let mut model = ModelParams::new(3, &[LayerSpec::Affine { output: 5 }, LayerSpec::Tanh], 4, 3).unwrap();
        model.zero_output_layer();
        let post = model.forward(&features(6, 3, 9)).unwrap();
        for v in post.matrix().as_slice() {
            assert!((v + 4f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn pointwise_model_maps_equal_frames_equally() {
        let model = ModelParams::new(2, &[LayerSpec::Affine { output: 4 }, LayerSpec::Tanh], 3, 3).unwrap();
        let x = Matrix::from_rows(&[vec![0.5, -1.0], vec![0.5, -1.0]]).unwrap();
        let post = model.forward(&x).unwrap();
        assert_eq!(post.row(0), post.row(1));
        assert!(post.is_log_softmax(1e-12));
    }

    #[test]
    fn forward_is_deterministic_for_a_seed() {
        let specs = [LayerSpec::Recurrent { hidden: 4, bidirectional: true }];
        let a = ModelParams::new(3, &specs, 4, 11).unwrap();
        let b = ModelParams::new(3, &specs, 4, 11).unwrap();
        let x = features(7, 3, 5);
        assert_eq!(a.forward(&x).unwrap(), b.forward(&x).unwrap());
    }

    #[test]
    fn backward_is_linear_in_upstream() {
        let model = ModelParams::new(3, &[LayerSpec::Recurrent { hidden: 3, bidirectional: true }], 4, 2).unwrap();
        let x = features(4, 3, 1);
        let zero = model.backward(&x, &Matrix::zeros(4, 4)).unwrap();
        assert!(zero.0.iter().flatten().all(|&v| v == 0.0));
        let up = features(4, 4, 8);
        let mut doubled = up.clone();
        doubled.scale(2.0);
        let g1 = model.backward(&x, &up).unwrap();
        let g2 = model.backward(&x, &doubled).unwrap();
        for (a, b) in g1.0.iter().flatten().zip(g2.0.iter().flatten()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn shape_errors() {
        let model = ModelParams::new(3, &[LayerSpec::Tanh], 4, 2).unwrap();
        assert!(model.forward(&features(2, 2, 1)).is_err());
        assert!(model.backward(&features(2, 3, 1), &Matrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn layer_menu_parsing() {
        let specs = LayerSpec::parse_list("affine:8, tanh, birnn:4,rnn:2").unwrap();
        assert_eq!(specs.len(), 4);
        assert_eq!(specs[2], LayerSpec::Recurrent { hidden: 4, bidirectional: true });
        assert!(LayerSpec::parse_list("conv:3").is_err());
        assert!(LayerSpec::parse_list("affine:0").is_err());
    }
}
