use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{backward_into, layer_forward, relu_backward, softmax_in_place, LayerSpec};
use super::tensor::Tensor;
use super::NnError;
use crate::image::Image;

/// Probabilities below this are clamped inside the logarithm.
pub const MIN_PROBABILITY: f64 = 1e-12;

/// Which parameters a training stage updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// Only the final dense layer.
    HeadOnly,
    AllLayers,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    /// Per-sample input shape `[channels, height, width]`.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub params: Vec<Vec<Tensor>>,
    pub class_count: usize,
}

/// Per-layer parameter gradients; frozen layers hold no tensors.
pub type Gradients = Vec<Vec<Tensor>>;

impl Network {
    /// Validates the layer chain and draws Kaiming-normal weights with zero
    /// biases from `seed`. The layer feeding the softmax gets variance
    /// `1/fan_in` instead, keeping the initial logits small.
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(layers.len());
        for (i, spec) in layers.iter().enumerate() {
            let mut p: Vec<Tensor> = spec.param_shapes().into_iter().map(Tensor::zeros).collect();
            if let Some(w) = p.first_mut() {
                let gain = if layers.get(i + 1) == Some(&LayerSpec::Softmax) { 1.0 } else { 2.0 };
                let std = (gain / spec.fan_in() as f64).sqrt();
                let normal = Normal::new(0.0, std).expect("positive standard deviation");
                w.data_mut().iter_mut().for_each(|v| *v = normal.sample(&mut rng));
            }
            params.push(p);
        }
        Self::from_parts(input_shape, layers, params)
    }

    /// Assembles a network from existing parameters, checking every shape.
    pub fn from_parts(input_shape: [usize; 3], layers: Vec<LayerSpec>, params: Vec<Vec<Tensor>>) -> Result<Self, NnError> {
        if layers.len() != params.len() {
            return Err(NnError::Shape("one parameter list per layer required".into()));
        }
        let mut shape = input_shape.to_vec();
        for (spec, p) in layers.iter().zip(&params) {
            let expected = spec.param_shapes();
            if p.len() != expected.len() || p.iter().zip(&expected).any(|(t, s)| t.shape() != s.as_slice()) {
                return Err(NnError::Shape(format!("parameters do not match {spec:?}")));
            }
            shape = spec.output_shape(&shape)?;
        }
        if layers.last() != Some(&LayerSpec::Softmax) {
            return Err(NnError::Shape("network must end in softmax".into()));
        }
        let class_count = shape[0];
        let head = layers.len().checked_sub(2).map(|i| layers[i]);
        if !matches!(head, Some(LayerSpec::Dense { .. })) {
            return Err(NnError::Shape("softmax must follow a dense layer".into()));
        }
        Ok(Self { input_shape, layers, params, class_count })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Index of the final dense layer.
    pub fn head_index(&self) -> usize {
        self.layers.len() - 2
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Stacks per-sample inputs into a batch tensor.
    pub fn batch(&self, samples: &[&[f64]]) -> Result<Tensor, NnError> {
        let n = self.input_len();
        let mut data = Vec::with_capacity(samples.len() * n);
        for s in samples {
            if s.len() != n {
                return Err(NnError::Shape(format!("sample has {} values, expected {n}", s.len())));
            }
            data.extend_from_slice(s);
        }
        let [c, h, w] = self.input_shape;
        Tensor::new(vec![samples.len(), c, h, w], data)
    }

    /// Class probabilities, one row per sample.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        self.forward_range(input, 0, self.layers.len())
    }

    /// Runs layers `from..to`.
    pub fn forward_range(&self, input: &Tensor, from: usize, to: usize) -> Result<Tensor, NnError> {
        let mut x = layer_forward(&self.layers[from], &self.params[from], input)?;
        for i in from + 1..to {
            x = if self.layers[i] == LayerSpec::Relu {
                x.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                x
            } else {
                layer_forward(&self.layers[i], &self.params[i], &x)?
            };
        }
        Ok(x)
    }

    /// Input to the final dense layer.
    pub fn features(&self, input: &Tensor) -> Result<Tensor, NnError> {
        self.forward_range(input, 0, self.head_index())
    }

    /// Summed cross-entropy of a batch and its parameter gradients scaled by
    /// `scale`. With [`Scope::HeadOnly`], `input` may instead be the
    /// features from [`Network::features`] when `from_features` is set.
    pub fn loss_and_gradients(
        &self,
        input: &Tensor,
        labels: &[usize],
        scale: f64,
        scope: Scope,
        from_features: bool,
    ) -> Result<(f64, Gradients), NnError> {
        if labels.len() != input.rows() {
            return Err(NnError::Shape(format!("{} labels for {} samples", labels.len(), input.rows())));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= self.class_count) {
            return Err(NnError::Label { label, classes: self.class_count });
        }
        let head = self.head_index();
        let first = match scope {
            Scope::HeadOnly => head,
            Scope::AllLayers => 0,
        };
        if from_features && scope != Scope::HeadOnly {
            return Err(NnError::Shape("features only suffice for head-only training".into()));
        }

        // acts[i] is the input of layer i; relu layers keep only their output,
        // stored as the input of the next layer.
        let mut acts: Vec<Option<Tensor>> = vec![None; head + 1];
        let mut x = if from_features {
            input.clone()
        } else if first == head {
            self.features(input)?
        } else {
            input.clone()
        };
        for i in first..head {
            let y = if self.layers[i] == LayerSpec::Relu {
                let mut y = x;
                y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
                y
            } else {
                let y = layer_forward(&self.layers[i], &self.params[i], &x)?;
                acts[i] = Some(x);
                y
            };
            x = y;
        }
        let mut logits = layer_forward(&self.layers[head], &self.params[head], &x)?;
        acts[head] = Some(x);

        let c = self.class_count;
        let mut loss = 0.0;
        for (row, &label) in logits.data_mut().chunks_mut(c).zip(labels) {
            softmax_in_place(row);
            loss -= row[label].max(MIN_PROBABILITY).ln();
            row[label] -= 1.0;
            row.iter_mut().for_each(|v| *v *= scale);
        }
        let mut grad = logits;

        let mut grads: Gradients = vec![Vec::new(); self.layers.len()];
        for i in (first..=head).rev() {
            let spec = &self.layers[i];
            if *spec == LayerSpec::Relu {
                let out = acts[i + 1].as_ref().expect("relu output cached");
                grad = relu_backward(out, &grad);
                continue;
            }
            let inp = acts[i].as_ref().expect("layer input cached");
            let mut g: Vec<Tensor> = spec.param_shapes().into_iter().map(Tensor::zeros).collect();
            let want_dx = i > first;
            let dx = backward_into(spec, &self.params[i], inp, &grad, Some(&mut g), want_dx)?;
            grads[i] = g;
            if let Some(dx) = dx {
                grad = dx;
            }
            if i == 0 || self.layers[i - 1] != LayerSpec::Relu {
                acts[i] = None;
            }
        }
        Ok((loss, grads))
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, input: &Tensor, labels: &[usize]) -> Result<f64, NnError> {
        cross_entropy(&self.forward(input)?, labels)
    }
}

/// Mean of `-ln p[label]` over the rows of `probabilities`.
pub fn cross_entropy(probabilities: &Tensor, labels: &[usize]) -> Result<f64, NnError> {
    let c = *probabilities.shape().last().ok_or_else(|| NnError::Shape("empty probability tensor".into()))?;
    let rows = probabilities.len() / c.max(1);
    if rows != labels.len() || rows == 0 {
        return Err(NnError::Shape(format!("{} labels for {rows} probability rows", labels.len())));
    }
    let mut total = 0.0;
    for (row, &label) in probabilities.data().chunks(c).zip(labels) {
        if label >= c {
            return Err(NnError::Label { label, classes: c });
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(NnError::Shape(format!("probabilities sum to {sum}")));
        }
        total -= row[label].max(MIN_PROBABILITY).ln();
    }
    Ok(total / rows as f64)
}

fn trunk(input_shape: [usize; 3], classes: usize) -> Result<Vec<LayerSpec>, NnError> {
    let pool = LayerSpec::MaxPool { size: 2, stride: 2 };
    let mut layers = vec![
        LayerSpec::Conv { in_channels: input_shape[0], filters: 16, kernel: 5 },
        LayerSpec::Relu,
        pool,
        LayerSpec::Conv { in_channels: 16, filters: 32, kernel: 5 },
        LayerSpec::Relu,
        pool,
        LayerSpec::Conv { in_channels: 32, filters: 64, kernel: 3 },
        LayerSpec::Relu,
        pool,
        LayerSpec::Flatten,
    ];
    let mut shape = input_shape.to_vec();
    for l in &layers {
        shape = l.output_shape(&shape)?;
    }
    layers.extend([
        LayerSpec::Dense { inputs: shape[0], units: 1000 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 1000, units: 256 },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: 256, units: classes },
        LayerSpec::Softmax,
    ]);
    Ok(layers)
}

pub const OCCUPANCY_INPUT: [usize; 3] = [3, 100, 100];
pub const PIECE_INPUT: [usize; 3] = [3, 150, 100];

/// Three conv/relu/pool blocks (16, 32, 64 filters), dense 1000 and 256, two
/// outputs, on 100×100 RGB crops.
pub fn build_occupancy_net(seed: u64) -> Network {
    Network::new(OCCUPANCY_INPUT, trunk(OCCUPANCY_INPUT, 2).expect("valid architecture"), seed)
        .expect("valid architecture")
}

/// The occupancy trunk on 150×100 piece crops with twelve outputs.
pub fn build_piece_net(seed: u64) -> Network {
    Network::new(PIECE_INPUT, trunk(PIECE_INPUT, 12).expect("valid architecture"), seed).expect("valid architecture")
}

/// Network input for an RGB crop: channel-major, centred on zero.
pub fn image_to_input(img: &Image) -> Vec<f64> {
    let rgb = img.to_rgb();
    let (w, h) = (rgb.width(), rgb.height());
    let mut out = vec![0.0; 3 * w * h];
    for (i, px) in rgb.data().chunks(3).enumerate() {
        for c in 0..3 {
            out[c * w * h + i] = px[c] - 0.5;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_values() {
        let p = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        assert!(cross_entropy(&p, &[1]).unwrap() <= 1e-6);
        let p = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        assert!((cross_entropy(&p, &[0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        let p = Tensor::new(vec![2], vec![0.25, 0.75]).unwrap();
        assert!((cross_entropy(&p, &[1]).unwrap() - 0.2876820724517809).abs() < 1e-12);
        assert!(cross_entropy(&p, &[2]).is_err());
        let p = Tensor::new(vec![1, 2], vec![0.5, 0.6]).unwrap();
        assert!(cross_entropy(&p, &[0]).is_err());
    }

    #[test]
    fn architecture_shapes() {
        let occ = build_occupancy_net(0);
        let mut shape = occ.input_shape.to_vec();
        let mut pooled = Vec::new();
        for l in &occ.layers {
            shape = l.output_shape(&shape).unwrap();
            if matches!(l, LayerSpec::MaxPool { .. }) {
                pooled.push(shape[1]);
            }
        }
        assert_eq!(pooled, [50, 25, 12]);
        assert_eq!(occ.class_count, 2);
        assert!(matches!(occ.layers[10], LayerSpec::Dense { inputs: 9216, units: 1000 }));
        assert_eq!(occ.param_count(), build_occupancy_net(7).param_count());

        let piece = build_piece_net(0);
        let mut shape = piece.input_shape.to_vec();
        let mut tall = Vec::new();
        for l in &piece.layers {
            shape = l.output_shape(&shape).unwrap();
            if matches!(l, LayerSpec::MaxPool { .. }) {
                tall.push(shape[1]);
            }
        }
        assert_eq!(tall, [75, 37, 18]);
        assert_eq!(piece.class_count, 12);
    }
}
