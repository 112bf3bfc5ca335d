use std::borrow::Borrow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{image_to_input, Gradients, Network, Scope};
use super::tensor::Tensor;
use super::NnError;
use crate::image::Image;
use crate::parallel::{self, Execution};

/// Samples per gradient chunk. Chunk gradients are summed in order, so the
/// result does not depend on how many threads evaluate them.
pub const GRADIENT_CHUNK: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zero moments shaped like `params`, with the usual defaults.
    pub fn new(params: &[Vec<Tensor>], alpha: f64) -> Self {
        let zeros: Gradients =
            params.iter().map(|p| p.iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect()).collect();
        Self { m: zeros.clone(), v: zeros, t: 0, alpha, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update. Layers whose gradient list is empty are
/// left untouched (their moments too).
pub fn adam_step(state: &mut AdamState, params: &mut [Vec<Tensor>], grads: &[Vec<Tensor>]) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (layer, g) in grads.iter().enumerate() {
        for (k, g) in g.iter().enumerate() {
            let p = params[layer][k].data_mut();
            let m = state.m[layer][k].data_mut();
            let v = state.v[layer][k].data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                p[i] -= state.alpha * (m[i] / c1) / ((v[i] / c2).sqrt() + state.eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStage {
    pub scope: Scope,
    pub learning_rate: f64,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRegimen {
    pub stages: Vec<TrainStage>,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainRegimen {
    /// All layers at 1e-3 for `epochs` passes with batches of 128.
    pub fn standard(epochs: usize, seed: u64) -> Self {
        Self {
            stages: vec![TrainStage { scope: Scope::AllLayers, learning_rate: 1e-3, epochs }],
            batch_size: 128,
            seed,
        }
    }
}

/// Per-sample augmentation, called with a generator seeded from the sample's
/// (stage, epoch, index).
pub type Augment<'a> = dyn Fn(&Image, &mut ChaCha8Rng) -> Image + Sync + 'a;

/// Trains a copy of `net` and returns it with the mean loss of every batch.
pub fn train(
    net: &Network,
    data: &[(Image, usize)],
    regimen: &TrainRegimen,
    exec: Execution,
) -> Result<(Network, Vec<f64>), NnError> {
    train_augmented(net, data, regimen, None, exec)
}

pub fn train_augmented(
    net: &Network,
    data: &[(Image, usize)],
    regimen: &TrainRegimen,
    augment: Option<&Augment>,
    exec: Execution,
) -> Result<(Network, Vec<f64>), NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if regimen.stages.is_empty() || regimen.batch_size == 0 {
        return Err(NnError::Regimen);
    }
    if let Some(&(_, label)) = data.iter().find(|(_, l)| *l >= net.class_count) {
        return Err(NnError::Label { label, classes: net.class_count });
    }
    let [c, h, w] = net.input_shape;
    if let Some((img, _)) = data.iter().find(|(img, _)| img.width() != w || img.height() != h) {
        return Err(NnError::Shape(format!(
            "crop is {}×{}, network expects {w}×{h}",
            img.width(),
            img.height()
        )));
    }
    debug_assert_eq!(c, 3);

    let mut net = net.clone();
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle = ChaCha8Rng::seed_from_u64(regimen.seed);

    for (si, stage) in regimen.stages.iter().enumerate() {
        if stage.epochs == 0 {
            continue;
        }
        let mut adam = AdamState::new(&net.params, stage.learning_rate);
        let cached: Option<Vec<Vec<f64>>> = (stage.scope == Scope::HeadOnly && augment.is_none())
            .then(|| features(&net, data, exec))
            .transpose()?;
        for epoch in 0..stage.epochs {
            order.shuffle(&mut shuffle);
            for batch in order.chunks(regimen.batch_size) {
                let scale = 1.0 / batch.len() as f64;
                let chunk_grads = |idx: &[usize]| -> Result<(f64, Gradients), NnError> {
                    let labels: Vec<usize> = idx.iter().map(|&i| data[i].1).collect();
                    if let Some(f) = &cached {
                        let rows: Vec<f64> = idx.iter().flat_map(|&i| f[i].iter().copied()).collect();
                        let x = Tensor::from_parts(vec![idx.len(), f[0].len()], rows);
                        return net.loss_and_gradients(&x, &labels, scale, stage.scope, true);
                    }
                    let inputs: Vec<Vec<f64>> = match augment {
                        Some(aug) => idx
                            .iter()
                            .map(|&i| {
                                let mut rng = sample_rng(regimen.seed, si, epoch, i);
                                image_to_input(&aug(&data[i].0, &mut rng))
                            })
                            .collect(),
                        None => idx.iter().map(|&i| image_to_input(&data[i].0)).collect(),
                    };
                    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
                    net.loss_and_gradients(&net.batch(&refs)?, &labels, scale, stage.scope, false)
                };
                let folded = parallel::fold_chunks(exec, batch, GRADIENT_CHUNK, chunk_grads, |a, b| match (a, b) {
                    (Ok((la, mut ga)), Ok((lb, gb))) => {
                        for (x, y) in ga.iter_mut().zip(&gb) {
                            for (x, y) in x.iter_mut().zip(y) {
                                x.add_assign(y);
                            }
                        }
                        Ok((la + lb, ga))
                    }
                    (Err(e), _) | (_, Err(e)) => Err(e),
                });
                let (loss, grads) = folded.expect("batches are non-empty")?;
                trace.push(loss * scale);
                adam_step(&mut adam, &mut net.params, &grads);
            }
        }
    }
    Ok((net, trace))
}

fn sample_rng(seed: u64, stage: usize, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(((stage as u64) << 56) ^ ((epoch as u64) << 32) ^ index as u64);
    rng
}

fn features(net: &Network, data: &[(Image, usize)], exec: Execution) -> Result<Vec<Vec<f64>>, NnError> {
    let chunks = parallel::map_chunks(exec, data, GRADIENT_CHUNK, |chunk| -> Result<Vec<Vec<f64>>, NnError> {
        let inputs: Vec<Vec<f64>> = chunk.iter().map(|(img, _)| image_to_input(img)).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let f = net.features(&net.batch(&refs)?)?;
        Ok((0..f.rows()).map(|i| f.row(i).to_vec()).collect())
    });
    let mut out = Vec::with_capacity(data.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Class probabilities for each crop.
pub fn predict<I: Borrow<Image> + Sync>(net: &Network, crops: &[I], exec: Execution) -> Result<Vec<Vec<f64>>, NnError> {
    let chunks = parallel::map_chunks(exec, crops, GRADIENT_CHUNK, |chunk| -> Result<Vec<Vec<f64>>, NnError> {
        let inputs: Vec<Vec<f64>> = chunk.iter().map(|c| image_to_input(c.borrow())).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let p = net.forward(&net.batch(&refs)?)?;
        Ok((0..p.rows()).map(|i| p.row(i).to_vec()).collect())
    });
    let mut out = Vec::with_capacity(crops.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

/// Fraction of crops whose most probable class matches the label.
pub fn accuracy(net: &Network, data: &[(Image, usize)], exec: Execution) -> Result<f64, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let crops: Vec<&Image> = data.iter().map(|(img, _)| img).collect();
    let probs = predict(net, &crops, exec)?;
    let correct = probs.iter().zip(data).filter(|(p, (_, l))| argmax(p) == *l).count();
    Ok(correct as f64 / data.len() as f64)
}

pub fn argmax(p: &[f64]) -> usize {
    p.iter().enumerate().fold(0, |best, (i, v)| if *v > p[best] { i } else { best })
}
