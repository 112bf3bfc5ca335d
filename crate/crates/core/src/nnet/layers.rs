//! Layer kinds with batched forward and backward passes. Activations carry a
//! leading batch axis: `[n, c, h, w]` for spatial layers, `[n, f]` after
//! flattening.

use super::tensor::{gemm, Tensor};
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    /// Stride 1, same padding, odd square kernel.
    Conv { in_channels: usize, filters: usize, kernel: usize },
    /// Floor division of the spatial extents.
    MaxPool { size: usize, stride: usize },
    Relu,
    Flatten,
    Dense { inputs: usize, units: usize },
    Softmax,
}

impl LayerSpec {
    /// Shapes of the parameter tensors (weights, then bias).
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv { in_channels, filters, kernel } => {
                vec![vec![filters, in_channels, kernel, kernel], vec![filters]]
            }
            LayerSpec::Dense { inputs, units } => vec![vec![units, inputs], vec![units]],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }

    /// Inputs feeding each output unit, for weight initialisation.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv { in_channels, kernel, .. } => in_channels * kernel * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = || NnError::Shape(format!("{self:?} cannot take input {input:?}"));
        match *self {
            LayerSpec::Conv { in_channels, filters, kernel } => match input {
                [c, h, w] if *c == in_channels && kernel % 2 == 1 && *h > 0 && *w > 0 => Ok(vec![filters, *h, *w]),
                _ => Err(mismatch()),
            },
            LayerSpec::MaxPool { size, stride } => match input {
                [c, h, w] if size > 0 && stride > 0 && *h >= size && *w >= size => {
                    Ok(vec![*c, (h - size) / stride + 1, (w - size) / stride + 1])
                }
                _ => Err(mismatch()),
            },
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { inputs, units } => match input {
                [f] if *f == inputs => Ok(vec![units]),
                _ => Err(mismatch()),
            },
            LayerSpec::Softmax => match input {
                [_] => Ok(input.to_vec()),
                _ => Err(mismatch()),
            },
        }
    }

    fn check(&self, params: &[Tensor], input: &Tensor) -> Result<Vec<usize>, NnError> {
        let shapes = self.param_shapes();
        if params.len() != shapes.len() || params.iter().zip(&shapes).any(|(p, s)| p.shape() != s.as_slice()) {
            return Err(NnError::Shape(format!("parameters do not match {self:?}")));
        }
        if input.shape().is_empty() {
            return Err(NnError::Shape("input has no batch axis".into()));
        }
        self.output_shape(&input.shape()[1..])
    }
}

/// Forward pass over a batch.
pub fn layer_forward(spec: &LayerSpec, params: &[Tensor], input: &Tensor) -> Result<Tensor, NnError> {
    let out_shape = spec.check(params, input)?;
    let n = input.rows();
    let mut shape = vec![n];
    shape.extend(&out_shape);
    let out = match *spec {
        LayerSpec::Conv { in_channels, filters, kernel } => {
            let (h, w) = (input.shape()[2], input.shape()[3]);
            let (kk, hw) = (in_channels * kernel * kernel, h * w);
            let (wt, b) = (params[0].data(), params[1].data());
            let mut col = vec![0.0; kk * hw];
            let mut out = vec![0.0; n * filters * hw];
            for (x, y) in input.data().chunks(in_channels * hw).zip(out.chunks_mut(filters * hw)) {
                im2col(x, in_channels, h, w, kernel, &mut col);
                for (row, &bias) in y.chunks_mut(hw).zip(b) {
                    row.fill(bias);
                }
                gemm(filters, kk, hw, 1.0, wt, false, &col, false, 1.0, y);
            }
            out
        }
        LayerSpec::MaxPool { size, stride } => {
            let (c, h, w) = (input.shape()[1], input.shape()[2], input.shape()[3]);
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let mut out = Vec::with_capacity(n * c * oh * ow);
            for plane in input.data().chunks(h * w) {
                for oy in 0..oh {
                    for ox in 0..ow {
                        out.push(plane[pool_argmax(plane, w, oy * stride, ox * stride, size)]);
                    }
                }
            }
            debug_assert_eq!(out.len(), n * c * oh * ow);
            out
        }
        LayerSpec::Relu => input.data().iter().map(|&v| v.max(0.0)).collect(),
        LayerSpec::Flatten => input.data().to_vec(),
        LayerSpec::Dense { inputs, units } => {
            let mut out = Vec::with_capacity(n * units);
            for _ in 0..n {
                out.extend_from_slice(params[1].data());
            }
            gemm(n, inputs, units, 1.0, input.data(), false, params[0].data(), true, 1.0, &mut out);
            out
        }
        LayerSpec::Softmax => {
            let mut out = input.data().to_vec();
            for row in out.chunks_mut(out_shape[0]) {
                softmax_in_place(row);
            }
            out
        }
    };
    Ok(Tensor::from_parts(shape, out))
}

/// Backward pass over a batch: returns the gradient with respect to the
/// input and the parameter gradients (summed over the batch).
pub fn layer_backward(
    spec: &LayerSpec,
    params: &[Tensor],
    input: &Tensor,
    upstream: &Tensor,
) -> Result<(Tensor, Vec<Tensor>), NnError> {
    let out_shape = spec.check(params, input)?;
    if upstream.rows() != input.rows() || upstream.shape()[1..] != out_shape[..] {
        return Err(NnError::Shape(format!(
            "upstream gradient {:?} does not match output {out_shape:?}",
            upstream.shape()
        )));
    }
    match *spec {
        LayerSpec::Relu => Ok((relu_backward(input, upstream), Vec::new())),
        LayerSpec::Softmax => {
            let p = layer_forward(spec, params, input)?;
            let c = out_shape[0];
            let mut dx = Vec::with_capacity(p.len());
            for (pr, gr) in p.data().chunks(c).zip(upstream.data().chunks(c)) {
                let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
                dx.extend(pr.iter().zip(gr).map(|(p, g)| p * (g - dot)));
            }
            Ok((Tensor::from_parts(input.shape().to_vec(), dx), Vec::new()))
        }
        _ => {
            let mut grads: Vec<Tensor> = spec.param_shapes().into_iter().map(Tensor::zeros).collect();
            let dx = backward_into(spec, params, input, upstream, Some(&mut grads), true)?;
            Ok((dx.expect("input gradient requested"), grads))
        }
    }
}

/// Gradient through a relu given either its input or its output (the masks
/// agree).
pub(crate) fn relu_backward(act: &Tensor, upstream: &Tensor) -> Tensor {
    let dx = act.data().iter().zip(upstream.data()).map(|(&a, &g)| if a > 0.0 { g } else { 0.0 }).collect();
    Tensor::from_parts(act.shape().to_vec(), dx)
}

/// Backward pass for parameterised and reshaping layers. Parameter gradients
/// are accumulated into `grads` when given; the input gradient is returned
/// only when `want_dx`.
pub(crate) fn backward_into(
    spec: &LayerSpec,
    params: &[Tensor],
    input: &Tensor,
    upstream: &Tensor,
    grads: Option<&mut [Tensor]>,
    want_dx: bool,
) -> Result<Option<Tensor>, NnError> {
    let n = input.rows();
    match *spec {
        LayerSpec::Conv { in_channels, filters, kernel } => {
            let (h, w) = (input.shape()[2], input.shape()[3]);
            let (kk, hw) = (in_channels * kernel * kernel, h * w);
            let wt = params[0].data();
            let mut col = vec![0.0; kk * hw];
            let mut dcol = vec![0.0; kk * hw];
            let mut dx = if want_dx { vec![0.0; input.len()] } else { Vec::new() };
            let mut grads = grads;
            for s in 0..n {
                let x = &input.data()[s * in_channels * hw..(s + 1) * in_channels * hw];
                let dy = &upstream.data()[s * filters * hw..(s + 1) * filters * hw];
                if let Some(g) = grads.as_deref_mut() {
                    im2col(x, in_channels, h, w, kernel, &mut col);
                    gemm(filters, hw, kk, 1.0, dy, false, &col, true, 1.0, g[0].data_mut());
                    for (db, row) in g[1].data_mut().iter_mut().zip(dy.chunks(hw)) {
                        *db += row.iter().sum::<f64>();
                    }
                }
                if want_dx {
                    gemm(kk, filters, hw, 1.0, wt, true, dy, false, 0.0, &mut dcol);
                    col2im(&dcol, in_channels, h, w, kernel, &mut dx[s * in_channels * hw..(s + 1) * in_channels * hw]);
                }
            }
            Ok(want_dx.then(|| Tensor::from_parts(input.shape().to_vec(), dx)))
        }
        LayerSpec::Dense { inputs, units } => {
            if let Some(g) = grads {
                gemm(units, n, inputs, 1.0, upstream.data(), true, input.data(), false, 1.0, g[0].data_mut());
                for row in upstream.data().chunks(units) {
                    for (db, v) in g[1].data_mut().iter_mut().zip(row) {
                        *db += v;
                    }
                }
            }
            if !want_dx {
                return Ok(None);
            }
            let mut dx = vec![0.0; n * inputs];
            gemm(n, units, inputs, 1.0, upstream.data(), false, params[0].data(), false, 0.0, &mut dx);
            Ok(Some(Tensor::from_parts(input.shape().to_vec(), dx)))
        }
        LayerSpec::MaxPool { size, stride } => {
            if !want_dx {
                return Ok(None);
            }
            let (h, w) = (input.shape()[2], input.shape()[3]);
            let (oh, ow) = (upstream.shape()[2], upstream.shape()[3]);
            let mut dx = vec![0.0; input.len()];
            let planes = input.data().chunks(h * w).zip(dx.chunks_mut(h * w)).zip(upstream.data().chunks(oh * ow));
            for ((plane, dplane), up) in planes {
                for oy in 0..oh {
                    for ox in 0..ow {
                        dplane[pool_argmax(plane, w, oy * stride, ox * stride, size)] += up[oy * ow + ox];
                    }
                }
            }
            Ok(Some(Tensor::from_parts(input.shape().to_vec(), dx)))
        }
        LayerSpec::Flatten => {
            Ok(want_dx.then(|| Tensor::from_parts(input.shape().to_vec(), upstream.data().to_vec())))
        }
        LayerSpec::Relu => Ok(want_dx.then(|| relu_backward(input, upstream))),
        LayerSpec::Softmax => unreachable!("softmax gradients are fused with the loss"),
    }
}

/// Index of the first maximum in a pooling window.
#[inline]
fn pool_argmax(plane: &[f64], w: usize, y0: usize, x0: usize, size: usize) -> usize {
    let mut best = y0 * w + x0;
    if size == 2 {
        for i in [best + 1, best + w, best + w + 1] {
            if plane[i] > plane[best] {
                best = i;
            }
        }
        return best;
    }
    for y in y0..y0 + size {
        for x in x0..x0 + size {
            if plane[y * w + x] > plane[best] {
                best = y * w + x;
            }
        }
    }
    best
}

/// Column matrix of shape `(c·k·k) × (h·w)` for a same-padded convolution.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, k: usize, col: &mut [f64]) {
    let p = k / 2;
    let hw = h * w;
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ch * k + ky) * k + kx) * hw..][..hw];
                let (xa, xb) = (p.saturating_sub(kx), (w + p).saturating_sub(kx).min(w));
                for y in 0..h {
                    let out = &mut row[y * w..(y + 1) * w];
                    let iy = y + ky;
                    if iy < p || iy - p >= h || xa >= xb {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[(iy - p) * w..];
                    out[..xa].fill(0.0);
                    out[xb..].fill(0.0);
                    out[xa..xb].copy_from_slice(&src[xa + kx - p..xb + kx - p]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back into an image.
fn col2im(col: &[f64], c: usize, h: usize, w: usize, k: usize, dx: &mut [f64]) {
    let p = k / 2;
    let hw = h * w;
    for ch in 0..c {
        let plane = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ch * k + ky) * k + kx) * hw..][..hw];
                let (xa, xb) = (p.saturating_sub(kx), (w + p).saturating_sub(kx).min(w));
                if xa >= xb {
                    continue;
                }
                for y in 0..h {
                    let iy = y + ky;
                    if iy < p || iy - p >= h {
                        continue;
                    }
                    let dst = &mut plane[(iy - p) * w + xa + kx - p..][..xb - xa];
                    for (d, s) in dst.iter_mut().zip(&row[y * w + xa..y * w + xb]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn relu_and_softmax() {
        let y = layer_forward(&LayerSpec::Relu, &[], &t(&[1, 3], &[-1.0, 0.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let y = layer_forward(&LayerSpec::Softmax, &[], &t(&[1, 2], &[0.0, 0.0])).unwrap();
        assert_eq!(y.data(), &[0.5, 0.5]);
        let (dx, _) = layer_backward(&LayerSpec::Relu, &[], &t(&[1, 2], &[-1.0, 2.0]), &t(&[1, 2], &[1.0, 1.0])).unwrap();
        assert_eq!(dx.data(), &[0.0, 1.0]);
    }

    #[test]
    fn conv_of_ones_counts_overlap() {
        let spec = LayerSpec::Conv { in_channels: 1, filters: 1, kernel: 3 };
        let params = [t(&[1, 1, 3, 3], &[1.0; 9]), t(&[1], &[0.0])];
        let y = layer_forward(&spec, &params, &t(&[1, 1, 4, 4], &[1.0; 16])).unwrap();
        #[rustfmt::skip]
        let expected = [
            4.0, 6.0, 6.0, 4.0,
            6.0, 9.0, 9.0, 6.0,
            6.0, 9.0, 9.0, 6.0,
            4.0, 6.0, 6.0, 4.0,
        ];
        assert_eq!(y.data(), &expected);
    }

    #[test]
    fn maxpool_floors() {
        let spec = LayerSpec::MaxPool { size: 2, stride: 2 };
        let x: Vec<f64> = (0..25).map(f64::from).collect();
        let y = layer_forward(&spec, &[], &t(&[1, 1, 5, 5], &x)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[6.0, 8.0, 16.0, 18.0]);
    }

    #[test]
    fn dense_weight_gradient_is_outer_product() {
        let spec = LayerSpec::Dense { inputs: 3, units: 2 };
        let params = [t(&[2, 3], &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), t(&[2], &[0.0, 1.0])];
        let x = t(&[1, 3], &[1.0, 2.0, 3.0]);
        let up = t(&[1, 2], &[0.5, -2.0]);
        let y = layer_forward(&spec, &params, &x).unwrap();
        assert!((y.data()[0] - 1.4).abs() < 1e-12 && (y.data()[1] - 4.2).abs() < 1e-12);
        let (dx, g) = layer_backward(&spec, &params, &x, &up).unwrap();
        assert_eq!(g[0].data(), &[0.5, 1.0, 1.5, -2.0, -4.0, -6.0]);
        assert_eq!(g[1].data(), &[0.5, -2.0]);
        assert!((dx.data()[0] - (0.05 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let spec = LayerSpec::Dense { inputs: 3, units: 2 };
        let params = [Tensor::zeros(vec![2, 3]), Tensor::zeros(vec![2])];
        assert!(layer_forward(&spec, &params, &Tensor::zeros(vec![1, 4])).is_err());
        assert!(layer_forward(&spec, &params[..1], &Tensor::zeros(vec![1, 3])).is_err());
        let conv = LayerSpec::Conv { in_channels: 2, filters: 1, kernel: 3 };
        let cp = [Tensor::zeros(vec![1, 2, 3, 3]), Tensor::zeros(vec![1])];
        assert!(layer_forward(&conv, &cp, &Tensor::zeros(vec![1, 3, 4, 4])).is_err());
    }
}
