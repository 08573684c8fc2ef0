//! Forward and backward kernels. All loops accumulate in a fixed order so
//! results are bit-reproducible for a given seed.

use super::model::{LayerParams, LayerSpec, ModelState, Shape};
use super::tensor::Tensor;
use super::NnError;

/// Run a batch through the model. The batch carries a leading batch
/// dimension; its remaining dims must match the spec input.
pub fn forward(state: &ModelState, batch: &Tensor) -> Result<Tensor, NnError> {
    Ok(forward_trace(state, batch)?.pop().unwrap())
}

/// Forward pass keeping every intermediate activation:
/// result[0] is the input, result[i+1] the output of layer i.
pub fn forward_trace(state: &ModelState, batch: &Tensor) -> Result<Vec<Tensor>, NnError> {
    check_batch_shape(state, batch)?;
    let mut acts = Vec::with_capacity(state.spec.layers.len() + 1);
    acts.push(batch.clone());
    for (i, layer) in state.spec.layers.iter().enumerate() {
        let x = acts.last().unwrap();
        let y = match layer {
            LayerSpec::Conv2d {
                stride, padding, ..
            } => {
                let p = state.params[i].as_ref().expect("conv params");
                conv2d_forward(x, &p.weight, &p.bias, *stride, *padding)
            }
            LayerSpec::MaxPool {
                pool_h,
                pool_w,
                stride,
            } => maxpool_forward(x, *pool_h, *pool_w, *stride),
            LayerSpec::Flatten => {
                let n = x.dims()[0];
                x.reshaped(&[n, x.len() / n])
            }
            LayerSpec::FullyConnected { .. } => {
                let p = state.params[i].as_ref().expect("fc params");
                dense_forward(x, &p.weight, &p.bias)
            }
            LayerSpec::Relu => relu_forward(x),
            LayerSpec::Sigmoid => sigmoid_forward(x),
            LayerSpec::Softmax => softmax_forward(x),
        };
        acts.push(y);
    }
    Ok(acts)
}

/// Backpropagate `grad_out` through the traced activations. Returns
/// per-layer parameter gradients (None for parameter-free or frozen
/// layers) and the gradient with respect to the input batch.
pub fn backward(
    state: &ModelState,
    acts: &[Tensor],
    grad_out: &Tensor,
) -> (Vec<Option<LayerParams>>, Tensor) {
    let mut grads: Vec<Option<LayerParams>> = vec![None; state.spec.layers.len()];
    let mut g = grad_out.clone();
    for (i, layer) in state.spec.layers.iter().enumerate().rev() {
        let x = &acts[i];
        let y = &acts[i + 1];
        match layer {
            LayerSpec::Conv2d {
                stride, padding, ..
            } => {
                let p = state.params[i].as_ref().expect("conv params");
                let (gx, gw, gb) = conv2d_backward(x, &p.weight, *stride, *padding, &g);
                if state.trainable[i] {
                    grads[i] = Some(LayerParams {
                        weight: gw,
                        bias: gb,
                    });
                }
                g = gx;
            }
            LayerSpec::MaxPool {
                pool_h,
                pool_w,
                stride,
            } => {
                g = maxpool_backward(x, *pool_h, *pool_w, *stride, &g);
            }
            LayerSpec::Flatten => {
                g = g.reshaped(x.dims());
            }
            LayerSpec::FullyConnected { .. } => {
                let p = state.params[i].as_ref().expect("fc params");
                let (gx, gw, gb) = dense_backward(x, &p.weight, &g);
                if state.trainable[i] {
                    grads[i] = Some(LayerParams {
                        weight: gw,
                        bias: gb,
                    });
                }
                g = gx;
            }
            LayerSpec::Relu => {
                let mut gx = g.clone();
                for (v, &xin) in gx.data_mut().iter_mut().zip(x.data()) {
                    if xin <= 0.0 {
                        *v = 0.0;
                    }
                }
                g = gx;
            }
            LayerSpec::Sigmoid => {
                let mut gx = g.clone();
                for (v, &yout) in gx.data_mut().iter_mut().zip(y.data()) {
                    *v *= yout * (1.0 - yout);
                }
                g = gx;
            }
            LayerSpec::Softmax => {
                g = softmax_backward(y, &g);
            }
        }
    }
    (grads, g)
}

fn check_batch_shape(state: &ModelState, batch: &Tensor) -> Result<(), NnError> {
    let expected: Vec<usize> = match state.spec.input {
        Shape::Image {
            channels,
            height,
            width,
        } => vec![channels, height, width],
        Shape::Vector { dim } => vec![dim],
    };
    if batch.dims().len() != expected.len() + 1 || batch.dims()[1..] != expected[..] {
        return Err(NnError::ShapeMismatch {
            layer: 0,
            expected: format!("batch x {}", state.spec.input),
            found: format!("{:?}", batch.dims()),
        });
    }
    Ok(())
}

pub(super) fn conv2d_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
    padding: usize,
) -> Tensor {
    let [n, c_in, h, width] = four(x.dims());
    let [c_out, _, kh, kw] = four(w.dims());
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (width + 2 * padding - kw) / stride + 1;
    let mut y = Tensor::zeros(&[n, c_out, oh, ow]);

    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let yd = y.data_mut();
    for ni in 0..n {
        for co in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bd[co];
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            let iy = oy * stride + ky;
                            if iy < padding || iy >= h + padding {
                                continue;
                            }
                            let iy = iy - padding;
                            let x_row = ((ni * c_in + ci) * h + iy) * width;
                            let w_row = ((co * c_in + ci) * kh + ky) * kw;
                            for kx in 0..kw {
                                let ix = ox * stride + kx;
                                if ix < padding || ix >= width + padding {
                                    continue;
                                }
                                acc += xd[x_row + ix - padding] * wd[w_row + kx];
                            }
                        }
                    }
                    yd[((ni * c_out + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    y
}

pub(super) fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    padding: usize,
    gy: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let [n, c_in, h, width] = four(x.dims());
    let [c_out, _, kh, kw] = four(w.dims());
    let [_, _, oh, ow] = four(gy.dims());
    let mut gx = Tensor::zeros(x.dims());
    let mut gw = Tensor::zeros(w.dims());
    let mut gb = Tensor::zeros(&[c_out]);

    let xd = x.data();
    let wd = w.data();
    let gyd = gy.data();
    let gxd = gx.data_mut();
    let gwd = gw.data_mut();
    let gbd = gb.data_mut();
    for ni in 0..n {
        for co in 0..c_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = gyd[((ni * c_out + co) * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    gbd[co] += g;
                    for ci in 0..c_in {
                        for ky in 0..kh {
                            let iy = oy * stride + ky;
                            if iy < padding || iy >= h + padding {
                                continue;
                            }
                            let iy = iy - padding;
                            let x_row = ((ni * c_in + ci) * h + iy) * width;
                            let w_row = ((co * c_in + ci) * kh + ky) * kw;
                            for kx in 0..kw {
                                let ix = ox * stride + kx;
                                if ix < padding || ix >= width + padding {
                                    continue;
                                }
                                let ix = ix - padding;
                                gwd[w_row + kx] += g * xd[x_row + ix];
                                gxd[x_row + ix] += g * wd[w_row + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

pub(super) fn maxpool_forward(x: &Tensor, ph: usize, pw: usize, stride: usize) -> Tensor {
    let [n, c, h, w] = four(x.dims());
    let oh = (h - ph) / stride + 1;
    let ow = (w - pw) / stride + 1;
    let mut y = Tensor::zeros(&[n, c, oh, ow]);
    let xd = x.data();
    let yd = y.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let plane = (ni * c + ci) * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..ph {
                        let row = plane + (oy * stride + ky) * w + ox * stride;
                        for kx in 0..pw {
                            let v = xd[row + kx];
                            if v > best {
                                best = v;
                            }
                        }
                    }
                    yd[((ni * c + ci) * oh + oy) * ow + ox] = best;
                }
            }
        }
    }
    y
}

pub(super) fn maxpool_backward(
    x: &Tensor,
    ph: usize,
    pw: usize,
    stride: usize,
    gy: &Tensor,
) -> Tensor {
    let [n, c, h, w] = four(x.dims());
    let [_, _, oh, ow] = four(gy.dims());
    let mut gx = Tensor::zeros(x.dims());
    let xd = x.data();
    let gyd = gy.data();
    let gxd = gx.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let plane = (ni * c + ci) * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    // Recompute the argmax; ties go to the first element in
                    // row-major scan order, matching the forward pass.
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for ky in 0..ph {
                        let row = plane + (oy * stride + ky) * w + ox * stride;
                        for kx in 0..pw {
                            let v = xd[row + kx];
                            if v > best {
                                best = v;
                                best_idx = row + kx;
                            }
                        }
                    }
                    gxd[best_idx] += gyd[((ni * c + ci) * oh + oy) * ow + ox];
                }
            }
        }
    }
    gx
}

pub(super) fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let n = x.dims()[0];
    let d_in = x.dims()[1];
    let d_out = w.dims()[0];
    let mut y = Tensor::zeros(&[n, d_out]);
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    let yd = y.data_mut();
    for ni in 0..n {
        let x_row = &xd[ni * d_in..(ni + 1) * d_in];
        for o in 0..d_out {
            let w_row = &wd[o * d_in..(o + 1) * d_in];
            let mut acc = bd[o];
            for (xv, wv) in x_row.iter().zip(w_row) {
                acc += xv * wv;
            }
            yd[ni * d_out + o] = acc;
        }
    }
    y
}

pub(super) fn dense_backward(x: &Tensor, w: &Tensor, gy: &Tensor) -> (Tensor, Tensor, Tensor) {
    let n = x.dims()[0];
    let d_in = x.dims()[1];
    let d_out = w.dims()[0];
    let mut gx = Tensor::zeros(x.dims());
    let mut gw = Tensor::zeros(w.dims());
    let mut gb = Tensor::zeros(&[d_out]);
    let xd = x.data();
    let wd = w.data();
    let gyd = gy.data();
    let gxd = gx.data_mut();
    let gwd = gw.data_mut();
    let gbd = gb.data_mut();
    for ni in 0..n {
        for o in 0..d_out {
            let g = gyd[ni * d_out + o];
            if g == 0.0 {
                continue;
            }
            gbd[o] += g;
            let w_row = &wd[o * d_in..(o + 1) * d_in];
            let gw_row = &mut gwd[o * d_in..(o + 1) * d_in];
            for i in 0..d_in {
                gw_row[i] += g * xd[ni * d_in + i];
                gxd[ni * d_in + i] += g * w_row[i];
            }
        }
    }
    (gx, gw, gb)
}

fn relu_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

fn sigmoid_forward(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    for v in y.data_mut() {
        *v = sigmoid(*v);
    }
    y
}

pub(super) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_forward(x: &Tensor) -> Tensor {
    let n = x.dims()[0];
    let d = x.dims()[1];
    let mut y = x.clone();
    let yd = y.data_mut();
    for ni in 0..n {
        let row = &mut yd[ni * d..(ni + 1) * d];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    y
}

fn softmax_backward(y: &Tensor, gy: &Tensor) -> Tensor {
    let n = y.dims()[0];
    let d = y.dims()[1];
    let mut gx = Tensor::zeros(y.dims());
    let yd = y.data();
    let gyd = gy.data();
    let gxd = gx.data_mut();
    for ni in 0..n {
        let yrow = &yd[ni * d..(ni + 1) * d];
        let grow = &gyd[ni * d..(ni + 1) * d];
        let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
        for i in 0..d {
            gxd[ni * d + i] = yrow[i] * (grow[i] - dot);
        }
    }
    gx
}

fn four(dims: &[usize]) -> [usize; 4] {
    [dims[0], dims[1], dims[2], dims[3]]
}
