use std::collections::HashMap;

use rand::Rng;

use super::kernels::{col2im_add, gemm, im2col};
use super::{ParamStore, Real, Tensor};
use crate::error::{Error, Result};

/// Smallest probability fed to the logarithm in [`Tape::cross_entropy`].
pub const LOG_PROB_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Constant,
    Variable,
    Param,
    Conv2d {
        input: Var,
        kernel: Var,
        bias: Var,
        cols: Vec<T>,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Upsample {
        input: Var,
        factor: usize,
    },
    Dense {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Relu {
        input: Var,
    },
    Softmax {
        input: Var,
    },
    Dropout {
        input: Var,
        mask: Vec<T>,
    },
    Reshape {
        input: Var,
    },
    SelectRows {
        input: Var,
        rows: Vec<usize>,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        input: Var,
        factor: T,
    },
    Sum {
        input: Var,
    },
    SquaredError {
        pred: Var,
        target: Vec<T>,
        batch: usize,
    },
    CrossEntropy {
        probs: Var,
        classes: Vec<usize>,
    },
    SumSquares {
        inputs: Vec<Var>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Records a forward computation so it can be differentiated in reverse.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    param_vars: HashMap<String, Var>,
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the loss with respect to `v`, if `v` was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn dims4(shape: &[usize], what: &str) -> Result<(usize, usize, usize, usize)> {
    match *shape {
        [b, c, h, w] => Ok((b, c, h, w)),
        [c, h, w] => Ok((1, c, h, w)),
        _ => Err(Error::shape(format!(
            "{what} expects a [B,C,H,W] or [C,H,W] input, got {shape:?}"
        ))),
    }
}

fn rows_cols(shape: &[usize], what: &str) -> Result<(usize, usize)> {
    match *shape {
        [n] => Ok((1, n)),
        [b, n] => Ok((b, n)),
        _ => Err(Error::shape(format!(
            "{what} expects a rank-1 or rank-2 input, got {shape:?}"
        ))),
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d = *d + s);
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// The single value of a scalar node.
    pub fn scalar(&self, v: Var) -> T {
        let t = &self.nodes[v.0].value;
        debug_assert_eq!(t.len(), 1);
        t.data()[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A value that is not differentiated (network input, target).
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// A free leaf whose gradient is wanted.
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Variable, true)
    }

    /// Brings a named parameter onto the tape. Repeated requests for the same
    /// name return the same node.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.param_vars.get(name) {
            return Ok(v);
        }
        let value = store.require(name)?.value().clone();
        let v = self.push(value, Op::Param, true);
        self.param_vars.insert(name.to_string(), v);
        Ok(v)
    }

    /// Parameter nodes recorded so far, by name.
    pub fn param_vars(&self) -> impl Iterator<Item = (&str, Var)> {
        self.param_vars.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Stride-1 cross-correlation with zero same-padding.
    ///
    /// `input` is `[B,C_in,H,W]` (or unbatched `[C_in,H,W]`), `kernel` is
    /// `[C_out,C_in,kH,kW]` with odd spatial extent, `bias` is `[C_out]`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let in_shape = self.value(input).shape().to_vec();
        let (b, ci, h, w) = dims4(&in_shape, "conv2d")?;
        let (co, kci, kh, kw) = match *self.value(kernel).shape() {
            [co, kci, kh, kw] => (co, kci, kh, kw),
            ref s => {
                return Err(Error::shape(format!(
                    "conv2d kernel must be [C_out,C_in,kH,kW], got {s:?}"
                )))
            }
        };
        if kci != ci {
            return Err(Error::shape(format!(
                "conv2d channel mismatch: input has {ci}, kernel expects {kci}"
            )));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::shape(format!(
                "conv2d kernel extent must be odd, got {kh}x{kw}"
            )));
        }
        if self.value(bias).shape() != [co] {
            return Err(Error::shape(format!(
                "conv2d bias must be [{co}], got {:?}",
                self.value(bias).shape()
            )));
        }

        let hw = h * w;
        let k = ci * kh * kw;
        let mut cols = vec![T::zero(); b * k * hw];
        let mut out = vec![T::zero(); b * co * hw];
        {
            let x = self.value(input).data();
            let kern = self.value(kernel).data();
            let bias_v = self.value(bias).data();
            for s in 0..b {
                let cols_s = &mut cols[s * k * hw..(s + 1) * k * hw];
                im2col(&x[s * ci * hw..(s + 1) * ci * hw], ci, h, w, kh, kw, cols_s);
                let out_s = &mut out[s * co * hw..(s + 1) * co * hw];
                for c in 0..co {
                    out_s[c * hw..(c + 1) * hw].fill(bias_v[c]);
                }
                gemm(false, false, co, hw, k, T::one(), kern, cols_s, T::one(), out_s);
            }
        }
        let out_shape = if in_shape.len() == 4 {
            vec![b, co, h, w]
        } else {
            vec![co, h, w]
        };
        let rg = self.needs(input) || self.needs(kernel) || self.needs(bias);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Conv2d {
                input,
                kernel,
                bias,
                cols,
            },
            rg,
        ))
    }

    /// 2×2 max pooling with stride 2 over the last two dimensions.
    pub fn maxpool2d(&mut self, input: Var) -> Result<Var> {
        let shape = self.value(input).shape().to_vec();
        if shape.len() < 2 {
            return Err(Error::shape("maxpool2d needs at least two dimensions"));
        }
        let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape(format!(
                "maxpool2d needs even spatial dims, got {h}x{w}"
            )));
        }
        let planes: usize = shape[..shape.len() - 2].iter().product();
        let (oh, ow) = (h / 2, w / 2);
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(planes * oh * ow);
        let mut argmax = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let base = p * h * w;
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = base + 2 * i * w + 2 * j;
                    for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * i + di) * w + 2 * j + dj;
                        // strict comparison keeps the first maximum in scan order
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    out.push(x[best]);
                    argmax.push(best);
                }
            }
        }
        let mut out_shape = shape.clone();
        let r = out_shape.len();
        out_shape[r - 2] = oh;
        out_shape[r - 1] = ow;
        let rg = self.needs(input);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::MaxPool { input, argmax }, rg))
    }

    /// Nearest-neighbour upsampling of the last two dimensions.
    pub fn upsample2d(&mut self, input: Var, factor: usize) -> Result<Var> {
        if factor == 0 {
            return Err(Error::param("upsample factor must be >= 1"));
        }
        let shape = self.value(input).shape().to_vec();
        if shape.len() < 2 {
            return Err(Error::shape("upsample2d needs at least two dimensions"));
        }
        let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
        let planes: usize = shape[..shape.len() - 2].iter().product();
        let (oh, ow) = (h * factor, w * factor);
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(planes * oh * ow);
        for p in 0..planes {
            let plane = &x[p * h * w..(p + 1) * h * w];
            for i in 0..oh {
                let row = &plane[(i / factor) * w..(i / factor + 1) * w];
                for j in 0..ow {
                    out.push(row[j / factor]);
                }
            }
        }
        let mut out_shape = shape.clone();
        let r = out_shape.len();
        out_shape[r - 2] = oh;
        out_shape[r - 1] = ow;
        let rg = self.needs(input);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Upsample { input, factor }, rg))
    }

    /// Affine map `weight · x + bias` applied to each row of `input`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let in_shape = self.value(input).shape().to_vec();
        let (b, d) = rows_cols(&in_shape, "dense")?;
        let (dout, din) = match *self.value(weight).shape() {
            [o, i] => (o, i),
            ref s => return Err(Error::shape(format!("dense weight must be rank 2, got {s:?}"))),
        };
        if din != d {
            return Err(Error::shape(format!(
                "dense dimension mismatch: input has {d}, weight expects {din}"
            )));
        }
        if self.value(bias).shape() != [dout] {
            return Err(Error::shape(format!(
                "dense bias must be [{dout}], got {:?}",
                self.value(bias).shape()
            )));
        }
        let bias_v = self.value(bias).data();
        let mut out = Vec::with_capacity(b * dout);
        for _ in 0..b {
            out.extend_from_slice(bias_v);
        }
        gemm(
            false,
            true,
            b,
            dout,
            d,
            T::one(),
            self.value(input).data(),
            self.value(weight).data(),
            T::one(),
            &mut out,
        );
        let out_shape = if in_shape.len() == 2 { vec![b, dout] } else { vec![dout] };
        let rg = self.needs(input) || self.needs(weight) || self.needs(bias);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Dense {
                input,
                weight,
                bias,
            },
            rg,
        ))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let value = self.value(input).map(|v| if v > T::zero() { v } else { T::zero() });
        let rg = self.needs(input);
        self.push(value, Op::Relu { input }, rg)
    }

    /// Softmax over the last dimension with max subtraction.
    pub fn softmax(&mut self, input: Var) -> Result<Var> {
        let shape = self.value(input).shape().to_vec();
        let (rows, k) = rows_cols(&shape, "softmax")?;
        let x = self.value(input).data();
        let mut out = vec![T::zero(); rows * k];
        for r in 0..rows {
            let row = &x[r * k..(r + 1) * k];
            let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.as_f64()));
            let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for (o, e) in out[r * k..(r + 1) * k].iter_mut().zip(&exps) {
                *o = T::cast_from(e / total);
            }
        }
        let rg = self.needs(input);
        Ok(self.push(Tensor::new(shape, out)?, Op::Softmax { input }, rg))
    }

    /// Inverted dropout. In eval mode, or with `p == 0`, returns `input`
    /// unchanged and draws nothing from `rng`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        input: Var,
        p: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::param(format!("dropout probability must be in [0,1), got {p}")));
        }
        if !train || p == 0.0 {
            return Ok(input);
        }
        let keep = T::cast_from(1.0 / (1.0 - p));
        let n = self.value(input).len();
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.gen::<f64>() < p { T::zero() } else { keep })
            .collect();
        let x = self.value(input);
        let value = Tensor::new(
            x.shape().to_vec(),
            x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
        )?;
        let rg = self.needs(input);
        Ok(self.push(value, Op::Dropout { input, mask }, rg))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(input).clone().reshape(shape)?;
        let rg = self.needs(input);
        Ok(self.push(value, Op::Reshape { input }, rg))
    }

    /// Gathers rows (first-axis slices) of `input`.
    pub fn select_rows(&mut self, input: Var, rows: &[usize]) -> Result<Var> {
        let shape = self.value(input).shape().to_vec();
        if shape.is_empty() {
            return Err(Error::shape("select_rows needs a batched input"));
        }
        let stride: usize = shape[1..].iter().product();
        let x = self.value(input).data();
        let mut out = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            if r >= shape[0] {
                return Err(Error::shape(format!("row {r} out of range for {shape:?}")));
            }
            out.extend_from_slice(&x[r * stride..(r + 1) * stride]);
        }
        let mut out_shape = shape.clone();
        out_shape[0] = rows.len();
        let rg = self.needs(input);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::SelectRows {
                input,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(format!(
                "add shape mismatch {:?} vs {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let value = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect(),
        )?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let f = T::cast_from(factor);
        let value = self.value(input).map(|v| v * f);
        let rg = self.needs(input);
        self.push(value, Op::Scale { input, factor: f }, rg)
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let total: f64 = self.value(input).data().iter().map(|v| v.as_f64()).sum();
        let rg = self.needs(input);
        self.push(Tensor::scalar(T::cast_from(total)), Op::Sum { input }, rg)
    }

    /// Mean over the batch (first axis) of per-sample squared Euclidean
    /// distance between `pred` and `target`.
    pub fn squared_error(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        let p = self.value(pred);
        if p.shape() != target.shape() {
            return Err(Error::shape(format!(
                "reconstruction target {:?} does not match prediction {:?}",
                target.shape(),
                p.shape()
            )));
        }
        let batch = if p.rank() >= 2 { p.shape()[0] } else { 1 };
        if batch == 0 {
            return Err(Error::shape("empty batch"));
        }
        let total: f64 = p
            .data()
            .iter()
            .zip(target.data())
            .map(|(&a, &b)| {
                let d = a.as_f64() - b.as_f64();
                d * d
            })
            .sum();
        let rg = self.needs(pred);
        Ok(self.push(
            Tensor::scalar(T::cast_from(total / batch as f64)),
            Op::SquaredError {
                pred,
                target: target.data().to_vec(),
                batch,
            },
            rg,
        ))
    }

    /// Mean over rows of `-ln p[true class]`, with probabilities floored at
    /// [`LOG_PROB_FLOOR`]. `one_hot` must hold exactly one 1 per row.
    pub fn cross_entropy(&mut self, probs: Var, one_hot: &Tensor<T>) -> Result<Var> {
        let p = self.value(probs);
        if p.shape() != one_hot.shape() {
            return Err(Error::shape(format!(
                "labels {:?} do not match probabilities {:?}",
                one_hot.shape(),
                p.shape()
            )));
        }
        let (rows, k) = rows_cols(p.shape(), "cross_entropy")?;
        if rows == 0 {
            return Err(Error::shape("empty batch"));
        }
        let mut classes = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &one_hot.data()[r * k..(r + 1) * k];
            let ones = row.iter().filter(|&&v| v == T::one()).count();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || zeros != k - 1 {
                return Err(Error::domain(format!("label row {r} is not one-hot")));
            }
            classes.push(row.iter().position(|&v| v == T::one()).unwrap_or(0));
        }
        let total: f64 = classes
            .iter()
            .enumerate()
            .map(|(r, &c)| -p.data()[r * k + c].as_f64().max(LOG_PROB_FLOOR).ln())
            .sum();
        let rg = self.needs(probs);
        Ok(self.push(
            Tensor::scalar(T::cast_from(total / rows as f64)),
            Op::CrossEntropy { probs, classes },
            rg,
        ))
    }

    /// Sum of squares of every element of every input.
    pub fn sum_squares(&mut self, inputs: &[Var]) -> Var {
        let total: f64 = inputs
            .iter()
            .flat_map(|&v| self.value(v).data().iter())
            .map(|x| {
                let x = x.as_f64();
                x * x
            })
            .sum();
        let rg = inputs.iter().any(|&v| self.needs(v));
        self.push(
            Tensor::scalar(T::cast_from(total)),
            Op::SumSquares {
                inputs: inputs.to_vec(),
            },
            rg,
        )
    }

    /// Reverse-mode pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }

        Ok(Gradients {
            grads: grads
                .into_iter()
                .zip(&self.nodes)
                .map(|(g, n)| {
                    g.map(|g| Tensor::new(n.value.shape().to_vec(), g).expect("gradient shape"))
                })
                .collect(),
        })
    }

    /// Runs [`backward`](Self::backward) and adds parameter gradients into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore<T>) -> Result<Gradients<T>> {
        let grads = self.backward(loss)?;
        self.accumulate_into(&grads, store)?;
        Ok(grads)
    }

    pub fn accumulate_into(&self, grads: &Gradients<T>, store: &mut ParamStore<T>) -> Result<()> {
        for (name, v) in &self.param_vars {
            if let Some(g) = grads.wrt(*v) {
                store
                    .get_mut(name)
                    .ok_or_else(|| Error::Usage(format!("unknown parameter {name}")))?
                    .accumulate(g.data());
            }
        }
        Ok(())
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<T>>], v: Var) -> &'a mut Vec<T> {
        let n = self.nodes[v.0].value.len();
        grads[v.0].get_or_insert_with(|| vec![T::zero(); n])
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match &node.op {
            Op::Constant | Op::Variable | Op::Param => {}
            Op::Conv2d {
                input,
                kernel,
                bias,
                cols,
            } => {
                let (b, ci, h, w) = dims4(self.value(*input).shape(), "conv2d").expect("checked");
                let kshape = self.value(*kernel).shape();
                let (co, kh, kw) = (kshape[0], kshape[2], kshape[3]);
                let hw = h * w;
                let k = ci * kh * kw;
                if self.needs(*bias) {
                    let db = self.slot(grads, *bias);
                    for s in 0..b {
                        for c in 0..co {
                            let start = (s * co + c) * hw;
                            let part: f64 = g[start..start + hw].iter().map(|v| v.as_f64()).sum();
                            db[c] = db[c] + T::cast_from(part);
                        }
                    }
                }
                if self.needs(*kernel) {
                    let dk = self.slot(grads, *kernel);
                    for s in 0..b {
                        gemm(
                            false,
                            true,
                            co,
                            k,
                            hw,
                            T::one(),
                            &g[s * co * hw..(s + 1) * co * hw],
                            &cols[s * k * hw..(s + 1) * k * hw],
                            T::one(),
                            dk,
                        );
                    }
                }
                if self.needs(*input) {
                    let kern = self.value(*kernel).data();
                    let mut dcols = vec![T::zero(); k * hw];
                    let dx = self.slot(grads, *input);
                    for s in 0..b {
                        gemm(
                            true,
                            false,
                            k,
                            hw,
                            co,
                            T::one(),
                            kern,
                            &g[s * co * hw..(s + 1) * co * hw],
                            T::zero(),
                            &mut dcols,
                        );
                        col2im_add(
                            &dcols,
                            ci,
                            h,
                            w,
                            kh,
                            kw,
                            &mut dx[s * ci * hw..(s + 1) * ci * hw],
                        );
                    }
                }
            }
            Op::MaxPool { input, argmax } => {
                if self.needs(*input) {
                    let dx = self.slot(grads, *input);
                    for (&idx, &gv) in argmax.iter().zip(g) {
                        dx[idx] = dx[idx] + gv;
                    }
                }
            }
            Op::Upsample { input, factor } => {
                if self.needs(*input) {
                    let shape = self.value(*input).shape();
                    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
                    let (oh, ow) = (h * factor, w * factor);
                    let planes = self.value(*input).len() / (h * w);
                    let dx = self.slot(grads, *input);
                    for p in 0..planes {
                        for i in 0..oh {
                            for j in 0..ow {
                                let src = p * oh * ow + i * ow + j;
                                let dst = p * h * w + (i / factor) * w + j / factor;
                                dx[dst] = dx[dst] + g[src];
                            }
                        }
                    }
                }
            }
            Op::Dense {
                input,
                weight,
                bias,
            } => {
                let (b, d) = rows_cols(self.value(*input).shape(), "dense").expect("checked");
                let dout = self.value(*weight).shape()[0];
                if self.needs(*bias) {
                    let db = self.slot(grads, *bias);
                    for r in 0..b {
                        add_into(db, &g[r * dout..(r + 1) * dout]);
                    }
                }
                if self.needs(*weight) {
                    let x = self.value(*input).data();
                    let dw = self.slot(grads, *weight);
                    gemm(true, false, dout, d, b, T::one(), g, x, T::one(), dw);
                }
                if self.needs(*input) {
                    let wv = self.value(*weight).data();
                    let dx = self.slot(grads, *input);
                    gemm(false, false, b, d, dout, T::one(), g, wv, T::one(), dx);
                }
            }
            Op::Relu { input } => {
                if self.needs(*input) {
                    let y = node.value.data();
                    let dx = self.slot(grads, *input);
                    for i in 0..g.len() {
                        if y[i] > T::zero() {
                            dx[i] = dx[i] + g[i];
                        }
                    }
                }
            }
            Op::Softmax { input } => {
                if self.needs(*input) {
                    let (rows, k) = rows_cols(node.value.shape(), "softmax").expect("checked");
                    let y = node.value.data();
                    let dx = self.slot(grads, *input);
                    for r in 0..rows {
                        let ys = &y[r * k..(r + 1) * k];
                        let gs = &g[r * k..(r + 1) * k];
                        let dot: f64 = ys.iter().zip(gs).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
                        for i in 0..k {
                            let v = ys[i].as_f64() * (gs[i].as_f64() - dot);
                            dx[r * k + i] = dx[r * k + i] + T::cast_from(v);
                        }
                    }
                }
            }
            Op::Dropout { input, mask } => {
                if self.needs(*input) {
                    let dx = self.slot(grads, *input);
                    for i in 0..g.len() {
                        dx[i] = dx[i] + g[i] * mask[i];
                    }
                }
            }
            Op::Reshape { input } => {
                if self.needs(*input) {
                    add_into(self.slot(grads, *input), g);
                }
            }
            Op::SelectRows { input, rows } => {
                if self.needs(*input) {
                    let stride = node.value.len() / rows.len().max(1);
                    let dx = self.slot(grads, *input);
                    for (i, &r) in rows.iter().enumerate() {
                        add_into(
                            &mut dx[r * stride..(r + 1) * stride],
                            &g[i * stride..(i + 1) * stride],
                        );
                    }
                }
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    add_into(self.slot(grads, *a), g);
                }
                if self.needs(*b) {
                    add_into(self.slot(grads, *b), g);
                }
            }
            Op::Scale { input, factor } => {
                if self.needs(*input) {
                    let dx = self.slot(grads, *input);
                    for i in 0..g.len() {
                        dx[i] = dx[i] + g[i] * *factor;
                    }
                }
            }
            Op::Sum { input } => {
                if self.needs(*input) {
                    let g0 = g[0];
                    self.slot(grads, *input).iter_mut().for_each(|d| *d = *d + g0);
                }
            }
            Op::SquaredError {
                pred,
                target,
                batch,
            } => {
                if self.needs(*pred) {
                    let g0 = g[0].as_f64();
                    let p = self.value(*pred).data();
                    let c = 2.0 * g0 / *batch as f64;
                    let dx = self.slot(grads, *pred);
                    for i in 0..p.len() {
                        let d = p[i].as_f64() - target[i].as_f64();
                        dx[i] = dx[i] + T::cast_from(c * d);
                    }
                }
            }
            Op::CrossEntropy { probs, classes } => {
                if self.needs(*probs) {
                    let g0 = g[0].as_f64();
                    let rows = classes.len();
                    let k = self.value(*probs).len() / rows;
                    let p = self.value(*probs).data();
                    let dx = self.slot(grads, *probs);
                    for (r, &c) in classes.iter().enumerate() {
                        let pv = p[r * k + c].as_f64();
                        if pv >= LOG_PROB_FLOOR {
                            let i = r * k + c;
                            dx[i] = dx[i] + T::cast_from(-g0 / (rows as f64 * pv));
                        }
                    }
                }
            }
            Op::SumSquares { inputs } => {
                let g0 = g[0];
                let two = T::cast_from(2.0);
                for &v in inputs {
                    if self.needs(v) {
                        let x = self.value(v).data();
                        let dx = self.slot(grads, v);
                        for i in 0..x.len() {
                            dx[i] = dx[i] + two * x[i] * g0;
                        }
                    }
                }
            }
        }
    }
}
