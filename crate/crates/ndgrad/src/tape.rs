//! Reverse-mode autodiff tape.
//!
//! A [`Tape`] records every operation as it executes. Each node stores its
//! forward value plus a backward step that, given the gradient of the loss
//! with respect to the node's output, returns gradient contributions for the
//! node's inputs. [`Tape::backward`] walks the nodes in reverse creation
//! order, which is a valid topological order because operations can only
//! consume variables that already exist.
//!
//! All arithmetic is plain sequential f64, so identical inputs produce
//! bit-identical values and gradients.

use std::cell::RefCell;
use std::ops::Range;

use crate::array::{axpy, matmul, matmul_nt, matmul_tn, sigmoid, softplus, Array};
use crate::NdError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    /// Raw node index. Needed by custom operations registered through
    /// [`Tape::custom_op`].
    pub fn id(self) -> usize {
        self.0
    }
}

/// Read-only view of all node values, passed to backward steps.
pub struct TapeValues<'a>(&'a [Array]);

impl TapeValues<'_> {
    pub fn get(&self, v: Var) -> &Array {
        &self.0[v.0]
    }
}

type BackFn = Box<dyn Fn(&Array, &TapeValues) -> Vec<(Var, Array)>>;

struct Inner {
    values: Vec<Array>,
    backs: Vec<Option<BackFn>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Grads {
    by_node: Vec<Option<Array>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Array> {
        self.by_node.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `v`, or a zero array of the given shape when `v` did not
    /// influence the loss.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Array {
        self.get(v).cloned().unwrap_or_else(|| Array::zeros(shape))
    }
}

#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Default for Inner {
    fn default() -> Self {
        Inner { values: Vec::new(), backs: Vec::new() }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Current value of a node (cloned).
    pub fn value(&self, v: Var) -> Array {
        self.inner.borrow().values[v.0].clone()
    }

    pub fn shape_of(&self, v: Var) -> Vec<usize> {
        self.inner.borrow().values[v.0].shape().to_vec()
    }

    fn push(&self, value: Array, back: Option<BackFn>) -> Var {
        debug_assert!(value.all_finite(), "non-finite value entering tape");
        let mut inner = self.inner.borrow_mut();
        inner.values.push(value);
        inner.backs.push(back);
        Var(inner.values.len() - 1)
    }

    /// Differentiable input node.
    pub fn leaf(&self, value: Array) -> Var {
        self.push(value, None)
    }

    /// Register an externally computed operation. `back` receives the output
    /// gradient and the values of every tape node and must return the
    /// gradient contribution for each input it wants to propagate into.
    pub fn custom_op(
        &self,
        value: Array,
        back: impl Fn(&Array, &TapeValues) -> Vec<(Var, Array)> + 'static,
    ) -> Var {
        self.push(value, Some(Box::new(back)))
    }

    fn binary_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NdError> {
        let inner = self.inner.borrow();
        let (sa, sb) = (inner.values[a.0].shape(), inner.values[b.0].shape());
        if sa != sb {
            return Err(NdError::ShapeMismatch { op, lhs: sa.to_vec(), rhs: sb.to_vec() });
        }
        Ok(())
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("add", a, b)?;
        let out = {
            let inner = self.inner.borrow();
            let (va, vb) = (&inner.values[a.0], &inner.values[b.0]);
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
            Array::from_vec(va.shape(), data).unwrap()
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            vec![(a, g.clone()), (b, g.clone())]
        }))))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("sub", a, b)?;
        let out = {
            let inner = self.inner.borrow();
            let (va, vb) = (&inner.values[a.0], &inner.values[b.0]);
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect();
            Array::from_vec(va.shape(), data).unwrap()
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            vec![(a, g.clone()), (b, g.map(|x| -x))]
        }))))
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var, NdError> {
        self.binary_same_shape("mul", a, b)?;
        let out = {
            let inner = self.inner.borrow();
            let (va, vb) = (&inner.values[a.0], &inner.values[b.0]);
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
            Array::from_vec(va.shape(), data).unwrap()
        };
        Ok(self.push(out, Some(Box::new(move |g, vals| {
            let (va, vb) = (vals.get(a), vals.get(b));
            let ga = g.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
            let gb = g.data().iter().zip(va.data()).map(|(x, y)| x * y).collect();
            vec![
                (a, Array::from_vec(va.shape(), ga).unwrap()),
                (b, Array::from_vec(vb.shape(), gb).unwrap()),
            ]
        }))))
    }

    pub fn add_scalar(&self, a: Var, c: f64) -> Var {
        let out = self.inner.borrow().values[a.0].map(|x| x + c);
        self.push(out, Some(Box::new(move |g, _| vec![(a, g.clone())])))
    }

    pub fn mul_scalar(&self, a: Var, c: f64) -> Var {
        let out = self.inner.borrow().values[a.0].map(|x| x * c);
        self.push(out, Some(Box::new(move |g, _| vec![(a, g.map(|x| x * c))])))
    }

    pub fn neg(&self, a: Var) -> Var {
        self.mul_scalar(a, -1.0)
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64, f64) -> f64 + 'static) -> Var {
        // df receives (input, output) and returns the local derivative.
        let out = self.inner.borrow().values[a.0].map(f);
        let id_out = self.len(); // this op's own node index
        self.push(out, Some(Box::new(move |g, vals| {
            let (vin, vout) = (vals.get(a), vals.get(Var(id_out)));
            let data = g
                .data()
                .iter()
                .zip(vin.data().iter().zip(vout.data()))
                .map(|(gi, (&x, &y))| gi * df(x, y))
                .collect();
            vec![(a, Array::from_vec(vin.shape(), data).unwrap())]
        })))
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(a, f64::exp, |_, y| y)
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(a, sigmoid, |_, y| y * (1.0 - y))
    }

    /// x * sigmoid(x)
    pub fn silu(&self, a: Var) -> Var {
        self.unary(a, |x| x * sigmoid(x), |x, _| {
            let s = sigmoid(x);
            s * (1.0 + x * (1.0 - s))
        })
    }

    /// ln(1 + e^x)
    pub fn softplus(&self, a: Var) -> Var {
        self.unary(a, softplus, |x, _| sigmoid(x))
    }

    /// a[m,k] * b[k,n] -> [m,n]
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, NdError> {
        let out = {
            let inner = self.inner.borrow();
            let (va, vb) = (&inner.values[a.0], &inner.values[b.0]);
            if va.ndim() != 2 || vb.ndim() != 2 || va.cols() != vb.rows() {
                return Err(NdError::ShapeMismatch {
                    op: "matmul",
                    lhs: va.shape().to_vec(),
                    rhs: vb.shape().to_vec(),
                });
            }
            matmul(va, vb)
        };
        Ok(self.push(out, Some(Box::new(move |g, vals| {
            let (va, vb) = (vals.get(a), vals.get(b));
            vec![(a, matmul_nt(g, vb)), (b, matmul_tn(va, g))]
        }))))
    }

    /// Broadcast-add a row vector b[C] to every row of x[L,C].
    pub fn add_row(&self, x: Var, b: Var) -> Result<Var, NdError> {
        let out = {
            let inner = self.inner.borrow();
            let (vx, vb) = (&inner.values[x.0], &inner.values[b.0]);
            if vx.ndim() != 2 || vb.ndim() != 1 || vx.cols() != vb.len() {
                return Err(NdError::ShapeMismatch {
                    op: "add_row",
                    lhs: vx.shape().to_vec(),
                    rhs: vb.shape().to_vec(),
                });
            }
            let cols = vx.cols();
            let mut o = vx.clone();
            for r in 0..vx.rows() {
                axpy(&mut o.data_mut()[r * cols..(r + 1) * cols], 1.0, vb.data());
            }
            o
        };
        Ok(self.push(out, Some(Box::new(move |g, vals| {
            let cols = vals.get(b).len();
            let mut gb = vec![0.0; cols];
            for r in 0..g.rows() {
                axpy(&mut gb, 1.0, g.row(r));
            }
            vec![(x, g.clone()), (b, Array::vector(&gb))]
        }))))
    }

    /// 1-D convolution with same-length zero padding.
    ///
    /// x[L,c_in], kernel[c_out,c_in,w], bias[c_out] -> [L,c_out]. For even w
    /// the left pad is (w-1)/2 rounded down, remainder on the right.
    pub fn conv1d_same(&self, x: Var, kernel: Var, bias: Var) -> Result<Var, NdError> {
        let (l, c_in, c_out, w) = {
            let inner = self.inner.borrow();
            let (vx, vk, vb) = (&inner.values[x.0], &inner.values[kernel.0], &inner.values[bias.0]);
            if vx.ndim() != 2 || vk.ndim() != 3 {
                return Err(NdError::ShapeMismatch {
                    op: "conv1d_same",
                    lhs: vx.shape().to_vec(),
                    rhs: vk.shape().to_vec(),
                });
            }
            let (c_out, c_in, w) = (vk.shape()[0], vk.shape()[1], vk.shape()[2]);
            if vx.cols() != c_in || vb.shape() != [c_out] || w == 0 {
                return Err(NdError::ShapeMismatch {
                    op: "conv1d_same",
                    lhs: vx.shape().to_vec(),
                    rhs: vk.shape().to_vec(),
                });
            }
            (vx.rows(), c_in, c_out, w)
        };
        let pad_left = (w - 1) / 2;
        let out = {
            let inner = self.inner.borrow();
            let (vx, vk, vb) = (&inner.values[x.0], &inner.values[kernel.0], &inner.values[bias.0]);
            let mut o = Array::zeros(&[l, c_out]);
            for t in 0..l {
                for oc in 0..c_out {
                    let mut acc = vb.data()[oc];
                    for j in 0..w {
                        let src = t as isize + j as isize - pad_left as isize;
                        if src < 0 || src >= l as isize {
                            continue;
                        }
                        let src = src as usize;
                        for ic in 0..c_in {
                            acc += vk.data()[(oc * c_in + ic) * w + j] * vx.at2(src, ic);
                        }
                    }
                    o.set2(t, oc, acc);
                }
            }
            o
        };
        Ok(self.push(out, Some(Box::new(move |g, vals| {
            let (vx, vk) = (vals.get(x), vals.get(kernel));
            let mut gx = Array::zeros(&[l, c_in]);
            let mut gk = Array::zeros(&[c_out, c_in, w]);
            let mut gb = vec![0.0; c_out];
            for t in 0..l {
                for oc in 0..c_out {
                    let go = g.at2(t, oc);
                    if go == 0.0 {
                        continue;
                    }
                    gb[oc] += go;
                    for j in 0..w {
                        let src = t as isize + j as isize - pad_left as isize;
                        if src < 0 || src >= l as isize {
                            continue;
                        }
                        let src = src as usize;
                        for ic in 0..c_in {
                            gx.data_mut()[src * c_in + ic] += go * vk.data()[(oc * c_in + ic) * w + j];
                            gk.data_mut()[(oc * c_in + ic) * w + j] += go * vx.at2(src, ic);
                        }
                    }
                }
            }
            vec![(x, gx), (kernel, gk), (bias, Array::vector(&gb))]
        }))))
    }

    /// Depthwise causal 1-D convolution: y[t,c] = bias[c] + sum_j k[c,j] * x[t-w+1+j, c],
    /// positions before the start read as zero.
    pub fn conv1d_causal_depthwise(&self, x: Var, kernel: Var, bias: Var) -> Result<Var, NdError> {
        let (l, c, w) = {
            let inner = self.inner.borrow();
            let (vx, vk, vb) = (&inner.values[x.0], &inner.values[kernel.0], &inner.values[bias.0]);
            if vx.ndim() != 2 || vk.ndim() != 2 || vx.cols() != vk.rows() || vb.shape() != [vk.rows()] {
                return Err(NdError::ShapeMismatch {
                    op: "conv1d_causal_depthwise",
                    lhs: vx.shape().to_vec(),
                    rhs: vk.shape().to_vec(),
                });
            }
            (vx.rows(), vk.rows(), vk.cols())
        };
        let out = {
            let inner = self.inner.borrow();
            let (vx, vk, vb) = (&inner.values[x.0], &inner.values[kernel.0], &inner.values[bias.0]);
            let mut o = Array::zeros(&[l, c]);
            for t in 0..l {
                for ch in 0..c {
                    let mut acc = vb.data()[ch];
                    for j in 0..w {
                        let src = t as isize - (w as isize - 1) + j as isize;
                        if src >= 0 {
                            acc += vk.at2(ch, j) * vx.at2(src as usize, ch);
                        }
                    }
                    o.set2(t, ch, acc);
                }
            }
            o
        };
        Ok(self.push(out, Some(Box::new(move |g, vals| {
            let (vx, vk) = (vals.get(x), vals.get(kernel));
            let mut gx = Array::zeros(&[l, c]);
            let mut gk = Array::zeros(&[c, w]);
            let mut gb = vec![0.0; c];
            for t in 0..l {
                for ch in 0..c {
                    let go = g.at2(t, ch);
                    if go == 0.0 {
                        continue;
                    }
                    gb[ch] += go;
                    for j in 0..w {
                        let src = t as isize - (w as isize - 1) + j as isize;
                        if src >= 0 {
                            gx.data_mut()[src as usize * c + ch] += go * vk.at2(ch, j);
                            gk.data_mut()[ch * w + j] += go * vx.at2(src as usize, ch);
                        }
                    }
                }
            }
            vec![(x, gx), (kernel, gk), (bias, Array::vector(&gb))]
        }))))
    }

    /// Row gather: table[V,d] indexed by `indices` -> [len,d]. The same index
    /// may appear multiple times; backward accumulates into the shared row.
    pub fn gather(&self, table: Var, indices: &[usize]) -> Result<Var, NdError> {
        let idx: Vec<usize> = indices.to_vec();
        let (v, d) = {
            let inner = self.inner.borrow();
            let vt = &inner.values[table.0];
            if vt.ndim() != 2 {
                return Err(NdError::ShapeMismatch {
                    op: "gather",
                    lhs: vt.shape().to_vec(),
                    rhs: vec![idx.len()],
                });
            }
            (vt.rows(), vt.cols())
        };
        if let Some(&bad) = idx.iter().find(|&&i| i >= v) {
            return Err(NdError::IndexOutOfRange { index: bad, rows: v });
        }
        let out = {
            let inner = self.inner.borrow();
            let vt = &inner.values[table.0];
            let mut data = Vec::with_capacity(idx.len() * d);
            for &i in &idx {
                data.extend_from_slice(vt.row(i));
            }
            Array::from_vec(&[idx.len(), d], data).unwrap()
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            let mut gt = Array::zeros(&[v, d]);
            for (r, &i) in idx.iter().enumerate() {
                axpy(&mut gt.data_mut()[i * d..(i + 1) * d], 1.0, g.row(r));
            }
            vec![(table, gt)]
        }))))
    }

    /// Concatenate 1-D vectors.
    pub fn concat(&self, a: Var, b: Var) -> Result<Var, NdError> {
        let (la, lb) = {
            let inner = self.inner.borrow();
            let (va, vb) = (&inner.values[a.0], &inner.values[b.0]);
            if va.ndim() != 1 || vb.ndim() != 1 {
                return Err(NdError::ShapeMismatch {
                    op: "concat",
                    lhs: va.shape().to_vec(),
                    rhs: vb.shape().to_vec(),
                });
            }
            (va.len(), vb.len())
        };
        let out = {
            let inner = self.inner.borrow();
            let mut data = inner.values[a.0].data().to_vec();
            data.extend_from_slice(inner.values[b.0].data());
            Array::vector(&data)
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            vec![
                (a, Array::vector(&g.data()[..la])),
                (b, Array::vector(&g.data()[la..la + lb])),
            ]
        }))))
    }

    /// Column slice of a 2-D array.
    pub fn slice_cols(&self, x: Var, range: Range<usize>) -> Result<Var, NdError> {
        let (l, c) = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            if vx.ndim() != 2 || range.end > vx.cols() || range.start >= range.end {
                return Err(NdError::BadSlice {
                    shape: vx.shape().to_vec(),
                    start: range.start,
                    end: range.end,
                });
            }
            (vx.rows(), vx.cols())
        };
        let (start, width) = (range.start, range.end - range.start);
        let out = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            let mut data = Vec::with_capacity(l * width);
            for r in 0..l {
                data.extend_from_slice(&vx.row(r)[start..start + width]);
            }
            Array::from_vec(&[l, width], data).unwrap()
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            let mut gx = Array::zeros(&[l, c]);
            for r in 0..l {
                axpy(&mut gx.data_mut()[r * c + start..r * c + start + width], 1.0, g.row(r));
            }
            vec![(x, gx)]
        }))))
    }

    pub fn reshape(&self, x: Var, shape: &[usize]) -> Result<Var, NdError> {
        let out = self.inner.borrow().values[x.0].reshaped(shape)?;
        let orig = self.inner.borrow().values[x.0].shape().to_vec();
        Ok(self.push(out, Some(Box::new(move |g, _| {
            vec![(x, g.reshaped(&orig).unwrap())]
        }))))
    }

    /// Sum of all elements -> scalar.
    pub fn sum(&self, x: Var) -> Var {
        let (total, shape) = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            (vx.data().iter().sum::<f64>(), vx.shape().to_vec())
        };
        self.push(Array::scalar(total), Some(Box::new(move |g, _| {
            vec![(x, Array::full(&shape, g.item()))]
        })))
    }

    /// Mean of all elements -> scalar.
    pub fn mean(&self, x: Var) -> Var {
        let (total, shape, n) = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            (vx.data().iter().sum::<f64>(), vx.shape().to_vec(), vx.len())
        };
        self.push(Array::scalar(total / n as f64), Some(Box::new(move |g, _| {
            vec![(x, Array::full(&shape, g.item() / n as f64))]
        })))
    }

    /// Reduce a 2-D array over one axis. axis 0 sums rows away (-> [C]),
    /// axis 1 sums columns away (-> [L]).
    pub fn sum_axis(&self, x: Var, axis: usize) -> Result<Var, NdError> {
        self.reduce_axis(x, axis, false)
    }

    pub fn mean_axis(&self, x: Var, axis: usize) -> Result<Var, NdError> {
        self.reduce_axis(x, axis, true)
    }

    fn reduce_axis(&self, x: Var, axis: usize, mean: bool) -> Result<Var, NdError> {
        let (l, c) = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            if vx.ndim() != 2 || axis > 1 {
                return Err(NdError::BadAxis { shape: vx.shape().to_vec(), axis });
            }
            (vx.rows(), vx.cols())
        };
        let denom = if mean { (if axis == 0 { l } else { c }) as f64 } else { 1.0 };
        let out = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            if axis == 0 {
                let mut acc = vec![0.0; c];
                for r in 0..l {
                    axpy(&mut acc, 1.0, vx.row(r));
                }
                for a in &mut acc {
                    *a /= denom;
                }
                Array::vector(&acc)
            } else {
                let data: Vec<f64> = (0..l).map(|r| vx.row(r).iter().sum::<f64>() / denom).collect();
                Array::vector(&data)
            }
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            let mut gx = Array::zeros(&[l, c]);
            if axis == 0 {
                for r in 0..l {
                    axpy(&mut gx.data_mut()[r * c..(r + 1) * c], 1.0 / denom, g.data());
                }
            } else {
                for r in 0..l {
                    let gr = g.data()[r] / denom;
                    for v in &mut gx.data_mut()[r * c..(r + 1) * c] {
                        *v += gr;
                    }
                }
            }
            vec![(x, gx)]
        }))))
    }

    /// Per-channel mean of the k largest activations among the first
    /// `valid_len` rows of x[L,C] -> [C]. Rows at and beyond `valid_len` are
    /// treated as -inf (never selected). Ties select the lower row index.
    /// With valid_len = 0 the output is all zeros and no gradient flows.
    pub fn topk_mean(&self, x: Var, k: usize, valid_len: usize) -> Result<Var, NdError> {
        let (l, c) = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            if vx.ndim() != 2 {
                return Err(NdError::BadAxis { shape: vx.shape().to_vec(), axis: 0 });
            }
            (vx.rows(), vx.cols())
        };
        if valid_len > l {
            return Err(NdError::BadSlice { shape: vec![l, c], start: 0, end: valid_len });
        }
        if k == 0 {
            return Err(NdError::BadAxis { shape: vec![l, c], axis: 0 });
        }
        let m = k.min(valid_len);
        let (out, selected) = {
            let inner = self.inner.borrow();
            let vx = &inner.values[x.0];
            let mut out = vec![0.0; c];
            let mut selected: Vec<usize> = Vec::with_capacity(c * m);
            for ch in 0..c {
                if m == 0 {
                    continue;
                }
                let mut rows: Vec<usize> = (0..valid_len).collect();
                // descending by value, ascending by row index on ties
                rows.sort_by(|&a, &b| {
                    vx.at2(b, ch)
                        .partial_cmp(&vx.at2(a, ch))
                        .unwrap()
                        .then(a.cmp(&b))
                });
                rows.truncate(m);
                out[ch] = rows.iter().map(|&r| vx.at2(r, ch)).sum::<f64>() / m as f64;
                selected.extend_from_slice(&rows);
            }
            (Array::vector(&out), selected)
        };
        Ok(self.push(out, Some(Box::new(move |g, _| {
            let mut gx = Array::zeros(&[l, c]);
            if m > 0 {
                for ch in 0..c {
                    let gch = g.data()[ch] / m as f64;
                    for &r in &selected[ch * m..(ch + 1) * m] {
                        gx.data_mut()[r * c + ch] += gch;
                    }
                }
            }
            vec![(x, gx)]
        }))))
    }

    /// Row-wise layer normalization of x[L,C] with a learnable gain[C] and no
    /// bias: y = (x - mean) / sqrt(var + eps) * gain, var taken over C.
    pub fn layer_norm(&self, x: Var, gain: Var, eps: f64) -> Result<Var, NdError> {
        let (l, c) = {
            let inner = self.inner.borrow();
            let (vx, vg) = (&inner.values[x.0], &inner.values[gain.0]);
            if vx.ndim() != 2 || vg.shape() != [vx.cols()] {
                return Err(NdError::ShapeMismatch {
                    op: "layer_norm",
                    lhs: vx.shape().to_vec(),
                    rhs: vg.shape().to_vec(),
                });
            }
            (vx.rows(), vx.cols())
        };
        let (out, xhat, inv_std) = {
            let inner = self.inner.borrow();
            let (vx, vg) = (&inner.values[x.0], &inner.values[gain.0]);
            let mut out = Array::zeros(&[l, c]);
            let mut xhat = Array::zeros(&[l, c]);
            let mut inv_std = vec![0.0; l];
            for r in 0..l {
                let row = vx.row(r);
                let mu = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
                let is = 1.0 / (var + eps).sqrt();
                inv_std[r] = is;
                for ch in 0..c {
                    let xh = (row[ch] - mu) * is;
                    xhat.set2(r, ch, xh);
                    out.set2(r, ch, xh * vg.data()[ch]);
                }
            }
            (out, xhat, inv_std)
        };
        Ok(self.push(out, Some(Box::new(move |g, vals| {
            let vg = vals.get(gain);
            let mut gx = Array::zeros(&[l, c]);
            let mut ggain = vec![0.0; c];
            for r in 0..l {
                let mut sum_gy = 0.0;
                let mut sum_gy_xhat = 0.0;
                for ch in 0..c {
                    let gy = g.at2(r, ch) * vg.data()[ch];
                    sum_gy += gy;
                    sum_gy_xhat += gy * xhat.at2(r, ch);
                    ggain[ch] += g.at2(r, ch) * xhat.at2(r, ch);
                }
                let mean_gy = sum_gy / c as f64;
                let mean_gy_xhat = sum_gy_xhat / c as f64;
                for ch in 0..c {
                    let gy = g.at2(r, ch) * vg.data()[ch];
                    gx.set2(r, ch, inv_std[r] * (gy - mean_gy - xhat.at2(r, ch) * mean_gy_xhat));
                }
            }
            vec![(x, gx), (gain, Array::vector(&ggain))]
        }))))
    }

    /// Mean over elements of weights[i] * bce(sigmoid(logits[i]), targets[i]),
    /// computed in the numerically stable logit form. Targets and weights are
    /// constants.
    pub fn bce_logits_mean(
        &self,
        logits: Var,
        targets: &[f64],
        weights: &[f64],
    ) -> Result<Var, NdError> {
        let (n, shape) = {
            let inner = self.inner.borrow();
            let vz = &inner.values[logits.0];
            (vz.len(), vz.shape().to_vec())
        };
        if targets.len() != n || weights.len() != n || n == 0 {
            return Err(NdError::ShapeMismatch {
                op: "bce_logits_mean",
                lhs: shape,
                rhs: vec![targets.len(), weights.len()],
            });
        }
        let (t, w) = (targets.to_vec(), weights.to_vec());
        let total = {
            let inner = self.inner.borrow();
            let vz = &inner.values[logits.0];
            vz.data()
                .iter()
                .zip(t.iter().zip(&w))
                .map(|(&z, (&y, &wi))| wi * (z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()))
                .sum::<f64>()
                / n as f64
        };
        Ok(self.push(Array::scalar(total), Some(Box::new(move |g, vals| {
            let vz = vals.get(logits);
            let gs = g.item() / n as f64;
            let data = vz
                .data()
                .iter()
                .zip(t.iter().zip(&w))
                .map(|(&z, (&y, &wi))| gs * wi * (sigmoid(z) - y))
                .collect();
            vec![(logits, Array::from_vec(vz.shape(), data).unwrap())]
        }))))
    }

    /// Reverse pass from a scalar root. Returns gradients for every node that
    /// influenced the root; nodes that did not participate have no entry.
    pub fn backward(&self, root: Var) -> Result<Grads, NdError> {
        let inner = self.inner.borrow();
        let root_val = &inner.values[root.0];
        if !root_val.is_scalar() {
            return Err(NdError::NonScalarRoot { got: root_val.shape().to_vec() });
        }
        let mut grads: Vec<Option<Array>> = vec![None; inner.values.len()];
        grads[root.0] = Some(Array::scalar(1.0));
        let values = TapeValues(&inner.values);
        for i in (0..=root.0).rev() {
            let Some(back) = inner.backs[i].as_ref() else { continue };
            let Some(g) = grads[i].take() else { continue };
            for (v, contrib) in back(&g, &values) {
                debug_assert!(v.0 < i, "backward step fed gradient forward");
                match &mut grads[v.0] {
                    Some(acc) => {
                        debug_assert_eq!(acc.shape(), contrib.shape());
                        for (a, c) in acc.data_mut().iter_mut().zip(contrib.data()) {
                            *a += c;
                        }
                    }
                    slot => *slot = Some(contrib),
                }
            }
            // the take() above already dropped this intermediate's gradient;
            // leaves are never visited here so theirs survive for the caller
        }
        Ok(Grads { by_node: grads })
    }
}
