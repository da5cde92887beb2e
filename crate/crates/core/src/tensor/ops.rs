use super::node::{BackwardCtx, Tensor};
use super::{numel, Result, TensorError};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Row-major GEMM: c (m×n) = [c +] op(a) (m×k) · op(b) (k×n).
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: slice lengths checked above; strides describe in-bounds
    // row-major (or transposed) layouts of those slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tensor {
    fn map_unary(
        &self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        df: fn(x: f64, y: f64) -> f64,
    ) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|&x| f(x)).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            op,
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let x = ctx.parents[0].data();
                let g = ctx
                    .grad
                    .iter()
                    .zip(x.iter())
                    .zip(ctx.out)
                    .map(|((g, &x), &y)| g * df(x, y))
                    .collect();
                vec![Some(g)]
            }),
        )
    }

    pub fn relu(&self) -> Tensor {
        self.map_unary("relu", |x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map_unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(&self) -> Tensor {
        self.map_unary("tanh", f64::tanh, |_, y| 1.0 - y * y)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&self) -> Tensor {
        self.map_unary("gelu", gelu, |x, _| gelu_grad(x))
    }

    pub fn abs(&self) -> Tensor {
        self.map_unary("abs", f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn neg(&self) -> Tensor {
        self.scale(-1.0)
    }

    /// Gradient passes where `lo <= x <= hi`.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|&x| x.clamp(lo, hi)).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            "clamp",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let x = ctx.parents[0].data();
                let g = ctx
                    .grad
                    .iter()
                    .zip(x.iter())
                    .map(|(g, &x)| if (lo..=hi).contains(&x) { *g } else { 0.0 })
                    .collect();
                vec![Some(g)]
            }),
        )
    }

    /// Multiply by a constant.
    pub fn scale(&self, c: f64) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x * c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            "scale",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| vec![Some(ctx.grad.iter().map(|g| g * c).collect())]),
        )
    }

    /// Add a constant.
    pub fn add_scalar(&self, c: f64) -> Tensor {
        let out: Vec<f64> = self.data().iter().map(|x| x + c).collect();
        Tensor::from_op(
            self.shape().to_vec(),
            out,
            "add_scalar",
            vec![self.clone()],
            Box::new(|ctx: &BackwardCtx<'_>| vec![Some(ctx.grad.to_vec())]),
        )
    }

    pub fn sum(&self) -> Tensor {
        let n = self.numel();
        let total: f64 = self.data().iter().sum();
        Tensor::from_op(
            Vec::new(),
            vec![total],
            "sum",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| vec![Some(vec![ctx.grad[0]; n])]),
        )
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel().max(1) as f64;
        self.sum().scale(1.0 / n)
    }

    /// Elementwise sum; either side may be a single-element tensor.
    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary("add", rhs, |a, b| a + b, |_, _| (1.0, 1.0))
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary("sub", rhs, |a, b| a - b, |_, _| (1.0, -1.0))
    }

    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.binary("mul", rhs, |a, b| a * b, |a, b| (b, a))
    }

    fn binary(
        &self,
        op: &'static str,
        rhs: &Tensor,
        f: fn(f64, f64) -> f64,
        df: fn(f64, f64) -> (f64, f64),
    ) -> Result<Tensor> {
        #[derive(Clone, Copy)]
        enum Mode {
            Same,
            RhsScalar,
            LhsScalar,
        }
        let mode = if self.shape() == rhs.shape() {
            Mode::Same
        } else if rhs.numel() == 1 {
            Mode::RhsScalar
        } else if self.numel() == 1 {
            Mode::LhsScalar
        } else {
            return Err(shape_err(op, self, rhs));
        };
        let out_shape = match mode {
            Mode::LhsScalar => rhs.shape().to_vec(),
            _ => self.shape().to_vec(),
        };
        let out: Vec<f64> = {
            let a = self.data();
            let b = rhs.data();
            match mode {
                Mode::Same => a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect(),
                Mode::RhsScalar => a.iter().map(|&x| f(x, b[0])).collect(),
                Mode::LhsScalar => b.iter().map(|&y| f(a[0], y)).collect(),
            }
        };
        Ok(Tensor::from_op(
            out_shape,
            out,
            op,
            vec![self.clone(), rhs.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                let mut ga = vec![0.0; ctx.parents[0].numel()];
                let mut gb = vec![0.0; ctx.parents[1].numel()];
                match mode {
                    Mode::Same => {
                        for i in 0..ctx.grad.len() {
                            let (da, db) = df(a[i], b[i]);
                            ga[i] = ctx.grad[i] * da;
                            gb[i] = ctx.grad[i] * db;
                        }
                    }
                    Mode::RhsScalar => {
                        for i in 0..ctx.grad.len() {
                            let (da, db) = df(a[i], b[0]);
                            ga[i] = ctx.grad[i] * da;
                            gb[0] += ctx.grad[i] * db;
                        }
                    }
                    Mode::LhsScalar => {
                        for i in 0..ctx.grad.len() {
                            let (da, db) = df(a[0], b[i]);
                            ga[0] += ctx.grad[i] * da;
                            gb[i] = ctx.grad[i] * db;
                        }
                    }
                }
                vec![ctx.needs[0].then_some(ga), ctx.needs[1].then_some(gb)]
            }),
        ))
    }

    /// `x[..., n] + bias[n]`.
    pub fn add_row(&self, bias: &Tensor) -> Result<Tensor> {
        let n = *self.shape().last().unwrap_or(&0);
        if bias.ndim() != 1 || bias.shape()[0] != n {
            return Err(shape_err("add_row", self, bias));
        }
        let out: Vec<f64> = {
            let b = bias.data();
            self.data()
                .chunks(n)
                .flat_map(|row| row.iter().zip(b.iter()).map(|(x, y)| x + y))
                .collect()
        };
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            "add_row",
            vec![self.clone(), bias.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let gb = ctx.needs[1].then(|| {
                    let mut gb = vec![0.0; n];
                    for row in ctx.grad.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    gb
                });
                vec![ctx.needs[0].then(|| ctx.grad.to_vec()), gb]
            }),
        ))
    }

    /// `[B, d] -> [B, len, d]`, repeating each row along a new middle axis.
    pub fn broadcast_over_seq(&self, len: usize) -> Result<Tensor> {
        if self.ndim() != 2 {
            return Err(TensorError::Contract(format!(
                "broadcast_over_seq expects [B, d], got {:?}",
                self.shape()
            )));
        }
        let (b, d) = (self.shape()[0], self.shape()[1]);
        let mut out = Vec::with_capacity(b * len * d);
        {
            let x = self.data();
            for row in x.chunks(d) {
                for _ in 0..len {
                    out.extend_from_slice(row);
                }
            }
        }
        Ok(Tensor::from_op(
            vec![b, len, d],
            out,
            "broadcast_over_seq",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let mut g = vec![0.0; b * d];
                for (bi, block) in ctx.grad.chunks(len * d).enumerate() {
                    let dst = &mut g[bi * d..(bi + 1) * d];
                    for row in block.chunks(d) {
                        dst.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                    }
                }
                vec![Some(g)]
            }),
        ))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() {
            return Err(TensorError::Shape {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(
            shape.to_vec(),
            self.to_vec(),
            "reshape",
            vec![self.clone()],
            Box::new(|ctx: &BackwardCtx<'_>| vec![Some(ctx.grad.to_vec())]),
        ))
    }

    /// General axis permutation; `out.shape[i] = self.shape[axes[i]]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let nd = self.ndim();
        let mut seen = vec![false; nd];
        if axes.len() != nd || axes.iter().any(|&a| a >= nd || std::mem::replace(&mut seen[a], true)) {
            return Err(TensorError::Contract(format!(
                "permute: {axes:?} is not a permutation of {nd} axes"
            )));
        }
        let in_shape = self.shape().to_vec();
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let out = permute_data(&self.data(), &in_shape, axes);
        let mut inverse = vec![0; nd];
        for (i, &a) in axes.iter().enumerate() {
            inverse[a] = i;
        }
        let grad_shape = out_shape.clone();
        Ok(Tensor::from_op(
            out_shape,
            out,
            "permute",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| vec![Some(permute_data(ctx.grad, &grad_shape, &inverse))]),
        ))
    }

    /// Swap the last two axes.
    pub fn transpose(&self) -> Result<Tensor> {
        let nd = self.ndim();
        if nd < 2 {
            return Err(TensorError::Contract("transpose needs at least 2 axes".into()));
        }
        let mut axes: Vec<usize> = (0..nd).collect();
        axes.swap(nd - 2, nd - 1);
        self.permute(&axes)
    }

    /// Batched matrix product `[..A, m, k] x [..B, k, n]` where the batch
    /// dims of the right operand are a suffix of the left's (possibly empty).
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        self.matmul_impl(rhs, false)
    }

    /// `self x rhsᵀ` over the last two axes: `[..A, m, k] x [..B, n, k]`.
    pub fn matmul_t(&self, rhs: &Tensor) -> Result<Tensor> {
        self.matmul_impl(rhs, true)
    }

    fn matmul_impl(&self, rhs: &Tensor, rhs_t: bool) -> Result<Tensor> {
        let op = if rhs_t { "matmul_t" } else { "matmul" };
        let (sa, sb) = (self.shape(), rhs.shape());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(shape_err(op, self, rhs));
        }
        let (batch_a, batch_b) = (&sa[..sa.len() - 2], &sb[..sb.len() - 2]);
        if batch_b.len() > batch_a.len() || batch_a[batch_a.len() - batch_b.len()..] != *batch_b {
            return Err(shape_err(op, self, rhs));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = if rhs_t {
            (sb[sb.len() - 1], sb[sb.len() - 2])
        } else {
            (sb[sb.len() - 2], sb[sb.len() - 1])
        };
        if k != kb {
            return Err(shape_err(op, self, rhs));
        }
        let (mut nba, nbb) = (numel(batch_a), numel(batch_b));
        // An unbatched right operand lets the left's batch fold into its rows.
        let m_rows = m;
        let m = if batch_b.is_empty() {
            let folded = nba * m;
            nba = 1;
            folded
        } else {
            m
        };
        let mut out = vec![0.0; nba * m * n];
        {
            let a = self.data();
            let b = rhs.data();
            for i in 0..nba {
                let j = i % nbb;
                gemm(
                    m,
                    k,
                    n,
                    &a[i * m * k..(i + 1) * m * k],
                    false,
                    &b[j * k * n..(j + 1) * k * n],
                    rhs_t,
                    &mut out[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
        }
        let mut out_shape = batch_a.to_vec();
        out_shape.extend([m_rows, n]);
        Ok(Tensor::from_op(
            out_shape,
            out,
            op,
            vec![self.clone(), rhs.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let a = ctx.parents[0].data();
                let b = ctx.parents[1].data();
                let g = ctx.grad;
                let ga = ctx.needs[0].then(|| {
                    let mut ga = vec![0.0; nba * m * k];
                    for i in 0..nba {
                        let j = i % nbb;
                        // dA = dC · Bᵀ  (or dC · B when B was used transposed)
                        gemm(
                            m,
                            n,
                            k,
                            &g[i * m * n..(i + 1) * m * n],
                            false,
                            &b[j * k * n..(j + 1) * k * n],
                            !rhs_t,
                            &mut ga[i * m * k..(i + 1) * m * k],
                            false,
                        );
                    }
                    ga
                });
                let gb = ctx.needs[1].then(|| {
                    let mut gb = vec![0.0; nbb * k * n];
                    for i in 0..nba {
                        let j = i % nbb;
                        let dst = &mut gb[j * k * n..(j + 1) * k * n];
                        if rhs_t {
                            // d(Bᵀ)... B is n×k: dB = dCᵀ · A
                            gemm(n, m, k, &g[i * m * n..(i + 1) * m * n], true, &a[i * m * k..(i + 1) * m * k], false, dst, true);
                        } else {
                            // dB = Aᵀ · dC
                            gemm(k, m, n, &a[i * m * k..(i + 1) * m * k], true, &g[i * m * n..(i + 1) * m * n], false, dst, true);
                        }
                    }
                    gb
                });
                vec![ga, gb]
            }),
        ))
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::Contract(format!("softmax axis {axis} out of range for {shape:?}")));
        }
        let outer = numel(&shape[..axis]);
        let len = shape[axis];
        let inner = numel(&shape[axis + 1..]);
        let mut out = self.to_vec();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * len * inner + i;
                let idx = |t: usize| base + t * inner;
                let max = (0..len).map(|t| out[idx(t)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for t in 0..len {
                    let e = (out[idx(t)] - max).exp();
                    out[idx(t)] = e;
                    total += e;
                }
                for t in 0..len {
                    out[idx(t)] /= total;
                }
            }
        }
        Ok(Tensor::from_op(
            shape,
            out,
            "softmax",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let (y, g) = (ctx.out, ctx.grad);
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let base = o * len * inner + i;
                        let dot: f64 = (0..len).map(|t| y[base + t * inner] * g[base + t * inner]).sum();
                        for t in 0..len {
                            let p = base + t * inner;
                            gx[p] = y[p] * (g[p] - dot);
                        }
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Normalizes the last axis, then applies `gamma` and `beta`.
    pub fn layer_norm(&self, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
        let n = *self.shape().last().unwrap_or(&0);
        if gamma.shape() != [n] || beta.shape() != [n] || n == 0 {
            return Err(shape_err("layer_norm", self, gamma));
        }
        let rows = self.numel() / n;
        let mut xhat = vec![0.0; rows * n];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; rows * n];
        {
            let x = self.data();
            let (gm, bt) = (gamma.data(), beta.data());
            for r in 0..rows {
                let row = &x[r * n..(r + 1) * n];
                let mu = row.iter().sum::<f64>() / n as f64;
                let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;
                let is = 1.0 / (var + eps).sqrt();
                inv_std[r] = is;
                for j in 0..n {
                    let h = (row[j] - mu) * is;
                    xhat[r * n + j] = h;
                    out[r * n + j] = h * gm[j] + bt[j];
                }
            }
        }
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            out,
            "layer_norm",
            vec![self.clone(), gamma.clone(), beta.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let g = ctx.grad;
                let gm = ctx.parents[1].data();
                let gx = ctx.needs[0].then(|| {
                    let mut gx = vec![0.0; rows * n];
                    for r in 0..rows {
                        let gh: Vec<f64> = (0..n).map(|j| g[r * n + j] * gm[j]).collect();
                        let xh = &xhat[r * n..(r + 1) * n];
                        let mean_g = gh.iter().sum::<f64>() / n as f64;
                        let mean_gx = gh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for j in 0..n {
                            gx[r * n + j] = inv_std[r] * (gh[j] - mean_g - xh[j] * mean_gx);
                        }
                    }
                    gx
                });
                let mut ggamma = vec![0.0; n];
                let mut gbeta = vec![0.0; n];
                for r in 0..rows {
                    for j in 0..n {
                        ggamma[j] += g[r * n + j] * xhat[r * n + j];
                        gbeta[j] += g[r * n + j];
                    }
                }
                vec![gx, ctx.needs[1].then_some(ggamma), ctx.needs[2].then_some(gbeta)]
            }),
        ))
    }

    /// Row lookup in a `[V, d]` table; output `[ids.len(), d]`.
    pub fn embedding(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
        if table.ndim() != 2 {
            return Err(TensorError::Contract(format!("embedding table must be 2-D, got {:?}", table.shape())));
        }
        let (v, d) = (table.shape()[0], table.shape()[1]);
        if let Some(bad) = ids.iter().find(|&&i| i >= v) {
            return Err(TensorError::Contract(format!("token id {bad} out of range for vocabulary of {v}")));
        }
        let mut out = Vec::with_capacity(ids.len() * d);
        {
            let t = table.data();
            for &i in ids {
                out.extend_from_slice(&t[i * d..(i + 1) * d]);
            }
        }
        let ids = ids.to_vec();
        Ok(Tensor::from_op(
            vec![ids.len(), d],
            out,
            "embedding",
            vec![table.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let mut g = vec![0.0; v * d];
                for (row, &i) in ctx.grad.chunks(d).zip(&ids) {
                    g[i * d..(i + 1) * d].iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                vec![Some(g)]
            }),
        ))
    }

    /// Concatenation along `axis`; all other dims must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts
            .first()
            .ok_or_else(|| TensorError::Contract("concat of zero tensors".into()))?;
        let nd = first.ndim();
        if axis >= nd {
            return Err(TensorError::Contract(format!("concat axis {axis} out of range")));
        }
        for p in parts {
            let ok = p.ndim() == nd
                && p.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(shape_err("concat", first, p));
            }
        }
        let outer = numel(&first.shape()[..axis]);
        let inner = numel(&first.shape()[axis + 1..]);
        let widths: Vec<usize> = parts.iter().map(|p| p.shape()[axis] * inner).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(outer * total);
        {
            let datas: Vec<_> = parts.iter().map(|p| p.data()).collect();
            for o in 0..outer {
                for (d, &w) in datas.iter().zip(&widths) {
                    out.extend_from_slice(&d[o * w..(o + 1) * w]);
                }
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total / inner.max(1);
        Ok(Tensor::from_op(
            shape,
            out,
            "concat",
            parts.to_vec(),
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let mut grads: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(outer * w)).collect();
                for o in 0..outer {
                    let mut off = o * total;
                    for (g, &w) in grads.iter_mut().zip(&widths) {
                        g.extend_from_slice(&ctx.grad[off..off + w]);
                        off += w;
                    }
                }
                grads.into_iter().zip(ctx.needs).map(|(g, &n)| n.then_some(g)).collect()
            }),
        ))
    }

    /// Mean token cross-entropy of `[..., V]` logits against `targets`,
    /// weighted by `mask` (1 = counted). Errors when nothing is counted.
    pub fn cross_entropy(&self, targets: &[usize], mask: &[f64]) -> Result<Tensor> {
        let v = *self.shape().last().unwrap_or(&0);
        let rows = self.numel().checked_div(v).unwrap_or(0);
        if targets.len() != rows || mask.len() != rows {
            return Err(TensorError::Contract(format!(
                "cross_entropy: {rows} rows but {} targets and {} mask entries",
                targets.len(),
                mask.len()
            )));
        }
        if let Some(bad) = targets.iter().zip(mask).find(|(&t, &m)| m != 0.0 && t >= v) {
            return Err(TensorError::Contract(format!("target id {} out of range for {v} classes", bad.0)));
        }
        let denom: f64 = mask.iter().sum();
        if denom <= 0.0 {
            return Err(TensorError::Contract("cross_entropy: every target position is masked".into()));
        }
        let mut probs = vec![0.0; rows * v];
        let mut loss = 0.0;
        {
            let x = self.data();
            for r in 0..rows {
                let row = &x[r * v..(r + 1) * v];
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = row.iter().map(|z| (z - max).exp()).sum();
                let log_total = total.ln() + max;
                for j in 0..v {
                    probs[r * v + j] = (row[j] - log_total).exp();
                }
                if mask[r] != 0.0 {
                    loss += mask[r] * (log_total - row[targets[r]]);
                }
            }
        }
        let targets = targets.to_vec();
        let mask = mask.to_vec();
        Ok(Tensor::from_op(
            Vec::new(),
            vec![loss / denom],
            "cross_entropy",
            vec![self.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let scale = ctx.grad[0] / denom;
                let mut g = vec![0.0; rows * v];
                for r in 0..rows {
                    if mask[r] == 0.0 {
                        continue;
                    }
                    let w = scale * mask[r];
                    for j in 0..v {
                        g[r * v + j] = w * probs[r * v + j];
                    }
                    g[r * v + targets[r]] -= w;
                }
                vec![Some(g)]
            }),
        ))
    }

    /// Cosine similarity of two equally sized tensors, flattened.
    /// Defined as 0 when either operand is the zero vector.
    pub fn cosine_similarity(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.numel() != rhs.numel() {
            return Err(shape_err("cosine_similarity", self, rhs));
        }
        let (dot, na, nb) = {
            let (a, b) = (self.data(), rhs.data());
            let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
            let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot, na, nb)
        };
        let degenerate = na == 0.0 || nb == 0.0;
        let c = if degenerate { 0.0 } else { dot / (na * nb) };
        Ok(Tensor::from_op(
            Vec::new(),
            vec![c],
            "cosine_similarity",
            vec![self.clone(), rhs.clone()],
            Box::new(move |ctx: &BackwardCtx<'_>| {
                let n = ctx.parents[0].numel();
                if degenerate {
                    return vec![ctx.needs[0].then(|| vec![0.0; n]), ctx.needs[1].then(|| vec![0.0; n])];
                }
                let (a, b) = (ctx.parents[0].data(), ctx.parents[1].data());
                let g = ctx.grad[0];
                let ga = ctx.needs[0].then(|| {
                    (0..n).map(|i| g * (b[i] / (na * nb) - c * a[i] / (na * na))).collect()
                });
                let gb = ctx.needs[1].then(|| {
                    (0..n).map(|i| g * (a[i] / (na * nb) - c * b[i] / (nb * nb))).collect()
                });
                vec![ga, gb]
            }),
        ))
    }
}

fn permute_data(data: &[f64], in_shape: &[usize], axes: &[usize]) -> Vec<f64> {
    let nd = in_shape.len();
    let mut in_strides = vec![1; nd];
    for i in (0..nd.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
    }
    let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
    let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let total = data.len();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; nd];
    let mut offset = 0usize;
    for _ in 0..total {
        out.push(data[offset]);
        for ax in (0..nd).rev() {
            idx[ax] += 1;
            offset += strides[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            offset -= strides[ax] * idx[ax];
            idx[ax] = 0;
        }
    }
    out
}
