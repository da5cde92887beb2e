use super::{no_grad, Result, Tensor};

/// Gradients smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, GRAD_FLOOR)
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the coordinate with the largest relative error.
    pub worst_index: usize,
    pub coordinates: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Compares the gradient of `f` at `x` from [`Tensor::backward`] with
/// central differences, perturbing `x` in place one coordinate at a time.
///
/// `x` is restored afterwards and is left holding the analytic gradient.
/// Other leaves reached by `f` also receive gradient from the analytic pass.
pub fn finite_difference_check<F>(f: F, x: &Tensor, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let was_tracked = x.requires_grad();
    x.set_requires_grad(true);
    x.zero_grad();
    let analytic = {
        let loss = f(x)?;
        loss.backward()?;
        x.grad().unwrap_or_else(|| vec![0.0; x.numel()])
    };
    x.set_requires_grad(was_tracked);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        coordinates: x.numel(),
        tol,
        passed: true,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let original = x.data()[i];
        x.data_mut()[i] = original + eps;
        let plus = no_grad(|| f(x))?.item();
        x.data_mut()[i] = original - eps;
        let minus = no_grad(|| f(x))?.item();
        x.data_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * eps);
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report.passed = report.max_rel_error <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{Rng, TensorError};

    fn random(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = Rng::new(seed);
        let n = shape.iter().product();
        Tensor::parameter(shape, (0..n).map(|_| rng.normal()).collect()).unwrap()
    }

    fn check(f: impl Fn(&Tensor) -> Result<Tensor>, x: &Tensor) -> GradCheckReport {
        let r = finite_difference_check(f, x, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
        r
    }

    #[test]
    fn linear_sum_is_exact() {
        let x = random(&[5], 1);
        let r = check(|x| Ok(x.sum()), &x);
        assert!(r.max_rel_error < 1e-9);
    }

    #[test]
    fn elementwise_ops() {
        let x = random(&[3, 4], 2);
        let w = random(&[3, 4], 3);
        check(|x| Ok(x.sigmoid().mul(&w)?.sum()), &x);
        check(|x| Ok(x.tanh().mul(&w)?.sum()), &x);
        check(|x| Ok(x.gelu().mul(&w)?.sum()), &x);
        check(|x| Ok(x.relu().mul(&w)?.sum()), &x);
        check(|x| Ok(x.abs().mul(&w)?.sum()), &x);
        check(|x| Ok(x.clamp(-0.5, 0.5).mul(&w)?.sum()), &x);
        check(|x| Ok(x.mul(x)?.sub(&w)?.mean()), &x);
        check(|x| Ok(x.softmax(1)?.mul(&w)?.sum()), &x);
        check(|x| Ok(x.softmax(0)?.mul(&w)?.sum()), &x);
    }

    #[test]
    fn scalar_broadcast_both_sides() {
        let x = random(&[3, 2], 4);
        let s = random(&[1], 5);
        check(|s| Ok(x.mul(s)?.add(s)?.tanh().sum()), &s);
        check(|x| Ok(s.sub(x)?.mul(x)?.sum()), &x);
    }

    #[test]
    fn matmul_both_operands_and_batched_suffix() {
        let a = random(&[2, 3, 4], 6);
        let b = random(&[4, 5], 7);
        let w = random(&[2, 3, 5], 8);
        check(|a| Ok(a.matmul(&b)?.mul(&w)?.sum()), &a);
        check(|b| Ok(a.matmul(b)?.mul(&w)?.sum()), &b);
        let bt = random(&[5, 4], 9);
        check(|a| Ok(a.matmul_t(&bt)?.mul(&w)?.sum()), &a);
        check(|bt| Ok(a.matmul_t(bt)?.mul(&w)?.sum()), &bt);
        let bb = random(&[3, 4, 2], 10);
        let a4 = random(&[2, 3, 5, 4], 11);
        let w4 = random(&[2, 3, 5, 2], 12);
        check(|bb| Ok(a4.matmul(bb)?.mul(&w4)?.sum()), &bb);
    }

    #[test]
    fn structural_ops() {
        let x = random(&[2, 3, 4], 13);
        let w = random(&[4, 2, 3], 14);
        check(|x| Ok(x.permute(&[2, 0, 1])?.mul(&w)?.sum()), &x);
        let b = random(&[4], 15);
        let wx = random(&[2, 3, 4], 16);
        check(|b| Ok(x.add_row(b)?.tanh().mul(&wx)?.sum()), &b);
        let e = random(&[2, 4], 17);
        check(|e| Ok(e.broadcast_over_seq(3)?.mul(&wx)?.sum()), &e);
        let y = random(&[2, 2, 4], 18);
        let wc = random(&[2, 5, 4], 19);
        check(|x| Ok(Tensor::concat(&[x.clone(), y.clone()], 1)?.mul(&wc)?.sum()), &x);
        check(|y| Ok(Tensor::concat(&[x.clone(), y.clone()], 1)?.mul(&wc)?.sum()), &y);
    }

    #[test]
    fn layer_norm_all_inputs() {
        let x = random(&[3, 5], 20);
        let g = random(&[5], 21);
        let b = random(&[5], 22);
        let w = random(&[3, 5], 23);
        check(|x| Ok(x.layer_norm(&g, &b, 1e-6)?.mul(&w)?.sum()), &x);
        check(|g| Ok(x.layer_norm(g, &b, 1e-6)?.mul(&w)?.sum()), &g);
        check(|b| Ok(x.layer_norm(&g, b, 1e-6)?.mul(&w)?.sum()), &b);
    }

    #[test]
    fn embedding_cross_entropy_cosine() {
        let table = random(&[6, 3], 24);
        let w = random(&[4, 3], 25);
        check(|t| Ok(Tensor::embedding(t, &[1, 5, 1, 0])?.mul(&w)?.sum()), &table);
        let logits = random(&[2, 3, 6], 26);
        check(|l| l.cross_entropy(&[0, 5, 2, 2, 1, 4], &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0]), &logits);
        let a = random(&[7], 27);
        let b = random(&[7], 28);
        check(|a| Ok(a.cosine_similarity(&b)?.abs()), &a);
    }

    #[test]
    fn embedding_out_of_range() {
        let table = random(&[4, 2], 1);
        assert!(matches!(Tensor::embedding(&table, &[4]), Err(TensorError::Contract(_))));
    }
}
