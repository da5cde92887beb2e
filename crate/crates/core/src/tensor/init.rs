use nalgebra::DMatrix;

use super::{Rng, Result, Tensor, TensorError};

/// `rows × cols` i.i.d. normal draws scaled by `std`, as a trainable leaf.
pub fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.normal() * std).collect();
    Tensor::parameter(&[rows, cols], data).expect("shape matches data")
}

/// Orthogonal matrix from the QR factorization of a Gaussian draw.
///
/// When `rows <= cols` the rows are orthonormal, otherwise the columns are.
/// Signs are fixed by the diagonal of R so the result is a deterministic
/// function of the draw.
pub fn orthogonal_init(rows: usize, cols: usize, rng: &mut Rng) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(TensorError::Contract(format!("orthogonal_init: zero dimension ({rows}, {cols})")));
    }
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let draw = DMatrix::from_fn(tall, short, |_, _| rng.normal());
    let qr = draw.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    // q is tall × short with orthonormal columns.
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(if rows >= cols { q[(i, j)] } else { q[(j, i)] });
        }
    }
    Tensor::parameter(&[rows, cols], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(m: &[f64], rows: usize, cols: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..rows {
            for j in 0..rows {
                let dot: f64 = (0..cols).map(|k| m[i * cols + k] * m[j * cols + k]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn single_row_is_unit_norm() {
        let g = orthogonal_init(1, 8, &mut Rng::new(1)).unwrap().to_vec();
        let norm: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_by_eight_rows_orthonormal() {
        let g = orthogonal_init(6, 8, &mut Rng::new(42)).unwrap().to_vec();
        assert!(gram_error(&g, 6, 8) <= 1e-6);
    }

    #[test]
    fn tall_matrix_has_orthonormal_columns() {
        let g = orthogonal_init(8, 3, &mut Rng::new(7)).unwrap().to_vec();
        let mut t = vec![0.0; 24];
        for i in 0..8 {
            for j in 0..3 {
                t[j * 8 + i] = g[i * 3 + j];
            }
        }
        assert!(gram_error(&t, 3, 8) <= 1e-6);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = orthogonal_init(6, 16, &mut Rng::new(42)).unwrap().to_vec();
        let b = orthogonal_init(6, 16, &mut Rng::new(42)).unwrap().to_vec();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(orthogonal_init(0, 4, &mut Rng::new(1)).is_err());
    }
}
