use crate::vector::check_same;
use crate::{Matrix, Result, TensorError, Vector};

pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    if m.cols() != v.dim() {
        return Err(TensorError::DimensionMismatch {
            op: "matvec",
            expected: m.cols(),
            actual: v.dim(),
        });
    }
    let x = v.as_slice();
    Ok((0..m.rows())
        .map(|r| m.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
        .collect())
}

/// `mᵀ v`, without materializing the transpose.
pub fn matvec_transposed(m: &Matrix, v: &Vector) -> Result<Vector> {
    if m.rows() != v.dim() {
        return Err(TensorError::DimensionMismatch {
            op: "matvec_transposed",
            expected: m.rows(),
            actual: v.dim(),
        });
    }
    let mut out = vec![0.0; m.cols()];
    for (r, &vr) in v.iter().enumerate() {
        if vr == 0.0 {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(m.row(r)) {
            *o += a * vr;
        }
    }
    Ok(Vector::from(out))
}

fn logistic(x: f64) -> f64 {
    // Split on sign so exp never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(v: &Vector) -> Vector {
    v.map(logistic)
}

pub fn tanh_elem(v: &Vector) -> Vector {
    v.map(f64::tanh)
}

pub fn hadamard(a: &Vector, b: &Vector) -> Result<Vector> {
    check_same("hadamard", a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).collect())
}

pub fn add(a: &Vector, b: &Vector) -> Result<Vector> {
    check_same("add", a, b)?;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x + y).collect())
}

/// Max-subtracted softmax.
pub fn softmax(v: &Vector) -> Result<Vector> {
    if v.is_empty() {
        return Err(TensorError::Empty("softmax"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(TensorError::NonFinite("softmax"));
    }
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

pub fn concat(a: &Vector, b: &Vector) -> Vector {
    let mut data = Vec::with_capacity(a.dim() + b.dim());
    data.extend_from_slice(a.as_slice());
    data.extend_from_slice(b.as_slice());
    Vector::from(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from(x)
    }

    #[test]
    fn matvec_identity_and_hand_values() {
        let out = matvec(&Matrix::identity(2), &v(&[3.0, -1.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, -1.0]);

        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matvec(&m, &v(&[1.0, 1.0])).unwrap().as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_bad_dims() {
        let m = Matrix::zeros(2, 3);
        let err = matvec(&m, &v(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, TensorError::DimensionMismatch { op: "matvec", .. }));
    }

    #[test]
    fn transposed_matches_explicit_transpose() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let t = Matrix::from_fn(3, 2, |r, c| m.get(c, r));
        let x = v(&[0.5, -2.0]);
        assert_eq!(matvec_transposed(&m, &x).unwrap(), matvec(&t, &x).unwrap());
    }

    #[test]
    fn elementwise_ops() {
        assert_eq!(sigmoid(&v(&[0.0, 0.0])).as_slice(), &[0.5, 0.5]);
        assert_eq!(tanh_elem(&v(&[0.0])).as_slice(), &[0.0]);
        assert_eq!(
            hadamard(&v(&[2.0, 3.0]), &v(&[4.0, 5.0])).unwrap().as_slice(),
            &[8.0, 15.0]
        );
        assert!(add(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
        assert!(hadamard(&v(&[1.0]), &v(&[])).is_err());
    }

    #[test]
    fn sigmoid_saturates_without_nan() {
        let out = sigmoid(&v(&[-1000.0, 1000.0]));
        assert_eq!(out.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn softmax_cases() {
        let out = softmax(&v(&[7.5, 7.5, 7.5])).unwrap();
        for p in out.iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }

        let out = softmax(&v(&[1000.0, 0.0])).unwrap();
        assert!(out.is_finite());
        assert!((out[0] - 1.0).abs() < 1e-12 && out[1] < 1e-300 + 1e-12);

        // e^x / sum e^x evaluated directly; the inputs are small enough not to overflow.
        let logits = [1.0f64, 2.0, 3.0];
        let z: f64 = logits.iter().map(|x| x.exp()).sum();
        let direct: Vec<f64> = logits.iter().map(|x| x.exp() / z).collect();
        let out = softmax(&v(&logits)).unwrap();
        for (a, b) in out.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((out[0] - 0.09003).abs() < 1e-5);
        assert!((out[1] - 0.24473).abs() < 1e-5);
        assert!((out[2] - 0.66524).abs() < 1e-5);

        assert_eq!(softmax(&Vector::zeros(0)).unwrap_err(), TensorError::Empty("softmax"));
    }

    #[test]
    fn concat_cases() {
        assert_eq!(concat(&v(&[1.0]), &v(&[2.0])).as_slice(), &[1.0, 2.0]);
        assert_eq!(concat(&Vector::zeros(0), &v(&[5.0])).as_slice(), &[5.0]);
        assert_eq!(concat(&Vector::zeros(4), &Vector::zeros(4)).dim(), 8);
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(v(&[1.0, 3.0, 3.0]).argmax(), Some(1));
        assert_eq!(Vector::zeros(0).argmax(), None);
    }
}
