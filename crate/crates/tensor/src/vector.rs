use std::ops::{Index, IndexMut};

use crate::{Result, TensorError};

/// A dense column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    /// Builds a vector, rejecting NaN and infinities.
    pub fn try_new(data: Vec<f64>) -> Result<Self> {
        if data.iter().all(|x| x.is_finite()) {
            Ok(Self { data })
        } else {
            Err(TensorError::NonFinite("Vector::try_new"))
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { data: vec![0.0; dim] }
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self { data: vec![value; dim] }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_same("dot", self, other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&self, factor: f64) -> Vector {
        self.map(|x| x * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector {
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `self += factor * other`
    pub fn add_scaled(&mut self, factor: f64, other: &Vector) -> Result<()> {
        check_same("add_scaled", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Splits into `[0, at)` and `[at, dim)`.
    pub fn split_at(&self, at: usize) -> Result<(Vector, Vector)> {
        if at > self.dim() {
            return Err(TensorError::DimensionMismatch {
                op: "split_at",
                expected: self.dim(),
                actual: at,
            });
        }
        let (a, b) = self.data.split_at(at);
        Ok((Vector::from(a.to_vec()), Vector::from(b.to_vec())))
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &x) in self.data.iter().enumerate() {
            match best {
                Some((_, b)) if x <= b => {}
                _ => best = Some((i, x)),
            }
        }
        best.map(|(i, _)| i)
    }
}

pub(crate) fn check_same(op: &'static str, a: &Vector, b: &Vector) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(TensorError::DimensionMismatch {
            op,
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

impl From<&[f64]> for Vector {
    fn from(data: &[f64]) -> Self {
        Self { data: data.to_vec() }
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self {
            data: iter.into_iter().collect(),
        }
    }
}
