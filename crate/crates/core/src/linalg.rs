//! Small dense complex helpers shared by the model and the convex stage.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type CVector = Vec<Complex64>;

/// `Σ conj(a_i)·b_i`, i.e. `a^H b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Dense complex matrix stored row-major.
///
/// Serialised as a list of rows, each entry an `[re, im]` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row vectors. Returns `None` on ragged input.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Option<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return None;
        }
        Some(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `self · x`
    pub fn mul_vec(&self, x: &[Complex64]) -> CVector {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x^T · self` for a row vector `x` (no conjugation).
    pub fn row_mul(&self, x: &[Complex64]) -> CVector {
        assert_eq!(x.len(), self.rows, "vector-matrix dimension mismatch");
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, g) in out.iter_mut().zip(self.row(i)) {
                *o += xi * g;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        for z in &mut self.data {
            *z *= s;
        }
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<&[Complex64]> = (0..self.rows).map(|i| self.row(i)).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<Complex64>>::deserialize(d)?;
        CMatrix::from_rows(rows).ok_or_else(|| serde::de::Error::custom("ragged complex matrix"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dot_conjugates_left() {
        let a = [c(0.0, 1.0)];
        let b = [c(0.0, 1.0)];
        assert_eq!(dot_h(&a, &b), c(1.0, 0.0));
    }

    #[test]
    fn matrix_products() {
        let m = CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(0.0, 1.0)], vec![c(2.0, 0.0), c(0.0, 0.0)]]).unwrap();
        assert_eq!(m.mul_vec(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(1.0, 1.0), c(2.0, 0.0)]);
        assert_eq!(m.row_mul(&[c(1.0, 0.0), c(1.0, 0.0)]), vec![c(3.0, 0.0), c(0.0, 1.0)]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(CMatrix::from_rows(vec![vec![c(1.0, 0.0)], vec![]]).is_none());
    }

    #[test]
    fn json_is_nested_pairs() {
        let m = CMatrix::from_rows(vec![vec![c(1.0, -2.0)]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,-2.0]]]");
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
