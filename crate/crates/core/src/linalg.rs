//! Small dense containers: a row-major matrix and a 2x2 covariance.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Column sums.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(Mat::from_rows(&rows))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2(pub [[f64; 2]; 2]);

impl Cov2 {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Cov2([[a, b], [b, c]])
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn scaled(&self, f: f64) -> Self {
        Self::new(self.0[0][0] * f, self.0[0][1] * f, self.0[1][1] * f)
    }

    pub fn plus(&self, o: &Cov2) -> Self {
        Self::new(
            self.0[0][0] + o.0[0][0],
            self.0[0][1] + o.0[0][1],
            self.0[1][1] + o.0[1][1],
        )
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn is_spd(&self) -> bool {
        self.0[0][0] > 0.0 && self.det() > 0.0 && (self.0[0][1] - self.0[1][0]).abs() < 1e-12
    }

    pub fn inverse(&self) -> Cov2 {
        let d = self.det();
        Cov2::new(self.0[1][1] / d, -self.0[0][1] / d, self.0[0][0] / d)
    }

    /// `tr(A * self)` for symmetric `A`.
    pub fn trace_with(&self, a: &Cov2) -> f64 {
        a.0[0][0] * self.0[0][0] + 2.0 * a.0[0][1] * self.0[0][1] + a.0[1][1] * self.0[1][1]
    }

    /// Quadratic form `x' self x`.
    pub fn quad(&self, x0: f64, x1: f64) -> f64 {
        self.0[0][0] * x0 * x0 + 2.0 * self.0[0][1] * x0 * x1 + self.0[1][1] * x1 * x1
    }
}
