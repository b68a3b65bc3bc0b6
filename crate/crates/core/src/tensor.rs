//! Small dense tensors of rank 2-4 over a common index range `0..n`.

/// Flat row-major tensor of rank `R` with every index in `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<const R: usize> {
    n: usize,
    data: Vec<f64>,
}

pub type Matrix = Tensor<2>;
pub type Tensor3 = Tensor<3>;
pub type Tensor4 = Tensor<4>;

impl<const R: usize> Tensor<R> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n.pow(R as u32)] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut([usize; R]) -> f64) -> Self {
        let mut t = Self::zeros(n);
        for flat in 0..t.data.len() {
            let idx = t.unflatten(flat);
            t.data[flat] = f(idx);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, idx: [usize; R]) -> usize {
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.n);
            acc * self.n + i
        })
    }

    fn unflatten(&self, mut flat: usize) -> [usize; R] {
        let mut idx = [0; R];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn get(&self, idx: [usize; R]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: [usize; R], v: f64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when the tensor is unchanged by swapping index positions `a` and `b`.
    pub fn is_symmetric_in(&self, a: usize, b: usize, tol: f64) -> bool {
        (0..self.data.len()).all(|flat| {
            let mut idx = self.unflatten(flat);
            let v = self.data[flat];
            idx.swap(a, b);
            (v - self.get(idx)).abs() <= tol
        })
    }
}

impl Matrix {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |[i, j]| if i == j { 1.0 } else { 0.0 })
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get([i, j]))
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |[i, j]| m[(i, j)])
    }
}
