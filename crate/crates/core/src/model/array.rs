/// Dense row-major f64 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape/data mismatch"
        );
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// out = W x for W of shape (rows x cols), accumulating into `out`.
pub(crate) fn matvec_acc(w: &Array, x: &[f64], out: &mut [f64]) {
    let cols = w.cols();
    debug_assert_eq!(x.len(), cols);
    for (o, row) in out.iter_mut().zip(w.data.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += W^T y for W of shape (rows x cols).
pub(crate) fn matvec_t_acc(w: &Array, y: &[f64], out: &mut [f64]) {
    let cols = w.cols();
    for (row, &yr) in w.data.chunks_exact(cols).zip(y) {
        if yr != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
    }
}

/// dW += y x^T for dW of shape (len(y) x len(x)).
pub(crate) fn outer_acc(dw: &mut Array, y: &[f64], x: &[f64]) {
    let cols = dw.cols();
    for (row, &yr) in dw.data.chunks_exact_mut(cols).zip(y) {
        if yr != 0.0 {
            for (d, b) in row.iter_mut().zip(x) {
                *d += yr * b;
            }
        }
    }
}
