use super::dense::DenseMatrix;
use super::{NumericsError, Result};

/// Accumulates `(row, col, value)` triplets; duplicates are summed by
/// [`TripletBuilder::build`].
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "triplet ({row},{col}) out of range");
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; self.rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { rows: self.rows, cols: self.cols, row_ptr, col_idx, values }
    }
}

/// Compressed-row sparse matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TripletBuilder::new(rows, cols).build()
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut b = TripletBuilder::new(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            b.push(i, i, *d);
        }
        b.build()
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut b = TripletBuilder::new(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    b.push(i, j, m[(i, j)]);
                }
            }
        }
        b.build()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "sparse matvec dimension");
        (0..self.rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "sparse transpose_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            for (j, v) in self.row(i) {
                out[j] += v * yi;
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.cols, self.rows);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    pub fn scaled(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `max |A − Aᵀ|` relative to `max |A|`; `f64::INFINITY` for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Rows with no nonzero stored entry.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.rows).filter(|&i| self.row(i).all(|(_, v)| v == 0.0)).collect()
    }

    /// `A·M` for a dense `M`.
    pub fn mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if m.rows() != self.cols {
            return Err(NumericsError::DimensionMismatch(format!(
                "sparse {}x{} times dense {}x{}",
                self.rows,
                self.cols,
                m.rows(),
                m.cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, m.cols());
        for i in 0..self.rows {
            for (k, v) in self.row(i) {
                for j in 0..m.cols() {
                    out[(i, j)] += v * m[(k, j)];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(1, 0, 2.0);
        b.push(0, 0, 3.0);
        let m = b.build();
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn matvec_and_transpose_agree_with_dense() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(0, 2, 1.5);
        b.push(1, 0, -2.0);
        b.push(1, 1, 4.0);
        let m = b.build();
        let d = m.to_dense();
        assert_eq!(m.matvec(&[1.0, 2.0, 3.0]), d.matvec(&[1.0, 2.0, 3.0]));
        assert_eq!(m.transpose_matvec(&[1.0, -1.0]), d.transpose_matvec(&[1.0, -1.0]));
        assert_eq!(m.transpose().to_dense(), d.transpose());
        assert_eq!(m.empty_rows(), Vec::<usize>::new());
    }

    #[test]
    #[should_panic]
    fn out_of_range_triplet_panics() {
        TripletBuilder::new(1, 1).push(1, 0, 1.0);
    }
}
