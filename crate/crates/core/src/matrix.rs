//! Two-representation matrix storage: dense row-major below a small size
//! cutoff, compressed sparse rows above it. Matrices are immutable after
//! construction and safe to share across worker threads.

use crate::scalar::Scalar;

/// Below this edge length (on both axes) a matrix is kept dense.
pub const DENSE_LIMIT: usize = 64;

#[derive(Debug, Clone, PartialEq)]
enum Repr<F> {
    Dense(Vec<F>),
    Csr {
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<F>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    repr: Repr<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        if rows < DENSE_LIMIT && cols < DENSE_LIMIT {
            Matrix {
                rows,
                cols,
                repr: Repr::Dense(vec![F::zero(); rows * cols]),
            }
        } else {
            Matrix {
                rows,
                cols,
                repr: Repr::Csr {
                    row_ptr: vec![0; rows + 1],
                    col_idx: Vec::new(),
                    values: Vec::new(),
                },
            }
        }
    }

    /// Builds from a row-major dense buffer, choosing the representation by
    /// size.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense buffer length mismatch");
        if rows < DENSE_LIMIT && cols < DENSE_LIMIT {
            return Matrix {
                rows,
                cols,
                repr: Repr::Dense(data),
            };
        }
        let mut triplets = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = data[r * cols + c];
                if v != F::zero() {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(rows, cols, triplets)
    }

    /// Builds from (row, col, value) triplets; duplicate coordinates are
    /// summed, explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, F)>) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < rows && c < cols, "triplet out of bounds");
        }
        if rows < DENSE_LIMIT && cols < DENSE_LIMIT {
            let mut data = vec![F::zero(); rows * cols];
            for (r, c, v) in triplets {
                data[r * cols + c] += v;
            }
            return Matrix {
                rows,
                cols,
                repr: Repr::Dense(data),
            };
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_counts = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<F> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if v == F::zero() {
                continue;
            }
            if last == Some((r, c)) {
                let n = values.len();
                values[n - 1] += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r + 1] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = row_counts;
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Matrix {
            rows,
            cols,
            repr: Repr::Csr {
                row_ptr,
                col_idx,
                values,
            },
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        assert!(r < self.rows && c < self.cols, "index out of bounds");
        match &self.repr {
            Repr::Dense(d) => d[r * self.cols + c],
            Repr::Csr {
                row_ptr,
                col_idx,
                values,
            } => {
                let lo = row_ptr[r];
                let hi = row_ptr[r + 1];
                match col_idx[lo..hi].binary_search(&c) {
                    Ok(pos) => values[lo + pos],
                    Err(_) => F::zero(),
                }
            }
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.repr {
            Repr::Dense(d) => d.iter().filter(|v| **v != F::zero()).count(),
            Repr::Csr { values, .. } => values.len(),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, usize, F)> + '_ {
        (0..self.rows).flat_map(move |r| self.row_nonzero(r).map(move |(c, v)| (r, c, v)))
    }

    /// Nonzero entries of one row, by increasing column.
    pub fn row_nonzero(&self, r: usize) -> Box<dyn Iterator<Item = (usize, F)> + '_> {
        match &self.repr {
            Repr::Dense(d) => Box::new(
                d[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != F::zero())
                    .map(|(c, v)| (c, *v)),
            ),
            Repr::Csr {
                row_ptr,
                col_idx,
                values,
            } => {
                let lo = row_ptr[r];
                let hi = row_ptr[r + 1];
                Box::new(
                    col_idx[lo..hi]
                        .iter()
                        .zip(values[lo..hi].iter())
                        .map(|(c, v)| (*c, *v)),
                )
            }
        }
    }

    pub fn row_sums(&self) -> Vec<F> {
        let mut sums = vec![F::zero(); self.rows];
        for (r, _, v) in self.iter_nonzero() {
            sums[r] += v;
        }
        sums
    }

    pub fn col_sums(&self) -> Vec<F> {
        let mut sums = vec![F::zero(); self.cols];
        for (_, c, v) in self.iter_nonzero() {
            sums[c] += v;
        }
        sums
    }

    pub fn transpose(&self) -> Matrix<F> {
        let triplets: Vec<_> = self.iter_nonzero().map(|(r, c, v)| (c, r, v)).collect();
        Matrix::from_triplets(self.cols, self.rows, triplets)
    }

    /// Entry-wise rescale: out(i, j) = v(i, j) * (row_scale[i] * col_scale[j]).
    /// The scales multiply first so a symmetric input stays bit-exactly
    /// symmetric.
    pub fn scale_rows_cols(&self, row_scale: &[F], col_scale: &[F]) -> Matrix<F> {
        assert_eq!(row_scale.len(), self.rows);
        assert_eq!(col_scale.len(), self.cols);
        let triplets: Vec<_> = self
            .iter_nonzero()
            .map(|(r, c, v)| (r, c, v * (row_scale[r] * col_scale[c])))
            .collect();
        Matrix::from_triplets(self.rows, self.cols, triplets)
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        self.iter_nonzero().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// First asymmetric coordinate, if any.
    pub fn find_asymmetry(&self) -> Option<(usize, usize)> {
        if self.rows != self.cols {
            return None;
        }
        self.iter_nonzero()
            .find(|&(r, c, v)| self.get(c, r) != v)
            .map(|(r, c, _)| (r, c))
    }

    /// y = A x
    pub fn matvec(&self, x: &[F], y: &mut [F]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        y.fill(F::zero());
        for (r, c, v) in self.iter_nonzero() {
            y[r] += v * x[c];
        }
    }

    /// y = Aᵀ x
    pub fn matvec_transpose(&self, x: &[F], y: &mut [F]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        y.fill(F::zero());
        for (r, c, v) in self.iter_nonzero() {
            y[c] += v * x[r];
        }
    }

    /// Full row including zeros, for writers.
    pub fn dense_row(&self, r: usize) -> Vec<F> {
        let mut out = vec![F::zero(); self.cols];
        for (c, v) in self.row_nonzero(r) {
            out[c] = v;
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix<F>) -> F {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        let mut max = F::zero();
        for r in 0..self.rows {
            let a = self.dense_row(r);
            let b = other.dense_row(r);
            for (x, y) in a.iter().zip(b.iter()) {
                let d = (*x - *y).abs();
                if d > max {
                    max = d;
                }
            }
        }
        max
    }
}
