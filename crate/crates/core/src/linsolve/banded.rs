use crate::vecops::{axpy, dot};

/// Cholesky factor of a symmetric positive definite band matrix, stored by
/// rows: row `i` holds `L[i, i-bw ..= i]` (entries left of column 0 are zero).
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    rows: Vec<f64>,
}

impl BandedCholesky {
    /// Band storage with all entries zero, to be filled through [`Self::set`].
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedCholesky { n, bw, rows: vec![0.0; n * (bw + 1)] }
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Sets the lower-triangle entry `(i, j)`, `j ≤ i`, `i − j ≤ bw`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let w = self.bw + 1;
        self.rows[i * w + self.bw - (i - j)] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let w = self.bw + 1;
        self.rows[i * w + self.bw - (i - j)] += v;
    }

    /// In-place factorization. Returns `false` if a pivot is not positive.
    pub fn factor(&mut self) -> bool {
        let w = self.bw + 1;
        let bw = self.bw;
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let (before, rest) = self.rows.split_at_mut(i * w);
                let row_i = &mut rest[..w];
                let li = &row_i[bw - (i - k0)..bw - (i - j)];
                let s = if j == i {
                    row_i[bw] - dot(li, li)
                } else {
                    let row_j = &before[j * w..(j + 1) * w];
                    let lj = &row_j[bw - (j - k0)..bw];
                    row_i[bw - (i - j)] - dot(li, lj)
                };
                if j == i {
                    if !(s > 0.0) {
                        return false;
                    }
                    row_i[bw] = s.sqrt();
                } else {
                    let d = before[j * w + bw];
                    row_i[bw - (i - j)] = s / d;
                }
            }
        }
        true
    }

    /// Solves `L Lᵀ x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        let bw = self.bw;
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            let row = &self.rows[i * w..(i + 1) * w];
            let s = dot(&row[bw - (i - j0)..bw], &x[j0..i]);
            x[i] = (x[i] - s) / row[bw];
        }
        for i in (0..self.n).rev() {
            let j0 = i.saturating_sub(bw);
            let row = &self.rows[i * w..(i + 1) * w];
            x[i] /= row[bw];
            let xi = x[i];
            axpy(-xi, &row[bw - (i - j0)..bw], &mut x[j0..i]);
        }
    }
}
