//! Compressed sparse row matrices, built once from triplets and immutable
//! afterwards. Everything downstream assumes symmetry in the standard inner
//! product (the divergence-form weights are folded in by a diagonal
//! similarity before these matrices are formed).

use std::io::Write;

#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &mut [(u32, u32, f64)]) -> Csr {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[k] as usize == i {
                    d[i] += self.data[k];
                }
            }
        }
        d
    }

    /// A copy with `shift[i]` added to each diagonal entry.
    pub fn with_diagonal_added(&self, shift: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.n {
            let mut found = false;
            for k in out.indptr[i]..out.indptr[i + 1] {
                if out.indices[k] as usize == i {
                    out.data[k] += shift[i];
                    found = true;
                    break;
                }
            }
            assert!(found, "matrix row {i} has no stored diagonal");
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Csr {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    /// Largest row sum of absolute values; cheap upper bound on the
    /// spectral radius of a symmetric matrix.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.indptr[i]..self.indptr[i + 1]
            })
            .map(|r| r.map(|k| self.data[k].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Matrix Market coordinate `symmetric` output (lower triangle).
    pub fn write_matrix_market(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let nnz_lower = (0..self.n)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .filter(|&k| self.indices[k] as usize <= i)
                    .count()
            })
            .sum::<usize>();
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", self.n, self.n, nnz_lower)?;
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[k] as usize;
                if j <= i {
                    writeln!(out, "{} {} {:.16e}", i + 1, j + 1, self.data[k])?;
                }
            }
        }
        Ok(())
    }
}
