//! Dense LU factorisation with partial pivoting.
//!
//! Newton steps on the 118-bus system produce Jacobians of a few hundred rows,
//! so a dense row-major factorisation is sufficient.

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// In-place LU factors `P A = L U` with unit lower-triangular `L`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: DenseMatrix,
    pivots: Vec<usize>,
}

/// Relative pivot threshold below which the matrix is treated as singular.
const SINGULAR_RTOL: f64 = 1e-13;

impl LuFactors {
    /// Factorises `a`; returns `None` when a pivot vanishes relative to the
    /// largest entry of the matrix.
    pub fn factor(mut a: DenseMatrix) -> Option<Self> {
        let n = a.n;
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if n > 0 && scale == 0.0 {
            return None;
        }
        let mut pivots = vec![0; n];
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, a.get(r, k).abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= SINGULAR_RTOL * scale {
                return None;
            }
            pivots[k] = p;
            if p != k {
                for c in 0..n {
                    a.data.swap(k * n + c, p * n + c);
                }
            }
            let pivot = a.get(k, k);
            for r in (k + 1)..n {
                let factor = a.get(r, k) / pivot;
                a.set(r, k, factor);
                if factor != 0.0 {
                    let (upper, lower) = a.data.split_at_mut(r * n);
                    let src = &upper[k * n + k + 1..k * n + n];
                    let dst = &mut lower[k + 1..n];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= factor * s;
                    }
                }
            }
        }
        Some(Self { lu: a, pivots })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
        }
        for r in 0..n {
            let s: f64 = (0..r).map(|c| self.lu.get(r, c) * x[c]).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let s: f64 = ((r + 1)..n).map(|c| self.lu.get(r, c) * x[c]).sum();
            x[r] = (x[r] - s) / self.lu.get(r, r);
        }
        x
    }
}
