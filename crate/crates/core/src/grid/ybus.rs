use super::GridCase;
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Complex bus admittance matrix `Y = G + jB`, dense row-major.
///
/// The structural pattern (diagonal plus every branch-connected pair) is
/// tracked separately from the values so that sparse views stay faithful to
/// the topology even if stamped contributions happen to cancel.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    entries: Vec<Complex64>,
    pattern: Vec<bool>,
}

impl AdmittanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![Complex64::new(0.0, 0.0); n * n],
            pattern: vec![false; n * n],
        }
    }

    /// Builds a matrix from dense row-major values; every nonzero entry is
    /// structural.
    pub fn from_dense(n: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), n * n);
        let pattern = entries.iter().map(|v| v.norm_sqr() != 0.0).collect();
        Self {
            n,
            entries,
            pattern,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.n + j]
    }

    pub fn is_structural(&self, i: usize, j: usize) -> bool {
        self.pattern[i * self.n + j]
    }

    fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let k = i * self.n + j;
        self.entries[k] += v;
        self.pattern[k] = true;
    }

    /// Elementwise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            n: self.n,
            entries: self.entries.iter().map(|v| v.conj()).collect(),
            pattern: self.pattern.clone(),
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j];
                out.pattern[j * n + i] = self.pattern[i * n + j];
            }
        }
        out
    }

    /// Structural entries of each row as `(column, value)` pairs.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, Complex64)>> {
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| self.is_structural(i, j))
                    .map(|j| (j, self.get(i, j)))
                    .collect()
            })
            .collect()
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        self.entries
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Assembles `Y` by branch stamping.
///
/// For a branch with series admittance `y = 1/(r + jx)`, charging `b` and
/// tap `t` on the from side:
/// `Y_ff += (y + jb/2)/t²`, `Y_tt += y + jb/2`, `Y_ft = Y_tf -= y/t`.
/// Bus shunts `g + jb` are added to the diagonal.
pub fn build_ybus(case: &GridCase) -> Result<AdmittanceMatrix> {
    let n = case.n_buses();
    let mut y = AdmittanceMatrix::zeros(n);
    for br in &case.branches {
        if br.r == 0.0 && br.x == 0.0 {
            return Err(Error::SingularBranch {
                from: br.from_bus,
                to: br.to_bus,
            });
        }
        let (f, t) = (br.from_bus - 1, br.to_bus - 1);
        let ys = Complex64::new(br.r, br.x).inv();
        let half_charging = Complex64::new(0.0, br.b_charging / 2.0);
        let tap = br.tap;
        y.add(f, f, (ys + half_charging) / (tap * tap));
        y.add(t, t, ys + half_charging);
        y.add(f, t, -ys / tap);
        y.add(t, f, -ys / tap);
    }
    for (i, bus) in case.buses.iter().enumerate() {
        y.add(i, i, Complex64::new(bus.shunt_g, bus.shunt_b));
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Bus, BusKind};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_bus_lossless_line() {
        let case = GridCase {
            name: "two".into(),
            base_mva: 100.0,
            buses: vec![Bus::new(1, BusKind::Slack), Bus::new(2, BusKind::PQ)],
            branches: vec![Branch::line(1, 2, 0.0, 0.1)],
        };
        let y = build_ybus(&case).unwrap();
        let expect = [c(0.0, -10.0), c(0.0, 10.0), c(0.0, 10.0), c(0.0, -10.0)];
        for (k, e) in expect.iter().enumerate() {
            let v = y.get(k / 2, k % 2);
            assert!((v - e).norm() < 1e-12, "entry {k}: {v}");
        }
    }

    #[test]
    fn single_bus_without_branches_is_zero() {
        let case = GridCase {
            name: "one".into(),
            base_mva: 100.0,
            buses: vec![Bus::new(1, BusKind::Slack)],
            branches: vec![],
        };
        let y = build_ybus(&case).unwrap();
        assert_eq!(y.dim(), 1);
        assert_eq!(y.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn zero_impedance_branch_is_singular() {
        let case = GridCase {
            name: "bad".into(),
            base_mva: 100.0,
            buses: vec![Bus::new(1, BusKind::Slack), Bus::new(2, BusKind::PQ)],
            branches: vec![Branch::line(1, 2, 0.0, 0.0)],
        };
        assert!(matches!(
            build_ybus(&case),
            Err(Error::SingularBranch { from: 1, to: 2 })
        ));
    }

    #[test]
    fn tap_makes_diagonal_asymmetric() {
        let mut case = GridCase {
            name: "tap".into(),
            base_mva: 100.0,
            buses: vec![Bus::new(1, BusKind::Slack), Bus::new(2, BusKind::PQ)],
            branches: vec![Branch::line(1, 2, 0.0, 0.1)],
        };
        case.branches[0].tap = 0.5;
        let y = build_ybus(&case).unwrap();
        // y = -10j, Y_ff = y / 0.25, Y_ft = -y / 0.5
        assert!((y.get(0, 0) - c(0.0, -40.0)).norm() < 1e-12);
        assert!((y.get(1, 1) - c(0.0, -10.0)).norm() < 1e-12);
        assert!((y.get(0, 1) - c(0.0, 20.0)).norm() < 1e-12);
        assert_eq!(y.get(0, 1), y.get(1, 0));
    }
}
