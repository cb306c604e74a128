use crate::error::{check_len, Error, Result};
use crate::sparse::CsrMatrix;

/// (Symmetric) successive over-relaxation with the inverted diagonal cached.
#[derive(Debug, Clone)]
pub struct Sor {
    pub omega: f64,
    pub symmetric: bool,
    inv_diag: Vec<f64>,
}

impl Sor {
    pub fn new(a: &CsrMatrix, omega: f64, symmetric: bool) -> Result<Self> {
        check_len("SOR (square)", a.n_rows(), a.n_cols())?;
        let d = a.diagonal();
        if let Some(row) = d.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroDiagonal { what: "SOR", row });
        }
        Ok(Self {
            omega,
            symmetric,
            inv_diag: d.iter().map(|v| 1.0 / v).collect(),
        })
    }

    fn sweep_row(&self, a: &CsrMatrix, x: &mut [f64], r: &[f64], i: usize) {
        let (cols, vals) = a.row(i);
        let mut s = r[i];
        for (&j, &v) in cols.iter().zip(vals) {
            s -= v * x[j];
        }
        x[i] += self.omega * s * self.inv_diag[i];
    }

    pub fn forward(&self, a: &CsrMatrix, x: &mut [f64], r: &[f64]) {
        for i in 0..x.len() {
            self.sweep_row(a, x, r, i);
        }
    }

    pub fn backward(&self, a: &CsrMatrix, x: &mut [f64], r: &[f64]) {
        for i in (0..x.len()).rev() {
            self.sweep_row(a, x, r, i);
        }
    }

    /// One sweep: forward, or forward then backward when symmetric.
    pub fn sweep(&self, a: &CsrMatrix, x: &mut [f64], r: &[f64]) {
        self.forward(a, x, r);
        if self.symmetric {
            self.backward(a, x, r);
        }
    }
}

/// Runs `sweeps` (S)SOR iterations on `A x = r` starting from `x`.
pub fn sor_sweep(a: &CsrMatrix, x: &[f64], r: &[f64], omega: f64, symmetric: bool, sweeps: usize) -> Result<Vec<f64>> {
    check_len("SOR initial guess", a.n_rows(), x.len())?;
    check_len("SOR rhs", a.n_rows(), r.len())?;
    let s = Sor::new(a, omega, symmetric)?;
    let mut x = x.to_vec();
    for _ in 0..sweeps {
        s.sweep(a, &mut x, r);
    }
    Ok(x)
}
