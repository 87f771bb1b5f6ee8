use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-‖x - x'‖² / σ²)`.
    Gaussian {
        sigma: f64,
    },
    Linear,
}

impl KernelSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::arg(format!("kernel bandwidth must be positive, got {sigma}")));
        }
        Ok(KernelSpec::Gaussian { sigma })
    }

    pub fn eval(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        match *self {
            KernelSpec::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (sigma * sigma)).exp()
            }
            KernelSpec::Linear => x.iter().zip(y.iter()).map(|(a, b)| a * b).sum(),
        }
    }
}

/// `K[i][j] = k(xs_i, ys_j)`.
pub fn gram(kernel: &KernelSpec, xs: ArrayView2<f64>, ys: ArrayView2<f64>) -> Array2<f64> {
    let (n, m) = (xs.nrows(), ys.nrows());
    let mut k = Array2::<f64>::zeros((n, m));
    k.axis_iter_mut(Axis(0)).into_par_iter().enumerate().for_each(|(i, mut row)| {
        let xi = xs.row(i);
        for j in 0..m {
            row[j] = kernel.eval(xi, ys.row(j));
        }
    });
    k
}
