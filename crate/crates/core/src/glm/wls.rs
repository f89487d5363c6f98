use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Hat values are capped here so that 1 - h never vanishes downstream.
pub const HAT_CAP: f64 = 1.0 - 1e-8;

const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub coefficients: DVector<f64>,
    /// Diagonal of W^1/2 X (X'WX)^-1 X' W^1/2, capped at [`HAT_CAP`].
    pub hat: DVector<f64>,
    /// (X'WX)^-1.
    pub cov_unscaled: DMatrix<f64>,
}

/// Minimises sum w_i (z_i - x_i'b)^2 through a Householder QR of W^1/2 X.
///
/// A column whose R diagonal falls below 1e-10 times the largest one is
/// reported as [`Error::Singular`] with its index; the caller supplies names.
pub fn wls_solve(x: &DMatrix<f64>, z: &DVector<f64>, w: &DVector<f64>) -> Result<WlsSolution> {
    let (n, p) = x.shape();
    if z.len() != n || w.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but z has {} and w has {}",
            z.len(),
            w.len()
        )));
    }
    if p == 0 {
        return Err(Error::Dimension("design has no columns".into()));
    }
    if n < p {
        return Err(Error::Dimension(format!("{n} rows cannot support {p} columns")));
    }
    if let Some(i) = w.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("weight {i} is {}", w[i])));
    }

    let sw = w.map(f64::sqrt);
    let mut a = x.clone();
    for (mut row, s) in a.row_iter_mut().zip(sw.iter()) {
        row *= *s;
    }
    let zw = z.component_mul(&sw);

    let col_norms: Vec<f64> = (0..p).map(|j| a.column(j).norm()).collect();
    let qr = a.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|j| r[(j, j)].abs()).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max);
    // the diagonal can only shrink when a column is dependent on earlier ones,
    // so the first small pivot names the offending column
    for (j, d) in diag.iter().enumerate() {
        let col_norm = col_norms[j];
        if !(*d > PIVOT_TOL * scale) || !(*d > PIVOT_TOL * col_norm) {
            return Err(Error::Singular { index: j, name: format!("column {j}") });
        }
    }

    let q = qr.q();
    let qtz = q.transpose() * &zw;
    let coefficients = r
        .solve_upper_triangular(&qtz)
        .ok_or(Error::Singular { index: p - 1, name: format!("column {}", p - 1) })?;

    let hat = DVector::from_iterator(n, q.row_iter().map(|row| row.norm_squared().min(HAT_CAP)));

    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::Singular { index: p - 1, name: format!("column {}", p - 1) })?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    Ok(WlsSolution { coefficients, hat, cov_unscaled })
}
