//! Small dense helpers on plain slices. Dimensions here stay in the tens,
//! so everything is row-major `Vec<f64>` with no blocking.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// y += a * x
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

#[inline]
pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

#[inline]
pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// In-place Cholesky of a symmetric `n x n` matrix (lower factor stored in
/// the lower triangle). Returns `false` when a pivot is not safely positive.
pub fn cholesky(mat: &mut [f64], n: usize) -> bool {
    let scale = (0..n)
        .fold(0.0_f64, |m, i| m.max(mat[i * n + i].abs()))
        .max(1e-300);
    for j in 0..n {
        let mut d = mat[j * n + j];
        for k in 0..j {
            d -= mat[j * n + k] * mat[j * n + k];
        }
        if d <= 1e-14 * scale {
            return false;
        }
        let d = d.sqrt();
        mat[j * n + j] = d;
        for i in j + 1..n {
            let mut s = mat[i * n + j];
            for k in 0..j {
                s -= mat[i * n + k] * mat[j * n + k];
            }
            mat[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L L^T x = b` with the factor produced by [`cholesky`].
pub fn cholesky_solve(factor: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= factor[i * n + k] * b[k];
        }
        b[i] = s / factor[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= factor[k * n + i] * b[k];
        }
        b[i] = s / factor[i * n + i];
    }
}

/// Gaussian elimination with partial pivoting on a square system.
/// Returns `None` if the matrix is numerically singular.
pub fn solve_dense(mut mat: Vec<f64>, mut rhs: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let scale = mat.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| mat[a * n + col].abs().total_cmp(&mat[b * n + col].abs()))
            .unwrap();
        if mat[piv * n + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                mat.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        let d = mat[col * n + col];
        for r in col + 1..n {
            let f = mat[r * n + col] / d;
            if f != 0.0 {
                for k in col..n {
                    mat[r * n + k] -= f * mat[col * n + k];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for k in r + 1..n {
            s -= mat[r * n + k] * rhs[k];
        }
        rhs[r] = s / mat[r * n + r];
    }
    Some(rhs)
}
