//! Small dense eigen helpers: cyclic Jacobi for symmetric matrices up to
//! 8x8, and real eigendirections of 2x2 matrices.

use crate::affine::{Matrix2, Vec2};

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
/// Returns (eigenvalues, eigenvectors as rows), sorted ascending.
pub fn jacobi_eigen_sym(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = m
        .iter()
        .flat_map(|row| row.iter().map(|x| x.abs()))
        .fold(0.0, f64::max)
        .max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[p][q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vpk = v[p][k];
                    let vqk = v[q][k];
                    v[p][k] = c * vpk - s * vqk;
                    v[q][k] = s * vpk + c * vqk;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&i| v[i].clone()).collect();
    (values, vectors)
}

/// Real eigenvalue/unit-eigenvector pairs of a 2x2 matrix (0, 1 or 2 of
/// them; a repeated eigenvalue yields a single direction unless the matrix
/// is scalar, in which case the two axes are returned).
pub fn real_eigendirections(m: &Matrix2) -> Vec<(f64, Vec2)> {
    let tr = m.a11 + m.a22;
    let det = m.det();
    let scale = m.frobenius().max(1e-300);
    let disc = tr * tr - 4.0 * det;
    if disc < -1e-12 * scale * scale {
        return Vec::new();
    }
    let sq = disc.max(0.0).sqrt();
    let lams = if sq <= 1e-12 * scale {
        vec![0.5 * tr]
    } else {
        vec![0.5 * (tr + sq), 0.5 * (tr - sq)]
    };
    let mut out = Vec::new();
    for lam in lams {
        // Kernel of (M - lam I): rows (a11-lam, a12) and (a21, a22-lam).
        let r1 = Vec2::new(m.a11 - lam, m.a12);
        let r2 = Vec2::new(m.a21, m.a22 - lam);
        let v = if r1.norm_sq() >= r2.norm_sq() {
            Vec2::new(-r1.y, r1.x)
        } else {
            Vec2::new(-r2.y, r2.x)
        };
        if v.norm_sq() <= 1e-24 * scale * scale {
            // Scalar matrix: every direction is an eigendirection.
            out.push((lam, Vec2::new(1.0, 0.0)));
            out.push((lam, Vec2::new(0.0, 1.0)));
        } else {
            out.push((lam, v.normalized()));
        }
    }
    out
}
