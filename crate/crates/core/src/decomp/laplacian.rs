//! Binary proximity graphs over sensor positions.

use alloc::vec::Vec;

use crate::linalg::Mat;

/// `Adj_ij = 1` when `i ≠ j` and `‖p_i − p_j‖ < eps`; `L = D − Adj`.
pub fn build_graph_laplacian(positions: &[Vec<f64>], eps: f64) -> (Mat, Mat) {
    let n = positions.len();
    let adj = Mat::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let d2: f64 = positions[i].iter().zip(&positions[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        if libm::sqrt(d2) < eps { 1.0 } else { 0.0 }
    });
    let mut l = -adj.clone();
    for i in 0..n {
        l[(i, i)] = adj.row(i).sum();
    }
    (l, adj)
}
