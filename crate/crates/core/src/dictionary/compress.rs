use nalgebra::DMatrix;
use ndarray::Array2;

use super::EmcDictionary;
use crate::error::{invalid, Result};

/// Low-rank temporal basis for a dictionary plus the projected coefficients.
#[derive(Debug, Clone)]
pub struct CompressedDictionary {
    /// Orthonormal columns, echoes × rank.
    pub basis: Array2<f64>,
    /// Rows × rank projections of every dictionary curve.
    pub coefficients: Array2<f64>,
    /// Singular values of the curve matrix, descending, all of them.
    pub singular_values: Vec<f64>,
}

/// Truncated SVD of the curve matrix, computed through the eigen
/// decomposition of its echoes × echoes Gram matrix.
pub fn compress_dictionary(dict: &EmcDictionary, rank: usize) -> Result<CompressedDictionary> {
    let n_echo = dict.n_echoes();
    if rank == 0 || rank > n_echo {
        return Err(invalid(format!("rank must lie in 1..={n_echo}, got {rank}")));
    }
    let c = dict.curves();
    let gram = c.t().dot(c);
    let gram = DMatrix::from_fn(n_echo, n_echo, |i, j| gram[(i, j)]);
    let eig = gram.symmetric_eigen();

    let mut order: Vec<usize> = (0..n_echo).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let basis = Array2::from_shape_fn((n_echo, rank), |(e, k)| eig.eigenvectors[(e, order[k])]);
    let coefficients = c.dot(&basis);
    let singular_values = order.iter().map(|&k| eig.eigenvalues[k].max(0.0).sqrt()).collect();
    Ok(CompressedDictionary { basis, coefficients, singular_values })
}

impl CompressedDictionary {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn reconstruct_row(&self, r: usize) -> Vec<f64> {
        self.basis.dot(&self.coefficients.row(r)).to_vec()
    }

    /// Project an arbitrary curve onto the basis.
    pub fn project(&self, curve: &[f64]) -> Vec<f64> {
        self.basis.t().dot(&ndarray::ArrayView1::from(curve)).to_vec()
    }

    /// L2 distance between every row and its rank-limited reconstruction.
    pub fn residuals(&self, dict: &EmcDictionary) -> Vec<f64> {
        (0..dict.n_rows())
            .map(|r| {
                self.reconstruct_row(r)
                    .iter()
                    .zip(dict.row(r))
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_dictionary, DictionaryGrid};
    use crate::emc_sim::SequenceProtocol;

    fn small() -> EmcDictionary {
        let grid = DictionaryGrid::new(
            (20..=200).step_by(10).map(f64::from).collect(),
            vec![0.7, 0.8, 0.9, 1.0],
        )
        .unwrap();
        build_dictionary(grid, SequenceProtocol::default()).unwrap()
    }

    #[test]
    fn full_rank_is_identity() {
        let d = small();
        let c = compress_dictionary(&d, d.n_echoes()).unwrap();
        assert!(c.residuals(&d).iter().all(|r| *r <= 1e-9));
    }

    #[test]
    fn basis_is_orthonormal() {
        let d = small();
        let c = compress_dictionary(&d, 4).unwrap();
        let g = c.basis.t().dot(&c.basis);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_entry_rank_one_is_exact() {
        let grid = DictionaryGrid::new(vec![100.0], vec![1.0]).unwrap();
        let d = build_dictionary(grid, SequenceProtocol::default()).unwrap();
        let c = compress_dictionary(&d, 1).unwrap();
        assert!(c.residuals(&d)[0] < 1e-12);
    }

    #[test]
    fn residual_shrinks_with_rank() {
        let d = small();
        let worst = |rank| {
            compress_dictionary(&d, rank)
                .unwrap()
                .residuals(&d)
                .into_iter()
                .fold(0.0, f64::max)
        };
        let r1 = worst(1);
        let r3 = worst(3);
        assert!(r3 < r1);
    }

    #[test]
    fn rank_bounds() {
        let d = small();
        assert!(compress_dictionary(&d, 0).is_err());
        assert!(compress_dictionary(&d, 11).is_err());
    }
}
