//! Block-sparse symmetric normal equations with 3×3 blocks.

use nalgebra::{DMatrix, Matrix3};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

pub(crate) struct BlockSystem {
    n_blocks: usize,
    coo: CooMatrix<f64>,
    rhs: DMatrix<f64>,
}

pub(crate) struct Solution {
    pub x: DMatrix<f64>,
    /// `‖H x − b‖_F / max(‖b‖_F, tiny)`.
    pub residual: f64,
    /// Cholesky failed and a least-norm SVD solution was used.
    pub rank_deficient: bool,
}

impl BlockSystem {
    pub fn new(n_blocks: usize, rhs_cols: usize) -> Self {
        let n = 3 * n_blocks;
        Self {
            n_blocks,
            coo: CooMatrix::new(n, n),
            rhs: DMatrix::zeros(n, rhs_cols),
        }
    }

    pub fn add_block(&mut self, bi: usize, bj: usize, m: &Matrix3<f64>) {
        for r in 0..3 {
            for c in 0..3 {
                let v = m[(r, c)];
                if v != 0.0 {
                    self.coo.push(3 * bi + r, 3 * bj + c, v);
                }
            }
        }
    }

    pub fn add_rhs(&mut self, bi: usize, m: &DMatrix<f64>) {
        let mut view = self.rhs.view_mut((3 * bi, 0), (3, m.ncols()));
        view += m;
    }

    pub fn solve(self) -> Solution {
        let n = 3 * self.n_blocks;
        if n == 0 {
            return Solution {
                x: DMatrix::zeros(0, self.rhs.ncols()),
                residual: 0.0,
                rank_deficient: false,
            };
        }
        // duplicates are summed by the conversion
        let h = CscMatrix::from(&self.coo);
        let b = self.rhs;
        let (x, rank_deficient) = match CscCholesky::factor(&h) {
            Ok(chol) => {
                let x = chol.solve(&b);
                if x.iter().all(|v| v.is_finite()) {
                    (x, false)
                } else {
                    (least_norm(&h, &b), true)
                }
            }
            Err(_) => (least_norm(&h, &b), true),
        };
        let hx = &h * &x;
        let b_norm = b.norm();
        let residual = (hx - &b).norm() / b_norm.max(f64::MIN_POSITIVE);
        Solution {
            x,
            residual: if b_norm == 0.0 { 0.0 } else { residual },
            rank_deficient,
        }
    }
}

fn least_norm(h: &CscMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut dense = DMatrix::zeros(h.nrows(), h.ncols());
    for (r, c, v) in h.triplet_iter() {
        dense[(r, c)] += *v;
    }
    let svd = dense.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    svd.solve(b, eps).expect("svd with u and v_t")
}
