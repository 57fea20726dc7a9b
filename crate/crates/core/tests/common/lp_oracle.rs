//! Simplex reference for `min ‖s‖₁ s.t. A·s = z`, via the split `s = u − w`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

pub fn l1_equality_lp(a: &DMatrix<f64>, z: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let u: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let w: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for i in 0..m {
        let row: Vec<_> = (0..n).flat_map(|j| [(u[j], a[(i, j)]), (w[j], -a[(i, j)])]).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, z[i]);
    }
    let sol = lp.solve().ok()?;
    Some(DVector::from_fn(n, |j, _| sol[u[j]] - sol[w[j]]))
}
