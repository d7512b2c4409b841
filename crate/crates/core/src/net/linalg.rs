use ndarray::{Array1, ArrayView2};

const TOL: f64 = 1e-9;
const MAX_ITER: usize = 200;

/// Largest singular value by power iteration on `WᵀW`, started from the
/// normalised all-ones vector.
pub fn spectral_norm(w: ArrayView2<'_, f64>) -> f64 {
    let cols = w.ncols();
    if cols == 0 || w.nrows() == 0 || w.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let ones = Array1::from_elem(cols, 1.0 / (cols as f64).sqrt());
    let starts = std::iter::once(ones).chain((0..cols).map(|k| {
        let mut e = Array1::zeros(cols);
        e[k] = 1.0;
        e
    }));
    for start in starts {
        if let Some(sigma) = iterate(w, start) {
            return sigma;
        }
    }
    unreachable!("a nonzero matrix has a nonzero column")
}

/// `None` when the start vector lies in the null space.
fn iterate(w: ArrayView2<'_, f64>, mut v: Array1<f64>) -> Option<f64> {
    let mut sigma = 0.0;
    for _ in 0..MAX_ITER {
        let u = w.dot(&v);
        let next = u.dot(&u).sqrt();
        if next == 0.0 {
            return if sigma > 0.0 { Some(sigma) } else { None };
        }
        let g = w.t().dot(&u);
        let gn = g.dot(&g).sqrt();
        v = g / gn;
        let done = (next - sigma).abs() <= TOL * next;
        sigma = next;
        if done {
            break;
        }
    }
    Some(sigma.max(w.dot(&v).dot(&w.dot(&v)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::{array, Array2};
    use rand_distr::{Distribution, StandardNormal};

    fn svd_oracle(w: &Array2<f64>) -> f64 {
        let m = nalgebra::DMatrix::from_fn(w.nrows(), w.ncols(), |i, j| w[[i, j]]);
        m.singular_values().max()
    }

    #[test]
    fn small_examples() {
        assert!((spectral_norm(array![[3.0, 0.0], [0.0, 1.0]].view()) - 3.0).abs() < 1e-12);
        assert!((spectral_norm(array![[0.0, 2.0], [0.0, 0.0]].view()) - 2.0).abs() < 1e-12);
        assert_eq!(spectral_norm(Array2::<f64>::zeros((3, 2)).view()), 0.0);
    }

    #[test]
    fn ones_in_null_space_falls_back() {
        let w = array![[1.0, -1.0], [2.0, -2.0]];
        assert!((spectral_norm(w.view()) - svd_oracle(&w)).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_svd() {
        let mut rng = seeded(5);
        for _ in 0..20 {
            let w = Array2::from_shape_fn((5, 4), |_| StandardNormal.sample(&mut rng));
            let est = spectral_norm(w.view());
            assert!((est - svd_oracle(&w)).abs() < 1e-7, "{est} vs {}", svd_oracle(&w));
        }
        let w = Array2::from_shape_fn((64, 20), |_| StandardNormal.sample(&mut rng));
        assert!((spectral_norm(w.view()) - svd_oracle(&w)).abs() < 1e-7);
    }
}
