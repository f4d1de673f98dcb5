//! Dense LU factorization with partial pivoting.
//!
//! The matrices handled here are `I - A` for economies of at most a few
//! hundred industries, so a plain row-major Doolittle factorization is enough.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Pivots smaller than this fraction of the largest entry are treated as zero.
const SINGULAR_RTOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct Lu {
    /// Packed factors: strict lower part holds L (unit diagonal), upper part U.
    factors: Array2<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor a square matrix. Returns `None` if it is numerically singular.
    pub fn factor(m: ArrayView2<'_, f64>) -> Option<Lu> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "LU needs a square matrix");
        let mut a = m.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if n > 0 && scale == 0.0 {
            return None;
        }
        let threshold = SINGULAR_RTOL * scale;

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[[i, k]].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if !(pivot > threshold) {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let akk = a[[k, k]];
            for i in (k + 1)..n {
                let factor = a[[i, k]] / akk;
                a[[i, k]] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        a[[i, j]] -= factor * a[[k, j]];
                    }
                }
            }
        }
        Some(Lu { factors: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut y: Array1<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = y[i];
            for j in 0..i {
                acc -= self.factors[[i, j]] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.factors[[i, j]] * y[j];
            }
            y[i] = acc / self.factors[[i, i]];
        }
        y
    }

    pub fn inverse(&self) -> Array2<f64> {
        let n = self.dim();
        let mut inv = Array2::zeros((n, n));
        let mut e = Array1::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(e.view());
            inv.column_mut(j).assign(&col);
        }
        inv
    }
}

/// `I - m` for a square matrix.
pub fn identity_minus(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = m.nrows();
    let mut out = m.mapv(|v| -v);
    for i in 0..n {
        out[[i, i]] += 1.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solves_with_pivoting() {
        let m = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let lu = Lu::factor(m.view()).unwrap();
        let b = array![3.0, 2.0, 4.0];
        let x = lu.solve(b.view());
        let back = m.dot(&x);
        for i in 0..3 {
            assert_abs_diff_eq!(back[i], b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_of_pair2_operator() {
        let ima = array![[1.0, -0.25], [-0.3, 1.0]];
        let inv = Lu::factor(ima.view()).unwrap().inverse();
        let expected = array![[40.0, 10.0], [12.0, 40.0]] / 37.0;
        for (a, b) in inv.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let m = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(Lu::factor(m.view()).is_none());
        assert!(Lu::factor(Array2::<f64>::zeros((2, 2)).view()).is_none());
    }

    #[test]
    fn empty_matrix() {
        let lu = Lu::factor(Array2::<f64>::zeros((0, 0)).view()).unwrap();
        assert_eq!(lu.solve(Array1::zeros(0).view()).len(), 0);
    }
}
