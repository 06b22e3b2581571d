//! Small dense least squares for the regression starts.

use crate::scalar::Real;

/// Solution of `min ‖X β − y‖²`.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares<T> {
    pub coef: Vec<T>,
    /// `(XᵀX)⁻¹`, row-major `p × p`.
    pub xtx_inv: Vec<T>,
}

/// Householder QR on column-equilibrated `rows` (each of length `p`).
///
/// Returns `None` when the design is rank deficient.
pub(crate) fn least_squares<T: Real>(rows: &[Vec<T>], y: &[T]) -> Option<LeastSquares<T>> {
    let n = rows.len();
    let p = rows.first()?.len();
    if n < p || p == 0 || y.len() != n {
        return None;
    }
    // column-major copy, scaled to unit norm
    let mut a: Vec<Vec<T>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut scale = vec![T::one(); p];
    for (col, s) in a.iter_mut().zip(scale.iter_mut()) {
        let norm = col.iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return None;
        }
        *s = norm;
        col.iter_mut().for_each(|v| *v = *v / norm);
    }
    let mut b = y.to_vec();
    for k in 0..p {
        let norm = a[k][k..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm > T::epsilon() * T::lit(64.0)) {
            return None;
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|&x| x * x).sum::<T>();
        if vnorm2 > T::zero() {
            for col in a.iter_mut().skip(k) {
                let dot = v.iter().zip(&col[k..]).map(|(&vi, &ci)| vi * ci).sum::<T>();
                let f = T::lit(2.0) * dot / vnorm2;
                col[k..].iter_mut().zip(&v).for_each(|(c, &vi)| *c = *c - f * vi);
            }
            let dot = v.iter().zip(&b[k..]).map(|(&vi, &bi)| vi * bi).sum::<T>();
            let f = T::lit(2.0) * dot / vnorm2;
            b[k..].iter_mut().zip(&v).for_each(|(c, &vi)| *c = *c - f * vi);
        }
    }
    // back substitution R z = Qᵀy
    let r = |i: usize, j: usize| a[j][i];
    let mut z = vec![T::zero(); p];
    for i in (0..p).rev() {
        let s = (i + 1..p).fold(b[i], |acc, j| acc - r(i, j) * z[j]);
        z[i] = s / r(i, i);
    }
    // R⁻¹ (upper triangular), then (RᵀR)⁻¹ = R⁻¹R⁻ᵀ
    let mut rinv = vec![T::zero(); p * p];
    for j in 0..p {
        rinv[j * p + j] = T::one() / r(j, j);
        for i in (0..j).rev() {
            let s = (i + 1..=j).fold(T::zero(), |acc, k| acc + r(i, k) * rinv[k * p + j]);
            rinv[i * p + j] = -s / r(i, i);
        }
    }
    let mut xtx_inv = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..p {
            let s = (0..p).fold(T::zero(), |acc, k| acc + rinv[i * p + k] * rinv[j * p + k]);
            xtx_inv[i * p + j] = s / (scale[i] * scale[j]);
        }
    }
    let coef = z.iter().zip(&scale).map(|(&zi, &si)| zi / si).collect();
    Some(LeastSquares { coef, xtx_inv })
}

/// Lower Cholesky factor of a symmetric positive definite `p × p` matrix.
pub(crate) fn cholesky<T: Real>(m: &[T], p: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let s = (0..j).fold(m[i * p + j], |acc, k| acc - l[i * p + k] * l[j * p + k]);
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_and_covariance() {
        // y = 1 + 2x on x = 0..4
        let rows: Vec<Vec<f64>> = (0..5).map(|x| vec![1.0, x as f64]).collect();
        let y: Vec<f64> = (0..5).map(|x| 1.0 + 2.0 * x as f64).collect();
        let fit = least_squares(&rows, &y).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        // XᵀX = [[5, 10], [10, 30]], inverse = [[0.6, -0.2], [-0.2, 0.1]]
        let expect = [0.6, -0.2, -0.2, 0.1];
        for (a, b) in fit.xtx_inv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn badly_scaled_monomials() {
        let xs: Vec<f64> = (0..50).map(|i| 95.0 + 0.2 * i as f64).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, x * x, x * x * x]).collect();
        let truth = [0.3, -2e-3, 4e-6];
        let y: Vec<f64> = xs.iter().map(|&x| truth[0] * x + truth[1] * x * x + truth[2] * x * x * x).collect();
        let fit = least_squares(&rows, &y).unwrap();
        for (c, t) in fit.coef.iter().zip(truth) {
            assert!((c - t).abs() < 1e-6 * t.abs().max(1e-3), "{c} vs {t}");
        }
    }

    #[test]
    fn rank_deficient() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(least_squares(&rows, &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn cholesky_roundtrip() {
        let m: [f64; 4] = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&m, 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-15);
        assert!((l[2] - 1.0).abs() < 1e-15);
        assert!((l[3] - 2f64.sqrt()).abs() < 1e-15);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
