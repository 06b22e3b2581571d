//! Derivative-free Nelder-Mead minimisation.

use crate::scalar::Real;

/// Stopping rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Converged once every vertex lies within this distance (max-norm) of the best.
    pub x_tol: f64,
    /// ...and the objective spread is below `f_tol·(1 + |f_best|)`.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { x_tol: 1e-10, f_tol: 1e-14, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0` with an initial simplex of per-coordinate `steps`.
///
/// Uses dimension-adaptive coefficients (Gao & Han, 2012). Non-finite
/// objective values are treated as `+∞`.
pub fn nelder_mead<T, F>(mut f: F, x0: &[T], steps: &[T], opts: &NelderMeadOptions) -> Minimum<T>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    assert!(n >= 1, "at least one coordinate");
    assert_eq!(steps.len(), n, "one step per coordinate");
    let nf = T::from_count(n.max(1));
    let two = T::lit(2.0);
    let (rho, chi, gamma, sigma) = if n >= 2 {
        (T::one(), T::one() + two / nf, T::lit(0.75) - T::one() / (two * nf), T::one() - T::one() / nf)
    } else {
        (T::one(), two, T::lit(0.5), T::lit(0.5))
    };

    let mut evals = 0usize;
    let mut eval = |x: &[T]| {
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::infinity()
        }
    };

    let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = v[i] + steps[i];
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|v| eval(v)).collect();

    let x_tol = T::lit(opts.x_tol);
    let f_tol = T::lit(opts.f_tol);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(&a, &b)| (a - b).abs()))
            .fold(T::zero(), T::max);
        let f_spread = (values[n] - best).abs();
        if best.is_finite() && x_spread <= x_tol && f_spread <= f_tol * (T::one() + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<T> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<T>() / nf).collect();
        let along = |t: T| -> Vec<T> { centroid.iter().zip(&simplex[n]).map(|(&c, &w)| c + t * (c - w)).collect() };

        let xr = along(rho);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(rho * chi);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < values[n] {
            let xc = along(rho * gamma);
            let fc = eval(&xc);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc);
            let ok = fc < values[n];
            (xc, fc, ok)
        };
        if accept {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let x_best = simplex[0].clone();
        for i in 1..=n {
            let shrunk: Vec<T> = x_best.iter().zip(&simplex[i]).map(|(&b, &v)| b + sigma * (v - b)).collect();
            values[i] = eval(&shrunk);
            simplex[i] = shrunk;
        }
    }
    let (ib, _) = values
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    Minimum { x: simplex[ib].clone(), value: values[ib], iterations, evaluations: evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
    }

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2) + 0.5 * (x[2] - 0.25).powi(2);
        let m = nelder_mead(f, &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &NelderMeadOptions::default());
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-8);
        assert!((m.x[1] + 1.0).abs() < 1e-8);
        assert!((m.x[2] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock_2d() {
        let opts = NelderMeadOptions { max_iter: 5000, ..Default::default() };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &opts);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-7 && (m.x[1] - 1.0).abs() < 1e-7, "{:?}", m.x);
    }

    #[test]
    fn one_dimensional() {
        let m = nelder_mead(|x: &[f64]| (x[0] - 2.0).powi(2), &[10.0], &[1.0], &NelderMeadOptions::default());
        assert!((m.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infinite_region_avoided() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) + x[1] * x[1] };
        let m = nelder_mead(f, &[0.1, 0.3], &[0.2, 0.2], &NelderMeadOptions::default());
        assert!((m.x[0] - 0.5).abs() < 1e-8 && m.x[1].abs() < 1e-8);
    }

    #[test]
    fn iteration_cap_reported() {
        let opts = NelderMeadOptions { max_iter: 3, ..Default::default() };
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], &[0.5, 0.5], &opts);
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
    }
}
