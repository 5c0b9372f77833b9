/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub max_abs_error: f64,
    /// `(analytic, numeric)` for every coordinate.
    pub pairs: Vec<(f64, f64)>,
}

impl GradCheckReport {
    /// Coordinates whose relative error exceeds `tol`.
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.pairs
            .iter()
            .enumerate()
            .filter(|(_, &(a, n))| relative_error(a, n) > tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether every coordinate satisfies `|a - n| <= rel * max(|a|, |n|) + abs`.
    pub fn within(&self, rel: f64, abs: f64) -> bool {
        self.pairs
            .iter()
            .all(|&(a, n)| (a - n).abs() <= rel * a.abs().max(n.abs()) + abs)
    }
}

/// Relative error `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Checks `f`, which returns a value and its gradient, against central
/// differences with step `eps` at every coordinate of `params`.
pub fn grad_check(
    f: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    params: &[f64],
    eps: f64,
) -> GradCheckReport {
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length");
    let mut x = params.to_vec();
    let mut pairs = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        x[i] = params[i] + eps;
        let plus = f(&x).0;
        x[i] = params[i] - eps;
        let minus = f(&x).0;
        x[i] = params[i];
        pairs.push((analytic[i], (plus - minus) / (2.0 * eps)));
    }
    let (mut max_rel_error, mut worst_index, mut max_abs_error) = (0.0, 0, 0.0f64);
    for (i, &(a, n)) in pairs.iter().enumerate() {
        let e = relative_error(a, n);
        if e > max_rel_error {
            max_rel_error = e;
            worst_index = i;
        }
        max_abs_error = max_abs_error.max((a - n).abs());
    }
    GradCheckReport {
        max_rel_error,
        worst_index,
        max_abs_error,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let f = |x: &[f64]| {
            let v = 3.0 * x[0] * x[0] + x[0] * x[1] - 2.0 * x[1] * x[1] + 5.0 * x[2];
            (v, vec![6.0 * x[0] + x[1], x[0] - 4.0 * x[1], 5.0])
        };
        let r = grad_check(&f, &[0.3, -1.2, 2.0], 1e-5);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
        assert!(r.violations(1e-8).is_empty());
    }

    #[test]
    fn detects_wrong_gradient() {
        let f = |x: &[f64]| (x[0] * x[0], vec![x[0]]);
        let r = grad_check(&f, &[1.0], 1e-5);
        assert!(r.max_rel_error > 0.4);
        assert_eq!(r.violations(1e-4), vec![0]);
        assert!(!r.within(1e-4, 1e-9));
    }
}
