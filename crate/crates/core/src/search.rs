//! One-dimensional bracketing minimization.

const INV_PHI: f64 = 0.618_033_988_749_894_9; // 1/phi

/// Golden-section search for a minimum of `f` on `[a, b]`.
///
/// Stops when the bracket is narrower than `tol` or after `max_iter`
/// iterations. Returns `(x_min, f_min, evaluations)`.
pub fn golden_section_min<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64, usize)
where
    F: FnMut(f64) -> f64,
{
    if a > b {
        std::mem::swap(&mut a, &mut b);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        evals += 1;
    }
    if fc <= fd {
        (c, fc, evals)
    } else {
        (d, fd, evals)
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l, h) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (l + (h - l) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, fx, _) = golden_section_min(|x| (x - 0.3).powi(2) + 2.0, -1.0, 2.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-14);
    }

    #[test]
    fn minimum_at_edge() {
        let (x, _, _) = golden_section_min(|x| x, 1.0, 3.0, 1e-9, 200);
        assert!((x - 1.0).abs() < 1e-8);
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(5.0, 500.0, 12);
        assert_eq!(v.len(), 12);
        assert_eq!(v[0], 5.0);
        assert_eq!(v[11], 500.0);
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!((v[1] / v[0] - v[2] / v[1]).abs() < 1e-12);
    }
}
