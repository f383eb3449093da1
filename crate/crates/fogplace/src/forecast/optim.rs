//! Derivative-free Nelder-Mead simplex minimization.

/// Result of a simplex search.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` starting from `start`, with an initial simplex spanning
/// `initial_step` along each axis. Standard reflection / expansion /
/// contraction / shrink coefficients; fully deterministic.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    start: &[f64],
    initial_step: f64,
    max_iter: usize,
    tol: f64,
) -> SimplexResult {
    let n = start.len();
    assert!(n >= 1, "need at least one dimension");
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += if p[i].abs() > 1e-8 {
            initial_step * p[i].abs()
        } else {
            initial_step
        };
        let v = f(&p);
        simplex.push((p, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }

        // Centroid of all points but the worst.
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let worst_point = simplex[n].0.clone();
        let blend = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst_point)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = blend(alpha);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(gamma);
            let fe = f(&expanded);
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let contracted = if fr < simplex[n].1 {
            blend(rho) // outside contraction
        } else {
            blend(-rho) // inside contraction
        };
        let fc = f(&contracted);
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        // Shrink toward the best point.
        let best_point = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let p: Vec<f64> = best_point
                .iter()
                .zip(&entry.0)
                .map(|(b, x)| b + sigma * (x - b))
                .collect();
            let v = f(&p);
            *entry = (p, v);
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexResult {
        point: simplex[0].0.clone(),
        value: simplex[0].1,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let r = nelder_mead(
            |x| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
            &[0.0, 0.0],
            0.5,
            2_000,
            1e-12,
        );
        assert!(r.converged);
        assert!((r.point[0] - 3.0).abs() < 1e-5, "{:?}", r.point);
        assert!((r.point[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            0.5,
            5_000,
            1e-14,
        );
        assert!((r.point[0] - 1.0).abs() < 1e-4, "{:?}", r.point);
        assert!((r.point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| x[0].powi(4) + (x[0] - 2.0).powi(2);
        let a = nelder_mead(f, &[10.0], 0.1, 500, 1e-12);
        let b = nelder_mead(f, &[10.0], 0.1, 500, 1e-12);
        assert_eq!(a.point, b.point);
    }
}
