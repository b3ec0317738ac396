//! Derivative-free minimizers: Nelder–Mead in ℝⁿ and Brent on an interval.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the simplex's f-spread falls below `ftol·(|f|+1e-10)`.
    pub ftol: f64,
    pub xtol: f64,
    /// Number of fresh restarts from the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evals: 4000, ftol: 1e-10, xtol: 1e-8, restarts: 2 }
    }
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64], step: &[f64]) -> Minimum {
        let mut best = self.run(&mut f, x0, step, self.max_evals);
        let mut evals = best.evals;
        for _ in 0..self.restarts {
            if evals >= self.max_evals {
                break;
            }
            let next = self.run(&mut f, &best.x.clone(), step, self.max_evals - evals);
            evals += next.evals;
            let improved = next.f < best.f - self.ftol * (best.f.abs() + 1e-10);
            if next.f <= best.f {
                best = Minimum { evals, ..next };
            }
            if !improved {
                break;
            }
        }
        best.evals = evals;
        best
    }

    fn run<F: FnMut(&[f64]) -> f64>(&self, f: &mut F, x0: &[f64], step: &[f64], budget: usize) -> Minimum {
        let n = x0.len();
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += step[i];
            simplex.push(x);
        }
        let mut fs: Vec<f64> = simplex.iter().map(|x| sanitize(f(x))).collect();
        let mut evals = n + 1;
        let mut converged = false;
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

        while evals < budget {
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
            simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
            fs = idx.iter().map(|&i| fs[i]).collect();

            let spread = (fs[n] - fs[0]).abs();
            let size = (1..=n)
                .map(|i| (0..n).map(|k| (simplex[i][k] - simplex[0][k]).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread <= self.ftol * (fs[0].abs() + 1e-10) || size <= self.xtol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for x in &simplex[..n] {
                for k in 0..n {
                    centroid[k] += x[k] / n as f64;
                }
            }
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                (0..n).map(|k| centroid[k] + t * (worst[k] - centroid[k])).collect()
            };
            let xr = along(-alpha, &simplex[n]);
            let fr = sanitize(f(&xr));
            evals += 1;
            if fr < fs[0] {
                let xe = along(-gamma, &simplex[n]);
                let fe = sanitize(f(&xe));
                evals += 1;
                if fe < fr {
                    simplex[n] = xe;
                    fs[n] = fe;
                } else {
                    simplex[n] = xr;
                    fs[n] = fr;
                }
            } else if fr < fs[n - 1] {
                simplex[n] = xr;
                fs[n] = fr;
            } else {
                let (xc, fc) = if fr < fs[n] {
                    let xc = along(-rho, &simplex[n]);
                    let fc = sanitize(f(&xc));
                    (xc, fc)
                } else {
                    let xc = along(rho, &simplex[n]);
                    let fc = sanitize(f(&xc));
                    (xc, fc)
                };
                evals += 1;
                if fc < fs[n].min(fr) {
                    simplex[n] = xc;
                    fs[n] = fc;
                } else {
                    for i in 1..=n {
                        for k in 0..n {
                            simplex[i][k] = simplex[0][k] + sigma * (simplex[i][k] - simplex[0][k]);
                        }
                        fs[i] = sanitize(f(&simplex[i]));
                    }
                    evals += n;
                }
            }
        }
        let b = (0..=n).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap_or(0);
        Minimum { x: simplex[b].clone(), f: fs[b], evals, converged }
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Brent's method for a minimum of `f` on `[a, b]`; returns `(x, f(x), evals)`.
pub fn brent_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    const CGOLD: f64 = 0.381_966_011_250_105;
    let mut x = a + CGOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = sanitize(f(x));
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evals = 1;
    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = sanitize(f(u));
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x
            } else {
                b = x
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u
            } else {
                b = u
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx, evals)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = NelderMead { max_evals: 20_000, ..Default::default() }.minimize(f, &[-1.2, 1.0], &[0.5, 0.5]);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn brent_quadratic() {
        let (x, fx, _) = brent_min(|x| (x - 0.3).powi(2) + 1.0, -2.0, 5.0, 1e-10, 100);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-12);
    }

    #[test]
    fn logistic_round_trip() {
        for &p in &[1e-6, 0.3, 0.5, 0.999] {
            assert!((logistic(logit(p)) - p).abs() < 1e-12);
        }
    }
}
