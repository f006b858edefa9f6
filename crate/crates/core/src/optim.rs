//! Box-constrained quasi-Newton minimization (projected BFGS with an Armijo
//! backtracking search). Used for marginal-likelihood fitting.

use crate::linalg::Matrix;
use crate::scalar::{dot, max_abs, Scalar};

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoxOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
}

pub(crate) struct BoxResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
}

fn clamp_into<T: Scalar>(x: &mut [T], lo: &[T], hi: &[T]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.max(l).min(h);
    }
}

/// Zeroes gradient components that point out of the box at an active bound.
fn project_gradient<T: Scalar>(x: &[T], g: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| {
            if (xi <= l && gi > T::zero()) || (xi >= h && gi < T::zero()) {
                T::zero()
            } else {
                gi
            }
        })
        .collect()
}

/// Minimizes `fg` over `[lo, hi]`, starting from `x0` (clamped into the box).
///
/// `fg` returns `None` where the objective cannot be evaluated; the line
/// search treats such points as infinitely bad. Returns `None` only when the
/// start itself cannot be evaluated.
pub(crate) fn minimize_box<T, F>(
    mut fg: F,
    x0: &[T],
    lo: &[T],
    hi: &[T],
    opts: BoxOptions,
) -> Option<BoxResult<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Option<(T, Vec<T>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp_into(&mut x, lo, hi);
    let (mut f, mut g) = fg(&x).filter(|(f, _)| f.is_finite())?;
    let mut h = Matrix::<T>::identity(n);
    let mut h_is_identity = true;
    let armijo = T::lit(1e-4);
    let grad_tol = T::lit(opts.grad_tol);
    let mut stalls = 0;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let pg = project_gradient(&x, &g, lo, hi);
        if max_abs(&pg) < grad_tol {
            break;
        }

        let blocked = |i: usize, di: T| {
            pg[i] == T::zero()
                || (x[i] <= lo[i] && di < T::zero())
                || (x[i] >= hi[i] && di > T::zero())
        };
        let mut dir: Vec<T> = h.matvec(&g).into_iter().map(|v| -v).collect();
        for i in 0..n {
            if blocked(i, dir[i]) {
                dir[i] = T::zero();
            }
        }
        if dot(&g, &dir) >= T::zero() {
            h = Matrix::identity(n);
            h_is_identity = true;
            dir = pg.iter().map(|&v| -v).collect();
        }
        let slope = dot(&g, &dir);
        if slope >= T::zero() {
            break;
        }

        let mut step = if h_is_identity {
            T::one().min(T::one() / max_abs(&dir))
        } else {
            T::one()
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<T> = x.iter().zip(&dir).map(|(&a, &d)| a + step * d).collect();
            clamp_into(&mut xn, lo, hi);
            let moved: Vec<T> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            if let Some((fnew, gnew)) = fg(&xn) {
                if fnew.is_finite() && fnew <= f + armijo * dot(&g, &moved) {
                    accepted = Some((xn, fnew, gnew, moved));
                    break;
                }
            }
            step *= T::lit(0.5);
        }
        let Some((xn, fnew, gnew, s)) = accepted else {
            if h_is_identity {
                break;
            }
            h = Matrix::identity(n);
            h_is_identity = true;
            continue;
        };

        let yv: Vec<T> = gnew.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &yv);
        let scale = dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt();
        if sy > T::lit(1e-12) * scale && sy > T::zero() {
            bfgs_inverse_update(&mut h, &s, &yv, sy);
            h_is_identity = false;
        }

        let improvement = f - fnew;
        x = xn;
        f = fnew;
        g = gnew;
        if improvement <= T::lit(1e-12) * (T::one() + f.abs()) {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Some(BoxResult {
        x,
        value: f,
        iterations,
    })
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / sᵀy`.
fn bfgs_inverse_update<T: Scalar>(h: &mut Matrix<T>, s: &[T], y: &[T], sy: T) {
    let n = s.len();
    let rho = T::one() / sy;
    let hy = h.matvec(y);
    let yhy = dot(y, &hy);
    let coef = (T::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> BoxOptions {
        BoxOptions {
            max_iters: 200,
            grad_tol: 1e-10,
        }
    }

    #[test]
    fn finds_interior_minimum_of_rosenbrock() {
        let fg = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            Some((f, g))
        };
        let r = minimize_box(fg, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], opts()).unwrap();
        assert!(
            (r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn stops_on_active_bound() {
        // minimum of (x-3)^2 + (y+1)^2 over [0,1]^2 is at (1, 0)
        let fg = |x: &[f64]| {
            Some((
                (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
                vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)],
            ))
        };
        let r = minimize_box(fg, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], opts()).unwrap();
        assert_eq!(r.x, vec![1.0, 0.0]);
        assert!(r.iterations < 20);
    }

    #[test]
    fn unevaluable_start_gives_none() {
        let r = minimize_box(|_: &[f64]| None, &[0.0], &[-1.0], &[1.0], opts());
        assert!(r.is_none());
    }
}
