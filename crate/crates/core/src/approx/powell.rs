//! Powell's conjugate-direction method with Brent line searches. No gradients.

use crate::error::{CoreError, Result};

const GOLD: f64 = 1.618034;
const CGOLD: f64 = 0.381_966_0;
const GROW_LIMIT: f64 = 110.0;
const TINY: f64 = 1e-21;
const MIN_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug)]
pub struct PowellOptions {
    /// Stop once an outer iteration improves the objective by less than this.
    pub ftol: f64,
    /// Relative tolerance of each Brent line minimization.
    pub line_tol: f64,
}

impl Default for PowellOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            line_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PowellResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub outer_iterations: usize,
}

/// Wraps an objective so that a non-finite value aborts the search.
struct Checked<F> {
    f: F,
    bad: bool,
}

impl<F: FnMut(&[f64]) -> f64> Checked<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        if !v.is_finite() {
            self.bad = true;
            return f64::INFINITY;
        }
        v
    }
}

/// Minimizes `f` from `x0`. `budget` caps outer iterations and is decremented,
/// so one budget can be shared by several calls.
pub fn powell<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    opts: PowellOptions,
    budget: &mut usize,
) -> Result<PowellResult> {
    let n = x0.len();
    let mut obj = Checked { f, bad: false };
    let mut x = x0.to_vec();
    let mut fx = obj.eval(&x);
    if obj.bad {
        return Err(CoreError::Numerical("objective is not finite at the starting point".into()));
    }
    let mut dirs = identity(n);
    let mut outer = 0;
    while *budget > 0 {
        if outer % (n + 1) == 0 {
            dirs = identity(n);
        }
        *budget -= 1;
        outer += 1;

        let x_start = x.clone();
        let f_start = fx;
        let (mut biggest, mut big_idx) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let (xn, fnew) = line_minimize(&mut obj, &x, d, fx, opts.line_tol)?;
            if fx - fnew > biggest {
                biggest = fx - fnew;
                big_idx = i;
            }
            x = xn;
            fx = fnew;
        }
        let step: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
        let norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let (xn, fnew) = line_minimize(&mut obj, &x, &step, fx, opts.line_tol)?;
            x = xn;
            fx = fnew;
            dirs[big_idx] = dirs[n - 1].clone();
            dirs[n - 1] = step.iter().map(|v| v / norm).collect();
        }
        if f_start - fx < opts.ftol {
            break;
        }
    }
    Ok(PowellResult {
        x,
        fx,
        outer_iterations: outer,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Minimizes along `x + a d`; never returns a worse point than `x`.
fn line_minimize<F: FnMut(&[f64]) -> f64>(
    obj: &mut Checked<F>,
    x: &[f64],
    d: &[f64],
    fx: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut buf = vec![0.0; x.len()];
    let mut g = |a: f64| {
        for ((b, &xi), &di) in buf.iter_mut().zip(x).zip(d) {
            *b = xi + a * di;
        }
        obj.eval(&buf)
    };
    let (a, fa) = {
        let br = bracket(&mut g, 0.0, 1e-2)?;
        brent(&mut g, br, tol)
    };
    if obj.bad {
        return Err(CoreError::Numerical("objective became non-finite during a line search".into()));
    }
    if fa <= fx {
        Ok((x.iter().zip(d).map(|(xi, di)| xi + a * di).collect(), fa))
    } else {
        Ok((x.to_vec(), fx))
    }
}

struct Bracket {
    a: f64,
    b: f64,
    c: f64,
    fb: f64,
}

/// Downhill bracketing with parabolic extrapolation.
fn bracket(g: &mut impl FnMut(f64) -> f64, mut xa: f64, mut xb: f64) -> Result<Bracket> {
    let mut fa = g(xa);
    let mut fb = g(xb);
    if fa < fb {
        std::mem::swap(&mut xa, &mut xb);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut xc = xb + GOLD * (xb - xa);
    let mut fc = g(xc);
    let mut iter = 0;
    while fc < fb {
        let tmp1 = (xb - xa) * (fb - fc);
        let tmp2 = (xb - xc) * (fb - fa);
        let val = tmp2 - tmp1;
        let denom = if val.abs() < TINY { 2.0 * TINY } else { 2.0 * val };
        let mut w = xb - ((xb - xc) * tmp2 - (xb - xa) * tmp1) / denom;
        let wlim = xb + GROW_LIMIT * (xc - xb);
        iter += 1;
        if iter > 1000 {
            return Err(CoreError::Numerical("line search could not bracket a minimum".into()));
        }
        let mut fw;
        if (w - xc) * (xb - w) > 0.0 {
            fw = g(w);
            if fw < fc {
                xa = xb;
                xb = w;
                fb = fw;
                break;
            } else if fw > fb {
                xc = w;
                break;
            }
            w = xc + GOLD * (xc - xb);
            fw = g(w);
        } else if (w - wlim) * (wlim - xc) >= 0.0 {
            w = wlim;
            fw = g(w);
        } else if (w - wlim) * (xc - w) > 0.0 {
            fw = g(w);
            if fw < fc {
                xb = xc;
                xc = w;
                w = xc + GOLD * (xc - xb);
                fb = fc;
                fc = fw;
                fw = g(w);
            }
        } else {
            w = xc + GOLD * (xc - xb);
            fw = g(w);
        }
        xa = xb;
        xb = xc;
        xc = w;
        fa = fb;
        fb = fc;
        fc = fw;
    }
    let _ = fa;
    Ok(Bracket { a: xa, b: xb, c: xc, fb })
}

/// Brent's parabolic/golden-section minimization inside a bracket.
fn brent(g: &mut impl FnMut(f64) -> f64, br: Bracket, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if br.a < br.c { (br.a, br.c) } else { (br.c, br.a) };
    let (mut x, mut w, mut v) = (br.b, br.b, br.b);
    let (mut fx, mut fw, mut fv) = (br.fb, br.fb, br.fb);
    let mut deltax: f64 = 0.0;
    let mut rat: f64 = 0.0;
    for _ in 0..500 {
        let tol1 = tol * x.abs() + MIN_TOL;
        let tol2 = 2.0 * tol1;
        let xmid = 0.5 * (a + b);
        if (x - xmid).abs() < tol2 - 0.5 * (b - a) {
            break;
        }
        if deltax.abs() <= tol1 {
            deltax = if x >= xmid { a - x } else { b - x };
            rat = CGOLD * deltax;
        } else {
            let tmp1 = (x - w) * (fx - fv);
            let mut tmp2 = (x - v) * (fx - fw);
            let mut p = (x - v) * tmp2 - (x - w) * tmp1;
            tmp2 = 2.0 * (tmp2 - tmp1);
            if tmp2 > 0.0 {
                p = -p;
            }
            tmp2 = tmp2.abs();
            let dx_prev = deltax;
            deltax = rat;
            if p > tmp2 * (a - x) && p < tmp2 * (b - x) && p.abs() < (0.5 * tmp2 * dx_prev).abs() {
                rat = p / tmp2;
                let u = x + rat;
                if u - a < tol2 || b - u < tol2 {
                    rat = if xmid - x >= 0.0 { tol1 } else { -tol1 };
                }
            } else {
                deltax = if x >= xmid { a - x } else { b - x };
                rat = CGOLD * deltax;
            }
        }
        let u = if rat.abs() < tol1 {
            if rat >= 0.0 {
                x + tol1
            } else {
                x - tol1
            }
        } else {
            x + rat
        };
        let fu = g(u);
        if fu > fx {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                w = u;
                fv = fw;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        } else {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            w = x;
            x = u;
            fv = fw;
            fw = fx;
            fx = fu;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_rosenbrock_valley() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let mut budget = 200;
        let opts = PowellOptions {
            ftol: 1e-14,
            ..Default::default()
        };
        let r = powell(f, &[-1.2, 1.0], opts, &mut budget).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn nonsmooth_max_of_abs() {
        let f = |x: &[f64]| (x[0] - 2.0).abs().max((x[1] + 1.0).abs());
        let mut budget = 200;
        let r = powell(f, &[0.0, 0.0], PowellOptions::default(), &mut budget).unwrap();
        assert!(r.fx < 1e-6);
    }

    #[test]
    fn budget_is_shared() {
        let f = |x: &[f64]| x[0] * x[0];
        let mut budget = 3;
        let r = powell(f, &[5.0], PowellOptions { ftol: -1.0, ..Default::default() }, &mut budget).unwrap();
        assert_eq!(r.outer_iterations, 3);
        assert_eq!(budget, 0);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let mut budget = 50;
        assert!(matches!(
            powell(f, &[0.0], PowellOptions::default(), &mut budget),
            Err(CoreError::Numerical(_))
        ));
    }
}
