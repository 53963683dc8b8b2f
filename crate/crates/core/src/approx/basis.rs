//! Chebyshev parametrization used internally for conditioning.
//!
//! Fits and searches run on `T_k(t)` with `t = (x - mid) / half`, where the
//! design matrix is well conditioned; results are converted back to ascending
//! monomial coefficients in `x` at the boundary.

/// Affine map of `[lo, hi]` onto `[-1, 1]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Interval {
    mid: f64,
    half: f64,
}

impl Interval {
    pub(crate) fn new(lo: f64, hi: f64) -> Self {
        Self {
            mid: 0.5 * (lo + hi),
            half: 0.5 * (hi - lo),
        }
    }

    #[inline]
    pub(crate) fn to_unit(self, x: f64) -> f64 {
        (x - self.mid) / self.half
    }
}

/// `T_0(t) .. T_degree(t)` written into `out`.
pub(crate) fn chebyshev_row(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 2..out.len() {
        out[k] = 2.0 * t * out[k - 1] - out[k - 2];
    }
}

/// Column `k` holds the ascending monomial coefficients (in `x`) of `T_k(to_unit(x))`.
fn conversion_matrix(degree: usize, iv: Interval) -> Vec<Vec<f64>> {
    // T_k as polynomials in t.
    let m = degree + 1;
    let mut t_polys: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut p = vec![0.0; m];
        match k {
            0 => p[0] = 1.0,
            1 => p[1] = 1.0,
            _ => {
                for (j, &c) in t_polys[k - 1].iter().enumerate().take(m - 1) {
                    p[j + 1] += 2.0 * c;
                }
                for (j, &c) in t_polys[k - 2].iter().enumerate() {
                    p[j] -= c;
                }
            }
        }
        t_polys.push(p);
    }
    // Substitute t = a x + b by Horner composition.
    let (a, b) = (1.0 / iv.half, -iv.mid / iv.half);
    t_polys
        .iter()
        .map(|tp| {
            let mut acc = vec![0.0; m];
            for &c in tp.iter().rev() {
                let mut next = vec![0.0; m];
                for (j, &v) in acc.iter().enumerate() {
                    next[j] += b * v;
                    if j + 1 < m {
                        next[j + 1] += a * v;
                    }
                }
                next[0] += c;
                acc = next;
            }
            acc
        })
        .collect()
}

pub(crate) fn chebyshev_to_monomial(cheb: &[f64], iv: Interval) -> Vec<f64> {
    let cols = conversion_matrix(cheb.len() - 1, iv);
    let mut out = vec![0.0; cheb.len()];
    for (col, &c) in cols.iter().zip(cheb) {
        for (o, &v) in out.iter_mut().zip(col) {
            *o += c * v;
        }
    }
    out
}

pub(crate) fn monomial_to_chebyshev(mono: &[f64], iv: Interval) -> Vec<f64> {
    // The conversion matrix is upper triangular: back-substitute.
    let m = mono.len();
    let cols = conversion_matrix(m - 1, iv);
    let mut cheb = vec![0.0; m];
    for k in (0..m).rev() {
        let tail: f64 = (k + 1..m).map(|j| cols[j][k] * cheb[j]).sum();
        cheb[k] = (mono[k] - tail) / cols[k][k];
    }
    cheb
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horner(c: &[f64], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
    }

    #[test]
    fn conversion_agrees_with_direct_evaluation() {
        let iv = Interval::new(-7.0, 7.0);
        let cheb = [0.3, -1.2, 0.7, 0.05, -0.4, 0.2];
        let mono = chebyshev_to_monomial(&cheb, iv);
        let mut row = [0.0; 6];
        for i in 0..=20 {
            let x = -7.0 + 0.7 * i as f64;
            chebyshev_row(iv.to_unit(x), &mut row);
            let direct: f64 = row.iter().zip(&cheb).map(|(a, b)| a * b).sum();
            assert!((direct - horner(&mono, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn conversions_are_inverse() {
        let iv = Interval::new(0.0, 3.0);
        let mono = [1.0, -2.0, 0.5, 0.25, -0.125];
        let back = chebyshev_to_monomial(&monomial_to_chebyshev(&mono, iv), iv);
        for (a, b) in mono.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
