//! Dense two-phase revised simplex for `min c^T y  s.t.  M y = b, y >= 0`.
//!
//! Meant for problems with few rows and many columns, such as the dual of a
//! discrete minimax fit (degree + 2 rows, two columns per grid point).
//! Columns are generated on demand, so `M` is never stored.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};

const PRICE_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 64;
const MAX_ITERATIONS: usize = 100_000;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 25;

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Primal values of the structural columns.
    pub y: Vec<f64>,
    /// Simplex multipliers `pi` with `pi^T M <= c` at the optimum; the
    /// solution of the dual problem `max b^T pi`.
    pub pi: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Tableau<'a, C: Fn(usize, &mut [f64])> {
    rows: usize,
    cols: usize,
    column: &'a C,
    flip: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    iterations: usize,
    scratch: Vec<f64>,
}

impl<'a, C: Fn(usize, &mut [f64])> Tableau<'a, C> {
    /// Column `j` of the sign-normalized system; `j >= cols` are artificials.
    fn col(&mut self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        if j < self.cols {
            (self.column)(j, &mut self.scratch);
            for ((o, s), f) in out.iter_mut().zip(&self.scratch).zip(&self.flip) {
                *o = s * f;
            }
        } else {
            out[j - self.cols] = 1.0;
        }
        out
    }

    fn refactor(&mut self) -> Result<()> {
        let mut b = DMatrix::zeros(self.rows, self.rows);
        for (k, &j) in self.basis.clone().iter().enumerate() {
            let c = self.col(j);
            for (i, v) in c.into_iter().enumerate() {
                b[(i, k)] = v;
            }
        }
        self.binv = b
            .try_inverse()
            .ok_or_else(|| CoreError::Internal("simplex basis became singular".into()))?;
        let rhs = nalgebra::DVector::from_column_slice(&self.rhs);
        self.xb = (&self.binv * rhs).iter().copied().collect();
        Ok(())
    }

    fn multipliers(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.rows).map(|k| cost(self.basis[k]) * self.binv[(k, i)]).sum())
            .collect()
    }

    /// Runs simplex iterations for `cost` until optimal.
    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64) -> Result<()> {
        let mut degenerate = 0;
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(CoreError::Internal("simplex iteration limit reached".into()));
            }
            if self.iterations % REFACTOR_EVERY == 0 {
                self.refactor()?;
            }
            let pi = self.multipliers(cost);
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -PRICE_TOL;
            for j in 0..self.cols {
                if self.in_basis[j] {
                    continue;
                }
                let a = self.col(j);
                let d = cost(j) - pi.iter().zip(&a).map(|(p, v)| p * v).sum::<f64>();
                if d < best {
                    entering = Some((j, a));
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some((q, aq)) = entering else {
                return Ok(());
            };
            let alpha: Vec<f64> = (0..self.rows)
                .map(|i| (0..self.rows).map(|k| self.binv[(i, k)] * aq[k]).sum())
                .collect();
            let mut leave: Option<(usize, f64)> = None;
            for (i, &a) in alpha.iter().enumerate() {
                if a > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, r)) => ratio < r - 1e-14 || (ratio <= r + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((l, theta)) = leave else {
                return Err(CoreError::Internal("linear program is unbounded".into()));
            };
            degenerate = if theta < 1e-14 { degenerate + 1 } else { 0 };
            self.pivot(l, q, &alpha, theta);
        }
    }

    fn pivot(&mut self, l: usize, q: usize, alpha: &[f64], theta: f64) {
        for (i, x) in self.xb.iter_mut().enumerate() {
            *x -= theta * alpha[i];
        }
        self.xb[l] = theta;
        let al = alpha[l];
        for k in 0..self.rows {
            self.binv[(l, k)] /= al;
        }
        for i in 0..self.rows {
            if i != l && alpha[i] != 0.0 {
                for k in 0..self.rows {
                    let v = self.binv[(l, k)];
                    self.binv[(i, k)] -= alpha[i] * v;
                }
            }
        }
        let old = self.basis[l];
        if old < self.cols {
            self.in_basis[old] = false;
        }
        self.in_basis[q] = true;
        self.basis[l] = q;
        self.iterations += 1;
    }
}

/// Solves `min cost^T y  s.t.  M y = rhs, y >= 0` where `column(j, out)` writes
/// column `j` of `M` (length `rows`) into `out`.
pub fn simplex<C: Fn(usize, &mut [f64])>(rows: usize, cols: usize, column: &C, cost: &[f64], rhs: &[f64]) -> Result<LpSolution> {
    assert_eq!(cost.len(), cols);
    assert_eq!(rhs.len(), rows);
    let flip: Vec<f64> = rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut t = Tableau {
        rows,
        cols,
        column,
        rhs: rhs.iter().zip(&flip).map(|(b, f)| b * f).collect(),
        flip,
        basis: (cols..cols + rows).collect(),
        in_basis: vec![false; cols],
        binv: DMatrix::identity(rows, rows),
        xb: Vec::new(),
        iterations: 0,
        scratch: vec![0.0; rows],
    };

    // Phase 1: drive the artificials to zero.
    let phase1 = |j: usize| if j >= cols { 1.0 } else { 0.0 };
    t.optimize(&phase1)?;
    t.refactor()?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.xb)
        .filter(|(&j, _)| j >= cols)
        .map(|(_, &x)| x)
        .sum();
    if infeasibility > 1e-9 {
        return Err(CoreError::Internal(format!("linear program is infeasible ({infeasibility:e})")));
    }
    // Pivot zero-level artificials out where possible; redundant rows keep theirs.
    for l in 0..rows {
        if t.basis[l] < cols {
            continue;
        }
        for j in 0..cols {
            if t.in_basis[j] {
                continue;
            }
            let a = t.col(j);
            let alpha: Vec<f64> = (0..rows).map(|i| (0..rows).map(|k| t.binv[(i, k)] * a[k]).sum()).collect();
            if alpha[l].abs() > 1e-9 {
                t.pivot(l, j, &alpha, 0.0);
                break;
            }
        }
    }

    let phase2 = |j: usize| if j >= cols { 0.0 } else { cost[j] };
    t.optimize(&phase2)?;
    t.refactor()?;

    let mut y = vec![0.0; cols];
    for (&j, &x) in t.basis.iter().zip(&t.xb) {
        if j < cols {
            y[j] = x.max(0.0);
        }
    }
    let pi: Vec<f64> = t.multipliers(&phase2).iter().zip(&t.flip).map(|(p, f)| p * f).collect();
    let objective = y.iter().zip(cost).map(|(a, b)| a * b).sum();
    Ok(LpSolution {
        y,
        pi,
        objective,
        iterations: t.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Minimum over all feasible basic solutions.
    fn brute_force(m: &DMatrix<f64>, cost: &[f64], rhs: &[f64]) -> Option<f64> {
        let (rows, cols) = m.shape();
        let mut best: Option<f64> = None;
        let mut idx: Vec<usize> = (0..rows).collect();
        loop {
            let b = DMatrix::from_fn(rows, rows, |i, k| m[(i, idx[k])]);
            if let Some(inv) = b.clone().try_inverse() {
                let x = inv * nalgebra::DVector::from_column_slice(rhs);
                if x.iter().all(|&v| v >= -1e-9) {
                    let obj: f64 = idx.iter().zip(x.iter()).map(|(&j, v)| cost[j] * v).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
            // Next combination.
            let mut i = rows;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < cols - rows + i {
                    idx[i] += 1;
                    for k in i + 1..rows {
                        idx[k] = idx[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_vertex_enumeration_on_random_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut solved = 0;
        for _ in 0..200 {
            let rows = rng.random_range(1..=3);
            let cols = rng.random_range(rows + 1..=7);
            let m = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0f64).round());
            // Feasible by construction: rhs = M y0 with y0 >= 0; bounded by positive costs.
            let y0: Vec<f64> = (0..cols).map(|_| rng.random_range(0.0..2.0f64)).collect();
            let rhs: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| m[(i, j)] * y0[j]).sum()).collect();
            let cost: Vec<f64> = (0..cols).map(|_| rng.random_range(0.1..3.0f64)).collect();
            let column = |j: usize, out: &mut [f64]| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m[(i, j)];
                }
            };
            let lp = simplex(rows, cols, &column, &cost, &rhs).unwrap();
            // Rank-deficient draws have no invertible basis to enumerate.
            let Some(bf) = brute_force(&m, &cost, &rhs) else {
                continue;
            };
            assert!((lp.objective - bf).abs() < 1e-8, "simplex {} vs vertices {}", lp.objective, bf);
            // Strong duality.
            let dual: f64 = lp.pi.iter().zip(&rhs).map(|(p, b)| p * b).sum();
            assert!((dual - lp.objective).abs() < 1e-8);
            solved += 1;
        }
        assert!(solved > 150, "only {solved} comparable draws");
    }

    #[test]
    fn infeasible_program_is_reported() {
        // y1 + y2 = -1 with y >= 0.
        let column = |_: usize, out: &mut [f64]| out[0] = 1.0;
        assert!(matches!(simplex(1, 2, &column, &[1.0, 1.0], &[-1.0]), Err(CoreError::Internal(_))));
    }

    #[test]
    fn unbounded_program_is_reported() {
        // min -y1 s.t. y1 - y2 = 0.
        let column = |j: usize, out: &mut [f64]| out[0] = if j == 0 { 1.0 } else { -1.0 };
        assert!(matches!(simplex(1, 2, &column, &[-1.0, 0.0], &[0.0]), Err(CoreError::Internal(_))));
    }
}
