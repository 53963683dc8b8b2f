//! Low-degree polynomial approximation of activation functions under a
//! region-weighted minimax measure.
//!
//! Pipeline: [`build_grid`] → [`wls_fit`] → [`powell_refine`] → [`max_error`],
//! with [`lp_minimax_verify`] as an independent global check. Coefficients are
//! ascending everywhere: `coeffs[k]` multiplies `x^k`.

mod basis;
pub mod lp;
pub mod powell;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use basis::{chebyshev_row, chebyshev_to_monomial, monomial_to_chebyshev, Interval};
use powell::{powell, PowellOptions};

/// Degree-4 Softplus reference coefficients, ascending (E, D, C, B, A).
pub const REFERENCE_SOFTPLUS_COEFFS: [f64; 5] = [0.738099333, 0.5, 0.0887234775, -1.5983e-17, -0.00068481];

pub const DEFAULT_DOMAIN: (f64, f64) = (-7.0, 7.0);
/// Fitting grid density: 1401 points is a step of 0.01 on [-7, 7].
pub const DEFAULT_GRID_POINTS: usize = 1401;
pub const VERIFY_POINTS: usize = 100_001;
/// Outer-iteration budget shared by all stages of [`powell_refine`].
pub const POWELL_MAX_OUTER: usize = 200;

/// Softplus is analytic in the strip `|Im z| < pi`; on `[-7, 7]` mapped to `[-1, 1]`
/// the half-width becomes `pi / 7`.
pub const SOFTPLUS_STRIP_HALF_WIDTH: f64 = std::f64::consts::PI / 7.0;
/// Commonly quoted degree-4 bound for Softplus on `[-7, 7]`; its constant prefactor
/// is unstated, so it is carried for reporting only.
pub const QUOTED_DEGREE4_BOUND: f64 = 0.106;

/// Anything that can be approximated: activations, or plain closures in tests.
pub trait Target {
    fn value(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> Target for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Softplus,
    Relu,
    Swish,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 3] = [Self::Softplus, Self::Relu, Self::Swish];

    pub fn name(self) -> &'static str {
        match self {
            Self::Softplus => "softplus",
            Self::Relu => "relu",
            Self::Swish => "swish",
        }
    }
}

impl Target for ActivationKind {
    fn value(&self, x: f64) -> f64 {
        match self {
            // log(1 + e^x), rearranged so e^x never overflows.
            Self::Softplus => {
                if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            Self::Relu => x.max(0.0),
            Self::Swish => x / (1.0 + (-x).exp()),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softplus" => Ok(Self::Softplus),
            "relu" => Ok(Self::Relu),
            "swish" => Ok(Self::Swish),
            other => Err(CoreError::Argument(format!(
                "unknown activation '{other}' (expected softplus, relu or swish)"
            ))),
        }
    }
}

pub fn eval_activation(kind: ActivationKind, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(CoreError::Domain(format!("{kind} evaluated at non-finite input {x}")));
    }
    Ok(kind.value(x))
}

/// Horner evaluation of ascending coefficients.
pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRegion {
    pub lo: f64,
    pub hi: f64,
    pub weight: f64,
}

/// Piecewise-constant weights: the first region containing `x` (closed
/// interval) decides; anything else gets `default_weight`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub regions: Vec<WeightRegion>,
    pub default_weight: f64,
}

impl WeightScheme {
    pub fn new(regions: Vec<WeightRegion>, default_weight: f64) -> Result<Self> {
        let scheme = Self { regions, default_weight };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Weight 3 on [-3, 3], 2 on [-7, -4] and [4, 7], 1 elsewhere.
    pub fn paper() -> Self {
        Self {
            regions: vec![
                WeightRegion { lo: -3.0, hi: 3.0, weight: 3.0 },
                WeightRegion { lo: -7.0, hi: -4.0, weight: 2.0 },
                WeightRegion { lo: 4.0, hi: 7.0, weight: 2.0 },
            ],
            default_weight: 1.0,
        }
    }

    pub fn uniform(weight: f64) -> Result<Self> {
        Self::new(Vec::new(), weight)
    }

    fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w > 0.0;
        if !ok(self.default_weight) {
            return Err(CoreError::Argument(format!("default weight {} must be positive", self.default_weight)));
        }
        for r in &self.regions {
            if !ok(r.weight) {
                return Err(CoreError::Argument(format!("region weight {} must be positive", r.weight)));
            }
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(CoreError::Argument(format!("bad region [{}, {}]", r.lo, r.hi)));
            }
        }
        Ok(())
    }

    pub fn weight(&self, x: f64) -> f64 {
        self.regions
            .iter()
            .find(|r| r.lo <= x && x <= r.hi)
            .map_or(self.default_weight, |r| r.weight)
    }

    /// Canonical text form, accepted back by `from_str`.
    pub fn spec_string(&self) -> String {
        if *self == Self::paper() {
            return "paper".into();
        }
        let mut parts: Vec<String> = self
            .regions
            .iter()
            .map(|r| format!("{}:{}:{}", r.lo, r.hi, r.weight))
            .collect();
        parts.push(self.default_weight.to_string());
        parts.join(",")
    }
}

impl FromStr for WeightScheme {
    type Err = CoreError;

    /// `paper`, `uniform`, or `lo:hi:w,...,default` (a bare number is a uniform scheme).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "paper" => return Ok(Self::paper()),
            "uniform" => return Self::uniform(1.0),
            _ => {}
        }
        let bad = |why: &str| CoreError::Argument(format!("invalid weight spec '{s}': {why}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad(&format!("'{t}' is not a number")));
        let items: Vec<&str> = s.split(',').collect();
        let (last, regions) = items.split_last().ok_or_else(|| bad("empty"))?;
        if last.contains(':') {
            return Err(bad("the last item must be the default weight"));
        }
        let regions = regions
            .iter()
            .map(|item| {
                let f: Vec<&str> = item.split(':').collect();
                if f.len() != 3 {
                    return Err(bad(&format!("region '{item}' is not lo:hi:w")));
                }
                Ok(WeightRegion {
                    lo: num(f[0])?,
                    hi: num(f[1])?,
                    weight: num(f[2])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(regions, num(last)?).map_err(|e| bad(&e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    scheme: WeightScheme,
}

impl SampleGrid {
    /// Grid on arbitrary strictly increasing points, weighted by `scheme`.
    pub fn from_points(points: Vec<f64>, scheme: WeightScheme) -> Result<Self> {
        if points.len() < 2 {
            return Err(CoreError::Argument("a grid needs at least two points".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::Argument("grid points must be finite and strictly increasing".into()));
        }
        let weights = points.iter().map(|&x| scheme.weight(x)).collect();
        Ok(Self { points, weights, scheme })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    fn interval(&self) -> Interval {
        let (lo, hi) = self.domain();
        Interval::new(lo, hi)
    }

    /// Row-major weighted Chebyshev design matrix `w_i T_k(t_i)` and weighted targets.
    fn weighted_system(&self, target: &(impl Target + ?Sized), degree: usize) -> (Vec<f64>, Vec<f64>) {
        let iv = self.interval();
        let m = degree + 1;
        let mut design = vec![0.0; self.len() * m];
        for (row, (&x, &w)) in design.chunks_exact_mut(m).zip(self.points.iter().zip(&self.weights)) {
            chebyshev_row(iv.to_unit(x), row);
            row.iter_mut().for_each(|v| *v *= w);
        }
        let f = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * target.value(x))
            .collect();
        (design, f)
    }
}

/// Uniform grid on `[lo, hi]`, endpoints included.
pub fn build_grid(domain: (f64, f64), scheme: &WeightScheme, n_points: usize) -> Result<SampleGrid> {
    let (lo, hi) = domain;
    if n_points < 2 {
        return Err(CoreError::Argument(format!("grid needs at least 2 points, got {n_points}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CoreError::Argument(format!("invalid domain [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (n_points - 1) as f64;
    let points = (0..n_points)
        .map(|i| if i == n_points - 1 { hi } else { lo + step * i as f64 })
        .collect();
    SampleGrid::from_points(points, scheme.clone())
}

fn check_degree(degree: usize) -> Result<()> {
    if !(1..=8).contains(&degree) {
        return Err(CoreError::Argument(format!("degree {degree} outside the supported range 1..=8")));
    }
    Ok(())
}

/// Weighted least squares: minimizes `sum_i w_i (p(x_i) - f(x_i))^2`.
pub fn wls_fit(grid: &SampleGrid, target: &(impl Target + ?Sized), degree: usize) -> Result<Vec<f64>> {
    check_degree(degree)?;
    if grid.len() < degree + 2 {
        return Err(CoreError::Argument(format!(
            "degree {degree} fit needs more than {} grid points, got {}",
            degree + 1,
            grid.len()
        )));
    }
    let m = degree + 1;
    let (mut design, mut rhs) = grid.weighted_system(target, degree);
    // Rows carry w_i; least squares needs sqrt(w_i).
    for (i, &w) in grid.weights.iter().enumerate() {
        let s = w.sqrt() / w;
        design[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= s);
        rhs[i] *= s;
    }
    let a = DMatrix::from_row_slice(grid.len(), m, &design);
    let b = DVector::from_vec(rhs);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(CoreError::Numerical(format!(
            "design matrix is rank deficient (singular value ratio {:e})",
            smin / smax
        )));
    }
    let cheb = svd
        .solve(&b, 0.0)
        .map_err(|e| CoreError::Numerical(format!("least-squares solve failed: {e}")))?;
    Ok(chebyshev_to_monomial(cheb.as_slice(), grid.interval()))
}

/// `max_i w_i |p(x_i) - f(x_i)|` on the grid.
pub fn weighted_objective(coeffs: &[f64], grid: &SampleGrid, target: &(impl Target + ?Sized)) -> f64 {
    grid.points
        .iter()
        .zip(&grid.weights)
        .map(|(&x, &w)| w * (eval_poly(coeffs, x) - target.value(x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct RefineOutcome {
    pub coeffs: Vec<f64>,
    pub initial_objective: f64,
    pub objective: f64,
    pub outer_iterations: usize,
}

/// Powell minimization of the weighted max error on the grid.
///
/// The max objective has kinks where Powell's coordinate line searches stall,
/// so the search first runs on a log-sum-exp smoothing `tau * log sum exp(±r_i / tau)`
/// for a decreasing sequence of `tau`, then polishes on the exact objective.
/// All stages share one budget of [`POWELL_MAX_OUTER`] outer iterations and each
/// stops when an outer iteration gains less than 1e-8.
pub fn powell_refine(init: &[f64], grid: &SampleGrid, target: &(impl Target + ?Sized)) -> Result<RefineOutcome> {
    let degree = init.len().checked_sub(1).ok_or_else(|| CoreError::Argument("empty coefficient vector".into()))?;
    check_degree(degree)?;
    let m = degree + 1;
    let iv = grid.interval();
    let (design, f) = grid.weighted_system(target, degree);
    let residuals = |c: &[f64], out: &mut [f64]| {
        for ((r, row), &fi) in out.iter_mut().zip(design.chunks_exact(m)).zip(&f) {
            *r = row.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() - fi;
        }
    };
    let mut buf = vec![0.0; grid.len()];
    let exact = |c: &[f64], buf: &mut Vec<f64>| {
        residuals(c, buf);
        buf.iter().fold(0.0f64, |a, r| a.max(r.abs()))
    };

    let c0 = monomial_to_chebyshev(init, iv);
    let initial = exact(&c0, &mut buf);
    if !initial.is_finite() {
        return Err(CoreError::Numerical("objective is not finite at the initial coefficients".into()));
    }
    let opts = PowellOptions::default();
    let mut budget = POWELL_MAX_OUTER;
    let mut c = c0.clone();
    for tau in [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6] {
        if budget == 0 {
            break;
        }
        let smooth = |cc: &[f64]| {
            residuals(cc, &mut buf);
            let peak = buf.iter().fold(0.0f64, |a, r| a.max(r.abs()));
            let sum: f64 = buf
                .iter()
                .map(|r| ((r - peak) / tau).exp() + ((-r - peak) / tau).exp())
                .sum();
            peak + tau * sum.ln()
        };
        c = powell(smooth, &c, opts, &mut budget)?.x;
    }
    let mut polish_buf = vec![0.0; grid.len()];
    let polished = powell(|cc: &[f64]| exact(cc, &mut polish_buf), &c, opts, &mut budget)?;
    let used = POWELL_MAX_OUTER - budget;

    let (best, objective) = if polished.fx <= initial {
        (polished.x, polished.fx)
    } else {
        (c0, initial)
    };
    Ok(RefineOutcome {
        coeffs: chebyshev_to_monomial(&best, iv),
        initial_objective: initial,
        objective,
        outer_iterations: used,
    })
}

/// Unweighted dense-grid maximum `|p(x) - f(x)|` and where it occurs.
pub fn max_error(coeffs: &[f64], target: &(impl Target + ?Sized), domain: (f64, f64), n_eval: usize) -> (f64, f64) {
    max_error_weighted(coeffs, target, domain, n_eval, None)
}

/// As [`max_error`], optionally scaled by a weight scheme.
pub fn max_error_weighted(
    coeffs: &[f64],
    target: &(impl Target + ?Sized),
    domain: (f64, f64),
    n_eval: usize,
    scheme: Option<&WeightScheme>,
) -> (f64, f64) {
    let (lo, hi) = domain;
    let n = n_eval.max(2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut best = (0.0, lo);
    for i in 0..n {
        let x = if i == n - 1 { hi } else { lo + step * i as f64 };
        let w = scheme.map_or(1.0, |s| s.weight(x));
        let e = w * (eval_poly(coeffs, x) - target.value(x)).abs();
        if e > best.0 {
            best = (e, x);
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct LpVerification {
    pub coeffs: Vec<f64>,
    /// Optimal weighted max error on the (refined) LP grid.
    pub e_max_weighted: f64,
    /// Weighted max error of the LP solution on the dense verification grid.
    pub e_max_weighted_dense: f64,
    pub alternation_count: usize,
    pub lp_points: usize,
    pub simplex_iterations: usize,
}

impl LpVerification {
    /// Chebyshev alternation criterion: `degree + 2` sign changes, or an exact fit.
    pub fn passes(&self, degree: usize) -> bool {
        self.e_max_weighted <= 1e-9 || self.alternation_count >= degree + 2
    }
}

/// Solves `min t  s.t.  -t <= w_i (p(x_i) - f(x_i)) <= t` on the grid exactly, then
/// adds the 10 worst points of a dense verification grid and solves again.
pub fn lp_minimax_verify(grid: &SampleGrid, target: &(impl Target + ?Sized), degree: usize) -> Result<LpVerification> {
    check_degree(degree)?;
    if grid.len() < degree + 2 {
        return Err(CoreError::Argument("LP verification needs more than degree + 1 points".into()));
    }
    let first = solve_minimax_lp(grid, target, degree)?;
    let (lo, hi) = grid.domain();
    let step = (hi - lo) / (VERIFY_POINTS - 1) as f64;
    let mut scored: Vec<(f64, f64)> = (0..VERIFY_POINTS)
        .map(|i| {
            let x = if i == VERIFY_POINTS - 1 { hi } else { lo + step * i as f64 };
            let r = grid.scheme.weight(x) * (eval_poly(&first.0, x) - target.value(x)).abs();
            (r, x)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = grid.points.clone();
    for &(_, x) in scored.iter().take(10) {
        if let Err(pos) = points.binary_search_by(|p| p.total_cmp(&x)) {
            points.insert(pos, x);
        }
    }
    let refined = SampleGrid::from_points(points, grid.scheme.clone())?;
    let (coeffs, t, iterations) = solve_minimax_lp(&refined, target, degree)?;
    let e_dense = max_error_weighted(&coeffs, target, (lo, hi), VERIFY_POINTS, Some(&grid.scheme)).0;
    let alternation_count = count_alternations(&coeffs, &refined, target, t);
    Ok(LpVerification {
        coeffs,
        e_max_weighted: t,
        e_max_weighted_dense: e_dense,
        alternation_count,
        lp_points: refined.len(),
        simplex_iterations: first.2 + iterations,
    })
}

/// Sign runs of the weighted residual among near-extremal points (`|r| >= 0.95 t`).
pub fn count_alternations(coeffs: &[f64], grid: &SampleGrid, target: &(impl Target + ?Sized), t: f64) -> usize {
    if t <= 0.0 {
        return 0;
    }
    let mut runs = 0;
    let mut last_sign = 0.0;
    for (&x, &w) in grid.points.iter().zip(&grid.weights) {
        let r = w * (eval_poly(coeffs, x) - target.value(x));
        if r.abs() >= 0.95 * t {
            let s = r.signum();
            if s != last_sign {
                runs += 1;
                last_sign = s;
            }
        }
    }
    runs
}

/// The LP is solved in dual form, which has only `degree + 2` equality rows:
///
/// `max sum_i w_i f_i (v_i - u_i)  s.t.  sum_i w_i T(t_i) (u_i - v_i) = 0,  sum_i (u_i + v_i) = 1,  u, v >= 0`.
///
/// The simplex multipliers of this problem are the primal `(c, -t)`.
fn solve_minimax_lp(grid: &SampleGrid, target: &(impl Target + ?Sized), degree: usize) -> Result<(Vec<f64>, f64, usize)> {
    let n = grid.len();
    let m = degree + 1;
    let (design, wf) = grid.weighted_system(target, degree);
    let column = |j: usize, out: &mut [f64]| {
        let (i, sign) = if j < n { (j, 1.0) } else { (j - n, -1.0) };
        for (o, &v) in out[..m].iter_mut().zip(&design[i * m..(i + 1) * m]) {
            *o = sign * v;
        }
        out[m] = 1.0;
    };
    let cost: Vec<f64> = wf.iter().copied().chain(wf.iter().map(|v| -v)).collect();
    let mut rhs = vec![0.0; m + 1];
    rhs[m] = 1.0;
    let sol = lp::simplex(m + 1, 2 * n, &column, &cost, &rhs)?;
    let cheb = &sol.pi[..m];
    let t = -sol.pi[m];
    if !(t.is_finite() && t >= -1e-9) {
        return Err(CoreError::Internal(format!("minimax LP returned t = {t}")));
    }
    let coeffs = chebyshev_to_monomial(cheb, grid.interval());
    Ok((coeffs, t.max(0.0), sol.iterations))
}

/// `rho = e^alpha` for a function analytic in a strip of half-width `alpha`
/// around the (normalized) interval.
pub fn bernstein_rate(strip_half_width: f64) -> f64 {
    strip_half_width.exp()
}

/// Scale-free rate proxy `rho^-degree`; no constant prefactor is applied.
pub fn bernstein_bound(strip_half_width: f64, degree: u32) -> Result<f64> {
    if !(strip_half_width > 0.0) {
        return Err(CoreError::Argument("strip half-width must be positive".into()));
    }
    Ok(bernstein_rate(strip_half_width).powi(-(degree as i32)))
}

/// Fitted polynomial plus everything needed to reproduce and verify it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyApprox {
    pub activation: ActivationKind,
    pub degree: usize,
    pub domain: (f64, f64),
    #[serde(rename = "coeffs_ascending")]
    pub coeffs: Vec<f64>,
    pub e_max_unweighted: f64,
    pub e_max_weighted: f64,
    /// Weight spec string (see [`WeightScheme::spec_string`]).
    #[serde(default = "paper_spec")]
    pub weights: String,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn paper_spec() -> String {
    "paper".into()
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

impl PolyApprox {
    /// Wraps given coefficients, measuring both errors on the dense grid.
    pub fn from_coeffs(activation: ActivationKind, coeffs: Vec<f64>, domain: (f64, f64), scheme: &WeightScheme, grid_points: usize) -> Result<Self> {
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::Argument("coefficients must be finite and non-empty".into()));
        }
        let e_max_unweighted = max_error(&coeffs, &activation, domain, VERIFY_POINTS).0;
        let e_max_weighted = max_error_weighted(&coeffs, &activation, domain, VERIFY_POINTS, Some(scheme)).0;
        Ok(Self {
            activation,
            degree: coeffs.len() - 1,
            domain,
            coeffs,
            e_max_unweighted,
            e_max_weighted,
            weights: scheme.spec_string(),
            grid_points,
        })
    }

    /// The reference degree-4 Softplus approximation on [-7, 7].
    pub fn reference_softplus() -> Self {
        Self::from_coeffs(
            ActivationKind::Softplus,
            REFERENCE_SOFTPLUS_COEFFS.to_vec(),
            DEFAULT_DOMAIN,
            &WeightScheme::paper(),
            DEFAULT_GRID_POINTS,
        )
        .expect("reference coefficients are valid")
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval_poly(&self.coeffs, x)
    }

    /// Evaluates after clamping `x` into the domain.
    pub fn eval_clamped(&self, x: f64) -> f64 {
        self.eval(x.clamp(self.domain.0, self.domain.1))
    }

    pub fn scheme(&self) -> Result<WeightScheme> {
        self.weights.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coeffs.len() != self.degree + 1 {
            return Err(CoreError::Validation(format!(
                "degree {} needs {} coefficients, found {}",
                self.degree,
                self.degree + 1,
                self.coeffs.len()
            )));
        }
        if self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::Validation("non-finite coefficient".into()));
        }
        let (lo, hi) = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CoreError::Validation(format!("invalid domain [{lo}, {hi}]")));
        }
        self.scheme()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str, location: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let p: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| CoreError::parse(format!("{location} at {}", e.path()), e.inner()))?;
        p.validate()?;
        Ok(p)
    }

    /// CSV with columns `x,f(x),p(x),abs_error`.
    pub fn error_curve_csv(&self, n_points: usize) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CoreError::Internal(e.to_string());
        w.write_record(["x", "f(x)", "p(x)", "abs_error"]).map_err(io)?;
        let (lo, hi) = self.domain;
        let n = n_points.max(2);
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let (f, p) = (self.activation.value(x), self.eval(x));
            w.write_record([x, f, p, (p - f).abs()].map(|v| v.to_string())).map_err(io)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CoreError::Internal(e.to_string()))?).map_err(|e| CoreError::Internal(e.to_string()))
    }
}

/// Outcome of the full fitting pipeline.
#[derive(Clone, Debug)]
pub struct FitReport {
    pub approx: PolyApprox,
    pub wls_coeffs: Vec<f64>,
    pub wls_objective: f64,
    pub refine: RefineOutcome,
}

/// `build_grid → wls_fit → powell_refine → max_error`.
pub fn fit_activation(kind: ActivationKind, degree: usize, domain: (f64, f64), scheme: &WeightScheme, grid_points: usize) -> Result<FitReport> {
    let grid = build_grid(domain, scheme, grid_points)?;
    let wls = wls_fit(&grid, &kind, degree)?;
    let wls_objective = weighted_objective(&wls, &grid, &kind);
    let refine = powell_refine(&wls, &grid, &kind)?;
    let approx = PolyApprox::from_coeffs(kind, refine.coeffs.clone(), domain, scheme, grid_points)?;
    Ok(FitReport {
        approx,
        wls_coeffs: wls,
        wls_objective,
        refine,
    })
}
