//! Eigenvalues and eigenvectors of the hybrid operator.
//!
//! Both boundary cases have an explicitly known eigenbasis up to the roots of
//! a transcendental characteristic equation:
//!
//! * **Dirichlet** (`v(1) = 0`): the "even" modes `λ = −(kπ)²` with
//!   eigenvector `(sin kπx, sin kπx, 0)` do not see the point mass; the "odd"
//!   modes have `λ = −μ²` where `μ` solves `μ = 2 cot μ`.
//! * **Neumann** (`v'(1) = 0`): every mode is transcendental with
//!   `μ = 2 cot 2μ`.
//!
//! Roots are located inside a bracket on which the characteristic function is
//! strictly decreasing from `+∞` to `−∞`.  The solver works in the offset
//! variable `ε = μ − (left end of bracket)`, so the cotangent is evaluated at a
//! small argument without range reduction and the root is resolved to the
//! last bit of `μ`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

/// Which boundary condition carries the control at `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCase {
    /// `v(t, 1) = f(t)`.
    Dirichlet,
    /// `v'(t, 1) = f(t)`.
    Neumann,
}

impl BoundaryCase {
    pub const ALL: [BoundaryCase; 2] = [BoundaryCase::Dirichlet, BoundaryCase::Neumann];

    /// Period of the cotangent in the characteristic equation (as a function of μ).
    fn period(self) -> f64 {
        match self {
            BoundaryCase::Dirichlet => PI,
            BoundaryCase::Neumann => PI / 2.0,
        }
    }

    fn freq(self) -> f64 {
        match self {
            BoundaryCase::Dirichlet => 1.0,
            BoundaryCase::Neumann => 2.0,
        }
    }
}

impl fmt::Display for BoundaryCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryCase::Dirichlet => "dirichlet",
            BoundaryCase::Neumann => "neumann",
        })
    }
}

impl std::str::FromStr for BoundaryCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCase::Dirichlet),
            "neumann" => Ok(BoundaryCase::Neumann),
            other => Err(format!("unknown boundary case '{other}' (expected dirichlet or neumann)")),
        }
    }
}

/// Family a mode belongs to, with its index `k` inside the family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeKind {
    DirichletEven(usize),
    DirichletOdd(usize),
    NeumannOdd(usize),
    NeumannEven(usize),
}

impl ModeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModeKind::DirichletEven(_) => "DirichletEven",
            ModeKind::DirichletOdd(_) => "DirichletOdd",
            ModeKind::NeumannOdd(_) => "NeumannOdd",
            ModeKind::NeumannEven(_) => "NeumannEven",
        }
    }
}

/// One eigenvalue with everything downstream code needs about its eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// 1-based position in the sequence sorted by decreasing `lambda`.
    pub n: usize,
    /// Root of the characteristic equation; `None` for Dirichlet even modes.
    pub mu: Option<f64>,
    pub lambda: f64,
    pub kind: ModeKind,
    /// Squared ℋ-norm of the eigenvector returned by [`eval_eigenfunction`].
    pub norm_sq: f64,
    /// Input coefficient: how strongly the boundary control drives this mode.
    pub b: f64,
}

impl EigenPair {
    /// The frequency entering the sines and cosines (`kπ` for Dirichlet even modes).
    pub fn frequency(&self) -> f64 {
        match (self.kind, self.mu) {
            (ModeKind::DirichletEven(k), _) => k as f64 * PI,
            (_, Some(mu)) => mu,
            (_, None) => unreachable!("transcendental modes always carry mu"),
        }
    }
}

const POLE_TOL: f64 = 1e-300;

/// Characteristic function: `2 cot μ − μ` (Dirichlet) or `2 cot 2μ − μ` (Neumann).
pub fn characteristic_value(case: BoundaryCase, mu: f64) -> Result<f64> {
    let arg = case.freq() * mu;
    let (s, c) = arg.sin_cos();
    if !(mu > 0.0) || s.abs() < 1e-12 * (1.0 + arg.abs()) || s.abs() < POLE_TOL {
        return Err(Error::NearPole { mu });
    }
    Ok(2.0 * c / s - mu)
}

/// Open interval containing exactly one root, the k-th one.
pub fn root_bracket(case: BoundaryCase, k: usize) -> (f64, f64) {
    let p = case.period();
    ((k as f64 - 1.0) * p, k as f64 * p)
}

/// Characteristic function and derivative in the offset variable `ε = μ − base`.
fn offset_eval(case: BoundaryCase, base: f64, eps: f64) -> (f64, f64) {
    let w = case.freq();
    let (s, c) = (w * eps).sin_cos();
    let f = 2.0 * c / s - base - eps;
    let df = -2.0 * w / (s * s) - 1.0;
    (f, df)
}

const MAX_ITER: usize = 400;

/// The unique root of the characteristic equation inside `root_bracket(case, k)`.
///
/// Safeguarded Newton: every Newton step that would leave the current
/// bisection bracket is replaced by a bisection step.  Terminates once
/// `|F(μ)| ≤ tol·(1 + μ)` or the bracket has shrunk to adjacent floats.
pub fn find_root(case: BoundaryCase, k: usize, tol: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("root index k must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let (lo_mu, hi_mu) = root_bracket(case, k);
    let base = lo_mu;
    let width = hi_mu - lo_mu;
    let mut lo = 1e-9_f64.min(width * 1e-9);
    let mut hi = width - 1e-9;
    // F is decreasing: F(lo) > 0 > F(hi).
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let (f, df) = offset_eval(case, base, x);
        let mu = base + x;
        if f.abs() <= tol * (1.0 + mu) {
            return Ok(mu);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
            return Ok(base + 0.5 * (lo + hi));
        }
        let newton = x - f / df;
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::NoConvergence { k, lo: base + lo, hi: base + hi, last: base + x })
}

/// Root tolerance used when building eigenpairs.
pub const ROOT_TOL: f64 = 1e-13;

fn neumann_norm_sq(mu: f64, odd: bool) -> f64 {
    let s2 = (2.0 * mu).sin() / (4.0 * mu);
    let left = 0.5 - s2; // ∫ sin²(μ(1+x)) over (−1, 0)
    let right = 0.5 + s2; // ∫ cos²(μ(x−1)) over (0, 1)
    if odd {
        let t = mu.tan();
        2.0 * (left + t * t * right + mu.sin().powi(2))
    } else {
        let ct = 1.0 / mu.tan();
        2.0 * (ct * ct * left + right + mu.cos().powi(2))
    }
}

/// The n-th eigenpair (1-based) in decreasing order of λ.
pub fn eigenpair(case: BoundaryCase, n: usize) -> Result<EigenPair> {
    if n == 0 {
        return Err(Error::InvalidParameter("mode index n must be at least 1".into()));
    }
    match case {
        BoundaryCase::Dirichlet => {
            if n % 2 == 0 {
                let k = n / 2;
                let w = k as f64 * PI;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                Ok(EigenPair {
                    n,
                    mu: None,
                    lambda: -w * w,
                    kind: ModeKind::DirichletEven(k),
                    norm_sq: 1.0,
                    b: sign * w,
                })
            } else {
                let k = (n + 1) / 2;
                let mu = find_root(case, k, ROOT_TOL)?;
                let norm_sq = 1.0 - (2.0 * mu).sin() / (2.0 * mu) + mu.sin().powi(2);
                Ok(EigenPair {
                    n,
                    mu: Some(mu),
                    lambda: -mu * mu,
                    kind: ModeKind::DirichletOdd(k),
                    norm_sq,
                    b: -mu,
                })
            }
        }
        BoundaryCase::Neumann => {
            let mu = find_root(case, n, ROOT_TOL)?;
            let odd = n % 2 == 1;
            let (kind, b) = if odd {
                (ModeKind::NeumannOdd((n + 1) / 2), -SQRT_2 * mu.tan())
            } else {
                (ModeKind::NeumannEven(n / 2), -SQRT_2)
            };
            Ok(EigenPair { n, mu: Some(mu), lambda: -mu * mu, kind, norm_sq: neumann_norm_sq(mu, odd), b })
        }
    }
}

/// The first `n_max` eigenpairs.
pub fn eigenpairs(case: BoundaryCase, n_max: usize) -> Result<Vec<EigenPair>> {
    (1..=n_max).map(|n| eigenpair(case, n)).collect()
}

/// Eigenvector components `(U(x), V(x), Z)`.
///
/// `U` is meaningful on `[−1, 0]`, `V` on `[0, 1]`; both closed forms are
/// evaluated at any `x` so callers can sample them on their own meshes.
pub fn eval_eigenfunction(pair: &EigenPair, x: f64) -> (f64, f64, f64) {
    let w = pair.frequency();
    match pair.kind {
        ModeKind::DirichletEven(_) => {
            let s = (w * x).sin();
            (s, s, 0.0)
        }
        ModeKind::DirichletOdd(_) => ((w * (1.0 + x)).sin(), (w * (1.0 - x)).sin(), w.sin()),
        ModeKind::NeumannOdd(_) => (
            SQRT_2 * (w * (1.0 + x)).sin(),
            SQRT_2 * w.tan() * (w * (x - 1.0)).cos(),
            SQRT_2 * w.sin(),
        ),
        ModeKind::NeumannEven(_) => {
            let ct = 1.0 / w.tan();
            (SQRT_2 * ct * (w * (1.0 + x)).sin(), SQRT_2 * (w * (x - 1.0)).cos(), SQRT_2 * w.cos())
        }
    }
}

/// Derivatives `(U'(x), V'(x))` of the eigenvector components.
pub fn eval_eigenfunction_slope(pair: &EigenPair, x: f64) -> (f64, f64) {
    let w = pair.frequency();
    match pair.kind {
        ModeKind::DirichletEven(_) => {
            let c = w * (w * x).cos();
            (c, c)
        }
        ModeKind::DirichletOdd(_) => (w * (w * (1.0 + x)).cos(), -w * (w * (1.0 - x)).cos()),
        ModeKind::NeumannOdd(_) => (
            SQRT_2 * w * (w * (1.0 + x)).cos(),
            -SQRT_2 * w * w.tan() * (w * (x - 1.0)).sin(),
        ),
        ModeKind::NeumannEven(_) => {
            let ct = 1.0 / w.tan();
            (SQRT_2 * w * ct * (w * (1.0 + x)).cos(), -SQRT_2 * w * (w * (x - 1.0)).sin())
        }
    }
}

/// The boundary observation of a mode at `x = 1`: `V'(1)` for Dirichlet,
/// `V(1)` for Neumann.
///
/// The input coefficient is tied to it by `b = V'(1)` (Dirichlet) and
/// `b = −V(1)` (Neumann); see [`crate::state::evolve_controlled`] for the
/// sign that goes with this convention.
pub fn boundary_trace(pair: &EigenPair, case: BoundaryCase) -> f64 {
    match case {
        BoundaryCase::Dirichlet => eval_eigenfunction_slope(pair, 1.0).1,
        BoundaryCase::Neumann => eval_eigenfunction(pair, 1.0).1,
    }
}

/// Leading correction constant `c` in `μ_k ≈ (k−1)·period + c/(kπ)`.
pub const LEADING_CORRECTION: f64 = 2.0;

/// `μ_k − ((k−1)·period + c/(kπ))` for an explicit correction constant `c`.
pub fn asymptotic_deviation_with(case: BoundaryCase, k: usize, c: f64) -> Result<f64> {
    let mu = find_root(case, k, ROOT_TOL)?;
    let (lo, _) = root_bracket(case, k);
    Ok(mu - (lo + c / (k as f64 * PI)))
}

/// Deviation of the k-th root from its large-k expansion
/// `(k−1)π + 2/(kπ)` (Dirichlet) or `(k−1)π/2 + 2/(kπ)` (Neumann).
pub fn asymptotic_deviation(case: BoundaryCase, k: usize) -> Result<f64> {
    asymptotic_deviation_with(case, k, LEADING_CORRECTION)
}

/// Result of fitting the leading correction constant against computed roots.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectionFit {
    pub case: BoundaryCase,
    pub k_min: usize,
    pub k_max: usize,
    /// Least-squares `c` in `μ_k − (k−1)·period ≈ c/(kπ)`.
    pub fitted_constant: f64,
    /// `max k²·|deviation|` using the constant 1.
    pub max_scaled_dev_c1: f64,
    /// `max k²·|deviation|` using the constant 2.
    pub max_scaled_dev_c2: f64,
    /// Whichever of 1 or 2 gives a bounded `k²·|deviation|` (the smaller).
    pub supported_constant: f64,
}

/// Fit the correction constant over `k_min..=k_max`.
pub fn correction_fit(case: BoundaryCase, k_min: usize, k_max: usize) -> Result<CorrectionFit> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut m1 = 0.0_f64;
    let mut m2 = 0.0_f64;
    for k in k_min..=k_max {
        let mu = find_root(case, k, ROOT_TOL)?;
        let (lo, _) = root_bracket(case, k);
        let g = 1.0 / (k as f64 * PI);
        let off = mu - lo;
        num += off * g;
        den += g * g;
        let k2 = (k * k) as f64;
        m1 = m1.max(k2 * (off - g).abs());
        m2 = m2.max(k2 * (off - 2.0 * g).abs());
    }
    Ok(CorrectionFit {
        case,
        k_min,
        k_max,
        fitted_constant: num / den,
        max_scaled_dev_c1: m1,
        max_scaled_dev_c2: m2,
        supported_constant: if m2 <= m1 { 2.0 } else { 1.0 },
    })
}

/// Consecutive gaps `λ_n − λ_{n+1} > 0` for `n = 1..n_max−1`.
pub fn gap_table(case: BoundaryCase, n_max: usize) -> Result<Vec<(usize, f64)>> {
    let pairs = eigenpairs(case, n_max)?;
    Ok(pairs.windows(2).map(|w| (w[0].n, w[0].lambda - w[1].lambda)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Plain bisection on F in μ, the oracle of record.
    fn bisect(case: BoundaryCase, k: usize) -> f64 {
        let (a, b) = root_bracket(case, k);
        let (mut lo, mut hi) = (a + 1e-9, b - 1e-9);
        while hi - lo > 1e-13 * (1.0 + hi) {
            let mid = 0.5 * (lo + hi);
            let w = case.freq() * mid;
            let f = 2.0 / w.tan() - mid;
            if f > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
            if mid == lo && mid == hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn characteristic_value_trivial_points() {
        let d = characteristic_value(BoundaryCase::Dirichlet, PI / 2.0).unwrap();
        assert!((d + PI / 2.0).abs() < 1e-15);
        let n = characteristic_value(BoundaryCase::Neumann, PI / 4.0).unwrap();
        assert!((n + PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn characteristic_value_rejects_poles() {
        assert!(matches!(characteristic_value(BoundaryCase::Dirichlet, PI), Err(Error::NearPole { .. })));
        assert!(matches!(characteristic_value(BoundaryCase::Neumann, PI / 2.0), Err(Error::NearPole { .. })));
    }

    #[test]
    fn brackets() {
        assert_eq!(root_bracket(BoundaryCase::Dirichlet, 1), (0.0, PI));
        assert_eq!(root_bracket(BoundaryCase::Neumann, 2), (PI / 2.0, PI));
        assert_eq!(root_bracket(BoundaryCase::Dirichlet, 3), (2.0 * PI, 3.0 * PI));
    }

    #[test]
    fn first_roots_match_bisection() {
        let mu = find_root(BoundaryCase::Dirichlet, 1, 1e-12).unwrap();
        assert!((mu - bisect(BoundaryCase::Dirichlet, 1)).abs() < 1e-11);
        assert!((mu - 1.0769).abs() < 1e-4);
        assert!(characteristic_value(BoundaryCase::Dirichlet, mu).unwrap().abs() < 1e-10);
        let nu = find_root(BoundaryCase::Neumann, 1, 1e-12).unwrap();
        assert!((nu - bisect(BoundaryCase::Neumann, 1)).abs() < 1e-11);
        assert!(nu > 0.0 && nu < PI / 2.0);
        assert!((nu - 0.6323).abs() < 1e-4, "{nu}");
    }

    #[test]
    fn fiftieth_dirichlet_root_near_asymptote() {
        let mu = find_root(BoundaryCase::Dirichlet, 50, 1e-12).unwrap();
        assert!((mu - (49.0 * PI + 2.0 / (50.0 * PI))).abs() < 1e-3);
    }

    #[test]
    fn find_root_is_deterministic() {
        for k in [1, 7, 123] {
            let a = find_root(BoundaryCase::Neumann, k, 1e-12).unwrap();
            let b = find_root(BoundaryCase::Neumann, k, 1e-12).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dirichlet_examples() {
        let p2 = eigenpair(BoundaryCase::Dirichlet, 2).unwrap();
        assert_eq!(p2.lambda, -PI * PI);
        assert_eq!(p2.norm_sq, 1.0);
        assert_eq!(p2.b, -PI);
        let p1 = eigenpair(BoundaryCase::Dirichlet, 1).unwrap();
        let oracle = bisect(BoundaryCase::Dirichlet, 1);
        assert!((p1.lambda + oracle * oracle).abs() < 1e-10);
        assert!((p1.lambda + 1.160).abs() < 1e-3);
        let p4 = eigenpair(BoundaryCase::Dirichlet, 4).unwrap();
        assert_eq!(p4.lambda, -4.0 * PI * PI);
    }

    #[test]
    fn eigenfunction_boundary_values() {
        for case in BoundaryCase::ALL {
            for n in 1..=30 {
                let p = eigenpair(case, n).unwrap();
                let (u, _, _) = eval_eigenfunction(&p, -1.0);
                assert!(u.abs() < 1e-12, "{case} n={n}: U(-1) = {u}");
                let (u0, v0, z) = eval_eigenfunction(&p, 0.0);
                assert!((u0 - z).abs() < 1e-12 && (v0 - z).abs() < 1e-12);
                match case {
                    BoundaryCase::Dirichlet => assert!(eval_eigenfunction(&p, 1.0).1.abs() < 1e-12),
                    BoundaryCase::Neumann => assert!(eval_eigenfunction_slope(&p, 1.0).1.abs() < 1e-12),
                }
                // Point-mass equation: λ Z = V'(0) − U'(0).
                let (du, dv) = eval_eigenfunction_slope(&p, 0.0);
                assert!((p.lambda * z - (dv - du)).abs() < 1e-9 * (1.0 + p.lambda.abs()));
            }
        }
        let even = eigenpair(BoundaryCase::Dirichlet, 6).unwrap();
        assert_eq!(eval_eigenfunction(&even, 0.0), (0.0, 0.0, 0.0));
    }

    #[test]
    fn b_matches_boundary_trace() {
        for n in 1..=12 {
            let d = eigenpair(BoundaryCase::Dirichlet, n).unwrap();
            assert!((d.b - boundary_trace(&d, BoundaryCase::Dirichlet)).abs() < 1e-12 * (1.0 + d.b.abs()));
            let m = eigenpair(BoundaryCase::Neumann, n).unwrap();
            assert!((m.b + boundary_trace(&m, BoundaryCase::Neumann)).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_sq_matches_quadrature() {
        // Independent oracle: fine midpoint rule on the squared components.
        for case in BoundaryCase::ALL {
            for n in [1, 2, 3, 8] {
                let p = eigenpair(case, n).unwrap();
                let m = 200_000;
                let h = 1.0 / m as f64;
                let mut s = 0.0;
                for i in 0..m {
                    let xl = -1.0 + (i as f64 + 0.5) * h;
                    let xr = (i as f64 + 0.5) * h;
                    s += eval_eigenfunction(&p, xl).0.powi(2) + eval_eigenfunction(&p, xr).1.powi(2);
                }
                let z = eval_eigenfunction(&p, 0.0).2;
                let q = s * h + z * z;
                assert!((q - p.norm_sq).abs() < 1e-8 * p.norm_sq, "{case} n={n}: {q} vs {}", p.norm_sq);
            }
        }
    }

    #[test]
    fn gaps_positive_and_first_gap() {
        let g = gap_table(BoundaryCase::Dirichlet, 6).unwrap();
        let mu1 = bisect(BoundaryCase::Dirichlet, 1);
        assert_eq!(g.len(), 5);
        assert!((g[0].1 - (PI * PI - mu1 * mu1)).abs() < 1e-9);
        assert!((g[0].1 - 8.71).abs() < 0.01);
        assert!(g.iter().all(|&(_, d)| d > 0.0));
    }

    #[test]
    fn neumann_correction_constant_is_two() {
        let fit = correction_fit(BoundaryCase::Neumann, 10, 50).unwrap();
        // The O(1/k²) remainder biases a fit over small k slightly upwards.
        assert!((fit.fitted_constant - 2.0).abs() < 0.2, "{fit:?}");
        assert!(fit.max_scaled_dev_c2 < 1.0 && fit.max_scaled_dev_c1 > 10.0, "{fit:?}");
        assert_eq!(fit.supported_constant, 2.0);
    }

    proptest! {
        #[test]
        fn roots_lie_strictly_inside_brackets(k in 1usize..=200, neumann in any::<bool>()) {
            let case = if neumann { BoundaryCase::Neumann } else { BoundaryCase::Dirichlet };
            let (lo, hi) = root_bracket(case, k);
            let mu = find_root(case, k, 1e-10).unwrap();
            prop_assert!(lo < mu && mu < hi);
            let f = characteristic_value(case, mu).unwrap();
            prop_assert!(f.abs() <= 1e-10 * (1.0 + mu));
        }

        #[test]
        fn characteristic_sign_change(k in 1usize..=200, neumann in any::<bool>()) {
            let case = if neumann { BoundaryCase::Neumann } else { BoundaryCase::Dirichlet };
            let (lo, hi) = root_bracket(case, k);
            let d = 1e-6 * case.period();
            prop_assert!(characteristic_value(case, lo + d).unwrap() > 0.0);
            prop_assert!(characteristic_value(case, hi - d).unwrap() < 0.0);
        }
    }
}
