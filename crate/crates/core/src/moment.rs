//! Moment problem and min-norm null-control synthesis.
//!
//! Steering the first N modal pairings to zero at time `T` is equivalent to
//! the moment equations
//!
//! ```text
//! ∫₀ᵀ f(T−τ) e^{λ_n τ} dτ = m_n := (a_n / b_n) e^{λ_n T},   n = 1..N.
//! ```
//!
//! The control is sought in the span of the same exponentials,
//! `f(T−τ) = Σ c_j e^{λ_j τ}`, which gives the Gram system `G c = m` with
//! `G_{jn} = ∫₀ᵀ e^{(λ_j+λ_n)τ} dτ`.
//!
//! **Rest window.** A control that must vanish on `(T − r, T]` is the same
//! construction on the shorter active horizon `T' = T − r`, followed by free
//! decay: the first N modes stay at zero after `T'` while the unresolved high
//! modes excited by the switch-off decay like `e^{λ_n r}`.  The exponentials
//! are then anchored at the switch-off time, `f(t) = Σ c_j e^{λ_j (T' − t)}`,
//! which keeps the Gram matrix exactly the plain one for `T'`.  `r = 0` is the
//! plain construction.
//!
//! All moment integrals use the reversed time `τ = T' − t`; the conversion to
//! physical time happens only in [`ControlSignal::eval`] and when sampling.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::precision::{Ext, Precision, Scalar};
use crate::quadrature::{adaptive_gk, simpson};
use crate::spectrum::BoundaryCase;
use crate::state::SpectralCoeffs;
use serde::{Deserialize, Serialize};

/// Default hard cap on the Gram condition estimate in double precision.
///
/// Iterative refinement against an extended-precision residual still
/// converges comfortably below this level.
pub const DEFAULT_CONDITION_CAP: f64 = 1e13;

/// Boundary control `f` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Length of the trailing window `(T − rest, T]` on which `f = 0`.
    pub rest: f64,
    /// `(λ_j, c_j)` with `f(t) = Σ c_j e^{λ_j (T − rest − t)}` for `t ≤ T − rest`.
    pub coeffs: Option<Vec<(f64, f64)>>,
    /// `f` at `t_i = i·T/(sample_n − 1)`.
    pub samples: Vec<f64>,
}

impl ControlSignal {
    pub fn zero(t_final: f64, sample_n: usize) -> Self {
        ControlSignal { t_final, rest: 0.0, coeffs: Some(Vec::new()), samples: vec![0.0; sample_n.max(2)] }
    }

    /// A control known only through uniform samples of `f`.
    pub fn from_fn(t_final: f64, sample_n: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = sample_n.max(2);
        let h = t_final / (n - 1) as f64;
        ControlSignal { t_final, rest: 0.0, coeffs: None, samples: (0..n).map(|i| f(i as f64 * h)).collect() }
    }

    pub fn from_samples(t_final: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidParameter("a sampled control needs at least two samples".into()));
        }
        Ok(ControlSignal { t_final, rest: 0.0, coeffs: None, samples })
    }

    /// Exponential-sum control with a rest window, sampled on `sample_n` points.
    pub fn from_exponentials(t_final: f64, rest: f64, coeffs: Vec<(f64, f64)>, sample_n: usize) -> Self {
        let mut s = ControlSignal { t_final, rest, coeffs: Some(coeffs), samples: Vec::new() };
        let n = sample_n.max(2);
        let h = t_final / (n - 1) as f64;
        s.samples = (0..n).map(|i| s.eval(i as f64 * h)).collect();
        s
    }

    pub fn sample_n(&self) -> usize {
        self.samples.len()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.samples.len() - 1) as f64
    }

    /// Time at which the control switches off for good.
    pub fn switch_off(&self) -> f64 {
        self.t_final - self.rest
    }

    pub fn is_zero(&self) -> bool {
        let no_terms = self.coeffs.as_ref().map_or(true, |c| c.iter().all(|(_, cj)| *cj == 0.0));
        no_terms && self.samples.iter().all(|v| *v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn exp_sum(&self, coeffs: &[(f64, f64)], t: f64) -> f64 {
        let tau = self.switch_off() - t;
        coeffs.iter().map(|(l, c)| c * (l * tau).exp()).sum()
    }

    fn interp(&self, t: f64) -> f64 {
        let h = self.dt();
        let x = (t / h).clamp(0.0, (self.samples.len() - 1) as f64);
        let i = (x.floor() as usize).min(self.samples.len() - 2);
        let w = x - i as f64;
        (1.0 - w) * self.samples[i] + w * self.samples[i + 1]
    }

    /// `f(t)`: exact from the exponential sum when available, otherwise by
    /// linear interpolation of the samples.  At the switch-off time the
    /// active-window value is returned.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.coeffs {
            Some(c) if t <= self.switch_off() => self.exp_sum(c, t),
            Some(_) => 0.0,
            None => self.interp(t),
        }
    }

    /// Right limit `f(t⁺)` (differs from [`eval`](Self::eval) only at the switch-off).
    pub fn eval_right(&self, t: f64) -> f64 {
        match &self.coeffs {
            Some(c) if t < self.switch_off() => self.exp_sum(c, t),
            Some(_) => 0.0,
            None => self.interp(t),
        }
    }

    /// `‖f‖_{L²(0,T)}`.
    pub fn l2_norm(&self) -> f64 {
        match &self.coeffs {
            Some(c) if !c.is_empty() => {
                // Closed form: Σ c_i c_j ∫₀^{T'} e^{(λ_i+λ_j)τ} dτ.
                let lambdas: Vec<f64> = c.iter().map(|p| p.0).collect();
                let g = gram(&lambdas, self.switch_off());
                let cv: Vec<f64> = c.iter().map(|p| p.1).collect();
                let gc = g.mul_vec(&cv);
                cv.iter().zip(&gc).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
            }
            Some(_) => 0.0,
            None => {
                let sq: Vec<f64> = self.samples.iter().map(|v| v * v).collect();
                simpson(&sq, self.dt()).max(0.0).sqrt()
            }
        }
    }
}

/// The moment problem for one initial datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSystem {
    pub case: BoundaryCase,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Rest window `r`: the control vanishes on `(T − r, T]`.
    pub rest: f64,
    pub lambdas: Vec<f64>,
    pub b: Vec<f64>,
    /// `m_n = (a_n / b_n) e^{λ_n T'}` with the active horizon `T' = T − r`.
    pub targets: Vec<f64>,
    pub a: Vec<f64>,
}

impl MomentSystem {
    #[allow(non_snake_case)]
    pub fn N(&self) -> usize {
        self.lambdas.len()
    }

    /// Length `T' = T − rest` of the window on which the control acts.
    pub fn active_horizon(&self) -> f64 {
        self.t_final - self.rest
    }

    /// Same system with every input coefficient negated (a deliberately wrong
    /// convention, for exercising the verification harness).
    pub fn with_flipped_b(mut self) -> Self {
        for (b, m) in self.b.iter_mut().zip(self.targets.iter_mut()) {
            *b = -*b;
            *m = -*m;
        }
        self
    }
}

/// Moment system with no rest window.
pub fn assemble(case: BoundaryCase, a: &SpectralCoeffs, t_final: f64) -> Result<MomentSystem> {
    assemble_with_rest(case, a, t_final, 0.0)
}

/// Moment system whose control must vanish on `(T − rest, T]`.
pub fn assemble_with_rest(case: BoundaryCase, a: &SpectralCoeffs, t_final: f64, rest: f64) -> Result<MomentSystem> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidParameter(format!("control horizon T must be positive, got {t_final}")));
    }
    if !(0.0..t_final).contains(&rest) {
        return Err(Error::InvalidParameter(format!("rest window {rest} must lie in [0, T)")));
    }
    if a.case != case {
        return Err(Error::InvalidParameter("coefficients belong to the other boundary case".into()));
    }
    let lambdas: Vec<f64> = a.modes.iter().map(|p| p.lambda).collect();
    let b: Vec<f64> = a.modes.iter().map(|p| p.b).collect();
    let targets = a
        .a
        .iter()
        .zip(&lambdas)
        .zip(&b)
        .map(|((an, l), bn)| an / bn * (l * (t_final - rest)).exp())
        .collect();
    Ok(MomentSystem { case, t_final, rest, lambdas, b, targets, a: a.a.clone() })
}

/// `G_{jn} = ∫_{t0}^{T} e^{(λ_j+λ_n)τ} dτ` in the arithmetic chosen by `lift`.
pub fn gram_window<S: Scalar>(lambdas: &[f64], t0: f64, t_final: f64, lift: impl Fn(f64) -> S) -> Matrix<S> {
    let n = lambdas.len();
    let len = lift(t_final) - lift(t0);
    let t0s = lift(t0);
    let mut cache: Vec<Option<S>> = vec![None; n * n];
    Matrix::from_fn(n, |i, j| {
        let (p, q) = if i <= j { (i, j) } else { (j, i) };
        if let Some(v) = &cache[p * n + q] {
            return v.clone();
        }
        let s = lift(lambdas[p]) + lift(lambdas[q]);
        let v = (s.clone() * t0s.clone()).exp() * (s.clone() * len.clone()).exp_m1() / s;
        cache[p * n + q] = Some(v.clone());
        v
    })
}

/// Gram matrix over `[0, T]`: `G_{jn} = (e^{(λ_j+λ_n)T} − 1)/(λ_j+λ_n)`.
pub fn gram(lambdas: &[f64], t_final: f64) -> Matrix<f64> {
    gram_window(lambdas, 0.0, t_final, |x| x)
}

/// Outcome of a Gram solve.
struct GramSolve {
    coeffs: Vec<f64>,
    coeffs_ext: Option<Vec<Ext>>,
    condition: f64,
    /// `G c − rhs`, evaluated in extended precision for the returned coefficients.
    residual: Vec<f64>,
}

fn solve_gram(lambdas: &[f64], horizon: f64, rhs: &[f64], precision: Precision, cond_cap: f64) -> Result<GramSolve> {
    let g_ext = gram_window(lambdas, 0.0, horizon, Ext::from_f64);
    let rhs_ext: Vec<Ext> = rhs.iter().map(|v| Ext::from_f64(*v)).collect();
    match precision {
        Precision::Double => {
            // The estimate comes from the extended factorization: in f64 the
            // factorization itself breaks down long before the cap is reached
            // for very short horizons.
            let condition = Cholesky::factor(&g_ext)?.condition_estimate();
            if condition > cond_cap {
                return Err(Error::IllConditioned { estimate: condition, cap: cond_cap });
            }
            let g = g_ext.map(|v| v.to_f64());
            let ch = Cholesky::factor(&g)?;
            let mut c = ch.solve(rhs);
            let mut residual = ext_residual(&g_ext, &c, &rhs_ext);
            // Iterative refinement with the residual formed in extended precision.
            for _ in 0..4 {
                let r: Vec<f64> = residual.iter().map(|v| -v).collect();
                let dc = ch.solve(&r);
                let trial: Vec<f64> = c.iter().zip(&dc).map(|(a, b)| a + b).collect();
                let trial_res = ext_residual(&g_ext, &trial, &rhs_ext);
                if max_abs(&trial_res) < max_abs(&residual) {
                    c = trial;
                    residual = trial_res;
                } else {
                    break;
                }
            }
            Ok(GramSolve { coeffs: c, coeffs_ext: None, condition, residual })
        }
        Precision::Extended => {
            let ch = Cholesky::factor(&g_ext)?;
            let condition = ch.condition_estimate();
            let c = ch.solve(&rhs_ext);
            let gc = g_ext.mul_vec(&c);
            let residual = gc.iter().zip(&rhs_ext).map(|(a, b)| (a.clone() - b.clone()).to_f64()).collect();
            Ok(GramSolve { coeffs: c.iter().map(|v| v.to_f64()).collect(), coeffs_ext: Some(c), condition, residual })
        }
    }
}

/// `G c − rhs` for the Gram matrix of `lambdas` on `[0, horizon]`, formed in
/// extended precision so that it measures `c` itself rather than the
/// arithmetic used to check it.
pub fn gram_residual(lambdas: &[f64], horizon: f64, coeffs: &[f64], rhs: &[f64]) -> Vec<f64> {
    let g = gram_window(lambdas, 0.0, horizon, Ext::from_f64);
    let rhs: Vec<Ext> = rhs.iter().map(|v| Ext::from_f64(*v)).collect();
    ext_residual(&g, coeffs, &rhs)
}

fn ext_residual(g: &Matrix<Ext>, c: &[f64], rhs: &[Ext]) -> Vec<f64> {
    let ce: Vec<Ext> = c.iter().map(|v| Ext::from_f64(*v)).collect();
    g.mul_vec(&ce).iter().zip(rhs).map(|(a, b)| (a.clone() - b.clone()).to_f64()).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// One member `θ_j(τ) = Σ_n coeffs[n] e^{λ_n τ}` of the biorthogonal family.
#[derive(Debug, Clone)]
pub struct Biorthogonal {
    pub j: usize,
    pub lambdas: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Extended-precision coefficients when solved in extended mode.
    pub coeffs_ext: Option<Vec<Ext>>,
    /// `max_n |∫θ_j e^{λ_n τ} dτ − δ_{jn}|` for the stored coefficients.
    pub residual: f64,
    pub condition: f64,
    /// Set when the condition estimate exceeds the cap; the residual then
    /// tells how much of the result is usable.
    pub degraded: bool,
    /// `‖θ_j‖_{L²(0,T)} = √((G⁻¹)_{jj})`.
    pub norm: f64,
}

/// The min-norm biorthogonal function `θ_j` (1-based `j`) on `[0, T]`.
///
/// Never refuses for conditioning: above `cond_cap` the result is flagged
/// `degraded` instead.
pub fn biorthogonal(lambdas: &[f64], t_final: f64, j: usize, precision: Precision, cond_cap: f64) -> Result<Biorthogonal> {
    let n = lambdas.len();
    if j == 0 || j > n {
        return Err(Error::InvalidParameter(format!("biorthogonal index {j} outside 1..={n}")));
    }
    let mut e = vec![0.0; n];
    e[j - 1] = 1.0;
    let sol = solve_gram(lambdas, t_final, &e, precision, f64::INFINITY)?;
    // Residual of the coefficients actually returned: f64 in double mode,
    // extended in extended mode.
    let residual = max_abs(&sol.residual);
    let norm = sol.coeffs[j - 1].max(0.0).sqrt();
    Ok(Biorthogonal {
        j,
        lambdas: lambdas.to_vec(),
        coeffs: sol.coeffs,
        coeffs_ext: sol.coeffs_ext,
        residual,
        condition: sol.condition,
        degraded: sol.condition > cond_cap,
        norm,
    })
}

/// Independent check of biorthogonality by adaptive quadrature of
/// `θ_j(τ) e^{λ_n τ}` in double precision.
pub fn biorthogonality_by_quadrature(theta: &Biorthogonal, t_final: f64) -> Vec<f64> {
    theta
        .lambdas
        .iter()
        .enumerate()
        .map(|(n, ln)| {
            let integrand = |tau: f64| {
                theta.lambdas.iter().zip(&theta.coeffs).map(|(l, c)| c * (l * tau).exp()).sum::<f64>() * (ln * tau).exp()
            };
            let v = adaptive_gk(integrand, 0.0, t_final, 1e-14, 2000);
            v - if n + 1 == theta.j { 1.0 } else { 0.0 }
        })
        .collect()
}

/// Options for [`solve_min_norm`].
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub precision: Precision,
    /// Double-precision solves refuse Gram matrices whose condition estimate exceeds this.
    pub condition_cap: f64,
    /// Number of uniform samples stored with the control.
    pub sample_n: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { precision: Precision::Double, condition_cap: DEFAULT_CONDITION_CAP, sample_n: 1001 }
    }
}

/// A synthesized control with its diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ControlSynthesis {
    pub signal: ControlSignal,
    pub condition: f64,
    /// `∫ f(T−τ) e^{λ_n τ} dτ − m_n` for the stored coefficients.
    pub residuals: Vec<f64>,
    pub precision: Precision,
}

/// Min-norm solution of the moment problem in the span of the exponentials.
pub fn solve_min_norm(sys: &MomentSystem, opts: SolveOptions) -> Result<ControlSynthesis> {
    if sys.targets.iter().all(|m| *m == 0.0) {
        let coeffs = sys.lambdas.iter().map(|l| (*l, 0.0)).collect();
        return Ok(ControlSynthesis {
            signal: ControlSignal::from_exponentials(sys.t_final, sys.rest, coeffs, opts.sample_n),
            condition: 1.0,
            residuals: vec![0.0; sys.N()],
            precision: opts.precision,
        });
    }
    if let Some((i, _)) = sys.targets.iter().enumerate().find(|(_, m)| !m.is_finite()) {
        return Err(Error::InvalidParameter(format!("moment target {} is not finite", i + 1)));
    }
    let horizon = sys.active_horizon();
    let sol = solve_gram(&sys.lambdas, horizon, &sys.targets, opts.precision, opts.condition_cap)?;
    let coeffs = sys.lambdas.iter().cloned().zip(sol.coeffs.iter().cloned()).collect();
    let signal = ControlSignal::from_exponentials(sys.t_final, sys.rest, coeffs, opts.sample_n);
    // Residuals reported for the f64 coefficients actually stored in the signal.
    let g_ext = gram_window(&sys.lambdas, 0.0, horizon, Ext::from_f64);
    let m_ext: Vec<Ext> = sys.targets.iter().map(|v| Ext::from_f64(*v)).collect();
    let residuals = ext_residual(&g_ext, &sol.coeffs, &m_ext);
    Ok(ControlSynthesis { signal, condition: sol.condition, residuals, precision: opts.precision })
}

/// Moment residuals of a control computed by adaptive quadrature of
/// `f(T'−τ) e^{λ_n τ}` over `[0, T']` (independent of the Gram closed form).
pub fn moment_residuals_by_quadrature(sys: &MomentSystem, f: &ControlSignal) -> Vec<f64> {
    let t = sys.active_horizon();
    sys.lambdas
        .iter()
        .zip(&sys.targets)
        .map(|(l, m)| {
            let v = adaptive_gk(|tau| f.eval(t - tau) * (l * tau).exp(), 0.0, t, 1e-13 * (1.0 + m.abs()), 4000);
            v - m
        })
        .collect()
}

/// Least-squares fit `log|m_n| ≈ log K − δ n²`.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    #[serde(rename = "K")]
    pub k: f64,
    pub delta: f64,
    pub ok: bool,
    /// Number of targets used in the fit.
    pub used: usize,
    pub note: Option<String>,
}

/// Check super-geometric decay of the moment targets.
///
/// Modes whose pairing `a_n` is at rounding level relative to the largest
/// pairing (a projection that vanishes by symmetry, say) carry no decay
/// information and are left out of the fit.
pub fn decay_check(sys: &MomentSystem) -> DecayFit {
    let scale = sys.a.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let pts: Vec<(f64, f64)> = sys
        .targets
        .iter()
        .zip(&sys.a)
        .enumerate()
        .filter(|(_, (m, a))| **m != 0.0 && m.is_finite() && a.abs() > 1e-12 * scale)
        .map(|(i, (m, _))| (i, m))
        .map(|(i, m)| (((i + 1) * (i + 1)) as f64, m.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return DecayFit {
            k: pts.first().map_or(0.0, |p| p.1.exp()),
            delta: 0.0,
            ok: true,
            used: pts.len(),
            note: Some("fewer than two nonzero targets; decay fit is degenerate".into()),
        };
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let delta = -slope;
    let k = (my - slope * mx).exp();
    DecayFit { k, delta, ok: delta > 0.0, used: pts.len(), note: None }
}

/// Least-squares fit `log‖θ_j‖ ≈ log M₁ + M₂ j` with its coefficient of determination.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthFit {
    pub m1: f64,
    pub m2: f64,
    pub r_squared: f64,
}

pub fn log_linear_fit(values: &[f64]) -> GrowthFit {
    let pts: Vec<(f64, f64)> = values.iter().enumerate().map(|(i, v)| ((i + 1) as f64, v.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    GrowthFit { m1: (my - slope * mx).exp(), m2: slope, r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 } }
}
