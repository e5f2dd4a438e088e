//! Grid states of the hybrid system and their modal representation.
//!
//! A [`HybridState`] samples `u` on `[−1, 0]` and `v` on `[0, 1]` with
//! `mesh_n` intervals each (endpoints included) and carries the point-mass
//! temperature `z`.  Inner products use composite Simpson quadrature.
//!
//! Modal coefficients follow the un-normalized pairing
//! `a_n = ⟨y, φ_n⟩_ℋ`, so `y = Σ (a_n / ‖φ_n‖²) φ_n`.

use crate::error::{Error, Result};
use crate::moment::ControlSignal;
use crate::quadrature::{adaptive_gk, panel_gk, simpson};
use crate::spectrum::{eigenpairs, eval_eigenfunction, BoundaryCase, EigenPair};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sign in the modal Duhamel formula
/// `a_n(T) = e^{λ_n T} a_n(0) + σ b_n ∫₀ᵀ e^{λ_n (T−s)} f(s) ds`.
///
/// With `b = V'(1)` (Dirichlet) and `b = −V(1)` (Neumann) the integration by
/// parts `d/dt ⟨y, φ_n⟩ = λ_n ⟨y, φ_n⟩ + v'(1)V_n(1) − v(1)V_n'(1)` gives
/// `σ = −1` in both cases.  [`crate::verify::calibrate_duhamel_sign`]
/// re-derives it against the finite-difference solver.
pub const DUHAMEL_SIGN: f64 = -1.0;

/// Element of ℋ = L²(−1,0) × L²(0,1) × ℝ sampled on a uniform mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    /// `u(x_i)` at `x_i = −1 + i/mesh_n`, `i = 0..=mesh_n`.
    pub u: Vec<f64>,
    /// `v(x_i)` at `x_i = i/mesh_n`, `i = 0..=mesh_n`.
    pub v: Vec<f64>,
    pub z: f64,
    pub mesh_n: usize,
}

impl HybridState {
    pub fn zeros(mesh_n: usize) -> Self {
        HybridState { u: vec![0.0; mesh_n + 1], v: vec![0.0; mesh_n + 1], z: 0.0, mesh_n }
    }

    /// Sample `u` and `v` from closures of `x`, with point-mass value `z`.
    pub fn from_fn(mesh_n: usize, fu: impl Fn(f64) -> f64, fv: impl Fn(f64) -> f64, z: f64) -> Self {
        let h = 1.0 / mesh_n as f64;
        HybridState {
            u: (0..=mesh_n).map(|i| fu(-1.0 + i as f64 * h)).collect(),
            v: (0..=mesh_n).map(|i| fv(i as f64 * h)).collect(),
            z,
            mesh_n,
        }
    }

    /// Sampled eigenvector.
    pub fn eigenfunction(pair: &EigenPair, mesh_n: usize) -> Self {
        let z = eval_eigenfunction(pair, 0.0).2;
        Self::from_fn(mesh_n, |x| eval_eigenfunction(pair, x).0, |x| eval_eigenfunction(pair, x).1, z)
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.mesh_n as f64
    }

    pub fn norm(&self) -> f64 {
        inner_product(self, self).expect("same mesh").max(0.0).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        HybridState {
            u: self.u.iter().map(|x| c * x).collect(),
            v: self.v.iter().map(|x| c * x).collect(),
            z: c * self.z,
            mesh_n: self.mesh_n,
        }
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &HybridState) -> Result<Self> {
        check_mesh(self, other)?;
        Ok(HybridState {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + c * b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a + c * b).collect(),
            z: self.z + c * other.z,
            mesh_n: self.mesh_n,
        })
    }

    /// Largest violation of `u(−1) = 0` and `u(0) = v(0) = z`.
    pub fn consistency_violation(&self) -> f64 {
        let u0 = *self.u.last().expect("non-empty");
        self.u[0].abs().max((u0 - self.z).abs()).max((self.v[0] - self.z).abs())
    }
}

fn check_mesh(a: &HybridState, b: &HybridState) -> Result<()> {
    if a.mesh_n != b.mesh_n || a.u.len() != b.u.len() || a.v.len() != b.v.len() {
        return Err(Error::MeshMismatch { left: a.mesh_n, right: b.mesh_n });
    }
    Ok(())
}

/// ℋ inner product `∫u₁u₂ + ∫v₁v₂ + z₁z₂`.
pub fn inner_product(y1: &HybridState, y2: &HybridState) -> Result<f64> {
    check_mesh(y1, y2)?;
    let h = y1.dx();
    let pu: Vec<f64> = y1.u.iter().zip(&y2.u).map(|(a, b)| a * b).collect();
    let pv: Vec<f64> = y1.v.iter().zip(&y2.v).map(|(a, b)| a * b).collect();
    Ok(simpson(&pu, h) + simpson(&pv, h) + y1.z * y2.z)
}

/// Second-order derivative of uniform samples with one-sided stencils at the ends.
fn derivative(samples: &[f64], h: f64) -> Vec<f64> {
    let n = samples.len();
    if n < 3 {
        return vec![(samples[n - 1] - samples[0]) / h; n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * samples[0] + 4.0 * samples[1] - samples[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * samples[n - 1] - 4.0 * samples[n - 2] + samples[n - 3]) / (2.0 * h)
            } else {
                (samples[i + 1] - samples[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Squared 𝒲-norm and a boundary-condition diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WNorm {
    pub value: f64,
    /// Largest violation of the essential conditions relative to `1 + max|y|`.
    pub bc_violation: f64,
    /// Set when `bc_violation` exceeds the tolerance.
    pub bc_warning: bool,
}

/// Tolerance for [`WNorm::bc_warning`].
pub const BC_TOL: f64 = 1e-8;

/// `‖u'‖² + ‖v'‖²` from second-order difference derivatives of the samples.
pub fn w_norm_sq(y: &HybridState, case: BoundaryCase) -> WNorm {
    let h = y.dx();
    let du = derivative(&y.u, h);
    let dv = derivative(&y.v, h);
    let su: Vec<f64> = du.iter().map(|d| d * d).collect();
    let sv: Vec<f64> = dv.iter().map(|d| d * d).collect();
    let value = simpson(&su, h) + simpson(&sv, h);
    let scale = 1.0
        + y.u.iter().chain(&y.v).fold(y.z.abs(), |m, x| m.max(x.abs()));
    let mut viol = y.consistency_violation();
    if case == BoundaryCase::Dirichlet {
        viol = viol.max(y.v.last().expect("non-empty").abs());
    }
    let rel = viol / scale;
    WNorm { value, bc_violation: rel, bc_warning: rel > BC_TOL }
}

/// Modal representation: the pairings `a_n = ⟨y, φ_n⟩` for the first N modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoeffs {
    pub case: BoundaryCase,
    pub a: Vec<f64>,
    /// The eigenpairs the pairings refer to (`modes.len() == a.len()`).
    pub modes: Vec<EigenPair>,
}

impl SpectralCoeffs {
    pub fn zeros(case: BoundaryCase, n: usize) -> Result<Self> {
        Ok(SpectralCoeffs { case, a: vec![0.0; n], modes: eigenpairs(case, n)? })
    }

    /// Coefficients of `Σ c_n φ_n` given the expansion weights `c_n`
    /// (so `a_n = c_n ‖φ_n‖²`).
    pub fn from_expansion(case: BoundaryCase, weights: &[f64]) -> Result<Self> {
        let modes = eigenpairs(case, weights.len())?;
        let a = weights.iter().zip(&modes).map(|(c, p)| c * p.norm_sq).collect();
        Ok(SpectralCoeffs { case, a, modes })
    }

    #[allow(non_snake_case)]
    pub fn N(&self) -> usize {
        self.a.len()
    }

    /// Expansion weights `a_n / ‖φ_n‖²`.
    pub fn expansion(&self) -> Vec<f64> {
        self.a.iter().zip(&self.modes).map(|(a, p)| a / p.norm_sq).collect()
    }

    /// ℋ-norm of the represented function (Parseval).
    pub fn h_norm(&self) -> f64 {
        self.a.iter().zip(&self.modes).map(|(a, p)| a * a / p.norm_sq).sum::<f64>().sqrt()
    }

    /// 𝒲-norm squared of the represented function, `Σ |λ_n| a_n² / ‖φ_n‖²`.
    pub fn w_norm_sq(&self) -> f64 {
        self.a.iter().zip(&self.modes).map(|(a, p)| p.lambda.abs() * a * a / p.norm_sq).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.a.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// `a_n = ⟨y, φ_n⟩` for `n = 1..=n`.
pub fn project(y: &HybridState, case: BoundaryCase, n: usize) -> Result<SpectralCoeffs> {
    let modes = eigenpairs(case, n)?;
    let a = modes
        .par_iter()
        .map(|p| inner_product(y, &HybridState::eigenfunction(p, y.mesh_n)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SpectralCoeffs { case, a, modes })
}

/// Sampled `Σ (a_n/‖φ_n‖²) φ_n`.
pub fn reconstruct(c: &SpectralCoeffs, mesh_n: usize) -> HybridState {
    let mut y = HybridState::zeros(mesh_n);
    for (a, p) in c.a.iter().zip(&c.modes) {
        if *a == 0.0 {
            continue;
        }
        let phi = HybridState::eigenfunction(p, mesh_n);
        y = y.add_scaled(a / p.norm_sq, &phi).expect("same mesh");
    }
    y
}

/// Free evolution `a_n ↦ a_n e^{λ_n t}`.
pub fn evolve_free(c: &SpectralCoeffs, t: f64) -> SpectralCoeffs {
    let a = c.a.iter().zip(&c.modes).map(|(a, p)| a * (p.lambda * t).exp()).collect();
    SpectralCoeffs { case: c.case, a, modes: c.modes.clone() }
}

/// Controlled evolution with the eigenpairs' own input coefficients.
pub fn evolve_controlled(c: &SpectralCoeffs, f: &ControlSignal, t_final: f64) -> Result<SpectralCoeffs> {
    let b: Vec<f64> = c.modes.iter().map(|p| p.b).collect();
    evolve_controlled_with_b(c, f, t_final, &b)
}

/// Modal Duhamel formula with an explicit input-coefficient table.
///
/// The convolution integral is computed by adaptive Gauss–Kronrod quadrature
/// on the exponential-sum form when the control has one, otherwise by
/// composite Simpson on the samples.
pub fn evolve_controlled_with_b(
    c: &SpectralCoeffs,
    f: &ControlSignal,
    t_final: f64,
    b: &[f64],
) -> Result<SpectralCoeffs> {
    if (f.t_final - t_final).abs() > 1e-12 * t_final {
        return Err(Error::InvalidParameter(format!(
            "control horizon {} does not match evolution time {t_final}",
            f.t_final
        )));
    }
    if b.len() < c.N() {
        return Err(Error::InvalidParameter("input coefficient table shorter than mode count".into()));
    }
    let a = c
        .a
        .iter()
        .zip(&c.modes)
        .zip(b)
        .map(|((a, p), bn)| {
            let integral = convolution(f, p.lambda, t_final);
            a * (p.lambda * t_final).exp() + DUHAMEL_SIGN * bn * integral
        })
        .collect();
    Ok(SpectralCoeffs { case: c.case, a, modes: c.modes.clone() })
}

/// `∫₀ᵀ e^{λ(T−s)} f(s) ds`.
fn convolution(f: &ControlSignal, lambda: f64, t_final: f64) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    match &f.coeffs {
        Some(_) => {
            let end = f.switch_off();
            let scale = f.max_abs().max(1e-300);
            adaptive_gk(|s| (lambda * (t_final - s)).exp() * f.eval(s), 0.0, end, 1e-15 * scale * end, 4000)
        }
        // The linear interpolant of the samples, integrated panel by panel.
        None => panel_gk(|s| (lambda * (t_final - s)).exp() * f.eval(s), 0.0, t_final, f.sample_n() - 1),
    }
}
