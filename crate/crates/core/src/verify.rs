//! Closing the loop between the spectral construction and the grid solvers.
//!
//! * [`duality_gap`] checks the integration-by-parts identity between a
//!   controlled forward solution and a free backward solution; it pins every
//!   sign and constant convention in the crate.
//! * [`null_control_verify`] runs project → assemble → synthesize → simulate
//!   and measures the final state with the finite-difference solver.
//! * [`observability_constant`] estimates the boundary-trace observability
//!   constant from random terminal data.

use crate::error::{Error, Result};
use crate::moment::{assemble_with_rest, solve_min_norm, ControlSignal, SolveOptions, DEFAULT_CONDITION_CAP};
use crate::pde::{solve_epsilon, solve_pointmass, FdConfig, Scheme};
use crate::precision::Precision;
use crate::quadrature::{adaptive_gk, panel_gk};
use crate::spectrum::{boundary_trace, eigenpairs, BoundaryCase};
use crate::state::{
    evolve_controlled_with_b, evolve_free, inner_product, project, reconstruct, w_norm_sq, HybridState, SpectralCoeffs,
    DUHAMEL_SIGN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Both sides of the duality identity and their relative gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityGap {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / (1 + |lhs|)`.
    pub gap: f64,
}

/// Sign of the control term on the observation side:
/// `⟨y(T), ỹ^T⟩ = ⟨y⁰, 𝕋_T ỹ^T⟩ + s ∫ f · trace`, with the trace `ṽ(t,1)`
/// (Neumann, `s = +1`) or `ṽ'(t,1)` (Dirichlet, `s = −1`).
pub fn observation_sign(case: BoundaryCase) -> f64 {
    match case {
        BoundaryCase::Dirichlet => -1.0,
        BoundaryCase::Neumann => 1.0,
    }
}

/// Duality identity on modal data.
///
/// `a0` are the pairings of the initial state, `test` those of the terminal
/// test datum `ỹ^T`.  The left side evolves `a0` under the control with the
/// input table `b` (normally the eigenpairs' own); the right side uses only
/// free evolution and the closed-form eigenfunction traces, integrated
/// against `f` by adaptive quadrature.
pub fn duality_gap_modal(
    a0: &SpectralCoeffs,
    f: &ControlSignal,
    test: &SpectralCoeffs,
    t_final: f64,
    b: Option<&[f64]>,
) -> Result<DualityGap> {
    let case = a0.case;
    if test.case != case || test.N() != a0.N() {
        return Err(Error::InvalidParameter("initial and test data must use the same modes".into()));
    }
    let own_b: Vec<f64> = a0.modes.iter().map(|p| p.b).collect();
    let b = b.unwrap_or(&own_b);
    let at = evolve_controlled_with_b(a0, f, t_final, b)?;
    let weights = test.expansion();
    let lhs: f64 = at.a.iter().zip(&weights).map(|(a, w)| a * w).sum();

    let free = evolve_free(a0, t_final);
    let free_part: f64 = free.a.iter().zip(&weights).map(|(a, w)| a * w).sum();
    let traces: Vec<(f64, f64)> =
        test.modes.iter().zip(&weights).map(|(p, w)| (p.lambda, w * boundary_trace(p, case))).collect();
    let trace = |t: f64| traces.iter().map(|(l, c)| c * (l * (t_final - t)).exp()).sum::<f64>();
    let control_part = if f.is_zero() {
        0.0
    } else {
        let scale = f.max_abs() * traces.iter().map(|p| p.1.abs()).sum::<f64>();
        let tol = 1e-14 * (1.0 + scale) * t_final;
        let end = f.switch_off();
        if f.coeffs.is_none() {
            // Piecewise-linear interpolant: one panel per sample interval.
            panel_gk(|t| f.eval(t) * trace(t), 0.0, t_final, f.sample_n() - 1)
        } else {
            adaptive_gk(|t| f.eval(t) * trace(t), 0.0, end, tol, 20_000)
                + if end < t_final { adaptive_gk(|t| f.eval_right(t) * trace(t), end, t_final, tol, 2000) } else { 0.0 }
        }
    };
    let rhs = free_part + observation_sign(case) * control_part;
    Ok(DualityGap { lhs, rhs, gap: (lhs - rhs).abs() / (1.0 + lhs.abs()) })
}

/// Duality identity for grid data, both projected onto the first `n_modes` modes.
pub fn duality_gap(
    case: BoundaryCase,
    y0: &HybridState,
    f: &ControlSignal,
    y_t_test: &HybridState,
    t_final: f64,
    n_modes: usize,
) -> Result<DualityGap> {
    let a0 = project(y0, case, n_modes)?;
    let d = project(y_t_test, case, n_modes)?;
    duality_gap_modal(&a0, f, &d, t_final, None)
}

/// Seeded random polynomial control of degree ≤ 4 with coefficients in `[−1, 1]`,
/// stored as uniform samples.
pub fn random_polynomial_control(t_final: f64, seed: u64, sample_n: usize) -> ControlSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let degree = rng.random_range(0..=4usize);
    let c: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..=1.0)).collect();
    ControlSignal::from_fn(t_final, sample_n, |t| {
        let s = t / t_final;
        c.iter().rev().fold(0.0, |acc, ck| acc * s + ck)
    })
}

/// Outcome of checking the Duhamel sign against the grid solver.
#[derive(Debug, Clone, Serialize)]
pub struct SignCalibration {
    pub case: BoundaryCase,
    /// The sign that matches the grid solver.
    pub sigma: f64,
    /// Distance between grid and modal pairings for `σ = +1` and `σ = −1`.
    pub mismatch_plus: f64,
    pub mismatch_minus: f64,
}

/// Drive zero initial data with a smooth control, once through the grid
/// solver and once through the modal formula with either sign, and report the
/// sign that agrees.
pub fn calibrate_duhamel_sign(case: BoundaryCase) -> Result<SignCalibration> {
    let t_final = 0.2;
    let mesh_n = 128;
    let n_modes = 4;
    let f = ControlSignal::from_fn(t_final, 4001, |t| (std::f64::consts::PI * t / t_final).sin());
    let cfg = FdConfig::new(mesh_n, t_final / 2000.0, Scheme::CrankNicolson, t_final);
    let fd = solve_pointmass(case, &HybridState::zeros(mesh_n), Some(&f), &cfg)?;
    let grid = project(&fd.final_state, case, n_modes)?;
    let zero = SpectralCoeffs::zeros(case, n_modes)?;
    let b: Vec<f64> = zero.modes.iter().map(|p| p.b).collect();
    // evolve_controlled applies DUHAMEL_SIGN; multiply b to realize either sign.
    let run = |sigma: f64| -> Result<f64> {
        let bs: Vec<f64> = b.iter().map(|v| v * sigma * DUHAMEL_SIGN).collect();
        let m = evolve_controlled_with_b(&zero, &f, t_final, &bs)?;
        Ok(m.a.iter().zip(&grid.a).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
    };
    let plus = run(1.0)?;
    let minus = run(-1.0)?;
    Ok(SignCalibration { case, sigma: if plus < minus { 1.0 } else { -1.0 }, mismatch_plus: plus, mismatch_minus: minus })
}

/// Parameters of an end-to-end verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub mesh_n: usize,
    pub dt: f64,
    pub scheme: Scheme,
    pub precision: Precision,
    pub condition_cap: f64,
    /// Fraction of `T` at the end during which the control is held at zero.
    pub rest_fraction: f64,
    /// Pass threshold for `max|final_modal|`, relative to the initial norm.
    pub modal_tol: f64,
    /// Pass threshold for the grid final norm, relative to the initial norm.
    pub fd_tol: f64,
    /// Samples stored with the synthesized control.
    pub sample_n: usize,
    /// Negate every input coefficient before synthesis (diagnostic).
    pub flip_b_sign: bool,
    /// Measure the final state by Richardson extrapolation of two grid runs,
    /// `(mesh_n, dt)` and `(2·mesh_n, dt/2)`, on the `mesh_n` nodes.  Both the
    /// spatial and the temporal leading error terms are `O(h²)`/`O(dt²)` and
    /// cancel together, leaving a fourth-order grid result.
    pub extrapolate: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            mesh_n: 256,
            dt: 5e-5,
            scheme: Scheme::CrankNicolson,
            precision: Precision::Double,
            condition_cap: DEFAULT_CONDITION_CAP,
            rest_fraction: 0.1,
            modal_tol: 1e-6,
            fd_tol: 1e-3,
            sample_n: 1001,
            flip_b_sign: false,
            extrapolate: true,
        }
    }
}

/// Verdict of an end-to-end null-control run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct NullControlReport {
    pub case: BoundaryCase,
    pub T: f64,
    pub N: usize,
    pub initial_norm: f64,
    pub final_norm_fd: f64,
    pub final_modal: Vec<f64>,
    pub moment_residuals: Vec<f64>,
    pub gram_condition: f64,
    pub control_norm: f64,
    pub pass: bool,
}

/// A verification run with its control and the grid simulation settings.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub report: NullControlReport,
    pub control: ControlSignal,
    pub fd: FdConfig,
    /// Final-state figures of the single `(mesh_n, dt)` run, before extrapolation.
    pub raw_final_norm_fd: f64,
    pub raw_final_modal: Vec<f64>,
    /// Final grid state the report was computed from.
    pub final_state: HybridState,
}

/// Initial datum for a verification run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `Σ c φ_n` for a list of `(n, c)`; sampled exactly on any mesh.
    Modes(Vec<(usize, f64)>),
    /// Grid data; refined meshes are filled by piecewise-cubic interpolation.
    Grid(HybridState),
}

impl InitialData {
    /// The datum on a mesh with `mesh_n` intervals per side.
    pub fn sample(&self, case: BoundaryCase, mesh_n: usize) -> Result<HybridState> {
        match self {
            InitialData::Modes(m) => modal_datum(case, m, mesh_n),
            InitialData::Grid(y) if y.mesh_n == mesh_n => Ok(y.clone()),
            InitialData::Grid(y) => Ok(resample(y, mesh_n)),
        }
    }
}

/// Four-point Lagrange interpolation of uniform samples on `[0, 1]` at `s`.
fn cubic_at(samples: &[f64], s: f64) -> f64 {
    let n = samples.len() - 1;
    let x = s * n as f64;
    let i0 = (x.floor() as isize - 1).clamp(0, n as isize - 3) as usize;
    let mut acc = 0.0;
    for j in 0..4 {
        let mut w = 1.0;
        for k in 0..4 {
            if k != j {
                w *= (x - (i0 + k) as f64) / (j as f64 - k as f64);
            }
        }
        acc += w * samples[i0 + j];
    }
    acc
}

/// Piecewise-cubic resampling of a grid state to `mesh_n` intervals per side.
pub fn resample(y: &HybridState, mesh_n: usize) -> HybridState {
    if y.mesh_n < 3 {
        return HybridState::zeros(mesh_n);
    }
    let h = 1.0 / mesh_n as f64;
    HybridState {
        u: (0..=mesh_n).map(|i| cubic_at(&y.u, i as f64 * h)).collect(),
        v: (0..=mesh_n).map(|i| cubic_at(&y.v, i as f64 * h)).collect(),
        z: y.z,
        mesh_n,
    }
}

fn coarsen(fine: &HybridState) -> HybridState {
    HybridState {
        u: fine.u.iter().step_by(2).cloned().collect(),
        v: fine.v.iter().step_by(2).cloned().collect(),
        z: fine.z,
        mesh_n: fine.mesh_n / 2,
    }
}

/// Synthesize a null control for `y0` with N modes and check it on the grid.
pub fn null_control_verify(
    case: BoundaryCase,
    data: &InitialData,
    t_final: f64,
    n_modes: usize,
    cfg: &VerifyConfig,
) -> Result<VerifyOutcome> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let fd = FdConfig::new(cfg.mesh_n, cfg.dt, cfg.scheme, t_final);
    fd.validate().map_err(|e| e.at_stage("configure"))?;
    if let InitialData::Grid(y) = data {
        if y.mesh_n != cfg.mesh_n {
            return Err(Error::MeshMismatch { left: y.mesh_n, right: cfg.mesh_n }.at_stage("project"));
        }
    }
    let y0 = &data.sample(case, cfg.mesh_n).map_err(|e| e.at_stage("project"))?;
    if !(0.0..1.0).contains(&cfg.rest_fraction) {
        return Err(Error::InvalidParameter(format!("rest fraction {} must lie in [0, 1)", cfg.rest_fraction))
            .at_stage("configure"));
    }
    let a0 = project(y0, case, n_modes).map_err(|e| e.at_stage("project"))?;
    // Align the switch-off with the time grid.
    let steps = fd.steps();
    let rest_steps = (cfg.rest_fraction * steps as f64).round() as usize;
    let rest = rest_steps as f64 * fd.step();
    let mut sys = assemble_with_rest(case, &a0, t_final, rest).map_err(|e| e.at_stage("assemble"))?;
    if cfg.flip_b_sign {
        sys = sys.with_flipped_b();
    }
    let opts = SolveOptions { precision: cfg.precision, condition_cap: cfg.condition_cap, sample_n: cfg.sample_n };
    let synth = solve_min_norm(&sys, opts).map_err(|e| e.at_stage("synthesize"))?;
    let traj = solve_pointmass(case, y0, Some(&synth.signal), &fd).map_err(|e| e.at_stage("simulate"))?;
    let raw_final_modal = project(&traj.final_state, case, n_modes).map_err(|e| e.at_stage("measure"))?.a;
    let raw_final_norm_fd = traj.final_state.norm();
    let final_state = if cfg.extrapolate {
        let fine_cfg = FdConfig { mesh_n: 2 * cfg.mesh_n, dt: fd.step() / 2.0, ..fd.clone() };
        let y_fine = data.sample(case, 2 * cfg.mesh_n).map_err(|e| e.at_stage("simulate"))?;
        let fine = solve_pointmass(case, &y_fine, Some(&synth.signal), &fine_cfg).map_err(|e| e.at_stage("simulate"))?;
        coarsen(&fine.final_state).scaled(4.0 / 3.0).add_scaled(-1.0 / 3.0, &traj.final_state)?
    } else {
        traj.final_state
    };
    let final_modal = if cfg.extrapolate {
        project(&final_state, case, n_modes).map_err(|e| e.at_stage("measure"))?.a
    } else {
        raw_final_modal.clone()
    };

    let initial_norm = y0.norm();
    let final_norm_fd = final_state.norm();
    let max_modal = final_modal.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let pass = final_norm_fd <= cfg.fd_tol * initial_norm && max_modal <= cfg.modal_tol * initial_norm;
    let report = NullControlReport {
        case,
        T: t_final,
        N: n_modes,
        initial_norm,
        final_norm_fd,
        final_modal,
        moment_residuals: synth.residuals,
        gram_condition: synth.condition,
        control_norm: synth.signal.l2_norm(),
        pass,
    };
    Ok(VerifyOutcome { report, control: synth.signal, fd, raw_final_norm_fd, raw_final_modal, final_state })
}

/// The standard test datum `φ₁ + 0.5 φ₂ + 0.25 φ₃` sampled on `mesh_n`.
pub fn standard_datum(case: BoundaryCase, mesh_n: usize) -> Result<HybridState> {
    modal_datum(case, &[(1, 1.0), (2, 0.5), (3, 0.25)], mesh_n)
}

/// `Σ c φ_n` for a list of `(n, c)`, sampled on `mesh_n`.
pub fn modal_datum(case: BoundaryCase, modes: &[(usize, f64)], mesh_n: usize) -> Result<HybridState> {
    let n_max = modes.iter().map(|m| m.0).max().unwrap_or(0);
    if modes.iter().any(|m| m.0 == 0) {
        return Err(Error::InvalidParameter("mode indices start at 1".into()));
    }
    let pairs = eigenpairs(case, n_max)?;
    let mut y = HybridState::zeros(mesh_n);
    for (n, c) in modes {
        y = y.add_scaled(*c, &HybridState::eigenfunction(&pairs[n - 1], mesh_n))?;
    }
    Ok(y)
}

/// Observability constant estimate.
#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityEstimate {
    pub case: BoundaryCase,
    pub n_modes: usize,
    pub samples: usize,
    /// `"H"` (Neumann) or `"W"` (Dirichlet).
    pub norm: &'static str,
    /// Largest sampled ratio `‖trace‖_{L²(0,T)} / ‖ỹ^T‖`.
    pub c_sampled: f64,
    /// Exact supremum over the span of the first N modes.
    pub c_sup: f64,
}

/// Monte-Carlo estimate of `sup ‖trace‖_{L²(0,T)} / ‖ỹ^T‖` over terminal data
/// in the span of the first N modes.
///
/// Sample `s` draws its coordinates from its own stream of a ChaCha8
/// generator, and every prefix of every sample is tried, so the estimate for
/// N contains all the ratios used for any smaller N.  The norm of the
/// terminal datum is computed on the grid (`mesh_n`).
pub fn observability_constant(
    case: BoundaryCase,
    n_modes: usize,
    t_final: f64,
    mesh_n: usize,
    samples: usize,
    seed: u64,
) -> Result<ObservabilityEstimate> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let modes = eigenpairs(case, n_modes)?;
    let tau: Vec<f64> = modes.iter().map(|p| boundary_trace(p, case)).collect();
    let lambdas: Vec<f64> = modes.iter().map(|p| p.lambda).collect();
    let g = crate::moment::gram(&lambdas, t_final);
    // A_{ij} = τ_i τ_j G_ij: trace energy of Σ d_n φ_n.
    let a = nalgebra::DMatrix::from_fn(n_modes, n_modes, |i, j| tau[i] * tau[j] * g.get(i, j));
    let phis: Vec<HybridState> = modes.iter().map(|p| HybridState::eigenfunction(p, mesh_n)).collect();

    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let d: Vec<f64> = (0..n_modes).map(|_| rng.sample(StandardNormal)).collect();
            let mut best = 0.0_f64;
            let mut y = HybridState::zeros(mesh_n);
            for m in 1..=n_modes {
                y = y.add_scaled(d[m - 1], &phis[m - 1]).expect("same mesh");
                let num: f64 = (0..m).map(|i| (0..m).map(|j| d[i] * a[(i, j)] * d[j]).sum::<f64>()).sum();
                let den = match case {
                    BoundaryCase::Neumann => inner_product(&y, &y).expect("same mesh"),
                    BoundaryCase::Dirichlet => w_norm_sq(&y, case).value,
                };
                if den > 0.0 {
                    best = best.max((num.max(0.0) / den).sqrt());
                }
            }
            best
        })
        .collect();
    let c_sampled = ratios.iter().cloned().fold(0.0_f64, f64::max);

    // Exact sup: generalized eigenproblem with the diagonal modal norm matrix.
    let bdiag: Vec<f64> = modes
        .iter()
        .map(|p| match case {
            BoundaryCase::Neumann => p.norm_sq,
            BoundaryCase::Dirichlet => p.lambda.abs() * p.norm_sq,
        })
        .collect();
    let scaled = nalgebra::DMatrix::from_fn(n_modes, n_modes, |i, j| a[(i, j)] / (bdiag[i] * bdiag[j]).sqrt());
    let c_sup = scaled.symmetric_eigenvalues().max().max(0.0).sqrt();
    Ok(ObservabilityEstimate {
        case,
        n_modes,
        samples,
        norm: match case {
            BoundaryCase::Neumann => "H",
            BoundaryCase::Dirichlet => "W",
        },
        c_sampled,
        c_sup,
    })
}

/// ℋ-error of a grid free run from `φ_n` against the exact `e^{λ_n t} φ_n`.
pub fn free_run_error(case: BoundaryCase, n: usize, mesh_n: usize, t: f64, dt: f64) -> Result<f64> {
    let c = SpectralCoeffs::from_expansion(
        case,
        &(1..=n).map(|i| if i == n { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
    )?;
    let y0 = reconstruct(&c, mesh_n);
    let traj = solve_pointmass(case, &y0, None, &FdConfig::new(mesh_n, dt, Scheme::CrankNicolson, t))?;
    let exact = reconstruct(&evolve_free(&c, t), mesh_n);
    Ok(traj.final_state.add_scaled(-1.0, &exact)?.norm())
}

/// Observed orders `log₂(e_k / e_{k+1})` between consecutive errors of a
/// mesh-doubling sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// One row of the ε-limit study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub eps: f64,
    pub t_star: f64,
    pub error_h: f64,
}

/// ℋ-distance at `t_star` between the ε-density and point-mass solutions
/// (homogeneous Dirichlet data) from the same initial state.
pub fn epsilon_study(eps_list: &[f64], y0: &HybridState, t_star: f64, dt: f64) -> Result<Vec<EpsilonRow>> {
    let cfg = FdConfig::new(y0.mesh_n, dt, Scheme::CrankNicolson, t_star);
    let reference = solve_pointmass(BoundaryCase::Dirichlet, y0, None, &cfg)?.final_state;
    eps_list
        .par_iter()
        .map(|&eps| {
            let e = solve_epsilon(eps, y0, &cfg)?.final_state;
            Ok(EpsilonRow { eps, t_star, error_h: e.add_scaled(-1.0, &reference)?.norm() })
        })
        .collect()
}

/// Smooth datum for the ε study: satisfies `u(−1) = v(1) = 0` and
/// `u(0) = v(0) = z`.
pub fn smooth_datum(mesh_n: usize) -> HybridState {
    use std::f64::consts::PI;
    HybridState::from_fn(mesh_n, |x| (PI * (1.0 + x) / 2.0).sin(), |x| (PI * x / 2.0).cos() + 0.3 * (PI * x).sin(), 1.0)
}
