//! Finite-difference solvers that use no spectral information.
//!
//! Both solvers share one conservative (finite-volume) discretization on the
//! nodes `x_i = −1 + i h`, `h = 1/mesh_n`, `i = 0..=2·mesh_n`:
//!
//! ```text
//! m_i ẏ_i = (y_{i−1} − 2 y_i + y_{i+1}) / h + F_i
//! ```
//!
//! where `m_i` is the heat capacity of the dual cell around node `i`.
//!
//! * **Point mass.** Node `mesh_n` (x = 0) is the shared unknown `z`, with
//!   capacity `1 + h`: its equation is the flux jump `ż = v'(0) − u'(0)`
//!   integrated over the dual cell, which is second-order accurate and makes
//!   `u(0) = v(0) = z` hold by construction.
//! * **Neumann end.** Half cell with capacity `h/2` and inflow `F = f(t)`
//!   (equivalent to a ghost-point closure).
//! * **Dirichlet end.** `y_{2·mesh_n} = f(t)` is eliminated, contributing
//!   `f/h` to the last unknown.
//! * **ε-density.** Capacity `∫ρ` over each dual cell with `ρ = 1/(2ε)` on
//!   `(−ε, ε)`; flux continuity at `±ε` is automatic.
//!
//! The mass matrix is diagonal and the stiffness symmetric, so each θ-scheme
//! step is a single tridiagonal solve, and the scheme contracts the discrete
//! energy `Σ m_i y_i²` when `f = 0`.
//!
//! Time stepping uses one-sided control values inside each step
//! (`f(t_k⁺)` and `f(t_{k+1}⁻)`), so a control that switches off at a grid
//! time is integrated to full order.

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::moment::ControlSignal;
use crate::quadrature::simpson;
use crate::spectrum::BoundaryCase;
use crate::state::HybridState;
use serde::{Deserialize, Serialize};

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    BackwardEuler,
    #[default]
    CrankNicolson,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "backward-euler" | "be" => Ok(Scheme::BackwardEuler),
            "crank-nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            other => Err(format!("unknown scheme '{other}' (expected crank-nicolson or backward-euler)")),
        }
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdConfig {
    pub mesh_n: usize,
    /// Requested time step; the actual step is `T / round(T / dt)`.
    pub dt: f64,
    pub scheme: Scheme,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Times at which full states are kept (nearest step).
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

/// Tolerance on the initial-data compatibility conditions.
pub const CONSISTENCY_TOL: f64 = 1e-8;

impl FdConfig {
    pub fn new(mesh_n: usize, dt: f64, scheme: Scheme, t_final: f64) -> Self {
        FdConfig { mesh_n, dt, scheme, t_final, snapshot_times: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh_n < 16 {
            return Err(Error::InvalidParameter(format!("mesh_n must be at least 16, got {}", self.mesh_n)));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::InvalidParameter(format!("dt must lie in (0, 0.1], got {}", self.dt)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", self.t_final)));
        }
        Ok(())
    }

    /// Number of time steps.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    /// Actual time step.
    pub fn step(&self) -> f64 {
        self.t_final / self.steps() as f64
    }
}

/// Per-step record of a run plus selected full states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub case: BoundaryCase,
    pub times: Vec<f64>,
    /// ℋ-norm (Simpson) at each time.
    pub norm_h: Vec<f64>,
    /// Discrete energy `Σ m_i y_i²` (the quantity the schemes contract).
    pub energy: Vec<f64>,
    pub z: Vec<f64>,
    /// `v(t, 1)` at each time.
    pub boundary_value: Vec<f64>,
    /// `v'(t, 1)` from the one-sided second-order stencil.
    pub boundary_slope: Vec<f64>,
    pub snapshots: Vec<(f64, HybridState)>,
    pub final_state: HybridState,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one time")
    }
}

/// The observation at `x = 1`: `v'(t,1)` (Dirichlet) or `v(t,1)` (Neumann).
pub fn observe_boundary(traj: &Trajectory, case: BoundaryCase) -> Vec<(f64, f64)> {
    let series = match case {
        BoundaryCase::Dirichlet => &traj.boundary_slope,
        BoundaryCase::Neumann => &traj.boundary_value,
    };
    traj.times.iter().cloned().zip(series.iter().cloned()).collect()
}

enum RightEnd {
    Dirichlet,
    Neumann,
}

/// Grid problem: capacities for every node (node 0 is fixed at zero).
struct Grid {
    m: usize,
    h: f64,
    masses: Vec<f64>,
    end: RightEnd,
}

impl Grid {
    fn nodes(&self) -> usize {
        2 * self.m + 1
    }

    /// Index of the last unknown.
    fn last(&self) -> usize {
        match self.end {
            RightEnd::Dirichlet => 2 * self.m - 1,
            RightEnd::Neumann => 2 * self.m,
        }
    }

    /// Stiffness product; for a Dirichlet end the caller zeroes `y[2m]` first.
    fn apply_k(&self, y: &[f64], out: &mut [f64]) {
        let ih = 1.0 / self.h;
        let end = 2 * self.m;
        for i in 1..=self.last() {
            out[i] = if i == end { (y[i - 1] - y[i]) * ih } else { (y[i - 1] - 2.0 * y[i] + y[i + 1]) * ih };
        }
    }

    fn system(&self, scale: f64) -> Option<Tridiagonal> {
        let last = self.last();
        let n = last; // unknowns 1..=last
        let ih = 1.0 / self.h;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for r in 0..n {
            let i = r + 1;
            let kd = if i == 2 * self.m { -ih } else { -2.0 * ih };
            diag[r] = self.masses[i] - scale * kd;
            if r > 0 {
                lower[r] = -scale * ih;
            }
            if r + 1 < n {
                upper[r] = -scale * ih;
            }
        }
        Tridiagonal::new(lower, diag, upper)
    }

    fn energy(&self, y: &[f64]) -> f64 {
        self.masses.iter().zip(y).map(|(m, v)| m * v * v).sum()
    }
}

fn forcing_index(grid: &Grid) -> (usize, f64) {
    match grid.end {
        RightEnd::Dirichlet => (2 * grid.m - 1, 1.0 / grid.h),
        RightEnd::Neumann => (2 * grid.m, 1.0),
    }
}

/// Read-out of a full node vector into a hybrid state.
type Readout<'a> = dyn Fn(&[f64]) -> HybridState + 'a;

struct Run<'a> {
    grid: Grid,
    case: BoundaryCase,
    y0: Vec<f64>,
    control: Option<&'a ControlSignal>,
    readout: Box<Readout<'a>>,
}

fn integrate(run: Run<'_>, cfg: &FdConfig) -> Result<Trajectory> {
    let grid = &run.grid;
    let steps = cfg.steps();
    let dt = cfg.step();
    let theta = cfg.scheme.theta();
    let solver = grid.system(theta * dt).ok_or(Error::SolveFailed { step: 0 })?;
    let (fi, fscale) = forcing_index(grid);
    let dirichlet = matches!(grid.end, RightEnd::Dirichlet);
    let h = grid.h;
    let n_nodes = grid.nodes();
    let last = grid.last();

    let f_left = |t: f64| run.control.map_or(0.0, |f| f.eval(t));
    let f_right = |t: f64| run.control.map_or(0.0, |f| f.eval_right(t));

    let mut y = run.y0.clone();
    let mut ky = vec![0.0; n_nodes];
    let mut rhs = vec![0.0; last];

    let cap = steps + 1;
    let mut traj = Trajectory {
        case: run.case,
        times: Vec::with_capacity(cap),
        norm_h: Vec::with_capacity(cap),
        energy: Vec::with_capacity(cap),
        z: Vec::with_capacity(cap),
        boundary_value: Vec::with_capacity(cap),
        boundary_slope: Vec::with_capacity(cap),
        snapshots: Vec::new(),
        final_state: HybridState::zeros(grid.m),
    };
    let mut snap_steps: Vec<(usize, f64)> = cfg
        .snapshot_times
        .iter()
        .map(|t| (((t / dt).round().max(0.0) as usize).min(steps), *t))
        .collect();
    snap_steps.sort_by_key(|p| p.0);
    let mut snap_iter = snap_steps.into_iter().peekable();

    let mut record = |k: usize, y: &[f64], traj: &mut Trajectory| {
        let t = k as f64 * dt;
        let st = (run.readout)(y);
        let m = grid.m;
        let s = (3.0 * y[2 * m] - 4.0 * y[2 * m - 1] + y[2 * m - 2]) / (2.0 * h);
        traj.times.push(t);
        traj.norm_h.push(st.norm());
        traj.energy.push(grid.energy(y));
        traj.z.push(st.z);
        traj.boundary_value.push(y[2 * m]);
        traj.boundary_slope.push(s);
        while let Some(&(ks, _)) = snap_iter.peek() {
            if ks != k {
                break;
            }
            traj.snapshots.push((t, st.clone()));
            snap_iter.next();
        }
        if k == steps {
            traj.final_state = st;
        }
    };
    record(0, &y, &mut traj);

    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let g0 = f_right(t0);
        let g1 = f_left(t1);
        if dirichlet {
            y[2 * grid.m] = 0.0; // boundary value enters through the forcing
        }
        grid.apply_k(&y, &mut ky);
        for i in 1..=last {
            rhs[i - 1] = grid.masses[i] * y[i] + (1.0 - theta) * dt * ky[i];
        }
        rhs[fi - 1] += dt * fscale * (theta * g1 + (1.0 - theta) * g0);
        solver.solve_in_place(&mut rhs);
        y[1..=last].copy_from_slice(&rhs);
        if dirichlet {
            y[2 * grid.m] = g1;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::SolveFailed { step: k + 1 });
        }
        record(k + 1, &y, &mut traj);
    }
    Ok(traj)
}

fn check_initial(y0: &HybridState, cfg: &FdConfig) -> Result<()> {
    cfg.validate()?;
    if y0.mesh_n != cfg.mesh_n {
        return Err(Error::MeshMismatch { left: y0.mesh_n, right: cfg.mesh_n });
    }
    let scale = 1.0 + y0.u.iter().chain(&y0.v).fold(y0.z.abs(), |m, x| m.max(x.abs()));
    let u_left = y0.u[0].abs();
    if u_left > CONSISTENCY_TOL * scale {
        return Err(Error::InconsistentData { condition: "u(-1) = 0", violation: u_left });
    }
    let c = (y0.u[y0.mesh_n] - y0.z).abs().max((y0.v[0] - y0.z).abs());
    if c > CONSISTENCY_TOL * scale {
        return Err(Error::InconsistentData { condition: "u(0) = v(0) = z", violation: c });
    }
    Ok(())
}

fn node_vector(y0: &HybridState) -> Vec<f64> {
    let m = y0.mesh_n;
    let mut y = Vec::with_capacity(2 * m + 1);
    y.extend_from_slice(&y0.u[..m]);
    y.push(y0.z);
    y.extend_from_slice(&y0.v[1..]);
    y[0] = 0.0;
    y
}

/// Time-step the point-mass system with optional boundary control.
///
/// Without a control the boundary datum is homogeneous.  For the Dirichlet
/// case the recorded `v(t, 1)` is the imposed control value.
pub fn solve_pointmass(
    case: BoundaryCase,
    y0: &HybridState,
    f: Option<&ControlSignal>,
    cfg: &FdConfig,
) -> Result<Trajectory> {
    check_initial(y0, cfg)?;
    if let Some(f) = f {
        if (f.t_final - cfg.t_final).abs() > 1e-12 * cfg.t_final {
            return Err(Error::InvalidParameter(format!(
                "control horizon {} differs from simulation horizon {}",
                f.t_final, cfg.t_final
            )));
        }
    }
    let m = cfg.mesh_n;
    let h = 1.0 / m as f64;
    let mut masses = vec![h; 2 * m + 1];
    masses[0] = 0.0;
    masses[m] = 1.0 + h;
    let end = match case {
        BoundaryCase::Dirichlet => {
            masses[2 * m] = 0.0;
            RightEnd::Dirichlet
        }
        BoundaryCase::Neumann => {
            masses[2 * m] = 0.5 * h;
            RightEnd::Neumann
        }
    };
    let mut y = node_vector(y0);
    if case == BoundaryCase::Dirichlet {
        y[2 * m] = match f {
            Some(f) => f.eval_right(0.0),
            None => 0.0,
        };
    }
    let readout = move |y: &[f64]| HybridState {
        u: y[..=m].to_vec(),
        v: y[m..].to_vec(),
        z: y[m],
        mesh_n: m,
    };
    let mut traj = integrate(
        Run { grid: Grid { m, h, masses, end }, case, y0: y, control: f, readout: Box::new(readout) },
        cfg,
    )?;
    // Keep the caller's initial boundary sample in the record.
    if case == BoundaryCase::Dirichlet && f.is_none() {
        traj.boundary_value[0] = 0.0;
    }
    Ok(traj)
}

/// Capacities of the ε-density grid, or why the mesh cannot resolve `ε`.
fn epsilon_masses(eps: f64, m: usize) -> Result<Vec<f64>> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::EpsilonUnresolved { eps, mesh_n: m, reason: "eps must lie in (0, 0.5)".into() });
    }
    let cells = eps * m as f64;
    let j = cells.round();
    if (cells - j).abs() > 1e-9 * cells.max(1.0) {
        return Err(Error::EpsilonUnresolved {
            eps,
            mesh_n: m,
            reason: format!("±eps must be grid points, but eps·mesh_n = {cells}"),
        });
    }
    let j = j as usize;
    if 2 * j < 5 {
        return Err(Error::EpsilonUnresolved {
            eps,
            mesh_n: m,
            reason: format!("only {} grid points inside (-eps, eps); at least 4 needed", 2 * j - 1),
        });
    }
    let h = 1.0 / m as f64;
    let rho = 1.0 / (2.0 * eps);
    let mut masses = vec![h; 2 * m + 1];
    for i in m - j..=m + j {
        masses[i] = if i == m - j || i == m + j { 0.5 * h + 0.5 * h * rho } else { h * rho };
    }
    masses[0] = 0.0;
    masses[2 * m] = 0.0;
    Ok(masses)
}

/// Time-step the heat equation with density `1/(2ε)` on `(−ε, ε)` and
/// homogeneous Dirichlet data at `x = ±1`.
///
/// The reported `z` is the average of the solution over `(−ε, ε)`.
pub fn solve_epsilon(eps: f64, y0: &HybridState, cfg: &FdConfig) -> Result<Trajectory> {
    check_initial(y0, cfg)?;
    let m = cfg.mesh_n;
    let masses = epsilon_masses(eps, m)?;
    let h = 1.0 / m as f64;
    let j = (eps * m as f64).round() as usize;
    // Weights of the inside part of each dual cell, for the (−ε, ε) average.
    let inside: Vec<(usize, f64)> = (m - j..=m + j)
        .map(|i| (i, if i == m - j || i == m + j { 0.5 * h } else { h } / (2.0 * eps)))
        .collect();
    let readout = move |y: &[f64]| HybridState {
        u: y[..=m].to_vec(),
        v: y[m..].to_vec(),
        z: inside.iter().map(|(i, w)| w * y[*i]).sum(),
        mesh_n: m,
    };
    let mut y = node_vector(y0);
    y[2 * m] = 0.0;
    integrate(
        Run {
            grid: Grid { m, h, masses, end: RightEnd::Dirichlet },
            case: BoundaryCase::Dirichlet,
            y0: y,
            control: None,
            readout: Box::new(readout),
        },
        cfg,
    )
}

/// `∫₀ᵀ g(t)² dt` of a recorded series by composite Simpson.
pub fn series_l2_sq(series: &[(f64, f64)]) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let h = series[1].0 - series[0].0;
    let sq: Vec<f64> = series.iter().map(|p| p.1 * p.1).collect();
    simpson(&sq, h)
}
