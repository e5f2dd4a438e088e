//! CSV and JSON emission for offline plotting, plus the state-file reader.
//!
//! Every real number is written with 17 significant digits (`{:.16e}`), which
//! round-trips an `f64` exactly, so re-running a command reproduces its files
//! byte for byte.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::moment::{ControlSignal, ControlSynthesis};
use crate::pde::{observe_boundary, Trajectory};
use crate::spectrum::{asymptotic_deviation, eigenpairs, BoundaryCase, ModeKind};
use crate::state::HybridState;
use crate::verify::EpsilonRow;

/// Round-trip decimal formatting of a real.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// `spectrum.csv`: `n,kind,mu,lambda,norm_sq,b,gap_to_next,asymptotic_deviation`.
///
/// `mu` is the frequency of the mode (`kπ` for Dirichlet even modes), the
/// gap is `λ_n − λ_{n+1}` (empty on the last row), and the deviation from the
/// large-k expansion is filled only for transcendental modes.
pub fn write_spectrum_csv(mut w: impl Write, case: BoundaryCase, n_max: usize) -> Result<()> {
    let pairs = eigenpairs(case, n_max)?;
    writeln!(w, "n,kind,mu,lambda,norm_sq,b,gap_to_next,asymptotic_deviation")?;
    for (i, p) in pairs.iter().enumerate() {
        let gap = pairs.get(i + 1).map(|q| real(p.lambda - q.lambda)).unwrap_or_default();
        let dev = match p.kind {
            ModeKind::DirichletEven(_) => String::new(),
            ModeKind::DirichletOdd(k) | ModeKind::NeumannOdd(k) | ModeKind::NeumannEven(k) => {
                // Neumann roots are indexed by n itself; Dirichlet odd ones by k.
                let idx = if case == BoundaryCase::Neumann { p.n } else { k };
                real(asymptotic_deviation(case, idx)?)
            }
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            p.n,
            p.kind.name(),
            real(p.frequency()),
            real(p.lambda),
            real(p.norm_sq),
            real(p.b),
            gap,
            dev
        )?;
    }
    Ok(())
}

/// `control.csv`: `t,f` on the stored sample grid.
pub fn write_control_csv(mut w: impl Write, f: &ControlSignal) -> Result<()> {
    writeln!(w, "t,f")?;
    let n = f.sample_n();
    for i in 0..n {
        let t = f.t_final * i as f64 / (n - 1) as f64;
        let v = if t <= f.switch_off() { f.eval(t) } else { 0.0 };
        writeln!(w, "{},{}", real(t), real(v))?;
    }
    Ok(())
}

#[derive(Serialize)]
#[allow(non_snake_case)]
struct ControlDescriptor<'a> {
    T: f64,
    rest: f64,
    lambdas: Vec<f64>,
    coeffs: Vec<f64>,
    condition: f64,
    residuals: &'a [f64],
}

/// `control.json`: `{T, rest, lambdas, coeffs, condition, residuals}`.
pub fn write_control_json(w: impl Write, synth: &ControlSynthesis) -> Result<()> {
    let pairs = synth.signal.coeffs.clone().unwrap_or_default();
    let d = ControlDescriptor {
        T: synth.signal.t_final,
        rest: synth.signal.rest,
        lambdas: pairs.iter().map(|p| p.0).collect(),
        coeffs: pairs.iter().map(|p| p.1).collect(),
        condition: synth.condition,
        residuals: &synth.residuals,
    };
    write_json(w, &d)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(mut w: impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// State CSV: `x,value,region` with the `u` rows, then the `v` rows, then one `z` row at `x = 0`.
pub fn write_state_csv(mut w: impl Write, y: &HybridState) -> Result<()> {
    writeln!(w, "x,value,region")?;
    let h = y.dx();
    for (i, u) in y.u.iter().enumerate() {
        writeln!(w, "{},{},u", real(-1.0 + i as f64 * h), real(*u))?;
    }
    for (i, v) in y.v.iter().enumerate() {
        writeln!(w, "{},{},v", real(i as f64 * h), real(*v))?;
    }
    writeln!(w, "{},{},z", real(0.0), real(y.z))?;
    Ok(())
}

/// Read a state written by [`write_state_csv`].
///
/// Rows may come in any order within a region but must sit on a uniform mesh
/// with the same number of intervals on both sides and exactly one `z` row.
pub fn read_state_csv(r: impl BufRead) -> Result<HybridState> {
    let mut u = Vec::new();
    let mut v = Vec::new();
    let mut z = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 3 columns, found {}", lineno + 1, cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: '{s}': {e}", lineno + 1)));
        let (x, val) = (num(cols[0])?, num(cols[1])?);
        match cols[2] {
            "u" => u.push((x, val)),
            "v" => v.push((x, val)),
            "z" if z.is_none() => z = Some(val),
            "z" => return Err(Error::Parse(format!("line {}: second z row", lineno + 1))),
            other => return Err(Error::Parse(format!("line {}: unknown region '{other}'", lineno + 1))),
        }
    }
    let z = z.ok_or_else(|| Error::Parse("missing z row".into()))?;
    if u.len() != v.len() {
        return Err(Error::MeshMismatch { left: u.len().saturating_sub(1), right: v.len().saturating_sub(1) });
    }
    if u.len() < 3 {
        return Err(Error::Parse("need at least two intervals per side".into()));
    }
    let mesh_n = u.len() - 1;
    let h = 1.0 / mesh_n as f64;
    let place = |rows: &mut Vec<(f64, f64)>, origin: f64, name: &str| -> Result<Vec<f64>> {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, (x, _)) in rows.iter().enumerate() {
            if (x - (origin + i as f64 * h)).abs() > 1e-9 {
                return Err(Error::Parse(format!("{name} row at x = {x} is off the uniform mesh")));
            }
        }
        Ok(rows.iter().map(|p| p.1).collect())
    };
    Ok(HybridState { u: place(&mut u, -1.0, "u")?, v: place(&mut v, 0.0, "v")?, z, mesh_n })
}

/// Trajectory CSV: `t,norm_H,z,trace`, the trace being the observed boundary quantity.
pub fn write_trajectory_csv(mut w: impl Write, traj: &Trajectory) -> Result<()> {
    writeln!(w, "t,norm_H,z,trace")?;
    let trace = observe_boundary(traj, traj.case);
    for (i, (t, obs)) in trace.iter().enumerate() {
        writeln!(w, "{},{},{},{}", real(*t), real(traj.norm_h[i]), real(traj.z[i]), real(*obs))?;
    }
    Ok(())
}

/// `epsilon.csv`: `eps,t_star,error_H`.
pub fn write_epsilon_csv(mut w: impl Write, rows: &[EpsilonRow]) -> Result<()> {
    writeln!(w, "eps,t_star,error_H")?;
    for r in rows {
        writeln!(w, "{},{},{}", real(r.eps), real(r.t_star), real(r.error_h))?;
    }
    Ok(())
}
