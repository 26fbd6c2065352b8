//! Interior density of the degenerate equation by a conservative finite
//! volume scheme. Boundary outflow is carried into the atoms, so the total
//! mass `a + ∫r + b` is preserved step by step.

use super::{BoundaryMeasure, DegenerateModel, ModelKind};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{BandLu, BandMatrix};

/// Extrapolation of three cell averages to the adjacent face.
const TRACE: [f64; 3] = [15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0];
/// Implicit Euler steps before Crank-Nicolson takes over.
const SMOOTHING_STEPS: usize = 4;
/// At least this many steps cover the horizon.
const MIN_STEPS_PER_HORIZON: f64 = 2000.0;

/// Boundary values `r(0, t)` and `r(1, t)` at every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTraces {
    pub times: Vec<f64>,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InteriorSolution {
    pub kind: ModelKind,
    pub grid: Grid,
    pub centers: Vec<f64>,
    /// Initial cell averages.
    pub initial: Vec<f64>,
    pub times: Vec<f64>,
    /// Cell averages at each snapshot.
    pub densities: Vec<Vec<f64>>,
    pub traces: BoundaryTraces,
    /// `∫₀ᵗ Φ(0)`: mass absorbed at 0, per snapshot.
    pub outflow0: Vec<f64>,
    /// Mass absorbed at 1, per snapshot.
    pub outflow1: Vec<f64>,
    pub dt_max: f64,
    pub steps: usize,
    /// `g'(1)`, `g(1)` and `(gψ)(1)`, used by the zero-flux residual.
    right: [f64; 3],
}

impl InteriorSolution {
    pub fn cell_width(&self) -> f64 {
        self.grid.h()
    }

    pub fn interior_mass(&self, k: usize) -> f64 {
        self.densities[k].iter().sum::<f64>() * self.cell_width()
    }

    /// Snapshot `k` as a measure with the given atoms.
    pub fn measure(&self, k: usize, atom0: f64, atom1: f64) -> BoundaryMeasure {
        BoundaryMeasure {
            time: self.times[k],
            atom0,
            atom1,
            x: self.centers.clone(),
            density: self.densities[k].clone(),
            weights: vec![self.cell_width(); self.centers.len()],
        }
    }

    /// Quadratic extrapolation to `x = 1` and one-sided derivative there.
    pub fn right_trace(&self, k: usize) -> (f64, f64) {
        let r = &self.densities[k];
        let n = r.len();
        let h = self.cell_width();
        let value = TRACE[0] * r[n - 1] + TRACE[1] * r[n - 2] + TRACE[2] * r[n - 3];
        let slope = (2.0 * r[n - 1] - 3.0 * r[n - 2] + r[n - 3]) / h;
        (value, slope)
    }

    /// Zero-flux residual `g'(1) r + g(1) r' − (gψ)(1) r` at `x = 1`. For the
    /// SIS model this is the Robin row `½[(1−R0) r + r'] + r`.
    pub fn zero_flux_residual(&self, k: usize) -> f64 {
        let (r, dr) = self.right_trace(k);
        let [dg, g, drift] = self.right;
        dg * r + g * dr - drift * r
    }
}

fn face_coefficients(model: &DegenerateModel, grid: &Grid, centers: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let n = centers.len();
    let h = grid.h();
    let mut faces = Vec::with_capacity(n + 1);
    let c0 = model.outflow_rate_at_0();
    faces.push((0..3).map(|i| (i, c0 * TRACE[i])).collect());
    for f in 1..n {
        let beta = model.drift(grid.x(f));
        faces.push(vec![
            (f, model.g.value(centers[f]) / h - 0.5 * beta),
            (f - 1, -model.g.value(centers[f - 1]) / h - 0.5 * beta),
        ]);
    }
    match model.kind {
        ModelKind::Kimura => {
            let c1 = model.g.derivative(1.0);
            faces.push((0..3).map(|i| (n - 1 - i, c1 * TRACE[i])).collect());
        }
        ModelKind::Sis => faces.push(Vec::new()),
    }
    faces
}

fn flux(face: &[(usize, f64)], r: &[f64]) -> f64 {
    face.iter().map(|(j, c)| c * r[*j]).sum()
}

struct Stepper {
    dt: f64,
    implicit: bool,
    lu: BandLu,
}

/// Evolves interior data `r0` (nodal values on `grid`) to each of `times`.
pub fn solve_interior(
    model: &DegenerateModel,
    r0: &[f64],
    t_final: f64,
    times: &[f64],
    grid: &Grid,
) -> Result<InteriorSolution> {
    if r0.len() != grid.len() {
        return Err(Error::Argument(format!(
            "initial density has {} values for a {}-node grid",
            r0.len(),
            grid.len()
        )));
    }
    if grid.len() < 5 || grid.a() != 0.0 || grid.b() != 1.0 {
        return Err(Error::Argument(
            "interior solve needs a unit grid with at least 5 nodes".into(),
        ));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::Argument(format!("horizon {t_final} must be positive")));
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument(
            "snapshot times must be nonempty and sorted".into(),
        ));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= t_final)) {
        return Err(Error::Argument(format!("time {t} outside [0, {t_final}]")));
    }
    let h = grid.h();
    let centers = grid.cell_centers();
    let n = centers.len();
    let initial: Vec<f64> = r0.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let faces = face_coefficients(model, grid, &centers);
    let mut a = BandMatrix::zeros(n, 2, 2);
    for j in 0..n {
        for (k, c) in &faces[j + 1] {
            a.add(j, *k, c / h);
        }
        for (k, c) in &faces[j] {
            a.add(j, *k, -c / h);
        }
    }
    let factor = |dt: f64, theta: f64| {
        let mut m = BandMatrix::zeros(n, 2, 2);
        for j in 0..n {
            for k in j.saturating_sub(2)..=(j + 2).min(n - 1) {
                let id = if j == k { 1.0 } else { 0.0 };
                m.add(j, k, id - theta * dt * a.get(j, k));
            }
        }
        m.factor(f64::EPSILON)
    };

    let dt_max = h.min(t_final / MIN_STEPS_PER_HORIZON);
    let trace = |r: &[f64]| {
        (
            TRACE[0] * r[0] + TRACE[1] * r[1] + TRACE[2] * r[2],
            TRACE[0] * r[n - 1] + TRACE[1] * r[n - 2] + TRACE[2] * r[n - 3],
        )
    };
    let mut r = initial.clone();
    let mut t = 0.0;
    let (tr0, tr1) = trace(&r);
    let mut traces = BoundaryTraces {
        times: vec![0.0],
        r0: vec![tr0],
        r1: vec![tr1],
    };
    let (mut out0, mut out1) = (0.0, 0.0);
    let mut flux0 = flux(&faces[0], &r);
    let mut flux1 = -flux(&faces[n], &r);
    let mut stepper: Option<Stepper> = None;
    let mut steps = 0usize;
    let mut densities = Vec::with_capacity(times.len());
    let (mut outflow0, mut outflow1) = (Vec::new(), Vec::new());

    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let m = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / m as f64;
            for s in 0..m {
                let implicit = steps < SMOOTHING_STEPS;
                let fresh = match &stepper {
                    Some(st) => st.dt != dt || st.implicit != implicit,
                    None => true,
                };
                if fresh {
                    let theta = if implicit { 1.0 } else { 0.5 };
                    stepper = Some(Stepper {
                        dt,
                        implicit,
                        lu: factor(dt, theta),
                    });
                }
                let st = stepper.as_ref().unwrap();
                let rhs = if implicit {
                    r.clone()
                } else {
                    let ar = a.matvec(&r);
                    r.iter().zip(&ar).map(|(v, d)| v + 0.5 * dt * d).collect()
                };
                let next = st.lu.solve(&rhs);
                let f0 = flux(&faces[0], &next);
                let f1 = -flux(&faces[n], &next);
                if implicit {
                    out0 += dt * f0;
                    out1 += dt * f1;
                } else {
                    out0 += 0.5 * dt * (flux0 + f0);
                    out1 += 0.5 * dt * (flux1 + f1);
                }
                flux0 = f0;
                flux1 = f1;
                r = next;
                steps += 1;
                t = if s + 1 == m { target } else { t + dt };
                let (tr0, tr1) = trace(&r);
                traces.times.push(t);
                traces.r0.push(tr0);
                traces.r1.push(tr1);
            }
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "interior solve diverged before t = {target}"
            )));
        }
        densities.push(r.clone());
        outflow0.push(out0);
        outflow1.push(out1);
    }
    let right = [model.g.derivative(1.0), model.g.value(1.0), model.drift(1.0)];
    Ok(InteriorSolution {
        kind: model.kind,
        grid: grid.clone(),
        centers,
        initial,
        times: times.to_vec(),
        densities,
        traces,
        outflow0,
        outflow1,
        dt_max,
        steps,
        right,
    })
}
