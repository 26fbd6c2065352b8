//! Splitting of nodal data into atoms plus density, and the vanishing
//! regularization ladder.

use rayon::prelude::*;

use super::atoms::{atomic_masses_conservation_form, sis_atom_mass};
use super::interior::{solve_interior, InteriorSolution};
use super::regularized::{solve_regularized, RegularizedSolution};
use super::{BoundaryMeasure, DegenerateModel, ModelKind, RegularizationLadder};
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_PROBES: [f64; 3] = [0.25, 0.5, 0.75];
/// Share of probes allowed to converge non-monotonically before a warning.
pub const NONMONOTONE_FRACTION: f64 = 0.2;
pub const ASSUMPTION_RICHARDSON: &str = "richardson_order1";

fn end_extrapolation(u: &[f64], left: bool) -> f64 {
    let n = u.len();
    if left {
        3.0 * u[1] - 3.0 * u[2] + u[3]
    } else {
        3.0 * u[n - 2] - 3.0 * u[n - 3] + u[n - 4]
    }
}

/// Splits nodal values into atoms and a nodal density. The boundary value is
/// compared with a cubic extrapolation from the adjacent nodes; the excess,
/// times the half-cell width, becomes the atom and the boundary value is
/// replaced by the extrapolation.
pub fn decompose(u: &[f64], grid: &Grid, time: f64) -> Result<BoundaryMeasure> {
    decompose_ends(u, grid, time, [true, true])
}

/// As [`decompose`], extracting atoms only where `ends` is set.
pub fn decompose_ends(u: &[f64], grid: &Grid, time: f64, ends: [bool; 2]) -> Result<BoundaryMeasure> {
    let n = grid.len();
    if u.len() != n {
        return Err(Error::Argument(format!("{} values for a {n}-node grid", u.len())));
    }
    if n < 4 {
        return Err(Error::Argument("decomposition needs at least 4 nodes".into()));
    }
    let h = grid.h();
    let mut density = u.to_vec();
    let (mut atom0, mut atom1) = (0.0, 0.0);
    if ends[0] {
        let e = end_extrapolation(u, true);
        atom0 = (u[0] - e) * h / 2.0;
        density[0] = e;
    }
    if ends[1] {
        let e = end_extrapolation(u, false);
        atom1 = (u[n - 1] - e) * h / 2.0;
        density[n - 1] = e;
    }
    Ok(BoundaryMeasure {
        time,
        atom0,
        atom1,
        x: grid.nodes().to_vec(),
        density,
        weights: grid.trapezoid_weights(),
    })
}

#[derive(Debug, Clone)]
pub struct LadderDiagnostics {
    pub epsilons: Vec<f64>,
    pub probes: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[t][j][p]`: `u^{ε_j}` at probe `p` and time `t`.
    pub values: Vec<Vec<Vec<f64>>>,
    /// `differences[t][j][p] = |u^{ε_{j+1}} − u^{ε_j}|`.
    pub differences: Vec<Vec<Vec<f64>>>,
    /// First-order extrapolation to `ε = 0`, `[t][p]`.
    pub richardson: Vec<Vec<f64>>,
    /// Convergence order fitted from the last two differences, `[t][p]`.
    pub observed_order: Vec<Vec<f64>>,
    /// Fraction of probes (over positive times) with shrinking differences.
    pub monotone_fraction: f64,
    /// Atoms obtained by decomposing each regularized snapshot, `[t][j]`.
    pub decomposed_atoms: Vec<Vec<(f64, f64)>>,
    /// Mass drift of each regularized solve.
    pub mass_drift: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VanishingLimit {
    /// Limit measures at each requested time.
    pub measures: Vec<BoundaryMeasure>,
    pub interior: InteriorSolution,
    pub diagnostics: LadderDiagnostics,
    pub warnings: Vec<String>,
    pub assumptions: Vec<&'static str>,
}

/// Limit of the regularized solutions as `ε → 0`, with default probes.
pub fn vanishing_limit(
    model: &DegenerateModel,
    u_i: &[f64],
    ladder: &RegularizationLadder,
    t_final: f64,
    times: &[f64],
    grid: &Grid,
) -> Result<VanishingLimit> {
    vanishing_limit_at(model, u_i, ladder, t_final, times, grid, &DEFAULT_PROBES)
}

fn model_ends(model: &DegenerateModel) -> [bool; 2] {
    match model.kind {
        ModelKind::Kimura => [true, true],
        ModelKind::Sis => [true, false],
    }
}

/// Limit measures without the regularization ladder.
#[derive(Debug, Clone)]
pub struct InteriorLimit {
    /// `u_i` split into its initial atoms and density.
    pub initial: BoundaryMeasure,
    pub measures: Vec<BoundaryMeasure>,
    pub interior: InteriorSolution,
    pub warnings: Vec<String>,
}

/// Splits `u_i` into atoms and density, evolves the density in the open
/// interval and attaches atoms from the conservation laws (Kimura) or the
/// boundary outflow (SIS).
pub fn interior_limit(
    model: &DegenerateModel,
    u_i: &[f64],
    t_final: f64,
    times: &[f64],
    grid: &Grid,
) -> Result<InteriorLimit> {
    let mut warnings = Vec::new();
    let initial = decompose_ends(u_i, grid, 0.0, model_ends(model))?;
    let interior = solve_interior(model, &initial.density, t_final, times, grid)?;
    let measures = match model.kind {
        ModelKind::Kimura => {
            let phi = model.fixation()?;
            let (a, b, w) = atomic_masses_conservation_form(&interior, initial.atom0, initial.atom1, &phi)?;
            warnings.extend(w);
            (0..times.len())
                .map(|k| interior.measure(k, a.values[k], b.values[k]))
                .collect()
        }
        ModelKind::Sis => {
            let r0 = model.r0.expect("SIS model carries R0");
            let a = sis_atom_mass(&interior.traces, initial.atom0, r0)?;
            (0..times.len())
                .map(|k| interior.measure(k, a.at(times[k]), 0.0))
                .collect()
        }
    };
    Ok(InteriorLimit {
        initial,
        measures,
        interior,
        warnings,
    })
}

/// The limit measures come from the interior solve, with atoms from the
/// conservation laws (Kimura) or the boundary outflow (SIS). The ladder of
/// regularized solves is reported alongside as a convergence diagnostic.
pub fn vanishing_limit_at(
    model: &DegenerateModel,
    u_i: &[f64],
    ladder: &RegularizationLadder,
    t_final: f64,
    times: &[f64],
    grid: &Grid,
    probes: &[f64],
) -> Result<VanishingLimit> {
    if ladder.epsilons.len() < 2 {
        return Err(Error::Argument(
            "the ladder needs at least two values of ε".into(),
        ));
    }
    let ends = model_ends(model);
    let limit = interior_limit(model, u_i, t_final, times, grid)?;
    let mut warnings = limit.warnings;
    let (measures, interior) = (limit.measures, limit.interior);

    let solves: Vec<RegularizedSolution> = ladder
        .epsilons
        .par_iter()
        .map(|&eps| solve_regularized(model, u_i, eps, t_final, times, grid))
        .collect::<Result<_>>()?;
    let diagnostics = ladder_diagnostics(&solves, probes, times, grid, ends)?;
    let nonmonotone = 1.0 - diagnostics.monotone_fraction;
    if nonmonotone > NONMONOTONE_FRACTION {
        warnings.push(format!(
            "regularized solutions approach the limit non-monotonically at {:.0}% of probes",
            100.0 * nonmonotone
        ));
    }
    if diagnostics
        .observed_order
        .iter()
        .zip(times)
        .filter(|(_, t)| **t > 0.0)
        .flat_map(|(o, _)| o.iter())
        .any(|p| !(p.is_finite() && (p - 1.0).abs() <= 0.5))
    {
        warnings.push(format!(
            "observed ε-convergence order is far from 1; the {ASSUMPTION_RICHARDSON} extrapolation is unreliable"
        ));
    }
    Ok(VanishingLimit {
        measures,
        interior,
        diagnostics,
        warnings,
        assumptions: vec![ASSUMPTION_RICHARDSON],
    })
}

fn ladder_diagnostics(
    solves: &[RegularizedSolution],
    probes: &[f64],
    times: &[f64],
    grid: &Grid,
    ends: [bool; 2],
) -> Result<LadderDiagnostics> {
    let eps: Vec<f64> = solves.iter().map(|s| s.eps).collect();
    let nodes: Vec<usize> = probes.iter().map(|&x| grid.nearest(x)).collect();
    let j_last = eps.len() - 1;
    let (mut values, mut differences) = (Vec::new(), Vec::new());
    let (mut richardson, mut observed_order) = (Vec::new(), Vec::new());
    let mut decomposed_atoms = Vec::new();
    let (mut monotone, mut counted) = (0usize, 0usize);
    for (k, &t) in times.iter().enumerate() {
        let vals: Vec<Vec<f64>> = solves
            .iter()
            .map(|s| nodes.iter().map(|&i| s.u.snapshots[k][i]).collect())
            .collect();
        let diffs: Vec<Vec<f64>> = (0..j_last)
            .map(|j| {
                (0..nodes.len())
                    .map(|p| (vals[j + 1][p] - vals[j][p]).abs())
                    .collect()
            })
            .collect();
        let rich: Vec<f64> = (0..nodes.len())
            .map(|p| {
                let (ui, uj) = (vals[j_last - 1][p], vals[j_last][p]);
                let (ei, ej) = (eps[j_last - 1], eps[j_last]);
                uj - ej * (ui - uj) / (ei - ej)
            })
            .collect();
        let order: Vec<f64> = (0..nodes.len())
            .map(|p| {
                if diffs.len() < 2 {
                    return f64::NAN;
                }
                let m = diffs.len();
                let (d1, d2) = (diffs[m - 2][p], diffs[m - 1][p]);
                let (e0, e1, e2) = (eps[m - 2], eps[m - 1], eps[m]);
                (d1 / d2).ln() / ((e0 - e1) / (e1 - e2)).ln()
            })
            .collect();
        if t > 0.0 {
            for p in 0..nodes.len() {
                counted += 1;
                if diffs.windows(2).all(|w| w[1][p] < w[0][p]) {
                    monotone += 1;
                }
            }
        }
        let atoms = solves
            .iter()
            .map(|s| decompose_ends(&s.u.snapshots[k], grid, t, ends).map(|m| (m.atom0, m.atom1)))
            .collect::<Result<Vec<_>>>()?;
        values.push(vals);
        differences.push(diffs);
        richardson.push(rich);
        observed_order.push(order);
        decomposed_atoms.push(atoms);
    }
    let mass_drift = solves
        .iter()
        .map(|s| {
            let m0 = s.mass(0);
            (0..times.len())
                .map(|k| (s.mass(k) - m0).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(LadderDiagnostics {
        epsilons: eps,
        probes: probes.to_vec(),
        times: times.to_vec(),
        values,
        differences,
        richardson,
        observed_order,
        monotone_fraction: if counted == 0 {
            1.0
        } else {
            monotone as f64 / counted as f64
        },
        decomposed_atoms,
        mass_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::kimura_g;

    #[test]
    fn decompose_smooth_data_has_no_atoms() {
        let grid = Grid::unit(41).unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|x| 1.0 + x - x * x).collect();
        let m = decompose(&u, &grid, 0.0).unwrap();
        assert!(m.atom0.abs() < 1e-14 && m.atom1.abs() < 1e-14);
        let q: f64 = grid.trapezoid_weights().iter().zip(&u).map(|(w, v)| w * v).sum();
        assert!((m.total_mass() - q).abs() < 1e-14);
    }

    #[test]
    fn decompose_spike_becomes_atom() {
        let grid = Grid::unit(41).unwrap();
        let h = grid.h();
        let mut u = vec![1.0; 41];
        u[0] += 0.3 / (h / 2.0);
        let m = decompose(&u, &grid, 0.0).unwrap();
        assert!((m.atom0 - 0.3).abs() < 1e-12);
        assert!((m.density[0] - 1.0).abs() < 1e-12);
        assert!(decompose(&u[..3], &grid, 0.0).is_err());
    }

    fn neutral_limit(times: &[f64]) -> VanishingLimit {
        let grid = Grid::unit(101).unwrap();
        let ladder = RegularizationLadder::new(kimura_g(), vec![1e-1, 3e-2, 1e-2]).unwrap();
        let model = DegenerateModel::neutral();
        vanishing_limit(&model, &vec![1.0; 101], &ladder, 1.0, times, &grid).unwrap()
    }

    #[test]
    fn neutral_limit_conserves_and_reports_ladder() {
        let lim = neutral_limit(&[0.0, 0.5, 1.0]);
        for m in &lim.measures {
            assert!((m.total_mass() - 1.0).abs() < 1e-10);
            assert!((m.moment(&|x| x) - 0.5).abs() < 1e-10);
            let exact = 0.5 * (1.0 - (-2.0 * m.time).exp());
            assert!((m.atom0 - exact).abs() < 5e-3);
        }
        let d = &lim.diagnostics;
        assert_eq!(d.values.len(), 3);
        assert_eq!(d.differences[1].len(), 2);
        assert!(d.mass_drift.iter().all(|v| *v < 1e-10));
        // The ladder approaches from above at the centre.
        let mid = d.values[2].iter().map(|v| v[1]).collect::<Vec<_>>();
        assert!(mid[0] > mid[1] && mid[1] > mid[2]);
        assert!(lim.assumptions.contains(&ASSUMPTION_RICHARDSON));
    }

    #[test]
    fn short_ladder_is_rejected() {
        let grid = Grid::unit(21).unwrap();
        let ladder = RegularizationLadder::new(kimura_g(), vec![1e-1]).unwrap();
        let r = vanishing_limit(
            &DegenerateModel::neutral(),
            &[1.0; 21],
            &ladder,
            1.0,
            &[1.0],
            &grid,
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }
}
