//! Elliptic regularization `g → g + ε` solved through the self-adjoint
//! substitution `u = v p / g_ε`.

use super::{DegenerateModel, ModelKind};
use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sturm_liouville::{
    assemble, coupled_bc_from_kernel, eigensolve, evolve, BoundaryCoupling, DiscreteOperator, EigenSystem,
    SLProblem, Trajectory,
};

fn check_factors(g_eps: &[f64], p: &[f64], len: usize) -> Result<()> {
    if g_eps.len() != len || p.len() != len {
        return Err(Error::Transform(format!(
            "transform needs {len} samples of g_ε and p, got {} and {}",
            g_eps.len(),
            p.len()
        )));
    }
    if let Some(i) = (0..len).find(|&i| !(g_eps[i] > 0.0 && p[i] > 0.0)) {
        return Err(Error::Transform(format!(
            "nonpositive factor at sample {i}: g_ε = {}, p = {}",
            g_eps[i], p[i]
        )));
    }
    Ok(())
}

/// `v = u g_ε / p`.
pub fn to_selfadjoint(u: &[f64], g_eps: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    check_factors(g_eps, p, u.len())?;
    Ok(u.iter().zip(g_eps).zip(p).map(|((u, g), p)| u * g / p).collect())
}

/// `u = v p / g_ε`.
pub fn from_selfadjoint(v: &[f64], g_eps: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    check_factors(g_eps, p, v.len())?;
    Ok(v.iter().zip(g_eps).zip(p).map(|((v, g), p)| v * p / g).collect())
}

/// Sturm-Liouville form of the regularized equation: `p`, `q = 0` and
/// weight `p / g_ε`, with the coupling rows of the conservation laws.
pub fn regularized_problem(model: &DegenerateModel, eps: f64) -> Result<SLProblem> {
    let g_eps = model.g_eps(eps)?;
    let p = model.weight_p().clone();
    let pw = p.clone();
    let gw = g_eps.clone();
    let weight = CoefficientField::from_fn("regularized_weight", vec![eps], move |x| {
        pw.value(x) / gw.value(x)
    });
    let coupling = match model.kind {
        ModelKind::Kimura => {
            let phi = model.fixation()?;
            coupled_bc_from_kernel(&CoefficientField::constant(1.0), &phi, &p)?
        }
        ModelKind::Sis => BoundaryCoupling::neumann(),
    };
    Ok(SLProblem::new(p, CoefficientField::zero(), weight, coupling))
}

#[derive(Debug, Clone)]
pub struct RegularizedSolution {
    pub eps: f64,
    /// Density `u^ε` at the grid nodes.
    pub u: Trajectory,
    /// Self-adjoint variable `v^ε`.
    pub v: Trajectory,
    pub eigen: EigenSystem,
    pub operator: DiscreteOperator,
    pub g_eps: Vec<f64>,
    pub p: Vec<f64>,
}

impl RegularizedSolution {
    /// Trapezoid mass of snapshot `k`, equal to `⟨v, 1⟩` in the lumped weight.
    pub fn mass(&self, k: usize) -> f64 {
        self.moment(k, &|_| 1.0)
    }

    pub fn moment(&self, k: usize, f: &dyn Fn(f64) -> f64) -> f64 {
        let g = &self.u.grid;
        g.trapezoid_weights()
            .iter()
            .zip(g.nodes())
            .zip(&self.u.snapshots[k])
            .map(|((w, x), u)| w * f(*x) * u)
            .sum()
    }
}

/// Solves `u_t = (g_ε u)'' − (g ψ u)'` from nodal data `u_i` and reports
/// snapshots at `times`, all of which must lie in `[0, t_final]`.
pub fn solve_regularized(
    model: &DegenerateModel,
    u_i: &[f64],
    eps: f64,
    t_final: f64,
    times: &[f64],
    grid: &Grid,
) -> Result<RegularizedSolution> {
    if u_i.len() != grid.len() {
        return Err(Error::Argument(format!(
            "initial data has {} values for a {}-node grid",
            u_i.len(),
            grid.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= t_final)) {
        return Err(Error::Argument(format!("time {t} outside [0, {t_final}]")));
    }
    let problem = regularized_problem(model, eps)?;
    let op = assemble(&problem, grid)?;
    let eigen = eigensolve(&op, grid.len() - 2)?;
    let g_eps: Vec<f64> = grid.nodes().iter().map(|&x| model.g.value(x) + eps).collect();
    let p = problem.p.values_at(grid.nodes());
    let v0 = to_selfadjoint(u_i, &g_eps, &p)?;
    let v = evolve(&eigen, &v0, times)?;
    let snapshots = v
        .snapshots
        .iter()
        .map(|s| from_selfadjoint(s, &g_eps, &p))
        .collect::<Result<Vec<_>>>()?;
    let u = Trajectory {
        grid: grid.clone(),
        times: v.times.clone(),
        snapshots,
        truncation: v.truncation.clone(),
    };
    Ok(RegularizedSolution {
        eps,
        u,
        v,
        eigen,
        operator: op,
        g_eps,
        p,
    })
}
