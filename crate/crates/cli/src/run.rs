//! Command dispatch. Each command fills an [`OutputDir`] and returns the
//! checks, warnings and assumptions that go into the manifest.

use std::fmt;

use conspde::conservative::{
    build_totally_conservative_weighted, solve_prescribed_moments, MomentPrescription, TimeFunction,
};
use conspde::degenerate::{atomic_masses_flux_form, interior_limit, vanishing_limit_at};
use conspde::mc_oracle::{InitialLaw, Simulation};
use conspde::sturm_liouville::eigensolve;
use conspde::{
    compare, simulate, BoundaryMeasure, DegenerateModel, Grid, ModelKind, RegularizationLadder, SdeSpec,
};

use crate::config::{Command, RunConfig};
use crate::output::{num, Check, OutputDir, Table, WriteError};

pub const MASSES_HEADER: [&str; 6] = ["t", "atom0", "atom1", "interior_mass", "total_mass", "phi_moment"];
const ORACLE_HEADER: [&str; 6] = ["t", "mass0", "mass1", "interior", "se_mass0", "se_mass1"];
const REPORT_HEADER: [&str; 11] = [
    "t",
    "pde_atom0",
    "mc_atom0",
    "se_atom0",
    "z_atom0",
    "pde_atom1",
    "mc_atom1",
    "se_atom1",
    "z_atom1",
    "cdf_distance",
    "passed",
];

#[derive(Debug)]
pub enum Failure {
    /// Input that parsed but cannot be used, such as a negative density.
    Input(String),
    Solver {
        context: &'static str,
        error: conspde::Error,
    },
    Write(WriteError),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "config error: {m}"),
            Failure::Solver { context, error } => write!(f, "{context}: {error}"),
            Failure::Write(e) => write!(f, "write failed: {e}"),
        }
    }
}

impl From<WriteError> for Failure {
    fn from(e: WriteError) -> Self {
        Failure::Write(e)
    }
}

fn solver(context: &'static str) -> impl Fn(conspde::Error) -> Failure {
    move |error| Failure::Solver { context, error }
}

#[derive(Debug, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub assumptions: Vec<String>,
    pub notes: Vec<(String, String)>,
}

impl Report {
    fn note(&mut self, k: &str, v: impl ToString) {
        self.notes.push((k.to_string(), v.to_string()));
    }
}

pub fn execute(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, Failure> {
    match cfg.command {
        Command::Kimura | Command::Sis => degenerate(cfg, out),
        Command::Spectrum => spectrum(cfg, out),
        Command::Moments => moments(cfg, out),
        Command::Oracle => oracle(cfg, out).map(|(r, _)| r),
        Command::Validate => validate(cfg, out),
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid, Failure> {
    Grid::unit(cfg.n).map_err(solver("grid"))
}

fn model(cfg: &RunConfig) -> Result<DegenerateModel, Failure> {
    if cfg.sis {
        DegenerateModel::sis(cfg.r0).map_err(solver("degenerate::DegenerateModel::sis"))
    } else {
        DegenerateModel::kimura(cfg.psi.clone()).map_err(solver("degenerate::DegenerateModel::kimura"))
    }
}

/// `u_I` at the nodes, optionally scaled to unit trapezoid mass.
fn initial_density(cfg: &RunConfig, grid: &Grid) -> Result<Vec<f64>, Failure> {
    let mut u = Vec::with_capacity(grid.len());
    for &x in grid.nodes() {
        let v = cfg.u_i.eval(x).map_err(|e| Failure::Input(format!("u_i: {e}")))?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Failure::Input(format!(
                "u_i({x}) = {v} is not a nonnegative number"
            )));
        }
        u.push(v);
    }
    if cfg.normalize {
        let mass: f64 = grid.trapezoid_weights().iter().zip(&u).map(|(w, v)| w * v).sum();
        if !(mass > 0.0) {
            return Err(Failure::Input("u_i has no mass to normalize".into()));
        }
        u.iter_mut().for_each(|v| *v /= mass);
    }
    Ok(u)
}

/// A unit spike at the node nearest `x0`, and the node used.
fn point_density(grid: &Grid, x0: f64) -> (Vec<f64>, f64) {
    let i = grid.nearest(x0);
    let mut u = vec![0.0; grid.len()];
    let w = grid.trapezoid_weights()[i];
    u[i] = 1.0 / w;
    (u, grid.x(i))
}

struct Degenerate {
    model: DegenerateModel,
    measures: Vec<BoundaryMeasure>,
}

fn solve_degenerate(
    cfg: &RunConfig,
    u: &[f64],
    out: &mut OutputDir,
    report: &mut Report,
) -> Result<Degenerate, Failure> {
    let model = model(cfg)?;
    let grid = grid(cfg)?;
    let kimura = model.kind == ModelKind::Kimura;
    if kimura && !model.psi.is_continuous_tier() {
        report
            .warnings
            .push("psi is below the continuous regularity tier; flux-form atoms are not checked".into());
    }
    let limit = interior_limit(&model, u, cfg.t_final, &cfg.times, &grid)
        .map_err(solver("degenerate::interior_limit"))?;
    report.warnings.extend(limit.warnings.iter().cloned());
    let sol = &limit.interior;
    let (a0, b0) = (limit.initial.atom0, limit.initial.atom1);
    let reference = a0 + b0 + sol.initial.iter().sum::<f64>() * sol.cell_width();
    report.note("initial_mass", num(reference));
    report.note("time_step_max", num(sol.dt_max));
    report.note("time_steps", sol.steps);

    let drift = limit
        .measures
        .iter()
        .map(|m| (m.total_mass() - reference).abs())
        .fold(0.0, f64::max);
    let decrease = limit
        .measures
        .windows(2)
        .map(|w| (w[0].atom0 - w[1].atom0).max(w[0].atom1 - w[1].atom1))
        .fold(0.0, f64::max);
    if kimura {
        report
            .checks
            .push(Check::at_most("total_mass_drift", drift, cfg.mass_tol));
        let phi = model.fixation().map_err(solver("degenerate::fixation"))?;
        let phi0 = reference_phi_moment(&limit.initial, sol, &phi);
        let phi_drift = limit
            .measures
            .iter()
            .map(|m| (m.moment(&|x| phi.value(x)) - phi0).abs())
            .fold(0.0, f64::max);
        report
            .checks
            .push(Check::at_most("phi_moment_drift", phi_drift, cfg.mass_tol));
        if model.psi.is_continuous_tier() {
            let (fa, fb) = atomic_masses_flux_form(&sol.traces, a0, b0, &model.psi)
                .map_err(solver("degenerate::atomic_masses_flux_form"))?;
            let gap = limit
                .measures
                .iter()
                .map(|m| {
                    (m.atom0 - fa.at(m.time))
                        .abs()
                        .max((m.atom1 - fb.at(m.time)).abs())
                })
                .fold(0.0, f64::max);
            report
                .checks
                .push(Check::at_most("flux_form_agreement", gap, cfg.formula_tol));
        }
    } else {
        report
            .checks
            .push(Check::at_most("total_mass_drift", drift, cfg.sis_mass_tol));
        let k = limit.measures.len() - 1;
        report.note("robin_residual_final", num(sol.zero_flux_residual(k)));
    }
    report
        .checks
        .push(Check::at_most("atom_decrease", decrease, 1e-10));

    if let Some(eps) = &cfg.epsilons {
        let ladder = RegularizationLadder::new(model.g.clone(), eps.clone())
            .map_err(solver("degenerate::RegularizationLadder"))?;
        let lim = vanishing_limit_at(&model, u, &ladder, cfg.t_final, &cfg.times, &grid, &cfg.probes)
            .map_err(solver("degenerate::vanishing_limit"))?;
        for w in &lim.warnings {
            if !report.warnings.contains(w) {
                report.warnings.push(w.clone());
            }
        }
        report
            .assumptions
            .extend(lim.assumptions.iter().map(|a| a.to_string()));
        let d = &lim.diagnostics;
        report.note("ladder_monotone_fraction", num(d.monotone_fraction));
        let mut values = Table::new(&["t", "epsilon", "x", "u"]);
        let mut atoms = Table::new(&["t", "epsilon", "atom0", "atom1"]);
        let mut rich = Table::new(&["t", "x", "extrapolated", "observed_order"]);
        for (ti, t) in d.times.iter().enumerate() {
            for (j, e) in d.epsilons.iter().enumerate() {
                for (p, x) in d.probes.iter().enumerate() {
                    values.row(&[*t, *e, *x, d.values[ti][j][p]]);
                }
                let (a, b) = d.decomposed_atoms[ti][j];
                atoms.row(&[*t, *e, a, b]);
            }
            for (p, x) in d.probes.iter().enumerate() {
                rich.row(&[*t, *x, d.richardson[ti][p], d.observed_order[ti][p]]);
            }
        }
        out.table("ladder.csv", values)?;
        out.table("ladder_atoms.csv", atoms)?;
        out.table("richardson.csv", rich)?;
    }
    Ok(Degenerate {
        model,
        measures: limit.measures,
    })
}

fn reference_phi_moment(
    initial: &BoundaryMeasure,
    sol: &conspde::degenerate::InteriorSolution,
    phi: &conspde::CoefficientField,
) -> f64 {
    let h = sol.cell_width();
    let interior: f64 = sol
        .initial
        .iter()
        .zip(&sol.centers)
        .map(|(r, x)| r * phi.value(*x) * h)
        .sum();
    initial.atom0 * phi.value(0.0) + initial.atom1 * phi.value(1.0) + interior
}

fn write_measures(cfg: &RunConfig, d: Option<&Degenerate>, out: &mut OutputDir) -> Result<(), Failure> {
    let mut masses = Table::new(&MASSES_HEADER);
    let mut plot_masses = Table::new(&["t", "series", "value"]);
    let mut plot_density = Table::new(&["t", "x", "r"]);
    if let Some(d) = d {
        let phi = match d.model.kind {
            ModelKind::Kimura => Some(d.model.fixation().map_err(solver("degenerate::fixation"))?),
            ModelKind::Sis => None,
        };
        for m in &d.measures {
            let phi_moment = phi.as_ref().map_or(f64::NAN, |f| m.moment(&|x| f.value(x)));
            let row = [
                m.time,
                m.atom0,
                m.atom1,
                m.interior_mass(),
                m.total_mass(),
                phi_moment,
            ];
            masses.row(&row);
            for (name, v) in MASSES_HEADER[1..5].iter().zip(&row[1..5]) {
                plot_masses.text_row(&[num(m.time), name.to_string(), num(*v)]);
            }
            let mut density = Table::new(&["x", "r"]);
            for (x, r) in m.x.iter().zip(&m.density) {
                density.row(&[*x, *r]);
                plot_density.row(&[m.time, *x, *r]);
            }
            out.table(&format!("density_t{}.csv", num(m.time)), density)?;
        }
    }
    out.table("masses.csv", masses)?;
    if cfg.emit_plot_data {
        out.table("plot_masses.csv", plot_masses)?;
        out.table("plot_density.csv", plot_density)?;
    }
    Ok(())
}

fn degenerate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, Failure> {
    let mut report = Report::default();
    if cfg.times.is_empty() {
        model(cfg)?;
        write_measures(cfg, None, out)?;
        return Ok(report);
    }
    let g = grid(cfg)?;
    let u = initial_density(cfg, &g)?;
    let d = solve_degenerate(cfg, &u, out, &mut report)?;
    write_measures(cfg, Some(&d), out)?;
    Ok(report)
}

fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, Failure> {
    let mut report = Report::default();
    let g = grid(cfg)?;
    let problem = build_totally_conservative_weighted(&cfg.p, &cfg.q, &cfg.w, &cfg.law1, &cfg.law2, &g)
        .map_err(solver("conservative::build_totally_conservative"))?;
    report
        .assumptions
        .extend(problem.assumptions.iter().map(|a| a.to_string()));
    report.note("positivity", format!("{:?}", problem.positivity));
    let op = problem.operator().map_err(solver("sturm_liouville::assemble"))?;
    let eig = eigensolve(&op, cfg.k).map_err(solver("sturm_liouville::eigensolve"))?;
    report.note("zero_multiplicity", eig.zero_multiplicity);
    let mut table = Table::new(&["k", "lambda", "bc_residual"]);
    let mut plot = Table::new(&["k", "x", "w"]);
    for (i, (lam, res)) in eig.eigenvalues.iter().zip(&eig.bc_residuals).enumerate() {
        table.row(&[(i + 1) as f64, *lam, *res]);
        for (x, w) in g.nodes().iter().zip(&eig.eigenvectors[i]) {
            plot.row(&[(i + 1) as f64, *x, *w]);
        }
    }
    if eig.len() >= 3 {
        let l = &eig.eigenvalues;
        report.checks.push(Check::at_most(
            "double_zero",
            l[0].abs().max(l[1].abs()) / l[2],
            1e-8,
        ));
        report
            .checks
            .push(Check::flag("third_eigenvalue_positive", l[2] > 0.0));
    }
    out.table("eigenvalues.csv", table)?;
    if cfg.emit_plot_data {
        out.table("plot_eigenvectors.csv", plot)?;
    }
    Ok(report)
}

fn moments(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, Failure> {
    let mut report = Report::default();
    let g = grid(cfg)?;
    let problem = build_totally_conservative_weighted(&cfg.p, &cfg.q, &cfg.w, &cfg.law1, &cfg.law2, &g)
        .map_err(solver("conservative::build_totally_conservative"))?;
    report
        .assumptions
        .extend(problem.assumptions.iter().map(|a| a.to_string()));
    report.note("positivity", format!("{:?}", problem.positivity));
    let op = problem.operator().map_err(solver("sturm_liouville::assemble"))?;
    let eig = eigensolve(&op, g.len() - 2).map_err(solver("sturm_liouville::eigensolve"))?;
    let laws = problem.law_nodes();
    let mut v0 = Vec::with_capacity(g.len());
    for &x in g.nodes() {
        v0.push(cfg.v0.eval(x).map_err(|e| Failure::Input(format!("v0: {e}")))?);
    }
    let basis = MomentPrescription::new(
        [&laws[0], &laws[1]],
        &eig.weight,
        TimeFunction::constant(0.0),
        TimeFunction::constant(0.0),
    )
    .map_err(solver("conservative::MomentPrescription"))?;
    let initial = [basis.moment(0, &v0), basis.moment(1, &v0)];
    let f = [&cfg.f1, &cfg.f2]
        .map(|f| f.clone())
        .into_iter()
        .zip(initial)
        .map(|(f, m)| f.unwrap_or_else(|| TimeFunction::constant(m)))
        .collect::<Vec<_>>();
    // Shift v0 along the orthonormal laws so its moments match F(0).
    let mut shift = 0.0f64;
    for i in 0..2 {
        let delta = f[i].value(0.0) - initial[i];
        shift = shift.max(delta.abs());
        v0.iter_mut()
            .zip(&basis.phis[i])
            .for_each(|(v, e)| *v += delta * e);
    }
    if shift > 1e-12 {
        report.warnings.push(format!(
            "v0 shifted along the laws by up to {} to match F(0)",
            num(shift)
        ));
    }
    let pres = MomentPrescription::new([&laws[0], &laws[1]], &eig.weight, f[0].clone(), f[1].clone())
        .map_err(solver("conservative::MomentPrescription"))?;

    let mut table = Table::new(&["t", "moment1", "target1", "moment2", "target2", "min_v"]);
    let mut plot = Table::new(&["t", "x", "r"]);
    if !cfg.times.is_empty() {
        let sol = solve_prescribed_moments(&eig, &v0, &pres, &cfg.times)
            .map_err(solver("conservative::solve_prescribed_moments"))?;
        let mut gap = 0.0f64;
        for (t, v) in cfg.times.iter().zip(&sol.v.snapshots) {
            let m = [pres.moment(0, v), pres.moment(1, v)];
            let target = [pres.f[0].value(*t), pres.f[1].value(*t)];
            gap = gap.max((m[0] - target[0]).abs()).max((m[1] - target[1]).abs());
            let min_v = v.iter().copied().fold(f64::INFINITY, f64::min);
            table.row(&[*t, m[0], target[0], m[1], target[1], min_v]);
            let mut density = Table::new(&["x", "r"]);
            for (x, r) in g.nodes().iter().zip(v) {
                density.row(&[*x, *r]);
                plot.row(&[*t, *x, *r]);
            }
            out.table(&format!("density_t{}.csv", num(*t)), density)?;
        }
        report
            .checks
            .push(Check::at_most("moment_tracking", gap, cfg.moment_tol));
    }
    out.table("moments.csv", table)?;
    if cfg.emit_plot_data {
        out.table("plot_density.csv", plot)?;
    }
    Ok(report)
}

fn oracle_spec(cfg: &RunConfig, model: &DegenerateModel, initial: InitialLaw) -> SdeSpec {
    SdeSpec::for_model(model, initial, cfg.t_final, cfg.replicates, cfg.seed)
        .with_dt(cfg.dt)
        .with_bins(cfg.bins)
}

fn write_oracle(sim: Option<&Simulation>, out: &mut OutputDir) -> Result<(), Failure> {
    let mut table = Table::new(&ORACLE_HEADER);
    let mut hist = Table::new(&["t", "bin_lo", "bin_hi", "mass", "se"]);
    for e in sim.map_or(&[][..], |s| &s.snapshots[..]) {
        table.row(&[
            e.time,
            e.mass_at_0,
            e.mass_at_1,
            e.interior(),
            e.se_mass_at_0,
            e.se_mass_at_1,
        ]);
        let edges = e.bin_edges();
        for (k, (m, se)) in e.histogram.iter().zip(&e.se_histogram).enumerate() {
            hist.row(&[e.time, edges[k], edges[k + 1], *m, *se]);
        }
    }
    out.table("oracle.csv", table)?;
    out.table("histogram.csv", hist)?;
    Ok(())
}

fn oracle(cfg: &RunConfig, out: &mut OutputDir) -> Result<(Report, Option<Simulation>), Failure> {
    let mut report = Report::default();
    let model = model(cfg)?;
    if cfg.times.is_empty() {
        write_oracle(None, out)?;
        return Ok((report, None));
    }
    let initial = match cfg.x0 {
        Some(x) => InitialLaw::Point(x),
        None => InitialLaw::Density(cfg.u_i.clone()),
    };
    let sim =
        simulate(&oracle_spec(cfg, &model, initial), &cfg.times).map_err(solver("mc_oracle::simulate"))?;
    report.warnings.extend(sim.warnings.iter().cloned());
    report
        .assumptions
        .extend(sim.assumptions.iter().map(|a| a.to_string()));
    write_oracle(Some(&sim), out)?;
    Ok((report, Some(sim)))
}

fn validate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, Failure> {
    let mut report = Report::default();
    let g = grid(cfg)?;
    let model = model(cfg)?;
    // Compare at positive times only: at t = 0 a point mass sits on a bin
    // edge of the histogram or inside a cell of the grid, depending on side.
    let times: Vec<f64> = cfg.times.iter().copied().filter(|t| *t > 0.0).collect();
    let mut table = Table::new(&REPORT_HEADER);
    if times.is_empty() {
        write_measures(cfg, None, out)?;
        write_oracle(None, out)?;
        out.table("report.csv", table)?;
        return Ok(report);
    }
    let (u, initial) = match cfg.x0 {
        Some(x0) => {
            let (u, x) = point_density(&g, x0);
            if x != x0 {
                report
                    .warnings
                    .push(format!("x0 = {x0} moved to the nearest node {x}"));
            }
            (u, InitialLaw::Point(x))
        }
        None => (initial_density(cfg, &g)?, InitialLaw::Density(cfg.u_i.clone())),
    };
    let mut sub = cfg.clone();
    sub.times = times.clone();
    let d = solve_degenerate(&sub, &u, out, &mut report)?;
    write_measures(&sub, Some(&d), out)?;
    let sim = simulate(&oracle_spec(cfg, &model, initial), &times).map_err(solver("mc_oracle::simulate"))?;
    report.warnings.extend(sim.warnings.iter().cloned());
    report
        .assumptions
        .extend(sim.assumptions.iter().map(|a| a.to_string()));
    write_oracle(Some(&sim), out)?;

    for (m, e) in d.measures.iter().zip(&sim.snapshots) {
        let c = compare(e, m).map_err(solver("mc_oracle::compare"))?;
        let total = m.total_mass();
        let z = c.z_atom0.abs().max(c.z_atom1.abs());
        let atoms = Check::at_most(&format!("atoms_t{}", num(m.time)), z, cfg.z_threshold);
        let cdf = Check::at_most(
            &format!("cdf_t{}", num(m.time)),
            c.cdf_distance,
            cfg.cdf_threshold,
        );
        let passed = atoms.passed && cdf.passed;
        table.text_row(&[
            num(m.time),
            num(m.atom0 / total),
            num(e.mass_at_0),
            num(e.se_mass_at_0),
            num(c.z_atom0),
            num(m.atom1 / total),
            num(e.mass_at_1),
            num(e.se_mass_at_1),
            num(c.z_atom1),
            num(c.cdf_distance),
            passed.to_string(),
        ]);
        report.checks.push(atoms);
        report.checks.push(cdf);
    }
    out.table("report.csv", table)?;
    Ok(report)
}
