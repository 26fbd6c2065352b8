//! Conservative problems built from conservation laws, positivity
//! certification, reduction of general drift-diffusion operators, and
//! prescribed moments through Duhamel's formula.

use std::sync::Arc;

use crate::coefficients::{eta_weight, expr, CoefficientField};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sturm_liouville::{
    assemble, coupled_bc_from_kernel, BoundaryCoupling, CouplingKind, DiscreteOperator, EigenSystem,
    SLProblem, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Totally,
    Partially,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    IntrinsicallyPositive,
    Nonnegative,
    Unknown,
}

/// Directions swept by [`certify_intrinsic_positivity`].
pub const POSITIVITY_DIRECTIONS: usize = 720;
/// A combination counts as positive when its nodal minimum exceeds this.
pub const POSITIVITY_MARGIN: f64 = 1e-12;

/// Recorded for partially conservative problems: positivity there rests on
/// a strong maximum principle that is not checked.
pub const ASSUMPTION_STRONG_MAXIMUM_PRINCIPLE: &str = "strong_maximum_principle";

#[derive(Debug, Clone)]
pub struct ConservativeProblem {
    pub sl: SLProblem,
    pub laws: Vec<CoefficientField>,
    pub kind: ProblemKind,
    pub extra_bc: Option<[f64; 4]>,
    pub positivity: Positivity,
    pub grid: Grid,
    pub assumptions: Vec<&'static str>,
}

impl ConservativeProblem {
    pub fn operator(&self) -> Result<DiscreteOperator> {
        assemble(&self.sl, &self.grid)
    }

    /// Laws sampled at the grid nodes.
    pub fn law_nodes(&self) -> Vec<Vec<f64>> {
        self.laws.iter().map(|l| sample(l, &self.grid)).collect()
    }
}

pub(crate) fn sample(f: &CoefficientField, grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| f.value(grid.unit_coordinate(i)))
        .collect()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Kernel acceptance threshold for a law on a grid of spacing `h`.
pub fn kernel_tolerance(phi_sup: f64, q_sup: f64, p_sup: f64, h: f64) -> f64 {
    1e-6 * (1.0 + phi_sup * q_sup + phi_sup * p_sup / (h * h))
}

/// `‖Lφ‖_∞` over interior nodes together with its acceptance threshold.
pub fn kernel_residual(
    p: &CoefficientField,
    q: &CoefficientField,
    phi: &CoefficientField,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let probe = SLProblem::unweighted(p.clone(), q.clone(), BoundaryCoupling::neumann());
    let op = assemble(&probe, grid)?;
    let nodes = sample(phi, grid);
    let res = sup(&op.interior_residual(&nodes));
    let tol = kernel_tolerance(
        sup(&nodes),
        sup(&sample(q, grid)),
        sup(&sample(p, grid)),
        grid.h(),
    );
    Ok((res, tol))
}

fn check_law(
    index: usize,
    p: &CoefficientField,
    q: &CoefficientField,
    phi: &CoefficientField,
    grid: &Grid,
) -> Result<()> {
    let (residual, tolerance) = kernel_residual(p, q, phi, grid)?;
    if !(residual <= tolerance) {
        return Err(Error::NotAConservationLaw {
            index,
            residual,
            tolerance,
        });
    }
    Ok(())
}

fn check_independent(a: &[f64], b: &[f64]) -> Result<()> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(na > 0.0 && nb > 0.0) || dot.abs() >= (1.0 - 1e-10) * na * nb {
        return Err(Error::Rank("the two laws are proportional on the grid".into()));
    }
    Ok(())
}

/// Totally conservative problem with unit weight.
pub fn build_totally_conservative(
    p: &CoefficientField,
    q: &CoefficientField,
    phi1: &CoefficientField,
    phi2: &CoefficientField,
    grid: &Grid,
) -> Result<ConservativeProblem> {
    build_totally_conservative_weighted(p, q, &CoefficientField::constant(1.0), phi1, phi2, grid)
}

/// Totally conservative problem: both laws are checked against the kernel
/// and turned into coupled boundary rows.
pub fn build_totally_conservative_weighted(
    p: &CoefficientField,
    q: &CoefficientField,
    weight: &CoefficientField,
    phi1: &CoefficientField,
    phi2: &CoefficientField,
    grid: &Grid,
) -> Result<ConservativeProblem> {
    check_law(0, p, q, phi1, grid)?;
    check_law(1, p, q, phi2, grid)?;
    check_independent(&sample(phi1, grid), &sample(phi2, grid))?;
    let coupling = coupled_bc_from_kernel(phi1, phi2, p)?;
    let mut problem = ConservativeProblem {
        sl: SLProblem::new(p.clone(), q.clone(), weight.clone(), coupling),
        laws: vec![phi1.clone(), phi2.clone()],
        kind: ProblemKind::Totally,
        extra_bc: None,
        positivity: Positivity::Unknown,
        grid: grid.clone(),
        assumptions: Vec::new(),
    };
    problem.positivity = certify_intrinsic_positivity(&problem);
    Ok(problem)
}

/// Partially conservative problem: one law plus one independent boundary row.
pub fn build_partially_conservative(
    p: &CoefficientField,
    q: &CoefficientField,
    weight: &CoefficientField,
    phi: &CoefficientField,
    extra_bc: [f64; 4],
    grid: &Grid,
) -> Result<ConservativeProblem> {
    check_law(0, p, q, phi, grid)?;
    let (pa, pb) = (p.value(0.0), p.value(1.0));
    let law_row = [
        pa * phi.derivative(0.0),
        -pb * phi.derivative(1.0),
        -pa * phi.value(0.0),
        pb * phi.value(1.0),
    ];
    let coupling = BoundaryCoupling::new([law_row, extra_bc], CouplingKind::CoupledNonlocal)?;
    let nodes = sample(phi, grid);
    let positivity = if nodes.iter().all(|v| *v > POSITIVITY_MARGIN) {
        Positivity::IntrinsicallyPositive
    } else if nodes.iter().all(|v| *v >= 0.0) {
        Positivity::Nonnegative
    } else {
        Positivity::Unknown
    };
    Ok(ConservativeProblem {
        sl: SLProblem::new(p.clone(), q.clone(), weight.clone(), coupling),
        laws: vec![phi.clone()],
        kind: ProblemKind::Partially,
        extra_bc: Some(extra_bc),
        positivity,
        grid: grid.clone(),
        assumptions: vec![ASSUMPTION_STRONG_MAXIMUM_PRINCIPLE],
    })
}

/// Sweeps directions `(cos θ, sin θ)` over the laws, each scaled to unit
/// sup norm first, looking for a combination positive at every node.
pub fn certify_intrinsic_positivity(problem: &ConservativeProblem) -> Positivity {
    let laws = problem.law_nodes();
    if laws.len() != 2 {
        return Positivity::Unknown;
    }
    let scaled: Vec<Vec<f64>> = laws
        .iter()
        .map(|l| {
            let s = sup(l);
            l.iter().map(|v| if s > 0.0 { v / s } else { 0.0 }).collect()
        })
        .collect();
    for j in 0..POSITIVITY_DIRECTIONS {
        let th = 2.0 * std::f64::consts::PI * j as f64 / POSITIVITY_DIRECTIONS as f64;
        let (s, c) = th.sin_cos();
        let min = scaled[0]
            .iter()
            .zip(&scaled[1])
            .map(|(a, b)| c * a + s * b)
            .fold(f64::INFINITY, f64::min);
        if min > POSITIVITY_MARGIN {
            return Positivity::IntrinsicallyPositive;
        }
    }
    if laws.iter().all(|l| l.iter().all(|v| *v >= 0.0)) {
        Positivity::Nonnegative
    } else {
        Positivity::Unknown
    }
}

/// Writes `M u = a u'' + b u' + c u` in self-adjoint form with `η = exp(∫b/a)`:
/// `p = η`, `q = cη/a`, weight `η/a`. The laws `φ_i` conserved by `M`
/// (integrated against `dx`) become the kernel functions `(a/η) φ_i`.
pub fn reduce_general_operator(
    a: &CoefficientField,
    b: &CoefficientField,
    c: &CoefficientField,
    phi1: &CoefficientField,
    phi2: &CoefficientField,
    grid: &Grid,
) -> Result<(ConservativeProblem, CoefficientField)> {
    let eta = eta_weight(a, b)?;
    let ratio = |name: &str, num: CoefficientField, den: CoefficientField, law: Option<CoefficientField>| {
        CoefficientField::from_fn(name, Vec::new(), move |x| {
            let l = law.as_ref().map_or(1.0, |f| f.value(x));
            num.value(x) * l / den.value(x)
        })
    };
    let weight = ratio("eta_over_a", eta.clone(), a.clone(), None);
    let q = {
        let (c, eta, a) = (c.clone(), eta.clone(), a.clone());
        CoefficientField::from_fn("c_eta_over_a", Vec::new(), move |x| {
            c.value(x) * eta.value(x) / a.value(x)
        })
    };
    let psi1 = ratio("reduced_law", a.clone(), eta.clone(), Some(phi1.clone()));
    let psi2 = ratio("reduced_law", a.clone(), eta.clone(), Some(phi2.clone()));
    let problem = build_totally_conservative_weighted(&eta, &q, &weight, &psi1, &psi2, grid)?;
    Ok((problem, weight))
}

/// `max_t |⟨u(t), law⟩ − ⟨u(0), law⟩| / max(1, |⟨u(0), law⟩|)` with the
/// inner product `Σ weight_i law(x_i) u_i`.
pub fn conservation_residual(traj: &Trajectory, law: &CoefficientField, weight: &[f64]) -> f64 {
    let l = sample(law, &traj.grid);
    let moment = |u: &[f64]| -> f64 { u.iter().zip(&l).zip(weight).map(|((u, l), w)| u * l * w).sum() };
    let Some(first) = traj.snapshots.first() else {
        return 0.0;
    };
    let m0 = moment(first);
    traj.snapshots
        .iter()
        .map(|s| (moment(s) - m0).abs() / m0.abs().max(1.0))
        .fold(0.0, f64::max)
}

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function of time with a derivative.
#[derive(Clone)]
pub struct TimeFunction {
    f: TimeFn,
    df: Option<TimeFn>,
    label: String,
}

impl std::fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TimeFunction({})", self.label)
    }
}

const TIME_FD_STEP: f64 = 1e-4;

impl TimeFunction {
    pub fn new<F, D>(label: &str, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            df: Some(Arc::new(df)),
            label: label.to_string(),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(&c.to_string(), move |_| c, |_| 0.0)
    }

    /// Expression in `t`; the derivative is a fourth-order central difference.
    pub fn from_expr(text: &str) -> Result<Self> {
        let e = expr::parse_with_var(text, "t")?;
        let e = Arc::new(e);
        let e2 = e.clone();
        let f: TimeFn = Arc::new(move |t| e.eval(t).unwrap_or(f64::NAN));
        let check = e2.eval(0.0)?;
        if !check.is_finite() {
            return Err(Error::Evaluation {
                x: 0.0,
                message: format!("`{text}` is not finite at t = 0"),
            });
        }
        Ok(Self {
            f,
            df: None,
            label: text.to_string(),
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if let Some(df) = &self.df {
            return df(t);
        }
        let d = TIME_FD_STEP;
        let f = |s: f64| (self.f)(s);
        (f(t - 2.0 * d) - 8.0 * f(t - d) + 8.0 * f(t + d) - f(t + 2.0 * d)) / (12.0 * d)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Moments `⟨v(t), φ_i⟩ = F_i(t)` against weighted-orthonormal laws.
#[derive(Debug, Clone)]
pub struct MomentPrescription {
    pub f: [TimeFunction; 2],
    /// Orthonormalized laws at the nodes.
    pub phis: [Vec<f64>; 2],
    pub weight: Vec<f64>,
}

impl MomentPrescription {
    /// Orthonormalizes the nodal laws by Gram-Schmidt in `Σ weight_i u_i v_i`.
    pub fn new(laws: [&[f64]; 2], weight: &[f64], f1: TimeFunction, f2: TimeFunction) -> Result<Self> {
        let ip =
            |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).zip(weight).map(|((a, b), w)| a * b * w).sum() };
        let n0 = ip(laws[0], laws[0]).sqrt();
        if !(n0 > 0.0) {
            return Err(Error::Rank("first law has zero norm".into()));
        }
        let e0: Vec<f64> = laws[0].iter().map(|v| v / n0).collect();
        let c = ip(laws[1], &e0);
        let mut e1: Vec<f64> = laws[1].iter().zip(&e0).map(|(v, e)| v - c * e).collect();
        let n1 = ip(&e1, &e1).sqrt();
        if !(n1 > 1e-10 * ip(laws[1], laws[1]).sqrt()) {
            return Err(Error::Rank("laws are linearly dependent".into()));
        }
        e1.iter_mut().for_each(|v| *v /= n1);
        Ok(Self {
            f: [f1, f2],
            phis: [e0, e1],
            weight: weight.to_vec(),
        })
    }

    pub fn moment(&self, i: usize, v: &[f64]) -> f64 {
        v.iter()
            .zip(&self.phis[i])
            .zip(&self.weight)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    /// `Σ F_i(t) φ_i`.
    pub fn lift(&self, t: f64) -> Vec<f64> {
        let (a, b) = (self.f[0].value(t), self.f[1].value(t));
        self.phis[0]
            .iter()
            .zip(&self.phis[1])
            .map(|(x, y)| a * x + b * y)
            .collect()
    }
}

/// A spatially discrete source term `G(·, t)`.
pub trait Forcing: Sync {
    fn at(&self, t: f64) -> Vec<f64>;
}

impl<F: Fn(f64) -> Vec<f64> + Sync> Forcing for F {
    fn at(&self, t: f64) -> Vec<f64> {
        self(t)
    }
}

/// `G(x, t) = F₁'(t) φ₁(x) + F₂'(t) φ₂(x)`.
#[derive(Debug, Clone)]
pub struct MomentSource {
    pres: MomentPrescription,
}

impl Forcing for MomentSource {
    fn at(&self, t: f64) -> Vec<f64> {
        let (a, b) = (self.pres.f[0].derivative(t), self.pres.f[1].derivative(t));
        self.pres.phis[0]
            .iter()
            .zip(&self.pres.phis[1])
            .map(|(x, y)| a * x + b * y)
            .collect()
    }
}

/// `w0 = v0 − Σ F_i(0) φ_i` and the source `G`.
pub fn prescribed_moments_reduce(v0: &[f64], pres: &MomentPrescription) -> Result<(Vec<f64>, MomentSource)> {
    for i in 0..2 {
        let m = pres.moment(i, v0);
        let f0 = pres.f[i].value(0.0);
        if !((m - f0).abs() <= 1e-8 * f0.abs().max(1.0)) {
            return Err(Error::Compatibility(format!(
                "⟨v0, φ{}⟩ = {m} but F{}(0) = {f0}",
                i + 1,
                i + 1
            )));
        }
    }
    let lift = pres.lift(0.0);
    let w0 = v0.iter().zip(&lift).map(|(v, l)| v - l).collect();
    Ok((w0, MomentSource { pres: pres.clone() }))
}

/// Relative tolerance of the panel-doubling time quadrature.
pub const DUHAMEL_TOL: f64 = 1e-10;
const DUHAMEL_MAX_LEVEL: u32 = 18;

/// `E_m(z) = ∫₀¹ σ^m e^{−zσ} dσ` for `m = 0, 1, 2`.
fn exp_moments(z: f64) -> [f64; 3] {
    if z.abs() < 1.0 {
        let mut out = [0.0; 3];
        for (m, o) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut s = 0.0;
            for j in 0..40 {
                s += term / (m + j + 1) as f64;
                term *= -z / (j + 1) as f64;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            *o = s;
        }
        out
    } else {
        let ez = (-z).exp();
        let e0 = -(-z).exp_m1() / z;
        let e1 = (e0 - ez) / z;
        let e2 = (2.0 * e1 - ez) / z;
        [e0, e1, e2]
    }
}

/// `∫_{s0}^{s0+H} e^{−λ(t1−s)} g(s) ds` with `t1 = s0 + H` and `g` the
/// quadratic through the three given values: product integration.
fn panel_weights(lam: f64, h: f64) -> [f64; 3] {
    let [e0, e1, e2] = exp_moments(lam * h);
    let mu0 = e0;
    let mu1 = e0 - e1;
    let mu2 = e0 - 2.0 * e1 + e2;
    [
        h * (2.0 * mu2 - 3.0 * mu1 + mu0),
        h * (-4.0 * mu2 + 4.0 * mu1),
        h * (2.0 * mu2 - mu1),
    ]
}

/// Integral over `[t0, t1]` of `e^{−λ_k(t1−s)} g_k(s)` for all modes, with
/// `g` sampled at `2P + 1` equispaced points.
fn duhamel_segment(lams: &[f64], samples: &[Vec<f64>], t0: f64, t1: f64) -> Vec<f64> {
    let panels = (samples.len() - 1) / 2;
    let h = (t1 - t0) / panels as f64;
    lams.iter()
        .enumerate()
        .map(|(k, &lam)| {
            let w = panel_weights(lam, h);
            let mut acc = 0.0;
            let decay = (-lam * h).exp();
            for p in 0..panels {
                let g = [samples[2 * p][k], samples[2 * p + 1][k], samples[2 * p + 2][k]];
                acc = acc * decay + w[0] * g[0] + w[1] * g[1] + w[2] * g[2];
            }
            acc
        })
        .collect()
}

/// `w(t) = e^{tL} w0 + ∫₀ᵗ e^{(t−s)L} G(s) ds`, computed mode by mode with
/// exact exponential weights and panel doubling in `s`.
pub fn duhamel_evolve(eig: &EigenSystem, w0: &[f64], g: &dyn Forcing, times: &[f64]) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::Argument("duhamel_evolve needs at least one time".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times[0] < 0.0 {
        return Err(Error::Argument("times must be nonnegative and sorted".into()));
    }
    let lams: Vec<f64> = (0..eig.len()).map(|k| eig.effective_eigenvalue(k)).collect();
    let project = |s: f64| eig.coefficients(&g.at(s));
    let mut c = eig.coefficients(w0);
    let mut t_prev = 0.0;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut truncation = Vec::with_capacity(times.len());
    for &t in times {
        if t > t_prev {
            let dt = t - t_prev;
            // Samples at level P: 2P + 1 points; doubling reuses them.
            let mut samples: Vec<Vec<f64>> = (0..=4).map(|j| project(t_prev + dt * j as f64 / 4.0)).collect();
            let mut prev = duhamel_segment(&lams, &samples, t_prev, t);
            let mut level = 2;
            loop {
                let m = samples.len() - 1;
                let mut refined = Vec::with_capacity(2 * m + 1);
                for (j, s) in samples.into_iter().enumerate() {
                    if j > 0 {
                        let tj = t_prev + dt * (2 * j - 1) as f64 / (2 * m) as f64;
                        refined.push(project(tj));
                    }
                    refined.push(s);
                }
                samples = refined;
                let cur = duhamel_segment(&lams, &samples, t_prev, t);
                let diff = cur
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let scale = cur.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                level += 1;
                if diff <= DUHAMEL_TOL * scale {
                    prev = cur;
                    break;
                }
                if level > DUHAMEL_MAX_LEVEL {
                    return Err(Error::Numerical(format!(
                        "Duhamel quadrature on [{t_prev}, {t}] did not converge: \
                         change {diff:e} after {} panels",
                        (samples.len() - 1) / 2
                    )));
                }
                prev = cur;
            }
            for k in 0..c.len() {
                c[k] = c[k] * (-lams[k] * dt).exp() + prev[k];
            }
            t_prev = t;
        }
        truncation.push(c.last().map_or(0.0, |v| v.abs()));
        snapshots.push(eig.synthesize(&c));
    }
    Ok(Trajectory {
        grid: eig.grid.clone(),
        times: times.to_vec(),
        snapshots,
        truncation,
    })
}

/// Solution with prescribed moments: `v` and its zero-moment part `w`.
#[derive(Debug, Clone)]
pub struct PrescribedSolution {
    pub v: Trajectory,
    pub w: Trajectory,
}

/// Evolves `v_t = Lv + G` from `v0` so that `⟨v(t), φ_i⟩ = F_i(t)`.
///
/// The homogeneous part is evolved from `w0` with the source `G`, which
/// shifts its moments by `F_i(t) − F_i(0)`; adding back `Σ F_i(0) φ_i`
/// gives `v`, and `w = v − Σ F_i(t) φ_i` has zero moments.
pub fn solve_prescribed_moments(
    eig: &EigenSystem,
    v0: &[f64],
    pres: &MomentPrescription,
    times: &[f64],
) -> Result<PrescribedSolution> {
    let (w0, g) = prescribed_moments_reduce(v0, pres)?;
    let shifted = duhamel_evolve(eig, &w0, &g, times)?;
    let lift0 = pres.lift(0.0);
    let mut v = shifted.clone();
    let mut w = shifted;
    for (j, &t) in times.iter().enumerate() {
        let lift_t = pres.lift(t);
        for i in 0..lift0.len() {
            v.snapshots[j][i] += lift0[i];
            w.snapshots[j][i] = v.snapshots[j][i] - lift_t[i];
        }
    }
    Ok(PrescribedSolution { v, w })
}
