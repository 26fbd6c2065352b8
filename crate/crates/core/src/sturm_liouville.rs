//! Self-adjoint operators `Lv = (p v')' + q v` on a finite interval with
//! coupled or separated boundary rows, their spectra and spectral evolution.
//!
//! The discretization is a lumped finite-volume form. Each cell carries the
//! conductance `k = 1 / ∫_cell dx/p`, nodes carry the lumped mass `w h_i`, and
//! the coupling rows enter as boundary fluxes `p v'` expressed through the
//! endpoint values. The resulting matrix is exactly symmetric in the lumped
//! weighted inner product, and any kernel function of the form `∫ dx/p`
//! is reproduced exactly at the nodes.

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{smallest_eigenpairs, SymBand};
use crate::quadrature::simpson;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    CoupledNonlocal,
    Separated,
}

/// Two rows `c_va v(a) + c_vb v(b) + c_da v'(a) + c_db v'(b) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCoupling {
    pub rows: [[f64; 4]; 2],
    pub kind: CouplingKind,
}

impl BoundaryCoupling {
    pub fn new(rows: [[f64; 4]; 2], kind: CouplingKind) -> Result<Self> {
        let scale = rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut max_minor = 0.0f64;
        for i in 0..4 {
            for j in i + 1..4 {
                max_minor = max_minor.max((rows[0][i] * rows[1][j] - rows[0][j] * rows[1][i]).abs());
            }
        }
        if !(scale > 0.0) || max_minor <= 1e-12 * scale * scale {
            return Err(Error::DegenerateCoupling(
                "the two coupling rows are linearly dependent".into(),
            ));
        }
        Ok(Self { rows, kind })
    }

    /// `v'(a) = v'(b) = 0`.
    pub fn neumann() -> Self {
        Self {
            rows: [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
            kind: CouplingKind::Separated,
        }
    }

    /// `v(a) = v(b) = 0`.
    pub fn dirichlet() -> Self {
        Self {
            rows: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
            kind: CouplingKind::Separated,
        }
    }

    /// Row values for endpoint data `(v(a), v(b), v'(a), v'(b))`.
    pub fn apply(&self, z: [f64; 4]) -> [f64; 2] {
        let r = |row: &[f64; 4]| row.iter().zip(&z).map(|(c, v)| c * v).sum();
        [r(&self.rows[0]), r(&self.rows[1])]
    }
}

/// Coupling rows generated by two kernel functions, on `[0, 1]`:
/// `p(b)[v'(b)φ(b) − v(b)φ'(b)] − p(a)[v'(a)φ(a) − v(a)φ'(a)] = 0`.
pub fn coupled_bc_from_kernel(
    phi1: &CoefficientField,
    phi2: &CoefficientField,
    p: &CoefficientField,
) -> Result<BoundaryCoupling> {
    coupled_bc_from_kernel_on(phi1, phi2, p, 0.0, 1.0)
}

/// As [`coupled_bc_from_kernel`] for fields rescaled onto `[a, b]`.
pub fn coupled_bc_from_kernel_on(
    phi1: &CoefficientField,
    phi2: &CoefficientField,
    p: &CoefficientField,
    a: f64,
    b: f64,
) -> Result<BoundaryCoupling> {
    let len = b - a;
    let data = |phi: &CoefficientField| {
        [
            phi.value(0.0),
            phi.value(1.0),
            phi.derivative(0.0) / len,
            phi.derivative(1.0) / len,
        ]
    };
    let d1 = data(phi1);
    let d2 = data(phi2);
    let n1 = d1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n2 = d2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_minor = 0.0f64;
    for i in 0..4 {
        for j in i + 1..4 {
            max_minor = max_minor.max((d1[i] * d2[j] - d1[j] * d2[i]).abs());
        }
    }
    if !(n1 > 0.0 && n2 > 0.0) || max_minor <= 1e-10 * n1 * n2 {
        return Err(Error::DegenerateCoupling(
            "kernel functions have proportional endpoint data".into(),
        ));
    }
    let (pa, pb) = (p.value(0.0), p.value(1.0));
    let row = |d: [f64; 4]| [pa * d[2], -pb * d[3], -pa * d[0], pb * d[1]];
    BoundaryCoupling::new([row(d1), row(d2)], CouplingKind::CoupledNonlocal)
}

/// Self-adjoint problem data. `weight` is the density of the inner product.
#[derive(Debug, Clone)]
pub struct SLProblem {
    pub p: CoefficientField,
    pub q: CoefficientField,
    pub weight: CoefficientField,
    pub coupling: BoundaryCoupling,
}

impl SLProblem {
    pub fn new(
        p: CoefficientField,
        q: CoefficientField,
        weight: CoefficientField,
        coupling: BoundaryCoupling,
    ) -> Self {
        Self {
            p,
            q,
            weight,
            coupling,
        }
    }

    /// Unit weight.
    pub fn unweighted(p: CoefficientField, q: CoefficientField, coupling: BoundaryCoupling) -> Self {
        Self::new(p, q, CoefficientField::constant(1.0), coupling)
    }
}

/// How the coupling rows were folded into the matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryTreatment {
    /// Both boundary fluxes are linear in the endpoint values.
    Flux { flux: [[f64; 2]; 2] },
    /// One or both endpoint values are pinned to zero; `flux` gives the
    /// flux at the free end, if any.
    Essential { dirichlet: [bool; 2], flux: [f64; 2] },
}

/// Assembled operator, symmetric in the lumped weighted inner product.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    /// Cell conductances `1/∫_cell dx/p`.
    cond: Vec<f64>,
    /// Lumped cell lengths: `h` inside, `h/2` at the ends.
    lengths: Vec<f64>,
    /// Lumped weighted mass `w(x_i) · lengths_i`.
    mass: Vec<f64>,
    /// `q(x_i) · lengths_i`.
    qh: Vec<f64>,
    /// Boundary block added to the stiffness (values at a and b).
    corner: [[f64; 2]; 2],
    dirichlet: [bool; 2],
    p_ends: [f64; 2],
    coupling: BoundaryCoupling,
    treatment: BoundaryTreatment,
}

fn invert2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(scale > 0.0) || det.abs() <= 1e-10 * scale * scale {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

/// Splits rows into an essential (value) part and a flux part.
fn treat_coupling(c: &BoundaryCoupling, pa: f64, pb: f64) -> Result<(BoundaryTreatment, [[f64; 2]; 2])> {
    let cm = [[c.rows[0][0], c.rows[0][1]], [c.rows[1][0], c.rows[1][1]]];
    // Rows in terms of fluxes J = (p v')(a), (p v')(b).
    let dm = [
        [c.rows[0][2] / pa, c.rows[0][3] / pb],
        [c.rows[1][2] / pa, c.rows[1][3] / pb],
    ];
    if let Some(dinv) = invert2(dm) {
        let mut flux = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                flux[i][j] = -(dinv[i][0] * cm[0][j] + dinv[i][1] * cm[1][j]);
            }
        }
        // Boundary term of the weak form is J_b v(b) − J_a v(a).
        let mut k = [[-flux[0][0], -flux[0][1]], [flux[1][0], flux[1][1]]];
        let asym = (k[0][1] - k[1][0]).abs();
        let scale = k.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        if asym > 1e-8 * scale {
            return Err(Error::Assembly(format!(
                "coupling rows are not self-adjoint: boundary block asymmetry {asym:e}"
            )));
        }
        let s = 0.5 * (k[0][1] + k[1][0]);
        k[0][1] = s;
        k[1][0] = s;
        return Ok((BoundaryTreatment::Flux { flux }, k));
    }
    let dnorm = |r: usize| dm[r][0].abs().max(dm[r][1].abs());
    let cnorm = cm.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let dscale = dnorm(0).max(dnorm(1));
    let single_end = |row: [f64; 2]| -> Result<usize> {
        let (a, b) = (row[0].abs(), row[1].abs());
        let tol = 1e-10 * cnorm.max(f64::MIN_POSITIVE);
        match (a > tol, b > tol) {
            (true, false) => Ok(0),
            (false, true) => Ok(1),
            (true, true) => Err(Error::DegenerateCoupling(
                "a value constraint linking both endpoints is not supported".into(),
            )),
            (false, false) => Err(Error::DegenerateCoupling(
                "coupling rows are linearly dependent".into(),
            )),
        }
    };
    if dscale <= 1e-14 * cnorm.max(1.0) {
        // Two value rows: independent ones pin both ends.
        if invert2(cm).is_none() {
            return Err(Error::DegenerateCoupling(
                "coupling rows are linearly dependent".into(),
            ));
        }
        return Ok((
            BoundaryTreatment::Essential {
                dirichlet: [true, true],
                flux: [0.0; 2],
            },
            [[0.0; 2]; 2],
        ));
    }
    let big = if dnorm(0) >= dnorm(1) { 0 } else { 1 };
    let small = 1 - big;
    let lam = (dm[small][0] * dm[big][0] + dm[small][1] * dm[big][1])
        / (dm[big][0] * dm[big][0] + dm[big][1] * dm[big][1]);
    let value_row = [cm[small][0] - lam * cm[big][0], cm[small][1] - lam * cm[big][1]];
    let pinned = single_end(value_row)?;
    let free = 1 - pinned;
    if dm[big][pinned].abs() > 1e-10 * dscale {
        return Err(Error::DegenerateCoupling(
            "flux row involves the derivative at the pinned endpoint; not supported".into(),
        ));
    }
    // d_f J_f + c_f v_f = 0 once the pinned value vanishes.
    let jf = -cm[big][free] / dm[big][free];
    let mut k = [[0.0; 2]; 2];
    k[free][free] = if free == 0 { -jf } else { jf };
    let mut dirichlet = [false; 2];
    dirichlet[pinned] = true;
    let mut flux = [0.0; 2];
    flux[free] = jf;
    Ok((BoundaryTreatment::Essential { dirichlet, flux }, k))
}

/// Discretizes the problem on the grid.
pub fn assemble(problem: &SLProblem, grid: &Grid) -> Result<DiscreteOperator> {
    let n = grid.len();
    let len = grid.b() - grid.a();
    let s: Vec<f64> = (0..n).map(|i| grid.unit_coordinate(i)).collect();
    for i in 0..n {
        let p = problem.p.value(s[i]);
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Assembly(format!(
                "p = {p} is not positive at x = {}",
                grid.x(i)
            )));
        }
        let w = problem.weight.value(s[i]);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Assembly(format!(
                "weight = {w} is not positive at x = {}",
                grid.x(i)
            )));
        }
    }
    let p_const =
        matches!(problem.p.source(), crate::coefficients::Source::Builtin { name, .. } if name == "constant");
    let cond: Vec<f64> = (0..n - 1)
        .map(|c| {
            let r = if p_const {
                (s[c + 1] - s[c]) / problem.p.value(0.0)
            } else {
                simpson(|y| 1.0 / problem.p.value(y), s[c], s[c + 1]).value
            };
            1.0 / (len * r)
        })
        .collect();
    let lengths = grid.trapezoid_weights();
    let mass: Vec<f64> = (0..n).map(|i| problem.weight.value(s[i]) * lengths[i]).collect();
    let qh: Vec<f64> = (0..n).map(|i| problem.q.value(s[i]) * lengths[i]).collect();
    if let Some(i) = qh.iter().position(|v| !v.is_finite()) {
        return Err(Error::Assembly(format!("q is not finite at x = {}", grid.x(i))));
    }
    let p_ends = [problem.p.value(0.0), problem.p.value(1.0)];
    let (treatment, corner) = treat_coupling(&problem.coupling, p_ends[0], p_ends[1])?;
    let dirichlet = match &treatment {
        BoundaryTreatment::Flux { .. } => [false, false],
        BoundaryTreatment::Essential { dirichlet, .. } => *dirichlet,
    };
    Ok(DiscreteOperator {
        grid: grid.clone(),
        cond,
        lengths,
        mass,
        qh,
        corner,
        dirichlet,
        p_ends,
        coupling: problem.coupling.clone(),
        treatment,
    })
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Lumped weighted mass: the discrete inner-product weights.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn conductances(&self) -> &[f64] {
        &self.cond
    }

    pub fn treatment(&self) -> &BoundaryTreatment {
        &self.treatment
    }

    pub fn coupling(&self) -> &BoundaryCoupling {
        &self.coupling
    }

    /// Nodes that carry unknowns (Dirichlet ends removed).
    pub fn free_nodes(&self) -> Vec<usize> {
        let n = self.grid.len();
        (0..n)
            .filter(|&i| !(i == 0 && self.dirichlet[0]) && !(i == n - 1 && self.dirichlet[1]))
            .collect()
    }

    /// `A v` with `A` the symmetric stiffness (`−L` integrated against the
    /// hat functions, coupling included). Pinned nodes give 0.
    pub fn stiffness_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for c in 0..n - 1 {
            let f = self.cond[c] * (v[c + 1] - v[c]);
            out[c] -= f;
            out[c + 1] += f;
        }
        for i in 0..n {
            out[i] -= self.qh[i] * v[i];
        }
        let ends = [0, n - 1];
        for (r, &i) in ends.iter().enumerate() {
            for (c, &j) in ends.iter().enumerate() {
                out[i] -= self.corner[r][c] * v[j];
            }
        }
        for (r, &i) in ends.iter().enumerate() {
            if self.dirichlet[r] {
                out[i] = 0.0;
            }
        }
        out
    }

    /// Discrete `Lv` (unweighted). At interior nodes this is the
    /// conservative three-point stencil plus `q v`.
    pub fn apply_l(&self, v: &[f64]) -> Vec<f64> {
        self.stiffness_apply(v)
            .iter()
            .zip(&self.lengths)
            .map(|(a, h)| -a / h)
            .collect()
    }

    /// `(1/w) L v`, the generator of the evolution in the weighted space.
    pub fn apply_generator(&self, v: &[f64]) -> Vec<f64> {
        self.stiffness_apply(v)
            .iter()
            .zip(&self.mass)
            .map(|(a, m)| -a / m)
            .collect()
    }

    /// `L v` on interior nodes only (length `n − 2`).
    pub fn interior_residual(&self, v: &[f64]) -> Vec<f64> {
        let lv = self.apply_l(v);
        lv[1..lv.len() - 1].to_vec()
    }

    /// Weighted inner product `Σ m_i u_i v_i`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    /// Boundary fluxes `(p v')(a), (p v')(b)` implied by the half-cell
    /// balances when `dv/dt = rate`.
    pub fn boundary_fluxes(&self, v: &[f64], rate: &[f64]) -> [f64; 2] {
        let n = self.grid.len();
        let ja = self.cond[0] * (v[1] - v[0]) + self.qh[0] * v[0] - self.mass[0] * rate[0];
        let jb = self.mass[n - 1] * rate[n - 1] + self.cond[n - 2] * (v[n - 1] - v[n - 2])
            - self.qh[n - 1] * v[n - 1];
        [ja, jb]
    }

    /// Scaled residual of both coupling rows for a grid function evolving at
    /// `dv/dt = rate`, with endpoint derivatives taken from the scheme's
    /// boundary fluxes.
    pub fn coupling_residual(&self, v: &[f64], rate: &[f64]) -> f64 {
        let n = self.grid.len();
        let [ja, jb] = self.boundary_fluxes(v, rate);
        let z = [v[0], v[n - 1], ja / self.p_ends[0], jb / self.p_ends[1]];
        let rows = self.coupling.apply(z);
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let zmax = z.iter().fold(vmax, |m, x| m.max(x.abs()));
        let cmax = self
            .coupling
            .rows
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let scale = (cmax * zmax).max(f64::MIN_POSITIVE);
        rows[0].abs().max(rows[1].abs()) / scale
    }

    /// `M^{-1/2} A M^{-1/2}` on the free nodes, in folded order
    /// `f0, f_{m-1}, f1, f_{m-2}, ...`, which keeps the corner coupling
    /// inside a bandwidth of 2.
    fn folded_matrix(&self) -> (SymBand, Vec<usize>) {
        let free = self.free_nodes();
        let m = free.len();
        let order: Vec<usize> = (0..m)
            .map(|j| {
                if j % 2 == 0 {
                    free[j / 2]
                } else {
                    free[m - 1 - (j - 1) / 2]
                }
            })
            .collect();
        let mut pos = vec![usize::MAX; self.grid.len()];
        for (j, &node) in order.iter().enumerate() {
            pos[node] = j;
        }
        let n = self.grid.len();
        let mut b = SymBand::zeros(m, 2.min(m.saturating_sub(1)));
        let scale = |i: usize| self.mass[i].sqrt();
        let add = |b: &mut SymBand, i: usize, j: usize, v: f64| {
            if pos[i] == usize::MAX || pos[j] == usize::MAX {
                return;
            }
            let (pi, pj) = (pos[i], pos[j]);
            let cur = b.get(pi, pj);
            b.set(pi, pj, cur + v / (scale(i) * scale(j)));
        };
        for c in 0..n - 1 {
            let k = self.cond[c];
            add(&mut b, c, c, k);
            add(&mut b, c + 1, c + 1, k);
            add(&mut b, c, c + 1, -k);
        }
        for i in 0..n {
            add(&mut b, i, i, -self.qh[i]);
        }
        add(&mut b, 0, 0, -self.corner[0][0]);
        add(&mut b, n - 1, n - 1, -self.corner[1][1]);
        if n - 1 != 0 {
            add(&mut b, 0, n - 1, -self.corner[0][1]);
        }
        (b, order)
    }
}

/// Ordered eigenpairs of `−L` with weighted-orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// Discrete inner-product weights (lumped weighted mass).
    pub weight: Vec<f64>,
    pub zero_multiplicity: usize,
    pub zero_threshold: f64,
    /// Scaled coupling-row residual of each eigenvector.
    pub bc_residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weight
            .iter()
            .zip(u)
            .zip(v)
            .map(|((m, a), b)| m * a * b)
            .sum()
    }

    /// Expansion coefficients `⟨v, w_k⟩`.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        self.eigenvectors.iter().map(|w| self.inner(v, w)).collect()
    }

    /// Eigenvalue with the zero cluster snapped to exactly zero.
    pub fn effective_eigenvalue(&self, k: usize) -> f64 {
        let lam = self.eigenvalues[k];
        if lam.abs() <= self.zero_threshold {
            0.0
        } else {
            lam
        }
    }

    /// `Σ c_k w_k`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for (c, w) in coeffs.iter().zip(&self.eigenvectors) {
            if *c != 0.0 {
                out.iter_mut().zip(w).for_each(|(o, x)| *o += c * x);
            }
        }
        out
    }
}

/// The `k` smallest eigenpairs of `−L`; requires `k ≤ n − 2`.
pub fn eigensolve(op: &DiscreteOperator, k: usize) -> Result<EigenSystem> {
    let n = op.grid.len();
    if k == 0 || k > n - 2 {
        return Err(Error::Argument(format!(
            "eigenpair count {k} must lie in 1..={}",
            n - 2
        )));
    }
    let (b, order) = op.folded_matrix();
    let k = k.min(order.len());
    let eig = smallest_eigenpairs(&b, k)?;
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (lam, y) in eig.values.iter().zip(&eig.vectors) {
        let mut w = vec![0.0; n];
        for (j, &node) in order.iter().enumerate() {
            w[node] = y[j] / op.mass[node].sqrt();
        }
        let imax = (0..n)
            .max_by(|&a, &b| w[a].abs().partial_cmp(&w[b].abs()).unwrap())
            .unwrap_or(0);
        if w[imax] < 0.0 {
            w.iter_mut().for_each(|v| *v = -*v);
        }
        let rate: Vec<f64> = w.iter().map(|v| -lam * v).collect();
        residuals.push(op.coupling_residual(&w, &rate));
        vectors.push(w);
    }
    let lam_k = *eig.values.last().unwrap();
    let zero_threshold = 1e-8 * lam_k.abs().max(1.0);
    let zero_multiplicity = eig.values.iter().filter(|l| l.abs() <= zero_threshold).count();
    Ok(EigenSystem {
        grid: op.grid.clone(),
        eigenvalues: eig.values,
        eigenvectors: vectors,
        weight: op.mass.clone(),
        zero_multiplicity,
        zero_threshold,
        bc_residuals: residuals,
        iterations: eig.iterations,
    })
}

/// Time-stamped grid functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// Estimated truncation remainder per snapshot.
    pub truncation: Vec<f64>,
}

/// Spectral evolution `v(t) = Σ a_k e^{−λ_k t} w_k` over the available modes.
pub fn evolve(eig: &EigenSystem, v0: &[f64], times: &[f64]) -> Result<Trajectory> {
    if times.is_empty() {
        return Err(Error::Argument("evolve needs at least one time".into()));
    }
    if v0.len() != eig.grid.len() {
        return Err(Error::Argument(format!(
            "initial data has {} values for a {}-node grid",
            v0.len(),
            eig.grid.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::Argument(format!(
            "time {t} is not a finite nonnegative number"
        )));
    }
    let a = eig.coefficients(v0);
    let last = eig.len() - 1;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut truncation = Vec::with_capacity(times.len());
    for &t in times {
        let c: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(k, ak)| ak * (-eig.effective_eigenvalue(k) * t).exp())
            .collect();
        truncation.push(c[last].abs());
        snapshots.push(eig.synthesize(&c));
    }
    Ok(Trajectory {
        grid: eig.grid.clone(),
        times: times.to_vec(),
        snapshots,
        truncation,
    })
}

/// Projection of `v0` onto the zero eigenspace.
pub fn steady_state(eig: &EigenSystem, v0: &[f64]) -> Result<Vec<f64>> {
    if eig.zero_multiplicity == 0 {
        return Err(Error::NoSteadyState);
    }
    let mut c = vec![0.0; eig.len()];
    for (k, ck) in c.iter_mut().enumerate() {
        if eig.eigenvalues[k].abs() <= eig.zero_threshold {
            *ck = eig.inner(v0, &eig.eigenvectors[k]);
        }
    }
    Ok(eig.synthesize(&c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub min_value: f64,
    pub time: f64,
    pub node: usize,
    pub floor: f64,
    pub passed: bool,
}

/// Minimum over all snapshots; passes when it is at least `−floor`.
pub fn positivity_check(traj: &Trajectory, floor: f64) -> PositivityReport {
    let mut best = (f64::INFINITY, 0.0, 0);
    for (t, snap) in traj.times.iter().zip(&traj.snapshots) {
        for (i, &v) in snap.iter().enumerate() {
            if v < best.0 {
                best = (v, *t, i);
            }
        }
    }
    PositivityReport {
        min_value: best.0,
        time: best.1,
        node: best.2,
        floor,
        passed: best.0 >= -floor,
    }
}
