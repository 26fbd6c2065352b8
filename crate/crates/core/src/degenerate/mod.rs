//! Boundary-degenerate Kolmogorov equations `u_t = (g u)'' − (g ψ u)'` with
//! `g(0) = 0`: the Kimura equation (`g = x(1−x)`, degenerate at both ends)
//! and the SIS equation (`g = xF/2`, degenerate at 0 only). Solutions are
//! measures with atoms at the degenerate endpoints.

pub mod atoms;
pub mod interior;
pub mod measure;
pub mod regularized;
pub mod weak;

pub use atoms::{atomic_masses_conservation_form, atomic_masses_flux_form, sis_atom_mass, MassCurve};
pub use interior::{solve_interior, BoundaryTraces, InteriorSolution};
pub use measure::{
    decompose, interior_limit, vanishing_limit, vanishing_limit_at, InteriorLimit, LadderDiagnostics,
    VanishingLimit,
};
pub use regularized::{from_selfadjoint, solve_regularized, to_selfadjoint, RegularizedSolution};
pub use weak::{weak_form_residual, TestFunction};

use crate::coefficients::{fixation_probability, kimura_g, sis_family, weight_p, CoefficientField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Kimura,
    Sis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryModeAt1 {
    /// `g(1) = 0`; the second conservation law holds.
    DegenerateWithSecondLaw,
    /// `g(1) > 0`; zero flux through a Robin row.
    RobinFlux,
}

#[derive(Debug, Clone)]
pub struct DegenerateModel {
    pub kind: ModelKind,
    pub psi: CoefficientField,
    pub r0: Option<f64>,
    pub g: CoefficientField,
    pub boundary_mode_at_1: BoundaryModeAt1,
    p: CoefficientField,
}

impl DegenerateModel {
    pub fn kimura(psi: CoefficientField) -> Result<Self> {
        let p = weight_p(&psi)?;
        Ok(Self {
            kind: ModelKind::Kimura,
            psi,
            r0: None,
            g: kimura_g(),
            boundary_mode_at_1: BoundaryModeAt1::DegenerateWithSecondLaw,
            p,
        })
    }

    /// Neutral Kimura model, `ψ ≡ 0`.
    pub fn neutral() -> Self {
        Self::kimura(CoefficientField::zero()).expect("zero drift")
    }

    pub fn sis(r0: f64) -> Result<Self> {
        let fam = sis_family(r0)?;
        Ok(Self {
            kind: ModelKind::Sis,
            psi: fam.psi(),
            r0: Some(r0),
            g: fam.g(),
            boundary_mode_at_1: BoundaryModeAt1::RobinFlux,
            p: fam.p,
        })
    }

    /// `p = exp(∫ψ)`.
    pub fn weight_p(&self) -> &CoefficientField {
        &self.p
    }

    /// `g_ε = g + ε`.
    pub fn g_eps(&self, eps: f64) -> Result<CoefficientField> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Parameter(format!("ε must be positive, got {eps}")));
        }
        let g = self.g.clone();
        let g2 = self.g.clone();
        Ok(CoefficientField::from_fn_with_derivative(
            "g_eps",
            vec![eps],
            move |x| g.value(x) + eps,
            move |x| g2.derivative(x),
        ))
    }

    /// Fixation probability; Kimura only.
    pub fn fixation(&self) -> Result<CoefficientField> {
        match self.kind {
            ModelKind::Kimura => fixation_probability(&self.psi),
            ModelKind::Sis => Err(Error::Argument(
                "the SIS model has a single conservation law".into(),
            )),
        }
    }

    /// Drift of the untransformed equation, `g ψ`.
    pub fn drift(&self, x: f64) -> f64 {
        self.g.value(x) * self.psi.value(x)
    }

    /// Rate at which interior mass is absorbed by the atom at 0 per unit
    /// boundary density: `g'(0)`.
    pub fn outflow_rate_at_0(&self) -> f64 {
        self.g.derivative(0.0)
    }
}

/// Atoms at 0 and 1 plus an interior density `r` sampled at `x` with
/// quadrature weights `weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeasure {
    pub time: f64,
    pub atom0: f64,
    pub atom1: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryMeasure {
    pub fn interior_mass(&self) -> f64 {
        self.density.iter().zip(&self.weights).map(|(r, w)| r * w).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.atom0 + self.interior_mass() + self.atom1
    }

    /// `f(0) a + ∫ r f + f(1) b`.
    pub fn moment(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        let interior: f64 = self
            .x
            .iter()
            .zip(&self.density)
            .zip(&self.weights)
            .map(|((x, r), w)| f(*x) * r * w)
            .sum();
        f(0.0) * self.atom0 + interior + f(1.0) * self.atom1
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Quadratic extrapolation of the density to `x = 1`.
    pub fn trace_at_1(&self) -> f64 {
        let n = self.x.len();
        if n < 3 {
            return self.density.last().copied().unwrap_or(0.0);
        }
        lagrange_at(
            [self.x[n - 1], self.x[n - 2], self.x[n - 3]],
            [self.density[n - 1], self.density[n - 2], self.density[n - 3]],
            1.0,
        )
    }
}

fn lagrange_at(xs: [f64; 3], ys: [f64; 3], x: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let mut l = 1.0;
        for j in 0..3 {
            if i != j {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        s += l * ys[i];
    }
    s
}

/// Decreasing list of regularization parameters for `g_ε = g + ε`.
#[derive(Debug, Clone)]
pub struct RegularizationLadder {
    pub g: CoefficientField,
    pub epsilons: Vec<f64>,
}

impl RegularizationLadder {
    pub fn new(g: CoefficientField, epsilons: Vec<f64>) -> Result<Self> {
        if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Parameter("ladder values must be positive".into()));
        }
        if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Parameter("ladder must be strictly decreasing".into()));
        }
        let min_g = g.min_sample();
        if let Some(e) = epsilons.iter().find(|e| min_g + **e <= 0.0) {
            return Err(Error::Parameter(format!("g + {e} is not positive")));
        }
        Ok(Self { g, epsilons })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_invariants() {
        let k = DegenerateModel::neutral();
        assert_eq!(k.g.value(0.0), 0.0);
        assert_eq!(k.g.value(1.0), 0.0);
        let s = DegenerateModel::sis(2.0).unwrap();
        assert_eq!(s.g.value(0.0), 0.0);
        assert!(s.g.value(1.0) > 0.0);
        assert!((s.outflow_rate_at_0() - 1.5).abs() < 1e-14);
        // g ψ is the SIS drift x(R0(1−x) − 1).
        for x in [0.1, 0.6] {
            assert!((s.drift(x) - x * (2.0 * (1.0 - x) - 1.0)).abs() < 1e-12);
        }
        assert!(s.fixation().is_err());
        assert!(k.g_eps(0.0).is_err());
    }

    #[test]
    fn ladder_validation() {
        let g = kimura_g();
        assert!(RegularizationLadder::new(g.clone(), vec![0.1, 0.01]).is_ok());
        assert!(RegularizationLadder::new(g.clone(), vec![0.01, 0.1]).is_err());
        assert!(RegularizationLadder::new(g, vec![0.1, -0.01]).is_err());
    }

    #[test]
    fn measure_moments() {
        let m = BoundaryMeasure {
            time: 0.0,
            atom0: 0.2,
            atom1: 0.3,
            x: vec![0.25, 0.5, 0.75],
            density: vec![1.0, 1.0, 1.0],
            weights: vec![0.5 / 3.0; 3],
        };
        assert!((m.total_mass() - 1.0).abs() < 1e-15);
        assert!((m.moment(&|x| x) - (0.3 + 0.25)).abs() < 1e-15);
        assert!((m.trace_at_1() - 1.0).abs() < 1e-15);
    }
}
