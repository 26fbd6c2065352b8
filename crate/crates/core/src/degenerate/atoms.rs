//! Atomic masses at the degenerate endpoints, recovered from the interior
//! density either through the conservation laws or through boundary fluxes.

use super::interior::{BoundaryTraces, InteriorSolution};
use super::ModelKind;
use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::quadrature::cumulative_trapezoid;

/// Atoms more negative than this are reported.
pub const NEGATIVE_ATOM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MassCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MassCurve {
    /// Linear interpolation, clamped at the ends.
    pub fn at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.values[0];
        }
        if t >= ts[ts.len() - 1] {
            return self.values[ts.len() - 1];
        }
        let k = ts.partition_point(|s| *s <= t);
        let (t0, t1) = (ts[k - 1], ts[k]);
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        self.values[k - 1] + s * (self.values[k] - self.values[k - 1])
    }

    /// True if no value drops below its predecessor by more than `tol`.
    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn check_negative(curve: &MassCurve, label: &str, warnings: &mut Vec<String>) {
    if let Some((t, v)) = curve
        .times
        .iter()
        .zip(&curve.values)
        .find(|(_, v)| **v < -NEGATIVE_ATOM_TOL)
    {
        warnings.push(format!("{label} atom is negative ({v:e}) at t = {t}"));
    }
}

/// `a(t) = a0 + ∫r0(1−φ) − ∫r(t)(1−φ)` and `b(t) = b0 + ∫r0 φ − ∫r(t) φ`,
/// using the cell quadrature of `sol`. Negative atoms are returned as
/// warnings rather than errors.
pub fn atomic_masses_conservation_form(
    sol: &InteriorSolution,
    a0: f64,
    b0: f64,
    phi: &CoefficientField,
) -> Result<(MassCurve, MassCurve, Vec<String>)> {
    if sol.kind != ModelKind::Kimura {
        return Err(Error::Argument(
            "the conservation form needs two conservation laws".into(),
        ));
    }
    let h = sol.cell_width();
    let phis = phi.values_at(&sol.centers);
    let moments = |r: &[f64]| {
        let (mut m, mut f) = (0.0, 0.0);
        for (v, p) in r.iter().zip(&phis) {
            m += v;
            f += v * p;
        }
        (m * h, f * h)
    };
    let (m0, f0) = moments(&sol.initial);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for r in &sol.densities {
        let (m, f) = moments(r);
        a.push(a0 + (m0 - f0) - (m - f));
        b.push(b0 + f0 - f);
    }
    let a = MassCurve {
        times: sol.times.clone(),
        values: a,
    };
    let b = MassCurve {
        times: sol.times.clone(),
        values: b,
    };
    let mut warnings = Vec::new();
    check_negative(&a, "left", &mut warnings);
    check_negative(&b, "right", &mut warnings);
    Ok((a, b, warnings))
}

/// `a(t) = a0 + ∫₀ᵗ r(0, s) ds`, `b(t) = b0 + ∫₀ᵗ r(1, s) ds`. Needs a
/// drift with at least a continuous derivative, so a linearly interpolated
/// table is rejected.
pub fn atomic_masses_flux_form(
    traces: &BoundaryTraces,
    a0: f64,
    b0: f64,
    psi: &CoefficientField,
) -> Result<(MassCurve, MassCurve)> {
    if !psi.is_continuous_tier() {
        return Err(Error::RegularityTier(
            "boundary traces need ψ with a continuous derivative; use the conservation form".into(),
        ));
    }
    let ia = cumulative_trapezoid(&traces.times, &traces.r0);
    let ib = cumulative_trapezoid(&traces.times, &traces.r1);
    Ok((
        MassCurve {
            times: traces.times.clone(),
            values: ia.iter().map(|v| a0 + v).collect(),
        },
        MassCurve {
            times: traces.times.clone(),
            values: ib.iter().map(|v| b0 + v).collect(),
        },
    ))
}

/// SIS atom at 0: `a(t) = a0 + (R0+1)/2 ∫₀ᵗ r(0, s) ds`.
pub fn sis_atom_mass(traces: &BoundaryTraces, a0: f64, r0: f64) -> Result<MassCurve> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Parameter(format!("R0 must be positive, got {r0}")));
    }
    let rate = 0.5 * (r0 + 1.0);
    let ia = cumulative_trapezoid(&traces.times, &traces.r0);
    Ok(MassCurve {
        times: traces.times.clone(),
        values: ia.iter().map(|v| a0 + rate * v).collect(),
    })
}
