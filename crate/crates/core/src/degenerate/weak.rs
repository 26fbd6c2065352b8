//! Weak-form residual of a measure-valued trajectory against a smooth test
//! function `α(t, x)`:
//! `⟨μ(T), α(T)⟩ − ⟨μ(0), α(0)⟩ − ∫₀ᵀ ⟨μ, α_t + g α_xx + gψ α_x⟩ − g(1) r(1) α_x(1) dt`.

use super::{BoundaryMeasure, DegenerateModel};
use crate::error::{Error, Result};
use crate::quadrature::trapezoid;

type Field2 = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `α(t, x)` with the partial derivatives the residual needs.
pub struct TestFunction {
    value: Field2,
    dt: Option<Field2>,
    dx: Option<Field2>,
    dxx: Option<Field2>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("dt", &self.dt.is_some())
            .field("dx", &self.dx.is_some())
            .field("dxx", &self.dxx.is_some())
            .finish()
    }
}

impl TestFunction {
    pub fn new(value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Box::new(value),
            dt: None,
            dx: None,
            dxx: None,
        }
    }

    pub fn with_dt(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dt = Some(Box::new(f));
        self
    }

    pub fn with_dx(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dx = Some(Box::new(f));
        self
    }

    pub fn with_dxx(mut self, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dxx = Some(Box::new(f));
        self
    }

    /// `α(t, x) = β(t) f(x)` from `β, β'` and `f, f', f''`.
    pub fn separable<B, DB, F, DF, DDF>(beta: B, dbeta: DB, f: F, df: DF, ddf: DDF) -> Self
    where
        B: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
        DB: Fn(f64) -> f64 + Send + Sync + 'static,
        F: Fn(f64) -> f64 + Send + Sync + Clone + 'static,
        DF: Fn(f64) -> f64 + Send + Sync + 'static,
        DDF: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (b1, b2) = (beta.clone(), beta.clone());
        let f1 = f.clone();
        Self::new(move |t, x| beta(t) * f(x))
            .with_dt(move |t, x| dbeta(t) * f1(x))
            .with_dx(move |t, x| b1(t) * df(x))
            .with_dxx(move |t, x| b2(t) * ddf(x))
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }
}

fn required<'a>(d: &'a Option<Field2>, name: &str) -> Result<&'a Field2> {
    d.as_ref()
        .ok_or_else(|| Error::Argument(format!("test function lacks its {name} derivative")))
}

/// Residual over the snapshots in `measures`, integrated in time by the
/// trapezoid rule. Snapshots must be sorted by time.
pub fn weak_form_residual(
    model: &DegenerateModel,
    measures: &[BoundaryMeasure],
    alpha: &TestFunction,
) -> Result<f64> {
    if measures.len() < 2 {
        return Err(Error::Argument(
            "weak residual needs at least two snapshots".into(),
        ));
    }
    if measures.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::Argument(
            "snapshots must be strictly increasing in time".into(),
        ));
    }
    let dt = required(&alpha.dt, "time")?;
    let dx = required(&alpha.dx, "first space")?;
    let dxx = required(&alpha.dxx, "second space")?;
    let g1 = model.g.value(1.0);
    let times: Vec<f64> = measures.iter().map(|m| m.time).collect();
    let integrand: Vec<f64> = measures
        .iter()
        .map(|m| {
            let t = m.time;
            let gen = |x: f64| dt(t, x) + model.g.value(x) * dxx(t, x) + model.drift(x) * dx(t, x);
            let boundary = if g1 != 0.0 {
                g1 * m.trace_at_1() * dx(t, 1.0)
            } else {
                0.0
            };
            m.moment(&gen) - boundary
        })
        .collect();
    let first = &measures[0];
    let last = &measures[measures.len() - 1];
    let pair = |m: &BoundaryMeasure| m.moment(&|x| alpha.value(m.time, x));
    Ok(pair(last) - pair(first) - trapezoid(&times, &integrand))
}
