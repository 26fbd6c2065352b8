//! Scalar coefficient fields on `[0, 1]`: drift, degeneracy, weights and the
//! fixation probability, plus the SIS coefficient family.

pub mod expr;

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::simpson;
pub use expr::Expr;

/// Nodes used when sampling closures and expressions.
pub const DEFAULT_SAMPLES: usize = 1001;

/// Step of the finite-difference derivative used for fields without an
/// analytic derivative.
const FD_STEP: f64 = 1e-3;

/// Positions this close outside `[0, 1]` are clamped rather than rejected.
const DOMAIN_SLACK: f64 = 1e-12;

/// `min a` at or below this value counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    Linear,
    Cubic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Table,
    Builtin { name: String, params: Vec<f64> },
    Expression(String),
}

type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

enum Eval {
    Samples,
    Closure { f: Func, df: Option<Func> },
    Expr(Expr),
}

struct Inner {
    xs: Vec<f64>,
    ys: Vec<f64>,
    // Hermite slopes; empty for linear interpolation.
    slopes: Vec<f64>,
    order: Interpolation,
    source: Source,
    eval: Eval,
    uniform: bool,
    cumulative: OnceLock<Vec<f64>>,
}

/// An immutable real function on `[0, 1]`. Cloning is cheap.
#[derive(Clone)]
pub struct CoefficientField(Arc<Inner>);

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("source", &self.0.source)
            .field("order", &self.0.order)
            .field("samples", &self.0.xs.len())
            .finish()
    }
}

fn uniform_nodes(n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    xs[n - 1] = 1.0;
    xs
}

fn is_uniform(xs: &[f64]) -> bool {
    let n = xs.len();
    xs.iter()
        .enumerate()
        .all(|(i, &x)| (x - i as f64 / (n - 1) as f64).abs() <= 1e-14)
}

fn check_abscissae(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Table(format!(
            "{} abscissae but {} values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Table("need at least two samples".into()));
    }
    if xs[0] != 0.0 || xs[xs.len() - 1] != 1.0 {
        return Err(Error::Table(format!(
            "abscissae must start at 0 and end at 1, got {} .. {}",
            xs[0],
            xs[xs.len() - 1]
        )));
    }
    if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Table(format!(
            "abscissae not strictly increasing at row {}",
            i + 1
        )));
    }
    if let Some(i) = ys.iter().position(|v| !v.is_finite()) {
        return Err(Error::Table(format!("non-finite value at row {i}")));
    }
    Ok(())
}

/// Three-point slopes for a cubic interpolant of tabulated data.
fn parabolic_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        m[i] = (h[i - 1] * d[i] + h[i] * d[i - 1]) / (h[i - 1] + h[i]);
    }
    m[0] = ((2.0 * h[0] + h[1]) * d[0] - h[0] * d[1]) / (h[0] + h[1]);
    let k = n - 2;
    m[n - 1] = ((2.0 * h[k] + h[k - 1]) * d[k] - h[k] * d[k - 1]) / (h[k] + h[k - 1]);
    m
}

impl CoefficientField {
    fn build(
        xs: Vec<f64>,
        ys: Vec<f64>,
        slopes: Vec<f64>,
        order: Interpolation,
        source: Source,
        eval: Eval,
    ) -> Self {
        let uniform = is_uniform(&xs);
        Self(Arc::new(Inner {
            xs,
            ys,
            slopes,
            order,
            source,
            eval,
            uniform,
            cumulative: OnceLock::new(),
        }))
    }

    /// Tabulated field. Linear tables interpolate piecewise linearly; cubic
    /// tables use Hermite cubics with three-point slopes.
    pub fn from_table(xs: Vec<f64>, ys: Vec<f64>, order: Interpolation) -> Result<Self> {
        check_abscissae(&xs, &ys)?;
        let slopes = match order {
            Interpolation::Linear => Vec::new(),
            Interpolation::Cubic => parabolic_slopes(&xs, &ys),
        };
        Ok(Self::build(xs, ys, slopes, order, Source::Table, Eval::Samples))
    }

    /// Reads a `x,value` CSV table.
    pub fn from_csv(text: &str, order: Interpolation) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Table("empty table".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["x", "value"] {
            return Err(Error::Table(format!(
                "expected header `x,value`, found `{header}`"
            )));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (row, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::Table(format!(
                    "row {}: expected 2 columns, found {}",
                    row + 1,
                    parts.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Table(format!("row {}: `{s}` is not a number", row + 1)))
            };
            xs.push(parse(parts[0])?);
            ys.push(parse(parts[1])?);
        }
        Self::from_table(xs, ys, order)
    }

    /// Hermite table with known slopes.
    pub(crate) fn hermite(xs: Vec<f64>, ys: Vec<f64>, slopes: Vec<f64>, source: Source) -> Self {
        debug_assert_eq!(xs.len(), slopes.len());
        Self::build(xs, ys, slopes, Interpolation::Cubic, source, Eval::Samples)
    }

    /// Field defined by a closure, sampled on [`DEFAULT_SAMPLES`] nodes.
    pub fn from_fn<F>(name: &str, params: Vec<f64>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::closure(name, params, Arc::new(f), None, uniform_nodes(DEFAULT_SAMPLES))
    }

    /// Like [`from_fn`](Self::from_fn) with an analytic derivative.
    pub fn from_fn_with_derivative<F, D>(name: &str, params: Vec<f64>, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::closure(
            name,
            params,
            Arc::new(f),
            Some(Arc::new(df)),
            uniform_nodes(DEFAULT_SAMPLES),
        )
    }

    fn closure(name: &str, params: Vec<f64>, f: Func, df: Option<Func>, xs: Vec<f64>) -> Self {
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::build(
            xs,
            ys,
            Vec::new(),
            Interpolation::Cubic,
            Source::Builtin {
                name: name.to_string(),
                params,
            },
            Eval::Closure { f, df },
        )
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn_with_derivative("constant", vec![c], move |_| c, |_| 0.0)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// The identity `x ↦ x`.
    pub fn identity() -> Self {
        Self::from_fn_with_derivative("identity", Vec::new(), |x| x, |_| 1.0)
    }

    /// Expression-defined field. Sampling happens eagerly, so an expression
    /// that cannot be evaluated somewhere on the sample grid is rejected here.
    pub fn from_expression(text: &str) -> Result<Self> {
        let e = expr::parse(text)?;
        let xs = uniform_nodes(DEFAULT_SAMPLES);
        let ys = xs.iter().map(|&x| e.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self::build(
            xs,
            ys,
            Vec::new(),
            Interpolation::Cubic,
            Source::Expression(text.to_string()),
            Eval::Expr(e),
        ))
    }

    pub fn order(&self) -> Interpolation {
        self.0.order
    }

    pub fn source(&self) -> &Source {
        &self.0.source
    }

    /// Sample abscissae.
    pub fn abscissae(&self) -> &[f64] {
        &self.0.xs
    }

    pub fn sample_values(&self) -> &[f64] {
        &self.0.ys
    }

    pub fn min_sample(&self) -> f64 {
        self.0.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_sample(&self) -> f64 {
        self.0.ys.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when the field qualifies as continuous for the flux-form mass
    /// formulas: cubic interpolation or an analytic source.
    pub fn is_continuous_tier(&self) -> bool {
        !(self.0.order == Interpolation::Linear && self.0.source == Source::Table)
    }

    fn check_domain(x: f64) -> Result<f64> {
        if x.is_nan() || x < -DOMAIN_SLACK || x > 1.0 + DOMAIN_SLACK {
            return Err(Error::Domain { x });
        }
        Ok(x.clamp(0.0, 1.0))
    }

    /// Checked evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = Self::check_domain(x)?;
        match &self.0.eval {
            Eval::Samples => Ok(self.interpolate(x)),
            Eval::Closure { f, .. } => Ok(f(x)),
            Eval::Expr(e) => e.eval(x),
        }
    }

    /// Unchecked evaluation: positions are clamped to `[0, 1]` and evaluation
    /// failures come back as NaN.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.0.eval {
            Eval::Samples => self.interpolate(x),
            Eval::Closure { f, .. } => f(x),
            Eval::Expr(e) => e.eval(x).unwrap_or(f64::NAN),
        }
    }

    /// Values at a list of positions.
    pub fn values_at(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.value(x)).collect()
    }

    fn locate(&self, x: f64) -> usize {
        let xs = &self.0.xs;
        let n = xs.len();
        let i = if self.0.uniform {
            ((x * (n - 1) as f64) as usize).min(n - 2)
        } else {
            xs.partition_point(|&v| v <= x).saturating_sub(1).min(n - 2)
        };
        // The uniform guess may be one off near node boundaries.
        if x < xs[i] && i > 0 {
            i - 1
        } else if x > xs[i + 1] && i + 2 < n {
            i + 1
        } else {
            i
        }
    }

    fn interpolate(&self, x: f64) -> f64 {
        let Inner { xs, ys, slopes, .. } = &*self.0;
        let i = self.locate(x);
        if x == xs[i] {
            return ys[i];
        }
        if x == xs[i + 1] {
            return ys[i + 1];
        }
        let h = xs[i + 1] - xs[i];
        let t = (x - xs[i]) / h;
        if slopes.is_empty() {
            return ys[i] + t * (ys[i + 1] - ys[i]);
        }
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * ys[i]
            + (t3 - 2.0 * t2 + t) * h * slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * ys[i + 1]
            + (t3 - t2) * h * slopes[i + 1]
    }

    /// First derivative. Fields without an analytic or interpolant derivative
    /// use fourth-order finite differences, one-sided near the endpoints.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.0.eval {
            Eval::Samples => {
                let Inner { xs, ys, slopes, .. } = &*self.0;
                let i = self.locate(x);
                let h = xs[i + 1] - xs[i];
                if slopes.is_empty() {
                    return (ys[i + 1] - ys[i]) / h;
                }
                let t = (x - xs[i]) / h;
                let t2 = t * t;
                (6.0 * t2 - 6.0 * t) / h * ys[i]
                    + (3.0 * t2 - 4.0 * t + 1.0) * slopes[i]
                    + (-6.0 * t2 + 6.0 * t) / h * ys[i + 1]
                    + (3.0 * t2 - 2.0 * t) * slopes[i + 1]
            }
            Eval::Closure { df: Some(df), .. } => df(x),
            _ => self.finite_difference(x),
        }
    }

    fn finite_difference(&self, x: f64) -> f64 {
        let d = FD_STEP;
        let f = |y: f64| self.value(y);
        if x - 2.0 * d >= 0.0 && x + 2.0 * d <= 1.0 {
            (f(x - 2.0 * d) - 8.0 * f(x - d) + 8.0 * f(x + d) - f(x + 2.0 * d)) / (12.0 * d)
        } else if x + 4.0 * d <= 1.0 {
            (-25.0 * f(x) + 48.0 * f(x + d) - 36.0 * f(x + 2.0 * d) + 16.0 * f(x + 3.0 * d)
                - 3.0 * f(x + 4.0 * d))
                / (12.0 * d)
        } else {
            (25.0 * f(x) - 48.0 * f(x - d) + 36.0 * f(x - 2.0 * d) - 16.0 * f(x - 3.0 * d)
                + 3.0 * f(x - 4.0 * d))
                / (12.0 * d)
        }
    }

    /// `∫₀ˣ f` from the start of the interval containing `x`.
    fn panel_integral(&self, i: usize, x: f64) -> f64 {
        let Inner { xs, ys, slopes, .. } = &*self.0;
        let x0 = xs[i];
        if x == x0 {
            return 0.0;
        }
        match &self.0.eval {
            Eval::Samples => {
                let h = xs[i + 1] - x0;
                let t = (x - x0) / h;
                if slopes.is_empty() {
                    let y = ys[i] + t * (ys[i + 1] - ys[i]);
                    return 0.5 * (x - x0) * (ys[i] + y);
                }
                let t2 = t * t;
                let t3 = t2 * t;
                let t4 = t3 * t;
                h * ((0.5 * t4 - t3 + t) * ys[i]
                    + (0.25 * t4 - 2.0 / 3.0 * t3 + 0.5 * t2) * h * slopes[i]
                    + (-0.5 * t4 + t3) * ys[i + 1]
                    + (0.25 * t4 - t3 / 3.0) * h * slopes[i + 1])
            }
            _ => {
                if !(ys[i].is_finite() && ys[i + 1].is_finite()) {
                    return f64::NAN;
                }
                simpson(|y| self.value(y), x0, x).value
            }
        }
    }

    fn cumulative_table(&self) -> &[f64] {
        self.0.cumulative.get_or_init(|| {
            let n = self.0.xs.len();
            let mut c = Vec::with_capacity(n);
            let mut acc = 0.0;
            c.push(0.0);
            for i in 0..n - 1 {
                acc += self.panel_integral(i, self.0.xs[i + 1]);
                c.push(acc);
            }
            c
        })
    }

    /// `∫₀ˣ f(y) dy`.
    pub fn cumulative_integral(&self, x: f64) -> Result<f64> {
        let x = Self::check_domain(x)?;
        Ok(self.integral_unchecked(x))
    }

    fn integral_unchecked(&self, x: f64) -> f64 {
        let table = self.cumulative_table();
        let i = self.locate(x);
        if x == self.0.xs[i + 1] {
            return table[i + 1];
        }
        table[i] + self.panel_integral(i, x)
    }

    /// `∫₀¹ f`.
    pub fn total_integral(&self) -> f64 {
        *self.cumulative_table().last().unwrap()
    }
}

/// Free-function form of [`CoefficientField::cumulative_integral`].
pub fn cumulative_integral(f: &CoefficientField, x: f64) -> Result<f64> {
    f.cumulative_integral(x)
}

/// Parses an expression into a field.
pub fn parse_coefficient_expr(text: &str) -> Result<CoefficientField> {
    CoefficientField::from_expression(text)
}

/// Nodes for derived tables: the field's own samples merged with a uniform
/// grid, so coarse tables still produce accurate derived fields.
fn derived_nodes(f: &CoefficientField) -> Vec<f64> {
    let mut xs: Vec<f64> = f
        .abscissae()
        .iter()
        .chain(uniform_nodes(DEFAULT_SAMPLES).iter())
        .copied()
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    let n = xs.len();
    xs[0] = 0.0;
    xs[n - 1] = 1.0;
    xs
}

/// `x ↦ exp(∫₀ˣ ψ)`.
pub fn weight_p(psi: &CoefficientField) -> Result<CoefficientField> {
    let xs = derived_nodes(psi);
    let mut ys = Vec::with_capacity(xs.len());
    let mut ms = Vec::with_capacity(xs.len());
    for &x in &xs {
        let p = psi.integral_unchecked(x).exp();
        ys.push(p);
        ms.push(psi.value(x) * p);
    }
    if let Some(i) = ys.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Numerical(format!(
            "weight exp(∫ψ) is not a positive finite number at x = {}",
            xs[i]
        )));
    }
    Ok(CoefficientField::hermite(
        xs,
        ys,
        ms,
        Source::Builtin {
            name: "weight_p".into(),
            params: Vec::new(),
        },
    ))
}

/// Fixation probability `φ(x) = ∫₀ˣ e^{-P} / ∫₀¹ e^{-P}` with `P = ∫₀ˣ ψ`.
pub fn fixation_probability(psi: &CoefficientField) -> Result<CoefficientField> {
    let xs = derived_nodes(psi);
    let e: Vec<f64> = xs.iter().map(|&x| (-psi.integral_unchecked(x)).exp()).collect();
    let de: Vec<f64> = xs.iter().zip(&e).map(|(&x, &v)| -psi.value(x) * v).collect();
    // Integrate the Hermite interpolant of e^{-P} exactly, panel by panel.
    let mut cum = Vec::with_capacity(xs.len());
    cum.push(0.0);
    for i in 0..xs.len() - 1 {
        let h = xs[i + 1] - xs[i];
        let panel = 0.5 * h * (e[i] + e[i + 1]) + h * h / 12.0 * (de[i] - de[i + 1]);
        cum.push(cum[i] + panel);
    }
    let z = *cum.last().unwrap();
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::Internal(format!(
            "fixation normalizer ∫₀¹ e^(-P) = {z} is not positive"
        )));
    }
    let ys: Vec<f64> = cum.iter().map(|c| c / z).collect();
    let ms: Vec<f64> = e.iter().map(|v| v / z).collect();
    let n = ys.len();
    let mut ys = ys;
    ys[0] = 0.0;
    ys[n - 1] = 1.0;
    Ok(CoefficientField::hermite(
        xs,
        ys,
        ms,
        Source::Builtin {
            name: "fixation_probability".into(),
            params: Vec::new(),
        },
    ))
}

/// `η(x) = exp(∫₀ˣ b/a)`; requires `a` bounded away from zero.
pub fn eta_weight(a: &CoefficientField, b: &CoefficientField) -> Result<CoefficientField> {
    let min_a = a.min_sample();
    if !(min_a > DEGENERACY_TOL) {
        return Err(Error::Degeneracy(format!(
            "min a = {min_a:e} is not bounded away from zero"
        )));
    }
    let (a2, b2) = (a.clone(), b.clone());
    let xs = derived_nodes(a);
    let ratio = CoefficientField::closure(
        "ratio",
        Vec::new(),
        Arc::new(move |x| b2.value(x) / a2.value(x)),
        None,
        xs,
    );
    weight_p(&ratio)
}

/// Coefficient family of the SIS diffusion.
#[derive(Debug, Clone)]
pub struct SisCoefficients {
    pub r0: f64,
    /// `F(x) = R0(1−x) + 1`.
    pub f: CoefficientField,
    /// `H(x) = x + (2/R0) log(F(x)/F(0))`.
    pub h: CoefficientField,
    /// `P = exp(2H)`.
    pub p: CoefficientField,
    /// `ω = P/(xF)`, infinite at 0.
    pub omega: CoefficientField,
}

impl SisCoefficients {
    /// `ω_ε = P/((x+ε)F)`.
    pub fn omega_eps(&self, eps: f64) -> CoefficientField {
        let r0 = self.r0;
        CoefficientField::from_fn("sis_omega_eps", vec![r0, eps], move |x| {
            sis_p(r0, x) / ((x + eps) * sis_f(r0, x))
        })
    }

    /// Drift `ψ = 2 − 4/F` of the SIS equation written in Kimura form.
    pub fn psi(&self) -> CoefficientField {
        let r0 = self.r0;
        CoefficientField::from_fn_with_derivative(
            "sis_psi",
            vec![r0],
            move |x| 2.0 - 4.0 / sis_f(r0, x),
            move |x| -4.0 * r0 / sis_f(r0, x).powi(2),
        )
    }

    /// Degeneracy `g = xF/2`.
    pub fn g(&self) -> CoefficientField {
        let r0 = self.r0;
        CoefficientField::from_fn_with_derivative(
            "sis_g",
            vec![r0],
            move |x| 0.5 * x * sis_f(r0, x),
            move |x| 0.5 * (sis_f(r0, x) - r0 * x),
        )
    }
}

fn sis_f(r0: f64, x: f64) -> f64 {
    r0 * (1.0 - x) + 1.0
}

fn sis_h(r0: f64, x: f64) -> f64 {
    x + 2.0 / r0 * (sis_f(r0, x) / sis_f(r0, 0.0)).ln()
}

fn sis_p(r0: f64, x: f64) -> f64 {
    (2.0 * sis_h(r0, x)).exp()
}

pub fn sis_family(r0: f64) -> Result<SisCoefficients> {
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::Parameter(format!(
            "R0 must be positive and finite, got {r0}"
        )));
    }
    let f = CoefficientField::from_fn_with_derivative("sis_F", vec![r0], move |x| sis_f(r0, x), move |_| -r0);
    let h = CoefficientField::from_fn_with_derivative(
        "sis_H",
        vec![r0],
        move |x| sis_h(r0, x),
        move |x| 1.0 - 2.0 / sis_f(r0, x),
    );
    let p = CoefficientField::from_fn_with_derivative(
        "sis_P",
        vec![r0],
        move |x| sis_p(r0, x),
        move |x| 2.0 * (1.0 - 2.0 / sis_f(r0, x)) * sis_p(r0, x),
    );
    let omega = CoefficientField::from_fn("sis_omega", vec![r0], move |x| sis_p(r0, x) / (x * sis_f(r0, x)));
    Ok(SisCoefficients { r0, f, h, p, omega })
}

/// Kimura degeneracy `g = x(1−x)`.
pub fn kimura_g() -> CoefficientField {
    CoefficientField::from_fn_with_derivative("kimura_g", Vec::new(), |x| x * (1.0 - x), |x| 1.0 - 2.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_integral_examples() {
        let z = CoefficientField::zero();
        assert_eq!(z.cumulative_integral(0.7).unwrap(), 0.0);
        let one = CoefficientField::constant(1.0);
        assert!((one.cumulative_integral(0.5).unwrap() - 0.5).abs() < 1e-15);
        let s = CoefficientField::from_fn("sin", vec![], f64::sin);
        assert!((s.cumulative_integral(1.0).unwrap() - (1.0 - 1f64.cos())).abs() < 1e-8);
        assert!(matches!(s.cumulative_integral(1.5), Err(Error::Domain { .. })));
        assert!(matches!(s.eval(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn cumulative_integral_is_additive() {
        let f = CoefficientField::from_expression("exp(x)*cos(3*x)").unwrap();
        let total = f.total_integral();
        let x = 0.3141;
        let left = f.cumulative_integral(x).unwrap();
        // ∫ₓ¹ computed independently.
        let right = simpson(|y| f.value(y), x, 1.0).value;
        assert!(((left + right) - total).abs() <= 1e-12 * total.abs());
    }

    #[test]
    fn table_interpolation_reproduces_samples() {
        let xs = vec![0.0, 0.2, 0.5, 1.0];
        let ys = vec![1.0, -2.0, 0.5, 3.0];
        for order in [Interpolation::Linear, Interpolation::Cubic] {
            let f = CoefficientField::from_table(xs.clone(), ys.clone(), order).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                assert_eq!(f.eval(*x).unwrap(), *y);
            }
        }
        let lin = CoefficientField::from_table(xs, ys, Interpolation::Linear).unwrap();
        assert!((lin.value(0.1) + 0.5).abs() < 1e-15);
        assert!((lin.cumulative_integral(0.2).unwrap() - 0.2 * (-0.5)).abs() < 1e-15);
        assert!(!lin.is_continuous_tier());
    }

    #[test]
    fn table_validation() {
        let bad = CoefficientField::from_table(vec![0.0, 0.5, 0.5, 1.0], vec![0.0; 4], Interpolation::Linear);
        assert!(matches!(bad, Err(Error::Table(_))));
        let bad = CoefficientField::from_table(vec![0.1, 1.0], vec![0.0; 2], Interpolation::Linear);
        assert!(matches!(bad, Err(Error::Table(_))));
        let csv = "x,value\n0,1\n0.5,2\n1,3\n";
        let f = CoefficientField::from_csv(csv, Interpolation::Linear).unwrap();
        assert_eq!(f.value(0.25), 1.5);
        assert!(CoefficientField::from_csv("a,b\n0,1\n1,1", Interpolation::Linear).is_err());
    }

    #[test]
    fn weight_p_examples() {
        let p = weight_p(&CoefficientField::zero()).unwrap();
        assert!((p.value(0.37) - 1.0).abs() < 1e-15);
        let p = weight_p(&CoefficientField::constant(-1.3)).unwrap();
        assert!((p.value(0.61) - (-1.3f64 * 0.61).exp()).abs() < 1e-10);
        let p = weight_p(&CoefficientField::identity()).unwrap();
        for x in [0.0, 0.123, 0.5, 0.999, 1.0] {
            assert!((p.value(x) - (x * x / 2.0).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn fixation_examples() {
        let phi = fixation_probability(&CoefficientField::zero()).unwrap();
        for x in [0.0, 0.21, 0.5, 1.0] {
            assert!((phi.value(x) - x).abs() < 1e-14);
        }
        let c = 2.5;
        let phi = fixation_probability(&CoefficientField::constant(c)).unwrap();
        for x in [0.1, 0.4, 0.77] {
            let exact = (1.0 - (-c * x).exp()) / (1.0 - (-c).exp());
            assert!((phi.value(x) - exact).abs() < 1e-10);
        }
        assert_eq!(phi.value(0.0), 0.0);
        assert_eq!(phi.value(1.0), 1.0);
    }

    #[test]
    fn eta_examples() {
        let eta = eta_weight(&CoefficientField::constant(1.0), &CoefficientField::zero()).unwrap();
        assert!((eta.value(0.4) - 1.0).abs() < 1e-15);
        let eta = eta_weight(&CoefficientField::constant(1.0), &CoefficientField::constant(0.7)).unwrap();
        assert!((eta.value(0.9) - (0.63f64).exp()).abs() < 1e-10);
        let a = CoefficientField::from_expression("1+x").unwrap();
        let eta = eta_weight(&a, &CoefficientField::constant(1.0)).unwrap();
        for x in [0.2, 0.5, 1.0] {
            assert!((eta.value(x) - (1.0 + x)).abs() < 1e-8);
        }
        assert!(matches!(
            eta_weight(&kimura_g(), &CoefficientField::zero()),
            Err(Error::Degeneracy(_))
        ));
    }

    #[test]
    fn sis_examples() {
        let s = sis_family(2.0).unwrap();
        assert_eq!(s.f.value(0.0), 3.0);
        assert_eq!(s.f.value(1.0), 1.0);
        assert_eq!(s.h.value(0.0), 0.0);
        assert_eq!(s.p.value(0.0), 1.0);
        let h1 = 1.0 + (1.0f64 / 3.0).ln();
        assert!((s.h.value(1.0) - h1).abs() < 1e-10);
        assert!((s.p.value(1.0) - (2.0 * h1).exp()).abs() < 1e-10);
        assert!(s.omega.value(0.0).is_infinite());
        let w = s.omega_eps(1e-9);
        assert!((w.value(0.3) - s.omega.value(0.3)).abs() < 1e-7 * s.omega.value(0.3));
        assert!(matches!(sis_family(0.0), Err(Error::Parameter(_))));
        // P' = ψ P, with ψ the SIS drift in Kimura form.
        let psi = s.psi();
        let p = weight_p(&psi).unwrap();
        assert!((p.value(0.8) - s.p.value(0.8)).abs() < 1e-9);
    }

    #[test]
    fn expression_fields() {
        let f = parse_coefficient_expr("0").unwrap();
        assert_eq!(f.value(0.3), 0.0);
        let f = parse_coefficient_expr("x*(1-x)").unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.25);
        let f = parse_coefficient_expr("exp(-2*x)+1").unwrap();
        assert!((f.eval(1.0).unwrap() - ((-2.0f64).exp() + 1.0)).abs() <= 1e-15);
        assert!(matches!(parse_coefficient_expr("1/x"), Err(Error::Evaluation { x, .. }) if x == 0.0));
        let df = CoefficientField::from_expression("sin(x)").unwrap();
        for x in [0.0, 0.5, 1.0] {
            assert!((df.derivative(x) - x.cos()).abs() < 1e-10);
        }
    }
}
