//! Euler-Maruyama simulation of the diffusion whose forward equation is the
//! degenerate Kolmogorov equation, `dX = gψ dt + sqrt(2g) dW`, absorbed at 0
//! and either absorbed or reflected at 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::degenerate::{BoundaryMeasure, DegenerateModel, ModelKind};
use crate::error::{Error, Result};
use crate::quadrature::cumulative_trapezoid;

pub const DEFAULT_DT: f64 = 1e-4;
pub const DEFAULT_BINS: usize = 50;
/// Atom discrepancies beyond this many standard errors fail a comparison.
pub const Z_THRESHOLD: f64 = 3.0;
/// Sup-distance between interior CDFs allowed in a comparison.
pub const CDF_THRESHOLD: f64 = 0.02;
pub const ASSUMPTION_SDE_MATCHING: &str = "sde_matching";

const PATHS_PER_CHUNK: usize = 64;
const INVERSE_CDF_NODES: usize = 4001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryAt1 {
    Absorbing,
    Reflecting,
}

#[derive(Debug, Clone)]
pub enum InitialLaw {
    Point(f64),
    /// Unnormalized density on `[0, 1]`.
    Density(CoefficientField),
}

#[derive(Debug, Clone)]
pub struct SdeSpec {
    pub drift: CoefficientField,
    pub squared_volatility: CoefficientField,
    pub boundary_at_1: BoundaryAt1,
    pub initial: InitialLaw,
    pub dt: f64,
    pub horizon: f64,
    pub replicates: usize,
    pub seed: u64,
    pub bins: usize,
}

impl SdeSpec {
    /// Diffusion matched to `model`: drift `gψ`, squared volatility `2g`,
    /// absorbing at 1 for Kimura and reflecting for SIS.
    pub fn for_model(
        model: &DegenerateModel,
        initial: InitialLaw,
        horizon: f64,
        replicates: usize,
        seed: u64,
    ) -> Self {
        let m = model.clone();
        let drift = CoefficientField::from_fn("sde_drift", Vec::new(), move |x| m.drift(x));
        let g = model.g.clone();
        let vol = CoefficientField::from_fn("sde_squared_volatility", Vec::new(), move |x| 2.0 * g.value(x));
        let boundary_at_1 = match model.kind {
            ModelKind::Kimura => BoundaryAt1::Absorbing,
            ModelKind::Sis => BoundaryAt1::Reflecting,
        };
        Self {
            drift,
            squared_volatility: vol,
            boundary_at_1,
            initial,
            dt: DEFAULT_DT,
            horizon,
            replicates,
            seed,
            bins: DEFAULT_BINS,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Parameter("at least one replicate is needed".into()));
        }
        if self.bins == 0 {
            return Err(Error::Parameter("at least one histogram bin is needed".into()));
        }
        let vmin = self.squared_volatility.min_sample();
        if vmin < 0.0 {
            return Err(Error::Parameter(format!(
                "squared volatility is negative ({vmin})"
            )));
        }
        if let InitialLaw::Point(x) = self.initial {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Parameter(format!("initial point {x} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Law of the simulated paths at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub time: f64,
    pub n_paths: usize,
    pub absorbing_at_1: bool,
    pub count_at_0: u64,
    pub count_at_1: u64,
    pub bin_counts: Vec<u64>,
    pub mass_at_0: f64,
    pub mass_at_1: f64,
    /// Interior mass per bin of `[0, 1]`.
    pub histogram: Vec<f64>,
    pub se_mass_at_0: f64,
    pub se_mass_at_1: f64,
    pub se_histogram: Vec<f64>,
}

impl EmpiricalMeasure {
    fn from_counts(time: f64, n: usize, absorbing_at_1: bool, c0: u64, c1: u64, bins: Vec<u64>) -> Self {
        let nf = n as f64;
        let frac = |c: u64| c as f64 / nf;
        let se = |c: u64| {
            let p = frac(c);
            (p * (1.0 - p) / nf).sqrt()
        };
        Self {
            time,
            n_paths: n,
            absorbing_at_1,
            count_at_0: c0,
            count_at_1: c1,
            mass_at_0: frac(c0),
            mass_at_1: frac(c1),
            histogram: bins.iter().map(|&c| frac(c)).collect(),
            se_mass_at_0: se(c0),
            se_mass_at_1: se(c1),
            se_histogram: bins.iter().map(|&c| se(c)).collect(),
            bin_counts: bins,
        }
    }

    pub fn interior(&self) -> f64 {
        self.bin_counts.iter().sum::<u64>() as f64 / self.n_paths as f64
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        let b = self.histogram.len();
        (0..=b).map(|k| k as f64 / b as f64).collect()
    }

    /// The histogram as a measure with piecewise constant density.
    pub fn to_boundary_measure(&self) -> BoundaryMeasure {
        let b = self.histogram.len();
        let w = 1.0 / b as f64;
        BoundaryMeasure {
            time: self.time,
            atom0: self.mass_at_0,
            atom1: self.mass_at_1,
            x: (0..b).map(|k| (k as f64 + 0.5) * w).collect(),
            density: self.histogram.iter().map(|m| m / w).collect(),
            weights: vec![w; b],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub snapshots: Vec<EmpiricalMeasure>,
    pub warnings: Vec<String>,
    pub assumptions: Vec<&'static str>,
}

struct Counts {
    at0: Vec<u64>,
    at1: Vec<u64>,
    bins: Vec<Vec<u64>>,
}

impl Counts {
    fn zeros(snaps: usize, bins: usize) -> Self {
        Self {
            at0: vec![0; snaps],
            at1: vec![0; snaps],
            bins: vec![vec![0; bins]; snaps],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.at0.iter_mut().zip(&other.at0) {
            *a += b;
        }
        for (a, b) in self.at1.iter_mut().zip(&other.at1) {
            *a += b;
        }
        for (ra, rb) in self.bins.iter_mut().zip(&other.bins) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
        self
    }
}

enum State {
    Alive(f64),
    Dead0,
    Dead1,
}

struct Sampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(density: &CoefficientField) -> Result<Self> {
        let xs: Vec<f64> = (0..INVERSE_CDF_NODES)
            .map(|i| i as f64 / (INVERSE_CDF_NODES - 1) as f64)
            .collect();
        let ys = density.values_at(&xs);
        if ys.iter().any(|y| !(*y >= 0.0)) {
            return Err(Error::Parameter("initial density must be nonnegative".into()));
        }
        let cdf = cumulative_trapezoid(&xs, &ys);
        let total = *cdf.last().unwrap();
        if !(total > 0.0) {
            return Err(Error::Parameter("initial density has no mass".into()));
        }
        Ok(Self {
            xs,
            cdf: cdf.iter().map(|c| c / total).collect(),
        })
    }

    fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|c| *c < u).clamp(1, self.xs.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let s = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[k - 1] + s * (self.xs[k] - self.xs[k - 1])
    }
}

/// Simulates `spec.replicates` paths and records their law at each of
/// `times`, which must be multiples of `spec.dt` within the horizon. Path `i`
/// draws from a ChaCha8 stream keyed by `(seed, i)`, so results do not depend
/// on scheduling.
pub fn simulate(spec: &SdeSpec, times: &[f64]) -> Result<Simulation> {
    spec.validate()?;
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Argument(
            "snapshot times must be nonempty and sorted".into(),
        ));
    }
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        if !(t >= 0.0 && t <= spec.horizon * (1.0 + 1e-12)) {
            return Err(Error::Argument(format!("time {t} outside [0, {}]", spec.horizon)));
        }
        let k = (t / spec.dt).round();
        if (k * spec.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Argument(format!(
                "time {t} is not a multiple of dt = {}",
                spec.dt
            )));
        }
        steps.push(k as u64);
    }
    let mut warnings = Vec::new();
    let bin_width = 1.0 / spec.bins as f64;
    if spec.dt > bin_width * bin_width {
        warnings.push(format!(
            "dt = {} exceeds the squared bin width {}; boundary bias may be visible",
            spec.dt,
            bin_width * bin_width
        ));
    }
    let sampler = match &spec.initial {
        InitialLaw::Density(f) => Some(Sampler::new(f)?),
        InitialLaw::Point(_) => None,
    };
    let nb = spec.bins;
    let reflect = spec.boundary_at_1 == BoundaryAt1::Reflecting;
    let sqrt_dt = spec.dt.sqrt();
    let run_path = |path: usize, counts: &mut Counts| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(path as u64);
        let x0 = match (&spec.initial, &sampler) {
            (InitialLaw::Point(x), _) => *x,
            (_, Some(s)) => s.sample(rng.random::<f64>()),
            _ => unreachable!(),
        };
        let mut state = if x0 <= 0.0 {
            State::Dead0
        } else if x0 >= 1.0 && !reflect {
            State::Dead1
        } else {
            State::Alive(x0)
        };
        let mut done = 0u64;
        for (s, &target) in steps.iter().enumerate() {
            while done < target {
                let State::Alive(x) = state else { break };
                let z: f64 = rng.sample(StandardNormal);
                let var = spec.squared_volatility.value(x).max(0.0);
                let mut next = x + spec.drift.value(x) * spec.dt + var.sqrt() * sqrt_dt * z;
                if reflect && next > 1.0 {
                    next = (2.0 - next).max(0.0);
                }
                state = if next <= 0.0 {
                    State::Dead0
                } else if next >= 1.0 && !reflect {
                    State::Dead1
                } else {
                    State::Alive(next)
                };
                done += 1;
            }
            match state {
                State::Dead0 => counts.at0[s] += 1,
                State::Dead1 => counts.at1[s] += 1,
                State::Alive(x) => {
                    let b = ((x / bin_width) as usize).min(nb - 1);
                    counts.bins[s][b] += 1;
                }
            }
        }
    };
    let n_chunks = spec.replicates.div_ceil(PATHS_PER_CHUNK);
    let counts = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = Counts::zeros(times.len(), nb);
            let hi = ((c + 1) * PATHS_PER_CHUNK).min(spec.replicates);
            for path in c * PATHS_PER_CHUNK..hi {
                run_path(path, &mut counts);
            }
            counts
        })
        .reduce(|| Counts::zeros(times.len(), nb), Counts::merge);
    let snapshots = times
        .iter()
        .enumerate()
        .map(|(s, &t)| {
            EmpiricalMeasure::from_counts(
                t,
                spec.replicates,
                !reflect,
                counts.at0[s],
                counts.at1[s],
                counts.bins[s].clone(),
            )
        })
        .collect();
    Ok(Simulation {
        snapshots,
        warnings,
        assumptions: vec![ASSUMPTION_SDE_MATCHING],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub time: f64,
    /// `(empirical − PDE) / SE` for the atoms at 0 and 1.
    pub z_atom0: f64,
    pub z_atom1: f64,
    pub cdf_distance: f64,
    pub passed: bool,
}

/// Compares an empirical law against a measure normalized to unit mass.
pub fn compare(emp: &EmpiricalMeasure, bm: &BoundaryMeasure) -> Result<Comparison> {
    if (emp.time - bm.time).abs() > 1e-9 * emp.time.abs().max(1.0) {
        return Err(Error::Argument(format!(
            "snapshot times differ: {} vs {}",
            emp.time, bm.time
        )));
    }
    let total = bm.total_mass();
    if !(total > 0.0) {
        return Err(Error::Argument("measure has no mass".into()));
    }
    if !emp.absorbing_at_1 && bm.atom1.abs() > 1e-12 * total {
        return Err(Error::Argument(
            "measure has an atom at 1 but the simulated boundary reflects".into(),
        ));
    }
    if bm.x.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Argument("measure support leaves [0, 1]".into()));
    }
    let floor = 1.0 / emp.n_paths as f64;
    let z0 = (emp.mass_at_0 - bm.atom0 / total) / emp.se_mass_at_0.max(floor);
    let z1 = (emp.mass_at_1 - bm.atom1 / total) / emp.se_mass_at_1.max(floor);
    // Each density sample spreads its mass uniformly over a cell of width
    // equal to its quadrature weight.
    let pde_cdf = |e: f64| -> f64 {
        bm.x.iter()
            .zip(&bm.density)
            .zip(&bm.weights)
            .map(|((x, r), w)| {
                let frac = if *w > 0.0 {
                    ((e - (x - 0.5 * w)) / w).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                r * w * frac
            })
            .sum::<f64>()
            / total
    };
    let mut emp_cdf = 0.0;
    let mut dist = 0.0f64;
    for (k, e) in emp.bin_edges().iter().enumerate().skip(1) {
        emp_cdf += emp.histogram[k - 1];
        dist = dist.max((emp_cdf - pde_cdf(*e)).abs());
    }
    Ok(Comparison {
        time: emp.time,
        z_atom0: z0,
        z_atom1: z1,
        cdf_distance: dist,
        passed: z0.abs() <= Z_THRESHOLD && z1.abs() <= Z_THRESHOLD && dist <= CDF_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neutral(x0: f64, paths: usize, seed: u64) -> SdeSpec {
        SdeSpec::for_model(
            &DegenerateModel::neutral(),
            InitialLaw::Point(x0),
            20.0,
            paths,
            seed,
        )
        .with_dt(1e-3)
    }

    #[test]
    fn frozen_dynamics_stay_in_their_bin() {
        let spec = SdeSpec {
            drift: CoefficientField::zero(),
            squared_volatility: CoefficientField::zero(),
            boundary_at_1: BoundaryAt1::Absorbing,
            initial: InitialLaw::Point(0.4),
            dt: 1e-2,
            horizon: 1.0,
            replicates: 100,
            seed: 1,
            bins: 10,
        };
        let sim = simulate(&spec, &[1.0]).unwrap();
        let e = &sim.snapshots[0];
        assert_eq!(e.bin_counts[4], 100);
        assert_eq!(e.count_at_0 + e.count_at_1, 0);
    }

    #[test]
    fn fixation_probability_and_counting() {
        let sim = simulate(&neutral(0.3, 4000, 7), &[1.0, 20.0]).unwrap();
        let last = &sim.snapshots[1];
        assert!(((last.mass_at_1 - 0.3) / last.se_mass_at_1).abs() < 3.0);
        for e in &sim.snapshots {
            let total = e.count_at_0 + e.count_at_1 + e.bin_counts.iter().sum::<u64>();
            assert_eq!(total, 4000);
        }
        assert!(sim.snapshots[1].count_at_0 >= sim.snapshots[0].count_at_0);
        assert!(sim.assumptions.contains(&ASSUMPTION_SDE_MATCHING));
    }

    #[test]
    fn reproducible_for_equal_seeds() {
        let a = simulate(&neutral(0.5, 300, 42), &[0.5]).unwrap();
        let b = simulate(&neutral(0.5, 300, 42), &[0.5]).unwrap();
        let c = simulate(&neutral(0.5, 300, 43), &[0.5]).unwrap();
        assert_eq!(a.snapshots, b.snapshots);
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[test]
    fn sis_reflects_at_one() {
        let model = DegenerateModel::sis(2.0).unwrap();
        let spec = SdeSpec::for_model(&model, InitialLaw::Point(0.95), 1.0, 500, 3).with_dt(1e-3);
        let sim = simulate(&spec, &[1.0]).unwrap();
        assert_eq!(sim.snapshots[0].count_at_1, 0);
        assert!(!sim.snapshots[0].absorbing_at_1);
    }

    #[test]
    fn density_initial_law() {
        let spec = SdeSpec {
            drift: CoefficientField::zero(),
            squared_volatility: CoefficientField::zero(),
            boundary_at_1: BoundaryAt1::Absorbing,
            initial: InitialLaw::Density(CoefficientField::constant(1.0)),
            dt: 0.1,
            horizon: 1.0,
            replicates: 20000,
            seed: 9,
            bins: 4,
        };
        let e = &simulate(&spec, &[0.0]).unwrap().snapshots[0];
        for h in &e.histogram {
            assert!((h - 0.25).abs() < 0.02);
        }
        let bad = SdeSpec {
            initial: InitialLaw::Density(CoefficientField::constant(-1.0)),
            ..spec
        };
        assert!(simulate(&bad, &[0.0]).is_err());
    }

    #[test]
    fn compare_self_and_perturbed() {
        let sim = simulate(&neutral(0.3, 2000, 5), &[0.5]).unwrap();
        let e = &sim.snapshots[0];
        let bm = e.to_boundary_measure();
        let c = compare(e, &bm).unwrap();
        assert!(c.z_atom0.abs() < 1e-12 && c.z_atom1.abs() < 1e-12 && c.cdf_distance < 1e-12);
        assert!(c.passed);
        let mut shifted = bm.clone();
        shifted.atom1 += 0.1;
        shifted.atom0 -= 0.1;
        assert!(!compare(e, &shifted).unwrap().passed);
        let mut late = bm;
        late.time = 1.0;
        assert!(matches!(compare(e, &late), Err(Error::Argument(_))));
    }

    #[test]
    fn input_errors_and_warnings() {
        let spec = neutral(0.3, 10, 1);
        assert!(simulate(&spec, &[0.00015]).is_err());
        assert!(simulate(&spec, &[30.0]).is_err());
        assert!(simulate(&spec.clone().with_dt(0.0), &[1.0]).is_err());
        let coarse = simulate(&spec.with_dt(0.01), &[1.0]).unwrap();
        assert!(!coarse.warnings.is_empty());
    }
}
