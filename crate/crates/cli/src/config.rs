//! Run configuration: a flat `key = value` file merged with `--key value`
//! overrides. Precedence is command line, then file, then defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use conspde::coefficients::Interpolation;
use conspde::conservative::TimeFunction;
use conspde::CoefficientField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Kimura,
    Sis,
    Spectrum,
    Moments,
    Oracle,
    Validate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Kimura,
        Command::Sis,
        Command::Spectrum,
        Command::Moments,
        Command::Oracle,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Kimura => "kimura",
            Command::Sis => "sis",
            Command::Spectrum => "spectrum",
            Command::Moments => "moments",
            Command::Oracle => "oracle",
            Command::Validate => "validate",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::Kimura => "Kimura diffusion: interior density and fixation atoms",
            Command::Sis => "SIS model: interior density and extinction atom",
            Command::Spectrum => "Eigenvalues of a totally conservative problem",
            Command::Moments => "Evolution with prescribed moments",
            Command::Oracle => "Euler-Maruyama simulation of the matched diffusion",
            Command::Validate => "Joint PDE and Monte Carlo run with a z-score report",
        }
    }
}

pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const KEYS: &[Key] = &[
    key("out", Some("out"), "output directory"),
    key(
        "model",
        Some("kimura"),
        "model for oracle and validate: kimura or sis",
    ),
    key("n", Some("201"), "grid nodes on [0, 1]"),
    key("t_final", Some("10"), "time horizon"),
    key(
        "times",
        None,
        "comma-separated snapshot times; default 11 evenly spaced over [0, t_final]",
    ),
    key("psi", Some("0"), "selection coefficient psi(x) as an expression"),
    key("psi_table", None, "CSV file `x,value` for psi; overrides psi"),
    key(
        "psi_order",
        Some("linear"),
        "interpolation of psi_table: linear or cubic",
    ),
    key("r0", Some("2"), "SIS reproduction number R0"),
    key(
        "epsilons",
        None,
        "comma-separated regularization ladder, strictly decreasing",
    ),
    key(
        "probes",
        Some("0.25,0.5,0.75"),
        "probe points for the ladder diagnostics",
    ),
    key("u_i", Some("1"), "initial density u_I(x) as an expression"),
    key("normalize", Some("true"), "rescale u_I to unit mass"),
    key("x0", None, "point initial condition for oracle and validate"),
    key("seed", Some("1"), "random seed"),
    key("replicates", Some("10000"), "simulated paths"),
    key("dt", Some("1e-4"), "Euler-Maruyama step"),
    key("bins", Some("50"), "histogram bins"),
    key("p", Some("1"), "diffusion coefficient p(x)"),
    key("q", Some("0"), "potential q(x)"),
    key("w", Some("1"), "weight w(x)"),
    key("law1", Some("1"), "first conservation law"),
    key("law2", Some("x"), "second conservation law"),
    key("k", Some("6"), "number of eigenpairs"),
    key(
        "f1",
        None,
        "prescribed first moment F1(t); default keeps the initial value",
    ),
    key(
        "f2",
        None,
        "prescribed second moment F2(t); default keeps the initial value",
    ),
    key(
        "v0",
        Some("1 + 0.1*cos(6.283185307179586*x)"),
        "initial data for moments",
    ),
    key("mass_tol", Some("1e-6"), "conservation tolerance for kimura"),
    key("sis_mass_tol", Some("1e-3"), "total mass tolerance for sis"),
    key(
        "formula_tol",
        Some("1e-3"),
        "agreement of conservation-form and flux-form atoms",
    ),
    key("moment_tol", Some("1e-4"), "moment tracking tolerance"),
    key("z_threshold", Some("3"), "largest accepted |z| of an atom"),
    key("cdf_threshold", Some("0.02"), "largest accepted CDF distance"),
];

pub fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

/// Validation failures, all of them at once.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "config error: {e}")?;
        }
        Ok(())
    }
}

/// Parses the config file format. Keys must be known and appear once.
pub fn parse_file(text: &str, origin: &str) -> Result<BTreeMap<String, String>, ConfigErrors> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = format!("{origin}:{}", lineno + 1);
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!("{at}: expected `key = value`"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if lookup(k).is_none() {
            errors.push(format!("{at}: unknown key `{k}`"));
        } else if map.insert(k.to_string(), v.to_string()).is_some() {
            errors.push(format!("{at}: duplicate key `{k}`"));
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(ConfigErrors(errors))
    }
}

#[derive(Clone)]
pub struct RunConfig {
    pub command: Command,
    /// Every resolved key, for the manifest echo.
    pub echo: BTreeMap<&'static str, String>,
    pub emit_plot_data: bool,
    pub out: PathBuf,
    pub sis: bool,
    pub n: usize,
    pub t_final: f64,
    pub times: Vec<f64>,
    pub psi: CoefficientField,
    pub r0: f64,
    pub epsilons: Option<Vec<f64>>,
    pub probes: Vec<f64>,
    pub u_i: CoefficientField,
    pub normalize: bool,
    pub x0: Option<f64>,
    pub seed: u64,
    pub replicates: usize,
    pub dt: f64,
    pub bins: usize,
    pub p: CoefficientField,
    pub q: CoefficientField,
    pub w: CoefficientField,
    pub law1: CoefficientField,
    pub law2: CoefficientField,
    pub k: usize,
    pub f1: Option<TimeFunction>,
    pub f2: Option<TimeFunction>,
    pub v0: CoefficientField,
    pub mass_tol: f64,
    pub sis_mass_tol: f64,
    pub formula_tol: f64,
    pub moment_tol: f64,
    pub z_threshold: f64,
    pub cdf_threshold: f64,
}

struct Reader<'a> {
    values: &'a BTreeMap<&'static str, String>,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn raw(&self, k: &str) -> Option<&str> {
        self.values.get(k).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&mut self, k: &str, what: &str) -> Option<T> {
        let v = self.raw(k)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.errors.push(format!("{k} = `{v}` is not {what}"));
                None
            }
        }
    }

    fn positive(&mut self, k: &str) -> f64 {
        match self.parse::<f64>(k, "a number") {
            Some(x) if x > 0.0 && x.is_finite() => x,
            Some(x) => {
                self.errors.push(format!("{k} = {x} must be positive and finite"));
                f64::NAN
            }
            None => f64::NAN,
        }
    }

    fn count(&mut self, k: &str, min: usize) -> usize {
        match self.parse::<usize>(k, "a nonnegative integer") {
            Some(x) if x >= min => x,
            Some(x) => {
                self.errors.push(format!("{k} = {x} must be at least {min}"));
                min
            }
            None => min,
        }
    }

    fn list(&mut self, k: &str) -> Option<Vec<f64>> {
        let v = self.raw(k)?.to_string();
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    self.errors.push(format!("{k}: `{item}` is not a finite number"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn field(&mut self, k: &str) -> CoefficientField {
        let text = self.raw(k).unwrap_or("0").to_string();
        match CoefficientField::from_expression(&text) {
            Ok(f) => f,
            Err(e) => {
                self.errors.push(format!("{k} = `{text}`: {e}"));
                CoefficientField::zero()
            }
        }
    }

    fn time_fn(&mut self, k: &str) -> Option<TimeFunction> {
        let text = self.raw(k)?.to_string();
        match TimeFunction::from_expr(&text) {
            Ok(f) => Some(f),
            Err(e) => {
                self.errors.push(format!("{k} = `{text}`: {e}"));
                None
            }
        }
    }
}

impl RunConfig {
    /// Merges the sources and validates every key, collecting all problems.
    pub fn resolve(
        command: Command,
        file: &BTreeMap<String, String>,
        cli: &BTreeMap<String, String>,
        emit_plot_data: bool,
    ) -> Result<Self, ConfigErrors> {
        let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
        for key in KEYS {
            let v = cli
                .get(key.name)
                .or_else(|| file.get(key.name))
                .cloned()
                .or_else(|| key.default.map(str::to_string));
            if let Some(v) = v {
                values.insert(key.name, v);
            }
        }
        let mut r = Reader {
            values: &values,
            errors: Vec::new(),
        };

        let sis = match (command, r.raw("model")) {
            (Command::Sis, _) => true,
            (Command::Kimura, _) => false,
            (_, Some("kimura")) => false,
            (_, Some("sis")) => true,
            (_, other) => {
                r.errors
                    .push(format!("model = `{}` must be kimura or sis", other.unwrap_or("")));
                false
            }
        };
        let n = r.count("n", 5);
        let t_final = r.positive("t_final");
        let times = match r.list("times") {
            Some(ts) => ts,
            None if r.raw("times").is_some() => Vec::new(),
            None => (0..=10).map(|k| t_final * k as f64 / 10.0).collect(),
        };
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            r.errors.push("times must be strictly increasing".into());
        }
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= t_final)) {
            r.errors
                .push(format!("snapshot time {t} lies outside [0, t_final = {t_final}]"));
        }

        let order = match r.raw("psi_order") {
            Some("linear") => Interpolation::Linear,
            Some("cubic") => Interpolation::Cubic,
            other => {
                r.errors.push(format!(
                    "psi_order = `{}` must be linear or cubic",
                    other.unwrap_or("")
                ));
                Interpolation::Linear
            }
        };
        let psi = match r.raw("psi_table").map(PathBuf::from) {
            Some(path) => match std::fs::read_to_string(&path) {
                Ok(text) => match CoefficientField::from_csv(&text, order) {
                    Ok(f) => f,
                    Err(e) => {
                        r.errors.push(format!("psi_table {}: {e}", path.display()));
                        CoefficientField::zero()
                    }
                },
                Err(e) => {
                    r.errors.push(format!("psi_table {}: {e}", path.display()));
                    CoefficientField::zero()
                }
            },
            None => r.field("psi"),
        };
        let r0 = r.positive("r0");
        if sis && r0.is_finite() && r0 <= 1.0 {
            r.errors.push(format!("r0 = {r0} must exceed 1"));
        }

        let epsilons = r.list("epsilons");
        if let Some(eps) = &epsilons {
            if eps.len() < 2 {
                r.errors.push("epsilons needs at least two values".into());
            }
            if eps.iter().any(|e| !(*e > 0.0)) {
                r.errors.push("epsilons must be positive".into());
            }
            if eps.windows(2).any(|w| !(w[1] < w[0])) {
                r.errors.push("epsilons must be strictly decreasing".into());
            }
        }
        let probes = r.list("probes").unwrap_or_default();
        if probes.is_empty() || probes.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
            r.errors
                .push("probes must be a nonempty list inside (0, 1)".into());
        }

        let u_i = r.field("u_i");
        let normalize = r.parse::<bool>("normalize", "true or false").unwrap_or(true);
        let x0 = r.parse::<f64>("x0", "a number");
        if let Some(x) = x0 {
            if !(0.0..=1.0).contains(&x) {
                r.errors.push(format!("x0 = {x} lies outside [0, 1]"));
            }
        }
        let seed = r.parse::<u64>("seed", "a nonnegative integer").unwrap_or(0);
        let replicates = r.count("replicates", 1);
        let dt = r.positive("dt");
        let bins = r.count("bins", 1);
        if matches!(command, Command::Oracle | Command::Validate) && dt.is_finite() {
            if let Some(t) = times.iter().find(|t| {
                let k = (**t / dt).round();
                (k * dt - **t).abs() > 1e-9 * t.max(1.0)
            }) {
                r.errors
                    .push(format!("snapshot time {t} is not a multiple of dt = {dt}"));
            }
        }

        let p = r.field("p");
        let q = r.field("q");
        let w = r.field("w");
        let law1 = r.field("law1");
        let law2 = r.field("law2");
        let k = r.count("k", 1);
        if k + 2 > n {
            r.errors
                .push(format!("k = {k} must not exceed n - 2 = {}", n.saturating_sub(2)));
        }
        let f1 = r.time_fn("f1");
        let f2 = r.time_fn("f2");
        let v0 = r.field("v0");

        let mass_tol = r.positive("mass_tol");
        let sis_mass_tol = r.positive("sis_mass_tol");
        let formula_tol = r.positive("formula_tol");
        let moment_tol = r.positive("moment_tol");
        let z_threshold = r.positive("z_threshold");
        let cdf_threshold = r.positive("cdf_threshold");

        let out = PathBuf::from(r.raw("out").unwrap_or("out"));
        let errors = std::mem::take(&mut r.errors);
        if !errors.is_empty() {
            return Err(ConfigErrors(errors));
        }
        Ok(Self {
            command,
            echo: values,
            emit_plot_data,
            out,
            sis,
            n,
            t_final,
            times,
            psi,
            r0,
            epsilons,
            probes,
            u_i,
            normalize,
            x0,
            seed,
            replicates,
            dt,
            bins,
            p,
            q,
            w,
            law1,
            law2,
            k,
            f1,
            f2,
            v0,
            mass_tol,
            sis_mass_tol,
            formula_tol,
            moment_tol,
            z_threshold,
            cdf_threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn file_format() {
        let m = parse_file("# header\nn = 51  # grid\n\npsi=1 - 2*x\n", "f").unwrap();
        assert_eq!(m["n"], "51");
        assert_eq!(m["psi"], "1 - 2*x");
        let err = parse_file("n = 1\nbogus = 2\nn = 3\njunk\n", "f").unwrap_err();
        assert_eq!(err.0.len(), 3, "{err}");
        assert!(err.0[0].starts_with("f:2"));
    }

    #[test]
    fn precedence() {
        let file = map(&[("n", "51"), ("t_final", "2")]);
        let cli = map(&[("n", "101")]);
        let c = RunConfig::resolve(Command::Kimura, &file, &cli, false).unwrap();
        assert_eq!(c.n, 101);
        assert_eq!(c.t_final, 2.0);
        assert_eq!(c.times.len(), 11);
        assert_eq!(c.times[10], 2.0);
        assert_eq!(c.echo["seed"], "1");
    }

    #[test]
    fn all_problems_reported() {
        let cli = map(&[
            ("n", "3"),
            ("psi", "x +"),
            ("times", "1,0.5"),
            ("epsilons", "0.1,0.2"),
        ]);
        let Err(err) = RunConfig::resolve(Command::Kimura, &BTreeMap::new(), &cli, false) else {
            panic!("expected errors")
        };
        let text = err.to_string();
        for needle in [
            "n = 3",
            "psi",
            "strictly increasing",
            "strictly decreasing",
            "k = 6",
        ] {
            assert!(text.contains(needle), "{needle} missing from\n{text}");
        }
    }

    #[test]
    fn empty_times_allowed() {
        let cli = map(&[("times", "")]);
        let c = RunConfig::resolve(Command::Kimura, &BTreeMap::new(), &cli, false).unwrap();
        assert!(c.times.is_empty());
    }

    #[test]
    fn oracle_times_must_align_with_dt() {
        let cli = map(&[("times", "0.5,0.50005"), ("dt", "1e-3"), ("t_final", "1")]);
        let Err(err) = RunConfig::resolve(Command::Oracle, &BTreeMap::new(), &cli, false) else {
            panic!("expected errors")
        };
        assert!(err.to_string().contains("multiple of dt"));
    }
}
