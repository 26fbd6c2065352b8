mod config;
mod output;
mod run;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Arg, ArgAction, ArgMatches};

use config::{Command, ConfigErrors, RunConfig, KEYS};
use output::{Manifest, OutputDir};
use run::Failure;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

fn cli() -> clap::Command {
    let mut app = clap::Command::new("conspde")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Conservative and boundary-degenerate parabolic solvers")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in Command::ALL {
        let mut sub = clap::Command::new(c.name())
            .about(c.about())
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("key = value file; command-line keys take precedence"),
            )
            .arg(
                Arg::new("emit-plot-data")
                    .long("emit-plot-data")
                    .action(ArgAction::SetTrue)
                    .help("also write long-format CSVs for plotting"),
            );
        for k in KEYS {
            let help = match k.default {
                Some(d) => format!("{} [default: {d}]", k.help),
                None => k.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name)
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .help(help),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

fn load(command: Command, m: &ArgMatches) -> Result<RunConfig, ConfigErrors> {
    let file = match m.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigErrors(vec![format!("cannot read {path}: {e}")]))?;
            config::parse_file(&text, path)?
        }
        None => BTreeMap::new(),
    };
    let overrides: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|k| {
            m.get_one::<String>(k.name)
                .map(|v| (k.name.to_string(), v.clone()))
        })
        .collect();
    RunConfig::resolve(command, &file, &overrides, m.get_flag("emit-plot-data"))
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command = *Command::ALL
        .iter()
        .find(|c| c.name() == name)
        .expect("registered subcommand");
    let cfg = match load(command, sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let started = Instant::now();
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = match OutputDir::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create output directory {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    let result = run::execute(&cfg, &mut out);

    let mut manifest = Manifest {
        command: command.name().to_string(),
        config: cfg.echo.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        wall_clock_s: 0.0,
        started_unix_s,
        checks: Vec::new(),
        warnings: Vec::new(),
        assumptions: Vec::new(),
        outputs: Vec::new(),
        notes: Vec::new(),
        status: String::new(),
    };
    let code = match result {
        Ok(report) => {
            let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
            for c in &failed {
                eprintln!(
                    "check failed: {} measured {} limit {}",
                    c.name, c.measured, c.limit
                );
            }
            manifest.status = if failed.is_empty() {
                "ok".into()
            } else {
                "validation_failure".into()
            };
            let code = if failed.is_empty() { 0 } else { EXIT_VALIDATION };
            manifest.checks = report.checks;
            manifest.warnings = report.warnings;
            manifest.assumptions = report.assumptions;
            manifest.notes = report.notes;
            code
        }
        Err(Failure::Input(m)) => {
            eprintln!("config error: {m}");
            manifest.status = format!("config_error: {m}");
            EXIT_CONFIG
        }
        Err(e @ Failure::Solver { .. }) => {
            eprintln!("error: {e}");
            manifest.status = format!("numerical_error: {e}");
            EXIT_NUMERICAL
        }
        Err(Failure::Write(e)) => {
            eprintln!("error: write failed: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    manifest.outputs = out.files.clone();
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    if let Err(e) = out.write("manifest.txt", manifest.render().as_bytes()) {
        eprintln!("error: write failed: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    println!(
        "{}: {} files in {}",
        command.name(),
        out.files.len(),
        cfg.out.display()
    );
    ExitCode::from(code)
}
