use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opdet::config::{Format, SweepConfig};
use opdet::sweep::{constants, critical_lambda, emit_report, run_sweep, selftest, ConstantsParams};
use opdet::{Error, KernelSpec};

/// Fredholm determinants of truncated convolution operators and their
/// large-window asymptotics.
#[derive(Parser, Debug)]
#[command(name = "opdet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// det(I + K_alpha) against G^{2 alpha} E det(I+K1) det(I+K2) over an alpha range.
    Sweep(Flags),
    /// G, E and the correction determinants, each by two routes.
    Constants(Flags),
    /// Closed-form checks of the engine.
    Selftest,
}

#[derive(Args, Debug)]
struct Flags {
    /// key=value file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long = "alpha-min", allow_hyphen_values = true)]
    alpha_min: Option<String>,
    #[arg(long = "alpha-max", allow_hyphen_values = true)]
    alpha_max: Option<String>,
    #[arg(long = "alpha-step")]
    alpha_step: Option<String>,
    #[arg(long = "panel-n")]
    panel_n: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "domain-L", allow_hyphen_values = true)]
    domain_l: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Output file (standard output when absent).
    #[arg(long)]
    out: Option<String>,
}

impl Flags {
    fn resolve(&self) -> Result<SweepConfig, Error> {
        let mut cfg = SweepConfig::default();
        if let Some(p) = &self.config {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            for (k, v) in opdet::config::parse_config(&text)? {
                cfg.apply(&k, &v)?;
            }
        }
        let flags = [
            ("family", &self.family),
            ("lambda", &self.lambda),
            ("alpha-min", &self.alpha_min),
            ("alpha-max", &self.alpha_max),
            ("alpha-step", &self.alpha_step),
            ("panel-n", &self.panel_n),
            ("tol", &self.tol),
            ("domain-L", &self.domain_l),
            ("format", &self.format),
            ("out", &self.out),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.apply(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report_index_failure(e: &Error, cfg: &SweepConfig) {
    eprintln!("error: {e}");
    if let Ok(spec) = KernelSpec::new(cfg.family, cfg.lambda) {
        match critical_lambda(&spec) {
            Some(c) => eprintln!("critical lambda (sigma first vanishes): {c:.12}"),
            None => eprintln!(
                "critical lambda: not bracketed between {} and 0",
                cfg.lambda
            ),
        }
    }
}

fn fail(e: Error, cfg: Option<&SweepConfig>) -> ExitCode {
    match (&e, cfg) {
        (Error::IndexFailure(_), Some(cfg)) => report_index_failure(&e, cfg),
        _ => eprintln!("error: {e}"),
    }
    ExitCode::from(e.exit_code() as u8)
}

fn sweep(flags: &Flags) -> ExitCode {
    let cfg = match flags.resolve() {
        Ok(c) => c,
        Err(e) => return fail(e, None),
    };
    let report = match run_sweep(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(e, Some(&cfg)),
    };
    match emit_report(&report.rows, cfg.format, cfg.out.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, None),
    }
}

fn constants_cmd(flags: &Flags) -> ExitCode {
    let cfg = match flags.resolve() {
        Ok(c) => c,
        Err(e) => return fail(e, None),
    };
    let rec = match constants(cfg.family, cfg.lambda, &ConstantsParams::from_config(&cfg)) {
        Ok(r) => r,
        Err(e) => return fail(e, Some(&cfg)),
    };
    let text = match cfg.format {
        Format::Json => serde_json::to_string_pretty(&rec).expect("record serializes") + "\n",
        Format::Csv => {
            let v = serde_json::to_value(&rec).expect("record serializes");
            let mut s = String::new();
            for (k, val) in v.as_object().expect("object") {
                s.push_str(&format!("{k} = {val}\n"));
            }
            s
        }
    };
    let res = match &cfg.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, None),
    }
}

fn selftest_cmd() -> ExitCode {
    let checks = match selftest() {
        Ok(c) => c,
        Err(e) => return fail(e, None),
    };
    let mut failed = 0;
    for c in &checks {
        println!("{c}");
        failed += usize::from(!c.pass);
    }
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors must not collide with the index-failure status
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match &cli.command {
        Command::Sweep(f) => sweep(f),
        Command::Constants(f) => constants_cmd(f),
        Command::Selftest => selftest_cmd(),
    }
}
