// Thin front end over the scenario runner. All the substance lives in the
// library; see the examples/ directory for programmatic use.
//
// Usage:
//   quasidiff --config PATH [--seed U64] [--workers N] [--out DIR] [--dump-paths]
//   quasidiff --list [--tag TAG]
//   quasidiff --show NAME            # print a bundled scenario config
//
// Exit codes: 0 success, 2 precondition/config failure, 3 reliability
// warnings (censoring, inconclusive verdicts), 1 unexpected errors.

use std::path::PathBuf;
use std::process::ExitCode;

use quasidiff::error::Error;
use quasidiff::scenario::{self, RunOptions, RunStatus};

struct Args {
    config: Option<PathBuf>,
    list: bool,
    tag: Option<String>,
    show: Option<String>,
    opts: RunOptions,
}

const USAGE: &str = "\
quasidiff - Monte Carlo lab for quasi-diffusions with measurable coefficients

USAGE:
  quasidiff --config PATH [OPTIONS]   run a scenario file
  quasidiff --list [--tag TAG]        list bundled scenarios
  quasidiff --show NAME               print a bundled scenario config

OPTIONS:
  --config PATH    scenario config file (key = value sections)
  --seed U64       override the config's seed
  --workers N      worker threads (default: QUASIDIFF_WORKERS or all cores)
  --out DIR        override the output directory
  --dump-paths     write binary trajectory dumps for the first paths
  --list           print the bundled scenario catalog
  --tag TAG        filter --list by tag
  --show NAME      print the bundled scenario NAME to stdout
  --help           this text

EXIT CODES:
  0 success, 2 precondition failure, 3 reliability warnings
";

fn parse_args() -> Result<Args, String> {
    let mut args = Args {
        config: None,
        list: false,
        tag: None,
        show: None,
        opts: RunOptions::default(),
    };
    let mut it = std::env::args().skip(1);
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--help" | "-h" => {
                print!("{USAGE}");
                std::process::exit(0);
            }
            "--config" => {
                let v = it.next().ok_or("missing value for --config")?;
                args.config = Some(PathBuf::from(v));
            }
            "--seed" => {
                let v = it.next().ok_or("missing value for --seed")?;
                args.opts.seed_override =
                    Some(v.parse().map_err(|_| "invalid --seed (expected u64)")?);
            }
            "--workers" => {
                let v = it.next().ok_or("missing value for --workers")?;
                args.opts.workers =
                    Some(v.parse().map_err(|_| "invalid --workers (expected integer)")?);
            }
            "--out" => {
                let v = it.next().ok_or("missing value for --out")?;
                args.opts.out_override = Some(PathBuf::from(v));
            }
            "--dump-paths" => args.opts.dump_paths = true,
            "--list" => args.list = true,
            "--tag" => {
                let v = it.next().ok_or("missing value for --tag")?;
                args.tag = Some(v);
            }
            "--show" => {
                let v = it.next().ok_or("missing value for --show")?;
                args.show = Some(v);
            }
            other => return Err(format!("unknown argument `{other}`")),
        }
    }
    Ok(args)
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };

    if args.list {
        for entry in scenario::list_scenarios(args.tag.as_deref()) {
            println!("{:<26} [{}]  {}", entry.name, entry.tags.join(", "), entry.description);
        }
        return ExitCode::SUCCESS;
    }

    if let Some(name) = &args.show {
        match scenario::find_scenario(name) {
            Some(entry) => {
                print!("{}", entry.text);
                return ExitCode::SUCCESS;
            }
            None => {
                eprintln!("error: no bundled scenario named `{name}`");
                return ExitCode::from(2);
            }
        }
    }

    let Some(config) = args.config else {
        eprintln!("error: --config PATH is required (or use --list)\n\n{USAGE}");
        return ExitCode::from(2);
    };

    let mut opts = args.opts;
    if opts.workers.is_none() {
        if let Ok(v) = std::env::var("QUASIDIFF_WORKERS") {
            opts.workers = v.parse().ok();
        }
    }

    match scenario::run_scenario_file(&config, &opts) {
        Ok(outcome) => {
            println!("report: {}", outcome.report_path.display());
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            match outcome.status {
                RunStatus::Success => ExitCode::SUCCESS,
                RunStatus::PreconditionFailure => ExitCode::from(2),
                RunStatus::ReliabilityWarning => ExitCode::from(3),
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::ConfigParse { .. }
                | Error::InputDomain(_)
                | Error::NumericDomain(_)
                | Error::Precondition(_)
                | Error::Registry(_)
                | Error::FitDegenerate(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
