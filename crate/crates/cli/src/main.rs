use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ipop_cli::output::{self, OutputSet};
use ipop_cli::runner::{self, RunOutcome};
use ipop_cli::{catalog, load_source, CliError};

#[derive(Parser)]
#[command(name = "ipop", version, about = "Averaged-model simulator for parallel AC-DC-DC supplies")]
struct Cli {
    /// Worker threads for compare and sweep (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write CSV traces at the control rate instead of outputs.rate.
    #[arg(long, global = true)]
    full_rate: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario (file path or catalog name).
    Run {
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check the scenario's [assert] thresholds; exit 4 on failure.
        #[arg(long)]
        assert: bool,
    },
    /// Simulate several scenarios and tabulate their metrics side by side.
    Compare {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
    },
    /// Re-run a scenario over a list of values for one numeric parameter.
    Sweep {
        scenario: String,
        /// Dotted parameter path, e.g. plant.c2 (default: the scenario's [sweep]).
        #[arg(long)]
        param: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert: bool,
    },
    /// Built-in scenarios.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Names and descriptions of the built-in scenarios.
    List,
    /// Print one built-in scenario file.
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, out, assert } => run(&scenario, out, assert, cli.full_rate),
        Command::Compare { scenarios, out, assert } => compare(&scenarios, out, assert, cli.workers, cli.full_rate),
        Command::Sweep { scenario, param, values, out, assert } => {
            sweep(&scenario, param, values, out, assert, cli.workers)
        }
        Command::Catalog { action: CatalogAction::List } => {
            for e in catalog::CATALOG {
                let s = ipop_core::Scenario::parse(e.text).map_err(|err| CliError::Validation(err.to_string()))?;
                println!("{:<28} {}", e.name, s.description);
            }
            Ok(())
        }
        Command::Catalog { action: CatalogAction::Show { name } } => {
            let e = catalog::find(&name).ok_or_else(|| CliError::Validation(format!("no catalog entry {name}")))?;
            print!("{}", e.text);
            Ok(())
        }
    }
}

fn finish_asserts(enabled: bool, runs: &[&RunOutcome]) -> Result<(), CliError> {
    if !enabled {
        return Ok(());
    }
    let fails: Vec<String> = runs.iter().flat_map(|o| runner::check_assertions(o)).collect();
    if fails.is_empty() {
        println!("assertions: all passed");
        Ok(())
    } else {
        for f in &fails {
            println!("assertion FAILED: {f}");
        }
        Err(CliError::Assert(format!("{} threshold(s) violated", fails.len())))
    }
}

fn run(arg: &str, out: Option<PathBuf>, assert: bool, full_rate: bool) -> Result<(), CliError> {
    let src = load_source(arg)?;
    let scenario = runner::parse(&src)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    let o = runner::execute(src, scenario)?;

    let mut files = OutputSet::create(&dir)?;
    files.write("traces.csv", &output::trace_csv(&o, full_rate)?)?;
    files.write("metrics.csv", &output::metrics_csv(&["scenario"], &[(vec![o.scenario.name.clone()], &o)]))?;
    files.write("report.txt", &output::report(&o))?;
    for (name, svg) in output::trace_plots(&o)? {
        files.write(&name, &svg)?;
    }
    files.write("timing.txt", &format!("wall_time_s = {}\n", o.wall.as_secs_f64()))?;
    let written = files.commit();

    let m = &o.metrics;
    println!("{}: {} files in {}", o.scenario.name, written.len(), dir.display());
    println!(
        "  settling {:.4} s, ripple p-p {:.6}, tone {:.6} at {} Hz, sag fraction {:.4}, wall {:.3} s",
        m.metrics.settling_time,
        m.metrics.ripple_pp,
        m.metrics.tone_amp,
        m.metrics.tone_freq,
        m.sag_fraction,
        o.wall.as_secs_f64()
    );
    for w in &o.output.warnings {
        println!("  warning: {w}");
    }
    finish_asserts(assert, &[&o])
}

fn compare(args: &[String], out: Option<PathBuf>, assert: bool, workers: Option<usize>, full_rate: bool) -> Result<(), CliError> {
    let jobs = args
        .iter()
        .map(|a| {
            let src = load_source(a)?;
            let s = runner::parse(&src)?;
            Ok((src, s))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let runs = runner::run_all(jobs, workers)?;
    let labelled: Vec<(String, &RunOutcome)> = runs.iter().map(|o| (o.scenario.name.clone(), o)).collect();
    let rows: Vec<(Vec<String>, &RunOutcome)> = labelled.iter().map(|(l, o)| (vec![l.clone()], *o)).collect();

    let dir = out.unwrap_or_else(|| PathBuf::from("out").join("compare"));
    let mut files = OutputSet::create(&dir)?;
    let table = output::metrics_csv(&["scenario"], &rows);
    files.write("compare.csv", &table)?;
    files.write("compare_traces.csv", &output::overlay_csv(&labelled, full_rate))?;
    files.write("compare.svg", &output::overlay_plot("comparison", &labelled))?;
    files.commit();

    print!("{table}");
    println!("written to {}", dir.display());
    finish_asserts(assert, &runs.iter().collect::<Vec<_>>())
}

fn sweep(
    arg: &str,
    param: Option<String>,
    values: Vec<f64>,
    out: Option<PathBuf>,
    assert: bool,
    workers: Option<usize>,
) -> Result<(), CliError> {
    let src = load_source(arg)?;
    let base = runner::parse(&src)?;
    let (param, values) = match (param, base.sweep.clone()) {
        (Some(p), _) if !values.is_empty() => (p, values),
        (Some(p), Some(sw)) if sw.param == p => (p, sw.values),
        (None, Some(sw)) if values.is_empty() => (sw.param, sw.values),
        (None, Some(sw)) => (sw.param, values),
        (Some(_), _) => return Err(CliError::Validation("sweep: --values is required".into())),
        (None, None) => {
            return Err(CliError::Validation(format!("{}: --param is required (scenario has no [sweep])", src.label)))
        }
    };
    let jobs = runner::sweep_jobs(&src, &param, &values)?;
    let runs = runner::run_all(jobs, workers)?;
    let labelled: Vec<(String, &RunOutcome)> =
        values.iter().zip(&runs).map(|(v, o)| (format!("{param}={v}"), o)).collect();
    let rows: Vec<(Vec<String>, &RunOutcome)> =
        values.iter().zip(&runs).map(|(v, o)| (vec![param.clone(), v.to_string()], o)).collect();

    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(format!("sweep_{}", base.name)));
    let mut files = OutputSet::create(&dir)?;
    let table = output::metrics_csv(&["param", "value"], &rows);
    files.write("sweep.csv", &table)?;
    files.write("sweep.svg", &output::overlay_plot(&format!("{}: sweep of {param}", base.name), &labelled))?;
    files.commit();

    print!("{table}");
    println!("written to {}", dir.display());
    finish_asserts(assert, &runs.iter().collect::<Vec<_>>())
}
