//! `sgdc`: train, encode, decode and audit SGD epoch orders.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sgd_compress::harness::{
    decode_artifacts, default_checks, orders_csv, replication_dir, report_totals, run_experiment,
    run_inequality_suite, verify_hoeffding, ExperimentSpec, HarnessError, HoeffdingResult, SuiteRow,
    Suites, HOEFFDING_HEADER, SUITE_HEADER,
};

/// Environment variable that overrides the output directory of a config file.
const OUT_ENV: &str = "SGDEC_OUT";

#[derive(Parser)]
#[command(name = "sgdc", version, about = "Exact bit accounting for SGD epoch orders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, encode and decode every replication, then run the requested suites.
    Run(SpecArgs),
    /// Train and encode every replication without running any suite.
    Encode(SpecArgs),
    /// Run only the verification suites; all of them when none is selected.
    Verify(SpecArgs),
    /// Decode the epoch files of one replication and compare with its orders.csv.
    Decode {
        #[command(flatten)]
        spec: SpecArgs,
        /// Replication index under the output directory.
        #[arg(long, default_value_t = 0)]
        replication: usize,
        /// Write the decoded orders here instead of stdout.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Check the reports under the output directory against their summaries.
    Report(SpecArgs),
}

/// Experiment settings. A `key=value` file supplies values first, then
/// `SGDEC_OUT`, then the flags.
#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// Flat key=value file; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// separable[:margin], gaussians:sigma[:margin] or random.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    n: Option<String>,
    /// Feature dimension.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    data_seed: Option<String>,
    /// logistic, logistic+bias or hidden:WIDTH.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    batch: Option<String>,
    /// Step size as a fraction on the grid, e.g. 1/16.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    beta_prime: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    /// Fractional bits of the fixed-point grid.
    #[arg(long)]
    scale: Option<String>,
    /// Largest magnitude of the fixed-point grid.
    #[arg(long)]
    clip: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// accounting or strict.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// none, hoeffding, inequalities or all (comma-separated).
    #[arg(long)]
    suites: Option<String>,
    #[arg(long)]
    hoeffding_trials: Option<String>,
}

impl SpecArgs {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("family", &self.family),
            ("n", &self.n),
            ("p", &self.p),
            ("data_seed", &self.data_seed),
            ("model", &self.model),
            ("batch", &self.batch),
            ("alpha", &self.alpha),
            ("epsilon", &self.epsilon),
            ("beta_prime", &self.beta_prime),
            ("seed", &self.seed),
            ("max_epochs", &self.max_epochs),
            ("scale", &self.scale),
            ("clip", &self.clip),
            ("replications", &self.replications),
            ("mode", &self.mode),
            ("out", &self.out),
            ("suites", &self.suites),
            ("hoeffding_trials", &self.hoeffding_trials),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    fn load(&self) -> Result<ExperimentSpec, HarnessError> {
        let mut spec = ExperimentSpec::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            spec.apply_text(&text)?;
        }
        if let Ok(out) = std::env::var(OUT_ENV) {
            if !out.is_empty() {
                spec.set("out", &out)?;
            }
        }
        spec.apply_pairs(&self.pairs())?;
        spec.validate()?;
        Ok(spec)
    }
}

fn print_suites(hoeffding: &[HoeffdingResult], rows: &[SuiteRow]) {
    if !hoeffding.is_empty() {
        println!("{HOEFFDING_HEADER}");
        for h in hoeffding {
            println!("{}", h.to_csv());
        }
    }
    if !rows.is_empty() {
        println!("{SUITE_HEADER}");
        for r in rows {
            println!("{}", r.to_csv());
        }
    }
}

fn run(spec: &ExperimentSpec) -> Result<bool, HarnessError> {
    let outcome = run_experiment(spec)?;
    for rep in outcome.reports() {
        print!("{}", rep.summary.to_text());
    }
    print_suites(&outcome.hoeffding, &outcome.inequalities);
    println!("output={}", spec.out_dir.display());
    Ok(outcome.suites_pass())
}

fn verify(mut spec: ExperimentSpec) -> Result<bool, HarnessError> {
    if spec.suites == Suites::default() {
        spec.suites = Suites::parse("all")?;
    }
    let hoeffding = if spec.suites.hoeffding {
        default_checks(spec.hoeffding_trials, spec.run.seed)
            .iter()
            .map(verify_hoeffding)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let rows = if spec.suites.inequalities {
        run_inequality_suite()
    } else {
        Vec::new()
    };
    print_suites(&hoeffding, &rows);
    Ok(hoeffding.iter().all(|h| h.verdict == Some(true)) && rows.iter().all(|r| r.pass()))
}

fn decode(spec: &ExperimentSpec, replication: usize, write: Option<&Path>) -> Result<bool, HarnessError> {
    let dir = replication_dir(&spec.out_dir, replication);
    let orders = decode_artifacts(spec, &dir)?;
    let text = orders_csv(&orders);
    match write {
        Some(path) => fs::write(path, &text).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?,
        None => print!("{text}"),
    }
    let recorded = dir.join("orders.csv");
    match fs::read_to_string(&recorded) {
        Ok(expected) => {
            let same = expected == text;
            eprintln!("{} epochs decoded; {}", orders.len(), if same { "match" } else { "MISMATCH" });
            Ok(same)
        }
        Err(_) => {
            eprintln!("{} epochs decoded; no orders.csv to compare", orders.len());
            Ok(true)
        }
    }
}

/// Field `key` of a `key=value` summary.
fn summary_field(text: &str, key: &str) -> Option<u64> {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix('=')?.parse().ok())
}

fn report(spec: &ExperimentSpec) -> Result<bool, HarnessError> {
    let mut ok = true;
    println!("replication,epochs,measured,charged,baseline,good,consistent");
    for r in 0..spec.replications {
        let dir = replication_dir(&spec.out_dir, r);
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| HarnessError::Io { path, source })
        };
        let totals = report_totals(&read("report.csv")?)?;
        let summary = read("summary.txt")?;
        let consistent = summary_field(&summary, "total_measured") == Some(totals.measured)
            && summary_field(&summary, "total_charged") == Some(totals.charged)
            && summary_field(&summary, "baseline_total") == Some(totals.baseline)
            && summary_field(&summary, "good_epochs") == Some(totals.good as u64)
            && summary_field(&summary, "encoded_epochs") == Some(totals.epochs as u64);
        ok &= consistent;
        println!(
            "{r},{},{},{},{},{},{}",
            totals.epochs, totals.measured, totals.charged, totals.baseline, totals.good, consistent as u8
        );
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => args.load().and_then(|s| run(&s)),
        Command::Encode(args) => args.load().and_then(|mut s| {
            s.suites = Suites::default();
            run(&s)
        }),
        Command::Verify(args) => args.load().and_then(verify),
        Command::Decode {
            spec,
            replication,
            write,
        } => spec.load().and_then(|s| decode(&s, *replication, write.as_deref())),
        Command::Report(args) => args.load().and_then(|s| report(&s)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
