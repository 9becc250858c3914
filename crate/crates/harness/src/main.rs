use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use d2p2_core::accountant::{self, MechanismParams, DEFAULT_C1_CEILING};
use d2p2_core::ScheduleMode;
use d2p2_harness::{ExperimentSpec, HarnessError, Result};

#[derive(Parser)]
#[command(name = "d2p2", version, about = "Differentially private SGD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured optimizer over every seed and write metric CSVs.
    Run(RunArgs),
    /// Like `run`, sweeping one knob over a list of values.
    Sweep {
        #[arg(long)]
        axis: String,
        #[arg(long)]
        values: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the privacy loss of a subsampled Gaussian mechanism.
    Accountant(AccountantArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One or more of d2p2|d2p|dp2|dpsgd|sgd, comma separated.
    #[arg(long)]
    optimizer: Option<String>,
    /// `synthetic` or `csv:<path>`.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    sigma_eps: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    reduction_rate: Option<String>,
    /// Comma separated, e.g. 0,1,2,3,4.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

#[derive(Args)]
struct AccountantArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    batch_size: u64,
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 3.0)]
    sigma_eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    delta: f64,
    /// Use the decaying sigma/sqrt(k) schedule.
    #[arg(long)]
    dynamic: bool,
    /// Also report the smallest sigma_eps reaching this epsilon.
    #[arg(long)]
    target_eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_C1_CEILING)]
    c1_ceiling: f64,
}

impl RunArgs {
    fn into_spec(self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => ExperimentSpec::default(),
        };
        let flags = [
            ("optimizer", self.optimizer),
            ("dataset", self.dataset),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("lr", self.lr),
            ("sigma_eps", self.sigma_eps),
            ("gamma", self.gamma),
            ("reduction_rate", self.reduction_rate),
            ("seeds", self.seeds),
            ("delta", self.delta),
            ("out", self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                spec.set(key, &v)?;
            }
        }
        for kv in &self.extra {
            let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::Spec(format!("--set expects key=value, got '{kv}'")))?;
            spec.set(k, v)?;
        }
        Ok(spec)
    }
}

fn run_spec(spec: &ExperimentSpec) -> Result<()> {
    let summary = d2p2_harness::run(spec)?;
    if let Some(note) = summary.runs.iter().find_map(|r| r.note.as_deref()) {
        eprintln!("note: {note}");
    }
    println!("wrote {} run files, {}, {}", summary.run_files.len(), summary.aggregate_file.display(), summary.report_file.display());
    println!("variant\tsweep_value\tfinal_accuracy\tfinal_epsilon");
    for r in &summary.report {
        let value = r.sweep_value.map_or_else(|| "-".to_string(), |v| v.to_string());
        let acc = r.final_accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.4}"));
        println!("{}\t{value}\t{acc}\t{:.4}", r.variant, r.final_epsilon);
    }
    Ok(())
}

fn accountant_cmd(a: AccountantArgs) -> Result<()> {
    let mode = if a.dynamic { ScheduleMode::Dynamic } else { ScheduleMode::Static };
    let params = MechanismParams::new(a.n, a.batch_size, a.sigma_eps, mode, a.delta)?;
    let ledger = accountant::ledger_after(&params, a.steps)?;
    let conv = ledger.epsilon_at_delta(a.delta)?;
    let c1 = accountant::c1_feasibility(a.n, a.batch_size, a.steps, conv.epsilon, a.c1_ceiling);
    println!(
        "epsilon={} order={} steps={} implied_c1={} c1_within_bound={}",
        conv.epsilon, conv.order, a.steps, c1.implied, c1.within_bound
    );
    if let Some(target) = a.target_eps {
        let cal = accountant::required_sigma(a.n, a.batch_size, a.steps, target, a.delta, mode)?;
        println!("required_sigma_eps={} epsilon={} target_c1_within_bound={}", cal.sigma_eps, cal.epsilon, cal.c1.within_bound);
        if !cal.c1.within_bound {
            eprintln!("warning: target epsilon implies C1 = {:.1} above ceiling {}", cal.c1.implied, a.c1_ceiling);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.into_spec().and_then(|spec| run_spec(&spec)),
        Command::Sweep { axis, values, run } => run.into_spec().and_then(|mut spec| {
            spec.set("sweep_axis", &axis)?;
            spec.set("sweep_values", &values)?;
            run_spec(&spec)
        }),
        Command::Accountant(args) => accountant_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
