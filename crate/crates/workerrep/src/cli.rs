//! The `workerrep` command line.
//!
//! Exit status is 0 on success, 1 when the input is well formed but the
//! operation fails (invalid scenario, deadlock, broken chain) and 2 on
//! usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use workerrep_core::crypto::Ed25519;
use workerrep_core::gas::GasSchedule;
use workerrep_core::ledger::BadReason;
use workerrep_core::sim::{self, RunOutput, ScenarioConfig, SimError};
use workerrep_core::{replay, verify_chain, Fixed, SearchFilter, TaskStatus, VerifyReport, Wei};

use crate::export;
use crate::files::write_atomic;
use crate::snapshot::{sidecar, Snapshot, SnapshotError};

/// Environment variable naming the default output directory of `run`.
pub const OUT_DIR_ENV: &str = "WORKERREP_OUT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// File names written by `run`.
pub const TRACE_FILE: &str = "ledger.wrl";
pub const SIDECAR_FILE: &str = "ledger.json";
pub const REPORT_FILE: &str = "report.json";
pub const PER_TICK_FILE: &str = "per_tick.csv";
pub const COSTS_FILE: &str = "costs.csv";
pub const SCENARIO_FILE: &str = "scenario.json";
pub const STORE_DIR: &str = "store";

#[derive(Parser, Debug)]
#[command(
    name = "workerrep",
    version,
    about = "Run crowdsourcing scenarios, check and replay ledger traces, print gas costs",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a scenario and write its trace, report and content store.
    Run(RunArgs),
    /// Rebuild the state from a trace and print its state root.
    Replay(TraceArg),
    /// Check every hash, link and signature of a trace.
    Verify(TraceArg),
    /// List the tasks recorded in a trace.
    Report(ReportArgs),
    /// Gas and fiat cost of each measured operation.
    GasTable(GasArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Replaces the seed in the scenario file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "workerrep-out")]
    pub out: PathBuf,
    /// Report format; both when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug)]
pub struct TraceArg {
    /// Ledger snapshot written by `run`.
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Only tasks with at least this reward, in wei.
    #[arg(long)]
    pub min_reward: Option<u128>,
    /// Only tasks whose required skills are all listed.
    #[arg(long = "skill")]
    pub skills: Vec<String>,
    #[arg(long, value_enum)]
    pub status: Option<Status>,
}

#[derive(Args, Debug)]
pub struct GasArgs {
    /// Gas price in gwei.
    #[arg(long, default_value = "1", value_parser = positive_fixed)]
    pub gwei: Fixed,
    /// Ether price in USD.
    #[arg(long, default_value = "144.30", value_parser = positive_fixed)]
    pub usd: Fixed,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Status {
    Open,
    Agreed,
    Submitted,
    Evaluated,
    Cancelled,
}

impl From<Status> for TaskStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Open => TaskStatus::Open,
            Status::Agreed => TaskStatus::Agreed,
            Status::Submitted => TaskStatus::Submitted,
            Status::Evaluated => TaskStatus::Evaluated,
            Status::Cancelled => TaskStatus::Cancelled,
        }
    }
}

fn positive_fixed(s: &str) -> Result<Fixed, String> {
    let v: Fixed = s.parse().map_err(|_| format!("`{s}` is not a decimal with at most four places"))?;
    if v.raw() <= 0 {
        return Err("must be positive".into());
    }
    Ok(v)
}

/// A failed command: its message and exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn domain(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DOMAIN, message: message.into() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::domain(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::domain(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::domain(e.to_string())
    }
}

impl From<SnapshotError> for Failure {
    fn from(e: SnapshotError) -> Self {
        Failure::domain(e.to_string())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                if !rendered.contains("Usage:") {
                    let _ = write!(err, "\n{}", Cli::command().render_usage());
                }
                EXIT_USAGE
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Run(a) => run(&a, out),
        Command::Replay(a) => {
            let snap = read_trace(&a.trace)?;
            let state = replay(&Ed25519, &snap.params, &snap.entries).map_err(|e| Failure::domain(e.to_string()))?;
            writeln!(out, "{}", state.state_root)?;
            Ok(())
        }
        Command::Verify(a) => verify(&a.trace, out),
        Command::Report(a) => report(&a, out),
        Command::GasTable(a) => {
            let schedule = GasSchedule { gas_price_gwei: a.gwei, ether_usd: a.usd, ..GasSchedule::default() };
            match a.format {
                TableFormat::Text => out.write_all(export::gas_table_text(&schedule).as_bytes())?,
                TableFormat::Csv => out.write_all(&export::gas_table_csv(&schedule)?)?,
                TableFormat::Json => {
                    let mut rows = export::gas_rows(&schedule);
                    rows.push(export::lifecycle_row(&schedule));
                    serde_json::to_writer_pretty(&mut *out, &rows)?;
                    writeln!(out)?;
                }
            }
            Ok(())
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
}

fn run(a: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = load_scenario(&a.scenario)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let (output, stalled) = match sim::run(&cfg) {
        Ok(o) => (o, None),
        Err(SimError::Deadlock { tick, diagnostic, partial }) => {
            (*partial, Some(format!("deadlock at tick {tick}: {diagnostic}")))
        }
        Err(e) => return Err(Failure::domain(e.to_string())),
    };
    write_outputs(&a.out, &cfg, &output, a.format)?;
    let r = &output.report;
    writeln!(out, "scenario     {}", r.scenario)?;
    writeln!(out, "seed         {}", r.seed)?;
    writeln!(out, "termination  {:?}", r.termination)?;
    writeln!(out, "entries      {}", r.entries)?;
    writeln!(out, "gas          {}", r.gas.total)?;
    writeln!(out, "residual     {}", r.conservation.residual)?;
    writeln!(out, "state_root   {}", r.state_root)?;
    writeln!(out, "output       {}", a.out.display())?;
    match stalled {
        Some(msg) => Err(Failure::domain(msg)),
        None => Ok(()),
    }
}

/// Writes the trace, its sidecar, the resolved scenario, the content store
/// and the report files selected by `format` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ScenarioConfig, o: &RunOutput, format: Option<Format>) -> Result<(), Failure> {
    let entries = o.ledger.entries();
    let snap = Snapshot::new(cfg.params.clone(), entries.to_vec());
    write_atomic(&dir.join(TRACE_FILE), &snap.to_bytes()?)?;
    let index = sidecar(entries, o.ledger.receipts());
    write_atomic(&dir.join(SIDECAR_FILE), &serde_json::to_vec_pretty(&index)?)?;
    write_atomic(&dir.join(SCENARIO_FILE), &serde_json::to_vec_pretty(cfg)?)?;
    export::dump_store(&dir.join(STORE_DIR), &o.store, o.ledger.platform())?;
    if format != Some(Format::Csv) {
        write_atomic(&dir.join(REPORT_FILE), &serde_json::to_vec_pretty(&o.report)?)?;
    }
    if format != Some(Format::Json) {
        write_atomic(&dir.join(PER_TICK_FILE), &export::per_tick_csv(&o.report)?)?;
        write_atomic(&dir.join(COSTS_FILE), &export::costs_csv(&o.report.gas)?)?;
    }
    Ok(())
}

fn read_trace(path: &Path) -> Result<Snapshot, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    Ok(Snapshot::from_bytes(&bytes)?)
}

pub fn reason_label(r: BadReason) -> &'static str {
    match r {
        BadReason::IndexMismatch => "index-mismatch",
        BadReason::PrevHashMismatch => "prev-hash-mismatch",
        BadReason::HashMismatch => "hash-mismatch",
        BadReason::MalformedPayload => "malformed-payload",
        BadReason::UnknownSender => "unknown-sender",
        BadReason::BadSignature => "bad-signature",
    }
}

fn verify(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    let snap = match Snapshot::from_bytes(&bytes) {
        Ok(s) => s,
        Err(SnapshotError::Entry { index }) => {
            writeln!(out, "bad entry {index}: unreadable")?;
            return Err(Failure::domain(format!("chain broken at entry {index}")));
        }
        Err(e) => return Err(e.into()),
    };
    match verify_chain(&Ed25519, &snap.entries) {
        VerifyReport::Ok { entries } => {
            writeln!(out, "ok: {entries} entries")?;
            Ok(())
        }
        VerifyReport::Bad { index, reason } => {
            writeln!(out, "bad entry {index}: {}", reason_label(reason))?;
            Err(Failure::domain(format!("chain broken at entry {index}")))
        }
    }
}

fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let snap = read_trace(&a.trace)?;
    let state = replay(&Ed25519, &snap.params, &snap.entries).map_err(|e| Failure::domain(e.to_string()))?;
    let filter = SearchFilter {
        skills: (!a.skills.is_empty()).then(|| a.skills.iter().cloned().collect()),
        min_reward: a.min_reward.map(Wei),
        status: a.status.map(Into::into),
    };
    let tasks = state.platform.search(&filter);
    match a.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &export::task_rows(&tasks))?;
            writeln!(out)?;
        }
        Format::Csv => out.write_all(&export::tasks_csv(&tasks)?)?,
    }
    Ok(())
}
