//! Command-line driver over a snapshot-backed ledger.
//!
//! Exit codes: 0 success, 1 domain status (insufficient balance, unknown
//! resource, ...), 2 usage error, 3 unreadable or corrupt snapshot.
//! Machine-readable output goes to stdout; prose goes to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::adversary::{compare_with_unbounded, AttackPlan, TimingStrategy};
use crate::bucket::{ResourceConfig, Timestamp};
use crate::cost::{bench_costs, log_log_slope, CostRow, Operation};
use crate::ledger::{AccountId, Ledger, LedgerError, ResourceId};
use crate::snapshot::{self, SnapshotError};
use crate::Amount;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CORRUPT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "timebucket", version, about = "Time-bucketed balance records on a virtual clock")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create an empty snapshot.
    Init {
        #[arg(long)]
        state: PathBuf,
        /// Overwrite an existing snapshot.
        #[arg(long)]
        force: bool,
    },
    /// Define a resource with TTL and bucket count.
    DefineResource {
        id: ResourceId,
        #[arg(long)]
        ttl: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        state: PathBuf,
    },
    /// Move the virtual clock forward.
    Advance {
        timestamp: u64,
        #[arg(long)]
        state: PathBuf,
    },
    /// Deposit units that expire one TTL from now, bucketed.
    Mint {
        account: AccountId,
        resource: ResourceId,
        amount: Amount,
        #[arg(long)]
        state: PathBuf,
    },
    /// Consume units, earliest expiry first.
    Burn {
        account: AccountId,
        resource: ResourceId,
        amount: Amount,
        #[arg(long)]
        state: PathBuf,
    },
    /// Move units between accounts, keeping their expiries.
    Transfer {
        from: AccountId,
        to: AccountId,
        resource: ResourceId,
        amount: Amount,
        #[arg(long)]
        state: PathBuf,
    },
    /// Print the valid balance at the snapshot clock.
    Balance {
        account: AccountId,
        resource: ResourceId,
        #[arg(long)]
        state: PathBuf,
    },
    /// Print `amount expiresAt` per record.
    Records {
        account: AccountId,
        resource: ResourceId,
        #[arg(long)]
        state: PathBuf,
    },
    /// Drop expired records from one book.
    Prune {
        account: AccountId,
        resource: ResourceId,
        #[arg(long)]
        state: PathBuf,
    },
    /// Run an adversarial deposit workload and print CSV.
    SimulateDos {
        #[arg(long, default_value_t = 500)]
        deposits: u64,
        #[arg(long)]
        strategy: TimingStrategy,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        ttl: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Units per adversarial deposit.
        #[arg(long, default_value_t = 1)]
        amount: Amount,
    },
    /// Measure worst-case operation costs and print CSV.
    BenchCosts {
        #[arg(long, value_delimiter = ',', required = true)]
        k_values: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Domain(String),
    Usage(String),
    Corrupt(String),
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        Failure::Domain(e.to_string())
    }
}

impl From<SnapshotError> for Failure {
    fn from(e: SnapshotError) -> Self {
        match e {
            SnapshotError::Write { .. } => Failure::Domain(e.to_string()),
            _ => Failure::Corrupt(e.to_string()),
        }
    }
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Domain(m) => (EXIT_DOMAIN, m),
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Corrupt(m) => (EXIT_CORRUPT, m),
            };
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn mutate(state: &Path, f: impl FnOnce(&mut Ledger) -> Result<(), LedgerError>) -> Result<(), Failure> {
    let mut ledger: Ledger = snapshot::load(state)?;
    f(&mut ledger)?;
    snapshot::save(&ledger, state)?;
    Ok(())
}

fn io(e: std::io::Error) -> Failure {
    Failure::Domain(format!("write failed: {e}"))
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Init { state, force } => {
            if state.exists() && !force {
                return Err(Failure::Domain(format!("{} already exists (use --force)", state.display())));
            }
            snapshot::save(&Ledger::<Amount>::new(), &state)?;
        }
        Command::DefineResource { id, ttl, k, state } => mutate(&state, |l| l.define_resource(&id, ttl, k))?,
        Command::Advance { timestamp, state } => mutate(&state, |l| l.advance_clock(Timestamp(timestamp)))?,
        Command::Mint { account, resource, amount, state } => {
            mutate(&state, |l| l.mint(&account, &resource, amount).map(drop))?
        }
        Command::Burn { account, resource, amount, state } => {
            mutate(&state, |l| l.burn(&account, &resource, amount).map(drop))?
        }
        Command::Transfer { from, to, resource, amount, state } => {
            mutate(&state, |l| l.transfer(&from, &to, &resource, amount).map(drop))?
        }
        Command::Prune { account, resource, state } => mutate(&state, |l| l.prune(&account, &resource).map(drop))?,
        Command::Balance { account, resource, state } => {
            let ledger: Ledger = snapshot::load(&state)?;
            writeln!(out, "{}", ledger.balance_of(&account, &resource)?).map_err(io)?;
        }
        Command::Records { account, resource, state } => {
            let ledger: Ledger = snapshot::load(&state)?;
            for r in ledger.records_of(&account, &resource)? {
                writeln!(out, "{} {}", r.amount, r.expires_at).map_err(io)?;
            }
        }
        Command::SimulateDos { deposits, strategy, k, ttl, seed, amount } => {
            let config = ResourceConfig::new(ttl, k).map_err(|e| Failure::Usage(e.to_string()))?;
            if deposits == 0 || amount == 0 {
                return Err(Failure::Usage("--deposits and --amount must be at least 1".into()));
            }
            let plan = AttackPlan::new(deposits, amount, strategy);
            let cmp = compare_with_unbounded(&plan, &config, seed)?;
            writeln!(out, "{}", crate::adversary::UnboundedComparison::<Amount>::CSV_HEADER).map_err(io)?;
            for row in cmp.csv_rows(&plan, &config, seed) {
                writeln!(out, "{row}").map_err(io)?;
            }
            writeln!(err, "{}", cmp.summary()).map_err(io)?;
        }
        Command::BenchCosts { k_values, seed } => {
            if k_values.contains(&0) {
                return Err(Failure::Usage("k values must be at least 1".into()));
            }
            let rows = bench_costs(&k_values, seed)?;
            writeln!(out, "{}", CostRow::CSV_HEADER).map_err(io)?;
            for row in &rows {
                writeln!(out, "{}", row.to_csv()).map_err(io)?;
            }
            let mut distinct = k_values.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() >= 2 {
                for op in Operation::ALL {
                    let points: Vec<(u64, u64)> =
                        rows.iter().filter(|r| r.operation == op).map(|r| (r.k, r.cost.total())).collect();
                    writeln!(err, "{op}: log-log slope {:.3}", log_log_slope(&points)).map_err(io)?;
                }
            }
        }
    }
    Ok(())
}
