//! Batch operator interface: ingest events, advance reputation state,
//! query and export it, and run the synthetic-cohort harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.
//! Mutating commands (ingest, update) take a lock file in the data root
//! so two writers cannot interleave period files.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};

use reprank_core::engine::{update_range, EngineParams, ReputationState};
use reprank_core::graph::{EntityKind, GraphStore, NodeId, PeriodId};
use reprank_core::ontology::{ingest_events, read_events};
use reprank_core::persist::{export_dynamics, EvidenceStore, FsStore, StateStore};
use reprank_core::sim::{
    cohort_labels, evaluate_dynamics, events_to_jsonl, generate_events, parse_labels, SimConfig,
};

#[derive(Parser)]
#[command(
    name = "reprank",
    version,
    about = "Incremental reputation over time-sliced interaction graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse an event file, bucket by period, persist sealed evidence.
    Ingest {
        /// Data root directory (created if absent).
        #[arg(long)]
        data: PathBuf,
        /// Events file, one JSON object per line.
        #[arg(long)]
        input: PathBuf,
        /// Engine params file; defaults apply when omitted.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Advance reputation states over a period range.
    Update {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        params: PathBuf,
        /// First period to update; default: first un-updated period.
        #[arg(long)]
        from: Option<i64>,
        /// Last period to update; default: last ingested period.
        #[arg(long)]
        to: Option<i64>,
    },
    /// Print one account's reputation at a period.
    Query {
        #[arg(long)]
        data: PathBuf,
        /// Account id, e.g. acct:alice.
        #[arg(long)]
        account: String,
        #[arg(long)]
        period: i64,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Write per-period reputation trajectories as CSV.
    Export {
        #[arg(long)]
        data: PathBuf,
        /// File listing one account id per line.
        #[arg(long)]
        accounts: PathBuf,
        #[arg(long)]
        from: i64,
        #[arg(long)]
        to: i64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Generate a synthetic labeled event stream.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the account -> cohort labels file.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Score reputation trajectories against cohort labels.
    Eval {
        #[arg(long)]
        dynamics: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ClapErrorKind::DisplayHelp
                    | ClapErrorKind::DisplayVersion
                    | ClapErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            data,
            input,
            params,
        } => {
            let params = load_params(params.as_deref())?;
            let _lock = LockGuard::acquire(&data)?;
            cmd_ingest(&data, &input, &params)
        }
        Command::Update {
            data,
            params,
            from,
            to,
        } => {
            let params = load_params(Some(&params))?;
            let _lock = LockGuard::acquire(&data)?;
            cmd_update(&data, &params, from, to)
        }
        Command::Query {
            data,
            account,
            period,
            params,
        } => {
            let params = load_params(params.as_deref())?;
            cmd_query(&data, &account, period, &params)
        }
        Command::Export {
            data,
            accounts,
            from,
            to,
            out,
            params,
        } => {
            let params = load_params(params.as_deref())?;
            cmd_export(&data, &accounts, from, to, &out, &params)
        }
        Command::Simulate {
            config,
            out,
            labels_out,
        } => cmd_simulate(&config, &out, labels_out.as_deref()),
        Command::Eval { dynamics, labels } => cmd_eval(&dynamics, &labels),
    }
}

fn load_params(path: Option<&Path>) -> Result<EngineParams> {
    match path {
        None => Ok(EngineParams::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading params file {}", p.display()))?;
            EngineParams::parse(&text).with_context(|| format!("params file {}", p.display()))
        }
    }
}

/// Exclusive writer lock on a data root, released on drop.
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(data: &Path) -> Result<LockGuard> {
        fs::create_dir_all(data)
            .with_context(|| format!("creating data root {}", data.display()))?;
        let path = data.join(".lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == ErrorKind::AlreadyExists => Err(anyhow!(
                "data root {} is locked by another command; remove {} if it is stale",
                data.display(),
                path.display()
            )),
            Err(e) => Err(anyhow!(e).context(format!("creating lock file {}", path.display()))),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn cmd_ingest(data: &Path, input: &Path, params: &EngineParams) -> Result<()> {
    let text = fs::read_to_string(input)
        .with_context(|| format!("reading events file {}", input.display()))?;
    let events =
        read_events(&text, params).with_context(|| format!("events file {}", input.display()))?;
    let mut store = FsStore::open(data, params.period_seconds)?;
    let summaries = ingest_events(&events, params, &mut store)?;
    for s in &summaries {
        println!(
            "period {}: events {}, edges {}, records {}, ratings {}, dangling {}, self_pairs {}, unscored {}",
            s.period, s.events, s.edges, s.records, s.ratings, s.dangling, s.self_pairs, s.unscored
        );
    }
    println!(
        "ingested {} events across {} periods",
        events.len(),
        summaries.len()
    );
    Ok(())
}

fn cmd_update(
    data: &Path,
    params: &EngineParams,
    from: Option<i64>,
    to: Option<i64>,
) -> Result<()> {
    let mut store = FsStore::open(data, params.period_seconds)?;
    let evidence_periods = store.evidence_periods()?;
    let state_periods = store.state_periods()?;

    let from = match from {
        Some(i) => PeriodId::new(i),
        None => match state_periods.last() {
            Some(last) => last.next(),
            None => match evidence_periods.first() {
                Some(first) => *first,
                None => {
                    println!("nothing to update");
                    return Ok(());
                }
            },
        },
    };
    let to = match to {
        Some(i) => PeriodId::new(i),
        None => match evidence_periods.last() {
            Some(last) => *last,
            None => {
                println!("nothing to update");
                return Ok(());
            }
        },
    };
    if from > to {
        println!("nothing to update");
        return Ok(());
    }

    let prev = if store.has_state(from.prev())? {
        store.load_state(from.prev())?
    } else if evidence_periods.first() == Some(&from) {
        ReputationState::genesis(from.prev())
    } else {
        bail!(
            "no state for period {}; update earlier periods first or start from period {}",
            from.prev(),
            evidence_periods
                .first()
                .map(|p| p.to_string())
                .unwrap_or_else(|| "<none>".to_string())
        );
    };

    let evidence = FsStore::open(data, params.period_seconds)?;
    let mut graph = GraphStore::new(params.period_seconds);
    update_range(
        &mut graph,
        &evidence,
        &mut store,
        from,
        to,
        prev,
        params,
        |s| println!("period {}: {} accounts", s.period(), s.len()),
    )?;
    println!(
        "updated periods {from}..={to}; resident subgraph high water {}",
        graph.residency_high_water()
    );
    Ok(())
}

fn cmd_query(data: &Path, account: &str, period: i64, params: &EngineParams) -> Result<()> {
    let id: NodeId = account
        .parse()
        .with_context(|| format!("account id {account:?}"))?;
    if id.kind() != EntityKind::Account {
        bail!("{id} is not an account id");
    }
    let store = FsStore::open(data, params.period_seconds)?;
    let period = PeriodId::new(period);
    let value = if store.has_state(period)? {
        let state = store.load_state(period)?;
        state.get(&id).unwrap_or(params.default_reputation)
    } else {
        params.default_reputation
    };
    println!("{value}");
    Ok(())
}

fn cmd_export(
    data: &Path,
    accounts_file: &Path,
    from: i64,
    to: i64,
    out: &Path,
    params: &EngineParams,
) -> Result<()> {
    let text = fs::read_to_string(accounts_file)
        .with_context(|| format!("reading accounts file {}", accounts_file.display()))?;
    let mut accounts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let id: NodeId = line
            .parse()
            .with_context(|| format!("{}:{}", accounts_file.display(), i + 1))?;
        if id.kind() != EntityKind::Account {
            bail!(
                "{}:{}: {} is not an account id",
                accounts_file.display(),
                i + 1,
                id
            );
        }
        accounts.push(id);
    }
    let store = FsStore::open(data, params.period_seconds)?;
    let csv = export_dynamics(
        &store,
        &accounts,
        PeriodId::new(from),
        PeriodId::new(to),
        params.default_reputation,
    )?;
    fs::write(out, &csv).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "exported {} accounts over periods {from}..={to} to {}",
        accounts.len(),
        out.display()
    );
    Ok(())
}

fn cmd_simulate(config: &Path, out: &Path, labels_out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let cfg = SimConfig::parse(&text).with_context(|| format!("config {}", config.display()))?;
    let events = generate_events(&cfg)?;
    fs::write(out, events_to_jsonl(&events))
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = labels_out {
        fs::write(path, cohort_labels(&cfg))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "simulated {} events over {} periods to {}",
        events.len(),
        cfg.n_periods,
        out.display()
    );
    Ok(())
}

fn cmd_eval(dynamics: &Path, labels: &Path) -> Result<()> {
    let labels_text = fs::read_to_string(labels)
        .with_context(|| format!("reading labels {}", labels.display()))?;
    let labels = parse_labels(&labels_text, &labels.display().to_string())?;
    let csv = fs::read_to_string(dynamics)
        .with_context(|| format!("reading dynamics {}", dynamics.display()))?;
    let report = evaluate_dynamics(&csv, &labels)?;
    print!("{}", report.render());
    Ok(())
}
