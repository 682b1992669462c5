//! Synthetic cohort streams and dynamics scoring.
//!
//! The generator produces a labeled multi-cohort event stream: every
//! cohort member authors one post per active period and receives a
//! Poisson-distributed number of endorsements (up-votes or payments,
//! an even coin flip each) from a shared pool of rater accounts. After
//! a cohort's active window closes its members go silent, so their
//! reputation is left to pure decay. Everything is drawn from a single
//! seeded stream, which makes the output a pure function of the config.
//!
//! The evaluator consumes reputation trajectories (the exported CSV)
//! plus a cohort labeling and reduces them to per-cohort summary
//! statistics: mean trajectory, peak, decay half-life, and pairwise
//! rank separation (AUC) at the final period.
//!
//! Draw order is part of the output format: periods outermost, then
//! cohorts in config order, then members by index, then one block of
//! draws per endorsement. Reordering any of these changes the stream
//! for a given seed even though the distribution is identical.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

use crate::decimal::Decimal;
use crate::graph::{EntityKind, NodeId, PeriodId, Polarity};
use crate::ontology::{Event, EventKind};
use crate::persist::DYNAMICS_HEADER;

/// Periods in generated streams are day-length; the engine must be run
/// with the matching period_seconds to reproduce the intended slicing.
pub const SIM_PERIOD_SECONDS: i64 = 86_400;

const SIM_CURRENCY: &str = "XYZ";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{origin}:{line}: {reason}")]
    BadRow {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("account {0} has no cohort label")]
    UnlabeledAccount(NodeId),
    #[error("dynamics input has gaps: {0}")]
    MissingPeriods(String),
    #[error("dynamics input has no data rows")]
    NoData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub name: String,
    pub size: usize,
    /// Expected endorsements per member per active period.
    pub inbound_rate: f64,
    pub payment_min: Decimal,
    pub payment_max: Decimal,
    /// Inclusive period window during which members post and receive
    /// endorsements.
    pub active_from: i64,
    pub active_to: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_periods: i64,
    pub rater_pool_size: usize,
    pub cohorts: Vec<CohortSpec>,
}

impl SimConfig {
    /// Parse the `key = value` config format. Cohort blocks open with a
    /// `[cohort]` line; keys before the first block are top-level. `#`
    /// lines are comments. Every cohort needs `name` and `size`; the
    /// payment range defaults to 1..100 and the active window to the
    /// whole run.
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let err = |line: usize, reason: String| SimError::Config { line, reason };

        let mut seed: Option<u64> = None;
        let mut n_periods: Option<i64> = None;
        let mut rater_pool_size: Option<usize> = None;

        struct Block {
            line: usize,
            keys: BTreeMap<String, (usize, String)>,
        }
        let mut blocks: Vec<Block> = Vec::new();
        let mut top_seen: BTreeSet<String> = BTreeSet::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "[cohort]" {
                blocks.push(Block {
                    line: line_no,
                    keys: BTreeMap::new(),
                });
                continue;
            }
            if line.starts_with('[') {
                return Err(err(line_no, format!("unknown section {line:?}")));
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(line_no, "expected `key = value`".to_string()));
            };
            let key = key.trim();
            let value = value.trim().to_string();
            if let Some(block) = blocks.last_mut() {
                if block
                    .keys
                    .insert(key.to_string(), (line_no, value))
                    .is_some()
                {
                    return Err(err(line_no, format!("duplicate key {key:?} in cohort")));
                }
                continue;
            }
            if !top_seen.insert(key.to_string()) {
                return Err(err(line_no, format!("duplicate key {key:?}")));
            }
            match key {
                "seed" => {
                    seed = Some(
                        value
                            .parse()
                            .map_err(|e| err(line_no, format!("seed: {e}")))?,
                    )
                }
                "n_periods" => {
                    n_periods = Some(
                        value
                            .parse()
                            .map_err(|e| err(line_no, format!("n_periods: {e}")))?,
                    )
                }
                "rater_pool_size" => {
                    rater_pool_size = Some(
                        value
                            .parse()
                            .map_err(|e| err(line_no, format!("rater_pool_size: {e}")))?,
                    )
                }
                _ => return Err(err(line_no, format!("unknown key {key:?}"))),
            }
        }

        let n_periods = n_periods
            .ok_or_else(|| SimError::InvalidConfig("n_periods is required".to_string()))?;

        let mut cohorts = Vec::with_capacity(blocks.len());
        for block in blocks {
            let take = |key: &str| block.keys.get(key).cloned();
            let (_, name) = take("name")
                .ok_or_else(|| err(block.line, "cohort is missing `name`".to_string()))?;
            let size: usize = {
                let (line_no, v) = take("size")
                    .ok_or_else(|| err(block.line, format!("cohort {name:?} is missing `size`")))?;
                v.parse().map_err(|e| err(line_no, format!("size: {e}")))?
            };
            let parse_or = |key: &str, default: &str| -> Result<(usize, String), SimError> {
                Ok(take(key).unwrap_or((block.line, default.to_string())))
            };
            let inbound_rate: f64 = {
                let (line_no, v) = parse_or("inbound_rate", "0")?;
                v.parse()
                    .map_err(|e| err(line_no, format!("inbound_rate: {e}")))?
            };
            let payment_min: Decimal = {
                let (line_no, v) = parse_or("payment_min", "1")?;
                v.parse()
                    .map_err(|e| err(line_no, format!("payment_min: {e}")))?
            };
            let payment_max: Decimal = {
                let (line_no, v) = parse_or("payment_max", "100")?;
                v.parse()
                    .map_err(|e| err(line_no, format!("payment_max: {e}")))?
            };
            let active_from: i64 = {
                let (line_no, v) = parse_or("active_from", "0")?;
                v.parse()
                    .map_err(|e| err(line_no, format!("active_from: {e}")))?
            };
            let active_to: i64 = {
                let (line_no, v) = parse_or("active_to", &(n_periods - 1).to_string())?;
                v.parse()
                    .map_err(|e| err(line_no, format!("active_to: {e}")))?
            };
            for key in block.keys.keys() {
                if !matches!(
                    key.as_str(),
                    "name"
                        | "size"
                        | "inbound_rate"
                        | "payment_min"
                        | "payment_max"
                        | "active_from"
                        | "active_to"
                ) {
                    return Err(err(
                        block.keys[key].0,
                        format!("unknown cohort key {key:?}"),
                    ));
                }
            }
            cohorts.push(CohortSpec {
                name,
                size,
                inbound_rate,
                payment_min,
                payment_max,
                active_from,
                active_to,
            });
        }

        let cfg = SimConfig {
            seed: seed.unwrap_or(0),
            n_periods,
            rater_pool_size: rater_pool_size.unwrap_or(0),
            cohorts,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let inv = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_periods < 1 {
            return inv(format!("n_periods {} must be >= 1", self.n_periods));
        }
        if self.rater_pool_size < 1 {
            return inv("rater_pool_size must be >= 1".to_string());
        }
        let mut names = BTreeSet::new();
        for c in &self.cohorts {
            if c.name.is_empty()
                || !c
                    .name
                    .bytes()
                    .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
            {
                // dots are reserved: they keep member ids (`<name>_<k>`)
                // disjoint from rater ids (`rater.<j>`)
                return inv(format!(
                    "cohort name {:?} must match [A-Za-z0-9_-]+",
                    c.name
                ));
            }
            if !names.insert(c.name.clone()) {
                return inv(format!("duplicate cohort name {:?}", c.name));
            }
            if c.size == 0 {
                return inv(format!("cohort {:?} size must be > 0", c.name));
            }
            if !(c.inbound_rate.is_finite() && c.inbound_rate >= 0.0 && c.inbound_rate <= 100_000.0)
            {
                return inv(format!(
                    "cohort {:?} inbound_rate {} must be in [0, 100000]",
                    c.name, c.inbound_rate
                ));
            }
            for (what, d) in [
                ("payment_min", c.payment_min),
                ("payment_max", c.payment_max),
            ] {
                if to_cents(&d).is_none() || d.is_negative() || d.is_zero() {
                    return inv(format!(
                        "cohort {:?} {what} {d} must be > 0 with at most 2 decimal places",
                        c.name
                    ));
                }
            }
            if c.payment_max < c.payment_min {
                return inv(format!(
                    "cohort {:?} payment range {}..{} is empty",
                    c.name, c.payment_min, c.payment_max
                ));
            }
            if !(0 <= c.active_from && c.active_from <= c.active_to && c.active_to < self.n_periods)
            {
                return inv(format!(
                    "cohort {:?} active window {}..{} outside 0..{}",
                    c.name,
                    c.active_from,
                    c.active_to,
                    self.n_periods - 1
                ));
            }
        }
        Ok(())
    }
}

/// Whole cents, for exact uniform sampling of payment amounts.
fn to_cents(d: &Decimal) -> Option<i64> {
    if d.scale() > 2 {
        return None;
    }
    let units = d.units().checked_mul(10i128.checked_pow(2 - d.scale())?)?;
    i64::try_from(units).ok().filter(|c| *c < 10i64.pow(15))
}

fn member_id(cohort: &str, k: usize) -> NodeId {
    NodeId::account(format!("{cohort}_{k}")).expect("validated cohort name")
}

/// Generate the event stream for a validated config: deterministic in
/// the seed, sorted by timestamp, every line parseable.
pub fn generate_events(cfg: &SimConfig) -> Result<Vec<Event>, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let raters: Vec<NodeId> = (0..cfg.rater_pool_size)
        .map(|j| NodeId::account(format!("rater.{j}")).expect("fixed charset"))
        .collect();
    let arrivals: Vec<Option<Poisson<f64>>> = cfg
        .cohorts
        .iter()
        .map(|c| (c.inbound_rate > 0.0).then(|| Poisson::new(c.inbound_rate).expect("validated")))
        .collect();

    let mut events = Vec::new();
    for p in 0..cfg.n_periods {
        let base = p * SIM_PERIOD_SECONDS;
        for (c_idx, cohort) in cfg.cohorts.iter().enumerate() {
            if !(cohort.active_from..=cohort.active_to).contains(&p) {
                continue;
            }
            let min_cents = to_cents(&cohort.payment_min).expect("validated");
            let max_cents = to_cents(&cohort.payment_max).expect("validated");
            for k in 0..cohort.size {
                let member = member_id(&cohort.name, k);
                let post = NodeId::new(EntityKind::Post, format!("{}_{k}.{p}", cohort.name))
                    .expect("validated cohort name");
                events.push(Event {
                    kind: EventKind::Post,
                    actor: member.clone(),
                    target: post.clone(),
                    parent: None,
                    timestamp: base + 60,
                    amount: None,
                    currency: None,
                    rating: None,
                    polarity: None,
                });
                let n = match &arrivals[c_idx] {
                    Some(dist) => dist.sample(&mut rng) as usize,
                    None => 0,
                };
                for _ in 0..n {
                    let rater = raters[rng.random_range(0..raters.len())].clone();
                    let ts = base + rng.random_range(3_600..SIM_PERIOD_SECONDS);
                    if rng.random_bool(0.5) {
                        let cents = rng.random_range(min_cents..=max_cents);
                        events.push(Event {
                            kind: EventKind::Payment,
                            actor: rater,
                            target: member.clone(),
                            parent: None,
                            timestamp: ts,
                            amount: Some(
                                Decimal::from_units(cents as i128, 2).expect("bounded cents"),
                            ),
                            currency: Some(SIM_CURRENCY.to_string()),
                            rating: None,
                            polarity: None,
                        });
                    } else {
                        events.push(Event {
                            kind: EventKind::Vote,
                            actor: rater,
                            target: post.clone(),
                            parent: None,
                            timestamp: ts,
                            amount: None,
                            currency: None,
                            rating: None,
                            polarity: Some(Polarity::Up),
                        });
                    }
                }
            }
        }
    }
    // stable: equal timestamps keep generation order
    events.sort_by_key(|e| e.timestamp);
    Ok(events)
}

/// Render events as JSONL in the ingest line format, one event per
/// line, fixed field order.
pub fn events_to_jsonl(events: &[Event]) -> String {
    let mut out = String::with_capacity(events.len() * 96);
    for ev in events {
        out.push_str(&event_to_json_line(ev));
        out.push('\n');
    }
    out
}

fn event_to_json_line(ev: &Event) -> String {
    let jstr = |s: &str| serde_json::to_string(s).expect("string to JSON");
    let mut line = format!(
        "{{\"kind\":{},\"actor\":{},\"target\":{}",
        jstr(ev.kind.name()),
        jstr(&ev.actor.to_string()),
        jstr(&ev.target.to_string())
    );
    if let Some(parent) = &ev.parent {
        line.push_str(&format!(",\"parent\":{}", jstr(&parent.to_string())));
    }
    line.push_str(&format!(",\"ts\":{}", ev.timestamp));
    if let Some(amount) = &ev.amount {
        line.push_str(&format!(",\"amount\":{}", jstr(&amount.to_string())));
    }
    if let Some(currency) = &ev.currency {
        line.push_str(&format!(",\"currency\":{}", jstr(currency)));
    }
    if let Some(rating) = &ev.rating {
        line.push_str(&format!(",\"rating\":{}", jstr(&rating.to_string())));
    }
    if let Some(polarity) = ev.polarity {
        line.push_str(&format!(",\"polarity\":{}", jstr(polarity.name())));
    }
    line.push('}');
    line
}

/// The account → cohort map implied by a config, as labels TSV.
pub fn cohort_labels(cfg: &SimConfig) -> String {
    let mut out = String::new();
    for c in &cfg.cohorts {
        for k in 0..c.size {
            out.push_str(&format!("{}\t{}\n", member_id(&c.name, k), c.name));
        }
    }
    out
}

/// Parse a labels file: `account<TAB>cohort` rows, blank lines and `#`
/// comments allowed.
pub fn parse_labels(text: &str, origin: &str) -> Result<BTreeMap<NodeId, String>, SimError> {
    let mut labels = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| SimError::BadRow {
            origin: origin.to_string(),
            line: line_no,
            reason,
        };
        let (id_str, cohort) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected `account<TAB>cohort`".to_string()))?;
        let id: NodeId = id_str.parse().map_err(|e| bad(format!("account: {e}")))?;
        if id.kind() != EntityKind::Account {
            return Err(bad(format!("{id} is not an account")));
        }
        if cohort.is_empty() {
            return Err(bad("empty cohort name".to_string()));
        }
        if labels.insert(id, cohort.to_string()).is_some() {
            return Err(bad(format!("duplicate label for {id_str}")));
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortDynamics {
    pub name: String,
    pub accounts: usize,
    /// Mean member reputation per period, index 0 = report `from`.
    pub means: Vec<f64>,
    /// First period attaining the maximum mean.
    pub peak_period: PeriodId,
    pub peak_mean: f64,
    /// Least k >= 1 with mean(peak + k) < peak_mean / 2, if any.
    pub half_life: Option<u64>,
}

/// Rank separation between two cohorts at the final period:
/// P(member of `higher` outranks member of `lower`), ties at 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub higher: String,
    pub lower: String,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsReport {
    pub from: PeriodId,
    pub to: PeriodId,
    /// Alphabetical by cohort name.
    pub cohorts: Vec<CohortDynamics>,
    /// One entry per cohort pair.
    pub separations: Vec<Separation>,
}

impl DynamicsReport {
    /// Flat `key: value` rendering, stable line order.
    pub fn render(&self) -> String {
        let mut out = format!("periods: {}..={}\n", self.from, self.to);
        for c in &self.cohorts {
            out.push_str(&format!("cohort.{}.accounts: {}\n", c.name, c.accounts));
            out.push_str(&format!(
                "cohort.{}.final_mean: {:.12}\n",
                c.name,
                c.means.last().copied().unwrap_or(f64::NAN)
            ));
            out.push_str(&format!(
                "cohort.{}.peak_period: {}\n",
                c.name, c.peak_period
            ));
            out.push_str(&format!(
                "cohort.{}.peak_mean: {:.12}\n",
                c.name, c.peak_mean
            ));
            match c.half_life {
                Some(k) => out.push_str(&format!("cohort.{}.half_life: {k}\n", c.name)),
                None => out.push_str(&format!("cohort.{}.half_life: none\n", c.name)),
            }
        }
        for s in &self.separations {
            out.push_str(&format!("auc.{}>{}: {:.12}\n", s.higher, s.lower, s.auc));
        }
        for c in &self.cohorts {
            for (i, m) in c.means.iter().enumerate() {
                let p = self.from.index() + i as i64;
                out.push_str(&format!("mean.{}.{}: {m:.12}\n", c.name, p));
            }
        }
        out
    }
}

/// Score exported reputation trajectories against a cohort labeling.
/// The CSV must cover a contiguous period range with the same account
/// set in every period, and every account must be labeled.
pub fn evaluate_dynamics(
    dynamics_csv: &str,
    labels: &BTreeMap<NodeId, String>,
) -> Result<DynamicsReport, SimError> {
    let origin = "dynamics";
    let bad = |line: usize, reason: String| SimError::BadRow {
        origin: origin.to_string(),
        line,
        reason,
    };

    let mut lines = dynamics_csv.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == DYNAMICS_HEADER => {}
        Some((_, first)) => return Err(bad(1, format!("bad header {first:?}"))),
        None => return Err(SimError::NoData),
    }

    let mut grid: BTreeMap<PeriodId, BTreeMap<NodeId, f64>> = BTreeMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(
                line_no,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let period: i64 = fields[0]
            .parse()
            .map_err(|e| bad(line_no, format!("period: {e}")))?;
        let account: NodeId = fields[1]
            .parse()
            .map_err(|e| bad(line_no, format!("account: {e}")))?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|e| bad(line_no, format!("reputation: {e}")))?;
        if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
            return Err(bad(line_no, format!("reputation {value} outside [0, 1]")));
        }
        if !labels.contains_key(&account) {
            return Err(SimError::UnlabeledAccount(account));
        }
        if grid
            .entry(PeriodId::new(period))
            .or_default()
            .insert(account, value)
            .is_some()
        {
            return Err(bad(line_no, "duplicate (period, account) row".to_string()));
        }
    }
    if grid.is_empty() {
        return Err(SimError::NoData);
    }

    let from = *grid.keys().next().expect("nonempty");
    let to = *grid.keys().next_back().expect("nonempty");
    let accounts: BTreeSet<NodeId> = grid.values().flat_map(|m| m.keys().cloned()).collect();
    for idx in from.index()..=to.index() {
        let p = PeriodId::new(idx);
        let Some(row) = grid.get(&p) else {
            return Err(SimError::MissingPeriods(format!("period {p} absent")));
        };
        if row.len() != accounts.len() {
            let missing = accounts
                .iter()
                .find(|a| !row.contains_key(*a))
                .expect("row is a subset of the union");
            return Err(SimError::MissingPeriods(format!(
                "period {p} is missing {missing}"
            )));
        }
    }

    let mut members: BTreeMap<&str, Vec<&NodeId>> = BTreeMap::new();
    for a in &accounts {
        members.entry(labels[a].as_str()).or_default().push(a);
    }

    let n_periods = (to.index() - from.index() + 1) as usize;
    let mut cohorts = Vec::with_capacity(members.len());
    for (name, accs) in &members {
        let mut means = Vec::with_capacity(n_periods);
        for row in grid.values() {
            let sum: f64 = accs.iter().map(|a| row[*a]).sum();
            means.push(sum / accs.len() as f64);
        }
        let (peak_idx, peak_mean) =
            means
                .iter()
                .copied()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |best, (i, m)| {
                    if m > best.1 {
                        (i, m)
                    } else {
                        best
                    }
                });
        let half_life = means[peak_idx + 1..]
            .iter()
            .position(|m| *m < peak_mean / 2.0)
            .map(|off| off as u64 + 1);
        cohorts.push(CohortDynamics {
            name: name.to_string(),
            accounts: accs.len(),
            means,
            peak_period: PeriodId::new(from.index() + peak_idx as i64),
            peak_mean,
            half_life,
        });
    }

    let final_row = &grid[&to];
    let mut separations = Vec::new();
    for i in 0..cohorts.len() {
        for j in i + 1..cohorts.len() {
            let (a, b) = (&cohorts[i], &cohorts[j]);
            // the cohort with the greater final mean is reported as
            // `higher`; the statistic for the other direction is 1 - auc
            let a_final = *a.means.last().expect("nonempty");
            let b_final = *b.means.last().expect("nonempty");
            let (hi, lo) = if b_final > a_final { (b, a) } else { (a, b) };
            let mut wins = 0.0f64;
            for h in &members[hi.name.as_str()] {
                for l in &members[lo.name.as_str()] {
                    let (vh, vl) = (final_row[*h], final_row[*l]);
                    if vh > vl {
                        wins += 1.0;
                    } else if vh == vl {
                        wins += 0.5;
                    }
                }
            }
            separations.push(Separation {
                higher: hi.name.clone(),
                lower: lo.name.clone(),
                auc: wins / (hi.accounts * lo.accounts) as f64,
            });
        }
    }

    Ok(DynamicsReport {
        from,
        to,
        cohorts,
        separations,
    })
}
