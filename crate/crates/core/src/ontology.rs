//! Event ingestion and rating derivation.
//!
//! External interactions arrive as one JSON object per line. Each line
//! becomes a validated [`Event`], each event becomes one or two typed
//! edges in the period's evidence subgraph, and sealed evidence is
//! projected into direct rater→ratee [`DerivedRating`]s for the engine.
//!
//! Three projection rules produce rating mass:
//! votes on a post rate the post's authors, comment authorship rates the
//! authors of the post the comment relates to, and payments rate the
//! receiving account (weighted by the logarithm of the amount). All other
//! relations are stored for audit but contribute nothing.
//!
//! Derivation is a pure function of the evidence subgraph, so ratings can
//! be re-derived from persisted evidence files alone.

use std::collections::BTreeMap;

use crate::decimal::Decimal;
use crate::engine::{financial_weight, EngineParams};
use crate::graph::{
    EntityKind, GraphError, NodeId, PeriodId, Polarity, RelationKind, TemporalSubgraph,
    TransactionRecord,
};
use crate::persist::{EvidenceStore, PersistError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("missing required field {0:?}")]
    MissingField(&'static str),
    #[error("field {0:?}: {1}")]
    BadField(&'static str, String),
    #[error("unknown event kind {0:?}")]
    UnknownKind(String),
    #[error("unknown currency {0:?}")]
    UnknownCurrency(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Vote,
    Comment,
    Post,
    Payment,
    Follow,
    Create,
    Call,
    Mention,
    Provide,
    Relate,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::Vote,
        EventKind::Comment,
        EventKind::Post,
        EventKind::Payment,
        EventKind::Follow,
        EventKind::Create,
        EventKind::Call,
        EventKind::Mention,
        EventKind::Provide,
        EventKind::Relate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Vote => "vote",
            EventKind::Comment => "comment",
            EventKind::Post => "post",
            EventKind::Payment => "payment",
            EventKind::Follow => "follow",
            EventKind::Create => "create",
            EventKind::Call => "call",
            EventKind::Mention => "mention",
            EventKind::Provide => "provide",
            EventKind::Relate => "relate",
        }
    }

    pub fn from_name(s: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// One validated interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub actor: NodeId,
    pub target: NodeId,
    pub parent: Option<NodeId>,
    pub timestamp: i64,
    pub amount: Option<Decimal>,
    pub currency: Option<String>,
    pub rating: Option<Decimal>,
    pub polarity: Option<Polarity>,
}

impl Event {
    /// Kind-specific shape check: endpoint kinds, required fields, and
    /// rejection of fields foreign to the kind.
    pub fn validate(&self, params: &EngineParams) -> Result<(), EventError> {
        use EntityKind::*;
        let kind = self.kind;
        let fail = |msg: String| Err(EventError::Invalid(msg));

        let actor_ok: &[EntityKind] = match kind {
            EventKind::Relate => &[Post, Product],
            _ => &[Account],
        };
        let target_ok: &[EntityKind] = match kind {
            EventKind::Vote | EventKind::Comment | EventKind::Post => &[Post],
            EventKind::Payment => &[Account, SmartContract],
            EventKind::Follow | EventKind::Mention => &[Account],
            EventKind::Create | EventKind::Call => &[SmartContract],
            EventKind::Provide => &[Product],
            EventKind::Relate => &[Post, Tag],
        };
        if !actor_ok.contains(&self.actor.kind()) {
            return fail(format!(
                "{} actor must be one of {actor_ok:?}, got {}",
                kind.name(),
                self.actor
            ));
        }
        if !target_ok.contains(&self.target.kind()) {
            return fail(format!(
                "{} target must be one of {target_ok:?}, got {}",
                kind.name(),
                self.target
            ));
        }

        if kind == EventKind::Payment {
            if self.amount.is_none() {
                return Err(EventError::MissingField("amount"));
            }
            if self.currency.is_none() {
                return Err(EventError::MissingField("currency"));
            }
        } else {
            if self.amount.is_some() {
                return fail(format!("{} carries no amount", kind.name()));
            }
            if self.currency.is_some() {
                return fail(format!("{} carries no currency", kind.name()));
            }
            if self.rating.is_some() {
                return fail(format!("{} carries no rating", kind.name()));
            }
        }
        if kind == EventKind::Vote {
            if self.polarity.is_none() {
                return Err(EventError::MissingField("polarity"));
            }
        } else if self.polarity.is_some() {
            return fail(format!("{} carries no polarity", kind.name()));
        }
        match (kind, &self.parent) {
            (EventKind::Comment, Some(p)) if p.kind() != Post => {
                return fail(format!("comment parent must be a post, got {p}"));
            }
            (EventKind::Comment, _) => {}
            (_, Some(_)) => return fail(format!("{} carries no parent", kind.name())),
            (_, None) => {}
        }

        if let Some(a) = &self.amount {
            if a.is_negative() {
                return Err(EventError::BadField("amount", format!("{a} is negative")));
            }
        }
        if let Some(r) = &self.rating {
            if r.is_negative() || *r > Decimal::from_units(1, 0).unwrap() {
                return Err(EventError::BadField(
                    "rating",
                    format!("{r} outside [0, 1]"),
                ));
            }
        }
        if let Some(c) = &self.currency {
            if !params.currency_table.contains_key(c) {
                return Err(EventError::UnknownCurrency(c.clone()));
            }
        }
        Ok(())
    }
}

fn field_str<'a>(
    obj: &'a serde_json::Map<String, serde_json::Value>,
    name: &'static str,
) -> Result<Option<&'a str>, EventError> {
    match obj.get(name) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(EventError::BadField(
            name,
            format!("expected a string, got {other}"),
        )),
    }
}

fn field_node(
    obj: &serde_json::Map<String, serde_json::Value>,
    name: &'static str,
) -> Result<Option<NodeId>, EventError> {
    match field_str(obj, name)? {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|e: GraphError| EventError::BadField(name, e.to_string())),
    }
}

fn field_decimal(
    obj: &serde_json::Map<String, serde_json::Value>,
    name: &'static str,
) -> Result<Option<Decimal>, EventError> {
    match obj.get(name) {
        None | Some(serde_json::Value::Null) => Ok(None),
        // decimal strings only: JSON numbers would go through f64
        Some(serde_json::Value::String(s)) => s
            .parse()
            .map(Some)
            .map_err(|e| EventError::BadField(name, format!("{e}"))),
        Some(other) => Err(EventError::BadField(
            name,
            format!("expected a decimal string, got {other}"),
        )),
    }
}

/// Parse and validate one event line. Unknown JSON fields are ignored.
pub fn parse_event_line(line: &str, params: &EngineParams) -> Result<Event, EventError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| EventError::Json(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| EventError::Json("line is not a JSON object".to_string()))?;

    let kind_name = field_str(obj, "kind")?.ok_or(EventError::MissingField("kind"))?;
    let kind = EventKind::from_name(kind_name)
        .ok_or_else(|| EventError::UnknownKind(kind_name.to_string()))?;
    let actor = field_node(obj, "actor")?.ok_or(EventError::MissingField("actor"))?;
    let target = field_node(obj, "target")?.ok_or(EventError::MissingField("target"))?;
    let timestamp = match obj.get("ts") {
        None | Some(serde_json::Value::Null) => return Err(EventError::MissingField("ts")),
        Some(serde_json::Value::Number(n)) => n
            .as_i64()
            .ok_or_else(|| EventError::BadField("ts", format!("{n} is not an integer")))?,
        Some(other) => {
            return Err(EventError::BadField(
                "ts",
                format!("expected an integer, got {other}"),
            ))
        }
    };
    let polarity = match field_str(obj, "polarity")? {
        None => None,
        Some(s) => Some(
            Polarity::from_name(s)
                .ok_or_else(|| EventError::BadField("polarity", format!("unknown {s:?}")))?,
        ),
    };

    let event = Event {
        kind,
        actor,
        target,
        parent: field_node(obj, "parent")?,
        timestamp,
        amount: field_decimal(obj, "amount")?,
        currency: field_str(obj, "currency")?.map(str::to_string),
        rating: field_decimal(obj, "rating")?,
        polarity,
    };
    event.validate(params)?;
    Ok(event)
}

/// Project an event onto its evidence edges. Total over all kinds; every
/// record carries the event's timestamp.
pub fn event_to_edges(ev: &Event) -> Vec<(NodeId, RelationKind, NodeId, TransactionRecord)> {
    let rec = TransactionRecord::at(ev.timestamp);
    match ev.kind {
        EventKind::Vote => vec![(
            ev.actor.clone(),
            RelationKind::Votes,
            ev.target.clone(),
            TransactionRecord {
                polarity: ev.polarity,
                ..rec
            },
        )],
        EventKind::Post => vec![(
            ev.actor.clone(),
            RelationKind::Authors,
            ev.target.clone(),
            rec,
        )],
        EventKind::Comment => {
            let mut out = vec![(
                ev.actor.clone(),
                RelationKind::Authors,
                ev.target.clone(),
                rec.clone(),
            )];
            if let Some(parent) = &ev.parent {
                out.push((
                    ev.target.clone(),
                    RelationKind::Relates,
                    parent.clone(),
                    rec,
                ));
            }
            out
        }
        EventKind::Payment => vec![(
            ev.actor.clone(),
            RelationKind::Pays,
            ev.target.clone(),
            TransactionRecord {
                amount: ev.amount,
                currency: ev.currency.clone(),
                rating: ev.rating,
                ..rec
            },
        )],
        EventKind::Follow => vec![(
            ev.actor.clone(),
            RelationKind::Follows,
            ev.target.clone(),
            rec,
        )],
        EventKind::Create => vec![(
            ev.actor.clone(),
            RelationKind::Creates,
            ev.target.clone(),
            rec,
        )],
        EventKind::Call => vec![(
            ev.actor.clone(),
            RelationKind::Calls,
            ev.target.clone(),
            rec,
        )],
        EventKind::Mention => vec![(
            ev.actor.clone(),
            RelationKind::Mentions,
            ev.target.clone(),
            rec,
        )],
        EventKind::Provide => vec![(
            ev.actor.clone(),
            RelationKind::Provides,
            ev.target.clone(),
            rec,
        )],
        EventKind::Relate => vec![(
            ev.actor.clone(),
            RelationKind::Relates,
            ev.target.clone(),
            rec,
        )],
    }
}

/// Where a derived rating came from. Declaration order is the canonical
/// tie-break in the rating sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    Vote,
    Comment,
    Payment,
}

impl SourceKind {
    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Vote => "vote",
            SourceKind::Comment => "comment",
            SourceKind::Payment => "payment",
        }
    }
}

/// Direct rater→ratee rating with quality in [0,1] and weight ≥ 0.
/// Self-ratings are never produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRating {
    pub rater: NodeId,
    pub ratee: NodeId,
    pub quality: f64,
    pub weight: f64,
    pub source: SourceKind,
}

/// Tallies of evidence that produced no rating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DerivationStats {
    /// Votes or comment links whose join found no authorship.
    pub dangling: usize,
    /// Rater-equals-ratee pairs dropped.
    pub self_pairs: usize,
    /// Records skipped for missing/unusable scoring inputs
    /// (vote without polarity, payment in an unknown currency).
    pub unscored: usize,
}

/// Project sealed evidence into canonically ordered ratings.
///
/// R1: each vote record on a post rates each of the post's authors with
/// q_vote_up/q_vote_down, weight 1. R2: each authorship record of a post
/// `c` rates, for every post `p` with Relates(c→p), each author of `p`
/// with q_comment, weight 1. R3: each Pays record into an account rates
/// it with the record's explicit rating (else q_payment) and weight
/// log(1 + converted amount).
pub fn derive_ratings(
    evidence: &TemporalSubgraph,
    params: &EngineParams,
) -> (Vec<DerivedRating>, DerivationStats) {
    debug_assert!(evidence.is_sealed(), "derivation runs on sealed evidence");
    let mut out = Vec::new();
    let mut stats = DerivationStats::default();

    let mut emit = |rater: &NodeId, ratee: &NodeId, quality: f64, weight: f64, source| {
        if rater == ratee {
            stats.self_pairs += 1;
        } else {
            out.push(DerivedRating {
                rater: rater.clone(),
                ratee: ratee.clone(),
                quality,
                weight,
                source,
            });
        }
    };

    for (key, value) in evidence.edges() {
        match key.rel {
            RelationKind::Votes if key.dst.kind() == EntityKind::Post => {
                let authors: Vec<&NodeId> = evidence
                    .sources_into(&key.dst, RelationKind::Authors)
                    .into_iter()
                    .filter(|n| n.kind() == EntityKind::Account)
                    .collect();
                for rec in value.records() {
                    let Some(pol) = rec.polarity else {
                        stats.unscored += 1;
                        continue;
                    };
                    if authors.is_empty() {
                        stats.dangling += 1;
                        continue;
                    }
                    let q = match pol {
                        Polarity::Up => params.q_vote_up,
                        Polarity::Down => params.q_vote_down,
                    };
                    for author in &authors {
                        emit(&key.src, author, q, 1.0, SourceKind::Vote);
                    }
                }
            }
            RelationKind::Authors if key.dst.kind() == EntityKind::Post => {
                // key.dst is a post; if it relates to parent posts, its
                // authorship records are comment signals toward the
                // parents' authors.
                let parents: Vec<&NodeId> = evidence
                    .targets_from(&key.dst, RelationKind::Relates)
                    .into_iter()
                    .filter(|n| n.kind() == EntityKind::Post)
                    .collect();
                for parent in parents {
                    let authors: Vec<&NodeId> = evidence
                        .sources_into(parent, RelationKind::Authors)
                        .into_iter()
                        .filter(|n| n.kind() == EntityKind::Account)
                        .collect();
                    for _rec in value.records() {
                        if authors.is_empty() {
                            stats.dangling += 1;
                            continue;
                        }
                        for author in &authors {
                            emit(&key.src, author, params.q_comment, 1.0, SourceKind::Comment);
                        }
                    }
                }
            }
            RelationKind::Pays if key.dst.kind() == EntityKind::Account => {
                for rec in value.records() {
                    let multiplier = match &rec.currency {
                        Some(code) => match params.currency_table.get(code) {
                            Some(m) => m.to_f64(),
                            None => {
                                stats.unscored += 1;
                                continue;
                            }
                        },
                        // no currency on record: amount already in base units
                        None => 1.0,
                    };
                    let amount = rec.amount.map(|a| a.to_f64()).unwrap_or(0.0) * multiplier;
                    // records are validated non-negative and multipliers
                    // positive, so the weight cannot fail
                    let weight =
                        financial_weight(amount, params).expect("validated amount is non-negative");
                    let quality = match &rec.rating {
                        Some(r) => r.to_f64(),
                        None => params.q_payment,
                    };
                    emit(&key.src, &key.dst, quality, weight, SourceKind::Payment);
                }
            }
            _ => {}
        }
    }

    out.sort_by(|a, b| (&a.rater, &a.ratee, a.source).cmp(&(&b.rater, &b.ratee, b.source)));
    (out, stats)
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: EventError },
    #[error("period {0} already has persisted evidence")]
    PeriodAlreadyIngested(PeriodId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Storage(#[from] PersistError),
}

/// Parse a whole event file. Blank lines and `#` comments are skipped;
/// the first bad line aborts with its 1-based line number.
pub fn read_events(text: &str, params: &EngineParams) -> Result<Vec<Event>, IngestError> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ev = parse_event_line(trimmed, params).map_err(|source| IngestError::Parse {
            line: i + 1,
            source,
        })?;
        events.push(ev);
    }
    Ok(events)
}

/// Per-period outcome of an ingest batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodIngestSummary {
    pub period: PeriodId,
    pub events: usize,
    pub edges: usize,
    pub records: usize,
    pub ratings: usize,
    pub dangling: usize,
    pub self_pairs: usize,
    pub unscored: usize,
}

/// Bucket events by period, build one sealed evidence subgraph per
/// period in the batch's [min, max] span (periods without events become
/// empty subgraphs, so the span has no holes), persist each, and report
/// per-period diagnostics.
///
/// Only one subgraph is alive at a time. Periods that already have
/// persisted evidence are refused before anything is written.
pub fn ingest_events<E: EvidenceStore>(
    events: &[Event],
    params: &EngineParams,
    backend: &mut E,
) -> Result<Vec<PeriodIngestSummary>, IngestError> {
    if events.is_empty() {
        return Ok(Vec::new());
    }
    let mut buckets: BTreeMap<PeriodId, Vec<&Event>> = BTreeMap::new();
    for ev in events {
        let p = PeriodId::from_timestamp(ev.timestamp, params.period_seconds);
        buckets.entry(p).or_default().push(ev);
    }
    let min = *buckets.keys().next().unwrap();
    let max = *buckets.keys().next_back().unwrap();
    for idx in min.index()..=max.index() {
        let p = PeriodId::new(idx);
        if backend.has_subgraph(p)? {
            return Err(IngestError::PeriodAlreadyIngested(p));
        }
    }

    let mut out = Vec::new();
    for idx in min.index()..=max.index() {
        let p = PeriodId::new(idx);
        let mut g = TemporalSubgraph::new(p, params.period_seconds);
        let evs = buckets.get(&p).map(Vec::as_slice).unwrap_or(&[]);
        for ev in evs {
            for (src, rel, dst, rec) in event_to_edges(ev) {
                g.add_record(src, rel, dst, rec)?;
            }
        }
        g.seal();
        let (ratings, stats) = derive_ratings(&g, params);
        backend.save_subgraph(&g)?;
        out.push(PeriodIngestSummary {
            period: p,
            events: evs.len(),
            edges: g.edge_count(),
            records: g.record_count(),
            ratings: ratings.len(),
            dangling: stats.dangling,
            self_pairs: stats.self_pairs,
            unscored: stats.unscored,
        });
    }
    Ok(out)
}
