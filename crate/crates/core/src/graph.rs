//! Time-sliced interaction graph.
//!
//! All evidence lives in per-period subgraphs keyed by [`PeriodId`]. A
//! subgraph is mutable until sealed, immutable after. The [`GraphStore`]
//! tracks which periods are resident in memory, which are persisted, and
//! a high-water mark of simultaneous residency so callers can verify the
//! bounded-memory contract (one evidence subgraph plus two state maps
//! during an update).
//!
//! Edges are multi-edges: one `(src, rel, dst)` key holds every
//! transaction record observed in the period, ordered by timestamp.
//! Canonical edge order is `(src, rel, dst)` with node ids compared by
//! their string id first, then entity kind; relations compare in
//! declaration order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::decimal::Decimal;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("invalid node id {0:?}")]
    InvalidNodeId(String),
    #[error("period {0} is already resident")]
    AlreadyResident(PeriodId),
    #[error("unknown period {0}")]
    UnknownPeriod(PeriodId),
    #[error("period {0} is not resident")]
    PeriodNotResident(PeriodId),
    #[error("period {0} is sealed")]
    SealedPeriod(PeriodId),
    #[error("period {0} is not sealed")]
    NotSealed(PeriodId),
    #[error("timestamp {ts} falls outside period {period}")]
    PeriodMismatch { period: PeriodId, ts: i64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("period {0} is not persisted; evicting would lose data")]
    NotPersisted(PeriodId),
    #[error("amount aggregation overflow")]
    Overflow,
}

/// Entity kinds. Declaration order is the canonical tie-break order for
/// node ids that share a string id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    Account,
    SmartContract,
    Product,
    Post,
    Word,
    Tag,
}

impl EntityKind {
    pub const ALL: [EntityKind; 6] = [
        EntityKind::Account,
        EntityKind::SmartContract,
        EntityKind::Product,
        EntityKind::Post,
        EntityKind::Word,
        EntityKind::Tag,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            EntityKind::Account => "acct",
            EntityKind::SmartContract => "sc",
            EntityKind::Product => "prod",
            EntityKind::Post => "post",
            EntityKind::Word => "word",
            EntityKind::Tag => "tag",
        }
    }

    pub fn from_prefix(s: &str) -> Option<EntityKind> {
        EntityKind::ALL.into_iter().find(|k| k.prefix() == s)
    }
}

/// Typed node identifier, rendered as `prefix:id`.
///
/// Ids are restricted to printable ASCII without tab, comma or '#', so a
/// node id can never break the TSV/CSV framing of the files it appears in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeId {
    kind: EntityKind,
    id: String,
}

impl NodeId {
    pub fn new(kind: EntityKind, id: impl Into<String>) -> Result<Self, GraphError> {
        let id = id.into();
        if id.is_empty()
            || !id
                .bytes()
                .all(|b| b.is_ascii_graphic() && b != b'\t' && b != b',' && b != b'#')
        {
            return Err(GraphError::InvalidNodeId(format!("{}:{id}", kind.prefix())));
        }
        Ok(NodeId { kind, id })
    }

    pub fn account(id: impl Into<String>) -> Result<Self, GraphError> {
        NodeId::new(EntityKind::Account, id)
    }

    pub fn kind(&self) -> EntityKind {
        self.kind
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

impl FromStr for NodeId {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        let (prefix, id) = s
            .split_once(':')
            .ok_or_else(|| GraphError::InvalidNodeId(s.to_string()))?;
        let kind = EntityKind::from_prefix(prefix)
            .ok_or_else(|| GraphError::InvalidNodeId(s.to_string()))?;
        NodeId::new(kind, id)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.prefix(), self.id)
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NodeId {
    // id first so accounts sort by name in files; kind only breaks ties.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.id.cmp(&other.id).then(self.kind.cmp(&other.kind))
    }
}

/// Relation kinds. Declaration order is the canonical sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    Votes,
    Authors,
    Mentions,
    Uses,
    Relates,
    Provides,
    Follows,
    Creates,
    Calls,
    Pays,
}

impl RelationKind {
    pub const ALL: [RelationKind; 10] = [
        RelationKind::Votes,
        RelationKind::Authors,
        RelationKind::Mentions,
        RelationKind::Uses,
        RelationKind::Relates,
        RelationKind::Provides,
        RelationKind::Follows,
        RelationKind::Creates,
        RelationKind::Calls,
        RelationKind::Pays,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Votes => "votes",
            RelationKind::Authors => "authors",
            RelationKind::Mentions => "mentions",
            RelationKind::Uses => "uses",
            RelationKind::Relates => "relates",
            RelationKind::Provides => "provides",
            RelationKind::Follows => "follows",
            RelationKind::Creates => "creates",
            RelationKind::Calls => "calls",
            RelationKind::Pays => "pays",
        }
    }

    pub fn from_name(s: &str) -> Option<RelationKind> {
        RelationKind::ALL.into_iter().find(|r| r.name() == s)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Up,
    Down,
}

impl Polarity {
    pub fn name(self) -> &'static str {
        match self {
            Polarity::Up => "up",
            Polarity::Down => "down",
        }
    }

    pub fn from_name(s: &str) -> Option<Polarity> {
        match s {
            "up" => Some(Polarity::Up),
            "down" => Some(Polarity::Down),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One observed interaction on an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub timestamp: i64,
    pub amount: Option<Decimal>,
    pub currency: Option<String>,
    pub rating: Option<Decimal>,
    pub polarity: Option<Polarity>,
}

impl TransactionRecord {
    pub fn at(timestamp: i64) -> Self {
        TransactionRecord {
            timestamp,
            amount: None,
            currency: None,
            rating: None,
            polarity: None,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if let Some(a) = &self.amount {
            if a.is_negative() {
                return Err(GraphError::InvalidRecord(format!("negative amount {a}")));
            }
        }
        if let Some(r) = &self.rating {
            if r.is_negative() || *r > Decimal::from_units(1, 0).unwrap() {
                return Err(GraphError::InvalidRecord(format!(
                    "rating {r} outside [0, 1]"
                )));
            }
        }
        if let Some(c) = &self.currency {
            if c.is_empty()
                || !c
                    .bytes()
                    .all(|b| b.is_ascii_graphic() && b != b'\t' && b != b',' && b != b'#')
            {
                return Err(GraphError::InvalidRecord(format!(
                    "invalid currency code {c:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Edge key in canonical order: src, then relation, then dst.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub src: NodeId,
    pub rel: RelationKind,
    pub dst: NodeId,
}

/// All records for one edge within one period, plus running aggregates.
///
/// Records stay ordered by (timestamp, insertion order). The aggregate
/// rating is the amount-weighted mean of rated records using weight
/// `amount + 1` (so unpriced ratings still count), recomputed in record
/// order after every insert for reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeValue {
    records: Vec<TransactionRecord>,
    agg_amount: Decimal,
    agg_rating: Option<f64>,
}

impl EdgeValue {
    fn new() -> Self {
        EdgeValue {
            records: Vec::new(),
            agg_amount: Decimal::ZERO,
            agg_rating: None,
        }
    }

    pub fn records(&self) -> &[TransactionRecord] {
        &self.records
    }

    pub fn agg_count(&self) -> usize {
        self.records.len()
    }

    pub fn agg_amount(&self) -> Decimal {
        self.agg_amount
    }

    pub fn agg_rating(&self) -> Option<f64> {
        self.agg_rating
    }

    fn push(&mut self, rec: TransactionRecord) -> Result<(), GraphError> {
        if let Some(a) = &rec.amount {
            self.agg_amount = self
                .agg_amount
                .checked_add(a)
                .map_err(|_| GraphError::Overflow)?;
        }
        let at = self
            .records
            .partition_point(|r| r.timestamp <= rec.timestamp);
        self.records.insert(at, rec);
        self.recompute_agg_rating();
        Ok(())
    }

    fn recompute_agg_rating(&mut self) {
        let mut num = 0.0;
        let mut den = 0.0;
        for r in &self.records {
            if let Some(rating) = &r.rating {
                let w = r.amount.map(|a| a.to_f64()).unwrap_or(0.0) + 1.0;
                num += w * rating.to_f64();
                den += w;
            }
        }
        self.agg_rating = if den > 0.0 { Some(num / den) } else { None };
    }
}

/// Period index: timestamps map to periods by euclidean division, so
/// negative timestamps land in negative periods rather than period 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeriodId(i64);

impl PeriodId {
    pub fn new(index: i64) -> Self {
        PeriodId(index)
    }

    pub fn from_timestamp(ts: i64, period_seconds: i64) -> Self {
        PeriodId(ts.div_euclid(period_seconds))
    }

    pub fn index(self) -> i64 {
        self.0
    }

    pub fn start_ts(self, period_seconds: i64) -> i64 {
        self.0 * period_seconds
    }

    pub fn end_ts(self, period_seconds: i64) -> i64 {
        (self.0 + 1) * period_seconds
    }

    pub fn prev(self) -> PeriodId {
        PeriodId(self.0 - 1)
    }

    pub fn next(self) -> PeriodId {
        PeriodId(self.0 + 1)
    }
}

impl fmt::Display for PeriodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for PeriodId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<i64>().map(PeriodId)
    }
}

/// Evidence for one period: a multigraph over typed nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSubgraph {
    period: PeriodId,
    period_seconds: i64,
    sealed: bool,
    edges: BTreeMap<EdgeKey, EdgeValue>,
    by_src: BTreeMap<(NodeId, RelationKind), BTreeSet<NodeId>>,
    by_dst: BTreeMap<(NodeId, RelationKind), BTreeSet<NodeId>>,
}

impl TemporalSubgraph {
    pub fn new(period: PeriodId, period_seconds: i64) -> Self {
        assert!(period_seconds > 0, "period length must be positive");
        TemporalSubgraph {
            period,
            period_seconds,
            sealed: false,
            edges: BTreeMap::new(),
            by_src: BTreeMap::new(),
            by_dst: BTreeMap::new(),
        }
    }

    pub fn period(&self) -> PeriodId {
        self.period
    }

    pub fn period_seconds(&self) -> i64 {
        self.period_seconds
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn record_count(&self) -> usize {
        self.edges.values().map(|v| v.records.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn add_record(
        &mut self,
        src: NodeId,
        rel: RelationKind,
        dst: NodeId,
        rec: TransactionRecord,
    ) -> Result<(), GraphError> {
        if self.sealed {
            return Err(GraphError::SealedPeriod(self.period));
        }
        let start = self.period.start_ts(self.period_seconds);
        let end = self.period.end_ts(self.period_seconds);
        if rec.timestamp < start || rec.timestamp >= end {
            return Err(GraphError::PeriodMismatch {
                period: self.period,
                ts: rec.timestamp,
            });
        }
        rec.validate()?;
        self.by_src
            .entry((src.clone(), rel))
            .or_default()
            .insert(dst.clone());
        self.by_dst
            .entry((dst.clone(), rel))
            .or_default()
            .insert(src.clone());
        self.edges
            .entry(EdgeKey { src, rel, dst })
            .or_insert_with(EdgeValue::new)
            .push(rec)
    }

    pub fn edge(&self, src: &NodeId, rel: RelationKind, dst: &NodeId) -> Option<&EdgeValue> {
        // Lookup without cloning: BTreeMap requires an owned-key borrow,
        // and EdgeKey has no by-ref view type, so build a key once.
        let key = EdgeKey {
            src: src.clone(),
            rel,
            dst: dst.clone(),
        };
        self.edges.get(&key)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &EdgeValue)> {
        self.edges.iter()
    }

    /// Sources of `rel` edges pointing at `dst`, canonical order.
    pub fn sources_into(&self, dst: &NodeId, rel: RelationKind) -> Vec<&NodeId> {
        match self.by_dst.get(&(dst.clone(), rel)) {
            Some(set) => set.iter().collect(),
            None => Vec::new(),
        }
    }

    /// Destinations of `rel` edges leaving `src`, canonical order.
    pub fn targets_from(&self, src: &NodeId, rel: RelationKind) -> Vec<&NodeId> {
        match self.by_src.get(&(src.clone(), rel)) {
            Some(set) => set.iter().collect(),
            None => Vec::new(),
        }
    }

    /// Edges matching the given components; `None` matches anything.
    /// Results come back in canonical `(src, rel, dst)` order.
    pub fn query(
        &self,
        src: Option<&NodeId>,
        rel: Option<RelationKind>,
        dst: Option<&NodeId>,
    ) -> Vec<(&EdgeKey, &EdgeValue)> {
        let mut out: Vec<(&EdgeKey, &EdgeValue)> = self
            .edges
            .iter()
            .filter(|(k, _)| {
                src.is_none_or(|s| &k.src == s)
                    && rel.is_none_or(|r| k.rel == r)
                    && dst.is_none_or(|d| &k.dst == d)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }
}

/// Read-only merge of several period subgraphs.
///
/// Records for an edge are concatenated in ascending period order, which
/// is also global timestamp order because periods partition the time
/// axis. Aggregates are recomputed over the combined record lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedView {
    periods: Vec<PeriodId>,
    edges: BTreeMap<EdgeKey, EdgeValue>,
}

impl MergedView {
    pub fn periods(&self) -> &[PeriodId] {
        &self.periods
    }

    pub fn edges(&self) -> impl Iterator<Item = (&EdgeKey, &EdgeValue)> {
        self.edges.iter()
    }

    pub fn edge(&self, src: &NodeId, rel: RelationKind, dst: &NodeId) -> Option<&EdgeValue> {
        let key = EdgeKey {
            src: src.clone(),
            rel,
            dst: dst.clone(),
        };
        self.edges.get(&key)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn record_count(&self) -> usize {
        self.edges.values().map(|v| v.records.len()).sum()
    }
}

/// Owner of resident period subgraphs.
///
/// Tracks which periods have been persisted (eviction refuses to drop
/// anything unsaved) and maintains a residency high-water mark. The
/// engine reports its two working state maps into the same gauge, so the
/// mark directly witnesses the "one evidence subgraph plus two states"
/// memory contract.
#[derive(Debug)]
pub struct GraphStore {
    period_seconds: i64,
    resident: BTreeMap<PeriodId, TemporalSubgraph>,
    persisted: BTreeSet<PeriodId>,
    residency_high_water: usize,
}

impl GraphStore {
    pub fn new(period_seconds: i64) -> Self {
        assert!(period_seconds > 0, "period length must be positive");
        GraphStore {
            period_seconds,
            resident: BTreeMap::new(),
            persisted: BTreeSet::new(),
            residency_high_water: 0,
        }
    }

    pub fn period_seconds(&self) -> i64 {
        self.period_seconds
    }

    pub fn period_of(&self, ts: i64) -> PeriodId {
        PeriodId::from_timestamp(ts, self.period_seconds)
    }

    pub fn create_period(&mut self, period: PeriodId) -> Result<(), GraphError> {
        if self.resident.contains_key(&period) {
            return Err(GraphError::AlreadyResident(period));
        }
        self.resident
            .insert(period, TemporalSubgraph::new(period, self.period_seconds));
        self.observe_residency(0);
        Ok(())
    }

    pub fn is_resident(&self, period: PeriodId) -> bool {
        self.resident.contains_key(&period)
    }

    pub fn is_persisted(&self, period: PeriodId) -> bool {
        self.persisted.contains(&period)
    }

    pub fn resident_periods(&self) -> Vec<PeriodId> {
        self.resident.keys().copied().collect()
    }

    pub fn resident_count(&self) -> usize {
        self.resident.len()
    }

    pub fn subgraph(&self, period: PeriodId) -> Option<&TemporalSubgraph> {
        self.resident.get(&period)
    }

    pub fn add_edge(
        &mut self,
        period: PeriodId,
        src: NodeId,
        rel: RelationKind,
        dst: NodeId,
        rec: TransactionRecord,
    ) -> Result<(), GraphError> {
        let g = self
            .resident
            .get_mut(&period)
            .ok_or(GraphError::UnknownPeriod(period))?;
        g.add_record(src, rel, dst, rec)?;
        // Mutation invalidates any previously persisted copy.
        self.persisted.remove(&period);
        Ok(())
    }

    /// Idempotent; sealing an unknown period is an error.
    pub fn seal_period(&mut self, period: PeriodId) -> Result<(), GraphError> {
        let g = self
            .resident
            .get_mut(&period)
            .ok_or(GraphError::UnknownPeriod(period))?;
        g.seal();
        Ok(())
    }

    pub fn query_edges(
        &self,
        period: PeriodId,
        src: Option<&NodeId>,
        rel: Option<RelationKind>,
        dst: Option<&NodeId>,
    ) -> Result<Vec<(&EdgeKey, &EdgeValue)>, GraphError> {
        let g = self
            .resident
            .get(&period)
            .ok_or(GraphError::PeriodNotResident(period))?;
        Ok(g.query(src, rel, dst))
    }

    /// Merge resident periods into an owned read-only view. Periods are
    /// deduplicated and taken in ascending order regardless of argument
    /// order, so the merge is order-insensitive.
    pub fn merge_periods(&self, periods: &[PeriodId]) -> Result<MergedView, GraphError> {
        let wanted: BTreeSet<PeriodId> = periods.iter().copied().collect();
        let mut edges: BTreeMap<EdgeKey, EdgeValue> = BTreeMap::new();
        for p in &wanted {
            let g = self
                .resident
                .get(p)
                .ok_or(GraphError::PeriodNotResident(*p))?;
            for (key, value) in g.edges() {
                let entry = edges.entry(key.clone()).or_insert_with(EdgeValue::new);
                for rec in value.records() {
                    entry.push(rec.clone())?;
                }
            }
        }
        Ok(MergedView {
            periods: wanted.into_iter().collect(),
            edges,
        })
    }

    /// Drop a resident period. Requires it to be sealed and persisted.
    pub fn evict_period(&mut self, period: PeriodId) -> Result<(), GraphError> {
        let g = self
            .resident
            .get(&period)
            .ok_or(GraphError::UnknownPeriod(period))?;
        if !g.is_sealed() {
            return Err(GraphError::NotSealed(period));
        }
        if !self.persisted.contains(&period) {
            return Err(GraphError::NotPersisted(period));
        }
        self.resident.remove(&period);
        Ok(())
    }

    /// Install a subgraph restored from storage. It must be sealed; it
    /// counts as persisted since storage just produced it.
    pub fn insert_loaded(&mut self, g: TemporalSubgraph) -> Result<(), GraphError> {
        if !g.is_sealed() {
            return Err(GraphError::NotSealed(g.period()));
        }
        if g.period_seconds() != self.period_seconds {
            return Err(GraphError::InvalidRecord(format!(
                "subgraph period length {} does not match store {}",
                g.period_seconds(),
                self.period_seconds
            )));
        }
        if self.resident.contains_key(&g.period()) {
            return Err(GraphError::AlreadyResident(g.period()));
        }
        let period = g.period();
        self.resident.insert(period, g);
        self.persisted.insert(period);
        self.observe_residency(0);
        Ok(())
    }

    /// Record that `period`'s current contents are safely on disk.
    pub fn mark_persisted(&mut self, period: PeriodId) -> Result<(), GraphError> {
        if !self.resident.contains_key(&period) {
            return Err(GraphError::UnknownPeriod(period));
        }
        self.persisted.insert(period);
        Ok(())
    }

    /// Fold `extra` non-graph residents (engine state maps) into the
    /// residency gauge.
    pub fn observe_residency(&mut self, extra: usize) {
        let now = self.resident.len() + extra;
        if now > self.residency_high_water {
            self.residency_high_water = now;
        }
    }

    pub fn residency_high_water(&self) -> usize {
        self.residency_high_water
    }

    pub fn reset_residency_high_water(&mut self) {
        self.residency_high_water = self.resident.len();
    }
}
