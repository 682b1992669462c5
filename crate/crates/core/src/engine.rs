//! Reputation update kernel.
//!
//! One period advances in four stages: project the period's evidence into
//! rater→ratee ratings, accumulate a raw differential weighted by each
//! rater's previous reputation, normalize by the period maximum, then
//! blend into the previous state with decay factor `alpha`.
//!
//! Determinism rules the arithmetic. Sums run in canonical rating order,
//! and every value that enters a state is first rendered to 12-decimal
//! fixed point and reparsed ([`canonical_value`]). Rendering a canonical
//! value again reproduces the same text, so chaining updates in memory,
//! resuming from disk, and replaying from genesis all yield byte-identical
//! state files.
//!
//! Memory contract: an update touches at most three graphs at once: the
//! period's evidence subgraph plus the previous and next states. Updates
//! report those two states into the store's residency gauge so the bound
//! is observable end to end.

use std::collections::{BTreeMap, BTreeSet};

use crate::decimal::Decimal;
use crate::graph::{EntityKind, GraphError, GraphStore, NodeId, PeriodId};
use crate::ontology::{derive_ratings, DerivedRating};
use crate::persist::{EvidenceStore, PersistError, StateStore};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for {key:?}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Tunable engine parameters, readable from a `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    /// Convex blending factor in (0, 1]: weight of the new differential.
    pub alpha: f64,
    /// Reputation of any account absent from a state.
    pub default_reputation: f64,
    /// Base of the financial weighting logarithm.
    pub log_base: f64,
    pub q_vote_up: f64,
    pub q_vote_down: f64,
    pub q_comment: f64,
    pub q_payment: f64,
    /// Length of one observation period.
    pub period_seconds: i64,
    /// Currency code → multiplier into base units.
    pub currency_table: BTreeMap<String, Decimal>,
}

impl Default for EngineParams {
    fn default() -> Self {
        let mut currency_table = BTreeMap::new();
        currency_table.insert("XYZ".to_string(), Decimal::from_units(1, 0).unwrap());
        EngineParams {
            alpha: 0.2,
            default_reputation: 0.5,
            log_base: 10.0,
            q_vote_up: 1.0,
            q_vote_down: 0.0,
            q_comment: 0.5,
            q_payment: 1.0,
            period_seconds: 86_400,
            currency_table,
        }
    }
}

impl EngineParams {
    /// Parse a params file on top of the defaults. Keys match the field
    /// names; currency entries are `currency_table.<CODE> = <multiplier>`.
    /// Unknown or repeated keys are errors. `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        let mut params = EngineParams::default();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ParamsError::Syntax { line: line_no })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(ParamsError::DuplicateKey {
                    line: line_no,
                    key: key.to_string(),
                });
            }
            let bad = |reason: String| ParamsError::BadValue {
                line: line_no,
                key: key.to_string(),
                reason,
            };
            if let Some(code) = key.strip_prefix("currency_table.") {
                if code.is_empty() {
                    return Err(bad("empty currency code".to_string()));
                }
                let mult: Decimal = value.parse().map_err(|e| bad(format!("{e}")))?;
                params.currency_table.insert(code.to_string(), mult);
                continue;
            }
            match key {
                "alpha" => params.alpha = parse_f64(value).map_err(bad)?,
                "default_reputation" => {
                    params.default_reputation = parse_f64(value).map_err(bad)?
                }
                "log_base" => params.log_base = parse_f64(value).map_err(bad)?,
                "q_vote_up" => params.q_vote_up = parse_f64(value).map_err(bad)?,
                "q_vote_down" => params.q_vote_down = parse_f64(value).map_err(bad)?,
                "q_comment" => params.q_comment = parse_f64(value).map_err(bad)?,
                "q_payment" => params.q_payment = parse_f64(value).map_err(bad)?,
                "period_seconds" => {
                    params.period_seconds = value.parse::<i64>().map_err(|e| bad(e.to_string()))?
                }
                _ => {
                    return Err(ParamsError::UnknownKey {
                        line: line_no,
                        key: key.to_string(),
                    })
                }
            }
        }
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let inv = |msg: String| Err(ParamsError::Invalid(msg));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return inv(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if !(self.default_reputation >= 0.0 && self.default_reputation <= 1.0) {
            return inv(format!(
                "default_reputation {} outside [0, 1]",
                self.default_reputation
            ));
        }
        if !(self.log_base > 1.0 && self.log_base.is_finite()) {
            return inv(format!("log_base {} must be finite and > 1", self.log_base));
        }
        for (name, q) in [
            ("q_vote_up", self.q_vote_up),
            ("q_vote_down", self.q_vote_down),
            ("q_comment", self.q_comment),
            ("q_payment", self.q_payment),
        ] {
            if !(0.0..=1.0).contains(&q) {
                return inv(format!("{name} {q} outside [0, 1]"));
            }
        }
        if self.period_seconds <= 0 {
            return inv(format!(
                "period_seconds {} must be > 0",
                self.period_seconds
            ));
        }
        for (code, mult) in &self.currency_table {
            if code.is_empty()
                || !code
                    .bytes()
                    .all(|b| b.is_ascii_graphic() && b != b'\t' && b != b',' && b != b'#')
            {
                return inv(format!("invalid currency code {code:?}"));
            }
            if mult.is_negative() || mult.is_zero() {
                return inv(format!("currency multiplier for {code} must be > 0"));
            }
        }
        Ok(())
    }
}

fn parse_f64(value: &str) -> Result<f64, String> {
    let v: f64 = value.parse().map_err(|e| format!("{e}"))?;
    if !v.is_finite() {
        return Err(format!("{value} is not finite"));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("evidence for period {0} is not resident")]
    PeriodNotResident(PeriodId),
    #[error("evidence for period {0} is not sealed")]
    NotSealed(PeriodId),
    #[error("state gap: have state for period {actual}, need period {expected}")]
    StateGap {
        expected: PeriodId,
        actual: PeriodId,
    },
    #[error("no evidence persisted for period {0}")]
    MissingEvidence(PeriodId),
    #[error("negative amount {0}")]
    NegativeAmount(f64),
    #[error("negative raw differential for {0}")]
    NegativeInput(NodeId),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Storage(#[from] PersistError),
}

/// Per-period reputation map. Only Account nodes carry reputation and
/// every stored value lies in [0, 1]; absent accounts mean "default".
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationState {
    period: PeriodId,
    values: BTreeMap<NodeId, f64>,
}

impl ReputationState {
    /// Empty state preceding the first evidence period.
    pub fn genesis(period: PeriodId) -> Self {
        ReputationState {
            period,
            values: BTreeMap::new(),
        }
    }

    pub fn from_values(
        period: PeriodId,
        values: BTreeMap<NodeId, f64>,
    ) -> Result<Self, EngineError> {
        for (id, v) in &values {
            if id.kind() != EntityKind::Account {
                return Err(EngineError::InvalidState(format!("{id} is not an account")));
            }
            if !(v.is_finite() && (0.0..=1.0).contains(v)) {
                return Err(EngineError::InvalidState(format!(
                    "value {v} for {id} outside [0, 1]"
                )));
            }
        }
        Ok(ReputationState { period, values })
    }

    pub fn period(&self) -> PeriodId {
        self.period
    }

    pub fn get(&self, account: &NodeId) -> Option<f64> {
        self.values.get(account).copied()
    }

    pub fn values(&self) -> &BTreeMap<NodeId, f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Stored value if present, else the configured default.
pub fn get_reputation(state: &ReputationState, account: &NodeId, params: &EngineParams) -> f64 {
    state.get(account).unwrap_or(params.default_reputation)
}

/// Fold a float onto the 12-decimal grid used by state serialization.
///
/// Rendering the result with `{:.12}` reproduces the same text, so a
/// value that went through this function round-trips through a state
/// file bit-for-bit. Negative zero folds to zero.
pub fn canonical_value(x: f64) -> f64 {
    debug_assert!(x.is_finite());
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.12}")
        .parse()
        .expect("fixed-point rendering always reparses")
}

/// Logarithmic financial weight: log_base(1 + amount). Zero at zero,
/// monotone, and exactly 1.0 / 2.0 at amounts 9 / 99 with base 10.
pub fn financial_weight(amount: f64, params: &EngineParams) -> Result<f64, EngineError> {
    if amount < 0.0 || !amount.is_finite() {
        return Err(EngineError::NegativeAmount(amount));
    }
    let x = 1.0 + amount;
    // log10 is exact at powers of ten; the generic log is not.
    if params.log_base == 10.0 {
        Ok(x.log10())
    } else {
        Ok(x.log(params.log_base))
    }
}

/// Raw per-account differential: for each rating, the rater's previous
/// reputation times quality times weight, summed in the canonical rating
/// order. Accounts with no inbound ratings do not appear.
pub fn differential(
    ratings: &[DerivedRating],
    prev: &ReputationState,
    params: &EngineParams,
) -> BTreeMap<NodeId, f64> {
    let mut raw: BTreeMap<NodeId, f64> = BTreeMap::new();
    for r in ratings {
        let rep = get_reputation(prev, &r.rater, params);
        *raw.entry(r.ratee.clone()).or_insert(0.0) += rep * r.quality * r.weight;
    }
    raw
}

/// Divide every value by the map's maximum. Empty stays empty; an
/// all-zero map is returned unchanged rather than divided by zero.
pub fn normalize(mut raw: BTreeMap<NodeId, f64>) -> Result<BTreeMap<NodeId, f64>, EngineError> {
    let mut max = 0.0_f64;
    for (id, v) in &raw {
        if *v < 0.0 || !v.is_finite() {
            return Err(EngineError::NegativeInput(id.clone()));
        }
        if *v > max {
            max = *v;
        }
    }
    if max > 0.0 {
        for v in raw.values_mut() {
            *v /= max;
        }
    }
    Ok(raw)
}

/// Convex blend of the previous state with the normalized differential,
/// over the union of their accounts. An account rated for the first time
/// blends from the default; accounts in neither map stay absent. Values
/// are clamped to [0, 1] and canonicalized.
pub fn blend(
    prev: &ReputationState,
    dr: &BTreeMap<NodeId, f64>,
    params: &EngineParams,
) -> ReputationState {
    let alpha = params.alpha;
    let mut values: BTreeMap<NodeId, f64> = BTreeMap::new();
    let accounts: BTreeSet<&NodeId> = prev.values.keys().chain(dr.keys()).collect();
    for id in accounts {
        let p = match prev.get(id) {
            Some(v) => v,
            None => params.default_reputation, // first appearance
        };
        let d = dr.get(id).copied().unwrap_or(0.0);
        let v = (1.0 - alpha) * p + alpha * d;
        values.insert(id.clone(), canonical_value(v.clamp(0.0, 1.0)));
    }
    ReputationState {
        period: prev.period.next(),
        values,
    }
}

/// Advance one period: derive ratings from the resident sealed evidence,
/// apply the four-stage pipeline, persist the new state, return it.
///
/// Graphs alive here: evidence(period), state(period−1), state(period).
/// The two states are reported into the store's residency gauge.
pub fn update_period<S: StateStore>(
    store: &mut GraphStore,
    period: PeriodId,
    prev: &ReputationState,
    params: &EngineParams,
    states: &mut S,
) -> Result<ReputationState, EngineError> {
    if prev.period() != period.prev() {
        return Err(EngineError::StateGap {
            expected: period.prev(),
            actual: prev.period(),
        });
    }
    let ratings = {
        let g = store
            .subgraph(period)
            .ok_or(EngineError::PeriodNotResident(period))?;
        if !g.is_sealed() {
            return Err(EngineError::NotSealed(period));
        }
        derive_ratings(g, params).0
    };
    let raw = differential(&ratings, prev, params);
    let normalized = normalize(raw)?;
    let state = blend(prev, &normalized, params);
    store.observe_residency(2);
    states.save_state(&state)?;
    Ok(state)
}

/// Sequential update over [from, to], starting from `prev` (the state of
/// `from`−1). Evidence is loaded per period when not already resident and
/// evicted again right after, so at most one evidence subgraph is
/// resident at a time. Each new state is handed to `on_state` and then
/// becomes the next period's `prev`.
#[allow(clippy::too_many_arguments)]
pub fn update_range<E: EvidenceStore, S: StateStore>(
    store: &mut GraphStore,
    evidence: &E,
    states: &mut S,
    from: PeriodId,
    to: PeriodId,
    prev: ReputationState,
    params: &EngineParams,
    mut on_state: impl FnMut(&ReputationState),
) -> Result<(), EngineError> {
    if from > to {
        return Ok(());
    }
    if prev.period() != from.prev() {
        return Err(EngineError::StateGap {
            expected: from.prev(),
            actual: prev.period(),
        });
    }
    let mut prev = prev;
    for idx in from.index()..=to.index() {
        let p = PeriodId::new(idx);
        let loaded_here = if store.is_resident(p) {
            false
        } else {
            if !evidence.has_subgraph(p)? {
                return Err(EngineError::MissingEvidence(p));
            }
            store.insert_loaded(evidence.load_subgraph(p)?)?;
            true
        };
        let state = update_period(store, p, &prev, params, states)?;
        if loaded_here {
            store.evict_period(p)?;
        }
        on_state(&state);
        prev = state;
    }
    Ok(())
}

/// Full audit recomputation: replay [from, to] from an empty genesis
/// state, persisting and returning every state. Byte-identical to the
/// incrementally produced states for the same evidence.
pub fn replay_range<E: EvidenceStore, S: StateStore>(
    store: &mut GraphStore,
    evidence: &E,
    states: &mut S,
    from: PeriodId,
    to: PeriodId,
    params: &EngineParams,
) -> Result<Vec<ReputationState>, EngineError> {
    let mut out = Vec::new();
    update_range(
        store,
        evidence,
        states,
        from,
        to,
        ReputationState::genesis(from.prev()),
        params,
        |s| out.push(s.clone()),
    )?;
    Ok(out)
}
