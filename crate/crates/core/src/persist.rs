//! Canonical on-disk representation.
//!
//! One file per period: `evidence/<period>.tsv` for sealed subgraphs,
//! `state/<period>.tsv` for reputation states, both under a data root.
//! Files are sorted, fixed-field text with a trailing newline; loading a
//! canonical file and saving it again reproduces it byte-for-byte, which
//! is what makes replay auditing and golden-file testing meaningful.
//!
//! Evidence rows: `src rel dst ts amount currency rating polarity`
//! (tab-separated, absent optionals empty), sorted by (src, rel, dst,
//! ts, insertion order), preceded by a header line. State rows:
//! `account value` with the value in 12-decimal fixed point, sorted by
//! account, no header.
//!
//! Writes go through a temp file and rename, so a crash never leaves a
//! half-written period file.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::engine::ReputationState;
use crate::graph::{
    EntityKind, NodeId, PeriodId, Polarity, RelationKind, TemporalSubgraph, TransactionRecord,
};

pub const EVIDENCE_HEADER: &str = "src\trel\tdst\tts\tamount\tcurrency\trating\tpolarity";
pub const DYNAMICS_HEADER: &str = "period,account,reputation";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersistError {
    #[error("{origin}: {message}")]
    Io { origin: String, message: String },
    #[error("{origin}:{line}: {reason}")]
    CorruptFile {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("no persisted evidence for period {0}")]
    UnknownPeriod(PeriodId),
    #[error("no persisted state for period {0}")]
    MissingState(PeriodId),
    #[error("period {0} is not sealed")]
    NotSealed(PeriodId),
}

impl PersistError {
    fn io(origin: impl Into<String>, source: io::Error) -> Self {
        PersistError::Io {
            origin: origin.into(),
            message: source.to_string(),
        }
    }

    fn corrupt(origin: &str, line: usize, reason: impl Into<String>) -> Self {
        PersistError::CorruptFile {
            origin: origin.to_string(),
            line,
            reason: reason.into(),
        }
    }
}

/// Render a sealed subgraph in canonical TSV.
pub fn subgraph_to_tsv(g: &TemporalSubgraph) -> Result<String, PersistError> {
    if !g.is_sealed() {
        return Err(PersistError::NotSealed(g.period()));
    }
    let mut out = String::with_capacity(64 + g.record_count() * 48);
    out.push_str(EVIDENCE_HEADER);
    out.push('\n');
    for (key, value) in g.edges() {
        for rec in value.records() {
            let amount = rec.amount.map(|a| a.to_string()).unwrap_or_default();
            let currency = rec.currency.as_deref().unwrap_or("");
            let rating = rec.rating.map(|r| r.to_string()).unwrap_or_default();
            let polarity = rec.polarity.map(|p| p.name()).unwrap_or("");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                key.src, key.rel, key.dst, rec.timestamp, amount, currency, rating, polarity
            ));
        }
    }
    Ok(out)
}

/// Parse a subgraph file. Rows may arrive in any order (they are
/// re-sorted on insert) but every row is fully validated; the loaded
/// subgraph comes back sealed.
pub fn subgraph_from_tsv(
    period: PeriodId,
    period_seconds: i64,
    text: &str,
    origin: &str,
) -> Result<TemporalSubgraph, PersistError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first == EVIDENCE_HEADER => {}
        Some((_, first)) => {
            return Err(PersistError::corrupt(
                origin,
                1,
                format!("bad header {first:?}"),
            ))
        }
        None => return Err(PersistError::corrupt(origin, 1, "empty file")),
    }
    let mut g = TemporalSubgraph::new(period, period_seconds);
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(PersistError::corrupt(
                origin,
                line_no,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let src: NodeId = fields[0]
            .parse()
            .map_err(|e| PersistError::corrupt(origin, line_no, format!("src: {e}")))?;
        let rel = RelationKind::from_name(fields[1]).ok_or_else(|| {
            PersistError::corrupt(origin, line_no, format!("unknown relation {:?}", fields[1]))
        })?;
        let dst: NodeId = fields[2]
            .parse()
            .map_err(|e| PersistError::corrupt(origin, line_no, format!("dst: {e}")))?;
        let timestamp: i64 = fields[3]
            .parse()
            .map_err(|e| PersistError::corrupt(origin, line_no, format!("ts: {e}")))?;
        let amount = if fields[4].is_empty() {
            None
        } else {
            Some(
                fields[4]
                    .parse()
                    .map_err(|e| PersistError::corrupt(origin, line_no, format!("amount: {e}")))?,
            )
        };
        let currency = if fields[5].is_empty() {
            None
        } else {
            Some(fields[5].to_string())
        };
        let rating = if fields[6].is_empty() {
            None
        } else {
            Some(
                fields[6]
                    .parse()
                    .map_err(|e| PersistError::corrupt(origin, line_no, format!("rating: {e}")))?,
            )
        };
        let polarity = if fields[7].is_empty() {
            None
        } else {
            Some(Polarity::from_name(fields[7]).ok_or_else(|| {
                PersistError::corrupt(origin, line_no, format!("unknown polarity {:?}", fields[7]))
            })?)
        };
        let rec = TransactionRecord {
            timestamp,
            amount,
            currency,
            rating,
            polarity,
        };
        g.add_record(src, rel, dst, rec)
            .map_err(|e| PersistError::corrupt(origin, line_no, e.to_string()))?;
    }
    g.seal();
    Ok(g)
}

/// Render a state in canonical TSV (no header).
pub fn state_to_tsv(s: &ReputationState) -> String {
    let mut out = String::with_capacity(s.len() * 24);
    for (id, v) in s.values() {
        out.push_str(&format!("{id}\t{v:.12}\n"));
    }
    out
}

/// Parse a state file: `account<TAB>value` rows, values in [0, 1].
pub fn state_from_tsv(
    period: PeriodId,
    text: &str,
    origin: &str,
) -> Result<ReputationState, PersistError> {
    let mut values: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let (id_str, v_str) = line.split_once('\t').ok_or_else(|| {
            PersistError::corrupt(origin, line_no, "expected `account<TAB>value`")
        })?;
        let id: NodeId = id_str
            .parse()
            .map_err(|e| PersistError::corrupt(origin, line_no, format!("account: {e}")))?;
        if id.kind() != EntityKind::Account {
            return Err(PersistError::corrupt(
                origin,
                line_no,
                format!("{id} is not an account"),
            ));
        }
        let v: f64 = v_str
            .parse()
            .map_err(|e| PersistError::corrupt(origin, line_no, format!("value: {e}")))?;
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(PersistError::corrupt(
                origin,
                line_no,
                format!("value {v_str} outside [0, 1]"),
            ));
        }
        if values.insert(id, v).is_some() {
            return Err(PersistError::corrupt(
                origin,
                line_no,
                format!("duplicate account {id_str}"),
            ));
        }
    }
    ReputationState::from_values(period, values)
        .map_err(|e| PersistError::corrupt(origin, 0, e.to_string()))
}

/// Storage for persisted evidence subgraphs.
pub trait EvidenceStore {
    fn save_subgraph(&mut self, g: &TemporalSubgraph) -> Result<(), PersistError>;
    fn load_subgraph(&self, period: PeriodId) -> Result<TemporalSubgraph, PersistError>;
    fn has_subgraph(&self, period: PeriodId) -> Result<bool, PersistError>;
    /// Ascending list of periods with persisted evidence.
    fn evidence_periods(&self) -> Result<Vec<PeriodId>, PersistError>;
}

/// Storage for persisted reputation states.
pub trait StateStore {
    fn save_state(&mut self, s: &ReputationState) -> Result<(), PersistError>;
    fn load_state(&self, period: PeriodId) -> Result<ReputationState, PersistError>;
    fn has_state(&self, period: PeriodId) -> Result<bool, PersistError>;
    /// Ascending list of periods with persisted states.
    fn state_periods(&self) -> Result<Vec<PeriodId>, PersistError>;
}

/// Data-root directory store: `<root>/evidence/*.tsv`, `<root>/state/*.tsv`.
#[derive(Debug)]
pub struct FsStore {
    root: PathBuf,
    period_seconds: i64,
}

impl FsStore {
    pub fn open(root: impl Into<PathBuf>, period_seconds: i64) -> Result<Self, PersistError> {
        let root = root.into();
        for sub in ["evidence", "state"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| PersistError::io(dir.display().to_string(), e))?;
        }
        Ok(FsStore {
            root,
            period_seconds,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn evidence_path(&self, period: PeriodId) -> PathBuf {
        self.root.join("evidence").join(format!("{period}.tsv"))
    }

    fn state_path(&self, period: PeriodId) -> PathBuf {
        self.root.join("state").join(format!("{period}.tsv"))
    }

    fn write_atomic(path: &Path, content: &str) -> Result<(), PersistError> {
        let origin = path.display().to_string();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, content).map_err(|e| PersistError::io(&origin, e))?;
        fs::rename(&tmp, path).map_err(|e| PersistError::io(&origin, e))
    }

    fn list_periods(&self, sub: &str) -> Result<Vec<PeriodId>, PersistError> {
        let dir = self.root.join(sub);
        let entries =
            fs::read_dir(&dir).map_err(|e| PersistError::io(dir.display().to_string(), e))?;
        let mut periods = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| PersistError::io(dir.display().to_string(), e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            let Some(stem) = name.strip_suffix(".tsv") else {
                continue; // lefttover temp files and strangers are ignored
            };
            if let Ok(idx) = stem.parse::<i64>() {
                periods.push(PeriodId::new(idx));
            }
        }
        periods.sort();
        Ok(periods)
    }
}

impl EvidenceStore for FsStore {
    fn save_subgraph(&mut self, g: &TemporalSubgraph) -> Result<(), PersistError> {
        let text = subgraph_to_tsv(g)?;
        Self::write_atomic(&self.evidence_path(g.period()), &text)
    }

    fn load_subgraph(&self, period: PeriodId) -> Result<TemporalSubgraph, PersistError> {
        let path = self.evidence_path(period);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(PersistError::UnknownPeriod(period))
            }
            Err(e) => return Err(PersistError::io(path.display().to_string(), e)),
        };
        subgraph_from_tsv(
            period,
            self.period_seconds,
            &text,
            &path.display().to_string(),
        )
    }

    fn has_subgraph(&self, period: PeriodId) -> Result<bool, PersistError> {
        Ok(self.evidence_path(period).is_file())
    }

    fn evidence_periods(&self) -> Result<Vec<PeriodId>, PersistError> {
        self.list_periods("evidence")
    }
}

impl StateStore for FsStore {
    fn save_state(&mut self, s: &ReputationState) -> Result<(), PersistError> {
        Self::write_atomic(&self.state_path(s.period()), &state_to_tsv(s))
    }

    fn load_state(&self, period: PeriodId) -> Result<ReputationState, PersistError> {
        let path = self.state_path(period);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(PersistError::MissingState(period))
            }
            Err(e) => return Err(PersistError::io(path.display().to_string(), e)),
        };
        state_from_tsv(period, &text, &path.display().to_string())
    }

    fn has_state(&self, period: PeriodId) -> Result<bool, PersistError> {
        Ok(self.state_path(period).is_file())
    }

    fn state_periods(&self) -> Result<Vec<PeriodId>, PersistError> {
        self.list_periods("state")
    }
}

/// In-memory store holding the canonical file texts. Exercises exactly
/// the same codecs as [`FsStore`], so tests on it cover the byte-level
/// contracts without touching a filesystem.
#[derive(Debug, Clone)]
pub struct MemStore {
    period_seconds: i64,
    evidence: BTreeMap<PeriodId, String>,
    states: BTreeMap<PeriodId, String>,
}

impl MemStore {
    pub fn new(period_seconds: i64) -> Self {
        MemStore {
            period_seconds,
            evidence: BTreeMap::new(),
            states: BTreeMap::new(),
        }
    }

    /// Raw canonical bytes, for byte-equality assertions in tests.
    pub fn evidence_text(&self, period: PeriodId) -> Option<&str> {
        self.evidence.get(&period).map(String::as_str)
    }

    pub fn state_text(&self, period: PeriodId) -> Option<&str> {
        self.states.get(&period).map(String::as_str)
    }

    pub fn all_state_texts(&self) -> &BTreeMap<PeriodId, String> {
        &self.states
    }
}

impl EvidenceStore for MemStore {
    fn save_subgraph(&mut self, g: &TemporalSubgraph) -> Result<(), PersistError> {
        let text = subgraph_to_tsv(g)?;
        self.evidence.insert(g.period(), text);
        Ok(())
    }

    fn load_subgraph(&self, period: PeriodId) -> Result<TemporalSubgraph, PersistError> {
        let text = self
            .evidence
            .get(&period)
            .ok_or(PersistError::UnknownPeriod(period))?;
        subgraph_from_tsv(
            period,
            self.period_seconds,
            text,
            &format!("mem:evidence/{period}.tsv"),
        )
    }

    fn has_subgraph(&self, period: PeriodId) -> Result<bool, PersistError> {
        Ok(self.evidence.contains_key(&period))
    }

    fn evidence_periods(&self) -> Result<Vec<PeriodId>, PersistError> {
        Ok(self.evidence.keys().copied().collect())
    }
}

impl StateStore for MemStore {
    fn save_state(&mut self, s: &ReputationState) -> Result<(), PersistError> {
        self.states.insert(s.period(), state_to_tsv(s));
        Ok(())
    }

    fn load_state(&self, period: PeriodId) -> Result<ReputationState, PersistError> {
        let text = self
            .states
            .get(&period)
            .ok_or(PersistError::MissingState(period))?;
        state_from_tsv(period, text, &format!("mem:state/{period}.tsv"))
    }

    fn has_state(&self, period: PeriodId) -> Result<bool, PersistError> {
        Ok(self.states.contains_key(&period))
    }

    fn state_periods(&self) -> Result<Vec<PeriodId>, PersistError> {
        Ok(self.states.keys().copied().collect())
    }
}

/// Plot-ready reputation trajectories: one CSV row per (period, account)
/// over [from, to], periods ascending then accounts ascending. Accounts
/// absent from a period's state are reported at the default. Streams one
/// state at a time.
pub fn export_dynamics<S: StateStore>(
    states: &S,
    accounts: &[NodeId],
    from: PeriodId,
    to: PeriodId,
    default_reputation: f64,
) -> Result<String, PersistError> {
    let mut out = String::from(DYNAMICS_HEADER);
    out.push('\n');
    if from > to {
        return Ok(out);
    }
    let mut sorted: Vec<&NodeId> = accounts.iter().collect();
    sorted.sort();
    sorted.dedup();
    for idx in from.index()..=to.index() {
        let p = PeriodId::new(idx);
        let state = states.load_state(p)?;
        for a in &sorted {
            let v = state.get(a).unwrap_or(default_reputation);
            out.push_str(&format!("{p},{a},{v:.12}\n"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::engine::{EngineParams, ReputationState};
    use crate::ontology::{event_to_edges, parse_event_line};

    fn sample_graph() -> TemporalSubgraph {
        let params = EngineParams::default();
        let mut g = TemporalSubgraph::new(PeriodId::new(0), 86_400);
        for line in [
            r#"{"kind":"post","actor":"acct:alice","target":"post:p1","ts":100}"#,
            r#"{"kind":"vote","actor":"acct:bob","target":"post:p1","ts":200,"polarity":"up"}"#,
            r#"{"kind":"payment","actor":"acct:bob","target":"acct:alice","ts":300,"amount":"9.50","currency":"XYZ","rating":"0.75"}"#,
            r#"{"kind":"comment","actor":"acct:carol","target":"post:c1","ts":400,"parent":"post:p1"}"#,
        ] {
            let ev = parse_event_line(line, &params).unwrap();
            for (s, r, d, rec) in event_to_edges(&ev) {
                g.add_record(s, r, d, rec).unwrap();
            }
        }
        g.seal();
        g
    }

    #[test]
    fn subgraph_round_trip_is_byte_identical() {
        let g = sample_graph();
        let once = subgraph_to_tsv(&g).unwrap();
        let loaded = subgraph_from_tsv(PeriodId::new(0), 86_400, &once, "t").unwrap();
        let twice = subgraph_to_tsv(&loaded).unwrap();
        assert_eq!(once, twice);
        assert_eq!(g, loaded);
    }

    #[test]
    fn empty_subgraph_serializes_to_header_only() {
        let mut g = TemporalSubgraph::new(PeriodId::new(3), 86_400);
        g.seal();
        let text = subgraph_to_tsv(&g).unwrap();
        assert_eq!(text, format!("{EVIDENCE_HEADER}\n"));
        let loaded = subgraph_from_tsv(PeriodId::new(3), 86_400, &text, "t").unwrap();
        assert!(loaded.is_empty());
        assert!(loaded.is_sealed());
    }

    #[test]
    fn unsealed_subgraph_cannot_be_saved() {
        let g = TemporalSubgraph::new(PeriodId::new(0), 86_400);
        assert!(matches!(
            subgraph_to_tsv(&g),
            Err(PersistError::NotSealed(_))
        ));
    }

    #[test]
    fn corrupt_subgraph_rows_are_rejected_with_line_numbers() {
        let head = EVIDENCE_HEADER;
        let cases = [
            ("nonsense header\n", 1, "bad header"),
            (
                &format!("{head}\nacct:a\tpays\tacct:b\t100\t-1\tXYZ\t\t\n") as &str,
                2,
                "negative amount",
            ),
            (
                &format!("{head}\nacct:a\tpays\tacct:b\t100\t1\n"),
                2,
                "field count",
            ),
            (
                &format!("{head}\nacct:a\tdances\tacct:b\t100\t\t\t\t\n"),
                2,
                "unknown relation",
            ),
            (
                &format!("{head}\nacct:a\tpays\tacct:b\t9999999\t1\tXYZ\t\t\n"),
                2,
                "timestamp outside period",
            ),
            (
                &format!("{head}\nacct:a\tvotes\tpost:p\t100\t\t\t\tsideways\n"),
                2,
                "unknown polarity",
            ),
        ];
        for (text, want_line, what) in cases {
            match subgraph_from_tsv(PeriodId::new(0), 86_400, text, "t") {
                Err(PersistError::CorruptFile { line, .. }) => {
                    assert_eq!(line, want_line, "line for {what}")
                }
                other => panic!("{what}: expected CorruptFile, got {other:?}"),
            }
        }
    }

    fn state(period: i64, pairs: &[(&str, f64)]) -> ReputationState {
        let values: BTreeMap<NodeId, f64> = pairs
            .iter()
            .map(|(id, v)| (NodeId::account(*id).unwrap(), *v))
            .collect();
        ReputationState::from_values(PeriodId::new(period), values).unwrap()
    }

    #[test]
    fn state_file_format_is_pinned() {
        let s = state(0, &[("b", 0.6)]);
        assert_eq!(state_to_tsv(&s), "acct:b\t0.600000000000\n");
    }

    #[test]
    fn state_round_trip() {
        let s = state(5, &[("a", 0.125), ("b", 1.0), ("z", 0.0)]);
        let text = state_to_tsv(&s);
        let loaded = state_from_tsv(PeriodId::new(5), &text, "t").unwrap();
        assert_eq!(s, loaded);
        assert_eq!(state_to_tsv(&loaded), text);
    }

    #[test]
    fn state_file_validation() {
        assert!(matches!(
            state_from_tsv(PeriodId::new(0), "acct:a\t1.5\n", "t"),
            Err(PersistError::CorruptFile { line: 1, .. })
        ));
        assert!(matches!(
            state_from_tsv(PeriodId::new(0), "post:p\t0.5\n", "t"),
            Err(PersistError::CorruptFile { .. })
        ));
        assert!(matches!(
            state_from_tsv(PeriodId::new(0), "acct:a\t0.5\nacct:a\t0.4\n", "t"),
            Err(PersistError::CorruptFile { line: 2, .. })
        ));
        assert!(matches!(
            state_from_tsv(PeriodId::new(0), "acct:a 0.5\n", "t"),
            Err(PersistError::CorruptFile { line: 1, .. })
        ));
        // empty file is a valid empty state
        let s = state_from_tsv(PeriodId::new(0), "", "t").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn fs_store_round_trips_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = FsStore::open(dir.path(), 86_400).unwrap();
        let g = sample_graph();
        store.save_subgraph(&g).unwrap();
        assert!(store.has_subgraph(PeriodId::new(0)).unwrap());
        let loaded = store.load_subgraph(PeriodId::new(0)).unwrap();
        assert_eq!(g, loaded);
        store.save_subgraph(&loaded).unwrap();
        let bytes = fs::read_to_string(dir.path().join("evidence/0.tsv")).unwrap();
        assert_eq!(bytes, subgraph_to_tsv(&g).unwrap());

        let s = state(0, &[("alice", 0.6)]);
        store.save_state(&s).unwrap();
        assert_eq!(store.load_state(PeriodId::new(0)).unwrap(), s);

        // no temp files left behind
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("evidence"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n.to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn fs_store_missing_files_map_to_dedicated_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsStore::open(dir.path(), 86_400).unwrap();
        assert!(matches!(
            store.load_subgraph(PeriodId::new(9)),
            Err(PersistError::UnknownPeriod(_))
        ));
        assert!(matches!(
            store.load_state(PeriodId::new(9)),
            Err(PersistError::MissingState(_))
        ));
        assert!(!store.has_subgraph(PeriodId::new(9)).unwrap());
    }

    #[test]
    fn period_listings_are_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = FsStore::open(dir.path(), 86_400).unwrap();
        for p in [5, -1, 2] {
            let mut g = TemporalSubgraph::new(PeriodId::new(p), 86_400);
            g.seal();
            store.save_subgraph(&g).unwrap();
        }
        let periods = store.evidence_periods().unwrap();
        assert_eq!(
            periods,
            vec![PeriodId::new(-1), PeriodId::new(2), PeriodId::new(5)]
        );
        assert!(store.state_periods().unwrap().is_empty());
    }

    #[test]
    fn export_two_periods_golden() {
        let mut states = MemStore::new(86_400);
        states.save_state(&state(0, &[("a", 0.5)])).unwrap();
        states.save_state(&state(1, &[("a", 0.4)])).unwrap();
        let a = [NodeId::account("a").unwrap()];
        let csv = export_dynamics(&states, &a, PeriodId::new(0), PeriodId::new(1), 0.5).unwrap();
        assert_eq!(
            csv,
            "period,account,reputation\n0,acct:a,0.500000000000\n1,acct:a,0.400000000000\n"
        );
    }

    #[test]
    fn export_reports_unseen_accounts_at_default() {
        let mut states = MemStore::new(86_400);
        states.save_state(&state(0, &[("a", 0.9)])).unwrap();
        let accounts = [
            NodeId::account("ghost").unwrap(),
            NodeId::account("a").unwrap(),
        ];
        let csv =
            export_dynamics(&states, &accounts, PeriodId::new(0), PeriodId::new(0), 0.5).unwrap();
        // account order is canonical regardless of argument order
        assert_eq!(
            csv,
            "period,account,reputation\n0,acct:a,0.900000000000\n0,acct:ghost,0.500000000000\n"
        );
    }

    #[test]
    fn export_empty_range_and_missing_state() {
        let states = MemStore::new(86_400);
        let a = [NodeId::account("a").unwrap()];
        let csv = export_dynamics(&states, &a, PeriodId::new(5), PeriodId::new(3), 0.5).unwrap();
        assert_eq!(csv, "period,account,reputation\n");
        assert!(matches!(
            export_dynamics(&states, &a, PeriodId::new(0), PeriodId::new(0), 0.5),
            Err(PersistError::MissingState(_))
        ));
    }
}
