//! One live mechanism run driven by operator requests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sem_core::audit::{envy_check, greedy_check};
use sem_core::demand::ShockSample;
use sem_core::equilibrium::SolverConfig;
use sem_core::market::{parse_market_spec, serialize_market_spec, Instance, MarketSpec};
use sem_core::mechanism::{advance, quote, realize, run_shocks, Mechanism, Quote, RunTrace, SemState};
use sem_core::seeds;

use crate::error::ApiError;

/// An arriving agent's report: a listed type or tiers of object names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Type {
        #[serde(rename = "type")]
        ty: String,
    },
    Tiers {
        tiers: Vec<Vec<String>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Open,
    Terminated,
}

/// Mutating operator actions; replaying them on a fresh session rebuilds it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Create { id: String, spec: String, seed: u64, solver: SolverConfig },
    Arrivals { reports: Vec<Report> },
    Realize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub at_ms: u128,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalLottery {
    #[serde(rename = "type")]
    pub ty: String,
    pub lottery: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuoteView {
    pub period: usize,
    pub prices: Vec<f64>,
    pub clearing_error: f64,
    pub iterations: usize,
    pub arrivals: Vec<ArrivalLottery>,
    pub renormalized: bool,
    pub count_deviation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub status: Status,
    pub seed: u64,
    pub period: usize,
    pub horizon: usize,
    pub objects: Vec<String>,
    pub remaining: Vec<u64>,
    pub types: Vec<String>,
    pub pending: Option<QuoteView>,
    pub periods_played: usize,
    pub state_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizeView {
    pub period: usize,
    pub assignment: Vec<String>,
    pub session: SessionView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub greedy: bool,
    pub envy_free: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceView {
    pub trace: RunTrace,
    /// Present once the session has terminated.
    pub audit: Option<AuditVerdict>,
}

/// What-if input: a full hypothetical arrival set, or the pending arrivals
/// with one report replaced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    #[serde(default)]
    pub arrivals: Option<Vec<Report>>,
    #[serde(default)]
    pub replace: Option<Replacement>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub index: usize,
    pub report: Report,
}

struct Pending {
    reports: Vec<Report>,
    arrivals: Vec<Instance>,
    quote: Quote,
}

pub struct Session {
    id: String,
    spec: MarketSpec,
    seed: u64,
    solver: SolverConfig,
    shocks: ShockSample,
    state: SemState,
    pending: Option<Pending>,
    trace: RunTrace,
    log: Vec<LogEntry>,
}

fn now_ms() -> u128 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

impl Session {
    pub fn create(id: String, spec_doc: &str, seed: u64, solver: SolverConfig) -> Result<Session, ApiError> {
        let spec = parse_market_spec(spec_doc).map_err(ApiError::invalid_spec)?;
        let shocks = run_shocks(&spec, seed, &solver);
        let mut s = Session {
            id: id.clone(),
            state: SemState::new(&spec),
            trace: RunTrace::new(Mechanism::Sem, seed, &spec),
            spec,
            seed,
            solver: solver.clone(),
            shocks,
            pending: None,
            log: Vec::new(),
        };
        s.record(Action::Create { id, spec: spec_doc.to_string(), seed, solver });
        Ok(s)
    }

    /// Rebuilds a session from its log. Timestamps are kept as logged.
    pub fn replay(entries: &[LogEntry]) -> Result<Session, ApiError> {
        let Some(LogEntry { action: Action::Create { id, spec, seed, solver }, .. }) = entries.first() else {
            return Err(ApiError::internal("log does not start with a create action"));
        };
        let mut s = Session::create(id.clone(), spec, *seed, solver.clone())?;
        for e in &entries[1..] {
            match &e.action {
                Action::Create { .. } => return Err(ApiError::internal("second create action in log")),
                Action::Arrivals { reports } => {
                    s.post_arrivals(reports.clone())?;
                }
                Action::Realize => {
                    s.realize()?;
                }
            }
        }
        s.log = entries.to_vec();
        Ok(s)
    }

    fn record(&mut self, action: Action) {
        self.log.push(LogEntry { seq: self.log.len() as u64, at_ms: now_ms(), action });
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn status(&self) -> Status {
        if self.state.terminated {
            Status::Terminated
        } else {
            Status::Open
        }
    }

    fn ensure_open(&self) -> Result<(), ApiError> {
        match self.status() {
            Status::Open => Ok(()),
            Status::Terminated => Err(ApiError::terminated(&self.id)),
        }
    }

    /// Hash of everything a response can depend on.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serialize_market_spec(&self.spec).as_bytes());
        h.update(serde_json::to_vec(&self.state).expect("state serializes"));
        if let Some(p) = &self.pending {
            h.update(serde_json::to_vec(&p.reports).expect("reports serialize"));
            h.update(serde_json::to_vec(&p.quote).expect("quote serializes"));
        }
        hex::encode(h.finalize())
    }

    fn quote_view(&self, spec: &MarketSpec, arrivals: &[Instance], q: &Quote) -> QuoteView {
        QuoteView {
            period: q.period,
            prices: q.prices.clone(),
            clearing_error: q.clearing_error,
            iterations: q.iterations,
            arrivals: arrivals.iter().zip(&q.lotteries).map(|(a, l)| ArrivalLottery { ty: spec.types[a.ty].id.clone(), lottery: l.clone() }).collect(),
            renormalized: q.renormalized,
            count_deviation: q.count_deviation,
        }
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            status: self.status(),
            seed: self.seed,
            period: self.state.period,
            horizon: self.spec.horizon,
            objects: self.spec.objects.names().to_vec(),
            remaining: self.state.remaining.clone(),
            types: self.spec.types.iter().map(|t| t.id.clone()).collect(),
            pending: self.pending.as_ref().map(|p| self.quote_view(&self.spec, &p.arrivals, &p.quote)),
            periods_played: self.state.history.len(),
            state_hash: self.state_hash(),
        }
    }

    /// Type indices for the reports, interning unlisted preferences into `spec`.
    fn resolve(spec: &mut MarketSpec, reports: &[Report]) -> Result<Vec<usize>, ApiError> {
        reports
            .iter()
            .enumerate()
            .map(|(k, r)| match r {
                Report::Type { ty } => {
                    spec.type_index(ty).ok_or_else(|| ApiError::bad_request(format!("arrivals[{k}]: unknown type `{ty}`")))
                }
                Report::Tiers { tiers } => {
                    let prefs = spec.parse_tiers(tiers).map_err(|e| ApiError::bad_request(format!("arrivals[{k}]: {e}")))?;
                    spec.intern_type(prefs).map_err(|e| ApiError::bad_request(format!("arrivals[{k}]: {e}")))
                }
            })
            .collect()
    }

    fn price(&self, spec: &MarketSpec, reports: &[Report]) -> Result<(Vec<Instance>, Quote, MarketSpec), ApiError> {
        let mut spec = spec.clone();
        let types = Self::resolve(&mut spec, reports)?;
        let q = quote(&spec, &self.state, &types, &self.shocks, &self.solver).map_err(ApiError::from_core)?;
        let period = self.state.period;
        let arrivals = types.iter().enumerate().map(|(index, &ty)| Instance { ty, period, index }).collect();
        Ok((arrivals, q, spec))
    }

    /// Quotes the period for these arrivals, replacing any pending ones.
    pub fn post_arrivals(&mut self, reports: Vec<Report>) -> Result<QuoteView, ApiError> {
        self.ensure_open()?;
        let (arrivals, q, spec) = self.price(&self.spec, &reports)?;
        self.spec = spec;
        let view = self.quote_view(&self.spec, &arrivals, &q);
        self.pending = Some(Pending { reports: reports.clone(), arrivals, quote: q });
        self.record(Action::Arrivals { reports });
        Ok(view)
    }

    /// Draws the pending assignment and moves to the next period.
    pub fn realize(&mut self) -> Result<RealizeView, ApiError> {
        self.ensure_open()?;
        let Some(p) = self.pending.take() else {
            return Err(ApiError::nothing_pending(&self.id));
        };
        let t = self.state.period;
        let record = match realize(&self.spec, &self.state, &p.arrivals, &p.quote, seeds::derive(self.seed, seeds::ROUNDING, t as u64)) {
            Ok(r) => r,
            Err(e) => {
                self.pending = Some(p);
                return Err(ApiError::from_core(e));
            }
        };
        self.state = advance(&self.spec, &self.state, &record);
        let assignment = record.assignment.iter().map(|&x| self.spec.objects.name(x).to_string()).collect();
        self.trace.spec = serialize_market_spec(&self.spec);
        self.trace.periods.push(record);
        self.trace.final_supply = self.state.remaining.clone();
        self.record(Action::Realize);
        Ok(RealizeView { period: t, assignment, session: self.view() })
    }

    /// Prices a hypothetical arrival set without touching the session.
    pub fn whatif(&self, w: &WhatIf) -> Result<QuoteView, ApiError> {
        self.ensure_open()?;
        let mut reports = match (&w.arrivals, &self.pending) {
            (Some(a), _) => a.clone(),
            (None, Some(p)) => p.reports.clone(),
            (None, None) => Vec::new(),
        };
        if let Some(r) = &w.replace {
            let slot = reports.get_mut(r.index).ok_or_else(|| ApiError::bad_request(format!("replace.index {} out of range", r.index)))?;
            *slot = r.report.clone();
        }
        let (arrivals, q, spec) = self.price(&self.spec, &reports)?;
        Ok(self.quote_view(&spec, &arrivals, &q))
    }

    pub fn trace(&self) -> TraceView {
        let audit = (self.status() == Status::Terminated).then(|| AuditVerdict {
            greedy: greedy_check(&self.spec, &self.trace).0,
            envy_free: envy_check(&self.spec, &self.trace).0,
        });
        TraceView { trace: self.trace.clone(), audit }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = include_str!("../../core/markets/example1.toml");
    const FOSTER: &str = include_str!("../../core/markets/foster_unit.toml");
    const FOSTER2: &str = include_str!("../../core/markets/foster.toml");

    fn ty(id: &str) -> Report {
        Report::Type { ty: id.into() }
    }

    fn tiers(t: &[&[&str]]) -> Report {
        Report::Tiers { tiers: t.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect() }
    }

    fn session(doc: &str, seed: u64) -> Session {
        Session::create("s".into(), doc, seed, SolverConfig::precise()).unwrap()
    }

    #[test]
    fn indifferent_first_arrival_gets_a_mix_of_both_objects() {
        let mut s = session(EXAMPLE1, 1);
        let q = s.post_arrivals(vec![ty("a")]).unwrap();
        let l = &q.arrivals[0].lottery;
        assert!((l[0] + l[1] - 1.0).abs() < 1e-6, "{l:?}");
        let r = s.realize().unwrap();
        assert!(r.assignment[0] == "x" || r.assignment[0] == "y");
        assert_eq!(r.session.remaining.iter().take(2).sum::<u64>(), 1);
        assert_eq!(r.session.period, 2);
    }

    #[test]
    fn empty_arrivals_price_the_forecast() {
        let mut s = session(FOSTER, 3);
        let q = s.post_arrivals(vec![]).unwrap();
        assert!(q.arrivals.is_empty());
        assert_eq!(q.prices.len(), 3);
        assert!(!q.renormalized);
    }

    #[test]
    fn reposting_replaces_pending_arrivals() {
        let mut s = session(FOSTER, 3);
        s.post_arrivals(vec![ty("c1")]).unwrap();
        let q = s.post_arrivals(vec![ty("c2")]).unwrap();
        assert_eq!(q.arrivals.len(), 1);
        assert_eq!(s.view().pending.unwrap().arrivals[0].ty, "c2");
        assert_eq!(s.view().period, 1);
    }

    #[test]
    fn exhausted_objects_leave_only_the_null_object() {
        let mut s = session(FOSTER, 5);
        // two periods of c1 arrivals exhaust home a
        while s.view().remaining[0] > 0 && s.status() == Status::Open {
            s.post_arrivals(vec![ty("c1")]).unwrap();
            s.realize().unwrap();
        }
        if s.status() == Status::Open {
            let q = s.post_arrivals(vec![tiers(&[&["a"]])]).unwrap();
            assert_eq!(q.arrivals[0].lottery[2], 1.0, "{q:?}");
        }
    }

    #[test]
    fn unlisted_preferences_are_admitted() {
        let mut s = session(FOSTER, 1);
        let q = s.post_arrivals(vec![tiers(&[&["b"], &["a"]]), ty("c1")]).unwrap();
        assert_eq!(q.arrivals[0].ty, "adhoc2");
        assert!((q.arrivals[0].lottery.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(s.view().types.len(), 3);
    }

    #[test]
    fn bad_reports_are_rejected_without_state_change() {
        let mut s = session(FOSTER, 1);
        let before = s.state_hash();
        let e = s.post_arrivals(vec![ty("nobody")]).unwrap_err();
        assert_eq!(e.code, "invalid_request");
        assert!(s.post_arrivals(vec![tiers(&[&["q"]])]).is_err());
        assert_eq!(s.state_hash(), before);
        assert_eq!(s.realize().unwrap_err().code, "nothing_pending");
    }

    #[test]
    fn whatif_matches_posting_and_mutates_nothing() {
        let mut s = session(FOSTER, 2);
        let posted = s.post_arrivals(vec![ty("c1"), ty("c2")]).unwrap();
        let before = s.state_hash();
        assert_eq!(s.whatif(&WhatIf::default()).unwrap(), posted);
        let swapped = s.whatif(&WhatIf { arrivals: None, replace: Some(Replacement { index: 1, report: tiers(&[&["b"], &["a"]]) }) }).unwrap();
        assert_eq!(swapped.arrivals[1].ty, "adhoc2");
        assert_eq!(s.state_hash(), before);
        assert_eq!(s.view().types.len(), 2);
    }

    #[test]
    fn an_extra_selective_arrival_does_not_lower_its_price() {
        let spec = sem_core::market::parse_market_spec(FOSTER).unwrap().replicate(4).unwrap();
        let doc = serialize_market_spec(&spec);
        for seed in 0..5 {
            let s = session(&doc, seed);
            let base: Vec<Report> = vec![ty("c1"), ty("c2"), ty("c2"), ty("c1")];
            let mut more = base.clone();
            more.push(ty("c1"));
            let a = s.whatif(&WhatIf { arrivals: Some(base), replace: None }).unwrap();
            let b = s.whatif(&WhatIf { arrivals: Some(more), replace: None }).unwrap();
            assert!(b.prices[0] >= a.prices[0] - 1e-9, "seed {seed}: {:?} vs {:?}", a.prices, b.prices);
        }
    }

    #[test]
    fn finished_sessions_reject_mutations_and_pass_the_audit() {
        let mut s = session(FOSTER, 9);
        for t in 0..4 {
            s.post_arrivals(vec![if t % 2 == 0 { ty("c1") } else { ty("c2") }]).unwrap();
            s.realize().unwrap();
            if s.status() == Status::Terminated {
                break;
            }
        }
        assert_eq!(s.status(), Status::Terminated);
        assert_eq!(s.post_arrivals(vec![]).unwrap_err().code, "session_terminated");
        assert_eq!(s.whatif(&WhatIf::default()).unwrap_err().code, "session_terminated");
        let t = s.trace();
        assert_eq!(t.audit, Some(AuditVerdict { greedy: true, envy_free: true }));
        t.trace.validate().unwrap();
    }

    #[test]
    fn replay_rebuilds_an_identical_session() {
        let mut s = session(FOSTER2, 4);
        s.post_arrivals(vec![ty("c2")]).unwrap();
        s.post_arrivals(vec![ty("c1"), tiers(&[&["b"], &["o"]])]).unwrap();
        s.realize().unwrap();
        s.post_arrivals(vec![ty("c2")]).unwrap();
        let r = Session::replay(s.log()).unwrap();
        assert_eq!(r.view(), s.view());
        assert_eq!(r.trace(), s.trace());
        assert_eq!(r.log(), s.log());
    }

    #[test]
    fn log_entries_round_trip_through_json() {
        let e = LogEntry { seq: 3, at_ms: 17, action: Action::Arrivals { reports: vec![ty("c1"), tiers(&[&["a", "b"]])] } };
        let line = serde_json::to_string(&e).unwrap();
        assert!(line.contains(r#""action":"arrivals""#), "{line}");
        assert_eq!(serde_json::from_str::<LogEntry>(&line).unwrap(), e);
    }
}
