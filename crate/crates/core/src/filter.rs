//! State match filtering of generated candidates.
//!
//! A candidate is kept when every slot of the act appears in it and every
//! value it conveys agrees with the act. [`RuleFilter`] does this with
//! keyword rules; [`RemoteFilter`] asks an external classifier for the
//! per-slot appearance and gate decisions over the JSON-lines protocol:
//!
//! ```text
//! -> {"id":1,"system_utterance":"...","user_utterance":"...","slots":[{"slot":"hotel-parking","kind":"bool"}]}
//! <- {"id":1,"results":[{"slot":"hotel-parking","appears":true,"gate":"yes"}]}
//! ```

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actgen::TurnContext;
use crate::corpus::{ActItem, CorefList, SlotName, SlotValueDict, UserAct};
use crate::genbridge::{CandidateSet, PhraseLexicon};
use crate::text::{clauses, collapse, contains_phrase, normalize, token_positions, tokens};
use crate::wire::{Connection, Endpoint, Pool, WireError};

pub const DONTCARE_PHRASES: [&str; 6] = [
    "dontcare",
    "don't care",
    "do not care",
    "doesn't matter",
    "any",
    "anything is fine",
];

pub const NEGATORS: [&str; 10] = [
    "no", "not", "don't", "dont", "without", "never", "doesn't", "won't", "neither", "nor",
];

/// Tokens before a keyword searched for a negator.
pub const NEGATION_WINDOW: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Bool,
    Span,
}

impl SlotKind {
    pub fn of(slot: &SlotName, dict: &SlotValueDict) -> SlotKind {
        if dict.is_boolean(slot) {
            SlotKind::Bool
        } else {
            SlotKind::Span
        }
    }
}

/// Slot gate class. Boolean slots use {none, dontcare, yes, no}; span
/// slots use {none, dontcare, value}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateClass {
    None,
    Dontcare,
    Yes,
    No,
    Value,
}

impl GateClass {
    pub fn allowed(kind: SlotKind) -> &'static [GateClass] {
        match kind {
            SlotKind::Bool => &[GateClass::None, GateClass::Dontcare, GateClass::Yes, GateClass::No],
            SlotKind::Span => &[GateClass::None, GateClass::Dontcare, GateClass::Value],
        }
    }

    pub fn belongs_to(self, kind: SlotKind) -> bool {
        Self::allowed(kind).contains(&self)
    }
}

impl fmt::Display for GateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateClass::None => "none",
            GateClass::Dontcare => "dontcare",
            GateClass::Yes => "yes",
            GateClass::No => "no",
            GateClass::Value => "value",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    MissingSlot,
    ValueMismatch,
    GateMismatch,
    MissingCorefPhrase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub slot: SlotName,
    pub reason: FailureReason,
}

/// Outcome of checking one candidate. `passed()` is true exactly when
/// there are no failures.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub failures: Vec<Failure>,
}

impl FilterVerdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, slot: &SlotName, reason: FailureReason) {
        let f = Failure { slot: slot.clone(), reason };
        if !self.failures.contains(&f) {
            self.failures.push(f);
        }
    }

    fn merge(mut self, other: FilterVerdict) -> FilterVerdict {
        for f in other.failures {
            self.fail(&f.slot, f.reason);
        }
        self
    }
}

/// Resources the rule checks read from.
#[derive(Clone, Copy)]
pub struct FilterDeps<'a> {
    pub dict: &'a SlotValueDict,
    pub coref: &'a CorefList,
    pub lexicon: &'a PhraseLexicon,
}

fn has_dontcare(text: &str) -> bool {
    DONTCARE_PHRASES.iter().any(|p| contains_phrase(text, p))
}

fn has_keyword(text: &str, keywords: &[String]) -> bool {
    keywords.iter().any(|k| contains_phrase(text, k))
}

fn negated(clause: &str, keywords: &[String]) -> bool {
    let toks = tokens(clause);
    keywords.iter().any(|k| {
        token_positions(&toks, k).into_iter().any(|pos| {
            toks[pos.saturating_sub(NEGATION_WINDOW)..pos]
                .iter()
                .any(|t| NEGATORS.contains(t))
        })
    })
}

fn mentions_value(text: &str, slot: &SlotName, deps: &FilterDeps) -> bool {
    let values = deps.dict.values(slot).unwrap_or_default();
    values
        .iter()
        .filter(|v| v.as_str() != "dontcare")
        .any(|v| contains_phrase(text, v))
        || deps.coref.all_phrases(slot).any(|p| contains_phrase(text, p))
}

/// Rule-based slot gate. Only the candidate's clauses that mention one of
/// the slot's keywords are considered; when none does, the system
/// utterance supplies the slot (e.g. a yes/no answer to a question).
pub fn gate_rule(system_utterance: &str, candidate: &str, slot: &SlotName, deps: &FilterDeps) -> GateClass {
    let kind = SlotKind::of(slot, deps.dict);
    let keywords = deps.lexicon.keywords(slot);
    let cand = normalize(candidate);
    let relevant: Vec<&str> = clauses(&cand)
        .into_iter()
        .filter(|c| has_keyword(c, &keywords))
        .collect();
    if !relevant.is_empty() {
        if relevant.iter().any(|c| has_dontcare(c)) {
            return GateClass::Dontcare;
        }
        return match kind {
            SlotKind::Bool if relevant.iter().any(|c| negated(c, &keywords)) => GateClass::No,
            SlotKind::Bool => GateClass::Yes,
            SlotKind::Span if relevant.iter().any(|c| mentions_value(c, slot, deps)) => GateClass::Value,
            SlotKind::Span => GateClass::None,
        };
    }
    let system = normalize(system_utterance);
    if has_keyword(&system, &keywords) && has_dontcare(&cand) {
        return GateClass::Dontcare;
    }
    match kind {
        SlotKind::Bool if !has_keyword(&system, &keywords) => GateClass::None,
        SlotKind::Bool => match tokens(&cand).first() {
            Some(&"yes") => GateClass::Yes,
            Some(&"no") => GateClass::No,
            _ => GateClass::None,
        },
        SlotKind::Span if mentions_value(&cand, slot, deps) => GateClass::Value,
        SlotKind::Span => GateClass::None,
    }
}

/// Gate class an act item should produce.
pub fn expected_gate(slot: &SlotName, value: &str, dict: &SlotValueDict) -> GateClass {
    match (SlotKind::of(slot, dict), value) {
        (_, "dontcare") => GateClass::Dontcare,
        (SlotKind::Bool, "yes") => GateClass::Yes,
        (SlotKind::Bool, "no") => GateClass::No,
        (SlotKind::Bool, _) => GateClass::None,
        (SlotKind::Span, _) => GateClass::Value,
    }
}

fn realized_by_keyword(item: &ActItem, dict: &SlotValueDict) -> bool {
    item.refer.is_none() && (item.value == "dontcare" || dict.is_boolean(&item.slot))
}

fn coref_phrase_present(text: &str, item: &ActItem, coref: &CorefList) -> bool {
    let Some(referred) = &item.refer else {
        return false;
    };
    coref
        .phrases(&item.slot, referred)
        .unwrap_or_default()
        .iter()
        .any(|p| contains_phrase(text, p))
}

/// Whether each act slot is realized in the candidate: its value for plain
/// items, a listed coreference phrase for refer items, a slot keyword for
/// boolean and dontcare items.
pub fn check_appearance(candidate: &str, act: &UserAct, deps: &FilterDeps) -> Vec<(SlotName, bool)> {
    let cand = normalize(candidate);
    act.items
        .iter()
        .map(|item| {
            let present = if item.refer.is_some() {
                coref_phrase_present(&cand, item, deps.coref)
            } else if realized_by_keyword(item, deps.dict) {
                has_keyword(&cand, &deps.lexicon.keywords(&item.slot))
            } else {
                contains_phrase(&cand, &collapse(&item.value))
            };
            (item.slot.clone(), present)
        })
        .collect()
}

fn verbatim_and_coref(candidate: &str, act: &UserAct, deps: &FilterDeps) -> FilterVerdict {
    let cand = normalize(candidate);
    let mut verdict = FilterVerdict::default();
    for item in &act.items {
        if item.refer.is_some() {
            if !coref_phrase_present(&cand, item, deps.coref) {
                verdict.fail(&item.slot, FailureReason::MissingCorefPhrase);
            }
        } else if !realized_by_keyword(item, deps.dict) && !contains_phrase(&cand, &collapse(&item.value)) {
            verdict.fail(&item.slot, FailureReason::ValueMismatch);
        }
    }
    verdict
}

/// Value consistency: span values appear verbatim, boolean and dontcare
/// items get the expected gate, refer items carry a listed phrase.
pub fn check_consistency(system_utterance: &str, candidate: &str, act: &UserAct, deps: &FilterDeps) -> FilterVerdict {
    let mut verdict = verbatim_and_coref(candidate, act, deps);
    for item in act.items.iter().filter(|i| realized_by_keyword(i, deps.dict)) {
        let expected = expected_gate(&item.slot, &item.value, deps.dict);
        if gate_rule(system_utterance, candidate, &item.slot, deps) != expected {
            verdict.fail(&item.slot, FailureReason::GateMismatch);
        }
    }
    verdict
}

// ---------------------------------------------------------------------------
// Filters
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Wire(#[from] WireError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Rule,
    Neural,
}

pub trait StateFilter: Send + Sync {
    fn kind(&self) -> FilterKind;

    fn verdict(&self, system_utterance: &str, candidate: &str, act: &UserAct) -> Result<FilterVerdict, FilterError>;
}

pub struct RuleFilter {
    pub dict: SlotValueDict,
    pub coref: CorefList,
    pub lexicon: PhraseLexicon,
}

impl RuleFilter {
    pub fn deps(&self) -> FilterDeps<'_> {
        FilterDeps {
            dict: &self.dict,
            coref: &self.coref,
            lexicon: &self.lexicon,
        }
    }
}

/// Appearance and consistency checks combined.
pub fn rule_verdict(system_utterance: &str, candidate: &str, act: &UserAct, deps: &FilterDeps) -> FilterVerdict {
    let mut appearance = FilterVerdict::default();
    for (slot, present) in check_appearance(candidate, act, deps) {
        if !present {
            appearance.fail(&slot, FailureReason::MissingSlot);
        }
    }
    appearance.merge(check_consistency(system_utterance, candidate, act, deps))
}

impl StateFilter for RuleFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Rule
    }

    fn verdict(&self, system_utterance: &str, candidate: &str, act: &UserAct) -> Result<FilterVerdict, FilterError> {
        Ok(rule_verdict(system_utterance, candidate, act, &self.deps()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotQuery {
    pub slot: SlotName,
    pub kind: SlotKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRequest {
    pub id: u64,
    pub system_utterance: String,
    pub user_utterance: String,
    pub slots: Vec<SlotQuery>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotResult {
    pub slot: SlotName,
    pub appears: bool,
    pub gate: GateClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<Vec<SlotResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One classifier exchange. Results are returned in the order of `slots`;
/// a missing slot, an unknown slot or a gate outside the slot's class set
/// is a malformed response.
pub fn classify_remote(conn: &mut Connection, req: &FilterRequest) -> Result<Vec<SlotResult>, FilterError> {
    let resp: FilterResponse = conn.call(req)?;
    let endpoint = conn.endpoint().clone();
    let malformed = |conn: &mut Connection, message: String| {
        conn.mark_broken();
        FilterError::Wire(WireError::Malformed {
            endpoint: endpoint.clone(),
            line: String::new(),
            message,
        })
    };
    if resp.id != req.id {
        conn.mark_broken();
        return Err(WireError::IdMismatch {
            endpoint: endpoint.clone(),
            expected: req.id,
            got: resp.id,
        }
        .into());
    }
    if let Some(message) = resp.error {
        return Err(WireError::Remote { endpoint, message }.into());
    }
    let Some(results) = resp.results else {
        return Err(malformed(conn, "response has neither `results` nor `error`".into()));
    };
    let mut ordered = Vec::with_capacity(req.slots.len());
    for q in &req.slots {
        let Some(r) = results.iter().find(|r| r.slot == q.slot) else {
            return Err(malformed(conn, format!("no result for slot `{}`", q.slot)));
        };
        if !r.gate.belongs_to(q.kind) {
            return Err(malformed(conn, format!("gate `{}` is not a class of {:?} slot `{}`", r.gate, q.kind, q.slot)));
        }
        ordered.push(r.clone());
    }
    if let Some(extra) = results.iter().find(|r| !req.slots.iter().any(|q| q.slot == r.slot)) {
        return Err(malformed(conn, format!("result for unrequested slot `{}`", extra.slot)));
    }
    Ok(ordered)
}

/// Filter backed by an external classifier. The classifier's appearance
/// and gate outputs replace the keyword rules; verbatim value and
/// coreference phrase checks still apply.
pub struct RemoteFilter {
    pool: Pool,
    pub dict: SlotValueDict,
    pub coref: CorefList,
    pub lexicon: PhraseLexicon,
}

impl RemoteFilter {
    pub fn new(endpoint: Endpoint, timeout: Duration, dict: SlotValueDict, coref: CorefList, lexicon: PhraseLexicon) -> Self {
        RemoteFilter {
            pool: Pool::new(endpoint, timeout),
            dict,
            coref,
            lexicon,
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        self.pool.endpoint()
    }
}

/// Verdict from classifier results: a slot that does not appear (or whose
/// gate is none) is missing; otherwise its gate must equal the act's.
pub fn remote_verdict(results: &[SlotResult], candidate: &str, act: &UserAct, deps: &FilterDeps) -> FilterVerdict {
    let mut verdict = FilterVerdict::default();
    for item in &act.items {
        match results.iter().find(|r| r.slot == item.slot) {
            Some(r) if r.appears && r.gate != GateClass::None => {
                if r.gate != expected_gate(&item.slot, &item.value, deps.dict) {
                    verdict.fail(&item.slot, FailureReason::GateMismatch);
                }
            }
            _ => verdict.fail(&item.slot, FailureReason::MissingSlot),
        }
    }
    verdict.merge(verbatim_and_coref(candidate, act, deps))
}

impl StateFilter for RemoteFilter {
    fn kind(&self) -> FilterKind {
        FilterKind::Neural
    }

    fn verdict(&self, system_utterance: &str, candidate: &str, act: &UserAct) -> Result<FilterVerdict, FilterError> {
        let req = FilterRequest {
            id: self.pool.next_id(),
            system_utterance: system_utterance.to_string(),
            user_utterance: candidate.to_string(),
            slots: act
                .items
                .iter()
                .map(|i| SlotQuery {
                    slot: i.slot.clone(),
                    kind: SlotKind::of(&i.slot, &self.dict),
                })
                .collect(),
        };
        let results = self.pool.with_connection(|conn| Ok(classify_remote(conn, &req)))??;
        let deps = FilterDeps {
            dict: &self.dict,
            coref: &self.coref,
            lexicon: &self.lexicon,
        };
        Ok(remote_verdict(&results, candidate, act, &deps))
    }
}

/// First candidate (best first) that passes, with its 1-based index as the
/// number of attempts. When none passes the attempts equal the number of
/// candidates.
pub fn filter_candidates(
    candidates: &CandidateSet,
    ctx: &TurnContext,
    act: &UserAct,
    filter: &dyn StateFilter,
) -> Result<(Option<String>, usize), FilterError> {
    for (i, c) in candidates.as_slice().iter().enumerate() {
        if filter.verdict(&ctx.system_utterance, c, act)?.passed() {
            return Ok((Some(c.clone()), i + 1));
        }
    }
    Ok((None, candidates.len()))
}
