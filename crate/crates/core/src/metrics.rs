//! Tracker evaluation and slot statistics: joint goal accuracy, per-class
//! slot F1 and slot distribution reports.
//!
//! A gold update at turn `t` is a slot whose gold value differs from its
//! value at `t - 1` (absent at `t = 0`). Values `""` and `"none"` count as
//! absent and values compare after lowercasing and whitespace collapsing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugRecord;
use crate::corpus::{Corpus, CorpusError, DialogueState, Domain, SlotName, SlotValueDict, SystemActKind, Turn, UserAct};
use crate::text::{collapse, contains_phrase, normalize};

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub dialogue_id: String,
    pub turn_id: usize,
    pub state: DialogueState,
}

/// Predicted cumulative state per (dialogue id, turn id).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictionSet(BTreeMap<(String, usize), DialogueState>);

impl PredictionSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse JSON lines; blank lines are ignored.
    pub fn from_jsonl(text: &str, origin: &str) -> Result<Self, CorpusError> {
        let mut set = PredictionSet::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let de = &mut serde_json::Deserializer::from_str(line);
            let p: PredictionLine = serde_path_to_error::deserialize(de).map_err(|e| {
                let field = e.path().to_string();
                let inner = e.into_inner();
                CorpusError::Parse {
                    path: origin.to_string(),
                    line: n + 1,
                    column: inner.column(),
                    field,
                    message: inner.to_string(),
                }
            })?;
            set.insert(p.dialogue_id, p.turn_id, p.state);
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_jsonl(&text, &path.display().to_string())
    }

    /// The corpus's own belief states as predictions.
    pub fn from_gold(corpus: &Corpus) -> Self {
        let mut set = PredictionSet::new();
        for d in &corpus.dialogues {
            for t in &d.turns {
                set.insert(d.id.clone(), t.turn_id, t.belief_state.clone());
            }
        }
        set
    }

    pub fn insert(&mut self, dialogue_id: String, turn_id: usize, state: DialogueState) {
        self.0.insert((dialogue_id, turn_id), state);
    }

    pub fn get(&self, dialogue_id: &str, turn_id: usize) -> Option<&DialogueState> {
        self.0.get(&(dialogue_id.to_string(), turn_id))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ((dialogue_id, turn_id), state) in &self.0 {
            let line = PredictionLine {
                dialogue_id: dialogue_id.clone(),
                turn_id: *turn_id,
                state: state.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("prediction serializes"));
            out.push('\n');
        }
        out
    }
}

/// State with normalized values and empty/"none" values dropped.
pub fn normalized_state(state: &DialogueState) -> BTreeMap<SlotName, String> {
    state
        .iter()
        .map(|(s, v)| (s.clone(), collapse(v)))
        .filter(|(_, v)| !v.is_empty() && v != "none")
        .collect()
}

/// Fraction of corpus turns whose predicted state equals the gold state.
/// Turns without a prediction count as wrong; an empty corpus scores 0.
pub fn joint_goal_accuracy(preds: &PredictionSet, corpus: &Corpus) -> f64 {
    let mut total = 0usize;
    let mut correct = 0usize;
    for d in &corpus.dialogues {
        for t in &d.turns {
            total += 1;
            if let Some(p) = preds.get(&d.id, t.turn_id) {
                if normalized_state(p) == normalized_state(&t.belief_state) {
                    correct += 1;
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

// ---------------------------------------------------------------------------
// Slot classes
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotClass {
    Span,
    Inform,
    Dontcare,
    True,
    False,
    Refer,
}

impl SlotClass {
    pub const ALL: [SlotClass; 6] = [
        SlotClass::Span,
        SlotClass::Inform,
        SlotClass::Dontcare,
        SlotClass::True,
        SlotClass::False,
        SlotClass::Refer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SlotClass::Span => "span",
            SlotClass::Inform => "inform",
            SlotClass::Dontcare => "dontcare",
            SlotClass::True => "true",
            SlotClass::False => "false",
            SlotClass::Refer => "refer",
        }
    }
}

/// Class of `slot = value` at `turn`, by precedence refer, true/false,
/// dontcare, inform, span. Refer applies when the turn's user act item for
/// the slot has `refer` set and carries this value; inform when a system
/// recommend/inform act of the turn offered this exact value. Values that
/// fit nothing and are not in the user utterance are logged and counted as
/// span.
pub fn categorize_slot(turn: &Turn, slot: &SlotName, value: &str, dict: &SlotValueDict) -> SlotClass {
    let value = collapse(value);
    let referred = turn
        .user_act
        .item(slot)
        .is_some_and(|i| i.refer.is_some() && collapse(&i.value) == value);
    if referred {
        return SlotClass::Refer;
    }
    if dict.is_boolean(slot) {
        match value.as_str() {
            "yes" => return SlotClass::True,
            "no" => return SlotClass::False,
            _ => {}
        }
    }
    if value == "dontcare" {
        return SlotClass::Dontcare;
    }
    let offered = turn.system_acts.iter().any(|a| {
        matches!(a.kind, SystemActKind::Recommend | SystemActKind::Inform)
            && a.slot.as_ref() == Some(slot)
            && a.value.as_deref().map(collapse).as_deref() == Some(value.as_str())
    });
    if offered {
        return SlotClass::Inform;
    }
    if !contains_phrase(&normalize(&turn.user_utterance), &value) {
        log::warn!("`{slot}={value}` matches no slot class; counted as span");
    }
    SlotClass::Span
}

fn updates(
    current: &BTreeMap<SlotName, String>,
    previous: &BTreeMap<SlotName, String>,
) -> BTreeMap<SlotName, String> {
    current
        .iter()
        .filter(|(s, v)| previous.get(*s) != Some(*v))
        .map(|(s, v)| (s.clone(), v.clone()))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub f1: f64,
}

impl ClassScore {
    fn finish(&mut self) {
        let denom = 2 * self.tp + self.fp + self.fn_;
        self.f1 = if self.tp == 0 { 0.0 } else { 2.0 * self.tp as f64 / denom as f64 };
    }
}

/// Per-class F1 over gold updates.
///
/// For each gold update `(s, g)` of class `c`: a true positive of `c` when
/// the predicted state at that turn holds `g`, else a false negative of
/// `c`. A false positive is counted for every slot that is a gold update or
/// a predicted update (value differs from the previous predicted turn) and
/// whose predicted value is present and differs from gold; it is charged
/// to the class of the predicted value. Classes that never occur are left
/// out of the map.
pub fn slot_class_f1(preds: &PredictionSet, corpus: &Corpus, dict: &SlotValueDict) -> BTreeMap<SlotClass, ClassScore> {
    let mut scores: BTreeMap<SlotClass, ClassScore> = BTreeMap::new();
    let empty = BTreeMap::new();
    for d in &corpus.dialogues {
        let mut gold_prev = BTreeMap::new();
        let mut pred_prev = BTreeMap::new();
        for t in &d.turns {
            let gold = normalized_state(&t.belief_state);
            let pred = preds.get(&d.id, t.turn_id).map(normalized_state).unwrap_or_else(|| empty.clone());
            let gold_up = updates(&gold, &gold_prev);
            let pred_up = updates(&pred, &pred_prev);
            for (s, g) in &gold_up {
                let score = scores.entry(categorize_slot(t, s, g, dict)).or_default();
                if pred.get(s) == Some(g) {
                    score.tp += 1;
                } else {
                    score.fn_ += 1;
                }
            }
            let touched: BTreeSet<&SlotName> = gold_up.keys().chain(pred_up.keys()).collect();
            for s in touched {
                if let Some(p) = pred.get(s) {
                    if gold.get(s) != Some(p) {
                        scores.entry(categorize_slot(t, s, p, dict)).or_default().fp += 1;
                    }
                }
            }
            gold_prev = gold;
            pred_prev = pred;
        }
    }
    for s in scores.values_mut() {
        s.finish();
    }
    scores
}

pub fn render_f1_table(scores: &BTreeMap<SlotClass, ClassScore>) -> String {
    let mut out = format!("{:<10} {:>6} {:>6} {:>6} {:>8}\n", "class", "tp", "fp", "fn", "f1");
    for (c, s) in scores {
        let _ = writeln!(out, "{:<10} {:>6} {:>6} {:>6} {:>8.4}", c.as_str(), s.tp, s.fp, s.fn_, s.f1);
    }
    out
}

// ---------------------------------------------------------------------------
// Slot distribution
// ---------------------------------------------------------------------------

/// Surface kind of an updated value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Span,
    True,
    False,
    Dontcare,
    Refer,
}

pub fn value_kind(slot: &SlotName, value: &str, refer: bool, dict: &SlotValueDict) -> ValueKind {
    if refer {
        return ValueKind::Refer;
    }
    match value {
        "dontcare" => ValueKind::Dontcare,
        "yes" if dict.is_boolean(slot) => ValueKind::True,
        "no" if dict.is_boolean(slot) => ValueKind::False,
        _ => ValueKind::Span,
    }
}

/// The slot updates of one user turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnProfile {
    pub dialogue_id: String,
    pub turn_id: usize,
    pub updates: Vec<(SlotName, ValueKind)>,
    /// First domain the dialogue's user updates touched.
    pub first_domain: Option<Domain>,
}

impl TurnProfile {
    fn domains(&self) -> BTreeSet<Domain> {
        self.updates.iter().map(|(s, _)| s.domain()).collect()
    }

    pub fn multi_domain(&self) -> bool {
        let domains = self.domains();
        domains.len() >= 2 || self.first_domain.is_some_and(|f| domains.iter().any(|d| *d != f))
    }

    pub fn has(&self, kind: ValueKind) -> bool {
        self.updates.iter().any(|(_, k)| *k == kind)
    }
}

fn first_domain(updates: &[Vec<(SlotName, ValueKind)>]) -> Option<Domain> {
    updates.iter().find_map(|u| u.first().map(|(s, _)| s.domain()))
}

/// Profiles of corpus turns; the updates are belief-state changes, with
/// refer taken from the user act.
pub fn profiles_from_corpus(corpus: &Corpus, dict: &SlotValueDict) -> Vec<TurnProfile> {
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        let mut prev = BTreeMap::new();
        let mut per_turn = Vec::new();
        for t in &d.turns {
            let cur = normalized_state(&t.belief_state);
            let ups = updates(&cur, &prev)
                .into_iter()
                .map(|(s, v)| {
                    let refer = t.user_act.item(&s).is_some_and(|i| i.refer.is_some() && collapse(&i.value) == v);
                    let kind = value_kind(&s, &v, refer, dict);
                    (s, kind)
                })
                .collect();
            per_turn.push(ups);
            prev = cur;
        }
        let first = first_domain(&per_turn);
        out.extend(d.turns.iter().zip(per_turn).map(|(t, updates)| TurnProfile {
            dialogue_id: d.id.clone(),
            turn_id: t.turn_id,
            updates,
            first_domain: first,
        }));
    }
    out
}

fn act_updates(act: &UserAct, dict: &SlotValueDict) -> Vec<(SlotName, ValueKind)> {
    act.items
        .iter()
        .map(|i| (i.slot.clone(), value_kind(&i.slot, &i.value, i.refer.is_some(), dict)))
        .collect()
}

/// Profiles of augmented turns; the updates are the augmented act's items.
/// The first domain of each dialogue comes from `source` when it has the
/// dialogue, else from the dialogue's first record.
pub fn profiles_from_records(records: &[AugRecord], source: Option<&Corpus>, dict: &SlotValueDict) -> Vec<TurnProfile> {
    let mut firsts: BTreeMap<String, Option<Domain>> = BTreeMap::new();
    if let Some(corpus) = source {
        for p in profiles_from_corpus(corpus, dict) {
            firsts.entry(p.dialogue_id).or_insert(p.first_domain);
        }
    }
    let mut out = Vec::new();
    for r in records {
        let updates = act_updates(&r.augmented_act, dict);
        let first = *firsts
            .entry(r.dialogue_id.clone())
            .or_insert_with(|| updates.first().map(|(s, _)| s.domain()));
        out.push(TurnProfile {
            dialogue_id: r.dialogue_id.clone(),
            turn_id: r.turn_id,
            updates,
            first_domain: first,
        });
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountUnit {
    #[default]
    Turn,
    Slot,
}

/// Percentages of turns (or slot updates) showing each phenomenon.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub unit: CountUnit,
    /// Number of turns (or slot updates) the percentages are over.
    pub count: usize,
    pub span: f64,
    pub confirm_true: f64,
    pub confirm_false: f64,
    pub dontcare: f64,
    pub coreference: f64,
    pub multi_domain: f64,
}

fn pct(n: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * n as f64 / total as f64
    }
}

/// With unit `turn`, each percentage is the share of turns with at least
/// one update of that kind; multi-domain turns are those whose updates
/// span two domains or leave the dialogue's first domain. With unit
/// `slot`, each is the share of slot updates of that kind, and an update
/// is multi-domain when its own domain differs from the first domain or it
/// sits in a multi-domain turn.
pub fn slot_distribution(profiles: &[TurnProfile], unit: CountUnit) -> DistributionReport {
    let mut counts = [0usize; 6];
    let mut total = 0;
    let kinds = [ValueKind::Span, ValueKind::True, ValueKind::False, ValueKind::Dontcare, ValueKind::Refer];
    for p in profiles {
        match unit {
            CountUnit::Turn => {
                total += 1;
                for (i, k) in kinds.iter().enumerate() {
                    counts[i] += usize::from(p.has(*k));
                }
                counts[5] += usize::from(p.multi_domain());
            }
            CountUnit::Slot => {
                let turn_multi = p.domains().len() >= 2;
                for (s, k) in &p.updates {
                    total += 1;
                    counts[kinds.iter().position(|x| x == k).expect("known kind")] += 1;
                    let off_first = p.first_domain.is_some_and(|f| s.domain() != f);
                    counts[5] += usize::from(turn_multi || off_first);
                }
            }
        }
    }
    DistributionReport {
        unit,
        count: total,
        span: pct(counts[0], total),
        confirm_true: pct(counts[1], total),
        confirm_false: pct(counts[2], total),
        dontcare: pct(counts[3], total),
        coreference: pct(counts[4], total),
        multi_domain: pct(counts[5], total),
    }
}

pub fn render_distribution_table(r: &DistributionReport) -> String {
    let unit = match r.unit {
        CountUnit::Turn => "turns",
        CountUnit::Slot => "slot updates",
    };
    let mut out = format!("{:<14} {:>8}\n", "category", "%");
    for (name, v) in [
        ("span", r.span),
        ("confirm_true", r.confirm_true),
        ("confirm_false", r.confirm_false),
        ("dontcare", r.dontcare),
        ("coreference", r.coreference),
        ("multi_domain", r.multi_domain),
    ] {
        let _ = writeln!(out, "{name:<14} {v:>8.2}");
    }
    let _ = writeln!(out, "{:<14} {:>8}", unit, r.count);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ActItem, ActType, Dialogue, SystemAct};

    fn slot(s: &str) -> SlotName {
        s.parse().unwrap()
    }

    fn state(pairs: &[(&str, &str)]) -> DialogueState {
        pairs.iter().map(|(s, v)| (slot(s), v.to_string())).collect()
    }

    fn turn(id: usize, utterance: &str, belief: &[(&str, &str)]) -> Turn {
        Turn {
            turn_id: id,
            system_utterance: String::new(),
            system_acts: Vec::new(),
            user_utterance: utterance.into(),
            user_act: UserAct::default(),
            belief_state: state(belief),
        }
    }

    fn corpus() -> Corpus {
        Corpus {
            dialogues: vec![Dialogue {
                id: "d".into(),
                turns: vec![
                    turn(0, "a cheap hotel", &[("hotel-price", "cheap")]),
                    turn(1, "with parking", &[("hotel-price", "cheap"), ("hotel-parking", "yes")]),
                ],
            }],
        }
    }

    #[test]
    fn jga_basics() {
        let c = corpus();
        let mut p = PredictionSet::from_gold(&c);
        assert_eq!(joint_goal_accuracy(&p, &c), 1.0);
        p.insert("d".into(), 1, state(&[("hotel-price", "cheap")]));
        assert_eq!(joint_goal_accuracy(&p, &c), 0.5);
        assert_eq!(joint_goal_accuracy(&PredictionSet::new(), &c), 0.0);
        assert_eq!(joint_goal_accuracy(&p, &Corpus::default()), 0.0);
    }

    #[test]
    fn jga_ignores_case_and_none() {
        let c = corpus();
        let mut p = PredictionSet::from_gold(&c);
        p.insert("d".into(), 0, state(&[("hotel-price", "Cheap"), ("hotel-area", "none")]));
        assert_eq!(joint_goal_accuracy(&p, &c), 1.0);
    }

    #[test]
    fn categorize_precedence() {
        let dict = SlotValueDict::bundled();
        let mut t = turn(0, "i want to arrive by my reservation", &[]);
        assert_eq!(categorize_slot(&t, &slot("hotel-parking"), "yes", &dict), SlotClass::True);
        assert_eq!(categorize_slot(&t, &slot("hotel-parking"), "no", &dict), SlotClass::False);
        assert_eq!(categorize_slot(&t, &slot("hotel-area"), "dontcare", &dict), SlotClass::Dontcare);
        let mut item = ActItem::new(ActType::Inform, slot("taxi-arrive"), "17:26");
        item.refer = Some(slot("restaurant-time"));
        t.user_act.items.push(item);
        assert_eq!(categorize_slot(&t, &slot("taxi-arrive"), "17:26", &dict), SlotClass::Refer);
        t.system_acts.push(SystemAct::recommend(slot("restaurant-name"), "pho bistro"));
        assert_eq!(categorize_slot(&t, &slot("restaurant-name"), "pho bistro", &dict), SlotClass::Inform);
        assert_eq!(categorize_slot(&t, &slot("restaurant-name"), "nandos", &dict), SlotClass::Span);
    }

    #[test]
    fn f1_perfect_and_empty() {
        let c = corpus();
        let dict = SlotValueDict::bundled();
        let perfect = slot_class_f1(&PredictionSet::from_gold(&c), &c, &dict);
        assert_eq!(perfect.keys().copied().collect::<Vec<_>>(), vec![SlotClass::Span, SlotClass::True]);
        assert!(perfect.values().all(|s| s.f1 == 1.0));
        let empty = slot_class_f1(&PredictionSet::new(), &c, &dict);
        assert!(empty.values().all(|s| s.f1 == 0.0 && s.fn_ == 1));
    }

    #[test]
    fn distribution_empty() {
        let r = slot_distribution(&[], CountUnit::Turn);
        assert_eq!(r.count, 0);
        assert_eq!(r.span, 0.0);
        assert_eq!(r.multi_domain, 0.0);
    }

    #[test]
    fn prediction_jsonl_round_trip() {
        let p = PredictionSet::from_gold(&corpus());
        let back = PredictionSet::from_jsonl(&p.to_jsonl(), "mem").unwrap();
        assert_eq!(back, p);
        let err = PredictionSet::from_jsonl("{\"dialogue_id\":\"d\"}\n", "mem").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
    }
}
