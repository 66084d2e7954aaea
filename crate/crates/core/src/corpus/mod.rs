//! Canonical dialogue data model and the loaders for corpora, the slot-value
//! dictionary and the coreference list.
//!
//! Everything loaded here is immutable afterwards. Slot names are
//! canonicalized to lowercase `domain-slot`, values to lowercase with
//! collapsed whitespace.

pub mod multiwoz;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::collapse;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: at `{field}`: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("{} invariant violation(s); first: {}", .0.len(), .0[0])]
    Invariant(Vec<Violation>),
    #[error("malformed slot name `{0}` (expected `domain-slot` with a MultiWOZ domain)")]
    MalformedSlot(String),
    #[error("slot `{0}` has an empty value list")]
    EmptyValues(SlotName),
    #[error("boolean slot `{0}` has no value list")]
    UnknownBooleanSlot(SlotName),
    #[error("boolean slot `{slot}` has non-boolean value `{value}`")]
    NonBooleanValue { slot: SlotName, value: String },
    #[error("slot `{0}` refers to itself")]
    SelfReference(SlotName),
    #[error("coreference `{slot}` -> `{referred}` has no phrases")]
    EmptyPhrases { slot: SlotName, referred: SlotName },
    #[error("coreference pair `{slot}` -> `{referred}` listed twice")]
    DuplicatePair { slot: SlotName, referred: SlotName },
}

// ---------------------------------------------------------------------------
// Slot names
// ---------------------------------------------------------------------------

/// The five MultiWOZ domains, declared in alphabetical order so the derived
/// ordering on [`SlotName`] agrees with the ordering of its string form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Attraction,
    Hotel,
    Restaurant,
    Taxi,
    Train,
}

impl Domain {
    pub const ALL: [Domain; 5] = [
        Domain::Attraction,
        Domain::Hotel,
        Domain::Restaurant,
        Domain::Taxi,
        Domain::Train,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Attraction => "attraction",
            Domain::Hotel => "hotel",
            Domain::Restaurant => "restaurant",
            Domain::Taxi => "taxi",
            Domain::Train => "train",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim().to_lowercase())
            .ok_or_else(|| CorpusError::MalformedSlot(s.to_string()))
    }
}

/// A canonical `domain-slot` name such as `hotel-area`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotName {
    domain: Domain,
    slot: String,
}

impl SlotName {
    pub fn new(domain: Domain, slot: &str) -> Result<Self, CorpusError> {
        format!("{domain}-{slot}").parse()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn slot(&self) -> &str {
        &self.slot
    }
}

impl FromStr for SlotName {
    type Err = CorpusError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let canon = collapse(raw);
        let malformed = || CorpusError::MalformedSlot(raw.to_string());
        let (domain, slot) = canon.split_once('-').ok_or_else(malformed)?;
        let domain: Domain = domain.parse().map_err(|_| malformed())?;
        let valid = !slot.is_empty()
            && slot
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !valid {
            return Err(malformed());
        }
        Ok(SlotName {
            domain,
            slot: slot.to_string(),
        })
    }
}

impl fmt::Display for SlotName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.domain, self.slot)
    }
}

impl Serialize for SlotName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SlotName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// States and acts
// ---------------------------------------------------------------------------

/// Belief state: slot name to value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueState(BTreeMap<SlotName, String>);

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: &SlotName) -> Option<&str> {
        self.0.get(slot).map(String::as_str)
    }

    pub fn insert(&mut self, slot: SlotName, value: impl Into<String>) -> Option<String> {
        self.0.insert(slot, value.into())
    }

    pub fn remove(&mut self, slot: &SlotName) -> Option<String> {
        self.0.remove(slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SlotName, &str)> {
        self.0.iter().map(|(k, v)| (k, v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn canonicalize(&mut self) {
        for v in self.0.values_mut() {
            *v = collapse(v);
        }
    }
}

impl FromIterator<(SlotName, String)> for DialogueState {
    fn from_iter<T: IntoIterator<Item = (SlotName, String)>>(iter: T) -> Self {
        DialogueState(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemActKind {
    Recommend,
    Request,
    Inform,
    OfferBooked,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemAct {
    pub kind: SystemActKind,
    pub slot: Option<SlotName>,
    pub value: Option<String>,
}

impl SystemAct {
    pub fn recommend(slot: SlotName, value: &str) -> Self {
        SystemAct {
            kind: SystemActKind::Recommend,
            slot: Some(slot),
            value: Some(value.to_string()),
        }
    }

    pub fn request(slot: SlotName) -> Self {
        SystemAct {
            kind: SystemActKind::Request,
            slot: Some(slot),
            value: None,
        }
    }

    pub fn inform(slot: SlotName, value: &str) -> Self {
        SystemAct {
            kind: SystemActKind::Inform,
            slot: Some(slot),
            value: Some(value.to_string()),
        }
    }

    fn well_formed(&self) -> bool {
        match self.kind {
            SystemActKind::Request => self.slot.is_some() && self.value.is_none(),
            SystemActKind::Recommend | SystemActKind::Inform => {
                self.slot.is_some() && self.value.is_some()
            }
            SystemActKind::OfferBooked => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActType {
    Confirm,
    Reply,
    Inform,
}

impl fmt::Display for ActType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActType::Confirm => "confirm",
            ActType::Reply => "reply",
            ActType::Inform => "inform",
        })
    }
}

/// One user act item. `value` always holds the resolved value, also when
/// the item refers to another slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActItem {
    pub act_type: ActType,
    pub slot: SlotName,
    pub value: String,
    #[serde(default)]
    pub refer: Option<SlotName>,
}

impl ActItem {
    pub fn new(act_type: ActType, slot: SlotName, value: &str) -> Self {
        ActItem {
            act_type,
            slot,
            value: value.to_string(),
            refer: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserAct {
    pub items: Vec<ActItem>,
}

impl UserAct {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, slot: &SlotName) -> Option<&ActItem> {
        self.items.iter().find(|i| &i.slot == slot)
    }

    pub fn of_type(&self, act_type: ActType) -> impl Iterator<Item = &ActItem> {
        self.items.iter().filter(move |i| i.act_type == act_type)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: usize,
    pub system_utterance: String,
    #[serde(default)]
    pub system_acts: Vec<SystemAct>,
    pub user_utterance: String,
    #[serde(default)]
    pub user_act: UserAct,
    #[serde(default)]
    pub belief_state: DialogueState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn turn_count(&self) -> usize {
        self.dialogues.iter().map(|d| d.turns.len()).sum()
    }

    pub fn dialogue(&self, id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| d.id == id)
    }

    fn canonicalize(&mut self) {
        for turn in self.dialogues.iter_mut().flat_map(|d| d.turns.iter_mut()) {
            for act in &mut turn.system_acts {
                if let Some(v) = act.value.as_mut() {
                    *v = collapse(v);
                }
            }
            for item in &mut turn.user_act.items {
                item.value = collapse(&item.value);
            }
            turn.belief_state.canonicalize();
        }
    }

    /// Parse the canonical JSON schema without checking turn invariants.
    pub fn from_json_str(json: &str, origin: &str) -> Result<Corpus, CorpusError> {
        let mut corpus: Corpus = parse_json(json, origin)?;
        corpus.canonicalize();
        Ok(corpus)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }
}

// ---------------------------------------------------------------------------
// Violations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Rule {
    EmptyDialogue,
    DuplicateDialogueId,
    TurnOrder { previous: usize },
    BeliefMissingValue { slot: SlotName, value: String },
    DuplicateActSlot { slot: SlotName },
    MalformedSystemAct { index: usize },
    UnknownCorefPair { slot: SlotName, refer: SlotName },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub dialogue_id: String,
    pub turn_id: Option<usize>,
    #[serde(flatten)]
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dialogue `{}`", self.dialogue_id)?;
        if let Some(t) = self.turn_id {
            write!(f, " turn {t}")?;
        }
        f.write_str(": ")?;
        match &self.rule {
            Rule::EmptyDialogue => f.write_str("dialogue has no turns"),
            Rule::DuplicateDialogueId => f.write_str("dialogue id is not unique"),
            Rule::TurnOrder { previous } => {
                write!(f, "turn id does not increase (previous {previous})")
            }
            Rule::BeliefMissingValue { slot, value } => {
                write!(f, "belief state lacks `{slot}={value}` introduced by the user act")
            }
            Rule::DuplicateActSlot { slot } => write!(f, "slot `{slot}` appears twice in the user act"),
            Rule::MalformedSystemAct { index } => {
                write!(f, "system act #{index} has the wrong slot/value shape for its kind")
            }
            Rule::UnknownCorefPair { slot, refer } => {
                write!(f, "`{slot}` refers to `{refer}`, which is not in the coreference list")
            }
        }
    }
}

fn check_turn(dialogue_id: &str, turn: &Turn, out: &mut Vec<Violation>) {
    let mut push = |rule| {
        out.push(Violation {
            dialogue_id: dialogue_id.to_string(),
            turn_id: Some(turn.turn_id),
            rule,
        })
    };
    for (index, act) in turn.system_acts.iter().enumerate() {
        if !act.well_formed() {
            push(Rule::MalformedSystemAct { index });
        }
    }
    let mut seen = HashSet::new();
    for item in &turn.user_act.items {
        if !seen.insert(&item.slot) {
            push(Rule::DuplicateActSlot {
                slot: item.slot.clone(),
            });
        }
        if turn.belief_state.get(&item.slot) != Some(item.value.as_str()) {
            push(Rule::BeliefMissingValue {
                slot: item.slot.clone(),
                value: item.value.clone(),
            });
        }
    }
}

/// Structural invariants that do not need the coreference list.
pub fn check_invariants(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for d in &corpus.dialogues {
        let dialogue_level = |rule| Violation {
            dialogue_id: d.id.clone(),
            turn_id: None,
            rule,
        };
        if !ids.insert(d.id.as_str()) {
            out.push(dialogue_level(Rule::DuplicateDialogueId));
        }
        if d.turns.is_empty() {
            out.push(dialogue_level(Rule::EmptyDialogue));
        }
        let mut previous: Option<usize> = None;
        for turn in &d.turns {
            if let Some(p) = previous {
                if turn.turn_id <= p {
                    out.push(Violation {
                        dialogue_id: d.id.clone(),
                        turn_id: Some(turn.turn_id),
                        rule: Rule::TurnOrder { previous: p },
                    });
                }
            }
            previous = Some(turn.turn_id);
            check_turn(&d.id, turn, &mut out);
        }
    }
    out
}

/// All violations: turn invariants plus refer pairs missing from `coref`.
pub fn validate_corpus(corpus: &Corpus, coref: &CorefList) -> Vec<Violation> {
    let mut out = check_invariants(corpus);
    for d in &corpus.dialogues {
        for turn in &d.turns {
            for item in &turn.user_act.items {
                if let Some(refer) = &item.refer {
                    if !coref.contains_pair(&item.slot, refer) {
                        out.push(Violation {
                            dialogue_id: d.id.clone(),
                            turn_id: Some(turn.turn_id),
                            rule: Rule::UnknownCorefPair {
                                slot: item.slot.clone(),
                                refer: refer.clone(),
                            },
                        });
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: for<'de> Deserialize<'de>>(json: &str, origin: &str) -> Result<T, CorpusError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        CorpusError::Parse {
            path: origin.to_string(),
            line: inner.line(),
            column: inner.column(),
            field,
            message: inner.to_string(),
        }
    })
}

/// Parse a corpus file without checking turn invariants (used by `validate`).
pub fn read_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    Corpus::from_json_str(&read(path)?, &path.display().to_string())
}

/// Parse a corpus file and reject it if any turn invariant is violated.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let corpus = read_corpus(path)?;
    let violations = check_invariants(&corpus);
    if violations.is_empty() {
        Ok(corpus)
    } else {
        Err(CorpusError::Invariant(violations))
    }
}

pub fn write_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    fs::write(path, corpus.to_json_string() + "\n").map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Slot-value dictionary
// ---------------------------------------------------------------------------

const BOOLEAN_VALUES: [&str; 3] = ["yes", "no", "dontcare"];

/// Sampleable values per slot; boolean slots are limited to yes/no/dontcare.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotValueDict {
    entries: BTreeMap<SlotName, Vec<String>>,
    boolean_slots: BTreeSet<SlotName>,
}

#[derive(Serialize, Deserialize)]
struct RawDict {
    slots: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    boolean_slots: Vec<String>,
}

impl SlotValueDict {
    pub fn from_json_str(json: &str, origin: &str) -> Result<Self, CorpusError> {
        let raw: RawDict = parse_json(json, origin)?;
        let mut entries = BTreeMap::new();
        for (name, values) in raw.slots {
            let slot: SlotName = name.parse()?;
            let mut seen = HashSet::new();
            let values: Vec<String> = values
                .iter()
                .map(|v| collapse(v))
                .filter(|v| !v.is_empty() && seen.insert(v.clone()))
                .collect();
            if values.is_empty() {
                return Err(CorpusError::EmptyValues(slot));
            }
            entries.insert(slot, values);
        }
        let mut boolean_slots = BTreeSet::new();
        for name in raw.boolean_slots {
            let slot: SlotName = name.parse()?;
            let values = entries
                .get(&slot)
                .ok_or_else(|| CorpusError::UnknownBooleanSlot(slot.clone()))?;
            if let Some(bad) = values.iter().find(|v| !BOOLEAN_VALUES.contains(&v.as_str())) {
                return Err(CorpusError::NonBooleanValue {
                    slot,
                    value: bad.clone(),
                });
            }
            boolean_slots.insert(slot);
        }
        Ok(SlotValueDict {
            entries,
            boolean_slots,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json_str(&read(path)?, &path.display().to_string())
    }

    /// The dictionary shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json_str(crate::data::SLOT_VALUES, "bundled slot_values.json")
            .expect("bundled dictionary is valid")
    }

    pub fn values(&self, slot: &SlotName) -> Option<&[String]> {
        self.entries.get(slot).map(Vec::as_slice)
    }

    pub fn contains_slot(&self, slot: &SlotName) -> bool {
        self.entries.contains_key(slot)
    }

    pub fn is_boolean(&self, slot: &SlotName) -> bool {
        self.boolean_slots.contains(slot)
    }

    pub fn boolean_slots(&self) -> &BTreeSet<SlotName> {
        &self.boolean_slots
    }

    pub fn slots(&self) -> impl Iterator<Item = &SlotName> {
        self.entries.keys()
    }

    /// Slots of one domain, in lexicographic order.
    pub fn slots_in(&self, domain: Domain) -> Vec<&SlotName> {
        self.entries.keys().filter(|s| s.domain() == domain).collect()
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawDict {
            slots: self
                .entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            boolean_slots: self.boolean_slots.iter().map(ToString::to_string).collect(),
        };
        serde_json::to_string_pretty(&raw).expect("dictionary serializes")
    }
}

pub fn load_dictionary(path: &Path) -> Result<SlotValueDict, CorpusError> {
    SlotValueDict::load(path)
}

// ---------------------------------------------------------------------------
// Coreference list
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefTarget {
    pub referred: SlotName,
    pub phrases: Vec<String>,
}

/// Referable slots with the slots they may refer to and the phrases that
/// express the reference.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorefList {
    entries: BTreeMap<SlotName, Vec<CorefTarget>>,
}

impl CorefList {
    pub fn from_json_str(json: &str, origin: &str) -> Result<Self, CorpusError> {
        let raw: BTreeMap<String, Vec<CorefTarget>> = parse_json(json, origin)?;
        let mut entries = BTreeMap::new();
        for (name, targets) in raw {
            let slot: SlotName = name.parse()?;
            let mut seen = HashSet::new();
            let mut clean = Vec::with_capacity(targets.len());
            for t in targets {
                if t.referred == slot {
                    return Err(CorpusError::SelfReference(slot));
                }
                if !seen.insert(t.referred.clone()) {
                    return Err(CorpusError::DuplicatePair {
                        slot,
                        referred: t.referred,
                    });
                }
                let phrases: Vec<String> = t
                    .phrases
                    .iter()
                    .map(|p| collapse(p))
                    .filter(|p| !p.is_empty())
                    .collect();
                if phrases.is_empty() {
                    return Err(CorpusError::EmptyPhrases {
                        slot,
                        referred: t.referred,
                    });
                }
                clean.push(CorefTarget {
                    referred: t.referred,
                    phrases,
                });
            }
            entries.insert(slot, clean);
        }
        Ok(CorefList { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json_str(&read(path)?, &path.display().to_string())
    }

    pub fn bundled() -> Self {
        Self::from_json_str(crate::data::COREF_LIST, "bundled coref_list.json")
            .expect("bundled coreference list is valid")
    }

    pub fn targets(&self, slot: &SlotName) -> &[CorefTarget] {
        self.entries.get(slot).map_or(&[], Vec::as_slice)
    }

    pub fn phrases(&self, slot: &SlotName, referred: &SlotName) -> Option<&[String]> {
        self.targets(slot)
            .iter()
            .find(|t| &t.referred == referred)
            .map(|t| t.phrases.as_slice())
    }

    pub fn contains_pair(&self, slot: &SlotName, referred: &SlotName) -> bool {
        self.phrases(slot, referred).is_some()
    }

    /// Every phrase listed for `slot`, over all referred slots.
    pub fn all_phrases(&self, slot: &SlotName) -> impl Iterator<Item = &str> {
        self.targets(slot)
            .iter()
            .flat_map(|t| t.phrases.iter().map(String::as_str))
    }
}

pub fn load_coref_list(path: &Path) -> Result<CorefList, CorpusError> {
    CorefList::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(s: &str) -> SlotName {
        s.parse().unwrap()
    }

    #[test]
    fn slot_name_canonicalizes() {
        let s: SlotName = "  Hotel-Area ".parse().unwrap();
        assert_eq!(s.to_string(), "hotel-area");
        assert_eq!(s.to_string().parse::<SlotName>().unwrap(), s);
        assert!("spa-area".parse::<SlotName>().is_err());
        assert!("hotel".parse::<SlotName>().is_err());
        assert!("hotel-".parse::<SlotName>().is_err());
        assert!("hotel-price range".parse::<SlotName>().is_err());
    }

    #[test]
    fn slot_order_matches_string_order() {
        let mut names = vec![slot("train-day"), slot("taxi-leave"), slot("attraction-area"), slot("hotel-stars")];
        names.sort();
        let strings: Vec<String> = names.iter().map(ToString::to_string).collect();
        let mut sorted = strings.clone();
        sorted.sort();
        assert_eq!(strings, sorted);
    }

    #[test]
    fn bundled_dictionary_rows() {
        let dict = SlotValueDict::bundled();
        assert_eq!(dict.values(&slot("hotel-type")).unwrap(), ["hotel", "guesthouse"]);
        assert!(dict.is_boolean(&slot("hotel-internet")));
        assert!(dict.is_boolean(&slot("hotel-parking")));
        assert_eq!(dict.values(&slot("hotel-internet")).unwrap(), ["yes", "no", "dontcare"]);
        assert_eq!(dict.slots().count(), 30);
        assert_eq!(dict.values(&slot("restaurant-time")).unwrap().len(), 36);
    }

    #[test]
    fn dictionary_rejects_empty_rows() {
        let err = SlotValueDict::from_json_str(r#"{"slots":{"hotel-area":[]}}"#, "t").unwrap_err();
        assert!(matches!(err, CorpusError::EmptyValues(s) if s == slot("hotel-area")));
        let err = SlotValueDict::from_json_str(r#"{"slots":{"hotelarea":["x"]}}"#, "t").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedSlot(_)));
        let err = SlotValueDict::from_json_str(
            r#"{"slots":{"hotel-parking":["yes","free"]},"boolean_slots":["hotel-parking"]}"#,
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::NonBooleanValue { .. }));
    }

    #[test]
    fn dictionary_dedups() {
        let d = SlotValueDict::from_json_str(r#"{"slots":{"hotel-area":["north","North"," north"]}}"#, "t").unwrap();
        assert_eq!(d.values(&slot("hotel-area")).unwrap(), ["north"]);
    }

    #[test]
    fn bundled_coref_pairs() {
        let c = CorefList::bundled();
        assert_eq!(
            c.phrases(&slot("taxi-arrive"), &slot("restaurant-time")).unwrap(),
            ["the time of my reservation", "the time of my booking"]
        );
        assert!(c
            .phrases(&slot("hotel-price"), &slot("restaurant-price"))
            .unwrap()
            .contains(&"same price range".to_string()));
        assert!(!c.contains_pair(&slot("taxi-dest"), &slot("train-day")));
    }

    #[test]
    fn coref_rejects_bad_entries() {
        let err = CorefList::from_json_str(r#"{"hotel-area":[{"referred":"hotel-area","phrases":["same"]}]}"#, "t")
            .unwrap_err();
        assert!(matches!(err, CorpusError::SelfReference(_)));
        let err = CorefList::from_json_str(r#"{"hotel-area":[{"referred":"restaurant-area","phrases":[]}]}"#, "t")
            .unwrap_err();
        assert!(matches!(err, CorpusError::EmptyPhrases { .. }));
        let err = CorefList::from_json_str(
            r#"{"hotel-area":[{"referred":"restaurant-area","phrases":["a"]},{"referred":"restaurant-area","phrases":["b"]}]}"#,
            "t",
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicatePair { .. }));
    }

    #[test]
    fn parse_error_has_locus() {
        let json = r#"{"dialogues":[{"id":"a","turns":[{"turn_id":0,"system_utterance":"","user_utterance":"x",
            "user_act":[{"act_type":"inform","slot":"spa-area","value":"north"}],"belief_state":{}}]}]}"#;
        let err = Corpus::from_json_str(json, "mem").unwrap_err();
        match err {
            CorpusError::Parse { field, line, .. } => {
                assert_eq!(field, "dialogues[0].turns[0].user_act[0].slot");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn system_act_shapes() {
        assert!(SystemAct::request(slot("hotel-area")).well_formed());
        let bad = SystemAct {
            kind: SystemActKind::Request,
            slot: Some(slot("hotel-area")),
            value: Some("north".into()),
        };
        assert!(!bad.well_formed());
        let bad = SystemAct {
            kind: SystemActKind::Recommend,
            slot: None,
            value: Some("x".into()),
        };
        assert!(!bad.well_formed());
    }
}
