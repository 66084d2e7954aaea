//! Turning a user act into candidate user utterances.
//!
//! Two generators share the [`Generator`] trait: the built-in
//! [`TemplateGenerator`], which needs no model, and [`ExternalGenerator`],
//! a client for a sequence-to-sequence server speaking the JSON-lines
//! protocol below.
//!
//! ```text
//! -> {"id":1,"history":[["sys","usr"]],"system_utterance":"...","act":[{"act_type":"inform","slot":"hotel-area","value":"north","refer":null}],"beam_size":5}
//! <- {"id":1,"candidates":["...", "..."]}
//! <- {"id":1,"error":"..."}
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actgen::TurnContext;
use crate::corpus::{ActItem, ActType, CorefList, CorpusError, SlotName, SlotValueDict, UserAct};
use crate::rng::{SeedTuple, Stream, TurnRng};
use crate::text::contains_phrase;
use crate::wire::{Connection, Endpoint, Pool, WireError};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("lexicon has no entry for slot `{0}`")]
    LexiconGap(SlotName),
    #[error("no coreference phrases for `{slot}` -> `{referred}`")]
    MissingCorefPhrases { slot: SlotName, referred: SlotName },
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error(transparent)]
    Load(#[from] CorpusError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotPhrase {
    /// Surface description of the slot, e.g. "area of the hotel".
    pub phrase: String,
    /// Words that signal the slot in an utterance; `phrase` contains one.
    pub keywords: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Templates {
    pub confirm_open: Vec<String>,
    pub confirm: Vec<String>,
    pub reply: Vec<String>,
    pub inform: Vec<String>,
    pub refer: Vec<String>,
    pub dontcare: Vec<String>,
    pub bool_yes: Vec<String>,
    pub bool_no: Vec<String>,
    pub empty: Vec<String>,
    pub connectives: Vec<String>,
}

/// Slot phrases, keywords and clause templates used by the realizer and by
/// the rule-based filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhraseLexicon {
    slots: BTreeMap<SlotName, SlotPhrase>,
    templates: Templates,
}

impl PhraseLexicon {
    pub fn from_json_str(json: &str) -> Result<Self, GenError> {
        let lex: PhraseLexicon =
            serde_json::from_str(json).map_err(|e| GenError::Lexicon(e.to_string()))?;
        lex.check()?;
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, GenError> {
        let json = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&json)
    }

    pub fn bundled() -> Self {
        Self::from_json_str(crate::data::LEXICON).expect("bundled lexicon is valid")
    }

    fn check(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Lexicon(m));
        for (slot, p) in &self.slots {
            if p.keywords.is_empty() {
                return bad(format!("slot `{slot}` has no keywords"));
            }
            if !p.keywords.iter().any(|k| contains_phrase(&p.phrase, k)) {
                return bad(format!("phrase of `{slot}` contains none of its keywords"));
            }
        }
        let t = &self.templates;
        let families: [(&str, &Vec<String>, &[&str]); 10] = [
            ("confirm_open", &t.confirm_open, &[]),
            ("confirm", &t.confirm, &["{value}", "{phrase}"]),
            ("reply", &t.reply, &["{value}", "{phrase}"]),
            ("inform", &t.inform, &["{value}", "{phrase}"]),
            ("refer", &t.refer, &["{coref}", "{phrase}"]),
            ("dontcare", &t.dontcare, &["{phrase}"]),
            ("bool_yes", &t.bool_yes, &["{phrase}"]),
            ("bool_no", &t.bool_no, &["{phrase}"]),
            ("empty", &t.empty, &[]),
            ("connectives", &t.connectives, &[]),
        ];
        for (name, list, placeholders) in families {
            if list.is_empty() {
                return bad(format!("template family `{name}` is empty"));
            }
            for tpl in list {
                if let Some(missing) = placeholders.iter().find(|p| !tpl.contains(*p)) {
                    return bad(format!("`{name}` template `{tpl}` lacks {missing}"));
                }
            }
        }
        if let Some(c) = t.connectives.iter().find(|c| !c.contains([',', '.', ';'])) {
            return bad(format!("connective `{c}` does not separate clauses"));
        }
        Ok(())
    }

    pub fn phrase(&self, slot: &SlotName) -> Option<&SlotPhrase> {
        self.slots.get(slot)
    }

    /// Keywords for `slot`; falls back to the slot identifier itself.
    pub fn keywords(&self, slot: &SlotName) -> Vec<String> {
        match self.slots.get(slot) {
            Some(p) => p.keywords.clone(),
            None => vec![slot.slot().replace('_', " ")],
        }
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    /// Error on the first dictionary slot the lexicon does not describe.
    pub fn check_coverage(&self, dict: &SlotValueDict) -> Result<(), GenError> {
        match dict.slots().find(|s| !self.slots.contains_key(*s)) {
            Some(s) => Err(GenError::LexiconGap(s.clone())),
            None => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// Requests and candidates
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRequest {
    pub id: u64,
    pub history: Vec<(String, String)>,
    pub system_utterance: String,
    pub act: UserAct,
    pub beam_size: usize,
}

impl GenRequest {
    pub fn new(id: u64, ctx: &TurnContext, act: &UserAct, beam_size: usize) -> Self {
        GenRequest {
            id,
            history: ctx.history.clone(),
            system_utterance: ctx.system_utterance.clone(),
            act: act.clone(),
            beam_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenResponse {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Candidate utterances, best first. Never empty and never holds an empty
/// string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CandidateSet(Vec<String>);

impl CandidateSet {
    pub fn new(candidates: Vec<String>) -> Result<Self, String> {
        if candidates.is_empty() {
            return Err("empty candidate list".into());
        }
        if candidates.iter().any(|c| c.trim().is_empty()) {
            return Err("empty candidate string".into());
        }
        Ok(CandidateSet(candidates))
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<String>> for CandidateSet {
    type Error = String;

    fn try_from(v: Vec<String>) -> Result<Self, String> {
        CandidateSet::new(v)
    }
}

impl From<CandidateSet> for Vec<String> {
    fn from(c: CandidateSet) -> Self {
        c.0
    }
}

// ---------------------------------------------------------------------------
// Template realizer
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ItemKind {
    Span,
    Yes,
    No,
    Dontcare,
    Refer,
}

fn item_kind(item: &ActItem, dict: &SlotValueDict) -> ItemKind {
    if item.refer.is_some() {
        ItemKind::Refer
    } else if item.value == "dontcare" {
        ItemKind::Dontcare
    } else if dict.is_boolean(&item.slot) && item.value == "yes" {
        ItemKind::Yes
    } else if dict.is_boolean(&item.slot) && item.value == "no" {
        ItemKind::No
    } else {
        ItemKind::Span
    }
}

fn fill(template: &str, phrase: &str, value: &str, coref: &str) -> String {
    template
        .replace("{phrase}", phrase)
        .replace("{value}", value)
        .replace("{coref}", coref)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(rest: Vec<usize>, prefix: Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix);
            return;
        }
        for i in 0..rest.len() {
            let mut r = rest.clone();
            let x = r.remove(i);
            let mut p = prefix.clone();
            p.push(x);
            go(r, p, out);
        }
    }
    let mut out = Vec::new();
    go((0..n).collect(), Vec::new(), &mut out);
    out
}

/// Realize `act` as `beam_size` template variants. Values are inserted
/// verbatim; refer items use a coreference phrase drawn from `rng` instead
/// of the value. Variants differ in the order of the act groups, the
/// connective between clauses and the template chosen per clause.
pub fn realize_template(
    act: &UserAct,
    ctx: &TurnContext,
    lexicon: &PhraseLexicon,
    dict: &SlotValueDict,
    coref: &CorefList,
    rng: &mut TurnRng,
    beam_size: usize,
) -> Result<CandidateSet, GenError> {
    let _ = ctx;
    let t = lexicon.templates();
    let beam_size = beam_size.max(1);
    if act.is_empty() {
        let out = (0..beam_size)
            .map(|i| format!("{}.", t.empty[i % t.empty.len()]))
            .collect();
        return Ok(CandidateSet(out));
    }
    for item in &act.items {
        if lexicon.phrase(&item.slot).is_none() {
            return Err(GenError::LexiconGap(item.slot.clone()));
        }
        if let Some(r) = &item.refer {
            if coref.phrases(&item.slot, r).is_none() {
                return Err(GenError::MissingCorefPhrases {
                    slot: item.slot.clone(),
                    referred: r.clone(),
                });
            }
        }
    }
    let group_types = [ActType::Confirm, ActType::Reply, ActType::Inform];
    let present: Vec<ActType> = group_types
        .into_iter()
        .filter(|ty| act.of_type(*ty).next().is_some())
        .collect();
    let perms = permutations(present.len());
    let mut out = Vec::with_capacity(beam_size);
    for variant in 0..beam_size {
        let order = &perms[variant % perms.len()];
        let connective = &t.connectives[(variant / perms.len()) % t.connectives.len()];
        let mut clauses: Vec<String> = Vec::new();
        for &g in order {
            let ty = present[g];
            if ty == ActType::Confirm {
                clauses.push(t.confirm_open[variant % t.confirm_open.len()].clone());
            }
            for (n, item) in act.of_type(ty).enumerate() {
                let pick = |family: &[String]| family[(variant + n) % family.len()].clone();
                let phrase = &lexicon.phrase(&item.slot).expect("checked above").phrase;
                let clause = match item_kind(item, dict) {
                    ItemKind::Refer => {
                        let referred = item.refer.as_ref().expect("refer kind");
                        let phrases = coref.phrases(&item.slot, referred).expect("checked above");
                        fill(&pick(&t.refer), phrase, &item.value, rng.pick(phrases))
                    }
                    ItemKind::Dontcare => fill(&pick(&t.dontcare), phrase, "", ""),
                    ItemKind::Yes => fill(&pick(&t.bool_yes), phrase, "", ""),
                    ItemKind::No => fill(&pick(&t.bool_no), phrase, "", ""),
                    ItemKind::Span => {
                        let family = match ty {
                            ActType::Confirm => &t.confirm,
                            ActType::Reply => &t.reply,
                            ActType::Inform => &t.inform,
                        };
                        fill(&pick(family), phrase, &item.value, "")
                    }
                };
                clauses.push(clause);
            }
        }
        out.push(format!("{}.", clauses.join(connective)));
    }
    Ok(CandidateSet(out))
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Template,
    External,
}

pub trait Generator: Send + Sync {
    fn kind(&self) -> GeneratorKind;

    fn candidates(
        &self,
        act: &UserAct,
        ctx: &TurnContext,
        seed: &SeedTuple,
        beam_size: usize,
    ) -> Result<CandidateSet, GenError>;
}

pub struct TemplateGenerator {
    pub lexicon: PhraseLexicon,
    pub dict: SlotValueDict,
    pub coref: CorefList,
}

impl Generator for TemplateGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::Template
    }

    fn candidates(
        &self,
        act: &UserAct,
        ctx: &TurnContext,
        seed: &SeedTuple,
        beam_size: usize,
    ) -> Result<CandidateSet, GenError> {
        let mut rng = seed.rng(Stream::Realize);
        realize_template(act, ctx, &self.lexicon, &self.dict, &self.coref, &mut rng, beam_size)
    }
}

/// One request/response exchange on an open connection.
pub fn request_external(conn: &mut Connection, req: &GenRequest) -> Result<CandidateSet, GenError> {
    let resp: GenResponse = conn.call(req)?;
    let endpoint = conn.endpoint().clone();
    if resp.id != req.id {
        conn.mark_broken();
        return Err(WireError::IdMismatch {
            endpoint,
            expected: req.id,
            got: resp.id,
        }
        .into());
    }
    match (resp.candidates, resp.error) {
        (_, Some(message)) => Err(WireError::Remote { endpoint, message }.into()),
        (Some(c), None) => CandidateSet::new(c).map_err(|message| {
            conn.mark_broken();
            WireError::Malformed {
                endpoint,
                line: String::new(),
                message,
            }
            .into()
        }),
        (None, None) => {
            conn.mark_broken();
            Err(WireError::Malformed {
            endpoint,
            line: String::new(),
            message: "response has neither `candidates` nor `error`".into(),
            }
            .into())
        }
    }
}

pub struct ExternalGenerator {
    pool: Pool,
}

impl ExternalGenerator {
    pub fn new(endpoint: Endpoint, timeout: Duration) -> Self {
        ExternalGenerator {
            pool: Pool::new(endpoint, timeout),
        }
    }

    pub fn endpoint(&self) -> &Endpoint {
        self.pool.endpoint()
    }
}

impl Generator for ExternalGenerator {
    fn kind(&self) -> GeneratorKind {
        GeneratorKind::External
    }

    fn candidates(
        &self,
        act: &UserAct,
        ctx: &TurnContext,
        _seed: &SeedTuple,
        beam_size: usize,
    ) -> Result<CandidateSet, GenError> {
        let req = GenRequest::new(self.pool.next_id(), ctx, act, beam_size);
        self.pool.with_connection(|conn| Ok(request_external(conn, &req)))?
    }
}
