#![allow(dead_code)]

pub mod laws;

use std::path::PathBuf;

use actforge::actgen::{AugConfig, DomainSwitchMode, TurnContext};
use actforge::corpus::{DialogueState, Domain, SlotName, SlotValueDict, SystemAct};
use actforge::genbridge::PhraseLexicon;
use actforge::rng::TurnRng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn random_value(dict: &SlotValueDict, slot: &SlotName, rng: &mut TurnRng) -> String {
    rng.pick(dict.values(slot).unwrap()).clone()
}

/// A random but well-formed turn context over the dictionary's slots.
pub fn random_context(dict: &SlotValueDict, lexicon: &PhraseLexicon, rng: &mut TurnRng) -> TurnContext {
    let slots: Vec<&SlotName> = dict.slots().collect();
    let mut prior = DialogueState::new();
    for _ in 0..rng.index(5) {
        let s = *rng.pick(&slots);
        prior.insert(s.clone(), random_value(dict, s, rng));
    }
    let domains: Vec<Domain> = Domain::ALL.iter().copied().filter(|d| !dict.slots_in(*d).is_empty()).collect();
    let domain = *rng.pick(&domains);
    let in_domain = dict.slots_in(domain);
    let mut system_acts = Vec::new();
    let mut words = Vec::new();
    for _ in 0..rng.index(3) {
        let s = *rng.pick(&in_domain);
        if system_acts.iter().any(|a: &SystemAct| a.slot.as_ref() == Some(s)) {
            continue;
        }
        let v = random_value(dict, s, rng);
        if v == "dontcare" {
            continue;
        }
        words.push(format!("how about {v}"));
        system_acts.push(SystemAct::recommend(s.clone(), &v));
    }
    for _ in 0..rng.index(3) {
        let s = *rng.pick(&slots);
        if system_acts.iter().any(|a: &SystemAct| a.slot.as_ref() == Some(s)) {
            continue;
        }
        words.push(format!("what {} do you want", lexicon.phrase(s).unwrap().phrase));
        system_acts.push(SystemAct::request(s.clone()));
    }
    let active_domain = if rng.chance(0.8) { Some(domain) } else { None };
    TurnContext {
        system_utterance: words.join(". "),
        system_acts,
        history: Vec::new(),
        prior_state: prior,
        active_domain,
    }
}

/// A valid configuration with random probabilities and count weights.
pub fn random_config(rng: &mut TurnRng) -> AugConfig {
    let mut p = || (rng.next_u64() % 1001) as f64 / 1000.0;
    let ps = [p(), p(), p(), p()];
    let mut w = [p(), p(), p(), p()];
    w[1] += 0.01;
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    AugConfig {
        p_confirm: ps[0],
        p_reply: ps[1],
        p_domain: ps[2],
        p_coref: ps[3],
        inform_count_weights: w,
        domain_switch_mode: if rng.chance(0.5) { DomainSwitchMode::Stay } else { DomainSwitchMode::Switch },
        ..AugConfig::default()
    }
}

use std::collections::{BTreeMap, HashSet};

use actforge::augment::{AugDeps, AugRecord, Substitution};
use actforge::corpus::{load_corpus, CorefList as Coref, Corpus, Turn};
use actforge::filter::RuleFilter;
use actforge::genbridge::TemplateGenerator;
use actforge::metrics::PredictionSet;

pub struct World {
    pub dict: SlotValueDict,
    pub coref: Coref,
    pub lexicon: PhraseLexicon,
    pub generator: TemplateGenerator,
    pub filter: RuleFilter,
}

impl World {
    pub fn bundled() -> Self {
        let dict = SlotValueDict::bundled();
        let coref = Coref::bundled();
        let lexicon = PhraseLexicon::bundled();
        World {
            generator: TemplateGenerator { lexicon: lexicon.clone(), dict: dict.clone(), coref: coref.clone() },
            filter: RuleFilter { dict: dict.clone(), coref: coref.clone(), lexicon: lexicon.clone() },
            dict,
            coref,
            lexicon,
        }
    }

    pub fn deps(&self) -> AugDeps<'_> {
        AugDeps { dict: &self.dict, coref: &self.coref, generator: &self.generator, filter: &self.filter }
    }
}

pub fn mini_corpus() -> Corpus {
    load_corpus(&fixture("mini_corpus.json")).unwrap()
}

/// Prior state of a record's turn, rebuilt by replaying the source dialogue.
pub fn prior_state_of(corpus: &Corpus, record: &AugRecord) -> BTreeMap<String, String> {
    let d = corpus.dialogue(&record.dialogue_id).expect("record of a known dialogue");
    let idx = d.turns.iter().position(|t| t.turn_id == record.turn_id).expect("record of a known turn");
    match idx.checked_sub(1) {
        Some(p) => d.turns[p].belief_state.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect(),
        None => BTreeMap::new(),
    }
}

/// Overwrite rule written out independently: start from the prior state and
/// let every act item set its slot.
pub fn overwrite_oracle(prior: &BTreeMap<String, String>, record: &AugRecord) -> BTreeMap<String, String> {
    let mut state = prior.clone();
    for item in &record.augmented_act.items {
        state.insert(item.slot.to_string(), item.value.clone());
    }
    state
}

pub fn state_map(record: &AugRecord) -> BTreeMap<String, String> {
    record.new_belief_state.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect()
}

/// Joint goal accuracy by direct set comparison.
pub fn brute_force_jga(preds: &PredictionSet, corpus: &Corpus) -> f64 {
    let as_set = |pairs: Vec<(String, String)>| -> HashSet<(String, String)> {
        pairs
            .into_iter()
            .map(|(s, v)| (s, v.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()))
            .filter(|(_, v)| !v.is_empty() && v != "none")
            .collect()
    };
    let mut total = 0;
    let mut hits = 0;
    for d in &corpus.dialogues {
        for t in &d.turns {
            total += 1;
            let gold = as_set(t.belief_state.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect());
            let Some(p) = preds.get(&d.id, t.turn_id) else { continue };
            let pred = as_set(p.iter().map(|(s, v)| (s.to_string(), v.to_string())).collect());
            if gold == pred {
                hits += 1;
            }
        }
    }
    if total == 0 { 0.0 } else { hits as f64 / total as f64 }
}

/// Check that `after` equals `before` with exactly the substituted spans
/// rewritten. Returns a description of the first discrepancy.
pub fn check_substitution_diff(before: &Turn, after: &Turn, subs: &[Substitution], dict: &SlotValueDict) -> Result<(), String> {
    let mut spans: Vec<(usize, &Substitution)> = subs.iter().flat_map(|s| s.offsets.iter().map(move |&o| (o, s))).collect();
    spans.sort_by_key(|(o, _)| *o);
    let src = before.user_utterance.as_bytes();
    let mut expected: Vec<u8> = Vec::new();
    let mut pos = 0;
    for (o, s) in spans {
        if o < pos {
            return Err(format!("overlapping spans at {o}"));
        }
        expected.extend_from_slice(&src[pos..o]);
        let old = &src[o..o + s.old.len()];
        if !old.eq_ignore_ascii_case(s.old.as_bytes()) {
            return Err(format!("span at {o} is not `{}`", s.old));
        }
        expected.extend_from_slice(s.new.as_bytes());
        pos = o + s.old.len();
    }
    expected.extend_from_slice(&src[pos..]);
    if expected != after.user_utterance.as_bytes() {
        return Err(format!("{:?} -> {:?} changes more than the substituted spans", before.user_utterance, after.user_utterance));
    }
    for s in subs {
        if s.new == s.old || s.new == "dontcare" || !dict.values(&s.slot).is_some_and(|r| r.contains(&s.new)) {
            return Err(format!("bad replacement {:?}", s));
        }
        if after.belief_state.get(&s.slot) != Some(s.new.as_str()) && before.belief_state.get(&s.slot) == Some(s.old.as_str()) {
            return Err(format!("state of {} not substituted", s.slot));
        }
    }
    Ok(())
}
