//! Stochastic synthesis of the augmented user act and the resulting belief
//! state.
//!
//! A turn is generated in a fixed order, and random draws are consumed in
//! exactly this order so a seed tuple fully determines the output:
//!
//! 1. confirm: one Bernoulli(`p_confirm`) draw if the system recommended
//!    anything;
//! 2. reply: for each requested slot in lexicographic order, one
//!    Bernoulli(`p_reply`) draw, then one value draw if accepted;
//! 3. inform count `k` from `inform_count_weights`;
//! 4. domain switch draw (and the target domain draw when it fires);
//! 5. slot sample (`k` index draws), then one value draw per slot;
//! 6. coreference: one Bernoulli(`p_coref`) draw, then one draw choosing
//!    the rewritten (item, referred slot) pair.
//!
//! Steps 4-6 are skipped when `k = 0`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    ActItem, ActType, CorefList, Dialogue, DialogueState, Domain, SlotName, SlotValueDict,
    SystemAct, SystemActKind, UserAct,
};
use crate::rng::TurnRng;

#[derive(Debug, Error, PartialEq)]
pub enum ActGenError {
    #[error("slot `{0}` appears in more than one act group")]
    SlotCollision(SlotName),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Non-fatal events recorded while generating a turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActGenWarning {
    UnknownRequestedSlot { slot: SlotName },
    InformTruncated { domain: Domain, requested: usize, available: usize },
}

/// How `p_domain` is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainSwitchMode {
    /// `p_domain` is the probability of staying in the current domain; a
    /// switch is drawn with probability `1 - p_domain`, and only on turns
    /// where confirm and reply both produced nothing.
    #[default]
    Stay,
    /// `p_domain` is the probability of switching, drawn on every turn.
    Switch,
}

fn default_weights() -> [f64; 4] {
    [0.15, 0.40, 0.30, 0.15]
}

mod weights_serde {
    use std::collections::BTreeMap;

    use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(w: &[f64; 4], s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<String, f64> = w.iter().enumerate().map(|(i, p)| (i.to_string(), *p)).collect();
        map.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 4], D::Error> {
        let map = BTreeMap::<String, f64>::deserialize(d)?;
        let mut w = [0.0; 4];
        for (k, p) in map {
            let i: usize = k
                .parse()
                .ok()
                .filter(|i| *i < 4)
                .ok_or_else(|| de::Error::custom(format!("inform count `{k}` outside 0..=3")))?;
            w[i] = p;
        }
        Ok(w)
    }
}

/// Augmentation knobs. Defaults are (0.7, 0.9, 0.8, 0.6) for
/// (confirm, reply, domain, coref).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugConfig {
    #[serde(default = "d_confirm")]
    pub p_confirm: f64,
    #[serde(default = "d_reply")]
    pub p_reply: f64,
    #[serde(default = "d_domain")]
    pub p_domain: f64,
    #[serde(default = "d_coref")]
    pub p_coref: f64,
    #[serde(default = "default_weights", with = "weights_serde")]
    pub inform_count_weights: [f64; 4],
    #[serde(default = "d_beam")]
    pub beam_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain_switch_mode: DomainSwitchMode,
}

fn d_confirm() -> f64 {
    0.7
}
fn d_reply() -> f64 {
    0.9
}
fn d_domain() -> f64 {
    0.8
}
fn d_coref() -> f64 {
    0.6
}
fn d_beam() -> usize {
    5
}

impl Default for AugConfig {
    fn default() -> Self {
        AugConfig {
            p_confirm: d_confirm(),
            p_reply: d_reply(),
            p_domain: d_domain(),
            p_coref: d_coref(),
            inform_count_weights: default_weights(),
            beam_size: d_beam(),
            seed: 0,
            domain_switch_mode: DomainSwitchMode::Stay,
        }
    }
}

impl AugConfig {
    pub fn validate(&self) -> Result<(), ActGenError> {
        for (name, p) in [
            ("p_confirm", self.p_confirm),
            ("p_reply", self.p_reply),
            ("p_domain", self.p_domain),
            ("p_coref", self.p_coref),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ActGenError::Config(format!("{name} = {p} is not in [0, 1]")));
            }
        }
        if self.inform_count_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(ActGenError::Config("inform_count_weights must be non-negative".into()));
        }
        let total: f64 = self.inform_count_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ActGenError::Config(format!("inform_count_weights sum to {total}, not 1")));
        }
        if self.beam_size == 0 {
            return Err(ActGenError::Config("beam_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self, ActGenError> {
        let cfg: AugConfig =
            serde_json::from_str(json).map_err(|e| ActGenError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything the act generator may look at for one turn.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TurnContext {
    pub system_utterance: String,
    pub system_acts: Vec<SystemAct>,
    /// Prior (system, user) utterance pairs.
    pub history: Vec<(String, String)>,
    pub prior_state: DialogueState,
    pub active_domain: Option<Domain>,
}

impl TurnContext {
    /// Context for turn index `t` of `dialogue`, using the original corpus
    /// state of turn `t - 1` as the prior state.
    pub fn from_dialogue(dialogue: &Dialogue, t: usize) -> Self {
        let turn = &dialogue.turns[t];
        let history = dialogue.turns[..t]
            .iter()
            .map(|p| (p.system_utterance.clone(), p.user_utterance.clone()))
            .collect();
        let prior_state = t
            .checked_sub(1)
            .map(|p| dialogue.turns[p].belief_state.clone())
            .unwrap_or_default();
        let previous_user = t.checked_sub(1).and_then(|p| {
            dialogue.turns[p]
                .user_act
                .items
                .last()
                .map(|i| i.slot.domain())
        });
        let active_domain = active_domain(&turn.system_acts, previous_user, &prior_state);
        TurnContext {
            system_utterance: turn.system_utterance.clone(),
            system_acts: turn.system_acts.clone(),
            history,
            prior_state,
            active_domain,
        }
    }
}

/// Domain of the most recent act: the last slot-bearing system act of this
/// turn, else the last item of the previous user act, else the most
/// frequent domain of the prior state (ties to the lexicographically first).
pub fn active_domain(
    system_acts: &[SystemAct],
    previous_user: Option<Domain>,
    prior_state: &DialogueState,
) -> Option<Domain> {
    if let Some(d) = system_acts.iter().rev().find_map(|a| a.slot.as_ref().map(SlotName::domain)) {
        return Some(d);
    }
    if previous_user.is_some() {
        return previous_user;
    }
    let mut counts: BTreeMap<Domain, usize> = BTreeMap::new();
    for (slot, _) in prior_state.iter() {
        *counts.entry(slot.domain()).or_default() += 1;
    }
    counts
        .into_iter()
        .fold(None, |best: Option<(Domain, usize)>, (d, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((d, c)),
        })
        .map(|(d, _)| d)
}

/// Accept every recommended slot-value of the first recommended entity's
/// domain, with probability `p_confirm`.
pub fn generate_confirm(ctx: &TurnContext, rng: &mut TurnRng, cfg: &AugConfig) -> Vec<ActItem> {
    let recommends: Vec<(&SlotName, &str)> = ctx
        .system_acts
        .iter()
        .filter(|a| a.kind == SystemActKind::Recommend)
        .filter_map(|a| Some((a.slot.as_ref()?, a.value.as_deref()?)))
        .collect();
    let Some(&(first, _)) = recommends.first() else {
        return Vec::new();
    };
    if !rng.chance(cfg.p_confirm) {
        return Vec::new();
    }
    let domain = first.domain();
    let mut items: BTreeMap<&SlotName, &str> = BTreeMap::new();
    for (slot, value) in recommends {
        if slot.domain() == domain {
            items.entry(slot).or_insert(value);
        }
    }
    items
        .into_iter()
        .map(|(slot, value)| ActItem::new(ActType::Confirm, slot.clone(), value))
        .collect()
}

/// Answer each requested slot independently with probability `p_reply`.
/// Slots already confirmed this turn are not answered again.
pub fn generate_reply(
    ctx: &TurnContext,
    dict: &SlotValueDict,
    rng: &mut TurnRng,
    cfg: &AugConfig,
    confirmed: &BTreeSet<SlotName>,
    warnings: &mut Vec<ActGenWarning>,
) -> Vec<ActItem> {
    let requested: BTreeSet<&SlotName> = ctx
        .system_acts
        .iter()
        .filter(|a| a.kind == SystemActKind::Request)
        .filter_map(|a| a.slot.as_ref())
        .filter(|s| !confirmed.contains(*s))
        .collect();
    let mut items = Vec::new();
    for slot in requested {
        let Some(values) = dict.values(slot) else {
            warnings.push(ActGenWarning::UnknownRequestedSlot { slot: slot.clone() });
            continue;
        };
        if rng.chance(cfg.p_reply) {
            items.push(ActItem::new(ActType::Reply, slot.clone(), rng.pick(values)));
        }
    }
    items
}

/// Draw the inform items. Returns the items and the domain switched to, if
/// a switch happened.
pub fn generate_inform(
    ctx: &TurnContext,
    dict: &SlotValueDict,
    rng: &mut TurnRng,
    cfg: &AugConfig,
    reserved: &BTreeSet<SlotName>,
    warnings: &mut Vec<ActGenWarning>,
) -> (Vec<ActItem>, Option<Domain>) {
    let k = rng.weighted(&cfg.inform_count_weights);
    if k == 0 {
        return (Vec::new(), None);
    }
    let (domain, switched) = match ctx.active_domain {
        Some(current) => {
            let fire = match cfg.domain_switch_mode {
                DomainSwitchMode::Stay => reserved.is_empty() && rng.chance(1.0 - cfg.p_domain),
                DomainSwitchMode::Switch => rng.chance(cfg.p_domain),
            };
            if fire {
                let others: Vec<Domain> = Domain::ALL.into_iter().filter(|d| *d != current).collect();
                let target = *rng.pick(&others);
                (target, Some(target))
            } else {
                (current, None)
            }
        }
        // no established domain yet: pick one uniformly, not counted as a switch
        None => (*rng.pick(&Domain::ALL), None),
    };
    let available: Vec<&SlotName> = dict
        .slots_in(domain)
        .into_iter()
        .filter(|s| !reserved.contains(*s))
        .collect();
    if available.len() < k {
        warnings.push(ActGenWarning::InformTruncated {
            domain,
            requested: k,
            available: available.len(),
        });
    }
    let picked = rng.sample_indices(available.len(), k);
    let mut slots: Vec<&SlotName> = picked.into_iter().map(|i| available[i]).collect();
    slots.sort();
    let items = slots
        .into_iter()
        .map(|slot| {
            let values = dict.values(slot).expect("slot listed by the dictionary");
            ActItem::new(ActType::Inform, slot.clone(), rng.pick(values))
        })
        .collect();
    (items, switched)
}

/// With probability `p_coref`, rewrite one eligible inform item to refer to
/// another slot. An item is eligible when one of its coreference targets has
/// a current value (same-turn items first, then the prior state) other than
/// `dontcare`. The rewritten item takes the referred slot's value.
///
/// `same_turn` holds this turn's confirm and reply items.
pub fn apply_coreference(
    mut items: Vec<ActItem>,
    same_turn: &[ActItem],
    ctx: &TurnContext,
    coref: &CorefList,
    rng: &mut TurnRng,
    cfg: &AugConfig,
) -> (Vec<ActItem>, bool) {
    if !rng.chance(cfg.p_coref) {
        return (items, false);
    }
    let current = |slot: &SlotName| -> Option<String> {
        items
            .iter()
            .chain(same_turn)
            .find(|i| &i.slot == slot)
            .map(|i| i.value.clone())
            .or_else(|| ctx.prior_state.get(slot).map(str::to_string))
            .filter(|v| v != "dontcare")
    };
    let eligible: Vec<(usize, SlotName, String)> = items
        .iter()
        .enumerate()
        .filter(|(_, item)| item.refer.is_none())
        .flat_map(|(idx, item)| {
            coref
                .targets(&item.slot)
                .iter()
                .filter_map(move |t| Some((idx, t.referred.clone(), current(&t.referred)?)))
                .collect::<Vec<_>>()
        })
        .collect();
    if eligible.is_empty() {
        return (items, false);
    }
    let (idx, referred, value) = rng.pick(&eligible).clone();
    items[idx].refer = Some(referred);
    items[idx].value = value;
    (items, true)
}

/// Assemble the turn act (confirm, reply, inform; each group sorted by slot)
/// and overwrite the prior state with every item's resolved value.
pub fn compose_turn(
    confirm: Vec<ActItem>,
    reply: Vec<ActItem>,
    inform: Vec<ActItem>,
    prior_state: &DialogueState,
) -> Result<(UserAct, DialogueState), ActGenError> {
    let mut seen = BTreeSet::new();
    let mut items = Vec::with_capacity(confirm.len() + reply.len() + inform.len());
    for mut group in [confirm, reply, inform] {
        group.sort_by(|a, b| a.slot.cmp(&b.slot));
        for item in group {
            if !seen.insert(item.slot.clone()) {
                return Err(ActGenError::SlotCollision(item.slot));
            }
            items.push(item);
        }
    }
    let mut state = prior_state.clone();
    for item in &items {
        state.insert(item.slot.clone(), item.value.clone());
    }
    Ok((UserAct { items }, state))
}

/// Output of [`generate_user_act`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedAct {
    pub act: UserAct,
    pub state: DialogueState,
    pub switched_domain: Option<Domain>,
    pub coref_applied: bool,
    pub warnings: Vec<ActGenWarning>,
}

pub fn generate_user_act(
    ctx: &TurnContext,
    dict: &SlotValueDict,
    coref: &CorefList,
    rng: &mut TurnRng,
    cfg: &AugConfig,
) -> Result<GeneratedAct, ActGenError> {
    let mut warnings = Vec::new();
    let confirm = generate_confirm(ctx, rng, cfg);
    let confirmed: BTreeSet<SlotName> = confirm.iter().map(|i| i.slot.clone()).collect();
    let reply = generate_reply(ctx, dict, rng, cfg, &confirmed, &mut warnings);
    let mut reserved = confirmed;
    reserved.extend(reply.iter().map(|i| i.slot.clone()));
    let (inform, switched_domain) = generate_inform(ctx, dict, rng, cfg, &reserved, &mut warnings);
    let (inform, coref_applied) = if inform.is_empty() {
        (inform, false)
    } else {
        let same_turn: Vec<ActItem> = confirm.iter().chain(&reply).cloned().collect();
        apply_coreference(inform, &same_turn, ctx, coref, rng, cfg)
    };
    let (act, state) = compose_turn(confirm, reply, inform, &ctx.prior_state)?;
    Ok(GeneratedAct {
        act,
        state,
        switched_domain,
        coref_applied,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot(s: &str) -> SlotName {
        s.parse().unwrap()
    }

    fn zero_cfg() -> AugConfig {
        AugConfig {
            p_confirm: 0.0,
            p_reply: 0.0,
            p_domain: 1.0,
            p_coref: 0.0,
            inform_count_weights: [1.0, 0.0, 0.0, 0.0],
            ..AugConfig::default()
        }
    }

    fn recommend_ctx() -> TurnContext {
        TurnContext {
            system_utterance: "how about pho bistro in the centre?".into(),
            system_acts: vec![
                SystemAct::recommend(slot("restaurant-name"), "pho bistro"),
                SystemAct::recommend(slot("restaurant-area"), "centre"),
            ],
            active_domain: Some(Domain::Restaurant),
            ..TurnContext::default()
        }
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = AugConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.p_confirm, cfg.p_reply, cfg.p_domain, cfg.p_coref), (0.7, 0.9, 0.8, 0.6));
        let expected: f64 = cfg.inform_count_weights.iter().enumerate().map(|(k, w)| k as f64 * w).sum();
        assert!((expected - 1.45).abs() < 1e-12);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = AugConfig::from_json_str(
            r#"{"p_confirm":0.5,"inform_count_weights":{"0":0.5,"2":0.5},"beam_size":3,"seed":9}"#,
        )
        .unwrap();
        assert_eq!(cfg.inform_count_weights, [0.5, 0.0, 0.5, 0.0]);
        assert_eq!(cfg.p_reply, 0.9);
        let back = AugConfig::from_json_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(AugConfig::from_json_str(r#"{"p_coref":1.5}"#).is_err());
        assert!(AugConfig::from_json_str(r#"{"beam_size":0}"#).is_err());
        assert!(AugConfig::from_json_str(r#"{"inform_count_weights":{"0":0.5}}"#).is_err());
        assert!(AugConfig::from_json_str(r#"{"inform_count_weights":{"4":1.0}}"#).is_err());
    }

    #[test]
    fn confirm_accepts_recommended_entity() {
        let cfg = AugConfig { p_confirm: 1.0, ..AugConfig::default() };
        let items = generate_confirm(&recommend_ctx(), &mut TurnRng::from_seed(0), &cfg);
        assert_eq!(
            items,
            vec![
                ActItem::new(ActType::Confirm, slot("restaurant-area"), "centre"),
                ActItem::new(ActType::Confirm, slot("restaurant-name"), "pho bistro"),
            ]
        );
    }

    #[test]
    fn confirm_only_first_domain() {
        let mut ctx = recommend_ctx();
        ctx.system_acts.push(SystemAct::recommend(slot("hotel-name"), "travelodge"));
        let cfg = AugConfig { p_confirm: 1.0, ..AugConfig::default() };
        let items = generate_confirm(&ctx, &mut TurnRng::from_seed(0), &cfg);
        assert!(items.iter().all(|i| i.slot.domain() == Domain::Restaurant));
    }

    #[test]
    fn confirm_degenerate_cases() {
        let cfg = AugConfig { p_confirm: 0.0, ..AugConfig::default() };
        assert!(generate_confirm(&recommend_ctx(), &mut TurnRng::from_seed(0), &cfg).is_empty());
        let cfg = AugConfig { p_confirm: 1.0, ..AugConfig::default() };
        assert!(generate_confirm(&TurnContext::default(), &mut TurnRng::from_seed(0), &cfg).is_empty());
    }

    #[test]
    fn reply_values_from_dictionary() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext {
            system_acts: vec![SystemAct::request(slot("hotel-area"))],
            ..TurnContext::default()
        };
        let cfg = AugConfig { p_reply: 1.0, ..AugConfig::default() };
        for seed in 0..50 {
            let mut w = Vec::new();
            let items = generate_reply(&ctx, &dict, &mut TurnRng::from_seed(seed), &cfg, &BTreeSet::new(), &mut w);
            assert_eq!(items.len(), 1);
            assert!(["south", "north", "west", "east", "centre", "dontcare"].contains(&items[0].value.as_str()));
        }
    }

    #[test]
    fn reply_two_slots_and_unknown_slot() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext {
            system_acts: vec![
                SystemAct::request(slot("hotel-area")),
                SystemAct::request(slot("hotel-price")),
                SystemAct::request(slot("hotel-foo")),
            ],
            ..TurnContext::default()
        };
        let cfg = AugConfig { p_reply: 1.0, ..AugConfig::default() };
        let mut w = Vec::new();
        let items = generate_reply(&ctx, &dict, &mut TurnRng::from_seed(4), &cfg, &BTreeSet::new(), &mut w);
        assert_eq!(items.len(), 2);
        assert_eq!(w, vec![ActGenWarning::UnknownRequestedSlot { slot: slot("hotel-foo") }]);
    }

    #[test]
    fn inform_stays_in_domain_and_avoids_reserved() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext { active_domain: Some(Domain::Restaurant), ..TurnContext::default() };
        let cfg = AugConfig {
            inform_count_weights: [0.0, 0.0, 1.0, 0.0],
            p_domain: 1.0,
            ..AugConfig::default()
        };
        let reserved: BTreeSet<SlotName> = [slot("restaurant-area")].into();
        for seed in 0..100 {
            let mut w = Vec::new();
            let (items, sw) = generate_inform(&ctx, &dict, &mut TurnRng::from_seed(seed), &cfg, &reserved, &mut w);
            assert_eq!(sw, None);
            assert_eq!(items.len(), 2);
            assert_ne!(items[0].slot, items[1].slot);
            for i in &items {
                assert_eq!(i.slot.domain(), Domain::Restaurant);
                assert!(!reserved.contains(&i.slot));
                assert!(dict.values(&i.slot).unwrap().contains(&i.value));
            }
        }
    }

    #[test]
    fn inform_switch_goes_elsewhere() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext { active_domain: Some(Domain::Restaurant), ..TurnContext::default() };
        let cfg = AugConfig {
            inform_count_weights: [0.0, 1.0, 0.0, 0.0],
            p_domain: 0.0,
            ..AugConfig::default()
        };
        let mut seen = BTreeSet::new();
        for seed in 0..200 {
            let mut w = Vec::new();
            let (items, sw) = generate_inform(&ctx, &dict, &mut TurnRng::from_seed(seed), &cfg, &BTreeSet::new(), &mut w);
            let sw = sw.expect("p_domain = 0 in stay mode always switches when unengaged");
            assert_ne!(sw, Domain::Restaurant);
            assert_eq!(items[0].slot.domain(), sw);
            seen.insert(sw);
        }
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn stay_mode_never_switches_when_engaged() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext { active_domain: Some(Domain::Hotel), ..TurnContext::default() };
        let cfg = AugConfig { inform_count_weights: [0.0, 1.0, 0.0, 0.0], p_domain: 0.0, ..AugConfig::default() };
        let reserved: BTreeSet<SlotName> = [slot("hotel-area")].into();
        for seed in 0..50 {
            let mut w = Vec::new();
            let (_, sw) = generate_inform(&ctx, &dict, &mut TurnRng::from_seed(seed), &cfg, &reserved, &mut w);
            assert_eq!(sw, None);
        }
        let literal = AugConfig { p_domain: 1.0, domain_switch_mode: DomainSwitchMode::Switch, ..cfg };
        let mut w = Vec::new();
        let (_, sw) = generate_inform(&ctx, &dict, &mut TurnRng::from_seed(0), &literal, &reserved, &mut w);
        assert!(sw.is_some());
    }

    #[test]
    fn inform_zero_count() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext { active_domain: Some(Domain::Taxi), ..TurnContext::default() };
        let mut w = Vec::new();
        let out = generate_inform(&ctx, &dict, &mut TurnRng::from_seed(0), &zero_cfg(), &BTreeSet::new(), &mut w);
        assert_eq!(out, (vec![], None));
    }

    #[test]
    fn inform_truncates_small_domain() {
        let dict = SlotValueDict::bundled();
        let ctx = TurnContext { active_domain: Some(Domain::Attraction), ..TurnContext::default() };
        let cfg = AugConfig { inform_count_weights: [0.0, 0.0, 0.0, 1.0], p_domain: 1.0, ..AugConfig::default() };
        let reserved: BTreeSet<SlotName> = [slot("attraction-area")].into();
        let mut w = Vec::new();
        let (items, _) = generate_inform(&ctx, &dict, &mut TurnRng::from_seed(0), &cfg, &reserved, &mut w);
        assert_eq!(items.len(), 2);
        assert_eq!(
            w,
            vec![ActGenWarning::InformTruncated { domain: Domain::Attraction, requested: 3, available: 2 }]
        );
    }

    #[test]
    fn coreference_takes_referred_value() {
        let coref = CorefList::bundled();
        let mut prior = DialogueState::new();
        prior.insert(slot("restaurant-time"), "17:26");
        let ctx = TurnContext { prior_state: prior, ..TurnContext::default() };
        let cfg = AugConfig { p_coref: 1.0, ..AugConfig::default() };
        let items = vec![ActItem::new(ActType::Inform, slot("taxi-arrive"), "19:31")];
        let (out, applied) = apply_coreference(items, &[], &ctx, &coref, &mut TurnRng::from_seed(0), &cfg);
        assert!(applied);
        assert_eq!(out[0].value, "17:26");
        assert_eq!(out[0].refer, Some(slot("restaurant-time")));
    }

    #[test]
    fn coreference_degenerate_and_ineligible() {
        let coref = CorefList::bundled();
        let mut prior = DialogueState::new();
        prior.insert(slot("restaurant-time"), "17:26");
        let ctx = TurnContext { prior_state: prior, ..TurnContext::default() };
        let items = vec![ActItem::new(ActType::Inform, slot("taxi-arrive"), "19:31")];
        let off = AugConfig { p_coref: 0.0, ..AugConfig::default() };
        let (out, applied) = apply_coreference(items.clone(), &[], &ctx, &coref, &mut TurnRng::from_seed(0), &off);
        assert_eq!((out, applied), (items, false));
        let on = AugConfig { p_coref: 1.0, ..AugConfig::default() };
        let unlisted = vec![ActItem::new(ActType::Inform, slot("train-dest"), "broadway")];
        let (out, applied) = apply_coreference(unlisted.clone(), &[], &ctx, &coref, &mut TurnRng::from_seed(0), &on);
        assert_eq!((out, applied), (unlisted, false));
    }

    #[test]
    fn coreference_sees_same_turn_items() {
        let coref = CorefList::bundled();
        let ctx = TurnContext::default();
        let cfg = AugConfig { p_coref: 1.0, ..AugConfig::default() };
        let confirm = vec![ActItem::new(ActType::Confirm, slot("restaurant-area"), "north")];
        let items = vec![ActItem::new(ActType::Inform, slot("hotel-area"), "east")];
        let (out, applied) = apply_coreference(items, &confirm, &ctx, &coref, &mut TurnRng::from_seed(0), &cfg);
        assert!(applied);
        assert_eq!(out[0].value, "north");
    }

    #[test]
    fn compose_orders_and_overwrites() {
        let mut prior = DialogueState::new();
        prior.insert(slot("hotel-area"), "east");
        let (act, state) = compose_turn(vec![], vec![], vec![], &prior).unwrap();
        assert!(act.is_empty());
        assert_eq!(state, prior);

        let (_, state) = compose_turn(
            vec![ActItem::new(ActType::Confirm, slot("restaurant-name"), "pho bistro")],
            vec![],
            vec![],
            &DialogueState::new(),
        )
        .unwrap();
        assert_eq!(state.get(&slot("restaurant-name")), Some("pho bistro"));

        let (act, state) = compose_turn(
            vec![],
            vec![ActItem::new(ActType::Reply, slot("train-day"), "march 11th")],
            vec![
                ActItem::new(ActType::Inform, slot("hotel-stars"), "4"),
                ActItem::new(ActType::Inform, slot("hotel-area"), "north"),
            ],
            &prior,
        )
        .unwrap();
        assert_eq!(state.get(&slot("hotel-area")), Some("north"));
        let order: Vec<String> = act.items.iter().map(|i| i.slot.to_string()).collect();
        assert_eq!(order, ["train-day", "hotel-area", "hotel-stars"]);
    }

    #[test]
    fn compose_rejects_collisions() {
        let err = compose_turn(
            vec![ActItem::new(ActType::Confirm, slot("hotel-area"), "north")],
            vec![ActItem::new(ActType::Reply, slot("hotel-area"), "south")],
            vec![],
            &DialogueState::new(),
        )
        .unwrap_err();
        assert_eq!(err, ActGenError::SlotCollision(slot("hotel-area")));
    }

    #[test]
    fn degenerate_user_acts() {
        let dict = SlotValueDict::bundled();
        let coref = CorefList::bundled();
        let mut ctx = recommend_ctx();
        ctx.prior_state.insert(slot("hotel-area"), "east");
        let out = generate_user_act(&ctx, &dict, &coref, &mut TurnRng::from_seed(0), &zero_cfg()).unwrap();
        assert!(out.act.is_empty());
        assert_eq!(out.state, ctx.prior_state);

        let ctx = TurnContext {
            system_acts: vec![SystemAct::recommend(slot("hotel-name"), "travelodge")],
            active_domain: Some(Domain::Hotel),
            ..TurnContext::default()
        };
        let cfg = AugConfig { p_confirm: 1.0, ..zero_cfg() };
        let out = generate_user_act(&ctx, &dict, &coref, &mut TurnRng::from_seed(0), &cfg).unwrap();
        assert_eq!(out.act.items, vec![ActItem::new(ActType::Confirm, slot("hotel-name"), "travelodge")]);
    }

    #[test]
    fn active_domain_precedence() {
        let mut prior = DialogueState::new();
        prior.insert(slot("hotel-area"), "east");
        prior.insert(slot("taxi-dest"), "pho bistro");
        prior.insert(slot("taxi-leave"), "19:01");
        assert_eq!(active_domain(&[], None, &prior), Some(Domain::Taxi));
        assert_eq!(active_domain(&[], Some(Domain::Train), &prior), Some(Domain::Train));
        let acts = [SystemAct::request(slot("attraction-area"))];
        assert_eq!(active_domain(&acts, Some(Domain::Train), &prior), Some(Domain::Attraction));
        assert_eq!(active_domain(&[], None, &DialogueState::new()), None);
    }
}
