//! Best-effort conversion from raw MultiWOZ 2.x `data.json` into the
//! canonical corpus schema.
//!
//! Field mapping:
//!
//! | raw                                        | canonical                          |
//! |--------------------------------------------|------------------------------------|
//! | top-level key                              | `Dialogue.id` (sorted)             |
//! | `log[2t]["text"]`                          | `Turn.user_utterance`              |
//! | `log[2t-1]["text"]` (empty for t = 0)      | `Turn.system_utterance`            |
//! | `log[2t-1]["dialog_act"]`                  | `Turn.system_acts`                 |
//! | `log[2t+1]["metadata"][d]["semi"/"book"]`  | `Turn.belief_state`                |
//! | `log[2t]["dialog_act"]` `*-Inform` items   | `Turn.user_act`                    |
//! | `log[2t]["coreference"]` (2.3)             | `ActItem.refer`                    |
//!
//! Raw slot names are mapped to the dictionary's names (`pricerange` to
//! `price`, `arriveBy` to `arrive`, ...). Values `""`, `"none"` and
//! `"not mentioned"` are dropped; the various "don't care" spellings become
//! `dontcare`. User act items are kept only when they agree with the turn's
//! belief state, and are typed as `reply` when the system requested the slot,
//! `confirm` when the system recommended that exact value, `inform`
//! otherwise. System act kinds other than recommend, request and booking
//! offers map to `inform`. Coreference annotations are read as arrays
//! `[slot, value, referred_domain, referred_slot, ...]` and kept only when the
//! pair is in the coreference list and the referred slot carries the same
//! value in the belief state.

use std::collections::BTreeMap;

use serde_json::Value;

use super::{
    ActItem, ActType, CorefList, Corpus, Dialogue, DialogueState, Domain, SlotName, SystemAct,
    SystemActKind, Turn, UserAct,
};
use crate::text::collapse;

fn map_slot(raw: &str) -> Option<&'static str> {
    let s = raw.trim().to_lowercase();
    Some(match s.as_str() {
        "area" => "area",
        "pricerange" | "price" | "price range" => "price",
        "food" => "food",
        "name" => "name",
        "type" => "type",
        "stars" => "stars",
        "internet" => "internet",
        "parking" => "parking",
        "day" => "day",
        "people" => "people",
        "stay" => "stay",
        "time" => "time",
        "arriveby" | "arrive" => "arrive",
        "leaveat" | "leave" => "leave",
        "departure" | "depart" => "depart",
        "destination" | "dest" => "dest",
        _ => return None,
    })
}

fn slot_for(domain: &str, raw_slot: &str) -> Option<SlotName> {
    let domain: Domain = domain.parse().ok()?;
    SlotName::new(domain, map_slot(raw_slot)?).ok()
}

fn map_value(raw: &str) -> Option<String> {
    let v = collapse(raw);
    match v.as_str() {
        "" | "none" | "not mentioned" | "?" => None,
        "dont care" | "don't care" | "do n't care" | "dontcare" | "do nt care" => {
            Some("dontcare".to_string())
        }
        _ => Some(v),
    }
}

fn belief_from_metadata(meta: &Value) -> DialogueState {
    let mut state = DialogueState::new();
    let Some(domains) = meta.as_object() else {
        return state;
    };
    for (domain, parts) in domains {
        for part in ["semi", "book"] {
            let Some(fields) = parts.get(part).and_then(Value::as_object) else {
                continue;
            };
            for (raw_slot, raw_value) in fields {
                let (Some(slot), Some(value)) = (
                    slot_for(domain, raw_slot),
                    raw_value.as_str().and_then(map_value),
                ) else {
                    continue;
                };
                state.insert(slot, value);
            }
        }
    }
    state
}

/// `{"Domain-Act": [[slot, value], ...]}` flattened to (domain, act, slot, value).
fn dialog_acts(entry: &Value) -> Vec<(String, String, String, String)> {
    let mut out = Vec::new();
    let Some(acts) = entry.get("dialog_act").and_then(Value::as_object) else {
        return out;
    };
    for (name, pairs) in acts {
        let Some((domain, act)) = name.split_once('-') else {
            continue;
        };
        for pair in pairs.as_array().into_iter().flatten() {
            let Some(pair) = pair.as_array() else { continue };
            let slot = pair.first().and_then(Value::as_str).unwrap_or_default();
            let value = pair.get(1).and_then(Value::as_str).unwrap_or_default();
            out.push((
                domain.to_lowercase(),
                act.to_lowercase(),
                slot.to_string(),
                value.to_string(),
            ));
        }
    }
    out
}

fn system_acts(entry: &Value) -> Vec<SystemAct> {
    let mut out = Vec::new();
    for (domain, act, raw_slot, raw_value) in dialog_acts(entry) {
        let Some(slot) = slot_for(&domain, &raw_slot) else {
            continue;
        };
        let kind = match act.as_str() {
            "recommend" => SystemActKind::Recommend,
            "request" => SystemActKind::Request,
            "offerbooked" | "book" => SystemActKind::OfferBooked,
            _ => SystemActKind::Inform,
        };
        let value = match kind {
            SystemActKind::Request => None,
            _ => map_value(&raw_value),
        };
        if kind != SystemActKind::Request && kind != SystemActKind::OfferBooked && value.is_none() {
            continue;
        }
        out.push(SystemAct {
            kind,
            slot: Some(slot),
            value,
        });
    }
    out
}

fn coref_annotations(entry: &Value) -> Vec<(SlotName, SlotName)> {
    let mut out = Vec::new();
    let Some(map) = entry.get("coreference").and_then(Value::as_object) else {
        return out;
    };
    for (name, rows) in map {
        let domain = name.split_once('-').map_or(name.as_str(), |(d, _)| d);
        for row in rows.as_array().into_iter().flatten() {
            let Some(row) = row.as_array() else { continue };
            let field = |i: usize| row.get(i).and_then(Value::as_str).unwrap_or_default();
            if let (Some(slot), Some(referred)) =
                (slot_for(domain, field(0)), slot_for(field(2), field(3)))
            {
                out.push((slot, referred));
            }
        }
    }
    out
}

fn user_act(
    entry: &Value,
    sys: &[SystemAct],
    belief: &DialogueState,
    coref: Option<&CorefList>,
) -> UserAct {
    let refers = coref_annotations(entry);
    let mut items: BTreeMap<SlotName, ActItem> = BTreeMap::new();
    for (domain, act, raw_slot, raw_value) in dialog_acts(entry) {
        if act != "inform" {
            continue;
        }
        let (Some(slot), Some(value)) = (slot_for(&domain, &raw_slot), map_value(&raw_value)) else {
            continue;
        };
        if belief.get(&slot) != Some(value.as_str()) || items.contains_key(&slot) {
            continue;
        }
        let requested = sys
            .iter()
            .any(|a| a.kind == SystemActKind::Request && a.slot.as_ref() == Some(&slot));
        let recommended = sys.iter().any(|a| {
            a.kind == SystemActKind::Recommend
                && a.slot.as_ref() == Some(&slot)
                && a.value.as_deref() == Some(value.as_str())
        });
        let act_type = if requested {
            ActType::Reply
        } else if recommended {
            ActType::Confirm
        } else {
            ActType::Inform
        };
        let mut item = ActItem::new(act_type, slot.clone(), &value);
        if let Some(coref) = coref {
            item.refer = refers
                .iter()
                .find(|(s, r)| {
                    s == &slot && coref.contains_pair(s, r) && belief.get(r) == Some(value.as_str())
                })
                .map(|(_, r)| r.clone());
        }
        items.insert(slot, item);
    }
    UserAct {
        items: items.into_values().collect(),
    }
}

fn convert_dialogue(id: &str, raw: &Value, coref: Option<&CorefList>) -> Option<Dialogue> {
    let log = raw.get("log")?.as_array()?;
    let mut turns = Vec::new();
    for (t, user) in log.iter().step_by(2).enumerate() {
        let system = if t == 0 { None } else { log.get(2 * t - 1) };
        let system_utterance = system
            .and_then(|s| s.get("text"))
            .and_then(Value::as_str)
            .unwrap_or_default();
        let sys_acts = system.map(system_acts).unwrap_or_default();
        let belief = log
            .get(2 * t + 1)
            .and_then(|s| s.get("metadata"))
            .map(belief_from_metadata)
            .unwrap_or_default();
        let act = user_act(user, &sys_acts, &belief, coref);
        turns.push(Turn {
            turn_id: t,
            system_utterance: collapse(system_utterance),
            system_acts: sys_acts,
            user_utterance: collapse(user.get("text").and_then(Value::as_str).unwrap_or_default()),
            user_act: act,
            belief_state: belief,
        });
    }
    (!turns.is_empty()).then(|| Dialogue {
        id: id.to_string(),
        turns,
    })
}

/// Convert a parsed MultiWOZ `data.json` document. Dialogues without a usable
/// `log` are skipped.
pub fn convert(raw: &Value, coref: Option<&CorefList>) -> Corpus {
    let Some(map) = raw.as_object() else {
        return Corpus::default();
    };
    let sorted: BTreeMap<&String, &Value> = map.iter().collect();
    Corpus {
        dialogues: sorted
            .into_iter()
            .filter_map(|(id, d)| convert_dialogue(id, d, coref))
            .collect(),
    }
}
