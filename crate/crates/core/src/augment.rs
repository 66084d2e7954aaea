//! Corpus augmentation: for each turn, sample a new user act, realize it,
//! filter the candidates and emit the first consistent utterance. Also the
//! value-substitution baseline.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actgen::{generate_user_act, ActGenError, AugConfig, TurnContext};
use crate::corpus::{
    ActType, CorefList, Corpus, Dialogue, DialogueState, SlotName, SlotValueDict, Turn, UserAct,
};
use crate::filter::{filter_candidates, FilterError, StateFilter};
use crate::genbridge::{GenError, Generator, GeneratorKind};
use crate::rng::{SeedTuple, Stream, TurnRng};
use crate::text::find_phrase;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugRecord {
    pub dialogue_id: String,
    pub turn_id: usize,
    pub system_utterance: String,
    pub history: Vec<(String, String)>,
    pub augmented_act: UserAct,
    pub augmented_utterance: String,
    pub new_belief_state: DialogueState,
    pub generator: GeneratorKind,
    pub attempts: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActTypeCounts {
    pub confirm: usize,
    pub reply: usize,
    pub inform: usize,
}

impl ActTypeCounts {
    fn add_act(&mut self, act: &UserAct) {
        for item in &act.items {
            match item.act_type {
                ActType::Confirm => self.confirm += 1,
                ActType::Reply => self.reply += 1,
                ActType::Inform => self.inform += 1,
            }
        }
    }

    fn merge(&mut self, o: &ActTypeCounts) {
        self.confirm += o.confirm;
        self.reply += o.reply;
        self.inform += o.inform;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AugStats {
    pub turns_attempted: usize,
    pub turns_succeeded: usize,
    pub turns_skipped: usize,
    pub turns_errored: usize,
    pub success_rate: f64,
    /// Act items of the accepted records, by act type.
    pub act_type_counts: ActTypeCounts,
    pub domain_switches: usize,
    pub coref_applied: usize,
    pub warnings: usize,
}

impl AugStats {
    pub fn merge(&mut self, o: &AugStats) {
        self.turns_attempted += o.turns_attempted;
        self.turns_succeeded += o.turns_succeeded;
        self.turns_skipped += o.turns_skipped;
        self.turns_errored += o.turns_errored;
        self.act_type_counts.merge(&o.act_type_counts);
        self.domain_switches += o.domain_switches;
        self.coref_applied += o.coref_applied;
        self.warnings += o.warnings;
        self.finish();
    }

    fn finish(&mut self) {
        self.success_rate = if self.turns_attempted == 0 {
            0.0
        } else {
            self.turns_succeeded as f64 / self.turns_attempted as f64
        };
    }
}

#[derive(Debug, Error)]
pub enum TurnError {
    #[error(transparent)]
    ActGen(#[from] ActGenError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

#[derive(Debug, Error)]
#[error("dialogue `{dialogue_id}` turn {turn_id}: {source}")]
pub struct AugmentError {
    pub dialogue_id: String,
    pub turn_id: usize,
    #[source]
    pub source: TurnError,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TurnOutcome {
    /// The sampled act was empty.
    Skipped,
    /// No candidate passed the filter.
    Failed { attempts: usize },
    Accepted {
        record: AugRecord,
        switched_domain: bool,
        coref_applied: bool,
        warnings: usize,
    },
}

/// Everything a turn augmentation needs besides the turn itself.
#[derive(Clone, Copy)]
pub struct AugDeps<'a> {
    pub dict: &'a SlotValueDict,
    pub coref: &'a CorefList,
    pub generator: &'a dyn Generator,
    pub filter: &'a dyn StateFilter,
}

pub fn augment_turn(
    ctx: &TurnContext,
    deps: &AugDeps,
    cfg: &AugConfig,
    seed: &SeedTuple,
) -> Result<TurnOutcome, TurnError> {
    let mut rng = seed.rng(Stream::Act);
    let gen = generate_user_act(ctx, deps.dict, deps.coref, &mut rng, cfg)?;
    if gen.act.is_empty() {
        return Ok(TurnOutcome::Skipped);
    }
    let candidates = deps.generator.candidates(&gen.act, ctx, seed, cfg.beam_size)?;
    let (accepted, attempts) = filter_candidates(&candidates, ctx, &gen.act, deps.filter)?;
    let Some(utterance) = accepted else {
        return Ok(TurnOutcome::Failed { attempts });
    };
    Ok(TurnOutcome::Accepted {
        record: AugRecord {
            dialogue_id: seed.dialogue_id.clone(),
            turn_id: seed.turn_id,
            system_utterance: ctx.system_utterance.clone(),
            history: ctx.history.clone(),
            augmented_act: gen.act,
            augmented_utterance: utterance,
            new_belief_state: gen.state,
            generator: deps.generator.kind(),
            attempts,
        },
        switched_domain: gen.switched_domain.is_some(),
        coref_applied: gen.coref_applied,
        warnings: gen.warnings.len(),
    })
}

#[derive(Debug, Default)]
pub struct AugOutput {
    pub records: Vec<AugRecord>,
    pub stats: AugStats,
    pub errors: Vec<AugmentError>,
}

fn augment_dialogue(d: &Dialogue, deps: &AugDeps, cfg: &AugConfig) -> AugOutput {
    let mut out = AugOutput::default();
    for t in 0..d.turns.len() {
        let ctx = TurnContext::from_dialogue(d, t);
        let turn_id = d.turns[t].turn_id;
        let seed = SeedTuple::new(cfg.seed, &d.id, turn_id);
        match augment_turn(&ctx, deps, cfg, &seed) {
            Ok(TurnOutcome::Skipped) => out.stats.turns_skipped += 1,
            Ok(TurnOutcome::Failed { .. }) => out.stats.turns_attempted += 1,
            Ok(TurnOutcome::Accepted {
                record,
                switched_domain,
                coref_applied,
                warnings,
            }) => {
                let s = &mut out.stats;
                s.turns_attempted += 1;
                s.turns_succeeded += 1;
                s.act_type_counts.add_act(&record.augmented_act);
                s.domain_switches += usize::from(switched_domain);
                s.coref_applied += usize::from(coref_applied);
                s.warnings += warnings;
                out.records.push(record);
            }
            Err(source) => {
                out.stats.turns_errored += 1;
                out.errors.push(AugmentError {
                    dialogue_id: d.id.clone(),
                    turn_id,
                    source,
                });
            }
        }
    }
    out.stats.finish();
    out
}

/// Augment every turn of every dialogue on `workers` threads. Records come
/// back in corpus order whatever the worker count, and each turn's draws
/// depend only on the seed tuple, so the output is identical across runs
/// and worker counts. Per-turn errors are collected rather than aborting.
pub fn augment_corpus(corpus: &Corpus, deps: &AugDeps, cfg: &AugConfig, workers: usize) -> AugOutput {
    let n = corpus.dialogues.len();
    let workers = workers.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let mut parts: Vec<(usize, AugOutput)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break done;
                        }
                        done.push((i, augment_dialogue(&corpus.dialogues[i], deps, cfg)));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("augmentation worker panicked"))
            .collect()
    });
    parts.sort_by_key(|(i, _)| *i);
    let mut out = AugOutput::default();
    for (_, part) in parts {
        out.records.extend(part.records);
        out.stats.merge(&part.stats);
        out.errors.extend(part.errors);
    }
    out.stats.finish();
    out
}

/// Accepted records as a corpus, one dialogue `<id>-aug` per source
/// dialogue, so the output can be checked with the corpus validators.
/// System acts are taken from `source`.
pub fn records_to_corpus(records: &[AugRecord], source: &Corpus) -> Corpus {
    let mut by_dialogue: BTreeMap<&str, Vec<&AugRecord>> = BTreeMap::new();
    for r in records {
        by_dialogue.entry(&r.dialogue_id).or_default().push(r);
    }
    let dialogues = by_dialogue
        .into_iter()
        .map(|(id, recs)| {
            let original = source.dialogue(id);
            Dialogue {
                id: format!("{id}-aug"),
                turns: recs
                    .into_iter()
                    .map(|r| Turn {
                        turn_id: r.turn_id,
                        system_utterance: r.system_utterance.clone(),
                        system_acts: original
                            .and_then(|d| d.turns.iter().find(|t| t.turn_id == r.turn_id))
                            .map(|t| t.system_acts.clone())
                            .unwrap_or_default(),
                        user_utterance: r.augmented_utterance.clone(),
                        user_act: r.augmented_act.clone(),
                        belief_state: r.new_belief_state.clone(),
                    })
                    .collect(),
            }
        })
        .collect();
    Corpus { dialogues }
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parse JSON lines, skipping blank ones. Errors carry the 1-based line.
pub fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| (n + 1, e)))
        .collect()
}

// ---------------------------------------------------------------------------
// Value substitution
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub slot: SlotName,
    pub old: String,
    pub new: String,
    /// Byte offsets of the replaced occurrences in the original utterance.
    pub offsets: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VsRecord {
    pub dialogue_id: String,
    pub turn_id: usize,
    pub original_utterance: String,
    pub substitutions: Vec<Substitution>,
    pub turn: Turn,
}

/// Replace every span value of the user act that occurs verbatim (word
/// boundaries, ASCII case-insensitive) in the user utterance with a fresh
/// value from the same dictionary row, in the utterance, the act and the
/// belief state. Boolean, dontcare and refer items are left alone, as are
/// values whose occurrences overlap an earlier item's. `None` when nothing
/// was substituted.
pub fn value_substitution(
    turn: &Turn,
    dict: &SlotValueDict,
    rng: &mut TurnRng,
) -> Option<(Turn, Vec<Substitution>)> {
    let lower = turn.user_utterance.to_ascii_lowercase();
    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut subs = Vec::new();
    for item in &turn.user_act.items {
        if item.refer.is_some() || item.value == "dontcare" || dict.is_boolean(&item.slot) {
            continue;
        }
        let Some(row) = dict.values(&item.slot) else {
            continue;
        };
        let offsets = find_phrase(&lower, &item.value);
        if offsets.is_empty() {
            continue;
        }
        let spans: Vec<(usize, usize)> = offsets.iter().map(|&o| (o, o + item.value.len())).collect();
        let overlaps = spans
            .iter()
            .any(|&(s, e)| taken.iter().any(|&(ts, te)| s < te && ts < e));
        if overlaps {
            continue;
        }
        let fresh: Vec<&String> = row
            .iter()
            .filter(|v| **v != item.value && v.as_str() != "dontcare")
            .collect();
        if fresh.is_empty() {
            continue;
        }
        let new = (*rng.pick(&fresh)).clone();
        taken.extend(spans);
        subs.push(Substitution {
            slot: item.slot.clone(),
            old: item.value.clone(),
            new,
            offsets,
        });
    }
    if subs.is_empty() {
        return None;
    }
    let mut edits: Vec<(usize, usize, &str)> = subs
        .iter()
        .flat_map(|s| s.offsets.iter().map(move |&o| (o, o + s.old.len(), s.new.as_str())))
        .collect();
    edits.sort_by_key(|e| std::cmp::Reverse(e.0));
    let mut out = turn.clone();
    for (start, end, new) in edits {
        out.user_utterance.replace_range(start..end, new);
    }
    for s in &subs {
        for item in out.user_act.items.iter_mut().filter(|i| i.slot == s.slot) {
            item.value = s.new.clone();
        }
        if out.belief_state.get(&s.slot) == Some(s.old.as_str()) {
            out.belief_state.insert(s.slot.clone(), s.new.clone());
        }
    }
    Some((out, subs))
}

/// Value substitution over a corpus; turns without a substitutable value
/// are left out.
pub fn value_substitution_corpus(corpus: &Corpus, dict: &SlotValueDict, global_seed: u64) -> Vec<VsRecord> {
    let mut out = Vec::new();
    for d in &corpus.dialogues {
        for turn in &d.turns {
            let mut rng = SeedTuple::new(global_seed, &d.id, turn.turn_id).rng(Stream::ValueSubstitution);
            if let Some((new_turn, substitutions)) = value_substitution(turn, dict, &mut rng) {
                out.push(VsRecord {
                    dialogue_id: d.id.clone(),
                    turn_id: turn.turn_id,
                    original_utterance: turn.user_utterance.clone(),
                    substitutions,
                    turn: new_turn,
                });
            }
        }
    }
    out
}
