//! Act-policy law checks over synthetic turns.

use std::collections::BTreeSet;

use actforge::actgen::{generate_inform, generate_user_act, AugConfig, DomainSwitchMode, GeneratedAct, TurnContext};
use actforge::corpus::{ActType, CorefList, SlotName, SlotValueDict, SystemAct, SystemActKind};
use actforge::genbridge::PhraseLexicon;
use actforge::rng::TurnRng;

use super::random_context;

pub struct Rate {
    pub name: &'static str,
    pub hits: usize,
    pub trials: usize,
    pub p: f64,
}

impl Rate {
    pub fn empirical(&self) -> f64 {
        self.hits as f64 / self.trials as f64
    }

    pub fn sigma(&self) -> f64 {
        (self.p * (1.0 - self.p) / self.trials as f64).sqrt()
    }

    pub fn within(&self, k: f64) -> bool {
        self.trials > 0 && (self.empirical() - self.p).abs() <= k * self.sigma()
    }
}

fn recommended(ctx: &TurnContext) -> bool {
    ctx.system_acts.iter().any(|a| a.kind == SystemActKind::Recommend && a.slot.is_some() && a.value.is_some())
}

fn answerable(ctx: &TurnContext, dict: &SlotValueDict, gen: &GeneratedAct) -> BTreeSet<SlotName> {
    let confirmed: BTreeSet<&SlotName> = gen.act.of_type(ActType::Confirm).map(|i| &i.slot).collect();
    ctx.system_acts
        .iter()
        .filter(|a| a.kind == SystemActKind::Request)
        .filter_map(|a| a.slot.clone())
        .filter(|s| dict.contains_slot(s) && !confirmed.contains(s))
        .collect()
}

/// Whether some inform item of a coreference-free run could be rewritten:
/// one of its listed targets holds a value other than dontcare in this
/// turn's act or in the prior state.
fn coref_eligible(ctx: &TurnContext, coref: &CorefList, gen: &GeneratedAct) -> bool {
    gen.act.of_type(ActType::Inform).any(|item| {
        coref.targets(&item.slot).iter().any(|t| {
            let v = gen
                .act
                .item(&t.referred)
                .map(|i| i.value.clone())
                .or_else(|| ctx.prior_state.get(&t.referred).map(str::to_string));
            v.is_some_and(|v| v != "dontcare")
        })
    })
}

/// A context with at least one recommendation and one request.
pub fn eligible_context(dict: &SlotValueDict, lexicon: &PhraseLexicon, rng: &mut TurnRng) -> TurnContext {
    let mut ctx = random_context(dict, lexicon, rng);
    let slots: Vec<&SlotName> = dict.slots().collect();
    if !recommended(&ctx) {
        let s = (*rng.pick(&slots)).clone();
        let v = dict.values(&s).unwrap().iter().find(|v| *v != "dontcare").unwrap().clone();
        ctx.system_acts.retain(|a| a.slot.as_ref() != Some(&s));
        ctx.system_acts.push(SystemAct::recommend(s, &v));
    }
    if !ctx.system_acts.iter().any(|a| a.kind == SystemActKind::Request) {
        let s = (*rng.pick(&slots)).clone();
        if !ctx.system_acts.iter().any(|a| a.slot.as_ref() == Some(&s)) {
            ctx.system_acts.push(SystemAct::request(s));
        }
    }
    ctx
}

/// Degenerate settings: every combination of p_confirm, p_reply, p_coref in
/// {0, 1}. Returns the number of turns checked or the first violation.
pub fn degenerate_laws(turns: usize) -> Result<usize, String> {
    let dict = SlotValueDict::bundled();
    let coref = CorefList::bundled();
    let lexicon = PhraseLexicon::bundled();
    let mut checked = 0;
    for combo in 0..8u32 {
        let bit = |b: u32| if combo & (1 << b) != 0 { 1.0 } else { 0.0 };
        let cfg = AugConfig { p_confirm: bit(0), p_reply: bit(1), p_coref: bit(2), ..AugConfig::default() };
        let no_coref = AugConfig { p_coref: 0.0, ..cfg.clone() };
        for seed in 0..turns as u64 {
            let mut ctx_rng = TurnRng::from_seed(seed);
            let ctx = eligible_context(&dict, &lexicon, &mut ctx_rng);
            let gen = generate_user_act(&ctx, &dict, &coref, &mut TurnRng::from_seed(seed), &cfg).map_err(|e| e.to_string())?;
            let base = generate_user_act(&ctx, &dict, &coref, &mut TurnRng::from_seed(seed), &no_coref).map_err(|e| e.to_string())?;
            let fail = |law: &str| Err(format!("{law} law broken: combo {combo}, seed {seed}, act {:?}", gen.act));
            let has_confirm = gen.act.of_type(ActType::Confirm).next().is_some();
            if has_confirm != (cfg.p_confirm == 1.0 && recommended(&ctx)) {
                return fail("confirm");
            }
            let replied: BTreeSet<SlotName> = gen.act.of_type(ActType::Reply).map(|i| i.slot.clone()).collect();
            let expected = if cfg.p_reply == 1.0 { answerable(&ctx, &dict, &gen) } else { BTreeSet::new() };
            if replied != expected {
                return fail("reply");
            }
            let refers = gen.act.items.iter().filter(|i| i.refer.is_some()).count();
            let want = usize::from(cfg.p_coref == 1.0 && coref_eligible(&ctx, &coref, &base));
            if refers != want || gen.coref_applied != (want == 1) {
                return fail("coreference");
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Empirical rates under the default configuration.
pub fn default_rates(turns: usize) -> Vec<Rate> {
    let dict = SlotValueDict::bundled();
    let coref = CorefList::bundled();
    let lexicon = PhraseLexicon::bundled();
    let cfg = AugConfig::default();
    let no_coref = AugConfig { p_coref: 0.0, ..cfg.clone() };
    let mut confirm = Rate { name: "p_confirm", hits: 0, trials: 0, p: cfg.p_confirm };
    let mut reply = Rate { name: "p_reply", hits: 0, trials: 0, p: cfg.p_reply };
    let mut coref_rate = Rate { name: "p_coref", hits: 0, trials: 0, p: cfg.p_coref };
    let mut stay = Rate { name: "p_domain (stay)", hits: 0, trials: 0, p: 1.0 - cfg.p_domain };
    let mut switch = Rate { name: "p_domain (switch)", hits: 0, trials: 0, p: cfg.p_domain };
    let mut counts: Vec<Rate> = (0..4)
        .map(|k| Rate { name: ["k=0", "k=1", "k=2", "k=3"][k], hits: 0, trials: 0, p: cfg.inform_count_weights[k] })
        .collect();
    for seed in 0..turns as u64 {
        let ctx = eligible_context(&dict, &lexicon, &mut TurnRng::from_seed(seed));
        let gen = generate_user_act(&ctx, &dict, &coref, &mut TurnRng::from_seed(seed + 1_000_000), &cfg).unwrap();
        let base = generate_user_act(&ctx, &dict, &coref, &mut TurnRng::from_seed(seed + 1_000_000), &no_coref).unwrap();
        confirm.trials += 1;
        confirm.hits += usize::from(gen.act.of_type(ActType::Confirm).next().is_some());
        let ans = answerable(&ctx, &dict, &gen);
        reply.trials += ans.len();
        reply.hits += gen.act.of_type(ActType::Reply).filter(|i| ans.contains(&i.slot)).count();
        if coref_eligible(&ctx, &coref, &base) {
            coref_rate.trials += 1;
            coref_rate.hits += usize::from(gen.coref_applied);
        }

        // domain switching and inform counts: no system acts, known domain
        let mut plain = random_context(&dict, &lexicon, &mut TurnRng::from_seed(seed + 2_000_000));
        plain.system_acts.clear();
        plain.active_domain = plain.active_domain.or(Some(actforge::Domain::Hotel));
        for (mode, rate) in [(DomainSwitchMode::Stay, &mut stay), (DomainSwitchMode::Switch, &mut switch)] {
            let c = AugConfig { domain_switch_mode: mode, ..cfg.clone() };
            let mut warnings = Vec::new();
            let mut rng = TurnRng::from_seed(seed + 3_000_000);
            let (items, switched) = generate_inform(&plain, &dict, &mut rng, &c, &BTreeSet::new(), &mut warnings);
            if !items.is_empty() {
                rate.trials += 1;
                rate.hits += usize::from(switched.is_some());
            }
            if mode == DomainSwitchMode::Stay {
                for (k, r) in counts.iter_mut().enumerate() {
                    r.trials += 1;
                    r.hits += usize::from(items.len() == k);
                }
            }
        }
    }
    let mut out = vec![confirm, reply, coref_rate, stay, switch];
    out.extend(counts);
    out
}
