//! Soundness sweep: every pair of terms the equality engine accepts must
//! have pointwise-equal denotations in random finite models.

use std::collections::BTreeMap;

use crate::checker::{Checker, DualContext};
use crate::equality::Equality;
use crate::fam::FamMorphism;
use crate::gen::{card_bound_by, Judgement};
use crate::interp::{Interp, Model};
use crate::syntax::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SoundnessConfig {
    pub model_seeds: Vec<u64>,
    pub max_fiber: usize,
    /// At most this many judgements per `Δ;Ξ ⊢ A` group are compared pairwise.
    pub group_size: usize,
    pub step_limit: usize,
    /// Judgements whose context and type sizes multiply to more than this
    /// in some model are not enumerated.
    pub budget: u64,
}

impl Default for SoundnessConfig {
    fn default() -> SoundnessConfig {
        SoundnessConfig { model_seeds: vec![11, 22, 33], max_fiber: 4, group_size: 6, step_limit: crate::equality::default_step_limit(), budget: 100_000 }
    }
}

/// One rewrite step, as whole terms.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInstance {
    pub ctx: DualContext,
    pub ty: TypeExpr,
    pub rule: String,
    pub before: TermExpr,
    pub after: TermExpr,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SoundnessOutcome {
    pub judgements: usize,
    /// Pairs submitted to the equality engine.
    pub pairs: usize,
    /// Pairs it accepted; each was compared in every model.
    pub accepted: usize,
    pub comparisons: usize,
    pub step_limit_hits: usize,
    /// Judgements skipped for exceeding the enumeration budget.
    pub too_large: usize,
    pub failures: Vec<String>,
    pub steps: Vec<StepInstance>,
}

struct Sweep<'s> {
    sig: &'s Signature,
    cfg: &'s SoundnessConfig,
    models: Vec<Model>,
    out: SoundnessOutcome,
}

impl<'s> Sweep<'s> {
    fn eq(&self) -> Equality<'s> {
        Equality::new(self.sig).with_step_limit(self.cfg.step_limit)
    }

    /// Denotations of `t` in every model, after re-elaborating it.
    fn denote(&mut self, ctx: &DualContext, t: &TermExpr, ty: &TypeExpr) -> Option<Vec<FamMorphism>> {
        let t = match Checker::with_step_limit(self.sig, self.cfg.step_limit).check_term(ctx, t, ty) {
            Ok(c) => c.term,
            Err(e) => {
                self.out.failures.push(format!("{ctx} ⊢ {t} : {ty} does not re-check: {e}"));
                return None;
            }
        };
        let mut dens = Vec::new();
        for (m, seed) in self.models.iter().zip(&self.cfg.model_seeds) {
            match Interp::new(self.sig, m).denote_term(ctx, &t, ty) {
                Ok(d) => dens.push(d),
                Err(e) => {
                    self.out.failures.push(format!("{ctx} ⊢ {t} : {ty}: no denotation in model {seed}: {e}"));
                    return None;
                }
            }
        }
        Some(dens)
    }

    fn fits(&self, j: &Judgement) -> bool {
        self.models.iter().all(|m| {
            let card = |t: &TypeExpr| card_bound_by(t, &|b| m.fiber_bound(b).unwrap_or(1) as u64);
            let size = j.ctx.int.iter().chain(&j.ctx.lin).fold(card(&j.ty), |acc, (_, t)| acc.saturating_mul(card(t)));
            size <= self.cfg.budget
        })
    }

    fn accepted(&mut self, a: &TermExpr, b: &TermExpr, ty: &TypeExpr) -> bool {
        self.out.pairs += 1;
        match self.eq().judg_equal(a, b, Some(ty)) {
            Ok(true) => {
                self.out.accepted += 1;
                true
            }
            Ok(false) => false,
            Err(_) => {
                self.out.step_limit_hits += 1;
                false
            }
        }
    }

    fn compare(&mut self, ctx: &DualContext, ty: &TypeExpr, a: (&TermExpr, &[FamMorphism]), b: (&TermExpr, &[FamMorphism])) {
        for (i, (da, db)) in a.1.iter().zip(b.1).enumerate() {
            self.out.comparisons += 1;
            if !da.same_action(db) {
                self.out.failures.push(format!(
                    "{ctx} ⊢ {} ≡ {} : {ty} accepted but denotations differ in model {}",
                    a.0, b.0, self.cfg.model_seeds[i]
                ));
                return;
            }
        }
    }

    fn chain(&mut self, j: &Judgement) {
        if !self.fits(j) {
            self.out.too_large += 1;
            return;
        }
        let norm = match self.eq().normalize(&j.term) {
            Ok(n) => n,
            Err(_) => {
                self.out.step_limit_hits += 1;
                return;
            }
        };
        let mut chain = vec![j.term.clone()];
        for s in &norm.trace {
            let whole = s.apply(chain.last().unwrap());
            self.out.steps.push(StepInstance {
                ctx: j.ctx.clone(),
                ty: j.ty.clone(),
                rule: s.rule.to_string(),
                before: chain.last().unwrap().clone(),
                after: whole.clone(),
            });
            chain.push(whole);
        }
        let mut dens = Vec::new();
        for t in &chain {
            match self.denote(&j.ctx, t, &j.ty) {
                Some(d) => dens.push(d),
                None => return,
            }
        }
        for k in 1..chain.len() {
            if self.accepted(&chain[k - 1], &chain[k], &j.ty) {
                self.compare(&j.ctx, &j.ty, (&chain[k - 1], &dens[k - 1]), (&chain[k], &dens[k]));
            }
        }
        let last = chain.len() - 1;
        if last > 1 && self.accepted(&chain[0], &chain[last], &j.ty) {
            self.compare(&j.ctx, &j.ty, (&chain[0], &dens[0]), (&chain[last], &dens[last]));
        }
    }

    fn cross(&mut self, group: &[&Judgement]) {
        let members: Vec<&Judgement> = group.iter().filter(|j| self.fits(j)).take(self.cfg.group_size).copied().collect();
        let mut dens = Vec::new();
        for j in &members {
            dens.push(self.denote(&j.ctx, &j.term, &j.ty));
        }
        for x in 0..members.len() {
            for y in x + 1..members.len() {
                let (a, b) = (members[x], members[y]);
                if let (Some(da), Some(db)) = (&dens[x], &dens[y]) {
                    if self.accepted(&a.term, &b.term, &a.ty) {
                        let (da, db) = (da.clone(), db.clone());
                        self.compare(&a.ctx, &a.ty, (&a.term, &da), (&b.term, &db));
                    }
                }
            }
        }
    }
}

/// Rename the context variables of `j` to `ck` (intuitionistic) and `vk`
/// (linear) by position, so that judgements over the same context shape
/// become comparable.
pub fn positional(j: &Judgement) -> Judgement {
    let mut sub = Vec::new();
    let mut int = Vec::new();
    for (k, (x, ty)) in j.ctx.int.iter().enumerate() {
        let y = format!("c{k}");
        int.push((y.clone(), subst_many(ty, &sub)));
        sub.push((x.clone(), VarKind::Int, TermExpr::IntVar(y)));
    }
    let mut lin = Vec::new();
    for (k, (x, ty)) in j.ctx.lin.iter().enumerate() {
        let y = format!("v{k}");
        lin.push((y.clone(), subst_many(ty, &sub)));
        sub.push((x.clone(), VarKind::Lin, TermExpr::LinVar(y)));
    }
    Judgement { ctx: DualContext::new(int, lin), term: subst_many(&j.term, &sub), ty: subst_many(&j.ty, &sub) }
}

/// Run the sweep over `corpus`, all of whose judgements live over `sig`.
pub fn soundness(sig: &Signature, corpus: &[Judgement], cfg: &SoundnessConfig) -> SoundnessOutcome {
    let models = cfg.model_seeds.iter().map(|&s| Model::random(sig, s, cfg.max_fiber)).collect();
    let mut sw = Sweep { sig, cfg, models, out: SoundnessOutcome { judgements: corpus.len(), ..Default::default() } };
    for j in corpus {
        sw.chain(j);
    }
    let renamed: Vec<Judgement> = corpus.iter().map(positional).collect();
    let mut groups: BTreeMap<String, Vec<&Judgement>> = BTreeMap::new();
    for j in &renamed {
        groups.entry(format!("{} ⊢ {}", j.ctx, j.ty)).or_default().push(j);
    }
    for g in groups.values().filter(|g| g.len() > 1) {
        sw.cross(g);
    }
    sw.out
}

/// Every rewrite step must preserve the type: the result re-checks in the
/// same context. Returns the number of steps checked and the failures.
pub fn subject_reduction(sig: &Signature, steps: &[StepInstance], step_limit: usize) -> (usize, Vec<String>) {
    let checker = Checker::with_step_limit(sig, step_limit);
    let mut failures = Vec::new();
    for s in steps {
        if let Err(e) = checker.check_term(&s.ctx, &s.after, &s.ty) {
            failures.push(format!("{} step {} ⊢ {} ↦ {} : {}: {e}", s.rule, s.ctx, s.before, s.after, s.ty));
        }
    }
    (steps.len(), failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_signature, generate, GenConfig};
    use crate::parser::{parse_term, parse_type};

    #[test]
    fn generated_corpus_is_sound() {
        let sig = gen_signature();
        let (corpus, _) = generate(&sig, 5, 60, GenConfig::default());
        let out = soundness(&sig, &corpus, &SoundnessConfig::default());
        assert!(out.failures.is_empty(), "{:#?}", out.failures);
        assert!(out.accepted > 0 && !out.steps.is_empty());
        let (n, fails) = subject_reduction(&sig, &out.steps, 10_000);
        assert_eq!(n, out.steps.len());
        assert!(fails.is_empty(), "{fails:#?}");
    }

    #[test]
    fn a_wrong_equation_is_caught_semantically() {
        // The swap on A ⊗ A is not the identity once |A| has two non-base
        // points.
        let src = format!("{}model A := pointed {{ a0*, a1, a2 }}.\n", crate::gen::GEN_SIGNATURE);
        let sig = crate::parser::parse_file(&src, None).unwrap().signature;
        let ctx = DualContext::new(vec![], vec![("p".into(), parse_type("A * A", &sig, &[]).unwrap())]);
        let ty = parse_type("A * A", &sig, &[]).unwrap();
        let scope = [("p".to_string(), VarKind::Lin)];
        let id = parse_term("p", &sig, &scope).unwrap().0;
        let sw = parse_term("let p be x (*) y in y (*) x", &sig, &scope).unwrap().0;
        let cfg = SoundnessConfig { model_seeds: vec![0], ..SoundnessConfig::default() };
        let models = vec![Model::from_signature(&sig).unwrap()];
        let mut s = Sweep { sig: &sig, cfg: &cfg, models, out: SoundnessOutcome::default() };
        assert!(!s.accepted(&id, &sw, &ty));
        let (da, db) = (s.denote(&ctx, &id, &ty).unwrap(), s.denote(&ctx, &sw, &ty).unwrap());
        s.compare(&ctx, &ty, (&id, &da), (&sw, &db));
        assert_eq!(s.out.failures.len(), 1);
    }
}
