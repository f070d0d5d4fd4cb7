//! Structural and substitution rules, replayed on concrete judgements.
//!
//! Each rule takes a checked judgement `Δ;Ξ ⊢ t : S` to a new judgement
//! that must also check (or, for equality, hold).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::{Checker, DualContext};
use crate::equality::Equality;
use crate::gen::{inhabit, Judgement};
use crate::syntax::*;

pub const RULES: &[&str] = &["Int-Weak", "Int-Exch", "Lin-Exch", "Int-Ty-Subst", "Int-Tm-Subst", "Lin-Tm-Subst", "Subst-Eq"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RuleTally {
    pub checks: usize,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetaOutcome {
    pub rules: BTreeMap<String, RuleTally>,
    /// Substitutions skipped because no closed filler was found.
    pub skipped: usize,
}

impl MetaOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &String> {
        self.rules.values().flat_map(|r| &r.failures)
    }

    pub fn checks(&self) -> usize {
        self.rules.values().map(|r| r.checks).sum()
    }
}

struct Harness<'s> {
    checker: Checker<'s>,
    eq: Equality<'s>,
    sig: &'s Signature,
    rng: ChaCha8Rng,
    out: MetaOutcome,
}

fn ctx_names(ctx: &DualContext, t: &TermExpr) -> BTreeSet<Name> {
    let mut taken: BTreeSet<Name> = ctx.int.iter().chain(&ctx.lin).map(|(x, _)| x.clone()).collect();
    let fv = t.free_vars();
    taken.extend(fv.int);
    taken.extend(fv.lin.into_keys());
    taken
}

impl Harness<'_> {
    fn expect(&mut self, rule: &str, ctx: &DualContext, t: &TermExpr, ty: &TypeExpr, from: &Judgement) {
        let tally = self.out.rules.entry(rule.to_string()).or_default();
        tally.checks += 1;
        let verdict = self.checker.check_context(ctx).err().or_else(|| self.checker.check_term(ctx, t, ty).err());
        if let Some(e) = verdict {
            tally.failures.push(format!("{rule}: {} ⊢ {} : {} gives {ctx} ⊢ {t} : {ty}, rejected: {e}", from.ctx, from.term, from.ty));
        }
    }

    fn weaken(&mut self, j: &Judgement) {
        let w = fresh_name("w", &ctx_names(&j.ctx, &j.term));
        let at = self.rng.gen_range(0..=j.ctx.int.len());
        let ty = match self.rng.gen_range(0..3) {
            0 => TypeExpr::Two,
            1 => TypeExpr::Bang(Box::new(TypeExpr::Top)),
            _ => TypeExpr::Unit,
        };
        let mut ctx = j.ctx.clone();
        ctx.int.insert(at, (w, ty));
        self.expect("Int-Weak", &ctx, &j.term, &j.ty, j);
    }

    fn exchange(&mut self, j: &Judgement) {
        for i in 0..j.ctx.int.len().saturating_sub(1) {
            let (x, _) = &j.ctx.int[i];
            if j.ctx.int[i + 1].1.free_vars().int.contains(x) {
                continue;
            }
            let mut ctx = j.ctx.clone();
            ctx.int.swap(i, i + 1);
            self.expect("Int-Exch", &ctx, &j.term, &j.ty, j);
        }
        for i in 0..j.ctx.lin.len().saturating_sub(1) {
            let mut ctx = j.ctx.clone();
            ctx.lin.swap(i, i + 1);
            self.expect("Lin-Exch", &ctx, &j.term, &j.ty, j);
        }
    }

    /// A checked term of `ty` over `int` and the linear zone `lin`.
    fn filler(&mut self, int: &[(Name, TypeExpr)], lin: &[(Name, TypeExpr)], ty: &TypeExpr) -> Option<TermExpr> {
        for _ in 0..4 {
            let a = inhabit(self.sig, self.rng.gen(), int, lin, ty, 2)?;
            if let Ok(c) = self.checker.check_term(&DualContext::new(int.to_vec(), lin.to_vec()), &a, ty) {
                return Some(c.term);
            }
        }
        None
    }

    fn subst_equal(&mut self, j: &Judgement, x: &str, kind: VarKind, a: &TermExpr) {
        let Ok(n) = self.eq.nf(&j.term) else { return };
        let ty = subst(&j.ty, x, kind, a);
        let (l, r) = (subst(&j.term, x, kind, a), subst(&n, x, kind, a));
        let tally = self.out.rules.entry("Subst-Eq".to_string()).or_default();
        tally.checks += 1;
        match self.eq.judg_equal(&l, &r, Some(&ty)) {
            Ok(true) => {}
            other => tally.failures.push(format!("Subst-Eq: {} ≡ {} : {} but after [{a}/{x}] got {other:?}", j.term, n, j.ty)),
        }
    }

    fn int_subst(&mut self, j: &Judgement) {
        for i in 0..j.ctx.int.len() {
            let (x, a_ty) = j.ctx.int[i].clone();
            let Some(a) = self.filler(&j.ctx.int[..i], &[], &a_ty) else {
                self.out.skipped += 1;
                continue;
            };
            let rest = |zone: &[(Name, TypeExpr)]| -> Vec<(Name, TypeExpr)> { zone.iter().map(|(y, t)| (y.clone(), subst_int(t, &x, &a))).collect() };
            let mut int = j.ctx.int[..i].to_vec();
            int.extend(rest(&j.ctx.int[i + 1..]));
            let ctx = DualContext::new(int, rest(&j.ctx.lin));
            let ty = subst_int(&j.ty, &x, &a);
            let tally = self.out.rules.entry("Int-Ty-Subst".to_string()).or_default();
            tally.checks += 1;
            if let Err(e) = self.checker.check_type(&ctx.int, &ty) {
                tally.failures.push(format!("Int-Ty-Subst: {} ⊢ {} type, [{a}/{x}] gives {ty}, rejected: {e}", j.ctx, j.ty));
            }
            self.expect("Int-Tm-Subst", &ctx, &subst_int(&j.term, &x, &a), &ty, j);
            self.subst_equal(j, &x, VarKind::Int, &a);
        }
    }

    fn lin_subst(&mut self, j: &Judgement) {
        for i in 0..j.ctx.lin.len() {
            let (y, t_ty) = j.ctx.lin[i].clone();
            let taken = ctx_names(&j.ctx, &j.term);
            // The substituted term brings its own linear zone Ξ′.
            let mut fresh = Vec::new();
            for k in 0..self.rng.gen_range(0..3) {
                let z = fresh_name(&format!("z{k}"), &taken);
                let ty = if k == 0 { t_ty.clone() } else { TypeExpr::Unit };
                fresh.push((z, ty));
            }
            let Some(a) = self.filler(&j.ctx.int, &fresh, &t_ty) else {
                self.out.skipped += 1;
                continue;
            };
            let mut lin = j.ctx.lin[..i].to_vec();
            lin.extend(fresh);
            lin.extend(j.ctx.lin[i + 1..].iter().cloned());
            let ctx = DualContext::new(j.ctx.int.clone(), lin);
            self.expect("Lin-Tm-Subst", &ctx, &subst_lin(&j.term, &y, &a), &j.ty, j);
            self.subst_equal(j, &y, VarKind::Lin, &a);
        }
    }
}

/// Replay every rule on each judgement of `corpus`, which must all check.
pub fn replay(sig: &Signature, corpus: &[Judgement], seed: u64, step_limit: usize) -> MetaOutcome {
    let mut h = Harness {
        checker: Checker::with_step_limit(sig, step_limit),
        eq: Equality::new(sig).with_step_limit(step_limit),
        sig,
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: MetaOutcome::default(),
    };
    for r in RULES {
        h.out.rules.insert(r.to_string(), RuleTally::default());
    }
    for j in corpus {
        h.weaken(j);
        h.exchange(j);
        h.int_subst(j);
        h.lin_subst(j);
    }
    h.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_signature, generate, GenConfig};

    #[test]
    fn rules_hold_on_fixtures_and_generated_terms() {
        let fx = crate::corpus::fixtures(10_000);
        for f in &fx {
            let out = replay(f.signature(), &f.judgements, 3, 10_000);
            let fails: Vec<&String> = out.failures().take(5).collect();
            assert!(fails.is_empty(), "{}: {fails:#?}", f.name);
        }
        let sig = gen_signature();
        let (corpus, _) = generate(&sig, 4, 150, GenConfig::default());
        let out = replay(&sig, &corpus, 4, 10_000);
        let fails: Vec<&String> = out.failures().take(5).collect();
        assert!(fails.is_empty(), "{fails:#?}");
        for r in RULES {
            assert!(out.rules[*r].checks > 0, "{r} never exercised");
        }
    }

    #[test]
    fn a_broken_weakening_is_reported() {
        let sig = gen_signature();
        let j = Judgement { ctx: DualContext::empty(), term: TermExpr::TT, ty: TypeExpr::Two };
        let mut h = Harness {
            checker: Checker::new(&sig),
            eq: Equality::new(&sig),
            sig: &sig,
            rng: ChaCha8Rng::seed_from_u64(0),
            out: MetaOutcome::default(),
        };
        // A linear assumption is not discardable, so this must fail.
        let ctx = DualContext::new(vec![], vec![("u".into(), TypeExpr::Two)]);
        h.expect("Int-Weak", &ctx, &j.term, &j.ty, &j);
        assert_eq!(h.out.rules["Int-Weak"].failures.len(), 1);
    }
}
