//! Linearity discipline: an exhaustive-partition oracle for linear usage,
//! mutation of checked terms, and the sweep comparing both with the checker.
//!
//! The oracle reads the rules declaratively. A multiplicative rule may
//! split its linear context in any way among its premises, an additive rule
//! hands the whole context to every premise, `⊤`-I accepts any context and
//! `0`-E any context containing what its scrutinee needs. It knows nothing
//! about types, so it is compared with the checker only on verdicts about
//! usage.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::{CheckedJudgement, Checker, Conclusion, ErrorKind};
use crate::gen::{inhabit, Judgement};
use crate::syntax::*;

type Set = BTreeSet<Name>;

struct Oracle {
    memo: HashMap<(usize, Vec<Name>), bool>,
}

fn subsets(s: &Set) -> impl Iterator<Item = (Set, Set)> + '_ {
    let v: Vec<&Name> = s.iter().collect();
    (0u32..(1u32 << v.len())).map(move |mask| {
        let mut l = Set::new();
        let mut r = Set::new();
        for (i, x) in v.iter().enumerate() {
            if mask & (1 << i) != 0 {
                l.insert((*x).clone());
            } else {
                r.insert((*x).clone());
            }
        }
        (l, r)
    })
}

fn with(s: &Set, xs: &[&Name]) -> Set {
    let mut out = s.clone();
    out.extend(xs.iter().map(|x| (*x).clone()));
    out
}

impl Oracle {
    fn derives(&mut self, t: &TermExpr, s: &Set) -> bool {
        let key = (t as *const TermExpr as usize, s.iter().cloned().collect::<Vec<_>>());
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let v = self.compute(t, s);
        self.memo.insert(key, v);
        v
    }

    /// `t` and `body` split `s`; `body` also owns the `bound` variables.
    fn split(&mut self, t: &TermExpr, body: &TermExpr, bound: &[&Name], s: &Set) -> bool {
        subsets(s).any(|(l, r)| self.derives(t, &l) && self.derives(body, &with(&r, bound)))
    }

    fn compute(&mut self, t: &TermExpr, s: &Set) -> bool {
        use TermExpr::*;
        let empty = Set::new();
        match t {
            LinVar(x) => s.len() == 1 && s.contains(x),
            IntVar(_) | Star | TT | FF => s.is_empty(),
            Const { args, .. } => s.is_empty() && args.iter().all(|a| self.derives(a, &empty)),
            BangIntro(a) | Refl(a) => s.is_empty() && self.derives(a, &empty),
            UnitTop => true,
            False { scrut, .. } => subsets(s).any(|(l, _)| self.derives(scrut, &l)),
            TensorPair(a, b) | App(a, b) => self.split(a, b, &[], s),
            Lam { var, body, .. } => self.derives(body, &with(s, &[var])),
            PiLam { body, .. } => self.derives(body, s),
            PiApp(f, a) => self.derives(a, &empty) && self.derives(f, s),
            WithPair(a, b) => self.derives(a, s) && self.derives(b, s),
            Fst(a) | Snd(a) => self.derives(a, s),
            Inl { arg, .. } | Inr { arg, .. } => self.derives(arg, s),
            LetStar { scrut, body, .. } | LetBang { scrut, body, .. } => self.split(scrut, body, &[], s),
            LetTensor { scrut, left, right, body, .. } => self.split(scrut, body, &[left, right], s),
            LetSigma { scrut, snd, body, .. } => self.split(scrut, body, &[snd], s),
            SigmaPair { fst, snd, .. } => self.derives(fst, &empty) && self.derives(snd, s),
            Case { scrut, left, on_left, right, on_right, .. } => subsets(s).any(|(l, r)| {
                self.derives(scrut, &l) && self.derives(on_left, &with(&r, &[left])) && self.derives(on_right, &with(&r, &[right]))
            }),
            If { scrut, then_branch, else_branch, .. } => {
                self.derives(scrut, &empty) && self.derives(then_branch, s) && self.derives(else_branch, s)
            }
            LetId { lhs, rhs, proof, body, .. } => {
                self.derives(lhs, &empty) && self.derives(rhs, &empty) && self.split(proof, body, &[], s)
            }
        }
    }
}

/// Whether some partition of `lin` in the declarative rule format derives
/// the usage of `t`. Binders are renamed apart first.
pub fn usage_derivable(t: &TermExpr, lin: &[Name]) -> bool {
    let t = canonical(t, false);
    Oracle { memo: HashMap::new() }.derives(&t, &lin.iter().cloned().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    /// One occurrence of a linear variable replaced by another variable of
    /// the same type.
    Duplicate,
    /// One occurrence of a linear variable replaced by a term of the same
    /// type that uses no linear variables, `if tt then c else c`.
    Drop,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mutant {
    pub kind: MutationKind,
    pub judgement: Judgement,
    pub variable: Name,
}

/// Each linear variable occurrence: its path, name, type, and the
/// intuitionistic and linear zones at that point.
type Occurrence = (Vec<usize>, Name, TypeExpr, Vec<(Name, TypeExpr)>, BTreeSet<Name>);

fn lin_var_nodes(d: &CheckedJudgement) -> Vec<Occurrence> {
    d.nodes()
        .into_iter()
        .filter(|n| n.rule == "Lin-Var")
        .filter_map(|n| match &n.conclusion {
            Conclusion::Term { ctx, term: TermExpr::LinVar(x), ty } => Some((n.path.clone(), x.clone(), ty.clone(), ctx.int.clone(), ctx.lin.iter().map(|(v, _)| v.clone()).collect())),
            _ => None,
        })
        .collect()
}

/// All duplicate mutants and up to `drops` drop mutants of `j`.
pub fn mutants(sig: &Signature, j: &Judgement, seed: u64, drops: usize) -> Vec<Mutant> {
    let Ok(c) = Checker::new(sig).check_term(&j.ctx, &j.term, &j.ty) else { return Vec::new() };
    let root = c.term;
    let nodes = lin_var_nodes(&c.derivation);
    let mut out = Vec::new();
    for (p, y, ty, _, visible) in &nodes {
        for (_, x, tx, _, _) in &nodes {
            // `x` must be visible in the linear zone at the occurrence of `y`.
            if x == y || !visible.contains(x) || !alpha_eq(tx, ty) || root.at(p) != Some(TermExpr::LinVar(y.clone())) {
                continue;
            }
            let m = root.replace_at(p, TermExpr::LinVar(x.clone()));
            let judgement = Judgement { ctx: j.ctx.clone(), term: m, ty: j.ty.clone() };
            if !out.iter().any(|o: &Mutant| o.judgement.term == judgement.term) {
                out.push(Mutant { kind: MutationKind::Duplicate, judgement, variable: x.clone() });
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.shuffle(&mut rng);
    let mut dropped = 0;
    for i in order {
        if dropped == drops {
            break;
        }
        let (p, x, ty, int, _) = &nodes[i];
        if root.at(p) != Some(TermExpr::LinVar(x.clone())) {
            continue;
        }
        if let Some(filler) = inhabit(sig, rng.gen(), int, &[], ty, 2) {
            // An `if` with a motive infers its type, so the filler also fits
            // in positions that must infer.
            let filler = TermExpr::If {
                motive: Motive { var: fresh_name("m", &ty.free_vars().int), ty: Box::new(ty.clone()) },
                scrut: Box::new(TermExpr::TT),
                then_branch: Box::new(filler.clone()),
                else_branch: Box::new(filler),
            };
            let judgement = Judgement { ctx: j.ctx.clone(), term: root.replace_at(p, filler), ty: j.ty.clone() };
            out.push(Mutant { kind: MutationKind::Drop, judgement, variable: x.clone() });
            dropped += 1;
        }
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearityOutcome {
    pub mutants: usize,
    /// Mutants the oracle shows to violate linearity; each must be rejected
    /// with a reused or unused verdict.
    pub violating: usize,
    pub rejected_as_linearity: usize,
    /// Mutants that stay derivable because `⊤` or `0` absorbs the change.
    pub absorbed: usize,
    /// Terms on which the checker and the oracle were compared.
    pub agreement_checks: usize,
    pub failures: Vec<String>,
}

/// Compare the checker with the oracle on `corpus` and on its mutants,
/// stopping once `target` mutants have been examined.
pub fn sweep(sig: &Signature, corpus: &[Judgement], target: usize, seed: u64) -> LinearityOutcome {
    let checker = Checker::new(sig);
    let mut out = LinearityOutcome::default();
    for j in corpus {
        let names: Vec<Name> = j.ctx.lin.iter().map(|(x, _)| x.clone()).collect();
        out.agreement_checks += 1;
        let ok = checker.check_term(&j.ctx, &j.term, &j.ty).is_ok();
        if ok && !usage_derivable(&j.term, &names) {
            out.failures.push(format!("checker accepts but no partition derives {} ⊢ {}", j.ctx, j.term));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&Judgement> = corpus.iter().filter(|j| !j.ctx.lin.is_empty() || j.term.size() > 1).collect();
    order.shuffle(&mut rng);
    'outer: for round in 0..4u64 {
        for j in &order {
            for m in mutants(sig, j, rng.gen::<u64>() ^ round, 1) {
                if out.mutants == target {
                    break 'outer;
                }
                out.mutants += 1;
                out.agreement_checks += 1;
                let names: Vec<Name> = m.judgement.ctx.lin.iter().map(|(x, _)| x.clone()).collect();
                let derivable = usage_derivable(&m.judgement.term, &names);
                let verdict = checker.check_term(&m.judgement.ctx, &m.judgement.term, &m.judgement.ty);
                let show = || format!("{:?} of {} in {} ⊢ {} : {}", m.kind, m.variable, m.judgement.ctx, m.judgement.term, m.judgement.ty);
                match (derivable, verdict) {
                    (true, Ok(_)) => out.absorbed += 1,
                    (true, Err(e)) => out.failures.push(format!("oracle derives but checker rejects ({e}): {}", show())),
                    (false, Ok(_)) => out.failures.push(format!("checker accepts a linearity violation: {}", show())),
                    (false, Err(e)) => {
                        out.violating += 1;
                        if matches!(e.kind, ErrorKind::LinearReused | ErrorKind::LinearUnused) {
                            out.rejected_as_linearity += 1;
                        } else {
                            out.failures.push(format!("rejected with kind `{}` rather than reused/unused ({e}): {}", e.kind.label(), show()));
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::gen_signature;
    use crate::parser::parse_term;

    fn term(src: &str, lin: &[&str]) -> TermExpr {
        let scope: Vec<(Name, VarKind)> = lin.iter().map(|x| (x.to_string(), VarKind::Lin)).collect();
        parse_term(src, &gen_signature(), &scope).unwrap().0
    }

    fn names(xs: &[&str]) -> Vec<Name> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn oracle_on_hand_examples() {
        assert!(usage_derivable(&term("x (*) y", &["x", "y"]), &names(&["x", "y"])));
        assert!(!usage_derivable(&term("x (*) x", &["x", "y"]), &names(&["x", "y"])));
        assert!(!usage_derivable(&term("x (*) x", &["x"]), &names(&["x"])));
        assert!(!usage_derivable(&term("x", &["x", "y"]), &names(&["x", "y"])));
        assert!(usage_derivable(&term("<x, x>", &["x"]), &names(&["x"])));
        assert!(!usage_derivable(&term("<x, y>", &["x", "y"]), &names(&["x", "y"])));
        assert!(usage_derivable(&term("<x, unit>", &["x", "y"]), &names(&["x"])));
        assert!(!usage_derivable(&term("<x, unit>", &["x", "y"]), &names(&["x", "y"])));
        assert!(usage_derivable(&term("x (*) unit", &["x", "y", "z"]), &names(&["x", "y", "z"])));
        assert!(usage_derivable(&term("false x", &["x", "y"]), &names(&["x", "y"])));
        assert!(!usage_derivable(&term("lam (u : A) x", &["x"]), &names(&["x"])));
        assert!(usage_derivable(&term("let x be u (*) v in v (*) u", &["x"]), &names(&["x"])));
        assert!(!usage_derivable(&term("bang x", &["x"]), &names(&["x"])));
        assert!(!usage_derivable(&term("bang (lam (u : A) a)", &[]), &[]));
        assert!(usage_derivable(&term("bang (lam (u : A) u)", &[]), &[]));
    }

    #[test]
    fn oracle_agrees_with_checker_on_generated_terms() {
        let sig = gen_signature();
        let (corpus, _) = crate::gen::generate(&sig, 9, 120, crate::gen::GenConfig::default());
        let out = sweep(&sig, &corpus, 300, 1);
        assert!(out.failures.is_empty(), "{:#?}", &out.failures[..out.failures.len().min(5)]);
        assert_eq!(out.mutants, 300);
        assert!(out.violating > 0 && out.rejected_as_linearity == out.violating);
    }
}
