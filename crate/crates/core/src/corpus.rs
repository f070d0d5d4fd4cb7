//! The shipped fixture files, checked and opened into judgements.

use crate::checker::DualContext;
use crate::gen::Judgement;
use crate::parser::parse_file;
use crate::session::{check_file, CheckedFile};
use crate::syntax::*;

/// Fixture files that check cleanly, by file name.
pub const FIXTURES: &[(&str, &str)] = &[
    ("corpus.ildtt", include_str!("../fixtures/corpus.ildtt")),
    ("thm3.ildtt", include_str!("../fixtures/thm3.ildtt")),
];

/// A fixture that must be rejected.
pub const REUSE_FIXTURE: (&str, &str) = ("reuse.ildtt", include_str!("../fixtures/reuse.ildtt"));

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub checked: CheckedFile,
    /// Every definition, together with each judgement obtained by opening
    /// its leading abstractions.
    pub judgements: Vec<Judgement>,
}

impl Fixture {
    pub fn signature(&self) -> &Signature {
        &self.checked.signature
    }

    pub fn definitions(&self) -> usize {
        self.checked.signature.defs.len()
    }
}

/// `·;· ⊢ λx.b : S ⊸ T` opens to `·;x:S ⊢ b : T`, and `λ!x.b : Π` to
/// `x:A;· ⊢ b : B`, repeatedly.
pub fn open(def: &Definition) -> Vec<Judgement> {
    let mut cur = Judgement { ctx: DualContext::empty(), term: def.term.clone(), ty: def.ty.clone() };
    let mut out = vec![cur.clone()];
    loop {
        let mut taken: std::collections::BTreeSet<Name> = cur.ctx.int.iter().chain(&cur.ctx.lin).map(|(x, _)| x.clone()).collect();
        taken.extend(cur.term.free_vars().int);
        let next = match (&cur.term, &cur.ty) {
            (TermExpr::Lam { var, ty, body }, TypeExpr::Lolli(_, cod)) => {
                let x = fresh_name(var, &taken);
                let body = subst_lin(body, var, &TermExpr::LinVar(x.clone()));
                let mut ctx = cur.ctx.clone();
                ctx.lin.push((x, (**ty).clone()));
                Judgement { ctx, term: body, ty: (**cod).clone() }
            }
            (TermExpr::PiLam { var, dom, body }, TypeExpr::Pi { var: v, body: cod, .. }) => {
                let x = fresh_name(var, &taken);
                let body = subst_int(&**body, var, &TermExpr::IntVar(x.clone()));
                let ty = subst_int(&**cod, v, &TermExpr::IntVar(x.clone()));
                let mut ctx = cur.ctx.clone();
                ctx.int.push((x, (**dom).clone()));
                Judgement { ctx, term: body, ty }
            }
            _ => return out,
        };
        out.push(next.clone());
        cur = next;
    }
}

pub fn load(name: &str, text: &str, step_limit: usize) -> Fixture {
    let parsed = parse_file(text, Some(name)).unwrap_or_else(|e| panic!("fixture {name} parses: {e}"));
    let checked = check_file(&parsed, step_limit);
    let judgements = checked.signature.defs.iter().flat_map(open).collect();
    Fixture { name: name.to_string(), checked, judgements }
}

pub fn fixtures(step_limit: usize) -> Vec<Fixture> {
    FIXTURES.iter().map(|(n, t)| load(n, t, step_limit)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Checker;

    #[test]
    fn fixtures_check_and_open() {
        let fx = fixtures(10_000);
        let defs: usize = fx.iter().map(Fixture::definitions).sum();
        assert!(defs >= 50, "{defs} definitions");
        for f in &fx {
            assert!(f.checked.report.passed(), "{}", f.checked.report.human());
            let checker = Checker::new(f.signature());
            for j in &f.judgements {
                checker.check_term(&j.ctx, &j.term, &j.ty).unwrap_or_else(|e| panic!("{} ⊢ {} : {}: {e}", j.ctx, j.term, j.ty));
            }
        }
        assert!(fx.iter().flat_map(|f| &f.judgements).any(|j| j.ctx.lin.len() >= 3));
    }

    #[test]
    fn reuse_fixture_is_rejected() {
        let f = load(REUSE_FIXTURE.0, REUSE_FIXTURE.1, 10_000);
        assert_eq!(f.checked.report.exit_code(), 1);
        assert!(f.checked.report.items[0].details.contains("linear variable reused: x"));
    }
}
