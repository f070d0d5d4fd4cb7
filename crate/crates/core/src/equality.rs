//! Judgemental equality: normalisation by -C rules, -U contractions and
//! outward-hoisting commuting conversions, followed by a conversion check
//! that handles the η-laws which need expansion rather than contraction.
//!
//! A `true` answer is sound. A `false` answer means "not proved".

use crate::syntax::*;
use std::collections::BTreeSet;

pub const DEFAULT_STEP_LIMIT: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EqError {
    #[error("normalisation step limit of {0} exceeded")]
    StepLimit(usize),
}

/// One rewrite of a redex at `path`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewriteStep {
    pub rule: String,
    pub path: Vec<usize>,
    pub before: TermExpr,
    pub after: TermExpr,
}

impl RewriteStep {
    /// Apply this step to the whole term it was recorded on.
    pub fn apply(&self, whole: &TermExpr) -> TermExpr {
        whole.replace_at(&self.path, self.after.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub term: TermExpr,
    pub trace: Vec<RewriteStep>,
}

/// The default step limit, honouring `ILDTT_STEP_LIMIT`.
pub fn default_step_limit() -> usize {
    std::env::var("ILDTT_STEP_LIMIT").ok().and_then(|s| s.parse().ok()).filter(|n| *n >= 1).unwrap_or(DEFAULT_STEP_LIMIT)
}

pub struct Equality<'s> {
    pub sig: &'s Signature,
    pub limit: usize,
}

fn bx(t: TermExpr) -> Box<TermExpr> {
    Box::new(t)
}

fn all_names(t: &TermExpr) -> BTreeSet<Name> {
    let fv = t.free_vars();
    fv.int.into_iter().chain(fv.lin.into_keys()).collect()
}

fn var_of(kind: VarKind, x: &str) -> TermExpr {
    match kind {
        VarKind::Int => TermExpr::IntVar(x.to_string()),
        VarKind::Lin => TermExpr::LinVar(x.to_string()),
    }
}

/// Rename the binders of `t` away from `avoid`.
fn freshen_binders(t: &TermExpr, avoid: &BTreeSet<Name>) -> TermExpr {
    let mut p = t.parts();
    if p.binders.is_empty() {
        return t.clone();
    }
    let mut taken = avoid.clone();
    taken.extend(all_names(t));
    for (n, _) in &p.binders {
        taken.insert(n.clone());
    }
    for i in 0..p.binders.len() {
        let (name, kind) = p.binders[i].clone();
        if !avoid.contains(&name) {
            continue;
        }
        let new = fresh_name(&name, &taken);
        taken.insert(new.clone());
        let rename = [(name.clone(), kind, var_of(kind, &new))];
        for (c, scope) in p.terms.iter_mut() {
            if scope.contains(&i) {
                *c = subst_many(c, &rename);
            }
        }
        for (ty, scope) in p.types.iter_mut() {
            if scope.contains(&i) {
                if let Some(inner) = ty {
                    *ty = Some(subst_many(inner, &rename));
                }
            }
        }
        p.binders[i].0 = new;
    }
    t.rebuild(p)
}

fn is_let(t: &TermExpr) -> bool {
    matches!(t, TermExpr::LetStar { .. } | TermExpr::LetTensor { .. } | TermExpr::LetBang { .. } | TermExpr::LetSigma { .. })
}

/// Child positions of `t` forming linear program contexts, i.e. positions
/// out of which eliminators may be hoisted.
pub fn hoistable_positions(t: &TermExpr) -> &'static [usize] {
    use TermExpr::*;
    match t {
        TensorPair(..) | App(..) => &[0, 1],
        Lam { .. } | PiLam { .. } => &[0],
        SigmaPair { .. } => &[1],
        LetStar { .. } | LetTensor { .. } | LetBang { .. } | LetSigma { .. } | Case { .. } => &[0],
        Inl { .. } | Inr { .. } | Fst(_) | Snd(_) | False { .. } | PiApp(..) => &[0],
        LetId { .. } => &[2],
        _ => &[],
    }
}

/// Variables bound by `parent` around its child `i`.
fn binders_around(parent: &TermExpr, i: usize) -> Vec<(Name, VarKind)> {
    let p = parent.parts();
    p.terms[i].1.iter().map(|&b| p.binders[b].clone()).collect()
}

/// Whether `t` contains a `⊤`-introduction or a `0`-elimination.
fn has_slack(t: &TermExpr) -> bool {
    matches!(t, TermExpr::UnitTop | TermExpr::False { .. }) || t.children().iter().any(has_slack)
}

/// Strip an elimination annotation (used when an eliminator moves).
fn drop_ann(t: TermExpr) -> TermExpr {
    use TermExpr::*;
    match t {
        LetStar { scrut, body, .. } => LetStar { scrut, body, ann: None },
        LetTensor { scrut, left, right, body, .. } => LetTensor { scrut, left, right, body, ann: None },
        LetBang { scrut, var, body, .. } => LetBang { scrut, var, body, ann: None },
        LetSigma { scrut, fst, snd, body, .. } => LetSigma { scrut, fst, snd, body, ann: None },
        Case { scrut, left, on_left, right, on_right, .. } => Case { scrut, left, on_left, right, on_right, ann: None },
        other => other,
    }
}

/// The scrutinee `t` when `term = C[false t]` for a linear program context C.
pub fn false_core(term: &TermExpr) -> Option<TermExpr> {
    if let TermExpr::False { scrut, .. } = term {
        return Some((**scrut).clone());
    }
    let kids = term.children();
    for &i in hoistable_positions(term) {
        if let Some(core) = false_core(&kids[i]) {
            let bound = binders_around(term, i);
            let fv = core.free_vars();
            if bound.iter().all(|(x, k)| !fv.contains(x, *k)) {
                return Some(core);
            }
        }
    }
    None
}

/// Anti-unify the branches of an `if`: a term equal to `a` with the
/// scrutinee in place of some `tt`s and to `b` with it in place of the
/// matching `ff`s.
fn anti_unify(a: &TermExpr, b: &TermExpr, scrut: &TermExpr, avoid: &BTreeSet<Name>) -> Option<TermExpr> {
    if a == b {
        return Some(a.clone());
    }
    if *a == TermExpr::TT && *b == TermExpr::FF {
        return Some(scrut.clone());
    }
    if std::mem::discriminant(a) != std::mem::discriminant(b) {
        return None;
    }
    if let (TermExpr::Const { name: n1, .. }, TermExpr::Const { name: n2, .. }) = (a, b) {
        if n1 != n2 {
            return None;
        }
    }
    if a.var().is_some() {
        return None;
    }
    let a = freshen_binders(a, avoid);
    let mut pa = a.parts();
    let pb0 = b.parts();
    if pa.terms.len() != pb0.terms.len() || pa.types.len() != pb0.types.len() {
        return None;
    }
    // Rename b's binders to a's.
    let rename: Vec<(Name, VarKind, TermExpr)> =
        pb0.binders.iter().zip(&pa.binders).map(|((nb, kb), (na, _))| (nb.clone(), *kb, var_of(*kb, na))).collect();
    let b = if rename.iter().all(|(n, _, t)| matches!(t.var(), Some((m, _)) if m == n)) {
        b.clone()
    } else {
        // Apply the renaming binder by binder to each child in its scope.
        let mut p = b.parts();
        for (i, r) in rename.iter().enumerate() {
            for (c, scope) in p.terms.iter_mut() {
                if scope.contains(&i) {
                    *c = subst_many(c, std::slice::from_ref(r));
                }
            }
            for (ty, scope) in p.types.iter_mut() {
                if scope.contains(&i) {
                    if let Some(inner) = ty {
                        *ty = Some(subst_many(inner, std::slice::from_ref(r)));
                    }
                }
            }
            p.binders[i].0 = pa.binders[i].0.clone();
        }
        b.rebuild(p)
    };
    let pb = b.parts();
    for (i, ((ta, _), (tb, _))) in pa.terms.clone().iter().zip(&pb.terms).enumerate() {
        pa.terms[i].0 = anti_unify(ta, tb, scrut, avoid)?;
    }
    for (i, ((ta, _), (tb, _))) in pa.types.clone().iter().zip(&pb.types).enumerate() {
        pa.types[i].0 = match (ta, tb) {
            (None, None) => None,
            (Some(x), Some(y)) => Some(anti_unify_type(x, y, scrut, avoid)?),
            _ => return None,
        };
    }
    Some(a.rebuild(pa))
}

fn anti_unify_type(a: &TypeExpr, b: &TypeExpr, scrut: &TermExpr, avoid: &BTreeSet<Name>) -> Option<TypeExpr> {
    if a == b {
        return Some(a.clone());
    }
    if std::mem::discriminant(a) != std::mem::discriminant(b) {
        return None;
    }
    let mut pa = a.parts();
    let pb = b.parts();
    if pa.binders.iter().map(|x| &x.0).ne(pb.binders.iter().map(|x| &x.0)) || pa.terms.len() != pb.terms.len() {
        return None;
    }
    if pa.binders.iter().any(|(x, _)| avoid.contains(x)) {
        return None;
    }
    if let (TypeExpr::Base { name: n1, .. }, TypeExpr::Base { name: n2, .. }) = (a, b) {
        if n1 != n2 {
            return None;
        }
    }
    for (i, ((ta, _), (tb, _))) in pa.terms.clone().iter().zip(&pb.terms).enumerate() {
        pa.terms[i].0 = anti_unify(ta, tb, scrut, avoid)?;
    }
    for (i, ((ta, _), (tb, _))) in pa.types.clone().iter().zip(&pb.types).enumerate() {
        pa.types[i].0 = Some(anti_unify_type(ta.as_ref()?, tb.as_ref()?, scrut, avoid)?);
    }
    Some(a.rebuild(pa))
}

impl<'s> Equality<'s> {
    pub fn new(sig: &'s Signature) -> Equality<'s> {
        Equality { sig, limit: default_step_limit() }
    }

    pub fn with_step_limit(mut self, limit: usize) -> Equality<'s> {
        self.limit = limit.max(1);
        self
    }

    /// A rewrite applicable at the root of `t`.
    pub fn root_step(&self, t: &TermExpr) -> Option<(&'static str, TermExpr)> {
        self.contraction(t).or_else(|| self.hoist(t))
    }

    fn contraction(&self, t: &TermExpr) -> Option<(&'static str, TermExpr)> {
        use TermExpr::*;
        let lin = VarKind::Lin;
        let int = VarKind::Int;
        match t {
            Const { name, args } if args.is_empty() => {
                if let Some(d) = self.sig.def(name) {
                    return Some(("δ", d.term.clone()));
                }
            }
            LetStar { scrut, body, .. } => {
                if **scrut == Star {
                    return Some(("I-C", (**body).clone()));
                }
                if **body == Star {
                    return Some(("I-U", (**scrut).clone()));
                }
            }
            LetTensor { scrut, left, right, body, .. } => {
                if let TensorPair(a, b) = &**scrut {
                    let sub = [(left.clone(), lin, (**a).clone()), (right.clone(), lin, (**b).clone())];
                    return Some(("⊗-C", subst_many(&**body, &sub)));
                }
                if **body == TensorPair(bx(LinVar(left.clone())), bx(LinVar(right.clone()))) {
                    return Some(("⊗-U", (**scrut).clone()));
                }
            }
            App(f, a) => {
                if let Lam { var, body, .. } = &**f {
                    return Some(("⊸-C", subst(&**body, var, lin, a)));
                }
            }
            Lam { var, body, .. } => {
                if let App(f, a) = &**body {
                    if **a == LinVar(var.clone()) && f.free_vars().lin_count(var) == 0 {
                        return Some(("⊸-U", (**f).clone()));
                    }
                }
            }
            LetBang { scrut, var, body, .. } => {
                if let BangIntro(a) = &**scrut {
                    return Some(("!-C", subst(&**body, var, int, a)));
                }
                if **body == BangIntro(bx(IntVar(var.clone()))) {
                    return Some(("!-U", (**scrut).clone()));
                }
            }
            Fst(p) => {
                if let WithPair(a, _) = &**p {
                    return Some(("&-C1", (**a).clone()));
                }
            }
            Snd(p) => {
                if let WithPair(_, b) = &**p {
                    return Some(("&-C2", (**b).clone()));
                }
            }
            WithPair(a, b) => {
                if let (Fst(s), Snd(t2)) = (&**a, &**b) {
                    if alpha_eq_erased(s, t2) {
                        return Some(("&-U", (**s).clone()));
                    }
                }
            }
            Case { scrut, left, on_left, right, on_right, .. } => {
                match &**scrut {
                    Inl { arg, .. } => return Some(("⊕-C1", subst(&**on_left, left, lin, arg))),
                    Inr { arg, .. } => return Some(("⊕-C2", subst(&**on_right, right, lin, arg))),
                    _ => {}
                }
                let l_eta = matches!(&**on_left, Inl { arg, .. } if **arg == LinVar(left.clone()));
                let r_eta = matches!(&**on_right, Inr { arg, .. } if **arg == LinVar(right.clone()));
                if l_eta && r_eta {
                    return Some(("⊕-U", (**scrut).clone()));
                }
            }
            False { scrut, ann: Some(ann) } if **ann == TypeExpr::Zero => {
                return Some(("0-U", (**scrut).clone()));
            }
            LetSigma { scrut, fst, snd, body, .. } => {
                if let SigmaPair { fst: a, snd: b, .. } = &**scrut {
                    let sub = [(fst.clone(), int, (**a).clone()), (snd.clone(), lin, (**b).clone())];
                    return Some(("Σ-C", subst_many(&**body, &sub)));
                }
                if let SigmaPair { fst: a, snd: b, .. } = &**body {
                    if **a == IntVar(fst.clone()) && **b == LinVar(snd.clone()) {
                        return Some(("Σ-U", (**scrut).clone()));
                    }
                }
            }
            PiApp(f, a) => {
                if let PiLam { var, body, .. } = &**f {
                    return Some(("Π-C", subst(&**body, var, int, a)));
                }
            }
            PiLam { var, body, .. } => {
                if let PiApp(f, a) = &**body {
                    if **a == IntVar(var.clone()) && !f.free_vars().int.contains(var) {
                        return Some(("Π-U", (**f).clone()));
                    }
                }
            }
            LetId { lhs, proof, var, body, motive, .. } => {
                if let Refl(_) = &**proof {
                    return Some(("Id-C", subst(&**body, var, int, lhs)));
                }
                let exact_motive = matches!(&*motive.ty, TypeExpr::Id { lhs: l, rhs: r, .. }
                    if **l == IntVar(motive.left.clone()) && **r == IntVar(motive.right.clone()));
                if exact_motive && **body == Refl(bx(IntVar(var.clone()))) {
                    return Some(("Id-U", (**proof).clone()));
                }
            }
            If { scrut, then_branch, else_branch, .. } => {
                match &**scrut {
                    TT => return Some(("2-C-tt", (**then_branch).clone())),
                    FF => return Some(("2-C-ff", (**else_branch).clone())),
                    _ => {}
                }
                let avoid = all_names(scrut);
                if let Some(c) = anti_unify(then_branch, else_branch, scrut, &avoid) {
                    return Some(("2-U", c));
                }
            }
            _ => {}
        }
        None
    }

    /// Commuting conversion: move a let or case out of a linear position.
    fn hoist(&self, t: &TermExpr) -> Option<(&'static str, TermExpr)> {
        let kids = t.children();
        for &i in hoistable_positions(t) {
            let c = &kids[i];
            if !is_let(c) && !matches!(c, TermExpr::Case { .. }) {
                continue;
            }
            let scrut = &c.children()[0];
            let around = binders_around(t, i);
            let sfv = scrut.free_vars();
            if around.iter().any(|(x, k)| sfv.contains(x, *k)) {
                continue;
            }
            // A ⊤ or 0 inside the scrutinee may be absorbing a linear
            // binder it would be moved out of.
            if around.iter().any(|(_, k)| *k == VarKind::Lin) && has_slack(scrut) {
                continue;
            }
            // Keep the moved binders clear of every name in the context.
            let mut avoid = all_names(t);
            for (x, _) in &around {
                avoid.insert(x.clone());
            }
            for (x, _) in &t.parts().binders {
                avoid.insert(x.clone());
            }
            let c = freshen_binders(c, &avoid);
            let mut cp = c.parts();
            let plug = |inner: &TermExpr| t.replace_at(&[i], inner.clone());
            if matches!(c, TermExpr::Case { .. }) {
                cp.terms[1].0 = plug(&cp.terms[1].0);
                cp.terms[2].0 = plug(&cp.terms[2].0);
            } else {
                cp.terms[1].0 = plug(&cp.terms[1].0);
            }
            return Some(("CommCut", drop_ann(c.rebuild(cp))));
        }
        None
    }

    /// The leftmost-outermost redex, preferring contractions to hoists.
    fn find_any(&self, t: &TermExpr) -> Option<(&'static str, Vec<usize>, TermExpr, TermExpr)> {
        self.find(t, &mut Vec::new(), false).or_else(|| self.find(t, &mut Vec::new(), true))
    }

    fn find(&self, t: &TermExpr, path: &mut Vec<usize>, hoist: bool) -> Option<(&'static str, Vec<usize>, TermExpr, TermExpr)> {
        let here = if hoist { self.hoist(t) } else { self.contraction(t) };
        if let Some((rule, after)) = here {
            return Some((rule, path.clone(), t.clone(), after));
        }
        for (i, c) in t.children().iter().enumerate() {
            path.push(i);
            let r = self.find(c, path, hoist);
            path.pop();
            if r.is_some() {
                return r;
            }
        }
        None
    }

    pub fn normalize(&self, t: &TermExpr) -> Result<Normalized, EqError> {
        let mut cur = t.clone();
        let mut trace = Vec::new();
        loop {
            match self.find_any(&cur) {
                None => return Ok(Normalized { term: cur, trace }),
                Some((rule, path, before, after)) => {
                    if trace.len() >= self.limit {
                        return Err(EqError::StepLimit(self.limit));
                    }
                    let step = RewriteStep { rule: rule.to_string(), path, before, after };
                    cur = step.apply(&cur);
                    trace.push(step);
                }
            }
        }
    }

    pub fn nf(&self, t: &TermExpr) -> Result<TermExpr, EqError> {
        Ok(self.normalize(t)?.term)
    }

    /// `a ≡ b`, at type `ty` when known.
    pub fn judg_equal(&self, a: &TermExpr, b: &TermExpr, ty: Option<&TypeExpr>) -> Result<bool, EqError> {
        if alpha_eq_erased(a, b) {
            return Ok(true);
        }
        let na = self.nf(a)?;
        let nb = self.nf(b)?;
        let mut budget = self.limit;
        self.conv(&na, &nb, ty, &mut budget)
    }

    /// Type equality: structural, with embedded terms compared by `judg_equal`.
    pub fn types_equal(&self, a: &TypeExpr, b: &TypeExpr) -> Result<bool, EqError> {
        use TypeExpr::*;
        Ok(match (a, b) {
            (Unit, Unit) | (Top, Top) | (Zero, Zero) | (Two, Two) => true,
            (Tensor(a1, a2), Tensor(b1, b2)) | (Lolli(a1, a2), Lolli(b1, b2)) | (With(a1, a2), With(b1, b2)) | (Plus(a1, a2), Plus(b1, b2)) => {
                self.types_equal(a1, b1)? && self.types_equal(a2, b2)?
            }
            (Bang(x), Bang(y)) => self.types_equal(x, y)?,
            (Sigma { var: v1, dom: d1, body: b1 }, Sigma { var: v2, dom: d2, body: b2 })
            | (Pi { var: v1, dom: d1, body: b1 }, Pi { var: v2, dom: d2, body: b2 }) => {
                if std::mem::discriminant(a) != std::mem::discriminant(b) || !self.types_equal(d1, d2)? {
                    return Ok(false);
                }
                let mut avoid: BTreeSet<Name> = b1.free_vars().int;
                avoid.extend(b2.free_vars().int);
                let z = fresh_name(&format!("{v1}_"), &avoid);
                let zt = TermExpr::IntVar(z);
                self.types_equal(&subst_int(&**b1, v1, &zt), &subst_int(&**b2, v2, &zt))?
            }
            (Id { dom: d1, lhs: l1, rhs: r1 }, Id { dom: d2, lhs: l2, rhs: r2 }) => {
                self.types_equal(d1, d2)? && self.judg_equal(l1, l2, Some(d1))? && self.judg_equal(r1, r2, Some(d1))?
            }
            (Base { name: n1, args: a1 }, Base { name: n2, args: a2 }) => {
                if n1 != n2 || a1.len() != a2.len() {
                    return Ok(false);
                }
                for (x, y) in a1.iter().zip(a2) {
                    if !self.judg_equal(x, y, None)? {
                        return Ok(false);
                    }
                }
                true
            }
            _ => false,
        })
    }

    fn fresh_for(&self, a: &TermExpr, b: &TermExpr, base: &str) -> Name {
        let mut avoid = all_names(a);
        avoid.extend(all_names(b));
        fresh_name(&format!("{base}_"), &avoid)
    }

    /// Compare normal forms.
    fn conv(&self, a: &TermExpr, b: &TermExpr, ty: Option<&TypeExpr>, budget: &mut usize) -> Result<bool, EqError> {
        use TermExpr::*;
        if *budget == 0 {
            return Err(EqError::StepLimit(self.limit));
        }
        *budget -= 1;
        if alpha_eq_erased(a, b) {
            return Ok(true);
        }
        // ⊤-U: only terms of type ⊤ can be compared with ⟨⟩.
        if *a == UnitTop || *b == UnitTop || ty == Some(&TypeExpr::Top) {
            return Ok(true);
        }
        // η for negative types.
        let fun_lin = matches!(ty, Some(TypeExpr::Lolli(..))) || matches!(a, Lam { .. }) || matches!(b, Lam { .. });
        if fun_lin && !(matches!(a, Lam { .. }) && matches!(b, Lam { .. })) {
            let x = LinVar(self.fresh_for(a, b, "x"));
            let cod = match ty {
                Some(TypeExpr::Lolli(_, c)) => Some(&**c),
                _ => None,
            };
            let fa = self.nf(&App(bx(a.clone()), bx(x.clone())))?;
            let fb = self.nf(&App(bx(b.clone()), bx(x)))?;
            return self.conv(&fa, &fb, cod, budget);
        }
        let fun_int = matches!(ty, Some(TypeExpr::Pi { .. })) || matches!(a, PiLam { .. }) || matches!(b, PiLam { .. });
        if fun_int && !(matches!(a, PiLam { .. }) && matches!(b, PiLam { .. })) {
            let x = IntVar(self.fresh_for(a, b, "x"));
            let fa = self.nf(&PiApp(bx(a.clone()), bx(x.clone())))?;
            let fb = self.nf(&PiApp(bx(b.clone()), bx(x)))?;
            return self.conv(&fa, &fb, None, budget);
        }
        let with = matches!(ty, Some(TypeExpr::With(..))) || matches!(a, WithPair(..)) || matches!(b, WithPair(..));
        if with && !(matches!(a, WithPair(..)) && matches!(b, WithPair(..))) {
            let (ta, tb) = match ty {
                Some(TypeExpr::With(l, r)) => (Some(&**l), Some(&**r)),
                _ => (None, None),
            };
            let l = self.conv(&self.nf(&Fst(bx(a.clone())))?, &self.nf(&Fst(bx(b.clone())))?, ta, budget)?;
            return Ok(l && self.conv(&self.nf(&Snd(bx(a.clone())))?, &self.nf(&Snd(bx(b.clone())))?, tb, budget)?);
        }
        // C[false t] ≡ false t ≡ C'[false t].
        if let (Some(x), Some(y)) = (false_core(a), false_core(b)) {
            if alpha_eq_erased(&x, &y) {
                return Ok(true);
            }
        }
        // 2-η on a variable scrutinee.
        for (l, r) in [(a, b), (b, a)] {
            if let If { scrut, then_branch, else_branch, .. } = l {
                if let IntVar(x) = &**scrut {
                    let same = matches!(r, If { scrut: s2, .. } if **s2 == **scrut);
                    if !same {
                        let rt = self.nf(&subst_int(r, x, &TT))?;
                        let rf = self.nf(&subst_int(r, x, &FF))?;
                        return Ok(self.conv(then_branch, &rt, None, budget)? && self.conv(else_branch, &rf, None, budget)?);
                    }
                }
            }
        }
        // η for positive types, by expanding the other side along the
        // variable being eliminated.
        for (l, r) in [(a, b), (b, a)] {
            if let Some(res) = self.positive_expansion(l, r, budget)? {
                return Ok(res);
            }
        }
        let (sa, sb) = (sort_spines(a), sort_spines(b));
        if alpha_eq_erased(&sa, &sb) {
            return Ok(true);
        }
        self.structural(&sa, &sb, budget)
    }

    fn positive_expansion(&self, l: &TermExpr, r: &TermExpr, budget: &mut usize) -> Result<Option<bool>, EqError> {
        use TermExpr::*;
        let v = match l.children().first() {
            Some(LinVar(v)) if is_let(l) || matches!(l, Case { .. }) => v.clone(),
            _ => return Ok(None),
        };
        if std::mem::discriminant(l) == std::mem::discriminant(r) && r.children().first() == Some(&LinVar(v.clone())) {
            return Ok(None);
        }
        if r.free_vars().lin_count(&v) != 1 || !linear_position(r, &v) {
            return Ok(None);
        }
        let l = freshen_binders(l, &all_names(r));
        let p = l.parts();
        let name = |i: usize| p.binders[i].0.clone();
        let expand = |pattern: TermExpr| -> TermExpr { subst_lin(r, &v, &pattern) };
        let pairs: Vec<(TermExpr, TermExpr)> = match &l {
            LetStar { body, .. } => vec![((**body).clone(), expand(Star))],
            LetTensor { body, .. } => {
                vec![((**body).clone(), expand(TensorPair(bx(LinVar(name(0))), bx(LinVar(name(1))))))]
            }
            LetBang { body, .. } => vec![((**body).clone(), expand(BangIntro(bx(IntVar(name(0))))))],
            LetSigma { body, .. } => vec![(
                (**body).clone(),
                expand(SigmaPair { fst: bx(IntVar(name(0))), snd: bx(LinVar(name(1))), ann: None }),
            )],
            Case { on_left, on_right, .. } => vec![
                ((**on_left).clone(), expand(Inl { arg: bx(LinVar(name(0))), ann: None })),
                ((**on_right).clone(), expand(Inr { arg: bx(LinVar(name(1))), ann: None })),
            ],
            _ => return Ok(None),
        };
        for (x, y) in pairs {
            let y = self.nf(&y)?;
            if !self.conv(&x, &y, None, budget)? {
                return Ok(Some(false));
            }
        }
        Ok(Some(true))
    }

    fn structural(&self, a: &TermExpr, b: &TermExpr, budget: &mut usize) -> Result<bool, EqError> {
        use TermExpr::*;
        if std::mem::discriminant(a) != std::mem::discriminant(b) {
            return Ok(false);
        }
        match (a, b) {
            (IntVar(x), IntVar(y)) | (LinVar(x), LinVar(y)) => return Ok(x == y),
            (Const { name: n1, args: a1 }, Const { name: n2, args: a2 }) if n1 != n2 || a1.len() != a2.len() => {
                return Ok(false)
            }
            _ => {}
        }
        let pa = a.parts();
        let pb = b.parts();
        if pa.terms.len() != pb.terms.len() || pa.binders.len() != pb.binders.len() {
            return Ok(false);
        }
        // Unify binders by renaming both sides to shared fresh names.
        let mut avoid = all_names(a);
        avoid.extend(all_names(b));
        for (x, _) in pa.binders.iter().chain(&pb.binders) {
            avoid.insert(x.clone());
        }
        let mut ren_a = Vec::new();
        let mut ren_b = Vec::new();
        for ((na, ka), (nb, kb)) in pa.binders.iter().zip(&pb.binders) {
            if ka != kb {
                return Ok(false);
            }
            let z = fresh_name(&format!("{na}_"), &avoid);
            avoid.insert(z.clone());
            ren_a.push((na.clone(), *ka, var_of(*ka, &z)));
            ren_b.push((nb.clone(), *kb, var_of(*kb, &z)));
        }
        for ((ta, sa), (tb, sb)) in pa.terms.iter().zip(&pb.terms) {
            let ra: Vec<_> = sa.iter().map(|&i| ren_a[i].clone()).collect();
            let rb: Vec<_> = sb.iter().map(|&i| ren_b[i].clone()).collect();
            let (ta, tb) = (subst_many(ta, &ra), subst_many(tb, &rb));
            if !self.conv(&ta, &tb, None, budget)? {
                return Ok(false);
            }
        }
        // Type slots that are part of the term (λ domains, motives) must agree.
        let essential = matches!(a, Lam { .. } | PiLam { .. } | If { .. } | LetId { .. });
        if essential {
            let n = if matches!(a, LetId { .. }) { 1 } else { pa.types.len() };
            for ((ta, sa), (tb, sb)) in pa.types.iter().zip(&pb.types).take(n) {
                let (Some(ta), Some(tb)) = (ta, tb) else { continue };
                let ra: Vec<_> = sa.iter().map(|&i| ren_a[i].clone()).collect();
                let rb: Vec<_> = sb.iter().map(|&i| ren_b[i].clone()).collect();
                if !self.types_equal(&subst_many(ta, &ra), &subst_many(tb, &rb))? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Whether the single occurrence of linear `v` in `t` is reachable through
/// linear program contexts and let bodies only.
fn linear_position(t: &TermExpr, v: &str) -> bool {
    if *t == TermExpr::LinVar(v.to_string()) {
        return true;
    }
    let kids = t.children();
    let mut allowed: Vec<usize> = hoistable_positions(t).to_vec();
    if is_let(t) {
        allowed.push(1);
    }
    if let TermExpr::LetId { .. } = t {
        allowed.push(3);
    }
    for (i, c) in kids.iter().enumerate() {
        if c.free_vars().lin_count(v) > 0 {
            let shadowed = binders_around(t, i).iter().any(|(x, k)| x == v && *k == VarKind::Lin);
            return !shadowed && allowed.contains(&i) && linear_position(c, v);
        }
    }
    false
}

fn spine_key(t: &TermExpr) -> String {
    canonical(&t.erase_annotations(), true).to_string()
}

/// Put runs of independent lets into a canonical order.
pub fn sort_spines(t: &TermExpr) -> TermExpr {
    let mut p = t.parts();
    for (c, _) in p.terms.iter_mut() {
        *c = sort_spines(c);
    }
    let t = t.rebuild(p);
    if !is_let(&t) {
        return t;
    }
    let body = &t.children()[1];
    if !is_let(body) {
        return t;
    }
    let outer_binders: Vec<(Name, VarKind)> = t.parts().binders;
    let inner_scrut = &body.children()[0];
    let fv = inner_scrut.free_vars();
    if outer_binders.iter().any(|(x, k)| fv.contains(x, *k)) {
        return t;
    }
    let outer_scrut = &t.children()[0];
    if spine_key(inner_scrut) >= spine_key(outer_scrut) {
        return t;
    }
    // Swap: let s1 be p1 in let s2 be p2 in c  ~>  let s2 be p2 in let s1 be p1 in c.
    let mut avoid = all_names(&t);
    for (x, _) in &outer_binders {
        avoid.insert(x.clone());
    }
    let body = freshen_binders(body, &avoid);
    let mut inner = body.parts();
    let mut outer = t.parts();
    outer.terms[1].0 = inner.terms[1].0.clone();
    let new_inner = drop_ann(t.rebuild(outer));
    inner.terms[1].0 = sort_spines(&new_inner);
    drop_ann(body.rebuild(inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_file, parse_term};

    fn sig() -> Signature {
        parse_file("type A. type B. const c : A.", None).unwrap().signature
    }

    fn t(s: &str, scope: &[(&str, VarKind)]) -> TermExpr {
        let scope: Vec<(Name, VarKind)> = scope.iter().map(|(x, k)| (x.to_string(), *k)).collect();
        parse_term(s, &sig(), &scope).unwrap().0
    }

    const Y: (&str, VarKind) = ("y", VarKind::Lin);

    #[test]
    fn beta_linear_function() {
        let s = sig();
        let eq = Equality::new(&s);
        let n = eq.normalize(&t("(lam (x : A) x) y", &[Y])).unwrap();
        assert_eq!(n.term, TermExpr::lin("y"));
        assert_eq!(n.trace[0].rule, "⊸-C");
    }

    #[test]
    fn unit_computation() {
        let s = sig();
        let n = Equality::new(&s).normalize(&t("let star be * in unit", &[])).unwrap();
        assert_eq!(n.term, TermExpr::UnitTop);
        assert_eq!(n.trace[0].rule, "I-C");
    }

    #[test]
    fn commuting_conversion_hoists_let() {
        let s = sig();
        let scope = [("p", VarKind::Lin), ("z", VarKind::Lin)];
        let n = Equality::new(&s).normalize(&t("(let p be x (*) w in x (*) w) (*) z", &scope)).unwrap();
        assert_eq!(n.term, t("p (*) z", &scope));
        let n = Equality::new(&s).normalize(&t("(let p be x (*) w in w (*) x) (*) z", &scope)).unwrap();
        assert_eq!(n.trace[0].rule, "CommCut");
        assert!(alpha_eq(&n.term, &t("let p be x (*) w in (w (*) x) (*) z", &scope)));
    }

    #[test]
    fn eta_for_functions() {
        let s = sig();
        let f = ("f", VarKind::Lin);
        let eq = Equality::new(&s);
        let lolli = TypeExpr::Lolli(Box::new(TypeExpr::base("A")), Box::new(TypeExpr::base("B")));
        assert!(eq.judg_equal(&t("f", &[f]), &t("lam (x : A) f x", &[f]), Some(&lolli)).unwrap());
    }

    #[test]
    fn booleans_are_not_identified() {
        let s = sig();
        let eq = Equality::new(&s);
        assert!(!eq.judg_equal(&TermExpr::TT, &TermExpr::FF, Some(&TypeExpr::Two)).unwrap());
        assert!(eq.judg_equal(&TermExpr::TT, &TermExpr::TT, Some(&TypeExpr::Two)).unwrap());
    }

    #[test]
    fn positive_eta_by_expansion() {
        let s = sig();
        let eq = Equality::new(&s);
        let q = ("q", VarKind::Lin);
        let lhs = t("let q be u (*) w in let u be !x in bang x (*) w", &[q]);
        assert!(eq.judg_equal(&lhs, &t("q", &[q]), None).unwrap());
    }

    #[test]
    fn two_eta() {
        let s = sig();
        let eq = Equality::new(&s);
        let b = ("b", VarKind::Int);
        let n = eq.normalize(&t("if [x . 2] b then tt else ff", &[b])).unwrap();
        assert_eq!(n.term, TermExpr::int("b"));
    }

    #[test]
    fn step_limit_is_reported() {
        let s = sig();
        let eq = Equality::new(&s).with_step_limit(1);
        let r = eq.normalize(&t("let star be * in let star be * in star", &[]));
        assert_eq!(r.unwrap_err(), EqError::StepLimit(1));
    }

    #[test]
    fn independent_lets_commute() {
        let s = sig();
        let eq = Equality::new(&s);
        let sc = [("p", VarKind::Lin), ("q", VarKind::Lin)];
        let a = t("let p be * in let q be * in star", &sc);
        let b = t("let q be * in let p be * in star", &sc);
        assert!(eq.judg_equal(&a, &b, Some(&TypeExpr::Unit)).unwrap());
    }
}
