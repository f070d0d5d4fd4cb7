//! Abstract syntax, binding, capture-avoiding substitution and
//! alpha-equivalence.
//!
//! Terms are stored with names. Every constructor is described once by
//! [`Parts`] (its binders, child terms and child types, each child with the
//! binders in scope over it), and all binding-aware operations are written
//! against that description.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub type Name = String;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Lives in the intuitionistic zone Δ.
    Int,
    /// Lives in the linear zone Ξ.
    Lin,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TypeExpr {
    Base { name: Name, args: Vec<TermExpr> },
    Unit,
    Tensor(Box<TypeExpr>, Box<TypeExpr>),
    Lolli(Box<TypeExpr>, Box<TypeExpr>),
    Top,
    With(Box<TypeExpr>, Box<TypeExpr>),
    Zero,
    Plus(Box<TypeExpr>, Box<TypeExpr>),
    Bang(Box<TypeExpr>),
    Sigma { var: Name, dom: Box<TypeExpr>, body: Box<TypeExpr> },
    Pi { var: Name, dom: Box<TypeExpr>, body: Box<TypeExpr> },
    Id { dom: Box<TypeExpr>, lhs: Box<TermExpr>, rhs: Box<TermExpr> },
    Two,
}

/// Optional type annotation filled in by elaboration.
pub type Ann = Option<Box<TypeExpr>>;

/// `x. A`: a type family over `2`, the motive of `if`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Motive {
    pub var: Name,
    pub ty: Box<TypeExpr>,
}

/// `x, x'. D`: the motive of the identity eliminator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IdMotive {
    pub left: Name,
    pub right: Name,
    pub ty: Box<TypeExpr>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TermExpr {
    IntVar(Name),
    LinVar(Name),
    Const { name: Name, args: Vec<TermExpr> },
    Star,
    LetStar { scrut: Box<TermExpr>, body: Box<TermExpr>, ann: Ann },
    TensorPair(Box<TermExpr>, Box<TermExpr>),
    LetTensor { scrut: Box<TermExpr>, left: Name, right: Name, body: Box<TermExpr>, ann: Ann },
    Lam { var: Name, ty: Box<TypeExpr>, body: Box<TermExpr> },
    App(Box<TermExpr>, Box<TermExpr>),
    BangIntro(Box<TermExpr>),
    LetBang { scrut: Box<TermExpr>, var: Name, body: Box<TermExpr>, ann: Ann },
    WithPair(Box<TermExpr>, Box<TermExpr>),
    Fst(Box<TermExpr>),
    Snd(Box<TermExpr>),
    UnitTop,
    /// `ann` is the whole sum type once elaborated.
    Inl { arg: Box<TermExpr>, ann: Ann },
    Inr { arg: Box<TermExpr>, ann: Ann },
    Case { scrut: Box<TermExpr>, left: Name, on_left: Box<TermExpr>, right: Name, on_right: Box<TermExpr>, ann: Ann },
    False { scrut: Box<TermExpr>, ann: Ann },
    /// `!a ⊗ b`; `ann` is the Σ-type once elaborated.
    SigmaPair { fst: Box<TermExpr>, snd: Box<TermExpr>, ann: Ann },
    LetSigma { scrut: Box<TermExpr>, fst: Name, snd: Name, body: Box<TermExpr>, ann: Ann },
    PiLam { var: Name, dom: Box<TypeExpr>, body: Box<TermExpr> },
    PiApp(Box<TermExpr>, Box<TermExpr>),
    Refl(Box<TermExpr>),
    /// `let (a, a', p) be (z, z, refl !z) in d`. `generic` lists linear
    /// variables whose types inside `d` mention `z`.
    LetId {
        lhs: Box<TermExpr>,
        rhs: Box<TermExpr>,
        proof: Box<TermExpr>,
        var: Name,
        body: Box<TermExpr>,
        motive: IdMotive,
        generic: Vec<(Name, TypeExpr)>,
    },
    TT,
    FF,
    If { motive: Motive, scrut: Box<TermExpr>, then_branch: Box<TermExpr>, else_branch: Box<TermExpr> },
}

/// The binding structure of one constructor.
#[derive(Clone, Debug)]
pub struct Parts {
    pub binders: Vec<(Name, VarKind)>,
    /// Child terms with the indices of the binders scoping over them.
    pub terms: Vec<(TermExpr, Vec<usize>)>,
    /// Child types (absent annotations are `None`).
    pub types: Vec<(Option<TypeExpr>, Vec<usize>)>,
}


fn opt(a: &Ann) -> Option<TypeExpr> {
    a.as_deref().cloned()
}

impl Parts {
    fn leaf() -> Parts {
        Parts { binders: vec![], terms: vec![], types: vec![] }
    }

    fn term(&self, i: usize) -> Box<TermExpr> {
        Box::new(self.terms[i].0.clone())
    }

    fn ty(&self, i: usize) -> Box<TypeExpr> {
        Box::new(self.types[i].0.clone().expect("required type slot"))
    }

    fn ann(&self, i: usize) -> Ann {
        self.types[i].0.clone().map(Box::new)
    }

    fn name(&self, i: usize) -> Name {
        self.binders[i].0.clone()
    }
}

impl TermExpr {
    pub fn int(x: &str) -> TermExpr {
        TermExpr::IntVar(x.to_string())
    }

    pub fn lin(x: &str) -> TermExpr {
        TermExpr::LinVar(x.to_string())
    }

    pub fn parts(&self) -> Parts {
        use TermExpr::*;
        use VarKind::*;
        let t = |x: &TermExpr| (x.clone(), vec![]);
        let tb = |x: &TermExpr, s: Vec<usize>| (x.clone(), s);
        let a = |x: &Ann| (opt(x), vec![]);
        match self {
            IntVar(_) | LinVar(_) | Star | UnitTop | TT | FF => Parts::leaf(),
            Const { args, .. } => Parts { binders: vec![], terms: args.iter().map(t).collect(), types: vec![] },
            LetStar { scrut, body, ann } => Parts { binders: vec![], terms: vec![t(scrut), t(body)], types: vec![a(ann)] },
            TensorPair(x, y) | App(x, y) | WithPair(x, y) | PiApp(x, y) => {
                Parts { binders: vec![], terms: vec![t(x), t(y)], types: vec![] }
            }
            LetTensor { scrut, left, right, body, ann } => Parts {
                binders: vec![(left.clone(), Lin), (right.clone(), Lin)],
                terms: vec![t(scrut), tb(body, vec![0, 1])],
                types: vec![a(ann)],
            },
            Lam { var, ty, body } => Parts {
                binders: vec![(var.clone(), Lin)],
                terms: vec![tb(body, vec![0])],
                types: vec![(Some((**ty).clone()), vec![])],
            },
            BangIntro(x) | Fst(x) | Snd(x) | Refl(x) => Parts { binders: vec![], terms: vec![t(x)], types: vec![] },
            LetBang { scrut, var, body, ann } => Parts {
                binders: vec![(var.clone(), Int)],
                terms: vec![t(scrut), tb(body, vec![0])],
                types: vec![a(ann)],
            },
            Inl { arg, ann } | Inr { arg, ann } | False { scrut: arg, ann } => {
                Parts { binders: vec![], terms: vec![t(arg)], types: vec![a(ann)] }
            }
            Case { scrut, left, on_left, right, on_right, ann } => Parts {
                binders: vec![(left.clone(), Lin), (right.clone(), Lin)],
                terms: vec![t(scrut), tb(on_left, vec![0]), tb(on_right, vec![1])],
                types: vec![a(ann)],
            },
            SigmaPair { fst, snd, ann } => Parts { binders: vec![], terms: vec![t(fst), t(snd)], types: vec![a(ann)] },
            LetSigma { scrut, fst, snd, body, ann } => Parts {
                binders: vec![(fst.clone(), Int), (snd.clone(), Lin)],
                terms: vec![t(scrut), tb(body, vec![0, 1])],
                types: vec![a(ann)],
            },
            PiLam { var, dom, body } => Parts {
                binders: vec![(var.clone(), Int)],
                terms: vec![tb(body, vec![0])],
                types: vec![(Some((**dom).clone()), vec![])],
            },
            LetId { lhs, rhs, proof, var, body, motive, generic } => {
                let mut types = vec![(Some((*motive.ty).clone()), vec![1, 2])];
                types.extend(generic.iter().map(|(_, ty)| (Some(ty.clone()), vec![0])));
                Parts {
                    binders: vec![(var.clone(), Int), (motive.left.clone(), Int), (motive.right.clone(), Int)],
                    terms: vec![t(lhs), t(rhs), t(proof), tb(body, vec![0])],
                    types,
                }
            }
            If { motive, scrut, then_branch, else_branch } => Parts {
                binders: vec![(motive.var.clone(), Int)],
                terms: vec![t(scrut), t(then_branch), t(else_branch)],
                types: vec![(Some((*motive.ty).clone()), vec![0])],
            },
        }
    }

    /// Rebuild this constructor from (possibly modified) parts.
    pub fn rebuild(&self, p: Parts) -> TermExpr {
        use TermExpr::*;
        match self {
            IntVar(_) | LinVar(_) | Star | UnitTop | TT | FF => self.clone(),
            Const { name, .. } => Const { name: name.clone(), args: p.terms.into_iter().map(|(t, _)| t).collect() },
            LetStar { .. } => LetStar { scrut: p.term(0), body: p.term(1), ann: p.ann(0) },
            TensorPair(..) => TensorPair(p.term(0), p.term(1)),
            App(..) => App(p.term(0), p.term(1)),
            WithPair(..) => WithPair(p.term(0), p.term(1)),
            PiApp(..) => PiApp(p.term(0), p.term(1)),
            LetTensor { .. } => {
                LetTensor { scrut: p.term(0), left: p.name(0), right: p.name(1), body: p.term(1), ann: p.ann(0) }
            }
            Lam { .. } => Lam { var: p.name(0), ty: p.ty(0), body: p.term(0) },
            BangIntro(_) => BangIntro(p.term(0)),
            Fst(_) => Fst(p.term(0)),
            Snd(_) => Snd(p.term(0)),
            Refl(_) => Refl(p.term(0)),
            LetBang { .. } => LetBang { scrut: p.term(0), var: p.name(0), body: p.term(1), ann: p.ann(0) },
            Inl { .. } => Inl { arg: p.term(0), ann: p.ann(0) },
            Inr { .. } => Inr { arg: p.term(0), ann: p.ann(0) },
            False { .. } => False { scrut: p.term(0), ann: p.ann(0) },
            Case { .. } => Case {
                scrut: p.term(0),
                left: p.name(0),
                on_left: p.term(1),
                right: p.name(1),
                on_right: p.term(2),
                ann: p.ann(0),
            },
            SigmaPair { .. } => SigmaPair { fst: p.term(0), snd: p.term(1), ann: p.ann(0) },
            LetSigma { .. } => {
                LetSigma { scrut: p.term(0), fst: p.name(0), snd: p.name(1), body: p.term(1), ann: p.ann(0) }
            }
            PiLam { .. } => PiLam { var: p.name(0), dom: p.ty(0), body: p.term(0) },
            LetId { generic, .. } => LetId {
                lhs: p.term(0),
                rhs: p.term(1),
                proof: p.term(2),
                var: p.name(0),
                body: p.term(3),
                motive: IdMotive { left: p.name(1), right: p.name(2), ty: p.ty(0) },
                generic: generic
                    .iter()
                    .enumerate()
                    .map(|(i, (n, _))| (n.clone(), *p.ty(i + 1)))
                    .collect(),
            },
            If { .. } => If {
                motive: Motive { var: p.name(0), ty: p.ty(0) },
                scrut: p.term(0),
                then_branch: p.term(1),
                else_branch: p.term(2),
            },
        }
    }

    /// Direct child terms, in the fixed order used by paths and spans.
    pub fn children(&self) -> Vec<TermExpr> {
        self.parts().terms.into_iter().map(|(t, _)| t).collect()
    }

    pub fn var(&self) -> Option<(&str, VarKind)> {
        match self {
            TermExpr::IntVar(x) => Some((x, VarKind::Int)),
            TermExpr::LinVar(x) => Some((x, VarKind::Lin)),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(TermExpr::size).sum::<usize>()
    }

    /// The subterm at `path` (child indices).
    pub fn at(&self, path: &[usize]) -> Option<TermExpr> {
        match path.split_first() {
            None => Some(self.clone()),
            Some((&i, rest)) => self.children().get(i)?.at(rest),
        }
    }

    /// Replace the subterm at `path`. Binders along the path are kept as is.
    pub fn replace_at(&self, path: &[usize], new: TermExpr) -> TermExpr {
        match path.split_first() {
            None => new,
            Some((&i, rest)) => {
                let mut p = self.parts();
                let child = p.terms[i].0.replace_at(rest, new);
                p.terms[i].0 = child;
                self.rebuild(p)
            }
        }
    }

    /// Remove all elaboration annotations.
    pub fn erase_annotations(&self) -> TermExpr {
        let mut p = self.parts();
        for (t, _) in p.terms.iter_mut() {
            *t = t.erase_annotations();
        }
        let erased = self.rebuild(p);
        match erased {
            TermExpr::LetStar { scrut, body, .. } => TermExpr::LetStar { scrut, body, ann: None },
            TermExpr::LetTensor { scrut, left, right, body, .. } => TermExpr::LetTensor { scrut, left, right, body, ann: None },
            TermExpr::LetBang { scrut, var, body, .. } => TermExpr::LetBang { scrut, var, body, ann: None },
            TermExpr::Inl { arg, .. } => TermExpr::Inl { arg, ann: None },
            TermExpr::Inr { arg, .. } => TermExpr::Inr { arg, ann: None },
            TermExpr::False { scrut, .. } => TermExpr::False { scrut, ann: None },
            TermExpr::Case { scrut, left, on_left, right, on_right, .. } => {
                TermExpr::Case { scrut, left, on_left, right, on_right, ann: None }
            }
            TermExpr::SigmaPair { fst, snd, .. } => TermExpr::SigmaPair { fst, snd, ann: None },
            TermExpr::LetSigma { scrut, fst, snd, body, .. } => TermExpr::LetSigma { scrut, fst, snd, body, ann: None },
            TermExpr::LetId { lhs, rhs, proof, var, body, motive, .. } => {
                TermExpr::LetId { lhs, rhs, proof, var, body, motive, generic: vec![] }
            }
            other => other,
        }
    }
}

impl TypeExpr {
    pub fn base(name: &str) -> TypeExpr {
        TypeExpr::Base { name: name.to_string(), args: vec![] }
    }

    pub fn parts(&self) -> Parts {
        use TypeExpr::*;
        let ty = |x: &TypeExpr, s: Vec<usize>| (Some(x.clone()), s);
        match self {
            Unit | Top | Zero | Two => Parts::leaf(),
            Base { args, .. } => Parts { binders: vec![], terms: args.iter().map(|a| (a.clone(), vec![])).collect(), types: vec![] },
            Tensor(x, y) | Lolli(x, y) | With(x, y) | Plus(x, y) => {
                Parts { binders: vec![], terms: vec![], types: vec![ty(x, vec![]), ty(y, vec![])] }
            }
            Bang(x) => Parts { binders: vec![], terms: vec![], types: vec![ty(x, vec![])] },
            Sigma { var, dom, body } | Pi { var, dom, body } => Parts {
                binders: vec![(var.clone(), VarKind::Int)],
                terms: vec![],
                types: vec![ty(dom, vec![]), ty(body, vec![0])],
            },
            Id { dom, lhs, rhs } => Parts {
                binders: vec![],
                terms: vec![((**lhs).clone(), vec![]), ((**rhs).clone(), vec![])],
                types: vec![ty(dom, vec![])],
            },
        }
    }

    pub fn rebuild(&self, p: Parts) -> TypeExpr {
        use TypeExpr::*;
        match self {
            Unit | Top | Zero | Two => self.clone(),
            Base { name, .. } => Base { name: name.clone(), args: p.terms.into_iter().map(|(t, _)| t).collect() },
            Tensor(..) => Tensor(p.ty(0), p.ty(1)),
            Lolli(..) => Lolli(p.ty(0), p.ty(1)),
            With(..) => With(p.ty(0), p.ty(1)),
            Plus(..) => Plus(p.ty(0), p.ty(1)),
            Bang(_) => Bang(p.ty(0)),
            Sigma { .. } => Sigma { var: p.name(0), dom: p.ty(0), body: p.ty(1) },
            Pi { .. } => Pi { var: p.name(0), dom: p.ty(0), body: p.ty(1) },
            Id { .. } => Id { dom: p.ty(0), lhs: p.term(0), rhs: p.term(1) },
        }
    }
}

/// Free variables: an intuitionistic set and a linear multiset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreeVars {
    pub int: BTreeSet<Name>,
    pub lin: BTreeMap<Name, usize>,
}

impl FreeVars {
    pub fn lin_count(&self, x: &str) -> usize {
        self.lin.get(x).copied().unwrap_or(0)
    }

    pub fn contains(&self, x: &str, kind: VarKind) -> bool {
        match kind {
            VarKind::Int => self.int.contains(x),
            VarKind::Lin => self.lin.contains_key(x),
        }
    }

    fn absorb(&mut self, other: FreeVars, bound: &[(Name, VarKind)]) {
        for x in other.int {
            if !bound.iter().any(|(n, k)| *n == x && *k == VarKind::Int) {
                self.int.insert(x);
            }
        }
        for (x, c) in other.lin {
            if !bound.iter().any(|(n, k)| *n == x && *k == VarKind::Lin) {
                *self.lin.entry(x).or_insert(0) += c;
            }
        }
    }

    fn from_parts(p: &Parts) -> FreeVars {
        let mut fv = FreeVars::default();
        for (t, scope) in &p.terms {
            let bound: Vec<(Name, VarKind)> = scope.iter().map(|&i| p.binders[i].clone()).collect();
            fv.absorb(t.free_vars(), &bound);
        }
        for (ty, scope) in &p.types {
            if let Some(ty) = ty {
                let bound: Vec<(Name, VarKind)> = scope.iter().map(|&i| p.binders[i].clone()).collect();
                fv.absorb(ty.free_vars(), &bound);
            }
        }
        fv
    }
}

pub trait Syntax: Clone + PartialEq + fmt::Display + 'static {
    fn parts(&self) -> Parts;
    fn rebuild(&self, p: Parts) -> Self;
    fn free_vars(&self) -> FreeVars;
    fn as_var(&self) -> Option<(&str, VarKind)>;
}

impl Syntax for TermExpr {
    fn parts(&self) -> Parts {
        TermExpr::parts(self)
    }
    fn rebuild(&self, p: Parts) -> Self {
        TermExpr::rebuild(self, p)
    }
    fn free_vars(&self) -> FreeVars {
        match self {
            TermExpr::IntVar(x) => FreeVars { int: [x.clone()].into(), lin: BTreeMap::new() },
            TermExpr::LinVar(x) => FreeVars { int: BTreeSet::new(), lin: [(x.clone(), 1)].into() },
            _ => FreeVars::from_parts(&self.parts()),
        }
    }
    fn as_var(&self) -> Option<(&str, VarKind)> {
        self.var()
    }
}

impl Syntax for TypeExpr {
    fn parts(&self) -> Parts {
        TypeExpr::parts(self)
    }
    fn rebuild(&self, p: Parts) -> Self {
        TypeExpr::rebuild(self, p)
    }
    fn free_vars(&self) -> FreeVars {
        FreeVars::from_parts(&self.parts())
    }
    fn as_var(&self) -> Option<(&str, VarKind)> {
        None
    }
}

/// A name based on `base` avoiding everything in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() || stem.starts_with('#') { "v" } else { stem };
    if !avoid.contains(base) && !base.starts_with('#') {
        return base.to_string();
    }
    (1..).map(|i| format!("{stem}{i}")).find(|n| !avoid.contains(n)).expect("unbounded supply")
}

fn all_names(fv: &FreeVars) -> BTreeSet<Name> {
    fv.int.iter().cloned().chain(fv.lin.keys().cloned()).collect()
}

/// Capture-avoiding substitution of `a` for the free variable `x` of kind `kind`.
pub fn subst<S: Syntax>(subject: &S, x: &str, kind: VarKind, a: &TermExpr) -> S {
    subst_many(subject, &[(x.to_string(), kind, a.clone())])
}

/// Simultaneous capture-avoiding substitution.
pub fn subst_many<S: Syntax>(subject: &S, sub: &[(Name, VarKind, TermExpr)]) -> S {
    if sub.is_empty() {
        return subject.clone();
    }
    if let Some((y, k)) = subject.as_var() {
        if let Some((_, _, a)) = sub.iter().find(|(x, kx, _)| x == y && *kx == k) {
            return as_same_kind(subject, a.clone());
        }
        return subject.clone();
    }
    let mut p = subject.parts();
    if p.binders.is_empty() {
        for (t, _) in p.terms.iter_mut() {
            *t = subst_many(t, sub);
        }
        for (ty, _) in p.types.iter_mut() {
            if let Some(inner) = ty {
                *ty = Some(subst_many(inner, sub));
            }
        }
        return subject.rebuild(p);
    }
    // Names that must not be captured by this node's binders.
    let mut incoming = BTreeSet::new();
    for (_, _, a) in sub {
        incoming.extend(all_names(&a.free_vars()));
    }
    let mut avoid = incoming.clone();
    avoid.extend(all_names(&subject.free_vars()));
    for (x, _, _) in sub {
        avoid.insert(x.clone());
    }
    for (n, _) in &p.binders {
        avoid.insert(n.clone());
    }
    for i in 0..p.binders.len() {
        let (name, kind) = p.binders[i].clone();
        if incoming.contains(&name) {
            let new = fresh_name(&name, &avoid);
            avoid.insert(new.clone());
            let replacement = match kind {
                VarKind::Int => TermExpr::IntVar(new.clone()),
                VarKind::Lin => TermExpr::LinVar(new.clone()),
            };
            let rename = [(name.clone(), kind, replacement)];
            for (t, scope) in p.terms.iter_mut() {
                if scope.contains(&i) {
                    *t = subst_many(t, &rename);
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
    }
    let binders = p.binders.clone();
    let restrict = |scope: &Vec<usize>| -> Vec<(Name, VarKind, TermExpr)> {
        sub.iter()
            .filter(|(x, k, _)| !scope.iter().any(|&i| binders[i].0 == *x && binders[i].1 == *k))
            .cloned()
            .collect()
    };
    for (t, scope) in p.terms.iter_mut() {
        *t = subst_many(t, &restrict(scope));
    }
    for (ty, scope) in p.types.iter_mut() {
        if let Some(inner) = ty {
            *ty = Some(subst_many(inner, &restrict(scope)));
        }
    }
    subject.rebuild(p)
}

fn as_same_kind<S: Syntax>(subject: &S, a: TermExpr) -> S {
    // Variables only occur as terms, so S is TermExpr here.
    let any: &dyn std::any::Any = &a;
    let _ = subject;
    any.downcast_ref::<S>().cloned().expect("variables are terms")
}

/// `subject[a/x]` for an intuitionistic variable `x`.
pub fn subst_int<S: Syntax>(subject: &S, x: &str, a: &TermExpr) -> S {
    subst(subject, x, VarKind::Int, a)
}

/// `subject[a/x]` for a linear variable `x`.
pub fn subst_lin(subject: &TermExpr, x: &str, a: &TermExpr) -> TermExpr {
    subst(subject, x, VarKind::Lin, a)
}

/// Rename every binder to `#n` in pre-order, optionally dropping
/// annotations. Two expressions are alpha-equivalent iff their canonical
/// forms are identical.
pub fn canonical<S: Syntax + 'static>(s: &S, erase: bool) -> S {
    let mut counter = 0usize;
    canon_rec(s, &mut counter, &HashMap::new(), erase)
}

fn canon_rec<S: Syntax + 'static>(s: &S, counter: &mut usize, env: &HashMap<(Name, VarKind), Name>, erase: bool) -> S {
    if let Some((x, k)) = s.as_var() {
        return match env.get(&(x.to_string(), k)) {
            Some(n) => as_same_kind(
                s,
                match k {
                    VarKind::Int => TermExpr::IntVar(n.clone()),
                    VarKind::Lin => TermExpr::LinVar(n.clone()),
                },
            ),
            None => s.clone(),
        };
    }
    let subject = erase_top(s, erase);
    let mut p = subject.parts();
    let mut fresh = Vec::with_capacity(p.binders.len());
    for _ in &p.binders {
        fresh.push(format!("#{counter}"));
        *counter += 1;
    }
    let scoped = |scope: &Vec<usize>| {
        let mut e = env.clone();
        for &i in scope {
            e.insert(p.binders[i].clone(), fresh[i].clone());
        }
        e
    };
    let mut terms = Vec::new();
    for (t, scope) in &p.terms {
        terms.push((canon_rec(t, counter, &scoped(scope), erase), scope.clone()));
    }
    let mut types = Vec::new();
    for (ty, scope) in &p.types {
        types.push((ty.as_ref().map(|ty| canon_rec(ty, counter, &scoped(scope), erase)), scope.clone()));
    }
    for (i, b) in p.binders.iter_mut().enumerate() {
        b.0 = fresh[i].clone();
    }
    p.terms = terms;
    p.types = types;
    subject.rebuild(p)
}

fn erase_top<S: Syntax + 'static>(s: &S, erase: bool) -> S {
    if !erase {
        return s.clone();
    }
    let any: &dyn std::any::Any = s;
    match any.downcast_ref::<TermExpr>() {
        Some(t) => {
            let top = strip_own_annotation(t);
            let any: &dyn std::any::Any = &top;
            any.downcast_ref::<S>().cloned().expect("same type")
        }
        None => s.clone(),
    }
}

fn strip_own_annotation(t: &TermExpr) -> TermExpr {
    use TermExpr::*;
    match t.clone() {
        LetStar { scrut, body, .. } => LetStar { scrut, body, ann: None },
        LetTensor { scrut, left, right, body, .. } => LetTensor { scrut, left, right, body, ann: None },
        LetBang { scrut, var, body, .. } => LetBang { scrut, var, body, ann: None },
        Inl { arg, .. } => Inl { arg, ann: None },
        Inr { arg, .. } => Inr { arg, ann: None },
        False { scrut, .. } => False { scrut, ann: None },
        Case { scrut, left, on_left, right, on_right, .. } => Case { scrut, left, on_left, right, on_right, ann: None },
        SigmaPair { fst, snd, .. } => SigmaPair { fst, snd, ann: None },
        LetSigma { scrut, fst, snd, body, .. } => LetSigma { scrut, fst, snd, body, ann: None },
        LetId { lhs, rhs, proof, var, body, motive, .. } => LetId { lhs, rhs, proof, var, body, motive, generic: vec![] },
        other => other,
    }
}

/// Equality up to renaming of bound variables (annotations included).
pub fn alpha_eq<S: Syntax + 'static>(u: &S, v: &S) -> bool {
    canonical(u, false) == canonical(v, false)
}

/// Alpha-equivalence ignoring elaboration annotations.
pub fn alpha_eq_erased(u: &TermExpr, v: &TermExpr) -> bool {
    canonical(u, true) == canonical(v, true)
}

/// A region of a source file.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct SourceSpan {
    pub file: Option<String>,
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(file: Option<String>, start: usize, end: usize) -> SourceSpan {
        assert!(start <= end, "span start after end");
        SourceSpan { file, start, end }
    }

    /// 1-based line and column of the start offset.
    pub fn line_col(&self, text: &str) -> (usize, usize) {
        line_col(text, self.start)
    }
}

pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in text.char_indices() {
        if i >= offset {
            break;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

/// Spans of a term and, recursively, its children (same order as
/// [`TermExpr::children`]).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SpanTree {
    pub span: SourceSpan,
    pub children: Vec<SpanTree>,
}

impl SpanTree {
    /// The span of the deepest node along `path` that has one.
    pub fn locate(&self, path: &[usize]) -> &SourceSpan {
        match path.split_first() {
            Some((&i, rest)) if i < self.children.len() => self.children[i].locate(rest),
            _ => &self.span,
        }
    }
}

/// A base type family with its intuitionistic parameter telescope.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeDecl {
    pub name: Name,
    pub params: Vec<(Name, TypeExpr)>,
}

/// An intuitionistic constant.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstDecl {
    pub name: Name,
    pub params: Vec<(Name, TypeExpr)>,
    pub ty: TypeExpr,
}

/// A checked closed definition; `term` is the elaborated body.
#[derive(Clone, Debug, PartialEq)]
pub struct Definition {
    pub name: Name,
    pub ty: TypeExpr,
    pub term: TermExpr,
}

/// Literal model data attached to a declared name.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelBinding {
    /// `pointed { a0*, a1 }`: labels with the basepoint first.
    Pointed { base: String, others: Vec<String> },
    /// An element label, for a constant.
    Label(String),
    /// A family keyed by closed argument terms.
    Family(Vec<(Vec<TermExpr>, ModelBinding)>),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Signature {
    pub types: Vec<TypeDecl>,
    pub consts: Vec<ConstDecl>,
    pub defs: Vec<Definition>,
    pub models: Vec<(Name, ModelBinding)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("name `{0}` is declared twice")]
    Duplicate(Name),
}

impl Signature {
    pub fn is_declared(&self, name: &str) -> bool {
        self.types.iter().any(|t| t.name == name)
            || self.consts.iter().any(|c| c.name == name)
            || self.defs.iter().any(|d| d.name == name)
    }

    fn fresh(&self, name: &str) -> Result<(), SignatureError> {
        if self.is_declared(name) {
            Err(SignatureError::Duplicate(name.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn add_type(&mut self, decl: TypeDecl) -> Result<(), SignatureError> {
        self.fresh(&decl.name)?;
        self.types.push(decl);
        Ok(())
    }

    pub fn add_const(&mut self, decl: ConstDecl) -> Result<(), SignatureError> {
        self.fresh(&decl.name)?;
        self.consts.push(decl);
        Ok(())
    }

    pub fn add_def(&mut self, def: Definition) -> Result<(), SignatureError> {
        self.fresh(&def.name)?;
        self.defs.push(def);
        Ok(())
    }

    pub fn bind_model(&mut self, name: &str, binding: ModelBinding) {
        self.models.retain(|(n, _)| n != name);
        self.models.push((name.to_string(), binding));
    }

    pub fn type_decl(&self, name: &str) -> Option<&TypeDecl> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn const_decl(&self, name: &str) -> Option<&ConstDecl> {
        self.consts.iter().find(|c| c.name == name)
    }

    pub fn def(&self, name: &str) -> Option<&Definition> {
        self.defs.iter().find(|d| d.name == name)
    }

    pub fn model(&self, name: &str) -> Option<&ModelBinding> {
        self.models.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

// ---------------------------------------------------------------------------
// Printing in the surface grammar.

fn type_prec(t: &TypeExpr) -> u8 {
    match t {
        TypeExpr::Sigma { .. } | TypeExpr::Pi { .. } => 0,
        TypeExpr::Lolli(..) => 1,
        TypeExpr::Plus(..) => 2,
        TypeExpr::With(..) => 3,
        TypeExpr::Tensor(..) => 4,
        TypeExpr::Bang(_) => 5,
        _ => 6,
    }
}

fn write_type(f: &mut fmt::Formatter<'_>, t: &TypeExpr, min: u8) -> fmt::Result {
    let p = type_prec(t);
    if p < min {
        write!(f, "(")?;
        write_type(f, t, 0)?;
        return write!(f, ")");
    }
    match t {
        TypeExpr::Base { name, args } => {
            write!(f, "{name}")?;
            if !args.is_empty() {
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")?;
            }
            Ok(())
        }
        TypeExpr::Unit => write!(f, "I"),
        TypeExpr::Top => write!(f, "Top"),
        TypeExpr::Zero => write!(f, "0"),
        TypeExpr::Two => write!(f, "2"),
        TypeExpr::Tensor(a, b) => {
            write_type(f, a, 4)?;
            write!(f, " * ")?;
            write_type(f, b, 5)
        }
        TypeExpr::With(a, b) => {
            write_type(f, a, 3)?;
            write!(f, " & ")?;
            write_type(f, b, 4)
        }
        TypeExpr::Plus(a, b) => {
            write_type(f, a, 2)?;
            write!(f, " + ")?;
            write_type(f, b, 3)
        }
        TypeExpr::Lolli(a, b) => {
            write_type(f, a, 2)?;
            write!(f, " -o ")?;
            write_type(f, b, 1)
        }
        TypeExpr::Bang(a) => {
            write!(f, "!")?;
            write_type(f, a, 5)
        }
        TypeExpr::Sigma { var, dom, body } | TypeExpr::Pi { var, dom, body } => {
            let kw = if matches!(t, TypeExpr::Sigma { .. }) { "Sig" } else { "Pi" };
            write!(f, "{kw} (!{var} : !")?;
            write_type(f, dom, 5)?;
            write!(f, ") ")?;
            write_type(f, body, 0)
        }
        TypeExpr::Id { dom, lhs, rhs } => {
            write!(f, "Id !")?;
            let mut inner: &TypeExpr = dom;
            while let TypeExpr::Bang(x) = inner {
                inner = x;
            }
            if matches!(inner, TypeExpr::Base { args, .. } if !args.is_empty()) {
                write!(f, "(")?;
                write_type(f, dom, 0)?;
                write!(f, ")")?;
            } else {
                write_type(f, dom, 5)?;
            }
            write!(f, " ({lhs}, {rhs})")
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_type(f, self, 0)
    }
}

// Term precedence: 0 binders/lets, 1 tensor pairs, 2 application, 3 atoms.
fn term_prec(t: &TermExpr) -> u8 {
    use TermExpr::*;
    match t {
        Lam { .. } | PiLam { .. } | LetStar { .. } | LetTensor { .. } | LetBang { .. } | LetSigma { .. } | LetId { .. }
        | Case { .. } | If { .. } => 0,
        TensorPair(..) | SigmaPair { .. } => 1,
        App(..) | PiApp(..) | BangIntro(_) | Fst(_) | Snd(_) | Inl { .. } | Inr { .. } | False { .. } | Refl(_) => 2,
        Const { args, .. } if !args.is_empty() => 3,
        _ => 3,
    }
}

fn write_term(f: &mut fmt::Formatter<'_>, t: &TermExpr, min: u8) -> fmt::Result {
    use TermExpr::*;
    if term_prec(t) < min {
        write!(f, "(")?;
        write_term(f, t, 0)?;
        return write!(f, ")");
    }
    match t {
        IntVar(x) | LinVar(x) => write!(f, "{x}"),
        Const { name, args } => {
            write!(f, "{name}")?;
            if !args.is_empty() {
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write_term(f, a, 0)?;
                }
                write!(f, ")")?;
            }
            Ok(())
        }
        Star => write!(f, "star"),
        UnitTop => write!(f, "unit"),
        TT => write!(f, "tt"),
        FF => write!(f, "ff"),
        LetStar { scrut, body, .. } => {
            write!(f, "let ")?;
            write_term(f, scrut, 0)?;
            write!(f, " be * in ")?;
            write_term(f, body, 0)
        }
        TensorPair(a, b) => {
            write_term(f, a, 1)?;
            write!(f, " (*) ")?;
            write_term(f, b, 2)
        }
        SigmaPair { fst, snd, .. } => {
            write!(f, "bang ")?;
            write_term(f, fst, 3)?;
            write!(f, " (*) ")?;
            write_term(f, snd, 2)
        }
        LetTensor { scrut, left, right, body, .. } => {
            write!(f, "let ")?;
            write_term(f, scrut, 0)?;
            write!(f, " be {left} (*) {right} in ")?;
            write_term(f, body, 0)
        }
        LetSigma { scrut, fst, snd, body, .. } => {
            write!(f, "let ")?;
            write_term(f, scrut, 0)?;
            write!(f, " be !{fst} (*) {snd} in ")?;
            write_term(f, body, 0)
        }
        LetBang { scrut, var, body, .. } => {
            write!(f, "let ")?;
            write_term(f, scrut, 0)?;
            write!(f, " be !{var} in ")?;
            write_term(f, body, 0)
        }
        Lam { var, ty, body } => {
            write!(f, "lam ({var} : {ty}) ")?;
            write_term(f, body, 0)
        }
        PiLam { var, dom, body } => {
            write!(f, "lam (!{var} : !")?;
            write_type(f, dom, 5)?;
            write!(f, ") ")?;
            write_term(f, body, 0)
        }
        App(g, a) => {
            write_term(f, g, 2)?;
            write!(f, " ")?;
            write_term(f, a, 3)
        }
        PiApp(g, a) => {
            write_term(f, g, 2)?;
            write!(f, " !")?;
            write_term(f, a, 3)
        }
        BangIntro(a) => {
            write!(f, "bang ")?;
            write_term(f, a, 3)
        }
        Refl(a) => {
            write!(f, "refl !")?;
            write_term(f, a, 3)
        }
        Fst(a) => {
            write!(f, "fst ")?;
            write_term(f, a, 3)
        }
        Snd(a) => {
            write!(f, "snd ")?;
            write_term(f, a, 3)
        }
        Inl { arg, .. } => {
            write!(f, "inl ")?;
            write_term(f, arg, 3)
        }
        Inr { arg, .. } => {
            write!(f, "inr ")?;
            write_term(f, arg, 3)
        }
        False { scrut, .. } => {
            write!(f, "false ")?;
            write_term(f, scrut, 3)
        }
        WithPair(a, b) => {
            write!(f, "<")?;
            write_term(f, a, 0)?;
            write!(f, ", ")?;
            write_term(f, b, 0)?;
            write!(f, ">")
        }
        Case { scrut, left, on_left, right, on_right, .. } => {
            write!(f, "case ")?;
            write_term(f, scrut, 0)?;
            write!(f, " of inl {left} -> ")?;
            // A nested binder form in the first branch would swallow `||`.
            write_term(f, on_left, 1)?;
            write!(f, " || inr {right} -> ")?;
            write_term(f, on_right, 0)
        }
        If { motive, scrut, then_branch, else_branch } => {
            write!(f, "if [{} . {}] ", motive.var, motive.ty)?;
            write_term(f, scrut, 1)?;
            write!(f, " then ")?;
            write_term(f, then_branch, 1)?;
            write!(f, " else ")?;
            write_term(f, else_branch, 0)
        }
        LetId { lhs, rhs, proof, var, body, motive, generic } => {
            write!(f, "let (")?;
            write_term(f, lhs, 0)?;
            write!(f, ", ")?;
            write_term(f, rhs, 0)?;
            write!(f, ", ")?;
            write_term(f, proof, 0)?;
            write!(f, ") be ({var}, {var}, refl !{var}) in ")?;
            write_term(f, body, 1)?;
            write!(f, " with [{}, {} . {}]", motive.left, motive.right, motive.ty)?;
            if !generic.is_empty() {
                write!(f, " over ")?;
                for (i, (y, ty)) in generic.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({y} : {ty})")?;
                }
            }
            Ok(())
        }
    }
}

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(f, self, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use TermExpr as T;

    fn a() -> TypeExpr {
        TypeExpr::base("A")
    }

    fn lam(x: &str, body: TermExpr) -> TermExpr {
        T::Lam { var: x.into(), ty: Box::new(a()), body: Box::new(body) }
    }

    #[test]
    fn substitution_identity_and_shadowing() {
        let c = T::Const { name: "c".into(), args: vec![] };
        assert_eq!(subst_int(&T::int("x"), "x", &c), c);
        let pl = T::PiLam { var: "x".into(), dom: Box::new(a()), body: Box::new(T::int("x")) };
        assert_eq!(subst_int(&pl, "x", &c), pl);
    }

    #[test]
    fn substitution_under_sigma_binder() {
        let b = TypeExpr::base("B");
        let ty = TypeExpr::Sigma {
            var: "y".into(),
            dom: Box::new(b.clone()),
            body: Box::new(TypeExpr::Id { dom: Box::new(b.clone()), lhs: Box::new(T::int("x")), rhs: Box::new(T::int("y")) }),
        };
        let before = ty.free_vars();
        assert!(before.int.contains("x") && !before.int.contains("y"));
        let c = T::Const { name: "c".into(), args: vec![] };
        let after = subst_int(&ty, "x", &c);
        assert!(after.free_vars().int.is_empty());
        let expected = TypeExpr::Sigma {
            var: "y".into(),
            dom: Box::new(b.clone()),
            body: Box::new(TypeExpr::Id { dom: Box::new(b), lhs: Box::new(c), rhs: Box::new(T::int("y")) }),
        };
        assert_eq!(after, expected);
    }

    #[test]
    fn substitution_avoids_capture() {
        // (Σ_{!y:!A} Id(x, y))[y/x] must rename the binder.
        let ty = TypeExpr::Sigma {
            var: "y".into(),
            dom: Box::new(a()),
            body: Box::new(TypeExpr::Id { dom: Box::new(a()), lhs: Box::new(T::int("x")), rhs: Box::new(T::int("y")) }),
        };
        let out = subst_int(&ty, "x", &T::int("y"));
        match &out {
            TypeExpr::Sigma { var, body, .. } => {
                assert_ne!(var, "y");
                assert!(body.free_vars().int.contains("y"));
            }
            _ => panic!("shape"),
        }
        assert!(out.free_vars().int.contains("y"));
    }

    #[test]
    fn linear_substitution_examples() {
        let pair = T::TensorPair(Box::new(T::lin("x")), Box::new(T::lin("y")));
        let out = subst_lin(&pair, "x", &T::lin("a"));
        assert_eq!(out, T::TensorPair(Box::new(T::lin("a")), Box::new(T::lin("y"))));
        let ls = T::LetStar { scrut: Box::new(T::lin("x")), body: Box::new(T::lin("y")), ann: None };
        let out = subst_lin(&ls, "y", &T::lin("b"));
        assert_eq!(out, T::LetStar { scrut: Box::new(T::lin("x")), body: Box::new(T::lin("b")), ann: None });
        // With-pairs share their linear context: both occurrences are replaced.
        let w = T::Fst(Box::new(T::WithPair(Box::new(T::lin("x")), Box::new(T::lin("x")))));
        let out = subst_lin(&w, "x", &T::lin("a"));
        assert_eq!(out, T::Fst(Box::new(T::WithPair(Box::new(T::lin("a")), Box::new(T::lin("a"))))));
    }

    #[test]
    fn alpha_equivalence() {
        assert!(alpha_eq(&lam("x", T::lin("x")), &lam("y", T::lin("y"))));
        assert!(!alpha_eq(&lam("x", T::lin("x")), &lam("x", T::UnitTop)));
        let mk = |p: &str, q: &str| TypeExpr::Pi {
            var: p.into(),
            dom: Box::new(a()),
            body: Box::new(TypeExpr::Sigma { var: q.into(), dom: Box::new(a()), body: Box::new(TypeExpr::Unit) }),
        };
        assert!(alpha_eq(&mk("x", "y"), &mk("y", "x")));
    }

    #[test]
    fn free_variable_multiset() {
        let xx = T::TensorPair(Box::new(T::lin("x")), Box::new(T::lin("x")));
        assert_eq!(xx.free_vars().lin_count("x"), 2);
        let bang = T::BangIntro(Box::new(T::int("a")));
        assert!(bang.free_vars().lin.is_empty());
        let lt = T::LetTensor {
            scrut: Box::new(T::lin("t")),
            left: "x".into(),
            right: "y".into(),
            body: Box::new(T::App(Box::new(T::lin("x")), Box::new(T::lin("z")))),
            ann: None,
        };
        let fv = lt.free_vars();
        assert_eq!(fv.lin.keys().cloned().collect::<Vec<_>>(), vec!["t".to_string(), "z".to_string()]);
    }

    #[test]
    fn replace_and_locate_paths() {
        let t = T::TensorPair(Box::new(T::lin("x")), Box::new(T::Star));
        assert_eq!(t.at(&[1]), Some(T::Star));
        let r = t.replace_at(&[0], T::lin("y"));
        assert_eq!(r, T::TensorPair(Box::new(T::lin("y")), Box::new(T::Star)));
    }
}
