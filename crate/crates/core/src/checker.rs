//! Bidirectional type checker with leftover-threaded linear usage.
//!
//! Each linear hypothesis carries a consumed flag. Multiplicative rules
//! thread the flags through their premises; additive rules run every branch
//! from the same flags and join them. Premises whose context is `Δ;·` are
//! checked with the linear zone hidden. `⊤-I` and `0-E` mark their node as
//! having slack, which lets it absorb whatever the enclosing scope leaves
//! unconsumed. A final pass assigns every node of the derivation its exact
//! linear context.

use crate::equality::{EqError, Equality};
use crate::syntax::*;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum ErrorKind {
    UnboundVariable,
    LinearUnused,
    LinearReused,
    TypeMismatch,
    IllFormedContext,
    EqualityFailure,
}

impl ErrorKind {
    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::UnboundVariable => "unbound variable",
            ErrorKind::LinearUnused => "linear variable unused",
            ErrorKind::LinearReused => "linear variable reused",
            ErrorKind::TypeMismatch => "type mismatch",
            ErrorKind::IllFormedContext => "ill-formed context",
            ErrorKind::EqualityFailure => "equality failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckError {
    pub kind: ErrorKind,
    pub variable: Option<Name>,
    pub message: String,
    pub expected: Option<String>,
    pub actual: Option<String>,
    /// Child-index path of the offending subterm in the checked term.
    pub path: Vec<usize>,
    pub span: Option<SourceSpan>,
}

impl CheckError {
    fn new(kind: ErrorKind, message: impl Into<String>, path: &[usize]) -> CheckError {
        CheckError {
            kind,
            variable: None,
            message: message.into(),
            expected: None,
            actual: None,
            path: path.to_vec(),
            span: None,
        }
    }

    fn var(kind: ErrorKind, x: &str, message: impl Into<String>, path: &[usize]) -> CheckError {
        CheckError { variable: Some(x.to_string()), ..CheckError::new(kind, message, path) }
    }

    fn mismatch(expected: impl fmt::Display, actual: impl fmt::Display, message: impl Into<String>, path: &[usize]) -> CheckError {
        CheckError {
            expected: Some(expected.to_string()),
            actual: Some(actual.to_string()),
            ..CheckError::new(ErrorKind::TypeMismatch, message, path)
        }
    }

    fn equality(e: EqError, path: &[usize]) -> CheckError {
        CheckError::new(ErrorKind::EqualityFailure, e.to_string(), path)
    }
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variable {
            Some(x) => write!(f, "{}: {x}", self.kind.label())?,
            None => write!(f, "{}", self.kind.label())?,
        }
        if !self.message.is_empty() {
            write!(f, " ({})", self.message)?;
        }
        if let (Some(e), Some(a)) = (&self.expected, &self.actual) {
            write!(f, "; expected `{e}`, found `{a}`")?;
        }
        Ok(())
    }
}

impl std::error::Error for CheckError {}

/// A dual context `Δ;Ξ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DualContext {
    pub int: Vec<(Name, TypeExpr)>,
    pub lin: Vec<(Name, TypeExpr)>,
}

impl DualContext {
    pub fn new(int: Vec<(Name, TypeExpr)>, lin: Vec<(Name, TypeExpr)>) -> DualContext {
        DualContext { int, lin }
    }

    pub fn empty() -> DualContext {
        DualContext::default()
    }
}

fn show_zone(f: &mut fmt::Formatter<'_>, zone: &[(Name, TypeExpr)]) -> fmt::Result {
    if zone.is_empty() {
        return write!(f, "·");
    }
    for (i, (x, ty)) in zone.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x} : {ty}")?;
    }
    Ok(())
}

impl fmt::Display for DualContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        show_zone(f, &self.int)?;
        write!(f, "; ")?;
        show_zone(f, &self.lin)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Conclusion {
    /// `⊢ Δ;Ξ ctxt`
    Context(DualContext),
    /// `Δ;· ⊢ A type`
    Type { int: Vec<(Name, TypeExpr)>, ty: TypeExpr },
    /// `Δ;Ξ ⊢ t : A`
    Term { ctx: DualContext, term: TermExpr, ty: TypeExpr },
}

impl fmt::Display for Conclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Conclusion::Context(c) => write!(f, "⊢ {c} ctxt"),
            Conclusion::Type { int, ty } => {
                show_zone(f, int)?;
                write!(f, "; · ⊢ {ty} type")
            }
            Conclusion::Term { ctx, term, ty } => write!(f, "{ctx} ⊢ {term} : {ty}"),
        }
    }
}

/// A node of a derivation.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckedJudgement {
    pub rule: String,
    pub conclusion: Conclusion,
    pub premises: Vec<CheckedJudgement>,
    /// Path of the subterm this node derives, relative to the checked term.
    pub path: Vec<usize>,
    pub span: Option<SourceSpan>,
}

impl CheckedJudgement {
    /// All nodes in pre-order.
    pub fn nodes(&self) -> Vec<&CheckedJudgement> {
        let mut out = vec![self];
        for p in &self.premises {
            out.extend(p.nodes());
        }
        out
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(CheckedJudgement::size).sum::<usize>()
    }

    pub fn rules(&self) -> BTreeSet<String> {
        self.nodes().into_iter().map(|n| n.rule.clone()).collect()
    }

    fn attach_spans(&mut self, spans: &SpanTree) {
        self.span = Some(spans.locate(&self.path).clone());
        for p in self.premises.iter_mut() {
            p.attach_spans(spans);
        }
    }

    fn write_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}[{}] {}", "", self.rule, self.conclusion, indent = depth * 2)?;
        for p in &self.premises {
            p.write_tree(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for CheckedJudgement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_tree(f, 0)
    }
}

/// Result of checking a term: the elaborated term and its derivation.
#[derive(Clone, Debug, PartialEq)]
pub struct Checked {
    pub term: TermExpr,
    pub ty: TypeExpr,
    pub derivation: CheckedJudgement,
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    /// Premise over `Δ;·`.
    Empty,
    /// Multiplicative premise: threads the usage state.
    Mult,
    /// Member of additive group `k`: shares the linear context.
    Add(u8),
}

#[derive(Clone, Debug)]
enum PreKind {
    Term { term: TermExpr, ty: TypeExpr },
    Type { ty: TypeExpr },
}

/// A derivation node before linear contexts are settled.
#[derive(Clone, Debug)]
struct Pre {
    rule: &'static str,
    kind: PreKind,
    int: Vec<(Name, TypeExpr)>,
    lin: Vec<(Name, TypeExpr)>,
    premises: Vec<(Pre, Mode)>,
    used: BTreeSet<Name>,
    slack: bool,
    own_slack: bool,
    path: Vec<usize>,
}

impl Pre {
    fn term(&self) -> TermExpr {
        match &self.kind {
            PreKind::Term { term, .. } => term.clone(),
            PreKind::Type { .. } => unreachable!("type node used as term"),
        }
    }

    fn ty(&self) -> TypeExpr {
        match &self.kind {
            PreKind::Term { ty, .. } | PreKind::Type { ty } => ty.clone(),
        }
    }

    fn names(&self) -> BTreeSet<Name> {
        self.lin.iter().map(|(x, _)| x.clone()).collect()
    }
}

#[derive(Clone, Debug)]
struct Lin {
    name: Name,
    ty: TypeExpr,
    used: bool,
}

type CResult<T> = Result<T, CheckError>;

/// The kernel. Holds a signature and an equality engine.
pub struct Checker<'s> {
    pub sig: &'s Signature,
    pub eq: Equality<'s>,
}

struct Ck<'c, 's> {
    sig: &'s Signature,
    eq: &'c Equality<'s>,
    int: Vec<(Name, TypeExpr)>,
    lin: Vec<Lin>,
    floor: usize,
}

impl<'s> Checker<'s> {
    pub fn new(sig: &'s Signature) -> Checker<'s> {
        Checker { sig, eq: Equality::new(sig) }
    }

    pub fn with_step_limit(sig: &'s Signature, limit: usize) -> Checker<'s> {
        Checker { sig, eq: Equality::new(sig).with_step_limit(limit) }
    }

    fn ck(&self) -> Ck<'_, 's> {
        Ck { sig: self.sig, eq: &self.eq, int: vec![], lin: vec![], floor: 0 }
    }

    /// `⊢ Δ;Ξ ctxt`
    pub fn check_context(&self, ctx: &DualContext) -> CResult<CheckedJudgement> {
        let mut ck = self.ck();
        let mut node = CheckedJudgement {
            rule: "C-Emp".into(),
            conclusion: Conclusion::Context(DualContext::empty()),
            premises: vec![],
            path: vec![],
            span: None,
        };
        let mut seen = BTreeSet::new();
        let mut built = DualContext::empty();
        for (x, ty) in &ctx.int {
            if !seen.insert(x.clone()) {
                return Err(CheckError::var(ErrorKind::IllFormedContext, x, "declared twice", &[]));
            }
            let tyj = ck.check_type(ty, &[])?;
            built.int.push((x.clone(), ty.clone()));
            ck.int.push((x.clone(), ty.clone()));
            node = CheckedJudgement {
                rule: "Int-C-Ext".into(),
                conclusion: Conclusion::Context(built.clone()),
                premises: vec![node, settle(tyj, &BTreeSet::new())],
                path: vec![],
                span: None,
            };
        }
        for (x, ty) in &ctx.lin {
            if !seen.insert(x.clone()) {
                return Err(CheckError::var(ErrorKind::IllFormedContext, x, "declared twice", &[]));
            }
            let tyj = ck.check_type(ty, &[])?;
            built.lin.push((x.clone(), ty.clone()));
            node = CheckedJudgement {
                rule: "Lin-C-Ext".into(),
                conclusion: Conclusion::Context(built.clone()),
                premises: vec![node, settle(tyj, &BTreeSet::new())],
                path: vec![],
                span: None,
            };
        }
        Ok(node)
    }

    /// `Δ;· ⊢ A type`
    pub fn check_type(&self, int: &[(Name, TypeExpr)], ty: &TypeExpr) -> CResult<CheckedJudgement> {
        let mut ck = self.ck();
        ck.int = int.to_vec();
        let pre = ck.check_type(ty, &[])?;
        Ok(settle(pre, &BTreeSet::new()))
    }

    /// `Δ;Ξ ⊢ t : A`, elaborating `t`.
    pub fn check_term(&self, ctx: &DualContext, t: &TermExpr, ty: &TypeExpr) -> CResult<Checked> {
        self.run(ctx, t, Some(ty))
    }

    /// Infer `A` with `Δ;Ξ ⊢ t : A`.
    pub fn infer_term(&self, ctx: &DualContext, t: &TermExpr) -> CResult<Checked> {
        self.run(ctx, t, None)
    }

    fn run(&self, ctx: &DualContext, t: &TermExpr, ty: Option<&TypeExpr>) -> CResult<Checked> {
        self.check_context(ctx)?;
        let mut ck = self.ck();
        ck.int = ctx.int.clone();
        ck.lin = ctx.lin.iter().map(|(x, ty)| Lin { name: x.clone(), ty: ty.clone(), used: false }).collect();
        let pre = match ty {
            Some(ty) => {
                ck.check_type(ty, &[])?;
                ck.check(t, ty, &[])?
            }
            None => ck.infer(t, &[])?,
        };
        let leftover: BTreeSet<Name> = ck.lin.iter().filter(|l| !l.used).map(|l| l.name.clone()).collect();
        if let Some(x) = leftover.iter().next() {
            if !pre.slack {
                return Err(CheckError::var(ErrorKind::LinearUnused, x, "", &[]));
            }
        }
        let term = pre.term();
        let ty = pre.ty();
        Ok(Checked { term, ty, derivation: settle(pre, &leftover) })
    }

    /// Check `t` and attach source spans to the derivation.
    pub fn check_with_spans(&self, ctx: &DualContext, t: &TermExpr, ty: Option<&TypeExpr>, spans: &SpanTree) -> CResult<Checked> {
        match self.run(ctx, t, ty) {
            Ok(mut c) => {
                c.derivation.attach_spans(spans);
                Ok(c)
            }
            Err(mut e) => {
                e.span = Some(spans.locate(&e.path).clone());
                Err(e)
            }
        }
    }
}

fn child(path: &[usize], i: usize) -> Vec<usize> {
    let mut p = path.to_vec();
    p.push(i);
    p
}

fn shape(t: &TermExpr) -> &'static str {
    use TermExpr::*;
    match t {
        Lam { .. } => "a linear abstraction",
        PiLam { .. } => "a dependent abstraction",
        TensorPair(..) => "a tensor pair",
        SigmaPair { .. } => "a dependent pair",
        BangIntro(_) => "a `bang` introduction",
        WithPair(..) => "a with-pair",
        UnitTop => "`unit`",
        Inl { .. } | Inr { .. } => "an injection",
        _ => "this term",
    }
}

impl<'c, 's> Ck<'c, 's> {
    fn visible(&self) -> Vec<(Name, TypeExpr)> {
        self.lin[self.floor..].iter().map(|l| (l.name.clone(), l.ty.clone())).collect()
    }

    fn taken(&self) -> BTreeSet<Name> {
        self.int.iter().map(|(x, _)| x.clone()).chain(self.lin.iter().map(|l| l.name.clone())).collect()
    }

    /// A binder name not clashing with anything in scope.
    fn fresh(&self, x: &str) -> Name {
        let taken = self.taken();
        if taken.contains(x) {
            fresh_name(x, &taken)
        } else {
            x.to_string()
        }
    }

    fn node(&self, rule: &'static str, term: TermExpr, ty: TypeExpr, premises: Vec<(Pre, Mode)>, own_slack: bool, path: &[usize]) -> Pre {
        self.node_in(self.int.clone(), self.visible(), rule, term, ty, premises, own_slack, path)
    }

    #[allow(clippy::too_many_arguments)]
    fn node_in(
        &self,
        int: Vec<(Name, TypeExpr)>,
        lin: Vec<(Name, TypeExpr)>,
        rule: &'static str,
        term: TermExpr,
        ty: TypeExpr,
        premises: Vec<(Pre, Mode)>,
        own_slack: bool,
        path: &[usize],
    ) -> Pre {
        let names: BTreeSet<Name> = lin.iter().map(|(x, _)| x.clone()).collect();
        let mut used = BTreeSet::new();
        let mut slack = own_slack;
        let mut groups: Vec<(u8, bool)> = Vec::new();
        for (p, m) in &premises {
            match m {
                Mode::Empty => {}
                Mode::Mult => {
                    slack |= p.slack;
                    used.extend(p.used.intersection(&names).cloned());
                }
                Mode::Add(k) => {
                    used.extend(p.used.intersection(&names).cloned());
                    match groups.iter_mut().find(|(g, _)| g == k) {
                        Some(g) => g.1 &= p.slack,
                        None => groups.push((*k, p.slack)),
                    }
                }
            }
        }
        slack |= groups.iter().any(|(_, s)| *s);
        Pre { rule, kind: PreKind::Term { term, ty }, int, lin, premises, used, slack, own_slack, path: path.to_vec() }
    }

    fn flags(&self) -> Vec<bool> {
        self.lin.iter().map(|l| l.used).collect()
    }

    fn set_flags(&mut self, flags: &[bool]) {
        for (l, f) in self.lin.iter_mut().zip(flags) {
            l.used = *f;
        }
    }

    /// Run `f` over `Δ;·`.
    fn empty<T>(&mut self, f: impl FnOnce(&mut Self) -> CResult<T>) -> CResult<T> {
        let saved = self.floor;
        self.floor = self.lin.len();
        let r = f(self);
        self.floor = saved;
        r
    }

    fn with_int<T>(&mut self, x: &Name, ty: &TypeExpr, f: impl FnOnce(&mut Self) -> CResult<T>) -> CResult<T> {
        self.int.push((x.clone(), ty.clone()));
        let r = f(self);
        self.int.pop();
        r
    }

    /// Run `f` with linear binders; each must be consumed or absorbed by slack.
    fn with_lin(&mut self, binds: &[(Name, TypeExpr)], path: &[usize], f: impl FnOnce(&mut Self) -> CResult<Pre>) -> CResult<Pre> {
        for (x, ty) in binds {
            self.lin.push(Lin { name: x.clone(), ty: ty.clone(), used: false });
        }
        let r = f(self);
        let popped: Vec<Lin> = self.lin.split_off(self.lin.len() - binds.len());
        let pre = r?;
        for l in popped {
            if !l.used && !pre.slack {
                return Err(CheckError::var(ErrorKind::LinearUnused, &l.name, "bound here but never used", path));
            }
        }
        Ok(pre)
    }

    /// Join additive branches that started from `start`.
    fn join(&mut self, start: &[bool], branches: &[&Pre], path: &[usize]) -> CResult<()> {
        let outer: BTreeSet<Name> = self.lin[self.floor..].iter().map(|l| l.name.clone()).collect();
        let used: Vec<BTreeSet<Name>> = branches.iter().map(|b| b.used.intersection(&outer).cloned().collect()).collect();
        let union: BTreeSet<Name> = used.iter().flatten().cloned().collect();
        for (b, u) in branches.iter().zip(&used) {
            if !b.slack {
                if let Some(x) = union.difference(u).next() {
                    return Err(CheckError::var(
                        ErrorKind::LinearUnused,
                        x,
                        "consumed in one branch of an additive rule but not in another",
                        path,
                    ));
                }
            }
        }
        self.set_flags(start);
        for l in self.lin.iter_mut() {
            if union.contains(&l.name) {
                l.used = true;
            }
        }
        Ok(())
    }

    fn types_equal(&self, a: &TypeExpr, b: &TypeExpr, path: &[usize]) -> CResult<bool> {
        if alpha_eq(a, b) {
            return Ok(true);
        }
        self.eq.types_equal(a, b).map_err(|e| CheckError::equality(e, path))
    }

    fn terms_equal(&self, a: &TermExpr, b: &TermExpr, ty: &TypeExpr, path: &[usize]) -> CResult<bool> {
        self.eq.judg_equal(a, b, Some(ty)).map_err(|e| CheckError::equality(e, path))
    }

    /// Tm-Conv, if needed.
    fn conv(&self, pre: Pre, expected: &TypeExpr, path: &[usize]) -> CResult<Pre> {
        let actual = pre.ty();
        if alpha_eq(&actual, expected) {
            return Ok(pre);
        }
        if self.types_equal(&actual, expected, path)? {
            let term = pre.term();
            let (int, lin) = (pre.int.clone(), pre.lin.clone());
            return Ok(self.node_in(int, lin, "Tm-Conv", term, expected.clone(), vec![(pre, Mode::Mult)], false, path));
        }
        Err(CheckError::mismatch(expected, &actual, "", path))
    }

    // ---- type formation ----

    fn check_type(&mut self, ty: &TypeExpr, path: &[usize]) -> CResult<Pre> {
        use TypeExpr::*;
        let mut premises = Vec::new();
        let rule = match ty {
            Unit => "I-F",
            Top => "⊤-F",
            Zero => "0-F",
            Two => "2-F",
            Tensor(a, b) | Lolli(a, b) | With(a, b) | Plus(a, b) => {
                premises.push((self.check_type(a, path)?, Mode::Empty));
                premises.push((self.check_type(b, path)?, Mode::Empty));
                match ty {
                    Tensor(..) => "⊗-F",
                    Lolli(..) => "⊸-F",
                    With(..) => "&-F",
                    _ => "⊕-F",
                }
            }
            Bang(a) => {
                premises.push((self.check_type(a, path)?, Mode::Empty));
                "!-F"
            }
            Sigma { var, dom, body } | Pi { var, dom, body } => {
                premises.push((self.check_type(dom, path)?, Mode::Empty));
                let x = self.fresh(var);
                let body = if x == *var { (**body).clone() } else { subst_int(&**body, var, &TermExpr::IntVar(x.clone())) };
                let b = self.with_int(&x, dom, |ck| ck.check_type(&body, path))?;
                premises.push((b, Mode::Empty));
                if matches!(ty, Sigma { .. }) {
                    "Σ-F"
                } else {
                    "Π-F"
                }
            }
            Id { dom, lhs, rhs } => {
                premises.push((self.check_type(dom, path)?, Mode::Empty));
                let l = self.empty(|ck| ck.check(lhs, dom, path))?;
                let r = self.empty(|ck| ck.check(rhs, dom, path))?;
                premises.push((l, Mode::Empty));
                premises.push((r, Mode::Empty));
                "Id-F"
            }
            Base { name, args } => {
                let decl = self.sig.type_decl(name).ok_or_else(|| {
                    CheckError::var(ErrorKind::UnboundVariable, name, "no such type", path)
                })?;
                for p in self.args(&decl.params.clone(), args, name, path)? {
                    premises.push((p, Mode::Empty));
                }
                "Ty-Const"
            }
        };
        Ok(Pre {
            rule,
            kind: PreKind::Type { ty: ty.clone() },
            int: self.int.clone(),
            lin: vec![],
            premises,
            used: BTreeSet::new(),
            slack: false,
            own_slack: false,
            path: path.to_vec(),
        })
    }

    /// Check an argument list against a parameter telescope.
    fn args(&mut self, params: &[(Name, TypeExpr)], args: &[TermExpr], name: &str, path: &[usize]) -> CResult<Vec<Pre>> {
        if params.len() != args.len() {
            return Err(CheckError::mismatch(
                format!("{} argument(s)", params.len()),
                format!("{} argument(s)", args.len()),
                format!("wrong number of arguments to `{name}`"),
                path,
            ));
        }
        let mut sub: Vec<(Name, VarKind, TermExpr)> = Vec::new();
        let mut out = Vec::new();
        for (i, ((x, pty), a)) in params.iter().zip(args).enumerate() {
            let expected = subst_many(pty, &sub);
            let p = self.empty(|ck| ck.check(a, &expected, &child(path, i)))?;
            sub.push((x.clone(), VarKind::Int, p.term()));
            out.push(p);
        }
        Ok(out)
    }

    fn const_type(&self, name: &str, args: &[TermExpr], path: &[usize]) -> CResult<TypeExpr> {
        if let Some(d) = self.sig.def(name) {
            if !args.is_empty() {
                return Err(CheckError::mismatch("no arguments", "arguments", format!("`{name}` takes no arguments"), path));
            }
            return Ok(d.ty.clone());
        }
        let c = self.sig.const_decl(name).ok_or_else(|| CheckError::var(ErrorKind::UnboundVariable, name, "", path))?;
        let sub: Vec<(Name, VarKind, TermExpr)> =
            c.params.iter().zip(args).map(|((x, _), a)| (x.clone(), VarKind::Int, a.clone())).collect();
        Ok(subst_many(&c.ty, &sub))
    }

    // ---- inference ----

    fn infer(&mut self, t: &TermExpr, path: &[usize]) -> CResult<Pre> {
        use TermExpr::*;
        match t {
            IntVar(x) => match self.int.iter().rev().find(|(y, _)| y == x) {
                Some((_, ty)) => Ok(self.node("Int-Var", t.clone(), ty.clone(), vec![], false, path)),
                None => Err(CheckError::var(ErrorKind::UnboundVariable, x, "", path)),
            },
            LinVar(x) => {
                let idx = self.lin.iter().rposition(|l| l.name == *x);
                match idx {
                    None => Err(CheckError::var(ErrorKind::UnboundVariable, x, "", path)),
                    Some(i) if i < self.floor => Err(CheckError::var(
                        ErrorKind::UnboundVariable,
                        x,
                        "linear variables are not available in a premise with an empty linear context",
                        path,
                    )),
                    Some(i) if self.lin[i].used => Err(CheckError::var(ErrorKind::LinearReused, x, "", path)),
                    Some(i) => {
                        self.lin[i].used = true;
                        let ty = self.lin[i].ty.clone();
                        let mut pre = self.node("Lin-Var", t.clone(), ty, vec![], false, path);
                        pre.used.insert(x.clone());
                        Ok(pre)
                    }
                }
            }
            Const { name, args } => {
                let mut premises = Vec::new();
                let mut elaborated = Vec::new();
                if let Some(c) = self.sig.const_decl(name) {
                    for p in self.args(&c.params.clone(), args, name, path)? {
                        elaborated.push(p.term());
                        premises.push((p, Mode::Empty));
                    }
                }
                let ty = self.const_type(name, &elaborated, path)?;
                let term = Const { name: name.clone(), args: elaborated };
                Ok(self.empty(|ck| Ok(ck.node("Const", term, ty, premises, false, path)))?)
            }
            Star => self.empty(|ck| Ok(ck.node("I-I", Star, TypeExpr::Unit, vec![], false, path))),
            TT => self.empty(|ck| Ok(ck.node("2-I-tt", TT, TypeExpr::Two, vec![], false, path))),
            FF => self.empty(|ck| Ok(ck.node("2-I-ff", FF, TypeExpr::Two, vec![], false, path))),
            UnitTop => Ok(self.node("⊤-I", UnitTop, TypeExpr::Top, vec![], true, path)),
            LetStar { ann: Some(ann), .. }
            | LetTensor { ann: Some(ann), .. }
            | LetBang { ann: Some(ann), .. }
            | LetSigma { ann: Some(ann), .. }
            | Case { ann: Some(ann), .. }
            | Inl { ann: Some(ann), .. }
            | Inr { ann: Some(ann), .. }
            | False { ann: Some(ann), .. }
            | SigmaPair { ann: Some(ann), .. } => {
                let ann = (**ann).clone();
                self.check_type(&ann, path)?;
                self.check(t, &ann, path)
            }
            LetStar { .. } | LetTensor { .. } | LetBang { .. } | LetSigma { .. } => self.elim_let(t, None, path),
            TensorPair(a, b) => {
                let pa = self.infer(a, &child(path, 0))?;
                let pb = self.infer(b, &child(path, 1))?;
                let ty = TypeExpr::Tensor(Box::new(pa.ty()), Box::new(pb.ty()));
                let term = TensorPair(Box::new(pa.term()), Box::new(pb.term()));
                Ok(self.node("⊗-I", term, ty, vec![(pa, Mode::Mult), (pb, Mode::Mult)], false, path))
            }
            Lam { var, ty, body } => {
                let tyj = self.check_type(ty, path)?;
                let (x, body) = self.rename_binder(var, VarKind::Lin, body);
                let pb = self.with_lin(&[(x.clone(), (**ty).clone())], path, |ck| ck.infer(&body, &child(path, 0)))?;
                let res = TypeExpr::Lolli(ty.clone(), Box::new(pb.ty()));
                let term = Lam { var: x, ty: ty.clone(), body: Box::new(pb.term()) };
                Ok(self.node("⊸-I", term, res, vec![(tyj, Mode::Empty), (pb, Mode::Mult)], false, path))
            }
            App(f, a) => {
                let pf = self.infer(f, &child(path, 0))?;
                match pf.ty() {
                    TypeExpr::Lolli(dom, cod) => {
                        let pa = self.check(a, &dom, &child(path, 1))?;
                        let term = App(Box::new(pf.term()), Box::new(pa.term()));
                        Ok(self.node("⊸-E", term, *cod, vec![(pf, Mode::Mult), (pa, Mode::Mult)], false, path))
                    }
                    other => Err(CheckError::mismatch(
                        "a linear function type",
                        other,
                        if matches!(pf.ty(), TypeExpr::Pi { .. }) { "apply dependent functions with `f !a`" } else { "" },
                        &child(path, 0),
                    )),
                }
            }
            BangIntro(a) => {
                let pa = self.empty(|ck| ck.infer(a, &child(path, 0)))?;
                let ty = TypeExpr::Bang(Box::new(pa.ty()));
                let term = BangIntro(Box::new(pa.term()));
                Ok(self.node("!-I", term, ty, vec![(pa, Mode::Empty)], false, path))
            }
            WithPair(a, b) => {
                let start = self.flags();
                let pa = self.infer(a, &child(path, 0))?;
                self.set_flags(&start);
                let pb = self.infer(b, &child(path, 1))?;
                self.join(&start, &[&pa, &pb], path)?;
                let ty = TypeExpr::With(Box::new(pa.ty()), Box::new(pb.ty()));
                let term = WithPair(Box::new(pa.term()), Box::new(pb.term()));
                Ok(self.node("&-I", term, ty, vec![(pa, Mode::Add(0)), (pb, Mode::Add(0))], false, path))
            }
            Fst(p) | Snd(p) => {
                let pp = self.infer(p, &child(path, 0))?;
                match pp.ty() {
                    TypeExpr::With(a, b) => {
                        let (rule, ty, term) = if matches!(t, Fst(_)) {
                            ("&-E1", *a, Fst(Box::new(pp.term())))
                        } else {
                            ("&-E2", *b, Snd(Box::new(pp.term())))
                        };
                        Ok(self.node(rule, term, ty, vec![(pp, Mode::Mult)], false, path))
                    }
                    other => Err(CheckError::mismatch("a with-type `A & B`", other, "", &child(path, 0))),
                }
            }
            Inl { .. } | Inr { .. } | False { .. } | SigmaPair { .. } => Err(CheckError::new(
                ErrorKind::TypeMismatch,
                format!("cannot infer the type of {}; add a type annotation", shape(t)),
                path,
            )),
            Case { .. } => self.case(t, None, path),
            PiLam { var, dom, body } => {
                let tyj = self.check_type(dom, path)?;
                let (x, body) = self.rename_binder(var, VarKind::Int, body);
                let pb = self.with_int(&x, dom, |ck| ck.infer(&body, &child(path, 0)))?;
                let ty = TypeExpr::Pi { var: x.clone(), dom: dom.clone(), body: Box::new(pb.ty()) };
                let term = PiLam { var: x, dom: dom.clone(), body: Box::new(pb.term()) };
                Ok(self.node("Π-I", term, ty, vec![(tyj, Mode::Empty), (pb, Mode::Mult)], false, path))
            }
            PiApp(f, a) => {
                let pf = self.infer(f, &child(path, 0))?;
                match pf.ty() {
                    TypeExpr::Pi { var, dom, body } => {
                        let pa = self.empty(|ck| ck.check(a, &dom, &child(path, 1)))?;
                        let ty = subst_int(&*body, &var, &pa.term());
                        let term = PiApp(Box::new(pf.term()), Box::new(pa.term()));
                        Ok(self.node("Π-E", term, ty, vec![(pf, Mode::Mult), (pa, Mode::Empty)], false, path))
                    }
                    other => Err(CheckError::mismatch("a dependent function type", other, "", &child(path, 0))),
                }
            }
            Refl(a) => {
                let pa = self.empty(|ck| ck.infer(a, &child(path, 0)))?;
                let at = pa.term();
                let ty = TypeExpr::Id { dom: Box::new(pa.ty()), lhs: Box::new(at.clone()), rhs: Box::new(at.clone()) };
                Ok(self.empty(|ck| Ok(ck.node("Id-I", Refl(Box::new(at)), ty, vec![(pa, Mode::Empty)], false, path)))?)
            }
            LetId { .. } => self.let_id(t, path),
            If { .. } => self.if_then_else(t, path),
        }
    }

    /// Rename a binder away from names in scope, returning the new name and body.
    fn rename_binder(&self, x: &Name, kind: VarKind, body: &TermExpr) -> (Name, TermExpr) {
        let y = self.fresh(x);
        if y == *x {
            return (y, body.clone());
        }
        let v = match kind {
            VarKind::Int => TermExpr::IntVar(y.clone()),
            VarKind::Lin => TermExpr::LinVar(y.clone()),
        };
        (y, subst(body, x, kind, &v))
    }

    // ---- checking ----

    fn check(&mut self, t: &TermExpr, expected: &TypeExpr, path: &[usize]) -> CResult<Pre> {
        use TermExpr::*;
        match (t, expected) {
            (Lam { var, ty, body }, TypeExpr::Lolli(dom, cod)) => {
                let tyj = self.check_type(ty, path)?;
                if !self.types_equal(ty, dom, path)? {
                    return Err(CheckError::mismatch(&**dom, &**ty, "annotation on the bound variable", path));
                }
                let (x, body) = self.rename_binder(var, VarKind::Lin, body);
                let pb = self.with_lin(&[(x.clone(), (**ty).clone())], path, |ck| ck.check(&body, cod, &child(path, 0)))?;
                let term = Lam { var: x, ty: ty.clone(), body: Box::new(pb.term()) };
                Ok(self.node("⊸-I", term, expected.clone(), vec![(tyj, Mode::Empty), (pb, Mode::Mult)], false, path))
            }
            (PiLam { var, dom, body }, TypeExpr::Pi { var: v, dom: edom, body: ebody }) => {
                let tyj = self.check_type(dom, path)?;
                if !self.types_equal(dom, edom, path)? {
                    return Err(CheckError::mismatch(&**edom, &**dom, "annotation on the bound variable", path));
                }
                let (x, body) = self.rename_binder(var, VarKind::Int, body);
                let target = subst_int(&**ebody, v, &IntVar(x.clone()));
                let pb = self.with_int(&x, dom, |ck| ck.check(&body, &target, &child(path, 0)))?;
                let term = PiLam { var: x, dom: dom.clone(), body: Box::new(pb.term()) };
                Ok(self.node("Π-I", term, expected.clone(), vec![(tyj, Mode::Empty), (pb, Mode::Mult)], false, path))
            }
            (TensorPair(a, b), TypeExpr::Tensor(ta, tb)) => {
                let pa = self.check(a, ta, &child(path, 0))?;
                let pb = self.check(b, tb, &child(path, 1))?;
                let term = TensorPair(Box::new(pa.term()), Box::new(pb.term()));
                Ok(self.node("⊗-I", term, expected.clone(), vec![(pa, Mode::Mult), (pb, Mode::Mult)], false, path))
            }
            (TensorPair(a, b), TypeExpr::Sigma { .. }) => match &**a {
                BangIntro(a0) => self.sigma_pair(a0, b, expected, path),
                _ => Err(CheckError::mismatch(expected, "a tensor pair", "the first component of a dependent pair is written `bang a`", path)),
            },
            (SigmaPair { fst, snd, .. }, TypeExpr::Sigma { .. }) => self.sigma_pair(fst, snd, expected, path),
            (SigmaPair { fst, snd, .. }, TypeExpr::Tensor(l, _)) if matches!(**l, TypeExpr::Bang(_)) => {
                let pair = TensorPair(Box::new(BangIntro(fst.clone())), snd.clone());
                self.check(&pair, expected, path)
            }
            (BangIntro(a), TypeExpr::Bang(ta)) => {
                let pa = self.empty(|ck| ck.check(a, ta, &child(path, 0)))?;
                let term = BangIntro(Box::new(pa.term()));
                Ok(self.node("!-I", term, expected.clone(), vec![(pa, Mode::Empty)], false, path))
            }
            (WithPair(a, b), TypeExpr::With(ta, tb)) => {
                let start = self.flags();
                let pa = self.check(a, ta, &child(path, 0))?;
                self.set_flags(&start);
                let pb = self.check(b, tb, &child(path, 1))?;
                self.join(&start, &[&pa, &pb], path)?;
                let term = WithPair(Box::new(pa.term()), Box::new(pb.term()));
                Ok(self.node("&-I", term, expected.clone(), vec![(pa, Mode::Add(0)), (pb, Mode::Add(0))], false, path))
            }
            (UnitTop, TypeExpr::Top) => Ok(self.node("⊤-I", UnitTop, TypeExpr::Top, vec![], true, path)),
            (Inl { arg, .. } | Inr { arg, .. }, TypeExpr::Plus(l, r)) => {
                let left = matches!(t, Inl { .. });
                let pa = self.check(arg, if left { l } else { r }, &child(path, 0))?;
                let ann = Some(Box::new(expected.clone()));
                let (rule, term) = if left {
                    ("⊕-I1", Inl { arg: Box::new(pa.term()), ann })
                } else {
                    ("⊕-I2", Inr { arg: Box::new(pa.term()), ann })
                };
                Ok(self.node(rule, term, expected.clone(), vec![(pa, Mode::Mult)], false, path))
            }
            (False { scrut, .. }, _) => {
                let ps = self.infer(scrut, &child(path, 0))?;
                if ps.ty() != TypeExpr::Zero {
                    return Err(CheckError::mismatch(TypeExpr::Zero, ps.ty(), "", &child(path, 0)));
                }
                let term = False { scrut: Box::new(ps.term()), ann: Some(Box::new(expected.clone())) };
                Ok(self.node("0-E", term, expected.clone(), vec![(ps, Mode::Mult)], true, path))
            }
            (Case { .. }, _) => self.case(t, Some(expected), path),
            (LetStar { .. } | LetTensor { .. } | LetBang { .. } | LetSigma { .. }, _) => self.elim_let(t, Some(expected), path),
            (
                Lam { .. } | PiLam { .. } | TensorPair(..) | SigmaPair { .. } | BangIntro(_) | WithPair(..) | UnitTop | Inl { .. }
                | Inr { .. },
                _,
            ) => Err(CheckError::mismatch(expected, shape(t), format!("{} cannot have this type", shape(t)), path)),
            _ => {
                let pre = self.infer(t, path)?;
                self.conv(pre, expected, path)
            }
        }
    }

    fn sigma_pair(&mut self, a: &TermExpr, b: &TermExpr, expected: &TypeExpr, path: &[usize]) -> CResult<Pre> {
        let TypeExpr::Sigma { var, dom, body } = expected else { unreachable!("caller matched Σ") };
        let pa = self.empty(|ck| ck.check(a, dom, &child(path, 0)))?;
        let target = subst_int(&**body, var, &pa.term());
        let pb = self.check(b, &target, &child(path, 1))?;
        let term = TermExpr::SigmaPair { fst: Box::new(pa.term()), snd: Box::new(pb.term()), ann: Some(Box::new(expected.clone())) };
        Ok(self.node("Σ-I", term, expected.clone(), vec![(pa, Mode::Empty), (pb, Mode::Mult)], false, path))
    }

    /// The body of a let-form: checked against `expected`, or inferred.
    fn body(&mut self, body: &TermExpr, expected: Option<&TypeExpr>, path: &[usize]) -> CResult<Pre> {
        match expected {
            Some(ty) => self.check(body, ty, path),
            None => self.infer(body, path),
        }
    }

    fn no_escape(&self, ty: &TypeExpr, x: &str, path: &[usize]) -> CResult<()> {
        if ty.free_vars().int.contains(x) {
            return Err(CheckError::var(
                ErrorKind::TypeMismatch,
                x,
                "the type of the body depends on a variable bound by the eliminator; add a type annotation",
                path,
            ));
        }
        Ok(())
    }

    fn elim_let(&mut self, t: &TermExpr, expected: Option<&TypeExpr>, path: &[usize]) -> CResult<Pre> {
        use TermExpr::*;
        let (scrut, body) = match t {
            LetStar { scrut, body, .. }
            | LetTensor { scrut, body, .. }
            | LetBang { scrut, body, .. }
            | LetSigma { scrut, body, .. } => (scrut, body),
            _ => unreachable!("caller matched a let-form"),
        };
        let ps = self.infer(scrut, &child(path, 0))?;
        let st = ps.ty();
        let bp = child(path, 1);
        let (rule, pb, term) = match (t, &st) {
            (LetStar { .. }, TypeExpr::Unit) => {
                let pb = self.body(body, expected, &bp)?;
                let ann = Some(Box::new(pb.ty()));
                ("I-E", pb.clone(), LetStar { scrut: Box::new(ps.term()), body: Box::new(pb.term()), ann })
            }
            (LetTensor { left, right, .. }, TypeExpr::Tensor(a, b)) => {
                let (x, body1) = self.rename_binder(left, VarKind::Lin, body);
                self.lin.push(Lin { name: x.clone(), ty: TypeExpr::Unit, used: true });
                let (y, body2) = self.rename_binder(right, VarKind::Lin, &body1);
                self.lin.pop();
                let binds = [(x.clone(), (**a).clone()), (y.clone(), (**b).clone())];
                let pb = self.with_lin(&binds, path, |ck| ck.body(&body2, expected, &bp))?;
                let ann = Some(Box::new(pb.ty()));
                ("⊗-E", pb.clone(), LetTensor { scrut: Box::new(ps.term()), left: x, right: y, body: Box::new(pb.term()), ann })
            }
            (LetBang { var, .. }, TypeExpr::Bang(a)) => {
                let (x, body1) = self.rename_binder(var, VarKind::Int, body);
                let pb = self.with_int(&x, a, |ck| ck.body(&body1, expected, &bp))?;
                self.no_escape(&pb.ty(), &x, path)?;
                let ann = Some(Box::new(pb.ty()));
                ("!-E", pb.clone(), LetBang { scrut: Box::new(ps.term()), var: x, body: Box::new(pb.term()), ann })
            }
            (LetSigma { fst, snd, .. }, TypeExpr::Sigma { var, dom, body: fam }) => {
                let (x, body1) = self.rename_binder(fst, VarKind::Int, body);
                self.int.push((x.clone(), (**dom).clone()));
                let (y, body2) = self.rename_binder(snd, VarKind::Lin, &body1);
                let yty = subst_int(&**fam, var, &IntVar(x.clone()));
                let r = self.with_lin(&[(y.clone(), yty)], path, |ck| ck.body(&body2, expected, &bp));
                self.int.pop();
                let pb = r?;
                self.no_escape(&pb.ty(), &x, path)?;
                let ann = Some(Box::new(pb.ty()));
                ("Σ-E", pb.clone(), LetSigma { scrut: Box::new(ps.term()), fst: x, snd: y, body: Box::new(pb.term()), ann })
            }
            _ => {
                let want = match t {
                    LetStar { .. } => "I",
                    LetTensor { .. } => "a tensor type `A * B`",
                    LetBang { .. } => "a bang type `!A`",
                    _ => "a dependent sum `Sig (!x : !A) B`",
                };
                return Err(CheckError::mismatch(want, st, "scrutinee of a let-form", &child(path, 0)));
            }
        };
        let ty = pb.ty();
        Ok(self.node(rule, term, ty, vec![(ps, Mode::Mult), (pb, Mode::Mult)], false, path))
    }

    fn case(&mut self, t: &TermExpr, expected: Option<&TypeExpr>, path: &[usize]) -> CResult<Pre> {
        let TermExpr::Case { scrut, left, on_left, right, on_right, .. } = t else { unreachable!("caller matched case") };
        let ps = self.infer(scrut, &child(path, 0))?;
        let (a, b) = match ps.ty() {
            TypeExpr::Plus(a, b) => (*a, *b),
            other => return Err(CheckError::mismatch("a sum type `A + B`", other, "", &child(path, 0))),
        };
        let start = self.flags();
        let (x, lbody) = self.rename_binder(left, VarKind::Lin, on_left);
        let pl = self.with_lin(&[(x.clone(), a)], path, |ck| ck.body(&lbody, expected, &child(path, 1)))?;
        let result = pl.ty();
        self.set_flags(&start);
        let (y, rbody) = self.rename_binder(right, VarKind::Lin, on_right);
        let pr = self.with_lin(&[(y.clone(), b)], path, |ck| ck.check(&rbody, &result, &child(path, 2)))?;
        self.join(&start, &[&pl, &pr], path)?;
        let term = TermExpr::Case {
            scrut: Box::new(ps.term()),
            left: x,
            on_left: Box::new(pl.term()),
            right: y,
            on_right: Box::new(pr.term()),
            ann: Some(Box::new(result.clone())),
        };
        Ok(self.node("⊕-E", term, result, vec![(ps, Mode::Mult), (pl, Mode::Add(0)), (pr, Mode::Add(0))], false, path))
    }

    fn if_then_else(&mut self, t: &TermExpr, path: &[usize]) -> CResult<Pre> {
        let TermExpr::If { motive, scrut, then_branch, else_branch } = t else { unreachable!("caller matched if") };
        let x = self.fresh(&motive.var);
        let mty = subst_int(&*motive.ty, &motive.var, &TermExpr::IntVar(x.clone()));
        let pm = self.with_int(&x, &TypeExpr::Two, |ck| ck.check_type(&mty, path))?;
        let ps = self.empty(|ck| ck.check(scrut, &TypeExpr::Two, &child(path, 0)))?;
        let start = self.flags();
        let pa = self.check(then_branch, &subst_int(&mty, &x, &TermExpr::TT), &child(path, 1))?;
        self.set_flags(&start);
        let pb = self.check(else_branch, &subst_int(&mty, &x, &TermExpr::FF), &child(path, 2))?;
        self.join(&start, &[&pa, &pb], path)?;
        let ty = subst_int(&mty, &x, &ps.term());
        let term = TermExpr::If {
            motive: Motive { var: x, ty: Box::new(mty) },
            scrut: Box::new(ps.term()),
            then_branch: Box::new(pa.term()),
            else_branch: Box::new(pb.term()),
        };
        let premises = vec![(pm, Mode::Empty), (ps, Mode::Empty), (pa, Mode::Add(0)), (pb, Mode::Add(0))];
        Ok(self.node("2-E", term, ty, premises, false, path))
    }

    fn let_id(&mut self, t: &TermExpr, path: &[usize]) -> CResult<Pre> {
        let TermExpr::LetId { lhs, rhs, proof, var, body, motive, generic } = t else { unreachable!("caller matched let-id") };
        let pp = self.infer(proof, &child(path, 2))?;
        let (dom, l, r) = match pp.ty() {
            TypeExpr::Id { dom, lhs, rhs } => (*dom, *lhs, *rhs),
            other => return Err(CheckError::mismatch("an identity type", other, "", &child(path, 2))),
        };
        let pl = self.empty(|ck| ck.check(lhs, &dom, &child(path, 0)))?;
        let pr = self.empty(|ck| ck.check(rhs, &dom, &child(path, 1)))?;
        let (a, a2) = (pl.term(), pr.term());
        if !self.terms_equal(&a, &l, &dom, path)? || !self.terms_equal(&a2, &r, &dom, path)? {
            let want = TypeExpr::Id { dom: Box::new(dom.clone()), lhs: Box::new(a.clone()), rhs: Box::new(a2.clone()) };
            return Err(CheckError::mismatch(want, pp.ty(), "the proof does not relate the named endpoints", &child(path, 2)));
        }
        // Motive D over x, x' : A.
        let x = self.fresh(&motive.left);
        let d1 = subst_int(&*motive.ty, &motive.left, &TermExpr::IntVar(x.clone()));
        self.int.push((x.clone(), dom.clone()));
        let x2 = self.fresh(&motive.right);
        self.int.pop();
        let d = subst_int(&d1, &motive.right, &TermExpr::IntVar(x2.clone()));
        self.int.push((x.clone(), dom.clone()));
        let pm = self.with_int(&x2, &dom, |ck| ck.check_type(&d, path));
        self.int.pop();
        let pm = pm?;
        // The body, over Δ, z : A with the generic part of Ξ retyped.
        let (z, body) = self.rename_binder(var, VarKind::Int, body);
        let generic: Vec<(Name, TypeExpr)> =
            generic.iter().map(|(y, ty)| (y.clone(), subst_int(ty, var, &TermExpr::IntVar(z.clone())))).collect();
        let mut premises = vec![(pl, Mode::Empty), (pr, Mode::Empty), (pp, Mode::Mult), (pm, Mode::Empty)];
        let mut saved = Vec::new();
        for (y, ty) in &generic {
            let tj = self.with_int(&z, &dom, |ck| ck.check_type(ty, path))?;
            premises.push((tj, Mode::Empty));
            let idx = self.lin[self.floor..]
                .iter()
                .rposition(|l| l.name == *y)
                .map(|i| i + self.floor)
                .ok_or_else(|| CheckError::var(ErrorKind::UnboundVariable, y, "named in `over` but not in the linear context", path))?;
            let instance = subst_int(ty, &z, &a);
            if !self.types_equal(&self.lin[idx].ty, &instance, path)? {
                return Err(CheckError::mismatch(instance, &self.lin[idx].ty, format!("`over` annotation for `{y}`"), path));
            }
            saved.push((idx, std::mem::replace(&mut self.lin[idx].ty, ty.clone())));
        }
        let target = subst_many(&d, &[(x.clone(), VarKind::Int, TermExpr::IntVar(z.clone())), (x2.clone(), VarKind::Int, TermExpr::IntVar(z.clone()))]);
        let pb = self.with_int(&z, &dom, |ck| ck.check(&body, &target, &child(path, 3)));
        for (idx, ty) in saved {
            self.lin[idx].ty = ty;
        }
        let pb = pb?;
        let ty = subst_many(&d, &[(x.clone(), VarKind::Int, a.clone()), (x2.clone(), VarKind::Int, a2.clone())]);
        let term = TermExpr::LetId {
            lhs: Box::new(a),
            rhs: Box::new(a2),
            proof: Box::new(premises[2].0.term()),
            var: z,
            body: Box::new(pb.term()),
            motive: IdMotive { left: x, right: x2, ty: Box::new(d) },
            generic,
        };
        premises.push((pb, Mode::Mult));
        Ok(self.node("Id-E", term, ty, premises, false, path))
    }
}

/// Assign every node its exact linear context. `extras` are variables the
/// node absorbs beyond those it consumes.
fn settle(pre: Pre, extras: &BTreeSet<Name>) -> CheckedJudgement {
    let here = pre.names();
    let mine: BTreeSet<Name> = pre.used.union(extras).cloned().collect();
    let lin: Vec<(Name, TypeExpr)> = pre.lin.iter().filter(|(x, _)| mine.contains(x)).cloned().collect();
    let conclusion = match &pre.kind {
        PreKind::Term { term, ty } => {
            Conclusion::Term { ctx: DualContext { int: pre.int.clone(), lin }, term: term.clone(), ty: ty.clone() }
        }
        PreKind::Type { ty } => Conclusion::Type { int: pre.int.clone(), ty: ty.clone() },
    };

    // Group premises: each multiplicative premise alone, additive members together.
    let mut groups: Vec<(Option<u8>, Vec<usize>)> = Vec::new();
    for (i, (_, m)) in pre.premises.iter().enumerate() {
        match m {
            Mode::Empty => {}
            Mode::Mult => groups.push((None, vec![i])),
            Mode::Add(k) => match groups.iter_mut().find(|(g, _)| *g == Some(*k)) {
                Some(g) => g.1.push(i),
                None => groups.push((Some(*k), vec![i])),
            },
        }
    }
    let pass_on: BTreeSet<Name> = if pre.own_slack { BTreeSet::new() } else { extras.clone() };
    let target = if pass_on.is_empty() {
        None
    } else {
        groups.iter().position(|(_, members)| members.iter().all(|&i| pre.premises[i].0.slack))
    };
    debug_assert!(pass_on.is_empty() || target.is_some(), "leftover assigned to a node without slack");

    let mut extras_for: Vec<BTreeSet<Name>> = vec![BTreeSet::new(); pre.premises.len()];
    for (g, (_, members)) in groups.iter().enumerate() {
        let union: BTreeSet<Name> =
            members.iter().flat_map(|&i| pre.premises[i].0.used.intersection(&here).cloned().collect::<Vec<_>>()).collect();
        for &i in members {
            let p = &pre.premises[i].0;
            let own_binders: BTreeSet<Name> = p.names().difference(&here).cloned().collect();
            let mut ex: BTreeSet<Name> = union.difference(&p.used).cloned().collect();
            ex.extend(own_binders.difference(&p.used).cloned());
            if target == Some(g) {
                ex.extend(pass_on.iter().cloned());
            }
            extras_for[i] = ex;
        }
    }
    let Pre { rule, premises, path, .. } = pre;
    let premises = premises.into_iter().zip(extras_for).map(|((p, _), ex)| settle(p, &ex)).collect();
    CheckedJudgement { rule: rule.to_string(), conclusion, premises, path, span: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_file, parse_term, parse_type};

    fn sig() -> Signature {
        parse_file("type A. type B (x : A). const c : A.", None).unwrap().signature
    }

    fn ty(s: &str, scope: &[&str]) -> TypeExpr {
        let scope: Vec<Name> = scope.iter().map(|x| x.to_string()).collect();
        parse_type(s, &sig(), &scope).unwrap()
    }

    fn ctx(int: &[(&str, &str)], lin: &[(&str, &str)]) -> DualContext {
        let mut c = DualContext::empty();
        let mut scope = Vec::new();
        for (x, t) in int {
            c.int.push((x.to_string(), ty(t, &scope)));
            scope.push(*x);
        }
        for (x, t) in lin {
            c.lin.push((x.to_string(), ty(t, &scope)));
        }
        c
    }

    fn term(s: &str, c: &DualContext) -> TermExpr {
        let mut scope: Vec<(Name, VarKind)> = c.int.iter().map(|(x, _)| (x.clone(), VarKind::Int)).collect();
        scope.extend(c.lin.iter().map(|(x, _)| (x.clone(), VarKind::Lin)));
        parse_term(s, &sig(), &scope).unwrap().0
    }

    fn check(c: &DualContext, t: &str, a: &str) -> CResult<Checked> {
        let s = sig();
        let scope: Vec<&str> = c.int.iter().map(|(x, _)| x.as_str()).collect();
        let tyx = ty(a, &scope);
        let t = term(t, c);
        Checker::new(&s).check_term(c, &t, &tyx)
    }

    #[test]
    fn contexts() {
        let s = sig();
        let k = Checker::new(&s);
        assert_eq!(k.check_context(&DualContext::empty()).unwrap().rule, "C-Emp");
        assert!(k.check_context(&ctx(&[("x", "A")], &[("y", "A")])).is_ok());
        let bad = DualContext::new(vec![], vec![("y".into(), TypeExpr::Base { name: "B".into(), args: vec![TermExpr::int("x")] })]);
        assert_eq!(k.check_context(&bad).unwrap_err().kind, ErrorKind::UnboundVariable);
    }

    #[test]
    fn types() {
        let s = sig();
        let k = Checker::new(&s);
        let int = vec![("x".to_string(), TypeExpr::base("A"))];
        assert!(k.check_type(&int, &ty("Sig (!y : !A) Id !A (x, y)", &["x"])).is_ok());
        let s2 = parse_file("type A. type C. const d : C.", None).unwrap().signature;
        let bad = parse_type("Id !A (d, d)", &s2, &[]).unwrap();
        assert_eq!(Checker::new(&s2).check_type(&[], &bad).unwrap_err().kind, ErrorKind::TypeMismatch);
        assert!(k.check_type(&[], &ty("Pi (!x : !2) Id !2 (if [u . 2] x then tt else ff, x)", &[])).is_ok());
    }

    #[test]
    fn linear_variable_rule() {
        let c = ctx(&[], &[("x", "A")]);
        let j = check(&c, "x", "A").unwrap();
        assert_eq!(j.derivation.rule, "Lin-Var");
    }

    #[test]
    fn reuse_is_rejected() {
        let c = ctx(&[], &[("x", "A")]);
        let e = check(&c, "x (*) x", "A * A").unwrap_err();
        assert_eq!(e.kind, ErrorKind::LinearReused);
        assert_eq!(e.to_string(), "linear variable reused: x");
    }

    #[test]
    fn drop_is_rejected() {
        let c = ctx(&[], &[("x", "A"), ("y", "A")]);
        assert_eq!(check(&c, "x", "A").unwrap_err().kind, ErrorKind::LinearUnused);
        let e = check(&DualContext::empty(), "lam (x : A) star", "A -o I").unwrap_err();
        assert_eq!(e.kind, ErrorKind::LinearUnused);
    }

    #[test]
    fn bang_over_sigma_witness() {
        let j = check(&DualContext::empty(), "lam (!x : !A) bang x (*) star", "Pi (!x : !A) Sig (!y : !A) I").unwrap();
        assert!(matches!(j.term, TermExpr::PiLam { ref body, .. } if matches!(**body, TermExpr::SigmaPair { .. })));
        assert!(j.derivation.rules().contains("Σ-I"));
    }

    #[test]
    fn top_absorbs() {
        let c = ctx(&[("x", "A")], &[("y", "Top")]);
        let j = check(&c, "unit", "Top").unwrap();
        match &j.derivation.conclusion {
            Conclusion::Term { ctx, .. } => assert_eq!(ctx.lin.len(), 1),
            _ => panic!(),
        }
        let c = ctx(&[], &[("y", "A"), ("z", "A")]);
        let j = check(&c, "y (*) unit", "A * Top").unwrap();
        match &j.derivation.premises[1].conclusion {
            Conclusion::Term { ctx, .. } => assert_eq!(ctx.lin, vec![("z".to_string(), TypeExpr::base("A"))]),
            _ => panic!(),
        }
    }

    #[test]
    fn additive_branches_must_agree() {
        let c = ctx(&[], &[("x", "A")]);
        assert!(check(&c, "<x, x>", "A & A").is_ok());
        assert_eq!(check(&c, "<x, star>", "A & I").unwrap_err().kind, ErrorKind::LinearUnused);
        assert!(check(&c, "<x, unit>", "A & Top").is_ok());
        let c = ctx(&[], &[("s", "A + A"), ("y", "A")]);
        assert!(check(&c, "case s of inl a -> a (*) y || inr b -> b (*) y", "A * A").is_ok());
        assert!(check(&c, "case s of inl a -> a (*) y || inr b -> b (*) star", "A * I").is_err());
    }

    #[test]
    fn intuitionistic_premises_hide_linear_variables() {
        let c = ctx(&[], &[("x", "A")]);
        assert_eq!(check(&c, "bang x", "!A").unwrap_err().kind, ErrorKind::UnboundVariable);
        let c = ctx(&[("a", "A")], &[]);
        assert!(check(&c, "bang a", "!A").is_ok());
        assert!(check(&c, "refl !a", "Id !A (a, a)").is_ok());
    }

    #[test]
    fn dependent_elimination() {
        let c = ctx(&[], &[("p", "Sig (!x : !A) B(x)")]);
        let j = check(&c, "let p be !x (*) y in bang x (*) y", "Sig (!x : !A) B(x)").unwrap();
        assert_eq!(j.derivation.rule, "Σ-E");
        let c = ctx(&[], &[("f", "Pi (!x : !A) B(x)")]);
        assert!(check(&c, "f !c", "B(c)").is_ok());
    }

    #[test]
    fn identity_elimination_with_generic_context() {
        let c = ctx(&[("a", "A"), ("b", "A")], &[("p", "Id !A (a, b)"), ("u", "B(a)")]);
        let j = check(&c, "let (a, b, p) be (z, z, refl !z) in u with [x, x2 . B(x2)] over (u : B(z))", "B(b)").unwrap();
        assert_eq!(j.derivation.rule, "Id-E");
        // Without the annotation the body sees `u : B(a)`, which is not `B(z)`.
        assert!(check(&c, "let (a, b, p) be (z, z, refl !z) in u with [x, x2 . B(x2)]", "B(b)").is_err());
    }

    #[test]
    fn if_then_else_is_dependent() {
        let c = ctx(&[("t", "2")], &[]);
        let j = check(&c, "if [x . Id !2 (x, x)] t then refl !tt else refl !ff", "Id !2 (t, t)").unwrap();
        assert_eq!(j.derivation.rule, "2-E");
    }

    #[test]
    fn binder_clash_is_freshened() {
        let c = ctx(&[], &[("x", "A")]);
        let j = check(&c, "(lam (x : A) x) x", "A").unwrap();
        match j.term {
            TermExpr::App(f, _) => assert!(matches!(*f, TermExpr::Lam { ref var, .. } if var != "x")),
            _ => panic!(),
        }
    }

    #[test]
    fn every_node_rechecks_in_its_settled_context() {
        let s = sig();
        let k = Checker::new(&s);
        let c = ctx(&[("a", "A")], &[("y", "A"), ("z", "Top"), ("s", "A + A")]);
        let t = term("(case s of inl u -> <u (*) y, unit> || inr v -> <v (*) y, unit>) (*) unit", &c);
        let ty = ty("((A * A) & Top) * Top", &["a"]);
        let j = k.check_term(&c, &t, &ty).unwrap_or_else(|e| panic!("{e}"));
        for n in j.derivation.nodes() {
            if let Conclusion::Term { ctx, term, ty } = &n.conclusion {
                k.check_term(ctx, term, ty).unwrap_or_else(|e| panic!("{} at {}: {e}", n.rule, n.conclusion));
            }
        }
    }
}
