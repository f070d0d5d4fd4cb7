//! Denotations in Fam(Set★).
//!
//! A term `Δ;Ξ ⊢ t : A` denotes, at each point `s` of the index set `⟦Δ⟧`,
//! a pointed map `⟦Ξ⟧(s) → ⟦A⟧(s)`. The map is computed elementwise: a
//! non-base element of `⟦Ξ⟧(s)` is a smash tuple, one non-base element per
//! linear variable, and the term is evaluated in that environment.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use crate::checker::DualContext;
use crate::fam::*;
use crate::syntax::*;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("no model binding for `{0}`")]
    Unbound(String),
    #[error("model binding for `{name}` has no entry for arguments ({args})")]
    MissingKey { name: String, args: String },
    #[error("label `{label}` is not an element of the model of `{name}`")]
    BadLabel { name: String, label: String },
    #[error("denotation of a term of type {ty} left its fiber: {detail}")]
    IllTyped { ty: String, detail: String },
    #[error("unbound variable `{0}` during evaluation")]
    Free(String),
}

type IResult<T> = Result<T, InterpError>;
pub type Env = BTreeMap<Name, Elem>;

/// How a declared base type is interpreted.
#[derive(Clone, Debug, PartialEq)]
pub enum TypeModel {
    Set(PointedSet),
    /// Fibers keyed by argument values.
    Keyed(Vec<(Vec<Elem>, PointedSet)>),
    /// Pseudo-random fibers of at most `max` points, fixed by the seed.
    Hashed { seed: u64, max: usize },
}

/// How a declared constant is interpreted.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstModel {
    Label(String),
    Keyed(Vec<(Vec<Elem>, String)>),
    /// A pseudo-random element of its fiber, fixed by the seed.
    Hashed { seed: u64 },
}

/// An interpretation of a signature's base types and constants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Model {
    pub types: BTreeMap<Name, TypeModel>,
    pub consts: BTreeMap<Name, ConstModel>,
}

fn hash_of(seed: u64, name: &str, args: &[Elem]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    name.hash(&mut h);
    args.hash(&mut h);
    h.finish()
}

fn show_args(args: &[Elem]) -> String {
    args.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

impl Model {
    /// A model with every base type and constant chosen pseudo-randomly,
    /// with fibers of at most `max_fiber` points.
    pub fn random(sig: &Signature, seed: u64, max_fiber: usize) -> Model {
        let max = max_fiber.max(1);
        let mut m = Model::default();
        for t in &sig.types {
            let tm = if t.params.is_empty() {
                let n = 1 + (hash_of(seed, &t.name, &[]) % max as u64) as usize;
                TypeModel::Set(PointedSet::sized(&t.name.to_lowercase(), n))
            } else {
                TypeModel::Hashed { seed, max }
            };
            m.types.insert(t.name.clone(), tm);
        }
        for c in &sig.consts {
            m.consts.insert(c.name.clone(), ConstModel::Hashed { seed });
        }
        m
    }

    /// The largest fiber of base type `name`, if it is interpreted.
    pub fn fiber_bound(&self, name: &str) -> Option<usize> {
        match self.types.get(name)? {
            TypeModel::Set(x) => Some(x.len()),
            TypeModel::Keyed(fibers) => fibers.iter().map(|(_, x)| x.len()).max(),
            TypeModel::Hashed { max, .. } => Some(*max),
        }
    }

    /// The model given by the signature's `model` declarations.
    pub fn from_signature(sig: &Signature) -> IResult<Model> {
        // Types first (in declaration order, since keys may mention earlier
        // types), then constants.
        let mut m = Model::default();
        for (name, binding) in sig.models.iter().filter(|(n, _)| sig.type_decl(n).is_some()) {
            let tm = type_model(&Interp::new(sig, &m), name, binding)?;
            m.types.insert(name.clone(), tm);
        }
        let mut consts = BTreeMap::new();
        for (name, binding) in sig.models.iter().filter(|(n, _)| sig.type_decl(n).is_none()) {
            consts.insert(name.clone(), const_model(&Interp::new(sig, &m), name, binding)?);
        }
        m.consts = consts;
        Ok(m)
    }
}

fn pointed_of(name: &str, b: &ModelBinding) -> IResult<PointedSet> {
    match b {
        ModelBinding::Pointed { base, others } => Ok(PointedSet::from_labels(base, others.iter().cloned())),
        _ => Err(InterpError::Unbound(name.to_string())),
    }
}

/// Evaluate family keys; a bare name is an element label of its parameter's type.
fn closed_keys(interp: &Interp, name: &str, keys: &[TermExpr]) -> IResult<Vec<Elem>> {
    let params = match (interp.sig.type_decl(name), interp.sig.const_decl(name)) {
        (Some(t), _) => t.params.clone(),
        (None, Some(c)) => c.params.clone(),
        _ => Vec::new(),
    };
    let mut env = Env::new();
    let mut out = Vec::new();
    for (j, k) in keys.iter().enumerate() {
        let v = match (k, params.get(j)) {
            (TermExpr::IntVar(l), Some((_, ty))) => interp
                .fiber(ty, &env)?
                .parse_label(l)
                .ok_or_else(|| InterpError::BadLabel { name: name.to_string(), label: l.clone() })?,
            _ => interp.eval(k, &env, &Env::new())?,
        };
        if let Some((x, _)) = params.get(j) {
            env.insert(x.clone(), v.clone());
        }
        out.push(v);
    }
    Ok(out)
}

fn type_model(interp: &Interp, name: &str, b: &ModelBinding) -> IResult<TypeModel> {
    match b {
        ModelBinding::Family(entries) => {
            let mut out = Vec::new();
            for (keys, inner) in entries {
                out.push((closed_keys(interp, name, keys)?, pointed_of(name, inner)?));
            }
            Ok(TypeModel::Keyed(out))
        }
        other => Ok(TypeModel::Set(pointed_of(name, other)?)),
    }
}

fn const_model(interp: &Interp, name: &str, b: &ModelBinding) -> IResult<ConstModel> {
    match b {
        ModelBinding::Label(l) => Ok(ConstModel::Label(l.clone())),
        ModelBinding::Family(entries) => {
            let mut out = Vec::new();
            for (keys, inner) in entries {
                let ModelBinding::Label(l) = inner else { return Err(InterpError::Unbound(name.to_string())) };
                out.push((closed_keys(interp, name, keys)?, l.clone()));
            }
            Ok(ConstModel::Keyed(out))
        }
        ModelBinding::Pointed { .. } => Err(InterpError::Unbound(name.to_string())),
    }
}

/// Denotation of a context: the index set `⟦Δ⟧` (points are tuples of
/// values of the intuitionistic variables) and the family `⟦Ξ⟧` over it.
/// A single linear hypothesis denotes its type itself, not a unary smash.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextDenotation {
    pub names: Vec<Name>,
    pub index: IndexSet,
    pub linear: PointedFam,
}

impl ContextDenotation {
    pub fn env_at(&self, i: usize) -> Env {
        self.names.iter().cloned().zip(self.index.points[i].coords().iter().cloned()).collect()
    }
}

pub struct Interp<'a> {
    pub sig: &'a Signature,
    pub model: &'a Model,
}

impl<'a> Interp<'a> {
    pub fn new(sig: &'a Signature, model: &'a Model) -> Interp<'a> {
        Interp { sig, model }
    }

    /// The index set of an intuitionistic context, by iterated comprehension.
    pub fn index_of(&self, int: &[(Name, TypeExpr)]) -> IResult<IndexSet> {
        let mut points = vec![Elem::point(Vec::new())];
        for (k, (_, ty)) in int.iter().enumerate() {
            let mut next = Vec::new();
            for p in &points {
                let env = env_from(&int[..k], p);
                for e in self.fiber(ty, &env)?.elements() {
                    next.push(p.extend(e));
                }
            }
            points = next;
        }
        Ok(IndexSet::new(points))
    }

    pub fn denote_context(&self, ctx: &DualContext) -> IResult<ContextDenotation> {
        let index = self.index_of(&ctx.int)?;
        let mut fibers = Vec::new();
        for p in &index.points {
            let env = env_from(&ctx.int, p);
            let parts = ctx.lin.iter().map(|(_, ty)| self.fiber(ty, &env)).collect::<IResult<Vec<_>>>()?;
            fibers.push(if parts.len() == 1 { parts[0].clone() } else { smash_all(&parts) });
        }
        let names = ctx.int.iter().map(|(x, _)| x.clone()).collect();
        Ok(ContextDenotation { names, linear: PointedFam::new(index.clone(), fibers), index })
    }

    /// `⟦A⟧` as a family over `⟦Δ⟧`.
    pub fn denote_type(&self, int: &[(Name, TypeExpr)], ty: &TypeExpr) -> IResult<PointedFam> {
        let index = self.index_of(int)?;
        let fibers = index.points.iter().map(|p| self.fiber(ty, &env_from(int, p))).collect::<IResult<Vec<_>>>()?;
        Ok(PointedFam::new(index, fibers))
    }

    /// `⟦t⟧ : ⟦Ξ⟧ → ⟦A⟧` over `⟦Δ⟧`.
    pub fn denote_term(&self, ctx: &DualContext, t: &TermExpr, ty: &TypeExpr) -> IResult<FamMorphism> {
        let c = self.denote_context(ctx)?;
        let mut maps = Vec::new();
        for (i, dom) in c.linear.fibers.iter().enumerate() {
            let ienv = c.env_at(i);
            let cod = self.fiber(ty, &ienv)?;
            let mut table = BTreeMap::new();
            for e in dom.non_base() {
                let lenv: Env = match (&ctx.lin[..], e) {
                    ([(x, _)], _) => Env::from([(x.clone(), e.clone())]),
                    (_, Elem::Smash(parts)) => ctx.lin.iter().map(|(x, _)| x.clone()).zip(parts.iter().cloned()).collect(),
                    _ => Env::new(),
                };
                table.insert(e.clone(), self.eval(t, &ienv, &lenv)?);
            }
            let map = PointedMap::new(dom.clone(), cod, table)
                .map_err(|e| InterpError::IllTyped { ty: ty.to_string(), detail: e.to_string() })?;
            maps.push(map);
        }
        Ok(FamMorphism { index: c.index, maps })
    }

    /// The element denoted by a closed term.
    pub fn eval_closed(&self, t: &TermExpr) -> IResult<Elem> {
        self.eval(t, &Env::new(), &Env::new())
    }

    /// The fiber of `ty` at the index point described by `env`.
    pub fn fiber(&self, ty: &TypeExpr, env: &Env) -> IResult<PointedSet> {
        use TypeExpr::*;
        Ok(match ty {
            Base { name, args } => {
                let vals = args.iter().map(|a| self.eval(a, env, &Env::new())).collect::<IResult<Vec<_>>>()?;
                self.base_fiber(name, &vals)?
            }
            Unit | Two => PointedSet::unit(),
            Top | Zero => PointedSet::point(),
            Tensor(a, b) => smash(&self.fiber(a, env)?, &self.fiber(b, env)?),
            Lolli(a, b) => hom_pointed(&self.fiber(a, env)?, &self.fiber(b, env)?),
            With(a, b) => product(&[self.fiber(a, env)?, self.fiber(b, env)?]),
            Plus(a, b) => wedge2(&self.fiber(a, env)?, &self.fiber(b, env)?),
            Bang(a) => bang(&self.fiber(a, env)?),
            Sigma { var, dom, body } | Pi { var, dom, body } => {
                let mut parts = Vec::new();
                for e in self.fiber(dom, env)?.elements() {
                    let mut env2 = env.clone();
                    env2.insert(var.clone(), e.clone());
                    parts.push((e, self.fiber(body, &env2)?));
                }
                if matches!(ty, Sigma { .. }) {
                    wedge(&parts)
                } else {
                    keyed_product(&parts)
                }
            }
            Id { lhs, rhs, .. } => id_fiber(&self.eval(lhs, env, &Env::new())?, &self.eval(rhs, env, &Env::new())?),
        })
    }

    fn base_fiber(&self, name: &str, args: &[Elem]) -> IResult<PointedSet> {
        match self.model.types.get(name) {
            None => Err(InterpError::Unbound(name.to_string())),
            Some(TypeModel::Set(x)) => Ok(x.clone()),
            Some(TypeModel::Keyed(entries)) => entries
                .iter()
                .find(|(k, _)| k.as_slice() == args)
                .map(|(_, x)| x.clone())
                .ok_or_else(|| InterpError::MissingKey { name: name.to_string(), args: show_args(args) }),
            Some(TypeModel::Hashed { seed, max }) => {
                let n = 1 + (hash_of(*seed, name, args) % *max as u64) as usize;
                Ok(PointedSet::sized(&name.to_lowercase(), n))
            }
        }
    }

    fn const_value(&self, name: &str, args: &[Elem]) -> IResult<Elem> {
        let decl = self.sig.const_decl(name).ok_or_else(|| InterpError::Unbound(name.to_string()))?;
        let env: Env = decl.params.iter().map(|(x, _)| x.clone()).zip(args.iter().cloned()).collect();
        let fiber = self.fiber(&decl.ty, &env)?;
        let label = match self.model.consts.get(name) {
            None => return Err(InterpError::Unbound(name.to_string())),
            Some(ConstModel::Label(l)) => l.clone(),
            Some(ConstModel::Keyed(entries)) => entries
                .iter()
                .find(|(k, _)| k.as_slice() == args)
                .map(|(_, l)| l.clone())
                .ok_or_else(|| InterpError::MissingKey { name: name.to_string(), args: show_args(args) })?,
            Some(ConstModel::Hashed { seed }) => {
                let elems: Vec<Elem> = fiber.elements().collect();
                return Ok(elems[(hash_of(*seed, name, args) % elems.len() as u64) as usize].clone());
            }
        };
        fiber.parse_label(&label).ok_or(InterpError::BadLabel { name: name.to_string(), label })
    }

    /// Evaluate `t` with intuitionistic values `ienv` and non-base linear
    /// values `lenv`.
    pub fn eval(&self, t: &TermExpr, ienv: &Env, lenv: &Env) -> IResult<Elem> {
        use TermExpr::*;
        let with = |env: &Env, x: &str, v: Elem| {
            let mut e = env.clone();
            e.insert(x.to_string(), v);
            e
        };
        Ok(match t {
            IntVar(x) => ienv.get(x).cloned().ok_or_else(|| InterpError::Free(x.clone()))?,
            LinVar(x) => lenv.get(x).cloned().ok_or_else(|| InterpError::Free(x.clone()))?,
            Const { name, args } => {
                if let Some(d) = self.sig.def(name) {
                    return self.eval_closed(&d.term);
                }
                let vals = args.iter().map(|a| self.eval(a, ienv, &Env::new())).collect::<IResult<Vec<_>>>()?;
                self.const_value(name, &vals)?
            }
            Star | Refl(_) | TT => Elem::unit(),
            UnitTop | FF | False { .. } => Elem::Star,
            TensorPair(a, b) => Elem::smash(vec![self.eval(a, ienv, lenv)?, self.eval(b, ienv, lenv)?]),
            LetStar { scrut, body, .. } => match self.eval(scrut, ienv, lenv)? {
                Elem::Star => Elem::Star,
                _ => self.eval(body, ienv, lenv)?,
            },
            LetTensor { scrut, left, right, body, .. } => match self.eval(scrut, ienv, lenv)? {
                Elem::Smash(p) if p.len() == 2 => {
                    let l2 = with(&with(lenv, left, p[0].clone()), right, p[1].clone());
                    self.eval(body, ienv, &l2)?
                }
                _ => Elem::Star,
            },
            Lam { var, ty, body } => {
                let dom = self.fiber(ty, ienv)?;
                let mut entries = Vec::new();
                for e in dom.non_base() {
                    entries.push((e.clone(), self.eval(body, ienv, &with(lenv, var, e.clone()))?));
                }
                Elem::map(entries)
            }
            App(f, a) | PiApp(f, a) => {
                let fv = self.eval(f, ienv, lenv)?;
                let av = if matches!(t, PiApp(..)) { self.eval(a, ienv, &Env::new())? } else { self.eval(a, ienv, lenv)? };
                fv.apply(&av)
            }
            BangIntro(a) => Elem::inject(self.eval(a, ienv, &Env::new())?, Elem::unit()),
            LetBang { scrut, var, body, .. } => match self.eval(scrut, ienv, lenv)? {
                Elem::In(tag, _) => self.eval(body, &with(ienv, var, *tag), lenv)?,
                _ => Elem::Star,
            },
            WithPair(a, b) => Elem::tuple(vec![self.eval(a, ienv, lenv)?, self.eval(b, ienv, lenv)?]),
            Fst(p) => self.eval(p, ienv, lenv)?.component(0),
            Snd(p) => self.eval(p, ienv, lenv)?.component(1),
            Inl { arg, .. } => Elem::inject(Elem::atom("inl"), self.eval(arg, ienv, lenv)?),
            Inr { arg, .. } => Elem::inject(Elem::atom("inr"), self.eval(arg, ienv, lenv)?),
            Case { scrut, left, on_left, right, on_right, .. } => match self.eval(scrut, ienv, lenv)? {
                Elem::In(tag, v) if *tag == Elem::atom("inl") => self.eval(on_left, ienv, &with(lenv, left, *v))?,
                Elem::In(_, v) => self.eval(on_right, ienv, &with(lenv, right, *v))?,
                _ => Elem::Star,
            },
            SigmaPair { fst, snd, .. } => Elem::inject(self.eval(fst, ienv, &Env::new())?, self.eval(snd, ienv, lenv)?),
            LetSigma { scrut, fst, snd, body, .. } => match self.eval(scrut, ienv, lenv)? {
                Elem::In(tag, v) => self.eval(body, &with(ienv, fst, *tag), &with(lenv, snd, *v))?,
                _ => Elem::Star,
            },
            PiLam { var, dom, body } => {
                let dom = self.fiber(dom, ienv)?;
                let mut entries = Vec::new();
                for e in dom.elements() {
                    entries.push((e.clone(), self.eval(body, &with(ienv, var, e.clone()), lenv)?));
                }
                Elem::map(entries)
            }
            LetId { lhs, rhs, proof, var, body, .. } => {
                let a = self.eval(lhs, ienv, &Env::new())?;
                let a2 = self.eval(rhs, ienv, &Env::new())?;
                match self.eval(proof, ienv, lenv)? {
                    Elem::Star => Elem::Star,
                    _ if a != a2 => Elem::Star,
                    _ => self.eval(body, &with(ienv, var, a), lenv)?,
                }
            }
            If { scrut, then_branch, else_branch, .. } => match self.eval(scrut, ienv, &Env::new())? {
                Elem::Star => self.eval(else_branch, ienv, lenv)?,
                _ => self.eval(then_branch, ienv, lenv)?,
            },
        })
    }

    /// Whether two terms of the same judgement denote the same morphism.
    pub fn same_denotation(&self, ctx: &DualContext, a: &TermExpr, b: &TermExpr, ty: &TypeExpr) -> IResult<bool> {
        Ok(self.denote_term(ctx, a, ty)?.same_action(&self.denote_term(ctx, b, ty)?))
    }
}

fn env_from(int: &[(Name, TypeExpr)], p: &Elem) -> Env {
    int.iter().map(|(x, _)| x.clone()).zip(p.coords().iter().cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Checker;
    use crate::parser::{parse_file, parse_term, parse_type};

    const SRC: &str = "type A. type B (x : A). const c : A.\n\
        model A := pointed { a0*, a1, a2 }.\n\
        model B := family { a0 => pointed { b0* }, a1 => pointed { b0*, b1 }, a2 => pointed { b0*, b1, b2 } }.\n\
        model c := a2.";

    fn setup() -> Signature {
        parse_file(SRC, None).unwrap().signature
    }

    fn ctx(sig: &Signature, int: &[(&str, &str)], lin: &[(&str, &str)]) -> DualContext {
        let mut names: Vec<Name> = Vec::new();
        let mut i = Vec::new();
        for (x, t) in int {
            i.push((x.to_string(), parse_type(t, sig, &names).unwrap()));
            names.push(x.to_string());
        }
        let l = lin.iter().map(|(x, t)| (x.to_string(), parse_type(t, sig, &names).unwrap())).collect();
        DualContext::new(i, l)
    }

    fn elab(sig: &Signature, c: &DualContext, t: &str, ty: &str) -> (TermExpr, TypeExpr) {
        let mut scope: Vec<(Name, VarKind)> = c.int.iter().map(|(x, _)| (x.clone(), VarKind::Int)).collect();
        scope.extend(c.lin.iter().map(|(x, _)| (x.clone(), VarKind::Lin)));
        let names: Vec<Name> = c.int.iter().map(|(x, _)| x.clone()).collect();
        let ty = parse_type(ty, sig, &names).unwrap();
        let t = parse_term(t, sig, &scope).unwrap().0;
        let checked = Checker::new(sig).check_term(c, &t, &ty).unwrap_or_else(|e| panic!("{e}"));
        (checked.term, ty)
    }

    #[test]
    fn empty_context_and_unit() {
        let sig = setup();
        let m = Model::from_signature(&sig).unwrap();
        let i = Interp::new(&sig, &m);
        let c = DualContext::empty();
        let d = i.denote_context(&c).unwrap();
        assert_eq!(d.index.len(), 1);
        assert_eq!(d.linear.fibers[0], PointedSet::unit());
        let star = i.denote_term(&c, &TermExpr::Star, &TypeExpr::Unit).unwrap();
        assert!(star.same_action(&FamMorphism::identity(&PointedFam::unit(&IndexSet::terminal()))));
    }

    #[test]
    fn intuitionistic_context_indexes_by_elements() {
        let sig = setup();
        let m = Model::from_signature(&sig).unwrap();
        let i = Interp::new(&sig, &m);
        assert_eq!(i.denote_context(&ctx(&sig, &[("x", "A")], &[])).unwrap().index.len(), 3);
        // Dependent extension: Σ_a |B(a)| = 1 + 2 + 3.
        assert_eq!(i.denote_context(&ctx(&sig, &[("x", "A"), ("y", "B(x)")], &[])).unwrap().index.len(), 6);
        let lin = i.denote_context(&ctx(&sig, &[], &[("x", "A")])).unwrap();
        assert_eq!(lin.linear.fibers[0].len(), 3);
    }

    #[test]
    fn identity_function_is_transposed_identity() {
        let sig = setup();
        let m = Model::from_signature(&sig).unwrap();
        let i = Interp::new(&sig, &m);
        let c = DualContext::empty();
        let (t, ty) = elab(&sig, &c, "lam (x : A) x", "A -o A");
        let v = i.eval_closed(&t).unwrap();
        let a = i.fiber(&TypeExpr::base("A"), &Env::new()).unwrap();
        assert_eq!(PointedMap::from_table_elem(&a, &a, &v), PointedMap::identity(&a));
        assert!(i.fiber(&ty, &Env::new()).unwrap().contains(&v));
    }

    #[test]
    fn bang_round_trip_through_sigma_is_identity() {
        let sig = setup();
        let m = Model::from_signature(&sig).unwrap();
        let i = Interp::new(&sig, &m);
        let c = ctx(&sig, &[], &[("y", "!A")]);
        let (t, ty) = elab(
            &sig,
            &c,
            "(lam (p : Sig (!x : !A) I) let p be !x (*) u in let u be * in bang x) (let y be !x in bang x (*) star)",
            "!A",
        );
        let d = i.denote_term(&c, &t, &ty).unwrap();
        assert_eq!(d.maps[0].dom.len(), 4);
        assert!(d.same_action(&FamMorphism::identity(&i.denote_type(&[], &ty).unwrap())));
    }

    #[test]
    fn constants_and_booleans() {
        let sig = setup();
        let m = Model::from_signature(&sig).unwrap();
        let i = Interp::new(&sig, &m);
        assert_eq!(i.eval_closed(&TermExpr::Const { name: "c".into(), args: vec![] }).unwrap(), Elem::atom("a2"));
        assert_ne!(i.eval_closed(&TermExpr::TT).unwrap(), i.eval_closed(&TermExpr::FF).unwrap());
        let fiber = i.fiber(&TypeExpr::Base { name: "B".into(), args: vec![TermExpr::Const { name: "c".into(), args: vec![] }] }, &Env::new());
        assert_eq!(fiber.unwrap().len(), 3);
    }

    #[test]
    fn random_models_are_deterministic() {
        let sig = setup();
        let m1 = Model::random(&sig, 7, 4);
        let m2 = Model::random(&sig, 7, 4);
        assert_eq!(m1, m2);
        let i = Interp::new(&sig, &m1);
        let n = i.fiber(&TypeExpr::base("A"), &Env::new()).unwrap().len();
        assert!((1..=4).contains(&n));
        assert!(i.eval_closed(&TermExpr::Const { name: "c".into(), args: vec![] }).is_ok());
    }
}
