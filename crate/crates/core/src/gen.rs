//! Random well-typed terms.
//!
//! The generator is type-directed and resource-exact: `term(ty, lin)` builds
//! a term of type `ty` that uses every linear hypothesis of `lin` exactly
//! once. Besides introductions it eliminates linear hypotheses and builds
//! redexes by eliminating freshly generated scrutinees, so normalisation has
//! β, η and commuting steps to perform. Every candidate is run through the
//! checker and only the elaborated survivors are returned.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::{Checker, DualContext};
use crate::parser::parse_file;
use crate::syntax::*;

/// Declarations the generator draws its base types and constants from.
pub const GEN_SIGNATURE: &str = "type A.\ntype B.\ntype C (x : 2).\nconst a : A.\nconst b : B.\nconst k (x : 2) : C(x).\n";

pub fn gen_signature() -> Signature {
    parse_file(GEN_SIGNATURE, None).expect("generator signature parses").signature
}

/// A checked judgement `Δ;Ξ ⊢ t : A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Judgement {
    pub ctx: DualContext,
    pub term: TermExpr,
    pub ty: TypeExpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub max_linear: usize,
    pub max_int: usize,
    pub depth: usize,
    /// Upper bound on the fiber size of any generated type, computed with
    /// four points per base type.
    pub max_card: u64,
    /// Upper bound on the size of the smashed linear context.
    pub max_ctx_card: u64,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig { max_linear: 4, max_int: 2, depth: 3, max_card: 64, max_ctx_card: 400 }
    }
}

const BASE_CARD: u64 = 4;

/// Fiber size bound of a type when every base type has at most four points.
pub fn card_bound(ty: &TypeExpr) -> u64 {
    card_bound_by(ty, &|_| BASE_CARD)
}

/// Fiber size bound of a type, given a bound for each base type.
pub fn card_bound_by(ty: &TypeExpr, base: &dyn Fn(&str) -> u64) -> u64 {
    use TypeExpr::*;
    let sat = |x: u64| x.min(1 << 40);
    let c = |t: &TypeExpr| card_bound_by(t, base);
    match ty {
        Base { name, .. } => base(name).max(1),
        Unit | Two => 2,
        Top | Zero => 1,
        Tensor(a, b) => sat((c(a) - 1) * (c(b) - 1) + 1),
        Lolli(a, b) => sat(c(b).saturating_pow((c(a) - 1).min(40) as u32)),
        With(a, b) => sat(c(a) * c(b)),
        Plus(a, b) => c(a) + c(b) - 1,
        Bang(a) => c(a) + 1,
        Sigma { dom, body, .. } => sat((c(dom) + 1) * (c(body) - 1) + 1),
        Pi { dom, body, .. } => sat(c(body).saturating_pow((c(dom) + 1).min(40) as u32)),
        Id { .. } => 2,
    }
}

fn bx<T>(t: T) -> Box<T> {
    Box::new(t)
}

type Zone = Vec<(Name, TypeExpr)>;

struct Gen<'s> {
    rng: ChaCha8Rng,
    cfg: GenConfig,
    sig: &'s Signature,
    int: Zone,
    fresh: usize,
    fuel: usize,
    /// Whether redexes may use types of the generator's own signature.
    invent: bool,
}

impl<'s> Gen<'s> {
    fn name(&mut self, base: &str) -> Name {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn two_term(&mut self) -> TermExpr {
        let mut opts = vec![TermExpr::TT, TermExpr::FF];
        for (x, t) in &self.int {
            if *t == TypeExpr::Two {
                opts.push(TermExpr::IntVar(x.clone()));
            }
        }
        opts.choose(&mut self.rng).unwrap().clone()
    }

    fn a_term(&mut self) -> TermExpr {
        let mut opts = vec![TermExpr::Const { name: "a".into(), args: vec![] }];
        for (x, t) in &self.int {
            if *t == TypeExpr::base("A") {
                opts.push(TermExpr::IntVar(x.clone()));
            }
        }
        opts.choose(&mut self.rng).unwrap().clone()
    }

    fn small_type(&mut self, depth: usize) -> TypeExpr {
        use TypeExpr::*;
        let leaf = depth == 0 || self.chance(0.35);
        if leaf {
            return match self.rng.gen_range(0..10) {
                0..=2 => TypeExpr::base("A"),
                3..=4 => TypeExpr::base("B"),
                5 => Unit,
                6 => Top,
                7 => Base { name: "C".into(), args: vec![self.two_term()] },
                8 => Two,
                _ => Unit,
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..11) {
            0 | 1 => Tensor(bx(self.small_type(d)), bx(self.small_type(d))),
            2 | 3 => Lolli(bx(self.small_type(d)), bx(self.small_type(d))),
            4 => With(bx(self.small_type(d)), bx(self.small_type(d))),
            5 => Plus(bx(self.small_type(d)), bx(self.small_type(d))),
            6 => Bang(bx(self.small_type(d))),
            7 => {
                let y = self.name("y");
                Sigma { var: y.clone(), dom: bx(Two), body: bx(Base { name: "C".into(), args: vec![TermExpr::IntVar(y)] }) }
            }
            8 => {
                let y = self.name("y");
                Pi { var: y.clone(), dom: bx(Two), body: bx(Base { name: "C".into(), args: vec![TermExpr::IntVar(y)] }) }
            }
            9 => Sigma { var: self.name("y"), dom: bx(TypeExpr::base("A")), body: bx(TypeExpr::base("B")) },
            _ => {
                let a = self.a_term();
                Id { dom: bx(TypeExpr::base("A")), lhs: bx(a.clone()), rhs: bx(a) }
            }
        }
    }

    fn bounded_type(&mut self, depth: usize, max: u64) -> TypeExpr {
        for _ in 0..20 {
            let t = self.small_type(depth);
            if card_bound(&t) <= max {
                return t;
            }
        }
        TypeExpr::base("A")
    }

    /// A goal shaped like the context: the tensor of the hypotheses' types,
    /// some of them replaced by random types.
    fn goal_from(&mut self, lin: &Zone) -> TypeExpr {
        let mut parts: Vec<TypeExpr> = lin.iter().map(|(_, t)| t.clone()).collect();
        parts.shuffle(&mut self.rng);
        for p in parts.iter_mut() {
            if self.chance(0.3) {
                *p = self.bounded_type(1, self.cfg.max_card);
            }
        }
        let ty = parts.into_iter().reduce(|l, r| TypeExpr::Tensor(bx(l), bx(r))).unwrap();
        if card_bound(&ty) <= self.cfg.max_ctx_card {
            ty
        } else {
            self.bounded_type(2, self.cfg.max_card)
        }
    }

    fn split(&mut self, lin: &Zone) -> (Zone, Zone) {
        let (mut l, mut r) = (Vec::new(), Vec::new());
        for h in lin {
            if self.chance(0.5) {
                l.push(h.clone());
            } else {
                r.push(h.clone());
            }
        }
        (l, r)
    }

    fn with_int<T>(&mut self, x: &str, ty: &TypeExpr, f: impl FnOnce(&mut Self) -> T) -> T {
        self.int.push((x.to_string(), ty.clone()));
        let out = f(self);
        self.int.pop();
        out
    }

    /// A closed-over-`Δ` term of `ty` built from intuitionistic variables
    /// and constants only.
    fn leaf(&mut self, ty: &TypeExpr) -> Option<TermExpr> {
        use TypeExpr::*;
        match ty {
            Base { name, args } => {
                let mut opts: Vec<TermExpr> =
                    self.int.iter().filter(|(_, t)| alpha_eq(t, ty)).map(|(x, _)| TermExpr::IntVar(x.clone())).collect();
                for c in &self.sig.consts {
                    match (c.params.as_slice(), &c.ty, args.as_slice()) {
                        ([], _, _) if alpha_eq(&c.ty, ty) => opts.push(TermExpr::Const { name: c.name.clone(), args: vec![] }),
                        ([(p, _)], Base { name: n, args: cargs }, [t]) if n == name && cargs.as_slice() == [TermExpr::IntVar(p.clone())] => {
                            opts.push(TermExpr::Const { name: c.name.clone(), args: vec![t.clone()] })
                        }
                        _ => {}
                    }
                }
                opts.choose(&mut self.rng).cloned()
            }
            Two => Some(self.two_term()),
            Unit => Some(TermExpr::Star),
            Top => Some(TermExpr::UnitTop),
            Id { lhs, rhs, .. } if alpha_eq(&**lhs, &**rhs) => Some(TermExpr::Refl(lhs.clone())),
            _ => None,
        }
    }

    fn term(&mut self, ty: &TypeExpr, lin: &Zone, depth: usize) -> Option<TermExpr> {
        if self.fuel == 0 {
            return None;
        }
        self.fuel -= 1;
        if let [(x, s)] = lin.as_slice() {
            if alpha_eq(s, ty) && (depth == 0 || self.chance(0.5)) {
                return Some(TermExpr::LinVar(x.clone()));
            }
        }
        if *ty == TypeExpr::Top && (depth == 0 || self.chance(0.5)) {
            return Some(TermExpr::UnitTop);
        }
        #[derive(Clone, Copy)]
        enum Move {
            Intro,
            Elim(usize),
            Redex,
            If,
        }
        let mut moves = vec![Move::Intro];
        for (i, (_, s)) in lin.iter().enumerate() {
            if eliminable(s) {
                moves.push(Move::Elim(i));
            }
        }
        if depth > 0 {
            if self.invent {
                moves.push(Move::Redex);
            }
            if self.chance(0.15) {
                moves.push(Move::If);
            }
        }
        moves.shuffle(&mut self.rng);
        for m in moves {
            let out = match m {
                Move::Intro => self.intro(ty, lin, depth),
                Move::Elim(i) => {
                    let mut rest = lin.clone();
                    let (x, s) = rest.remove(i);
                    self.elim(ty, &rest, TermExpr::LinVar(x), &s, depth)
                }
                Move::Redex => {
                    let s = self.bounded_type(1, self.cfg.max_card);
                    if !eliminable(&s) {
                        continue;
                    }
                    let (l1, l2) = self.split(lin);
                    match self.term(&s, &l1, depth - 1) {
                        Some(scrut) if self.chance(0.5) => self.elim(ty, &l2, scrut, &s, depth - 1),
                        Some(scrut) => {
                            let w = self.name("w");
                            let body = self.elim(ty, &l2, TermExpr::LinVar(w.clone()), &s, depth - 1)?;
                            Some(TermExpr::App(bx(TermExpr::Lam { var: w, ty: bx(s), body: bx(body) }), bx(scrut)))
                        }
                        None => None,
                    }
                }
                Move::If => {
                    let scrut = self.two_term();
                    let z = self.name("z");
                    let t = self.term(ty, lin, depth - 1)?;
                    let e = self.term(ty, lin, depth - 1)?;
                    Some(TermExpr::If { motive: Motive { var: z, ty: bx(ty.clone()) }, scrut: bx(scrut), then_branch: bx(t), else_branch: bx(e) })
                }
            };
            if out.is_some() {
                return out;
            }
        }
        None
    }

    fn intro(&mut self, ty: &TypeExpr, lin: &Zone, depth: usize) -> Option<TermExpr> {
        use TypeExpr::*;
        let d = depth.saturating_sub(1);
        match ty {
            Tensor(a, b) => {
                for _ in 0..3 {
                    let (l1, l2) = self.split(lin);
                    if let Some(l) = self.term(a, &l1, d) {
                        if let Some(r) = self.term(b, &l2, d) {
                            return Some(TermExpr::TensorPair(bx(l), bx(r)));
                        }
                    }
                }
                None
            }
            Lolli(a, b) => {
                let x = self.name("x");
                let mut l = lin.clone();
                l.push((x.clone(), (**a).clone()));
                Some(TermExpr::Lam { var: x, ty: a.clone(), body: bx(self.term(b, &l, d)?) })
            }
            With(a, b) => Some(TermExpr::WithPair(bx(self.term(a, lin, d)?), bx(self.term(b, lin, d)?))),
            Plus(a, b) => {
                if self.chance(0.5) {
                    Some(TermExpr::Inl { arg: bx(self.term(a, lin, d)?), ann: None })
                } else {
                    Some(TermExpr::Inr { arg: bx(self.term(b, lin, d)?), ann: None })
                }
            }
            Top => Some(TermExpr::UnitTop),
            Bang(a) if lin.is_empty() => Some(TermExpr::BangIntro(bx(self.term(a, lin, d)?))),
            Pi { var, dom, body } => {
                let y = self.name("i");
                let body = subst_int(&**body, var, &TermExpr::IntVar(y.clone()));
                let b = self.with_int(&y, dom, |g| g.term(&body, lin, d))?;
                Some(TermExpr::PiLam { var: y, dom: dom.clone(), body: bx(b) })
            }
            Sigma { var, dom, body } => {
                let a = self.term(dom, &Vec::new(), d)?;
                let body = subst_int(&**body, var, &a);
                let b = self.term(&body, lin, d)?;
                Some(TermExpr::TensorPair(bx(TermExpr::BangIntro(bx(a))), bx(b)))
            }
            _ if lin.is_empty() => self.leaf(ty),
            _ => None,
        }
    }

    /// Eliminate `scrut : s`, then continue at `ty` with `rest`.
    fn elim(&mut self, ty: &TypeExpr, rest: &Zone, scrut: TermExpr, s: &TypeExpr, depth: usize) -> Option<TermExpr> {
        use TypeExpr::*;
        let sc = bx(scrut.clone());
        let extend = |rest: &Zone, more: &[(Name, TypeExpr)]| {
            let mut l = rest.clone();
            l.extend(more.iter().cloned());
            l
        };
        match s {
            Unit => Some(TermExpr::LetStar { scrut: sc, body: bx(self.term(ty, rest, depth)?), ann: None }),
            Tensor(a, b) => {
                let (y, z) = (self.name("y"), self.name("z"));
                let l = extend(rest, &[(y.clone(), (**a).clone()), (z.clone(), (**b).clone())]);
                let body = self.term(ty, &l, depth)?;
                Some(TermExpr::LetTensor { scrut: sc, left: y, right: z, body: bx(body), ann: None })
            }
            Bang(a) => {
                let y = self.name("i");
                let body = self.with_int(&y, a, |g| g.term(ty, rest, depth))?;
                Some(TermExpr::LetBang { scrut: sc, var: y, body: bx(body), ann: None })
            }
            With(a, b) => {
                let z = self.name("z");
                let (proj, comp) = if self.chance(0.5) { (TermExpr::Fst(sc), a) } else { (TermExpr::Snd(sc), b) };
                let body = self.term(ty, &extend(rest, &[(z.clone(), (**comp).clone())]), depth)?;
                Some(subst_lin(&body, &z, &proj))
            }
            Lolli(a, b) => {
                let (l1, l2) = self.split(rest);
                let arg = self.term(a, &l1, depth)?;
                let z = self.name("z");
                let body = self.term(ty, &extend(&l2, &[(z.clone(), (**b).clone())]), depth)?;
                Some(subst_lin(&body, &z, &TermExpr::App(sc, bx(arg))))
            }
            Plus(a, b) => {
                let (y, z) = (self.name("y"), self.name("z"));
                let on_left = self.term(ty, &extend(rest, &[(y.clone(), (**a).clone())]), depth)?;
                let on_right = self.term(ty, &extend(rest, &[(z.clone(), (**b).clone())]), depth)?;
                Some(TermExpr::Case { scrut: sc, left: y, on_left: bx(on_left), right: z, on_right: bx(on_right), ann: None })
            }
            Zero => Some(TermExpr::False { scrut: sc, ann: None }),
            Sigma { var, dom, body } => {
                let (y, z) = (self.name("i"), self.name("z"));
                let bt = subst_int(&**body, var, &TermExpr::IntVar(y.clone()));
                let l = extend(rest, &[(z.clone(), bt)]);
                let out = self.with_int(&y, dom, |g| g.term(ty, &l, depth))?;
                Some(TermExpr::LetSigma { scrut: sc, fst: y, snd: z, body: bx(out), ann: None })
            }
            Pi { var, dom, body } => {
                let a = self.term(dom, &Vec::new(), depth)?;
                let z = self.name("z");
                let bt = subst_int(&**body, var, &a);
                let out = self.term(ty, &extend(rest, &[(z.clone(), bt)]), depth)?;
                Some(subst_lin(&out, &z, &TermExpr::PiApp(sc, bx(a))))
            }
            _ => None,
        }
    }
}

fn eliminable(s: &TypeExpr) -> bool {
    use TypeExpr::*;
    matches!(s, Unit | Tensor(..) | Bang(_) | With(..) | Lolli(..) | Plus(..) | Zero | Sigma { .. } | Pi { .. })
}

/// A random term of `ty` in `int; lin` using each linear hypothesis exactly
/// once, or `None` if none was found within the generator's budget. The
/// result is not checked.
pub fn inhabit(sig: &Signature, seed: u64, int: &[(Name, TypeExpr)], lin: &[(Name, TypeExpr)], ty: &TypeExpr, depth: usize) -> Option<TermExpr> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg: GenConfig::default(), sig, int: int.to_vec(), fresh: 0, fuel: 200, invent: false };
    // Fresh names must not collide with the context.
    g.fresh = 10_000 + int.len() + lin.len();
    g.term(ty, &lin.to_vec(), depth)
}

/// Up to `n` further checked terms of the same judgement as `j`, with
/// redexes drawn from the generator's own signature.
pub fn siblings(sig: &Signature, seed: u64, j: &Judgement, n: usize, depth: usize) -> Vec<Judgement> {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg: GenConfig::default(), sig, int: j.ctx.int.clone(), fresh: 0, fuel: 0, invent: true };
    g.fresh = 1_000_000;
    let checker = Checker::new(sig);
    let mut out = Vec::new();
    for _ in 0..n * 4 {
        if out.len() == n {
            break;
        }
        g.fuel = 300;
        if let Some(t) = g.term(&j.ty, &j.ctx.lin, depth) {
            if let Ok(c) = checker.check_term(&j.ctx, &t, &j.ty) {
                out.push(Judgement { ctx: j.ctx.clone(), term: c.term, ty: j.ty.clone() });
            }
        }
    }
    out
}

/// Statistics of a generation run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GenStats {
    pub attempts: usize,
    pub built: usize,
    pub rejected: usize,
    /// The first few candidates the checker rejected, with the reason.
    pub rejections: Vec<String>,
}

/// Generate `count` checked terms deterministically from `seed`.
pub fn generate(sig: &Signature, seed: u64, count: usize, cfg: GenConfig) -> (Vec<Judgement>, GenStats) {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg, sig, int: Vec::new(), fresh: 0, fuel: 0, invent: true };
    let checker = Checker::new(g.sig);
    let mut out = Vec::new();
    let mut stats = GenStats::default();
    // Terms are spread evenly over the number of linear hypotheses.
    let mut per_lin = vec![0usize; cfg.max_linear + 1];
    while out.len() < count && stats.attempts < count * 100 {
        stats.attempts += 1;
        g.int.clear();
        let n_int = g.rng.gen_range(0..=cfg.max_int);
        for _ in 0..n_int {
            let x = g.name("i");
            let t = if g.chance(0.5) { TypeExpr::base("A") } else { TypeExpr::Two };
            g.int.push((x, t));
        }
        let n_lin = (0..per_lin.len()).min_by_key(|&i| per_lin[i]).unwrap();
        let mut lin = Vec::new();
        let mut ctx_card: u64 = 1;
        for _ in 0..n_lin {
            let t = g.bounded_type(2, cfg.max_card);
            ctx_card = ctx_card.saturating_mul(card_bound(&t).max(2) - 1);
            lin.push((g.name("x"), t));
        }
        if ctx_card > cfg.max_ctx_card {
            continue;
        }
        let ty = if lin.is_empty() || g.chance(0.4) { g.bounded_type(2, cfg.max_card) } else { g.goal_from(&lin) };
        g.fuel = 400;
        let Some(t) = g.term(&ty, &lin, cfg.depth) else { continue };
        stats.built += 1;
        let ctx = DualContext::new(g.int.clone(), lin);
        match checker.check_term(&ctx, &t, &ty) {
            Ok(c) => {
                per_lin[n_lin] += 1;
                out.push(Judgement { ctx, term: c.term, ty });
            }
            Err(e) => {
                stats.rejected += 1;
                if stats.rejections.len() < 8 {
                    stats.rejections.push(format!("{} |- {} : {}: {e}", ctx, t, ty));
                }
            }
        }
    }
    (out, stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generates_checked_terms_with_few_linear_variables() {
        let sig = gen_signature();
        let (terms, stats) = generate(&sig, 7, 100, GenConfig::default());
        assert_eq!(terms.len(), 100, "{stats:?}");
        assert!(terms.iter().all(|g| g.ctx.lin.len() <= 4));
        assert!(terms.iter().any(|g| g.ctx.lin.len() >= 3));
        let checker = Checker::new(&sig);
        for g in &terms {
            checker.check_term(&g.ctx, &g.term, &g.ty).unwrap();
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let sig = gen_signature();
        assert_eq!(generate(&sig, 3, 20, GenConfig::default()).0, generate(&sig, 3, 20, GenConfig::default()).0);
    }

    #[test]
    fn card_bounds() {
        let sig = gen_signature();
        let ty = crate::parser::parse_type("A -o B", &sig, &[]).unwrap();
        assert_eq!(card_bound(&ty), 64);
        let ty = crate::parser::parse_type("Sig (!x : !A) B", &sig, &[]).unwrap();
        assert_eq!(card_bound(&ty), 16);
    }
}
