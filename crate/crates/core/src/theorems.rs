//! Executable versions of the structural results: witness terms that
//! typecheck with judgementally equal round trips, and explicit natural
//! bijections in Fam(Set★).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::checker::{Checker, DualContext};
use crate::equality::Equality;
use crate::fam::*;
use crate::interp::{Interp, Model};
use crate::model::{all_maps, families, index_sets, sized_family};
use crate::parser::{parse_file, parse_term, parse_type};
use crate::report::{Report, ReportItem};
use crate::syntax::*;

/// The signature the syntactic witnesses live in.
pub const SUITE_SIGNATURE: &str = "\
type A.
type B.
type C (x : 2).
";

pub fn suite_signature() -> Signature {
    parse_file(SUITE_SIGNATURE, None).expect("suite signature parses").signature
}

type Check = Result<String, String>;

/// Check that `fwd` and `bwd` are mutually inverse basepoint-preserving
/// maps between `x` and `y`, elementwise.
pub fn bijection(x: &PointedSet, y: &PointedSet, fwd: impl Fn(&Elem) -> Elem, bwd: impl Fn(&Elem) -> Elem) -> Result<(), String> {
    let f = PointedMap::from_fn(x, y, fwd).map_err(|e| format!("forward map ill-defined: {e}"))?;
    let g = PointedMap::from_fn(y, x, bwd).map_err(|e| format!("backward map ill-defined: {e}"))?;
    if g.after(&f) != PointedMap::identity(x) {
        return Err(format!("backward ∘ forward is not the identity on {x}"));
    }
    if f.after(&g) != PointedMap::identity(y) {
        return Err(format!("forward ∘ backward is not the identity on {y}"));
    }
    Ok(())
}

fn fam_bijection(
    x: &PointedFam,
    y: &PointedFam,
    fwd: impl Fn(&Elem) -> Elem + Copy,
    bwd: impl Fn(&Elem) -> Elem + Copy,
) -> Result<FamMorphism, String> {
    if x.index != y.index {
        return Err("index sets differ".into());
    }
    let mut maps = Vec::new();
    for (i, (a, b)) in x.fibers.iter().zip(&y.fibers).enumerate() {
        bijection(a, b, fwd, bwd).map_err(|e| format!("at {}: {e}", x.index.points[i]))?;
        maps.push(PointedMap::from_fn(a, b, fwd).expect("checked above"));
    }
    Ok(FamMorphism { index: x.index.clone(), maps })
}

/// Naturality of a uniformly defined bijection: building it over `S` then
/// reindexing along `f` gives the one built over `S'`.
fn natural(
    build: impl Fn(&IndexSet) -> Result<FamMorphism, String>,
    max_index: usize,
) -> Result<usize, String> {
    let mut n = 0;
    for f in all_maps(max_index) {
        let over = build(&f.cod)?.reindex(&f);
        if !over.same_action(&build(&f.dom)?) {
            return Err(format!("not natural along {:?}", f.image));
        }
        n += 1;
    }
    Ok(n)
}

fn inj_unit(e: &Elem) -> Elem {
    Elem::inject(e.clone(), Elem::unit())
}

/// The tag of a `!`-element `In(e, ·)`.
fn bang_tag(e: &Elem) -> Option<Elem> {
    match e {
        Elem::In(t, _) => Some((**t).clone()),
        _ => None,
    }
}

fn pi_to_lolli(e: &Elem) -> Elem {
    match e {
        Elem::Map(t) => Elem::map(t.iter().map(|(k, v)| (inj_unit(k), v.clone()))),
        _ => Elem::Star,
    }
}

fn lolli_to_pi(e: &Elem) -> Elem {
    match e {
        Elem::Map(t) => Elem::map(t.iter().filter_map(|(k, v)| bang_tag(k).map(|k| (k, v.clone())))),
        _ => Elem::Star,
    }
}

fn sigma_to_tensor(e: &Elem) -> Elem {
    match e {
        Elem::In(t, v) => Elem::smash(vec![inj_unit(t), (**v).clone()]),
        _ => Elem::Star,
    }
}

fn tensor_to_sigma(e: &Elem) -> Elem {
    match e {
        Elem::Smash(p) if p.len() == 2 => match bang_tag(&p[0]) {
            Some(t) => Elem::inject(t, p[1].clone()),
            None => Elem::Star,
        },
        _ => Elem::Star,
    }
}

/// Semantic half of `Π_{!x:!A}B ≅ !A ⊸ B` and `Σ_{!x:!A}B ≅ !A ⊗ B` for
/// constant families.
pub fn theorem2_semantic(a: usize, b: usize, max_index: usize) -> Check {
    let sa = PointedSet::sized("a", a);
    let sb = PointedSet::sized("b", b);
    let pi_side = |s: &IndexSet| {
        let fa = PointedFam::constant(s, &sa);
        let fb = PointedFam::constant(&comprehension_index(&fa), &sb);
        (pi_fam(&fa, &fb), bang_fam(&fa).hom(&PointedFam::constant(s, &sb)))
    };
    let sigma_side = |s: &IndexSet| {
        let fa = PointedFam::constant(s, &sa);
        let fb = PointedFam::constant(&comprehension_index(&fa), &sb);
        (sigma_fam(&fa, &fb), bang_fam(&fa).tensor(&PointedFam::constant(s, &sb)))
    };
    let n1 = natural(|s| { let (x, y) = pi_side(s); fam_bijection(&x, &y, pi_to_lolli, lolli_to_pi) }, max_index)?;
    let n2 = natural(|s| { let (x, y) = sigma_side(s); fam_bijection(&x, &y, sigma_to_tensor, tensor_to_sigma) }, max_index)?;
    let (p, l) = pi_side(&IndexSet::terminal());
    let (s, t) = sigma_side(&IndexSet::terminal());
    Ok(format!(
        "|A|={a}, |B|={b}: |Π|={} = |!A⊸B|={}, |Σ|={} = |!A⊗B|={}; natural along {} maps",
        p.fibers[0].len(),
        l.fibers[0].len(),
        s.fibers[0].len(),
        t.fibers[0].len(),
        n1.min(n2)
    ))
}

/// A syntactic witness: a closed term, its type, and whether it checks.
pub struct Witness {
    pub name: &'static str,
    pub term: &'static str,
    pub ty: &'static str,
}

pub const THEOREM2_WITNESSES: [Witness; 4] = [
    Witness { name: "pi-to-lolli", term: "lam (f : Pi (!x : !A) B) lam (y : !A) let y be !x in f !x", ty: "(Pi (!x : !A) B) -o !A -o B" },
    Witness { name: "lolli-to-pi", term: "lam (g : !A -o B) lam (!x : !A) g (bang x)", ty: "(!A -o B) -o Pi (!x : !A) B" },
    Witness { name: "sigma-to-tensor", term: "lam (p : Sig (!x : !A) B) let p be !x (*) b in bang x (*) b", ty: "(Sig (!x : !A) B) -o !A * B" },
    Witness {
        name: "tensor-to-sigma",
        term: "lam (q : !A * B) let q be u (*) b in let u be !x in bang x (*) b",
        ty: "(!A * B) -o Sig (!x : !A) B",
    },
];

pub const THEOREM3_WITNESSES: [Witness; 3] = [
    Witness { name: "bang-intro", term: "lam (!x : !A) bang x (*) star", ty: "Pi (!x : !A) Sig (!y : !A) I" },
    Witness {
        name: "bang-elim",
        term: "lam (t : Sig (!x : !A) I) let t be !x (*) u in let u be * in bang x",
        ty: "(Sig (!x : !A) I) -o !A",
    },
    Witness { name: "bang-to-sigma", term: "lam (y : !A) let y be !x in bang x (*) star", ty: "!A -o Sig (!x : !A) I" },
];

pub const THEOREM4_WITNESSES: [Witness; 4] = [
    Witness { name: "pi-to-with", term: "lam (f : Pi (!x : !2) C(x)) <f !tt, f !ff>", ty: "(Pi (!x : !2) C(x)) -o C(tt) & C(ff)" },
    Witness {
        name: "with-to-pi",
        term: "lam (p : C(tt) & C(ff)) lam (!x : !2) if [y . C(y)] x then fst p else snd p",
        ty: "(C(tt) & C(ff)) -o Pi (!x : !2) C(x)",
    },
    Witness {
        name: "sigma-to-plus",
        term: "lam (s : Sig (!x : !2) C(x)) let s be !x (*) c in (if [y . C(y) -o C(tt) + C(ff)] x then lam (d : C(tt)) inl d else lam (d : C(ff)) inr d) c",
        ty: "(Sig (!x : !2) C(x)) -o C(tt) + C(ff)",
    },
    Witness {
        name: "plus-to-sigma",
        term: "lam (c : C(tt) + C(ff)) case c of inl d -> bang tt (*) d || inr d -> bang ff (*) d",
        ty: "(C(tt) + C(ff)) -o Sig (!x : !2) C(x)",
    },
];

/// Parse and check a closed witness; the elaborated term and its type.
pub fn check_witness(sig: &Signature, w: &Witness) -> Result<(TermExpr, TypeExpr), String> {
    let ty = parse_type(w.ty, sig, &[]).map_err(|e| format!("{}: {e}", w.name))?;
    let t = parse_term(w.term, sig, &[]).map_err(|e| format!("{}: {e}", w.name))?.0;
    let c = Checker::new(sig).check_term(&DualContext::empty(), &t, &ty).map_err(|e| format!("{}: {e}", w.name))?;
    Ok((c.term, ty))
}

fn compose(g: &TermExpr, f: &TermExpr, var: &str, dom: &TypeExpr) -> TermExpr {
    let x = TermExpr::lin(var);
    TermExpr::Lam {
        var: var.into(),
        ty: Box::new(dom.clone()),
        body: Box::new(TermExpr::App(Box::new(g.clone()), Box::new(TermExpr::App(Box::new(f.clone()), Box::new(x))))),
    }
}

fn identity(var: &str, dom: &TypeExpr) -> TermExpr {
    TermExpr::Lam { var: var.into(), ty: Box::new(dom.clone()), body: Box::new(TermExpr::lin(var)) }
}

fn dom_of(ty: &TypeExpr) -> TypeExpr {
    match ty {
        TypeExpr::Lolli(a, _) => (**a).clone(),
        other => other.clone(),
    }
}

/// `g ∘ f ≡ id` for closed witnesses `f : X ⊸ Y`, `g : Y ⊸ X`.
pub fn round_trip(sig: &Signature, f: &(TermExpr, TypeExpr), g: &(TermExpr, TypeExpr)) -> Result<(), String> {
    let dom = dom_of(&f.1);
    let lhs = compose(&g.0, &f.0, "w", &dom);
    let rhs = identity("w", &dom);
    let ty = TypeExpr::Lolli(Box::new(dom.clone()), Box::new(dom));
    // The composite must itself typecheck.
    Checker::new(sig).check_term(&DualContext::empty(), &lhs, &ty).map_err(|e| format!("composite ill-typed: {e}"))?;
    match Equality::new(sig).judg_equal(&lhs, &rhs, Some(&ty)) {
        Ok(true) => Ok(()),
        Ok(false) => Err(format!("round trip not proved: {} ≢ {}", lhs, rhs)),
        Err(e) => Err(format!("round trip: {e}")),
    }
}

fn witnesses(sig: &Signature, ws: &[Witness]) -> Result<Vec<(TermExpr, TypeExpr)>, String> {
    ws.iter().map(|w| check_witness(sig, w)).collect()
}

pub fn theorem2_syntactic(sig: &Signature) -> Check {
    let w = witnesses(sig, &THEOREM2_WITNESSES)?;
    round_trip(sig, &w[0], &w[1])?;
    round_trip(sig, &w[1], &w[0])?;
    round_trip(sig, &w[2], &w[3])?;
    round_trip(sig, &w[3], &w[2])?;
    Ok("4 witnesses typecheck; 4 round trips proved".into())
}

/// The !-rule obligations for `Σ_{!x:!A} I`, as checkable instances.
pub fn theorem3_syntactic(sig: &Signature) -> Check {
    let w = witnesses(sig, &THEOREM3_WITNESSES)?;
    let eq = Equality::new(sig);
    let sig_i = parse_type("Sig (!x : !A) I", sig, &[]).map_err(|e| e.to_string())?;
    let bang_a = parse_type("!A", sig, &[]).map_err(|e| e.to_string())?;
    let a = parse_type("A", sig, &[]).map_err(|e| e.to_string())?;
    let k = Checker::new(sig);
    // -C: let (bang a ⊗ *) be !x ⊗ u in let u be * in bang x ≡ bang a. The
    // pair is passed as an argument so that it is checked against Σ.
    let ctx_c = DualContext::new(vec![("a".into(), a)], vec![]);
    let scope_c = [("a".to_string(), VarKind::Int)];
    let redex = parse_term("(lam (t : Sig (!x : !A) I) let t be !x (*) u in let u be * in bang x) (bang a (*) star)", sig, &scope_c).map_err(|e| e.to_string())?.0;
    let redex = k.check_term(&ctx_c, &redex, &bang_a).map_err(|e| format!("-C instance: {e}"))?.term;
    if !eq.judg_equal(&redex, &TermExpr::BangIntro(Box::new(TermExpr::int("a"))), Some(&bang_a)).map_err(|e| e.to_string())? {
        return Err("-C instance not proved".into());
    }
    // -U: let t be !x ⊗ u in let u be * in (bang x ⊗ star) ≡ t.
    let ctx_u = DualContext::new(vec![], vec![("t".into(), sig_i.clone())]);
    let scope_u = [("t".to_string(), VarKind::Lin)];
    let eta = parse_term("let t be !x (*) u in let u be * in bang x (*) star", sig, &scope_u).map_err(|e| e.to_string())?.0;
    let eta = k.check_term(&ctx_u, &eta, &sig_i).map_err(|e| format!("-U instance: {e}"))?.term;
    if !eq.judg_equal(&eta, &TermExpr::lin("t"), Some(&sig_i)).map_err(|e| e.to_string())? {
        return Err("-U instance not proved".into());
    }
    round_trip(sig, &w[2], &w[1])?;
    round_trip(sig, &w[1], &w[2])?;
    Ok("-I, -E witnesses typecheck; -C and -U instances proved; both round trips with !A proved".into())
}

/// `⟦Σ_{!x:!A} I⟧ ≅ ⟦!A⟧` for every family with fibers ≤ `max_fiber` over
/// index sets ≤ `max_index`.
pub fn theorem3_semantic(max_index: usize, max_fiber: usize) -> Check {
    let mut n = 0;
    for s in index_sets(max_index) {
        for a in families(&s, max_fiber) {
            let i = PointedFam::unit(&comprehension_index(&a));
            let sig = sigma_fam(&a, &i);
            let bang = bang_fam(&a);
            if !sig.same_elements(&bang) {
                return Err(format!("bangFam ≠ sigmaFam(A, I) for fiber sizes {:?}", a.fibers.iter().map(PointedSet::len).collect::<Vec<_>>()));
            }
            fam_bijection(&sig, &bang, |e| e.clone(), |e| e.clone())?;
            n += 1;
        }
    }
    Ok(format!("{n} families: Σ_{{!A}}I = !A as families, identity bijection verified"))
}

/// Seely: `!⊤ ≅ I` and `!(A & B) ≅ !A ⊗ !B`.
pub fn seely(max_fiber: usize) -> Check {
    let top = PointedSet::point();
    bijection(&bang(&top), &PointedSet::unit(), |_| Elem::unit(), |_| inj_unit(&Elem::Star))?;
    let mut sizes = Vec::new();
    for a in 1..=max_fiber {
        for b in 1..=max_fiber {
            let (sa, sb) = (PointedSet::sized("a", a), PointedSet::sized("b", b));
            let lhs = bang(&product(&[sa.clone(), sb.clone()]));
            let rhs = smash(&bang(&sa), &bang(&sb));
            bijection(
                &lhs,
                &rhs,
                |e| match bang_tag(e) {
                    Some(t) => Elem::smash(vec![inj_unit(&t.component(0)), inj_unit(&t.component(1))]),
                    None => Elem::Star,
                },
                |e| match e {
                    Elem::Smash(p) => match (bang_tag(&p[0]), bang_tag(&p[1])) {
                        (Some(x), Some(y)) => inj_unit(&Elem::tuple(vec![x, y])),
                        _ => Elem::Star,
                    },
                    _ => Elem::Star,
                },
            )
            .map_err(|e| format!("|A|={a}, |B|={b}: {e}"))?;
            if a == 2 && b == 3 {
                sizes.push(format!("|A|=2,|B|=3: {} = {}", lhs.len(), rhs.len()));
            }
        }
    }
    Ok(format!("!⊤ ≅ I; !(A&B) ≅ !A⊗!B for fibers ≤ {max_fiber} ({})", sizes.join("")))
}

/// `Π_{!x:!2}A ≅ A[tt] & A[ff]` and `Σ_{!x:!2}A ≅ A[tt] ⊕ A[ff]` for every
/// family over `2` with fibers ≤ `max_fiber`.
pub fn theorem4_semantic(max_fiber: usize) -> Check {
    let two = two_fam(&IndexSet::terminal());
    let idx = comprehension_index(&two);
    let tt = Elem::unit();
    let mut n = 0;
    let mut example = String::new();
    for fam in families(&idx, max_fiber) {
        let at = |e: &Elem| fam.fiber_at(&Elem::point(vec![e.clone()])).expect("index of 2").clone();
        let (a_tt, a_ff) = (at(&tt), at(&Elem::Star));
        let pi = pi_fam(&two, &fam).fibers[0].clone();
        let with = product(&[a_tt.clone(), a_ff.clone()]);
        let tt2 = tt.clone();
        bijection(
            &pi,
            &with,
            |e| Elem::tuple(vec![e.apply(&tt2), e.apply(&Elem::Star)]),
            |e| Elem::map([(Elem::unit(), e.component(0)), (Elem::Star, e.component(1))]),
        )?;
        let sigma = sigma_fam(&two, &fam).fibers[0].clone();
        let plus = wedge2(&a_tt, &a_ff);
        bijection(
            &sigma,
            &plus,
            |e| match e {
                Elem::In(t, v) => Elem::inject(Elem::atom(if t.is_star() { "inr" } else { "inl" }), (**v).clone()),
                _ => Elem::Star,
            },
            |e| match e {
                Elem::In(t, v) => Elem::inject(if **t == Elem::atom("inl") { Elem::unit() } else { Elem::Star }, (**v).clone()),
                _ => Elem::Star,
            },
        )?;
        if a_tt.len() == 2 && a_ff.len() == 3 {
            example = format!("; |A[tt]|=2,|A[ff]|=3: Π {} = & {}, Σ {} = ⊕ {}", pi.len(), with.len(), sigma.len(), plus.len());
        }
        n += 1;
    }
    Ok(format!("{n} families over 2{example}"))
}

pub fn theorem4_syntactic(sig: &Signature) -> Check {
    let w = witnesses(sig, &THEOREM4_WITNESSES)?;
    round_trip(sig, &w[0], &w[1])?;
    round_trip(sig, &w[1], &w[0])?;
    Ok("4 witnesses typecheck; Π/& round trips proved".into())
}

/// `tt ≢ ff`: not proved by the equality engine, and separated in the model.
pub fn consistency(sig: &Signature) -> Check {
    let eq = Equality::new(sig);
    let two = TypeExpr::Two;
    if eq.judg_equal(&TermExpr::TT, &TermExpr::FF, Some(&two)).map_err(|e| e.to_string())? {
        return Err("the equality engine proved tt ≡ ff".into());
    }
    let m = Model::random(sig, 0, 1);
    let i = Interp::new(sig, &m);
    let ctx = DualContext::empty();
    let dtt = i.denote_term(&ctx, &TermExpr::TT, &two).map_err(|e| e.to_string())?;
    let dff = i.denote_term(&ctx, &TermExpr::FF, &two).map_err(|e| e.to_string())?;
    if dtt.same_action(&dff) {
        return Err("⟦tt⟧ = ⟦ff⟧".into());
    }
    let x = DualContext::new(vec![("x".into(), two.clone())], vec![]);
    if !eq.judg_equal(&TermExpr::int("x"), &TermExpr::int("x"), Some(&two)).map_err(|e| e.to_string())? {
        return Err("x ≢ x".into());
    }
    // A deliberately wrong equation is rejected by the soundness check.
    if i.same_denotation(&x, &TermExpr::TT, &TermExpr::int("x"), &two).map_err(|e| e.to_string())? {
        return Err("soundness check accepted tt ≡ x".into());
    }
    Ok("tt ≡ ff not proved; ⟦tt⟧ = id_I ≠ 0 = ⟦ff⟧; wrong equation tt ≡ x caught by the model".into())
}

/// The model is neither a degenerate DTT model nor a DILL model.
pub fn separation(max_fiber: usize, seed: u64) -> Check {
    for n in 1..=max_fiber {
        let a = PointedSet::sized("a", n);
        if bang(&a).len() != n + 1 {
            return Err(format!("|!A| ≠ |A|+1 at |A|={n}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = IndexSet::sized(2);
    let lo = rng.gen_range(1..max_fiber.max(2));
    let fam = sized_family(&s, &[lo, lo + 1]);
    if fam.fibers[0].len() == fam.fibers[1].len() {
        return Err("no non-constant family".into());
    }
    Ok(format!("|!A| = |A|+1 ≠ |A| for 1 ≤ |A| ≤ {max_fiber}; non-constant family with fibers {lo}, {}", lo + 1))
}

/// The whole suite as a report.
pub fn run_suite(seed: u64) -> Report {
    let sig = suite_signature();
    let mut r = Report::new("theorems", json!({ "seed": seed }));
    r.push(ReportItem::from_result("theorem2-syntactic", theorem2_syntactic(&sig)));
    for a in 1..=4 {
        for b in 1..=4 {
            r.push(ReportItem::from_result(format!("theorem2-semantic-{a}-{b}"), theorem2_semantic(a, b, 3)));
        }
    }
    r.push(ReportItem::from_result("theorem3-syntactic", theorem3_syntactic(&sig)));
    r.push(ReportItem::from_result("theorem3-semantic", theorem3_semantic(3, 4)));
    r.push(ReportItem::from_result("seely", seely(4)));
    r.push(ReportItem::from_result("theorem4-syntactic", theorem4_syntactic(&sig)));
    r.push(ReportItem::from_result("theorem4-semantic", theorem4_semantic(4)));
    r.push(ReportItem::from_result("consistency", consistency(&sig)));
    r.push(ReportItem::from_result("separation", separation(4, seed)));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem2_counts() {
        let d = theorem2_semantic(3, 4, 2).unwrap();
        assert!(d.contains("|Π|=64 = |!A⊸B|=64"), "{d}");
        assert!(d.contains("|Σ|=10 = |!A⊗B|=10"), "{d}");
        assert!(theorem2_semantic(1, 3, 1).is_ok());
    }

    #[test]
    fn theorem2_witnesses_and_round_trips() {
        theorem2_syntactic(&suite_signature()).unwrap();
    }

    #[test]
    fn theorem3_both_halves() {
        theorem3_syntactic(&suite_signature()).unwrap();
        theorem3_semantic(2, 3).unwrap();
    }

    #[test]
    fn seely_two_three_is_seven() {
        let d = seely(3).unwrap();
        assert!(d.contains("7 = 7"), "{d}");
    }

    #[test]
    fn theorem4_counts() {
        let d = theorem4_semantic(3).unwrap();
        assert!(d.contains("Π 6 = & 6, Σ 4 = ⊕ 4"), "{d}");
        theorem4_syntactic(&suite_signature()).unwrap();
    }

    #[test]
    fn consistency_and_separation() {
        consistency(&suite_signature()).unwrap();
        separation(3, 1).unwrap();
    }

    #[test]
    fn broken_bijection_is_rejected() {
        let x = PointedSet::sized("x", 3);
        assert!(bijection(&x, &x, |e| e.clone(), |_| Elem::Star).is_err());
    }
}
