//! Strict indexed symmetric monoidal categories with comprehension, and
//! brute-force verifiers for the conditions that support the type formers.
//!
//! A [`ModelInstance`] exposes the structure over finite index sets. The
//! verifiers enumerate every case within [`Bounds`] (dependent families
//! over comprehensions are sampled, see [`Bounds::samples`]) and report the
//! first counterexample as a [`Witness`] that [`replay`] can re-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fam::*;

/// The structure of a strict indexed SMC with comprehension and the
/// type-forming operations, over finite index sets.
pub trait ModelInstance {
    fn describe(&self) -> String;
    fn unit(&self, s: &IndexSet) -> PointedFam {
        PointedFam::unit(s)
    }
    fn tensor(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        a.tensor(b)
    }
    fn reindex(&self, f: &IndexMap, a: &PointedFam) -> PointedFam;
    fn comprehend(&self, a: &PointedFam) -> Comprehension;
    /// `⟨f, x⟩ : S' → S.A` for `f : S' → S` and `x : I → A{f}`.
    fn pair(&self, f: &IndexMap, a: &PointedFam, x: &FamMorphism) -> IndexMap;
    fn sigma(&self, a: &PointedFam, b: &PointedFam) -> PointedFam;
    fn pi(&self, a: &PointedFam, b: &PointedFam) -> PointedFam;
    fn id(&self, a: &PointedFam, b: &PointedFam) -> PointedFam;
    fn sigma_along(&self, f: &IndexMap, a: &PointedFam) -> PointedFam;
    fn bang(&self, a: &PointedFam) -> PointedFam;
}

/// Fam(Set★).
#[derive(Clone, Copy, Debug, Default)]
pub struct FamSetStar;

impl ModelInstance for FamSetStar {
    fn describe(&self) -> String {
        "Fam(Set★)".into()
    }
    fn reindex(&self, f: &IndexMap, a: &PointedFam) -> PointedFam {
        reindex_fam(f, a)
    }
    fn comprehend(&self, a: &PointedFam) -> Comprehension {
        comprehend(a)
    }
    fn pair(&self, f: &IndexMap, a: &PointedFam, x: &FamMorphism) -> IndexMap {
        let total = comprehension_index(a);
        let image = (0..f.dom.len())
            .map(|i| {
                let p = f.cod.points[f.apply(i)].extend(x.maps[i].apply(&Elem::unit()));
                total.position(&p).expect("pairing lands in the comprehension")
            })
            .collect();
        IndexMap { dom: f.dom.clone(), cod: total, image }
    }
    fn sigma(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        sigma_fam(a, b)
    }
    fn pi(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        pi_fam(a, b)
    }
    fn id(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        id_fam(a, b)
    }
    fn sigma_along(&self, f: &IndexMap, a: &PointedFam) -> PointedFam {
        sigma_along(f, a)
    }
    fn bang(&self, a: &PointedFam) -> PointedFam {
        bang_fam(a)
    }
}

/// A deliberately broken operation, for fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fault {
    /// Pairing forgets the chosen element.
    Pairing,
    /// Σ loses one element per fiber.
    Sigma,
    /// Π loses one element at the first index point only (not natural).
    Pi,
    /// Id is inhabited at the first off-diagonal point (not natural).
    Id,
    /// Reindexing along a non-identity map reads the first fiber only.
    Reindex,
    /// Σ along a map loses one element per fiber.
    SigmaAlong,
}

impl Fault {
    pub const ALL: [Fault; 6] = [Fault::Pairing, Fault::Sigma, Fault::Pi, Fault::Id, Fault::Reindex, Fault::SigmaAlong];
}

/// Fam(Set★) with one operation corrupted.
#[derive(Clone, Copy, Debug)]
pub struct Faulty {
    pub fault: Fault,
}

fn drop_one(a: PointedFam) -> PointedFam {
    let fibers = a
        .fibers
        .iter()
        .map(|x| {
            let mut rest = x.non_base().to_vec();
            rest.pop();
            PointedSet::new(rest)
        })
        .collect();
    PointedFam::new(a.index, fibers)
}

impl ModelInstance for Faulty {
    fn describe(&self) -> String {
        format!("Fam(Set★) with faulty {:?}", self.fault)
    }
    fn reindex(&self, f: &IndexMap, a: &PointedFam) -> PointedFam {
        let id = IndexMap::identity(&f.cod);
        if self.fault == Fault::Reindex && *f != id && !a.fibers.is_empty() {
            return PointedFam::constant(&f.dom, &a.fibers[0]);
        }
        reindex_fam(f, a)
    }
    fn comprehend(&self, a: &PointedFam) -> Comprehension {
        comprehend(a)
    }
    fn pair(&self, f: &IndexMap, a: &PointedFam, x: &FamMorphism) -> IndexMap {
        if self.fault == Fault::Pairing {
            let forget = FamMorphism {
                index: x.index.clone(),
                maps: x.maps.iter().map(|m| PointedMap::zero(&m.dom, &m.cod)).collect(),
            };
            return FamSetStar.pair(f, a, &forget);
        }
        FamSetStar.pair(f, a, x)
    }
    fn sigma(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        let s = sigma_fam(a, b);
        if self.fault == Fault::Sigma {
            drop_one(s)
        } else {
            s
        }
    }
    fn pi(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        let s = pi_fam(a, b);
        if self.fault == Fault::Pi && !s.fibers.is_empty() {
            let mut fibers = s.fibers.clone();
            fibers[0] = drop_one(PointedFam::new(IndexSet::terminal(), vec![fibers[0].clone()])).fibers[0].clone();
            PointedFam::new(s.index, fibers)
        } else {
            s
        }
    }
    fn id(&self, a: &PointedFam, b: &PointedFam) -> PointedFam {
        let s = id_fam(a, b);
        if self.fault == Fault::Id {
            let mut fibers = s.fibers.clone();
            if let Some(i) = s.index.points.iter().position(|p| {
                let c = p.coords();
                c.len() >= 2 && c[c.len() - 1] != c[c.len() - 2]
            }) {
                fibers[i] = PointedSet::unit();
            }
            PointedFam::new(s.index, fibers)
        } else {
            s
        }
    }
    fn sigma_along(&self, f: &IndexMap, a: &PointedFam) -> PointedFam {
        let s = sigma_along(f, a);
        if self.fault == Fault::SigmaAlong {
            drop_one(s)
        } else {
            s
        }
    }
    fn bang(&self, a: &PointedFam) -> PointedFam {
        bang_fam(a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub max_index: usize,
    pub max_fiber: usize,
    /// Random dependent families sampled per base family, on top of the
    /// constant ones.
    pub samples: usize,
    pub seed: u64,
}

impl Bounds {
    pub const MAX_INDEX: usize = 4;
    pub const MAX_FIBER: usize = 5;

    pub fn new(max_index: usize, max_fiber: usize) -> Bounds {
        Bounds { max_index, max_fiber, samples: 3, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.max_index < 1 || self.max_fiber < 1 {
            return Err(ModelError::BadBounds("bounds must be at least 1".into()));
        }
        if self.max_index > Self::MAX_INDEX || self.max_fiber > Self::MAX_FIBER {
            return Err(ModelError::BoundsExceeded {
                max_index: self.max_index,
                max_fiber: self.max_fiber,
                limit_index: Self::MAX_INDEX,
                limit_fiber: Self::MAX_FIBER,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("bounds exceeded: index {max_index}, fiber {max_fiber} (limits {limit_index}, {limit_fiber})")]
    BoundsExceeded { max_index: usize, max_fiber: usize, limit_index: usize, limit_fiber: usize },
    #[error("invalid bounds: {0}")]
    BadBounds(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Comprehension,
    Frobenius,
    BeckChevalleySigma,
    BeckChevalleyPi,
    BeckChevalleyId,
    Lawvere,
    LawvereStrict,
    LawvereBang,
    ComprehensionFunctor,
}

impl Condition {
    pub const ALL: [Condition; 9] = [
        Condition::Comprehension,
        Condition::Frobenius,
        Condition::BeckChevalleySigma,
        Condition::BeckChevalleyPi,
        Condition::BeckChevalleyId,
        Condition::Lawvere,
        Condition::LawvereStrict,
        Condition::LawvereBang,
        Condition::ComprehensionFunctor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Comprehension => "comprehension",
            Condition::Frobenius => "frobenius",
            Condition::BeckChevalleySigma => "beck-chevalley-sigma",
            Condition::BeckChevalleyPi => "beck-chevalley-pi",
            Condition::BeckChevalleyId => "beck-chevalley-id",
            Condition::Lawvere => "lawvere",
            Condition::LawvereStrict => "lawvere-strict",
            Condition::LawvereBang => "lawvere-bang",
            Condition::ComprehensionFunctor => "comprehension-functor",
        }
    }
}

/// The data of one failing case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f: Option<IndexMap>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub g: Option<IndexMap>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub a: Option<PointedFam>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub b: Option<PointedFam>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<PointedFam>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub instance: String,
    pub bounds: Bounds,
    pub pass: bool,
    pub cases: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
}

type Case = Result<(), String>;

/// Check that `f` is a well-defined bijection `dom → cod`.
fn iso(dom: &PointedSet, cod: &PointedSet, f: impl Fn(&Elem) -> Elem, what: &str) -> Case {
    let m = PointedMap::from_fn(dom, cod, f).map_err(|e| format!("{what}: canonical map ill-defined: {e}"))?;
    if m.is_bijective() {
        Ok(())
    } else {
        Err(format!("{what}: canonical map {dom} → {cod} is not bijective"))
    }
}

fn fam_iso(lhs: &PointedFam, rhs: &PointedFam, f: impl Fn(usize, &Elem) -> Elem, what: &str) -> Case {
    if lhs.index != rhs.index {
        return Err(format!("{what}: index sets differ"));
    }
    for i in 0..lhs.index.len() {
        iso(&lhs.fibers[i], &rhs.fibers[i], |e| f(i, e), &format!("{what} at {}", lhs.index.points[i]))?;
    }
    Ok(())
}

// ---- enumeration ----

pub fn index_sets(max: usize) -> Vec<IndexSet> {
    (0..=max).map(IndexSet::sized).collect()
}

/// Every family over `s` with fibers of 1..=max points.
pub fn families(s: &IndexSet, max: usize) -> Vec<PointedFam> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..s.len() {
        out = out.into_iter().flat_map(|p| (1..=max).map(move |n| [p.clone(), vec![n]].concat())).collect();
    }
    out.into_iter().map(|sizes| sized_family(s, &sizes)).collect()
}

pub fn sized_family(s: &IndexSet, sizes: &[usize]) -> PointedFam {
    PointedFam::new(s.clone(), sizes.iter().map(|&n| PointedSet::sized("e", n)).collect())
}

/// Constant families of every size plus `samples` random ones.
pub fn sample_families(s: &IndexSet, max: usize, samples: usize, rng: &mut ChaCha8Rng) -> Vec<PointedFam> {
    let mut out: Vec<PointedFam> = (1..=max).map(|n| PointedFam::constant(s, &PointedSet::sized("b", n))).collect();
    for _ in 0..samples {
        let sizes: Vec<usize> = (0..s.len()).map(|_| rng.gen_range(1..=max)).collect();
        out.push(PointedFam::new(s.clone(), sizes.iter().map(|&n| PointedSet::sized("b", n)).collect()));
    }
    out
}

/// Every index map between index sets of size at most `max`.
pub fn all_maps(max: usize) -> Vec<IndexMap> {
    let sets = index_sets(max);
    let mut out = Vec::new();
    for d in &sets {
        for c in &sets {
            out.extend(IndexMap::all(d, c));
        }
    }
    out
}

/// Sections of `p` over `f`: maps `g` with `p ∘ g = f`.
fn sections(f: &IndexMap, p: &IndexMap) -> Vec<IndexMap> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for i in 0..f.dom.len() {
        let choices = p.fiber(f.apply(i));
        out = out.into_iter().flat_map(|pre| choices.iter().map(move |&c| [pre.clone(), vec![c]].concat())).collect();
    }
    out.into_iter().map(|image| IndexMap { dom: f.dom.clone(), cod: p.dom.clone(), image }).collect()
}

/// `q_{f,A} : S'.A{f} → S.A`.
pub fn q_map(f: &IndexMap, total_f: &IndexSet, total: &IndexSet) -> IndexMap {
    let image = total_f
        .points
        .iter()
        .map(|p| {
            let i = f.dom.position(&p.project()).expect("point over the domain");
            let q = f.cod.points[f.apply(i)].extend(p.last());
            total.position(&q).expect("q lands in S.A")
        })
        .collect();
    IndexMap { dom: total_f.clone(), cod: total.clone(), image }
}

/// The comprehension functor on a fiber morphism `a : A → B`: the map
/// `S.A → S.B`, `(s, e) ↦ (s, a_s(e))`.
pub fn comprehension_functor(m: &dyn ModelInstance, a: &FamMorphism) -> IndexMap {
    let ca = m.comprehend(&a.dom());
    let cb = m.comprehend(&a.cod());
    let image = ca
        .total
        .points
        .iter()
        .map(|p| {
            let s = p.project();
            let i = a.index.position(&s).expect("point over the base");
            cb.total.position(&s.extend(a.maps[i].apply(&p.last()))).expect("image in S.B")
        })
        .collect();
    IndexMap { dom: ca.total, cod: cb.total, image }
}

// ---- single cases ----

fn case_comprehension(m: &dyn ModelInstance, f: &IndexMap, a: &PointedFam) -> Case {
    let c = m.comprehend(a);
    let af = m.reindex(f, a);
    let elems = fam_homs(&m.unit(&f.dom), &af);
    let secs = sections(f, &c.proj);
    let mut seen = std::collections::BTreeSet::new();
    for x in &elems {
        let g = m.pair(f, a, x);
        if c.proj.after(&g) != *f {
            return Err("pairing is not over f".into());
        }
        if !c.var.reindex(&g).same_action(x) {
            return Err("v{⟨f,a⟩} ≠ a".into());
        }
        if !seen.insert(g.image.clone()) {
            return Err(format!("pairing is not injective: two elements pair to {:?}", g.image));
        }
    }
    if seen.len() != secs.len() {
        return Err(format!("pairing hits {} of {} maps over f", seen.len(), secs.len()));
    }
    Ok(())
}

fn case_frobenius(m: &dyn ModelInstance, a: &PointedFam, b: &PointedFam, xi: &PointedFam) -> Case {
    let c = m.comprehend(a);
    let lhs = m.sigma(a, &m.tensor(&m.reindex(&c.proj, xi), b));
    let rhs = m.tensor(xi, &m.sigma(a, b));
    fam_iso(
        &lhs,
        &rhs,
        |_, e| match e {
            Elem::In(tag, v) => Elem::smash(vec![v.component_smash(0), Elem::inject((**tag).clone(), v.component_smash(1))]),
            _ => Elem::Star,
        },
        "Frobenius",
    )
}

trait SmashParts {
    fn component_smash(&self, i: usize) -> Elem;
}

impl SmashParts for Elem {
    fn component_smash(&self, i: usize) -> Elem {
        match self {
            Elem::Smash(p) => p.get(i).cloned().unwrap_or(Elem::Star),
            _ => Elem::Star,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Former {
    Sigma,
    Pi,
    Id,
}

fn case_beck_chevalley(m: &dyn ModelInstance, former: Former, f: &IndexMap, a: &PointedFam, b: &PointedFam) -> Case {
    let ca = m.comprehend(a);
    let af = m.reindex(f, a);
    let caf = m.comprehend(&af);
    let q = q_map(f, &caf.total, &ca.total);
    let bq = m.reindex(&q, b);
    let (lhs, rhs) = match former {
        Former::Sigma => (m.sigma(&af, &bq), m.reindex(f, &m.sigma(a, b))),
        Former::Pi => (m.pi(&af, &bq), m.reindex(f, &m.pi(a, b))),
        Former::Id => {
            let (d_f, _) = double_index(&af);
            let (d, _) = double_index(a);
            let image = d_f
                .points
                .iter()
                .map(|p| {
                    let c = p.coords();
                    let n = c.len();
                    let base = q.cod.points[q.apply(caf.total.position(&p.project()).expect("point of S'.A{f}"))].clone();
                    let _ = n;
                    d.position(&base.extend(c[n - 1].clone())).expect("point of S.A.A{p}")
                })
                .collect();
            let q2 = IndexMap { dom: d_f, cod: d, image };
            (m.id(&af, &bq), m.reindex(&q2, &m.id(a, b)))
        }
    };
    fam_iso(&lhs, &rhs, |_, e| e.clone(), "Beck–Chevalley")
}

fn case_lawvere(m: &dyn ModelInstance, f: &IndexMap, x: &PointedFam) -> Case {
    let l = m.sigma_along(f, &m.unit(&f.dom));
    let c = m.comprehend(x);
    let homs = fam_homs(&l, x);
    let secs = sections(f, &c.proj);
    let mut seen = std::collections::BTreeSet::new();
    for phi in &homs {
        let mut image = Vec::new();
        for i in 0..f.dom.len() {
            let j = f.apply(i);
            let gen = Elem::inject(f.dom.points[i].clone(), Elem::unit());
            let p = f.cod.points[j].extend(phi.maps[j].apply(&gen));
            image.push(c.total.position(&p).ok_or("transpose leaves S.X")?);
        }
        if !seen.insert(image.clone()) {
            return Err(format!("transpose is not injective at {image:?}"));
        }
    }
    if seen.len() != secs.len() {
        return Err(format!("{} morphisms L(f) → X but {} maps over f", seen.len(), secs.len()));
    }
    Ok(())
}

fn case_lawvere_strict(m: &dyn ModelInstance, f: &IndexMap, h: &IndexMap) -> Case {
    // Pullback of f along h.
    let mut pts = Vec::new();
    let mut image = Vec::new();
    for t in 0..h.dom.len() {
        for s in 0..f.dom.len() {
            if h.apply(t) == f.apply(s) {
                pts.push(Elem::point(vec![h.dom.points[t].clone(), f.dom.points[s].clone()]));
                image.push(t);
            }
        }
    }
    let p = IndexSet::new(pts);
    let f2 = IndexMap { dom: p.clone(), cod: h.dom.clone(), image };
    let lhs = m.sigma_along(&f2, &m.unit(&p));
    let rhs = m.reindex(h, &m.sigma_along(f, &m.unit(&f.dom)));
    fam_iso(
        &lhs,
        &rhs,
        |_, e| match e {
            Elem::In(tag, u) => Elem::inject(tag.coords().get(1).cloned().unwrap_or(Elem::Star), (**u).clone()),
            _ => Elem::Star,
        },
        "L reindexing",
    )
}

fn case_lawvere_bang(m: &dyn ModelInstance, x: &PointedFam) -> Case {
    let c = m.comprehend(x);
    let lm = m.sigma_along(&c.proj, &m.unit(&c.total));
    fam_iso(
        &lm,
        &m.bang(x),
        |_, e| match e {
            Elem::In(tag, u) => Elem::inject(tag.last(), (**u).clone()),
            _ => Elem::Star,
        },
        "L∘M = !",
    )
}

fn case_functor(m: &dyn ModelInstance, a: &FamMorphism, b: &FamMorphism) -> Case {
    let ma = comprehension_functor(m, a);
    let pa = m.comprehend(&a.dom()).proj;
    let pb = m.comprehend(&a.cod()).proj;
    if pb.after(&ma) != pa {
        return Err("p ∘ M(a) ≠ p".into());
    }
    let id = FamMorphism::identity(&a.dom());
    if comprehension_functor(m, &id) != IndexMap::identity(&ma.dom) {
        return Err("M(id) ≠ id".into());
    }
    if comprehension_functor(m, &b.after(a)) != comprehension_functor(m, b).after(&ma) {
        return Err("M(b ∘ a) ≠ M(b) ∘ M(a)".into());
    }
    Ok(())
}

// ---- sweeps ----

struct Sweep<'a> {
    m: &'a dyn ModelInstance,
    cond: Condition,
    bounds: Bounds,
    cases: usize,
    witness: Option<Witness>,
}

impl<'a> Sweep<'a> {
    fn run(&mut self, w: impl FnOnce() -> Witness, r: Case) -> bool {
        self.cases += 1;
        if let Err(detail) = r {
            let mut wit = w();
            wit.detail = detail;
            self.witness = Some(wit);
            return false;
        }
        true
    }

    fn report(self) -> ConditionReport {
        ConditionReport {
            condition: self.cond,
            instance: self.m.describe(),
            bounds: self.bounds,
            pass: self.witness.is_none(),
            cases: self.cases,
            witness: self.witness,
        }
    }
}

fn wit(cond: Condition) -> Witness {
    Witness { condition: cond, f: None, g: None, a: None, b: None, c: None, detail: String::new() }
}

/// Run one verifier over every in-bounds case, stopping at the first failure.
pub fn verify(m: &dyn ModelInstance, cond: Condition, bounds: Bounds) -> Result<ConditionReport, ModelError> {
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(bounds.seed);
    let mut sw = Sweep { m, cond, bounds, cases: 0, witness: None };
    let (ni, nf) = (bounds.max_index, bounds.max_fiber);
    match cond {
        Condition::Comprehension => 'outer: for f in all_maps(ni) {
            for a in families(&f.cod, nf) {
                if !sw.run(|| Witness { f: Some(f.clone()), a: Some(a.clone()), ..wit(cond) }, case_comprehension(m, &f, &a)) {
                    break 'outer;
                }
            }
        },
        Condition::Frobenius => 'outer: for s in index_sets(ni) {
            for a in families(&s, nf) {
                let total = comprehension_index(&a);
                for b in sample_families(&total, nf, bounds.samples, &mut rng) {
                    for xi in sample_families(&s, nf, bounds.samples, &mut rng) {
                        let w = || Witness { a: Some(a.clone()), b: Some(b.clone()), c: Some(xi.clone()), ..wit(cond) };
                        if !sw.run(w, case_frobenius(m, &a, &b, &xi)) {
                            break 'outer;
                        }
                    }
                }
            }
        },
        Condition::BeckChevalleySigma | Condition::BeckChevalleyPi | Condition::BeckChevalleyId => {
            let former = match cond {
                Condition::BeckChevalleySigma => Former::Sigma,
                Condition::BeckChevalleyPi => Former::Pi,
                _ => Former::Id,
            };
            'outer: for f in all_maps(ni) {
                for a in families(&f.cod, nf) {
                    let total = comprehension_index(&a);
                    for b in sample_families(&total, nf, bounds.samples, &mut rng) {
                        let w = || Witness { f: Some(f.clone()), a: Some(a.clone()), b: Some(b.clone()), ..wit(cond) };
                        if !sw.run(w, case_beck_chevalley(m, former, &f, &a, &b)) {
                            break 'outer;
                        }
                    }
                }
            }
        }
        Condition::Lawvere => 'outer: for f in all_maps(ni) {
            for x in families(&f.cod, nf) {
                if !sw.run(|| Witness { f: Some(f.clone()), a: Some(x.clone()), ..wit(cond) }, case_lawvere(m, &f, &x)) {
                    break 'outer;
                }
            }
        },
        Condition::LawvereStrict => {
            let maps = all_maps(ni);
            'outer: for f in &maps {
                for h in maps.iter().filter(|h| h.cod == f.cod) {
                    let w = || Witness { f: Some(f.clone()), g: Some(h.clone()), ..wit(cond) };
                    if !sw.run(w, case_lawvere_strict(m, f, h)) {
                        break 'outer;
                    }
                }
            }
        }
        Condition::LawvereBang => 'outer: for s in index_sets(ni) {
            for x in families(&s, nf) {
                if !sw.run(|| Witness { a: Some(x.clone()), ..wit(cond) }, case_lawvere_bang(m, &x)) {
                    break 'outer;
                }
            }
        },
        Condition::ComprehensionFunctor => 'outer: for s in index_sets(ni.min(2)) {
            for a in families(&s, nf.min(3)) {
                for b in families(&s, nf.min(3)) {
                    let homs_ab = fam_homs(&a, &b);
                    let homs_ba = fam_homs(&b, &a);
                    for (k, x) in homs_ab.iter().enumerate().take(64) {
                        let y = &homs_ba[k % homs_ba.len()];
                        let w = || Witness { a: Some(x.dom()), b: Some(x.cod()), detail: String::new(), ..wit(cond) };
                        if !sw.run(w, case_functor(m, x, y)) {
                            break 'outer;
                        }
                    }
                }
            }
        },
    }
    Ok(sw.report())
}

/// Every verifier.
pub fn verify_all(m: &dyn ModelInstance, bounds: Bounds) -> Result<Vec<ConditionReport>, ModelError> {
    Condition::ALL.iter().map(|&c| verify(m, c, bounds)).collect()
}

/// Re-run the case recorded in a witness. `true` when the violation reproduces.
pub fn replay(m: &dyn ModelInstance, w: &Witness) -> bool {
    let need = |x: &Option<PointedFam>| x.clone().expect("witness carries its families");
    let r = match w.condition {
        Condition::Comprehension => case_comprehension(m, w.f.as_ref().expect("map"), &need(&w.a)),
        Condition::Frobenius => case_frobenius(m, &need(&w.a), &need(&w.b), &need(&w.c)),
        Condition::BeckChevalleySigma => case_beck_chevalley(m, Former::Sigma, w.f.as_ref().expect("map"), &need(&w.a), &need(&w.b)),
        Condition::BeckChevalleyPi => case_beck_chevalley(m, Former::Pi, w.f.as_ref().expect("map"), &need(&w.a), &need(&w.b)),
        Condition::BeckChevalleyId => case_beck_chevalley(m, Former::Id, w.f.as_ref().expect("map"), &need(&w.a), &need(&w.b)),
        Condition::Lawvere => case_lawvere(m, w.f.as_ref().expect("map"), &need(&w.a)),
        Condition::LawvereStrict => case_lawvere_strict(m, w.f.as_ref().expect("map"), w.g.as_ref().expect("map")),
        Condition::LawvereBang => case_lawvere_bang(m, &need(&w.a)),
        Condition::ComprehensionFunctor => {
            let (a, b) = (need(&w.a), need(&w.b));
            let x = fam_homs(&a, &b);
            let y = fam_homs(&b, &a);
            return x.iter().zip(y.iter().cycle()).any(|(x, y)| case_functor(m, x, y).is_err());
        }
    };
    r.is_err()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Bounds {
        Bounds::new(2, 3)
    }

    #[test]
    fn fam_passes_every_condition_at_small_bounds() {
        for r in verify_all(&FamSetStar, small()).unwrap() {
            assert!(r.pass, "{:?} failed: {:?}", r.condition, r.witness);
            assert!(r.cases > 0);
        }
    }

    #[test]
    fn faults_are_caught_and_replay() {
        let expect = [
            (Fault::Pairing, Condition::Comprehension),
            (Fault::Sigma, Condition::Frobenius),
            (Fault::Pi, Condition::BeckChevalleyPi),
            (Fault::Id, Condition::BeckChevalleyId),
            (Fault::Reindex, Condition::BeckChevalleySigma),
            (Fault::SigmaAlong, Condition::Lawvere),
        ];
        for (fault, cond) in expect {
            let m = Faulty { fault };
            let r = verify(&m, cond, small()).unwrap();
            assert!(!r.pass, "{fault:?} not detected by {cond:?}");
            let w = r.witness.unwrap();
            assert!(replay(&m, &w), "witness for {fault:?} does not replay");
            assert!(!replay(&FamSetStar, &w), "witness for {fault:?} fails on the sound model");
        }
    }

    #[test]
    fn terminal_only_is_vacuous_and_bounds_are_enforced() {
        let r = verify(&FamSetStar, Condition::Comprehension, Bounds::new(1, 1)).unwrap();
        assert!(r.pass);
        assert!(verify(&FamSetStar, Condition::Comprehension, Bounds::new(9, 3)).is_err());
        assert!(verify(&FamSetStar, Condition::Comprehension, Bounds::new(0, 3)).is_err());
    }

    #[test]
    fn functor_on_identity_is_identity() {
        let s = IndexSet::sized(2);
        let a = sized_family(&s, &[2, 3]);
        let m = comprehension_functor(&FamSetStar, &FamMorphism::identity(&a));
        assert_eq!(m, IndexMap::identity(&comprehension_index(&a)));
    }

    #[test]
    fn frobenius_cardinalities() {
        // |Ξ'| = 3, constant A with 2 points, B with 4 points.
        let s = IndexSet::terminal();
        let a = PointedFam::constant(&s, &PointedSet::sized("a", 2));
        let b = PointedFam::constant(&comprehension_index(&a), &PointedSet::sized("b", 4));
        let xi = PointedFam::constant(&s, &PointedSet::sized("x", 3));
        let c = comprehend(&a);
        let lhs = sigma_fam(&a, &reindex_fam(&c.proj, &xi).tensor(&b));
        // Σ_a (|Ξ'|−1)(|B(a)|−1) + 1 = 2·(2·3) + 1.
        assert_eq!(lhs.fibers[0].len(), 13);
        assert!(case_frobenius(&FamSetStar, &a, &b, &xi).is_ok());
    }

    #[test]
    fn report_serialises_round_trip() {
        let r = verify(&Faulty { fault: Fault::Sigma }, Condition::Frobenius, small()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: ConditionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
