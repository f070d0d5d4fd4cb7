//! Families of finite pointed sets, Fam(Set★).
//!
//! Every pointed set shares one basepoint representative, [`Elem::Star`].
//! Structured elements are normalised so that a value whose components are
//! all basepoints collapses to `Star`; evaluation can therefore produce the
//! basepoint of any set without knowing which set it lives in.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// An element of a finite pointed set. Labels are path-like so that
/// isomorphisms can be checked by explicit bijection.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Elem {
    /// The basepoint of every pointed set.
    Star,
    /// A user label (non-base).
    Atom(String),
    /// A non-base element of an n-ary smash product. `Smash([])` is the
    /// non-base point of the unit `I`.
    Smash(Vec<Elem>),
    /// An element of a finite product; never all-`Star` (see [`Elem::tuple`]).
    Tuple(Vec<Elem>),
    /// A non-base element of a wedge summand, tagged by its summand.
    In(Box<Elem>, Box<Elem>),
    /// A sparse function table: pointed maps and dependent products.
    /// Entries whose value is `Star` are omitted; never empty.
    Map(Vec<(Elem, Elem)>),
    /// A point of an index set (a context tuple). Never normalised.
    Point(Vec<Elem>),
}

impl Elem {
    pub fn atom(s: impl Into<String>) -> Elem {
        Elem::Atom(s.into())
    }

    /// The non-base point of `I`.
    pub fn unit() -> Elem {
        Elem::Smash(Vec::new())
    }

    pub fn is_star(&self) -> bool {
        matches!(self, Elem::Star)
    }

    pub fn tuple(parts: Vec<Elem>) -> Elem {
        if parts.iter().all(Elem::is_star) {
            Elem::Star
        } else {
            Elem::Tuple(parts)
        }
    }

    /// Component `i` of a product element.
    pub fn component(&self, i: usize) -> Elem {
        match self {
            Elem::Tuple(parts) => parts.get(i).cloned().unwrap_or(Elem::Star),
            _ => Elem::Star,
        }
    }

    /// Smash of components; the basepoint if any component is.
    pub fn smash(parts: Vec<Elem>) -> Elem {
        if parts.iter().any(Elem::is_star) {
            Elem::Star
        } else {
            Elem::Smash(parts)
        }
    }

    /// Injection into a wedge summand.
    pub fn inject(tag: Elem, e: Elem) -> Elem {
        if e.is_star() {
            Elem::Star
        } else {
            Elem::In(Box::new(tag), Box::new(e))
        }
    }

    pub fn map(entries: impl IntoIterator<Item = (Elem, Elem)>) -> Elem {
        let mut table: Vec<(Elem, Elem)> = entries.into_iter().filter(|(_, v)| !v.is_star()).collect();
        table.sort();
        table.dedup();
        if table.is_empty() {
            Elem::Star
        } else {
            Elem::Map(table)
        }
    }

    /// Look up `key` in a map element.
    pub fn apply(&self, key: &Elem) -> Elem {
        match self {
            Elem::Map(table) => table
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .unwrap_or(Elem::Star),
            _ => Elem::Star,
        }
    }

    pub fn point(parts: Vec<Elem>) -> Elem {
        Elem::Point(parts)
    }

    /// Components of an index point.
    pub fn coords(&self) -> &[Elem] {
        match self {
            Elem::Point(p) => p,
            _ => &[],
        }
    }

    /// Extend an index point by one coordinate (context comprehension).
    pub fn extend(&self, a: Elem) -> Elem {
        let mut p = self.coords().to_vec();
        p.push(a);
        Elem::Point(p)
    }

    /// Drop the last coordinate of an index point (the projection).
    pub fn project(&self) -> Elem {
        let p = self.coords();
        Elem::Point(p[..p.len().saturating_sub(1)].to_vec())
    }

    pub fn last(&self) -> Elem {
        self.coords().last().cloned().unwrap_or(Elem::Star)
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, items: &[Elem]) -> fmt::Result {
            for (i, e) in items.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{e}")?;
            }
            Ok(())
        }
        match self {
            Elem::Star => write!(f, "*"),
            Elem::Atom(s) => write!(f, "{s}"),
            Elem::Smash(parts) => {
                write!(f, "(")?;
                list(f, parts)?;
                write!(f, ")")
            }
            Elem::Tuple(parts) => {
                write!(f, "<")?;
                list(f, parts)?;
                write!(f, ">")
            }
            Elem::In(tag, e) => write!(f, "{tag}/{e}"),
            Elem::Map(table) => {
                write!(f, "{{")?;
                for (i, (k, v)) in table.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}->{v}")?;
                }
                write!(f, "}}")
            }
            Elem::Point(parts) => {
                write!(f, "[")?;
                list(f, parts)?;
                write!(f, "]")
            }
        }
    }
}

/// A finite pointed set. The basepoint is always [`Elem::Star`]; `rest`
/// holds the remaining elements, sorted and unique.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointedSet {
    rest: Vec<Elem>,
    /// Display name of the basepoint for user-declared sets.
    #[serde(default)]
    base_label: Option<String>,
}

impl PointedSet {
    pub fn new(rest: impl IntoIterator<Item = Elem>) -> PointedSet {
        let set: BTreeSet<Elem> = rest.into_iter().filter(|e| !e.is_star()).collect();
        PointedSet { rest: set.into_iter().collect(), base_label: None }
    }

    /// A set declared by labels, e.g. `{ a0*, a1, a2 }` becomes
    /// `from_labels("a0", ["a1", "a2"])`.
    pub fn from_labels<S: Into<String>>(base: &str, others: impl IntoIterator<Item = S>) -> PointedSet {
        let mut set = PointedSet::new(others.into_iter().map(|s| Elem::Atom(s.into())));
        set.base_label = Some(base.to_string());
        set
    }

    /// `n` points labelled `{prefix}0* .. {prefix}{n-1}`.
    pub fn sized(prefix: &str, n: usize) -> PointedSet {
        assert!(n >= 1, "a pointed set has at least its basepoint");
        PointedSet::from_labels(&format!("{prefix}0"), (1..n).map(|i| format!("{prefix}{i}")))
    }

    /// The one-point set, the zero object.
    pub fn point() -> PointedSet {
        PointedSet::new([])
    }

    /// The monoidal unit `I = 2★`.
    pub fn unit() -> PointedSet {
        PointedSet::new([Elem::unit()])
    }

    pub fn len(&self) -> usize {
        self.rest.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn non_base(&self) -> &[Elem] {
        &self.rest
    }

    /// All elements, basepoint first.
    pub fn elements(&self) -> impl Iterator<Item = Elem> + '_ {
        std::iter::once(Elem::Star).chain(self.rest.iter().cloned())
    }

    pub fn contains(&self, e: &Elem) -> bool {
        e.is_star() || self.rest.binary_search(e).is_ok()
    }

    pub fn base_label(&self) -> Option<&str> {
        self.base_label.as_deref()
    }

    /// Same elements, ignoring display labels.
    pub fn same_elements(&self, other: &PointedSet) -> bool {
        self.rest == other.rest
    }

    /// Label of an element for display, resolving the basepoint name.
    pub fn show(&self, e: &Elem) -> String {
        match (e, &self.base_label) {
            (Elem::Star, Some(b)) => b.clone(),
            _ => e.to_string(),
        }
    }

    /// Look an element up by its displayed label.
    pub fn parse_label(&self, label: &str) -> Option<Elem> {
        if self.base_label.as_deref() == Some(label) || label == "*" {
            return Some(Elem::Star);
        }
        self.elements().find(|e| e.to_string() == label)
    }
}

impl fmt::Display for PointedSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}*", self.show(&Elem::Star))?;
        for e in &self.rest {
            write!(f, ", {e}")?;
        }
        write!(f, "}}")
    }
}

/// The smash product `X ∧ Y = (X × Y)/(X ∨ Y)`.
pub fn smash(x: &PointedSet, y: &PointedSet) -> PointedSet {
    smash_all(&[x.clone(), y.clone()])
}

/// n-ary smash; the empty smash is `I`.
pub fn smash_all(xs: &[PointedSet]) -> PointedSet {
    let mut acc: Vec<Vec<Elem>> = vec![Vec::new()];
    for x in xs {
        let mut next = Vec::with_capacity(acc.len() * x.rest.len());
        for prefix in &acc {
            for e in &x.rest {
                let mut p = prefix.clone();
                p.push(e.clone());
                next.push(p);
            }
        }
        acc = next;
    }
    PointedSet::new(acc.into_iter().map(Elem::Smash))
}

/// The wedge sum: disjoint union with basepoints identified. Summands are
/// tagged so the result is a coproduct on the nose.
pub fn wedge(summands: &[(Elem, PointedSet)]) -> PointedSet {
    PointedSet::new(
        summands
            .iter()
            .flat_map(|(tag, x)| x.rest.iter().map(move |e| Elem::inject(tag.clone(), e.clone()))),
    )
}

/// Binary wedge with tags `inl`, `inr`.
pub fn wedge2(x: &PointedSet, y: &PointedSet) -> PointedSet {
    wedge(&[(Elem::atom("inl"), x.clone()), (Elem::atom("inr"), y.clone())])
}

/// The cartesian product with paired basepoint. The empty product is the
/// one-point set.
pub fn product(xs: &[PointedSet]) -> PointedSet {
    let mut acc: Vec<Vec<Elem>> = vec![Vec::new()];
    for x in xs {
        let mut next = Vec::with_capacity(acc.len() * x.len());
        for prefix in &acc {
            for e in x.elements() {
                let mut p = prefix.clone();
                p.push(e);
                next.push(p);
            }
        }
        acc = next;
    }
    PointedSet::new(acc.into_iter().map(Elem::tuple))
}

/// A dependent product keyed by tags: elements are sparse tables.
pub fn keyed_product(factors: &[(Elem, PointedSet)]) -> PointedSet {
    let mut acc: Vec<Vec<(Elem, Elem)>> = vec![Vec::new()];
    for (key, x) in factors {
        let mut next = Vec::with_capacity(acc.len() * x.len());
        for prefix in &acc {
            for e in x.elements() {
                let mut p = prefix.clone();
                p.push((key.clone(), e));
                next.push(p);
            }
        }
        acc = next;
    }
    PointedSet::new(acc.into_iter().map(Elem::map))
}

/// All basepoint-preserving functions `X → Y`, as sparse tables.
pub fn pointed_functions(x: &PointedSet, y: &PointedSet) -> Vec<Elem> {
    let factors: Vec<(Elem, PointedSet)> = x.rest.iter().map(|e| (e.clone(), y.clone())).collect();
    keyed_product(&factors).elements().collect()
}

/// The internal hom: pointed maps, the constant map as basepoint.
pub fn hom_pointed(x: &PointedSet, y: &PointedSet) -> PointedSet {
    PointedSet::new(pointed_functions(x, y))
}

/// `!X`: the wedge of one copy of `I` per element of `X`, i.e. a fresh basepoint.
pub fn bang(x: &PointedSet) -> PointedSet {
    let copies: Vec<(Elem, PointedSet)> = x.elements().map(|e| (e, PointedSet::unit())).collect();
    wedge(&copies)
}

/// Identity-type fiber at `(a, a')`: `I` on the diagonal, zero elsewhere.
pub fn id_fiber(a: &Elem, a2: &Elem) -> PointedSet {
    if a == a2 {
        PointedSet::unit()
    } else {
        PointedSet::point()
    }
}

/// A basepoint-preserving map between finite pointed sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointedMap {
    pub dom: PointedSet,
    pub cod: PointedSet,
    /// Images of the non-base domain elements.
    table: BTreeMap<Elem, Elem>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("element {0} is not in the domain")]
    NotInDomain(String),
    #[error("image {0} is not in the codomain")]
    NotInCodomain(String),
    #[error("no image given for {0}")]
    Partial(String),
}

impl PointedMap {
    pub fn new(dom: PointedSet, cod: PointedSet, table: BTreeMap<Elem, Elem>) -> Result<PointedMap, MapError> {
        for (k, v) in &table {
            if k.is_star() {
                continue;
            }
            if !dom.contains(k) {
                return Err(MapError::NotInDomain(k.to_string()));
            }
            if !cod.contains(v) {
                return Err(MapError::NotInCodomain(v.to_string()));
            }
        }
        let mut clean = BTreeMap::new();
        for e in dom.non_base() {
            let v = table.get(e).ok_or_else(|| MapError::Partial(e.to_string()))?;
            clean.insert(e.clone(), v.clone());
        }
        Ok(PointedMap { dom, cod, table: clean })
    }

    pub fn from_fn(dom: &PointedSet, cod: &PointedSet, f: impl Fn(&Elem) -> Elem) -> Result<PointedMap, MapError> {
        let table = dom.non_base().iter().map(|e| (e.clone(), f(e))).collect();
        PointedMap::new(dom.clone(), cod.clone(), table)
    }

    pub fn identity(x: &PointedSet) -> PointedMap {
        PointedMap { dom: x.clone(), cod: x.clone(), table: x.non_base().iter().map(|e| (e.clone(), e.clone())).collect() }
    }

    /// The constant map to the basepoint.
    pub fn zero(dom: &PointedSet, cod: &PointedSet) -> PointedMap {
        PointedMap {
            dom: dom.clone(),
            cod: cod.clone(),
            table: dom.non_base().iter().map(|e| (e.clone(), Elem::Star)).collect(),
        }
    }

    /// Build from a sparse table element as produced by [`hom_pointed`].
    pub fn from_table_elem(dom: &PointedSet, cod: &PointedSet, f: &Elem) -> PointedMap {
        PointedMap {
            dom: dom.clone(),
            cod: cod.clone(),
            table: dom.non_base().iter().map(|e| (e.clone(), f.apply(e))).collect(),
        }
    }

    /// The sparse-table element of `hom(dom, cod)` naming this map.
    pub fn to_table_elem(&self) -> Elem {
        Elem::map(self.table.iter().map(|(k, v)| (k.clone(), v.clone())))
    }

    pub fn apply(&self, e: &Elem) -> Elem {
        if e.is_star() {
            Elem::Star
        } else {
            self.table.get(e).cloned().unwrap_or(Elem::Star)
        }
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &PointedMap) -> PointedMap {
        PointedMap {
            dom: first.dom.clone(),
            cod: self.cod.clone(),
            table: first.table.iter().map(|(k, v)| (k.clone(), self.apply(v))).collect(),
        }
    }

    pub fn is_bijective(&self) -> bool {
        if self.dom.len() != self.cod.len() {
            return false;
        }
        let images: BTreeSet<&Elem> = self.table.values().collect();
        images.len() == self.table.len() && !images.contains(&Elem::Star)
    }

    /// The inverse of a bijection.
    pub fn inverse(&self) -> Option<PointedMap> {
        if !self.is_bijective() {
            return None;
        }
        Some(PointedMap {
            dom: self.cod.clone(),
            cod: self.dom.clone(),
            table: self.table.iter().map(|(k, v)| (v.clone(), k.clone())).collect(),
        })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Elem, &Elem)> {
        self.table.iter()
    }

    /// Tensor (smash) of two maps.
    pub fn smash(&self, other: &PointedMap) -> PointedMap {
        let dom = smash(&self.dom, &other.dom);
        let cod = smash(&self.cod, &other.cod);
        let table = dom
            .non_base()
            .iter()
            .map(|e| match e {
                Elem::Smash(p) => (e.clone(), Elem::smash(vec![self.apply(&p[0]), other.apply(&p[1])])),
                _ => (e.clone(), Elem::Star),
            })
            .collect();
        PointedMap { dom, cod, table }
    }
}

impl fmt::Display for PointedMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.table.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} -> {}", self.dom.show(k), self.cod.show(v))?;
        }
        write!(f, "}}")
    }
}

/// A finite index set: an object of the base category.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet {
    pub points: Vec<Elem>,
}

impl IndexSet {
    pub fn new(points: Vec<Elem>) -> IndexSet {
        IndexSet { points }
    }

    /// The terminal index set `{[]}`.
    pub fn terminal() -> IndexSet {
        IndexSet { points: vec![Elem::point(Vec::new())] }
    }

    /// `n` points `[s0] .. [s{n-1}]`.
    pub fn sized(n: usize) -> IndexSet {
        IndexSet { points: (0..n).map(|i| Elem::point(vec![Elem::atom(format!("s{i}"))])).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, p: &Elem) -> Option<usize> {
        self.points.iter().position(|q| q == p)
    }
}

/// A function between index sets, `dom → cod`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMap {
    pub dom: IndexSet,
    pub cod: IndexSet,
    /// `image[i]` is the position in `cod` of the image of `dom.points[i]`.
    pub image: Vec<usize>,
}

impl IndexMap {
    pub fn identity(s: &IndexSet) -> IndexMap {
        IndexMap { dom: s.clone(), cod: s.clone(), image: (0..s.len()).collect() }
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &IndexMap) -> IndexMap {
        IndexMap { dom: first.dom.clone(), cod: self.cod.clone(), image: first.image.iter().map(|&i| self.image[i]).collect() }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn apply_point(&self, p: &Elem) -> Option<&Elem> {
        self.dom.position(p).map(|i| &self.cod.points[self.image[i]])
    }

    /// Every function `dom → cod`.
    pub fn all(dom: &IndexSet, cod: &IndexSet) -> Vec<IndexMap> {
        let mut out = vec![Vec::new()];
        for _ in 0..dom.len() {
            let mut next = Vec::new();
            for prefix in &out {
                for j in 0..cod.len() {
                    let mut p: Vec<usize> = prefix.clone();
                    p.push(j);
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(|image| IndexMap { dom: dom.clone(), cod: cod.clone(), image }).collect()
    }

    /// Preimage positions of `j`.
    pub fn fiber(&self, j: usize) -> Vec<usize> {
        (0..self.image.len()).filter(|&i| self.image[i] == j).collect()
    }
}

/// A family of pointed sets indexed by a finite set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointedFam {
    pub index: IndexSet,
    pub fibers: Vec<PointedSet>,
}

impl PointedFam {
    pub fn new(index: IndexSet, fibers: Vec<PointedSet>) -> PointedFam {
        assert_eq!(index.len(), fibers.len(), "every index needs a fiber");
        PointedFam { index, fibers }
    }

    pub fn constant(index: &IndexSet, x: &PointedSet) -> PointedFam {
        PointedFam { index: index.clone(), fibers: vec![x.clone(); index.len()] }
    }

    pub fn fiber_at(&self, p: &Elem) -> Option<&PointedSet> {
        self.index.position(p).map(|i| &self.fibers[i])
    }

    pub fn same_elements(&self, other: &PointedFam) -> bool {
        self.index == other.index
            && self.fibers.len() == other.fibers.len()
            && self.fibers.iter().zip(&other.fibers).all(|(a, b)| a.same_elements(b))
    }

    /// Pointwise smash product.
    pub fn tensor(&self, other: &PointedFam) -> PointedFam {
        assert_eq!(self.index, other.index);
        PointedFam::new(self.index.clone(), self.fibers.iter().zip(&other.fibers).map(|(a, b)| smash(a, b)).collect())
    }

    pub fn unit(index: &IndexSet) -> PointedFam {
        PointedFam::constant(index, &PointedSet::unit())
    }

    /// Pointwise internal hom.
    pub fn hom(&self, other: &PointedFam) -> PointedFam {
        PointedFam::new(self.index.clone(), self.fibers.iter().zip(&other.fibers).map(|(a, b)| hom_pointed(a, b)).collect())
    }

    pub fn with(&self, other: &PointedFam) -> PointedFam {
        PointedFam::new(
            self.index.clone(),
            self.fibers.iter().zip(&other.fibers).map(|(a, b)| product(&[a.clone(), b.clone()])).collect(),
        )
    }

    pub fn plus(&self, other: &PointedFam) -> PointedFam {
        PointedFam::new(self.index.clone(), self.fibers.iter().zip(&other.fibers).map(|(a, b)| wedge2(a, b)).collect())
    }
}

/// The index set `S.A` of a comprehension: pairs `(s, a)` with `a ∈ A(s)`,
/// one per pointed map `I → A(s)` (including the zero map).
pub fn comprehension_index(a: &PointedFam) -> IndexSet {
    let mut points = Vec::new();
    for (s, x) in a.index.points.iter().zip(&a.fibers) {
        for e in x.elements() {
            points.push(s.extend(e));
        }
    }
    IndexSet::new(points)
}

/// Comprehension data of a family: the total index set, the projection,
/// and the universal element `v : I → A{p}`.
#[derive(Clone, Debug)]
pub struct Comprehension {
    pub total: IndexSet,
    pub proj: IndexMap,
    pub var: FamMorphism,
}

pub fn comprehend(a: &PointedFam) -> Comprehension {
    let total = comprehension_index(a);
    let image = total.points.iter().map(|p| a.index.position(&p.project()).expect("projection lands in the base")).collect();
    let proj = IndexMap { dom: total.clone(), cod: a.index.clone(), image };
    let a_p = reindex_fam(&proj, a);
    let maps = total
        .points
        .iter()
        .zip(&a_p.fibers)
        .map(|(p, x)| {
            let chosen = p.last();
            PointedMap::from_fn(&PointedSet::unit(), x, |_| chosen.clone()).expect("element of its own fiber")
        })
        .collect();
    let var = FamMorphism { index: total.clone(), maps };
    Comprehension { total, proj, var }
}

/// Reindexing by precomposition, `A{f}(s') = A(f(s'))`.
pub fn reindex_fam(f: &IndexMap, a: &PointedFam) -> PointedFam {
    assert_eq!(f.cod, a.index, "reindexing along a map into the family's index");
    PointedFam::new(f.dom.clone(), f.image.iter().map(|&j| a.fibers[j].clone()).collect())
}

/// `Σ_{!A} B` for `B` over `S.A`: the fiberwise wedge over the elements of `A(s)`.
pub fn sigma_fam(a: &PointedFam, b: &PointedFam) -> PointedFam {
    dependent(a, b, |parts| wedge(parts))
}

/// `Π_{!A} B`: the fiberwise product over the elements of `A(s)`.
pub fn pi_fam(a: &PointedFam, b: &PointedFam) -> PointedFam {
    dependent(a, b, |parts| keyed_product(parts))
}

fn dependent(a: &PointedFam, b: &PointedFam, combine: impl Fn(&[(Elem, PointedSet)]) -> PointedSet) -> PointedFam {
    let fibers = a
        .index
        .points
        .iter()
        .zip(&a.fibers)
        .map(|(s, x)| {
            let parts: Vec<(Elem, PointedSet)> = x
                .elements()
                .map(|e| {
                    let fiber = b.fiber_at(&s.extend(e.clone())).expect("B is indexed over S.A").clone();
                    (e, fiber)
                })
                .collect();
            combine(&parts)
        })
        .collect();
    PointedFam::new(a.index.clone(), fibers)
}

/// The index set `S.A.A{p}` of pairs of elements of the same fiber.
pub fn double_index(a: &PointedFam) -> (IndexSet, IndexMap) {
    let c = comprehend(a);
    let a_p = reindex_fam(&c.proj, a);
    let total2 = comprehension_index(&a_p);
    (total2, c.proj)
}

/// `Id_{!A}(B)` over `S.A.A{p}`: `B(s,a)` on the diagonal, zero elsewhere.
pub fn id_fam(a: &PointedFam, b: &PointedFam) -> PointedFam {
    let (total2, _) = double_index(a);
    let fibers = total2
        .points
        .iter()
        .map(|p| {
            let coords = p.coords();
            let n = coords.len();
            if coords[n - 1] == coords[n - 2] {
                b.fiber_at(&p.project()).expect("B is indexed over S.A").clone()
            } else {
                PointedSet::point()
            }
        })
        .collect();
    PointedFam::new(total2, fibers)
}

/// `!A(s) = coprod_{Set★(I, A(s))} I`.
pub fn bang_fam(a: &PointedFam) -> PointedFam {
    PointedFam::new(a.index.clone(), a.fibers.iter().map(bang).collect())
}

/// The discrete type `2`, interpreted as the constant family at `I`.
pub fn two_fam(index: &IndexSet) -> PointedFam {
    PointedFam::unit(index)
}

/// Σ along an arbitrary index map: `Σ_f(A)(s) = ⋁_{s' ∈ f⁻¹(s)} A(s')`.
pub fn sigma_along(f: &IndexMap, a: &PointedFam) -> PointedFam {
    assert_eq!(f.dom, a.index);
    let fibers = (0..f.cod.len())
        .map(|j| {
            let parts: Vec<(Elem, PointedSet)> =
                f.fiber(j).into_iter().map(|i| (f.dom.points[i].clone(), a.fibers[i].clone())).collect();
            wedge(&parts)
        })
        .collect();
    PointedFam::new(f.cod.clone(), fibers)
}

/// A morphism of families over a common index set: one pointed map per index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamMorphism {
    pub index: IndexSet,
    pub maps: Vec<PointedMap>,
}

impl FamMorphism {
    pub fn identity(a: &PointedFam) -> FamMorphism {
        FamMorphism { index: a.index.clone(), maps: a.fibers.iter().map(PointedMap::identity).collect() }
    }

    pub fn dom(&self) -> PointedFam {
        PointedFam::new(self.index.clone(), self.maps.iter().map(|m| m.dom.clone()).collect())
    }

    pub fn cod(&self) -> PointedFam {
        PointedFam::new(self.index.clone(), self.maps.iter().map(|m| m.cod.clone()).collect())
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &FamMorphism) -> FamMorphism {
        assert_eq!(self.index, first.index);
        FamMorphism { index: self.index.clone(), maps: self.maps.iter().zip(&first.maps).map(|(g, f)| g.after(f)).collect() }
    }

    pub fn reindex(&self, f: &IndexMap) -> FamMorphism {
        assert_eq!(f.cod, self.index);
        FamMorphism { index: f.dom.clone(), maps: f.image.iter().map(|&j| self.maps[j].clone()).collect() }
    }

    pub fn is_iso(&self) -> bool {
        self.maps.iter().all(PointedMap::is_bijective)
    }

    pub fn tensor(&self, other: &FamMorphism) -> FamMorphism {
        FamMorphism { index: self.index.clone(), maps: self.maps.iter().zip(&other.maps).map(|(a, b)| a.smash(b)).collect() }
    }

    /// Pointwise equality of the underlying functions.
    pub fn same_action(&self, other: &FamMorphism) -> bool {
        self.index == other.index
            && self.maps.len() == other.maps.len()
            && self.maps.iter().zip(&other.maps).all(|(f, g)| {
                f.dom.same_elements(&g.dom) && f.dom.non_base().iter().all(|e| f.apply(e) == g.apply(e))
            })
    }
}

/// All morphisms `A → B` of families over a common index.
pub fn fam_homs(a: &PointedFam, b: &PointedFam) -> Vec<FamMorphism> {
    let per_index: Vec<Vec<Elem>> = a.fibers.iter().zip(&b.fibers).map(|(x, y)| pointed_functions(x, y)).collect();
    let mut out: Vec<Vec<PointedMap>> = vec![Vec::new()];
    for (i, choices) in per_index.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * choices.len());
        for prefix in &out {
            for c in choices {
                let mut p = prefix.clone();
                p.push(PointedMap::from_table_elem(&a.fibers[i], &b.fibers[i], c));
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(|maps| FamMorphism { index: a.index.clone(), maps }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize) -> PointedSet {
        PointedSet::sized("x", n)
    }

    // Cardinalities below are checked against direct enumeration of the
    // defining quotient / union, not against the closed forms.
    fn smash_by_quotient(x: &PointedSet, y: &PointedSet) -> usize {
        let mut classes = BTreeSet::new();
        for a in x.elements() {
            for b in y.elements() {
                if a.is_star() || b.is_star() {
                    classes.insert(None);
                } else {
                    classes.insert(Some((a.clone(), b)));
                }
            }
        }
        classes.len()
    }

    #[test]
    fn smash_three_four_is_seven() {
        let (x, y) = (set(3), set(4));
        assert_eq!(smash_by_quotient(&x, &y), 7);
        assert_eq!(smash(&x, &y).len(), 7);
    }

    #[test]
    fn smash_units_and_zero() {
        let x = set(3);
        assert_eq!(smash(&x, &PointedSet::unit()).len(), 3);
        assert_eq!(smash(&x, &PointedSet::point()).len(), 1);
        assert_eq!(smash_all(&[]), PointedSet::unit());
    }

    #[test]
    fn wedge_product_hom_sizes() {
        let (x, y) = (set(3), set(4));
        assert_eq!(wedge2(&x, &y).len(), 6);
        assert_eq!(product(&[]).len(), 1);
        assert_eq!(product(&[x.clone(), y.clone()]).len(), 12);
        assert_eq!(hom_pointed(&set(3), &set(2)).len(), 4);
        assert_eq!(bang(&x).len(), 4);
        assert_eq!(bang(&PointedSet::point()).len(), 2);
    }

    #[test]
    fn closure_bijection_holds() {
        // Set★(X∧Y, Z) ≅ Set★(X, hom(Y, Z)) by currying.
        let (x, y, z) = (set(2), set(3), set(2));
        let lhs = pointed_functions(&smash(&x, &y), &z);
        let hom_yz = hom_pointed(&y, &z);
        let rhs = pointed_functions(&x, &hom_yz);
        assert_eq!(lhs.len(), rhs.len());
        let curried: BTreeSet<Elem> = lhs
            .iter()
            .map(|f| Elem::map(x.non_base().iter().map(|a| {
                let g = Elem::map(y.non_base().iter().map(|b| (b.clone(), f.apply(&Elem::Smash(vec![a.clone(), b.clone()])))));
                (a.clone(), g)
            })))
            .collect();
        assert_eq!(curried.len(), rhs.len());
        assert!(curried.iter().all(|c| rhs.contains(c)));
    }

    #[test]
    fn comprehension_of_constant_family() {
        let s = IndexSet::sized(2);
        let a = PointedFam::constant(&s, &set(3));
        let c = comprehend(&a);
        assert_eq!(c.total.len(), 6);
        let pt = PointedFam::constant(&s, &PointedSet::point());
        assert_eq!(comprehend(&pt).total.len(), 2);
        assert_eq!(comprehend(&two_fam(&s)).total.len() / s.len(), 2);
    }

    #[test]
    fn sigma_pi_cardinalities() {
        let s = IndexSet::sized(1);
        let a = PointedFam::constant(&s, &set(3));
        let sa = comprehension_index(&a);
        let b = PointedFam::constant(&sa, &set(4));
        assert_eq!(sigma_fam(&a, &b).fibers[0].len(), 10);
        assert_eq!(pi_fam(&a, &b).fibers[0].len(), 64);
        let i = PointedFam::unit(&sa);
        assert_eq!(sigma_fam(&a, &i).fibers[0].len(), 4);
        assert_eq!(sigma_fam(&a, &i), bang_fam(&a));
    }

    #[test]
    fn id_family_diagonal() {
        let s = IndexSet::sized(1);
        let a = PointedFam::constant(&s, &set(3));
        let b = PointedFam::unit(&comprehension_index(&a));
        let id = id_fam(&a, &b);
        assert_eq!(id.index.len(), 9);
        let diagonal = id.fibers.iter().filter(|f| f.len() == 2).count();
        assert_eq!(diagonal, 3);
        assert_eq!(id.fibers.iter().filter(|f| f.len() == 1).count(), 6);
    }

    #[test]
    fn reindex_is_strictly_functorial() {
        let s = IndexSet::sized(3);
        let a = PointedFam::new(s.clone(), vec![set(1), set(2), set(3)]);
        assert_eq!(reindex_fam(&IndexMap::identity(&s), &a), a);
        let t = IndexSet::sized(2);
        let u = IndexSet::sized(2);
        for f in IndexMap::all(&t, &s) {
            for g in IndexMap::all(&u, &t) {
                assert_eq!(reindex_fam(&f.after(&g), &a), reindex_fam(&g, &reindex_fam(&f, &a)));
            }
        }
    }

    #[test]
    fn map_inverse_roundtrip() {
        let x = set(3);
        let swap = PointedMap::from_fn(&x, &x, |e| if *e == Elem::atom("x1") { Elem::atom("x2") } else { Elem::atom("x1") }).unwrap();
        let inv = swap.inverse().unwrap();
        assert_eq!(inv.after(&swap), PointedMap::identity(&x));
        assert!(PointedMap::zero(&x, &x).inverse().is_none());
    }

    #[test]
    fn partial_map_rejected() {
        let x = set(2);
        assert!(matches!(PointedMap::new(x.clone(), x.clone(), BTreeMap::new()), Err(MapError::Partial(_))));
    }
}
