//! One PASS/FAIL line per acceptance criterion.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ildtt::checker::DualContext;
use ildtt::corpus::{fixtures, Fixture, FIXTURES};
use ildtt::equality::DEFAULT_STEP_LIMIT;
use ildtt::gen::{gen_signature, generate, siblings, GenConfig, Judgement};
use ildtt::linearity;
use ildtt::metatheory;
use ildtt::model::{replay, verify, verify_all, Bounds, Condition, Fault, FamSetStar, Faulty};
use ildtt::parser::{parse_file, Item};
use ildtt::soundness::{soundness, subject_reduction, SoundnessConfig, SoundnessOutcome, StepInstance};
use ildtt::syntax::{subst_int, Signature, TermExpr, TypeExpr};
use ildtt::theorems::*;

type Outcome = Result<String, String>;

fn first<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().take(3).map(|x| format!("\n      {x}")).collect()
}

/// Both sides of every `assert` in a fixture, as closed judgements.
fn asserted_pairs(f: &Fixture, text: &str) -> Vec<(Judgement, Judgement)> {
    let parsed = parse_file(text, Some(&f.name)).expect("fixture parses");
    let closed = |name: &str| {
        let d = f.signature().def(name).expect("asserted definitions check");
        Judgement { ctx: DualContext::empty(), term: d.term.clone(), ty: d.ty.clone() }
    };
    parsed
        .items
        .iter()
        .filter_map(|i| match i {
            Item::Assert(a) => Some((closed(&a.lhs), closed(&a.rhs))),
            _ => None,
        })
        .collect()
}

/// `l ≡ r : S ⊸ T` applied to a fresh linear variable of `S`, and likewise
/// for `Π`, repeatedly. The first entry is the pair itself.
fn eta_open(l: &Judgement, r: &Judgement) -> Vec<(Judgement, Judgement)> {
    let mut out = vec![(l.clone(), r.clone())];
    let (mut ctx, mut tl, mut tr, mut ty) = (l.ctx.clone(), l.term.clone(), r.term.clone(), l.ty.clone());
    for k in 0.. {
        let x = format!("eta{k}");
        match ty {
            TypeExpr::Lolli(s, t) => {
                ctx.lin.push((x.clone(), *s));
                tl = TermExpr::App(Box::new(tl), Box::new(TermExpr::LinVar(x.clone())));
                tr = TermExpr::App(Box::new(tr), Box::new(TermExpr::LinVar(x)));
                ty = *t;
            }
            TypeExpr::Pi { var, dom, body } => {
                ctx.int.push((x.clone(), *dom));
                tl = TermExpr::PiApp(Box::new(tl), Box::new(TermExpr::IntVar(x.clone())));
                tr = TermExpr::PiApp(Box::new(tr), Box::new(TermExpr::IntVar(x.clone())));
                ty = subst_int(&*body, &var, &TermExpr::IntVar(x));
            }
            _ => break,
        }
        let j = |term: &TermExpr| Judgement { ctx: ctx.clone(), term: term.clone(), ty: ty.clone() };
        out.push((j(&tl), j(&tr)));
    }
    out
}

fn absorb(total: &mut SoundnessOutcome, o: SoundnessOutcome) {
    total.judgements += o.judgements;
    total.pairs += o.pairs;
    total.accepted += o.accepted;
    total.comparisons += o.comparisons;
    total.step_limit_hits += o.step_limit_hits;
    total.too_large += o.too_large;
    total.failures.extend(o.failures);
}

struct Shared {
    fixtures: Vec<Fixture>,
    gen_sig: Signature,
    generated: Vec<Judgement>,
    /// Rewrite steps observed during the soundness sweep, with their signature.
    steps: Vec<(usize, Vec<StepInstance>)>,
}

impl Shared {
    /// Signature `k`: the fixtures in order, then the generator's.
    fn sig(&self, k: usize) -> &Signature {
        self.fixtures.get(k).map(Fixture::signature).unwrap_or(&self.gen_sig)
    }
}

fn soundness_sweep(sh: &mut Shared) -> Outcome {
    let cfg = SoundnessConfig { step_limit: DEFAULT_STEP_LIMIT, ..SoundnessConfig::default() };
    let defs: usize = sh.fixtures.iter().map(Fixture::definitions).sum();
    let mut total = SoundnessOutcome::default();
    let mut asserted = 0;
    for (k, f) in sh.fixtures.iter().enumerate() {
        let mut o = soundness(f.signature(), &f.judgements, &cfg);
        sh.steps.push((k, std::mem::take(&mut o.steps)));
        absorb(&mut total, o);
        let text = FIXTURES.iter().find(|(n, _)| *n == f.name).expect("fixture text").1;
        for (l, r) in asserted_pairs(f, text) {
            asserted += 1;
            // Compared at the first η-expansion small enough to enumerate.
            let o = eta_open(&l, &r)
                .into_iter()
                .map(|(l, r)| soundness(f.signature(), &[l, r], &cfg))
                .find(|o| o.too_large == 0)
                .unwrap_or_else(|| SoundnessOutcome { failures: vec![format!("{}: {} ≡ {} too large to compare", f.name, l.term, r.term)], ..Default::default() });
            if o.accepted == 0 {
                total.failures.push(format!("{}: asserted {} ≡ {} not accepted", f.name, l.term, r.term));
            }
            absorb(&mut total, o);
        }
    }
    let mut corpus = sh.generated.clone();
    for (k, j) in sh.generated.iter().enumerate() {
        corpus.extend(siblings(&sh.gen_sig, 1000 + k as u64, j, 2, 3));
    }
    let mut o = soundness(&sh.gen_sig, &corpus, &cfg);
    sh.steps.push((sh.fixtures.len(), std::mem::take(&mut o.steps)));
    absorb(&mut total, o);
    let max_lin = sh.generated.iter().map(|j| j.ctx.lin.len()).max().unwrap_or(0);
    let details = format!(
        "{defs} fixture definitions ({asserted} asserted pairs) + {} generated terms (≤ {max_lin} linear variables) + {} siblings, {} judgements over the enumeration budget; \
         {} pairs accepted of {}, {} denotation comparisons in {} models with fibers ≤ {}, {} step-limit hits",
        sh.generated.len(),
        corpus.len() - sh.generated.len(),
        total.too_large,
        total.accepted,
        total.pairs,
        total.comparisons,
        cfg.model_seeds.len(),
        cfg.max_fiber,
        total.step_limit_hits
    );
    if defs < 50 || sh.generated.len() < 500 || max_lin > 4 || total.accepted == 0 {
        return Err(format!("corpus too small: {details}"));
    }
    if !total.failures.is_empty() {
        return Err(format!("{} unsound pairs: {details}{}", total.failures.len(), first(&total.failures)));
    }
    Ok(details)
}

fn linearity_discipline(sh: &Shared) -> Outcome {
    let mut total = linearity::LinearityOutcome::default();
    let add = |total: &mut linearity::LinearityOutcome, o: linearity::LinearityOutcome| {
        total.mutants += o.mutants;
        total.violating += o.violating;
        total.rejected_as_linearity += o.rejected_as_linearity;
        total.absorbed += o.absorbed;
        total.agreement_checks += o.agreement_checks;
        total.failures.extend(o.failures);
    };
    for f in &sh.fixtures {
        add(&mut total, linearity::sweep(f.signature(), &f.judgements, 400, 17));
    }
    let rest = 1000usize.saturating_sub(total.mutants);
    add(&mut total, linearity::sweep(&sh.gen_sig, &sh.generated, rest, 18));
    let details = format!(
        "{} mutants: {} violate linearity, {} rejected as reused/unused, {} absorbed by ⊤/0 and accepted by both; {} oracle agreement checks",
        total.mutants, total.violating, total.rejected_as_linearity, total.absorbed, total.agreement_checks
    );
    if total.mutants < 1000 {
        return Err(format!("too few mutants: {details}"));
    }
    if !total.failures.is_empty() {
        return Err(format!("{} disagreements: {details}{}", total.failures.len(), first(&total.failures)));
    }
    Ok(details)
}

fn theorem2() -> Outcome {
    let syn = theorem2_syntactic(&suite_signature())?;
    let mut example = String::new();
    for a in 1..=4 {
        for b in 1..=4 {
            let d = theorem2_semantic(a, b, 3)?;
            if (a, b) == (3, 4) {
                example = d;
            }
        }
    }
    Ok(format!("16 size pairs over |S| ≤ 3; {example}; {syn}"))
}

fn theorem3() -> Outcome {
    let syn = theorem3_syntactic(&suite_signature())?;
    let sem = theorem3_semantic(3, 4)?;
    let seely = seely(4)?;
    Ok(format!("{sem}; {seely}; {syn}"))
}

fn theorem4() -> Outcome {
    let sem = theorem4_semantic(4)?;
    let syn = theorem4_syntactic(&suite_signature())?;
    Ok(format!("{sem}; {syn}"))
}

fn model_conditions() -> Outcome {
    let bounds = Bounds::new(3, 4);
    let reports = verify_all(&FamSetStar, bounds).map_err(|e| e.to_string())?;
    let cases: usize = reports.iter().map(|r| r.cases).sum();
    if let Some(r) = reports.iter().find(|r| !r.pass) {
        return Err(format!("{} fails on Fam(Set★): {:?}", r.condition.name(), r.witness));
    }
    let mut caught = Vec::new();
    for fault in Fault::ALL {
        let m = Faulty { fault };
        let mut found = None;
        for c in Condition::ALL {
            let r = verify(&m, c, bounds).map_err(|e| e.to_string())?;
            if !r.pass {
                found = Some((c, r.witness.ok_or_else(|| format!("{fault:?}: failure without a witness"))?));
                break;
            }
        }
        let (c, w) = found.ok_or_else(|| format!("{fault:?} not detected by any verifier"))?;
        if !replay(&m, &w) || replay(&FamSetStar, &w) {
            return Err(format!("{fault:?}: witness from {} does not replay", c.name()));
        }
        caught.push(format!("{fault:?}→{}", c.name()));
    }
    Ok(format!("{} conditions pass on {cases} cases at |S| ≤ 3, fibers ≤ 4; faults caught with replayable witnesses: {}", reports.len(), caught.join(", ")))
}

fn consistency_check() -> Outcome {
    consistency(&suite_signature())
}

fn metatheory_harness(sh: &Shared) -> Outcome {
    let mut checks = std::collections::BTreeMap::new();
    let mut failures = Vec::new();
    let mut tally = |o: metatheory::MetaOutcome| {
        for (r, t) in o.rules {
            *checks.entry(r).or_insert(0) += t.checks;
            failures.extend(t.failures);
        }
    };
    for f in &sh.fixtures {
        tally(metatheory::replay(f.signature(), &f.judgements, 5, DEFAULT_STEP_LIMIT));
    }
    tally(metatheory::replay(&sh.gen_sig, &sh.generated, 6, DEFAULT_STEP_LIMIT));
    let mut steps = 0;
    for (k, s) in &sh.steps {
        let (n, fails) = subject_reduction(sh.sig(*k), s, DEFAULT_STEP_LIMIT);
        steps += n;
        failures.extend(fails);
    }
    let details = format!(
        "{}; subject reduction on {steps} rewrite steps",
        checks.iter().map(|(r, n)| format!("{r} {n}")).collect::<Vec<_>>().join(", ")
    );
    if let Some((r, _)) = checks.iter().find(|(_, n)| **n == 0) {
        return Err(format!("{r} never exercised: {details}"));
    }
    if steps == 0 {
        return Err(format!("no rewrite steps recorded: {details}"));
    }
    if !failures.is_empty() {
        return Err(format!("{} failures: {details}{}", failures.len(), first(&failures)));
    }
    Ok(details)
}

fn report(n: usize, title: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = run();
    let took = start.elapsed();
    let (ok, details) = match outcome {
        Ok(d) if took <= budget => (true, d),
        Ok(d) => (false, format!("over the {budget:?} budget: {d}")),
        Err(d) => (false, d),
    };
    println!("{} criterion {n} ({title}) [{:.2}s]: {details}", if ok { "PASS" } else { "FAIL" }, took.as_secs_f64());
    ok
}

fn main() -> ExitCode {
    let gen_sig = gen_signature();
    let (generated, _) = generate(&gen_sig, 2024, 500, GenConfig::default());
    let mut sh = Shared { fixtures: fixtures(DEFAULT_STEP_LIMIT), gen_sig, generated, steps: Vec::new() };
    let secs = Duration::from_secs;
    let results = [
        report(1, "soundness sweep", secs(120), || soundness_sweep(&mut sh)),
        report(2, "linearity discipline", secs(60), || linearity_discipline(&sh)),
        report(3, "Π ≅ !A ⊸ B and Σ ≅ !A ⊗ B", secs(60), theorem2),
        report(4, "Σ_{!A}I satisfies the rules for !A; Seely", secs(30), theorem3),
        report(5, "Π over 2 ≅ &, Σ over 2 ≅ ⊕", secs(30), theorem4),
        report(6, "model conditions and fault injection", secs(300), model_conditions),
        report(7, "consistency", secs(1), consistency_check),
        report(8, "metatheory harness", secs(120), || metatheory_harness(&sh)),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
