use proptest::prelude::*;

use ildtt::checker::Checker;
use ildtt::equality::Equality;
use ildtt::gen::{gen_signature, generate, siblings, GenConfig, Judgement};
use ildtt::interp::{Interp, Model};
use ildtt::linearity::usage_derivable;
use ildtt::parser::{parse_file, parse_term};
use ildtt::report::{Report, ReportItem};
use ildtt::syntax::*;

fn judgement(seed: u64) -> Judgement {
    let (mut js, stats) = generate(&gen_signature(), seed, 1, GenConfig::default());
    js.pop().unwrap_or_else(|| panic!("seed {seed}: {stats:?}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_terms_check_with_at_most_four_linear_variables(seed in any::<u64>()) {
        let j = judgement(seed);
        prop_assert!(j.ctx.lin.len() <= 4);
        let sig = gen_signature();
        prop_assert!(Checker::new(&sig).check_term(&j.ctx, &j.term, &j.ty).is_ok());
    }

    #[test]
    fn normal_forms_are_fixed_points(seed in any::<u64>()) {
        let j = judgement(seed);
        let sig = gen_signature();
        let eq = Equality::new(&sig);
        let n = eq.nf(&j.term).unwrap();
        prop_assert!(alpha_eq(&eq.nf(&n).unwrap(), &n));
        prop_assert!(eq.normalize(&n).unwrap().trace.is_empty());
    }

    #[test]
    fn normal_forms_still_check(seed in any::<u64>()) {
        let j = judgement(seed);
        let sig = gen_signature();
        let n = Equality::new(&sig).nf(&j.term).unwrap();
        let checked = Checker::new(&sig).check_term(&j.ctx, &n, &j.ty);
        prop_assert!(checked.is_ok(), "{} ⊢ {} : {}: {:?}", j.ctx, n, j.ty, checked.err());
    }

    #[test]
    fn judgemental_equality_is_reflexive_and_symmetric(seed in any::<u64>()) {
        let j = judgement(seed);
        let sig = gen_signature();
        let eq = Equality::new(&sig);
        prop_assert!(eq.judg_equal(&j.term, &j.term, Some(&j.ty)).unwrap());
        for s in siblings(&sig, seed, &j, 2, 3) {
            prop_assert_eq!(eq.judg_equal(&j.term, &s.term, Some(&j.ty)).ok(), eq.judg_equal(&s.term, &j.term, Some(&j.ty)).ok());
        }
    }

    #[test]
    fn substitution_of_a_variable_for_itself_or_an_absent_variable_is_the_identity(seed in any::<u64>()) {
        let j = judgement(seed);
        for (x, _) in &j.ctx.lin {
            prop_assert!(alpha_eq(&subst_lin(&j.term, x, &TermExpr::LinVar(x.clone())), &j.term));
        }
        prop_assert_eq!(&subst_lin(&j.term, "absent", &TermExpr::Star), &j.term);
        prop_assert_eq!(&subst_int(&j.term, "absent", &TermExpr::TT), &j.term);
    }

    #[test]
    fn canonical_forms_are_alpha_equivalent_and_stable(seed in any::<u64>()) {
        let j = judgement(seed);
        let c = canonical(&j.term, false);
        prop_assert!(alpha_eq(&c, &j.term));
        prop_assert_eq!(&canonical(&c, false), &c);
    }

    #[test]
    fn denotation_is_stable_under_alpha_equivalence(seed in any::<u64>(), model in 0u64..8) {
        let j = judgement(seed);
        let sig = gen_signature();
        let m = Model::random(&sig, model, 4);
        let i = Interp::new(&sig, &m);
        let a = i.denote_term(&j.ctx, &j.term, &j.ty).unwrap();
        let b = i.denote_term(&j.ctx, &canonical(&j.term, false), &j.ty).unwrap();
        prop_assert!(a.same_action(&b));
    }

    #[test]
    fn checked_terms_have_a_usage_derivation(seed in any::<u64>()) {
        let j = judgement(seed);
        let names: Vec<Name> = j.ctx.lin.iter().map(|(x, _)| x.clone()).collect();
        prop_assert!(usage_derivable(&j.term, &names));
    }

    #[test]
    fn reports_round_trip_through_json(
        command in "[a-z-]{1,12}",
        items in prop::collection::vec(("\\PC{0,16}", any::<bool>(), "\\PC{0,40}", prop::option::of(any::<i64>())), 0..6),
        seed in any::<u32>(),
    ) {
        let mut r = Report::new(command, serde_json::json!({ "seed": seed }));
        for (name, pass, details, w) in items {
            let it = if pass { ReportItem::pass(name, details) } else { ReportItem::fail(name, details) };
            r.push(match w { Some(w) => it.with_witness(serde_json::json!(w)), None => it });
        }
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        prop_assert_eq!(back.exit_code(), r.exit_code());
        prop_assert_eq!(back, r);
    }
}

#[test]
fn printed_terms_parse_back_to_alpha_equivalent_terms() {
    let src = "type A.\ntype B.\ndef f : A * B -o B * A := lam (p : A * B) let p be x (*) y in y (*) x.\n";
    let file = parse_file(src, None).unwrap();
    let sig = file.signature;
    let t = parse_term("lam (p : A * B) let p be x (*) y in y (*) x", &sig, &[]).unwrap().0;
    let again = parse_term(&t.to_string(), &sig, &[]).unwrap().0;
    assert!(alpha_eq(&t, &again));
}
