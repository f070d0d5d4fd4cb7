//! Checking a whole source file: definitions in order, then assertions.

use serde_json::json;

use crate::checker::{CheckError, Checker, DualContext};
use crate::equality::Equality;
use crate::parser::{Item, ParsedFile};
use crate::report::{Report, ReportItem};
use crate::syntax::*;

/// The outcome of checking a file. `signature` holds every definition that
/// checked, elaborated.
#[derive(Clone, Debug)]
pub struct CheckedFile {
    pub signature: Signature,
    pub report: Report,
    pub errors: Vec<CheckError>,
}

fn located(file: &ParsedFile, span: Option<&SourceSpan>, msg: &str) -> String {
    match span {
        Some(s) => {
            let (line, col) = s.line_col(&file.text);
            format!("{}:{line}:{col}: {msg}", file.file.as_deref().unwrap_or("<input>"))
        }
        None => msg.to_string(),
    }
}

/// Check every definition and assertion of `file` with the given step limit.
pub fn check_file(file: &ParsedFile, step_limit: usize) -> CheckedFile {
    let mut sig = file.signature.clone();
    let mut report = Report::new("check", json!({ "file": file.file, "step_limit": step_limit }));
    let mut errors = Vec::new();
    for item in &file.items {
        match item {
            Item::Def(d) => {
                let checked = Checker::with_step_limit(&sig, step_limit).check_with_spans(&DualContext::empty(), &d.term, d.ty.as_ref(), &d.spans);
                match checked {
                    Ok(c) => {
                        report.push(ReportItem::pass(&d.name, format!("{} : {}", d.name, c.ty)));
                        sig.add_def(Definition { name: d.name.clone(), ty: c.ty, term: c.term }).expect("parser rejects duplicate names");
                    }
                    Err(e) => {
                        report.push(ReportItem::fail(&d.name, located(file, e.span.as_ref(), &e.to_string())));
                        errors.push(e);
                    }
                }
            }
            Item::Assert(a) => {
                let name = format!("{} == {}", a.lhs, a.rhs);
                let result = match (sig.def(&a.lhs), sig.def(&a.rhs)) {
                    (Some(l), Some(r)) => {
                        let eq = Equality::new(&sig).with_step_limit(step_limit);
                        let lhs = TermExpr::Const { name: l.name.clone(), args: vec![] };
                        let rhs = TermExpr::Const { name: r.name.clone(), args: vec![] };
                        match eq.types_equal(&l.ty, &r.ty) {
                            Ok(true) => match eq.judg_equal(&lhs, &rhs, Some(&l.ty)) {
                                Ok(true) => Ok(format!("{} ≡ {} : {}", a.lhs, a.rhs, l.ty)),
                                Ok(false) => Err(format!("not judgementally equal: {} and {}", a.lhs, a.rhs)),
                                Err(e) => Err(e.to_string()),
                            },
                            Ok(false) => Err(format!("types differ: `{}` and `{}`", l.ty, r.ty)),
                            Err(e) => Err(e.to_string()),
                        }
                    }
                    (None, _) => Err(format!("no checked definition named `{}`", a.lhs)),
                    (_, None) => Err(format!("no checked definition named `{}`", a.rhs)),
                };
                let result = result.map_err(|m| located(file, Some(&a.span), &m));
                report.push(ReportItem::from_result(name, result));
            }
        }
    }
    CheckedFile { signature: sig, report, errors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::ErrorKind;
    use crate::parser::parse_file;

    #[test]
    fn reused_variable_is_reported_with_location() {
        let src = "type A.\ndef dup : A -o A * A := lam (x : A) x (*) x.\n";
        let out = check_file(&parse_file(src, Some("reuse.ildtt")).unwrap(), 10_000);
        assert_eq!(out.report.exit_code(), 1);
        assert_eq!(out.errors[0].kind, ErrorKind::LinearReused);
        let details = &out.report.items[0].details;
        assert!(details.starts_with("reuse.ildtt:2:"), "{details}");
        assert!(details.contains("linear variable reused: x"), "{details}");
    }

    #[test]
    fn definitions_accumulate_and_asserts_use_equality() {
        let src = "type A.\n\
            def id : A -o A := lam (x : A) x.\n\
            def id2 : A -o A := lam (y : A) id y.\n\
            def sw : A * A -o A * A := lam (p : A * A) let p be x (*) y in y (*) x.\n\
            assert id == id2.\n\
            assert id == sw.\n";
        let out = check_file(&parse_file(src, None).unwrap(), 10_000);
        let status: Vec<bool> = out.report.items.iter().map(|i| i.passed()).collect();
        assert_eq!(status, vec![true, true, true, true, false]);
        assert!(out.signature.def("id2").is_some());
    }
}
