//! Lexer and recursive-descent parser for `.ildtt` source files.

use crate::syntax::*;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Num(s) => write!(f, "`{s}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const SYMBOLS: &[&str] = &[
    "(*)", ":=", "==", "=>", "->", "-o", "||", "(", ")", "{", "}", "[", "]", "<", ">", ",", ".", ":", "!", "*", "&", "+",
    "|",
];

const KEYWORDS: &[&str] = &[
    "type", "const", "model", "def", "assert", "let", "be", "in", "lam", "bang", "refl", "case", "of", "inl", "inr", "if",
    "then", "else", "fst", "snd", "star", "unit", "tt", "ff", "false", "with", "over", "pointed", "family", "Sig", "Pi",
    "Id", "I", "Top",
];

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}:{line}:{col}: {message}{}", file.as_deref().unwrap_or("<input>"), expected_suffix(expected))]
pub struct ParseError {
    pub file: Option<String>,
    pub offset: usize,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(" or "))
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, (usize, String)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = text[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        if text[i..].starts_with("--") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() {
                let d = text[i..].chars().next().expect("in bounds");
                if d.is_alphanumeric() || d == '_' || d == '\'' {
                    i += d.len_utf8();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(text[start..i].to_string()), start, end: i });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token { tok: Tok::Num(text[start..i].to_string()), start, end: i });
            continue;
        }
        for s in SYMBOLS {
            if text[i..].starts_with(s) {
                out.push(Token { tok: Tok::Sym(s), start: i, end: i + s.len() });
                i += s.len();
                continue 'outer;
            }
        }
        return Err((i, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, start: text.len(), end: text.len() });
    Ok(out)
}

/// A top-level definition as written.
#[derive(Clone, Debug, PartialEq)]
pub struct DefItem {
    pub name: Name,
    pub ty: Option<TypeExpr>,
    pub term: TermExpr,
    pub span: SourceSpan,
    pub spans: SpanTree,
}

/// `assert a == b.`: the two named definitions are judgementally equal.
#[derive(Clone, Debug, PartialEq)]
pub struct AssertItem {
    pub lhs: Name,
    pub rhs: Name,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Def(DefItem),
    Assert(AssertItem),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedFile {
    pub file: Option<String>,
    pub text: String,
    /// Type, constant and model declarations. Definitions are added by the
    /// checker once their bodies are elaborated.
    pub signature: Signature,
    pub items: Vec<Item>,
    /// Spans of declarations, keyed by name.
    pub decl_spans: Vec<(Name, SourceSpan)>,
}

struct Parser<'a> {
    file: Option<String>,
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
    sig: Signature,
    defs: BTreeSet<Name>,
    scope: Vec<(Name, VarKind)>,
}

type PResult<T> = Result<T, ParseError>;

/// Parse a whole source file.
pub fn parse_file(text: &str, file: Option<&str>) -> PResult<ParsedFile> {
    let mut p = Parser::new(text, file, Signature::default(), &[])?;
    let mut items = Vec::new();
    let mut decl_spans = Vec::new();
    while p.peek() != &Tok::Eof {
        let start = p.here();
        let kw = p.keyword_here();
        match kw.as_deref() {
            Some("type") => {
                p.bump();
                let name = p.ident()?;
                let params = p.telescope()?;
                p.expect(".")?;
                p.declare_fresh(&name, start)?;
                p.sig.types.push(TypeDecl { name: name.clone(), params });
                decl_spans.push((name, p.span_from(start)));
            }
            Some("const") => {
                p.bump();
                let name = p.ident()?;
                let params = p.telescope()?;
                p.expect(":")?;
                let saved = p.scope.len();
                for (x, _) in &params {
                    p.scope.push((x.clone(), VarKind::Int));
                }
                let ty = p.ty()?;
                p.scope.truncate(saved);
                p.expect(".")?;
                p.declare_fresh(&name, start)?;
                p.sig.consts.push(ConstDecl { name: name.clone(), params, ty });
                decl_spans.push((name, p.span_from(start)));
            }
            Some("model") => {
                p.bump();
                let name = p.ident()?;
                p.expect(":=")?;
                let binding = p.model_binding(true)?;
                p.expect(".")?;
                p.sig.bind_model(&name, binding);
            }
            Some("def") => {
                p.bump();
                let name = p.ident()?;
                let ty = if p.eat(":") { Some(p.ty()?) } else { None };
                p.expect(":=")?;
                let (term, spans) = p.term()?;
                p.expect(".")?;
                p.declare_fresh(&name, start)?;
                p.defs.insert(name.clone());
                items.push(Item::Def(DefItem { name, ty, term, span: p.span_from(start), spans }));
            }
            Some("assert") => {
                p.bump();
                let lhs = p.ident()?;
                p.expect("==")?;
                let rhs = p.ident()?;
                p.expect(".")?;
                items.push(Item::Assert(AssertItem { lhs, rhs, span: p.span_from(start) }));
            }
            _ => return Err(p.error_expected("a declaration", &["type", "const", "model", "def", "assert"])),
        }
    }
    Ok(ParsedFile { file: file.map(str::to_string), text: text.to_string(), signature: p.sig, items, decl_spans })
}

/// Parse a single term. Identifiers bound in `scope` resolve to variables of
/// the given kind; names declared in `sig` resolve to constants.
pub fn parse_term(text: &str, sig: &Signature, scope: &[(Name, VarKind)]) -> PResult<(TermExpr, SpanTree)> {
    let mut p = Parser::new(text, None, sig.clone(), scope)?;
    let t = p.term()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a single type.
pub fn parse_type(text: &str, sig: &Signature, scope: &[Name]) -> PResult<TypeExpr> {
    let scope: Vec<(Name, VarKind)> = scope.iter().map(|x| (x.clone(), VarKind::Int)).collect();
    let mut p = Parser::new(text, None, sig.clone(), &scope)?;
    let t = p.ty()?;
    p.expect_eof()?;
    Ok(t)
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, file: Option<&str>, sig: Signature, scope: &[(Name, VarKind)]) -> PResult<Parser<'a>> {
        let toks = lex(text).map_err(|(offset, message)| {
            let (line, col) = line_col(text, offset);
            ParseError { file: file.map(str::to_string), offset, line, col, message, expected: vec![] }
        })?;
        let defs = sig.defs.iter().map(|d| d.name.clone()).collect();
        Ok(Parser { file: file.map(str::to_string), text, toks, pos: 0, sig, defs, scope: scope.to_vec() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> usize {
        self.toks[self.pos].start
    }

    fn last_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].end
        }
    }

    fn span_from(&self, start: usize) -> SourceSpan {
        SourceSpan::new(self.file.clone(), start, self.last_end().max(start))
    }

    fn bump(&mut self) {
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn keyword_here(&self) -> Option<String> {
        match self.peek() {
            Tok::Ident(t) if KEYWORDS.contains(&t.as_str()) => Some(t.clone()),
            _ => None,
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_expected(&self, what: &str, expected: &[&str]) -> ParseError {
        let offset = self.here();
        let (line, col) = line_col(self.text, offset);
        ParseError {
            file: self.file.clone(),
            offset,
            line,
            col,
            message: format!("syntax error: expected {what}, found {}", self.peek()),
            expected: expected.iter().map(|s| format!("`{s}`")).collect(),
        }
    }

    fn error_at(&self, offset: usize, message: String) -> ParseError {
        let (line, col) = line_col(self.text, offset);
        ParseError { file: self.file.clone(), offset, line, col, message, expected: vec![] }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error_expected(&format!("`{s}`"), &[s]))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error_expected(&format!("`{k}`"), &[k]))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if self.peek() == &Tok::Eof {
            Ok(())
        } else {
            Err(self.error_expected("end of input", &[]))
        }
    }

    fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error_expected("an identifier", &[])),
        }
    }

    fn label(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) | Tok::Num(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error_expected("a label", &[])),
        }
    }

    fn declare_fresh(&self, name: &str, at: usize) -> PResult<()> {
        if self.sig.is_declared(name) || self.defs.contains(name) {
            Err(self.error_at(at, format!("name `{name}` is declared twice")))
        } else {
            Ok(())
        }
    }

    /// `(x : A) (y : B) ...` with each parameter in scope for the next.
    fn telescope(&mut self) -> PResult<Vec<(Name, TypeExpr)>> {
        let saved = self.scope.len();
        let mut params = Vec::new();
        while self.is_sym("(") {
            self.bump();
            let x = self.ident()?;
            self.expect(":")?;
            let ty = self.ty()?;
            self.expect(")")?;
            self.scope.push((x.clone(), VarKind::Int));
            params.push((x, ty));
        }
        self.scope.truncate(saved);
        Ok(params)
    }

    fn model_binding(&mut self, top: bool) -> PResult<ModelBinding> {
        if self.eat_kw("pointed") {
            self.expect("{")?;
            let mut base = None;
            let mut others = Vec::new();
            loop {
                let start = self.here();
                let l = self.label()?;
                if self.eat("*") {
                    if base.is_some() {
                        return Err(self.error_at(start, "pointed set has two basepoints".into()));
                    }
                    base = Some(l);
                } else {
                    others.push(l);
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
            let base = base.ok_or_else(|| self.error_at(self.last_end(), "pointed set has no basepoint (mark one with `*`)".into()))?;
            let mut seen = BTreeSet::new();
            for l in std::iter::once(&base).chain(others.iter()) {
                if !seen.insert(l.clone()) {
                    return Err(self.error_at(self.last_end(), format!("duplicate label `{l}`")));
                }
            }
            return Ok(ModelBinding::Pointed { base, others });
        }
        if top && self.eat_kw("family") {
            self.expect("{")?;
            let mut entries = Vec::new();
            if !self.is_sym("}") {
                loop {
                    let key = self.model_key()?;
                    self.expect("=>")?;
                    let value = self.model_binding(false)?;
                    entries.push((key, value));
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect("}")?;
            return Ok(ModelBinding::Family(entries));
        }
        Ok(ModelBinding::Label(self.label()?))
    }

    fn model_key(&mut self) -> PResult<Vec<TermExpr>> {
        if self.is_sym("(") && self.comma_in_group() {
            self.bump();
            let mut ks = vec![self.term()?.0];
            while self.eat(",") {
                ks.push(self.term()?.0);
            }
            self.expect(")")?;
            Ok(ks)
        } else {
            Ok(vec![self.app()?.0])
        }
    }

    /// Whether the bracketed group starting at the current `(` has a comma
    /// at its top level.
    fn comma_in_group(&self) -> bool {
        let mut depth = 0usize;
        let mut k = self.pos;
        while k < self.toks.len() {
            match &self.toks[k].tok {
                Tok::Sym("(") | Tok::Sym("[") | Tok::Sym("{") | Tok::Sym("<") => depth += 1,
                Tok::Sym(")") | Tok::Sym("]") | Tok::Sym("}") | Tok::Sym(">") => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Sym(",") if depth == 1 => return true,
                Tok::Eof => return false,
                _ => {}
            }
            k += 1;
        }
        false
    }

    fn lookup(&self, x: &str) -> Option<VarKind> {
        self.scope.iter().rev().find(|(n, _)| n == x).map(|(_, k)| *k)
    }

    fn with_binders<T>(&mut self, bs: &[(Name, VarKind)], f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let saved = self.scope.len();
        self.scope.extend(bs.iter().cloned());
        let r = f(self);
        self.scope.truncate(saved);
        r
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<TypeExpr> {
        for (kw, is_sigma) in [("Sig", true), ("Pi", false)] {
            if self.eat_kw(kw) {
                self.expect("(")?;
                self.expect("!")?;
                let x = self.ident()?;
                self.expect(":")?;
                self.expect("!")?;
                let dom = self.ty()?;
                self.expect(")")?;
                let body = self.with_binders(&[(x.clone(), VarKind::Int)], |p| p.ty())?;
                let (dom, body) = (Box::new(dom), Box::new(body));
                return Ok(if is_sigma {
                    TypeExpr::Sigma { var: x, dom, body }
                } else {
                    TypeExpr::Pi { var: x, dom, body }
                });
            }
        }
        let lhs = self.ty_plus()?;
        if self.eat("-o") {
            let rhs = self.ty()?;
            return Ok(TypeExpr::Lolli(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn ty_plus(&mut self) -> PResult<TypeExpr> {
        let mut t = self.ty_with()?;
        while self.eat("+") {
            t = TypeExpr::Plus(Box::new(t), Box::new(self.ty_with()?));
        }
        Ok(t)
    }

    fn ty_with(&mut self) -> PResult<TypeExpr> {
        let mut t = self.ty_tensor()?;
        while self.eat("&") {
            t = TypeExpr::With(Box::new(t), Box::new(self.ty_tensor()?));
        }
        Ok(t)
    }

    fn ty_tensor(&mut self) -> PResult<TypeExpr> {
        let mut t = self.ty_bang()?;
        while self.eat("*") {
            t = TypeExpr::Tensor(Box::new(t), Box::new(self.ty_bang()?));
        }
        Ok(t)
    }

    fn ty_bang(&mut self) -> PResult<TypeExpr> {
        if self.eat("!") {
            return Ok(TypeExpr::Bang(Box::new(self.ty_bang()?)));
        }
        self.ty_atom()
    }

    /// The domain of `Id !A (a, a')`: a base name here takes no arguments.
    fn id_dom(&mut self) -> PResult<TypeExpr> {
        if self.eat("!") {
            return Ok(TypeExpr::Bang(Box::new(self.id_dom()?)));
        }
        match self.peek().clone() {
            Tok::Ident(k) if !KEYWORDS.contains(&k.as_str()) => {
                self.bump();
                Ok(TypeExpr::Base { name: k, args: vec![] })
            }
            _ => self.ty_atom(),
        }
    }

    fn ty_atom(&mut self) -> PResult<TypeExpr> {
        match self.peek().clone() {
            Tok::Num(n) if n == "0" => {
                self.bump();
                Ok(TypeExpr::Zero)
            }
            Tok::Num(n) if n == "2" => {
                self.bump();
                Ok(TypeExpr::Two)
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.ty()?;
                self.expect(")")?;
                Ok(t)
            }
            Tok::Ident(k) if k == "I" => {
                self.bump();
                Ok(TypeExpr::Unit)
            }
            Tok::Ident(k) if k == "Top" => {
                self.bump();
                Ok(TypeExpr::Top)
            }
            Tok::Ident(k) if k == "Id" => {
                self.bump();
                self.expect("!")?;
                let dom = self.id_dom()?;
                self.expect("(")?;
                let lhs = self.term()?.0;
                self.expect(",")?;
                let rhs = self.term()?.0;
                self.expect(")")?;
                Ok(TypeExpr::Id { dom: Box::new(dom), lhs: Box::new(lhs), rhs: Box::new(rhs) })
            }
            Tok::Ident(k) if !KEYWORDS.contains(&k.as_str()) => {
                self.bump();
                let mut args = Vec::new();
                if self.eat("(") {
                    loop {
                        args.push(self.term()?.0);
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect(")")?;
                }
                Ok(TypeExpr::Base { name: k, args })
            }
            _ => Err(self.error_expected("a type", &["I", "Top", "0", "2", "(", "!", "Id", "Sig", "Pi"])),
        }
    }

    // ---- terms ----

    fn node(&self, start: usize, children: Vec<SpanTree>) -> SpanTree {
        SpanTree { span: self.span_from(start), children }
    }

    fn term(&mut self) -> PResult<(TermExpr, SpanTree)> {
        let start = self.here();
        if self.eat_kw("lam") {
            self.expect("(")?;
            let bang = self.eat("!");
            let x = self.ident()?;
            self.expect(":")?;
            if bang {
                self.expect("!")?;
            }
            let ty = self.ty()?;
            self.expect(")")?;
            let kind = if bang { VarKind::Int } else { VarKind::Lin };
            let (body, bs) = self.with_binders(&[(x.clone(), kind)], |p| p.term())?;
            let t = if bang {
                TermExpr::PiLam { var: x, dom: Box::new(ty), body: Box::new(body) }
            } else {
                TermExpr::Lam { var: x, ty: Box::new(ty), body: Box::new(body) }
            };
            return Ok((t, self.node(start, vec![bs])));
        }
        if self.is_kw("let") {
            return self.let_form();
        }
        if self.eat_kw("case") {
            let (scrut, ss) = self.term()?;
            self.expect_kw("of")?;
            self.expect_kw("inl")?;
            let x = self.ident()?;
            self.expect("->")?;
            let (l, ls) = self.with_binders(&[(x.clone(), VarKind::Lin)], |p| p.term())?;
            self.expect("||")?;
            self.expect_kw("inr")?;
            let y = self.ident()?;
            self.expect("->")?;
            let (r, rs) = self.with_binders(&[(y.clone(), VarKind::Lin)], |p| p.term())?;
            let t = TermExpr::Case {
                scrut: Box::new(scrut),
                left: x,
                on_left: Box::new(l),
                right: y,
                on_right: Box::new(r),
                ann: None,
            };
            return Ok((t, self.node(start, vec![ss, ls, rs])));
        }
        if self.eat_kw("if") {
            self.expect("[")?;
            let x = self.ident()?;
            self.expect(".")?;
            let mty = self.with_binders(&[(x.clone(), VarKind::Int)], |p| p.ty())?;
            self.expect("]")?;
            let (s, ss) = self.term()?;
            self.expect_kw("then")?;
            let (a, as_) = self.term()?;
            self.expect_kw("else")?;
            let (b, bs) = self.term()?;
            let t = TermExpr::If {
                motive: Motive { var: x, ty: Box::new(mty) },
                scrut: Box::new(s),
                then_branch: Box::new(a),
                else_branch: Box::new(b),
            };
            return Ok((t, self.node(start, vec![ss, as_, bs])));
        }
        self.tensor()
    }

    fn let_form(&mut self) -> PResult<(TermExpr, SpanTree)> {
        let start = self.here();
        self.expect_kw("let")?;
        if self.is_sym("(") && self.comma_in_group() {
            return self.let_id(start);
        }
        let (scrut, ss) = self.term()?;
        self.expect_kw("be")?;
        let scrut = Box::new(scrut);
        if self.eat("*") {
            self.expect_kw("in")?;
            let (body, bs) = self.term()?;
            return Ok((TermExpr::LetStar { scrut, body: Box::new(body), ann: None }, self.node(start, vec![ss, bs])));
        }
        if self.eat("!") {
            let x = self.ident()?;
            if self.eat("(*)") {
                let y = self.ident()?;
                self.expect_kw("in")?;
                let (body, bs) =
                    self.with_binders(&[(x.clone(), VarKind::Int), (y.clone(), VarKind::Lin)], |p| p.term())?;
                let t = TermExpr::LetSigma { scrut, fst: x, snd: y, body: Box::new(body), ann: None };
                return Ok((t, self.node(start, vec![ss, bs])));
            }
            self.expect_kw("in")?;
            let (body, bs) = self.with_binders(&[(x.clone(), VarKind::Int)], |p| p.term())?;
            let t = TermExpr::LetBang { scrut, var: x, body: Box::new(body), ann: None };
            return Ok((t, self.node(start, vec![ss, bs])));
        }
        let x = self.ident()?;
        self.expect("(*)")?;
        let y = self.ident()?;
        if x == y {
            return Err(self.error_at(start, format!("pattern binds `{x}` twice")));
        }
        self.expect_kw("in")?;
        let (body, bs) = self.with_binders(&[(x.clone(), VarKind::Lin), (y.clone(), VarKind::Lin)], |p| p.term())?;
        let t = TermExpr::LetTensor { scrut, left: x, right: y, body: Box::new(body), ann: None };
        Ok((t, self.node(start, vec![ss, bs])))
    }

    fn let_id(&mut self, start: usize) -> PResult<(TermExpr, SpanTree)> {
        self.expect("(")?;
        let (lhs, ls) = self.term()?;
        self.expect(",")?;
        let (rhs, rs) = self.term()?;
        self.expect(",")?;
        let (proof, ps) = self.term()?;
        self.expect(")")?;
        self.expect_kw("be")?;
        self.expect("(")?;
        let z = self.ident()?;
        self.expect(",")?;
        let z2 = self.ident()?;
        self.expect(",")?;
        self.expect_kw("refl")?;
        self.expect("!")?;
        let z3 = self.ident()?;
        self.expect(")")?;
        if z != z2 || z != z3 {
            return Err(self.error_at(start, "identity pattern must read `(z, z, refl !z)`".into()));
        }
        self.expect_kw("in")?;
        let (body, bs) = self.with_binders(&[(z.clone(), VarKind::Int)], |p| p.term())?;
        self.expect_kw("with")?;
        self.expect("[")?;
        let x = self.ident()?;
        self.expect(",")?;
        let x2 = self.ident()?;
        self.expect(".")?;
        let d = self.with_binders(&[(x.clone(), VarKind::Int), (x2.clone(), VarKind::Int)], |p| p.ty())?;
        self.expect("]")?;
        let mut generic = Vec::new();
        if self.eat_kw("over") {
            loop {
                self.expect("(")?;
                let y = self.ident()?;
                self.expect(":")?;
                let ty = self.with_binders(&[(z.clone(), VarKind::Int)], |p| p.ty())?;
                self.expect(")")?;
                generic.push((y, ty));
                if !self.eat(",") {
                    break;
                }
            }
        }
        let t = TermExpr::LetId {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            proof: Box::new(proof),
            var: z,
            body: Box::new(body),
            motive: IdMotive { left: x, right: x2, ty: Box::new(d) },
            generic,
        };
        Ok((t, self.node(start, vec![ls, rs, ps, bs])))
    }

    fn tensor(&mut self) -> PResult<(TermExpr, SpanTree)> {
        let start = self.here();
        let (mut t, mut s) = self.app()?;
        while self.eat("(*)") {
            let (r, rs) = self.app()?;
            t = TermExpr::TensorPair(Box::new(t), Box::new(r));
            s = self.node(start, vec![s, rs]);
        }
        Ok((t, s))
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(k) => !KEYWORDS.contains(&k.as_str()) || ["star", "unit", "tt", "ff"].contains(&k.as_str()),
            Tok::Sym("(") | Tok::Sym("<") => true,
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<(TermExpr, SpanTree)> {
        let start = self.here();
        let (mut t, mut s) = self.head()?;
        loop {
            if self.is_sym("!") {
                self.bump();
                let (a, as_) = self.atom()?;
                t = TermExpr::PiApp(Box::new(t), Box::new(a));
                s = self.node(start, vec![s, as_]);
            } else if self.starts_atom() {
                let (a, as_) = self.atom()?;
                t = TermExpr::App(Box::new(t), Box::new(a));
                s = self.node(start, vec![s, as_]);
            } else {
                return Ok((t, s));
            }
        }
    }

    fn head(&mut self) -> PResult<(TermExpr, SpanTree)> {
        let start = self.here();
        let kw = self.keyword_here();
        let unary: Option<fn(Box<TermExpr>) -> TermExpr> = match kw.as_deref() {
            Some("bang") => Some(TermExpr::BangIntro),
            Some("fst") => Some(TermExpr::Fst),
            Some("snd") => Some(TermExpr::Snd),
            Some("inl") => Some(|a| TermExpr::Inl { arg: a, ann: None }),
            Some("inr") => Some(|a| TermExpr::Inr { arg: a, ann: None }),
            Some("false") => Some(|a| TermExpr::False { scrut: a, ann: None }),
            Some("refl") => Some(TermExpr::Refl),
            _ => None,
        };
        match unary {
            Some(mk) => {
                self.bump();
                if kw.as_deref() == Some("refl") {
                    self.expect("!")?;
                }
                let (a, s) = self.atom()?;
                Ok((mk(Box::new(a)), self.node(start, vec![s])))
            }
            None => self.atom(),
        }
    }

    fn atom(&mut self) -> PResult<(TermExpr, SpanTree)> {
        let start = self.here();
        match self.peek().clone() {
            Tok::Sym("(") => {
                self.bump();
                let (t, s) = self.term()?;
                self.expect(")")?;
                // Parentheses do not get their own node.
                Ok((t, SpanTree { span: self.span_from(start), children: s.children }))
            }
            Tok::Sym("<") => {
                self.bump();
                let (a, as_) = self.term()?;
                self.expect(",")?;
                let (b, bs) = self.term()?;
                self.expect(">")?;
                Ok((TermExpr::WithPair(Box::new(a), Box::new(b)), self.node(start, vec![as_, bs])))
            }
            Tok::Ident(k) => {
                let leaf = match k.as_str() {
                    "star" => Some(TermExpr::Star),
                    "unit" => Some(TermExpr::UnitTop),
                    "tt" => Some(TermExpr::TT),
                    "ff" => Some(TermExpr::FF),
                    _ => None,
                };
                if let Some(t) = leaf {
                    self.bump();
                    return Ok((t, self.node(start, vec![])));
                }
                let x = self.ident()?;
                if let Some(kind) = self.lookup(&x) {
                    let t = match kind {
                        VarKind::Int => TermExpr::IntVar(x),
                        VarKind::Lin => TermExpr::LinVar(x),
                    };
                    return Ok((t, self.node(start, vec![])));
                }
                let arity = self.sig.const_decl(&x).map(|c| c.params.len());
                if arity.is_some() || self.defs.contains(&x) {
                    let mut args = Vec::new();
                    let mut spans = Vec::new();
                    if arity.unwrap_or(0) > 0 {
                        self.expect("(")?;
                        loop {
                            let (a, s) = self.term()?;
                            args.push(a);
                            spans.push(s);
                            if !self.eat(",") {
                                break;
                            }
                        }
                        self.expect(")")?;
                    }
                    return Ok((TermExpr::Const { name: x, args }, self.node(start, spans)));
                }
                Ok((TermExpr::IntVar(x), self.node(start, vec![])))
            }
            _ => Err(self.error_expected("a term", &["(", "<", "star", "unit", "tt", "ff", "identifier"])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_lambda_binds_linear_variable() {
        let f = parse_file("type A.\ndef id := lam (x : A) x.", None).unwrap();
        match &f.items[0] {
            Item::Def(d) => {
                assert_eq!(
                    d.term,
                    TermExpr::Lam { var: "x".into(), ty: Box::new(TypeExpr::base("A")), body: Box::new(TermExpr::lin("x")) }
                );
                assert_eq!(d.spans.children.len(), 1);
            }
            _ => panic!("expected a def"),
        }
    }

    #[test]
    fn star_definition() {
        let f = parse_file("def u := star.", None).unwrap();
        assert!(matches!(&f.items[0], Item::Def(d) if d.term == TermExpr::Star));
    }

    #[test]
    fn unterminated_input_reports_end() {
        let text = "def f := lam (x";
        let e = parse_file(text, None).unwrap_err();
        assert_eq!(e.offset, text.len());
        assert!(e.message.contains("end of input"), "{}", e.message);
        assert_eq!((e.line, e.col), (1, 16));
    }

    #[test]
    fn comments_and_declarations() {
        let src = "-- a comment\ntype A.\ntype B (x : A).\nconst c : A.\nmodel A := pointed { a0*, a1, a2 }.\nmodel c := a1.\n";
        let f = parse_file(src, Some("t.ildtt")).unwrap();
        assert_eq!(f.signature.types.len(), 2);
        assert_eq!(f.signature.types[1].params.len(), 1);
        assert_eq!(
            f.signature.model("A"),
            Some(&ModelBinding::Pointed { base: "a0".into(), others: vec!["a1".into(), "a2".into()] })
        );
        assert_eq!(f.signature.model("c"), Some(&ModelBinding::Label("a1".into())));
    }

    #[test]
    fn dependent_forms_parse() {
        let sig = parse_file("type A.", None).unwrap().signature;
        let (t, _) = parse_term("lam (!x : !A) bang x (*) star", &sig, &[]).unwrap();
        assert!(matches!(t, TermExpr::PiLam { .. }));
        let ty = parse_type("Pi (!x : !A) Sig (!y : !A) I", &sig, &[]).unwrap();
        assert!(matches!(ty, TypeExpr::Pi { .. }));
        let (t, _) = parse_term(
            "lam (!a : !A) lam (!b : !A) lam (p : Id !A (a, b)) let (a, b, p) be (z, z, refl !z) in refl !z with [u, v . Id !A (u, v)]",
            &sig,
            &[],
        )
        .unwrap();
        assert!(t.free_vars().int.is_empty() && t.free_vars().lin.is_empty());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        assert!(parse_file("type A. type A.", None).is_err());
    }
}
