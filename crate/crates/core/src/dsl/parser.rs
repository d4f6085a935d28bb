use std::collections::{BTreeMap, BTreeSet};

use super::{
    AdjacencyOp, AdjacencyStmt, EventStmt, KindStmt, ObjectStmt, ParseDiagnostic, Pos, Scenario,
    Severity, Spanned, SubQuantityStmt, TransferStmt,
};
use crate::event::NewQuantity;
use crate::ids::{KindName, ObjectId, TimePoint};
use crate::model::KindMeta;

const KEYWORDS: &[&str] = &[
    "quantity-kind",
    "object-kind",
    "object",
    "quantity",
    "connect",
    "disconnect",
    "subquantity",
    "event",
    "requires",
    "at",
    "granules",
    "of",
    "donor",
    "create",
    "discard",
];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Colon,
    Comma,
    Semi,
    LBrace,
    RBrace,
    Newline,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Semi => "`;`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of file".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

fn diag(lines: &[&str], pos: Pos, message: impl Into<String>) -> ParseDiagnostic {
    let snippet = lines
        .get(pos.line.saturating_sub(1) as usize)
        .map(|l| l.trim_end_matches('\r').to_owned())
        .unwrap_or_default();
    ParseDiagnostic {
        line: pos.line,
        column: pos.column,
        severity: Severity::Error,
        message: message.into(),
        snippet,
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn lex(src: &str, lines: &[&str], diags: &mut Vec<ParseDiagnostic>) -> Vec<Token> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1u32, 1u32);
    while let Some(c) = chars.next() {
        let pos = Pos { line, column };
        column += 1;
        let tok = match c {
            '\n' => {
                line += 1;
                column = 1;
                Tok::Newline
            }
            ' ' | '\t' | '\r' => continue,
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                    column += 1;
                }
                continue;
            }
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            c if is_word_char(c) => {
                let mut word = String::from(c);
                while let Some(&next) = chars.peek().filter(|&&n| is_word_char(n)) {
                    word.push(next);
                    chars.next();
                    column += 1;
                }
                Tok::Word(word)
            }
            other => {
                diags.push(diag(lines, pos, format!("unexpected character `{other}`")));
                continue;
            }
        };
        toks.push(Token { tok, pos });
    }
    toks.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, column },
    });
    toks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum RefKind {
    ObjectKind,
    QuantityKind,
    Object,
    Quantity,
}

struct Parser<'s> {
    toks: Vec<Token>,
    i: usize,
    lines: Vec<&'s str>,
    depth: i32,
    last: Option<Pos>,
    refs: Vec<(RefKind, String, Pos)>,
    scenario: Scenario,
}

type PResult<T> = Result<T, ParseDiagnostic>;

impl<'s> Parser<'s> {
    fn peek(&self) -> &Token {
        &self.toks[self.i]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        match t.tok {
            Tok::LBrace => self.depth += 1,
            Tok::RBrace => self.depth -= 1,
            Tok::Eof => return t,
            _ => {}
        }
        self.i += 1;
        self.last = Some(t.pos);
        t
    }

    /// A diagnostic for a missing `what`. When the line ends early the
    /// position is that of the last token read, otherwise the offending token.
    fn expected(&self, what: &str) -> ParseDiagnostic {
        let here = self.peek();
        match (&here.tok, self.last) {
            (Tok::Newline | Tok::Eof, Some(last)) => diag(
                &self.lines,
                last,
                format!("expected {what} before {}", here.tok.describe()),
            ),
            _ => diag(
                &self.lines,
                here.pos,
                format!("expected {what}, found {}", here.tok.describe()),
            ),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Pos> {
        if self.peek().tok == tok {
            Ok(self.bump().pos)
        } else {
            Err(self.expected(what))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        match &self.peek().tok {
            Tok::Word(w) if w == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.expected(&format!("`{kw}`"))),
        }
    }

    fn expect_name(&mut self, what: &str) -> PResult<(String, Pos)> {
        let Tok::Word(w) = &self.peek().tok else {
            return Err(self.expected(what));
        };
        let pos = self.peek().pos;
        let valid = w.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
            && !w.contains('-')
            && !KEYWORDS.contains(&w.as_str());
        if !valid {
            let msg = if KEYWORDS.contains(&w.as_str()) {
                format!("expected {what}, found keyword `{w}`")
            } else {
                format!("`{w}` is not a valid name (letters, digits and `_`, not starting with a digit)")
            };
            return Err(diag(&self.lines, pos, msg));
        }
        let w = w.clone();
        self.bump();
        Ok((w, pos))
    }

    fn reference(&mut self, kind: RefKind, what: &str) -> PResult<String> {
        let (name, pos) = self.expect_name(what)?;
        self.refs.push((kind, name.clone(), pos));
        Ok(name)
    }

    fn expect_time(&mut self) -> PResult<TimePoint> {
        let tok = self.peek().clone();
        let Tok::Word(w) = &tok.tok else {
            return Err(self.expected("a time point `tN`"));
        };
        let parsed = w
            .strip_prefix('t')
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
            .map(|d| d.parse::<u64>());
        match parsed {
            Some(Ok(n)) => {
                self.bump();
                Ok(TimePoint(n))
            }
            Some(Err(_)) => Err(diag(
                &self.lines,
                tok.pos,
                format!("time point `{w}` is out of range"),
            )),
            None => Err(diag(
                &self.lines,
                tok.pos,
                format!("expected a time point `tN`, found `{w}`"),
            )),
        }
    }

    fn skip_newlines(&mut self) {
        while self.peek().tok == Tok::Newline {
            self.bump();
        }
    }

    /// `{ NAME (, NAME)* }`, newlines allowed inside the braces.
    fn name_list(&mut self, kind: RefKind, what: &str, allow_empty: bool) -> PResult<Vec<String>> {
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut names = Vec::new();
        self.skip_newlines();
        if self.peek().tok == Tok::RBrace {
            self.bump();
            if !allow_empty {
                return Err(diag(
                    &self.lines,
                    open,
                    "expected at least one name between the braces",
                ));
            }
            return Ok(names);
        }
        loop {
            self.skip_newlines();
            names.push(self.reference(kind, what)?);
            self.skip_newlines();
            if self.eat(&Tok::Comma) {
                continue;
            }
            if self.eat(&Tok::RBrace) {
                return Ok(names);
            }
            return Err(self.expected("`,` or `}`"));
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek().tok {
            Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::Eof => Ok(()),
            ref other => Err(diag(
                &self.lines,
                self.peek().pos,
                format!("unexpected {} after statement", other.describe()),
            )),
        }
    }

    fn statement(&mut self) -> PResult<()> {
        let start = self.peek().clone();
        let Tok::Word(head) = &start.tok else {
            return Err(diag(
                &self.lines,
                start.pos,
                format!("expected a statement, found {}", start.tok.describe()),
            ));
        };
        let pos = start.pos;
        match head.as_str() {
            "quantity-kind" | "object-kind" => {
                let meta = if head == "object-kind" {
                    KindMeta::ObjectKind
                } else {
                    KindMeta::QuantityKind
                };
                self.bump();
                let (name, _) = self.expect_name("a kind name")?;
                let mut requires = Vec::new();
                if meta == KindMeta::QuantityKind {
                    if let Tok::Word(w) = &self.peek().tok {
                        if w == "requires" {
                            self.bump();
                            loop {
                                requires.push(KindName::new(
                                    self.reference(RefKind::ObjectKind, "an object kind name")?,
                                ));
                                if !self.eat(&Tok::Comma) {
                                    break;
                                }
                            }
                        }
                    }
                }
                self.scenario.kinds.push(Spanned {
                    pos,
                    node: KindStmt {
                        name: name.into(),
                        meta,
                        requires,
                    },
                });
            }
            "object" => {
                self.bump();
                let (id, _) = self.expect_name("an object name")?;
                self.expect(Tok::Colon, "`:`")?;
                let kind = self.reference(RefKind::ObjectKind, "a kind name after `:`")?;
                let at = if matches!(&self.peek().tok, Tok::Word(w) if w == "at") {
                    self.bump();
                    Some(self.expect_time()?)
                } else {
                    None
                };
                self.scenario.objects.push(Spanned {
                    pos,
                    node: ObjectStmt {
                        id: id.into(),
                        kind: kind.into(),
                        at,
                    },
                });
            }
            "quantity" => {
                self.bump();
                let (id, _) = self.expect_name("a quantity name")?;
                self.expect(Tok::Colon, "`:`")?;
                let kind = self.reference(RefKind::QuantityKind, "a kind name after `:`")?;
                self.expect_keyword("at")?;
                let at = self.expect_time()?;
                self.expect_keyword("granules")?;
                let granules = self.name_list(RefKind::Object, "an object name", false)?;
                self.scenario.events.push(Spanned {
                    pos,
                    node: EventStmt::Creation {
                        quantity: NewQuantity::new(id, kind, granules),
                        at,
                    },
                });
            }
            "connect" | "disconnect" => {
                let op = if head == "connect" {
                    AdjacencyOp::Connect
                } else {
                    AdjacencyOp::Disconnect
                };
                self.bump();
                let a = self.reference(RefKind::Object, "an object name")?;
                let b = self.reference(RefKind::Object, "a second object name")?;
                self.expect_keyword("at")?;
                let at = self.expect_time()?;
                self.scenario.adjacency.push(Spanned {
                    pos,
                    node: AdjacencyStmt {
                        op,
                        a: a.into(),
                        b: b.into(),
                        at,
                    },
                });
            }
            "subquantity" => {
                self.bump();
                let part = self.reference(RefKind::Quantity, "a quantity name")?;
                self.expect_keyword("of")?;
                let whole = self.reference(RefKind::Quantity, "a quantity name after `of`")?;
                self.scenario.subquantities.push(Spanned {
                    pos,
                    node: SubQuantityStmt {
                        part: part.into(),
                        whole: whole.into(),
                    },
                });
            }
            "event" => {
                self.bump();
                let transfer = self.event_body()?;
                self.scenario.events.push(Spanned {
                    pos,
                    node: EventStmt::Transfer(transfer),
                });
            }
            other => {
                return Err(diag(
                    &self.lines,
                    pos,
                    format!("unknown statement `{other}`"),
                ));
            }
        }
        self.end_of_statement()
    }

    fn event_body(&mut self) -> PResult<TransferStmt> {
        let (id, _) = self.expect_name("an event name")?;
        self.expect_keyword("at")?;
        let at = self.expect_time()?;
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut event = TransferStmt {
            id: id.into(),
            at,
            donors: Vec::new(),
            created: Vec::new(),
            discarded: Vec::new(),
        };
        loop {
            while matches!(self.peek().tok, Tok::Newline | Tok::Semi) {
                self.bump();
            }
            let tok = self.peek().clone();
            match &tok.tok {
                Tok::RBrace => {
                    self.bump();
                    return Ok(event);
                }
                Tok::Eof => {
                    return Err(diag(&self.lines, open, "event block is never closed"));
                }
                Tok::Word(w) if w == "donor" => {
                    self.bump();
                    while let Tok::Word(_) = self.peek().tok {
                        let d = self.reference(RefKind::Quantity, "a donor quantity name")?;
                        event.donors.push(d.into());
                    }
                }
                Tok::Word(w) if w == "create" => {
                    self.bump();
                    let (qid, _) = self.expect_name("a quantity name")?;
                    self.expect(Tok::Colon, "`:`")?;
                    let kind = self.reference(RefKind::QuantityKind, "a kind name after `:`")?;
                    self.expect_keyword("granules")?;
                    let granules = self.name_list(RefKind::Object, "an object name", false)?;
                    event.created.push(NewQuantity::new(qid, kind, granules));
                }
                Tok::Word(w) if w == "discard" => {
                    self.bump();
                    let names = self.name_list(RefKind::Object, "an object name", true)?;
                    event
                        .discarded
                        .extend(names.into_iter().map(ObjectId::from));
                }
                other => {
                    return Err(diag(
                        &self.lines,
                        tok.pos,
                        format!(
                            "expected `donor`, `create`, `discard` or `}}`, found {}",
                            other.describe()
                        ),
                    ));
                }
            }
            match self.peek().tok {
                Tok::Newline | Tok::Semi | Tok::RBrace => {}
                _ => return Err(self.expected("`;`, end of line or `}`")),
            }
        }
    }

    fn recover(&mut self) {
        loop {
            match self.peek().tok {
                Tok::Eof => break,
                Tok::Newline if self.depth <= 0 => {
                    self.bump();
                    break;
                }
                _ => {
                    self.bump();
                }
            }
        }
        self.depth = 0;
    }
}

fn resolve(p: &Parser<'_>) -> Vec<ParseDiagnostic> {
    let s = &p.scenario;
    let mut kinds: BTreeMap<&str, KindMeta> = BTreeMap::new();
    for k in &s.kinds {
        kinds.entry(k.node.name.as_str()).or_insert(k.node.meta);
    }
    let objects: BTreeSet<&str> = s.objects.iter().map(|o| o.node.id.as_str()).collect();
    let quantities: BTreeSet<&str> = s
        .events
        .iter()
        .flat_map(|e| e.node.created())
        .map(|q| q.id.as_str())
        .collect();
    let mut out = Vec::new();
    for (kind, name, pos) in &p.refs {
        let problem = match kind {
            RefKind::ObjectKind | RefKind::QuantityKind => {
                let want = if *kind == RefKind::ObjectKind {
                    KindMeta::ObjectKind
                } else {
                    KindMeta::QuantityKind
                };
                match kinds.get(name.as_str()) {
                    None => Some(format!("unknown kind `{name}`")),
                    Some(&meta) if meta != want => Some(format!(
                        "`{name}` is {}, expected {}",
                        meta.describe(),
                        want.describe()
                    )),
                    Some(_) => None,
                }
            }
            RefKind::Object => (!objects.contains(name.as_str())).then(|| {
                if quantities.contains(name.as_str()) {
                    format!("`{name}` is a quantity, expected an object")
                } else {
                    format!("unknown object `{name}`")
                }
            }),
            RefKind::Quantity => (!quantities.contains(name.as_str())).then(|| {
                if objects.contains(name.as_str()) {
                    format!("`{name}` is an object, expected a quantity")
                } else {
                    format!("unknown quantity `{name}`")
                }
            }),
        };
        if let Some(msg) = problem {
            out.push(diag(&p.lines, *pos, msg));
        }
    }
    out
}

/// Parses scenario source text. Returns the resolved scenario, or every
/// diagnostic found, sorted by position.
pub fn parse(source: &str) -> Result<Scenario, Vec<ParseDiagnostic>> {
    let lines: Vec<&str> = source.split('\n').collect();
    let mut diags = Vec::new();
    let toks = lex(source, &lines, &mut diags);
    let mut p = Parser {
        toks,
        i: 0,
        lines,
        depth: 0,
        last: None,
        refs: Vec::new(),
        scenario: Scenario::default(),
    };
    loop {
        p.skip_newlines();
        if p.peek().tok == Tok::Eof {
            break;
        }
        p.last = None;
        if let Err(d) = p.statement() {
            diags.push(d);
            p.recover();
        }
    }
    if diags.is_empty() {
        diags = resolve(&p);
    }
    if diags.is_empty() {
        Ok(p.scenario)
    } else {
        diags.sort_by(|a, b| (a.line, a.column, &a.message).cmp(&(b.line, b.column, &b.message)));
        diags.dedup();
        Err(diags)
    }
}

/// Like [`parse`], but starts from raw bytes and reports invalid UTF-8 with
/// its byte offset.
pub fn parse_bytes(bytes: &[u8]) -> Result<Scenario, Vec<ParseDiagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let offset = e.valid_up_to();
            let prefix = std::str::from_utf8(&bytes[..offset]).expect("valid prefix");
            let line = prefix.matches('\n').count() as u32 + 1;
            let line_start = prefix.rfind('\n').map_or(0, |i| i + 1);
            let column = prefix[line_start..].chars().count() as u32 + 1;
            let line_end = bytes[line_start..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |i| line_start + i);
            let snippet = String::from_utf8_lossy(&bytes[line_start..line_end])
                .trim_end_matches('\r')
                .to_owned();
            Err(vec![ParseDiagnostic {
                line,
                column,
                severity: Severity::Error,
                message: format!("invalid UTF-8 at byte offset {offset}"),
                snippet,
            }])
        }
    }
}
