//! Reader for the SMT-LIB2 subset used by VNNLIB files.
//!
//! Supported: `declare-const <X_i|Y_j> Real`, `assert`, `and`, `or`, `<=`,
//! `>=`, `+`, `-`, and `*` with at most one non-constant factor. `<` and `>`
//! are read as their non-strict forms with a warning. `check-sat`,
//! `get-model`, `set-logic`, `set-info` and `exit` are accepted and ignored.

use std::collections::BTreeSet;

use super::ast::{AffineExpr, Atom, Relation, SpecAst, Term, Var, VarKind};
use super::SpecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Symbol(String, Pos),
    Number(f64, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Symbol(_, p) | Sexp::Number(_, p) | Sexp::List(_, p) => *p,
        }
    }

    /// Compact source-like rendering for diagnostics.
    fn render(&self) -> String {
        match self {
            Sexp::Symbol(s, _) => s.clone(),
            Sexp::Number(n, _) => format!("{n}"),
            Sexp::List(items, _) => {
                let inner: Vec<String> = items.iter().map(Sexp::render).collect();
                format!("({})", inner.join(" "))
            }
        }
    }
}

fn syntax(pos: Pos, msg: impl Into<String>) -> SpecError {
    SpecError::Syntax { line: pos.line, col: pos.col, msg: msg.into() }
}

fn is_number_token(tok: &str) -> bool {
    let body = tok.strip_prefix(['-', '+']).unwrap_or(tok);
    let mut chars = body.chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('.') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader { chars: text.chars().peekable(), pos: Pos { line: 1, col: 1 } }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read_all(&mut self) -> Result<Vec<Sexp>, SpecError> {
        let mut out = Vec::new();
        loop {
            self.skip_trivia();
            match self.chars.peek() {
                None => return Ok(out),
                Some(')') => return Err(syntax(self.pos, "unbalanced ')'")),
                Some(_) => out.push(self.read_one()?),
            }
        }
    }

    fn read_one(&mut self) -> Result<Sexp, SpecError> {
        self.skip_trivia();
        let start = self.pos;
        match self.chars.peek().copied() {
            None => Err(syntax(start, "unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => return Err(syntax(start, "unclosed '('")),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List(items, start));
                        }
                        Some(_) => items.push(self.read_one()?),
                    }
                }
            }
            Some(')') => Err(syntax(start, "unexpected ')'")),
            Some('|') => Err(syntax(start, "quoted symbols are not supported")),
            Some(_) => {
                let mut tok = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    tok.push(c);
                    self.bump();
                }
                if is_number_token(&tok) {
                    let v: f64 = tok
                        .parse()
                        .map_err(|_| syntax(start, format!("malformed numeric literal {tok:?}")))?;
                    if !v.is_finite() {
                        return Err(syntax(start, format!("numeric literal {tok:?} out of range")));
                    }
                    Ok(Sexp::Number(v, start))
                } else {
                    Ok(Sexp::Symbol(tok, start))
                }
            }
        }
    }
}

struct Builder {
    declared: BTreeSet<Var>,
    declarations: Vec<Var>,
    assertions: Vec<Term>,
    warnings: Vec<String>,
}

impl Builder {
    fn command(&mut self, form: &Sexp) -> Result<(), SpecError> {
        let Sexp::List(items, pos) = form else {
            return Err(syntax(form.pos(), format!("expected a command, found {}", form.render())));
        };
        let head = match items.first() {
            Some(Sexp::Symbol(s, _)) => s.as_str(),
            _ => return Err(syntax(*pos, "expected a command name")),
        };
        match head {
            "declare-const" => self.declare(items, *pos),
            "assert" => {
                if items.len() != 2 {
                    return Err(syntax(*pos, "assert takes exactly one term"));
                }
                let t = self.term(&items[1])?;
                self.assertions.push(t);
                Ok(())
            }
            "check-sat" | "get-model" | "set-logic" | "set-info" | "set-option" | "exit" => Ok(()),
            other => Err(SpecError::Unsupported {
                construct: format!("command {other}"),
                line: pos.line,
                col: pos.col,
            }),
        }
    }

    fn declare(&mut self, items: &[Sexp], pos: Pos) -> Result<(), SpecError> {
        let (name, sort) = match items {
            [_, Sexp::Symbol(name, _), Sexp::Symbol(sort, _)] => (name, sort),
            _ => return Err(syntax(pos, "expected (declare-const <name> Real)")),
        };
        if sort != "Real" {
            return Err(SpecError::Unsupported {
                construct: format!("sort {sort} for {name}"),
                line: pos.line,
                col: pos.col,
            });
        }
        let var = Var::from_name(name).ok_or_else(|| SpecError::Unsupported {
            construct: format!("variable name {name} (expected X_<i> or Y_<j>)"),
            line: pos.line,
            col: pos.col,
        })?;
        if !self.declared.insert(var) {
            return Err(SpecError::DuplicateDeclaration { name: name.clone(), line: pos.line });
        }
        self.declarations.push(var);
        Ok(())
    }

    fn term(&mut self, s: &Sexp) -> Result<Term, SpecError> {
        let Sexp::List(items, pos) = s else {
            return Err(SpecError::Unsupported {
                construct: format!("boolean term {}", s.render()),
                line: s.pos().line,
                col: s.pos().col,
            });
        };
        let head = match items.first() {
            Some(Sexp::Symbol(h, _)) => h.as_str(),
            _ => return Err(syntax(*pos, "expected an operator")),
        };
        let args = &items[1..];
        match head {
            "and" | "or" => {
                if args.is_empty() {
                    return Err(syntax(*pos, format!("{head} needs at least one argument")));
                }
                let children = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(if head == "and" { Term::And(children) } else { Term::Or(children) })
            }
            "<=" | ">=" | "<" | ">" => {
                if args.len() < 2 {
                    return Err(syntax(*pos, format!("{head} needs at least two arguments")));
                }
                if head.len() == 1 {
                    self.warnings.push(format!(
                        "{}:{}: strict comparison '{head}' treated as non-strict",
                        pos.line, pos.col
                    ));
                    log::warn!("line {}: strict comparison '{head}' treated as non-strict", pos.line);
                }
                let relation = if head.starts_with('<') { Relation::Le } else { Relation::Ge };
                let exprs = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                // Chained comparisons (<= a b c) mean (and (<= a b) (<= b c)).
                let mut atoms: Vec<Term> = exprs
                    .windows(2)
                    .map(|w| Term::Atom(Atom { relation, lhs: w[0].clone(), rhs: w[1].clone() }))
                    .collect();
                Ok(if atoms.len() == 1 { atoms.pop().expect("one atom") } else { Term::And(atoms) })
            }
            other => Err(SpecError::Unsupported {
                construct: format!("operator {other} in {}", s.render()),
                line: pos.line,
                col: pos.col,
            }),
        }
    }

    fn expr(&self, s: &Sexp) -> Result<AffineExpr, SpecError> {
        match s {
            Sexp::Number(v, _) => Ok(AffineExpr::constant(*v)),
            Sexp::Symbol(name, pos) => {
                let var = Var::from_name(name).filter(|v| self.declared.contains(v));
                match var {
                    Some(v) => Ok(AffineExpr::var(v)),
                    None => Err(SpecError::UndeclaredVariable {
                        name: name.clone(),
                        line: pos.line,
                        col: pos.col,
                    }),
                }
            }
            Sexp::List(items, pos) => {
                let head = match items.first() {
                    Some(Sexp::Symbol(h, _)) => h.as_str(),
                    _ => return Err(syntax(*pos, "expected an arithmetic operator")),
                };
                let args = items[1..].iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
                if args.is_empty() {
                    return Err(syntax(*pos, format!("{head} needs arguments")));
                }
                match head {
                    "+" => Ok(args.iter().skip(1).fold(args[0].clone(), |acc, e| acc.add(e))),
                    "-" if args.len() == 1 => Ok(args[0].clone().scale(-1.0)),
                    "-" => Ok(args.iter().skip(1).fold(args[0].clone(), |acc, e| acc.sub(e))),
                    "*" => {
                        let mut factor = 1.0;
                        let mut symbolic: Option<AffineExpr> = None;
                        for a in args {
                            if a.is_constant() {
                                factor *= a.constant;
                            } else if symbolic.is_some() {
                                return Err(SpecError::NonAffine {
                                    construct: format!("variable×variable product {}", s.render()),
                                    line: pos.line,
                                    col: pos.col,
                                });
                            } else {
                                symbolic = Some(a);
                            }
                        }
                        Ok(match symbolic {
                            Some(e) => e.scale(factor),
                            None => AffineExpr::constant(factor),
                        })
                    }
                    other => Err(SpecError::Unsupported {
                        construct: format!("arithmetic operator {other} in {}", s.render()),
                        line: pos.line,
                        col: pos.col,
                    }),
                }
            }
        }
    }
}

/// Parses VNNLIB text into a [`SpecAst`].
pub fn parse_vnnlib(text: &str) -> Result<SpecAst, SpecError> {
    let forms = Reader::new(text).read_all()?;
    let mut b = Builder {
        declared: BTreeSet::new(),
        declarations: Vec::new(),
        assertions: Vec::new(),
        warnings: Vec::new(),
    };
    for f in &forms {
        b.command(f)?;
    }
    let n_inputs = dense_count(&b.declared, VarKind::Input)?;
    let n_outputs = dense_count(&b.declared, VarKind::Output)?;
    Ok(SpecAst {
        declarations: b.declarations,
        assertions: b.assertions,
        n_inputs,
        n_outputs,
        warnings: b.warnings,
    })
}

fn dense_count(declared: &BTreeSet<Var>, kind: VarKind) -> Result<usize, SpecError> {
    let indices: Vec<usize> = declared.iter().filter(|v| v.kind == kind).map(|v| v.index).collect();
    for (expected, &got) in indices.iter().enumerate() {
        if got != expected {
            return Err(SpecError::NonDenseIndices {
                name: Var { kind, index: expected }.to_string(),
            });
        }
    }
    Ok(indices.len())
}
