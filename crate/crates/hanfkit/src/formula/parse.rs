use num_bigint::BigInt;

use super::expr::{Expr, SphereRef};
use super::predicates::PredicateCollection;
use super::signature::Signature;
use crate::error::{Error, Result};

/// Resolves `TYPEID` tokens of sphere atoms.
pub trait SphereResolver {
    fn resolve(&self, id: &str) -> Result<SphereRef>;
}

/// Resolver for texts that must not contain sphere atoms.
pub struct NoSpheres;

impl SphereResolver for NoSpheres {
    fn resolve(&self, id: &str) -> Result<SphereRef> {
        Err(Error::invalid(format!(
            "sphere atom {id} cannot be resolved without a catalog store"
        )))
    }
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, usize),
    List(Vec<Sexp>, usize),
}

impl Sexp {
    fn pos(&self) -> usize {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn perr<T>(pos: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        pos,
        msg: msg.into(),
    })
}

fn read_all(text: &str) -> Result<Vec<Sexp>> {
    let bytes = text.as_bytes();
    let mut stack: Vec<(Vec<Sexp>, usize)> = vec![(Vec::new(), 0)];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'(' => {
                stack.push((Vec::new(), i));
                i += 1;
            }
            b')' => {
                if stack.len() == 1 {
                    return perr(i, "unbalanced ')'");
                }
                let (items, start) = stack.pop().expect("non-empty");
                stack
                    .last_mut()
                    .expect("root")
                    .0
                    .push(Sexp::List(items, start));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                stack
                    .last_mut()
                    .expect("root")
                    .0
                    .push(Sexp::Atom(text[start..i].to_string(), start));
            }
        }
    }
    if stack.len() > 1 {
        return perr(stack.last().expect("open").1, "unclosed '('");
    }
    Ok(stack.pop().expect("root").0)
}

pub(crate) fn is_struct_var(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_lowercase())
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn num_var_name(s: &str) -> Option<&str> {
    s.strip_prefix('%').filter(|r| is_struct_var(r))
}

struct Parser<'a> {
    sig: &'a Signature,
    preds: &'a PredicateCollection,
    spheres: &'a dyn SphereResolver,
}

impl Parser<'_> {
    fn svar(&self, s: &Sexp) -> Result<String> {
        match s {
            Sexp::Atom(a, p) if is_struct_var(a) => {
                let _ = p;
                Ok(a.clone())
            }
            other => perr(other.pos(), "expected a structure variable"),
        }
    }

    fn nvar(&self, s: &Sexp) -> Result<String> {
        match s {
            Sexp::Atom(a, p) => match num_var_name(a) {
                Some(n) => Ok(n.to_string()),
                None => perr(*p, format!("expected a number variable, got {a:?}")),
            },
            other => perr(other.pos(), "expected a number variable"),
        }
    }

    fn binary(&self, items: &[Sexp], pos: usize, f: fn(Expr, Expr) -> Expr) -> Result<Expr> {
        if items.len() < 3 {
            return perr(pos, "connective needs at least two operands");
        }
        let mut parts = items[1..]
            .iter()
            .map(|s| self.formula(s))
            .collect::<Result<Vec<_>>>()?;
        let mut acc = parts.pop().expect("two operands");
        while let Some(prev) = parts.pop() {
            acc = f(prev, acc);
        }
        Ok(acc)
    }

    fn formula(&self, s: &Sexp) -> Result<Expr> {
        let (items, pos) = match s {
            Sexp::List(items, pos) if !items.is_empty() => (items, *pos),
            Sexp::List(_, pos) => return perr(*pos, "empty list"),
            Sexp::Atom(a, pos) => return perr(*pos, format!("expected a formula, got {a:?}")),
        };
        let head = match &items[0] {
            Sexp::Atom(h, _) => h.as_str(),
            other => return perr(other.pos(), "expected an operator"),
        };
        let want = |n: usize| -> Result<()> {
            if items.len() != n + 1 {
                perr(
                    pos,
                    format!("{head} takes {n} operand(s), got {}", items.len() - 1),
                )
            } else {
                Ok(())
            }
        };
        match head {
            "=" => {
                want(2)?;
                Ok(Expr::Equal(self.svar(&items[1])?, self.svar(&items[2])?))
            }
            "not" => {
                want(1)?;
                Ok(Expr::not(self.formula(&items[1])?))
            }
            "or" => self.binary(items, pos, Expr::or),
            "and" => self.binary(items, pos, Expr::and),
            "implies" => {
                want(2)?;
                Ok(Expr::implies(
                    self.formula(&items[1])?,
                    self.formula(&items[2])?,
                ))
            }
            "ex" | "forall" => {
                want(2)?;
                let v = self.svar(&items[1])?;
                let body = self.formula(&items[2])?;
                Ok(if head == "ex" {
                    Expr::exists(v, body)
                } else {
                    Expr::forall(v, body)
                })
            }
            "exn" | "foralln" => {
                want(2)?;
                let v = self.nvar(&items[1])?;
                let body = self.formula(&items[2])?;
                Ok(if head == "exn" {
                    Expr::exists_num(v, body)
                } else {
                    Expr::not(Expr::exists_num(v, Expr::not(body)))
                })
            }
            "pred" => {
                let name = match items.get(1) {
                    Some(Sexp::Atom(n, _)) => n.clone(),
                    _ => return perr(pos, "pred needs a predicate name"),
                };
                let arity = match self.preds.arity(&name) {
                    Some(a) => a,
                    None => return perr(items[1].pos(), format!("unknown predicate {name}")),
                };
                let args = items[2..]
                    .iter()
                    .map(|t| self.term(t))
                    .collect::<Result<Vec<_>>>()?;
                if args.len() != arity {
                    return perr(
                        pos,
                        format!("predicate {name} has arity {arity}, got {}", args.len()),
                    );
                }
                Ok(Expr::Pred(name, args))
            }
            "sphere" => {
                let (id, idpos) = match items.get(1) {
                    Some(Sexp::Atom(n, p)) => (n.clone(), *p),
                    _ => return perr(pos, "sphere needs a type id"),
                };
                let t = self.spheres.resolve(&id).map_err(|e| match e {
                    Error::Invalid(m) => Error::Parse { pos: idpos, msg: m },
                    other => other,
                })?;
                let xs = items[2..]
                    .iter()
                    .map(|v| self.svar(v))
                    .collect::<Result<Vec<_>>>()?;
                if xs.len() != t.centres() {
                    return perr(
                        pos,
                        format!("type {id} has {} centres, got {}", t.centres(), xs.len()),
                    );
                }
                Ok(Expr::Sphere(t, xs))
            }
            "#" | "+" | "*" => perr(pos, format!("{head} builds a term, expected a formula")),
            rel => {
                let idx = match self.sig.index_of(rel) {
                    Some(i) => i,
                    None => return perr(items[0].pos(), format!("unknown relation {rel}")),
                };
                let xs = items[1..]
                    .iter()
                    .map(|v| self.svar(v))
                    .collect::<Result<Vec<_>>>()?;
                if xs.len() != self.sig.arity(idx) {
                    return perr(
                        pos,
                        format!("relation {rel} has arity {}", self.sig.arity(idx)),
                    );
                }
                Ok(Expr::Rel(rel.to_string(), xs))
            }
        }
    }

    fn term(&self, s: &Sexp) -> Result<Expr> {
        match s {
            Sexp::Atom(a, p) => {
                if let Some(n) = num_var_name(a) {
                    return Ok(Expr::NumVar(n.to_string()));
                }
                match a.parse::<BigInt>() {
                    Ok(i) if a.bytes().all(|b| b.is_ascii_digit() || b == b'-') => Ok(Expr::Int(i)),
                    _ => perr(*p, format!("expected a term, got {a:?}")),
                }
            }
            Sexp::List(items, pos) => {
                let head = match items.first() {
                    Some(Sexp::Atom(h, _)) => h.as_str(),
                    _ => return perr(*pos, "expected a term"),
                };
                match head {
                    "+" | "*" => {
                        if items.len() != 3 {
                            return perr(*pos, format!("{head} takes two operands"));
                        }
                        let a = self.term(&items[1])?;
                        let b = self.term(&items[2])?;
                        Ok(if head == "+" {
                            Expr::add(a, b)
                        } else {
                            Expr::mul(a, b)
                        })
                    }
                    "#" => {
                        if items.len() != 3 {
                            return perr(*pos, "# takes a variable list and a formula");
                        }
                        let vars = match &items[1] {
                            Sexp::List(vs, _) if !vs.is_empty() => vs
                                .iter()
                                .map(|v| self.svar(v))
                                .collect::<Result<Vec<_>>>()?,
                            other => {
                                return perr(other.pos(), "expected a non-empty variable list")
                            }
                        };
                        for (i, v) in vars.iter().enumerate() {
                            if vars[..i].contains(v) {
                                return perr(
                                    items[1].pos(),
                                    format!("variable {v} repeated in count tuple"),
                                );
                            }
                        }
                        Ok(Expr::count(vars, self.formula(&items[2])?))
                    }
                    _ => perr(*pos, format!("expected a term, got ({head} ...)")),
                }
            }
        }
    }
}

/// Parses one formula. Sugar is expanded into not/or/ex.
pub fn parse_with(
    text: &str,
    sig: &Signature,
    preds: &PredicateCollection,
    spheres: &dyn SphereResolver,
) -> Result<Expr> {
    let forms = read_all(text)?;
    match forms.as_slice() {
        [one] => Parser {
            sig,
            preds,
            spheres,
        }
        .formula(one),
        [] => perr(0, "empty input"),
        [_, second, ..] => perr(second.pos(), "trailing input after formula"),
    }
}

/// Parses a formula without sphere atoms.
pub fn parse(text: &str, sig: &Signature, preds: &PredicateCollection) -> Result<Expr> {
    parse_with(text, sig, preds, &NoSpheres)
}

/// Collects the relation symbols (with arities) used by a formula text so
/// that callers can parse without declaring a signature up front.
pub fn infer_signature(text: &str) -> Result<Signature> {
    fn walk(s: &Sexp, out: &mut Vec<(String, usize, usize)>) {
        if let Sexp::List(items, pos) = s {
            if let Some(Sexp::Atom(h, _)) = items.first() {
                let is_op = matches!(
                    h.as_str(),
                    "=" | "not"
                        | "or"
                        | "and"
                        | "implies"
                        | "ex"
                        | "forall"
                        | "exn"
                        | "foralln"
                        | "pred"
                        | "sphere"
                        | "#"
                        | "+"
                        | "*"
                );
                if !is_op && super::signature::is_relation_name(h) {
                    out.push((h.clone(), items.len() - 1, *pos));
                }
            }
            let skip = matches!(items.first(), Some(Sexp::Atom(h, _)) if h == "#");
            for (i, it) in items.iter().enumerate() {
                if !(skip && i == 1) {
                    walk(it, out);
                }
            }
        }
    }
    let mut found = Vec::new();
    for f in read_all(text)? {
        walk(&f, &mut found);
    }
    let mut rels: Vec<(String, usize)> = Vec::new();
    for (name, ar, pos) in found {
        match rels.iter().find(|(n, _)| *n == name) {
            Some((_, a)) if *a != ar => {
                return perr(
                    pos,
                    format!("relation {name} used with arities {a} and {ar}"),
                )
            }
            Some(_) => {}
            None => rels.push((name, ar)),
        }
    }
    Signature::new(rels)
}
