use std::fmt::{self, Write};

use super::expr::Expr;

/// Canonical s-expression text. Conjunctions encoded as
/// not(or(not a, not b)) are printed back as `and`.
pub fn print(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e).expect("writing to a String cannot fail");
    s
}

fn write_list(out: &mut String, head: &str, items: &[&str]) -> fmt::Result {
    write!(out, "({head}")?;
    for it in items {
        write!(out, " {it}")?;
    }
    out.write_char(')')
}

fn write_expr(out: &mut String, e: &Expr) -> fmt::Result {
    if let Some((a, b)) = e.as_and() {
        out.write_str("(and ")?;
        write_expr(out, a)?;
        out.write_char(' ')?;
        write_expr(out, b)?;
        return out.write_char(')');
    }
    match e {
        Expr::Equal(a, b) => write!(out, "(= {a} {b})"),
        Expr::Rel(r, xs) => {
            let xs: Vec<&str> = xs.iter().map(String::as_str).collect();
            write_list(out, r, &xs)
        }
        Expr::Not(a) => {
            out.write_str("(not ")?;
            write_expr(out, a)?;
            out.write_char(')')
        }
        Expr::Or(a, b) | Expr::Add(a, b) | Expr::Mul(a, b) => {
            let op = match e {
                Expr::Or(..) => "or",
                Expr::Add(..) => "+",
                _ => "*",
            };
            write!(out, "({op} ")?;
            write_expr(out, a)?;
            out.write_char(' ')?;
            write_expr(out, b)?;
            out.write_char(')')
        }
        Expr::Exists(v, a) => {
            write!(out, "(ex {v} ")?;
            write_expr(out, a)?;
            out.write_char(')')
        }
        Expr::ExistsNum(v, a) => {
            write!(out, "(exn %{v} ")?;
            write_expr(out, a)?;
            out.write_char(')')
        }
        Expr::Pred(p, ts) => {
            write!(out, "(pred {p}")?;
            for t in ts {
                out.write_char(' ')?;
                write_expr(out, t)?;
            }
            out.write_char(')')
        }
        Expr::Sphere(t, xs) => {
            write!(out, "(sphere {}", t.id)?;
            for x in xs {
                write!(out, " {x}")?;
            }
            out.write_char(')')
        }
        Expr::Count(vs, a) => {
            write!(out, "(# ({}) ", vs.join(" "))?;
            write_expr(out, a)?;
            out.write_char(')')
        }
        Expr::Int(i) => write!(out, "{i}"),
        Expr::NumVar(v) => write!(out, "%{v}"),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}
