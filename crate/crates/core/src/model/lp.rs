use std::fmt::Write as _;
use std::io;
use std::path::Path;

use num_traits::{Signed, Zero};

use super::{QuadExpr, QuadraticModel, VarKind};
use crate::Rational;

/// Writes `model` to `path` in CPLEX LP format.
pub fn export_lp(model: &QuadraticModel, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, to_lp_string(model))
}

fn number(r: Rational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        (*r.numer() as f64 / *r.denom() as f64).to_string()
    }
}

fn push_term(out: &mut String, first: &mut bool, coef: Rational, body: &str) {
    let sign = if coef.is_negative() { "-" } else { "+" };
    if *first {
        if coef.is_negative() {
            out.push_str("- ");
        }
    } else {
        let _ = write!(out, " {sign} ");
    }
    let _ = write!(out, "{} {body}", number(coef.abs()));
    *first = false;
}

/// Linear part, then bracketed quadratic part, terms sorted by tag.
fn render(model: &QuadraticModel, e: &QuadExpr, objective: bool) -> String {
    let name = |id: super::VarId| model.variable(id).tag.to_string();
    let mut out = String::new();
    let mut first = true;

    let mut linear: Vec<_> = e.linear().iter().map(|(&id, &c)| (model.variable(id).tag, c)).collect();
    linear.sort();
    for (tag, c) in linear {
        push_term(&mut out, &mut first, c, &tag.to_string());
    }

    let mut quad: Vec<_> = e
        .quadratic()
        .iter()
        .map(|(&(a, b), &c)| {
            let (ta, tb) = (model.variable(a).tag, model.variable(b).tag);
            let (ta, tb) = if ta <= tb { (ta, tb) } else { (tb, ta) };
            (ta, tb, c)
        })
        .collect();
    quad.sort();
    if !quad.is_empty() {
        out.push_str(if first { "[ " } else { " + [ " });
        let mut inner_first = true;
        for (ta, tb, c) in quad {
            // Objective brackets are halved by the format.
            let c = if objective { c * Rational::from_integer(2) } else { c };
            let body = if ta == tb { format!("{ta} ^ 2") } else { format!("{ta} * {tb}") };
            push_term(&mut out, &mut inner_first, c, &body);
        }
        out.push_str(if objective { " ] / 2" } else { " ]" });
        first = false;
    }

    if first {
        // A row needs at least one variable.
        let any = model.variables().first().map(|v| name(v.id)).unwrap_or_default();
        out.push_str(&format!("0 {any}"));
    }
    out
}

/// The LP text for `model`. Output is deterministic.
pub fn to_lp_string(model: &QuadraticModel) -> String {
    let mut out = String::new();
    out.push_str("\\ Packing model\n");
    let constant = model.objective().constant();
    if !constant.is_zero() {
        let _ = writeln!(out, "\\ objective constant: {}", number(constant));
    }
    out.push_str("Minimize\n");
    let _ = writeln!(out, " obj: {}", render(model, model.objective(), true));

    if !model.constraints().is_empty() {
        out.push_str("Subject To\n");
        for c in model.constraints() {
            let _ = writeln!(
                out,
                " {}: {} {} {}",
                c.label,
                render(model, &c.expr, false),
                c.sense.symbol(),
                number(c.rhs)
            );
        }
    }

    let mut bounded: Vec<_> = model
        .variables()
        .iter()
        .filter_map(|v| match v.kind {
            VarKind::Continuous { lower, upper } => Some((v.tag, lower, upper)),
            VarKind::Binary => None,
        })
        .collect();
    bounded.sort();
    out.push_str("Bounds\n");
    for (tag, lower, upper) in bounded {
        let _ = writeln!(out, " {} <= {tag} <= {}", number(lower), number(upper));
    }

    let mut binaries: Vec<_> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.tag)
        .collect();
    binaries.sort();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for tag in binaries {
            let _ = writeln!(out, " {tag}");
        }
    }
    out.push_str("End\n");
    out
}
