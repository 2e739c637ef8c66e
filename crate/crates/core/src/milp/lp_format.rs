use std::fmt::Write;

use super::{MilpModel, VarId, VarKind};

const WRAP: usize = 240;

/// Formats a number with 17 significant digits, without exponent for
/// moderate magnitudes and without trailing zeros.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let body = if (-5..=15).contains(&exp) {
        if exp >= 0 {
            let e = exp as usize;
            if digits.len() > e + 1 {
                format!("{}.{}", &digits[..=e], &digits[e + 1..])
            } else {
                format!("{}{}", digits, "0".repeat(e + 1 - digits.len()))
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        }
    } else if digits.len() > 1 {
        format!("{}.{}e{}", &digits[..1], &digits[1..], exp)
    } else {
        format!("{}e{}", digits, exp)
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn write_expr(out: &mut String, model: &MilpModel, terms: &[(VarId, f64)], indent: usize) {
    let mut line_len = indent;
    let mut first = true;
    for &(v, a) in terms {
        let name = &model.variable(v).name;
        let mag = a.abs();
        let coef = if mag == 1.0 { String::new() } else { format!("{} ", format_number(mag)) };
        let piece = match (first, a < 0.0) {
            (true, false) => format!("{coef}{name}"),
            (true, true) => format!("- {coef}{name}"),
            (false, false) => format!(" + {coef}{name}"),
            (false, true) => format!(" - {coef}{name}"),
        };
        if line_len + piece.len() > WRAP && !first {
            out.push('\n');
            out.push_str(&" ".repeat(indent));
            line_len = indent;
        }
        line_len += piece.len();
        out.push_str(&piece);
        first = false;
    }
    if first {
        out.push('0');
    }
}

/// Writes the model in CPLEX LP format. Output is deterministic: variables
/// and rows appear in insertion order.
pub fn export_lp(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj: ");
    write_expr(&mut out, model, model.objective(), 6);
    let k = model.objective_constant();
    if k != 0.0 {
        let sign = if k < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {}", format_number(k.abs()));
    }
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}: ", c.name);
        write_expr(&mut out, model, &c.terms, c.name.len() + 3);
        let _ = writeln!(out, " {} {}", c.relation, format_number(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in model.variables() {
        if v.kind == VarKind::Binary {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
            (true, false) if v.lower == 0.0 => {}
            _ => {
                let _ = writeln!(
                    out,
                    " {} <= {} <= {}",
                    format_number(v.lower),
                    v.name,
                    format_number(v.upper)
                );
            }
        }
    }
    let binaries: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(10) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
