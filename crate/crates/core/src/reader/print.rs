use super::{Form, FormKind, Meta};

/// Canonical single-line rendering. Map entries and metadata are sorted by
/// their printed key, so structurally equal forms print identically.
pub fn print_form(form: &Form) -> String {
    let mut out = String::new();
    write_form(&mut out, form);
    out
}

/// Shortest text that reads back to the same `f64`.
pub fn format_number(n: f64) -> String {
    if n.is_nan() {
        "##NaN".to_string()
    } else if n.is_infinite() {
        if n > 0.0 { "##Inf" } else { "##-Inf" }.to_string()
    } else if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n:?}")
    }
}

pub fn quote_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_meta(out: &mut String, meta: &Meta) {
    let mut entries: Vec<(String, String)> = meta
        .iter()
        .map(|(k, v)| (format!(":{k}"), print_form(v)))
        .collect();
    entries.sort();
    out.push_str("^{");
    for (i, (k, v)) in entries.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(k);
        out.push(' ');
        out.push_str(v);
    }
    out.push_str("} ");
}

fn sorted_pairs(pairs: &[(Form, Form)]) -> Vec<(String, &Form)> {
    let mut printed: Vec<(String, &Form)> = pairs.iter().map(|(k, v)| (print_form(k), v)).collect();
    printed.sort_by(|a, b| a.0.cmp(&b.0));
    printed
}

fn write_form(out: &mut String, form: &Form) {
    if let Some(meta) = &form.meta {
        write_meta(out, meta);
    }
    match &form.kind {
        FormKind::Nil => out.push_str("nil"),
        FormKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        FormKind::Number(n) => out.push_str(&format_number(*n)),
        FormKind::Str(s) => out.push_str(&quote_string(s)),
        FormKind::Symbol(s) => out.push_str(&s.to_string()),
        FormKind::Keyword(s) => {
            out.push(':');
            out.push_str(&s.to_string());
        }
        FormKind::List(items) => write_seq(out, '(', ')', items),
        FormKind::Vector(items) => write_seq(out, '[', ']', items),
        FormKind::Map(pairs) => {
            out.push('{');
            for (i, (k, v)) in sorted_pairs(pairs).into_iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&k);
                out.push(' ');
                write_form(out, v);
            }
            out.push('}');
        }
    }
}

fn write_seq(out: &mut String, open: char, close: char, items: &[Form]) {
    out.push(open);
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write_form(out, item);
    }
    out.push(close);
}

/// Multi-line layout used by `fmt` and `expand`. Forms that fit in `width`
/// columns stay on one line; longer lists break after their head (and any
/// header arguments of binding forms), vectors and maps break per element.
/// Only whitespace differs from [`print_form`].
pub fn pretty(form: &Form, width: usize) -> String {
    let mut out = String::new();
    layout(&mut out, form, 0, width);
    out
}

fn header_args(head: &str) -> usize {
    match head {
        "defn" | "defvisr" => 2,
        "def" | "fn" | "let" | "vlet" | "if" | "when" | "render" | "elaborate" | "ns" => 1,
        _ => 0,
    }
}

fn newline(out: &mut String, indent: usize) {
    out.push('\n');
    out.push_str(&" ".repeat(indent));
}

fn layout(out: &mut String, form: &Form, indent: usize, width: usize) {
    let flat = print_form(form);
    if indent + flat.len() <= width || !flat.contains(['(', '[', '{']) {
        out.push_str(&flat);
        return;
    }
    let mut indent = indent;
    if let Some(meta) = &form.meta {
        let before = out.len();
        write_meta(out, meta);
        indent += out.len() - before;
    }
    match &form.kind {
        FormKind::List(items) => {
            out.push('(');
            let keep = match items.first() {
                Some(first) => match &first.kind {
                    FormKind::Symbol(s) if s.ns.is_none() => 1 + header_args(&s.name),
                    _ => 1,
                },
                None => 0,
            };
            for (i, item) in items.iter().enumerate() {
                if i > 0 && i < keep {
                    out.push(' ');
                } else if i >= keep {
                    newline(out, indent + 2);
                }
                let col = current_column(out);
                layout(out, item, col, width);
            }
            out.push(')');
        }
        FormKind::Vector(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    newline(out, indent + 1);
                }
                layout(out, item, indent + 1, width);
            }
            out.push(']');
        }
        FormKind::Map(pairs) => {
            out.push('{');
            for (i, (k, v)) in sorted_pairs(pairs).into_iter().enumerate() {
                if i > 0 {
                    newline(out, indent + 1);
                }
                out.push_str(&k);
                out.push(' ');
                let col = current_column(out);
                layout(out, v, col, width);
            }
            out.push('}');
        }
        _ => out.push_str(&flat),
    }
}

fn current_column(out: &str) -> usize {
    out.rsplit('\n').next().map(|line| line.chars().count()).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reader::read_all;

    fn reprint(text: &str) -> String {
        print_form(&read_all(text).unwrap()[0])
    }

    #[test]
    fn simple_list() {
        assert_eq!(reprint("( f   1 )"), "(f 1)");
    }

    #[test]
    fn sorted_map_keys() {
        assert_eq!(reprint("{:b 2, :a 1}"), "{:a 1 :b 2}");
    }

    #[test]
    fn metadata_prefix() {
        assert_eq!(reprint("^:visr (D \"{}\")"), "^{:visr true} (D \"{}\")");
    }

    #[test]
    fn numbers_shortest() {
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1.5e300), "1.5e300");
        assert_eq!(format_number(1e16), "1e16");
        for n in [0.1 + 0.2, 1.0 / 3.0, 123456.789, 1e-9, -7.25e-300] {
            assert_eq!(format_number(n).parse::<f64>().unwrap(), n);
        }
    }

    #[test]
    fn string_escapes_roundtrip() {
        let s = "a\"b\\c\nd\u{1}e";
        let printed = quote_string(s);
        assert_eq!(read_all(&printed).unwrap()[0].as_str(), Some(s));
    }

    #[test]
    fn pretty_rereads_identically() {
        let text = "(defn build [a b c depth] (if (= depth 0) [a c] (vlet [^:visr (g/D \"{:nodes []}\") a a b b c c] (concat (build a ab abc (dec depth)) (rest (build abc bc c (dec depth)))))))";
        let form = &read_all(text).unwrap()[0];
        let laid = pretty(form, 40);
        assert!(laid.lines().count() > 3);
        assert_eq!(&read_all(&laid).unwrap()[0], form);
        assert_eq!(pretty(&read_all(&laid).unwrap()[0], 40), laid);
    }
}
