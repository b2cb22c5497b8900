use super::{Form, FormKind, Meta, ReadError, Span, Sym};

/// Reads every top-level form in `text`.
pub fn read_all(text: &str) -> Result<Vec<Form>, ReadError> {
    let mut reader = Reader::new(text);
    let mut forms = Vec::new();
    while reader.skip_trivia() {
        forms.push(reader.read_form()?);
    }
    Ok(forms)
}

/// Reads top-level forms until the first error. Forms that precede the
/// unreadable region are returned alongside the error.
pub fn read_prefix(text: &str) -> (Vec<Form>, Option<ReadError>) {
    let mut reader = Reader::new(text);
    let mut forms = Vec::new();
    while reader.skip_trivia() {
        match reader.read_form() {
            Ok(form) => forms.push(form),
            Err(err) => return (forms, Some(err)),
        }
    }
    (forms, None)
}

/// Reads exactly one form; trailing content is an error.
pub fn read_one(text: &str) -> Result<Form, ReadError> {
    let mut reader = Reader::new(text);
    if !reader.skip_trivia() {
        return Err(reader.error_at(reader.pos, "expected a form, found end of input"));
    }
    let form = reader.read_form()?;
    if reader.skip_trivia() {
        return Err(reader.error_at(reader.pos, "unexpected content after form"));
    }
    Ok(form)
}

struct Reader {
    chars: Vec<char>,
    pos: usize,
}

fn is_delimiter(ch: char) -> bool {
    matches!(ch, '(' | ')' | '[' | ']' | '{' | '}' | '"' | ';' | '^')
}

fn is_whitespace(ch: char) -> bool {
    ch.is_whitespace() || ch == ','
}

fn is_symbol_char(ch: char) -> bool {
    ch.is_alphanumeric() || "*+!-_'?<>=/.&%$|".contains(ch)
}

impl Reader {
    fn new(text: &str) -> Self {
        Reader { chars: text.chars().collect(), pos: 0 }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn error_at(&self, offset: usize, message: impl Into<String>) -> ReadError {
        ReadError { offset, message: message.into() }
    }

    /// Skips whitespace and comments; returns whether input remains.
    fn skip_trivia(&mut self) -> bool {
        while let Some(ch) = self.peek() {
            if is_whitespace(ch) || (self.pos == 0 && ch == '\u{feff}') {
                self.pos += 1;
            } else if ch == ';' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                return true;
            }
        }
        false
    }

    fn read_form(&mut self) -> Result<Form, ReadError> {
        let start = self.pos;
        let Some(ch) = self.peek() else {
            return Err(self.error_at(start, "unexpected end of input"));
        };
        match ch {
            '^' => self.read_annotated(),
            '(' => self.read_seq(')').map(|items| Form::list(items, Span::new(start, self.pos))),
            '[' => self.read_seq(']').map(|items| Form::vector(items, Span::new(start, self.pos))),
            '{' => self.read_map(),
            ')' | ']' | '}' => Err(self.error_at(start, format!("unexpected '{ch}'"))),
            '"' => self.read_string(),
            _ => self.read_atom(),
        }
    }

    fn read_annotated(&mut self) -> Result<Form, ReadError> {
        let start = self.pos;
        self.pos += 1;
        let meta = match self.peek() {
            Some(':') => {
                let kw = self.read_atom()?;
                match kw.kind {
                    FormKind::Keyword(sym) => {
                        let span = kw.span;
                        let mut meta = Meta::new();
                        meta.insert(sym, Form::new(FormKind::Bool(true), span));
                        meta
                    }
                    _ => return Err(self.error_at(start, "metadata must be a keyword or a map")),
                }
            }
            Some('{') => {
                let map = self.read_map()?;
                let FormKind::Map(pairs) = map.kind else { unreachable!() };
                let mut meta = Meta::new();
                for (k, v) in pairs {
                    match k.kind {
                        FormKind::Keyword(sym) => {
                            meta.insert(sym, v);
                        }
                        _ => return Err(self.error_at(k.span.start, "metadata keys must be keywords")),
                    }
                }
                meta
            }
            _ => return Err(self.error_at(self.pos, "metadata must be a keyword or a map")),
        };
        if !self.skip_trivia() {
            return Err(self.error_at(self.pos, "dangling metadata prefix"));
        }
        if matches!(self.peek(), Some(')' | ']' | '}')) {
            return Err(self.error_at(self.pos, "dangling metadata prefix"));
        }
        let mut target = self.read_form()?;
        let mut merged = target.meta.take().map(|m| *m).unwrap_or_default();
        merged.extend(meta);
        target.span = Span::new(start, target.span.end);
        Ok(target.with_meta(merged))
    }

    fn read_seq(&mut self, close: char) -> Result<Vec<Form>, ReadError> {
        let open_at = self.pos;
        self.pos += 1;
        let mut items = Vec::new();
        loop {
            if !self.skip_trivia() {
                return Err(self.error_at(
                    self.pos,
                    format!("unclosed delimiter opened at offset {open_at}, expected '{close}'"),
                ));
            }
            match self.peek() {
                Some(c) if c == close => {
                    self.pos += 1;
                    return Ok(items);
                }
                Some(c @ (')' | ']' | '}')) => {
                    return Err(self.error_at(
                        self.pos,
                        format!("mismatched delimiter: expected '{close}', found '{c}'"),
                    ));
                }
                _ => items.push(self.read_form()?),
            }
        }
    }

    fn read_map(&mut self) -> Result<Form, ReadError> {
        let start = self.pos;
        let items = self.read_seq('}')?;
        if items.len() % 2 != 0 {
            return Err(self.error_at(start, "map literal must contain an even number of forms"));
        }
        let mut pairs: Vec<(Form, Form)> = Vec::with_capacity(items.len() / 2);
        let mut it = items.into_iter();
        while let (Some(k), Some(v)) = (it.next(), it.next()) {
            if pairs.iter().any(|(existing, _)| *existing == k) {
                return Err(self.error_at(k.span.start, format!("duplicate map key {k}")));
            }
            pairs.push((k, v));
        }
        Ok(Form::new(FormKind::Map(pairs), Span::new(start, self.pos)))
    }

    fn read_string(&mut self) -> Result<Form, ReadError> {
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(ch) = self.peek() else {
                return Err(self.error_at(self.pos, "unterminated string literal"));
            };
            self.pos += 1;
            match ch {
                '"' => break,
                '\\' => {
                    let esc_at = self.pos - 1;
                    let Some(e) = self.peek() else {
                        return Err(self.error_at(self.pos, "unterminated string literal"));
                    };
                    self.pos += 1;
                    match e {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        '"' => out.push('"'),
                        '\\' => out.push('\\'),
                        'u' => {
                            let hex: String = self.chars.iter().skip(self.pos).take(4).collect();
                            let code = (hex.len() == 4)
                                .then(|| u32::from_str_radix(&hex, 16).ok())
                                .flatten()
                                .and_then(char::from_u32);
                            match code {
                                Some(c) => {
                                    out.push(c);
                                    self.pos += 4;
                                }
                                None => return Err(self.error_at(esc_at, "invalid \\u escape")),
                            }
                        }
                        other => {
                            return Err(self.error_at(esc_at, format!("invalid escape '\\{other}'")));
                        }
                    }
                }
                c => out.push(c),
            }
        }
        Ok(Form::string(out, Span::new(start, self.pos)))
    }

    fn read_atom(&mut self) -> Result<Form, ReadError> {
        let start = self.pos;
        while let Some(ch) = self.peek() {
            if is_whitespace(ch) || is_delimiter(ch) {
                break;
            }
            self.pos += 1;
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        let span = Span::new(start, self.pos);
        let kind = classify(&token).map_err(|msg| self.error_at(start, msg))?;
        Ok(Form::new(kind, span))
    }
}

fn classify(token: &str) -> Result<FormKind, String> {
    match token {
        "nil" => return Ok(FormKind::Nil),
        "true" => return Ok(FormKind::Bool(true)),
        "false" => return Ok(FormKind::Bool(false)),
        "##Inf" => return Ok(FormKind::Number(f64::INFINITY)),
        "##-Inf" => return Ok(FormKind::Number(f64::NEG_INFINITY)),
        "##NaN" => return Ok(FormKind::Number(f64::NAN)),
        _ => {}
    }
    let mut chars = token.chars();
    let first = chars.next().ok_or_else(|| "empty token".to_string())?;
    let second = chars.next();
    let numeric = first.is_ascii_digit()
        || (matches!(first, '+' | '-') && second.is_some_and(|c| c.is_ascii_digit()));
    if numeric {
        return token
            .parse::<f64>()
            .map(FormKind::Number)
            .map_err(|_| format!("invalid number '{token}'"));
    }
    if let Some(rest) = token.strip_prefix(':') {
        if rest.is_empty() || rest.starts_with(':') || !rest.chars().all(is_symbol_char) {
            return Err(format!("invalid keyword '{token}'"));
        }
        return Ok(FormKind::Keyword(Sym::parse(rest)));
    }
    if let Some(bad) = token.chars().find(|c| !is_symbol_char(*c)) {
        return Err(format!("unexpected character '{bad}'"));
    }
    Ok(FormKind::Symbol(Sym::parse(token)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> Form {
        let forms = read_all(text).unwrap();
        assert_eq!(forms.len(), 1);
        forms.into_iter().next().unwrap()
    }

    #[test]
    fn smallest_compound_form() {
        let form = one("(+ 1 2)");
        assert_eq!(form.span, Span::new(0, 7));
        let items = form.as_list().unwrap();
        assert!(items[0].is_symbol_named("+"));
        assert_eq!(items[1].kind, FormKind::Number(1.0));
        assert_eq!(items[2].kind, FormKind::Number(2.0));
        assert_eq!(items[2].span, Span::new(5, 6));
    }

    #[test]
    fn visr_shorthand_desugars_to_true() {
        let form = one("^:visr (geometry.core/Diagram \"{}\")");
        assert_eq!(form.span, Span::new(0, 35));
        let flag = form.meta_get("visr").unwrap();
        assert_eq!(flag.kind, FormKind::Bool(true));
        let items = form.as_list().unwrap();
        assert_eq!(items[0].as_symbol().unwrap(), &Sym::qualified("geometry.core", "Diagram"));
        assert_eq!(items[1].as_str(), Some("{}"));
    }

    #[test]
    fn metadata_map_and_stacking() {
        let form = one("^{:visr true :doc \"x\"} ^:private [1]");
        assert!(form.meta_get("visr").unwrap().is_truthy());
        assert!(form.meta_get("private").is_some());
        assert_eq!(form.meta_get("doc").unwrap().as_str(), Some("x"));
        assert_eq!(form.span.start, 0);
    }

    #[test]
    fn unbalanced_reports_end_offset() {
        let err = read_all("(a (b").unwrap_err();
        assert_eq!(err.offset, 5);
    }

    #[test]
    fn mismatched_and_stray_closers() {
        assert_eq!(read_all("(a ]").unwrap_err().offset, 3);
        assert_eq!(read_all("a )").unwrap_err().offset, 2);
    }

    #[test]
    fn dangling_metadata() {
        assert!(read_all("^:visr").unwrap_err().message.contains("dangling"));
        assert!(read_all("(f ^:visr)").unwrap_err().message.contains("dangling"));
        assert!(read_all("^{\"k\" 1} x").unwrap_err().message.contains("keywords"));
    }

    #[test]
    fn bad_escape() {
        let err = read_all(r#""a\qb""#).unwrap_err();
        assert_eq!(err.offset, 2);
        assert_eq!(one(r#""aA\n""#).as_str(), Some("aA\n"));
    }

    #[test]
    fn comments_skipped_but_not_in_strings() {
        let forms = read_all("; header\n(a \"; not a comment\") ; tail\nb").unwrap();
        assert_eq!(forms.len(), 2);
        assert_eq!(forms[0].as_list().unwrap()[1].as_str(), Some("; not a comment"));
    }

    #[test]
    fn duplicate_map_keys_rejected() {
        assert!(read_all("{:a 1 :a 2}").unwrap_err().message.contains("duplicate"));
        assert!(read_all("{:a}").is_err());
    }

    #[test]
    fn atoms() {
        assert_eq!(one("nil").kind, FormKind::Nil);
        assert_eq!(one("-2.5e3").kind, FormKind::Number(-2500.0));
        assert_eq!(one("-").kind, FormKind::Symbol(Sym::new("-")));
        assert_eq!(one("/").kind, FormKind::Symbol(Sym::new("/")));
        assert_eq!(one(":a/b").kind, FormKind::Keyword(Sym::qualified("a", "b")));
        assert!(read_all("1x").is_err());
        assert!(read_all("a@b").is_err());
    }

    #[test]
    fn spans_are_character_offsets() {
        let forms = read_all("\"é\" x").unwrap();
        assert_eq!(forms[0].span, Span::new(0, 3));
        assert_eq!(forms[1].span, Span::new(4, 5));
    }

    #[test]
    fn leading_bom_skipped() {
        let forms = read_all("\u{feff}(a)").unwrap();
        assert_eq!(forms[0].span, Span::new(1, 4));
    }

    #[test]
    fn prefix_survives_error() {
        let (forms, err) = read_prefix("(a) [b] (c");
        assert_eq!(forms.len(), 2);
        assert_eq!(err.unwrap().offset, 10);
    }

    #[test]
    fn read_one_rejects_trailing() {
        assert!(read_one("{} 1").is_err());
        assert!(read_one("  ").is_err());
        assert!(read_one(" {:a 1} ").is_ok());
    }
}
