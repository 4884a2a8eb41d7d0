//! Tolerant lexing of the bracketed lists models emit: JSON-ish arrays with
//! double-quoted, single-quoted or bare elements, possibly nested, possibly
//! wrapped in prose or code fences.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Text(String),
    List(Vec<Node>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at byte {offset}")]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

fn err(offset: usize, message: impl Into<String>) -> LexError {
    LexError {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    /// Skip junk after a quoted element up to the next `,` or `]`.
    fn skip_to_separator(&mut self) {
        while let Some(c) = self.peek() {
            if c == ',' || c == ']' {
                return;
            }
            self.bump();
        }
    }

    fn double_quoted(&mut self, close: char) -> Result<String, LexError> {
        let start = self.pos;
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(err(start, "unterminated string")),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('u') => {
                        let hex: String = (0..4).filter_map(|_| self.bump()).collect();
                        match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                            Some(c) => out.push(c),
                            None => return Err(err(self.pos, "bad unicode escape")),
                        }
                    }
                    Some(c) => out.push(c),
                    None => return Err(err(start, "unterminated string")),
                },
                Some(c) if c == close => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }

    /// Single-quoted element: closes at a `'` followed by `,` or `]`, so
    /// apostrophes inside words survive.
    fn single_quoted(&mut self) -> Result<String, LexError> {
        let start = self.pos;
        self.bump();
        let rest = &self.text[self.pos..];
        let mut search = 0;
        while let Some(found) = rest[search..].find('\'') {
            let idx = search + found;
            let after = rest[idx + 1..].trim_start();
            if after.starts_with(',') || after.starts_with(']') {
                let out = rest[..idx].to_string();
                self.pos += idx + 1;
                return Ok(out);
            }
            search = idx + 1;
        }
        Err(err(start, "unterminated single-quoted string"))
    }

    fn bare(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == ',' || c == ']' {
                break;
            }
            self.bump();
        }
        self.text[start..self.pos].trim().to_string()
    }

    fn list(&mut self) -> Result<Vec<Node>, LexError> {
        let open = self.pos;
        debug_assert_eq!(self.peek(), Some('['));
        self.bump();
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None => return Err(err(open, "unclosed `[`")),
                Some(']') => {
                    self.bump();
                    return Ok(items);
                }
                Some(',') => {
                    self.bump();
                    continue;
                }
                Some('[') => items.push(Node::List(self.list()?)),
                Some('"') => {
                    items.push(Node::Text(self.double_quoted('"')?));
                    self.skip_to_separator();
                }
                Some('“') => {
                    items.push(Node::Text(self.double_quoted('”')?));
                    self.skip_to_separator();
                }
                Some('\'') => {
                    items.push(Node::Text(self.single_quoted()?));
                    self.skip_to_separator();
                }
                Some(_) => {
                    let text = self.bare();
                    if !text.is_empty() {
                        items.push(Node::Text(text));
                    }
                }
            }
        }
    }
}

/// Parse the list whose `[` sits at byte `open`. Returns the elements and the
/// byte offset just past the closing `]`.
pub fn parse_list_at(text: &str, open: usize) -> Result<(Vec<Node>, usize), LexError> {
    let mut cursor = Cursor { text, pos: open };
    if cursor.peek() != Some('[') {
        return Err(err(open, "expected `[`"));
    }
    let items = cursor.list()?;
    Ok((items, cursor.pos))
}

/// Byte range of the bracketed region starting at `open`, honoring nesting
/// and double quotes only (apostrophes are left alone).
pub fn bracket_span(text: &str, open: usize) -> Result<(usize, usize), LexError> {
    let mut depth = 0usize;
    let mut in_quote = false;
    let mut escaped = false;
    for (i, c) in text[open..].char_indices() {
        let at = open + i;
        if in_quote {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_quote = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_quote = true,
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Ok((open + 1, at));
                }
            }
            _ => {}
        }
    }
    Err(err(open, "unclosed `[`"))
}

/// Split on top-level commas (outside double quotes, brackets and braces).
pub fn split_top_level(body: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut in_quote, mut escaped, mut start) = (0i32, false, false, 0);
    for (i, c) in body.char_indices() {
        if in_quote {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_quote = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_quote = true,
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&body[start..]);
    parts
}

/// Strip one layer of matching quotes and markdown emphasis.
pub fn unquote(text: &str) -> &str {
    let t = text.trim().trim_matches('*').trim();
    for (open, close) in [('"', '"'), ('\'', '\''), ('“', '”'), ('`', '`')] {
        if t.len() >= 2 && t.starts_with(open) && t.ends_with(close) {
            return t[open.len_utf8()..t.len() - close.len_utf8()].trim();
        }
    }
    t
}

/// A `name: [` key occurrence found in free text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyHit {
    pub key: String,
    pub start: usize,
    pub open: usize,
}

/// Find `key: [` occurrences for keys matched by `key_pattern` (a regex
/// alternation). Keys may be quoted or bolded.
pub fn find_keys(text: &str, key_pattern: &str) -> Vec<KeyHit> {
    let re = Regex::new(&format!(r#"(?i)\b({key_pattern})\b["'*\s]*:["'*\s]*\["#)).expect("key regex");
    re.captures_iter(text)
        .map(|caps| {
            let whole = caps.get(0).expect("match");
            KeyHit {
                key: caps[1].to_ascii_lowercase(),
                start: whole.start(),
                open: whole.end() - 1,
            }
        })
        .collect()
}

static BRACKET_GROUP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").expect("static regex"));

/// `"[a, b], [c]"` → `[["a", "b"], ["c"]]`.
pub fn bracket_groups(text: &str) -> Vec<Vec<String>> {
    BRACKET_GROUP
        .captures_iter(text)
        .map(|caps| split_items(&caps[1]))
        .collect()
}

/// Comma-separated items, unquoted, empty ones dropped.
pub fn split_items(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| unquote(s).to_string())
        .filter(|s| !s.is_empty())
        .collect()
}
