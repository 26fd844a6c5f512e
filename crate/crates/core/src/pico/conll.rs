//! Two-column CoNLL files (`token<TAB>label`, blank line between sequences)
//! and the bracket markup used for hand annotation.
//!
//! A line `# id: <name>` before a sequence names it; unnamed sequences get
//! `seq-<n>`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{tokenize, validate_bio, BioLabel, LabeledSequence, PicoCategory, PicoSpan};
use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<Vec<LabeledSequence>> {
    let mut out = Vec::new();
    let mut id: Option<String> = None;
    let mut words: Vec<String> = Vec::new();
    let mut labels: Vec<BioLabel> = Vec::new();

    let flush = |id: &mut Option<String>, words: &mut Vec<String>, labels: &mut Vec<BioLabel>, out: &mut Vec<LabeledSequence>| -> Result<()> {
        if words.is_empty() {
            return Ok(());
        }
        let name = id.take().unwrap_or_else(|| format!("seq-{}", out.len()));
        validate_bio(&name, labels)?;
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        out.push(LabeledSequence::from_words(name, &refs, std::mem::take(labels)));
        words.clear();
        Ok(())
    };

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut id, &mut words, &mut labels, &mut out)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(name) = comment.trim().strip_prefix("id:") {
                flush(&mut id, &mut words, &mut labels, &mut out)?;
                id = Some(name.trim().to_string());
            }
            continue;
        }
        let (token, label) = line
            .rsplit_once('\t')
            .or_else(|| line.trim().rsplit_once(char::is_whitespace))
            .ok_or_else(|| Error::parse("CoNLL", format!("line {}: expected `token<TAB>label`", lineno + 1)))?;
        let token = token.trim();
        if token.is_empty() {
            return Err(Error::parse("CoNLL", format!("line {}: empty token", lineno + 1)));
        }
        words.push(token.to_string());
        labels.push(label.parse()?);
    }
    flush(&mut id, &mut words, &mut labels, &mut out)?;
    Ok(out)
}

pub fn to_string(sequences: &[LabeledSequence]) -> String {
    let mut out = String::new();
    for (i, seq) in sequences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        writeln!(out, "# id: {}", seq.id).unwrap();
        for (tok, label) in seq.tokens.iter().zip(&seq.labels) {
            writeln!(out, "{}\t{label}", tok.text).unwrap();
        }
    }
    out
}

/// Reads a CoNLL file, or every `*.conll` file in a directory in name order.
pub fn read(path: impl AsRef<Path>) -> Result<Vec<LabeledSequence>> {
    let path = path.as_ref();
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "conll"))
            .collect();
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };
    let mut out = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        out.extend(parse(&text)?);
    }
    Ok(out)
}

/// Resolves `--data` for one split: a file is used as is; in a directory,
/// `<split>.conll` is preferred, falling back to all `*.conll` files.
pub fn read_split(path: impl AsRef<Path>, split: &str) -> Result<Vec<LabeledSequence>> {
    let path = path.as_ref();
    let candidate = path.join(format!("{split}.conll"));
    if path.is_dir() && candidate.is_file() {
        read(candidate)
    } else {
        read(path)
    }
}

/// A category and its byte span.
pub type MarkupSpan = (PicoCategory, (usize, usize));

/// Parses `[P ...]`, `[I ...]`, `[O ...]` markup into the plain text and its
/// gold spans. Span byte offsets refer to the returned text.
pub fn parse_markup(markup: &str) -> Result<(String, Vec<MarkupSpan>)> {
    let mut text = String::with_capacity(markup.len());
    let mut spans = Vec::new();
    let mut rest = markup;
    while let Some(open) = rest.find('[') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let category = match after.get(..2) {
            Some("P ") => PicoCategory::Population,
            Some("I ") => PicoCategory::Intervention,
            Some("O ") => PicoCategory::Outcome,
            _ => {
                text.push('[');
                rest = after;
                continue;
            }
        };
        let body = &after[2..];
        let close = body
            .find(']')
            .ok_or_else(|| Error::parse("PICO markup", format!("unclosed span at byte {open}")))?;
        let inner = &body[..close];
        if inner.contains('[') {
            return Err(Error::parse("PICO markup", "nested span"));
        }
        let start = text.len();
        text.push_str(inner);
        spans.push((category, (start, text.len())));
        rest = &body[close + 1..];
    }
    text.push_str(rest);
    Ok((text, spans))
}

/// Tokenizes marked-up text and labels every token inside a span.
pub fn from_markup(id: impl Into<String>, markup: &str) -> Result<(String, LabeledSequence)> {
    let (text, spans) = parse_markup(markup)?;
    let tokens = tokenize(&text);
    let mut labels = vec![BioLabel::O; tokens.len()];
    for (category, (start, end)) in spans {
        let mut first = true;
        for (tok, label) in tokens.iter().zip(labels.iter_mut()) {
            if tok.span.0 >= start && tok.span.1 <= end {
                *label = if first { BioLabel::B(category) } else { BioLabel::I(category) };
                first = false;
            }
        }
    }
    Ok((
        text,
        LabeledSequence {
            id: id.into(),
            tokens,
            labels,
        },
    ))
}

/// Renders spans back into bracket markup.
pub fn to_markup(text: &str, spans: &[PicoSpan]) -> String {
    let mut sorted: Vec<&PicoSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| s.span);
    let mut out = String::new();
    let mut at = 0;
    for s in sorted {
        out.push_str(&text[at..s.span.0]);
        write!(out, "[{} {}]", s.category.letter(), &text[s.span.0..s.span.1]).unwrap();
        at = s.span.1;
    }
    out.push_str(&text[at..]);
    out
}
