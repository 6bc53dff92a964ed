//! ARFF reader and writer (dense and sparse `@data` rows).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse row: `(attribute index, value)` pairs in increasing index order.
/// Absent indices are zero; `NaN` marks a missing value.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Numeric,
        }
    }

    pub fn nominal(name: impl Into<String>, values: &[&str]) -> Self {
        Attribute {
            name: name.into(),
            kind: AttributeKind::Nominal(values.iter().map(|v| v.to_string()).collect()),
        }
    }

    fn parse_value(&self, raw: &str, line: usize) -> Result<f64> {
        let raw = unquote(raw.trim());
        if raw == "?" {
            return Ok(f64::NAN);
        }
        match &self.kind {
            AttributeKind::Numeric => raw.parse::<f64>().map_err(|_| {
                Error::parse(
                    line,
                    format!("non-numeric value `{raw}` for numeric attribute `{}`", self.name),
                )
            }),
            AttributeKind::Nominal(values) => values
                .iter()
                .position(|v| v == raw)
                .map(|i| i as f64)
                .ok_or_else(|| {
                    Error::parse(
                        line,
                        format!("value `{raw}` is not a level of attribute `{}`", self.name),
                    )
                }),
        }
    }

    fn format_value(&self, v: f64) -> String {
        if v.is_nan() {
            return "?".into();
        }
        match &self.kind {
            AttributeKind::Numeric => format!("{v}"),
            AttributeKind::Nominal(values) => quote_if_needed(&values[v as usize]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArffFile {
    pub relation: String,
    pub attributes: Vec<Attribute>,
    pub rows: Vec<SparseRow>,
}

fn unquote(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn quote_if_needed(s: &str) -> String {
    if s.is_empty()
        || s.chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '{' | '}' | '\'' | '"' | '%' | '?'))
    {
        format!("'{}'", s.replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

/// Splits on `sep`, ignoring separators inside single or double quotes.
fn split_quoted(s: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut quote: Option<char> = None;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == sep => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            None => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// Splits off the first token, honouring a leading quote.
fn next_token(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    let first = s.chars().next()?;
    if first == '\'' || first == '"' {
        let end = s[1..].find(first)? + 1;
        Some((&s[1..end], &s[end + 1..]))
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Some((&s[..end], &s[end..]))
    }
}

fn parse_attribute(rest: &str, line: usize) -> Result<Attribute> {
    let (name, ty) =
        next_token(rest).ok_or_else(|| Error::parse(line, "attribute declaration without a name"))?;
    let ty = ty.trim();
    let kind = if ty.starts_with('{') {
        let inner = ty
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| Error::parse(line, "unterminated nominal specification"))?;
        let values: Vec<String> = split_quoted(inner, ',')
            .into_iter()
            .map(|v| unquote(v.trim()).to_string())
            .collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::parse(line, "empty nominal value"));
        }
        AttributeKind::Nominal(values)
    } else {
        match ty.to_ascii_lowercase().as_str() {
            "numeric" | "real" | "integer" => AttributeKind::Numeric,
            other => {
                return Err(Error::parse(
                    line,
                    format!("unknown attribute type `{other}` for `{name}`"),
                ))
            }
        }
    };
    Ok(Attribute {
        name: name.to_string(),
        kind,
    })
}

pub fn parse_arff(text: &str) -> Result<ArffFile> {
    let mut relation = String::new();
    let mut attributes = Vec::new();
    let mut rows = Vec::new();
    let mut in_data = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = trimmed.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                let rest = &trimmed["@relation".len()..];
                relation = next_token(rest).map(|(n, _)| n.to_string()).unwrap_or_default();
            } else if lower.starts_with("@attribute") {
                attributes.push(parse_attribute(&trimmed["@attribute".len()..], line)?);
            } else if lower.starts_with("@data") {
                in_data = true;
            } else {
                return Err(Error::parse(line, format!("unexpected header line `{trimmed}`")));
            }
            continue;
        }
        rows.push(parse_row(trimmed, &attributes, line)?);
    }
    if !in_data {
        return Err(Error::parse(text.lines().count(), "missing @data section"));
    }
    Ok(ArffFile {
        relation,
        attributes,
        rows,
    })
}

fn parse_row(line_text: &str, attributes: &[Attribute], line: usize) -> Result<SparseRow> {
    let mut row = SparseRow::new();
    if let Some(inner) = line_text.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| Error::parse(line, "unterminated sparse row"))?;
        if inner.trim().is_empty() {
            return Ok(row);
        }
        for entry in split_quoted(inner, ',') {
            let entry = entry.trim();
            let (idx, value) = entry
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(line, format!("malformed sparse entry `{entry}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::parse(line, format!("bad sparse index `{idx}`")))?;
            let attr = attributes.get(idx).ok_or_else(|| {
                Error::parse(
                    line,
                    format!("index {idx} out of range for {} attributes", attributes.len()),
                )
            })?;
            if row.last().is_some_and(|&(prev, _)| prev >= idx) {
                return Err(Error::parse(line, "sparse indices must increase"));
            }
            let v = attr.parse_value(value, line)?;
            if v != 0.0 {
                row.push((idx, v));
            }
        }
    } else {
        let fields = split_quoted(line_text, ',');
        if fields.len() != attributes.len() {
            return Err(Error::parse(
                line,
                format!("expected {} values, found {}", attributes.len(), fields.len()),
            ));
        }
        for (idx, (attr, field)) in attributes.iter().zip(fields).enumerate() {
            let v = attr.parse_value(field, line)?;
            if v != 0.0 {
                row.push((idx, v));
            }
        }
    }
    Ok(row)
}

/// Serializes an ARFF file, writing `@data` rows in sparse or dense form.
pub fn write_arff(file: &ArffFile, sparse: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@relation {}", quote_if_needed(&file.relation));
    out.push('\n');
    for attr in &file.attributes {
        let ty = match &attr.kind {
            AttributeKind::Numeric => "numeric".to_string(),
            AttributeKind::Nominal(values) => format!(
                "{{{}}}",
                values
                    .iter()
                    .map(|v| quote_if_needed(v))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        };
        let _ = writeln!(out, "@attribute {} {ty}", quote_if_needed(&attr.name));
    }
    out.push_str("\n@data\n");
    for row in &file.rows {
        if sparse {
            let entries: Vec<String> = row
                .iter()
                .map(|&(i, v)| format!("{i} {}", file.attributes[i].format_value(v)))
                .collect();
            let _ = writeln!(out, "{{{}}}", entries.join(","));
        } else {
            let mut dense = vec![0.0; file.attributes.len()];
            for &(i, v) in row {
                dense[i] = v;
            }
            let fields: Vec<String> = dense
                .iter()
                .zip(&file.attributes)
                .map(|(&v, a)| a.format_value(v))
                .collect();
            let _ = writeln!(out, "{}", fields.join(","));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_two_attributes() {
        let text = "% comment\n@relation toy\n@attribute a numeric\n@attribute b {x,y}\n@data\n1.5,y\n";
        let f = parse_arff(text).unwrap();
        assert_eq!(f.relation, "toy");
        assert_eq!(f.attributes.len(), 2);
        assert_eq!(f.rows, vec![vec![(0, 1.5), (1, 1.0)]]);
    }

    #[test]
    fn sparse_row_expansion() {
        let mut text = String::from("@relation s\n");
        for i in 0..5 {
            text.push_str(&format!("@attribute f{i} numeric\n"));
        }
        text.push_str("@data\n{0 1, 3 0.5}\n");
        let f = parse_arff(&text).unwrap();
        assert_eq!(f.rows[0], vec![(0, 1.0), (3, 0.5)]);
    }

    #[test]
    fn non_numeric_value_reports_line() {
        let text = "@relation r\n@attribute f1 real\n@data\n1\nabc\n";
        match parse_arff(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_type_and_bad_index() {
        let err = parse_arff("@relation r\n@attribute s string\n@data\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_arff("@relation r\n@attribute a numeric\n@data\n{3 1}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn quoted_names_and_missing_values() {
        let text = "@RELATION 'my data'\n@ATTRIBUTE 'feature one' NUMERIC\n@attribute \"lab\" {'0','1'}\n@DATA\n?,'1'\n";
        let f = parse_arff(text).unwrap();
        assert_eq!(f.relation, "my data");
        assert_eq!(f.attributes[0].name, "feature one");
        assert!(f.rows[0][0].1.is_nan());
        assert_eq!(f.rows[0][1], (1, 1.0));
    }

    #[test]
    fn writer_round_trips() {
        let text = "@relation 'a b'\n@attribute 'x y' numeric\n@attribute c {lo,'h i'}\n@data\n0.25,'h i'\n0,lo\n";
        let f = parse_arff(text).unwrap();
        for sparse in [false, true] {
            assert_eq!(parse_arff(&write_arff(&f, sparse)).unwrap(), f);
        }
    }
}
