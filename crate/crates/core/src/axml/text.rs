//! Line-oriented text form of a manifest tree.
//!
//! ```text
//! manifest
//!   @package string "com.example.app"
//!   uses-sdk
//!     @android:minSdkVersion int 23
//! ```
//!
//! Elements are indented two spaces per depth, their attributes one level
//! deeper and prefixed with `@`. The Android namespace prints as `android:`,
//! any other namespace as `{uri}`. Names and URIs that are not plain tokens
//! are written as JSON strings.

use std::fmt::Write;

use thiserror::Error;

use super::{AttrValue, Attribute, Element, ManifestTree, ANDROID_NS};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {reason}")]
pub struct TextError {
    pub line: usize,
    pub reason: String,
}

pub(super) fn serialize(tree: &ManifestTree) -> String {
    let mut out = String::new();
    write_element(&mut out, &tree.root, 0);
    out
}

fn write_element(out: &mut String, el: &Element, depth: usize) {
    let pad = "  ".repeat(depth);
    let _ = writeln!(out, "{pad}{}", token(&el.name, NAME_RESERVED));
    for a in &el.attributes {
        let prefix = match a.namespace.as_deref() {
            None => String::new(),
            Some(ANDROID_NS) => "android:".to_string(),
            Some(uri) => format!("{{{}}}", token(uri, "}")),
        };
        let _ = writeln!(out, "{pad}  @{prefix}{} {}", token(&a.name, NAME_RESERVED), render_value(&a.value));
    }
    for c in &el.children {
        write_element(out, c, depth + 1);
    }
}

const NAME_RESERVED: &str = "{}:@";

fn is_bare(s: &str, reserved: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c.is_control() || c == '"' || reserved.contains(c))
}

/// Names may not contain `{}:@`; URIs only need to avoid `}`.
fn token(s: &str, reserved: &str) -> String {
    if is_bare(s, reserved) {
        s.to_string()
    } else {
        serde_json::to_string(s).expect("strings serialize")
    }
}

/// Reads one name from the front of `s`: a JSON string, or a bare run ending
/// at `stop`. Returns the name and the remainder.
fn take_token(s: &str, stop: char) -> Result<(String, &str), String> {
    if s.starts_with('"') {
        let mut it = serde_json::Deserializer::from_str(s).into_iter::<String>();
        let name = it.next().ok_or("missing name")?.map_err(|e| e.to_string())?;
        return Ok((name, &s[it.byte_offset()..]));
    }
    let end = s.find(stop).unwrap_or(s.len());
    Ok((s[..end].to_string(), &s[end..]))
}

fn render_value(v: &AttrValue) -> String {
    match v {
        AttrValue::String(s) => format!("string {}", serde_json::to_string(s).expect("strings serialize")),
        AttrValue::Int(i) => format!("int {i}"),
        AttrValue::Bool(b) => format!("bool {b}"),
        AttrValue::Reference(r) => format!("ref @0x{r:08x}"),
        AttrValue::Raw { type_code, data } => format!("raw {type_code}:0x{data:08x}"),
    }
}

/// Parses the text form back into a tree.
pub fn parse_text(input: &str) -> Result<ManifestTree, TextError> {
    // open elements as (depth, element)
    let mut stack: Vec<(usize, Element)> = Vec::new();
    let mut root: Option<Element> = None;

    fn close_to(stack: &mut Vec<(usize, Element)>, root: &mut Option<Element>, depth: usize) {
        while stack.last().is_some_and(|(d, _)| *d >= depth) {
            let (_, el) = stack.pop().expect("non-empty");
            match stack.last_mut() {
                Some((_, parent)) => parent.children.push(el),
                None => *root = Some(el),
            }
        }
    }

    for (i, raw) in input.lines().enumerate() {
        let line_no = i + 1;
        let err = |reason: &str| TextError { line: line_no, reason: reason.to_string() };
        if raw.trim().is_empty() {
            continue;
        }
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        if indent % 2 != 0 {
            return Err(err("odd indentation"));
        }
        let depth = indent / 2;
        let body = &raw[indent..];
        if let Some(attr) = body.strip_prefix('@') {
            let Some((owner_depth, owner)) = stack.last_mut() else { return Err(err("attribute outside element")) };
            if *owner_depth + 1 != depth || !owner.children.is_empty() {
                return Err(err("misplaced attribute"));
            }
            owner.attributes.push(parse_attribute(attr).map_err(|r| err(&r))?);
        } else {
            if root.is_some() || (stack.is_empty() && depth != 0) {
                return Err(err("element outside the root"));
            }
            if let Some((top, _)) = stack.last() {
                if depth > top + 1 {
                    return Err(err("indentation skips a level"));
                }
            }
            let name = match take_token(body, ' ') {
                Ok((name, "")) if !name.is_empty() => name,
                _ => return Err(err("bad element name")),
            };
            close_to(&mut stack, &mut root, depth);
            if root.is_some() {
                return Err(err("second root element"));
            }
            stack.push((depth, Element { name, ..Element::default() }));
        }
    }
    close_to(&mut stack, &mut root, 0);
    let root = root.ok_or(TextError { line: 0, reason: "empty document".into() })?;
    Ok(ManifestTree { root })
}

fn parse_attribute(s: &str) -> Result<Attribute, String> {
    let (namespace, local) = if let Some(local) = s.strip_prefix("android:") {
        (Some(ANDROID_NS.to_string()), local)
    } else if let Some(braced) = s.strip_prefix('{') {
        let (uri, rest) = take_token(braced, '}')?;
        (Some(uri), rest.strip_prefix('}').ok_or("unterminated namespace")?)
    } else {
        (None, s)
    };
    let (name, rest) = take_token(local, ' ')?;
    let rest = rest.strip_prefix(' ').ok_or("attribute without value")?;
    let (ty, v) = rest.split_once(' ').ok_or("attribute without value")?;
    let value = match ty {
        "string" => AttrValue::String(serde_json::from_str(v).map_err(|e| e.to_string())?),
        "int" => AttrValue::Int(v.parse().map_err(|_| "bad int")?),
        "bool" => AttrValue::Bool(v.parse().map_err(|_| "bad bool")?),
        "ref" => AttrValue::Reference(parse_hex(v.strip_prefix('@').ok_or("bad ref")?)?),
        "raw" => {
            let (t, d) = v.split_once(':').ok_or("bad raw value")?;
            AttrValue::Raw { type_code: t.parse().map_err(|_| "bad raw type")?, data: parse_hex(d)? }
        }
        other => return Err(format!("unknown value type `{other}`")),
    };
    Ok(Attribute { namespace, name, value })
}

fn parse_hex(s: &str) -> Result<u32, String> {
    let digits = s.strip_prefix("0x").ok_or("expected 0x prefix")?;
    u32::from_str_radix(digits, 16).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_all_value_kinds() {
        let text = "manifest\n  @package string \"a\\\"b\\n\"\n  @{urn:x}k int -5\n  application\n    @android:icon ref @0x7f020000\n    @android:x raw 5:0x00000102\n    @android:y bool false\n  uses-sdk\n";
        let tree = parse_text(text).unwrap();
        assert_eq!(tree.to_text(), text);
        assert_eq!(tree.root.children.len(), 2);
    }

    #[test]
    fn odd_names_are_quoted() {
        let text = "manifest\n  @\"\" int 1\n  @{\"a}b\"}\"x y\" bool true\n  \"two words\"\n    @android:\"a:b\" int 2\n";
        let tree = parse_text(text).unwrap();
        assert_eq!(tree.root.attributes[0].name, "");
        assert_eq!(tree.root.attributes[1].namespace.as_deref(), Some("a}b"));
        assert_eq!(tree.root.attributes[1].name, "x y");
        assert_eq!(tree.root.children[0].name, "two words");
        assert_eq!(tree.to_text(), text);
    }

    #[test]
    fn rejects_bad_layout() {
        assert!(parse_text("").is_err());
        assert!(parse_text("  manifest\n").is_err());
        assert!(parse_text("manifest\n    deep\n").is_err());
        assert!(parse_text("manifest\nsecond\n").is_err());
        assert!(parse_text("manifest\n  child\n  @late int 1\n").is_err());
        assert!(parse_text("manifest\n  @a float 1\n").is_err());
    }
}
