//! Canonical API identity shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What kind of API an [`ApiRef`] names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ApiKind {
    // declared in lexical order of the kind names
    Field,
    ManifestAttribute,
    ManifestElement,
    Method,
}

impl ApiKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ApiKind::Method => "method",
            ApiKind::Field => "field",
            ApiKind::ManifestElement => "manifest-element",
            ApiKind::ManifestAttribute => "manifest-attribute",
        }
    }

    /// Methods and fields live in code; the other two kinds come from the manifest.
    pub fn is_member(self) -> bool {
        matches!(self, ApiKind::Method | ApiKind::Field)
    }
}

impl fmt::Display for ApiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApiKind {
    type Err = ApiRefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "method" => ApiKind::Method,
            "field" => ApiKind::Field,
            "manifest-element" => ApiKind::ManifestElement,
            "manifest-attribute" => ApiKind::ManifestAttribute,
            other => return Err(ApiRefParseError::UnknownKind(other.to_string())),
        })
    }
}

/// One API: a method, a field, a manifest element or a manifest attribute.
///
/// For manifest tokens `class` holds the element name and `member` the
/// attribute local name (empty for elements). `descriptor` is empty for
/// manifest tokens.
///
/// Serialized as `kind|class|member|descriptor`; ordering is lexical on
/// `(kind, class, member, descriptor)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApiRef {
    pub kind: ApiKind,
    pub class: String,
    pub member: String,
    pub descriptor: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApiRefParseError {
    #[error("expected 4 `|`-separated fields, found {0}")]
    FieldCount(usize),
    #[error("unknown API kind `{0}`")]
    UnknownKind(String),
    #[error("empty class path")]
    EmptyClass,
}

impl ApiRef {
    pub fn method(class: impl Into<String>, name: impl Into<String>, descriptor: impl Into<String>) -> Self {
        ApiRef { kind: ApiKind::Method, class: class.into(), member: name.into(), descriptor: descriptor.into() }
    }

    pub fn field(class: impl Into<String>, name: impl Into<String>, ty: impl Into<String>) -> Self {
        ApiRef { kind: ApiKind::Field, class: class.into(), member: name.into(), descriptor: ty.into() }
    }

    pub fn element(name: impl Into<String>) -> Self {
        ApiRef { kind: ApiKind::ManifestElement, class: name.into(), member: String::new(), descriptor: String::new() }
    }

    pub fn attribute(element: impl Into<String>, attribute: impl Into<String>) -> Self {
        ApiRef {
            kind: ApiKind::ManifestAttribute,
            class: element.into(),
            member: attribute.into(),
            descriptor: String::new(),
        }
    }

    /// Last path segment of the class, with any enclosing-class part dropped
    /// (`android/os/Build$VERSION` reads as `VERSION`, as it is written in source).
    pub fn simple_class_name(&self) -> &str {
        let last = self.class.rsplit('/').next().unwrap_or(&self.class);
        last.rsplit('$').next().unwrap_or(last)
    }
}

impl fmt::Display for ApiRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}|{}", self.kind, self.class, self.member, self.descriptor)
    }
}

impl FromStr for ApiRef {
    type Err = ApiRefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.splitn(4, '|').collect();
        if parts.len() != 4 {
            return Err(ApiRefParseError::FieldCount(parts.len()));
        }
        let kind: ApiKind = parts[0].parse()?;
        if parts[1].is_empty() {
            return Err(ApiRefParseError::EmptyClass);
        }
        Ok(ApiRef {
            kind,
            class: parts[1].to_string(),
            member: parts[2].to_string(),
            descriptor: parts[3].to_string(),
        })
    }
}

impl Serialize for ApiRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ApiRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_parse() {
        let r = ApiRef::method("android/webkit/WebView", "loadUrl", "(Ljava/lang/String;)V");
        let s = r.to_string();
        assert_eq!(s, "method|android/webkit/WebView|loadUrl|(Ljava/lang/String;)V");
        assert_eq!(s.parse::<ApiRef>().unwrap(), r);
        let e = ApiRef::element("activity");
        assert_eq!(e.to_string(), "manifest-element|activity||");
        assert_eq!("manifest-element|activity||".parse::<ApiRef>().unwrap(), e);
    }

    #[test]
    fn parse_errors() {
        assert_eq!("method|a|b".parse::<ApiRef>(), Err(ApiRefParseError::FieldCount(3)));
        assert!(matches!("bogus|a|b|c".parse::<ApiRef>(), Err(ApiRefParseError::UnknownKind(_))));
        assert_eq!("field||b|I".parse::<ApiRef>(), Err(ApiRefParseError::EmptyClass));
    }

    #[test]
    fn simple_names() {
        assert_eq!(ApiRef::field("android/os/Build$VERSION", "SDK_INT", "I").simple_class_name(), "VERSION");
        assert_eq!(ApiRef::method("android/webkit/WebView", "x", "()V").simple_class_name(), "WebView");
        assert_eq!(ApiRef::element("activity").simple_class_name(), "activity");
    }
}
