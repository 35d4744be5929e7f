//! Binary AndroidManifest.xml decoding.

mod text;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::api::ApiRef;

pub use text::{parse_text, TextError};

pub const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";

const RES_XML_TYPE: u16 = 0x0003;
const RES_STRING_POOL_TYPE: u16 = 0x0001;
const RES_XML_RESOURCE_MAP_TYPE: u16 = 0x0180;
const RES_XML_START_ELEMENT_TYPE: u16 = 0x0102;
const RES_XML_END_ELEMENT_TYPE: u16 = 0x0103;
const UTF8_FLAG: u32 = 0x100;
const NONE: u32 = 0xFFFF_FFFF;

pub const MAX_API_LEVEL: u32 = 40;

/// Attribute names keyed by framework resource id, used when an attribute's
/// pool string has been blanked out (a common shrinker trick).
const ANDROID_ATTRS: &[(u32, &str)] = &[
    (0x0101_0000, "theme"),
    (0x0101_0001, "label"),
    (0x0101_0002, "icon"),
    (0x0101_0003, "name"),
    (0x0101_0004, "manageSpaceActivity"),
    (0x0101_0005, "allowClearUserData"),
    (0x0101_0006, "permission"),
    (0x0101_0007, "readPermission"),
    (0x0101_0008, "writePermission"),
    (0x0101_0009, "protectionLevel"),
    (0x0101_000A, "permissionGroup"),
    (0x0101_000B, "sharedUserId"),
    (0x0101_000C, "hasCode"),
    (0x0101_000D, "persistent"),
    (0x0101_000E, "enabled"),
    (0x0101_000F, "debuggable"),
    (0x0101_0010, "exported"),
    (0x0101_0011, "process"),
    (0x0101_0012, "taskAffinity"),
    (0x0101_0013, "multiprocess"),
    (0x0101_0014, "finishOnTaskLaunch"),
    (0x0101_0015, "clearTaskOnLaunch"),
    (0x0101_0016, "stateNotNeeded"),
    (0x0101_0017, "excludeFromRecents"),
    (0x0101_0018, "authorities"),
    (0x0101_0019, "syncable"),
    (0x0101_001A, "initOrder"),
    (0x0101_001B, "grantUriPermissions"),
    (0x0101_001C, "priority"),
    (0x0101_001D, "launchMode"),
    (0x0101_001E, "screenOrientation"),
    (0x0101_001F, "configChanges"),
    (0x0101_0020, "description"),
    (0x0101_0021, "targetPackage"),
    (0x0101_0022, "handleProfiling"),
    (0x0101_0023, "functionalTest"),
    (0x0101_0024, "value"),
    (0x0101_0025, "resource"),
    (0x0101_0026, "mimeType"),
    (0x0101_0027, "scheme"),
    (0x0101_0028, "host"),
    (0x0101_0029, "port"),
    (0x0101_002A, "path"),
    (0x0101_002B, "pathPrefix"),
    (0x0101_002C, "pathPattern"),
    (0x0101_002D, "action"),
    (0x0101_002E, "data"),
    (0x0101_002F, "targetClass"),
    (0x0101_020C, "minSdkVersion"),
    (0x0101_021B, "versionCode"),
    (0x0101_021C, "versionName"),
    (0x0101_022B, "windowSoftInputMode"),
    (0x0101_0270, "targetSdkVersion"),
    (0x0101_0271, "maxSdkVersion"),
    (0x0101_0280, "allowBackup"),
    (0x0101_02B7, "installLocation"),
    (0x0101_02D3, "hardwareAccelerated"),
    (0x0101_035A, "largeHeap"),
    (0x0101_03AF, "supportsRtl"),
    (0x0101_04EC, "usesCleartextTraffic"),
    (0x0101_0527, "networkSecurityConfig"),
    (0x0101_052C, "roundIcon"),
];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AxmlError {
    #[error("not a binary XML document")]
    NotBinaryXml,
    #[error("chunk at offset {0:#x} is truncated")]
    TruncatedChunk(usize),
    #[error("end tag at offset {offset:#x} closes `{name}` with no matching start tag")]
    DanglingEndTag { offset: usize, name: String },
    #[error("string index {0} out of range")]
    BadStringIndex(u32),
    #[error("malformed string pool: {0}")]
    BadStringPool(&'static str),
    #[error("document has no root element")]
    NoRoot,
    #[error("root element is `{0}`, expected `manifest`")]
    UnexpectedRoot(String),
}

/// A decoded attribute value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrValue {
    String(String),
    /// Decimal and hex integer types alike.
    Int(i32),
    Bool(bool),
    Reference(u32),
    Raw { type_code: u8, data: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    /// Namespace URI, if any.
    pub namespace: Option<String>,
    pub name: String,
    pub value: AttrValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub children: Vec<Element>,
}

impl Element {
    pub fn attr(&self, local_name: &str) -> Option<&AttrValue> {
        self.attributes.iter().find(|a| a.name == local_name).map(|a| &a.value)
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a Element>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestTree {
    pub root: Element,
}

impl ManifestTree {
    /// Every element, depth-first in document order.
    pub fn elements(&self) -> Vec<&Element> {
        let mut out = Vec::new();
        self.root.walk(&mut out);
        out
    }

    pub fn to_text(&self) -> String {
        text::serialize(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdkLevels {
    pub min_level: u32,
    pub target_level: u32,
}

struct Reader<'a> {
    data: &'a [u8],
}

impl Reader<'_> {
    fn u16(&self, at: usize) -> Option<u16> {
        let b = self.data.get(at..at.checked_add(2)?)?;
        Some(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, at: usize) -> Option<u32> {
        let b = self.data.get(at..at.checked_add(4)?)?;
        Some(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn parse_string_pool(chunk: &[u8], at: usize) -> Result<Vec<String>, AxmlError> {
    let r = Reader { data: chunk };
    let trunc = AxmlError::TruncatedChunk(at);
    let count = r.u32(8).ok_or(trunc.clone())? as usize;
    let flags = r.u32(16).ok_or(trunc.clone())?;
    let strings_start = r.u32(20).ok_or(trunc.clone())? as usize;
    let utf8 = flags & UTF8_FLAG != 0;
    let header_size = r.u16(2).ok_or(trunc.clone())? as usize;
    if count.checked_mul(4).and_then(|n| n.checked_add(header_size)).is_none_or(|end| end > chunk.len()) {
        return Err(trunc);
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let off = r.u32(header_size + 4 * i).ok_or(trunc.clone())? as usize;
        let pos = strings_start.checked_add(off).ok_or(AxmlError::BadStringPool("offset overflow"))?;
        out.push(if utf8 { read_utf8(chunk, pos)? } else { read_utf16(chunk, pos)? });
    }
    Ok(out)
}

fn read_utf8(chunk: &[u8], mut pos: usize) -> Result<String, AxmlError> {
    let len8 = |pos: &mut usize| -> Result<usize, AxmlError> {
        let b0 = *chunk.get(*pos).ok_or(AxmlError::BadStringPool("utf-8 length"))? as usize;
        *pos += 1;
        if b0 & 0x80 == 0 {
            return Ok(b0);
        }
        let b1 = *chunk.get(*pos).ok_or(AxmlError::BadStringPool("utf-8 length"))? as usize;
        *pos += 1;
        Ok(((b0 & 0x7F) << 8) | b1)
    };
    let _utf16_len = len8(&mut pos)?;
    let byte_len = len8(&mut pos)?;
    let bytes = chunk.get(pos..pos + byte_len).ok_or(AxmlError::BadStringPool("utf-8 data"))?;
    Ok(String::from_utf8_lossy(bytes).into_owned())
}

fn read_utf16(chunk: &[u8], mut pos: usize) -> Result<String, AxmlError> {
    let r = Reader { data: chunk };
    let first = r.u16(pos).ok_or(AxmlError::BadStringPool("utf-16 length"))? as usize;
    pos += 2;
    let len = if first & 0x8000 != 0 {
        let second = r.u16(pos).ok_or(AxmlError::BadStringPool("utf-16 length"))? as usize;
        pos += 2;
        ((first & 0x7FFF) << 16) | second
    } else {
        first
    };
    let units = (0..len)
        .map(|k| r.u16(pos + 2 * k).ok_or(AxmlError::BadStringPool("utf-16 data")))
        .collect::<Result<Vec<u16>, _>>()?;
    Ok(String::from_utf16_lossy(&units))
}

/// Decodes a binary XML document whose root is `<manifest>`.
pub fn parse_manifest(payload: &[u8]) -> Result<ManifestTree, AxmlError> {
    let r = Reader { data: payload };
    if r.u16(0) != Some(RES_XML_TYPE) {
        return Err(AxmlError::NotBinaryXml);
    }
    let header_size = r.u16(2).ok_or(AxmlError::NotBinaryXml)? as usize;
    let doc_size = r.u32(4).ok_or(AxmlError::NotBinaryXml)? as usize;
    if header_size < 8 || doc_size < header_size {
        return Err(AxmlError::NotBinaryXml);
    }
    if doc_size > payload.len() {
        return Err(AxmlError::TruncatedChunk(0));
    }

    let mut strings: Vec<String> = Vec::new();
    let mut resource_ids: Vec<u32> = Vec::new();
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    let mut at = header_size;
    while at < doc_size {
        let trunc = AxmlError::TruncatedChunk(at);
        let ty = r.u16(at).ok_or(trunc.clone())?;
        let chunk_header = r.u16(at + 2).ok_or(trunc.clone())? as usize;
        let size = r.u32(at + 4).ok_or(trunc.clone())? as usize;
        if size < 8 || chunk_header > size || at.checked_add(size).is_none_or(|end| end > doc_size) {
            return Err(trunc);
        }
        let chunk = &payload[at..at + size];
        let c = Reader { data: chunk };
        match ty {
            RES_STRING_POOL_TYPE => strings = parse_string_pool(chunk, at)?,
            RES_XML_RESOURCE_MAP_TYPE => {
                resource_ids = (chunk_header..size).step_by(4).filter_map(|o| c.u32(o)).collect();
            }
            RES_XML_START_ELEMENT_TYPE => {
                let body = chunk_header;
                let name_idx = c.u32(body + 4).ok_or(trunc.clone())?;
                let attr_start = c.u16(body + 8).ok_or(trunc.clone())? as usize;
                let attr_size = c.u16(body + 10).ok_or(trunc.clone())? as usize;
                let attr_count = c.u16(body + 12).ok_or(trunc.clone())? as usize;
                let name = lookup(&strings, name_idx)?.to_string();
                let mut attributes = Vec::with_capacity(attr_count);
                for k in 0..attr_count {
                    let a = body + attr_start + k * attr_size;
                    let ns_idx = c.u32(a).ok_or(trunc.clone())?;
                    let an_idx = c.u32(a + 4).ok_or(trunc.clone())?;
                    let raw_idx = c.u32(a + 8).ok_or(trunc.clone())?;
                    let type_code = *chunk.get(a + 15).ok_or(trunc.clone())?;
                    let data = c.u32(a + 16).ok_or(trunc.clone())?;
                    let namespace = if ns_idx == NONE { None } else { Some(lookup(&strings, ns_idx)?.to_string()) };
                    let attr_name = attribute_name(&strings, &resource_ids, an_idx)?;
                    let value = match type_code {
                        0x03 => {
                            let idx = if raw_idx != NONE { raw_idx } else { data };
                            AttrValue::String(lookup(&strings, idx)?.to_string())
                        }
                        0x10 | 0x11 => AttrValue::Int(data as i32),
                        0x12 => AttrValue::Bool(data != 0),
                        0x01 => AttrValue::Reference(data),
                        other => AttrValue::Raw { type_code: other, data },
                    };
                    attributes.push(Attribute { namespace, name: attr_name, value });
                }
                stack.push(Element { name, attributes, children: Vec::new() });
            }
            RES_XML_END_ELEMENT_TYPE => {
                let name_idx = c.u32(chunk_header + 4).ok_or(trunc.clone())?;
                let name = lookup(&strings, name_idx)?.to_string();
                let el = match stack.pop() {
                    Some(el) if el.name == name => el,
                    _ => return Err(AxmlError::DanglingEndTag { offset: at, name }),
                };
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    // a second top-level element; the manifest is the first
                    None => {}
                }
            }
            // namespaces, text, CDATA and unknown chunks carry nothing we need
            _ => {}
        }
        at += size;
    }
    if !stack.is_empty() {
        return Err(AxmlError::TruncatedChunk(doc_size));
    }
    let root = root.ok_or(AxmlError::NoRoot)?;
    if root.name != "manifest" {
        return Err(AxmlError::UnexpectedRoot(root.name));
    }
    Ok(ManifestTree { root })
}

fn lookup(strings: &[String], idx: u32) -> Result<&str, AxmlError> {
    strings.get(idx as usize).map(String::as_str).ok_or(AxmlError::BadStringIndex(idx))
}

fn attribute_name(strings: &[String], resource_ids: &[u32], idx: u32) -> Result<String, AxmlError> {
    let pooled = lookup(strings, idx)?;
    if !pooled.is_empty() {
        return Ok(pooled.to_string());
    }
    let Some(&res_id) = resource_ids.get(idx as usize) else { return Ok(String::new()) };
    Ok(match ANDROID_ATTRS.binary_search_by_key(&res_id, |&(id, _)| id) {
        Ok(i) => ANDROID_ATTRS[i].1.to_string(),
        Err(_) => format!("res_0x{res_id:08x}"),
    })
}

/// One token per element name and one per (element, attribute local name).
pub fn manifest_api_tokens(tree: &ManifestTree) -> BTreeSet<ApiRef> {
    let mut out = BTreeSet::new();
    for el in tree.elements() {
        out.insert(ApiRef::element(&el.name));
        for a in &el.attributes {
            out.insert(ApiRef::attribute(&el.name, &a.name));
        }
    }
    out
}

/// Reads `<uses-sdk>`. Missing min is 1, missing target is min; levels are
/// clamped to `1..=MAX_API_LEVEL` and target is raised to at least min.
pub fn sdk_levels(tree: &ManifestTree) -> SdkLevels {
    let uses_sdk = tree.root.children.iter().find(|c| c.name == "uses-sdk");
    let level = |name: &str| -> Option<u32> {
        match uses_sdk?.attr(name)? {
            AttrValue::Int(v) => Some((*v).clamp(1, MAX_API_LEVEL as i32) as u32),
            AttrValue::String(s) => s.trim().parse::<u32>().ok().map(|v| v.clamp(1, MAX_API_LEVEL)),
            _ => None,
        }
    };
    let min_level = level("minSdkVersion").unwrap_or(1);
    let target_level = level("targetSdkVersion").unwrap_or(min_level).max(min_level);
    SdkLevels { min_level, target_level }
}
