//! DEX container parsing down to the id pools and class definitions.
//!
//! Instructions are never decoded. Usage is read off the `field_ids` and
//! `method_ids` tables, which list every member the container references
//! (including the ones it defines). Members referenced only from
//! annotations also land in those tables, so usage is a slight
//! over-approximation.

pub mod mutf8;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::api::ApiRef;

const NO_INDEX: u32 = 0xFFFF_FFFF;
const ENDIAN_CONSTANT: u32 = 0x1234_5678;
const HEADER_SIZE: usize = 0x70;
const SUPPORTED_VERSIONS: [&[u8; 3]; 4] = [b"035", b"037", b"038", b"039"];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DexError {
    #[error("bad DEX magic")]
    BadMagic,
    #[error("unsupported DEX version {0}")]
    UnsupportedVersion(String),
    #[error("unsupported endian tag {0:#010x}")]
    UnsupportedEndian(u32),
    #[error("{what} at offset {offset:#x} lies outside the {len}-byte payload")]
    OutOfBoundsOffset { what: &'static str, offset: u64, len: usize },
    #[error("{what} index {index} out of range")]
    BadIndex { what: &'static str, index: u32 },
    #[error("malformed MUTF-8 in string #{0}")]
    MalformedMutf8(u32),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("class {class} defines member owned by {owner}")]
    ForeignMember { class: String, owner: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MemberKind {
    Method,
    Field,
}

/// A method or field reference in slash-form class paths and DEX descriptor
/// syntax, e.g. `android/webkit/WebView.loadUrl(Ljava/lang/String;)V`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MemberRef {
    pub owner_class: String,
    pub name: String,
    /// Method prototype `(params)ret` or field type.
    pub descriptor: String,
    pub kind: MemberKind,
}

impl MemberRef {
    pub fn method(owner: impl Into<String>, name: impl Into<String>, descriptor: impl Into<String>) -> Self {
        MemberRef { owner_class: owner.into(), name: name.into(), descriptor: descriptor.into(), kind: MemberKind::Method }
    }

    pub fn field(owner: impl Into<String>, name: impl Into<String>, ty: impl Into<String>) -> Self {
        MemberRef { owner_class: owner.into(), name: name.into(), descriptor: ty.into(), kind: MemberKind::Field }
    }

    pub fn with_owner(&self, owner: impl Into<String>) -> Self {
        MemberRef { owner_class: owner.into(), ..self.clone() }
    }

    pub fn to_api(&self) -> ApiRef {
        match self.kind {
            MemberKind::Method => ApiRef::method(&self.owner_class, &self.name, &self.descriptor),
            MemberKind::Field => ApiRef::field(&self.owner_class, &self.name, &self.descriptor),
        }
    }
}

impl fmt::Display for MemberRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_api().fmt(f)
    }
}

/// A class defined in the container.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassDef {
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub members: BTreeSet<MemberRef>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DexPool {
    pub strings: Vec<String>,
    /// Type paths: `Lfoo/Bar;` becomes `foo/Bar`; primitives and arrays keep
    /// their descriptor form.
    pub types: Vec<String>,
    pub defined_classes: BTreeMap<String, ClassDef>,
    pub referenced_members: BTreeSet<MemberRef>,
}

/// `Lfoo/Bar;` → `foo/Bar`; anything else is returned unchanged.
pub fn type_path(descriptor: &str) -> &str {
    descriptor
        .strip_prefix('L')
        .and_then(|d| d.strip_suffix(';'))
        .unwrap_or(descriptor)
}

struct Bytes<'a> {
    data: &'a [u8],
}

impl<'a> Bytes<'a> {
    fn slice(&self, what: &'static str, offset: u64, len: u64) -> Result<&'a [u8], DexError> {
        let oob = DexError::OutOfBoundsOffset { what, offset, len: self.data.len() };
        let end = offset.checked_add(len).ok_or(oob.clone())?;
        if end > self.data.len() as u64 {
            return Err(oob);
        }
        Ok(&self.data[offset as usize..end as usize])
    }

    fn u16(&self, what: &'static str, offset: u64) -> Result<u16, DexError> {
        let b = self.slice(what, offset, 2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, what: &'static str, offset: u64) -> Result<u32, DexError> {
        let b = self.slice(what, offset, 4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads a ULEB128 value at `*pos`, advancing it.
    fn uleb(&self, what: &'static str, pos: &mut u64) -> Result<u32, DexError> {
        let mut result: u32 = 0;
        for i in 0..5 {
            let b = self.slice(what, *pos, 1)?[0];
            *pos += 1;
            result |= u32::from(b & 0x7F) << (7 * i);
            if b & 0x80 == 0 {
                return Ok(result);
            }
        }
        Err(DexError::Malformed("uleb128"))
    }
}

struct Section {
    size: u32,
    offset: u32,
}

/// Parses one DEX payload.
pub fn parse_dex(payload: &[u8]) -> Result<DexPool, DexError> {
    if payload.len() < 8 || &payload[0..4] != b"dex\n" || payload[7] != 0 {
        return Err(DexError::BadMagic);
    }
    let version: &[u8; 3] = payload[4..7].try_into().expect("3-byte slice");
    if !SUPPORTED_VERSIONS.contains(&version) {
        return Err(DexError::UnsupportedVersion(String::from_utf8_lossy(version).into_owned()));
    }
    let bytes = Bytes { data: payload };
    bytes.slice("header", 0, HEADER_SIZE as u64)?;
    let endian = bytes.u32("endian_tag", 0x28)?;
    if endian != ENDIAN_CONSTANT {
        return Err(DexError::UnsupportedEndian(endian));
    }
    let file_size = bytes.u32("file_size", 0x20)?;
    if u64::from(file_size) > payload.len() as u64 {
        return Err(DexError::OutOfBoundsOffset { what: "file_size", offset: file_size.into(), len: payload.len() });
    }
    let section = |at: u64| -> Result<Section, DexError> {
        Ok(Section { size: bytes.u32("header", at)?, offset: bytes.u32("header", at + 4)? })
    };
    let string_ids = section(0x38)?;
    let type_ids = section(0x40)?;
    let proto_ids = section(0x48)?;
    let field_ids = section(0x50)?;
    let method_ids = section(0x58)?;
    let class_defs = section(0x60)?;

    // string_ids → string_data_item
    bytes.slice("string_ids", u64::from(string_ids.offset), u64::from(string_ids.size) * 4)?;
    let mut strings = Vec::with_capacity(string_ids.size as usize);
    for i in 0..string_ids.size {
        let data_off = bytes.u32("string_ids", u64::from(string_ids.offset) + u64::from(i) * 4)?;
        let mut pos = u64::from(data_off);
        let utf16_len = bytes.uleb("string_data_item", &mut pos)?;
        bytes.slice("string_data_item", pos, 0)?;
        let tail = &payload[pos as usize..];
        let nul = tail.iter().position(|&b| b == 0).ok_or(DexError::OutOfBoundsOffset {
            what: "string_data_item",
            offset: pos,
            len: payload.len(),
        })?;
        let s = mutf8::decode(&tail[..nul], utf16_len as usize).ok_or(DexError::MalformedMutf8(i))?;
        strings.push(s);
    }
    let string = |what: &'static str, idx: u32| -> Result<&str, DexError> {
        strings.get(idx as usize).map(String::as_str).ok_or(DexError::BadIndex { what, index: idx })
    };

    bytes.slice("type_ids", u64::from(type_ids.offset), u64::from(type_ids.size) * 4)?;
    let mut type_descriptors = Vec::with_capacity(type_ids.size as usize);
    for i in 0..type_ids.size {
        let sidx = bytes.u32("type_ids", u64::from(type_ids.offset) + u64::from(i) * 4)?;
        type_descriptors.push(string("type descriptor string", sidx)?.to_string());
    }
    let type_desc = |idx: u32| -> Result<&str, DexError> {
        type_descriptors.get(idx as usize).map(String::as_str).ok_or(DexError::BadIndex { what: "type", index: idx })
    };

    let read_type_list = |offset: u32| -> Result<Vec<u32>, DexError> {
        if offset == 0 {
            return Ok(Vec::new());
        }
        let n = bytes.u32("type_list", u64::from(offset))?;
        bytes.slice("type_list", u64::from(offset) + 4, u64::from(n) * 2)?;
        (0..n).map(|k| bytes.u16("type_list", u64::from(offset) + 4 + u64::from(k) * 2).map(u32::from)).collect()
    };

    bytes.slice("proto_ids", u64::from(proto_ids.offset), u64::from(proto_ids.size) * 12)?;
    let mut protos = Vec::with_capacity(proto_ids.size as usize);
    for i in 0..proto_ids.size {
        let base = u64::from(proto_ids.offset) + u64::from(i) * 12;
        let return_idx = bytes.u32("proto_ids", base + 4)?;
        let params_off = bytes.u32("proto_ids", base + 8)?;
        let mut desc = String::from("(");
        for p in read_type_list(params_off)? {
            desc.push_str(type_desc(p)?);
        }
        desc.push(')');
        desc.push_str(type_desc(return_idx)?);
        protos.push(desc);
    }

    bytes.slice("field_ids", u64::from(field_ids.offset), u64::from(field_ids.size) * 8)?;
    let mut fields = Vec::with_capacity(field_ids.size as usize);
    for i in 0..field_ids.size {
        let base = u64::from(field_ids.offset) + u64::from(i) * 8;
        let class_idx = bytes.u16("field_ids", base)?;
        let type_idx = bytes.u16("field_ids", base + 2)?;
        let name_idx = bytes.u32("field_ids", base + 4)?;
        fields.push(MemberRef::field(
            type_path(type_desc(u32::from(class_idx))?),
            string("field name", name_idx)?,
            type_desc(u32::from(type_idx))?,
        ));
    }

    bytes.slice("method_ids", u64::from(method_ids.offset), u64::from(method_ids.size) * 8)?;
    let mut methods = Vec::with_capacity(method_ids.size as usize);
    for i in 0..method_ids.size {
        let base = u64::from(method_ids.offset) + u64::from(i) * 8;
        let class_idx = bytes.u16("method_ids", base)?;
        let proto_idx = bytes.u16("method_ids", base + 2)?;
        let name_idx = bytes.u32("method_ids", base + 4)?;
        let proto = protos.get(proto_idx as usize).ok_or(DexError::BadIndex { what: "proto", index: proto_idx.into() })?;
        methods.push(MemberRef::method(
            type_path(type_desc(u32::from(class_idx))?),
            string("method name", name_idx)?,
            proto.clone(),
        ));
    }

    bytes.slice("class_defs", u64::from(class_defs.offset), u64::from(class_defs.size) * 32)?;
    let mut defined_classes = BTreeMap::new();
    for i in 0..class_defs.size {
        let base = u64::from(class_defs.offset) + u64::from(i) * 32;
        let class_idx = bytes.u32("class_defs", base)?;
        let super_idx = bytes.u32("class_defs", base + 8)?;
        let interfaces_off = bytes.u32("class_defs", base + 12)?;
        let class_data_off = bytes.u32("class_defs", base + 24)?;
        let class = type_path(type_desc(class_idx)?).to_string();
        let superclass = if super_idx == NO_INDEX { None } else { Some(type_path(type_desc(super_idx)?).to_string()) };
        let interfaces = read_type_list(interfaces_off)?
            .into_iter()
            .map(|t| type_desc(t).map(|d| type_path(d).to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut members = BTreeSet::new();
        if class_data_off != 0 {
            read_class_data(&bytes, u64::from(class_data_off), &fields, &methods, &mut members)?;
        }
        if let Some(foreign) = members.iter().find(|m| m.owner_class != class) {
            return Err(DexError::ForeignMember { class, owner: foreign.owner_class.clone() });
        }
        defined_classes.insert(class, ClassDef { superclass, interfaces, members });
    }

    let types = type_descriptors.iter().map(|d| type_path(d).to_string()).collect();
    let referenced_members = fields.into_iter().chain(methods).collect();
    Ok(DexPool { strings, types, defined_classes, referenced_members })
}

fn read_class_data(
    bytes: &Bytes<'_>,
    offset: u64,
    fields: &[MemberRef],
    methods: &[MemberRef],
    out: &mut BTreeSet<MemberRef>,
) -> Result<(), DexError> {
    let mut pos = offset;
    let static_fields = bytes.uleb("class_data_item", &mut pos)?;
    let instance_fields = bytes.uleb("class_data_item", &mut pos)?;
    let direct_methods = bytes.uleb("class_data_item", &mut pos)?;
    let virtual_methods = bytes.uleb("class_data_item", &mut pos)?;

    for count in [static_fields, instance_fields] {
        let mut idx: u32 = 0;
        for _ in 0..count {
            let diff = bytes.uleb("encoded_field", &mut pos)?;
            bytes.uleb("encoded_field", &mut pos)?; // access_flags
            idx = idx.checked_add(diff).ok_or(DexError::Malformed("encoded_field index"))?;
            let f = fields.get(idx as usize).ok_or(DexError::BadIndex { what: "field", index: idx })?;
            out.insert(f.clone());
        }
    }
    for count in [direct_methods, virtual_methods] {
        let mut idx: u32 = 0;
        for _ in 0..count {
            let diff = bytes.uleb("encoded_method", &mut pos)?;
            bytes.uleb("encoded_method", &mut pos)?; // access_flags
            bytes.uleb("encoded_method", &mut pos)?; // code_off
            idx = idx.checked_add(diff).ok_or(DexError::Malformed("encoded_method index"))?;
            let m = methods.get(idx as usize).ok_or(DexError::BadIndex { what: "method", index: idx })?;
            out.insert(m.clone());
        }
    }
    Ok(())
}

impl DexPool {
    /// Folds another container of the same app into this one.
    ///
    /// Union is commutative and associative: a class defined in both keeps
    /// the union of its members and the lexically smaller
    /// (superclass, interfaces) pair.
    pub fn merge(&mut self, other: DexPool) {
        let mut strings: BTreeSet<String> = std::mem::take(&mut self.strings).into_iter().collect();
        strings.extend(other.strings);
        self.strings = strings.into_iter().collect();
        let mut types: BTreeSet<String> = std::mem::take(&mut self.types).into_iter().collect();
        types.extend(other.types);
        self.types = types.into_iter().collect();
        self.referenced_members.extend(other.referenced_members);
        for (name, def) in other.defined_classes {
            match self.defined_classes.get_mut(&name) {
                None => {
                    self.defined_classes.insert(name, def);
                }
                Some(existing) => {
                    if (&def.superclass, &def.interfaces) < (&existing.superclass, &existing.interfaces) {
                        existing.superclass = def.superclass;
                        existing.interfaces = def.interfaces;
                    }
                    existing.members.extend(def.members);
                }
            }
        }
    }

    pub fn union(pools: impl IntoIterator<Item = DexPool>) -> DexPool {
        let mut acc = DexPool::default();
        for p in pools {
            acc.merge(p);
        }
        // a single pool passes through merge too, so strings/types are always sorted and unique
        acc
    }
}

/// Every member defined by the pool's classes.
pub fn defined_members(pool: &DexPool) -> BTreeSet<MemberRef> {
    pool.defined_classes.values().flat_map(|c| c.members.iter().cloned()).collect()
}

/// Members the pool references but does not define. Callers with several
/// containers union the pools first.
pub fn used_not_defined(pool: &DexPool) -> BTreeSet<MemberRef> {
    let defined = defined_members(pool);
    pool.referenced_members.difference(&defined).cloned().collect()
}
