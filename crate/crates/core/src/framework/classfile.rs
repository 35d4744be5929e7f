//! Builds a framework index from a platform stub jar.
//!
//! Only the parts of the class file format the index needs are read: the
//! constant pool, this/super/interfaces, and member names and descriptors.

use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::path::Path;

use thiserror::Error;
use zip::ZipArchive;

use super::{ClassInfo, FrameworkIndex, IndexError};
use crate::dex::mutf8;

const ACC_PUBLIC: u16 = 0x0001;
const ACC_PROTECTED: u16 = 0x0004;
const ACC_SYNTHETIC: u16 = 0x1000;

#[derive(Debug, Error)]
pub enum ClassfileError {
    #[error("bad class file magic")]
    BadMagic,
    #[error("class file truncated at offset {0}")]
    Truncated(usize),
    #[error("constant pool entry {0} is missing or has the wrong type")]
    BadConstant(u16),
    #[error("unknown constant pool tag {0}")]
    UnknownTag(u8),
}

#[derive(Debug, Error)]
pub enum JarError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a jar: {0}")]
    NotZip(String),
    #[error("{entry}: {source}")]
    Class {
        entry: String,
        #[source]
        source: ClassfileError,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub access: u16,
    pub name: String,
    pub descriptor: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRecord {
    pub access: u16,
    pub name: String,
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub fields: Vec<Member>,
    pub methods: Vec<Member>,
}

enum Constant {
    Utf8(String),
    Class(u16),
    Other,
}

struct Cur<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cur<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], ClassfileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or(ClassfileError::Truncated(self.pos))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ClassfileError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ClassfileError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }
    fn u32(&mut self) -> Result<u32, ClassfileError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn parse_class(bytes: &[u8]) -> Result<ClassRecord, ClassfileError> {
    let mut c = Cur { data: bytes, pos: 0 };
    if c.u32()? != 0xCAFE_BABE {
        return Err(ClassfileError::BadMagic);
    }
    c.take(4)?; // minor, major
    let count = c.u16()?;
    let mut pool: Vec<Constant> = Vec::with_capacity(count as usize);
    pool.push(Constant::Other); // slot 0 is unused
    while pool.len() < count as usize {
        let tag = c.u8()?;
        let (entry, wide) = match tag {
            1 => {
                let len = c.u16()? as usize;
                let raw = c.take(len)?;
                let s = mutf8::decode_unsized(raw).ok_or(ClassfileError::BadConstant(pool.len() as u16))?;
                (Constant::Utf8(s), false)
            }
            7 => (Constant::Class(c.u16()?), false),
            3 | 4 => {
                c.take(4)?;
                (Constant::Other, false)
            }
            5 | 6 => {
                c.take(8)?;
                (Constant::Other, true)
            }
            8 | 16 | 19 | 20 => {
                c.take(2)?;
                (Constant::Other, false)
            }
            9..=12 | 17 | 18 => {
                c.take(4)?;
                (Constant::Other, false)
            }
            15 => {
                c.take(3)?;
                (Constant::Other, false)
            }
            other => return Err(ClassfileError::UnknownTag(other)),
        };
        pool.push(entry);
        if wide {
            pool.push(Constant::Other);
        }
    }
    let utf8 = |i: u16| match pool.get(i as usize) {
        Some(Constant::Utf8(s)) => Ok(s.clone()),
        _ => Err(ClassfileError::BadConstant(i)),
    };
    let class = |i: u16| match pool.get(i as usize) {
        Some(Constant::Class(n)) => utf8(*n),
        _ => Err(ClassfileError::BadConstant(i)),
    };

    let access = c.u16()?;
    let name = class(c.u16()?)?;
    let super_idx = c.u16()?;
    let superclass = if super_idx == 0 { None } else { Some(class(super_idx)?) };
    let n_ifaces = c.u16()?;
    let interfaces = (0..n_ifaces).map(|_| class(c.u16()?)).collect::<Result<Vec<_>, _>>()?;
    let members = |c: &mut Cur<'_>| -> Result<Vec<Member>, ClassfileError> {
        let n = c.u16()?;
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let access = c.u16()?;
            let name = utf8(c.u16()?)?;
            let descriptor = utf8(c.u16()?)?;
            for _ in 0..c.u16()? {
                c.u16()?;
                let len = c.u32()? as usize;
                c.take(len)?;
            }
            out.push(Member { access, name, descriptor });
        }
        Ok(out)
    };
    let fields = members(&mut c)?;
    let methods = members(&mut c)?;
    Ok(ClassRecord { access, name, superclass, interfaces, fields, methods })
}

fn visible(access: u16) -> bool {
    access & (ACC_PUBLIC | ACC_PROTECTED) != 0 && access & ACC_SYNTHETIC == 0
}

/// Index of every public class in the jar with its public and protected
/// members.
pub fn index_from_classes(records: impl IntoIterator<Item = ClassRecord>) -> Result<FrameworkIndex, IndexError> {
    let mut classes = BTreeMap::new();
    for r in records {
        if r.access & ACC_PUBLIC == 0 {
            continue;
        }
        let info = ClassInfo {
            superclass: r.superclass,
            interfaces: r.interfaces,
            methods: r.methods.into_iter().filter(|m| visible(m.access)).map(|m| (m.name, m.descriptor)).collect(),
            fields: r.fields.into_iter().filter(|m| visible(m.access)).map(|m| (m.name, m.descriptor)).collect(),
        };
        classes.insert(r.name, info);
    }
    FrameworkIndex::new(classes)
}

pub fn index_from_jar(path: impl AsRef<Path>) -> Result<FrameworkIndex, JarError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| JarError::Io { path: path.display().to_string(), source })?;
    let mut jar = ZipArchive::new(Cursor::new(bytes)).map_err(|e| JarError::NotZip(e.to_string()))?;
    let mut records = Vec::new();
    for i in 0..jar.len() {
        let mut entry = jar.by_index(i).map_err(|e| JarError::NotZip(e.to_string()))?;
        let name = entry.name().to_string();
        if !name.ends_with(".class") || name.ends_with("module-info.class") || name.ends_with("package-info.class") {
            continue;
        }
        let mut data = Vec::new();
        entry.read_to_end(&mut data).map_err(|source| JarError::Io { path: name.clone(), source })?;
        records.push(parse_class(&data).map_err(|source| JarError::Class { entry: name, source })?);
    }
    Ok(index_from_classes(records)?)
}
