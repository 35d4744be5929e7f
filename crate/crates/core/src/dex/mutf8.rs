//! Modified UTF-8 as used by DEX string data.
//!
//! Differences from standard UTF-8: U+0000 is encoded as `C0 80`, and
//! supplementary characters are encoded as a UTF-16 surrogate pair with each
//! half written as a three-byte sequence.

/// Decodes one MUTF-8 string. `utf16_len` is the declared length in UTF-16
/// code units; a mismatch is treated as corruption. Returns `None` on any
/// malformed sequence. A lone surrogate decodes to U+FFFD.
pub fn decode(bytes: &[u8], utf16_len: usize) -> Option<String> {
    let units = units(bytes)?;
    if units.len() != utf16_len {
        return None;
    }
    Some(char::decode_utf16(units).map(|r| r.unwrap_or(char::REPLACEMENT_CHARACTER)).collect())
}

/// Decodes without a declared length, as class files store it.
pub fn decode_unsized(bytes: &[u8]) -> Option<String> {
    let units = units(bytes)?;
    Some(char::decode_utf16(units).map(|r| r.unwrap_or(char::REPLACEMENT_CHARACTER)).collect())
}

fn units(bytes: &[u8]) -> Option<Vec<u16>> {
    let mut units: Vec<u16> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b0 = bytes[i];
        let unit = match b0 >> 4 {
            0x0..=0x7 => {
                if b0 == 0 {
                    return None;
                }
                i += 1;
                u16::from(b0)
            }
            0xC | 0xD => {
                let b1 = *bytes.get(i + 1)?;
                if b1 & 0xC0 != 0x80 {
                    return None;
                }
                i += 2;
                (u16::from(b0 & 0x1F) << 6) | u16::from(b1 & 0x3F)
            }
            0xE => {
                let b1 = *bytes.get(i + 1)?;
                let b2 = *bytes.get(i + 2)?;
                if b1 & 0xC0 != 0x80 || b2 & 0xC0 != 0x80 {
                    return None;
                }
                i += 3;
                (u16::from(b0 & 0x0F) << 12) | (u16::from(b1 & 0x3F) << 6) | u16::from(b2 & 0x3F)
            }
            _ => return None,
        };
        units.push(unit);
    }
    Some(units)
}

/// Encodes a string as MUTF-8 (without the trailing NUL).
pub fn encode(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for unit in s.encode_utf16() {
        match unit {
            0x0001..=0x007F => out.push(unit as u8),
            0x0000 | 0x0080..=0x07FF => {
                out.push(0xC0 | (unit >> 6) as u8);
                out.push(0x80 | (unit & 0x3F) as u8);
            }
            _ => {
                out.push(0xE0 | (unit >> 12) as u8);
                out.push(0x80 | ((unit >> 6) & 0x3F) as u8);
                out.push(0x80 | (unit & 0x3F) as u8);
            }
        }
    }
    out
}
