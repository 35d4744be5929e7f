"""Minimal Android binary XML writer for manifest fixtures.

Elements are (name, [(ns, attr, type, value)], [children]) tuples where ns
is "android" or None, type is one of "string", "int", "bool", "ref", "hex".
"""

import struct

ANDROID_NS = "http://schemas.android.com/apk/res/android"

# android.R.attr ids for the attributes the fixtures use
ATTR_IDS = {
    "name": 0x01010003,
    "label": 0x01010001,
    "icon": 0x01010002,
    "permission": 0x01010006,
    "exported": 0x01010010,
    "enabled": 0x0101000E,
    "minSdkVersion": 0x0101020C,
    "targetSdkVersion": 0x01010270,
    "versionCode": 0x0101021B,
    "versionName": 0x0101021C,
    "allowBackup": 0x01010280,
    "scheme": 0x01010027,
    "host": 0x01010028,
    "debuggable": 0x0101000F,
    "theme": 0x01010000,
}

TYPES = {"ref": 0x01, "string": 0x03, "int": 0x10, "hex": 0x11, "bool": 0x12}


def _walk(el, out):
    name, attrs, children = el
    out.append(el)
    for c in children:
        _walk(c, out)


def _utf16_entry(s):
    units = s.encode("utf-16-le")
    n = len(units) // 2
    assert n < 0x8000
    return struct.pack("<H", n) + units + b"\x00\x00"


def _utf8_len(n):
    if n > 0x7F:
        return bytes([0x80 | (n >> 8), n & 0xFF])
    return bytes([n])


def _utf8_entry(s):
    b = s.encode("utf-8")
    return _utf8_len(len(s.encode("utf-16-le")) // 2) + _utf8_len(len(b)) + b + b"\x00"


def build_axml(root, utf8=False, with_android_ns=True, strip_attr_names=()):
    """strip_attr_names: android attribute names stored as empty strings so a
    reader has to fall back to the resource map."""
    nodes = []
    _walk(root, nodes)

    # android attribute names come first so the resource map can cover them
    android_attrs = []
    other = []

    def want(lst, s):
        if s not in lst:
            lst.append(s)

    for (_n, attrs, _c) in nodes:
        for (ns, a, _t, _v) in attrs:
            if ns == "android" and a in ATTR_IDS:
                want(android_attrs, a)
    pool = [("" if a in strip_attr_names else a) for a in android_attrs]
    res_ids = [ATTR_IDS[a] for a in android_attrs]
    if with_android_ns:
        want(other, "android")
        want(other, ANDROID_NS)
    for (n, attrs, _c) in nodes:
        want(other, n)
        for (ns, a, t, v) in attrs:
            if not (ns == "android" and a in ATTR_IDS):
                want(other, a)
            if t == "string":
                want(other, v)
    for s in other:
        pool.append(s)

    def sidx(s, attr_name=False):
        if attr_name and s in android_attrs:
            return android_attrs.index(s)
        return pool.index(s, len(android_attrs))

    # string pool
    entries = [(_utf8_entry if utf8 else _utf16_entry)(s) for s in pool]
    offsets, blob = [], bytearray()
    for e in entries:
        offsets.append(len(blob))
        blob += e
    while len(blob) % 4:
        blob.append(0)
    header_size = 0x1C
    strings_start = header_size + 4 * len(pool)
    sp = struct.pack(
        "<HHIIIIII",
        0x0001,
        header_size,
        strings_start + len(blob),
        len(pool),
        0,
        0x100 if utf8 else 0,
        strings_start,
        0,
    )
    sp += b"".join(struct.pack("<I", o) for o in offsets) + bytes(blob)

    rm = b""
    if res_ids:
        rm = struct.pack("<HHI", 0x0180, 8, 8 + 4 * len(res_ids))
        rm += b"".join(struct.pack("<I", r) for r in res_ids)

    body = bytearray()
    line = [1]
    ns_idx = sidx(ANDROID_NS) if with_android_ns else 0xFFFFFFFF

    def emit(el):
        name, attrs, children = el
        body.extend(struct.pack("<HHIII", 0x0102, 0x10, 0x24 + 20 * len(attrs), line[0], 0xFFFFFFFF))
        body.extend(struct.pack("<IIHHHHHH", 0xFFFFFFFF, sidx(name), 0x14, 0x14, len(attrs), 0, 0, 0))
        for (ns, a, t, v) in attrs:
            a_ns = ns_idx if ns == "android" else 0xFFFFFFFF
            a_name = sidx(a, attr_name=(ns == "android"))
            if t == "string":
                raw, data = sidx(v), sidx(v)
            elif t == "bool":
                raw, data = 0xFFFFFFFF, 0xFFFFFFFF if v else 0
            else:
                raw, data = 0xFFFFFFFF, v & 0xFFFFFFFF
            body.extend(struct.pack("<IIIHBBI", a_ns, a_name, raw, 8, 0, TYPES[t], data))
        line[0] += 1
        for c in children:
            emit(c)
        body.extend(struct.pack("<HHIIIII", 0x0103, 0x10, 0x18, line[0], 0xFFFFFFFF, 0xFFFFFFFF, sidx(name)))
        line[0] += 1

    if with_android_ns:
        body.extend(struct.pack("<HHIIIII", 0x0100, 0x10, 0x18, 1, 0xFFFFFFFF, sidx("android"), ns_idx))
    emit(root)
    if with_android_ns:
        body.extend(struct.pack("<HHIIIII", 0x0101, 0x10, 0x18, line[0], 0xFFFFFFFF, sidx("android"), ns_idx))

    total = 8 + len(sp) + len(rm) + len(body)
    return struct.pack("<HHI", 0x0003, 8, total) + sp + rm + bytes(body)
