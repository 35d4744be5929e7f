"""Minimal DEX (version 035) writer used to build test fixtures.

Classes are described with plain dicts; the writer collects every referenced
string/type/proto/field/method into the id pools, sorts them the way the
format requires, emits simple code items (static invokes and sgets), and
fixes up the checksum and signature.
"""

import hashlib
import struct
import zlib

NO_INDEX = 0xFFFFFFFF

ACC_PUBLIC = 0x1
ACC_STATIC = 0x8
ACC_ABSTRACT = 0x400
ACC_CONSTRUCTOR = 0x10000


def uleb(v):
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def mutf8(s):
    out = bytearray()
    units = s.encode("utf-16-le")
    for i in range(0, len(units), 2):
        c = units[i] | (units[i + 1] << 8)
        if c != 0 and c < 0x80:
            out.append(c)
        elif c < 0x800:
            out += bytes([0xC0 | (c >> 6), 0x80 | (c & 0x3F)])
        else:
            out += bytes([0xE0 | (c >> 12), 0x80 | ((c >> 6) & 0x3F), 0x80 | (c & 0x3F)])
    return bytes(out)


def utf16_units(s):
    b = s.encode("utf-16-le")
    return [b[i] | (b[i + 1] << 8) for i in range(0, len(b), 2)]


def shorty_char(t):
    return "L" if t[0] in "L[" else t[0]


def align(buf, n=4):
    while len(buf) % n:
        buf.append(0)


class DexBuilder:
    """classes: list of dicts with keys
    name, super (or None), interfaces, fields [(name, type, flags)],
    methods [(name, params, ret, flags, body)], where body is a list of
    ('invoke', owner, name, params, ret) / ('sget', owner, name, type)
    or None for abstract methods.
    extra_strings: strings only present in the string pool.
    """

    def __init__(self, classes, extra_strings=()):
        self.classes = classes
        self.extra_strings = list(extra_strings)

    def build(self):
        strings = set(self.extra_strings)
        types = set()
        protos = set()
        fields = set()
        methods = set()

        def add_type(t):
            types.add(t)
            strings.add(t)

        def add_proto(params, ret):
            key = (ret, tuple(params))
            protos.add(key)
            add_type(ret)
            for p in params:
                add_type(p)
            strings.add("".join(shorty_char(x) for x in [ret] + list(params)))
            return key

        def add_field(owner, name, ftype):
            add_type(owner)
            add_type(ftype)
            strings.add(name)
            fields.add((owner, name, ftype))

        def add_method(owner, name, params, ret):
            add_type(owner)
            strings.add(name)
            key = add_proto(params, ret)
            methods.add((owner, name, key))

        for c in self.classes:
            add_type(c["name"])
            if c.get("super"):
                add_type(c["super"])
            for i in c.get("interfaces", []):
                add_type(i)
            for (n, t, _f) in c.get("fields", []):
                add_field(c["name"], n, t)
            for (n, params, ret, _f, body) in c.get("methods", []):
                add_method(c["name"], n, params, ret)
                for op in body or []:
                    if op[0] == "invoke":
                        add_method(op[1], op[2], op[3], op[4])
                    else:
                        add_field(op[1], op[2], op[3])

        string_list = sorted(strings, key=utf16_units)
        sidx = {s: i for i, s in enumerate(string_list)}
        type_list = sorted(types, key=lambda t: sidx[t])
        tidx = {t: i for i, t in enumerate(type_list)}
        proto_list = sorted(protos, key=lambda p: (tidx[p[0]], [tidx[x] for x in p[1]]))
        pidx = {p: i for i, p in enumerate(proto_list)}
        field_list = sorted(fields, key=lambda f: (tidx[f[0]], sidx[f[1]], tidx[f[2]]))
        fidx = {f: i for i, f in enumerate(field_list)}
        method_list = sorted(methods, key=lambda m: (tidx[m[0]], sidx[m[1]], pidx[m[2]]))
        midx = {m: i for i, m in enumerate(method_list)}

        # superclasses and interfaces must precede subclasses
        defined = {c["name"]: c for c in self.classes}
        ordered, seen = [], set()

        def visit(name):
            if name in seen or name not in defined:
                return
            seen.add(name)
            c = defined[name]
            if c.get("super"):
                visit(c["super"])
            for i in c.get("interfaces", []):
                visit(i)
            ordered.append(c)

        for c in self.classes:
            visit(c["name"])

        n_str, n_typ, n_pro = len(string_list), len(type_list), len(proto_list)
        n_fld, n_met, n_cls = len(field_list), len(method_list), len(ordered)
        off = 0x70
        string_ids_off = off if n_str else 0
        off += 4 * n_str
        type_ids_off = off if n_typ else 0
        off += 4 * n_typ
        proto_ids_off = off if n_pro else 0
        off += 12 * n_pro
        field_ids_off = off if n_fld else 0
        off += 8 * n_fld
        method_ids_off = off if n_met else 0
        off += 8 * n_met
        class_defs_off = off if n_cls else 0
        off += 32 * n_cls
        data_off = off

        data = bytearray()
        map_items = []

        def here():
            return data_off + len(data)

        # type lists: proto params and class interfaces
        type_list_offs = {}
        tl_count = 0
        tl_start = None
        wanted_lists = [p[1] for p in proto_list if p[1]] + [
            tuple(c.get("interfaces", [])) for c in ordered if c.get("interfaces")
        ]
        for tl in wanted_lists:
            if tl in type_list_offs:
                continue
            align(data)
            if tl_start is None:
                tl_start = here()
            type_list_offs[tl] = here()
            data += struct.pack("<I", len(tl))
            for t in tl:
                data += struct.pack("<H", tidx[t])
            tl_count += 1
        if tl_count:
            map_items.append((0x1001, tl_count, tl_start))

        # code items
        code_offs = {}
        ci_count = 0
        ci_start = None
        for c in ordered:
            for (n, params, ret, _flags, body) in c.get("methods", []):
                if body is None:
                    continue
                align(data)
                if ci_start is None:
                    ci_start = here()
                insns = []
                for op in body:
                    if op[0] == "invoke":
                        m = (op[1], op[2], (op[4], tuple(op[3])))
                        insns += [0x0071, midx[m], 0x0000]  # invoke-static {}, meth
                    else:
                        insns += [0x0062, fidx[(op[1], op[2], op[3])]]  # sget-object v0, fld
                insns.append(0x000E)  # return-void
                code_offs[(c["name"], n, (ret, tuple(params)))] = here()
                data += struct.pack("<HHHHII", 4, 0, 0, 0, 0, len(insns))
                for w in insns:
                    data += struct.pack("<H", w)
                ci_count += 1
        if ci_count:
            map_items.append((0x2001, ci_count, ci_start))

        # string data
        str_offs = []
        sd_start = here()
        for s in string_list:
            str_offs.append(here())
            data += uleb(len(utf16_units(s))) + mutf8(s) + b"\x00"
        if n_str:
            map_items.append((0x2002, n_str, sd_start))

        # class data
        class_data_offs = {}
        cd_count = 0
        cd_start = None
        for c in ordered:
            fl = c.get("fields", [])
            ml = c.get("methods", [])
            if not fl and not ml:
                continue
            if cd_start is None:
                cd_start = here()
            class_data_offs[c["name"]] = here()
            sf = sorted([f for f in fl if f[2] & ACC_STATIC], key=lambda f: fidx[(c["name"], f[0], f[1])])
            inf = sorted([f for f in fl if not f[2] & ACC_STATIC], key=lambda f: fidx[(c["name"], f[0], f[1])])

            def mkey(m):
                return midx[(c["name"], m[0], (m[2], tuple(m[1])))]

            direct = sorted([m for m in ml if m[3] & (ACC_STATIC | ACC_CONSTRUCTOR) or m[0].startswith("<")], key=mkey)
            virtual = sorted([m for m in ml if m not in direct], key=mkey)
            data += uleb(len(sf)) + uleb(len(inf)) + uleb(len(direct)) + uleb(len(virtual))
            for group in (sf, inf):
                prev = 0
                for f in group:
                    i = fidx[(c["name"], f[0], f[1])]
                    data += uleb(i - prev) + uleb(f[2])
                    prev = i
            for group in (direct, virtual):
                prev = 0
                for m in group:
                    i = mkey(m)
                    code = code_offs.get((c["name"], m[0], (m[2], tuple(m[1]))), 0)
                    data += uleb(i - prev) + uleb(m[3]) + uleb(code)
                    prev = i
            cd_count += 1
        if cd_count:
            map_items.append((0x2000, cd_count, cd_start))

        align(data)
        map_off = here()
        head_items = [(0x0000, 1, 0)]
        for (kind, n, o) in [
            (0x0001, n_str, string_ids_off),
            (0x0002, n_typ, type_ids_off),
            (0x0003, n_pro, proto_ids_off),
            (0x0004, n_fld, field_ids_off),
            (0x0005, n_met, method_ids_off),
            (0x0006, n_cls, class_defs_off),
        ]:
            if n:
                head_items.append((kind, n, o))
        all_items = head_items + sorted(map_items, key=lambda x: x[2]) + [(0x1000, 1, map_off)]
        all_items.sort(key=lambda x: x[2] if x[0] != 0 else -1)
        data += struct.pack("<I", len(all_items))
        for (kind, n, o) in all_items:
            data += struct.pack("<HHII", kind, 0, n, o)

        body = bytearray()
        for o in str_offs:
            body += struct.pack("<I", o)
        for t in type_list:
            body += struct.pack("<I", sidx[t])
        for (ret, params) in proto_list:
            shorty = "".join(shorty_char(x) for x in [ret] + list(params))
            body += struct.pack("<III", sidx[shorty], tidx[ret], type_list_offs[params] if params else 0)
        for (owner, name, ftype) in field_list:
            body += struct.pack("<HHI", tidx[owner], tidx[ftype], sidx[name])
        for (owner, name, proto) in method_list:
            body += struct.pack("<HHI", tidx[owner], pidx[proto], sidx[name])
        for c in ordered:
            ifaces = tuple(c.get("interfaces", []))
            body += struct.pack(
                "<IIIIIIII",
                tidx[c["name"]],
                c.get("access", ACC_PUBLIC),
                tidx[c["super"]] if c.get("super") else NO_INDEX,
                type_list_offs[ifaces] if ifaces else 0,
                NO_INDEX,
                0,
                class_data_offs.get(c["name"], 0),
                0,
            )
        assert 0x70 + len(body) == data_off

        file_size = data_off + len(data)
        header = bytearray(b"dex\n035\x00")
        header += b"\x00" * 24  # checksum + signature, patched below
        header += struct.pack(
            "<IIIIII", file_size, 0x70, 0x12345678, 0, 0, map_off
        )
        for (n, o) in [
            (n_str, string_ids_off),
            (n_typ, type_ids_off),
            (n_pro, proto_ids_off),
            (n_fld, field_ids_off),
            (n_met, method_ids_off),
            (n_cls, class_defs_off),
            (len(data), data_off),
        ]:
            header += struct.pack("<II", n, o)
        assert len(header) == 0x70
        out = bytearray(header + body + data)
        out[12:32] = hashlib.sha1(out[32:]).digest()
        out[8:12] = struct.pack("<I", zlib.adler32(bytes(out[12:])) & 0xFFFFFFFF)
        return bytes(out)
