#!/usr/bin/env python3
"""Regenerates every committed test fixture under crates/core/tests/fixtures.

Goldens for DEX reference pools, defined members and manifest trees are taken
from androguard (an independent disassembler), never from the generator's own
model; the generator model is only cross-checked against them.

    pip install androguard
    python3 tools/fixtures/make_fixtures.py
"""

import io
import os
import random
import shutil
import sys
import zipfile
from datetime import datetime, timedelta
from xml.sax.saxutils import quoteattr

from loguru import logger

logger.remove()

from androguard.core.axml import AXMLParser, START_TAG, END_TAG, END_DOCUMENT
from androguard.core.dex import DEX

sys.path.insert(0, os.path.dirname(__file__))
from axmlgen import ANDROID_NS, build_axml  # noqa: E402
from dexgen import ACC_ABSTRACT, ACC_CONSTRUCTOR, ACC_PUBLIC, ACC_STATIC, DexBuilder  # noqa: E402

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.abspath(os.path.join(HERE, "..", ".."))
OUT = os.path.join(ROOT, "crates", "core", "tests", "fixtures")


def L(path):
    return "L" + path + ";"


def strip_type(t):
    return t[1:-1] if t.startswith("L") and t.endswith(";") else t


# ---------------------------------------------------------------- framework


def load_framework():
    classes = []
    for line in open(os.path.join(HERE, "framework_spec.txt"), encoding="utf-8"):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(" ; ")]
        head = parts[0].split()
        name, sup = head[0], head[1]
        ifaces = head[3:] if len(head) > 2 and head[2] == ":" else []
        methods, fields = [], []
        for m in parts[1:]:
            if "(" in m:
                n, rest = m.split("(", 1)
                params, ret = rest.split(")", 1)
                methods.append((n, "(" + params + ")" + ret))
            else:
                n, t = m.split(":", 1)
                fields.append((n, t))
        classes.append((name, None if sup == "-" else sup, ifaces, methods, fields))
    return classes


def write_index(classes, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write("# platform API index (API level 27 subset)\n")
        f.write("# C <class> <super|-> [I <iface>...] / M <name> <descriptor> / F <name> <type>\n")
        for (name, sup, ifaces, methods, fields) in classes:
            line = "C %s %s" % (name, sup or "-")
            for i in ifaces:
                line += " I " + i
            f.write(line + "\n")
            for (n, d) in methods:
                f.write("M %s %s\n" % (n, d))
            for (n, t) in fields:
                f.write("F %s %s\n" % (n, t))


def split_desc(desc):
    """'(ILjava/lang/String;)V' -> (['I', 'Ljava/lang/String;'], 'V')"""
    params, ret = desc[1:].split(")", 1)
    out, i = [], 0
    while i < len(params):
        j = i
        while params[j] == "[":
            j += 1
        if params[j] == "L":
            j = params.index(";", j)
        out.append(params[i : j + 1])
        i = j + 1
    return out, ret


# ---------------------------------------------------------------- helpers


def manifest(package, min_sdk=23, target_sdk=27, children=(), utf8=False, strip=()):
    kids = []
    if min_sdk is not None or target_sdk is not None:
        attrs = []
        if min_sdk is not None:
            attrs.append(("android", "minSdkVersion", "int", min_sdk))
        if target_sdk is not None:
            attrs.append(("android", "targetSdkVersion", "int", target_sdk))
        kids.append(("uses-sdk", attrs, []))
    kids.extend(children)
    root = (
        "manifest",
        [("android", "versionCode", "int", 1), ("android", "versionName", "string", "1.0"), (None, "package", "string", package)],
        kids,
    )
    return build_axml(root, utf8=utf8, strip_attr_names=strip)


def inv(owner, name, desc):
    params, ret = split_desc(desc)
    return ("invoke", L(owner), name, params, ret)


def sget(owner, name, ftype):
    return ("sget", L(owner), name, ftype)


def meth(name, desc, body, flags=ACC_PUBLIC):
    params, ret = split_desc(desc)
    if body is None:
        flags |= ACC_ABSTRACT
    if name == "<init>":
        flags |= ACC_CONSTRUCTOR
    return (name, params, ret, flags, body)


def cls(name, sup, methods=(), fields=(), ifaces=()):
    return {
        "name": L(name),
        "super": L(sup) if sup else None,
        "interfaces": [L(i) for i in ifaces],
        "methods": list(methods),
        "fields": [(n, t, fl) for (n, t, fl) in fields],
    }


def write_apk(path, entries, mode="normal"):
    """entries: list of (name, bytes). mode: normal | zip64 | datadesc"""
    if mode == "datadesc":
        buf = io.BytesIO()

        class Unseekable(io.RawIOBase):
            def __init__(self, inner):
                self.inner = inner

            def writable(self):
                return True

            def write(self, b):
                return self.inner.write(b)

        with zipfile.ZipFile(Unseekable(buf), "w", zipfile.ZIP_DEFLATED) as z:
            for (n, b) in entries:
                with z.open(n, "w") as w:
                    w.write(b)
        data = buf.getvalue()
        with open(path, "wb") as f:
            f.write(data)
        return
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as z:
            for (n, b) in entries:
                if mode == "zip64":
                    zi = zipfile.ZipInfo(n, date_time=(2019, 3, 1, 0, 0, 0))
                    zi.compress_type = zipfile.ZIP_DEFLATED
                    with z.open(zi, "w", force_zip64=True) as w:
                        w.write(b)
                else:
                    zi = zipfile.ZipInfo(n, date_time=(2019, 3, 1, 0, 0, 0))
                    zi.compress_type = zipfile.ZIP_DEFLATED
                    z.writestr(zi, b)


# ---------------------------------------------------------------- goldens


def dex_golden(payloads):
    refs, defined, classes = set(), set(), set()
    for p in payloads:
        d = DEX(p)
        for m in (d.get_methods_id_item().gets() if d.get_methods_id_item() else []):
            proto = "".join(m.get_proto()).replace(" ", "")
            refs.add("method|%s|%s|%s" % (strip_type(m.get_class_name()), m.get_name(), proto))
        for f in (d.get_fields_id_item().gets() if d.get_fields_id_item() else []):
            refs.add("field|%s|%s|%s" % (strip_type(f.get_class_name()), f.get_name(), f.get_type()))
        for c in d.get_classes():
            owner = strip_type(c.get_name())
            sup = c.get_superclassname()
            classes.add(
                "class|%s|%s|%s"
                % (owner, strip_type(sup) if sup else "-", ",".join(strip_type(i) for i in c.get_interfaces()))
            )
            for m in c.get_methods():
                defined.add("method|%s|%s|%s" % (owner, m.get_name(), m.get_descriptor().replace(" ", "")))
            for f in c.get_fields():
                defined.add("field|%s|%s|%s" % (owner, f.get_name(), f.get_descriptor()))
    return sorted(refs), sorted(defined), sorted(classes)


def render_value(vtype, data, text):
    if vtype == 0x03:
        return "string " + json_str(text)
    if vtype == 0x10:
        v = data - (1 << 32) if data & 0x80000000 else data
        return "int %d" % v
    if vtype == 0x11:
        return "int %d" % (data - (1 << 32) if data & 0x80000000 else data)
    if vtype == 0x12:
        return "bool " + ("true" if data != 0 else "false")
    if vtype == 0x01:
        return "ref @0x%08x" % data
    return "raw %d:0x%08x" % (vtype, data)


def json_str(s):
    import json

    return json.dumps(s, ensure_ascii=False)


def manifest_golden(payload):
    p = AXMLParser(payload)
    lines, depth = [], 0
    while True:
        if not p.is_valid():
            break
        ev = next(p)
        if ev == START_TAG:
            lines.append("  " * depth + p.getName())
            for i in range(p.getAttributeCount()):
                uri = p.getAttributeNamespace(i)
                prefix = "android:" if uri == ANDROID_NS else ""
                lines.append(
                    "  " * (depth + 1)
                    + "@"
                    + prefix
                    + p.getAttributeName(i)
                    + " "
                    + render_value(p.getAttributeValueType(i), p.getAttributeValueData(i), p.getAttributeValue(i))
                )
            depth += 1
        elif ev == END_TAG:
            depth -= 1
        elif ev == END_DOCUMENT:
            break
    return lines


def write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as f:
        for l in lines:
            f.write(l + "\n")


def golden_apk(name, dexes, manifest_bytes, model_refs=None):
    refs, defined, classes = dex_golden(dexes)
    gdir = os.path.join(OUT, "golden")
    write_lines(os.path.join(gdir, name + ".refs"), refs)
    write_lines(os.path.join(gdir, name + ".defined"), defined)
    write_lines(os.path.join(gdir, name + ".classes"), classes)
    write_lines(os.path.join(gdir, name + ".manifest.txt"), manifest_golden(manifest_bytes))
    if model_refs is not None:
        missing = set(model_refs) - set(refs)
        assert not missing, (name, missing)


# ---------------------------------------------------------------- fixture apps

ACT = "android/app/Activity"
OBJ = "java/lang/Object"
BUNDLE = "(Landroid/os/Bundle;)V"


def app_minimal():
    main = cls(
        "com/example/minimal/Main",
        ACT,
        methods=[
            meth("<init>", "()V", [inv(ACT, "<init>", "()V")]),
            meth("onCreate", BUNDLE, [inv(ACT, "onCreate", BUNDLE), inv(ACT, "setContentView", "(I)V")]),
        ],
    )
    dex = DexBuilder([main]).build()
    man = manifest(
        "com.example.minimal",
        children=[("application", [("android", "label", "string", "Minimal")], [])],
        utf8=True,
    )
    return [dex], man


def app_multidex():
    main = cls(
        "com/example/multi/Main",
        ACT,
        methods=[
            meth("<init>", "()V", [inv(ACT, "<init>", "()V")]),
            meth(
                "onCreate",
                BUNDLE,
                [inv(ACT, "onCreate", BUNDLE), inv("com/example/multi/Helper", "work", "()V"), inv("android/util/Log", "d", "(Ljava/lang/String;Ljava/lang/String;)I")],
            ),
            meth("refresh", "()V", [inv(ACT, "finish", "()V")]),
        ],
    )
    helper = cls(
        "com/example/multi/Helper",
        OBJ,
        methods=[
            meth("<init>", "()V", [inv(OBJ, "<init>", "()V")]),
            meth(
                "work",
                "()V",
                [
                    inv("android/util/Base64", "encodeToString", "([BI)Ljava/lang/String;"),
                    sget("android/os/Build", "MODEL", "Ljava/lang/String;"),
                    inv("com/example/multi/Main", "refresh", "()V"),
                ],
                flags=ACC_PUBLIC | ACC_STATIC,
            ),
        ],
    )
    d1 = DexBuilder([main]).build()
    d2 = DexBuilder([helper]).build()
    man = manifest(
        "com.example.multi",
        min_sdk=21,
        target_sdk=26,
        children=[("application", [], [("activity", [("android", "name", "string", ".Main")], [])])],
    )
    return [d1, d2], man


def app_webview():
    A = "com/example/app/MainActivity"
    client = cls(
        "com/example/app/TrustingClient",
        "android/webkit/WebViewClient",
        methods=[
            meth("<init>", "()V", [inv("android/webkit/WebViewClient", "<init>", "()V")]),
            meth(
                "onReceivedSslError",
                "(Landroid/webkit/WebView;Landroid/webkit/SslErrorHandler;Landroid/net/http/SslError;)V",
                [inv("android/webkit/SslErrorHandler", "proceed", "()V")],
            ),
        ],
    )
    task = cls(
        "com/example/app/Task",
        OBJ,
        ifaces=["java/lang/Runnable"],
        methods=[
            meth("<init>", "()V", [inv(OBJ, "<init>", "()V")]),
            meth("run", "()V", [inv("com/example/lib/Tracker", "track", "(Ljava/lang/String;)V"), inv("org/obf/Util", "a", "()V")]),
        ],
    )
    main = cls(
        A,
        ACT,
        fields=[("web", "Landroid/webkit/WebView;", ACC_PUBLIC)],
        methods=[
            meth("<init>", "()V", [inv(ACT, "<init>", "()V")]),
            meth(
                "onCreate",
                BUNDLE,
                [
                    inv(ACT, "onCreate", BUNDLE),
                    inv("android/webkit/WebView", "<init>", "(Landroid/content/Context;)V"),
                    inv("android/webkit/WebView", "getSettings", "()Landroid/webkit/WebSettings;"),
                    inv("android/webkit/WebSettings", "setJavaScriptEnabled", "(Z)V"),
                    inv("android/webkit/WebView", "loadUrl", "(Ljava/lang/String;)V"),
                    sget("android/os/Build$VERSION", "SDK_INT", "I"),
                    inv(A, "getString", "(I)Ljava/lang/String;"),
                    inv(A, "b", "()V"),
                ],
            ),
            meth("b", "()V", [inv("android/widget/Toast", "makeText", "(Landroid/content/Context;Ljava/lang/CharSequence;I)Landroid/widget/Toast;")]),
        ],
    )
    dex = DexBuilder([main, client, task]).build()
    man = manifest(
        "com.example.app",
        target_sdk=27,
        children=[
            ("uses-permission", [("android", "name", "string", "android.permission.INTERNET")], []),
            (
                "application",
                [("android", "allowBackup", "bool", True), ("android", "icon", "ref", 0x7F020000)],
                [
                    (
                        "activity",
                        [("android", "name", "string", ".MainActivity"), ("android", "exported", "bool", True)],
                        [
                            (
                                "intent-filter",
                                [],
                                [
                                    ("action", [("android", "name", "string", "android.intent.action.MAIN")], []),
                                    ("category", [("android", "name", "string", "android.intent.category.LAUNCHER")], []),
                                ],
                            )
                        ],
                    )
                ],
            ),
        ],
    )
    return [dex], man


def app_unicode():
    K = "com/example/ünï/Çlass"
    c = cls(
        K,
        ACT,
        fields=[("ß", "I", ACC_PUBLIC), ("größe", "Ljava/lang/String;", ACC_PUBLIC | ACC_STATIC)],
        methods=[
            meth("<init>", "()V", [inv(ACT, "<init>", "()V")]),
            meth("naïve", "()V", [inv("org/unicode/Lib", "ä", "()V"), inv("org/unicode/Lib", "ääh", "()V")]),
            meth("日本語", "(Ljava/lang/String;)V", [inv("android/util/Log", "i", "(Ljava/lang/String;Ljava/lang/String;)I")]),
            meth("𝒳𝒴", "()V", None),
            meth("onResume", "()V", [inv(ACT, "onResume", "()V")]),
        ],
    )
    dex = DexBuilder([c], extra_strings=["a\x00b", "emoji 😀 ok", "ࠀ￿"]).build()
    man = manifest(
        "com.example.unicode",
        min_sdk=24,
        target_sdk=25,
        children=[("application", [("android", "label", "string", "Ünïcödé 😀")], [("activity", [("android", "name", "string", ".Çlass"), ("android", "exported", "bool", False)], [])])],
        strip=("exported", "name"),
    )
    return [dex], man


def app_libonly():
    c = cls(
        "com/example/libonly/Entry",
        OBJ,
        methods=[meth("start", "()V", [inv("com/example/lib/Helper", "doWork", "()V")], flags=ACC_PUBLIC | ACC_STATIC)],
    )
    dex = DexBuilder([c]).build()
    man = manifest("com.example.libonly", min_sdk=23, target_sdk=25)
    return [dex], man


def app_obfuscated():
    c = cls(
        "a/a",
        ACT,
        methods=[
            meth("<init>", "()V", [inv(ACT, "<init>", "()V")]),
            meth("onCreate", BUNDLE, [inv(ACT, "onCreate", BUNDLE), inv("a/b", "a", "()V"), inv("org/obf/b", "c", "()V"), inv("android/util/Log", "d", "(Ljava/lang/String;Ljava/lang/String;)I")]),
            meth("a", "()V", [sget("java/lang/System", "out", "Ljava/io/PrintStream;")]),
        ],
    )
    b = cls("a/b", OBJ, methods=[meth("a", "()V", [], flags=ACC_PUBLIC | ACC_STATIC)])
    dex = DexBuilder([c, b]).build()
    man = manifest("com.example.obf", min_sdk=23, target_sdk=26, children=[("application", [], [])])
    return [dex], man


# ---------------------------------------------------------------- synthetic corpus


def vocabulary(fw):
    vocab = []
    for (name, _s, _i, methods, fields) in fw:
        for (n, d) in methods:
            if not n.startswith("<"):
                vocab.append(("m", name, n, d))
        for (n, t) in fields:
            vocab.append(("f", name, n, t))
    return vocab


CALLBACK_BASES = [
    ("android/app/Activity", [("onCreate", BUNDLE), ("onResume", "()V"), ("onPause", "()V"), ("onActivityResult", "(IILandroid/content/Intent;)V")]),
    ("android/app/Service", [("onStartCommand", "(Landroid/content/Intent;II)I"), ("onBind", "(Landroid/content/Intent;)Landroid/os/IBinder;")]),
    ("android/content/BroadcastReceiver", [("onReceive", "(Landroid/content/Context;Landroid/content/Intent;)V")]),
    ("android/webkit/WebViewClient", [("shouldOverrideUrlLoading", "(Landroid/webkit/WebView;Ljava/lang/String;)Z"), ("onReceivedSslError", "(Landroid/webkit/WebView;Landroid/webkit/SslErrorHandler;Landroid/net/http/SslError;)V")]),
    ("android/content/ContentProvider", [("query", "(Landroid/net/Uri;[Ljava/lang/String;Ljava/lang/String;[Ljava/lang/String;Ljava/lang/String;)Landroid/database/Cursor;"), ("onCreate", "()Z")]),
]


def synthetic_app(rng, tag, vocab, hot, n_apis, level):
    pkg = "com/synth/" + tag
    picks = set(rng.sample(hot, min(len(hot), rng.randint(len(hot) // 2, len(hot)))))
    picks |= set(rng.sample(vocab, n_apis))
    body = []
    for (k, owner, n, d) in sorted(picks):
        body.append(inv(owner, n, d) if k == "m" else sget(owner, n, d))
    classes = []
    base, cbs = rng.choice(CALLBACK_BASES)
    chosen = rng.sample(cbs, rng.randint(1, len(cbs)))
    methods = [meth("<init>", "()V", [inv(base, "<init>", "()V")])]
    for (i, (n, d)) in enumerate(chosen):
        methods.append(meth(n, d, body if i == 0 else []))
    methods.append(meth("x", "()V", [inv("com/thirdparty/Ads", "show", "()V")]))
    classes.append(cls(pkg + "/Main", base, methods=methods))
    dex = DexBuilder(classes).build()
    man = manifest(
        "com.synth." + tag,
        min_sdk=min(level, 21),
        target_sdk=level,
        children=[("uses-permission", [("android", "name", "string", "android.permission.INTERNET")], []), ("application", [("android", "debuggable", "bool", rng.random() < 0.3)], [("activity", [("android", "name", "string", ".Main")], [])])],
        utf8=rng.random() < 0.5,
    )
    return dex, man


# ---------------------------------------------------------------- stack exchange


SEC_TAGS = [
    "tls", "xss", "encryption", "cryptography", "authentication", "malware", "passwords", "certificates",
    "ssl", "android", "webview", "keystore", "hash", "aes", "rsa", "penetration-test", "network",
    "vulnerability", "exploit", "firewall", "oauth", "csrf", "sql-injection", "web-application",
    "reverse-engineering", "obfuscation", "privacy", "root", "permissions", "mobile", "phishing",
    "forensics", "dns", "vpn", "wifi", "bluetooth", "nfc", "biometrics", "fingerprint", "two-factor",
    "certificate-pinning", "random", "hmac", "signature", "jwt", "cookies", "session-management",
    "sandbox", "selinux", "Access-Control",
]


def stack_exchange(rng, vocab_names):
    tags_path = os.path.join(OUT, "so", "SecurityTags.xml")
    with open(tags_path, "w", encoding="utf-8") as f:
        f.write('<?xml version="1.0" encoding="utf-8"?>\n<tags>\n')
        for i, t in enumerate(SEC_TAGS):
            f.write('  <row Id="%d" TagName=%s Count="%d" />\n' % (i + 1, quoteattr(t), rng.randint(1, 900)))
        f.write("</tags>\n")
    assert len(SEC_TAGS) == 50

    other_tags = ["java", "kotlin", "android-studio", "gradle", "listview", "python"]
    sec_sample = ["security", "tls", "encryption", "ssl", "keystore", "certificates", "Access-Control"]
    rows = []
    next_id = 1000
    questions = []
    while len(rows) < 196:
        qid = next_id
        next_id += 1
        tags = set()
        if rng.random() < 0.75:
            tags.add("android")
        if rng.random() < 0.4:
            tags.add(rng.choice(sec_sample))
        tags.add(rng.choice(other_tags))
        created = datetime(2012, 1, 1) + timedelta(days=rng.randint(0, 2400))
        last = created + timedelta(days=rng.randint(0, 1200))
        if rng.random() < 0.05:
            last = datetime(2014, 12, 31, 23, 59, 59)
        if rng.random() < 0.05:
            last = datetime(2015, 1, 1, 0, 0, 0)
        mentions = rng.sample(vocab_names, rng.randint(0, 3))
        body = " ".join(
            "<p>Calling <code>%s.%s(x)</code> fails &amp; &lt;crashes&gt;</p>" % m if rng.random() < 0.6 else "<p>%s then %sX</p>" % (m[0], m[1])
            for m in mentions
        )
        title = "How to use %s" % (mentions[0][0] if mentions else "intents")
        rows.append(
            dict(Id=qid, PostTypeId=1, CreationDate=created, LastActivityDate=last, Tags="".join("<%s>" % t for t in sorted(tags)), Title=title, Body=body)
        )
        questions.append((qid, created))
        for _ in range(rng.randint(0, 2)):
            if len(rows) >= 196:
                break
            aid = next_id
            next_id += 1
            am = rng.sample(vocab_names, rng.randint(0, 2))
            abody = " ".join("<pre><code>obj.%s(); %s v;</code></pre>" % (m[1], m[0]) for m in am)
            adate = created + timedelta(days=rng.randint(0, 1500))
            rows.append(dict(Id=aid, PostTypeId=2, ParentId=qid, CreationDate=adate, LastActivityDate=adate, Body=abody))
    # orphans: answers whose question is absent from the dump
    for k in range(4):
        aid = next_id
        next_id += 1
        m = rng.choice(vocab_names)
        rows.append(dict(Id=aid, PostTypeId=2, ParentId=1 + k, CreationDate=datetime(2016, 1, 1), LastActivityDate=datetime(2016, 1, 1), Body="<p>%s.%s</p>" % m))
    assert len(rows) == 200
    rng.shuffle(rows[150:])

    def fmt(d):
        return d.strftime("%Y-%m-%dT%H:%M:%S.") + "%03d" % (d.microsecond // 1000)

    with open(os.path.join(OUT, "so", "Posts.xml"), "w", encoding="utf-8") as f:
        f.write('<?xml version="1.0" encoding="utf-8"?>\n<posts>\n')
        for r in rows:
            attrs = []
            for k in ["Id", "PostTypeId", "ParentId", "CreationDate", "LastActivityDate", "Title", "Body", "Tags"]:
                if k in r:
                    v = r[k]
                    if isinstance(v, datetime):
                        v = fmt(v)
                    attrs.append("%s=%s" % (k, quoteattr(str(v))))
            f.write("  <row %s />\n" % " ".join(attrs))
        f.write("</posts>\n")


# ---------------------------------------------------------------- main


def main():
    for sub in ["apks", "golden", "dex", "axml", "corpus", "suites", "so", "framework", "config"]:
        p = os.path.join(OUT, sub)
        if sub in ("corpus", "suites") and os.path.isdir(p):
            shutil.rmtree(p)
        os.makedirs(p, exist_ok=True)

    fw = load_framework()
    write_index(fw, os.path.join(OUT, "framework", "android-27-min.index"))

    apps = {
        "minimal": app_minimal(),
        "multidex": app_multidex(),
        "app": app_webview(),
        "unicode": app_unicode(),
        "libonly": app_libonly(),
        "obfuscated": app_obfuscated(),
    }
    apk_dir = os.path.join(OUT, "apks")
    for name, (dexes, man) in apps.items():
        entries = [("AndroidManifest.xml", man)]
        for i, d in enumerate(dexes):
            entries.append(("classes.dex" if i == 0 else "classes%d.dex" % (i + 1), d))
        entries.append(("resources.arsc", b"\x02\x00\x0c\x00" + b"\x00" * 8))
        if name == "app":
            entries.append(("assets/classes3.dex", b"not a dex"))
            entries.append(("lib/arm64-v8a/libnative.so", b"\x7fELF" + b"\x00" * 60))
        write_apk(os.path.join(apk_dir, name + ".apk"), entries)
        golden_apk(name, dexes, man)

    # container edge cases
    min_dexes, min_man = apps["minimal"]
    base = [("AndroidManifest.xml", min_man), ("classes.dex", min_dexes[0])]
    write_apk(os.path.join(apk_dir, "zip64.apk"), base, mode="zip64")
    write_apk(os.path.join(apk_dir, "datadesc.apk"), base, mode="datadesc")
    second = manifest("com.example.second", min_sdk=23, target_sdk=24)
    write_apk(os.path.join(apk_dir, "dupmanifest.apk"), base + [("AndroidManifest.xml", second)])
    write_lines(os.path.join(OUT, "golden", "dupmanifest.manifest.txt"), manifest_golden(second))
    write_apk(os.path.join(apk_dir, "nomanifest.apk"), [("classes.dex", min_dexes[0])])
    write_apk(os.path.join(apk_dir, "nodex.apk"), [("AndroidManifest.xml", min_man), ("assets/classes.dex", min_dexes[0])])

    raw = open(os.path.join(apk_dir, "minimal.apk"), "rb").read()
    eocd = raw.rfind(b"PK\x05\x06")
    cd = int.from_bytes(raw[eocd + 16 : eocd + 20], "little")
    truncated = raw[: cd + 20]
    open(os.path.join(apk_dir, "truncated.apk"), "wb").write(truncated)
    try:
        zipfile.ZipFile(io.BytesIO(truncated))
        raise SystemExit("reference zip reader accepted truncated.apk")
    except zipfile.BadZipFile:
        pass

    # stored entry with a flipped payload byte: CRC mismatch
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as z:
        z.writestr("AndroidManifest.xml", min_man)
        z.writestr("classes.dex", min_dexes[0])
    corrupt = bytearray(buf.getvalue())
    at = corrupt.find(min_dexes[0][:8]) + 40
    corrupt[at] ^= 0xFF
    open(os.path.join(apk_dir, "corrupt.apk"), "wb").write(bytes(corrupt))
    try:
        zipfile.ZipFile(io.BytesIO(bytes(corrupt))).read("classes.dex")
        raise SystemExit("reference zip reader accepted corrupt.apk")
    except zipfile.BadZipFile:
        pass

    # standalone dex fixtures
    open(os.path.join(OUT, "dex", "empty.dex"), "wb").write(DexBuilder([]).build())
    refs_cls = cls(
        "com/example/refs/Caller",
        OBJ,
        methods=[meth("<init>", "()V", [inv(OBJ, "<init>", "()V")]), meth("go", "(Landroid/webkit/WebView;)V", [inv("android/webkit/WebView", "loadUrl", "(Ljava/lang/String;)V")])],
    )
    refs_dex = DexBuilder([refs_cls]).build()
    open(os.path.join(OUT, "dex", "refs.dex"), "wb").write(refs_dex)
    r, d, c = dex_golden([refs_dex])
    write_lines(os.path.join(OUT, "golden", "refs.dex.refs"), r)
    write_lines(os.path.join(OUT, "golden", "refs.dex.defined"), d)

    # standalone manifests
    activity = build_axml(("manifest", [], [("activity", [("android", "exported", "bool", True)], [])]))
    open(os.path.join(OUT, "axml", "activity.axml"), "wb").write(activity)
    nested = build_axml(
        (
            "manifest",
            [],
            [("application", [], [("activity", [("android", "name", "string", ".A")], [("intent-filter", [], [("action", [("android", "name", "string", "android.intent.action.VIEW")], [])])])])],
        ),
        utf8=True,
    )
    open(os.path.join(OUT, "axml", "nested.axml"), "wb").write(nested)
    write_lines(os.path.join(OUT, "golden", "nested.manifest.txt"), manifest_golden(nested))
    open(os.path.join(OUT, "axml", "plain.xml"), "wb").write(b'<?xml version="1.0"?>\n<manifest package="x"/>\n')

    # synthetic real-world corpus and two benchmark suites
    rng = random.Random(20190301)
    vocab = vocabulary(fw)
    hot = rng.sample(vocab, 40)
    levels = [23, 23, 23, 23, 24, 24, 25, 25, 26, 26, 26, 27, 27, 27, 23, 24, 25, 26, 19, 22]
    for i, lvl in enumerate(levels):
        dex, man = synthetic_app(rng, "app%02d" % i, vocab, hot, rng.randint(15, 60), lvl)
        write_apk(os.path.join(OUT, "corpus", "app%02d.apk" % i), [("AndroidManifest.xml", man), ("classes.dex", dex)])
    for suite, n in [("alpha", 3), ("beta", 2)]:
        os.makedirs(os.path.join(OUT, "suites", suite), exist_ok=True)
        for j in range(n):
            dex, man = synthetic_app(rng, "%s%d" % (suite, j), vocab, hot, rng.randint(10, 30), 27)
            write_apk(os.path.join(OUT, "suites", suite, "bench%d.apk" % j), [("AndroidManifest.xml", man), ("classes.dex", dex)])

    names = sorted({(o.split("/")[-1], n) for (_k, o, n, _d) in vocab if len(n) > 1})
    names = [(c.split("$")[-1], n) for (c, n) in names]
    stack_exchange(rng, names)

    with open(os.path.join(OUT, "config", "baseline.apis"), "w") as f:
        f.write("# APIs used by a trivial widget-only app; ignored when tiering suites\n")
        for line in [
            "method|android/app/Activity|<init>|()V",
            "method|android/app/Activity|onCreate|(Landroid/os/Bundle;)V",
            "method|android/app/Activity|setContentView|(I)V",
            "method|java/lang/Object|<init>|()V",
            "manifest-element|manifest||",
            "manifest-element|application||",
            "manifest-element|uses-sdk||",
            "manifest-attribute|manifest|package|",
            "manifest-attribute|manifest|versionCode|",
            "manifest-attribute|manifest|versionName|",
            "manifest-attribute|uses-sdk|minSdkVersion|",
            "manifest-attribute|uses-sdk|targetSdkVersion|",
        ]:
            f.write(line + "\n")
    with open(os.path.join(OUT, "config", "orthogonal.prefixes"), "w") as f:
        f.write("# packages orthogonal to vulnerability benchmarks\nandroid/graphics\nandroid/media\nandroid/renderscript\nandroid/speech\n")
    with open(os.path.join(OUT, "config", "ui.prefixes"), "w") as f:
        f.write("# UI and third-party packages excluded from gap analysis\nandroid/widget\nandroid/view\nandroid/graphics\nandroid/print\nandroid/inputmethodservice\nandroid/Manifest$permission\n")

    print("fixtures written to", OUT)


if __name__ == "__main__":
    main()
