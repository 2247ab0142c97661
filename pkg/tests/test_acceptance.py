"""Acceptance gate.

Each test here checks one release criterion end to end and prints a
single ``ACCEPTANCE <name>: PASS`` or ``FAIL`` line (run with ``-s`` to
see the lines as they happen).  The truth-table oracle is restated from
the documented release rules, not read back from the implementation.
"""

import json
import random
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import pytest

from miniperm import (
    ApiSpec,
    CasePath,
    DataClass,
    EventKind,
    GrantStatus,
    HostProfile,
    Platform,
    UserChoice,
    World,
    bundled_env,
    bundled_profile,
    bundled_patched_profile,
    bundled_scenario,
    corpus_stats,
    detect_pel_api,
    run_all,
    run_scenario,
    scan_package,
)
from miniperm.cli import main
from miniperm.profiles import FIXTURES_DIR


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


# ----------------------------------------------------------------------
# 1. the three canonical request resolutions

def test_acceptance_three_case_conformance():
    with criterion("three-case-conformance"):
        start = time.perf_counter()
        world, results = run_scenario(
            bundled_scenario("three-cases"), bundled_profile("wechat")
        )
        elapsed = time.perf_counter() - start
        cases = [r.outcome.case_path for r in results if r.outcome is not None]
        assert cases == [
            CasePath.BOTH_ALLOW,
            CasePath.HOST_REJECT_OS_ALLOW,
            CasePath.OS_REJECT,
        ]
        assert elapsed < 1.0


# ----------------------------------------------------------------------
# 2. the full grant-state truth table against an independent oracle

LOC = DataClass.LOCATION
SCOPE = "scope.loc"

TRUTH_REGISTRY = (
    ApiSpec("host.scopedBg", LOC, documented_scope=SCOPE, enforced_scope=SCOPE,
            background_capable=True),
    ApiSpec("host.scopedPlain", LOC, documented_scope=SCOPE,
            enforced_scope=SCOPE),
    ApiSpec("host.unscopedBg", LOC, background_capable=True),
    ApiSpec("host.unscopedPlain", LOC),
)

TRUTH_SHAPES = {
    "host.scopedBg": (True, True),
    "host.scopedPlain": (True, False),
    "host.unscopedBg": (False, True),
    "host.unscopedPlain": (False, False),
}


def oracle(host, os_state, scoped, background):
    # OS refusal always wins; a scope defers to the host grant; with no
    # scope only background-capable APIs reach the data.
    if os_state != "granted":
        return False
    if scoped:
        return host == "granted"
    return background


def truth_profile():
    profile = HostProfile(
        host_id="synth",
        platform=Platform.ANDROID,
        scope_table={SCOPE: LOC},
        registry=TRUTH_REGISTRY,
        cache_cleared_on_exit=True,
        settings_page_present={},
        grant_revocable=True,
        grant_deleted_with_mini_program=True,
        identity_data_retained=False,
    )
    profile.validate()
    return profile


def drive_cell(host, os_state, api):
    world = World(truth_profile())
    world.register_mini_program("mp", vendor="v")
    if host != "unset":
        choice = UserChoice.ALLOW if host == "granted" else UserChoice.DENY
        world.request_scope("mp", SCOPE, choice, UserChoice.ALLOW)
    world.set_os_grant(LOC, GrantStatus(os_state))
    return world.call_api("mp", api).released is not None


def test_acceptance_truth_table_oracle():
    with criterion("truth-table-oracle"):
        cells = [
            (h, o, api)
            for h in ("unset", "granted", "denied")
            for o in ("granted", "denied")
            for api in sorted(TRUTH_SHAPES)
        ]
        assert len(cells) == 24
        agreements = sum(
            drive_cell(h, o, api) == oracle(h, o, *TRUTH_SHAPES[api])
            for h, o, api in cells
        )
        assert agreements == 24
        # the registry detector must flag an API exactly when the model
        # releases data in some host-denied cell
        releases_when_denied = {
            api
            for api in TRUTH_SHAPES
            if any(drive_cell("denied", o, api) for o in ("granted", "denied"))
        }
        flagged = {
            f.api
            for f in detect_pel_api(TRUTH_REGISTRY, {SCOPE: LOC}, "synth")
        }
        assert releases_when_denied == {"host.unscopedBg"}
        assert flagged == releases_when_denied


# ----------------------------------------------------------------------
# 3. the five known-broken registry entries, and only those

def test_acceptance_known_broken_entries():
    with criterion("known-broken-entries"):
        expected = {
            ("wechat", "wx.searchContacts", "QualificationIgnored"),
            ("wechat", "wx.choosePoi", "InvalidSetting"),
            ("qq", "MapContext.moveToLocation", "ForgottenScope"),
            ("qq", "MapContext.getCenterLocation", "ForgottenScope"),
            ("alipay", "my.chooseCity", "ParameterLeak"),
        }
        got = set()
        from miniperm import bundled_profiles
        for profile in bundled_profiles():
            for f in detect_pel_api(
                profile.registry, profile.scope_table, profile.host_id
            ):
                got.add((f.host_id, f.api, f.sub_mode))
        assert got == expected


# ----------------------------------------------------------------------
# 4. every category distinguishes its vulnerable host from a patched twin

FALSIFIABILITY_PAIRS = {
    "V1": "wechat",
    "V2": "wechat",
    "V3": "alipay",
    "V4": "unionpay",
    "V5": "wechat",
    "V6": "wechat",
}


def timed_run_all(profile):
    start = time.perf_counter()
    findings, covered = run_all(profile)
    elapsed = time.perf_counter() - start
    return findings, covered, elapsed


def test_acceptance_per_category_falsifiability():
    with criterion("per-category-falsifiability"):
        for code, host in FALSIFIABILITY_PAIRS.items():
            findings, covered, elapsed = timed_run_all(bundled_profile(host))
            assert elapsed < 1.0, (code, host)
            assert any(f.category.code == code for f in findings), (code, host)
            assert code in covered, (code, host)
            p_findings, p_covered, p_elapsed = timed_run_all(
                bundled_patched_profile(host)
            )
            assert p_elapsed < 1.0, (code, host)
            assert not any(
                f.category.code == code for f in p_findings
            ), (code, host)
            assert code in p_covered, (code, host)


# ----------------------------------------------------------------------
# 5. documented per-host behaviors reproduce as findings

def clipboard_behavior(host_id):
    """silent | toast | blocking, as seen on a prompt-free OS build."""
    world, _ = run_scenario(
        bundled_scenario("clipboard-read"),
        bundled_profile(host_id),
        env=bundled_env("android-generic"),
    )
    prompts = [e for e in world.trace if e.kind is EventKind.PROMPT_SHOWN]
    if not prompts:
        return "silent"
    return "blocking" if prompts[0].payload["blocking"] else "toast"


def test_acceptance_host_behavior_facts():
    with criterion("host-behavior-facts"):
        per_host = {}
        for host in ("wechat", "qq", "alipay", "toutiao", "toutiao-speed",
                     "tiktok", "baidu", "quickapp", "unionpay"):
            findings, covered = run_all(bundled_profile(host))
            per_host[host] = (findings, covered)

        def modes(host, code):
            return {f.sub_mode for f in per_host[host][0]
                    if f.category.code == code}

        assert modes("wechat", "V1")
        assert not modes("qq", "V1") and "V1" in per_host["qq"][1]
        assert not modes("toutiao", "V1") and "V1" in per_host["toutiao"][1]
        assert modes("toutiao", "V4") == {"CannotDelete"}
        assert modes("alipay", "V4") == {"IncompleteRemoval"}
        assert modes("unionpay", "V4") == {"SettingDisappears"}
        assert modes("alipay", "V5") == {"HostLayerIgnored"}
        assert modes("wechat", "V5") == {"BothLayersIgnored"}

        tested = ("wechat", "qq", "alipay", "toutiao", "toutiao-speed",
                  "tiktok", "baidu", "quickapp")
        split = {h: clipboard_behavior(h) for h in tested}
        assert sum(v == "silent" for v in split.values()) == 6
        assert sum(v == "toast" for v in split.values()) == 1
        assert sum(v == "blocking" for v in split.values()) == 1
        assert split["qq"] == "toast"
        assert split["alipay"] == "blocking"
        for host in tested:
            assert modes(host, "V6"), host


# ----------------------------------------------------------------------
# 6 and 7. planted corpus: extraction exactness, then usage rates

REGISTRY_PLANTS = (
    ("wx.getLocation({type: 'wgs84'});", "wx.getLocation"),
    ("wx.getClipboardData({});", "wx.getClipboardData"),
    ("wx.searchContacts({phoneNumber: '1'});", "wx.searchContacts"),
    ("wx.chooseImage({count: 1});", "wx.chooseImage"),
    ("wx.getUserInfo({});", "wx.getUserInfo"),
)
BENIGN_PLANTS = (
    ("console.log('page ready');", "console.log"),
    ("this.setData({loaded: true});", "this.setData"),
    ("app.trackView('idx');", "app.trackView"),
    ("ctx.timer.reset();", "ctx.timer.reset"),
)
BRACKET_PLANTS = (
    ("wx['getClipboardData']();", "wx.getClipboardData"),
    ("wx['chooseImage']({count: 2});", "wx.chooseImage"),
    ("wx['openSetting']();", "wx.openSetting"),
)
UNRESOLVED_PLANTS = (
    "wx[apiName]();",
    "wx['get' + suffix]();",
)
PREFIXES = ("", "  ", "    ", "var r = ", "  return ")
TRAP_LINES = (
    "// wx.getLocation({type: 'x'});",
    "var s1 = 'wx.getClipboardData()';",
    'var s2 = "qq.getClipboardData()";',
    "var t1 = `wx.searchContacts({phoneNumber: '0'})`;",
    "var re1 = /wx\\.getLocation\\(/g;",
    "var z9 = 3; // my.chooseCity({showLocatedCity: true})",
)
BLOCK_TRAP = (
    "/* disabled batch:",
    "   wx.getLocation({type: 'gcj02'});",
    "   wx['getClipboardData']();",
    "*/",
)
FILLER_LINES = (
    "var count = 0;",
    "count += 1;",
    "var half = count / 2;",
    "if (half > 1) { count = half / 2; }",
    "function helper(x) { return x + 1; }",
    "var label = 'ready';",
)
CATEGORIES = ("shopping", "tool", "navigation", "social", "game")
TARGET_API = "wx.getClipboardData"


@dataclass
class CorpusTruth:
    root: Path
    packages: list = field(default_factory=list)
    sites: set = field(default_factory=set)  # (pkg, file, line, col, api, form)
    planted_count: int = 0
    index: dict = field(default_factory=dict)
    category_of: dict = field(default_factory=dict)
    calls_target: set = field(default_factory=set)


def build_corpus(root: Path, n_packages=110, seed=20240819) -> CorpusTruth:
    rng = random.Random(seed)
    truth = CorpusTruth(root=root)
    for i in range(n_packages):
        pkg = f"pkg{i:03d}"
        truth.packages.append(pkg)
        pkg_dir = root / pkg
        category = rng.choice(CATEGORIES)
        if rng.random() < 0.9:
            truth.index[pkg] = category
            truth.category_of[pkg] = category
        else:
            truth.category_of[pkg] = "other"
        n_files = 1 + rng.randrange(3)
        pages = []
        for j in range(n_files):
            rel = "app.js" if j == 0 else f"pages/p{j}/index.js"
            if j > 0:
                pages.append(f"pages/p{j}/index")
            lines = []

            def plant(prefix, call, api, form, suffix=""):
                truth.sites.add(
                    (pkg, rel, len(lines) + 1, len(prefix) + 1, api, form)
                )
                truth.planted_count += 1
                lines.append(prefix + call + suffix)
                if api == TARGET_API and form != "Unresolved":
                    truth.calls_target.add(pkg)

            for _ in range(rng.randrange(5, 11)):
                roll = rng.random()
                prefix = rng.choice(PREFIXES)
                if roll < 0.35:
                    lines.append(rng.choice(FILLER_LINES))
                elif roll < 0.50:
                    if rng.random() < 0.2:
                        lines.extend(BLOCK_TRAP)
                    else:
                        lines.append(rng.choice(TRAP_LINES))
                elif roll < 0.70:
                    call, api = rng.choice(REGISTRY_PLANTS)
                    plant(prefix, call, api, "DotCall")
                elif roll < 0.82:
                    call, api = rng.choice(BENIGN_PLANTS)
                    plant(prefix, call, api, "DotCall")
                elif roll < 0.90:
                    call, api = rng.choice(BRACKET_PLANTS)
                    plant(prefix, call, api, "BracketStringCall")
                elif roll < 0.96:
                    plant(prefix, rng.choice(UNRESOLVED_PLANTS), "",
                          "Unresolved")
                else:
                    plant("var msg = `got ${", "wx.getClipboardData()",
                          TARGET_API, "DotCall", suffix="} chars`;")

            path = pkg_dir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        manifest = {"pages": pages or ["pages/index/index"]}
        (pkg_dir / "app.json").write_text(
            json.dumps(manifest), encoding="utf-8"
        )
    (root / "index.json").write_text(json.dumps(truth.index), encoding="utf-8")
    return truth


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    truth = build_corpus(root)
    profile = bundled_profile("wechat")
    start = time.perf_counter()
    reports = [
        scan_package(root / pkg, profile.registry, profile.scope_table)
        for pkg in truth.packages
    ]
    scan_seconds = time.perf_counter() - start
    return truth, reports, scan_seconds


def test_acceptance_scanner_precision_recall(corpus):
    with criterion("scanner-precision-recall"):
        truth, reports, scan_seconds = corpus
        assert len(truth.packages) >= 100
        assert truth.planted_count >= 500
        extracted = set()
        for pkg, report in zip(truth.packages, reports):
            assert report.errors == [], pkg
            for s in report.sites:
                extracted.add(
                    (pkg, s.file, s.line, s.col, s.api_name, s.call_form.value)
                )
        resolvable_truth = {
            t for t in truth.sites if t[5] != "Unresolved"
        }
        resolvable_got = {
            t for t in extracted if t[5] != "Unresolved"
        }
        hits = len(resolvable_got & resolvable_truth)
        precision = hits / len(resolvable_got)
        recall = hits / len(resolvable_truth)
        assert precision == 1.0
        assert recall == 1.0
        # computed-name calls come out as unresolved sites, nothing else
        assert extracted == truth.sites
        assert scan_seconds < 30.0


def test_acceptance_stats_correctness(corpus):
    with criterion("stats-correctness"):
        truth, reports, _ = corpus
        stats = corpus_stats(reports, index=truth.index, api_name=TARGET_API)
        expected_cat = {}
        for pkg in truth.packages:
            cat = truth.category_of[pkg]
            slot = expected_cat.setdefault(cat, {"packages": 0, "calling": 0})
            slot["packages"] += 1
            if pkg in truth.calls_target:
                slot["calling"] += 1
        assert stats["packages"] == len(truth.packages)
        assert stats["calling"] == len(truth.calls_target)
        assert stats["rate"] == len(truth.calls_target) / len(truth.packages)
        assert set(stats["categories"]) == set(expected_cat)
        assert len(stats["categories"]) >= 3
        for cat, slot in expected_cat.items():
            got = stats["categories"][cat]
            assert got["packages"] == slot["packages"], cat
            assert got["calling"] == slot["calling"], cat
            assert got["rate"] == slot["calling"] / slot["packages"], cat
            assert got["calling"] <= got["packages"], cat
        assert stats["calling"] <= stats["packages"]


# ----------------------------------------------------------------------
# 8. reruns are byte-identical

def test_acceptance_determinism(tmp_path):
    with criterion("determinism"):
        pkg = str(FIXTURES_DIR / "packages" / "pkg-clipboard")
        index = str(FIXTURES_DIR / "packages" / "index.json")
        commands = {
            "simulate": ["simulate", "--profile", "wechat-android",
                         "--scenario", "three-cases"],
            "detect": ["detect", "--profile", "wechat-android",
                       "--format", "json"],
            "scan": ["scan", "--package", pkg,
                     "--registry", "wechat-android", "--format", "json"],
            "stats": ["stats", "--package", pkg,
                      "--registry", "wechat-android",
                      "--api", "wx.getClipboardData",
                      "--corpus-index", index, "--format", "json"],
            "matrix": ["matrix", "--format", "json"],
        }
        for name, argv in commands.items():
            outputs = []
            codes = []
            for run_no in (1, 2):
                out = tmp_path / f"{name}-{run_no}"
                codes.append(main(argv + ["--out", str(out)]))
                outputs.append(out.read_bytes())
            assert codes[0] == codes[1], name
            assert outputs[0] == outputs[1], name
            assert outputs[0], name
