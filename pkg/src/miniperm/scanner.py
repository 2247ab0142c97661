"""Static call-site scanner for packaged mini-program source trees.

A package is a directory holding an ``app.json`` manifest and ``*.js``
sources (nested arbitrarily).  The scanner tokenizes each file, pulls
out call sites, and matches them against an API registry:

* ``wx.getLocation(...)``            -> DotCall, exact name match
* ``wx["getLocation"](...)``         -> BracketStringCall, same match
* ``ctx.moveToLocation(...)``        -> DotCall, matched by method name
  against registry entries written as ``SomeContext.method`` (the
  receiver object is created at runtime, so only the method can match)
* ``wx[name](...)``                  -> Unresolved (reported, unmatched)

A matched site is flagged when its registry entry classifies as a
permission wiring defect, or when the API reads sensitive data with no
scope in front of it and no user interaction required.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

from .jslex import LexError, Token, tokenize
from .model import ApiSpec, DataClass
from .profiles import ProfileError, _api_from_obj, profile_from_obj
from .detectors import PelSubMode, pel_classification


class ScanError(Exception):
    pass


class CallForm(str, Enum):
    DOT_CALL = "DotCall"
    BRACKET_STRING_CALL = "BracketStringCall"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class CallSite:
    api_name: str  # "" when the callee cannot be resolved statically
    receiver: str
    method: str
    call_form: CallForm
    file: str
    line: int
    col: int
    literal_args: Optional[dict] = None

    def to_json_obj(self) -> dict:
        return {
            "api_name": self.api_name,
            "receiver": self.receiver,
            "method": self.method,
            "call_form": self.call_form.value,
            "file": self.file,
            "line": self.line,
            "col": self.col,
            "literal_args": self.literal_args,
        }


@dataclass(frozen=True)
class MatchedSite:
    site: CallSite
    api: str
    data_class: DataClass
    sub_mode: Optional[PelSubMode]
    trigger_matched: bool
    flagged: bool

    def to_json_obj(self) -> dict:
        obj = self.site.to_json_obj()
        obj.update({
            "api": self.api,
            "data_class": self.data_class.value,
            "sub_mode": self.sub_mode.value if self.sub_mode else None,
            "trigger_matched": self.trigger_matched,
            "flagged": self.flagged,
        })
        return obj


@dataclass
class PackageTree:
    package_id: str
    root: Path
    manifest: dict
    js_files: list[str]
    errors: list[str] = field(default_factory=list)


@dataclass
class ScanReport:
    package_id: str
    sites: list[CallSite]
    matches: list[MatchedSite]
    errors: list[str]

    @property
    def flagged(self) -> list[MatchedSite]:
        return [m for m in self.matches if m.flagged]

    def to_json_obj(self) -> dict:
        return {
            "package_id": self.package_id,
            "sites": [s.to_json_obj() for s in self.sites],
            "matches": [m.to_json_obj() for m in self.matches],
            "flagged_count": len(self.flagged),
            "errors": list(self.errors),
        }


# ----------------------------------------------------------------------
# package loading

def load_package(path: Union[str, Path]) -> PackageTree:
    root = Path(path)
    if not root.is_dir():
        raise ScanError(f"{root}: not a directory")
    manifest_path = root / "app.json"
    if not manifest_path.is_file():
        raise ScanError(f"{root}: no app.json manifest; not a package root")
    tree = PackageTree(package_id=root.name, root=root, manifest={}, js_files=[])
    try:
        tree.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        tree.errors.append(f"app.json: {exc}")
    tree.js_files = sorted(
        str(p.relative_to(root)).replace("\\", "/") for p in root.rglob("*.js")
    )
    return tree


def extract_call_sites(tree: PackageTree) -> list[CallSite]:
    sites: list[CallSite] = []
    for rel in tree.js_files:
        try:
            text = (tree.root / rel).read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            tree.errors.append(f"{rel}: {exc}")
            continue
        try:
            tokens = tokenize(text)
        except LexError as exc:
            tree.errors.append(f"{rel}: {exc}")
            continue
        sites.extend(_sites_from_tokens(tokens, rel))
    sites.sort(key=lambda s: (s.file, s.line, s.col))
    return sites


def _sites_from_tokens(tokens: Sequence[Token], rel: str) -> list[CallSite]:
    sites: list[CallSite] = []
    n = len(tokens)
    i = 0
    while i < n:
        tok = tokens[i]
        if tok.kind != "ident":
            i += 1
            continue
        chain = [tok]
        j = i + 1
        while (
            j + 1 < n
            and tokens[j].kind == "punct"
            and tokens[j].text == "."
            and tokens[j + 1].kind == "ident"
        ):
            chain.append(tokens[j + 1])
            j += 2
        nxt = tokens[j] if j < n else None

        if nxt is not None and nxt.kind == "punct" and nxt.text == "(":
            if len(chain) >= 2:
                receiver = ".".join(t.text for t in chain[:-1])
                method = chain[-1].text
                sites.append(CallSite(
                    api_name=f"{receiver}.{method}",
                    receiver=receiver,
                    method=method,
                    call_form=CallForm.DOT_CALL,
                    file=rel,
                    line=chain[0].line,
                    col=chain[0].col,
                    literal_args=_literal_args(tokens, j + 1),
                ))
            i = j + 1
            continue

        if nxt is not None and nxt.kind == "punct" and nxt.text == "[":
            if (
                j + 3 < n
                and tokens[j + 1].kind == "string"
                and tokens[j + 2].kind == "punct"
                and tokens[j + 2].text == "]"
                and tokens[j + 3].kind == "punct"
                and tokens[j + 3].text == "("
            ):
                receiver = ".".join(t.text for t in chain)
                method = tokens[j + 1].text
                sites.append(CallSite(
                    api_name=f"{receiver}.{method}",
                    receiver=receiver,
                    method=method,
                    call_form=CallForm.BRACKET_STRING_CALL,
                    file=rel,
                    line=chain[0].line,
                    col=chain[0].col,
                    literal_args=_literal_args(tokens, j + 4),
                ))
                i = j + 4
                continue
            # computed subscript: resolves at runtime only
            depth = 1
            k = j + 1
            while k < n and depth:
                if tokens[k].kind == "punct":
                    if tokens[k].text == "[":
                        depth += 1
                    elif tokens[k].text == "]":
                        depth -= 1
                k += 1
            if k < n and tokens[k].kind == "punct" and tokens[k].text == "(":
                sites.append(CallSite(
                    api_name="",
                    receiver=".".join(t.text for t in chain),
                    method="",
                    call_form=CallForm.UNRESOLVED,
                    file=rel,
                    line=chain[0].line,
                    col=chain[0].col,
                ))
            i = k
            continue

        i = j if j > i else i + 1
    return sites


def _literal_args(tokens: Sequence[Token], k: int) -> Optional[dict]:
    """Scalar fields of an object literal passed as the first argument."""
    n = len(tokens)
    if k >= n or tokens[k].kind != "punct" or tokens[k].text != "{":
        return None
    args: dict = {}
    depth = 1
    k += 1
    while k < n and depth:
        tok = tokens[k]
        if tok.kind == "punct" and tok.text in ("{", "["):
            depth += 1
        elif tok.kind == "punct" and tok.text in ("}", "]"):
            depth -= 1
        elif (
            depth == 1
            and tok.kind in ("ident", "string")
            and k + 1 < n
            and tokens[k + 1].kind == "punct"
            and tokens[k + 1].text == ":"
            and k + 2 < n
        ):
            value = tokens[k + 2]
            if value.kind == "string":
                args[tok.text] = value.text
            elif value.kind == "number":
                try:
                    args[tok.text] = int(value.text)
                except ValueError:
                    try:
                        args[tok.text] = float(value.text)
                    except ValueError:
                        pass
            elif value.kind == "ident" and value.text in ("true", "false", "null"):
                args[tok.text] = {"true": True, "false": False, "null": None}[value.text]
            k += 2
            continue
        k += 1
    return args or None


# ----------------------------------------------------------------------
# registry matching

def match_sites(
    sites: Sequence[CallSite],
    registry: Sequence[ApiSpec],
    scope_table: dict,
) -> list[MatchedSite]:
    exact = {spec.name: spec for spec in registry}
    by_method = {
        spec.name.split(".", 1)[1]: spec
        for spec in registry
        if "." in spec.name and spec.name.split(".", 1)[0][:1].isupper()
    }
    matches = []
    for site in sites:
        if site.call_form is CallForm.UNRESOLVED:
            continue
        spec = exact.get(site.api_name)
        if spec is None:
            spec = by_method.get(site.method)
        if spec is None:
            continue
        sub = pel_classification(spec, scope_table)
        trigger = False
        if spec.param_leaks and site.literal_args:
            trigger = any(
                site.literal_args.get(rule.param_name) == rule.trigger_value
                for rule in spec.param_leaks
            )
        flagged = sub is not None or (
            spec.background_capable
            and spec.data_class is not DataClass.NONE
            and spec.enforced_scope is None
        )
        matches.append(MatchedSite(
            site=site,
            api=spec.name,
            data_class=spec.data_class,
            sub_mode=sub,
            trigger_matched=trigger,
            flagged=flagged,
        ))
    return matches


def scan_package(
    path: Union[str, Path],
    registry: Sequence[ApiSpec],
    scope_table: dict,
) -> ScanReport:
    tree = load_package(path)
    sites = extract_call_sites(tree)
    matches = match_sites(sites, registry, scope_table)
    return ScanReport(
        package_id=tree.package_id,
        sites=sites,
        matches=matches,
        errors=list(tree.errors),
    )


# ----------------------------------------------------------------------
# registry files and corpus statistics

def load_registry_file(path: Union[str, Path]) -> tuple[tuple[ApiSpec, ...], dict]:
    """(registry, scope_table) from a registry file or a host profile."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScanError(f"{path}: {exc}")
    if not isinstance(obj, dict):
        raise ScanError(f"{path}: expected a JSON object")
    if "host_id" in obj:
        try:
            profile = profile_from_obj(obj, where=str(path))
        except ProfileError as exc:
            raise ScanError(str(exc))
        return profile.registry, dict(profile.scope_table)
    if "apis" not in obj:
        raise ScanError(f"{path}: neither a host profile nor an 'apis' registry file")
    try:
        registry = tuple(
            _api_from_obj(entry, where=f"{path}: apis[{idx}]")
            for idx, entry in enumerate(obj["apis"])
        )
        scope_table = {
            str(scope): DataClass(dc)
            for scope, dc in obj.get("scope_table", {}).items()
        }
    except (ProfileError, ValueError, KeyError, TypeError) as exc:
        raise ScanError(f"{path}: {exc}")
    return registry, scope_table


def corpus_stats(
    reports: Sequence[ScanReport],
    index: Optional[dict] = None,
    api_name: str = "",
) -> dict:
    """Per-category usage rates of one API across scanned packages.

    ``index`` maps package ids to category labels; packages it does not
    know fall under "other".  Rates are plain ratios of packages with
    at least one matched call to packages in the category.
    """
    index = index or {}
    per_cat: dict[str, dict] = {}
    total = {"packages": 0, "calling": 0}
    for report in reports:
        cat = index.get(report.package_id, "other")
        slot = per_cat.setdefault(cat, {"packages": 0, "calling": 0})
        slot["packages"] += 1
        total["packages"] += 1
        if any(m.api == api_name for m in report.matches):
            slot["calling"] += 1
            total["calling"] += 1
    categories = {
        cat: {
            "packages": slot["packages"],
            "calling": slot["calling"],
            "rate": slot["calling"] / slot["packages"],
        }
        for cat, slot in sorted(per_cat.items())
    }
    return {
        "api": api_name,
        "packages": total["packages"],
        "calling": total["calling"],
        "rate": (total["calling"] / total["packages"]) if total["packages"] else 0.0,
        "categories": categories,
    }
