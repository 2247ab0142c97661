"""Detectors for the six weakness categories, plus the status matrix.

Each detector either inspects a finished trace/world (dynamic) or a
host's API registry (static) and returns :class:`Finding` records.
``run_all`` drives every applicable bundled scenario against a host
profile and aggregates the findings with coverage bookkeeping, which
is what the per-category status matrix is built from.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .model import (
    OS_RUNTIME_CLASSES,
    ApiSpec,
    CasePath,
    DataClass,
    EventKind,
    GrantStatus,
    TraceEvent,
    World,
)
from .profiles import HostProfile, OsEnvProfile, bundled_envs
from .scenario import Scenario, bundled_scenarios, run_scenario


class VulnCategory(str, Enum):
    CACHE_REUSE = "V1_CacheReuse"
    PEL_API = "V2_PelApi"
    STEALTH_TRANSFER = "V3_StealthTransfer"
    MGMT_GAP = "V4_MgmtGap"
    WEBVIEW_BYPASS = "V5_WebviewBypass"
    ENV_DIVERGENCE = "V6_EnvDivergence"

    @property
    def code(self) -> str:
        return self.value.split("_", 1)[0]


CATEGORY_CODES = tuple(c.code for c in VulnCategory)


class PelSubMode(str, Enum):
    QUALIFICATION_IGNORED = "QualificationIgnored"
    FORGOTTEN_SCOPE = "ForgottenScope"
    PARAMETER_LEAK = "ParameterLeak"
    INVALID_SETTING = "InvalidSetting"


class StealthSubMode(str, Enum):
    VERTICAL = "Vertical"
    HORIZONTAL = "Horizontal"


class MgmtSubMode(str, Enum):
    SETTING_DISAPPEARS = "SettingDisappears"
    CANNOT_DELETE = "CannotDelete"
    INCOMPLETE_REMOVAL = "IncompleteRemoval"


class WebviewSubMode(str, Enum):
    BOTH_LAYERS_IGNORED = "BothLayersIgnored"
    HOST_LAYER_IGNORED = "HostLayerIgnored"


class MatrixStatus(str, Enum):
    VULNERABLE = "vulnerable"
    FIXED = "fixed"
    NOT_VULNERABLE = "not_vulnerable"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Finding:
    category: VulnCategory
    sub_mode: str
    host_id: str
    api: str
    evidence: tuple = ()
    description: str = ""
    details: dict = field(default_factory=dict)

    def sort_key(self):
        return (
            self.category.value,
            self.sub_mode,
            self.host_id,
            self.api,
            tuple(str(e) for e in self.evidence),
        )

    def to_json_obj(self) -> dict:
        return {
            "category": self.category.value,
            "code": self.category.code,
            "sub_mode": self.sub_mode,
            "host_id": self.host_id,
            "api": self.api,
            "evidence": list(self.evidence),
            "description": self.description,
            "details": self.details,
        }


def _sorted(findings: Iterable[Finding]) -> list[Finding]:
    return sorted(findings, key=Finding.sort_key)


# ----------------------------------------------------------------------
# V1: cached sensor output survives a close/reopen cycle

def detect_cache_reuse(trace: Sequence[TraceEvent], profile: HostProfile) -> list[Finding]:
    findings = []
    last_cached: dict[tuple[str, str], int] = {}
    closed: dict[str, list[int]] = {}
    for event in trace:
        mp = event.payload.get("mini_program", "")
        if event.kind is EventKind.FILE_CACHED:
            last_cached[(mp, event.payload["path"])] = event.seq
        elif event.kind is EventKind.CLOSED:
            closed.setdefault(mp, []).append(event.seq)
        elif event.kind is EventKind.FILE_REUSED:
            path = event.payload["path"]
            cached_seq = last_cached.get((mp, path))
            if cached_seq is None:
                continue
            gap = [s for s in closed.get(mp, ()) if cached_seq < s < event.seq]
            if gap:
                findings.append(Finding(
                    VulnCategory.CACHE_REUSE,
                    sub_mode="",
                    host_id=profile.host_id,
                    api="",
                    evidence=(cached_seq, gap[0], event.seq),
                    description=(
                        f"{mp} re-read {path!r} cached in an earlier session; "
                        "the host never cleared it on exit"
                    ),
                    details={"mini_program": mp, "path": path},
                ))
    return _sorted(findings)


# ----------------------------------------------------------------------
# V2: registry entries whose permission wiring is broken

def pel_classification(spec: ApiSpec, scope_table: dict) -> Optional[PelSubMode]:
    """Classify one API entry, or None when its wiring is sound.

    Only permission classes the OS treats as user-grantable count for
    the missing-scope modes; data the OS hands out freely (clipboard,
    account identity) cannot "skip" an OS consent step.
    """
    if spec.data_class is DataClass.NONE:
        return None
    if spec.param_leaks:
        return PelSubMode.PARAMETER_LEAK
    if spec.documented_scope and spec.enforced_scope != spec.documented_scope:
        return PelSubMode.INVALID_SETTING
    if (
        spec.enforced_scope is None
        and spec.background_capable
        and spec.data_class in OS_RUNTIME_CLASSES
    ):
        if any(dc is spec.data_class for dc in scope_table.values()):
            return PelSubMode.FORGOTTEN_SCOPE
        return PelSubMode.QUALIFICATION_IGNORED
    return None


def detect_pel_api(
    registry: Sequence[ApiSpec], scope_table: dict, host_id: str = ""
) -> list[Finding]:
    findings = []
    for spec in registry:
        sub = pel_classification(spec, scope_table)
        if sub is None:
            continue
        details = {
            "data_class": spec.data_class.value,
            "documented_scope": spec.documented_scope,
            "enforced_scope": spec.enforced_scope,
        }
        if sub is PelSubMode.PARAMETER_LEAK:
            details["param_leaks"] = [
                {
                    "param_name": r.param_name,
                    "trigger_value": r.trigger_value,
                    "released_class": r.released_class.value,
                }
                for r in spec.param_leaks
            ]
        findings.append(Finding(
            VulnCategory.PEL_API,
            sub_mode=sub.value,
            host_id=host_id,
            api=spec.name,
            evidence=(f"registry:{spec.name}",),
            description=_PEL_DESCRIPTIONS[sub].format(api=spec.name),
            details=details,
        ))
    return _sorted(findings)


_PEL_DESCRIPTIONS = {
    PelSubMode.QUALIFICATION_IGNORED: (
        "{api} hands out data of a class the host never defined a scope for"
    ),
    PelSubMode.FORGOTTEN_SCOPE: (
        "{api} skips the scope check other APIs of its data class go through"
    ),
    PelSubMode.PARAMETER_LEAK: (
        "{api} releases extra data when called with a particular argument"
    ),
    PelSubMode.INVALID_SETTING: (
        "{api} documents a scope that its implementation does not enforce"
    ),
}


# ----------------------------------------------------------------------
# V3: data released although this mini-program was never asked about it

def detect_stealth_transfer(
    trace: Sequence[TraceEvent], profile: HostProfile
) -> list[Finding]:
    findings = []
    for event in trace:
        if event.kind is not EventKind.DATA_RELEASED:
            continue
        p = event.payload
        if p.get("host_state") != GrantStatus.UNSET.value:
            continue
        if p.get("route") == CasePath.WEBVIEW_BYPASS.value:
            continue  # channel problem, not a grant-sharing one
        vendor = p.get("vendor", "")
        mp = p["mini_program"]
        if vendor and vendor in profile.vendor_trust_bypass:
            findings.append(Finding(
                VulnCategory.STEALTH_TRANSFER,
                sub_mode=StealthSubMode.VERTICAL.value,
                host_id=profile.host_id,
                api=p["api"],
                evidence=(event.seq,),
                description=(
                    f"{mp} (vendor {vendor!r}) obtained {p['data_class']} data "
                    "without its own grant flow; the host waves its vendor through"
                ),
                details={"mini_program": mp, "vendor": vendor,
                         "data_class": p["data_class"]},
            ))
            continue
        partner = _login_partner_evidence(trace, profile, mp, event.seq)
        if partner is not None:
            partner_id, partner_seq = partner
            findings.append(Finding(
                VulnCategory.STEALTH_TRANSFER,
                sub_mode=StealthSubMode.HORIZONTAL.value,
                host_id=profile.host_id,
                api=p["api"],
                evidence=(partner_seq, event.seq),
                description=(
                    f"{mp} obtained {p['data_class']} data on the strength of "
                    f"{partner_id}'s earlier grant; the two share a login"
                ),
                details={"mini_program": mp, "partner": partner_id,
                         "data_class": p["data_class"]},
            ))
    return _sorted(findings)


def _login_partner_evidence(
    trace: Sequence[TraceEvent], profile: HostProfile, mp: str, before_seq: int
) -> Optional[tuple[str, int]]:
    group = next((g for g in profile.shared_login_groups if mp in g), None)
    if group is None:
        return None
    for event in trace:
        if event.seq >= before_seq or event.kind is not EventKind.DATA_RELEASED:
            continue
        p = event.payload
        if (
            p["mini_program"] in group
            and p["mini_program"] != mp
            and p.get("data_class") == DataClass.IDENTITY.value
        ):
            return p["mini_program"], event.seq
    return None


# ----------------------------------------------------------------------
# V4: the user cannot see, revoke, or fully remove what was granted

def detect_mgmt_issues(world: World, profile: HostProfile) -> list[Finding]:
    findings = []
    deleted_seq = {}
    for event in world.trace:
        if event.kind is EventKind.DELETED:
            deleted_seq[event.payload["mini_program"]] = event.seq

    for (mp_id, scope), grant in sorted(world.grants.items()):
        mp = world.mini_programs.get(mp_id)
        if mp is None or mp.deleted:
            continue
        if grant.state is GrantStatus.GRANTED and not grant.visible_in_settings:
            findings.append(Finding(
                VulnCategory.MGMT_GAP,
                sub_mode=MgmtSubMode.SETTING_DISAPPEARS.value,
                host_id=profile.host_id,
                api="",
                evidence=(grant.recorded_at,),
                description=(
                    f"{mp_id} holds {scope} but no settings entry shows it, "
                    "so the user cannot take it back"
                ),
                details={"mini_program": mp_id, "scope": scope},
            ))

    for mp_id, mp in sorted(world.mini_programs.items()):
        if not mp.deleted:
            continue
        survivors = sorted(
            scope
            for (holder, scope), grant in world.grants.items()
            if holder == mp_id and grant.state is not GrantStatus.UNSET
        )
        if survivors:
            findings.append(Finding(
                VulnCategory.MGMT_GAP,
                sub_mode=MgmtSubMode.CANNOT_DELETE.value,
                host_id=profile.host_id,
                api="",
                evidence=(deleted_seq.get(mp_id, -1),),
                description=(
                    f"deleting {mp_id} left its grant records in place: "
                    + ", ".join(survivors)
                ),
                details={"mini_program": mp_id, "scopes": survivors},
            ))
        if world.retained_identity_data.get(mp_id):
            findings.append(Finding(
                VulnCategory.MGMT_GAP,
                sub_mode=MgmtSubMode.INCOMPLETE_REMOVAL.value,
                host_id=profile.host_id,
                api="",
                evidence=(deleted_seq.get(mp_id, -1),),
                description=(
                    f"deleting {mp_id} did not remove the identity data it "
                    "had collected"
                ),
                details={
                    "mini_program": mp_id,
                    "retained": sorted(
                        dc.value for dc in world.retained_identity_data[mp_id]
                    ),
                },
            ))
    return _sorted(findings)


# ----------------------------------------------------------------------
# V5: in-page web content reaches APIs without the usual checks

def detect_webview_bypass(
    trace: Sequence[TraceEvent], profile: HostProfile
) -> list[Finding]:
    findings = []
    for event in trace:
        if event.kind is not EventKind.DATA_RELEASED:
            continue
        p = event.payload
        if p.get("route") != CasePath.WEBVIEW_BYPASS.value:
            continue
        os_state = p.get("os_state")
        host_state = p.get("host_state")
        if os_state in ("denied", "unset"):
            sub = WebviewSubMode.BOTH_LAYERS_IGNORED
            what = "neither layer was consulted"
        elif host_state != GrantStatus.GRANTED.value:
            sub = WebviewSubMode.HOST_LAYER_IGNORED
            what = "the host layer was skipped"
        else:
            continue  # both layers happened to be satisfied
        findings.append(Finding(
            VulnCategory.WEBVIEW_BYPASS,
            sub_mode=sub.value,
            host_id=profile.host_id,
            api=p["api"],
            evidence=(event.seq,),
            description=(
                f"{p['api']} released {p['data_class']} data to web page "
                f"content; {what}"
            ),
            details={
                "mini_program": p["mini_program"],
                "data_class": p["data_class"],
                "os_state": os_state,
                "host_state": host_state,
            },
        ))
    return _sorted(findings)


# ----------------------------------------------------------------------
# V6: the same read behaves differently across OS environments

def _clipboard_signatures(world: World) -> list[tuple[str, int, dict]]:
    """(api, call_seq, signature) for each clipboard call in the trace."""
    out = []
    for event in world.trace:
        if event.kind is not EventKind.API_CALLED or "env" not in event.payload:
            continue
        seq = event.seq
        related = [e for e in world.trace if e.payload.get("call_seq") == seq]
        prompt = next((e for e in related if e.kind is EventKind.PROMPT_SHOWN), None)
        answer = next((e for e in related if e.kind is EventKind.PROMPT_ANSWERED), None)
        release = next((e for e in related if e.kind is EventKind.DATA_RELEASED), None)
        sig = {
            "prompted": prompt is not None,
            "blocking": bool(prompt.payload["blocking"]) if prompt else False,
            "released": release is not None,
            "released_before_answer": bool(
                release is not None
                and prompt is not None
                and prompt.payload["blocking"]
                and (answer is None or release.seq < answer.seq)
            ),
        }
        out.append((event.payload["api"], seq, sig))
    return out


def _signature_unsafe(sig: dict) -> bool:
    return sig["released"] and (
        not sig["prompted"] or not sig["blocking"] or sig["released_before_answer"]
    )


def detect_env_divergence(
    scenario: Scenario,
    envs: Sequence[OsEnvProfile],
    profile: HostProfile,
) -> list[Finding]:
    """Run the scenario once per environment and compare each read.

    A finding is one (clipboard call, environment pair) whose observable
    behavior differs.  Environments where the data left without a real
    consent step are listed inside the finding, not flagged separately.
    """
    if len(envs) < 2:
        return []
    envs = sorted(envs, key=lambda e: e.name)
    per_env: dict[str, list[tuple[str, int, dict]]] = {}
    for env in envs:
        world, _ = run_scenario(scenario, profile, env=env)
        per_env[env.name] = _clipboard_signatures(world)

    findings = []
    calls = min(len(v) for v in per_env.values())
    for idx in range(calls):
        for a, b in itertools.combinations([e.name for e in envs], 2):
            api_a, seq_a, sig_a = per_env[a][idx]
            _, seq_b, sig_b = per_env[b][idx]
            if sig_a == sig_b:
                continue
            unsafe = [e for e, s in ((a, sig_a), (b, sig_b)) if _signature_unsafe(s)]
            findings.append(Finding(
                VulnCategory.ENV_DIVERGENCE,
                sub_mode="Divergence",
                host_id=profile.host_id,
                api=api_a,
                evidence=(f"{a}#{seq_a}", f"{b}#{seq_b}"),
                description=(
                    f"{api_a} behaves differently under {a} and {b}; what the "
                    "user is shown depends on the OS build, not the host"
                ),
                details={
                    "scenario": scenario.name,
                    "signatures": {a: sig_a, b: sig_b},
                    "unsafe_envs": unsafe,
                },
            ))
    return _sorted(findings)


# ----------------------------------------------------------------------
# aggregation

def run_all(
    profile: HostProfile,
    scenarios: Optional[Sequence[Scenario]] = None,
    envs: Optional[Sequence[OsEnvProfile]] = None,
    registry: Optional[Sequence[ApiSpec]] = None,
) -> tuple[list[Finding], set[str]]:
    """All findings for one host plus the set of category codes covered.

    A category counts as covered when something capable of exposing it
    actually ran: the registry scan for V2, a >=2 environment suite for
    V6, and an applicable scenario tagged with the code otherwise.
    """
    if scenarios is None:
        scenarios = bundled_scenarios()
    if envs is None:
        envs = list(bundled_envs().values())
    findings: list[Finding] = []
    covered: set[str] = set()

    reg = tuple(registry) if registry is not None else profile.registry
    if reg:
        covered.add("V2")
        findings.extend(detect_pel_api(reg, profile.scope_table, profile.host_id))

    for sc in scenarios:
        if not sc.applies_to(profile):
            continue
        if sc.needs_env():
            if len(envs) >= 2:
                findings.extend(detect_env_divergence(sc, envs, profile))
                covered.update(sc.covers)
            continue
        world, _ = run_scenario(sc, profile)
        for f in (
            detect_cache_reuse(world.trace, profile)
            + detect_stealth_transfer(world.trace, profile)
            + detect_webview_bypass(world.trace, profile)
            + detect_mgmt_issues(world, profile)
        ):
            f.details.setdefault("scenario", sc.name)
            findings.append(f)
        covered.update(sc.covers)
    return _sorted(findings), covered


def category_status(
    profile: HostProfile, findings: Sequence[Finding], covered: set[str], code: str
) -> MatrixStatus:
    if any(f.category.code == code for f in findings):
        return MatrixStatus.VULNERABLE
    if code in profile.fixed_categories():
        return MatrixStatus.FIXED
    if code in profile.uncertain_categories():
        return MatrixStatus.UNKNOWN
    if code in covered:
        return MatrixStatus.NOT_VULNERABLE
    return MatrixStatus.UNKNOWN


@dataclass
class MatrixReport:
    # host_id -> code -> platform -> status
    cells: dict
    hosts: tuple[str, ...]
    finding_counts: dict

    def status(self, host_id: str, code: str, platform: str) -> Optional[MatrixStatus]:
        return self.cells.get(host_id, {}).get(code, {}).get(platform)

    def _cell_text(self, host_id: str, code: str) -> str:
        parts = []
        for platform in ("android", "ios"):
            status = self.status(host_id, code, platform)
            parts.append(status.value if status else "-")
        return "|".join(parts)

    def to_json_obj(self) -> dict:
        return {
            "categories": list(CATEGORY_CODES),
            "hosts": [
                {
                    "host_id": host,
                    "cells": {
                        code: {
                            platform: status.value
                            for platform, status in self.cells[host].get(code, {}).items()
                        }
                        for code in CATEGORY_CODES
                    },
                    "findings": self.finding_counts.get(host, 0),
                }
                for host in self.hosts
            ],
        }

    def render_markdown(self) -> str:
        head = "| host | " + " | ".join(CATEGORY_CODES) + " |"
        sep = "| --- |" + " --- |" * len(CATEGORY_CODES)
        lines = [head, sep]
        for host in self.hosts:
            cells = [
                self._cell_text(host, code).replace("|", " \\| ")
                for code in CATEGORY_CODES
            ]
            lines.append("| " + host + " | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def render_text(self) -> str:
        width = max(len(h) for h in self.hosts) if self.hosts else 4
        lines = ["cells are <android>|<ios>; '-' marks a platform without a profile"]
        header = "host".ljust(width) + "  " + "  ".join(CATEGORY_CODES)
        lines.append(header)
        for host in self.hosts:
            row = [host.ljust(width)]
            for code in CATEGORY_CODES:
                row.append(self._cell_text(host, code))
            lines.append("  ".join(row))
        return "\n".join(lines) + "\n"


def build_matrix(
    profiles: Optional[Sequence[HostProfile]] = None,
    scenarios: Optional[Sequence[Scenario]] = None,
    envs: Optional[Sequence[OsEnvProfile]] = None,
) -> MatrixReport:
    from .profiles import bundled_profiles

    if profiles is None:
        profiles = bundled_profiles()
    cells: dict = {}
    counts: dict = {}
    for profile in profiles:
        findings, covered = run_all(profile, scenarios=scenarios, envs=envs)
        host_cells = cells.setdefault(profile.host_id, {})
        for code in CATEGORY_CODES:
            host_cells.setdefault(code, {})[profile.platform.value] = category_status(
                profile, findings, covered, code
            )
        counts[profile.host_id] = counts.get(profile.host_id, 0) + len(findings)
    return MatrixReport(
        cells=cells, hosts=tuple(sorted(cells)), finding_counts=counts
    )
