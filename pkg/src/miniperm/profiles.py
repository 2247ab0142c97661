"""Host-app policy profiles and OS environment profiles.

A host profile is a declarative description of how one host app manages
mini-program permissions: its scope table, its API registry, and its
cache / settings / deletion / webview / clipboard policies.  Profiles
are plain JSON fixtures (``schema_version`` 1), so a host or a patched
variant of a host is data, not code.

Bundled fixtures live in ``miniperm/fixtures/profiles`` (one file per
host app per platform, with patched twins under ``patched/``) and
``miniperm/fixtures/envs``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

from .model import (
    ApiSpec,
    Channel,
    ClipboardPromptMode,
    DataClass,
    ParamLeakRule,
    WebviewBridgeMode,
    validate_scope_id,
)

SCHEMA_VERSION = 1

FIXTURES_DIR = Path(__file__).parent / "fixtures"

_CATEGORY_CODES = {"V1", "V2", "V3", "V4", "V5", "V6"}


class Platform(str, Enum):
    ANDROID = "android"
    IOS = "ios"


class ProfileError(Exception):
    """Raised for unparseable or inconsistent profile/env files."""


@dataclass(frozen=True)
class OsEnvProfile:
    """OS-side behavior that varies between environments."""

    name: str
    clipboard_prompt_mode: ClipboardPromptMode
    notes: str = ""

    def to_json_obj(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "clipboard_prompt_mode": self.clipboard_prompt_mode.value,
            "notes": self.notes,
        }


@dataclass(frozen=True)
class HostProfile:
    """Permission policy of one host app on one platform.

    ``host_id`` names the host app; together with ``platform`` it
    identifies a profile, so the same app can ship an Android and an
    iOS variant side by side.
    """

    host_id: str
    platform: Platform
    scope_table: dict[str, DataClass]
    registry: tuple[ApiSpec, ...]
    cache_cleared_on_exit: bool
    settings_page_present: dict[DataClass, bool]
    grant_revocable: bool
    grant_deleted_with_mini_program: bool
    identity_data_retained: bool
    denied_scope_reprompts: bool = False
    webview_bridge_mode: WebviewBridgeMode = WebviewBridgeMode.ENFORCE_BOTH
    vendor_trust_bypass: frozenset[str] = frozenset()
    shared_login_groups: tuple[tuple[str, ...], ...] = ()
    clipboard_prompt_mode: ClipboardPromptMode = ClipboardPromptMode.NO_PROMPT
    metadata: dict = field(default_factory=dict)

    def settings_visible(self, data_class: DataClass) -> bool:
        return self.settings_page_present.get(data_class, True)

    def api(self, name: str) -> Optional[ApiSpec]:
        for spec in self.registry:
            if spec.name == name:
                return spec
        return None

    def uncertain_categories(self) -> frozenset[str]:
        return frozenset(self.metadata.get("uncertain", ()))

    def fixed_categories(self) -> frozenset[str]:
        return frozenset(self.metadata.get("fixed", ()))

    def validate(self) -> None:
        if not self.host_id:
            raise ProfileError("host_id must be non-empty")
        for scope, data_class in self.scope_table.items():
            try:
                validate_scope_id(scope)
            except ValueError as exc:
                raise ProfileError(f"scope_table: {exc}") from exc
            if data_class is DataClass.NONE:
                raise ProfileError(f"scope_table: {scope} maps to 'none'")
        seen: set[str] = set()
        for spec in self.registry:
            if spec.name in seen:
                raise ProfileError(f"registry: duplicate api {spec.name}")
            seen.add(spec.name)
            for label, scope in (
                ("documented_scope", spec.documented_scope),
                ("enforced_scope", spec.enforced_scope),
            ):
                if scope is not None and scope not in self.scope_table:
                    raise ProfileError(
                        f"registry: {spec.name}.{label} {scope!r} "
                        "is not in the scope table"
                    )
        for code in self.uncertain_categories() | self.fixed_categories():
            if code not in _CATEGORY_CODES:
                raise ProfileError(f"metadata: unknown category code {code!r}")

    def to_json_obj(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "host_id": self.host_id,
            "platform": self.platform.value,
            "scope_table": {s: dc.value for s, dc in self.scope_table.items()},
            "registry": [_api_to_obj(a) for a in self.registry],
            "cache_cleared_on_exit": self.cache_cleared_on_exit,
            "settings_page_present": {
                dc.value: flag for dc, flag in self.settings_page_present.items()
            },
            "grant_revocable": self.grant_revocable,
            "grant_deleted_with_mini_program": self.grant_deleted_with_mini_program,
            "identity_data_retained": self.identity_data_retained,
            "denied_scope_reprompts": self.denied_scope_reprompts,
            "webview_bridge_mode": self.webview_bridge_mode.value,
            "vendor_trust_bypass": sorted(self.vendor_trust_bypass),
            "shared_login_groups": [list(g) for g in self.shared_login_groups],
            "clipboard_prompt_mode": self.clipboard_prompt_mode.value,
            "metadata": self.metadata,
        }


def _api_to_obj(spec: ApiSpec) -> dict:
    return {
        "name": spec.name,
        "data_class": spec.data_class.value,
        "documented_scope": spec.documented_scope,
        "enforced_scope": spec.enforced_scope,
        "interaction_gated": spec.interaction_gated,
        "background_capable": spec.background_capable,
        "param_leaks": [
            {
                "param_name": r.param_name,
                "trigger_value": r.trigger_value,
                "requires_user_selection": r.requires_user_selection,
                "released_class": r.released_class.value,
            }
            for r in spec.param_leaks
        ],
        "channels": sorted(c.value for c in spec.channels),
    }


def _api_from_obj(obj: dict, where: str) -> ApiSpec:
    try:
        return ApiSpec(
            name=_expect(obj, "name", str, where),
            data_class=DataClass(_expect(obj, "data_class", str, where)),
            documented_scope=obj.get("documented_scope"),
            enforced_scope=obj.get("enforced_scope"),
            interaction_gated=bool(obj.get("interaction_gated", False)),
            background_capable=bool(obj.get("background_capable", False)),
            param_leaks=tuple(
                ParamLeakRule(
                    param_name=rule["param_name"],
                    trigger_value=rule["trigger_value"],
                    requires_user_selection=bool(rule["requires_user_selection"]),
                    released_class=DataClass(rule["released_class"]),
                )
                for rule in obj.get("param_leaks", ())
            ),
            channels=frozenset(
                Channel(c) for c in obj.get("channels", ["direct"])
            ),
        )
    except (KeyError, ValueError) as exc:
        raise ProfileError(f"{where}: bad api entry: {exc}") from exc


def _expect(obj: dict, key: str, kind: type, where: str) -> Any:
    if key not in obj:
        raise ProfileError(f"{where}: missing required field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise ProfileError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _parse_json(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ProfileError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def profile_from_obj(obj: dict, where: str = "profile") -> HostProfile:
    if not isinstance(obj, dict):
        raise ProfileError(f"{where}: top level must be an object")
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ProfileError(f"{where}: unsupported schema_version {version!r}")
    try:
        scope_table = {
            scope: DataClass(dc)
            for scope, dc in _expect(obj, "scope_table", dict, where).items()
        }
        settings = {
            DataClass(dc): bool(flag)
            for dc, flag in obj.get("settings_page_present", {}).items()
        }
        profile = HostProfile(
            host_id=_expect(obj, "host_id", str, where),
            platform=Platform(_expect(obj, "platform", str, where)),
            scope_table=scope_table,
            registry=tuple(
                _api_from_obj(entry, where)
                for entry in _expect(obj, "registry", list, where)
            ),
            cache_cleared_on_exit=bool(obj.get("cache_cleared_on_exit", True)),
            settings_page_present=settings,
            grant_revocable=bool(obj.get("grant_revocable", True)),
            grant_deleted_with_mini_program=bool(
                obj.get("grant_deleted_with_mini_program", True)
            ),
            identity_data_retained=bool(obj.get("identity_data_retained", False)),
            denied_scope_reprompts=bool(obj.get("denied_scope_reprompts", False)),
            webview_bridge_mode=WebviewBridgeMode(
                obj.get("webview_bridge_mode", "enforce_both")
            ),
            vendor_trust_bypass=frozenset(obj.get("vendor_trust_bypass", ())),
            shared_login_groups=tuple(
                tuple(group) for group in obj.get("shared_login_groups", ())
            ),
            clipboard_prompt_mode=ClipboardPromptMode(
                obj.get("clipboard_prompt_mode", "no_prompt")
            ),
            metadata=obj.get("metadata", {}),
        )
    except ValueError as exc:
        raise ProfileError(f"{where}: {exc}") from exc
    profile.validate()
    return profile


def load_profile(path: Union[str, Path]) -> HostProfile:
    path = Path(path)
    return profile_from_obj(_parse_json(path), where=str(path))


def env_from_obj(obj: dict, where: str = "env") -> OsEnvProfile:
    if not isinstance(obj, dict):
        raise ProfileError(f"{where}: top level must be an object")
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise ProfileError(
            f"{where}: unsupported schema_version {obj.get('schema_version')!r}"
        )
    try:
        return OsEnvProfile(
            name=_expect(obj, "name", str, where),
            clipboard_prompt_mode=ClipboardPromptMode(
                _expect(obj, "clipboard_prompt_mode", str, where)
            ),
            notes=obj.get("notes", ""),
        )
    except ValueError as exc:
        raise ProfileError(f"{where}: {exc}") from exc


def load_env(path: Union[str, Path]) -> OsEnvProfile:
    path = Path(path)
    return env_from_obj(_parse_json(path), where=str(path))


# ----------------------------------------------------------------------
# bundled fixtures


def _profile_files(subdir: str = "profiles") -> list[Path]:
    return sorted((FIXTURES_DIR / subdir).glob("*.json"))


def bundled_profiles() -> list[HostProfile]:
    """All bundled host profiles, sorted by file name.

    (host_id, platform) pairs are unique across the set; the same
    host_id appears once per platform the data distinguishes.
    """
    profiles = [load_profile(p) for p in _profile_files()]
    seen: set[tuple[str, Platform]] = set()
    for profile in profiles:
        key = (profile.host_id, profile.platform)
        if key in seen:
            raise ProfileError(f"duplicate bundled profile {key}")
        seen.add(key)
    return profiles


def bundled_profile(host_id: str, platform=Platform.ANDROID) -> HostProfile:
    platform = Platform(platform)
    for profile in bundled_profiles():
        if profile.host_id == host_id and profile.platform == platform:
            return profile
    raise ProfileError(f"no bundled profile for {host_id!r} on {platform.value}")


def bundled_registry(host_id: str) -> tuple[ApiSpec, ...]:
    """The API registry of a bundled host (Android flavor is canonical)."""
    for platform in (Platform.ANDROID, Platform.IOS):
        try:
            return bundled_profile(host_id, platform).registry
        except ProfileError:
            continue
    raise ProfileError(f"no bundled registry for {host_id!r}")


def bundled_patched_profiles() -> list[HostProfile]:
    return [load_profile(p) for p in _profile_files("profiles/patched")]


def bundled_patched_profile(host_id: str, platform=Platform.ANDROID) -> HostProfile:
    platform = Platform(platform)
    for profile in bundled_patched_profiles():
        if profile.host_id == host_id and profile.platform == platform:
            return profile
    raise ProfileError(f"no patched profile for {host_id!r} on {platform.value}")


def bundled_envs() -> dict[str, OsEnvProfile]:
    envs = [load_env(p) for p in _profile_files("envs")]
    return {env.name: env for env in envs}


def bundled_env(name: str) -> OsEnvProfile:
    envs = bundled_envs()
    if name not in envs:
        raise ProfileError(f"no bundled env named {name!r}")
    return envs[name]
