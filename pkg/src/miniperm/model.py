"""Two-layer permission state machine for mini-programs inside a host app.

A ``World`` tracks one host app's OS-level permission grants plus the
per-mini-program scope grants, and appends every observable effect
(prompts, data releases, lifecycle transitions, cache activity) to an
event trace.  All user decisions are explicit inputs, so replaying the
same operations produces a byte-identical trace.

The resolution rules for an API call, in order:

1. control APIs (``data_class == none``) release nothing;
2. a webview channel applies the profile's bridge rule before any
   layer is consulted;
3. parameter-triggered leak rules release their data class even when
   the scope grant is denied (they beat scope enforcement);
4. an enforced scope releases only when the host-layer grant and the
   OS-layer grant are both granted;
5. an interaction-gated API releases on an explicit user interaction;
6. a background-capable API without an enforced scope releases
   whenever the OS layer allows, regardless of the host layer.

The OS layer gates only data classes the OS exposes as user-grantable
runtime permissions.  Clipboard contents and host-account identity data
have no OS grant: the clipboard is readable by any foreground app on a
stock environment (see ``World.read_clipboard`` for the prompt-mode
differences between environments), and identity data lives inside the
host account.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Optional


class DataClass(str, Enum):
    LOCATION = "location"
    CONTACTS = "contacts"
    CLIPBOARD = "clipboard"
    ALBUM = "album"
    CAMERA = "camera"
    MICROPHONE = "microphone"
    STORAGE = "storage"
    IDENTITY = "identity"
    NONE = "none"


# Classes the OS gates behind a user-grantable runtime permission.
# Clipboard and identity never consult the OS grant table (see module
# docstring); "none" marks control APIs that release nothing.
OS_RUNTIME_CLASSES = frozenset(
    {
        DataClass.LOCATION,
        DataClass.CONTACTS,
        DataClass.ALBUM,
        DataClass.CAMERA,
        DataClass.MICROPHONE,
        DataClass.STORAGE,
    }
)


class GrantStatus(str, Enum):
    UNSET = "unset"
    GRANTED = "granted"
    DENIED = "denied"


class Layer(str, Enum):
    HOST = "host"
    OS = "os"


class Channel(str, Enum):
    DIRECT = "direct"
    WEBVIEW = "webview"


class UserChoice(str, Enum):
    ALLOW = "allow"
    DENY = "deny"


class CasePath(str, Enum):
    BOTH_ALLOW = "both_allow"
    HOST_REJECT_OS_ALLOW = "host_reject_os_allow"
    OS_REJECT = "os_reject"
    NO_SCOPE_REQUIRED = "no_scope_required"
    PARAM_LEAK = "param_leak"
    WEBVIEW_BYPASS = "webview_bypass"


class EventKind(str, Enum):
    PROMPT_SHOWN = "PromptShown"
    PROMPT_ANSWERED = "PromptAnswered"
    API_CALLED = "ApiCalled"
    DATA_RELEASED = "DataReleased"
    FILE_CACHED = "FileCached"
    FILE_REUSED = "FileReused"
    CLOSED = "Closed"
    REOPENED = "Reopened"
    DELETED = "Deleted"
    GRANT_CHANGED = "GrantChanged"
    SETTINGS_OPENED = "SettingsOpened"


class WebviewBridgeMode(str, Enum):
    ENFORCE_BOTH = "enforce_both"
    HOST_LAYER_IGNORED = "host_layer_ignored"
    BOTH_LAYERS_IGNORED = "both_layers_ignored"


class ClipboardPromptMode(str, Enum):
    NO_PROMPT = "no_prompt"
    TOAST = "toast"
    BLOCKING_PROMPT = "blocking_prompt"
    BLOCKING_PROMPT_LEAKY = "blocking_prompt_leaky"


# Protection strength, used to combine a host app's clipboard prompting
# with the environment's.  A leaky blocking prompt blocks the UI but
# releases the data before the answer, so it sits below a real one.
_CLIPBOARD_STRICTNESS = {
    ClipboardPromptMode.NO_PROMPT: 0,
    ClipboardPromptMode.TOAST: 1,
    ClipboardPromptMode.BLOCKING_PROMPT_LEAKY: 2,
    ClipboardPromptMode.BLOCKING_PROMPT: 3,
}


class ModelError(Exception):
    """Base class for permission-model violations."""


class UnknownMiniProgramError(ModelError):
    pass


class DuplicateMiniProgramError(ModelError):
    pass


class MiniProgramDeletedError(ModelError):
    pass


class LifecycleError(ModelError):
    """Open/close operation applied in the wrong state."""


class UnknownScopeError(ModelError):
    pass


class UnknownApiError(ModelError):
    pass


class ChannelNotSupportedError(ModelError):
    pass


class NoSuchGrantError(ModelError):
    pass


class SettingsUnavailableError(ModelError):
    """No settings entry exposes this grant, so it cannot be revoked."""


class RevocationIneffectiveError(ModelError):
    """The settings toggle exists but flipping it does not cut access."""


class InvalidOsGrantError(ModelError):
    pass


def validate_scope_id(scope: str) -> str:
    """Scope ids are dotted, non-empty, whitespace-free strings."""
    if not isinstance(scope, str) or not scope:
        raise ValueError("scope id must be a non-empty string")
    if "." not in scope:
        raise ValueError(f"scope id {scope!r} must contain a '.'")
    if any(ch.isspace() for ch in scope):
        raise ValueError(f"scope id {scope!r} must not contain whitespace")
    return scope


@dataclass(frozen=True)
class ParamLeakRule:
    """A call-argument pattern that releases data outside scope checks."""

    param_name: str
    trigger_value: Any
    requires_user_selection: bool
    released_class: DataClass

    def __post_init__(self) -> None:
        if not self.param_name:
            raise ValueError("param_name must be non-empty")
        if self.released_class is DataClass.NONE:
            raise ValueError("a leak rule must name a real data class")


@dataclass(frozen=True)
class ApiSpec:
    """One registered API of a host's mini-program framework."""

    name: str
    data_class: DataClass
    documented_scope: Optional[str] = None
    enforced_scope: Optional[str] = None
    interaction_gated: bool = False
    background_capable: bool = False
    param_leaks: tuple[ParamLeakRule, ...] = ()
    channels: frozenset[Channel] = frozenset({Channel.DIRECT})

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("api name must be non-empty")
        if self.interaction_gated and self.background_capable:
            raise ValueError(
                f"{self.name}: interaction_gated and background_capable are exclusive"
            )
        for scope in (self.documented_scope, self.enforced_scope):
            if scope is not None:
                validate_scope_id(scope)
        if self.data_class is DataClass.NONE:
            if self.documented_scope or self.enforced_scope or self.param_leaks:
                raise ValueError(
                    f"{self.name}: a control API cannot carry scopes or leak rules"
                )
        if not self.channels:
            raise ValueError(f"{self.name}: at least one channel required")


@dataclass
class GrantState:
    """Host-layer grant for one (mini-program, scope) pair."""

    state: GrantStatus = GrantStatus.UNSET
    recorded_at: Optional[int] = None  # trace seq; present iff state != unset
    visible_in_settings: bool = True


@dataclass
class OsGrant:
    """OS-layer grant of one permission class to the host app."""

    permission_class: DataClass
    state: GrantStatus = GrantStatus.UNSET


@dataclass
class MiniProgram:
    id: str
    vendor: str = ""
    deleted: bool = False
    open: bool = True


# Field order used when serializing event payloads, so traces are stable.
_PAYLOAD_KEY_ORDER = (
    "mini_program",
    "vendor",
    "layer",
    "scope",
    "api",
    "data_class",
    "channel",
    "env",
    "user_choice",
    "blocking",
    "path",
    "old",
    "new",
    "route",
    "os_state",
    "host_state",
    "call_seq",
    "args",
)


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: EventKind
    payload: dict

    def to_json_obj(self) -> dict:
        obj: dict = {"seq": self.seq, "kind": self.kind.value}
        for key in _PAYLOAD_KEY_ORDER:
            if key in self.payload:
                obj[key] = _plain(self.payload[key])
        for key in sorted(self.payload):
            if key not in _PAYLOAD_KEY_ORDER:
                obj[key] = _plain(self.payload[key])
        return obj


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {k: _plain(value[k]) for k in value}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


@dataclass
class CallOutcome:
    """Result handed back to the mini-program for one operation.

    A refusal is not an exception: the framework invokes the fail
    callback, modeled here as ``released is None`` plus ``fail_reason``.
    """

    case_path: CasePath
    released: Optional[DataClass] = None
    prompts_shown: list[tuple[Layer, str]] = field(default_factory=list)
    new_events: list[TraceEvent] = field(default_factory=list)
    fail_reason: Optional[str] = None


class World:
    """Deterministic, single-threaded state of one host app install."""

    def __init__(
        self,
        profile,
        os_grants: Optional[Mapping[Any, Any]] = None,
    ) -> None:
        self.profile = profile
        self.os_grants: dict[DataClass, OsGrant] = {
            dc: OsGrant(dc) for dc in DataClass if dc is not DataClass.NONE
        }
        for raw_class, raw_state in (os_grants or {}).items():
            dc = DataClass(raw_class)
            if dc is DataClass.NONE:
                raise InvalidOsGrantError("'none' is not a grantable permission class")
            self.os_grants[dc].state = GrantStatus(raw_state)
        self.mini_programs: dict[str, MiniProgram] = {}
        self.grants: dict[tuple[str, str], GrantState] = {}
        self.retained_identity_data: dict[str, set[DataClass]] = {}
        self.cache: dict[str, set[str]] = {}
        self.trace: list[TraceEvent] = []
        self.account_epoch: int = 0
        self._api_index: dict[str, ApiSpec] = {a.name: a for a in profile.registry}

    # ------------------------------------------------------------------
    # helpers

    def _emit(self, kind: EventKind, **payload: Any) -> TraceEvent:
        event = TraceEvent(seq=len(self.trace) + 1, kind=kind, payload=payload)
        self.trace.append(event)
        return event

    def _require(self, mini_program: str) -> MiniProgram:
        mp = self.mini_programs.get(mini_program)
        if mp is None:
            raise UnknownMiniProgramError(f"unknown mini-program {mini_program!r}")
        return mp

    def _require_open(self, mini_program: str) -> MiniProgram:
        mp = self._require(mini_program)
        if mp.deleted:
            raise MiniProgramDeletedError(f"{mini_program!r} has been deleted")
        if not mp.open:
            raise LifecycleError(f"{mini_program!r} is not open")
        return mp

    def _os_state(self, data_class: DataClass) -> GrantStatus:
        return self.os_grants[data_class].state

    def _os_allows(self, data_class: DataClass) -> bool:
        # Ungated classes never consult the OS table; for gated ones an
        # unset grant at call time means the host does not hold it.
        if data_class not in OS_RUNTIME_CLASSES:
            return True
        return self._os_state(data_class) is GrantStatus.GRANTED

    def _os_denies(self, data_class: DataClass) -> bool:
        return (
            data_class in OS_RUNTIME_CLASSES
            and self._os_state(data_class) is GrantStatus.DENIED
        )

    def _os_state_label(self, data_class: DataClass) -> str:
        if data_class not in OS_RUNTIME_CLASSES:
            return "ungated"
        return self._os_state(data_class).value

    def grant_status(self, mini_program: str, scope: str) -> GrantStatus:
        grant = self.grants.get((mini_program, scope))
        return grant.state if grant else GrantStatus.UNSET

    def _set_grant(
        self, mp: MiniProgram, scope: str, state: GrantStatus, data_class: DataClass
    ) -> TraceEvent:
        key = (mp.id, scope)
        grant = self.grants.get(key)
        old = grant.state if grant else GrantStatus.UNSET
        event = self._emit(
            EventKind.GRANT_CHANGED,
            mini_program=mp.id,
            layer=Layer.HOST,
            scope=scope,
            old=old,
            new=state,
        )
        if grant is None:
            # The settings entry is created when the grant is first
            # recorded, whether the user allowed or denied.
            grant = GrantState(
                visible_in_settings=self.profile.settings_visible(data_class)
            )
            self.grants[key] = grant
        grant.state = state
        grant.recorded_at = event.seq if state is not GrantStatus.UNSET else None
        return event

    def _shared_login_partner(self, mp: MiniProgram) -> Optional[str]:
        """Another group member that already holds identity data, if any."""
        for group in self.profile.shared_login_groups:
            if mp.id not in group:
                continue
            for other_id in group:
                if other_id == mp.id or other_id not in self.mini_programs:
                    continue
                if self.retained_identity_data.get(other_id):
                    return other_id
                for (holder, scope), grant in self.grants.items():
                    if (
                        holder == other_id
                        and grant.state is GrantStatus.GRANTED
                        and self.profile.scope_table.get(scope) is DataClass.IDENTITY
                    ):
                        return other_id
        return None

    # ------------------------------------------------------------------
    # setup operations

    def register_mini_program(self, mini_program: str, vendor: str = "") -> MiniProgram:
        if mini_program in self.mini_programs:
            raise DuplicateMiniProgramError(f"{mini_program!r} already registered")
        mp = MiniProgram(id=mini_program, vendor=vendor)
        self.mini_programs[mini_program] = mp
        return mp

    def set_os_grant(self, data_class, state) -> TraceEvent:
        dc = DataClass(data_class)
        if dc is DataClass.NONE:
            raise InvalidOsGrantError("'none' is not a grantable permission class")
        new = GrantStatus(state)
        old = self.os_grants[dc].state
        self.os_grants[dc].state = new
        return self._emit(
            EventKind.GRANT_CHANGED, layer=Layer.OS, data_class=dc, old=old, new=new
        )

    # ------------------------------------------------------------------
    # authorization flow

    def request_scope(
        self,
        mini_program: str,
        scope: str,
        user_host_choice,
        user_os_choice=UserChoice.ALLOW,
    ) -> CallOutcome:
        """Run the host-layer (and, if needed, OS-layer) prompt flow.

        Three resolutions are possible: both layers allow; the host
        layer refuses (the API's fail callback fires, the OS is never
        consulted for this request); or the OS layer refuses (the host
        prompt is skipped entirely when the OS grant is already denied).
        """
        mp = self._require_open(mini_program)
        if scope not in self.profile.scope_table:
            raise UnknownScopeError(f"scope {scope!r} not in the host scope table")
        host_choice = UserChoice(user_host_choice)
        os_choice = UserChoice(user_os_choice)
        data_class = self.profile.scope_table[scope]
        start = len(self.trace)

        if self._os_denies(data_class):
            # Nothing to ask: the host app itself lacks the permission.
            return CallOutcome(CasePath.OS_REJECT, fail_reason="os_denied")

        current = self.grant_status(mp.id, scope)
        if current is GrantStatus.GRANTED:
            return CallOutcome(CasePath.BOTH_ALLOW)
        if current is GrantStatus.DENIED and not self.profile.denied_scope_reprompts:
            # A recorded refusal is sticky until revoked in settings.
            return CallOutcome(
                CasePath.HOST_REJECT_OS_ALLOW, fail_reason="scope_denied"
            )

        prompts: list[tuple[Layer, str]] = [(Layer.HOST, scope)]
        self._emit(
            EventKind.PROMPT_SHOWN,
            mini_program=mp.id,
            layer=Layer.HOST,
            scope=scope,
            blocking=True,
        )
        self._emit(
            EventKind.PROMPT_ANSWERED,
            mini_program=mp.id,
            layer=Layer.HOST,
            scope=scope,
            user_choice=host_choice,
        )
        if host_choice is UserChoice.DENY:
            self._set_grant(mp, scope, GrantStatus.DENIED, data_class)
            return CallOutcome(
                CasePath.HOST_REJECT_OS_ALLOW,
                prompts_shown=prompts,
                new_events=self.trace[start:],
                fail_reason="scope_denied",
            )

        # The host records the grant either way; if the OS then refuses,
        # the setting still exists but the data stays blocked.
        self._set_grant(mp, scope, GrantStatus.GRANTED, data_class)
        if (
            data_class in OS_RUNTIME_CLASSES
            and self._os_state(data_class) is GrantStatus.UNSET
        ):
            prompts.append((Layer.OS, scope))
            self._emit(
                EventKind.PROMPT_SHOWN,
                mini_program=mp.id,
                layer=Layer.OS,
                scope=scope,
                data_class=data_class,
                blocking=True,
            )
            self._emit(
                EventKind.PROMPT_ANSWERED,
                mini_program=mp.id,
                layer=Layer.OS,
                scope=scope,
                user_choice=os_choice,
            )
            if os_choice is UserChoice.DENY:
                self.os_grants[data_class].state = GrantStatus.DENIED
                self._emit(
                    EventKind.GRANT_CHANGED,
                    layer=Layer.OS,
                    data_class=data_class,
                    old=GrantStatus.UNSET,
                    new=GrantStatus.DENIED,
                )
                return CallOutcome(
                    CasePath.OS_REJECT,
                    prompts_shown=prompts,
                    new_events=self.trace[start:],
                    fail_reason="os_denied",
                )
            self.os_grants[data_class].state = GrantStatus.GRANTED
            self._emit(
                EventKind.GRANT_CHANGED,
                layer=Layer.OS,
                data_class=data_class,
                old=GrantStatus.UNSET,
                new=GrantStatus.GRANTED,
            )
        return CallOutcome(
            CasePath.BOTH_ALLOW,
            prompts_shown=prompts,
            new_events=self.trace[start:],
        )

    # ------------------------------------------------------------------
    # API calls

    def call_api(
        self,
        mini_program: str,
        api: str,
        args: Optional[Mapping[str, Any]] = None,
        channel=Channel.DIRECT,
        interaction: Optional[Mapping[str, Any]] = None,
    ) -> CallOutcome:
        mp = self._require_open(mini_program)
        spec = self._api_index.get(api)
        if spec is None:
            raise UnknownApiError(f"api {api!r} not registered for this host")
        chan = Channel(channel)
        if chan not in spec.channels:
            raise ChannelNotSupportedError(f"{api} is not callable over {chan.value}")
        call_args = {k: (args or {})[k] for k in sorted(args or {})}
        start = len(self.trace)
        call_event = self._emit(
            EventKind.API_CALLED,
            mini_program=mp.id,
            vendor=mp.vendor,
            api=spec.name,
            channel=chan,
            args=call_args,
        )

        def release(data_class: DataClass, case: CasePath) -> CallOutcome:
            host_state = "no_scope"
            if spec.enforced_scope is not None:
                host_state = self.grant_status(mp.id, spec.enforced_scope).value
            self._emit(
                EventKind.DATA_RELEASED,
                mini_program=mp.id,
                vendor=mp.vendor,
                api=spec.name,
                data_class=data_class,
                channel=chan,
                scope=spec.enforced_scope,
                route=case,
                os_state=self._os_state_label(data_class),
                host_state=host_state,
                call_seq=call_event.seq,
            )
            if data_class is DataClass.IDENTITY:
                self.retained_identity_data.setdefault(mp.id, set()).add(data_class)
            return CallOutcome(case, released=data_class, new_events=self.trace[start:])

        def refuse(case: CasePath, reason: str) -> CallOutcome:
            return CallOutcome(
                case, new_events=self.trace[start:], fail_reason=reason
            )

        if spec.data_class is DataClass.NONE:
            return CallOutcome(
                CasePath.NO_SCOPE_REQUIRED, new_events=self.trace[start:]
            )

        if chan is Channel.WEBVIEW:
            mode = self.profile.webview_bridge_mode
            if mode is WebviewBridgeMode.BOTH_LAYERS_IGNORED:
                return release(spec.data_class, CasePath.WEBVIEW_BYPASS)
            if mode is WebviewBridgeMode.HOST_LAYER_IGNORED:
                if self._os_allows(spec.data_class):
                    return release(spec.data_class, CasePath.WEBVIEW_BYPASS)
                return refuse(CasePath.OS_REJECT, "os_denied")
            # enforce_both: fall through to the direct-channel rules.

        # Parameter-triggered leaks beat scope enforcement.
        for rule in spec.param_leaks:
            if call_args.get(rule.param_name) != rule.trigger_value:
                continue
            if rule.requires_user_selection and interaction is None:
                continue
            if self._os_allows(rule.released_class):
                return release(rule.released_class, CasePath.PARAM_LEAK)

        if spec.enforced_scope is not None:
            if self._os_denies(spec.data_class):
                return refuse(CasePath.OS_REJECT, "os_denied")
            host = self.grant_status(mp.id, spec.enforced_scope)
            if host is GrantStatus.GRANTED:
                if self._os_allows(spec.data_class):
                    return release(spec.data_class, CasePath.BOTH_ALLOW)
                return refuse(CasePath.OS_REJECT, "os_not_held")
            if host is GrantStatus.UNSET and self._os_allows(spec.data_class):
                # Host-side bypasses only skip the *asking*; an explicit
                # refusal recorded by the user stays effective.
                if mp.vendor and mp.vendor in self.profile.vendor_trust_bypass:
                    return release(spec.data_class, CasePath.HOST_REJECT_OS_ALLOW)
                if (
                    spec.data_class is DataClass.IDENTITY
                    and self._shared_login_partner(mp) is not None
                ):
                    return release(spec.data_class, CasePath.HOST_REJECT_OS_ALLOW)
            return refuse(CasePath.HOST_REJECT_OS_ALLOW, "scope_not_granted")

        if spec.interaction_gated:
            if interaction is None:
                return refuse(CasePath.NO_SCOPE_REQUIRED, "interaction_required")
            if self._os_allows(spec.data_class):
                return release(spec.data_class, CasePath.NO_SCOPE_REQUIRED)
            return refuse(CasePath.OS_REJECT, "os_denied")

        if spec.background_capable:
            if self._os_allows(spec.data_class):
                # No scope stands between the call and the data: the
                # host layer is never consulted.
                return release(spec.data_class, CasePath.HOST_REJECT_OS_ALLOW)
            return refuse(CasePath.OS_REJECT, "os_denied")

        return refuse(CasePath.NO_SCOPE_REQUIRED, "no_release_path")

    # ------------------------------------------------------------------
    # settings and lifecycle

    def revoke_scope(self, mini_program: str, scope: str) -> GrantState:
        mp = self._require(mini_program)
        if scope not in self.profile.scope_table:
            raise UnknownScopeError(f"scope {scope!r} not in the host scope table")
        grant = self.grants.get((mp.id, scope))
        if grant is None or grant.state is GrantStatus.UNSET:
            raise NoSuchGrantError(f"no recorded grant for {mini_program!r}/{scope}")
        data_class = self.profile.scope_table[scope]
        if not self.profile.settings_visible(data_class) or not grant.visible_in_settings:
            raise SettingsUnavailableError(
                f"no settings entry exposes {scope} for {mini_program!r}"
            )
        if not self.profile.grant_revocable:
            raise RevocationIneffectiveError(
                f"revoking {scope} does not cut access on this host"
            )
        self._emit(EventKind.SETTINGS_OPENED, mini_program=mp.id)
        self._set_grant(mp, scope, GrantStatus.DENIED, data_class)
        return grant

    def close_mini_program(self, mini_program: str) -> "World":
        mp = self._require(mini_program)
        if mp.deleted:
            raise MiniProgramDeletedError(f"{mini_program!r} has been deleted")
        if not mp.open:
            raise LifecycleError(f"{mini_program!r} is already closed")
        mp.open = False
        self._emit(EventKind.CLOSED, mini_program=mp.id)
        if self.profile.cache_cleared_on_exit:
            self.cache.pop(mp.id, None)
        return self

    def reopen_mini_program(self, mini_program: str) -> "World":
        mp = self._require(mini_program)
        if mp.deleted:
            raise MiniProgramDeletedError(f"cannot reopen deleted {mini_program!r}")
        if mp.open:
            raise LifecycleError(f"{mini_program!r} is already open")
        mp.open = True
        self._emit(EventKind.REOPENED, mini_program=mp.id)
        return self

    def delete_mini_program(self, mini_program: str) -> "World":
        mp = self._require(mini_program)
        if mp.deleted:
            raise MiniProgramDeletedError(f"{mini_program!r} is already deleted")
        mp.deleted = True
        mp.open = False
        self._emit(EventKind.DELETED, mini_program=mp.id)
        if self.profile.grant_deleted_with_mini_program:
            for key in [k for k in self.grants if k[0] == mp.id]:
                del self.grants[key]
        if not self.profile.identity_data_retained:
            self.retained_identity_data.pop(mp.id, None)
        self.cache.pop(mp.id, None)
        return self

    def switch_account(self) -> "World":
        """New login: every host-layer grant resets to unset."""
        self.account_epoch += 1
        for (mp_id, scope), grant in list(self.grants.items()):
            if grant.state is not GrantStatus.UNSET:
                self._emit(
                    EventKind.GRANT_CHANGED,
                    mini_program=mp_id,
                    layer=Layer.HOST,
                    scope=scope,
                    old=grant.state,
                    new=GrantStatus.UNSET,
                )
        self.grants.clear()
        return self

    # ------------------------------------------------------------------
    # cache

    def cache_file(self, mini_program: str, path: str) -> TraceEvent:
        mp = self._require_open(mini_program)
        self.cache.setdefault(mp.id, set()).add(path)
        return self._emit(EventKind.FILE_CACHED, mini_program=mp.id, path=path)

    def access_cache(self, mini_program: str, path: str) -> bool:
        """True (and a reuse event) if the cached path is still readable."""
        mp = self._require_open(mini_program)
        if path in self.cache.get(mp.id, ()):
            self._emit(EventKind.FILE_REUSED, mini_program=mp.id, path=path)
            return True
        return False

    # ------------------------------------------------------------------
    # clipboard

    def read_clipboard(
        self, mini_program: str, env, user_choice=UserChoice.ALLOW
    ) -> CallOutcome:
        """Read the clipboard under a given OS environment.

        The effective prompting is whichever of the host app's and the
        environment's clipboard modes protects more.  A blocking prompt
        holds the data until the user answers; its leaky variant shows
        the same prompt but releases the data before the answer.
        """
        mp = self._require_open(mini_program)
        spec = next(
            (a for a in self.profile.registry if a.data_class is DataClass.CLIPBOARD),
            None,
        )
        if spec is None:
            raise UnknownApiError("no clipboard read API registered for this host")
        choice = UserChoice(user_choice)
        host_mode = self.profile.clipboard_prompt_mode
        env_mode = env.clipboard_prompt_mode
        if _CLIPBOARD_STRICTNESS[env_mode] >= _CLIPBOARD_STRICTNESS[host_mode]:
            mode, layer = env_mode, Layer.OS
        else:
            mode, layer = host_mode, Layer.HOST
        start = len(self.trace)
        call_event = self._emit(
            EventKind.API_CALLED,
            mini_program=mp.id,
            vendor=mp.vendor,
            api=spec.name,
            channel=Channel.DIRECT,
            env=env.name,
            args={},
        )

        def release() -> None:
            self._emit(
                EventKind.DATA_RELEASED,
                mini_program=mp.id,
                vendor=mp.vendor,
                api=spec.name,
                data_class=DataClass.CLIPBOARD,
                channel=Channel.DIRECT,
                env=env.name,
                route=CasePath.NO_SCOPE_REQUIRED,
                os_state="ungated",
                host_state="no_scope",
                call_seq=call_event.seq,
            )

        def prompt(blocking: bool) -> None:
            self._emit(
                EventKind.PROMPT_SHOWN,
                mini_program=mp.id,
                layer=layer,
                api=spec.name,
                data_class=DataClass.CLIPBOARD,
                env=env.name,
                blocking=blocking,
                call_seq=call_event.seq,
            )

        def answer() -> None:
            self._emit(
                EventKind.PROMPT_ANSWERED,
                mini_program=mp.id,
                layer=layer,
                api=spec.name,
                data_class=DataClass.CLIPBOARD,
                env=env.name,
                user_choice=choice,
                call_seq=call_event.seq,
            )

        prompts = [] if mode is ClipboardPromptMode.NO_PROMPT else [(layer, spec.name)]
        if mode is ClipboardPromptMode.NO_PROMPT:
            release()
        elif mode is ClipboardPromptMode.TOAST:
            prompt(blocking=False)  # informs but cannot block
            release()
        elif mode is ClipboardPromptMode.BLOCKING_PROMPT:
            prompt(blocking=True)
            answer()
            if choice is UserChoice.DENY:
                case = (
                    CasePath.OS_REJECT
                    if layer is Layer.OS
                    else CasePath.HOST_REJECT_OS_ALLOW
                )
                return CallOutcome(
                    case,
                    prompts_shown=prompts,
                    new_events=self.trace[start:],
                    fail_reason="clipboard_denied",
                )
            release()
        else:  # blocking_prompt_leaky: the data is out before the answer
            prompt(blocking=True)
            release()
            answer()
        return CallOutcome(
            CasePath.NO_SCOPE_REQUIRED,
            released=DataClass.CLIPBOARD,
            prompts_shown=prompts,
            new_events=self.trace[start:],
        )

    # ------------------------------------------------------------------
    # trace output

    def trace_json_lines(self) -> str:
        return "".join(json.dumps(e.to_json_obj()) + "\n" for e in self.trace)


def new_world(profile, os_grants: Optional[Mapping[Any, Any]] = None) -> World:
    return World(profile, os_grants=os_grants)


def replay_events(events: Iterable[TraceEvent]) -> str:
    """Serialize any event sequence the same way ``trace_json_lines`` does."""
    return "".join(json.dumps(e.to_json_obj()) + "\n" for e in events)
