"""Scripted interaction sequences against a :class:`World`.

A scenario file is either a bare JSON array of steps or an object::

    {
      "name": "cache-reuse",
      "hosts": ["wechat"],          // host ids it applies to ([] = any)
      "platforms": ["android"],     // platforms it applies to ([] = any)
      "covers": ["V1"],             // categories the scenario exercises
      "os_grants": {"location": "granted"},
      "steps": [ {"op": ...}, ... ]
    }

Each step names a world operation in ``op`` plus its arguments.  A step
may carry ``expect_error`` with the name of the error it must raise;
the run fails if that step succeeds or raises something else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

from .model import (
    CallOutcome,
    Channel,
    DataClass,
    GrantStatus,
    ModelError,
    UserChoice,
    World,
)
from .profiles import FIXTURES_DIR, HostProfile, OsEnvProfile, bundled_env


class ScenarioError(Exception):
    """A step could not run or did not behave as the file said."""

    def __init__(self, message: str, step: Optional[int] = None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class Scenario:
    name: str
    steps: tuple[dict, ...]
    covers: tuple[str, ...] = ()
    hosts: tuple[str, ...] = ()
    platforms: tuple[str, ...] = ()
    os_grants: dict = field(default_factory=dict)

    def applies_to(self, profile: HostProfile) -> bool:
        if self.hosts and profile.host_id not in self.hosts:
            return False
        if self.platforms and profile.platform.value not in self.platforms:
            return False
        return True

    def needs_env(self) -> bool:
        return any(step.get("op") == "read_clipboard" for step in self.steps)

    def to_json_obj(self) -> dict:
        obj: dict = {"name": self.name}
        if self.hosts:
            obj["hosts"] = list(self.hosts)
        if self.platforms:
            obj["platforms"] = list(self.platforms)
        obj["covers"] = list(self.covers)
        if self.os_grants:
            obj["os_grants"] = dict(self.os_grants)
        obj["steps"] = [dict(s) for s in self.steps]
        return obj


@dataclass
class StepResult:
    index: int
    op: str
    outcome: Optional[CallOutcome] = None
    value: Any = None
    error: Optional[str] = None  # class name of an expected error


def scenario_from_obj(obj: Any, name: str = "scenario") -> Scenario:
    if isinstance(obj, list):
        return Scenario(name=name, steps=tuple(dict(s) for s in obj))
    if not isinstance(obj, dict):
        raise ScenarioError("scenario must be a JSON array or object")
    steps = obj.get("steps")
    if not isinstance(steps, list):
        raise ScenarioError("scenario object needs a 'steps' array")
    return Scenario(
        name=str(obj.get("name", name)),
        steps=tuple(dict(s) for s in steps),
        covers=tuple(obj.get("covers", ())),
        hosts=tuple(obj.get("hosts", ())),
        platforms=tuple(obj.get("platforms", ())),
        os_grants=dict(obj.get("os_grants", {})),
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}")
    return scenario_from_obj(obj, name=path.stem)


def bundled_scenarios() -> list[Scenario]:
    files = sorted((FIXTURES_DIR / "scenarios").glob("*.json"))
    return [load_scenario(p) for p in files]


def bundled_scenario(name: str) -> Scenario:
    path = FIXTURES_DIR / "scenarios" / f"{name}.json"
    if not path.is_file():
        known = ", ".join(p.stem for p in sorted((FIXTURES_DIR / "scenarios").glob("*.json")))
        raise ScenarioError(f"no bundled scenario {name!r} (have: {known})")
    return load_scenario(path)


def _error_matches(exc: ModelError, wanted: str) -> bool:
    actual = type(exc).__name__
    return actual == wanted or actual == wanted + "Error"


def _user(step: dict) -> dict:
    user = step.get("user", {})
    if not isinstance(user, dict):
        raise ValueError("'user' must be an object")
    return user


def run_scenario(
    scenario: Scenario,
    profile: HostProfile,
    *,
    env: Optional[OsEnvProfile] = None,
    world: Optional[World] = None,
) -> tuple[World, list[StepResult]]:
    """Execute every step; returns the world and per-step results.

    ``env`` is the OS environment used by ``read_clipboard`` steps that
    do not name one themselves.
    """
    if world is None:
        grants = {DataClass(k): GrantStatus(v) for k, v in scenario.os_grants.items()}
        world = World(profile, os_grants=grants)
    results: list[StepResult] = []
    for index, step in enumerate(scenario.steps):
        op = step.get("op")
        if not isinstance(op, str):
            raise ScenarioError("missing 'op'", index)
        expect = step.get("expect_error")
        try:
            result = _run_step(world, op, step, env, index)
        except ModelError as exc:
            if expect and _error_matches(exc, expect):
                results.append(StepResult(index, op, error=type(exc).__name__))
                continue
            raise ScenarioError(f"{op}: {exc}", index)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"{op}: bad step arguments ({exc})", index)
        if expect:
            raise ScenarioError(f"{op}: expected {expect}, but the step succeeded", index)
        result.index = index
        results.append(result)
    return world, results


def _run_step(
    world: World, op: str, step: dict, env: Optional[OsEnvProfile], index: int
) -> StepResult:
    if op == "register_mini_program":
        world.register_mini_program(step["mini_program"], vendor=step.get("vendor", ""))
        return StepResult(index, op)
    if op == "set_os_grant":
        world.set_os_grant(DataClass(step["data_class"]), GrantStatus(step["state"]))
        return StepResult(index, op)
    if op == "request_scope":
        user = _user(step)
        outcome = world.request_scope(
            step["mini_program"],
            step["scope"],
            UserChoice(user.get("host", "allow")),
            UserChoice(user.get("os", "allow")),
        )
        return StepResult(index, op, outcome=outcome)
    if op == "call_api":
        return StepResult(index, op, outcome=_call_api_step(world, step))
    if op == "read_clipboard":
        step_env = env
        if "env" in step:
            step_env = bundled_env(step["env"])
        if step_env is None:
            raise ScenarioError("read_clipboard needs an OS environment", index)
        user = _user(step)
        outcome = world.read_clipboard(
            step["mini_program"], step_env, UserChoice(user.get("choice", "allow"))
        )
        return StepResult(index, op, outcome=outcome)
    if op == "revoke_scope":
        world.revoke_scope(step["mini_program"], step["scope"])
        return StepResult(index, op)
    if op == "close_mini_program":
        world.close_mini_program(step["mini_program"])
        return StepResult(index, op)
    if op == "reopen_mini_program":
        world.reopen_mini_program(step["mini_program"])
        return StepResult(index, op)
    if op == "delete_mini_program":
        world.delete_mini_program(step["mini_program"])
        return StepResult(index, op)
    if op == "switch_account":
        world.switch_account()
        return StepResult(index, op)
    if op == "cache_file":
        world.cache_file(step["mini_program"], step["path"])
        return StepResult(index, op)
    if op == "access_cache":
        hit = world.access_cache(step["mini_program"], step["path"])
        return StepResult(index, op, value=hit)
    raise ScenarioError(f"unknown op {op!r}", index)


def _call_api_step(world: World, step: dict) -> CallOutcome:
    mp = step["mini_program"]
    api = step["api"]
    spec = world.profile.api(api)
    user = step.get("user")
    # Convenience: a call step carrying user choices runs the grant
    # flow first when the API's scope was never asked about.
    if (
        user
        and spec is not None
        and spec.enforced_scope is not None
        and world.grant_status(mp, spec.enforced_scope) is GrantStatus.UNSET
    ):
        world.request_scope(
            mp,
            spec.enforced_scope,
            UserChoice(user.get("host", "allow")),
            UserChoice(user.get("os", "allow")),
        )
    interaction = step.get("interaction")
    if interaction is True:
        interaction = {}
    return world.call_api(
        mp,
        api,
        args=step.get("args"),
        channel=Channel(step.get("channel", "direct")),
        interaction=interaction,
    )
