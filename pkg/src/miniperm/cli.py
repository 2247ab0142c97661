"""Command line front end.

Five subcommands: ``simulate`` replays a scenario and prints the event
trace, ``detect`` runs the weakness detectors against one host profile,
``scan`` checks packaged source trees against an API registry,
``stats`` reports per-category usage rates of one API, and ``matrix``
renders the host-by-category status table.

Exit codes: 0 clean, 1 findings or flagged call sites, 2 errors.

``--profile``, ``--env``, ``--scenario``, and ``--registry`` accept
either a file path or the name of a bundled fixture (for example
``--profile wechat-android``, ``--profile patched/alipay-android``,
``--env ios14``, ``--scenario cache-reuse``).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .detectors import (
    CATEGORY_CODES,
    build_matrix,
    category_status,
    run_all,
)
from .profiles import (
    FIXTURES_DIR,
    HostProfile,
    OsEnvProfile,
    ProfileError,
    load_env,
    load_profile,
)
from .scanner import (
    ScanError,
    corpus_stats,
    load_registry_file,
    scan_package,
)
from .scenario import Scenario, ScenarioError, load_scenario, run_scenario


class CliError(Exception):
    pass


def _resolve(value: str, kind: str, subdir: str):
    """A file path, or the name of a bundled fixture under ``subdir``."""
    p = Path(value)
    if p.is_file():
        return p
    candidate = FIXTURES_DIR / subdir / f"{value}.json"
    if candidate.is_file():
        return candidate
    have = sorted(
        str(q.relative_to(FIXTURES_DIR / subdir))[:-5]
        for q in (FIXTURES_DIR / subdir).rglob("*.json")
    )
    raise CliError(f"no such {kind}: {value!r} (bundled: {', '.join(have)})")


def _profile(value: str) -> HostProfile:
    return load_profile(_resolve(value, "profile", "profiles"))


def _env(value: str) -> OsEnvProfile:
    return load_env(_resolve(value, "environment", "envs"))


def _scenario(value: str) -> Scenario:
    return load_scenario(_resolve(value, "scenario", "scenarios"))


def _bundled_default_scenarios() -> list[Scenario]:
    from .scenario import bundled_scenarios

    return bundled_scenarios()


def _bundled_default_envs() -> list[OsEnvProfile]:
    from .profiles import bundled_envs

    return list(bundled_envs().values())


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------------
# subcommands

def cmd_simulate(args: argparse.Namespace) -> int:
    profile = _profile(args.profile)
    scenario = _scenario(args.scenario)
    env = _env(args.env) if args.env else None
    world, _results = run_scenario(scenario, profile, env=env)
    _write(world.trace_json_lines(), args.out)
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    profile = _profile(args.profile)
    scenarios = (
        [_scenario(s) for s in args.scenario]
        if args.scenario
        else _bundled_default_scenarios()
    )
    envs = [_env(e) for e in args.env] if args.env else _bundled_default_envs()
    registry = None
    scope_table = profile.scope_table
    if args.registry:
        registry, scope_table = load_registry_file(
            _resolve(args.registry, "registry", "profiles")
        )
    findings, covered = run_all(profile, scenarios=scenarios, envs=envs,
                                registry=registry)
    statuses = {
        code: category_status(profile, findings, covered, code).value
        for code in CATEGORY_CODES
    }
    if args.format == "json":
        obj = {
            "host_id": profile.host_id,
            "platform": profile.platform.value,
            "statuses": statuses,
            "findings": [f.to_json_obj() for f in findings],
        }
        _write(json.dumps(obj, indent=2) + "\n", args.out)
    elif args.format == "md":
        lines = [f"## {profile.host_id} ({profile.platform.value})", ""]
        lines.append("| category | status |")
        lines.append("| --- | --- |")
        for code in CATEGORY_CODES:
            lines.append(f"| {code} | {statuses[code]} |")
        lines.append("")
        if findings:
            lines.append("| code | mode | api | description |")
            lines.append("| --- | --- | --- | --- |")
            for f in findings:
                lines.append(
                    f"| {f.category.code} | {f.sub_mode or '-'} "
                    f"| {f.api or '-'} | {f.description} |"
                )
            lines.append("")
        _write("\n".join(lines) + "\n", args.out)
    else:
        lines = [f"host {profile.host_id} ({profile.platform.value})"]
        lines.append("  ".join(f"{c}={statuses[c]}" for c in CATEGORY_CODES))
        for f in findings:
            ev = ",".join(str(e) for e in f.evidence)
            lines.append(
                f"{f.category.code} {f.sub_mode or '-'} {f.api or '-'} "
                f"[{ev}] {f.description}"
            )
        _write("\n".join(lines) + "\n", args.out)
    return 1 if findings else 0


def cmd_scan(args: argparse.Namespace) -> int:
    registry, scope_table = load_registry_file(
        _resolve(args.registry, "registry", "profiles")
    )
    reports = [scan_package(pkg, registry, scope_table) for pkg in args.package]
    flagged = sum(len(r.flagged) for r in reports)
    if args.format == "json":
        obj = [r.to_json_obj() for r in reports]
        _write(json.dumps(obj, indent=2) + "\n", args.out)
    else:
        lines = []
        for r in reports:
            lines.append(
                f"package {r.package_id}: {len(r.sites)} call sites, "
                f"{len(r.matches)} matched, {len(r.flagged)} flagged"
            )
            for m in r.matches:
                mark = "FLAG" if m.flagged else "ok"
                mode = m.sub_mode.value if m.sub_mode else "-"
                lines.append(
                    f"  [{mark}] {m.site.file}:{m.site.line}:{m.site.col} "
                    f"{m.api} ({m.data_class.value}, {mode})"
                )
            for err in r.errors:
                lines.append(f"  error: {err}")
        _write("\n".join(lines) + "\n", args.out)
    return 1 if flagged else 0


def cmd_stats(args: argparse.Namespace) -> int:
    registry, scope_table = load_registry_file(
        _resolve(args.registry, "registry", "profiles")
    )
    index = {}
    if args.corpus_index:
        try:
            index = json.loads(Path(args.corpus_index).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"corpus index: {exc}")
    reports = [scan_package(pkg, registry, scope_table) for pkg in args.package]
    stats = corpus_stats(reports, index=index, api_name=args.api)
    if args.format == "json":
        _write(json.dumps(stats, indent=2) + "\n", args.out)
    else:
        lines = [
            f"{stats['api']}: {stats['calling']}/{stats['packages']} packages "
            f"({stats['rate']:.4f})"
        ]
        for cat, slot in stats["categories"].items():
            lines.append(
                f"  {cat}: {slot['calling']}/{slot['packages']} ({slot['rate']:.4f})"
            )
        _write("\n".join(lines) + "\n", args.out)
    return 0


def cmd_matrix(args: argparse.Namespace) -> int:
    profiles = (
        [_profile(p) for p in args.profile] if args.profile else None
    )
    scenarios = (
        [_scenario(s) for s in args.scenario] if args.scenario else None
    )
    envs = [_env(e) for e in args.env] if args.env else None
    report = build_matrix(profiles=profiles, scenarios=scenarios, envs=envs)
    if args.format == "json":
        _write(json.dumps(report.to_json_obj(), indent=2) + "\n", args.out)
    elif args.format == "text":
        _write(report.render_text(), args.out)
    else:
        _write(report.render_markdown(), args.out)
    return 0


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="miniperm",
        description="model and check two-layer mini-program permission handling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and print its event trace")
    p.add_argument("--profile", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--env", help="OS environment for clipboard steps")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="run the weakness detectors for one host")
    p.add_argument("--profile", required=True)
    p.add_argument("--scenario", action="append", default=[],
                   help="repeatable; defaults to every bundled scenario")
    p.add_argument("--env", action="append", default=[],
                   help="repeatable; defaults to the bundled environments")
    p.add_argument("--registry", help="override the profile's API registry")
    p.add_argument("--format", choices=("text", "json", "md"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("scan", help="scan packaged source trees against a registry")
    p.add_argument("--package", action="append", required=True)
    p.add_argument("--registry", required=True,
                   help="registry file or host profile (path or bundled name)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("stats", help="usage rates of one API across packages")
    p.add_argument("--package", action="append", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--api", required=True)
    p.add_argument("--corpus-index", help="JSON file mapping package id to category")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("matrix", help="host-by-category status table")
    p.add_argument("--profile", action="append", default=[],
                   help="repeatable; defaults to every bundled profile")
    p.add_argument("--scenario", action="append", default=[])
    p.add_argument("--env", action="append", default=[])
    p.add_argument("--format", choices=("md", "json", "text"), default="md")
    p.add_argument("--out")
    p.set_defaults(func=cmd_matrix)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ProfileError, ScanError, ScenarioError) as exc:
        print(f"miniperm: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"miniperm: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
