"""Command-line experiment runner.

Subcommands map one-to-one onto the harness experiment kinds, plus
``fixtures`` for emitting and verifying scenario files:

    goodfeat pose-opt --trials 50 --out pose.csv
    goodfeat lazier-bench --check
    goodfeat matching --config matching.json --workers 4
    goodfeat bounds --out bounds.csv
    goodfeat fixtures --out fixtures/ --count 5
    goodfeat fixtures --out fixtures/ --check

Exit codes: 0 on success, 2 on configuration errors (including argparse
usage errors), 3 when ``--check`` finds a threshold violation.
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from .errors import ConfigError
from .harness import ExperimentSpec, check_report, derive_seed, run_experiment
from .simworld import ScenarioConfig, generate_scenario, scenario_from_text, scenario_to_text, scenarios_equal

_KIND_BY_COMMAND = {
    "pose-opt": "pose_opt_metrics",
    "lazier-bench": "lazier_benchmark",
    "matching": "matching_sim",
    "bounds": "bounds_curve",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="goodfeat",
        description="Feature-selection and active-matching simulation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _KIND_BY_COMMAND:
        p = sub.add_parser(command, help=f"run the {_KIND_BY_COMMAND[command]} experiment")
        p.add_argument("--config", help="JSON config file with ExperimentSpec fields")
        p.add_argument("--seed", type=int, help="base seed (overrides config)")
        p.add_argument("--trials", type=int, help="trial count (overrides config)")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--full-scale", action="store_true", help="run publication-scale trial counts")
        p.add_argument("--check", action="store_true", help="verify acceptance thresholds; exit 3 on violation")
    fx = sub.add_parser("fixtures", help="emit or verify scenario fixture files")
    fx.add_argument("--out", required=True, help="fixture directory")
    fx.add_argument("--count", type=int, default=3, help="number of fixtures to emit")
    fx.add_argument("--seed", type=int, default=0, help="base seed for fixture scenarios")
    fx.add_argument("--check", action="store_true", help="verify existing fixtures instead of emitting")
    return parser


def _load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")


def _build_spec(args):
    data = _load_config(args.config) if args.config else {}
    kind = _KIND_BY_COMMAND[args.command]
    if "kind" in data and data["kind"] != kind:
        raise ConfigError(f"config kind {data['kind']!r} conflicts with subcommand {args.command!r}")
    data["kind"] = kind
    if args.seed is not None:
        data["base_seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    if args.workers is not None:
        data["workers"] = args.workers
    if args.full_scale:
        data["full_scale"] = True
    return ExperimentSpec.from_dict(data)


def _run_fixtures(args):
    directory = pathlib.Path(args.out)
    if args.check:
        files = sorted(directory.glob("scenario_*.txt"))
        if not files:
            raise ConfigError(f"no scenario_*.txt fixtures under {directory}")
        bad = []
        for path in files:
            stored = scenario_from_text(path.read_text(encoding="utf-8"))
            regenerated = generate_scenario(stored.config)
            if not scenarios_equal(stored, regenerated):
                bad.append(path.name)
        if bad:
            print(f"fixtures differ from regeneration: {', '.join(bad)}", file=sys.stderr)
            return 3
        print(f"{len(files)} fixture(s) verified")
        return 0
    if args.count < 1:
        raise ConfigError("--count must be at least 1")
    directory.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        config = ScenarioConfig(seed=derive_seed(args.seed, i))
        path = directory / f"scenario_{i:03d}.txt"
        path.write_text(scenario_to_text(generate_scenario(config)), encoding="utf-8")
    print(f"wrote {args.count} fixture(s) to {directory}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fixtures":
            return _run_fixtures(args)
        spec = _build_spec(args)
        report = run_experiment(spec)
        if args.out:
            report.write_csv(args.out)
            print(f"wrote {len(report.rows)} row(s) to {args.out}")
        else:
            sys.stdout.write(report.to_csv())
        if args.check:
            violations = check_report(report)
            if violations:
                for message in violations:
                    print(f"check failed: {message}", file=sys.stderr)
                return 3
            print("all checks passed", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
