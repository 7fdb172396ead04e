"""Command line entry point: ``tidac run|sweep|validate|list-scenarios``."""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError, RunError, ScenarioError, TidacError
from .harness.runner import run_scenario, write_sweep
from .harness.scenario import load_scenario, parse_scenario

OUT_DIR_ENV = "TIDAC_OUT_DIR"
DEFAULT_OUT_DIR = "tidac-out"


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def bundled_scenarios():
    """``{name: text}`` of the scenarios shipped with the package."""
    root = resources.files("tidac.harness") / "scenarios"
    out = {}
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".scenario"):
            out[entry.name[: -len(".scenario")]] = entry.read_text()
    return out


def resolve_scenario(ref):
    """Load a scenario file, falling back to a bundled scenario of that name."""
    path = Path(ref)
    if path.exists():
        return load_scenario(path)
    name = path.name[: -len(".scenario")] if path.name.endswith(".scenario") else path.name
    bundled = bundled_scenarios()
    if name in bundled and path.parent == Path("."):
        return parse_scenario(bundled[name], f"<bundled>/{name}.scenario")
    raise ScenarioError("no such scenario file or bundled scenario", str(ref))


def _out_dir(args):
    return Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def _load(args):
    s = resolve_scenario(args.scenario)
    return s.with_overrides(args.seed, args.samples, args.oversample)


def cmd_run(args):
    s = _load(args)
    report = run_scenario(s, _out_dir(args))
    for r in report.results:
        m = r.metrics
        print(f"{s.name}\t{r.name}\t{r.mode}\tsndr={m['sndr_db']:.2f} dB\t"
              f"h2={m['h2_db']:.1f} dB\th3={m['h3_db']:.1f} dB")
    for f in report.files:
        print(f"wrote {f}")
    return 0


def cmd_sweep(args):
    s = _load(args)
    path, curves = write_sweep(s, _out_dir(args), workers=args.workers)
    for name, pts in curves.items():
        best = max(v for _, v in pts)
        print(f"{s.name}\t{name}\tpoints={len(pts)}\tpeak_sndr={best:.2f} dB")
    print(f"wrote {path}")
    return 0


def cmd_validate(args):
    s = _load(args)
    print(f"ok\t{s.source}\t{len(s.cases)} cases")
    return 0


def cmd_list(args):
    for name, text in bundled_scenarios().items():
        s = parse_scenario(text, f"<bundled>/{name}.scenario")
        print(f"{name}\t{s.description}")
    return 0


def build_parser():
    p = _Parser(prog="tidac", description="Time-interleaved sigma-delta DAC simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("scenario", help="scenario file or bundled scenario name")
        sp.add_argument("--seed", type=int, help="override mismatch and edge seeds")
        sp.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
        sp.add_argument("--samples", type=int, help="FFT length in high-rate samples")
        sp.add_argument("--oversample", type=int, help="analog sub-samples per high-rate tick")

    sp = sub.add_parser("run", help="run every case of a scenario")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("sweep", help="SNDR versus amplitude for every case")
    common(sp)
    sp.add_argument("--workers", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("validate", help="parse and check a scenario")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    sp = sub.add_parser("list-scenarios", help="list bundled scenarios")
    sp.set_defaults(func=cmd_list)
    return p


def _fail(kind, message, code):
    print(f"tidac: error: {kind}: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except CliError as exc:
        return _fail("usage", exc, 2)
    except ScenarioError as exc:
        return _fail("scenario", exc, 2)
    except ConfigurationError as exc:
        return _fail("config", exc, 2)
    except RunError as exc:
        return _fail("run", exc, 1)
    except TidacError as exc:
        return _fail(type(exc).__name__, exc, 1)
    except OSError as exc:
        return _fail("io", exc, 1)


if __name__ == "__main__":
    sys.exit(main())
