"""
Scenario files: line-oriented ``key = value`` text with ``[section]`` headers.

    # comment
    [scenario]
    name = fig10
    [modulator]
    order = 2
    osr = 64
    [case ideal]
    mode = phase-assigned
    mismatch = off

Lists are comma separated; booleans accept on/off, true/false, yes/no, 1/0.
``dump_scenario`` writes the canonical form: fixed section and key order,
floats in shortest round-trip notation, LF line endings.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..dacbank import MODES
from ..errors import ScenarioError


@dataclass
class ModulatorSpec:
    order: int = 2
    osr: int = 64
    bits: int = 1
    denominator: tuple = ()
    dither: float = 0.0
    dither_seed: int = 0
    interleaved: bool = True


@dataclass
class DacSpec:
    paths: int = 4
    full_scale: float = 1.0
    f_high: float = 1.0


@dataclass
class MismatchSpec:
    distribution: str = "uniform"
    range: float | None = None
    std: float | None = None
    seed: int = 1
    gains: tuple = ()
    offsets: tuple = ()
    apply: tuple = ("gain", "offset")


@dataclass
class ShapeSpec:
    """Edge model; ``slew_rate`` in V_S*f_H and ``tau`` in 1/f_H units."""

    kind: str = "ideal"
    slew_rate: float = 1.5
    tau: float = 0.5
    range: float | None = None
    std: float | None = None
    seed: int = 1
    split: float = 0.05


@dataclass
class InputSpec:
    amplitude: float | None = None
    amplitude_dbfs: float | None = -3.0
    bin: int = 53

    def linear(self):
        if self.amplitude is not None:
            return self.amplitude
        return 10.0 ** (self.amplitude_dbfs / 20.0)


@dataclass
class AnalysisSpec:
    samples: int = 2 ** 15
    oversample: int = 16
    sweep: tuple = ()


@dataclass
class CaseSpec:
    name: str
    mode: str = "phase-assigned"
    mismatch: bool = False
    shape: bool = False


@dataclass
class Scenario:
    name: str = "scenario"
    description: str = ""
    modulator: ModulatorSpec = field(default_factory=ModulatorSpec)
    dac: DacSpec = field(default_factory=DacSpec)
    mismatch: MismatchSpec = field(default_factory=MismatchSpec)
    shape: ShapeSpec = field(default_factory=ShapeSpec)
    input: InputSpec = field(default_factory=InputSpec)
    analysis: AnalysisSpec = field(default_factory=AnalysisSpec)
    cases: list = field(default_factory=list)
    source: str | None = None
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    def case(self, name):
        for c in self.cases:
            if c.name == name:
                return c
        raise ScenarioError(f"no case named {name!r}", self.source)

    def where(self, section, key=None):
        return self.lines.get((section, key), self.lines.get((section, None)))

    def with_overrides(self, seed=None, samples=None, oversample=None):
        s = replace(self)
        if seed is not None:
            s.mismatch = replace(self.mismatch, seed=seed)
            s.shape = replace(self.shape, seed=seed)
        if samples is not None:
            s.analysis = replace(self.analysis, samples=samples)
        if oversample is not None:
            s.analysis = replace(s.analysis, oversample=oversample)
        return validate_scenario(s)


SECTIONS = {
    "scenario": None,
    "modulator": ModulatorSpec,
    "dac": DacSpec,
    "mismatch": MismatchSpec,
    "shape": ShapeSpec,
    "input": InputSpec,
    "analysis": AnalysisSpec,
}

_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}
_HEADER = re.compile(r"^\[\s*([A-Za-z_]+)(?:\s+([A-Za-z0-9_.\-]+))?\s*\]$")


def _parse_bool(text):
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _parse_list(text, conv):
    text = text.strip()
    if not text:
        return ()
    return tuple(conv(p.strip()) for p in text.split(","))


def _converter(spec_cls, name):
    default = getattr(spec_cls(), name) if spec_cls is not CaseSpec else None
    if spec_cls is MismatchSpec and name == "apply":
        return lambda t: _parse_list(t, str)
    if name in ("denominator", "gains", "offsets", "sweep"):
        return lambda t: _parse_list(t, _parse_float)
    if name in ("range", "std", "amplitude", "amplitude_dbfs"):
        return lambda t: None if t.strip().lower() in ("", "none") else _parse_float(t)
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return _parse_float
    return str


def parse_scenario(text, source=None):
    """Parse scenario text. Errors carry ``source`` and the offending line."""
    scen = Scenario(source=source)
    sections = {k: {} for k in SECTIONS}
    cases = []
    current = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            kind, label = m.group(1), m.group(2)
            if kind == "case":
                if not label:
                    raise ScenarioError("case section needs a name", source, lineno)
                if any(c[0] == label for c in cases):
                    raise ScenarioError(f"duplicate case {label!r}", source, lineno)
                cases.append((label, {}, lineno))
                current = ("case", label)
            elif kind in SECTIONS and not label:
                if kind in seen:
                    raise ScenarioError(f"duplicate section [{kind}]", source, lineno)
                seen.add(kind)
                current = (kind, None)
            else:
                raise ScenarioError(f"unknown section {line}", source, lineno)
            scen.lines[(current[0] if current[0] != "case" else f"case {label}", None)] = lineno
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {line!r}", source, lineno)
        if current is None:
            raise ScenarioError("key outside of any section", source, lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if current[0] == "case":
            target = cases[-1][1]
            sect = f"case {current[1]}"
        else:
            target = sections[current[0]]
            sect = current[0]
        if key in target:
            raise ScenarioError(f"duplicate key {key!r}", source, lineno)
        target[key] = (value, lineno)
        scen.lines[(sect, key)] = lineno

    meta = sections["scenario"]
    for key, (value, lineno) in meta.items():
        if key not in ("name", "description"):
            raise ScenarioError(f"unknown key {key!r} in [scenario]", source, lineno)
        setattr(scen, key, value)

    for sect, cls in SECTIONS.items():
        if cls is None:
            continue
        names = {f.name for f in fields(cls)}
        values = {}
        for key, (value, lineno) in sections[sect].items():
            if key not in names:
                raise ScenarioError(f"unknown key {key!r} in [{sect}]", source, lineno)
            try:
                values[key] = _converter(cls, key)(value)
            except ValueError as exc:
                raise ScenarioError(f"bad value for {key}: {exc}", source, lineno) from None
        if sect == "input" and "amplitude" in values and "amplitude_dbfs" not in values:
            values["amplitude_dbfs"] = None
        setattr(scen, sect, cls(**values))

    for label, values, lineno in cases:
        kwargs = {}
        for key, (value, kline) in values.items():
            if key not in ("mode", "mismatch", "shape"):
                raise ScenarioError(f"unknown key {key!r} in case {label!r}", source, kline)
            try:
                kwargs[key] = value if key == "mode" else _parse_bool(value)
            except ValueError as exc:
                raise ScenarioError(f"bad value for {key}: {exc}", source, kline) from None
        scen.cases.append(CaseSpec(label, **kwargs))
    validate_scenario(scen)
    return scen


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", str(path)) from None
    return parse_scenario(text, str(path))


def n_elements(mode, paths, bits):
    if mode == "single-dac":
        return 1
    if mode == "rz":
        return paths + 1
    if mode in ("multibit-dwa", "phase-assigned"):
        return paths * (2 ** bits - 1)
    return paths


def validate_scenario(s):
    """Check cross-field consistency; raises :class:`ScenarioError`."""

    def fail(msg, section, key=None):
        raise ScenarioError(msg, s.source, s.where(section, key))

    mod = s.modulator
    if mod.order < 1:
        fail("order must be >= 1", "modulator", "order")
    if mod.order > 2 and not mod.denominator:
        fail(f"order {mod.order} needs a denominator", "modulator", "order")
    if mod.order <= 2 and mod.denominator and tuple(mod.denominator) != (1.0,):
        fail("denominator is only allowed for order > 2", "modulator", "denominator")
    if mod.bits < 1:
        fail("bits must be >= 1", "modulator", "bits")
    if mod.osr < 1:
        fail("osr must be >= 1", "modulator", "osr")
    if s.dac.paths < 1:
        fail("paths must be >= 1", "dac", "paths")
    if s.dac.full_scale <= 0 or s.dac.f_high <= 0:
        fail("full_scale and f_high must be positive", "dac")
    an = s.analysis
    if an.samples < 16 or an.samples % s.dac.paths:
        fail(f"samples must be a multiple of paths ({s.dac.paths}) and >= 16", "analysis", "samples")
    if an.oversample < 1:
        fail("oversample must be >= 1", "analysis", "oversample")
    if list(an.sweep) != sorted(an.sweep):
        fail("sweep amplitudes must be ascending", "analysis", "sweep")
    band = an.samples / (2.0 * mod.osr)
    if not 0 < s.input.bin < band:
        fail(f"input bin {s.input.bin} is outside the signal band (0, {band:g})", "input", "bin")
    if s.input.amplitude is None and s.input.amplitude_dbfs is None:
        fail("input needs amplitude or amplitude_dbfs", "input")

    mm = s.mismatch
    if mm.distribution not in ("uniform", "normal"):
        fail(f"unknown distribution {mm.distribution!r}", "mismatch", "distribution")
    for part in mm.apply:
        if part not in ("gain", "offset"):
            fail(f"mismatch apply entries must be gain/offset, got {part!r}", "mismatch", "apply")
    if s.shape.kind not in ("ideal", "slew"):
        fail(f"unknown shape kind {s.shape.kind!r}", "shape", "kind")
    if s.shape.kind == "slew" and (s.shape.tau < 0 or s.shape.slew_rate <= 0):
        fail("shape needs tau >= 0 and slew_rate > 0", "shape")

    if not s.cases:
        fail("scenario defines no [case ...] sections", "scenario")
    for c in s.cases:
        sect = f"case {c.name}"
        if c.mode not in MODES:
            fail(f"unknown mode {c.mode!r}; expected one of {', '.join(MODES)}", sect, "mode")
        if c.mode == "multibit-dwa" and mod.bits < 2:
            fail("multibit-dwa requires bits >= 2", sect, "mode")
        if c.mode in ("dwa", "rz", "single-dac") and mod.bits != 1:
            fail(f"{c.mode} requires bits = 1", sect, "mode")
        e = n_elements(c.mode, s.dac.paths, mod.bits)
        if c.mismatch:
            for key in ("gains", "offsets"):
                vec = getattr(mm, key)
                if vec and len(vec) < e:
                    fail(f"{key} lists {len(vec)} values but case {c.name!r} needs {e}",
                         "mismatch", key)
            explicit = mm.gains or mm.offsets
            if not explicit and mm.range is None and mm.std is None:
                fail("random mismatch needs range or std", "mismatch")
    # range/std consistency is checked by the generator
    from .mismatch import resolve_spread

    try:
        if mm.range is not None or mm.std is not None:
            resolve_spread(mm.distribution, mm.range, mm.std)
        if s.shape.range is not None or s.shape.std is not None:
            resolve_spread("uniform", s.shape.range, s.shape.std)
    except ScenarioError as exc:
        raise ScenarioError(exc.message, s.source, s.where("mismatch")) from None
    return s


def _fmt(v):
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def dump_scenario(s):
    """Canonical text form of a scenario."""
    out = ["[scenario]", f"name = {s.name}"]
    if s.description:
        out.append(f"description = {s.description}")
    for sect, cls in SECTIONS.items():
        if cls is None:
            continue
        out.append("")
        out.append(f"[{sect}]")
        spec = getattr(s, sect)
        for f in fields(cls):
            out.append(f"{f.name} = {_fmt(getattr(spec, f.name))}")
    for c in s.cases:
        out.append("")
        out.append(f"[case {c.name}]")
        out.append(f"mode = {c.mode}")
        out.append(f"mismatch = {_fmt(c.mismatch)}")
        out.append(f"shape = {_fmt(c.shape)}")
    return "\n".join(out) + "\n"
