"""Scenario files, CSV tables and run summaries.

Configuration files are JSON documents validated against
``data/scenario.schema.json``. Unknown fields are rejected and the
``schema_version`` must match :data:`SCHEMA_VERSION`. Everything on disk uses
GHz, ns, uA, flux quanta and radians; qubit labels in files are 1-based.
The one exception to "radians for phases" is the fluxonium ``loop_flux``,
which is written in flux quanta like every other flux and converted here.
"""

from __future__ import annotations

import csv
import io as io_module
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ._accel import backend
from .errors import ValidationError
from .readout import FLUXONIUM, ReadoutCircuit, ResonatorSpec
from .spin import AsqParams, ChainConfig

SCHEMA_VERSION = 1

UNITS = {
    "energy": "GHz",
    "time": "ns",
    "current": "uA",
    "flux": "Phi_0",
    "phase": "rad",
}


@lru_cache(maxsize=None)
def load_schema(name: str = "scenario") -> dict:
    text = resources.files("asqchain").joinpath("data", f"{name}.schema.json").read_text()
    return json.loads(text)


def _field_path(path: Iterable) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def _validate(document, schema_name: str, source: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(document), key=lambda e: (len(e.path), list(map(str, e.path))))
    if errors:
        lines = [f"{source}: field {_field_path(e.path)}: {e.message}" for e in errors[:10]]
        raise ValidationError("\n".join(lines))


@dataclass(frozen=True)
class Sweep:
    """A 1-D parameter sweep.

    ``variable`` is one of ``phi`` (phase drop across one ASQ, rad),
    ``delta`` (Monte Carlo flux-noise amplitude, Phi_0), ``loop_flux``
    (fluxonium external flux, Phi_0) or ``flux:<k>`` (flux through loop k,
    1-based, Phi_0).
    """

    variable: str
    start: float
    stop: float
    points: int
    scale: str = "linear"

    def __post_init__(self):
        if self.points < 2:
            raise ValidationError(f"sweep needs at least 2 points, got {self.points}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or self.start == self.stop:
            raise ValidationError(f"empty sweep range [{self.start}, {self.stop}]")
        if self.scale == "log" and min(self.start, self.stop) <= 0:
            raise ValidationError("a log sweep needs a positive range")

    @property
    def loop(self) -> int | None:
        """0-based loop index for ``flux:<k>`` sweeps."""
        if self.variable.startswith("flux:"):
            return int(self.variable.split(":")[1]) - 1
        return None

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    config: ChainConfig
    readout: tuple[ReadoutCircuit, ResonatorSpec] | None = None
    sweep: Sweep | None = None
    outputs: tuple[str, ...] = ()
    task: str | None = None
    seed: int = 0
    params: Mapping = field(default_factory=dict)

    def pair(self) -> tuple[int, int]:
        """The 0-based pair named in ``params`` (default the first two qubits)."""
        i, j = self.params.get("pair", (1, 2))
        return i - 1, j - 1


def parse_config(document: Mapping, source: str = "<config>") -> ScenarioSpec:
    """Validate a decoded JSON document and build a :class:`ScenarioSpec`."""
    if not isinstance(document, Mapping):
        raise ValidationError(f"{source}: top level must be a JSON object")
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"{source}: unsupported schema_version {version!r} (this build reads {SCHEMA_VERSION})"
        )
    _validate(document, "scenario", source)

    chain = document["chain"]
    asqs = [AsqParams(**a) for a in chain["asqs"]] * chain.get("repeat", 1)
    n = len(asqs)
    fluxes = chain.get("fluxes", [])
    if fluxes and len(fluxes) != n:
        raise ValidationError(f"{source}: field chain.fluxes: expected {n} values, got {len(fluxes)}")
    config = ChainConfig(chain["e_j_coupling"], tuple(asqs), tuple(fluxes))

    readout = None
    if "readout" in document:
        c = dict(document["readout"]["circuit"])
        if c["kind"] == FLUXONIUM and "e_l" not in c:
            raise ValidationError(f"{source}: field readout.circuit.e_l: required for a fluxonium")
        c["loop_flux"] = 2.0 * math.pi * c.get("loop_flux", 0.0)
        readout = (ReadoutCircuit(**c), ResonatorSpec(**document["readout"]["resonator"]))

    sweep = None
    if "sweep" in document:
        try:
            sweep = Sweep(**document["sweep"])
        except ValidationError as exc:
            raise ValidationError(f"{source}: field sweep: {exc}") from None
        if sweep.loop is not None and sweep.loop >= n:
            raise ValidationError(f"{source}: field sweep.variable: loop {sweep.loop + 1} does not exist (N={n})")
        if sweep.variable == "loop_flux" and (readout is None or readout[0].kind != FLUXONIUM):
            raise ValidationError(f"{source}: field sweep.variable: loop_flux needs a fluxonium readout")

    params = dict(document.get("params", {}))
    for key in ("pair",):
        if key in params:
            i, j = params[key]
            if i == j or max(i, j) > n:
                raise ValidationError(f"{source}: field params.{key}: invalid pair {params[key]} for N={n}")
    if params.get("target", 1) > n:
        raise ValidationError(f"{source}: field params.target: qubit {params['target']} does not exist")
    for key in ("offsets",):
        if key in params and len(params[key]) != n:
            raise ValidationError(f"{source}: field params.{key}: expected {n} values")
    if "mutual" in params and np.shape(params["mutual"]) != (n, n):
        raise ValidationError(f"{source}: field params.mutual: expected an {n}x{n} matrix")

    return ScenarioSpec(
        name=document.get("name", Path(source).stem),
        config=config,
        readout=readout,
        sweep=sweep,
        outputs=tuple(document.get("outputs", ())),
        task=document.get("task"),
        seed=int(document.get("seed", 0)),
        params=params,
    )


def load_config(path) -> ScenarioSpec:
    """Read and validate a scenario file.

    JSON syntax errors are reported with line and column; schema errors
    with the dotted path of the offending field.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return parse_config(document, str(path))


# -- serialization of model objects --------------------------------------------------------


def asq_to_dict(asq: AsqParams) -> dict:
    return {"e_j": asq.e_j, "e_so": asq.e_so, "e_z": asq.e_z, "theta": asq.theta}


def config_to_dict(config: ChainConfig) -> dict:
    return {
        "e_j_coupling": config.e_j_coupling,
        "asqs": [asq_to_dict(a) for a in config.asqs],
        "fluxes": list(config.fluxes),
    }


def config_document(config: ChainConfig, **extra) -> dict:
    """A minimal schema-valid document for ``config``."""
    return {"schema_version": SCHEMA_VERSION, "chain": config_to_dict(config), **extra}


# -- tables and summaries ------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def csv_text(
    columns: Sequence[str],
    rows: Iterable[Sequence],
    *,
    units: Mapping[str, str] | None = None,
    comments: Sequence[str] = (),
) -> str:
    """A table with ``#`` header comments naming the units.

    Floats are written with ``repr`` so the text is byte-identical for
    identical inputs.
    """
    buf = io_module.StringIO()
    buf.write(f"# units: {', '.join(f'{k}={v}' for k, v in UNITS.items())}\n")
    for col, unit in (units or {}).items():
        buf.write(f"# {col}: {unit}\n")
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, columns, rows, *, units=None, comments=()) -> Path:
    """Write :func:`csv_text` to ``path``, creating parent folders."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows, units=units, comments=comments))
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def _plain(value):
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def make_summary(name: str, seed: int, headline: Mapping, files: Sequence[str], units=None) -> dict:
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "name": name,
        "seed": int(seed),
        "backend": backend(),
        "units": dict(units or UNITS),
        "headline": _plain(dict(headline)),
        "files": [str(f) for f in files],
    }
    _validate(summary, "summary", name)
    return summary


def dumps(document) -> str:
    return json.dumps(_plain(document), indent=2, sort_keys=True) + "\n"


def write_summary(path, summary: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(summary))
    return path


def load_summary(path) -> dict:
    """Read a summary back and re-validate it against the schema."""
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    _validate(document, "summary", str(path))
    return document
