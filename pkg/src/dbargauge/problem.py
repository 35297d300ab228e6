"""Problem files: JSON descriptions of connection data.

Example::

    {"n": 1, "m": 0, "p": [1], "backend": "grid",
     "grid": {"N_rad": 128, "N_ang": 256, "radius": 0.5},
     "omega": {"0,0": [["z"]]},
     "psi": [["exp(z*zb)"]]}

``omega`` maps ``"s,k"`` to the entry of form degree k + 1 with shape
``p[s+k] x p[s]``.  A plain matrix of expressions is the coefficient of the
single component when there is only one (degree 0, or degree n); otherwise
the value is an object mapping multi-indices such as ``"1"`` or ``"1,2"`` to
matrices.  Numbers may be used in place of expression strings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from math import comb

import jsonschema
import numpy as np

from . import expr as E
from . import forms as F
from .grid import GridCoeff, PolarGrid
from .resolution import AugmentedData, ConnectionData, connection_indices
from .series import SeriesRing

_MATRIX = {"type": "array", "minItems": 1,
           "items": {"type": "array", "items": {"type": ["string", "number"]}}}

SCHEMA = {
    "type": "object",
    "required": ["n", "m", "p", "backend", "omega"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "m": {"type": "integer", "minimum": 0},
        "p": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "backend": {"enum": ["series", "grid"]},
        "mu": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "series_degree": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "properties": {
                "N_rad": {"type": "integer", "minimum": 8},
                "N_ang": {"type": "integer", "minimum": 16},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "omega": {
            "type": "object",
            "propertyNames": {"pattern": r"^\s*\d+\s*,\s*-?\d+\s*$"},
            "additionalProperties": {
                "oneOf": [
                    _MATRIX,
                    {"type": "object",
                     "propertyNames": {"pattern": r"^\s*(\d+\s*(,\s*\d+\s*)*)?$"},
                     "additionalProperties": _MATRIX},
                ]
            },
        },
        "psi": _MATRIX,
        "description": {"type": "string"},
    },
    "additionalProperties": False,
}


class ProblemError(ValueError):
    """Invalid problem file; the message names the offending location."""


@dataclass
class Problem:
    n: int
    m: int
    p: tuple
    backend: str
    omega: dict  # (s, k) -> {I: matrix of parsed expressions}
    psi: list | None = None
    mu: float = 0.5
    series_degree: int = 4
    grid: dict = field(default_factory=lambda: {"N_rad": 128, "N_ang": 256, "radius": 1.0})
    description: str = ""
    source: dict = field(default_factory=dict)

    # materialisation ------------------------------------------------------
    def default_backend(self):
        if self.backend == "series":
            return SeriesRing(self.n)
        g = self.grid
        return PolarGrid(float(g.get("radius", 1.0)), int(g.get("N_rad", 128)),
                         int(g.get("N_ang", 256)))

    def _coeff(self, node, backend):
        if isinstance(backend, SeriesRing):
            return E.to_series(node, self.n, self.series_degree)
        vals = E.evaluate(node, backend.z[..., None])
        return GridCoeff(backend, np.broadcast_to(vals, backend.shape).copy())

    def _form(self, comps, q, backend, rows, cols):
        out = {}
        for I in F.multi_indices(self.n, q):
            M = np.empty((rows, cols), dtype=object)
            mat = comps.get(I)
            for idx in np.ndindex(rows, cols):
                if mat is not None:
                    M[idx] = self._coeff(mat[idx[0]][idx[1]], backend)
                elif isinstance(backend, SeriesRing):
                    M[idx] = backend.zero(self.series_degree)
                else:
                    M[idx] = backend.zero()
            out[I] = M
        return F.MatrixForm(self.n, rows, cols, q, out, backend)

    def connection(self, backend=None) -> ConnectionData:
        backend = backend or self.default_backend()
        if isinstance(backend, PolarGrid) and self.n != 1:
            raise ProblemError(f"grid backend needs n = 1 (problem has n = {self.n})")
        entries = {}
        for (s, k), comps in self.omega.items():
            entries[(s, k)] = self._form(comps, k + 1, backend, self.p[s + k], self.p[s])
        return ConnectionData(self.n, self.m, self.p, backend, entries)

    def augmented(self, backend=None) -> AugmentedData:
        backend = backend or self.default_backend()
        omega = self.connection(backend)
        psi = None
        if self.psi is not None:
            psi = self._form({(): self.psi}, 0, backend, len(self.psi), self.p[0])
        return AugmentedData(omega, psi, {"description": self.description})


# loading ------------------------------------------------------------------------

def _parse_matrix(raw, n, rows, cols, where):
    if len(raw) != rows or any(len(r) != cols for r in raw):
        shape = (len(raw), len(raw[0]) if raw else 0)
        raise ProblemError(f"{where}: matrix has shape {shape}, expected ({rows}, {cols})")
    out = []
    for i, row in enumerate(raw):
        parsed = []
        for j, cell in enumerate(row):
            text = cell if isinstance(cell, str) else repr(cell)
            try:
                parsed.append(E.parse(text, n))
            except E.ExprError as exc:
                raise ProblemError(f"{where}[{i}][{j}] {text!r}: {exc}") from None
        out.append(parsed)
    return out


def _multi_index(text, n, q, where):
    I = tuple(int(x) for x in text.split(",") if x.strip()) if text.strip() else ()
    if len(I) != q or list(I) != sorted(set(I)) or any(not 1 <= i <= n for i in I):
        raise ProblemError(f"{where}: {text!r} is not an increasing multi-index of "
                           f"length {q} in 1..{n}")
    return I


def from_dict(data: dict) -> Problem:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ProblemError(f"schema error at {path}: {exc.message}") from None
    n, m, p = data["n"], data["m"], tuple(data["p"])
    if len(p) != m + 1:
        raise ProblemError(f"p: need m + 1 = {m + 1} ranks, got {len(p)}")
    backend = data["backend"]
    if backend == "grid" and n != 1:
        raise ProblemError(f"backend: grid needs n = 1 (got n = {n})")
    allowed = set(connection_indices(m))
    omega = {}
    for key, val in data["omega"].items():
        s, k = (int(x) for x in key.split(","))
        where = f"omega[{key!r}]"
        if (s, k) not in allowed:
            raise ProblemError(f"{where}: index ({s},{k}) is outside the range for m = {m}")
        q = k + 1
        if q > n:
            raise ProblemError(f"{where}: form degree {q} exceeds n = {n}")
        rows, cols = p[s + k], p[s]
        if isinstance(val, list):
            if comb(n, q) != 1:
                raise ProblemError(f"{where}: degree {q} forms in n = {n} have several "
                                   "components; give an object keyed by multi-index")
            I = F.multi_indices(n, q)[0]
            omega[(s, k)] = {I: _parse_matrix(val, n, rows, cols, where)}
        else:
            comps = {}
            for ikey, mat in val.items():
                I = _multi_index(ikey, n, q, where)
                comps[I] = _parse_matrix(mat, n, rows, cols, f"{where}[{ikey!r}]")
            omega[(s, k)] = comps
    psi = None
    if "psi" in data:
        raw = data["psi"]
        psi = _parse_matrix(raw, n, len(raw), p[0], "psi")
    grid = {"N_rad": 128, "N_ang": 256, "radius": 1.0}
    grid.update(data.get("grid", {}))
    return Problem(n, m, p, backend, omega, psi, float(data.get("mu", 0.5)),
                   int(data.get("series_degree", 4)), grid, data.get("description", ""), data)


def loads(text: str) -> Problem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: "
                           f"{exc.msg}") from None
    return from_dict(data)


def load(path) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


BUNDLED = ("grothendieck_n1", "nonintegrable_n2", "manufactured_m0", "manufactured_m1")


def bundled(name: str) -> Problem:
    """One of the problems shipped with the package (see ``BUNDLED``)."""
    if name not in BUNDLED:
        raise ProblemError(f"unknown bundled problem {name!r}; choose from {', '.join(BUNDLED)}")
    text = resources.files(__package__).joinpath("problems", f"{name}.json").read_text("utf-8")
    return loads(text)
