"""JSON model files.

Complex numbers are written as ``[re, im]`` pairs everywhere, so a p x p
matrix is a list of p rows of p pairs.  Example::

    {
      "name": "A",
      "p": 3,
      "chi": [...],
      "state": {"gibbs": {"h_site": [...], "beta": 1.0}},
      "hamiltonian": [...],
      "dissipator": {"form": "double_commutator", "kraus": [[...]], "D": [[[1, 0]]],
                     "J": {"kind": "onsite", "lambda": 1.0}},
      "run": {"t_list": [0, 0.5, 1, 2], "n_list": [9, 27], "r": [1, 0], "a": [0, 0], "b": [0, 0],
              "tol": 0.01, "seed": 0}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .chainstate import ProductState, gibbs_single_site
from .errors import ConfigError, QFluctError
from .fluct import ObservableSet
from .harness import Model
from .lindblad import CouplingProfile, LindbladSpec

__all__ = ["ModelConfig", "RunParams", "load_config", "parse_config"]

BUILTIN_PREFIX = "builtin:"


class ConfigParseError(ConfigError):
    """A malformed config; ``where`` is a dotted field path or a ``line N`` marker."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


def _complex(value, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigParseError(where, f"expected a number or [re, im] pair, got {value!r}")


def _matrix(value, where: str, p: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(row, list) for row in value):
        raise ConfigParseError(where, "expected a non-empty list of rows")
    n = len(value) if p is None else p
    if len(value) != n:
        raise ConfigParseError(where, f"expected {n} rows, got {len(value)}")
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != n:
            raise ConfigParseError(f"{where}[{i}]", f"expected {n} entries, got {len(row)}")
        for j, v in enumerate(row):
            out[i, j] = _complex(v, f"{where}[{i}][{j}]")
    return out


def _encode_matrix(mat) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(mat, dtype=complex)]


def _floats(value, where: str) -> list:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        raise ConfigParseError(where, "expected a list of numbers")
    return [float(v) for v in value]


def _get(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise ConfigParseError(where, "expected an object")
    if key not in obj:
        raise ConfigParseError(f"{where}.{key}" if where else key, "missing field")
    return obj[key]


@dataclass
class RunParams:
    t_list: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0])
    n_list: list = field(default_factory=lambda: [9, 27, 81])
    r: list | None = None
    a: list | None = None
    b: list | None = None
    tol: float = 1e-2
    seed: int = 0

    def to_dict(self) -> dict:
        out = {"t_list": list(self.t_list), "n_list": list(self.n_list), "tol": self.tol, "seed": self.seed}
        for name in ("r", "a", "b"):
            if getattr(self, name) is not None:
                out[name] = list(getattr(self, name))
        return out

    @classmethod
    def from_dict(cls, data: dict, where: str = "run") -> "RunParams":
        if not isinstance(data, dict):
            raise ConfigParseError(where, "expected an object")
        out = cls()
        if "t_list" in data:
            out.t_list = _floats(data["t_list"], f"{where}.t_list")
        if "n_list" in data:
            ns = data["n_list"]
            if not isinstance(ns, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in ns):
                raise ConfigParseError(f"{where}.n_list", "expected a list of integers")
            out.n_list = list(ns)
        for name in ("r", "a", "b"):
            if name in data:
                setattr(out, name, _floats(data[name], f"{where}.{name}"))
        if "tol" in data:
            out.tol = float(_floats([data["tol"]], f"{where}.tol")[0])
        if "seed" in data:
            if not isinstance(data["seed"], int):
                raise ConfigParseError(f"{where}.seed", "expected an integer")
            out.seed = data["seed"]
        return out


@dataclass
class ModelConfig:
    """Parsed model file; ``to_dict`` and ``from_dict`` are inverse to each other."""

    name: str
    p: int
    chi: list
    state: dict
    hamiltonian: np.ndarray
    form: str
    kraus: list
    D: np.ndarray
    J: dict
    run: RunParams = field(default_factory=RunParams)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        if not isinstance(data, dict):
            raise ConfigParseError("<root>", "expected an object")
        p = _get(data, "p", "")
        if not isinstance(p, int) or isinstance(p, bool) or p < 1:
            raise ConfigParseError("p", "expected a positive integer")
        chi_raw = _get(data, "chi", "")
        if not isinstance(chi_raw, list) or not chi_raw:
            raise ConfigParseError("chi", "expected a non-empty list of matrices")
        chi = [_matrix(m, f"chi[{i}]", p) for i, m in enumerate(chi_raw)]

        st = _get(data, "state", "")
        if not isinstance(st, dict) or len(st) != 1:
            raise ConfigParseError("state", "expected exactly one of 'gibbs' or 'custom'")
        if "gibbs" in st:
            g = st["gibbs"]
            beta = _get(g, "beta", "state.gibbs")
            if not isinstance(beta, (int, float)) or isinstance(beta, bool):
                raise ConfigParseError("state.gibbs.beta", "expected a number")
            state = {"gibbs": {"h_site": _matrix(_get(g, "h_site", "state.gibbs"), "state.gibbs.h_site", p), "beta": float(beta)}}
        elif "custom" in st:
            state = {"custom": _matrix(st["custom"], "state.custom", p)}
        else:
            raise ConfigParseError("state", f"unknown state kind {next(iter(st))!r}")

        h = _matrix(_get(data, "hamiltonian", ""), "hamiltonian", p)
        dis = _get(data, "dissipator", "")
        form = _get(dis, "form", "dissipator")
        if not isinstance(form, str):
            raise ConfigParseError("dissipator.form", "expected a string")
        kraus_raw = _get(dis, "kraus", "dissipator")
        if not isinstance(kraus_raw, list):
            raise ConfigParseError("dissipator.kraus", "expected a list of matrices")
        kraus = [_matrix(m, f"dissipator.kraus[{i}]", p) for i, m in enumerate(kraus_raw)]
        D = _matrix(_get(dis, "D", "dissipator"), "dissipator.D", len(kraus) or None)
        J = _parse_coupling(_get(dis, "J", "dissipator"))
        run = RunParams.from_dict(data.get("run", {}))
        return cls(str(data.get("name", "model")), p, chi, state, h, form, kraus, D, J, run)

    def to_dict(self) -> dict:
        if "gibbs" in self.state:
            g = self.state["gibbs"]
            state = {"gibbs": {"h_site": _encode_matrix(g["h_site"]), "beta": g["beta"]}}
        else:
            state = {"custom": _encode_matrix(self.state["custom"])}
        return {
            "name": self.name,
            "p": self.p,
            "chi": [_encode_matrix(m) for m in self.chi],
            "state": state,
            "hamiltonian": _encode_matrix(self.hamiltonian),
            "dissipator": {
                "form": self.form,
                "kraus": [_encode_matrix(m) for m in self.kraus],
                "D": _encode_matrix(self.D),
                "J": _encode_coupling(self.J),
            },
            "run": self.run.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def build(self) -> Model:
        """Instantiate the model; physics validation errors surface as ConfigError."""
        try:
            J = _coupling(self.J)
            spec = LindbladSpec(self.hamiltonian, self.kraus, self.D, J, form=self.form)
            if "gibbs" in self.state:
                state = gibbs_single_site(self.state["gibbs"]["h_site"], self.state["gibbs"]["beta"])
            else:
                state = ProductState(self.state["custom"])
            chi = ObservableSet.bind(self.chi, state)
        except ConfigError:
            raise
        except QFluctError as exc:
            raise ConfigError(f"invalid model {self.name!r}: {exc}") from exc
        return Model(self.name, spec, state, chi)


def _parse_coupling(data) -> dict:
    where = "dissipator.J"
    kind = _get(data, "kind", where)
    if kind == "onsite":
        return {"kind": "onsite", "lambda": _floats([_get(data, "lambda", where)], f"{where}.lambda")[0]}
    if kind == "geometric":
        out = {
            "kind": "geometric",
            "lambda": _floats([_get(data, "lambda", where)], f"{where}.lambda")[0],
            "q": _floats([_get(data, "q", where)], f"{where}.q")[0],
        }
        if "cutoff" in data:
            out["cutoff"] = int(data["cutoff"])
        return out
    if kind == "custom":
        vals = _get(data, "values", where)
        if not isinstance(vals, dict):
            raise ConfigParseError(f"{where}.values", "expected an object keyed by offset")
        out = {}
        for key, v in vals.items():
            try:
                off = int(key)
            except ValueError as exc:
                raise ConfigParseError(f"{where}.values", f"offset {key!r} is not an integer") from exc
            out[off] = _complex(v, f"{where}.values.{key}")
        return {"kind": "custom", "values": out}
    raise ConfigParseError(f"{where}.kind", f"unknown coupling kind {kind!r}")


def _encode_coupling(J: dict) -> dict:
    if J["kind"] == "custom":
        return {"kind": "custom", "values": {str(k): [v.real, v.imag] for k, v in sorted(J["values"].items())}}
    return dict(J)


def _coupling(J: dict) -> CouplingProfile:
    if J["kind"] == "onsite":
        return CouplingProfile.onsite(J["lambda"])
    if J["kind"] == "geometric":
        kw = {"cutoff": J["cutoff"]} if "cutoff" in J else {}
        return CouplingProfile.geometric(J["lambda"], J["q"], **kw)
    return CouplingProfile.custom(J["values"])


def parse_config(text: str) -> ModelConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    return ModelConfig.from_dict(data)


def load_config(path: str) -> ModelConfig:
    """Read a model file; ``builtin:<name>`` selects a bundled scenario."""
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        try:
            text = resources.files("qfluct").joinpath("configs", f"{name}.json").read_text()
        except FileNotFoundError as exc:
            raise ConfigError(f"no bundled config named {name!r}") from exc
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)
