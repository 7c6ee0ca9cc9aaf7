"""Protocol files: YAML documents with plain-text matrix blocks.

Grammar (see ``docs/protocol_format.md``)::

    dim: 2
    observables:
      X: pauli_x                 # builtin: pauli_x | pauli_y | pauli_z | identity
      M:                         # inline operator
        matrix: |
          2
          1.0+0.0i 0.0+0.0i
          0.0+0.0i -1.0+0.0i
        labels: [down, up]       # optional, ascending eigenvalue order
    pre: [Z, z+]
    intermediates: [X, Y]
    post: [Z, z-]
    initial_state: |             # optional vector block; default |a>
      2
      1.0+0.0i 0.0+0.0i
    uncertainty: [X, Y]          # optional, for the uncertainty command
    mc: {n_trials: 10000, seed: 7}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np
import yaml

from . import complexla as la
from . import qcore
from .ablengine import Protocol, ProtocolError

BUNDLED = ("spin_zxyz.protocol", "aad_xx.protocol", "aad_zz.protocol")


class ProtocolFileError(ValueError):
    pass


@dataclass
class ObservableSpec:
    builtin: Optional[str] = None
    matrix: Optional[np.ndarray] = None
    labels: Optional[tuple[str, ...]] = None

    def __eq__(self, other):
        if not isinstance(other, ObservableSpec):
            return NotImplemented
        if self.builtin != other.builtin or self.labels != other.labels:
            return False
        if (self.matrix is None) != (other.matrix is None):
            return False
        return self.matrix is None or np.array_equal(self.matrix, other.matrix)


@dataclass
class ProtocolFile:
    dim: int
    observables: dict[str, ObservableSpec]
    pre: Optional[tuple[str, str]] = None
    intermediates: list[str] = field(default_factory=list)
    post: Optional[tuple[str, str]] = None
    initial_state: Optional[np.ndarray] = None
    uncertainty: Optional[tuple[str, str]] = None
    mc: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, ProtocolFile):
            return NotImplemented
        same_state = (self.initial_state is None and other.initial_state is None) or (
            self.initial_state is not None
            and other.initial_state is not None
            and np.array_equal(self.initial_state, other.initial_state)
        )
        return (
            self.dim == other.dim
            and self.observables == other.observables
            and self.pre == other.pre
            and self.intermediates == other.intermediates
            and self.post == other.post
            and self.uncertainty == other.uncertainty
            and self.mc == other.mc
            and same_state
        )

    # -- resolution -----------------------------------------------------------

    def observable(self, name: str) -> qcore.Observable:
        if name not in self.observables:
            raise ProtocolFileError(f"unknown observable {name!r}; defined: {sorted(self.observables)}")
        spec = self.observables[name]
        if spec.builtin is not None:
            obs = qcore.builtin_observable(spec.builtin, self.dim, name=name)
        else:
            obs = qcore.observable_from_operator(spec.matrix, labels=spec.labels, name=name)
        if obs.dim != self.dim:
            raise ProtocolFileError(f"observable {name!r} has dim {obs.dim}, file declares dim {self.dim}")
        return obs

    def state(self) -> Optional[qcore.QuantumState]:
        if self.initial_state is None:
            return None
        if self.initial_state.shape[0] != self.dim:
            raise ProtocolFileError(f"initial_state has dim {self.initial_state.shape[0]}, file declares dim {self.dim}")
        return qcore.pure_state(self.initial_state)

    def to_protocol(self) -> Protocol:
        if self.pre is None or self.post is None:
            raise ProtocolFileError("protocol needs both 'pre' and 'post'")
        cache: dict[str, qcore.Observable] = {}

        def get(name):
            if name not in cache:
                cache[name] = self.observable(name)
            return cache[name]

        return Protocol(
            get(self.pre[0]),
            self.pre[1],
            tuple(get(n) for n in self.intermediates),
            get(self.post[0]),
            self.post[1],
            self.state(),
        )

    # -- serialisation ----------------------------------------------------------

    def to_yaml_dict(self) -> dict:
        obs = {}
        for name, spec in self.observables.items():
            if spec.builtin is not None:
                obs[name] = spec.builtin
            else:
                entry = {"matrix": _Block(la.format_matrix(spec.matrix))}
                if spec.labels is not None:
                    entry["labels"] = list(spec.labels)
                obs[name] = entry
        d: dict = {"dim": self.dim, "observables": obs}
        if self.pre is not None:
            d["pre"] = list(self.pre)
        d["intermediates"] = list(self.intermediates)
        if self.post is not None:
            d["post"] = list(self.post)
        if self.initial_state is not None:
            d["initial_state"] = _Block(la.format_vector(self.initial_state))
        if self.uncertainty is not None:
            d["uncertainty"] = list(self.uncertainty)
        if self.mc:
            d["mc"] = dict(self.mc)
        return d

    def dumps(self) -> str:
        return yaml.dump(self.to_yaml_dict(), Dumper=_Dumper, sort_keys=False, default_flow_style=None)


class _Block(str):
    pass


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(_Block, lambda d, s: d.represent_scalar("tag:yaml.org,2002:str", str(s), style="|"))


def _pair(value, key: str) -> tuple[str, str]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ProtocolFileError(f"'{key}' must be a two-item list [observable, outcome]")
    return str(value[0]), str(value[1])


def loads(text: str) -> ProtocolFile:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ProtocolFileError(f"malformed protocol file: {exc}") from None
    if not isinstance(doc, dict):
        raise ProtocolFileError("protocol file must be a mapping")
    unknown = set(doc) - {"dim", "observables", "pre", "intermediates", "post", "initial_state", "uncertainty", "mc"}
    if unknown:
        raise ProtocolFileError(f"unknown keys: {sorted(unknown)}")
    try:
        dim = int(doc["dim"])
    except (KeyError, TypeError, ValueError):
        raise ProtocolFileError("'dim' must be a positive integer") from None
    if dim < 1:
        raise ProtocolFileError("'dim' must be a positive integer")
    specs = {}
    for name, raw in (doc.get("observables") or {}).items():
        name = str(name)
        if isinstance(raw, str):
            if raw not in qcore.BUILTINS:
                raise ProtocolFileError(f"observable {name!r}: unknown builtin {raw!r}")
            specs[name] = ObservableSpec(builtin=raw)
        elif isinstance(raw, dict) and "matrix" in raw:
            try:
                m = la.parse_matrix(str(raw["matrix"]))
            except ValueError as exc:
                raise ProtocolFileError(f"observable {name!r}: {exc}") from None
            labels = raw.get("labels")
            specs[name] = ObservableSpec(matrix=m, labels=None if labels is None else tuple(str(x) for x in labels))
        else:
            raise ProtocolFileError(f"observable {name!r} must be a builtin name or a mapping with 'matrix'")
    pf = ProtocolFile(dim=dim, observables=specs)
    if "pre" in doc:
        pf.pre = _pair(doc["pre"], "pre")
    if "post" in doc:
        pf.post = _pair(doc["post"], "post")
    inter = doc.get("intermediates") or []
    if not isinstance(inter, list):
        raise ProtocolFileError("'intermediates' must be a list of observable names")
    pf.intermediates = [str(x) for x in inter]
    if doc.get("initial_state") is not None:
        try:
            pf.initial_state = la.parse_vector(str(doc["initial_state"]))
        except ValueError as exc:
            raise ProtocolFileError(f"initial_state: {exc}") from None
    if "uncertainty" in doc:
        pf.uncertainty = _pair(doc["uncertainty"], "uncertainty")
    mc = doc.get("mc") or {}
    if not isinstance(mc, dict) or set(mc) - {"n_trials", "seed"}:
        raise ProtocolFileError("'mc' may only hold n_trials and seed")
    pf.mc = {k: int(v) for k, v in mc.items()}
    for name in [*(pf.intermediates), *(x[0] for x in (pf.pre, pf.post, ) if x), *(pf.uncertainty or ())]:
        if name not in specs:
            raise ProtocolFileError(f"reference to undefined observable {name!r}")
    return pf


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("abl_lab").joinpath("protocols", name)))


def load(path: Union[str, Path]) -> ProtocolFile:
    """Read a protocol file; a bare bundled name such as ``spin_zxyz.protocol`` also works."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        p = bundled_path(str(path))
    if not p.exists():
        raise ProtocolFileError(f"no such protocol file: {path}")
    return loads(p.read_text())


def load_protocol(path: Union[str, Path]) -> Protocol:
    try:
        return load(path).to_protocol()
    except ProtocolError as exc:
        raise ProtocolFileError(str(exc)) from None
