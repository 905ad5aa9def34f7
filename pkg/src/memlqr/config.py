"""JSON run configuration.

Schema (all keys optional unless marked)::

    {
      "domain": "Interval01" | "UnitSquare",          # required
      "eta": float, "kappa": float, "omega": float,   # required
      "q_weight": float,                              # default 1
      "r_matrix": [[...]],                            # default identity(m)
      "inputs": [{"boxes": [{"box": [[lo, hi], ...], "amplitude": a}]}],  # required
      "n": int,                                       # basis size for solve/simulate
      "n_list": [int, ...],                           # strictly increasing, for sweep
      "expensive_n_list": [int, ...],
      "eval_n": int, "expensive_eval_n": int,         # size of the evaluation system
      "max_index": int,                               # mode enumeration bound
      "reference_unstable_count": int,                # externally quoted count to compare
      "initial_state": {"y": float | shape, "z": 0},
      "simulation": {"T": float, "closed_T": float, "dt": float,
                     "save_every": int, "fit_window": [t1, t2]},
      "solver": {"tol": float, "max_iter": int, "max_refine": int}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from memlqr.errors import InvalidConstant
from memlqr.model import DomainSpec, InputShape, ModelParams, validate


def parse_shape(obj) -> InputShape:
    boxes = []
    for entry in obj.get("boxes", []):
        box = tuple(tuple(float(v) for v in iv) for iv in entry["box"])
        boxes.append((box, float(entry["amplitude"])))
    return InputShape(tuple(boxes))


def _parse_state_component(value):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, dict):
        return parse_shape(value)
    raise InvalidConstant(f"unsupported initial state component {value!r}")


@dataclass
class RunConfig:
    params: ModelParams
    domain: DomainSpec
    shapes: list
    n: int = 10
    n_list: list = field(default_factory=list)
    expensive_n_list: list = field(default_factory=list)
    eval_n: int | None = None
    expensive_eval_n: int | None = None
    max_index: int | None = None
    reference_unstable_count: int | None = None
    initial_y: object = None
    initial_z: object = None
    simulation: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    expensive: bool = False

    @property
    def active_n_list(self) -> list:
        if self.expensive and self.expensive_n_list:
            return list(self.expensive_n_list)
        return list(self.n_list)

    @property
    def active_eval_n(self) -> int | None:
        if self.expensive and self.expensive_eval_n:
            return self.expensive_eval_n
        return self.eval_n

    @classmethod
    def from_dict(cls, raw: dict, expensive: bool = False) -> "RunConfig":
        try:
            domain = DomainSpec.parse(raw["domain"])
            shapes = [parse_shape(s) for s in raw["inputs"]]
            m = len(shapes)
            r = raw.get("r_matrix", np.eye(m).tolist())
            params = ModelParams(
                eta=float(raw["eta"]),
                kappa=float(raw["kappa"]),
                omega=float(raw["omega"]),
                q_weight=float(raw.get("q_weight", 1.0)),
                r_matrix=np.array(r, dtype=float),
            )
        except KeyError as exc:
            raise InvalidConstant(f"missing config key {exc}") from None
        except (TypeError, ValueError) as exc:
            raise InvalidConstant(f"malformed config: {exc}") from None
        if params.r_matrix.shape != (m, m):
            raise InvalidConstant(f"R is {params.r_matrix.shape}, but {m} inputs are configured")
        validate(params)
        for s in shapes:
            s.check(domain)
        init = raw.get("initial_state", {})
        cfg = cls(
            params=params,
            domain=domain,
            shapes=shapes,
            n=int(raw.get("n", 10)),
            n_list=[int(v) for v in raw.get("n_list", [])],
            expensive_n_list=[int(v) for v in raw.get("expensive_n_list", [])],
            eval_n=raw.get("eval_n"),
            expensive_eval_n=raw.get("expensive_eval_n"),
            max_index=raw.get("max_index"),
            reference_unstable_count=raw.get("reference_unstable_count"),
            initial_y=_parse_state_component(init.get("y")),
            initial_z=_parse_state_component(init.get("z")),
            simulation=dict(raw.get("simulation", {})),
            solver=dict(raw.get("solver", {})),
            expensive=expensive,
        )
        for lst in (cfg.n_list, cfg.expensive_n_list):
            if any(b <= a for a, b in zip(lst, lst[1:])):
                raise InvalidConstant(f"n-list must be strictly increasing, got {lst}")
        if cfg.initial_z not in (None, 0.0):
            raise InvalidConstant("only z = 0 initial histories are supported in configs")
        cfg.initial_z = None
        return cfg

    @classmethod
    def load(cls, path, expensive: bool = False) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), expensive)


def load_preset(name: str) -> dict:
    text = resources.files("memlqr.presets").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def preset_names() -> list:
    return sorted(Path(p.name).stem for p in resources.files("memlqr.presets").iterdir()
                  if p.name.endswith(".json"))
