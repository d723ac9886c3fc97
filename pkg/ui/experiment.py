import json
import os
from dataclasses import dataclass, field
from typing import List, Optional

from core.analysis import default_grid
from core.generators import GeneratorPair
from core.signals import rasterize, region_from_descriptor
from core.transform import BendletTransform, QuadratureSpec
from utils.config import Config
from utils.errors import ConfigurationError, SchemaError
from utils.logger import Logger

EXPERIMENT_SCHEMA = "bendlab.experiment.v1"


def _default_signal():
    return {"type": "disk", "center": [0.0, 0.0], "radius": 0.25}


def _default_generator():
    cfg = Config().get('generator')
    return {"wavelet": {"M": cfg.get('vanishing_moments', 8), "depth": cfg.get('cascade_depth', 10)},
            "window": {"order": cfg.get('window_order', 11)}}


def _default_grid(axis):
    cfg = Config().get('analysis')
    return {"min": cfg.get(f'{axis}_min'), "max": cfg.get(f'{axis}_max'), "step": cfg.get(f'{axis}_step')}


def _grid_values(spec, name):
    if isinstance(spec, list):
        if not spec:
            raise ConfigurationError(f"{name} grid must be non-empty")
        return [float(v) for v in spec]
    try:
        return [float(v) for v in default_grid(float(spec["min"]), float(spec["max"]), float(spec["step"]))]
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"invalid {name} grid {spec!r}: {e}") from e


@dataclass
class ExperimentConfig:
    """Everything a command needs to reproduce a run"""

    signal: dict = field(default_factory=_default_signal)
    generator: dict = field(default_factory=_default_generator)
    alpha: float = field(default_factory=lambda: Config().get('transform', 'alpha', 0.335))
    j_min: int = field(default_factory=lambda: Config().get('transform', 'j_min', 4))
    j_max: int = field(default_factory=lambda: Config().get('transform', 'j_max', 8))
    s_grid: object = field(default_factory=lambda: _default_grid('s'))
    b_grid: object = field(default_factory=lambda: _default_grid('b'))
    quadrature: dict = field(default_factory=lambda: QuadratureSpec.from_config().to_dict())
    points: List[List[float]] = field(default_factory=list)
    radii: List[float] = field(default_factory=lambda: [0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45])
    out: Optional[str] = None
    seed: int = 0
    threads: Optional[int] = None
    supersample: bool = False

    FIELDS = ("signal", "generator", "alpha", "j_min", "j_max", "s_grid", "b_grid", "quadrature",
              "points", "radii", "out", "seed", "threads", "supersample")

    def to_dict(self):
        data = {"schema": EXPERIMENT_SCHEMA}
        for name in self.FIELDS:
            data[name] = getattr(self, name)
        return data

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("experiment config must be a JSON object")
        schema = data.get("schema", EXPERIMENT_SCHEMA)
        if schema != EXPERIMENT_SCHEMA:
            raise SchemaError(f"expected experiment schema {EXPERIMENT_SCHEMA!r}, found {schema!r}")
        unknown = set(data) - set(cls.FIELDS) - {"schema"}
        if unknown:
            raise ConfigurationError(f"unknown experiment fields: {sorted(unknown)}")
        config = cls(**{k: v for k, v in data.items() if k != "schema"})
        config.validate()
        return config

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except ValueError as e:
            raise ConfigurationError(f"experiment config is not valid JSON: {e}") from e
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        logger = Logger().get_logger('experiment')
        if not os.path.exists(path):
            raise ConfigurationError(f"experiment config not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            config = cls.from_json(f.read())
        logger.info(f"Loaded experiment config from {path}")
        return config

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_json())

    def validate(self):
        self.alpha = float(self.alpha)
        self.j_min = int(self.j_min)
        self.j_max = int(self.j_max)
        self.seed = int(self.seed)
        if self.j_min >= self.j_max:
            raise ConfigurationError(f"j_min must be smaller than j_max, got {self.j_min} >= {self.j_max}")
        self.quadrature_spec()
        self.s_values()
        self.b_values()
        return self

    def s_values(self):
        return _grid_values(self.s_grid, "s")

    def b_values(self):
        return _grid_values(self.b_grid, "b")

    def quadrature_spec(self):
        try:
            return QuadratureSpec(**self.quadrature)
        except TypeError as e:
            raise ConfigurationError(f"invalid quadrature settings {self.quadrature!r}: {e}") from e

    def build_signal(self):
        """Analytic descriptors with a ``resolution`` key are rasterized at that size"""
        signal = region_from_descriptor(self.signal)
        resolution = self.signal.get("resolution")
        if resolution is not None and signal.pixel_size is None:
            signal = rasterize(signal, int(resolution), supersample=bool(self.supersample))
        return signal

    def build_generator(self):
        return GeneratorPair.from_descriptor(self.generator)

    def build_transform(self):
        return BendletTransform(self.build_generator(), self.alpha, self.quadrature_spec(), threads=self.threads)
