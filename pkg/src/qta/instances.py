"""TSPLIB / Augerat instance parsing and the symmetric distance oracle."""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

# TSPLIB's reference implementation uses this truncated constant, not math.pi.
TSPLIB_PI = 3.141592
EARTH_RADIUS = 6378.388

BENCHMARKS = (
    "burma14",
    "ulysses16",
    "ulysses22",
    "wi29",
    "P-n16-k8",
    "P-n19-k2",
    "P-n23-k8",
)


class InstanceError(ValueError):
    pass


class ParseError(InstanceError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormatError(InstanceError):
    pass


class DegenerateInstanceError(InstanceError):
    pass


class InvalidTourError(ValueError):
    pass


class DegenerateTourError(InvalidTourError):
    pass


class DistanceMode(str, enum.Enum):
    TSPLIB_GEO = "geo"
    EUC2D_ROUND = "euc-round"
    EUC2D_REAL = "euc-real"


_DEFAULT_MODE = {"GEO": DistanceMode.TSPLIB_GEO, "EUC_2D": DistanceMode.EUC2D_REAL}


@dataclass(frozen=True, eq=False)
class Instance:
    name: str
    coords: np.ndarray
    distance_mode: DistanceMode
    dist: np.ndarray
    ignored: tuple = field(default=())

    @property
    def n_cities(self) -> int:
        return len(self.coords)

    def __repr__(self) -> str:
        return f"Instance({self.name!r}, N={self.n_cities}, {self.distance_mode.name})"


def _geo_radians(x: np.ndarray) -> np.ndarray:
    deg = np.trunc(x)
    minutes = x - deg
    return TSPLIB_PI * (deg + 5.0 * minutes / 3.0) / 180.0


def distance_matrix(coords: np.ndarray, mode: DistanceMode) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    if mode is DistanceMode.TSPLIB_GEO:
        lat = _geo_radians(coords[:, 0])
        lon = _geo_radians(coords[:, 1])
        q1 = np.cos(lon[:, None] - lon[None, :])
        q2 = np.cos(lat[:, None] - lat[None, :])
        q3 = np.cos(lat[:, None] + lat[None, :])
        arg = 0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)
        d = np.floor(EARTH_RADIUS * np.arccos(np.clip(arg, -1.0, 1.0)) + 1.0)
    else:
        diff = coords[:, None, :] - coords[None, :, :]
        d = np.sqrt((diff ** 2).sum(axis=-1))
        if mode is DistanceMode.EUC2D_ROUND:
            d = np.floor(d + 0.5)
    # the GEO formula gives 1 on the diagonal; TSPLIB never queries it
    np.fill_diagonal(d, 0.0)
    # arccos/cos rounding can break symmetry in the last ulp
    d = np.minimum(d, d.T)
    return d


def make_instance(name: str, coords, mode: DistanceMode, ignored: Iterable[str] = ()) -> Instance:
    coords = np.array(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise InstanceError("coordinates must be an (N, 2) array")
    if len(coords) < 3:
        raise DegenerateInstanceError(f"{name}: need at least 3 cities, got {len(coords)}")
    mode = DistanceMode(mode)
    dist = distance_matrix(coords, mode)
    coords.setflags(write=False)
    dist.setflags(write=False)
    return Instance(name, coords, mode, dist, tuple(ignored))


def parse_instance(path, mode_override: Optional[DistanceMode] = None) -> Instance:
    """Read a TSPLIB ``.tsp`` or Augerat ``.vrp`` file.

    CVRP data (capacity, demands, depots) is dropped; the names of the
    discarded entries end up in ``Instance.ignored``.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    header = {}
    nodes = {}
    ignored = []
    section = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if line.endswith("_SECTION"):
            section = line
            if section == "EDGE_WEIGHT_SECTION":
                raise UnsupportedFormatError("explicit EDGE_WEIGHT_SECTION is not supported")
            if section != "NODE_COORD_SECTION":
                ignored.append(section)
            continue
        if ":" in line and not line[0].isdigit() and not line[0] == "-":
            key, _, value = line.partition(":")
            key = key.strip().upper()
            header[key] = value.strip()
            if key in ("CAPACITY", "DISTANCE", "VEHICLES"):
                ignored.append(key)
            section = None
            continue
        if section == "NODE_COORD_SECTION":
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 'id x y', got {line!r}", lineno)
            try:
                node_id = int(parts[0])
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"malformed coordinate entry {line!r}", lineno) from None
            if node_id in nodes:
                raise ParseError(f"duplicate node id {node_id}", lineno)
            nodes[node_id] = (x, y)
        elif section is not None:
            continue
        else:
            raise ParseError(f"unexpected content {line!r}", lineno)

    ewt = header.get("EDGE_WEIGHT_TYPE")
    if ewt not in _DEFAULT_MODE:
        raise UnsupportedFormatError(f"unsupported EDGE_WEIGHT_TYPE {ewt!r}")
    if not nodes:
        raise ParseError("missing NODE_COORD_SECTION")
    ids = sorted(nodes)
    if ids != list(range(ids[0], ids[0] + len(ids))):
        raise ParseError("node ids are not contiguous")
    if "DIMENSION" in header:
        try:
            dim = int(header["DIMENSION"])
        except ValueError:
            raise ParseError(f"bad DIMENSION {header['DIMENSION']!r}") from None
        if dim != len(nodes):
            raise ParseError(f"DIMENSION is {dim} but {len(nodes)} coordinates were read")
    coords = [nodes[i] for i in ids]
    mode = DistanceMode(mode_override) if mode_override is not None else _DEFAULT_MODE[ewt]
    if ewt == "EUC_2D" and mode is DistanceMode.TSPLIB_GEO:
        raise UnsupportedFormatError("GEO distances need latitude/longitude input")
    name = header.get("NAME", path.stem).removesuffix(".tsp")
    return make_instance(name, coords, mode, ignored)


def benchmark_path(name: str) -> Path:
    """Locate a benchmark file: bundled data first, then ``$QTA_DATA_DIR``."""
    candidates = [f"{name}.tsp", f"{name}.vrp"]
    data = resources.files("qta") / "data"
    for fname in candidates:
        entry = data / fname
        if entry.is_file():
            return Path(str(entry))
    extra = os.environ.get("QTA_DATA_DIR")
    if extra:
        for fname in candidates:
            p = Path(extra) / fname
            if p.is_file():
                return p
    raise FileNotFoundError(
        f"benchmark {name!r} is not bundled; put {name}.tsp/.vrp in $QTA_DATA_DIR"
    )


def available_benchmarks() -> list:
    out = []
    for name in BENCHMARKS:
        try:
            benchmark_path(name)
        except FileNotFoundError:
            continue
        out.append(name)
    return out


def load_instance(source: str, mode: Optional[DistanceMode] = None) -> Instance:
    """Accept either a file path or a benchmark name."""
    p = Path(source)
    if p.suffix in (".tsp", ".vrp") or p.exists():
        return parse_instance(p, mode)
    return parse_instance(benchmark_path(source), mode)


def distance(inst: Instance, i: int, j: int) -> float:
    n = inst.n_cities
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"city index out of range for N={n}: ({i}, {j})")
    return float(inst.dist[i, j])


def tour_cost(inst: Instance, tour: Sequence[int]) -> float:
    tour = list(tour)
    if len(set(tour)) != len(tour):
        raise InvalidTourError("tour repeats a city")
    if len(tour) < 3:
        raise DegenerateTourError("a tour needs at least 3 cities")
    n = inst.n_cities
    if any(not 0 <= c < n for c in tour):
        raise IndexError("city index out of range")
    idx = np.asarray(tour)
    return float(inst.dist[idx, np.roll(idx, -1)].sum())


def canonical_tour(tour: Sequence[int]) -> tuple:
    """Rotate to start at the smallest city, orient so the second city is smaller than the last."""
    tour = list(tour)
    k = tour.index(min(tour))
    t = tour[k:] + tour[:k]
    if len(t) > 2 and t[-1] < t[1]:
        t = [t[0]] + t[1:][::-1]
    return tuple(t)
