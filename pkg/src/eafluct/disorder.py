"""Quenched coupling realizations: sampling, local modification, translation.

Streams are counter-based (Philox keyed by master seed, realization index
and a purpose tag), so ensembles can be evaluated in any order, on any
number of workers, and still reproduce bit-identically.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from typing import Mapping, Union

import numpy as np

from .errors import (
    IncompleteAssignmentError,
    ContainmentError,
    UndeclaredEdgeError,
    UnsupportedOperationError,
)
from .lattice import Edge, EdgeSet, Region, interior_edges, translate_edge


class _Zero:
    """Sentinel: assign zero to every edge of a block."""

    def __repr__(self) -> str:  # pragma: no cover
        return "ZERO"


ZERO = _Zero()


@dataclass(frozen=True)
class Gaussian:
    """Normal coupling distribution (continuous, all moments finite)."""

    mean: float = 0.0
    stddev: float = 1.0

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValueError(f"stddev must be > 0, got {self.stddev}")

    @property
    def abs_first_moment(self) -> float:
        m, s = self.mean, self.stddev
        return s * math.sqrt(2.0 / math.pi) * math.exp(-m * m / (2 * s * s)) + m * math.erf(
            m / (s * math.sqrt(2.0))
        )

    @property
    def second_moment(self) -> float:
        return self.mean**2 + self.stddev**2

    @property
    def fourth_moment(self) -> float:
        m, s = self.mean, self.stddev
        return m**4 + 6 * m**2 * s**2 + 3 * s**4

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mean, self.stddev, size=n)

    def label(self) -> str:
        return f"gaussian({self.mean},{self.stddev})"


@dataclass(frozen=True)
class Uniform:
    """Uniform coupling distribution on (lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got ({self.lo}, {self.hi})")

    @property
    def abs_first_moment(self) -> float:
        lo, hi = self.lo, self.hi
        if lo >= 0:
            return (lo + hi) / 2.0
        if hi <= 0:
            return -(lo + hi) / 2.0
        return (hi * hi + lo * lo) / (2.0 * (hi - lo))

    @property
    def second_moment(self) -> float:
        lo, hi = self.lo, self.hi
        return (hi**2 + hi * lo + lo**2) / 3.0

    @property
    def fourth_moment(self) -> float:
        lo, hi = self.lo, self.hi
        return (hi**5 - lo**5) / (5.0 * (hi - lo))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)

    def label(self) -> str:
        return f"uniform({self.lo},{self.hi})"


CouplingDistribution = Union[Gaussian, Uniform]


def distribution_from_label(label: str) -> CouplingDistribution:
    kind, _, args = label.partition("(")
    a, b = (float(x) for x in args.rstrip(")").split(","))
    if kind == "gaussian":
        return Gaussian(a, b)
    if kind == "uniform":
        return Uniform(a, b)
    raise ValueError(f"unknown distribution label {label!r}")


@dataclass(frozen=True)
class SeedSpec:
    """Identifies one reproducible random stream.

    Distinct (master, realization, purpose) triples give statistically
    independent streams; an identical triple reproduces the identical
    stream on any rerun, regardless of what else was drawn in between.
    """

    master: int
    realization: int = 0
    purpose: str = ""

    def __post_init__(self):
        if not 0 <= self.master < 2**64:
            raise ValueError("master seed must be a 64-bit non-negative integer")
        if not 0 <= self.realization < 2**64:
            raise ValueError("realization index must be a 64-bit non-negative integer")

    def derive(self, realization: int | None = None, purpose: str | None = None) -> "SeedSpec":
        return replace(
            self,
            realization=self.realization if realization is None else realization,
            purpose=self.purpose if purpose is None else purpose,
        )

    def rng(self) -> np.random.Generator:
        digest = hashlib.sha256(self.purpose.encode("utf-8")).digest()
        p0 = int.from_bytes(digest[:4], "little")
        p1 = int.from_bytes(digest[4:8], "little")
        key = (
            self.realization & 0xFFFFFFFF,
            self.realization >> 32,
            p0,
            p1,
        )
        seq = np.random.SeedSequence(entropy=self.master, spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))

    def to_record(self) -> dict:
        return {"master": self.master, "realization": self.realization, "purpose": self.purpose}


@dataclass(frozen=True)
class Provenance:
    distribution: str = ""
    seed: SeedSpec | None = None
    note: str = ""


@dataclass(frozen=True, eq=False)
class CouplingConfig:
    """One realization J: a real coupling per edge of a declared edge set.

    ``values`` is aligned to the edge set's canonical order and is
    immutable; modifications return new configs.
    """

    edge_set: EdgeSet
    values: np.ndarray
    provenance: Provenance = Provenance()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (len(self.edge_set),):
            raise ValueError(
                f"expected {len(self.edge_set)} coupling values, got shape {values.shape}"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def value(self, edge: Edge) -> float:
        try:
            return float(self.values[self.edge_set.position[edge]])
        except KeyError:
            raise UndeclaredEdgeError(f"edge {edge} carries no coupling") from None

    def as_dict(self) -> dict[Edge, float]:
        return {e: float(v) for e, v in zip(self.edge_set, self.values)}

    def values_equal(self, other: "CouplingConfig") -> bool:
        return self.edge_set.edges == other.edge_set.edges and np.array_equal(
            self.values, other.values
        )

    def with_values(self, values: np.ndarray, note: str) -> "CouplingConfig":
        prov = replace(self.provenance, note=note)
        return CouplingConfig(self.edge_set, values, prov)


def sample_couplings(
    dist: CouplingDistribution, edges: EdgeSet, seed: SeedSpec
) -> CouplingConfig:
    """One i.i.d. draw per edge, in canonical edge order, deterministic in the seed."""
    values = dist.sample(seed.rng(), len(edges))
    return CouplingConfig(edges, values, Provenance(dist.label(), seed))


def set_block(
    config: CouplingConfig,
    block: Region,
    values: Union[Mapping[Edge, float], _Zero],
) -> CouplingConfig:
    """New config equal to ``config`` outside E(block), overwritten on E(block)."""
    block_edges = interior_edges(block)
    positions = []
    for e in block_edges:
        if e not in config.edge_set.position:
            raise ContainmentError(f"block edge {e} not declared in the coupling config")
        positions.append(config.edge_set.position[e])
    out = config.values.copy()
    if isinstance(values, _Zero):
        out[positions] = 0.0
        note = "set_block:zero"
    else:
        for e, pos in zip(block_edges, positions):
            if e not in values:
                raise IncompleteAssignmentError(f"no value supplied for block edge {e}")
            out[pos] = float(values[e])
        note = "set_block:values"
    return config.with_values(out, note)


def overlay(
    config: CouplingConfig, source: CouplingConfig, edges: tuple[Edge, ...]
) -> CouplingConfig:
    """New config equal to ``config`` except on ``edges``, copied from ``source``."""
    out = config.values.copy()
    for e in edges:
        if e not in config.edge_set.position:
            raise ContainmentError(f"edge {e} not declared in the coupling config")
        out[config.edge_set.position[e]] = source.values[source.edge_set.index(e)]
    return config.with_values(out, "overlay")


def translate_couplings(
    config: CouplingConfig, vector: tuple[int, ...]
) -> CouplingConfig:
    """(TJ)_{Te} = J_e on a fully wrapped region (only there is it a bijection)."""
    region = config.edge_set.region
    if not region.fully_wrapped:
        raise UnsupportedOperationError(
            "coupling translation is only defined on fully wrapped (torus) regions"
        )
    out = np.empty_like(config.values)
    for e, v in zip(config.edge_set, config.values):
        te = translate_edge(e, vector, region)
        out[config.edge_set.index(te)] = v
    return config.with_values(out, f"translated:{vector}")


def restrict(config: CouplingConfig, edges: EdgeSet) -> CouplingConfig:
    """Restriction of a config to a sub edge set (every target edge must be declared)."""
    pos = config.edge_set.position
    try:
        idx = np.fromiter((pos[e] for e in edges), dtype=np.intp, count=len(edges))
    except KeyError as err:
        raise UndeclaredEdgeError(f"edge {err.args[0]} carries no coupling") from None
    return CouplingConfig(
        edges, config.values[idx], replace(config.provenance, note="restricted")
    )


def dump_couplings(config: CouplingConfig, path) -> None:
    """Write one JSON record per edge; binary64 values round-trip exactly."""
    region = config.edge_set.region
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "region": {
                "extents": list(region.extents),
                "wrap": list(region.wrap),
                "origin": list(region.origin),
            },
            "distribution": config.provenance.distribution,
            "note": config.provenance.note,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for e, v in zip(config.edge_set, config.values):
            rec = {
                "x": list(e.x),
                "y": list(e.y),
                "orientation": e.axis,
                "wrap": e.wrap,
                "value": float(v),
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_couplings(path) -> CouplingConfig:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        region = Region(
            tuple(header["region"]["extents"]),
            tuple(header["region"]["wrap"]),
            tuple(header["region"]["origin"]),
        )
        edges, values = [], []
        for line in fh:
            rec = json.loads(line)
            edges.append(
                Edge(tuple(rec["x"]), tuple(rec["y"]), rec["orientation"], rec["wrap"])
            )
            values.append(rec["value"])
    edge_set = EdgeSet(region, tuple(edges))
    aligned = np.empty(len(edges))
    for e, v in zip(edges, values):
        aligned[edge_set.index(e)] = v
    return CouplingConfig(
        edge_set, aligned, Provenance(header.get("distribution", ""), None, "loaded")
    )
