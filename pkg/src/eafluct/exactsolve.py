"""Exact finite-volume Gibbs machinery.

Two independent partition-function engines over the same spec:

* exhaustive enumeration (any dimension, capped spin count): the oracle;
* a 2d column-to-column transfer matrix (capped strip width): the workhorse.

Both work in log domain with running max extraction, so large beta and wide
strips do not overflow.  Boundary conditions: free, periodic, antiperiodic
(seam bonds sign-flipped, per wrapped axis), and fixed (clamped ghost sites
just outside the region, attached by their own sampled couplings).  Fixed
boundary terms enter the Gibbs weights but are not part of the window
Hamiltonian reported by :func:`energy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Union

import numpy as np

from .disorder import CouplingConfig, restrict
from .errors import (
    ContainmentError,
    CoverageError,
    IncompleteAssignmentError,
    SizeCapError,
    UnsupportedOperationError,
)
from .lattice import (
    Edge,
    EdgeSet,
    Region,
    Site,
    boundary_edges,
    ghost_sites,
    grow,
    interior_edges,
    union,
)

ENUM_CAP = 24
TRANSFER_WIDTH_CAP = 12
_CHUNK_BITS = 20


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class BoundaryCondition:
    """Coupling-independent boundary condition for a finite box.

    kinds: ``free`` (open box), ``periodic`` (torus), ``antiperiodic``
    (torus with the wrap bonds of each seam axis sign-flipped; several seam
    axes give the doubled antiperiodic variants), ``fixed`` (open box with
    every adjacent ghost site clamped to +-1).
    """

    kind: str
    seam_axes: tuple[int, ...] = ()
    fixed_spins: tuple[tuple[Site, int], ...] = ()

    def __post_init__(self):
        if self.kind not in ("free", "periodic", "antiperiodic", "fixed"):
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")
        if self.kind == "antiperiodic" and not self.seam_axes:
            raise ValueError("antiperiodic boundary condition needs at least one seam axis")
        if self.kind != "antiperiodic" and self.seam_axes:
            raise ValueError("seam axes only apply to antiperiodic boundary conditions")
        if self.kind != "fixed" and self.fixed_spins:
            raise ValueError("fixed spin assignments only apply to fixed boundary conditions")
        if any(v not in (-1, 1) for _, v in self.fixed_spins):
            raise ValueError("fixed boundary spins must be +-1")
        object.__setattr__(self, "fixed_spins", tuple(sorted(self.fixed_spins)))

    def validate_for(self, region: Region) -> None:
        if self.kind == "free" and not region.fully_open:
            raise UnsupportedOperationError("free boundary condition needs a fully open region")
        if self.kind in ("periodic", "antiperiodic") and not region.fully_wrapped:
            raise UnsupportedOperationError(
                f"{self.kind} boundary condition needs a fully wrapped region"
            )
        if self.kind == "antiperiodic":
            for a in self.seam_axes:
                if not 0 <= a < region.dimension or not region.wrap[a]:
                    raise UnsupportedOperationError(f"seam axis {a} is not a wrapped axis")
        if self.kind == "fixed":
            if not region.fully_open:
                raise UnsupportedOperationError(
                    "fixed boundary condition needs a fully open region"
                )
            expected = set(ghost_sites(region))
            got = {s for s, _ in self.fixed_spins}
            if got != expected:
                raise CoverageError(
                    "fixed assignments must cover exactly the clamped sites adjacent to the region"
                )

    @property
    def label(self) -> str:
        if self.kind == "antiperiodic":
            axes = ",".join(str(a) for a in self.seam_axes)
            return f"antiperiodic[seam={axes}]"
        return self.kind

    def fixed_map(self) -> dict[Site, int]:
        return dict(self.fixed_spins)


def free_bc() -> BoundaryCondition:
    return BoundaryCondition("free")


def periodic_bc() -> BoundaryCondition:
    return BoundaryCondition("periodic")


def antiperiodic_bc(*seam_axes: int) -> BoundaryCondition:
    return BoundaryCondition("antiperiodic", seam_axes=tuple(seam_axes) or (0,))


def fixed_bc(spins: Mapping[Site, int]) -> BoundaryCondition:
    return BoundaryCondition("fixed", fixed_spins=tuple(spins.items()))


def uniform_fixed_bc(region: Region, sign: int = 1) -> BoundaryCondition:
    """All ghost sites clamped to the same spin."""
    return fixed_bc({s: sign for s in ghost_sites(region)})


@lru_cache(maxsize=None)
def required_edges(region: Region, bc: BoundaryCondition) -> EdgeSet:
    """All edges that carry a coupling for this (region, bc): interior plus,
    for fixed boundary conditions, the bonds to the clamped ghost ring."""
    inner = interior_edges(region)
    if bc.kind == "fixed":
        return union(inner, boundary_edges(region, grow(region, 1)))
    return inner


# ---------------------------------------------------------------------------
# spin configurations and specs


class SpinConfig(Mapping):
    """Immutable site -> spin (+-1) assignment."""

    __slots__ = ("_sites", "_index", "_values")

    def __init__(self, spins: Mapping[Site, int]):
        sites = tuple(sorted(spins))
        values = np.fromiter((spins[s] for s in sites), dtype=np.int8, count=len(sites))
        if np.any(np.abs(values) != 1):
            raise ValueError("spins must be +-1")
        self._sites = sites
        self._index = {s: k for k, s in enumerate(sites)}
        self._values = values

    @classmethod
    def _from_row(cls, sites: tuple[Site, ...], index: dict[Site, int], row: np.ndarray):
        obj = object.__new__(cls)
        obj._sites = sites
        obj._index = index
        obj._values = row
        return obj

    def __getitem__(self, site: Site) -> int:
        return int(self._values[self._index[site]])

    def __iter__(self):
        return iter(self._sites)

    def __len__(self) -> int:
        return len(self._sites)


def spin_config_for_region(region: Region, spins: Mapping[Site, int]) -> SpinConfig:
    if set(spins) != set(region.sites):
        raise CoverageError("spin configuration must cover exactly the region's sites")
    return SpinConfig(spins)


@dataclass(frozen=True)
class GibbsSpec:
    """A finite-volume Gibbs state proxy: (region, couplings, beta, bc).

    Couplings may be handed in on a superset of the required edges (for
    example a shared master realization); they are restricted to exactly
    ``required_edges(region, bc)`` at construction.
    """

    region: Region
    couplings: CouplingConfig
    beta: float
    bc: BoundaryCondition

    def __post_init__(self):
        beta = float(self.beta)
        if not (beta >= 0.0 and math.isfinite(beta)):
            raise ValueError(f"beta must be finite and >= 0, got {beta}")
        object.__setattr__(self, "beta", beta)
        self.bc.validate_for(self.region)
        needed = required_edges(self.region, self.bc)
        if self.couplings.edge_set.edges != needed.edges:
            object.__setattr__(self, "couplings", restrict(self.couplings, needed))

    @property
    def free_site_count(self) -> int:
        return self.region.n_sites

    def with_couplings(self, couplings: CouplingConfig) -> "GibbsSpec":
        return GibbsSpec(self.region, couplings, self.beta, self.bc)


# ---------------------------------------------------------------------------
# Hamiltonian


def energy(sigma: Mapping[Site, int], couplings: CouplingConfig, edges: EdgeSet) -> float:
    """H = -sum_e J_e sigma_x sigma_y, accumulated in canonical edge order."""
    h = 0.0
    for e in edges:
        try:
            sx = sigma[e.x]
            sy = sigma[e.y]
        except KeyError as err:
            raise CoverageError(f"spin configuration missing site {err.args[0]}") from None
        h -= couplings.value(e) * sx * sy
    return h


# ---------------------------------------------------------------------------
# shared solver plumbing


@lru_cache(maxsize=None)
def _site_order(region: Region) -> tuple[tuple[Site, ...], "dict[Site, int]"]:
    sites = region.sites
    return sites, {s: k for k, s in enumerate(sites)}


@dataclass(frozen=True)
class _EnumPlan:
    n: int
    bond_ix: np.ndarray
    bond_iy: np.ndarray
    bond_pos: np.ndarray
    bond_sign: np.ndarray
    ghost_site: np.ndarray
    ghost_pos: np.ndarray
    ghost_tau: np.ndarray


@lru_cache(maxsize=None)
def _enum_plan(region: Region, bc: BoundaryCondition) -> _EnumPlan:
    edges = required_edges(region, bc)
    _, index = _site_order(region)
    fixed = bc.fixed_map()
    bond_ix, bond_iy, bond_pos, bond_sign = [], [], [], []
    ghost_site, ghost_pos, ghost_tau = [], [], []
    for k, e in enumerate(edges):
        in_x, in_y = e.x in index, e.y in index
        if in_x and in_y:
            bond_ix.append(index[e.x])
            bond_iy.append(index[e.y])
            bond_pos.append(k)
            flip = e.wrap and bc.kind == "antiperiodic" and e.axis in bc.seam_axes
            bond_sign.append(-1.0 if flip else 1.0)
        else:
            inner, outer = (e.x, e.y) if in_x else (e.y, e.x)
            ghost_site.append(index[inner])
            ghost_pos.append(k)
            ghost_tau.append(float(fixed[outer]))
    return _EnumPlan(
        n=region.n_sites,
        bond_ix=np.asarray(bond_ix, dtype=np.intp),
        bond_iy=np.asarray(bond_iy, dtype=np.intp),
        bond_pos=np.asarray(bond_pos, dtype=np.intp),
        bond_sign=np.asarray(bond_sign, dtype=np.float64),
        ghost_site=np.asarray(ghost_site, dtype=np.intp),
        ghost_pos=np.asarray(ghost_pos, dtype=np.intp),
        ghost_tau=np.asarray(ghost_tau, dtype=np.float64),
    )


def _spin_chunk(start: int, stop: int, n: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.uint64)
    s = np.empty((stop - start, n), dtype=np.int8)
    one = np.uint64(1)
    for k in range(n):
        s[:, k] = 1 - 2 * ((idx >> np.uint64(k)) & one).astype(np.int8)
    return s


def _field_vector(
    plan: _EnumPlan, spec: GibbsSpec, extra_fields: Mapping[Site, float] | None
) -> np.ndarray:
    h = np.zeros(plan.n)
    if plan.ghost_site.size:
        np.add.at(h, plan.ghost_site, spec.couplings.values[plan.ghost_pos] * plan.ghost_tau)
    if extra_fields:
        _, index = _site_order(spec.region)
        for site, value in extra_fields.items():
            if site not in index:
                raise ContainmentError(f"field site {site} not in region")
            h[index[site]] += float(value)
    return h


Observable = Callable[[SpinConfig], float]
VectorObservable = Callable[[np.ndarray, tuple[Site, ...]], np.ndarray]


def _enum_reduce(
    spec: GibbsSpec,
    observables: list[VectorObservable],
    cap: int | None = None,
    extra_fields: Mapping[Site, float] | None = None,
) -> tuple[float, list[float]]:
    """Single enumeration pass: returns (log Z, [E[f] for each observable]).

    Weights are handled with a streaming running-max shift, so the result is
    exact up to binary64 rounding at any beta.
    """
    cap = ENUM_CAP if cap is None else cap
    plan = _enum_plan(spec.region, spec.bc)
    if plan.n > cap:
        raise SizeCapError(f"{plan.n} free spins exceed the enumeration cap {cap}")
    sites, _ = _site_order(spec.region)
    jv = spec.couplings.values[plan.bond_pos] * plan.bond_sign
    h = _field_vector(plan, spec, extra_fields)
    beta = spec.beta
    field_terms = [(k, hk) for k, hk in enumerate(h) if hk != 0.0]

    running_max = -np.inf
    s0 = 0.0
    sf = [0.0] * len(observables)
    total = 1 << plan.n
    step = 1 << _CHUNK_BITS
    for start in range(0, total, step):
        stop = min(start + step, total)
        s = _spin_chunk(start, stop, plan.n)
        expo = np.zeros(stop - start)
        for b in range(plan.bond_ix.size):
            expo += jv[b] * (s[:, plan.bond_ix[b]] * s[:, plan.bond_iy[b]])
        for k, hk in field_terms:
            expo += hk * s[:, k]
        expo *= beta
        mc = float(expo.max())
        w = np.exp(expo - mc)
        c0 = float(w.sum())
        cf = [float(np.dot(np.asarray(f(s, sites), dtype=np.float64), w)) for f in observables]
        if mc > running_max:
            scale = math.exp(running_max - mc) if running_max > -np.inf else 0.0
            s0 = s0 * scale + c0
            sf = [a * scale + b for a, b in zip(sf, cf)]
            running_max = mc
        else:
            scale = math.exp(mc - running_max)
            s0 += c0 * scale
            sf = [a + b * scale for a, b in zip(sf, cf)]
    return running_max + math.log(s0), [a / s0 for a in sf]


def log_partition_enum(
    spec: GibbsSpec,
    cap: int | None = None,
    extra_fields: Mapping[Site, float] | None = None,
) -> float:
    """log Z by exhaustive enumeration over all spin configurations."""
    logz, _ = _enum_reduce(spec, [], cap=cap, extra_fields=extra_fields)
    return logz


def _vectorize(observable: Observable) -> VectorObservable:
    def run(chunk: np.ndarray, sites: tuple[Site, ...]) -> np.ndarray:
        index = {s: k for k, s in enumerate(sites)}
        out = np.empty(chunk.shape[0])
        for r in range(chunk.shape[0]):
            out[r] = observable(SpinConfig._from_row(sites, index, chunk[r]))
        return out

    return run


def gibbs_expectation_enum(
    spec: GibbsSpec,
    observable: Union[Observable, VectorObservable],
    cap: int | None = None,
    vectorized: bool = False,
) -> float:
    """<f> under the spec's Gibbs measure, by enumeration.

    ``observable`` maps a :class:`SpinConfig` to a real; pass
    ``vectorized=True`` for the fast form ``f(spin_matrix, sites) -> array``
    used by the heavier identity checks.
    """
    f = observable if vectorized else _vectorize(observable)
    _, (value,) = _enum_reduce(spec, [f], cap=cap)
    return value


def exp_bond_observable(
    edges: EdgeSet | tuple[Edge, ...], values: Mapping[Edge, float], beta: float
) -> VectorObservable:
    """Vectorized observable exp(beta * sum_e v_e sigma_x sigma_y)."""
    pairs = [(e, float(values[e])) for e in edges]

    def run(chunk: np.ndarray, sites: tuple[Site, ...]) -> np.ndarray:
        index = {s: k for k, s in enumerate(sites)}
        acc = np.zeros(chunk.shape[0])
        for e, v in pairs:
            acc += v * (chunk[:, index[e.x]] * chunk[:, index[e.y]])
        return np.exp(beta * acc)

    return run


# ---------------------------------------------------------------------------
# 2d transfer matrix


@lru_cache(maxsize=None)
def _spin_matrix(w: int) -> np.ndarray:
    idx = np.arange(1 << w, dtype=np.uint64)
    s = np.empty((1 << w, w))
    one = np.uint64(1)
    for k in range(w):
        s[:, k] = 1.0 - 2.0 * ((idx >> np.uint64(k)) & one).astype(np.float64)
    return s


@dataclass(frozen=True, eq=False)
class _TransferPlan:
    t_axis: int
    l_axis: int
    width: int
    length: int
    wrap_l: bool
    v_pairs: tuple[tuple[int, int], ...]
    v_pos: np.ndarray  # (n_vbonds, length)
    v_sign: np.ndarray
    h_pos: np.ndarray  # (width, n_links)
    h_sign: np.ndarray
    ghost_rc: np.ndarray  # (n_ghost, 2) row, col
    ghost_pos: np.ndarray
    ghost_tau: np.ndarray
    s_matrix: np.ndarray  # (2^W, W)
    sp_matrix: np.ndarray  # (2^W, n_vbonds)


def _transfer_axes(region: Region, width_cap: int) -> tuple[int, int]:
    if region.dimension != 2:
        raise UnsupportedOperationError("transfer matrices are implemented for d = 2 only")
    candidates = [a for a in (1, 0) if region.extents[a] <= width_cap]
    if not candidates:
        raise SizeCapError(
            f"no axis of {region.extents} fits the transfer width cap {width_cap}"
        )
    t_axis = min(candidates, key=lambda a: (region.extents[a], -a))
    return t_axis, 1 - t_axis


@lru_cache(maxsize=None)
def _transfer_plan(region: Region, bc: BoundaryCondition, width_cap: int) -> _TransferPlan:
    t_axis, l_axis = _transfer_axes(region, width_cap)
    w = region.extents[t_axis]
    length = region.extents[l_axis]
    edges = required_edges(region, bc)
    fixed = bc.fixed_map()

    def site(c: int, r: int) -> Site:
        coords = [0, 0]
        coords[l_axis] = region.origin[l_axis] + c
        coords[t_axis] = region.origin[t_axis] + r
        return tuple(coords)

    def seam_sign(e: Edge) -> float:
        flip = e.wrap and bc.kind == "antiperiodic" and e.axis in bc.seam_axes
        return -1.0 if flip else 1.0

    # vertical bonds within a column (the wrap pair last, marked as seam bond)
    v_pairs = [(r, r + 1) for r in range(w - 1)]
    if region.wrap[t_axis] and w >= 2:
        v_pairs.append((w - 1, 0))
    v_pos = np.empty((len(v_pairs), length), dtype=np.intp)
    v_sign = np.empty((len(v_pairs), length))
    for c in range(length):
        for b, (r1, r2) in enumerate(v_pairs):
            x, y = sorted((site(c, r1), site(c, r2)))
            e = Edge(x, y, t_axis, wrap=r2 < r1)
            v_pos[b, c] = edges.index(e)
            v_sign[b, c] = seam_sign(e)

    # horizontal links between neighboring columns (seam link last if wrapped)
    wrap_l = region.wrap[l_axis] and length >= 2
    links = [(c, c + 1, False) for c in range(length - 1)]
    if wrap_l:
        links.append((length - 1, 0, True))
    h_pos = np.empty((w, len(links)), dtype=np.intp)
    h_sign = np.empty((w, len(links)))
    for j, (c1, c2, wrap) in enumerate(links):
        for r in range(w):
            x, y = sorted((site(c1, r), site(c2, r)))
            e = Edge(x, y, l_axis, wrap)
            h_pos[r, j] = edges.index(e)
            h_sign[r, j] = seam_sign(e)

    # clamped ghost contributions (fixed bc only)
    ghost_rc, ghost_pos, ghost_tau = [], [], []
    if bc.kind == "fixed":
        _, index = _site_order(region)
        for k, e in enumerate(edges):
            in_x, in_y = region.contains_site(e.x), region.contains_site(e.y)
            if in_x and in_y:
                continue
            inner, outer = (e.x, e.y) if in_x else (e.y, e.x)
            c = inner[l_axis] - region.origin[l_axis]
            r = inner[t_axis] - region.origin[t_axis]
            ghost_rc.append((r, c))
            ghost_pos.append(k)
            ghost_tau.append(float(fixed[outer]))

    s = _spin_matrix(w)
    sp = np.empty((1 << w, len(v_pairs)))
    for b, (r1, r2) in enumerate(v_pairs):
        sp[:, b] = s[:, r1] * s[:, r2]
    return _TransferPlan(
        t_axis=t_axis,
        l_axis=l_axis,
        width=w,
        length=length,
        wrap_l=wrap_l,
        v_pairs=tuple(v_pairs),
        v_pos=v_pos,
        v_sign=v_sign,
        h_pos=h_pos,
        h_sign=h_sign,
        ghost_rc=np.asarray(ghost_rc, dtype=np.intp).reshape(-1, 2),
        ghost_pos=np.asarray(ghost_pos, dtype=np.intp),
        ghost_tau=np.asarray(ghost_tau, dtype=np.float64),
        s_matrix=s,
        sp_matrix=sp,
    )


def _transfer_sweep(
    spec: GibbsSpec,
    width_cap: int | None = None,
    extra_fields: Mapping[Site, float] | None = None,
    insertions: Mapping[int, np.ndarray] | None = None,
) -> tuple[float, float]:
    """Returns (log |Z*|, sign) for the transfer product with optional
    diagonal sign insertions per column."""
    width_cap = TRANSFER_WIDTH_CAP if width_cap is None else width_cap
    plan = _transfer_plan(spec.region, spec.bc, width_cap)
    beta = spec.beta
    values = spec.couplings.values
    s = plan.s_matrix

    jv = values[plan.v_pos] * plan.v_sign
    col_expo = plan.sp_matrix @ jv
    hfield = np.zeros((plan.width, plan.length))
    if plan.ghost_pos.size:
        np.add.at(
            hfield,
            (plan.ghost_rc[:, 0], plan.ghost_rc[:, 1]),
            values[plan.ghost_pos] * plan.ghost_tau,
        )
    if extra_fields:
        for site, value in extra_fields.items():
            if not spec.region.contains_site(site):
                raise ContainmentError(f"field site {site} not in region")
            c = site[plan.l_axis] - spec.region.origin[plan.l_axis]
            r = site[plan.t_axis] - spec.region.origin[plan.t_axis]
            hfield[r, c] += float(value)
    if hfield.any():
        col_expo = col_expo + s @ hfield
    d = np.exp(beta * col_expo)  # (2^W, length) column weights
    if insertions:
        d = d.copy()
        for c, sign_vec in insertions.items():
            d[:, c] *= sign_vec

    jh = values[plan.h_pos] * plan.h_sign

    def link(j: int) -> np.ndarray:
        return np.exp(beta * ((s * jh[:, j]) @ s.T))

    acc = 0.0
    if not plan.wrap_l:
        v = d[:, 0]
        for c in range(1, plan.length):
            v = (v @ link(c - 1)) * d[:, c]
            m = float(np.abs(v).max())
            if m == 0.0:
                return -np.inf, 0.0
            v /= m
            acc += math.log(m)
        total = float(v.sum())
    else:
        mat = np.diag(d[:, 0])
        for c in range(1, plan.length):
            mat = (mat @ link(c - 1)) * d[:, c][None, :]
            m = float(np.abs(mat).max())
            if m == 0.0:
                return -np.inf, 0.0
            mat /= m
            acc += math.log(m)
        total = float(np.einsum("ij,ji->", mat, link(plan.length - 1)))
    if total == 0.0:
        return -np.inf, 0.0
    return acc + math.log(abs(total)), math.copysign(1.0, total)


def log_partition_transfer(
    spec: GibbsSpec,
    width_cap: int | None = None,
    extra_fields: Mapping[Site, float] | None = None,
) -> float:
    """log Z via dense 2^W transfer operators with per-column rescaling."""
    logz, sign = _transfer_sweep(spec, width_cap=width_cap, extra_fields=extra_fields)
    if sign <= 0:
        raise ArithmeticError("partition function must be positive")  # pragma: no cover
    return logz


def transfer_supported(spec: GibbsSpec, width_cap: int | None = None) -> bool:
    width_cap = TRANSFER_WIDTH_CAP if width_cap is None else width_cap
    if spec.region.dimension != 2:
        return False
    return any(spec.region.extents[a] <= width_cap for a in (0, 1))


def log_partition(
    spec: GibbsSpec,
    method: str = "auto",
    enum_cap: int | None = None,
    width_cap: int | None = None,
    extra_fields: Mapping[Site, float] | None = None,
) -> float:
    """log Z by the requested engine; ``auto`` prefers the transfer matrix."""
    if method == "enum":
        return log_partition_enum(spec, cap=enum_cap, extra_fields=extra_fields)
    if method == "transfer":
        return log_partition_transfer(spec, width_cap=width_cap, extra_fields=extra_fields)
    if method != "auto":
        raise ValueError(f"unknown solver method {method!r}")
    if transfer_supported(spec, width_cap):
        return log_partition_transfer(spec, width_cap=width_cap, extra_fields=extra_fields)
    return log_partition_enum(spec, cap=enum_cap, extra_fields=extra_fields)


def _transfer_correlation(spec: GibbsSpec, edge: Edge, width_cap: int | None) -> float:
    plan = _transfer_plan(spec.region, spec.bc, width_cap or TRANSFER_WIDTH_CAP)
    s = plan.s_matrix
    insertions: dict[int, np.ndarray] = {}
    for site in edge.endpoints():
        c = site[plan.l_axis] - spec.region.origin[plan.l_axis]
        r = site[plan.t_axis] - spec.region.origin[plan.t_axis]
        insertions[c] = insertions.get(c, np.ones(1 << plan.width)) * s[:, r]
    log_num, sign = _transfer_sweep(spec, width_cap=width_cap, insertions=insertions)
    if sign == 0.0:
        return 0.0
    log_den, _ = _transfer_sweep(spec, width_cap=width_cap)
    return sign * math.exp(log_num - log_den)


def edge_correlation(
    spec: GibbsSpec,
    edge: Edge,
    method: str = "auto",
    enum_cap: int | None = None,
    width_cap: int | None = None,
) -> float:
    """<sigma_x sigma_y> under the spec's Gibbs measure."""
    for site in edge.endpoints():
        if not spec.region.contains_site(site):
            raise ContainmentError(f"edge endpoint {site} not in region")
    if edge not in spec.couplings.edge_set.position:
        raise ContainmentError(f"edge {edge} not in the spec's edge set")
    if method == "auto":
        method = "transfer" if transfer_supported(spec, width_cap) else "enum"
    if method == "transfer":
        return _transfer_correlation(spec, edge, width_cap)
    if method != "enum":
        raise ValueError(f"unknown solver method {method!r}")
    _, index = _site_order(spec.region)
    ix, iy = index[edge.x], index[edge.y]

    def corr(chunk: np.ndarray, sites: tuple[Site, ...]) -> np.ndarray:
        return (chunk[:, ix] * chunk[:, iy]).astype(np.float64)

    _, (value,) = _enum_reduce(spec, [corr], cap=enum_cap)
    return value


# ---------------------------------------------------------------------------
# local coupling modification (additive reweighting)


def _block_values(spec: GibbsSpec, block: Region, values: Mapping[Edge, float]):
    block_edges = interior_edges(block)
    pairs = []
    for e in block_edges:
        if e not in spec.couplings.edge_set.position:
            raise ContainmentError(f"block edge {e} not in the spec's edge set")
        if e not in values:
            raise IncompleteAssignmentError(f"no modification value for block edge {e}")
        pairs.append((e, float(values[e])))
    return block_edges, pairs


def reweight(spec: GibbsSpec, block: Region, values: Mapping[Edge, float]) -> GibbsSpec:
    """The spec with couplings J + J_B on E(block) (additive local modification).

    Expectations of the returned spec equal the exponential-tilt formula
    applied to the original spec; ``reweight_expectation`` evaluates that
    formula directly, as the independent route.
    """
    _, pairs = _block_values(spec, block, values)
    out = spec.couplings.values.copy()
    for e, v in pairs:
        out[spec.couplings.edge_set.position[e]] += v
    return spec.with_couplings(spec.couplings.with_values(out, "reweighted"))


def reweight_expectation(
    spec: GibbsSpec,
    block: Region,
    values: Mapping[Edge, float],
    observable: Union[Observable, VectorObservable],
    vectorized: bool = False,
    cap: int | None = None,
) -> float:
    """< f >_{J+J_B} evaluated on the *original* spec via the tilt formula

        Gamma(f exp(beta sum_B J_B sigma sigma)) / Gamma(exp(beta sum_B ...)),

    by enumeration.  This is the independent numerical route against which
    :func:`reweight` is checked.
    """
    _, pairs = _block_values(spec, block, values)
    f = observable if vectorized else _vectorize(observable)

    def tilt(chunk: np.ndarray, sites: tuple[Site, ...]) -> np.ndarray:
        index = {s: k for k, s in enumerate(sites)}
        acc = np.zeros(chunk.shape[0])
        for e, v in pairs:
            acc += v * (chunk[:, index[e.x]] * chunk[:, index[e.y]])
        return np.exp(spec.beta * acc)

    def weighted(chunk: np.ndarray, sites: tuple[Site, ...]) -> np.ndarray:
        return np.asarray(f(chunk, sites), dtype=np.float64) * tilt(chunk, sites)

    _, (num, den) = _enum_reduce(spec, [weighted, tilt], cap=cap)
    return num / den
