"""Shared fixtures and independent brute-force oracles.

The oracles here re-derive Gibbs sums in plain Python over explicit spin
dictionaries, so they share no code path with the package's vectorized
enumeration or transfer engines.
"""

import itertools
import math

import pytest

from eafluct.exactsolve import required_edges


def spin_assignments(sites):
    for assign in itertools.product((-1, 1), repeat=len(sites)):
        yield dict(zip(sites, assign))


def effective_bonds(spec):
    """(x, y, J) triples with seam flips applied, plus ghost fields."""
    fixed = spec.bc.fixed_map()
    bonds = []
    fields = {}
    for e in required_edges(spec.region, spec.bc):
        j = spec.couplings.value(e)
        if e.wrap and spec.bc.kind == "antiperiodic" and e.axis in spec.bc.seam_axes:
            j = -j
        in_x = spec.region.contains_site(e.x)
        in_y = spec.region.contains_site(e.y)
        if in_x and in_y:
            bonds.append((e.x, e.y, j))
        else:
            inner, outer = (e.x, e.y) if in_x else (e.y, e.x)
            fields[inner] = fields.get(inner, 0.0) + j * fixed[outer]
    return bonds, fields


def brute_weight_exponent(spec, sigma, bonds, fields):
    acc = 0.0
    for x, y, j in bonds:
        acc += j * sigma[x] * sigma[y]
    for site, h in fields.items():
        acc += h * sigma[site]
    return spec.beta * acc


def brute_log_z(spec):
    bonds, fields = effective_bonds(spec)
    sites = list(spec.region.sites)
    expos = [
        brute_weight_exponent(spec, sigma, bonds, fields)
        for sigma in spin_assignments(sites)
    ]
    m = max(expos)
    return m + math.log(math.fsum(math.exp(v - m) for v in expos))


def brute_expectation(spec, observable):
    """<f> with f a function of the spin dict."""
    bonds, fields = effective_bonds(spec)
    sites = list(spec.region.sites)
    num = []
    den = []
    expos = []
    sigmas = list(spin_assignments(sites))
    for sigma in sigmas:
        expos.append(brute_weight_exponent(spec, sigma, bonds, fields))
    m = max(expos)
    for sigma, expo in zip(sigmas, expos):
        w = math.exp(expo - m)
        num.append(observable(sigma) * w)
        den.append(w)
    return math.fsum(num) / math.fsum(den)


def brute_correlation(spec, edge):
    return brute_expectation(spec, lambda s: s[edge.x] * s[edge.y])


@pytest.fixture
def gaussian():
    from eafluct.disorder import Gaussian

    return Gaussian()
