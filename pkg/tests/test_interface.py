import math

import numpy as np
import pytest
from conftest import brute_correlation

from eafluct.disorder import ZERO, Gaussian, SeedSpec, sample_couplings, set_block
from eafluct.errors import ContainmentError, PairError, UnsupportedOperationError
from eafluct.exactsolve import (
    GibbsSpec,
    antiperiodic_bc,
    free_bc,
    log_partition_enum,
    periodic_bc,
    uniform_fixed_bc,
)
from eafluct.interface import (
    FreeEnergyResult,
    correlation_difference,
    domain_wall_free_energy,
    free_energy_gradient,
    interface_free_energy,
    interface_free_energy_direct,
    make_state_pair,
    master_edge_set,
    sample_master,
)
from eafluct.lattice import Edge, Region, interior_edges


def pair_4x4(beta=1.0, bc=None, bc_prime=None, seed=11, realization=0):
    master = sample_master(Gaussian(), (4, 4), SeedSpec(seed, realization, "couplings"))
    return make_state_pair(
        (4, 4), (2, 2), beta, bc or free_bc(), bc_prime or periodic_bc(), master
    )


def pair_5x5(beta=1.0, bc=None, bc_prime=None, seed=11, realization=0):
    master = sample_master(Gaussian(), (5, 5), SeedSpec(seed, realization, "couplings"))
    return make_state_pair(
        (5, 5), (3, 3), beta, bc or free_bc(), bc_prime or periodic_bc(), master
    )


# --- pair invariants --------------------------------------------------------


def test_pair_requires_margin():
    master = sample_master(Gaussian(), (4, 4), SeedSpec(1, 0, "couplings"))
    with pytest.raises(PairError):
        make_state_pair((4, 4), (4, 4), 1.0, free_bc(), periodic_bc(), master)


def test_pair_requires_equal_beta_and_box():
    p = pair_4x4()
    with pytest.raises(PairError):
        type(p)(p.window, p.gamma, GibbsSpec(p.gamma_prime.region, p.gamma_prime.couplings, 2.0, periodic_bc()))


def test_pair_couplings_must_agree_on_shared_edges():
    p = pair_4x4()
    tweaked = p.gamma_prime.couplings.values.copy()
    tweaked[0] += 1.0
    bad = p.gamma_prime.with_couplings(p.gamma_prime.couplings.with_values(tweaked, "bad"))
    with pytest.raises(PairError):
        type(p)(p.window, p.gamma, bad)


def test_margin_recorded():
    assert pair_4x4().margin == 1
    assert pair_5x5().margin == 1


# --- interface free energy ---------------------------------------------------


def test_beta_zero_gives_exact_zero():
    result = interface_free_energy(pair_4x4(beta=0.0))
    assert result.value == 0.0


def test_zero_window_couplings_give_exact_zero():
    p = pair_4x4()
    master = sample_master(Gaussian(), (4, 4), SeedSpec(11, 0, "couplings"))
    zeroed = set_block(master, p.window, ZERO)
    p0 = make_state_pair((4, 4), (2, 2), 1.0, free_bc(), periodic_bc(), zeroed)
    assert interface_free_energy(p0).value == 0.0


def test_identical_boundary_conditions_give_exact_zero():
    p = pair_4x4(bc=free_bc(), bc_prime=free_bc())
    result = interface_free_energy(p)
    assert result.value == 0.0
    assert result.log_z_gamma == result.log_z_gamma_prime


def test_antisymmetry_is_exact():
    master = sample_master(Gaussian(), (4, 4), SeedSpec(23, 0, "couplings"))
    p = make_state_pair((4, 4), (2, 2), 1.0, free_bc(), periodic_bc(), master)
    q = make_state_pair((4, 4), (2, 2), 1.0, periodic_bc(), free_bc(), master)
    assert interface_free_energy(p).value == -interface_free_energy(q).value


def test_value_recomputable_from_terms():
    result = interface_free_energy(pair_4x4())
    assert result.value == result.recomputed_value()


def test_result_record_round_trip():
    result = interface_free_energy(pair_4x4())
    rec = result.to_record()
    assert FreeEnergyResult.from_record(rec) == result


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize(
    "bc_prime_name", ["periodic", "antiperiodic", "fixed+", "fixed-"]
)
def test_route_equivalence_enumerable(beta, bc_prime_name):
    # DERIVED: ratio-of-partition-functions route vs direct Gibbs expectation
    bc_prime = {
        "periodic": periodic_bc(),
        "antiperiodic": antiperiodic_bc(0),
        "fixed+": uniform_fixed_bc(Region((4, 4)), 1),
        "fixed-": uniform_fixed_bc(Region((4, 4)), -1),
    }[bc_prime_name]
    p = pair_4x4(beta=beta, bc_prime=bc_prime, seed=37)
    ratio = interface_free_energy(p, method="enum").value
    transfer = interface_free_energy(p, method="transfer").value
    direct = interface_free_energy_direct(p)
    assert ratio == pytest.approx(direct, abs=1e-9)
    assert transfer == pytest.approx(direct, abs=1e-9)


def test_route_equivalence_3x3_window_in_5x5():
    # the largest enumerable window-in-box geometry; enumeration cap raised
    # to the box's 25 free spins for the direct route
    p = pair_5x5(seed=21)
    ratio = interface_free_energy(p).value
    direct = interface_free_energy_direct(p, enum_cap=25)
    assert ratio == pytest.approx(direct, abs=1e-9)


def test_locality_outside_couplings_do_not_matter():
    # the ghost-ring couplings exist in the master but are invisible to a
    # free/periodic pair; F must be bit-identical when only they change
    master = sample_master(Gaussian(), (4, 4), SeedSpec(5, 0, "couplings"))
    values = master.values.copy()
    used = set()
    for bc in (free_bc(), periodic_bc()):
        region = Region((4, 4), (bc.kind == "periodic",) * 2)
        from eafluct.exactsolve import required_edges

        for e in required_edges(region, bc):
            used.add(e)
    for k, e in enumerate(master.edge_set):
        if e not in used:
            values[k] += 7.5
    altered = master.with_values(values, "altered-outside")
    f1 = interface_free_energy(make_state_pair((4, 4), (2, 2), 1.0, free_bc(), periodic_bc(), master))
    f2 = interface_free_energy(make_state_pair((4, 4), (2, 2), 1.0, free_bc(), periodic_bc(), altered))
    assert f1.value == f2.value
    assert f1.log_z_gamma == f2.log_z_gamma


def test_boundary_bound_holds_strictly():
    for realization in range(10):
        for beta in (0.5, 1.0, 2.0):
            p = pair_5x5(beta=beta, seed=77, realization=realization)
            f = interface_free_energy(p).value
            assert abs(f) <= 4.0 * beta * p.boundary_abs_sum() + 1e-9


# --- domain wall --------------------------------------------------------------


def test_domain_wall_zero_at_beta_zero():
    region = Region((4, 4), (True, True))
    couplings = sample_couplings(Gaussian(), interior_edges(region), SeedSpec(2))
    assert domain_wall_free_energy(couplings, region, 0.0) == 0.0


def test_domain_wall_zero_couplings():
    region = Region((4, 4), (True, True))
    edges = interior_edges(region)
    couplings = sample_couplings(Gaussian(), edges, SeedSpec(2)).with_values(
        np.zeros(len(edges)), "zero"
    )
    assert domain_wall_free_energy(couplings, region, 1.0) == 0.0


def test_domain_wall_ferromagnet_positive_and_matches_enumeration():
    # DERIVED: enumeration oracle fixes the value
    region = Region((4, 4), (True, True))
    edges = interior_edges(region)
    couplings = sample_couplings(Gaussian(), edges, SeedSpec(2)).with_values(
        np.ones(len(edges)), "ferro"
    )
    value = domain_wall_free_energy(couplings, region, 1.0)
    spec_p = GibbsSpec(region, couplings, 1.0, periodic_bc())
    spec_a = GibbsSpec(region, couplings, 1.0, antiperiodic_bc(0))
    expected = log_partition_enum(spec_p) - log_partition_enum(spec_a)
    assert value > 0.0
    assert value == pytest.approx(expected, abs=1e-9)


def test_domain_wall_requires_torus():
    region = Region((4, 4))
    couplings = sample_couplings(Gaussian(), interior_edges(region), SeedSpec(2))
    with pytest.raises(UnsupportedOperationError):
        domain_wall_free_energy(couplings, region, 1.0)


# --- gradient -----------------------------------------------------------------


def test_gradient_zero_for_identical_states():
    p = pair_4x4(bc=periodic_bc(), bc_prime=periodic_bc())
    for entry in free_energy_gradient(p).values():
        assert entry.gradient == 0.0


def test_gradient_zero_at_beta_zero():
    p = pair_4x4(beta=0.0)
    for entry in free_energy_gradient(p).values():
        assert entry.gradient == 0.0


def _fd_gradient(master, box, window, beta, bc, bc_prime, edge, h=1e-4):
    vals = {}
    k = master.edge_set.index(edge)
    for s in (1, -1):
        v = master.values.copy()
        v[k] += s * h
        p = make_state_pair(box, window, beta, bc, bc_prime, master.with_values(v, "fd"))
        vals[s] = interface_free_energy(p).value
    return (vals[1] - vals[-1]) / (2 * h)


def test_gradient_matches_central_finite_differences():
    # DERIVED: finite-difference oracle, step 1e-4, tolerance 1e-5
    master = sample_master(Gaussian(), (5, 5), SeedSpec(13, 1, "couplings"))
    bc, bc_prime = free_bc(), uniform_fixed_bc(Region((5, 5)), 1)
    p = make_state_pair((5, 5), (3, 3), 1.0, bc, bc_prime, master)
    grad = free_energy_gradient(p)
    assert len(grad) == len(interior_edges(p.window))
    for e, entry in grad.items():
        fd = _fd_gradient(master, (5, 5), (3, 3), 1.0, bc, bc_prime, e)
        assert entry.gradient == pytest.approx(fd, abs=1e-5)
        assert entry.gradient == pytest.approx(
            p.beta * (entry.corr_gamma_prime - entry.corr_gamma), abs=1e-15
        )


# --- correlation difference ----------------------------------------------------


def test_correlation_difference_zero_for_identical_states():
    p = pair_4x4(bc=periodic_bc(), bc_prime=periodic_bc())
    e = tuple(p.window_edges)[0]
    assert correlation_difference(p, e) == 0.0


def test_correlation_difference_zero_at_beta_zero():
    p = pair_4x4(beta=0.0)
    e = tuple(p.window_edges)[0]
    assert correlation_difference(p, e) == 0.0


def test_correlation_difference_bounded():
    p = pair_4x4()
    for e in p.window_edges:
        assert -2.0 <= correlation_difference(p, e) <= 2.0


def test_correlation_difference_rejects_foreign_edge():
    p = pair_4x4()
    with pytest.raises(ContainmentError):
        correlation_difference(p, Edge((9, 9), (9, 10), axis=1))


def test_clamped_neighbor_toy_closed_form():
    # DERIVED: two-spin chain with one clamped ghost on each side; the
    # four-configuration closed form is written out explicitly here
    region = Region((2, 1))
    beta = 1.1

    def closed_form(j, h_left, h_right):
        num = 0.0
        den = 0.0
        for sx in (-1, 1):
            for sy in (-1, 1):
                w = math.exp(beta * (j * sx * sy + h_left * sx + h_right * sy))
                num += sx * sy * w
                den += w
        return num / den

    for sign in (1, -1):
        bc = uniform_fixed_bc(region, sign)
        from eafluct.exactsolve import required_edges

        couplings = sample_couplings(
            Gaussian(), required_edges(region, bc), SeedSpec(19, 0, "toy")
        )
        spec = GibbsSpec(region, couplings, beta, bc)
        (inner_edge,) = tuple(interior_edges(region))
        j = couplings.value(inner_edge)
        fields = {}
        for e in required_edges(region, bc):
            if e == inner_edge:
                continue
            inner = e.x if region.contains_site(e.x) else e.y
            fields[inner] = fields.get(inner, 0.0) + couplings.value(e) * sign
        expected = closed_form(j, fields[(0, 0)], fields[(1, 0)])
        got = brute_correlation(spec, inner_edge)
        from eafluct.exactsolve import edge_correlation

        assert edge_correlation(spec, inner_edge, method="enum") == pytest.approx(
            expected, abs=1e-12
        )
        assert got == pytest.approx(expected, abs=1e-12)


# --- master edge set ------------------------------------------------------------


def test_master_edge_set_covers_all_boundary_conditions():
    from eafluct.exactsolve import required_edges

    master = master_edge_set((4, 4))
    for bc in (free_bc(), periodic_bc(), antiperiodic_bc(0), uniform_fixed_bc(Region((4, 4)), 1)):
        region = Region((4, 4), (bc.kind in ("periodic", "antiperiodic"),) * 2)
        for e in required_edges(region, bc):
            assert e in master.position
