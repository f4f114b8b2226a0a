import numpy as np
import pytest

from conftest import dense_atxy, kron_oracle
from entfreeze.errors import ParameterError, SpecError
from entfreeze.spin_models import (
    PHASE_POINTS,
    ChainSpec,
    DisorderSpec,
    atxy_point,
    build_hamiltonian,
    build_j1j2,
    classify_phase,
    j1j2_bonds,
    sample_disorder,
)


def test_ising_pair_spectrum():
    H = build_hamiltonian(ChainSpec(L=2, gamma=1.0)).to_dense()
    assert np.allclose(H, 0.5 * kron_oracle([(1, "x"), (2, "x")], 2))
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), [-0.5, -0.5, 0.5, 0.5])


def test_single_site_field_sign():
    h1, h2 = 0.7, 0.3
    H = build_hamiltonian(ChainSpec(L=1, h1=h1, h2=h2)).to_dense()
    assert np.allclose(H, 0.5 * (h1 - h2) * np.diag([1, -1]))


def test_pm2_ground_energy_matches_dense():
    H = build_hamiltonian(atxy_point("PM-II", 4)).to_dense()
    oracle = dense_atxy(4, gamma=0.8, h2=1.2)
    assert np.allclose(H, oracle, atol=1e-14)
    assert abs(np.linalg.eigvalsh(H)[0] - np.linalg.eigvalsh(oracle)[0]) <= 1e-12


def test_txxz_and_per_site_fields():
    spec = ChainSpec(L=3, variant="txxz", delta=1.5, h1=(0.1, -0.2, 0.3))
    H = build_hamiltonian(spec).to_dense()
    oracle = dense_atxy(3, delta=1.5)
    for i, h in enumerate((0.1, -0.2, 0.3), start=1):
        oracle = oracle + 0.5 * h * kron_oracle([(i, "z")], 3)
    assert np.allclose(H, oracle, atol=1e-14)


def test_periodic_adds_wraparound_bond():
    spec = ChainSpec(L=3, gamma=0.5, boundary="periodic")
    H = build_hamiltonian(spec).to_dense()
    extra = 1.5 / 4 * kron_oracle([(3, "x"), (1, "x")], 3) + 0.5 / 4 * kron_oracle([(3, "y"), (1, "y")], 3)
    assert np.allclose(H, dense_atxy(3, gamma=0.5) + extra, atol=1e-14)


def _dense_heis(L, bonds, c):
    return sum(c * kron_oracle([(i, a), (j, a)], L) for i, j in bonds for a in "xyz")


def test_j1j2_matches_kron():
    H = build_j1j2(3, 1.0, 0.5, "open").to_dense()
    oracle = _dense_heis(3, [(1, 2), (2, 3)], 1.0) + _dense_heis(3, [(1, 3)], 0.5)
    assert np.allclose(H, oracle, atol=1e-14)


def test_j1j2_without_j2_is_scaled_heisenberg():
    L = 5
    heis = build_hamiltonian(ChainSpec(L=L, variant="heisenberg", delta=1.0)).canonical()
    j1 = build_j1j2(L, 1.0, 0.0).canonical(tol=0.0)
    j1 = {k: v for k, v in j1.items() if v != 0}
    assert heis.keys() == j1.keys()
    for k in heis:
        assert j1[k] == pytest.approx(4 * heis[k])


def test_j1j2_bond_counts():
    nn_o, nnn_o = j1j2_bonds(4, "open")
    nn_p, nnn_p = j1j2_bonds(4, "periodic")
    assert len(nn_p) + len(nnn_p) - (len(nn_o) + len(nnn_o)) == 3


@pytest.mark.parametrize(
    "kw",
    [
        dict(L=3, variant="txy", h2=0.5),
        dict(L=3, variant="txy", delta=0.5),
        dict(L=3, variant="txxz", gamma=0.2),
        dict(L=3, variant="heisenberg", delta=0.9),
        dict(L=3, variant="atxy", delta=1.0),
        dict(L=3, J=0.0),
        dict(L=3, J=-1.0),
        dict(L=3, h1=(1.0, 2.0)),
        dict(L=2, boundary="periodic"),
        dict(L=3, variant="nope"),
        dict(L=0),
    ],
)
def test_invalid_chain_specs(kw):
    with pytest.raises(SpecError):
        ChainSpec(**kw)


def test_chain_spec_roundtrip():
    spec = atxy_point("AFM", 5)
    assert ChainSpec.from_dict(spec.to_dict()) == spec


@pytest.mark.parametrize("phase", ["PM-I", "PM-II", "AFM"])
def test_specimen_points_classify(phase):
    p = PHASE_POINTS[phase]
    assert classify_phase(p["h1"], p["h2"], p["gamma"]) == phase


def test_phase_boundaries():
    assert classify_phase(np.sqrt(1.0 + 0.25), 0.5, 0.8) == "boundary"
    assert classify_phase(0.0, 0.8, 0.8) == "boundary"
    with pytest.raises(ParameterError):
        classify_phase(1.0, 0.0, 0.0)


def test_disorder_std_zero_is_exact():
    spec = atxy_point("PM-II", 8)
    out = sample_disorder(spec, DisorderSpec("h2", 1.2, 0.0, 3), 1)
    assert out.h2 == (1.2,) * 8


def test_disorder_is_deterministic_and_independent_of_order():
    spec = atxy_point("PM-II", 8)
    d = DisorderSpec("h2", 1.2, 0.3, 10, base_seed=7)
    forward = [sample_disorder(spec, d, i).h2 for i in range(10)]
    backward = [sample_disorder(spec, d, i).h2 for i in reversed(range(10))][::-1]
    assert forward == backward
    assert len(set(forward)) == 10


def test_disorder_sample_mean():
    spec = atxy_point("PM-II", 8)
    d = DisorderSpec("h2", 1.2, 0.3, 10_000, base_seed=2018)
    vals = np.concatenate([sample_disorder(spec, d, i).h2 for i in range(d.realizations)])
    assert abs(vals.mean() - 1.2) <= 0.01
    assert abs(vals.std() - 0.3) <= 0.01
