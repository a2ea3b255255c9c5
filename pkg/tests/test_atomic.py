import math

import numpy as np
import pytest

from ionmux.atomic import (
    AtomicParams,
    BASIS,
    ExcitationMap,
    LevelState,
    PopulationVector,
    PumpCycleMap,
    PumpMap,
    ShelveMap,
    WaitMap,
)
from ionmux.errors import ParameterError, ProtocolError


def test_default_params():
    p = AtomicParams()
    assert p.p_br_D == pytest.approx(0.06)
    assert p.p_br_S == pytest.approx(0.94)
    assert abs(p.p_br_D + p.p_br_S - 1.0) < 1e-12
    assert p.w_up == pytest.approx(2.0 / 3.0)
    assert p.w_down == pytest.approx(1.0 / 3.0)


def test_pump_split_closed_form():
    p = AtomicParams()
    q = p.pump_split_to_initial
    expect = (p.p_br_S * p.w_down) / (p.p_br_S * p.w_down + p.p_br_D)
    assert q == pytest.approx(expect, abs=1e-15)
    assert q == pytest.approx(0.8392857142857143, abs=1e-12)


def test_bad_params_rejected():
    with pytest.raises(ParameterError):
        AtomicParams(p_br_D=1.3)
    with pytest.raises(ParameterError):
        AtomicParams(w_up=-0.1)
    with pytest.raises(ParameterError):
        AtomicParams(tau_P=0.0)


@pytest.mark.parametrize("window", [math.inf, 13e-9, 50e-9, 1e-9])
def test_maps_row_stochastic(window):
    params = AtomicParams()
    maps = [ExcitationMap(params, window, 1),
            PumpMap(params), PumpCycleMap(params), WaitMap(params),
            ShelveMap("to_shelf"), ShelveMap("from_shelf")]
    for m in maps:
        T = m.matrix()
        rows = T.sum(axis=1)
        assert np.allclose(rows, 1.0, atol=1e-12), type(m).__name__


def test_excitation_window_truncation():
    params = AtomicParams()
    pop = PopulationVector.pure(LevelState.S_UP)
    full = ExcitationMap(params, math.inf, 1).apply(pop)
    trunc = ExcitationMap(params, 13e-9, 1).apply(pop)
    d = 1.0 - math.exp(-13e-9 / params.tau_P)
    assert full.d_photon_total == pytest.approx(params.p_br_D)
    assert trunc.d_photon_total == pytest.approx(params.p_br_D * d)
    # undecayed population is carried in the excited level
    assert trunc.p_exc == pytest.approx(1.0 - d)


def test_mode_tally_collision_raises():
    params = AtomicParams()
    pop = ExcitationMap(params, math.inf, 1).apply(
        PopulationVector.pure(LevelState.S_UP))
    with pytest.raises(ProtocolError):
        ExcitationMap(params, math.inf, 1).apply(pop)


def test_pump_resolves_carry_without_collection():
    params = AtomicParams()
    pop = ExcitationMap(params, 13e-9, 1).apply(
        PopulationVector.pure(LevelState.S_UP))
    before_photons = pop.d_photon_total
    pumped = PumpMap(params).apply(pop)
    assert pumped.p_exc == 0.0
    assert pumped.s_down == 0.0
    assert pumped.d_photon_total == pytest.approx(before_photons)
    pumped.check_normalized()


def test_shelve_round_trip_preserves_tallies():
    params = AtomicParams()
    pop = ExcitationMap(params, math.inf, 3).apply(
        PopulationVector.pure(LevelState.S_UP))
    shelved = ShelveMap("to_shelf").apply(pop)
    assert shelved.d_photon_total == 0.0
    assert dict(shelved.shelf_photon) == dict(pop.d_photon)
    back = ShelveMap("from_shelf").apply(shelved)
    assert dict(back.d_photon) == dict(pop.d_photon)
    assert back.s_up == pytest.approx(pop.s_up)
    assert back.d_leak == pytest.approx(pop.d_leak)


def test_population_vector_normalization_guard():
    pop = PopulationVector(s_up=0.6, s_down=0.1)
    with pytest.raises(ParameterError):
        pop.check_normalized()


def test_basis_covers_vector_fields():
    assert LevelState.S_UP in BASIS and LevelState.D_PHOTON in BASIS
    arr = PopulationVector.pure(LevelState.S_UP).as_array()
    assert arr.shape == (len(BASIS),)
    assert arr.sum() == pytest.approx(1.0)
