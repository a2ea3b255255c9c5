import math
from dataclasses import replace

import pytest

from ionmux.config import resolve_config
from ionmux.errors import ParameterError
from ionmux.protocol import (
    EfficiencyChain,
    MemoryParams,
    ProtocolSpec,
    active_span,
    compile as compile_spec,
    fiber_transmission,
    link_efficiency,
    memory_fidelity,
    memory_survival,
    simulate_rates,
)


def spec_for(preset):
    return resolve_config(preset=preset).protocol_spec()


def test_efficiency_chain():
    chain = EfficiencyChain(collection=0.5, conversion=0.12,
                            fiber_transmission=0.8, detector=0.9, other=1.0)
    assert chain.product == pytest.approx(0.5 * 0.12 * 0.8 * 0.9)
    # zero factors allowed (e.g. a blocked path), above one is not
    assert EfficiencyChain(collection=0.0).product == 0.0
    with pytest.raises(ParameterError):
        EfficiencyChain(detector=1.1)


def test_fiber_transmission():
    assert fiber_transmission(0.0, 0.2) == pytest.approx(1.0)
    assert fiber_transmission(1000.0, 0.2) == pytest.approx(10 ** -0.02)
    assert fiber_transmission(12000.0, 0.18) == pytest.approx(
        10 ** (-0.18 * 12 / 10))


def test_memory_model_values():
    mem = MemoryParams()
    # decay errors of the shelf level
    for t, err in ((0.100, 0.099), (0.240, 0.222), (0.300, 0.269)):
        assert 1.0 - memory_survival(t, mem) == pytest.approx(err, abs=5e-4)
    # dephasing fidelity: 1 at t=0, 1/2 + a/e at tau_coh
    assert memory_fidelity(0.0, mem) == pytest.approx(1.0)
    assert memory_fidelity(mem.tau_coh, mem) == pytest.approx(
        0.5 + 0.5 / math.e)


def test_link_efficiency_definition():
    mem = MemoryParams()
    assert link_efficiency(4.28, mem, 0.74) == pytest.approx(
        4.28 * 0.366 * 0.74, rel=1e-12)
    with pytest.raises(ParameterError):
        link_efficiency(-1.0, mem, 0.5)


def test_compile_mode_count_and_span():
    spec = spec_for("12km")
    program = compile_spec(spec)
    assert spec.mode_count == 44
    modes = [p.mode for p in program.primitives if p.kind == "excite"]
    assert modes == list(range(1, 45))
    span = active_span(program)
    assert 80e-6 < span < 95e-6
    assert program.t_end > span + 2 * spec.L / spec.c_fiber


def test_rate_report_structure():
    rep = simulate_rates(spec_for("1km"))
    assert rep.mode_count == 12 and len(rep.per_mode_p) == 12
    assert 0.0 < rep.p_round <= 1.0
    assert rep.p_round_exact == pytest.approx(
        1.0 - math.prod(1.0 - p for p in rep.per_mode_p), rel=1e-12)
    assert rep.p_round_exact < rep.p_round
    assert rep.attempt_rate == pytest.approx(rep.mode_count / rep.t_round)
    assert rep.success_rate == pytest.approx(rep.p_round / rep.t_round)


def test_preset_enhancements_and_rates():
    targets = {"3m": (3.4, 263.0), "1km": (5.1, 40.0), "12km": (15.6, 4.28)}
    for name, (m_prime, rate) in targets.items():
        rep = simulate_rates(spec_for(name))
        assert abs(rep.M_prime - m_prime) <= 0.30 * m_prime, name
        assert rep.success_rate == pytest.approx(rate, rel=1e-4), name


def test_12km_memory_figures():
    rep = simulate_rates(spec_for("12km"))
    assert rep.survival == pytest.approx(0.74, abs=0.005)
    assert rep.eta_link == pytest.approx(1.16, abs=0.02)
    d = rep.to_dict()
    assert d["expected_generation_time_s"] == pytest.approx(1 / 4.28,
                                                            rel=1e-4)


def test_more_ions_do_not_reduce_round_probability():
    base = spec_for("12km")
    p_prev = 0.0
    for ions in (1, 2, 4):
        rep = simulate_rates(replace(base, ions=ions, shuttle_plan=None))
        assert rep.p_round > p_prev
        p_prev = rep.p_round


def test_spec_validation():
    base = spec_for("3m")
    with pytest.raises(ParameterError):
        replace(base, ions=0)
    with pytest.raises(Exception):
        replace(base, ions=2, shuttle_plan=(0, 0))
