import numpy as np
import pytest

from hivadapt.data import (CSV_HEADER, DEFAULT_TIMES, TwinSpec, builtin_patient, interpolate_to_mesh,
                           load_csv, make_twin, write_csv)
from hivadapt.errors import InvalidArgument, ParseError, SchemaError
from hivadapt.mesh import PiecewiseFn, uniform_mesh
from hivadapt.model import PATIENT_CTL, ModelParams
from hivadapt.problems import ctl_profiles


def test_builtin_examples():
    p1 = builtin_patient(1)
    assert (p1.log10_v[2], p1.sigma[2]) == (7.75, 675_000.0)
    p4 = builtin_patient(4)
    assert (p4.log10_v[1], p4.sigma[1]) == (3.7, 700_000.0)
    p2 = builtin_patient(2)
    assert (p2.log10_v[0], p2.sigma[0]) == (0.0, 750_000.0)
    assert p1.initial_state() == (1_125_000.0, 0.0, 1.0)
    np.testing.assert_array_equal(p1.times, DEFAULT_TIMES)
    with pytest.raises(InvalidArgument):
        builtin_patient(5)


def test_interpolation_examples():
    p1 = builtin_patient(1)
    m = uniform_mesh(363, 1)
    d = interpolate_to_mesh(p1, m)
    # interval (10, 11] has midpoint 10.5
    assert d.log10_g2[10] == pytest.approx(6.625, abs=1e-12)
    assert d.g1.values[10] == pytest.approx(750_000.0, rel=1e-12)
    np.testing.assert_allclose(d.log10_g2_nodes[[0, 7, 14, 363]], [0.0, 5.5, 7.75, 5.1], atol=1e-12)
    # midpoint sampling error near a knot is bounded by slope * tau / 2
    slope = (7.75 - 5.5) / 7
    assert abs(d.log10_g2[13] - 7.75) <= slope * 0.5 + 1e-12


def test_interpolation_constant_and_span():
    from hivadapt.data import ClinicalSeries
    s = ClinicalSeries("flat", DEFAULT_TIMES, np.full(8, 4.0), np.full(8, 5e5))
    d = interpolate_to_mesh(s, uniform_mesh(363, 3), n_sub=4)
    np.testing.assert_allclose(d.g2.values, 1e4)
    np.testing.assert_allclose(d.log10_g1_fine, np.log10(5e5))
    with pytest.raises(InvalidArgument):
        interpolate_to_mesh(s, uniform_mesh(300, 1))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_csv_roundtrip(tmp_path, n):
    p = builtin_patient(n)
    path = tmp_path / f"patient{n}.csv"
    write_csv(p, path)
    q = load_csv(path, patient_id=p.patient_id)
    assert q.equals(p)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)


def test_csv_errors(tmp_path):
    p = builtin_patient(1)
    good = tmp_path / "g.csv"
    write_csv(p, good)
    lines = good.read_text().splitlines()
    short = tmp_path / "short.csv"
    short.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(SchemaError):
        load_csv(short)
    swapped = tmp_path / "swap.csv"
    swapped.write_text("\n".join([lines[0], lines[2], lines[1]] + lines[3:]) + "\n")
    with pytest.raises(SchemaError):
        load_csv(swapped)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines[:3] + ["14.0,abc,5"] + lines[4:]) + "\n")
    with pytest.raises(ParseError) as ei:
        load_csv(bad)
    assert ei.value.line == 4


def test_twin_zero_noise_reproduces_states():
    m = uniform_mesh(363, 1)
    s, ctl = builtin_patient(1), PATIENT_CTL[1]
    d_fn, e0 = ctl_profiles(s, ctl, m)
    data, et = make_twin(ModelParams(), d_fn, TwinSpec(e0), m, s.initial_state(), n_sub=4)
    from hivadapt.objective import InverseProblem
    prob = InverseProblem(m, data, d_fn, e0, s.initial_state(), n_sub=4)
    assert prob.evaluate(e0, 0.1).j < 1e-20


def test_twin_seeded_noise_deterministic():
    m = uniform_mesh(363, 1)
    s, ctl = builtin_patient(1), PATIENT_CTL[1]
    d_fn, e0 = ctl_profiles(s, ctl, m)
    spec = TwinSpec(e0, 0.02, 0.02, rng_seed=11)
    a, _ = make_twin(ModelParams(), d_fn, spec, m, s.initial_state())
    b, _ = make_twin(ModelParams(), d_fn, spec, m, s.initial_state())
    assert a.log10_g2_fine.tobytes() == b.log10_g2_fine.tobytes()
    c, _ = make_twin(ModelParams(), d_fn, TwinSpec(e0), m, s.initial_state())
    rel = np.abs(10 ** (a.log10_g2_fine - c.log10_g2_fine) - 1)
    assert 0 < rel.max() <= 0.02 + 1e-12
    with pytest.raises(InvalidArgument):
        TwinSpec(e0, -0.1)
