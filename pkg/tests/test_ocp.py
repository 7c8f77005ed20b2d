import numpy as np
import pytest

from spmbench.ocp import (
    OcpCurve, OcpDomainError, OcpError, default_curve, default_pair, evaluate, load_curve,
)

TABLE = "stoichiometry,potential_v\n0.0,4.3\n0.25,4.0\n0.5,3.8\n1.0,3.4\n"


def test_four_point_table_accepted():
    c = load_curve(TABLE)
    assert c.domain == (0.0, 1.0)
    assert len(c.points) == 4


def test_repeated_stoichiometry_rejected():
    with pytest.raises(OcpError, match="strictly increasing"):
        load_curve([(0.0, 4.0), (0.5, 3.9), (0.5, 3.8), (1.0, 3.5)])


def test_increasing_potential_rejected():
    with pytest.raises(OcpError, match="decreasing"):
        load_curve([(0.0, 3.0), (0.3, 3.1), (0.6, 3.2), (1.0, 3.3)])


@pytest.mark.parametrize("rows", [
    [(-0.1, 4.0), (0.3, 3.9), (0.6, 3.8), (1.0, 3.5)],
    [(0.0, 4.0), (0.3, 3.9), (0.6, 3.8), (1.1, 3.5)],
    [(0.0, 4.0), (0.5, 3.9), (1.0, 3.5)],
])
def test_bad_tables_rejected(rows):
    with pytest.raises(OcpError):
        load_curve(rows)


def test_header_checked():
    with pytest.raises(OcpError, match="header"):
        load_curve("x,u\n0,4\n0.3,3.9\n0.6,3.8\n1,3.5\n")


def test_load_from_path(tmp_path):
    path = tmp_path / "pos.csv"
    path.write_text(TABLE)
    assert np.array_equal(load_curve(path).potential, load_curve(str(path)).potential)
    c = load_curve(path)
    c.to_csv(tmp_path / "again.csv")
    assert np.array_equal(load_curve(tmp_path / "again.csv").potential, c.potential)


def test_knots_and_midpoints():
    c = load_curve(TABLE)
    for x, u in c.points:
        assert evaluate(c, x) == u
    assert evaluate(c, 0.125) == pytest.approx((4.3 + 4.0) / 2, abs=1e-15)
    assert evaluate(c, 0.75) == pytest.approx((3.8 + 3.4) / 2, abs=1e-15)


def test_out_of_domain():
    c = load_curve(TABLE)
    with pytest.raises(OcpDomainError):
        evaluate(c, 1.05)
    with pytest.raises(OcpDomainError):
        evaluate(c, np.array([0.2, -0.01]))
    with pytest.raises(OcpDomainError):
        evaluate(c, np.nan)


def test_vectorized():
    c = load_curve(TABLE)
    out = evaluate(c, np.array([0.0, 0.5]))
    assert out.tolist() == [4.3, 3.8]


@pytest.mark.parametrize("side", ["positive", "negative"])
def test_default_curves_monotone(side):
    c = default_curve(side)
    assert c.domain == (0.0, 1.0)
    x = np.linspace(0, 1, 5001)
    assert np.all(np.diff(evaluate(c, x)) < 0)


def test_default_pair_charged_voltage():
    pair = default_pair()
    ocv = evaluate(pair.positive, 0.0188) - evaluate(pair.negative, 0.9472)
    assert ocv == pytest.approx(4.2, abs=0.01)


def test_unknown_electrode():
    with pytest.raises(ValueError):
        default_curve("anode")


def test_curve_is_immutable():
    c = load_curve(TABLE)
    with pytest.raises(ValueError):
        c.potential[0] = 5.0
    assert isinstance(c, OcpCurve)
