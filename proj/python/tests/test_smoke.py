import math

import numpy as np
import pytest

import biharm


def test_phantoms():
    assert "gauss-bump" in biharm.phantom_names()
    v = biharm.phantom_value("gauss-bump", np.array([0.5, 0.0]), np.array([0.2, 0.8]), np.array([0.1, 0.0]))
    assert v[0] == pytest.approx(0.05)
    assert abs(v[1]) < 1e-12
    with pytest.raises(ValueError):
        biharm.phantom_value("nope", 0.0, 0.0, 0.0)


def test_closed_form_and_quadrature_agree():
    one = lambda x2, x3: 1.0 + 0.0j
    exact = biharm.attenuated_xray_of_one(0.7, 0.3, 0.6)
    assert biharm.attenuated_xray(one, 0.7, 0.3, 0.6) == pytest.approx(exact, rel=1e-6)
    L = 2 * math.sqrt(1 - 0.3**2)
    assert exact == pytest.approx((1 - math.exp(-0.6 * L)) / 0.6)


def test_fbp_round_trip():
    th = biharm.chord_angles(60)
    p = biharm.chebyshev_offsets(48)
    f = lambda x2, x3: math.exp(-((x2 - 0.1) ** 2 + x3**2) / 0.08) + 0j
    data = np.array([[biharm.attenuated_xray(f, t, q, 0.4, 24) for q in p] for t in th])
    g = np.linspace(-0.5, 0.5, 11)
    pts = np.array([[a, b] for a in g for b in g])
    rec = biharm.invert_attenuated(data, th, p, 0.4, pts)
    exact = np.array([f(a, b).real for a, b in pts])
    assert np.linalg.norm(rec - exact) / np.linalg.norm(exact) < 0.1


def test_config_text_round_trip():
    c = biharm.config_from_text("n1=10\nh_ladder=0.2,0.1\nstage=sinogram\n")
    assert c.domain.n1 == 10
    assert c.h_ladder == [0.2, 0.1]
    assert c.stage == "sinogram"
    with pytest.raises(ValueError):
        biharm.config_from_text("bogus=1\n")


def test_tiny_pipeline(tmp_path):
    c = biharm.PipelineConfig()
    c.domain = biharm.DomainConfig(1.0, 0.8, 8, 17)
    c.phantom = "zero"
    c.h_ladder = [0.1]
    c.lambda_max = 1.0
    c.lambda_samples = 3
    c.angles = 16
    c.offsets = 12
    c.boundary_lambdas = []
    c.recover_checks = 1
    c.out = str(tmp_path)
    rep = biharm.run(c)
    assert rep["status"] == "ok"
    assert rep["reconstruct.linf"] < 1e-12
    box, params = biharm.read_field(str(tmp_path / "q_rec.field"))
    assert box.shape == (8, 17, 17)
    dl = biharm.read_dtn(str(tmp_path / "dlambda.dtn"))
    assert dl.shape[0] == dl.shape[1]
    assert np.abs(dl).max() == 0.0
