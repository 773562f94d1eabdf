import json

import numpy as np
import pytest

import epsrecon as er


def twin_spec():
    s = er.DomainSpec()
    s.g_bounds = er.Box([-0.24, -0.24, -0.32], [0.24, 0.24, 0.16])
    s.omega_bounds = er.Box([-0.16, -0.16, -0.24], [0.16, 0.16, 0.08])
    s.gamma_z = 0.08
    s.source_z = 0.16
    return s


def cube(mesh, value):
    c = mesh.centers()
    inside = (np.abs(c[:, 0]) < 0.08) & (np.abs(c[:, 1]) < 0.08) & (c[:, 2] > -0.12) & (c[:, 2] < 0.0)
    v = np.ones(mesh.n_cells)
    v[inside] = value
    return er.CoefficientField.from_values(mesh, v)


@pytest.fixture(scope="module")
def setup():
    spec = twin_spec()
    mesh = er.build_base_mesh(spec, 0.04)
    cfg = er.ForwardConfig(t_final=1.2, dt=0.01)
    return spec, mesh, cfg


def test_mesh_and_field(setup):
    spec, mesh, _ = setup
    assert mesh.n_cells == 12 * 12 * 10
    eps = cube(mesh, 4.0)
    assert eps.max_in_omega() == 4.0
    assert eps.values.shape == (1440,)
    with pytest.raises(er.Error):
        er.CoefficientField.from_values(mesh, np.full(mesh.n_cells, 30.0))


def test_forward_record_shapes(setup):
    spec, mesh, cfg = setup
    rec = er.solve_forward(spec, er.CoefficientField.background(mesh, 1.0), cfg)
    d = rec.dirichlet()
    assert d.shape == (rec.n_nodes, cfg.time_grid.n_steps + 1, 3)
    assert np.all(np.isfinite(d))
    assert np.abs(d[:, :, 1]).max() > 0.5


def test_unstable_step_raises(setup):
    spec, mesh, _ = setup
    with pytest.raises(er.NumericalError, match="StabilityError"):
        er.solve_forward(spec, er.CoefficientField.background(mesh, 1.0), er.ForwardConfig(t_final=0.3, dt=0.03))


def test_pipeline_and_report(setup):
    spec, mesh, cfg = setup
    truth = cube(mesh, 4.0)
    glob = er.gaussian_smooth(truth, 0.03)
    glob_rec = er.solve_forward(spec, glob, cfg)
    raw = er.synthesize_twin_data(spec, truth, cfg, er.SourceWaveform(30.0), 0.0)
    g_incl = er.calibrate(raw, er.gamma_plane(spec, glob_rec))
    scaled = er.synthesize_twin_data(spec, truth, cfg, er.SourceWaveform(30.0), 0.0)
    scaled.samples = scaled.samples * 1e3
    assert np.array_equal(er.calibrate(scaled, er.gamma_plane(spec, glob_rec)).samples, g_incl.samples)
    immersed = er.immerse(g_incl, er.gamma1_plane(spec, glob_rec), 0.5)
    data = er.complement_boundary_data(glob_rec, immersed)
    cfg_a = er.AdaptiveConfig()
    cfg_a.max_refinements = 0
    cfg_a.max_iters = 3
    res = er.run_adaptive(data, glob, cfg, adaptive=cfg_a)
    lines = [json.loads(l) for l in res.record_json.splitlines()]
    assert lines[-1]["stop"] == res.stop
    rep = er.make_report(res.eps, truth)
    assert rep["classification"] == "dielectric"
    assert abs(rep["n_target"] ** 2 - rep["eps_max"]) < 1e-12
    img = er.threshold_image(res.eps)
    v, w = img.values, res.eps.values
    assert np.all((v == 1.0) | (v == w))


def test_files_round_trip(setup, tmp_path):
    spec, mesh, cfg = setup
    eps = cube(mesh, 2.5)
    er.write_coefficient(tmp_path / "e.wsmesh", eps)
    back = er.read_coefficient(tmp_path / "e.wsmesh")
    assert np.array_equal(back.values, eps.values)
    with pytest.raises(er.IoError):
        er.read_coefficient(tmp_path / "missing.wsmesh")


def test_config_defaults():
    cfg = json.loads(er.default_config_json())
    assert cfg["waveform"]["omega"] == 30.0
    assert cfg["time"]["dt"] == 0.003
    assert cfg["cg"]["theta"] == 1e-9
    assert er.normalize_config_json("{}") == er.default_config_json()
    with pytest.raises(er.ConfigError):
        er.normalize_config_json('{"bogus": 1}')
