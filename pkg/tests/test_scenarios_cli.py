"""Built-in scenarios, TOML configuration and the command-line interface."""

import csv
import hashlib
import json
import textwrap

import numpy as np
import pytest
from click.testing import CliRunner

from gcsim import regressions as R
from gcsim.cli import main
from gcsim.config import config_from_dict, load_config
from gcsim.errors import ConfigError, EngineIncompatibility, RegressionFailure
from gcsim.phase_space import qrdm
from gcsim.scenarios import (
    MeasurementSpec,
    builtin,
    run_scenario,
    scenario_dispersive,
    scenario_stern_gerlach,
    simulate,
)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# --- built-in scenarios ----------------------------------------------------------

def test_stern_gerlach_engines_agree():
    cf = simulate(scenario_stern_gerlach(n_times=41))
    ode = simulate(scenario_stern_gerlach(n_times=41, engine="ode"))
    for a, b in zip(cf.states, ode.states):
        for key in a.keys():
            np.testing.assert_allclose(a[key].sigma, b[key].sigma, atol=1e-6)
            np.testing.assert_allclose(a[key].r, b[key].r, atol=1e-6)


def test_stern_gerlach_run_tables():
    res = run_scenario(scenario_stern_gerlach(n_times=41))
    assert min(res.tables["post_wigner_wigner"].column("value")) > -1e-12  # strong dephasing: no fringes
    assert all(r.passed for r in res.regressions)
    inter = res.tables["interference"]
    taus = inter.column("tau")
    np.testing.assert_allclose(inter.column("C"), [R.sg_contrast(t, 0.5, 2.0, 0.8, 0.1, 0.8) for t in taus],
                               atol=1e-9)
    np.testing.assert_allclose(inter.column("px_plus") + inter.column("px_minus"), 1.0)
    wig = res.tables["post_wigner_wigner"]
    assert len(wig.rows) == 2 * 101 * 101
    weak = run_scenario(scenario_stern_gerlach(n_times=41, Gamma_x=0.02, Gamma_z=0.0))
    assert min(weak.tables["post_wigner_wigner"].column("value")) < 0
    assert len(res.tables["post_wigner"].rows) == 2


def test_dispersive_branch_frequencies_and_displacement():
    cfg = scenario_dispersive(kappa=0.0, s=1.0, x0=3.0, n_times=5)
    traj = simulate(cfg)
    t = traj.times[-1]
    for lab, w in (((1, 1), 1.0), ((1, -1), 0.0), ((-1, 1), 0.0), ((-1, -1), -1.0)):
        q = traj[-1][(lab, lab)]
        np.testing.assert_allclose(q.r, 3.0 * np.array([np.cos(w * t), -np.sin(w * t)]), atol=1e-8)
        np.testing.assert_allclose(q.sigma, np.eye(2), atol=1e-8)  # no decay, no squeezing
    cfg = scenario_dispersive(n_times=7)
    traj = simulate(cfg)
    for t, st in zip(traj.times, traj.states):
        assert abs(st[((1, 1), (1, 1))].r[1]) == pytest.approx(R.r_p(t, 20.0, 3.0, 1.0), abs=1e-6)


def test_dispersive_lab_frame_matches_rotating_frame():
    kw = dict(x0=4.0, n_times=11, p_grid=(-8, 8, 41))
    base = run_scenario(scenario_dispersive(**kw))
    lab = run_scenario(scenario_dispersive(frame="lab", omega=5.0, **kw))
    for name, col in (("p_homodyne", "density"), ("p_homodyne_post_qrdm", "negativity")):
        np.testing.assert_allclose(lab.tables[name].column(col), base.tables[name].column(col), atol=1e-8)


def test_dispersive_exchange_term_is_a_sector_phase():
    kw = dict(x0=4.0, n_times=11, p_grid=(-8, 8, 41))
    base = run_scenario(scenario_dispersive(**kw))
    xy = run_scenario(scenario_dispersive(include_xy=True, **kw))
    np.testing.assert_allclose(xy.tables["p_homodyne"].column("density"),
                               base.tables["p_homodyne"].column("density"), atol=1e-10)
    t = base.trajectory.times[-1]
    q0, q1 = qrdm(base.trajectory[-1]), qrdm(xy.trajectory[-1])
    # odd-even coherences pick up a relative phase chi * tau, the rest is untouched
    assert abs(np.angle(q1[0, 1] / q0[0, 1])) == pytest.approx(t, abs=1e-8)
    np.testing.assert_allclose(q1[0, 3], q0[0, 3], atol=1e-10)
    np.testing.assert_allclose(q1[1, 2], q0[1, 2], atol=1e-10)
    # with overlapping peaks the phase does change the conditional entanglement
    neg0 = base.tables["p_homodyne_post_qrdm"].column("negativity")
    neg1 = xy.tables["p_homodyne_post_qrdm"].column("negativity")
    assert np.abs(neg1 - neg0).max() > 1e-2


def test_dispersive_exchange_term_irrelevant_for_resolved_peaks():
    kw = dict(n_times=11, p_grid=(-4, 4, 41))
    base = run_scenario(scenario_dispersive(**kw)).tables["p_homodyne_post_qrdm"]
    xy = run_scenario(scenario_dispersive(include_xy=True, **kw)).tables["p_homodyne_post_qrdm"]
    np.testing.assert_allclose(xy.column("negativity"), base.column("negativity"), atol=1e-6)


def test_closed_form_rejects_quadratic_coherences():
    with pytest.raises(EngineIncompatibility):
        scenario_dispersive(engine="closed-form")


def test_closed_form_diagonal_only_is_allowed():
    cfg = scenario_dispersive(x0=2.0, n_times=5, engine="ode")
    cfg.outputs = ("widths",)
    cfg.measurements = [MeasurementSpec("homodyne", phi=np.pi / 2, eta=0.6, grid=((-5, 5, 11),))]
    cfg.engine = "closed-form"
    res = run_scenario(cfg)
    ode = run_scenario(scenario_dispersive(x0=2.0, n_times=5))
    np.testing.assert_allclose(res.tables["widths"].column("width_+-"), ode.tables["widths"].column("width_+-"),
                               atol=1e-6)


def test_measurement_spec_validation():
    with pytest.raises(ConfigError):
        MeasurementSpec("photon-counting")
    with pytest.raises(ConfigError):
        MeasurementSpec("homodyne", eta=0.0)
    with pytest.raises(ConfigError):
        builtin("nope")
    with pytest.raises(ConfigError):
        builtin("stern-gerlach", bogus=1)
    with pytest.raises(ConfigError, match="not on the schedule"):
        run_scenario(scenario_stern_gerlach(n_times=11).__class__(
            **{**scenario_stern_gerlach(n_times=11).__dict__,
               "measurements": [MeasurementSpec("qubit", at=1.0, wigner=((-1, 1, 3), (-1, 1, 3)))]}))


def test_regression_failure_keeps_result():
    cfg = scenario_stern_gerlach(n_times=21, engine="ode")
    cfg.integrator = type(cfg.integrator)(method="rk4", max_step=1.5)
    with pytest.raises(RegressionFailure) as info:
        run_scenario(cfg)
    assert info.value.result.failed_regressions


# --- configuration files -------------------------------------------------------

EXPLICIT = textwrap.dedent("""
    [scenario]
    name = "driven-cavity"
    engine = "ode"
    seed = 11

    [model]
    n_modes = 1
    n_qubits = 1
    H_m = [[1.0, 0.0], [0.0, 1.0]]
    r_m = [0.0, 0.0]
    H_q = [[[0.2, 0.0], [0.0, 0.2]]]
    Gamma_z = [0.1]
    B = { re = [[0.25, 0.0], [0.0, 0.25]], im = [[0.0, -0.25], [0.25, 0.0]] }

    [initial]
    mode = "displaced-squeezed"
    x0 = 2.0
    s = 1.5

    [schedule]
    t1 = 3.0
    n = 31

    [[measurements]]
    kind = "homodyne"
    phi = 1.5707963267948966
    eta = 0.8
    grid = [[-6.0, 6.0, 25]]
    region = [-1.0, 1.0]
    post_qrdm = true
    samples = 50

    [[measurements]]
    kind = "qubit"
    name = "sx"
    axis = "x"
""")


def test_explicit_config(tmp_path):
    path = tmp_path / "cav.toml"
    path.write_text(EXPLICIT)
    cfg = load_config(path)
    assert cfg.name == "driven-cavity" and cfg.seed == 11 and len(cfg.times) == 31
    np.testing.assert_allclose(cfg.r0, [2.0, 0.0])
    res = run_scenario(cfg)
    assert {"trajectory", "qrdm", "homodyne", "homodyne_post_qrdm", "homodyne_samples", "sx"} <= set(res.tables)
    assert len(res.tables["homodyne_samples"].rows) == 50


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d["model"].pop("n_qubits"), "model.n_qubits"),
    (lambda d: d["model"].update(bogus=1), "model: unknown fields"),
    (lambda d: d["model"].update(D=[[0, 0], [0, 1]]), "model.B"),
    (lambda d: d["initial"].update(mode="cat"), "initial.mode"),
    (lambda d: d["schedule"].pop("t1"), "schedule.t1"),
    (lambda d: d["measurements"][0].update(colour=1), "measurements[0]"),
    (lambda d: d["measurements"][0].update(eta=2.0), "measurements[0]"),
    (lambda d: d.update(outputs={"observables": ["spin"]}), "outputs.observables"),
    (lambda d: d.update(integrator={"method": "euler"}), "integrator"),
    (lambda d: d["scenario"].update(engine="magic"), "engine"),
])
def test_config_errors_name_the_field(mutate, field):
    import tomli

    data = tomli.loads(EXPLICIT)
    mutate(data)
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        config_from_dict(data)


def test_syntax_error_reports_line(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('[scenario]\nbuiltin = "stern-gerlach"\n[params\n')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


def test_builtin_config(tmp_path):
    path = tmp_path / "sg.toml"
    path.write_text('[scenario]\nbuiltin = "stern-gerlach"\nseed = 3\n[params]\nf_q = 0.3\nn_times = 21\n')
    cfg = load_config(path)
    assert cfg.params["f_q"] == 0.3 and cfg.seed == 3
    path.write_text('[scenario]\nbuiltin = "nope"\n')
    with pytest.raises(ConfigError, match="scenario.builtin"):
        load_config(path)


# --- command-line interface -------------------------------------------------------

@pytest.fixture
def runner():
    return CliRunner()


def test_cli_run_builtin(runner, tmp_path):
    res = runner.invoke(main, ["run", "stern-gerlach", "--out", str(tmp_path), "-p", "n_times=21"])
    assert res.exit_code == 0, res.output
    run_dir = tmp_path / "stern-gerlach"
    manifest = json.loads((run_dir / "manifest.json").read_text())
    for key in ("engine", "integrator", "versions", "wall_time_s", "regressions", "files", "seed"):
        assert key in manifest
    assert manifest["engine"] == "closed-form"
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((run_dir / name).read_bytes()).hexdigest() == digest
    header, rows = _read_csv(run_dir / "trajectory.csv")
    assert len(header) == len(set(header))
    assert "r0.re" in header and "sigma00.re" in header
    header, _ = _read_csv(run_dir / "interference.csv")
    assert header == ["tau", "C", "phi", "px_plus", "px_minus"]


def test_cli_reruns_are_bit_identical(runner, tmp_path):
    cfg = tmp_path / "cav.toml"
    cfg.write_text(EXPLICIT)
    digests = []
    for out in ("a", "b"):
        res = runner.invoke(main, ["run", str(cfg), "--out", str(tmp_path / out)])
        assert res.exit_code == 0, res.output
        digests.append(json.loads((tmp_path / out / "driven-cavity" / "manifest.json").read_text())["files"])
    assert digests[0] == digests[1]
    res = runner.invoke(main, ["run", str(cfg), "--out", str(tmp_path / "c"), "--seed", "12"])
    other = json.loads((tmp_path / "c" / "driven-cavity" / "manifest.json").read_text())["files"]
    assert other["homodyne_samples.csv"] != digests[0]["homodyne_samples.csv"]
    assert other["trajectory.csv"] == digests[0]["trajectory.csv"]


def test_cli_output_env(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("GCSIM_OUT", str(tmp_path / "env"))
    res = runner.invoke(main, ["run", "dispersive-entanglement", "-p", "n_times=5", "-p", "x0=3"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "env" / "dispersive-entanglement" / "widths.csv").exists()


def test_cli_oracle_comparison(runner, tmp_path):
    res = runner.invoke(main, ["run", "dispersive-entanglement", "--oracle", "--out", str(tmp_path),
                               "-p", "x0=2", "-p", "n_times=6"])
    assert res.exit_code == 0, res.output
    header, rows = _read_csv(tmp_path / "dispersive-entanglement" / "oracle_comparison.csv")
    assert header[:3] == ["tau", "key", "quantity"]
    assert max(float(r[header.index("abs_diff")]) for r in rows) < 1e-3
    manifest = json.loads((tmp_path / "dispersive-entanglement" / "manifest.json").read_text())
    assert manifest["oracle_max_abs_diff"] < 1e-3 and manifest["n_max"] == 40


def test_cli_exit_codes(runner, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[scenario\n")
    assert runner.invoke(main, ["run", str(bad), "--out", str(tmp_path)]).exit_code == 2
    assert runner.invoke(main, ["run", "no-such-file.toml"]).exit_code == 2
    assert runner.invoke(main, ["run", "dispersive-entanglement", "--engine", "closed-form",
                                "--out", str(tmp_path)]).exit_code == 3
    slow = tmp_path / "rk4.toml"
    slow.write_text('[scenario]\nbuiltin = "stern-gerlach"\nengine = "ode"\n[params]\nn_times = 21\n'
                    '[integrator]\nmethod = "rk4"\nmax_step = 1.5\n')
    res = runner.invoke(main, ["run", str(slow), "--out", str(tmp_path)])
    assert res.exit_code == 4
    assert (tmp_path / "stern-gerlach" / "regressions.csv").exists()
    assert runner.invoke(main, ["run", str(slow), "-p", "f_q=1"]).exit_code == 2


def test_cli_list_and_eval(runner):
    res = runner.invoke(main, ["list-scenarios"])
    assert "stern-gerlach" in res.output and "dispersive-entanglement" in res.output
    res = runner.invoke(main, ["eval", "tau_max", "chi=1", "kappa=3"])
    assert res.exit_code == 0 and float(res.output) == pytest.approx(np.arctan(2 / 3))
    res = runner.invoke(main, ["eval", "--list"])
    assert "sigma_o(tau, s, eta, kappa)" in res.output
    assert runner.invoke(main, ["eval", "nope"]).exit_code == 2
    assert runner.invoke(main, ["eval", "tau_max", "chi"]).exit_code == 2
    assert runner.invoke(main, ["eval", "tau_max", "chi=x", "kappa=3"]).exit_code == 2
