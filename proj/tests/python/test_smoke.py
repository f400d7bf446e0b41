import math

import pytest

crorl = pytest.importorskip("crorl")


def test_weighted_ridge_free_single_point_uncertainty():
    import numpy as np

    backend = crorl.FunctionClassBackend.linear(np.array([[1.0]]), 1, 1)
    u = crorl.uncertainty((0, 0), [(0, 0)], [1.0], backend, 1.0)
    assert u == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_weight_iteration_example():
    import numpy as np

    phi = np.array([[1.0], [0.1]])
    backend = crorl.FunctionClassBackend.linear(phi, 2, 1)
    w = crorl.iterate_weights([(0, 0), (1, 0)], backend, 0.5, 1.0)
    assert w.sigma_sq[0] == pytest.approx(1.0 / (0.5 * math.sqrt(2.01)), rel=1e-9)
    assert w.sigma_sq[1] == 1.0


def test_pipeline_end_to_end():
    lin = crorl.build_linear_mdp(4, 8, 2, 3, 3)
    mdp = lin.base
    opt = crorl.solve_optimal(mdp)
    assert crorl.suboptimality(mdp, opt.policy) == pytest.approx(0.0, abs=1e-12)

    clean = crorl.collect(mdp, crorl.Policy.uniform(3, 8, 2), 200, 5)
    assert len(clean.data) == 600
    spec = crorl.AttackSpec(crorl.AttackMode.adversarial_reward, 0.2, 3.0, seed=7)
    attacked = crorl.corrupt(clean, spec, mdp)
    assert attacked.report.num_corrupted == 120
    assert attacked.report.zeta_approx == pytest.approx(600 * 0.2 * 3.0)

    backend = crorl.FunctionClassBackend.linear(lin.phi, 8, 2)
    cfg = crorl.SolverConfig()
    cfg.beta_scale = 0.05
    rep = crorl.solve(crorl.Algorithm.cr_pevi, attacked.data, backend, cfg)
    assert len(rep.beta) == 3
    assert crorl.suboptimality(mdp, rep.policy) >= 0.0


def test_sweep_is_deterministic():
    cfg = """
master_seed = 3
mdp.S = 6
sweep.n = 50
sweep.seeds = 2
solver.beta_scale = 0.05
"""
    a, errs_a = crorl.run_sweep_csv(cfg)
    b, errs_b = crorl.run_sweep_csv(cfg)
    assert errs_a == [] and errs_b == []
    assert a == b
    assert len(a.strip().splitlines()) == 1 + 2 * 2


def test_bad_config_names_key():
    with pytest.raises(Exception, match="mdp.kindd"):
        crorl.run_sweep_csv("mdp.kindd = linear\n")
