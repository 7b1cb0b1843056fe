"""Top-level acceptance checks, one numbered criterion per test group.

These pin the package's headline guarantees end to end: orthonormality,
reported-number reproduction, exact recovery, moment agreement with plain
Monte Carlo, stopping-rule behavior, cross-validation equivalence, noise and
sample-count trends, sparse-grid exactness, and byte-level determinism.
"""

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pceperf.config import physical_from_germ
from pceperf.inputspace import (
    InputParameter,
    Normal,
    ProblemSpec,
    Uniform,
    sample_germ,
)
from pceperf.montecarlo import McConfig, run_mc, stopping_quantile, t_quantile, z_quantile
from pceperf.orthopoly import (
    evaluate_orthonormal,
    gauss_rule,
    generalized_laguerre,
    hermite,
    jacobi,
    laguerre,
    legendre,
)
from pceperf.pce import (
    basis_matrix,
    basis_size,
    fit_projection,
    fit_regression,
    moments,
    predict,
    select_degree,
    total_degree_basis,
)
from pceperf.quadrature import integrate, smolyak_grid, tensor_grid
from pceperf.robustness import cov, loo_error, noise_sweep

MM1 = ProblemSpec((InputParameter("lam", Uniform(10.0, 90.0)),))
GAUSS = ProblemSpec((InputParameter("g", Normal(0.0, 1.0)),))

SERVICE = 0.01


def response_time(lam):
    return SERVICE / (1.0 - lam * SERVICE)


# ------------------------------------------------------------ criterion 1


@pytest.mark.parametrize(
    "family",
    [
        hermite(),
        legendre(),
        jacobi(0.0, 0.0),
        jacobi(1.0, 2.0),
        laguerre(),
        generalized_laguerre(1.5),
    ],
    ids=["hermite", "legendre", "jacobi00", "jacobi12", "laguerre", "genlaguerre15"],
)
def test_criterion_1_orthonormal_gram(family):
    nodes, weights = gauss_rule(family, 16)
    table = np.vstack([evaluate_orthonormal(family, d, nodes) for d in range(11)])
    gram = (table * weights) @ table.T
    assert np.max(np.abs(gram - np.eye(11))) < 1e-10


# ------------------------------------------------------------ criterion 2


def test_criterion_2_cov_reproduces_reported_values():
    cases = [
        ((1.84, 2.94), 159.0),
        ((9.54e9, 3.72e8), 3.89),
        ((2837.65, 6323.81), 222.85),
    ]
    for (mean, sd), reported in cases:
        ours = cov(mean, sd)
        assert ours == pytest.approx(100.0 * sd / mean, rel=1e-12)
        assert abs(ours - reported) / reported < 0.01


# ------------------------------------------------------------ criterion 3


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("degree", [1, 2, 3, 4, 5, 6])
def test_criterion_3_in_span_recovery(dim, degree):
    problem = GAUSS if dim == 1 else ProblemSpec(
        (InputParameter("g", Normal(0.0, 1.0)), InputParameter("u", Uniform(-1.0, 1.0)))
    )
    basis = total_degree_basis(problem.germ_families(), degree)
    rng = np.random.default_rng(100 * dim + degree)
    coef_true = rng.normal(size=basis.size)

    germ = sample_germ(problem, 5 * basis.size, 50 + degree)
    y = basis_matrix(basis, germ) @ coef_true
    model = fit_regression(problem, germ, y, degree)
    assert np.max(np.abs(predict(model, germ) - y)) < 1e-8
    assert loo_error(problem, germ, y, degree).loo_error < 1e-10

    rule = smolyak_grid(problem.germ_families(), degree)
    projected = fit_projection(
        problem,
        rule,
        lambda node: float((basis_matrix(basis, np.atleast_2d(node)) @ coef_true)[0]),
        degree,
    )
    assert np.max(np.abs(predict(projected, germ) - y)) < 1e-8


# ------------------------------------------------------------ criterion 4


def test_criterion_4_moments_match_plain_mc():
    for s in range(5):
        germ = sample_germ(MM1, 2000, 10 + s)
        y = response_time(physical_from_germ(MM1, germ)[:, 0])
        selection = select_degree(MM1, germ, y, d_max=10)
        mom = moments(fit_regression(MM1, germ, y, selection.best_degree))

        rng = np.random.default_rng(900 + s)
        ref = response_time(rng.uniform(10.0, 90.0, size=1_000_000))
        se_mean = ref.std(ddof=1) / 1000.0
        var_ref = ref.var(ddof=1)
        centered = ref - ref.mean()
        se_var = math.sqrt((np.mean(centered**4) - var_ref**2) / 1_000_000)
        assert abs(mom.mean - ref.mean()) < 3.0 * se_mean
        assert abs(mom.variance - var_ref) < 3.0 * se_var


# ------------------------------------------------------------ criterion 5


def test_criterion_5_stopping_rule_behavior():
    constant = run_mc(lambda v: 4.2, MM1, McConfig(min_samples=10, max_samples=1000))
    assert constant.converged is True
    assert constant.samples_used == 10
    assert constant.relative_error == 0.0

    # lognormal-style response: far too dispersed to meet 5% in 1000 draws
    wild = run_mc(
        lambda v: float(np.exp(3.0 * v[0])),
        GAUSS,
        McConfig(tolerance=0.05, max_samples=1000, seed=3),
    )
    assert wild.converged is False
    assert wild.samples_used == 1000
    assert wild.relative_error > 0.05

    assert stopping_quantile(29, 0.05) == t_quantile(0.975, 28)
    assert stopping_quantile(30, 0.05) == z_quantile(0.975)
    assert stopping_quantile(29, 0.05) > stopping_quantile(30, 0.05)


# ------------------------------------------------------------ criterion 6


def test_criterion_6_loo_equals_exhaustive_refit():
    rng = np.random.default_rng(0)
    for _ in range(20):
        dim = int(rng.integers(1, 4))
        degree = int(rng.integers(1, 5))
        while basis_size(dim, degree) > 15:
            degree -= 1
        p = basis_size(dim, degree)
        n = int(rng.integers(p + 3, 61))
        problem = ProblemSpec(
            tuple(InputParameter(f"x{k}", Normal(0.0, 1.0)) for k in range(dim))
        )
        germ = sample_germ(problem, n, int(rng.integers(10_000)))
        y = np.sin(germ.sum(axis=1)) + 0.1 * rng.normal(size=n)
        rep = loo_error(problem, germ, y, degree)

        basis = total_degree_basis(problem.germ_families(), degree)
        design = basis_matrix(basis, germ)
        brute = 0.0
        for k in range(n):
            keep = np.arange(n) != k
            coef, *_ = np.linalg.lstsq(design[keep], y[keep], rcond=None)
            brute += (y[k] - design[k] @ coef) ** 2
        brute /= np.sum((y - y.mean()) ** 2)
        assert rep.loo_error == pytest.approx(brute, rel=1e-8)


# ------------------------------------------------------------ criterion 7


def test_criterion_7_noise_degrades_fit_quality():
    monotone = 0
    for s in range(20):
        germ = sample_germ(GAUSS, 500, 1000 + s)
        g = germ[:, 0]
        y = 5.0 + 0.8 * g + 0.4 * (g * g - 1.0) / math.sqrt(2.0)
        rows = noise_sweep(
            GAUSS, germ, y, ran_levels=(20.0, 10.0, 5.0, 1.0), seed=s, d_max=6
        )
        loos = [row.loo_error for row in rows]
        assert all(v is not None for v in loos)
        if all(b >= a for a, b in zip(loos, loos[1:])):
            monotone += 1
    assert monotone >= 18


# ------------------------------------------------------------ criterion 8


def test_criterion_8_more_samples_do_not_hurt():
    # "within statistical noise" pinned as: each step may exceed the previous
    # LOO by at most a factor 1.5 (plus an absolute floor for exact zeros)
    within = 0
    for s in range(20):
        loos = []
        for count in (100, 300, 700, 1000):
            germ = sample_germ(MM1, count, 2000 + s)
            y = response_time(physical_from_germ(MM1, germ)[:, 0])
            loos.append(select_degree(MM1, germ, y, d_max=10).best_loo)
        if all(loos[i + 1] <= loos[i] * 1.5 + 1e-12 for i in range(3)):
            within += 1
    assert within >= 18


# ------------------------------------------------------------ criterion 9


def analytic_uniform_moment(powers) -> float:
    value = 1.0
    for k in powers:
        if k % 2 == 1:
            return 0.0
        value *= 1.0 / (k + 1)
    return value


def all_monomials_up_to(total):
    for a in range(total + 1):
        for b in range(total + 1 - a):
            for c in range(total + 1 - a - b):
                yield (a, b, c)


def test_criterion_9_exactness_of_both_rules():
    families = (legendre(), legendre(), legendre())
    sparse = smolyak_grid(families, 3)
    tensor = tensor_grid(families, (4, 4, 4))
    for rule in (sparse, tensor):
        for powers in all_monomials_up_to(7):
            got = integrate(rule, lambda x, p=powers: float(np.prod(x**np.array(p))))
            assert abs(got - analytic_uniform_moment(powers)) < 1e-9, powers


@pytest.mark.xfail(
    strict=True,
    reason=(
        "after merging, the 3-dim level-3 sparse rule carries 69 nodes, more "
        "than the 64-node tensor rule of equal exactness; the sparse "
        "construction only pulls ahead at lower levels or higher dimension"
    ),
)
def test_criterion_9_node_count_advantage():
    families = (legendre(), legendre(), legendre())
    sparse = smolyak_grid(families, 3)
    tensor = tensor_grid(families, (4, 4, 4))
    assert sparse.n_nodes < tensor.n_nodes


# ------------------------------------------------------------ criterion 10


def run_cli(args, out_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "pceperf", *args, "--out", str(out_dir), "--no-timestamp"],
        capture_output=True,
        text=True,
        timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def test_criterion_10_end_to_end_determinism(tmp_path):
    config = Path(__file__).resolve().parent.parent / "configs" / "ecommerce.json"
    assert config.is_file()
    trees = []
    for tag in ("first", "second"):
        out = tmp_path / tag
        run_cli(["fit", "--config", str(config)], out)
        run_cli(["analyze", "--config", str(config)], out)
        trees.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert trees[0].keys() == trees[1].keys()
    for name in trees[0]:
        assert trees[0][name] == trees[1][name], f"{name} differs between runs"
    # the report carries real content, not just matching emptiness
    report = json.loads(trees[0]["report.json"].decode())
    assert set(report["indices"]) == {"response_time", "throughput"}
