"""Acceptance gate: one test and one printed verdict line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict
lines; each carries the measured figures next to the pinned tolerances.
"""

import math
import time

import numpy as np
import pytest

from blockexpm.bench import RandomInstanceSpec, generate_instance, run_benchmark
from blockexpm.blocks import BlockColumn, matrix_from_columns
from blockexpm.dense import one_norm, rel_error_fro
from blockexpm.generators import (
    HestonParams,
    JacobiParams,
    basis_size,
    build_generator_matrix,
    heston_norm_bound,
    heston_spec,
    jacobi_norm_bound,
    jacobi_spec,
)
from blockexpm.incremental import run_adaptive, run_fixed
from blockexpm.pade import expm_baseline, scaling_power
from blockexpm.pricing import (
    PricingConfig,
    fourier_coefficient,
    price_call,
    scaling_from_bound,
)

BENCH_PARAMS = JacobiParams(
    kappa=0.5, theta=0.04, sigma=0.15, r=0.0, rho=-0.5, vmin=0.01, vmax=1.0
)


def _verdict(num, label, ok, detail):
    line = f"criterion {num:2d} ({label}): {'PASS' if ok else 'FAIL'} [{detail}]"
    print(line)
    assert ok, line


def random_columns(rng, sizes, scale=1.0):
    cols, dim = [], 0
    for b in sizes:
        cols.append(
            BlockColumn(
                scale * rng.standard_normal((dim, b)),
                scale * rng.standard_normal((b, b)),
            )
        )
        dim += b
    return cols


def random_jacobi(rng):
    vmin = float(rng.uniform(0.005, 0.1))
    vmax = vmin + float(rng.uniform(0.1, 2.0))
    return JacobiParams(
        kappa=float(rng.uniform(0.05, 3.0)),
        theta=float(rng.uniform(vmin, vmax)),
        sigma=float(rng.uniform(0.05, 1.5)),
        r=float(rng.uniform(0.0, 0.1)),
        rho=float(rng.uniform(-1.0, 1.0)),
        vmin=vmin,
        vmax=vmax,
    )


def random_heston(rng):
    return HestonParams(
        kappa=float(rng.uniform(0.05, 3.0)),
        theta=float(rng.uniform(0.0, 0.5)),
        sigma=float(rng.uniform(0.05, 1.5)),
        r=float(rng.uniform(0.0, 0.1)),
        rho=float(rng.uniform(-1.0, 1.0)),
    )


@pytest.fixture(scope="module")
def desk_instance():
    # 30 blocks of 20-40, eigenvalues in [-80, -0.5], conditioning near 100
    return generate_instance(
        RandomInstanceSpec(
            seed=20250816, nblocks=30, bmin=20, bmax=40,
            spectrum=(-80.0, -0.5), cond_target=100.0,
        )
    )


def test_01_nesting_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    ok = True
    stages = 0
    for _ in range(20):
        nb = int(rng.integers(5, 16))
        sizes = tuple(int(b) for b in rng.integers(2, 21, nb))
        cols = random_columns(rng, sizes, scale=0.3)
        # anchor the first diagonal entry above the assembled norm so the
        # adaptive run never restarts: nesting is only claimed restart-free
        d0 = cols[0].diag.copy()
        d0[0, 0] = 1.05 * one_norm(matrix_from_columns(cols).data)
        cols[0] = BlockColumn(cols[0].top, d0)
        s_fix = scaling_power(one_norm(matrix_from_columns(cols).data))
        for runner in (run_adaptive(iter(cols)), run_fixed(iter(cols), s=s_fix)):
            prev = None
            for f, rep in runner:
                ok = ok and not rep.restart
                if prev is not None:
                    ok = ok and np.array_equal(f.leading(rep.step - 1).data, prev)
                    stages += 1
                prev = f.data.copy()
    elapsed = time.perf_counter() - t0
    _verdict(
        1, "nesting exactness",
        ok and elapsed < 30.0,
        f"20 instances x 2 strategies, {stages} bit-exact stage checks, {elapsed:.1f}s (budget 30s)",
    )


def test_02_stage_oracle(desk_instance):
    t0 = time.perf_counter()
    inst = desk_instance
    off = inst.partition.offsets
    refs = [
        expm_baseline(inst.data[: off[l + 1], : off[l + 1]].copy())
        for l in range(inst.nblocks)
    ]
    err_a = max(
        rel_error_fro(f.data, refs[rep.step])
        for f, rep in run_adaptive(inst.block_columns())
    )
    s_fin = scaling_power(one_norm(inst.data))
    err_f = max(
        rel_error_fro(f.data, refs[rep.step])
        for f, rep in run_fixed(inst.block_columns(), s=s_fin)
    )
    elapsed = time.perf_counter() - t0
    _verdict(
        2, "stage oracle",
        err_a <= 1e-12 and err_f <= 1e-10 and elapsed < 120.0,
        f"dim {inst.dim}, max err adaptive {err_a:.2e} (tol 1e-12), "
        f"fixed s={s_fin} {err_f:.2e} (tol 1e-10), {elapsed:.1f}s (budget 120s)",
    )


def test_03_speedup(desk_instance):
    t0 = time.perf_counter()
    records = run_benchmark(desk_instance, ["naive", "adaptive"], check=False, repeats=3)
    totals = {}
    for r in records:
        totals[r.method] = r.cum_seconds
    ratio = totals["naive"] / totals["adaptive"]
    elapsed = time.perf_counter() - t0
    _verdict(
        3, "speedup",
        ratio >= 2.0 and elapsed < 300.0,
        f"naive {totals['naive']:.2f}s vs adaptive {totals['adaptive']:.2f}s, "
        f"ratio {ratio:.1f} (need >= 2), {elapsed:.1f}s (budget 300s)",
    )


def test_04_restart_exactness():
    rng = np.random.default_rng(404)
    sizes = (2, 2, 3, 2, 3)
    cols, dim = [], 0
    for j, b in enumerate(sizes):
        mag = 4.0**j  # norms grow so the scaled-norm test must fail
        cols.append(
            BlockColumn(mag * rng.standard_normal((dim, b)), mag * rng.standard_normal((b, b)))
        )
        dim += b
    restarts = 0
    worst = 0.0
    for f, rep in run_adaptive(iter(cols)):
        if rep.restart:
            restarts += 1
            partial = matrix_from_columns(cols[: rep.step + 1]).data
            worst = max(worst, rel_error_fro(f.data, expm_baseline(partial, s=rep.s)))
    _verdict(
        4, "restart exactness",
        restarts >= 2 and worst <= 1e-15,
        f"{restarts} restarts, worst rel err vs from-scratch at same s {worst:.2e} (tol 1e-15)",
    )


def _jacobi_degree2_reference(p):
    # degree-2 generator entries written out independently, basis
    # 1, y, v, y^2, yv, v^2
    s = (math.sqrt(p.vmax) - math.sqrt(p.vmin)) ** 2
    k, t, sg, r, rho = p.kappa, p.theta, p.sigma, p.r, p.rho
    return np.array(
        [
            [0, r, k * t, 0, -rho * sg * p.vmax * p.vmin / s, -sg**2 * p.vmax * p.vmin / s],
            [0, 0, 0, 2 * r, k * t, 0],
            [0, -0.5, -k, 1, r + rho * sg * (p.vmax + p.vmin) / s, 2 * k * t + sg**2 * (p.vmax + p.vmin) / s],
            [0, 0, 0, 0, 0, 0],
            [0, 0, 0, -1, -k, 0],
            [0, 0, 0, 0, -0.5 - rho * sg / s, -2 * k - sg**2 / s],
        ]
    )


def test_05_generator_golden():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20250816)
    draws = [BENCH_PARAMS] + [random_jacobi(rng) for _ in range(10)]
    worst = 0.0
    zeros_exact = True
    for p in draws:
        g, _ = build_generator_matrix(jacobi_spec(p), 2)
        ref = _jacobi_degree2_reference(p)
        nz = ref != 0
        zeros_exact = zeros_exact and bool(np.all(g[~nz] == 0.0))
        worst = max(worst, float(np.max(np.abs(g[nz] - ref[nz]) / np.abs(ref[nz]))))
    elapsed = time.perf_counter() - t0
    _verdict(
        5, "generator golden",
        worst <= 1e-15 and zeros_exact and elapsed < 1.0,
        f"11 parameter sets, worst entry rel err {worst:.2e} (tol 1e-15), "
        f"structural zeros exact: {zeros_exact}, {elapsed:.2f}s (budget 1s)",
    )


def test_06_norm_bound_domination():
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    min_slack = math.inf
    ok = True
    for _ in range(100):
        for draw, spec_fn, bound_fn in (
            (random_jacobi(rng), jacobi_spec, jacobi_norm_bound),
            (random_heston(rng), heston_spec, heston_norm_bound),
        ):
            # the degree-30 matrix nests every smaller one
            g30, _ = build_generator_matrix(spec_fn(draw), 30)
            for n in range(1, 31):
                d = basis_size(2, n)
                nrm = one_norm(g30[:d, :d])
                bound = bound_fn(draw, n)
                ok = ok and nrm <= bound
                min_slack = min(min_slack, (bound - nrm) / bound)
    elapsed = time.perf_counter() - t0
    _verdict(
        6, "norm bound domination",
        ok and elapsed < 60.0,
        f"100 draws x 2 models x degrees 1..30, min relative slack {min_slack:.2e}, "
        f"{elapsed:.1f}s (budget 60s)",
    )


def test_07_scaling_pin():
    s = scaling_from_bound(BENCH_PARAMS, 0.25, 60)
    _verdict(7, "scaling from bound", s == 7, f"degree 60 at tau=0.25 gives s={s} (expect 7)")


def _taylor_expm(a, terms=60):
    # scale below 1, sum the series, square back up
    s = max(0, scaling_power(one_norm(a), 1.0))
    b = a / (2.0**s)
    out = np.eye(a.shape[0])
    p = np.eye(a.shape[0])
    for k in range(1, terms + 1):
        p = p @ b / k
        out = out + p
    for _ in range(s):
        out = out @ out
    return out


def test_08_taylor_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    worst_base = worst_inc = 0.0
    for _ in range(50):
        while True:
            nb = int(rng.integers(1, 5))
            sizes = tuple(int(b) for b in rng.integers(1, 7, nb))
            if sum(sizes) <= 12:
                break
        cols = random_columns(rng, sizes)
        nrm = one_norm(matrix_from_columns(cols).data)
        fac = float(rng.uniform(0.5, 8.0)) / nrm
        cols = [BlockColumn(fac * c.top, fac * c.diag) for c in cols]
        g = matrix_from_columns(cols).data
        oracle = _taylor_expm(g)
        worst_base = max(worst_base, rel_error_fro(expm_baseline(g), oracle))
        last = None
        for f, _ in run_adaptive(iter(cols)):
            last = f
        worst_inc = max(worst_inc, rel_error_fro(last.data, oracle))
    elapsed = time.perf_counter() - t0
    _verdict(
        8, "taylor oracle",
        worst_base <= 1e-11 and worst_inc <= 1e-11 and elapsed < 30.0,
        f"50 matrices, worst baseline {worst_base:.2e}, worst incremental {worst_inc:.2e} "
        f"(tol 1e-11), {elapsed:.1f}s (budget 30s)",
    )


def test_09_pricing():
    t0 = time.perf_counter()
    base = dict(
        params=BENCH_PARAMS, y0=0.0, v0=0.04, tau=0.25,
        logstrike=math.log(1.1), muw=0.0, sigmaw=0.5,
    )
    res_a = price_call(PricingConfig(**base, eps=1e-3))
    res_f = price_call(PricingConfig(**base, eps=1e-3, scaling=7))
    ref = price_call(
        PricingConfig(**base, eps=0.0, n_max=100, scaling=scaling_from_bound(BENCH_PARAMS, 0.25, 100))
    )
    rel_err = abs(res_a.price - ref.price) / abs(ref.price)
    strat_diff = abs(res_a.price - res_f.price)
    elapsed = time.perf_counter() - t0
    ok = (
        res_a.converged
        and res_f.converged
        and 50 <= res_a.terminal_degree <= 75
        and 50 <= res_f.terminal_degree <= 75
        and 5e-4 <= rel_err <= 5e-3
        and strat_diff <= 1e-10
        and elapsed < 120.0
    )
    _verdict(
        9, "pricing",
        ok,
        f"terminal degree {res_a.terminal_degree} (window [50, 75]), price {res_a.price:.6e}, "
        f"rel err vs degree-100 reference {rel_err:.2e} (window [5e-4, 5e-3]), "
        f"adaptive-vs-fixed-7 diff {strat_diff:.1e} (tol 1e-10), {elapsed:.1f}s (budget 120s)",
    )


def test_10_payoff_coefficient_oracle():
    rng = np.random.default_rng(88)
    worst = 0.0
    for _ in range(20):
        muw = float(rng.uniform(-0.5, 0.5))
        sigmaw = float(rng.uniform(0.1, 1.0))
        k = muw + float(rng.uniform(-1.5, 1.5)) * sigmaw
        r = float(rng.uniform(0.0, 0.1))
        tau = float(rng.uniform(0.1, 2.0))
        f0 = fourier_coefficient(0, k, muw, sigmaw, r, tau)
        d1 = (muw + sigmaw**2 - k) / sigmaw
        d2 = d1 - sigmaw
        cdf = lambda z: 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))
        closed = math.exp(-r * tau) * (
            math.exp(muw + sigmaw**2 / 2) * cdf(d1) - math.exp(k) * cdf(d2)
        )
        worst = max(worst, abs(f0 - closed) / abs(closed))
    _verdict(
        10, "payoff coefficient oracle",
        worst <= 1e-12,
        f"20 draws, worst rel err vs closed form {worst:.2e} (tol 1e-12)",
    )


def test_11_property_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1111)
    lower_exact = True
    junk = prod = trans = diag = 0.0
    for _ in range(100):
        nb = int(rng.integers(2, 6))
        sizes = tuple(int(b) for b in rng.integers(1, 9, nb))
        dim = sum(sizes)
        mu = float(rng.uniform(-6.0, -1.0))
        cols, d0 = [], 0
        for b in sizes:
            cols.append(
                BlockColumn(
                    0.3 * rng.standard_normal((d0, b)),
                    mu * np.eye(b) + 0.3 * rng.standard_normal((b, b)),
                )
            )
            d0 += b
        g = matrix_from_columns(cols).data
        nrm = one_norm(g)
        if nrm > 20.0:
            fac = 20.0 / nrm
            cols = [BlockColumn(fac * c.top, fac * c.diag) for c in cols]
            g = matrix_from_columns(cols).data
        off = np.concatenate(([0], np.cumsum(sizes)))
        mask = np.zeros((dim, dim), bool)
        for bi in range(nb):
            for bj in range(bi):
                mask[off[bi] : off[bi + 1], off[bj] : off[bj + 1]] = True

        last, s_used = None, None
        for f, rep in run_fixed(iter(cols), s=scaling_power(one_norm(g))):
            last, s_used = f, rep.s
        lower_exact = lower_exact and not np.any(last.data[mask] != 0.0)

        fb = expm_baseline(g)
        if mask.any():
            junk = max(junk, float(np.max(np.abs(fb[mask])) / np.max(np.abs(fb))))
        prod = max(prod, float(np.max(np.abs(fb @ expm_baseline(-g) - np.eye(dim)))))
        trans = max(trans, rel_error_fro(expm_baseline(g.T), fb.T))
        for l in range(nb):
            blk = g[off[l] : off[l + 1], off[l] : off[l + 1]].copy()
            got = last.data[off[l] : off[l + 1], off[l] : off[l + 1]]
            diag = max(diag, rel_error_fro(got, expm_baseline(blk, s=s_used)))
    elapsed = time.perf_counter() - t0
    ok = (
        lower_exact
        and junk <= 1e-13
        and prod <= 1e-10
        and trans <= 1e-13
        and diag <= 1e-13
        and elapsed < 60.0
    )
    _verdict(
        11, "property suite",
        ok,
        f"100 instances; incremental lower blocks exactly zero: {lower_exact}; "
        f"baseline lower junk {junk:.2e} (tol 1e-13); inverse product {prod:.2e} (tol 1e-10); "
        f"transpose {trans:.2e} (tol 1e-13); diagonal blocks {diag:.2e} (tol 1e-13); "
        f"{elapsed:.1f}s (budget 60s)",
    )
