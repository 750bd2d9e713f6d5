"""Acceptance gate: one PASS/FAIL line per criterion, at the stated tolerances."""

import itertools
import time

import numpy as np
import pytest

from beamsec import coding
from beamsec.allocation import brute_force, optimize, residuals, uniform
from beamsec.channel import ArraySpec, NoiseSpec, assemble, derive_seed, steering
from beamsec.cli import main
from beamsec.codebook import Beam, BeamPair, snr_bob
from beamsec.config import reference_config_path
from beamsec.harness import (STREAM_ENSEMBLE, Scheme, Variant, bob_capacities, run,
                             scheme_pairs, secrecy_csl)
from beamsec.scenario import PathComponent, PathSet, Point2D
from beamsec.secrecy import (absolute_secrecy_rate, instantaneous_secrecy, leakage_curve,
                             rate_grid, zero_leakage_rate)

pytestmark = pytest.mark.acceptance

SEEDS = range(100)


def test_criterion_1_array_gain(acceptance_line):
    start = time.perf_counter()
    worst_norm = 0.0
    grid = np.arange(0.0, 181.0, 1.0)
    for n in range(1, 65):
        a = steering(ArraySpec(n), grid)
        worst_norm = max(worst_norm, float(np.max(np.abs(np.sum(np.abs(a) ** 2, axis=-1) - n)) / n))
    noise = NoiseSpec.from_dbm(-74.0, 20.0)
    worst_snr = 0.0
    rng = np.random.default_rng(1)
    for na, nb in [(1, 1), (4, 8), (16, 16), (32, 32), (64, 7)]:
        for _ in range(5):
            alpha = float(rng.uniform(1e-6, 1e-3))
            aod, aoa = rng.uniform(5, 175, 2)
            ps = PathSet((PathComponent(alpha, aod, aoa, 1.0, 0),), Point2D(0, 0), Point2D(1, 0))
            tx, rx = ArraySpec(na), ArraySpec(nb)
            H = assemble(ps, tx, rx)
            w = Beam(steering(tx, aod) / np.sqrt(na), float(aod))
            f = Beam(steering(rx, aoa) / np.sqrt(nb), float(aoa))
            got = snr_bob(H, BeamPair(0, 0, w, f, 0.0), noise)
            expected = noise.tx_power * na * nb * alpha ** 2 / noise.power
            worst_snr = max(worst_snr, abs(got - expected) / expected)
    elapsed = time.perf_counter() - start
    ok = worst_norm <= 1e-12 and worst_snr <= 1e-9 and elapsed < 1.0
    acceptance_line(1, ok, f"max norm rel err {worst_norm:.2e}, max SNR rel err {worst_snr:.2e}, "
                           f"{elapsed:.3f} s")
    assert ok


def test_criterion_2_allocation(acceptance_line):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    gap_ok = res_ok = uni_ok = 0
    worst_gap = worst_res = 0.0
    n = 200
    for _ in range(n):
        rows, L = int(rng.integers(1, 11)), int(rng.integers(1, 4))
        C = rng.uniform(0, 10, (rows, L)) * (rng.random((rows, L)) > 0.2)
        a = optimize(C)
        bf = brute_force(C, 0.01)
        gap = abs(a.objective - bf.objective)
        worst_gap = max(worst_gap, gap / max(L * 0.01 * C.max(), 1e-300))
        gap_ok += gap <= L * 0.01 * C.max() + 1e-12
        r = max(residuals(C, a).values())
        worst_res = max(worst_res, r)
        res_ok += r <= 1e-9
        uni_ok += a.objective >= uniform(L).value(C)
    elapsed = time.perf_counter() - start
    ok = gap_ok == res_ok == uni_ok == n and elapsed < 10.0
    acceptance_line(2, ok, f"{gap_ok}/{n} within brute-force bound (worst {worst_gap:.2f} of it), "
                           f"max residual {worst_res:.1e}, opt>=uniform {uni_ok}/{n}, "
                           f"{elapsed:.2f} s")
    assert ok


def test_criterion_3_leakage(acceptance_line, ref_config, ref_scene):
    seed, trials = 7, 10_000
    start = time.perf_counter()
    pairs = {
        Variant.LEGACY: scheme_pairs(ref_scene, Scheme(Variant.LEGACY), seed),
        Variant.RANDOM_HOP: scheme_pairs(ref_scene, Scheme(Variant.RANDOM_HOP), seed),
        Variant.BEAMSEC_UNIFORM: scheme_pairs(ref_scene, Scheme(Variant.BEAMSEC_UNIFORM), seed),
    }
    pairs[Variant.BEAMSEC_OPT] = pairs[Variant.BEAMSEC_UNIFORM]
    beams, spans, at = [], {}, 0
    for v in (Variant.LEGACY, Variant.RANDOM_HOP, Variant.BEAMSEC_UNIFORM):
        beams.extend(p.tx_beam for p in pairs[v])
        spans[v] = slice(at, at + len(pairs[v]))
        at += len(pairs[v])
    spans[Variant.BEAMSEC_OPT] = spans[Variant.BEAMSEC_UNIFORM]
    caps = ref_scene.ensemble.capacities(beams, ref_scene.kind, ref_scene.noise,
                                         derive_seed(seed, STREAM_ENSEMBLE), n=trials)
    monotone, close, details = True, True, []
    for v in Variant:
        c_b = bob_capacities(ref_scene, pairs[v])
        sample = caps[:, :, spans[v]]
        csl = secrecy_csl(c_b, sample.max(axis=0))
        T = optimize(csl) if v is Variant.BEAMSEC_OPT else uniform(len(c_b))
        absolute = absolute_secrecy_rate(T, csl)
        rates = rate_grid(float(T.fractions @ c_b))
        p = leakage_curve(rates, instantaneous_secrecy(T, c_b, sample))
        sup = zero_leakage_rate(rates, p)
        monotone &= bool(np.all(np.diff(p) >= 0))
        close &= abs(sup - absolute) <= 0.01
        details.append(f"{v.value} sup {sup:.2f} abs {absolute:.4f}")
    elapsed = time.perf_counter() - start
    ok = monotone and close and elapsed < 30.0
    acceptance_line(3, ok, f"monotone={monotone}; " + ", ".join(details) + f"; {elapsed:.1f} s")
    assert ok


@pytest.fixture(scope="module")
def seed_runs(ref_config, ref_scene):
    start = time.perf_counter()
    runs = [run(ref_config, seed=s, scene=ref_scene) for s in SEEDS]
    return runs, time.perf_counter() - start


def test_criterion_4_scheme_ordering(acceptance_line, seed_runs):
    runs, elapsed = seed_runs
    n = len(runs)
    legacy_zero = sum(r[Variant.LEGACY].report.absolute_rate == 0 for r in runs)
    uniform_pos = sum(r[Variant.BEAMSEC_UNIFORM].report.absolute_rate > 0 for r in runs)
    opt_uni = sum(r[Variant.BEAMSEC_OPT].report.absolute_rate
                  >= r[Variant.BEAMSEC_UNIFORM].report.absolute_rate for r in runs)
    opt_hop = sum(r[Variant.BEAMSEC_OPT].report.mean_rate
                  >= r[Variant.RANDOM_HOP].report.mean_rate for r in runs)
    ok = (legacy_zero == n and uniform_pos == n and opt_uni == n and opt_hop >= 0.95 * n
          and elapsed < 300)
    mean = {v: np.mean([r[v].report.absolute_rate for r in runs]) for v in Variant}
    acceptance_line(4, ok, f"legacy abs=0 {legacy_zero}/{n}, uniform>0 {uniform_pos}/{n}, "
                           f"opt>=uniform {opt_uni}/{n}, opt>=hop (mean rate) {opt_hop}/{n}; "
                           f"mean abs " + " ".join(f"{v.value}={mean[v]:.3f}" for v in Variant)
                           + f"; {elapsed:.0f} s for {n} seeds")
    assert ok


def test_criterion_5_colluding(acceptance_line, seed_runs):
    runs, elapsed = seed_runs  # every run already carries the Q = 1..6 curves
    nonincreasing = exact_q1 = True
    for r in runs:
        for v in Variant:
            curve = r.colluding[v]
            assert [c.q for c in curve] == list(range(1, 7))
            nonincreasing &= all(b.mean <= a.mean and b.worst <= a.worst
                                 for a, b in zip(curve, curve[1:]))
            exact_q1 &= (curve[0].worst == r[v].report.absolute_rate
                         and curve[0].mean == r[v].report.mean_rate)
    ok = nonincreasing and exact_q1 and elapsed < 300
    acceptance_line(5, ok, f"nonincreasing={nonincreasing}, Q=1 exact={exact_q1}, "
                           f"{len(runs)} seeds x {len(Variant)} schemes, "
                           f"{elapsed:.0f} s including the full pipeline")
    assert ok


def test_criterion_6_coding(acceptance_line):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    round_trip = full = none = monotone = True
    for seed in range(50):
        L = int(rng.integers(1, 4))
        bits = [int(b) for b in rng.integers(1, 12 // L + 1, L)]
        m_bits = int(rng.integers(0, sum(bits) + 1))
        p = coding.build([2 ** b for b in bits], m_bits, seed)
        for m in range(p.n_bins):
            round_trip &= coding.decode(coding.encode(m, p, seed * 1000 + m), p) == m
        h = {pat: coding.equivocation(p, pat) for pat in itertools.product((False, True), repeat=L)}
        full &= h[(True,) * L] == 0.0
        none &= h[(False,) * L] == float(m_bits)
        for pat in h:
            for k in range(L):
                if not pat[k]:
                    monotone &= h[pat[:k] + (True,) + pat[k + 1:]] <= h[pat]
    elapsed = time.perf_counter() - start
    ok = round_trip and full and none and monotone and elapsed < 30
    acceptance_line(6, ok, f"round trip={round_trip}, full interception 0={full}, "
                           f"none=message bits={none}, monotone={monotone}, {elapsed:.2f} s")
    assert ok


def test_criterion_7_cli_reproducible(acceptance_line, tmp_path):
    cfg = str(reference_config_path())
    dirs = {name: tmp_path / name for name in ("a", "b", "t1", "t8")}
    codes = [
        main(["run", "--config", cfg, "--seed", "42", "--out", str(dirs["a"])]),
        main(["run", "--config", cfg, "--seed", "42", "--out", str(dirs["b"])]),
        main(["run", "--config", cfg, "--seed", "42", "--threads", "1", "--out", str(dirs["t1"])]),
        main(["run", "--config", cfg, "--seed", "42", "--threads", "8", "--out", str(dirs["t8"])]),
    ]
    names = sorted(p.name for p in dirs["a"].iterdir())

    def same(x, y):
        return sorted(p.name for p in dirs[y].iterdir()) == names and all(
            (dirs[x] / n).read_bytes() == (dirs[y] / n).read_bytes() for n in names)

    repeat, threads = same("a", "b"), same("t1", "t8")
    ok = codes == [0] * 4 and len(names) == 7 and repeat and threads
    acceptance_line(7, ok, f"{len(names)} files; repeat identical={repeat}, "
                           f"threads 1 vs 8 identical={threads}")
    assert ok
