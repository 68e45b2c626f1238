"""Acceptance suite: one test per criterion, each printing a pass/fail line.

These run the full reference configuration (128 BS antennas, 6 users with 4
antennas each, 6 paths, 100 trials) and take a few minutes in total.
"""

import time

import numpy as np
import pytest

from beamkey._util import vec
from beamkey.allocation import (
    allocate_bs_beams,
    allocate_ut_beams,
    build_matrices,
    neutralization_residual,
)
from beamkey.channel import (
    ArrayGeometry,
    PathSet,
    beam_covariances,
    grid_sines,
    sample_paths,
    sampling_matrix,
    synthesize_channel,
)
from beamkey.experiments import (
    ScenarioConfig,
    empirical_downlink_covariance,
    run_beam_gain_profile,
    run_multiuser_unit_rate,
    run_single_user_rate,
    run_validation_suite,
    closed_form_agreement_sweep,
)
from beamkey.keyrate import (
    RateInputs,
    assemble_observation_covariances,
    pilot_overhead,
)
from beamkey.probing import downlink_probe, make_pilots, uplink_probe

SEED = 2025


def report(number: int, name: str, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {number} [{verdict}] {name}: {detail}")


def test_criterion_1_closed_form_matches_gaussian_mi():
    started = time.perf_counter()
    worst = closed_form_agreement_sweep(SEED, 200)
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-8 and elapsed < 30.0
    report(1, "closed-form rate equals Gaussian MI reference",
           ok, f"worst relative error {worst:.3e} (tol 1e-08), {elapsed:.1f}s (< 30s)")
    assert worst <= 1e-8
    assert elapsed < 30.0


def test_criterion_2_pilot_overheads_exact():
    t_ta = pilot_overhead("traditional", 128, [4] * 6, 6, 4)
    t_pa = pilot_overhead("reused", 128, [4] * 6, 6, 4)
    ok = (t_ta, t_pa) == (152, 10)
    report(2, "pilot overhead arithmetic", ok, f"traditional={t_ta} (=152), reused={t_pa} (=10)")
    assert t_ta == 152
    assert t_pa == 10


def test_criterion_3_single_user_rate_orderings():
    started = time.perf_counter()
    config = ScenarioConfig(users=1, trials=100, seed=SEED)
    result = run_single_user_rate(config)
    elapsed = time.perf_counter() - started

    by_snr: dict = {}
    for rec in result.records:
        by_snr.setdefault(rec["snr_db"], {})[rec["scheme"]] = rec["rate_bits"]
    ordering_ok = all(
        sch["perfect"] >= sch["reduced_me6"] - 1e-9
        and sch["reduced_me6"] >= sch["reduced_me4"] - 1e-9
        for sch in by_snr.values()
    )
    top = max(by_snr)
    ratio = by_snr[top]["reduced_me6"] / by_snr[top]["perfect"]
    ok = ordering_ok and ratio >= 0.9 and elapsed < 300.0
    report(3, "single-user rate ordering and closeness",
           ok, f"pointwise order {'held' if ordering_ok else 'VIOLATED'}, "
               f"rate(me6)/rate(perfect) at {top:.0f} dB = {ratio:.3f} (>= 0.9), "
               f"{elapsed:.0f}s (< 300s)")
    assert ordering_ok
    assert ratio >= 0.9
    assert elapsed < 300.0


def test_criterion_4_multiuser_unit_rate_orderings():
    started = time.perf_counter()
    config = ScenarioConfig(trials=100, seed=SEED)
    result = run_multiuser_unit_rate(config)
    elapsed = time.perf_counter() - started

    by_snr: dict = {}
    for rec in result.records:
        by_snr.setdefault(rec["snr_db"], {})[rec["scheme"]] = rec["unit_rate"]
    violations = [
        snr for snr, sch in by_snr.items()
        if snr >= 0 and not (sch["reused_me6"] > sch["reused_me4"] > sch["orthogonal"])
    ]
    ok = not violations and elapsed < 600.0
    report(4, "multi-user unit-rate ordering",
           ok, f"reused(6) > reused(4) > orthogonal at all SNR >= 0 dB "
               f"{'held' if not violations else f'VIOLATED at {violations}'}, "
               f"{elapsed:.0f}s (< 600s)")
    assert not violations
    assert elapsed < 600.0


def test_criterion_5_beam_concentration():
    config = ScenarioConfig(seed=SEED)
    result = run_beam_gain_profile(config)

    captures = []
    for k in range(config.users):
        gains = np.array([rec[f"gain_user_{k}"] for rec in result.records])
        captures.append(np.sort(gains)[::-1][:6].sum() / gains.sum())
    min_capture = min(captures)
    capture_ok = min_capture >= 0.80
    median_att = result.metadata["median_adjacent_attenuation_db"]
    attenuation_ok = median_att >= 15.0
    ok = capture_ok and attenuation_ok
    report(5, "beam concentration and adjacent-user attenuation",
           ok, f"per-user top-6 capture min = {min_capture:.3f} "
               f"({'OK' if capture_ok else 'BELOW 0.80'}; all: "
               + ", ".join(f"{c:.3f}" for c in captures)
               + f"), median adjacent attenuation = {median_att:.1f} dB (>= 15)")
    # Under sine-uniform path angles the expected top-6 capture is ~0.79 (an
    # off-grid path's nearest beam keeps ~0.77 of its power on average), so
    # the 0.80 per-user floor fails for almost every seed, the default
    # included.  The threshold is kept as stated rather than loosened.
    assert attenuation_ok
    assert capture_ok, (
        f"top-6 capture per user = {[f'{c:.3f}' for c in captures]}; "
        "expected >= 0.80 for each user"
    )


def test_criterion_6_reciprocity_and_neutralization_on_grid():
    rng = np.random.default_rng(SEED)
    n_users, m, n_ut, n_p = 3, 32, 4, 3
    bs_geom, ut_geom = ArrayGeometry(m), ArrayGeometry(n_ut)
    a_bs, a_ut = sampling_matrix(bs_geom), sampling_matrix(ut_geom)
    bs_idx = rng.permutation(m)[: n_users * n_p].reshape(n_users, n_p)
    paths_list, covs = [], []
    for k in range(n_users):
        ut_idx = rng.choice(n_ut, size=n_p, replace=False)
        paths = PathSet(
            gains=np.sqrt(np.full(n_p, 1 / n_p)) * np.exp(1j * rng.uniform(0, 2 * np.pi, n_p)),
            aoa=np.arcsin(grid_sines(n_ut)[ut_idx]),
            aod=np.arcsin(grid_sines(m)[bs_idx[k]]),
            powers=np.full(n_p, 1 / n_p),
        )
        paths_list.append(paths)
        covs.append(beam_covariances(paths, bs_geom, ut_geom))
    bs_sets = allocate_bs_beams([np.real(np.diag(c.r_bs)) for c in covs], n_p)
    ut_sets = [allocate_ut_beams(np.real(np.diag(c.r_ut)), 3) for c in covs]
    alloc = build_matrices(bs_sets, ut_sets, a_bs, [a_ut] * n_users)
    pilots = make_pilots("reused", n_p, 3, m, [n_ut] * n_users, n_users)
    channels = [synthesize_channel(p, bs_geom, ut_geom) for p in paths_list]

    z_dl = downlink_probe(channels, alloc, pilots, 0.0)
    z_ul = uplink_probe(channels, alloc, pilots, 0.0)
    worst_recip = max(
        float(np.linalg.norm(vec(z_dl[k]) - vec(z_ul[k].T)))
        / max(float(np.linalg.norm(vec(z_dl[k]))), 1e-300)
        for k in range(n_users)
    )
    worst_resid = max(
        neutralization_residual(alloc.bs_selectors[k], alloc.ut_selectors[kp],
                                covs[kp].lambda_full)
        for k in range(n_users) for kp in range(n_users) if kp != k
    )
    ok = worst_recip <= 1e-10 and worst_resid <= 1e-10
    report(6, "end-to-end reciprocity and neutralization",
           ok, f"max relative z_dl/z_ul gap = {worst_recip:.3e} (<= 1e-10), "
               f"max cross-user residual = {worst_resid:.3e} (<= 1e-10)")
    assert worst_recip <= 1e-10
    assert worst_resid <= 1e-10


def test_criterion_7_covariance_consistency():
    rng = np.random.default_rng(SEED + 7)
    m, n_ut, n_p, m_e, n_e, n_users = 16, 2, 2, 2, 2, 2
    noise = 0.1
    bs_geom, ut_geom = ArrayGeometry(m), ArrayGeometry(n_ut)
    a_bs, a_ut = sampling_matrix(bs_geom), sampling_matrix(ut_geom)
    paths_list = [sample_paths(n_p, rng) for _ in range(n_users)]
    covs = [beam_covariances(p, bs_geom, ut_geom) for p in paths_list]
    bs_sets = allocate_bs_beams([np.real(np.diag(c.r_bs)) for c in covs], m_e)
    ut_sets = [allocate_ut_beams(np.real(np.diag(c.r_ut)), n_e) for c in covs]
    alloc = build_matrices(bs_sets, ut_sets, a_bs, [a_ut] * n_users)
    pilots = make_pilots("reused", m_e, n_e, m, [n_ut] * n_users, n_users)
    inputs = RateInputs(
        lambda_full=[c.lambda_full for c in covs],
        bs_selectors=list(alloc.bs_selectors),
        ut_selectors=list(alloc.ut_selectors),
        precoders=list(alloc.precoders),
        combiners=list(alloc.combiners),
        noise_power=noise, t_d=m_e, t_u=n_e,
    )
    expected = assemble_observation_covariances(inputs, 0).r_zdl
    empirical = empirical_downlink_covariance(
        paths_list, alloc, pilots, noise, rounds=100_000, rng=rng, user=0
    )
    worst = float(np.max(np.abs(empirical - expected)))
    ok = worst <= 5e-2
    report(7, "assembled covariance matches simulated probing",
           ok, f"entrywise gap over 1e5 rounds = {worst:.3e} (<= 5e-02)")
    assert worst <= 5e-2


def test_criterion_8_validation_suite_green():
    config = ScenarioConfig(
        bs_antennas=16, users=2, ut_antennas=4, n_paths=2, bs_beams=2, ut_beams=2,
        bs_beams_compare=[2, 1], trials=5, seed=SEED,
    )
    reportobj = run_validation_suite(config)
    failed = [c.name for c in reportobj.checks if c.status == "fail"]
    report(8, "validation property suite",
           reportobj.passed,
           "all properties passed" if reportobj.passed else f"failures: {failed}")
    print(reportobj.to_text())
    assert reportobj.passed, f"failing properties: {failed}"
