"""Two-way probing: both ends observe the same effective channel.

The base station sends precoded pilots downlink; terminals answer through the
conjugate combiners.  Noiseless, the two vectorized estimates agree exactly
(channel reciprocity); with noise they stay strongly correlated, which is the
randomness the secret key is distilled from.  Pilot reuse needs only
m_e + n_e pilot slots instead of M + sum(N_k).

Run:  python demos/03_probing_reciprocity.py
"""

import numpy as np

from beamkey import (
    ArrayGeometry,
    allocate_bs_beams,
    allocate_ut_beams,
    beam_covariances,
    build_matrices,
    dimension_reduction_factor,
    downlink_probe,
    make_pilots,
    pilot_overhead,
    sample_paths,
    sampling_matrix,
    synthesize_channel,
    uplink_probe,
    vectorize_observations,
)

M, N, N_PATHS, M_E, N_E = 64, 4, 4, 4, 4
rng = np.random.default_rng(11)
bs, ut = ArrayGeometry(M), ArrayGeometry(N)

paths = sample_paths(N_PATHS, rng)
cov = beam_covariances(paths, bs, ut)
alloc = build_matrices(
    allocate_bs_beams([np.real(np.diag(cov.r_bs))], M_E),
    [allocate_ut_beams(np.real(np.diag(cov.r_ut)), N_E)],
    sampling_matrix(bs), [sampling_matrix(ut)],
)
pilots = make_pilots("reused", M_E, N_E, M, [N], 1)
channel = [synthesize_channel(paths, bs, ut)]

print(f"full channel: {N}x{M} = {N * M} coefficients; probed effective channel: "
      f"{N_E}x{M_E} = {N_E * M_E}")
print(f"dimension reduction factor: {dimension_reduction_factor(M, N, M_E, N_E):.1f}x")
print(f"pilot overhead: reused = {pilot_overhead('reused', M, [N], M_E, N_E)} slots, "
      f"traditional = {pilot_overhead('traditional', M, [N], M_E, N_E)} slots")

z_dl = downlink_probe(channel, alloc, pilots, 0.0)[0]
z_ul = uplink_probe(channel, alloc, pilots, 0.0)[0]
obs = vectorize_observations(z_dl, z_ul, 0.0)
print(f"\nnoiseless: max |z_dl - z_ul| = {np.max(np.abs(obs.z_dl - obs.z_ul)):.2e}")

for snr_db in (0, 10, 20):
    noise = 10 ** (-snr_db / 10)
    noise_rng = np.random.default_rng(snr_db)
    num = den_d = den_u = 0.0
    for _ in range(2000):
        zd = downlink_probe(channel, alloc, pilots, noise, noise_rng)[0]
        zu = uplink_probe(channel, alloc, pilots, noise, noise_rng)[0]
        o = vectorize_observations(zd, zu, noise)
        num += np.vdot(o.z_dl, o.z_ul).real
        den_d += np.linalg.norm(o.z_dl) ** 2
        den_u += np.linalg.norm(o.z_ul) ** 2
    print(f"snr {snr_db:3d} dB: downlink/uplink correlation = "
          f"{num / np.sqrt(den_d * den_u):.4f}")
