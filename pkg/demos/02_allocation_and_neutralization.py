"""Disjoint beam allocation neutralizes cross-user interference.

Each user gets its strongest transmit beams, with conflicts resolved round
robin so the sets never overlap.  When every user's power sits on its own
beams, probing one user is invisible to the others; the script quantifies
that with the interference-neutralization residual and then shows it breaking
when two users are forced onto a shared beam.

Run:  python demos/02_allocation_and_neutralization.py
"""

import numpy as np

from beamkey import (
    ArrayGeometry,
    PathSet,
    allocate_bs_beams,
    allocate_ut_beams,
    beam_covariances,
    build_matrices,
    grid_sines,
    neutralization_residual,
    sampling_matrix,
)

M, N, N_PATHS, USERS = 32, 4, 2, 3
rng = np.random.default_rng(3)
bs, ut = ArrayGeometry(M), ArrayGeometry(N)

# On-grid users with disjoint departure beams.
beam_pool = rng.permutation(M)[: USERS * N_PATHS].reshape(USERS, N_PATHS)
covs = []
for k in range(USERS):
    aoa_idx = rng.choice(N, size=N_PATHS, replace=False)
    paths = PathSet(
        gains=np.sqrt(np.full(N_PATHS, 1 / N_PATHS)),
        aoa=np.arcsin(grid_sines(N)[aoa_idx]),
        aod=np.arcsin(grid_sines(M)[beam_pool[k]]),
        powers=np.full(N_PATHS, 1 / N_PATHS),
    )
    covs.append(beam_covariances(paths, bs, ut))

bs_sets = allocate_bs_beams([np.real(np.diag(c.r_bs)) for c in covs], N_PATHS)
ut_sets = [allocate_ut_beams(np.real(np.diag(c.r_ut)), 2) for c in covs]
alloc = build_matrices(bs_sets, ut_sets, sampling_matrix(bs), [sampling_matrix(ut)] * USERS)

print("allocated transmit beams per user:", [s.tolist() for s in alloc.bs_beams])
print("\ncross-user neutralization residuals (probing user -> listening user):")
for k in range(USERS):
    for kp in range(USERS):
        if kp == k:
            continue
        r = neutralization_residual(alloc.bs_selectors[k], alloc.ut_selectors[kp],
                                    covs[kp].lambda_full)
        print(f"  user {k} -> user {kp}: {r:.2e}")

# Force an overlap: probe user 0 straight through user 1's strongest beam.
shared = int(alloc.bs_beams[1][0])
forced = np.eye(M, dtype=complex)[:, [shared]]
r = neutralization_residual(forced, alloc.ut_selectors[1], covs[1].lambda_full)
print(f"\nprobing directly on user 1's beam {shared} instead: residual = {r:.3f}")
print(f"(the leak equals the mean power riding on the shared beam, {1 / N_PATHS} here; "
      "disjoint beams keep it at ~0)")
