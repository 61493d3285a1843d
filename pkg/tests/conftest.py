import numpy as np


def random_qp_instance(rng, max_beams=4, max_users=12):
    """A random small bandwidth-allocation instance for oracle comparisons."""
    n_beams = 2 * int(rng.integers(1, max_beams // 2 + 1))
    n_users = int(rng.integers(1, max_users + 1))
    demands = rng.uniform(5.0, 60.0, n_users)
    cand = np.full((n_users, 2), -1, dtype=int)
    eff = np.zeros((n_users, 2))
    for n in range(n_users):
        k = int(rng.integers(1, 3))
        beams = rng.choice(n_beams, size=min(k, n_beams), replace=False)
        for c, b in enumerate(beams):
            cand[n, c] = b
            eff[n, c] = rng.uniform(0.3, 4.5)
    mode = "paired" if rng.uniform() < 0.5 else "per_beam"
    total = float(rng.uniform(60.0, 500.0))
    per_beam = float(rng.uniform(30.0, 250.0))
    cap = float(rng.uniform(20.0, 62.5))
    return dict(demands=demands, cand_eff=eff, cand_beams=cand, n_beams=n_beams,
                mode=mode, total_bandwidth_mhz=total, user_cap_mhz=cap,
                per_beam_cap_mhz=per_beam)


def qp_slot_groups(cand_beams, n_beams, mode):
    """Budget-group index per candidate slot, as the oracle expects."""
    group = np.where(cand_beams >= 0,
                     cand_beams // 2 if mode == "paired" else cand_beams, -1)
    n_groups = n_beams // 2 if mode == "paired" else n_beams
    return group, n_groups
