"""Smoke test for the pyatomtwin extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o /tmp/wheels
    pip install /tmp/wheels/pyatomtwin-*.whl
Then run: python3 python/smoke_test.py
"""

import itertools
import math

import numpy as np

import pyatomtwin as at


def qaoa_ratio_numpy(n, edges, betas, gammas):
    """Independent statevector QAOA; angles in half turns."""
    dim = 1 << n
    bits = np.array([[(i >> (n - 1 - q)) & 1 for q in range(n)] for i in range(dim)])
    cut = np.zeros(dim)
    for a, b in edges:
        cut += bits[:, a] != bits[:, b]
    psi = np.full(dim, 1 / math.sqrt(dim), dtype=complex)
    for beta, gamma in zip(betas, gammas):
        for a, b in edges:
            zz = np.where(bits[:, a] == bits[:, b], 1.0, -1.0)
            psi = psi * np.exp(-0.5j * math.pi * gamma * zz)
        rx = np.array([[math.cos(math.pi * beta / 2), -1j * math.sin(math.pi * beta / 2)],
                       [-1j * math.sin(math.pi * beta / 2), math.cos(math.pi * beta / 2)]])
        psi = psi.reshape([2] * n)
        for q in range(n):
            psi = np.moveaxis(np.tensordot(rx, psi, axes=([1], [q])), 0, q)
        psi = psi.reshape(dim)
    return float(np.dot(np.abs(psi) ** 2, cut) / cut.max())


def main():
    g = at.ghz(3, shots=1000, seed=3, ideal=True)
    assert abs(g["fidelity"] - 1.0) < 1e-9, g
    assert set(g["counts"]) <= {"000", "111"}

    noisy = at.ghz(3, shots=1000, seed=3, ideal=False)
    assert 0.5 < noisy["fidelity"] < 1.0, noisy

    edges = [(0, 1), (1, 2), (1, 3)]
    for betas, gammas in [([0.75], [0.696]), ([1.71, 1.19], [0.700, 0.624])]:
        got = at.qaoa_ratio("t4", betas, gammas)
        want = qaoa_ratio_numpy(4, edges, betas, gammas)
        assert abs(got - want) < 1e-9, (got, want)

    # Z^k on |1> has eigenphase k/2 turns; with k = 1 the register reads 100.
    dist = at.qpe(z_power=1.0, bits=3, ideal=True)
    assert abs(dist.get("100", 0.0) - 1.0) < 1e-9, dist

    text = at.compile_program([("h", [0], []), ("cnot", [0, 1], [])], [(3, 3), (3, 4)])
    probs = at.simulate_text(text)
    assert abs(probs["00"] - 0.5) < 1e-9 and abs(probs["11"] - 0.5) < 1e-9, probs

    rng = np.random.default_rng(5)
    cost = rng.uniform(0, 10, size=(5, 5)).tolist()
    rows, total = at.hungarian(cost)
    brute = min(sum(cost[r][c] for c, r in enumerate(p)) for p in itertools.permutations(range(5)))
    assert abs(total - brute) < 1e-9, (total, brute)
    assert abs(sum(cost[r][c] for c, r in enumerate(rows)) - total) < 1e-9

    raw = 0.9 * (1 - 0.02) ** 2
    assert abs(at.spam_correct(raw, 2, 0.02) - 0.9) < 1e-9

    tp = at.trap_profile()
    assert tp["f_vib_radial"] > 0 and tp["f_vib_axial"] > 0

    print("smoke test ok", at.__version__)


if __name__ == "__main__":
    main()
