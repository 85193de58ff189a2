"""Pilot symbols and IRS reflection patterns for the 2PCE and 3PCE protocols.

Conventions: slots, users and elements are 0-based in every array and set
(user 0 is the typical user). ``pilots[k, i]`` is the symbol of user ``k``
in slot ``i`` and ``patterns[:, i]`` is the reflection vector of slot ``i``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import dft_matrix

REGIMES = ("MgeN", "MltN_shared", "MltN_orthogonal")


@dataclass
class TrainingSchedule:
    pilots: np.ndarray  # (K, tau)
    patterns: np.ndarray  # (N, tau)
    phase_boundaries: list  # slot offsets delimiting consecutive phases, starting at 0
    regime: str
    strategy: str = "2PCE"
    active_sets: list | None = None  # per slot (users, elements), M<N segments only

    def __post_init__(self):
        self.pilots = np.asarray(self.pilots, dtype=complex)
        self.patterns = np.asarray(self.patterns, dtype=complex)
        if self.pilots.shape[1] != self.patterns.shape[1]:
            raise ValueError("pilots and patterns disagree on the number of slots")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        for name, arr in (("pilot", self.pilots), ("pattern", self.patterns)):
            mod = np.abs(arr)
            if not np.all(np.isclose(mod, 0.0, atol=1e-12) | np.isclose(mod, 1.0, atol=1e-12)):
                raise ValueError(f"{name} entries must have modulus 0 or 1")

    @property
    def tau(self) -> int:
        return self.pilots.shape[1]

    @property
    def K(self) -> int:
        return self.pilots.shape[0]

    @property
    def N(self) -> int:
        return self.patterns.shape[0]

    def phase_slices(self) -> list[slice]:
        b = list(self.phase_boundaries) + [self.tau]
        return [slice(b[j], b[j + 1]) for j in range(len(b) - 1)]

    def to_json(self) -> str:
        pair = lambda z: [float(z.real), float(z.imag)]
        slots = [{"pilot": [pair(z) for z in self.pilots[:, i]],
                  "pattern": [pair(z) for z in self.patterns[:, i]]} for i in range(self.tau)]
        active = None
        if self.active_sets is not None:
            active = [[list(map(int, u)), list(map(int, e))] for u, e in self.active_sets]
        return json.dumps({"strategy": self.strategy, "regime": self.regime, "tau": self.tau,
                           "phase_boundaries": list(map(int, self.phase_boundaries)),
                           "active_sets": active, "slots": slots})

    @classmethod
    def from_json(cls, text: str) -> "TrainingSchedule":
        d = json.loads(text)
        cplx = lambda rows: np.array([[complex(*z) for z in r] for r in rows], dtype=complex)
        pilots = cplx([s["pilot"] for s in d["slots"]]).T
        patterns = cplx([s["pattern"] for s in d["slots"]]).T
        active = None
        if d["active_sets"] is not None:
            active = [(tuple(u), tuple(e)) for u, e in d["active_sets"]]
        return cls(pilots, patterns, d["phase_boundaries"], d["regime"], d["strategy"], active)


@dataclass(frozen=True)
class IndexSets:
    """Element split for the M < N shared design (0-based element indices)."""

    chi_A: tuple  # per user 1..K-1, sorted element indices estimated in Phase II-A
    chi_B: tuple  # per user 1..K-1, element indices estimated in Phase II-B
    gamma: int
    delta: int
    pairs_B: tuple = field(default=())  # per Phase II-B slot, ((user, element), ...)


def regime_constants(M: int, N: int) -> tuple[int, int]:
    """``gamma = floor((M+N)/M)`` and ``delta = N - (gamma-1) M``."""
    gamma = (M + N) // M
    return gamma, N - (gamma - 1) * M


def phase1_schedule(N: int) -> tuple[np.ndarray, int]:
    """Phase-I reflection matrix ``V_I`` (columns ``[1; theta_i]``) and its length."""
    if N < 1:
        raise ValueError("N must be positive")
    return dft_matrix(N + 1), N + 1


def _segment(K, N, tau):
    return np.zeros((K, tau), dtype=complex), np.zeros((N, tau), dtype=complex)


def phase2_schedule_mgeN(M: int, N: int, K: int) -> TrainingSchedule:
    """All users 2..K at once with ``[D_{K-1}; D_{K-1}]`` pilots; IRS all +1 then all -1."""
    if M < N:
        raise ValueError("this design requires M >= N")
    L = max(K - 1, 0)
    pilots, patterns = _segment(K, N, 2 * L)
    if L:
        D = dft_matrix(L)
        pilots[1:, :L] = D.T
        pilots[1:, L:] = D.T
        patterns[:, :L] = 1.0
        patterns[:, L:] = -1.0
    return TrainingSchedule(pilots, patterns, [0], "MgeN")


def index_sets(M: int, N: int, K: int) -> IndexSets:
    if M >= N:
        raise ValueError("index sets are defined for M < N only")
    gamma, delta = regime_constants(M, N)
    chi_A, chi_B = [], []
    for k in range(2, K + 1):
        # 1-based residues with 0 -> N, then shifted to 0-based
        B = sorted({((j - 1) % N) for j in range((k - 2) * delta + 1, (k - 1) * delta + 1)})
        chi_B.append(tuple(B))
        chi_A.append(tuple(n for n in range(N) if n not in set(B)))
    pairs = []
    total = (K - 1) * delta
    for t in range(math.ceil(total / M) if total else 0):
        M_i = min(M, total - t * M)
        slot = []
        for m in range(1, M_i + 1):
            g = t * M + m
            slot.append((math.ceil(g / delta), (g - 1) % N))
        pairs.append(tuple(slot))
    return IndexSets(tuple(chi_A), tuple(chi_B), gamma, delta, tuple(pairs))


def phase2_schedule_mltN_shared(M: int, N: int, K: int) -> tuple[TrainingSchedule, IndexSets]:
    """Phase II-A (one user per gamma-slot window) followed by Phase II-B
    (several users sharing slots, each paired with one element)."""
    sets = index_sets(M, N, K)
    gamma = sets.gamma
    tau_a = (K - 1) * gamma
    tau_b = len(sets.pairs_B)
    pilots, patterns = _segment(K, N, tau_a + tau_b)
    active = []
    for u in range(1, K):
        A = np.array(sets.chi_A[u - 1], dtype=int)
        start = (u - 1) * gamma
        for o in range(1, gamma):
            i = start + o - 1
            elems = A[(o - 1) * M: o * M]
            pilots[u, i] = 1.0
            patterns[elems, i] = 1.0
            active.append(((u,), tuple(int(e) for e in elems)))
        i = start + gamma - 1
        pilots[u, i] = 1.0
        patterns[A, i] = -1.0
        active.append(((u,), tuple(int(e) for e in A)))
    for t, slot in enumerate(sets.pairs_B):
        i = tau_a + t
        users = sorted({u for u, _ in slot})
        elems = [e for _, e in slot]
        pilots[users, i] = 1.0
        patterns[elems, i] = 1.0
        active.append((tuple(users), tuple(elems)))
    sched = TrainingSchedule(pilots, patterns, [0, tau_a] if tau_b else [0], "MltN_shared",
                             active_sets=active)
    return sched, sets


def phase2_schedule_mltN_orthogonal(M: int, N: int, K: int) -> TrainingSchedule:
    """Each user 2..K alone for gamma+1 slots; elements switched on in blocks of M."""
    if M >= N:
        raise ValueError("this design requires M < N")
    gamma, _ = regime_constants(M, N)
    L = gamma + 1
    pilots, patterns = _segment(K, N, (K - 1) * L)
    block = np.arange(N) // M  # 0-based offset of the slot that turns element n on
    active = []
    for u in range(1, K):
        start = (u - 1) * L
        pilots[u, start:start + L] = 1.0
        for o in range(gamma):
            elems = np.flatnonzero(block == o)
            patterns[elems, start + o] = 1.0
            active.append(((u,), tuple(int(e) for e in elems)))
        patterns[:, start + gamma] = -1.0
        active.append(((u,), tuple(range(N))))
    return TrainingSchedule(pilots, patterns, [0], "MltN_orthogonal", active_sets=active)


def _concat(first: TrainingSchedule, second: TrainingSchedule, regime, strategy, active=None):
    offset = first.tau
    bounds = list(first.phase_boundaries) + [offset + b for b in second.phase_boundaries]
    if second.tau == 0:
        bounds = list(first.phase_boundaries)
    return TrainingSchedule(np.hstack([first.pilots, second.pilots]),
                            np.hstack([first.patterns, second.patterns]),
                            bounds, regime, strategy, active)


def schedule_2pce(M: int, N: int, K: int, mltN_regime: str = "shared") -> TrainingSchedule:
    """Complete 2PCE schedule. ``mltN_regime`` selects the M < N design:
    ``"shared"`` (minimal overhead) or ``"orthogonal"``."""
    V_I, tau1 = phase1_schedule(N)
    pilots = np.zeros((K, tau1), dtype=complex)
    pilots[0] = 1.0
    phase1 = TrainingSchedule(pilots, V_I[1:], [0], "MgeN")
    if M >= N:
        seg, regime = phase2_schedule_mgeN(M, N, K), "MgeN"
    elif mltN_regime == "shared":
        seg, _ = phase2_schedule_mltN_shared(M, N, K)
        regime = "MltN_shared"
    elif mltN_regime == "orthogonal":
        seg, regime = phase2_schedule_mltN_orthogonal(M, N, K), "MltN_orthogonal"
    else:
        raise ValueError(f"unknown M<N regime {mltN_regime!r}")
    active = None
    if seg.active_sets is not None:
        active = [((0,), tuple(range(N)))] * tau1 + list(seg.active_sets)
    return _concat(phase1, seg, regime, "2PCE", active)


def phase3_pairs_3pce(M: int, N: int, K: int) -> list[tuple]:
    """Per Phase-3 slot of the 3PCE baseline with M < N, the (user, element)
    pairs served; pair ``g`` maps to user ``g // N + 1`` and element ``g % N``."""
    total = (K - 1) * N
    return [tuple((g // N + 1, g % N) for g in range(t, min(t + M, total)))
            for t in range(0, total, M)]


def schedule_3pce(M: int, N: int, K: int) -> TrainingSchedule:
    """3PCE baseline: K slots with the IRS off and K-point DFT pilots; N slots of
    user 0 alone under N-point DFT patterns; then the scaling-factor phase."""
    tau3 = max(K - 1, math.ceil((K - 1) * N / M))
    tau = K + N + tau3
    pilots = np.zeros((K, tau), dtype=complex)
    patterns = np.zeros((N, tau), dtype=complex)
    pilots[:, :K] = dft_matrix(K).T
    pilots[0, K:K + N] = 1.0
    patterns[:, K:K + N] = dft_matrix(N)
    off = K + N
    if M >= N:
        for u in range(1, K):
            pilots[u, off + u - 1] = 1.0
            patterns[:, off + u - 1] = 1.0
        regime = "MgeN"
    else:
        for t, slot in enumerate(phase3_pairs_3pce(M, N, K)):
            for u, e in slot:
                pilots[u, off + t] = 1.0
                patterns[e, off + t] = 1.0
        regime = "MltN_shared"
    bounds = [0, K, K + N] if tau3 else [0, K]
    return TrainingSchedule(pilots, patterns, bounds, regime, "3PCE")


def training_overhead(M: int, N: int, K: int, strategy: str = "2PCE") -> int:
    if min(M, N, K) < 1:
        raise ValueError("M, N and K must be positive")
    if strategy == "2PCE":
        if M >= N:
            return N + 2 * K - 1
        return N + K + math.ceil((K - 1) * N / M)
    if strategy == "3PCE":
        return K + N + max(K - 1, math.ceil((K - 1) * N / M))
    raise ValueError(f"unknown strategy {strategy!r}")
