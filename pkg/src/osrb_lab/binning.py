"""Random binning maps and divergence statistics of the induced law.

A binning assigns each of ``n_items`` alphabet symbols (or sequences) an
independent uniform bin index in ``1..m``.  The induced joint over
(bin, side information) is compared against the ideal uniform-bin product
reference.  Expectations over the binning ensemble come in three flavors:
exhaustive enumeration, an exact set-partition formula for integer Tsallis
orders, and seeded Monte Carlo.

Randomness: all draws use numpy's Philox counter-based generator keyed by
``(seed, stream)``, so trial substreams are reproducible and independent
of execution order.  Monte Carlo reductions use a fixed-shape pairwise
tree, which keeps results bit-identical at any thread count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np

from .measures import (
    GuardError,
    JointPmf,
    Pmf,
    _atomic_write_text,
    check_alpha,
    d_infinity_raw,
    tsallis_raw,
)

ENUM_GUARD = 10 ** 6     # max number of binnings an enumeration may visit
SEQ_GUARD = 2 ** 24      # max number of source sequences


def _mask64(value: int) -> int:
    return int(value) & 0xFFFFFFFFFFFFFFFF


def derive_seed(seed: int, label: str, index: int = 0) -> int:
    """Stable 64-bit child seed from (seed, label, index), via keyed blake2b."""
    h = hashlib.blake2b(
        f"{label}:{index}".encode(),
        key=_mask64(seed).to_bytes(8, "little"),
        digest_size=8,
    )
    return int.from_bytes(h.digest(), "little")


def philox_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox 4x64 generator keyed by (seed, stream)."""
    key = np.array([_mask64(seed), _mask64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def resolve_threads(explicit=None) -> int:
    """Thread budget: explicit argument, else OSRB_LAB_THREADS (0 = auto)."""
    if explicit is None:
        raw = os.environ.get("OSRB_LAB_THREADS", "0")
        try:
            explicit = int(raw)
        except ValueError:
            raise ValueError(f"OSRB_LAB_THREADS must be an integer, got {raw!r}")
    if explicit < 0:
        raise ValueError("thread count must be >= 0")
    if explicit == 0:
        return min(os.cpu_count() or 1, 8)
    return explicit


def _map_indexed(fn, count: int, threads: int):
    """Apply fn to 0..count-1, results in index order regardless of threads."""
    if threads <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def pairwise_sum(values) -> float:
    """Sum with a fixed-shape pairwise tree (order-independent rounding)."""
    vals = [float(v) for v in values]
    if not vals:
        return 0.0
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0]


def m_from_rate(n: int, rate: float) -> int:
    """Bin count for a rate in bits per symbol: ceil(2^(n * rate))."""
    if n < 1:
        raise ValueError("blocklength must be >= 1")
    if rate < 0.0:
        raise ValueError("rate must be >= 0")
    return int(math.ceil(2.0 ** (n * rate)))


@dataclass(frozen=True, eq=False)
class BinningMap:
    """Assignment of item index -> bin index in 1..m."""

    n_items: int
    m: int
    assignment: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        arr = np.asarray(self.assignment, dtype=np.int64)
        if arr.shape != (self.n_items,):
            raise ValueError("BinningMap: assignment length must equal n_items")
        if self.m < 1:
            raise ValueError("BinningMap: m must be >= 1")
        if arr.size and (arr.min() < 1 or arr.max() > self.m):
            raise ValueError("BinningMap: bin indices must lie in 1..m")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)

    def to_dict(self) -> dict:
        return {
            "n_items": self.n_items,
            "m": self.m,
            "seed": self.seed,
            "assignment": [int(b) for b in self.assignment],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BinningMap":
        return cls(int(doc["n_items"]), int(doc["m"]),
                   np.asarray(doc["assignment"], dtype=np.int64), doc.get("seed"))

    def save(self, path) -> None:
        _atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "BinningMap":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def sample_binning(n_items: int, m: int, seed: int) -> BinningMap:
    """Draw one uniform binning; identical inputs give identical maps."""
    if n_items < 1:
        raise ValueError("sample_binning: n_items must be >= 1")
    if m < 1:
        raise ValueError("sample_binning: m must be >= 1")
    rng = philox_rng(seed, 0)
    assignment = rng.integers(1, m + 1, size=n_items, dtype=np.int64)
    return BinningMap(n_items, m, assignment, seed)


def _aggregate(assignment: np.ndarray, probs: np.ndarray, m: int) -> np.ndarray:
    """Sum joint rows into bins: P[b, z] = sum over items in bin b."""
    out = np.zeros((m, probs.shape[1]))
    np.add.at(out, assignment - 1, probs)
    return out


def _aggregate_fast(assignment: np.ndarray, probs: np.ndarray, m: int) -> np.ndarray:
    """BLAS-backed aggregation used by the Monte Carlo inner loop."""
    onehot = (assignment[:, None] == np.arange(1, m + 1)[None, :]).astype(float)
    return onehot.T @ probs


def induced_joint(b: BinningMap, j: JointPmf) -> JointPmf:
    """Joint law of (bin index, Z) induced by a binning of the X alphabet."""
    if b.n_items != j.shape[0]:
        raise ValueError("binning size does not match joint's X alphabet")
    agg = _aggregate(b.assignment, j.probs, b.m)
    return JointPmf(tuple(str(i) for i in range(1, b.m + 1)), j.col_labels, agg)


def _divergence_of_induced(agg: np.ndarray, pz: np.ndarray, m: int, alpha: float) -> float:
    """Divergence of P(b, z) from the uniform-bin reference (1/m) p(z)."""
    ref = np.broadcast_to(pz / m, agg.shape)
    if math.isinf(alpha):
        return d_infinity_raw(agg, ref, bits=True)
    return tsallis_raw(agg, ref, alpha)


def divergence_for_binning(b: BinningMap, j: JointPmf, alpha) -> float:
    """Tsallis divergence (or max-log-ratio in bits at INFINITY) between the
    induced (bin, Z) law and the uniform-bin product reference."""
    a = check_alpha(alpha)
    if b.n_items != j.shape[0]:
        raise ValueError("binning size does not match joint's X alphabet")
    agg = _aggregate(b.assignment, j.probs, b.m)
    pz = j.probs.sum(axis=0)
    return _divergence_of_induced(agg, pz, b.m, a)


def expected_divergence_enum(j: JointPmf, m: int, alpha) -> float:
    """Ensemble average by enumerating all m^(n_items) binnings."""
    a = check_alpha(alpha)
    n_items = j.shape[0]
    count = m ** n_items
    if count > ENUM_GUARD:
        raise GuardError(f"enumeration of {m}^{n_items} binnings exceeds guard")
    pz = j.probs.sum(axis=0)
    values = []
    for combo in iter_product(range(1, m + 1), repeat=n_items):
        agg = _aggregate(np.asarray(combo, dtype=np.int64), j.probs, m)
        values.append(_divergence_of_induced(agg, pz, m, a))
    return math.fsum(values) / count


# ---------------------------------------------------------------------------
# Exact expectation for integer Tsallis orders


@dataclass(frozen=True)
class Composition:
    """Ordered tuple of positive integer parts."""

    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        if not parts or any(p < 1 for p in parts):
            raise ValueError("Composition: parts must be positive integers")
        object.__setattr__(self, "parts", parts)

    @property
    def total(self) -> int:
        return sum(self.parts)


def compositions(alpha: int, ell: int) -> list[Composition]:
    """All ordered compositions of ``alpha`` into ``ell`` positive parts."""
    alpha = int(alpha)
    ell = int(ell)
    if alpha < 1 or ell < 1 or ell > alpha:
        raise ValueError("compositions: need 1 <= ell <= alpha")
    out = []

    def rec(remaining, parts_left, acc):
        if parts_left == 1:
            out.append(Composition(acc + (remaining,)))
            return
        for first in range(1, remaining - parts_left + 2):
            rec(remaining - first, parts_left - 1, acc + (first,))

    rec(alpha, ell, ())
    return out


def set_partitions(items: int):
    """Yield set partitions of range(items) as tuples of blocks."""
    if items == 0:
        yield ()
        return

    def rec(idx, blocks):
        if idx == items:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(idx)
            yield from rec(idx + 1, blocks)
            b.pop()
        blocks.append([idx])
        yield from rec(idx + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


class PowerSums:
    """Per-column conditional power sums S_k(z) = sum_x p(x|z)^k."""

    def __init__(self, pz: np.ndarray, table: np.ndarray):
        self.pz = pz
        self.table = table  # shape (max_power, n_cols); row k-1 holds S_k

    @property
    def max_power(self) -> int:
        return self.table.shape[0]

    @classmethod
    def from_joint(cls, j: JointPmf, max_power: int) -> "PowerSums":
        if max_power < 1:
            raise ValueError("PowerSums: max_power must be >= 1")
        pz, cond = j.col_conditionals()
        n_cols = j.shape[1]
        table = np.zeros((max_power, n_cols))
        for z in range(n_cols):
            if pz[z] <= 0.0:
                continue
            col = cond[:, z]
            for k in range(1, max_power + 1):
                table[k - 1, z] = math.fsum(np.power(col, k).tolist())
        return cls(pz, table)

    def value(self, k: int, col: int) -> float:
        if not 1 <= k <= self.max_power:
            raise ValueError(f"PowerSums: power {k} outside 1..{self.max_power}")
        return float(self.table[k - 1, col])


def _partition_weight(sigma) -> float:
    """Moebius weight of a set partition: prod (-1)^(|B|-1) (|B|-1)!."""
    w = 1.0
    for block in sigma:
        size = len(block)
        w *= (-1.0) ** (size - 1) * math.factorial(size - 1)
    return w


def distinct_tuple_sum(ps: PowerSums, comp: Composition, col: int) -> float:
    """Sum over pairwise-distinct symbol tuples of prod_i p(x_i|z)^parts[i].

    Computed by Moebius inclusion-exclusion over the power sums, so the
    cost is independent of the alphabet size.
    """
    parts = comp.parts
    if comp.total > ps.max_power:
        raise ValueError("distinct_tuple_sum: parts exceed available powers")
    terms = []
    for sigma in set_partitions(len(parts)):
        w = _partition_weight(sigma)
        prod = 1.0
        for block in sigma:
            prod *= ps.value(sum(parts[i] for i in block), col)
        terms.append(w * prod)
    return math.fsum(terms)


def _partition_terms(alpha: int):
    """Set partitions of range(alpha) reduced to (m-exponent, block sizes)."""
    for pi in set_partitions(alpha):
        sizes = tuple(len(b) for b in pi)
        yield alpha - len(sizes), Composition(sizes)


def expected_tsallis_exact(j: JointPmf, m: int, alpha: int) -> float:
    """Exact ensemble average of the Tsallis divergence, integer order 2..5.

    Expands E[P(b|z)^alpha] over equality patterns of alpha-tuples: each
    set partition with L blocks contributes m^(alpha - L) times the
    distinct-tuple sum of its block sizes.  At order two this reduces to
    (m - 1) * sum_z p(z) S_2(z).
    """
    alpha = int(alpha)
    if not 2 <= alpha <= 5:
        raise ValueError("expected_tsallis_exact: order must be an integer in 2..5")
    if m < 1:
        raise ValueError("expected_tsallis_exact: m must be >= 1")
    ps = PowerSums.from_joint(j, alpha)
    pz = ps.pz
    col_values = []
    for z in range(j.shape[1]):
        if pz[z] <= 0.0:
            continue
        acc = [
            (m ** exp) * distinct_tuple_sum(ps, sizes, z)
            for exp, sizes in _partition_terms(alpha)
        ]
        col_values.append(pz[z] * math.fsum(acc))
    return (math.fsum(col_values) - 1.0) / (alpha - 1.0)


def expected_tsallis_exact_iid(j: JointPmf, n: int, m: int, alpha: int) -> float:
    """Exact ensemble average for the n-fold i.i.d. extension of ``j``.

    Power sums of a product joint factor per letter, so every partition
    term reduces to a single-letter average raised to the n-th power.
    No sequence alphabet is materialized.
    """
    a = float(alpha)
    if not (a.is_integer() and 2 <= a <= 5):
        raise ValueError("expected_tsallis_exact_iid: order must be an integer in 2..5")
    alpha = int(a)
    if n < 1:
        raise ValueError("expected_tsallis_exact_iid: n must be >= 1")
    if m < 1:
        raise ValueError("expected_tsallis_exact_iid: m must be >= 1")
    ps = PowerSums.from_joint(j, alpha)
    pz = ps.pz
    pos = np.nonzero(pz > 0.0)[0]
    terms = []
    for exp, sizes in _partition_terms(alpha):
        for sigma in set_partitions(len(sizes.parts)):
            w = _partition_weight(sigma)
            merged = [sum(sizes.parts[i] for i in block) for block in sigma]
            base = math.fsum(
                pz[z] * math.prod(ps.value(k, z) for k in merged) for z in pos
            )
            terms.append((m ** exp) * w * base ** n)
    return (math.fsum(terms) - 1.0) / (alpha - 1.0)


# ---------------------------------------------------------------------------
# Monte Carlo


def expected_divergence_mc(
    j: JointPmf,
    n: int,
    rate: float,
    alpha,
    trials: int,
    seed: int,
    threads: int | None = None,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the binning divergence.

    Bins the n-fold sequence extension of ``j`` at ``m = ceil(2^(n rate))``
    bins.  Trial t draws its binning from the Philox substream keyed by
    (seed, t), so the estimate does not depend on thread scheduling.
    """
    a = check_alpha(alpha)
    if trials < 1:
        raise ValueError("expected_divergence_mc: trials must be >= 1")
    nx = j.shape[0] ** n
    if nx > SEQ_GUARD:
        raise GuardError(f"sequence alphabet {j.shape[0]}^{n} exceeds guard")
    prod = j.product_power(n)
    m = m_from_rate(n, rate)
    probs = prod.probs
    pz = probs.sum(axis=0)

    def one_trial(t: int) -> float:
        rng = philox_rng(seed, t)
        assignment = rng.integers(1, m + 1, size=nx, dtype=np.int64)
        agg = _aggregate_fast(assignment, probs, m)
        return _divergence_of_induced(agg, pz, m, a)

    values = _map_indexed(one_trial, trials, resolve_threads(threads))
    mean = pairwise_sum(values) / trials
    if trials == 1:
        return mean, 0.0
    var = pairwise_sum((v - mean) ** 2 for v in values) / (trials - 1)
    return mean, math.sqrt(var / trials)
