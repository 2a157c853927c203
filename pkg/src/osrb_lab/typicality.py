"""Frequency-typical sets, tilted sequence laws, and the smoothed channel
kernel used by stochastic encoders.

Sequences over a K-letter alphabet are identified with integers in mixed
radix, most significant symbol first: position 0 of the sequence carries
weight K^(n-1).  Membership tests compare symbol counts against n*p and
n*eps as exact rationals built from the stored float values, so there are
no floating-point ties: the strict inequality |count/n - p| < eps is
unambiguous.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import logsumexp

from .measures import Channel, GuardError, JointPmf, Pmf, _atomic_write_text

SEQ_GUARD = 2 ** 24


class EmptyTypicalSetError(ValueError):
    """No sequence satisfies the typicality constraint."""


def index_digits(indices, k: int, n: int) -> np.ndarray:
    """Mixed-radix digits (most significant first) of sequence indices."""
    idx = np.asarray(indices, dtype=np.int64)
    out = np.empty(idx.shape + (n,), dtype=np.int64)
    rem = idx.copy()
    for pos in range(n - 1, -1, -1):
        out[..., pos] = rem % k
        rem //= k
    return out


def index_of_digits(digits, k: int) -> int:
    """Inverse of index_digits for a single sequence."""
    value = 0
    for d in digits:
        d = int(d)
        if not 0 <= d < k:
            raise ValueError(f"digit {d} outside alphabet of size {k}")
        value = value * k + d
    return value


def _counts_matrix(count: int, k: int, n: int) -> np.ndarray:
    """Symbol counts for every sequence index 0..count-1, shape (count, k)."""
    counts = np.zeros((count, k), dtype=np.int16)
    idx = np.arange(count, dtype=np.int64)
    rem = idx.copy()
    for _ in range(n):
        sym = rem % k
        np.add.at(counts, (idx, sym), 1)
        rem //= k
    return counts


def _typical_count_rows(counts: np.ndarray, probs: np.ndarray, n: int, eps: float) -> np.ndarray:
    """Boolean mask of count rows within the strict eps frequency window."""
    uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
    n_frac = Fraction(n)
    eps_frac = Fraction(float(eps))
    p_fracs = [Fraction(float(p)) for p in probs]
    bound = n_frac * eps_frac
    row_ok = np.zeros(uniq.shape[0], dtype=bool)
    for r, row in enumerate(uniq):
        ok = True
        for c, p in zip(row.tolist(), p_fracs):
            if abs(Fraction(c) - n_frac * p) >= bound:
                ok = False
                break
        row_ok[r] = ok
    return row_ok[inverse]


@dataclass(frozen=True, eq=False)
class TypicalSet:
    """Strictly eps-typical sequences of a pmf, with the tilted law.

    ``members`` holds sequence indices in increasing order; ``log_probs``
    the tilted log probabilities in nats (i.i.d. law conditioned on the
    set and renormalized).  ``mass`` is the i.i.d. probability of the set.
    """

    base: Pmf
    n: int
    eps: float
    members: np.ndarray
    log_probs: np.ndarray
    mass: float

    def __post_init__(self):
        lookup = {int(s): i for i, s in enumerate(self.members)}
        object.__setattr__(self, "_lookup", lookup)

    @property
    def size(self) -> int:
        return int(self.members.shape[0])

    def position(self, seq: int) -> int:
        try:
            return self._lookup[int(seq)]
        except KeyError:
            raise ValueError(f"sequence {seq} is not in the typical set")

    def __contains__(self, seq) -> bool:
        return int(seq) in self._lookup

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "n": self.n,
            "eps": self.eps,
            "members": [int(s) for s in self.members],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TypicalSet":
        ts = typical_set(Pmf.from_dict(doc["base"]), int(doc["n"]), float(doc["eps"]))
        if [int(s) for s in ts.members] != [int(s) for s in doc["members"]]:
            raise ValueError("stored members disagree with the reconstruction")
        return ts

    def save(self, path) -> None:
        _atomic_write_text(path, json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "TypicalSet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def typical_set(p: Pmf, n: int, eps: float) -> TypicalSet:
    """Enumerate the strictly eps-typical sequences of p^n."""
    if n < 1:
        raise ValueError("typical_set: n must be >= 1")
    if eps <= 0.0:
        raise ValueError("typical_set: eps must be > 0")
    k = p.size
    count = k ** n
    if count > SEQ_GUARD:
        raise GuardError(f"sequence alphabet {k}^{n} exceeds guard")
    counts = _counts_matrix(count, k, n)
    mask = _typical_count_rows(counts, p.probs, n, eps)
    members = np.nonzero(mask)[0].astype(np.int64)
    if members.size == 0:
        raise EmptyTypicalSetError(f"no {eps}-typical sequence at n={n}")
    with np.errstate(divide="ignore"):
        log_p = np.log(p.probs)
    member_counts = counts[members].astype(float)
    iid_log = member_counts @ np.where(np.isfinite(log_p), log_p, 0.0)
    zero_syms = np.nonzero(p.probs == 0.0)[0]
    if zero_syms.size:
        iid_log[member_counts[:, zero_syms].sum(axis=1) > 0] = -np.inf
    log_mass = float(logsumexp(iid_log))
    if not math.isfinite(log_mass):
        raise EmptyTypicalSetError("typical set carries zero i.i.d. mass")
    log_probs = iid_log - log_mass
    members.setflags(write=False)
    log_probs.setflags(write=False)
    return TypicalSet(p, n, float(eps), members, log_probs, math.exp(log_mass))


def tilted_log_prob(ts: TypicalSet, seq: int) -> float:
    """Tilted log probability (nats) of a member sequence."""
    return float(ts.log_probs[ts.position(seq)])


@dataclass(frozen=True, eq=False)
class JointTypicalSet:
    """Jointly typical (u, x) sequence pairs with the tilted product law.

    A pair qualifies when u is strictly eps-typical for the U marginal and
    the joint (u, x) pair frequencies sit within a 2*eps window of p(u, x).
    The tilted law factorizes: the u factor is the tilted marginal law, and
    for each u the x factor is the i.i.d. conditional law renormalized over
    the conditional set of that u.
    """

    base: JointPmf
    n: int
    eps: float
    u_set: TypicalSet
    x_members: tuple[np.ndarray, ...]
    x_log_probs: tuple[np.ndarray, ...]

    @property
    def members(self) -> np.ndarray:
        pairs = [
            (int(u), int(x))
            for i, u in enumerate(self.u_set.members)
            for x in self.x_members[i]
        ]
        return np.asarray(pairs, dtype=np.int64)

    @property
    def log_probs(self) -> np.ndarray:
        out = [
            float(self.u_set.log_probs[i]) + float(lx)
            for i in range(self.u_set.size)
            for lx in self.x_log_probs[i]
        ]
        return np.asarray(out)

    def conditional(self, u_seq: int) -> tuple[np.ndarray, np.ndarray]:
        """(x members, conditional tilted log probs) for one u member."""
        i = self.u_set.position(u_seq)
        return self.x_members[i], self.x_log_probs[i]


def joint_typical_set(j: JointPmf, n: int, eps: float) -> JointTypicalSet:
    """Build the jointly typical pair set for a (U, X) joint."""
    if n < 1:
        raise ValueError("joint_typical_set: n must be >= 1")
    if eps <= 0.0:
        raise ValueError("joint_typical_set: eps must be > 0")
    ku, kx = j.shape
    if (ku * kx) ** n > SEQ_GUARD:
        raise GuardError(f"pair alphabet ({ku}*{kx})^{n} exceeds guard")
    u_set = typical_set(j.row_marginal(), n, eps)
    x_count = kx ** n
    x_digits = index_digits(np.arange(x_count), kx, n)

    pu, cond_xu = j.row_conditionals()
    with np.errstate(divide="ignore"):
        log_cond = np.log(cond_xu)

    n_frac = Fraction(n)
    bound = n_frac * Fraction(2.0) * Fraction(float(eps))
    p_fracs = [[Fraction(float(v)) for v in row] for row in j.probs]

    x_members = []
    x_log_probs = []
    for u in u_set.members:
        u_digits = index_digits(np.array([u]), ku, n)[0]
        pair_counts = np.zeros((x_count, ku * kx), dtype=np.int16)
        rows = np.arange(x_count)
        for pos in range(n):
            cell = u_digits[pos] * kx + x_digits[:, pos]
            np.add.at(pair_counts, (rows, cell), 1)
        uniq, inverse = np.unique(pair_counts, axis=0, return_inverse=True)
        row_ok = np.zeros(uniq.shape[0], dtype=bool)
        for r, row in enumerate(uniq):
            ok = True
            for a in range(ku):
                for b in range(kx):
                    if abs(Fraction(int(row[a * kx + b])) - n_frac * p_fracs[a][b]) >= bound:
                        ok = False
                        break
                if not ok:
                    break
            row_ok[r] = ok
        mask = row_ok[inverse]
        xs = np.nonzero(mask)[0].astype(np.int64)
        if xs.size == 0:
            raise EmptyTypicalSetError(
                f"u member {int(u)} has no conditionally typical x at n={n}")
        cond_log = np.zeros(xs.shape[0])
        for i, x in enumerate(xs):
            xd = x_digits[x]
            cond_log[i] = float(np.sum(log_cond[u_digits, xd]))
        cond_mass = float(logsumexp(cond_log))
        if not math.isfinite(cond_mass):
            raise EmptyTypicalSetError(
                f"conditional set of u member {int(u)} carries zero mass")
        cond_log = cond_log - cond_mass
        xs.setflags(write=False)
        cond_log.setflags(write=False)
        x_members.append(xs)
        x_log_probs.append(cond_log)
    return JointTypicalSet(j, n, float(eps), u_set, tuple(x_members), tuple(x_log_probs))


def _channel_log_likelihoods(ch: Channel, in_digits: np.ndarray, out_count: int, n: int) -> np.ndarray:
    """log prod_i p(z_i | x_i) for given input digit rows x all outputs z."""
    kz = len(ch.out_labels)
    z_digits = index_digits(np.arange(out_count), kz, n)
    with np.errstate(divide="ignore"):
        log_rows = np.log(ch.rows)
    out = np.zeros((in_digits.shape[0], out_count))
    for pos in range(n):
        out += log_rows[in_digits[:, pos]][:, z_digits[:, pos]]
    return out


def s_kernel_row(jts: JointTypicalSet, ch: Channel, u_seq: int,
                 guard: int = 2 ** 20) -> np.ndarray:
    """S(z, u) over every output sequence z, as a probability vector.

    S averages the memoryless channel likelihood over the conditionally
    typical x sequences of u under the tilted conditional law, so each row
    sums to one.
    """
    n = jts.n
    kx = jts.base.shape[1]
    kz = len(ch.out_labels)
    if kz ** n > guard:
        raise GuardError(f"output alphabet {kz}^{n} exceeds guard")
    if jts.base.col_labels != ch.in_labels:
        raise ValueError("channel input must match the joint's X alphabet")
    xs, cond_log = jts.conditional(u_seq)
    x_digits = index_digits(xs, kx, n)
    log_lik = _channel_log_likelihoods(ch, x_digits, kz ** n, n)
    return np.exp(logsumexp(log_lik + cond_log[:, None], axis=0))


def s_kernel(jts: JointTypicalSet, ch: Channel, u_seq: int, z_seq: int) -> float:
    """Single entry S(z, u) of the smoothed channel kernel."""
    row = s_kernel_row(jts, ch, u_seq)
    return float(row[int(z_seq)])
