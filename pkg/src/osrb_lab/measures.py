"""Finite-alphabet probability types and scalar information measures.

Conventions used throughout the package:

* Entropies, rates and thresholds are reported in bits.  Divergences that
  carry a logarithm expose a ``bits`` flag (default True); the Tsallis
  divergence is log-free, except at order one where it equals the KL
  divergence in nats.
* ``0 * log 0 = 0``.  For orders above one, a support violation
  (``p > 0`` while ``q == 0``) yields ``inf``; for orders in (0, 1) such
  terms contribute zero.
* Orders within 1e-6 of one dispatch to the Shannon/KL formulas.
* Every divergence returns exactly 0.0 when both arguments hold
  elementwise-equal probability vectors.

Sums over alphabets use compensated accumulation (``math.fsum``); power
sums with large or tiny exponents are evaluated in the log domain.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

LN2 = math.log(2.0)
NORM_ATOL = 1e-12        # mass tolerance accepted by constructors
LOAD_ATOL = 1e-9         # mass window inside which loaders renormalize
ALPHA_ONE_WINDOW = 1e-6  # orders this close to 1 use the Shannon/KL branch


class NormalizationError(ValueError):
    """Probability mass is outside the accepted tolerance."""


class AlphabetMismatchError(ValueError):
    """Two objects that must share an alphabet do not."""


class InfiniteOrderError(ValueError):
    """Order INFINITY passed to an operation that has no such limit."""


class GuardError(ValueError):
    """A feasibility guard on problem size was exceeded."""


def check_alpha(alpha) -> float:
    """Validate a divergence/entropy order: positive real or ``math.inf``."""
    a = float(alpha)
    if math.isnan(a) or a <= 0.0:
        raise ValueError(f"order must be a positive real or inf, got {alpha!r}")
    return a


def parse_alpha(text) -> float:
    """Parse an order from text; the string ``"inf"`` maps to INFINITY."""
    if isinstance(text, str) and text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return check_alpha(float(text))


def format_alpha(alpha: float) -> str:
    if math.isinf(alpha):
        return "inf"
    if alpha == int(alpha):
        return str(int(alpha))
    return f"{alpha:.12g}"


def _is_one(alpha: float) -> bool:
    return abs(alpha - 1.0) < ALPHA_ONE_WINDOW


def _as_prob_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError(f"{name}: empty probability array")
    if np.any(~np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite probability entries")
    if np.any(arr < 0.0):
        raise ValueError(f"{name}: negative probability entries")
    return arr


def _check_labels(labels, name: str) -> tuple[str, ...]:
    labs = tuple(str(x) for x in labels)
    if len(labs) == 0:
        raise ValueError(f"{name}: empty alphabet")
    if len(set(labs)) != len(labs):
        raise ValueError(f"{name}: duplicate labels")
    return labs


def _normalize(arr: np.ndarray, name: str, atol: float) -> np.ndarray:
    total = math.fsum(arr.ravel().tolist())
    if abs(total - 1.0) > atol:
        raise NormalizationError(f"{name}: mass {total!r} deviates from 1 by more than {atol}")
    out = arr / total
    out.setflags(write=False)
    return out


def _atomic_write_text(path, text: str) -> None:
    """Write text via a temp file and rename, LF line endings."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=False)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over a finite labeled alphabet.

    ``probs`` is stored exactly normalized (sums to 1 in float) and
    read-only.  Constructors accept mass within 1e-12 of 1; the JSON
    loader widens that to 1e-9 and renormalizes.
    """

    labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        labs = _check_labels(self.labels, "Pmf")
        arr = _as_prob_array(self.probs, "Pmf")
        if arr.ndim != 1 or arr.shape[0] != len(labs):
            raise ValueError("Pmf: probs must be a vector matching labels")
        object.__setattr__(self, "labels", labs)
        object.__setattr__(self, "probs", _normalize(arr.copy(), "Pmf", NORM_ATOL))

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def uniform(cls, labels) -> "Pmf":
        labs = tuple(labels)
        return cls(labs, np.full(len(labs), 1.0 / len(labs)))

    @classmethod
    def point_mass(cls, labels, label) -> "Pmf":
        labs = tuple(str(x) for x in labels)
        arr = np.zeros(len(labs))
        arr[labs.index(str(label))] = 1.0
        return cls(labs, arr)

    def prob(self, label) -> float:
        return float(self.probs[self.labels.index(str(label))])

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "probs": [float(x) for x in self.probs]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Pmf":
        labs = _check_labels(doc["labels"], "Pmf")
        arr = _as_prob_array(doc["probs"], "Pmf")
        if arr.ndim != 1 or arr.shape[0] != len(labs):
            raise ValueError("Pmf: probs must be a vector matching labels")
        total = math.fsum(arr.tolist())
        if abs(total - 1.0) > LOAD_ATOL:
            raise NormalizationError(f"Pmf: loaded mass {total!r} outside 1e-9 window")
        return cls(labs, arr / total)

    def save(self, path) -> None:
        _atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Pmf":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class JointPmf:
    """Joint distribution p(x, z) with X on rows and Z on columns."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        rows = _check_labels(self.row_labels, "JointPmf rows")
        cols = _check_labels(self.col_labels, "JointPmf cols")
        arr = _as_prob_array(self.probs, "JointPmf")
        if arr.shape != (len(rows), len(cols)):
            raise ValueError("JointPmf: probs shape must be (rows, cols)")
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)
        object.__setattr__(self, "probs", _normalize(arr.copy(), "JointPmf", NORM_ATOL))

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    @classmethod
    def from_channel(cls, p_in: Pmf, ch: "Channel") -> "JointPmf":
        """Input distribution through a channel: p(x, z) = p(x) p(z|x)."""
        if p_in.labels != ch.in_labels:
            raise AlphabetMismatchError("input pmf and channel alphabets differ")
        return cls(p_in.labels, ch.out_labels, p_in.probs[:, None] * ch.rows)

    def row_marginal(self) -> Pmf:
        return Pmf(self.row_labels, self.probs.sum(axis=1))

    def col_marginal(self) -> Pmf:
        return Pmf(self.col_labels, self.probs.sum(axis=0))

    def col_conditionals(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(p_z, p_x_given_z)``; zero-mass columns hold zeros."""
        pz = self.probs.sum(axis=0)
        cond = np.zeros_like(self.probs)
        pos = pz > 0.0
        cond[:, pos] = self.probs[:, pos] / pz[pos]
        return pz, cond

    def row_conditionals(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(p_x, p_z_given_x)``; zero-mass rows hold zeros."""
        px = self.probs.sum(axis=1)
        cond = np.zeros_like(self.probs)
        pos = px > 0.0
        cond[pos, :] = self.probs[pos, :] / px[pos, None]
        return px, cond

    def swapped(self) -> "JointPmf":
        return JointPmf(self.col_labels, self.row_labels, self.probs.T)

    def product_power(self, n: int, guard: int = 2 ** 26) -> "JointPmf":
        """The n-fold i.i.d. extension over sequence alphabets.

        Sequence labels join the per-letter labels with commas, most
        significant letter first, matching the package's mixed-radix
        sequence indexing.
        """
        if n < 1:
            raise ValueError("product_power: n must be >= 1")
        nr, nc = self.shape
        if (nr * nc) ** n > guard:
            raise GuardError(f"product_power: {(nr * nc)}^{n} entries exceed guard")
        probs = self.probs
        rows = list(self.row_labels)
        cols = list(self.col_labels)
        for _ in range(n - 1):
            probs = np.kron(probs, self.probs)
            rows = [f"{a},{b}" for a in rows for b in self.row_labels]
            cols = [f"{a},{b}" for a in cols for b in self.col_labels]
        return JointPmf(tuple(rows), tuple(cols), probs)

    def to_dict(self) -> dict:
        return {
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "probs": [[float(x) for x in row] for row in self.probs],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "JointPmf":
        rows = _check_labels(doc["row_labels"], "JointPmf rows")
        cols = _check_labels(doc["col_labels"], "JointPmf cols")
        arr = _as_prob_array(doc["probs"], "JointPmf")
        if arr.shape != (len(rows), len(cols)):
            raise ValueError("JointPmf: probs shape must be (rows, cols)")
        total = math.fsum(arr.ravel().tolist())
        if abs(total - 1.0) > LOAD_ATOL:
            raise NormalizationError(f"JointPmf: loaded mass {total!r} outside 1e-9 window")
        return cls(rows, cols, arr / total)

    def save(self, path) -> None:
        _atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "JointPmf":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic transition matrix p(out | in)."""

    in_labels: tuple[str, ...]
    out_labels: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        ins = _check_labels(self.in_labels, "Channel inputs")
        outs = _check_labels(self.out_labels, "Channel outputs")
        arr = _as_prob_array(self.rows, "Channel")
        if arr.shape != (len(ins), len(outs)):
            raise ValueError("Channel: rows shape must be (inputs, outputs)")
        arr = arr.copy()
        for i in range(arr.shape[0]):
            total = math.fsum(arr[i].tolist())
            if abs(total - 1.0) > NORM_ATOL:
                raise NormalizationError(f"Channel: row {i} mass {total!r} off by more than {NORM_ATOL}")
            arr[i] = arr[i] / total
        arr.setflags(write=False)
        object.__setattr__(self, "in_labels", ins)
        object.__setattr__(self, "out_labels", outs)
        object.__setattr__(self, "rows", arr)

    @classmethod
    def identity(cls, labels) -> "Channel":
        labs = tuple(labels)
        return cls(labs, labs, np.eye(len(labs)))

    @classmethod
    def bsc(cls, flip: float, labels=("0", "1")) -> "Channel":
        """Binary symmetric channel with the given crossover probability."""
        if not 0.0 <= flip <= 1.0:
            raise ValueError("bsc: flip must lie in [0, 1]")
        return cls(tuple(labels), tuple(labels),
                   np.array([[1.0 - flip, flip], [flip, 1.0 - flip]]))

    def output(self, p_in: Pmf) -> Pmf:
        if p_in.labels != self.in_labels:
            raise AlphabetMismatchError("pmf alphabet does not match channel input")
        return Pmf(self.out_labels, p_in.probs @ self.rows)

    def joint(self, p_in: Pmf) -> JointPmf:
        return JointPmf.from_channel(p_in, self)

    def then(self, other: "Channel") -> "Channel":
        """Cascade: feed this channel's output into ``other``."""
        if self.out_labels != other.in_labels:
            raise AlphabetMismatchError("cascade alphabets do not match")
        return Channel(self.in_labels, other.out_labels, self.rows @ other.rows)

    def to_dict(self) -> dict:
        return {
            "row_labels": list(self.in_labels),
            "col_labels": list(self.out_labels),
            "probs": [[float(x) for x in row] for row in self.rows],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Channel":
        ins = _check_labels(doc["row_labels"], "Channel inputs")
        outs = _check_labels(doc["col_labels"], "Channel outputs")
        arr = _as_prob_array(doc["probs"], "Channel")
        if arr.shape != (len(ins), len(outs)):
            raise ValueError("Channel: probs shape must be (inputs, outputs)")
        arr = arr.copy()
        for i in range(arr.shape[0]):
            total = math.fsum(arr[i].tolist())
            if abs(total - 1.0) > LOAD_ATOL:
                raise NormalizationError(f"Channel: row {i} mass {total!r} outside 1e-9 window")
            arr[i] = arr[i] / total
        return cls(ins, outs, arr)

    def save(self, path) -> None:
        _atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Channel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _require_same_alphabet(p: Pmf, q: Pmf) -> None:
    if p.labels != q.labels:
        raise AlphabetMismatchError("pmfs are defined on different alphabets")


# ---------------------------------------------------------------------------
# Entropies


def shannon_entropy(p: Pmf) -> float:
    """Shannon entropy in bits."""
    probs = p.probs[p.probs > 0.0]
    return -math.fsum(x * math.log2(x) for x in probs.tolist())


def binary_entropy(p: float) -> float:
    """Entropy in bits of a (p, 1-p) coin."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("binary_entropy: p must lie in [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def renyi_entropy(p: Pmf, alpha) -> float:
    """Renyi entropy of order alpha, in bits."""
    a = check_alpha(alpha)
    if math.isinf(a):
        return -math.log2(float(np.max(p.probs)))
    if _is_one(a):
        return shannon_entropy(p)
    probs = p.probs[p.probs > 0.0]
    log_sum = float(logsumexp(a * np.log(probs)))
    return log_sum / ((1.0 - a) * LN2)


def conditional_entropy(j: JointPmf) -> float:
    """H(X|Z) in bits for a joint with X on rows, Z on columns."""
    pz, cond = j.col_conditionals()
    terms = []
    for z in range(j.shape[1]):
        if pz[z] <= 0.0:
            continue
        col = cond[:, z]
        col = col[col > 0.0]
        terms.append(pz[z] * -math.fsum(x * math.log2(x) for x in col.tolist()))
    return math.fsum(terms)


def mutual_information(j: JointPmf) -> float:
    """I(X;Z) in bits; tiny negative float residue is clamped to zero."""
    value = shannon_entropy(j.row_marginal()) - conditional_entropy(j)
    if -1e-9 < value < 0.0:
        return 0.0
    return value


def cond_renyi_entropy(j: JointPmf, alpha) -> float:
    """Arimoto-style conditional Renyi entropy in bits.

    For finite order a != 1 this is log2(sum_z p(z) sum_x p(x|z)^a)
    divided by (1 - a); order one gives H(X|Z) and INFINITY gives
    -log2 max p(x|z) over columns of positive mass.
    """
    a = check_alpha(alpha)
    pz, cond = j.col_conditionals()
    pos_cols = pz > 0.0
    if math.isinf(a):
        return -math.log2(float(np.max(cond[:, pos_cols])))
    if _is_one(a):
        return conditional_entropy(j)
    log_terms = []
    for z in np.nonzero(pos_cols)[0]:
        col = cond[:, z]
        col = col[col > 0.0]
        log_terms.append(math.log(pz[z]) + float(logsumexp(a * np.log(col))))
    value = float(logsumexp(log_terms)) / ((1.0 - a) * LN2)
    if -1e-9 < value < 0.0:
        return 0.0
    return value


def is_singleton(j: JointPmf, atol: float = 1e-12) -> bool:
    """True when every conditional p(x|z) entry agrees across (x, z).

    Such channels are exactly the ones whose conditional Renyi entropy is
    constant in the order.
    """
    pz, cond = j.col_conditionals()
    vals = cond[:, pz > 0.0]
    return float(np.max(vals) - np.min(vals)) <= atol


# ---------------------------------------------------------------------------
# Divergences


def _kl_nats_raw(p: np.ndarray, q: np.ndarray) -> float:
    pos = p > 0.0
    if np.any(q[pos] == 0.0):
        return math.inf
    pp = p[pos]
    qq = q[pos]
    return math.fsum((pp * np.log(pp / qq)).tolist())


def _phi_log_raw(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    """ln of sum p^alpha q^(1-alpha) over supp(p); inf/-inf at the edges."""
    pos = p > 0.0
    if alpha > 1.0 and np.any(q[pos] == 0.0):
        return math.inf
    ok = pos & (q > 0.0)
    if not np.any(ok):
        return -math.inf
    terms = alpha * np.log(p[ok]) + (1.0 - alpha) * np.log(q[ok])
    return float(logsumexp(terms))


def kl_raw(p: np.ndarray, q: np.ndarray, bits: bool = True) -> float:
    """KL divergence on raw probability arrays of equal shape."""
    if np.array_equal(p, q):
        return 0.0
    v = _kl_nats_raw(np.ravel(p), np.ravel(q))
    return v / LN2 if bits else v


def tsallis_raw(p: np.ndarray, q: np.ndarray, alpha: float) -> float:
    """Tsallis divergence on raw arrays; order one falls back to KL in nats."""
    a = check_alpha(alpha)
    if math.isinf(a):
        raise InfiniteOrderError("Tsallis divergence has no INFINITY order")
    if np.array_equal(p, q):
        return 0.0
    p = np.ravel(p)
    q = np.ravel(q)
    if _is_one(a):
        return _kl_nats_raw(p, q)
    log_phi = _phi_log_raw(p, q, a)
    if math.isinf(log_phi) and log_phi > 0:
        return math.inf
    return math.expm1(log_phi) / (a - 1.0)


def renyi_raw(p: np.ndarray, q: np.ndarray, alpha: float, bits: bool = True) -> float:
    a = check_alpha(alpha)
    if math.isinf(a):
        return d_infinity_raw(p, q, bits=bits)
    if np.array_equal(p, q):
        return 0.0
    p = np.ravel(p)
    q = np.ravel(q)
    if _is_one(a):
        v = _kl_nats_raw(p, q)
    else:
        v = _phi_log_raw(p, q, a) / (a - 1.0)
    return v / LN2 if bits else v


def d_infinity_raw(p: np.ndarray, q: np.ndarray, bits: bool = True) -> float:
    if np.array_equal(p, q):
        return 0.0
    p = np.ravel(p)
    q = np.ravel(q)
    pos = p > 0.0
    if np.any(q[pos] == 0.0):
        return math.inf
    ratio = float(np.max(p[pos] / q[pos]))
    return math.log2(ratio) if bits else math.log(ratio)


def kl_divergence(p: Pmf, q: Pmf, bits: bool = True) -> float:
    """KL divergence D(p || q), bits by default."""
    _require_same_alphabet(p, q)
    return kl_raw(p.probs, q.probs, bits=bits)


def total_variation(p: Pmf, q: Pmf) -> float:
    """Total variation distance, half the L1 difference."""
    _require_same_alphabet(p, q)
    return 0.5 * math.fsum(np.abs(p.probs - q.probs).tolist())


def tsallis_divergence(p: Pmf, q: Pmf, alpha) -> float:
    """Tsallis divergence of order alpha; log-free, KL in nats at order one."""
    _require_same_alphabet(p, q)
    return tsallis_raw(p.probs, q.probs, alpha)


def renyi_divergence(p: Pmf, q: Pmf, alpha, bits: bool = True) -> float:
    """Renyi divergence of order alpha; KL at one, max-ratio log at INFINITY."""
    _require_same_alphabet(p, q)
    return renyi_raw(p.probs, q.probs, alpha, bits=bits)


def d_infinity(p: Pmf, q: Pmf, bits: bool = True) -> float:
    """Max-log-ratio divergence over the support of p."""
    _require_same_alphabet(p, q)
    return d_infinity_raw(p.probs, q.probs, bits=bits)


def sibson_mi(j: JointPmf, alpha) -> float:
    """Sibson mutual information of order alpha in bits.

    Defined for finite positive orders other than one, from the joint's
    input marginal and row conditionals.
    """
    a = check_alpha(alpha)
    if math.isinf(a):
        raise InfiniteOrderError("Sibson information: INFINITY order not supported")
    if _is_one(a):
        raise ValueError("Sibson information: order one not supported")
    px, rows = j.row_conditionals()
    pos_rows = px > 0.0
    inner_logs = []
    for y in range(j.shape[1]):
        col = rows[pos_rows, y]
        w = px[pos_rows]
        ok = col > 0.0
        if not np.any(ok):
            inner_logs.append(-math.inf)
            continue
        inner_logs.append(float(logsumexp(np.log(w[ok]) + a * np.log(col[ok]))))
    outer = float(logsumexp(np.asarray(inner_logs) / a))
    return (a / (a - 1.0)) * outer / LN2
