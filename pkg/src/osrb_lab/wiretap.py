"""Desk-scale wiretap coding simulator over typical sequence sets.

Each typical member carries a two-part label (m, f): the message bin and a
public dither bin, drawn independently and uniformly.  Conditioning the
tilted source law on a dither value f induces a joint law over the message
and the eavesdropper observation; leakage is the divergence of that law
from the uniform-message times i.i.d.-output product, computed exactly by
enumerating output sequences (finite orders use the log-free divergence,
which reduces to KL in nats at order one; INFINITY uses the max-log-ratio
divergence in bits).  Decoding error is likewise exact: a posterior-mode
decoder over the members sharing f, enumerated over receiver sequences.
Exactness keeps sweep trends free of estimator noise; blocklengths are
capped accordingly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .binning import derive_seed, m_from_rate, philox_rng, resolve_threads, _map_indexed
from .measures import (
    Channel,
    GuardError,
    JointPmf,
    Pmf,
    check_alpha,
    d_infinity_raw,
    parse_alpha,
    tsallis_raw,
)
from .typicality import (
    JointTypicalSet,
    TypicalSet,
    _channel_log_likelihoods,
    index_digits,
    joint_typical_set,
    s_kernel_row,
    typical_set,
)

MEMBER_GUARD = 2 ** 20
OUTPUT_GUARD = 2 ** 20
MATRIX_GUARD = 2 ** 26

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"

MAX_ATTEMPTS = 20
MAX_EMPTY_FRAC = 0.05

RECORD_FIELDS = ("n", "r1", "r2", "alpha", "encoder", "code_seed",
                 "f_star", "leakage", "error_prob", "discards")


class EmptyBinError(ValueError):
    """An encoding request addressed an (m, f) bin with no members."""


@dataclass(frozen=True, eq=False)
class WiretapCode:
    """A two-index binning of a typical set.

    ``kind`` is "deterministic" (members are x sequences of a TypicalSet)
    or "stochastic" (members are the u sequences of a JointTypicalSet and
    transmission draws x through the tilted conditional).  ``m_label`` and
    ``f_label`` assign each member its bin pair, values in [1..m1] and
    [1..m2].  ``discards`` counts rejected binning attempts and
    ``empty_bins`` the empty cells of the accepted (m1 x m2) grid.
    """

    kind: str
    n: int
    r1: float
    r2: float
    m1: int
    m2: int
    source: object
    m_label: np.ndarray
    f_label: np.ndarray
    seed: int
    discards: int
    empty_bins: int

    def __post_init__(self):
        if self.kind not in (DETERMINISTIC, STOCHASTIC):
            raise ValueError(f"unknown code kind {self.kind!r}")
        m = np.asarray(self.m_label, dtype=np.int64)
        f = np.asarray(self.f_label, dtype=np.int64)
        count = _code_members(self).shape[0]
        if m.shape != (count,) or f.shape != (count,):
            raise ValueError("label arrays must cover every member exactly once")
        if m.min(initial=1) < 1 or m.max(initial=1) > self.m1:
            raise ValueError("message labels out of range")
        if f.min(initial=1) < 1 or f.max(initial=1) > self.m2:
            raise ValueError("dither labels out of range")
        m = m.copy()
        f = f.copy()
        m.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "m_label", m)
        object.__setattr__(self, "f_label", f)

    @property
    def member_count(self) -> int:
        return int(self.m_label.shape[0])

    def bin_positions(self, m: int, f: int) -> np.ndarray:
        """Member positions labeled (m, f)."""
        return np.nonzero((self.m_label == m) & (self.f_label == f))[0]

    def f_positions(self, f: int) -> np.ndarray:
        """Member positions whose dither label is f."""
        return np.nonzero(self.f_label == f)[0]

    def label_masses(self) -> np.ndarray:
        """Tilted probability mass of each (m, f) cell, shape (m1, m2)."""
        out = np.zeros((self.m1, self.m2))
        np.add.at(out, (self.m_label - 1, self.f_label - 1),
                  np.exp(_code_log_probs(self)))
        return out


def _code_members(code: WiretapCode) -> np.ndarray:
    if code.kind == STOCHASTIC:
        return code.source.u_set.members
    return code.source.members


def _code_log_probs(code: WiretapCode) -> np.ndarray:
    if code.kind == STOCHASTIC:
        return code.source.u_set.log_probs
    return code.source.log_probs


def _source_pmf(code: WiretapCode) -> Pmf:
    """Single-letter law of the channel-input symbol X."""
    if code.kind == STOCHASTIC:
        j = code.source.base
        return Pmf(j.col_labels, j.col_marginal().probs)
    return code.source.base


def build_code(source, r1: float, r2: float, seed: int, *,
               max_attempts: int = MAX_ATTEMPTS,
               max_empty_frac: float = MAX_EMPTY_FRAC) -> WiretapCode:
    """Draw a two-index binning of the given typical set.

    ``source`` is a TypicalSet (deterministic encoding over x sequences)
    or a JointTypicalSet (stochastic encoding; the binning acts on u
    sequences).  Bin counts follow the ceiling convention m = ceil(2^(n
    r)).  An attempt is rejected when more than ``max_empty_frac`` of the
    m1*m2 grid cells are empty; after ``max_attempts`` rejections the
    attempt with the fewest empty cells (earliest on ties) is kept and
    ``discards`` records the full attempt budget.
    """
    if r1 < 0.0 or r2 < 0.0:
        raise ValueError("rates must be nonnegative")
    if isinstance(source, JointTypicalSet):
        kind = STOCHASTIC
        members = source.u_set.members
    elif isinstance(source, TypicalSet):
        kind = DETERMINISTIC
        members = source.members
    else:
        raise ValueError("source must be a TypicalSet or JointTypicalSet")
    n = source.n
    count = int(members.shape[0])
    if count > MEMBER_GUARD:
        raise GuardError(f"member count {count} exceeds guard {MEMBER_GUARD}")
    m1 = m_from_rate(n, r1)
    m2 = m_from_rate(n, r2)
    budget = max_empty_frac * m1 * m2
    best = None
    for attempt in range(max_attempts):
        rng = philox_rng(seed, attempt)
        m_label = rng.integers(1, m1 + 1, size=count)
        f_label = rng.integers(1, m2 + 1, size=count)
        occupancy = np.zeros((m1, m2), dtype=np.int64)
        np.add.at(occupancy, (m_label - 1, f_label - 1), 1)
        empty = int(np.sum(occupancy == 0))
        if empty <= budget:
            return WiretapCode(kind, n, r1, r2, m1, m2, source,
                               m_label, f_label, seed, attempt, empty)
        if best is None or empty < best[0]:
            best = (empty, m_label, f_label)
    empty, m_label, f_label = best
    return WiretapCode(kind, n, r1, r2, m1, m2, source,
                       m_label, f_label, seed, max_attempts, empty)


def _restricted_weights(log_probs: np.ndarray) -> np.ndarray:
    from scipy.special import logsumexp

    total = logsumexp(log_probs)
    if not np.isfinite(total):
        raise ValueError("bin carries zero tilted mass")
    return np.exp(log_probs - total)


def encode(code: WiretapCode, m: int, f: int, seed: int):
    """Sample a transmission for message m under dither f.

    Draws a member of bin (m, f) from the tilted law restricted to the
    bin.  Deterministic codes return the x sequence index; stochastic
    codes then draw x from the tilted conditional of the chosen u and
    return the pair ``(x_seq, u_seq)``.
    """
    if not (1 <= m <= code.m1 and 1 <= f <= code.m2):
        raise ValueError("bin label out of range")
    pos = code.bin_positions(m, f)
    if pos.size == 0:
        raise EmptyBinError(f"bin ({m}, {f}) has no members")
    weights = _restricted_weights(_code_log_probs(code)[pos])
    rng = philox_rng(seed, 0)
    choice = int(pos[rng.choice(pos.size, p=weights)])
    member = int(_code_members(code)[choice])
    if code.kind == DETERMINISTIC:
        return member
    xs, x_log = code.source.conditional(member)
    x = int(xs[rng.choice(xs.size, p=np.exp(x_log))])
    return x, member


def decode(code: WiretapCode, f: int, y_seq: int, main: Channel):
    """Posterior-mode decoding of a receiver sequence under dither f.

    Scores every member labeled (. , f) by tilted prior times channel
    likelihood of ``y_seq`` and returns ``(m_hat, member_seq)`` for the
    best one, ties to the lowest member index.  For stochastic codes the
    likelihood is the smoothed kernel and ``member_seq`` is the u
    sequence.  Returns ``(None, None)`` when no member carries f.
    """
    if not 1 <= f <= code.m2:
        raise ValueError("dither label out of range")
    pos = code.f_positions(f)
    if pos.size == 0:
        return None, None
    lik = _likelihood_rows(code, main, pos)
    scores = np.exp(_code_log_probs(code)[pos]) * lik[:, int(y_seq)]
    best = int(np.argmax(scores))
    return int(code.m_label[pos[best]]), int(_code_members(code)[pos[best]])


def _likelihood_rows(code: WiretapCode, ch: Channel, pos: np.ndarray) -> np.ndarray:
    """P(output sequence | member) rows over every output sequence."""
    n = code.n
    k_out = len(ch.out_labels)
    out_count = k_out ** n
    if out_count > OUTPUT_GUARD:
        raise GuardError(f"output alphabet {k_out}^{n} exceeds guard")
    if pos.size * out_count > MATRIX_GUARD:
        raise GuardError("likelihood matrix exceeds the size guard")
    members = _code_members(code)[pos]
    if code.kind == STOCHASTIC:
        return np.stack([s_kernel_row(code.source, ch, int(u)) for u in members])
    base = _source_pmf(code)
    if ch.in_labels != base.labels:
        raise ValueError("channel input alphabet does not match the source")
    digits = index_digits(members, base.size, n)
    return np.exp(_channel_log_likelihoods(ch, digits, out_count, n))


def _iid_output_vector(code: WiretapCode, ch: Channel) -> np.ndarray:
    """i.i.d. output law of the single-letter marginal, over z sequences."""
    q = ch.output(_source_pmf(code)).probs
    vec = np.ones(1)
    for _ in range(code.n):
        vec = np.kron(vec, q)
    return vec


def _leakage_value(p_mz: np.ndarray, target: np.ndarray, a: float) -> float:
    if math.isinf(a):
        return d_infinity_raw(p_mz, target)
    value = tsallis_raw(p_mz, target, a)
    if -1e-12 < value < 0.0:
        return 0.0
    return value


def leakage(code: WiretapCode, f: int, eve: Channel, alpha) -> float:
    """Exact divergence of the induced (message, z-sequence) law under f.

    The tilted source law conditioned on dither f induces p(m, z^n | f);
    the reference is uniform messages times the i.i.d. single-letter
    output law.  Computed by full enumeration of z sequences.
    """
    a = check_alpha(alpha)
    if not 1 <= f <= code.m2:
        raise ValueError("dither label out of range")
    pos = code.f_positions(f)
    if pos.size == 0:
        raise ValueError(f"no member carries dither {f}")
    weights = _restricted_weights(_code_log_probs(code)[pos])
    rows = _likelihood_rows(code, eve, pos)
    p_mz = np.zeros((code.m1, rows.shape[1]))
    np.add.at(p_mz, code.m_label[pos] - 1, weights[:, None] * rows)
    target = np.broadcast_to(_iid_output_vector(code, eve) / code.m1, p_mz.shape)
    return _leakage_value(p_mz, np.array(target), a)


def error_prob(code: WiretapCode, f: int, main: Channel) -> float:
    """Exact decoding error probability under dither f.

    The induced law draws a member from the tilted law conditioned on f;
    the posterior-mode decoder of ``decode`` is applied to every receiver
    sequence and the miss mass is accumulated exactly.
    """
    if not 1 <= f <= code.m2:
        raise ValueError("dither label out of range")
    pos = code.f_positions(f)
    if pos.size == 0:
        raise ValueError(f"no member carries dither {f}")
    rows = _likelihood_rows(code, main, pos)
    prior = np.exp(_code_log_probs(code)[pos])
    decoded = np.argmax(prior[:, None] * rows, axis=0)
    m_hat = code.m_label[pos][decoded]
    correct = np.sum(rows * (m_hat[None, :] == code.m_label[pos][:, None]), axis=1)
    weights = _restricted_weights(_code_log_probs(code)[pos])
    value = 1.0 - float(np.dot(weights, correct))
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True)
class LeakageRecord:
    """Leakage and decoding error of one dither value."""

    f: int
    alpha: float
    leakage: float
    error_prob: float
    n: int
    seed: int

    def __post_init__(self):
        if self.leakage < 0.0:
            raise ValueError("leakage must be nonnegative")
        if not 0.0 <= self.error_prob <= 1.0:
            raise ValueError("error_prob must lie in [0, 1]")


def select_f(code: WiretapCode, main: Channel, eve: Channel, alpha):
    """Score every dither value and pick the best one.

    Returns ``(f_star, records)`` where records holds one LeakageRecord
    per f in order and f_star minimizes leakage + error_prob with equal
    weights, ties to the lowest f.  Dither values with no members score
    infinite leakage and error one, so they are never selected while any
    populated value exists.
    """
    a = check_alpha(alpha)
    log_probs = _code_log_probs(code)
    prior = np.exp(log_probs)
    all_pos = np.arange(code.member_count)
    eve_rows = _likelihood_rows(code, eve, all_pos)
    main_rows = _likelihood_rows(code, main, all_pos)
    q_target = _iid_output_vector(code, eve) / code.m1
    records = []
    best_f = None
    best_score = math.inf
    any_members = False
    for f in range(1, code.m2 + 1):
        pos = code.f_positions(f)
        if pos.size == 0:
            records.append(LeakageRecord(f, a, math.inf, 1.0, code.n, code.seed))
            continue
        any_members = True
        weights = _restricted_weights(log_probs[pos])
        p_mz = np.zeros((code.m1, eve_rows.shape[1]))
        np.add.at(p_mz, code.m_label[pos] - 1, weights[:, None] * eve_rows[pos])
        leak = _leakage_value(p_mz, np.broadcast_to(q_target, p_mz.shape).copy(), a)
        rows = main_rows[pos]
        decoded = np.argmax(prior[pos][:, None] * rows, axis=0)
        m_hat = code.m_label[pos][decoded]
        correct = np.sum(rows * (m_hat[None, :] == code.m_label[pos][:, None]), axis=1)
        err = min(max(1.0 - float(np.dot(weights, correct)), 0.0), 1.0)
        records.append(LeakageRecord(f, a, leak, err, code.n, code.seed))
        score = leak + err
        if score < best_score:
            best_score = score
            best_f = f
    if not any_members:
        raise ValueError("every dither value is empty")
    return best_f, records


# ---------------------------------------------------------------------------
# Sweep plumbing


@dataclass(frozen=True)
class ExperimentRecord:
    """One row of a wiretap sweep, in CSV column order."""

    n: int
    r1: float
    r2: float
    alpha: float
    encoder: str
    code_seed: int
    f_star: int
    leakage: float
    error_prob: float
    discards: int

    def to_row(self) -> dict:
        return {name: getattr(self, name) for name in RECORD_FIELDS}


def _config_error(field: str, message: str) -> ValueError:
    return ValueError(f"config field {field!r}: {message}")


@dataclass(frozen=True, eq=False)
class SweepConfig:
    """Validated wiretap sweep configuration.

    The JSON document mirrors the record fields plus file paths: keys
    ``n`` (list), ``r1``, ``r2``, ``alpha`` (number or "inf"),
    ``encoder``, ``codes``, ``seed``, ``eps``, ``source`` (pmf path for
    the deterministic encoder, joint pmf path over (U, X) for the
    stochastic one), ``main`` and ``eve`` (channel paths, input alphabet
    X).  Relative paths resolve against the config file's directory.
    """

    n_values: tuple[int, ...]
    r1: float
    r2: float
    alpha: float
    encoder: str
    codes: int
    seed: int
    eps: float
    source: object
    main: Channel
    eve: Channel

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = ".") -> "SweepConfig":
        if not isinstance(doc, dict):
            raise ValueError("config must be a JSON object")

        def resolve(field):
            path = doc.get(field)
            if not isinstance(path, str) or not path:
                raise _config_error(field, "expected a file path string")
            full = path if os.path.isabs(path) else os.path.join(base_dir, path)
            if not os.path.exists(full):
                raise _config_error(field, f"file not found: {full}")
            return full

        ns = doc.get("n")
        if not isinstance(ns, list) or any(not isinstance(v, int) or v < 1 for v in ns):
            raise _config_error("n", "expected a list of integers >= 1")
        rates = {}
        for field in ("r1", "r2"):
            v = doc.get(field)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
                raise _config_error(field, "expected a nonnegative number")
            rates[field] = float(v)
        try:
            a = check_alpha(parse_alpha(doc.get("alpha")))
        except (ValueError, TypeError) as exc:
            raise _config_error("alpha", str(exc))
        encoder = doc.get("encoder")
        if encoder not in (DETERMINISTIC, STOCHASTIC):
            raise _config_error("encoder", "expected 'deterministic' or 'stochastic'")
        codes = doc.get("codes")
        if not isinstance(codes, int) or isinstance(codes, bool) or codes < 1:
            raise _config_error("codes", "expected an integer >= 1")
        seed = doc.get("seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise _config_error("seed", "expected a nonnegative integer")
        eps = doc.get("eps")
        if not isinstance(eps, (int, float)) or isinstance(eps, bool) or eps <= 0:
            raise _config_error("eps", "expected a positive number")
        try:
            if encoder == DETERMINISTIC:
                source = Pmf.load(resolve("source"))
            else:
                source = JointPmf.load(resolve("source"))
        except ValueError as exc:
            raise _config_error("source", str(exc))
        try:
            main = Channel.load(resolve("main"))
            eve = Channel.load(resolve("eve"))
        except ValueError as exc:
            raise _config_error("main/eve", str(exc))
        x_labels = source.labels if encoder == DETERMINISTIC else source.col_labels
        if main.in_labels != x_labels:
            raise _config_error("main", "input alphabet does not match the source")
        if eve.in_labels != x_labels:
            raise _config_error("eve", "input alphabet does not match the source")
        return cls(tuple(ns), rates["r1"], rates["r2"], a, encoder,
                   codes, seed, float(eps), source, main, eve)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config file {path}: invalid JSON ({exc})")
        return cls.from_dict(doc, os.path.dirname(os.path.abspath(path)))


def _run_code(config: SweepConfig, source, n: int, index: int) -> ExperimentRecord:
    code_seed = derive_seed(config.seed, f"wiretap:n={n}", index)
    code = build_code(source, config.r1, config.r2, code_seed)
    f_star, records = select_f(code, config.main, config.eve, config.alpha)
    rec = records[f_star - 1]
    return ExperimentRecord(n, config.r1, config.r2, config.alpha,
                            config.encoder, code_seed, f_star,
                            rec.leakage, rec.error_prob, code.discards)


def sweep_experiment(config: SweepConfig, threads: int | None = None) -> list[ExperimentRecord]:
    """Run the configured sweep: per n, build codes and select dithers.

    Codes are evaluated concurrently; records come back ordered by
    (n, code index) and depend only on the config, not the thread count.
    """
    sources = {}
    for n in config.n_values:
        if n not in sources:
            if config.encoder == DETERMINISTIC:
                sources[n] = typical_set(config.source, n, config.eps)
            else:
                sources[n] = joint_typical_set(config.source, n, config.eps)
    jobs = [(n, i) for n in config.n_values for i in range(config.codes)]

    def job(k: int) -> ExperimentRecord:
        n, i = jobs[k]
        return _run_code(config, sources[n], n, i)

    return _map_indexed(job, len(jobs), resolve_threads(threads))
