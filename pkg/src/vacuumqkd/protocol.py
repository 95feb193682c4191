"""Seeded two-party Monte Carlo of the entanglement-based CV-QKD protocol.

Each time window yields one joint Gaussian sample of (x_A, p_A, x_B, p_B);
Alice and Bob each keep only the quadrature they chose to measure. The parties
are coroutines that exchange typed messages over an ordered, reliable duplex
channel; every message is recorded in the transcript.

Random streams: ``SeedSequence(seed).spawn(3)`` gives, in order, the state
sampler, Alice and Bob, each driving a PCG64 generator.
"""

from __future__ import annotations

import enum
import json
import math
import queue
import threading
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .gaussian import (
    DegenerateError,
    TwoModeCovariance,
    UnphysicalError,
    key_rate,
    symplectic_eigenvalues,
)

TRANSCRIPT_VERSION = 1
MIN_PAIRS_PER_BASIS = 50


class MessageType(str, enum.Enum):
    BASIS_ANNOUNCE = "basis-announce"
    REVEAL_INDICES = "reveal-indices"
    REVEAL_VALUES = "reveal-values"
    ESTIMATE_REPORT = "estimate-report"
    ACCEPT = "accept"
    ABORT = "abort"


class ProtocolError(RuntimeError):
    """Malformed or out-of-order message; indicates a state-machine bug."""


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    sender: str
    type: MessageType
    payload: dict

    def to_json(self):
        return {"sender": self.sender, "type": self.type.value, "payload": self.payload}


@dataclass(frozen=True)
class ProtocolConfig:
    cm: TwoModeCovariance
    n_windows: int
    reveal_fraction: float
    seed: int
    beta_rec: float = 1.0
    confidence: float = 3.0

    def __post_init__(self):
        if self.n_windows < 100:
            raise ValueError("n_windows must be at least 100")
        if not 0.0 < self.reveal_fraction < 1.0:
            raise ValueError("reveal_fraction must lie in (0, 1)")
        if not 0.0 < self.beta_rec <= 1.0:
            raise ValueError("beta_rec must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_json(self):
        return {
            "cm": self.cm.to_list(),
            "n_windows": self.n_windows,
            "reveal_fraction": self.reveal_fraction,
            "seed": self.seed,
            "beta_rec": self.beta_rec,
            "confidence": self.confidence,
        }


@dataclass
class Transcript:
    config: ProtocolConfig
    messages: list = field(default_factory=list)
    sifted_count: int = 0
    estimated_cm: TwoModeCovariance | None = None
    estimated_eta: float | None = None
    decision: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return bool(self.decision.get("accepted"))

    def to_json(self) -> dict:
        return {
            "version": TRANSCRIPT_VERSION,
            "config": self.config.to_json(),
            "messages": [m.to_json() for m in self.messages],
            "sifted_count": self.sifted_count,
            "estimated_cm": None if self.estimated_cm is None else self.estimated_cm.to_list(),
            "estimated_eta": self.estimated_eta,
            "decision": self.decision,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, allow_nan=True)


def streams(seed: int):
    """(state, alice, bob) generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def sample_quadratures(cm: TwoModeCovariance, n: int, seed) -> np.ndarray:
    """Zero-mean Gaussian samples with covariance ``cm``; shape (n, 4).

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    m = cm.matrix if isinstance(cm, TwoModeCovariance) else np.asarray(cm, dtype=float)
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise UnphysicalError("covariance matrix is not positive definite") from exc
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal((n, 4)) @ chol.T


class HomodyneEstimate(tuple):
    __slots__ = ()

    def __new__(cls, variance, stderr):
        return super().__new__(cls, (variance, stderr))

    variance = property(lambda self: self[0])
    stderr = property(lambda self: self[1])


def homodyne_expected_variance(signal_variance: float, lo_amplitude: float) -> float:
    """Exact photocount-difference variance over beta^2 for a thermal signal."""
    return signal_variance + 0.5 * (signal_variance - 1.0) / lo_amplitude**2


def homodyne_gaussian_check(signal_variance: float, lo_amplitude: float, n: int, seed) -> HomodyneEstimate:
    """Simulate balanced homodyne photocounting of a thermal or vacuum signal mode.

    The signal's Glauber P function is sampled (a Gaussian for V >= 1), the
    balanced beamsplitter maps (alpha, beta) to coherent outputs
    (alpha +/- beta)/sqrt(2), and each port is photocounted with Poisson
    statistics. Returns the variance of the count difference divided by beta^2,
    with its standard error.
    """
    if signal_variance < 1.0:
        raise ValueError("signal variance must be >= 1 (non-negative P function)")
    if lo_amplitude < 100:
        raise ValueError("local oscillator amplitude must be >= 100")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(seed))
    nbar = 0.5 * (signal_variance - 1.0)
    alpha = math.sqrt(nbar / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    n1 = rng.poisson(np.abs(alpha + lo_amplitude) ** 2 / 2.0)
    n2 = rng.poisson(np.abs(alpha - lo_amplitude) ** 2 / 2.0)
    diff = (n1 - n2).astype(float)
    var = float(np.var(diff, ddof=1)) / lo_amplitude**2
    return HomodyneEstimate(var, var * math.sqrt(2.0 / (n - 1)))


@dataclass(frozen=True)
class ChannelEstimate:
    eta: float
    cm: TwoModeCovariance
    var_a: float
    var_b: float
    cov: float
    rho: float
    se_var_a: float
    se_var_b: float
    se_rho: float
    se_cov: float
    n_pairs: int

    def __iter__(self):
        return iter((self.eta, self.cm))


def estimate_channel(pairs_x, pairs_p, source_variance: float | None = None,
                     local_a: tuple[float, int] | None = None,
                     local_b: tuple[float, int] | None = None) -> ChannelEstimate:
    """Estimate the symmetric-form covariance matrix from revealed data.

    Args:
        pairs_x: revealed (alice, bob) values from windows where both measured x.
        pairs_p: the same for p.
        source_variance: Alice's assumed source variance for the loss
            inference; the estimated one is used if omitted.
        local_a, local_b: optional ``(mean square, count)`` summaries of each
            party's full local record; these replace the revealed-only
            variance estimates.

    The state is modelled as zero-mean with equal variances in both
    quadratures and x/p cross terms of opposite sign. The cross term is
    ``rho * sqrt(V_A V_B)`` with ``rho`` the pooled correlation coefficient of
    the revealed pairs, which keeps the estimate positive definite.
    """
    px = np.asarray(pairs_x, dtype=float).reshape(-1, 2)
    pp = np.asarray(pairs_p, dtype=float).reshape(-1, 2)
    if len(px) < MIN_PAIRS_PER_BASIS or len(pp) < MIN_PAIRS_PER_BASIS:
        raise InsufficientDataError(f"need at least {MIN_PAIRS_PER_BASIS} revealed pairs per basis")
    both = np.vstack([px, pp])
    m = len(both)
    saa = float(np.sum(both[:, 0] ** 2))
    sbb = float(np.sum(both[:, 1] ** 2))
    sab = float(np.sum(px[:, 0] * px[:, 1]) - np.sum(pp[:, 0] * pp[:, 1]))
    rho = sab / math.sqrt(saa * sbb)
    if local_a is None:
        local_a = (saa / m, m)
    if local_b is None:
        local_b = (sbb / m, m)
    va, na = local_a
    vb, nb = local_b
    c = rho * math.sqrt(va * vb)
    cm = TwoModeCovariance.from_blocks(va, va, vb, vb, c, -c)
    vs = va if source_variance is None else source_variance
    eta = c * c / (vs * vs - 1.0) if vs > 1.0 else 0.0
    se_rho = (1.0 - rho * rho) / math.sqrt(m)
    return ChannelEstimate(
        eta=float(min(max(eta, 0.0), 1.0)), cm=cm, var_a=va, var_b=vb, cov=c, rho=rho,
        se_var_a=va * math.sqrt(2.0 / na), se_var_b=vb * math.sqrt(2.0 / nb), se_rho=se_rho,
        se_cov=math.sqrt(va * vb * se_rho**2 + 0.5 * c * c * (1.0 / na + 1.0 / nb)), n_pairs=m,
    )


_RHO_MAX = 1.0 - 1e-12


def _rate_from(va, vb, rho, beta_rec):
    rho = min(max(rho, -_RHO_MAX), _RHO_MAX)
    c = rho * math.sqrt(va * vb)
    cm = TwoModeCovariance.from_blocks(va, va, vb, vb, c, -c)
    return key_rate(cm, beta_rec, lenient=True).key_rate


def assess(est: ChannelEstimate, beta_rec: float, confidence: float) -> dict:
    """Point key rate, its standard error and the accept/abort verdict.

    The verdict accepts iff the one-sided lower confidence bound
    ``key_rate - confidence * stderr`` is positive, so sampling noise on an
    uncorrelated state cannot produce a spurious key.
    """
    out = {"key_rate": None, "key_rate_stderr": None, "key_rate_lower": None,
           "accepted": False, "reason": ""}
    theta = (est.var_a, est.var_b, est.rho)
    try:
        point = _rate_from(*theta, beta_rec)
    except (UnphysicalError, DegenerateError) as exc:
        out["reason"] = f"estimate rejected: {exc}"
        return out
    # Secant differences one standard error either side; the key rate has a
    # logarithmic singularity at pure states, where derivatives are useless.
    var = 0.0
    for i, se in enumerate((est.se_var_a, est.se_var_b, est.se_rho)):
        vals = []
        for sign in (1.0, -1.0):
            args = list(theta)
            args[i] += sign * se
            try:
                vals.append(_rate_from(*args, beta_rec))
            except (UnphysicalError, DegenerateError):
                vals.append(None)
        hi, lo = vals
        if hi is not None and lo is not None:
            var += (0.5 * (hi - lo)) ** 2
        elif hi is not None or lo is not None:
            var += ((hi if hi is not None else lo) - point) ** 2
    stderr = math.sqrt(var)
    lower = point - confidence * stderr
    out.update(key_rate=point, key_rate_stderr=stderr, key_rate_lower=lower, accepted=bool(lower > 0.0))
    out["reason"] = "positive key rate" if out["accepted"] else "no positive key rate"
    return out


# Party coroutines yield ("send", Message) or ("recv", MessageType) and are
# resumed with None or the received Message respectively.

def _bits(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def _str_bits(b: np.ndarray) -> str:
    return (b.astype(np.uint8) + ord("0")).tobytes().decode("ascii")


def _public_estimate(bases_a, bases_b, indices, values_a, values_b, summary_a, summary_b):
    sel = np.asarray(indices, dtype=np.int64)
    basis = bases_a[sel]
    pairs = np.column_stack([values_a, values_b])
    return estimate_channel(pairs[basis == 0], pairs[basis == 1],
                            local_a=(summary_a["mean_square"], summary_a["count"]),
                            local_b=(summary_b["mean_square"], summary_b["count"]))


def _alice(measured, bases, rng, cfg: ProtocolConfig):
    yield "send", Message("alice", MessageType.BASIS_ANNOUNCE, {"bases": _str_bits(bases)})
    msg = yield "recv", MessageType.BASIS_ANNOUNCE
    bases_b = _bits(msg.payload["bases"])
    sifted = np.flatnonzero(bases == bases_b)
    n_reveal = max(1, int(round(cfg.reveal_fraction * sifted.size)))
    reveal = np.sort(rng.choice(sifted, size=n_reveal, replace=False)) if sifted.size else sifted
    yield "send", Message("alice", MessageType.REVEAL_INDICES, {"indices": reveal.tolist()})
    summary = {"mean_square": float(np.mean(measured**2)), "count": int(measured.size)}
    yield "send", Message("alice", MessageType.REVEAL_VALUES,
                          {"values": measured[reveal].tolist(), "summary": summary})
    msg_b = yield "recv", MessageType.REVEAL_VALUES
    report = yield "recv", MessageType.ESTIMATE_REPORT
    try:
        est = _public_estimate(bases, bases_b, reveal, measured[reveal], msg_b.payload["values"],
                               summary, msg_b.payload["summary"])
    except InsufficientDataError as exc:
        verdict = {"accepted": False, "reason": str(exc)}
    else:
        verdict = assess(est, cfg.beta_rec, cfg.confidence)
    if report.payload["assessment"] != verdict:
        raise ProtocolError("parties disagree on the channel estimate")
    kind = MessageType.ACCEPT if verdict["accepted"] else MessageType.ABORT
    yield "send", Message("alice", kind, {"reason": verdict["reason"]})
    return {"sifted": int(sifted.size)}


def _bob(measured, bases, rng, cfg: ProtocolConfig):
    msg = yield "recv", MessageType.BASIS_ANNOUNCE
    bases_a = _bits(msg.payload["bases"])
    yield "send", Message("bob", MessageType.BASIS_ANNOUNCE, {"bases": _str_bits(bases)})
    idx = yield "recv", MessageType.REVEAL_INDICES
    vals_a = yield "recv", MessageType.REVEAL_VALUES
    reveal = np.asarray(idx.payload["indices"], dtype=np.int64)
    if reveal.size and np.any(bases_a[reveal] != bases[reveal]):
        raise ProtocolError("revealed window outside the sifted set")
    summary = {"mean_square": float(np.mean(measured**2)), "count": int(measured.size)}
    yield "send", Message("bob", MessageType.REVEAL_VALUES,
                          {"values": measured[reveal].tolist(), "summary": summary})
    payload = {"assessment": None}
    try:
        est = _public_estimate(bases_a, bases, reveal, vals_a.payload["values"], measured[reveal],
                               vals_a.payload["summary"], summary)
    except InsufficientDataError as exc:
        payload["assessment"] = {"accepted": False, "reason": str(exc)}
        payload.update(cm=None, eta=None)
    else:
        payload["assessment"] = assess(est, cfg.beta_rec, cfg.confidence)
        payload.update(cm=est.cm.to_list(), eta=est.eta)
    yield "send", Message("bob", MessageType.ESTIMATE_REPORT, payload)
    yield "recv", None  # accept or abort
    return {}


class _Link:
    """Ordered duplex channel with a shared transcript."""

    def __init__(self, threaded: bool):
        self.threaded = threaded
        self.log: list[Message] = []
        self.lock = threading.Lock()
        self.boxes = {p: (queue.Queue() if threaded else deque()) for p in ("alice", "bob")}

    def send(self, msg: Message):
        if not isinstance(msg.type, MessageType):
            raise ProtocolError(f"undeclared message type {msg.type!r}")
        other = "bob" if msg.sender == "alice" else "alice"
        with self.lock:
            self.log.append(msg)
        box = self.boxes[other]
        box.put(msg) if self.threaded else box.append(msg)


def _check(msg: Message, expected):
    if expected is None:
        if msg.type not in (MessageType.ACCEPT, MessageType.ABORT):
            raise ProtocolError(f"expected accept/abort, got {msg.type.value}")
    elif msg.type is not expected:
        raise ProtocolError(f"expected {expected.value}, got {msg.type.value}")
    return msg


def _run_interleaved(procs: dict, link: _Link):
    actions = {p: next(g) for p, g in procs.items()}
    results = {}
    while actions:
        progressed = False
        for p in list(actions):
            gen = procs[p]
            try:
                while True:
                    kind, arg = actions[p]
                    if kind == "send":
                        link.send(arg)
                        actions[p] = gen.send(None)
                    elif link.boxes[p]:
                        actions[p] = gen.send(_check(link.boxes[p].popleft(), arg))
                    else:
                        break
                    progressed = True
            except StopIteration as stop:
                results[p] = stop.value
                del actions[p]
                progressed = True
        if not progressed:
            raise ProtocolError("deadlock: both parties waiting")
    return results


def _run_threaded(procs: dict, link: _Link, timeout: float = 60.0):
    results, errors = {}, []

    def drive(p, gen):
        try:
            action = next(gen)
            while True:
                kind, arg = action
                if kind == "send":
                    link.send(arg)
                    action = gen.send(None)
                else:
                    action = gen.send(_check(link.boxes[p].get(timeout=timeout), arg))
        except StopIteration as stop:
            results[p] = stop.value
        except Exception as exc:  # surfaced to the caller below
            errors.append(exc)

    threads = [threading.Thread(target=drive, args=item) for item in procs.items()]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return results


def run_protocol(config: ProtocolConfig, scheduler: str = "interleaved") -> Transcript:
    """Execute sifting, parameter estimation and the accept/abort decision."""
    state_rng, rng_a, rng_b = streams(config.seed)
    samples = sample_quadratures(config.cm, config.n_windows, state_rng)
    bases_a = rng_a.integers(0, 2, config.n_windows, dtype=np.uint8)
    bases_b = rng_b.integers(0, 2, config.n_windows, dtype=np.uint8)
    rows = np.arange(config.n_windows)
    meas_a = samples[rows, bases_a]
    meas_b = samples[rows, 2 + bases_b]
    del samples

    link = _Link(threaded=scheduler == "threaded")
    procs = {"alice": _alice(meas_a, bases_a, rng_a, config), "bob": _bob(meas_b, bases_b, rng_b, config)}
    if scheduler == "interleaved":
        results = _run_interleaved(procs, link)
    elif scheduler == "threaded":
        results = _run_threaded(procs, link)
    else:
        raise ValueError(f"unknown scheduler {scheduler!r}")

    report = next(m for m in link.log if m.type is MessageType.ESTIMATE_REPORT).payload
    return Transcript(
        config=config,
        messages=link.log,
        sifted_count=results["alice"]["sifted"],
        estimated_cm=None if report["cm"] is None else TwoModeCovariance(np.array(report["cm"])),
        estimated_eta=report["eta"],
        decision=report["assessment"],
    )


def audit_transcript(transcript: Transcript) -> bool:
    """Recompute the decision from public messages only and compare."""
    by_type = {}
    for m in transcript.messages:
        if not isinstance(m.type, MessageType):
            return False
        by_type.setdefault((m.sender, m.type), m)
    bases_a = _bits(by_type["alice", MessageType.BASIS_ANNOUNCE].payload["bases"])
    bases_b = _bits(by_type["bob", MessageType.BASIS_ANNOUNCE].payload["bases"])
    reveal = by_type["alice", MessageType.REVEAL_INDICES].payload["indices"]
    va = by_type["alice", MessageType.REVEAL_VALUES].payload
    vb = by_type["bob", MessageType.REVEAL_VALUES].payload
    if np.any(bases_a[reveal] != bases_b[reveal]):
        return False
    try:
        est = _public_estimate(bases_a, bases_b, reveal, va["values"], vb["values"], va["summary"], vb["summary"])
    except InsufficientDataError:
        return not transcript.accepted
    verdict = assess(est, transcript.config.beta_rec, transcript.config.confidence)
    final = transcript.messages[-1].type
    return verdict == transcript.decision and (final is MessageType.ACCEPT) == verdict["accepted"]
