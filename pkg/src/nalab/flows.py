"""Stochastic flows on the congruence group {g = I mod p} in GL_d(Z_p).

Time runs over the ball ``p^{-R} Z_p`` paved by ``p^level`` cosets.  The
representatives are visited in digit-reversed order: index ``i`` maps to
``t_i = rev(i) p^{-R}``, where ``rev`` reverses the ``level`` base-p digits.
Neighbours in this order are p-adically close, and the points of a coarser
paving are exactly the fine indices ``p * i``, so refinement is nested.

One step of the scheme is ``xi <- xi @ exp(a(xi) dt + sum_i dw_i E_i(xi))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .measures import ScaledSample, sample_measure
from .padic import DomainError, PAdic, PMatrix, _split, matrix_exp, valuation_int

MAX_CLASSES = 10 ** 7


class StepError(DomainError):
    """Exponential step left the convergence domain."""

    def __init__(self, msg: str, k: int | None = None, norm: float | None = None):
        super().__init__(msg if k is None else f"step {k}: {msg}")
        self.k = k
        self.norm = norm


# ---------------------------------------------------------------------------
# time lattice and noise


def digit_reverse(i: int, p: int, level: int) -> int:
    out = 0
    for _ in range(level):
        i, d = divmod(i, p)
        out = out * p + d
    return out


@dataclass(frozen=True)
class TimeLattice:
    p: int
    R: int
    level: int

    def __post_init__(self):
        if self.level < 0:
            raise DomainError("level must be nonnegative")

    @property
    def size(self) -> int:
        return self.p ** self.level

    @property
    def coset_radius_exp(self) -> int:
        """Cosets are balls of radius p^(R - level)."""
        return self.R - self.level

    def point(self, i: int, prec: int = 20) -> PAdic:
        num = digit_reverse(i, self.p, self.level)
        if self.R >= 0:
            return PAdic.from_value(Fraction(num, self.p ** self.R), self.p, prec)
        return PAdic.from_int(num * self.p ** (-self.R), self.p, prec)

    def points(self, prec: int = 20) -> list:
        return [self.point(i, prec) for i in range(self.size)]

    def steps(self, prec: int = 20) -> list:
        """dt_k = t_{k+1} - t_k."""
        t = self.points(prec)
        return [b - a for a, b in zip(t, t[1:])]

    def refine(self) -> TimeLattice:
        return TimeLattice(self.p, self.R, self.level + 1)


@dataclass(frozen=True)
class NoiseModel:
    """Increment law: coordinate i of dw is scaling[i] * Y with Y ~ measure."""

    measure: object
    lattice: TimeLattice
    scaling: tuple

    def __post_init__(self):
        sc = tuple(self.scaling)
        if not sc:
            raise DomainError("noise needs at least one coordinate")
        if any(v.is_zero for v in sc):
            raise DomainError("degenerate scaling (zero diagonal entry)")
        object.__setattr__(self, "scaling", sc)

    @property
    def d(self) -> int:
        return len(self.scaling)


@dataclass(frozen=True, eq=False)
class NoisePath:
    lattice: TimeLattice
    increments: tuple  # (steps, d) PAdic
    model: NoiseModel | None = None
    seed: int | None = None

    @property
    def d(self) -> int:
        return len(self.increments[0]) if self.increments else 0

    def w(self, k: int) -> tuple:
        """w(t_k) with w(t_0) = 0."""
        acc = [PAdic.zero(self.lattice.p)] * self.d
        for inc in self.increments[:k]:
            acc = [a + b for a, b in zip(acc, inc)]
        return tuple(acc)

    def __eq__(self, other):
        return (isinstance(other, NoisePath) and self.lattice == other.lattice
                and self.increments == other.increments)


def _rng(seed, *spawn_key) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(ss))


def sample_noise(measure, lattice: TimeLattice, d: int, scaling: Sequence[PAdic], seed: int,
                 prec: int = 20) -> NoisePath:
    """I.i.d. increments for the p^level - 1 steps of the lattice."""
    model = NoiseModel(measure, lattice, tuple(scaling))
    if model.d != d:
        raise DomainError("scaling must have d entries")
    steps = lattice.size - 1
    incs = _draw(model, steps, _rng(seed), prec)
    return NoisePath(lattice, incs, model, seed)


def _draw(model: NoiseModel, steps: int, rng: np.random.Generator, prec: int) -> tuple:
    if steps <= 0:
        return ()
    ys = sample_measure(model.measure, steps * model.d, rng).to_padics(prec)
    return tuple(tuple(ys[k * model.d + i] * model.scaling[i] for i in range(model.d))
                 for k in range(steps))


def refine_noise(noise: NoisePath, seed: int, prec: int = 20) -> NoisePath:
    """Noise on the next level with w unchanged at every coarse time.

    Coarse step k spans fine indices p k .. p (k + 1); its first p - 1 fine
    increments are fresh draws and the last one closes the sum.
    """
    if noise.model is None:
        raise DomainError("refinement needs the generating noise model")
    p = noise.lattice.p
    fine = noise.lattice.refine()
    rng = _rng(seed, 1)
    out = []
    for inc in noise.increments:
        fresh = _draw(noise.model, p - 1, rng, prec)
        last = tuple(c - sum(f[i] for f in fresh) if fresh else c for i, c in enumerate(inc))
        out.extend(fresh)
        out.append(last)
    out.extend(_draw(noise.model, p - 1, rng, prec))
    model = NoiseModel(noise.model.measure, fine, noise.model.scaling)
    return NoisePath(fine, tuple(out), model, seed)


# ---------------------------------------------------------------------------
# flows


def _zp_rank(vectors: Sequence[Sequence[int]], p: int, N: int) -> int:
    """Rank over Z_p of integer vectors known modulo p^N."""
    mod = p ** N
    rows = [[x % mod for x in v] for v in vectors]
    rank = 0
    while rows:
        best = None
        for r, row in enumerate(rows):
            for c, x in enumerate(row):
                v = valuation_int(x, p)
                if v < N and (best is None or v < best[0]):
                    best = (v, r, c)
        if best is None:
            break
        _, r, c = best
        piv = rows.pop(r)
        s, u = _split(piv[c], p)
        inv = pow(u, -1, mod)
        for row in rows:
            # row[c] has valuation >= s, so the factor lies in Z_p
            f = (row[c] // p ** s) * inv % mod
            for j in range(len(row)):
                row[j] = (row[j] - f * piv[j]) % mod
        rank += 1
    return rank


Drift = Union[PMatrix, Callable[[PMatrix], PMatrix]]
Diffusion = Union[Sequence[PMatrix], Callable[[PMatrix], Sequence[PMatrix]]]


@dataclass(frozen=True, eq=False)
class GroupFlowSpec:
    """Flow data on {g = I mod p}; constant fields are left-invariant."""

    p: int
    d: int
    drift: Drift
    diffusion: Diffusion
    start: PMatrix
    prec: int = 20

    def __post_init__(self):
        if self.p == 2:
            raise DomainError("flows need an odd prime")
        if not self.start.is_congruent_identity(1):
            raise DomainError("start point must be = I mod p")
        if isinstance(self.drift, PMatrix):
            _check_lie(self.drift, "drift")
        if not callable(self.diffusion):
            basis = tuple(self.diffusion)
            for E in basis:
                _check_lie(E, "diffusion")
            if _zp_rank([sum(E.entries, ()) for E in basis], self.p, self.prec) < len(basis):
                raise DomainError("diffusion map is not injective")
            object.__setattr__(self, "diffusion", basis)

    @property
    def left_invariant(self) -> bool:
        return isinstance(self.drift, PMatrix) and not callable(self.diffusion)

    def a(self, xi: PMatrix) -> PMatrix:
        return self.drift if isinstance(self.drift, PMatrix) else self.drift(xi)

    def A(self, xi: PMatrix) -> tuple:
        return self.diffusion if not callable(self.diffusion) else tuple(self.diffusion(xi))

    def with_start(self, start: PMatrix) -> GroupFlowSpec:
        return GroupFlowSpec(self.p, self.d, self.drift, self.diffusion, start, self.prec)


def _check_lie(M: PMatrix, name: str) -> None:
    if M.valuation() < 1:
        raise DomainError(f"{name} must have norm <= 1/p, got {M.norm}")


def scale_matrix(M: PMatrix, c: PAdic) -> PMatrix:
    """c * M; a negative ord of c costs precision and needs divisible entries."""
    if c.is_zero:
        return PMatrix.zeros(M.d, M.p, M.prec)
    o = int(c.ord)
    if o >= 0:
        return M.scale(c.integer_rep())
    k = -o
    if M.valuation() < k:
        raise StepError(f"scaling by |c| = {c.norm} leaves Z_p", norm=c.norm * M.norm)
    prec = M.prec - k
    if prec < 1:
        raise StepError("no precision left after scaling")
    q = M.p ** k
    out = tuple(tuple((e // q) * c.unit for e in r) for r in M.entries)
    return PMatrix(M.p, prec, out)


def lie_element(spec: GroupFlowSpec, xi: PMatrix, dt: PAdic, dw: Sequence[PAdic]) -> PMatrix:
    basis = spec.A(xi)
    if len(basis) != len(dw):
        raise DomainError("noise dimension does not match the diffusion basis")
    X = scale_matrix(spec.a(xi), dt)
    for c, E in zip(dw, basis):
        X = X + scale_matrix(E, c)
    return X


def euler_exp_step(xi: PMatrix, spec: GroupFlowSpec, dt: PAdic, dw: Sequence[PAdic], k: int | None = None) -> PMatrix:
    """xi @ exp(a(xi) dt + A(xi) dw)."""
    X = lie_element(spec, xi, dt, dw)
    if X.valuation() < 1:
        raise StepError(f"exponent has norm {X.norm} > 1/p", k=k, norm=X.norm)
    return xi @ matrix_exp(X)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: tuple
    points: tuple
    spec: GroupFlowSpec
    noise: NoisePath

    @property
    def end(self) -> PMatrix:
        return self.points[-1]

    def records(self):
        for k, (t, g) in enumerate(zip(self.times, self.points)):
            yield {
                "k": k,
                "t_ord": None if t.is_zero else int(t.ord),
                "t_digits": list(t.digits) if not t.is_zero else [],
                "prec": g.prec,
                "matrix_digits": [[_digits(e, g.p, g.prec) for e in row] for row in g.entries],
            }


def _digits(n: int, p: int, k: int) -> list:
    out = []
    for _ in range(k):
        n, d = divmod(n, p)
        out.append(d)
    return out


def simulate_flow(spec: GroupFlowSpec, noise: NoisePath) -> Trajectory:
    if noise.lattice.p != spec.p:
        raise DomainError("noise and flow use different primes")
    times = noise.lattice.points(spec.prec)
    dts = [b - a for a, b in zip(times, times[1:])]
    xi = spec.start.with_prec(spec.prec)
    pts = [xi]
    for k, (dt, dw) in enumerate(zip(dts, noise.increments)):
        try:
            xi = euler_exp_step(xi, spec, dt, dw, k=k)
        except StepError as err:
            if err.k is None:
                raise StepError(str(err), k=k, norm=err.norm) from err
            raise
        pts.append(xi)
    return Trajectory(tuple(times), tuple(pts), spec, noise)


def write_trajectories(trajs: Sequence[Trajectory], path, config_hash: str | None = None) -> None:
    """JSON lines, one record per step; ``path`` index tags multi-path files."""
    with Path(path).open("w") as fh:
        for j, tr in enumerate(trajs):
            for rec in tr.records():
                rec = {"path": j, **rec}
                if config_hash:
                    rec["config_hash"] = config_hash
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# batch simulation on a finite quotient


def class_id(g, p: int, m_q: int) -> int:
    """Index of g in G / G_{m_q + 1}: the digits of (g - I) / p mod p^m_q."""
    entries = g.entries if isinstance(g, PMatrix) else g
    d = len(entries)
    base = p ** m_q
    mod = p ** (m_q + 1)
    out = 0
    for a in range(d):
        for b in range(d):
            e = (entries[a][b] - (a == b)) % mod
            if e % p:
                raise DomainError("matrix is not = I mod p")
            out = out * base + e // p
    return out


def class_ids_batch(G: np.ndarray, p: int, m_q: int) -> np.ndarray:
    n, d, _ = G.shape
    mod = p ** (m_q + 1)
    E = (G - np.eye(d, dtype=np.int64)[None]) % mod
    if np.any(E % p):
        raise DomainError("batch state left the congruence group")
    E //= p
    out = np.zeros(n, dtype=np.int64)
    base = p ** m_q
    for a in range(d):
        for b in range(d):
            out = out * base + E[:, a, b]
    return out


def _exp_coefficients(p: int, M: int) -> list:
    """c_j = p^j / j! mod p^M, until v(c_j) >= M."""
    mod = p ** M
    out = []
    j = 0
    while True:
        s, u = _split(math.factorial(j), p)
        v = j - s
        if j > 0 and v >= M:
            return out
        out.append((p ** v * pow(u, -1, mod)) % mod)
        j += 1


def _batch_matmul(A: np.ndarray, B: np.ndarray, mod: int) -> np.ndarray:
    return np.einsum("nij,njk->nik", A, B) % mod


def _noise_residues(model: NoiseModel, sample: ScaledSample, coord: int, mod_digits: int) -> np.ndarray:
    """scaling[coord] * sample as residues mod p^mod_digits (must lie in Z_p)."""
    p = model.lattice.p
    v = model.scaling[coord]
    vo, vu = int(v.ord), v.unit
    lift = sample.shift - vo
    vals = sample.values.astype(object)
    if lift > 0:
        div = p ** lift
        if any(x % div for x in vals):
            raise StepError("scaled noise leaves Z_p")
        vals = vals // div
    elif lift < 0:
        vals = vals * p ** (-lift)
    known = sample.digits - sample.shift + vo
    if known < mod_digits:
        raise DomainError("noise samples carry too few digits for this quotient")
    mod = p ** mod_digits
    return np.array([(x * vu) % mod for x in vals], dtype=np.int64)


def _int_residue(c: PAdic, k: int) -> int:
    if c.is_zero:
        return 0
    if c.ord < 0:
        raise StepError("batch simulation needs integral time steps")
    return c.residue(k)


def batch_end_classes(spec: GroupFlowSpec, model: NoiseModel, m_q: int, n_paths: int, seed: int,
                      start: PMatrix | None = None) -> np.ndarray:
    """Quotient classes of the endpoint for ``n_paths`` independent paths.

    Runs modulo p^(m_q + 1), which determines the class exactly because
    exp(X) mod p^M depends only on X mod p^M for p odd.
    """
    if not spec.left_invariant:
        raise DomainError("batch simulation needs constant drift and diffusion")
    p, d = spec.p, spec.d
    M = m_q + 1
    if M > spec.prec:
        raise DomainError("quotient finer than the working precision")
    mod, mod1 = p ** M, p ** (M + 1)
    if mod1 ** 2 * d * (model.d + 1) >= 2 ** 62:
        raise DomainError("quotient too fine for int64 batch arithmetic")
    lat = model.lattice
    dts = [_int_residue(c, M + 1) for c in lat.steps(spec.prec)]
    steps = len(dts)
    a = np.array(spec.drift.entries, dtype=object) % mod1
    basis = [np.array(E.entries, dtype=object) % mod1 for E in spec.diffusion]
    if len(basis) != model.d:
        raise DomainError("noise dimension does not match the diffusion basis")
    a = a.astype(np.int64)
    basis = np.stack([b.astype(np.int64) for b in basis]) if basis else np.zeros((0, d, d), np.int64)
    start = spec.start if start is None else start
    G = np.broadcast_to(np.array(start.reduce(M), dtype=np.int64), (n_paths, d, d)).copy()
    coeffs = _exp_coefficients(p, M)
    eye = np.broadcast_to(np.eye(d, dtype=np.int64), (n_paths, d, d))
    if steps == 0:
        return class_ids_batch(G, p, m_q)
    # draws are laid out like sample_noise: for each path, steps x d in row-major order
    rng = _rng(seed)
    sample = sample_measure(model.measure, n_paths * steps * model.d, rng)
    W = np.stack([_noise_residues(model, _sub(sample, i, model.d), i, M + 1)
                  for i in range(model.d)], axis=-1).reshape(n_paths, steps, model.d)
    for k in range(steps):
        X = (a[None] * dts[k]) % mod1
        X = (X + np.einsum("ni,ijk->njk", W[:, k, :], basis)) % mod1
        if np.any(X % p):
            raise StepError("exponent has norm > 1/p", k=k)
        Y = X // p
        E = eye.copy() * coeffs[0]
        P = eye.copy()
        for c in coeffs[1:]:
            P = _batch_matmul(P, Y % mod, mod)
            E = (E + c * P) % mod
        G = _batch_matmul(G, E, mod)
    return class_ids_batch(G, p, m_q)


def _sub(sample: ScaledSample, i: int, d: int) -> ScaledSample:
    return ScaledSample(sample.p, sample.shift, sample.digits, sample.values[i::d])


def batch_noise_paths(model: NoiseModel, n_paths: int, seed: int, prec: int = 20) -> list:
    """The NoisePaths used by :func:`batch_end_classes` for the same seed."""
    steps = model.lattice.size - 1
    sample = sample_measure(model.measure, n_paths * steps * model.d, _rng(seed))
    ys = sample.to_padics(prec)
    out = []
    for j in range(n_paths):
        incs = []
        for k in range(steps):
            base = (j * steps + k) * model.d
            incs.append(tuple(ys[base + i] * model.scaling[i] for i in range(model.d)))
        out.append(NoisePath(model.lattice, tuple(incs), model, seed))
    return out


@dataclass(frozen=True)
class Histogram:
    p: int
    d: int
    m_q: int
    counts: dict  # class id -> count
    n: int

    @property
    def n_classes(self) -> int:
        return self.p ** (self.d * self.d * self.m_q)

    def frequency(self, cid: int) -> float:
        return self.counts.get(cid, 0) / self.n

    def rows(self):
        return [(c, n, n / self.n) for c, n in sorted(self.counts.items())]

    def total_mass(self) -> Fraction:
        return Fraction(sum(self.counts.values()), self.n)

    def tv_distance(self, other: Histogram) -> float:
        keys = set(self.counts) | set(other.counts)
        return 0.5 * sum(abs(self.frequency(k) - other.frequency(k)) for k in keys)


def _check_capacity(p: int, d: int, m_q: int) -> None:
    if m_q < 1:
        raise DomainError("quotient level must be >= 1")
    if p ** (d * d * m_q) > MAX_CLASSES:
        raise DomainError(f"quotient has {p ** (d * d * m_q)} classes (capacity {MAX_CLASSES})")


def transition_histogram(spec: GroupFlowSpec, model: NoiseModel, m_q: int, n_samples: int, seed: int,
                         start: PMatrix | None = None) -> Histogram:
    """Empirical law of the endpoint on G / G_{m_q + 1}."""
    _check_capacity(spec.p, spec.d, m_q)
    if spec.left_invariant:
        ids = batch_end_classes(spec, model, m_q, n_samples, seed, start)
    else:
        sp = spec if start is None else spec.with_start(start)
        ids = np.array([class_id(simulate_flow(sp, path).end, spec.p, m_q)
                        for path in batch_noise_paths(model, n_samples, seed, spec.prec)])
    u, c = np.unique(ids, return_counts=True)
    return Histogram(spec.p, spec.d, m_q, dict(zip(u.tolist(), c.tolist())), n_samples)


def write_histogram(h: Histogram, path) -> None:
    import csv
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class_id", "count", "frequency"])
        for row in h.rows():
            w.writerow(row)


@dataclass(frozen=True)
class RatioRow:
    class_id: int
    base_count: int
    shifted_count: int
    ratio: float
    ci_low: float
    ci_high: float
    flagged: bool


@dataclass(frozen=True)
class RatioTable:
    rows: tuple
    excluded: int  # classes empty under the base start
    base: Histogram
    shifted: Histogram

    @property
    def flagged(self) -> list:
        return [r.class_id for r in self.rows if r.flagged]


def left_translate_classes(ids: np.ndarray, h: PMatrix, p: int, d: int, m_q: int) -> np.ndarray:
    """Class of h g for every class id of g."""
    M = m_q + 1
    mod = p ** M
    base = p ** m_q
    H = np.array(h.reduce(M), dtype=np.int64)
    digits = np.zeros((len(ids), d, d), dtype=np.int64)
    rest = ids.copy()
    for a in reversed(range(d)):
        for b in reversed(range(d)):
            digits[:, a, b] = rest % base
            rest //= base
    G = (digits * p + np.eye(d, dtype=np.int64)[None]) % mod
    return class_ids_batch(np.einsum("ij,njk->nik", H, G) % mod, p, m_q)


def quasi_invariance_empirical(spec: GroupFlowSpec, model: NoiseModel, h: PMatrix, m_q: int,
                               n_samples: int, seed: int, z: float = 1.96) -> RatioTable:
    """Per-class P_h / P from shared noise, with delta-method intervals.

    P_h uses the start h @ x.  The interval is exp(+-z sqrt(1/n_h + 1/n))
    around the count ratio; a class with n_h = 0 has the interval [0, 0],
    which excludes every positive value and is flagged.
    """
    if not h.is_congruent_identity(1):
        raise DomainError("h must lie in the congruence group")
    base = transition_histogram(spec, model, m_q, n_samples, seed)
    shifted = transition_histogram(spec, model, m_q, n_samples, seed, start=(h @ spec.start).with_prec(spec.prec))
    rows, excluded = [], 0
    for cid in sorted(set(base.counts) | set(shifted.counts)):
        n0, n1 = base.counts.get(cid, 0), shifted.counts.get(cid, 0)
        if n0 == 0:
            excluded += 1
            continue
        r = n1 / n0
        if n1 == 0:
            rows.append(RatioRow(cid, n0, n1, 0.0, 0.0, 0.0, True))
            continue
        se = math.sqrt(1 / n1 + 1 / n0)
        rows.append(RatioRow(cid, n0, n1, r, r * math.exp(-z * se), r * math.exp(z * se), False))
    return RatioTable(tuple(rows), excluded, base, shifted)


def g_prime_element(p: int, d: int, coords: Mapping[tuple, int], prec: int = 20) -> PMatrix:
    """exp(H) with H_ab = c_ab p^(1 + a d + b): coordinates decay along the row-major order."""
    H = [[0] * d for _ in range(d)]
    for (a, b), c in coords.items():
        H[a][b] = c * p ** (1 + a * d + b)
    return matrix_exp(PMatrix(p, prec, tuple(map(tuple, H))))


# ---------------------------------------------------------------------------
# Picard iteration


Coefficient = Union[Callable[[PAdic, PAdic], PAdic], PAdic, int, Fraction]


@dataclass(frozen=True)
class Linear:
    """a(t, x) = const + slope * x."""

    const: object = 0
    slope: object = 0

    def __call__(self, t: PAdic, x: PAdic) -> PAdic:
        return x * self.slope + self.const


@dataclass(frozen=True)
class PicardResult:
    solution: tuple
    differences: tuple  # sup norm of X_{n+1} - X_n
    iterations: int
    converged: bool
    diverged: bool
    message: str = ""

    @property
    def ratios(self) -> list:
        d = self.differences
        return [b / a for a, b in zip(d, d[1:]) if a > 0 and b > 0]


def _coef_fn(c: Coefficient):
    if callable(c):
        return c
    return lambda t, x: x * 0 + c


def picard_iterate(coeffs: Mapping[tuple, Coefficient], x0, noise: NoisePath, n_iter: int,
                   lattice: TimeLattice | None = None, prec: int = 20) -> PicardResult:
    """Fixed point of X(t_i) = x0 + sum_{(k,l)} sum_{j<i} a_kl(t_j, X(t_j)) dt_j^k dw_j^l.

    The sum over j < i is the left-point Riemann sum over the paving.
    Stops once the sup-norm difference drops below p^{-(prec - 1)}; a
    growing difference ends the run with a divergence report.
    """
    lattice = lattice or noise.lattice
    p = lattice.p
    if noise.d != 1:
        raise DomainError("picard_iterate works with scalar noise")
    x0 = x0 if isinstance(x0, PAdic) else PAdic.from_value(x0, p, prec)
    t = lattice.points(prec)
    dt = [b - a for a, b in zip(t, t[1:])]
    dw = [inc[0] for inc in noise.increments]
    weights = {}
    for (k, l), c in coeffs.items():
        weights[(k, l)] = (_coef_fn(c), [a ** k * b ** l for a, b in zip(dt, dw)])
    X = [x0] * lattice.size
    diffs = []
    tol = float(p) ** (-(prec - 1))
    for it in range(1, n_iter + 1):
        new = [x0]
        acc = PAdic.zero(p, prec)
        for j in range(lattice.size - 1):
            for fn, w in weights.values():
                acc = acc + fn(t[j], X[j]) * w[j]
            new.append(x0 + acc)
        diff = max((a - b).norm for a, b in zip(new, X))
        diffs.append(diff)
        X = new
        if diff < tol:
            return PicardResult(tuple(X), tuple(diffs), it, True, False)
        if len(diffs) >= 2 and diffs[-1] > diffs[-2]:
            return PicardResult(tuple(X), tuple(diffs), it, False, True,
                                f"difference grew from {diffs[-2]:g} to {diffs[-1]:g}")
    return PicardResult(tuple(X), tuple(diffs), n_iter, False, False, "iteration budget exhausted")


__all__ = [
    "TimeLattice", "NoiseModel", "NoisePath", "GroupFlowSpec", "Trajectory", "StepError",
    "sample_noise", "refine_noise", "euler_exp_step", "simulate_flow", "write_trajectories",
    "transition_histogram", "quasi_invariance_empirical", "Histogram", "RatioTable",
    "picard_iterate", "PicardResult", "Linear", "class_id", "batch_end_classes",
    "batch_noise_paths", "left_translate_classes", "g_prime_element", "digit_reverse",
    "write_histogram", "scale_matrix",
]
