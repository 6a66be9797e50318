"""Test functions and experiment runners for the compression methods.

An experiment draws uniform data, evaluates a test function, perturbs the
responses with Gaussian noise, compresses, and records how far each
compressed loss approximation is from the full empirical loss.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import clustering, nets, weights
from .dataset import DEFAULT_NOISE_VAR, add_noise, generate_uniform
from .errors import ParameterError

FUNCTIONS = ("f1", "f2", "f3")
METHODS = ("supercompress", "robust", "qmc-avg", "voronoi", "kmeans")
DEFAULT_A = 5.0
DEFAULT_U = 0.5


def _params(x, a, u):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = x.shape[1]
    a = np.full(s, DEFAULT_A) if a is None else np.broadcast_to(np.asarray(a, float), (s,))
    u = np.full(s, DEFAULT_U) if u is None else np.broadcast_to(np.asarray(u, float), (s,))
    return x, a, u


def eval_f1(x, a=None, u=None):
    """Continuous test function ``exp(-sum a_i |x_i - u_i|)`` (row-wise)."""
    x, a, u = _params(x, a, u)
    return np.exp(-np.abs(x - u) @ a)


def eval_f2(x, a=None, u=None):
    """Discontinuous test function.

    Zero when ``x_1 > u_1`` or ``x_2 > u_2``, else ``exp(sum a_i x_i)``.
    Only the first two coordinates enter the cut-off.
    """
    x, a, u = _params(x, a, u)
    out = np.exp(x @ a)
    cut = x[:, 0] > u[0]
    if x.shape[1] > 1:
        cut |= x[:, 1] > u[1]
    out[cut] = 0.0
    return out


def eval_f3(x):
    """Two-mode Gaussian bump ``10^s/2 (phi(10x - 10/3) + phi(10x - 20/3))``."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    s = x.shape[1]
    norm = (2.0 * np.pi) ** (-s / 2.0)

    def phi(v):
        return norm * np.exp(-0.5 * np.sum(v * v, axis=1))

    return 10.0**s / 2.0 * (phi(10.0 * x - 10.0 / 3.0) + phi(10.0 * x - 20.0 / 3.0))


def f2_sup_norm(s: int, a=None, u=None) -> float:
    """Closed-form supremum of f2 over the unit cube."""
    a = np.full(s, DEFAULT_A) if a is None else np.broadcast_to(np.asarray(a, float), (s,))
    u = np.full(s, DEFAULT_U) if u is None else np.broadcast_to(np.asarray(u, float), (s,))
    k = min(2, s)
    expo = float(np.sum(a[:k] * u[:k]) + np.sum(np.maximum(a[k:], 0.0)))
    return math.exp(expo)


def sup_norm(kind: str, s: int) -> float:
    """Supremum of a test function with default parameters over the unit cube."""
    if kind == "f1":
        return 1.0
    if kind == "f2":
        return f2_sup_norm(s)
    if kind == "f3":
        return float(eval_f3(np.full((1, s), 1.0 / 3.0))[0])  # mode of the first bump
    raise ParameterError(f"unknown test function {kind!r}")


def get_function(kind: str, a=None, u=None):
    """Return a vectorised callable for ``kind`` in ``{'f1', 'f2', 'f3'}``."""
    if kind == "f1":
        return lambda x: eval_f1(x, a, u)
    if kind == "f2":
        return lambda x: eval_f2(x, a, u)
    if kind == "f3":
        return eval_f3
    raise ParameterError(f"unknown test function {kind!r}")


def err(f, X, Y) -> float:
    """Empirical quadratic loss ``(1/N) sum (f(x_n) - y_n)^2``.

    ``f`` may be a callable or the array of its values at ``X``.
    """
    fx = np.asarray(f(X) if callable(f) else f, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    return math.fsum((fx - Y) ** 2) / Y.shape[0]


@dataclass
class ExperimentConfig:
    """Parameters of an error, scaling or timing experiment.

    ``noise_var`` is the variance of the additive Gaussian noise (default
    0.02).  ``STD_READING_NOISE_VAR`` (0.02 squared) is the alternative
    reading that treats 0.02 as a standard deviation.
    """

    N: int = 3000
    s: int = 2
    Ks: tuple = (2**5, 2**6, 2**7, 2**8, 2**9, 2**10)
    repetitions: int = 100
    seed: int = 0
    noise_var: float = DEFAULT_NOISE_VAR
    methods: tuple = ("supercompress", "qmc-avg", "voronoi")
    function: str = "f1"
    b: int = 2
    nu: int | None = None
    gamma: float | None = None
    noise_after_scaling: bool = True
    lam: float | None = None

    def validate(self):
        if self.repetitions < 1:
            raise ParameterError("repetitions must be at least 1")
        if self.N < 1 or self.s < 1:
            raise ParameterError("N and s must be positive")
        if self.function not in FUNCTIONS:
            raise ParameterError(f"unknown test function {self.function!r}")
        for meth in self.methods:
            if meth not in METHODS:
                raise ParameterError(f"unknown method {meth!r}")
        if not nets.is_prime(self.b):
            raise ParameterError(f"base {self.b} is not prime")
        for K in self.Ks:
            if any(m in ("qmc-avg", "voronoi") for m in self.methods) and _log_b(K, self.b) is None:
                raise ParameterError(f"K={K} is not a power of b={self.b}")
            if K < 2 or K > self.N:
                raise ParameterError(f"K={K} outside 2..N")
        if self.noise_var < 0:
            raise ParameterError("noise variance must be non-negative")


def _log_b(K: int, b: int):
    m = 0
    v = 1
    while v < K:
        v *= b
        m += 1
    return m if v == K else None


@dataclass
class ReportRow:
    method: str
    function: str
    N: int
    s: int
    K: int
    error: float
    time: float
    repetitions: int
    gamma: float | None = None
    extra: dict = field(default_factory=dict)


TIMING_COLUMNS = ("time",)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    kind: str = "error"

    def lookup(self, method: str, K: int, function: str | None = None, gamma=None):
        for r in self.rows:
            if (
                r.method == method
                and r.K == K
                and (function is None or r.function == function)
                and (gamma is None or r.gamma == gamma)
            ):
                return r
        raise KeyError((method, K, function, gamma))

    def to_csv(self, include_timing: bool = True) -> str:
        cols = ["method", "function", "N", "s", "K", "gamma", "repetitions", "error"]
        if include_timing:
            cols.append("time")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            d = asdict(r)
            w.writerow(["" if d[c] is None else (repr(d[c]) if isinstance(d[c], float) else d[c]) for c in cols])
        return buf.getvalue()

    def to_json(self, include_timing: bool = True) -> str:
        rows = []
        for r in self.rows:
            d = asdict(r)
            if not include_timing:
                d.pop("time")
            rows.append(d)
        return json.dumps({"kind": self.kind, "rows": rows}, indent=2)

    def pretty(self) -> str:
        """Table with one row per method and one column per K."""
        value = "time" if self.kind == "timing" else "error"
        keys = sorted({(r.function, r.s, r.gamma) for r in self.rows}, key=str)
        out = []
        for fn, s, gamma in keys:
            sub = [r for r in self.rows if r.function == fn and r.s == s and r.gamma == gamma]
            Ks = sorted({r.K for r in sub})
            methods = list(dict.fromkeys(r.method for r in sub))
            title = f"{fn}, s={s}" + (f", gamma={gamma:g}" if gamma is not None else "")
            out.append(f"{title}  ({value})")
            out.append(f"{'K':>14} " + " ".join(f"{K:>11d}" for K in Ks))
            for meth in methods:
                vals = {r.K: getattr(r, value) for r in sub if r.method == meth}
                cells = " ".join(f"{vals[K]:11.4e}" if K in vals else " " * 11 for K in Ks)
                out.append(f"{meth:>14} {cells}")
            out.append("")
        return "\n".join(out)


@lru_cache(maxsize=64)
def experiment_net(b: int, m: int, s: int) -> nets.DigitalNet:
    """Net used by the QMC methods: Faure when ``s <= b``, Sobol otherwise (b = 2)."""
    if s <= b:
        return nets.faure_net(b, m, s)
    if b != 2:
        raise ParameterError(f"no net construction for s={s} > b={b} outside base 2")
    net = nets.generate_points(nets.sobol_matrices(m, s), s)
    if m * s <= 64:
        net.t = nets.min_t(net)
    return net


def _rep_streams(seed: int, rep: int):
    ss = np.random.SeedSequence([int(seed), int(rep)])
    return [np.random.default_rng(c) for c in ss.spawn(3)]


def _sample(cfg: ExperimentConfig, rep: int):
    g_x, g_noise, g_method = _rep_streams(cfg.seed, rep)
    X = generate_uniform(cfg.N, cfg.s, g_x)
    f = get_function(cfg.function)
    scale = 1.0
    if cfg.gamma is not None:
        scale = math.sqrt(cfg.gamma) / sup_norm(cfg.function, cfg.s)
    fx = f(X)
    if cfg.noise_after_scaling:
        Y = add_noise(scale * fx, cfg.noise_var, g_noise)
    else:
        Y = scale * add_noise(fx, cfg.noise_var, g_noise)

    def g(x):
        return scale * f(x)

    return X, Y, g, g_method


def _compress_error(method, X, Y, g, K, cfg, rng):
    """Build one compression and return ``(|err - app|, seconds)``."""
    full = err(g, X, Y)
    t0 = time.perf_counter()
    if method == "qmc-avg":
        m = _log_b(K, cfg.b)
        net = experiment_net(cfg.b, m, cfg.s)
        nu = weights.default_nu(m, net.t or 0) if cfg.nu is None else cfg.nu
        W = weights.compute_weights(X, Y, net, nu)
        dt = time.perf_counter() - t0
        fz = g(net.points)
        app = weights.app_avg(fz, fz * fz, W)
    else:
        if method == "supercompress":
            model = clustering.supercompress(X, Y, K, rng)
        elif method == "robust":
            model = clustering.robust_supercompress(X, Y, K, cfg.lam, rng)
        elif method == "kmeans":
            model = clustering.kmeans(X, K, rng, Y)
        else:
            m = _log_b(K, cfg.b)
            model = clustering.qmc_voronoi(X, Y, experiment_net(cfg.b, m, cfg.s))
        dt = time.perf_counter() - t0
        app = clustering.app_clst(g(model.centers), model.responses)
    return abs(full - app), dt


def run_error_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Mean ``|err - app|`` per method and K over the repetitions."""
    cfg.validate()
    report = ExperimentReport(kind="error")
    acc = {(meth, K): ([], []) for meth in cfg.methods for K in cfg.Ks}
    for rep in range(cfg.repetitions):
        X, Y, g, g_method = _sample(cfg, rep)
        seeds = g_method.integers(0, 2**63, size=(len(cfg.Ks), len(cfg.methods)))
        for ki, K in enumerate(cfg.Ks):
            for mi, meth in enumerate(cfg.methods):
                e, dt = _compress_error(meth, X, Y, g, K, cfg, np.random.default_rng(seeds[ki, mi]))
                acc[(meth, K)][0].append(e)
                acc[(meth, K)][1].append(dt)
    for K in cfg.Ks:
        for meth in cfg.methods:
            errs, times = acc[(meth, K)]
            report.rows.append(
                ReportRow(meth, cfg.function, cfg.N, cfg.s, K, math.fsum(errs) / len(errs),
                          math.fsum(times) / len(times), cfg.repetitions, cfg.gamma)
            )
    return report


def run_scale_experiment(cfg: ExperimentConfig, gammas=(100.0, 10.0, 1.0)) -> ExperimentReport:
    """Error experiment repeated for responses from ``sqrt(gamma) f / ||f||_inf``."""
    report = ExperimentReport(kind="error")
    for gamma in gammas:
        sub = ExperimentConfig(**{**asdict(cfg), "gamma": float(gamma)})
        report.rows.extend(run_error_experiment(sub).rows)
    return report


def run_timing_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Mean wall-clock construction time per method; a warm-up run is discarded."""
    report = ExperimentReport(kind="timing")
    if not cfg.methods:
        return report
    cfg.validate()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        X, Y, g, g_method = _sample(cfg, -1 % (2**31))
        for K in cfg.Ks:
            for meth in cfg.methods:
                _compress_error(meth, X, Y, g, K, cfg, np.random.default_rng(0))
    times = {(meth, K): [] for meth in cfg.methods for K in cfg.Ks}
    errs = {(meth, K): [] for meth in cfg.methods for K in cfg.Ks}
    for rep in range(cfg.repetitions):
        X, Y, g, g_method = _sample(cfg, rep)
        for K in cfg.Ks:
            for meth in cfg.methods:
                e, dt = _compress_error(meth, X, Y, g, K, cfg, np.random.default_rng(g_method.integers(2**63)))
                times[(meth, K)].append(dt)
                errs[(meth, K)].append(e)
    for K in cfg.Ks:
        for meth in cfg.methods:
            t = times[(meth, K)]
            e = errs[(meth, K)]
            report.rows.append(
                ReportRow(meth, cfg.function, cfg.N, cfg.s, K, math.fsum(e) / len(e),
                          math.fsum(t) / len(t), cfg.repetitions, cfg.gamma)
            )
    return report
