"""Benchmark harness: simulation runs, parameter sweeps and theory checks.

Seeds
-----
Replication ``r`` draws its data from ``SeedSequence(seed, spawn_key=(r, 0))``
and method ``label`` from ``SeedSequence(seed, spawn_key=(r, 1, crc32(label)))``,
so adding or reordering methods never changes the simulated data or the
other methods' randomness.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binom

from .core import Dataset, holp, ols_reduced, standardize
from .errors import ConfigError, SingularGram
from .estimator import SparConfig, back_transform, cross_validate, fit_ensemble, threshold
from .metrics import evaluate
from .projection import (
    active_ratio_moments,
    apply_projection,
    cw_projection,
    gaussian_projection,
    inverse_preimage_moments,
    sparse_projection,
    theorem1_bound,
)
from .screening import marginal_correlation_scores, top_k
from .simgen import REGIMES, SETTINGS, SimulationDesign, simulate

CSV_HEADER = ["method", "setting", "regime", "rep", "sweep_value", "rmspe", "mspe",
              "precision", "recall", "f1", "num_active", "chosen_m", "chosen_lambda",
              "runtime_s", "error"]
SWEEP_PARAMETERS = ("num_models", "screen_factor", "sample_size", "dimension", "snr")
CW_POLICIES = ("random_sign", "holp_sign", "holp", "oracle_sign", "oracle_beta")

# --------------------------------------------------------------------------
# Method specifications
# --------------------------------------------------------------------------

_METHOD_PARAMS = {
    "holp": {},
    "holp_screen": {"c": float},
    "sis_screen": {"k": int},
    "spar": {"rule": str, "M": int, "c": float, "folds": int, "fixed_m": int},
    "ensemble": {"M": int, "c": float, "screen": int},
    "cw": {"policy": str, "m": int},
    "rp": {"kind": str, "m": int, "psi": float},
}
_ALIASES = {
    "spar_best": ("spar", {"rule": "best"}),
    "spar_1se": ("spar", {"rule": "1se"}),
}


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: tuple = ()

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return self.name + ":" + ";".join(f"{k}={v}" for k, v in self.params)

    def get(self, key, default=None):
        return dict(self.params).get(key, default)

    def with_param(self, key, value) -> "MethodSpec":
        d = dict(self.params)
        d[key] = value
        return MethodSpec(self.name, tuple(sorted(d.items())))


def parse_method(spec) -> MethodSpec:
    """Parse ``"name"``, ``"name:key=val,key=val"`` or a ``{"name": ..., **params}`` dict.

    Labels written to the CSV separate parameters with ``;`` so they need
    no quoting; both separators are accepted here.
    """
    if isinstance(spec, MethodSpec):
        return spec
    if isinstance(spec, dict):
        spec = dict(spec)
        name = spec.pop("name", None)
        raw = spec
    else:
        name, _, rest = str(spec).partition(":")
        raw = {}
        for item in filter(None, rest.replace(";", ",").split(",")):
            k, eq, v = item.partition("=")
            if not eq:
                raise ConfigError(f"method parameter {item!r} is not key=value")
            raw[k.strip()] = v.strip()
    name = (name or "").strip()
    if name in _ALIASES:
        name, extra = _ALIASES[name]
        raw = {**extra, **raw}
    if name not in _METHOD_PARAMS:
        raise ConfigError(f"unknown method {name!r}")
    allowed = _METHOD_PARAMS[name]
    params = {}
    for k, v in raw.items():
        if k not in allowed:
            raise ConfigError(f"method {name!r} has no parameter {k!r}")
        try:
            params[k] = allowed[k](v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}:{k}: {v!r}") from exc
    if name == "spar" and params.get("rule", "best") not in ("best", "1se"):
        raise ConfigError("spar rule must be best or 1se")
    if name == "cw" and params.get("policy", "random_sign") not in CW_POLICIES:
        raise ConfigError(f"cw policy must be one of {CW_POLICIES}")
    if name == "rp" and params.get("kind", "gaussian") not in ("gaussian", "sparse"):
        raise ConfigError("rp kind must be gaussian or sparse")
    return MethodSpec(name, tuple(sorted(params.items())))


@dataclass
class FitOutcome:
    coef: np.ndarray
    intercept: float
    chosen_m: float = float("nan")
    chosen_lambda: float = float("nan")


def _holp_std(Xs, ys):
    try:
        return holp(Xs, ys)
    except SingularGram:
        n, p = Xs.shape
        return holp(Xs, ys, jitter=math.sqrt(n) + math.sqrt(p))


def _fit_subset(Xs, ys, idx, ridge=0.01):
    """Least squares on selected columns; min-norm when they outnumber rows."""
    Xi = Xs[:, idx]
    if idx.size >= Xs.shape[0]:
        try:
            return holp(Xi, ys)
        except SingularGram:
            return holp(Xi, ys, jitter=ridge)
    try:
        return ols_reduced(Xi, ys)
    except SingularGram:
        return ols_reduced(Xi, ys, jitter=ridge)


def _dense(p, idx, vals):
    out = np.zeros(p)
    out[idx] = vals
    return out


def fit_method(method: MethodSpec, train: Dataset, seed) -> FitOutcome:
    """Fit one benchmark method on raw training data."""
    rng = np.random.default_rng(seed)
    n, p = train.X.shape
    name = method.name

    if name == "spar":
        cfg = SparConfig(
            max_models=method.get("M", 20),
            screen_factor=method.get("c", 2.0),
            folds=method.get("folds", 10),
            rule=method.get("rule", "best"),
            select_models=not method.get("fixed_m", 0),
            seed=seed,
        )
        model = cross_validate(train, cfg)
        return FitOutcome(model.coefficients_orig, model.intercept,
                          model.chosen_M, model.chosen_lambda)

    if name == "ensemble":
        cfg = SparConfig(max_models=method.get("M", 20), screen_factor=method.get("c", 2.0),
                         screening=bool(method.get("screen", 1)), seed=seed)
        ens = fit_ensemble(train, cfg)
        coef_std = np.mean([m.beta for m in ens.models], axis=0)
        coef, icpt = back_transform(coef_std, ens.standardization)
        return FitOutcome(coef, icpt, cfg.max_models, 0.0)

    data_std, std = standardize(train)
    Xs, ys = data_std.X, data_std.y

    if name == "holp":
        coef_std = _holp_std(Xs, ys)
    elif name == "holp_screen":
        w = _holp_std(Xs, ys)
        k = min(math.ceil(method.get("c", 2.0) * n), p)
        idx = top_k(np.abs(w), k)
        coef_std = _dense(p, idx, _fit_subset(Xs, ys, idx))
    elif name == "sis_screen":
        k = method.get("k") or max(1, int(n / math.log(n)))
        idx = top_k(marginal_correlation_scores(data_std), min(k, p))
        coef_std = _dense(p, idx, _fit_subset(Xs, ys, idx))
    elif name in ("cw", "rp"):
        m = min(method.get("m", n // 2), p, n - 2)
        if name == "rp":
            if method.get("kind", "gaussian") == "gaussian":
                proj = gaussian_projection(m, p, rng)
            else:
                proj = sparse_projection(m, p, method.get("psi", 1 / 3), rng)
        else:
            policy = method.get("policy", "random_sign")
            if policy == "random_sign":
                diag = "random_sign"
            elif policy.startswith("holp"):
                diag = _holp_std(Xs, ys)
            else:
                if train.truth is None:
                    raise ValueError("oracle projections need ground truth")
                diag = train.truth.beta * std.x_scale
            if policy.endswith("sign"):
                diag = np.sign(diag) if not isinstance(diag, str) else diag
            proj = cw_projection(m, p, diag, rng)
        Z = apply_projection(proj, Xs)
        try:
            gamma = ols_reduced(Z, ys)
        except SingularGram:
            gamma = ols_reduced(Z, ys, jitter=0.01)
        M = proj.to_dense() if hasattr(proj, "to_dense") else proj.matrix
        coef_std = M.T @ gamma
    else:
        raise ConfigError(f"unknown method {name!r}")
    coef, icpt = back_transform(coef_std, std)
    return FitOutcome(coef, icpt)


# --------------------------------------------------------------------------
# Experiment configuration
# --------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    setting: str = "group"
    regime: str = "medium"
    n: int = 100
    p: int = 1000
    n_test: int = 100
    rho_snr: float = 10.0
    mu: float = 1.0
    reps: int = 30
    seed: int = 0
    methods: list = field(default_factory=lambda: ["holp", "spar_best", "spar_1se"])
    output: Optional[str] = None
    parallelism: int = 1
    a: Optional[int] = None
    rho: Optional[float] = None
    timing: bool = False

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        if self.n < 2 or self.p < 2 or self.n_test < 1:
            raise ConfigError("need n >= 2, p >= 2, n_test >= 1")
        if not self.rho_snr > 0:
            raise ConfigError("rho_snr must be positive")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        self.methods = [parse_method(m) for m in self.methods]

    def design(self) -> SimulationDesign:
        return SimulationDesign(self.setting, self.regime, self.n, self.p, self.n_test,
                                self.rho_snr, self.mu, self.a, self.rho)

    @classmethod
    def from_mapping(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            if path.suffix.lower() == ".toml":
                try:
                    import tomllib
                except ModuleNotFoundError:  # Python < 3.11
                    import tomli as tomllib
                doc = tomllib.loads(text)
            else:
                doc = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        return cls.from_mapping(doc)


def _format(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else "NA"
    return str(v)


def _error_row(base, method_label, exc):
    row = dict.fromkeys(CSV_HEADER, None)
    row.update(base)
    row["method"] = method_label
    row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def run_replication(config: ExperimentConfig, rep: int, sweep_value=None) -> list[dict]:
    """All method rows for one replication, in method order."""
    base = {"setting": config.setting, "regime": config.regime, "rep": rep,
            "sweep_value": sweep_value}
    data_seed = np.random.SeedSequence(config.seed, spawn_key=(rep, 0))
    try:
        sim = simulate(config.design(), data_seed)
    except Exception as exc:  # noqa: BLE001 - recorded in the CSV
        return [_error_row(base, m.label, exc) for m in config.methods]

    rows = []
    y_bar = float(sim.train.y.mean())
    for method in config.methods:
        seed = np.random.SeedSequence(
            config.seed, spawn_key=(rep, 1, zlib.crc32(method.label.encode())))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                t0 = time.perf_counter()
                fit = fit_method(method, sim.train, seed)
                y_hat = fit.intercept + sim.test.X @ fit.coef
                elapsed = time.perf_counter() - t0
            res = evaluate(y_hat, sim.test.y, y_bar, fit.coef, sim.beta)
        except Exception as exc:  # noqa: BLE001 - recorded in the CSV
            rows.append(_error_row(base, method.label, exc))
            continue
        row = dict(base)
        row.update(method=method.label, rmspe=res.rmspe, mspe=res.mspe,
                   precision=res.precision, recall=res.recall, f1=res.f1,
                   num_active=res.num_active, chosen_m=fit.chosen_m,
                   chosen_lambda=fit.chosen_lambda,
                   runtime_s=elapsed if config.timing else None, error="")
        rows.append(row)
    return rows


def _run_task(args):
    config, rep, sweep_value = args
    return run_replication(config, rep, sweep_value)


def collect_rows(config: ExperimentConfig, sweep_value=None, jobs: Optional[int] = None) -> list[dict]:
    jobs = jobs or config.parallelism
    tasks = [(config, r, sweep_value) for r in range(config.reps)]
    if jobs <= 1 or len(tasks) == 1:
        chunks = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_task, tasks))
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([_format(row.get(k)) for k in CSV_HEADER])
    return buf.getvalue()


def _emit(text: str, output) -> str:
    if output:
        Path(output).write_text(text)
    return text


def run_simulation(config: ExperimentConfig, output=None) -> str:
    """Run every replication and return (and optionally write) the CSV text.

    Output is byte-identical for a fixed seed regardless of ``parallelism``;
    wall-clock timings are only recorded when ``config.timing`` is set.
    """
    return _emit(rows_to_csv(collect_rows(config)), output or config.output)


def apply_sweep_value(config: ExperimentConfig, parameter: str, value) -> ExperimentConfig:
    if parameter == "sample_size":
        return replace(config, n=int(value), methods=list(config.methods))
    if parameter == "dimension":
        return replace(config, p=int(value), methods=list(config.methods))
    if parameter == "snr":
        return replace(config, rho_snr=float(value), methods=list(config.methods))
    methods = []
    for m in config.methods:
        if parameter == "num_models" and m.name in ("spar", "ensemble"):
            m = m.with_param("M", int(value))
        elif parameter == "screen_factor" and m.name in ("spar", "ensemble", "holp_screen"):
            m = m.with_param("c", float(value))
        methods.append(m)
    return replace(config, methods=methods)


def sweep(parameter: str, grid: Sequence, base_config: ExperimentConfig, output=None) -> str:
    """Run the simulation once per grid value, filling the ``sweep_value`` column."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
    if not len(grid):
        raise ConfigError("sweep grid is empty")
    rows = []
    for value in grid:
        cfg = apply_sweep_value(base_config, parameter, value)
        rows.extend(collect_rows(cfg, sweep_value=value))
    return _emit(rows_to_csv(rows), output or base_config.output)


# --------------------------------------------------------------------------
# Theory checks
# --------------------------------------------------------------------------


@dataclass
class ProjectionGapReport:
    n: int
    p: int
    m: int
    a: int
    reps: int
    mean_mspe_random_sign: float
    mean_mspe_oracle: float
    mean_difference: float
    se_difference: float
    bound: float
    passed: bool
    vacuous: bool
    comparators: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _ls_mspe(proj, train, test):
    Z = apply_projection(proj, train.X)
    try:
        gamma = ols_reduced(Z, train.y)
    except SingularGram:
        gamma = ols_reduced(Z, train.y, jitter=1e-8)
    resid = test.y - apply_projection(proj, test.X) @ gamma
    return float(np.mean(resid ** 2))


def check_theorem1(n: int = 50, p: int = 500, m: int = 20, a: int = 25, reps: int = 200,
                   seed: int = 0, rho: float = 0.5, rho_snr: float = 10.0,
                   n_test: int = 100, comparators: bool = True) -> ProjectionGapReport:
    """Monte Carlo check of the random-sign vs oracle CW prediction gap.

    Compound-symmetry data without intercept; both projections share the
    same goal-dimension map and are used for least squares without
    intercept. Passes when the mean MSPE gap is at least the closed-form
    bound minus two Monte Carlo standard errors.
    """
    if not m < n - 1:
        raise ConfigError("need m < n - 1")
    if not 1 <= a <= p:
        raise ConfigError("need 1 <= a <= p")
    design = SimulationDesign("compound", "example_one", n, p, n_test, rho_snr, 0.0, a, rho)
    ss = np.random.SeedSequence(seed)
    rs, pt, bounds = [], [], []
    extra = {"gaussian": [], "sparse_1/3": [], "cw_holp": []}
    lam_min = 1 - rho
    for child in ss.spawn(reps):
        data_ss, proj_ss = child.spawn(2)
        sim = simulate(design, data_ss)
        rng = np.random.default_rng(proj_ss)
        beta = sim.beta
        h = rng.integers(0, m, size=p)
        phi_rs = cw_projection(m, p, "random_sign", rng, h=h)
        phi_pt = cw_projection(m, p, beta, rng, h=h)
        rs.append(_ls_mspe(phi_rs, sim.train, sim.test))
        pt.append(_ls_mspe(phi_pt, sim.train, sim.test))
        nz = np.abs(beta[beta != 0])
        bounds.append(theorem1_bound(beta, lam_min, phi_rs.m, p, nz.size, float(nz.min())))
        if comparators:
            extra["gaussian"].append(_ls_mspe(gaussian_projection(m, p, rng), sim.train, sim.test))
            extra["sparse_1/3"].append(
                _ls_mspe(sparse_projection(m, p, 1 / 3, rng), sim.train, sim.test))
            w = holp(sim.train.X, sim.train.y, jitter=0.0)
            extra["cw_holp"].append(_ls_mspe(cw_projection(m, p, w, rng, h=h), sim.train, sim.test))
    rs, pt = np.array(rs), np.array(pt)
    diff = rs - pt
    mean_diff = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(reps)) if reps > 1 else float("inf")
    bound = float(np.mean(bounds))
    vacuous = bound <= 0
    if vacuous:
        warnings.warn("projection-gap bound is non-positive for these parameters; check is vacuous")
    passed = vacuous or mean_diff >= bound - 2 * se
    return ProjectionGapReport(n, p, m, a, reps, float(rs.mean()), float(pt.mean()), mean_diff, se,
                          bound, bool(passed), bool(vacuous),
                          {k: float(np.mean(v)) for k, v in extra.items() if v})


def exact_inverse_moments(p: int, m: int) -> tuple[float, float]:
    """E[1/N] and E[1/N^2] for N = 1 + Binom(p-1, 1/m), by summing the pmf."""
    k = np.arange(p)
    pmf = binom.pmf(k, p - 1, 1 / m)
    return float(np.sum(pmf / (1 + k))), float(np.sum(pmf / (1 + k) ** 2))


def exact_active_ratio(p: int, m: int, a: int, j_active: bool) -> tuple[float, float]:
    """E[X1/(1+X1+X2)] and E[X1/(1+X1+X2)^2] over independent binomial counts."""
    aj = a - int(bool(j_active))
    x1 = np.arange(aj + 1)
    x2 = np.arange(p - aj)
    w = np.outer(binom.pmf(x1, aj, 1 / m), binom.pmf(x2, p - 1 - aj, 1 / m))
    tot = 1 + x1[:, None] + x2[None, :]
    return float(np.sum(w * x1[:, None] / tot)), float(np.sum(w * x1[:, None] / tot ** 2))


@dataclass
class MomentCheckReport:
    rows: list
    max_error_exact: float
    slopes: dict
    passed: bool

    def to_dict(self):
        return asdict(self)


def check_lemma_moments(p_max: int = 12, m_max: Optional[int] = None,
                        decay_ps: Sequence[int] = (100, 200, 400, 800), decay_m: int = 5,
                        decay_a: int = 3, tol: float = 1e-12) -> MomentCheckReport:
    """Compare the closed-form moments with exact enumeration.

    Exact identities (first inverse moment, first active-ratio moment) are
    tabulated for every ``p <= p_max``, ``m <= min(p, m_max)``, ``a < p``.
    The approximate second moments are checked by the log-log slope of
    their absolute error over ``decay_ps`` at fixed ``m``.
    """
    if p_max > 14:
        raise ConfigError("exact enumeration table is limited to p_max <= 14")
    rows = []
    max_err = 0.0
    for p in range(2, p_max + 1):
        for m in range(1, min(p, m_max or p) + 1):
            closed, _ = inverse_preimage_moments(p, m)
            exact, _ = exact_inverse_moments(p, m)
            err = abs(closed - exact)
            max_err = max(max_err, err)
            rows.append({"quantity": "inverse_first", "p": p, "m": m, "a": None,
                         "j_active": None, "closed": closed, "exact": exact, "abs_error": err})
            for a in range(1, p):
                for j_active in (True, False):
                    closed, _ = active_ratio_moments(p, m, a, j_active)
                    exact, _ = exact_active_ratio(p, m, a, j_active)
                    err = abs(closed - exact)
                    max_err = max(max_err, err)
                    rows.append({"quantity": "active_ratio_first", "p": p, "m": m, "a": a,
                                 "j_active": j_active, "closed": closed, "exact": exact,
                                 "abs_error": err})

    errs = {"inverse_second": [], "active_ratio_second": []}
    for p in decay_ps:
        errs["inverse_second"].append(
            abs(inverse_preimage_moments(p, decay_m)[1] - exact_inverse_moments(p, decay_m)[1]))
        errs["active_ratio_second"].append(
            abs(active_ratio_moments(p, decay_m, decay_a, False)[1]
                - exact_active_ratio(p, decay_m, decay_a, False)[1]))
    logp = np.log(np.asarray(decay_ps, dtype=float))
    slopes = {k: float(np.polyfit(logp, np.log(v), 1)[0]) for k, v in errs.items()}
    passed = max_err <= tol and all(s <= -3 for s in slopes.values())
    return MomentCheckReport(rows, max_err, slopes, bool(passed))
