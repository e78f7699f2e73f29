"""Monte Carlo studies that confront the random-matrix bounds with simulation.

Each experiment is split into independent *units* (usually one per matrix
size). A unit is a pure function of ``(config, unit key)`` returning a JSON
document; :func:`assemble` turns the unit documents into an
:class:`ExperimentReport`. The CLI persists unit documents, which is what makes
interrupted runs resumable with identical output.
"""
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
import time

import numpy as np
from scipy import stats as sst
from scipy.special import erf

from . import arithmetic, ensembles, rng, smallball, spectral
from .stats import ConcentrationEstimate, Z95, log_grid, loglog_slope, wilson

SCHEMA_VERSION = 1
TWO_OVER_PI = 2 / math.pi


# --------------------------------------------------------------------------
# configs and reports


@dataclass
class ExperimentConfig:
    experiment: str
    ensemble: dict = field(default_factory=lambda: {"kind": "rademacher"})
    n_list: list = field(default_factory=lambda: [100])
    grid: list = None
    trials: int = 1000
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        self.n_list = [int(n) for n in self.n_list]
        if not self.n_list or min(self.n_list) < 1:
            raise ValueError("n_list must hold positive sizes")
        if self.trials < 100:
            raise ValueError("trials must be at least 100")
        if self.grid is not None:
            self.grid = [float(x) for x in self.grid]
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ValueError("grid must be strictly ascending")
        self.seed = int(self.seed)
        self.ensemble = ensembles.Distribution.from_dict(self.ensemble).to_dict()
        merged = dict(EXPERIMENTS[self.experiment].defaults)
        merged.update(self.params or {})
        self.params = merged
        for key in ("mu", "nu", "q"):
            if key in self.params and not 0 <= self.params[key] <= 1:
                raise ValueError(f"{key} must be a probability")

    @property
    def dist(self):
        return ensembles.Distribution.from_dict(self.ensemble)

    def grid_or(self, default):
        return np.asarray(self.grid if self.grid is not None else default, float)

    def to_dict(self):
        return _clean(asdict(self))

    @classmethod
    def from_dict(cls, d):
        known = {"experiment", "ensemble", "n_list", "grid", "trials", "seed", "params"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def canonical(self):
        return dumps(self.to_dict())

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def unit_seed(self, key):
        return rng.mix(self.seed, self.experiment, key)


@dataclass
class Figure:
    """Plot-ready table: the first column is x, then y, CI bounds and a reference."""

    name: str
    columns: list
    rows: list


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list
    fitted: dict
    exclusions: dict
    violations: list
    figures: list
    schema_version: int = SCHEMA_VERSION
    runtime_s: float = 0.0

    def to_dict(self):
        d = asdict(self)
        d.pop("runtime_s")  # wall-clock lives in the run manifest
        return _clean(d)

    def to_json(self):
        return dumps(self.to_dict())

    @property
    def ok(self):
        return not self.violations


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"


def as_float(x):
    if isinstance(x, str):
        return float(x)
    return x


@dataclass(frozen=True)
class ExperimentDef:
    units: object
    run_unit: object
    assemble: object
    defaults: dict


EXPERIMENTS = {}


def register(name, defaults):
    def wrap(cls):
        EXPERIMENTS[name] = ExperimentDef(cls.units, cls.run_unit, cls.assemble, defaults)
        return cls
    return wrap


def run_units(cfg, keys=None, threads=1):
    """Compute unit documents (JSON round-tripped) for the given keys."""
    spec = EXPERIMENTS[cfg.experiment]
    keys = spec.units(cfg) if keys is None else keys
    return {k: json.loads(dumps(spec.run_unit(cfg, k, threads))) for k in keys}


def assemble(cfg, results):
    spec = EXPERIMENTS[cfg.experiment]
    return spec.assemble(cfg, results)


def run(cfg, threads=1):
    t0 = time.perf_counter()
    report = assemble(cfg, run_units(cfg, threads=threads))
    report.runtime_s = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------------
# shared machinery


def _by_n(cfg):
    return [f"n{n}" for n in cfg.n_list]


def _n_of(key):
    return int(key.split("_")[0][1:])


def sym_eigs(dist, n, seed, trials, threads=1):
    """Descending eigenvalues of ``trials`` symmetric samples, shape ``(trials, n)``."""
    def chunk(idx):
        return spectral.eigvals_desc(ensembles.sample_sym_batch(dist, n, seed, idx))
    return rng.map_trials(chunk, trials, threads)


def _est(count, trials):
    return ConcentrationEstimate.from_count(int(count), int(trials))


def _est_row(est):
    return {"p_hat": est.p_hat, "ci_low": est.ci_low, "ci_high": est.ci_high,
            "count": est.count, "trials": est.trials}


def _fit(xs, ests, min_events, max_p):
    keep = [(x, e.p_hat) for x, e in zip(xs, ests) if e.count >= min_events and e.p_hat <= max_p]
    fit = loglog_slope([k[0] for k in keep], [k[1] for k in keep]) if keep else None
    if fit is None:
        return {"slope": "nan", "slope_stderr": "nan", "fit_points": len(keep)}
    return {"slope": fit.slope, "slope_stderr": fit.stderr, "fit_points": fit.points}


def _counts_leq(sorted_samples, thresholds):
    return np.searchsorted(sorted_samples, thresholds, side="right")


def unit_vector(name, n, seed):
    """Named test directions: ``e1``, ``constant``, ``two_level``, ``random``."""
    if isinstance(name, (list, tuple)):
        v = np.asarray(name, float)
        return v / np.linalg.norm(v)
    if name == "e1":
        v = np.zeros(n)
        v[0] = 1.0
        return v
    if name == "constant":
        return np.full(n, 1 / math.sqrt(n))
    if name == "two_level":
        v = np.where(np.arange(n) < n // 2, 1.0, 2.0)
        return v / np.linalg.norm(v)
    if name == "random":
        g = ensembles.Distribution.gaussian()
        v = g.quantile(rng.uniforms(seed, rng.TAG_MISC, 1, n))
        return v / np.linalg.norm(v)
    raise ValueError(f"unknown vector family {name!r}")


def orthonormal_rows(n, k, seed, avoid=None):
    """``k`` orthonormal rows in ``R^n`` (orthogonal to ``avoid`` if given)."""
    g = ensembles.Distribution.gaussian()
    cols = k + (1 if avoid is not None else 0)
    m = g.quantile(rng.uniforms(seed, rng.TAG_MISC, 2, n * max(cols, 1))).reshape(n, max(cols, 1))
    if avoid is not None:
        m[:, 0] = avoid
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))  # fixed sign convention
    start = 1 if avoid is not None else 0
    return q[:, start:start + k].T


# --------------------------------------------------------------------------
# tail curve


@register("tail", {"matrix": "symmetric", "min_events": 10, "fit_max_p": 0.1, "ci_sigmas": 3.0})
class TailCurve:
    """``P(sigma_min(A) <= eps / sqrt(n))`` across an eps grid."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        dist, seed = cfg.dist, cfg.unit_seed(key)
        if cfg.params["matrix"] == "iid":
            def chunk(idx):
                return np.linalg.svd(ensembles.sample_iid_batch(dist, n, seed, idx),
                                     compute_uv=False)[:, -1]
        else:
            def chunk(idx):
                return np.min(np.abs(np.linalg.eigvalsh(
                    ensembles.sample_sym_batch(dist, n, seed, idx))), axis=1)
        s = np.sort(rng.map_trials(chunk, cfg.trials, threads))
        eps = cfg.grid_or(log_grid(1e-3, 1e-1))
        return {"n": n, "trials": cfg.trials,
                "counts": _counts_leq(s, eps / math.sqrt(n)).tolist(),
                "singular": int(np.count_nonzero(s < spectral.singular_cutoff(n))),
                "sigma_min_median_scaled": float(np.median(s) * math.sqrt(n))}

    @staticmethod
    def assemble(cfg, results):
        eps = cfg.grid_or(log_grid(1e-3, 1e-1))
        p = cfg.params
        rows, fitted, excl, viol, figs = [], {}, {}, [], []
        gaussian = cfg.ensemble["kind"] == "gaussian"
        for key in _by_n(cfg):
            r = results[key]
            ests = [_est(c, r["trials"]) for c in r["counts"]]
            fig_rows = []
            for e, est in zip(eps, ests):
                rows.append({"n": r["n"], "epsilon": e, **_est_row(est),
                             "edelman_ref": e, "p_over_eps": est.p_hat / e})
                fig_rows.append([e, est.p_hat, est.ci_low, est.ci_high, e])
                if gaussian and est.p_hat > e + p["ci_sigmas"] * est.half_width:
                    viol.append(f"n={r['n']} eps={e:.3g}: p_hat {est.p_hat:.3g} exceeds "
                                f"eps + {p['ci_sigmas']}*CI")
            f = _fit(eps, ests, p["min_events"], p["fit_max_p"])
            f["C_hat"] = max(est.p_hat / e for e, est in zip(eps, ests))
            f["sigma_min_median_scaled"] = r["sigma_min_median_scaled"]
            fitted[key] = f
            excl[key] = {"singular": r["singular"]}
            for a, b in zip(ests, ests[1:]):
                if a.p_hat > b.p_hat:
                    viol.append(f"n={r['n']}: tail estimate decreased in eps")
            figs.append(Figure(f"tail_n{r['n']}",
                               ["epsilon", "p_hat", "ci_low", "ci_high", "edelman_ref"], fig_rows))
        return ExperimentReport("tail", cfg.to_dict(), rows, fitted, excl, viol, figs)


def tail_curve(cfg, threads=1):
    return run(_with(cfg, "tail"), threads)


def _with(cfg, name):
    if cfg.experiment != name:
        raise ValueError(f"config is for {cfg.experiment!r}, expected {name!r}")
    return cfg


# --------------------------------------------------------------------------
# eigenvalue gaps


@register("gaps", {"k": "center", "ells": [1, 2], "min_events": 10, "fit_max_p": 0.1,
                   "gap_tol": 1e-10})
class Repulsion:
    """Gap probabilities ``P(lambda_k - lambda_{k+l} <= eps / sqrt(n))`` and simple spectrum."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def _k(cfg, n):
        k = cfg.params["k"]
        return n // 2 if k == "center" else int(k)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        lam = sym_eigs(cfg.dist, n, cfg.unit_seed(key), cfg.trials, threads)
        k = Repulsion._k(cfg, n)
        eps = cfg.grid_or(log_grid(0.05, 5.0))
        out = {"n": n, "k": k, "trials": cfg.trials, "counts": {}}
        for ell in cfg.params["ells"]:
            if not 1 <= k <= n - ell:
                raise ValueError(f"gap index out of range: k={k}, ell={ell}, n={n}")
            g = np.sort(lam[:, k - 1] - lam[:, k - 1 + ell])
            out["counts"][str(ell)] = _counts_leq(g, eps / math.sqrt(n)).tolist()
        mingap = np.min(-np.diff(lam, axis=1), axis=1) if n > 1 else np.full(len(lam), np.inf)
        out["repeated"] = int(np.count_nonzero(mingap < cfg.params["gap_tol"]))
        out["min_gap_scaled"] = float(np.min(mingap) * math.sqrt(n))
        return out

    @staticmethod
    def assemble(cfg, results):
        eps = cfg.grid_or(log_grid(0.05, 5.0))
        p = cfg.params
        rows, fitted, excl, viol, figs = [], {}, {}, [], []
        for key in _by_n(cfg):
            r = results[key]
            prev = None
            for ell in p["ells"]:
                counts = r["counts"][str(ell)]
                ests = [_est(c, r["trials"]) for c in counts]
                fig_rows = []
                for e, est in zip(eps, ests):
                    rows.append({"n": r["n"], "k": r["k"], "ell": ell, "epsilon": e, **_est_row(est)})
                    fig_rows.append([e, est.p_hat, est.ci_low, est.ci_high, e ** ell])
                f = _fit(eps, ests, p["min_events"], p["fit_max_p"])
                f["C_hat"] = max(est.p_hat ** (1 / ell) / e for e, est in zip(eps, ests))
                fitted[f"{key}_ell{ell}"] = f
                if prev is not None and any(b > a for a, b in zip(prev, counts)):
                    viol.append(f"n={r['n']}: gap probability increased with ell={ell}")
                prev = counts
                figs.append(Figure(f"gaps_n{r['n']}_ell{ell}",
                                   ["epsilon", "p_hat", "ci_low", "ci_high", "eps_pow_ell"], fig_rows))
            fitted[f"{key}_simple_spectrum"] = {"repeated": r["repeated"],
                                                "min_gap_scaled": r["min_gap_scaled"]}
            excl[key] = {"repeated_eigenvalues": r["repeated"]}
        return ExperimentReport("gaps", cfg.to_dict(), rows, fitted, excl, viol, figs)


def repulsion(cfg, threads=1):
    return run(_with(cfg, "gaps"), threads)


# --------------------------------------------------------------------------
# local law


def semicircle_count_ratio(n, t):
    """Semicircle prediction of ``N(-t, t) / (sqrt(n) t)`` for unit-variance entries."""
    x = min(t / math.sqrt(n), 2.0)
    integral = x * math.sqrt(4 - x * x) + 4 * math.asin(x / 2)  # int_{-x}^{x} sqrt(4-y^2) dy
    return n / (2 * math.pi) * integral / (math.sqrt(n) * t)


@register("locallaw", {})
class LocalLaw:
    """Normalised eigenvalue counts ``N(-t, t) / (sqrt(n) t)`` against ``2/pi``."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        ts = cfg.grid_or([0.5, 1.0, 2.0])
        if np.any(ts > math.sqrt(n)):
            raise ValueError("t must not exceed sqrt(n)")
        lam = sym_eigs(cfg.dist, n, cfg.unit_seed(key), cfg.trials, threads)
        out = {"n": n, "trials": cfg.trials, "t": []}
        for t in ts:
            ratio = np.count_nonzero((lam > -t) & (lam < t), axis=1) / (math.sqrt(n) * t)
            out["t"].append({
                "mean": float(ratio.mean()), "std": float(ratio.std(ddof=1)),
                "min": float(ratio.min()), "max": float(ratio.max()),
                "far": int(np.count_nonzero(np.abs(ratio - TWO_OVER_PI) > math.pi))})
        return out

    @staticmethod
    def assemble(cfg, results):
        ts = cfg.grid_or([0.5, 1.0, 2.0])
        rows, fitted, figs = [], {}, []
        for key in _by_n(cfg):
            r = results[key]
            fig_rows = []
            worst = 0.0
            for t, d in zip(ts, r["t"]):
                se = d["std"] / math.sqrt(r["trials"])
                rel = d["mean"] / TWO_OVER_PI - 1
                worst = max(worst, abs(rel))
                rows.append({"n": r["n"], "t": t, "mean_ratio": d["mean"], "std": d["std"],
                             "stderr": se, "rel_dev_from_2_over_pi": rel,
                             "semicircle_ratio": semicircle_count_ratio(r["n"], t),
                             "tail_freq_dev_gt_pi": d["far"] / r["trials"],
                             "min": d["min"], "max": d["max"]})
                fig_rows.append([t, d["mean"], d["mean"] - Z95 * se, d["mean"] + Z95 * se, TWO_OVER_PI])
            fitted[key] = {"max_rel_dev": worst}
            figs.append(Figure(f"locallaw_n{r['n']}",
                               ["t", "mean_ratio", "ci_low", "ci_high", "reference_2_over_pi"], fig_rows))
        return ExperimentReport("locallaw", cfg.to_dict(), rows, fitted, {}, [], figs)


def local_law(cfg, threads=1):
    return run(_with(cfg, "locallaw"), threads)


# --------------------------------------------------------------------------
# spectral moments


@register("moments", {"k_list": [5], "p": 1, "s_grid": [1, 2, 4, 8]})
class SpectralMoments:
    """Moments of ``sqrt(n) sigma_(k) / k`` and of the distortion ``||A^-1||_* / mu_1``."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        p = cfg.params["p"]
        if p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        lam = sym_eigs(cfg.dist, n, cfg.unit_seed(key), cfg.trials, threads)
        sig = np.sort(np.abs(lam), axis=1)  # ascending: sig[:, k-1] = sigma_{n-k+1}
        ok = sig[:, 0] >= spectral.singular_cutoff(n)
        sig = sig[ok]
        out = {"n": n, "trials": cfg.trials, "singular": int((~ok).sum()), "k": {}}
        for k in cfg.params["k_list"]:
            if not 1 <= k <= n / 4:
                raise ValueError("k must satisfy 1 <= k <= n/4")
            x = math.sqrt(n) * sig[:, k - 1] / k
            out["k"][str(k)] = {
                "mean_pow": float(np.mean(x ** p)), "std_pow": float(np.std(x ** p, ddof=1)),
                "tail": [int(np.count_nonzero(x >= s)) for s in cfg.params["s_grid"]]}
        d = spectral.distortion_ratio(sig)
        out["distortion_mean_pow"] = float(np.mean(d ** p))
        out["distortion_std_pow"] = float(np.std(d ** p, ddof=1))
        out["distortion_max"] = float(np.max(d))
        out["used"] = int(ok.sum())
        return out

    @staticmethod
    def assemble(cfg, results):
        rows, fitted, excl, figs = [], {}, {}, []
        s_grid = cfg.params["s_grid"]
        ns = cfg.n_list
        for k in cfg.params["k_list"]:
            means, fig_rows = [], []
            for key in _by_n(cfg):
                r = results[key]
                d = r["k"][str(k)]
                se = d["std_pow"] / math.sqrt(r["used"])
                means.append(d["mean_pow"])
                rows.append({"n": r["n"], "k": k, "quantity": "sqrt(n)/(mu_k k)",
                             "mean_pow": d["mean_pow"], "stderr": se,
                             "tail": dict(zip(map(str, s_grid), (c / r["used"] for c in d["tail"])))})
                fig_rows.append([r["n"], d["mean_pow"], d["mean_pow"] - Z95 * se,
                                 d["mean_pow"] + Z95 * se, "nan"])
            ratios = [b / a for a, b in zip(means, means[1:])]
            fitted[f"k{k}"] = {"consecutive_ratios": ratios,
                               "max_consecutive_ratio": max(ratios) if ratios else "nan"}
            figs.append(Figure(f"moments_k{k}", ["n", "mean_pow", "ci_low", "ci_high", "reference"],
                               fig_rows))
        dist_rows = []
        for key in _by_n(cfg):
            r = results[key]
            se = r["distortion_std_pow"] / math.sqrt(r["used"])
            rows.append({"n": r["n"], "quantity": "||A^-1||_*/mu_1",
                         "mean_pow": r["distortion_mean_pow"], "stderr": se,
                         "max": r["distortion_max"]})
            dist_rows.append([r["n"], r["distortion_mean_pow"], r["distortion_mean_pow"] - Z95 * se,
                              r["distortion_mean_pow"] + Z95 * se, "nan"])
            excl[key] = {"singular": r["singular"]}
        fitted["distortion_max_mean"] = max(r[1] for r in dist_rows)
        figs.append(Figure("moments_distortion", ["n", "mean_pow", "ci_low", "ci_high", "reference"],
                           dist_rows))
        del ns
        return ExperimentReport("moments", cfg.to_dict(), rows, fitted, excl, [], figs)


def spectral_moments(cfg, threads=1):
    return run(_with(cfg, "moments"), threads)


# --------------------------------------------------------------------------
# Hanson-Wright


def hw_matrix(kind, m, n, seed):
    if kind == "identity":
        if m != n:
            raise ValueError("identity needs m == n")
        return np.eye(n)
    if kind == "rank1":
        w = unit_vector("random", n, seed)
        return w[None, :]
    if kind == "gaussian":
        g = ensembles.Distribution.gaussian()
        return g.quantile(rng.uniforms(seed, rng.TAG_MISC, 3, m * n)).reshape(m, n) / math.sqrt(n)
    raise ValueError(f"unknown matrix kind {kind!r}")


def hw_oracle(kind, n, t):
    """Exact tail for gaussian ``X`` when ``M`` is the identity or a unit row."""
    if kind == "identity":
        r = math.sqrt(n)
        lo = sst.chi2.cdf(max(r - t, 0.0) ** 2, n) if t < r else 0.0
        return float(sst.chi2.sf((r + t) ** 2, n) + lo)
    if kind == "rank1":
        # | |g| - 1 | > t
        hi = 2 * sst.norm.sf(1 + t)
        lo = (2 * sst.norm.cdf(1 - t) - 1) if t < 1 else 0.0
        return float(hi + lo)
    return None


@register("hw", {"matrix": "identity", "m": None})
class HansonWright:
    """Tails of ``| ||MX|| - ||M||_HS |`` and the best constant in the exponential bound."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        kind = cfg.params["matrix"]
        m = cfg.params["m"] or n
        seed = cfg.unit_seed(key)
        M = hw_matrix(kind, m, n, seed)
        hs = float(np.linalg.norm(M))
        op = float(np.linalg.norm(M, 2))
        dist = cfg.dist

        def chunk(idx):
            x = ensembles.sample_col_batch(dist, n, seed, idx)
            return np.abs(np.linalg.norm(x @ M.T, axis=1) - hs)

        dev = np.sort(rng.map_trials(chunk, cfg.trials, threads))
        ts = cfg.grid_or([0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
        exceed = len(dev) - np.searchsorted(dev, ts, side="right")
        return {"n": n, "m": m, "trials": cfg.trials, "hs": hs, "op": op,
                "exceed": exceed.tolist(), "max_dev": float(dev[-1])}

    @staticmethod
    def assemble(cfg, results):
        ts = cfg.grid_or([0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
        B = cfg.dist.subgaussian_proxy_B
        kind = cfg.params["matrix"]
        gaussian = cfg.ensemble["kind"] == "gaussian"
        rows, fitted, figs = [], {}, []
        for key in _by_n(cfg):
            r = results[key]
            scale = B ** 4 * r["op"] ** 2
            ests = [_est(c, r["trials"]) for c in r["exceed"]]
            c_hat = math.inf
            for t, est in zip(ts, ests):
                if t > 0 and est.ci_low > 0:
                    c_hat = min(c_hat, -math.log(est.ci_low / 2) * scale / (t * t))
            fig_rows = []
            for t, est in zip(ts, ests):
                bound = 2 * math.exp(-c_hat * t * t / scale) if math.isfinite(c_hat) else 0.0
                row = {"n": r["n"], "t": t, **_est_row(est), "bound_at_c_hat": min(bound, 2.0)}
                if gaussian:
                    oracle = hw_oracle(kind, r["n"], t)
                    if oracle is not None:
                        row["gaussian_oracle"] = oracle
                rows.append(row)
                fig_rows.append([t, est.p_hat, est.ci_low, est.ci_high, min(bound, 2.0)])
            fitted[key] = {"c_hat": c_hat, "B": B, "op_norm": r["op"], "hs_norm": r["hs"],
                           "max_dev": r["max_dev"]}
            figs.append(Figure(f"hw_n{r['n']}", ["t", "p_hat", "ci_low", "ci_high", "bound_at_c_hat"],
                               fig_rows))
        return ExperimentReport("hw", cfg.to_dict(), rows, fitted, {}, [], figs)


def hanson_wright(cfg, threads=1):
    return run(_with(cfg, "hw"), threads)


# --------------------------------------------------------------------------
# negative correlation


def ratio_ci(nj, ns, nd, N, z=3.0):
    """Delta-method interval for ``p_joint / (p_small p_dev)``.

    The joint event lies inside both marginal events, which fixes the
    covariances of the three proportions.
    """
    if min(nj, ns, nd) == 0:
        return "nan", "nan", "nan"
    pj, ps, pd = nj / N, ns / N, nd / N
    r = pj / (ps * pd)
    var = ((1 - pj) / pj + (1 - ps) / ps + (1 - pd) / pd
           - 2 * (1 - ps) / ps - 2 * (1 - pd) / pd + 2 * (pj - ps * pd) / (ps * pd)) / N
    sd = math.sqrt(max(var, 0.0))
    return r, r * math.exp(-z * sd), r * math.exp(z * sd)


@register("negcorr", {"v": "random", "u": "random_orthogonal", "t_grid": [0.0, 0.5, 1.0, 1.5, 2.0],
                      "alpha": 0.05, "gamma": 0.1, "lcd_cap": 1e3, "C_lcd": 1.0,
                      "min_events": 20, "ci_z": 3.0})
class NegCorr:
    """Joint small-ball/large-deviation probability against the product of marginals."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def vectors(cfg, n, seed):
        v = unit_vector(cfg.params["v"], n, seed)
        u = cfg.params["u"]
        if u == "random_orthogonal":
            u = orthonormal_rows(n, 1, seed, avoid=v)[0]
        else:
            u = unit_vector(u, n, seed + 1)
        return v, u

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        seed = cfg.unit_seed(key)
        v, u = NegCorr.vectors(cfg, n, seed)
        eps = cfg.grid_or([0.02, 0.05, 0.1, 0.2])
        ts = np.asarray(cfg.params["t_grid"], float)
        dist = cfg.dist

        def chunk(idx):
            x = ensembles.sample_col_batch(dist, n, seed, idx)
            a, b = np.abs(x @ v), x @ u
            small = a[None, :] <= eps[:, None]
            dev = b[None, :] > ts[:, None]
            joint = small.astype(np.int64) @ dev.T.astype(np.int64)
            out = np.zeros((1, len(eps) + len(ts) + len(eps) * len(ts)), dtype=np.int64)
            out[0, :len(eps)] = small.sum(1)
            out[0, len(eps):len(eps) + len(ts)] = dev.sum(1)
            out[0, len(eps) + len(ts):] = joint.ravel()
            return out

        tot = rng.map_trials(chunk, cfg.trials, threads).sum(axis=0)
        lp = cfg.params
        res = arithmetic.lcd(v, arithmetic.LcdParams(lp["alpha"], lp["gamma"], cap=lp["lcd_cap"]))
        return {"n": n, "trials": cfg.trials, "uv": float(u @ v),
                "small": tot[:len(eps)].tolist(), "dev": tot[len(eps):len(eps) + len(ts)].tolist(),
                "joint": tot[len(eps) + len(ts):].reshape(len(eps), len(ts)).tolist(),
                "lcd_v": res.value, "lcd_bounded": res.bounded}

    @staticmethod
    def assemble(cfg, results):
        eps = cfg.grid_or([0.02, 0.05, 0.1, 0.2])
        ts = cfg.params["t_grid"]
        p = cfg.params
        rows, fitted, figs = [], {}, []
        for key in _by_n(cfg):
            r = results[key]
            N = r["trials"]
            lcd_v = as_float(r["lcd_v"])
            max_ratio, fig_rows = 0.0, []
            for i, e in enumerate(eps):
                for j, t in enumerate(ts):
                    nj, ns, nd = r["joint"][i][j], r["small"][i], r["dev"][j]
                    ratio, lo, hi = ratio_ci(nj, ns, nd, N, p["ci_z"])
                    enough = nj >= p["min_events"]
                    if enough:
                        max_ratio = max(max_ratio, ratio)
                    rows.append({"n": r["n"], "epsilon": e, "t": t, "p_joint": nj / N,
                                 "p_small": ns / N, "p_dev": nd / N, "ratio": ratio,
                                 "ratio_ci_low": lo, "ratio_ci_high": hi, "joint_count": nj,
                                 "in_fit": enough, "lcd_condition": lcd_v > p["C_lcd"] / e})
                    fig_rows.append([e, t, ratio, lo, hi, 1.0])
            fitted[key] = {"C_hat_ratio": max_ratio, "lcd_v": lcd_v,
                           "lcd_bounded": r["lcd_bounded"], "u_dot_v": r["uv"]}
            figs.append(Figure(f"negcorr_n{r['n']}",
                               ["epsilon", "t", "ratio", "ci_low", "ci_high", "independence_ref"],
                               fig_rows))
        return ExperimentReport("negcorr", cfg.to_dict(), rows, fitted, {}, [], figs)


def neg_corr(cfg, threads=1):
    return run(_with(cfg, "negcorr"), threads)


# --------------------------------------------------------------------------
# conditioned inverse Littlewood-Offord


@register("invlwo", {"k_list": [0, 2, 4, 8, 16], "q": 0.25, "c2": 0.35, "v": "random",
                     "alpha": 0.05, "gamma": 0.1, "lcd_cap": 1e3, "min_events": 10})
class CondInvLwO:
    """``P(|<X, v>| <= eps and ||W X|| <= c2 sqrt(k))`` for a lazy ``{-1, 0, 1}`` vector."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def law(q):
        return ensembles.DiscreteLaw.from_pairs([(-1.0, q / 2), (0.0, 1 - q), (1.0, q / 2)])

    @staticmethod
    def run_unit(cfg, key, threads):
        d = _n_of(key)
        p = cfg.params
        if p["q"] > 0.25:
            raise ValueError("the lazy vector needs P(X_j = 0) >= 3/4")
        seed = cfg.unit_seed(key)
        v = unit_vector(p["v"], d, seed)
        ks = [int(k) for k in p["k_list"]]
        W = orthonormal_rows(d, max(ks), seed, avoid=None) if max(ks) > 0 else np.zeros((0, d))
        eps = cfg.grid_or([0.05, 0.1, 0.2])
        law = CondInvLwO.law(p["q"])
        c2 = p["c2"]

        def chunk(idx):
            x = ensembles.sample_col_batch(law, d, seed, idx)
            small = np.abs(x @ v)[None, :] <= eps[:, None]
            proj = x @ W.T
            cum = np.cumsum(proj ** 2, axis=1)
            lows = np.stack([np.ones(len(x), bool) if k == 0 else cum[:, k - 1] <= c2 * c2 * k
                             for k in ks])
            return (small.astype(np.int64) @ lows.T.astype(np.int64))[None]

        joint = rng.map_trials(chunk, cfg.trials, threads).sum(axis=0)
        res = arithmetic.lcd(v, arithmetic.LcdParams(p["alpha"], p["gamma"], cap=p["lcd_cap"]))
        return {"d": d, "trials": cfg.trials, "joint": joint.tolist(),
                "lcd_v": res.value, "lcd_bounded": res.bounded}

    @staticmethod
    def assemble(cfg, results):
        eps = cfg.grid_or([0.05, 0.1, 0.2])
        ks = [int(k) for k in cfg.params["k_list"]]
        rows, fitted, figs = [], {}, []
        for key in _by_n(cfg):
            r = results[key]
            N = r["trials"]
            lcd_v = as_float(r["lcd_v"])
            fit = {"lcd_v": lcd_v, "lcd_condition": {str(e): lcd_v > 16 / e for e in eps}}
            fig_rows = []
            for i, e in enumerate(eps):
                ests = [_est(c, N) for c in r["joint"][i]]
                for k, est in zip(ks, ests):
                    rows.append({"d": r["d"], "epsilon": e, "k": k, **_est_row(est)})
                    fig_rows.append([k, e, est.p_hat, est.ci_low, est.ci_high, "nan"])
                pos = [(k, est.p_hat) for k, est in zip(ks, ests)
                       if k > 0 and est.count >= cfg.params["min_events"]]
                if len(pos) >= 2:
                    sl = sst.linregress([a for a, _ in pos], [math.log(b) for _, b in pos])
                    decay, decay_se = sl.slope, sl.stderr
                else:
                    decay, decay_se = "nan", "nan"
                fit[f"eps{e:g}"] = {
                    "log_decay_rate_in_k": decay, "decay_stderr": decay_se,
                    "strictly_decreasing_in_k": all(b.p_hat < a.p_hat
                                                    for a, b in zip(ests, ests[1:])),
                }
            for j, k in enumerate(ks):
                f = loglog_slope(eps, [r["joint"][i][j] / N for i in range(len(eps))])
                fit[f"k{k}_eps_slope"] = f.slope if f else "nan"
            fitted[key] = fit
            figs.append(Figure(f"invlwo_d{r['d']}", ["k", "epsilon", "p_hat", "ci_low", "ci_high",
                                                     "reference"], fig_rows))
        return ExperimentReport("invlwo", cfg.to_dict(), rows, fitted, {}, [], figs)


def cond_invlwo(cfg, threads=1):
    return run(_with(cfg, "invlwo"), threads)


# --------------------------------------------------------------------------
# small ball against structure


def binomial_small_ball(n, eps):
    """Exact ``P(|sum of n signs| / sqrt(n) <= eps)``."""
    k = np.arange(n + 1)
    s = np.abs(2 * k - n) / math.sqrt(n)
    pmf = sst.binom.pmf(k, n, 0.5)
    return float(pmf[s <= eps + 1e-12].sum())


@register("smallball", {"vectors": ["constant", "two_level", "random"], "alpha": 0.01,
                        "gamma": 0.1, "lcd_cap": 1e4, "C_hat": 10.0, "ci_sigmas": 3.0})
class SmallBallVsLcd:
    """Small-ball curves of structured and unstructured directions next to their LCD.

    Rows carry both the centre-zero estimate and the swept (Levy) value; the
    structured/unstructured assertion uses the swept value.
    """

    @staticmethod
    def units(cfg):
        return [f"n{n}_{name}" for n in cfg.n_list for name in cfg.params["vectors"]]

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        name = key.split("_", 1)[1]
        seed = cfg.unit_seed(key)
        v = unit_vector(name, n, seed)
        eps = cfg.grid_or(log_grid(1e-3, 1e-1, 4))
        z = smallball._projections(v, cfg.dist, cfg.trials, seed, threads)
        absz = np.sort(np.abs(z))
        zs = np.sort(z)
        lp = cfg.params
        res = arithmetic.lcd(v, arithmetic.LcdParams(lp["alpha"], lp["gamma"], cap=lp["lcd_cap"]))
        return {"n": n, "vector": name, "trials": cfg.trials,
                "fixed": _counts_leq(absz, eps).tolist(),
                "swept": [smallball._levy_count(zs, e) for e in eps],
                "lcd": res.value, "lcd_branch": res.binding_constraint}

    @staticmethod
    def assemble(cfg, results):
        eps = cfg.grid_or(log_grid(1e-3, 1e-1, 4))
        p = cfg.params
        kind = cfg.ensemble["kind"]
        rows, fitted, viol, figs = [], {}, [], []
        for key in SmallBallVsLcd.units(cfg):
            r = results[key]
            n, name, N = r["n"], r["vector"], r["trials"]
            lcd_v = as_float(r["lcd"])
            structured = name in ("constant", "two_level", "e1")
            fig_rows, over = [], []
            for e, cf, cs in zip(eps, r["fixed"], r["swept"]):
                est = _est(cf, N)
                sw = _est(cs, N)
                row = {"n": n, "vector": name, "epsilon": e, **_est_row(est),
                       "levy_swept": sw.p_hat, "lcd": lcd_v, "eps_below_inv_lcd": e * lcd_v < 1}
                ref = "nan"
                if kind == "rademacher" and name == "constant":
                    ref = row["exact"] = binomial_small_ball(n, e)
                elif kind == "gaussian":
                    ref = row["exact"] = float(erf(e / math.sqrt(2)))
                rows.append(row)
                fig_rows.append([e, est.p_hat, est.ci_low, est.ci_high, ref])
                # the Levy (swept-centre) value sees atoms away from zero too
                over.append(sw.p_hat > p["C_hat"] * e + p["ci_sigmas"] * sw.half_width)
            fitted[key] = {"lcd": lcd_v, "lcd_branch": r["lcd_branch"],
                           "exceeds_C_eps_at_smallest_eps": bool(over[0]),
                           "grid_points_exceeding": int(sum(over))}
            if kind != "gaussian":
                if structured and not over[0]:
                    viol.append(f"{key}: structured vector does not exceed C*eps at eps={eps[0]:g}")
                if not structured and any(over):
                    viol.append(f"{key}: unstructured vector exceeds C*eps")
            figs.append(Figure(f"smallball_n{n}_{name}",
                               ["epsilon", "p_hat", "ci_low", "ci_high", "exact"], fig_rows))
        return ExperimentReport("smallball", cfg.to_dict(), rows, fitted, {}, viol, figs)


def smallball_vs_lcd(cfg, threads=1):
    return run(_with(cfg, "smallball"), threads)


# --------------------------------------------------------------------------
# flatness audit


@register("audit", {"deltas": [0.05, 0.1, 0.2], "rhos": [0.1, 0.3, 0.5], "cs": [0.1, 0.2, 0.3]})
class FlatnessAudit:
    """Compressibility and flatness of least-singular eigenvectors."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        seed = cfg.unit_seed(key)
        dist = cfg.dist
        p = cfg.params

        def chunk(idx):
            a = ensembles.sample_sym_batch(dist, n, seed, idx)
            w, V = np.linalg.eigh(a)
            i = np.argmin(np.abs(w), axis=1)
            vecs = V[np.arange(len(idx)), :, i]
            mags = -np.sort(-np.abs(vecs), axis=1)
            tails = np.cumsum((mags ** 2)[:, ::-1], axis=1)[:, ::-1]  # tails[:, k] = sum_{m>=k}
            comp = []
            for d in p["deltas"]:
                k = math.ceil(d * n - 1e-12)
                comp.append(np.sqrt(tails[:, k]) if k < n else np.zeros(len(idx)))
            s = np.abs(vecs) * math.sqrt(n)
            flats = [np.count_nonzero((s >= c) & (s <= 1 / c), axis=1) for c in p["cs"]]
            return np.concatenate([np.stack(comp, 1), np.stack(flats, 1)], axis=1)

        data = rng.map_trials(chunk, cfg.trials, threads)
        nd = len(p["deltas"])
        comp, flats = data[:, :nd], data[:, nd:]
        incomp = {f"{d:g}_{r:g}": int(np.count_nonzero(comp[:, i] > r))
                  for i, d in enumerate(p["deltas"]) for r in p["rhos"]}
        flat = {f"{c:g}": int(np.count_nonzero(flats[:, j] >= c * n))
                for j, c in enumerate(p["cs"])}
        half = {f"{c:g}": int(np.count_nonzero(flats[:, j] >= 0.5 * n))
                for j, c in enumerate(p["cs"])}
        return {"n": n, "trials": cfg.trials, "incompressible": incomp, "flat_ge_cn": flat,
                "flat_ge_half_n": half}

    @staticmethod
    def assemble(cfg, results):
        rows, fitted, figs = [], {}, []
        p = cfg.params
        for key in _by_n(cfg):
            r = results[key]
            N = r["trials"]
            fig_rows = []
            for d in p["deltas"]:
                for rho in p["rhos"]:
                    est = _est(r["incompressible"][f"{d:g}_{rho:g}"], N)
                    rows.append({"n": r["n"], "delta": d, "rho": rho, "measure": "incompressible",
                                 **_est_row(est)})
                    fig_rows.append([f"delta={d:g},rho={rho:g}", est.p_hat, est.ci_low,
                                     est.ci_high, "nan"])
            for c in p["cs"]:
                for label, table in (("flat_ge_cn", r["flat_ge_cn"]),
                                     ("flat_ge_half_n", r["flat_ge_half_n"])):
                    est = _est(table[f"{c:g}"], N)
                    rows.append({"n": r["n"], "c": c, "measure": label, **_est_row(est)})
                    fig_rows.append([f"{label},c={c:g}", est.p_hat, est.ci_low, est.ci_high, "nan"])
            fitted[key] = {"feasible_incompressible": [k for k, v in r["incompressible"].items()
                                                       if v / N >= 0.99]}
            figs.append(Figure(f"audit_n{r['n']}", ["setting", "fraction", "ci_low", "ci_high",
                                                    "reference"], fig_rows))
        return ExperimentReport("audit", cfg.to_dict(), rows, fitted, {}, [], figs)


def flatness_audit(cfg, threads=1):
    return run(_with(cfg, "audit"), threads)


# --------------------------------------------------------------------------
# distance identity and the geometric facts


@register("distid", {"identity_tol": 1e-6, "fact_slack": 1e-8, "facts_max_size": 16})
class DistanceIdentity:
    """Projection distance of the first column against its quadratic-form expression.

    Sizes in ``n_list`` are full matrix sizes (``n + 1``). Each sample also runs
    the least-singular-vector lower bound, the eigenvector/minor inequality and
    Cauchy interlacing; those per-column checks cost O(n^4) and only run for
    sizes up to ``facts_max_size``.
    """

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        size = _n_of(key)
        if size < 2:
            raise ValueError("matrix size must be at least 2")
        seed = cfg.unit_seed(key)
        dist = cfg.dist
        facts = size <= cfg.params["facts_max_size"]

        def chunk(idx):
            out = np.zeros((len(idx), 5))
            mats = ensembles.sample_sym_batch(dist, size, seed, idx)
            for r, a in enumerate(mats):
                try:
                    out[r, 0] = spectral.dist_identity_check(a).abs_err
                    out[r, 4] = 0
                except spectral.SingularMinorError:
                    out[r, 0] = np.nan
                    out[r, 4] = 1
                if facts:
                    out[r, 1] = -np.min(spectral.sigma_min_lower_margins(a))
                    out[r, 2] = spectral.perturbation_check(a, 0).max_excess
                    out[r, 3] = spectral.interlacing_violation(a, 0)
                else:
                    out[r, 1:4] = -np.inf
            return out

        d = rng.map_trials(chunk, cfg.trials, threads)
        ok = d[:, 4] == 0
        err = d[ok, 0]
        return {"size": size, "trials": cfg.trials, "skipped": int((~ok).sum()), "facts_checked": facts,
                "max_abs_err": float(err.max()) if err.size else 0.0,
                "mean_abs_err": float(err.mean()) if err.size else 0.0,
                "fact52_max_excess": float(d[:, 1].max()),
                "fact53_max_excess": float(d[:, 2].max()),
                "interlacing_max": float(d[:, 3].max())}

    @staticmethod
    def assemble(cfg, results):
        rows, fitted, excl, viol = [], {}, {}, []
        tol, slack = cfg.params["identity_tol"], cfg.params["fact_slack"]
        fig_rows = []
        for key in _by_n(cfg):
            r = results[key]
            rows.append({k: r[k] for k in ("size", "trials", "skipped", "facts_checked",
                                           "max_abs_err", "mean_abs_err",
                                           "fact52_max_excess", "fact53_max_excess",
                                           "interlacing_max")})
            fig_rows.append([r["size"], r["max_abs_err"], "nan", "nan", tol])
            excl[key] = {"singular_minor": r["skipped"]}
            if r["max_abs_err"] > tol:
                viol.append(f"size={r['size']}: identity error {r['max_abs_err']:.3g} > {tol}")
            for f in ("fact52_max_excess", "fact53_max_excess", "interlacing_max"):
                if r["facts_checked"] and r[f] > slack:
                    viol.append(f"size={r['size']}: {f} = {r[f]:.3g} > {slack}")
        fitted["max_abs_err"] = max(r["max_abs_err"] for r in rows)
        figs = [Figure("distid", ["n_plus_1", "max_abs_err", "ci_low", "ci_high", "tolerance"],
                       fig_rows)]
        return ExperimentReport("distid", cfg.to_dict(), rows, fitted, excl, viol, figs)


def distance_identity(cfg, threads=1):
    return run(_with(cfg, "distid"), threads)


# --------------------------------------------------------------------------
# LCD study


@register("lcd", {"vectors": ["e1", "constant", "random"], "alpha": 0.25, "gamma": 0.5,
                  "cap": 1e4, "mu": 0.1, "subvector_mode": "auto"})
class LcdStudy:
    """LCD and subvector LCD of named directions, with witness re-verification."""

    @staticmethod
    def units(cfg):
        return _by_n(cfg)

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        p = cfg.params
        seed = cfg.unit_seed(key)
        params = arithmetic.LcdParams(p["alpha"], p["gamma"], cap=p["cap"])
        out = {"n": n, "vectors": []}
        for name in p["vectors"]:
            v = unit_vector(name, n, seed)
            res = arithmetic.lcd(v, params)
            slack = (arithmetic.lcd_condition(v, res.value, p["alpha"], p["gamma"])
                     if res.bounded else "nan")
            mode = p["subvector_mode"]
            m = int(math.floor(2 * p["mu"] * n + 1e-12))
            if mode == "auto":
                mode = "exact" if math.comb(n, min(m, n - 1)) <= 2000 else "heuristic"
            sub = arithmetic.subvector_lcd(v, params, p["mu"], mode=mode, seed=seed)
            out["vectors"].append({"vector": name, "lcd": res.value, "witness": res.witness_t,
                                   "branch": res.binding_constraint, "witness_slack": slack,
                                   "sub_lcd": sub.value, "sub_mode": mode,
                                   "sub_kept": len(sub.subset)})
        return out

    @staticmethod
    def closed_form(name, n, alpha, gamma):
        if name == "e1" and alpha * n >= 0.25:
            return 1 / (1 + gamma)
        return None

    @staticmethod
    def assemble(cfg, results):
        p = cfg.params
        rows, viol, fig_rows = [], [], []
        for key in _by_n(cfg):
            r = results[key]
            for d in r["vectors"]:
                row = {"n": r["n"], **d}
                ref = LcdStudy.closed_form(d["vector"], r["n"], p["alpha"], p["gamma"])
                if ref is not None:
                    row["closed_form"] = ref
                    if abs(as_float(d["lcd"]) - ref) > 1e-6 * ref:
                        viol.append(f"n={r['n']} {d['vector']}: lcd {d['lcd']} != {ref}")
                if d["witness_slack"] != "nan" and d["witness_slack"] < -1e-9:
                    viol.append(f"n={r['n']} {d['vector']}: witness fails re-verification")
                rows.append(row)
                fig_rows.append([f"n={r['n']},{d['vector']}", d["lcd"], "nan", "nan",
                                 ref if ref is not None else "nan"])
        figs = [Figure("lcd", ["vector", "lcd", "ci_low", "ci_high", "closed_form"], fig_rows)]
        return ExperimentReport("lcd", cfg.to_dict(), rows, {}, {}, viol, figs)


def lcd_study(cfg, threads=1):
    return run(_with(cfg, "lcd"), threads)


# --------------------------------------------------------------------------
# characteristic functions


@register("charfn", {"nu": 0.25, "t_max": 4.0, "grid_points": 1000, "fact43_c": 0.1,
                     "fact43_vectors": 200, "esseen_delta": 0.5})
class CharFnStudy:
    """Exact against Monte Carlo characteristic functions and the Fourier-side bounds."""

    @staticmethod
    def units(cfg):
        return ["main"]

    @staticmethod
    def run_unit(cfg, key, threads):
        p = cfg.params
        dist = cfg.dist
        ts = cfg.grid_or(np.linspace(0.0, p["t_max"], p["grid_points"]))
        seed = cfg.unit_seed(key)
        mc = smallball.charfn_mc(dist, cfg.trials, seed)(ts)
        out = {"t": ts.tolist(), "mc_abs": np.abs(mc).tolist(), "trials": cfg.trials,
               "discrete": dist.is_discrete}
        if not dist.is_discrete:
            return out
        ex = smallball.charfn_exact(dist)(ts)
        a_grid = np.linspace(-2.0, 2.0, p["grid_points"])
        out.update({
            "exact_re": ex.real.tolist(), "exact_abs_max": float(np.max(np.abs(ex))),
            "max_exact_mc_gap": float(np.max(np.abs(ex - mc))),
            "xi_violation": smallball.xi_bounds_check(dist, p["nu"], ts),
            "lazy_vs_xi_violation": smallball.lazy_vs_xi_violation(dist, p["nu"], ts),
            "cosine_violation": smallball.cosine_bounds_violation(a_grid),
        })
        worst = -math.inf
        g = ensembles.Distribution.gaussian()
        for i in range(p["fact43_vectors"]):
            n = 1 + i % 8
            a = g.quantile(rng.uniforms(seed, rng.TAG_MISC, 100 + i, n)) * 0.5
            lhs, rhs = smallball.fact43_check(dist, a, p["fact43_c"])
            worst = max(worst, lhs - rhs)
        out["fact43_max_excess"] = worst
        es = smallball.esseen_bound_check(dist, [1.0], p["esseen_delta"])
        out["esseen"] = {"lhs": es.lhs, "rhs": es.rhs, "ratio": es.ratio,
                         "richardson_rel": es.richardson_rel}
        return out

    @staticmethod
    def assemble(cfg, results):
        r = results["main"]
        tol_mc = 4 / math.sqrt(r["trials"])
        viol, fitted = [], {}
        rows, fig_rows = [], []
        for i, t in enumerate(r["t"]):
            row = {"t": t, "mc_abs": r["mc_abs"][i]}
            if r["discrete"]:
                row["exact_re"] = r["exact_re"][i]
            rows.append(row)
            fig_rows.append([t, r["exact_re"][i] if r["discrete"] else r["mc_abs"][i],
                             "nan", "nan", "nan"])
        if max(r["mc_abs"]) > 1 + 1e-9:
            viol.append("Monte Carlo |phi| exceeds 1")
        if r["discrete"]:
            fitted = {k: r[k] for k in ("exact_abs_max", "max_exact_mc_gap", "xi_violation",
                                        "lazy_vs_xi_violation", "cosine_violation",
                                        "fact43_max_excess", "esseen")}
            fitted["mc_tolerance"] = tol_mc
            checks = [("exact |phi| exceeds 1", r["exact_abs_max"] > 1 + 1e-9),
                      ("exact and Monte Carlo disagree", r["max_exact_mc_gap"] > tol_mc),
                      ("xi bounds violated", r["xi_violation"] > 1e-9),
                      ("lazy cf exceeds xi cf", r["lazy_vs_xi_violation"] > 1e-9),
                      ("cosine inequality violated", r["cosine_violation"] > 1e-12),
                      ("untilted cf bound violated", r["fact43_max_excess"] > 1e-12)]
            viol += [msg for msg, bad in checks if bad]
        figs = [Figure("charfn", ["t", "phi", "ci_low", "ci_high", "reference"], fig_rows)]
        return ExperimentReport("charfn", cfg.to_dict(), rows, fitted, {}, viol, figs)


def charfn_study(cfg, threads=1):
    return run(_with(cfg, "charfn"), threads)


# --------------------------------------------------------------------------
# threshold


@register("threshold", {"vectors": ["constant", "random"], "L_list": [2.0, 4.0, 8.0],
                        "nu": 0.25, "d": None, "c0": 0.5})
class ThresholdStudy:
    """Threshold ``T_L(v)`` of named directions for the zeroed-out matrix."""

    @staticmethod
    def units(cfg):
        return [f"n{n}_{name}" for n in cfg.n_list for name in cfg.params["vectors"]]

    @staticmethod
    def run_unit(cfg, key, threads):
        n = _n_of(key)
        name = key.split("_", 1)[1]
        p = cfg.params
        d = p["d"] or max(1, int(round(p["c0"] ** 2 * n)))
        d = min(d, n // 3)
        zp = ensembles.ZeroedMatrixParams(n, d, p["nu"], cfg.dist)
        seed = cfg.unit_seed(key)
        v = unit_vector(name, n, seed)
        tg = tuple(cfg.grid_or(log_grid(1e-3, 1.0, 6)))
        out = {"n": n, "d": d, "vector": name, "T": {}}
        for L in p["L_list"]:
            tp = smallball.ThresholdParams(float(L), cfg.trials, tg)
            out["T"][f"{float(L):g}"] = smallball.threshold(v, zp, tp, seed, threads)
        return out

    @staticmethod
    def assemble(cfg, results):
        rows, viol, fig_rows = [], [], []
        for key in ThresholdStudy.units(cfg):
            r = results[key]
            prev = None
            for L in cfg.params["L_list"]:
                T = r["T"][f"{float(L):g}"]
                rows.append({"n": r["n"], "d": r["d"], "vector": r["vector"], "L": float(L), "T_L": T})
                fig_rows.append([float(L), T, "nan", "nan", 1 / (4 * float(L))])
                if prev is not None and T > prev:
                    viol.append(f"{key}: threshold increased with L={L}")
                prev = T
        figs = [Figure("threshold", ["L", "T_L", "ci_low", "ci_high", "one_over_4L"], fig_rows)]
        return ExperimentReport("threshold", cfg.to_dict(), rows, {}, {}, viol, figs)


def threshold_study(cfg, threads=1):
    return run(_with(cfg, "threshold"), threads)
