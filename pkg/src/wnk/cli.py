"""Command-line front end: ``wnk <command> [--config FILE] [overrides]``.

Every command reads one JSON config (optional; defaults below), applies the
flag overrides, runs, writes ``<out>/report.json`` and ``<out>/table.csv``,
and exits 0 iff every assertion in the config's ``assertions`` block holds.
Exit 1 means at least one assertion failed (each is listed on stderr);
exit 2 means the config or IO was invalid.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charfun, donsker, hermite, hilbert_scale
from .hermite import BasisConfig, TestFunction

COMMANDS = ("donsker", "tightness", "minlos", "hemicompact", "tables")

DEFAULTS = {
    "donsker": {
        "innovation": "rademacher",
        "phi": {"e0": [1.0]},
        "n_schedule": [16, 64, 256, 1024],
        "N_mc": 10000,
        "tail_tol": 1e-12,
        "assertions": {"monotone_analytic_error": True, "max_final_analytic_error": 1e-3,
                       "empirical_sigmas": 5.0},
    },
    "tightness": {
        "family": "white-noise",
        "innovation": "rademacher",
        "n_schedule": [16, 64, 256],
        "n_max": 12,
        "m_grid": [0],
        "delta_grid": [0.1],
        "eps": 0.01,
        "probes": 256,
        "tail_tol": 1e-12,
        "assertions": {},
    },
    "minlos": {
        "directions": {"e0": [1.0]},
        "N_mu": 20000,
        "N_m": 20000,
        "inner": 256,
        "psd_probes": 8,
        "m_tolerance": 1e-10,
        "assertions": {"fubini_sigmas": 5.0, "psd": True, "m_interval": [2.0, 2.0002]},
    },
    "hemicompact": {
        "samples": 1000,
        "levels": 12,
        "assertions": {"covering": True, "nesting": True},
    },
    "tables": {
        "hermite_k": [0, 1, 2, 5, 10],
        "hermite_t": [0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
        "gh_orders": [1, 2, 3, 4],
        "embedding_levels": 4,
        "m_tolerance": 1e-12,
        "assertions": {},
    },
}


class ConfigError(Exception):
    """Invalid configuration; reported with exit status 2."""


@dataclass
class RunConfig:
    command: str
    K: int = 16
    Q: int | None = None
    seed: int = 20240601
    out: str = "out"
    params: dict = field(default_factory=dict)

    @property
    def basis(self) -> BasisConfig:
        return BasisConfig(self.K, self.Q)


def _positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return value


def _positive(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def build_config(command: str, raw: dict, args) -> RunConfig:
    params = json.loads(json.dumps(DEFAULTS[command]))
    for key, value in raw.items():
        if key in ("command", "K", "Q", "seed", "out"):
            continue
        if key == "assertions" and isinstance(value, dict):
            params["assertions"].update(value)
        else:
            params[key] = value
    if "command" in raw and raw["command"] != command:
        raise ConfigError(f"config is for command {raw['command']!r}, not {command!r}")
    cfg = RunConfig(command=command, K=raw.get("K", 16), Q=raw.get("Q"),
                    seed=raw.get("seed", 20240601), out=raw.get("out", "out"), params=params)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.n is not None:
        params["n_schedule"] = args.n
    if args.mc is not None:
        key = "N_mc" if command == "donsker" else "N_mu" if command == "minlos" else "samples"
        params[key] = args.mc
        if command == "minlos":
            params["N_m"] = args.mc
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    p = cfg.params
    _positive_int(cfg.K, "K")
    if cfg.Q is not None:
        _positive_int(cfg.Q, "Q")
    if isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {cfg.seed!r}")
    try:
        cfg.basis
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if "innovation" in p:
        try:
            donsker.get_innovation(p["innovation"])
        except ValueError:
            raise ConfigError(f"unknown innovation {p['innovation']!r}") from None
    for key in ("N_mc", "N_mu", "N_m", "samples", "levels", "probes", "psd_probes", "inner"):
        if key in p and not (key == "inner" and p[key] is None):
            _positive_int(p[key], key)
    for key in ("tail_tol", "eps", "m_tolerance"):
        if key in p:
            _positive(p[key], key)
    if "n_schedule" in p:
        ns = p["n_schedule"]
        if not isinstance(ns, list) or not all(isinstance(n, int) and n >= 1 for n in ns):
            raise ConfigError("n_schedule must be a list of positive integers")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n_schedule must be strictly increasing")
    if cfg.command == "donsker" and not p["n_schedule"]:
        raise ConfigError("n_schedule must be nonempty")
    for key in ("delta_grid",):
        if key in p:
            for d in p[key]:
                _positive(d, key)


def _test_functions(entries, basis: BasisConfig, name: str) -> dict:
    """id -> TestFunction from {id: [coeffs...] or path-to-coefficient-JSON}."""
    if not isinstance(entries, dict):
        raise ConfigError(f"{name} must be an object mapping ids to coefficients")
    out = {}
    for key, value in entries.items():
        if isinstance(value, str):
            try:
                phi = hermite.load_coeffs(value, Q=basis.Q)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"{name}[{key!r}]: {exc}") from None
            if phi.basis.K != basis.K:
                raise ConfigError(f"{name}[{key!r}]: file has K={phi.basis.K}, run uses K={basis.K}")
        else:
            if not isinstance(value, list) or len(value) > basis.K:
                raise ConfigError(f"{name}[{key!r}] must be a list of at most K={basis.K} reals")
            c = np.zeros(basis.K)
            c[:len(value)] = value
            try:
                phi = TestFunction(c, basis)
            except ValueError as exc:
                raise ConfigError(f"{name}[{key!r}]: {exc}") from None
        out[key] = phi
    return out


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# -- commands ---------------------------------------------------------------
# each returns (report dict, csv text, list of failed assertion messages)

def cmd_donsker(cfg: RunConfig):
    p = cfg.params
    phis = _test_functions(p["phi"], cfg.basis, "phi")
    if not phis:
        raise ConfigError("phi must name at least one test function")
    inn = donsker.get_innovation(p["innovation"])
    report = donsker.convergence_experiment(phis, p["n_schedule"], inn, p["N_mc"], cfg.seed,
                                            p["tail_tol"])
    a = p["assertions"]
    failed = []
    for phi_id in phis:
        errs = report.column(phi_id, "analytic_err")
        zero = all(e == 0.0 for e in errs)
        if a.get("monotone_analytic_error") and not zero and any(y >= x for x, y in zip(errs, errs[1:])):
            failed.append(f"{phi_id}: analytic error not strictly decreasing: {errs}")
        cap = a.get("max_final_analytic_error")
        if cap is not None and errs[-1] > cap:
            failed.append(f"{phi_id}: final analytic error {errs[-1]:.3g} > {cap:g}")
        k = a.get("empirical_sigmas")
        if k is not None:
            bound = k / math.sqrt(p["N_mc"])
            for n, e in zip(report.column(phi_id, "n"), report.column(phi_id, "empirical_err")):
                if e > bound:
                    failed.append(f"{phi_id}, n={n}: empirical error {e:.3g} > {bound:.3g}")
    report.checks = {"failed": failed, "assertions": a}
    report.config.update({"K": cfg.K, "Q": cfg.basis.Q})
    if len(report.rows) >= 3:
        for phi_id in phis:
            pts = [(r["n"], r["analytic_err"]) for r in report.rows if r["phi_id"] == phi_id]
            if len(pts) >= 3 and all(e > 0 for _, e in pts):
                report.checks.setdefault("rate", {})[phi_id] = donsker.rate_estimate(pts)
    return report.to_dict(), report.to_csv(), failed


def _family(cfg: RunConfig, name: str):
    p = cfg.params
    basis = cfg.basis
    if name == "white-noise":
        return [charfun.WhiteNoise(basis)]
    if name == "drifting-dirac":
        try:
            return charfun.drifting_dirac_family(basis, p["n_max"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if name == "donsker":
        inn = donsker.get_innovation(p["innovation"])
        return [donsker.ProductIID(inn, n, p["tail_tol"], basis) for n in p["n_schedule"]]
    raise ConfigError(f"unknown family {name!r}")


def cmd_tightness(cfg: RunConfig):
    p = cfg.params
    names = p["family"] if isinstance(p["family"], list) else [p["family"]]
    members = [cf for name in names for cf in _family(cfg, name)]
    if not members:
        raise ConfigError("empty family")
    family_id = "+".join(names)
    reports = []
    for m in p["m_grid"]:
        if not isinstance(m, int) or m < 0:
            raise ConfigError(f"m_grid entries must be nonnegative integers, got {m!r}")
        for delta in p["delta_grid"]:
            reports.append(charfun.equicontinuity_modulus(
                members, m, float(delta), p["probes"], cfg.seed, eps=p["eps"], basis=cfg.basis))
    failed = []
    expect = p["assertions"].get("verdict")
    if expect is not None:
        for r in reports:
            if r.verdict != expect:
                failed.append(f"m={r.m}, delta={r.delta:g}: verdict {r.verdict} (modulus {r.modulus:.6g}), expected {expect}")
    out = {"config": {"K": cfg.K, "seed": cfg.seed, "family": names, **{k: v for k, v in p.items() if k != "assertions"}},
           "reports": [r.to_dict() for r in reports], "checks": {"failed": failed, "assertions": p["assertions"]}}
    table = _csv(["family_id", "m", "delta", "modulus"],
                 [(family_id, r.m, r.delta, r.modulus) for r in reports])
    return out, table, failed


def cmd_minlos(cfg: RunConfig):
    p = cfg.params
    basis = cfg.basis
    dirs = list(_test_functions(p["directions"], basis, "directions").values())
    if not dirs:
        raise ConfigError("directions must be nonempty")
    ss = np.random.SeedSequence(cfg.seed)
    mu_seq, m_seq, probe_seq = ss.spawn(3)
    X = charfun.sample_white_noise(basis, mu_seq, size=p["N_mu"])
    fub = charfun.fubini_check(X, dirs, p["N_m"], m_seq, inner=p.get("inner"))
    M, u_star = charfun.m_constant(p["m_tolerance"], return_argmax=True)
    rng = np.random.default_rng(probe_seq)
    probes = [TestFunction(rng.standard_normal(basis.K), basis) for _ in range(p["psd_probes"])]
    is_psd, lam_min = charfun.gram_psd_check(charfun.WhiteNoise(basis), probes)
    a = p["assertions"]
    failed = []
    sig = a.get("fubini_sigmas")
    if sig is not None:
        thr = sig / 5.0 * fub.threshold
        if abs(fub.lhs - fub.rhs) > thr:
            failed.append(f"fubini: |lhs - rhs| = {abs(fub.lhs - fub.rhs):.3g} > {thr:.3g}")
    if a.get("psd") and not is_psd:
        failed.append(f"psd: min eigenvalue {lam_min:.3g}")
    interval = a.get("m_interval")
    if interval is not None and not interval[0] <= M <= interval[1]:
        failed.append(f"M = {M!r} outside {interval}")
    out = {
        "config": {"K": cfg.K, "seed": cfg.seed, **{k: v for k, v in p.items() if k != "assertions"}},
        "fubini": {**fub._asdict(), "abs_diff": abs(fub.lhs - fub.rhs), "threshold": fub.threshold},
        "M": {"value": M, "argmax": u_star},
        "psd": {"is_psd": bool(is_psd), "min_eigenvalue": lam_min, "probes": p["psd_probes"]},
        "checks": {"failed": failed, "assertions": a},
    }
    rows = [("fubini_lhs", fub.lhs), ("fubini_rhs", fub.rhs), ("fubini_abs_diff", abs(fub.lhs - fub.rhs)),
            ("fubini_threshold", fub.threshold), ("M", M), ("M_argmax", u_star),
            ("psd_min_eigenvalue", lam_min)]
    return out, _csv(["quantity", "value"], rows), failed


def cmd_hemicompact(cfg: RunConfig):
    p = cfg.params
    basis = cfg.basis
    X = charfun.sample_white_noise(basis, cfg.seed, size=p["samples"])
    samples = [hilbert_scale.DistributionVector.zeros(basis)]
    samples += [hilbert_scale.DistributionVector(row, basis) for row in X]
    idx = [hilbert_scale.exhaustion_index(x) for x in samples]
    hist: dict = {}
    for i in idx:
        hist[str(i)] = hist.get(str(i), 0) + 1
    levels = p["levels"]
    table = hilbert_scale.exhaustion_table(samples, levels)
    nest_fail = 0
    for x in samples:
        inside = [hilbert_scale.ball_contains(hilbert_scale.exhaustion_ball(n), x) for n in range(1, levels + 1)]
        nest_fail += sum(a and not b for a, b in zip(inside, inside[1:]))
    a = p["assertions"]
    failed = []
    if a.get("covering") and any(i is None for i in idx):
        failed.append(f"covering: {sum(i is None for i in idx)} samples without an exhaustion index")
    if a.get("nesting") and nest_fail:
        failed.append(f"nesting: {nest_fail} violations of K_n in K_(n+1)")
    out = {
        "config": {"K": cfg.K, "seed": cfg.seed, **{k: v for k, v in p.items() if k != "assertions"}},
        "zero_index": idx[0],
        "histogram": dict(sorted(hist.items(), key=lambda kv: (kv[0] == "None", kv[0].zfill(6)))),
        "max_index": max((i for i in idx if i is not None), default=None),
        "nesting_violations": nest_fail,
        "checks": {"failed": failed, "assertions": a},
    }
    return out, _csv(["n", "r_n", "member_count"], table), failed


def cmd_tables(cfg: RunConfig):
    p = cfg.params
    rows = []
    for k in p["hermite_k"]:
        for t in p["hermite_t"]:
            rows.append(("hermite", k, float(t), hermite.hermite_point(int(k), float(t))))
    for Q in p["gh_orders"]:
        nodes, weights = hermite.gh_rule(int(Q))
        for i, (x, w) in enumerate(zip(nodes, weights)):
            rows.append(("gh_node", Q, i, float(x)))
            rows.append(("gh_weight", Q, i, float(w)))
    L = p["embedding_levels"]
    for k in range(L + 1):
        for n in range(k, L + 1):
            rows.append(("embedding_norm", k, n, hilbert_scale.embedding_norm(k, n, cfg.K)))
    M, u_star = charfun.m_constant(p["m_tolerance"], return_argmax=True)
    rows.append(("m_constant", "", "", M))
    rows.append(("m_argmax", "", "", u_star))
    out = {"config": {"K": cfg.K, **{k: v for k, v in p.items() if k != "assertions"}},
           "rows": len(rows), "M": M, "checks": {"failed": [], "assertions": p["assertions"]}}
    return out, _csv(["table", "a", "b", "value"], rows), []


HANDLERS = {
    "donsker": cmd_donsker,
    "tightness": cmd_tightness,
    "minlos": cmd_minlos,
    "hemicompact": cmd_hemicompact,
    "tables": cmd_tables,
}


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wnk", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--n", type=_int_list, help="comma-separated n_schedule")
    parser.add_argument("--mc", type=int, help="Monte-Carlo sample count")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            if not isinstance(raw, dict):
                raise ConfigError("config must be a JSON object")
        cfg = build_config(args.command, raw, args)
        report, table, failed = HANDLERS[args.command](cfg)
        out = Path(cfg.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n")
            (out / "table.csv").write_text(table)
        except OSError as exc:
            raise ConfigError(f"cannot write output: {exc}") from None
    except ConfigError as exc:
        print(f"wnk {args.command}: {exc}", file=sys.stderr)
        return 2
    for msg in failed:
        print(f"wnk {args.command}: assertion failed: {msg}", file=sys.stderr)
    return 1 if failed else 0


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())
