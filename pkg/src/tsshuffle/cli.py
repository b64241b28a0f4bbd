"""Command-line experiments.

Each subcommand writes one CSV whose first line is ``# config: {...}``,
the full resolved configuration as JSON.  Exit status is 0 on success,
1 on invalid input and 2 when a numerical check fails; errors are
reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import heatml, mgrid, twoscale
from .schedule import PeriodSchedule, ScheduleError, dyadic_schedule
from .shuffle import compose_shuffle

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

DEFAULTS = {
    "shuffle-table": {"schedule": {"p0": 1.0, "factors": [2, 3, 2]}},
    "two-scale-demo": {"k_min": 4, "k_max": 12, "tol": 1e-2, "nodes_per_period": 16},
    "martingale-demo": {
        "levels": 6,
        "samples_per_cell": 4,
        "periods": [1, 2, 4, 8],
        "tol": 1e-10,
    },
    "heat-cross-validate": {
        "params": {"A": 1.0, "K": 0.5, "J": 1.0, "delta": 0.1},
        "cases": [
            {"schedule": {"p0": 1.0, "factors": [2, 2, 2, 2, 2]}, "n": 2, "level": 5},
            {"schedule": {"p0": 1.0, "factors": [2, 3]}, "n": 1, "level": 2},
        ],
        "T": [0.1, 1.0, 10.0],
        "method": "exact",
        "tol": 1e-6,
    },
    "heat-epsilon-converge": {
        "params": {"A": 1.0, "K": 0.5, "J": 1.0, "delta": 0.1},
        "layers": [8, 16, 32],
        "cells_per_layer": 16,
        "T": 0.5,
        "dt": 1e-4,
        "method": "cn",
        "energy_tol": 1e-6,
    },
}


class ConfigError(ValueError):
    pass


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in r])
    return buf.getvalue()


def _schedule(d) -> PeriodSchedule:
    if not isinstance(d, dict):
        raise ConfigError("schedule must be an object {p0, factors}")
    return PeriodSchedule.from_dict(d)


def _params(d) -> heatml.HeatParams:
    try:
        return heatml.HeatParams(**d)
    except TypeError as e:
        raise ConfigError(f"bad params: {e}") from None


# ---------------------------------------------------------------------------


def cmd_shuffle_table(cfg, seed):
    s = _schedule(cfg["schedule"])
    rows = []
    for n in range(1, s.levels + 1):
        H = compose_shuffle(s, n)
        for k in range(H.M):
            rows.append((n, k, int(H.block_perm[k]), int(H.inverse_perm[k])))
    return _table(["level", "source_block", "image_block", "inverse_image"], rows), True


def demo_cases():
    """The sin(2 pi y) + sin(pi y) example at p = 1, 2 and 1/2."""

    def U(x, y):
        return np.sin(2 * np.pi * y) + np.sin(np.pi * y)

    u = twoscale.separated(U, label="sin(2pi y)+sin(pi y)")
    cases = [
        ("p=1", twoscale.TwoScaleCandidate(1.0, lambda x, y: np.sin(2 * np.pi * y))),
        ("p=2", twoscale.TwoScaleCandidate(2.0, U)),
        ("p=1/2", twoscale.zero_candidate(0.5)),
    ]
    return u, cases


def cmd_two_scale_demo(cfg, seed):
    eps = [2.0**-k for k in range(int(cfg["k_min"]), int(cfg["k_max"]) + 1)]
    if len(eps) < 3:
        raise ConfigError("need at least three epsilon values")
    quad = twoscale.Quadrature(nodes_per_period=int(cfg["nodes_per_period"]))
    u, cases = demo_cases()
    rows, ok = [], True
    for name, cand in cases:
        rep = twoscale.verify_two_scale(u, cand, twoscale.fourier_basis(cand.p), eps, cfg["tol"], quad)
        ok &= rep.passed
        rows += [(name, e, fid, pe, pl, r) for e, fid, pe, pl, r in rep.rows]
    header = ["case", "epsilon", "test_fn_id", "pairing_eps", "pairing_limit", "residual"]
    return _table(header, rows), ok


def martingale_profile(periods, seed):
    """Sum of one sine and one cosine per period, random amplitudes from ``seed``."""
    rng = np.random.default_rng(seed)
    amps = rng.uniform(-1, 1, size=(len(periods), 2))

    def U(x, y):
        out = np.zeros(np.broadcast(x, y).shape)
        for (a, b), P in zip(amps, periods):
            out = out + a * np.sin(2 * np.pi * y / P) + b * np.cos(2 * np.pi * y / P)
        return out

    return U


def martingale_run(cfg, seed):
    """Sampled limits, their shuffles and the recovered levels for the demo profile."""
    L = int(cfg["levels"])
    s = dyadic_schedule(L)
    U = martingale_profile(cfg["periods"], seed)
    v = twoscale.sample_limits(U, s, range(L + 1), int(cfg["samples_per_cell"]))
    shuffles = [compose_shuffle(s, n) for n in range(L + 1)]
    w = [mgrid.to_shuffled(v[n], shuffles[n]) for n in range(L + 1)]
    rec = [mgrid.recover_two_scale(w[L], n, shuffles[n]) for n in range(L + 1)]
    return s, v, w, rec


def cmd_martingale_demo(cfg, seed):
    s, v, w, rec = martingale_run(cfg, seed)
    L = s.levels
    tol = float(cfg["tol"])
    mart = mgrid.is_martingale(mgrid.MartingaleSequence(tuple(w)), tol)
    dist = [mgrid.l2_distance(w[n], w[L]) for n in range(L + 1)]
    rec_err = [float(np.max(np.abs(rec[n].values - v[n].values))) for n in range(L + 1)]
    agg_err = [float(np.max(np.abs(mgrid.aggregate_two_scale(rec[L], n).values - rec[n].values)))
               for n in range(L + 1)]
    rows = []
    for n in range(L + 1):
        res = mart.residuals[n] if n < L else 0.0
        rows.append((n, res, dist[n], rec_err[n], agg_err[n]))
    ok = (mart.is_martingale and twoscale.non_increasing(dist)
          and max(rec_err) <= 1e-12 and max(agg_err) <= 1e-12)
    header = ["level", "martingale_residual", "l2_to_finest", "recovery_error", "aggregation_error"]
    return _table(header, rows), ok


def cmd_heat_cross_validate(cfg, seed):
    params = _params(cfg["params"])
    if cfg.get("method", "exact") != "exact":
        raise ConfigError("cross validation uses the exact solvers")
    if "schedule" in cfg:
        cases = [{"schedule": cfg["schedule"], "n": cfg["n"], "level": cfg["level"]}]
    else:
        cases = cfg["cases"]
    rng = np.random.default_rng(seed)
    rows, ok = [], True
    for case in cases:
        s = _schedule(case["schedule"])
        n, N = int(case["n"]), int(case["level"])
        w0 = mgrid.CellFunction(s, n, 1, rng.standard_normal(s.cumulative[n]))
        rep = heatml.cross_validate(s, params, n, N, w0, cfg["T"], cfg["tol"])
        ok &= rep.passed
        label = "x".join(map(str, s.factors))
        rows += [(label, n, N, t, d) for t, d in rep.by_time.items()]
    return _table(["factors", "n", "level", "T", "max_deviation"], rows), ok


def epsilon_layer_values(geom: heatml.HeatGeometry) -> np.ndarray:
    """Layer averages for the convergence study: smooth envelope times a 4-periodic family."""
    zc = np.array([(a + b) / 2 for a, b in geom.layer_intervals])
    k = np.arange(geom.N)
    fam = 1 + 0.5 * (-1.0) ** k + 0.3 * np.cos(np.pi * k / 2)
    return np.sin(np.pi * zc) ** 4 * fam


def epsilon_run(cfg):
    params = _params(cfg["params"])
    out = []
    for N in cfg["layers"]:
        geom = heatml.HeatGeometry(int(N), params.delta)
        grid = heatml.LayerGrid(geom, int(cfg["cells_per_layer"]))
        lv = epsilon_layer_values(geom)
        u0 = heatml.layered_initial(grid, lv, intra=0.1)
        traj = heatml.solve_epsilon_1d(geom, params, u0, cfg["T"], grid.h, cfg.get("dt"),
                                       method=cfg["method"], n_snapshots=1)
        ode = heatml.solve_two_scale_system(geom.N, params, heatml.LayerState(geom.N, lv),
                                            cfg["T"], n_snapshots=1)
        avg = heatml.layer_averages(grid, traj.values[-1])
        dev = float(np.max(np.abs(avg - ode.values[-1])))
        bal = heatml.energy_balance_check(traj, params, cfg["energy_tol"])
        out.append((geom.N, dev, bal.max_residual))
    return out


def cmd_heat_epsilon_converge(cfg, seed):
    res = epsilon_run(cfg)
    devs = [d for _, d, _ in res]
    ok = all(b < a for a, b in zip(devs, devs[1:])) and res[-1][2] <= cfg["energy_tol"]
    return _table(["layers", "max_deviation", "energy_residual"], res), ok


COMMANDS = {
    "shuffle-table": cmd_shuffle_table,
    "two-scale-demo": cmd_two_scale_demo,
    "martingale-demo": cmd_martingale_demo,
    "heat-cross-validate": cmd_heat_cross_validate,
    "heat-epsilon-converge": cmd_heat_epsilon_converge,
}


# ---------------------------------------------------------------------------


def resolve_config(command, user_cfg, seed):
    cfg = copy.deepcopy(DEFAULTS[command])
    if user_cfg:
        if not isinstance(user_cfg, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user_cfg) - set(cfg) - {"command", "seed", "n", "level", "schedule"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if user_cfg.get("command", command) != command:
            raise ConfigError(f"config is for {user_cfg['command']!r}, not {command!r}")
        cfg.update({k: v for k, v in user_cfg.items() if k not in ("command", "seed")})
        if command == "heat-cross-validate" and "schedule" in user_cfg:
            # a single explicit case replaces the default list
            cfg.pop("cases")
            if "n" not in cfg or "level" not in cfg:
                raise ConfigError("a single case needs schedule, n and level")
        if seed is None:
            seed = user_cfg.get("seed")
    cfg["command"] = command
    cfg["seed"] = 0 if seed is None else int(seed)
    return cfg


def config_header(cfg) -> str:
    return "# config: " + json.dumps(cfg, sort_keys=True, separators=(",", ":")) + "\n"


def parse_header(text: str) -> dict:
    first = text.split("\n", 1)[0]
    if not first.startswith("# config: "):
        raise ValueError("missing config header")
    return json.loads(first[len("# config: "):])


def run(cfg) -> tuple[str, bool]:
    """Run a resolved config; return the CSV text and whether its checks passed."""
    body, ok = COMMANDS[cfg["command"]](cfg, cfg["seed"])
    return config_header(cfg) + body, ok


def _data_rows(text):
    return [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]


def golden_for(factors):
    """Committed golden table whose ``# factors:`` line matches, or None."""
    root = resources.files("tsshuffle") / "golden"
    for entry in sorted(root.iterdir(), key=lambda p: p.name):
        if not entry.name.endswith(".csv"):
            continue
        text = entry.read_text()
        first = text.split("\n", 1)[0]
        if first.startswith("# factors:") and json.loads(first.split(":", 1)[1]) == list(factors):
            return entry.name, text
    return None


def _error(kind, message, command):
    rec = {"error": kind, "message": message, "command": command}
    sys.stderr.write(json.dumps(rec, sort_keys=True) + "\n")


def build_parser():
    ap = argparse.ArgumentParser(prog="tsshuffle", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON config overriding the defaults")
    ap.add_argument("--out", type=Path, help="output directory (default: stdout)")
    ap.add_argument("--seed", type=int, help="seed for randomized data (default 0)")
    ap.add_argument("--golden", action="store_true",
                    help="compare the shuffle table against the committed golden file")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        user = json.loads(args.config.read_text()) if args.config else None
        cfg = resolve_config(command, user, args.seed)
        text, ok = run(cfg)
    except (ConfigError, ScheduleError, ValueError, KeyError, TypeError, OSError) as e:
        _error(type(e).__name__, str(e), command)
        return EXIT_INVALID
    except FloatingPointError as e:
        _error(type(e).__name__, str(e), command)
        return EXIT_NUMERIC

    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / f"{command}.csv").write_text(text)
    else:
        sys.stdout.write(text)

    if args.golden:
        if command != "shuffle-table":
            _error("ConfigError", "--golden applies to shuffle-table only", command)
            return EXIT_INVALID
        found = golden_for(cfg["schedule"]["factors"])
        if found is None:
            _error("ConfigError", "no golden table for this schedule", command)
            return EXIT_INVALID
        name, gold = found
        if _data_rows(gold) != _data_rows(text.split("\n", 1)[1]):
            _error("GoldenMismatch", f"output differs from {name}", command)
            return EXIT_NUMERIC
    if not ok:
        _error("CheckFailed", "numerical check failed; see the output table", command)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
