"""Batch command-line front-end.

Every subcommand takes its settings from an optional flat config file
(``key = value`` lines, ``#`` comments, or a ``run.json`` from an earlier
run) overridden by flags, writes its data files atomically into ``out``
together with ``run.json`` (the effective config), and prints one summary
line per row.

Exit status: 0 success, 1 usage error, 2 accuracy or integration failure,
3 bracketing failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile

from . import criticality, manifolds, melnikov
from .closedforms import predictors
from .errors import (AccuracyError, BracketError, DomainError, IntegrationError,
                     KinklabError)
from .integrator import IntegratorConfig, integrate
from .model import PhaseState, make_params

EXIT_OK, EXIT_USAGE, EXIT_ACCURACY, EXIT_BRACKET = 0, 1, 2, 3

COMMANDS = ("params", "simulate", "splitting", "melnikov", "curves", "critical", "vout")

# key -> (parser, default); None default means "required for commands using it"
_KEYS = {
    "eps": (float, None),
    "eps_grid": (None, None),
    "h": (float, None),
    "h_grid": (None, None),
    "kappa1": (float, 0.0),
    "coupling_scale": (float, 1.0),
    "rtol": (float, 1e-12),
    "atol": (float, 1e-14),
    "X_max": (float, 12.0),
    "max_time": (float, 1e8),
    "curve_x_max": (float, None),
    "n_tau": (int, 32),
    "out": (str, "."),
    "format": (str, "csv"),
    "precision": (str, "f64"),
    "method": (str, "both"),
    "tol": (float, 1e-13),
    "points": (int, 8),
    "spread": (float, 0.2),
    "t_end": (float, 100.0),
    "stride": (int, 10),
    "which": (str, "both"),
    "rel_width": (float, 1e-3),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_grid(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    else:
        vals = [float(v) for v in str(text).replace(" ", "").split(",") if v]
    if not vals:
        raise UsageError("grid must be non-empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise UsageError("grid values must be strictly increasing")
    return vals


def read_config(path) -> dict:
    """Parse a ``key = value`` file (or a JSON object) into raw strings/values."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        data.pop("command", None)
        data.pop("config_hash", None)
        return data
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def resolve_config(file_values: dict, flag_values: dict) -> dict:
    """Merge file and flag values (flags win), reject unknown keys, coerce types."""
    raw = dict(file_values)
    raw.update({k: v for k, v in flag_values.items() if v is not None})
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {}
    for k, (conv, default) in _KEYS.items():
        if k in raw and raw[k] is not None:
            v = raw[k]
            if k.endswith("_grid"):
                cfg[k] = _parse_grid(v)
            else:
                try:
                    cfg[k] = conv(v)
                except (TypeError, ValueError):
                    raise UsageError(f"bad value for {k}: {v!r}") from None
        else:
            cfg[k] = default
    if cfg["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if cfg["precision"] == "dd":
        raise UsageError("precision=dd is not available in this build; use f64")
    if cfg["precision"] != "f64":
        raise UsageError("precision must be f64 or dd")
    return cfg


def config_hash(cfg: dict, command: str) -> str:
    """Short digest of everything that affects the data (not the output path)."""
    body = {k: v for k, v in cfg.items() if k != "out"}
    blob = json.dumps({"command": command, **body}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _atomic_write(path, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, str):
        return v
    return repr(float(v))


class Emitter:
    """Collects tables for one command and writes them at the end."""

    def __init__(self, cfg: dict, command: str):
        self.cfg, self.command = cfg, command
        self.hash = config_hash(cfg, command)
        self.out = cfg["out"]
        os.makedirs(self.out, exist_ok=True)
        if not os.access(self.out, os.W_OK):
            raise UsageError(f"output directory {self.out!r} is not writable")
        self.files = []

    def table(self, name: str, fields: list, rows: list) -> str:
        if self.cfg["format"] == "json":
            path = os.path.join(self.out, name + ".json")
            doc = {"config_hash": self.hash, "fields": fields,
                   "rows": [[v if isinstance(v, str) else float(v) for v in r] for r in rows]}
            text = json.dumps(doc, indent=1, allow_nan=True) + "\n"
        else:
            path = os.path.join(self.out, name + ".csv")
            lines = [f"# kinklab {self.command} config={self.hash}", ",".join(fields)]
            lines += [",".join(_fmt(v) for v in r) for r in rows]
            text = "\n".join(lines) + "\n"
        _atomic_write(path, text)
        self.files.append(path)
        return path

    def script(self, name: str, text: str) -> None:
        path = os.path.join(self.out, name)
        _atomic_write(path, text)
        self.files.append(path)

    def finish(self) -> None:
        doc = {"command": self.command, "config_hash": self.hash, **self.cfg}
        _atomic_write(os.path.join(self.out, "run.json"),
                      json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _integrator(cfg) -> IntegratorConfig:
    return IntegratorConfig(rtol=cfg["rtol"], atol=cfg["atol"], X_max=cfg["X_max"],
                            max_time=cfg["max_time"])


def _eps_list(cfg) -> list[float]:
    if cfg["eps_grid"] is not None:
        return cfg["eps_grid"]
    if cfg["eps"] is None:
        raise UsageError("eps or eps_grid is required")
    return [cfg["eps"]]


def _h_list(cfg) -> list[float]:
    if cfg["h_grid"] is not None:
        return cfg["h_grid"]
    if cfg["h"] is None:
        raise UsageError("h or h_grid is required")
    return [cfg["h"]]


def _params(eps, cfg):
    return make_params(eps, cfg["coupling_scale"])


_PLOT_CURVES = '''"""Plot the section traces written by `kinklab curves`."""
import csv
import sys

import matplotlib.pyplot as plt


def load(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(l for l in fh if not l.startswith("#"))]
    head, body = rows[0], rows[1:]
    return {k: [r[i] for r in body] for i, k in enumerate(head)}


fig, ax = plt.subplots(figsize=(5, 5))
for name, style in (("curve_stable.csv", "-"), ("curve_unstable.csv", "--")):
    d = load(name)
    b = [float(v) for v in d["b"]] + [float(d["b"][0])]
    B = [float(v) for v in d["B"]] + [float(d["B"][0])]
    ax.plot(b, B, style, label=name[:-4])
pts = load("points.csv")
for side, b, B in zip(pts["side"], pts["b"], pts["B"]):
    ax.plot(float(b), float(B), "o", label=f"P {side}")
ax.set_xlabel("b")
ax.set_ylabel("B")
ax.set_aspect("equal")
ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "curves.png", dpi=150)
'''

_PLOT_TABLE = '''"""Plot columns {y} against {x} from {src}."""
import csv
import sys

import matplotlib.pyplot as plt

with open("{src}") as fh:
    rows = list(csv.DictReader(l for l in fh if not l.startswith("#")))
fig, ax = plt.subplots()
ax.{plot}([float(r["{x}"]) for r in rows], [float(r["{y}"]) for r in rows], "o-")
ax.set_xlabel("{x}")
ax.set_ylabel("{y}")
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "{stem}.png", dpi=150)
'''


def _plot_table(em, src, x, y, plot="plot"):
    stem = src.rsplit(".", 1)[0]
    if em.cfg["format"] == "csv":
        em.script(f"plot_{stem}.py", _PLOT_TABLE.format(src=src, x=x, y=y, plot=plot, stem=stem))


# --- commands ------------------------------------------------------------------

def cmd_params(cfg, em):
    rows = []
    for eps in _eps_list(cfg):
        p = _params(eps, cfg)
        pr = predictors(p)
        row = [eps, p.delta, p.Omega, p.omega, p.coupling, pr.d0, pr.hs, pr.hc, pr.vc]
        rows.append(row)
        print(f"eps={eps:g} omega={p.omega:.6g} d0={pr.d0:.6e} hs={pr.hs:.6e} "
              f"hc={pr.hc:.6e} vc={pr.vc:.6e}")
    em.table("params", ["eps", "delta", "Omega", "omega", "coupling", "d0", "hs", "hc", "vc"], rows)


def cmd_simulate(cfg, em):
    eps = _eps_list(cfg)[0]
    p = _params(eps, cfg)
    ic = _integrator(cfg)
    h = _h_list(cfg)[0]
    s0 = manifolds._tail_state(-ic.X_max, 0.0, 0.0, h, p)
    traj = integrate(s0, p, ic, cfg["t_end"], record_stride=cfg["stride"])
    rows = [list(r) + [PhaseState.from_array(r[1:]).energy(p)] for r in traj.samples]
    em.table("trajectory", ["t", "X", "Z", "b", "B", "H"], rows)
    s = traj.state
    print(f"eps={eps:g} h={h:g} t={traj.t:.6g} X={s.X:.6g} Z={s.Z:.6g} "
          f"steps={traj.n_accepted} drift={traj.energy_drift:.3e}")
    _plot_table(em, "trajectory.csv", "X", "Z")


def cmd_splitting(cfg, em):
    ic = _integrator(cfg)
    rows = []
    for eps in _eps_list(cfg):
        r = criticality.measure_splitting(eps, ic, cfg["coupling_scale"])
        rows.append(criticality.splitting_record(r))
        print(f"eps={eps:g} d={r.d_meas:.8e} d0={r.d_pred:.8e} ratio={r.ratio:.6f} "
              f"|c1|={r.melnikov_abs:.8e}")
    em.table("splitting", criticality.SPLITTING_FIELDS, rows)
    _plot_table(em, "splitting.csv", "eps", "d_meas", plot="semilogy")


def cmd_melnikov(cfg, em):
    method = cfg["method"]
    if method not in ("residue", "quadrature", "both"):
        raise UsageError("method must be residue, quadrature or both")
    rows = []
    for eps in _eps_list(cfg):
        p = _params(eps, cfg)
        res = []
        if method in ("residue", "both"):
            res.append(melnikov.melnikov_residue(p))
        if method in ("quadrature", "both"):
            res.append(melnikov.melnikov_quadrature(p, cfg["tol"]))
        for r in res:
            rows.append([eps, r.method, r.c1.real, r.c1.imag, r.error_estimate])
            print(f"eps={eps:g} method={r.method} c1={r.c1.real:.3e}{r.c1.imag:+.16e}i "
                  f"err={r.error_estimate:.2e}")
    em.table("melnikov", ["eps", "method", "re_c1", "im_c1", "err_est"], rows)


def cmd_curves(cfg, em):
    eps = _eps_list(cfg)[0]
    p = _params(eps, cfg)
    ic = _integrator(cfg)
    h = _h_list(cfg)[0]
    k1 = cfg["kappa1"]
    if not 0.0 <= k1 < h:
        raise UsageError("need 0 <= kappa1 < h")
    cc = criticality._curve_cfg(ic, cfg["curve_x_max"])
    Cs = manifolds.stable_curve(k1, h - k1, p, cc, cfg["n_tau"])
    Cu = Cs.mirror()
    pu, ps = manifolds.unstable_point(h, p, ic), manifolds.stable_point(h, p, ic)
    em.table("curve_stable", ["tau", "b", "B"], [[t, b, B] for t, b, B in zip(Cs.tau, Cs.b, Cs.B)])
    em.table("curve_unstable", ["tau", "b", "B"], [[t, b, B] for t, b, B in zip(Cu.tau, Cu.b, Cu.B)])
    em.table("points", ["h", "side", "b", "B"], [[P.h, P.side, P.b, P.B] for P in (pu, ps)])
    d, inside = manifolds.point_curve_relation(pu, Cs, refine="fourier")
    print(f"eps={eps:g} h={h:g} P_u=({pu.b:.6e},{pu.B:.6e}) signed_distance={d:.6e} "
          f"inside={inside} crossings={len(manifolds.curve_intersections(Cu, Cs))}")
    if cfg["format"] == "csv":
        em.script("plot_curves.py", _PLOT_CURVES)


def cmd_critical(cfg, em):
    ic = _integrator(cfg)
    which = cfg["which"]
    if which not in ("hc", "hs", "both"):
        raise UsageError("which must be hc, hs or both")
    cc = criticality._curve_cfg(ic, cfg["curve_x_max"])
    rows = []
    for eps in _eps_list(cfg):
        p = _params(eps, cfg)
        hc = hs = None
        if which in ("hc", "both"):
            hc = criticality.find_hc(p, ic, rel_width=cfg["rel_width"], n_tau=cfg["n_tau"],
                                     curve_x_max=cfg["curve_x_max"])
        if which in ("hs", "both"):
            hs = criticality.find_hs(p, cc, rel_width=cfg["rel_width"], n_tau=cfg["n_tau"])
        pr = predictors(p)
        rec = criticality.critical_record(eps, hc, hs, pr)
        rows.append(rec)
        print(f"eps={eps:g} h_c={rec[1]:.6e} (ratio {rec[3]:.4f}) h_s={rec[4]:.6e} "
              f"(ratio {rec[4] / pr.hs:.4f})")
    em.table("critical", criticality.CRITICAL_FIELDS, rows)
    _plot_table(em, "critical.csv", "eps", "ratio")


def cmd_vout(cfg, em):
    eps = _eps_list(cfg)[0]
    p = _params(eps, cfg)
    ic = _integrator(cfg)
    hc = criticality.find_hc_shooting(p, ic)
    vc = 4.0 * math.sqrt(hc.h)
    rows = criticality.vf_scan(p, ic, vc, cfg["points"], cfg["spread"])
    vf = [r.v_f for r in rows]
    if any(not (b > a) for a, b in zip(vf, vf[1:])):
        raise criticality.InconsistencyError(f"v_f is not increasing in v_i: {vf}")
    for r in rows:
        print(f"eps={r.eps:g} v_i={r.v_i:.8e} outcome={r.outcome} v_f={r.v_f:.6e} "
              f"pred={r.v_f_pred:.6e}")
    em.table("vout", criticality.VOUT_FIELDS, [criticality.vout_record(r) for r in rows])
    _plot_table(em, "vout.csv", "v_i", "v_f")


_DISPATCH = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kinklab", description="Kink-defect manifold toolkit.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value file or run.json")
        for key, (conv, _) in _KEYS.items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, default=None,
                            type=str if conv is None else conv)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    try:
        file_values = read_config(ns.config) if ns.config else {}
        cfg = resolve_config(file_values, flags)
        em = Emitter(cfg, ns.command)
        _DISPATCH[ns.command](cfg, em)
        em.finish()
    except (UsageError, DomainError, OSError) as exc:
        print(f"kinklab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BracketError as exc:
        print(f"kinklab: bracketing error: {exc}", file=sys.stderr)
        return EXIT_BRACKET
    except (AccuracyError, IntegrationError, KinklabError) as exc:
        print(f"kinklab: accuracy error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
