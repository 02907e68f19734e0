"""Command-line front end.

Every subcommand prints its result as JSON on stdout.  With ``--out DIR`` the
result (plus any CSV tables) is also written to DIR together with a
``manifest.json`` run manifest.  Errors go to stderr as one JSON object;
exit codes are 0 (success), 2 (invalid input), 3 (numerical failure) and
64 (unknown subcommand).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DetwaveError, InputError, NoThreshold, ValidationError
from .model import SCHEMA_VERSION, ModelConfig, p0, validate_config

log = logging.getLogger("detwave")

SUBCOMMANDS = ("rh", "cj", "cjdiagram", "phase", "profile", "melnikov", "weakspeed", "evans",
               "index", "winding", "riemann", "cjshift", "simulate")
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_UNKNOWN = 0, 2, 3, 64
DIGITS = 12


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v: float) -> float | None:
    if not math.isfinite(v):
        return None
    return float(f"{v:.{DIGITS}g}")


def clean(obj):
    """JSON-ready copy with every float rounded to 12 significant digits."""
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _fmt(obj.real), "im": _fmt(obj.imag)}
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return clean(obj.to_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=False)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else f"{float(v):.{DIGITS}g}"
    return str(v)


class Output:
    """Collects result files for one run and writes the manifest."""

    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        self.files: list[str] = []
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows):
        if self.dir is None:
            return
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])
        self.files.append(str(path))

    def json(self, name: str, obj):
        if self.dir is None:
            return
        path = self.dir / name
        path.write_text(dumps(obj) + "\n")
        self.files.append(str(path))

    def manifest(self, args, cfg: ModelConfig, config_text: str | None, wall: float):
        params = {k: v for k, v in vars(args).items() if k not in ("func",)}
        man = {
            "tool": "detwave", "version": __version__, "subcommand": args.command,
            "config_path": args.config,
            "config_sha256": hashlib.sha256(config_text.encode()).hexdigest() if config_text else None,
            "config": cfg.to_dict(), "parameters": params,
            "outputs": list(self.files), "wall_time_s": wall,
        }
        if self.dir is None:
            log.info("manifest %s", json.dumps(clean(man)))
            return man
        path = self.dir / "manifest.json"
        path.write_text(dumps(man) + "\n")
        return man


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def load_config(args) -> tuple[ModelConfig, str | None]:
    text = None
    if args.config:
        try:
            text = Path(args.config).read_text()
            data = json.loads(text)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {data.get('schema_version')!r}")
        cfg = ModelConfig.from_dict(data)
    else:
        cfg = p0()
    over = {}
    if args.q is not None:
        over["q"] = args.q
    if args.k is not None:
        over["k"] = args.k
    cfg = cfg.replace(**over) if over else cfg
    ig = cfg.ignition
    ig_over = {}
    if args.ui is not None:
        ig_over["u_i"] = args.ui
    if args.usup is not None:
        ig_over["u_sup"] = args.usup
    if args.amplitude is not None:
        ig_over["amplitude"] = args.amplitude
    if ig_over:
        if ig.mode != "polynomial":
            raise ValidationError("ignition overrides apply to the polynomial ignition only")
        import dataclasses
        cfg = cfg.replace(ignition=dataclasses.replace(ig, **ig_over))
    return validate_config(cfg), text


def _executor(jobs: int):
    return ProcessPoolExecutor(max_workers=jobs) if jobs and jobs > 1 else None


def _map(jobs: int):
    ex = _executor(jobs)
    if ex is None:
        return map, None
    return ex.map, ex


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

def build_wave(cfg: ModelConfig, kind: str, u_plus: float, s: float | None):
    from .profiles import classify_wave, find_weak_detonation_speed, rh_states

    if kind == "strong":
        if s is None:
            raise ValidationError("--s is required for a strong detonation")
        return classify_wave(cfg, rh_states(cfg, u_plus, s).strong, u_plus, s)
    if kind == "weak":
        if s is None:
            s = find_weak_detonation_speed(cfg, u_plus)
        return classify_wave(cfg, rh_states(cfg, u_plus, s).weak, u_plus, s)
    if kind == "deflagration":
        if s is None:
            raise ValidationError("--s is required for a deflagration")
        return classify_wave(cfg, rh_states(cfg, u_plus, s, branch="deflagration").weak, u_plus, s)
    raise ValidationError(f"unknown wave kind {kind!r}")


def build_profile(cfg: ModelConfig, kind: str, u_plus: float, s: float | None, h: float = 0.01):
    from .profiles import compute_profile
    return compute_profile(cfg, build_wave(cfg, kind, u_plus, s), h=h)


def _evans_chunk(cfg_dict, kind, u_plus, s, L_scale, lams):
    from .evans import Evans
    prof = build_profile(ModelConfig.from_dict(cfg_dict), kind, u_plus, s)
    return Evans(prof, L_scale=L_scale)(np.asarray(lams))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rh(args, cfg, out):
    from .profiles import rh_states
    r = rh_states(cfg, args.uplus, args.s, branch=args.branch)
    return {"u_plus": args.uplus, "s": args.s, "branch": r.branch, "strong": r.strong, "weak": r.weak}


def cmd_cj(args, cfg, out):
    from .profiles import cj_speeds, cj_states
    s_det, s_def = cj_speeds(cfg, args.uplus)
    u_det, u_def = cj_states(cfg, args.uplus)
    return {"u_plus": args.uplus, "s_detonation": s_det, "s_deflagration": s_def,
            "u_minus_detonation": u_det, "u_minus_deflagration": u_def}


def _diagram_row(cfg, u_plus, s):
    from .profiles import cj_diagram
    return cj_diagram(cfg, u_plus, [s])[0]


def cmd_cjdiagram(args, cfg, out):
    s_grid = np.linspace(args.smin, args.smax, args.n)
    mapper, ex = _map(args.jobs)
    try:
        rows = list(mapper(_diagram_row, [cfg] * len(s_grid), [args.uplus] * len(s_grid), s_grid))
    finally:
        if ex is not None:
            ex.shutdown()
    out.csv("cjdiagram.csv", ["s", "u_minus_strong", "u_minus_weak"], rows)
    return {"u_plus": args.uplus, "rows": [list(r) for r in rows]}


def cmd_phase(args, cfg, out):
    from scipy.integrate import solve_ivp
    from .profiles import _unstable_direction, rh_states, tw_field

    F, G = tw_field(cfg, args.uplus, args.s)
    f_plus = float(cfg.flux.f(args.uplus))
    lo = cfg.ignition.u_i - 0.5
    if np.isfinite(cfg.flux.domain[0]):
        lo = max(lo, cfg.flux.domain[0] + 1e-6)
    st = rh_states(cfg, args.uplus, args.s)
    hi = st.strong + 0.5
    u = np.linspace(lo, hi, args.n)
    # F(u, z) = 0 solved for z
    z_null = 1.0 + (cfg.flux.f(u) - f_plus - args.s * (u - args.uplus)) / (args.s * cfg.q)
    out.csv("nullcline.csv", ["u", "z"], zip(u, z_null))
    orbits = {}
    v, _, _ = _unstable_direction(cfg, st.weak, args.s)
    start = np.array([st.weak, 0.0]) + 1e-7 * np.asarray(v)

    def rhs(x, y):
        return [F(y[0], y[1]), G(y[0], y[1])]

    def leave(x, y):
        return y[0] - lo
    leave.terminal = True
    sol = solve_ivp(rhs, (0.0, 200.0), start, method="Radau", rtol=1e-10, atol=1e-12,
                    events=leave, max_step=0.5)
    orbits["unstable_manifold_weak"] = sol.y.T
    out.csv("orbit_unstable.csv", ["u", "z"], sol.y.T)
    return {"u_plus": args.uplus, "s": args.s, "nullcline": np.column_stack([u, z_null]),
            "orbits": orbits, "rest_points": {"strong": st.strong, "weak": st.weak, "plus": args.uplus}}


def cmd_profile(args, cfg, out):
    prof = build_profile(cfg, args.wave, args.uplus, args.s, h=args.h)
    out.csv("profile.csv", ["x", "u", "z"], zip(prof.x, prof.u, prof.z))
    side = prof.sidecar()
    side["residual"] = prof.residual()
    side["endstate_gap"] = prof.endstate_gap()
    out.json("profile.json", side)
    return side


def cmd_melnikov(args, cfg, out):
    from .profiles import melnikov_separation, separation_partials
    s_grid = [args.s] if args.s is not None else list(np.linspace(args.smin, args.smax, args.n))
    rows = []
    for s in s_grid:
        m = melnikov_separation(cfg, args.uplus, float(s))
        row = {"s": float(s), "d": m.d, "zhat": m.zhat, "u_minus": m.u_minus}
        if args.derivative:
            row["partials"] = separation_partials(cfg, args.uplus, float(s))
        rows.append(row)
    out.csv("melnikov.csv", ["s", "d", "zhat", "u_minus"],
            [(r["s"], r["d"], r["zhat"], r["u_minus"]) for r in rows])
    return {"u_plus": args.uplus, "rows": rows}


def cmd_weakspeed(args, cfg, out):
    from .profiles import find_weak_detonation_speed, rh_states, separation
    try:
        s = find_weak_detonation_speed(cfg, args.uplus, tol=args.tol)
    except NoThreshold as exc:
        return {"u_plus": args.uplus, "case": "i", "s_hat": None, "d_at_cj": exc.d_lo}
    return {"u_plus": args.uplus, "case": "ii", "s_hat": s, "u_minus": rh_states(cfg, args.uplus, s).weak,
            "d": separation(cfg, args.uplus, s)}


def cmd_evans(args, cfg, out):
    from .evans import _upper_contour
    if args.contour:
        path = _upper_contour(args.r, args.R)
        lams = path(np.linspace(0.0, 3.0, args.n))
    else:
        re = np.linspace(args.re_min, args.re_max, args.n_re)
        im = np.linspace(args.im_min, args.im_max, args.n_im)
        lams = (re[None, :] + 1j * im[:, None]).ravel()
    chunks = np.array_split(lams, max(1, args.jobs or 1))
    ex = _executor(args.jobs)
    cfg_dict = cfg.to_dict()
    if ex is None:
        D = _evans_chunk(cfg_dict, args.wave, args.uplus, args.s, args.L_scale, lams)
    else:
        with ex:
            parts = ex.map(_evans_chunk, [cfg_dict] * len(chunks), [args.wave] * len(chunks),
                           [args.uplus] * len(chunks), [args.s] * len(chunks),
                           [args.L_scale] * len(chunks), chunks)
            D = np.concatenate(list(parts))
    rows = list(zip(lams.real, lams.imag, D.real, D.imag))
    out.csv("evans.csv", ["lam_re", "lam_im", "D_re", "D_im"], rows)
    return {"wave": args.wave, "values": [{"lam": l, "D": d} for l, d in zip(lams, D)]}


def cmd_index(args, cfg, out):
    from .evans import stability_index
    prof = build_profile(cfg, args.wave, args.uplus, args.s)
    rep = stability_index(prof, winding=args.winding, L_scale=args.L_scale)
    res = rep.to_dict()
    res["wave"] = prof.wave.to_dict()
    out.json("index.json", res)
    return res


def cmd_winding(args, cfg, out):
    from .evans import Evans, winding_number
    prof = build_profile(cfg, args.wave, args.uplus, args.s)
    n = winding_number(Evans(prof, L_scale=args.L_scale), args.r, args.R)
    return {"wave": prof.wave.to_dict(), "r": args.r, "R": args.R, "winding": n}


def cmd_riemann(args, cfg, out):
    from .riemann import check_solution, solve_riemann
    U_L, U_R = (args.uL, args.zL), (args.uR, args.zR)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = solve_riemann(cfg, U_L, U_R)
    res = sol.to_dict()
    res["problems"] = check_solution(cfg, sol, U_L, U_R)
    res["warnings"] = [str(w.message) for w in caught]
    if args.sample:
        speeds = [v for w in sol.waves for v in ((w.s,) if w.speed_range is None else w.speed_range)]
        lo, hi = (min(speeds), max(speeds)) if speeds else (-1.0, 1.0)
        pad = 0.25 * max(hi - lo, 1.0)
        xi = np.linspace(lo - pad, hi + pad, args.sample)
        u, z = sol.sample(cfg, xi, U_L)
        out.csv("riemann.csv", ["xi", "u", "z"], zip(xi, u, z))
    out.json("riemann.json", res)
    return res


def cmd_cjshift(args, cfg, out):
    from .riemann import cj_shift_report
    ks = np.geomspace(args.kmin, args.kmax, args.n)
    mapper, ex = _map(args.jobs)
    try:
        rep = cj_shift_report(cfg, args.uplus, ks, rel_tol=args.rel_tol, map_fn=mapper)
    finally:
        if ex is not None:
            ex.shutdown()
    out.csv("cjshift.csv", ["k", "case", "speed", "wave"],
            [(r["k"], r["case"], r["speed"], r["wave"]) for r in rep.rows])
    return rep.to_dict()


def cmd_simulate(args, cfg, out):
    from . import pdesim
    if args.mode == "riemann":
        rep = pdesim.riemann_asymptotic_test(cfg, (args.uL, args.zL), (args.uR, args.zR), args.T,
                                             n_cells=args.cells)
        res = {"mode": "riemann", "predicted": rep.predicted, "measured": rep.measured,
               "levels": rep.levels, "grid": rep.grid}
    else:
        prof = build_profile(cfg, args.wave, args.uplus, args.s)
        if args.mode == "decay":
            rep = pdesim.perturbation_decay_test(cfg, prof, args.amplitude, args.T, dx=args.dx)
            res = {"mode": "decay", **rep.to_dict()}
            out.csv("decay.csv", ["t", "norm", "shift"], zip(rep.times, rep.norms, rep.shifts))
        else:
            res = {"mode": "drift", **pdesim.drift_test(cfg, prof, args.T, dx=args.dx)}
    out.json("simulate.json", res)
    return res


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _wave_args(p, default="strong"):
    p.add_argument("--wave", choices=["strong", "weak", "deflagration"], default=default)
    p.add_argument("--uplus", type=float, default=0.2)
    p.add_argument("--s", type=float, default=None, help="wave speed (weak: defaults to the computed s-hat)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="model JSON with a schema_version field (default: reference instance)")
    common.add_argument("--q", type=float)
    common.add_argument("--k", type=float)
    common.add_argument("--ui", type=float, help="lower ignition threshold")
    common.add_argument("--usup", type=float, help="upper ignition threshold")
    common.add_argument("--amplitude", type=float, help="ignition amplitude")
    common.add_argument("--out", help="directory for result files and manifest.json")
    common.add_argument("--jobs", type=int, default=1)

    p = _Parser(prog="detwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=func)
        return sp

    sp = add("rh", cmd_rh, "Rankine-Hugoniot left states")
    sp.add_argument("--uplus", type=float, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--branch", choices=["detonation", "deflagration"], default="detonation")

    sp = add("cj", cmd_cj, "Chapman-Jouguet speeds")
    sp.add_argument("--uplus", type=float, required=True)

    sp = add("cjdiagram", cmd_cjdiagram, "u_- against s on both detonation branches")
    sp.add_argument("--uplus", type=float, default=0.2)
    sp.add_argument("--smin", type=float, default=1.2)
    sp.add_argument("--smax", type=float, default=2.0)
    sp.add_argument("--n", type=int, default=81)

    sp = add("phase", cmd_phase, "nullcline and unstable-manifold orbit of the profile ODE")
    sp.add_argument("--uplus", type=float, default=0.2)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--n", type=int, default=401)

    sp = add("profile", cmd_profile, "travelling-wave profile")
    _wave_args(sp)
    sp.add_argument("--h", type=float, default=0.01)

    sp = add("melnikov", cmd_melnikov, "separation function d(s)")
    sp.add_argument("--uplus", type=float, default=0.2)
    sp.add_argument("--s", type=float)
    sp.add_argument("--smin", type=float, default=1.4)
    sp.add_argument("--smax", type=float, default=1.8)
    sp.add_argument("--n", type=int, default=5)
    sp.add_argument("--derivative", action="store_true", help="add finite-difference partials")

    sp = add("weakspeed", cmd_weakspeed, "weak-detonation speed s-hat")
    sp.add_argument("--uplus", type=float, default=0.2)
    sp.add_argument("--tol", type=float, default=1e-8)

    sp = add("evans", cmd_evans, "Evans function on a grid or along the index contour")
    _wave_args(sp)
    sp.add_argument("--L-scale", dest="L_scale", type=float, default=1.0)
    sp.add_argument("--contour", action="store_true")
    sp.add_argument("--r", type=float, default=1e-3)
    sp.add_argument("--R", type=float, default=50.0)
    sp.add_argument("--n", type=int, default=121)
    sp.add_argument("--re-min", dest="re_min", type=float, default=0.0)
    sp.add_argument("--re-max", dest="re_max", type=float, default=2.0)
    sp.add_argument("--im-min", dest="im_min", type=float, default=0.0)
    sp.add_argument("--im-max", dest="im_max", type=float, default=2.0)
    sp.add_argument("--n-re", dest="n_re", type=int, default=5)
    sp.add_argument("--n-im", dest="n_im", type=int, default=5)

    sp = add("index", cmd_index, "stability index report")
    _wave_args(sp)
    sp.add_argument("--winding", action="store_true")
    sp.add_argument("--L-scale", dest="L_scale", type=float, default=1.0)

    sp = add("winding", cmd_winding, "zeros of D in the right half annulus")
    _wave_args(sp)
    sp.add_argument("--r", type=float, default=1e-3)
    sp.add_argument("--R", type=float, default=50.0)
    sp.add_argument("--L-scale", dest="L_scale", type=float, default=1.0)

    sp = add("riemann", cmd_riemann, "Riemann solution")
    for name in ("uL", "zL", "uR", "zR"):
        sp.add_argument(f"--{name}", type=float, required=True)
    sp.add_argument("--sample", type=int, default=0, help="write N samples of (x/t, u, z)")

    sp = add("cjshift", cmd_cjshift, "minimum-speed wave as k varies")
    sp.add_argument("--uplus", type=float, default=0.2)
    sp.add_argument("--kmin", type=float, default=1e-3)
    sp.add_argument("--kmax", type=float, default=10.0)
    sp.add_argument("--n", type=int, default=9)
    sp.add_argument("--rel-tol", dest="rel_tol", type=float, default=1e-3)

    sp = add("simulate", cmd_simulate, "finite-difference runs")
    sp.add_argument("--mode", choices=["decay", "drift", "riemann"], default="decay")
    _wave_args(sp)
    sp.add_argument("--amplitude-pert", dest="amplitude", type=float, default=0.01)
    sp.add_argument("--T", type=float, default=50.0)
    sp.add_argument("--dx", type=float, default=0.05)
    sp.add_argument("--cells", type=int, default=4000)
    for name in ("uL", "zL", "uR", "zR"):
        sp.add_argument(f"--{name}", type=float)
    return p


def _error(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=os.environ.get("DETWAVE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is not None and first not in SUBCOMMANDS:
        return _error("UnknownSubcommand", LookupError(f"unknown subcommand {first!r}"), EXIT_UNKNOWN)
    try:
        args = build_parser().parse_args(argv)
        cfg, text = load_config(args)
        out = Output(args.out)
        t0 = time.perf_counter()
        result = args.func(args, cfg, out)
        out.manifest(args, cfg, text, time.perf_counter() - t0)
    except InputError as exc:
        return _error("input", exc, EXIT_INPUT)
    except DetwaveError as exc:
        return _error("numerical", exc, EXIT_NUMERIC)
    except ArithmeticError as exc:
        return _error("numerical", exc, EXIT_NUMERIC)
    sys.stdout.write(dumps(result) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
