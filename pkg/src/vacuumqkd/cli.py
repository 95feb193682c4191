"""Command-line front end: figure and table reproduction plus the protocol simulator.

Exit codes: 0 success or protocol accept, 1 usage or internal error, 2 protocol abort.

Every flag may also be given in a ``--config`` file of ``key = value`` lines
(``#`` starts a comment; keys are flag names without leading dashes, with
``-`` or ``_``). Repeatable flags take comma-free repeated keys. Command-line
flags override the file.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import correlations as corr
from . import gaussian as gq
from . import labframe as lf
from .field import make_pair
from .protocol import ProtocolConfig, run_protocol

EXIT_OK, EXIT_ERROR, EXIT_ABORT = 0, 1, 2

FIG1_COLUMNS = ("omega_do", "squeeze_exact", "squeeze_approx", "purity_exact", "purity_approx")
FIG1_RANGES = {"a": (10e9, 100e9), "b": (2e9, 20e9)}
TABLE1_DIGITS = 6
TABLE1_COLUMNS = ("tau_o_s", "omega_i_rad_s", "omega_f_rad_s", "delta_t_s", "n_bar_at_Tmax")
FIG3_COLUMNS = ("curve", "omega_do", "a", "z_m", "eta", "i_ab", "chi_be", "key_rate")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonneg(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _fraction(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text!r}")
    return v


def _unit_interval(text):
    v = float(text)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text!r}")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _count(text):
    v = int(float(text))
    if v < 1:
        raise argparse.ArgumentTypeError("expected a positive count")
    return v


def _source(text):
    try:
        omega, a = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("source must be OMEGA:A") from exc
    if omega <= 0 or a <= 0:
        raise argparse.ArgumentTypeError("source frequencies must be positive")
    return omega, a


def fmt(x, digits: int = 9) -> str:
    """Locale-independent scientific notation with ``digits`` significant digits."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{float(x):.{digits - 1}e}"


def render(columns, rows, form: str, digits: int = 9) -> str:
    if form == "json":
        return json.dumps([dict(zip(columns, r)) for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(fmt(v, digits) for v in r) + "\n")
    return buf.getvalue()


def write_output(text: str, path: str | None):
    """Write to ``path`` atomically (temp file then rename), or to stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fig1_rows(args):
    preset = corr.FIG1_PRESETS[args.preset]
    a = args.a if args.a is not None else preset["a"]
    d_w = args.d_width if args.d_width is not None else preset["d_width"]
    s_w = args.s_width if args.s_width is not None else preset["s_width"]
    lo, hi = FIG1_RANGES[args.preset]
    lo = args.omega_min if args.omega_min is not None else lo
    hi = args.omega_max if args.omega_max is not None else hi
    if hi < lo:
        raise UsageError("omega-max must not be below omega-min")
    grid = np.linspace(lo, hi, args.points) if args.points > 1 else np.array([lo])
    base = make_pair(a, float(grid[0]), d_w**2, s_w**2)
    exact = None
    if args.method in ("exact", "both"):
        spec = corr.QuadratureSpec(rel_tol=args.rel_tol)
        exact = corr.fig1_sweep(base, grid, spec, corr.Method.EXACT, workers=args.workers)
    approx = corr.fig1_sweep(base, grid, method=corr.Method.APPROXIMATE)
    rows = []
    for i, w in enumerate(grid):
        e = exact[i] if exact else None
        rows.append((float(w), e and e.squeezing, approx[i].squeezing, e and e.purity, approx[i].purity))
    return FIG1_COLUMNS, rows


def table1_rows(args):
    taus = list(lf.TABLE1_TAU_O) + list(args.tau_o or [])
    temps = list(lf.TABLE1_T_MAX) + [args.temperature] * len(args.tau_o or [])
    out = []
    for tau, temp in zip(taus, temps):
        sched = lf.chirp_profile(args.omega_do, args.a, tau, (), delta_tau_T=args.delta_tau_t, temperature=temp)
        out.append((tau, sched.omega_i, sched.omega_f, sched.delta_t, sched.occupancy))
    return TABLE1_COLUMNS, out


def fig3_rows(args):
    sources = []
    for name in args.curve or (() if args.source else ("blue", "red")):
        src = gq.FIG3_SOURCES[name]
        sources.append((name, src["omega_do"], src["a"]))
    for i, (omega, a) in enumerate(args.source or []):
        sources.append((f"custom{i + 1}", omega, a))
    if args.z_max < args.z_min:
        raise UsageError("z-max must not be below z-min")
    z = np.geomspace(args.z_min, args.z_max, args.points) if args.points > 1 else np.array([args.z_min])
    rows = []
    for name, omega, a in sources:
        for zz, eta, res in gq.fig3_sweep((omega, a), z, args.waist, args.wavelength, args.beta_rec, args.excess):
            rows.append((name, omega, a, zz, eta, res.i_ab, res.chi_be, res.key_rate))
    return FIG3_COLUMNS, rows


def protocol_cm(args) -> gq.TwoModeCovariance:
    if args.identity:
        return gq.TwoModeCovariance(np.eye(4))
    if args.from_vacuum:
        if args.a is None or args.omega is None or args.z is None:
            raise UsageError("--from-vacuum needs --a, --omega and --z")
        record = gq.approximate_record(args.omega, args.a)
        eta = gq.rayleigh_eta(args.waist, args.wavelength, args.z)
        return gq.cm_from_correlations(record, eta, args.excess)
    if args.gain is None:
        raise UsageError("choose one of --identity, --gain or --from-vacuum")
    return gq.epr_covariance(args.gain, args.eta, args.excess)


def run(args) -> int:
    if args.command == "protocol":
        if args.seed is None:
            raise UsageError("--seed is required")
        cfg = ProtocolConfig(protocol_cm(args), args.n_windows, args.reveal_fraction, args.seed,
                             args.beta_rec, args.confidence)
        tr = run_protocol(cfg, args.scheduler)
        write_output(tr.dumps() + "\n", args.output)
        d = tr.decision
        verdict = "accept" if tr.accepted else "abort"
        print(f"{verdict} sifted={tr.sifted_count} eta_hat={fmt(tr.estimated_eta)} "
              f"key_rate={fmt(d.get('key_rate'))} stderr={fmt(d.get('key_rate_stderr'))}",
              file=sys.stderr if args.output in (None, "-") else sys.stdout)
        return EXIT_OK if tr.accepted else EXIT_ABORT
    builder = {"fig1": fig1_rows, "table1": table1_rows, "fig3": fig3_rows}[args.command]
    columns, rows = builder(args)
    digits = TABLE1_DIGITS if args.command == "table1" else 9
    write_output(render(columns, rows, args.format, digits), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vacuumqkd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, tabular=True):
        sp.add_argument("--config", help="key = value file supplying defaults for any flag")
        sp.add_argument("--output", "-o", help="output file (atomic write); stdout if omitted")
        if tabular:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    f1 = sub.add_parser("fig1", help="squeezing and purity against conformal frequency")
    common(f1)
    f1.add_argument("--preset", choices=sorted(corr.FIG1_PRESETS), default="a")
    f1.add_argument("--a", type=_positive, help="scale parameter a [1/s]")
    f1.add_argument("--d-width", type=_positive, help="longitudinal frequency width [rad/s]")
    f1.add_argument("--s-width", type=_positive, help="transverse frequency width [rad/s]")
    f1.add_argument("--omega-min", type=_positive)
    f1.add_argument("--omega-max", type=_positive)
    f1.add_argument("--points", type=_count, default=20)
    f1.add_argument("--method", choices=("exact", "approx", "both"), default="both")
    f1.add_argument("--rel-tol", type=_positive, default=corr.DEFAULT_SPEC.rel_tol)
    f1.add_argument("--workers", type=_count, default=1)

    t1 = sub.add_parser("table1", help="lab-frame chirp parameters")
    common(t1)
    t1.add_argument("--a", type=_positive, default=lf.TABLE1_A)
    t1.add_argument("--omega-do", type=_positive, default=lf.TABLE1_OMEGA_DO)
    t1.add_argument("--tau-o", type=float, action="append", help="extra initial conformal time [s]")
    t1.add_argument("--temperature", type=_nonneg, default=300.0, help="background temperature for extra rows [K]")
    t1.add_argument("--delta-tau-t", type=_positive, default=lf.TABLE1_DELTA_TAU_T)

    f3 = sub.add_parser("fig3", help="secret key rate against distance")
    common(f3)
    f3.add_argument("--curve", choices=sorted(gq.FIG3_SOURCES), action="append")
    f3.add_argument("--source", type=_source, action="append", help="custom curve OMEGA:A")
    f3.add_argument("--z-min", type=_positive, default=1e3)
    f3.add_argument("--z-max", type=_positive, default=1e7)
    f3.add_argument("--points", type=_count, default=30)
    f3.add_argument("--waist", type=_positive, default=gq.FIG3_GEOMETRY["waist"])
    f3.add_argument("--wavelength", type=_positive, default=gq.FIG3_GEOMETRY["wavelength"])
    f3.add_argument("--beta-rec", type=_unit_interval, default=1.0)
    f3.add_argument("--excess", type=_nonneg, default=0.0)

    pr = sub.add_parser("protocol", help="seeded QKD protocol Monte Carlo")
    common(pr, tabular=False)
    pr.add_argument("--seed", type=_seed)
    pr.add_argument("--n-windows", type=_count, default=100_000)
    pr.add_argument("--reveal-fraction", type=_fraction, default=0.5)
    pr.add_argument("--beta-rec", type=_unit_interval, default=1.0)
    pr.add_argument("--confidence", type=_nonneg, default=3.0)
    pr.add_argument("--scheduler", choices=("interleaved", "threaded"), default="interleaved")
    src = pr.add_mutually_exclusive_group()
    src.add_argument("--identity", action="store_true", help="uncorrelated vacuum state")
    src.add_argument("--gain", type=float, help="EPR source gain G >= 1")
    src.add_argument("--from-vacuum", action="store_true", help="vacuum correlations sent over the diffraction channel")
    pr.add_argument("--eta", type=_unit_interval, default=1.0)
    pr.add_argument("--excess", type=_nonneg, default=0.0)
    pr.add_argument("--a", type=_positive)
    pr.add_argument("--omega", type=_positive)
    pr.add_argument("--z", type=_positive)
    pr.add_argument("--waist", type=_positive, default=gq.FIG3_GEOMETRY["waist"])
    pr.add_argument("--wavelength", type=_positive, default=gq.FIG3_GEOMETRY["wavelength"])
    return p


def read_config(path: str) -> list[str]:
    """Translate a key = value file into command-line tokens."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() in ("true", "yes", "on"):
                tokens.append(flag)
            elif value.lower() in ("false", "no", "off"):
                continue
            else:
                tokens.extend([flag, value])
    return tokens


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            # File values first so explicit flags win on re-parse.
            args = parser.parse_args([argv[0]] + read_config(args.config) + argv[1:])
        return run(args)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    except (UsageError, ValueError, OSError) as exc:
        print(f"vacuumqkd: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
