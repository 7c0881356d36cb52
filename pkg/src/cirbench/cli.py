"""Command-line front end.

Wires configuration (presets, key=value config files, flags) to the
experiment and theory operations and writes reproducible tabular output.
Every output file starts with a comment header carrying the package
version and the full resolved config, enough to re-run the experiment
exactly; the thread count is deliberately not part of the header because
results never depend on it.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, dataclass, fields, replace

from . import __version__, experiments, theory
from .model import CirParams, feller_ratio, make_grid, validate
from .rng import StreamKey
from .schemes import SchemeKind, simulate_path

PRESET_KS = {
    "fig1a": 2.0,
    "fig1b": 4.0,
    "fig1c": 6.0,
    "fig1d": 8.0,
    "fig1e": 16.0,
    "fig1f": 32.0,
    "fig1g": 48.0,
    "fig1h": 64.0,
}

_SCHEMES = {
    "fte": SchemeKind.FULL_TRUNCATION,
    "partial": SchemeKind.PARTIAL_TRUNCATION,
    "reflection": SchemeKind.REFLECTION,
    "exact": SchemeKind.EXACT,
}

_DEFAULT_N_LIST = (16, 32, 64, 128, 256, 512)


def presets() -> dict[str, CirParams]:
    """The eight figure configurations: v0=theta=0.02, xi=0.8, T=1, k varying."""
    return {name: CirParams(v0=0.02, k=k, theta=0.02, xi=0.8, T=1.0) for name, k in PRESET_KS.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run configuration; round-trips through text exactly."""

    v0: float = 0.02
    k: float = 64.0
    theta: float = 0.02
    xi: float = 0.8
    horizon: float = 1.0
    scheme: str = "fte"
    n_list: tuple = _DEFAULT_N_LIST
    p_list: tuple = (1.0,)
    paths: int = 100_000
    seed: int = 42

    def params(self) -> CirParams:
        return validate(CirParams(v0=self.v0, k=self.k, theta=self.theta, xi=self.xi, T=self.horizon))

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                lines.append(f"{f.name}={','.join(_fmt(v) for v in value)}")
            else:
                lines.append(f"{f.name}={_fmt(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return replace(cls(), **_parse_config_text(text))


def _fmt(x) -> str:
    # repr of a float is the shortest string that parses back exactly
    if isinstance(x, bool):
        raise TypeError("boolean has no place in output")
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _parse_int(name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"config key {name}: expected an integer, got {raw!r}") from None


def _parse_float(name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"config key {name}: expected a number, got {raw!r}") from None


def _parse_config_text(text: str) -> dict:
    known = {f.name for f in fields(ExperimentConfig)}
    out: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw_line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key == "n_list":
            out[key] = tuple(_parse_int(key, v) for v in raw.split(","))
        elif key == "p_list":
            out[key] = tuple(_parse_float(key, v) for v in raw.split(","))
        elif key in ("paths", "seed"):
            out[key] = _parse_int(key, raw)
        elif key == "scheme":
            if raw not in _SCHEMES:
                raise ValueError(f"config line {lineno}: unknown scheme {raw!r}")
            out[key] = raw
        else:
            out[key] = _parse_float(key, raw)
    return out


def _parse_int_list(raw: str) -> tuple:
    return tuple(int(v) for v in raw.split(","))


def _parse_float_list(raw: str) -> tuple:
    return tuple(float(v) for v in raw.split(","))


def _resolve_config(args) -> ExperimentConfig:
    values = asdict(ExperimentConfig())
    preset = getattr(args, "preset", None)
    if preset is not None:
        if preset not in PRESET_KS:
            raise ValueError(f"unknown preset {preset!r}; available: {', '.join(PRESET_KS)}")
        values["k"] = PRESET_KS[preset]
    config_path = getattr(args, "config", None)
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            values.update(_parse_config_text(fh.read()))
    for name in ("v0", "k", "theta", "xi"):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if getattr(args, "horizon", None) is not None:
        values["horizon"] = args.horizon
    if getattr(args, "n_list", None) is not None:
        values["n_list"] = args.n_list
    if getattr(args, "p", None) is not None:
        values["p_list"] = args.p
    if getattr(args, "paths", None) is not None:
        values["paths"] = args.paths
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    if getattr(args, "scheme", None) is not None:
        values["scheme"] = args.scheme
    # --nu pins the Feller ratio: k is derived from the resolved theta, xi
    if getattr(args, "nu", None) is not None:
        values["k"] = args.nu * values["xi"] ** 2 / (2.0 * values["theta"])
    values["n_list"] = tuple(values["n_list"])
    values["p_list"] = tuple(values["p_list"])
    cfg = ExperimentConfig(**values)
    cfg.params()
    return cfg


def _resolve_threads(args) -> int:
    threads = getattr(args, "threads", None)
    if threads is None:
        env = os.environ.get("CIRBENCH_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValueError(f"CIRBENCH_THREADS must be an integer, got {env!r}") from None
        else:
            threads = 1
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def _header_lines(cfg: ExperimentConfig, extra: dict | None = None) -> list:
    lines = [f"# cirbench {__version__}"]
    lines += [f"# {ln}" for ln in cfg.to_text().splitlines()]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}={value}")
    return lines


def _emit(lines, out_path) -> None:
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _emit_scalar(lines, out_path, header) -> None:
    # stdout stays bare for shell composition; files carry the header
    _emit((header + lines) if out_path is not None else lines, out_path)


def _cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    if args.paths is None:
        cfg = replace(cfg, paths=1)
    kind = _SCHEMES[cfg.scheme]
    grid = make_grid(cfg.horizon, args.n)
    params = cfg.params()
    lines = _header_lines(cfg, {"n": args.n})
    lines.append("path,node,t,tilde_v,bar_v,negative")
    for i in range(cfg.paths):
        result = simulate_path(kind, params, grid, StreamKey(cfg.seed, i))
        for n in range(grid.N + 1):
            lines.append(
                f"{i},{n},{_fmt(float(result.nodes[n]))},{_fmt(float(result.tilde[n]))},"
                f"{_fmt(float(result.bar[n]))},{int(result.negative[n])}"
            )
    _emit(lines, args.out)
    return 0


def _error_table_lines(cfg: ExperimentConfig, estimates) -> list:
    lines = ["N,p,value,std_err,n_paths"]
    for e in estimates:
        lines.append(f"{e.N},{_fmt(e.p)},{_fmt(e.value)},{_fmt(e.std_err)},{e.n_paths}")
    return lines


def _cmd_strong_error(args) -> int:
    cfg = _resolve_config(args)
    threads = _resolve_threads(args)
    extra = {}
    if args.ref_multiplier is not None:
        extra["ref_multiplier"] = args.ref_multiplier
    estimates = experiments.coupled_error_table(
        cfg.params(), cfg.n_list, cfg.p_list, cfg.paths, cfg.seed, threads=threads, ref_multiplier=args.ref_multiplier
    )
    _emit(_header_lines(cfg, extra) + _error_table_lines(cfg, estimates), args.out)
    return 0


def _cmd_rate(args) -> int:
    cfg = _resolve_config(args)
    threads = _resolve_threads(args)
    extra = {}
    if args.ref_multiplier is not None:
        extra["ref_multiplier"] = args.ref_multiplier
    estimates = experiments.coupled_error_table(
        cfg.params(), cfg.n_list, cfg.p_list, cfg.paths, cfg.seed, threads=threads, ref_multiplier=args.ref_multiplier
    )
    lines = _header_lines(cfg, extra) + _error_table_lines(cfg, estimates)
    fits = []
    for p in cfg.p_list:
        fit = experiments.fit_rate([e for e in estimates if e.p == p])
        fits.append((p, fit))
        lines.append(
            f"# fit p={_fmt(p)}: slope={_fmt(fit.slope)} intercept={_fmt(fit.intercept)} "
            f"slope_std_err={_fmt(fit.slope_std_err)} r_squared={_fmt(fit.r_squared)}"
        )
    _emit(lines, args.out)
    if args.plot_out is not None:
        plot_lines = _header_lines(cfg, extra)
        for i, (p, fit) in enumerate(fits):
            if i:
                plot_lines.append("")
            plot_lines.append(f"# series p={_fmt(p)} (log2 N, log2 value)")
            for x, y in fit.points:
                plot_lines.append(f"{_fmt(x)},{_fmt(y)}")
        _emit(plot_lines, args.plot_out)
    return 0


def _cmd_negativity(args) -> int:
    cfg = _resolve_config(args)
    threads = _resolve_threads(args)
    report = experiments.negativity_sweep(cfg.params(), cfg.n_list, cfg.paths, cfg.seed, threads=threads)
    lines = _header_lines(cfg)
    lines.append("N,max_node_freq,max_node_upper95,ever_neg_freq,ever_neg_upper95,bound_value,bound_raw,n_paths")
    for pt in report.points:
        bound_value = "" if pt.bound_value is None else _fmt(pt.bound_value)
        bound_raw = "" if pt.bound_raw is None else _fmt(pt.bound_raw)
        lines.append(
            f"{pt.N},{_fmt(pt.max_node_freq)},{_fmt(pt.max_node_upper95)},{_fmt(pt.ever_neg_freq)},"
            f"{_fmt(pt.ever_neg_upper95)},{bound_value},{bound_raw},{pt.n_paths}"
        )
    _emit(lines, args.out)
    return 0


def _cmd_moments(args) -> int:
    cfg = _resolve_config(args)
    threads = _resolve_threads(args)
    scheme = _SCHEMES[cfg.scheme]
    if scheme not in (SchemeKind.FULL_TRUNCATION, SchemeKind.EXACT):
        raise ValueError(f"moments supports schemes fte and exact, got {cfg.scheme!r}")
    report = experiments.moment_sweep(cfg.params(), cfg.p_list, cfg.n_list, cfg.paths, cfg.seed, scheme, threads=threads)
    lines = _header_lines(cfg)
    lines.append("scheme,p,N,value,std_err,argmax_node,n_paths")
    for pt in report.points:
        node = "" if pt.argmax_node is None else str(pt.argmax_node)
        lines.append(f"{pt.scheme},{_fmt(pt.p)},{pt.N},{_fmt(pt.value)},{_fmt(pt.std_err)},{node},{pt.n_paths}")
    _emit(lines, args.out)
    return 0


def _cmd_presets(args) -> int:
    lines = ["name,k,theta,xi,v0,horizon,nu"]
    for name, params in presets().items():
        lines.append(
            f"{name},{_fmt(params.k)},{_fmt(params.theta)},{_fmt(params.xi)},"
            f"{_fmt(params.v0)},{_fmt(params.T)},{_fmt(feller_ratio(params))}"
        )
    _emit(lines, args.out)
    return 0


def _theory_header(extra: dict) -> list:
    lines = [f"# cirbench {__version__}"]
    lines += [f"# {key}={value}" for key, value in extra.items()]
    return lines


def _cmd_theory_nu_bar(args) -> int:
    value = theory.nu_bar(args.nu)
    _emit_scalar([f"{value:.6g}"], args.out, _theory_header({"nu": _fmt(args.nu)}))
    return 0


def _cmd_theory_constants(args) -> int:
    fd = theory.derived_constants(args.nu)
    lines = [
        f"nu={_fmt(fd.nu)}",
        f"nu_bar={_fmt(fd.nu_bar)}",
        f"phi_nu={_fmt(fd.phi_nu)}",
        f"eta_nu={_fmt(fd.eta_nu)}",
        f"epsilon={_fmt(fd.epsilon)}",
    ]
    _emit_scalar(lines, args.out, _theory_header({"nu": _fmt(args.nu)}))
    return 0


def _cmd_theory_sequences(args) -> int:
    cfg = _resolve_config(args)
    if args.alpha is not None:
        alpha = args.alpha
        dt = args.dt
        if dt is None:
            raise ValueError("--dt is required when --alpha is given explicitly")
    else:
        alpha = theory.alpha_n(cfg.k, cfg.horizon, args.n)
        dt = cfg.horizon / args.n
    if args.n > 10**7:
        raise ValueError(f"sequence length is capped at 10^7, got {args.n}")

    # stream row by row; long sequences never materialize in memory
    def rows():
        yield from _header_lines(cfg, {"alpha": _fmt(alpha), "dt": _fmt(dt), "n": args.n})
        yield "j,c,a_recursion,a_transform"
        denom = cfg.xi * cfg.xi * dt
        a = 0.0
        for j, c in enumerate(theory.iter_c(alpha)):
            if j > args.n:
                break
            if j == 1:
                a = 2.0 * alpha * alpha / denom
            elif j > 1:
                a = 2.0 * alpha * a - 0.5 * a * a * denom
            yield f"{j},{_fmt(c)},{_fmt(a)},{_fmt(2.0 * (alpha - c) / denom)}"

    if args.out is None:
        for row in rows():
            sys.stdout.write(row + "\n")
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows():
                fh.write(row + "\n")
    return 0


def _cmd_theory_bound(args) -> int:
    cfg = _resolve_config(args)
    bound = theory.negativity_bound(cfg.params(), args.n)
    lines = [
        f"value={_fmt(bound.value)}",
        f"raw={_fmt(bound.raw)}",
        f"exponent={_fmt(bound.exponent)}",
        f"constant={_fmt(bound.constant)}",
    ]
    _emit_scalar(lines, args.out, _header_lines(cfg, {"n": args.n}))
    return 0


def _cmd_theory_beta(args) -> int:
    interval = theory.beta_feasible_interval(args.nu, args.q)
    header = _theory_header({"nu": _fmt(args.nu), "q": _fmt(args.q)})
    _emit_scalar([f"lo={_fmt(interval.lo)}", f"hi={_fmt(interval.hi)}"], args.out, header)
    return 0


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--nu", type=float, help="Feller ratio; derives k from theta and xi")
    group.add_argument("--k", type=float, help="mean-reversion speed")
    parser.add_argument("--theta", type=float, help="long-run mean")
    parser.add_argument("--xi", type=float, help="volatility of volatility")
    parser.add_argument("--v0", type=float, help="initial value")
    parser.add_argument("--horizon", type=float, help="time horizon T")
    parser.add_argument("--preset", help=f"named config ({', '.join(PRESET_KS)})")
    parser.add_argument("--config", help="key=value config file; flags override it")


def _add_run_flags(parser: argparse.ArgumentParser, with_threads: bool = True) -> None:
    parser.add_argument("--paths", type=int, help="Monte Carlo path count")
    parser.add_argument("--seed", type=int, help="stream seed")
    parser.add_argument("--out", help="output file (default: stdout)")
    if with_threads:
        parser.add_argument("--threads", type=int, help="worker threads (env CIRBENCH_THREADS, default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cirbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cirbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write full trajectories of one scheme")
    _add_model_flags(p)
    _add_run_flags(p, with_threads=False)
    p.add_argument("--scheme", choices=sorted(_SCHEMES), help="scheme (default fte)")
    p.add_argument("--n", type=int, default=16, help="step count (default 16)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("strong-error", help="coupled-grid error table over N and p")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--n-list", dest="n_list", type=_parse_int_list, help="comma-separated step counts")
    p.add_argument("--p", type=_parse_float_list, help="comma-separated norm orders (default 1)")
    p.add_argument("--ref-multiplier", dest="ref_multiplier", type=int, help="compare against N*mult reference instead of 2N")
    p.set_defaults(func=_cmd_strong_error)

    p = sub.add_parser("rate", help="error table plus fitted log-log slope")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--n-list", dest="n_list", type=_parse_int_list, help="comma-separated step counts")
    p.add_argument("--p", type=_parse_float_list, help="comma-separated norm orders (default 1)")
    p.add_argument("--ref-multiplier", dest="ref_multiplier", type=int, help="compare against N*mult reference instead of 2N")
    p.add_argument("--plot-out", dest="plot_out", help="also write (log2 N, log2 value) series to this file")
    p.set_defaults(func=_cmd_rate)

    p = sub.add_parser("negativity", help="negativity frequency sweep for the truncated scheme")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--n-list", dest="n_list", type=_parse_int_list, help="comma-separated step counts")
    p.set_defaults(func=_cmd_negativity)

    p = sub.add_parser("moments", help="moment stability sweep (fte or exact)")
    _add_model_flags(p)
    _add_run_flags(p)
    p.add_argument("--n-list", dest="n_list", type=_parse_int_list, help="comma-separated step counts")
    p.add_argument("--p", type=_parse_float_list, help="comma-separated moment orders")
    p.add_argument("--scheme", choices=["fte", "exact"], help="scheme (default fte)")
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("presets", help="list the named figure configurations")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_presets)

    p = sub.add_parser("theory", help="closed-form constants, sequences, and bounds")
    tsub = p.add_subparsers(dest="action", required=True)

    t = tsub.add_parser("nu-bar", help="threshold constant for a given nu")
    t.add_argument("--nu", type=float, required=True)
    t.add_argument("--out", help="output file (default: stdout)")
    t.set_defaults(func=_cmd_theory_nu_bar)

    t = tsub.add_parser("constants", help="nu_bar, phi, eta, epsilon for a given nu")
    t.add_argument("--nu", type=float, required=True)
    t.add_argument("--out", help="output file (default: stdout)")
    t.set_defaults(func=_cmd_theory_constants)

    t = tsub.add_parser("sequences", help="c and a sequences as CSV")
    _add_model_flags(t)
    t.add_argument("--n", type=int, required=True, help="sequence length N")
    t.add_argument("--alpha", type=float, help="use this alpha instead of alpha_N(k, T, N)")
    t.add_argument("--dt", type=float, help="step size for the a-sequence (required with --alpha)")
    t.add_argument("--out", help="output file (default: stdout)")
    t.set_defaults(func=_cmd_theory_sequences)

    t = tsub.add_parser("bound", help="negativity probability bound for model params and N")
    _add_model_flags(t)
    t.add_argument("--n", type=int, required=True, help="step count N")
    t.add_argument("--out", help="output file (default: stdout)")
    t.set_defaults(func=_cmd_theory_bound)

    t = tsub.add_parser("beta-interval", help="feasible beta interval for (nu, q)")
    t.add_argument("--nu", type=float, required=True)
    t.add_argument("--q", type=float, required=True)
    t.add_argument("--out", help="output file (default: stdout)")
    t.set_defaults(func=_cmd_theory_beta)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
