"""Command-line entry point: ``mdla {simulate,predict,stefan,fit,report}``.

Exit codes: 0 success, 2 invalid configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analytics, harness, stefan
from .core import ModelParams, read_profiles_csv, read_trajectories_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("mdla")


class ConfigError(ValueError):
    pass


# option name -> (type, default) for commands that accept --config
_SIMULATE_KEYS = {
    "mu": (float, None),
    "mode": (str, "discrete"),
    "horizon": (float, 1e5),
    "runs": (int, 100),
    "seed": (int, 0),
    "init": (str, "uniform"),
    "profile_width": (int, 0),
    "window_margin": (float, 6.0),
    "workers": (int, 1),
    "out": (str, None),
}
_STEFAN_KEYS = {
    "mu": (float, None),
    "dxi": (float, stefan.DEFAULT_DXI),
    "ds": (float, stefan.DEFAULT_DS),
    "s_end": (float, 1.0),
    "s0": (float, stefan.DEFAULT_S0),
    "xi_max": (float, stefan.DEFAULT_XI_MAX),
    "out": (str, None),
}


def _merge(args, keys):
    """File values first, then any flag given on the command line."""
    file_vals = {}
    if getattr(args, "config", None):
        try:
            file_vals = harness.parse_config(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    unknown = set(file_vals) - set(keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for k, (typ, default) in keys.items():
        v = getattr(args, k, None)
        if v is None and k in file_vals:
            v = file_vals[k]
        if v is None:
            v = default
        try:
            out[k] = None if v is None else typ(v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {v!r}") from exc
    missing = [k for k, v in out.items() if v is None and k in ("mu", "out")]
    if missing:
        raise ConfigError(f"missing required settings: {missing}")
    return out


def cmd_simulate(args):
    c = _merge(args, _SIMULATE_KEYS)
    try:
        params = ModelParams(mu=c["mu"], time_mode=c["mode"], horizon=c["horizon"], seed=c["seed"],
                             window_margin=c["window_margin"])
        init = {"uniform": harness.INIT_UNIFORM, "wave": harness.INIT_WAVE}.get(c["init"], c["init"])
        spec = harness.ExperimentSpec(params, runs=c["runs"], init=init, profile_width=c["profile_width"],
                                      out=c["out"], workers=c["workers"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    (Path(c["out"])).mkdir(parents=True, exist_ok=True)
    (Path(c["out"]) / "params.json").write_text(json.dumps({
        "params": params.to_dict(), "runs": spec.runs, "init": spec.init, "profile_width": spec.profile_width,
        "init_deficit": harness.initial_deficit(spec),
    }, indent=2))
    trajs = harness.run_ensemble(spec)
    rep = harness.compare_report(trajs, analytics.predict(params.mu, params.time_mode),
                                 init_deficit=harness.initial_deficit(spec))
    harness.write_report(rep, c["out"])
    sys.stdout.write(rep.to_text())


def cmd_predict(args):
    try:
        pred = analytics.predict(args.mu, args.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    d = pred.to_dict()
    if args.horizon:
        d["predicted_R"] = float(pred.growth(args.horizon))
    print(json.dumps(d, indent=2))


def cmd_stefan(args):
    c = _merge(args, _STEFAN_KEYS)
    try:
        st = stefan.similarity_state(c["mu"], c["s0"], c["xi_max"], c["dxi"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    c0 = stefan.conservation_residual(st)
    st0 = st.copy()
    stefan.solve(st, c["s_end"], c["ds"])
    r_exact = analytics.solve_r_subcritical(c["mu"])
    summary = {
        "mu": c["mu"], "s_end": st.s, "r": st.r, "r_self_similar": r_exact * st.s**0.5,
        "profile_max_error": stefan.profile_error(st),
        "conservation_residual_start": c0, "conservation_residual_end": stefan.conservation_residual(st),
    }
    out = Path(c["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "profile.csv").write_text(stefan.profile_to_csv([st0, st]))
    (out / "stefan.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))


def _load(indir):
    indir = Path(indir)
    try:
        trajs = read_trajectories_csv((indir / "trajectories.csv").read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read trajectories: {exc}") from exc
    prof = indir / "profiles.csv"
    if prof.exists():
        read_profiles_csv(prof.read_text(), trajs)
    return trajs


def cmd_fit(args):
    trajs = _load(args.indir)
    try:
        alpha, ci = harness.fit_exponent(trajs, args.t_min)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({"alpha_hat": alpha, "ci95": list(ci), "runs": len(trajs)}, indent=2))


def cmd_report(args):
    trajs = _load(args.indir)
    try:
        pred = analytics.predict(args.mu, args.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    meta = Path(args.indir) / "params.json"
    deficit = json.loads(meta.read_text()).get("init_deficit", 0.0) if meta.exists() else 0.0
    rep = harness.compare_report(trajs, pred, t_min=args.t_min, init_deficit=deficit)
    harness.write_report(rep, args.indir)
    sys.stdout.write(rep.to_text())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdla", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run an ensemble of exact simulations")
    s.add_argument("--config")
    s.add_argument("--mu", type=float)
    s.add_argument("--mode", choices=analytics.TIME_MODES)
    s.add_argument("--horizon", type=float)
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--init", choices=("uniform", "wave"))
    s.add_argument("--profile-width", dest="profile_width", type=int)
    s.add_argument("--window-margin", dest="window_margin", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("predict", help="print the closed-form predictions as JSON")
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--mode", choices=analytics.TIME_MODES, default="discrete")
    s.add_argument("--horizon", type=float)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("stefan", help="solve the subcritical free-boundary problem")
    s.add_argument("--config")
    s.add_argument("--mu", type=float)
    s.add_argument("--dxi", type=float)
    s.add_argument("--ds", type=float)
    s.add_argument("--s-end", dest="s_end", type=float)
    s.add_argument("--s0", type=float)
    s.add_argument("--xi-max", dest="xi_max", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stefan)

    s = sub.add_parser("fit", help="fit the growth exponent of a stored ensemble")
    s.add_argument("--in", dest="indir", required=True)
    s.add_argument("--t-min", dest="t_min", type=float, required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("report", help="compare a stored ensemble with the predictions")
    s.add_argument("--in", dest="indir", required=True)
    s.add_argument("--mode", choices=analytics.TIME_MODES, required=True)
    s.add_argument("--mu", type=float, required=True)
    s.add_argument("--t-min", dest="t_min", type=float)
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.error("runtime failure: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
