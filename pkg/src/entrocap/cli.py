"""Command-line front end: ``entrocap {entropy,degradable,capacity,bound,simulate,second-order}``."""

from __future__ import annotations

import argparse
import copy
import csv
import io as _io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable

import numpy as np

from . import broadcast as br
from . import capacity as cap
from . import entropies as ent
from . import oneshot
from . import protocol as pr
from .config import RunConfig, default_jobs
from .io import SCHEMA_VERSION, ValidationError, dumps, load_channel, load_state, read_json
from .qip import RegisterError
from .sdp import SdpNumericalError

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
INT_PARAMS = {"M", "K", "n", "restarts", "seed", "rank", "d", "e_dim"}


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _run_config(a) -> RunConfig:
    return RunConfig(psd_tol=a.psd_tol, gap_tol=a.gap_tol, opt_tol=a.opt_tol, add_tol=a.add_tol, seed=a.seed,
                     restarts=a.restarts, dim_cap=a.dim_cap, format=a.format, jobs=a.jobs)


def _channel_spec(a) -> dict:
    if getattr(a, "_channel_spec", None) is not None:
        return a._channel_spec
    if a.channel and a.zoo:
        raise ValidationError("give either --channel or --zoo, not both")
    if a.channel:
        spec = read_json(a.channel)
    elif a.zoo:
        spec = {"zoo": {"name": a.zoo, "params": dict(_kv(p) for p in a.param)}}
    else:
        raise ValidationError("a channel is required (--channel FILE or --zoo NAME)")
    if not isinstance(spec, dict):
        raise ValidationError("channel spec must be a JSON object")
    return spec


def _kv(s: str) -> tuple[str, Any]:
    if "=" not in s:
        raise ValidationError(f"--param expects key=value, got {s!r}")
    k, v = s.split("=", 1)
    try:
        x = float(v)
        return k, int(x) if k in INT_PARAMS else x
    except ValueError:
        return k, v


def _channel(a) -> br.BroadcastChannel:
    return load_channel(_channel_spec(a))


def _input_state(a, bc: br.BroadcastChannel):
    if getattr(a, "state", None):
        rho = load_state(a.state, np.random.default_rng(a.seed), a.psd_tol)
        need = set(bc.in_register.labels) | {cap.REF}
        if set(rho.labels) != need:
            raise ValidationError(f"input state must live on {sorted(need)}, got {list(rho.labels)}", "$.labels")
        return rho
    return cap.maximally_entangled_input(bc)


def _oneshot_dict(r: oneshot.OneShotResult, artifacts: bool) -> dict:
    out = {"value": r.value, "certified": r.certified, "method": r.method, "lower": r.lower, "upper": r.upper,
           "notes": r.notes}
    scal = {k: v for k, v in r.artifacts.items() if np.isscalar(v)}
    if artifacts:
        scal.update({k: np.asarray(v, dtype=complex) for k, v in r.artifacts.items() if isinstance(v, np.ndarray)})
    out["artifacts"] = scal
    return out


def _labels(s: str | None) -> list[str]:
    return [x for x in (s or "").split(",") if x]


# ---------------------------------------------------------------------------
# subcommands; each returns a JSON-able dict


def cmd_entropy(a) -> dict:
    rng = np.random.default_rng(a.seed)
    if not a.state:
        raise ValidationError("--state is required")
    rho = load_state(a.state, rng, a.psd_tol)
    k = a.kind
    needs_sigma = {"dhypo", "dmax", "dmin", "dmax_smooth", "dmin_smooth", "relent", "relvar"}
    if k in needs_sigma:
        if not a.sigma:
            raise ValidationError(f"--kind {k} needs --sigma")
        tau = load_state(a.sigma, rng, a.psd_tol)
        if tau.register != rho.register:
            raise ValidationError("state and sigma live on different registers", "$.labels")
        if k == "dhypo":
            return _oneshot_dict(oneshot.d_hypo(rho, tau, a.eps, sdp_check=a.sdp_check), a.artifacts)
        if k == "dmax":
            return {"value": oneshot.d_max(rho, tau), "certified": True, "method": oneshot.CLOSED_FORM}
        if k == "dmin":
            return {"value": oneshot.d_min(rho, tau), "certified": True, "method": oneshot.CLOSED_FORM}
        if k == "dmax_smooth":
            return _oneshot_dict(oneshot.d_max_smooth(rho, tau, a.eps), a.artifacts)
        if k == "dmin_smooth":
            return _oneshot_dict(oneshot.d_min_smooth(rho, tau, a.eps), a.artifacts)
        if k == "relent":
            r = ent.relative_entropy(rho, tau)
            return {"value": r.value, "support_ok": r.support_ok, "support_warning": r.support_warning}
        return {"value": ent.relative_entropy_variance(rho, tau)}
    if k == "vn":
        return {"value": ent.entropy(rho)}
    cond = _labels(a.cond)
    target = _labels(a.target) or [l for l in rho.labels if l not in cond]
    for l in cond + target:
        if l not in rho.labels:
            raise ValidationError(f"unknown label {l!r}; state has {list(rho.labels)}", "$.labels")
    if k == "cond":
        return {"value": ent.conditional_entropy(rho, target, cond)}
    if k in ("hmin", "hmax"):
        if a.eps > 0:
            f = oneshot.h_min_smooth if k == "hmin" else oneshot.h_max_smooth
            return _oneshot_dict(f(rho, target, cond, a.eps), a.artifacts)
        f = oneshot.h_min if k == "hmin" else oneshot.h_max
        return _oneshot_dict(f(rho, target, cond), a.artifacts)
    if not cond:
        raise ValidationError(f"--kind {k} needs --cond (second system)")
    if k == "mi":
        return {"value": ent.mutual_information(rho, target, cond)}
    if k == "ihypo":
        return _oneshot_dict(oneshot.i_hypo(rho, target, cond, a.eps), a.artifacts)
    if k == "imax_tilde":
        # I~(cond; target): target keeps its marginal
        return _oneshot_dict(oneshot.i_max_tilde(rho, cond, target, a.eps), a.artifacts)
    raise ValidationError(f"unknown kind {k!r}")


def cmd_degradable(a) -> dict:
    bc = _channel(a)
    rep = br.check_degraded(bc, _run_config(a).solver())
    out = rep.to_dict()
    out["channel"] = bc.name
    if a.artifacts and rep.degrading_map is not None:
        out["degrading_map_choi"] = np.asarray(rep.degrading_map.choi, dtype=complex)
    return out


def cmd_capacity(a) -> dict:
    bc = _channel(a)
    opts = _run_config(a).capacity()
    if a.kind == "cmi":
        r = cap.cmi_capacity(bc, opts)
    elif a.kind == "mixed":
        r = cap.ea_private_information_mixed(bc, a.rank, opts)
    else:
        r = cap.ea_private_information(bc, opts)
    out = r.to_dict()
    if r.argmax_state is not None and a.artifacts:
        out["argmax_state"] = np.asarray(r.argmax_state.vector, dtype=complex)
    out["channel"] = bc.name
    return out


def cmd_bound(a) -> dict:
    bc = _channel(a)
    rho = _input_state(a, bc)
    if a.kind == "thm1":
        return cap.thm1_lower_bound(bc, rho, a.eps, a.delta, a.eta1, a.eta2).to_dict()
    if a.kind == "thm3":
        return cap.thm3_upper_bound(bc, rho, a.eps, a.delta, a.iterated_chain).to_dict()
    # thm2: the supremum is approximated over code-induced states with Weyl shifts
    d = bc.in_register.dim
    Ms = [a.M] if a.M else list(range(1, d * d + 1))
    reps = [cap.thm2_upper_bound(bc, cap.code_state(bc, rho, M), a.eps, a.delta) for M in Ms]
    best = max(range(len(reps)), key=lambda i: reps[i].value)
    out = reps[best].to_dict()
    out["family"] = [{"M": M, "value": r.value, "certified": r.certified} for M, r in zip(Ms, reps)]
    out["notes"] = "best found over the code-state family; not a certified supremum"
    return out


def cmd_simulate(a) -> dict:
    bc = _channel(a)
    rho = _input_state(a, bc)
    cfg = pr.CodeConfig(a.M, a.K, rho, bc, eps=a.eps, delta=a.delta, eta1=a.eta1, eta2=a.eta2,
                        test_eps=a.test_eps, hn_c=a.hn_c, dim_cap=a.dim_cap, optimize_sigma=a.optimize_sigma)
    r = pr.run_protocol(cfg)
    out = r.to_dict()
    out.update({"eps_target": a.eps, "delta_target": a.delta, "log2M": math.log2(a.M)})
    return out


def cmd_second_order(a) -> dict:
    bc = _channel(a)
    rho = _input_state(a, bc)
    return cap.second_order_rate(bc, rho, a.eps, a.delta, a.n).to_dict()


COMMANDS: dict[str, Callable] = {
    "entropy": cmd_entropy, "degradable": cmd_degradable, "capacity": cmd_capacity,
    "bound": cmd_bound, "simulate": cmd_simulate, "second-order": cmd_second_order,
}

CSV_LEADING = {"simulate": ["M", "K", "eps_target", "delta_target", "eps_achieved", "delta_achieved", "log2M"]}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--restarts", type=int, default=32)
    g.add_argument("--psd-tol", type=float, default=1e-12)
    g.add_argument("--gap-tol", type=float, default=1e-8)
    g.add_argument("--opt-tol", type=float, default=1e-7)
    g.add_argument("--add-tol", type=float, default=1e-3)
    g.add_argument("--dim-cap", type=int, default=pr.DIM_CAP)
    g.add_argument("--format", choices=["json", "csv"], default="json")
    g.add_argument("--out", help="write output here instead of stdout")
    g.add_argument("--jobs", type=int, default=default_jobs(), help="parallel workers (default: $ENTROCAP_JOBS or 1)")
    g.add_argument("--sweep", help="grid over one parameter: name=start:stop:steps")
    g.add_argument("--artifacts", action="store_true", help="include matrices in the output")
    g.add_argument("-v", "--verbose", action="store_true")

    chan = argparse.ArgumentParser(add_help=False)
    chan.add_argument("--channel", help="channel spec JSON file")
    chan.add_argument("--zoo", help="named channel instead of a file")
    chan.add_argument("--param", action="append", default=[], help="zoo parameter key=value")
    chan.add_argument("--state", help="input state JSON on the input label and R (default: maximally entangled)")

    p = argparse.ArgumentParser(prog="entrocap", description="One-shot entropies, EA private capacity and code simulation.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("entropy", parents=[common])
    e.add_argument("--kind", required=True,
                   choices=["vn", "cond", "mi", "relent", "relvar", "dhypo", "dmax", "dmin", "dmax_smooth", "dmin_smooth",
                            "hmin", "hmax", "ihypo", "imax_tilde"])
    e.add_argument("--state")
    e.add_argument("--sigma")
    e.add_argument("--eps", type=float, default=0.0)
    e.add_argument("--cond", help="conditioning (or second) system labels, comma separated")
    e.add_argument("--target", help="first system labels (default: all labels not in --cond)")
    e.add_argument("--sdp-check", action="store_true")

    sub.add_parser("degradable", parents=[common, chan])

    c = sub.add_parser("capacity", parents=[common, chan])
    c.add_argument("--kind", choices=["ea", "cmi", "mixed"], default="ea")
    c.add_argument("--rank", type=int, default=2)

    b = sub.add_parser("bound", parents=[common, chan])
    b.add_argument("--kind", choices=["thm1", "thm2", "thm3"], required=True)
    b.add_argument("--eps", type=float, default=0.05)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--eta1", type=float, default=0.01)
    b.add_argument("--eta2", type=float, default=0.05)
    b.add_argument("--M", type=int, help="thm2: code-state size (default: best over all sizes)")
    b.add_argument("--iterated-chain", action="store_true", help="thm3: pure-input form with the chain rules applied twice")

    s = sub.add_parser("simulate", parents=[common, chan])
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--delta", type=float, default=0.04)
    s.add_argument("--eta1", type=float)
    s.add_argument("--eta2", type=float)
    s.add_argument("--test-eps", type=float)
    s.add_argument("--hn-c", type=float, default=1.0)
    s.add_argument("--optimize-sigma", action="store_true")

    so = sub.add_parser("second-order", parents=[common, chan])
    so.add_argument("--eps", type=float, default=0.01)
    so.add_argument("--delta", type=float, default=0.01)
    so.add_argument("--n", type=int, default=100)
    return p


# ---------------------------------------------------------------------------
# dispatch


def _parse_sweep(s: str) -> tuple[str, list[float]]:
    try:
        name, rng = s.split("=", 1)
        a, b, steps = rng.split(":")
        a, b, steps = float(a), float(b), int(steps)
    except ValueError as e:
        raise ValidationError(f"--sweep expects name=start:stop:steps, got {s!r}") from e
    if steps < 1:
        raise ValidationError("--sweep needs at least one step")
    return name, [round(float(x), 12) for x in np.linspace(a, b, steps)]


def _with_value(a, name: str, value: float):
    b = copy.copy(a)
    v: Any = int(round(value)) if name in INT_PARAMS else value
    key = name.replace("-", "_")
    if hasattr(a, key) and key not in ("channel", "zoo", "param", "state", "sweep"):
        setattr(b, key, v)
        return b
    spec = copy.deepcopy(_channel_spec(a))
    if "zoo" not in spec:
        raise ValidationError(f"cannot sweep {name!r}: not an option of this command and the channel is not a zoo channel")
    spec["zoo"].setdefault("params", {})[name] = v
    b._channel_spec = spec
    return b


def _run_one(a) -> tuple[int, Any]:
    try:
        _run_config(a)
        return EXIT_OK, COMMANDS[a.command](a)
    except (SdpNumericalError, np.linalg.LinAlgError, FloatingPointError, NumericalFailure) as e:
        return EXIT_NUMERIC, {"type": "numerical", "message": str(e)}
    except ValidationError as e:
        return EXIT_INPUT, {"type": "validation", "message": str(e), "path": e.path}
    except (RegisterError, ValueError, TypeError, KeyError) as e:
        return EXIT_INPUT, {"type": "validation", "message": str(e), "path": "$"}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and not prefix:
            out.update(_flatten(v, key + "."))
        elif v is None or isinstance(v, (bool, int, float, str, np.floating, np.integer, np.bool_)):
            out[key] = v
    return out


def _csv(command: str, rows: list[dict]) -> str:
    flat = [_flatten(r) for r in rows]
    lead = [c for c in ["index", "sweep_param", "sweep_value"] + CSV_LEADING.get(command, []) if any(c in f for f in flat)]
    rest = sorted({k for f in flat for k in f} - set(lead))
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=lead + rest, lineterminator="\n")
    w.writeheader()
    for f in flat:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in f.items()})
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as f:
            f.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _error(code: int, err: dict, out: str | None) -> int:
    _emit(dumps({"schema_version": SCHEMA_VERSION, "error": {"code": code, **err}}), out)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    params = {k: v for k, v in vars(a).items() if k not in ("out", "verbose", "jobs", "format") and not k.startswith("_")}
    if not a.sweep:
        code, res = _run_one(a)
        if code != EXIT_OK:
            return _error(code, res, a.out)
        if a.format == "csv":
            _emit(_csv(a.command, [res]), a.out)
        else:
            _emit(dumps({"schema_version": SCHEMA_VERSION, "command": a.command, "params": params, "result": res}), a.out)
        return EXIT_OK
    try:
        name, values = _parse_sweep(a.sweep)
        runs = [_with_value(a, name, v) for v in values]
        for r in runs:
            r.jobs = 1 if a.jobs > 1 else r.jobs
    except ValidationError as e:
        return _error(EXIT_INPUT, {"type": "validation", "message": str(e), "path": e.path}, a.out)
    if a.jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(min(a.jobs, len(runs))) as pool:
            results = list(pool.map(_run_one, runs))
    else:
        results = [_run_one(r) for r in runs]
    rows, worst = [], EXIT_OK
    for i, (v, (code, res)) in enumerate(zip(values, results)):
        v_out = int(round(v)) if name in INT_PARAMS else v
        if code != EXIT_OK:
            worst = max(worst, code)
            rows.append({"index": i, "sweep_param": name, "sweep_value": v_out, "error": {"code": code, **res}})
        else:
            rows.append({"index": i, "sweep_param": name, "sweep_value": v_out, **res})
    if a.format == "csv":
        _emit(_csv(a.command, rows), a.out)
    else:
        _emit(dumps({"schema_version": SCHEMA_VERSION, "command": a.command, "params": params,
                     "sweep": {"param": name, "values": values}, "rows": rows}), a.out)
    return worst


if __name__ == "__main__":
    sys.exit(main())
