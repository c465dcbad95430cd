"""Command-line front end.

Exit codes: 0 success or certified, 1 not certified or infeasible, 2 usage,
parse, or numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import replace

import numpy as np
import yaml

from . import __version__
from .certify import (Certificate, HybridCertificate, certify_continuous, certify_discrete,
                      certify_hybrid, certify_s_condition, split_flow_signal)
from .design import dwell_time_design, stabilize
from .document import HYBRID, SystemDocument, dump_document, load_document
from .errors import DocumentError, InfeasibleError, SwitchlinError
from .linalg import induced_norm, spectral_summary
from .model import (CONTINUOUS, DISCRETE, ContinuousSignal, HybridSignal, random_discrete_signal,
                    random_signal, validate, validate_hybrid)
from .simulate import simulate_continuous, simulate_discrete, simulate_hybrid, verify_bound
from .stats import asymptotics, discrete_asymptotics

EXIT_OK, EXIT_NOT_CERTIFIED, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _g(x):
    """Human-readable number: 6 significant digits."""
    if x is None:
        return "-"
    return format(float(x), ".6g")


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (np.floating,)):
        return _jsonable(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


class Context:
    """Per-invocation state: input bytes, output streams, report assembly."""

    def __init__(self, args, stdout, stderr):
        self.args = args
        self.out = stdout
        self.err = stderr
        self.warnings = []
        self.started = time.perf_counter()
        self.raw = None

    def load(self, path) -> SystemDocument:
        try:
            with open(path, "rb") as fh:
                self.raw = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        try:
            text = self.raw.decode("utf-8")
        except UnicodeDecodeError:
            raise DocumentError("document is not valid UTF-8") from None
        return load_document(text)

    def print(self, *parts):
        print(*parts, file=self.out)

    def warn(self, message):
        self.warnings.append(message)

    def report(self, command, parameters, payload):
        if not getattr(self.args, "json", False):
            for w in self.warnings:
                self.print(f"warning: {w}")
            if getattr(self.args, "timing", False):
                self.print(f"elapsed: {time.perf_counter() - self.started:.3f} s")
            return
        doc = {"command": command,
               "input_digest": "sha256:" + hashlib.sha256(self.raw or b"").hexdigest(),
               "parameters": parameters,
               "payload": payload,
               "warnings": self.warnings}
        if getattr(self.args, "timing", False):
            doc["timing"] = {"elapsed_s": time.perf_counter() - self.started}
        self.print(json.dumps(_jsonable(doc), indent=2, sort_keys=False, allow_nan=False))


def _indices(text):
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"expected comma-separated indices, got {text!r}") from None


def _vector(text):
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _validation(doc):
    if doc.mode == HYBRID:
        return validate_hybrid(doc.system(), doc.signal)
    return validate(doc.system(), doc.signal)


def _require_valid(ctx, doc):
    report = _validation(doc)
    if not report.ok:
        raise UsageError("; ".join(f.message for f in report.errors))
    for f in report.warnings:
        ctx.warn(f.message)


# -- validate -----------------------------------------------------------------

def cmd_validate(ctx):
    doc = ctx.load(ctx.args.path)
    report = _validation(doc)
    for f in report.findings:
        ctx.print(f"{f.severity}: {f.message}")
    if report.ok:
        ctx.print(f"valid {doc.mode} document: {len(doc.matrices)} subsystem(s), dimension {doc.dim}")
        return EXIT_OK
    return EXIT_ERROR


# -- certify ------------------------------------------------------------------

def _cert_payload(cert: Certificate):
    return {"mode": cert.mode, "stabilizing_set": list(cert.stabilizing_set),
            "c" if cert.mode == CONTINUOUS else "norm": list(cert.c),
            "d": list(cert.d), "mu": list(cert.mu), "nu": list(cert.nu),
            "log_margin": cert.log_margin, "proof_log_margin": cert.proof_log_margin,
            "kappa": cert.kappa, "verdict": cert.verdict, "exact": cert.exact,
            "dropped": list(cert.dropped)}


def _print_cert(ctx, cert: Certificate, title=None):
    label = "c" if cert.mode == CONTINUOUS else "||A||"
    ctx.print(f"{title or cert.mode} ({'exact' if cert.exact else 'empirical'})")
    ctx.print(f"  {'i':>3}  {label:>10}  {'d':>10}  {'mu':>10}  {'nu':>10}  role")
    for k in range(len(cert.mu)):
        i = k + 1
        role = ("dropped" if i in cert.dropped
                else "stabilizing" if i in cert.stabilizing_set else "bad")
        ctx.print(f"  {i:>3}  {_g(cert.c[k]):>10}  {_g(cert.d[k]):>10}  "
                  f"{_g(cert.mu[k]):>10}  {_g(cert.nu[k]):>10}  {role}")
    ctx.print(f"  L = {_g(cert.log_margin)}")
    if cert.mode == CONTINUOUS and cert.proof_log_margin != cert.log_margin:
        ctx.print(f"  L (c in place of d) = {_g(cert.proof_log_margin)}")
    ctx.print(f"  kappa = {_g(cert.kappa)}")
    ctx.print(f"  verdict: {cert.verdict}")


def cmd_certify(ctx):
    args = ctx.args
    doc = ctx.load(args.path)
    _require_valid(ctx, doc)
    params = {"set": args.set, "s_ratio": args.s_ratio, "bad": args.bad,
              "horizon": args.horizon}
    system = doc.system()
    if doc.mode == HYBRID:
        hc = certify_hybrid(system, doc.signal)
        for w in hc.flow_certificate.warnings:
            ctx.warn(f"flow: {w}")
        for w in hc.jump_certificate.warnings:
            ctx.warn(f"jump: {w}")
        if not args.json:
            _print_cert(ctx, hc.flow_certificate, "flow")
            _print_cert(ctx, hc.jump_certificate, "jump")
            ctx.print(f"combination: {hc.combination}")
            ctx.print(f"verdict: {hc.verdict}")
        ctx.report("certify", params, {"mode": HYBRID,
                                       "flow": _cert_payload(hc.flow_certificate),
                                       "jump": _cert_payload(hc.jump_certificate),
                                       "combination": hc.combination, "verdict": hc.verdict})
        return EXIT_OK if hc.certified else EXIT_NOT_CERTIFIED

    if doc.mode == DISCRETE:
        if args.set or args.s_ratio:
            raise UsageError("--set and --s-ratio apply to continuous documents only")
        cert = certify_discrete(system, discrete_asymptotics(system, doc.signal,
                                                             horizon=args.horizon))
        s_report = None
    else:
        asym = asymptotics(system, doc.signal, horizon=args.horizon)
        cert = certify_continuous(asym, _indices(args.set) if args.set else None)
        s_report = None
        if args.s_ratio is not None:
            stable = list(cert.stabilizing_set)
            bad = (_indices(args.bad) if args.bad
                   else [i for i in range(1, system.n + 1)
                         if i not in stable and i not in cert.dropped])
            s_report = certify_s_condition(asym, stable, bad, args.s_ratio)
    for w in cert.warnings:
        ctx.warn(w)
    payload = _cert_payload(cert)
    if s_report is not None:
        payload["s_condition"] = {"s": s_report.s, "holds": s_report.holds,
                                  "log_product": s_report.log_product,
                                  "product_ok": s_report.product_ok,
                                  "ratios_ok": s_report.ratios_ok,
                                  "failed_pairs": [[i, j] for i, j, _ in s_report.failed_pairs]}
    if not args.json:
        _print_cert(ctx, cert)
        if s_report is not None:
            ctx.print(f"s-condition (s = {_g(s_report.s)}): "
                      f"{'holds' if s_report.holds else 'fails'}: {s_report.message}")
    ctx.report("certify", params, payload)
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


# -- simulate -----------------------------------------------------------------

def cmd_simulate(ctx):
    args = ctx.args
    doc = ctx.load(args.path)
    _require_valid(ctx, doc)
    system = doc.system()
    x0 = _vector(args.x0) if args.x0 else [1.0] * doc.dim
    if len(x0) != doc.dim:
        raise UsageError(f"dimension mismatch: --x0 has {len(x0)} entries, system has {doc.dim}")
    horizon = args.horizon
    if horizon is None:
        h = doc.signal.horizon
        if not math.isfinite(h):
            raise UsageError("--horizon is required for periodic signals")
        horizon = h
    window = None
    if doc.mode == CONTINUOUS:
        traj = simulate_continuous(system, doc.signal, x0, horizon, args.step)
        window = doc.signal.period
    elif doc.mode == DISCRETE:
        if horizon != int(horizon):
            raise UsageError("discrete horizon must be an integer number of steps")
        traj = simulate_discrete(system, doc.signal, x0, int(horizon))
        window = doc.signal.period
    else:
        if horizon != int(horizon):
            raise UsageError("hybrid horizon must be an integer")
        traj = simulate_hybrid(system, doc.signal, x0, int(horizon), args.step)
        split = split_flow_signal(doc.signal.sigma1)
        if split is not None and split.periodic and doc.signal.sigma2.periodic:
            window = float(np.lcm(int(round(split.period)), doc.signal.sigma2.period))
    if window is not None and window > traj.times[-1] / 2:
        window = None
    slope = traj.log_norm_slope(window)
    csv_text = traj.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
        summary = ctx.out
    else:
        ctx.out.write(csv_text)
        summary = ctx.err
    payload = {"mode": doc.mode, "horizon": float(horizon), "samples": len(traj.times),
               "initial_norm": float(traj.norms[0]), "final_norm": traj.final_norm,
               "final_state": [float(v) for v in traj.final_state],
               "log_norm_slope": slope, "slope_window": window}
    status = EXIT_OK
    if args.verify_bound:
        if doc.mode != CONTINUOUS:
            raise UsageError("--verify-bound applies to continuous documents only")
        check = verify_bound(traj, system, doc.signal)
        payload["bound_check"] = {"holds": check.holds, "max_ratio": check.max_ratio,
                                  "checked": check.checked}
        if not check.holds:
            status = EXIT_ERROR
    if not args.json:
        print(f"final norm: {_g(traj.final_norm)} (initial {_g(traj.norms[0])}) at t = {_g(horizon)}",
              file=summary)
        print(f"log-norm slope: {_g(slope)}", file=summary)
        if args.verify_bound:
            b = payload["bound_check"]
            print(f"norm-product bound: {'holds' if b['holds'] else 'VIOLATED'} "
                  f"(max ratio {_g(b['max_ratio'])} over {b['checked']} checkpoints)", file=summary)
        if args.out:
            print(f"wrote {len(traj.times)} samples to {args.out}", file=summary)
        for w in ctx.warnings:
            print(f"warning: {w}", file=summary)
    elif args.out:
        ctx.report("simulate", {"x0": x0, "horizon": horizon, "step": args.step}, payload)
    else:
        ctx.err.write(json.dumps(_jsonable(payload), indent=2) + "\n")
    return status


# -- design -------------------------------------------------------------------

def _parse_matrix(text):
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        raise UsageError(f"cannot parse matrix {text!r}") from None
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise UsageError(f"cannot parse matrix {text!r}") from None
    if M.ndim == 0:
        M = M.reshape(1, 1)
    return M


def _emit(ctx, doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_document(doc))


def cmd_design_stabilizer(ctx):
    args = ctx.args
    doc = ctx.load(args.path)
    if doc.mode != CONTINUOUS:
        raise UsageError("stabilizer design needs a continuous document")
    _require_valid(ctx, doc)
    A0 = _parse_matrix(args.A0)
    params = {"A0": A0.tolist(), "lambda": args.lam, "set": args.set}
    try:
        plan, new_system, new_signal, cert = stabilize(
            doc.system(), doc.signal, A0, args.lam, _indices(args.set) if args.set else None)
    except InfeasibleError as exc:
        ctx.print(f"infeasible: {exc}")
        ctx.report("design stabilizer", params, {"feasible": False, "reason": str(exc)})
        return EXIT_NOT_CERTIFIED
    payload = {"feasible": True, "c": plan.c, "lambda": plan.lam, "t0": plan.t0, "N": plan.N,
               "combined_margin": plan.combined_margin,
               "damping_fraction": plan.damping_fraction, "repeats": plan.repeats,
               "damping_index": plan.damping_index, "certificate": _cert_payload(cert)}
    if not args.json:
        ctx.print(f"base c = {_g(plan.c)}")
        ctx.print(f"damping time t0 = {_g(plan.t0)} (||exp(t0 A0)|| = {_g(plan.lam)})")
        ctx.print(f"N = {plan.N} (lambda^(1/N) c = {_g(plan.combined_margin)}), "
                  f"damping share >= {_g(plan.damping_fraction)}")
        ctx.print(f"emitted tail: base tail + {plan.repeats} x (subsystem {plan.damping_index}, t0)")
        _print_cert(ctx, cert, "repaired signal")
    if args.emit:
        new_doc = SystemDocument(mode=CONTINUOUS, matrices=tuple(new_system.matrices),
                                 signal=new_signal,
                                 name=(doc.name + " (stabilized)").strip(),
                                 description=doc.description)
        _emit(ctx, new_doc, args.emit)
        payload["emitted"] = args.emit
        if not args.json:
            ctx.print(f"wrote {args.emit}")
    ctx.report("design stabilizer", params, payload)
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def _bad_dwell_arg(items):
    out = {}
    for item in items or ():
        try:
            k, v = item.split("=")
            out[int(k)] = float(v)
        except ValueError:
            raise UsageError(f"expected INDEX=DWELL, got {item!r}") from None
    return out


def cmd_design_dwell(ctx):
    args = ctx.args
    doc = ctx.load(args.path)
    if doc.mode != CONTINUOUS:
        raise UsageError("dwell design needs a continuous document")
    system = doc.system()
    n = system.n
    stable = (_indices(args.stable) if args.stable
              else [i for i in range(1, n + 1) if spectral_summary(system.matrix(i)).hurwitz])
    bad = _bad_dwell_arg(args.bad_dwell)
    sig = doc.signal
    pattern = sig.tail if sig.periodic else sig.prefix
    for j in range(1, n + 1):
        if j in stable or j in bad:
            continue
        durs = [d for i, d in pattern if i == j and d > 0]
        if not durs:
            raise UsageError(f"no dwell time for subsystem {j}; pass --bad-dwell {j}=T")
        bad[j] = math.fsum(durs) / len(durs)
    params = {"stable": stable, "bad_dwell": bad, "margin": args.margin}
    try:
        plan = dwell_time_design(system, stable, bad, margin=args.margin)
    except InfeasibleError as exc:
        ctx.print(f"infeasible: {exc}")
        ctx.report("design dwell", params, {"feasible": False, "reason": str(exc)})
        return EXIT_NOT_CERTIFIED
    cyclic = plan.cyclic_signal()
    cert = certify_continuous(asymptotics(system, cyclic))
    payload = {"feasible": True, "t_bar": list(plan.t_bar), "k": list(plan.k),
               "alpha": list(plan.alpha), "envelope_horizon": list(plan.envelope_horizon),
               "cycle_log_margin": plan.cycle_log_margin, "scale": plan.scale,
               "certificate": _cert_payload(cert)}
    if not args.json:
        ctx.print(f"  {'i':>3}  {'t_bar':>10}  {'k':>10}  {'alpha':>10}  role")
        for k in range(n):
            role = "stable" if k + 1 in plan.stable_set else "bad"
            ctx.print(f"  {k + 1:>3}  {_g(plan.t_bar[k]):>10}  {_g(plan.k[k]):>10}  "
                      f"{_g(plan.alpha[k]):>10}  {role}")
        ctx.print(f"cycle log margin = {_g(plan.cycle_log_margin)}")
        _print_cert(ctx, cert, "round-robin signal")
    if args.emit:
        _emit(ctx, replace(doc, signal=cyclic), args.emit)
        payload["emitted"] = args.emit
        if not args.json:
            ctx.print(f"wrote {args.emit}")
    ctx.report("design dwell", params, payload)
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


# -- norms --------------------------------------------------------------------

def cmd_norms(ctx):
    doc = ctx.load(ctx.args.path)
    families = [("matrices", doc.matrices)]
    if doc.mode == HYBRID:
        families.append(("jump_matrices", doc.jump_matrices))
    payload = {}
    for label, mats in families:
        rows = []
        if not ctx.args.json:
            ctx.print(label)
            ctx.print(f"  {'i':>3}  {'||A||':>10}  {'abscissa':>10}  {'radius':>10}  hurwitz  schur")
        for k, M in enumerate(mats, start=1):
            s = spectral_summary(M)
            nrm = induced_norm(M)
            rows.append({"index": k, "norm": nrm, "abscissa": s.abscissa, "radius": s.radius,
                         "hurwitz": s.hurwitz, "schur": s.schur, "marginal": s.marginal})
            if s.marginal:
                ctx.warn(f"{label} {k}: eigenvalue within tolerance of a stability boundary")
            if not ctx.args.json:
                ctx.print(f"  {k:>3}  {_g(nrm):>10}  {_g(s.abscissa):>10}  {_g(s.radius):>10}  "
                          f"{'yes' if s.hurwitz else 'no':>7}  {'yes' if s.schur else 'no':>5}")
        payload[label] = rows
    ctx.report("norms", {}, payload)
    return EXIT_OK


# -- random-signal ------------------------------------------------------------

def cmd_random_signal(ctx):
    args = ctx.args
    doc = ctx.load(args.path)
    n = len(doc.matrices)
    if doc.mode == DISCRETE:
        signal = random_discrete_signal(n, args.length, seed=args.seed)
    else:
        flow = random_signal(n, args.length, seed=args.seed,
                             durations=(args.min_duration, args.max_duration))
        if doc.mode == HYBRID:
            jump = random_discrete_signal(len(doc.jump_matrices), args.length, seed=args.seed)
            signal = HybridSignal(flow, jump)
        else:
            signal = flow
    text = dump_document(replace(doc, signal=signal))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        ctx.out.write(text)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="switchlin",
                                description="Stability certificates for switched linear systems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, json_flag=True):
        sp.add_argument("path", help="system document (YAML)")
        if json_flag:
            sp.add_argument("--json", action="store_true", help="emit a machine-readable report")
            sp.add_argument("--timing", action="store_true", help="include elapsed time")

    sp = sub.add_parser("validate", help="check a document")
    common(sp, json_flag=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("certify", help="evaluate the stability conditions")
    common(sp)
    sp.add_argument("--set", help="stabilizing set, e.g. 1,3 (default: every i with c_i < 1)")
    sp.add_argument("--s-ratio", type=float, dest="s_ratio", help="also test the usage-ratio condition")
    sp.add_argument("--bad", help="bad set for --s-ratio (default: complement of the stabilizing set)")
    sp.add_argument("--horizon", type=float,
                    help="estimate empirically over this horizon instead of exact periodic values")
    sp.set_defaults(func=cmd_certify)

    sp = sub.add_parser("simulate", help="propagate a trajectory and write CSV")
    common(sp)
    sp.add_argument("--x0", help="initial state, comma-separated (default: all ones)")
    sp.add_argument("--horizon", type=float, help="final time (steps for discrete documents)")
    sp.add_argument("--step", type=float, help="sampling step inside activation periods")
    sp.add_argument("--out", help="CSV output path (default: stdout)")
    sp.add_argument("--verify-bound", action="store_true", dest="verify_bound",
                    help="check the norm-product bound at every switch")
    sp.set_defaults(func=cmd_simulate)

    dp = sub.add_parser("design", help="construct stabilizing switching signals")
    dsub = dp.add_subparsers(dest="design", required=True)
    sp = dsub.add_parser("stabilizer", help="insert a damping subsystem")
    common(sp)
    sp.add_argument("--A0", required=True, help="damping matrix, e.g. '[[-1,0],[0,-1]]'")
    sp.add_argument("--lambda", type=float, dest="lam", default=0.5,
                    help="target norm of exp(t0 A0) (default 0.5)")
    sp.add_argument("--set", help="stabilizing set used to compute c")
    sp.add_argument("--emit", help="write the repaired document here")
    sp.set_defaults(func=cmd_design_stabilizer)
    sp = dsub.add_parser("dwell", help="average dwell-time plan")
    common(sp)
    sp.add_argument("--stable", help="stable set (default: Hurwitz subsystems)")
    sp.add_argument("--bad-dwell", action="append", dest="bad_dwell", metavar="INDEX=DWELL",
                    help="fixed dwell time of a bad subsystem (default: its mean in the signal)")
    sp.add_argument("--margin", type=float, default=0.05, help="required log slack per cycle")
    sp.add_argument("--emit", help="write a document with the round-robin signal here")
    sp.set_defaults(func=cmd_design_dwell)

    sp = sub.add_parser("norms", help="matrix norms and spectral summaries")
    common(sp)
    sp.set_defaults(func=cmd_norms)

    sp = sub.add_parser("random-signal", help="replace the signal by a seeded random periodic one")
    common(sp, json_flag=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--length", type=int, default=8, help="tail length")
    sp.add_argument("--min-duration", type=float, default=0.1, dest="min_duration")
    sp.add_argument("--max-duration", type=float, default=1.0, dest="max_duration")
    sp.add_argument("--out", help="output path (default: stdout)")
    sp.set_defaults(func=cmd_random_signal)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    ctx = Context(args, stdout, stderr)
    try:
        return args.func(ctx)
    except DocumentError as exc:
        print(f"error: {args.path}: {exc}", file=stderr)
    except (UsageError, SwitchlinError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
