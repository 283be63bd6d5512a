"""Command-line driver: inspect, verify, bench, run.

Exit codes: 0 success or verification pass, 1 verification failure,
2 usage or input errors.
"""

import argparse
import json
import platform
import sys
import time

import numpy as np

from .errors import NnjitError
from .graph import build_graph
from .interpreter import interpret
from .model_format import load_model
from .options import ApproximationOptions
from .runtime import CompiledNetwork


def _host_cpu():
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def _options(args):
    return ApproximationOptions(activation_mode=args.mode,
                                softmax_exp=args.softmax_exp)


def _load(args):
    manifest, weights = load_model(args.manifest, args.weights)
    return manifest, weights


def cmd_inspect(args):
    manifest, weights = _load(args)
    net = CompiledNetwork(manifest, weights, _options(args))
    if args.json:
        doc = {
            "units": [u.describe() for u in net.plan.units],
            "buffers": {str(t): {"offset": off, "size": size}
                        for t, (off, size) in net.artifact.offsets.items()},
            "arena_size": net.artifact.arena_size,
            "code_bytes": net.artifact.metadata["code_bytes"],
            "pool_bytes": net.artifact.metadata["pool_bytes"],
            "trace": net.artifact.trace,
        }
        print(json.dumps(doc, indent=2))
    else:
        print(net.describe())
        print("trace:")
        for line in net.artifact.trace:
            print(" ", line)
    return 0


def _verify_report(net, graph, trials, seed, tol_abs):
    rng = np.random.default_rng(seed)
    shapes = [tuple(v.shape) for v in net.input_views]
    max_abs = [0.0] * len(net.output_views)
    max_rel = [0.0] * len(net.output_views)
    argmax_agree = [True] * len(net.output_views)
    for _ in range(trials):
        xs = [rng.uniform(-2, 2, size=s).astype(np.float32) for s in shapes]
        want = interpret(graph, xs)
        got = net.run(xs)
        for i, (a, b) in enumerate(zip(want, got)):
            diff = np.abs(a.astype(np.float64) - b.astype(np.float64))
            max_abs[i] = max(max_abs[i], float(diff.max()))
            denom = np.maximum(np.abs(a.astype(np.float64)), 1e-12)
            max_rel[i] = max(max_rel[i], float((diff / denom).max()))
            if a.ndim == 1 and a.size > 1 and a.argmax() != b.argmax():
                argmax_agree[i] = False
    ok = all(m <= tol_abs for m in max_abs)
    return {
        "trials": trials, "seed": seed, "tol_abs": tol_abs,
        "outputs": [
            {"max_abs": max_abs[i], "max_rel": max_rel[i],
             "argmax_agree": argmax_agree[i]}
            for i in range(len(max_abs))
        ],
        "pass": ok,
    }


def cmd_verify(args):
    manifest, weights = _load(args)
    graph = build_graph(manifest, weights)
    net = CompiledNetwork(manifest, weights, _options(args))
    report = _verify_report(net, graph, args.trials, args.seed, args.tol_abs)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        for i, out in enumerate(report["outputs"]):
            print(f"output {i}: max-abs {out['max_abs']:.3e}  "
                  f"max-rel {out['max_rel']:.3e}  "
                  f"argmax {'agrees' if out['argmax_agree'] else 'DIFFERS'}")
        print(f"{'PASS' if report['pass'] else 'FAIL'} "
              f"(tol-abs {report['tol_abs']:g}, {report['trials']} trials)")
    return 0 if report["pass"] else 1


def _bench_report(args, manifest, weights):
    graph = build_graph(manifest, weights)
    net = CompiledNetwork(manifest, weights, _options(args))
    rng = np.random.default_rng(args.seed)
    for view in net.input_views:
        view[...] = rng.uniform(-2, 2, size=view.shape).astype(np.float32)
    for _ in range(args.warmup):
        net.apply()
    samples = np.empty(args.runs)
    for i in range(args.runs):
        t0 = time.perf_counter()
        net.apply()
        samples[i] = time.perf_counter() - t0
    xs = [np.array(v) for v in net.input_views]
    interp_runs = max(3, args.runs // 10)
    t0 = time.perf_counter()
    for _ in range(interp_runs):
        interpret(graph, xs)
    interp_us = (time.perf_counter() - t0) / interp_runs * 1e6
    mean_us = float(samples.mean() * 1e6)
    return {
        "model": args.manifest,
        "compile_ms": net.compile_ms,
        "mean_us": mean_us,
        "std_us": float(samples.std() * 1e6),
        "runs": args.runs,
        "warmup": args.warmup,
        "interpreter_mean_us": interp_us,
        "speedup": interp_us / mean_us if mean_us else float("inf"),
        "host_cpu": _host_cpu(),
        "options": {"activation_mode": args.mode,
                    "softmax_exp": args.softmax_exp},
    }


def cmd_bench(args):
    manifest, weights = _load(args)
    report = _bench_report(args, manifest, weights)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"model        {report['model']}")
        print(f"host         {report['host_cpu']}")
        print(f"compile      {report['compile_ms']:.2f} ms")
        print(f"inference    {report['mean_us']:.2f} us "
              f"(std {report['std_us']:.2f}, {report['runs']} runs, "
              f"{report['warmup']} warmup)")
        print(f"interpreter  {report['interpreter_mean_us']:.2f} us")
        print(f"speedup      {report['speedup']:.1f}x")
    return 0


def cmd_run(args):
    manifest, weights = _load(args)
    net = CompiledNetwork(manifest, weights, _options(args))
    paths = args.inputs
    if len(paths) != len(net.input_views):
        raise NnjitError(f"model takes {len(net.input_views)} input(s), "
                         f"got {len(paths)} file(s)")
    for path, view in zip(paths, net.input_views):
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) != view.nbytes:
            raise NnjitError(f"{path}: expected {view.nbytes} bytes for "
                             f"shape {tuple(view.shape)}, got {len(raw)}")
        view[...] = np.frombuffer(raw, dtype="<f4").reshape(view.shape)
    net.apply()
    if args.json:
        print(json.dumps([v.tolist() for v in net.output_views]))
    else:
        for i, v in enumerate(net.output_views):
            flat = " ".join(f"{x:.8g}" for x in np.asarray(v).ravel())
            print(f"output {i} shape {tuple(v.shape)}: {flat}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="nnjit",
                                description="JIT compiler for small CNN "
                                            "inference on x86-64")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("manifest", help="model manifest (JSON)")
        sp.add_argument("--weights", default=None,
                        help="weight blob path (default: manifest with .bin)")
        sp.add_argument("--mode", choices=("rational", "fast"),
                        default="rational", help="activation approximations")
        sp.add_argument("--softmax-exp", choices=("fast", "precise"),
                        default="fast", help="softmax exponential flavor")
        sp.add_argument("--json", action="store_true",
                        help="machine-readable output")

    sp = sub.add_parser("inspect", help="dump units, buffers, and code")
    common(sp)
    sp.set_defaults(fn=cmd_inspect)

    sp = sub.add_parser("verify", help="compare compiled against interpreter")
    common(sp)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--tol-abs", type=float, default=1e-5)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("bench", help="time the compiled forward pass")
    common(sp)
    sp.add_argument("--runs", type=int, default=100)
    sp.add_argument("--warmup", type=int, default=10)
    sp.add_argument("--seed", type=int, default=42)
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("run", help="apply the model to raw float32 input")
    common(sp)
    sp.add_argument("inputs", nargs="+",
                    help="raw little-endian float32 tensor file(s)")
    sp.set_defaults(fn=cmd_run)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `nnjit inspect ... | head`);
        # close stdout now so interpreter shutdown does not retry the flush
        try:
            sys.stdout.close()
        except OSError:
            pass
        return 0
    except (NnjitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
