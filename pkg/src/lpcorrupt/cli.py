"""The ``lpcorrupt`` command line.

Subcommands: ``sets`` (list/expand/show/validate corruption sets), ``corrupt``
(dataset pipeline: generate, regenerate, verify), ``metrics`` (prediction log
or error table -> metric report), ``geometry`` (volumes, factors, overlap
curves), ``sample`` (emit raw noise vectors).

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 validation failure. Every
randomized subcommand prints its effective master seed to stderr so published
numbers are regenerable. Flags may be defaulted through environment variables
with the ``LPC_`` prefix (``LPC_SEED``, ``LPC_PROFILE``, ``LPC_THREADS``,
``LPC_SAMPLES``, ``LPC_SHARE_GROUP``). File outputs are written atomically
(temp file + rename).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import metrics as met
from . import pipeline as pipe
from . import sets as csets
from .norms import PNorm
from .rng import DEFAULT_SEED, RngStream
from .sampler import NoiseVector, RadialMode, sample
from .sets import draw_training_spec, resolve_set, serialize_set
from .tensorio import write_text_atomic

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4

ENV_PREFIX = "LPC_"


def _env(name: str, fallback):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    return raw


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(ENV_PREFIX + name)
    return fallback if raw is None else int(raw)


def _emit(text: str, out: str | None) -> None:
    if out:
        write_text_atomic(Path(out), text)
    else:
        sys.stdout.write(text)


def _print_seed(seed: int) -> None:
    print(f"effective master seed: {seed}", file=sys.stderr)


def _parse_p(text: str) -> PNorm:
    return PNorm.parse(text)


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpcorrupt",
        description="Uniform p-norm ball corruptions, robustness metrics, and ball geometry.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument(
            "--seed",
            type=int,
            default=_env_int("SEED", DEFAULT_SEED),
            help=f"master seed (default {DEFAULT_SEED}; env LPC_SEED)",
        )

    def add_profile(p):
        p.add_argument(
            "--profile",
            choices=["cifar", "tin"],
            default=_env("PROFILE", None),
            help="dataset profile for built-in sets (env LPC_PROFILE)",
        )

    # sets ------------------------------------------------------------------
    p_sets = sub.add_parser("sets", help="list, expand, show, or validate corruption sets")
    sets_sub = p_sets.add_subparsers(dest="sets_command", required=True)

    sp = sets_sub.add_parser("list", help="list built-in set names and profiles")
    sp.add_argument("--json", action="store_true", help="machine-readable output")

    sp = sets_sub.add_parser("expand", help="print every (p, epsilon) entry of a set")
    sp.add_argument("--name", required=True, help="built-in set name or config file path")
    add_profile(sp)
    sp.add_argument("--json", action="store_true", help="machine-readable output")
    sp.add_argument("--out", help="write to a file instead of stdout")

    sp = sets_sub.add_parser("show", help="print the canonical config text of a set")
    sp.add_argument("--name", required=True, help="built-in set name or config file path")
    add_profile(sp)
    sp.add_argument("--out", help="write to a file instead of stdout")

    sp = sets_sub.add_parser("validate", help="check a corruption-set config file")
    sp.add_argument("file", help="config file path")

    # corrupt ---------------------------------------------------------------
    p_cor = sub.add_parser("corrupt", help="corrupt a dataset, regenerate, or verify outputs")
    p_cor.add_argument("--input", required=True, help="input dataset directory (archive or PNG tree)")
    p_cor.add_argument("--output", help="output directory (generate/regenerate modes)")
    p_cor.add_argument("--set", dest="set_name", help="built-in set name or config file")
    add_profile(p_cor)
    add_seed(p_cor)
    p_cor.add_argument(
        "--share-group",
        type=int,
        default=_env_int("SHARE_GROUP", 0) or None,
        help="images per shared noise draw (default: 8 for training sets, 1 otherwise)",
    )
    clamp = p_cor.add_mutually_exclusive_group()
    clamp.add_argument("--no-clamp", action="store_true", help="disable clamping to [0,1]")
    clamp.add_argument("--clamp", action="store_true", help="force clamping on for every spec")
    p_cor.add_argument("--storage", choices=["lpt", "png"], default="lpt", help="output format")
    p_cor.add_argument(
        "--threads", type=int, default=_env_int("THREADS", 1), help="worker threads (env LPC_THREADS)"
    )
    p_cor.add_argument("--regenerate", metavar="MANIFEST", help="regenerate from a manifest file")
    p_cor.add_argument("--verify", metavar="MANIFEST", help="verify distances instead of generating")
    p_cor.add_argument("--corrupted", help="corrupted output directory (verify mode)")
    p_cor.add_argument("--json", action="store_true", help="machine-readable verification report")

    # metrics ---------------------------------------------------------------
    p_met = sub.add_parser("metrics", help="compute mCE / mCE_xN / mCE_Lp / iCE")
    src = p_met.add_mutually_exclusive_group(required=True)
    src.add_argument("--log", help="prediction log file (corruption,severity,true,pred)")
    src.add_argument("--table", help="error table file")
    p_met.add_argument("--json", action="store_true", help="machine-readable report")
    p_met.add_argument("--out", help="write to a file instead of stdout")

    # geometry --------------------------------------------------------------
    p_geo = sub.add_parser("geometry", help="ball volumes, volume factors, overlap curves")
    geo_sub = p_geo.add_subparsers(dest="geometry_command", required=True)

    gp = geo_sub.add_parser("volume", help="closed-form log-volume of one ball")
    gp.add_argument("--d", type=int, required=True)
    gp.add_argument("--p", required=True)
    gp.add_argument("--eps", type=float, default=1.0)
    gp.add_argument("--json", action="store_true")

    gp = geo_sub.add_parser("volume-factor", help="equal-epsilon volume ratio of two balls")
    gp.add_argument("--d", type=int, required=True)
    gp.add_argument("--hi", required=True, help="p of the numerator ball")
    gp.add_argument("--lo", required=True, help="p of the denominator ball")
    gp.add_argument("--json", action="store_true")
    gp.add_argument("--out", help="write to a file instead of stdout")

    gp = geo_sub.add_parser("overlap", help="Monte Carlo overlap curve against a fixed ball")
    gp.add_argument("--d", type=int, required=True)
    gp.add_argument("--first-p", required=True, help="p of the swept ball family")
    gp.add_argument(
        "--eps-grid",
        help="severity grid: 'lo:hi:n:log', 'lo:hi:n:linear', or comma-separated values "
        "(default: 10 log-spaced values bracketing the fixed ball's radius)",
    )
    gp.add_argument("--second-p", required=True, help="p of the fixed ball")
    gp.add_argument("--second-eps", type=float, required=True)
    gp.add_argument(
        "--samples", type=int, default=_env_int("SAMPLES", 1000), help="draws per ball (env LPC_SAMPLES)"
    )
    add_seed(gp)
    gp.add_argument("--out", help="write to a file instead of stdout")

    gp = geo_sub.add_parser("mc-volume", help="rejection-sampling volume estimate")
    gp.add_argument("--d", type=int, required=True)
    gp.add_argument("--p", required=True)
    gp.add_argument("--eps", type=float, default=1.0)
    gp.add_argument("--samples", type=int, default=_env_int("SAMPLES", 100_000))
    add_seed(gp)
    gp.add_argument("--json", action="store_true")

    gp = geo_sub.add_parser("concentration", help="radial concentration summary")
    gp.add_argument("--d", type=int, required=True)
    gp.add_argument("--p", required=True)
    gp.add_argument("--eps", type=float, default=1.0)
    gp.add_argument("--samples", type=int, default=_env_int("SAMPLES", 10_000))
    gp.add_argument("--mode", default="ball", help="ball, sphere, or exponent:k")
    add_seed(gp)
    gp.add_argument("--json", action="store_true")

    # sample ----------------------------------------------------------------
    p_sam = sub.add_parser("sample", help="emit raw noise vectors")
    p_sam.add_argument("--p", help="p-norm of an explicit spec (0, finite, or inf)")
    p_sam.add_argument("--eps", type=float, help="epsilon of an explicit spec")
    p_sam.add_argument("--mode", default="ball", help="ball, sphere, or exponent:k")
    p_sam.add_argument("--set", dest="set_name", help="draw the spec from a training set instead")
    add_profile(p_sam)
    p_sam.add_argument("--d", type=int, required=True, help="vector dimension")
    p_sam.add_argument(
        "--samples", type=int, default=_env_int("SAMPLES", 1), help="number of draws (env LPC_SAMPLES)"
    )
    add_seed(p_sam)
    p_sam.add_argument("--stream-index", type=int, default=0, help="stream index (explicit specs)")
    p_sam.add_argument("--group-index", type=int, default=0, help="group index (set draws)")
    p_sam.add_argument("--draw-only", action="store_true", help="print the drawn spec, no noise")
    p_sam.add_argument("--json", action="store_true", help="machine-readable output")
    p_sam.add_argument("--out", help="write to a file instead of stdout")

    return parser


# --- sets ----------------------------------------------------------------


def _load_named_set(name: str, profile: str | None) -> csets.CorruptionSet:
    return resolve_set(name, profile)


def cmd_sets(args) -> int:
    if args.sets_command == "list":
        entries = [
            {"name": name, "profiles": list(csets.PROFILES)} for name in csets.BUILTIN_NAMES
        ]
        if args.json:
            _emit(_json_dumps({"registry_version": csets.REGISTRY_VERSION, "sets": entries}), None)
        else:
            for e in entries:
                print(f"{e['name']}\tprofiles: {', '.join(e['profiles'])}")
        return EXIT_OK
    if args.sets_command == "expand":
        cset = _load_named_set(args.name, args.profile)
        if args.json:
            payload = {
                "name": cset.name,
                "profile": cset.profile,
                "intent": cset.intent,
                "specs": [
                    {"p": s.p_text, "epsilon": s.epsilon, "mode": str(s.radial_mode), "clamp": s.clamp}
                    for s in cset.specs
                ],
            }
            _emit(_json_dumps(payload), args.out)
        else:
            lines = [f"{s.p_text},{s.epsilon!r},{s.radial_mode}" for s in cset.specs]
            _emit("\n".join(lines) + "\n", args.out)
        return EXIT_OK
    if args.sets_command == "show":
        _emit(serialize_set(_load_named_set(args.name, args.profile)), args.out)
        return EXIT_OK
    # validate
    sets_found = csets.parse_sets_file(Path(args.file).read_text())
    for s in sets_found:
        print(f"ok: set {s.name} profile={s.profile} intent={s.intent} specs={len(s.specs)}")
    return EXIT_OK


# --- corrupt ---------------------------------------------------------------


def cmd_corrupt(args) -> int:
    dataset = pipe.Dataset.load(Path(args.input))

    if args.verify:
        manifest = pipe.CorruptionManifest.parse(Path(args.verify).read_text())
        if not args.corrupted:
            raise ValueError("--verify requires --corrupted pointing at the generated outputs")
        _, corrupted = pipe.read_output(Path(args.corrupted))
        report = pipe.verify_distance(dataset, corrupted, manifest)
        if args.json:
            payload = {
                "n_checked": report.n_checked,
                "violations": [
                    {"subdir": s, "image_id": i, "distance": d, "bound": b}
                    for s, i, d, b in report.violations
                ],
            }
            sys.stdout.write(_json_dumps(payload))
        else:
            print(f"checked {report.n_checked} corrupted images")
            for s, i, d, b in report.violations:
                print(f"violation: {i} in {s or '.'}: distance {d!r} exceeds bound {b!r}")
            if report.ok:
                print("all distances within budget")
        return EXIT_OK if report.ok else EXIT_VALIDATION

    if not args.output:
        raise ValueError("--output is required when generating or regenerating")

    if args.regenerate:
        manifest = pipe.CorruptionManifest.parse(Path(args.regenerate).read_text())
        _print_seed(manifest.master_seed)
        stream = pipe.regenerate(manifest, dataset, threads=args.threads)
    else:
        if not args.set_name:
            raise ValueError("--set is required (or use --regenerate/--verify)")
        cset = _load_named_set(args.set_name, args.profile)
        clamp_override = "off" if args.no_clamp else ("on" if args.clamp else "default")
        storage = {"lpt": "lpt1", "png": "png8"}[args.storage]
        _print_seed(args.seed)
        manifest, stream = pipe.corrupt_dataset(
            dataset,
            cset,
            seed=args.seed,
            share_group=args.share_group,
            clamp_override=clamp_override,
            storage=storage,
            threads=args.threads,
        )
    pipe.write_output(Path(args.output), manifest, stream)
    print(f"wrote {len(manifest.records)} corrupted images under {args.output}", file=sys.stderr)
    return EXIT_OK


# --- metrics ---------------------------------------------------------------


def _format_report(report: met.MetricReport) -> str:
    lines = ["metric          value"]

    def fmt(v):
        return "n/a" if v is None else repr(v)

    lines.append(f"clean_error     {fmt(report.clean_error)}")
    lines.append(f"mCE             {fmt(report.mCE)}")
    lines.append(f"mCE_xN          {fmt(report.mCE_xN)}")
    lines.append(f"mCE_Lp          {fmt(report.mCE_Lp)}")
    ice = report.iCE
    lines.append(f"iCE             {'n/a' if ice is None else repr(ice) + '%'}")
    lines.append("")
    lines.append("per-corruption mean error:")
    for label in sorted(report.per_corruption):
        lines.append(f"  {label:20s} {report.per_corruption[label]!r}")
    return "\n".join(lines) + "\n"


def cmd_metrics(args) -> int:
    if args.log:
        table = met.errors_from_log(met.parse_prediction_log(Path(args.log).read_text()))
    else:
        table = met.parse_table_file(Path(args.table).read_text())
    report = met.compute_report(table)
    if args.json:
        _emit(_json_dumps(report.as_dict()), args.out)
    else:
        _emit(_format_report(report), args.out)
    return EXIT_OK


# --- geometry ---------------------------------------------------------------


def _parse_eps_grid(text: str) -> list[float]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError("eps grid spec must be lo:hi:n:spacing or a comma list")
        lo, hi, n, spacing = float(parts[0]), float(parts[1]), int(parts[2]), parts[3]
        return csets.expand_grid(csets.EpsilonGrid(lo, hi, n, spacing))
    return [float(tok) for tok in text.split(",") if tok.strip()]


def cmd_geometry(args) -> int:
    if args.geometry_command == "volume":
        ball = geo.BallSpec(_parse_p(args.p), args.eps, args.d)
        lv = geo.log_volume(ball)
        if args.json:
            sys.stdout.write(_json_dumps({"d": args.d, "p": str(ball.p), "epsilon": args.eps,
                                          "log_volume": lv}))
        else:
            print(f"d={args.d} p={ball.p} eps={args.eps!r} log_volume={lv!r}")
        return EXIT_OK

    if args.geometry_command == "volume-factor":
        hi, lo = _parse_p(args.hi), _parse_p(args.lo)
        log_factor = geo.log_volume_factor(args.d, hi, lo)
        factor = math.exp(log_factor)
        if args.json:
            _emit(_json_dumps({"d": args.d, "p_hi": str(hi), "p_lo": str(lo),
                               "log_factor": log_factor, "factor": factor}), args.out)
        else:
            _emit(
                "d,p_hi,p_lo,log_factor,factor\n"
                f"{args.d},{hi},{lo},{log_factor!r},{factor!r}\n",
                args.out,
            )
        return EXIT_OK

    if args.geometry_command == "overlap":
        _print_seed(args.seed)
        first_p = _parse_p(args.first_p)
        second = geo.BallSpec(_parse_p(args.second_p), args.second_eps, args.d)
        if args.eps_grid:
            grid = _parse_eps_grid(args.eps_grid)
        elif first_p.is_zero:
            # ratio family: span the valid ratio range up from one component
            lo = max(0.001, 0.5 / args.d)
            grid = csets.expand_grid(csets.EpsilonGrid(lo, 1.0, 10, "log"))
        else:
            # bracket the same-norm crossover at the fixed ball's radius
            grid = csets.expand_grid(
                csets.EpsilonGrid(args.second_eps / 8.0, args.second_eps * 8.0, 10, "log")
            )
        family = geo.ball_family(first_p, grid, args.d)
        curve = geo.overlap_curve(family, second, args.samples, RngStream(args.seed))
        lines = ["epsilon,frac_first_in_second,frac_second_in_first,n"]
        for eps, fis, sif in zip(
            curve.epsilon_grid, curve.frac_first_in_second, curve.frac_second_in_first
        ):
            lines.append(f"{eps!r},{fis!r},{sif!r},{curve.n_samples}")
        _emit("\n".join(lines) + "\n", args.out)
        return EXIT_OK

    if args.geometry_command == "mc-volume":
        _print_seed(args.seed)
        ball = geo.BallSpec(_parse_p(args.p), args.eps, args.d)
        est = geo.mc_volume(ball, args.samples, RngStream(args.seed))
        closed = math.exp(geo.log_volume(ball))
        payload = {
            "d": args.d, "p": str(ball.p), "epsilon": args.eps,
            "estimate": est.volume, "std_error": est.std_error,
            "hits": est.hits, "n_samples": est.n_samples, "closed_form": closed,
        }
        if args.json:
            sys.stdout.write(_json_dumps(payload))
        else:
            print(
                f"volume estimate {est.volume!r} +- {est.std_error!r} "
                f"(closed form {closed!r}, {est.hits}/{est.n_samples} hits)"
            )
        return EXIT_OK

    # concentration
    _print_seed(args.seed)
    ball = geo.BallSpec(_parse_p(args.p), args.eps, args.d)
    summary = geo.concentration_check(ball, args.samples, RngStream(args.seed), RadialMode.parse(args.mode))
    payload = {
        "d": args.d, "p": str(ball.p), "epsilon": args.eps, "mode": args.mode,
        "mean": summary.mean, "median": summary.median,
        "q05": summary.q05, "q95": summary.q95,
        "min": summary.min, "max": summary.max, "n_samples": summary.n_samples,
    }
    if args.json:
        sys.stdout.write(_json_dumps(payload))
    else:
        print(
            f"radius/epsilon over {summary.n_samples} samples: mean {summary.mean!r} "
            f"median {summary.median!r} q05 {summary.q05!r} q95 {summary.q95!r}"
        )
    return EXIT_OK


# --- sample ----------------------------------------------------------------


def _noise_payload(noise: NoiseVector) -> dict:
    if noise.replace_mask is not None:
        idx = np.flatnonzero(noise.replace_mask)
        return {
            "indices": [int(i) for i in idx],
            "values": [float(v) for v in noise.components[idx]],
        }
    return {"components": [float(x) for x in noise.components]}


def _noise_text(noise: NoiseVector) -> str:
    if noise.replace_mask is not None:
        idx = np.flatnonzero(noise.replace_mask)
        return " ".join(f"{int(i)}:{float(noise.components[i])!r}" for i in idx)
    return ",".join(repr(float(x)) for x in noise.components)


def cmd_sample(args) -> int:
    _print_seed(args.seed)
    if args.set_name:
        # mirror the pipeline's stream discipline: spec from generator(0),
        # noise for slot 0 from generator(1, 0)
        cset = _load_named_set(args.set_name, args.profile)
        stream = RngStream(args.seed, args.group_index)
        spec = draw_training_spec(cset, stream.generator(0))
        spec_payload = {
            "p": spec.p_text, "epsilon": spec.epsilon,
            "mode": str(spec.radial_mode), "clamp": spec.clamp,
        }
        noises = []
        if not args.draw_only:
            gen = stream.generator(1, 0)
            noises = [sample(args.d, spec, gen) for _ in range(args.samples)]
        payload = {
            "seed": args.seed, "group_index": args.group_index, "d": args.d,
            "set": cset.name, "profile": cset.profile, "spec": spec_payload,
            "samples": [_noise_payload(nv) for nv in noises],
        }
        if args.json:
            _emit(_json_dumps(payload), args.out)
        else:
            lines = [f"# spec p={spec.p_text} eps={spec.epsilon!r} mode={spec.radial_mode}"]
            lines += [_noise_text(nv) for nv in noises]
            _emit("\n".join(lines) + "\n", args.out)
        return EXIT_OK

    if args.p is None or args.eps is None:
        raise ValueError("either --set or both --p and --eps are required")
    from .sampler import CorruptionSpec

    p = None if args.p.strip().lower() == "identity" else _parse_p(args.p)
    spec = CorruptionSpec(p, 0.0 if p is None else args.eps, RadialMode.parse(args.mode))
    gen = RngStream(args.seed, args.stream_index).generator()
    noises = [sample(args.d, spec, gen) for _ in range(args.samples)]
    if args.json:
        payload = {
            "seed": args.seed, "stream_index": args.stream_index, "d": args.d,
            "spec": {"p": spec.p_text, "epsilon": spec.epsilon, "mode": str(spec.radial_mode)},
            "samples": [_noise_payload(nv) for nv in noises],
        }
        _emit(_json_dumps(payload), args.out)
    else:
        _emit("\n".join(_noise_text(nv) for nv in noises) + "\n", args.out)
    return EXIT_OK


_HANDLERS = {
    "sets": cmd_sets,
    "corrupt": cmd_corrupt,
    "metrics": cmd_metrics,
    "geometry": cmd_geometry,
    "sample": cmd_sample,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as exc:
        print(f"error[validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
