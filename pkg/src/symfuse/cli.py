"""Command-line interface (``symfuse`` / ``python -m symfuse``).

Exit codes: 0 success, 1 usage error, 2 data or format error,
3 numeric or invariant error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .errors import DataError, InvariantError, SymfuseError
from .evaluation import (
    compute_eer,
    finger_qualities,
    jackknife_eer,
    per_group_eer,
    quality_partition,
)
from .fusion import (
    CascadeConfig,
    bayes_fuse,
    fuse_max,
    fuse_sum,
    cascade_scores,
    default_thresholds,
    panel_variances,
    quality_index,
    train_supervisor,
)
from .quality import assess_fingerprint
from .synth import ExpertModel, generate_synthetic_panel, generate_test_pattern

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args):
    return sio.read_config(args.config) if getattr(args, "config", None) else sio.RunConfig()


def _panel(path):
    return sio.records_to_panel(sio.read_scores(path))


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _emit(lines, out=None):
    text = "".join(line + "\n" for line in lines)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _fused_records(panel, scores, name="fused"):
    # fused estimates of a 0/1 authenticity can overshoot; score files hold [0, 1]
    scores = np.clip(scores, 0.0, 1.0)
    return [
        sio.ScoreRecord(name, str(panel.shot_ids[t]), str(panel.claim_ids[t]), float(scores[t]),
                        float(panel.qualities[t, 0]), float(panel.claim_qualities[t, 0]),
                        sio.LABEL_NAMES[int(panel.labels[t])])
        for t in range(len(panel))
    ]


# -- subcommands ------------------------------------------------------------

def cmd_quality(args):
    cfg = _config(args)
    report = assess_fingerprint(sio.load_image(args.image), cfg.quality_config())
    if args.map:
        sio.write_quality_map(args.map, report)
    print(f"Q={report.quality:.6f}")


def cmd_synth_pattern(args):
    img = generate_test_pattern(args.order, args.alpha, args.size, args.wavelength)
    sio.write_pgm(args.out, img)


SYNTH_KEYS = {"experts", "bias", "impostor_bias", "noise", "quality", "users", "genuine",
              "impostor", "quality_low", "quality_high", "claim_quality", "clamp"}


def read_synth_spec(path):
    """Parse a ``key=value`` synthetic panel description."""
    kv = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        ln = raw.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise sio.FormatError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in ln.split("=", 1))
        if k not in SYNTH_KEYS:
            raise sio.FormatError(f"{path}:{n}: unknown key {k!r}")
        kv[k] = v
    try:
        names = [s.strip() for s in kv["experts"].split(",")]
        m = len(names)
        bias = _floats(kv["bias"])
        noise = _floats(kv["noise"])
        ibias = _floats(kv["impostor_bias"]) if "impostor_bias" in kv else (None,) * m
        quality = [s.strip() for s in kv.get("quality", ",".join(["fixed"] * m)).split(",")]
        if not len(bias) == len(noise) == len(ibias) == len(quality) == m:
            raise sio.FormatError(f"{path}: per-expert lists must all have {m} entries")
        experts = [ExpertModel(*args) for args in zip(names, bias, noise, quality, ibias)]
        opts = dict(
            n_users=int(kv.get("users", 10)),
            genuine_per_user=int(kv.get("genuine", 10)),
            impostor_per_user=int(kv.get("impostor", 10)),
            quality_range=(float(kv.get("quality_low", 0.25)), float(kv.get("quality_high", 2.0))),
            claim_quality=float(kv.get("claim_quality", 2.0)),
            clamp=sio._bool(kv.get("clamp", "true")),
        )
    except KeyError as exc:
        raise sio.FormatError(f"{path}: missing key {exc.args[0]}") from None
    except (ValueError, UsageError) as exc:
        raise sio.FormatError(f"{path}: {exc}") from None
    return experts, opts


def cmd_synth_scores(args):
    experts, opts = read_synth_spec(args.spec)
    panel = generate_synthetic_panel(experts, seed=args.seed, **opts)
    sio.write_scores(args.out, sio.panel_to_records(panel))


def cmd_fuse_train(args):
    cfg = _config(args)
    panel = _panel(args.scores)
    if (panel.labels < 0).any():
        raise DataError("training needs labelled (genuine/impostor) trials only")
    adaptive = cfg.adaptive and not args.ignore_quality
    s = panel_variances(panel.qualities, panel.claim_qualities, adaptive, cfg.q_floor,
                        shape=panel.scores.shape)
    g, i = panel.genuine, panel.impostor
    sup = train_supervisor(panel.scores[g], panel.scores[i], s[g], s[i],
                           experts=panel.experts, alpha_floor=cfg.alpha_floor)
    sio.write_model(args.out, sup)


def cmd_fuse_run(args):
    cfg = _config(args)
    panel = _panel(args.scores)
    if args.mode in ("bayes", "bayes-adaptive"):
        if not args.model:
            raise UsageError("--model is required for Bayesian fusion")
        sup = sio.read_model(args.model)
        panel = panel.select_experts(sup.experts) if set(sup.experts) <= set(panel.experts) else panel
        if panel.experts != sup.experts:
            raise sio.PanelError(f"score file experts {panel.experts} != model experts {sup.experts}")
        fused = bayes_fuse(sup, panel.scores, panel.qualities, panel.claim_qualities,
                           adaptive=args.mode == "bayes-adaptive", q_floor=cfg.q_floor).score
    else:
        fused = (fuse_sum if args.mode == "sum" else fuse_max)(panel.scores)
    sio.write_scores(args.out, _fused_records(panel, np.atleast_1d(fused)))


def cmd_cascade_run(args):
    cfg = _config(args)
    panel = _panel(args.scores)
    m = len(panel.experts)
    certainty = quality_index(panel.qualities[:, 0], panel.claim_qualities[:, 0])
    thresholds = _floats(args.thresholds) if args.thresholds else cfg.cascade_thresholds
    if not thresholds and m > 1:
        thresholds = default_thresholds(m, float(certainty.max()))
    rule = args.rule or cfg.rule
    casc = CascadeConfig(thresholds, rule)
    if casc.n_experts != m:
        raise UsageError(f"{m} experts need {m - 1} thresholds, got {len(thresholds)}")
    fused, used = cascade_scores(casc, panel.scores, certainty)
    sio.write_scores(args.out, _fused_records(panel, fused))
    lines = [f"executions={used.sum() / (len(used) * m):.6f}"]
    for i, name in enumerate(panel.experts):
        lines.append(f"executions[{name}]={np.mean(used > i):.6f}")
    _emit(lines)


def cmd_eval_eer(args):
    panel = _panel(args.scores)
    lab = panel.labels
    lines = []
    for i, name in enumerate(panel.experts):
        eer = compute_eer(panel.scores[lab == 1, i], panel.scores[lab == 0, i])
        key = "EER" if len(panel.experts) == 1 else f"EER[{name}]"
        lines.append(f"{key}={eer:.6f}")
    _emit(lines)


def _expert_column(panel, name):
    if name is None:
        return 0
    if name not in panel.experts:
        raise UsageError(f"unknown expert {name!r}")
    return panel.experts.index(name)


def cmd_eval_groups(args):
    cfg = _config(args)
    panel = _panel(args.scores)
    i = _expert_column(panel, args.expert)
    q = quality_index(panel.qualities[:, i], panel.claim_qualities[:, i])
    quals = finger_qualities(panel.claim_ids, q, panel.labels)
    part = quality_partition(quals, args.k or cfg.k_groups)
    results = per_group_eer(part, panel.claim_ids, panel.scores[:, i], panel.labels)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "n_genuine", "n_impostor", "eer"])
    for r in results:
        w.writerow([r.group, r.n_genuine, r.n_impostor, f"{r.eer:.6f}"])
    _emit(buf.getvalue().splitlines(), args.out)


def cmd_eval_jackknife(args):
    cfg = _config(args)
    panel = _panel(args.scores)
    adaptive = cfg.adaptive if args.fusion is None else args.fusion == "bayes-adaptive"
    res = jackknife_eer(panel, adaptive=adaptive, mode=args.mode or cfg.jackknife_mode,
                        train_per_user=args.train_per_user, q_floor=cfg.q_floor,
                        alpha_floor=cfg.alpha_floor)
    _emit([f"EER={res.eer:.6f}"])


# -- wiring -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="symfuse", description="Symmetry-based fingerprint quality and score fusion.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("quality", help="estimate the quality of a fingerprint image")
    q.add_argument("image")
    q.add_argument("--config")
    q.add_argument("--map", help="write the block quality map as CSV")
    q.set_defaults(func=cmd_quality)

    synth = sub.add_parser("synth", help="synthetic patterns and score panels")
    ssub = synth.add_subparsers(dest="what", required=True, parser_class=_Parser)
    sp = ssub.add_parser("pattern")
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--alpha", type=float, default=0.0)
    sp.add_argument("--size", type=int, default=128)
    sp.add_argument("--wavelength", type=float, default=8.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth_pattern)
    ss = ssub.add_parser("scores")
    ss.add_argument("--spec", required=True)
    ss.add_argument("--seed", type=int, default=0)
    ss.add_argument("--out", required=True)
    ss.set_defaults(func=cmd_synth_scores)

    fuse = sub.add_parser("fuse", help="train and run score fusion")
    fsub = fuse.add_subparsers(dest="what", required=True, parser_class=_Parser)
    ft = fsub.add_parser("train")
    ft.add_argument("--scores", required=True)
    ft.add_argument("--out", required=True)
    ft.add_argument("--config")
    ft.add_argument("--ignore-quality", action="store_true",
                    help="train with unit score variances")
    ft.set_defaults(func=cmd_fuse_train)
    fr = fsub.add_parser("run")
    fr.add_argument("--model")
    fr.add_argument("--scores", required=True)
    fr.add_argument("--mode", choices=["bayes", "bayes-adaptive", "sum", "max"], required=True)
    fr.add_argument("--out", required=True)
    fr.add_argument("--config")
    fr.set_defaults(func=cmd_fuse_run)

    casc = sub.add_parser("cascade", help="quality-triggered cascaded fusion")
    csub = casc.add_subparsers(dest="what", required=True, parser_class=_Parser)
    cr = csub.add_parser("run")
    cr.add_argument("--scores", required=True)
    cr.add_argument("--thresholds")
    cr.add_argument("--rule", choices=["max", "sum"])
    cr.add_argument("--out", required=True)
    cr.add_argument("--config")
    cr.set_defaults(func=cmd_cascade_run)

    ev = sub.add_parser("eval", help="error rates and evaluation protocols")
    esub = ev.add_subparsers(dest="what", required=True, parser_class=_Parser)
    ee = esub.add_parser("eer")
    ee.add_argument("--scores", required=True)
    ee.set_defaults(func=cmd_eval_eer)
    eg = esub.add_parser("groups")
    eg.add_argument("--scores", required=True)
    eg.add_argument("--k", type=int)
    eg.add_argument("--expert")
    eg.add_argument("--out")
    eg.add_argument("--config")
    eg.set_defaults(func=cmd_eval_groups)
    ej = esub.add_parser("jackknife")
    ej.add_argument("--scores", required=True)
    ej.add_argument("--mode", choices=["pooled", "mean"])
    ej.add_argument("--fusion", choices=["bayes", "bayes-adaptive"])
    ej.add_argument("--train-per-user", type=int)
    ej.add_argument("--config")
    ej.set_defaults(func=cmd_eval_jackknife)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"symfuse: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"symfuse: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvariantError, SymfuseError) as exc:
        print(f"symfuse: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
