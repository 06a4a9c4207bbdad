"""Command-line front end: ``binrep <subcommand> [options]``.

Exit codes: 0 success, 1 data or numerical error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import simulation as sim
from .data import ReplicateDataset, load_csv, write_csv, write_wide_csv
from .decision import (
    LossSpec,
    NoIndecisionRegion,
    ThresholdPair,
    classify,
    confusion_table,
    empirical_risk,
    optimal_thresholds,
    write_confusion_csv,
)
from .errors import BinrepError
from .estimation import estimate, estimate_bayes
from .mcmc import gibbs_run, load_prior, summarize
from .prediction import predict_bayes, predict_plugin, prediction_table
from .scoring import ScoreVector, em_fit, score_average, score_map, score_median

METHOD_CODES = {"average": "A", "median": "M", "map": "MAP", "bayes": "B"}
DEFAULT_A = 0.45


class UsageError(Exception):
    pass


@dataclass
class Fitted:
    scores: ScoreVector
    params: dict | None = None   # JSON-ready fitted parameters for map / bayes
    model: object = None         # EmFitResult or PosteriorSample


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _out(path):
    """Open ``path`` for writing, or stdout when it is None or '-'."""
    if path in (None, "-"):
        return _NoClose(sys.stdout)
    return Path(path).open("w", newline="", encoding="utf-8")


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()


def _load(args) -> ReplicateDataset:
    if not args.input:
        raise UsageError("--input is required")
    return load_csv(args.input, format=args.format)


def _fit(data: ReplicateDataset, args) -> Fitted:
    method = METHOD_CODES[args.method]
    if method == "A":
        return Fitted(score_average(data))
    if method == "M":
        return Fitted(score_median(data))
    _say(f"seed: {args.seed}")
    if method == "MAP":
        fit = em_fit(data, restarts=args.restarts, seed=args.seed)
        p = fit.params
        params = {"method": "map", "theta_hat": p.theta_T, "p_hat": p.p, "q_hat": p.q,
                  "log_posterior": fit.log_posterior, "restarts": fit.restarts_used, "seed": args.seed}
        return Fitted(score_map(data, fit), params, fit)
    prior = load_prior(args.prior)
    sample = gibbs_run(data, prior, chains=args.chains, iters=args.iters, burnin=args.burnin, seed=args.seed)
    summary = summarize(sample)
    est = json.loads(estimate_bayes(summary).to_json())
    est.update(method="bayes", prior=prior.as_dict(), seed=args.seed, chains=args.chains,
               iters=args.iters, burnin=args.burnin)
    return Fitted(summary.bayes_scores, est, sample)


def _sidecar(args, params: dict | None) -> None:
    if params is None:
        return
    if args.params:
        target = args.params
    elif args.output not in (None, "-"):
        target = str(args.output) + ".json"
    else:
        _say(json.dumps(params))
        return
    Path(target).write_text(json.dumps(params, indent=2) + "\n", encoding="utf-8")
    _say(f"parameters written to {target}")


def _parse_loss(text: str) -> LossSpec:
    try:
        a, b, c, d = (float(x) for x in text.split(","))
    except ValueError:
        raise UsageError("--loss expects four comma-separated numbers a,b,c,d") from None
    return LossSpec(a, b, c, d)


def _thresholds(args) -> tuple[ThresholdPair, LossSpec | None]:
    """Thresholds from --vl/--vu or from --loss; defaults to the symmetric a = 0.45 loss."""
    if args.loss and (args.vl is not None or args.vu is not None):
        raise UsageError("give either --loss or --vl/--vu, not both")
    if args.loss:
        loss = _parse_loss(args.loss)
        opt = optimal_thresholds(loss)
        if isinstance(opt, NoIndecisionRegion):
            _say(f"indecision never optimal; using v_L = v_U = {opt.cut:g}")
            return ThresholdPair(opt.cut, opt.cut), loss
        _say(f"v_L={opt.v_L:g}, v_U={opt.v_U:g}")
        return opt, loss
    if (args.vl is None) != (args.vu is None):
        raise UsageError("--vl and --vu must be given together")
    if args.vl is None:
        return ThresholdPair.symmetric(DEFAULT_A), LossSpec.symmetric(DEFAULT_A)
    pair = ThresholdPair(args.vl, args.vu)
    loss = LossSpec.symmetric(args.vl) if np.isclose(args.vl + args.vu, 1.0) else None
    return pair, loss


def cmd_score(args) -> int:
    data = _load(args)
    fitted = _fit(data, args)
    with _out(args.output) as fh:
        w = csv.writer(fh)
        w.writerow(["id", "n", "s", "score"])
        for row in zip(data.ids, data.n.tolist(), data.s.tolist(), fitted.scores.scores.tolist()):
            w.writerow(row)
    _sidecar(args, fitted.params)
    return 0


def cmd_classify(args) -> int:
    pair, loss = _thresholds(args)
    data = _load(args)
    fitted = _fit(data, args)
    dec = classify(fitted.scores, pair)
    with _out(args.output) as fh:
        w = csv.writer(fh)
        w.writerow(["id", "score", "decision"])
        for row in zip(data.ids, fitted.scores.scores.tolist(), dec.decisions.tolist()):
            w.writerow(row)
    _sidecar(args, fitted.params)
    if data.has_status:
        tab = confusion_table(dec, data.status)
        _say("confusion (rows status 0/1; columns decision 0, 1/2, 1):")
        for status in (0, 1):
            _say(f"  {status}: " + " ".join(str(v) for v in tab[status]))
        if args.confusion:
            write_confusion_csv({args.method: tab}, args.confusion)
        if loss is not None:
            total = empirical_risk(dec, data.status, loss, mode="total")
            _say(f"risk total={total:.6g} mean={total / len(data):.6g}")
    return 0


def cmd_estimate(args) -> int:
    data = _load(args)
    fitted = _fit(data, args)
    if METHOD_CODES[args.method] == "B":
        text = json.dumps(fitted.params)
    else:
        est = estimate(data, fitted.scores, method=args.method)
        text = est.to_json()
    with _out(args.output) as fh:
        fh.write(text + "\n")
    return 0


def _predictor(data: ReplicateDataset, args):
    fitted = _fit(data, args)
    code = METHOD_CODES[args.method]
    if code in ("A", "M"):
        params = estimate(data, fitted.scores).params()
        return lambda n, s: predict_plugin(n, s, params)
    if code == "MAP":
        return lambda n, s: predict_plugin(n, s, fitted.model.params)
    return lambda n, s: predict_bayes(n, s, fitted.model)


def cmd_predict(args) -> int:
    pair, _ = _thresholds(args)
    data = _load(args)
    predictor = _predictor(data, args)
    if args.table:
        tab = prediction_table(args.nmax, predictor, pair)
        if args.output in (None, "-"):
            w = csv.writer(sys.stdout)
            w.writerow(["n", "s", "score", "decision"])
            for row in zip(tab.n.tolist(), tab.s.tolist(), tab.score.tolist(), tab.decision.tolist()):
                w.writerow(row)
        else:
            tab.write_csv(args.output)
        return 0
    if args.n is None or args.s is None:
        raise UsageError("predict needs --table or both --n and --s")
    y = float(predictor(args.n, args.s))
    dec = classify(ScoreVector(METHOD_CODES[args.method], np.array([y])), pair).decisions[0]
    with _out(args.output) as fh:
        w = csv.writer(fh)
        w.writerow(["n", "s", "score", "decision"])
        w.writerow([args.n, args.s, y, float(dec)])
    return 0


def cmd_simulate(args) -> int:
    _say(f"seed: {args.seed}")
    if args.mammography:
        raw = sim.simulate_mammography(sim.MammoConfig(seed=args.seed))
        if args.output in (None, "-"):
            raise UsageError("--output is required for the mammography layout")
        write_wide_csv(raw, args.output)
        return 0
    cfg = sim.SimConfig(theta_T=args.theta, p=args.p, q=args.q, N=args.N,
                        n_min=args.n_min, n_max=args.n_max, seed=args.seed)
    data = sim.simulate_dataset(cfg)
    if args.output in (None, "-"):
        w = csv.writer(sys.stdout)
        w.writerow(["id", "n", "s", "status"])
        for row in zip(data.ids, data.n.tolist(), data.s.tolist(), data.status.tolist()):
            w.writerow(row)
    else:
        write_csv(data, args.output)
    return 0


def _grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            k = int(np.floor((stop - start) / step + 1e-9))
            return [round(start + i * step, 12) for i in range(k + 1)]
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse grid {text!r}") from None


def cmd_experiment(args) -> int:
    _say(f"seed: {args.seed}")
    methods = [METHOD_CODES[m] if m in METHOD_CODES else m for m in args.methods.split(",")]
    mcmc = sim.McmcSettings(args.chains, args.iters, args.burnin)
    cfg = sim.SimConfig(theta_T=args.theta_T, p=args.p, q=args.q, N=args.N,
                        n_min=args.n_min, n_max=args.n_max, seed=args.seed)
    if args.mode == "bias":
        grid = _grid(args.theta or "0.01:0.5:0.01")
        result = sim.run_bias_experiment(grid, args.reps, cfg, methods, mcmc=mcmc, restarts=args.restarts)
    else:
        grid = _grid(args.a or "0.1:0.5:0.02")
        result = sim.run_risk_experiment(grid, args.reps, cfg, methods, mcmc=mcmc, restarts=args.restarts)
    if args.output in (None, "-"):
        w = csv.writer(sys.stdout)
        w.writerow([result.x_name, "method", "median", "q40", "q60"])
        for row in result.summary():
            w.writerow(row)
        return 0
    result.write_csv(args.output)
    summary = args.summary or str(Path(args.output).with_suffix("")) + ".summary.csv"
    result.write_summary_csv(summary)
    _say(f"summary written to {summary}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input CSV")
    common.add_argument("--format", choices=("sufficient", "wide"), default="sufficient")
    common.add_argument("--output", help="output path (default stdout)")
    common.add_argument("--params", help="JSON sidecar path for fitted parameters")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--method", choices=tuple(METHOD_CODES), default="average")
    common.add_argument("--prior", default="default", help="default, misguided, or a JSON file")
    common.add_argument("--vl", type=float)
    common.add_argument("--vu", type=float)
    common.add_argument("--loss", help="a,b,c,d")
    common.add_argument("--chains", type=int, default=4)
    common.add_argument("--iters", type=int, default=5000)
    common.add_argument("--burnin", type=int, default=1000)
    common.add_argument("--restarts", type=int, default=20)

    parser = argparse.ArgumentParser(prog="binrep", description="Scores, decisions and estimates for binary technical replicates.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="per-individual scores")
    p.set_defaults(func=cmd_score)
    p = sub.add_parser("classify", parents=[common], help="three-way decisions")
    p.add_argument("--confusion", help="write the confusion table CSV here")
    p.set_defaults(func=cmd_classify)
    p = sub.add_parser("estimate", parents=[common], help="prevalence and error rates as JSON")
    p.set_defaults(func=cmd_estimate)
    p = sub.add_parser("predict", parents=[common], help="scores and decisions for new individuals")
    p.add_argument("--table", action="store_true", help="enumerate every (n, s) up to --nmax")
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=int)
    p.set_defaults(func=cmd_predict)

    sim_opts = argparse.ArgumentParser(add_help=False)
    sim_opts.add_argument("--p", type=float, default=0.1)
    sim_opts.add_argument("--q", type=float, default=0.05)
    sim_opts.add_argument("--N", type=int, default=200)
    sim_opts.add_argument("--n-min", dest="n_min", type=int, default=2)
    sim_opts.add_argument("--n-max", dest="n_max", type=int, default=6)

    p = sub.add_parser("simulate", parents=[common, sim_opts], help="simulate a dataset")
    p.add_argument("--theta", type=float, default=0.4)
    p.add_argument("--mammography", action="store_true", help="reader-study layout (wide CSV)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", parents=[common, sim_opts], help="bias or risk experiment tables")
    p.add_argument("mode", choices=("bias", "risk"))
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("--theta", help="prevalence grid start:stop:step or list (bias mode)")
    p.add_argument("--theta-T", dest="theta_T", type=float, default=0.4, help="prevalence in risk mode")
    p.add_argument("--a", help="indecision-cost grid start:stop:step or list (risk mode)")
    p.add_argument("--methods", default="A,M,MAP,B")
    p.add_argument("--summary", help="summary CSV path")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _say(f"binrep: error: {exc}")
        return 2
    except (BinrepError, ValueError, ArithmeticError, OSError) as exc:
        _say(f"binrep: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
