"""Batch command line: ``lendscore <command> [flags]``.

Every command writes into ``--out-dir``. JSON reports embed the resolved
config and the package version, and contain nothing run-dependent (no
timestamps, no paths beyond those configured), so reruns are byte-identical.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 training error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, baselines, container, ingest, pipeline, widedeep
from .baselines import CartConfig
from .config import ConfigError, RunConfig, parse_pairs, resolve
from .errors import EmptyInput, LendscoreError
from .features import encode_records, fit_schema
from .irr import assign_irr
from .resample import Method, resample
from .synth import gen_synthetic
from .widedeep import Components

log = logging.getLogger("lendscore")

CONVENTIONS = {
    "label": "models are trained with Default = 1; stage-1 output is the probability of Default",
    "metrics": "confusion counts and precision/recall use Non-Default as the Positive class",
    "gate": "a loan is Filtered when pd > gamma, otherwise Passed",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _num(x):
    return repr(float(x))


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _report(cfg, command, body):
    return {"command": command, "version": __version__, "config": cfg.to_dict(), **body}


def _out(cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_cohort(cfg):
    """Labeled loans of the configured cohort, from CSVs or the generator."""
    if not cfg.loans:
        log.info("no loans file configured; generating a synthetic cohort")
        loans = gen_synthetic(cfg.synth_config())
    else:
        loans, rejects = ingest.load_loans(cfg.loans, cfg.column_map())
        if rejects:
            ingest.write_rejects(_out(cfg) / "rejects.csv", rejects)
            log.warning("%d rows rejected, see rejects.csv", len({r.row for r in rejects}))
        if cfg.payments:
            loans, attach = ingest.attach_cashflows(loans, ingest.load_payments(cfg.payments))
            loans, irr_report = assign_irr(loans)
            log.info("IRR labeled %d loans (%d total losses)", irr_report.labeled, irr_report.total_losses)
    loans = ingest.filter_cohort(loans, cfg.cohort_first_year, cfg.cohort_last_year)
    if not loans:
        raise EmptyInput("no loans in the configured cohort")
    return loans


def _split(cfg):
    return ingest.split_train_test(load_cohort(cfg), cfg.train_fraction, cfg.seed)


def cmd_synth(cfg):
    loans = gen_synthetic(cfg.synth_config())
    out = _out(cfg)
    ingest.write_loans(out / "loans.csv", loans)
    ingest.write_payments(out / "payments.csv", loans)
    rate = float(np.mean([l.is_default for l in loans]))
    print(f"wrote {len(loans)} loans (default rate {rate:.4f}) to {out}")


def cmd_describe(cfg):
    stats = ingest.summarize(load_cohort(cfg))
    _write_json(_out(cfg) / "describe.json", _report(cfg, "describe", {"summary": stats}))
    print(f"{stats['n_loans']} loans, default rate {stats['default_rate']:.4f}")


def _loss_rows(losses):
    return [(i + 1, _num(v)) for i, v in enumerate(losses)]


def cmd_train(cfg):
    split = _split(cfg)
    res = pipeline.train_two_stage(
        split.train,
        cfg.resample_plan(),
        cfg.train_config(1),
        cfg.train_config(2),
        cfg.feature_config(),
        cfg.gamma,
        validation_fraction=cfg.validation_fraction,
    )
    m, out = res.model, _out(cfg)
    container.save_model(m.stage1, m.schema, out / "stage1.model", {"gamma": m.gamma})
    container.save_model(m.stage2, m.schema, out / "stage2.model", {"gamma": m.gamma})
    _write_csv(out / "loss_stage1.csv", ["step", "cross_entropy"], _loss_rows(res.stage1_losses))
    _write_csv(out / "loss_stage2.csv", ["step", "mse"], _loss_rows(res.stage2_losses))
    body = {
        "n_train": len(split.train),
        "stage1_rows": res.stage1_counts,
        "stage2_rows": res.stage2_rows,
        "stage1_loss_first100": float(res.stage1_losses[:100].mean()),
        "stage1_loss_last100": float(res.stage1_losses[-100:].mean()),
        "stage2_loss_first100": float(res.stage2_losses[:100].mean()),
        "stage2_loss_last100": float(res.stage2_losses[-100:].mean()),
        "stage1_validation": [[s, v] for s, v in res.stage1_validation],
        "conventions": CONVENTIONS,
    }
    _write_json(out / "train.json", _report(cfg, "train", body))
    print(
        "stage 1 CE {:.4f} -> {:.4f}, stage 2 MSE {:.6f} -> {:.6f}".format(
            body["stage1_loss_first100"], body["stage1_loss_last100"],
            body["stage2_loss_first100"], body["stage2_loss_last100"],
        )
    )


def cmd_evaluate(cfg):
    split = _split(cfg)
    schema = fit_schema(split.train, cfg.feature_config())
    train = encode_records(schema, split.train)
    test = encode_records(schema, split.test)
    labeled = train.take(np.flatnonzero(~np.isnan(train.y)))
    positive = pipeline.positive_irr(train)

    grid = {}
    for method in cfg.evaluate_methods:
        balanced = resample(labeled, cfg.resample_plan(method))
        for comp in Components:
            tc = cfg.train_config(1, comp)
            params = widedeep.train(widedeep.init_params(schema, tc), balanced, tc).params
            rep = pipeline.eval_classification(params, schema, test, cfg.gamma)
            grid.setdefault(Method(method).value, {})[comp.value] = rep.to_dict()
    regression = {}
    for comp in Components:
        tc = cfg.train_config(2, comp)
        params = widedeep.train(widedeep.init_params(schema, tc), positive, tc).params
        regression[comp.value] = pipeline.eval_regression(params, schema, test)

    body = {"classification": grid, "regression_mse_positive_irr": regression, "conventions": CONVENTIONS}
    _write_json(_out(cfg) / "evaluate.json", _report(cfg, "evaluate", body))
    for method, row in grid.items():
        cells = "  ".join(f"{c}: p_p={r['precision_p']:.3f} r_n={r['recall_n']:.3f}" for c, r in row.items())
        print(f"{method:<12} {cells}")
    print("MSE " + "  ".join(f"{c}={v:.6f}" for c, v in regression.items()))


def cmd_compare(cfg):
    split = _split(cfg)
    res = pipeline.train_two_stage(
        split.train,
        cfg.resample_plan(),
        cfg.train_config(1),
        cfg.train_config(2),
        cfg.feature_config(),
        cfg.gamma,
        validation_fraction=cfg.validation_fraction,
    )
    model = res.model
    tree = baselines.train_cart(split.train, CartConfig(cfg.cart_max_depth, cfg.cart_min_leaf))
    train = encode_records(model.schema, split.train)
    labeled = train.take(np.flatnonzero(~np.isnan(train.y)))
    # credit scoring baseline is a plain logistic model: no resampling
    logistic = baselines.train_logistic(model.schema, labeled, cfg.train_config(1)).params
    cmp = pipeline.compare_approaches(model, tree, logistic, split.test, cfg.top_k)

    out = _out(cfg)
    clf = pipeline.eval_classification(model.stage1, model.schema, split.test, cfg.gamma)
    body = {
        **clf.to_dict(),
        "mse_positive_irr": pipeline.eval_regression(model.stage2, model.schema, split.test),
        **cmp.to_dict(),
        "n_test": len(split.test),
        "conventions": CONVENTIONS,
    }
    _write_json(out / "compare.json", _report(cfg, "compare", body))

    rows = []
    for name, top in cmp.selected.items():
        for rank, s in enumerate(top, start=1):
            score = s.pd if name == pipeline.APPROACH_NAMES[1] else s.predicted_irr
            actual = "" if s.actual_irr is None else _num(s.actual_irr)
            rows.append((name, rank, s.loan_id, _num(score), actual, s.grade))
    _write_csv(out / "top_k.csv", ["approach", "rank", "loan_id", "score", "actual_irr", "grade"], rows)
    for name, points in cmp.scatter.items():
        _write_csv(
            out / f"scatter_{name}.csv",
            ["loan_id", "actual_irr", "predicted_irr"],
            [(lid, _num(a), _num(p)) for lid, a, p in points],
        )
    for name, avg in cmp.avg_actual_irr.items():
        flag = " (shortfall)" if cmp.shortfall[name] else ""
        print(f"{name:<26} top-{cfg.top_k} avg actual IRR {avg:.4f}{flag}")


def cmd_score(cfg):
    if not cfg.listings:
        raise ConfigError("score needs listings = <csv> (or --listings)")
    models = Path(cfg.models or cfg.out_dir)
    stage1, schema, _ = container.load_model(models / "stage1.model")
    stage2, _, _ = container.load_model(models / "stage2.model")
    model = pipeline.TwoStageModel(schema, stage1, stage2, cfg.gamma)

    if os.path.getsize(cfg.listings) == 0:
        listings = []
    else:
        listings, rejects = ingest.load_loans(cfg.listings, cfg.column_map())
        if rejects:
            ingest.write_rejects(_out(cfg) / "rejects.csv", rejects)
    scored = pipeline.score_loans(model, listings)
    with_actual = any(s.actual_irr is not None for s in scored)
    header = ["loan_id", "pd", "gate", "predicted_irr", "grade", "unseen_level"]
    if with_actual:
        header.append("actual_irr")
    rows = []
    for s in scored:
        row = [
            s.loan_id,
            _num(s.pd),
            s.gate.value,
            "" if s.predicted_irr is None else _num(s.predicted_irr),
            s.grade,
            int(s.unseen_level),
        ]
        if with_actual:
            row.append("" if s.actual_irr is None else _num(s.actual_irr))
        rows.append(row)
    _write_csv(_out(cfg) / "scored.csv", header, rows)
    passed = sum(s.gate is pipeline.Gate.PASSED for s in scored)
    print(f"scored {len(scored)} listings, {passed} passed the gate")


COMMANDS = {
    "synth": cmd_synth,
    "describe": cmd_describe,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "score": cmd_score,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir")
    common.add_argument("--resample", choices=[m.value for m in Method])
    common.add_argument("--gamma", type=float)
    common.add_argument("--top-k", type=int)
    common.add_argument("--loans", help="loans CSV (default: generate a synthetic cohort)")
    common.add_argument("--payments", help="payments CSV (loan_id,date,amount)")
    common.add_argument("--listings", help="listings CSV to score")
    common.add_argument("--models", help="directory holding stage1.model and stage2.model")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="any config key, repeatable"
    )
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="lendscore", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lendscore {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def config_from_args(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides.update(parse_pairs([(k, v)]))
    for name in ("seed", "out_dir", "resample", "gamma", "top_k", "loans", "payments", "listings", "models"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return resolve(args.config, overrides)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        cfg = config_from_args(args)
        COMMANDS[args.command](cfg)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except LendscoreError as e:
        print(f"lendscore: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, OSError) as e:
        print(f"lendscore: {e}", file=sys.stderr)
        return 2 if isinstance(e, OSError) else 1
    return 0
