"""Command-line surface: simulate, fit, audit, mitigate, risk, losses, predict.

Every command writes JSON/CSV artifacts with a provenance block (sha256 of
each input file, the seed when one is used, the package version) and no
timestamps, so identical flags and inputs produce byte-identical outputs.

Exit codes: 0 success, 2 usage error, 3 empty-group/degenerate data,
4 model error, 5 I/O failure.  Failures print ``{"error": ..., "message":
...}`` to stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .dataio import (
    SchemaConfig,
    load_csv,
    load_schema_config,
    read_sidecar,
    save_csv,
    save_schema_config,
)
from .errors import (
    DegenerateData,
    EmptyGroup,
    EmptyPolicy,
    IoFailure,
    SchemaMismatch,
    TreatfairError,
)
from .estimators import EstimatorConfig, fit, goodness, model_from_doc, model_to_doc, split_dataset
from .metrics import DisparityConfig, disparity_report, ttd_e_multi, ttd_multi
from .mitigation import (
    AnnuityAmount,
    RateDuration,
    TreatmentPolicy,
    build_fair_dataset,
    fair_risk_scores,
    ks_distance,
    loss_report,
    risk_cdf,
)
from .predictors import (
    DEMOGRAPHIC_PARITY,
    EQUALIZED_ODDS,
    PredictorModel,
    audit_under_policy,
    evaluate,
    postprocess,
    split_indices,
    train,
)
from .schema import Dataset
from .synth import SynthConfig, build_oracle, generate, synth_schema

REPORT_VERSION = 1


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def _digest(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return h.hexdigest()


def _provenance(command: str, inputs: dict[str, str | None], seed: int | None = None) -> dict:
    block = {
        "spec_version": REPORT_VERSION,
        "package_version": __version__,
        "command": command,
        "inputs": {name: _digest(path) for name, path in inputs.items() if path},
    }
    if seed is not None:
        block["seed"] = int(seed)
    return block


def _write_json(doc: dict, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _write_rows(rows, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh).writerows(rows)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path} is not valid JSON: {exc}") from exc


def _load_dataset(args) -> Dataset:
    return load_csv(args.data, load_schema_config(args.schema))


def _load_model(spec: str, data_path: str):
    """Resolve --model: the literal 'oracle' rebuilds the generator recorded in
    the dataset's sidecar; anything else is a fitted-model JSON path."""
    if spec == "oracle":
        side = read_sidecar(data_path) or {}
        synth = side.get("provenance", {}).get("synth")
        if synth is None:
            raise SchemaMismatch(
                "--model oracle needs a dataset written by `simulate` "
                f"(no synthetic config in {data_path}.meta.json)"
            )
        return build_oracle(SynthConfig(**synth))
    doc = _read_json(spec)
    return model_from_doc(doc.get("model", doc))


def _model_input(spec: str) -> str | None:
    return None if spec == "oracle" else spec


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    config = SynthConfig(
        beta=args.beta,
        gamma=args.gamma,
        delta=args.delta,
        eta=args.eta,
        n=args.n,
        seed=args.seed,
        outcome_variant=args.variant,
    )
    data = generate(config)
    data.provenance["cli"] = _provenance("simulate", {}, args.seed)
    save_csv(data, args.out)
    schema_out = args.schema_out if args.schema_out else args.out + ".schema.json"
    save_schema_config(SchemaConfig(synth_schema(), {}), schema_out)
    return 0


def cmd_fit(args) -> int:
    data = _load_dataset(args)
    config = EstimatorConfig(
        learner="additive_noise",
        basis=args.basis,
        regularization=args.regularization,
        train_split=tuple(args.train_split),
    )
    model = fit(data, data.schema, config)
    splits = split_dataset(data, config.train_split)
    holdout = splits[1] if len(splits) > 1 else splits[0]
    doc = {
        "spec_version": REPORT_VERSION,
        "provenance": _provenance("fit", {"data": args.data, "schema": args.schema}),
        "estimator": {
            "learner": config.learner,
            "basis": config.basis,
            "regularization": config.regularization,
            "train_split": list(config.train_split),
        },
        "model": model_to_doc(model),
        "goodness": goodness(model, holdout),
    }
    _write_json(doc, args.out)
    return 0


def cmd_audit(args) -> int:
    data = _load_dataset(args)
    model = _load_model(args.model, args.data)
    config = DisparityConfig(
        group_pair=(args.group_pair[0], args.group_pair[1]),
        sensitive_column=args.sensitive_column,
        aggregator=args.multi,
        values=tuple(args.values) if args.values else None,
        corrected_mean=args.corrected_mean,
    )
    inputs = {"data": args.data, "schema": args.schema, "model": _model_input(args.model)}
    if args.predictor:
        predictor = PredictorModel.from_doc(_read_json(args.predictor).get("predictor"))
        report = audit_under_policy(data, model, predictor, config)
        inputs["predictor"] = args.predictor
    else:
        report = disparity_report(data, model, config)
    doc = report.to_doc()
    if args.stats != "both":
        doc["ttd"] = {args.stats: doc["ttd"][args.stats]}
        doc["dtd"] = {args.stats: doc["dtd"][args.stats]}
    if args.multi:
        doc["ttd_multi"] = ttd_multi(data, model, config)
        doc["ttd_e_multi"] = ttd_e_multi(data, model, config)
    doc = {
        "spec_version": REPORT_VERSION,
        "provenance": _provenance("audit", inputs),
        **doc,
    }
    _write_json(doc, args.out)
    if args.csv:
        _write_rows(report.to_csv_rows(), args.csv)
    return 0


def cmd_mitigate(args) -> int:
    data = _load_dataset(args)
    model = _load_model(args.model, args.data)
    fair = build_fair_dataset(
        data,
        model,
        disadvantaged=args.disadvantaged,
        advantaged=args.advantaged,
        sensitive_column=args.sensitive_column,
    )
    fair.provenance["cli"] = _provenance(
        "mitigate",
        {"data": args.data, "schema": args.schema, "model": _model_input(args.model)},
    )
    save_csv(fair, args.out)
    return 0


def cmd_risk(args) -> int:
    data = _load_dataset(args)
    model = _load_model(args.model, args.data)
    reference = None
    if args.reference:
        reference = load_csv(args.reference, load_schema_config(args.schema))
    policy = TreatmentPolicy(
        kind=args.policy,
        group_column=args.policy_column,
        group_value=args.policy_group,
        reference=reference,
        sensitive_column=args.policy_column,
        target_value=args.policy_target,
        seed=args.seed,
        sample_count=args.samples,
    )
    scores = fair_risk_scores(data, model, policy, threads=args.threads)

    group_col = args.group_column if args.group_column else data.schema.sensitive[0]
    group = data.column(group_col)
    values = [float(v) for v in np.unique(group)]
    by_group = {str(v): scores[group == v] for v in values}

    ks = None
    if len(values) == 2:
        ks = {
            "pair": values,
            "distance": ks_distance(by_group[str(values[0])], by_group[str(values[1])]),
        }
    doc = {
        "spec_version": REPORT_VERSION,
        "provenance": _provenance(
            "risk",
            {
                "data": args.data,
                "schema": args.schema,
                "model": _model_input(args.model),
                "reference": args.reference,
            },
            args.seed,
        ),
        "policy": {
            "kind": policy.kind,
            "group_column": policy.group_column,
            "group_value": policy.group_value,
            "target_value": policy.target_value,
            "sample_count": policy.sample_count,
        },
        "group_column": group_col,
        "n": int(data.n),
        "mean_score": {k: float(v.mean()) for k, v in by_group.items()},
        "ks": ks,
    }
    _write_json(doc, args.out)

    if args.scores_out:
        rows = [(group_col, "score")]
        rows += [(repr(float(g)), repr(float(s))) for g, s in zip(group, scores)]
        _write_rows(rows, args.scores_out)
    if args.cdf_out:
        cdfs = {k: risk_cdf(v) for k, v in by_group.items()}
        header = ["p"] + [f"cdf_{k}" for k in cdfs]
        grid = next(iter(cdfs.values()))[:, 0]
        rows = [header]
        for i, p in enumerate(grid):
            rows.append([repr(float(p))] + [repr(float(c[i, 1])) for c in cdfs.values()])
        _write_rows(rows, args.cdf_out)
    return 0


def cmd_losses(args) -> int:
    data = _load_dataset(args)
    if args.utility == "rate_duration":
        if not args.duration_column:
            raise SchemaMismatch("--utility rate_duration needs --duration-column")
        formula = RateDuration(args.duration_column, args.rate)
    else:
        if not args.annuity_column:
            raise SchemaMismatch("--utility annuity needs --annuity-column")
        formula = AnnuityAmount(args.annuity_column, args.years)
    report = loss_report(
        data, args.amount_column, formula, group_column=args.group_column, tag=args.tag
    )
    doc = {
        "spec_version": REPORT_VERSION,
        "provenance": _provenance("losses", {"data": args.data, "schema": args.schema}),
        "utility": args.utility,
        "report": report.to_doc(),
    }
    _write_json(doc, args.out)
    return 0


def cmd_predict(args) -> int:
    data = _load_dataset(args)
    predictor = train(data, seed=args.seed, group_column=args.group_column)
    criterion = {"none": None, "dp": DEMOGRAPHIC_PARITY, "eod": EQUALIZED_ODDS}[args.criterion]
    if criterion is not None:
        predictor = postprocess(predictor, data, criterion)
    rows_train, rows_test = split_indices(
        data.column(data.schema.outcome), args.seed, predictor.metadata["train_fraction"]
    )

    def block(rows) -> dict:
        m = evaluate(predictor, data, rows)
        m["dp_gap"] = m["positive_rate_gap"]
        m["eod_gap"] = max(m["tpr_gap"], m["fpr_gap"])
        return m

    doc = {
        "spec_version": REPORT_VERSION,
        "provenance": _provenance(
            "predict", {"data": args.data, "schema": args.schema}, args.seed
        ),
        "criterion": args.criterion,
        "predictor": predictor.to_doc(),
        "metrics": {"train": block(rows_train), "test": block(rows_test)},
    }
    _write_json(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _fractions(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}") from None


def _add_io(p: argparse.ArgumentParser, model: bool = False) -> None:
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--schema", required=True, help="schema config JSON")
    if model:
        p.add_argument(
            "--model",
            required=True,
            help="fitted model JSON, or 'oracle' to rebuild the recorded generator",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treatfair",
        description="Causal auditing and mitigation of treatment disparities",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate the synthetic loan dataset")
    p.add_argument("--beta", type=float, default=0.03)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=5.0)
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--variant", choices=("noisy", "deterministic"), default="noisy")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--schema-out", help="schema config path (default: <out>.schema.json)")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", help="learn an additive-noise model from a CSV")
    _add_io(p)
    p.add_argument("--basis", choices=("linear", "linear_plus_pairwise"), default="linear_plus_pairwise")
    p.add_argument("--regularization", type=float, default=100.0)
    p.add_argument("--train-split", type=_fractions, default=[0.8, 0.1, 0.1])
    p.add_argument("--out", required=True, help="output model JSON")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("audit", help="treatment-disparity report for one group pair")
    _add_io(p, model=True)
    p.add_argument("--group-pair", type=float, nargs=2, default=[0.0, 1.0], metavar=("FROM", "TO"))
    p.add_argument("--sensitive-column")
    p.add_argument("--stats", choices=("both", "median", "mean"), default="both")
    p.add_argument("--multi", choices=("avg", "max", "var"), help="multi-value aggregation")
    p.add_argument("--values", type=float, nargs="+", help="sensitive support for --multi")
    p.add_argument("--corrected-mean", action="store_true")
    p.add_argument("--predictor", help="restrict to rows accepted by this predictor JSON")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--csv", help="also write the report as CSV")
    p.set_defaults(handler=cmd_audit)

    p = sub.add_parser("mitigate", help="write the treatment-corrected dataset")
    _add_io(p, model=True)
    p.add_argument("--disadvantaged", type=float, required=True)
    p.add_argument("--advantaged", type=float, required=True)
    p.add_argument("--sensitive-column")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(handler=cmd_mitigate)

    p = sub.add_parser("risk", help="treatment-marginalized default risk scores")
    _add_io(p, model=True)
    p.add_argument(
        "--policy",
        choices=("factual", "empirical_conditional", "sensitive_counterfactual"),
        default="factual",
    )
    p.add_argument("--policy-column", help="sensitive/group column for the policy")
    p.add_argument("--policy-group", type=float, help="reference group value (empirical_conditional)")
    p.add_argument("--policy-target", type=float, help="target value (sensitive_counterfactual)")
    p.add_argument("--reference", help="CSV providing the reference rows")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--group-column", help="column for the per-group CDFs")
    p.add_argument("--out", required=True, help="output report JSON")
    p.add_argument("--scores-out", help="per-row scores CSV")
    p.add_argument("--cdf-out", help="per-group CDF grid CSV")
    p.set_defaults(handler=cmd_risk)

    p = sub.add_parser("losses", help="group-wise LGD and expected simple interest")
    _add_io(p)
    p.add_argument("--amount-column", required=True)
    p.add_argument("--utility", choices=("rate_duration", "annuity"), default="rate_duration")
    p.add_argument("--duration-column")
    p.add_argument("--rate", type=float, default=10.0)
    p.add_argument("--annuity-column")
    p.add_argument("--years", type=float, default=15.0)
    p.add_argument("--group-column")
    p.add_argument("--tag", default="")
    p.add_argument("--out", required=True, help="output JSON")
    p.set_defaults(handler=cmd_losses)

    p = sub.add_parser("predict", help="train/post-process an outcome predictor")
    _add_io(p)
    p.add_argument("--criterion", choices=("none", "dp", "eod"), default="none")
    p.add_argument("--group-column")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output JSON (metrics + predictor)")
    p.set_defaults(handler=cmd_predict)

    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (EmptyGroup, EmptyPolicy, DegenerateData) as exc:
        return _fail(exc, 3)
    except IoFailure as exc:
        return _fail(exc, 5)
    except OSError as exc:
        return _fail(exc, 5)
    except TreatfairError as exc:
        return _fail(exc, 4)


if __name__ == "__main__":
    sys.exit(main())
