"""Command-line surface: classify, explore, emit-dataset, eval-brs, serve."""

from __future__ import annotations

import dataclasses
import json
import logging
import sys
from pathlib import Path

import click

from recall_router import brs_eval, dataset
from recall_router.config import RunConfig, load_run_config
from recall_router.memory_bank import load_bank, load_qa_pairs
from recall_router.oracles import Oracles
from recall_router.reward import RewardBreakdown, Terminal
from recall_router.scenario_map import classify as classify_query
from recall_router.sgr_mcts import RecallPath, run_search, write_iteration_log

logger = logging.getLogger(__name__)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Run-config JSON file (search/reward/oracle sections).")
@click.option("--seed", type=int, default=None, help="Override the search RNG seed.")
@click.pass_context
def main(ctx, config_path, seed):
    """Strategy-guided memory recall engine."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    run_config = load_run_config(config_path)
    if seed is not None:
        run_config = RunConfig(
            search=dataclasses.replace(run_config.search, rng_seed=seed),
            reward=run_config.reward, oracle=run_config.oracle,
        )
    ctx.obj = run_config


@main.command("classify")
@click.argument("input_file", type=click.Path(exists=True))
@click.argument("output_file", type=click.Path())
def cli_classify(input_file, output_file):
    """Classify queries (JSONL with query_id + query_text) into 5W scenarios."""
    errors = 0
    rows = []
    lines = [ln for ln in Path(input_file).read_text("utf-8").splitlines() if ln.strip()]
    for lineno, line in enumerate(lines, 1):
        try:
            obj = json.loads(line)
            query_id = str(obj.get("query_id", f"line{lineno}"))
            scenario = classify_query(str(obj["query_text"]))
            rows.append({"query_id": query_id, "scenario": scenario.value})
        except Exception as exc:
            errors += 1
            rows.append({"query_id": f"line{lineno}", "error": str(exc)})
    with Path(output_file).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
    click.echo(f"classified {len(rows) - errors} queries, {errors} errors")
    if errors:
        sys.exit(1)


def _path_row(query_id: str, query_text: str, rank: int, path: RecallPath) -> dict:
    return {
        "query_id": query_id,
        "query_text": query_text,
        "rank": rank,
        "path_value": path.path_value,
        "terminal": path.terminal.value,
        "node_ids": list(path.node_ids),
        "steps": [
            {"strategy": sid, "cue": cue, "response": resp,
             "r_ra": bd.r_ra, "r_rf": bd.r_rf, "r_rd": bd.r_rd, "composite": bd.composite}
            for sid, cue, resp, bd in path.steps
        ],
    }


@main.command("explore")
@click.option("--bank", "bank_file", type=click.Path(exists=True), required=True)
@click.option("--bank-format", default="canonical", show_default=True)
@click.option("--qa", "qa_file", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--iters", default=None,
              help="Comma-separated iteration counts to sweep (default: config value).")
@click.option("--topk", type=int, default=None, help="Override top-k path count.")
@click.pass_obj
def cli_explore(run_config: RunConfig, bank_file, bank_format, qa_file, out_dir, iters, topk):
    """Run the strategy search for every QA pair and write path + iteration logs."""
    bank = load_bank(bank_file, bank_format)
    qa_pairs = load_qa_pairs(qa_file)
    oracles = Oracles(run_config.oracle)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweep = ([int(x) for x in iters.split(",")] if iters
             else [run_config.search.iterations])
    failed_queries = 0
    for t_iter in sweep:
        search_cfg = dataclasses.replace(run_config.search, iterations=t_iter)
        if topk is not None:
            search_cfg = dataclasses.replace(search_cfg, top_k=topk)
        path_rows, iter_rows = [], []
        for qa in qa_pairs:
            try:
                result = run_search(qa.query_text, qa.answer_text, bank,
                                    search_cfg, run_config.reward, oracles)
            except Exception as exc:
                failed_queries += 1
                logger.warning("query %s failed: %s", qa.query_id, exc)
                path_rows.append({"query_id": qa.query_id, "error": str(exc)})
                continue
            for rank, path in enumerate(result.paths, 1):
                path_rows.append(_path_row(qa.query_id, qa.query_text, rank, path))
            if not result.paths:
                path_rows.append({"query_id": qa.query_id, "no_path": True})
            for entry in result.iteration_log:
                iter_rows.append({"query_id": qa.query_id, **entry})
        with (out / f"paths_T{t_iter}.jsonl").open("w", encoding="utf-8") as fh:
            for row in path_rows:
                fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
        write_iteration_log(iter_rows, out / f"iterations_T{t_iter}.jsonl")
        click.echo(f"T={t_iter}: wrote {len(path_rows)} path rows for "
                   f"{len(qa_pairs)} queries into {out}")
    if failed_queries:
        click.echo(f"{failed_queries} queries failed", err=True)


def _load_harvest_input(paths_file) -> list[tuple[str, list[RecallPath]]]:
    by_query: dict[str, list[RecallPath]] = {}
    names: dict[str, str] = {}
    for line in Path(paths_file).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        if "steps" not in row:
            continue
        steps = tuple(
            (s["strategy"], s["cue"], s["response"],
             RewardBreakdown(r_ra=s["r_ra"], r_rf=s["r_rf"], r_rd=s["r_rd"],
                             composite=s["composite"], terminal=Terminal.NOT_TERMINAL))
            for s in row["steps"]
        )
        path = RecallPath(steps=steps, path_value=row["path_value"],
                          terminal=Terminal(row["terminal"]),
                          node_ids=tuple(row["node_ids"]))
        by_query.setdefault(row["query_id"], []).append(path)
        names[row["query_id"]] = row["query_text"]
    return [(names[qid], paths) for qid, paths in by_query.items()]


@main.command("emit-dataset")
@click.option("--paths", "paths_file", type=click.Path(exists=True), required=True,
              help="paths_T*.jsonl file produced by explore.")
@click.option("--ratio", type=float, default=0.9, show_default=True)
@click.option("--train-out", type=click.Path(), required=True)
@click.option("--test-out", type=click.Path(), required=True)
@click.option("--policy", type=click.Choice(dataset.HARVEST_POLICIES), default="first-step",
              show_default=True)
@click.option("--layout", type=click.Choice(dataset.RECORD_LAYOUTS), default="main",
              show_default=True)
@click.pass_obj
def cli_emit_dataset(run_config: RunConfig, paths_file, ratio, train_out, test_out,
                     policy, layout):
    """Harvest triples from explore output and emit train/test record files."""
    results = _load_harvest_input(paths_file)
    triples = dataset.filter_failures(dataset.harvest(results, policy))
    n_train, n_test = dataset.emit(triples, ratio, run_config.search.rng_seed,
                                   train_out, test_out, layout)
    click.echo(f"emitted {n_train} train / {n_test} test records")


@main.command("eval-brs")
@click.option("--input", "input_file", type=click.Path(exists=True), required=True)
@click.option("--alpha", type=float, default=brs_eval.DEFAULT_ALPHA, show_default=True)
@click.option("--json-out", type=click.Path(), required=True)
@click.option("--csv-out", type=click.Path(), default=None)
@click.pass_obj
def cli_eval_brs(run_config: RunConfig, input_file, alpha, json_out, csv_out):
    """Score (query, cue, response, answer) tuples with the balance metric."""
    tuples = brs_eval.load_eval_tuples(input_file)
    oracles = Oracles(run_config.oracle)
    report = brs_eval.evaluate_batch(tuples, alpha=alpha, oracles=oracles)
    brs_eval.write_report(report, json_out, csv_out)
    click.echo(f"mean BRS {report.mean_brs:.5f} ({report.mean_brs * 100:.2f} x100), "
               f"{report.error_count} errors")


@main.command("serve")
@click.option("--bank", "bank_files", type=(str, str), multiple=True,
              help="Pairs of (path, format) for banks to host.")
@click.option("--event-log", type=click.Path(), default="sessions.jsonl", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.pass_obj
def cli_serve(run_config: RunConfig, bank_files, event_log, host, port):
    """Host live recall sessions over HTTP."""
    import uvicorn

    from recall_router.service import SessionService, create_app

    banks = {}
    for path, fmt in bank_files:
        bank = load_bank(path, fmt)
        banks[bank.bank_id] = bank
    service = SessionService(run_config, banks, event_log_path=event_log)
    uvicorn.run(create_app(service), host=host, port=port)


if __name__ == "__main__":
    main()
