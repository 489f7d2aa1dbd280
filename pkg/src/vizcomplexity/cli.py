"""Command-line entry point ``vcx``.

Subcommands: ``metrics compute``, ``metrics mec``, ``rank simulate``,
``serve``, ``stage close``, ``attribute fit``, ``export``.

Exit codes: 0 success, 1 data error (unreadable image, join mismatch),
2 configuration error (bad flags, missing config inputs).

Every command that writes outputs also writes ``<output>.manifest.json``
recording the command, a hash of the effective configuration, hashes of
the input files, the seed, and the tool version, so a run can be
reproduced exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, attribution, dataset, objmetrics, pixmetrics, ranking
from .imagecore import CorruptImage, UnsupportedFormat, decode_image

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2


# --------------------------------------------------------------- manifest --


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_path, command: str, config: dict, inputs: list,
                   seed: int | None) -> dict:
    manifest = {
        "command": command,
        "config": config,
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()
        ).hexdigest(),
        "input_hashes": {str(p): _sha256_file(p) for p in inputs},
        "seed": seed,
        "tool_version": __version__,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    Path(f"{out_path}.manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return manifest


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


# -------------------------------------------------------------------- cli --


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for any randomized step.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel workers where supported.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Service/config JSON file (used by serve).")
@click.version_option(version=__version__)
@click.pass_context
def main(ctx, seed, jobs, config_path):
    """Visual-complexity measurement toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["jobs"] = max(1, jobs)
    ctx.obj["config_path"] = config_path


@main.group()
def metrics():
    """Compute complexity metrics over images."""


def _compute_one(args):
    entry_id, path, only, dict_path, boxes, tir_mode = args
    dictionary = (objmetrics.ColorDictionary.from_csv(dict_path)
                  if dict_path else objmetrics.default_dictionary())
    image = decode_image(Path(path).read_bytes(), image_id=entry_id)
    vec = pixmetrics.compute_all(
        image,
        textboxes=boxes.get(entry_id) if boxes else None,
        color_dict=dictionary,
        tir_mode=tir_mode,
    )
    row = vec.as_dict()
    if only:
        row = {k: v for k, v in row.items() if k in only}
    return entry_id, row


@metrics.command("compute")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True),
              required=True, help="Catalog CSV (id, path, tags).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--only", default=None,
              help="Comma-separated metric columns, e.g. O.ED,O.IE.")
@click.option("--skip-errors", is_flag=True,
              help="Emit rows for readable images and continue past errors.")
@click.option("--dictionary", "dict_path", type=click.Path(exists=True),
              default=None, help="Namable-color dictionary CSV.")
@click.option("--boxes", "boxes_path", type=click.Path(exists=True),
              default=None, help="Text-box annotations JSONL.")
@click.option("--tir-mode", type=click.Choice(["ink", "box-area"]),
              default="ink", show_default=True)
@click.pass_context
def metrics_compute(ctx, catalog_path, out_path, only, skip_errors,
                    dict_path, boxes_path, tir_mode):
    """Compute the 12-metric vector for every catalog image."""
    only_cols = None
    if only:
        only_cols = {c.strip() for c in only.split(",") if c.strip()}
        unknown = only_cols - set(dataset.STANDARD_METRIC_ORDER)
        if unknown:
            _fail(EXIT_CONFIG, f"unknown metric columns: {sorted(unknown)} "
                               f"(see --only)")
        only_cols |= {"image_id"}
    if only_cols and "O.MeC" in only_cols and dict_path is None:
        # default dictionary ships with the package, so this is fine;
        # a *missing* user-specified file is caught by click above.
        pass
    boxes = {}
    if boxes_path:
        boxes = objmetrics.load_textbox_annotations(boxes_path)
    try:
        entries = dataset.load_catalog(catalog_path)
    except (KeyError, ValueError) as e:
        _fail(EXIT_CONFIG, f"bad catalog: {e}")
    jobs = ctx.obj["jobs"]
    tasks = [(e.image_id, e.path, only_cols, dict_path, boxes, tir_mode)
             for e in entries]
    rows = []
    errors = []

    def _run(task):
        try:
            rows.append(_compute_one(task))
        except FileNotFoundError as e:
            errors.append((task[0], f"missing file: {e}"))
        except (UnsupportedFormat, CorruptImage,
                pixmetrics.MetricError, ValueError) as e:
            errors.append((task[0], str(e)))

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_run, tasks))
    else:
        for task in tasks:
            _run(task)
    for image_id, msg in errors:
        click.echo(f"error: {image_id}: {msg}", err=True)
    if errors and not skip_errors:
        _fail(EXIT_DATA, f"{len(errors)} image(s) failed; "
                         f"use --skip-errors to continue")
    rows.sort(key=lambda r: r[0])
    columns = ["image_id"] + [
        c for c in dataset.STANDARD_METRIC_ORDER
        if only_cols is None or c in only_cols
    ]
    with open(out_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for image_id, row in rows:
            writer.writerow({"image_id": image_id, **row})
    write_manifest(out_path, "metrics compute", {
        "catalog": str(catalog_path), "only": sorted(only_cols) if only_cols
        else None, "tir_mode": tir_mode, "skip_errors": skip_errors,
    }, [catalog_path] + [e.path for e in entries if Path(e.path).exists()],
        ctx.obj["seed"])
    click.echo(f"wrote {len(rows)} rows to {out_path}")


@metrics.command("mec")
@click.option("--image", "image_path", type=click.Path(exists=True),
              required=True)
@click.option("--dictionary", "dict_path", type=click.Path(exists=True),
              default=None)
@click.option("--delta-e", type=float, default=14.0, show_default=True)
@click.option("--min-share", type=float, default=0.005, show_default=True)
def metrics_mec(image_path, dict_path, delta_e, min_share):
    """Report the merged-color count and cluster details for one image."""
    dictionary = (objmetrics.ColorDictionary.from_csv(dict_path)
                  if dict_path else objmetrics.default_dictionary())
    try:
        image = decode_image(Path(image_path).read_bytes(),
                             image_id=Path(image_path).name)
    except (UnsupportedFormat, CorruptImage) as e:
        _fail(EXIT_DATA, str(e))
    report = objmetrics.metric_mec(image, dictionary,
                                   delta_e_max=delta_e, min_share=min_share)
    click.echo(json.dumps({
        "image": str(image_path),
        "mec": report.merged_count,
        "namable_count": report.namable_count,
        "clusters": report.clusters,
    }, indent=2))


@main.group()
def rank():
    """Ranking-engine utilities."""


@rank.command("simulate")
@click.option("--items", type=int, required=True)
@click.option("--trials", type=int, required=True)
@click.option("--policy", type=click.Choice(["active", "random"]),
              default="active", show_default=True)
@click.option("--pairs-per-stage", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Scores CSV output path.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Per-stage efficiency report JSON.")
@click.pass_context
def rank_simulate(ctx, items, trials, policy, pairs_per_stage, out_path,
                  report_path):
    """Run a seeded synthetic study and report recovery of latent order."""
    if items < 2:
        _fail(EXIT_CONFIG, "--items must be at least 2")
    if trials < 1:
        _fail(EXIT_CONFIG, "--trials must be at least 1")
    seed = ctx.obj["seed"]
    result = ranking.simulate_study(
        items, trials, policy=policy, seed=seed,
        pairs_per_stage=pairs_per_stage,
    )
    click.echo(f"policy={policy} items={items} trials={result.trials_used} "
               f"spearman_to_latent={result.spearman_to_latent:.4f}")
    if out_path:
        with open(out_path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["image_id", "mu", "sigma", "n_comparisons",
                             "normalized"])
            for img in sorted(result.scores):
                s = result.scores[img]
                writer.writerow([
                    img, repr(float(s["mu"])), repr(float(s["sigma"])),
                    int(s["n_comparisons"]), repr(float(s["normalized"])),
                ])
        write_manifest(out_path, "rank simulate", {
            "items": items, "trials": trials, "policy": policy,
            "pairs_per_stage": pairs_per_stage,
        }, [], seed)
    if report_path:
        Path(report_path).write_text(json.dumps({
            "policy": policy,
            "spearman_to_latent": result.spearman_to_latent,
            "stage_curve": [
                {"stage": st, "trials": used, "spearman": rho}
                for st, used, rho in result.stage_curve
            ],
        }, indent=2) + "\n")


@main.command("serve")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx, host, port):
    """Run the study-hosting HTTP service (requires --config)."""
    from . import studysvc

    config_path = ctx.obj["config_path"]
    if not config_path:
        _fail(EXIT_CONFIG, "serve requires --config pointing to a service "
                           "config JSON")
    try:
        config = studysvc.load_service_config(config_path)
        study = studysvc.study_from_config(config)
    except (FileNotFoundError, KeyError, ValueError) as e:
        _fail(EXIT_CONFIG, f"bad service config: {e}")
    app = studysvc.create_app(study, static_dir=config.get("static_dir"))
    import uvicorn

    uvicorn.run(app, host=host or config["host"], port=port or config["port"])


@main.group()
def stage():
    """Study stage administration."""


@stage.command("close")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True,
              help="Base URL of a running study service.")
@click.option("--force", is_flag=True,
              help="Void unfinished sessions and close anyway.")
def stage_close(url, force):
    """Close the current study stage on a running service."""
    import os
    import urllib.error
    import urllib.request

    from .studysvc import OPERATOR_TOKEN_ENV

    token = os.environ.get(OPERATOR_TOKEN_ENV)
    if not token:
        _fail(EXIT_CONFIG, f"set {OPERATOR_TOKEN_ENV} to the operator token")
    req = urllib.request.Request(
        f"{url.rstrip('/')}/api/stage/close",
        data=json.dumps({"force": force}).encode(),
        headers={"Content-Type": "application/json",
                 "X-Operator-Token": token},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            click.echo(resp.read().decode())
    except urllib.error.HTTPError as e:
        _fail(EXIT_DATA, f"service refused stage close: "
                         f"{e.code} {e.read().decode()}")
    except urllib.error.URLError as e:
        _fail(EXIT_DATA, f"cannot reach service at {url}: {e}")


@main.group()
def attribute():
    """Metric-to-score attribution analyses."""


@attribute.command("fit")
@click.option("--table", "table_path", type=click.Path(exists=True),
              default=None,
              help="Single CSV with metric columns and a score column.")
@click.option("--metrics", "metrics_path", type=click.Path(exists=True),
              default=None, help="Metrics CSV (joined with --scores).")
@click.option("--scores", "scores_path", type=click.Path(exists=True),
              default=None, help="Scores CSV with image_id and mu columns.")
@click.option("--score-column", default="VC", show_default=True)
@click.option("--components", type=int, default=5, show_default=True)
@click.option("--bootstrap", "n_bootstrap", type=int, default=1000,
              show_default=True)
@click.option("--group-tag", default=None,
              help="Restrict rows to a subgroup tag, e.g. node-link.")
@click.option("--exclude", default=None,
              help="Comma-separated metric columns to drop, e.g. O.TiR.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def attribute_fit(ctx, table_path, metrics_path, scores_path, score_column,
                  components, n_bootstrap, group_tag, exclude, out_dir):
    """Fit the latent-component regression and write the report bundle."""
    if bool(table_path) == bool(metrics_path and scores_path):
        _fail(EXIT_CONFIG, "provide either --table or both --metrics and "
                           "--scores")
    exclude_cols = [c.strip() for c in exclude.split(",")] if exclude else []
    metric_cols = [c for c in dataset.STANDARD_METRIC_ORDER
                   if c not in exclude_cols]
    try:
        if table_path:
            table = dataset.load_metric_score_table(
                table_path, metric_columns=metric_cols,
                score_column=score_column)
            inputs = [table_path]
        else:
            table = dataset.join_metric_and_score_files(
                metrics_path, scores_path, metric_columns=metric_cols)
            inputs = [metrics_path, scores_path]
    except dataset.JoinMismatch as e:
        _fail(EXIT_DATA, str(e))
    except KeyError as e:
        _fail(EXIT_CONFIG, f"column lookup failed: {e}")
    rows = np.arange(len(table.image_ids))
    if group_tag:
        rows = np.array([i for i, t in enumerate(table.tags)
                         if group_tag in t], dtype=int)
        if rows.size == 0:
            _fail(EXIT_DATA, f"no rows tagged {group_tag!r}")
    X, y = table.X[rows], table.y[rows]
    seed = ctx.obj["seed"]
    try:
        design = attribution.DesignMatrix.build(X, y, table.columns)
        model = attribution.fit_pls(design, n_components=components)
        boot = attribution.bootstrap_coefficients(
            design, n_components=components, n_resamples=n_bootstrap,
            seed=seed)
        effects = attribution.effect_sizes(design, n_components=components)
        corr_r, corr_p = attribution.pearson_matrix(design.X, design.columns)
    except (attribution.DegenerateColumn, attribution.RankDeficient) as e:
        _fail(EXIT_DATA, f"attribution failed: {e}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coef_rows = []
    for i, col in enumerate(design.columns):
        coef_rows.append({
            "metric": col,
            "coefficient": float(model.coefficients[i]),
            "p_value": boot.p_value(col),
            "significant": boot.is_significant(col),
            "f2": effects.f2(col),
        })
    (out / "coefficients.json").write_text(json.dumps({
        "r_squared": model.r_squared,
        "n_rows": int(len(y)),
        "n_components": components,
        "group_tag": group_tag,
        "excluded": exclude_cols,
        "coefficients": coef_rows,
    }, indent=2) + "\n")
    with open(out / "coefficients.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["metric", "coefficient",
                                               "p_value", "significant", "f2"])
        writer.writeheader()
        writer.writerows(coef_rows)
    (out / "correlations.json").write_text(json.dumps({
        "columns": design.columns,
        "r": corr_r.tolist(),
        "p": corr_p.tolist(),
    }, indent=2) + "\n")
    write_manifest(out / "coefficients.json", "attribute fit", {
        "score_column": score_column, "components": components,
        "bootstrap": n_bootstrap, "group_tag": group_tag,
        "exclude": exclude_cols,
    }, inputs, seed)
    click.echo(f"R^2 = {model.r_squared:.4f} over {len(y)} rows "
               f"({len(design.columns)} metrics); reports in {out_dir}")


@main.command("export")
@click.option("--log", "log_path", type=click.Path(exists=True),
              required=True, help="Study service event log (JSONL).")
@click.option("--catalog", "catalog_path", type=click.Path(exists=True),
              required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def export(ctx, log_path, catalog_path, out_dir):
    """Replay a study log and export final scores and the comparison matrix."""
    from . import studysvc

    try:
        entries = dataset.load_catalog(catalog_path)
    except (KeyError, ValueError) as e:
        _fail(EXIT_CONFIG, f"bad catalog: {e}")
    study = studysvc.Study(entries, log_path=log_path, seed=ctx.obj["seed"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scores = study.scores()
    with open(out / "scores.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["image_id", "mu", "sigma", "n_comparisons",
                         "normalized"])
        for img in sorted(scores):
            s = scores[img]
            writer.writerow([
                img, repr(float(s["mu"])), repr(float(s["sigma"])),
                int(s["n_comparisons"]), repr(float(s["normalized"])),
            ])
    matrix = study.ranker.matrix
    with open(out / "comparison_matrix.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["winner\\loser"] + matrix.ids)
        for i, row_id in enumerate(matrix.ids):
            writer.writerow([row_id] + matrix.wins[i].tolist())
    write_manifest(out / "scores.csv", "export", {
        "log": str(log_path), "catalog": str(catalog_path),
    }, [log_path, catalog_path], ctx.obj["seed"])
    click.echo(f"exported {len(scores)} scores and a "
               f"{len(matrix.ids)}x{len(matrix.ids)} matrix to {out_dir}")


if __name__ == "__main__":
    main()
