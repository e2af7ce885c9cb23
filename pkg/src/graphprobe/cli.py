"""Command-line front end: features | embed | probe | project | run.

Every artifact is written next to a ``<name>.meta.json`` sidecar carrying
the tool version and the effective configuration, and all randomness flows
from one root seed expanded per component, so reruns are byte-identical.
Report paths render matplotlib figures alongside the delimited output.

Exit status: 0 success, 1 experiment cells failed, 2 usage or I/O errors.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import sdne as sdne_mod
from .embedding import Embedding, read_embedding, write_embedding
from .features import FEATURE_NAMES, compute_all, read_feature_csv, write_feature_csv
from .graph import Graph, load_edge_list_file
from .probe import (
    CV_FRACTION,
    ProbeExperimentConfig,
    align_features,
    log_bin_labels,
    run_probe_experiment,
)
from .projection import subsample_stratified, silhouette_score, tsne, export_projection
from .seeding import derive_seed
from .skipgram import METHOD_PRESETS, make_method, method_settings

SKIPGRAM_METHODS = tuple(sorted(METHOD_PRESETS))
ALL_METHODS = SKIPGRAM_METHODS + ("sdne",)
PROBE_KINDS = ("logreg", "linear_svm", "mlp1", "mlp2")


class UsageError(ValueError):
    """Bad arguments, bad config, or missing inputs: exit status 2."""


# --- common helpers -------------------------------------------------------


def _write_meta(path: Path, payload: dict) -> None:
    meta = {"tool": "graphprobe", "version": __version__, **payload}
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True))


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _load_graph(path: str) -> Graph:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"graph file not found: {p}")
    return load_edge_list_file(p)


def _parse_fractions(text: str) -> tuple:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "cv":
            out.append(CV_FRACTION)
        else:
            value = float(token)
            if not 0.0 < value < 1.0:
                raise UsageError(f"fraction {token} outside (0, 1)")
            out.append(value)
    if not out:
        raise UsageError("no fractions given")
    return tuple(out)


def _parse_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


# --- features -------------------------------------------------------------


def cmd_features(args) -> int:
    g = _load_graph(args.graph)
    table = compute_all(g)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        write_feature_csv(table, fh)
    _write_meta(out, {"command": "features", "graph": str(args.graph),
                      "vertices": g.vertex_count, "edges": g.edge_count})
    print(f"graph: {g.vertex_count} vertices, {g.edge_count} edges "
          f"(dropped {g.cleaning.self_loops} self-loops, {g.cleaning.duplicates} duplicates)")
    for name in FEATURE_NAMES:
        col = np.asarray(table.column(name), dtype=np.float64)
        print(f"{name}: min={col.min():.6g} max={col.max():.6g} zeros={int(np.sum(col == 0))}")
    print(f"wrote {out}")
    return 0


# --- embed ----------------------------------------------------------------


_SKIPGRAM_OVERRIDE_KEYS = (
    "dim", "lr", "epochs", "negatives", "mode", "window",
    "walks_per_vertex", "walk_length", "p", "q",
)


def _embed_one(g: Graph, method: str, seed: int, overrides: dict) -> tuple[Embedding, dict]:
    """Train one method and return the embedding plus its effective config."""
    if method == "sdne":
        known = {f.name for f in sdne_mod.SdneConfig.__dataclass_fields__.values()} - {"seed"}
        bad = set(overrides) - known
        if bad:
            raise UsageError(f"unknown sdne overrides: {sorted(bad)}")
        config = sdne_mod.SdneConfig(seed=derive_seed(seed, "train", "sdne"), **overrides)
        result = sdne_mod.train(g, config)
        effective = {"method": "sdne", "seed": seed, **asdict(config),
                     "deviations": list(result.deviations)}
        return result.embedding, effective
    bad = set(overrides) - set(_SKIPGRAM_OVERRIDE_KEYS)
    if bad:
        raise UsageError(f"unknown {method} overrides: {sorted(bad)}")
    strategy, config, walk_params = method_settings(method, **overrides)
    emb = make_method(method, g, seed, **overrides)
    effective = {
        "method": method,
        "seed": seed,
        "walk_strategy": asdict(strategy),
        **walk_params,
        **{k: v for k, v in asdict(config).items() if k != "seed"},
    }
    return emb, effective


def cmd_embed(args) -> int:
    if args.method not in ALL_METHODS:
        raise UsageError(f"unknown method {args.method!r}; expected one of {ALL_METHODS}")
    g = _load_graph(args.graph)
    emb, effective = _embed_one(g, args.method, args.seed, dict(args.override or []))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        write_embedding(emb, fh)
    _write_meta(out, {"command": "embed", "graph": str(args.graph), "config": effective})
    print(f"wrote {emb.vertex_count}x{emb.dim} {emb.geometry} embedding to {out}")
    return 0


def _override_pair(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    raw = raw.strip()
    if raw.lower() in ("true", "false"):
        return key, raw.lower() == "true"
    for cast in (int, float):
        try:
            return key, cast(raw)
        except ValueError:
            continue
    return key, raw


# --- probe ----------------------------------------------------------------


def _load_embedding(path: str) -> Embedding:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"embedding file not found: {p}")
    method = "deepwalk"
    meta_path = Path(str(p) + ".meta.json")
    if meta_path.exists():
        try:
            method = json.loads(meta_path.read_text())["config"]["method"]
        except (KeyError, json.JSONDecodeError):
            pass
    with open(p) as fh:
        return read_embedding(fh, method_tag=method)


def _load_features(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"feature file not found: {p}")
    with open(p) as fh:
        return read_feature_csv(fh)


def _probe_config(args) -> ProbeExperimentConfig:
    features = _parse_list(args.features) if args.features else FEATURE_NAMES
    unknown = [f for f in features if f not in FEATURE_NAMES]
    if unknown:
        raise UsageError(f"unknown features {unknown}; expected among {FEATURE_NAMES}")
    if args.kind not in PROBE_KINDS:
        raise UsageError(f"unknown probe kind {args.kind!r}")
    fractions = _parse_fractions(args.fractions)
    seeds = tuple(derive_seed(args.root_seed, "probe-seed", i) for i in range(args.seeds))
    return ProbeExperimentConfig(
        features=features,
        fractions=fractions,
        n_bins=args.bins,
        k=args.k,
        probe_kind=args.kind,
        seeds=seeds,
        probe_epochs=args.probe_epochs,
        probe_lr=args.probe_lr,
    )


def _write_probe_outputs(report, out_dir: Path, meta: dict) -> list[str]:
    from . import plots

    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    csv_path = out_dir / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        report.write_csv(fh)
    _write_meta(csv_path, meta)
    written.append(str(csv_path))
    json_path = out_dir / "report.json"
    with open(json_path, "w") as fh:
        report.write_json(fh)
    written.append(str(json_path))
    if plots.plot_f1_curves(report, out_dir / "f1_curves.png"):
        written.append(str(out_dir / "f1_curves.png"))
    for feature in report.config.features:
        fig_path = out_dir / f"confusion_{feature}.png"
        plots.plot_confusion(report, feature, fig_path)
        written.append(str(fig_path))
    return written


def cmd_probe(args) -> int:
    emb = _load_embedding(args.embedding)
    table = _load_features(args.features_file)
    config = _probe_config(args)
    report = run_probe_experiment(
        emb, table, config,
        metadata={"embedding_file": str(args.embedding), "root_seed": args.root_seed},
        workers=args.workers,
    )
    meta = {"command": "probe", "config": report.to_json_dict()["config"]}
    written = _write_probe_outputs(report, Path(args.output), meta)
    for feature in config.features:
        for fraction in config.fractions:
            label = config.fraction_label(fraction)
            print(
                f"{emb.method_tag} {feature} fraction={label}: "
                f"micro={report.mean_micro(feature, fraction):.4f} "
                f"macro={report.mean_macro(feature, fraction):.4f} "
                f"freq-baseline={report.mean_baseline('frequent', feature, fraction):.4f}"
            )
    print("wrote " + ", ".join(written))
    return 0


# --- project --------------------------------------------------------------


def cmd_project(args) -> int:
    emb = _load_embedding(args.embedding)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    labels = None
    if args.features_file:
        table = align_features(emb, _load_features(args.features_file))
        labels = log_bin_labels(table.column(args.feature), args.bins, feature=args.feature)

    points = emb.as_points()
    keep = np.arange(emb.vertex_count)
    if emb.vertex_count > 10000:
        strat = labels.labels if labels is not None else np.zeros(emb.vertex_count, dtype=np.int64)
        keep = subsample_stratified(strat, 10000, derive_seed(args.seed, "subsample"))
        points = points[keep]
    projection = tsne(
        points, perplexity=args.perplexity, iterations=args.iterations,
        seed=derive_seed(args.seed, "tsne", emb.method_tag), method_tag=emb.method_tag,
    )
    projection = projection.__class__(
        points=projection.points,
        method_tag=projection.method_tag,
        perplexity=projection.perplexity,
        seed=projection.seed,
        kl_divergence=projection.kl_divergence,
        vertex_labels=tuple(emb.vertex_labels[i] for i in keep),
        kl_trace=projection.kl_trace,
    )

    summary = {
        "method": emb.method_tag,
        "points": len(projection),
        "perplexity": args.perplexity,
        "iterations": args.iterations,
        "kl_divergence": projection.kl_divergence,
    }
    written = []
    if labels is not None:
        from . import plots
        from .probe import LabelVector

        kept_labels = LabelVector(
            labels.labels[keep], labels.bin_edges, labels.n_bins, labels.feature
        )
        csv_path = out_dir / "projection.csv"
        with open(csv_path, "w", newline="") as fh:
            export_projection(projection, kept_labels, fh)
        _write_meta(csv_path, {"command": "project", "config": summary})
        written.append(str(csv_path))
        plots.plot_projection(projection, kept_labels.labels, out_dir / "projection.png")
        written.append(str(out_dir / "projection.png"))
        if len(np.unique(kept_labels.labels)) >= 2:
            summary["silhouette_by_label"] = silhouette_score(
                projection.points, kept_labels.labels
            )
        summary["label_feature"] = args.feature
    else:
        csv_path = out_dir / "projection.csv"
        with open(csv_path, "w", newline="") as fh:
            fh.write("vertex,x,y\n")
            for name, (px, py) in zip(projection.vertex_labels, projection.points):
                fh.write(f"{name},{px!r},{py!r}\n")
        _write_meta(csv_path, {"command": "project", "config": summary})
        written.append(str(csv_path))
    json_path = out_dir / "projection.json"
    json_path.write_text(json.dumps(summary, indent=1, sort_keys=True))
    written.append(str(json_path))
    print("wrote " + ", ".join(written))
    return 0


# --- run ------------------------------------------------------------------

_EXPERIMENT_KEYS = {
    "dataset", "output", "methods", "features", "bins", "fractions", "k",
    "probe", "seeds", "root_seed", "workers", "tsne", "tsne_feature",
    "perplexity", "embed_seed",
}


def _parse_run_config(path: Path) -> dict:
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    parser.read(path)
    if "experiment" not in parser:
        raise UsageError("config must have an [experiment] section")
    exp = dict(parser["experiment"])
    unknown = set(exp) - _EXPERIMENT_KEYS
    if unknown:
        raise UsageError(f"unknown [experiment] keys: {sorted(unknown)}")
    for required in ("dataset", "output"):
        if required not in exp:
            raise UsageError(f"[experiment] must set {required}")

    methods = _parse_list(exp.get("methods", "deepwalk"))
    for m in methods:
        if m not in ALL_METHODS:
            raise UsageError(f"unknown method {m!r}; expected among {ALL_METHODS}")
    features = _parse_list(exp.get("features", ",".join(FEATURE_NAMES)))
    for f in features:
        if f not in FEATURE_NAMES:
            raise UsageError(f"unknown feature {f!r}; expected among {FEATURE_NAMES}")
    probe_kind = exp.get("probe", "mlp1")
    if probe_kind not in PROBE_KINDS:
        raise UsageError(f"unknown probe kind {probe_kind!r}")

    overrides: dict[str, dict] = {}
    for section in parser.sections():
        if section == "experiment":
            continue
        if not section.startswith("method."):
            raise UsageError(f"unknown config section [{section}]")
        m = section.split(".", 1)[1]
        if m not in ALL_METHODS:
            raise UsageError(f"override section for unknown method {m!r}")
        overrides[m] = {k: _override_pair(f"{k}={v}")[1] for k, v in parser[section].items()}

    config = {
        "dataset": exp["dataset"],
        "output": exp["output"],
        "methods": list(methods),
        "features": list(features),
        "bins": int(exp.get("bins", "6")),
        "fractions": [
            "cv" if f is CV_FRACTION else f for f in _parse_fractions(exp.get("fractions", "cv"))
        ],
        "k": int(exp.get("k", "5")),
        "probe": probe_kind,
        "seeds": int(exp.get("seeds", "5")),
        "root_seed": int(exp.get("root_seed", "0")),
        "embed_seed": int(exp.get("embed_seed", exp.get("root_seed", "0"))),
        "workers": int(exp.get("workers", "1")),
        "tsne": exp.get("tsne", "false").lower() == "true",
        "tsne_feature": exp.get("tsne_feature", "EC"),
        "perplexity": float(exp.get("perplexity", "30")),
        "method_overrides": overrides,
    }
    if config["tsne"] and config["tsne_feature"] not in FEATURE_NAMES:
        raise UsageError(f"unknown tsne_feature {config['tsne_feature']!r}")
    return config


def _cell_outputs_exist(cell_dir: Path) -> bool:
    return (cell_dir / "report.csv").exists() and (cell_dir / "report.json").exists()


def cmd_run(args) -> int:
    config = _parse_run_config(Path(args.config))
    cfg_hash = _config_hash(config)
    out_root = Path(config["output"])
    out_root.mkdir(parents=True, exist_ok=True)
    manifest_path = out_root / "manifest.json"
    previous_hash = None
    if manifest_path.exists():
        try:
            previous_hash = json.loads(manifest_path.read_text()).get("config_hash")
        except json.JSONDecodeError:
            previous_hash = None
    resumable = previous_hash == cfg_hash

    g = _load_graph(config["dataset"])
    manifest: dict = {"config_hash": cfg_hash, "version": __version__,
                      "config": config, "cells": [], "artifacts": []}

    features_path = out_root / "features.csv"
    if resumable and features_path.exists():
        with open(features_path) as fh:
            table = read_feature_csv(fh)
    else:
        table = compute_all(g)
        with open(features_path, "w", newline="") as fh:
            write_feature_csv(table, fh)
        _write_meta(features_path, {"command": "run", "config_hash": cfg_hash})
    manifest["artifacts"].append(str(features_path))

    fractions = _parse_fractions(",".join(str(f) for f in config["fractions"]))
    seeds = tuple(
        derive_seed(config["root_seed"], "probe-seed", i) for i in range(config["seeds"])
    )
    any_failed = False
    for method in config["methods"]:
        method_dir = out_root / method
        method_dir.mkdir(parents=True, exist_ok=True)
        emb_path = method_dir / "embedding.txt"
        overrides = config["method_overrides"].get(method, {})
        if resumable and emb_path.exists():
            emb = _load_embedding(str(emb_path))
        else:
            emb, effective = _embed_one(g, method, config["embed_seed"], overrides)
            with open(emb_path, "w") as fh:
                write_embedding(emb, fh)
            _write_meta(emb_path, {"command": "run", "config": effective,
                                   "config_hash": cfg_hash})
        manifest["artifacts"].append(str(emb_path))

        for feature in config["features"]:
            cell_dir = method_dir / feature
            cell = {"method": method, "feature": feature, "dir": str(cell_dir)}
            if resumable and _cell_outputs_exist(cell_dir):
                cell["status"] = "skipped"
                manifest["cells"].append(cell)
                continue
            try:
                probe_config = ProbeExperimentConfig(
                    features=(feature,),
                    fractions=fractions,
                    n_bins=config["bins"],
                    k=config["k"],
                    probe_kind=config["probe"],
                    seeds=seeds,
                )
                report = run_probe_experiment(
                    emb, table, probe_config,
                    metadata={"config_hash": cfg_hash, "dataset": config["dataset"]},
                    workers=config["workers"],
                )
                outputs = _write_probe_outputs(
                    report, cell_dir, {"command": "run", "config_hash": cfg_hash}
                )
                cell["status"] = "ok"
                cell["outputs"] = outputs
            except Exception as exc:   # cell failures recorded, run continues
                cell["status"] = "failed"
                cell["error"] = f"{type(exc).__name__}: {exc}"
                any_failed = True
            manifest["cells"].append(cell)

        if config["tsne"]:
            proj_dir = method_dir / "projection"
            if not (resumable and (proj_dir / "projection.csv").exists()):
                ns = argparse.Namespace(
                    embedding=str(emb_path), output=str(proj_dir),
                    features_file=str(features_path), feature=config["tsne_feature"],
                    bins=config["bins"], perplexity=config["perplexity"],
                    iterations=1000, seed=config["root_seed"],
                )
                cmd_project(ns)
            manifest["artifacts"].append(str(proj_dir / "projection.csv"))

    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    skipped = sum(1 for c in manifest["cells"] if c["status"] == "skipped")
    failed = sum(1 for c in manifest["cells"] if c["status"] == "failed")
    print(f"cells: {len(manifest['cells'])} total, {skipped} skipped, {failed} failed")
    print(f"manifest: {manifest_path}")
    return 1 if any_failed else 0


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphprobe",
        description="Probe topological vertex features in graph embedding spaces.",
    )
    parser.add_argument("--version", action="version", version=f"graphprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="compute the seven vertex features")
    p.add_argument("graph", help="edge-list file")
    p.add_argument("-o", "--output", required=True, help="output CSV path")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("embed", help="train one embedding method")
    p.add_argument("graph")
    p.add_argument("-m", "--method", required=True,
                   help=f"one of {', '.join(ALL_METHODS)}")
    p.add_argument("-o", "--output", required=True, help="embedding file path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--set", dest="override", action="append", type=_override_pair,
                   metavar="KEY=VALUE", help="hyperparameter override (repeatable)")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("probe", help="train probes and score feature recovery")
    p.add_argument("embedding", help="embedding file")
    p.add_argument("features_file", help="features CSV from the features command")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--features", help="comma list of feature tags (default all)")
    p.add_argument("--fractions", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9",
                   help="comma list of labelled fractions and/or 'cv'")
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--kind", default="mlp1", help=f"one of {', '.join(PROBE_KINDS)}")
    p.add_argument("--seeds", type=int, default=5, help="number of replicate seeds")
    p.add_argument("--root-seed", type=int, default=0)
    p.add_argument("--probe-epochs", type=int, default=None)
    p.add_argument("--probe-lr", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("project", help="2-D t-SNE projection of an embedding")
    p.add_argument("embedding")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--features-file", dest="features_file",
                   help="features CSV for class coloring")
    p.add_argument("--feature", default="EC", help="feature tag for coloring")
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("config", help="INI config file")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
