"""Command-line driver.

Subcommands run single stages (split, qc, filter, normalize, embed, cluster,
evaluate, report, synth) or the whole chain (pipeline). Stage commands accept
the same inputs as pipeline and recompute the prefix they need, so every
artifact is a pure function of (input files, flags, seed).

Exit codes: 0 success, 1 data/IO errors (JSON envelope on stderr), 2 usage.
On-disk matrices are genes x cells; pass --transpose when a file already has
cells as rows. SCBENCH_THREADS caps the per-split worker pool; results do not
depend on its value.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from ._util import canonical_json, worker_count
from .cluster import (
    adjusted_rand_index,
    cut_dendrogram,
    hierarchical,
    kmeans,
    pairwise_distances,
    silhouette,
)
from .embed import pca_fit_transform, tsne
from .errors import DataError
from .ingest import (
    CellAnnotation,
    attach_annotations,
    read_cell_annotations,
    read_gene_annotations,
    read_matrix_market,
    split_annotations,
    split_by_method_replicate,
    write_cell_annotations,
    write_dense_csv,
    write_gene_annotations,
    write_matrix_market,
)
from .matrix import default_cell_ids, default_gene_ids
from .preprocess import (
    FilterConfig,
    filter_low_cv,
    filter_sparse_genes,
    preprocess_pipeline,
)
from .qc import cumulative_detection, detection_stats, dropout_rate
from .report import (
    PipelineResult,
    SplitResult,
    emit_cluster_table,
    emit_embedding_tables,
    emit_plots,
    emit_qc_tables,
    emit_silhouette_table,
    emit_tables,
    rebuild_plots_from_tables,
    write_csv,
    write_summary,
)
from .synth import SynthConfig, generate

INPUT_KEYS = ("sample", "matrix", "cells", "genes", "transpose", "join_by_id")
FILTER_KEYS = ("zero_threshold", "cv_fraction", "normalize_axis", "log1p")
EMBED_KEYS = ("perplexity", "tsne_no_pca", "iters")
CLUSTER_KEYS = ("k", "cluster_method", "metric", "linkage", "restarts")
SEED_KEYS = ("seed",)


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "-", name)


def _resolved_config(args, keys) -> dict:
    out = {}
    for k in keys:
        v = getattr(args, k)
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _load_inputs(args):
    """Matrix in cells x genes orientation plus row-aligned annotations."""
    m = read_matrix_market(args.matrix)
    if not args.transpose:
        m = m.transpose()
    m = m.with_ids(default_cell_ids(m.n_cells), default_gene_ids(m.n_genes))
    if args.cells:
        annotations = read_cell_annotations(args.cells)
    else:
        annotations = [
            CellAnnotation(cid, "all", "r1", None) for cid in m.cell_ids
        ]
    gene_ids = read_gene_annotations(args.genes) if args.genes else None
    return attach_annotations(
        m, annotations, gene_ids=gene_ids, join_by_id=args.join_by_id
    )


def _splits(args):
    m, annotations = _load_inputs(args)
    mats = split_by_method_replicate(m, annotations)
    anns = split_annotations(annotations)
    return [(key, mats[key], anns[key]) for key in mats]


def _parallel_map(fn, items):
    if len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(items))) as ex:
        return list(ex.map(fn, items))


def _metric_name(args) -> str:
    return args.metric.replace("-", "_")


def _cluster_points(coords: np.ndarray, args):
    if args.cluster_method == "kmeans":
        res = kmeans(coords, args.k, seed=args.seed, restarts=args.restarts)
        return res.labels, res
    dend = hierarchical(coords, linkage=args.linkage, metric=_metric_name(args))
    return cut_dendrogram(dend, args.k), None


def _silhouettes(coords: np.ndarray, labels: np.ndarray, args):
    metric = _metric_name(args)
    if metric == "euclidean":
        return silhouette(coords, labels)
    return silhouette(labels=labels, distances=pairwise_distances(coords, metric))


def _truth_labels(annotations) -> list[str] | None:
    types = [a.cell_type for a in annotations]
    if any(t is None for t in types):
        return None
    return types


def _compute_split(args, key, sub, annotations, depth: str) -> SplitResult:
    """Run the per-split chain up to `depth`; later fields stay None."""
    method, replicate = key
    fields = {
        "sample": args.sample,
        "method": method,
        "replicate": replicate,
        "matrix": sub,
    }
    if depth in ("qc", "full"):
        fields["dropout"] = dropout_rate(sub)
        fields["detection"] = detection_stats(sub)
        fields["cumulative"] = cumulative_detection(sub, seed=args.seed)
    if depth == "qc":
        return SplitResult(**fields)

    cfg = FilterConfig(args.zero_threshold, args.cv_fraction)
    normalized, trace = preprocess_pipeline(
        sub, cfg, normalize_axis=args.normalize_axis, log1p=args.log1p
    )
    fields["trace"] = trace
    fields["normalized"] = normalized
    if depth == "normalize":
        return SplitResult(**fields)

    pca_emb, _ = pca_fit_transform(normalized, d=2)
    tsne_emb = tsne(
        normalized,
        perplexity=args.perplexity,
        d=2,
        seed=args.seed,
        iters=args.iters,
        pca_dim=None if args.tsne_no_pca else 50,
    )
    fields["pca"] = pca_emb
    fields["tsne"] = tsne_emb
    if depth == "embed":
        return SplitResult(**fields)

    labels, clusters = _cluster_points(tsne_emb.coordinates, args)
    fields["labels"] = labels
    fields["clusters"] = clusters
    fields["silhouettes"] = _silhouettes(tsne_emb.coordinates, labels, args)
    truth = _truth_labels(annotations)
    if truth is not None:
        fields["ari"] = adjusted_rand_index(truth, labels)
    return SplitResult(**fields)


def _stage_splits(args, depth: str) -> list[SplitResult]:
    items = _splits(args)
    return _parallel_map(
        lambda it: _compute_split(args, it[0], it[1], it[2], depth), items
    )


# ---------------------------------------------------------------- subcommands


def _run_split(args) -> int:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    comment = canonical_json(_resolved_config(args, INPUT_KEYS + SEED_KEYS))
    rows = []
    for (method, replicate), sub, anns in _splits(args):
        stem = f"{_safe(method)}_{_safe(replicate)}"
        write_matrix_market(sub.transpose(), outdir / f"matrix_{stem}.mtx")
        write_cell_annotations(anns, outdir / f"cells_{stem}.csv")
        rows.append(
            [args.sample, method, replicate, str(sub.n_cells), str(sub.n_genes)]
        )
    write_csv(
        outdir / "split_summary.csv",
        comment,
        ["sample", "method", "replicate", "n_cells", "n_genes"],
        rows,
    )
    return 0


def _run_qc(args) -> int:
    comment = canonical_json(_resolved_config(args, INPUT_KEYS + SEED_KEYS))
    splits = _stage_splits(args, "qc")
    emit_qc_tables(splits, args.output_dir, comment)
    return 0


def _run_filter(args) -> int:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    comment = canonical_json(
        _resolved_config(args, INPUT_KEYS + FILTER_KEYS + SEED_KEYS)
    )
    cfg = FilterConfig(args.zero_threshold, args.cv_fraction)
    rows = []
    for (method, replicate), sub, anns in _splits(args):
        kept, t1 = filter_sparse_genes(sub, cfg)
        kept, t2 = filter_low_cv(kept, cfg)
        stem = f"{_safe(method)}_{_safe(replicate)}"
        write_matrix_market(kept.transpose(), outdir / f"filtered_{stem}.mtx")
        write_cell_annotations(anns, outdir / f"cells_{stem}.csv")
        write_gene_annotations(kept.gene_ids, outdir / f"genes_{stem}.csv")
        rows.append(
            [
                args.sample,
                method,
                replicate,
                str(t1.genes_in),
                str(t1.removed_by_sparsity),
                str(t2.removed_by_cv),
                str(t2.genes_out),
            ]
        )
    write_csv(
        outdir / "filter_summary.csv",
        comment,
        [
            "sample",
            "method",
            "replicate",
            "genes_in",
            "removed_by_sparsity",
            "removed_by_cv",
            "genes_out",
        ],
        rows,
    )
    return 0


def _run_normalize(args) -> int:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    comment = canonical_json(
        _resolved_config(args, INPUT_KEYS + FILTER_KEYS + SEED_KEYS)
    )
    for s in _stage_splits(args, "normalize"):
        stem = f"{_safe(s.method)}_{_safe(s.replicate)}"
        write_dense_csv(s.normalized, outdir / f"normalized_{stem}.csv", comment)
    return 0


def _run_embed(args) -> int:
    comment = canonical_json(
        _resolved_config(args, INPUT_KEYS + FILTER_KEYS + EMBED_KEYS + SEED_KEYS)
    )
    splits = _stage_splits(args, "embed")
    emit_embedding_tables(splits, args.output_dir, comment)
    return 0


def _run_cluster(args) -> int:
    comment = canonical_json(
        _resolved_config(
            args, INPUT_KEYS + FILTER_KEYS + EMBED_KEYS + CLUSTER_KEYS + SEED_KEYS
        )
    )
    splits = _stage_splits(args, "full")
    emit_cluster_table(splits, args.output_dir, comment)
    return 0


def _run_evaluate(args) -> int:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    config = _resolved_config(
        args, INPUT_KEYS + FILTER_KEYS + EMBED_KEYS + CLUSTER_KEYS + SEED_KEYS
    )
    comment = canonical_json(config)
    splits = _stage_splits(args, "full")
    emit_silhouette_table(splits, outdir, comment)
    entries = []
    for s in splits:
        entry = {
            "sample": s.sample,
            "method": s.method,
            "replicate": s.replicate,
            "silhouette_mean": s.silhouettes.mean,
        }
        if s.ari is not None:
            entry["ari"] = s.ari
        entries.append(entry)
    with open(outdir / "metrics.json", "w") as fh:
        fh.write(canonical_json({"config": config, "splits": entries}))
        fh.write("\n")
    return 0


def _run_report(args) -> int:
    rebuild_plots_from_tables(args.input_dir, args.output_dir or args.input_dir)
    return 0


def _run_synth(args) -> int:
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = SynthConfig(
        n_clusters=args.n_clusters,
        cells_per_cluster=args.cells_per_cluster,
        n_genes=args.n_genes,
        n_marker_genes_per_cluster=args.marker_genes,
        base_mean=args.base_mean,
        marker_fold=args.marker_fold,
        dropout_prob=args.dropout_prob,
        dispersion=args.dispersion,
        seed=args.seed,
    )
    m, _, annotations = generate(cfg, method=args.method_name, replicate=args.replicate)
    write_matrix_market(m.transpose(), outdir / "matrix.mtx")
    write_cell_annotations(annotations, outdir / "cells.csv")
    write_gene_annotations(m.gene_ids, outdir / "genes.csv")
    return 0


def _run_pipeline(args) -> int:
    config = _resolved_config(
        args, INPUT_KEYS + FILTER_KEYS + EMBED_KEYS + CLUSTER_KEYS + SEED_KEYS
    )
    splits = _stage_splits(args, "full")
    result = PipelineResult(args.sample, config, splits)
    emit_tables(result, args.output_dir)
    write_summary(result, args.output_dir)
    emit_plots(result, args.output_dir, seed=args.seed)
    return 0


# -------------------------------------------------------------------- parser


def _add_input_flags(p):
    p.add_argument("--matrix", required=True, help="count matrix (.mtx, optionally gzipped)")
    p.add_argument("--cells", help="cell annotation CSV (cell_id,method,replicate[,cell_type])")
    p.add_argument("--genes", help="gene annotation CSV (gene_id)")
    p.add_argument("--transpose", action="store_true",
                   help="the matrix file already has cells as rows")
    p.add_argument("--join-by-id", action="store_true",
                   help="match annotation rows to matrix cell ids instead of file order")
    p.add_argument("--sample", default="sample", help="sample name used in output tables")


def _add_filter_flags(p):
    p.add_argument("--zero-threshold", type=float, default=0.8,
                   help="drop genes whose zero fraction strictly exceeds this")
    p.add_argument("--cv-fraction", type=float, default=0.15,
                   help="drop this fraction of genes with the lowest CV")
    p.add_argument("--normalize-axis", choices=("cells", "genes"), default="cells")
    p.add_argument("--log1p", action="store_true",
                   help="apply log1p before quantile normalization")


def _add_embed_flags(p):
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--tsne-no-pca", action="store_true",
                   help="skip the 50-dim PCA reduction before t-SNE")
    p.add_argument("--iters", type=int, default=1000, help="t-SNE iterations")


def _add_cluster_flags(p):
    p.add_argument("--k", type=int, default=3, help="number of clusters")
    p.add_argument("--cluster-method", choices=("kmeans", "hclust"), default="kmeans")
    p.add_argument("--metric", choices=("euclidean", "one-minus-correlation"),
                   default="euclidean")
    p.add_argument("--linkage", choices=("single", "complete", "average", "ward"),
                   default="ward")
    p.add_argument("--restarts", type=int, default=10, help="k-means restarts")


def _add_common_flags(p, output_required=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", "-o", required=output_required,
                   help="directory for output artifacts")
    p.add_argument("--config", help="key=value config file; flags override it")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="scbench",
        description="Split, QC, normalize, embed, cluster, and report "
        "single-cell count matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    table = {}

    def command(name, func, help_, flags):
        p = sub.add_parser(name, help=help_)
        for add in flags:
            add(p)
        p.set_defaults(func=func)
        table[name] = p
        return p

    command(
        "split",
        _run_split,
        "split a matrix into per-(method, replicate) files",
        (_add_input_flags, _add_common_flags),
    )
    command(
        "qc",
        _run_qc,
        "dropout, detection, and cumulative-detection tables",
        (_add_input_flags, _add_common_flags),
    )
    command(
        "filter",
        _run_filter,
        "apply the sparsity and CV gene filters",
        (_add_input_flags, _add_filter_flags, _add_common_flags),
    )
    command(
        "normalize",
        _run_normalize,
        "filter then quantile-normalize each split",
        (_add_input_flags, _add_filter_flags, _add_common_flags),
    )
    command(
        "embed",
        _run_embed,
        "PCA and t-SNE embeddings of each normalized split",
        (_add_input_flags, _add_filter_flags, _add_embed_flags, _add_common_flags),
    )
    command(
        "cluster",
        _run_cluster,
        "cluster each split's t-SNE embedding",
        (
            _add_input_flags,
            _add_filter_flags,
            _add_embed_flags,
            _add_cluster_flags,
            _add_common_flags,
        ),
    )
    command(
        "evaluate",
        _run_evaluate,
        "silhouette table and (with truth labels) adjusted Rand index",
        (
            _add_input_flags,
            _add_filter_flags,
            _add_embed_flags,
            _add_cluster_flags,
            _add_common_flags,
        ),
    )
    p = sub.add_parser("report", help="redraw SVG figures from emitted tables")
    p.add_argument("--input-dir", required=True, help="directory holding the CSV tables")
    p.add_argument("--output-dir", "-o", help="defaults to --input-dir")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.set_defaults(func=_run_report)
    table["report"] = p

    p = sub.add_parser("synth", help="generate a synthetic count matrix")
    p.add_argument("--n-clusters", type=int, default=3)
    p.add_argument("--cells-per-cluster", type=int, default=100)
    p.add_argument("--n-genes", type=int, default=200)
    p.add_argument("--marker-genes", type=int, default=10,
                   help="marker genes per cluster")
    p.add_argument("--base-mean", type=float, default=5.0)
    p.add_argument("--marker-fold", type=float, default=8.0)
    p.add_argument("--dropout-prob", type=float, default=0.5)
    p.add_argument("--dispersion", type=float, default=2.0)
    p.add_argument("--method-name", default="synthetic")
    p.add_argument("--replicate", default="r1")
    _add_common_flags(p)
    p.set_defaults(func=_run_synth)
    table["synth"] = p

    command(
        "pipeline",
        _run_pipeline,
        "run every stage and write all tables, summary, and figures",
        (
            _add_input_flags,
            _add_filter_flags,
            _add_embed_flags,
            _add_cluster_flags,
            _add_common_flags,
        ),
    )
    return parser, table


def _coerce(action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    value = action.type(raw) if action.type else raw
    if action.choices is not None and value not in action.choices:
        raise ValueError(f"must be one of {sorted(action.choices)}, got {raw!r}")
    return value


def _find_config(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config":
            return argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--config="):
            return tok.partition("=")[2]
    return None


def _apply_config_file(parser, table, command, path, argv):
    """Install config-file values as subparser defaults, then parse argv.

    Flags given on the command line still win; keys for required options
    satisfy the requirement.
    """
    subparser = table[command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                s = line.strip()
                if not s or s.startswith("#"):
                    continue
                if "=" not in s:
                    raise ValueError(f"line {lineno}: expected key=value, got {s!r}")
                key, _, raw = s.partition("=")
                dest = key.strip().replace("-", "_")
                if dest in ("config", "help", "command", "func") or dest not in actions:
                    raise ValueError(f"line {lineno}: unknown option {key.strip()!r}")
                defaults[dest] = _coerce(actions[dest], raw.strip())
    except (OSError, ValueError) as exc:
        subparser.error(f"--config {path}: {exc}")
    subparser.set_defaults(**defaults)
    for dest in defaults:
        actions[dest].required = False
    return parser.parse_args(argv)


def cli_main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser, table = build_parser()
    try:
        config_path = _find_config(argv)
        if config_path and argv and argv[0] in table:
            args = _apply_config_file(parser, table, argv[0], config_path, argv)
        else:
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (DataError, OSError, ValueError) as exc:
        envelope = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(envelope) + "\n")
        return 1


def main() -> None:
    sys.exit(cli_main())
