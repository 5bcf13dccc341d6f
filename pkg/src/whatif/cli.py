"""Command-line entry point: ``whatif {ingest,discover,effects,baselines,simulate,report}``.

Every artifact starts with a header line ``whatif <version> config=<hash>``
(behind the file type's comment marker). The hash covers the analysis
parameters and the bytes of the input table and schema, never paths, so two
runs on the same inputs produce identical artifact directories.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

from filelock import FileLock, Timeout

from . import __version__
from .baselines import correlation_screen, neutral_table, neutral_tests, strong_pairs_table
from .effects import EffectConfig, hierarchy, partition_variables, rank_interventions
from .errors import WhatIfError
from .ges import GesOptions, run_ges
from .graph import Pdag, from_json, to_dot, to_json
from .ingest import (
    Dataset,
    complete_cases,
    drop_zero_variance,
    format_table,
    load_dataset,
    standardize,
    format_schema,
)
from .synth import likertize, random_dag, random_scm, recovery_metrics, sample

log = logging.getLogger("whatif")

EXIT_OK, EXIT_INPUT, EXIT_TRUNCATED = 0, 1, 2


SIMULATE_KEYS = ("p", "degree", "n", "likert")


@dataclass
class RunConfig:
    input: str | None = None
    schema: str | None = None
    out: str = "whatif-out"
    seed: int = 0
    high: float = 5.0
    low: float = 3.0
    resamples: int = 1000
    subsample: int | None = None
    corr_method: str = "pearson"
    corr_threshold: float = 0.5
    penalty: float = 1.0
    max_missing: float = 0.5
    neutral: float = 4.0
    bonferroni: bool = False
    # simulate only
    p: int = 10
    degree: float = 2.0
    n: int = 1000
    likert: bool = True

    def validate(self) -> None:
        if not (1 <= self.low < self.high <= 7):
            raise WhatIfError(f"thresholds must satisfy 1 <= low < high <= 7 (got low={self.low}, high={self.high})")
        if self.resamples < 1:
            raise WhatIfError("resamples must be >= 1")
        if self.corr_method not in ("pearson", "spearman"):
            raise WhatIfError(f"unknown correlation method {self.corr_method!r}")

    def analysis_params(self, simulate: bool = False) -> dict:
        skip = {"input", "schema", "out"} | (set() if simulate else set(SIMULATE_KEYS))
        return {k: v for k, v in asdict(self).items() if k not in skip}

    def effect_config(self) -> EffectConfig:
        return EffectConfig(self.high, self.low, self.resamples, self.subsample, self.seed)


def config_hash(cfg: RunConfig, command_group: str = "analysis") -> str:
    h = hashlib.sha256()
    h.update(command_group.encode())
    h.update(json.dumps(cfg.analysis_params(command_group == "simulate"), sort_keys=True).encode())
    for path in (cfg.input, cfg.schema):
        if path:
            h.update(hashlib.sha256(Path(path).read_bytes()).digest())
    return h.hexdigest()[:16]


class Artifacts:
    """Writes header-stamped files into the output directory."""

    def __init__(self, out: Path, cfg_hash: str):
        self.out = out
        self.hash = cfg_hash
        self.header = f"whatif {__version__} config={cfg_hash}"

    def write_text(self, name: str, body: str, marker: str = "#") -> Path:
        path = self.out / name
        if marker == "<!--":
            head = f"<!-- {self.header} -->\n"
        else:
            head = f"{marker} {self.header}\n"
        path.write_text(head + body, encoding="utf-8")
        return path

    def write_json(self, name: str, doc) -> Path:
        return self.write_text(name, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")

    def write_rows(self, name: str, rows: Sequence[Sequence[str]]) -> Path:
        buf = io.StringIO()
        csv.writer(buf, delimiter="\t", lineterminator="\n").writerows(rows)
        return self.write_text(name, buf.getvalue())


def read_artifact(path: Path, require_header: bool = True) -> tuple[str, str]:
    """Return (config hash, body) of an artifact written by this tool."""
    text = path.read_text(encoding="utf-8")
    first, _, body = text.partition("\n")
    marker = "config="
    if marker not in first or not first.startswith(("#", "//", "<!--")):
        if not require_header:
            return "", text
        raise WhatIfError(f"{path} has no artifact header")
    cfg_hash = first.split(marker, 1)[1].split()[0]
    return cfg_hash, body


def _prepare(cfg: RunConfig) -> Dataset:
    """Load, type-code, complete-case filter and drop constant columns (raw units)."""
    if not cfg.input or not cfg.schema:
        raise WhatIfError("--input and --schema are required")
    for path in (cfg.input, cfg.schema):
        if not Path(path).is_file():
            raise WhatIfError(f"file not found: {path}")
    data = complete_cases(load_dataset(cfg.input, cfg.schema), cfg.max_missing)
    return drop_zero_variance(data)


def _provenance(data: Dataset) -> str:
    return "".join(item + "\n" for item in data.provenance)


def cmd_ingest(cfg: RunConfig, art: Artifacts) -> int:
    data = _prepare(cfg)
    art.write_text("dataset.tsv", format_table(data))
    art.write_text("provenance.txt", _provenance(data))
    log.info("ingested n=%d p=%d", data.n, data.p)
    return EXIT_OK


def cmd_discover(cfg: RunConfig, art: Artifacts) -> int:
    data = _prepare(cfg)
    z = standardize(data)
    graph, trace = run_ges(z, GesOptions(penalty_multiplier=cfg.penalty))
    names = z.names
    art.write_text("graph.json", to_json(graph, names))
    art.write_text("graph.dot", to_dot(graph, names), marker="//")
    lines = [f"initial|||||0.0|{trace.initial_score!r}"] + trace.to_lines(names)
    if trace.truncated:
        lines.append("truncated")
    art.write_text("search_trace.txt", "\n".join(lines) + "\n")
    art.write_json("partition.json", partition_variables(graph).to_dict(names))
    art.write_text("provenance.txt", _provenance(z))
    log.info("discovered %d edges over %d variables", graph.n_edges, graph.p)
    if trace.truncated:
        log.error("search hit the iteration cap; artifacts written from the best state")
        return EXIT_TRUNCATED
    return EXIT_OK


def cmd_effects(cfg: RunConfig, art: Artifacts, graph_path: str | None) -> int:
    data = _prepare(cfg)
    gpath = Path(graph_path) if graph_path else art.out / "graph.json"
    if not gpath.is_file():
        raise WhatIfError(f"graph file not found: {gpath}")
    _, body = read_artifact(gpath, require_header=False)
    graph, names = from_json(body)
    if names != data.names:
        only_graph = [nm for nm in names if nm not in data.names]
        only_data = [nm for nm in data.names if nm not in names]
        order = "" if only_graph or only_data else " (same names, different order)"
        raise WhatIfError(f"graph/dataset variable mismatch{order}: graph only {only_graph}, dataset only {only_data}")
    hier = hierarchy(graph)
    ranking = rank_interventions(data, graph, cfg.effect_config())
    for entry in ranking:
        if entry.error:
            log.warning("skipped target %s: %s", names[entry.node], entry.error)
    art.write_json("hierarchy.json", hier.to_dict(names))
    art.write_json(
        "effects.json",
        {
            "thresholds": {"high": cfg.high, "low": cfg.low},
            "seed": cfg.seed,
            "ranking": [e.report.to_dict(names) for e in ranking if e.report is not None],
            "skipped": [{"target": names[e.node], "error": e.error} for e in ranking if e.report is None],
        },
    )
    return EXIT_OK


def cmd_baselines(cfg: RunConfig, art: Artifacts) -> int:
    data = _prepare(cfg)
    screen = correlation_screen(data, cfg.corr_method, cfg.corr_threshold)
    tests = neutral_tests(data, cfg.neutral, cfg.bonferroni)
    names = data.names
    art.write_rows("strong_pairs.tsv", strong_pairs_table(screen, names))
    art.write_rows("neutral_tests.tsv", neutral_table(tests, names))
    art.write_json(
        "correlation_summary.json",
        {
            "method": screen.method,
            "threshold": screen.threshold,
            "n_variables": len(screen.variables),
            "n_strong_pairs": len(screen.strong_pairs),
            "zero_variance": [names[j] for j in screen.zero_variance],
            "bonferroni": cfg.bonferroni,
        },
    )
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, art: Artifacts) -> int:
    dag = random_dag(cfg.p, cfg.degree, cfg.seed)
    scm = random_scm(dag, cfg.seed + 1)
    data = sample(scm, cfg.n, cfg.seed + 2)
    z = standardize(data)
    names = data.names
    graph, _ = run_ges(z, GesOptions(penalty_multiplier=cfg.penalty))
    metrics = recovery_metrics(dag, graph)
    table = likertize(z) if cfg.likert else data
    art.write_text("truth_graph.json", to_json(Pdag.from_dag(dag), names))
    art.write_text("sample.tsv", format_table(table))
    art.write_text("sample_schema.txt", format_schema(table.specs))
    art.write_rows(
        "metrics.tsv",
        [
            ["shd", "skeleton_precision", "skeleton_recall", "orientation_accuracy"],
            [str(metrics.shd), f"{metrics.skeleton_precision:.6f}", f"{metrics.skeleton_recall:.6f}", f"{metrics.orientation_accuracy:.6f}"],
        ],
    )
    return EXIT_OK


REPORT_INPUTS = (
    "graph.json",
    "graph.dot",
    "search_trace.txt",
    "partition.json",
    "provenance.txt",
    "hierarchy.json",
    "effects.json",
    "strong_pairs.tsv",
    "neutral_tests.tsv",
    "correlation_summary.json",
    "config.json",
)


def _read_rows(body: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(body), delimiter="\t"))


def cmd_report(cfg: RunConfig, art: Artifacts, artifact_dir: str | None) -> int:
    src = Path(artifact_dir) if artifact_dir else art.out
    missing = [nm for nm in REPORT_INPUTS if not (src / nm).is_file()]
    if missing:
        raise WhatIfError(f"missing artifacts in {src}: {', '.join(missing)}")
    parts = {nm: read_artifact(src / nm) for nm in REPORT_INPUTS}
    hashes = {h for h, _ in parts.values()}
    if len(hashes) != 1:
        detail = ", ".join(f"{nm}={h}" for nm, (h, _) in sorted(parts.items()))
        raise WhatIfError(f"artifacts come from different runs (config hashes differ): {detail}")
    run_hash = hashes.pop()
    art = Artifacts(art.out, run_hash)
    body = {nm: b for nm, (_, b) in parts.items()}
    config = json.loads(body["config.json"])
    partition = json.loads(body["partition.json"])
    hier = json.loads(body["hierarchy.json"])
    effects = json.loads(body["effects.json"])
    pairs = _read_rows(body["strong_pairs.tsv"])[1:]
    tests = _read_rows(body["neutral_tests.tsv"])[1:]
    trace = [ln for ln in body["search_trace.txt"].splitlines() if ln and not ln.startswith("initial")]
    n_fwd = sum(ln.startswith("forward|") for ln in trace)
    n_bwd = sum(ln.startswith("backward|") for ln in trace)
    provenance = [ln for ln in body["provenance.txt"].splitlines() if ln]

    out = [f"# Causal analysis report", ""]
    out.append(f"Tool version {__version__}, config hash `{run_hash}`.")
    out.append("")
    out.append("## Configuration")
    out.append("")
    out.append("```json")
    out.append(json.dumps(config, indent=2, sort_keys=True))
    out.append("```")
    out.append("")
    out.append("## Data provenance")
    out.append("")
    out.append(f"{len(provenance)} items removed during cleaning.")
    out.extend(f"- {ln}" for ln in provenance[:50])
    if len(provenance) > 50:
        out.append(f"- ... {len(provenance) - 50} more (see provenance.txt)")
    out.append("")
    out.append("## Causal discovery")
    out.append("")
    out.append(f"Greedy equivalence search applied {n_fwd} insertions and {n_bwd} deletions.")
    out.append(f"Graph: `graph.dot` (render with Graphviz), edge lists in `graph.json`.")
    n_assoc, n_ind = len(partition["associated"]), len(partition["independent"])
    total = n_assoc + n_ind
    pct = 100.0 * n_assoc / total if total else 0.0
    out.append(f"Causally associated variables: {n_assoc} of {total} ({pct:.0f}%); independent: {n_ind}.")
    out.append("")
    out.append(f"Most ancestral node: {hier['most_ancestor']}; most descendant node: {hier['most_descendant']}.")
    if hier["orientation_ambiguous"]:
        out.append("Some edges are unoriented in the equivalence class; the hierarchy uses a deterministic extension.")
    out.append("")
    out.append("## What-is ranking (descriptive baselines)")
    out.append("")
    out.append("Items furthest below the neutral point (one-sample t-test):")
    out.append("")
    out.append("| rank | variable | effect size | p | |")
    out.append("|---|---|---|---|---|")
    for k, row in enumerate(tests[:15], start=1):
        out.append(f"| {k} | {row[0]} | {row[2]} | {row[4]} | {row[5]} |")
    out.append("")
    out.append(f"Strongest pairwise correlations ({len(pairs)} pairs above threshold):")
    out.append("")
    out.append("| variable a | variable b | r |")
    out.append("|---|---|---|")
    for row in pairs[:15]:
        out.append(f"| {row[0]} | {row[1]} | {row[2]} |")
    out.append("")
    out.append("## What-if ranking (intervention effects)")
    out.append("")
    out.append(
        f"High group >= {effects['thresholds']['high']}, low group <= {effects['thresholds']['low']}; "
        "effects are mean differences across all other variables."
    )
    out.append("")
    out.append("| rank | target | mean abs effect | n high | n low |")
    out.append("|---|---|---|---|---|")
    for k, rep in enumerate(effects["ranking"], start=1):
        out.append(f"| {k} | {rep['target']} | {rep['mean_abs_effect']:.4f} | {rep['n_high']} | {rep['n_low']} |")
    for s in effects["skipped"]:
        out.append(f"| - | {s['target']} | skipped: {s['error']} | | |")
    out.append("")
    art.write_text("report.md", "\n".join(out) + "\n", marker="<!--")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--input", default=None)
    common.add_argument("--schema", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--high", type=float, default=None)
    common.add_argument("--low", type=float, default=None)
    common.add_argument("--resamples", type=int, default=None)
    common.add_argument("--subsample", type=int, default=None)
    common.add_argument("--corr-method", dest="corr_method", choices=("pearson", "spearman"), default=None)
    common.add_argument("--corr-threshold", dest="corr_threshold", type=float, default=None)
    common.add_argument("--penalty", type=float, default=None)
    common.add_argument("--max-missing", dest="max_missing", type=float, default=None)
    common.add_argument("--bonferroni", action="store_const", const=True, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="whatif", description="Causal discovery and intervention ranking for survey tables.")
    parser.add_argument("--version", action="version", version=f"whatif {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="clean a survey table")
    sub.add_parser("discover", parents=[common], help="learn the causal graph")
    eff = sub.add_parser("effects", parents=[common], help="rank intervention targets")
    eff.add_argument("--graph", default=None, help="graph.json from discover (default: <out>/graph.json)")
    sub.add_parser("baselines", parents=[common], help="correlation screen and neutral-point tests")
    sim = sub.add_parser("simulate", parents=[common], help="sample a synthetic SCM and score recovery")
    sim.add_argument("--p", type=int, default=None)
    sim.add_argument("--degree", type=float, default=None)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--gaussian", dest="likert", action="store_const", const=False, default=None)
    rep = sub.add_parser("report", parents=[common], help="assemble the Markdown report")
    rep.add_argument("--artifacts", default=None, help="artifact directory (default: --out)")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise WhatIfError(f"cannot read config {args.config}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise WhatIfError(f"unknown config keys: {sorted(unknown)}")
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    try:
        cfg = resolve_config(args)
        cfg_hash = config_hash(cfg, "simulate" if args.command == "simulate" else "analysis")
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        art = Artifacts(out, cfg_hash)
        start = time.perf_counter()
        with FileLock(str(out / ".whatif.lock"), timeout=10):
            if args.command != "report":
                art.write_json("config.json", {"version": __version__, "config_hash": cfg_hash, **cfg.analysis_params(args.command == "simulate")})
            if args.command == "ingest":
                code = cmd_ingest(cfg, art)
            elif args.command == "discover":
                code = cmd_discover(cfg, art)
            elif args.command == "effects":
                code = cmd_effects(cfg, art, args.graph)
            elif args.command == "baselines":
                code = cmd_baselines(cfg, art)
            elif args.command == "simulate":
                code = cmd_simulate(cfg, art)
            else:
                code = cmd_report(cfg, art, args.artifacts)
        print(f"whatif {args.command}: done in {time.perf_counter() - start:.2f}s", file=sys.stderr)
        return code
    except Timeout:
        print(f"error: output directory {cfg.out} is locked by another run", file=sys.stderr)
        return EXIT_INPUT
    except (WhatIfError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
