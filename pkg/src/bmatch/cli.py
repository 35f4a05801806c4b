"""Command-line front end: ingest, run one algorithm, write metrics.

Three input modes (exactly one per run): a weighted edge list, a pair of
raw-text document files joined by similarity, or a synthetic-dataset spec.
Every run writes ``summary.csv``, the matching itself, and — for the
anytime greedy algorithm — a per-round ``trace.csv``.  Each file carries
the run's config as a comment header so any result can be regenerated.

Exit codes: 0 success, 2 bad configuration, 3 runtime failure.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import click

from .capacity import (
    CAPACITY_MODELS,
    ActivityProfile,
    consumer_budget,
    consumer_capacity,
    favorites_capacity,
    item_capacity_quality,
    item_capacity_uniform,
    parse_synth_spec,
    question_capacity,
    synth_dataset,
)
from .engine import Engine
from .graph import (
    BipartiteGraph,
    Matching,
    NodeId,
    Side,
    build_graph,
    load_capacities,
    load_edge_list,
    matching_value,
    violation_metric,
    write_matching,
)
from .greedy import GreedyTracePoint, greedy_centralized, greedy_mr
from .maximal import maximal_b_matching
from .oracle import exact_b_matching
from .simjoin import Corpus, SimJoinError, candidate_edges, tfidf_weight
from .stack import StackParams, stack_greedy_mr, stack_mr, stack_mr_feasible
from .text import ingest_text_corpus

ALGORITHMS = (
    "greedymr",
    "greedy-centralized",
    "stackmr",
    "stackgreedymr",
    "stackmr-feasible",
    "maximal",
    "exact",
)

SUMMARY_COLUMNS = (
    "algorithm",
    "sigma",
    "epsilon",
    "alpha",
    "seed",
    "edges",
    "matching_value",
    "rounds_total",
    "rounds_by_phase",
    "violation_epsilon_prime",
    "wall_time",
)


class ConfigError(ValueError):
    """The run configuration is inconsistent (maps to exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    algorithm: str
    edges: str | None = None
    capacities: str | None = None
    items: str | None = None
    consumers: str | None = None
    synth: str | None = None
    sigma: float = 0.1
    epsilon: float = 0.5
    alpha: float = 1.0
    capacity_model: str = "uniform"
    seed: int = 0
    partitions: int = 1
    max_rounds: int = 200
    out: str = "out"

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; pick one of {ALGORITHMS}")
        corpus_mode = self.items is not None or self.consumers is not None
        if corpus_mode and (self.items is None or self.consumers is None):
            raise ConfigError("corpus mode needs both --items and --consumers")
        modes = sum(1 for active in (self.edges is not None, corpus_mode, self.synth is not None) if active)
        if modes != 1:
            raise ConfigError("exactly one input mode required: --edges, --items/--consumers, or --synth")
        if self.capacities is not None and self.edges is None:
            raise ConfigError("--capacities only applies to --edges input")
        if self.sigma <= 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.capacity_model not in CAPACITY_MODELS:
            raise ConfigError(f"capacity_model must be one of {CAPACITY_MODELS}")
        if self.partitions < 1:
            raise ConfigError("partitions must be >= 1")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")

    def echo(self) -> str:
        """One-line JSON form of everything that determines the results.

        The output directory is deliberately left out: two runs into
        different directories must still produce identical files.
        """
        fields = asdict(self)
        del fields["out"]
        return json.dumps(fields, sort_keys=True)


def _corpus_capacities(raw: Corpus, config: RunConfig) -> dict[NodeId, int]:
    """Capacities from document term mass: bigger consumers ask for more,
    and item budgets follow the configured model with term counts standing
    in for activity/favourite/quality signals."""
    item_docs = raw.side_documents(Side.ITEM)
    consumer_docs = raw.side_documents(Side.CONSUMER)
    activity = {NodeId(Side.CONSUMER, j): doc.vector.total() for j, doc in enumerate(consumer_docs)}
    favorites = {NodeId(Side.ITEM, i): doc.vector.total() for i, doc in enumerate(item_docs)}
    fav_total = sum(favorites.values())
    quality = {t: w / fav_total for t, w in favorites.items()} if fav_total > 0 else None
    if config.capacity_model == "quality" and quality is None:
        raise SimJoinError("quality capacities need at least one item term")
    profile = ActivityProfile(
        alpha=config.alpha, activity=activity, favorites=favorites, quality=quality
    )
    caps = {u: consumer_capacity(profile, u) for u in activity}
    budget = consumer_budget(profile)
    for t in favorites:
        if config.capacity_model == "uniform":
            caps[t] = item_capacity_uniform(profile, budget, len(favorites))
        elif config.capacity_model == "quality":
            caps[t] = item_capacity_quality(profile, t, budget)
        elif config.capacity_model == "favorites":
            caps[t] = favorites_capacity(profile, t)
        else:
            caps[t] = question_capacity(profile, len(favorites))
    return caps


def _load_instance(
    config: RunConfig, engine: Engine
) -> tuple[BipartiteGraph, list[str], list[str], dict[str, float]]:
    """Build the graph for the configured input mode.

    Returns (graph, item labels, consumer labels, effective parameter
    overrides) — a synthetic spec carries its own sigma/alpha, which is
    what the summary should report.
    """
    if config.edges is not None:
        data = load_edge_list(config.edges)
        caps = load_capacities(config.capacities, data) if config.capacities else 1
        return build_graph(data, caps), data.item_ids, data.consumer_ids, {}

    if config.synth is not None:
        spec = parse_synth_spec(config.synth)
        g, _ = synth_dataset(spec, config.seed)
        item_ids = [f"t{i}" for i in range(spec.items)]
        consumer_ids = [f"c{j}" for j in range(spec.consumers)]
        return g, item_ids, consumer_ids, {"sigma": spec.sigma, "alpha": spec.alpha}

    items_corpus = ingest_text_corpus(config.items, Side.ITEM)
    consumers_corpus = ingest_text_corpus(config.consumers, Side.CONSUMER)
    raw = Corpus.merged(items_corpus, consumers_corpus)
    weighted = tfidf_weight(raw)
    item_docs = weighted.side_documents(Side.ITEM)
    consumer_docs = weighted.side_documents(Side.CONSUMER)
    edges = candidate_edges(item_docs, consumer_docs, config.sigma, engine=engine)
    caps = _corpus_capacities(raw, config)
    nodes = [NodeId(Side.ITEM, i) for i in range(len(item_docs))]
    nodes += [NodeId(Side.CONSUMER, j) for j in range(len(consumer_docs))]
    g = BipartiteGraph([(r.item, r.consumer, r.weight) for r in edges], caps, nodes=nodes)
    return g, [d.doc_id for d in item_docs], [d.doc_id for d in consumer_docs], {}


def _run_algorithm(
    config: RunConfig, g: BipartiteGraph, engine: Engine
) -> tuple[Matching, list[GreedyTracePoint] | None]:
    if config.algorithm == "greedymr":
        return greedy_mr(g, seed=config.seed, engine=engine, max_rounds=config.max_rounds)
    if config.algorithm == "greedy-centralized":
        return greedy_centralized(g), None
    if config.algorithm == "maximal":
        m = maximal_b_matching(g, seed=config.seed, engine=engine, max_iterations=config.max_rounds)
        return m, None
    if config.algorithm == "exact":
        return exact_b_matching(g)[0], None
    params = StackParams(config.epsilon, max_push_rounds=config.max_rounds)
    runner = {
        "stackmr": stack_mr,
        "stackgreedymr": stack_greedy_mr,
        "stackmr-feasible": stack_mr_feasible,
    }[config.algorithm]
    return runner(g, params, config.seed, engine=engine)[0], None


def _write_rows(path: Path, echo: str, columns: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [f"# config: {echo}", "# schema=1", ",".join(columns)]
    lines += [",".join(str(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(
    config: RunConfig, *, clock: Callable[[], float] = time.perf_counter
) -> dict:
    """Execute one configured run and write its three output files.

    Returns the summary row as a dict.  ``clock`` is injectable so tests
    can pin the one field (wall_time) that honest measurement makes
    nondeterministic.
    """
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    engine = Engine(seed=config.seed, partitions=config.partitions)

    start = clock()
    g, item_ids, consumer_ids, effective = _load_instance(config, engine)
    m, trace = _run_algorithm(config, g, engine)
    elapsed = clock() - start

    phases = engine.rounds_by_phase()
    row = {
        "algorithm": config.algorithm,
        "sigma": effective.get("sigma", config.sigma),
        "epsilon": config.epsilon,
        "alpha": effective.get("alpha", config.alpha),
        "seed": config.seed,
        "edges": g.num_edges,
        "matching_value": matching_value(m, g),
        "rounds_total": engine.rounds_total(),
        "rounds_by_phase": "|".join(f"{k}={v}" for k, v in sorted(phases.items())),
        "violation_epsilon_prime": violation_metric(m, g),
        "wall_time": round(elapsed, 6),
    }

    echo = config.echo()
    _write_rows(out_dir / "summary.csv", echo, SUMMARY_COLUMNS, [[row[c] for c in SUMMARY_COLUMNS]])
    if trace is not None:
        final = trace[-1].value if trace else 0.0
        _write_rows(
            out_dir / "trace.csv",
            echo,
            ("round", "value", "fraction_of_final", "included_edges"),
            [
                (p.round_index, p.value, p.value / final if final else 1.0, p.included_edges)
                for p in trace
            ],
        )
    write_matching(
        out_dir / "matching.tsv", m, g, item_ids, consumer_ids, header=f"config: {echo}"
    )
    return row


@click.command(name="bmatch")
@click.option("--algorithm", type=click.Choice(ALGORITHMS), required=True)
@click.option("--edges", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Weighted edge list: item<TAB>consumer<TAB>weight.")
@click.option("--capacities", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Per-node capacities for --edges input: id<TAB>side<TAB>capacity.")
@click.option("--items", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Raw-text item documents: doc_id<TAB>text.")
@click.option("--consumers", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Raw-text consumer documents: doc_id<TAB>text.")
@click.option("--synth", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Synthetic dataset spec (key=value lines).")
@click.option("--sigma", type=float, default=0.1, show_default=True,
              help="Similarity threshold for corpus mode.")
@click.option("--epsilon", type=float, default=0.5, show_default=True,
              help="Stack slackness parameter.")
@click.option("--alpha", type=float, default=1.0, show_default=True,
              help="Consumer capacity scale.")
@click.option("--capacity-model", type=click.Choice(CAPACITY_MODELS), default="uniform",
              show_default=True, help="Item-side capacity model for corpus mode.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--partitions", type=int, default=1, show_default=True,
              help="Simulated mapper count (never changes results).")
@click.option("--max-rounds", type=int, default=200, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True)
def main(**kwargs) -> None:
    """Match items to consumers under degree capacities, maximizing weight."""
    try:
        config = RunConfig(**kwargs)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        row = run_experiment(config)
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        click.echo(f"config: {config.echo()}", err=True)
        raise SystemExit(3) from exc
    click.echo(
        f"{config.algorithm}: value={row['matching_value']!r} over {row['edges']} edges "
        f"in {row['rounds_total']} rounds -> {config.out}"
    )


if __name__ == "__main__":
    main()
