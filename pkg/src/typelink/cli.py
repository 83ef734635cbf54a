"""Command-line interface: world ingestion and synthesis, link
simplification, learnability scoring, type-system search, classifier
training, linking, evaluation, the size-penalty sweep, and the designer
service.

Report-producing commands write a delimited file and render the matching
figure alongside it (same basename, .png) unless --no-figures is given.
"""

from __future__ import annotations

import json
import os
import statistics
import sys
from dataclasses import replace

import click
import numpy as np

from . import __version__
from .evalcore import ObjectiveConfig, load_corpus, save_corpus, s_greedy
from .kg import WorldFormatError, load_graph, load_links, save_graph, save_links
from .learnability import WindowTrainConfig, LearnabilityScore, AxisLearnability, learnability, learnability_report
from .linker import SmoothingParams, decisions_to_predictions, fit_smoothing, link_corpus
from .search import SearchConfig, build_pool, random_baseline, run_search
from .service import evaluate_system, serve as run_service
from .simplify import simplify as run_simplify
from .synth import SynthConfig, generate_synthetic_world
from .typeclf import TrainConfig, label_corpus, load_model, save_model, train as train_classifier
from .typesys import (
    MembershipCache,
    Relation,
    enumerate_relations,
    load_relations,
    load_system,
    save_relations,
    save_system,
)
from . import figures


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_tsv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _echo_json(data: dict) -> None:
    click.echo(json.dumps(data, sort_keys=True))


def _load_world(graph_path: str, links_path: str, corpus_path: str | None = None):
    graph = load_graph(graph_path)
    stats = load_links(links_path, graph)
    corpus = load_corpus(corpus_path) if corpus_path else None
    return graph, stats, corpus


class _Cli(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (WorldFormatError, ValueError, KeyError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc


@click.group(cls=_Cli)
@click.version_option(__version__)
def main():
    """Type-system discovery and type-constrained entity disambiguation."""


@main.command()
@click.option("--graph", "graph_path", required=True, help="world directory with entities.tsv/edges.tsv")
@click.option("--links", "links_path", required=True)
@click.option("--corpus", "corpus_path", default=None)
@click.option("--out", "out_dir", default=None, help="write normalised copies of the world here")
def ingest(graph_path, links_path, corpus_path, out_dir):
    """Validate world files and print a summary."""
    graph, stats, corpus = _load_world(graph_path, links_path, corpus_path)
    summary = {
        "entities": graph.n_entities,
        "edges": len(graph.edges),
        "edge_kinds": sorted(graph.kinds),
        "mentions": len(stats),
        "links": stats.total_links(),
    }
    if corpus is not None:
        summary["documents"] = len(corpus.documents)
        summary["corpus_mentions"] = corpus.n_mentions
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_graph(graph, out_dir)
        save_links(stats, os.path.join(out_dir, "links.tsv"))
        if corpus is not None:
            save_corpus(corpus, os.path.join(out_dir, "corpus.jsonl"))
    _echo_json(summary)


@main.command()
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", required=True)
@click.option("--entities", type=int, default=SynthConfig.n_entities)
@click.option("--axes", type=int, default=SynthConfig.n_axes)
@click.option("--categories", type=int, default=SynthConfig.n_categories)
@click.option("--context-axes", type=int, default=SynthConfig.n_context_axes)
@click.option("--mention-strings", type=int, default=SynthConfig.n_mention_strings)
@click.option("--documents", type=int, default=SynthConfig.n_documents)
@click.option("--mentions-per-document", type=int, default=SynthConfig.mentions_per_document)
@click.option("--separable-fraction", type=float, default=SynthConfig.separable_fraction)
@click.option("--greedy-fraction", type=float, default=SynthConfig.greedy_fraction)
@click.option("--anaphora-fraction", type=float, default=SynthConfig.anaphora_fraction)
def synth(seed, out_dir, entities, axes, categories, context_axes, mention_strings, documents,
          mentions_per_document, separable_fraction, greedy_fraction, anaphora_fraction):
    """Generate a synthetic world (graph, links, corpus, latent system, pool)."""
    config = SynthConfig(
        n_entities=entities,
        n_axes=axes,
        n_categories=categories,
        n_context_axes=context_axes,
        n_mention_strings=mention_strings,
        n_documents=documents,
        mentions_per_document=mentions_per_document,
        separable_fraction=separable_fraction,
        greedy_fraction=greedy_fraction,
        anaphora_fraction=anaphora_fraction,
    )
    world = generate_synthetic_world(seed, config)
    os.makedirs(out_dir, exist_ok=True)
    save_graph(world.graph, out_dir)
    save_links(world.stats, os.path.join(out_dir, "links.tsv"))
    save_corpus(world.corpus, os.path.join(out_dir, "corpus.jsonl"))
    save_system(world.latent_system, os.path.join(out_dir, "latent_system.json"))
    save_relations(enumerate_relations(world.graph, min_children=3), os.path.join(out_dir, "pool.json"))
    _echo_json(
        {
            "out": out_dir,
            "entities": world.graph.n_entities,
            "edges": len(world.graph.edges),
            "mentions": world.corpus.n_mentions,
            "mention_strings": len(world.stats),
            "latent_axes": len(world.latent_system.axes),
        }
    )


@main.command("simplify")
@click.option("--graph", "graph_path", required=True)
@click.option("--links", "links_path", required=True)
@click.option("--out", "out_path", required=True, help="simplified links.tsv")
@click.option("--report", "report_path", required=True, help="per-iteration TSV report")
@click.option("--max-depth", type=int, default=16)
@click.option("--figures/--no-figures", "with_figures", default=True)
def simplify_cmd(graph_path, links_path, out_path, report_path, max_depth, with_figures):
    """Fold anaphora links into their generic parents until a fixed point."""
    graph, stats, _ = _load_world(graph_path, links_path)
    simplified, report = run_simplify(stats, graph, max_depth=max_depth)
    save_links(simplified, out_path)
    _write_tsv(
        report_path,
        ["step", "replacements", "links_changed"],
        [[r.step, r.replacements, r.links_changed] for r in report.iterations],
    )
    out = {
        "iterations": len(report.iterations),
        "replacements": report.total_replacements,
        "links_changed": report.total_links_changed,
        "polysemy_before": report.polysemy_before.mean_senses,
        "polysemy_after": report.polysemy_after.mean_senses,
    }
    if with_figures:
        out["figure"] = figures.render_simplification(report, figures.figure_path(report_path))
    _echo_json(out)


@main.command("learnability")
@click.option("--graph", "graph_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@click.option("--axes", "axes_path", required=True, help="relations JSON (pool file)")
@click.option("--out", "out_path", required=True, help="per-axis TSV report")
@click.option("--seed", type=int, default=0)
@click.option("--runs", type=int, default=4)
@click.option("--figures/--no-figures", "with_figures", default=True)
def learnability_cmd(graph_path, corpus_path, axes_path, out_path, seed, runs, with_figures):
    """Score per-axis learnability (mean window-classifier AUC)."""
    graph = load_graph(graph_path)
    corpus = load_corpus(corpus_path)
    relations = load_relations(axes_path)
    score = learnability(relations, corpus, graph, master_seed=seed, runs=runs)
    _write_tsv(
        out_path,
        ["axis", "edge_kind", "auc_mean", "auc_std"],
        [
            [f"{a.relation.membership_edge}:{a.relation.root}", a.relation.membership_edge, a.auc_mean, a.auc_std]
            for a in score.axes
        ],
    )
    rows = learnability_report(score)
    out = {
        "axes": len(score.axes),
        "system_score": score.system_score,
        "by_kind": {r.edge_kind: {"auc_mean": r.auc_mean, "auc_std": r.auc_std, "axes": r.n_axes} for r in rows},
    }
    if with_figures:
        out["figure"] = figures.render_learnability(rows, figures.figure_path(out_path))
    _echo_json(out)


def _load_learnability_tsv(path: str, relations: list[Relation]) -> LearnabilityScore:
    by_key: dict[tuple[int, str], tuple[float, float]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split("\t")
        idx = {name: i for i, name in enumerate(header)}
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            kind, root = parts[idx["edge_kind"]], int(parts[idx["axis"]].rsplit(":", 1)[1])
            by_key[(root, kind)] = (float(parts[idx["auc_mean"]]), float(parts[idx["auc_std"]]))
    axes = []
    for r in relations:
        if r.key() not in by_key:
            raise ValueError(f"learnability report is missing axis {r.membership_edge}:{r.root}")
        mean, std = by_key[r.key()]
        axes.append(AxisLearnability(relation=r, auc_mean=mean, auc_std=std, run_aucs=(), flagged_zero=mean <= 0.51))
    return LearnabilityScore(axes=tuple(axes))


def _search_config(method, beam_width, lam, seed, cem_samples, cem_elite, cem_max_iters,
                   generations, population, max_evaluations) -> SearchConfig:
    return SearchConfig(
        method=method,
        beam_width=beam_width,
        lam=lam,
        seed=seed,
        cem_samples=cem_samples,
        cem_elite=cem_elite,
        cem_max_iters=cem_max_iters,
        generations=generations,
        population=population,
        max_evaluations=max_evaluations,
    )


_search_options = [
    click.option("--lambda", "lam", type=float, default=ObjectiveConfig().lam, show_default=True),
    click.option("--seed", type=int, default=0),
    click.option("--beam-width", type=int, default=1),
    click.option("--cem-samples", type=int, default=1000),
    click.option("--cem-elite", type=int, default=200),
    click.option("--cem-max-iters", type=int, default=500),
    click.option("--generations", type=int, default=200),
    click.option("--population", type=int, default=1000),
    click.option("--max-evaluations", type=int, default=None),
    click.option("--learnability-report", "learn_path", default=None,
                 help="reuse a learnability TSV instead of recomputing"),
    click.option("--learnability-seed", type=int, default=0),
]


def _with_options(options):
    def wrap(f):
        for opt in reversed(options):
            f = opt(f)
        return f

    return wrap


@main.command("search")
@click.option("--method", type=click.Choice(["greedy", "beam", "cem", "ga", "random"]), required=True)
@click.option("--graph", "graph_path", required=True)
@click.option("--links", "links_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@click.option("--pool", "pool_path", required=True, help="relations JSON")
@click.option("--out", "out_path", required=True, help="discovered system JSON")
@click.option("--trace", "trace_path", default=None, help="per-step TSV trace")
@click.option("--random-k", type=int, default=8)
@click.option("--random-trials", type=int, default=100)
@click.option("--figures/--no-figures", "with_figures", default=True)
@_with_options(_search_options)
def search_cmd(method, graph_path, links_path, corpus_path, pool_path, out_path, trace_path,
               random_k, random_trials, with_figures, lam, seed, beam_width, cem_samples, cem_elite,
               cem_max_iters, generations, population, max_evaluations, learn_path, learnability_seed):
    """Search the candidate pool for the type system maximising J."""
    graph, stats, corpus = _load_world(graph_path, links_path, corpus_path)
    relations = load_relations(pool_path)
    cache = MembershipCache(graph)
    if learn_path:
        score = _load_learnability_tsv(learn_path, relations)
    else:
        score = learnability(relations, corpus, graph, master_seed=learnability_seed, cache=cache)
    pool = build_pool(graph, relations, score, cache=cache)

    if method == "random":
        baseline = random_baseline(pool, random_k, random_trials, seed, corpus, stats, graph, ObjectiveConfig(lam=lam))
        _echo_json(
            {
                "method": "random",
                "k": baseline.k,
                "trials": baseline.trials,
                "mean_accuracy": baseline.mean_accuracy,
                "std_accuracy": baseline.std_accuracy,
                "mean_j": baseline.mean_j,
                "std_j": baseline.std_j,
            }
        )
        return

    config = _search_config(method, beam_width, lam, seed, cem_samples, cem_elite, cem_max_iters,
                            generations, population, max_evaluations)
    result = run_search(method, pool, corpus, stats, graph, config)
    save_system(result.to_system(pool, graph), out_path)
    if trace_path:
        _write_tsv(
            trace_path,
            ["step", "j", "s_oracle", "learnability", "size", "axes"],
            [[t.step, t.j, t.s_oracle, t.learnability, t.size, ",".join(map(str, t.axes))] for t in result.trace],
        )
        if with_figures:
            figures.render_trace([(t.step, t.j, t.s_oracle) for t in result.trace],
                                 figures.figure_path(trace_path))
    _echo_json(
        {
            "method": result.method,
            "axes": len(result.selected),
            "j": result.j,
            "accuracy": result.accuracy.as_dict(),
            "learnability": result.learnability,
            "evaluations": result.requested_evaluations,
            "computed_evaluations": result.computed_evaluations,
            "pool": len(pool),
            "out": out_path,
        }
    )


@main.command("train")
@click.option("--graph", "graph_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@click.option("--system", "system_path", required=True)
@click.option("--out", "out_path", required=True, help="model checkpoint JSON")
@click.option("--lr", type=float, default=TrainConfig.lr)
@click.option("--epochs", type=int, default=TrainConfig.epochs)
@click.option("--batch-size", type=int, default=TrainConfig.batch_size)
@click.option("--emb-dim", type=int, default=TrainConfig.emb_dim)
@click.option("--hidden-dim", type=int, default=TrainConfig.hidden_dim)
@click.option("--radius", type=int, default=TrainConfig.radius)
@click.option("--affix-features/--no-affix-features", default=TrainConfig.affix_features,
              help="hashed 2/3-char prefix/suffix embeddings")
@click.option("--seed", type=int, default=0)
def train_cmd(graph_path, corpus_path, system_path, out_path, lr, epochs, batch_size, emb_dim,
              hidden_dim, radius, affix_features, seed):
    """Train the per-token type classifier on a labelled corpus."""
    graph = load_graph(graph_path)
    corpus = load_corpus(corpus_path)
    system = load_system(system_path)
    config = TrainConfig(lr=lr, epochs=epochs, batch_size=batch_size, emb_dim=emb_dim,
                         hidden_dim=hidden_dim, radius=radius, affix_features=affix_features, seed=seed)
    labeling = label_corpus(corpus, graph, system)
    model, curve = train_classifier(corpus, labeling, config)
    save_model(model, out_path)
    _echo_json(
        {
            "out": out_path,
            "labeled_tokens": labeling.n_labeled_tokens,
            "steps": len(curve),
            "first_loss": curve[0],
            "final_loss": curve[-1],
        }
    )


@main.command("predict")
@click.option("--corpus", "corpus_path", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--out", "out_path", required=True, help="per-document belief JSONL")
def predict_cmd(corpus_path, model_path, out_path):
    """Run the type classifier over a corpus and dump per-token beliefs."""
    from .typeclf import predict as predict_beliefs

    corpus = load_corpus(corpus_path)
    model = load_model(model_path)
    n_tokens = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            beliefs = predict_beliefs(model, doc.tokens)
            n_tokens += len(doc.tokens)
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc.doc_id,
                        "axes": [a.name for a in model.axes],
                        "beliefs": {
                            a.name: axis_beliefs.tolist()
                            for a, axis_beliefs in zip(model.axes, beliefs)
                        },
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    _echo_json({"documents": len(corpus.documents), "tokens": n_tokens, "out": out_path})


@main.command("link")
@click.option("--graph", "graph_path", required=True)
@click.option("--links", "links_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--system", "system_path", required=True)
@click.option("--params", "params_path", default=None, help="smoothing params JSON")
@click.option("--fit-corpus", "fit_corpus_path", default=None,
              help="fit smoothing on this corpus when --params is absent")
@click.option("--out", "out_path", required=True, help="decisions JSONL")
def link_cmd(graph_path, links_path, corpus_path, model_path, system_path, params_path,
             fit_corpus_path, out_path):
    """Rank and choose entities for every mention of a corpus."""
    graph, stats, corpus = _load_world(graph_path, links_path, corpus_path)
    model = load_model(model_path)
    system = load_system(system_path)
    cache = MembershipCache(graph)
    if params_path:
        with open(params_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        alpha = raw["alpha"]
        alpha = tuple(alpha) if isinstance(alpha, list) else (float(alpha),) * len(system.axes)
        params = SmoothingParams(alpha=alpha, beta=float(raw["beta"]))
    elif fit_corpus_path:
        fit_corpus = load_corpus(fit_corpus_path)
        params, fit_acc = fit_smoothing(fit_corpus, model, system, stats, graph, cache=cache)
        with open(out_path + ".params.json", "w", encoding="utf-8") as fh:
            json.dump({**params.as_dict(), "fit_accuracy": fit_acc.as_dict()}, fh, sort_keys=True)
    else:
        params = SmoothingParams.uniform(len(system.axes))
    decisions = link_corpus(corpus, model, system, stats, graph, params, cache=cache)
    with open(out_path, "w", encoding="utf-8") as fh:
        for d in decisions:
            fh.write(
                json.dumps(
                    {
                        "doc_id": d.doc_id,
                        "mention": d.mention_idx,
                        "text": d.text,
                        "chosen": d.chosen,
                        "scores": [[e, s] for e, s in d.ranked],
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    from .evalcore import system_accuracy

    accuracy = system_accuracy(decisions_to_predictions(decisions), corpus, stats)
    baseline = s_greedy(corpus, stats)
    _echo_json(
        {
            "decisions": len(decisions),
            "accuracy": accuracy.as_dict(),
            "s_greedy": baseline.as_dict(),
            "alpha": list(params.alpha),
            "beta": params.beta,
            "out": out_path,
        }
    )


@main.command("evaluate")
@click.option("--graph", "graph_path", required=True)
@click.option("--links", "links_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@click.option("--system", "system_path", default=None, help="defaults to the empty system")
@click.option("--lambda", "lam", type=float, default=ObjectiveConfig().lam)
def evaluate_cmd(graph_path, links_path, corpus_path, system_path, lam):
    """Oracle statistics and error table for a rule set (empty system shows
    the link-count baseline)."""
    graph, stats, corpus = _load_world(graph_path, links_path, corpus_path)
    from .typesys import TypeSystem

    system = load_system(system_path) if system_path else TypeSystem()
    outcome = evaluate_system(graph, stats, corpus, system, lam=lam)
    _echo_json(outcome.body)


@main.command("lambda-sweep")
@click.option("--graph", "graph_path", required=True)
@click.option("--links", "links_path", required=True)
@click.option("--corpus", "corpus_path", required=True)
@click.option("--pool", "pool_path", required=True)
@click.option("--method", type=click.Choice(["greedy", "beam", "cem", "ga"]), default="cem")
@click.option("--lambdas", default="1e-2,1e-3,1e-4,1e-5", show_default=True)
@click.option("--seeds", type=int, default=3, show_default=True)
@click.option("--out", "out_path", required=True, help="aggregated sweep TSV")
@click.option("--figures/--no-figures", "with_figures", default=True)
@_with_options(_search_options)
def lambda_sweep(graph_path, links_path, corpus_path, pool_path, method, lambdas, seeds, out_path,
                 with_figures, lam, seed, beam_width, cem_samples, cem_elite, cem_max_iters,
                 generations, population, max_evaluations, learn_path, learnability_seed):
    """Re-run the search across a grid of size penalties."""
    graph, stats, corpus = _load_world(graph_path, links_path, corpus_path)
    relations = load_relations(pool_path)
    cache = MembershipCache(graph)
    if learn_path:
        score = _load_learnability_tsv(learn_path, relations)
    else:
        score = learnability(relations, corpus, graph, master_seed=learnability_seed, cache=cache)
    pool = build_pool(graph, relations, score, cache=cache)
    grid = [float(v) for v in lambdas.split(",") if v]
    rows = []
    per_run = []
    for lam_value in grid:
        sizes, accs, js, iters = [], [], [], []
        for s in range(seeds):
            config = _search_config(method, beam_width, lam_value, seed + s, cem_samples, cem_elite,
                                    cem_max_iters, generations, population, max_evaluations)
            result = run_search(method, pool, corpus, stats, graph, config)
            sizes.append(len(result.selected))
            accs.append(result.accuracy.value)
            js.append(result.j)
            iters.append(max(0, len(result.trace) - 1))
            per_run.append([lam_value, seed + s, len(result.selected), result.accuracy.value,
                            result.j, max(0, len(result.trace) - 1), result.requested_evaluations])
        rows.append(
            {
                "lam": lam_value,
                "size_mean": statistics.fmean(sizes),
                "size_std": float(np.std(sizes)),
                "size_median": float(np.median(sizes)),
                "accuracy_mean": statistics.fmean(accs),
                "accuracy_std": float(np.std(accs)),
                "j_mean": statistics.fmean(js),
                "j_std": float(np.std(js)),
                "iterations_mean": statistics.fmean(iters),
                "iterations_std": float(np.std(iters)),
            }
        )
    _write_tsv(
        out_path,
        ["lambda", "accuracy_mean", "accuracy_std", "size_mean", "size_std", "size_median",
         "iterations_mean", "iterations_std", "j_mean", "j_std"],
        [[r["lam"], r["accuracy_mean"], r["accuracy_std"], r["size_mean"], r["size_std"],
          r["size_median"], r["iterations_mean"], r["iterations_std"], r["j_mean"], r["j_std"]] for r in rows],
    )
    runs_path = os.path.splitext(out_path)[0] + ".runs.tsv"
    _write_tsv(runs_path, ["lambda", "seed", "size", "accuracy", "j", "iterations", "evaluations"], per_run)
    out = {"out": out_path, "runs": runs_path, "method": method,
           "sizes_median": [r["size_median"] for r in rows]}
    if with_figures:
        out["figure"] = figures.render_lambda_sweep(rows, figures.figure_path(out_path))
    _echo_json(out)


@main.command("serve")
@click.option("--graph", "graph_path", default=None)
@click.option("--links", "links_path", default=None)
@click.option("--corpus", "corpus_path", default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--lambda", "lam", type=float, default=ObjectiveConfig().lam)
def serve_cmd(graph_path, links_path, corpus_path, host, port, lam):
    """Run the interactive designer service."""
    run_service(graph=graph_path, links=links_path, corpus=corpus_path, host=host, port=port, lam=lam)


if __name__ == "__main__":
    main()
