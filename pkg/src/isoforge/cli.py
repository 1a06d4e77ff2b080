"""Command-line interface.

Exit codes: 0 success, 2 configuration problem, 3 backend exhaustion,
4 scorer failure.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import analysis, figures
from .config import load_config
from .corpus import char_count, dataset_stats, load_parallel
from .errors import (BackendError, BackendUnreachable, ConfigError,
                     EmptyFailureSet, IsoforgeError, ScorerProtocolViolation,
                     ScorerUnavailable, Timeout)
from .metrics import DEFAULT_BLEU, corpus_bleu, length_metrics
from .pools import PoolType, build_pool, sample_shots
from .prompts import PromptConfig, render
from .runner import (cached_records, candidate_sets, cell_groups,
                     escalate_run, grid_from_cache, plan_cells, run_matrix)
from .scoring import ScorerHandle, open_scorer
from .selection import oracle_bleu_select, select_best


@click.group()
@click.version_option(package_name="isoforge")
def cli():
    """Length-controlled translation experiments with LLM prompting."""


_config_opt = click.option("--config", "config_path", required=True,
                           type=click.Path(), help="TOML experiment file.")
_set_opt = click.option("--set", "overrides", multiple=True,
                        metavar="KEY=VALUE",
                        help="Override a config value (repeatable).")


def _pool_choice(required=True):
    return click.option("--pool-type", required=required,
                        type=click.Choice([p.value for p in PoolType],
                                          case_sensitive=False))


@cli.command()
@click.option("--src", required=True, type=click.Path(exists=True))
@click.option("--tgt", required=True, type=click.Path(exists=True))
def stats(src, tgt):
    """Dataset statistics as CSV: n, mean/std length ratio, compliance."""
    stats_ = dataset_stats(load_parallel(src, tgt))
    click.echo("n,lr_mean,lr_std,lc")
    click.echo(f"{stats_.n},{stats_.lr_mean:.6f},{stats_.lr_std:.6f},"
               f"{stats_.lc:.4f}")


@cli.command("build-pools")
@click.option("--demo-src", required=True, type=click.Path(exists=True))
@click.option("--demo-tgt", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--n-cap", default=50, show_default=True)
def build_pools_cmd(demo_src, demo_tgt, out_dir, n_cap):
    """Write one JSON file per demonstration pool."""
    samples = load_parallel(demo_src, demo_tgt)
    by_id = {s.id: s for s in samples}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for pt in PoolType:
        pool = build_pool(samples, pt, n_cap)
        ratios = [by_id[i].ratio for i in pool.members]
        payload = {
            "pool_type": pt.value,
            "n": pool.size,
            "min": min(ratios),
            "max": max(ratios),
            "mean": pool.stats.lr_mean,
            "std": pool.stats.lr_std,
            "member_ids": list(pool.members),
        }
        path = out / f"{pt.value}.json"
        path.write_text(json.dumps(payload, indent=1) + "\n",
                        encoding="utf-8")
        click.echo(f"{path}  n={pool.size}")


@cli.command("render")
@click.option("--src-lang", default="English", show_default=True)
@click.option("--tgt-lang", default="German", show_default=True)
@_pool_choice()
@click.option("--source", required=True, help="Sentence to translate.")
@click.option("--demo", "demos", multiple=True, metavar="'SRC ||| TGT'",
              help="One demonstration pair (repeatable).")
@click.option("--restricted/--unrestricted", default=True,
              show_default=True)
@click.option("--matched/--mismatched", default=True, show_default=True)
def render_cmd(src_lang, tgt_lang, pool_type, source, demos, restricted,
               matched):
    """Print the exact prompt for a configuration (debugging aid)."""
    from .corpus import make_sample
    pairs = []
    for i, d in enumerate(demos):
        if " ||| " not in d:
            raise ConfigError([f"--demo needs 'SRC ||| TGT', got {d!r}"])
        s, t = d.split(" ||| ", 1)
        pairs.append(make_sample(i, s, t))
    config = PromptConfig(src_lang, tgt_lang, PoolType.parse(pool_type),
                          shots=len(pairs), restricted=restricted,
                          matched=matched)
    click.echo(render(config, pairs, source).text)


@cli.command("score")
@click.option("--src", required=True, type=click.Path(exists=True))
@click.option("--hyp", required=True, type=click.Path(exists=True))
@click.option("--ref", required=True, type=click.Path(exists=True))
def score_cmd(src, hyp, ref):
    """Length and BLEU metrics for a hypothesis file."""
    sources = Path(src).read_text(encoding="utf-8").splitlines()
    hyps = Path(hyp).read_text(encoding="utf-8").splitlines()
    refs = Path(ref).read_text(encoding="utf-8").splitlines()
    lr, lr_std, lc = length_metrics(list(zip(sources, hyps)))
    bleu = corpus_bleu(hyps, refs)
    click.echo("lr,lr_std,lc,bleu,signature")
    click.echo(f"{lr:.6f},{lr_std:.6f},{lc:.4f},{bleu:.4f},"
               f"{DEFAULT_BLEU.signature()}")


@cli.command("run")
@_config_opt
@_set_opt
@click.option("--dry-run", is_flag=True,
              help="Print the resolved cell matrix and exit.")
def run_cmd(config_path, overrides, dry_run):
    """Run the full experiment matrix against the configured backend."""
    cfg = load_config(config_path, overrides)
    cells = plan_cells(cfg)
    if dry_run:
        for c in cells:
            click.echo(f"cell model={c.model} pool={c.pool_type.value} "
                       f"shots={c.shots} runs={cfg.runs}")
        click.echo(f"total cells: {len(cells)}")
        return
    result = run_matrix(cfg)
    out_dir = Path(cfg.reports_dir) / cfg.name
    csv_path = analysis.emit_report(result.rows, "csv",
                                    out_dir / "grid.csv")
    analysis.emit_report(result.rows, "markdown", out_dir / "grid.md")
    click.echo(f"records: {len(result.records)} "
               f"(errors: {result.error_count})")
    click.echo(f"grid: {csv_path}")
    if result.error_count:
        errs = [r.error for r in result.records if r.error]
        click.echo(f"first error: {errs[0]}", err=True)


def _scorer_from_flags(cfg, scorer_cmd, scorer_url, batch_size):
    if scorer_cmd:
        return open_scorer(ScorerHandle("subprocess", scorer_cmd,
                                        batch_size))
    if scorer_url:
        return open_scorer(ScorerHandle("http", scorer_url, batch_size))
    return open_scorer(cfg.scorer)


@cli.command("select")
@_config_opt
@_set_opt
@click.option("--model", required=True)
@_pool_choice()
@click.option("--shots", required=True, type=int)
@click.option("--k", type=int, default=None,
              help="Use only the first k runs as candidates.")
@click.option("--scorer-cmd", default="",
              help="Subprocess scorer command line.")
@click.option("--scorer-url", default="", help="HTTP scorer base URL.")
@click.option("--batch-size", default=32, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def select_cmd(config_path, overrides, model, pool_type, shots, k,
               scorer_cmd, scorer_url, batch_size, out_path):
    """Best-of-k selection with a quality-estimation scorer."""
    cfg = load_config(config_path, overrides)
    sets = candidate_sets(cfg, cached_records(cfg), model,
                          PoolType.parse(pool_type), shots, k)
    if not sets:
        raise ConfigError(["no cached candidates for that cell; "
                           "run the matrix first"])
    scorer = _scorer_from_flags(cfg, scorer_cmd, scorer_url, batch_size)
    rows = []
    try:
        for cset in sets:
            res = select_best(cset, scorer)
            rows.append((cset, res))
    finally:
        scorer.close()
    _write_selection(cfg, rows, out_path,
                     f"select_{model}_{pool_type}_{shots}.csv")


@cli.command("oracle")
@_config_opt
@_set_opt
@click.option("--model", required=True)
@_pool_choice()
@click.option("--shots", required=True, type=int)
@click.option("--k", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def oracle_cmd(config_path, overrides, model, pool_type, shots, k,
               out_path):
    """Upper-bound best-of-k selection by sentence BLEU."""
    cfg = load_config(config_path, overrides)
    sets = candidate_sets(cfg, cached_records(cfg), model,
                          PoolType.parse(pool_type), shots, k)
    if not sets:
        raise ConfigError(["no cached candidates for that cell; "
                           "run the matrix first"])
    rows = [(cset, oracle_bleu_select(cset)) for cset in sets]
    _write_selection(cfg, rows, out_path,
                     f"oracle_{model}_{pool_type}_{shots}.csv")


def _write_selection(cfg, rows, out_path, default_name):
    out = Path(out_path) if out_path else (
        Path(cfg.reports_dir) / cfg.name / default_name)
    out.parent.mkdir(parents=True, exist_ok=True)
    import csv as _csv
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["sentence_id", "run_index", "score", "ratio",
                         "fallback", "text"])
        for cset, res in rows:
            # + 0.0 folds -0.0 into 0.0 so scorer transports agree
            writer.writerow([
                cset.sentence_id, res.chosen.run_index,
                f"{res.scores[res.chosen.run_index] + 0.0:.6f}",
                f"{res.chosen.ratio:.4f}", int(res.used_fallback),
                res.chosen.text])
    chosen_pairs = [(c.source, r.chosen.text) for c, r in rows]
    lr, _, lc = length_metrics(chosen_pairs)
    fallbacks = sum(1 for _, r in rows if r.used_fallback)
    click.echo(f"{out}")
    click.echo(f"sentences: {len(rows)}  lr: {lr:.4f}  lc: {lc:.2f}  "
               f"fallbacks: {fallbacks}")


@cli.command("analyze")
@_config_opt
@_set_opt
@click.option("--kind", type=click.Choice(["match-mismatch",
                                           "compliance"]),
              default="match-mismatch", show_default=True)
@click.option("--shots", default=5, show_default=True, type=int)
@click.option("--attempts", default=10, show_default=True, type=int)
@click.option("--alpha", default=0.1, show_default=True, type=float)
@click.option("--test", "test_name",
              type=click.Choice(["permutation", "t"]),
              default="permutation", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def analyze_cmd(config_path, overrides, kind, shots, attempts, alpha,
                test_name, out_path):
    """Instruction match vs mismatch, or failure-set compliance."""
    cfg = load_config(config_path, overrides)
    records = cached_records(cfg)
    out = Path(out_path) if out_path else (
        Path(cfg.reports_dir) / cfg.name / f"analyze_{kind}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    import csv as _csv
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        if kind == "match-mismatch":
            writer.writerow(["model", "pool_type", "shots", "mean_match",
                             "mean_mismatch", "diff", "p_value",
                             "significant", "n", "dropped"])
            for model in cfg.models:
                for pt in cfg.pool_types:
                    gm = cell_groups(cfg, records, model, pt, shots,
                                     matched=True)
                    gmm = cell_groups(cfg, records, model, pt, shots,
                                      matched=False)
                    common = sorted(set(gm) & set(gmm))
                    dropped = (len(gm) - len(common)) + (
                        len(gmm) - len(common))
                    if not common:
                        writer.writerow([model, pt.value, shots] +
                                        [""] * 6 + [dropped])
                        continue
                    row = analysis.match_mismatch_row(
                        model, pt.value,
                        {s: gm[s] for s in common},
                        {s: gmm[s] for s in common},
                        alpha=alpha, test=test_name)
                    writer.writerow([
                        model, pt.value, shots,
                        f"{row.mean_match:.4f}",
                        f"{row.mean_mismatch:.4f}", f"{row.diff:.4f}",
                        f"{row.p_value:.6f}", int(row.significant),
                        row.n, dropped])
        else:
            writer.writerow(["model", "pool_type", "shots", "attempts",
                             "percent", "failure_count", "total"])
            for model in cfg.models:
                default = cell_groups(cfg, records, model,
                                      PoolType.RANDOM, shots)
                if not default:
                    click.echo(f"note: no default-condition records for "
                               f"{model}", err=True)
                    continue
                for pt in cfg.pool_types:
                    if pt is PoolType.RANDOM:
                        continue
                    alt = cell_groups(cfg, records, model, pt, shots)
                    if not alt:
                        continue
                    try:
                        prop = analysis.compliance_proportion(
                            default, alt, attempts)
                    except EmptyFailureSet as e:
                        click.echo(f"note: {model}: {e}", err=True)
                        break
                    writer.writerow([
                        model, pt.value, shots, attempts,
                        f"{prop.percent:.2f}", prop.failure_count,
                        prop.total])
    click.echo(f"{out}")


@cli.command("report")
@_config_opt
@_set_opt
@click.option("--figures/--no-figures", "with_figures", default=True,
              show_default=True)
def report_cmd(config_path, overrides, with_figures):
    """Rebuild the report grid from the cache; write CSV, markdown,
    and charts."""
    cfg = load_config(config_path, overrides)
    rows = grid_from_cache(cfg)
    out_dir = Path(cfg.reports_dir) / cfg.name
    csv_path = analysis.emit_report(rows, "csv", out_dir / "report.csv")
    md_path = analysis.emit_report(rows, "markdown",
                                   out_dir / "report.md")
    click.echo(f"{csv_path}")
    click.echo(f"{md_path}")
    if with_figures:
        for p in figures.render_figures(rows, out_dir):
            click.echo(f"{p}")


@cli.command("escalate")
@_config_opt
@_set_opt
@click.option("--model", required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def escalate_cmd(config_path, overrides, model, out_path):
    """Regenerate until compliant, switching to the Tiny prompt after
    the default budget is spent."""
    cfg = load_config(config_path, overrides)
    results = escalate_run(cfg, model)
    out = Path(out_path) if out_path else (
        Path(cfg.reports_dir) / cfg.name / f"escalate_{model}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    import csv as _csv
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["sentence_id", "success", "escalated",
                         "attempts_default", "attempts_alt",
                         "final_ratio"])
        for sample, res in results:
            final = res.records[-1].truncated_output
            src = char_count(sample.source)
            ratio = char_count(final) / src if src else 0.0
            writer.writerow([sample.id, int(res.success),
                             int(res.escalated), res.attempts_default,
                             res.attempts_alt, f"{ratio:.4f}"])
    successes = sum(1 for _, r in results if r.success)
    click.echo(f"{out}")
    click.echo(f"sentences: {len(results)}  compliant: {successes} "
               f"({100.0 * successes / len(results):.1f}%)")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        return 130
    except click.ClickException as e:
        e.show()
        return 2
    except ConfigError as e:
        for problem in e.problems:
            click.echo(f"config error: {problem}", err=True)
        return 2
    except (BackendUnreachable, BackendError, Timeout) as e:
        click.echo(f"backend error: {e}", err=True)
        return 3
    except (ScorerUnavailable, ScorerProtocolViolation) as e:
        click.echo(f"scorer error: {e}", err=True)
        return 4
    except IsoforgeError as e:
        click.echo(f"error: {e}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
