"""Run artifacts: CSV tables, the run manifest, and static SVG charts.

Charts are rendered from the emitted CSVs, never from in-memory results, so
every plotted number can be found in a table.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from pollsim.stats import CellSummary, ComparisonResult, HistogramTable, SubgroupPair

CELL_COLUMNS = [
    "source", "question_id", "ideology", "age_bin", "gender", "race",
    "n", "mean", "sd", "sem", "ci_low", "ci_high",
]
SIDE_FIELDS = ["n", "mean", "sd", "sem", "ci_low", "ci_high"]
COMPARISON_COLUMNS = (
    ["question_id", "grouping", "subgroup", "paired"]
    + [f"synthetic_{f}" for f in SIDE_FIELDS]
    + [f"human_{f}" for f in SIDE_FIELDS]
    + ["delta", "rho", "mape", "note"]
)
HISTOGRAM_COLUMNS = ["source", "question_id", "split", "level", "count", "frequency"]

MANIFEST_NAME = "manifest.json"


def fmt(value: Any) -> str:
    """Locale-independent cell text: shortest round-trip repr for floats, '' for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunManifest:
    run_id: str
    timestamp: str
    config: dict[str, Any]
    backend_id: str
    questionnaire_hash: str
    cost_estimate_usd: float | None = None
    parse_report: dict[str, Any] = field(default_factory=dict)
    extra: dict[str, Any] = field(default_factory=dict)

    def write(self, out_dir: str | Path) -> Path:
        path = Path(out_dir) / MANIFEST_NAME
        path.write_text(
            json.dumps(asdict(self), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
            newline="\n",
        )
        return path

    @classmethod
    def read(cls, out_dir: str | Path) -> "RunManifest":
        doc = json.loads((Path(out_dir) / MANIFEST_NAME).read_text(encoding="utf-8"))
        return cls(**doc)


def _write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def _side(summary: CellSummary) -> list[Any]:
    return [summary.n, summary.mean, summary.sd, summary.sem, summary.ci_low, summary.ci_high]


def _cell_rows(summaries: Iterable[tuple[str, CellSummary]]):
    for source, s in summaries:
        ideology, age, gender, race = s.cell.split("|")
        yield [source, s.question_id, ideology, age, gender, race, *_side(s)]


def _comparison_rows(comparisons: Iterable[ComparisonResult]):
    for comp in comparisons:
        pairs: list[tuple[SubgroupPair, bool]] = [(p, True) for p in comp.pairs]
        pairs += [(p, False) for p in comp.unpaired]
        for pair, paired in pairs:
            yield [
                comp.question_id,
                comp.grouping.value,
                pair.subgroup,
                int(paired),
                *_side(pair.synthetic),
                *_side(pair.human),
                pair.delta if paired else None,
                comp.rho,
                comp.mape,
                comp.rho_note,
            ]


def _histogram_rows(histograms: Iterable[tuple[str, HistogramTable]]):
    for source, h in histograms:
        for level, (count, freq) in enumerate(zip(h.counts, h.frequencies), start=1):
            yield [source, h.question_id, h.split, level, count, freq]


def emit_tables(
    summaries: Iterable[tuple[str, CellSummary]],
    comparisons: Iterable[ComparisonResult],
    histograms: Iterable[tuple[str, HistogramTable]],
    out_dir: str | Path,
    manifest: RunManifest | None = None,
) -> list[Path]:
    """Write cell_summaries.csv, comparisons.csv, histograms.csv and the manifest.

    ``summaries`` and ``histograms`` are ``(source, item)`` pairs where source
    is ``"synthetic"`` or ``"human"``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        _write_csv(out / "cell_summaries.csv", CELL_COLUMNS, _cell_rows(summaries)),
        _write_csv(out / "comparisons.csv", COMPARISON_COLUMNS, _comparison_rows(comparisons)),
        _write_csv(out / "histograms.csv", HISTOGRAM_COLUMNS, _histogram_rows(histograms)),
    ]
    if manifest is not None:
        paths.append(manifest.write(out))
    return paths


def load_tables(out_dir: str | Path) -> dict[str, list[dict[str, str]]]:
    tables = {}
    for name in ("cell_summaries", "comparisons", "histograms"):
        with open(Path(out_dir) / f"{name}.csv", newline="", encoding="utf-8") as fh:
            tables[name] = list(csv.DictReader(fh))
    return tables


def _num(text: str) -> float | None:
    return float(text) if text != "" else None


def format_summary(comparisons: Iterable[ComparisonResult]) -> str:
    """Plain-text question x grouping table of rho and MAPE (as percentages)."""
    comps = list(comparisons)
    groupings = list(dict.fromkeys(c.grouping.value for c in comps))
    questions = list(dict.fromkeys(c.question_id for c in comps))
    by_key = {(c.question_id, c.grouping.value): c for c in comps}
    width = max([len(q) for q in questions] + [8])
    head = "question".ljust(width) + "".join(f"  {g:>22}" for g in groupings)
    sub = " " * width + "".join(f"  {'rho':>10} {'MAPE':>11}" for _ in groupings)
    lines = [head, sub]
    for q in questions:
        cells = []
        for g in groupings:
            c = by_key.get((q, g))
            if c is None or not c.has_human_data:
                cells.append(f"  {'no human data':>22}")
                continue
            rho = f"{c.rho * 100:.1f}%" if c.rho is not None else "undef"
            err = f"{c.mape * 100:.1f}%" if c.mape is not None else "n/a"
            cells.append(f"  {rho:>10} {err:>11}")
        lines.append(q.ljust(width) + "".join(cells))
    return "\n".join(lines)


# --------------------------------------------------------------------------- charts

CHART_KINDS = ("scatter", "bars", "hist")


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "pollsim"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": "pollsim"})
    return path


def _scatter(plt, qid: str, rows: list[dict[str, str]], path: Path) -> Path:
    groupings = list(dict.fromkeys(r["grouping"] for r in rows))
    fig, axes = plt.subplots(1, len(groupings), figsize=(4 * len(groupings), 4), squeeze=False)
    for ax, grouping in zip(axes[0], groupings):
        pts = [r for r in rows if r["grouping"] == grouping]
        x = [float(r["human_mean"]) for r in pts]
        y = [float(r["synthetic_mean"]) for r in pts]
        xsd = [_num(r["human_sd"]) or 0.0 for r in pts]
        ysd = [_num(r["synthetic_sd"]) or 0.0 for r in pts]
        xse = [2 * (_num(r["human_sem"]) or 0.0) for r in pts]
        yse = [2 * (_num(r["synthetic_sem"]) or 0.0) for r in pts]
        thin = ax.errorbar(x, y, xerr=xsd, yerr=ysd, fmt="none", lw=0.5, alpha=0.4, color="gray")
        thick = ax.errorbar(x, y, xerr=xse, yerr=yse, fmt="none", lw=2.0, color="black")
        for container, tag in ((thin, "sd"), (thick, "sem2")):
            for art in container.lines[2]:
                art.set_gid(f"err-{tag}-{grouping}")
        marks = ax.scatter(x, y, s=20, zorder=3)
        marks.set_gid(f"points-{grouping}")
        lo = min(x + y) - 0.1
        hi = max(x + y) + 0.1
        (diag,) = ax.plot([lo, hi], [lo, hi], ls="--", color="red", lw=1)
        diag.set_gid(f"diagonal-{grouping}")
        rho, err = pts[0]["rho"], pts[0]["mape"]
        title = grouping
        if rho:
            title += f"  rho={float(rho) * 100:.0f}%"
        if err:
            title += f"  MAPE={float(err) * 100:.0f}%"
        ax.set_title(title, fontsize=9)
        ax.set_xlabel("human mean")
        ax.set_ylabel("synthetic mean")
    fig.suptitle(qid)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def _bars(plt, qid: str, rows: list[dict[str, str]], path: Path) -> Path:
    labels = [r["subgroup"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.38
    for offset, side in ((-width / 2, "synthetic"), (width / 2, "human")):
        xs, hs, err_lo, err_hi = [], [], [], []
        for i, r in enumerate(rows):
            mean = _num(r[f"{side}_mean"])
            if mean is None:
                continue
            xs.append(i + offset)
            hs.append(mean)
            err_lo.append(mean - float(r[f"{side}_ci_low"]))
            err_hi.append(float(r[f"{side}_ci_high"]) - mean)
        if not xs:
            continue
        bars = ax.bar(xs, hs, width, yerr=[err_lo, err_hi], capsize=2, label=side)
        for i, patch in enumerate(bars.patches):
            patch.set_gid(f"bar-{side}-{i}")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("mean score (95% bootstrap CI)")
    ax.set_title(f"{qid} by ideology")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def _hist(plt, qid: str, rows: list[dict[str, str]], path: Path) -> Path:
    splits = list(dict.fromkeys(r["split"] for r in rows))
    fig, axes = plt.subplots(len(splits), 1, figsize=(4, 2.5 * len(splits)), squeeze=False)
    width = 0.38
    for ax, split in zip(axes[:, 0], splits):
        for offset, source in ((-width / 2, "synthetic"), (width / 2, "human")):
            sel = [r for r in rows if r["split"] == split and r["source"] == source]
            if not sel:
                continue
            levels = [int(r["level"]) for r in sel]
            freqs = [float(r["frequency"]) for r in sel]
            bars = ax.bar([lv + offset for lv in levels], freqs, width, label=source)
            for lv, patch in zip(levels, bars.patches):
                patch.set_gid(f"hist-{source}-{split}-{lv}")
        ax.set_title(f"{qid}: {split}", fontsize=9)
        ax.set_xlabel("score")
        ax.set_ylabel("frequency")
        ax.legend(fontsize=7)
    fig.tight_layout()
    out = _save(fig, path)
    plt.close(fig)
    return out


def render_charts(tables: dict[str, list[dict[str, str]]], out_dir: str | Path) -> list[Path]:
    """One SVG per (question, chart kind) that has data.

    ``scatter_<q>.svg``: synthetic vs human subgroup means, one panel per
    grouping, with SD (thin) and 2-SEM (thick) error bars and the y=x line.
    ``bars_<q>.svg``: ideology means with bootstrap CIs.
    ``hist_<q>.svg``: score distributions split by gender.
    """
    plt = _pyplot()
    charts = Path(out_dir) / "charts"
    charts.mkdir(parents=True, exist_ok=True)
    comps = tables.get("comparisons", [])
    hists = tables.get("histograms", [])
    questions = list(dict.fromkeys([r["question_id"] for r in comps] + [r["question_id"] for r in hists]))
    written = []
    for qid in questions:
        paired = [r for r in comps if r["question_id"] == qid and r["paired"] == "1"]
        if paired:
            written.append(_scatter(plt, qid, paired, charts / f"scatter_{qid}.svg"))
        ideo = [r for r in comps if r["question_id"] == qid and r["grouping"] == "ideology"]
        if ideo:
            written.append(_bars(plt, qid, ideo, charts / f"bars_{qid}.svg"))
        qh = [r for r in hists if r["question_id"] == qid]
        if qh:
            written.append(_hist(plt, qid, qh, charts / f"hist_{qid}.svg"))
    return written
