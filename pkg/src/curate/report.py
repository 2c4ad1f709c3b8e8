"""Run reports derived from a committed manifest.

The report is a pure function of the manifest: filter funnel with
per-stage conservation, rejection-reason histograms, per-tier counts and
durations, subcategory distribution before/after balancing, and packing
occupancy. Conservation (stage in == out + rejected) is computed and
checked here so a silently dropped clip shows up as a report error.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .manifest import Manifest


def _histogram(values: list[str]) -> dict[str, int]:
    out: dict[str, int] = {}
    for v in values:
        out[v] = out.get(v, 0) + 1
    return dict(sorted(out.items()))


def _occupancy_histogram(occupancies: list[float], bins: int = 10) -> dict[str, int]:
    hist: dict[str, int] = {}
    for occ in occupancies:
        b = min(int(occ * bins), bins - 1)
        key = f"[{b / bins:.1f},{(b + 1) / bins:.1f})"
        hist[key] = hist.get(key, 0) + 1
    return dict(sorted(hist.items()))


def emit_report(manifest: Manifest) -> dict:
    """Assemble the full report document from one manifest."""
    sources = manifest.ordered_sources()

    prefilter_reasons: list[str] = []
    prefilter_accepted = 0
    source_errors = 0
    for rec in sources:
        if rec.error and rec.prefilter is None:
            source_errors += 1
            continue
        if rec.prefilter and rec.prefilter.get("accepted"):
            prefilter_accepted += 1
        elif rec.prefilter:
            prefilter_reasons.extend(rec.prefilter.get("reasons", []))

    clips = [c for rec in sources for c in rec.clips]
    post_dedup = [c for c in clips if not c.get("dedup_dropped")]
    accepted = [c for c in post_dedup if c.get("filter") and c["filter"].get("tier")]
    rejected = [c for c in post_dedup if c.get("filter") and not c["filter"].get("tier")]
    filter_reasons = [r for c in rejected for r in c["filter"]["rejected_by"]]

    tier_counts: dict[str, int] = {}
    tier_durations: dict[str, float] = {}
    for c in accepted:
        tier = c["filter"]["tier"]
        tier_counts[tier] = tier_counts.get(tier, 0) + 1
        seconds = float(Fraction(c["frame_count"]) / Fraction(*c["fps"]))
        tier_durations[tier] = tier_durations.get(tier, 0.0) + seconds

    funnel = {
        "sources_in": len(sources),
        "sources_errored": sum(1 for r in sources if r.error),
        "prefilter_in": len(sources) - source_errors,
        "prefilter_accepted": prefilter_accepted,
        "prefilter_rejected": len(sources) - source_errors - prefilter_accepted,
        "prefilter_reasons": _histogram(prefilter_reasons),
        "clips_refined": len(clips),
        "dedup_dropped": len(clips) - len(post_dedup),
        "clips_post_dedup": len(post_dedup),
        "filter_accepted": len(accepted),
        "filter_rejected": len(rejected),
        "filter_reasons": _histogram(filter_reasons),
    }
    conservation_ok = (
        funnel["prefilter_in"]
        == funnel["prefilter_accepted"] + funnel["prefilter_rejected"]
        and funnel["clips_refined"]
        == funnel["clips_post_dedup"] + funnel["dedup_dropped"]
        and funnel["clips_post_dedup"]
        == funnel["filter_accepted"] + funnel["filter_rejected"]
    )

    balance_section = None
    if manifest.balance is not None:
        entries = manifest.balance.get("entries", [])
        after = _histogram([e["subcategory"] for e in entries])
        balance_section = {
            "before": dict(sorted(manifest.balance.get("counts_before", {}).items())),
            "plan": dict(sorted(manifest.balance.get("plan", {}).items())),
            "after": after,
            "total_after": len(entries),
        }

    pack_section = None
    if manifest.pack is not None:
        pack_section = {
            "max_len": manifest.pack.get("max_len"),
            "n_sequences": manifest.pack.get("n_sequences"),
            "n_batches": manifest.pack.get("n_batches"),
            "mean_occupancy": manifest.pack.get("mean_occupancy"),
            "occupancy_histogram": _occupancy_histogram(
                manifest.pack.get("occupancies", [])
            ),
            "errors": manifest.pack.get("errors", []),
        }

    return {
        "funnel": funnel,
        "conservation_ok": conservation_ok,
        "tiers": {
            "counts": dict(sorted(tier_counts.items())),
            "duration_seconds": {
                k: round(v, 3) for k, v in sorted(tier_durations.items())
            },
        },
        "balance": balance_section,
        "packing": pack_section,
    }


def format_report(report: dict, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True)
    lines = []
    funnel = report["funnel"]
    lines.append("== filter funnel ==")
    lines.append(
        f"sources: {funnel['sources_in']} in, {funnel['sources_errored']} errored"
    )
    lines.append(
        f"prefilter: {funnel['prefilter_in']} -> {funnel['prefilter_accepted']} "
        f"(rejected {funnel['prefilter_rejected']}: {funnel['prefilter_reasons']})"
    )
    lines.append(
        f"clips: {funnel['clips_refined']} refined, {funnel['dedup_dropped']} deduped, "
        f"{funnel['clips_post_dedup']} remain"
    )
    lines.append(
        f"tier filter: {funnel['filter_accepted']} accepted, "
        f"{funnel['filter_rejected']} rejected ({funnel['filter_reasons']})"
    )
    lines.append(f"conservation: {'ok' if report['conservation_ok'] else 'VIOLATED'}")
    lines.append("== tiers ==")
    for tier, count in report["tiers"]["counts"].items():
        seconds = report["tiers"]["duration_seconds"].get(tier, 0.0)
        lines.append(f"{tier}: {count} clips, {seconds:.1f} s")
    if report["balance"]:
        lines.append("== balance ==")
        lines.append(f"before: {report['balance']['before']}")
        lines.append(f"plan:   {report['balance']['plan']}")
        lines.append(f"after:  {report['balance']['after']}")
    if report["packing"]:
        lines.append("== packing ==")
        p = report["packing"]
        lines.append(
            f"{p['n_sequences']} sequences -> {p['n_batches']} batches @ max_len "
            f"{p['max_len']}, mean occupancy {p['mean_occupancy']:.3f}"
        )
        lines.append(f"occupancy: {p['occupancy_histogram']}")
        if p["errors"]:
            lines.append(f"pack errors: {p['errors']}")
    return "\n".join(lines) + "\n"
