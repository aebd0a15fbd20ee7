"""Markdown summary of an experiment run."""

import logging
from typing import List, Optional

from . import ExperimentSpec, PencilResult


logger = logging.getLogger(__name__)


def _fmt(value: Optional[float], spec: str = ".3e") -> str:
    return "-" if value is None else format(value, spec)


class ReportGenerator:
    """Generate human-readable experiment reports."""

    def generate(self, spec: ExperimentSpec, results: List[PencilResult]) -> str:
        """Markdown report with one row per s and the notes collected along the way."""
        logger.info("Generating experiment report")
        lines = []

        lines.append(f"# {spec.kind.value.title()} Perturbation Experiment")
        lines.append("")

        lines.append("## Settings")
        lines.append("")
        lines.append(f"- s values: {', '.join(str(s) for s in spec.s_values)}")
        lines.append(f"- Seed: {spec.seed}")
        lines.append(f"- Start perturbation: {spec.start_perturbation:.1e}")
        lines.append(f"- Quadratic-regime start perturbation: {spec.quadratic_start_perturbation:.1e}")
        lines.append(f"- Data perturbation: {spec.data_perturbation:.1e}")
        lines.append(f"- Zero residual only: {'yes' if spec.zero_residual else 'no'}")
        lines.append("")

        lines.append("## Condition Numbers and Rates")
        lines.append("")
        lines.append(
            "| s | kappa(x(s)) | kappa(x*) | rel. diff | residual* | fitted rate | "
            "theoretical rate | heuristic rate | fitted order | quadratic order |"
        )
        lines.append("|---|---|---|---|---|---|---|---|---|---|")
        for r in results:
            rel = None
            if r.kappa_star is not None and r.kappa_start > 0:
                rel = abs(r.kappa_star - r.kappa_start) / r.kappa_start
            theoretical = r.bounds.theoretical_linear_rate if r.bounds else None
            heuristic = None
            if r.bounds is not None and r.residual_star is not None:
                heuristic = r.bounds.E_hat * r.residual_star
            lines.append(
                f"| {r.s} | {_fmt(r.kappa_start, '.2e')} | {_fmt(r.kappa_star, '.2e')} | "
                f"{_fmt(rel, '.1e')} | {_fmt(r.residual_star)} | {_fmt(r.fitted_rate)} | "
                f"{_fmt(theoretical)} | {_fmt(heuristic)} | {_fmt(r.fitted_order, '.2f')} | "
                f"{_fmt(r.quadratic_order, '.2f')} |"
            )
        lines.append("")

        if any(r.wedin_lhs is not None for r in results):
            lines.append("## Pseudoinverse Perturbation Bound")
            lines.append("")
            lines.append("| s | lhs | rhs | lhs/rhs | alignment |")
            lines.append("|---|---|---|---|---|")
            for r in results:
                ratio = None
                if r.wedin_lhs is not None and r.wedin_rhs:
                    ratio = r.wedin_lhs / r.wedin_rhs
                lines.append(
                    f"| {r.s} | {_fmt(r.wedin_lhs)} | {_fmt(r.wedin_rhs)} | {_fmt(ratio, '.3f')} | "
                    f"{_fmt(r.perturbation_alignment, '.10f')} |"
                )
            lines.append("")

        lines.append("## Solver Status")
        lines.append("")
        for r in results:
            linear = r.linear_status.value if r.linear_status else "skipped"
            quadratic = r.quadratic_status.value if r.quadratic_status else "skipped"
            lines.append(
                f"- s={r.s}: linear {linear} ({r.linear_iterations} records), "
                f"quadratic {quadratic} ({r.quadratic_iterations} records, "
                f"final residual {_fmt(r.quadratic_final_residual)})"
            )
            for note in r.notes:
                lines.append(f"  - {note}")
        lines.append("")

        return "\n".join(lines)
