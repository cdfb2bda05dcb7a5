"""Analysis pipeline and report rendering.

``ContextualityAnalyzer.analyze`` runs the sections in a fixed order
(no-signaling, Bell, identity coupling, agreement, quasi-coupling). Each
section is computed independently, so a precondition failure in one of them
shows up as a status in that section instead of aborting the report.
"""

import json
import logging
import threading
import time
import traceback
from datetime import datetime
from typing import Dict, Iterable, List, Optional

import pandas as pd

from . import bell, coupling, quasi
from .errors import NoMultiVariableClass, NotABellSystem
from .system import System, check_no_signaling, fmt_rational

logger = logging.getLogger(__name__)

REPORT_VERSION = "1"
SKIPPABLE = ("quasi", "agreement")


def _support(dist_support, masses) -> List[Dict]:
    """Nonzero entries as [{"values": [...], "p": "a/b"}] in support order."""
    return [
        {"values": list(values), "p": fmt_rational(mass)}
        for values, mass in zip(dist_support, masses)
        if mass != 0
    ]


class ContextualityAnalyzer:
    def __init__(self, skip: Iterable[str] = (), timings: bool = False):
        self.skip = frozenset(skip)
        unknown = self.skip - set(SKIPPABLE)
        if unknown:
            raise ValueError(f"Cannot skip {sorted(unknown)}; choose from {list(SKIPPABLE)}")
        self.timings = timings
        self.stats = {
            'systems_analyzed': 0,
            'contextual': 0,
            'noncontextual': 0,
            'start_time': datetime.now(),
        }
        # analyze() may run on several worker threads at once
        self._stats_lock = threading.Lock()
        self.logger = logging.getLogger(__name__)

    def analyze(self, system: System) -> Dict:
        self.logger.info(f"Analyzing system {system.name!r}")
        elapsed: Dict[str, float] = {}
        report = {
            "report_version": REPORT_VERSION,
            "system": {
                "name": system.name,
                "contents": len(system.contents),
                "contexts": len(system.contexts),
                "identity_classes": len(system.identity_classes),
            },
            "validation": {"status": "valid"},
        }
        sections = (
            ("no_signaling", self._no_signaling),
            ("bell", self._bell),
            ("identity", self._identity),
            ("agreement", self._agreement),
            ("quasi", self._quasi),
        )
        for name, section in sections:
            if name in self.skip:
                report[name] = {"skipped": True}
                continue
            started = time.perf_counter()
            report[name] = section(system)
            elapsed[name] = time.perf_counter() - started

        verdict_key = 'noncontextual' if report["identity"]["exists"] else 'contextual'
        with self._stats_lock:
            self.stats['systems_analyzed'] += 1
            self.stats[verdict_key] += 1
        if self.timings:
            report["timings"] = {name: f"{seconds:.6f}" for name, seconds in elapsed.items()}
        return report

    def _no_signaling(self, system: System) -> Dict:
        ns = check_no_signaling(system)
        return {
            "pass": ns.passed,
            "max_discrepancy": fmt_rational(ns.max_discrepancy),
            "classes": [
                {"class": c.class_id, "pass": c.passed, "discrepancy": fmt_rational(c.discrepancy)}
                for c in ns.classes
            ],
        }

    def _bell(self, system: System) -> Dict:
        try:
            bs = bell.from_system(system)
        except NotABellSystem as e:
            self.logger.debug(f"Bell section not applicable: {str(e)}")
            return {"applicable": False}
        selectivity = bell.marginal_selectivity(bs)
        section = {
            "applicable": True,
            "classification": bell.classify(bs).value,
            "selectivity": {k: fmt_rational(v) for k, v in selectivity.discrepancies.items()},
            "chsh": fmt_rational(bell.chsh_value(bs)),
        }
        if not selectivity.holds:
            section["status"] = "undefined: signaling"
            return section
        ch = bell.ch_fine(bs)
        section["status"] = "defined"
        section["expressions"] = {f"{i}{j}": fmt_rational(e) for (i, j), e in ch.expressions.items()}
        section["satisfied"] = ch.satisfied
        section["max_violation"] = fmt_rational(ch.max_violation)
        return section

    def _identity(self, system: System) -> Dict:
        reduced = coupling.identity_coupling_exists(system)
        if reduced is None:
            return {"exists": False}
        return {
            "exists": True,
            "classes": [c.class_id for c in reduced.classes],
            "witness": _support(reduced.joint.support, reduced.joint.masses),
        }

    def _agreement(self, system: System) -> Dict:
        try:
            result = coupling.max_uniform_agreement(system)
        except NoMultiVariableClass as e:
            self.logger.debug(f"Agreement section not applicable: {str(e)}")
            return {"applicable": False}
        if result is None:
            return {"applicable": True, "p_max": None, "status": "no uniform agreement probability"}
        return {
            "applicable": True,
            "p_max": fmt_rational(result.p_max),
            "measure": fmt_rational(result.measure),
            "per_class": {class_id: fmt_rational(p) for class_id, p in result.per_class},
        }

    def _quasi(self, system: System) -> Dict:
        result = quasi.quasi_coupling(system)
        if result is None:
            return {"exists": False}
        return {
            "exists": True,
            "objective": "min-negativity quasi-coupling",
            "negativity": fmt_rational(result.negativity),
            "support": _support(result.measure.support, result.measure.masses),
        }

    def get_stats(self) -> Dict:
        """Get current analysis statistics."""
        with self._stats_lock:
            stats = self.stats.copy()
        stats['elapsed_time'] = str(datetime.now() - stats['start_time'])
        return stats


def analyze_system(system: System, skip: Iterable[str] = (), timings: bool = False) -> Dict:
    return ContextualityAnalyzer(skip, timings).analyze(system)


def verdict(report: Dict) -> Optional[bool]:
    """Noncontextual (True), contextual (False)."""
    return report["identity"]["exists"]


def render_json(report: Dict, indent: Optional[int] = 2) -> str:
    return json.dumps(report, indent=indent, ensure_ascii=False)


def render_text(report: Dict) -> str:
    """Human summary: one table per section."""
    lines = [f"System: {report['system']['name']} "
             f"({report['system']['contents']} contents, {report['system']['contexts']} contexts)"]

    ns = report["no_signaling"]
    if not ns.get("skipped"):
        lines.append("")
        lines.append(f"No-signaling: {'pass' if ns['pass'] else 'FAIL'} (max discrepancy {ns['max_discrepancy']})")
        df = pd.DataFrame(ns["classes"]).set_index("class")
        lines.append(df.to_string())

    section = report["bell"]
    if section.get("applicable"):
        lines.append("")
        lines.append(f"Bell 2x2: {section['classification']} (CHSH {section['chsh']})")
        if section["status"] == "defined":
            df = pd.DataFrame(
                [{"ij": k, "ch_fine": v} for k, v in section["expressions"].items()]
            ).set_index("ij")
            lines.append(df.to_string())
        else:
            lines.append(f"CH/Fine: {section['status']}")

    identity = report["identity"]
    lines.append("")
    lines.append(f"Identity coupling: {'exists' if identity['exists'] else 'does not exist'}")
    if identity["exists"]:
        lines.append(_support_table(identity["witness"], identity["classes"]))

    agreement = report["agreement"]
    lines.append("")
    if agreement.get("skipped"):
        lines.append("Agreement: skipped")
    elif not agreement.get("applicable"):
        lines.append("Agreement: not applicable (no multi-variable identity class)")
    elif agreement["p_max"] is None:
        lines.append(f"Agreement: {agreement['status']}")
    else:
        lines.append(f"Agreement: p_max {agreement['p_max']} (measure {agreement['measure']})")

    q = report["quasi"]
    lines.append("")
    if q.get("skipped"):
        lines.append("Quasi-coupling: skipped")
    elif not q["exists"]:
        lines.append("Quasi-coupling: does not exist")
    else:
        lines.append(f"Quasi-coupling: negativity {q['negativity']}")

    if "timings" in report:
        lines.append("")
        lines.append(pd.Series(report["timings"], name="seconds").to_string())
    return "\n".join(lines)


def _support_table(entries: List[Dict], columns: List[str]) -> str:
    df = pd.DataFrame([e["values"] + [e["p"]] for e in entries], columns=list(columns) + ["p"])
    return df.to_string(index=False)


def counts_table(counts: Dict[str, Dict]) -> str:
    """Per-context trial counts, one row per (context, tuple)."""
    rows = [
        {"context": ctx_id, "values": " ".join(values), "count": n}
        for ctx_id, table in counts.items()
        for values, n in table.items()
    ]
    return pd.DataFrame(rows, columns=["context", "values", "count"]).to_string(index=False)


def log_failure(path, e: Exception) -> None:
    logger.error(f"Error analyzing {path}: {str(e)}")
    logger.debug(traceback.format_exc())
