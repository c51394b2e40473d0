"""
Phase Tracker Module for untangle

This module records the wall time spent in each phase of a run (detect,
classify, stencil, solve, diffuse, certify, ...). Every entry into a phase is
tracked with its status and duration, so a failing phase shows up in the
report next to the ones that completed.
"""

import logging
import threading
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List

# Configure logging
logger = logging.getLogger("untangle.phase_tracker")


class PhaseTracker:
    """
    Wall-clock tracker for named phases.

    Entries are kept in call order. Totals are summed per phase name.
    """

    def __init__(self, name: str = "run"):
        """
        Initialize the phase tracker.

        Args:
            name: Label used in log messages
        """
        self.name = name

        # Every tracked entry, in call order
        self.entries: List[Dict[str, Any]] = []

        # Accumulated seconds by phase name
        self.totals: Dict[str, float] = {}

        self._lock = threading.Lock()

        logger.debug(f"Initialized phase tracker '{name}'")

    @contextmanager
    def track(self, phase: str, **details: Any) -> Iterator[Dict[str, Any]]:
        """
        Time a block of code as one entry of a phase.

        Args:
            phase: Phase name
            **details: Extra fields stored with the entry

        Yields:
            The entry dictionary (callers may add fields to it)
        """
        entry = {"phase": phase, "status": "running", "seconds": 0.0, **details}
        with self._lock:
            self.entries.append(entry)
        start = time.perf_counter()
        try:
            yield entry
        except Exception as e:
            entry["status"] = "error"
            entry["error"] = str(e)
            logger.debug(f"Phase '{phase}' of {self.name} failed: {str(e)}")
            raise
        else:
            entry["status"] = "completed"
        finally:
            entry["seconds"] = time.perf_counter() - start
            with self._lock:
                self.totals[phase] = self.totals.get(phase, 0.0) + entry["seconds"]

    def merge(self, other: "PhaseTracker") -> None:
        """Add another tracker's totals and entries to this one."""
        with self._lock:
            self.entries.extend(other.entries)
            for phase, seconds in other.totals.items():
                self.totals[phase] = self.totals.get(phase, 0.0) + seconds

    def summary(self) -> Dict[str, float]:
        """Totals rounded for reports, in first-seen phase order."""
        return {phase: round(seconds, 6) for phase, seconds in self.totals.items()}
