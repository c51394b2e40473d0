"""
Test module for the phase tracker.

This module tests the phase tracker functionality, including error entries and merging.
"""

import unittest
import sys
import os
import threading

# Add the parent directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

# Import the phase tracker
from backend.app.phase_tracker import PhaseTracker


def _phase_entries(tracker, phase):
    return [entry for entry in tracker.entries if entry["phase"] == phase]


class TestPhaseTracker(unittest.TestCase):
    """Test the phase tracker functionality."""

    def setUp(self):
        """Set up the test case."""
        self.tracker = PhaseTracker("test")

    def test_completed_phase(self):
        """Test a phase that completes."""
        with self.tracker.track("detect", iteration=0) as entry:
            entry["pairs"] = 12

        entries = _phase_entries(self.tracker, "detect")
        self.assertEqual(len(entries), 1)
        self.assertEqual(entries[0]["status"], "completed")
        self.assertEqual(entries[0]["iteration"], 0)
        self.assertEqual(entries[0]["pairs"], 12)
        self.assertGreaterEqual(self.tracker.totals["detect"], 0.0)

    def test_failed_phase(self):
        """Test a phase that raises."""
        with self.assertRaises(ValueError):
            with self.tracker.track("solve"):
                raise ValueError("Test failure")

        self.assertEqual(len(self.tracker.entries), 1)
        self.assertEqual(self.tracker.entries[0]["status"], "error")
        self.assertEqual(self.tracker.entries[0]["error"], "Test failure")
        self.assertIn("solve", self.tracker.summary())

    def test_totals_accumulate(self):
        """Test repeated entries of one phase."""
        for _ in range(3):
            with self.tracker.track("diffuse"):
                pass
        self.assertEqual(len(_phase_entries(self.tracker, "diffuse")), 3)
        self.assertNotIn("missing", self.tracker.totals)
        self.assertEqual(list(self.tracker.summary()), ["diffuse"])

    def test_merge(self):
        """Test merging another tracker."""
        other = PhaseTracker("other")
        with other.track("detect"):
            pass
        with self.tracker.track("detect"):
            pass
        with self.tracker.track("certify"):
            pass

        self.tracker.merge(other)
        self.assertEqual(len(_phase_entries(self.tracker, "detect")), 2)
        self.assertEqual(set(self.tracker.summary()), {"detect", "certify"})

    def test_threads(self):
        """Test entries from several threads."""
        def work():
            for _ in range(50):
                with self.tracker.track("solve"):
                    pass

        workers = [threading.Thread(target=work) for _ in range(4)]
        for worker in workers:
            worker.start()
        for worker in workers:
            worker.join()
        self.assertEqual(len(_phase_entries(self.tracker, "solve")), 200)


if __name__ == "__main__":
    unittest.main()
