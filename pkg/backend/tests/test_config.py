"""
Test module for the environment-driven settings.
"""

import logging
import os
import sys
import unittest

# Add the parent directory to the path so we can import the modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from backend.app.config import Settings


class TestSettings(unittest.TestCase):
    """Test the Settings log level mapping."""

    def test_known_levels(self):
        for name, level in (("debug", logging.DEBUG), ("info", logging.INFO), ("warn", logging.WARNING), (" WARN ", logging.WARNING)):
            with self.subTest(name=name):
                settings = Settings(UNTANGLE_LOG=name)
                self.assertEqual(settings.log_level, level)
                self.assertTrue(settings.log_level_known)

    def test_unknown_level_falls_back_to_info(self):
        settings = Settings(UNTANGLE_LOG="chatty")
        self.assertEqual(settings.log_level, logging.INFO)
        self.assertFalse(settings.log_level_known)

    def test_defaults(self):
        settings = Settings()
        self.assertEqual(settings.APP_NAME, "untangle")
        self.assertEqual(settings.UNTANGLE_THREADS, 1)


if __name__ == "__main__":
    unittest.main()
