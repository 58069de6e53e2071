"""Interactive Prolog problem-solving lab.

Learner submissions are parsed, screened against a command policy, run on
randomized tests against a hidden reference solution, and checked for
required structural idioms. Feedback, hint release, and a per-learner
progress model sit on top; a CLI and an HTTP service expose the whole
pipeline.
"""

__version__ = "0.1.0"
