"""Grade Guard: guarded automated short-answer grading.

The pipeline grades each answer repeatedly with a stochastic backend, turns
the dispersion of the repeated grades into an indecisiveness score,
calibrates a score threshold by fitting a confidence-aware loss over a
threshold sweep, and routes answers above the threshold to a human review
queue instead of trusting the model.
"""

__version__ = "0.1.0"
