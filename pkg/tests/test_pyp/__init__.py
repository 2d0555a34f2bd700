from __future__ import annotations

# valid (alpha, theta) pairs, theta close to -alpha included
PARAMETER_GRID = (
    (0.1, -0.05),
    (0.5, -0.45),
    (0.9, -0.85),
    (0.1, 1.0),
    (0.5, 1.0),
    (0.9, 1.0),
    (0.1, 10.0),
    (0.5, 10.0),
    (0.9, 10.0),
    (0.3, 0.0),
    (0.3, 100.0),
    (0.7, 0.5),
)
