"""Credit-exposure graphs for DeFi protocols.

Builds weekly inter-protocol exposure graphs from token-holdings
snapshots, scores systemic risk on them, runs counterfactual contagion
stress tests, and trains a multi-task forecaster so every risk number
can also be computed on a predicted future graph.

Modules:
    graph       snapshot diffing, value flows, graph build/serialization
    mapper      token -> issuing protocol resolution (4-stage fallback)
    risk        systemic importance, spillovers, concentration, warnings
    contagion   threshold cascade stress engine and scenario specs
    features    node feature extraction for the forecaster
    nn          minimal MLP stack with manual backprop and Adam
    sampling    walk-forward splits, pair generation, negative sampling
    forecaster  multi-task training loop, prediction, checkpoints
    evaluation  ranking/error metrics, stress comparison, calibration
    synth       seeded synthetic holdings generator
    pipeline    stage commands over a shared artifact directory
    service     read-only JSON HTTP API over the artifacts
    cli         command-line entry point
"""

__version__ = "0.1.0"
