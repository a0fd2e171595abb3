"""MIND: featureless attention message passing for network dismantling.

Library layout:
    graph       -- graph structure, removal, connectivity, exact LCC-AUC curves
    netgen      -- synthetic training graphs and degree-preserving rewiring
    diffcore    -- minimal reverse-mode autodiff, MLPs, Adam, Jacobi eigensolver
    encoder     -- the attention message-passing encoder and spectral estimator
    agent       -- decoders, replay buffer, discrete soft actor-critic trainer
    dismantler  -- policy rollouts, classic baselines, relative-AUC reports
    cli         -- command-line entry point (generate/train/dismantle/...)
"""

from .graph import (  # noqa: F401
    DismantlingCurve,
    Graph,
    auc_for_order,
    degree_assortativity,
    label_assortativity,
    lcc_fraction,
    load_edge_list,
    modularity_report,
)

__version__ = "0.1.0"
