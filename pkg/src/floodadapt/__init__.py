"""Desk-scale integrated assessment of pluvial-flood impacts on urban transport.

Chain: climate scenario sampling -> depression fill-spill flood simulation ->
multi-modal transport routing -> economic impacts, wrapped as an annual
decision process over zone-level drainage measures, with a graph-policy PPO
trainer, a Bayesian-optimization plan baseline, experiment harnesses, a CLI
and a planning session HTTP service.
"""

__version__ = "0.1.0"
