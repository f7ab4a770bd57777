"""chipmap: mapping-space exploration for multi-chiplet LLM-serving accelerators.

Submodules:
  trace      -- sequence-length traces and iteration-batch formation
  modelgraph -- per-batch layer DAG instantiation (merge-split-merge)
  mapping    -- mapping genome, partitioning, scheduling order, canonicals
  hw         -- accelerator description (chiplet grid, NoP, DRAM, energy)
  layercost  -- intra-chiplet analytical latency/energy model
  evaluator  -- data-access analysis and execution-timeline simulation
  search     -- genetic-algorithm mapping search and grid search
  cli        -- config-driven experiment runner
"""

__version__ = "0.1.0"

__all__ = [
    "trace",
    "modelgraph",
    "mapping",
    "hw",
    "layercost",
    "evaluator",
    "search",
    "cli",
]
