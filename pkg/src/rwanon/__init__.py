"""Source-anonymous random-walk message passing on random regular graphs."""

from .closed_form import RRGContext
from .designer import DesignParams, design_basic, design_side_info, induced_posterior, optimize_kappa
from .distributions import DistanceDistribution, entropy, total_variation
from .graph import GraphTopology, generate_rrg
from .privacy import alpha_guarantee, privacy_report

__all__ = [
    "RRGContext", "DesignParams", "DistanceDistribution", "GraphTopology",
    "alpha_guarantee", "design_basic", "design_side_info", "entropy", "generate_rrg",
    "induced_posterior", "optimize_kappa", "privacy_report", "total_variation",
]
__version__ = "0.1.0"
