"""Counterfactual explanations for group recommendations.

Finds small sets of previously interacted items whose removal evicts a
target item from a black-box group recommender's top-m list.
"""

from .dataset import Group, RatingsDataset, filter_eligible_users, load_amazon, load_movielens, sample_groups
from .recommender import BudgetExhausted, CallMeter, GroupRecommender, RecommendationList
from .search import METHODS, Explanation, SearchResult, explain

__all__ = [
    "BudgetExhausted", "CallMeter", "Explanation", "Group", "GroupRecommender", "METHODS",
    "RatingsDataset", "RecommendationList", "SearchResult", "explain", "filter_eligible_users",
    "load_amazon", "load_movielens", "sample_groups",
]
